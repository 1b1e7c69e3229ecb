//! Output-file plumbing: headered CSVs, JSON documents with embedded run
//! metadata, and the text tables in the shapes the evaluation expects.

use std::io::Write;
use std::path::Path;

use lobkinetics::series::MeasureSeries;
use lobkinetics::stats::FitReport;
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `# key: value` comment lines at the top of every CSV output.
pub fn csv_header(config: &RunConfig, extra: &[(String, String)]) -> String {
    let mut lines = String::new();
    lines.push_str(&format!("# tool: lobkinetics {TOOL_VERSION}\n"));
    lines.push_str(&format!("# command: {}\n", config.command));
    lines.push_str(&format!("# config_hash: {}\n", config.hash()));
    lines.push_str(&format!("# defaulted: {}\n", config.defaulted.join(",")));
    for (k, v) in extra {
        lines.push_str(&format!("# {k}: {v}\n"));
    }
    lines
}

#[derive(Serialize)]
pub struct RunMeta {
    pub tool: String,
    pub command: String,
    pub config_hash: String,
    pub defaulted: Vec<String>,
}

impl RunMeta {
    pub fn of(config: &RunConfig) -> Self {
        RunMeta {
            tool: format!("lobkinetics {TOOL_VERSION}"),
            command: config.command.clone(),
            config_hash: config.hash(),
            defaulted: config.defaulted.clone(),
        }
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Long-format measure CSV: `t_micros,measure,value`.
pub fn write_measure_csv(path: &Path, config: &RunConfig, series: &MeasureSeries) -> Result<(), CliError> {
    let mut out = Vec::new();
    let extra: Vec<(String, String)> = series
        .metadata
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    out.extend_from_slice(csv_header(config, &extra).as_bytes());
    out.extend_from_slice(b"t_micros,measure,value\n");
    for &(t, v) in &series.points {
        writeln!(out, "{t},{},{v}", series.name).expect("vec write");
    }
    write_bytes(path, &out)
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// Four significant digits, switching to scientific notation for large
/// magnitudes the way regression summaries print F statistics.
pub fn fmt_stat(v: f64) -> String {
    if !v.is_finite() {
        return "inf".into();
    }
    let a = v.abs();
    if a >= 1e4 {
        format!("{v:.3e}")
    } else if a >= 100.0 {
        format!("{v:.1}")
    } else if a >= 10.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

/// p-value formatting: "0.00" below representable, scientific otherwise.
pub fn fmt_pvalue(v: f64) -> String {
    if !v.is_finite() {
        return "nan".into();
    }
    if v == 0.0 || v < 1e-300 {
        "0.00".into()
    } else if v < 0.001 {
        format!("{v:.2e}")
    } else {
        fmt3(v)
    }
}

/// One row of the regression-analysis table.
pub struct RegressionRow {
    pub dataset: String,
    pub fit: Option<FitReport>,
    /// Reason the regression was not run (e.g. OFI without sizes).
    pub unavailable: Option<String>,
}

/// The regression-analysis table: one row per dataset x measure x horizon
/// with the diagnostic column set.
pub fn regression_analysis_table(rows: &[RegressionRow]) -> String {
    let headers = [
        "Dataset",
        "R^2",
        "F-statistic",
        "Prob(F-statistic)",
        "Omnibus",
        "Prob(Omnibus)",
        "Skew",
        "Kurtosis",
        "Durbin-Watson",
        "Jarque-Bera (JB)",
        "Prob(JB)",
    ];
    let mut cells: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
    for row in rows {
        match (&row.fit, &row.unavailable) {
            (Some(fit), _) => cells.push(vec![
                row.dataset.clone(),
                fmt3(fit.r2),
                fmt_stat(fit.f_stat),
                fmt_pvalue(fit.f_pvalue),
                fmt3(fit.omnibus),
                fmt_pvalue(fit.omnibus_pvalue),
                fmt3(fit.skew),
                fmt3(fit.kurtosis),
                fmt3(fit.durbin_watson),
                fmt3(fit.jarque_bera),
                fmt_pvalue(fit.jb_pvalue),
            ]),
            (None, Some(reason)) => {
                let mut r = vec![row.dataset.clone(), format!("unavailable ({reason})")];
                r.extend(std::iter::repeat_n(String::from("-"), headers.len() - 2));
                cells.push(r);
            }
            (None, None) => unreachable!("row without fit or reason"),
        }
    }
    render_table("The regression analysis", &cells)
}

/// The fitted-model table: alpha_i/beta_i rows with coefficient and
/// interval columns.
pub fn fitted_model_table(rows: &[RegressionRow]) -> String {
    let headers = ["The fitted model", "Coefficient", "Standard error", "t", "P>|t|", "[2.5%,", "97.5%]"];
    let mut cells: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
    let mut index = 0usize;
    for row in rows {
        let Some(fit) = &row.fit else { continue };
        index += 1;
        for (name, coef) in [(format!("alpha_{index}"), &fit.alpha), (format!("beta_{index}"), &fit.beta)] {
            cells.push(vec![
                name,
                fmt_coef(coef.estimate),
                fmt_coef(coef.std_error),
                fmt3(coef.t_stat),
                fmt3(coef.p_value),
                fmt_coef(coef.ci_low),
                fmt_coef(coef.ci_high),
            ]);
        }
    }
    render_table("The fitted model", &cells)
}

/// Coefficients span many magnitudes; keep four decimals for readable ones
/// and scientific for tiny slopes.
fn fmt_coef(v: f64) -> String {
    if !v.is_finite() {
        return "inf".into();
    }
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

/// The prediction-accuracy comparison table.
pub fn accuracy_table(rows: &[(String, Vec<(String, Option<f64>)>)]) -> String {
    let mut headers = vec!["Accuracy in %".to_string()];
    if let Some((_, cols)) = rows.first() {
        for (h, _) in cols {
            headers.push(format!("{h} price change"));
        }
    }
    let mut cells = vec![headers];
    for (name, cols) in rows {
        let mut row = vec![name.clone()];
        for (_, acc) in cols {
            row.push(match acc {
                Some(v) => format!("{v:.2}"),
                None => "N/A".into(),
            });
        }
        cells.push(row);
    }
    render_table("The comparison on prediction accuracy", &cells)
}

/// Monospace table with a caption, a header rule, and one row per line.
fn render_table(caption: &str, cells: &[Vec<String>]) -> String {
    let cols = cells.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for row in cells {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    out.push_str(caption);
    out.push('\n');
    let total: usize = widths.iter().sum::<usize>() + 2 * (cols - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for (r, row) in cells.iter().enumerate() {
        let mut line = String::new();
        for (i, width) in widths.iter().enumerate() {
            let cell = row.get(i).map(String::as_str).unwrap_or("");
            if i == 0 {
                line.push_str(&format!("{cell:<width$}"));
            } else {
                line.push_str(&format!("{cell:>width$}"));
            }
            if i + 1 < cols {
                line.push_str("  ");
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
        if r == 0 {
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out.push_str(&"-".repeat(total));
    out.push('\n');
    out
}
