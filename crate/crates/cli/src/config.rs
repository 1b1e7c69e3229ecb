//! Run configuration: JSON config file mirrored by flags, flags win.
//!
//! The fully resolved configuration (defaults included) is serialized,
//! hashed, and embedded in every output file so a run can be reproduced
//! from its artifacts alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const DEFAULT_DT_SECS: f64 = 0.1;
pub const DEFAULT_WINDOW_SECS: f64 = 1.0;
pub const DEFAULT_HORIZONS: [f64; 2] = [1.0, 10.0];
pub const DEFAULT_VPIN_ROLLING: usize = 50;
pub const DEFAULT_N_AR_LAGS: usize = 5;
pub const DEFAULT_GRANGER_LAGS: &str = "1:300:30";
pub const DEFAULT_LOCAL_VOL_WINDOW_SECS: f64 = 30.0;
pub const DEFAULT_HIST_VOL_WINDOW_SECS: f64 = 300.0;
pub const DEFAULT_DEPTH_GRID_POINTS: usize = 200;

/// Optional-field layer: what a config file or the flag set provides.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub full: Option<PathBuf>,
    pub ticker: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub format: Option<String>,
    pub dt_secs: Option<f64>,
    pub window_secs: Option<f64>,
    pub depth_grid: Option<String>,
    pub signed_correlation: Option<bool>,
    pub alpha_ticks: Option<i64>,
    pub horizons_secs: Option<Vec<f64>>,
    pub vpin_bucket_units: Option<u64>,
    pub vpin_rolling_n: Option<usize>,
    pub granger_lags: Option<String>,
    pub n_ar_lags: Option<usize>,
    pub local_vol_window_secs: Option<f64>,
    pub hist_vol_window_secs: Option<f64>,
    pub strict: Option<bool>,
    pub out: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
}

impl PartialConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }

    /// Overlay: fields set in `flags` replace fields from the file.
    pub fn overlay(file: PartialConfig, flags: PartialConfig) -> PartialConfig {
        PartialConfig {
            full: flags.full.or(file.full),
            ticker: flags.ticker.or(file.ticker),
            manifest: flags.manifest.or(file.manifest),
            format: flags.format.or(file.format),
            dt_secs: flags.dt_secs.or(file.dt_secs),
            window_secs: flags.window_secs.or(file.window_secs),
            depth_grid: flags.depth_grid.or(file.depth_grid),
            signed_correlation: flags.signed_correlation.or(file.signed_correlation),
            alpha_ticks: flags.alpha_ticks.or(file.alpha_ticks),
            horizons_secs: flags.horizons_secs.or(file.horizons_secs),
            vpin_bucket_units: flags.vpin_bucket_units.or(file.vpin_bucket_units),
            vpin_rolling_n: flags.vpin_rolling_n.or(file.vpin_rolling_n),
            granger_lags: flags.granger_lags.or(file.granger_lags),
            n_ar_lags: flags.n_ar_lags.or(file.n_ar_lags),
            local_vol_window_secs: flags.local_vol_window_secs.or(file.local_vol_window_secs),
            hist_vol_window_secs: flags.hist_vol_window_secs.or(file.hist_vol_window_secs),
            strict: flags.strict.or(file.strict),
            out: flags.out.or(file.out),
            predictions: flags.predictions.or(file.predictions),
        }
    }
}

/// Fully resolved configuration for the analysis commands.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub full: PathBuf,
    pub ticker: Option<PathBuf>,
    pub manifest: PathBuf,
    pub format: String,
    pub dt_secs: f64,
    pub window_secs: f64,
    /// "min:max:n" in ticks (log-spaced) or "auto".
    pub depth_grid: String,
    pub signed_correlation: bool,
    /// Fixed active depth; None means estimate it from the session.
    pub alpha_ticks: Option<i64>,
    pub horizons_secs: Vec<f64>,
    /// None means 1/50 of the session's total matched volume.
    pub vpin_bucket_units: Option<u64>,
    pub vpin_rolling_n: usize,
    pub granger_lags: String,
    pub n_ar_lags: usize,
    pub local_vol_window_secs: f64,
    pub hist_vol_window_secs: f64,
    pub strict: bool,
    pub out: PathBuf,
    pub predictions: Option<PathBuf>,
    /// Fields that were not given explicitly and fell back to defaults.
    pub defaulted: Vec<String>,
}

impl RunConfig {
    pub fn resolve(command: &str, merged: PartialConfig) -> Result<RunConfig, CliError> {
        let mut defaulted = Vec::new();
        let mut dflt = |name: &str| defaulted.push(name.to_string());

        let full = merged
            .full
            .ok_or_else(|| CliError::Config("missing --full (full-channel capture path)".into()))?;
        let manifest = merged
            .manifest
            .ok_or_else(|| CliError::Config("missing --manifest (dataset manifest path)".into()))?;
        let format = merged.format.unwrap_or_else(|| {
            dflt("format");
            "csv".into()
        });
        if format != "csv" && format != "jsonl" {
            return Err(CliError::Config(format!("unknown format {format:?} (csv or jsonl)")));
        }
        let dt_secs = merged.dt_secs.unwrap_or_else(|| {
            dflt("dt_secs");
            DEFAULT_DT_SECS
        });
        let window_secs = merged.window_secs.unwrap_or_else(|| {
            dflt("window_secs");
            DEFAULT_WINDOW_SECS
        });
        let depth_grid = merged.depth_grid.unwrap_or_else(|| {
            dflt("depth_grid");
            "auto".into()
        });
        let signed_correlation = merged.signed_correlation.unwrap_or_else(|| {
            dflt("signed_correlation");
            false
        });
        let horizons_secs = merged.horizons_secs.unwrap_or_else(|| {
            dflt("horizons_secs");
            DEFAULT_HORIZONS.to_vec()
        });
        let vpin_rolling_n = merged.vpin_rolling_n.unwrap_or_else(|| {
            dflt("vpin_rolling_n");
            DEFAULT_VPIN_ROLLING
        });
        if merged.vpin_bucket_units.is_none() {
            dflt("vpin_bucket_units");
        }
        let granger_lags = merged.granger_lags.unwrap_or_else(|| {
            dflt("granger_lags");
            DEFAULT_GRANGER_LAGS.into()
        });
        let n_ar_lags = merged.n_ar_lags.unwrap_or_else(|| {
            dflt("n_ar_lags");
            DEFAULT_N_AR_LAGS
        });
        let local_vol_window_secs = merged.local_vol_window_secs.unwrap_or_else(|| {
            dflt("local_vol_window_secs");
            DEFAULT_LOCAL_VOL_WINDOW_SECS
        });
        let hist_vol_window_secs = merged.hist_vol_window_secs.unwrap_or_else(|| {
            dflt("hist_vol_window_secs");
            DEFAULT_HIST_VOL_WINDOW_SECS
        });
        let strict = merged.strict.unwrap_or(false);
        let out = merged.out.unwrap_or_else(|| {
            dflt("out");
            PathBuf::from("out")
        });

        let config = RunConfig {
            command: command.to_string(),
            full,
            ticker: merged.ticker,
            manifest,
            format,
            dt_secs,
            window_secs,
            depth_grid,
            signed_correlation,
            alpha_ticks: merged.alpha_ticks,
            horizons_secs,
            vpin_bucket_units: merged.vpin_bucket_units,
            vpin_rolling_n,
            granger_lags,
            n_ar_lags,
            local_vol_window_secs,
            hist_vol_window_secs,
            strict,
            out,
            predictions: merged.predictions,
            defaulted,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.dt_secs > 0.0) {
            return Err(CliError::Config(format!("dt must be positive, got {}", self.dt_secs)));
        }
        if !(self.window_secs > 0.0) {
            return Err(CliError::Config(format!(
                "window must be positive, got {}",
                self.window_secs
            )));
        }
        if self.horizons_secs.is_empty() || self.horizons_secs.iter().any(|&h| !(h > 0.0)) {
            return Err(CliError::Config("horizons must be positive".into()));
        }
        if self.vpin_rolling_n == 0 {
            return Err(CliError::Config("vpin rolling window must be positive".into()));
        }
        if self.n_ar_lags == 0 {
            return Err(CliError::Config("need at least one autoregressive lag".into()));
        }
        if self.depth_grid != "auto" {
            parse_grid_spec(&self.depth_grid)?;
        }
        parse_lag_spec(&self.granger_lags)?;
        if !self.full.exists() {
            return Err(CliError::Config(format!("full-channel path {} does not exist", self.full.display())));
        }
        if !self.manifest.exists() {
            return Err(CliError::Config(format!("manifest path {} does not exist", self.manifest.display())));
        }
        if let Some(t) = &self.ticker {
            if !t.exists() {
                return Err(CliError::Config(format!("ticker path {} does not exist", t.display())));
            }
        }
        if let Some(p) = &self.predictions {
            if !p.exists() {
                return Err(CliError::Config(format!("predictions path {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn dt_micros(&self) -> i64 {
        (self.dt_secs * 1e6).round() as i64
    }

    pub fn window_micros(&self) -> i64 {
        (self.window_secs * 1e6).round() as i64
    }

    /// Depth grid in ticks; `auto` log-spaces from one tick to 10% of the
    /// initial midprice.
    pub fn depth_grid_ticks(&self, initial_mid_ticks: i64) -> Result<Vec<i64>, CliError> {
        if self.depth_grid == "auto" {
            return Ok(lobkinetics::physics::default_depth_grid(
                initial_mid_ticks,
                DEFAULT_DEPTH_GRID_POINTS,
            ));
        }
        let (min, max, n) = parse_grid_spec(&self.depth_grid)?;
        Ok(lobkinetics::physics::log_depth_grid(min, max, n))
    }

    pub fn granger_lag_secs(&self) -> Result<Vec<i64>, CliError> {
        let (min, max, n) = parse_lag_spec(&self.granger_lags)?;
        let mut lags: Vec<i64> = (0..n)
            .map(|i| {
                if n == 1 {
                    min
                } else {
                    min + ((max - min) as f64 * i as f64 / (n - 1) as f64).round() as i64
                }
            })
            .collect();
        lags.sort_unstable();
        lags.dedup();
        Ok(lags)
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].to_string()
    }
}

pub fn parse_grid_spec(spec: &str) -> Result<(i64, i64, usize), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("depth grid spec {spec:?} is not min:max:n")));
    }
    let min: i64 = parts[0]
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid min {:?}: {e}", parts[0])))?;
    let max: i64 = parts[1]
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid max {:?}: {e}", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|e| CliError::Config(format!("bad grid count {:?}: {e}", parts[2])))?;
    if min < 0 || max < min || n == 0 {
        return Err(CliError::Config(format!("grid spec {spec:?} out of range")));
    }
    Ok((min, max, n))
}

pub fn parse_lag_spec(spec: &str) -> Result<(i64, i64, usize), CliError> {
    let (min, max, n) = parse_grid_spec(spec)?;
    if min < 1 {
        return Err(CliError::Config("lag offsets start at one second".into()));
    }
    Ok((min, max, n))
}

pub fn parse_horizons(spec: &str) -> Result<Vec<f64>, CliError> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad horizon {s:?}: {e}")))
        })
        .collect()
}
