//! Evaluation battery: simple OLS with summary diagnostics, Granger
//! causality sweeps, horizon price changes, and directional accuracy.
//!
//! The diagnostic set mirrors the usual regression summary: F-test of the
//! slope, Durbin-Watson, Jarque-Bera and the D'Agostino-Pearson omnibus
//! normality test, residual skew and raw kurtosis. Formulas follow the
//! standard statsmodels/scipy definitions so results are directly
//! comparable with those tools.

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

/// Pearson correlation; None when either series is constant or too short.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// ΔP_k = P(t_k + horizon) - P(t_k) on a regular grid; the final `horizon`
/// points have no forward observation and are dropped.
pub fn horizon_price_changes(prices: &[f64], horizon_steps: usize) -> Result<Vec<f64>> {
    if horizon_steps == 0 {
        return Err(Error::InvalidValue("horizon must be at least one step".into()));
    }
    if prices.len() <= horizon_steps {
        return Err(Error::SeriesTooShort {
            required: horizon_steps + 1,
            actual: prices.len(),
        });
    }
    Ok((0..prices.len() - horizon_steps)
        .map(|k| prices[k + horizon_steps] - prices[k])
        .collect())
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CoefficientReport {
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Simple-regression output bundle.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FitReport {
    pub alpha: CoefficientReport,
    pub beta: CoefficientReport,
    pub r2: f64,
    pub f_stat: f64,
    pub f_pvalue: f64,
    pub durbin_watson: f64,
    /// True when residuals vanish and Durbin-Watson is reported as 2 by
    /// convention.
    pub dw_degenerate: bool,
    pub jarque_bera: f64,
    pub jb_pvalue: f64,
    pub omnibus: f64,
    pub omnibus_pvalue: f64,
    pub skew: f64,
    /// Raw (non-excess) kurtosis of the residuals.
    pub kurtosis: f64,
    pub n_obs: usize,
}

/// Ordinary least squares of y on a single regressor with intercept.
pub fn ols(y: &[f64], x: &[f64]) -> Result<FitReport> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    let n = y.len();
    if n < 3 {
        return Err(Error::SeriesTooShort { required: 3, actual: n });
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut tss = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        tss += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let beta = sxy / sxx;
    let alpha = mean_y - beta * mean_x;

    let residuals: Vec<f64> = y.iter().zip(x).map(|(yi, xi)| yi - alpha - beta * xi).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let df = (n - 2) as f64;
    let degenerate = rss <= 1e-28 * tss.max(1e-300);

    let sigma2 = rss / df;
    let se_beta = (sigma2 / sxx).sqrt();
    let se_alpha = (sigma2 * (1.0 / nf + mean_x * mean_x / sxx)).sqrt();
    let r2 = if tss == 0.0 { 0.0 } else { 1.0 - rss / tss };

    let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidValue(e.to_string()))?;
    let t_crit = t_dist.inverse_cdf(0.975);
    let coef = |est: f64, se: f64| -> CoefficientReport {
        let t = if se == 0.0 {
            if est == 0.0 { 0.0 } else { f64::INFINITY * est.signum() }
        } else {
            est / se
        };
        let p = if t.is_finite() { 2.0 * (1.0 - t_dist.cdf(t.abs())) } else { 0.0 };
        CoefficientReport {
            estimate: est,
            std_error: se,
            t_stat: t,
            p_value: p,
            ci_low: est - t_crit * se,
            ci_high: est + t_crit * se,
        }
    };

    let ess = tss - rss;
    let f_stat = if rss == 0.0 { f64::INFINITY } else { ess / (rss / df) };
    let f_pvalue = if f_stat.is_finite() {
        let f_dist = FisherSnedecor::new(1.0, df).map_err(|e| Error::InvalidValue(e.to_string()))?;
        1.0 - f_dist.cdf(f_stat.max(0.0))
    } else {
        0.0
    };

    let (durbin_watson, skew, kurtosis, jarque_bera, jb_pvalue, omnibus, omnibus_pvalue) = if degenerate {
        // Zero residuals carry no autocorrelation or shape information.
        (2.0, 0.0, 3.0, 0.0, 1.0, 0.0, 1.0)
    } else {
        let dw_num: f64 = residuals.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
        let dw = dw_num / rss;
        let m2 = residuals.iter().map(|e| e * e).sum::<f64>() / nf;
        let m3 = residuals.iter().map(|e| e * e * e).sum::<f64>() / nf;
        let m4 = residuals.iter().map(|e| e * e * e * e).sum::<f64>() / nf;
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2);
        let jb = nf / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0);
        let chi2 = ChiSquared::new(2.0).map_err(|e| Error::InvalidValue(e.to_string()))?;
        let jb_p = 1.0 - chi2.cdf(jb);
        let (omni, omni_p) = if n >= 8 {
            let k2 = skew_test_z(skew, n).powi(2) + kurtosis_test_z(kurt, n).powi(2);
            (k2, 1.0 - chi2.cdf(k2))
        } else {
            (f64::NAN, f64::NAN)
        };
        (dw, skew, kurt, jb, jb_p, omni, omni_p)
    };

    Ok(FitReport {
        alpha: coef(alpha, se_alpha),
        beta: coef(beta, se_beta),
        r2,
        f_stat,
        f_pvalue,
        durbin_watson,
        dw_degenerate: degenerate,
        jarque_bera,
        jb_pvalue,
        omnibus,
        omnibus_pvalue,
        skew,
        kurtosis,
        n_obs: n,
    })
}

/// D'Agostino skewness-test z-score (the transformation scipy uses).
fn skew_test_z(b1: f64, n: usize) -> f64 {
    let n = n as f64;
    let mut y = b1 * (((n + 1.0) * (n + 3.0)) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    if y == 0.0 {
        y = 1.0;
    }
    delta * (y / alpha + ((y / alpha) * (y / alpha) + 1.0).sqrt()).ln()
}

/// Anscombe-Glynn kurtosis-test z-score (the transformation scipy uses).
fn kurtosis_test_z(b2: f64, n: usize) -> f64 {
    let n = n as f64;
    let e = 3.0 * (n - 1.0) / (n + 1.0);
    let var_b2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    let x = (b2 - e) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * ((6.0 * (n + 3.0) * (n + 5.0)) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).powf(1.0 / 3.0);
    (term1 - term2) / (2.0 / (9.0 * a)).sqrt()
}

/// Per-offset p-values of the Granger F-test.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GrangerSweep {
    /// Offsets in grid steps: at offset L the candidate series enters with
    /// lags L, L+1, ..., L + n_ar_lags - 1.
    pub lag_offsets: Vec<usize>,
    pub p_values: Vec<f64>,
    /// Offsets where the unrestricted design was collinear (p forced to 1).
    pub collinear: Vec<bool>,
    pub n_ar_lags: usize,
}

/// Test whether x improves the AR(p) prediction of y at each lag offset.
pub fn granger(y: &[f64], x: &[f64], lag_offsets: &[usize], n_ar_lags: usize) -> Result<GrangerSweep> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: x.len(),
        });
    }
    if n_ar_lags == 0 {
        return Err(Error::InvalidValue("need at least one autoregressive lag".into()));
    }
    let n = y.len();
    if n < 10 * n_ar_lags {
        return Err(Error::SeriesTooShort {
            required: 10 * n_ar_lags,
            actual: n,
        });
    }
    let p = n_ar_lags;
    let mut p_values = Vec::with_capacity(lag_offsets.len());
    let mut collinear = Vec::with_capacity(lag_offsets.len());
    for &offset in lag_offsets {
        let start = p.max(offset + p - 1).max(1);
        if start >= n || n - start < 2 * p + 3 {
            return Err(Error::SeriesTooShort {
                required: start + 2 * p + 3,
                actual: n,
            });
        }
        let m = n - start;
        let mut target = DVector::zeros(m);
        let mut restricted = DMatrix::zeros(m, 1 + p);
        let mut unrestricted = DMatrix::zeros(m, 1 + 2 * p);
        for (row, t) in (start..n).enumerate() {
            target[row] = y[t];
            restricted[(row, 0)] = 1.0;
            unrestricted[(row, 0)] = 1.0;
            for j in 0..p {
                restricted[(row, 1 + j)] = y[t - 1 - j];
                unrestricted[(row, 1 + j)] = y[t - 1 - j];
                unrestricted[(row, 1 + p + j)] = x[t - offset - j];
            }
        }
        let rss_r = fit_rss(&restricted, &target);
        let rss_u = fit_rss(&unrestricted, &target);
        match (rss_r, rss_u) {
            (Some(rss_r), Some(rss_u)) => {
                let df_resid = (m - (2 * p + 1)) as f64;
                if rss_u <= 0.0 || rss_u <= 1e-28 * rss_r.max(1e-300) {
                    p_values.push(0.0);
                    collinear.push(false);
                } else {
                    let f = ((rss_r - rss_u).max(0.0) / p as f64) / (rss_u / df_resid);
                    let dist = FisherSnedecor::new(p as f64, df_resid)
                        .map_err(|e| Error::InvalidValue(e.to_string()))?;
                    p_values.push(1.0 - dist.cdf(f));
                    collinear.push(false);
                }
            }
            _ => {
                // Collinear design: no evidence either way.
                p_values.push(1.0);
                collinear.push(true);
            }
        }
    }
    Ok(GrangerSweep {
        lag_offsets: lag_offsets.to_vec(),
        p_values,
        collinear,
        n_ar_lags,
    })
}

/// Least-squares RSS via the normal equations; None when X'X is not
/// positive definite (collinear columns).
fn fit_rss(design: &DMatrix<f64>, target: &DVector<f64>) -> Option<f64> {
    let xtx = design.transpose() * design;
    let xty = design.transpose() * target;
    let chol = Cholesky::new(xtx)?;
    let coefs = chol.solve(&xty);
    let resid = target - design * coefs;
    Some(resid.norm_squared())
}

/// Fraction of price-change events whose direction the predictor called,
/// as a percentage. The change observed between consecutive observations
/// (t_prev, t_cur] is scored against the last predictor value at or before
/// t_prev; zero or missing predictions count as incorrect.
pub fn directional_accuracy(predictor: &[(i64, f64)], prices: &[(i64, f64)]) -> Result<f64> {
    let mut events = 0u64;
    let mut correct = 0u64;
    let mut pred_idx = 0usize;
    for w in prices.windows(2) {
        let (t_prev, p_prev) = w[0];
        let (_, p_cur) = w[1];
        let change = p_cur - p_prev;
        if change == 0.0 {
            continue;
        }
        events += 1;
        while pred_idx < predictor.len() && predictor[pred_idx].0 <= t_prev {
            pred_idx += 1;
        }
        if pred_idx == 0 {
            continue; // no prediction yet: incorrect
        }
        let value = predictor[pred_idx - 1].1;
        if value != 0.0 && (value > 0.0) == (change > 0.0) {
            correct += 1;
        }
    }
    if events == 0 {
        return Err(Error::NoPriceChanges);
    }
    Ok(100.0 * correct as f64 / events as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn horizon_changes_examples() {
        let constant = vec![5.0; 20];
        assert!(horizon_price_changes(&constant, 10).unwrap().iter().all(|&d| d == 0.0));
        // Ramp of c per step with horizon 10 -> all 10c.
        let ramp: Vec<f64> = (0..30).map(|i| 100.0 + 3.0 * i as f64).collect();
        assert!(horizon_price_changes(&ramp, 10).unwrap().iter().all(|&d| d == 30.0));
        let hand = vec![1.0, 4.0, 2.0, 8.0];
        assert_eq!(horizon_price_changes(&hand, 1).unwrap(), vec![3.0, -2.0, 6.0]);
        assert!(matches!(
            horizon_price_changes(&hand, 4),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|xi| 2.0 * xi + 1.0).collect();
        let fit = ols(&y, &x).unwrap();
        assert_eq!(fit.beta.estimate, 2.0);
        assert_eq!(fit.alpha.estimate, 1.0);
        assert_eq!(fit.r2, 1.0);
        assert_eq!(fit.durbin_watson, 2.0);
        assert!(fit.dw_degenerate);
    }

    #[test]
    fn degenerate_regressor_is_an_error() {
        let x = vec![4.0; 10];
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(ols(&y, &x), Err(Error::DegenerateRegressor)));
        assert!(matches!(
            ols(&y[..2], &x[..2]),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn r2_equals_squared_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xi| 0.3 * xi + 0.1 * rng.gen_range(-1.0..1.0f64))
            .collect();
        let fit = ols(&y, &x).unwrap();
        let r = pearson(&x, &y).unwrap();
        assert!((fit.r2 - r * r).abs() < 1e-12);
    }

    #[test]
    fn affine_rescaling_of_x_preserves_fit_quality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xi| 1.5 * xi + 0.2 * rng.gen_range(-1.0..1.0f64))
            .collect();
        let scaled: Vec<f64> = x.iter().map(|xi| 40.0 * xi + 3.0).collect();
        let base = ols(&y, &x).unwrap();
        let resc = ols(&y, &scaled).unwrap();
        assert!((base.r2 - resc.r2).abs() < 1e-12);
        assert!((base.f_stat - resc.f_stat).abs() / base.f_stat < 1e-10);
        assert!((base.f_pvalue - resc.f_pvalue).abs() < 1e-12);
        assert!((resc.beta.estimate - base.beta.estimate / 40.0).abs() < 1e-12);
    }

    #[test]
    fn independent_noise_has_no_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..3600).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3600).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fit = ols(&y, &x).unwrap();
        assert!(fit.r2 < 0.01);
        assert!(fit.f_pvalue > 0.001);
    }

    #[test]
    fn granger_detects_lagged_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 600;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = x[t - 1] + 0.05 * rng.gen_range(-1.0..1.0f64);
        }
        let sweep = granger(&y, &x, &[0, 1, 3, 5], 3).unwrap();
        assert!(sweep.p_values[0] < 0.01);
        assert!(sweep.p_values[1] < 0.01);
        // Beyond the true lag the signal is gone.
        assert!(sweep.p_values[3] > 0.01);
    }

    #[test]
    fn granger_constant_target_is_collinear() {
        let y = vec![1.0; 200];
        let x: Vec<f64> = (0..200).map(|i| (i as f64).sin()).collect();
        let sweep = granger(&y, &x, &[1], 3).unwrap();
        assert!(sweep.collinear[0]);
        assert_eq!(sweep.p_values[0], 1.0);
    }

    #[test]
    fn granger_rejects_short_series() {
        let y = vec![0.0; 20];
        let x = vec![0.0; 20];
        assert!(matches!(
            granger(&y, &x, &[1], 5),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn permuting_x_destroys_significance() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 400;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; n];
        for t in 1..n {
            y[t] = x[t - 1] + 0.05 * rng.gen_range(-1.0..1.0f64);
        }
        let mut ps = Vec::new();
        for _ in 0..21 {
            let mut shuffled = x.clone();
            for i in (1..shuffled.len()).rev() {
                let j = rng.gen_range(0..=i);
                shuffled.swap(i, j);
            }
            let sweep = granger(&y, &shuffled, &[1], 3).unwrap();
            ps.push(sweep.p_values[0]);
        }
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ps[ps.len() / 2] >= 0.3);
    }

    #[test]
    fn directional_accuracy_examples() {
        // Oracle predictor: carries the sign of the upcoming change.
        let prices: Vec<(i64, f64)> = vec![(0, 100.0), (10, 101.0), (20, 100.0), (30, 100.0), (40, 103.0)];
        let oracle: Vec<(i64, f64)> = vec![(0, 1.0), (10, -1.0), (30, 1.0)];
        assert_eq!(directional_accuracy(&oracle, &prices).unwrap(), 100.0);

        // Constant +1 on a series with 60% up-moves.
        let mut prices = vec![(0i64, 0.0f64)];
        let mut level = 0.0;
        for i in 0..100 {
            level += if i % 5 < 3 { 1.0 } else { -1.0 };
            prices.push(((i + 1) * 10, level));
        }
        let always_up = vec![(0i64, 1.0f64)];
        assert_eq!(directional_accuracy(&always_up, &prices).unwrap(), 60.0);

        // Zero-valued predictions are incorrect.
        let zero = vec![(0i64, 0.0f64)];
        assert_eq!(directional_accuracy(&zero, &prices).unwrap(), 0.0);

        let flat = vec![(0, 1.0), (10, 1.0)];
        assert!(matches!(
            directional_accuracy(&always_up, &flat),
            Err(Error::NoPriceChanges)
        ));
    }

    #[test]
    fn accuracy_is_invariant_under_positive_rescaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut prices = vec![(0i64, 100.0f64)];
        let mut pred = Vec::new();
        let mut level = 100.0;
        for i in 0..500 {
            pred.push((i * 10, rng.gen_range(-1.0..1.0)));
            level += rng.gen_range(-1.0..1.0f64);
            prices.push(((i + 1) * 10, level));
        }
        let base = directional_accuracy(&pred, &prices).unwrap();
        let scaled: Vec<(i64, f64)> = pred.iter().map(|&(t, v)| (t, 7.5 * v)).collect();
        assert_eq!(directional_accuracy(&scaled, &prices).unwrap(), base);
    }
}
