//! Standard microstructure baselines: VPIN, OFI, local and historical
//! volatility, and the Roll / Kyle / Amihud trio.
//!
//! Trade classification for VPIN uses the recorded taker side from Level 3
//! match records, not a bulk classification rule. Roll, Kyle's lambda and
//! Amihud follow their canonical literature definitions and are tagged as
//! such in output metadata.

use crate::error::{Error, Result};
use crate::ingest::TickerRecord;
use crate::series::MeasureSeries;
use crate::stats;
use crate::types::{Side, Size, Timestamp};

/// One executed trade with its taker side.
#[derive(Debug, Clone, Copy)]
pub struct Trade {
    pub ts: Timestamp,
    pub taker_side: Side,
    pub size: Size,
}

/// A completed constant-volume bucket.
#[derive(Debug, Clone, Copy)]
pub struct VolumeBucket {
    pub seq: usize,
    pub buy_volume: u64,
    pub sell_volume: u64,
    pub start_ts: Timestamp,
    pub end_ts: Timestamp,
}

impl VolumeBucket {
    pub fn imbalance(&self) -> f64 {
        let total = self.buy_volume + self.sell_volume;
        (self.buy_volume as f64 - self.sell_volume as f64).abs() / total as f64
    }
}

#[derive(Debug, Clone)]
pub struct VpinResult {
    pub buckets: Vec<VolumeBucket>,
    /// (bucket end ts, rolling mean imbalance), defined once `rolling_n`
    /// buckets are complete.
    pub series: MeasureSeries,
}

/// Volume-synchronized probability of informed trading. Trades are cut into
/// buckets of exactly `bucket_units`; a trade spanning a boundary is split.
/// The trailing partial bucket is dropped.
pub fn vpin(trades: &[Trade], bucket_units: u64, rolling_n: usize) -> Result<VpinResult> {
    if bucket_units == 0 {
        return Err(Error::InvalidValue("bucket size must be positive".into()));
    }
    if rolling_n == 0 {
        return Err(Error::InvalidValue("rolling window must be positive".into()));
    }
    let mut buckets: Vec<VolumeBucket> = Vec::new();
    let mut buy = 0u64;
    let mut sell = 0u64;
    let mut filled = 0u64;
    let mut start_ts: Option<Timestamp> = None;
    for trade in trades {
        let mut units = trade.size.units();
        while units > 0 {
            if start_ts.is_none() {
                start_ts = Some(trade.ts);
            }
            let room = bucket_units - filled;
            let take = units.min(room);
            match trade.taker_side {
                Side::Buy => buy += take,
                Side::Sell => sell += take,
            }
            filled += take;
            units -= take;
            if filled == bucket_units {
                buckets.push(VolumeBucket {
                    seq: buckets.len(),
                    buy_volume: buy,
                    sell_volume: sell,
                    start_ts: start_ts.unwrap(),
                    end_ts: trade.ts,
                });
                buy = 0;
                sell = 0;
                filled = 0;
                start_ts = None;
            }
        }
    }
    if buckets.len() < rolling_n {
        return Err(Error::InsufficientVolume {
            required: rolling_n,
            actual: buckets.len(),
        });
    }
    let imbalances: Vec<f64> = buckets.iter().map(|b| b.imbalance()).collect();
    let mut series = MeasureSeries::new("vpin")
        .with_meta("bucket_units", bucket_units)
        .with_meta("rolling_n", rolling_n)
        .with_meta("classification", "recorded-taker-side");
    for k in rolling_n - 1..buckets.len() {
        let mean = imbalances[k + 1 - rolling_n..=k].iter().sum::<f64>() / rolling_n as f64;
        series.points.push((buckets[k].end_ts.micros(), mean));
    }
    Ok(VpinResult { buckets, series })
}

/// Order-flow imbalance contribution of one quote transition.
///
/// e_n = 1{b_n >= b_{n-1}} q^b_n - 1{b_n <= b_{n-1}} q^b_{n-1}
///     - 1{a_n <= a_{n-1}} q^a_n + 1{a_n >= a_{n-1}} q^a_{n-1}
pub fn ofi_update(prev: &TickerRecord, cur: &TickerRecord) -> Result<i64> {
    let (Some(qb_cur), Some(qa_cur)) = (cur.bid_size, cur.ask_size) else {
        return Err(Error::SizesUnavailable);
    };
    let (Some(qb_prev), Some(qa_prev)) = (prev.bid_size, prev.ask_size) else {
        return Err(Error::SizesUnavailable);
    };
    let mut e = 0i64;
    if cur.best_bid >= prev.best_bid {
        e += qb_cur.units() as i64;
    }
    if cur.best_bid <= prev.best_bid {
        e -= qb_prev.units() as i64;
    }
    if cur.best_ask <= prev.best_ask {
        e -= qa_cur.units() as i64;
    }
    if cur.best_ask >= prev.best_ask {
        e += qa_prev.units() as i64;
    }
    Ok(e)
}

/// OFI aggregated over fixed windows (T - w, T] on the epoch-aligned grid.
/// Every quote update inside a window contributes one `ofi_update` term.
pub fn ofi(records: &[TickerRecord], window_micros: i64) -> Result<MeasureSeries> {
    if window_micros <= 0 {
        return Err(Error::InvalidValue("window must be positive".into()));
    }
    if records.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            actual: records.len(),
        });
    }
    if records.iter().any(|r| !r.has_sizes()) {
        return Err(Error::SizesUnavailable);
    }
    let grid_end = |ts: i64| -> i64 {
        ts.div_euclid(window_micros) * window_micros
            + if ts.rem_euclid(window_micros) == 0 { 0 } else { window_micros }
    };
    let mut series = MeasureSeries::new("ofi").with_meta("window_micros", window_micros);
    let mut window_end = grid_end(records[1].ts.micros());
    let mut acc = 0i64;
    for pair in records.windows(2) {
        let t = pair[1].ts.micros();
        while t > window_end {
            series.points.push((window_end, acc as f64));
            acc = 0;
            window_end += window_micros;
        }
        acc += ofi_update(&pair[0], &pair[1])?;
    }
    series.points.push((window_end, acc as f64));
    Ok(series)
}

/// Root mean square of consecutive price differences. Robust to trends:
/// on a linear ramp it equals the per-step increment no matter the window.
pub fn local_volatility(prices: &[f64]) -> Result<f64> {
    if prices.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            actual: prices.len(),
        });
    }
    let n = (prices.len() - 1) as f64;
    let sum_sq: f64 = prices.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok((sum_sq / n).sqrt())
}

/// Sample standard deviation of simple returns over the window.
pub fn historical_volatility(prices: &[f64]) -> Result<f64> {
    if prices.len() < 3 {
        // Two points give one return; a sample standard deviation of one
        // observation is undefined.
        return Err(Error::TooFewPoints {
            required: 3,
            actual: prices.len(),
        });
    }
    if prices.iter().any(|&p| p == 0.0) {
        return Err(Error::InvalidValue("zero price in return computation".into()));
    }
    let returns: Vec<f64> = prices.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct RollEstimate {
    pub spread: f64,
    /// True when the serial covariance was non-negative and the estimate
    /// was forced to zero.
    pub flagged: bool,
}

/// Roll spread estimator: 2 sqrt(-cov(dp_t, dp_{t-1})) over the window.
pub fn roll_measure(trade_prices: &[f64]) -> Result<RollEstimate> {
    if trade_prices.len() < 3 {
        return Err(Error::TooFewPoints {
            required: 3,
            actual: trade_prices.len(),
        });
    }
    let diffs: Vec<f64> = trade_prices.windows(2).map(|w| w[1] - w[0]).collect();
    let m = diffs.len() - 1;
    let xs = &diffs[1..];
    let ys = &diffs[..m];
    let mean_x = xs.iter().sum::<f64>() / m as f64;
    let mean_y = ys.iter().sum::<f64>() / m as f64;
    let cov = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum::<f64>()
        / m as f64;
    if cov >= 0.0 {
        return Ok(RollEstimate {
            spread: 0.0,
            flagged: true,
        });
    }
    Ok(RollEstimate {
        spread: 2.0 * (-cov).sqrt(),
        flagged: false,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct KyleLambda {
    pub lambda: f64,
    pub std_error: f64,
}

/// Price impact per unit of signed volume: OLS slope of consecutive trade
/// price changes on the signed trade volume.
pub fn kyle_lambda(trades: &[(f64, f64)]) -> Result<KyleLambda> {
    if trades.len() < 10 {
        return Err(Error::TooFewPoints {
            required: 10,
            actual: trades.len(),
        });
    }
    let dp: Vec<f64> = trades.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let sv: Vec<f64> = trades[1..].iter().map(|t| t.1).collect();
    let fit = stats::ols(&dp, &sv)?;
    Ok(KyleLambda {
        lambda: fit.beta.estimate,
        std_error: fit.beta.std_error,
    })
}

/// Mean |return| per unit of dollar volume over the window.
pub fn amihud(returns: &[f64], dollar_volumes: &[f64]) -> Result<f64> {
    if returns.len() != dollar_volumes.len() {
        return Err(Error::LengthMismatch {
            left: returns.len(),
            right: dollar_volumes.len(),
        });
    }
    if returns.is_empty() {
        return Err(Error::TooFewPoints { required: 1, actual: 0 });
    }
    if dollar_volumes.iter().any(|&v| v <= 0.0) {
        return Err(Error::ZeroVolume);
    }
    let sum: f64 = returns
        .iter()
        .zip(dollar_volumes)
        .map(|(r, v)| r.abs() / v)
        .sum();
    Ok(sum / returns.len() as f64)
}
