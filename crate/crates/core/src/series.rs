//! Timestamped scalar series with provenance metadata.

use std::collections::BTreeMap;

/// A named (t_micros, value) series. Metadata records the parameters that
/// produced it so every output is auditable.
#[derive(Debug, Clone, Default)]
pub struct MeasureSeries {
    pub name: String,
    pub points: Vec<(i64, f64)>,
    pub metadata: BTreeMap<String, String>,
}

impl MeasureSeries {
    pub fn new(name: &str) -> Self {
        MeasureSeries {
            name: name.to_string(),
            points: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|&(_, v)| v).collect()
    }

    /// Last value at or before each grid instant; grid points preceding the
    /// first observation are dropped.
    pub fn resample_last(&self, grid: impl Iterator<Item = i64>) -> Vec<(i64, f64)> {
        let mut out = Vec::new();
        let mut idx = 0usize;
        for t in grid {
            while idx < self.points.len() && self.points[idx].0 <= t {
                idx += 1;
            }
            if idx > 0 {
                out.push((t, self.points[idx - 1].1));
            }
        }
        out
    }
}

/// Regular grid of instants [start, end] stepping by `step_micros`.
pub fn grid(start_micros: i64, end_micros: i64, step_micros: i64) -> impl Iterator<Item = i64> {
    debug_assert!(step_micros > 0);
    (0..)
        .map(move |k| start_micros + k * step_micros)
        .take_while(move |&t| t <= end_micros)
}
