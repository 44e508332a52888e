use serde::{Deserialize, Serialize};

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median with nested 50% and 95% percentile bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn from_sample(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            median: quantile_sorted(&v, 0.5),
            q25: quantile_sorted(&v, 0.25),
            q75: quantile_sorted(&v, 0.75),
            lo: quantile_sorted(&v, 0.025),
            hi: quantile_sorted(&v, 0.975),
        }
    }
}
