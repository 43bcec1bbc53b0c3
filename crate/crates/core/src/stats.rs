//! Fixed-order reductions. Every sum runs left to right so results do not
//! depend on how the inputs were produced.

use serde::{Deserialize, Serialize};

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Population (N-denominator) standard deviation.
pub fn population_std(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    Some(libm::sqrt(var))
}

/// Mean and population standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self {
            mean: mean(values)?,
            std: population_std(values)?,
            n: values.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_statistics() {
        assert_eq!(mean(&[]), None);
        let s = MeanStd::of(&[90.0, 110.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (100.0, 10.0, 2));
        let s = MeanStd::of(&[0.0, 0.0, 300.0]).unwrap();
        assert!((s.std - 141.421_356_237_309_5).abs() < 1e-9);
    }
}
