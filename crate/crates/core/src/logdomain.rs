//! Log-domain accumulation helpers.
//!
//! Products of long weight runs leave the range of `f64` after roughly a
//! thousand factors of 2, so every norm-of-power computation is carried as
//! a sum of logarithms. Sums use Neumaier compensation so that a million
//! terms of alternating sign stay accurate to a few ulps of the result.

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `ln(Σ exp(x_i))`, returning `None` for an empty input.
pub fn log_sum_exp(terms: &[f64]) -> Option<f64> {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return if max == f64::INFINITY { Some(max) } else { None };
    }
    let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    Some(max + s.ln())
}

/// Euclidean norm from per-entry log magnitudes, `ln sqrt(Σ exp(2 l_i))`.
pub fn log_norm_from_log_magnitudes(log_mags: &[f64]) -> Option<f64> {
    let doubled: Vec<f64> = log_mags.iter().map(|l| 2.0 * l).collect();
    log_sum_exp(&doubled).map(|v| 0.5 * v)
}

/// `exp` that maps the log of a zero quantity (`None`) to 0.
pub fn exp_or_zero(log_value: Option<f64>) -> f64 {
    log_value.map_or(0.0, f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..10 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 10.0);
    }

    #[test]
    fn log_sum_exp_handles_huge_terms() {
        let v = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), None);
    }

    #[test]
    fn log_norm_matches_linear() {
        let l = log_norm_from_log_magnitudes(&[3f64.ln(), 4f64.ln()]).unwrap();
        assert!((l.exp() - 5.0).abs() < 1e-12);
    }
}
