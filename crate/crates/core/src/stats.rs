//! Chi-square goodness-of-fit helpers.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected counts.
///
/// Cells with zero expectation must also be empty; they carry no degree of
/// freedom.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> ChiSquareReport {
    assert_eq!(observed.len(), expected.len());
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        if e <= 0.0 {
            assert_eq!(o, 0, "observation in a cell with zero expectation");
            continue;
        }
        let diff = o as f64 - e;
        statistic += diff * diff / e;
        cells += 1;
    }
    let degrees_of_freedom = cells.saturating_sub(1);
    ChiSquareReport {
        statistic,
        degrees_of_freedom,
        p_value: upper_tail(statistic, degrees_of_freedom),
    }
}

/// Chi-square of `observed` against the uniform distribution on its cells.
pub fn chi_square_uniform(observed: &[u64]) -> ChiSquareReport {
    let total: u64 = observed.iter().sum();
    let expected = vec![total as f64 / observed.len().max(1) as f64; observed.len()];
    chi_square(observed, &expected)
}

/// `P(X >= statistic)` for `X` chi-square with the given degrees of freedom.
pub fn upper_tail(statistic: f64, degrees_of_freedom: usize) -> f64 {
    if degrees_of_freedom == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(degrees_of_freedom as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Mean and standard error of the mean.
pub fn mean_and_stderr(sum: f64, sum_sq: f64, count: u64) -> (f64, f64) {
    if count == 0 {
        return (0.0, 0.0);
    }
    let n = count as f64;
    let mean = sum / n;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frequencies_give_zero_statistic() {
        let report = chi_square(&[2, 2, 2, 3], &[2.0, 2.0, 2.0, 3.0]);
        assert_eq!(report.statistic, 0.0);
        assert!((report.p_value - 1.0).abs() < 1e-12);
        assert_eq!(report.degrees_of_freedom, 3);
    }

    #[test]
    fn known_value() {
        // (1-2)^2/2 + (2-3)^2/3 + (3-4)^2/4 + (4-1)^2/1 = 10.0833..
        let report = chi_square(&[1, 2, 3, 4], &[2.0, 3.0, 4.0, 1.0]);
        assert!((report.statistic - 10.083_333_333_333_334).abs() < 1e-9);
        assert!((report.p_value - 0.017_870_892_893_625_56).abs() < 1e-8);
    }

    #[test]
    fn single_cell_has_no_freedom() {
        let report = chi_square_uniform(&[17]);
        assert_eq!(report.degrees_of_freedom, 0);
        assert_eq!(report.p_value, 1.0);
    }

    #[test]
    fn stderr_of_constant_is_zero() {
        let (mean, se) = mean_and_stderr(10.0, 20.0, 5);
        assert!((mean - 2.0).abs() < 1e-12);
        assert!(se.abs() < 1e-12);
    }
}
