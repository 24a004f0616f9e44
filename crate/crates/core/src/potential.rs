//! Potential function on indices and the constants of the linear-time bound.
//!
//! With `alpha = (k - 1) / max_degree`, every sampler step lowers the
//! potential `w1 * #frozen + w2 * #forbidden + #ignored` by at least `epsilon`
//! in expectation whenever `epsilon > 0`, so the expected number of steps from
//! the all-ignored start is at most `n / epsilon`. All constants are exact
//! rationals.

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::state::IndexState;

pub type Rational = Ratio<i128>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PotentialError {
    #[error("guarantee formula undefined: need max degree >= 1 and k >= 2 (k={k}, max degree={max_degree})")]
    Domain { k: u32, max_degree: usize },
    #[error("guarantee formula undefined: zero denominator at k={k}, max degree={max_degree}")]
    ZeroDenominator { k: u32, max_degree: usize },
}

/// `alpha = (k - 1) / max_degree`.
pub fn alpha(k: u32, max_degree: usize) -> Rational {
    Rational::new(i128::from(k) - 1, max_degree as i128)
}

/// The exact `epsilon(k, max_degree)` of the drift bound.
pub fn epsilon_bound(k: u32, max_degree: usize) -> Result<Rational, PotentialError> {
    if max_degree == 0 || k < 2 {
        return Err(PotentialError::Domain { k, max_degree });
    }
    let a = alpha(k, max_degree);
    let d = Rational::from_integer(max_degree as i128);
    let r = |v: i128| Rational::from_integer(v);
    let numerator = r(2) * d * a * a - r(7) * d * a - d + r(3) * a - r(1);
    let denominator =
        r(3) * d * d * a - r(3) * d * d + r(2) * d * a * a - r(4) * d * a - d + r(3) * a + r(2);
    if denominator.is_zero() {
        return Err(PotentialError::ZeroDenominator { k, max_degree });
    }
    Ok(numerator / denominator)
}

/// Whether `2 alpha^2 - 7 alpha - 1 > 0`, the asymptotic condition for a
/// positive drift (`alpha > (7 + sqrt 57) / 4 ~ 3.637`), decided in integers:
/// `2 (k-1)^2 - 7 (k-1) D - D^2 > 0`. Edgeless graphs always qualify.
pub fn guarantee_applies(k: u32, max_degree: usize) -> bool {
    if max_degree == 0 {
        return true;
    }
    let a = i128::from(k) - 1;
    let d = max_degree as i128;
    2 * a * a - 7 * a * d - d * d > 0
}

/// Weights of the potential for one `(k, max_degree)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PotentialParams {
    pub k: u32,
    pub max_degree: usize,
    #[serde(serialize_with = "ser_rational")]
    pub alpha: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub epsilon: Rational,
    /// Weight of a frozen node.
    #[serde(serialize_with = "ser_rational")]
    pub w1: Rational,
    /// Weight of a forbidden node.
    #[serde(serialize_with = "ser_rational")]
    pub w2: Rational,
}

impl PotentialParams {
    pub fn new(k: u32, max_degree: usize) -> Result<Self, PotentialError> {
        let epsilon = epsilon_bound(k, max_degree)?;
        let alpha = alpha(k, max_degree);
        let d = Rational::from_integer(max_degree as i128);
        let one = Rational::one();
        let w2 =
            Rational::new(2, 3 * max_degree as i128 - 1) * (alpha - one - epsilon * (alpha + one));
        let w1 = one + d * w2 + epsilon;
        Ok(Self {
            k,
            max_degree,
            alpha,
            epsilon,
            w1,
            w2,
        })
    }

    /// Whether the drift guarantee is in force for these parameters.
    pub fn epsilon_positive(&self) -> bool {
        self.epsilon.is_positive()
    }

    /// `w1 * #frozen + w2 * #forbidden + #ignored`.
    pub fn potential(&self, index: &IndexState) -> Rational {
        self.potential_of_counts(
            index.frozen_count(),
            index.forbidden_count(),
            index.ignored_count(),
        )
    }

    pub fn potential_of_counts(&self, frozen: usize, forbidden: usize, ignored: usize) -> Rational {
        self.w1 * frozen as i128
            + self.w2 * forbidden as i128
            + Rational::from_integer(ignored as i128)
    }

    /// Upper bound `n / epsilon` on the expected number of steps.
    pub fn expected_steps_bound(&self, node_count: usize) -> Option<Rational> {
        self.epsilon_positive()
            .then(|| Rational::from_integer(node_count as i128) / self.epsilon)
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub(crate) fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_rational(r))
}
