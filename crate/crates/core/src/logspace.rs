//! Extended-real log-domain arithmetic.
//!
//! `-inf` encodes probability zero. All helpers treat `0 * (-inf)` as `0`,
//! so a zero-weight term never poisons an expectation.

use std::fmt;
use std::ops::Mul;

/// `log(sum(exp(x_i)))` with max-shift stabilisation; `-inf` for an empty or
/// all `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `log E_w[exp(x)] = log(sum_i w_i exp(x_i))` for linear weights `w`.
///
/// Entries with `w_i = 0` are skipped regardless of `x_i`.
pub fn log_expect_exp(weights: &[f64], logs: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), logs.len());
    let max = weights
        .iter()
        .zip(logs)
        .filter(|(&w, _)| w > 0.0)
        .map(|(_, &x)| x)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    // weights stay linear so that exact mixtures of equal values give back x
    let sum: f64 = weights
        .iter()
        .zip(logs)
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &x)| w * (x - max).exp())
        .sum();
    max + sum.ln()
}

/// Natural log of a probability, with `ln(0) = -inf`.
pub fn ln_prob(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        p.ln()
    }
}

/// `sum_i p_i log(p_i / q_i)` with `0 log 0 = 0` and `p > 0, q = 0 => +inf`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return f64::INFINITY;
        }
        kl += pi * (pi.ln() - qi.ln());
    }
    // rounding can leave a tiny negative value for identical rows
    kl.max(0.0)
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Half the L1 distance between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Expectation of `values` under linear `weights`, with `-inf` absorbing
/// whenever it carries positive weight.
pub fn expect_ext(weights: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&w, &v) in weights.iter().zip(values) {
        if w > 0.0 {
            if v == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            acc += w * v;
        }
    }
    acc
}

/// A log-domain probability in `[-inf, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ExtLogProb(f64);

impl ExtLogProb {
    pub const ZERO: ExtLogProb = ExtLogProb(f64::NEG_INFINITY);
    pub const ONE: ExtLogProb = ExtLogProb(0.0);

    /// Wraps a log value; `None` if it is positive or NaN.
    pub fn new(log_value: f64) -> Option<Self> {
        if log_value.is_nan() || log_value > 0.0 {
            None
        } else {
            Some(ExtLogProb(log_value))
        }
    }

    /// From a linear probability in `[0, 1]`; `None` outside that range.
    pub fn from_probability(p: f64) -> Option<Self> {
        if !(0.0..=1.0).contains(&p) {
            return None;
        }
        Some(ExtLogProb(ln_prob(p)))
    }

    pub fn log(self) -> f64 {
        self.0
    }

    pub fn probability(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl Mul for ExtLogProb {
    type Output = ExtLogProb;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: ExtLogProb) -> ExtLogProb {
        ExtLogProb(self.0 + rhs.0)
    }
}

impl fmt::Display for ExtLogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_all_neg_inf_is_neg_inf() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
    }

    #[test]
    fn lse_is_stable_for_large_magnitudes() {
        let v = log_sum_exp([-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn expectation_skips_zero_weight_neg_inf() {
        let v = log_expect_exp(&[0.0, 1.0], &[f64::NEG_INFINITY, -0.5]);
        assert_eq!(v, -0.5);
        assert_eq!(expect_ext(&[0.0, 1.0], &[f64::NEG_INFINITY, -0.5]), -0.5);
        assert_eq!(expect_ext(&[0.5, 0.5], &[f64::NEG_INFINITY, -0.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn kl_conventions() {
        assert_eq!(kl_divergence(&[0.0, 1.0], &[0.5, 0.5]), 2f64.ln());
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
    }

    #[test]
    fn ext_log_prob_bounds() {
        assert!(ExtLogProb::new(0.1).is_none());
        assert!(ExtLogProb::from_probability(1.5).is_none());
        assert!(ExtLogProb::from_probability(0.0).unwrap().is_zero());
        let half = ExtLogProb::from_probability(0.5).unwrap();
        assert!(((half * half).probability() - 0.25).abs() < 1e-15);
    }
}
