//! Number of empty urns after `m` balls fall uniformly into `N` urns.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::ln_binomial;

/// Relative cancellation above which the floating-point sum is not trusted.
pub const CANCELLATION_LIMIT: f64 = 1e-6;

/// Largest `m` and `N` handled by exact rational arithmetic.
pub const EXACT_LIMIT: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OccupancyMethod {
    Compensated,
    ExactRational,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyLaw {
    pub balls: u64,
    pub urns: u64,
    /// `P(W = w)` for `w = 0..=urns`.
    pub probs: Vec<f64>,
    pub method: OccupancyMethod,
}

/// `P(W = w) = C(N,w) Σ_j (−1)^j C(N−w,j) (1 − (w+j)/N)^m`.
pub fn occupancy_oracle(balls: u64, urns: u64) -> Result<OccupancyLaw> {
    if urns == 0 {
        return Err(Error::InvalidConfig("at least one urn is required".into()));
    }
    match compensated(balls, urns) {
        Ok(probs) => Ok(OccupancyLaw { balls, urns, probs, method: OccupancyMethod::Compensated }),
        Err(Error::AlternatingCancellation(_)) if balls <= EXACT_LIMIT && urns <= EXACT_LIMIT => Ok(OccupancyLaw {
            balls,
            urns,
            probs: exact(balls, urns),
            method: OccupancyMethod::ExactRational,
        }),
        Err(e) => Err(e),
    }
}

/// Neumaier summation over terms evaluated in log space.
pub fn compensated(balls: u64, urns: u64) -> Result<Vec<f64>> {
    let n = urns as f64;
    let mut worst = 0.0f64;
    let probs = (0..=urns)
        .map(|w| {
            let (mut sum, mut comp, mut abs) = (0.0f64, 0.0f64, 0.0f64);
            for j in 0..=(urns - w) {
                let free = 1.0 - (w + j) as f64 / n;
                let ln_pow = if balls == 0 {
                    0.0
                } else if free <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    balls as f64 * free.ln()
                };
                let mag = (ln_binomial(urns, w) + ln_binomial(urns - w, j) + ln_pow).exp();
                let term = if j % 2 == 0 { mag } else { -mag };
                abs += mag;
                let t = sum + term;
                comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
                sum = t;
            }
            let total = sum + comp;
            // about one rounding error per term, relative to the result
            let rel = if abs == 0.0 {
                0.0
            } else if total.abs() > 0.0 {
                abs * f64::EPSILON * (urns - w + 1) as f64 / total.abs()
            } else {
                f64::INFINITY
            };
            worst = worst.max(rel);
            total
        })
        .collect();
    if worst > CANCELLATION_LIMIT {
        return Err(Error::AlternatingCancellation(worst));
    }
    Ok(probs)
}

/// Same sum over the integers: `C(N,w) Σ_j (−1)^j C(N−w,j)(N−w−j)^m / N^m`.
pub fn exact(balls: u64, urns: u64) -> Vec<f64> {
    let binom = |n: u64, k: u64| -> BigInt {
        let mut b = BigInt::one();
        for i in 0..k {
            b = b * (n - i) / (i + 1);
        }
        b
    };
    let denom = BigInt::from(urns).pow(balls as u32);
    (0..=urns)
        .map(|w| {
            let mut sum = BigInt::zero();
            for j in 0..=(urns - w) {
                let t = binom(urns - w, j) * BigInt::from(urns - w - j).pow(balls as u32);
                if j % 2 == 0 {
                    sum += t;
                } else {
                    sum -= t;
                }
            }
            BigRational::new(binom(urns, w) * sum, denom.clone()).to_f64().unwrap_or(0.0)
        })
        .collect()
}
