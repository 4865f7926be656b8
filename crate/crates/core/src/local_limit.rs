//! Point probabilities `P(Z_1 + … + Z_n = k)` of i.i.d. lattice sums, exact
//! and asymptotic.
//!
//! The exact value is the Fourier inversion `(1/2π)∫ e^{−ikt} φ(t)^n dt`.
//! Evaluated as written, the integrand peaks at `t = 0` with height one while
//! the answer can be exponentially small, so the contour is first shifted to
//! the saddle point: with `τ` solving `ψ'(τ) = k/n`,
//!
//! `P(S = k) = e^{nψ(τ) − kτ} · P_τ(S = k)`,
//!
//! where `P_τ` is the law tilted to mean `k/n`. The tilted probability is of
//! order `1/√n` and its integral is resolved by the periodic trapezoid rule,
//! which converges geometrically for this analytic periodic integrand.

use num_complex::Complex64;
use serde::Serialize;

use crate::cgf::{CgfEvaluator, ScalarCgf};
use crate::error::{Error, Result};
use crate::lattice::{FiniteTable, LatticeDistribution};
use crate::policy;
use crate::tilting::tilt_by;

/// Exact and approximate point probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointProbability {
    pub n_terms: u64,
    pub k: u64,
    pub exact: f64,
    /// `ln exact`, meaningful when `exact` underflows.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub ln_exact: f64,
    pub method: PointMethod,
    /// Quadrature nodes used (zero for closed-form shortcuts).
    pub nodes: usize,
    /// DP convolution value when it was run as a cross-check.
    pub dp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointMethod {
    /// Shifted-contour Fourier inversion.
    Fourier,
    /// `k` at an end of the support of the sum.
    Boundary,
    /// `k` outside the support of the sum or in the wrong residue class.
    Impossible,
}

/// Tilted point masses at or below this are indistinguishable from zero.
const ZERO_MASS: f64 = 1e-13;

/// Trapezoid evaluation of `(1/M) Σ_j e^{−ik t_j} φ(t_j)^n` with `φ` the
/// characteristic function of `table`; returns the real part and the node
/// count at which successive doublings agreed.
pub(crate) fn fourier_point_mass(table: &FiniteTable, n_terms: u64, k: u64) -> Result<(f64, usize)> {
    let atoms: Vec<(f64, f64)> = table.rows().map(|(j, p)| (j as f64, p)).collect();
    let n = n_terms as f64;
    let kf = k as f64;
    let term = |t: f64| -> Complex64 {
        let phi: Complex64 = atoms.iter().map(|&(j, p)| Complex64::from_polar(p, j * t)).sum();
        if phi.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // φ^n = exp(n log φ) holds on any branch because n is an integer
        (phi.ln() * n - Complex64::new(0.0, kf * t)).exp()
    };
    let two_pi = std::f64::consts::TAU;
    let mut m = policy::MIN_QUADRATURE_NODES.max(16 * n_terms as usize);
    let mut sum: Complex64 = (0..m).map(|j| term(two_pi * j as f64 / m as f64)).sum();
    let mut prev = sum / m as f64;
    while 2 * m <= policy::MAX_QUADRATURE_NODES {
        let odd: Complex64 = (0..m).map(|j| term(two_pi * (2 * j + 1) as f64 / (2 * m) as f64)).sum();
        sum += odd;
        m *= 2;
        let cur = sum / m as f64;
        let diff = (cur - prev).norm();
        if diff <= ZERO_MASS && cur.norm() <= ZERO_MASS {
            // the integrand is bounded by one, so this is zero to resolution:
            // a gap in the support the span test cannot see
            return Ok((0.0, m));
        }
        if diff <= policy::QUADRATURE_AGREEMENT * cur.re.abs() {
            if cur.im.abs() > policy::IMAGINARY_RESIDUE * cur.re.abs() || !(cur.re > 0.0) {
                return Err(Error::QuadratureUnresolved(format!(
                    "inversion at k={k}, n={n_terms} gave {cur} with {m} nodes"
                )));
            }
            return Ok((cur.re, m));
        }
        prev = cur;
    }
    Err(Error::QuadratureUnresolved(format!(
        "no agreement to {} by {} nodes (k={k}, n={n_terms})",
        policy::QUADRATURE_AGREEMENT,
        policy::MAX_QUADRATURE_NODES
    )))
}

/// `ln P(S = k)` with the method and node count.
fn ln_point_prob(dist: &LatticeDistribution, n_terms: u64, k: u64) -> Result<(f64, PointMethod, usize)> {
    if n_terms == 0 {
        return Err(Error::InvalidConfig("n_terms must be at least 1".into()));
    }
    let lo = dist.support_min().checked_mul(n_terms);
    let hi = dist.support_max().and_then(|m| m.checked_mul(n_terms));
    if lo.is_none_or(|lo| k < lo) || hi.is_some_and(|hi| k > hi) {
        return Ok((f64::NEG_INFINITY, PointMethod::Impossible, 0));
    }
    if dist.is_degenerate() {
        return Ok((0.0, PointMethod::Boundary, 0));
    }
    let span = dist.span()?;
    if (k % span.m) != (n_terms % span.m) * span.b % span.m {
        return Ok((f64::NEG_INFINITY, PointMethod::Impossible, 0));
    }
    if Some(k) == lo {
        return Ok((n_terms as f64 * dist.ln_pmf(dist.support_min()), PointMethod::Boundary, 0));
    }
    if Some(k) == hi {
        return Ok((n_terms as f64 * dist.ln_pmf(dist.support_max().unwrap()), PointMethod::Boundary, 0));
    }
    let ev = CgfEvaluator::new(dist);
    let target = k as f64 / n_terms as f64;
    let tau = ev.solve_tilt(target)?.tau;
    let tilted = tilt_by(dist, tau)?;
    let (mass, nodes) = fourier_point_mass(tilted.as_table().unwrap(), n_terms, k)?;
    if mass == 0.0 {
        return Ok((f64::NEG_INFINITY, PointMethod::Impossible, nodes));
    }
    let shift = n_terms as f64 * ScalarCgf::value(&ev, tau) - k as f64 * tau;
    Ok((shift + mass.ln(), PointMethod::Fourier, nodes))
}

/// `P(Z_1 + … + Z_n = k)`.
pub fn exact_point_prob(dist: &LatticeDistribution, n_terms: u64, k: u64) -> Result<f64> {
    Ok(ln_point_prob(dist, n_terms, k)?.0.exp())
}

/// `ln P(Z_1 + … + Z_n = k)`, `−∞` for impossible events.
pub fn ln_exact_point_prob(dist: &LatticeDistribution, n_terms: u64, k: u64) -> Result<f64> {
    Ok(ln_point_prob(dist, n_terms, k)?.0)
}

/// Inversion plus, for finite tables with `n_terms ≤ 64`, a DP convolution
/// that must agree to `1e-10` relative.
pub fn exact_point_prob_validated(dist: &LatticeDistribution, n_terms: u64, k: u64) -> Result<PointProbability> {
    let (ln_exact, method, nodes) = ln_point_prob(dist, n_terms, k)?;
    let exact = ln_exact.exp();
    let dp = match dist.as_table() {
        Some(t) if n_terms <= 64 => {
            let ln_dp = dp_ln_point_prob(t, n_terms, k);
            let agree = if ln_exact == f64::NEG_INFINITY {
                ln_dp == f64::NEG_INFINITY
            } else {
                (ln_dp - ln_exact).abs() <= 1e-10
            };
            if !agree {
                return Err(Error::QuadratureUnresolved(format!(
                    "inversion ln P = {ln_exact} disagrees with convolution ln P = {ln_dp}"
                )));
            }
            Some(ln_dp.exp())
        }
        _ => None,
    };
    Ok(PointProbability { n_terms, k, exact, ln_exact, method, nodes, dp })
}

/// `ln P(S = k)` by `n` successive convolutions restricted to partial sums
/// `≤ k`, rescaled by the running maximum after every step.
pub fn dp_ln_point_prob(table: &FiniteTable, n_terms: u64, k: u64) -> f64 {
    let k = k as usize;
    let mut cur = vec![0.0f64; k + 1];
    cur[0] = 1.0;
    let mut ln_scale = 0.0;
    let rows: Vec<(usize, f64)> = table.rows().map(|(j, p)| (j as usize, p)).collect();
    for _ in 0..n_terms {
        let mut next = vec![0.0f64; k + 1];
        for (s, &v) in cur.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for &(j, p) in &rows {
                if s + j > k {
                    break;
                }
                next[s + j] += v * p;
            }
        }
        let max = next.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return f64::NEG_INFINITY;
        }
        next.iter_mut().for_each(|v| *v /= max);
        ln_scale += max.ln();
        cur = next;
    }
    if cur[k] == 0.0 {
        f64::NEG_INFINITY
    } else {
        ln_scale + cur[k].ln()
    }
}

fn require_span_one(dist: &LatticeDistribution) -> Result<()> {
    let span = dist.span()?;
    if span.m != 1 {
        return Err(Error::SpanNotOne(span.m));
    }
    Ok(())
}

/// `1/(σ√(2πn))`, the local limit at the mean.
pub fn central_local_limit(dist: &LatticeDistribution, n_terms: u64, k: u64) -> Result<f64> {
    require_span_one(dist)?;
    let m = dist.moments()?;
    let ratio = k as f64 / n_terms as f64;
    if (ratio - m.mean).abs() > 1e-12 * m.mean.abs().max(1.0) {
        return Err(Error::MeanMismatch { ratio, mean: m.mean });
    }
    Ok(1.0 / (m.variance.sqrt() * (std::f64::consts::TAU * n_terms as f64).sqrt()))
}

/// `ln` of the saddle-point approximation `e^{−nψ*(k/n)} / (σ_τ √(2πn))`.
pub fn ln_tilted_local_limit(dist: &LatticeDistribution, n_terms: u64, k: u64) -> Result<f64> {
    require_span_one(dist)?;
    let ev = CgfEvaluator::new(dist);
    let x = k as f64 / n_terms as f64;
    let conj = ev.conjugate(x)?;
    if !conj.tau.is_finite() {
        let (lo, hi) = ev.range();
        return Err(Error::TargetOutsideRange { target: x, lo, hi });
    }
    let var = ev.cgf_derivatives(conj.tau)?.d2;
    let n = n_terms as f64;
    Ok(-n * conj.value - 0.5 * (var * std::f64::consts::TAU * n).ln())
}

/// Saddle-point approximation of `P(S = k)`.
pub fn tilted_local_limit(dist: &LatticeDistribution, n_terms: u64, k: u64) -> Result<f64> {
    Ok(ln_tilted_local_limit(dist, n_terms, k)?.exp())
}

/// Exact point mass against the span-one formula for a law of span `m > 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanReport {
    pub span: u64,
    pub n_terms: u64,
    pub k: u64,
    pub exact: f64,
    /// `1/(σ√(2πn))`, ignoring the span.
    pub formula: f64,
    /// `exact / formula`: tends to `m` in the right residue class, zero
    /// otherwise.
    pub ratio: f64,
    pub residue_ok: bool,
}

pub fn span_counterexample_report(dist: &LatticeDistribution, n_terms: u64, k: u64) -> Result<SpanReport> {
    let span = dist.span()?;
    if span.m < 2 {
        return Err(Error::InvalidConfig("span counterexample needs a law of span at least 2".into()));
    }
    let m = dist.moments()?;
    let formula = 1.0 / (m.variance.sqrt() * (std::f64::consts::TAU * n_terms as f64).sqrt());
    let exact = exact_point_prob(dist, n_terms, k)?;
    Ok(SpanReport {
        span: span.m,
        n_terms,
        k,
        exact,
        formula,
        ratio: exact / formula,
        residue_ok: k % span.m == (n_terms % span.m) * span.b % span.m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ln_binomial, poisson_ln_pmf};

    fn bernoulli() -> LatticeDistribution {
        LatticeDistribution::table(vec![(0, 0.5), (1, 0.5)]).unwrap()
    }

    #[test]
    fn poisson_sum_is_poisson() {
        let d = LatticeDistribution::poisson(1.0).unwrap();
        for &(n, k) in &[(100u64, 100u64), (100, 150), (100, 50), (7, 0), (3, 11)] {
            let exact = exact_point_prob(&d, n, k).unwrap();
            let oracle = poisson_ln_pmf(n as f64, k).exp();
            assert!((exact - oracle).abs() <= 1e-12 * oracle, "n={n} k={k}: {exact} vs {oracle}");
        }
        let p = exact_point_prob(&d, 100, 100).unwrap();
        assert!((p - 0.0398610).abs() < 5e-8);
    }

    #[test]
    fn binomial_and_single_term() {
        let p = exact_point_prob(&bernoulli(), 10, 5).unwrap();
        assert!((p - 0.24609375).abs() < 1e-15);
        let t = LatticeDistribution::table(vec![(0, 0.2), (2, 0.3), (3, 0.5)]).unwrap();
        for k in 0..5 {
            assert!((exact_point_prob(&t, 1, k).unwrap() - t.pmf(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn dp_and_inversion_agree() {
        let t = LatticeDistribution::table(vec![(0, 0.1), (1, 0.25), (3, 0.4), (4, 0.25)]).unwrap();
        for &(n, k) in &[(5u64, 7u64), (20, 41), (64, 100), (64, 250)] {
            let r = exact_point_prob_validated(&t, n, k).unwrap();
            assert!(r.dp.is_some());
            assert!((r.dp.unwrap() - r.exact).abs() <= 1e-12 * r.exact);
        }
    }

    #[test]
    fn total_mass_is_one() {
        let t = LatticeDistribution::table(vec![(0, 0.3), (1, 0.5), (2, 0.2)]).unwrap();
        let n = 12;
        let total: f64 = (0..=2 * n).map(|k| exact_point_prob(&t, n, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn central_examples() {
        let d = LatticeDistribution::poisson(1.0).unwrap();
        let c = central_local_limit(&d, 100, 100).unwrap();
        assert!((c - 1.0 / (200.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        let b = central_local_limit(&bernoulli(), 100, 50).unwrap();
        assert!((b - 0.0797885).abs() < 1e-7);
        assert!(matches!(central_local_limit(&d, 100, 101), Err(Error::MeanMismatch { .. })));
        let two = LatticeDistribution::table(vec![(0, 0.5), (2, 0.5)]).unwrap();
        assert!(matches!(central_local_limit(&two, 100, 100), Err(Error::SpanNotOne(2))));
    }

    #[test]
    fn tilted_examples() {
        let d = LatticeDistribution::poisson(1.0).unwrap();
        for &k in &[50u64, 150] {
            let approx = tilted_local_limit(&d, 100, k).unwrap();
            let exact = exact_point_prob(&d, 100, k).unwrap();
            let r = approx / exact;
            assert!((0.998..=1.002).contains(&r), "k={k}: {r}");
        }
        let at_mean = tilted_local_limit(&d, 100, 100).unwrap();
        assert!((at_mean - central_local_limit(&d, 100, 100).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn span_two() {
        let two = LatticeDistribution::table(vec![(0, 0.5), (2, 0.5)]).unwrap();
        let r = span_counterexample_report(&two, 100, 100).unwrap();
        assert!((r.ratio - 2.0).abs() < 0.02, "{r:?}");
        let oracle = (ln_binomial(100, 50) - 100.0 * 2f64.ln()).exp();
        assert!((r.exact - oracle).abs() < 1e-12 * oracle);
        assert_eq!(span_counterexample_report(&two, 100, 101).unwrap().exact, 0.0);
        let odd = LatticeDistribution::table(vec![(1, 0.5), (3, 0.5)]).unwrap();
        let r = span_counterexample_report(&odd, 50, 100).unwrap();
        assert!((r.ratio - 2.0).abs() < 0.05 && r.residue_ok);
        assert_eq!(exact_point_prob(&odd, 50, 101).unwrap(), 0.0);
    }

    #[test]
    fn boundary_and_tail() {
        let t = LatticeDistribution::table(vec![(1, 0.3), (2, 0.7)]).unwrap();
        assert!((exact_point_prob(&t, 10, 10).unwrap() - 0.3f64.powi(10)).abs() < 1e-20);
        assert!((exact_point_prob(&t, 10, 20).unwrap() - 0.7f64.powi(10)).abs() < 1e-16);
        assert_eq!(exact_point_prob(&t, 10, 9).unwrap(), 0.0);
        // far tail well below the linear underflow threshold
        let d = LatticeDistribution::poisson(1.0).unwrap();
        let l = ln_exact_point_prob(&d, 400, 4000).unwrap();
        assert!((l - poisson_ln_pmf(400.0, 4000)).abs() < 1e-9 * l.abs());
    }
}
