//! Cumulant generating functions of lattice laws and their Legendre
//! conjugates.
//!
//! `ψ(τ) = log E[e^{τZ}]` is evaluated in closed form for the named families
//! and by a max-shifted log-sum-exp for tables. Derivatives come from the
//! tilted moments: `ψ'` is the tilted mean, `ψ''` the tilted variance and
//! `ψ'''` the tilted third central moment.
//!
//! The tilt equation `ψ'(τ) = target` is solved by Newton's method inside a
//! bracket on which `ψ' − target` changes sign; a step that leaves the bracket
//! is replaced by bisection. Since `ψ'` is increasing the bracket always
//! exists for targets inside the range of `ψ'`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeDistribution, LawKind};
use crate::policy;
use crate::special::tree_function;

/// First three derivatives of a CGF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgfDerivatives {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Effective domain `(−∞, upper)` (or `(−∞, upper]`) of a univariate CGF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    pub upper: Option<f64>,
    pub upper_included: bool,
}

impl Domain {
    pub const WHOLE_LINE: Domain = Domain { upper: None, upper_included: false };

    pub fn contains(&self, tau: f64) -> bool {
        match self.upper {
            None => tau.is_finite(),
            Some(b) => tau < b || (self.upper_included && tau == b),
        }
    }

    pub fn contains_interior(&self, tau: f64) -> bool {
        match self.upper {
            None => tau.is_finite(),
            Some(b) => tau < b,
        }
    }
}

/// Minimal interface shared by every scalar CGF the solvers work on.
pub(crate) trait ScalarCgf {
    fn domain(&self) -> Domain;
    /// Open range `(lo, hi)` of `ψ'`.
    fn range(&self) -> (f64, f64);
    fn value(&self, tau: f64) -> f64;
    fn derivatives(&self, tau: f64) -> CgfDerivatives;
}

/// Solution of `ψ'(τ) = target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltRoot {
    pub tau: f64,
    pub target: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// `ψ*(x) = sup_τ [xτ − ψ(τ)]` together with its maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugateResult {
    pub x: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub tau: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Outcome of probing `ψ'` toward the domain edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Steepness {
    /// No finite boundary.
    Vacuous,
    Steep,
    NotSteep,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainReport {
    pub domain: Domain,
    pub steepness: Steepness,
    /// `(τ, ψ'(τ))` along the approach to the boundary.
    pub samples: Vec<(f64, f64)>,
}

pub(crate) fn solve_tilt_generic<C: ScalarCgf + ?Sized>(cgf: &C, target: f64) -> Result<TiltRoot> {
    let (lo, hi) = cgf.range();
    if !(target > lo && target < hi) {
        return Err(Error::TargetOutsideRange { target, lo, hi });
    }
    let tol = policy::NEWTON_RESIDUAL * target.abs().max(1.0);
    let f = |tau: f64| cgf.derivatives(tau).d1 - target;
    let f0 = f(0.0);
    if f0.abs() <= tol {
        return Ok(TiltRoot { tau: 0.0, target, residual: f0.abs(), iterations: 0 });
    }
    let domain = cgf.domain();
    // Grow a bracket [a, b] with f(a) < 0 < f(b).
    let (mut a, mut b);
    if f0 < 0.0 {
        a = 0.0;
        let mut found = None;
        for j in 0..200 {
            let cand = match domain.upper {
                Some(edge) => edge - edge * 0.5f64.powi(j + 1),
                None => 2f64.powi(j),
            };
            if cand > policy::TAU_CAP || !domain.contains_interior(cand) {
                break;
            }
            if f(cand) >= 0.0 {
                found = Some(cand);
                break;
            }
            a = cand;
        }
        b = found.ok_or(Error::TargetOutsideRange { target, lo, hi })?;
    } else {
        b = 0.0;
        let mut found = None;
        for j in 0..200 {
            let cand = -(2f64.powi(j));
            if cand < -policy::TAU_CAP {
                break;
            }
            if f(cand) <= 0.0 {
                found = Some(cand);
                break;
            }
            b = cand;
        }
        a = found.ok_or(Error::TargetOutsideRange { target, lo, hi })?;
    }
    let mut tau = if f0 < 0.0 { a } else { b };
    for it in 1..=policy::MAX_ITERATIONS {
        let d = cgf.derivatives(tau);
        let r = d.d1 - target;
        if r.abs() <= tol {
            return Ok(TiltRoot { tau, target, residual: r.abs(), iterations: it });
        }
        if r < 0.0 {
            a = a.max(tau);
        } else {
            b = b.min(tau);
        }
        let newton = tau - r / d.d2;
        let next = if d.d2 > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if next == tau || (b - a) <= f64::EPSILON * tau.abs().max(1.0) {
            // bracket exhausted at floating resolution
            let r = f(next).abs();
            if r <= 1e3 * tol {
                return Ok(TiltRoot { tau: next, target, residual: r, iterations: it });
            }
            return Err(Error::NonConvergence { iterations: it, residual: r, last: vec![next] });
        }
        tau = next;
    }
    let residual = f(tau).abs();
    Err(Error::NonConvergence { iterations: policy::MAX_ITERATIONS, residual, last: vec![tau] })
}

/// Value of `xτ − ψ(τ)` along a geometric approach `τ = ±2^j`, used for
/// `x` on the boundary of the support hull.
fn boundary_limit<C: ScalarCgf + ?Sized>(cgf: &C, x: f64, direction: f64) -> ConjugateResult {
    let mut prev = f64::NAN;
    for j in 0..64 {
        let tau = direction * 2f64.powi(j);
        if !cgf.domain().contains(tau) {
            break;
        }
        let v = x * tau - cgf.value(tau);
        if v > policy::CONJUGATE_CAP {
            return ConjugateResult { x, value: f64::INFINITY, tau, converged: true, iterations: j as usize };
        }
        if (v - prev).abs() <= 1e-13 * v.abs().max(1.0) {
            return ConjugateResult { x, value: v, tau, converged: true, iterations: j as usize };
        }
        prev = v;
    }
    ConjugateResult { x, value: prev, tau: direction * f64::INFINITY, converged: false, iterations: 64 }
}

pub(crate) fn conjugate_generic<C: ScalarCgf + ?Sized>(cgf: &C, x: f64) -> Result<ConjugateResult> {
    let (lo, hi) = cgf.range();
    if x < lo || x > hi || !x.is_finite() {
        let tau = if x < lo { f64::NEG_INFINITY } else { f64::INFINITY };
        return Ok(ConjugateResult { x, value: f64::INFINITY, tau, converged: true, iterations: 0 });
    }
    if x == lo {
        return Ok(boundary_limit(cgf, x, -1.0));
    }
    if x == hi {
        return Ok(boundary_limit(cgf, x, 1.0));
    }
    let root = solve_tilt_generic(cgf, x)?;
    Ok(ConjugateResult {
        x,
        value: x * root.tau - cgf.value(root.tau),
        tau: root.tau,
        converged: true,
        iterations: root.iterations,
    })
}

/// Scalar CGF of finitely many real atoms `Σ w_i e^{τ z_i}` (weights in log
/// form, not necessarily normalized).
#[derive(Debug, Clone)]
pub(crate) struct AtomCgf {
    pub pos: Vec<f64>,
    pub ln_w: Vec<f64>,
}

impl AtomCgf {
    fn tilted(&self, tau: f64) -> (f64, Vec<f64>) {
        let logs: Vec<f64> = self.pos.iter().zip(&self.ln_w).map(|(z, l)| l + tau * z).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        (max + s.ln(), w)
    }
}

impl ScalarCgf for AtomCgf {
    fn domain(&self) -> Domain {
        Domain::WHOLE_LINE
    }

    fn range(&self) -> (f64, f64) {
        self.pos.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &z| (a.min(z), b.max(z)))
    }

    fn value(&self, tau: f64) -> f64 {
        self.tilted(tau).0
    }

    fn derivatives(&self, tau: f64) -> CgfDerivatives {
        let (_, w) = self.tilted(tau);
        tilted_moments(&self.pos, &w)
    }
}

fn tilted_moments(pos: &[f64], w: &[f64]) -> CgfDerivatives {
    let m1: f64 = pos.iter().zip(w).map(|(z, p)| z * p).sum();
    let (mut m2, mut m3) = (0.0, 0.0);
    for (z, p) in pos.iter().zip(w) {
        let d = z - m1;
        m2 += p * d * d;
        m3 += p * d * d * d;
    }
    CgfDerivatives { d1: m1, d2: m2, d3: m3 }
}

/// CGF of a lattice law.
#[derive(Debug, Clone)]
pub struct CgfEvaluator {
    law: LatticeDistribution,
    atoms: Option<AtomCgf>,
}

impl CgfEvaluator {
    pub fn new(law: &LatticeDistribution) -> Self {
        let atoms = law.as_table().map(|t| AtomCgf {
            pos: t.support().iter().map(|&k| k as f64).collect(),
            ln_w: t.probs().iter().map(|p| p.ln()).collect(),
        });
        Self { law: law.clone(), atoms }
    }

    pub fn law(&self) -> &LatticeDistribution {
        &self.law
    }

    pub fn domain(&self) -> Domain {
        ScalarCgf::domain(self)
    }

    /// Open range `R_Z` of `ψ'`, the interior of the support hull.
    pub fn range(&self) -> (f64, f64) {
        ScalarCgf::range(self)
    }

    fn check(&self, tau: f64, interior: bool) -> Result<()> {
        let d = self.domain();
        let ok = if interior { d.contains_interior(tau) } else { d.contains(tau) };
        if ok {
            Ok(())
        } else {
            Err(Error::DomainViolation { value: tau, upper: d.upper.unwrap_or(f64::INFINITY) })
        }
    }

    /// `ψ(τ)`.
    pub fn cgf(&self, tau: f64) -> Result<f64> {
        self.check(tau, false)?;
        Ok(self.value(tau))
    }

    /// `(ψ', ψ'', ψ''')` at an interior point.
    pub fn cgf_derivatives(&self, tau: f64) -> Result<CgfDerivatives> {
        self.check(tau, true)?;
        Ok(ScalarCgf::derivatives(self, tau))
    }

    pub fn mean(&self) -> f64 {
        ScalarCgf::derivatives(self, 0.0).d1
    }

    /// Solves `ψ'(τ) = target` for `target ∈ R_Z`.
    pub fn solve_tilt(&self, target: f64) -> Result<TiltRoot> {
        solve_tilt_generic(self, target)
    }

    /// `ψ*(x)`: finite on the closed support hull, `+∞` outside. On the hull
    /// boundary the supremum is approached along `τ → ±∞`.
    pub fn conjugate(&self, x: f64) -> Result<ConjugateResult> {
        conjugate_generic(self, x)
    }

    /// Effective domain and a steepness diagnostic: `ψ'` is sampled along a
    /// geometric approach to a finite boundary and must grow monotonically
    /// past `1e6`.
    pub fn domain_probe(&self) -> DomainReport {
        let domain = self.domain();
        let Some(edge) = domain.upper else {
            return DomainReport { domain, steepness: Steepness::Vacuous, samples: vec![] };
        };
        let scale = edge.abs().max(1.0);
        let mut samples = Vec::new();
        for j in 1..=60 {
            let tau = edge - scale * 0.5f64.powi(j);
            if !domain.contains_interior(tau) || tau == edge {
                break;
            }
            samples.push((tau, ScalarCgf::derivatives(self, tau).d1));
        }
        let monotone = samples.windows(2).all(|w| w[1].1 >= w[0].1);
        let last = samples.last().map(|s| s.1).unwrap_or(f64::NAN);
        let steepness = if (!last.is_finite() && last > 0.0) || (monotone && last > 1e6) {
            Steepness::Steep
        } else if monotone && samples.len() >= 40 {
            Steepness::NotSteep
        } else {
            Steepness::Inconclusive
        };
        DomainReport { domain, steepness, samples }
    }
}

impl ScalarCgf for CgfEvaluator {
    fn domain(&self) -> Domain {
        match self.law.kind() {
            LawKind::Table(_) | LawKind::Poisson { .. } => Domain::WHOLE_LINE,
            LawKind::Geometric { rho } => Domain { upper: Some(-rho.ln()), upper_included: false },
            LawKind::Borel { lambda } => Domain { upper: Some(-1.0 - lambda.ln()), upper_included: true },
        }
    }

    fn range(&self) -> (f64, f64) {
        let lo = self.law.support_min() as f64;
        let hi = self.law.support_max().map_or(f64::INFINITY, |m| m as f64);
        (lo, hi)
    }

    fn value(&self, tau: f64) -> f64 {
        match self.law.kind() {
            LawKind::Table(_) => self.atoms.as_ref().unwrap().value(tau),
            LawKind::Poisson { lambda } => lambda * tau.exp_m1(),
            LawKind::Geometric { rho } => (-rho).ln_1p() - (-rho * tau.exp()).ln_1p(),
            LawKind::Borel { lambda } => {
                tree_function(lambda * tau.exp()).ln() - tree_function(*lambda).ln()
            }
        }
    }

    fn derivatives(&self, tau: f64) -> CgfDerivatives {
        match self.law.kind() {
            LawKind::Table(_) => self.atoms.as_ref().unwrap().derivatives(tau),
            LawKind::Poisson { lambda } => {
                let v = lambda * tau.exp();
                CgfDerivatives { d1: v, d2: v, d3: v }
            }
            LawKind::Geometric { rho } => {
                let s = rho * tau.exp();
                let c = 1.0 - s;
                CgfDerivatives { d1: s / c, d2: s / (c * c), d3: s * (1.0 + s) / (c * c * c) }
            }
            LawKind::Borel { lambda } => {
                let t = tree_function(lambda * tau.exp());
                let c = 1.0 - t;
                CgfDerivatives {
                    d1: 1.0 / c,
                    d2: t / c.powi(3),
                    d3: t * (1.0 + 2.0 * t) / c.powi(5),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bernoulli() -> LatticeDistribution {
        LatticeDistribution::table(vec![(0, 0.5), (1, 0.5)]).unwrap()
    }

    #[test]
    fn poisson_closed_forms() {
        let lambda = 2.0;
        let ev = CgfEvaluator::new(&LatticeDistribution::poisson(lambda).unwrap());
        for &tau in &[-2.0, -0.5, 0.0, 0.7, 1.5] {
            let psi = ev.cgf(tau).unwrap();
            assert!((psi - (-lambda + lambda * f64::exp(tau))).abs() < 1e-13);
            let d = ev.cgf_derivatives(tau).unwrap();
            let v = lambda * f64::exp(tau);
            assert!((d.d1 - v).abs() < 1e-13 && (d.d2 - v).abs() < 1e-13);
        }
        assert_eq!(ev.cgf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn bernoulli_derivatives_at_zero() {
        let ev = CgfEvaluator::new(&bernoulli());
        let d = ev.cgf_derivatives(0.0).unwrap();
        assert!((d.d1 - 0.5).abs() < 1e-15 && (d.d2 - 0.25).abs() < 1e-15);
        assert_eq!(ev.cgf(0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let laws = [
            LatticeDistribution::poisson(1.5).unwrap(),
            LatticeDistribution::geometric(0.4).unwrap(),
            LatticeDistribution::borel(0.2).unwrap(),
            LatticeDistribution::table(vec![(0, 0.2), (1, 0.1), (3, 0.4), (7, 0.3)]).unwrap(),
        ];
        for law in &laws {
            let ev = CgfEvaluator::new(law);
            for &tau in &[-0.8, -0.1, 0.0, 0.3] {
                let d = ev.cgf_derivatives(tau).unwrap();
                // Richardson-extrapolated central differences
                let fd = |g: &dyn Fn(f64) -> f64| {
                    let h = policy::FD_STEP;
                    let c = |h: f64| (g(tau + h) - g(tau - h)) / (2.0 * h);
                    (4.0 * c(h / 2.0) - c(h)) / 3.0
                };
                let psi = |t: f64| ev.cgf(t).unwrap();
                let d1 = |t: f64| ev.cgf_derivatives(t).unwrap().d1;
                let d2 = |t: f64| ev.cgf_derivatives(t).unwrap().d2;
                for (exact, approx) in [(d.d1, fd(&psi)), (d.d2, fd(&d1)), (d.d3, fd(&d2))] {
                    let rel = (exact - approx).abs() / exact.abs().max(1e-300);
                    assert!(rel < 1e-6, "{law:?} τ={tau}: {exact} vs {approx}");
                }
            }
        }
    }

    #[test]
    fn tilt_examples() {
        let lambda = 1.0;
        let ev = CgfEvaluator::new(&LatticeDistribution::poisson(lambda).unwrap());
        for &(p, q) in &[(1.0, 1.0), (2.0, 5.0), (3.0, 1.0)] {
            let r = ev.solve_tilt(p / q).unwrap();
            assert!((r.tau - (p / (q * lambda)).ln()).abs() < 1e-11);
        }
        let r = ev.solve_tilt(1.0).unwrap();
        assert_eq!(r.tau, 0.0);
        let b = CgfEvaluator::new(&bernoulli());
        assert!((b.solve_tilt(0.75).unwrap().tau - 3f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn tilt_outside_range() {
        let b = CgfEvaluator::new(&bernoulli());
        assert!(matches!(b.solve_tilt(1.0), Err(Error::TargetOutsideRange { .. })));
        assert!(matches!(b.solve_tilt(-0.1), Err(Error::TargetOutsideRange { .. })));
        let p = CgfEvaluator::new(&LatticeDistribution::poisson(1.0).unwrap());
        assert!(matches!(p.solve_tilt(0.0), Err(Error::TargetOutsideRange { .. })));
    }

    #[test]
    fn tilt_near_table_edge_and_geometric_boundary() {
        let b = CgfEvaluator::new(&bernoulli());
        let r = b.solve_tilt(1.0 - 1e-9).unwrap();
        // residual tolerance is absolute, so τ is only pinned to about 1%
        assert!((r.tau - ((1.0 - 1e-9) / 1e-9f64).ln()).abs() < 2e-2);
        assert!((b.cgf_derivatives(r.tau).unwrap().d1 - (1.0 - 1e-9)).abs() <= 1e-11);
        let g = CgfEvaluator::new(&LatticeDistribution::geometric(0.5).unwrap());
        let r = g.solve_tilt(1000.0).unwrap();
        assert!(r.tau < 2f64.ln());
        assert!((g.cgf_derivatives(r.tau).unwrap().d1 - 1000.0).abs() < 1e-11 * 1000.0);
    }

    #[test]
    fn conjugate_examples() {
        let ev = CgfEvaluator::new(&LatticeDistribution::poisson(1.0).unwrap());
        let c = ev.conjugate(0.4).unwrap();
        let expected = 0.4 * 0.4f64.ln() + 0.6;
        assert!((c.value - expected).abs() < 1e-12);
        assert!((expected - 0.233484).abs() < 1e-6);
        assert_eq!(ev.conjugate(1.0).unwrap().value, 0.0);
        // boundary x = 0: ψ*(0) = λ
        let c = ev.conjugate(0.0).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12 && c.converged);
        assert_eq!(ev.conjugate(-0.5).unwrap().value, f64::INFINITY);
        let b = CgfEvaluator::new(&bernoulli());
        assert!((b.conjugate(1.0).unwrap().value - 2f64.ln()).abs() < 1e-12);
        assert_eq!(b.conjugate(1.5).unwrap().value, f64::INFINITY);
    }

    #[test]
    fn domain_reports() {
        let t = CgfEvaluator::new(&bernoulli()).domain_probe();
        assert_eq!(t.steepness, Steepness::Vacuous);
        assert_eq!(t.domain.upper, None);
        let g = CgfEvaluator::new(&LatticeDistribution::geometric(0.5).unwrap()).domain_probe();
        assert!((g.domain.upper.unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g.steepness, Steepness::Steep);
        let p = CgfEvaluator::new(&LatticeDistribution::poisson(3.0).unwrap()).domain_probe();
        assert_eq!(p.domain, Domain::WHOLE_LINE);
        let b = CgfEvaluator::new(&LatticeDistribution::borel(0.2).unwrap()).domain_probe();
        assert_eq!(b.steepness, Steepness::Steep);
    }

    #[test]
    fn domain_violation() {
        let g = CgfEvaluator::new(&LatticeDistribution::geometric(0.5).unwrap());
        assert!(matches!(g.cgf(1.0), Err(Error::DomainViolation { .. })));
    }
}
