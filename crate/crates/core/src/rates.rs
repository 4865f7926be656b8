//! Conditional deviation rates for `T_n = Σ Y_i` given `S_n = Σ X_i = k`.
//!
//! * LDP rate `I(y) = ψ*_{X,Y}(p/q, y) − ψ*_X(p/q)` at speed `1/(nq)`.
//! * Gibbs point `χ = E[Y̌_τ]`, `τ` the tilt with `ψ'_X(τ) = p/q`.
//! * MDP rate `J(y) = y²/(2α²_τ)` with `α²_τ` the residual variance of the
//!   regression of `Y̌_τ` on `X̌_τ`, centering `b_n = nq·E[Y̌_τ]`.
//! * The conditional Laplace transform `f_n(u)` as a ratio of two Fourier
//!   integrals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgf2::JointCgfEvaluator;
use crate::error::{Error, Result};
use crate::joint::{ConditioningSpec, JointLaw};
use crate::local_limit::fourier_point_mass;
use crate::policy;
use crate::report::csv_string;
use crate::tilting::check_pair;

/// One grid point of a rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub y: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub ratio: f64,
    pub tau: f64,
    pub psi_star_x: f64,
    pub points: Vec<RatePoint>,
    pub gibbs_point: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub curvature_at_min: f64,
    pub alpha2: f64,
    pub speed: String,
}

impl RateCurve {
    /// `y,rate` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        csv_string(&["y", "rate"], self.points.iter().map(|p| vec![p.y, p.rate]))
    }

    /// Grid point with the smallest rate.
    pub fn argmin(&self) -> RatePoint {
        *self.points.iter().min_by(|a, b| a.rate.total_cmp(&b.rate)).unwrap()
    }
}

/// Rate function at a fixed ratio, reusable across many `y`.
#[derive(Debug, Clone)]
pub struct RateFunction {
    ev: JointCgfEvaluator,
    ratio: f64,
    tau: f64,
    psi_star_x: f64,
    /// Standard deviation of `Y̌_τ`.
    y_sd: f64,
}

impl RateFunction {
    /// Requires span one and `ratio` inside the range of `ψ'_X`.
    pub fn new(joint: &JointLaw, ratio: f64) -> Result<Self> {
        let ev = JointCgfEvaluator::new(joint)?;
        let span = ev.x_evaluator().law().span()?;
        if span.m != 1 {
            return Err(Error::SpanNotOne(span.m));
        }
        let conj = ev.x_evaluator().conjugate(ratio)?;
        if !conj.tau.is_finite() {
            let (lo, hi) = ev.x_evaluator().range();
            return Err(Error::TargetOutsideRange { target: ratio, lo, hi });
        }
        let y_sd = check_pair(joint, conj.tau)?.var_y.sqrt();
        Ok(Self { ev, ratio, tau: conj.tau, psi_star_x: conj.value, y_sd })
    }

    pub fn evaluator(&self) -> &JointCgfEvaluator {
        &self.ev
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Tilt `τ` with `ψ'_X(τ) = p/q`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn psi_star_x(&self) -> f64 {
        self.psi_star_x
    }

    /// `I(y)`. Rounding can leave values a few ulps below zero near the
    /// minimum; those are reported as zero.
    pub fn rate(&self, y: f64) -> Result<f64> {
        let c = self.ev.conjugate2(self.ratio, y)?;
        let r = c.value - self.psi_star_x;
        Ok(if r < 0.0 && r > -1e-12 * self.psi_star_x.abs().max(1.0) { 0.0 } else { r })
    }

    /// `E[Y̌_τ]`.
    pub fn gibbs_point(&self) -> Result<f64> {
        Ok(check_pair(self.ev.law(), self.tau)?.mean_y)
    }

    /// Width of the mark hull, capped by the spread of `Y̌_τ` so that long
    /// tails of the mark table do not coarsen the stencil.
    fn curvature_scale(&self) -> f64 {
        let (lo, hi) = self.ev.mark_range();
        let width = if (hi - lo).is_finite() && hi > lo { hi - lo } else { f64::INFINITY };
        let s = width.min(self.y_sd);
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    }

    /// Five-point central second difference of `I` at `y`.
    pub fn curvature_at(&self, y: f64) -> Result<f64> {
        let h = policy::CURVATURE_STEP * self.curvature_scale();
        let f = |s: f64| self.rate(y + s * h);
        let v = -f(2.0)? + 16.0 * f(1.0)? - 30.0 * f(0.0)? + 16.0 * f(-1.0)? - f(-2.0)?;
        Ok(v / (12.0 * h * h))
    }

    /// `policy::DEFAULT_GRID_POINTS` points over the mark hull, inset by
    /// `policy::GRID_INSET` of its width at both ends.
    pub fn default_grid(&self) -> Result<Vec<f64>> {
        if let Some((a, b)) = self.ev.affine_mark() {
            return Ok(vec![a + b * self.ratio]);
        }
        let (lo, hi) = self.ev.mark_range();
        if !(hi - lo).is_finite() {
            return Err(Error::InvalidConfig("unbounded mark: an explicit y-grid is required".into()));
        }
        let d = policy::GRID_INSET * (hi - lo);
        Ok(linspace(lo + d, hi - d, policy::DEFAULT_GRID_POINTS))
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Rate curve on `grid` (default grid when `None`).
pub fn ldp_rate(joint: &JointLaw, ratio: f64, grid: Option<&[f64]>) -> Result<RateCurve> {
    let rf = RateFunction::new(joint, ratio)?;
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => rf.default_grid()?,
    };
    let rates: Vec<f64> = grid.par_iter().map(|&y| rf.rate(y)).collect::<Result<_>>()?;
    let points = grid.iter().zip(rates).map(|(&y, rate)| RatePoint { y, rate }).collect();
    let pair = check_pair(joint, rf.tau)?;
    let curvature_at_min = if rf.ev.affine_mark().is_some() {
        f64::INFINITY
    } else {
        rf.curvature_at(pair.mean_y)?
    };
    Ok(RateCurve {
        ratio,
        tau: rf.tau,
        psi_star_x: rf.psi_star_x,
        points,
        gibbs_point: pair.mean_y,
        curvature_at_min,
        alpha2: pair.alpha2,
        speed: "1/(nq)".into(),
    })
}

/// `χ = E[Y̌_τ]`.
pub fn gibbs_point(joint: &JointLaw, ratio: f64) -> Result<f64> {
    let ev = JointCgfEvaluator::new(joint)?;
    let tau = ev.x_evaluator().solve_tilt(ratio)?.tau;
    Ok(check_pair(joint, tau)?.mean_y)
}

/// Speed `a_n = n^{−γ}`; `n·a_n·q → ∞` requires `γ < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpeedSequence {
    Power { gamma: f64 },
}

impl SpeedSequence {
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidConfig(format!("speed exponent γ = {gamma} must lie in (0, 1)")));
        }
        Ok(SpeedSequence::Power { gamma })
    }

    pub fn at(&self, n: u64) -> f64 {
        match *self {
            SpeedSequence::Power { gamma } => (n as f64).powf(-gamma),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdpResult {
    pub ratio: f64,
    pub tau: f64,
    pub alpha2: f64,
    /// `E[Y̌_τ]`; the centering is `b_n = nq` times this.
    pub gibbs_point: f64,
    pub speed: String,
}

impl MdpResult {
    /// `J(y) = y² / (2α²_τ)`.
    pub fn rate(&self, y: f64) -> f64 {
        y * y / (2.0 * self.alpha2)
    }

    /// `b_n = n_terms · E[Y̌_τ]`.
    pub fn centering(&self, n_terms: u64) -> f64 {
        n_terms as f64 * self.gibbs_point
    }
}

pub fn mdp_params(joint: &JointLaw, ratio: f64) -> Result<MdpResult> {
    let rf = RateFunction::new(joint, ratio)?;
    let pair = check_pair(joint, rf.tau)?;
    if pair.alpha2 <= policy::DEGENERATE_RESIDUAL {
        return Err(Error::DegenerateResidual(pair.alpha2));
    }
    Ok(MdpResult {
        ratio,
        tau: rf.tau,
        alpha2: pair.alpha2,
        gibbs_point: pair.mean_y,
        speed: "a_n".into(),
    })
}

/// Joint laws indexed by `n`, for parameters drifting with `n` such as
/// `λ_n = λ + c/n`.
pub trait LawSequence {
    fn law_at(&self, n: u64) -> Result<JointLaw>;
}

impl<F: Fn(u64) -> Result<JointLaw>> LawSequence for F {
    fn law_at(&self, n: u64) -> Result<JointLaw> {
        self(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenteringPoint {
    pub n: u64,
    pub n_terms: u64,
    pub tau_n: f64,
    pub b_n: f64,
}

/// `b_n = nq·E[Y̌_{τ_n}]` with `τ_n` re-solved for the law at each `n`.
pub fn centering_sequence(seq: &dyn LawSequence, spec: &ConditioningSpec, ns: &[u64]) -> Result<Vec<CenteringPoint>> {
    ns.iter()
        .map(|&n| {
            let law = seq.law_at(n)?;
            let s = spec.at(n)?;
            let ev = JointCgfEvaluator::new(&law)?;
            let tau_n = ev.x_evaluator().solve_tilt(s.ratio())?.tau;
            let chi = check_pair(&law, tau_n)?.mean_y;
            Ok(CenteringPoint { n, n_terms: s.n_terms(), tau_n, b_n: s.n_terms() as f64 * chi })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplaceMethod {
    FourierRatio,
    DpOracle,
}

/// `f_n(u) = (1/nq) log E[e^{uT_n} | S_n = k]` on a grid of `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalLaplace {
    pub spec: ConditioningSpec,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub method: LaplaceMethod,
}

/// `log E[e^{uT}; S = k]`, each integral evaluated on the contour through
/// the saddle point `∂_ξ ψ(ξ, u) = k/N`.
fn ln_joint_transform(ev: &JointCgfEvaluator, n_terms: u64, k: u64, u: f64) -> Result<f64> {
    let n = n_terms as f64;
    let x = ev.x_evaluator();
    let (lo, hi) = x.range();
    let target = k as f64 / n;
    if target < lo || target > hi {
        return Ok(f64::NEG_INFINITY);
    }
    if target == lo || target == hi {
        // every summand sits at the same end of the support
        let end = target as u64;
        let t = ev.law().materialize(policy::DEFAULT_TRUNCATION)?;
        let l = crate::special::log_sum_exp(
            t.rows().iter().filter(|r| r.k == end).map(|r| r.p.ln() + u * r.y),
        );
        return Ok(n * l);
    }
    let xi = ev.solve_xi(u, target)?;
    let table = ev.tilted_x_marginal(xi, u)?;
    let (mass, _) = fourier_point_mass(&table, n_terms, k)?;
    if mass == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(n * ev.cgf(xi, u)? - k as f64 * xi + mass.ln())
}

pub fn bartlett_laplace(joint: &JointLaw, spec: &ConditioningSpec, u_grid: &[f64]) -> Result<ConditionalLaplace> {
    let ev = JointCgfEvaluator::new(joint)?;
    let (n_terms, k) = (spec.n_terms(), spec.k());
    let base = ln_joint_transform(&ev, n_terms, k, 0.0)?;
    if base == f64::NEG_INFINITY {
        return Err(Error::ZeroProbabilityEvent { k, n_terms });
    }
    let f = u_grid
        .iter()
        .map(|&u| Ok((ln_joint_transform(&ev, n_terms, k, u)? - base) / n_terms as f64))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConditionalLaplace { spec: *spec, u: u_grid.to_vec(), f, method: LaplaceMethod::FourierRatio })
}

/// `I''(χ)·α²_τ`, which must equal one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub ratio: f64,
    pub gibbs_point: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub curvature: f64,
    pub alpha2: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub product: f64,
    pub passed: bool,
    /// Reason the check was not run.
    pub skipped: Option<String>,
}

/// Relative tolerance of the curvature identity.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-4;

pub fn mdp_consistency_check(joint: &JointLaw, ratio: f64) -> Result<ConsistencyReport> {
    let rf = RateFunction::new(joint, ratio)?;
    let pair = check_pair(joint, rf.tau)?;
    let mut report = ConsistencyReport {
        ratio,
        gibbs_point: pair.mean_y,
        curvature: f64::NAN,
        alpha2: pair.alpha2,
        product: f64::NAN,
        passed: false,
        skipped: None,
    };
    if pair.alpha2 <= policy::DEGENERATE_RESIDUAL || rf.ev.affine_mark().is_some() {
        report.skipped = Some("mark is affine in X; residual variance vanishes".into());
        return Ok(report);
    }
    report.curvature = rf.curvature_at(pair.mean_y)?;
    report.product = report.curvature * pair.alpha2;
    report.passed = (report.product - 1.0).abs() <= CONSISTENCY_TOLERANCE;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::{JointRow, Mark};
    use crate::lattice::LatticeDistribution;

    fn occupancy(lambda: f64) -> JointLaw {
        JointLaw::marked(LatticeDistribution::poisson(lambda).unwrap(), Mark::IndicatorZero)
    }

    #[test]
    fn occupancy_rate_shape() {
        let e1 = (-1.0f64).exp();
        let curve = ldp_rate(&occupancy(1.0), 1.0, None).unwrap();
        assert!((curve.gibbs_point - e1).abs() < 1e-14);
        let rf = RateFunction::new(&occupancy(1.0), 1.0).unwrap();
        assert!(rf.rate(e1).unwrap().abs() < 1e-12);
        assert!(curve.points.iter().all(|p| p.rate >= 0.0));
        let step = curve.points[1].y - curve.points[0].y;
        assert!((curve.argmin().y - e1).abs() <= step);
        for w in curve.points.windows(3) {
            assert!(w[0].rate - 2.0 * w[1].rate + w[2].rate >= -1e-7);
        }
    }

    #[test]
    fn gibbs_points() {
        assert!((gibbs_point(&occupancy(1.0), 3.0).unwrap() - (-3.0f64).exp()).abs() < 1e-14);
        let id = JointLaw::marked(LatticeDistribution::poisson(1.0).unwrap(), Mark::Identity);
        assert!((gibbs_point(&id, 2.5).unwrap() - 2.5).abs() < 1e-10);
    }

    #[test]
    fn identity_mark_pins_the_rate() {
        let id = JointLaw::marked(LatticeDistribution::poisson(1.0).unwrap(), Mark::Identity);
        let rf = RateFunction::new(&id, 1.5).unwrap();
        assert!(rf.rate(1.5).unwrap().abs() < 1e-12);
        assert_eq!(rf.rate(1.4).unwrap(), f64::INFINITY);
        assert!(matches!(mdp_params(&id, 1.5), Err(Error::DegenerateResidual(_))));
        let r = mdp_consistency_check(&id, 1.5).unwrap();
        assert!(r.skipped.is_some());
    }

    #[test]
    fn occupancy_alpha2() {
        let m = mdp_params(&occupancy(1.0), 1.0).unwrap();
        let e1 = (-1.0f64).exp();
        assert!((m.alpha2 - e1 * (1.0 - 2.0 * e1)).abs() < 1e-15);
        assert!((m.alpha2 - 0.0972089).abs() < 1e-7);
        assert_eq!(m.rate(0.0), 0.0);
        assert!((m.centering(100) - 100.0 * e1).abs() < 1e-12);
    }

    #[test]
    fn constant_mark_is_degenerate() {
        let c = JointLaw::marked(
            LatticeDistribution::poisson(1.0).unwrap(),
            Mark::CustomTable { values: Default::default(), default: 2.0 },
        );
        assert!(matches!(mdp_params(&c, 1.0), Err(Error::DegenerateResidual(_))));
    }

    #[test]
    fn curvature_identity() {
        for &ratio in &[0.4, 1.0, 3.0] {
            let r = mdp_consistency_check(&occupancy(1.0), ratio).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let be = JointLaw::marked(LatticeDistribution::geometric(0.5).unwrap(), Mark::IndicatorZero);
        let r = mdp_consistency_check(&be, 1.0).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn span_two_is_rejected() {
        let t = JointLaw::table(vec![JointRow { k: 0, y: 0.0, p: 0.5 }, JointRow { k: 2, y: 1.0, p: 0.5 }]).unwrap();
        assert!(matches!(ldp_rate(&t, 1.0, None), Err(Error::SpanNotOne(2))));
    }

    #[test]
    fn scale_covariance() {
        let t = JointLaw::table(vec![
            JointRow { k: 0, y: 1.0, p: 0.2 },
            JointRow { k: 1, y: 0.0, p: 0.3 },
            JointRow { k: 1, y: 2.0, p: 0.1 },
            JointRow { k: 2, y: 0.5, p: 0.4 },
        ])
        .unwrap();
        let scaled = t.scale_mark(2.0, policy::DEFAULT_TRUNCATION).unwrap();
        let a = RateFunction::new(&t, 1.1).unwrap();
        let b = RateFunction::new(&scaled, 1.1).unwrap();
        for &y in &[0.3, 0.6, 0.9, 1.2] {
            let (ra, rb) = (a.rate(y).unwrap(), b.rate(2.0 * y).unwrap());
            assert!((ra - rb).abs() < 1e-9, "y={y}: {ra} {rb}");
        }
        let (ma, mb) = (mdp_params(&t, 1.1).unwrap(), mdp_params(&scaled, 1.1).unwrap());
        assert!((mb.alpha2 - 4.0 * ma.alpha2).abs() < 1e-12);
    }

    #[test]
    fn laplace_at_zero_and_convexity() {
        let spec = ConditioningSpec::new(1, 1, 10).unwrap();
        let u: Vec<f64> = linspace(-2.0, 2.0, 21);
        let f = bartlett_laplace(&occupancy(1.0), &spec, &u).unwrap();
        assert_eq!(f.f[10], 0.0);
        for w in f.f.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
        }
    }

    #[test]
    fn centering_under_a_drifting_parameter() {
        let seq = |n: u64| -> Result<JointLaw> {
            Ok(JointLaw::marked(LatticeDistribution::poisson(1.0 + 1.0 / n as f64)?, Mark::IndicatorZero))
        };
        let spec = ConditioningSpec::new(1, 1, 1).unwrap();
        let pts = centering_sequence(&seq, &spec, &[10, 100, 1000]).unwrap();
        for p in &pts {
            // λ_n e^{τ_n} = p/q, so E[Y̌] = e^{−1} for every n
            assert!((p.b_n / p.n_terms as f64 - (-1.0f64).exp()).abs() < 1e-12);
            assert!((p.tau_n + (1.0 + 1.0 / p.n as f64).ln()).abs() < 1e-11);
        }
    }
}
