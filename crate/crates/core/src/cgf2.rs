//! Bivariate CGF `ψ_{X,Y}(ξ, u) = log E[e^{ξX + uY}]` and its conjugate.
//!
//! Three evaluation paths:
//! * finite joint tables sum over atoms;
//! * the identity mark reduces to `ψ_X(ξ + u)`;
//! * a bounded mark on a closed-form `X` splits the support into finitely
//!   many exceptional atoms (where the mark differs from its default value)
//!   and a rest on which `Y` is constant. The rest moments come from the
//!   closed-form cumulants of the tilted `X` minus the atoms, or by direct
//!   summation when the atoms carry most of the tilted mass.
//!
//! The conjugate first locates `(x, y)` relative to the closed convex hull of
//! the joint support. Outside it is `+∞`. On a boundary edge the supremum is
//! attained at infinity along the outward normal and equals the univariate
//! conjugate of the sub-measure carried by that edge. Interior points go to a
//! damped Newton solve of `∇ψ = (x, y)`.

use serde::Serialize;

use crate::cgf::{conjugate_generic, solve_tilt_generic, AtomCgf, CgfDerivatives, CgfEvaluator, Domain, ScalarCgf};
use crate::error::{Error, Result};
use crate::joint::{JointLaw, Mark};
use crate::lattice::{FiniteTable, LatticeDistribution, LawKind};
use crate::policy;
use crate::special::log_sum_exp;
use crate::tilting::tilt_by;

/// Gradient, Hessian and third derivatives of `ψ_{X,Y}`. `third` holds
/// `[ψ_ξξξ, ψ_ξξu, ψ_ξuu, ψ_uuu]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointDerivatives {
    pub grad: [f64; 2],
    pub hessian: [[f64; 2]; 2],
    pub third: [f64; 4],
}

/// Effective domain of `ψ_{X,Y}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JointDomain {
    Plane,
    /// `ξ < upper`, any `u`.
    XiBelow { upper: f64 },
    /// `ξ + u < upper` (or `≤` when included).
    SumBelow { upper: f64, included: bool },
}

impl JointDomain {
    pub fn contains(&self, xi: f64, u: f64) -> bool {
        if !(xi.is_finite() && u.is_finite()) {
            return false;
        }
        match *self {
            JointDomain::Plane => true,
            JointDomain::XiBelow { upper } => xi < upper,
            JointDomain::SumBelow { upper, included } => xi + u < upper || (included && xi + u == upper),
        }
    }

    fn contains_interior(&self, xi: f64, u: f64) -> bool {
        match *self {
            JointDomain::SumBelow { upper, .. } => xi.is_finite() && u.is_finite() && xi + u < upper,
            _ => self.contains(xi, u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conjugate2Method {
    Newton,
    CoordinateSweeps,
    /// `(x, y)` on a boundary edge of the support hull.
    Face,
    /// The mark is affine in `X`; reduced to the conjugate of `X`.
    Affine,
    OutsideHull,
}

/// `ψ*_{X,Y}(x, y)` with its maximizer `(ξ, u)`; the maximizer is NaN when
/// the supremum is approached at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conjugate2Result {
    pub x: f64,
    pub y: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub xi: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub u: f64,
    pub converged: bool,
    pub iterations: usize,
    pub method: Conjugate2Method,
}

#[derive(Debug, Clone)]
enum Repr {
    Atoms { x: Vec<f64>, y: Vec<f64>, lnp: Vec<f64> },
    /// `Y = X`.
    Shifted,
    /// Exceptional atoms `(k, y_k, ln p_k)` plus the rest, where `Y = default`.
    Split { atoms: Vec<(u64, f64, f64)>, default: f64 },
}

/// Tilted law of `X` restricted to the rest set: log-mass and conditional
/// mean, variance and third central moment.
#[derive(Debug, Clone, Copy)]
struct RestStats {
    ln_mass: f64,
    mean: f64,
    var: f64,
    third: f64,
}

/// Support geometry: finitely many points, optionally extended by the
/// recession direction `(1, 0)` (a bounded mark on an unbounded support).
#[derive(Debug, Clone)]
struct Geometry {
    points: Vec<(f64, f64)>,
    recession: bool,
}

/// CGF of a joint law `(X, Y)`.
#[derive(Debug, Clone)]
pub struct JointCgfEvaluator {
    law: JointLaw,
    x: CgfEvaluator,
    repr: Repr,
    geometry: Geometry,
    /// `Y = a + b·X` on the support.
    affine: Option<(f64, f64)>,
}

impl JointCgfEvaluator {
    pub fn new(law: &JointLaw) -> Result<Self> {
        let xlaw = law.x_marginal()?;
        if xlaw.is_degenerate() {
            return Err(Error::DegenerateDistribution(xlaw.support_min()));
        }
        let x = CgfEvaluator::new(&xlaw);
        let closed = !matches!(xlaw.kind(), LawKind::Table(_));
        let (repr, geometry, affine) = match law {
            JointLaw::Marked { x: xl, mark: Mark::Identity } if closed => {
                let k0 = xl.support_min() as f64;
                (Repr::Shifted, Geometry { points: vec![(k0, k0)], recession: false }, Some((0.0, 1.0)))
            }
            JointLaw::Marked { x: xl, mark } if closed => split_repr(xl, mark),
            _ => {
                let t = law.materialize(policy::DEFAULT_TRUNCATION)?;
                let rows = t.rows();
                let repr = Repr::Atoms {
                    x: rows.iter().map(|r| r.k as f64).collect(),
                    y: rows.iter().map(|r| r.y).collect(),
                    lnp: rows.iter().map(|r| r.p.ln()).collect(),
                };
                let points = rows.iter().map(|r| (r.k as f64, r.y)).collect();
                (repr, Geometry { points, recession: false }, t.affine_mark())
            }
        };
        Ok(Self { law: law.clone(), x, repr, geometry, affine })
    }

    pub fn law(&self) -> &JointLaw {
        &self.law
    }

    /// Univariate evaluator of the `X` marginal.
    pub fn x_evaluator(&self) -> &CgfEvaluator {
        &self.x
    }

    /// `Some((a, b))` when `Y = a + b·X` almost surely.
    pub fn affine_mark(&self) -> Option<(f64, f64)> {
        self.affine
    }

    pub fn domain(&self) -> JointDomain {
        let xd = self.x.domain();
        match (&self.repr, xd.upper) {
            (_, None) => JointDomain::Plane,
            (Repr::Shifted, Some(upper)) => JointDomain::SumBelow { upper, included: xd.upper_included },
            (_, Some(upper)) => JointDomain::XiBelow { upper },
        }
    }

    /// Smallest and largest value of the mark.
    pub fn mark_range(&self) -> (f64, f64) {
        match &self.repr {
            Repr::Shifted => (self.x.range().0, f64::INFINITY),
            _ => {
                let ys = self.geometry.points.iter().map(|p| p.1);
                ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)))
            }
        }
    }

    fn check(&self, xi: f64, u: f64, interior: bool) -> Result<()> {
        let d = self.domain();
        let ok = if interior { d.contains_interior(xi, u) } else { d.contains(xi, u) };
        if ok {
            return Ok(());
        }
        let upper = match d {
            JointDomain::Plane => f64::INFINITY,
            JointDomain::XiBelow { upper } | JointDomain::SumBelow { upper, .. } => upper,
        };
        Err(Error::DomainViolation { value: if matches!(d, JointDomain::SumBelow { .. }) { xi + u } else { xi }, upper })
    }

    /// `ψ_{X,Y}(ξ, u)`.
    pub fn cgf(&self, xi: f64, u: f64) -> Result<f64> {
        self.check(xi, u, false)?;
        Ok(self.value(xi, u))
    }

    pub fn cgf_derivatives(&self, xi: f64, u: f64) -> Result<JointDerivatives> {
        self.check(xi, u, true)?;
        Ok(self.eval(xi, u).1)
    }

    fn value(&self, xi: f64, u: f64) -> f64 {
        match &self.repr {
            Repr::Shifted => ScalarCgf::value(&self.x, xi + u),
            Repr::Atoms { x, y, lnp } => {
                log_sum_exp(x.iter().zip(y).zip(lnp).map(|((a, b), l)| l + xi * a + u * b))
            }
            Repr::Split { .. } => self.eval(xi, u).0,
        }
    }

    fn eval(&self, xi: f64, u: f64) -> (f64, JointDerivatives) {
        match &self.repr {
            Repr::Shifted => {
                let d = ScalarCgf::derivatives(&self.x, xi + u);
                let psi = ScalarCgf::value(&self.x, xi + u);
                let h = [[d.d2; 2]; 2];
                (psi, JointDerivatives { grad: [d.d1; 2], hessian: h, third: [d.d3; 4] })
            }
            Repr::Atoms { x, y, lnp } => {
                let logs: Vec<f64> =
                    x.iter().zip(y).zip(lnp).map(|((a, b), l)| l + xi * a + u * b).collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= s);
                let mx: f64 = x.iter().zip(&w).map(|(a, p)| a * p).sum();
                let my: f64 = y.iter().zip(&w).map(|(b, p)| b * p).sum();
                let mut acc = Acc::default();
                for ((a, b), p) in x.iter().zip(y).zip(&w) {
                    acc.add(*p, a - mx, b - my);
                }
                (max + s.ln(), acc.finish(mx, my))
            }
            Repr::Split { atoms, default } => {
                let psi_x = ScalarCgf::value(&self.x, xi);
                let rest = self.rest_stats(xi, psi_x);
                let lrest = u * default + rest.ln_mass;
                let latoms: Vec<f64> =
                    atoms.iter().map(|&(k, yk, l)| l + xi * k as f64 - psi_x + u * yk).collect();
                let lnz = log_sum_exp(std::iter::once(lrest).chain(latoms.iter().copied()));
                let wr = (lrest - lnz).exp();
                let wa: Vec<f64> = latoms.iter().map(|l| (l - lnz).exp()).collect();
                let mut mx = wr * rest.mean;
                let mut my = wr * default;
                for (&(k, yk, _), w) in atoms.iter().zip(&wa) {
                    mx += w * k as f64;
                    my += w * yk;
                }
                let mut acc = Acc::default();
                let s = rest.mean - mx;
                let dy = default - my;
                // the rest contributes its own spread in X at constant Y
                acc.xx += wr * (rest.var + s * s);
                acc.xy += wr * s * dy;
                acc.yy += wr * dy * dy;
                acc.xxx += wr * (rest.third + 3.0 * rest.var * s + s * s * s);
                acc.xxy += wr * (rest.var + s * s) * dy;
                acc.xyy += wr * s * dy * dy;
                acc.yyy += wr * dy * dy * dy;
                for (&(k, yk, _), w) in atoms.iter().zip(&wa) {
                    acc.add(*w, k as f64 - mx, yk - my);
                }
                (psi_x + lnz, acc.finish(mx, my))
            }
        }
    }

    /// Rest statistics of the `ξ`-tilted `X` law.
    fn rest_stats(&self, xi: f64, psi_x: f64) -> RestStats {
        let Repr::Split { atoms, .. } = &self.repr else { unreachable!() };
        let lq: Vec<(f64, f64)> = atoms.iter().map(|&(k, _, l)| (k as f64, l + xi * k as f64 - psi_x)).collect();
        let q_total: f64 = lq.iter().map(|(_, l)| l.exp()).sum();
        if q_total <= 0.5 {
            let d = ScalarCgf::derivatives(&self.x, xi);
            let mass = 1.0 - q_total;
            let first: f64 = lq.iter().map(|(k, l)| k * l.exp()).sum();
            let mean = (d.d1 - first) / mass;
            let delta = d.d1 - mean;
            let m2 = d.d2 + delta * delta;
            let m3 = d.d3 + 3.0 * d.d2 * delta + delta.powi(3);
            let (mut a2, mut a3) = (0.0, 0.0);
            for (k, l) in &lq {
                let e = k - mean;
                a2 += l.exp() * e * e;
                a3 += l.exp() * e * e * e;
            }
            return RestStats {
                ln_mass: (-q_total).ln_1p(),
                mean,
                var: ((m2 - a2) / mass).max(0.0),
                third: (m3 - a3) / mass,
            };
        }
        // the atoms dominate, so the rest has a light tail: sum it directly
        let law = self.x.law();
        let kmax_atoms = atoms.iter().map(|a| a.0).max().unwrap_or(0);
        let mut terms: Vec<(f64, f64)> = Vec::new();
        let mut best = f64::NEG_INFINITY;
        let mut k = law.support_min();
        while terms.len() < 1_000_000 {
            if !atoms.iter().any(|a| a.0 == k) {
                let l = law.ln_pmf(k) + xi * k as f64 - psi_x;
                if l.is_finite() {
                    best = best.max(l);
                    terms.push((k as f64, l));
                    if k > kmax_atoms && l < best - 50.0 {
                        break;
                    }
                }
            }
            k += 1;
        }
        let ln_mass = log_sum_exp(terms.iter().map(|t| t.1));
        let w: Vec<f64> = terms.iter().map(|t| (t.1 - ln_mass).exp()).collect();
        let mean: f64 = terms.iter().zip(&w).map(|(t, p)| t.0 * p).sum();
        let (mut var, mut third) = (0.0, 0.0);
        for (t, p) in terms.iter().zip(&w) {
            let e = t.0 - mean;
            var += p * e * e;
            third += p * e * e * e;
        }
        RestStats { ln_mass, mean, var, third }
    }

    /// Solves `∂_ξ ψ(ξ, u) = target` at fixed `u`.
    pub fn solve_xi(&self, u: f64, target: f64) -> Result<f64> {
        Ok(solve_tilt_generic(&Slice { ev: self, fixed: u, axis: 0 }, target)?.tau)
    }

    /// `X` marginal of the `(ξ, u)`-tilted joint law, as a table.
    pub fn tilted_x_marginal(&self, xi: f64, u: f64) -> Result<FiniteTable> {
        self.check(xi, u, true)?;
        match &self.repr {
            Repr::Atoms { x, y, lnp } => {
                let logs: Vec<f64> = x.iter().zip(y).zip(lnp).map(|((a, b), l)| l + xi * a + u * b).collect();
                let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut acc: std::collections::BTreeMap<u64, f64> = Default::default();
                for (a, l) in x.iter().zip(&logs) {
                    *acc.entry(*a as u64).or_default() += (l - max).exp();
                }
                FiniteTable::from_weights(acc.into_iter().collect(), 0.0)
            }
            Repr::Shifted => Ok(tilt_by(self.x.law(), xi + u)?.as_table().unwrap().clone()),
            Repr::Split { atoms, default } => {
                let base = tilt_by(self.x.law(), xi)?;
                let base = base.as_table().unwrap();
                let top = atoms.iter().map(|a| a.1).fold(*default, f64::max);
                let rows = base
                    .rows()
                    .map(|(k, p)| {
                        let yk = atoms.iter().find(|a| a.0 == k).map_or(*default, |a| a.1);
                        (k, p * (u * (yk - top)).exp())
                    })
                    .collect();
                FiniteTable::from_weights(rows, base.deficit())
            }
        }
    }

    /// `ψ*_{X,Y}(x, y) = sup_{ξ,u} [ξx + uy − ψ(ξ, u)]`.
    pub fn conjugate2(&self, x: f64, y: f64) -> Result<Conjugate2Result> {
        let base = Conjugate2Result {
            x,
            y,
            value: f64::INFINITY,
            xi: f64::NAN,
            u: f64::NAN,
            converged: true,
            iterations: 0,
            method: Conjugate2Method::OutsideHull,
        };
        if !(x.is_finite() && y.is_finite()) {
            return Ok(base);
        }
        if let (Repr::Shifted | Repr::Split { .. }, Some((a, b))) = (&self.repr, self.affine) {
            let scale = y.abs().max(a.abs() + (b * x).abs()).max(1.0);
            if (y - (a + b * x)).abs() > 1e-12 * scale {
                return Ok(base);
            }
            let c = self.x.conjugate(x)?;
            let (xi, u) = if c.tau.is_finite() { (c.tau, 0.0) } else { (f64::NAN, f64::NAN) };
            return Ok(Conjugate2Result {
                value: c.value,
                xi,
                u,
                converged: c.converged,
                iterations: c.iterations,
                method: Conjugate2Method::Affine,
                ..base
            });
        }
        match locate(&self.geometry, (x, y)) {
            Location::Outside => Ok(base),
            Location::Boundary(a, b) => self.face_conjugate(x, y, a, b),
            Location::Interior => self.newton(x, y),
        }
    }

    fn face_conjugate(&self, x: f64, y: f64, a: (f64, f64), b: (f64, f64)) -> Result<Conjugate2Result> {
        let tol = self.geometry_tol((x, y));
        let on_line = |p: (f64, f64)| distance_to_line(a, b, p).abs() <= tol;
        let vertical = (b.0 - a.0).abs() <= tol;
        let mut face: Vec<(f64, f64, f64)> = Vec::new();
        let mut ray_on_face = false;
        match &self.repr {
            Repr::Atoms { x: xs, y: ys, lnp } => {
                for i in 0..xs.len() {
                    if on_line((xs[i], ys[i])) {
                        face.push((xs[i], ys[i], lnp[i]));
                    }
                }
            }
            Repr::Split { atoms, default } => {
                for &(k, yk, l) in atoms {
                    if on_line((k as f64, yk)) {
                        face.push((k as f64, yk, l));
                    }
                }
                let horizontal = (b.1 - a.1).abs() <= tol && (a.1 - default).abs() <= tol;
                if horizontal {
                    ray_on_face = true;
                } else if !vertical {
                    // the line meets the rest ray in a single point
                    let t = (default - a.1) / (b.1 - a.1);
                    let kx = a.0 + t * (b.0 - a.0);
                    let k = kx.round();
                    if (kx - k).abs() <= tol && k >= 0.0 {
                        let k = k as u64;
                        let l = self.x.law().ln_pmf(k);
                        if l.is_finite() && !atoms.iter().any(|at| at.0 == k) {
                            face.push((k as f64, *default, l));
                        }
                    }
                } else if let Some(&(k, _)) = self.geometry.points.iter().find(|p| on_line(**p) && p.1 == *default) {
                    let l = self.x.law().ln_pmf(k as u64);
                    face.push((k, *default, l));
                }
            }
            Repr::Shifted => unreachable!("identity marks take the affine path"),
        }
        let result = if ray_on_face {
            let cgf = RayCgf { ev: self };
            conjugate_generic(&cgf, x)?
        } else {
            let atoms = AtomCgf {
                pos: face.iter().map(|f| if vertical { f.1 } else { f.0 }).collect(),
                ln_w: face.iter().map(|f| f.2).collect(),
            };
            if atoms.pos.is_empty() {
                return Ok(Conjugate2Result {
                    x,
                    y,
                    value: f64::INFINITY,
                    xi: f64::NAN,
                    u: f64::NAN,
                    converged: true,
                    iterations: 0,
                    method: Conjugate2Method::Face,
                });
            }
            conjugate_generic(&atoms, if vertical { y } else { x })?
        };
        Ok(Conjugate2Result {
            x,
            y,
            value: result.value,
            xi: f64::NAN,
            u: f64::NAN,
            converged: result.converged,
            iterations: result.iterations,
            method: Conjugate2Method::Face,
        })
    }

    fn geometry_tol(&self, z: (f64, f64)) -> f64 {
        let extent = self
            .geometry
            .points
            .iter()
            .fold(z.0.abs().max(z.1.abs()), |m, p| m.max(p.0.abs()).max(p.1.abs()));
        1e-12 * extent.max(1.0)
    }

    fn newton(&self, x: f64, y: f64) -> Result<Conjugate2Result> {
        let target = [x, y];
        let tol = policy::NEWTON2_RESIDUAL * x.abs().max(y.abs()).max(1.0);
        let domain = self.domain();
        let g = |xi: f64, u: f64| self.value(xi, u) - xi * x - u * y;
        let mut theta = [self.x.solve_tilt(x)?.tau, 0.0];
        let (mut gval, mut d) = self.eval(theta[0], theta[1]);
        gval -= theta[0] * x + theta[1] * y;
        for it in 1..=policy::MAX_ITERATIONS {
            let r = [d.grad[0] - target[0], d.grad[1] - target[1]];
            if r[0].abs().max(r[1].abs()) <= tol {
                return Ok(self.finish(x, y, theta, it, Conjugate2Method::Newton));
            }
            let step = newton_step(&d.hessian, &r);
            let slope = r[0] * step[0] + r[1] * step[1];
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = [theta[0] + alpha * step[0], theta[1] + alpha * step[1]];
                if domain.contains_interior(cand[0], cand[1]) {
                    let gc = g(cand[0], cand[1]);
                    if gc <= gval + 1e-4 * alpha * slope {
                        theta = cand;
                        gval = gc;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
            d = self.eval(theta[0], theta[1]).1;
        }
        self.coordinate_sweeps(x, y, theta)
    }

    /// Alternating exact one-dimensional solves of the two gradient
    /// equations; slower than Newton but immune to a badly conditioned
    /// Hessian.
    fn coordinate_sweeps(&self, x: f64, y: f64, start: [f64; 2]) -> Result<Conjugate2Result> {
        let tol = policy::NEWTON2_RESIDUAL * x.abs().max(y.abs()).max(1.0);
        let mut theta = start;
        if !self.domain().contains_interior(theta[0], theta[1]) {
            theta = [self.x.solve_tilt(x)?.tau, 0.0];
        }
        let mut residual = f64::INFINITY;
        for sweep in 1..=policy::MAX_COORDINATE_SWEEPS {
            theta[0] = solve_tilt_generic(&Slice { ev: self, fixed: theta[1], axis: 0 }, x)?.tau;
            theta[1] = solve_tilt_generic(&Slice { ev: self, fixed: theta[0], axis: 1 }, y)?.tau;
            let d = self.eval(theta[0], theta[1]).1;
            residual = (d.grad[0] - x).abs().max((d.grad[1] - y).abs());
            if residual <= tol {
                return Ok(self.finish(x, y, theta, sweep, Conjugate2Method::CoordinateSweeps));
            }
        }
        Err(Error::NonConvergence {
            iterations: policy::MAX_COORDINATE_SWEEPS,
            residual,
            last: theta.to_vec(),
        })
    }

    fn finish(&self, x: f64, y: f64, theta: [f64; 2], iterations: usize, method: Conjugate2Method) -> Conjugate2Result {
        Conjugate2Result {
            x,
            y,
            value: theta[0] * x + theta[1] * y - self.value(theta[0], theta[1]),
            xi: theta[0],
            u: theta[1],
            converged: true,
            iterations,
            method,
        }
    }
}

/// Second-order central moment accumulator.
#[derive(Default)]
struct Acc {
    xx: f64,
    xy: f64,
    yy: f64,
    xxx: f64,
    xxy: f64,
    xyy: f64,
    yyy: f64,
}

impl Acc {
    fn add(&mut self, w: f64, dx: f64, dy: f64) {
        self.xx += w * dx * dx;
        self.xy += w * dx * dy;
        self.yy += w * dy * dy;
        self.xxx += w * dx * dx * dx;
        self.xxy += w * dx * dx * dy;
        self.xyy += w * dx * dy * dy;
        self.yyy += w * dy * dy * dy;
    }

    fn finish(self, mx: f64, my: f64) -> JointDerivatives {
        JointDerivatives {
            grad: [mx, my],
            hessian: [[self.xx, self.xy], [self.xy, self.yy]],
            third: [self.xxx, self.xxy, self.xyy, self.yyy],
        }
    }
}

/// Solves `H s = −r`, with Levenberg damping when `H` is close to singular.
fn newton_step(h: &[[f64; 2]; 2], r: &[f64; 2]) -> [f64; 2] {
    let (mut a, b, mut c) = (h[0][0], h[0][1], h[1][1]);
    let trace = (a + c).max(f64::MIN_POSITIVE);
    let mut det = a * c - b * b;
    if !(det > 1e-12 * a * c) {
        let mu = 1e-8 * trace;
        a += mu;
        c += mu;
        det = a * c - b * b;
    }
    [-(c * r[0] - b * r[1]) / det, -(a * r[1] - b * r[0]) / det]
}

fn split_repr(x: &LatticeDistribution, mark: &Mark) -> (Repr, Geometry, Option<(f64, f64)>) {
    let (exceptional, default): (Vec<(u64, f64)>, f64) = match mark {
        Mark::IndicatorZero => (vec![(0, 1.0)], 0.0),
        Mark::IndicatorEq(j) => (vec![(*j, 1.0)], 0.0),
        Mark::CustomTable { values, default } => {
            (values.iter().filter(|(_, v)| **v != *default).map(|(&k, &v)| (k, v)).collect(), *default)
        }
        Mark::Identity => unreachable!(),
    };
    let atoms: Vec<(u64, f64, f64)> = exceptional
        .into_iter()
        .map(|(k, y)| (k, y, x.ln_pmf(k)))
        .filter(|a| a.2.is_finite())
        .collect();
    let mut k0 = x.support_min();
    while atoms.iter().any(|a| a.0 == k0) {
        k0 += 1;
    }
    let mut points: Vec<(f64, f64)> = atoms.iter().map(|a| (a.0 as f64, a.1)).collect();
    points.push((k0 as f64, default));
    let affine = atoms.is_empty().then_some((default, 0.0));
    (Repr::Split { atoms, default }, Geometry { points, recession: true }, affine)
}

/// `ψ(·, u)` or `ψ(ξ, ·)` as a scalar CGF.
struct Slice<'a> {
    ev: &'a JointCgfEvaluator,
    fixed: f64,
    axis: usize,
}

impl Slice<'_> {
    fn at(&self, t: f64) -> (f64, f64) {
        if self.axis == 0 { (t, self.fixed) } else { (self.fixed, t) }
    }
}

impl ScalarCgf for Slice<'_> {
    fn domain(&self) -> Domain {
        match self.ev.domain() {
            JointDomain::Plane => Domain::WHOLE_LINE,
            JointDomain::XiBelow { upper } if self.axis == 0 => Domain { upper: Some(upper), upper_included: false },
            JointDomain::XiBelow { .. } => Domain::WHOLE_LINE,
            JointDomain::SumBelow { upper, .. } => Domain { upper: Some(upper - self.fixed), upper_included: false },
        }
    }

    fn range(&self) -> (f64, f64) {
        if self.axis == 0 { self.ev.x.range() } else { self.ev.mark_range() }
    }

    fn value(&self, t: f64) -> f64 {
        let (xi, u) = self.at(t);
        self.ev.value(xi, u)
    }

    fn derivatives(&self, t: f64) -> CgfDerivatives {
        let (xi, u) = self.at(t);
        let d = self.ev.eval(xi, u).1;
        if self.axis == 0 {
            CgfDerivatives { d1: d.grad[0], d2: d.hessian[0][0], d3: d.third[0] }
        } else {
            CgfDerivatives { d1: d.grad[1], d2: d.hessian[1][1], d3: d.third[3] }
        }
    }
}

/// Unnormalized CGF `ξ ↦ log E[e^{ξX}; X in the rest set]`.
struct RayCgf<'a> {
    ev: &'a JointCgfEvaluator,
}

impl ScalarCgf for RayCgf<'_> {
    fn domain(&self) -> Domain {
        self.ev.x.domain()
    }

    fn range(&self) -> (f64, f64) {
        let k0 = self.ev.geometry.points.last().map_or(0.0, |p| p.0);
        (k0, f64::INFINITY)
    }

    fn value(&self, xi: f64) -> f64 {
        let psi = ScalarCgf::value(&self.ev.x, xi);
        psi + self.ev.rest_stats(xi, psi).ln_mass
    }

    fn derivatives(&self, xi: f64) -> CgfDerivatives {
        let psi = ScalarCgf::value(&self.ev.x, xi);
        let r = self.ev.rest_stats(xi, psi);
        CgfDerivatives { d1: r.mean, d2: r.var, d3: r.third }
    }
}

enum Location {
    Outside,
    Interior,
    /// On the edge between the two hull vertices.
    Boundary((f64, f64), (f64, f64)),
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Signed distance of `p` from the directed line `a → b` (positive on the
/// left).
fn distance_to_line(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
    if len == 0.0 {
        return ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt();
    }
    cross(a, b, p) / len
}

/// Counter-clockwise hull by the monotone chain, collinear points dropped.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn locate(geometry: &Geometry, z: (f64, f64)) -> Location {
    let mut pts = geometry.points.clone();
    let extent = pts.iter().fold(z.0.abs().max(z.1.abs()), |m, p| m.max(p.0.abs()).max(p.1.abs())).max(1.0);
    if geometry.recession {
        // conv(P) + cone{(1,0)} agrees with conv(P ∪ (P + T·(1,0))) left of
        // x = min P + T
        let t = 4.0 * extent + 16.0;
        let shifted: Vec<(f64, f64)> = pts.iter().map(|p| (p.0 + t, p.1)).collect();
        pts.extend(shifted);
    }
    let tol = 1e-12 * extent;
    let hull = convex_hull(pts);
    match hull.len() {
        1 => {
            let p = hull[0];
            if (z.0 - p.0).abs() <= tol && (z.1 - p.1).abs() <= tol {
                Location::Boundary(p, p)
            } else {
                Location::Outside
            }
        }
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let d = distance_to_line(a, b, z).abs();
            let along = (z.0 - a.0) * (b.0 - a.0) + (z.1 - a.1) * (b.1 - a.1);
            let len2 = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
            if d <= tol && along >= -tol * len2.sqrt() && along <= len2 + tol * len2.sqrt() {
                Location::Boundary(a, b)
            } else {
                Location::Outside
            }
        }
        n => {
            let mut nearest = (f64::INFINITY, 0);
            for i in 0..n {
                let d = distance_to_line(hull[i], hull[(i + 1) % n], z);
                if d < -tol {
                    return Location::Outside;
                }
                if d < nearest.0 {
                    nearest = (d, i);
                }
            }
            if nearest.0 <= tol {
                Location::Boundary(hull[nearest.1], hull[(nearest.1 + 1) % n])
            } else {
                Location::Interior
            }
        }
    }
}
