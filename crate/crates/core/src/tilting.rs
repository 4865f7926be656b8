//! Exponential changes of measure, returned as materialized tables.
//!
//! * [`tilt_lattice`]: `P(k) ∝ e^{kτ} P(X = k)` with mean `target`.
//! * [`check_pair`]: the same reweighting applied to `(X, Y)` through `X`.
//! * [`hat_tilt`]: the `X` marginal of `(X, Y)` reweighted by `e^{uY}`.
//! * [`mdp_tilt`]: as `hat_tilt` with the mark recentered and rescaled.
//!
//! The closed-form families are closed under tilting (Poisson `λ → λe^τ`,
//! geometric `ρ → ρe^τ`, Borel `λ → λe^τ`), so their tilted tables are cut
//! with the tail bound of the tilted family rather than of the source.

use serde::Serialize;

use crate::cgf::{CgfEvaluator, ScalarCgf};
use crate::error::{Error, Result};
use crate::joint::{JointLaw, JointRow, JointTable, Mark};
use crate::lattice::{FiniteTable, LatticeDistribution, LawKind};
use crate::policy;

/// A solved tilt together with the tilted law.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSolution {
    pub tau: f64,
    pub target: f64,
    pub source: LatticeDistribution,
    pub tilted: LatticeDistribution,
    /// Mean of the tilted table.
    pub achieved_mean: f64,
    /// Mass missing from the tilted table before renormalization.
    pub deficit: f64,
}

/// Tilted joint law `(X̌_ξ, Y̌_ξ)` with its regression summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckedPair {
    pub xi: f64,
    #[serde(skip)]
    pub table: JointTable,
    pub mean_x: f64,
    /// `E[Y̌_ξ]`, the Gibbs point when `ξ` solves the conditioning tilt.
    pub mean_y: f64,
    pub cov: f64,
    pub var_x: f64,
    pub var_y: f64,
    /// Residual variance of the regression of `Y̌` on `X̌`.
    pub alpha2: f64,
}

/// Tilted family in closed form, if the source has one.
fn tilted_family(dist: &LatticeDistribution, tau: f64) -> Result<Option<LatticeDistribution>> {
    Ok(match dist.kind() {
        LawKind::Table(_) => None,
        LawKind::Poisson { lambda } => Some(LatticeDistribution::poisson(lambda * tau.exp())?),
        LawKind::Geometric { rho } => Some(LatticeDistribution::geometric(rho * tau.exp())?),
        LawKind::Borel { lambda } => Some(LatticeDistribution::borel(lambda * tau.exp())?),
    })
}

fn domain_check(ev: &CgfEvaluator, tau: f64) -> Result<()> {
    let d = ev.domain();
    if d.contains_interior(tau) {
        Ok(())
    } else {
        Err(Error::DomainViolation { value: tau, upper: d.upper.unwrap_or(f64::INFINITY) })
    }
}

/// Rows `(k, ln p_k + kτ − ψ(τ))` of the `τ`-tilted law, and the mass known
/// to be missing from them.
fn tilted_log_rows(dist: &LatticeDistribution, tau: f64) -> Result<(Vec<(u64, f64)>, f64)> {
    let ev = CgfEvaluator::new(dist);
    domain_check(&ev, tau)?;
    let psi = ScalarCgf::value(&ev, tau);
    match tilted_family(dist, tau)? {
        None => {
            let t = dist.as_table().unwrap();
            let rows = t.rows().map(|(k, p)| (k, p.ln() + k as f64 * tau - psi)).collect();
            Ok((rows, t.deficit()))
        }
        Some(family) => {
            let k_max = family.tail_cutoff(policy::DEFAULT_TRUNCATION)?;
            let rows = (dist.support_min()..=k_max)
                .map(|k| (k, dist.ln_pmf(k) + k as f64 * tau - psi))
                .collect();
            Ok((rows, policy::DEFAULT_TRUNCATION))
        }
    }
}

/// The law tilted by a given `τ`, as a table.
pub fn tilt_by(dist: &LatticeDistribution, tau: f64) -> Result<LatticeDistribution> {
    let (rows, deficit) = tilted_log_rows(dist, tau)?;
    let rows = rows.into_iter().map(|(k, l)| (k, l.exp())).collect();
    Ok(LatticeDistribution::from_table(FiniteTable::from_weights(rows, deficit)?))
}

/// Tilts `dist` to mean `target`.
pub fn tilt_lattice(dist: &LatticeDistribution, target: f64) -> Result<TiltSolution> {
    let root = CgfEvaluator::new(dist).solve_tilt(target)?;
    let tilted = tilt_by(dist, root.tau)?;
    let t = tilted.as_table().unwrap();
    let achieved_mean = t.rows().map(|(k, p)| k as f64 * p).sum();
    Ok(TiltSolution {
        tau: root.tau,
        target,
        source: dist.clone(),
        deficit: t.deficit(),
        tilted,
        achieved_mean,
    })
}

/// `P(X̌ = k, Y̌ ∈ A) = e^{kξ − ψ_X(ξ)} P(X = k, Y ∈ A)`.
pub fn check_pair(joint: &JointLaw, xi: f64) -> Result<CheckedPair> {
    let table = match joint {
        JointLaw::Marked { x, mark } if x.as_table().is_none() => {
            let (rows, deficit) = tilted_log_rows(x, xi)?;
            let rows = rows
                .into_iter()
                .map(|(k, l)| JointRow { k, y: mark.apply(k), p: l.exp() })
                .collect();
            JointTable::from_weights(rows, deficit)?
        }
        _ => {
            let src = joint.materialize(policy::DEFAULT_TRUNCATION)?;
            let xm = src.x_marginal()?;
            let ev = CgfEvaluator::new(&xm);
            domain_check(&ev, xi)?;
            let psi = ScalarCgf::value(&ev, xi);
            let rows = src
                .rows()
                .iter()
                .map(|r| JointRow { p: (r.p.ln() + r.k as f64 * xi - psi).exp(), ..*r })
                .collect();
            JointTable::from_weights(rows, src.deficit())?
        }
    };
    Ok(summarize(xi, table))
}

fn summarize(xi: f64, table: JointTable) -> CheckedPair {
    let rows = table.rows();
    let mean_x: f64 = rows.iter().map(|r| r.p * r.k as f64).sum();
    let mean_y: f64 = rows.iter().map(|r| r.p * r.y).sum();
    let (mut var_x, mut var_y, mut cov) = (0.0, 0.0, 0.0);
    for r in rows {
        let (dx, dy) = (r.k as f64 - mean_x, r.y - mean_y);
        var_x += r.p * dx * dx;
        var_y += r.p * dy * dy;
        cov += r.p * dx * dy;
    }
    // Var(Y − βX) avoids the cancellation in var_y − cov²/var_x
    let beta = if var_x > 0.0 { cov / var_x } else { 0.0 };
    let alpha2 = rows
        .iter()
        .map(|r| {
            let e = (r.y - mean_y) - beta * (r.k as f64 - mean_x);
            r.p * e * e
        })
        .sum();
    CheckedPair { xi, table, mean_x, mean_y, cov, var_x, var_y, alpha2 }
}

/// Upper end of `dom ψ_Y`, if finite.
fn mark_domain_check(joint: &JointLaw, u: f64) -> Result<()> {
    match joint.mark_domain_upper() {
        Some(upper) if !(u < upper) => Err(Error::DomainViolation { value: u, upper }),
        _ => Ok(()),
    }
}

/// `P(X̂_u = k) = e^{−ψ_Y(u)} E[e^{uY}; X = k]`.
pub fn hat_tilt(joint: &JointLaw, u: f64) -> Result<LatticeDistribution> {
    reweight_by_mark(joint, u, 0.0)
}

/// `P(X = k)` reweighted by `e^{(u/scale)(Y − centering)}`, normalized.
pub fn mdp_tilt(joint: &JointLaw, u: f64, centering: f64, scale: f64) -> Result<LatticeDistribution> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidConfig(format!("mdp scale {scale} must be positive")));
    }
    reweight_by_mark(joint, u / scale, centering)
}

fn reweight_by_mark(joint: &JointLaw, u: f64, centering: f64) -> Result<LatticeDistribution> {
    if !u.is_finite() {
        return Err(Error::DomainViolation { value: u, upper: f64::INFINITY });
    }
    mark_domain_check(joint, u)?;
    if let JointLaw::Marked { x, mark: Mark::Identity } = joint {
        if x.as_table().is_none() {
            return tilt_by(x, u);
        }
    }
    let t = joint.materialize(policy::DEFAULT_TRUNCATION)?;
    let logs: Vec<(u64, f64)> = t.rows().iter().map(|r| (r.k, r.p.ln() + u * (r.y - centering))).collect();
    let max = logs.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    let mut acc: std::collections::BTreeMap<u64, f64> = Default::default();
    for (k, l) in logs {
        *acc.entry(k).or_default() += (l - max).exp();
    }
    Ok(LatticeDistribution::from_table(FiniteTable::from_weights(acc.into_iter().collect(), t.deficit())?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn occupancy(lambda: f64) -> JointLaw {
        JointLaw::marked(LatticeDistribution::poisson(lambda).unwrap(), Mark::IndicatorZero)
    }

    #[test]
    fn poisson_tilts_to_poisson() {
        let s = tilt_lattice(&LatticeDistribution::poisson(1.0).unwrap(), 3.0).unwrap();
        assert!((s.tau - 3f64.ln()).abs() < 1e-11);
        assert!((s.achieved_mean - 3.0).abs() < 1e-10);
        let oracle = LatticeDistribution::poisson(3.0).unwrap();
        for (k, p) in s.tilted.as_table().unwrap().rows() {
            assert!((p - oracle.pmf(k)).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn bernoulli_tilt() {
        let b = LatticeDistribution::table(vec![(0, 0.5), (1, 0.5)]).unwrap();
        let s = tilt_lattice(&b, 0.75).unwrap();
        let t = s.tilted.as_table().unwrap();
        assert!((t.pmf(0) - 0.25).abs() < 1e-12 && (t.pmf(1) - 0.75).abs() < 1e-12);
        let same = tilt_lattice(&b, 0.5).unwrap();
        assert_eq!(same.tau, 0.0);
        assert_eq!(same.tilted, b);
    }

    #[test]
    fn occupancy_pair_moments() {
        let lambda = 1.0;
        for &tau in &[0.0, 3f64.ln(), 0.4f64.ln()] {
            let c = check_pair(&occupancy(lambda), tau).unwrap();
            let m = lambda * f64::exp(tau);
            assert!((c.mean_y - (-m).exp()).abs() < 1e-13);
            assert!((c.cov - (-m * (-m).exp())).abs() < 1e-13);
            assert!((c.var_y - (-m).exp() * (1.0 - (-m).exp())).abs() < 1e-13);
            assert!((c.mean_x - m).abs() < 1e-12);
        }
        let c = check_pair(&occupancy(1.0), 0.0).unwrap();
        let alpha = (-1.0f64).exp() * (1.0 - 2.0 * (-1.0f64).exp());
        assert!((c.alpha2 - alpha).abs() < 1e-14);
    }

    #[test]
    fn zero_pair_tilt_is_identity() {
        let law = occupancy(1.0);
        let src = law.materialize(policy::DEFAULT_TRUNCATION).unwrap();
        let c = check_pair(&JointLaw::Table(src.clone()), 0.0).unwrap();
        for (a, b) in c.table.rows().iter().zip(src.rows()) {
            assert!((a.p - b.p).abs() <= 1e-15 && a.k == b.k && a.y == b.y);
        }
    }

    #[test]
    fn hat_tilt_occupancy_formula() {
        let lambda = 1.3;
        for &u in &[-2.0, 0.0, 0.7, 3.0] {
            let h = hat_tilt(&occupancy(lambda), u).unwrap();
            let t = h.as_table().unwrap();
            let psi_y = ((-lambda).exp() * f64::exp(u) + 1.0 - (-lambda).exp()).ln();
            let p0 = (-psi_y + u - lambda).exp();
            assert!((t.pmf(0) - p0).abs() < 1e-14);
            for k in 1..10 {
                let pk = (-psi_y).exp() * crate::special::poisson_ln_pmf(lambda, k).exp();
                assert!((t.pmf(k) - pk).abs() < 1e-14);
            }
            assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let zero = hat_tilt(&occupancy(1.0), 0.0).unwrap();
        let marginal = LatticeDistribution::poisson(1.0).unwrap();
        for (k, p) in zero.as_table().unwrap().rows() {
            assert!((p - marginal.pmf(k)).abs() <= 1e-15 * marginal.pmf(k).max(1e-300));
        }
    }

    #[test]
    fn hat_tilt_identity_mark_is_plain_tilt() {
        let x = LatticeDistribution::geometric(0.5).unwrap();
        let joint = JointLaw::marked(x.clone(), Mark::Identity);
        let a = hat_tilt(&joint, 0.2).unwrap();
        let b = tilt_by(&x, 0.2).unwrap();
        assert_eq!(a, b);
        assert!(matches!(hat_tilt(&joint, 1.0), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn mdp_tilt_reduces_and_matches_reweighting() {
        let law = occupancy(1.0);
        assert_eq!(mdp_tilt(&law, 0.8, 0.0, 1.0).unwrap(), hat_tilt(&law, 0.8).unwrap());
        let (c, n, a_n) = ((-1.0f64).exp(), 100.0, 0.1);
        let scale = (n * a_n * 1.0f64).sqrt();
        let got = mdp_tilt(&law, 1.0, c, scale).unwrap();
        // independent direct reweighting of the joint table
        let t = law.materialize(policy::DEFAULT_TRUNCATION).unwrap();
        let w: Vec<(u64, f64)> = t.rows().iter().map(|r| (r.k, r.p * ((r.y - c) / scale).exp())).collect();
        let z: f64 = w.iter().map(|v| v.1).sum();
        for (k, p) in w {
            assert!((got.pmf(k) - p / z).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_variance_vanishes_for_identity_mark() {
        let x = LatticeDistribution::table(vec![(0, 0.2), (1, 0.5), (4, 0.3)]).unwrap();
        let c = check_pair(&JointLaw::marked(x, Mark::Identity), 0.3).unwrap();
        assert!(c.alpha2 <= 1e-12);
    }
}
