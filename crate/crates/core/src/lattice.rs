//! Discrete laws on the non-negative integers.
//!
//! A [`LatticeDistribution`] is either a finite probability table or one of
//! three closed-form families (Poisson, geometric, Borel). Closed forms are
//! turned into tables by [`LatticeDistribution::materialize`], which certifies
//! the omitted tail mass with an analytic bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy;
use crate::special::{gcd, ln_factorial, tree_function};

/// Span `m` and offset `b`: every support point is `≡ b (mod m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub m: u64,
    pub b: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub abs_central_third: f64,
}

/// Finite probability table with strictly increasing support.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTable {
    support: Vec<u64>,
    probs: Vec<f64>,
    /// Mass omitted before renormalization (tail truncation plus dropped
    /// sub-floor probabilities).
    deficit: f64,
    renormalized: bool,
}

impl FiniteTable {
    /// Validates a user table: probabilities non-negative, keys strictly
    /// increasing, mass within [`policy::MASS_TOLERANCE`] of one.
    pub fn new(rows: Vec<(u64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidLaw("empty table".into()));
        }
        for w in rows.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidLaw(format!(
                    "support keys must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        let mut total = 0.0;
        for &(k, p) in &rows {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidLaw(format!("probability {p} at k={k}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > policy::MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!("total mass {total} is not 1")));
        }
        Self::from_weights(rows, 0.0)
    }

    /// Builds a table from unnormalized non-negative weights, dropping entries
    /// below the probability floor and renormalizing. `deficit` is the mass
    /// already known to be missing from `rows`.
    pub(crate) fn from_weights(rows: Vec<(u64, f64)>, deficit: f64) -> Result<Self> {
        let total: f64 = rows.iter().map(|r| r.1).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidLaw(format!("table mass {total}")));
        }
        let mut support = Vec::with_capacity(rows.len());
        let mut probs = Vec::with_capacity(rows.len());
        let mut dropped = 0.0;
        for (k, w) in rows {
            let p = w / total;
            if p < policy::PROBABILITY_FLOOR {
                dropped += p;
                continue;
            }
            support.push(k);
            probs.push(p);
        }
        if support.is_empty() {
            return Err(Error::InvalidLaw("no mass above the probability floor".into()));
        }
        let kept: f64 = probs.iter().sum();
        let renormalized = total != 1.0 || dropped > 0.0 || deficit > 0.0;
        for p in probs.iter_mut() {
            *p /= kept;
        }
        Ok(FiniteTable {
            support,
            probs,
            deficit: (deficit + dropped).max(0.0),
            renormalized,
        })
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn rows(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match self.support.binary_search(&k) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }
}

/// Closed-form family or finite table.
#[derive(Debug, Clone, PartialEq)]
pub enum LawKind {
    Table(FiniteTable),
    Poisson { lambda: f64 },
    Geometric { rho: f64 },
    Borel { lambda: f64 },
}

/// A probability law on `{0, 1, 2, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    kind: LawKind,
}

impl LatticeDistribution {
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidLaw(format!("poisson λ = {lambda} must be positive")));
        }
        Ok(Self { kind: LawKind::Poisson { lambda } })
    }

    /// `P(k) = (1 − ρ) ρ^k`, `k ≥ 0`.
    pub fn geometric(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidLaw(format!("geometric ρ = {rho} must lie in (0, 1)")));
        }
        Ok(Self { kind: LawKind::Geometric { rho } })
    }

    /// `P(l) = l^{l−1} λ^l / (l! T(λ))`, `l ≥ 1`, with `T` the tree function.
    pub fn borel(lambda: f64) -> Result<Self> {
        let edge = (-1.0f64).exp();
        if !(lambda > 0.0 && lambda <= edge) {
            return Err(Error::InvalidLaw(format!("borel λ = {lambda} must lie in (0, 1/e]")));
        }
        Ok(Self { kind: LawKind::Borel { lambda } })
    }

    pub fn table(rows: Vec<(u64, f64)>) -> Result<Self> {
        Ok(Self { kind: LawKind::Table(FiniteTable::new(rows)?) })
    }

    pub fn from_table(table: FiniteTable) -> Self {
        Self { kind: LawKind::Table(table) }
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn as_table(&self) -> Option<&FiniteTable> {
        match &self.kind {
            LawKind::Table(t) => Some(t),
            _ => None,
        }
    }

    pub fn support_min(&self) -> u64 {
        match &self.kind {
            LawKind::Table(t) => t.support[0],
            LawKind::Poisson { .. } | LawKind::Geometric { .. } => 0,
            LawKind::Borel { .. } => 1,
        }
    }

    /// `None` when the support is unbounded.
    pub fn support_max(&self) -> Option<u64> {
        match &self.kind {
            LawKind::Table(t) => t.support.last().copied(),
            _ => None,
        }
    }

    /// One-point supports are representable but rejected by tilting,
    /// conjugates and local limits.
    pub fn is_degenerate(&self) -> bool {
        matches!(&self.kind, LawKind::Table(t) if t.len() == 1)
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        match &self.kind {
            LawKind::Table(t) => t.pmf(k).ln(),
            LawKind::Poisson { lambda } => crate::special::poisson_ln_pmf(*lambda, k),
            LawKind::Geometric { rho } => (1.0 - rho).ln() + k as f64 * rho.ln(),
            LawKind::Borel { lambda } => borel_ln_pmf(*lambda, tree_function(*lambda), k),
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match &self.kind {
            LawKind::Table(t) => t.pmf(k),
            _ => self.ln_pmf(k).exp(),
        }
    }

    pub fn span(&self) -> Result<Span> {
        match &self.kind {
            LawKind::Table(t) => {
                let k0 = t.support[0];
                let m = t.support[1..].iter().fold(0, |g, &k| gcd(g, k - k0));
                if m == 0 {
                    return Err(Error::DegenerateDistribution(k0));
                }
                Ok(Span { m, b: k0 % m })
            }
            _ => Ok(Span { m: 1, b: 0 }),
        }
    }

    pub fn moments(&self) -> Result<Moments> {
        let (mean, variance) = match &self.kind {
            LawKind::Table(t) => {
                let mean: f64 = t.rows().map(|(k, p)| k as f64 * p).sum();
                let var: f64 = t.rows().map(|(k, p)| (k as f64 - mean).powi(2) * p).sum();
                (mean, var)
            }
            LawKind::Poisson { lambda } => (*lambda, *lambda),
            LawKind::Geometric { rho } => (rho / (1.0 - rho), rho / (1.0 - rho).powi(2)),
            LawKind::Borel { lambda } => {
                let t = tree_function(*lambda);
                if t >= 1.0 {
                    (f64::INFINITY, f64::INFINITY)
                } else {
                    (1.0 / (1.0 - t), t / (1.0 - t).powi(3))
                }
            }
        };
        let abs_central_third = if !mean.is_finite() {
            f64::INFINITY
        } else {
            let table = self.materialize(policy::DEFAULT_TRUNCATION)?;
            table.rows().map(|(k, p)| (k as f64 - mean).abs().powi(3) * p).sum()
        };
        Ok(Moments { mean, variance, abs_central_third })
    }

    /// `E[e^{itZ}]`.
    pub fn charfn(&self, t: f64) -> Complex64 {
        let eit = Complex64::from_polar(1.0, t);
        match &self.kind {
            LawKind::Table(tab) => tab
                .rows()
                .map(|(k, p)| p * Complex64::from_polar(1.0, t * k as f64))
                .sum(),
            LawKind::Poisson { lambda } => ((eit - 1.0) * *lambda).exp(),
            LawKind::Geometric { rho } => Complex64::new(1.0 - rho, 0.0) / (1.0 - eit * *rho),
            LawKind::Borel { lambda } => {
                let tl = tree_function(*lambda);
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 1u64.. {
                    let lp = borel_ln_pmf(*lambda, tl, l);
                    if lp < -745.0 && l > 2 {
                        break;
                    }
                    acc += lp.exp() * Complex64::from_polar(1.0, t * l as f64);
                    if l > 10_000_000 {
                        break;
                    }
                }
                acc
            }
        }
    }

    /// Smallest `K` such that the certified tail bound `P(Z ≥ K)` is at most
    /// `eps`. Finite tables return one past their largest support point.
    pub fn tail_cutoff(&self, eps: f64) -> Result<u64> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::TruncationInfeasible { eps, reason: "eps must lie in (0, 1)".into() });
        }
        let ln_eps = eps.ln();
        match &self.kind {
            LawKind::Table(t) => Ok(t.support.last().unwrap() + 1),
            LawKind::Poisson { lambda } => {
                // Chernoff: P(Z ≥ K) ≤ e^{−λ} (eλ/K)^K for K > λ.
                let bound = |k: f64| -lambda + k * (1.0 + lambda.ln() - k.ln());
                let mut lo = lambda.floor() as u64 + 1;
                if bound(lo as f64) <= ln_eps {
                    return Ok(lo);
                }
                let mut hi = lo.max(1) * 2;
                while bound(hi as f64) > ln_eps {
                    lo = hi;
                    hi *= 2;
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if bound(mid as f64) <= ln_eps {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok(hi)
            }
            LawKind::Geometric { rho } => Ok((ln_eps / rho.ln()).ceil().max(1.0) as u64),
            LawKind::Borel { lambda } => {
                let ratio = lambda * std::f64::consts::E;
                if ratio >= 1.0 - 1e-12 {
                    return Err(Error::TruncationInfeasible {
                        eps,
                        reason: format!("borel λ = {lambda} has no geometric tail bound"),
                    });
                }
                // p_{l+1}/p_l ≤ λe, so P(Z ≥ K) ≤ p_K / (1 − λe).
                let tl = tree_function(*lambda);
                let shift = -(1.0 - ratio).ln();
                let mut k = 1u64;
                while borel_ln_pmf(*lambda, tl, k) + shift > ln_eps {
                    k += 1;
                    if k > 100_000_000 {
                        return Err(Error::TruncationInfeasible { eps, reason: "tail too heavy".into() });
                    }
                }
                Ok(k)
            }
        }
    }

    /// Finite table with certified omitted tail mass at most `eps`, rows
    /// `min..=K` where `K` is [`tail_cutoff`](Self::tail_cutoff). Tables are
    /// returned unchanged.
    pub fn materialize(&self, eps: f64) -> Result<FiniteTable> {
        if let LawKind::Table(t) = &self.kind {
            return Ok(t.clone());
        }
        let cutoff = self.tail_cutoff(eps)?;
        let lo = self.support_min();
        let rows: Vec<(u64, f64)> = match &self.kind {
            LawKind::Borel { lambda } => {
                let tl = tree_function(*lambda);
                (lo..=cutoff).map(|k| (k, borel_ln_pmf(*lambda, tl, k).exp())).collect()
            }
            _ => (lo..=cutoff).map(|k| (k, self.ln_pmf(k).exp())).collect(),
        };
        let kept: f64 = rows.iter().map(|r| r.1).sum();
        FiniteTable::from_weights(rows, (1.0 - kept).max(0.0))
    }

    /// [`materialize`](Self::materialize) wrapped back into a distribution.
    pub fn to_table(&self, eps: f64) -> Result<LatticeDistribution> {
        Ok(Self::from_table(self.materialize(eps)?))
    }
}

fn borel_ln_pmf(lambda: f64, tree: f64, l: u64) -> f64 {
    if l == 0 {
        return f64::NEG_INFINITY;
    }
    let lf = l as f64;
    (lf - 1.0) * lf.ln() + lf * lambda.ln() - ln_factorial(l) - tree.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spans() {
        let pois = LatticeDistribution::poisson(1.0).unwrap();
        assert_eq!(pois.span().unwrap(), Span { m: 1, b: 0 });
        let even = LatticeDistribution::table(vec![(0, 0.2), (2, 0.3), (4, 0.5)]).unwrap();
        assert_eq!(even.span().unwrap(), Span { m: 2, b: 0 });
        let odd = LatticeDistribution::table(vec![(1, 0.5), (3, 0.5)]).unwrap();
        assert_eq!(odd.span().unwrap(), Span { m: 2, b: 1 });
        let point = LatticeDistribution::table(vec![(3, 1.0)]).unwrap();
        assert!(point.is_degenerate());
        assert_eq!(point.span(), Err(Error::DegenerateDistribution(3)));
    }

    #[test]
    fn span_ignores_zero_rows() {
        let t = LatticeDistribution::table(vec![(0, 0.5), (1, 0.0), (2, 0.5)]).unwrap();
        assert_eq!(t.span().unwrap().m, 2);
    }

    #[test]
    fn table_validation() {
        assert!(LatticeDistribution::table(vec![(1, 0.5), (0, 0.5)]).is_err());
        assert!(LatticeDistribution::table(vec![(0, 0.5), (0, 0.5)]).is_err());
        assert!(LatticeDistribution::table(vec![(0, 0.5), (1, 0.4)]).is_err());
        assert!(LatticeDistribution::table(vec![(0, -0.1), (1, 1.1)]).is_err());
        assert!(LatticeDistribution::table(vec![]).is_err());
        assert!(LatticeDistribution::poisson(0.0).is_err());
        assert!(LatticeDistribution::geometric(1.0).is_err());
        assert!(LatticeDistribution::borel(0.5).is_err());
        assert!(LatticeDistribution::borel((-1.0f64).exp()).is_ok());
    }

    #[test]
    fn moments_of_simple_laws() {
        let m = LatticeDistribution::poisson(1.0).unwrap().moments().unwrap();
        assert!((m.mean - 1.0).abs() < 1e-15 && (m.variance - 1.0).abs() < 1e-15);
        let m = LatticeDistribution::table(vec![(0, 0.5), (2, 0.5)]).unwrap().moments().unwrap();
        assert_eq!((m.mean, m.variance, m.abs_central_third), (1.0, 1.0, 1.0));
    }

    #[test]
    fn geometric_mean_matches_truncated_sum() {
        for &rho in &[0.1, 0.5, 0.9] {
            let g = LatticeDistribution::geometric(rho).unwrap();
            let m = g.moments().unwrap();
            let table = g.materialize(1e-300).unwrap();
            let sum: f64 = table.rows().map(|(k, p)| k as f64 * p).sum();
            assert!((m.mean - rho / (1.0 - rho)).abs() < 1e-14);
            assert!((m.mean - sum).abs() < 1e-12 * m.mean.max(1.0), "ρ={rho}");
            let var: f64 = table.rows().map(|(k, p)| (k as f64 - sum).powi(2) * p).sum();
            assert!((m.variance - var).abs() < 1e-11 * m.variance);
        }
    }

    #[test]
    fn borel_moments_match_truncated_sum() {
        let b = LatticeDistribution::borel(0.2).unwrap();
        let m = b.moments().unwrap();
        let table = b.materialize(1e-300).unwrap();
        let mean: f64 = table.rows().map(|(k, p)| k as f64 * p).sum();
        let var: f64 = table.rows().map(|(k, p)| (k as f64 - mean).powi(2) * p).sum();
        assert!((m.mean - mean).abs() < 1e-12);
        assert!((m.variance - var).abs() < 1e-11);
        let total: f64 = (1..200).map(|k| b.pmf(k)).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn charfn_examples() {
        let laws = [
            LatticeDistribution::poisson(2.5).unwrap(),
            LatticeDistribution::geometric(0.3).unwrap(),
            LatticeDistribution::borel(0.25).unwrap(),
            LatticeDistribution::table(vec![(0, 0.25), (3, 0.75)]).unwrap(),
        ];
        for law in &laws {
            let c = law.charfn(0.0);
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
        let bern = LatticeDistribution::table(vec![(0, 0.5), (1, 0.5)]).unwrap();
        assert!(bern.charfn(PI).norm() < 1e-15);
    }

    #[test]
    fn closed_form_charfn_matches_truncated_sum() {
        for law in [
            LatticeDistribution::poisson(3.0).unwrap(),
            LatticeDistribution::geometric(0.6).unwrap(),
        ] {
            let table = law.to_table(1e-300).unwrap();
            for i in 0..20 {
                let t = -3.0 + 0.31 * i as f64;
                assert!((law.charfn(t) - table.charfn(t)).norm() < 1e-12, "{law:?} t={t}");
            }
        }
    }

    #[test]
    fn poisson_materialization_bound() {
        let p = LatticeDistribution::poisson(1.0).unwrap();
        let t = p.materialize(1e-12).unwrap();
        let raw: f64 = (0..=*t.support().last().unwrap()).map(|k| p.pmf(k)).sum();
        assert!(raw >= 1.0 - 1e-12);
        assert!(t.deficit() <= 1e-12);
        assert_eq!(t.support()[0], 0);
    }

    #[test]
    fn geometric_materialization_rows() {
        let g = LatticeDistribution::geometric(0.5).unwrap();
        let t = g.materialize(1e-10).unwrap();
        let expected = (1e10f64).log2().ceil() as usize + 1;
        assert_eq!(t.len(), expected);
        assert!(t.deficit() <= 1e-10);
    }

    #[test]
    fn borel_at_edge_cannot_be_truncated() {
        let b = LatticeDistribution::borel((-1.0f64).exp()).unwrap();
        assert!(matches!(b.materialize(1e-10), Err(Error::TruncationInfeasible { .. })));
    }

    #[test]
    fn table_materializes_to_itself() {
        let t = LatticeDistribution::table(vec![(1, 0.5), (4, 0.5)]).unwrap();
        assert_eq!(&t.materialize(1e-3).unwrap(), t.as_table().unwrap());
    }
}
