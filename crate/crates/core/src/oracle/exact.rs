//! Exact conditional law of `T = Σ Y_i` given `S = Σ X_i = k` by dynamic
//! programming over `(partial X sum, partial rescaled Y sum)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::joint::{ConditioningSpec, JointLaw};
use crate::special::{lcm, ln_binomial, log_sum_exp, rational_approx};

/// Largest mark denominator tried when putting marks on a rational grid.
const MAX_MARK_DENOMINATOR: u64 = 1_000_000;

/// Atoms `(x, y, p)` with `x ≤ k`. Larger values of `X` cannot occur on
/// `{S = k}`, so nothing is truncated.
pub(crate) fn conditioning_atoms(joint: &JointLaw, k: u64) -> Vec<(u64, f64, f64)> {
    match joint {
        JointLaw::Table(t) => t.rows().iter().filter(|r| r.k <= k && r.p > 0.0).map(|r| (r.k, r.y, r.p)).collect(),
        JointLaw::Marked { x, mark } => {
            let hi = x.support_max().map_or(k, |m| m.min(k));
            (x.support_min()..=hi)
                .filter_map(|j| {
                    let p = x.pmf(j);
                    (p > 0.0).then(|| (j, mark.apply(j), p))
                })
                .collect()
        }
    }
}

/// Marks written as `offset + z/scale` with integer `z ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkGrid {
    pub offset: f64,
    pub scale: u64,
}

impl MarkGrid {
    pub fn fit(values: &[f64]) -> Result<(Self, Vec<u64>)> {
        let offset = values.iter().copied().fold(f64::INFINITY, f64::min);
        if !offset.is_finite() {
            return Err(Error::InvalidLaw("no mark values".into()));
        }
        let mut scale = 1u64;
        let mut fracs = Vec::with_capacity(values.len());
        for &v in values {
            let d = v - offset;
            let (num, den) = rational_approx(d, MAX_MARK_DENOMINATOR)
                .filter(|&(n, q)| (d - n as f64 / q as f64).abs() <= 4.0 * f64::EPSILON * d.abs().max(1.0))
                .ok_or_else(|| Error::IrrationalMarks(format!("mark {v} has no denominator ≤ {MAX_MARK_DENOMINATOR}")))?;
            scale = lcm(scale, den);
            if scale > MAX_MARK_DENOMINATOR {
                return Err(Error::IrrationalMarks(format!("common denominator exceeds {MAX_MARK_DENOMINATOR}")));
            }
            fracs.push((num, den));
        }
        let z = fracs.iter().map(|&(n, q)| n as u64 * (scale / q)).collect();
        Ok((MarkGrid { offset, scale }, z))
    }

    pub fn value(&self, n_terms: u64, z: u64) -> f64 {
        n_terms as f64 * self.offset + z as f64 / self.scale as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpEngine {
    /// Marks take at most two values: convolution powers of each class.
    TwoClass,
    Dense,
}

/// `L(T | S = k)` on the lattice `n_terms·offset + z/scale`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalLawExact {
    pub spec: ConditioningSpec,
    pub grid: MarkGrid,
    /// Rescaled sums `z` with positive conditional probability, increasing.
    pub z: Vec<u64>,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    pub ln_probs: Vec<f64>,
    /// `ln P(S = k)`.
    pub ln_event_prob: f64,
    pub engine: DpEngine,
}

pub fn exact_conditional_law(joint: &JointLaw, spec: &ConditioningSpec) -> Result<ConditionalLawExact> {
    exact_conditional_law_with_budget(joint, spec, crate::policy::DEFAULT_STATE_BUDGET)
}

pub fn exact_conditional_law_with_budget(joint: &JointLaw, spec: &ConditioningSpec, budget: usize) -> Result<ConditionalLawExact> {
    solve(joint, spec, budget, false)
}

fn solve(joint: &JointLaw, spec: &ConditioningSpec, budget: usize, force_dense: bool) -> Result<ConditionalLawExact> {
    let (n, k) = (spec.n_terms(), spec.k());
    let atoms = conditioning_atoms(joint, k);
    if atoms.is_empty() {
        return Err(Error::ZeroProbabilityEvent { k, n_terms: n });
    }
    let ys: Vec<f64> = atoms.iter().map(|a| a.1).collect();
    let (grid, zs) = MarkGrid::fit(&ys)?;
    let mut classes: Vec<u64> = zs.clone();
    classes.sort_unstable();
    classes.dedup();

    let (engine, unnormalized) = if classes.len() <= 2 && !force_dense {
        let needed = 2 * (n as usize + 1) * (k as usize + 1);
        if needed > budget {
            return Err(Error::StateBudgetExceeded { needed, budget });
        }
        (DpEngine::TwoClass, two_class(&atoms, &zs, &classes, n, k))
    } else {
        let zmax = *classes.last().unwrap();
        let needed = (k as usize + 1).saturating_mul((n * zmax) as usize + 1);
        if needed > budget {
            return Err(Error::StateBudgetExceeded { needed, budget });
        }
        (DpEngine::Dense, dense(&atoms, &zs, n, k, zmax))
    };
    let kept: Vec<(u64, f64)> = unnormalized.into_iter().filter(|&(_, l)| l > f64::NEG_INFINITY).collect();
    if kept.is_empty() {
        return Err(Error::ZeroProbabilityEvent { k, n_terms: n });
    }
    let ln_event_prob = log_sum_exp(kept.iter().map(|&(_, l)| l));
    let ln_probs: Vec<f64> = kept.iter().map(|&(_, l)| l - ln_event_prob).collect();
    Ok(ConditionalLawExact {
        spec: *spec,
        grid,
        z: kept.iter().map(|&(z, _)| z).collect(),
        values: kept.iter().map(|&(z, _)| grid.value(n, z)).collect(),
        probs: ln_probs.iter().map(|l| l.exp()).collect(),
        ln_probs,
        ln_event_prob,
        engine,
    })
}

/// Convolution powers `m = 0..=n` of a sub-probability on `0..=k`, each row
/// rescaled to unit maximum. Returns rows and their log scales.
fn powers(atoms: &[(usize, f64)], n: usize, k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::with_capacity(n + 1);
    let mut scales = Vec::with_capacity(n + 1);
    let mut cur = vec![0.0; k + 1];
    cur[0] = 1.0;
    let mut ln_scale = 0.0;
    rows.push(cur.clone());
    scales.push(0.0);
    for _ in 0..n {
        let mut next = vec![0.0; k + 1];
        for (s, &v) in cur.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for &(x, p) in atoms {
                if s + x > k {
                    break;
                }
                next[s + x] += v * p;
            }
        }
        let max = next.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            next.iter_mut().for_each(|v| *v /= max);
            ln_scale += max.ln();
        } else {
            ln_scale = f64::NEG_INFINITY;
        }
        rows.push(next.clone());
        scales.push(ln_scale);
        cur = next;
    }
    (rows, scales)
}

/// With marks `a < b`, `P(T = (n−m)a + mb, S = k) = C(n,m) Σ_s A^{*(n−m)}(s) B^{*m}(k−s)`.
fn two_class(atoms: &[(u64, f64, f64)], zs: &[u64], classes: &[u64], n: u64, k: u64) -> Vec<(u64, f64)> {
    let (n, ku) = (n as usize, k as usize);
    let split = |c: u64| -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> =
            atoms.iter().zip(zs).filter(|(_, &z)| z == c).map(|(a, _)| (a.0 as usize, a.2)).collect();
        v.sort_by_key(|a| a.0);
        v
    };
    let za = classes[0];
    let (pa, pb) = (powers(&split(za), n, ku), classes.get(1).map(|&zb| powers(&split(zb), n, ku)));
    let Some((pb, zb)) = pb.map(|p| (p, classes[1])) else {
        let l = pa.1[n] + pa.0[n][ku].ln();
        return vec![(n as u64 * za, l)];
    };
    (0..=n)
        .map(|m| {
            let (a, b) = (&pa.0[n - m], &pb.0[m]);
            let dot: f64 = (0..=ku).map(|s| a[s] * b[ku - s]).sum();
            let l = ln_binomial(n as u64, m as u64) + pa.1[n - m] + pb.1[m] + dot.ln();
            ((n - m) as u64 * za + m as u64 * zb, l)
        })
        .collect()
}

/// Plain DP over `(s, z)` with `s ≤ k`, rescaled after each step.
fn dense(atoms: &[(u64, f64, f64)], zs: &[u64], n: u64, k: u64, zmax: u64) -> Vec<(u64, f64)> {
    let ku = k as usize;
    let width = (n * zmax) as usize + 1;
    let mut steps: Vec<(usize, usize, f64)> =
        atoms.iter().zip(zs).map(|(a, &z)| (a.0 as usize, z as usize, a.2)).collect();
    steps.sort_by_key(|a| a.0);
    let mut cur = vec![0.0; (ku + 1) * width];
    cur[0] = 1.0;
    let mut ln_scale = 0.0;
    for i in 0..n as usize {
        let zlim = i * zmax as usize;
        let mut next = vec![0.0; (ku + 1) * width];
        for s in 0..=ku {
            for z in 0..=zlim {
                let v = cur[s * width + z];
                if v == 0.0 {
                    continue;
                }
                for &(x, dz, p) in &steps {
                    if s + x > ku {
                        break;
                    }
                    next[(s + x) * width + z + dz] += v * p;
                }
            }
        }
        let max = next.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return Vec::new();
        }
        next.iter_mut().for_each(|v| *v /= max);
        ln_scale += max.ln();
        cur = next;
    }
    let row = &cur[ku * width..];
    row.iter()
        .enumerate()
        .map(|(z, &v)| (z as u64, if v > 0.0 { ln_scale + v.ln() } else { f64::NEG_INFINITY }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

impl ConditionalLawExact {
    pub fn n_terms(&self) -> u64 {
        self.spec.n_terms()
    }

    /// `E[T | S = k]`.
    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    /// `log E[e^{uT} | S = k]`.
    pub fn ln_laplace(&self, u: f64) -> f64 {
        log_sum_exp(self.values.iter().zip(&self.ln_probs).map(|(v, l)| l + u * v))
    }

    /// `f_n(u) = (1/n_terms) log E[e^{uT} | S = k]`.
    pub fn bartlett(&self, u: f64) -> f64 {
        self.ln_laplace(u) / self.n_terms() as f64
    }

    /// `ln P(T ≥ t)` or `ln P(T ≤ t)`, `−∞` when empty. The comparison is
    /// made on the integer lattice so that `t` on an atom is included.
    pub fn ln_tail(&self, t: f64, side: Side) -> f64 {
        let zt = (t - self.n_terms() as f64 * self.grid.offset) * self.grid.scale as f64;
        let tol = 1e-9 * zt.abs().max(1.0);
        log_sum_exp(self.z.iter().zip(&self.ln_probs).filter_map(|(&z, &l)| {
            let z = z as f64;
            let inside = match side {
                Side::AtLeast => z >= zt - tol,
                Side::AtMost => z <= zt + tol,
            };
            inside.then_some(l)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::{JointRow, Mark};
    use crate::lattice::LatticeDistribution;
    use crate::local_limit::dp_ln_point_prob;
    use std::collections::BTreeMap;

    fn occupancy() -> JointLaw {
        JointLaw::marked(LatticeDistribution::poisson(1.0).unwrap(), Mark::IndicatorZero)
    }

    #[test]
    fn trivial_cases() {
        let law = exact_conditional_law(&occupancy(), &ConditioningSpec::new(1, 1, 1).unwrap()).unwrap();
        assert_eq!(law.values, vec![0.0]);
        assert!((law.probs[0] - 1.0).abs() < 1e-15);

        let id = JointLaw::marked(LatticeDistribution::poisson(1.0).unwrap(), Mark::Identity);
        let spec = ConditioningSpec::new(3, 2, 4).unwrap();
        let law = exact_conditional_law(&id, &spec).unwrap();
        assert_eq!(law.values, vec![12.0]);
        assert_eq!(law.engine, DpEngine::Dense);
    }

    #[test]
    fn two_class_matches_dense() {
        let spec = ConditioningSpec::new(6, 5, 1).unwrap();
        let two = exact_conditional_law(&occupancy(), &spec).unwrap();
        let dense = solve(&occupancy(), &spec, usize::MAX, true).unwrap();
        assert_eq!(two.engine, DpEngine::TwoClass);
        assert_eq!(dense.engine, DpEngine::Dense);
        assert_eq!(two.values, dense.values);
        for (a, b) in two.probs.iter().zip(&dense.probs) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn dense_matches_enumeration() {
        let rows = vec![
            JointRow { k: 0, y: 0.0, p: 0.2 },
            JointRow { k: 1, y: 1.5, p: 0.3 },
            JointRow { k: 1, y: 0.5, p: 0.1 },
            JointRow { k: 2, y: 2.0, p: 0.25 },
            JointRow { k: 3, y: 0.0, p: 0.15 },
        ];
        let spec = ConditioningSpec::new(5, 4, 1).unwrap();
        let law = exact_conditional_law(&JointLaw::table(rows.clone()).unwrap(), &spec).unwrap();
        assert_eq!(law.engine, DpEngine::Dense);
        let mut brute: BTreeMap<u64, f64> = BTreeMap::new();
        let mut total = 0.0;
        for idx in 0..rows.len().pow(4) {
            let pick: Vec<&JointRow> = (0..4).map(|i| &rows[idx / rows.len().pow(i) % rows.len()]).collect();
            if pick.iter().map(|r| r.k).sum::<u64>() != 5 {
                continue;
            }
            let p: f64 = pick.iter().map(|r| r.p).product();
            let t: f64 = pick.iter().map(|r| r.y).sum();
            *brute.entry((2.0 * t).round() as u64).or_default() += p;
            total += p;
        }
        assert!((law.ln_event_prob - total.ln()).abs() < 1e-13);
        let got: Vec<(u64, f64)> = law.values.iter().map(|v| (2.0 * v).round() as u64).zip(law.probs.iter().copied()).collect();
        assert_eq!(got.len(), brute.len());
        for ((t, p), (bt, bp)) in got.iter().zip(&brute) {
            assert_eq!(t, bt);
            assert!((p - bp / total).abs() < 1e-14);
        }
    }

    #[test]
    fn marginalizes_to_the_point_mass() {
        let spec = ConditioningSpec::new(7, 9, 2).unwrap();
        let law = exact_conditional_law(&occupancy(), &spec).unwrap();
        let t = LatticeDistribution::poisson(1.0).unwrap().materialize(1e-300).unwrap();
        let direct = dp_ln_point_prob(&t, spec.n_terms(), spec.k());
        assert!((law.ln_event_prob - direct).abs() < 1e-12);
        assert!((law.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rational_marks() {
        let t = JointLaw::table(vec![
            JointRow { k: 0, y: 0.5, p: 0.25 },
            JointRow { k: 1, y: -1.0 / 3.0, p: 0.5 },
            JointRow { k: 2, y: 0.5, p: 0.25 },
        ])
        .unwrap();
        let law = exact_conditional_law(&t, &ConditioningSpec::new(2, 2, 1).unwrap()).unwrap();
        assert_eq!(law.grid.scale, 6);
        // S = 2 from (0,2), (2,0) or (1,1): T = 1 w.p. 1/3, T = −2/3 w.p. 2/3
        assert_eq!(law.values.len(), 2);
        assert!((law.values[0] + 2.0 / 3.0).abs() < 1e-15 && (law.probs[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((law.values[1] - 1.0).abs() < 1e-15);

        let bad = JointLaw::table(vec![JointRow { k: 0, y: 0.0, p: 0.5 }, JointRow { k: 1, y: std::f64::consts::PI, p: 0.5 }]).unwrap();
        assert!(matches!(
            exact_conditional_law(&bad, &ConditioningSpec::new(1, 1, 1).unwrap()),
            Err(Error::IrrationalMarks(_))
        ));
    }

    #[test]
    fn budget_and_zero_probability() {
        let spec = ConditioningSpec::new(1, 1, 100).unwrap();
        assert!(matches!(
            exact_conditional_law_with_budget(&occupancy(), &spec, 1000),
            Err(Error::StateBudgetExceeded { .. })
        ));
        let t = JointLaw::table(vec![JointRow { k: 0, y: 0.0, p: 0.5 }, JointRow { k: 2, y: 1.0, p: 0.5 }]).unwrap();
        assert!(matches!(
            exact_conditional_law(&t, &ConditioningSpec::new(3, 2, 1).unwrap()),
            Err(Error::ZeroProbabilityEvent { .. })
        ));
    }

    #[test]
    fn tails() {
        let law = exact_conditional_law(&occupancy(), &ConditioningSpec::new(1, 1, 10).unwrap()).unwrap();
        assert_eq!(law.ln_tail(-1.0, Side::AtLeast), law.ln_tail(11.0, Side::AtMost));
        assert!(law.ln_tail(-1.0, Side::AtLeast).abs() < 1e-14);
        assert_eq!(law.ln_tail(10.0, Side::AtLeast), f64::NEG_INFINITY);
        let both = (law.ln_tail(3.0, Side::AtLeast).exp() + law.ln_tail(3.0, Side::AtMost).exp()) - 1.0;
        let at3 = law.probs[law.values.iter().position(|&v| v == 3.0).unwrap()];
        assert!((both - at3).abs() < 1e-14);
        assert!(law.bartlett(0.0).abs() < 1e-15);
    }
}
