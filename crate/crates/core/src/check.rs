//! Invariant suite run by `conddev check` on a single law.

use serde::Serialize;

use crate::cgf::CgfEvaluator;
use crate::error::Result;
use crate::joint::JointLaw;
use crate::lattice::LatticeDistribution;
use crate::local_limit::exact_point_prob_validated;
use crate::rates::{mdp_consistency_check, RateFunction};
use crate::tilting::tilt_lattice;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn render(&self) -> String {
        self.items
            .iter()
            .map(|i| format!("{} {}: {}\n", if i.passed { "PASS" } else { "FAIL" }, i.name, i.detail))
            .collect()
    }
}

/// Three targets spread over the range of `ψ'_X`.
pub fn probe_targets(x: &CgfEvaluator) -> Vec<f64> {
    let (lo, hi) = x.range();
    if hi.is_finite() {
        [0.25, 0.5, 0.75].iter().map(|t| lo + t * (hi - lo)).collect()
    } else {
        let m = x.mean();
        vec![lo + 0.5 * (m - lo), m, 2.0 * m - lo]
    }
}

fn item(name: &str, passed: bool, detail: String) -> CheckItem {
    CheckItem { name: name.into(), passed, detail }
}

/// `ratios` defaults to [`probe_targets`] when empty.
pub fn run_checks(law: &JointLaw, ratios: &[f64]) -> Result<CheckReport> {
    let xd: LatticeDistribution = law.x_marginal()?;
    let x = CgfEvaluator::new(&xd);
    let ratios = if ratios.is_empty() { probe_targets(&x) } else { ratios.to_vec() };
    let mut items = Vec::new();

    let worst = ratios
        .iter()
        .map(|&r| Ok((tilt_lattice(&xd, r)?.achieved_mean - r).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    items.push(item("tilted means", worst <= 1e-10, format!("max |E[X̌] − target| = {worst:e}")));

    let mut worst = 0.0f64;
    for &r in &ratios {
        let tau = x.solve_tilt(r)?.tau;
        let d1 = x.cgf_derivatives(tau)?.d1;
        let gap = (x.conjugate(d1)?.value + x.cgf(tau)? - tau * d1).abs();
        worst = worst.max(gap / (1.0 + (tau * d1).abs()));
    }
    items.push(item("Young–Fenchel equality", worst <= 1e-10, format!("max relative gap {worst:e}")));

    let table = xd.to_table(crate::policy::DEFAULT_TRUNCATION)?;
    let n = 20u64;
    let mut detail = Vec::new();
    let mut ok = true;
    for &r in &ratios {
        let k = (r * n as f64).round() as u64;
        match exact_point_prob_validated(&table, n, k) {
            Ok(pp) => detail.push(format!("P(S_{n} = {k}) = {:e}", pp.exact)),
            Err(e) => {
                ok = false;
                detail.push(format!("k = {k}: {e}"));
            }
        }
    }
    items.push(item("inversion vs convolution", ok, detail.join("; ")));

    for &r in &ratios {
        let rf = RateFunction::new(law, r)?;
        let chi = rf.gibbs_point()?;
        let at_min = rf.rate(chi)?;
        items.push(item(&format!("I(χ) = 0 at p/q = {r}"), at_min.abs() <= 1e-9, format!("I({chi}) = {at_min:e}")));
        let c = mdp_consistency_check(law, r)?;
        let (passed, detail) = match &c.skipped {
            Some(why) => (true, format!("skipped: {why}")),
            None => (c.passed, format!("I''(χ)·α² = {}", c.product)),
        };
        items.push(item(&format!("curvature identity at p/q = {r}"), passed, detail));
    }
    Ok(CheckReport { items })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;

    #[test]
    fn every_preset_passes() {
        for name in Preset::NAMES {
            let (law, spec) = Preset::by_name(name).unwrap().expand(1, 1).unwrap();
            let report = run_checks(&law, &[spec.ratio()]).unwrap();
            assert!(report.passed(), "{name}:\n{}", report.render());
        }
    }

    #[test]
    fn default_targets_cover_the_range() {
        let x = CgfEvaluator::new(&LatticeDistribution::table(vec![(0, 0.5), (4, 0.5)]).unwrap());
        assert_eq!(probe_targets(&x), vec![1.0, 2.0, 3.0]);
    }
}
