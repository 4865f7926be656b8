//! Finite-`n` deviation rates from the exact conditional law or from
//! conditioned samples, set against their limits.

use serde::Serialize;

use super::exact::{exact_conditional_law, ConditionalLawExact, Side};
use super::sim::{sample_conditioned, SimConfig, RNG_NAME};
use crate::error::Result;
use crate::joint::{ConditioningSpec, JointLaw};
use crate::rates::{mdp_params, ConditionalLaplace, LaplaceMethod, RateFunction, SpeedSequence};
use crate::special::fmt_sig17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmpiricalMethod {
    Dp,
    Mc(SimConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateEstimate {
    pub n: u64,
    pub nq: u64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub estimate: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub theory: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub error: f64,
}

impl RateEstimate {
    fn new(n: u64, nq: u64, estimate: f64, theory: f64) -> Self {
        let error = if estimate == theory { 0.0 } else { (estimate - theory).abs() };
        Self { n, nq, estimate, theory, error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSequence {
    pub rows: Vec<RateEstimate>,
    pub metadata: OracleMetadata,
}

impl RateSequence {
    /// Columns `n,nq,estimate,theory,error`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,nq,estimate,theory,error\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.n, r.nq, fmt_sig17(r.estimate), fmt_sig17(r.theory), fmt_sig17(r.error)));
        }
        s
    }

    /// Whether `error` strictly decreases along the sequence.
    pub fn error_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

/// Provenance written next to oracle and simulation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleMetadata {
    pub method: String,
    pub seed: Option<u64>,
    pub rng: Option<&'static str>,
    pub truncation: &'static str,
}

/// Both engines use only atoms with `x ≤ k`, and drop nothing else.
pub const TRUNCATION_NOTE: &str = "none: atoms with x > k cannot occur on {S = k} and are excluded exactly";

impl OracleMetadata {
    pub fn for_method(method: &EmpiricalMethod) -> Self {
        match method {
            EmpiricalMethod::Dp => Self { method: "dp".into(), seed: None, rng: None, truncation: TRUNCATION_NOTE },
            EmpiricalMethod::Mc(cfg) => {
                Self { method: "mc".into(), seed: Some(cfg.seed), rng: Some(RNG_NAME), truncation: TRUNCATION_NOTE }
            }
        }
    }
}

/// `inf` of the rate over the half-line `{t ≥ y}` or `{t ≤ y}`, which is
/// `I(y)` on the far side of `χ` and zero otherwise.
pub fn half_line_rate(rf: &RateFunction, y: f64, side: Side) -> Result<f64> {
    let chi = rf.gibbs_point()?;
    let near = match side {
        Side::AtLeast => y <= chi,
        Side::AtMost => y >= chi,
    };
    if near {
        Ok(0.0)
    } else {
        rf.rate(y)
    }
}

/// `ln P(T/nq on side of y | S = k)` by the chosen method.
fn ln_tail(joint: &JointLaw, spec: &ConditioningSpec, y: f64, side: Side, method: &EmpiricalMethod) -> Result<f64> {
    let threshold = y * spec.n_terms() as f64;
    match method {
        EmpiricalMethod::Dp => Ok(exact_conditional_law(joint, spec)?.ln_tail(threshold, side)),
        EmpiricalMethod::Mc(cfg) => {
            let s = sample_conditioned(joint, spec, cfg)?;
            let tol = 1e-9 * threshold.abs().max(1.0);
            let hits = s
                .values
                .iter()
                .filter(|&&t| match side {
                    Side::AtLeast => t >= threshold - tol,
                    Side::AtMost => t <= threshold + tol,
                })
                .count();
            Ok((hits as f64 / s.values.len() as f64).ln())
        }
    }
}

/// `−(1/nq) log P(T/nq on side of y | S = k)` for each `n`, against the
/// half-line infimum of the limit rate.
pub fn empirical_rate(
    joint: &JointLaw,
    spec: &ConditioningSpec,
    ns: &[u64],
    y: f64,
    side: Side,
    method: &EmpiricalMethod,
) -> Result<RateSequence> {
    let rf = RateFunction::new(joint, spec.ratio())?;
    let theory = half_line_rate(&rf, y, side)?;
    let rows = ns
        .iter()
        .map(|&n| {
            let s = spec.at(n)?;
            let nq = s.n_terms();
            let est = -ln_tail(joint, &s, y, side, method)? / nq as f64;
            Ok(RateEstimate::new(n, nq, est, theory))
        })
        .collect::<Result<_>>()?;
    Ok(RateSequence { rows, metadata: OracleMetadata::for_method(method) })
}

/// `a_n log P(√(a_n/nq)(T − b_n) ≥ z | S = k)` against `−z²/(2α²_τ)`, by the
/// DP engine.
pub fn mdp_empirical(
    joint: &JointLaw,
    spec: &ConditioningSpec,
    ns: &[u64],
    speed: &SpeedSequence,
    z: f64,
) -> Result<RateSequence> {
    let mdp = mdp_params(joint, spec.ratio())?;
    let theory = -mdp.rate(z);
    let rows = ns
        .iter()
        .map(|&n| {
            let s = spec.at(n)?;
            let nq = s.n_terms();
            let a = speed.at(n);
            let threshold = mdp.centering(nq) + z * (nq as f64 / a).sqrt();
            let law = exact_conditional_law(joint, &s)?;
            let est = a * law.ln_tail(threshold, Side::AtLeast);
            Ok(RateEstimate::new(n, nq, est, theory))
        })
        .collect::<Result<_>>()?;
    Ok(RateSequence { rows, metadata: OracleMetadata::for_method(&EmpiricalMethod::Dp) })
}

/// `f_n(u)` from the exact conditional law.
pub fn dp_conditional_laplace(joint: &JointLaw, spec: &ConditioningSpec, u_grid: &[f64]) -> Result<ConditionalLaplace> {
    let law: ConditionalLawExact = exact_conditional_law(joint, spec)?;
    Ok(ConditionalLaplace {
        spec: *spec,
        u: u_grid.to_vec(),
        f: u_grid.iter().map(|&u| law.bartlett(u)).collect(),
        method: LaplaceMethod::DpOracle,
    })
}
