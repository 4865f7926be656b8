//! Named models: occupancy, Bose–Einstein, branching and bootstrap counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::joint::{ConditioningSpec, JointLaw, JointRow, Mark};
use crate::lattice::LatticeDistribution;
use crate::policy;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Preset {
    /// `N = nq` urns, `m = np` balls, `Y = 1{X = 0}` counts empty urns.
    /// `λ = None` uses `λ = p/q`.
    Occupancy { lambda: Option<f64> },
    /// Geometric cell occupancies with a bounded mark.
    BoseEinstein {
        rho: f64,
        #[serde(skip)]
        mark: Mark,
    },
    /// Poisson offspring conditioned on total progeny `n`, i.e. `S_n = n − 1`.
    /// Only order-free statistics `Σ f(X_i)` are covered.
    Branching {
        lambda: f64,
        #[serde(skip)]
        mark: Mark,
    },
    /// `Y = X·f(Z)` with `Z` uniform over the `weights` and independent of
    /// the Poisson count `X`.
    BootstrapCount { lambda: f64, weights: Vec<f64> },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Occupancy { .. } => "occupancy",
            Preset::BoseEinstein { .. } => "bose-einstein",
            Preset::Branching { .. } => "branching",
            Preset::BootstrapCount { .. } => "bootstrap-count",
        }
    }

    pub const NAMES: [&'static str; 4] = ["occupancy", "bose-einstein", "branching", "bootstrap-count"];

    /// Preset with its documented defaults.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "occupancy" => Ok(Preset::Occupancy { lambda: None }),
            "bose-einstein" => Ok(Preset::BoseEinstein { rho: 0.5, mark: Mark::IndicatorZero }),
            "branching" => Ok(Preset::Branching { lambda: 1.0, mark: Mark::IndicatorEq(3) }),
            "bootstrap-count" => Ok(Preset::BootstrapCount { lambda: 1.0, weights: vec![0.0, 1.0] }),
            _ => Err(Error::InvalidConfig(format!(
                "unknown preset '{name}' (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }

    /// The joint law and the conditioning template at `n = 1`; use
    /// [`ConditioningSpec::at`] for other `n`.
    pub fn expand(&self, p: u64, q: u64) -> Result<(JointLaw, ConditioningSpec)> {
        match self {
            Preset::Occupancy { lambda } => {
                let lambda = lambda.unwrap_or(p as f64 / q as f64);
                let law = JointLaw::marked(LatticeDistribution::poisson(lambda)?, Mark::IndicatorZero);
                Ok((law, ConditioningSpec::new(p, q, 1)?))
            }
            Preset::BoseEinstein { rho, mark } => {
                if !mark.is_bounded() {
                    return Err(Error::MarkDomainViolation(format!(
                        "the Laplace transform of this mark under geometric({rho}) is finite only below {}",
                        -rho.ln()
                    )));
                }
                let law = JointLaw::marked(LatticeDistribution::geometric(*rho)?, mark.clone());
                Ok((law, ConditioningSpec::new(p, q, 1)?))
            }
            Preset::Branching { lambda, mark } => {
                if (p, q) != (1, 1) {
                    return Err(Error::InvalidConfig("the branching preset conditions on S_n = n − 1 (p = q = 1)".into()));
                }
                let law = JointLaw::marked(LatticeDistribution::poisson(*lambda)?, mark.clone());
                Ok((law, ConditioningSpec::with_offset(1, 1, 1, 1)?))
            }
            Preset::BootstrapCount { lambda, weights } => {
                if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::InvalidConfig("bootstrap weights must be finite and non-empty".into()));
                }
                let x = LatticeDistribution::poisson(*lambda)?.materialize(policy::DEFAULT_TRUNCATION)?;
                let share = 1.0 / weights.len() as f64;
                let rows = x
                    .rows()
                    .flat_map(|(k, p)| weights.iter().map(move |&f| JointRow { k, y: k as f64 * f, p: p * share }))
                    .collect();
                Ok((JointLaw::table(rows)?, ConditioningSpec::new(p, q, 1)?))
            }
        }
    }
}
