//! JSON form of user-supplied laws.
//!
//! ```json
//! {"kind": "poisson", "lambda": 1.0, "mark": "indicator-zero"}
//! {"kind": "finite-table", "rows": [[0, 0.5], [2, 0.5]], "mark": {"indicator-eq": 2}}
//! {"kind": "joint-table", "rows": [[0, 1.0, 0.3], [1, 0.0, 0.7]]}
//! ```
//!
//! Marks: `"indicator-zero"`, `"identity"`, `{"indicator-eq": k}`,
//! `{"custom-table": {"values": [[k, y], ...], "default": y}}`. A missing
//! mark means `"indicator-zero"`; joint tables carry their own marks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{JointLaw, JointRow, Mark};
use crate::lattice::LatticeDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    Poisson {
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mark: Option<MarkSpec>,
    },
    Geometric {
        rho: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mark: Option<MarkSpec>,
    },
    Borel {
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mark: Option<MarkSpec>,
    },
    FiniteTable {
        rows: Vec<(u64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mark: Option<MarkSpec>,
    },
    JointTable {
        rows: Vec<(u64, f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkSpec {
    IndicatorZero,
    Identity,
    IndicatorEq(u64),
    CustomTable { values: Vec<(u64, f64)>, default: f64 },
}

impl MarkSpec {
    pub fn to_mark(&self) -> Mark {
        match self {
            MarkSpec::IndicatorZero => Mark::IndicatorZero,
            MarkSpec::Identity => Mark::Identity,
            MarkSpec::IndicatorEq(k) => Mark::IndicatorEq(*k),
            MarkSpec::CustomTable { values, default } => Mark::CustomTable {
                values: values.iter().copied().collect::<BTreeMap<_, _>>(),
                default: *default,
            },
        }
    }

    /// Command-line form: `indicator-zero`, `identity`, `indicator-eq:K`, or
    /// `custom:K=Y,K=Y[,default=Y]`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unrecognized mark '{s}'"));
        match s {
            "indicator-zero" => return Ok(MarkSpec::IndicatorZero),
            "identity" => return Ok(MarkSpec::Identity),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("indicator-eq:") {
            return k.parse().map(MarkSpec::IndicatorEq).map_err(|_| bad());
        }
        let body = s.strip_prefix("custom:").ok_or_else(bad)?;
        let mut values = Vec::new();
        let mut default = 0.0;
        for part in body.split(',').filter(|p| !p.is_empty()) {
            let (k, y) = part.split_once('=').ok_or_else(bad)?;
            let y: f64 = y.trim().parse().map_err(|_| bad())?;
            if k.trim() == "default" {
                default = y;
            } else {
                values.push((k.trim().parse().map_err(|_| bad())?, y));
            }
        }
        Ok(MarkSpec::CustomTable { values, default })
    }
}

impl LawSpec {
    pub fn to_law(&self) -> Result<JointLaw> {
        let marked = |x: LatticeDistribution, mark: &Option<MarkSpec>| {
            JointLaw::marked(x, mark.as_ref().map_or(Mark::IndicatorZero, MarkSpec::to_mark))
        };
        match self {
            LawSpec::Poisson { lambda, mark } => Ok(marked(LatticeDistribution::poisson(*lambda)?, mark)),
            LawSpec::Geometric { rho, mark } => Ok(marked(LatticeDistribution::geometric(*rho)?, mark)),
            LawSpec::Borel { lambda, mark } => Ok(marked(LatticeDistribution::borel(*lambda)?, mark)),
            LawSpec::FiniteTable { rows, mark } => Ok(marked(LatticeDistribution::table(rows.clone())?, mark)),
            LawSpec::JointTable { rows } => {
                JointLaw::table(rows.iter().map(|&(k, y, p)| JointRow { k, y, p }).collect())
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidLaw(format!("law JSON: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_forms_parse() {
        let a = LawSpec::from_json(r#"{"kind": "poisson", "lambda": 1.0, "mark": "indicator-zero"}"#).unwrap();
        assert_eq!(
            a.to_law().unwrap(),
            JointLaw::marked(LatticeDistribution::poisson(1.0).unwrap(), Mark::IndicatorZero)
        );
        let b = LawSpec::from_json(r#"{"kind": "finite-table", "rows": [[0, 0.5], [2, 0.5]], "mark": {"indicator-eq": 2}}"#)
            .unwrap();
        assert!(matches!(b.to_law().unwrap(), JointLaw::Marked { mark: Mark::IndicatorEq(2), .. }));
        let c = LawSpec::from_json(r#"{"kind": "joint-table", "rows": [[0, 1.0, 0.3], [1, 0.0, 0.7]]}"#).unwrap();
        assert!(matches!(c.to_law().unwrap(), JointLaw::Table(_)));
        let d = LawSpec::from_json(
            r#"{"kind": "geometric", "rho": 0.5, "mark": {"custom-table": {"values": [[0, 2.0]], "default": 1.0}}}"#,
        )
        .unwrap();
        assert!(matches!(d.to_law().unwrap(), JointLaw::Marked { mark: Mark::CustomTable { .. }, .. }));
    }

    #[test]
    fn round_trip() {
        let s = LawSpec::Borel { lambda: 0.2, mark: Some(MarkSpec::IndicatorEq(1)) };
        assert_eq!(LawSpec::from_json(&serde_json::to_string(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(LawSpec::from_json(r#"{"kind": "cauchy"}"#), Err(Error::InvalidLaw(_))));
        assert!(LawSpec::from_json(r#"{"kind": "poisson", "lambda": -1}"#).unwrap().to_law().is_err());
        assert!(LawSpec::from_json(r#"{"kind": "poisson", "lambda": 1, "extra": 3}"#).is_err());
    }

    #[test]
    fn command_line_marks() {
        assert_eq!(MarkSpec::parse("indicator-eq:3").unwrap(), MarkSpec::IndicatorEq(3));
        assert_eq!(
            MarkSpec::parse("custom:0=1,2=0.5,default=0.25").unwrap(),
            MarkSpec::CustomTable { values: vec![(0, 1.0), (2, 0.5)], default: 0.25 }
        );
        assert!(MarkSpec::parse("square").is_err());
    }
}
