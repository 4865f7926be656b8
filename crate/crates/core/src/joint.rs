//! Marked pairs `(X, Y)`: `X` a lattice variable, `Y` a real mark.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FiniteTable, LatticeDistribution, LawKind};
use crate::policy;

/// Deterministic mark `Y = f(X)` from the supported set of functions.
#[derive(Debug, Clone, PartialEq)]
pub enum Mark {
    IndicatorZero,
    Identity,
    IndicatorEq(u64),
    /// `f(k)` from the table, `default` elsewhere.
    CustomTable { values: BTreeMap<u64, f64>, default: f64 },
}

impl Mark {
    pub fn apply(&self, k: u64) -> f64 {
        match self {
            Mark::IndicatorZero => (k == 0) as u8 as f64,
            Mark::Identity => k as f64,
            Mark::IndicatorEq(j) => (k == *j) as u8 as f64,
            Mark::CustomTable { values, default } => values.get(&k).copied().unwrap_or(*default),
        }
    }

    /// Only the identity mark is unbounded on an unbounded support.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, Mark::Identity)
    }

    /// `c · f`; `None` for the identity mark, which has no finite table form.
    pub fn scaled(&self, c: f64) -> Option<Mark> {
        match self {
            Mark::IndicatorZero => Mark::IndicatorEq(0).scaled(c),
            Mark::IndicatorEq(j) => Some(Mark::CustomTable {
                values: BTreeMap::from([(*j, c)]),
                default: 0.0,
            }),
            Mark::Identity => None,
            Mark::CustomTable { values, default } => Some(Mark::CustomTable {
                values: values.iter().map(|(&k, &v)| (k, c * v)).collect(),
                default: c * default,
            }),
        }
    }
}

/// One atom `P(X = k, Y = y) = p` of a joint table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRow {
    pub k: u64,
    pub y: f64,
    pub p: f64,
}

/// Finite joint table sorted by `(k, y)` without duplicate atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    rows: Vec<JointRow>,
    deficit: f64,
    renormalized: bool,
}

impl JointTable {
    /// Validates a user table (mass within [`policy::MASS_TOLERANCE`] of one).
    pub fn new(rows: Vec<JointRow>) -> Result<Self> {
        let mut total = 0.0;
        for r in &rows {
            if !(r.p >= 0.0) || !r.p.is_finite() || !r.y.is_finite() {
                return Err(Error::InvalidLaw(format!("bad joint row {r:?}")));
            }
            total += r.p;
        }
        if (total - 1.0).abs() > policy::MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!("total joint mass {total} is not 1")));
        }
        Self::from_weights(rows, 0.0)
    }

    /// Sorts, merges duplicates, drops sub-floor atoms and renormalizes.
    pub(crate) fn from_weights(mut rows: Vec<JointRow>, deficit: f64) -> Result<Self> {
        rows.sort_by(|a, b| a.k.cmp(&b.k).then(a.y.total_cmp(&b.y)));
        let mut merged: Vec<JointRow> = Vec::with_capacity(rows.len());
        for r in rows {
            match merged.last_mut() {
                Some(last) if last.k == r.k && last.y == r.y => last.p += r.p,
                _ => merged.push(r),
            }
        }
        let total: f64 = merged.iter().map(|r| r.p).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidLaw(format!("joint mass {total}")));
        }
        let mut dropped = 0.0;
        merged.retain(|r| {
            let keep = r.p / total >= policy::PROBABILITY_FLOOR;
            if !keep {
                dropped += r.p / total;
            }
            keep
        });
        if merged.is_empty() {
            return Err(Error::InvalidLaw("no joint mass above the floor".into()));
        }
        let kept: f64 = merged.iter().map(|r| r.p).sum();
        for r in merged.iter_mut() {
            r.p /= kept;
        }
        Ok(JointTable {
            rows: merged,
            deficit: deficit + dropped,
            renormalized: total != 1.0 || dropped > 0.0 || deficit > 0.0,
        })
    }

    pub fn rows(&self) -> &[JointRow] {
        &self.rows
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn renormalized(&self) -> bool {
        self.renormalized
    }

    pub fn x_marginal(&self) -> Result<LatticeDistribution> {
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for r in &self.rows {
            *acc.entry(r.k).or_default() += r.p;
        }
        Ok(LatticeDistribution::from_table(FiniteTable::from_weights(
            acc.into_iter().collect(),
            self.deficit,
        )?))
    }

    /// Smallest and largest mark value.
    pub fn mark_range(&self) -> (f64, f64) {
        self.rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.y), hi.max(r.y))
        })
    }

    /// Distinct mark values, ascending.
    pub fn mark_values(&self) -> Vec<f64> {
        let mut ys: Vec<f64> = self.rows.iter().map(|r| r.y).collect();
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        ys
    }

    /// `Some((a, b))` when every atom satisfies `y = a + b·k`.
    pub fn affine_mark(&self) -> Option<(f64, f64)> {
        let first = self.rows[0];
        let other = self.rows.iter().find(|r| r.k != first.k);
        let (a, b) = match other {
            None => {
                // single X value: affine only if the mark is constant too
                return if self.rows.iter().all(|r| r.y == first.y) {
                    Some((first.y, 0.0))
                } else {
                    None
                };
            }
            Some(o) => {
                let b = (o.y - first.y) / (o.k as f64 - first.k as f64);
                (first.y - b * first.k as f64, b)
            }
        };
        let scale = self.rows.iter().map(|r| r.y.abs()).fold(1.0, f64::max);
        self.rows
            .iter()
            .all(|r| (r.y - (a + b * r.k as f64)).abs() <= 1e-12 * scale)
            .then_some((a, b))
    }

    /// The same table with every mark multiplied by `c`.
    pub fn scale_marks(&self, c: f64) -> JointTable {
        JointTable {
            rows: self.rows.iter().map(|r| JointRow { y: c * r.y, ..*r }).collect(),
            deficit: self.deficit,
            renormalized: self.renormalized,
        }
    }
}

/// Law of `(X, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub enum JointLaw {
    Table(JointTable),
    /// `Y = mark(X)`; keeps the closed-form `X` law for analytic fast paths.
    Marked { x: LatticeDistribution, mark: Mark },
}

impl JointLaw {
    pub fn marked(x: LatticeDistribution, mark: Mark) -> Self {
        JointLaw::Marked { x, mark }
    }

    pub fn table(rows: Vec<JointRow>) -> Result<Self> {
        Ok(JointLaw::Table(JointTable::new(rows)?))
    }

    /// Finite joint table with omitted mass at most `eps`; tables are returned
    /// unchanged.
    pub fn materialize(&self, eps: f64) -> Result<JointTable> {
        match self {
            JointLaw::Table(t) => Ok(t.clone()),
            JointLaw::Marked { x, mark } => {
                let table = x.materialize(eps)?;
                let rows = table
                    .rows()
                    .map(|(k, p)| JointRow { k, y: mark.apply(k), p })
                    .collect();
                JointTable::from_weights(rows, table.deficit())
            }
        }
    }

    pub fn x_marginal(&self) -> Result<LatticeDistribution> {
        match self {
            JointLaw::Table(t) => t.x_marginal(),
            JointLaw::Marked { x, .. } => Ok(x.clone()),
        }
    }

    /// Upper end of `dom ψ_Y` when it is not the whole line.
    pub fn mark_domain_upper(&self) -> Option<f64> {
        match self {
            JointLaw::Marked { x, mark: Mark::Identity } => match x.kind() {
                LawKind::Geometric { rho } => Some(-rho.ln()),
                LawKind::Borel { lambda } => Some(-1.0 - lambda.ln()),
                _ => None,
            },
            _ => None,
        }
    }

    /// Joint law of `(X, c·Y)`.
    pub fn scale_mark(&self, c: f64, eps: f64) -> Result<JointLaw> {
        match self {
            JointLaw::Marked { x, mark } => match mark.scaled(c) {
                Some(mark) => Ok(JointLaw::Marked { x: x.clone(), mark }),
                None => Ok(JointLaw::Table(self.materialize(eps)?.scale_marks(c))),
            },
            JointLaw::Table(t) => Ok(JointLaw::Table(t.scale_marks(c))),
        }
    }
}

/// The conditioning event `S = n·p − offset` over `n·q` summands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningSpec {
    pub p: u64,
    pub q: u64,
    pub n: u64,
    /// Integer offset of the conditioning value; `1` gives the progeny event
    /// `S_n = n − 1` of a branching process.
    #[serde(default)]
    pub offset: u64,
}

impl ConditioningSpec {
    pub fn new(p: u64, q: u64, n: u64) -> Result<Self> {
        Self::with_offset(p, q, n, 0)
    }

    pub fn with_offset(p: u64, q: u64, n: u64, offset: u64) -> Result<Self> {
        if p == 0 || q == 0 || n == 0 {
            return Err(Error::InvalidConfig(format!("p, q, n must be positive (got {p}, {q}, {n})")));
        }
        if offset > n * p {
            return Err(Error::InvalidConfig(format!("offset {offset} exceeds n·p = {}", n * p)));
        }
        Ok(Self { p, q, n, offset })
    }

    /// Number of summands `n·q`.
    pub fn n_terms(&self) -> u64 {
        self.n * self.q
    }

    /// Conditioning value `n·p − offset`.
    pub fn k(&self) -> u64 {
        self.n * self.p - self.offset
    }

    /// Asymptotic ratio `p/q`.
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// Same ratio at another `n`.
    pub fn at(&self, n: u64) -> Result<Self> {
        Self::with_offset(self.p, self.q, n, self.offset)
    }
}
