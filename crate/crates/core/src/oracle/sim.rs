//! Rejection sampling of `T = Σ Y_i` on the event `{S = k}`.
//!
//! Pairs are drawn i.i.d. and a replicate is accepted when `Σ X_i = k`. The
//! default proposal draws from the tilted law with density proportional to
//! `e^{τx}`, `ψ'_X(τ) = p/q`. The likelihood ratio of `n` proposal draws
//! against the original law is `e^{τΣx − nψ(τ)}`, which is the constant
//! `e^{τk − nψ(τ)}` on the acceptance event, so accepted replicates already
//! follow the conditional law and carry no weights. Atoms with `x > k` are
//! dropped from the proposal for the same reason: they never appear on
//! `{S = k}`.
//!
//! Replicate `r` draws from its own ChaCha8 stream `(seed, r)`, so output does
//! not depend on how replicates are spread over worker threads.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::exact::conditioning_atoms;
use crate::cgf::CgfEvaluator;
use crate::error::{Error, Result};
use crate::joint::{ConditioningSpec, JointLaw};

/// Generator name recorded in output metadata.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.9), stream = replicate index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposal {
    /// Tilted unless `p/q` equals the mean of `X`.
    Auto,
    Plain,
    Tilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub replicates: usize,
    /// Rejections allowed per replicate before giving up.
    pub max_rejections: u64,
    pub workers: usize,
    pub proposal: Proposal,
}

impl SimConfig {
    pub fn new(seed: u64, replicates: usize) -> Self {
        Self { seed, replicates, max_rejections: 10_000_000, workers: 1, proposal: Proposal::Auto }
    }

    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub spec: ConditioningSpec,
    pub config: SimConfig,
    /// Proposal actually used.
    pub proposal: Proposal,
    pub tau: f64,
    /// Accepted values of `T`, in replicate order.
    pub values: Vec<f64>,
    pub attempts: u64,
    pub acceptance_rate: f64,
    pub rng: &'static str,
}

impl SampleSet {
    /// Mean of `T / n_terms`.
    pub fn mean_ratio(&self) -> f64 {
        self.values.iter().sum::<f64>() / (self.values.len() as f64 * self.spec.n_terms() as f64)
    }

    /// `replicate,t` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("replicate,t\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{}\n", crate::special::fmt_sig17(*v)));
        }
        s
    }
}

struct Sampler {
    xs: Vec<u64>,
    ys: Vec<f64>,
    index: WeightedIndex<f64>,
    n_terms: u64,
    k: u64,
    max_rejections: u64,
}

impl Sampler {
    /// One accepted replicate and the number of attempts it took.
    fn replicate(&self, seed: u64, r: u64) -> std::result::Result<(f64, u64), u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r);
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            let (mut s, mut t) = (0u64, 0.0f64);
            let mut ok = true;
            for _ in 0..self.n_terms {
                let i = self.index.sample(&mut rng);
                s += self.xs[i];
                t += self.ys[i];
                if s > self.k {
                    ok = false;
                    break;
                }
            }
            if ok && s == self.k {
                return Ok((t, attempts));
            }
            if attempts > self.max_rejections {
                return Err(attempts);
            }
        }
    }
}

pub fn sample_conditioned(joint: &JointLaw, spec: &ConditioningSpec, cfg: &SimConfig) -> Result<SampleSet> {
    cfg.validate()?;
    let (n_terms, k) = (spec.n_terms(), spec.k());
    let atoms = conditioning_atoms(joint, k);
    if atoms.is_empty() {
        return Err(Error::ZeroProbabilityEvent { k, n_terms });
    }
    let x = CgfEvaluator::new(&joint.x_marginal()?);
    let ratio = k as f64 / n_terms as f64;
    let proposal = match cfg.proposal {
        Proposal::Auto if (ratio - x.mean()).abs() <= 1e-12 * ratio.max(1.0) => Proposal::Plain,
        Proposal::Auto => Proposal::Tilted,
        p => p,
    };
    let tau = match proposal {
        Proposal::Tilted => x.solve_tilt(ratio)?.tau,
        _ => 0.0,
    };
    let top = atoms.iter().map(|a| a.2.ln() + tau * a.0 as f64).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = atoms.iter().map(|a| (a.2.ln() + tau * a.0 as f64 - top).exp()).collect();
    let sampler = Sampler {
        xs: atoms.iter().map(|a| a.0).collect(),
        ys: atoms.iter().map(|a| a.1).collect(),
        index: WeightedIndex::new(&weights).map_err(|e| Error::InvalidLaw(e.to_string()))?,
        n_terms,
        k,
        max_rejections: cfg.max_rejections,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let draws: Vec<std::result::Result<(f64, u64), u64>> =
        pool.install(|| (0..cfg.replicates as u64).into_par_iter().map(|r| sampler.replicate(cfg.seed, r)).collect());

    let mut values = Vec::with_capacity(cfg.replicates);
    let mut attempts = 0u64;
    for d in draws {
        match d {
            Ok((t, a)) => {
                values.push(t);
                attempts += a;
            }
            Err(a) => {
                attempts += a;
                return Err(Error::MaxRejectionsExceeded {
                    accepted: values.len(),
                    attempts,
                    rate: values.len() as f64 / attempts as f64,
                });
            }
        }
    }
    Ok(SampleSet {
        spec: *spec,
        config: *cfg,
        proposal,
        tau,
        acceptance_rate: values.len() as f64 / attempts as f64,
        values,
        attempts,
        rng: RNG_NAME,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square homogeneity test on the distinct sample values.
/// Adjacent cells are pooled until each has an expected count of at least 5
/// in both samples.
pub fn two_sample_chi_square(a: &[f64], b: &[f64]) -> Result<ChiSquareTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidConfig("both samples must be non-empty".into()));
    }
    let mut keys: Vec<f64> = a.iter().chain(b).copied().collect();
    keys.sort_by(f64::total_cmp);
    keys.dedup();
    let count = |xs: &[f64]| {
        let mut c = vec![0.0f64; keys.len()];
        for x in xs {
            c[keys.binary_search_by(|k| k.total_cmp(x)).unwrap()] += 1.0;
        }
        c
    };
    let (ca, cb) = (count(a), count(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut acc_a, mut acc_b) = (0.0, 0.0);
    for (x, y) in ca.into_iter().zip(cb) {
        acc_a += x;
        acc_b += y;
        let pooled = acc_a + acc_b;
        if pooled * na.min(nb) / total >= 5.0 {
            cells.push((acc_a, acc_b));
            acc_a = 0.0;
            acc_b = 0.0;
        }
    }
    if acc_a + acc_b > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc_a;
                last.1 += acc_b;
            }
            None => cells.push((acc_a, acc_b)),
        }
    }
    if cells.len() < 2 {
        return Ok(ChiSquareTest { statistic: 0.0, dof: 0, p_value: 1.0 });
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(x, y)| {
            let pooled = x + y;
            let (ea, eb) = (pooled * na / total, pooled * nb / total);
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(ChiSquareTest { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::Mark;
    use crate::lattice::LatticeDistribution;
    use crate::oracle::exact::exact_conditional_law;

    fn occupancy() -> JointLaw {
        JointLaw::marked(LatticeDistribution::poisson(1.0).unwrap(), Mark::IndicatorZero)
    }

    #[test]
    fn identity_mark_is_pinned() {
        let id = JointLaw::marked(LatticeDistribution::poisson(1.0).unwrap(), Mark::Identity);
        let spec = ConditioningSpec::new(3, 2, 5).unwrap();
        let s = sample_conditioned(&id, &spec, &SimConfig::new(7, 200)).unwrap();
        assert!(s.values.iter().all(|&t| t == 15.0));
        assert_eq!(s.proposal, Proposal::Tilted);
    }

    #[test]
    fn mean_matches_dp() {
        let spec = ConditioningSpec::new(1, 1, 20).unwrap();
        let mut cfg = SimConfig::new(11, 100_000);
        cfg.workers = 4;
        let s = sample_conditioned(&occupancy(), &spec, &cfg).unwrap();
        let exact = exact_conditional_law(&occupancy(), &spec).unwrap();
        let n = spec.n_terms() as f64;
        let mean = exact.mean() / n;
        let var: f64 = exact.values.iter().zip(&exact.probs).map(|(v, p)| p * (v / n - mean).powi(2)).sum();
        let se = (var / s.values.len() as f64).sqrt();
        assert!((s.mean_ratio() - mean).abs() < 3.0 * se, "{} vs {mean} (se {se})", s.mean_ratio());
    }

    #[test]
    fn tilted_acceptance_follows_the_local_limit() {
        // ratio 2 for Poisson(1): tilted law is Poisson(2), σ² = 2
        let spec = ConditioningSpec::new(2, 1, 100).unwrap();
        let s = sample_conditioned(&occupancy(), &spec, &SimConfig::new(3, 4000)).unwrap();
        let predicted = 1.0 / (2.0f64 * 2.0 * std::f64::consts::PI * 100.0).sqrt();
        assert!((s.acceptance_rate / predicted - 1.0).abs() < 0.1, "{} vs {predicted}", s.acceptance_rate);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let spec = ConditioningSpec::new(1, 2, 10).unwrap();
        let mut cfg = SimConfig::new(99, 500);
        let one = sample_conditioned(&occupancy(), &spec, &cfg).unwrap();
        cfg.workers = 8;
        let eight = sample_conditioned(&occupancy(), &spec, &cfg).unwrap();
        assert_eq!(one.to_csv(), eight.to_csv());
        assert_eq!(one.attempts, eight.attempts);
    }

    #[test]
    fn proposals_agree_in_law() {
        let spec = ConditioningSpec::new(1, 2, 15).unwrap();
        let mut cfg = SimConfig::new(5, 10_000);
        cfg.workers = 4;
        cfg.proposal = Proposal::Tilted;
        let tilted = sample_conditioned(&occupancy(), &spec, &cfg).unwrap();
        cfg.proposal = Proposal::Plain;
        cfg.seed = 6;
        let plain = sample_conditioned(&occupancy(), &spec, &cfg).unwrap();
        let t = two_sample_chi_square(&tilted.values, &plain.values).unwrap();
        assert!(t.dof >= 3);
        assert!(t.p_value > 1e-3, "{t:?}");
    }

    #[test]
    fn rejection_limit() {
        let spec = ConditioningSpec::new(5, 1, 20).unwrap();
        let mut cfg = SimConfig::new(1, 10);
        cfg.proposal = Proposal::Plain;
        cfg.max_rejections = 10;
        let err = sample_conditioned(&occupancy(), &spec, &cfg).unwrap_err();
        assert!(matches!(err, Error::MaxRejectionsExceeded { accepted: 0, .. }));
    }

    #[test]
    fn chi_square_detects_a_shift() {
        let a: Vec<f64> = (0..1000).map(|i| (i % 10) as f64).collect();
        let b: Vec<f64> = (0..1000).map(|i| (i % 10 + 2) as f64).collect();
        assert!(two_sample_chi_square(&a, &b).unwrap().p_value < 1e-10);
        assert!((two_sample_chi_square(&a, &a).unwrap().p_value - 1.0).abs() < 1e-12);
    }
}
