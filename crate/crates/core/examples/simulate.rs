//! Conditioned sampling with the tilted proposal.
use conddev::joint::{ConditioningSpec, JointLaw, Mark};
use conddev::lattice::LatticeDistribution;
use conddev::oracle::{exact_conditional_law, sample_conditioned, SimConfig};

fn main() -> conddev::Result<()> {
    let law = JointLaw::marked(LatticeDistribution::poisson(1.0)?, Mark::IndicatorZero);
    // 60 balls in 40 urns
    let spec = ConditioningSpec::new(3, 2, 20)?;
    let cfg = SimConfig { workers: 4, ..SimConfig::new(7, 20_000) };
    let s = sample_conditioned(&law, &spec, &cfg)?;
    let exact = exact_conditional_law(&law, &spec)?;
    println!("proposal {:?}, acceptance {:.4}", s.proposal, s.acceptance_rate);
    println!("mean T/nq: sampled {:.5}, exact {:.5}", s.mean_ratio(), exact.mean() / spec.n_terms() as f64);
    Ok(())
}
