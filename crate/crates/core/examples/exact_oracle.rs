//! Exact conditional law of the empty-urn count, checked against
//! inclusion-exclusion.
use conddev::joint::{ConditioningSpec, JointLaw, Mark};
use conddev::lattice::LatticeDistribution;
use conddev::oracle::{exact_conditional_law, occupancy_oracle};

fn main() -> conddev::Result<()> {
    let (balls, urns) = (12, 10);
    let law = JointLaw::marked(LatticeDistribution::poisson(1.0)?, Mark::IndicatorZero);
    let dp = exact_conditional_law(&law, &ConditioningSpec::new(balls, urns, 1)?)?;
    let ie = occupancy_oracle(balls, urns)?;
    println!("empty,dp,inclusion_exclusion");
    for (w, p) in ie.probs.iter().enumerate() {
        let q = dp.values.iter().position(|&v| v == w as f64).map_or(0.0, |i| dp.probs[i]);
        println!("{w},{q:.15e},{p:.15e}");
    }
    eprintln!("mean empty urns {:.10}", dp.mean());
    Ok(())
}
