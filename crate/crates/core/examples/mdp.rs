//! Moderate-deviation parameters and their finite-n check by the DP oracle.
use conddev::joint::{ConditioningSpec, JointLaw, Mark};
use conddev::lattice::LatticeDistribution;
use conddev::oracle::mdp_empirical;
use conddev::rates::{mdp_consistency_check, mdp_params, SpeedSequence};

fn main() -> conddev::Result<()> {
    let law = JointLaw::marked(LatticeDistribution::poisson(1.0)?, Mark::IndicatorZero);
    let m = mdp_params(&law, 1.0)?;
    println!("alpha^2 = {:.10}, centering per term {:.10}, J(1) = {:.6}", m.alpha2, m.gibbs_point, m.rate(1.0));
    let c = mdp_consistency_check(&law, 1.0)?;
    println!("I''(chi) * alpha^2 = {:.10}", c.product);

    let spec = ConditioningSpec::new(1, 1, 1)?;
    let seq = mdp_empirical(&law, &spec, &[100, 400, 1600], &SpeedSequence::power(0.5)?, 1.0)?;
    print!("{}", seq.to_csv());
    Ok(())
}
