//! Conditional log-Laplace transform by Fourier ratio and by exact DP.
use conddev::joint::{ConditioningSpec, JointLaw, Mark};
use conddev::lattice::LatticeDistribution;
use conddev::oracle::dp_conditional_laplace;
use conddev::rates::bartlett_laplace;

fn main() -> conddev::Result<()> {
    let law = JointLaw::marked(LatticeDistribution::poisson(1.0)?, Mark::IndicatorZero);
    let spec = ConditioningSpec::new(1, 1, 30)?;
    let u = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let fourier = bartlett_laplace(&law, &spec, &u)?;
    let dp = dp_conditional_laplace(&law, &spec, &u)?;
    println!("u,fourier,dp");
    for ((u, a), b) in u.iter().zip(&fourier.f).zip(&dp.f) {
        println!("{u},{a:.15},{b:.15}");
    }
    Ok(())
}
