//! Finite-n conditional tail rates approaching the limit rate.
use conddev::joint::{ConditioningSpec, JointLaw, Mark};
use conddev::lattice::LatticeDistribution;
use conddev::oracle::{empirical_rate, EmpiricalMethod, Side};

fn main() -> conddev::Result<()> {
    let law = JointLaw::marked(LatticeDistribution::poisson(1.0)?, Mark::IndicatorZero);
    let spec = ConditioningSpec::new(1, 1, 1)?;
    let seq = empirical_rate(&law, &spec, &[50, 100, 200, 400], 0.5, Side::AtLeast, &EmpiricalMethod::Dp)?;
    print!("{}", seq.to_csv());
    eprintln!("error decreasing: {}", seq.error_decreasing());
    Ok(())
}
