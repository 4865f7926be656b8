//! Conditional LDP rate for the occupancy model; prints the CSV.
use conddev::joint::{JointLaw, Mark};
use conddev::lattice::LatticeDistribution;
use conddev::rates::{ldp_rate, linspace};

fn main() -> conddev::Result<()> {
    let law = JointLaw::marked(LatticeDistribution::poisson(1.0)?, Mark::IndicatorZero);
    let curve = ldp_rate(&law, 1.0, Some(&linspace(0.05, 0.95, 19)))?;
    eprintln!("tau {:.6}, gibbs point {:.10}, I'' at min {:.6}", curve.tau, curve.gibbs_point, curve.curvature_at_min);
    print!("{}", curve.to_csv());
    Ok(())
}
