//! Invariant suite on a user-built law.
use conddev::check::run_checks;
use conddev::joint::{JointLaw, Mark};
use conddev::lattice::LatticeDistribution;

fn main() -> conddev::Result<()> {
    let x = LatticeDistribution::table(vec![(0, 0.3), (1, 0.4), (2, 0.2), (5, 0.1)])?;
    let law = JointLaw::marked(x, Mark::IndicatorEq(1));
    let report = run_checks(&law, &[])?;
    print!("{}", report.render());
    std::process::exit(if report.passed() { 0 } else { 1 });
}
