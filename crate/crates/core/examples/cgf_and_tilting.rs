//! CGF, tilting to a target mean, and the tilted table.
use conddev::cgf::CgfEvaluator;
use conddev::lattice::LatticeDistribution;
use conddev::tilting::tilt_lattice;

fn main() -> conddev::Result<()> {
    let x = LatticeDistribution::poisson(1.0)?;
    let ev = CgfEvaluator::new(&x);
    for tau in [-1.0, 0.0, 1.0] {
        println!("psi({tau}) = {:.12}", ev.cgf(tau)?);
    }

    // Poisson(1) tilted to mean 2.5 is Poisson(2.5), τ = ln 2.5
    let sol = tilt_lattice(&x, 2.5)?;
    println!("tau = {:.12} (ln 2.5 = {:.12})", sol.tau, 2.5f64.ln());
    println!("achieved mean {:.12}, deficit {:e}", sol.achieved_mean, sol.deficit);
    for k in 0..5 {
        println!("  P_tau(X = {k}) = {:.10}", sol.tilted.pmf(k));
    }
    Ok(())
}
