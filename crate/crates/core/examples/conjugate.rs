//! Legendre transform of a few laws, including the hull boundary.
use conddev::cgf::CgfEvaluator;
use conddev::lattice::LatticeDistribution;

fn main() -> conddev::Result<()> {
    let laws = [
        ("poisson(1)", LatticeDistribution::poisson(1.0)?),
        ("geometric(0.5)", LatticeDistribution::geometric(0.5)?),
        ("borel(0.3)", LatticeDistribution::borel(0.3)?),
        ("table {0,1,3}", LatticeDistribution::table(vec![(0, 0.2), (1, 0.5), (3, 0.3)])?),
    ];
    for (name, law) in &laws {
        let ev = CgfEvaluator::new(law);
        let (lo, hi) = ev.range();
        println!("{name}: mean {:.6}, range ({lo}, {hi})", ev.mean());
        for x in [lo, ev.mean(), 1.5 * ev.mean() + 0.5] {
            let c = ev.conjugate(x)?;
            println!("  psi*({x:.4}) = {:.10}  (tau {:.6}, {} iterations)", c.value, c.tau, c.iterations);
        }
    }
    Ok(())
}
