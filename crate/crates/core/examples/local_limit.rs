//! Exact point probabilities against the central and saddle-point
//! approximations, and the span-2 failure.
use conddev::lattice::LatticeDistribution;
use conddev::local_limit::{central_local_limit, exact_point_prob, span_counterexample_report, tilted_local_limit};

fn main() -> conddev::Result<()> {
    let d = LatticeDistribution::poisson(1.0)?;
    println!("n,k,exact,central,saddle");
    for (n, k) in [(100, 100), (100, 50), (100, 150), (400, 400)] {
        let exact = exact_point_prob(&d, n, k)?;
        // the central form only applies at k = n·E[X]
        let central = if k == n { format!("{:.8e}", central_local_limit(&d, n, k)?) } else { "-".into() };
        println!("{n},{k},{exact:.8e},{central},{:.8e}", tilted_local_limit(&d, n, k)?);
    }

    let two = LatticeDistribution::table(vec![(0, 0.5), (2, 0.5)])?;
    for k in [400, 401] {
        let r = span_counterexample_report(&two, 400, k)?;
        println!("span {}: k = {k}, exact / formula = {:.5}", r.span, r.ratio);
    }
    Ok(())
}
