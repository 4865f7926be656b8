//! Writes the occupancy rate curves for λ = 1 into a directory
//! (first argument, default `figure-out`).
use conddev::figure::{figure_emit, FigureJob, DEFAULT_RATIOS};

fn main() -> conddev::Result<()> {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "figure-out".into()).into();
    let job = FigureJob { lambda: 1.0, ratios: DEFAULT_RATIOS.to_vec(), grid: None, out_dir };
    for out in figure_emit(&job)? {
        println!("{} (zero at {:.10})", out.csv.display(), out.curve.gibbs_point);
    }
    Ok(())
}
