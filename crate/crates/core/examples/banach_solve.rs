//! Fixed-point iteration for the complex Monge-Ampère correction, with the
//! per-iteration trace.

use kummer_k3::kummer::{GluedModel, TorusGrid};
use kummer_k3::solver::{BallPolicy, Problem};

fn main() -> kummer_k3::Result<()> {
    let grid = TorusGrid::new(16)?;
    let problem = Problem::new(GluedModel::new(0.01, 0.24)?, &grid, 0.1, 6.0)?;
    let s = problem.banach_solve(None, 1e-8, 50, BallPolicy::Report)?;
    println!("{:>4} {:>14} {:>14} {:>14}", "iter", "|psi|_Y", "MA residual", "min eig");
    for r in &s.trace {
        println!("{:>4} {:>14.6e} {:>14.6e} {:>14.6}", r.iter, r.y_norm_psi, r.ma_sup_residual, r.min_eigenvalue);
    }
    println!(
        "converged {} after {} iterations; residual {:.3e} -> {:.3e}; ball radius {:.3e}, max |psi|_Y {:.3e}",
        s.converged, s.iterations, s.initial_ma_sup, s.final_ma_sup, s.ball_radius, s.max_y_norm
    );
    println!("increment ratios {:?}", s.increment_ratios);
    Ok(())
}
