//! Two different starting points converge to the same fixed point.

use kummer_k3::kummer::{GluedModel, TorusGrid};
use kummer_k3::solver::{BallPolicy, Problem};

fn main() -> kummer_k3::Result<()> {
    let grid = TorusGrid::new(16)?;
    let problem = Problem::new(GluedModel::new(0.01, 0.24)?, &grid, 0.1, 6.0)?;
    let diff = problem.uniqueness_check(1e-10, 50, BallPolicy::Report)?;
    println!("|psi(0) - psi(-e_a)|_Y = {diff:.3e}");
    let lip = problem.lipschitz_sample(10, 3)?;
    println!(
        "sampled Lipschitz ratios: max {:.3e}, mean {:.3e}; analytic bound {:.6}",
        lip.max,
        lip.mean,
        problem.norms.contraction_bound()
    );
    Ok(())
}
