//! First Laplace eigenvalue of the glued metric against the flat torus, and
//! the Poincaré inequality it implies.

use std::f64::consts::PI;

use kummer_k3::kummer::{GluedData, GluedModel, TorusGrid};
use kummer_k3::solver::{lambda1_estimate, poincare_ratios, Operators};

fn main() -> kummer_k3::Result<()> {
    let grid = TorusGrid::new(16)?;
    let n = grid.n() as f64;
    let discrete_flat = (2.0 * n * (PI / n).sin()).powi(2);
    println!("flat: 4 pi^2 = {:.6}, discrete = {discrete_flat:.6}", 4.0 * PI * PI);
    for a in [1e-6, 0.02] {
        let data = GluedData::new(GluedModel::new(a, 0.24)?, &grid)?;
        let ops = Operators::new(&data.omega0)?;
        let l1 = lambda1_estimate(&ops, 0, 1e-10, 200)?;
        let worst = poincare_ratios(&ops, l1.value, 10, 1).into_iter().fold(0.0, f64::max);
        println!(
            "a = {a:e}: lambda1 = {:.8} in {} iterations; worst Poincare ratio {worst:.4}",
            l1.value, l1.iterations
        );
    }
    Ok(())
}
