//! How the volume error e_a shrinks with the gluing parameter.

use kummer_k3::cli::loglog_slope;
use kummer_k3::kummer::{GluedData, GluedModel, TorusGrid};
use kummer_k3::solver::Problem;

fn main() -> kummer_k3::Result<()> {
    let zeta = 0.24;
    let grid = TorusGrid::new(16)?;
    let a_list = [0.005, 0.01, 0.02];
    let (mut sups, mut ys) = (Vec::new(), Vec::new());
    println!("{:>8} {:>14} {:>14} {:>20}", "a", "sup e_a", "|e_a|_Y", "lambda");
    for &a in &a_list {
        let model = GluedModel::new(a, zeta)?;
        let data = GluedData::new(model, &grid)?;
        let problem = Problem::new(model, &grid, 0.1, 6.0)?;
        let y = problem.y_norm(&problem.ea())?;
        println!("{a:>8} {:>14.6e} {:>14.6e} {:>20.16}", data.sup_ea(), y, data.lambda);
        sups.push(data.sup_ea());
        ys.push(y);
    }
    println!("log-log slope of sup e_a: {:.4}", loglog_slope(&a_list, &sups).unwrap());
    println!("log-log slope of |e_a|_Y: {:.4}", loglog_slope(&a_list, &ys).unwrap());
    Ok(())
}
