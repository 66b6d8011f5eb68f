//! Finite-difference Ricci tensor of the Eguchi-Hanson metric, showing the
//! second-order decay of the residual with the step.

use kummer_k3::curvature::ricci_residual;
use kummer_k3::eguchi_hanson::{eh_metric, EhParams};

fn main() -> kummer_k3::Result<()> {
    let params = EhParams::new(1.0)?;
    let metric = |x: &[f64; 4]| eh_metric(&params, x).map(|g| *g.components());
    let x = [2.0, 1.1, 0.7, 3.0];
    let mut prev: Option<f64> = None;
    for h in [4e-3, 2e-3, 1e-3, 5e-4] {
        let r = ricci_residual(&metric, &x, h)?.amax();
        match prev {
            Some(p) => println!("h = {h:.0e}: max |Ric| = {r:.3e}, order {:.3}", (p / r).log2()),
            None => println!("h = {h:.0e}: max |Ric| = {r:.3e}"),
        }
        prev = Some(r);
    }
    Ok(())
}
