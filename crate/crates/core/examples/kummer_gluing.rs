//! The sixteen orbifold points, the blow-up charts and the glued form on a
//! periodic grid, including which grids actually see the gluing annuli.

use kummer_k3::kummer::*;
use num_complex::Complex64;

fn main() -> kummer_k3::Result<()> {
    let pts = fixed_points();
    println!("{} fixed points, e.g. {:?} and {:?}", pts.len(), pts[0], pts[15]);

    let p = [Complex64::new(0.7, 0.2), Complex64::new(-0.3, 0.5)];
    let q = blowup_transition(Transition::OneToTwo, p)?;
    println!("blow-up chart change {p:?} -> {q:?}");

    for zeta in [1.0 / 9.0, 0.24] {
        println!("zeta = {zeta:.4}: largest admissible a = {:.6}", a_max(zeta));
    }

    let grid = TorusGrid::new(16)?;
    for (a, zeta) in [(0.01, 1.0 / 9.0), (0.01, 0.24)] {
        let model = GluedModel::new(a, zeta)?;
        let data = GluedData::new(model, &grid)?;
        let counts = model.region_counts(&grid);
        println!(
            "a = {a}, zeta = {zeta:.4}: nodes EH/annulus/flat = {}/{}/{}; lambda = {:.15}; sup e_a = {:.3e}; min eig = {:.4}",
            counts.eguchi_hanson,
            counts.annulus,
            counts.flat,
            data.lambda,
            data.sup_ea(),
            data.omega0.min_eigenvalue().1
        );
    }
    Ok(())
}
