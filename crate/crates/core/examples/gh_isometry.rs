//! Two-center Gibbons-Hawking: harmonic potential, curl equation and the
//! isometry with Eguchi-Hanson through the prolate spheroidal chain.

use kummer_k3::gibbons_hawking::*;

fn main() -> kummer_k3::Result<()> {
    let c = 0.5;
    let cfg = GhConfig::two_center(c)?;
    println!("centers {:?}, charges {:?}", cfg.centers(), cfg.charges());
    for (rho, z) in [(0.4, 0.0), (1.0, 0.8), (2.5, -1.5)] {
        let p = CylPoint::new(rho, z, 0.3, 0.0);
        let curl = curl_residual(&cfg, &p, 1e-4)?;
        let lap = laplacian_residual(&cfg, &p.cartesian(), 1e-3)?;
        println!(
            "rho = {rho}, z = {z}: V = {:.6}, curl residual {:.1e}, Laplacian residual {:.1e}",
            potential_v(&cfg, &p.cartesian())?,
            curl.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            lap
        );
    }
    for x in [[1.5, 0.7, 1.0, 2.0], [3.0, 2.0, 5.0, 9.0]] {
        println!("isometry residual at r = {}: {:.3e}", x[0], isometry_residual(c, &x)?);
    }
    Ok(())
}
