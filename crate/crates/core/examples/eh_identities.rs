//! Eguchi-Hanson: the hyperkähler triple, the Kähler potential and the
//! holomorphic volume form checked at a handful of points.

use kummer_k3::eguchi_hanson::*;
use kummer_k3::exterior::{ext_d, ChartPoint};

fn main() -> kummer_k3::Result<()> {
    let params = EhParams::new(1.0)?;
    let chart = params.r_chart();
    let forms = kahler_forms(&params);
    let omega = holomorphic_volume_form(&params);
    let pulled = dz1_dz2().pullback(&p_map(&params))?;

    println!("quaternion defects {:?}", quaternion_defects(&hyperkahler_triple()));
    for x in [[1.3, 0.8, 1.0, 2.0], [2.0, 1.5, 4.0, 7.0], [3.5, 2.2, 0.5, 11.0]] {
        let p = ChartPoint::new(chart, x)?;
        let closed = forms.iter().map(|w| ext_d(w, &p, 1e-4).map(|v| v.max_abs())).collect::<Result<Vec<_>, _>>()?;
        let g = eh_metric(&params, &x)?;
        let pot = potential_identity_residual(&params, &p, 1e-4)?;
        let xu = [params.u_of_r(x[0]), x[1], x[2], x[3]];
        let pb = omega.eval(&xu).max_abs_diff(&pulled.eval(&xu));
        println!(
            "r = {:.2}: |d omega_i| = {:.1e} {:.1e} {:.1e}; min eig g = {:.4}; potential {:.1e}; Omega vs P*(dz1^dz2) {:.1e}",
            x[0], closed[0], closed[1], closed[2], g.min_eigenvalue(), pot, pb
        );
    }
    for u in [0.5, 1.0, 4.0] {
        println!("Joyce potential at u = {u}: {:.12}", joyce_potential(&params, u)?);
    }
    Ok(())
}
