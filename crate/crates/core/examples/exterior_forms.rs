//! Wedge products, exterior derivatives and pullbacks on coordinate charts.

use kummer_k3::exterior::{coeff, ext_d, wedge, ChartPoint, Chart, CoefficientForm};

fn main() -> kummer_k3::Result<()> {
    let chart = Chart::Complex;
    // f = x1² y2 as a 0-form, and α = sin(x2) dx1.
    let f = CoefficientForm::scalar(chart, coeff(|x| x[0] * x[0] * x[3]));
    let alpha = CoefficientForm::differential(chart, 0).mul_fn(coeff(|x| x[2].sin()));
    let p = ChartPoint::new(chart, [0.3, -0.2, 0.7, 1.1])?;

    let df = ext_d(&f, &p, 1e-4)?;
    println!("df       = {:?}", df.components());

    let dalpha = ext_d(&alpha, &p, 1e-4)?;
    println!("d alpha  = {:?}", dalpha.components());

    // d(f α) = df ∧ α + f dα
    let fa = alpha.mul_fn(coeff(|x| x[0] * x[0] * x[3]));
    let lhs = ext_d(&fa, &p, 1e-4)?;
    let rhs = wedge(&CoefficientForm::from_covector(chart, |x| [2.0 * x[0] * x[3], 0.0, 0.0, x[0] * x[0]]), &alpha)?
        .eval(&p.coords)
        .add(&dalpha.scale(0.3f64.powi(2) * 1.1));
    println!("Leibniz defect {:.3e}", lhs.max_abs_diff(&rhs));
    Ok(())
}
