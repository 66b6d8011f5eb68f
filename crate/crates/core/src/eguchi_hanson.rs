//! The Eguchi-Hanson space.
//!
//! Coordinates are `(r, θ, φ, ϕ)` in the r-chart and `(u, θ, φ, ϕ)` in the
//! u-chart, `u⁴ = r⁴ − a⁴`. The left-invariant forms carry a factor ½ so that
//! `dσ₁ = 2σ₂∧σ₃` and cyclically.
//!
//! Complex structures act on the orthonormal coframe `e₀ = dr/√f, e₁ = rσ₁,
//! e₂ = rσ₂, e₃ = r√f σ₃` by their tables, e.g. `I(e₀) = e₃`. The same tables
//! act on the dual vector frame, so `ω_X(u, v) = g(Xu, v)`. On 1-forms the
//! pullback `α ↦ α∘X` is the transposed table; in that representation the
//! quaternion relations read `IJ = −K` and the potential identity reads
//! `ω_I = −½ d(dφ_a∘I)`.

use std::f64::consts::PI;

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;

pub use crate::curvature::ricci_residual;
use crate::error::{Error, Result};
use crate::exterior::{
    coeff, d, dz, precompose, wedge, Chart, ChartMap, ChartPoint, CoefficientForm, Coframe,
    ComplexForm, ComplexStructure, FormValue,
};

/// Identifier of the orthonormal coframe.
pub const EH_FRAME: &str = "eh-orthonormal";

/// The deformation parameter `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EhParams {
    a: f64,
}

impl EhParams {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("a must be positive, got {a}")));
        }
        Ok(Self { a })
    }

    /// The `a = 0` limit, the flat cone `C²/±1`.
    pub fn flat() -> Self {
        Self { a: 0.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn r_chart(&self) -> Chart {
        Chart::EhR { a: self.a }
    }

    pub fn u_chart(&self) -> Chart {
        Chart::EhU { a: self.a }
    }

    /// `f = 1 − a⁴/r⁴`.
    pub fn f(&self, r: f64) -> f64 {
        1.0 - self.a.powi(4) / r.powi(4)
    }

    pub fn check_r(&self, r: f64) -> Result<()> {
        if r > self.a && r.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("r = {r} is not above the bolt radius a = {}", self.a)))
        }
    }

    pub fn check_u(&self, u: f64) -> Result<()> {
        if u > 0.0 && u.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("u = {u} must be positive")))
        }
    }

    pub fn r_of_u(&self, u: f64) -> f64 {
        (u.powi(4) + self.a.powi(4)).powf(0.25)
    }

    pub fn u_of_r(&self, r: f64) -> f64 {
        (r.powi(4) - self.a.powi(4)).powf(0.25)
    }
}

/// Symmetric metric components in a chart's coordinate basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricTensor {
    chart: Chart,
    g: Matrix4<f64>,
}

impl MetricTensor {
    pub fn new(chart: Chart, g: Matrix4<f64>) -> Result<Self> {
        let scale = g.amax().max(1.0);
        if (g - g.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Domain("metric components are not symmetric".into()));
        }
        Ok(Self { chart, g })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn components(&self) -> &Matrix4<f64> {
        &self.g
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.g).eigenvalues.min()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g.cholesky().is_some()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.g - other.g).amax()
    }

    /// `Jᵀ g J` for a map into this chart with jacobian `jac` out of `source`.
    pub fn pullback(&self, jac: &Matrix4<f64>, source: Chart) -> Self {
        let g = jac.transpose() * self.g * jac;
        Self {
            chart: source,
            g: 0.5 * (g + g.transpose()),
        }
    }
}

fn outer(p: &[f64; 4], q: &[f64; 4]) -> Matrix4<f64> {
    let (p, q) = (Vector4::from(*p), Vector4::from(*q));
    0.5 * (p * q.transpose() + q * p.transpose())
}

/// Coordinate components of `σ₁, σ₂, σ₃` at `(·, θ, φ, ϕ)`.
pub fn sigma_covectors(x: &[f64; 4]) -> [[f64; 4]; 3] {
    let (th, vp) = (x[1], x[3]);
    [
        [0.0, -0.5 * vp.cos(), -0.5 * th.sin() * vp.sin(), 0.0],
        [0.0, 0.5 * vp.sin(), -0.5 * th.sin() * vp.cos(), 0.0],
        [0.0, 0.0, -0.5 * th.cos(), -0.5],
    ]
}

/// `σ₁, σ₂, σ₃` as forms on an Eguchi-Hanson chart.
pub fn sigma_forms(chart: Chart) -> Result<[CoefficientForm; 3]> {
    sigma_forms_with_sign(chart, 1.0)
}

/// As [`sigma_forms`] with `σ₂` multiplied by `sigma2_sign`; used for mutation tests.
pub fn sigma_forms_with_sign(chart: Chart, sigma2_sign: f64) -> Result<[CoefficientForm; 3]> {
    match chart {
        Chart::EhR { .. } | Chart::EhU { .. } => {}
        other => {
            return Err(Error::ChartMismatch(format!(
                "sigma forms live on Eguchi-Hanson charts, not {other}"
            )))
        }
    }
    let s = |i: usize, k: f64| {
        CoefficientForm::from_covector(chart, move |x| sigma_covectors(x)[i].map(|c| k * c))
    };
    Ok([s(0, 1.0), s(1, sigma2_sign), s(2, 1.0)])
}

/// The orthonormal coframe on the r-chart.
pub fn coframe(params: &EhParams) -> Coframe {
    let p = *params;
    Coframe::new(EH_FRAME, p.r_chart(), move |x| {
        let r = x[0];
        let sf = p.f(r).sqrt();
        let s = sigma_covectors(x);
        let mut m = Matrix4::zeros();
        m[(0, 0)] = 1.0 / sf;
        for j in 0..4 {
            m[(1, j)] = r * s[0][j];
            m[(2, j)] = r * s[1][j];
            m[(3, j)] = r * sf * s[2][j];
        }
        m
    })
}

/// The structures `I, J, K` on the orthonormal coframe.
pub fn hyperkahler_triple() -> [ComplexStructure; 3] {
    let i = ComplexStructure::from_table(EH_FRAME, [(3, 1.0), (2, 1.0), (1, -1.0), (0, -1.0)]);
    let j = ComplexStructure::from_table(EH_FRAME, [(1, 1.0), (0, -1.0), (3, 1.0), (2, -1.0)]);
    let k = ComplexStructure::from_table(EH_FRAME, [(2, 1.0), (3, -1.0), (0, -1.0), (1, 1.0)]);
    [
        i.expect("I squares to -1"),
        j.expect("J squares to -1"),
        k.expect("K squares to -1"),
    ]
}

/// Defects of `I² = J² = K² = −1` and `IJ = −K, JK = −I, KI = −J`.
///
/// Products are taken in the pullback representation on 1-forms.
pub fn quaternion_defects(triple: &[ComplexStructure; 3]) -> [f64; 6] {
    let m: Vec<Matrix4<f64>> = triple.iter().map(|s| s.precompose_matrix()).collect();
    let id = Matrix4::<f64>::identity();
    [
        (m[0] * m[0] + id).amax(),
        (m[1] * m[1] + id).amax(),
        (m[2] * m[2] + id).amax(),
        (m[0] * m[1] + m[2]).amax(),
        (m[1] * m[2] + m[0]).amax(),
        (m[2] * m[0] + m[1]).amax(),
    ]
}

/// The metric in the r-chart.
pub fn eh_metric(params: &EhParams, x: &[f64; 4]) -> Result<MetricTensor> {
    params.check_r(x[0])?;
    let r = x[0];
    let f = params.f(r);
    let s = sigma_covectors(x);
    let mut g = Matrix4::zeros();
    g[(0, 0)] = 1.0 / f;
    g += r * r * (outer(&s[0], &s[0]) + outer(&s[1], &s[1]) + f * outer(&s[2], &s[2]));
    MetricTensor::new(params.r_chart(), g)
}

/// The metric in the u-chart.
pub fn eh_metric_u_chart(params: &EhParams, x: &[f64; 4]) -> Result<MetricTensor> {
    params.check_u(x[0])?;
    let u = x[0];
    let r = params.r_of_u(u);
    let s = sigma_covectors(x);
    let mut g = Matrix4::zeros();
    g[(0, 0)] = u * u / (r * r);
    g += r * r * (outer(&s[0], &s[0]) + outer(&s[1], &s[1]));
    g += u.powi(4) / (r * r) * outer(&s[2], &s[2]);
    MetricTensor::new(params.u_chart(), g)
}

/// `(r, ·) ↦ (u, ·)` with `du/dr = r³/u³`.
pub fn r_to_u_map(params: &EhParams) -> ChartMap {
    let (p, q) = (*params, *params);
    ChartMap::new(params.r_chart(), params.u_chart(), move |x| {
        [p.u_of_r(x[0]), x[1], x[2], x[3]]
    })
    .with_jacobian(move |x| {
        let mut m = Matrix4::identity();
        m[(0, 0)] = x[0].powi(3) / q.u_of_r(x[0]).powi(3);
        m
    })
}

/// `(u, ·) ↦ (r, ·)` with `dr/du = u³/r³`.
pub fn u_to_r_map(params: &EhParams) -> ChartMap {
    let (p, q) = (*params, *params);
    ChartMap::new(params.u_chart(), params.r_chart(), move |x| {
        [p.r_of_u(x[0]), x[1], x[2], x[3]]
    })
    .with_jacobian(move |x| {
        let mut m = Matrix4::identity();
        m[(0, 0)] = x[0].powi(3) / q.r_of_u(x[0]).powi(3);
        m
    })
}

/// Metric coefficients near the bolt at `r² = a² + ρ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoltCoefficients {
    /// Coefficient of `dθ² + sin²θ dφ²`, `r²/4`.
    pub round: f64,
    /// Coefficient of `(dϕ + cosθ dφ)²`, `r² f / 4`.
    pub fiber: f64,
    /// Coefficient of `dρ²`.
    pub radial: f64,
}

pub fn bolt_coefficients(params: &EhParams, rho: f64) -> Result<BoltCoefficients> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho = {rho} must be positive")));
    }
    let a2 = params.a * params.a;
    let r2 = a2 + rho * rho;
    // r⁴ − a⁴ = ρ²(2a² + ρ²), kept factored to avoid cancellation.
    let fiber = rho * rho * (2.0 * a2 + rho * rho) / (4.0 * r2);
    let radial = r2 / (2.0 * a2 + rho * rho);
    Ok(BoltCoefficients {
        round: r2 / 4.0,
        fiber,
        radial,
    })
}

/// Limits of `round`, `fiber/ρ²` and `radial` as `ρ → 0`, by Richardson
/// extrapolation in `ρ²` from the two given radii.
pub fn bolt_limit(params: &EhParams, rho1: f64, rho2: f64) -> Result<(f64, f64, f64)> {
    let (c1, c2) = (bolt_coefficients(params, rho1)?, bolt_coefficients(params, rho2)?);
    let (s1, s2) = (rho1 * rho1, rho2 * rho2);
    let ex = |q1: f64, q2: f64| (q2 * s1 - q1 * s2) / (s1 - s2);
    Ok((
        ex(c1.round, c2.round),
        ex(c1.fiber / s1, c2.fiber / s2),
        ex(c1.radial, c2.radial),
    ))
}

/// Truncated series in `ε = a⁴/r⁴`: `g_rr = Σ_{k≤order} εᵏ`.
///
/// Order 0 is the flat metric. From order 1 on, the angular part is exact,
/// since it is linear in `ε`.
pub fn metric_series(params: &EhParams, x: &[f64; 4], order: usize) -> Result<MetricTensor> {
    params.check_r(x[0])?;
    let r = x[0];
    let eps = params.a.powi(4) / r.powi(4);
    let grr: f64 = (0..=order).map(|k| eps.powi(k as i32)).sum();
    let fiber = if order == 0 { 1.0 } else { 1.0 - eps };
    let s = sigma_covectors(x);
    let mut g = Matrix4::zeros();
    g[(0, 0)] = grr;
    g += r * r * (outer(&s[0], &s[0]) + outer(&s[1], &s[1]) + fiber * outer(&s[2], &s[2]));
    MetricTensor::new(params.r_chart(), g)
}

/// `(ω_I, ω_J, ω_K)` on the r-chart.
pub fn kahler_forms(params: &EhParams) -> [CoefficientForm; 3] {
    let chart = params.r_chart();
    let [s1, s2, s3] = sigma_forms(chart).expect("r-chart");
    let dr = CoefficientForm::differential(chart, 0);
    let p = *params;
    let r = coeff(|x| x[0]);
    let r2 = coeff(|x| x[0] * x[0]);
    let r_over = coeff(move |x| x[0] / p.f(x[0]).sqrt());
    let r2_sqrt = coeff(move |x| x[0] * x[0] * p.f(x[0]).sqrt());
    let w = |a: &CoefficientForm, b: &CoefficientForm| wedge(a, b).expect("same chart, degree 2");
    let omega_i = w(&dr, &s3).mul_fn(r).add(&w(&s1, &s2).mul_fn(r2)).expect("2-forms");
    let omega_j = w(&dr, &s1)
        .mul_fn(r_over.clone())
        .add(&w(&s2, &s3).mul_fn(r2_sqrt.clone()))
        .expect("2-forms");
    let omega_k = w(&dr, &s2)
        .mul_fn(r_over)
        .add(&w(&s3, &s1).mul_fn(r2_sqrt))
        .expect("2-forms");
    [omega_i, omega_j, omega_k]
}

/// Kähler forms evaluated at a validated r-chart point.
pub fn kahler_forms_at(params: &EhParams, p: &ChartPoint) -> Result<[FormValue; 3]> {
    if p.chart != params.r_chart() {
        return Err(Error::ChartMismatch(format!("expected eh-r point, got {}", p.chart)));
    }
    let forms = kahler_forms(params);
    Ok(forms.map(|f| f.eval(&p.coords)))
}

/// `(ω_I, ω_J, ω_K)` on the u-chart.
pub fn kahler_forms_u(params: &EhParams) -> [CoefficientForm; 3] {
    let chart = params.u_chart();
    let [s1, s2, s3] = sigma_forms(chart).expect("u-chart");
    let du = CoefficientForm::differential(chart, 0);
    let p = *params;
    let w = |a: &CoefficientForm, b: &CoefficientForm| wedge(a, b).expect("same chart, degree 2");
    let u = coeff(|x| x[0]);
    let u2 = coeff(|x| x[0] * x[0]);
    let omega_i = w(&du, &s3)
        .mul_fn(coeff(move |x| x[0].powi(3) / p.r_of_u(x[0]).powi(2)))
        .add(&w(&s1, &s2).mul_fn(coeff(move |x| p.r_of_u(x[0]).powi(2))))
        .expect("2-forms");
    let omega_j = w(&du, &s1)
        .mul_fn(u.clone())
        .add(&w(&s2, &s3).mul_fn(u2.clone()))
        .expect("2-forms");
    let omega_k = w(&du, &s2).mul_fn(u).add(&w(&s3, &s1).mul_fn(u2)).expect("2-forms");
    [omega_i, omega_j, omega_k]
}

/// `φ_a(r) = r²/2 + (a²/4) log((r² − a²)/(r² + a²))`.
pub fn kahler_potential(params: &EhParams, r: f64) -> Result<f64> {
    params.check_r(r)?;
    let a2 = params.a * params.a;
    if a2 == 0.0 {
        return Ok(0.5 * r * r);
    }
    let arg = (r * r - a2) / (r * r + a2);
    if !(arg > 0.0) {
        return Err(Error::Domain(format!("log argument {arg} is not positive")));
    }
    Ok(0.5 * r * r + 0.25 * a2 * arg.ln())
}

/// `φ_a` in terms of `u`, with `r² = √(u⁴ + a⁴)`.
pub fn kahler_potential_u(params: &EhParams, u: f64) -> Result<f64> {
    params.check_u(u)?;
    let a2 = params.a * params.a;
    let big_r = (u.powi(4) + a2 * a2).sqrt();
    if a2 == 0.0 {
        return Ok(0.5 * big_r);
    }
    // r² − a² = u⁴/(r² + a²) avoids cancellation near the bolt.
    let arg = u.powi(4) / ((big_r + a2) * (big_r + a2));
    Ok(0.5 * big_r + 0.25 * a2 * arg.ln())
}

/// `dφ_a/dr = r⁵/(r⁴ − a⁴)`.
pub fn kahler_potential_derivative(params: &EhParams, r: f64) -> Result<f64> {
    params.check_r(r)?;
    Ok(r.powi(5) / (r.powi(4) - params.a.powi(4)))
}

/// `√(u⁴ + a⁴) − a² log((√(u⁴ + a⁴) + a²)/u²)`.
pub fn joyce_potential(params: &EhParams, u: f64) -> Result<f64> {
    params.check_u(u)?;
    let a2 = params.a * params.a;
    let big_r = (u.powi(4) + a2 * a2).sqrt();
    if a2 == 0.0 {
        return Ok(big_r);
    }
    Ok(big_r - a2 * ((big_r + a2) / (u * u)).ln())
}

/// `|2φ_a(u) − φ̂(u)|`.
pub fn joyce_potential_check(params: &EhParams, u: f64) -> Result<f64> {
    Ok((2.0 * kahler_potential_u(params, u)? - joyce_potential(params, u)?).abs())
}

/// The potential as a 0-form on the r-chart.
pub fn potential_form(params: &EhParams) -> CoefficientForm {
    let p = *params;
    CoefficientForm::scalar(
        params.r_chart(),
        coeff(move |x| kahler_potential(&p, x[0]).unwrap_or(f64::NAN)),
    )
}

/// `max |−½ d(dφ_a∘I) − ω_I|` at `p`, all derivatives numerical with step `h`.
pub fn potential_identity_residual(params: &EhParams, p: &ChartPoint, h: f64) -> Result<f64> {
    p.chart.check_margin(&p.coords, 2.0 * h)?;
    let dphi = d(&potential_form(params), h)?;
    let [i, _, _] = hyperkahler_triple();
    let twisted = precompose(&i, &dphi, &coframe(params))?;
    let lhs = crate::exterior::ext_d(&twisted, p, h)?.scale(-0.5);
    let [omega_i, _, _] = kahler_forms_at(params, p)?;
    Ok(lhs.max_abs_diff(&omega_i))
}

/// `Ω = ω_J + iω_K` on the u-chart.
pub fn holomorphic_volume_form(params: &EhParams) -> ComplexForm {
    let [_, omega_j, omega_k] = kahler_forms_u(params);
    ComplexForm::new(omega_j, omega_k).expect("same chart and degree")
}

fn p_forward(x: &[f64; 4]) -> [Complex64; 2] {
    let (u, th, ph, vp) = (x[0], x[1], x[2], x[3]);
    let z1 = Complex64::from_polar(u * (0.5 * th).sin(), 0.5 * (ph - vp));
    let z2 = Complex64::from_polar(u * (0.5 * th).cos(), -0.5 * (ph + vp));
    [z1, z2]
}

/// `P: (u, θ, φ, ϕ) ↦ (z₁, z₂)`, `z₁ = u sin(θ/2) e^{i(φ−ϕ)/2}`,
/// `z₂ = u cos(θ/2) e^{−i(φ+ϕ)/2}`.
///
/// With this orientation `P*(dz₁∧dz₂) = ω_J + iω_K` and `i∂∂̄φ_a = ω_I`.
pub fn p_map(params: &EhParams) -> ChartMap {
    ChartMap::new(params.u_chart(), Chart::Complex, |x| {
        let [z1, z2] = p_forward(x);
        [z1.re, z1.im, z2.re, z2.im]
    })
    .with_jacobian(|x| {
        let (u, th, ph, vp) = (x[0], x[1], x[2], x[3]);
        let [z1, z2] = p_forward(x);
        let i = Complex64::i();
        let (s, c) = ((0.5 * th).sin(), (0.5 * th).cos());
        let e1 = Complex64::from_polar(1.0, 0.5 * (ph - vp));
        let e2 = Complex64::from_polar(1.0, -0.5 * (ph + vp));
        let cols1 = [e1 * s, e1 * (0.5 * u * c), z1 * (0.5 * i), z1 * (-0.5 * i)];
        let cols2 = [e2 * c, e2 * (-0.5 * u * s), z2 * (-0.5 * i), z2 * (-0.5 * i)];
        let mut m = Matrix4::zeros();
        for j in 0..4 {
            m[(0, j)] = cols1[j].re;
            m[(1, j)] = cols1[j].im;
            m[(2, j)] = cols2[j].re;
            m[(3, j)] = cols2[j].im;
        }
        m
    })
}

/// The complex chart exactly as first written down,
/// `z₁ = u cos(θ/2) e^{i(ϕ+φ)/2}`, `z₂ = u sin(θ/2) e^{i(ϕ−φ)/2}`.
///
/// Kept for comparison: it pulls `dz₁∧dz₂` back to a form that is not
/// `ω_J + iω_K`.
pub fn p_map_as_printed(params: &EhParams) -> ChartMap {
    ChartMap::new(params.u_chart(), Chart::Complex, |x| {
        let (u, th, ph, vp) = (x[0], x[1], x[2], x[3]);
        let z1 = Complex64::from_polar(u * (0.5 * th).cos(), 0.5 * (vp + ph));
        let z2 = Complex64::from_polar(u * (0.5 * th).sin(), 0.5 * (vp - ph));
        [z1.re, z1.im, z2.re, z2.im]
    })
}

fn wrap(x: f64, period: f64) -> f64 {
    let y = x.rem_euclid(period);
    if y == 0.0 {
        period
    } else {
        y
    }
}

/// Inverse of [`p_map`] onto the fundamental domain `θ ∈ (0, π]`,
/// `φ ∈ (0, 2π]`, `ϕ ∈ (0, 4π]`.
pub fn p_inverse(z: &[f64; 4]) -> Result<[f64; 4]> {
    let z1 = Complex64::new(z[0], z[1]);
    let z2 = Complex64::new(z[2], z[3]);
    let u = (z1.norm_sqr() + z2.norm_sqr()).sqrt();
    if !(u > 0.0) {
        return Err(Error::Domain("P is undefined at the origin".into()));
    }
    if z1.norm() == 0.0 || z2.norm() == 0.0 {
        return Err(Error::Domain("angles undefined on the coordinate axes".into()));
    }
    let th = 2.0 * z1.norm().atan2(z2.norm());
    let ph = wrap(z1.arg() - z2.arg(), 2.0 * PI);
    let vp = wrap(ph - 2.0 * z1.arg(), 4.0 * PI);
    Ok([u, th, ph, vp])
}

/// Largest defect in the expressions of `du, σ₁, σ₂, σ₃` through
/// `z, dz, dz̄` at the complex-chart point `z`.
pub fn sigma_complex_relations(params: &EhParams, z: &[f64; 4]) -> Result<f64> {
    let x = p_inverse(z)?;
    let jac = p_map(params).checked_jacobian(&x)?;
    let zz = [Complex64::new(z[0], z[1]), Complex64::new(z[2], z[3])];
    let dzv: [[Complex64; 4]; 2] = std::array::from_fn(|j| {
        std::array::from_fn(|c| Complex64::new(jac[(2 * j, c)], jac[(2 * j + 1, c)]))
    });
    let u = x[0];
    let i = Complex64::i();
    let comb = |f: &dyn Fn(usize) -> Complex64| -> [Complex64; 4] { std::array::from_fn(f) };
    let du = comb(&|c| {
        (zz[0].conj() * dzv[0][c] + zz[0] * dzv[0][c].conj() + zz[1].conj() * dzv[1][c]
            + zz[1] * dzv[1][c].conj())
            / (2.0 * u)
    });
    let s1 = comb(&|c| {
        -(zz[1] * dzv[0][c] - zz[0] * dzv[1][c] + zz[1].conj() * dzv[0][c].conj()
            - zz[0].conj() * dzv[1][c].conj())
            / (2.0 * u * u)
    });
    let s2 = comb(&|c| {
        i * (zz[1] * dzv[0][c] - zz[0] * dzv[1][c] - zz[1].conj() * dzv[0][c].conj()
            + zz[0].conj() * dzv[1][c].conj())
            / (2.0 * u * u)
    });
    let s3 = comb(&|c| {
        -i * (zz[0].conj() * dzv[0][c] - zz[0] * dzv[0][c].conj() + zz[1].conj() * dzv[1][c]
            - zz[1] * dzv[1][c].conj())
            / (2.0 * u * u)
    });
    let sig = sigma_covectors(&x);
    let mut worst: f64 = 0.0;
    for c in 0..4 {
        let du_ref = if c == 0 { 1.0 } else { 0.0 };
        worst = worst
            .max((du[c] - du_ref).norm())
            .max((s1[c] - sig[0][c]).norm())
            .max((s2[c] - sig[1][c]).norm())
            .max((s3[c] - sig[2][c]).norm());
    }
    Ok(worst)
}

/// `dz₁∧dz₂` on the complex chart.
pub fn dz1_dz2() -> ComplexForm {
    dz(0).wedge(&dz(1)).expect("degree 2")
}
