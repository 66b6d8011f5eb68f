//! Multi-center Gibbons-Hawking metrics and the two-center isometry with
//! Eguchi-Hanson.
//!
//! Cylindrical coordinates are ordered `(ρ, z, φ, ψ)` and the metric is
//! `V⁻¹(dψ + A dφ)² + V(dρ² + ρ²dφ² + dz²)`, where `A` is the `dφ`
//! coefficient of the connection. For axial centers this coefficient is
//! `Σ nᵢ (z − zᵢ)/Rᵢ`, which is `ρ` times the orthonormal component returned
//! by [`connection_two_center`].

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4};

use crate::eguchi_hanson::{eh_metric, EhParams, MetricTensor};
use crate::error::{Error, Result};
use crate::exterior::{Chart, ChartMap};

/// Minimum distance from the symmetry axis for metric and curl evaluation.
pub const AXIS_MARGIN: f64 = 1e-6;

/// The pullback of the two-center metric along the prolate chain is this
/// multiple of the Eguchi-Hanson metric with `a² = 2c`.
pub const HOMOTHETY: f64 = 4.0;

/// Centers, integer charges and the constant term of `V`.
#[derive(Clone, Debug, PartialEq)]
pub struct GhConfig {
    centers: Vec<[f64; 3]>,
    charges: Vec<i32>,
    eps_gh: f64,
}

impl GhConfig {
    pub fn new(centers: Vec<[f64; 3]>, charges: Vec<i32>, eps_gh: f64) -> Result<Self> {
        if centers.len() != charges.len() || centers.is_empty() {
            return Err(Error::Config("need one charge per center".into()));
        }
        if charges.contains(&0) {
            return Err(Error::Config("charges must be nonzero".into()));
        }
        if !(eps_gh >= 0.0 && eps_gh.is_finite()) {
            return Err(Error::Config(format!("eps_gh = {eps_gh} must be nonnegative")));
        }
        for i in 0..centers.len() {
            if centers[i].iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("center {i} is not finite")));
            }
            for j in 0..i {
                if centers[i] == centers[j] {
                    return Err(Error::Config(format!("centers {j} and {i} coincide")));
                }
            }
        }
        Ok(Self {
            centers,
            charges,
            eps_gh,
        })
    }

    /// Unit charges at `(0, 0, ∓c)` with `eps_gh = 0`.
    pub fn two_center(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("offset c = {c} must be positive")));
        }
        Self::new(vec![[0.0, 0.0, -c], [0.0, 0.0, c]], vec![1, 1], 0.0)
    }

    pub fn with_eps_gh(mut self, eps_gh: f64) -> Result<Self> {
        if !(eps_gh >= 0.0 && eps_gh.is_finite()) {
            return Err(Error::Config(format!("eps_gh = {eps_gh} must be nonnegative")));
        }
        self.eps_gh = eps_gh;
        Ok(self)
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }

    pub fn charges(&self) -> &[i32] {
        &self.charges
    }

    pub fn eps_gh(&self) -> f64 {
        self.eps_gh
    }

    fn is_axial(&self) -> bool {
        self.centers.iter().all(|c| c[0] == 0.0 && c[1] == 0.0)
    }

    /// The half-separation `c` when this is the Eguchi-Hanson configuration.
    pub fn eh_offset(&self) -> Option<f64> {
        let two = self.centers.len() == 2 && self.charges == [1, 1] && self.eps_gh == 0.0;
        if two && self.is_axial() {
            let (z0, z1) = (self.centers[0][2], self.centers[1][2]);
            if z0 == -z1 && z1 > 0.0 {
                return Some(z1);
            }
        }
        None
    }
}

/// A point in cylindrical coordinates with fiber angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylPoint {
    pub rho: f64,
    pub z: f64,
    pub phi: f64,
    pub psi: f64,
}

impl CylPoint {
    pub fn new(rho: f64, z: f64, phi: f64, psi: f64) -> Self {
        Self { rho, z, phi, psi }
    }

    pub fn from_coords(x: &[f64; 4]) -> Self {
        Self::new(x[0], x[1], x[2], x[3])
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.rho, self.z, self.phi, self.psi]
    }

    pub fn cartesian(&self) -> [f64; 3] {
        [self.rho * self.phi.cos(), self.rho * self.phi.sin(), self.z]
    }
}

fn dist(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt()
}

/// `V(x) = eps_gh + Σ nᵢ/|x − xᵢ|`.
pub fn potential_v(cfg: &GhConfig, x: &[f64; 3]) -> Result<f64> {
    let mut v = cfg.eps_gh;
    for (i, (c, n)) in cfg.centers.iter().zip(&cfg.charges).enumerate() {
        let r = dist(x, c);
        if r == 0.0 {
            return Err(Error::Pole(i));
        }
        v += f64::from(*n) / r;
    }
    Ok(v)
}

/// Orthonormal `φ̂` component of the two-center connection,
/// `((z + c)/(ρR₁) + (z − c)/(ρR₂))`.
pub fn connection_two_center(c: f64, p: &CylPoint) -> Result<f64> {
    if !(p.rho > 0.0) {
        return Err(Error::Axis(p.rho));
    }
    let r1 = (p.rho * p.rho + (p.z + c).powi(2)).sqrt();
    let r2 = (p.rho * p.rho + (p.z - c).powi(2)).sqrt();
    if r1 == 0.0 {
        return Err(Error::Pole(0));
    }
    if r2 == 0.0 {
        return Err(Error::Pole(1));
    }
    Ok((p.z + c) / (p.rho * r1) + (p.z - c) / (p.rho * r2))
}

/// The `dφ` coefficient `Σ nᵢ (z − zᵢ)/Rᵢ` for axial centers.
pub fn connection_coefficient(cfg: &GhConfig, rho: f64, z: f64) -> Result<f64> {
    if !cfg.is_axial() {
        return Err(Error::Config(
            "the connection is only implemented for centers on the z-axis".into(),
        ));
    }
    let mut a = 0.0;
    for (i, (c, n)) in cfg.centers.iter().zip(&cfg.charges).enumerate() {
        let r = (rho * rho + (z - c[2]).powi(2)).sqrt();
        if r == 0.0 {
            return Err(Error::Pole(i));
        }
        a += f64::from(*n) * (z - c[2]) / r;
    }
    Ok(a)
}

fn connection_vector(cfg: &GhConfig, x: &[f64; 3]) -> Result<[f64; 3]> {
    let rho2 = x[0] * x[0] + x[1] * x[1];
    let coef = connection_coefficient(cfg, rho2.sqrt(), x[2])?;
    Ok([-coef * x[1] / rho2, coef * x[0] / rho2, 0.0])
}

fn check_curl_point(cfg: &GhConfig, p: &CylPoint, h: f64) -> Result<()> {
    if p.rho < h + AXIS_MARGIN {
        return Err(Error::Axis(p.rho));
    }
    let x = p.cartesian();
    for (i, c) in cfg.centers.iter().enumerate() {
        if dist(&x, c) < 2.0 * h {
            return Err(Error::Pole(i));
        }
    }
    Ok(())
}

/// `∇×A − ∇V` by central differences in Cartesian coordinates.
pub fn curl_residual(cfg: &GhConfig, p: &CylPoint, h: f64) -> Result<[f64; 3]> {
    curl_residual_with_gauge(cfg, p, h, &|_| [0.0; 3])
}

/// As [`curl_residual`] with `A` replaced by `A + grad_f`.
pub fn curl_residual_with_gauge(
    cfg: &GhConfig,
    p: &CylPoint,
    h: f64,
    grad_f: &dyn Fn(&[f64; 3]) -> [f64; 3],
) -> Result<[f64; 3]> {
    check_curl_point(cfg, p, h)?;
    let x = p.cartesian();
    let field = |y: &[f64; 3]| -> Result<[f64; 3]> {
        let a = connection_vector(cfg, y)?;
        let g = grad_f(y);
        Ok([a[0] + g[0], a[1] + g[1], a[2] + g[2]])
    };
    // jac[i][j] = ∂_j A_i
    let mut jac = [[0.0; 3]; 3];
    let mut grad_v = [0.0; 3];
    for j in 0..3 {
        let (mut xp, mut xm) = (x, x);
        xp[j] += h;
        xm[j] -= h;
        let (ap, am) = (field(&xp)?, field(&xm)?);
        for i in 0..3 {
            jac[i][j] = (ap[i] - am[i]) / (2.0 * h);
        }
        grad_v[j] = (potential_v(cfg, &xp)? - potential_v(cfg, &xm)?) / (2.0 * h);
    }
    let curl = [
        jac[2][1] - jac[1][2],
        jac[0][2] - jac[2][0],
        jac[1][0] - jac[0][1],
    ];
    Ok([curl[0] - grad_v[0], curl[1] - grad_v[1], curl[2] - grad_v[2]])
}

/// Fourth-order five-point-per-axis Laplacian of `V` at `x`.
pub fn laplacian_residual(cfg: &GhConfig, x: &[f64; 3], h: f64) -> Result<f64> {
    for (i, c) in cfg.centers.iter().enumerate() {
        if dist(x, c) <= 2.0 * h {
            return Err(Error::Pole(i));
        }
    }
    let v0 = potential_v(cfg, x)?;
    let mut lap = 0.0;
    for j in 0..3 {
        let at = |s: f64| {
            let mut y = *x;
            y[j] += s * h;
            potential_v(cfg, &y)
        };
        lap += (-at(2.0)? + 16.0 * at(1.0)? - 30.0 * v0 + 16.0 * at(-1.0)? - at(-2.0)?)
            / (12.0 * h * h);
    }
    Ok(lap)
}

/// The metric in `(ρ, z, φ, ψ)`.
pub fn gh_metric(cfg: &GhConfig, x: &[f64; 4]) -> Result<MetricTensor> {
    let p = CylPoint::from_coords(x);
    if !(p.rho > AXIS_MARGIN) {
        return Err(Error::Axis(p.rho));
    }
    let v = potential_v(cfg, &p.cartesian())?;
    if !(v > 0.0) {
        return Err(Error::Domain(format!("V = {v} is not positive")));
    }
    let a = connection_coefficient(cfg, p.rho, p.z)?;
    let mut g = Matrix4::zeros();
    g[(0, 0)] = v;
    g[(1, 1)] = v;
    g[(2, 2)] = a * a / v + v * p.rho * p.rho;
    g[(3, 3)] = 1.0 / v;
    g[(2, 3)] = a / v;
    g[(3, 2)] = a / v;
    MetricTensor::new(Chart::Cylindrical, g)
}

/// Intermediate and final points of the prolate chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProlateChain {
    /// `(ρ, z, φ, ψ)`.
    pub cylinder: [f64; 4],
    /// Distances to the centers at `z = −c` and `z = +c`.
    pub r1: f64,
    pub r2: f64,
    /// `(r, θ, φ, ϕ)` with `a = √(2c)`.
    pub eh: [f64; 4],
}

fn wrap(x: f64, period: f64) -> f64 {
    let y = x.rem_euclid(period);
    if y == 0.0 {
        period
    } else {
        y
    }
}

/// Maps `(μ, ν, φ, ψ)` through cylindrical coordinates to the r-chart.
pub fn prolate_chain(c: f64, q: &[f64; 4]) -> Result<ProlateChain> {
    if !(c > 0.0) {
        return Err(Error::Config(format!("offset c = {c} must be positive")));
    }
    let (mu, nu, phi, psi) = (q[0], q[1], q[2], q[3]);
    if !(mu > 1.0) {
        return Err(Error::Domain(format!("mu = {mu} must exceed 1 (bolt)")));
    }
    if !(nu.abs() < 1.0) {
        return Err(Error::Axis(nu));
    }
    let rho = c * ((mu * mu - 1.0) * (1.0 - nu * nu)).sqrt();
    let z = c * mu * nu;
    let r1 = (rho * rho + (z + c).powi(2)).sqrt();
    let r2 = (rho * rho + (z - c).powi(2)).sqrt();
    let (mu2, nu2) = ((r1 + r2) / (2.0 * c), (r1 - r2) / (2.0 * c));
    let eh = [
        (2.0 * c * mu2).sqrt(),
        nu2.clamp(-1.0, 1.0).acos(),
        wrap(0.5 * psi, 2.0 * PI),
        phi,
    ];
    Ok(ProlateChain {
        cylinder: [rho, z, phi, psi],
        r1,
        r2,
        eh,
    })
}

/// `(r, θ, φ, ϕ) ↦ (μ, ν, φ_gh, ψ) = (r²/2c, cos θ, ϕ, 2φ)`.
pub fn eh_to_prolate(c: f64, x: &[f64; 4]) -> [f64; 4] {
    [x[0] * x[0] / (2.0 * c), x[1].cos(), wrap(x[3], 2.0 * PI), 2.0 * x[2]]
}

/// The map from the r-chart (`a = √(2c)`) to cylindrical coordinates.
pub fn eh_to_cylindrical(c: f64) -> ChartMap {
    let a = (2.0 * c).sqrt();
    ChartMap::new(Chart::EhR { a }, Chart::Cylindrical, move |x| {
        let q = eh_to_prolate(c, x);
        let (mu, nu) = (q[0], q[1]);
        [
            c * ((mu * mu - 1.0) * (1.0 - nu * nu)).sqrt(),
            c * mu * nu,
            q[2],
            q[3],
        ]
    })
    .with_jacobian(move |x| {
        let (r, th) = (x[0], x[1]);
        let mu = r * r / (2.0 * c);
        let s = (mu * mu - 1.0).sqrt();
        let mut m = Matrix4::zeros();
        m[(0, 0)] = mu * r * th.sin() / s;
        m[(0, 1)] = c * s * th.cos();
        m[(1, 0)] = r * th.cos();
        m[(1, 1)] = -c * mu * th.sin();
        m[(2, 3)] = 1.0;
        m[(3, 2)] = 2.0;
        m
    })
}

/// `max |P*g_GH / 4 − g_EH|` at an r-chart point, `a² = 2c`.
pub fn isometry_residual(c: f64, x: &[f64; 4]) -> Result<f64> {
    let cfg = GhConfig::two_center(c)?;
    let params = EhParams::new((2.0 * c).sqrt())?;
    params.check_r(x[0])?;
    let map = eh_to_cylindrical(c);
    let y = map.map_coords(x);
    let jac = map.checked_jacobian(x)?;
    let pulled = gh_metric(&cfg, &y)?.pullback(&jac, params.r_chart());
    let scaled = MetricTensor::new(params.r_chart(), pulled.components() / HOMOTHETY)?;
    Ok(scaled.max_abs_diff(&eh_metric(&params, x)?))
}

/// Flat metric `dx²` in `(μ, ν, φ)` as displayed in closed form.
pub fn prolate_flat_metric(c: f64, mu: f64, nu: f64) -> Matrix3<f64> {
    let w = c * c * (mu * mu - nu * nu);
    Matrix3::from_diagonal(&nalgebra::Vector3::new(
        w / (mu * mu - 1.0),
        w / (1.0 - nu * nu),
        c * c * (mu * mu - 1.0) * (1.0 - nu * nu),
    ))
}

/// Flat metric in `(μ, ν, φ)` from the jacobian of the map to Cartesian space.
pub fn prolate_flat_metric_numeric(c: f64, mu: f64, nu: f64, phi: f64) -> Matrix3<f64> {
    let cart = |q: [f64; 3]| {
        let rho = c * ((q[0] * q[0] - 1.0) * (1.0 - q[1] * q[1])).sqrt();
        [rho * q[2].cos(), rho * q[2].sin(), c * q[0] * q[1]]
    };
    let h = 1e-6;
    let q0 = [mu, nu, phi];
    let mut jac = Matrix3::zeros();
    for j in 0..3 {
        let (mut qp, mut qm) = (q0, q0);
        qp[j] += h;
        qm[j] -= h;
        let (p, m) = (cart(qp), cart(qm));
        for i in 0..3 {
            jac[(i, j)] = (p[i] - m[i]) / (2.0 * h);
        }
    }
    jac.transpose() * jac
}
