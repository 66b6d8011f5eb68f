//! The Kummer construction on the unit torus `T⁴ = C²/Z⁴`.
//!
//! Torus points are stored as `[Re z₁, Im z₁, Re z₂, Im z₂]` in `[0, 1)⁴`.
//! Grid nodes sit at cell centres `(k + ½)/N`, so no node coincides with one
//! of the 16 fixed points of `z ↦ −z`, where the Eguchi-Hanson potential is
//! singular. The involution maps node `k` to node `N − 1 − k` on every axis.
//!
//! The glued form is
//! `ω₀ = ω_flat + i Σᵢ ∂∂̄(β(|z − pᵢ|) Gᵢ)` with `Gᵢ = φ_a(u) − u²/2` written
//! in terms of `u = |z − pᵢ|`. Near each site it is radial, so its
//! coefficients follow from the first two derivatives of `Φ(s)`, `s = u²`,
//! which are computed with second-order dual numbers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use num_dual::{second_derivative, DualNum};
use serde::{Deserialize, Serialize};

use crate::eguchi_hanson::p_inverse;
use crate::error::{Error, Result};
use crate::exterior::{Chart, ChartMap, Herm2};

/// Number of fixed points of the involution.
pub const NUM_SITES: usize = 16;

/// Default gluing radius.
pub const DEFAULT_ZETA: f64 = 1.0 / 9.0;

fn reduce_coord(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Reduces a point to the fundamental domain `[0, 1)⁴`.
pub fn reduce(x: &[f64; 4]) -> [f64; 4] {
    x.map(reduce_coord)
}

/// `x ↦ −x mod Z⁴`.
pub fn involution(x: &[f64; 4]) -> [f64; 4] {
    reduce(&x.map(|v| -v))
}

/// The involution as a map on the complex chart (the identity on `C²`
/// composed with negation).
pub fn involution_map() -> ChartMap {
    ChartMap::new(Chart::Complex, Chart::Complex, |x| x.map(|v| -v))
        .with_jacobian(|_| -nalgebra::Matrix4::identity())
}

/// A torus point with rational coordinates `num/den`, reduced mod 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RationalPoint {
    num: [i64; 4],
    den: i64,
}

impl RationalPoint {
    pub fn new(num: [i64; 4], den: i64) -> Result<Self> {
        if den <= 0 {
            return Err(Error::Domain(format!("denominator {den} must be positive")));
        }
        Ok(Self {
            num: num.map(|v| v.rem_euclid(den)),
            den,
        })
    }

    pub fn numerators(&self) -> [i64; 4] {
        self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    pub fn involution(&self) -> Self {
        Self {
            num: self.num.map(|v| (-v).rem_euclid(self.den)),
            den: self.den,
        }
    }

    pub fn to_f64(&self) -> [f64; 4] {
        self.num.map(|v| v as f64 / self.den as f64)
    }
}

/// The 16 points of `{0, ½}⁴`, ordered by the binary digits of their index
/// (bit 3 is the first coordinate).
pub fn fixed_points() -> Vec<[f64; 4]> {
    (0..NUM_SITES).map(site_point).collect()
}

fn site_point(i: usize) -> [f64; 4] {
    std::array::from_fn(|c| if (i >> (3 - c)) & 1 == 1 { 0.5 } else { 0.0 })
}

/// Displacement from the nearest fixed point, each component in `[−¼, ¼]`,
/// together with that fixed point's index.
pub fn nearest_site(x: &[f64; 4]) -> (usize, [f64; 4]) {
    let mut site = 0;
    let mut d = [0.0; 4];
    for c in 0..4 {
        let m = (2.0 * x[c]).round();
        d[c] = x[c] - 0.5 * m;
        if (m as i64).rem_euclid(2) == 1 {
            site |= 1 << (3 - c);
        }
    }
    (site, d)
}

/// Displacement from fixed point `site` with minimum-image wrapping.
pub fn displacement(site: usize, x: &[f64; 4]) -> Result<[f64; 4]> {
    if site >= NUM_SITES {
        return Err(Error::Domain(format!("site index {site} out of range")));
    }
    let p = site_point(site);
    Ok(std::array::from_fn(|c| {
        let v = x[c] - p[c];
        v - v.round()
    }))
}

fn norm4(d: &[f64; 4]) -> f64 {
    d.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Direction of a blow-up transition map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    /// `(x, t) ↦ (1/t, xt)`.
    OneToTwo,
    /// `(s, y) ↦ (sy, 1/s)`.
    TwoToOne,
}

/// The transition maps between the two standard charts of `Bl₀(C²)`.
pub fn blowup_transition(dir: Transition, p: [Complex64; 2]) -> Result<[Complex64; 2]> {
    match dir {
        Transition::OneToTwo => {
            if p[1] == Complex64::new(0.0, 0.0) {
                return Err(Error::ChartMismatch("t = 0 lies outside the chart overlap".into()));
            }
            Ok([p[1].inv(), p[0] * p[1]])
        }
        Transition::TwoToOne => {
            if p[0] == Complex64::new(0.0, 0.0) {
                return Err(Error::ChartMismatch("s = 0 lies outside the chart overlap".into()));
            }
            Ok([p[0] * p[1], p[0].inv()])
        }
    }
}

/// `max |∂f/∂x + i ∂f/∂y|` over inputs and outputs, by central differences.
pub fn cauchy_riemann_residual(dir: Transition, p: [Complex64; 2], h: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for v in 0..2 {
        let shifted = |delta: Complex64| {
            let mut q = p;
            q[v] += delta;
            blowup_transition(dir, q)
        };
        let (xp, xm) = (shifted(Complex64::new(h, 0.0))?, shifted(Complex64::new(-h, 0.0))?);
        let (yp, ym) = (shifted(Complex64::new(0.0, h))?, shifted(Complex64::new(0.0, -h))?);
        for w in 0..2 {
            let dx = (xp[w] - xm[w]) / (2.0 * h);
            let dy = (yp[w] - ym[w]) / (2.0 * h);
            worst = worst.max((dx + Complex64::i() * dy).norm());
        }
    }
    Ok(worst)
}

/// `P̃⁻¹`: the punctured ball of radius `ζ` about `site` to `(r, z/r)`.
pub fn eh_chart_inverse(site: usize, zeta: f64, x: &[f64; 4]) -> Result<(f64, [f64; 4])> {
    let d = displacement(site, x)?;
    let r = norm4(&d);
    if r == 0.0 {
        return Err(Error::Domain(format!("point is the singular point {site}")));
    }
    if r >= zeta {
        return Err(Error::Domain(format!(
            "distance {r} from site {site} is outside the ball of radius {zeta}"
        )));
    }
    Ok((r, d.map(|v| v / r)))
}

/// `P̃`: `(r, unit) ↦ p_site + r·unit` on the torus.
pub fn eh_chart_forward(site: usize, r: f64, unit: &[f64; 4]) -> Result<[f64; 4]> {
    if site >= NUM_SITES {
        return Err(Error::Domain(format!("site index {site} out of range")));
    }
    let n = norm4(unit);
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("direction has norm {n}, expected 1")));
    }
    let p = site_point(site);
    Ok(reduce(&std::array::from_fn(|c| p[c] + r * unit[c])))
}

/// The EH u-chart point `(u, θ, φ, ϕ)` of `r·unit`, with `ϕ` reduced to
/// `(0, 2π]` so that `±z` give the same point of the quotient.
pub fn eh_quotient_point(r: f64, unit: &[f64; 4]) -> Result<[f64; 4]> {
    let z = unit.map(|v| r * v);
    let mut x = p_inverse(&z)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    x[3] = x[3].rem_euclid(two_pi);
    if x[3] == 0.0 {
        x[3] = two_pi;
    }
    Ok(x)
}

/// Smooth cutoff: 1 for `t ≤ ζ/4`, 0 for `t ≥ ζ/2`, and the exponential
/// smoothstep `E(1−s)/(E(s)+E(1−s))`, `E(s) = exp(−1/s)`, in between.
pub fn cutoff_beta<D: DualNum<f64>>(zeta: f64, t: D) -> D {
    let s = (t - zeta / 4.0) / (zeta / 4.0);
    let sr = s.re();
    if sr <= 0.0 {
        return D::one();
    }
    if sr >= 1.0 {
        return D::zero();
    }
    // β = 1/(1 + exp(−w)) with w = 1/s − 1/(1 − s).
    let w = s.recip() - (-s.clone() + 1.0).recip();
    if w.re() > 700.0 {
        return D::one();
    }
    if w.re() < -700.0 {
        return D::zero();
    }
    ((-w).exp() + 1.0).recip()
}

/// `G = φ_a − r²/2 = (a²/4) log((r² − a²)/(r² + a²))` on the r-chart.
pub fn gluing_correction_g(a: f64, r: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("a = {a} must be nonnegative")));
    }
    if !(r > a) {
        return Err(Error::Domain(format!("r = {r} must exceed a = {a}")));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let a2 = a * a;
    Ok(0.25 * a2 * ((r * r - a2) / (r * r + a2)).ln())
}

/// `φ_a − s/2` as a function of `s = u²`.
fn eh_correction_s<D: DualNum<f64>>(a: f64, s: D) -> D {
    if a == 0.0 {
        return D::zero();
    }
    let a2 = a * a;
    let big_r = (s.clone() * s.clone() + a2 * a2).sqrt();
    // R − s = a⁴/(R + s) avoids cancellation for s ≫ a².
    (big_r.clone() + s.clone()).recip() * (0.5 * a2 * a2)
        + (s.ln() - (big_r + a2).ln()) * (0.5 * a2)
}

/// The glued radial potential `Φ(s) = s/2 + β(√s)(φ_a − s/2)`.
pub fn glued_potential_s<D: DualNum<f64>>(a: f64, zeta: f64, s: D) -> D {
    let beta = cutoff_beta(zeta, s.clone().sqrt());
    let flat = s.clone() * 0.5;
    if beta.re() == 0.0 {
        return flat;
    }
    flat + beta * eh_correction_s(a, s)
}

/// `(Φ, Φ', Φ'')` at `s`.
pub fn glued_jet(a: f64, zeta: f64, s: f64) -> (f64, f64, f64) {
    second_derivative(|x| glued_potential_s(a, zeta, x), s)
}

/// Which part of the construction a point lies in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Within `ζ/4` of a fixed point, where `β ≡ 1`.
    EguchiHanson,
    /// `ζ/4 < r < ζ/2`.
    Annulus,
    /// Where `β ≡ 0` for every site.
    Flat,
}

/// `min(Φ', Φ' + sΦ'')` over `samples` points of the annulus, the two
/// eigenvalues of the radial form.
pub fn radial_positivity(a: f64, zeta: f64, samples: usize) -> f64 {
    let (lo, hi) = (zeta / 4.0, zeta / 2.0);
    let mut worst = f64::INFINITY;
    for k in 0..=samples {
        let u = lo + (hi - lo) * k as f64 / samples as f64;
        let s = u * u;
        let (_, d1, d2) = glued_jet(a, zeta, s);
        worst = worst.min(d1).min(d1 + s * d2);
    }
    worst
}

const POSITIVITY_SAMPLES: usize = 2000;

/// Largest `a` for which the glued form stays positive on the annulus,
/// by bisection.
pub fn a_max(zeta: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, zeta);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if radial_positivity(mid, zeta, POSITIVITY_SAMPLES) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// The periodic grid of cell centres `(k + ½)/N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::Config(format!("grid size {n} must be even and at least 8")));
        }
        if n > 256 {
            return Err(Error::Config(format!("grid size {n} exceeds 256")));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(4)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Each node carries volume `spacing⁴`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(4)
    }

    pub fn index(&self, k: [usize; 4]) -> usize {
        ((k[0] * self.n + k[1]) * self.n + k[2]) * self.n + k[3]
    }

    pub fn multi_index(&self, mut i: usize) -> [usize; 4] {
        let mut k = [0; 4];
        for c in (0..4).rev() {
            k[c] = i % self.n;
            i /= self.n;
        }
        k
    }

    /// Index of the node `step` cells away along `axis`, periodically.
    pub fn neighbor(&self, i: usize, axis: usize, step: isize) -> usize {
        let mut k = self.multi_index(i);
        k[axis] = (k[axis] as isize + step).rem_euclid(self.n as isize) as usize;
        self.index(k)
    }

    pub fn coords(&self, i: usize) -> [f64; 4] {
        let k = self.multi_index(i);
        k.map(|v| (v as f64 + 0.5) / self.n as f64)
    }

    /// The node's coordinates as an exact rational point.
    pub fn rational(&self, i: usize) -> RationalPoint {
        let k = self.multi_index(i);
        RationalPoint {
            num: k.map(|v| 2 * v as i64 + 1),
            den: 2 * self.n as i64,
        }
    }

    /// The node `σ(i)`.
    pub fn involution_index(&self, i: usize) -> usize {
        let k = self.multi_index(i);
        self.index(k.map(|v| self.n - 1 - v))
    }

    /// Exact displacement of node `i` from its nearest fixed point.
    pub fn site_displacement(&self, i: usize) -> (usize, [f64; 4]) {
        let k = self.multi_index(i);
        let n = self.n as i64;
        let mut site = 0;
        let mut d = [0.0; 4];
        for c in 0..4 {
            let q = 2 * k[c] as i64 + 1;
            let m = (0..=2).min_by_key(|m| (q - m * n).abs()).unwrap_or(0);
            if m == 1 {
                site |= 1 << (3 - c);
            }
            d[c] = (q - m * n) as f64 / (2 * n) as f64;
        }
        (site, d)
    }
}

/// Per-node Hermitian coefficients of a real (1,1)-form.
#[derive(Clone, Debug, PartialEq)]
pub struct Field11 {
    grid: TorusGrid,
    values: Vec<Herm2>,
}

impl Field11 {
    pub fn new(grid: TorusGrid, values: Vec<Herm2>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[Herm2] {
        &self.values
    }

    pub fn get(&self, i: usize) -> &Herm2 {
        &self.values[i]
    }

    /// Smallest eigenvalue over all nodes and the node attaining it.
    pub fn min_eigenvalue(&self) -> (usize, f64) {
        self.values
            .iter()
            .enumerate()
            .map(|(i, h)| (i, h.min_eigenvalue()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
    }

    pub fn check_positive(&self) -> Result<()> {
        let (node, min_eigenvalue) = self.min_eigenvalue();
        if min_eigenvalue > 0.0 {
            Ok(())
        } else {
            Err(Error::Positivity {
                node,
                min_eigenvalue,
            })
        }
    }

    /// `ω²/(χ∧χ̄) = 2 det h` at each node.
    pub fn volume_density(&self) -> Vec<f64> {
        self.values.iter().map(|h| 2.0 * h.det()).collect()
    }
}

/// The glued model: one Eguchi-Hanson parameter for all 16 sites and the
/// gluing radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedModel {
    a: f64,
    zeta: f64,
}

impl GluedModel {
    /// Validates `0 < ζ < ¼` (disjoint balls of radius `ζ`) and
    /// `0 ≤ a ≤ a_max(ζ)`.
    pub fn new(a: f64, zeta: f64) -> Result<Self> {
        if !(zeta > 0.0 && zeta < 0.25) {
            return Err(Error::Config(format!("zeta = {zeta} must lie in (0, 1/4)")));
        }
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("a = {a} must be nonnegative")));
        }
        if a > 0.0 {
            let worst = radial_positivity(a, zeta, POSITIVITY_SAMPLES);
            if !(worst > 0.0) {
                return Err(Error::Config(format!(
                    "a = {a} is too large for zeta = {zeta}: the glued form degenerates \
                     in the gluing annulus (a_max = {:.6})",
                    a_max(zeta)
                )));
            }
        }
        Ok(Self { a, zeta })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn region_of_distance(&self, r: f64) -> Region {
        if r <= self.zeta / 4.0 {
            Region::EguchiHanson
        } else if r < self.zeta / 2.0 {
            Region::Annulus
        } else {
            Region::Flat
        }
    }

    pub fn region(&self, x: &[f64; 4]) -> Region {
        let (_, d) = nearest_site(x);
        self.region_of_distance(norm4(&d))
    }

    /// `Σᵢ β(rᵢ)Gᵢ`, the potential of `ω₀ − ω_flat`.
    pub fn potential_correction(&self, x: &[f64; 4]) -> Result<f64> {
        let (site, d) = nearest_site(x);
        let s = d.iter().map(|v| v * v).sum::<f64>();
        if s == 0.0 && self.a > 0.0 {
            return Err(Error::Domain(format!("potential is singular at site {site}")));
        }
        Ok(glued_potential_s(self.a, self.zeta, s) - 0.5 * s)
    }

    fn herm_from_displacement(&self, site: usize, d: &[f64; 4]) -> Result<Herm2> {
        let s = d.iter().map(|v| v * v).sum::<f64>();
        if s >= (0.5 * self.zeta).powi(2) || self.a == 0.0 {
            return Ok(Herm2::flat());
        }
        if s == 0.0 {
            return Err(Error::Domain(format!("form is singular at site {site}")));
        }
        let (_, d1, d2) = glued_jet(self.a, self.zeta, s);
        if !(d1.is_finite() && d2.is_finite()) {
            return Err(Error::NonFinite(format!("potential jet at s = {s}")));
        }
        let z1 = Complex64::new(d[0], d[1]);
        let z2 = Complex64::new(d[2], d[3]);
        Ok(Herm2::new(
            d1 + d2 * z1.norm_sqr(),
            d1 + d2 * z2.norm_sqr(),
            z1.conj() * z2 * d2,
        ))
    }

    /// Coefficients of `ω₀` at a torus point.
    pub fn omega0_at(&self, x: &[f64; 4]) -> Result<Herm2> {
        let (site, d) = nearest_site(x);
        self.herm_from_displacement(site, &d)
    }

    /// `ω₀` on the grid; fails with the worst node if it is not positive.
    pub fn build(&self, grid: &TorusGrid) -> Result<Field11> {
        let values = (0..grid.len())
            .map(|i| {
                let (site, d) = grid.site_displacement(i);
                self.herm_from_displacement(site, &d)
            })
            .collect::<Result<Vec<_>>>()?;
        let field = Field11::new(*grid, values)?;
        field.check_positive()?;
        Ok(field)
    }

    /// Number of grid nodes in each region.
    pub fn region_counts(&self, grid: &TorusGrid) -> RegionCounts {
        let mut counts = RegionCounts::default();
        for i in 0..grid.len() {
            let (_, d) = grid.site_displacement(i);
            match self.region_of_distance(norm4(&d)) {
                Region::EguchiHanson => counts.eguchi_hanson += 1,
                Region::Annulus => counts.annulus += 1,
                Region::Flat => counts.flat += 1,
            }
        }
        counts
    }

    pub fn node_regions(&self, grid: &TorusGrid) -> Vec<Region> {
        (0..grid.len())
            .map(|i| self.region_of_distance(norm4(&grid.site_displacement(i).1)))
            .collect()
    }

    /// Whether the grid has at least two nodes across the inner ball
    /// (`N·ζ/4 ≥ 2`).
    pub fn resolves(&self, grid: &TorusGrid) -> bool {
        grid.n() as f64 * self.zeta / 4.0 >= 2.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCounts {
    pub eguchi_hanson: usize,
    pub annulus: usize,
    pub flat: usize,
}

/// `λ = Σ ω₀² / Σ χ∧χ̄` over the grid.
pub fn volume_ratio_lambda(omega0: &Field11) -> Result<f64> {
    let dens = omega0.volume_density();
    let lambda = dens.iter().sum::<f64>() / dens.len() as f64;
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("volume ratio {lambda} is not positive")));
    }
    Ok(lambda)
}

/// `e_a = (ω₀² − λχ∧χ̄)/ω₀²` at each node.
pub fn error_density_ea(omega0: &Field11, lambda: f64) -> Result<Vec<f64>> {
    omega0
        .volume_density()
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            if w > 0.0 {
                Ok(1.0 - lambda / w)
            } else {
                Err(Error::Positivity {
                    node: i,
                    min_eigenvalue: w,
                })
            }
        })
        .collect()
}

/// `ω₀`, `λ` and `e_a` for one model and grid.
#[derive(Clone, Debug)]
pub struct GluedData {
    pub model: GluedModel,
    pub omega0: Field11,
    pub lambda: f64,
    pub ea: Vec<f64>,
}

impl GluedData {
    pub fn new(model: GluedModel, grid: &TorusGrid) -> Result<Self> {
        let omega0 = model.build(grid)?;
        let lambda = volume_ratio_lambda(&omega0)?;
        let ea = error_density_ea(&omega0, lambda)?;
        Ok(Self {
            model,
            omega0,
            lambda,
            ea,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.omega0.grid()
    }

    /// `max |e_a|` over nodes of the given region.
    pub fn sup_ea_in(&self, region: Region) -> f64 {
        self.model
            .node_regions(&self.grid())
            .iter()
            .zip(&self.ea)
            .filter(|(r, _)| **r == region)
            .map(|(_, e)| e.abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_ea(&self) -> f64 {
        self.ea.iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// Richardson estimate of the flat-region error of `e_a`: the change
/// `2|λ_N − λ_{N/2}|` between the grid and its half-resolution copy.
pub fn discretization_estimate(model: &GluedModel, grid: &TorusGrid) -> Result<f64> {
    let coarse = TorusGrid::new(grid.n() / 2)?;
    let fine = volume_ratio_lambda(&model.build(grid)?)?;
    let half = volume_ratio_lambda(&model.build(&coarse)?)?;
    Ok(2.0 * (fine - half).abs())
}

const MAGIC: &[u8; 4] = b"KUMF";
const FORMAT_VERSION: u32 = 1;

/// What a field file holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    Scalar,
    Field11,
}

impl FieldKind {
    fn code(self) -> u32 {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Field11 => 2,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        match c {
            1 => Ok(FieldKind::Scalar),
            2 => Ok(FieldKind::Field11),
            _ => Err(Error::Format(format!("unknown field kind {c}"))),
        }
    }

    /// Per-node layout description stored in the sidecar.
    pub fn layout(self) -> &'static str {
        match self {
            FieldKind::Scalar => "f64 per node, row-major (k0, k1, k2, k3)",
            FieldKind::Field11 => "h11, h22, re h12, im h12 per node, row-major (k0, k1, k2, k3)",
        }
    }

    fn width(self) -> usize {
        match self {
            FieldKind::Scalar => 1,
            FieldKind::Field11 => 4,
        }
    }
}

/// Header of a field file, also written as the JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub version: u32,
    pub n: usize,
    pub kind: FieldKind,
    pub a: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub layout: String,
}

/// Contents of a field file.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Scalar(Vec<f64>),
    Field11(Vec<Herm2>),
}

impl FieldData {
    pub fn kind(&self) -> FieldKind {
        match self {
            FieldData::Scalar(_) => FieldKind::Scalar,
            FieldData::Field11(_) => FieldKind::Field11,
        }
    }

    fn len(&self) -> usize {
        match self {
            FieldData::Scalar(v) => v.len(),
            FieldData::Field11(v) => v.len(),
        }
    }
}

/// Path of the JSON sidecar for a binary field file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `KUMF`, version, `N`, kind (u32 little-endian), then `a`, `ζ`,
/// `λ` and the row-major node data as little-endian f64, plus the sidecar.
pub fn write_field(path: &Path, model: &GluedModel, lambda: f64, n: usize, data: &FieldData) -> Result<()> {
    let grid = TorusGrid::new(n)?;
    if data.len() != grid.len() {
        return Err(Error::Format(format!(
            "{} values for a grid of {} nodes",
            data.len(),
            grid.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    for v in [FORMAT_VERSION, n as u32, data.kind().code()] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in [model.a(), model.zeta(), lambda] {
        w.write_all(&v.to_le_bytes())?;
    }
    match data {
        FieldData::Scalar(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        FieldData::Field11(v) => {
            for h in v {
                for x in [h.h11, h.h22, h.h12.re, h.h12.im] {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    let header = FieldHeader {
        version: FORMAT_VERSION,
        n,
        kind: data.kind(),
        a: model.a(),
        zeta: model.zeta(),
        lambda,
        layout: data.kind().layout().into(),
    };
    std::fs::write(sidecar_path(path), crate::cli::to_json_string(&header)?)?;
    Ok(())
}

/// Reads a file written by [`write_field`].
pub fn read_field(path: &Path) -> Result<(FieldHeader, FieldData)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let mut u32s = [0u32; 3];
    for v in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b)?;
        *v = u32::from_le_bytes(b);
    }
    let [version, n, kind] = u32s;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = FieldKind::from_code(kind)?;
    let grid = TorusGrid::new(n as usize)?;
    let read_f64 = |r: &mut BufReader<File>| -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let (a, zeta, lambda) = (read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
    let mut body = Vec::with_capacity(grid.len() * kind.width());
    for _ in 0..grid.len() * kind.width() {
        body.push(read_f64(&mut r)?);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    let data = match kind {
        FieldKind::Scalar => FieldData::Scalar(body),
        FieldKind::Field11 => FieldData::Field11(
            body.chunks_exact(4)
                .map(|c| Herm2::new(c[0], c[1], Complex64::new(c[2], c[3])))
                .collect(),
        ),
    };
    let header = FieldHeader {
        version,
        n: n as usize,
        kind,
        a,
        zeta,
        lambda,
        layout: kind.layout().into(),
    };
    Ok((header, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_index_round_trip() {
        let g = TorusGrid::new(8).unwrap();
        for i in [0, 1, 77, g.len() - 1] {
            assert_eq!(g.index(g.multi_index(i)), i);
        }
    }

    #[test]
    fn nearest_site_matches_grid_displacement() {
        let g = TorusGrid::new(12).unwrap();
        for i in (0..g.len()).step_by(97) {
            let (s1, d1) = nearest_site(&g.coords(i));
            let (s2, d2) = g.site_displacement(i);
            assert_eq!(s1, s2);
            for c in 0..4 {
                assert!((d1[c] - d2[c]).abs() < 1e-15);
            }
        }
    }
}
