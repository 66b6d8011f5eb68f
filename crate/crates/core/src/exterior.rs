//! Exterior calculus on four-dimensional coordinate patches.
//!
//! Forms are lazy: a [`CoefficientForm`] stores one coefficient function per
//! strictly increasing index tuple and is only evaluated on demand, which lets
//! wedge products, exterior derivatives and pullbacks compose freely before a
//! point is chosen. Complex forms are pairs of real forms.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dimension of every chart in this crate.
pub const DIM: usize = 4;

/// Default central-difference step in chart units.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Named coordinate charts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Chart {
    /// Eguchi-Hanson `(r, θ, φ, ϕ)` with `r > a`.
    EhR { a: f64 },
    /// Eguchi-Hanson `(u, θ, φ, ϕ)` with `u⁴ = r⁴ − a⁴`.
    EhU { a: f64 },
    /// Gibbons-Hawking cylindrical `(ρ, z, φ, ψ)`.
    Cylindrical,
    /// Prolate spheroidal `(μ, ν, φ, ψ)` with foci at `z = ±c`.
    Prolate { c: f64 },
    /// Real coordinates `(x₁, y₁, x₂, y₂)` on `C²`, `z_j = x_j + i y_j`.
    Complex,
}

#[derive(Clone, Copy, Debug)]
struct Range {
    lo: f64,
    hi: f64,
    hi_inclusive: bool,
}

const fn open(lo: f64, hi: f64) -> Range {
    Range {
        lo,
        hi,
        hi_inclusive: false,
    }
}

const fn half_open(lo: f64, hi: f64) -> Range {
    Range {
        lo,
        hi,
        hi_inclusive: true,
    }
}

const FREE: Range = open(f64::NEG_INFINITY, f64::INFINITY);

impl Chart {
    pub fn name(&self) -> &'static str {
        match self {
            Chart::EhR { .. } => "eh-r",
            Chart::EhU { .. } => "eh-u",
            Chart::Cylindrical => "cylindrical",
            Chart::Prolate { .. } => "prolate",
            Chart::Complex => "complex",
        }
    }

    pub fn dim(&self) -> usize {
        DIM
    }

    fn ranges(&self) -> [Range; 4] {
        let theta = half_open(0.0, PI);
        let phi = half_open(0.0, 2.0 * PI);
        let fiber = half_open(0.0, 4.0 * PI);
        match *self {
            Chart::EhR { a } => [open(a, f64::INFINITY), theta, phi, fiber],
            Chart::EhU { .. } => [open(0.0, f64::INFINITY), theta, phi, fiber],
            Chart::Cylindrical => [open(0.0, f64::INFINITY), FREE, phi, fiber],
            Chart::Prolate { .. } => [open(1.0, f64::INFINITY), open(-1.0, 1.0), phi, fiber],
            Chart::Complex => [FREE; 4],
        }
    }

    /// Checks that `x` lies in the chart's declared domain.
    pub fn validate(&self, x: &[f64; 4]) -> Result<()> {
        for (i, (v, r)) in x.iter().zip(self.ranges()).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{} coordinate {i}", self.name())));
            }
            let above = *v > r.lo;
            let below = if r.hi_inclusive { *v <= r.hi } else { *v < r.hi };
            if !(above && below) {
                return Err(Error::Domain(format!(
                    "{} coordinate {i} = {v} outside ({}, {}{}",
                    self.name(),
                    r.lo,
                    r.hi,
                    if r.hi_inclusive { "]" } else { ")" }
                )));
            }
        }
        Ok(())
    }

    /// Checks that the closed `h`-box around `x` stays inside the chart.
    pub fn check_margin(&self, x: &[f64; 4], h: f64) -> Result<()> {
        self.validate(x)?;
        for (i, (v, r)) in x.iter().zip(self.ranges()).enumerate() {
            if r.lo.is_finite() && v - r.lo < h {
                return Err(Error::Margin {
                    coord: i,
                    value: *v,
                    bound: r.lo,
                    margin: h,
                });
            }
            if r.hi.is_finite() && r.hi - v < h {
                return Err(Error::Margin {
                    coord: i,
                    value: *v,
                    bound: r.hi,
                    margin: h,
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A validated point in a named chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartPoint {
    pub chart: Chart,
    pub coords: [f64; 4],
}

impl ChartPoint {
    pub fn new(chart: Chart, coords: [f64; 4]) -> Result<Self> {
        chart.validate(&coords)?;
        Ok(Self { chart, coords })
    }
}

/// Coefficient function of a form.
pub type Coeff = Arc<dyn Fn(&[f64; 4]) -> f64 + Send + Sync>;

/// Wraps a closure as a [`Coeff`].
pub fn coeff<F>(f: F) -> Coeff
where
    F: Fn(&[f64; 4]) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Strictly increasing index tuples of length `k` in lexicographic order.
pub fn basis(k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..DIM {
            cur.push(i);
            go(i + 1, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= DIM {
        go(0, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Sign of the permutation sorting `idx`, or `None` on a repeated index.
fn sort_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut sign = 1.0;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if idx[i] == idx[j] {
                return None;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    Some((sorted, sign))
}

fn position(k: usize, key: &[usize]) -> usize {
    basis(k)
        .iter()
        .position(|b| b.as_slice() == key)
        .expect("key is a sorted tuple")
}

/// A differential form of degree `0..=4` with lazily evaluated coefficients.
#[derive(Clone)]
pub struct CoefficientForm {
    chart: Chart,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Coeff>,
}

impl fmt::Debug for CoefficientForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientForm")
            .field("chart", &self.chart)
            .field("degree", &self.degree)
            .field("terms", &self.terms.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl CoefficientForm {
    pub fn new(chart: Chart, degree: usize, terms: Vec<(Vec<usize>, Coeff)>) -> Result<Self> {
        if degree > DIM {
            return Err(Error::InvalidForm(format!("degree {degree} > 4")));
        }
        let mut map = BTreeMap::new();
        for (key, c) in terms {
            if key.len() != degree {
                return Err(Error::InvalidForm(format!(
                    "index tuple {key:?} does not have length {degree}"
                )));
            }
            if key.windows(2).any(|w| w[0] >= w[1]) || key.iter().any(|&i| i >= DIM) {
                return Err(Error::InvalidForm(format!(
                    "index tuple {key:?} is not strictly increasing in 0..4"
                )));
            }
            if map.insert(key.clone(), c).is_some() {
                return Err(Error::InvalidForm(format!("duplicate index tuple {key:?}")));
            }
        }
        Ok(Self {
            chart,
            degree,
            terms: map,
        })
    }

    pub fn zero(chart: Chart, degree: usize) -> Self {
        Self {
            chart,
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(chart: Chart, f: Coeff) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), f);
        Self {
            chart,
            degree: 0,
            terms,
        }
    }

    /// The coordinate differential `dx_i`.
    pub fn differential(chart: Chart, i: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![i], coeff(|_| 1.0));
        Self {
            chart,
            degree: 1,
            terms,
        }
    }

    /// A 1-form from a pointwise covector in coordinate components.
    pub fn from_covector<F>(chart: Chart, f: F) -> Self
    where
        F: Fn(&[f64; 4]) -> [f64; 4] + Send + Sync + 'static,
    {
        let f = Arc::new(f);
        let mut terms = BTreeMap::new();
        for i in 0..DIM {
            let f = Arc::clone(&f);
            terms.insert(vec![i], coeff(move |x| f(x)[i]));
        }
        Self {
            chart,
            degree: 1,
            terms,
        }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Stored index tuples.
    pub fn keys(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.terms.keys()
    }

    pub fn eval(&self, x: &[f64; 4]) -> FormValue {
        let mut v = FormValue::zero(self.degree);
        for (key, c) in &self.terms {
            v.comps[position(self.degree, key)] += c(x);
        }
        v
    }

    /// Evaluates at a chart point after checking the chart.
    pub fn eval_at(&self, p: &ChartPoint) -> Result<FormValue> {
        if p.chart != self.chart {
            return Err(Error::ChartMismatch(format!(
                "form on {} evaluated at a {} point",
                self.chart, p.chart
            )));
        }
        Ok(self.eval(&p.coords))
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.chart != other.chart {
            return Err(Error::ChartMismatch(format!("{} vs {}", self.chart, other.chart)));
        }
        if self.degree != other.degree {
            return Err(Error::InvalidForm(format!(
                "degree {} vs {}",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    fn combine(&self, other: &Self, s: f64) -> Result<Self> {
        self.same_shape(other)?;
        let mut terms = self.terms.clone();
        for (key, g) in &other.terms {
            let g = Arc::clone(g);
            let new = match terms.remove(key) {
                Some(f) => coeff(move |x| f(x) + s * g(x)),
                None => coeff(move |x| s * g(x)),
            };
            terms.insert(key.clone(), new);
        }
        Ok(Self {
            chart: self.chart,
            degree: self.degree,
            terms,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.mul_fn(coeff(move |_| s))
    }

    /// Pointwise product with a function.
    pub fn mul_fn(&self, g: Coeff) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(k, f)| {
                let f = Arc::clone(f);
                let g = Arc::clone(&g);
                (k.clone(), coeff(move |x| g(x) * f(x)))
            })
            .collect();
        Self {
            chart: self.chart,
            degree: self.degree,
            terms,
        }
    }
}

/// A form evaluated at one point, components in [`basis`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct FormValue {
    degree: usize,
    comps: Vec<f64>,
}

impl FormValue {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            comps: vec![0.0; basis(degree).len()],
        }
    }

    pub fn from_components(degree: usize, comps: Vec<f64>) -> Result<Self> {
        if comps.len() != basis(degree).len() {
            return Err(Error::InvalidForm(format!(
                "{} components for degree {degree}",
                comps.len()
            )));
        }
        Ok(Self { degree, comps })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[f64] {
        &self.comps
    }

    /// Component on an arbitrary index tuple, with the antisymmetry sign.
    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.degree, "index length must match degree");
        match sort_sign(idx) {
            None => 0.0,
            Some((key, s)) => s * self.comps[position(self.degree, &key)],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree);
        Self {
            degree: self.degree,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.sub(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            degree: self.degree,
            comps: self.comps.iter().map(|v| s * v).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// Antisymmetric matrix `M_ij` of a 2-form, `α = Σ_{i<j} M_ij dx_i∧dx_j`.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        assert_eq!(self.degree, 2);
        Matrix4::from_fn(|i, j| if i == j { 0.0 } else { self.get(&[i, j]) })
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let comps = basis(2).iter().map(|k| m[(k[0], k[1])]).collect();
        Self { degree: 2, comps }
    }

    /// `α(u, v)` for a 2-form.
    pub fn pair(&self, u: &Vector4<f64>, v: &Vector4<f64>) -> f64 {
        (u.transpose() * self.to_matrix() * v)[(0, 0)]
    }
}

/// Wedge product of two evaluated forms.
pub fn wedge_values(f: &FormValue, g: &FormValue) -> Result<FormValue> {
    if f.degree + g.degree > DIM {
        return Err(Error::DegreeOverflow(f.degree, g.degree));
    }
    let mut out = FormValue::zero(f.degree + g.degree);
    for (ki, a) in basis(f.degree).iter().zip(&f.comps) {
        for (kj, b) in basis(g.degree).iter().zip(&g.comps) {
            let cat: Vec<usize> = ki.iter().chain(kj).copied().collect();
            if let Some((key, s)) = sort_sign(&cat) {
                out.comps[position(out.degree, &key)] += s * a * b;
            }
        }
    }
    Ok(out)
}

/// Wedge product; the result is lazy and bilinear in its arguments.
pub fn wedge(f: &CoefficientForm, g: &CoefficientForm) -> Result<CoefficientForm> {
    if f.chart != g.chart {
        return Err(Error::ChartMismatch(format!("{} vs {}", f.chart, g.chart)));
    }
    if f.degree + g.degree > DIM {
        return Err(Error::DegreeOverflow(f.degree, g.degree));
    }
    let mut acc: BTreeMap<Vec<usize>, Vec<(f64, Coeff, Coeff)>> = BTreeMap::new();
    for (ki, a) in &f.terms {
        for (kj, b) in &g.terms {
            let cat: Vec<usize> = ki.iter().chain(kj).copied().collect();
            if let Some((key, s)) = sort_sign(&cat) {
                acc.entry(key)
                    .or_default()
                    .push((s, Arc::clone(a), Arc::clone(b)));
            }
        }
    }
    let terms = acc
        .into_iter()
        .map(|(key, parts)| {
            let c = coeff(move |x| parts.iter().map(|(s, a, b)| s * a(x) * b(x)).sum());
            (key, c)
        })
        .collect();
    Ok(CoefficientForm {
        chart: f.chart,
        degree: f.degree + g.degree,
        terms,
    })
}

fn central(c: &Coeff, x: &[f64; 4], i: usize, h: f64) -> f64 {
    let mut xp = *x;
    let mut xm = *x;
    xp[i] += h;
    xm[i] -= h;
    (c(&xp) - c(&xm)) / (2.0 * h)
}

/// Lazy exterior derivative by second-order central differences of step `h`.
///
/// No margin check is made; use [`ext_d`] when evaluating near a boundary.
pub fn d(f: &CoefficientForm, h: f64) -> Result<CoefficientForm> {
    if f.degree >= DIM {
        return Err(Error::DegreeOverflow(f.degree, 1));
    }
    let mut acc: BTreeMap<Vec<usize>, Vec<(f64, usize, Coeff)>> = BTreeMap::new();
    for (key, c) in &f.terms {
        for i in 0..DIM {
            if key.contains(&i) {
                continue;
            }
            let mut cat = vec![i];
            cat.extend_from_slice(key);
            let (sorted, s) = sort_sign(&cat).expect("i not in key");
            acc.entry(sorted).or_default().push((s, i, Arc::clone(c)));
        }
    }
    let terms = acc
        .into_iter()
        .map(|(key, parts)| {
            let c = coeff(move |x| parts.iter().map(|(s, i, c)| s * central(c, x, *i, h)).sum());
            (key, c)
        })
        .collect();
    Ok(CoefficientForm {
        chart: f.chart,
        degree: f.degree + 1,
        terms,
    })
}

/// Exterior derivative of `f` evaluated at `p`, requiring margin `h` inside the chart.
pub fn ext_d(f: &CoefficientForm, p: &ChartPoint, h: f64) -> Result<FormValue> {
    if p.chart != f.chart {
        return Err(Error::ChartMismatch(format!(
            "form on {} differentiated at a {} point",
            f.chart, p.chart
        )));
    }
    p.chart.check_margin(&p.coords, h)?;
    Ok(d(f, h)?.eval(&p.coords))
}

/// Forward map of a [`ChartMap`].
pub type PointMap = Arc<dyn Fn(&[f64; 4]) -> [f64; 4] + Send + Sync>;
/// Jacobian `∂y_i/∂x_j` of a [`ChartMap`], rows indexed by target coordinates.
pub type JacobianFn = Arc<dyn Fn(&[f64; 4]) -> Matrix4<f64> + Send + Sync>;

/// Smooth map between charts with an analytic or finite-difference jacobian.
#[derive(Clone)]
pub struct ChartMap {
    source: Chart,
    target: Chart,
    forward: PointMap,
    jacobian: Option<JacobianFn>,
    det_floor: f64,
}

impl fmt::Debug for ChartMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartMap")
            .field("source", &self.source)
            .field("target", &self.target)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl ChartMap {
    pub fn new<F>(source: Chart, target: Chart, forward: F) -> Self
    where
        F: Fn(&[f64; 4]) -> [f64; 4] + Send + Sync + 'static,
    {
        Self {
            source,
            target,
            forward: Arc::new(forward),
            jacobian: None,
            det_floor: 1e-12,
        }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&[f64; 4]) -> Matrix4<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_det_floor(mut self, floor: f64) -> Self {
        self.det_floor = floor;
        self
    }

    pub fn identity(chart: Chart) -> Self {
        Self::new(chart, chart, |x| *x).with_jacobian(|_| Matrix4::identity())
    }

    pub fn source(&self) -> Chart {
        self.source
    }

    pub fn target(&self) -> Chart {
        self.target
    }

    pub fn map_coords(&self, x: &[f64; 4]) -> [f64; 4] {
        (self.forward)(x)
    }

    pub fn apply(&self, p: &ChartPoint) -> Result<ChartPoint> {
        if p.chart != self.source {
            return Err(Error::ChartMismatch(format!(
                "map from {} applied to a {} point",
                self.source, p.chart
            )));
        }
        ChartPoint::new(self.target, self.map_coords(&p.coords))
    }

    pub fn jacobian_at(&self, x: &[f64; 4]) -> Matrix4<f64> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        let h = 1e-6;
        let mut m = Matrix4::zeros();
        for j in 0..DIM {
            let mut xp = *x;
            let mut xm = *x;
            xp[j] += h;
            xm[j] -= h;
            let (yp, ym) = (self.map_coords(&xp), self.map_coords(&xm));
            for i in 0..DIM {
                m[(i, j)] = (yp[i] - ym[i]) / (2.0 * h);
            }
        }
        m
    }

    /// Jacobian, rejecting points where `|det|` falls below the floor.
    pub fn checked_jacobian(&self, x: &[f64; 4]) -> Result<Matrix4<f64>> {
        let m = self.jacobian_at(x);
        let det = m.determinant();
        if !(det.abs() >= self.det_floor) {
            return Err(Error::SingularJacobian {
                det,
                floor: self.det_floor,
            });
        }
        Ok(m)
    }

    /// `outer ∘ inner`, with the chain-rule jacobian.
    pub fn compose(outer: &ChartMap, inner: &ChartMap) -> Result<ChartMap> {
        if inner.target != outer.source {
            return Err(Error::ChartMismatch(format!(
                "cannot compose {} -> {} after {} -> {}",
                outer.source, outer.target, inner.source, inner.target
            )));
        }
        let (o, i) = (outer.clone(), inner.clone());
        let (o2, i2) = (outer.clone(), inner.clone());
        Ok(
            ChartMap::new(inner.source, outer.target, move |x| o.map_coords(&i.map_coords(x)))
                .with_jacobian(move |x| o2.jacobian_at(&i2.map_coords(x)) * i2.jacobian_at(x))
                .with_det_floor(outer.det_floor.min(inner.det_floor)),
        )
    }
}

fn minor_det(m: &Matrix4<f64>, rows: &[usize], cols: &[usize]) -> f64 {
    match rows.len() {
        0 => 1.0,
        1 => m[(rows[0], cols[0])],
        _ => {
            let mut sum = 0.0;
            let sub_rows = &rows[1..];
            for (k, &c) in cols.iter().enumerate() {
                let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                sum += s * m[(rows[0], c)] * minor_det(m, sub_rows, &rest);
            }
            sum
        }
    }
}

fn pull_value(jac: &Matrix4<f64>, degree: usize, target: &FormValue) -> FormValue {
    let b = basis(degree);
    let comps = b
        .iter()
        .map(|src| {
            b.iter()
                .zip(target.components())
                .map(|(tgt, v)| v * minor_det(jac, tgt, src))
                .sum()
        })
        .collect();
    FormValue { degree, comps }
}

/// Lazy pullback `m*f`; coefficients transform by minors of the jacobian.
pub fn pullback(m: &ChartMap, f: &CoefficientForm) -> Result<CoefficientForm> {
    if f.chart != m.target {
        return Err(Error::ChartMismatch(format!(
            "form on {} pulled back along a map into {}",
            f.chart, m.target
        )));
    }
    let degree = f.degree;
    let shared = Arc::new((m.clone(), f.clone()));
    let terms = basis(degree)
        .into_iter()
        .enumerate()
        .map(|(n, key)| {
            let shared = Arc::clone(&shared);
            let c = coeff(move |x| {
                let (m, f) = &*shared;
                let y = m.map_coords(x);
                pull_value(&m.jacobian_at(x), f.degree, &f.eval(&y)).comps[n]
            });
            (key, c)
        })
        .collect();
    Ok(CoefficientForm {
        chart: m.source,
        degree,
        terms,
    })
}

/// Pullback evaluated at `p`, with the nonsingularity check.
pub fn pullback_at(m: &ChartMap, f: &CoefficientForm, p: &ChartPoint) -> Result<FormValue> {
    if f.chart != m.target {
        return Err(Error::ChartMismatch(format!(
            "form on {} pulled back along a map into {}",
            f.chart, m.target
        )));
    }
    if p.chart != m.source {
        return Err(Error::ChartMismatch(format!(
            "map from {} evaluated at a {} point",
            m.source, p.chart
        )));
    }
    let jac = m.checked_jacobian(&p.coords)?;
    Ok(pull_value(&jac, f.degree, &f.eval(&m.map_coords(&p.coords))))
}

/// Complex-valued form as a (real, imaginary) pair.
#[derive(Clone, Debug)]
pub struct ComplexForm {
    pub re: CoefficientForm,
    pub im: CoefficientForm,
}

/// Complex form evaluated at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFormValue {
    pub re: FormValue,
    pub im: FormValue,
}

impl ComplexFormValue {
    pub fn max_abs(&self) -> f64 {
        self.re.max_abs().max(self.im.max_abs())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.re
            .max_abs_diff(&other.re)
            .max(self.im.max_abs_diff(&other.im))
    }
}

impl ComplexForm {
    pub fn new(re: CoefficientForm, im: CoefficientForm) -> Result<Self> {
        re.same_shape(&im)?;
        Ok(Self { re, im })
    }

    pub fn real(re: CoefficientForm) -> Self {
        let im = CoefficientForm::zero(re.chart, re.degree);
        Self { re, im }
    }

    pub fn chart(&self) -> Chart {
        self.re.chart
    }

    pub fn degree(&self) -> usize {
        self.re.degree
    }

    pub fn eval(&self, x: &[f64; 4]) -> ComplexFormValue {
        ComplexFormValue {
            re: self.re.eval(x),
            im: self.im.eval(x),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: self.im.scale(-1.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            re: self.re.add(&other.re)?,
            im: self.im.add(&other.im)?,
        })
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        let re = wedge(&self.re, &other.re)?.sub(&wedge(&self.im, &other.im)?)?;
        let im = wedge(&self.re, &other.im)?.add(&wedge(&self.im, &other.re)?)?;
        Ok(Self { re, im })
    }

    pub fn pullback(&self, m: &ChartMap) -> Result<Self> {
        Ok(Self {
            re: pullback(m, &self.re)?,
            im: pullback(m, &self.im)?,
        })
    }
}

/// `dz_j` on the [`Chart::Complex`] chart, `j ∈ {0, 1}`.
pub fn dz(j: usize) -> ComplexForm {
    ComplexForm {
        re: CoefficientForm::differential(Chart::Complex, 2 * j),
        im: CoefficientForm::differential(Chart::Complex, 2 * j + 1),
    }
}

/// `dz̄_j` on the [`Chart::Complex`] chart.
pub fn dzbar(j: usize) -> ComplexForm {
    dz(j).conj()
}

/// A pointwise coframe `e_a = Σ_i E_ai dx_i` on a chart.
#[derive(Clone)]
pub struct Coframe {
    id: String,
    chart: Chart,
    rows: JacobianFn,
}

impl fmt::Debug for Coframe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coframe")
            .field("id", &self.id)
            .field("chart", &self.chart)
            .finish()
    }
}

impl Coframe {
    pub fn new<F>(id: impl Into<String>, chart: Chart, rows: F) -> Self
    where
        F: Fn(&[f64; 4]) -> Matrix4<f64> + Send + Sync + 'static,
    {
        Self {
            id: id.into(),
            chart,
            rows: Arc::new(rows),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Row `a` holds the coordinate components of `e_a`.
    pub fn matrix_at(&self, x: &[f64; 4]) -> Matrix4<f64> {
        (self.rows)(x)
    }

    pub fn element(&self, a: usize) -> CoefficientForm {
        let rows = Arc::clone(&self.rows);
        CoefficientForm::from_covector(self.chart, move |x| {
            let m = rows(x);
            [m[(a, 0)], m[(a, 1)], m[(a, 2)], m[(a, 3)]]
        })
    }
}

/// An almost complex structure given by its action on a declared coframe.
///
/// Column `a` of `action` holds the frame components of the image of `e_a`.
/// The same table acts on the dual vector frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexStructure {
    frame: String,
    action: Matrix4<f64>,
}

impl ComplexStructure {
    pub fn new(frame: impl Into<String>, action: Matrix4<f64>) -> Result<Self> {
        if action * action != -Matrix4::identity() {
            return Err(Error::InvalidForm("complex structure must square to -1".into()));
        }
        Ok(Self {
            frame: frame.into(),
            action,
        })
    }

    /// Builds the structure from images `e_a ↦ sign · e_b`, one entry per `a`.
    pub fn from_table(frame: impl Into<String>, table: [(usize, f64); 4]) -> Result<Self> {
        let mut m = Matrix4::zeros();
        for (a, (b, s)) in table.iter().enumerate() {
            m[(*b, a)] = *s;
        }
        Self::new(frame, m)
    }

    pub fn frame(&self) -> &str {
        &self.frame
    }

    pub fn action(&self) -> &Matrix4<f64> {
        &self.action
    }

    /// Matrix of `α ↦ α∘X` on coframe components.
    pub fn precompose_matrix(&self) -> Matrix4<f64> {
        self.action.transpose()
    }

    /// Action on frame components of a tangent vector.
    pub fn on_vector(&self, v: &Vector4<f64>) -> Vector4<f64> {
        self.action * v
    }
}

fn frame_transform(
    j: &ComplexStructure,
    f: &CoefficientForm,
    frame: &Coframe,
    m: Matrix4<f64>,
) -> Result<CoefficientForm> {
    if j.frame != frame.id {
        return Err(Error::FrameMismatch {
            expected: j.frame.clone(),
            found: frame.id.clone(),
        });
    }
    if f.degree != 1 {
        return Err(Error::InvalidForm(format!(
            "complex structure acts on 1-forms, got degree {}",
            f.degree
        )));
    }
    if f.chart != frame.chart {
        return Err(Error::ChartMismatch(format!("{} vs {}", f.chart, frame.chart)));
    }
    let f = f.clone();
    let rows = Arc::clone(&frame.rows);
    Ok(CoefficientForm::from_covector(f.chart, move |x| {
        let e = rows(x);
        let v = f.eval(x);
        let dx = Vector4::from_column_slice(v.components());
        let c = e
            .transpose()
            .lu()
            .solve(&dx)
            .unwrap_or_else(|| Vector4::repeat(f64::NAN));
        let out = e.transpose() * (m * c);
        [out[0], out[1], out[2], out[3]]
    }))
}

/// Applies the structure's table to a 1-form: `e_a ↦ J(e_a)`.
pub fn apply_j(j: &ComplexStructure, f: &CoefficientForm, frame: &Coframe) -> Result<CoefficientForm> {
    frame_transform(j, f, frame, j.action)
}

/// The 1-form `α∘J`, with `J` acting on vectors by its table.
pub fn precompose(j: &ComplexStructure, f: &CoefficientForm, frame: &Coframe) -> Result<CoefficientForm> {
    frame_transform(j, f, frame, j.precompose_matrix())
}

/// Hermitian 2×2 matrix `h_{jk̄}`, representing `i Σ h_{jk̄} dz_j∧dz̄_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Herm2 {
    pub h11: f64,
    pub h22: f64,
    /// The `(1,2̄)` entry; the `(2,1̄)` entry is its conjugate.
    pub h12: Complex64,
}

impl Herm2 {
    pub fn new(h11: f64, h22: f64, h12: Complex64) -> Self {
        Self { h11, h22, h12 }
    }

    pub fn scalar(s: f64) -> Self {
        Self::new(s, s, Complex64::new(0.0, 0.0))
    }

    /// The flat Kähler form `(i/2) Σ dz_j∧dz̄_j`.
    pub fn flat() -> Self {
        Self::scalar(0.5)
    }

    pub fn entry(&self, j: usize, k: usize) -> Complex64 {
        match (j, k) {
            (0, 0) => Complex64::new(self.h11, 0.0),
            (1, 1) => Complex64::new(self.h22, 0.0),
            (0, 1) => self.h12,
            (1, 0) => self.h12.conj(),
            _ => panic!("Herm2 index out of range"),
        }
    }

    pub fn det(&self) -> f64 {
        self.h11 * self.h22 - self.h12.norm_sqr()
    }

    pub fn trace(&self) -> f64 {
        self.h11 + self.h22
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = 0.5 * self.trace();
        let d = (0.25 * (self.h11 - self.h22).powi(2) + self.h12.norm_sqr()).sqrt();
        m - d
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.h11 + o.h11, self.h22 + o.h22, self.h12 + o.h12)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.h11, s * self.h22, self.h12 * s)
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        (self.h11 - o.h11)
            .abs()
            .max((self.h22 - o.h22).abs())
            .max((self.h12 - o.h12).norm())
    }

    /// The real 2-form on the [`Chart::Complex`] chart.
    pub fn to_form_value(&self) -> FormValue {
        let i = Complex64::i();
        let dzv = |j: usize| {
            let mut v = [Complex64::new(0.0, 0.0); 4];
            v[2 * j] = Complex64::new(1.0, 0.0);
            v[2 * j + 1] = i;
            v
        };
        let mut m = Matrix4::zeros();
        for j in 0..2 {
            for k in 0..2 {
                let c = i * self.entry(j, k);
                let (a, b) = (dzv(j), dzv(k));
                for p in 0..DIM {
                    for q in 0..DIM {
                        let val = c * (a[p] * b[q].conj() - a[q] * b[p].conj());
                        m[(p, q)] += val.re;
                    }
                }
            }
        }
        FormValue::from_matrix(&m)
    }

    /// Real symmetric metric `g(V, V) = 2 Re Σ h_{jk̄} v_j v̄_k` on `(x₁, y₁, x₂, y₂)`.
    pub fn real_metric(&self) -> Matrix4<f64> {
        let q = |v: &[f64; 4]| {
            let z = [Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])];
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..2 {
                for k in 0..2 {
                    s += self.entry(j, k) * z[j] * z[k].conj();
                }
            }
            2.0 * s.re
        };
        let unit = |a: usize| {
            let mut v = [0.0; 4];
            v[a] = 1.0;
            v
        };
        Matrix4::from_fn(|a, b| {
            if a == b {
                q(&unit(a))
            } else {
                let mut v = unit(a);
                v[b] = 1.0;
                0.5 * (q(&v) - q(&unit(a)) - q(&unit(b)))
            }
        })
    }
}

/// Second-difference Hessian entry `∂²f/∂x_a∂x_b` at `x`.
fn hessian_entry(f: &dyn Fn(&[f64; 4]) -> f64, x: &[f64; 4], a: usize, b: usize, h: f64) -> f64 {
    let shift = |da: f64, db: f64| {
        let mut y = *x;
        y[a] += da;
        y[b] += db;
        f(&y)
    };
    if a == b {
        (shift(h, 0.0) - 2.0 * f(x) + shift(-h, 0.0)) / (h * h)
    } else {
        (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h)
    }
}

/// `∂∂̄` coefficients from a real Hessian in `(x₁, y₁, x₂, y₂)` ordering.
pub fn ddbar_from_hessian(hess: &Matrix4<f64>) -> Herm2 {
    let entry = |j: usize, k: usize| {
        let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
        Complex64::new(
            0.25 * (hess[(xj, xk)] + hess[(yj, yk)]),
            0.25 * (hess[(xj, yk)] - hess[(yj, xk)]),
        )
    };
    Herm2::new(entry(0, 0).re, entry(1, 1).re, entry(0, 1))
}

/// Coefficients `φ_{jk̄}` of `i∂∂̄φ` at `p` on the complex chart.
pub fn i_ddbar(phi: &dyn Fn(&[f64; 4]) -> f64, p: &ChartPoint, h: f64) -> Result<Herm2> {
    if p.chart != Chart::Complex {
        return Err(Error::ChartMismatch(format!(
            "i_ddbar needs a complex-chart point, got {}",
            p.chart
        )));
    }
    let x = &p.coords;
    let mut hess = Matrix4::zeros();
    for a in 0..DIM {
        for b in a..DIM {
            let v = hessian_entry(phi, x, a, b, h);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("second derivative ({a},{b})")));
            }
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    Ok(ddbar_from_hessian(&hess))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        let sizes: Vec<usize> = (0..=4).map(|k| basis(k).len()).collect();
        assert_eq!(sizes, vec![1, 4, 6, 4, 1]);
    }

    #[test]
    fn rejects_unsorted_tuples() {
        let r = CoefficientForm::new(Chart::Complex, 2, vec![(vec![1, 0], coeff(|_| 1.0))]);
        assert!(r.is_err());
    }

    #[test]
    fn flat_ddbar_form_is_standard() {
        let w = Herm2::flat().to_form_value();
        assert_eq!(w.get(&[0, 1]), 1.0);
        assert_eq!(w.get(&[2, 3]), 1.0);
        assert_eq!(w.get(&[0, 2]), 0.0);
        assert_eq!(Herm2::flat().real_metric(), Matrix4::identity());
    }
}
