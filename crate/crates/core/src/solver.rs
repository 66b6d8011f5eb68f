//! Discrete analysis on the glued torus and the fixed-point solver for the
//! complex Monge-Ampère equation `(ω₀ + Dφ)² = λχ∧χ̄`, `Dφ = 2i∂∂̄φ`.
//!
//! Writing `ψ = Δφ`, the equation becomes `ψ = F(ψ) = −e_a − Q(Δ⁻¹ψ)`.
//!
//! The Laplacian is discretized in divergence form,
//! `Δu = w⁻¹ ∂_a(w g^{ab} ∂_b u)` with `w = 4 det h` the Riemannian volume
//! density of `ω₀`. Diagonal terms use forward and backward differences with
//! edge-averaged coefficients, mixed terms nested central differences. The
//! operator is symmetric in the `w`-weighted inner product and maps into
//! `w`-mean-zero fields, so it is inverted with preconditioned conjugate
//! gradients on that subspace.

use std::io::Write;
use std::path::Path;

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{ddbar_from_hessian, Herm2};
use crate::kummer::{GluedData, GluedModel, TorusGrid};

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Hölder exponent, integrability exponent and the derived constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    alpha: f64,
    p: f64,
    eps: f64,
    a: f64,
    r_ball: f64,
}

impl NormParams {
    /// Requires `α ∈ (0, ⅓)`, `ε = 2 − 4/p > 0`, `ε/2 − 2α > 0` and `a > 0`.
    /// The Hölder sampling radius is `max(a, 1/N)`.
    pub fn new(alpha: f64, p: f64, a: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0 / 3.0) {
            return Err(Error::Config(format!("alpha = {alpha} must lie in (0, 1/3)")));
        }
        let eps = 2.0 - 4.0 / p;
        if !(p.is_finite() && eps > 0.0) {
            return Err(Error::Config(format!("p = {p} must exceed 2")));
        }
        if !(eps / 2.0 - 2.0 * alpha > 0.0) {
            return Err(Error::Config(format!(
                "eps/2 - 2 alpha = {} must be positive",
                eps / 2.0 - 2.0 * alpha
            )));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("the weighted norms need a > 0, got {a}")));
        }
        Ok(Self {
            alpha,
            p,
            eps,
            a,
            r_ball: a.max(1.0 / n as f64),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn r_ball(&self) -> f64 {
        self.r_ball
    }

    /// Radius `R = a^{ε/2}` of the ball the iteration lives in.
    pub fn ball_radius(&self) -> f64 {
        self.a.powf(self.eps / 2.0)
    }

    /// The analytic contraction bound `2a^{ε/2 − 2α}`.
    pub fn contraction_bound(&self) -> f64 {
        2.0 * self.a.powf(self.eps / 2.0 - 2.0 * self.alpha)
    }

    /// The weight `a^{−4+ε}` on the Sobolev parts.
    pub fn sobolev_weight(&self) -> f64 {
        self.a.powf(-4.0 + self.eps)
    }
}

/// What to do when an iterate leaves the ball `B_R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallPolicy {
    /// Stop with a ball-escape error.
    Enforce,
    /// Record the escape and keep iterating.
    Report,
}

/// Periodic index arithmetic on the grid.
#[derive(Clone, Copy, Debug)]
struct Stencil {
    n: usize,
    strides: [usize; 4],
}

impl Stencil {
    fn new(grid: &TorusGrid) -> Self {
        let n = grid.n();
        Self {
            n,
            strides: [n * n * n, n * n, n, 1],
        }
    }

    #[inline]
    fn plus(&self, i: usize, a: usize) -> usize {
        let s = self.strides[a];
        if (i / s) % self.n == self.n - 1 {
            i + s - self.n * s
        } else {
            i + s
        }
    }

    #[inline]
    fn minus(&self, i: usize, a: usize) -> usize {
        let s = self.strides[a];
        if (i / s).is_multiple_of(self.n) {
            i + self.n * s - s
        } else {
            i - s
        }
    }
}

/// The discrete geometry of `ω₀` on a grid.
#[derive(Clone, Debug)]
pub struct Operators {
    grid: TorusGrid,
    plus: Vec<[u32; 4]>,
    minus: Vec<[u32; 4]>,
    /// Nodes where `g⁻¹` has off-diagonal entries.
    mixed_nodes: Vec<u32>,
    h: f64,
    herm: Vec<Herm2>,
    /// `4 det h`.
    w: Vec<f64>,
    /// `g^{-1}` per node, row-major 4×4.
    ginv: Vec<[f64; 16]>,
    /// `w g^{aa}` averaged onto the edge towards `+e_a`.
    edge: Vec<[f64; 4]>,
    /// Diagonal of `−Δ`.
    diag: Vec<f64>,
    total_w: f64,
}

impl Operators {
    pub fn new(omega0: &crate::kummer::Field11) -> Result<Self> {
        let grid = omega0.grid();
        omega0.check_positive()?;
        let stencil = Stencil::new(&grid);
        let len = grid.len();
        let herm = omega0.values().to_vec();
        let w: Vec<f64> = herm.iter().map(|h| 4.0 * h.det()).collect();
        let mut ginv = Vec::with_capacity(len);
        for (i, h) in herm.iter().enumerate() {
            let g: Matrix4<f64> = h.real_metric();
            let inv = g.try_inverse().ok_or(Error::Positivity {
                node: i,
                min_eigenvalue: h.min_eigenvalue(),
            })?;
            let mut m = [0.0; 16];
            for r in 0..4 {
                for c in 0..4 {
                    m[4 * r + c] = 0.5 * (inv[(r, c)] + inv[(c, r)]);
                }
            }
            ginv.push(m);
        }
        let mut edge = vec![[0.0; 4]; len];
        for i in 0..len {
            for a in 0..4 {
                let j = stencil.plus(i, a);
                edge[i][a] = 0.5 * (w[i] * ginv[i][5 * a] + w[j] * ginv[j][5 * a]);
            }
        }
        let h = grid.spacing();
        let mut diag = vec![0.0; len];
        for i in 0..len {
            let mut s = 0.0;
            for a in 0..4 {
                s += edge[i][a] + edge[stencil.minus(i, a)][a];
            }
            diag[i] = s / (h * h * w[i]);
        }
        let total_w = w.iter().sum();
        let plus = (0..len)
            .map(|i| std::array::from_fn(|a| stencil.plus(i, a) as u32))
            .collect();
        let minus = (0..len)
            .map(|i| std::array::from_fn(|a| stencil.minus(i, a) as u32))
            .collect();
        let mixed_nodes = (0..len)
            .filter(|&i| (0..16).any(|k| k % 5 != 0 && ginv[i][k] != 0.0))
            .map(|i| i as u32)
            .collect();
        Ok(Self {
            grid,
            plus,
            minus,
            mixed_nodes,
            h,
            herm,
            w,
            ginv,
            edge,
            diag,
            total_w,
        })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn herm(&self) -> &[Herm2] {
        &self.herm
    }

    /// Riemannian volume density `4 det h` at each node.
    pub fn volume_weights(&self) -> &[f64] {
        &self.w
    }

    /// Total volume `Σ w · cell`.
    pub fn volume(&self) -> f64 {
        self.total_w * self.grid.cell_volume()
    }

    /// `Σ w f g`, the weighted inner product without the cell factor.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.w.iter().zip(f).zip(g).map(|((w, x), y)| w * x * y).sum()
    }

    /// Volume-weighted mean.
    pub fn mean(&self, f: &[f64]) -> f64 {
        self.w.iter().zip(f).map(|(w, x)| w * x).sum::<f64>() / self.total_w
    }

    /// Subtracts the volume-weighted mean.
    pub fn project(&self, f: &mut [f64]) {
        let m = self.mean(f);
        for v in f.iter_mut() {
            *v -= m;
        }
    }

    pub fn projected(&self, f: &[f64]) -> Vec<f64> {
        let mut g = f.to_vec();
        self.project(&mut g);
        g
    }

    /// Central-difference gradient, one array per axis.
    pub fn gradient(&self, u: &[f64]) -> [Vec<f64>; 4] {
        let inv2h = 0.5 / self.h;
        std::array::from_fn(|a| {
            (0..u.len())
                .map(|i| (u[self.plus[i][a] as usize] - u[self.minus[i][a] as usize]) * inv2h)
                .collect()
        })
    }

    /// Coordinate Hessian: three-point pure and nested central mixed
    /// differences.
    pub fn hessian(&self, u: &[f64]) -> Vec<[f64; 16]> {
        let h2 = self.h * self.h;
        let grad = self.gradient(u);
        let inv2h = 0.5 / self.h;
        (0..u.len())
            .map(|i| {
                let (ip, im) = (&self.plus[i], &self.minus[i]);
                let mut m = [0.0; 16];
                for a in 0..4 {
                    m[5 * a] = (u[ip[a] as usize] - 2.0 * u[i] + u[im[a] as usize]) / h2;
                    for b in a + 1..4 {
                        let v = (grad[b][ip[a] as usize] - grad[b][im[a] as usize]) * inv2h;
                        m[4 * a + b] = v;
                        m[4 * b + a] = v;
                    }
                }
                m
            })
            .collect()
    }

    /// The divergence-form Laplacian.
    pub fn laplacian(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.grid.len() {
            return Err(Error::Domain(format!(
                "field of length {} on a grid of {} nodes",
                u.len(),
                self.grid.len()
            )));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at node {i}")));
        }
        Ok(self.apply_laplacian(u))
    }

    fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let h2 = self.h * self.h;
        let inv2h = 0.5 / self.h;
        let mut out: Vec<f64> = (0..u.len())
            .map(|i| {
                let (ip, im, e) = (&self.plus[i], &self.minus[i], &self.edge);
                let mut s = 0.0;
                for a in 0..4 {
                    let (p, m) = (ip[a] as usize, im[a] as usize);
                    s += e[i][a] * (u[p] - u[i]) - e[m][a] * (u[i] - u[m]);
                }
                s / h2
            })
            .collect();
        // Mixed terms D⁰_a(w g^{ab} D⁰_b u), scattered from the nodes where
        // they are nonzero.
        for &j in &self.mixed_nodes {
            let j = j as usize;
            let (jp, jm) = (&self.plus[j], &self.minus[j]);
            let grad: [f64; 4] = std::array::from_fn(|b| (u[jp[b] as usize] - u[jm[b] as usize]) * inv2h);
            let g = &self.ginv[j];
            for a in 0..4 {
                let mut flux = 0.0;
                for b in 0..4 {
                    if b != a {
                        flux += g[4 * a + b] * grad[b];
                    }
                }
                let flux = self.w[j] * flux * inv2h;
                out[jm[a] as usize] += flux;
                out[jp[a] as usize] -= flux;
            }
        }
        for (o, w) in out.iter_mut().zip(&self.w) {
            *o /= w;
        }
        out
    }

    /// Discrete Dirichlet energy `⟨−Δu, u⟩` with the cell factor.
    pub fn dirichlet_energy(&self, u: &[f64]) -> f64 {
        -self.inner(&self.apply_laplacian(u), u) * self.grid.cell_volume()
    }

    /// Solves `Δu = f` for mean-zero `u`.
    pub fn invert_laplacian(&self, f: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        Ok(self.invert_laplacian_with_history(f, tol, max_iter)?.0)
    }

    /// As [`Operators::invert_laplacian`], also returning the relative
    /// residual after each iteration.
    pub fn invert_laplacian_with_history(
        &self,
        f: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        self.invert_laplacian_from(f, None, tol, max_iter)
    }

    /// Conjugate gradients started from `guess` (zero if `None`).
    pub fn invert_laplacian_from(
        &self,
        f: &[f64],
        guess: Option<&[f64]>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let len = self.grid.len();
        if f.len() != len {
            return Err(Error::Domain(format!("field of length {} on {len} nodes", f.len())));
        }
        if let Some(i) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("right-hand side at node {i}")));
        }
        let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mean = self.mean(f);
        if mean.abs() > 1e-8 * scale {
            return Err(Error::NotMeanZero(mean));
        }
        // Solve L u = b with L = −Δ, b = −f, in the w-inner product.
        let mut b: Vec<f64> = f.iter().map(|v| -v).collect();
        self.project(&mut b);
        let bnorm = self.inner(&b, &b).sqrt();
        if bnorm == 0.0 {
            return Ok((vec![0.0; len], vec![0.0]));
        }
        let (mut u, mut r) = match guess {
            Some(g) if g.len() == len => {
                let u = self.projected(g);
                let lu = self.apply_laplacian(&u);
                let r: Vec<f64> = b.iter().zip(&lu).map(|(b, l)| b + l).collect();
                (u, r)
            }
            _ => (vec![0.0; len], b),
        };
        self.project(&mut r);
        if self.inner(&r, &r).sqrt() <= tol * bnorm {
            return Ok((u, vec![self.inner(&r, &r).sqrt() / bnorm]));
        }
        let precondition = |r: &[f64]| {
            let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(x, d)| x / d).collect();
            self.project(&mut z);
            z
        };
        let mut z = precondition(&r);
        let mut p = z.clone();
        let mut rz = self.inner(&r, &z);
        let mut history = Vec::new();
        for _ in 0..max_iter {
            let lp: Vec<f64> = self.apply_laplacian(&p).into_iter().map(|v| -v).collect();
            let pap = self.inner(&p, &lp);
            if !(pap > 0.0) {
                return Err(Error::NoConvergence {
                    iterations: history.len(),
                    history,
                });
            }
            let step = rz / pap;
            for i in 0..len {
                u[i] += step * p[i];
                r[i] -= step * lp[i];
            }
            let rel = self.inner(&r, &r).sqrt() / bnorm;
            history.push(rel);
            if rel <= tol {
                self.project(&mut u);
                return Ok((u, history));
            }
            z = precondition(&r);
            let rz_new = self.inner(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NoConvergence {
            iterations: history.len(),
            history,
        })
    }

    /// Coefficients `U_{jk̄} = ∂_j∂̄_k u` at every node.
    pub fn ddbar(&self, u: &[f64]) -> Vec<Herm2> {
        self.hessian(u)
            .into_iter()
            .map(|m| ddbar_from_hessian(&Matrix4::from_row_slice(&m)))
            .collect()
    }

    /// `Q(u) = (Dφ)²/ω₀² = 4 det U/det h`.
    pub fn quadratic_q(&self, u: &[f64]) -> Vec<f64> {
        self.ddbar(u)
            .iter()
            .zip(&self.herm)
            .map(|(uu, h)| 4.0 * uu.det() / h.det())
            .collect()
    }

    /// Coefficients of `ω₀ + Dφ`.
    pub fn perturbed_form(&self, phi: &[f64]) -> Vec<Herm2> {
        self.ddbar(phi)
            .iter()
            .zip(&self.herm)
            .map(|(uu, h)| h.add(&uu.scale(2.0)))
            .collect()
    }

    /// `(ω₀ + Dφ)²/(λχ∧χ̄) − 1` at each node, with the worst eigenvalue of
    /// `ω₀ + Dφ`; fails if that form is not positive.
    pub fn ma_residual(&self, phi: &[f64], lambda: f64) -> Result<(Vec<f64>, f64)> {
        let form = self.perturbed_form(phi);
        let (node, min_eig) = form
            .iter()
            .enumerate()
            .map(|(i, h)| (i, h.min_eigenvalue()))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if !(min_eig > 0.0) {
            return Err(Error::Positivity {
                node,
                min_eigenvalue: min_eig,
            });
        }
        Ok((form.iter().map(|h| 2.0 * h.det() / lambda - 1.0).collect(), min_eig))
    }

    /// `(Σ |f|^p w)^{1/p}` with the cell factor.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> Result<f64> {
        check_finite(f)?;
        let cell = self.grid.cell_volume();
        let s: f64 = self.w.iter().zip(f).map(|(w, x)| w * x.abs().powf(p)).sum();
        Ok((s * cell).powf(1.0 / p))
    }

    fn metric_grad_sq(&self, i: usize, g: &[f64; 4]) -> f64 {
        let m = &self.ginv[i];
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                s += m[4 * a + b] * g[a] * g[b];
            }
        }
        s
    }

    fn metric_hess_sq(&self, i: usize, hh: &[f64; 16]) -> f64 {
        let m = &self.ginv[i];
        // |H|² = tr(g⁻¹ H g⁻¹ H)
        let mut t = [0.0; 16];
        for a in 0..4 {
            for b in 0..4 {
                let mut s = 0.0;
                for c in 0..4 {
                    s += m[4 * a + c] * hh[4 * c + b];
                }
                t[4 * a + b] = s;
            }
        }
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                s += t[4 * a + b] * t[4 * b + a];
            }
        }
        s
    }

    /// `‖f‖_{L²₂}`: `L²` norms of `f`, `∇f` and `∇²f` measured with the
    /// metric, derivatives by central differences.
    pub fn sobolev_l22_norm(&self, f: &[f64]) -> Result<f64> {
        check_finite(f)?;
        let grad = self.gradient(f);
        let hess = self.hessian(f);
        let cell = self.grid.cell_volume();
        let mut s = 0.0;
        for i in 0..f.len() {
            let g = [grad[0][i], grad[1][i], grad[2][i], grad[3][i]];
            s += self.w[i] * (f[i] * f[i] + self.metric_grad_sq(i, &g) + self.metric_hess_sq(i, &hess[i]));
        }
        Ok((s * cell).sqrt())
    }

    /// Largest `|T_i − T_j|/d(i,j)^α` over node pairs with
    /// `0 < d ≤ r_ball`, for each component array `T`.
    pub fn holder_seminorm(&self, components: &[&[f64]], alpha: f64, r_ball: f64) -> f64 {
        let m = ((r_ball / self.h) + 1e-9).floor().max(1.0) as i64;
        let mut offsets = Vec::new();
        let range = -m..=m;
        for d0 in range.clone() {
            for d1 in range.clone() {
                for d2 in range.clone() {
                    for d3 in range.clone() {
                        let d = [d0, d1, d2, d3];
                        if d <= [0, 0, 0, 0] {
                            continue;
                        }
                        let dist = self.h * (d.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
                        if dist <= r_ball.max(self.h) * (1.0 + 1e-9) {
                            offsets.push((d, dist.powf(alpha)));
                        }
                    }
                }
            }
        }
        let n = self.grid.n() as i64;
        let mut best = 0.0f64;
        for i in 0..self.grid.len() {
            let k = self.grid.multi_index(i);
            for (d, da) in &offsets {
                let kk: [usize; 4] = std::array::from_fn(|c| (k[c] as i64 + d[c]).rem_euclid(n) as usize);
                let j = self.grid.index(kk);
                for t in components {
                    best = best.max((t[i] - t[j]).abs() / da);
                }
            }
        }
        best
    }

    /// `C^{k,α}` norm for `k ∈ {0, 2}`: sup norms of `∇ʲf`, `j ≤ k`, plus
    /// the Hölder seminorm of `∇ᵏf` (coordinate components).
    pub fn holder_norm(&self, f: &[f64], k: usize, alpha: f64, r_ball: f64) -> Result<f64> {
        check_finite(f)?;
        let sup0 = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        match k {
            0 => Ok(sup0 + self.holder_seminorm(&[f], alpha, r_ball)),
            1 | 2 => {
                let grad = self.gradient(f);
                let mut sup1 = 0.0f64;
                for i in 0..f.len() {
                    let g = [grad[0][i], grad[1][i], grad[2][i], grad[3][i]];
                    sup1 = sup1.max(self.metric_grad_sq(i, &g).sqrt());
                }
                if k == 1 {
                    let comps: Vec<&[f64]> = grad.iter().map(|v| v.as_slice()).collect();
                    return Ok(sup0 + sup1 + self.holder_seminorm(&comps, alpha, r_ball));
                }
                let hess = self.hessian(f);
                let mut sup2 = 0.0f64;
                for (i, hh) in hess.iter().enumerate() {
                    sup2 = sup2.max(self.metric_hess_sq(i, hh).sqrt());
                }
                let comps: Vec<Vec<f64>> = (0..4)
                    .flat_map(|a| (a..4).map(move |b| (a, b)))
                    .map(|(a, b)| hess.iter().map(|m| m[4 * a + b]).collect())
                    .collect();
                let refs: Vec<&[f64]> = comps.iter().map(|v| v.as_slice()).collect();
                Ok(sup0 + sup1 + sup2 + self.holder_seminorm(&refs, alpha, r_ball))
            }
            _ => Err(Error::Domain(format!("Hölder order {k} is not supported"))),
        }
    }

    fn check_mean_zero(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_finite(f)?;
        let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mean = self.mean(f);
        if mean.abs() > 1e-8 * scale.max(1e-300) && mean.abs() > 1e-14 {
            return Err(Error::NotMeanZero(mean));
        }
        Ok(self.projected(f))
    }

    /// `a^{−4+ε}‖f‖_{L²₂} + a^α‖f‖_{C^{2,α}}` on mean-zero fields.
    pub fn x_norm(&self, norms: &NormParams, f: &[f64]) -> Result<f64> {
        let g = self.check_mean_zero(f)?;
        Ok(norms.sobolev_weight() * self.sobolev_l22_norm(&g)?
            + norms.a.powf(norms.alpha) * self.holder_norm(&g, 2, norms.alpha, norms.r_ball)?)
    }

    /// `a^{−4+ε}‖f‖_{L²} + ‖f‖_{C^{0,α}}` on mean-zero fields.
    pub fn y_norm(&self, norms: &NormParams, f: &[f64]) -> Result<f64> {
        let g = self.check_mean_zero(f)?;
        Ok(norms.sobolev_weight() * self.lp_norm(&g, 2.0)?
            + self.holder_norm(&g, 0, norms.alpha, norms.r_ball)?)
    }
}

fn check_finite(f: &[f64]) -> Result<()> {
    match f.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("field value at node {i}"))),
        None => Ok(()),
    }
}

/// A random smooth field: a few low Fourier modes with seeded amplitudes.
pub fn random_smooth_field(grid: &TorusGrid, rng: &mut ChaCha8Rng, modes: usize) -> Vec<f64> {
    let terms: Vec<([f64; 4], f64, f64)> = (0..modes)
        .map(|_| {
            let k: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2i32..=2) as f64);
            (k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    (0..grid.len())
        .map(|i| {
            let x = grid.coords(i);
            terms
                .iter()
                .map(|(k, amp, ph)| {
                    let dot: f64 = k.iter().zip(&x).map(|(a, b)| a * b).sum();
                    amp * (std::f64::consts::TAU * dot + ph).cos()
                })
                .sum()
        })
        .collect()
}

/// Everything needed to run the fixed-point iteration.
#[derive(Clone, Debug)]
pub struct Problem {
    pub data: GluedData,
    pub ops: Operators,
    pub norms: NormParams,
    /// Relative tolerance for each Laplacian inversion.
    pub inversion_tol: f64,
    pub inversion_max_iter: usize,
}

/// One row of the iteration trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub y_norm_psi: f64,
    pub lipschitz_sample_max: f64,
    pub ma_sup_residual: f64,
    pub min_eigenvalue: f64,
}

/// Result of [`Problem::banach_solve`].
#[derive(Clone, Debug)]
pub struct SolverState {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub ball_radius: f64,
    pub iterations: usize,
    pub converged: bool,
    pub y_history: Vec<f64>,
    pub increment_ratios: Vec<f64>,
    pub trace: Vec<TraceRow>,
    pub initial_ma_sup: f64,
    pub final_ma_sup: f64,
    pub min_eigenvalue: f64,
    pub max_abs_mean: f64,
    pub max_y_norm: f64,
    pub ball_respected: bool,
}

impl SolverState {
    /// `final/initial` sup residual; 0 when both vanish.
    pub fn residual_ratio(&self) -> f64 {
        if self.initial_ma_sup == 0.0 {
            if self.final_ma_sup == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.final_ma_sup / self.initial_ma_sup
        }
    }

    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            converged: self.converged,
            iterations: self.iterations,
            ball_radius: self.ball_radius,
            max_y_norm: self.max_y_norm,
            ball_respected: self.ball_respected,
            initial_ma_sup: self.initial_ma_sup,
            final_ma_sup: self.final_ma_sup,
            residual_ratio: self.residual_ratio(),
            min_eigenvalue: self.min_eigenvalue,
            max_abs_mean: self.max_abs_mean,
        }
    }

    /// CSV with columns `iter, y_norm_psi, lipschitz_sample_max,
    /// ma_sup_residual, min_eigenvalue`.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "iter,y_norm_psi,lipschitz_sample_max,ma_sup_residual,min_eigenvalue")?;
        for r in &self.trace {
            writeln!(
                f,
                "{},{},{},{},{}",
                r.iter,
                fmt17(r.y_norm_psi),
                fmt17(r.lipschitz_sample_max),
                fmt17(r.ma_sup_residual),
                fmt17(r.min_eigenvalue)
            )?;
        }
        f.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub converged: bool,
    pub iterations: usize,
    pub ball_radius: f64,
    pub max_y_norm: f64,
    pub ball_respected: bool,
    pub initial_ma_sup: f64,
    pub final_ma_sup: f64,
    pub residual_ratio: f64,
    pub min_eigenvalue: f64,
    pub max_abs_mean: f64,
}

/// Summary statistics of a sampled ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub samples: Vec<f64>,
    pub max: f64,
    pub mean: f64,
}

impl RatioStats {
    fn new(samples: Vec<f64>) -> Self {
        let max = samples.iter().cloned().fold(0.0, f64::max);
        let mean = if samples.is_empty() {
            0.0
        } else {
            samples.iter().sum::<f64>() / samples.len() as f64
        };
        Self { samples, max, mean }
    }
}

fn sup_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

impl Problem {
    pub fn new(model: GluedModel, grid: &TorusGrid, alpha: f64, p: f64) -> Result<Self> {
        let data = GluedData::new(model, grid)?;
        let ops = Operators::new(&data.omega0)?;
        let norms = NormParams::new(alpha, p, model.a(), grid.n())?;
        Ok(Self {
            data,
            ops,
            norms,
            inversion_tol: 1e-10,
            inversion_max_iter: 2000,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.data.lambda
    }

    /// `e_a` projected to mean zero.
    pub fn ea(&self) -> Vec<f64> {
        self.ops.projected(&self.data.ea)
    }

    pub fn invert(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.ops.invert_laplacian(f, self.inversion_tol, self.inversion_max_iter)
    }

    pub fn y_norm(&self, f: &[f64]) -> Result<f64> {
        self.ops.y_norm(&self.norms, f)
    }

    pub fn x_norm(&self, f: &[f64]) -> Result<f64> {
        self.ops.x_norm(&self.norms, f)
    }

    /// `F(ψ) = −e_a − Q(Δ⁻¹ψ)`, projected to mean zero; also returns
    /// `Δ⁻¹ψ`.
    pub fn fixed_point_map_with_phi(&self, psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let psi = self.ops.check_mean_zero(psi)?;
        let phi = self.invert(&psi)?;
        let q = self.ops.quadratic_q(&phi);
        let mut out: Vec<f64> = self.data.ea.iter().zip(&q).map(|(e, q)| -e - q).collect();
        self.ops.project(&mut out);
        Ok((out, phi))
    }

    pub fn fixed_point_map(&self, psi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.fixed_point_map_with_phi(psi)?.0)
    }

    /// Monge-Ampère residual field, its sup and the worst eigenvalue.
    pub fn ma_residual(&self, phi: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
        let (res, min_eig) = self.ops.ma_residual(phi, self.lambda())?;
        let sup = sup_abs(&res);
        Ok((res, sup, min_eig))
    }

    /// A random mean-zero field with `‖ψ‖_Y = radius`.
    pub fn random_in_ball(&self, rng: &mut ChaCha8Rng, radius: f64) -> Result<Vec<f64>> {
        let mut f = random_smooth_field(&self.ops.grid(), rng, 4);
        self.ops.project(&mut f);
        let n = self.y_norm(&f)?;
        if n == 0.0 {
            return Ok(f);
        }
        Ok(f.into_iter().map(|v| v * radius / n).collect())
    }

    /// `‖F(ψ₁) − F(ψ₂)‖_Y / ‖ψ₁ − ψ₂‖_Y` over random pairs in `B_R`.
    pub fn lipschitz_sample(&self, pairs: usize, seed: u64) -> Result<RatioStats> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = self.norms.ball_radius();
        let mut out = Vec::with_capacity(pairs);
        for _ in 0..pairs {
            let t1 = rng.gen_range(0.1..1.0);
            let t2 = rng.gen_range(0.1..1.0);
            let p1 = self.random_in_ball(&mut rng, t1 * r)?;
            let p2 = self.random_in_ball(&mut rng, t2 * r)?;
            let (f1, f2) = (self.fixed_point_map(&p1)?, self.fixed_point_map(&p2)?);
            let df: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a - b).collect();
            let dp: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a - b).collect();
            out.push(self.y_norm(&df)? / self.y_norm(&dp)?);
        }
        Ok(RatioStats::new(out))
    }

    /// `‖Δ⁻¹f‖_X/‖f‖_Y` over random mean-zero fields.
    pub fn inverse_bound_sample(&self, samples: usize, seed: u64) -> Result<RatioStats> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(samples);
        for _ in 0..samples {
            let mut f = random_smooth_field(&self.ops.grid(), &mut rng, 4);
            self.ops.project(&mut f);
            let u = self.invert(&f)?;
            out.push(self.x_norm(&u)? / self.y_norm(&f)?);
        }
        Ok(RatioStats::new(out))
    }

    /// `‖Q(u₁) − Q(u₂)‖_Y / (a^{−2α}‖u₁ − u₂‖_X‖u₁ + u₂‖_X)` over random
    /// pairs; the maximum is the fitted envelope constant.
    pub fn q_envelope_sample(&self, pairs: usize, seed: u64) -> Result<RatioStats> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = self.ops.grid();
        let mut out = Vec::with_capacity(pairs);
        let scale = self.norms.ball_radius();
        for _ in 0..pairs {
            let mut u1 = random_smooth_field(&grid, &mut rng, 3);
            let mut u2 = random_smooth_field(&grid, &mut rng, 3);
            self.ops.project(&mut u1);
            self.ops.project(&mut u2);
            let n1 = self.x_norm(&u1)?;
            let n2 = self.x_norm(&u2)?;
            u1.iter_mut().for_each(|v| *v *= scale / n1);
            u2.iter_mut().for_each(|v| *v *= scale / n2);
            let q1 = self.ops.quadratic_q(&u1);
            let q2 = self.ops.quadratic_q(&u2);
            let dq = self.ops.projected(&q1.iter().zip(&q2).map(|(a, b)| a - b).collect::<Vec<_>>());
            let diff: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
            let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
            let denom = self.norms.a.powf(-2.0 * self.norms.alpha) * self.x_norm(&diff)? * self.x_norm(&sum)?;
            out.push(self.y_norm(&dq)? / denom);
        }
        Ok(RatioStats::new(out))
    }

    /// Iterates `ψ ↦ F(ψ)` from `psi0` (zero if `None`) until
    /// `‖ψ_{k+1} − ψ_k‖_Y < tol·‖ψ₁‖_Y`.
    pub fn banach_solve(
        &self,
        psi0: Option<&[f64]>,
        tol: f64,
        max_iter: usize,
        policy: BallPolicy,
    ) -> Result<SolverState> {
        let r = self.norms.ball_radius();
        let len = self.ops.grid().len();
        let mut psi = match psi0 {
            Some(p) => self.ops.check_mean_zero(p)?,
            None => vec![0.0; len],
        };
        let mut ball_respected = true;
        let y0 = self.y_norm(&psi)?;
        let mut max_y = y0;
        if y0 > r {
            match policy {
                BallPolicy::Enforce => return Err(Error::BallEscape { norm: y0, radius: r }),
                BallPolicy::Report => ball_respected = false,
            }
        }
        let (_, initial_ma_sup, _) = self.ma_residual(&vec![0.0; len])?;
        let mut y_history = vec![y0];
        let mut ratios = Vec::new();
        let mut trace = Vec::new();
        let mut max_abs_mean = 0.0f64;
        let mut first_step: Option<f64> = None;
        let mut prev_step: Option<f64> = None;
        let mut lip_max = 0.0f64;
        let mut converged = false;
        let mut iterations = 0;
        for k in 1..=max_iter {
            let (next, phi) = self.fixed_point_map_with_phi(&psi)?;
            max_abs_mean = max_abs_mean.max(self.ops.mean(&next).abs());
            let (_, ma_sup, min_eig) = self.ma_residual(&phi)?;
            let y = self.y_norm(&next)?;
            let diff: Vec<f64> = next.iter().zip(&psi).map(|(a, b)| a - b).collect();
            let step = self.y_norm(&diff)?;
            if let Some(ps) = prev_step {
                if ps > 0.0 {
                    let ratio = step / ps;
                    ratios.push(ratio);
                    lip_max = lip_max.max(ratio);
                }
            }
            prev_step = Some(step);
            y_history.push(y);
            max_y = max_y.max(y);
            trace.push(TraceRow {
                iter: k,
                y_norm_psi: y,
                lipschitz_sample_max: lip_max,
                ma_sup_residual: ma_sup,
                min_eigenvalue: min_eig,
            });
            iterations = k;
            psi = next;
            if y > r {
                match policy {
                    BallPolicy::Enforce => return Err(Error::BallEscape { norm: y, radius: r }),
                    BallPolicy::Report => ball_respected = false,
                }
            }
            let reference = *first_step.get_or_insert(if psi0.is_none() { y } else { step });
            if step <= tol * reference || reference == 0.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                iterations,
                history: ratios,
            });
        }
        let phi = self.invert(&psi)?;
        let (_, final_ma_sup, min_eigenvalue) = self.ma_residual(&phi)?;
        Ok(SolverState {
            psi,
            phi,
            ball_radius: r,
            iterations,
            converged,
            y_history,
            increment_ratios: ratios,
            trace,
            initial_ma_sup,
            final_ma_sup,
            min_eigenvalue,
            max_abs_mean,
            max_y_norm: max_y,
            ball_respected,
        })
    }

    /// `‖φ₁ − φ₂ − mean‖∞` for solves started at `0` and at `−e_a`.
    pub fn uniqueness_check(&self, tol: f64, max_iter: usize, policy: BallPolicy) -> Result<f64> {
        let seed2: Vec<f64> = self.ea().iter().map(|v| -v).collect();
        self.uniqueness_check_with_seeds(None, Some(&seed2), tol, max_iter, policy)
    }

    pub fn uniqueness_check_with_seeds(
        &self,
        seed1: Option<&[f64]>,
        seed2: Option<&[f64]>,
        tol: f64,
        max_iter: usize,
        policy: BallPolicy,
    ) -> Result<f64> {
        let s1 = self.banach_solve(seed1, tol, max_iter, policy)?;
        let s2 = self.banach_solve(seed2, tol, max_iter, policy)?;
        let diff: Vec<f64> = s1.phi.iter().zip(&s2.phi).map(|(a, b)| a - b).collect();
        let m = diff.iter().sum::<f64>() / diff.len() as f64;
        Ok(diff.iter().fold(0.0f64, |acc, v| acc.max((v - m).abs())))
    }
}

/// Result of [`lambda1_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda1 {
    pub value: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Block size of the subspace iteration; larger than the eight-fold first
/// eigenspace of the flat torus.
pub const LAMBDA1_BLOCK: usize = 10;

fn w_orthonormalize(ops: &Operators, block: &mut [Vec<f64>]) -> Result<()> {
    for i in 0..block.len() {
        for j in 0..i {
            let c = ops.inner(&block[i], &block[j]);
            let (head, tail) = block.split_at_mut(i);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= c * y;
            }
        }
        let norm = ops.inner(&block[i], &block[i]).sqrt();
        if !(norm > 0.0) {
            return Err(Error::Domain("degenerate block in subspace iteration".into()));
        }
        block[i].iter_mut().for_each(|x| *x /= norm);
    }
    Ok(())
}

/// Smallest nonzero eigenvalue of `−Δ` by block inverse subspace iteration
/// with Rayleigh-Ritz; `history` holds the lowest Ritz value per sweep.
pub fn lambda1_estimate(ops: &Operators, seed: u64, tol: f64, max_iter: usize) -> Result<Lambda1> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = ops.grid().len();
    let m = LAMBDA1_BLOCK;
    let mut block: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            ops.project(&mut v);
            v
        })
        .collect();
    w_orthonormalize(ops, &mut block)?;
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut ritz: Vec<f64> = Vec::new();
    for k in 1..=max_iter {
        for (c, v) in block.iter_mut().enumerate() {
            // L⁻¹v ≈ v/θ once v is close to a Ritz vector with value θ.
            let guess: Option<Vec<f64>> = ritz.get(c).map(|t| v.iter().map(|x| -x / t).collect());
            let (mut next, _) = ops.invert_laplacian_from(v, guess.as_deref(), 1e-9, 5000)?;
            next.iter_mut().for_each(|x| *x = -*x);
            *v = next;
        }
        w_orthonormalize(ops, &mut block)?;
        let applied: Vec<Vec<f64>> = block
            .iter()
            .map(|v| ops.apply_laplacian(v).into_iter().map(|x| -x).collect())
            .collect();
        let small = nalgebra::DMatrix::from_fn(m, m, |i, j| {
            0.5 * (ops.inner(&block[i], &applied[j]) + ops.inner(&block[j], &applied[i]))
        });
        let eig = small.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        block = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; len];
                for (r, b) in block.iter().enumerate() {
                    let coef = eig.eigenvectors[(r, c)];
                    for (x, y) in v.iter_mut().zip(b) {
                        *x += coef * y;
                    }
                }
                v
            })
            .collect();
        ritz = order.iter().map(|&c| eig.eigenvalues[c]).collect();
        let lowest = ritz[0];
        history.push(lowest);
        if ((lowest - prev) / lowest).abs() < tol {
            return Ok(Lambda1 {
                value: lowest,
                iterations: k,
                history,
            });
        }
        prev = lowest;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        history,
    })
}

/// `‖u‖²_{L²} ≤ λ₁⁻¹‖∇u‖²_{L²}` for random mean-zero fields; returns the
/// ratios `λ₁‖u‖²/‖∇u‖²`, all at most 1 when the inequality holds.
pub fn poincare_ratios(ops: &Operators, lambda1: f64, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let mut u = random_smooth_field(&ops.grid(), &mut rng, 5);
            ops.project(&mut u);
            let l2 = ops.inner(&u, &u) * ops.grid().cell_volume();
            lambda1 * l2 / ops.dirichlet_energy(&u)
        })
        .collect()
}

/// `Σ|∇²u|² / Σ(Δu)²` for random fields; at most 1 on the flat torus.
pub fn bochner_ratios(ops: &Operators, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let mut u = random_smooth_field(&ops.grid(), &mut rng, 5);
            ops.project(&mut u);
            let hess = ops.hessian(&u);
            let lap = ops.apply_laplacian(&u);
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for (i, hh) in hess.iter().enumerate() {
                lhs += ops.w[i] * ops.metric_hess_sq(i, hh);
                rhs += ops.w[i] * lap[i] * lap[i];
            }
            lhs / rhs
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_wraps() {
        let g = TorusGrid::new(8).unwrap();
        let st = Stencil::new(&g);
        for a in 0..4 {
            for i in [0, 7, 100, g.len() - 1] {
                assert_eq!(st.plus(i, a), g.neighbor(i, a, 1));
                assert_eq!(st.minus(i, a), g.neighbor(i, a, -1));
            }
        }
    }

    #[test]
    fn contraction_bound_reference() {
        let n = NormParams::new(0.1, 6.0, 0.01, 16).unwrap();
        assert!((n.contraction_bound() - 0.2332).abs() < 1e-4);
        assert!((n.ball_radius() - 0.046416).abs() < 1e-6);
    }
}
