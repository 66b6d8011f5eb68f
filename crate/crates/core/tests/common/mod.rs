#![allow(dead_code)]

use std::time::{Duration, Instant};

use kummer_k3::cli::loglog_slope;
use kummer_k3::kummer::{discretization_estimate, GluedData, GluedModel, Region, TorusGrid};
use kummer_k3::solver::{lambda1_estimate, poincare_ratios, BallPolicy, Problem};
use kummer_k3::Result;

/// Verdict and a one-line account of the measured values.
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn from_result(r: Result<Outcome>) -> Outcome {
        r.unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("error: {e}"),
        })
    }
}

pub fn timed<F: FnOnce() -> Outcome>(limit: Duration, f: F) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    let in_time = elapsed < limit;
    o.pass &= in_time;
    o.detail = format!("{}; {:.2}s (limit {}s)", o.detail, elapsed.as_secs_f64(), limit.as_secs());
    o
}

pub const ALPHA: f64 = 0.1;
pub const P: f64 = 6.0;
pub const EPS: f64 = 2.0 - 4.0 / P;

/// Support and scaling of the error density over `a_list`.
pub fn gluing_scaling(zeta: f64, n: usize, a_list: &[f64]) -> Result<Outcome> {
    let grid = TorusGrid::new(n)?;
    let models = a_list
        .iter()
        .map(|&a| GluedModel::new(a, zeta))
        .collect::<Result<Vec<_>>>()?;
    let mut sups = Vec::new();
    let mut ys = Vec::new();
    let mut support_ok = true;
    let mut worst_ratio = 0.0f64;
    for model in models {
        let data = GluedData::new(model, &grid)?;
        let est = discretization_estimate(&model, &grid)?;
        let outside = data.sup_ea_in(Region::Flat).max(data.sup_ea_in(Region::EguchiHanson));
        let bound = (10.0 * est).max(1e-10);
        support_ok &= outside < bound;
        worst_ratio = worst_ratio.max(outside / bound);
        let problem = Problem::new(model, &grid, ALPHA, P)?;
        sups.push(data.sup_ea());
        ys.push(problem.y_norm(&problem.ea())?);
    }
    let s_sup = loglog_slope(a_list, &sups).unwrap_or(f64::NAN);
    let s_y = loglog_slope(a_list, &ys).unwrap_or(f64::NAN);
    let pass = support_ok && (s_sup - 4.0).abs() <= 0.5 && (s_y - EPS).abs() <= 0.4;
    Ok(Outcome {
        pass,
        detail: format!(
            "worst outside-annulus sup over its bound {worst_ratio:.3e}; sup slope {s_sup:.4}; Y slope {s_y:.4}"
        ),
    })
}

/// Solve at one configuration and check convergence, the ball, the residual
/// reduction and positivity.
pub fn end_to_end(zeta: f64, n: usize, a: f64, policy: BallPolicy) -> Result<Outcome> {
    let grid = TorusGrid::new(n)?;
    let problem = Problem::new(GluedModel::new(a, zeta)?, &grid, ALPHA, P)?;
    let s = problem.banach_solve(None, 1e-6, 50, policy)?;
    let in_ball = s.max_y_norm <= s.ball_radius;
    let pass = s.converged && in_ball && s.residual_ratio() <= 0.1 && s.min_eigenvalue > 0.0;
    Ok(Outcome {
        pass,
        detail: format!(
            "converged {} in {}; max |psi|_Y {:.3e} vs R {:.3e}; residual ratio {:.3e} (initial {:.3e}); min eigenvalue {:.4}",
            s.converged,
            s.iterations,
            s.max_y_norm,
            s.ball_radius,
            s.residual_ratio(),
            s.initial_ma_sup,
            s.min_eigenvalue
        ),
    })
}

fn lambda1_at(zeta: f64, n: usize, a: f64) -> Result<f64> {
    let grid = TorusGrid::new(n)?;
    let data = GluedData::new(GluedModel::new(a, zeta)?, &grid)?;
    let ops = kummer_k3::solver::Operators::new(&data.omega0)?;
    Ok(lambda1_estimate(&ops, 0, 1e-10, 200)?.value)
}

fn part<T>(name: &str, r: std::result::Result<T, String>, ok: impl Fn(&T) -> bool, show: impl Fn(&T) -> String) -> (bool, String) {
    match r {
        Ok(v) => (ok(&v), format!("{name} {}", show(&v))),
        Err(e) => (false, format!("{name} error: {e}")),
    }
}

/// Two-seed agreement, spread of `λ₁` over `a_list`, the flat-torus limit
/// and the Poincaré inequality, each evaluated on its own.
pub fn uniqueness_spectrum(zeta: f64, n: usize, a_ref: f64, a_list: &[f64], policy: BallPolicy) -> Result<Outcome> {
    let tol = 1e-6;
    let grid = TorusGrid::new(n)?;
    let reference = GluedModel::new(a_ref, zeta).and_then(|m| Problem::new(m, &grid, ALPHA, P));
    let parts = [
        part(
            "two-seed difference",
            reference
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|p| p.uniqueness_check(tol, 50, policy).map_err(|e| e.to_string())),
            |d| *d < 10.0 * tol,
            |d| format!("{d:.3e}"),
        ),
        part(
            "lambda1 spread",
            a_list.iter().map(|&a| lambda1_at(zeta, n, a)).collect::<Result<Vec<_>>>().map(|l| {
                let max = l.iter().cloned().fold(f64::MIN, f64::max);
                let min = l.iter().cloned().fold(f64::MAX, f64::min);
                (max - min) / min
            })
            .map_err(|e| e.to_string()),
            |s| *s < 0.1,
            |s| format!("{s:.3e}"),
        ),
        part(
            "flat deviation",
            lambda1_at(zeta, n, 1e-6)
                .map(|l| (l / (4.0 * std::f64::consts::PI.powi(2)) - 1.0).abs())
                .map_err(|e| e.to_string()),
            |d| *d < 0.03,
            |d| format!("{d:.3e}"),
        ),
        part(
            "worst Poincare ratio",
            reference.as_ref().map_err(|e| e.to_string()).and_then(|p| {
                let l1 = lambda1_estimate(&p.ops, 0, 1e-10, 200).map_err(|e| e.to_string())?.value;
                Ok(poincare_ratios(&p.ops, l1, 20, 7).into_iter().fold(0.0, f64::max))
            }),
            |r| *r <= 1.0 + 1e-9,
            |r| format!("{r:.6}"),
        ),
    ];
    Ok(Outcome {
        pass: parts.iter().all(|p| p.0),
        detail: parts.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join("; "),
    })
}
