//! The special solution U_ε: the real minimiser of E_ε with U = 1 on ∂Ω.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::{Functional, WEIGHT_TOL};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;
use crate::optim::{self, NcgOptions};
use crate::pinning::{build_pinning_field, PinningConfig};

/// Starting point of the U solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UInit {
    /// U ≡ a_δ (default; starts in the right well).
    Pinning,
    /// U ≡ 1.
    One,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct USolveOptions {
    pub init: UInit,
    /// Clamp iterates to [b, 1].
    pub project: bool,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Euler–Lagrange residual tolerance (L²-normalised, sup norm).
    pub residual_tol: f64,
}

impl Default for USolveOptions {
    fn default() -> Self {
        Self { init: UInit::Pinning, project: true, max_iter: 20_000, rel_tol: 1e-12, residual_tol: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct SpecialSolution {
    pub u: ScalarField,
    pub a: ScalarField,
    pub residual: f64,
    pub iterations: usize,
    pub energy: f64,
    /// Energy after every iteration.
    pub trace: Vec<f64>,
    /// Set when ε is resolved by fewer than 2 cells.
    pub underresolved: bool,
}

pub fn solve_u(cfg: &PinningConfig, grid: &Arc<Grid>) -> Result<SpecialSolution> {
    solve_u_with(cfg, grid, &USolveOptions::default())
}

pub fn solve_u_with(cfg: &PinningConfig, grid: &Arc<Grid>, opts: &USolveOptions) -> Result<SpecialSolution> {
    let a = build_pinning_field(cfg, grid)?;
    let f = Functional::ginzburg_landau(&a, cfg.epsilon);
    let mut x: Vec<Complex64> = match opts.init {
        UInit::Pinning => a.values.iter().map(|&s| Complex64::new(s, 0.0)).collect(),
        UInit::One => a.values.iter().map(|&s| Complex64::new(if s > 0.0 { 1.0 } else { 0.0 }, 0.0)).collect(),
    };
    for p in grid.boundary_nodes() {
        x[p] = Complex64::new(1.0, 0.0);
    }
    let b = cfg.b;
    let mut clamp = |v: &mut [Complex64]| {
        let mut hit = false;
        for z in v.iter_mut() {
            if z.re != 0.0 && (z.re < b || z.re > 1.0) {
                z.re = z.re.clamp(b, 1.0);
                hit = true;
            }
        }
        hit
    };
    let ncg = NcgOptions { max_iter: opts.max_iter, rel_tol: opts.rel_tol, grad_tol: opts.residual_tol, restart: 5000 };
    let out = optim::minimize(&f, &mut x, &ncg, if opts.project { Some(&mut clamp) } else { None })?;
    if !out.converged {
        return Err(Error::Solver(format!(
            "U solve did not converge in {} iterations (residual {:.3e}, last relative decrease {:.3e})",
            out.iterations, out.grad_sup, out.last_rel_decrease
        )));
    }
    let u = ScalarField { grid: grid.clone(), values: x.iter().map(|z| z.re).collect() };
    Ok(SpecialSolution {
        u,
        a,
        residual: out.grad_sup,
        iterations: out.iterations,
        energy: out.energy.total,
        trace: out.trace,
        underresolved: cfg.epsilon / grid.h < 2.0,
    })
}

impl SpecialSolution {
    /// b − tol ≤ U ≤ 1 + tol on the mask.
    pub fn check_bounds(&self, b: f64) -> Result<()> {
        let (lo, hi) = self.u.range();
        if lo < b - WEIGHT_TOL || hi > 1.0 + WEIGHT_TOL {
            return Err(Error::Invariant(format!("U range [{lo}, {hi}] leaves [{b}, 1]")));
        }
        Ok(())
    }
}

/// One row of the decay table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShellRow {
    #[serde(rename = "R")]
    pub r: f64,
    pub max_dev: f64,
    pub max_grad: f64,
}

/// Decay of |a_δ − U| and |∇U| away from ∂ω_δ with fitted constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UEstimateReport {
    pub rows: Vec<ShellRow>,
    /// Envelope fit max_dev ≤ C e^{−cR/ε}.
    #[serde(rename = "fitted_C")]
    pub fitted_c_dev: f64,
    pub fitted_c: f64,
    /// Envelope fit max_grad ≤ C e^{−cR/ε}/ε.
    pub fitted_c_grad: f64,
    pub fitted_rate_grad: f64,
    /// √t/4 with t = b(1+b), for comparison only.
    pub predicted_rate: f64,
}

/// Distance from `x` to the boundary of the nearest inclusion, sampled on a
/// fine polygon of ∂ω.
fn dist_to_inclusions(cfg: &PinningConfig, x: [f64; 2], outline: &[[f64; 2]]) -> f64 {
    let mut best = f64::INFINITY;
    for a in &cfg.centers {
        for w in outline.windows(2) {
            let p = [a[0] + cfg.delta * w[0][0], a[1] + cfg.delta * w[0][1]];
            let q = [a[0] + cfg.delta * w[1][0], a[1] + cfg.delta * w[1][1]];
            best = best.min(seg_dist(x, p, q));
        }
    }
    best
}

fn seg_dist(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 { (((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (x[0] - a[0] - t * dx).hypot(x[1] - a[1] - t * dy)
}

fn shape_outline(cfg: &PinningConfig) -> Vec<[f64; 2]> {
    use crate::pinning::Shape;
    match &cfg.shape {
        Shape::Disc { radius } => (0..=720)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 720.0;
                [radius * t.cos(), radius * t.sin()]
            })
            .collect(),
        Shape::Polygon { vertices } => {
            let mut v = vertices.clone();
            v.push(vertices[0]);
            v
        }
    }
}

/// Nodal gradient magnitude by central differences (one-sided at the mask edge).
pub fn grad_magnitude(u: &ScalarField) -> Vec<f64> {
    let g = &*u.grid;
    let nx = g.nx;
    let v = &u.values;
    (0..g.len())
        .map(|p| {
            if !g.is_free(p) {
                return 0.0;
            }
            let gx = (v[p + 1] - v[p - 1]) / (2.0 * g.h);
            let gy = (v[p + nx] - v[p - nx]) / (2.0 * g.h);
            gx.hypot(gy)
        })
        .collect()
}

/// Tabulates the decay of U towards a_δ on the shells V_R for
/// R ∈ `ladder` (multiples of ε) and fits envelope constants.
pub fn u_estimate_report(sol: &SpecialSolution, cfg: &PinningConfig, ladder: &[f64]) -> UEstimateReport {
    let g = &*sol.u.grid;
    let eps = cfg.epsilon;
    let outline = shape_outline(cfg);
    let grad = grad_magnitude(&sol.u);
    let nodes: Vec<(f64, f64, f64)> = (0..g.len())
        .filter(|&p| g.is_free(p))
        .map(|p| {
            let dist = if cfg.m() == 0 { f64::INFINITY } else { dist_to_inclusions(cfg, g.pos(p), &outline) };
            (dist, (sol.a.values[p] - sol.u.values[p]).abs(), grad[p])
        })
        .collect();
    let rows: Vec<ShellRow> = ladder
        .iter()
        .map(|&k| {
            let r = k * eps;
            let (mut dev, mut gr) = (0.0f64, 0.0f64);
            for &(dist, d, gg) in &nodes {
                if dist >= r {
                    dev = dev.max(d);
                    gr = gr.max(gg);
                }
            }
            ShellRow { r, max_dev: dev, max_grad: gr }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.r / eps).collect();
    let (c_dev, rate_dev) = envelope(&xs, &rows.iter().map(|r| r.max_dev).collect::<Vec<_>>());
    let (c_grad, rate_grad) = envelope(&xs, &rows.iter().map(|r| r.max_grad * eps).collect::<Vec<_>>());
    let t = cfg.b * (1.0 + cfg.b);
    UEstimateReport {
        rows,
        fitted_c_dev: c_dev,
        fitted_c: rate_dev,
        fitted_c_grad: c_grad,
        fitted_rate_grad: rate_grad,
        predicted_rate: t.sqrt() / 4.0,
    }
}

/// Least-squares slope of ln y against x, then the smallest prefactor making
/// `C e^{−c x}` an upper envelope of the data. Zero data yields (0, 0).
fn envelope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &v)| v > 0.0).map(|(&a, &v)| (a, v.ln())).collect();
    if pts.len() < 2 {
        return (y.iter().cloned().fold(0.0, f64::max), 0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rate = -sxy / sxx;
    let c = pts.iter().map(|p| (p.1 + rate * p.0).exp()).fold(0.0, f64::max);
    (c, rate)
}
