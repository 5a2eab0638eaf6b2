//! Discrete energies E_ε, F_ε and their gradients.
//!
//! Both are instances of one quartic functional
//!
//! ```text
//! G(v) = ½ Σ_e w_e |v_q − v_p|² + Σ_p β_p (t_p − |v_p|²)²
//! ```
//!
//! with plaquette-midpoint edge weights and nodal cell-area quadrature:
//! E uses `w_e = c_e`, `β = m/(4ε²)`, `t = a²`; F uses `w_e = c_e Ū_e²`
//! (Ū the edge mean of U), `β = m U⁴/(4ε²)`, `t = 1`. With these choices the
//! substitution identity E(Uv) = E(U) + F(v) holds up to an O(h²) edge term.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::Grid;
use crate::par;

/// Slack allowed on weight bounds b ≤ U ≤ 1.
pub const WEIGHT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub gradient: f64,
    pub potential: f64,
}

impl EnergyBreakdown {
    fn from_parts(gradient: f64, potential: f64) -> Self {
        Self { total: gradient + potential, gradient, potential }
    }
}

/// Quartic functional on a grid; see the module docs.
#[derive(Clone, Debug)]
pub struct Functional {
    pub grid: Arc<Grid>,
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
    pub beta: Vec<f64>,
    pub target: Vec<f64>,
}

impl Functional {
    /// E_ε with pinning coefficient `a`.
    pub fn ginzburg_landau(a: &ScalarField, eps: f64) -> Self {
        let g = a.grid.clone();
        let k = 1.0 / (4.0 * eps * eps);
        Self {
            wx: g.cx.clone(),
            wy: g.cy.clone(),
            beta: g.mass.iter().map(|m| m * k).collect(),
            target: a.values.iter().map(|x| x * x).collect(),
            grid: g,
        }
    }

    /// F_ε with weight U. Fails if U leaves [b − tol, 1 + tol] on the mask.
    pub fn weighted(u: &ScalarField, eps: f64, b: f64) -> Result<Self> {
        let g = u.grid.clone();
        let (lo, hi) = u.range();
        if lo < b - WEIGHT_TOL || hi > 1.0 + WEIGHT_TOL {
            return Err(Error::Invariant(format!("weight range [{lo}, {hi}] leaves [{b}, 1]")));
        }
        let uv = &u.values;
        let nx = g.nx;
        let k = 1.0 / (4.0 * eps * eps);
        let mut wx = g.cx.clone();
        let mut wy = g.cy.clone();
        for p in 0..g.len() {
            if wx[p] > 0.0 {
                let m = 0.5 * (uv[p] + uv[p + 1]);
                wx[p] *= m * m;
            }
            if wy[p] > 0.0 {
                let m = 0.5 * (uv[p] + uv[p + nx]);
                wy[p] *= m * m;
            }
        }
        let beta = g.mass.iter().zip(uv).map(|(m, x)| m * k * x.powi(4)).collect();
        Ok(Self { wx, wy, beta, target: vec![1.0; g.len()], grid: g })
    }

    fn rows(&self) -> usize {
        self.grid.ny
    }

    /// Energy split into gradient and potential parts.
    pub fn energy(&self, v: &[Complex64]) -> EnergyBreakdown {
        let g = &*self.grid;
        let nx = g.nx;
        let [eg, ep] = par::sum_blocks_n::<2, _>(self.rows(), par::ROW_BLOCK, |rows| {
            let mut eg = 0.0;
            let mut ep = 0.0;
            for p in rows.start * nx..rows.end * nx {
                let w = self.wx[p];
                if w > 0.0 {
                    eg += w * (v[p + 1] - v[p]).norm_sqr();
                }
                let w = self.wy[p];
                if w > 0.0 {
                    eg += w * (v[p + nx] - v[p]).norm_sqr();
                }
                let bt = self.beta[p];
                if bt > 0.0 {
                    let d = self.target[p] - v[p].norm_sqr();
                    ep += bt * d * d;
                }
            }
            [eg, ep]
        });
        EnergyBreakdown::from_parts(0.5 * eg, ep)
    }

    /// Energy and gradient with respect to (Re v, Im v) packed as complex.
    /// The gradient vanishes on fixed (non-free) nodes.
    pub fn energy_grad(&self, v: &[Complex64], grad: &mut [Complex64]) -> EnergyBreakdown {
        let g = &*self.grid;
        let nx = g.nx;
        let parts = par::map_chunks_mut(grad, par::ROW_BLOCK * nx, |off, chunk| {
            let mut eg = 0.0;
            let mut ep = 0.0;
            for (k, out) in chunk.iter_mut().enumerate() {
                let p = off + k;
                let vp = v[p];
                let mut gp = Complex64::new(0.0, 0.0);
                let w = self.wx[p];
                if w > 0.0 {
                    let d = v[p + 1] - vp;
                    eg += w * d.norm_sqr();
                    gp -= d * w;
                }
                let w = self.wy[p];
                if w > 0.0 {
                    let d = v[p + nx] - vp;
                    eg += w * d.norm_sqr();
                    gp -= d * w;
                }
                if p >= 1 {
                    let w = self.wx[p - 1];
                    if w > 0.0 {
                        gp += (vp - v[p - 1]) * w;
                    }
                }
                if p >= nx {
                    let w = self.wy[p - nx];
                    if w > 0.0 {
                        gp += (vp - v[p - nx]) * w;
                    }
                }
                let bt = self.beta[p];
                if bt > 0.0 {
                    let d = self.target[p] - vp.norm_sqr();
                    ep += bt * d * d;
                    gp -= vp * (4.0 * bt * d);
                }
                *out = if g.is_free(p) { gp } else { Complex64::new(0.0, 0.0) };
            }
            [eg, ep]
        });
        let (eg, ep) = parts.iter().fold((0.0, 0.0), |a, q| (a.0 + q[0], a.1 + q[1]));
        EnergyBreakdown::from_parts(0.5 * eg, ep)
    }

    /// Coefficients `[c1, c2, c3, c4]` of G(v + t d) − G(v) as a polynomial in t.
    pub fn line_poly(&self, v: &[Complex64], d: &[Complex64]) -> [f64; 4] {
        let g = &*self.grid;
        let nx = g.nx;
        par::sum_blocks_n::<4, _>(self.rows(), par::ROW_BLOCK, |rows| {
            let mut c = [0.0; 4];
            for p in rows.start * nx..rows.end * nx {
                let w = self.wx[p];
                if w > 0.0 {
                    let dv = v[p + 1] - v[p];
                    let dd = d[p + 1] - d[p];
                    c[0] += w * (dv.re * dd.re + dv.im * dd.im);
                    c[1] += 0.5 * w * dd.norm_sqr();
                }
                let w = self.wy[p];
                if w > 0.0 {
                    let dv = v[p + nx] - v[p];
                    let dd = d[p + nx] - d[p];
                    c[0] += w * (dv.re * dd.re + dv.im * dd.im);
                    c[1] += 0.5 * w * dd.norm_sqr();
                }
                let bt = self.beta[p];
                if bt > 0.0 {
                    let dd = self.target[p] - v[p].norm_sqr();
                    let b = 2.0 * (v[p].re * d[p].re + v[p].im * d[p].im);
                    let cc = d[p].norm_sqr();
                    c[0] -= 2.0 * bt * dd * b;
                    c[1] += bt * (b * b - 2.0 * dd * cc);
                    c[2] += 2.0 * bt * b * cc;
                    c[3] += bt * cc * cc;
                }
            }
            c
        })
    }

    /// Sup over free nodes of |∇G|/m_p, the L²-normalised gradient.
    pub fn normalized_sup(&self, grad: &[Complex64]) -> f64 {
        let g = &*self.grid;
        grad.iter()
            .enumerate()
            .filter(|(p, _)| g.is_free(*p))
            .map(|(p, z)| z.norm() / g.mass[p])
            .fold(0.0, f64::max)
    }

    /// Energy attributed to each cell (indexed like `Grid::cell_active`);
    /// sums to the total energy.
    pub fn cell_energy(&self, v: &[Complex64]) -> Vec<f64> {
        let g = &*self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut out = vec![0.0; (nx - 1) * (ny - 1)];
        let ncell = |p: usize| g.mass[p] / (0.25 * g.h * g.h);
        par::fill_chunks(&mut out, par::ROW_BLOCK * (nx - 1), |off, chunk| {
            for (k, e) in chunk.iter_mut().enumerate() {
                let c = off + k;
                if !g.cell_active[c] {
                    continue;
                }
                let (i, j) = (c % (nx - 1), c / (nx - 1));
                let p = j * nx + i;
                let edge = |a: usize, b: usize, w: f64, cnt: f64| 0.5 * (w / cnt) * 0.5 * (v[b] - v[a]).norm_sqr();
                let mut s = edge(p, p + 1, self.wx[p], g.cx[p])
                    + edge(p + nx, p + nx + 1, self.wx[p + nx], g.cx[p + nx])
                    + edge(p, p + nx, self.wy[p], g.cy[p])
                    + edge(p + 1, p + nx + 1, self.wy[p + 1], g.cy[p + 1]);
                for q in [p, p + 1, p + nx, p + nx + 1] {
                    let d = self.target[q] - v[q].norm_sqr();
                    s += self.beta[q] / ncell(q) * d * d;
                }
                *e = s;
            }
        });
        out
    }

    /// Energy of the cells whose centres satisfy `keep`.
    pub fn energy_in(&self, v: &[Complex64], keep: impl Fn([f64; 2]) -> bool) -> f64 {
        let g = &*self.grid;
        let ce = self.cell_energy(v);
        let mut s = 0.0;
        for j in 0..g.ny - 1 {
            for i in 0..g.nx - 1 {
                let c = j * (g.nx - 1) + i;
                if g.cell_active[c] && keep(g.cell_center(i, j)) {
                    s += ce[c];
                }
            }
        }
        s
    }
}

/// E_ε(u) = ½∫ |∇u|² + (a² − |u|²)²/(2ε²).
pub fn energy_e(u: &ComplexField, a: &ScalarField, eps: f64) -> Result<EnergyBreakdown> {
    check_same(&u.grid, &a.grid)?;
    Ok(Functional::ginzburg_landau(a, eps).energy(&u.values))
}

/// F_ε(v) = ½∫ U²|∇v|² + U⁴(1 − |v|²)²/(2ε²); `b` is the admissible lower
/// bound of the weight.
pub fn energy_f(v: &ComplexField, u: &ScalarField, eps: f64, b: f64) -> Result<EnergyBreakdown> {
    check_same(&v.grid, &u.grid)?;
    Ok(Functional::weighted(u, eps, b)?.energy(&v.values))
}

pub(crate) fn check_same(a: &Grid, b: &Grid) -> Result<()> {
    if std::ptr::eq(a, b) || a.same_layout(b) {
        Ok(())
    } else {
        Err(Error::Shape("fields live on different grids".into()))
    }
}

/// Resamples v̂(x̂) = v(a + δx̂) onto `target`, whose extent must cover B(0, ρ/δ).
pub fn rescale_hat(
    v: &ComplexField,
    center: [f64; 2],
    rho: f64,
    delta: f64,
    target: &Arc<Grid>,
) -> Result<ComplexField> {
    let reach = rho / delta;
    let covered = match target.spec.radius() {
        Some(r) => r + 1e-12 >= reach,
        None => target.spec.extent() * 0.5 + 1e-12 >= reach,
    };
    if !covered {
        return Err(Error::Shape(format!("ρ/δ = {reach} exceeds the target grid extent")));
    }
    let mut out = ComplexField::constant(target.clone(), Complex64::new(0.0, 0.0));
    for p in 0..target.len() {
        if !target.on_mask(p) {
            continue;
        }
        let xh = target.pos(p);
        let x = [center[0] + delta * xh[0], center[1] + delta * xh[1]];
        out.values[p] = v
            .sample(x)
            .ok_or_else(|| Error::Shape(format!("source field does not cover {x:?}")))?;
    }
    Ok(out)
}

/// Real counterpart of [`rescale_hat`], used for the weight Û.
pub fn rescale_hat_scalar(
    u: &ScalarField,
    center: [f64; 2],
    delta: f64,
    target: &Arc<Grid>,
) -> Result<ScalarField> {
    let mut out = ScalarField::constant(target.clone(), 0.0);
    for p in 0..target.len() {
        if !target.on_mask(p) {
            continue;
        }
        let xh = target.pos(p);
        let x = [center[0] + delta * xh[0], center[1] + delta * xh[1]];
        out.values[p] = u
            .sample(x)
            .ok_or_else(|| Error::Shape(format!("source field does not cover {x:?}")))?;
    }
    Ok(out)
}
