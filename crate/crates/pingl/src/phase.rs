//! Phase formulation: −div(w ∇(θ + ψ)) = 0 with θ = Σ d_i arg(x − β_i).

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::Grid;
use crate::par;

/// A prescribed vortex point with its degree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexPoint {
    pub x: [f64; 2],
    pub d: i32,
}

impl VortexPoint {
    pub fn unit(x: [f64; 2]) -> Self {
        Self { x, d: 1 }
    }
}

/// θ(x) = Σ d_i arg(x − β_i) (a branch; only differences are meaningful).
pub fn singular_phase(points: &[VortexPoint], x: [f64; 2]) -> f64 {
    points.iter().map(|b| b.d as f64 * (x[1] - b.x[1]).atan2(x[0] - b.x[0])).sum()
}

/// Principal-branch difference θ(y) − θ(x), summed per vortex.
pub fn singular_diff(points: &[VortexPoint], x: [f64; 2], y: [f64; 2]) -> f64 {
    points
        .iter()
        .map(|b| {
            let a0 = (x[1] - b.x[1]).atan2(x[0] - b.x[0]);
            let a1 = (y[1] - b.x[1]).atan2(y[0] - b.x[0]);
            b.d as f64 * wrap(a1 - a0)
        })
        .sum()
}

/// ∇θ(x), exact.
pub fn singular_grad(points: &[VortexPoint], x: [f64; 2]) -> [f64; 2] {
    let mut g = [0.0, 0.0];
    for b in points {
        let (dx, dy) = (x[0] - b.x[0], x[1] - b.x[1]);
        let r2 = dx * dx + dy * dy;
        g[0] -= b.d as f64 * dy / r2;
        g[1] += b.d as f64 * dx / r2;
    }
    g
}

/// Maps an angle difference to (−π, π].
#[inline]
pub fn wrap(a: f64) -> f64 {
    let mut t = a % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

/// Weighted phase problem on a grid.
#[derive(Clone, Debug)]
pub struct PhaseProblem {
    /// Nodal weight (a² or U²); edges use the mean of their endpoints.
    pub weight: ScalarField,
    pub points: Vec<VortexPoint>,
    /// Prescribed trace; ψ on boundary nodes is the lift of arg(g e^{−iθ}).
    pub boundary: BoundaryData,
    pub tol: f64,
    pub max_iter: usize,
}

impl PhaseProblem {
    pub fn new(weight: ScalarField, points: Vec<VortexPoint>, boundary: BoundaryData) -> Self {
        Self { weight, points, boundary, tol: 1e-8, max_iter: 50_000 }
    }

    pub fn unweighted(grid: &Arc<Grid>, points: Vec<VortexPoint>, boundary: BoundaryData) -> Self {
        Self::new(ScalarField::constant(grid.clone(), 1.0), points, boundary)
    }
}

#[derive(Clone, Debug)]
pub struct PhaseSolution {
    pub psi: ScalarField,
    pub points: Vec<VortexPoint>,
    /// Edge weights `c_e w̄_e` used by the solve.
    pub wx: Vec<f64>,
    pub wy: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    grad: Vec<[f64; 2]>,
}

fn edge_weights(weight: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = &*weight.grid;
    let w = &weight.values;
    let nx = g.nx;
    let mut wx = g.cx.clone();
    let mut wy = g.cy.clone();
    for p in 0..g.len() {
        if wx[p] > 0.0 {
            wx[p] *= 0.5 * (w[p] + w[p + 1]);
        }
        if wy[p] > 0.0 {
            wy[p] *= 0.5 * (w[p] + w[p + nx]);
        }
    }
    (wx, wy)
}

/// Solves `L x = rhs` on free nodes for the weighted 5-point operator
/// `(Lx)_p = Σ_q w_pq (x_p − x_q)` with x fixed on non-free nodes. Jacobi-
/// preconditioned CG; stops when the residual sup-norm divided by the nodal
/// mass drops below `tol`.
pub fn solve_dirichlet(
    grid: &Grid,
    wx: &[f64],
    wy: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize)> {
    let n = grid.len();
    let nx = grid.nx;
    let diag: Vec<f64> = (0..n)
        .map(|p| if grid.is_free(p) { wx[p] + wy[p] + wx[p - 1] + wy[p - nx] } else { 0.0 })
        .collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        par::fill_chunks(out, par::ROW_BLOCK * nx, |off, chunk| {
            for (k, o) in chunk.iter_mut().enumerate() {
                let p = off + k;
                *o = if grid.is_free(p) {
                    diag[p] * v[p] - wx[p] * v[p + 1] - wx[p - 1] * v[p - 1] - wy[p] * v[p + nx] - wy[p - nx] * v[p - nx]
                } else {
                    0.0
                };
            }
        });
    };
    // residual r = rhs − L x, with fixed values folded in through x itself
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for p in 0..n {
        r[p] = if grid.is_free(p) { rhs[p] - r[p] } else { 0.0 };
    }
    let sup = |r: &[f64]| {
        (0..n).filter(|&p| grid.is_free(p)).map(|p| r[p].abs() / grid.mass[p]).fold(0.0, f64::max)
    };
    let mut z: Vec<f64> = (0..n).map(|p| if diag[p] > 0.0 { r[p] / diag[p] } else { 0.0 }).collect();
    let mut d = z.clone();
    let mut rz = par::dot(&r, &z);
    let mut ad = vec![0.0; n];
    // search directions must vanish on fixed nodes
    let mut res = sup(&r);
    for it in 0..max_iter {
        if res < tol {
            return Ok((res, it));
        }
        apply(&d, &mut ad);
        let dad = par::dot(&d, &ad);
        if !(dad > 0.0) {
            break;
        }
        let alpha = rz / dad;
        par::axpy(alpha, &d, x);
        par::axpy(-alpha, &ad, &mut r);
        if it % 50 == 49 {
            // refresh the recursive residual against drift
            apply(x, &mut ad);
            for p in 0..n {
                r[p] = if grid.is_free(p) { rhs[p] - ad[p] } else { 0.0 };
            }
        }
        res = sup(&r);
        for p in 0..n {
            z[p] = if diag[p] > 0.0 { r[p] / diag[p] } else { 0.0 };
        }
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for p in 0..n {
            d[p] = z[p] + beta * d[p];
        }
    }
    if res < tol {
        return Ok((res, max_iter));
    }
    Err(Error::Solver(format!("CG stalled with residual {res:.3e}")))
}

/// Rejects vortex points lying on grid lines (and hence possibly on nodes).
fn check_points(grid: &Grid, points: &[VortexPoint]) -> Result<()> {
    for (i, b) in points.iter().enumerate() {
        if !grid.spec.contains(b.x) {
            return Err(Error::Input(format!("vortex point {i} lies outside the domain")));
        }
        let fx = (b.x[0] - grid.x0) / grid.h;
        let fy = (b.x[1] - grid.y0) / grid.h;
        let on_x = (fx - fx.round()).abs() < 1e-9;
        let on_y = (fy - fy.round()).abs() < 1e-9;
        if on_x && on_y {
            return Err(Error::Input(format!("vortex point {i} sits on a grid node; perturb it")));
        }
        if on_x || on_y {
            return Err(Error::Input(format!("vortex point {i} sits on a grid line; perturb it")));
        }
        for c in &points[i + 1..] {
            if c.x == b.x {
                return Err(Error::Input("vortex points must be distinct".into()));
            }
        }
    }
    Ok(())
}

/// Lift of arg(g e^{−iθ}) over the boundary nodes by breadth-first unwrapping.
fn boundary_lift(grid: &Grid, points: &[VortexPoint], g: &BoundaryData) -> Vec<f64> {
    let n = grid.len();
    let nx = grid.nx as i64;
    let mut val = vec![f64::NAN; n];
    let c = grid.spec.center;
    let raw = |p: usize| {
        let x = grid.pos(p);
        (g.at(x, c) * Complex64::from_polar(1.0, -singular_phase(points, x))).arg()
    };
    for start in grid.boundary_nodes() {
        if !val[start].is_nan() {
            continue;
        }
        val[start] = raw(start);
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            let (i, j) = ((p % grid.nx) as i64, (p / grid.nx) as i64);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ii, jj) = (i + di, j + dj);
                    if ii < 0 || jj < 0 || ii >= nx || jj >= grid.ny as i64 {
                        continue;
                    }
                    let q = (jj * nx + ii) as usize;
                    if grid.kind[q] != crate::grid::NodeKind::Boundary || !val[q].is_nan() {
                        continue;
                    }
                    let r = raw(q);
                    val[q] = val[p] + wrap(r - val[p]);
                    queue.push_back(q);
                }
            }
        }
    }
    val
}

/// Solves the phase problem. The right-hand side keeps only the part of
/// div(w∇θ) that survives in the continuum (∇w·∇θ), so ψ carries no lattice
/// artefact of the vortex cores.
pub fn solve_phase(prob: &PhaseProblem) -> Result<PhaseSolution> {
    let grid = prob.weight.grid.clone();
    let g = &*grid;
    check_points(g, &prob.points)?;
    let (wx, wy) = edge_weights(&prob.weight);
    let n = g.len();
    let nx = g.nx;
    let lift = boundary_lift(g, &prob.points, &prob.boundary);
    let mut psi = vec![0.0; n];
    for p in 0..n {
        if g.kind[p] == crate::grid::NodeKind::Boundary {
            psi[p] = lift[p];
        }
    }
    let mut rhs = vec![0.0; n];
    for p in 0..n {
        if !g.is_free(p) {
            continue;
        }
        let x = g.pos(p);
        let nb = [(p + 1, wx[p]), (p - 1, wx[p - 1]), (p + nx, wy[p]), (p - nx, wy[p - nx])];
        let wsum: f64 = nb.iter().map(|e| e.1).sum();
        let wbar = wsum / 4.0;
        let mut s = 0.0;
        for &(q, w) in &nb {
            if w != wbar {
                s += (w - wbar) * singular_diff(&prob.points, x, g.pos(q));
            }
        }
        rhs[p] = s;
    }
    let (residual, iterations) = solve_dirichlet(g, &wx, &wy, &rhs, &mut psi, prob.tol, prob.max_iter)?;
    let psi = ScalarField { grid: grid.clone(), values: psi };
    let grad = nodal_gradient(&psi);
    Ok(PhaseSolution { psi, points: prob.points.clone(), wx, wy, residual, iterations, grad })
}

/// Central differences where both neighbours are on the mask, one-sided otherwise.
fn nodal_gradient(f: &ScalarField) -> Vec<[f64; 2]> {
    let g = &*f.grid;
    let v = &f.values;
    let (nx, ny) = (g.nx, g.ny);
    (0..g.len())
        .map(|p| {
            if !g.on_mask(p) {
                return [0.0, 0.0];
            }
            let (i, j) = (p % nx, p / nx);
            let d = |m: Option<usize>, pl: Option<usize>| -> f64 {
                let m = m.filter(|&q| g.on_mask(q));
                let pl = pl.filter(|&q| g.on_mask(q));
                match (m, pl) {
                    (Some(a), Some(b)) => (v[b] - v[a]) / (2.0 * g.h),
                    (None, Some(b)) => (v[b] - v[p]) / g.h,
                    (Some(a), None) => (v[p] - v[a]) / g.h,
                    (None, None) => 0.0,
                }
            };
            [
                d((i > 0).then(|| p - 1), (i + 1 < nx).then(|| p + 1)),
                d((j > 0).then(|| p - nx), (j + 1 < ny).then(|| p + nx)),
            ]
        })
        .collect()
}

impl PhaseSolution {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.psi.grid
    }

    /// Same points and weights with a different correction ψ (for
    /// superposing solutions that share the right-hand side).
    pub fn with_psi(&self, psi: Vec<f64>) -> PhaseSolution {
        let psi = ScalarField { grid: self.psi.grid.clone(), values: psi };
        let grad = nodal_gradient(&psi);
        PhaseSolution { psi, points: self.points.clone(), wx: self.wx.clone(), wy: self.wy.clone(), residual: self.residual, iterations: self.iterations, grad }
    }

    /// Weighted-harmonic function with boundary values `f(x)` on boundary
    /// nodes (no singular part), using this solution's edge weights.
    pub fn harmonic_with(&self, f: impl Fn([f64; 2]) -> f64, tol: f64) -> Result<Vec<f64>> {
        let g = &**self.grid();
        let mut x = vec![0.0; g.len()];
        for p in 0..g.len() {
            if g.kind[p] == crate::grid::NodeKind::Boundary {
                x[p] = f(g.pos(p));
            }
        }
        let rhs = vec![0.0; g.len()];
        solve_dirichlet(g, &self.wx, &self.wy, &rhs, &mut x, tol, 50_000)?;
        Ok(x)
    }

    /// Bilinearly interpolated ∇ψ.
    pub fn grad_psi(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let g = &**self.grid();
        let (i, j, fx, fy) = g.locate(x)?;
        let p = g.idx(i, j);
        let c = [p, p + 1, p + g.nx, p + g.nx + 1];
        if c.iter().any(|&q| !g.on_mask(q)) {
            return None;
        }
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        let mut out = [0.0, 0.0];
        for (k, &q) in c.iter().enumerate() {
            out[0] += w[k] * self.grad[q][0];
            out[1] += w[k] * self.grad[q][1];
        }
        Some(out)
    }

    /// Total phase θ + ψ at node p.
    pub fn phase_at(&self, p: usize) -> f64 {
        singular_phase(&self.points, self.grid().pos(p)) + self.psi.values[p]
    }

    /// S¹-valued map e^{i(θ+ψ)} on the mask.
    pub fn unit_map(&self) -> ComplexField {
        let g = self.grid().clone();
        let mut out = ComplexField::constant(g.clone(), Complex64::new(0.0, 0.0));
        for p in 0..g.len() {
            if g.on_mask(p) {
                out.values[p] = Complex64::from_polar(1.0, self.phase_at(p));
            }
        }
        out
    }

    /// Lattice flux Σ w_e Δ(θ+ψ) out of the node set {p : inside(x_p)}.
    pub fn lattice_flux(&self, inside: impl Fn([f64; 2]) -> bool) -> f64 {
        let g = &**self.grid();
        let nx = g.nx;
        let mut flux = 0.0;
        for p in 0..g.len() {
            if !g.on_mask(p) {
                continue;
            }
            let xp = g.pos(p);
            let ip = inside(xp);
            for (q, w) in [(p + 1, self.wx[p]), (p + nx, self.wy[p])] {
                if w == 0.0 {
                    continue;
                }
                let xq = g.pos(q);
                let iq = inside(xq);
                if ip == iq {
                    continue;
                }
                let dphi = singular_diff(&self.points, xp, xq) + self.psi.values[q] - self.psi.values[p];
                flux += if ip { w * dphi } else { -w * dphi };
            }
        }
        flux
    }
}

/// A disc excluded from the energy integral.
#[derive(Clone, Copy, Debug)]
pub struct Hole {
    pub center: [f64; 2],
    pub d: i32,
    pub radius: f64,
}

/// Quintic smoothstep: 0 for s ≤ 0, 1 for s ≥ 1, C² in between.
#[inline]
pub fn smoothstep(s: f64) -> f64 {
    let t = s.clamp(0.0, 1.0);
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// ½∫_{Ω∖∪B(β_i,ρ)} w |∇(θ + ψ)|².
///
/// A smooth partition of unity splits the integral: away from the points it
/// is the edge quadrature of the grid, inside B(β_i, R_i) it is done in polar
/// coordinates with the singular part d_i²/r² integrated exactly. R_i is half
/// the distance from β_i to the nearest other point, ∂Ω or weight interface.
pub fn perforated_energy(sol: &PhaseSolution, weight: &ScalarField, rho: f64) -> Result<f64> {
    let g = &**sol.grid();
    let pts = &sol.points;
    let mut holes = Vec::with_capacity(pts.len());
    for (i, b) in pts.iter().enumerate() {
        let wb = weight.sample(b.x).ok_or_else(|| Error::Input("vortex point off the mask".into()))?;
        let mut reach = g.spec.dist_to_boundary(b.x);
        for (j, c) in pts.iter().enumerate() {
            if j != i {
                reach = reach.min((b.x[0] - c.x[0]).hypot(b.x[1] - c.x[1]));
            }
        }
        // nearest node where the weight differs from its value at β
        for p in 0..g.len() {
            if g.on_mask(p) && (weight.values[p] - wb).abs() > 1e-12 {
                let x = g.pos(p);
                reach = reach.min((x[0] - b.x[0]).hypot(x[1] - b.x[1]) - g.h);
            }
        }
        let r = 0.5 * reach;
        if !(rho < 0.5 * r) {
            return Err(Error::Input(format!(
                "hole radius {rho} too large for point {i} (needs < {:.4})",
                0.5 * r
            )));
        }
        holes.push((Hole { center: b.x, d: b.d, radius: rho }, r, wb));
    }
    let chi = |x: [f64; 2]| -> f64 {
        holes
            .iter()
            .map(|(hole, r, _)| {
                let s = (x[0] - hole.center[0]).hypot(x[1] - hole.center[1]);
                1.0 - smoothstep((s - 0.5 * r) / (0.5 * r))
            })
            .sum()
    };
    let nx = g.nx;
    let psi = &sol.psi.values;
    let outer = par::sum_blocks(g.ny, par::ROW_BLOCK, |rows| {
        let mut s = 0.0;
        for p in rows.start * nx..rows.end * nx {
            for (q, w) in [(p + 1, sol.wx[p]), (p + nx, sol.wy[p])] {
                if w == 0.0 {
                    continue;
                }
                let (xp, xq) = (g.pos(p), g.pos(q));
                let mid = [0.5 * (xp[0] + xq[0]), 0.5 * (xp[1] + xq[1])];
                let c = 1.0 - chi(mid);
                if c <= 0.0 {
                    continue;
                }
                let dphi = singular_diff(pts, xp, xq) + psi[q] - psi[p];
                s += w * c * dphi * dphi;
            }
        }
        s
    });
    let gl = gauss_legendre(24);
    let ntheta = 96;
    let mut inner = 0.0;
    for (i, (hole, r, wb)) in holes.iter().enumerate() {
        let others: Vec<VortexPoint> = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
        let d2 = (hole.d * hole.d) as f64;
        let chi_r = |s: f64| 1.0 - smoothstep((s - 0.5 * r) / (0.5 * r));
        // singular part: 2π d² ∫ χ/r dr
        let mut sing = (0.5 * r / rho).ln();
        let (a, bnd) = (0.5 * r, *r);
        for &(t, w) in &gl {
            let s = 0.5 * (a + bnd) + 0.5 * (bnd - a) * t;
            sing += 0.5 * (bnd - a) * w * chi_r(s) / s;
        }
        let mut smooth = 0.0;
        for (a, bnd) in [(rho, 0.5 * r), (0.5 * r, *r)] {
            for &(t, w) in &gl {
                let s = 0.5 * (a + bnd) + 0.5 * (bnd - a) * t;
                let mut ring = 0.0;
                for k in 0..ntheta {
                    let th = 2.0 * PI * (k as f64 + 0.5) / ntheta as f64;
                    let x = [hole.center[0] + s * th.cos(), hole.center[1] + s * th.sin()];
                    let gp = sol.grad_psi(x).ok_or_else(|| Error::Input("quadrature point off the mask".into()))?;
                    let gt = singular_grad(&others, x);
                    ring += (gp[0] + gt[0]).powi(2) + (gp[1] + gt[1]).powi(2);
                }
                smooth += 0.5 * (bnd - a) * w * chi_r(s) * s * ring * 2.0 * PI / ntheta as f64;
            }
        }
        // the cross term 2 d ∇θ_i·G integrates to zero on every circle (G is curl-free)
        inner += 0.5 * wb * (2.0 * PI * d2 * sing + smooth);
    }
    Ok(0.5 * outer + inner)
}

/// Discrete harmonic extension of the boundary values of `v` (componentwise).
pub fn harmonic_extension(v: &ComplexField) -> Result<ComplexField> {
    let g = &*v.grid;
    let zero = vec![0.0; g.len()];
    let mut re: Vec<f64> = v.values.iter().map(|z| if z.re.is_finite() { z.re } else { 0.0 }).collect();
    let mut im: Vec<f64> = v.values.iter().map(|z| z.im).collect();
    for p in 0..g.len() {
        if g.is_free(p) {
            re[p] = 0.0;
            im[p] = 0.0;
        }
    }
    solve_dirichlet(g, &g.cx, &g.cy, &zero, &mut re, 1e-10, 50_000)?;
    solve_dirichlet(g, &g.cx, &g.cy, &zero, &mut im, 1e-10, 50_000)?;
    Ok(ComplexField {
        grid: v.grid.clone(),
        values: re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect(),
    })
}
