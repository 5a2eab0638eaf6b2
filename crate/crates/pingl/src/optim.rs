//! Nonlinear conjugate gradients with an exact line search.
//!
//! Along any search line the discrete energies are quartic polynomials in the
//! step, so the line minimiser is found from the cubic derivative rather than
//! by backtracking. This keeps the search well-posed even when energy
//! differences drop below floating-point resolution of the total.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBreakdown, Functional};
use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NcgOptions {
    pub max_iter: usize,
    /// Stop once the per-step relative decrease falls below this...
    pub rel_tol: f64,
    /// ...and the L²-normalised gradient sup-norm is below this.
    pub grad_tol: f64,
    /// Reset to steepest descent every this many steps.
    pub restart: usize,
}

impl Default for NcgOptions {
    fn default() -> Self {
        Self { max_iter: 60_000, rel_tol: 1e-12, grad_tol: 1e-6, restart: 2000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NcgOutcome {
    pub iterations: usize,
    pub energy: EnergyBreakdown,
    pub grad_sup: f64,
    pub last_rel_decrease: f64,
    pub converged: bool,
    /// Energy after every step (first entry is the starting energy).
    #[serde(skip)]
    pub trace: Vec<f64>,
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> f64 {
    par::sum_blocks(a.len(), par::VEC_BLOCK, |r| {
        a[r.clone()].iter().zip(&b[r]).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
    })
}

/// Jacobi scaling from the edge weights incident to each free node.
fn diagonal(f: &Functional) -> Vec<f64> {
    let g = &*f.grid;
    let nx = g.nx;
    (0..g.len())
        .map(|p| {
            if !g.is_free(p) {
                return 0.0;
            }
            let s = f.wx[p] + f.wy[p] + f.wx[p - 1] + f.wy[p - nx];
            if s > 0.0 { 1.0 / s } else { 0.0 }
        })
        .collect()
}

/// Smallest t > 0 at which `c1 t + c2 t² + c3 t³ + c4 t⁴` has a local minimum.
/// Requires `c1 < 0`. Returns `None` if the polynomial decreases without bound.
pub fn quartic_step(c: [f64; 4]) -> Option<f64> {
    let [c1, c2, c3, c4] = c;
    let dp = |t: f64| c1 + t * (2.0 * c2 + t * (3.0 * c3 + t * 4.0 * c4));
    // interval breakpoints: positive roots of P'' = 2c2 + 6c3 t + 12c4 t²
    let mut cuts: Vec<f64> = Vec::new();
    let (qa, qb, qc) = (12.0 * c4, 6.0 * c3, 2.0 * c2);
    if qa != 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * s);
            for r in [q / qa, if q != 0.0 { qc / q } else { f64::NAN }] {
                if r.is_finite() && r > 0.0 {
                    cuts.push(r);
                }
            }
        }
    } else if qb != 0.0 {
        let r = -qc / qb;
        if r > 0.0 {
            cuts.push(r);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut lo = 0.0;
    for &hi in &cuts {
        if dp(hi) > 0.0 {
            return Some(bisect(&dp, lo, hi));
        }
        lo = hi;
    }
    // last, unbounded interval
    let scale = if c2 > 0.0 { -c1 / (2.0 * c2) } else { 1.0 };
    let mut hi = lo.max(scale.abs().max(f64::MIN_POSITIVE)) * 2.0;
    for _ in 0..200 {
        if dp(hi) > 0.0 {
            return Some(bisect(&dp, lo, hi));
        }
        lo = hi;
        hi *= 2.0;
    }
    None
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) ≤ 0 < f(hi) and f is monotone on [lo, hi]
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Minimises `f` from `x` in place. `project`, if given, is applied after every
/// step and returns true when it changed the iterate (which restarts the
/// conjugate direction).
pub fn minimize(
    f: &Functional,
    x: &mut [Complex64],
    opts: &NcgOptions,
    mut project: Option<&mut dyn FnMut(&mut [Complex64]) -> bool>,
) -> Result<NcgOutcome> {
    let n = x.len();
    let pre = diagonal(f);
    let mut g = vec![Complex64::new(0.0, 0.0); n];
    let mut e = f.energy_grad(x, &mut g);
    let mut trace = vec![e.total];
    let mut pg: Vec<Complex64> = g.iter().zip(&pre).map(|(z, s)| z * *s).collect();
    let mut d: Vec<Complex64> = pg.iter().map(|z| -z).collect();
    let mut gpg = cdot(&g, &pg);
    let mut sup = f.normalized_sup(&g);
    let mut rel = f64::INFINITY;
    let mut since_restart = 0;
    let mut g_old = g.clone();
    for it in 0..opts.max_iter {
        if sup == 0.0 || (rel < opts.rel_tol && sup < opts.grad_tol) {
            return Ok(NcgOutcome { iterations: it, energy: e, grad_sup: sup, last_rel_decrease: rel, converged: true, trace });
        }
        let mut c = f.line_poly(x, &d);
        if !(c[0] < 0.0) {
            // not a descent direction: fall back to preconditioned steepest descent
            for (dk, pk) in d.iter_mut().zip(&pg) {
                *dk = -pk;
            }
            c = f.line_poly(x, &d);
            if !(c[0] < 0.0) {
                // gradient is numerically zero along every usable direction
                return Ok(NcgOutcome { iterations: it, energy: e, grad_sup: sup, last_rel_decrease: 0.0, converged: sup < opts.grad_tol, trace });
            }
        }
        let t = quartic_step(c).ok_or_else(|| Error::Solver("line search diverged (energy unbounded below)".into()))?;
        let decrease = -(t * (c[0] + t * (c[1] + t * (c[2] + t * c[3]))));
        par::fill_chunks(x, par::VEC_BLOCK, |off, chunk| {
            for (k, xk) in chunk.iter_mut().enumerate() {
                *xk += d[off + k] * t;
            }
        });
        let mut clamped = false;
        if let Some(pr) = project.as_mut() {
            clamped = pr(x);
        }
        std::mem::swap(&mut g, &mut g_old);
        e = f.energy_grad(x, &mut g);
        trace.push(e.total);
        rel = decrease.max(0.0) / e.total.abs().max(f64::MIN_POSITIVE);
        if clamped {
            rel = f64::INFINITY;
        }
        sup = f.normalized_sup(&g);
        for ((pk, gk), s) in pg.iter_mut().zip(&g).zip(&pre) {
            *pk = gk * *s;
        }
        let gpg_new = cdot(&g, &pg);
        let beta = if clamped || since_restart + 1 >= opts.restart || gpg == 0.0 {
            since_restart = 0;
            0.0
        } else {
            since_restart += 1;
            ((gpg_new - cdot(&g_old, &pg)) / gpg).max(0.0)
        };
        gpg = gpg_new;
        par::fill_chunks(&mut d, par::VEC_BLOCK, |off, chunk| {
            for (k, dk) in chunk.iter_mut().enumerate() {
                *dk = -pg[off + k] + *dk * beta;
            }
        });
    }
    Ok(NcgOutcome { iterations: opts.max_iter, energy: e, grad_sup: sup, last_rel_decrease: rel, converged: false, trace })
}
