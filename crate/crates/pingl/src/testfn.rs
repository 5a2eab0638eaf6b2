//! Explicit competitors certifying the energy upper bounds.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::phase::{smoothstep, solve_phase, wrap, PhaseProblem, PhaseSolution, VortexPoint};
use crate::pinning::PinningConfig;
use crate::renorm::phase_remainder;
use crate::solver::off_lattice;

/// Layout parameters shared by both constructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    /// Radius ρ₀ below which each occupied inclusion sees a pure d_i-vortex
    /// phase; the smooth outer phase is blended in over [ρ₀, 2ρ₀].
    pub rho0: f64,
    /// Core radius of every zero.
    pub core: f64,
    /// Physical vortex positions per inclusion.
    pub vortices: Vec<Vec<[f64; 2]>>,
}

fn occupied_rho0(cfg: &PinningConfig, grid: &Grid, degrees: &[i64]) -> f64 {
    let mut m = f64::INFINITY;
    for (i, a) in cfg.centers.iter().enumerate() {
        if degrees[i] == 0 {
            continue;
        }
        m = m.min(grid.spec.dist_to_boundary(*a));
        for (j, c) in cfg.centers.iter().enumerate() {
            if j != i && degrees[j] != 0 {
                m = m.min((a[0] - c[0]).hypot(a[1] - c[1]));
            }
        }
    }
    m / 5.0
}

/// Default rescaled placement of k vortices: a tilted regular k-gon of
/// radius ¼ of the inscribed radius of ω (the centre for k = 1).
pub fn default_offsets(k: usize, cfg: &PinningConfig) -> Vec<[f64; 2]> {
    if k == 1 {
        return vec![[0.0, 0.0]];
    }
    let s = 0.25 * cfg.shape.inner_radius();
    (0..k)
        .map(|j| {
            let t = 0.1234 + 2.0 * PI * j as f64 / k as f64;
            [s * t.cos(), s * t.sin()]
        })
        .collect()
}

/// Phase field glued from the smooth outer phase and pure d_i-vortices.
struct Glue {
    outer: PhaseSolution,
    centers: Vec<[f64; 2]>,
    degrees: Vec<i64>,
    /// H_i(a_i) for every occupied inclusion.
    h_at: Vec<f64>,
    rho0: f64,
}

impl Glue {
    fn new(cfg: &PinningConfig, grid: &Arc<Grid>, g: &BoundaryData, degrees: &[i64], rho0: f64) -> Result<Self> {
        let centers: Vec<[f64; 2]> = cfg.centers.iter().map(|&a| off_lattice(grid, a)).collect();
        let points: Vec<VortexPoint> = centers
            .iter()
            .zip(degrees)
            .filter(|(_, &k)| k != 0)
            .map(|(&x, &k)| VortexPoint { x, d: k as i32 })
            .collect();
        let outer = solve_phase(&PhaseProblem::unweighted(grid, points, g.clone()))?;
        let mut glue = Glue { outer, centers, degrees: degrees.to_vec(), h_at: vec![0.0; degrees.len()], rho0 };
        for i in 0..degrees.len() {
            if degrees[i] != 0 {
                let a = glue.centers[i];
                glue.h_at[i] = glue.outer.psi.sample(a).ok_or_else(|| Error::Input("centre off the grid".into()))?;
            }
        }
        Ok(glue)
    }

    /// H_i(x) − H_i(a_i) = Σ_{k≠i} d_k(θ_k(x) − θ_k(a_i)) + ψ(x) − ψ(a_i).
    fn h_diff(&self, i: usize, x: [f64; 2], psi_x: f64) -> f64 {
        let a = self.centers[i];
        let mut s = psi_x - self.h_at[i];
        for (k, c) in self.centers.iter().enumerate() {
            if k != i && self.degrees[k] != 0 {
                let t1 = (x[1] - c[1]).atan2(x[0] - c[0]);
                let t0 = (a[1] - c[1]).atan2(a[0] - c[0]);
                s += self.degrees[k] as f64 * wrap(t1 - t0);
            }
        }
        s
    }

    /// Phase at node p, with every occupied inclusion reduced to a pure
    /// d_i-vortex inside B(a_i, ρ₀).
    fn phase(&self, p: usize) -> (f64, Option<usize>) {
        let x = self.outer.grid().pos(p);
        let mut phi = self.outer.phase_at(p);
        let psi_x = self.outer.psi.values[p];
        let mut near = None;
        for i in 0..self.centers.len() {
            if self.degrees[i] == 0 {
                continue;
            }
            let a = self.centers[i];
            let r = (x[0] - a[0]).hypot(x[1] - a[1]);
            if r < 2.0 * self.rho0 {
                let zeta = smoothstep((r - self.rho0) / self.rho0);
                phi -= (1.0 - zeta) * self.h_diff(i, x, psi_x);
            }
            if r < self.rho0 {
                near = Some(i);
            }
        }
        (phi, near)
    }
}

/// Case I competitor: unit vortices with linear cores of radius ε at the
/// centres of the inclusions listed in `subset`, the radial vortex phase in
/// B(a_i, ρ₀), and the smooth S¹-valued map with trace g elsewhere.
pub fn build_case_i(cfg: &PinningConfig, grid: &Arc<Grid>, g: &BoundaryData, eps: f64, subset: &[usize]) -> Result<(ComplexField, TestFunctionSpec)> {
    let d = g.degree as usize;
    if subset.len() != d || cfg.m() < d {
        return Err(Error::Input(format!("Case I needs M ≥ d and a subset of size d = {d}")));
    }
    let mut degrees = vec![0i64; cfg.m()];
    for &i in subset {
        if i >= cfg.m() || degrees[i] != 0 {
            return Err(Error::Input("subset indices must be distinct inclusions".into()));
        }
        degrees[i] = 1;
    }
    build_glued(cfg, grid, g, eps, &degrees, &vec![vec![[0.0, 0.0]]; cfg.m()])
}

/// Case II competitor: inclusion i carries d_i unit vortices at
/// a_i + δ α̂_{ij} (`offsets[i]`, rescaled; defaults from
/// [`default_offsets`]) with cores of radius ε, glued to the d_i-vortex
/// phase near a_i and to the smooth map with trace g outside B(a_i, 2ρ₀).
pub fn build_case_ii(
    cfg: &PinningConfig,
    grid: &Arc<Grid>,
    g: &BoundaryData,
    eps: f64,
    degrees: &[i64],
    offsets: Option<&[Vec<[f64; 2]>]>,
) -> Result<(ComplexField, TestFunctionSpec)> {
    if degrees.len() != cfg.m() || degrees.iter().any(|&k| k < 0) {
        return Err(Error::Input("need one nonnegative degree per inclusion".into()));
    }
    if degrees.iter().sum::<i64>() != g.degree as i64 {
        return Err(Error::Input("degrees must sum to the boundary degree".into()));
    }
    let offs: Vec<Vec<[f64; 2]>> = match offsets {
        Some(o) => o.to_vec(),
        None => degrees.iter().map(|&k| if k > 0 { default_offsets(k as usize, cfg) } else { vec![] }).collect(),
    };
    build_glued(cfg, grid, g, eps, degrees, &offs)
}

fn build_glued(
    cfg: &PinningConfig,
    grid: &Arc<Grid>,
    g: &BoundaryData,
    eps: f64,
    degrees: &[i64],
    offsets: &[Vec<[f64; 2]>],
) -> Result<(ComplexField, TestFunctionSpec)> {
    let rho0 = occupied_rho0(cfg, grid, degrees);
    if !(rho0 > 2.0 * eps) {
        return Err(Error::Input(format!("ρ₀ = {rho0:.4} leaves no room for cores of radius {eps}")));
    }
    let glue = Glue::new(cfg, grid, g, degrees, rho0)?;
    // vortex positions and the blending radii of the multi-vortex interiors
    let mut vortices = Vec::with_capacity(cfg.m());
    let mut blend = vec![(0.0, 0.0); cfg.m()];
    for i in 0..cfg.m() {
        let k = degrees[i] as usize;
        if k == 0 {
            vortices.push(vec![]);
            continue;
        }
        if offsets[i].len() != k {
            return Err(Error::Input(format!("inclusion {i} needs {k} offsets")));
        }
        let a = glue.centers[i];
        let pts: Vec<[f64; 2]> = offsets[i]
            .iter()
            .map(|o| off_lattice(grid, [a[0] + cfg.delta * o[0], a[1] + cfg.delta * o[1]]))
            .collect();
        for (j, p) in pts.iter().enumerate() {
            if cfg.inclusion_of(*p) != Some(i) {
                return Err(Error::Input(format!("vortex {j} of inclusion {i} lies outside it")));
            }
            for q in &pts[j + 1..] {
                if (p[0] - q[0]).hypot(p[1] - q[1]) <= grid.h {
                    return Err(Error::Input(format!("two vortices of inclusion {i} share a grid cell")));
                }
            }
        }
        if k > 1 {
            let s = pts.iter().map(|p| (p[0] - a[0]).hypot(p[1] - a[1])).fold(0.0, f64::max);
            blend[i] = (2.0 * s, 3.0 * s);
            if 3.0 * s >= rho0 {
                return Err(Error::Input(format!("inclusion {i}: vortex spread {s:.4} too large for ρ₀ = {rho0:.4}")));
            }
        }
        vortices.push(pts);
    }
    let mut v = ComplexField::constant(grid.clone(), Complex64::new(0.0, 0.0));
    for p in 0..grid.len() {
        if !grid.on_mask(p) {
            continue;
        }
        let x = grid.pos(p);
        let (mut phi, near) = glue.phase(p);
        if let Some(i) = near {
            if degrees[i] > 1 {
                // replace d_i θ_i by Σ_j arg(x − α_ij), blended back over [R₁, R₂]
                let a = glue.centers[i];
                let r = (x[0] - a[0]).hypot(x[1] - a[1]);
                let (r1, r2) = blend[i];
                if r < r2 {
                    let ti = (x[1] - a[1]).atan2(x[0] - a[0]);
                    let dd: f64 = vortices[i].iter().map(|q| wrap(ti - (x[1] - q[1]).atan2(x[0] - q[0]))).sum();
                    let zeta = smoothstep((r - r1) / (r2 - r1));
                    phi -= (1.0 - zeta) * dd;
                }
            }
        }
        let modulus: f64 = vortices
            .iter()
            .flatten()
            .map(|q| ((x[0] - q[0]).hypot(x[1] - q[1]) / eps).min(1.0))
            .product();
        v.values[p] = Complex64::from_polar(modulus, phi);
    }
    g.apply(&mut v);
    Ok((v, TestFunctionSpec { rho0, core: eps, vortices }))
}

/// Extension of a trace f on ∂B_ρ (equispaced samples, winding d₀) to the
/// annulus B(0,3ρ)∖B(0,ρ): the phase and modulus perturbations are faded out
/// over [ρ, 2ρ] so that v = x^{d₀}/|x|^{d₀} on [2ρ, 3ρ]. Nodes outside the
/// annulus are set to zero.
pub fn annulus_extension(trace: &[Complex64], d0: i32, rho: f64, grid: &Arc<Grid>) -> Result<ComplexField> {
    let phi = phase_remainder(trace, d0)?;
    let n = trace.len();
    let modulus: Vec<f64> = trace.iter().map(|z| z.norm()).collect();
    let interp = |vals: &[f64], t: f64| {
        let s = t.rem_euclid(2.0 * PI) / (2.0 * PI) * n as f64;
        let k = s.floor() as usize % n;
        let f = s - s.floor();
        // the phase remainder is periodic, so linear interpolation wraps
        vals[k] * (1.0 - f) + vals[(k + 1) % n] * f
    };
    let mut v = ComplexField::constant(grid.clone(), Complex64::new(0.0, 0.0));
    for p in 0..grid.len() {
        if !grid.on_mask(p) {
            continue;
        }
        let x = grid.pos(p);
        let r = x[0].hypot(x[1]);
        if r < rho || r > 3.0 * rho {
            continue;
        }
        let t = x[1].atan2(x[0]);
        let zeta = smoothstep((r - rho) / rho);
        let m = (1.0 - zeta) * interp(&modulus, t) + zeta;
        let ph = d0 as f64 * t + (1.0 - zeta) * interp(&phi, t);
        v.values[p] = Complex64::from_polar(m, ph);
    }
    Ok(v)
}
