//! Minimisation of E_ε and F_ε under Dirichlet data, with multistart.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryData;
use crate::energy::{energy_e, energy_f, EnergyBreakdown, Functional};
use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::Grid;
use crate::optim::{minimize, NcgOptions};
use crate::par;
use crate::phase::{harmonic_extension, solve_phase, PhaseProblem, VortexPoint};

/// Starting point for one multistart branch.
#[derive(Clone, Debug)]
pub enum Seed {
    /// Unit vortices at the given points, phase-corrected to match g.
    Predicted(Vec<VortexPoint>),
    /// `d` unit vortices at pseudo-random interior points.
    Random { seed: u64, count: usize },
    /// Componentwise discrete harmonic extension of g.
    Harmonic,
    /// An explicit field (its boundary values are overwritten by g).
    Field(ComplexField),
}

impl Seed {
    pub fn label(&self) -> &'static str {
        match self {
            Seed::Predicted(_) => "predicted",
            Seed::Random { .. } => "random",
            Seed::Harmonic => "harmonic",
            Seed::Field(_) => "field",
        }
    }
}

/// The three default seeds: predicted vortex sites, random sites, harmonic extension.
pub fn default_seeds(predicted: Vec<VortexPoint>, degree: i32, seed: u64) -> Vec<Seed> {
    vec![
        Seed::Predicted(predicted),
        Seed::Random { seed, count: degree.unsigned_abs() as usize },
        Seed::Harmonic,
    ]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: String,
    pub energy: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub v: ComplexField,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub grad_sup: f64,
    pub last_rel_decrease: f64,
    pub converged: bool,
    /// Label of the winning seed.
    pub seed: String,
    pub seeds: Vec<SeedOutcome>,
    /// Excluded from records so reruns serialise identically.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Solver settings shared by both energies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub ncg: NcgOptions,
    /// The gradient tolerance is `grad_scale / ε²`.
    pub grad_scale: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { ncg: NcgOptions::default(), grad_scale: 1e-6 }
    }
}

/// Product of unit vortices with a harmonic phase correction matching g, and
/// linear cores of radius `core`.
pub fn vortex_ansatz(grid: &Arc<Grid>, g: &BoundaryData, points: &[VortexPoint], core: f64) -> Result<ComplexField> {
    let prob = PhaseProblem::unweighted(grid, points.to_vec(), g.clone());
    let sol = solve_phase(&prob)?;
    let mut v = sol.unit_map();
    for p in 0..grid.len() {
        if grid.is_free(p) {
            let x = grid.pos(p);
            let m: f64 = points
                .iter()
                .map(|b| ((x[0] - b.x[0]).hypot(x[1] - b.x[1]) / core).min(1.0).powi(b.d.abs()))
                .product();
            v.values[p] *= m;
        }
    }
    g.apply(&mut v);
    Ok(v)
}

/// Nudges a point off grid lines so the phase solve accepts it.
pub(crate) fn off_lattice(grid: &Grid, x: [f64; 2]) -> [f64; 2] {
    let h = grid.h;
    let fix = |c: f64, o: f64| {
        let f = (c - o) / h;
        if (f - f.round()).abs() < 1e-3 { c + 0.013 * h } else { c }
    };
    [fix(x[0], grid.x0), fix(x[1], grid.y0)]
}

fn seed_field(grid: &Arc<Grid>, g: &BoundaryData, eps: f64, seed: &Seed) -> Result<ComplexField> {
    match seed {
        Seed::Field(v) => {
            if !v.grid.same_layout(grid) {
                return Err(Error::Shape("seed field lives on a different grid".into()));
            }
            let mut v = ComplexField { grid: grid.clone(), values: v.values.clone() };
            g.apply(&mut v);
            Ok(v)
        }
        Seed::Harmonic => {
            let mut v = ComplexField::constant(grid.clone(), Complex64::new(0.0, 0.0));
            g.apply(&mut v);
            harmonic_extension(&v)
        }
        Seed::Predicted(points) => {
            let pts: Vec<VortexPoint> =
                points.iter().map(|b| VortexPoint { x: off_lattice(grid, b.x), d: b.d }).collect();
            vortex_ansatz(grid, g, &pts, eps)
        }
        Seed::Random { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let c = grid.spec.center;
            let reach = grid.spec.extent() * 0.5;
            let sign = if g.degree < 0 { -1 } else { 1 };
            let mut pts = Vec::with_capacity(*count);
            while pts.len() < *count {
                let x = [c[0] + reach * rng.random_range(-0.8..0.8), c[1] + reach * rng.random_range(-0.8..0.8)];
                if grid.spec.dist_to_boundary(x) > 0.1 * reach {
                    pts.push(VortexPoint { x: off_lattice(grid, x), d: sign });
                }
            }
            vortex_ansatz(grid, g, &pts, eps)
        }
    }
}

fn multistart(f: &Functional, g: &BoundaryData, eps: f64, seeds: &[Seed], opts: &SolveOptions) -> Result<SolveResult> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let start = Instant::now();
    let ncg = NcgOptions { grad_tol: opts.grad_scale / (eps * eps), ..opts.ncg.clone() };
    let runs = par::map_items(seeds, |s| -> Result<(ComplexField, crate::optim::NcgOutcome)> {
        let mut v = seed_field(&f.grid, g, eps, s)?;
        let out = minimize(f, &mut v.values, &ncg, None)?;
        Ok((v, out))
    });
    let mut best: Option<(usize, ComplexField, crate::optim::NcgOutcome)> = None;
    let mut report = Vec::with_capacity(seeds.len());
    for (k, (s, r)) in seeds.iter().zip(runs).enumerate() {
        match r {
            Ok((v, out)) => {
                report.push(SeedOutcome {
                    seed: s.label().into(),
                    energy: Some(out.energy.total),
                    iterations: out.iterations,
                    error: None,
                });
                // only converged runs compete, unless none converged
                let better = match &best {
                    None => true,
                    Some((_, _, b)) => {
                        (out.converged && !b.converged) || (out.converged == b.converged && out.energy.total < b.energy.total)
                    }
                };
                if better {
                    best = Some((k, v, out));
                }
            }
            Err(e) => report.push(SeedOutcome { seed: s.label().into(), energy: None, iterations: 0, error: Some(e.to_string()) }),
        }
    }
    let (k, v, out) = best.ok_or_else(|| {
        let msgs: Vec<String> = report.iter().filter_map(|r| r.error.clone()).collect();
        Error::Solver(format!("all seeds failed: {}", msgs.join("; ")))
    })?;
    if !out.converged {
        return Err(Error::Solver(format!(
            "no seed converged within {} iterations (best gradient sup {:.3e}, relative decrease {:.3e})",
            ncg.max_iter, out.grad_sup, out.last_rel_decrease
        )));
    }
    Ok(SolveResult {
        v,
        energy: out.energy,
        iterations: out.iterations,
        grad_sup: out.grad_sup,
        last_rel_decrease: out.last_rel_decrease,
        converged: out.converged,
        seed: seeds[k].label().into(),
        seeds: report,
        wall_time: start.elapsed(),
    })
}

/// Minimises F_ε with weight U (b is the admissible lower bound of U).
pub fn minimize_f(
    u: &ScalarField,
    g: &BoundaryData,
    eps: f64,
    b: f64,
    seeds: &[Seed],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let f = Functional::weighted(u, eps, b)?;
    multistart(&f, g, eps, seeds, opts)
}

/// Minimises E_ε with pinning coefficient a.
pub fn minimize_e(a: &ScalarField, g: &BoundaryData, eps: f64, seeds: &[Seed], opts: &SolveOptions) -> Result<SolveResult> {
    let f = Functional::ginzburg_landau(a, eps);
    multistart(&f, g, eps, seeds, opts)
}

/// |E(Uv) − E(U) − F(v)| / max(1, E(Uv)).
pub fn substitution_residual(u: &ScalarField, v: &ComplexField, a: &ScalarField, eps: f64, b: f64) -> Result<f64> {
    let uv = ComplexField {
        grid: v.grid.clone(),
        values: v.values.iter().zip(&u.values).map(|(z, s)| z * *s).collect(),
    };
    let e_uv = energy_e(&uv, a, eps)?.total;
    let e_u = energy_e(&u.to_complex(), a, eps)?.total;
    let f_v = energy_f(v, u, eps, b)?.total;
    Ok((e_uv - e_u - f_v).abs() / e_uv.max(1.0))
}
