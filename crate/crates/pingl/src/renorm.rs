//! Renormalized-energy quantities: H^{1/2} seminorms, the annulus series,
//! W_g, W̃₂, W̃, the core constant γ, the discrete degree allocation and the
//! assembled energy expansion.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use itertools::Itertools;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryData, PhaseMode};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{DomainSpec, Grid};
use crate::phase::{perforated_energy, solve_phase, wrap, PhaseProblem, PhaseSolution, VortexPoint};
use crate::pinning::Shape;
use crate::solver::{minimize_e, Seed, SolveOptions};

/// Fourier coefficients a_n of a function on a circle of the given radius.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FourierTrace {
    pub coeffs: BTreeMap<i64, Complex64>,
    pub radius: f64,
}

impl FourierTrace {
    pub fn new(coeffs: impl IntoIterator<Item = (i64, Complex64)>, radius: f64) -> Self {
        let mut map = BTreeMap::new();
        for (n, a) in coeffs {
            *map.entry(n).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        Self { coeffs: map, radius }
    }

    /// Coefficients of the phase perturbation φ of a boundary datum.
    pub fn of_boundary(g: &BoundaryData) -> Self {
        Self::new(g.phi_coefficients(), 1.0)
    }

    /// Coefficients of equispaced real samples (θ_k = 2πk/N), |n| < N/2.
    pub fn from_samples(samples: &[f64], radius: f64) -> Self {
        let n = samples.len();
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let half = (n as i64 - 1) / 2;
        let coeffs = (-half..=half).map(|k| (k, buf[k.rem_euclid(n as i64) as usize] / n as f64));
        Self::new(coeffs, radius)
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    /// True when a_{−n} = conj(a_n) for all n (a real function).
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|(&n, a)| (self.coeff(-n) - a.conj()).norm() <= tol)
    }
}

/// |t|²_{H^{1/2}} = Σ |n||a_n|².
pub fn hhalf_seminorm(t: &FourierTrace) -> f64 {
    t.coeffs.iter().map(|(n, a)| n.unsigned_abs() as f64 * a.norm_sqr()).sum()
}

/// (1/2π)∫|∇ψ|² for the harmonic ψ on {1 < |x| < R} with traces `inner`
/// on |x| = 1 and `outer` on |x| = R (coefficients in the angle).
pub fn annulus_energy(inner: &FourierTrace, outer: &FourierTrace, r: f64) -> Result<f64> {
    if !(r > 1.0) {
        return Err(Error::Input(format!("annulus ratio R = {r} must exceed 1")));
    }
    let modes: Vec<i64> = inner.coeffs.keys().chain(outer.coeffs.keys()).copied().sorted().dedup().collect();
    let mut s = 0.0;
    for n in modes {
        let (a, b) = (inner.coeff(n), outer.coeff(n));
        if n == 0 {
            s += (b - a).norm_sqr() / r.ln();
            continue;
        }
        let k = n.unsigned_abs() as i32;
        let rk = r.powi(k);
        let r2k = rk * rk;
        let cross = (a.conj() * b + a * b.conj()).re;
        s += k as f64 / (r2k - 1.0) * ((a.norm_sqr() + b.norm_sqr()) * (r2k + 1.0) - 2.0 * cross * rk);
    }
    Ok(s)
}

/// Phase of equispaced samples of an S¹-valued map with d₀θ removed.
/// Fails if the sampled winding differs from d₀.
pub fn phase_remainder(samples: &[Complex64], d0: i32) -> Result<Vec<f64>> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::Input("need at least three samples".into()));
    }
    let mut phase = Vec::with_capacity(n);
    let mut acc = samples[0].arg();
    phase.push(acc);
    for k in 1..n {
        acc += wrap(samples[k].arg() - samples[k - 1].arg());
        phase.push(acc);
    }
    let total = acc + wrap(samples[0].arg() - samples[n - 1].arg()) - phase[0];
    let winding = (total / (2.0 * PI)).round() as i32;
    if winding != d0 {
        return Err(Error::Input(format!("sampled winding {winding} differs from d0 = {d0}")));
    }
    Ok((0..n).map(|k| phase[k] - d0 as f64 * 2.0 * PI * k as f64 / n as f64).collect())
}

/// (W̃₀, W̃₁): H^{1/2} seminorms of the phase remainders of an outer trace f₀
/// and an inner trace g⁰, both sampled at equispaced angles. The matching
/// Dirichlet energies are π times these values.
pub fn tilde_w01(f0: &[Complex64], g0: &[Complex64], d0: i32) -> Result<(f64, f64)> {
    let a = FourierTrace::from_samples(&phase_remainder(f0, d0)?, 1.0);
    let b = FourierTrace::from_samples(&phase_remainder(g0, d0)?, 1.0);
    Ok((hhalf_seminorm(&a), hhalf_seminorm(&b)))
}

/// Per-inclusion cost π Σ d_i²|ln δ| + π b² Σ|d_i||ln ξ|.
pub fn degree_cost(d: &[i64], ln_delta: f64, ln_xi: f64, b: f64) -> f64 {
    let sq: i64 = d.iter().map(|x| x * x).sum();
    let ab: i64 = d.iter().map(|x| x.abs()).sum();
    PI * sq as f64 * ln_delta.abs() + PI * b * b * ab as f64 * ln_xi.abs()
}

/// All minimisers (as nonincreasing vectors) of [`degree_cost`] over integer
/// vectors of length M with Σ d_i = d and |d_i| ≤ d.
pub fn discrete_optimizer(m: usize, d: i64, ln_delta: f64, ln_xi: f64, b: f64) -> Result<Vec<Vec<i64>>> {
    if m == 0 || d < 1 {
        return Err(Error::Input("need M ≥ 1 and d ≥ 1".into()));
    }
    if !(ln_delta < 0.0 && ln_xi < 0.0 && b > 0.0 && b < 1.0) {
        return Err(Error::Input("need ln δ < 0, ln ξ < 0 and b ∈ (0,1)".into()));
    }
    let mut best = f64::INFINITY;
    let mut out: Vec<Vec<i64>> = Vec::new();
    let mut cur = Vec::with_capacity(m);
    // depth-first over nonincreasing vectors, each entry ≤ the previous one
    fn rec(
        cur: &mut Vec<i64>,
        m: usize,
        rem: i64,
        cap: i64,
        d: i64,
        cost: &dyn Fn(&[i64]) -> f64,
        best: &mut f64,
        out: &mut Vec<Vec<i64>>,
    ) {
        let left = (m - cur.len()) as i64;
        if left == 0 {
            if rem == 0 {
                let c = cost(cur);
                let tol = if best.is_finite() { 1e-12 * best.abs().max(1.0) } else { 0.0 };
                if c < *best - tol {
                    *best = c;
                    out.clear();
                    out.push(cur.clone());
                } else if (c - *best).abs() <= tol {
                    out.push(cur.clone());
                }
            }
            return;
        }
        // remaining entries lie in [−d, v], so rem must be reachable
        for v in (-d..=cap).rev() {
            if rem > v * left || rem < -d * left {
                continue;
            }
            cur.push(v);
            rec(cur, m, rem - v, v, d, cost, best, out);
            cur.pop();
        }
    }
    let cost = |x: &[i64]| degree_cost(x, ln_delta, ln_xi, b);
    rec(&mut cur, m, d, d, d, &cost, &mut best, &mut out);
    out.sort();
    out.reverse();
    Ok(out)
}

/// Fit `y ≈ c₀ + c₁ φ(x)` by least squares; returns (c₀, c₁).
fn fit_affine(xs: &[f64], ys: &[f64], phi: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let fs: Vec<f64> = xs.iter().map(|&x| phi(x)).collect();
    let (sf, sy) = (fs.iter().sum::<f64>(), ys.iter().sum::<f64>());
    let sff: f64 = fs.iter().map(|f| f * f).sum();
    let sfy: f64 = fs.iter().zip(ys).map(|(f, y)| f * y).sum();
    let det = n * sff - sf * sf;
    if det.abs() < 1e-300 {
        return (sy / n, 0.0);
    }
    let c1 = (n * sfy - sf * sy) / det;
    ((sy - c1 * sf) / n, c1)
}

/// A ladder of finite-radius values and the extrapolated limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub value: f64,
    /// (radius, value with the logarithm removed)
    pub ladder: Vec<(f64, f64)>,
    pub slope: f64,
}

fn check_separation(points: &[VortexPoint], rho_max: f64) -> Result<()> {
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if (a.x[0] - b.x[0]).hypot(a.x[1] - b.x[1]) < 4.0 * rho_max {
                return Err(Error::Input(format!(
                    "points closer than 4ρ_max = {}: ({:.4},{:.4}) and ({:.4},{:.4})",
                    4.0 * rho_max,
                    a.x[0],
                    a.x[1],
                    b.x[0],
                    b.x[1]
                )));
            }
        }
    }
    Ok(())
}

pub const WG_LADDER: [f64; 3] = [0.08, 0.04, 0.02];

/// W_g from I_ρ − π Σd_i²|ln ρ| over a ρ ladder, fitted as c₀ + c₁ρ|ln ρ|.
pub fn extract_wg(grid: &Arc<Grid>, g: &BoundaryData, points: &[VortexPoint], ladder: &[f64]) -> Result<Extrapolation> {
    let rho_max = ladder.iter().copied().fold(0.0, f64::max);
    check_separation(points, rho_max)?;
    let dsum: i32 = points.iter().map(|p| p.d).sum();
    if dsum != g.degree {
        return Err(Error::Input(format!("point degrees sum to {dsum}, boundary degree is {}", g.degree)));
    }
    let weight = ScalarField::constant(grid.clone(), 1.0);
    let sol = solve_phase(&PhaseProblem::new(weight.clone(), points.to_vec(), g.clone()))?;
    let d2: f64 = points.iter().map(|p| (p.d * p.d) as f64).sum();
    let mut rows = Vec::with_capacity(ladder.len());
    for &rho in ladder {
        let i_rho = perforated_energy(&sol, &weight, rho)?;
        rows.push((rho, i_rho - PI * d2 * rho.ln().abs()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (c0, c1) = fit_affine(&xs, &ys, |r| r * r.ln().abs());
    Ok(Extrapolation { value: c0, ladder: rows, slope: c1 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PinningCase {
    /// M ≥ d: d inclusions carry one vortex each.
    I,
    /// M < d: every inclusion carries ⌊d/M⌋ or ⌊d/M⌋ + 1 vortices.
    II,
}

impl PinningCase {
    pub fn of(m: usize, d: i64) -> Self {
        if m as i64 >= d { PinningCase::I } else { PinningCase::II }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Degree carried by each inclusion (length M).
    pub degrees: Vec<i64>,
    pub w_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub case: PinningCase,
    /// In canonical enumeration order.
    pub candidates: Vec<Candidate>,
    /// Indices of the minimisers (ties are all reported).
    pub best: Vec<usize>,
    pub tie_tol: f64,
}

impl Selection {
    pub fn best_degrees(&self) -> Vec<Vec<i64>> {
        self.best.iter().map(|&k| self.candidates[k].degrees.clone()).collect()
    }
}

/// Candidate degree vectors: d-subsets with unit degrees (Case I) or the
/// balanced window ⌊d/M⌋ ≤ d_i ≤ ⌊d/M⌋ + 1 with Σ d_i = d (Case II).
pub fn candidate_degrees(m: usize, d: i64) -> Vec<Vec<i64>> {
    match PinningCase::of(m, d) {
        PinningCase::I => (0..m)
            .combinations(d as usize)
            .map(|s| {
                let mut v = vec![0; m];
                for i in s {
                    v[i] = 1;
                }
                v
            })
            .collect(),
        PinningCase::II => {
            let q = d / m as i64;
            let extra = (d - q * m as i64) as usize;
            (0..m)
                .combinations(extra)
                .map(|s| {
                    let mut v = vec![q; m];
                    for i in s {
                        v[i] += 1;
                    }
                    v
                })
                .collect()
        }
    }
}

/// Chooses the configuration minimising the extracted W_g.
pub fn select_inclusions(
    grid: &Arc<Grid>,
    g: &BoundaryData,
    centers: &[[f64; 2]],
    d: i64,
    ladder: &[f64],
    tie_tol: f64,
) -> Result<Selection> {
    let m = centers.len();
    let cands = candidate_degrees(m, d);
    let values = crate::par::map_items(&cands, |deg| -> Result<f64> {
        let pts: Vec<VortexPoint> = deg
            .iter()
            .zip(centers)
            .filter(|(k, _)| **k != 0)
            .map(|(k, c)| VortexPoint { x: *c, d: *k as i32 })
            .collect();
        Ok(extract_wg(grid, g, &pts, ladder)?.value)
    });
    let mut candidates = Vec::with_capacity(cands.len());
    for (deg, w) in cands.into_iter().zip(values) {
        candidates.push(Candidate { degrees: deg, w_g: w? });
    }
    let wmin = candidates.iter().map(|c| c.w_g).fold(f64::INFINITY, f64::min);
    let tol = tie_tol * wmin.abs().max(1.0);
    let best = (0..candidates.len()).filter(|&k| candidates[k].w_g <= wmin + tol).collect();
    Ok(Selection { case: PinningCase::of(m, d), candidates, best, tie_tol: tol })
}

pub const TILDE_W2_LADDER: [f64; 3] = [0.05, 0.035, 0.025];

/// Weight a² on B₁: b² inside ω, 1 outside.
pub fn inclusion_weight(grid: &Arc<Grid>, b: f64, shape: &Shape) -> ScalarField {
    ScalarField::from_fn(grid.clone(), |x| if shape.contains(x) { b * b } else { 1.0 })
}

fn perforated_ladder(sol: &PhaseSolution, weight: &ScalarField, d0: i32, b: f64, ladder: &[f64]) -> Result<Extrapolation> {
    let mut rows = Vec::with_capacity(ladder.len());
    for &r in ladder {
        rows.push((r, perforated_energy(sol, weight, r)? - PI * d0 as f64 * b * b * r.ln().abs()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (c0, c1) = fit_affine(&xs, &ys, |r| r * r);
    Ok(Extrapolation { value: c0, ladder: rows, slope: c1 })
}

/// Problem on the unit disc around one inclusion: grid, weight, points.
pub struct InclusionProblem {
    pub grid: Arc<Grid>,
    pub weight: ScalarField,
    pub points: Vec<VortexPoint>,
    pub b: f64,
}

impl InclusionProblem {
    pub fn new(betas: &[[f64; 2]], b: f64, shape: &Shape, n: usize) -> Result<Self> {
        let grid = Arc::new(Grid::new(&DomainSpec::unit_disc(n))?);
        for (i, x) in betas.iter().enumerate() {
            if !shape.contains(*x) {
                return Err(Error::Input(format!("β_{i} lies outside ω")));
            }
        }
        let weight = inclusion_weight(&grid, b, shape);
        Ok(Self { grid, weight, points: betas.iter().map(|&x| VortexPoint::unit(x)).collect(), b })
    }

    pub fn d0(&self) -> i32 {
        self.points.len() as i32
    }

    /// K(r) for boundary datum g⁰ on ∂B₁.
    pub fn k(&self, g0: &BoundaryData, r: f64) -> Result<f64> {
        let sol = solve_phase(&PhaseProblem::new(self.weight.clone(), self.points.clone(), g0.clone()))?;
        perforated_energy(&sol, &self.weight, r)
    }

    /// W̃₂(β, g⁰): K(r) − π d₀ b²|ln r| extrapolated in r².
    pub fn tilde_w2(&self, g0: &BoundaryData, ladder: &[f64]) -> Result<Extrapolation> {
        if g0.degree != self.d0() {
            return Err(Error::Input(format!("deg g⁰ = {} but {} points", g0.degree, self.d0())));
        }
        let sol = solve_phase(&PhaseProblem::new(self.weight.clone(), self.points.clone(), g0.clone()))?;
        perforated_ladder(&sol, &self.weight, self.d0(), self.b, ladder)
    }
}

/// ½∫_{B₁∖∪B(β_i,r)} a²|∇(θ+ψ₀)|² with a = b in ω, 1 elsewhere.
pub fn perforated_energy_k(r: f64, g0: &BoundaryData, betas: &[[f64; 2]], b: f64, shape: &Shape, n: usize) -> Result<f64> {
    InclusionProblem::new(betas, b, shape, n)?.k(g0, r)
}

pub fn extract_tilde_w2(betas: &[[f64; 2]], g0: &BoundaryData, b: f64, shape: &Shape, n: usize) -> Result<Extrapolation> {
    InclusionProblem::new(betas, b, shape, n)?.tilde_w2(g0, &TILDE_W2_LADDER)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TildeW {
    /// Smallest W̃₁ + W̃₂ found (an upper bound of the infimum), with
    /// W̃₁ in energy units (π Σ|n||a_n|²).
    pub value: f64,
    /// Value with the unperturbed trace e^{i d₀ θ}.
    pub value_unperturbed: f64,
    pub modes: Vec<PhaseMode>,
    pub sweeps: usize,
    pub stagnated: bool,
}

/// inf over g̃ = e^{i(d₀θ + φ)}, φ spanned by cos/sin of modes 1..=n_modes,
/// of π|φ|²_{H^{1/2}} + W̃₂(β, g̃). The objective is quadratic in the mode
/// coefficients; ψ₀ is superposed from one weighted-harmonic solve per
/// mode and the coefficients are found by coordinate descent with exact
/// parabolic line minimisation.
pub fn extract_tilde_w(betas: &[[f64; 2]], b: f64, shape: &Shape, n_modes: u32, n: usize) -> Result<TildeW> {
    let prob = InclusionProblem::new(betas, b, shape, n)?;
    let d0 = prob.d0();
    let base = solve_phase(&PhaseProblem::new(prob.weight.clone(), prob.points.clone(), BoundaryData::degree(d0)))?;
    let mut basis: Vec<(u32, bool, Vec<f64>)> = Vec::new();
    for k in 1..=n_modes {
        for is_sin in [false, true] {
            let f = move |x: [f64; 2]| {
                let t = x[1].atan2(x[0]) * k as f64;
                if is_sin { t.sin() } else { t.cos() }
            };
            basis.push((k, is_sin, base.harmonic_with(f, 1e-10)?));
        }
    }
    let ladder = TILDE_W2_LADDER;
    let objective = |c: &[f64]| -> Result<f64> {
        let mut psi = base.psi.values.clone();
        let mut w1 = 0.0;
        for ((k, _, v), &ck) in basis.iter().zip(c) {
            if ck != 0.0 {
                for (p, x) in psi.iter_mut().zip(v) {
                    *p += ck * x;
                }
            }
            w1 += PI * 0.5 * *k as f64 * ck * ck;
        }
        let sol = base.with_psi(psi);
        Ok(w1 + perforated_ladder(&sol, &prob.weight, d0, b, &ladder)?.value)
    };
    let mut c = vec![0.0; basis.len()];
    let mut f0 = objective(&c)?;
    let value_unperturbed = f0;
    let tau = 0.1;
    let max_sweeps = 40;
    let mut sweeps = 0;
    let mut stagnated = true;
    while sweeps < max_sweeps {
        sweeps += 1;
        let start = f0;
        for k in 0..c.len() {
            let mut cp = c.clone();
            cp[k] += tau;
            let fp = objective(&cp)?;
            cp[k] -= 2.0 * tau;
            let fm = objective(&cp)?;
            let curv = (fp - 2.0 * f0 + fm) / (tau * tau);
            if curv <= 0.0 {
                continue;
            }
            let step = -(fp - fm) / (2.0 * tau * curv);
            let mut cn = c.clone();
            cn[k] += step;
            let fnew = objective(&cn)?;
            if fnew < f0 {
                c = cn;
                f0 = fnew;
            }
        }
        if start - f0 <= 1e-10 * start.abs().max(1.0) {
            stagnated = false;
            break;
        }
    }
    let modes = basis
        .iter()
        .zip(&c)
        .fold(BTreeMap::<u32, PhaseMode>::new(), |mut acc, ((k, is_sin, _), &ck)| {
            let e = acc.entry(*k).or_insert(PhaseMode { n: *k, cos: 0.0, sin: 0.0 });
            if *is_sin { e.sin = ck } else { e.cos = ck }
            acc
        })
        .into_values()
        .collect();
    Ok(TildeW { value: f0, value_unperturbed, modes, sweeps, stagnated })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorOffsets {
    /// Rescaled offsets α̂ (in ω units).
    pub offsets: Vec<[f64; 2]>,
    pub tilde_w: f64,
}

/// Interior vortex offsets minimising W̃ over regular d₀-gons centred at 0
/// (the centre itself for d₀ = 1), searched by golden section on the radius.
pub fn optimal_offsets(d0: usize, b: f64, shape: &Shape, n_modes: u32, n: usize) -> Result<InteriorOffsets> {
    if d0 == 0 {
        return Ok(InteriorOffsets { offsets: vec![], tilde_w: 0.0 });
    }
    // a point exactly at the origin would sit on no grid line for even
    // node counts, but the polygon must avoid grid lines as well
    let tilt = 0.1234;
    let polygon = |s: f64| -> Vec<[f64; 2]> {
        (0..d0)
            .map(|k| {
                let t = tilt + 2.0 * PI * k as f64 / d0 as f64;
                [s * t.cos(), s * t.sin()]
            })
            .collect()
    };
    if d0 == 1 {
        let w = extract_tilde_w(&[[0.0, 0.0]], b, shape, n_modes, n)?;
        return Ok(InteriorOffsets { offsets: vec![[0.0, 0.0]], tilde_w: w.value });
    }
    let rin = shape.inner_radius();
    let eval = |s: f64| -> Result<f64> { Ok(extract_tilde_w(&polygon(s), b, shape, n_modes, n)?.value) };
    let (mut lo, mut hi) = (0.15 * rin, 0.8 * rin);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - gr * (hi - lo);
    let mut x2 = lo + gr * (hi - lo);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    for _ in 0..12 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = eval(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = eval(x2)?;
        }
    }
    let (s, w) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    Ok(InteriorOffsets { offsets: polygon(s), tilde_w: w })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaResult {
    /// Extrapolated to zero core size assuming an O(ξ²) remainder.
    pub gamma: f64,
    /// (ξ/b, I − π ln(br/ξ)) for the two rungs.
    pub estimates: Vec<(f64, f64)>,
    pub r: f64,
}

/// γ from the classical energy on B(0, r) with boundary datum x/r.
/// The grid keeps `cells_per_core` nodes per core length on every rung.
pub fn compute_gamma(xi_over_b: f64, r: f64, cells_per_core: f64) -> Result<GammaResult> {
    let mut estimates = Vec::new();
    for eps in [xi_over_b, 0.5 * xi_over_b] {
        let h = eps / cells_per_core;
        let mut n = (2.0 * r / h).ceil() as usize;
        n += n % 2;
        if r / (2.0 * r / n as f64) < 32.0 {
            return Err(Error::Input(format!("under-resolved: r/h = {} < 32", n / 2)));
        }
        let grid = Arc::new(Grid::new(&DomainSpec::disc(r, n))?);
        let a = ScalarField::constant(grid.clone(), 1.0);
        let seed = Seed::Predicted(vec![VortexPoint::unit([0.0, 0.0])]);
        let res = minimize_e(&a, &BoundaryData::degree(1), eps, &[seed], &SolveOptions::default())?;
        estimates.push((eps, res.energy.total - PI * (r / eps).ln()));
    }
    let gamma = (4.0 * estimates[1].1 - estimates[0].1) / 3.0;
    Ok(GammaResult { gamma, estimates, r })
}

/// One term of an energy expansion with the formula it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerTerm {
    pub name: String,
    pub coefficient: f64,
    /// Multiplier (|ln ε|, |ln δ| or 1) at the evaluated scales.
    pub factor: f64,
    pub value: f64,
    pub units: String,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionLedger {
    pub case: PinningCase,
    pub epsilon: f64,
    pub delta: f64,
    pub terms: Vec<LedgerTerm>,
    pub total: f64,
}

impl ExpansionLedger {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.coefficient)
    }
}

/// Inputs of the expansion; absent components are reported by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionInputs {
    pub b: f64,
    /// Degree carried by each inclusion.
    pub degrees: Vec<i64>,
    pub w_g: Option<f64>,
    /// W̃ for each distinct local degree d₀, as (d₀, value).
    pub tilde_w: Option<Vec<(i64, f64)>>,
    pub gamma: Option<f64>,
    /// W̃₀ of the traces on the inclusion-scale circles (0 for radial traces).
    pub tilde_w0: Option<f64>,
}

pub fn assemble_expansion(inp: &ExpansionInputs, epsilon: f64, delta: f64) -> Result<ExpansionLedger> {
    let mut missing = Vec::new();
    if inp.w_g.is_none() {
        missing.push("w_g");
    }
    if inp.tilde_w.is_none() {
        missing.push("tilde_w");
    }
    if inp.gamma.is_none() {
        missing.push("gamma");
    }
    if inp.degrees.is_empty() {
        missing.push("degrees");
    }
    if !missing.is_empty() {
        return Err(Error::Input(format!("expansion inputs missing: {}", missing.join(", "))));
    }
    let b2 = inp.b * inp.b;
    let d: i64 = inp.degrees.iter().sum();
    let m = inp.degrees.len();
    let case = PinningCase::of(m, d);
    let sq: i64 = inp.degrees.iter().map(|x| x * x).sum();
    let (le, ld) = (epsilon.ln().abs(), delta.ln().abs());
    let tw = inp.tilde_w.as_ref().expect("checked");
    let mut local = 0.0;
    for &k in inp.degrees.iter().filter(|&&k| k != 0) {
        let w = tw
            .iter()
            .find(|(d0, _)| *d0 == k)
            .map(|x| x.1)
            .ok_or_else(|| Error::Input(format!("tilde_w missing for local degree {k}")))?;
        local += w + k as f64 * b2 * inp.gamma.expect("checked") + PI * k as f64 * b2 * inp.b.ln();
    }
    let ld_coef = match case {
        PinningCase::I => PI * (1.0 - b2) * d as f64,
        PinningCase::II => PI * (sq as f64 - d as f64 * b2),
    };
    let ld_src = match case {
        PinningCase::I => "Case I: π(1−b²)d|ln δ|",
        PinningCase::II => "Case II: π(Σd_i² − d b²)|ln δ|",
    };
    let w0 = inp.tilde_w0.unwrap_or(0.0);
    let terms = vec![
        LedgerTerm {
            name: "ln_eps".into(),
            coefficient: PI * d as f64 * b2,
            factor: le,
            value: PI * d as f64 * b2 * le,
            units: "energy per |ln ε|".into(),
            provenance: "bulk vortex cost: π d b²|ln ε|".into(),
        },
        LedgerTerm {
            name: "ln_delta".into(),
            coefficient: ld_coef,
            factor: ld,
            value: ld_coef * ld,
            units: "energy per |ln δ|".into(),
            provenance: ld_src.into(),
        },
        LedgerTerm {
            name: "w_g".into(),
            coefficient: inp.w_g.expect("checked"),
            factor: 1.0,
            value: inp.w_g.expect("checked"),
            units: "energy".into(),
            provenance: "W_g from I_ρ = π Σd_i²|ln ρ| + W_g + o(1)".into(),
        },
        LedgerTerm {
            name: "local".into(),
            coefficient: local,
            factor: 1.0,
            value: local,
            units: "energy".into(),
            provenance: "inclusion scale: Σ_i [W̃(α) + d_i b²γ + π d_i b² ln b]".into(),
        },
        LedgerTerm {
            name: "tilde_w0".into(),
            coefficient: w0,
            factor: 1.0,
            value: w0,
            units: "energy".into(),
            provenance: "outer trace: W̃₀(f₀) = π|ζ₀|²_{H^{1/2}}".into(),
        },
    ];
    let total = terms.iter().fold(0.0, |s, t| s + t.value);
    Ok(ExpansionLedger { case, epsilon, delta, terms, total })
}
