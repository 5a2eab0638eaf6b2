//! Batch harness: config ingestion, ε-sweeps, slope fits, predictions,
//! cross-record verification and artifact persistence.
//!
//! Layout of a run directory: `<output>/<hash>/record.json`, `fields/*.bin`,
//! `tables/*.csv`, where `<hash>` is the leading 16 hex digits of the
//! SHA-256 of the canonical config JSON.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary::BoundaryData;
use crate::energy::{EnergyBreakdown, Functional};
use crate::error::{config, Error, Result};
use crate::field::{ComplexField, ScalarField};
use crate::grid::{DomainSpec, Grid};
use crate::phase::VortexPoint;
use crate::pinning::{PinningConfig, ScaleDiagnostics, Shape};
use crate::renorm::{
    assemble_expansion, compute_gamma, discrete_optimizer, optimal_offsets, select_inclusions, ExpansionInputs,
    ExpansionLedger, InteriorOffsets, PinningCase, Selection, WG_LADDER,
};
use crate::solver::{default_seeds, minimize_f, SolveOptions, SolveResult};
use crate::special::solve_u;
use crate::testfn::default_offsets;
use crate::vortex::{classify_bad_discs, find_zeros, BadDiscRule, VortexReport};
use crate::{optim::NcgOptions, par};

pub const SCHEMA_VERSION: u32 = 1;

/// How δ follows ε along the ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaRule {
    Fixed { value: f64 },
    /// δ = ε^q with q ∈ (0, 1).
    Power {
        #[serde(default = "third")]
        q: f64,
    },
    /// δ = exp(−|ln ε|^{1/4}).
    StretchedExp,
}

fn third() -> f64 {
    1.0 / 3.0
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::Power { q: third() }
    }
}

impl DeltaRule {
    pub fn delta(&self, eps: f64) -> f64 {
        match self {
            DeltaRule::Fixed { value } => *value,
            DeltaRule::Power { q } => eps.powf(*q),
            DeltaRule::StretchedExp => (-eps.ln().abs().powf(0.25)).exp(),
        }
    }
}

/// Grid resolution per rung.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResolutionRule {
    /// Every rung uses `domain.n`.
    Fixed,
    /// `domain.n` on the first rung, scaled by ε₀/ε (rounded to even) so h/ε
    /// stays constant.
    #[default]
    ScaleWithEpsilon,
}

/// Pinning configuration without the scales, which come from the ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinningTemplate {
    pub centers: Vec<[f64; 2]>,
    #[serde(default)]
    pub shape: Shape,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Number of multistart seeds (1–3: predicted, random, harmonic).
    pub multistart: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// The gradient tolerance is `grad_scale / ε²`.
    pub grad_scale: f64,
    /// Cap on reported bad discs.
    pub max_bad_discs: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolveOptions::default();
        Self { multistart: 3, max_iter: o.ncg.max_iter, rel_tol: o.ncg.rel_tol, grad_scale: o.grad_scale, max_bad_discs: 32 }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            ncg: NcgOptions { max_iter: self.max_iter, rel_tol: self.rel_tol, ..NcgOptions::default() },
            grad_scale: self.grad_scale,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictOptions {
    /// Fourier modes of the inclusion-scale trace in the W̃ infimum.
    pub n_modes: u32,
    /// Resolution of the inclusion-scale problems on B₁.
    pub inclusion_n: usize,
    /// Resolution of the W_g extraction on Ω.
    pub wg_n: usize,
    /// Relative tolerance below which W_g values count as tied.
    pub tie_tol: f64,
    /// γ to use in the expansion; computed when absent.
    pub gamma: Option<f64>,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self { n_modes: 8, inclusion_n: 128, wg_n: 256, tie_tol: 5e-3, gamma: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub domain: DomainSpec,
    pub pinning: PinningTemplate,
    pub boundary: BoundaryData,
    /// The ε ladder (a single rung for plain solves).
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub delta: DeltaRule,
    #[serde(default)]
    pub resolution: ResolutionRule,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub predict: PredictOptions,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// One rung of the ladder, fully resolved.
#[derive(Clone, Debug)]
pub struct Rung {
    pub index: usize,
    pub n: usize,
    pub pinning: PinningConfig,
    pub domain: DomainSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return config(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version));
        }
        self.domain.validate()?;
        if self.epsilon.is_empty() || self.epsilon.iter().any(|e| !(*e > 0.0)) {
            return config("epsilon ladder must be a nonempty list of positive values");
        }
        match self.delta {
            DeltaRule::Fixed { value } if !(value > 0.0) => return config("fixed δ must be positive"),
            DeltaRule::Power { q } if !(q > 0.0 && q < 1.0) => return config("δ = ε^q needs q ∈ (0,1)"),
            _ => {}
        }
        if !(1..=3).contains(&self.solver.multistart) {
            return config("solver.multistart must be 1, 2 or 3");
        }
        if self.boundary.degree < 0 {
            return config("boundary degree must be ≥ 0");
        }
        self.boundary.validate(None).map_err(|e| Error::Config(e.to_string()))?;
        for r in self.rungs() {
            r.pinning.validate(&r.domain)?;
            let h = r.domain.spacing();
            let across = 2.0 * r.pinning.delta * r.pinning.shape.inner_radius() / h;
            if r.pinning.m() > 0 && across < 8.0 {
                return config(format!("rung {}: only {across:.1} cells across each inclusion (need ≥ 8)", r.index));
            }
        }
        Ok(())
    }

    pub fn rungs(&self) -> Vec<Rung> {
        let e0 = self.epsilon[0];
        self.epsilon
            .iter()
            .enumerate()
            .map(|(index, &eps)| {
                let n = match self.resolution {
                    ResolutionRule::Fixed => self.domain.n,
                    ResolutionRule::ScaleWithEpsilon => {
                        let raw = (self.domain.n as f64 * e0 / eps).round() as usize;
                        raw + raw % 2
                    }
                };
                let domain = DomainSpec { n, ..self.domain.clone() };
                let pinning = PinningConfig {
                    centers: self.pinning.centers.clone(),
                    shape: self.pinning.shape.clone(),
                    b: self.pinning.b,
                    delta: self.delta.delta(eps),
                    epsilon: eps,
                };
                Rung { index, n, pinning, domain }
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serialises"))
    }

    /// Hash of everything that fixes the pinning landscape (not g, seeds or solver settings).
    pub fn pinning_hash(&self) -> String {
        let key = serde_json::json!({
            "domain": self.domain,
            "pinning": self.pinning,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "resolution": self.resolution,
        });
        sha256_hex(&serde_json::to_vec(&key).expect("key serialises"))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.join(&self.hash()[..16])
    }

    /// Effective contrast of the energy prediction (1 without inclusions).
    fn b_eff(&self) -> f64 {
        if self.pinning.centers.is_empty() {
            1.0
        } else {
            self.pinning.b
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A number with its units and the formula or procedure it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub units: String,
    pub provenance: String,
}

impl Quantity {
    pub fn new(value: f64, units: &str, provenance: &str) -> Self {
        Self { value, units: units.into(), provenance: provenance.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialSummary {
    pub iterations: usize,
    pub residual: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub energy: Quantity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadDiscSummary {
    pub radius: f64,
    pub threshold: f64,
    pub bad: usize,
    pub representatives: usize,
    pub lambda: f64,
    pub cap_exceeded: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RungRecord {
    pub epsilon: Quantity,
    pub delta: Quantity,
    pub xi: Quantity,
    pub n: usize,
    pub diagnostics: ScaleDiagnostics,
    pub special: SpecialSummary,
    pub energy_f: Quantity,
    pub breakdown: EnergyBreakdown,
    pub iterations: usize,
    pub grad_sup: f64,
    pub converged: bool,
    pub winning_seed: String,
    pub seeds: Vec<crate::solver::SeedOutcome>,
    pub vortices: VortexReport,
    pub zeros_per_inclusion: Vec<usize>,
    pub contained: bool,
    /// Rescaled offsets (x − a_i)/δ of the zeros in each inclusion, sorted.
    pub offsets: Vec<Vec<[f64; 2]>>,
    pub bad_discs: BadDiscSummary,
    /// Leading logarithmic terms predicted at this rung.
    pub predicted_log_terms: Quantity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    /// Basis functions actually fitted.
    pub basis: Vec<String>,
    pub coefficients: Vec<Quantity>,
    /// Predicted values of the same coefficients (intercepts are not predicted).
    pub predicted: Vec<Option<Quantity>>,
    pub relative_error: Vec<Option<f64>>,
    pub residual_norm: f64,
    /// (|ln ε|, |ln δ|, F) per rung.
    pub data: Vec<[f64; 3]>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub pinning_hash: String,
    pub config: ExperimentConfig,
    pub rungs: Vec<RungRecord>,
    pub fit: Option<SweepFit>,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serialises")
    }

    /// SHA-256 of the serialised record.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Fields produced by one rung, persisted next to the record.
pub struct RungFields {
    pub u: ScalarField,
    pub v: ComplexField,
    pub bad_csv: Vec<u8>,
}

/// Leading-order coefficients (|ln ε|, |ln δ|) for the configuration.
pub fn predicted_coefficients(m: usize, d: i64, b: f64) -> (f64, f64) {
    if m == 0 || d == 0 {
        return (PI * d as f64, 0.0);
    }
    let b2 = b * b;
    match PinningCase::of(m, d) {
        PinningCase::I => (PI * d as f64 * b2, PI * (1.0 - b2) * d as f64),
        PinningCase::II => {
            let q = d / m as i64;
            let extra = d - q * m as i64;
            let sq = (m as i64 - extra) * q * q + extra * (q + 1) * (q + 1);
            (PI * d as f64 * b2, PI * (sq as f64 - d as f64 * b2))
        }
    }
}

/// Cheap vortex sites for the predicted seed: balanced degrees over the
/// inclusions nearest the domain centre, spread on small polygons.
fn seed_points(cfg: &ExperimentConfig, rung: &Rung) -> Vec<VortexPoint> {
    let d = cfg.boundary.degree as i64;
    let centers = &rung.pinning.centers;
    if d == 0 {
        return vec![];
    }
    if centers.is_empty() {
        let s = if d == 1 { 0.0 } else { 0.3 * rung.domain.extent() * 0.5 };
        return default_polygon(d as usize, s, rung.domain.center);
    }
    let m = centers.len();
    let mut order: Vec<usize> = (0..m).collect();
    let c = rung.domain.center;
    order.sort_by(|&i, &j| {
        let di = (centers[i][0] - c[0]).hypot(centers[i][1] - c[1]);
        let dj = (centers[j][0] - c[0]).hypot(centers[j][1] - c[1]);
        di.total_cmp(&dj)
    });
    let mut degrees = vec![0i64; m];
    for k in 0..d {
        degrees[order[(k as usize) % m]] += 1;
    }
    let mut pts = vec![];
    for (i, &k) in degrees.iter().enumerate() {
        if k == 0 {
            continue;
        }
        for o in default_offsets(k as usize, &rung.pinning) {
            let a = centers[i];
            pts.push(VortexPoint::unit([a[0] + rung.pinning.delta * o[0], a[1] + rung.pinning.delta * o[1]]));
        }
    }
    pts
}

fn default_polygon(k: usize, s: f64, c: [f64; 2]) -> Vec<VortexPoint> {
    (0..k)
        .map(|j| {
            let t = 0.1234 + 2.0 * PI * j as f64 / k as f64;
            VortexPoint::unit([c[0] + s * t.cos(), c[1] + s * t.sin()])
        })
        .collect()
}

fn solve_rung(cfg: &ExperimentConfig, rung: &Rung) -> Result<(RungRecord, RungFields)> {
    let p = &rung.pinning;
    let grid = Arc::new(Grid::new(&rung.domain)?);
    let special = solve_u(p, &grid)?;
    let (u_min, u_max) = special.u.range();
    let d = cfg.boundary.degree;
    let mut seeds = default_seeds(seed_points(cfg, rung), d, cfg.seed.wrapping_add(rung.index as u64));
    seeds.truncate(cfg.solver.multistart);
    let sol: SolveResult = minimize_f(&special.u, &cfg.boundary, p.epsilon, p.b, &seeds, &cfg.solver.options())?;
    let vortices = find_zeros(&sol.v, Some(p));
    let m = p.m();
    let zeros_per_inclusion = vortices.zeros_per_inclusion(m);
    let mut offsets = vec![Vec::new(); m];
    for z in &vortices.zeros {
        if let Some(i) = z.inclusion {
            offsets[i].push(p.hat(i, z.x));
        }
    }
    for o in &mut offsets {
        o.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    }
    let f = Functional::weighted(&special.u, p.epsilon, p.b)?;
    let bad = classify_bad_discs(&f, &sol.v, p.epsilon, &BadDiscRule::default(), cfg.solver.max_bad_discs);
    let mut bad_csv = Vec::new();
    bad.to_csv(&mut bad_csv)?;
    let (ce, cd) = predicted_coefficients(m, d as i64, p.b);
    let (le, ld) = (p.epsilon.ln().abs(), p.delta.ln().abs());
    let rec = RungRecord {
        epsilon: Quantity::new(p.epsilon, "length", "ladder rung"),
        delta: Quantity::new(p.delta, "length", &format!("δ rule {:?}", cfg.delta)),
        xi: Quantity::new(p.xi(), "dimensionless", "ξ = ε/δ"),
        n: rung.n,
        diagnostics: p.diagnostics(),
        special: SpecialSummary {
            iterations: special.iterations,
            residual: special.residual,
            u_min,
            u_max,
            energy: Quantity::new(special.energy, "energy", "E_ε(U_ε), discrete minimiser with trace 1"),
        },
        energy_f: Quantity::new(sol.energy.total, "energy", "F_ε(v_ε), discrete multistart minimiser"),
        breakdown: sol.energy,
        iterations: sol.iterations,
        grad_sup: sol.grad_sup,
        converged: sol.converged,
        winning_seed: sol.seed.clone(),
        seeds: sol.seeds.clone(),
        contained: vortices.all_contained() && !vortices.zeros.is_empty() || (d == 0 && vortices.zeros.is_empty()),
        zeros_per_inclusion,
        vortices,
        offsets,
        bad_discs: BadDiscSummary {
            radius: bad.radius,
            threshold: bad.threshold,
            bad: bad.bad_count(),
            representatives: bad.representatives.len(),
            lambda: bad.lambda,
            cap_exceeded: bad.cap_exceeded,
        },
        predicted_log_terms: Quantity::new(
            ce * le + cd * ld,
            "energy",
            "leading terms c_ε|ln ε| + c_δ|ln δ| of the energy expansion",
        ),
    };
    Ok((rec, RungFields { u: special.u, v: sol.v, bad_csv }))
}

fn run_rungs(cfg: &ExperimentConfig) -> Result<(Vec<RungRecord>, Vec<RungFields>)> {
    let rungs = cfg.rungs();
    let results = par::map_items(&rungs, |r| solve_rung(cfg, r));
    let mut recs = Vec::new();
    let mut fields = Vec::new();
    for r in results {
        let (rec, f) = r?;
        recs.push(rec);
        fields.push(f);
    }
    Ok((recs, fields))
}

/// Least-squares fit of F against {|ln ε|, |ln δ|, 1}. A constant δ column is
/// folded into the intercept and a δ ∝ ε^q column into a combined |ln ε|
/// coefficient, each with a warning.
pub fn fit_energies(data: &[[f64; 3]], m: usize, d: i64, b: f64) -> Result<SweepFit> {
    let k = data.len();
    let (ce, cd) = predicted_coefficients(m, d, b);
    let le: Vec<f64> = data.iter().map(|r| r[0]).collect();
    let ld: Vec<f64> = data.iter().map(|r| r[1]).collect();
    let y = DVector::from_iterator(k, data.iter().map(|r| r[2]));
    let spread = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = ld.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1.0);
    let ratios: Vec<f64> = le.iter().zip(&ld).map(|(e, l)| l / e).collect();
    let mut warnings = Vec::new();
    let eps_q = Quantity::new(ce, "energy per |ln ε|", "predicted |ln ε| coefficient π d b²");
    let (basis, predicted, cols): (Vec<String>, Vec<Option<Quantity>>, Vec<Vec<f64>>) = if spread(&ld) <= 1e-12 * scale {
        warnings.push("|ln δ| is constant over the ladder: folded into the intercept".into());
        (vec!["|ln eps|".into(), "1".into()], vec![Some(eps_q), None], vec![le.clone(), vec![1.0; k]])
    } else if spread(&ratios) <= 1e-9 * ratios[0].abs().max(1.0) {
        let q = ratios[0];
        warnings.push(format!("|ln δ| = {q:.6}·|ln ε| over the ladder: fitted a combined |ln ε| coefficient"));
        let comb = Quantity::new(ce + q * cd, "energy per |ln ε|", "combined prediction c_ε + q·c_δ with δ = ε^q");
        (vec!["|ln eps| (combined)".into(), "1".into()], vec![Some(comb), None], vec![le.clone(), vec![1.0; k]])
    } else {
        let dq = Quantity::new(cd, "energy per |ln δ|", "predicted |ln δ| coefficient");
        (
            vec!["|ln eps|".into(), "|ln delta|".into(), "1".into()],
            vec![Some(eps_q), Some(dq), None],
            vec![le.clone(), ld.clone(), vec![1.0; k]],
        )
    };
    if k < cols.len() {
        return Err(Error::Input(format!("{k} rungs cannot determine {} coefficients", cols.len())));
    }
    let x = DMatrix::from_fn(k, cols.len(), |i, j| cols[j][i]);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.iter().any(|s| *s <= 1e-10 * smax) {
        return Err(Error::Input("rank-deficient sweep basis".into()));
    }
    let c = svd.solve(&y, 1e-14).map_err(|e| Error::Solver(e.into()))?;
    let residual_norm = (&x * &c - &y).norm();
    let coefficients = basis
        .iter()
        .zip(c.iter())
        .map(|(name, v)| Quantity::new(*v, "energy per basis unit", &format!("least squares on basis {name}")))
        .collect();
    let relative_error = predicted
        .iter()
        .zip(c.iter())
        .map(|(p, v)| p.as_ref().map(|p| (v - p.value).abs() / p.value.abs().max(1e-300)))
        .collect();
    Ok(SweepFit { basis, coefficients, predicted, relative_error, residual_norm, data: data.to_vec(), warnings })
}

/// Refits a persisted record from its per-rung energies.
pub fn refit(record: &RunRecord) -> Result<SweepFit> {
    let cfg = &record.config;
    let data: Vec<[f64; 3]> = record
        .rungs
        .iter()
        .map(|r| [r.epsilon.value.ln().abs(), r.delta.value.ln().abs(), r.energy_f.value])
        .collect();
    fit_energies(&data, cfg.pinning.centers.len(), cfg.boundary.degree as i64, cfg.b_eff())
}

/// Writes the record, fields and tables under the config's run directory.
pub fn persist(cfg: &ExperimentConfig, record: &RunRecord, fields: &[RungFields], name: &str) -> Result<PathBuf> {
    let dir = cfg.run_dir();
    fs::create_dir_all(dir.join("fields"))?;
    fs::create_dir_all(dir.join("tables"))?;
    fs::write(dir.join(name), record.to_json())?;
    for (k, f) in fields.iter().enumerate() {
        f.u.write_bin(&dir.join(format!("fields/u_rung{k}.bin")))?;
        f.v.write_bin(&dir.join(format!("fields/v_rung{k}.bin")))?;
        fs::write(dir.join(format!("tables/bad_discs_rung{k}.csv")), &f.bad_csv)?;
    }
    let mut w = csv::Writer::from_path(dir.join("tables/energies.csv"))?;
    w.write_record(["rung", "epsilon", "delta", "n", "energy_f", "energy_u", "predicted_log_terms", "zeros"])?;
    for (k, r) in record.rungs.iter().enumerate() {
        w.write_record([
            k.to_string(),
            r.epsilon.value.to_string(),
            r.delta.value.to_string(),
            r.n.to_string(),
            r.energy_f.value.to_string(),
            r.special.energy.value.to_string(),
            r.predicted_log_terms.value.to_string(),
            r.vortices.zeros.len().to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("tables/zeros.csv"))?;
    w.write_record(["rung", "x", "y", "winding", "inclusion"])?;
    for (k, r) in record.rungs.iter().enumerate() {
        for z in &r.vortices.zeros {
            w.write_record([
                k.to_string(),
                z.x[0].to_string(),
                z.x[1].to_string(),
                z.winding.to_string(),
                z.inclusion.map(|i| i.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(dir)
}

fn record(cfg: &ExperimentConfig, command: &str, rungs: Vec<RungRecord>, fit: Option<SweepFit>) -> RunRecord {
    let mut warnings = Vec::new();
    for r in &rungs {
        if r.diagnostics.h_warning {
            warnings.push(format!("ε = {}: scale ratio |ln δ|³/|ln ε| = {:.3} exceeds 1", r.epsilon.value, r.diagnostics.h_ratio));
        }
        if !r.converged {
            warnings.push(format!("ε = {}: solver stopped before the tolerances were met", r.epsilon.value));
        }
    }
    if let Some(f) = &fit {
        warnings.extend(f.warnings.iter().cloned());
    }
    RunRecord {
        schema_version: SCHEMA_VERSION,
        command: command.into(),
        config_hash: cfg.hash(),
        pinning_hash: cfg.pinning_hash(),
        config: cfg.clone(),
        rungs,
        fit,
        warnings,
    }
}

/// Solves every rung (usually one) without writing anything.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<(RunRecord, Vec<RungFields>)> {
    let (rungs, fields) = run_rungs(cfg)?;
    Ok((record(cfg, "solve", rungs, None), fields))
}

pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<(RunRecord, PathBuf)> {
    let (rec, fields) = run_solve(cfg)?;
    let dir = persist(cfg, &rec, &fields, "record.json")?;
    Ok((rec, dir))
}

/// Solves the ladder and fits the energies (no persistence).
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(RunRecord, Vec<RungFields>)> {
    if cfg.epsilon.len() < 3 {
        return config("a sweep needs at least three ε rungs");
    }
    let (rungs, fields) = run_rungs(cfg)?;
    let mut rec = record(cfg, "sweep", rungs, None);
    let fit = refit(&rec)?;
    rec.warnings.extend(fit.warnings.iter().cloned());
    rec.fit = Some(fit);
    Ok((rec, fields))
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(RunRecord, PathBuf)> {
    let (rec, fields) = run_sweep(cfg)?;
    let dir = persist(cfg, &rec, &fields, "record.json")?;
    Ok((rec, dir))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub schema_version: u32,
    pub config_hash: String,
    pub epsilon: f64,
    pub delta: f64,
    pub case: Option<PinningCase>,
    /// Optimal degree vectors up to permutation, from the discrete cost.
    pub degree_vectors: Vec<Vec<i64>>,
    /// W_g of every admissible configuration and the minimisers.
    pub selection: Option<Selection>,
    /// Degree carried by each inclusion, one entry per W_g minimiser.
    pub predictions: Vec<Vec<i64>>,
    /// Interior offsets and W̃ per occupied local degree.
    pub interior: Vec<(i64, InteriorOffsets)>,
    pub gamma: Option<Quantity>,
    pub ledger: Option<ExpansionLedger>,
    pub warnings: Vec<String>,
}

pub fn run_predict(cfg: &ExperimentConfig) -> Result<PredictionRecord> {
    let rung = &cfg.rungs()[0];
    let p = &rung.pinning;
    let d = cfg.boundary.degree as i64;
    let m = p.m();
    let mut rec = PredictionRecord {
        schema_version: SCHEMA_VERSION,
        config_hash: cfg.hash(),
        epsilon: p.epsilon,
        delta: p.delta,
        case: None,
        degree_vectors: vec![],
        selection: None,
        predictions: vec![],
        interior: vec![],
        gamma: None,
        ledger: None,
        warnings: vec![],
    };
    if m == 0 || d == 0 {
        rec.warnings.push("no inclusions or zero degree: nothing to allocate".into());
        return Ok(rec);
    }
    rec.case = Some(PinningCase::of(m, d));
    rec.degree_vectors = discrete_optimizer(m, d, p.delta.ln(), p.xi().ln(), p.b)?;
    let grid = Arc::new(Grid::new(&DomainSpec { n: cfg.predict.wg_n, ..cfg.domain.clone() })?);
    let sel = select_inclusions(&grid, &cfg.boundary, &p.centers, d, &WG_LADDER, cfg.predict.tie_tol)?;
    rec.predictions = sel.best_degrees();
    if rec.predictions.len() > 1 {
        rec.warnings.push(format!("{} configurations tie in W_g", rec.predictions.len()));
    }
    let w_g = sel.best.iter().map(|&k| sel.candidates[k].w_g).fold(f64::INFINITY, f64::min);
    rec.selection = Some(sel);
    let local: Vec<i64> = rec.predictions[0].iter().copied().filter(|&k| k > 0).sorted().dedup().collect();
    for &k in &local {
        let off = optimal_offsets(k as usize, p.b, &p.shape, cfg.predict.n_modes, cfg.predict.inclusion_n)?;
        rec.interior.push((k, off));
    }
    let gamma = match cfg.predict.gamma {
        Some(g) => Quantity::new(g, "energy", "γ supplied by the config"),
        None => Quantity::new(
            compute_gamma(0.05, 0.5, 5.0)?.gamma,
            "energy",
            "γ from I(ξ/b, r) − π ln(br/ξ), two-rung extrapolation",
        ),
    };
    let inputs = ExpansionInputs {
        b: p.b,
        degrees: rec.predictions[0].clone(),
        w_g: Some(w_g),
        tilde_w: Some(rec.interior.iter().map(|(k, o)| (*k, o.tilde_w)).collect()),
        gamma: Some(gamma.value),
        tilde_w0: Some(0.0),
    };
    rec.ledger = Some(assemble_expansion(&inputs, p.epsilon, p.delta)?);
    rec.gamma = Some(gamma);
    Ok(rec)
}

pub fn cmd_predict(cfg: &ExperimentConfig) -> Result<(PredictionRecord, PathBuf)> {
    let rec = run_predict(cfg)?;
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("prediction.json"), serde_json::to_string_pretty(&rec)?)?;
    Ok((rec, dir))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetSpread {
    pub rung: usize,
    pub epsilon: f64,
    pub inclusion: usize,
    pub counts: Vec<usize>,
    /// Largest distance between matched offsets over all record pairs (ω units).
    pub max_distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pinning_hash: String,
    pub records: Vec<String>,
    pub spreads: Vec<OffsetSpread>,
    pub max_distance: f64,
    /// Spread above the 0.1 tolerance or mismatched zero counts.
    pub flagged: bool,
}

/// Smallest over matchings of the largest distance between paired offsets.
fn matched_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    (0..b.len())
        .permutations(b.len())
        .map(|perm| {
            a.iter()
                .zip(perm)
                .map(|(p, j)| (p[0] - b[j][0]).hypot(p[1] - b[j][1]))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Compares the rescaled interior offsets across records sharing a pinning landscape.
pub fn cmd_verify(records: &[RunRecord]) -> Result<VerifyReport> {
    if records.len() < 2 {
        return Err(Error::Input("verify needs at least two records".into()));
    }
    let hash = &records[0].pinning_hash;
    if let Some(r) = records.iter().find(|r| &r.pinning_hash != hash) {
        return Err(Error::Input(format!("pinning hash {} differs from {hash}", r.pinning_hash)));
    }
    let mut spreads = Vec::new();
    let mut max_distance: f64 = 0.0;
    let mut flagged = false;
    for (k, rung) in records[0].rungs.iter().enumerate() {
        for i in 0..rung.offsets.len() {
            let sets: Vec<&Vec<[f64; 2]>> = records.iter().map(|r| &r.rungs[k].offsets[i]).collect();
            let counts: Vec<usize> = sets.iter().map(|s| s.len()).collect();
            let dist = if counts.iter().all_equal() {
                let d = sets.iter().tuple_combinations().map(|(a, b)| matched_distance(a, b)).fold(0.0, f64::max);
                max_distance = max_distance.max(d);
                flagged |= d > 0.1;
                Some(d)
            } else {
                flagged = true;
                None
            };
            spreads.push(OffsetSpread { rung: k, epsilon: rung.epsilon.value, inclusion: i, counts, max_distance: dist });
        }
    }
    Ok(VerifyReport {
        pinning_hash: hash.clone(),
        records: records.iter().map(|r| r.config_hash.clone()).collect(),
        spreads,
        max_distance,
        flagged,
    })
}
