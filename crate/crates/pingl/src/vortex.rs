//! Zero detection, winding numbers and bad-disc classification.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::Functional;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::phase::wrap;
use crate::pinning::PinningConfig;

/// A cell whose minimum nodal modulus falls below this is a zero candidate.
pub const ZERO_THRESHOLD: f64 = 0.3;

/// Winding of `v` along a closed node cycle (the last node connects back to the first).
pub fn plaquette_winding(v: &ComplexField, cycle: &[usize]) -> Result<i32> {
    let vals = &v.values;
    for &p in cycle {
        if vals[p].norm() == 0.0 {
            return Err(Error::Input(format!("|v| vanishes at loop node {p}")));
        }
    }
    let mut s = 0.0;
    for k in 0..cycle.len() {
        let (a, b) = (vals[cycle[k]], vals[cycle[(k + 1) % cycle.len()]]);
        s += wrap(b.arg() - a.arg());
    }
    Ok((s / (2.0 * PI)).round() as i32)
}

/// Counter-clockwise node cycle around the axis-aligned block of cells
/// [i0, i1) × [j0, j1).
pub fn rectangle_loop(grid: &Grid, i0: usize, j0: usize, i1: usize, j1: usize) -> Vec<usize> {
    let mut c = Vec::new();
    for i in i0..i1 {
        c.push(grid.idx(i, j0));
    }
    for j in j0..j1 {
        c.push(grid.idx(i1, j));
    }
    for i in (i0 + 1..=i1).rev() {
        c.push(grid.idx(i, j1));
    }
    for j in (j0 + 1..=j1).rev() {
        c.push(grid.idx(i0, j));
    }
    c
}

fn cell_winding(v: &[Complex64], nx: usize, c: usize) -> Option<i32> {
    let (i, j) = (c % (nx - 1), c / (nx - 1));
    let p = j * nx + i;
    let cyc = [p, p + 1, p + nx + 1, p + nx];
    if cyc.iter().any(|&q| v[q].norm() == 0.0) {
        return None;
    }
    let mut s = 0.0;
    for k in 0..4 {
        s += wrap(v[cyc[(k + 1) % 4]].arg() - v[cyc[k]].arg());
    }
    Some((s / (2.0 * PI)).round() as i32)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub x: [f64; 2],
    pub winding: i32,
    /// Index of the inclusion containing the zero, if any.
    pub inclusion: Option<usize>,
    /// Smallest nodal modulus in the cluster.
    pub min_modulus: f64,
    /// Number of cells merged into this zero.
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VortexReport {
    pub zeros: Vec<Zero>,
    pub total_winding: i32,
    /// Min |v| at nodes outside every inclusion (None without a pinning config).
    pub min_modulus_outside: Option<f64>,
    pub warnings: Vec<String>,
}

impl VortexReport {
    pub fn all_contained(&self) -> bool {
        self.zeros.iter().all(|z| z.inclusion.is_some())
    }

    /// Zero count per inclusion (length M).
    pub fn zeros_per_inclusion(&self, m: usize) -> Vec<usize> {
        let mut out = vec![0; m];
        for z in &self.zeros {
            if let Some(i) = z.inclusion {
                out[i] += 1;
            }
        }
        out
    }
}

/// Root of the bilinear interpolant of v in cell (i, j), if it lies inside the cell.
fn bilinear_root(v: &[Complex64], nx: usize, p: usize) -> Option<(f64, f64)> {
    let (a, b, c, d) = (v[p], v[p + 1], v[p + nx], v[p + nx + 1]);
    let f = |s: f64, t: f64| a * (1.0 - s) * (1.0 - t) + b * s * (1.0 - t) + c * (1.0 - s) * t + d * s * t;
    let (mut s, mut t) = (0.5, 0.5);
    for _ in 0..50 {
        let r = f(s, t);
        let ds = (b - a) * (1.0 - t) + (d - c) * t;
        let dt = (c - a) * (1.0 - s) + (d - b) * s;
        // solve [ds dt] [δs δt]ᵀ = −r as a real 2×2 system
        let det = ds.re * dt.im - ds.im * dt.re;
        if det.abs() < 1e-300 {
            return None;
        }
        let us = (-r.re * dt.im + r.im * dt.re) / det;
        let ut = (-ds.re * r.im + ds.im * r.re) / det;
        s += us;
        t += ut;
        if us.abs() + ut.abs() < 1e-13 {
            break;
        }
    }
    ((-1e-9..=1.0 + 1e-9).contains(&s) && (-1e-9..=1.0 + 1e-9).contains(&t)).then_some((s, t))
}

/// Detects zeros as clusters of cells with non-zero winding.
pub fn find_zeros(v: &ComplexField, pinning: Option<&PinningConfig>) -> VortexReport {
    let g = &*v.grid;
    let nx = g.nx;
    let ncells = (nx - 1) * (g.ny - 1);
    let vals = &v.values;
    let mut warnings = Vec::new();
    let mut wind = vec![0i32; ncells];
    let mut total = 0;
    let mut degenerate = 0;
    for c in 0..ncells {
        if !g.cell_active[c] {
            continue;
        }
        match cell_winding(vals, nx, c) {
            Some(w) => {
                wind[c] = w;
                total += w;
            }
            None => degenerate += 1,
        }
    }
    if degenerate > 0 {
        warnings.push(format!("{degenerate} cells touch an exact zero and carry no winding"));
    }
    // cluster 8-adjacent winding cells
    let (cw, ch) = (nx - 1, g.ny - 1);
    let mut seen = vec![false; ncells];
    let mut zeros = Vec::new();
    for c0 in 0..ncells {
        if wind[c0] == 0 || seen[c0] {
            continue;
        }
        let mut stack = vec![c0];
        seen[c0] = true;
        let mut members = Vec::new();
        while let Some(c) = stack.pop() {
            members.push(c);
            let (i, j) = ((c % cw) as i64, (c / cw) as i64);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (ii, jj) = (i + di, j + dj);
                    if ii < 0 || jj < 0 || ii >= cw as i64 || jj >= ch as i64 {
                        continue;
                    }
                    let q = jj as usize * cw + ii as usize;
                    if wind[q] != 0 && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        members.sort_unstable();
        let winding: i32 = members.iter().map(|&c| wind[c]).sum();
        let corner_min = |c: usize| {
            let p = (c / cw) * nx + c % cw;
            [p, p + 1, p + nx, p + nx + 1].iter().map(|&q| vals[q].norm()).fold(f64::INFINITY, f64::min)
        };
        let mean_mod = |c: usize| {
            let p = (c / cw) * nx + c % cw;
            [p, p + 1, p + nx, p + nx + 1].iter().map(|&q| vals[q].norm()).sum::<f64>()
        };
        let best = *members
            .iter()
            .min_by(|&&a, &&b| mean_mod(a).total_cmp(&mean_mod(b)))
            .expect("cluster is non-empty");
        let (i, j) = (best % cw, best / cw);
        let p = j * nx + i;
        let x = match bilinear_root(vals, nx, p) {
            Some((s, t)) => [g.x0 + (i as f64 + s) * g.h, g.y0 + (j as f64 + t) * g.h],
            None => g.cell_center(i, j),
        };
        let min_modulus = members.iter().map(|&c| corner_min(c)).fold(f64::INFINITY, f64::min);
        if members.len() > 1 {
            warnings.push(format!("{} winding cells merged into one zero near ({:.4}, {:.4})", members.len(), x[0], x[1]));
        }
        if min_modulus >= ZERO_THRESHOLD {
            warnings.push(format!("winding cell near ({:.4}, {:.4}) has |v| ≥ {ZERO_THRESHOLD}", x[0], x[1]));
        }
        if winding == 0 {
            warnings.push(format!("cluster near ({:.4}, {:.4}) has zero net winding", x[0], x[1]));
            continue;
        }
        zeros.push(Zero {
            x,
            winding,
            inclusion: pinning.and_then(|cfg| cfg.inclusion_of(x)),
            min_modulus,
            cells: members.len(),
        });
    }
    let min_modulus_outside = pinning.map(|cfg| {
        (0..g.len())
            .filter(|&p| g.on_mask(p) && cfg.inclusion_of(g.pos(p)).is_none())
            .map(|p| vals[p].norm())
            .fold(f64::INFINITY, f64::min)
    });
    VortexReport { zeros, total_winding: total, min_modulus_outside, warnings }
}

/// Threshold rule for bad discs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BadDiscRule {
    /// Bad when the local energy exceeds `c_mu |ln ε|`.
    Mu { c_mu: f64 },
    /// Bad when the local energy exceeds `χ²|ln ε| − c1`.
    Chi { chi: f64, c1: f64 },
}

impl Default for BadDiscRule {
    fn default() -> Self {
        BadDiscRule::Mu { c_mu: 0.25 }
    }
}

impl BadDiscRule {
    pub fn threshold(&self, eps: f64) -> f64 {
        let l = eps.ln().abs();
        match *self {
            BadDiscRule::Mu { c_mu } => c_mu * l,
            BadDiscRule::Chi { chi, c1 } => chi * chi * l - c1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: [f64; 2],
    pub radius: f64,
    pub energy: f64,
    pub bad: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadDiscSet {
    pub radius: f64,
    pub threshold: f64,
    pub discs: Vec<Disc>,
    /// Indices into `discs` of the separated representatives.
    pub representatives: Vec<usize>,
    /// Separation constant reached: representatives are ≥ 8λr apart and
    /// every bad disc centre lies within λr of one of them.
    pub lambda: f64,
    pub max_bad: usize,
    pub cap_exceeded: bool,
}

impl BadDiscSet {
    pub fn bad_count(&self) -> usize {
        self.discs.iter().filter(|d| d.bad).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_csv(std::fs::File::create(path)?)
    }

    /// Columns cx, cy, r, energy, flag.
    pub fn to_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cx", "cy", "r", "energy", "flag"])?;
        for d in &self.discs {
            w.write_record([
                d.center[0].to_string(),
                d.center[1].to_string(),
                d.radius.to_string(),
                d.energy.to_string(),
                if d.bad { "bad".into() } else { "good".to_string() },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Covers Ω with discs of radius ε^{1/4} centred on a square lattice of
/// spacing ε^{1/4} (so every point is within r/√2 of a centre), evaluates the
/// local energy of each, and extracts separated representatives of the bad ones.
pub fn classify_bad_discs(f: &Functional, v: &ComplexField, eps: f64, rule: &BadDiscRule, max_bad: usize) -> BadDiscSet {
    let g = &*f.grid;
    let r = eps.powf(0.25);
    let threshold = rule.threshold(eps);
    let ce = f.cell_energy(&v.values);
    let cw = g.nx - 1;
    let c = g.spec.center;
    let half = 0.5 * g.spec.extent();
    let k = (half / r).ceil() as i64;
    let mut centers = Vec::new();
    for b in -k..=k {
        for a in -k..=k {
            let x = [c[0] + a as f64 * r, c[1] + b as f64 * r];
            if g.spec.contains(x) || g.spec.dist_to_boundary(x) < r {
                centers.push(x);
            }
        }
    }
    let cells: Vec<(usize, [f64; 2])> = (0..ce.len())
        .filter(|&q| g.cell_active[q])
        .map(|q| (q, g.cell_center(q % cw, q / cw)))
        .collect();
    let discs: Vec<Disc> = crate::par::map_items(&centers, |x| {
        let energy: f64 = cells
            .iter()
            .filter(|(_, y)| (y[0] - x[0]).hypot(y[1] - x[1]) < r)
            .map(|(q, _)| ce[*q])
            .sum();
        Disc { center: *x, radius: r, energy, bad: energy > threshold }
    });
    let mut order: Vec<usize> = (0..discs.len()).filter(|&i| discs[i].bad).collect();
    order.sort_by(|&a, &b| discs[b].energy.total_cmp(&discs[a].energy).then(a.cmp(&b)));
    let dist = |a: usize, b: usize| {
        (discs[a].center[0] - discs[b].center[0]).hypot(discs[a].center[1] - discs[b].center[1])
    };
    let mut lambda = 1.0;
    let representatives = loop {
        let mut reps: Vec<usize> = Vec::new();
        for &i in &order {
            if !reps.iter().any(|&j| dist(i, j) <= lambda * r) {
                reps.push(i);
            }
        }
        let separated = reps
            .iter()
            .enumerate()
            .all(|(a, &i)| reps[a + 1..].iter().all(|&j| dist(i, j) >= 8.0 * lambda * r));
        if separated {
            break reps;
        }
        lambda *= 2.0;
    };
    let bad = order.len();
    BadDiscSet { radius: r, threshold, discs, representatives, lambda, max_bad, cap_exceeded: bad > max_bad }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusFloor {
    pub eta: f64,
    pub floor: f64,
    /// (1 − floor)·|ln ε|^{1/3}.
    pub scaled_defect: f64,
}

/// min |v| over mask nodes at distance ≥ η from every exclusion centre.
pub fn modulus_floor_report(v: &ComplexField, exclude: &[[f64; 2]], eta: f64, eps: f64) -> ModulusFloor {
    let g = &*v.grid;
    let floor = (0..g.len())
        .filter(|&p| g.on_mask(p))
        .filter(|&p| {
            let x = g.pos(p);
            exclude.iter().all(|a| (x[0] - a[0]).hypot(x[1] - a[1]) >= eta)
        })
        .map(|p| v.values[p].norm())
        .fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 1.0 };
    ModulusFloor { eta, floor, scaled_defect: (1.0 - floor) * eps.ln().abs().powf(1.0 / 3.0) }
}
