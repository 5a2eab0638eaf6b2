//! Dirichlet data g(θ) = (1 − m(θ)) exp(i(dθ + φ(θ))).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::field::ComplexField;

/// One real Fourier mode `cos_coef·cos(nθ) + sin_coef·sin(nθ)` of φ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMode {
    pub n: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Optional modulus dip m(θ) = amplitude·(1 + cos(nθ))/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusPerturbation {
    pub amplitude: f64,
    pub n: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryData {
    pub degree: i32,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub phase_modes: Vec<PhaseMode>,
    #[serde(default)]
    pub modulus: Option<ModulusPerturbation>,
}

impl BoundaryData {
    pub fn degree(d: i32) -> Self {
        Self { degree: d, offset: 0.0, phase_modes: vec![], modulus: None }
    }

    pub fn with_modes(mut self, modes: Vec<PhaseMode>) -> Self {
        self.phase_modes = modes;
        self
    }

    /// Perturbation φ(θ) without the dθ part (includes the constant offset).
    pub fn phi(&self, theta: f64) -> f64 {
        self.offset
            + self
                .phase_modes
                .iter()
                .map(|m| m.cos * (m.n as f64 * theta).cos() + m.sin * (m.n as f64 * theta).sin())
                .sum::<f64>()
    }

    /// Lifted phase dθ + φ(θ).
    pub fn phase(&self, theta: f64) -> f64 {
        self.degree as f64 * theta + self.phi(theta)
    }

    pub fn modulus_at(&self, theta: f64) -> f64 {
        match &self.modulus {
            Some(m) => 1.0 - m.amplitude * 0.5 * (1.0 + (m.n as f64 * theta).cos()),
            None => 1.0,
        }
    }

    pub fn trace(&self, theta: f64) -> Complex64 {
        Complex64::from_polar(self.modulus_at(theta), self.phase(theta))
    }

    /// Trace evaluated at the angular position of `x` about `center`.
    pub fn at(&self, x: [f64; 2], center: [f64; 2]) -> Complex64 {
        self.trace((x[1] - center[1]).atan2(x[0] - center[0]))
    }

    /// Winding of the trace sampled at `n` equispaced angles.
    pub fn sampled_winding(&self, n: usize) -> i64 {
        let mut total = 0.0;
        for k in 0..n {
            let a = self.trace(2.0 * PI * k as f64 / n as f64);
            let b = self.trace(2.0 * PI * (k + 1) as f64 / n as f64);
            total += (b / a).arg();
        }
        (total / (2.0 * PI)).round() as i64
    }

    /// Fourier coefficients a_n of φ (real phase, so a_{−n} = conj a_n).
    pub fn phi_coefficients(&self) -> Vec<(i64, Complex64)> {
        let mut out = vec![(0, Complex64::new(self.offset, 0.0))];
        for m in &self.phase_modes {
            if m.n == 0 {
                out[0].1 += m.cos;
                continue;
            }
            let a = Complex64::new(0.5 * m.cos, -0.5 * m.sin);
            out.push((m.n as i64, a));
            out.push((-(m.n as i64), a.conj()));
        }
        out
    }

    pub fn validate(&self, epsilon: Option<f64>) -> Result<()> {
        if let Some(m) = &self.modulus {
            if !(m.amplitude >= 0.0) {
                return config("modulus perturbation amplitude must be nonnegative");
            }
            if let Some(eps) = epsilon {
                if m.amplitude > eps {
                    return config("modulus perturbation exceeds ε");
                }
            }
        }
        let w = self.sampled_winding(4096);
        if w != self.degree as i64 {
            return config(format!("sampled trace winds {w} times, expected {}", self.degree));
        }
        Ok(())
    }

    /// Writes g at every boundary node of `v`'s grid.
    pub fn apply(&self, v: &mut ComplexField) {
        let g = v.grid.clone();
        let c = g.spec.center;
        for p in g.boundary_nodes() {
            v.values[p] = self.at(g.pos(p), c);
        }
    }
}
