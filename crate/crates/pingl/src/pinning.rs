//! Pinning configuration, the coefficient a_δ and scale diagnostics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::field::ScalarField;
use crate::grid::{DomainSpec, Grid};

/// Reference inclusion shape ω, with ω̄ ⊂ B(0,1) and 0 ∈ ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    Disc { radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Default for Shape {
    fn default() -> Self {
        Shape::Disc { radius: 0.5 }
    }
}

impl Shape {
    /// Membership of a rescaled point x̂ in ω (open set).
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match self {
            Shape::Disc { radius } => x[0].hypot(x[1]) < *radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut inside = false;
                let mut j = n - 1;
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[j]);
                    if (a[1] > x[1]) != (b[1] > x[1]) && x[0] < (b[0] - a[0]) * (x[1] - a[1]) / (b[1] - a[1]) + a[0] {
                        inside = !inside;
                    }
                    j = i;
                }
                inside
            }
        }
    }

    /// Smallest radius R with ω ⊂ B(0, R).
    pub fn outer_radius(&self) -> f64 {
        match self {
            Shape::Disc { radius } => *radius,
            Shape::Polygon { vertices } => vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max),
        }
    }

    /// Largest radius r with B(0, r) ⊂ ω.
    pub fn inner_radius(&self) -> f64 {
        match self {
            Shape::Disc { radius } => *radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| seg_dist([0.0, 0.0], vertices[i], vertices[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Distance from a rescaled interior point to ∂ω.
    pub fn dist_to_boundary(&self, x: [f64; 2]) -> f64 {
        match self {
            Shape::Disc { radius } => (radius - x[0].hypot(x[1])).abs(),
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).map(|i| seg_dist(x, vertices[i], vertices[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Disc { radius } if *radius > 0.0 && *radius < 1.0 => {}
            Shape::Disc { .. } => return config("disc shape radius must lie in (0,1)"),
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return config("polygon shape needs at least three vertices");
                }
                if self.outer_radius() >= 1.0 {
                    return config("polygon shape must lie inside B(0,1)");
                }
                if !self.contains([0.0, 0.0]) {
                    return config("polygon shape must contain the origin");
                }
            }
        }
        Ok(())
    }
}

fn seg_dist(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 { (((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (x[0] - a[0] - t * dx).hypot(x[1] - a[1] - t * dy)
}

/// Inclusion centres, shape, contrast and the two small scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinningConfig {
    pub centers: Vec<[f64; 2]>,
    #[serde(default)]
    pub shape: Shape,
    pub b: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl PinningConfig {
    pub fn m(&self) -> usize {
        self.centers.len()
    }

    pub fn xi(&self) -> f64 {
        self.epsilon / self.delta
    }

    /// Index of the inclusion containing `x`, if any.
    pub fn inclusion_of(&self, x: [f64; 2]) -> Option<usize> {
        self.centers.iter().position(|a| {
            self.shape.contains([(x[0] - a[0]) / self.delta, (x[1] - a[1]) / self.delta])
        })
    }

    /// Rescaled offset (x − a_i)/δ.
    pub fn hat(&self, i: usize, x: [f64; 2]) -> [f64; 2] {
        let a = self.centers[i];
        [(x[0] - a[0]) / self.delta, (x[1] - a[1]) / self.delta]
    }

    pub fn diagnostics(&self) -> ScaleDiagnostics {
        ScaleDiagnostics::new(self.epsilon, self.delta)
    }

    /// Checks the scale, shape and geometry invariants against a domain.
    pub fn validate(&self, dom: &DomainSpec) -> Result<()> {
        self.shape.validate()?;
        if !(self.b > 0.0 && self.b < 1.0) {
            return config(format!("contrast b = {} must lie strictly inside (0,1)", self.b));
        }
        if !(self.epsilon > 0.0 && self.delta > 0.0) {
            return config("ε and δ must be positive");
        }
        if self.xi() >= 1.0 {
            return config(format!("ξ = ε/δ = {} must be below 1", self.xi()));
        }
        let r = self.delta * self.shape.outer_radius();
        for (i, a) in self.centers.iter().enumerate() {
            if !dom.contains(*a) || dom.dist_to_boundary(*a) <= r {
                return config(format!("inclusion {i} overlaps ∂Ω"));
            }
            for (j, c) in self.centers.iter().enumerate().skip(i + 1) {
                let d = (a[0] - c[0]).hypot(a[1] - c[1]);
                let disjoint = match self.shape {
                    Shape::Disc { .. } => d > 2.0 * r,
                    // conservative: bounding discs must be disjoint
                    Shape::Polygon { .. } => d > 2.0 * r,
                };
                if !disjoint {
                    return config(format!("inclusions {i} and {j} overlap"));
                }
            }
        }
        Ok(())
    }
}

/// ε, δ, ξ and the hypothesis-(H) ratio |ln δ|³/|ln ε|.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleDiagnostics {
    pub epsilon: f64,
    pub delta: f64,
    pub xi: f64,
    pub h_ratio: f64,
    pub h_warning: bool,
}

impl ScaleDiagnostics {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        let h_ratio = delta.ln().abs().powi(3) / epsilon.ln().abs();
        Self { epsilon, delta, xi: epsilon / delta, h_ratio, h_warning: !(h_ratio <= 1.0) }
    }
}

/// Samples a_δ on the grid: b inside the scaled inclusions, 1 elsewhere.
pub fn build_pinning_field(cfg: &PinningConfig, grid: &Arc<Grid>) -> Result<ScalarField> {
    cfg.validate(&grid.spec)?;
    let across = 2.0 * cfg.delta * cfg.shape.inner_radius() / grid.h;
    if cfg.m() > 0 && across < 8.0 {
        return config(format!(
            "grid resolves each inclusion with only {across:.1} cells across (need ≥ 8)"
        ));
    }
    Ok(ScalarField::from_fn(grid.clone(), |x| if cfg.inclusion_of(x).is_some() { cfg.b } else { 1.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(centers: Vec<[f64; 2]>) -> PinningConfig {
        PinningConfig { centers, shape: Shape::default(), b: 0.5, delta: 0.2, epsilon: 0.02 }
    }

    #[test]
    fn empty_pinning_is_one() {
        let g = Arc::new(Grid::new(&DomainSpec::unit_disc(64)).unwrap());
        let a = build_pinning_field(&cfg(vec![]), &g).unwrap();
        assert_eq!(a.range(), (1.0, 1.0));
    }

    #[test]
    fn node_at_center_has_contrast() {
        let dom = DomainSpec::rectangle(2.0, 2.0, 128);
        let g = Arc::new(Grid::new(&dom).unwrap());
        let a = build_pinning_field(&cfg(vec![[0.0, 0.0]]), &g).unwrap();
        let p = g.idx(64, 64);
        assert_eq!(g.pos(p), [0.0, 0.0]);
        assert_eq!(a.values[p], 0.5);
    }

    #[test]
    fn far_nodes_are_one() {
        let g = Arc::new(Grid::new(&DomainSpec::unit_disc(128)).unwrap());
        let c = cfg(vec![[-0.4, 0.1], [0.3, -0.2]]);
        let a = build_pinning_field(&c, &g).unwrap();
        for p in 0..g.len() {
            let x = g.pos(p);
            let far = c.centers.iter().all(|a| (x[0] - a[0]).hypot(x[1] - a[1]) > c.delta);
            if g.on_mask(p) && far {
                assert_eq!(a.values[p], 1.0);
            }
        }
    }

    #[test]
    fn rejects_overlap_and_underresolution() {
        let g = Arc::new(Grid::new(&DomainSpec::unit_disc(128)).unwrap());
        assert!(build_pinning_field(&cfg(vec![[0.0, 0.0], [0.15, 0.0]]), &g).is_err());
        assert!(build_pinning_field(&cfg(vec![[0.95, 0.0]]), &g).is_err());
        let coarse = Arc::new(Grid::new(&DomainSpec::unit_disc(32)).unwrap());
        assert!(build_pinning_field(&cfg(vec![[0.0, 0.0]]), &coarse).is_err());
    }

    #[test]
    fn polygon_membership() {
        let sq = Shape::Polygon { vertices: vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]] };
        sq.validate().unwrap();
        assert!(sq.contains([0.4, 0.4]));
        assert!(!sq.contains([0.6, 0.0]));
        assert!((sq.inner_radius() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn h_ratio_flag() {
        let d = ScaleDiagnostics::new(0.02, 0.2);
        assert!((d.h_ratio - 0.2f64.ln().powi(3).abs() / 0.02f64.ln().abs()).abs() < 1e-12);
        assert!(d.h_warning);
        assert!(!ScaleDiagnostics::new(1e-6, 0.5).h_warning);
    }
}
