//! Domain geometry and the masked node grid.

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Shape of the computational domain Ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainKind {
    UnitDisc,
    Disc { radius: f64 },
    Rectangle { width: f64, height: f64 },
}

/// Domain shape, placement and grid resolution (`n` cells across the extent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub n: usize,
    #[serde(default)]
    pub center: [f64; 2],
}

impl DomainSpec {
    pub fn unit_disc(n: usize) -> Self {
        Self { kind: DomainKind::UnitDisc, n, center: [0.0, 0.0] }
    }

    pub fn disc(radius: f64, n: usize) -> Self {
        Self { kind: DomainKind::Disc { radius }, n, center: [0.0, 0.0] }
    }

    pub fn rectangle(width: f64, height: f64, n: usize) -> Self {
        Self { kind: DomainKind::Rectangle { width, height }, n, center: [0.0, 0.0] }
    }

    pub fn centered_at(mut self, c: [f64; 2]) -> Self {
        self.center = c;
        self
    }

    /// Disc radius, if the domain is a disc.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            DomainKind::UnitDisc => Some(1.0),
            DomainKind::Disc { radius } => Some(radius),
            DomainKind::Rectangle { .. } => None,
        }
    }

    /// Length resolved by the `n` cells.
    pub fn extent(&self) -> f64 {
        match self.kind {
            DomainKind::UnitDisc => 2.0,
            DomainKind::Disc { radius } => 2.0 * radius,
            DomainKind::Rectangle { width, .. } => width,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.extent() / self.n as f64
    }

    /// Exact geometric membership in the open domain.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        match self.kind {
            DomainKind::Rectangle { width, height } => dx.abs() < 0.5 * width && dy.abs() < 0.5 * height,
            _ => dx.hypot(dy) < self.radius().unwrap(),
        }
    }

    /// Distance from an interior point to ∂Ω.
    pub fn dist_to_boundary(&self, x: [f64; 2]) -> f64 {
        let (dx, dy) = (x[0] - self.center[0], x[1] - self.center[1]);
        match self.kind {
            DomainKind::Rectangle { width, height } => (0.5 * width - dx.abs()).min(0.5 * height - dy.abs()),
            _ => self.radius().unwrap() - dx.hypot(dy),
        }
    }

    pub fn area(&self) -> f64 {
        match self.kind {
            DomainKind::Rectangle { width, height } => width * height,
            _ => std::f64::consts::PI * self.radius().unwrap().powi(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return config(format!("grid resolution n = {} is below 4", self.n));
        }
        match self.kind {
            DomainKind::UnitDisc => {}
            DomainKind::Disc { radius } if radius > 0.0 && radius.is_finite() => {}
            DomainKind::Rectangle { width, height } if width > 0.0 && height > 0.0 => {
                let ny = height / (width / self.n as f64);
                if (ny - ny.round()).abs() > 1e-9 * ny.max(1.0) {
                    return config("rectangle height is not a whole number of cells");
                }
            }
            _ => return config("domain extent must be positive"),
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeKind {
    Exterior = 0,
    Interior = 1,
    Boundary = 2,
}

/// Uniform node grid with an interior mask.
///
/// Node `p = j * nx + i` sits at `(x0 + i h, y0 + j h)`. A cell is addressed by
/// its lower-left node. Edge coefficients `cx[p]` (edge `p → p+1`) and `cy[p]`
/// (edge `p → p+nx`) equal half the number of active cells sharing the edge, so
/// that `½ Σ c_e |Δu|²` is the plaquette-midpoint quadrature of `½∫|∇u|²`.
#[derive(Clone, Debug)]
pub struct Grid {
    pub spec: DomainSpec,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub x0: f64,
    pub y0: f64,
    pub kind: Vec<NodeKind>,
    pub cell_active: Vec<bool>,
    pub cx: Vec<f64>,
    pub cy: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Grid {
    pub fn new(spec: &DomainSpec) -> Result<Self> {
        spec.validate()?;
        let h = spec.spacing();
        let c = spec.center;
        let (nx, ny, x0, y0);
        let mut kind;
        match spec.kind {
            DomainKind::Rectangle { width, height } => {
                nx = spec.n + 1;
                ny = (height / h).round() as usize + 1;
                x0 = c[0] - 0.5 * width;
                y0 = c[1] - 0.5 * height;
                kind = vec![NodeKind::Interior; nx * ny];
                for j in 0..ny {
                    for i in 0..nx {
                        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                            kind[j * nx + i] = NodeKind::Boundary;
                        }
                    }
                }
            }
            _ => {
                // Cell-centred about the disc centre; one spare ring of nodes
                // outside the circle carries the Dirichlet data.
                let r = spec.radius().unwrap();
                let mut m = spec.n + 3;
                if m % 2 == 1 {
                    m += 1;
                }
                nx = m;
                ny = m;
                let half = 0.5 * (m as f64 - 1.0) * h;
                x0 = c[0] - half;
                y0 = c[1] - half;
                kind = vec![NodeKind::Exterior; nx * ny];
                for j in 0..ny {
                    for i in 0..nx {
                        let (x, y) = (x0 + i as f64 * h - c[0], y0 + j as f64 * h - c[1]);
                        if x.hypot(y) < r {
                            kind[j * nx + i] = NodeKind::Interior;
                        }
                    }
                }
                let interior = kind.clone();
                for j in 0..ny {
                    for i in 0..nx {
                        if interior[j * nx + i] != NodeKind::Exterior {
                            continue;
                        }
                        let mut touch = false;
                        for dj in -1i64..=1 {
                            for di in -1i64..=1 {
                                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                                if ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny {
                                    touch |= interior[jj as usize * nx + ii as usize] == NodeKind::Interior;
                                }
                            }
                        }
                        if touch {
                            kind[j * nx + i] = NodeKind::Boundary;
                        }
                    }
                }
            }
        }
        let mut cell_active = vec![false; (nx - 1) * (ny - 1)];
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let p = j * nx + i;
                let corners = [p, p + 1, p + nx, p + nx + 1];
                cell_active[j * (nx - 1) + i] = match spec.kind {
                    DomainKind::Rectangle { .. } => true,
                    _ => corners.iter().any(|&q| kind[q] == NodeKind::Interior),
                };
            }
        }
        let mut g = Grid {
            spec: spec.clone(),
            nx,
            ny,
            h,
            x0,
            y0,
            kind,
            cell_active,
            cx: vec![],
            cy: vec![],
            mass: vec![],
        };
        g.rebuild_weights();
        Ok(g)
    }

    fn rebuild_weights(&mut self) {
        let (nx, ny) = (self.nx, self.ny);
        let n = nx * ny;
        self.cx = vec![0.0; n];
        self.cy = vec![0.0; n];
        self.mass = vec![0.0; n];
        let area = self.h * self.h;
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                if !self.cell_active[j * (nx - 1) + i] {
                    continue;
                }
                let p = j * nx + i;
                self.cx[p] += 0.5;
                self.cx[p + nx] += 0.5;
                self.cy[p] += 0.5;
                self.cy[p + 1] += 0.5;
                for q in [p, p + 1, p + nx, p + nx + 1] {
                    self.mass[q] += 0.25 * area;
                }
            }
        }
    }

    /// Copy of the grid with cells deactivated where `keep(cell centre)` is
    /// false. Used to integrate over subregions such as annuli.
    pub fn restrict_cells(&self, keep: impl Fn([f64; 2]) -> bool) -> Grid {
        let mut g = self.clone();
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                let c = j * (self.nx - 1) + i;
                if g.cell_active[c] && !keep(self.cell_center(i, j)) {
                    g.cell_active[c] = false;
                }
            }
        }
        g.rebuild_weights();
        g
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn pos(&self, p: usize) -> [f64; 2] {
        let (i, j) = (p % self.nx, p / self.nx);
        [self.x0 + i as f64 * self.h, self.y0 + j as f64 * self.h]
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x0 + (i as f64 + 0.5) * self.h, self.y0 + (j as f64 + 0.5) * self.h]
    }

    #[inline]
    pub fn is_free(&self, p: usize) -> bool {
        self.kind[p] == NodeKind::Interior
    }

    /// Node carries a value (interior or boundary).
    #[inline]
    pub fn on_mask(&self, p: usize) -> bool {
        self.kind[p] != NodeKind::Exterior
    }

    #[inline]
    pub fn cell_is_active(&self, i: usize, j: usize) -> bool {
        self.cell_active[j * (self.nx - 1) + i]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.kind[p] == NodeKind::Boundary).collect()
    }

    pub fn free_count(&self) -> usize {
        self.kind.iter().filter(|&&k| k == NodeKind::Interior).count()
    }

    /// Area covered by active cells.
    pub fn active_area(&self) -> f64 {
        self.cell_active.iter().filter(|&&a| a).count() as f64 * self.h * self.h
    }

    /// Cell containing `x` and the local coordinates in [0,1)².
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
        let fx = (x[0] - self.x0) / self.h;
        let fy = (x[1] - self.y0) / self.h;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        if i + 1 >= self.nx || j + 1 >= self.ny {
            return None;
        }
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Rough identity used in field headers and config hashing.
    pub fn same_layout(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.h.to_bits() == other.h.to_bits()
            && self.x0.to_bits() == other.x0.to_bits()
            && self.y0.to_bits() == other.y0.to_bits()
            && self.kind == other.kind
    }
}
