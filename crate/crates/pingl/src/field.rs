//! Grid-sampled real and complex fields and their on-disk formats.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Grid, NodeKind};

const MAGIC: &[u8; 4] = b"PGLF";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ComplexField {
    pub grid: Arc<Grid>,
    pub values: Vec<Complex64>,
}

impl ScalarField {
    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = grid.kind.iter().map(|&k| if k == NodeKind::Exterior { 0.0 } else { c }).collect();
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|p| if grid.on_mask(p) { f(grid.pos(p)) } else { 0.0 }).collect();
        Self { grid, values }
    }

    /// Min and max over masked nodes.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (p, &v) in self.values.iter().enumerate() {
            if self.grid.on_mask(p) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        }
    }

    pub fn sample(&self, x: [f64; 2]) -> Option<f64> {
        let (i, j, fx, fy) = self.grid.locate(x)?;
        let g = &self.grid;
        let p = g.idx(i, j);
        let c = [p, p + 1, p + g.nx, p + g.nx + 1];
        // corners with zero interpolation weight may lie off the mask
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        if c.iter().zip(w).any(|(&q, w)| w > 1e-12 && !g.on_mask(q)) {
            return None;
        }
        let v = &self.values;
        Some(c.iter().zip(w).filter(|(_, w)| *w > 1e-12).map(|(&q, w)| w * v[q]).sum())
    }

    pub fn write_bin(&self, path: &Path) -> Result<()> {
        let payload: Vec<f64> = self.values.clone();
        write_container(path, &self.grid, 1, &payload)
    }

    pub fn read_bin(path: &Path) -> Result<Self> {
        let (grid, kind, payload) = read_container(path)?;
        if kind != 1 {
            return Err(Error::Input("container holds a complex field".into()));
        }
        Ok(Self { grid, values: payload })
    }
}

impl ComplexField {
    pub fn constant(grid: Arc<Grid>, c: Complex64) -> Self {
        let values = grid
            .kind
            .iter()
            .map(|&k| if k == NodeKind::Exterior { Complex64::new(0.0, 0.0) } else { c })
            .collect();
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|p| if grid.on_mask(p) { f(grid.pos(p)) } else { Complex64::new(0.0, 0.0) })
            .collect();
        Self { grid, values }
    }

    pub fn modulus(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|z| z.norm()).collect() }
    }

    /// Bilinear interpolation; `None` outside the masked region.
    pub fn sample(&self, x: [f64; 2]) -> Option<Complex64> {
        let (i, j, fx, fy) = self.grid.locate(x)?;
        let g = &self.grid;
        let p = g.idx(i, j);
        let c = [p, p + 1, p + g.nx, p + g.nx + 1];
        // corners with zero interpolation weight may lie off the mask
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        if c.iter().zip(w).any(|(&q, w)| w > 1e-12 && !g.on_mask(q)) {
            return None;
        }
        let v = &self.values;
        Some(c.iter().zip(w).filter(|(_, w)| *w > 1e-12).map(|(&q, w)| v[q] * w).sum())
    }

    pub fn write_bin(&self, path: &Path) -> Result<()> {
        let payload: Vec<f64> = self.values.iter().flat_map(|z| [z.re, z.im]).collect();
        write_container(path, &self.grid, 2, &payload)
    }

    pub fn read_bin(path: &Path) -> Result<Self> {
        let (grid, kind, payload) = read_container(path)?;
        if kind != 2 {
            return Err(Error::Input("container holds a real field".into()));
        }
        let values = payload.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Ok(Self { grid, values })
    }

    /// Writes `x,y,re,im` rows for every masked node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "re", "im"])?;
        for (p, z) in self.values.iter().enumerate() {
            if self.grid.on_mask(p) {
                let x = self.grid.pos(p);
                w.serialize((x[0], x[1], z.re, z.im))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn write_container(path: &Path, grid: &Grid, kind: u8, payload: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let spec = serde_json::to_vec(&grid.spec)?;
    f.write_all(MAGIC)?;
    f.write_u32::<LittleEndian>(VERSION)?;
    f.write_u8(kind)?;
    f.write_u32::<LittleEndian>(spec.len() as u32)?;
    f.write_all(&spec)?;
    f.write_u32::<LittleEndian>(grid.nx as u32)?;
    f.write_u32::<LittleEndian>(grid.ny as u32)?;
    f.write_f64::<LittleEndian>(grid.h)?;
    f.write_f64::<LittleEndian>(grid.x0)?;
    f.write_f64::<LittleEndian>(grid.y0)?;
    let mask: Vec<u8> = grid.kind.iter().map(|&k| k as u8).collect();
    f.write_all(&mask)?;
    for &x in payload {
        f.write_f64::<LittleEndian>(x)?;
    }
    f.flush()?;
    Ok(())
}

fn read_container(path: &Path) -> Result<(Arc<Grid>, u8, Vec<f64>)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Input("not a field container".into()));
    }
    let version = f.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Input(format!("unsupported container version {version}")));
    }
    let kind = f.read_u8()?;
    let len = f.read_u32::<LittleEndian>()? as usize;
    let mut spec = vec![0u8; len];
    f.read_exact(&mut spec)?;
    let spec: DomainSpec = serde_json::from_slice(&spec)?;
    let grid = Grid::new(&spec)?;
    let nx = f.read_u32::<LittleEndian>()? as usize;
    let ny = f.read_u32::<LittleEndian>()? as usize;
    let h = f.read_f64::<LittleEndian>()?;
    let x0 = f.read_f64::<LittleEndian>()?;
    let y0 = f.read_f64::<LittleEndian>()?;
    let mut mask = vec![0u8; nx * ny];
    f.read_exact(&mut mask)?;
    let layout_ok = nx == grid.nx
        && ny == grid.ny
        && h.to_bits() == grid.h.to_bits()
        && x0.to_bits() == grid.x0.to_bits()
        && y0.to_bits() == grid.y0.to_bits()
        && mask.iter().zip(&grid.kind).all(|(&m, &k)| m == k as u8);
    if !layout_ok {
        return Err(Error::Input("container header disagrees with its domain spec".into()));
    }
    let per = if kind == 2 { 2 } else { 1 };
    let mut payload = vec![0.0; nx * ny * per];
    f.read_f64_into::<LittleEndian>(&mut payload)?;
    Ok((Arc::new(grid), kind, payload))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_roundtrip() {
        let g = Arc::new(Grid::new(&DomainSpec::unit_disc(16)).unwrap());
        let v = ComplexField::from_fn(g.clone(), |x| Complex64::new(x[0], x[1] * 2.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.bin");
        v.write_bin(&path).unwrap();
        let w = ComplexField::read_bin(&path).unwrap();
        assert_eq!(v.values, w.values);
        assert!(ScalarField::read_bin(&path).is_err());
    }

    #[test]
    fn bilinear_sampling_is_exact_for_linear_fields() {
        let g = Arc::new(Grid::new(&DomainSpec::unit_disc(32)).unwrap());
        let v = ComplexField::from_fn(g, |x| Complex64::new(2.0 * x[0] - x[1], 0.5));
        let z = v.sample([0.123, -0.311]).unwrap();
        assert!((z.re - (0.246 + 0.311)).abs() < 1e-12);
    }
}
