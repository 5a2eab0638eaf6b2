//! Helpers shared by the integration suites.
#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex64;
use pingl::energy::Functional;
use pingl::field::{ComplexField, ScalarField};
use pingl::grid::{DomainSpec, Grid};
use pingl::pinning::{PinningConfig, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn disc(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&DomainSpec::unit_disc(n)).unwrap())
}

pub fn desk(centers: Vec<[f64; 2]>, eps: f64) -> PinningConfig {
    PinningConfig { centers, shape: Shape::default(), b: 0.5, delta: 0.2, epsilon: eps }
}

pub fn random_field(grid: &Arc<Grid>, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    ComplexField { grid: grid.clone(), values }
}

pub fn random_weight(grid: &Arc<Grid>, b: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField { grid: grid.clone(), values: (0..grid.len()).map(|_| rng.random_range(b..=1.0)).collect() }
}

/// Largest deviation of the analytic gradient from central differences of
/// the energy, relative to the largest gradient entry.
pub fn gradient_error(f: &Functional, v: &ComplexField) -> f64 {
    let mut grad = vec![Complex64::new(0.0, 0.0); v.values.len()];
    f.energy_grad(&v.values, &mut grad);
    let gmax = grad.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
    let t = 1e-5;
    let mut x = v.values.clone();
    let mut worst: f64 = 0.0;
    for p in 0..x.len() {
        if !v.grid.is_free(p) {
            continue;
        }
        for dir in [Complex64::new(t, 0.0), Complex64::new(0.0, t)] {
            let x0 = x[p];
            x[p] = x0 + dir;
            let ep = f.energy(&x).total;
            x[p] = x0 - dir;
            let em = f.energy(&x).total;
            x[p] = x0;
            let fd = (ep - em) / (2.0 * t);
            let an = if dir.re != 0.0 { grad[p].re } else { grad[p].im };
            worst = worst.max((fd - an).abs());
        }
    }
    worst / gmax
}
