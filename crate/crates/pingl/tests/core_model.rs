use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_relative_eq;
use num_complex::Complex64;
use pingl::energy::{energy_e, energy_f, rescale_hat, Functional};
use pingl::field::{ComplexField, ScalarField};
use pingl::grid::{DomainSpec, Grid};
use pingl::pinning::{build_pinning_field, PinningConfig, Shape};
use pingl::vortex::{find_zeros, plaquette_winding, rectangle_loop};
use proptest::prelude::*;

fn disc(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(&DomainSpec::unit_disc(n)).unwrap())
}

fn unit_vortex(x: [f64; 2]) -> Complex64 {
    let r = x[0].hypot(x[1]);
    Complex64::new(x[0] / r, x[1] / r)
}

fn annulus(g: &Grid) -> Arc<Grid> {
    Arc::new(g.restrict_cells(|c| {
        let r = c[0].hypot(c[1]);
        (0.5..=1.0).contains(&r)
    }))
}

#[test]
fn homogeneous_constant_has_zero_energy() {
    let g = disc(64);
    let one = ScalarField::constant(g.clone(), 1.0);
    let u = ComplexField::constant(g, Complex64::new(1.0, 0.0));
    let e = energy_e(&u, &one, 0.05).unwrap();
    assert_eq!(e.total, 0.0);
}

#[test]
fn zero_field_potential_is_area_over_four_eps_squared() {
    let g = Arc::new(Grid::new(&DomainSpec::rectangle(1.0, 1.0, 40)).unwrap());
    let one = ScalarField::constant(g.clone(), 1.0);
    let u = ComplexField::constant(g, Complex64::new(0.0, 0.0));
    let eps = 0.1;
    let e = energy_e(&u, &one, eps).unwrap();
    assert_relative_eq!(e.potential, 1.0 / (4.0 * eps * eps), max_relative = 1e-12);
    assert_eq!(e.gradient, 0.0);
}

#[test]
fn vortex_dirichlet_energy_on_annulus_converges_to_pi_ln2() {
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let g = annulus(&disc(n));
        let one = ScalarField::constant(g.clone(), 1.0);
        let u = ComplexField::from_fn(g, unit_vortex);
        let e = energy_e(&u, &one, 0.1).unwrap();
        errs.push((e.gradient - PI * 2f64.ln()).abs());
    }
    assert!(errs[2] < errs[0], "{errs:?}");
    assert!(errs[2] < 0.02, "{errs:?}");
}

#[test]
fn weighted_vortex_energy_scales_by_b_squared() {
    let b = 0.5;
    let g = annulus(&disc(256));
    let w = ScalarField::constant(g.clone(), b);
    let v = ComplexField::from_fn(g, unit_vortex);
    let f = energy_f(&v, &w, 0.1, b).unwrap();
    assert_relative_eq!(f.gradient, b * b * PI * 2f64.ln(), max_relative = 0.02);
}

#[test]
fn weights_collapse_when_u_is_one() {
    let g = disc(64);
    let one = ScalarField::constant(g.clone(), 1.0);
    let v = ComplexField::from_fn(g, |x| Complex64::new(0.3 + x[0], x[1] * x[0]));
    let e = energy_e(&v, &one, 0.07).unwrap();
    let f = energy_f(&v, &one, 0.07, 0.5).unwrap();
    assert_relative_eq!(e.total, f.total, max_relative = 1e-13);
}

#[test]
fn energy_f_rejects_weights_outside_the_band() {
    let g = disc(32);
    let w = ScalarField::constant(g.clone(), 0.3);
    let v = ComplexField::constant(g, Complex64::new(1.0, 0.0));
    assert!(energy_f(&v, &w, 0.1, 0.5).is_err());
}

#[test]
fn smooth_field_energy_converges_at_second_order() {
    // u = exp(i k x) with |∇u|² = k², so the gradient energy is ½k²|Ω|.
    let k = 2.0;
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let g = Arc::new(Grid::new(&DomainSpec::rectangle(1.0, 1.0, n)).unwrap());
        let one = ScalarField::constant(g.clone(), 1.0);
        let u = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, k * x[0]));
        errs.push((energy_e(&u, &one, 0.1).unwrap().gradient - 0.5 * k * k).abs());
    }
    let order1 = (errs[0] / errs[1]).log2();
    let order2 = (errs[1] / errs[2]).log2();
    assert!(order1 > 1.8 && order2 > 1.8, "{errs:?}");
}

#[test]
fn weight_monotonicity_bounds_weighted_energy() {
    let g = disc(96);
    let cfg = PinningConfig { centers: vec![[0.0, 0.0]], shape: Shape::default(), b: 0.5, delta: 0.3, epsilon: 0.05 };
    let u = build_pinning_field(&cfg, &g).unwrap();
    let v = ComplexField::from_fn(g.clone(), |x| Complex64::new(x[0] + 0.1, x[1] - 0.2));
    let lo = energy_f(&v, &ScalarField::constant(g.clone(), 0.5), 0.05, 0.5).unwrap().total;
    let mid = energy_f(&v, &u, 0.05, 0.5).unwrap().total;
    let hi = energy_f(&v, &ScalarField::constant(g, 1.0), 0.05, 0.5).unwrap().total;
    assert!(lo <= mid && mid <= hi, "{lo} {mid} {hi}");
}

#[test]
fn energy_is_bitwise_reproducible() {
    let g = disc(128);
    let one = ScalarField::constant(g.clone(), 1.0);
    let u = ComplexField::from_fn(g, |x| Complex64::new((3.0 * x[0]).sin(), x[1] * x[1]));
    let f = Functional::ginzburg_landau(&one, 0.05);
    let a = f.energy(&u.values).total;
    let b = f.energy(&u.values).total;
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn rescale_identity_and_constant() {
    let g = disc(64);
    let v = ComplexField::from_fn(g.clone(), |x| Complex64::new(x[0], 2.0 * x[1]));
    let same = rescale_hat(&v, [0.0, 0.0], 1.0, 1.0, &g).unwrap();
    for p in 0..g.len() {
        if g.on_mask(p) {
            assert!((same.values[p] - v.values[p]).norm() < 1e-12);
        }
    }
    let c = ComplexField::constant(g.clone(), Complex64::new(0.3, -0.4));
    let small = disc(32);
    let out = rescale_hat(&c, [0.1, 0.0], 0.2, 0.2, &small).unwrap();
    for p in 0..small.len() {
        if small.on_mask(p) {
            assert!((out.values[p] - Complex64::new(0.3, -0.4)).norm() < 1e-12);
        }
    }
}

#[test]
fn rescale_rejects_uncovered_radius() {
    let g = disc(64);
    let v = ComplexField::constant(g.clone(), Complex64::new(1.0, 0.0));
    assert!(rescale_hat(&v, [0.0, 0.0], 0.5, 0.1, &g).is_err());
}

#[test]
fn rescaled_vortex_lands_at_rescaled_point() {
    let g = disc(256);
    let (a, delta, p) = ([0.3, -0.1], 0.2, [0.31, 0.17]);
    let z0 = [a[0] + delta * p[0], a[1] + delta * p[1]];
    let v = ComplexField::from_fn(g, |x| Complex64::new(x[0] - z0[0], x[1] - z0[1]));
    let target = disc(128);
    let vh = rescale_hat(&v, a, delta, delta, &target).unwrap();
    let rep = find_zeros(&vh, None);
    assert_eq!(rep.zeros.len(), 1);
    let z = rep.zeros[0].x;
    assert!((z[0] - p[0]).hypot(z[1] - p[1]) < target.h, "{z:?}");
    // winding of an interior loop survives the resampling
    let l = rectangle_loop(&target, 32, 32, 96, 96);
    assert_eq!(plaquette_winding(&vh, &l).unwrap(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn energies_are_nonnegative(re in -1.0f64..1.0, im in -1.0f64..1.0, k in 0.0f64..4.0) {
        let g = disc(24);
        let one = ScalarField::constant(g.clone(), 1.0);
        let u = ComplexField::from_fn(g, |x| Complex64::new(re + (k * x[0]).cos(), im * x[1]));
        prop_assert!(energy_e(&u, &one, 0.1).unwrap().total >= 0.0);
    }
}
