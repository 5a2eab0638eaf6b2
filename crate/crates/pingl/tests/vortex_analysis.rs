mod common;

use common::{desk, disc};
use num_complex::Complex64;
use pingl::energy::Functional;
use pingl::field::{ComplexField, ScalarField};
use pingl::vortex::{
    classify_bad_discs, find_zeros, modulus_floor_report, plaquette_winding, rectangle_loop, BadDiscRule,
};

fn power(z: [f64; 2], a: [f64; 2], k: i32) -> Complex64 {
    let w = Complex64::new(z[0] - a[0], z[1] - a[1]);
    if k >= 0 {
        w.powi(k)
    } else {
        w.conj().powi(-k)
    }
}

#[test]
fn loop_winding_of_model_fields() {
    let g = disc(64);
    let l = rectangle_loop(&g, 20, 20, 44, 44);
    for (k, expect) in [(1, 1), (0, 0), (-2, -2), (3, 3)] {
        let v = ComplexField::from_fn(g.clone(), |x| power(x, [0.05, -0.03], k) + if k == 0 { 1.0 } else { 0.0 });
        assert_eq!(plaquette_winding(&v, &l).unwrap(), expect, "k = {k}");
    }
}

#[test]
fn loop_through_a_zero_is_rejected() {
    let g = disc(32);
    let v = ComplexField::constant(g.clone(), Complex64::new(0.0, 0.0));
    assert!(plaquette_winding(&v, &rectangle_loop(&g, 4, 4, 20, 20)).is_err());
}

#[test]
fn winding_is_additive_over_adjacent_loops() {
    let g = disc(64);
    let v = ComplexField::from_fn(g.clone(), |x| power(x, [-0.2, 0.01], 1) * power(x, [0.21, 0.03], -1));
    let left = plaquette_winding(&v, &rectangle_loop(&g, 8, 16, 32, 48)).unwrap();
    let right = plaquette_winding(&v, &rectangle_loop(&g, 32, 16, 56, 48)).unwrap();
    let both = plaquette_winding(&v, &rectangle_loop(&g, 8, 16, 56, 48)).unwrap();
    assert_eq!((left, right), (1, -1));
    assert_eq!(both, left + right);
}

#[test]
fn zeros_are_located_within_a_cell() {
    let g = disc(128);
    let a = [[-0.31, 0.12], [0.27, -0.4], [0.05, 0.5]];
    let v = ComplexField::from_fn(g.clone(), |x| power(x, a[0], 1) * power(x, a[1], 1) * power(x, a[2], -1));
    let rep = find_zeros(&v, None);
    assert_eq!(rep.zeros.len(), 3);
    assert_eq!(rep.total_winding, 1);
    for (p, w) in a.iter().zip([1, 1, -1]) {
        let z = rep
            .zeros
            .iter()
            .find(|z| (z.x[0] - p[0]).hypot(z.x[1] - p[1]) < g.h)
            .unwrap_or_else(|| panic!("no zero near {p:?}: {rep:?}"));
        assert_eq!(z.winding, w);
    }
}

#[test]
fn zeros_are_attributed_to_inclusions() {
    let cfg = desk(vec![[-0.5, 0.0], [0.5, 0.0]], 0.02);
    let g = disc(128);
    let v = ComplexField::from_fn(g, |x| power(x, [0.52, 0.03], 1) * power(x, [0.0, 0.4], 1));
    let rep = find_zeros(&v, Some(&cfg));
    assert_eq!(rep.zeros_per_inclusion(2), vec![0, 1]);
    assert!(!rep.all_contained());
    assert!(rep.min_modulus_outside.unwrap() < 0.1);
}

#[test]
fn smooth_unimodular_field_has_no_bad_discs() {
    let g = disc(128);
    let one = ScalarField::constant(g.clone(), 1.0);
    let f = Functional::ginzburg_landau(&one, 0.01);
    let v = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, 0.3 * x[0]));
    let set = classify_bad_discs(&f, &v, 0.01, &BadDiscRule::default(), 32);
    assert_eq!(set.bad_count(), 0);
    assert!(set.representatives.is_empty());
    assert!(!set.cap_exceeded);
}

#[test]
fn vortex_cores_make_separated_bad_discs() {
    let g = disc(256);
    let eps = 0.01;
    let one = ScalarField::constant(g.clone(), 1.0);
    let f = Functional::ginzburg_landau(&one, eps);
    let cores = [[-0.5, 0.0], [0.5, 0.0]];
    let v = ComplexField::from_fn(g, |x| {
        cores.iter().fold(Complex64::new(1.0, 0.0), |acc, a| {
            let w = power(x, *a, 1);
            acc * w / w.norm().max(1e-300) * (w.norm() / eps).min(1.0)
        })
    });
    let set = classify_bad_discs(&f, &v, eps, &BadDiscRule::default(), 32);
    assert!(set.bad_count() >= 2);
    // every core lies in a bad disc
    for a in cores {
        assert!(set.discs.iter().any(|d| d.bad && (d.center[0] - a[0]).hypot(d.center[1] - a[1]) < d.radius));
    }
    // representatives are 8λr apart and cover every bad disc within λr
    let c = |i: usize| set.discs[i].center;
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    assert!(!set.representatives.is_empty());
    for (k, &i) in set.representatives.iter().enumerate() {
        for &j in &set.representatives[k + 1..] {
            assert!(dist(c(i), c(j)) >= 8.0 * set.lambda * set.radius);
        }
    }
    for (i, d) in set.discs.iter().enumerate().filter(|(_, d)| d.bad) {
        assert!(set.representatives.iter().any(|&j| dist(d.center, c(j)) <= set.lambda * set.radius), "disc {i}");
    }
    let mut csv = Vec::new();
    set.to_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("cx,cy,r,energy,flag"));
    assert_eq!(text.lines().count(), set.discs.len() + 1);
}

#[test]
fn bad_disc_cap_is_reported() {
    let g = disc(64);
    let one = ScalarField::constant(g.clone(), 1.0);
    let f = Functional::ginzburg_landau(&one, 0.05);
    let v = ComplexField::constant(g, Complex64::new(0.0, 0.0));
    let set = classify_bad_discs(&f, &v, 0.05, &BadDiscRule::default(), 1);
    assert!(set.bad_count() > 1 && set.cap_exceeded);
}

#[test]
fn modulus_floor_ignores_excluded_cores() {
    let g = disc(128);
    let eps = 0.02;
    let a = [0.1, 0.2];
    let v = ComplexField::from_fn(g, |x| {
        let r = (x[0] - a[0]).hypot(x[1] - a[1]);
        Complex64::new((r / eps).tanh(), 0.0)
    });
    let all = modulus_floor_report(&v, &[], 0.1, eps);
    let away = modulus_floor_report(&v, &[a], 0.1, eps);
    assert!(all.floor < 0.5);
    assert!((away.floor - (0.1f64 / eps).tanh()).abs() < 1e-3);
    assert!((away.scaled_defect - (1.0 - away.floor) * eps.ln().abs().powf(1.0 / 3.0)).abs() < 1e-15);
}
