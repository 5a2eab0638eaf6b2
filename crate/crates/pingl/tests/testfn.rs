mod common;

use std::f64::consts::PI;

use common::{desk, disc};
use num_complex::Complex64;
use pingl::boundary::BoundaryData;
use pingl::energy::energy_f;
use pingl::special::solve_u;
use pingl::testfn::{annulus_extension, build_case_i, build_case_ii, default_offsets};
use pingl::vortex::find_zeros;

#[test]
fn case_i_places_one_zero_per_chosen_inclusion() {
    let cfg = desk(vec![[-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]], 0.02);
    let g = disc(128);
    let bd = BoundaryData::degree(2);
    let (v, spec) = build_case_i(&cfg, &g, &bd, cfg.epsilon, &[0, 2]).unwrap();
    let rep = find_zeros(&v, Some(&cfg));
    assert_eq!(rep.zeros_per_inclusion(3), vec![1, 0, 1]);
    assert!(rep.zeros.iter().all(|z| z.winding == 1));
    assert!(spec.rho0 > 2.0 * spec.core);
    assert!(v.values.iter().all(|z| z.norm() <= 1.0 + 1e-12));
    // the Dirichlet trace is imposed exactly
    let mut traced = v.clone();
    bd.apply(&mut traced);
    assert_eq!(traced.values, v.values);
}

#[test]
fn modulus_is_one_away_from_the_cores() {
    let cfg = desk(vec![[0.0, 0.0]], 0.02);
    let g = disc(128);
    let (v, spec) = build_case_i(&cfg, &g, &BoundaryData::degree(1), cfg.epsilon, &[0]).unwrap();
    let core = spec.vortices[0][0];
    for p in (0..g.len()).filter(|&p| g.on_mask(p)) {
        let x = g.pos(p);
        if (x[0] - core[0]).hypot(x[1] - core[1]) >= spec.core {
            assert!((v.values[p].norm() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn case_ii_carries_the_requested_degrees() {
    let cfg = desk(vec![[-0.5, 0.0], [0.5, 0.0]], 0.01);
    let g = disc(256);
    let (v, spec) = build_case_ii(&cfg, &g, &BoundaryData::degree(3), cfg.epsilon, &[2, 1], None).unwrap();
    let rep = find_zeros(&v, Some(&cfg));
    assert_eq!(rep.zeros_per_inclusion(2), vec![2, 1]);
    assert_eq!(rep.total_winding, 3);
    assert!(rep.all_contained());
    assert_eq!(spec.vortices[0].len(), 2);
}

#[test]
fn unit_degrees_reduce_case_ii_to_case_i() {
    let cfg = desk(vec![[-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]], 0.02);
    let g = disc(128);
    let bd = BoundaryData::degree(1);
    let (a, _) = build_case_i(&cfg, &g, &bd, cfg.epsilon, &[1]).unwrap();
    let (b, _) = build_case_ii(&cfg, &g, &bd, cfg.epsilon, &[0, 1, 0], None).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn competitor_energy_bounds_the_minimum() {
    let cfg = desk(vec![[0.0, 0.0]], 0.02);
    let g = disc(256);
    let u = solve_u(&cfg, &g).unwrap();
    let (v, _) = build_case_i(&cfg, &g, &BoundaryData::degree(1), cfg.epsilon, &[0]).unwrap();
    let f = energy_f(&v, &u.u, cfg.epsilon, cfg.b).unwrap().total;
    // minimiser energy for this landscape is about 8.66
    assert!(f > 8.6 && f < 12.0, "{f}");
}

#[test]
fn invalid_layouts_are_rejected() {
    let cfg = desk(vec![[-0.5, 0.0], [0.5, 0.0]], 0.02);
    let g = disc(128);
    let bd = BoundaryData::degree(2);
    assert!(build_case_i(&cfg, &g, &bd, cfg.epsilon, &[0]).is_err());
    assert!(build_case_i(&cfg, &g, &bd, cfg.epsilon, &[0, 0]).is_err());
    assert!(build_case_ii(&cfg, &g, &bd, cfg.epsilon, &[2, 1], None).is_err());
    assert!(build_case_ii(&cfg, &g, &bd, cfg.epsilon, &[3, -1], None).is_err());
    // cores wider than the gluing radius
    assert!(build_case_i(&cfg, &g, &bd, 0.1, &[0, 1]).is_err());
    // an offset outside ω
    let far = vec![vec![[0.9, 0.0], [-0.2, 0.0]], vec![]];
    assert!(build_case_ii(&cfg, &g, &bd, cfg.epsilon, &[2, 0], Some(&far)).is_err());
}

#[test]
fn default_offsets_form_a_centred_polygon() {
    let cfg = desk(vec![[0.0, 0.0]], 0.02);
    assert_eq!(default_offsets(1, &cfg), vec![[0.0, 0.0]]);
    let p = default_offsets(3, &cfg);
    let r: Vec<f64> = p.iter().map(|x| x[0].hypot(x[1])).collect();
    assert!(r.iter().all(|&s| (s - 0.125).abs() < 1e-12), "{r:?}");
    let cx: f64 = p.iter().map(|x| x[0]).sum();
    let cy: f64 = p.iter().map(|x| x[1]).sum();
    assert!(cx.abs() < 1e-12 && cy.abs() < 1e-12);
}

#[test]
fn annulus_extension_interpolates_trace_and_radial_vortex() {
    let g = disc(256);
    let rho = 0.2;
    let n = 256;
    let f = |t: f64| Complex64::from_polar(1.0 - 0.1 * (2.0 * t).cos(), 2.0 * t + 0.3 * t.sin());
    let samples: Vec<Complex64> = (0..n).map(|k| f(2.0 * PI * k as f64 / n as f64)).collect();
    let v = annulus_extension(&samples, 2, rho, &g).unwrap();
    for p in (0..g.len()).filter(|&p| g.on_mask(p)) {
        let x = g.pos(p);
        let r = x[0].hypot(x[1]);
        let t = x[1].atan2(x[0]);
        if r < rho || r > 3.0 * rho {
            assert_eq!(v.values[p], Complex64::new(0.0, 0.0));
        } else if r >= 2.0 * rho {
            assert!((v.values[p] - Complex64::from_polar(1.0, 2.0 * t)).norm() < 1e-12);
        } else if r < rho * 1.02 {
            // next to the inner circle the trace is reproduced
            assert!((v.values[p] - f(t)).norm() < 2e-3, "{}", (v.values[p] - f(t)).norm());
        }
    }
    assert!(annulus_extension(&samples, 1, rho, &g).is_err());
}
