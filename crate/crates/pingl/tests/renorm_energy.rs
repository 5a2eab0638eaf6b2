mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use approx::assert_relative_eq;
use common::disc;
use num_complex::Complex64;
use pingl::boundary::{BoundaryData, PhaseMode};
use pingl::phase::VortexPoint;
use pingl::pinning::Shape;
use pingl::renorm::{
    annulus_energy, assemble_expansion, candidate_degrees, degree_cost, discrete_optimizer, extract_tilde_w,
    extract_tilde_w2, extract_wg, hhalf_seminorm, select_inclusions, tilde_w01, ExpansionInputs, FourierTrace,
    PinningCase, WG_LADDER,
};

fn trace(c: &[(i64, f64, f64)]) -> FourierTrace {
    FourierTrace::new(c.iter().map(|&(n, re, im)| (n, Complex64::new(re, im))), 1.0)
}

#[test]
fn hhalf_of_simple_traces() {
    assert_eq!(hhalf_seminorm(&trace(&[])), 0.0);
    assert_eq!(hhalf_seminorm(&trace(&[(0, 5.0, 1.0)])), 0.0);
    assert_eq!(hhalf_seminorm(&trace(&[(1, 1.0, 0.0)])), 1.0);
    assert_eq!(hhalf_seminorm(&trace(&[(3, 1.0, 0.0), (-1, 2.0, 0.0)])), 7.0);
    let t = trace(&[(2, 0.3, -0.1), (-5, 0.2, 0.7)]);
    let scaled = FourierTrace::new(t.coeffs.iter().map(|(&n, &a)| (n, 3.0 * a)), 1.0);
    assert_relative_eq!(hhalf_seminorm(&scaled), 9.0 * hhalf_seminorm(&t), max_relative = 1e-14);
}

#[test]
fn hhalf_of_sampled_cosine() {
    let n = 64;
    let samples: Vec<f64> = (0..n).map(|k| (3.0 * 2.0 * PI * k as f64 / n as f64).cos()).collect();
    let t = FourierTrace::from_samples(&samples, 1.0);
    assert!(t.is_real(1e-12));
    // cos 3θ = (e^{3iθ} + e^{−3iθ})/2
    assert_relative_eq!(hhalf_seminorm(&t), 1.5, max_relative = 1e-12);
}

/// (1/2π)∫|∇ψ|² mode by mode in log-polar coordinates s = ln r, where
/// each coefficient solves c'' = n²c; second-order finite differences.
fn annulus_oracle(inner: &[(i64, Complex64)], outer: &[(i64, Complex64)], r: f64) -> f64 {
    let modes: BTreeSet<i64> = inner.iter().chain(outer).map(|m| m.0).collect();
    let get = |t: &[(i64, Complex64)], n: i64| t.iter().filter(|m| m.0 == n).map(|m| m.1).sum::<Complex64>();
    let steps = 4000;
    let l = r.ln();
    let h = l / steps as f64;
    let mut total = 0.0;
    for n in modes {
        let (a, b) = (get(inner, n), get(outer, n));
        let k2 = (n * n) as f64;
        // Thomas algorithm for −c_{j−1} + (2 + h²n²)c_j − c_{j+1} = 0
        let m = steps - 1;
        let diag = 2.0 + h * h * k2;
        let mut cp = vec![0.0; m];
        let mut dp = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..m {
            let rhs = if j == 0 { a } else { Complex64::new(0.0, 0.0) } + if j == m - 1 { b } else { Complex64::new(0.0, 0.0) };
            let denom = diag + if j == 0 { 0.0 } else { cp[j - 1] };
            cp[j] = -1.0 / denom;
            dp[j] = (rhs + if j == 0 { Complex64::new(0.0, 0.0) } else { dp[j - 1] }) / denom;
        }
        let mut c = vec![Complex64::new(0.0, 0.0); steps + 1];
        // b already sits in the last right-hand side, so back-substitute against 0
        for j in (0..m).rev() {
            c[j + 1] = dp[j] - cp[j] * c[j + 2];
        }
        c[0] = a;
        c[steps] = b;
        for j in 0..steps {
            let d = (c[j + 1] - c[j]) / h;
            let mid = 0.5 * (c[j].norm_sqr() + c[j + 1].norm_sqr());
            total += h * (d.norm_sqr() + k2 * mid);
        }
    }
    total
}

#[test]
fn annulus_energy_matches_log_polar_oracle() {
    let cases: Vec<(Vec<(i64, Complex64)>, Vec<(i64, Complex64)>, f64)> = vec![
        (vec![(0, Complex64::new(1.0, 0.0))], vec![], 2.0),
        (vec![(1, Complex64::new(0.5, 0.2)), (-1, Complex64::new(0.5, -0.2))], vec![(1, Complex64::new(-0.1, 0.3))], 1.5),
        (vec![(3, Complex64::new(0.2, 0.0))], vec![(3, Complex64::new(0.1, -0.4)), (-2, Complex64::new(0.3, 0.0))], 3.0),
    ];
    for (inner, outer, r) in cases {
        let e = annulus_energy(
            &FourierTrace::new(inner.clone(), 1.0),
            &FourierTrace::new(outer.clone(), r),
            r,
        )
        .unwrap();
        let oracle = annulus_oracle(&inner, &outer, r);
        assert_relative_eq!(e, oracle, max_relative = 1e-5);
    }
    assert!(annulus_energy(&trace(&[]), &trace(&[]), 1.0).is_err());
}

#[test]
fn tilde_w01_of_radial_and_perturbed_traces() {
    let n = 128;
    let th = |k: usize| 2.0 * PI * k as f64 / n as f64;
    let radial: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * th(k))).collect();
    let bent: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * th(k) + th(k).cos())).collect();
    let (w0, w1) = tilde_w01(&radial, &bent, 2).unwrap();
    assert!(w0.abs() < 1e-24);
    assert_relative_eq!(w1, 0.5, max_relative = 1e-12);
    assert!(tilde_w01(&radial, &bent, 1).is_err());
}

fn brute_force(m: usize, d: i64, ld: f64, lx: f64, b: f64) -> Vec<Vec<i64>> {
    let mut best = f64::INFINITY;
    let mut all: BTreeSet<Vec<i64>> = BTreeSet::new();
    let span = (2 * d + 1) as usize;
    for code in 0..span.pow(m as u32) {
        let mut c = code;
        let mut v: Vec<i64> = (0..m)
            .map(|_| {
                let x = (c % span) as i64 - d;
                c /= span;
                x
            })
            .collect();
        if v.iter().sum::<i64>() != d {
            continue;
        }
        v.sort_unstable_by(|a, b| b.cmp(a));
        let cost = degree_cost(&v, ld, lx, b);
        if cost < best - 1e-9 {
            best = cost;
            all.clear();
        }
        if (cost - best).abs() <= 1e-9 {
            all.insert(v);
        }
    }
    all.into_iter().rev().collect()
}

#[test]
fn optimizer_agrees_with_brute_force() {
    let scales = [(-1.6, -4.6, 0.5), (-0.7, -6.0, 0.3), (-3.0, -3.0, 0.9), (-1.0, -1.0, 0.5)];
    for m in 1..=4 {
        for d in 1..=6 {
            for &(ld, lx, b) in &scales {
                let got = discrete_optimizer(m, d, ld, lx, b).unwrap();
                assert_eq!(got, brute_force(m, d, ld, lx, b), "M = {m}, d = {d}, scales {ld} {lx} {b}");
            }
        }
    }
}

#[test]
fn optimizer_balances_degrees_and_rejects_bad_input() {
    assert_eq!(discrete_optimizer(3, 2, -1.6, -4.6, 0.5).unwrap(), vec![vec![1, 1, 0]]);
    assert_eq!(discrete_optimizer(2, 3, -1.6, -4.6, 0.5).unwrap(), vec![vec![2, 1]]);
    assert_eq!(discrete_optimizer(2, 4, -1.6, -4.6, 0.5).unwrap(), vec![vec![2, 2]]);
    assert!(discrete_optimizer(0, 1, -1.0, -1.0, 0.5).is_err());
    assert!(discrete_optimizer(2, 1, 1.0, -1.0, 0.5).is_err());
    assert!(discrete_optimizer(2, 1, -1.0, -1.0, 1.0).is_err());
}

#[test]
fn candidates_cover_both_cases() {
    assert_eq!(candidate_degrees(3, 2), vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]]);
    assert_eq!(candidate_degrees(2, 3), vec![vec![2, 1], vec![1, 2]]);
    assert_eq!(candidate_degrees(2, 4), vec![vec![2, 2]]);
    assert_eq!(PinningCase::of(3, 3), PinningCase::I);
    assert_eq!(PinningCase::of(2, 3), PinningCase::II);
}

#[test]
fn wg_of_one_vortex_in_the_disc() {
    let g = disc(256);
    let bd = BoundaryData::degree(1);
    for a in [[0.0, 0.0], [0.3, 0.1], [-0.2, 0.45]] {
        let w = extract_wg(&g, &bd, &[VortexPoint::unit(a)], &WG_LADDER).unwrap();
        let exact = -PI * (1.0 - a[0] * a[0] - a[1] * a[1]).ln();
        assert!((w.value - exact).abs() < 0.02, "a = {a:?}: {} vs {exact}", w.value);
    }
}

#[test]
fn wg_is_invariant_under_quarter_turns() {
    let g = disc(128);
    let bd = BoundaryData::degree(2);
    let pts = |r: fn([f64; 2]) -> [f64; 2]| vec![VortexPoint::unit(r([0.31, 0.12])), VortexPoint::unit(r([-0.2, -0.33]))];
    let a = extract_wg(&g, &bd, &pts(|x| x), &WG_LADDER).unwrap().value;
    let b = extract_wg(&g, &bd, &pts(|x| [-x[1], x[0]]), &WG_LADDER).unwrap().value;
    assert!((a - b).abs() < 1e-8, "{a} {b}");
}

#[test]
fn wg_rejects_crowded_or_inconsistent_points() {
    let g = disc(64);
    let bd = BoundaryData::degree(2);
    let close = [VortexPoint::unit([0.0, 0.0]), VortexPoint::unit([0.1, 0.0])];
    assert!(extract_wg(&g, &bd, &close, &WG_LADDER).is_err());
    assert!(extract_wg(&g, &bd, &close[..1], &WG_LADDER).is_err());
}

#[test]
fn symmetric_inclusions_tie_and_the_centre_wins() {
    let g = disc(128);
    let bd = BoundaryData::degree(1);
    let sel = select_inclusions(&g, &bd, &[[-0.5, 0.0], [0.5, 0.0]], 1, &WG_LADDER, 5e-3).unwrap();
    assert_eq!(sel.best.len(), 2, "{sel:?}");
    let sel = select_inclusions(&g, &bd, &[[-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]], 1, &WG_LADDER, 5e-3).unwrap();
    assert_eq!(sel.best_degrees(), vec![vec![0, 1, 0]]);
    assert_eq!(sel.case, PinningCase::I);
}

#[test]
fn tilde_w2_without_contrast_is_the_disc_wg() {
    let beta = [0.2, 0.1];
    let w = extract_tilde_w2(&[beta], &BoundaryData::degree(1), 1.0, &Shape::default(), 256).unwrap();
    let exact = -PI * (1.0 - 0.05f64).ln();
    assert!((w.value - exact).abs() < 0.02, "{} vs {exact}", w.value);
}

#[test]
fn tilde_w_improves_on_the_radial_trace_and_nests_in_modes() {
    let beta = [[0.15, 0.05]];
    let few = extract_tilde_w(&beta, 0.5, &Shape::default(), 1, 96).unwrap();
    let more = extract_tilde_w(&beta, 0.5, &Shape::default(), 3, 96).unwrap();
    assert!(few.value <= few.value_unperturbed + 1e-12);
    assert!(more.value <= few.value + 1e-6, "{} {}", more.value, few.value);
    assert_relative_eq!(few.value_unperturbed, more.value_unperturbed, max_relative = 1e-12);
    // an off-centre vortex gains from bending the trace
    assert!(few.value < few.value_unperturbed - 1e-4);
}

#[test]
fn centred_vortex_needs_no_trace_perturbation() {
    let w = extract_tilde_w(&[[0.0, 0.0]], 0.5, &Shape::default(), 2, 96).unwrap();
    assert!((w.value - w.value_unperturbed).abs() < 1e-6);
    assert!(w.modes.iter().all(|m| m.cos.abs() < 1e-3 && m.sin.abs() < 1e-3), "{:?}", w.modes);
}

#[test]
fn perturbed_boundary_trace_has_the_expected_hhalf() {
    let bd = BoundaryData::degree(1).with_modes(vec![PhaseMode { n: 2, cos: 0.3, sin: -0.4 }]);
    // φ = 0.3 cos 2θ − 0.4 sin 2θ has |a_{±2}|² = 0.0625
    assert_relative_eq!(hhalf_seminorm(&FourierTrace::of_boundary(&bd)), 0.25, max_relative = 1e-12);
}

#[test]
fn expansion_coefficients_in_both_cases() {
    let b = 0.5;
    let base = ExpansionInputs {
        b,
        degrees: vec![1, 1, 0],
        w_g: Some(1.0),
        tilde_w: Some(vec![(1, 0.2), (2, 0.7)]),
        gamma: Some(1.197),
        tilde_w0: None,
    };
    let led = assemble_expansion(&base, 0.01, 0.2).unwrap();
    assert_eq!(led.case, PinningCase::I);
    assert_relative_eq!(led.coefficient("ln_eps").unwrap(), 2.0 * PI * b * b);
    assert_relative_eq!(led.coefficient("ln_delta").unwrap(), 2.0 * PI * (1.0 - b * b));
    let local = 2.0 * (0.2 + b * b * 1.197 + PI * b * b * b.ln());
    assert_relative_eq!(led.coefficient("local").unwrap(), local, max_relative = 1e-12);
    let sum: f64 = led.terms.iter().map(|t| t.value).sum();
    assert_relative_eq!(led.total, sum);

    let two = ExpansionInputs { degrees: vec![2, 1], ..base.clone() };
    let led = assemble_expansion(&two, 0.01, 0.2).unwrap();
    assert_eq!(led.case, PinningCase::II);
    assert_relative_eq!(led.coefficient("ln_delta").unwrap(), PI * (5.0 - 3.0 * b * b));
    assert_relative_eq!(led.coefficient("ln_eps").unwrap(), 3.0 * PI * b * b);

    let err = assemble_expansion(&ExpansionInputs { w_g: None, gamma: None, ..base.clone() }, 0.01, 0.2)
        .unwrap_err()
        .to_string();
    assert!(err.contains("w_g") && err.contains("gamma"), "{err}");
    let three = ExpansionInputs { degrees: vec![3], ..base };
    assert!(assemble_expansion(&three, 0.01, 0.2).is_err());
}
