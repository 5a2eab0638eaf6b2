use std::f64::consts::PI;

use approx::assert_relative_eq;
use pingl::error::Error;
use pingl::experiment::{
    cmd_solve, cmd_verify, fit_energies, predicted_coefficients, refit, run_solve, run_sweep, ExperimentConfig,
    RunRecord,
};

fn small(extra: &str) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "version": 1,
            "domain": {{ "kind": {{ "type": "unit-disc" }}, "n": 96 }},
            "pinning": {{ "centers": [[0.0, 0.0]], "b": 0.5 }},
            "boundary": {{ "degree": 1 }},
            "epsilon": [0.08],
            "delta": {{ "rule": "fixed", "value": 0.25 }},
            "solver": {{ "multistart": 2 }},
            "seed": 3{extra}
        }}"#
    );
    let cfg = ExperimentConfig::from_json(&text).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn config_error(text: &str) -> bool {
    match ExperimentConfig::from_json(text).and_then(|c| c.validate()) {
        Err(Error::Config(_)) => true,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn malformed_configs_are_config_errors() {
    let base = serde_json::to_value(small("")).unwrap();
    let with = |path: &[&str], v: serde_json::Value| {
        let mut x = base.clone();
        let mut node = &mut x;
        for p in &path[..path.len() - 1] {
            node = node.get_mut(*p).unwrap();
        }
        node[path[path.len() - 1]] = v;
        x.to_string()
    };
    assert!(config_error(&with(&["version"], 2.into())));
    assert!(config_error(&with(&["epsilon"], serde_json::json!([]))));
    assert!(config_error(&with(&["epsilon"], serde_json::json!([0.05, -0.01]))));
    assert!(config_error(&with(&["delta"], serde_json::json!({ "rule": "power", "q": 1.5 }))));
    assert!(config_error(&with(&["solver", "multistart"], 0.into())));
    assert!(config_error(&with(&["boundary", "degree"], (-1).into())));
    assert!(config_error(&with(&["domain", "n"], 32.into())));
    assert!(config_error(&with(&["pinning", "b"], 1.5.into())));
    assert!(config_error(&with(&["pinning", "centers"], serde_json::json!([[0.9, 0.0]]))));
    assert!(config_error(&with(&["unexpected"], 1.into())));
    assert!(config_error("{ not json"));
}

#[test]
fn ladder_rungs_follow_the_rules() {
    let mut v = serde_json::to_value(small("")).unwrap();
    v["epsilon"] = serde_json::json!([0.08, 0.04]);
    v["delta"] = serde_json::json!({ "rule": "power" });
    let cfg = ExperimentConfig::from_json(&v.to_string()).unwrap();
    let rungs = cfg.rungs();
    assert_eq!(rungs[0].n, 96);
    assert_eq!(rungs[1].n, 192);
    assert_relative_eq!(rungs[1].pinning.delta, 0.04f64.powf(1.0 / 3.0), max_relative = 1e-14);
    v["resolution"] = serde_json::json!({ "rule": "fixed" });
    v["delta"] = serde_json::json!({ "rule": "stretched_exp" });
    let cfg = ExperimentConfig::from_json(&v.to_string()).unwrap();
    assert_eq!(cfg.rungs()[1].n, 96);
    assert_relative_eq!(cfg.rungs()[1].pinning.delta, (-(0.04f64.ln().abs().powf(0.25))).exp());
}

#[test]
fn solves_are_reproducible_and_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("");
    cfg.output = dir.path().to_path_buf();
    let (a, _) = run_solve(&cfg).unwrap();
    let (b, out) = cmd_solve(&cfg).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.rungs[0].zeros_per_inclusion, vec![1]);
    assert!(a.rungs[0].contained);
    assert_eq!(out, cfg.run_dir());
    for f in ["record.json", "fields/u_rung0.bin", "fields/v_rung0.bin", "tables/bad_discs_rung0.csv", "tables/energies.csv", "tables/zeros.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let loaded = RunRecord::load(&out.join("record.json")).unwrap();
    assert_eq!(loaded.hash(), b.hash());
    assert_eq!(loaded.config, cfg);
    let energies = std::fs::read_to_string(out.join("tables/energies.csv")).unwrap();
    assert_eq!(energies.lines().count(), 2);
}

#[test]
fn sweep_fit_is_recomputed_from_the_record() {
    let mut v = serde_json::to_value(small("")).unwrap();
    v["epsilon"] = serde_json::json!([0.08, 0.06, 0.045]);
    let cfg = ExperimentConfig::from_json(&v.to_string()).unwrap();
    cfg.validate().unwrap();
    let (rec, _) = run_sweep(&cfg).unwrap();
    let fit = rec.fit.clone().unwrap();
    assert_eq!(fit.basis, vec!["|ln eps|", "1"]);
    assert!(rec.warnings.iter().any(|w| w.contains("constant")));
    assert_eq!(refit(&rec).unwrap(), fit);
    // the energy grows with |ln ε|
    assert!(fit.coefficients[0].value > 0.0);

    v["epsilon"] = serde_json::json!([0.08]);
    let one = ExperimentConfig::from_json(&v.to_string()).unwrap();
    assert!(matches!(run_sweep(&one), Err(Error::Config(_))));
}

#[test]
fn fit_recovers_synthetic_coefficients() {
    let (ce, cd) = predicted_coefficients(3, 2, 0.5);
    assert_relative_eq!(ce, 2.0 * PI * 0.25);
    assert_relative_eq!(cd, 2.0 * PI * 0.75);
    let data: Vec<[f64; 3]> = [(3.0, 1.2), (3.7, 1.9), (4.6, 1.5), (5.3, 2.4)]
        .iter()
        .map(|&(le, ld)| [le, ld, ce * le + cd * ld + 0.7])
        .collect();
    let fit = fit_energies(&data, 3, 2, 0.5).unwrap();
    assert_eq!(fit.basis.len(), 3);
    for e in fit.relative_error.iter().flatten() {
        assert!(*e < 1e-10);
    }
    assert_relative_eq!(fit.coefficients[2].value, 0.7, max_relative = 1e-10);

    // δ = ε^q makes the columns proportional
    let q = 1.0 / 3.0;
    let prop: Vec<[f64; 3]> = [3.0, 3.7, 4.6].iter().map(|&le| [le, q * le, (ce + q * cd) * le + 1.0]).collect();
    let fit = fit_energies(&prop, 3, 2, 0.5).unwrap();
    assert_eq!(fit.basis[0], "|ln eps| (combined)");
    assert!(fit.relative_error[0].unwrap() < 1e-10);
    assert!(fit_energies(&data[..2], 3, 2, 0.5).is_err());
    // Case II: π(Σd_i² − d b²)
    let (_, cd2) = predicted_coefficients(2, 3, 0.5);
    assert_relative_eq!(cd2, PI * (5.0 - 0.75));
    assert_eq!(predicted_coefficients(0, 2, 0.5), (2.0 * PI, 0.0));
}

#[test]
fn verify_compares_offsets_and_rejects_foreign_landscapes() {
    let a = run_solve(&small("")).unwrap().0;
    let b = run_solve(&small(r#", "output": "elsewhere""#)).unwrap().0;
    let mut g = small("");
    g.seed = 11;
    let c = run_solve(&g).unwrap().0;
    let rep = cmd_verify(&[a.clone(), b, c]).unwrap();
    assert!(!rep.flagged, "{rep:?}");
    assert!(rep.max_distance < 0.1);
    assert_eq!(rep.spreads.len(), 1);

    let mut v = serde_json::to_value(small("")).unwrap();
    v["delta"] = serde_json::json!({ "rule": "fixed", "value": 0.3 });
    let other = run_solve(&ExperimentConfig::from_json(&v.to_string()).unwrap()).unwrap().0;
    assert!(matches!(cmd_verify(&[a.clone(), other]), Err(Error::Input(_))));
    assert!(cmd_verify(&[a]).is_err());
}
