//! Harness invariants: config round-trip, manifest integrity, recomputable verdicts.

use proptest::prelude::*;
use serde_json::Value;
use sha2::{Digest, Sha256};

use rdt_core::harness::{parse_config_str, run_experiment, ExperimentConfig};

fn experiment(body: &str, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = parse_config_str(body).unwrap();
    cfg.output.dir = dir.to_path_buf();
    cfg
}

fn read_json(p: std::path::PathBuf) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

/// Re-derive every section flag from the numbers stored next to it.
fn check_verdicts(report: &Value) {
    let ew = &report["equivalence_window"];
    let samples = ew["samples"].as_array().unwrap();
    let mut prev = f64::NEG_INFINITY;
    for e in ew["entries"].as_array().unwrap() {
        let (delta, t_emp) = (e["delta"].as_f64().unwrap(), e["t_emp"].as_f64().unwrap());
        let mut t = 0.0;
        for s in samples {
            let (lo, hi) = (s["lambda_min"].as_f64().unwrap(), s["lambda_max"].as_f64().unwrap());
            if lo >= 1.0 - delta && hi <= 1.0 + delta {
                t = s["t"].as_f64().unwrap();
            } else {
                break;
            }
        }
        assert_eq!(t, t_emp);
        assert!(t_emp >= prev);
        prev = t_emp;
    }
    assert_eq!(ew["pass"], true);

    let slack = report["fits"]["exponent_slack"].as_f64().unwrap();
    let mut fits_pass = true;
    for f in report["fits"]["entries"].as_array().unwrap() {
        let claim = f["claimed_exponent"].as_f64().unwrap();
        match f["status"].as_str().unwrap() {
            "not_applicable" => assert!(f["fit"].is_null()),
            status => {
                let slope = f["fit"]["slope"].as_f64().unwrap();
                assert_eq!(status == "pass", slope <= claim + slack);
                fits_pass &= status == "pass";
            }
        }
    }
    assert_eq!(report["fits"]["pass"].as_bool().unwrap(), fits_pass);

    let mut all = report["equivalence_window"]["pass"].as_bool().unwrap()
        && report["profiles"]["pass"].as_bool().unwrap()
        && fits_pass;
    for key in ["proof_device_audits", "convergence_report"] {
        if !report[key].is_null() {
            all &= report[key]["pass"].as_bool().unwrap();
        }
    }
    let conv = &report["convergence_report"];
    if !conv.is_null() {
        let tol = conv["tolerance"].as_f64().unwrap();
        let finals: Vec<f64> = conv["final_gap"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let monotone = conv["gaps"].as_array().unwrap().iter().all(|row| {
            let d: Vec<f64> = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            d.windows(2).all(|w| w[1] <= 1.1 * w[0] || w[1] <= 1e-12)
        });
        assert_eq!(conv["monotone"].as_bool().unwrap(), monotone);
        assert_eq!(conv["pass"].as_bool().unwrap(), monotone && finals.iter().all(|g| *g <= tol));
    }
    assert_eq!(report["pass"].as_bool().unwrap(), all);
}

#[test]
fn manifest_files_exist_hash_and_parse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = experiment(
        r#"{"geometry": {"kind": "perturbed_cone", "beta": 0.5, "amplitude": 0.05},
            "grid": {"points": 161},
            "step": {"cfl_fraction": 0.9, "max_dt": 1.0, "t_final": 0.004, "snapshot_cadence": 0.001},
            "exhaustion": {"rho0": 0.2, "q": 0.5, "k_max": 2, "r_max": 1.6, "window": [0.4, 0.8], "tolerance": 1e-3}}"#,
        tmp.path(),
    );
    let outcome = run_experiment(&cfg).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let manifest = read_json(tmp.path().join("manifest.json"));
    let names: Vec<&str> = manifest["files"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap()).collect();
    for want in ["config.json", "snapshots.csv", "report.json", "profile_nabla_g.csv", "profile_curvature.csv"] {
        assert!(names.contains(&want), "{names:?}");
    }
    for f in manifest["files"].as_array().unwrap() {
        let bytes = std::fs::read(tmp.path().join(f["name"].as_str().unwrap())).unwrap();
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), digest);
        if f["name"].as_str().unwrap().ends_with(".json") {
            serde_json::from_slice::<Value>(&bytes).unwrap();
        } else {
            let mut rd = csv::Reader::from_reader(bytes.as_slice());
            assert!(rd.records().count() > 0);
        }
    }
    // the stored config re-parses to the run's config, minus the output location
    let stored = std::fs::read_to_string(tmp.path().join("config.json")).unwrap();
    assert_eq!(parse_config_str(&stored).unwrap(), cfg.identity());

    check_verdicts(&read_json(tmp.path().join("report.json")));
}

#[test]
fn verdicts_recomputable_on_complete_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = experiment(
        r#"{"geometry": {"kind": "flat_plane"}, "grid": {"points": 64},
            "initial": {"kind": "conformal_bump", "amplitude": 0.1, "center": 1.25, "width": 0.2},
            "boundary": {"kind": "initial"},
            "step": {"cfl_fraction": 0.9, "max_dt": 1.0, "t_final": 0.02, "snapshot_cadence": 0.002},
            "audit": {"deltas": [0.2, 0.01, 0.05], "proof_devices": false}}"#,
        tmp.path(),
    );
    run_experiment(&cfg).unwrap();
    let report = read_json(tmp.path().join("report.json"));
    check_verdicts(&report);
    // complete background: every ρ-fit is skipped, not failed
    for f in report["fits"]["entries"].as_array().unwrap() {
        assert_eq!(f["status"], "not_applicable");
    }
    let deltas: Vec<f64> = report["equivalence_window"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["delta"].as_f64().unwrap())
        .collect();
    assert_eq!(deltas, vec![0.01, 0.05, 0.2]);
}

fn arb_geometry() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(r#"{"kind": "flat_plane"}"#.to_string()),
        (0.05f64..1.0).prop_map(|b| format!(r#"{{"kind": "flat_cone", "beta": {b}}}"#)),
        (0.5f64..3.0).prop_map(|r| format!(r#"{{"kind": "sphere", "radius": {r}}}"#)),
        Just(r#"{"kind": "hyperbolic_cusp"}"#.to_string()),
        (0.1f64..1.0, -0.2f64..0.2, prop::bool::ANY).prop_map(|(b, a, p)| format!(
            r#"{{"kind": "perturbed_cone", "beta": {b}, "amplitude": {a}, "profile": "{}"}}"#,
            if p { "log_sine" } else { "bounded_curvature" }
        )),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(
        geometry in arb_geometry(),
        points in 16usize..600,
        cfl in 0.01f64..=1.0,
        t_final in 0.0f64..1.0,
        cadence in prop::option::of(1e-4f64..0.1),
        deltas in prop::collection::vec(0.001f64..0.99, 0..5),
        slack in 0.0f64..1.0,
        with_exhaustion in prop::bool::ANY,
    ) {
        let cadence = cadence.map_or("null".to_string(), |c| c.to_string());
        let exhaustion = if with_exhaustion {
            r#", "exhaustion": {"rho0": 0.2, "q": 0.5, "k_max": 3, "r_max": 1.5, "window": [0.4, 0.8]}"#
        } else {
            ""
        };
        let body = format!(
            r#"{{"geometry": {geometry}, "grid": {{"points": {points}}},
                "step": {{"cfl_fraction": {cfl}, "t_final": {t_final}, "snapshot_cadence": {cadence}}},
                "audit": {{"deltas": {deltas:?}, "exponent_slack": {slack}}}{exhaustion}}}"#
        );
        // sphere radius may put the default chart past 1.5; only valid configs round-trip
        if let Ok(cfg) = parse_config_str(&body) {
            let text = serde_json::to_string_pretty(&cfg).unwrap();
            prop_assert_eq!(parse_config_str(&text).unwrap(), cfg.clone());
            prop_assert_eq!(cfg.clone().resolved(), cfg);
        }
    }
}
