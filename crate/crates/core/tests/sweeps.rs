use steinrule::simulation::{run_sweep, SimConfig};
use steinrule::{gamma_sweep, Error};

fn config(extra: &str) -> SimConfig {
    let text = format!(
        r#"{{
            "n": 15, "k": 3, "sigma": [0.5, 1.0], "rho": 0.6,
            "beta_norms": [1.2, 10.7], "replications": 1000, "seed": 7
            {extra}
        }}"#
    );
    SimConfig::from_json(&text).unwrap()
}

#[test]
fn least_squares_rows_are_the_reference() {
    let result = run_sweep(&config("")).unwrap();
    let ls: Vec<_> = result.estimator_rows("LS").collect();
    assert_eq!(ls.len(), 4);
    for row in ls {
        assert_eq!(row.rmse, 1.0);
        assert_eq!(row.rmse_se, 0.0);
    }
}

#[test]
fn rows_follow_cells_and_estimators() {
    let cfg = config(r#", "estimators": [{"kind": "ls"}, {"kind": "spsl"}, {"kind": "shrink", "h": "inverse_sq_norm", "c": -0.5}]"#);
    let result = run_sweep(&cfg).unwrap();
    assert_eq!(result.rows.len(), cfg.cell_count() * 3);
    for (i, row) in result.rows.iter().enumerate() {
        assert_eq!(row.cell_id, i / 3);
        assert_eq!(row.replications, 1000);
    }
    let names: Vec<_> = result.rows[..3].iter().map(|r| r.estimator.as_str()).collect();
    assert_eq!(names[..2], ["LS", "SPSL"]);
}

#[test]
fn sweeps_are_deterministic() {
    let cfg = config("");
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(a, b);
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    a.write_csv(&mut csv_a).unwrap();
    b.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);
    let header = String::from_utf8(csv_a).unwrap();
    assert!(header.starts_with("cell_id,n,k,sigma,rho,beta_norm,gamma_norm,estimator,rmse,rmse_se,replications,seed\n"));

    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run_sweep(&other).unwrap().rows, a.rows);
}

#[test]
fn doubling_replications_shrinks_standard_errors() {
    let small = config("");
    let mut large = small.clone();
    large.replications *= 2;
    let a = run_sweep(&small).unwrap();
    let b = run_sweep(&large).unwrap();
    for (x, y) in a.estimator_rows("SPSL").zip(b.estimator_rows("SPSL")) {
        let ratio = y.rmse_se / x.rmse_se;
        let target = 1.0 / 2f64.sqrt();
        assert!((ratio - target).abs() <= 0.2 * target, "cell {}: ratio {ratio}", x.cell_id);
    }
}

#[test]
fn zero_coefficient_member_matches_least_squares() {
    let cfg = config(r#", "estimators": [{"kind": "ls"}, {"kind": "shrink", "h": {"smooth_inverse": {"p": 2.0}}, "c": 0.0}]"#);
    let result = run_sweep(&cfg).unwrap();
    for row in result.rows.iter().filter(|r| r.estimator != "LS") {
        assert_eq!(row.rmse, 1.0, "{row:?}");
    }
}

#[test]
fn restricted_competitor_loses_its_edge_as_bias_grows() {
    let text = r#"{
        "n": 25, "k": 4, "sigma": 0.5, "rho": 0.6, "beta_norms": [4.8],
        "replications": 2000, "seed": 3
    }"#;
    let cfg = SimConfig::from_json(text).unwrap();
    let result = gamma_sweep(&cfg, &[0.0, 1.0, 25.0]).unwrap();
    let rmse: Vec<f64> = result.estimator_rows("SPSL").map(|r| r.rmse).collect();
    assert_eq!(rmse.len(), 3);
    assert!(rmse[0] < rmse[1] && rmse[1] < rmse[2], "{rmse:?}");
    assert!(rmse[0] < 1.0);
    let gammas: Vec<f64> = result.estimator_rows("SPSL").map(|r| r.gamma_norm).collect();
    for (got, want) in gammas.iter().zip([0.0, 1.0, 25.0]) {
        assert!((got - want).abs() <= 1e-9 * (1.0 + want), "{got} vs {want}");
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let base = r#""n": 15, "k": 3, "sigma": 1.0, "rho": 0.6, "beta_norms": [1.2], "seed": 1"#;
    let cases = [
        format!(r#"{{{base}, "replications": 10}}"#),
        format!(r#"{{{base}, "replications": 1000, "typo": 1}}"#),
        format!(r#"{{{base}, "replications": 1000, "gamma_norms": [1.0]}}"#),
        format!(r#"{{{base}, "replications": 1000, "distribution": {{"gamma_mixture": {{"nu": 2.0}}}}}}"#),
        r#"{"n": 3, "k": 3, "sigma": 1.0, "rho": 0.6, "beta_norms": [1.2], "seed": 1, "replications": 1000}"#.to_string(),
        r#"{"n": 15, "k": 4, "sigma": 1.0, "rho": -0.6, "beta_norms": [1.2], "seed": 1, "replications": 1000}"#.to_string(),
    ];
    for text in &cases {
        let err = SimConfig::from_json(text).unwrap_err();
        assert!(matches!(err, Error::Config(_) | Error::Json(_)), "{text}: {err}");
    }
}
