use std::fs;
use std::path::Path;

use jetthrust::pipeline::{
    cmd_estimate, cmd_evaluate, cmd_fit_static, cmd_identify, cmd_simulate, ExperimentConfig, Quantity, StaticMap,
};
use jetthrust::plant::{Engine, OmegaUModel};
use jetthrust::signals::{validation_schedule, SignalKind, SignalSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn config(engine: &str) -> ExperimentConfig {
    ExperimentConfig {
        engine: engine.into(),
        ..ExperimentConfig::default()
    }
}

fn validation_config(engine: &str) -> ExperimentConfig {
    ExperimentConfig {
        signals: validation_schedule(),
        seed: 17,
        ..config(engine)
    }
}

#[test]
fn simulate_writes_log_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        noise_std: 0.02,
        seed: 5,
        ..config("P220")
    };
    let run = cmd_simulate(&c, &dir.path().join("a")).unwrap();
    cmd_simulate(&c, &dir.path().join("b")).unwrap();
    let a = fs::read(dir.path().join("a/simulation.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/simulation.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "time,u,omega_true,omega_dot_true,omega_meas,thrust_true");
    assert_eq!(text.lines().count(), run.log.len() + 1);
    let manifest: toml::Table = fs::read_to_string(dir.path().join("a/manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["engine"].as_str(), Some("P220"));
    assert_eq!(manifest["seed"].as_integer(), Some(5));
    assert!(manifest["signal"].as_array().unwrap().len() >= 5);
}

#[test]
fn missing_engine_file_is_named() {
    let err = ExperimentConfig::from_toml("engine = \"engines/nope.toml\"\n", Path::new("run.toml")).unwrap_err();
    assert!(!err.is_numerical());
    assert!(err.to_string().contains("engines/nope.toml"), "{err}");
}

#[test]
fn custom_engine_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = include_str!("../engines/p160.toml").replace("name = \"P160\"", "name = \"Custom\"");
    let path = dir.path().join("custom.toml");
    fs::write(&path, text).unwrap();
    let c = ExperimentConfig {
        signals: vec![SignalSpec::new(SignalKind::Hold { level: 20.0 }, 1.0)],
        ..config(path.to_str().unwrap())
    };
    let run = cmd_simulate(&c, dir.path()).unwrap();
    assert_eq!(run.manifest.engine, "Custom");
}

#[test]
fn identify_then_estimate_closes_the_loop() {
    for (engine, thrust_ceiling_pct) in [("P220", 1.9), ("P160", 1.7)] {
        let dir = tempfile::tempdir().unwrap();
        let (ident, held_out, out) = (dir.path().join("ident"), dir.path().join("valid"), dir.path().join("out"));
        cmd_simulate(&config(engine), &ident).unwrap();
        cmd_simulate(&validation_config(engine), &held_out).unwrap();

        let id = cmd_identify(&ident.join("simulation.csv"), None, &config(engine), &out).unwrap();
        assert!(id.validation.mae_pct <= 1.8, "{engine}: {}", id.validation.report());
        let model = fs::read_to_string(out.join("model.toml")).unwrap();
        assert_eq!(OmegaUModel::from_toml(&model, Path::new("model.toml")).unwrap(), id.model);
        assert!(fs::read_to_string(out.join("identify_report.txt")).unwrap().contains("[validation]"));

        // identical inputs give an identical model file
        let again = dir.path().join("again");
        cmd_identify(&ident.join("simulation.csv"), None, &config(engine), &again).unwrap();
        assert_eq!(model, fs::read_to_string(again.join("model.toml")).unwrap());

        let est = cmd_estimate(
            &held_out.join("simulation.csv"),
            Some(&out.join("model.toml")),
            None,
            &config(engine),
            &out,
        )
        .unwrap();
        let metrics = est.metrics.unwrap();
        assert!(metrics.mae_pct <= thrust_ceiling_pct, "{engine}: {}", metrics.report());

        // metrics recompute from the written columns
        let spec = Engine::resolve(engine).unwrap().spec;
        let recomputed = cmd_evaluate(
            (&held_out.join("simulation.csv"), "thrust_true"),
            (&out.join("estimate.csv"), "thrust_hat"),
            Quantity::Thrust,
            &spec,
        )
        .unwrap();
        assert!((recomputed.mae - metrics.mae).abs() < 1e-9);
        assert!((recomputed.max_err_pct - metrics.max_err_pct).abs() < 1e-9);
    }
}

#[test]
fn identify_with_explicit_validation_file() {
    let dir = tempfile::tempdir().unwrap();
    cmd_simulate(&config("P220"), &dir.path().join("ident")).unwrap();
    cmd_simulate(&validation_config("P220"), &dir.path().join("valid")).unwrap();
    let id = cmd_identify(
        &dir.path().join("ident/simulation.csv"),
        Some(&dir.path().join("valid/simulation.csv")),
        &config("P220"),
        &dir.path().join("out"),
    )
    .unwrap();
    assert!(id.validation.mae_pct <= 1.8);
}

#[test]
fn short_dataset_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        signals: vec![SignalSpec::new(SignalKind::Hold { level: 0.0 }, 7.0), SignalSpec::new(SignalKind::Hold { level: 50.0 }, 7.0)],
        ..config("P220")
    };
    cmd_simulate(&c, dir.path()).unwrap();
    let err = cmd_identify(&dir.path().join("simulation.csv"), None, &c, &dir.path().join("out")).unwrap_err();
    assert!(!err.is_numerical(), "{err}");
}

#[test]
fn estimate_without_reference_thrust() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("meas.csv");
    let rows: String = (0..300).map(|i| format!("{:.6},20,{}\n", i as f64 * 0.01, 60.0 + (i / 50) as f64 * 0.1)).collect();
    fs::write(&csv, format!("time,u,omega_meas\n{rows}")).unwrap();
    let est = cmd_estimate(&csv, None, None, &config("P220"), dir.path()).unwrap();
    assert!(est.metrics.is_none());
    assert!(dir.path().join("estimate.csv").exists());
    assert!(!dir.path().join("estimate_metrics.csv").exists());
}

#[test]
fn fit_static_examples() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::p220();

    let steady = dir.path().join("steady.csv");
    let rows: String = (0..=20)
        .map(|i| {
            let u = 5.0 * i as f64;
            format!("{u},{}\n", engine.omega_u.steady_state_omega(u).unwrap())
        })
        .collect();
    fs::write(&steady, format!("u,omega\n{rows}")).unwrap();
    let fit = cmd_fit_static(&steady, StaticMap::OmegaU, &config("P220"), dir.path()).unwrap();
    assert!(fit.r_squared >= 0.999);
    assert_eq!(fit.c, 35.0);
    let coeffs: toml::Table = fs::read_to_string(dir.path().join("steady_state.toml")).unwrap().parse().unwrap();
    assert!((coeffs["a1"].as_float().unwrap() - 17.68).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise = Normal::new(0.0, 2.05).unwrap();
    let thrust = dir.path().join("thrust.csv");
    let rows: String = (0..50)
        .map(|i| {
            let w = 35.0 + 82.0 * i as f64 / 49.0;
            format!("{w},{}\n", engine.thrust.thrust(w) + noise.sample(&mut rng))
        })
        .collect();
    fs::write(&thrust, format!("omega,thrust\n{rows}")).unwrap();
    let fit = cmd_fit_static(&thrust, StaticMap::ThrustOmega, &config("P220"), dir.path()).unwrap();
    assert!((fit.rmse - 2.05).abs() <= 0.3 * 2.05, "{}", fit.rmse);
    assert!(dir.path().join("thrust_map.toml").exists());
    assert!(fs::read_to_string(dir.path().join("fit.csv")).unwrap().starts_with("a,b,c,rmse,r_squared"));

    let two = dir.path().join("two.csv");
    fs::write(&two, "x,y\n1,2\n3,4\n").unwrap();
    assert!(cmd_fit_static(&two, StaticMap::ThrustOmega, &config("P220"), dir.path()).is_err());
}
