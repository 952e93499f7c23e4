mod common;

use jetthrust::ekf::{
    jacobian, observer_step, observer_transition, refiner_transition, run_observer, EkfInstance, ObserverConfig,
    RefinerState, ThrustObserver,
};
use jetthrust::plant::{simulate, simulate_with, Engine, FailureEvent, OmegaUModel, SimOptions, DEFAULT_INTEGRATOR_DT};
use jetthrust::signals::{generate, Recording, SignalKind, SignalSpec, TimeSeries};
use nalgebra::{Matrix1, Matrix3, SMatrix, SVector, Vector1, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::DT;

fn hold(level: f64, duration: f64) -> TimeSeries {
    generate(&SignalSpec::new(SignalKind::Hold { level }, duration), DT).unwrap()
}

fn close(fd: f64, an: f64) -> bool {
    (fd - an).abs() <= 1e-5 * an.abs() + 1e-10
}

/// Random state inside the operating envelope of `model`.
fn envelope_state(rng: &mut ChaCha8Rng, model: &OmegaUModel) -> (f64, f64, f64) {
    let omega = rng.random_range(model.c1..model.omega_max());
    let omega_dot = rng.random_range(-40.0..40.0);
    let u = rng.random_range(0.0..100.0);
    (omega, omega_dot, u)
}

#[test]
fn observer_jacobian_matches_analytic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for engine in [Engine::p220(), Engine::p160()] {
        let m = engine.omega_u;
        let k_c1 = 0.05;
        let f = observer_transition(m, m.c1, k_c1, DT);
        for _ in 0..100 {
            let (w, wd, u) = envelope_state(&mut rng, &m);
            let c1 = rng.random_range(0.5 * m.c1..1.5 * m.c1);
            let x = Vector3::new(w, wd, c1);
            let fd = jacobian(|x| f(x, &u), &x);
            let df_dw = m.k_ss + (m.k_wd + 2.0 * m.k_wwd * w) * wd;
            let an = Matrix3::new(
                1.0, DT, 0.0,
                DT * df_dw, 1.0 + DT * m.damping(w), -DT * m.k_ss,
                0.0, 0.0, 1.0 - k_c1 * DT,
            );
            for (a, b) in fd.iter().zip(an.iter()) {
                assert!(close(*a, *b), "{fd} vs {an}");
            }
        }
    }
}

#[test]
fn refiner_jacobian_matches_analytic() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for engine in [Engine::p220(), Engine::p160()] {
        let m = engine.omega_u;
        let f = refiner_transition(m, DT);
        for _ in 0..100 {
            let (w, wd, u) = envelope_state(&mut rng, &m);
            let scale = |k: f64, rng: &mut ChaCha8Rng| k * rng.random_range(0.8..1.2);
            let g = [scale(m.k_ss, &mut rng), scale(m.k_d, &mut rng), scale(m.k_wd, &mut rng), scale(m.k_wwd, &mut rng)];
            let x = RefinerState::from_column_slice(&[w, wd, g[0], g[1], g[2], g[3]]);
            let fd = jacobian(|x| f(x, &u), &x);
            let mut an = SMatrix::<f64, 6, 6>::identity();
            an[(0, 1)] = DT;
            an[(1, 0)] = DT * (g[0] + (g[2] + 2.0 * g[3] * w) * wd);
            an[(1, 1)] = 1.0 + DT * (g[1] + g[2] * w + g[3] * w * w);
            an[(1, 2)] = DT * m.steady_state().residual(w, u);
            an[(1, 3)] = DT * wd;
            an[(1, 4)] = DT * w * wd;
            an[(1, 5)] = DT * w * w * wd;
            for (a, b) in fd.iter().zip(an.iter()) {
                assert!(close(*a, *b), "{fd} vs {an}");
            }
        }
    }
}

fn assert_psd<const N: usize>(p: &SMatrix<f64, N, N>) {
    assert!((p - p.transpose()).abs().max() <= 1e-12 * p.abs().max().max(1.0));
    let eig = nalgebra::DMatrix::from_column_slice(N, N, p.as_slice()).symmetric_eigenvalues();
    assert!(eig.min() >= -1e-9, "{eig}");
}

#[test]
fn observer_covariance_stays_psd() {
    let engine = Engine::p220();
    let m = engine.omega_u;
    let config = ObserverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut obs = ThrustObserver::new(m, engine.thrust, config, DT).unwrap();
    obs.step(0.0, 60.0).unwrap();
    for _ in 0..10_000 {
        let u = rng.random_range(0.0..=100.0);
        let w = obs.filter().unwrap().x[0];
        let y = (w + rng.random_range(-2.0..2.0)).clamp(m.c1 - 10.0, m.omega_max() + 10.0);
        obs.step(u, y).unwrap();
        assert_psd(&obs.filter().unwrap().p);
    }
}

#[test]
fn refiner_covariance_stays_psd() {
    let m = Engine::p160().omega_u;
    let f = refiner_transition(m, DT);
    let measure = |x: &RefinerState| Vector1::new(x[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = m.gains();
    let x0 = RefinerState::from_column_slice(&[60.0, 0.0, g[0], g[1], g[2], g[3]]);
    let p0: SVector<f64, 6> = SVector::from_fn(|i, _| if i < 2 { 1.0 } else { (1e-3 * g[i - 2]).powi(2) });
    let q: SVector<f64, 6> = SVector::from_fn(|i, _| if i == 0 { 0.0 } else if i == 1 { 0.0025 } else { (1e-5 * g[i - 2]).powi(2) });
    let mut filter = EkfInstance::<6, 1>::new(x0, SMatrix::from_diagonal(&p0), SMatrix::from_diagonal(&q), Matrix1::new(1e-3), DT).unwrap();
    let mut u = 50.0;
    for _ in 0..10_000 {
        let y = filter.x[0] + rng.random_range(-0.2..0.2);
        filter = jetthrust::ekf::ekf_step(&filter, &f, measure, &u, &Vector1::new(y)).unwrap();
        assert_psd(&filter.p);
        u = rng.random_range(0.0..=100.0);
    }
}

#[test]
fn steady_engine_estimate() {
    let engine = Engine::p220();
    let log = simulate(&engine.omega_u, &engine.thrust, &hold(30.0, 30.0), &[], DEFAULT_INTEGRATOR_DT).unwrap();
    let est = run_observer(&log.recording(), &engine.omega_u, &engine.thrust, &ObserverConfig::default()).unwrap();
    let mae = est.thrust_hat.iter().zip(&log.thrust_true).map(|(a, b)| (a - b).abs()).sum::<f64>() / log.len() as f64;
    assert!(mae < 0.5, "{mae}");
    assert!(est.c1_hat.iter().all(|c| (c - engine.omega_u.c1).abs() < 0.5));
}

#[test]
fn failure_is_tracked() {
    let engine = Engine::p220();
    let failure = FailureEvent {
        t_start: 10.0,
        duration: 10.0,
        c1_drop: 10.0,
        recovery_rate: 5.0,
    };
    let log = simulate(&engine.omega_u, &engine.thrust, &hold(50.0, 40.0), &[failure], DEFAULT_INTEGRATOR_DT).unwrap();
    let config = ObserverConfig::default();
    let run = |config: &ObserverConfig| run_observer(&log.recording(), &engine.omega_u, &engine.thrust, config).unwrap();
    let window = |est: &jetthrust::ekf::EstimateLog| {
        let idx: Vec<usize> = (1000..2200).collect();
        idx.iter().map(|&i| (est.thrust_hat[i] - log.thrust_true[i]).abs()).sum::<f64>() / idx.len() as f64
    };
    let live = run(&config);
    for i in 1300..=2000 {
        assert!((live.c1_hat[i] - log.c1_eff[i]).abs() < 2.0, "t = {}", log.time(i));
    }
    let frozen = run(&config.frozen_c1());
    assert!(window(&live) < 2.5);
    assert!(window(&frozen) >= 3.0 * window(&live), "{} vs {}", window(&frozen), window(&live));
}

#[test]
fn estimate_is_smoother_than_measurement() {
    let engine = Engine::p220();
    let rms_diff = |v: &[f64]| (v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
    // a slow ramp crosses many quantization levels
    let ramp = generate(&SignalSpec::new(SignalKind::Ramp { from: 20.0, to: 60.0 }, 40.0), DT).unwrap();
    let noisy = SimOptions {
        noise_std: 0.05,
        seed: 9,
        ..SimOptions::default()
    };
    for (u, options) in [(ramp, SimOptions::default()), (hold(40.0, 20.0), noisy)] {
        let log = simulate_with(&engine.omega_u, &engine.thrust, &u, &[], &options).unwrap();
        let est = run_observer(&log.recording(), &engine.omega_u, &engine.thrust, &ObserverConfig::default()).unwrap();
        let tail = 500..log.len();
        assert!(rms_diff(&est.omega_hat[tail.clone()]) < rms_diff(&log.omega_meas[tail]));
    }
}

#[test]
fn replay_matches_streaming_steps() {
    let engine = Engine::p160();
    let failure = FailureEvent {
        t_start: 5.0,
        duration: 5.0,
        c1_drop: 8.0,
        recovery_rate: 4.0,
    };
    let u = generate(&SignalSpec::new(SignalKind::Sine { offset: 50.0, amplitude: 30.0, frequency: 0.2 }, 20.0), DT).unwrap();
    let log = simulate(&engine.omega_u, &engine.thrust, &u, &[failure], DEFAULT_INTEGRATOR_DT).unwrap();
    let rec = log.recording();
    let config = ObserverConfig::default();
    let a = run_observer(&rec, &engine.omega_u, &engine.thrust, &config).unwrap();
    let b = run_observer(&rec, &engine.omega_u, &engine.thrust, &config).unwrap();
    assert_eq!(a, b);

    let mut obs = ThrustObserver::new(engine.omega_u, engine.thrust, config, DT).unwrap();
    obs.step(rec.u[0], rec.omega[0]).unwrap();
    let mut filter = *obs.filter().unwrap();
    for k in 1..rec.len() {
        let (next, e) = observer_step(&filter, rec.u[k - 1], rec.omega[k], &engine.omega_u, &engine.thrust, &config).unwrap();
        assert_eq!(e.thrust, a.thrust_hat[k]);
        assert_eq!(e.thrust, engine.thrust.thrust(e.state.omega));
        assert_eq!(e.thrust_rate, engine.thrust.thrust_rate(e.state.omega, e.state.omega_dot));
        filter = next;
    }
}

#[test]
fn mixed_rate_input_rejected() {
    let text = "time,u,omega_meas\n0.00,10,50\n0.01,10,50\n0.0200001,10,50\n";
    assert!(Recording::read_csv(text.as_bytes()).is_err());
}
