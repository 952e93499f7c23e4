use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::TimeSeries;
use crate::error::{Error, Result};

/// Lower bound of the engine input signal.
pub const U_MIN: f64 = 0.0;
/// Upper bound of the engine input signal.
pub const U_MAX: f64 = 100.0;

/// Admissible frequency range for chirps, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub min_hz: f64,
    pub max_hz: f64,
}

impl Default for FrequencyBand {
    fn default() -> Self {
        Self {
            min_hz: 0.05,
            max_hz: 0.5,
        }
    }
}

/// Shape of one excitation segment. Times are local to the segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    Step {
        initial: f64,
        #[serde(rename = "final")]
        final_level: f64,
        at: f64,
    },
    Staircase {
        levels: Vec<f64>,
        hold: f64,
    },
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// Linear frequency sweep from `f_start` to `f_end` over the segment.
    Chirp {
        offset: f64,
        amplitude: f64,
        f_start: f64,
        f_end: f64,
    },
    Ramp {
        from: f64,
        to: f64,
    },
    Hold {
        level: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    #[serde(flatten)]
    pub kind: SignalKind,
    /// Segment length in seconds.
    pub duration: f64,
    #[serde(default)]
    pub band: FrequencyBand,
}

impl SignalSpec {
    pub fn new(kind: SignalKind, duration: f64) -> Self {
        Self {
            kind,
            duration,
            band: FrequencyBand::default(),
        }
    }

    fn validate(&self, dt: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if !(dt > 0.0) || !dt.is_finite() {
            return bad(format!("sample step must be positive, got {dt}"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.duration < dt {
            return bad(format!(
                "duration {} is shorter than one sample ({dt})",
                self.duration
            ));
        }
        let nyquist = 0.5 / dt;
        let check_freq = |f: f64, what: &str| -> Result<()> {
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::InvalidSpec(format!("{what} must be positive, got {f}")));
            }
            if f >= nyquist {
                return Err(Error::InvalidSpec(format!(
                    "{what} {f} Hz is at or above the Nyquist frequency {nyquist} Hz"
                )));
            }
            Ok(())
        };
        match &self.kind {
            SignalKind::Step {
                initial,
                final_level,
                at,
            } => {
                if !initial.is_finite() || !final_level.is_finite() {
                    return bad("step levels must be finite".into());
                }
                if !(0.0..=self.duration).contains(at) {
                    return bad(format!("step time {at} outside [0, {}]", self.duration));
                }
            }
            SignalKind::Staircase { levels, hold } => {
                if levels.is_empty() {
                    return bad("staircase needs at least one level".into());
                }
                if levels.iter().any(|l| !l.is_finite()) {
                    return bad("staircase levels must be finite".into());
                }
                if !(*hold > 0.0) {
                    return bad(format!("staircase hold must be positive, got {hold}"));
                }
            }
            SignalKind::Sine {
                offset,
                amplitude,
                frequency,
            } => {
                if !offset.is_finite() || !amplitude.is_finite() {
                    return bad("sine offset and amplitude must be finite".into());
                }
                check_freq(*frequency, "sine frequency")?;
            }
            SignalKind::Chirp {
                offset,
                amplitude,
                f_start,
                f_end,
            } => {
                if !offset.is_finite() || !amplitude.is_finite() {
                    return bad("chirp offset and amplitude must be finite".into());
                }
                check_freq(*f_start, "chirp start frequency")?;
                check_freq(*f_end, "chirp end frequency")?;
                let band = self.band;
                if !(band.min_hz > 0.0 && band.min_hz <= band.max_hz) {
                    return bad(format!(
                        "invalid chirp band [{}, {}] Hz",
                        band.min_hz, band.max_hz
                    ));
                }
                for f in [f_start, f_end] {
                    if *f < band.min_hz - 1e-12 || *f > band.max_hz + 1e-12 {
                        return bad(format!(
                            "chirp frequency {f} Hz outside the band [{}, {}] Hz",
                            band.min_hz, band.max_hz
                        ));
                    }
                }
            }
            SignalKind::Ramp { from, to } => {
                if !from.is_finite() || !to.is_finite() {
                    return bad("ramp end points must be finite".into());
                }
            }
            SignalKind::Hold { level } => {
                if !level.is_finite() {
                    return bad("hold level must be finite".into());
                }
            }
        }
        Ok(())
    }

    fn sample_count(&self, dt: f64) -> usize {
        ((self.duration / dt).round() as usize).max(1)
    }

    /// Unclamped value at local index `i`.
    fn raw_value(&self, i: usize, dt: f64) -> f64 {
        let t = i as f64 * dt;
        match &self.kind {
            SignalKind::Step {
                initial,
                final_level,
                at,
            } => {
                let switch = (at / dt - 1e-9).ceil().max(0.0) as usize;
                if i >= switch {
                    *final_level
                } else {
                    *initial
                }
            }
            SignalKind::Staircase { levels, hold } => {
                let k = ((t / hold) + 1e-9).floor() as usize;
                levels[k.min(levels.len() - 1)]
            }
            SignalKind::Sine {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (2.0 * PI * frequency * t).sin(),
            SignalKind::Chirp {
                offset,
                amplitude,
                f_start,
                f_end,
            } => {
                let rate = (f_end - f_start) / self.duration;
                let phase = 2.0 * PI * (f_start * t + 0.5 * rate * t * t);
                offset + amplitude * phase.sin()
            }
            SignalKind::Ramp { from, to } => from + (to - from) * t / self.duration,
            SignalKind::Hold { level } => *level,
        }
    }
}

/// Samples one segment at step `dt`, clamping to the admissible input range.
pub fn generate(spec: &SignalSpec, dt: f64) -> Result<TimeSeries> {
    spec.validate(dt)?;
    let values = (0..spec.sample_count(dt))
        .map(|i| spec.raw_value(i, dt).clamp(U_MIN, U_MAX))
        .collect();
    TimeSeries::new("u", 0.0, dt, values)
}

/// Concatenates segments into a single input record starting at t = 0.
pub fn generate_schedule(specs: &[SignalSpec], dt: f64) -> Result<TimeSeries> {
    if specs.is_empty() {
        return Err(Error::InvalidSpec("empty signal schedule".into()));
    }
    let mut values = Vec::new();
    for spec in specs {
        values.extend(generate(spec, dt)?.into_values());
    }
    TimeSeries::new("u", 0.0, dt, values)
}

/// Default identification excitation: a staircase for the steady-state map,
/// a 0.2 Hz sinusoid, a 0.05 to 0.5 Hz chirp, a few large steps and a slow
/// ramp. 308 s in total.
pub fn identification_schedule() -> Vec<SignalSpec> {
    let levels = vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0, 70.0, 50.0, 30.0, 10.0, 0.0];
    let hold = 8.0;
    let staircase_len = levels.len() as f64 * hold;
    let mut specs = vec![
        SignalSpec::new(SignalKind::Staircase { levels, hold }, staircase_len),
        SignalSpec::new(
            SignalKind::Sine {
                offset: 50.0,
                amplitude: 40.0,
                frequency: 0.2,
            },
            60.0,
        ),
        SignalSpec::new(
            SignalKind::Chirp {
                offset: 50.0,
                amplitude: 40.0,
                f_start: 0.05,
                f_end: 0.5,
            },
            120.0,
        ),
    ];
    specs.extend(
        [10.0, 90.0, 30.0, 70.0]
            .into_iter()
            .map(|level| SignalSpec::new(SignalKind::Hold { level }, 5.0)),
    );
    specs.push(SignalSpec::new(
        SignalKind::Ramp {
            from: 0.0,
            to: 100.0,
        },
        20.0,
    ));
    specs
}

/// Held-out schedule for validating identified models; shares no segment with
/// [`identification_schedule`]. 140 s in total.
pub fn validation_schedule() -> Vec<SignalSpec> {
    let mut specs: Vec<SignalSpec> = [0.0, 50.0, 15.0, 85.0, 40.0]
        .into_iter()
        .map(|level| SignalSpec::new(SignalKind::Hold { level }, 6.0))
        .collect();
    specs.push(SignalSpec::new(
        SignalKind::Sine {
            offset: 45.0,
            amplitude: 35.0,
            frequency: 0.1,
        },
        40.0,
    ));
    specs.push(SignalSpec::new(
        SignalKind::Chirp {
            offset: 50.0,
            amplitude: 30.0,
            f_start: 0.1,
            f_end: 0.4,
        },
        40.0,
    ));
    specs.push(SignalSpec::new(
        SignalKind::Ramp {
            from: 100.0,
            to: 20.0,
        },
        30.0,
    ));
    specs
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 0.01;

    #[test]
    fn step_is_piecewise_constant() {
        let spec = SignalSpec::new(
            SignalKind::Step {
                initial: 0.0,
                final_level: 50.0,
                at: 1.0,
            },
            2.0,
        );
        let s = generate(&spec, DT).unwrap();
        assert_eq!(s.len(), 200);
        for (t, v) in s.times().zip(s.values()) {
            let expected = if t < 1.0 - 1e-12 { 0.0 } else { 50.0 };
            assert_eq!(*v, expected, "t = {t}");
        }
    }

    #[test]
    fn sine_bounds_and_period() {
        let spec = SignalSpec::new(
            SignalKind::Sine {
                offset: 50.0,
                amplitude: 40.0,
                frequency: 0.1,
            },
            30.0,
        );
        let s = generate(&spec, DT).unwrap();
        let v = s.values();
        assert!(v.iter().all(|&x| (10.0 - 1e-9..=90.0 + 1e-9).contains(&x)));
        assert!(v.iter().cloned().fold(f64::MIN, f64::max) > 89.99);
        assert!(v.iter().cloned().fold(f64::MAX, f64::min) < 10.01);

        // normalised autocorrelation peaks at the 10 s period
        let acf = |lag: usize| -> f64 {
            let (a, b) = (&v[..v.len() - lag], &v[lag..]);
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
            cov / (va * vb).sqrt()
        };
        let best = (500..1500).max_by(|&a, &b| acf(a).total_cmp(&acf(b))).unwrap();
        assert_eq!(best, 1000);
    }

    /// Zero-crossing times of the chirp compared with the analytic crossings
    /// of the linear-chirp phase, in the first and last windows.
    #[test]
    fn chirp_instantaneous_frequency_at_ends() {
        let (f0, f1, dur) = (0.05, 0.5, 60.0);
        let spec = SignalSpec::new(
            SignalKind::Chirp {
                offset: 50.0,
                amplitude: 40.0,
                f_start: f0,
                f_end: f1,
            },
            dur,
        );
        let s = generate(&spec, DT).unwrap();
        let c: Vec<f64> = s.values().iter().map(|v| v - 50.0).collect();
        let mut crossings = Vec::new();
        for i in 1..c.len() {
            if c[i - 1] == 0.0 {
                continue;
            }
            if c[i - 1] * c[i] <= 0.0 && c[i] != c[i - 1] {
                let frac = c[i - 1] / (c[i - 1] - c[i]);
                crossings.push(s.time(i - 1) + frac * DT);
            }
        }
        // phase(t) = 2π (f0 t + k t² / 2); crossings where f0 t + k t²/2 = n/2
        let k = (f1 - f0) / dur;
        let analytic = |n: f64| (-f0 + (f0 * f0 + k * n).sqrt()) / k;
        let mut n = 1.0;
        let mut expected = Vec::new();
        loop {
            let t = analytic(n);
            if t >= dur - DT {
                break;
            }
            expected.push(t);
            n += 1.0;
        }
        assert_eq!(crossings.len(), expected.len());
        for (got, want) in crossings.iter().zip(&expected) {
            assert!((got - want).abs() < 2e-3, "crossing {got} vs {want}");
        }
        // Over a half period the mean frequency of a linear chirp equals its
        // value at the interval midpoint; extrapolate to both ends.
        let mid_freq = |a: f64, b: f64| ((a + b) / 2.0, 1.0 / (2.0 * (b - a)));
        let extrapolate = |(ta, fa): (f64, f64), (tb, fb): (f64, f64), t: f64| {
            fa + (fb - fa) / (tb - ta) * (t - ta)
        };
        let m = crossings.len();
        let p1 = mid_freq(crossings[0], crossings[1]);
        let p2 = mid_freq(crossings[1], crossings[2]);
        assert!((extrapolate(p1, p2, 0.0) - f0).abs() < 1e-3);
        let q1 = mid_freq(crossings[m - 3], crossings[m - 2]);
        let q2 = mid_freq(crossings[m - 2], crossings[m - 1]);
        assert!((extrapolate(q1, q2, dur) - f1).abs() < 5e-3);
    }

    #[test]
    fn values_are_clamped() {
        let spec = SignalSpec::new(
            SignalKind::Sine {
                offset: 50.0,
                amplitude: 80.0,
                frequency: 0.3,
            },
            10.0,
        );
        let s = generate(&spec, DT).unwrap();
        assert!(s.values().iter().all(|&v| (U_MIN..=U_MAX).contains(&v)));
        assert!(s.values().contains(&0.0) && s.values().contains(&100.0));
    }

    #[test]
    fn invalid_specs_rejected() {
        let neg = SignalSpec::new(SignalKind::Hold { level: 10.0 }, -1.0);
        assert!(matches!(generate(&neg, DT), Err(Error::InvalidSpec(_))));
        let fast = SignalSpec::new(
            SignalKind::Sine {
                offset: 0.0,
                amplitude: 1.0,
                frequency: 60.0,
            },
            1.0,
        );
        let err = generate(&fast, DT).unwrap_err().to_string();
        assert!(err.contains("Nyquist"), "{err}");
        let out_of_band = SignalSpec::new(
            SignalKind::Chirp {
                offset: 50.0,
                amplitude: 10.0,
                f_start: 0.05,
                f_end: 2.0,
            },
            10.0,
        );
        assert!(generate(&out_of_band, DT).is_err());
    }

    #[test]
    fn deterministic_default_schedules() {
        let a = generate_schedule(&identification_schedule(), DT).unwrap();
        let b = generate_schedule(&identification_schedule(), DT).unwrap();
        assert_eq!(a, b);
        assert!(a.duration() >= 300.0);
        let v = generate_schedule(&validation_schedule(), DT).unwrap();
        assert!(v.values().iter().all(|&x| (U_MIN..=U_MAX).contains(&x)));
    }

    #[test]
    fn schedule_round_trips_through_toml() {
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            schedule: Vec<SignalSpec>,
        }
        let text = r#"
            [[schedule]]
            kind = "staircase"
            levels = [0, 50, 100]
            hold = 2
            duration = 6

            [[schedule]]
            kind = "chirp"
            offset = 50.0
            amplitude = 30.0
            f_start = 0.05
            f_end = 0.5
            duration = 20.0
        "#;
        let w: Wrap = toml::from_str(text).unwrap();
        assert_eq!(w.schedule.len(), 2);
        assert_eq!(
            w.schedule[0].kind,
            SignalKind::Staircase {
                levels: vec![0.0, 50.0, 100.0],
                hold: 2.0
            }
        );
        assert_eq!(w.schedule[1].band, FrequencyBand::default());
    }
}
