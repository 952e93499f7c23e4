use super::TimeSeries;
use crate::error::{invalid, Result};

/// Slack on the grid-ratio when deciding a tie, absorbing representation
/// error in values such as 35.05 / 0.1.
const TIE_SLACK: f64 = 1e-9;

/// Rounds `value` to the nearest multiple of `step`; ties go away from zero.
pub fn quantize_value(value: f64, step: f64) -> f64 {
    let ratio = value / step;
    let lower = ratio.floor();
    let frac = ratio - lower;
    let index = if (frac - 0.5).abs() <= TIE_SLACK * ratio.abs().max(1.0) {
        if ratio >= 0.0 {
            lower + 1.0
        } else {
            lower
        }
    } else {
        ratio.round()
    };
    index * step
}

/// Quantizes every sample of `series` onto the `step` grid.
pub fn quantize(series: &TimeSeries, step: f64) -> Result<TimeSeries> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid(format!("quantization step must be positive, got {step}")));
    }
    series.map(series.name.clone(), |v| quantize_value(v, step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn rounding_examples() {
        assert!(close(quantize_value(35.123, 0.1), 35.1));
        assert!(close(quantize_value(35.05, 0.1), 35.1));
        assert!(close(quantize_value(-35.05, 0.1), -35.1));
        assert!(close(quantize_value(0.25, 0.5), 0.5));
    }

    #[test]
    fn on_grid_series_unchanged() {
        let s = TimeSeries::new("omega", 0.0, 0.01, vec![35.0; 20]).unwrap();
        assert_eq!(quantize(&s, 0.1).unwrap().values(), s.values());
    }

    #[test]
    fn bad_step_rejected() {
        let s = TimeSeries::new("omega", 0.0, 0.01, vec![1.0]).unwrap();
        assert!(quantize(&s, 0.0).is_err());
        assert!(quantize(&s, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn error_bounded_and_on_grid(v in -200.0f64..200.0, step in 0.01f64..5.0) {
            let q = quantize_value(v, step);
            prop_assert!((q - v).abs() <= step / 2.0 + 1e-9 * step.max(v.abs()));
            let n = q / step;
            prop_assert!((n - n.round()).abs() < 1e-9);
        }

        #[test]
        fn idempotent(v in -200.0f64..200.0, step in 0.01f64..5.0) {
            let q = quantize_value(v, step);
            prop_assert_eq!(quantize_value(q, step), q);
        }

        #[test]
        fn commutes_with_grid_shift(v in -100.0f64..100.0, k in -50i32..50) {
            let step = 0.1;
            let shifted = quantize_value(v + k as f64 * step, step);
            prop_assert!(close(shifted, quantize_value(v, step) + k as f64 * step));
        }
    }
}
