use nalgebra::DMatrix;

use super::TimeSeries;
use crate::error::{invalid, Result};

/// Savitzky-Golay smoother/differentiator with one-sided fits at the edges.
///
/// `weights[j]` holds the convolution weights that evaluate the fitted
/// polynomial's derivative at position `j` of a window, so interior samples
/// use the centre row and the first/last `window / 2` samples use off-centre
/// rows of the same boundary window.
#[derive(Debug, Clone)]
pub struct SavitzkyGolay {
    window: usize,
    degree: usize,
    deriv_order: usize,
    weights: Vec<Vec<f64>>,
}

impl SavitzkyGolay {
    /// Weights are in per-sample units; [`apply`](Self::apply) scales by `1/dt^d`.
    pub fn new(window: usize, degree: usize, deriv_order: usize) -> Result<Self> {
        if window.is_multiple_of(2) {
            return Err(invalid(format!("window must be odd, got {window}")));
        }
        if window <= degree {
            return Err(invalid(format!(
                "window {window} must exceed the polynomial degree {degree}"
            )));
        }
        if deriv_order > 2 || deriv_order > degree {
            return Err(invalid(format!(
                "derivative order {deriv_order} must be at most 2 and at most the degree {degree}"
            )));
        }
        let half = (window / 2) as f64;
        let scale = half.max(1.0);
        // Vandermonde in z = (i - centre) / half, which keeps it well conditioned
        let z: Vec<f64> = (0..window).map(|i| (i as f64 - half) / scale).collect();
        let vander = DMatrix::from_fn(window, degree + 1, |i, k| z[i].powi(k as i32));
        let pinv = vander
            .clone()
            .pseudo_inverse(1e-13)
            .map_err(|e| invalid(format!("Savitzky-Golay design is singular: {e}")))?;

        let weights = z
            .iter()
            .map(|&zj| {
                // d^d/dz^d of z^k at zj, divided through to per-sample units
                let basis: Vec<f64> = (0..=degree)
                    .map(|k| {
                        if k < deriv_order {
                            0.0
                        } else {
                            let falling: f64 =
                                ((k - deriv_order + 1)..=k).map(|m| m as f64).product();
                            falling * zj.powi((k - deriv_order) as i32)
                        }
                    })
                    .collect();
                let denom = scale.powi(deriv_order as i32);
                (0..window)
                    .map(|i| {
                        (0..=degree).map(|k| basis[k] * pinv[(k, i)]).sum::<f64>() / denom
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            window,
            degree,
            deriv_order,
            weights,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Filters raw samples taken every `dt` seconds.
    pub fn apply(&self, samples: &[f64], dt: f64) -> Result<Vec<f64>> {
        let n = samples.len();
        if self.window > n {
            return Err(invalid(format!(
                "window {} exceeds series length {n}",
                self.window
            )));
        }
        let half = self.window / 2;
        let gain = dt.powi(-(self.deriv_order as i32));
        let dot = |w: &[f64], start: usize| -> f64 {
            w.iter().zip(&samples[start..start + self.window]).map(|(a, b)| a * b).sum()
        };
        let out = (0..n)
            .map(|i| {
                let v = if i < half {
                    dot(&self.weights[i], 0)
                } else if i + half >= n {
                    let start = n - self.window;
                    dot(&self.weights[i - start], start)
                } else {
                    dot(&self.weights[half], i - half)
                };
                v * gain
            })
            .collect();
        Ok(out)
    }
}

/// Savitzky-Golay smoothing (`deriv_order = 0`) or differentiation of a series.
pub fn savitzky_golay(
    series: &TimeSeries,
    window: usize,
    degree: usize,
    deriv_order: usize,
) -> Result<TimeSeries> {
    let filter = SavitzkyGolay::new(window, degree, deriv_order)?;
    let values = filter.apply(series.values(), series.dt())?;
    let name = match deriv_order {
        0 => series.name.clone(),
        d => format!("d{d}_{}", series.name),
    };
    series.with_values(name, values)
}
