//! Cubic smoothing spline (Reinsch form) on a uniform grid.
//!
//! Minimises `Σ (y_i − g(t_i))² + λ ∫ g''(t)² dt` over natural cubic splines
//! with knots at the samples. With `γ` the second derivatives at the interior
//! knots the solution satisfies `(R + λ QᵀQ) γ = Qᵀ y` and `g = y − λ Q γ`,
//! where `R` is tridiagonal and `QᵀQ` pentadiagonal.

use super::TimeSeries;
use crate::error::{invalid, Result};

/// Smoothed signal and the analytic derivatives of the fitted spline.
#[derive(Debug, Clone)]
pub struct SplineDerivatives {
    pub smooth: TimeSeries,
    pub first: TimeSeries,
    pub second: TimeSeries,
    /// The penalty weight λ actually used.
    pub smoothing: f64,
}

const MIN_SAMPLES: usize = 8;

struct SplineFit {
    values: Vec<f64>,
    /// Second derivatives at every knot (zero at both ends).
    curvature: Vec<f64>,
}

/// Solves a symmetric positive definite pentadiagonal system in place.
/// `diag`, `off1`, `off2` are the main, first and second bands.
fn solve_pentadiagonal(diag: &[f64], off1: &[f64], off2: &[f64], rhs: &mut [f64]) -> Result<()> {
    let m = diag.len();
    let mut l0 = vec![0.0; m];
    let mut l1 = vec![0.0; m];
    let mut l2 = vec![0.0; m];
    for i in 0..m {
        if i >= 2 {
            l2[i] = off2[i - 2] / l0[i - 2];
        }
        if i >= 1 {
            let above = if i >= 2 { l2[i] * l1[i - 1] } else { 0.0 };
            l1[i] = (off1[i - 1] - above) / l0[i - 1];
        }
        let pivot = diag[i] - l1[i] * l1[i] - l2[i] * l2[i];
        if !(pivot > 0.0) {
            return Err(invalid("spline system is not positive definite"));
        }
        l0[i] = pivot.sqrt();
    }
    for i in 0..m {
        let mut v = rhs[i];
        if i >= 1 {
            v -= l1[i] * rhs[i - 1];
        }
        if i >= 2 {
            v -= l2[i] * rhs[i - 2];
        }
        rhs[i] = v / l0[i];
    }
    for i in (0..m).rev() {
        let mut v = rhs[i];
        if i + 1 < m {
            v -= l1[i + 1] * rhs[i + 1];
        }
        if i + 2 < m {
            v -= l2[i + 2] * rhs[i + 2];
        }
        rhs[i] = v / l0[i];
    }
    Ok(())
}

fn fit(y: &[f64], h: f64, lambda: f64) -> Result<SplineFit> {
    let n = y.len();
    let m = n - 2;
    let h2 = h * h;
    let diag = vec![2.0 * h / 3.0 + 6.0 * lambda / h2; m];
    let off1 = vec![h / 6.0 - 4.0 * lambda / h2; m.saturating_sub(1)];
    let off2 = vec![lambda / h2; m.saturating_sub(2)];
    let mut gamma: Vec<f64> = (1..n - 1)
        .map(|j| (y[j - 1] - 2.0 * y[j] + y[j + 1]) / h)
        .collect();
    solve_pentadiagonal(&diag, &off1, &off2, &mut gamma)?;

    let mut curvature = vec![0.0; n];
    curvature[1..n - 1].copy_from_slice(&gamma);
    let values = (0..n)
        .map(|i| {
            let prev = if i >= 1 { curvature[i - 1] } else { 0.0 };
            let next = if i + 1 < n { curvature[i + 1] } else { 0.0 };
            // end curvatures are zero, so the same stencil covers rows 0 and n-1
            let q_gamma = (prev - 2.0 * curvature[i] + next) / h;
            y[i] - lambda * q_gamma
        })
        .collect();
    Ok(SplineFit { values, curvature })
}

fn slopes(fit: &SplineFit, h: f64) -> Vec<f64> {
    let g = &fit.values;
    let c = &fit.curvature;
    let n = g.len();
    (0..n)
        .map(|i| {
            if i + 1 < n {
                (g[i + 1] - g[i]) / h - h * (2.0 * c[i] + c[i + 1]) / 6.0
            } else {
                (g[i] - g[i - 1]) / h + h * (c[i - 1] + 2.0 * c[i]) / 6.0
            }
        })
        .collect()
}

fn check_input(series: &TimeSeries, smoothing: f64) -> Result<()> {
    if series.len() < MIN_SAMPLES {
        return Err(invalid(format!(
            "smoothing spline needs at least {MIN_SAMPLES} samples, got {}",
            series.len()
        )));
    }
    if !(smoothing >= 0.0) || !smoothing.is_finite() {
        return Err(invalid(format!(
            "smoothing must be a finite non-negative number, got {smoothing}"
        )));
    }
    Ok(())
}

/// Fits a cubic smoothing spline with penalty weight `smoothing` (λ ≥ 0,
/// λ = 0 interpolates) and returns the fit with its first and second
/// derivatives on the sample grid.
pub fn smooth_spline_derivatives(series: &TimeSeries, smoothing: f64) -> Result<SplineDerivatives> {
    check_input(series, smoothing)?;
    let h = series.dt();
    let fitted = fit(series.values(), h, smoothing)?;
    let first = slopes(&fitted, h);
    let name = &series.name;
    Ok(SplineDerivatives {
        first: series.with_values(format!("{name}_dot"), first)?,
        second: series.with_values(format!("{name}_ddot"), fitted.curvature.clone())?,
        smooth: series.with_values(name.clone(), fitted.values)?,
        smoothing,
    })
}

fn residual_rms(y: &[f64], h: f64, lambda: f64) -> Result<f64> {
    let f = fit(y, h, lambda)?;
    let ss: f64 = f.values.iter().zip(y).map(|(g, v)| (g - v).powi(2)).sum();
    Ok((ss / y.len() as f64).sqrt())
}

/// Picks λ so that the residual RMS of the fit matches `noise_rms`
/// (discrepancy principle). Bisects on log λ, which the residual is monotone
/// in; saturates at the ends of the search range.
pub fn discrepancy_smoothing(series: &TimeSeries, noise_rms: f64) -> Result<f64> {
    check_input(series, 0.0)?;
    if !(noise_rms > 0.0) {
        return Ok(0.0);
    }
    let y = series.values();
    let h = series.dt();
    // λ scales like h³ for a fixed equivalent bandwidth in samples
    let unit = h.powi(3);
    let (mut lo, mut hi) = ((1e-6 * unit).ln(), (1e14 * unit).ln());
    if residual_rms(y, h, hi.exp())? <= noise_rms {
        return Ok(hi.exp());
    }
    if residual_rms(y, h, lo.exp())? >= noise_rms {
        return Ok(lo.exp());
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if residual_rms(y, h, mid.exp())? < noise_rms {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Smoothing for a signal quantized with `step`: the residual is matched to
/// the RMS of uniform quantization noise, `step / √12`.
pub fn default_smoothing(series: &TimeSeries, step: f64) -> Result<f64> {
    discrepancy_smoothing(series, step / 12f64.sqrt())
}
