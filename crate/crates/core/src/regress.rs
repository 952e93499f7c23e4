//! Power-law regression `y = a·x^b + c` for the static steady-state and
//! thrust maps, and the error metrics used throughout.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::signals::series::parse_field;

const MAX_ITERS: usize = 200;
const STEP_TOL: f64 = 1e-10;
const SS_TOT_FLOOR: f64 = 1e-30;

/// Fitted power law with its goodness of fit on the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rmse: f64,
    pub r_squared: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        power_law(self.a, self.b, self.c, x)
    }

    /// Human-readable `key = value` report.
    pub fn report(&self) -> String {
        format!(
            "a = {}\nb = {}\nc = {}\nrmse = {}\nr_squared = {}\nconverged = {}\niterations = {}\n",
            self.a, self.b, self.c, self.rmse, self.r_squared, self.converged, self.iterations
        )
    }

    /// Single-row CSV with header, for aggregation across runs.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.serialize(self)?;
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Error metrics between a reference and an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Goodness {
    pub rmse: f64,
    pub r_squared: f64,
    pub mae: f64,
    pub max_err: f64,
}

pub fn goodness(y: &[f64], y_hat: &[f64]) -> Result<Goodness> {
    if y.len() != y_hat.len() {
        return Err(invalid(format!(
            "length mismatch: {} reference vs {} estimated samples",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(invalid("goodness of fit needs at least one sample"));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut abs_sum = 0.0;
    let mut max_err: f64 = 0.0;
    for (&a, &b) in y.iter().zip(y_hat) {
        let e = (a - b).abs();
        ss_res += e * e;
        ss_tot += (a - mean) * (a - mean);
        abs_sum += e;
        max_err = max_err.max(e);
    }
    Ok(Goodness {
        rmse: (ss_res / n).sqrt(),
        r_squared: 1.0 - ss_res / ss_tot.max(SS_TOT_FLOOR),
        mae: abs_sum / n,
        max_err,
    })
}

fn power_law(a: f64, b: f64, c: f64, x: f64) -> f64 {
    if x > 0.0 {
        a * x.powf(b) + c
    } else {
        c
    }
}

/// Fits `y = a·x^b + c` by Levenberg-Marquardt, holding `c` at `fix_c` when given.
///
/// The initial guess comes from a straight-line fit of `ln(y − c0)` against
/// `ln x` with `c0` slightly below `min(y)`. Constant `y` yields `a = 0`,
/// `b = 1`, `c = mean(y)` (or `fix_c`) and `R² = 0`.
pub fn fit_power_law(x: &[f64], y: &[f64], fix_c: Option<f64>) -> Result<PowerLawFit> {
    Ok(levenberg_marquardt(x, y, fix_c)?.0)
}

fn levenberg_marquardt(x: &[f64], y: &[f64], fix_c: Option<f64>) -> Result<(PowerLawFit, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(invalid(format!("{} x values but {} y values", x.len(), y.len())));
    }
    if x.len() < 4 {
        return Err(invalid(format!("power-law fit needs at least 4 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite data"));
    }
    if x.iter().any(|&v| v < 0.0) {
        return Err(invalid("power-law fit needs x ≥ 0"));
    }
    if let Some(c) = fix_c {
        if !c.is_finite() {
            return Err(invalid("fixed offset must be finite"));
        }
    }
    let (x_lo, x_hi) = min_max(x);
    if x_hi - x_lo <= 1e-12 * x_hi.abs().max(1.0) {
        return Err(invalid("degenerate x: all values equal"));
    }

    let (y_lo, y_hi) = min_max(y);
    if y_hi - y_lo <= 1e-12 * y_hi.abs().max(y_lo.abs()).max(1e-300) {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let c = fix_c.unwrap_or(mean);
        let (mut fit, history) = finish(x, y, [0.0, 1.0, c], true, 0, vec![])?;
        fit.r_squared = 0.0;
        return Ok((fit, history));
    }

    let mut p = initial_guess(x, y, fix_c);
    let n_params = if fix_c.is_some() { 2 } else { 3 };
    let ssr = |p: &[f64; 3]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| (yi - power_law(p[0], p[1], p[2], xi)).powi(2))
            .sum()
    };
    let mut current = ssr(&p);
    let mut history = vec![current];
    let mut lambda: f64 = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERS {
        iterations += 1;
        let (jac, res) = linearise(x, y, &p, n_params);
        let jtj = jac.tr_mul(&jac);
        let scale: Vec<f64> = (0..n_params).map(|j| jtj[(j, j)].max(1e-300).sqrt()).collect();
        let mut accepted = false;
        while lambda < 1e20 {
            // solve the damped problem as an augmented least-squares system
            let mut aug = DMatrix::zeros(x.len() + n_params, n_params);
            aug.rows_mut(0, x.len()).copy_from(&jac);
            let mut rhs = DVector::zeros(x.len() + n_params);
            rhs.rows_mut(0, x.len()).copy_from(&res);
            for j in 0..n_params {
                aug[(x.len() + j, j)] = lambda.sqrt() * scale[j];
            }
            let Ok(delta) = aug.svd(true, true).solve(&rhs, 0.0) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for j in 0..n_params {
                trial[j] += delta[j];
            }
            let trial_ssr = ssr(&trial);
            if trial_ssr.is_finite() && trial_ssr <= current {
                let step: f64 = (0..n_params).map(|j| (delta[j] / p[j].abs().max(1e-300)).powi(2)).sum();
                // heavily damped steps are short without being near the optimum
                let stalled = current - trial_ssr <= 1e-12 * current;
                p = trial;
                current = trial_ssr;
                history.push(current);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if step.sqrt() < STEP_TOL && stalled {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if converged {
        p = polish(x, y, p, n_params);
    }
    finish(x, y, p, converged, iterations, history)
}

/// Undamped Gauss-Newton steps from a converged point. Near the optimum the
/// sum of squares is flat to rounding error, so steps are accepted while they
/// contract instead of by comparing residuals.
fn polish(x: &[f64], y: &[f64], mut p: [f64; 3], n_params: usize) -> [f64; 3] {
    let mut last = f64::INFINITY;
    for _ in 0..8 {
        let (jac, res) = linearise(x, y, &p, n_params);
        let Ok(delta) = jac.svd(true, true).solve(&res, 0.0) else {
            break;
        };
        let norm: f64 = (0..n_params).map(|j| (delta[j] / p[j].abs().max(1e-300)).powi(2)).sum::<f64>().sqrt();
        if !(norm < 0.5 * last) || norm > 1e-6 {
            break;
        }
        for j in 0..n_params {
            p[j] += delta[j];
        }
        last = norm;
    }
    p
}

fn finish(
    x: &[f64],
    y: &[f64],
    p: [f64; 3],
    converged: bool,
    iterations: usize,
    history: Vec<f64>,
) -> Result<(PowerLawFit, Vec<f64>)> {
    let y_hat: Vec<f64> = x.iter().map(|&xi| power_law(p[0], p[1], p[2], xi)).collect();
    let g = goodness(y, &y_hat)?;
    let fit = PowerLawFit {
        a: p[0],
        b: p[1],
        c: p[2],
        rmse: g.rmse,
        r_squared: g.r_squared,
        converged,
        iterations,
    };
    Ok((fit, history))
}

/// Residuals and model Jacobian for the free parameters `[a, b, (c)]`.
fn linearise(x: &[f64], y: &[f64], p: &[f64; 3], n_params: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut jac = DMatrix::zeros(x.len(), n_params);
    let mut res = DVector::zeros(x.len());
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let pow = if xi > 0.0 { xi.powf(p[1]) } else { 0.0 };
        jac[(i, 0)] = pow;
        jac[(i, 1)] = if xi > 0.0 { p[0] * pow * xi.ln() } else { 0.0 };
        if n_params == 3 {
            jac[(i, 2)] = 1.0;
        }
        res[i] = yi - (p[0] * pow + p[2]);
    }
    (jac, res)
}

fn initial_guess(x: &[f64], y: &[f64], fix_c: Option<f64>) -> [f64; 3] {
    let (y_lo, y_hi) = min_max(y);
    let c0 = fix_c.unwrap_or(y_lo - 0.01 * (y_hi - y_lo));
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|&(&xi, &yi)| xi > 0.0 && yi - c0 > 0.0)
        .map(|(&xi, &yi)| (xi.ln(), (yi - c0).ln()))
        .collect();
    if pts.len() < 2 {
        return [(y_hi - c0).max(1e-12), 1.0, c0];
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(sx, sy), &(u, v)| (sx + u / n, sy + v / n));
    let sxx: f64 = pts.iter().map(|&(u, _)| (u - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|&(u, v)| (u - mx) * (v - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 1.0 };
    let b = if b.is_finite() && b > 0.0 { b } else { 1.0 };
    [(my - b * mx).exp(), b, c0]
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Reads a two-column CSV with a header row; column names are free.
pub fn read_xy_csv<R: Read>(reader: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.len() != 2 {
        return Err(invalid(format!("expected two columns, found {}", headers.len())));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        xs.push(parse_field(&rec[0], i + 2, &headers[0])?);
        ys.push(parse_field(&rec[1], i + 2, &headers[1])?);
    }
    Ok((xs, ys))
}
