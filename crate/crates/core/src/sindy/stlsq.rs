use nalgebra::{DMatrix, DVector};

use super::{CandidateLibrary, Feature, StateSample};
use crate::error::{invalid, Error, Result};

/// Default pruning threshold on unit-RMS-normalised coefficients.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MAX_ITERS: usize = 25;

/// Singular-value ratio below which an active set counts as rank deficient.
const RANK_CUTOFF: f64 = 1e-10;

/// Result of sequentially thresholded least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    pub features: Vec<Feature>,
    /// Coefficients in physical units; inactive entries are exactly 0.
    pub coefficients: Vec<f64>,
    /// Coefficients for unit-RMS columns and target, the scale the threshold applies to.
    pub normalized: Vec<f64>,
    pub active_set: Vec<usize>,
    pub threshold_used: f64,
    /// RMS of `target − Θ·ξ`.
    pub residual_rms: f64,
    pub iterations: usize,
    /// Whether the active set settled before `max_iters`.
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SparseModel {
    pub fn active_features(&self) -> Vec<Feature> {
        self.active_set.iter().map(|&i| self.features[i]).collect()
    }

    pub fn coefficient(&self, feature: Feature) -> f64 {
        self.features
            .iter()
            .position(|&f| f == feature)
            .map_or(0.0, |i| self.coefficients[i])
    }

    /// `Σ ξ_i θ_i(s)` over the library the model was fitted with.
    pub fn predict(&self, library: &CandidateLibrary, s: &StateSample) -> f64 {
        self.active_set
            .iter()
            .map(|&i| self.coefficients[i] * library.eval(self.features[i], s))
            .sum()
    }

    /// `name = coefficient` lines for the active features.
    pub fn report(&self) -> String {
        self.active_set
            .iter()
            .map(|&i| format!("{} = {}\n", self.features[i].ascii_name(), self.coefficients[i]))
            .collect()
    }
}

/// Sequentially thresholded least squares.
///
/// Columns and target are scaled to unit RMS; the threshold applies to the
/// scaled coefficients, which are mapped back to physical units on output.
/// Least squares and pruning alternate until every surviving coefficient
/// clears the threshold.
pub fn stlsq(
    library: &CandidateLibrary,
    data: &[StateSample],
    target: &[f64],
    threshold: f64,
    max_iters: usize,
) -> Result<SparseModel> {
    let all: Vec<usize> = (0..library.len()).collect();
    stlsq_from(library, data, target, threshold, max_iters, &all)
}

/// [`stlsq`] starting from a given active set instead of the full library.
pub fn stlsq_from(
    library: &CandidateLibrary,
    data: &[StateSample],
    target: &[f64],
    threshold: f64,
    max_iters: usize,
    initial_active: &[usize],
) -> Result<SparseModel> {
    let p = library.len();
    if data.len() != target.len() {
        return Err(invalid(format!(
            "{} samples but {} target values",
            data.len(),
            target.len()
        )));
    }
    if data.len() < 10 * p {
        return Err(invalid(format!(
            "{} samples is too few for {p} candidate features (need at least {})",
            data.len(),
            10 * p
        )));
    }
    if !(threshold >= 0.0) {
        return Err(invalid(format!("threshold must be non-negative, got {threshold}")));
    }
    if let Some(&bad) = initial_active.iter().find(|&&i| i >= p) {
        return Err(invalid(format!("feature index {bad} out of range")));
    }

    let theta = library.matrix(data);
    if theta.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite regression data"));
    }
    let rms = |v: &mut dyn Iterator<Item = f64>, n: usize| (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let n = data.len();
    let col_scale: Vec<f64> = (0..p).map(|j| rms(&mut theta.column(j).iter().copied(), n)).collect();
    let y_scale = rms(&mut target.iter().copied(), n);

    let mut model = SparseModel {
        features: library.features().to_vec(),
        coefficients: vec![0.0; p],
        normalized: vec![0.0; p],
        active_set: vec![],
        threshold_used: threshold,
        residual_rms: y_scale,
        iterations: 0,
        converged: true,
        warnings: vec![],
    };
    if y_scale == 0.0 {
        return Ok(model);
    }

    let mut scaled = theta.clone();
    for (j, &s) in col_scale.iter().enumerate() {
        if s > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let y = DVector::from_iterator(n, target.iter().map(|v| v / y_scale));

    let mut active: Vec<usize> = initial_active.to_vec();
    active.sort_unstable();
    active.dedup();
    active.retain(|&j| {
        let keep = col_scale[j] > 0.0;
        if !keep {
            model.warnings.push(format!("feature {} is identically zero", library.features()[j]));
        }
        keep
    });

    let mut xi = vec![0.0; p];
    model.converged = false;
    while model.iterations < max_iters.max(1) {
        model.iterations += 1;
        if active.is_empty() {
            return Err(Error::ThresholdTooAggressive);
        }
        xi = least_squares(&scaled, &y, &mut active, library, &mut model.warnings);
        let before = active.len();
        active.retain(|&j| xi[j].abs() >= threshold);
        if active.len() == before {
            model.converged = true;
            break;
        }
    }
    if active.is_empty() {
        return Err(Error::ThresholdTooAggressive);
    }
    if !model.converged {
        model
            .warnings
            .push(format!("active set still changing after {max_iters} iterations"));
        xi = least_squares(&scaled, &y, &mut active, library, &mut model.warnings);
    }

    for &j in &active {
        model.normalized[j] = xi[j];
        model.coefficients[j] = xi[j] * y_scale / col_scale[j];
    }
    model.active_set = active;
    let fitted = &theta * DVector::from_vec(model.coefficients.clone());
    model.residual_rms = (fitted
        .iter()
        .zip(target)
        .map(|(f, t)| (t - f).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(model)
}

/// Least squares on the active columns, dropping columns until the reduced
/// matrix is numerically full rank. Returns a full-length coefficient vector.
fn least_squares(
    theta: &DMatrix<f64>,
    y: &DVector<f64>,
    active: &mut Vec<usize>,
    library: &CandidateLibrary,
    warnings: &mut Vec<String>,
) -> Vec<f64> {
    loop {
        let sub = theta.select_columns(active.iter());
        let svd = sub.clone().svd(true, true);
        let sv = &svd.singular_values;
        let (i_min, s_min) = sv.argmin();
        let s_max = sv.max();
        if active.len() > 1 && s_min <= RANK_CUTOFF * s_max {
            // the right singular vector of the smallest singular value spans the
            // dependency; drop the column that contributes most to it
            let v_t = svd.v_t.as_ref().expect("requested V^T");
            let (k, _) = v_t.row(i_min).transpose().iamax_full();
            let dropped = active.remove(k);
            warnings.push(format!(
                "dropped linearly dependent feature {}",
                library.features()[dropped]
            ));
            continue;
        }
        let sol = svd.solve(y, 0.0).expect("requested U and V^T");
        let mut xi = vec![0.0; theta.ncols()];
        for (k, &j) in active.iter().enumerate() {
            xi[j] = sol[k];
        }
        return xi;
    }
}
