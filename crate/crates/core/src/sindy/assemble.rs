use super::{Feature, SparseModel};
use crate::error::{Error, Result};
use crate::plant::{OmegaUModel, SteadyStateMap};

/// Features of the ω–u model form, in the order `K_ss, K_d, K_wd, K_wwd`.
pub const MODEL_FEATURES: [Feature; 4] = [
    Feature::SteadyState,
    Feature::monomial(0, 0, 1),
    Feature::monomial(1, 0, 1),
    Feature::monomial(2, 0, 1),
];

/// Maps a sparse model onto the ω–u model form. Any active feature outside
/// `{f_ss, ω̇, ωω̇, ω²ω̇}` is reported by name.
pub fn assemble_omega_u_model(sparse: &SparseModel, steady: SteadyStateMap) -> Result<OmegaUModel> {
    if sparse.active_set.is_empty() {
        return Err(Error::InvalidModel("sparse model has no active features".into()));
    }
    let extra: Vec<String> = sparse
        .active_features()
        .into_iter()
        .filter(|f| !MODEL_FEATURES.contains(f))
        .map(|f| f.name())
        .collect();
    if !extra.is_empty() {
        return Err(Error::UnexpectedStructure(extra));
    }
    let [k_ss, k_d, k_wd, k_wwd] = MODEL_FEATURES.map(|f| sparse.coefficient(f));
    OmegaUModel::new(steady, k_ss, k_d, k_wd, k_wwd)
}
