use std::fmt;

use nalgebra::DMatrix;

use crate::plant::SteadyStateMap;

/// One regression row: the state and input at a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSample {
    pub omega: f64,
    pub omega_dot: f64,
    pub u: f64,
}

/// A candidate function of `(ω, ω̇, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    /// `ω − a1·u^b1 − c1` with the library's steady-state constants.
    SteadyState,
    /// `ω^omega · u^u · ω̇^omega_dot`; all-zero exponents is the constant.
    Monomial { omega: u8, u: u8, omega_dot: u8 },
}

impl Feature {
    pub const fn monomial(omega: u8, u: u8, omega_dot: u8) -> Self {
        Feature::Monomial { omega, u, omega_dot }
    }

    pub fn degree(&self) -> u32 {
        match *self {
            Feature::SteadyState => 1,
            Feature::Monomial { omega, u, omega_dot } => (omega + u + omega_dot) as u32,
        }
    }

    /// Name using the ω/ω̇ symbols, e.g. `ω²ω̇`.
    pub fn name(&self) -> String {
        self.render(["ω", "u", "ω̇"], |s, p| format!("{s}{}", superscript(p)), "")
    }

    /// ASCII name, e.g. `omega^2*omega_dot`.
    pub fn ascii_name(&self) -> String {
        self.render(["omega", "u", "omega_dot"], |s, p| format!("{s}^{p}"), "*")
    }

    fn render(&self, symbols: [&str; 3], power: impl Fn(&str, u8) -> String, sep: &str) -> String {
        let Feature::Monomial { omega, u, omega_dot } = *self else {
            return "f_ss".into();
        };
        let parts: Vec<String> = symbols
            .iter()
            .zip([omega, u, omega_dot])
            .filter(|&(_, p)| p > 0)
            .map(|(s, p)| if p == 1 { s.to_string() } else { power(s, p) })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join(sep)
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn superscript(p: u8) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    p.to_string().chars().map(|c| DIGITS[c.to_digit(10).unwrap() as usize]).collect()
}

/// Ordered set of candidate features.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLibrary {
    features: Vec<Feature>,
    steady: Option<SteadyStateMap>,
}

impl CandidateLibrary {
    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn steady_state(&self) -> Option<SteadyStateMap> {
        self.steady
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(Feature::name).collect()
    }

    pub fn position(&self, feature: Feature) -> Option<usize> {
        self.features.iter().position(|&f| f == feature)
    }

    pub fn eval(&self, feature: Feature, s: &StateSample) -> f64 {
        match feature {
            Feature::SteadyState => self
                .steady
                .expect("f_ss is only present in anchored libraries")
                .residual(s.omega, s.u),
            Feature::Monomial { omega, u, omega_dot } => {
                s.omega.powi(omega as i32) * s.u.powi(u as i32) * s.omega_dot.powi(omega_dot as i32)
            }
        }
    }

    /// Design matrix with one row per sample and one column per feature.
    pub fn matrix(&self, data: &[StateSample]) -> DMatrix<f64> {
        DMatrix::from_fn(data.len(), self.len(), |i, j| self.eval(self.features[j], &data[i]))
    }
}

/// Monomials in `(ω, u, ω̇)` of total degree `1..=max_degree` (plus the constant
/// when `with_constant`), ordered by degree and then with higher powers of ω,
/// then of u, first.
fn monomials(max_degree: u32, with_constant: bool, need_omega_dot: bool) -> Vec<Feature> {
    let mut out = Vec::new();
    let start = if with_constant { 0 } else { 1 };
    for d in start..=max_degree {
        for w in (0..=d).rev() {
            for u in (0..=d - w).rev() {
                let wd = d - w - u;
                if need_omega_dot && wd == 0 {
                    continue;
                }
                out.push(Feature::monomial(w as u8, u as u8, wd as u8));
            }
        }
    }
    out
}

/// Library anchored on the steady state: `f_ss` followed by every monomial
/// up to `max_degree` that contains a factor of `ω̇`.
///
/// Within a degree the order is `ωᵏω̇`, `uᵏω̇`, the mixed `ω·u` terms with a
/// single `ω̇`, the pure power of `ω̇`, and then the remaining terms with
/// higher powers of `ω̇`. At degree 3 this gives
/// `f_ss, ω̇, ωω̇, uω̇, ω̇², ω²ω̇, u²ω̇, ωuω̇, ω̇³, ωω̇², uω̇²`.
///
/// Because every term but `f_ss` vanishes at `ω̇ = 0`, any model built from
/// this library keeps the steady-state map as its equilibrium set.
pub fn build_library_b(steady: SteadyStateMap, max_degree: u32) -> CandidateLibrary {
    let mut terms = monomials(max_degree.max(1), false, true);
    terms.sort_by_key(|f| match *f {
        Feature::Monomial { omega, u, omega_dot } => {
            let group = match (omega, u, omega_dot) {
                (_, 0, 1) | (0, _, 1) => 0,
                (_, _, 1) => 1,
                (0, 0, _) => 2,
                _ => 3,
            };
            (f.degree(), group)
        }
        Feature::SteadyState => (0, 0),
    });
    let mut features = vec![Feature::SteadyState];
    features.extend(terms);
    CandidateLibrary {
        features,
        steady: Some(steady),
    }
}

/// Plain polynomial library (constant included), for comparison only.
pub fn build_library_a(max_degree: u32) -> CandidateLibrary {
    CandidateLibrary {
        features: monomials(max_degree, true, false),
        steady: None,
    }
}
