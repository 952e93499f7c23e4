use nalgebra::{DMatrix, SMatrix, SVector};

use crate::error::{invalid, Error, Result};

/// Largest innovation-covariance condition number accepted by the update.
const MAX_CONDITION: f64 = 1e14;

/// State of a discrete EKF with `N` states and `M` measurements.
///
/// `q` and `r` are per-step covariances: `q` is added to the predicted
/// covariance once per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfInstance<const N: usize, const M: usize> {
    pub x: SVector<f64, N>,
    pub p: SMatrix<f64, N, N>,
    pub q: SMatrix<f64, N, N>,
    pub r: SMatrix<f64, M, M>,
    /// Step between measurements, s.
    pub dt: f64,
}

impl<const N: usize, const M: usize> EkfInstance<N, M> {
    pub fn new(
        x: SVector<f64, N>,
        p: SMatrix<f64, N, N>,
        q: SMatrix<f64, N, N>,
        r: SMatrix<f64, M, M>,
        dt: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("filter step must be positive, got {dt}")));
        }
        if !x.iter().chain(p.iter()).chain(q.iter()).chain(r.iter()).all(|v| v.is_finite()) {
            return Err(invalid("filter matrices must be finite"));
        }
        for (name, m) in [("P", &p), ("Q", &q)] {
            if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
                return Err(invalid(format!("{name} must be symmetric")));
            }
        }
        if (r - r.transpose()).abs().max() > 1e-12 * r.abs().max().max(1.0) {
            return Err(invalid("R must be symmetric"));
        }
        Ok(Self { x, p, q, r, dt })
    }

    /// Time update: `x ← f(x)`, `P ← F P Fᵀ + Q` with `F` the Jacobian of `f`.
    pub fn predict(&self, f: impl Fn(&SVector<f64, N>) -> SVector<f64, N>) -> Result<Self> {
        let jac = jacobian(&f, &self.x);
        let mut next = *self;
        next.x = f(&self.x);
        next.p = symmetrize(jac * self.p * jac.transpose() + self.q);
        next.check()?;
        Ok(next)
    }

    /// Measurement update with the Joseph-form covariance.
    pub fn update(&self, h: impl Fn(&SVector<f64, N>) -> SVector<f64, M>, y: &SVector<f64, M>) -> Result<Self> {
        if !y.iter().all(|v| v.is_finite()) {
            return Err(invalid("measurement must be finite"));
        }
        let jac = jacobian(&h, &self.x);
        let s = jac * self.p * jac.transpose() + self.r;
        let s_inv = invert_checked(&s)?;
        let gain = self.p * jac.transpose() * s_inv;
        let innovation = y - h(&self.x);
        let mut next = *self;
        next.x = self.x + gain * innovation;
        let i_kh = SMatrix::<f64, N, N>::identity() - gain * jac;
        next.p = symmetrize(i_kh * self.p * i_kh.transpose() + gain * self.r * gain.transpose());
        next.check()?;
        Ok(next)
    }

    fn check(&self) -> Result<()> {
        if self.x.iter().chain(self.p.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteState)
        }
    }
}

/// One predict-update cycle with transition `f(x, u)` and measurement `h(x)`.
pub fn ekf_step<const N: usize, const M: usize, U>(
    inst: &EkfInstance<N, M>,
    f: impl Fn(&SVector<f64, N>, &U) -> SVector<f64, N>,
    h: impl Fn(&SVector<f64, N>) -> SVector<f64, M>,
    u: &U,
    y: &SVector<f64, M>,
) -> Result<EkfInstance<N, M>> {
    inst.predict(|x| f(x, u))?.update(h, y)
}

/// Central-difference Jacobian with step `1e-6·max(1, |x_i|)`.
///
/// The divisor is the realised step `x⁺ − x⁻` rather than the nominal one, so
/// affine maps are differentiated without representation error.
pub fn jacobian<const N: usize, const K: usize>(
    g: impl Fn(&SVector<f64, N>) -> SVector<f64, K>,
    x: &SVector<f64, N>,
) -> SMatrix<f64, K, N> {
    let mut jac = SMatrix::<f64, K, N>::zeros();
    for i in 0..N {
        let h = 1e-6 * x[i].abs().max(1.0);
        let mut xp = *x;
        let mut xm = *x;
        xp[i] += h;
        xm[i] -= h;
        let span = xp[i] - xm[i];
        jac.set_column(i, &((g(&xp) - g(&xm)) / span));
    }
    jac
}

fn symmetrize<const N: usize>(p: SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

fn invert_checked<const M: usize>(s: &SMatrix<f64, M, M>) -> Result<SMatrix<f64, M, M>> {
    let sv = DMatrix::from_column_slice(M, M, s.as_slice()).singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition.is_finite() && condition <= MAX_CONDITION) {
        return Err(Error::SingularInnovation { condition });
    }
    s.try_inverse().ok_or(Error::SingularInnovation { condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix1, Matrix2, Vector1, Vector2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Scalar = EkfInstance<1, 1>;

    fn identity(x: &Vector1<f64>, _: &()) -> Vector1<f64> {
        *x
    }

    fn observe(x: &Vector1<f64>) -> Vector1<f64> {
        *x
    }

    #[test]
    fn matches_scalar_kalman_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (q, r) = (0.3, 0.7);
        let mut ekf = Scalar::new(Vector1::new(2.0), Matrix1::new(5.0), Matrix1::new(q), Matrix1::new(r), 0.01).unwrap();
        let (mut x, mut p) = (2.0, 5.0);
        for _ in 0..50 {
            let y: f64 = rng.random_range(-10.0..10.0);
            ekf = ekf_step(&ekf, identity, observe, &(), &Vector1::new(y)).unwrap();
            // textbook scalar recursion
            let p_pred = p + q;
            let k = p_pred / (p_pred + r);
            x += k * (y - x);
            p = (1.0 - k) * p_pred * (1.0 - k) + k * r * k;
            assert!((ekf.x[0] - x).abs() <= 1e-12 * x.abs().max(1.0));
            assert!((ekf.p[(0, 0)] - p).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn uninformative_measurement_leaves_prior() {
        let ekf = Scalar::new(Vector1::new(3.0), Matrix1::new(2.0), Matrix1::new(0.0), Matrix1::new(1e12), 0.01).unwrap();
        let next = ekf_step(&ekf, identity, observe, &(), &Vector1::new(100.0)).unwrap();
        assert!(((next.x[0] - 3.0) / 3.0).abs() < 1e-6);
        assert!(((next.p[(0, 0)] - 2.0) / 2.0).abs() < 1e-6);
    }

    #[test]
    fn exact_measurements_never_increase_error() {
        let truth = Vector2::new(1.5, -0.5);
        let h = |x: &Vector2<f64>| Vector1::new(x[0] + 2.0 * x[1]);
        let f = |x: &Vector2<f64>, _: &()| *x;
        let mut ekf = EkfInstance::<2, 1>::new(
            Vector2::new(0.0, 0.0),
            Matrix2::identity() * 4.0,
            Matrix2::zeros(),
            Matrix1::new(1e-3),
            0.01,
        )
        .unwrap();
        let y = h(&truth);
        let mut err = (ekf.x - truth).norm();
        for _ in 0..100 {
            ekf = ekf_step(&ekf, f, h, &(), &y).unwrap();
            let e = (ekf.x - truth).norm();
            assert!(e <= err + 1e-12);
            err = e;
        }
    }

    #[test]
    fn singular_innovation_reported() {
        let ekf = Scalar::new(Vector1::new(1.0), Matrix1::new(0.0), Matrix1::new(0.0), Matrix1::new(0.0), 0.01).unwrap();
        let err = ekf_step(&ekf, identity, observe, &(), &Vector1::new(1.0)).unwrap_err();
        assert!(matches!(err, Error::SingularInnovation { .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn non_finite_state_reported() {
        let ekf = Scalar::new(Vector1::new(1.0), Matrix1::new(1.0), Matrix1::new(0.0), Matrix1::new(1.0), 0.01).unwrap();
        let blow_up = |x: &Vector1<f64>, _: &()| x * f64::MAX * 10.0;
        let err = ekf_step(&ekf, blow_up, observe, &(), &Vector1::new(1.0)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState));
    }

    #[test]
    fn rejects_malformed_inputs() {
        assert!(Scalar::new(Vector1::new(1.0), Matrix1::new(1.0), Matrix1::new(0.0), Matrix1::new(1.0), 0.0).is_err());
        let asym = Matrix2::new(1.0, 0.5, 0.0, 1.0);
        assert!(EkfInstance::<2, 1>::new(Vector2::zeros(), asym, Matrix2::zeros(), Matrix1::new(1.0), 0.01).is_err());
        let ekf = Scalar::new(Vector1::new(1.0), Matrix1::new(1.0), Matrix1::new(0.0), Matrix1::new(1.0), 0.01).unwrap();
        assert!(ekf.update(observe, &Vector1::new(f64::NAN)).is_err());
    }

    #[test]
    fn jacobian_of_affine_map_is_exact() {
        let a = Matrix2::new(0.3, -1.7, 2.5, 1e3);
        let g = |x: &Vector2<f64>| a * x + Vector2::new(1.0, -2.0);
        let j = jacobian(g, &Vector2::new(123.456, -0.001));
        assert!((j - a).abs().max() < 1e-6 * a.abs().max());
    }
}
