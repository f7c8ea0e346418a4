//! The sparse posterior process parameterized by (alpha, beta) over a fixed
//! blurred basis.
//!
//! Mean function: m(x) = Ktilde(x, B) alpha.
//! Covariance:    V(x, x') = K(x, x') - Ktilde(x, B) beta Ktilde(B, x').
//!
//! alpha = beta = 0 is the GP prior. The blurred Gram Khat and its Cholesky
//! factor are computed once per basis and shared immutably by inference and
//! prediction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SaspaError};
use crate::kernel::{
    blurred_cross_kernel, blurred_gram, default_jitter, factorize_gram, kernel_eval, Basis,
    GramFactor,
};

/// Negative variances with magnitude at or below this are round-off and clamp
/// to zero; anything larger signals EP instability.
const VARIANCE_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SparsePosterior {
    basis: Basis,
    alpha: DVector<f64>,
    beta: DMatrix<f64>,
    khat: DMatrix<f64>,
    khat_factor: GramFactor,
}

/// Posterior mean and covariance of the blurred basis functionals g_B(f).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl SparsePosterior {
    /// The prior state (alpha = 0, beta = 0) over the given basis. `jitter`
    /// is the starting factorization jitter; `None` uses 1e-8 trace / M.
    pub fn prior(basis: Basis, jitter: Option<f64>) -> Result<Self> {
        let khat = blurred_gram(&basis);
        let jitter = jitter.unwrap_or_else(|| default_jitter(&khat));
        let khat_factor = factorize_gram(&khat, jitter)?;
        let m = basis.len();
        Ok(Self {
            basis,
            alpha: DVector::zeros(m),
            beta: DMatrix::zeros(m, m),
            khat,
            khat_factor,
        })
    }

    /// A posterior with explicit parameters, e.g. loaded from disk.
    pub fn with_params(
        basis: Basis,
        alpha: DVector<f64>,
        beta: DMatrix<f64>,
        jitter: Option<f64>,
    ) -> Result<Self> {
        let m = basis.len();
        if alpha.len() != m || beta.nrows() != m || beta.ncols() != m {
            return Err(SaspaError::DimensionMismatch {
                expected: m,
                got: alpha.len().max(beta.nrows()),
            });
        }
        let mut post = Self::prior(basis, jitter)?;
        post.alpha = alpha;
        post.beta = beta;
        Ok(post)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    pub fn khat(&self) -> &DMatrix<f64> {
        &self.khat
    }

    pub fn khat_factor(&self) -> &GramFactor {
        &self.khat_factor
    }

    pub(crate) fn set_params(&mut self, alpha: DVector<f64>, beta: DMatrix<f64>) {
        self.alpha = alpha;
        self.beta = beta;
    }

    /// m(x) = Ktilde(x, B) alpha.
    pub fn predict_mean(&self, x: &DVector<f64>) -> Result<f64> {
        let kt = blurred_cross_kernel(x, &self.basis)?;
        Ok(kt.dot(&self.alpha))
    }

    /// V(x, x') = K(x, x') - Ktilde(x, B) beta Ktilde(B, x').
    pub fn predict_cov(&self, x: &DVector<f64>, x2: &DVector<f64>) -> Result<f64> {
        let kt = blurred_cross_kernel(x, &self.basis)?;
        let kt2 = blurred_cross_kernel(x2, &self.basis)?;
        let k = kernel_eval(x, x2, self.basis.kernel())?;
        Ok(k - kt.dot(&(&self.beta * &kt2)))
    }

    /// Predictive variance at x, clamping round-off negatives to zero and
    /// flagging anything more negative as instability.
    pub fn predict_var(&self, x: &DVector<f64>) -> Result<f64> {
        let v = self.predict_cov(x, x)?;
        if v >= 0.0 {
            Ok(v)
        } else if v >= -VARIANCE_CLAMP {
            Ok(0.0)
        } else {
            Err(SaspaError::NegativeVariance { var: v })
        }
    }

    /// Mean and variance of the latent marginal at x in one call.
    pub fn predict(&self, x: &DVector<f64>) -> Result<(f64, f64)> {
        Ok((self.predict_mean(x)?, self.predict_var(x)?))
    }

    /// Basis-grounded moments: mean = Khat alpha, cov = Khat - Khat beta Khat.
    pub fn basis_moments(&self) -> BasisMoments {
        let mean = &self.khat * &self.alpha;
        let cov = &self.khat - &self.khat * &self.beta * &self.khat;
        BasisMoments { mean, cov }
    }

    /// p = Khat^{-1} Ktilde(B, x) via the cached factorization.
    pub fn projected_weight(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let kt = blurred_cross_kernel(x, &self.basis)?;
        Ok(self.khat_factor.solve_vec(&kt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{BlurredBasisPoint, KernelParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn toy_basis(centers: &[&[f64]], eta: f64) -> Basis {
        Basis::new(
            centers
                .iter()
                .map(|c| BlurredBasisPoint::delta(v(c)))
                .collect(),
            KernelParams::new(eta).unwrap(),
        )
        .unwrap()
    }

    fn random_posterior(seed: u64) -> SparsePosterior {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = toy_basis(&[&[0.0, 0.0], &[1.5, 0.2], &[-0.8, 1.1], &[0.5, -1.3]], 0.9);
        let m = basis.len();
        let alpha = DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let w = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-0.4..0.4));
        let beta = &w * w.transpose(); // symmetric PSD
        SparsePosterior::with_params(basis, alpha, beta, None).unwrap()
    }

    #[test]
    fn prior_predicts_zero_mean_unit_variance() {
        let basis = toy_basis(&[&[0.0], &[2.0]], 1.0);
        let post = SparsePosterior::prior(basis, None).unwrap();
        for x in [-1.0, 0.0, 0.7, 3.0] {
            let x = v(&[x]);
            assert_eq!(post.predict_mean(&x).unwrap(), 0.0);
            assert_eq!(post.predict_cov(&x, &x).unwrap(), 1.0);
        }
    }

    #[test]
    fn prior_cov_is_kernel() {
        let basis = toy_basis(&[&[0.0], &[2.0]], 0.8);
        let post = SparsePosterior::prior(basis, None).unwrap();
        let (a, b) = (v(&[0.3]), v(&[-0.9]));
        let want = kernel_eval(&a, &b, post.basis().kernel()).unwrap();
        assert_eq!(post.predict_cov(&a, &b).unwrap(), want);
    }

    #[test]
    fn single_point_mean_is_scaled_kernel() {
        let basis = toy_basis(&[&[0.5]], 1.0);
        let post =
            SparsePosterior::with_params(basis, v(&[2.0]), DMatrix::zeros(1, 1), None).unwrap();
        for x in [-1.0, 0.0, 0.5, 2.0] {
            let x = v(&[x]);
            let want = 2.0 * kernel_eval(&x, &v(&[0.5]), post.basis().kernel()).unwrap();
            assert_relative_eq!(post.predict_mean(&x).unwrap(), want, max_relative = 1e-15);
        }
    }

    #[test]
    fn prior_basis_moments_are_zero_and_khat() {
        let basis = toy_basis(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 0.5]], 1.2);
        let post = SparsePosterior::prior(basis, None).unwrap();
        let bm = post.basis_moments();
        assert_eq!(bm.mean, DVector::zeros(3));
        assert_eq!(bm.cov, *post.khat());
    }

    #[test]
    fn basis_moment_cov_is_symmetric() {
        let post = random_posterior(3);
        let bm = post.basis_moments();
        let asym = (&bm.cov - bm.cov.transpose()).amax();
        assert!(asym <= 1e-12, "asymmetry {asym:.3e}");
    }

    #[test]
    fn projected_weight_solves_khat() {
        let post = random_posterior(7);
        let x = v(&[0.25, 0.5]);
        let p = post.projected_weight(&x).unwrap();
        let kt = blurred_cross_kernel(&x, post.basis()).unwrap();
        let resid = (post.khat() * &p - &kt).norm();
        assert!(resid <= 1e-8 * kt.norm());
    }

    #[test]
    fn projected_weight_single_point_is_scalar_solve() {
        let basis = toy_basis(&[&[0.0]], 1.0);
        let post = SparsePosterior::prior(basis, Some(0.0)).unwrap();
        let x = v(&[0.4]);
        let kt = blurred_cross_kernel(&x, post.basis()).unwrap();
        let p = post.projected_weight(&x).unwrap();
        assert_relative_eq!(p[0], kt[0] / post.khat()[(0, 0)], max_relative = 1e-14);
    }

    #[test]
    fn variance_clamp_distinguishes_roundoff_from_instability() {
        let basis = toy_basis(&[&[0.0]], 1.0);
        // beta slightly above 1 at the basis center drives V(a, a) barely negative
        let post = SparsePosterior::with_params(
            basis.clone(),
            v(&[0.0]),
            DMatrix::from_element(1, 1, 1.0 + 5e-11),
            None,
        )
        .unwrap();
        assert_eq!(post.predict_var(&v(&[0.0])).unwrap(), 0.0);
        let bad = SparsePosterior::with_params(
            basis,
            v(&[0.0]),
            DMatrix::from_element(1, 1, 1.01),
            None,
        )
        .unwrap();
        assert!(matches!(
            bad.predict_var(&v(&[0.0])),
            Err(SaspaError::NegativeVariance { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let post = random_posterior(1);
        assert!(post.predict_mean(&v(&[1.0])).is_err());
    }

    proptest! {
        #[test]
        fn predict_cov_is_symmetric_in_arguments(
            ax in -2.0..2.0f64, ay in -2.0..2.0f64,
            bx in -2.0..2.0f64, by in -2.0..2.0f64,
            seed in 0u64..20,
        ) {
            let post = random_posterior(seed);
            let (a, b) = (v(&[ax, ay]), v(&[bx, by]));
            let ab = post.predict_cov(&a, &b).unwrap();
            let ba = post.predict_cov(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * 1.0_f64.max(ab.abs()));
        }
    }
}
