//! Gaussian kernel and its blurred variants.
//!
//! The base kernel is k(x, x') = exp(-||x - x'||^2 / (2 eta^2)). Each basis
//! point carries a Gaussian blur N(x | a_j, c_j); convolving the kernel once
//! (against a query point) and twice (between two basis points) stays closed
//! form:
//!
//!   Ktilde(x, b_j) = eta^d |c_j + eta^2 I|^{-1/2} exp(-q/2) * |eta^2 I|^... ,
//!
//! written here as (2 pi eta^2)^{d/2} N(x | a_j, c_j + eta^2 I), and
//!
//!   Khat_ij = (2 pi eta^2)^{d/2} N(a_i | a_j, c_i + c_j + eta^2 I).
//!
//! Zero blur collapses both to plain kernel evaluations, which this module
//! special-cases so the delta reduction is bit-exact. The closed forms are
//! validated against grid quadrature of the defining integrals in
//! [`quadrature`].

pub mod quadrature;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, SaspaError};

/// Gaussian kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    eta: f64,
}

impl KernelParams {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(SaspaError::InvalidParameter(format!(
                "kernel length scale eta must be positive and finite, got {eta}"
            )));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Evaluate k(x, x') = exp(-||x - x'||^2 / (2 eta^2)).
pub fn kernel_eval(x: &DVector<f64>, x2: &DVector<f64>, params: &KernelParams) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(SaspaError::DimensionMismatch {
            expected: x.len(),
            got: x2.len(),
        });
    }
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(x2.iter()) {
        let d = a - b;
        sq += d * d;
    }
    Ok((-sq / (2.0 * params.eta * params.eta)).exp())
}

/// A pseudo-input blurred by a local Gaussian: center a_j plus covariance c_j.
/// A zero covariance is the delta (no-blur) case.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurredBasisPoint {
    center: DVector<f64>,
    local_cov: DMatrix<f64>,
}

impl BlurredBasisPoint {
    /// Validates symmetry and positive semi-definiteness of the local covariance.
    pub fn new(center: DVector<f64>, local_cov: DMatrix<f64>) -> Result<Self> {
        let d = center.len();
        if local_cov.nrows() != d || local_cov.ncols() != d {
            return Err(SaspaError::DimensionMismatch {
                expected: d,
                got: local_cov.nrows().max(local_cov.ncols()),
            });
        }
        let scale = 1.0_f64.max(local_cov.amax());
        for i in 0..d {
            for j in (i + 1)..d {
                if (local_cov[(i, j)] - local_cov[(j, i)]).abs() > 1e-10 * scale {
                    return Err(SaspaError::NotPsd(format!(
                        "local covariance is asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if !local_cov.iter().all(|v| v.is_finite()) || !center.iter().all(|v| v.is_finite()) {
            return Err(SaspaError::InvalidParameter(
                "basis point contains nonfinite values".into(),
            ));
        }
        let eig = local_cov.clone().symmetric_eigenvalues();
        let max_eig = eig.iter().cloned().fold(0.0_f64, f64::max);
        if eig.iter().any(|&l| l < -1e-10 * 1.0_f64.max(max_eig)) {
            return Err(SaspaError::NotPsd(format!(
                "local covariance has negative eigenvalue {:.3e}",
                eig.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(Self { center, local_cov })
    }

    /// Delta blur: a plain pseudo-input with zero local covariance.
    pub fn delta(center: DVector<f64>) -> Self {
        let d = center.len();
        Self {
            center,
            local_cov: DMatrix::zeros(d, d),
        }
    }

    /// Sphere blur: local covariance s * I with s >= 0.
    pub fn sphere(center: DVector<f64>, s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(SaspaError::InvalidParameter(format!(
                "sphere blur scale must be nonnegative, got {s}"
            )));
        }
        let d = center.len();
        Ok(Self {
            center,
            local_cov: DMatrix::identity(d, d) * s,
        })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn local_cov(&self) -> &DMatrix<f64> {
        &self.local_cov
    }

    fn is_delta(&self) -> bool {
        self.local_cov.iter().all(|&v| v == 0.0)
    }
}

/// Per-point cached factorization of c_j + eta^2 I used by the blurred
/// cross-kernel; `None` marks a delta point evaluated through `kernel_eval`.
#[derive(Debug, Clone)]
struct BlurCache {
    chol: Option<Cholesky<f64, Dyn>>,
    half_logdet: f64,
}

/// M blurred pseudo-inputs sharing one kernel.
#[derive(Debug, Clone)]
pub struct Basis {
    points: Vec<BlurredBasisPoint>,
    kernel: KernelParams,
    dim: usize,
    cache: Vec<BlurCache>,
}

impl Basis {
    pub fn new(points: Vec<BlurredBasisPoint>, kernel: KernelParams) -> Result<Self> {
        if points.is_empty() {
            return Err(SaspaError::InvalidParameter(
                "a basis needs at least one point".into(),
            ));
        }
        let dim = points[0].center.len();
        for p in &points {
            if p.center.len() != dim {
                return Err(SaspaError::DimensionMismatch {
                    expected: dim,
                    got: p.center.len(),
                });
            }
        }
        let eta2 = kernel.eta * kernel.eta;
        let mut cache = Vec::with_capacity(points.len());
        for p in &points {
            if p.is_delta() {
                cache.push(BlurCache {
                    chol: None,
                    half_logdet: 0.0,
                });
            } else {
                let mut s = p.local_cov.clone();
                for i in 0..dim {
                    s[(i, i)] += eta2;
                }
                let chol = Cholesky::new(s).ok_or_else(|| {
                    SaspaError::NotPsd("local covariance plus eta^2 I not factorizable".into())
                })?;
                let half_logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
                cache.push(BlurCache {
                    chol: Some(chol),
                    half_logdet,
                });
            }
        }
        Ok(Self {
            points,
            kernel,
            dim,
            cache,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn points(&self) -> &[BlurredBasisPoint] {
        &self.points
    }

    /// One entry of Ktilde(x, B): (2 pi eta^2)^{d/2} N(x | a_j, c_j + eta^2 I).
    fn cross_entry(&self, x: &DVector<f64>, j: usize) -> f64 {
        let p = &self.points[j];
        match &self.cache[j].chol {
            // Delta blur collapses to the plain kernel, kept exact.
            None => {
                let mut sq = 0.0;
                for (a, b) in x.iter().zip(p.center.iter()) {
                    let d = a - b;
                    sq += d * d;
                }
                (-sq / (2.0 * self.kernel.eta * self.kernel.eta)).exp()
            }
            Some(chol) => {
                let diff = x - &p.center;
                let sol = chol.solve(&diff);
                let q = diff.dot(&sol);
                let d = self.dim as f64;
                (d * self.kernel.eta.ln() - self.cache[j].half_logdet - 0.5 * q).exp()
            }
        }
    }
}

/// Ktilde(x, B): the once-blurred cross kernel row against every basis point.
pub fn blurred_cross_kernel(x: &DVector<f64>, basis: &Basis) -> Result<DVector<f64>> {
    if x.len() != basis.dim {
        return Err(SaspaError::DimensionMismatch {
            expected: basis.dim,
            got: x.len(),
        });
    }
    let mut out = DVector::zeros(basis.len());
    for j in 0..basis.len() {
        out[j] = basis.cross_entry(x, j);
    }
    Ok(out)
}

/// Khat: the twice-blurred Gram matrix, symmetric by construction.
pub fn blurred_gram(basis: &Basis) -> DMatrix<f64> {
    let m = basis.len();
    let eta = basis.kernel.eta;
    let eta2 = eta * eta;
    let d = basis.dim;
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let pi = &basis.points[i];
            let pj = &basis.points[j];
            let v = if pi.is_delta() && pj.is_delta() {
                let mut sq = 0.0;
                for (a, b) in pi.center.iter().zip(pj.center.iter()) {
                    let dd = a - b;
                    sq += dd * dd;
                }
                (-sq / (2.0 * eta2)).exp()
            } else {
                let mut t = &pi.local_cov + &pj.local_cov;
                for k in 0..d {
                    t[(k, k)] += eta2;
                }
                let chol = Cholesky::new(t)
                    .expect("c_i + c_j + eta^2 I is positive definite for PSD local covariances");
                let half_logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum();
                let diff = &pi.center - &pj.center;
                let sol = chol.solve(&diff);
                let q = diff.dot(&sol);
                ((d as f64) * eta.ln() - half_logdet - 0.5 * q).exp()
            };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Cholesky factor of Khat + jitter * I together with the jitter that was
/// actually applied.
#[derive(Debug, Clone)]
pub struct GramFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl GramFactor {
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }
}

/// Default starting jitter: 1e-8 * trace(Khat) / M.
pub fn default_jitter(khat: &DMatrix<f64>) -> f64 {
    1e-8 * khat.trace() / khat.nrows() as f64
}

/// Factor khat + jitter * I.
///
/// With jitter > 0 the jitter escalates by factors of 10 up to
/// 1e-2 * trace / M before giving up; jitter = 0 is a single strict attempt
/// (so rank-deficient inputs fail instead of being silently regularized).
pub fn factorize_gram(khat: &DMatrix<f64>, jitter: f64) -> Result<GramFactor> {
    if khat.nrows() != khat.ncols() {
        return Err(SaspaError::DimensionMismatch {
            expected: khat.nrows(),
            got: khat.ncols(),
        });
    }
    if !(jitter >= 0.0) {
        return Err(SaspaError::InvalidParameter(format!(
            "jitter must be nonnegative, got {jitter}"
        )));
    }
    let m = khat.nrows();
    let cap = 1e-2 * khat.trace() / m as f64;
    let mut current = jitter;
    loop {
        let mut shifted = khat.clone();
        for i in 0..m {
            shifted[(i, i)] += current;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            return Ok(GramFactor {
                chol,
                jitter: current,
            });
        }
        if current == 0.0 || current >= cap {
            return Err(SaspaError::FactorizationFailed {
                final_jitter: current,
            });
        }
        current = (current * 10.0).min(cap);
    }
}
