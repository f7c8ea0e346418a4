//! Site likelihoods: the normalizer Z of a Gaussian-cavity marginal times the
//! observation model, with its first and second derivatives in the cavity
//! mean. These derivatives are all the EP projection step needs.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SaspaError};
use crate::stats::{inverse_mills, log_gaussian_density, log_normal_cdf, normal_cdf};

/// log Z and derivatives of log Z with respect to the cavity mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteDerivatives {
    pub log_z: f64,
    pub dlogz_dm: f64,
    pub d2logz_dm2: f64,
}

/// Gaussian observation noise for regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionLik {
    noise_variance: f64,
}

impl RegressionLik {
    pub fn new(noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(SaspaError::InvalidParameter(format!(
                "observation noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(Self { noise_variance })
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }
}

/// Step-function classification with labeling error:
/// p(y|f) = eps + (1 - 2 eps) * step(f y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationLik {
    epsilon: f64,
}

impl ClassificationLik {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(SaspaError::InvalidParameter(format!(
                "labeling error must lie in [0, 0.5), got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// Z = N(y | m, v_y + v): Gaussian convolution, exact.
pub fn site_derivs_regression(
    m: f64,
    v: f64,
    y: f64,
    lik: &RegressionLik,
) -> Result<SiteDerivatives> {
    let total = lik.noise_variance + v;
    if total <= 0.0 {
        return Err(SaspaError::DegenerateSite { var: total });
    }
    Ok(SiteDerivatives {
        log_z: log_gaussian_density(y, m, total),
        dlogz_dm: (y - m) / total,
        d2logz_dm2: -1.0 / total,
    })
}

/// Z = eps + (1 - 2 eps) Psi(z) with z = m y / sqrt(v).
///
/// For eps = 0 and very negative z, log Z and gamma are evaluated through the
/// stable log-CDF / inverse-Mills routes instead of the raw quotient.
pub fn site_derivs_classification(
    m: f64,
    v: f64,
    y: f64,
    lik: &ClassificationLik,
) -> Result<SiteDerivatives> {
    if y != 1.0 && y != -1.0 {
        return Err(SaspaError::InvalidParameter(format!(
            "classification label must be +1 or -1, got {y}"
        )));
    }
    if !(v > 0.0) {
        return Err(SaspaError::DegenerateSite { var: v });
    }
    let eps = lik.epsilon;
    let sqrt_v = v.sqrt();
    let z = m * y / sqrt_v;
    let (log_z, gamma) = if eps == 0.0 {
        // Z = Psi(z); gamma = N(z|0,1) / (Psi(z) sqrt(v)).
        (log_normal_cdf(z), inverse_mills(z) / sqrt_v)
    } else {
        let psi = normal_cdf(z);
        let z_val = eps + (1.0 - 2.0 * eps) * psi;
        let gamma = (1.0 - 2.0 * eps) * crate::stats::normal_pdf(z) / (z_val * sqrt_v);
        (z_val.ln(), gamma)
    };
    Ok(SiteDerivatives {
        log_z,
        dlogz_dm: gamma * y,
        d2logz_dm2: -gamma * (m * y + v * gamma) / v,
    })
}

/// Predictive probability of y = +1 when the latent marginal is N(m, v):
/// eps + (1 - 2 eps) Psi(m / sqrt(v)), with a tiny floor guarding v = 0.
pub fn predictive_class_prob(m: f64, v: f64, lik: &ClassificationLik) -> f64 {
    let eps = lik.epsilon;
    eps + (1.0 - 2.0 * eps) * normal_cdf(m / (v + 1e-12).sqrt())
}

/// Observation model, either task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Likelihood {
    Regression(RegressionLik),
    Classification(ClassificationLik),
}

impl Likelihood {
    pub fn site_derivs(&self, m: f64, v: f64, y: f64) -> Result<SiteDerivatives> {
        match self {
            Likelihood::Regression(l) => site_derivs_regression(m, v, y, l),
            Likelihood::Classification(l) => site_derivs_classification(m, v, y, l),
        }
    }
}
