//! Scalar Gaussian primitives with stable tail behaviour.
//!
//! The probit site updates need the ratio N(z|0,1)/Psi(z) (the inverse Mills
//! ratio) and log Psi(z) far into the left tail, where the naive quotient
//! underflows. Below `TAIL_SWITCH` both are evaluated through the Gauss
//! continued fraction for the Mills ratio, which never underflows and is
//! accurate to machine precision for large |z|.

use statrs::function::erf::erfc;

const SQRT_2PI: f64 = 2.5066282746310002;
const TAIL_SWITCH: f64 = -6.0;

/// Standard normal density N(z|0,1).
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// log N(z|0,1).
#[inline]
pub fn log_normal_pdf(z: f64) -> f64 {
    -0.5 * z * z - SQRT_2PI.ln()
}

/// Standard normal CDF Psi(z) via the complementary error function.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Mills ratio Psi(-x)/N(x|0,1) for x > 0, by the Gauss continued fraction
/// 1/(x + 1/(x + 2/(x + 3/(x + ...)))) evaluated with modified Lentz.
fn mills_ratio_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x.max(tiny);
    let mut c = f;
    let mut d = 0.0;
    for n in 1..200u32 {
        let a = f64::from(n);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Inverse Mills ratio N(z|0,1)/Psi(z), stable for arbitrarily negative z.
pub fn inverse_mills(z: f64) -> f64 {
    if z < TAIL_SWITCH {
        1.0 / mills_ratio_cf(-z)
    } else {
        normal_pdf(z) / normal_cdf(z)
    }
}

/// log Psi(z), stable for arbitrarily negative z.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z < TAIL_SWITCH {
        log_normal_pdf(z) - inverse_mills(z).ln()
    } else {
        normal_cdf(z).ln()
    }
}

/// log N(y | mean, var).
#[inline]
pub fn log_gaussian_density(y: f64, mean: f64, var: f64) -> f64 {
    let r = y - mean;
    -0.5 * (var.ln() + r * r / var) - 0.5 * (2.0 * std::f64::consts::PI).ln()
}
