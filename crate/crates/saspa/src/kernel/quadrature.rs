//! Grid-quadrature oracle for the blurred kernel closed forms.
//!
//! Integrates the defining integrals of Ktilde and Khat directly on a
//! truncated uniform grid, without going through the Gaussian convolution
//! identities, so agreement with `blurred_cross_kernel` / `blurred_gram`
//! validates those closed forms. Desk-scale only: d <= 2, and the Khat
//! integral in d = 2 is a full 4-dimensional grid sum.
//!
//! The trapezoid rule is spectrally accurate here because every integrand is
//! a product of Gaussians whose derivatives vanish at the truncation
//! boundary; accuracy is limited by the tail cut (8 sigma by default) rather
//! than by h^2 terms.

use nalgebra::{DMatrix, DVector};

use super::{kernel_eval, BlurredBasisPoint, KernelParams};
use crate::error::{Result, SaspaError};

/// Truncated-grid description: half width in units of the blur standard
/// deviation per axis, and grid points per dimension.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub half_width_sigmas: f64,
    pub points_per_dim: usize,
    /// Re-integrate on a halved step and fail if the two results disagree.
    pub refine_check: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            half_width_sigmas: 8.0,
            points_per_dim: 4001,
            refine_check: true,
        }
    }
}

const REFINE_TOL: f64 = 1e-7;

fn too_coarse(a: f64, b: f64) -> bool {
    (a - b).abs() > REFINE_TOL * 1.0_f64.max(b.abs())
}

/// 1-D Gaussian density.
fn gauss1(t: f64, mean: f64, var: f64) -> f64 {
    let d = t - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// 2-D Gaussian density with explicit 2x2 inversion.
fn gauss2(dx: f64, dy: f64, cov: &DMatrix<f64>) -> f64 {
    let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
    let q = (dx * dx * cov[(1, 1)] - 2.0 * dx * dy * cov[(0, 1)] + dy * dy * cov[(0, 0)]) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

fn kernel1(dx: f64, eta: f64) -> f64 {
    (-dx * dx / (2.0 * eta * eta)).exp()
}

fn kernel2(dx: f64, dy: f64, eta: f64) -> f64 {
    (-(dx * dx + dy * dy) / (2.0 * eta * eta)).exp()
}

/// Uniform nodes and trapezoid weights on [center - hw, center + hw].
fn axis(center: f64, hw: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * hw / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|i| center - hw + h * i as f64).collect();
    let mut weights = vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;
    (nodes, weights)
}

fn check_point(point: &BlurredBasisPoint) -> Result<()> {
    let d = point.center().len();
    if d > 2 {
        return Err(SaspaError::InvalidParameter(format!(
            "quadrature oracle supports d <= 2, got {d}"
        )));
    }
    // Partially degenerate blurs (zero variance along one axis only) are out
    // of the oracle's scope; delta blurs collapse analytically instead.
    if !point.local_cov().iter().all(|&v| v == 0.0) {
        for i in 0..d {
            if point.local_cov()[(i, i)] <= 0.0 {
                return Err(SaspaError::InvalidParameter(
                    "quadrature oracle needs a strictly positive blur variance per axis".into(),
                ));
            }
        }
    }
    Ok(())
}

fn is_delta(point: &BlurredBasisPoint) -> bool {
    point.local_cov().iter().all(|&v| v == 0.0)
}

/// Quadrature of Ktilde(x, b) = integral of K(x, x') phi(x'|b) dx'.
pub fn cross_kernel_oracle(
    x: &DVector<f64>,
    point: &BlurredBasisPoint,
    params: &KernelParams,
    grid: &GridSpec,
) -> Result<f64> {
    check_point(point)?;
    if x.len() != point.center().len() {
        return Err(SaspaError::DimensionMismatch {
            expected: point.center().len(),
            got: x.len(),
        });
    }
    if is_delta(point) {
        // phi collapses to a point mass at the center.
        return kernel_eval(x, point.center(), params);
    }
    let coarse = cross_quad(x, point, params, grid.half_width_sigmas, grid.points_per_dim);
    if grid.refine_check {
        let fine = cross_quad(
            x,
            point,
            params,
            grid.half_width_sigmas,
            2 * grid.points_per_dim - 1,
        );
        if too_coarse(coarse, fine) {
            return Err(SaspaError::InvalidParameter(format!(
                "quadrature grid too coarse: {coarse:.12e} vs refined {fine:.12e}"
            )));
        }
        return Ok(fine);
    }
    Ok(coarse)
}

fn cross_quad(
    x: &DVector<f64>,
    point: &BlurredBasisPoint,
    params: &KernelParams,
    hw_sigmas: f64,
    n: usize,
) -> f64 {
    let eta = params.eta();
    let c = point.local_cov();
    let a = point.center();
    match a.len() {
        1 => {
            let (nodes, w) = axis(a[0], hw_sigmas * c[(0, 0)].sqrt(), n);
            let mut acc = 0.0;
            for (t, wt) in nodes.iter().zip(&w) {
                acc += wt * kernel1(x[0] - t, eta) * gauss1(*t, a[0], c[(0, 0)]);
            }
            acc
        }
        2 => {
            let (nx, wx) = axis(a[0], hw_sigmas * c[(0, 0)].sqrt(), n);
            let (ny, wy) = axis(a[1], hw_sigmas * c[(1, 1)].sqrt(), n);
            let mut acc = 0.0;
            for (tx, wtx) in nx.iter().zip(&wx) {
                let mut inner = 0.0;
                for (ty, wty) in ny.iter().zip(&wy) {
                    inner += wty
                        * kernel2(x[0] - tx, x[1] - ty, eta)
                        * gauss2(tx - a[0], ty - a[1], c);
                }
                acc += wtx * inner;
            }
            acc
        }
        _ => unreachable!("dimension checked above"),
    }
}

/// Quadrature of Khat_ij = double integral of phi(x|b_i) K(x, x') phi(x'|b_j).
pub fn gram_entry_oracle(
    pi: &BlurredBasisPoint,
    pj: &BlurredBasisPoint,
    params: &KernelParams,
    grid: &GridSpec,
) -> Result<f64> {
    check_point(pi)?;
    check_point(pj)?;
    if pi.center().len() != pj.center().len() {
        return Err(SaspaError::DimensionMismatch {
            expected: pi.center().len(),
            got: pj.center().len(),
        });
    }
    // Delta factors collapse one (or both) of the outer integrals.
    match (is_delta(pi), is_delta(pj)) {
        (true, true) => return kernel_eval(pi.center(), pj.center(), params),
        (true, false) => return cross_kernel_oracle(pi.center(), pj, params, grid),
        (false, true) => return cross_kernel_oracle(pj.center(), pi, params, grid),
        (false, false) => {}
    }
    let coarse = gram_quad(pi, pj, params, grid.half_width_sigmas, grid.points_per_dim);
    if grid.refine_check {
        let fine = gram_quad(
            pi,
            pj,
            params,
            grid.half_width_sigmas,
            2 * grid.points_per_dim - 1,
        );
        if too_coarse(coarse, fine) {
            return Err(SaspaError::InvalidParameter(format!(
                "quadrature grid too coarse: {coarse:.12e} vs refined {fine:.12e}"
            )));
        }
        return Ok(fine);
    }
    Ok(coarse)
}

fn gram_quad(
    pi: &BlurredBasisPoint,
    pj: &BlurredBasisPoint,
    params: &KernelParams,
    hw_sigmas: f64,
    n: usize,
) -> f64 {
    let eta = params.eta();
    let (ai, ci) = (pi.center(), pi.local_cov());
    let (aj, cj) = (pj.center(), pj.local_cov());
    match ai.len() {
        1 => {
            let (nx, wx) = axis(ai[0], hw_sigmas * ci[(0, 0)].sqrt(), n);
            let (ny, wy) = axis(aj[0], hw_sigmas * cj[(0, 0)].sqrt(), n);
            let mut acc = 0.0;
            for (x, wtx) in nx.iter().zip(&wx) {
                let px = gauss1(*x, ai[0], ci[(0, 0)]);
                let mut inner = 0.0;
                for (y, wty) in ny.iter().zip(&wy) {
                    inner += wty * kernel1(x - y, eta) * gauss1(*y, aj[0], cj[(0, 0)]);
                }
                acc += wtx * px * inner;
            }
            acc
        }
        2 => {
            let (n1, w1) = axis(ai[0], hw_sigmas * ci[(0, 0)].sqrt(), n);
            let (n2, w2) = axis(ai[1], hw_sigmas * ci[(1, 1)].sqrt(), n);
            let (n3, w3) = axis(aj[0], hw_sigmas * cj[(0, 0)].sqrt(), n);
            let (n4, w4) = axis(aj[1], hw_sigmas * cj[(1, 1)].sqrt(), n);
            let mut acc = 0.0;
            for (x1, wa) in n1.iter().zip(&w1) {
                for (x2, wb) in n2.iter().zip(&w2) {
                    let pi_val = wa * wb * gauss2(x1 - ai[0], x2 - ai[1], ci);
                    if pi_val == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for (y1, wc) in n3.iter().zip(&w3) {
                        let dx = x1 - y1;
                        for (y2, wd) in n4.iter().zip(&w4) {
                            inner += wc
                                * wd
                                * kernel2(dx, x2 - y2, eta)
                                * gauss2(y1 - aj[0], y2 - aj[1], cj);
                        }
                    }
                    acc += pi_val * inner;
                }
            }
            acc
        }
        _ => unreachable!("dimension checked above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{blurred_cross_kernel, blurred_gram, Basis};
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn spot_value_one_over_sqrt2() {
        // d=1, eta=1, a=0, c=1, x=0, half width 8 sigma, 4001 points.
        let point = BlurredBasisPoint::new(v(&[0.0]), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let params = KernelParams::new(1.0).unwrap();
        let got = cross_kernel_oracle(&v(&[0.0]), &point, &params, &GridSpec::default()).unwrap();
        assert!((got - 0.70710678118654752).abs() < 1e-6);
    }

    #[test]
    fn spot_value_one_over_sqrt3() {
        let p = BlurredBasisPoint::new(v(&[0.0]), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let params = KernelParams::new(1.0).unwrap();
        let grid = GridSpec {
            points_per_dim: 1001,
            ..GridSpec::default()
        };
        let got = gram_entry_oracle(&p, &p, &params, &grid).unwrap();
        assert!((got - 0.57735026918962576).abs() < 1e-6);
    }

    #[test]
    fn delta_blur_equals_kernel_eval() {
        let params = KernelParams::new(0.8).unwrap();
        let point = BlurredBasisPoint::delta(v(&[0.5, -0.2]));
        let x = v(&[1.0, 1.0]);
        let got = cross_kernel_oracle(&x, &point, &params, &GridSpec::default()).unwrap();
        assert_eq!(got, kernel_eval(&x, point.center(), &params).unwrap());
    }

    #[test]
    fn coarse_grid_is_detected() {
        // 5 points over 8 sigma cannot resolve the integrand.
        let point = BlurredBasisPoint::new(v(&[0.0]), DMatrix::from_element(1, 1, 4.0)).unwrap();
        let params = KernelParams::new(0.2).unwrap();
        let grid = GridSpec {
            half_width_sigmas: 8.0,
            points_per_dim: 5,
            refine_check: true,
        };
        assert!(cross_kernel_oracle(&v(&[0.1]), &point, &params, &grid).is_err());
    }

    #[test]
    fn rejects_high_dimension() {
        let point = BlurredBasisPoint::delta(v(&[0.0, 0.0, 0.0]));
        let params = KernelParams::new(1.0).unwrap();
        assert!(cross_kernel_oracle(&v(&[0.0, 0.0, 0.0]), &point, &params, &GridSpec::default())
            .is_err());
    }

    #[test]
    fn closed_forms_match_oracle_2d() {
        let params = KernelParams::new(0.9).unwrap();
        let cov_i = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, 0.8]);
        let cov_j = DMatrix::from_row_slice(2, 2, &[1.1, -0.3, -0.3, 0.6]);
        let pi = BlurredBasisPoint::new(v(&[0.3, -0.4]), cov_i).unwrap();
        let pj = BlurredBasisPoint::new(v(&[-0.5, 0.7]), cov_j).unwrap();
        let basis = Basis::new(vec![pi.clone(), pj.clone()], params).unwrap();

        let x = v(&[0.2, 0.1]);
        let grid = GridSpec {
            points_per_dim: 301,
            ..GridSpec::default()
        };
        let row = blurred_cross_kernel(&x, &basis).unwrap();
        let got = cross_kernel_oracle(&x, &pi, &params, &grid).unwrap();
        assert_relative_eq!(row[0], got, epsilon = 1e-8);

        let khat = blurred_gram(&basis);
        let grid4 = GridSpec {
            points_per_dim: 61,
            refine_check: false,
            ..GridSpec::default()
        };
        let got = gram_entry_oracle(&pi, &pj, &params, &grid4).unwrap();
        assert_relative_eq!(khat[(0, 1)], got, epsilon = 1e-7);
    }
}
