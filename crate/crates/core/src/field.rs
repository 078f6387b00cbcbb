//! The likelihood field: a sum of multivariate Gaussians centered on the
//! scan points, parameterized by per-point factor matrices whose Gram
//! products are the covariances, with analytic derivatives of the field
//! value at a fixed location with respect to each factor matrix.
//!
//! Convention: the Gaussian here carries no 1/2 factor in the exponent,
//!   G(x; mu, Sigma) = sqrt((2 pi)^-d |Sigma|^-1) exp(-(x-mu)^T Sigma^-1 (x-mu)).
//! All derivative formulas below are derived for this exact form.

use crate::error::{Error, Result};
use crate::geom::{sub, Mat, Point};
use crate::pointcloud::PointCloud;

pub const MIN_COV_DET: f64 = 1e-30;

/// Per-point factor matrices; covariance of point p is alpha_p^T alpha_p.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    pub alphas: Vec<Mat>,
    pub dim: usize,
}

impl GaussianParams {
    pub fn isotropic(n: usize, dim: usize, s: f64) -> Self {
        GaussianParams {
            alphas: vec![Mat::scaled_identity(dim, s); n],
            dim,
        }
    }

    /// Re-project any factor whose covariance determinant collapsed below
    /// the working threshold by adding a small multiple of the identity.
    pub fn reproject_spd(&mut self) {
        for a in &mut self.alphas {
            if a.gram().det().abs() < MIN_COV_DET {
                *a = a.add(&Mat::scaled_identity(self.dim, 1e-6));
            }
        }
    }
}

/// Field value plus the per-point derivative matrices at one location.
#[derive(Clone, Debug)]
pub struct FieldValueGrad {
    pub value: f64,
    pub grads: Vec<Mat>,
}

/// The multivariate Gaussian basis function.
pub fn gaussian(x: &Point, mu: &Point, sigma: &Mat) -> Result<f64> {
    let d = sigma.d;
    let det = sigma.det();
    if det.abs() < MIN_COV_DET {
        return Err(Error::SingularCovariance { det });
    }
    let inv = sigma
        .inverse()
        .ok_or(Error::SingularCovariance { det })?;
    let r = sub(x, mu, d);
    let q = inv.quad_form(&r);
    let coef = ((2.0 * std::f64::consts::PI).powi(-(d as i32)) / det).sqrt();
    Ok(coef * (-q).exp())
}

/// Precomputed per-point inverses and coefficients for repeated evaluation
/// at many locations with fixed parameters.
pub struct FieldEvaluator<'a> {
    cloud: &'a PointCloud,
    prepared: Vec<(Mat, f64)>, // (Sigma^-1, coefficient)
    dim: usize,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(cloud: &'a PointCloud, params: &GaussianParams) -> Result<Self> {
        assert_eq!(cloud.len(), params.alphas.len(), "params must match cloud");
        assert_eq!(cloud.dim, params.dim);
        let d = cloud.dim;
        let norm = (2.0 * std::f64::consts::PI).powi(-(d as i32));
        let mut prepared = Vec::with_capacity(cloud.len());
        for a in &params.alphas {
            let sigma = a.gram();
            let det = sigma.det();
            if det.abs() < MIN_COV_DET {
                return Err(Error::SingularCovariance { det });
            }
            let inv = sigma.inverse().ok_or(Error::SingularCovariance { det })?;
            prepared.push((inv, (norm / det).sqrt()));
        }
        Ok(FieldEvaluator {
            cloud,
            prepared,
            dim: d,
        })
    }

    pub fn eval(&self, x: &Point) -> f64 {
        let d = self.dim;
        let mut total = 0.0;
        for (p, (inv, coef)) in self.cloud.points.iter().zip(&self.prepared) {
            let r = sub(x, p, d);
            total += coef * (-inv.quad_form(&r)).exp();
        }
        total
    }
}

/// Sum of per-point Gaussians at x.
pub fn eval_field(x: &Point, cloud: &PointCloud, params: &GaussianParams) -> Result<f64> {
    Ok(FieldEvaluator::new(cloud, params)?.eval(x))
}

/// Field value at x and the gradient of the field with respect to every
/// factor matrix alpha_p.
///
/// With Sigma = alpha^T alpha, r = x - p and G the basis value, the
/// derivative of G in the entries of alpha works out to
///   dG/dalpha = G * alpha * (2 Sigma^-1 r r^T Sigma^-1 - Sigma^-1),
/// which at r = 0 reduces to -G * alpha^-T (only the determinant factor
/// contributes there).
pub fn eval_field_grad(
    x: &Point,
    cloud: &PointCloud,
    params: &GaussianParams,
) -> Result<FieldValueGrad> {
    let ev = FieldEvaluator::new(cloud, params)?;
    let d = cloud.dim;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(cloud.len());
    for ((p, (inv, coef)), alpha) in cloud
        .points
        .iter()
        .zip(&ev.prepared)
        .zip(&params.alphas)
    {
        let r = sub(x, p, d);
        let g = coef * (-inv.quad_form(&r)).exp();
        value += g;
        let ir = inv.mul_vec(&r); // Sigma^-1 r
        let m = Mat::outer(&ir, &ir, d).scale(2.0).sub(inv);
        grads.push(alpha.matmul(&m).scale(g));
    }
    Ok(FieldValueGrad { value, grads })
}

/// Isotropic initialization: alpha_p = s I with s chosen so that the radial
/// derivative magnitude of the Gaussian peaks at the mean point spacing.
///
/// For Sigma = s^2 I the radial profile is proportional to exp(-r^2/s^2),
/// so |dG/dr| ~ r exp(-r^2/s^2), which is stationary at r = s/sqrt(2).
/// Setting that radius to `avg_spacing` gives s = sqrt(2) * avg_spacing.
pub fn init_params(cloud: &PointCloud) -> Result<GaussianParams> {
    if cloud.avg_spacing <= 0.0 {
        return Err(Error::DegenerateCloud(
            "avg_spacing is zero; normalize the cloud first".into(),
        ));
    }
    let s = std::f64::consts::SQRT_2 * cloud.avg_spacing;
    Ok(GaussianParams::isotropic(cloud.len(), cloud.dim, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cloud2(points: Vec<Point>) -> PointCloud {
        let mut c = PointCloud::new(points, 2).unwrap();
        c.avg_spacing = 1.0;
        c
    }

    fn random_spd_factor(rng: &mut impl Rng, d: usize) -> Mat {
        // a random matrix plus a diagonal bump is almost surely a valid factor
        let mut m = Mat::scaled_identity(d, 0.8 + rng.gen::<f64>());
        for i in 0..d {
            for j in 0..d {
                m.set(i, j, m.get(i, j) + 0.4 * (rng.gen::<f64>() - 0.5));
            }
        }
        m
    }

    #[test]
    fn gaussian_at_center() {
        let x = [0.3, -0.2, 0.7];
        let v = gaussian(&x, &x, &Mat::identity(3)).unwrap();
        assert_relative_eq!(v, (2.0 * std::f64::consts::PI).powf(-1.5), epsilon = 1e-12);
    }

    #[test]
    fn gaussian_anisotropic_2d() {
        // d=2, Sigma=diag(4,1): sqrt((2pi)^-2 / 4) = 1/(4 pi)
        let mut sigma = Mat::zero(2);
        sigma.set(0, 0, 4.0);
        sigma.set(1, 1, 1.0);
        let v = gaussian(&[0.0; 3], &[0.0; 3], &sigma).unwrap();
        assert_relative_eq!(v, 1.0 / (4.0 * std::f64::consts::PI), epsilon = 1e-12);
    }

    #[test]
    fn gaussian_singular_rejected() {
        assert!(matches!(
            gaussian(&[0.0; 3], &[0.0; 3], &Mat::zero(2)),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn gaussian_max_at_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = [0.2, 0.4, 0.0];
        let sigma = random_spd_factor(&mut rng, 2).gram();
        let peak = gaussian(&mu, &mu, &sigma).unwrap();
        for _ in 0..50 {
            let x = [rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0, 0.0];
            assert!(gaussian(&x, &mu, &sigma).unwrap() <= peak);
        }
    }

    #[test]
    fn eval_field_single_point() {
        let c = cloud2(vec![[0.5, 0.5, 0.0], [10.0, 10.0, 0.0], [20.0, 0.0, 0.0]]);
        let params = GaussianParams::isotropic(3, 2, 1.0);
        let v = eval_field(&[0.5, 0.5, 0.0], &c, &params).unwrap();
        // the far-away terms are vanishing; the near one is (2pi)^-1
        assert_relative_eq!(v, 1.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-6);
    }

    #[test]
    fn eval_field_matches_per_term_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point> = (0..5)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), 0.0])
            .collect();
        let c = cloud2(pts.clone());
        let params = GaussianParams {
            alphas: (0..5).map(|_| random_spd_factor(&mut rng, 2)).collect(),
            dim: 2,
        };
        let x = [0.3, 0.7, 0.0];
        let fast = eval_field(&x, &c, &params).unwrap();
        let mut oracle = 0.0;
        for (p, a) in pts.iter().zip(&params.alphas) {
            oracle += gaussian(&x, p, &a.gram()).unwrap();
        }
        assert_relative_eq!(fast, oracle, epsilon = 1e-12);
    }

    #[test]
    fn eval_field_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point> = (0..6)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), 0.0])
            .collect();
        let alphas: Vec<Mat> = (0..6).map(|_| random_spd_factor(&mut rng, 2)).collect();
        let c1 = cloud2(pts.clone());
        let p1 = GaussianParams {
            alphas: alphas.clone(),
            dim: 2,
        };
        let mut rev_pts = pts;
        rev_pts.reverse();
        let mut rev_alphas = alphas;
        rev_alphas.reverse();
        let c2 = cloud2(rev_pts);
        let p2 = GaussianParams {
            alphas: rev_alphas,
            dim: 2,
        };
        let x = [0.4, 0.2, 0.0];
        assert_relative_eq!(
            eval_field(&x, &c1, &p1).unwrap(),
            eval_field(&x, &c2, &p2).unwrap(),
            epsilon = 1e-13
        );
    }

    /// Central finite-difference oracle for the per-entry alpha gradient.
    fn fd_grad(x: &Point, cloud: &PointCloud, params: &GaussianParams, p: usize) -> Mat {
        let d = cloud.dim;
        let h = 1e-5;
        let mut g = Mat::zero(d);
        for i in 0..d {
            for j in 0..d {
                let mut plus = params.clone();
                let mut v = plus.alphas[p];
                v.set(i, j, v.get(i, j) + h);
                plus.alphas[p] = v;
                let mut minus = params.clone();
                let mut v = minus.alphas[p];
                v.set(i, j, v.get(i, j) - h);
                minus.alphas[p] = v;
                let fp = eval_field(x, cloud, &plus).unwrap();
                let fm = eval_field(x, cloud, &minus).unwrap();
                g.set(i, j, (fp - fm) / (2.0 * h));
            }
        }
        g
    }

    #[test]
    fn grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for d in [2usize, 3] {
            for _ in 0..25 {
                let n = d + 1;
                let pts: Vec<Point> = (0..n)
                    .map(|_| {
                        let mut p = [0.0; 3];
                        for c in p.iter_mut().take(d) {
                            *c = rng.gen::<f64>();
                        }
                        p
                    })
                    .collect();
                let mut c = PointCloud::new(pts, d).unwrap();
                c.avg_spacing = 1.0;
                let params = GaussianParams {
                    alphas: (0..n).map(|_| random_spd_factor(&mut rng, d)).collect(),
                    dim: d,
                };
                let mut x = [0.0; 3];
                for coord in x.iter_mut().take(d) {
                    *coord = rng.gen::<f64>();
                }
                let fg = eval_field_grad(&x, &c, &params).unwrap();
                for p in 0..n {
                    let fd = fd_grad(&x, &c, &params, p);
                    for i in 0..d {
                        for j in 0..d {
                            let a = fg.grads[p].get(i, j);
                            let b = fd.get(i, j);
                            let rel = (a - b).abs() / b.abs().max(1e-8);
                            assert!(rel < 1e-4, "d={d} entry ({i},{j}): {a} vs {b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn grad_at_center_is_det_term_only() {
        let c = cloud2(vec![[0.5, 0.5, 0.0], [9.0, 9.0, 0.0], [9.0, -9.0, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alpha = random_spd_factor(&mut rng, 2);
        let params = GaussianParams {
            alphas: vec![alpha, Mat::identity(2), Mat::identity(2)],
            dim: 2,
        };
        let x = [0.5, 0.5, 0.0];
        let fg = eval_field_grad(&x, &c, &params).unwrap();
        let g = gaussian(&x, &x, &alpha.gram()).unwrap();
        let expect = alpha.gram().inverse().unwrap().matmul(&alpha.transpose()).transpose().scale(-g);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(fg.grads[0].get(i, j), expect.get(i, j), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn init_params_maximizes_radial_derivative_at_spacing() {
        // Independent scalar oracle: for the chosen s, the radial derivative
        // magnitude |dG/dr| ~ r exp(-r^2/s^2) must peak at r = avg_spacing.
        let c = cloud2(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_relative_eq!(c.avg_spacing, 1.0);
        let params = init_params(&c).unwrap();
        let s = params.alphas[0].get(0, 0);
        let profile = |r: f64| r * (-r * r / (s * s)).exp();
        // coarse grid then ternary refinement
        let mut best_r = 0.0;
        let mut best_v = -1.0;
        let mut r = 0.1;
        while r < 5.0 {
            let v = profile(r);
            if v > best_v {
                best_v = v;
                best_r = r;
            }
            r += 1e-3;
        }
        let (mut lo, mut hi) = (best_r - 2e-3, best_r + 2e-3);
        for _ in 0..80 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if profile(m1) < profile(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let argmax = 0.5 * (lo + hi);
        assert!(
            (argmax - c.avg_spacing).abs() < 1e-6,
            "|dG/dr| peaks at {argmax}, expected avg_spacing = 1"
        );
        assert_relative_eq!(s, std::f64::consts::SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn init_params_symmetric() {
        let c = cloud2(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let p = init_params(&c).unwrap();
        assert_eq!(p.alphas[0], p.alphas[1]);
        assert_eq!(p.alphas[1], p.alphas[2]);
    }
}
