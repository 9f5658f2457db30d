//! Stochastic gradients of the expected objective.
//!
//! The expectation runs over a distribution that itself depends on the
//! decision variables, so the chain rule adds a Jacobian-transpose term to
//! the naive integrand gradient:
//!
//! ```text
//! G_x(x, y, z) = grad_x l(x, y, z) + Jx^T grad_z l(x, y, z)
//! G_y(x, y, z) = grad_y l(x, y, z) + Jy^T grad_z l(x, y, z)
//! ```
//!
//! Plugging the learned Jacobians in place of the true ones yields the
//! (biased) gradients the solvers actually use; the bias is controlled by
//! the Frobenius error of the Jacobian estimate and the variance by
//! `(1 + |J|_F^2) sigma^2 / M`.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use crate::distmap::{LocationScaleMap, Sample};
use crate::error::{Error, Result};

/// Per-sample scalar callback `(x, y, sample) -> value`.
pub type SampleValueFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>, &Sample) -> f64 + Send + Sync>;
/// Per-sample gradient callback `(x, y, sample) -> vector`.
pub type SampleGradFn =
    Box<dyn Fn(&DVector<f64>, &DVector<f64>, &Sample) -> DVector<f64> + Send + Sync>;

/// Callbacks evaluating the integrand and its partial gradients at one
/// sample. Dimensions are fixed per problem: `grad_x` returns length `n`,
/// `grad_y` length `m`, `grad_z` length `d`.
pub struct LossOracle {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub eval: SampleValueFn,
    pub grad_x: SampleGradFn,
    pub grad_y: SampleGradFn,
    pub grad_z: SampleGradFn,
}

impl std::fmt::Debug for LossOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LossOracle")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("d", &self.d)
            .finish()
    }
}

fn check_finite(v: &DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Plug-in stochastic gradient in `x`:
/// `grad_x l(x,y,z) + est_jx^T grad_z l(x,y,z)`.
pub fn g_x_plugin(
    loss: &LossOracle,
    est_jx: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    sample: &Sample,
) -> Result<DVector<f64>> {
    if est_jx.nrows() != loss.d || est_jx.ncols() != loss.n {
        return Err(Error::DimensionMismatch {
            what: "g_x_plugin Jacobian",
            expected: loss.d * loss.n,
            found: est_jx.nrows() * est_jx.ncols(),
        });
    }
    let mut g = (loss.grad_x)(x, y, sample);
    let gz = (loss.grad_z)(x, y, sample);
    g.gemv_tr(1.0, est_jx, &gz, 1.0);
    check_finite(&g, "g_x_plugin")?;
    Ok(g)
}

/// Plug-in stochastic gradient in `y`:
/// `grad_y l(x,y,z) + est_jy^T grad_z l(x,y,z)`.
pub fn g_y_plugin(
    loss: &LossOracle,
    est_jy: &DMatrix<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    sample: &Sample,
) -> Result<DVector<f64>> {
    if est_jy.nrows() != loss.d || est_jy.ncols() != loss.m {
        return Err(Error::DimensionMismatch {
            what: "g_y_plugin Jacobian",
            expected: loss.d * loss.m,
            found: est_jy.nrows() * est_jy.ncols(),
        });
    }
    let mut g = (loss.grad_y)(x, y, sample);
    let gz = (loss.grad_z)(x, y, sample);
    g.gemv_tr(1.0, est_jy, &gz, 1.0);
    check_finite(&g, "g_y_plugin")?;
    Ok(g)
}

/// Arithmetic mean of per-sample gradients, accumulated in left-to-right
/// batch order so reruns are bit-identical.
pub fn minibatch<F>(mut gfn: F, batch: &[Sample]) -> Result<DVector<f64>>
where
    F: FnMut(&Sample) -> Result<DVector<f64>>,
{
    let mut iter = batch.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("minibatch requires a nonempty batch".into()))?;
    let mut acc = gfn(first)?;
    for sample in iter {
        acc += gfn(sample)?;
    }
    acc /= batch.len() as f64;
    Ok(acc)
}

/// Monte-Carlo estimate of the exact gradient under the true map, with
/// per-coordinate standard errors of the mean.
pub struct McGrad {
    pub gx: DVector<f64>,
    pub gy: DVector<f64>,
    /// Standard error of `|gx|`'s worst coordinate, conservative scalar.
    pub se_x: f64,
    pub se_y: f64,
    pub samples: usize,
}

/// Estimate `(grad_x L, grad_y L)` by averaging the unbiased chain-rule
/// gradient (true Jacobians) over `count` fresh samples.
pub fn true_grad_mc(
    loss: &LossOracle,
    truth: &LocationScaleMap,
    x: &DVector<f64>,
    y: &DVector<f64>,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<McGrad> {
    if count == 0 {
        return Err(Error::InvalidArgument("monte-carlo budget must be >= 1".into()));
    }
    let (jx, jy) = truth.jacobians();
    let batch = truth.sample(x, y, count, rng)?;
    let mut sum_x = DVector::zeros(loss.n);
    let mut sum_y = DVector::zeros(loss.m);
    let mut sq_x = 0.0;
    let mut sq_y = 0.0;
    for sample in &batch {
        let gx = g_x_plugin(loss, jx, x, y, sample)?;
        let gy = g_y_plugin(loss, jy, x, y, sample)?;
        sq_x += gx.norm_squared();
        sq_y += gy.norm_squared();
        sum_x += gx;
        sum_y += gy;
    }
    let k = count as f64;
    let gx = sum_x / k;
    let gy = sum_y / k;
    // Scalar variance proxy: E|g|^2 - |E g|^2 summed over coordinates.
    let var_x = (sq_x / k - gx.norm_squared()).max(0.0);
    let var_y = (sq_y / k - gy.norm_squared()).max(0.0);
    Ok(McGrad {
        gx,
        gy,
        se_x: (var_x / k).sqrt(),
        se_y: (var_y / k).sqrt(),
        samples: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_row_slice(&[x])
    }

    fn m1(x: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 1, &[x])
    }

    fn sample1(z: f64) -> Sample {
        Sample {
            z: v1(z),
            theta: None,
        }
    }

    /// Integrand of the quadratic benchmark: l = -xz + yz - y^2/2.
    fn quadratic_loss() -> LossOracle {
        LossOracle {
            n: 1,
            m: 1,
            d: 1,
            eval: Box::new(|x, y, s| -x[0] * s.z[0] + y[0] * s.z[0] - 0.5 * y[0] * y[0]),
            grad_x: Box::new(|_, _, s| v1(-s.z[0])),
            grad_y: Box::new(|x, y, s| {
                let _ = x;
                v1(s.z[0] - y[0])
            }),
            grad_z: Box::new(|x, y, _| v1(-x[0] + y[0])),
        }
    }

    #[test]
    fn g_x_plugin_matches_expected_gradient_at_mean_draw() {
        let loss = quadratic_loss();
        // At (1, 0) with z at its mean 4 and the exact Jacobian 4:
        // -4 + 4 * (-1) = -8 = grad_x L(1,0).
        let g = g_x_plugin(&loss, &m1(4.0), &v1(1.0), &v1(0.0), &sample1(4.0)).unwrap();
        assert_abs_diff_eq!(g[0], -8.0, epsilon = 1e-14);
    }

    #[test]
    fn g_x_plugin_at_origin_is_zero() {
        let loss = quadratic_loss();
        let g = g_x_plugin(&loss, &m1(4.0), &v1(0.0), &v1(0.0), &sample1(0.0)).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn g_x_plugin_bias_saturates_first_moment_bound() {
        let loss = quadratic_loss();
        // With a zero Jacobian estimate the chain term vanishes: -4 instead
        // of -8. The gap 4 equals |est - true|_F * |grad_z l| here.
        let g = g_x_plugin(&loss, &m1(0.0), &v1(1.0), &v1(0.0), &sample1(4.0)).unwrap();
        assert_abs_diff_eq!(g[0], -4.0, epsilon = 1e-14);
        let delta: f64 = 4.0;
        let gz = 1.0; // |grad_z l(1,0,.)| = |-1| at this point
        assert_abs_diff_eq!((-4.0f64 - -8.0).abs(), delta * gz, epsilon = 1e-14);
    }

    #[test]
    fn g_y_plugin_examples() {
        let loss = quadratic_loss();
        let g = g_y_plugin(&loss, &m1(-1.0), &v1(1.0), &v1(0.0), &sample1(4.0)).unwrap();
        assert_abs_diff_eq!(g[0], 5.0, epsilon = 1e-14);
        let g = g_y_plugin(&loss, &m1(-1.0), &v1(0.0), &v1(0.0), &sample1(0.0)).unwrap();
        assert_eq!(g[0], 0.0);
        // Noise-free draw z = -y at (0, 1): (z - y) + (-1)(-x + y) = -3.
        let g = g_y_plugin(&loss, &m1(-1.0), &v1(0.0), &v1(1.0), &sample1(-1.0)).unwrap();
        assert_abs_diff_eq!(g[0], -3.0, epsilon = 1e-14);
    }

    #[test]
    fn minibatch_of_one_is_that_gradient() {
        let loss = quadratic_loss();
        let jx = m1(4.0);
        let batch = vec![sample1(4.0)];
        let g = minibatch(
            |s| g_x_plugin(&loss, &jx, &v1(1.0), &v1(0.0), s),
            &batch,
        )
        .unwrap();
        assert_abs_diff_eq!(g[0], -8.0, epsilon = 1e-14);
    }

    #[test]
    fn minibatch_of_opposite_gradients_is_zero() {
        // grad_x l = -z, so draws z and -z average to zero.
        let loss = quadratic_loss();
        let jx = m1(0.0);
        let batch = vec![sample1(2.5), sample1(-2.5)];
        let g = minibatch(
            |s| g_x_plugin(&loss, &jx, &v1(0.0), &v1(0.0), s),
            &batch,
        )
        .unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn minibatch_rejects_empty_batch() {
        let loss = quadratic_loss();
        let jx = m1(0.0);
        let out = minibatch(|s| g_x_plugin(&loss, &jx, &v1(0.0), &v1(0.0), s), &[]);
        assert!(matches!(out, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn plugin_rejects_jacobian_shape_mismatch() {
        let loss = quadratic_loss();
        let bad = DMatrix::zeros(2, 1);
        assert!(g_x_plugin(&loss, &bad, &v1(0.0), &v1(0.0), &sample1(0.0)).is_err());
    }
}
