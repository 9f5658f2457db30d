//! The decision-dependent environment and its online learner.
//!
//! The environment is a location-scale map: querying it at `(x, y)` returns
//! `z = A x + B y + xi` with `xi` drawn from a fixed law. The learner keeps
//! ridge-regularized least-squares sufficient statistics over regressors
//! `(x; y; 1)` and re-solves the normal equations after every batch, so the
//! current Jacobian estimate `(A_hat, B_hat)` is always consistent with the
//! absorbed data.

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Draws the exogenous feature for one sample and returns it together with
/// the feature-coupled additive offset on `z`.
pub type ExoSampler =
    Arc<dyn Fn(&mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>) + Send + Sync>;

/// One environment draw: the decision-dependent outcome `z`, plus the
/// exogenous feature when the map carries an exogenous sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub z: DVector<f64>,
    pub theta: Option<DMatrix<f64>>,
}

/// Ground-truth location-scale map `z = A x + B y + xi`.
///
/// The base noise is diagonal Gaussian. Problems whose loss also consumes
/// decision-independent features attach an [`ExoSampler`]; its offset is
/// added to `z` on top of the diagonal noise, and the drawn feature is
/// carried on the [`Sample`].
#[derive(Clone)]
pub struct LocationScaleMap {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    noise_mean: DVector<f64>,
    noise_std: DVector<f64>,
    exo_sampler: Option<ExoSampler>,
}

impl std::fmt::Debug for LocationScaleMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocationScaleMap")
            .field("d", &self.a.nrows())
            .field("n", &self.a.ncols())
            .field("m", &self.b.ncols())
            .field("has_exo_sampler", &self.exo_sampler.is_some())
            .finish()
    }
}

impl LocationScaleMap {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        noise_mean: DVector<f64>,
        noise_std: DVector<f64>,
    ) -> Result<Self> {
        let d = a.nrows();
        if b.nrows() != d {
            return Err(Error::DimensionMismatch {
                what: "map matrix B rows",
                expected: d,
                found: b.nrows(),
            });
        }
        if noise_mean.len() != d || noise_std.len() != d {
            return Err(Error::DimensionMismatch {
                what: "map noise vectors",
                expected: d,
                found: noise_mean.len().max(noise_std.len()),
            });
        }
        let finite = a.iter().all(|v| v.is_finite())
            && b.iter().all(|v| v.is_finite())
            && noise_mean.iter().all(|v| v.is_finite())
            && noise_std.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("location-scale map"));
        }
        if noise_std.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidArgument(
                "noise_std must be nonnegative".into(),
            ));
        }
        Ok(LocationScaleMap {
            a,
            b,
            noise_mean,
            noise_std,
            exo_sampler: None,
        })
    }

    pub fn with_exo_sampler(mut self, sampler: ExoSampler) -> Self {
        self.exo_sampler = Some(sampler);
        self
    }

    /// `(d, n, m)`: outcome, minimization, and maximization dimensions.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.a.ncols(), self.b.ncols())
    }

    pub fn noise_mean(&self) -> &DVector<f64> {
        &self.noise_mean
    }

    pub fn noise_std(&self) -> &DVector<f64> {
        &self.noise_std
    }

    pub fn has_exo_sampler(&self) -> bool {
        self.exo_sampler.is_some()
    }

    /// Jacobians of the mean map: `(A, B)`, constant in `(x, y)`.
    pub fn jacobians(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.a, &self.b)
    }

    /// Mean of the diagonal-noise part of the response, `A x + B y + noise_mean`.
    /// Any exogenous offset has its own (problem-specific) mean on top.
    pub fn mean_response(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_decision_dims(x, y)?;
        Ok(&self.a * x + &self.b * y + &self.noise_mean)
    }

    /// Draw `count` i.i.d. samples from the environment at `(x, y)`.
    ///
    /// RNG discipline, per sample: the exogenous sampler (when present)
    /// consumes its documented draws first, then exactly `d` standard-normal
    /// draws for the diagonal noise, even where `noise_std` is zero.
    pub fn sample(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        count: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Sample>> {
        self.check_decision_dims(x, y)?;
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be >= 1".into()));
        }
        let d = self.a.nrows();
        let base = &self.a * x + &self.b * y + &self.noise_mean;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let (theta, offset) = match &self.exo_sampler {
                Some(exo) => {
                    let (theta, offset) = exo(rng);
                    (Some(theta), Some(offset))
                }
                None => (None, None),
            };
            let mut z = base.clone();
            if let Some(offset) = offset {
                z += offset;
            }
            for j in 0..d {
                let eps: f64 = StandardNormal.sample(rng);
                z[j] += self.noise_std[j] * eps;
            }
            out.push(Sample { z, theta });
        }
        Ok(out)
    }

    fn check_decision_dims(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if x.len() != self.a.ncols() {
            return Err(Error::DimensionMismatch {
                what: "map input x",
                expected: self.a.ncols(),
                found: x.len(),
            });
        }
        if y.len() != self.b.ncols() {
            return Err(Error::DimensionMismatch {
                what: "map input y",
                expected: self.b.ncols(),
                found: y.len(),
            });
        }
        Ok(())
    }

    /// Serialize the map definition as a plain-text key-value document.
    /// Matrices are row-major, space-separated. Floats use the shortest
    /// decimal form that round-trips exactly.
    pub fn to_kv(&self) -> String {
        let (d, n, m) = self.dims();
        let mut s = String::new();
        let _ = writeln!(s, "d = {d}");
        let _ = writeln!(s, "n = {n}");
        let _ = writeln!(s, "m = {m}");
        let _ = writeln!(s, "A = {}", join_row_major(&self.a));
        let _ = writeln!(s, "B = {}", join_row_major(&self.b));
        let _ = writeln!(s, "noise_mean = {}", join_vector(&self.noise_mean));
        let _ = writeln!(s, "noise_std = {}", join_vector(&self.noise_std));
        s
    }

    /// Parse a map definition produced by [`LocationScaleMap::to_kv`].
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut d = None;
        let mut n = None;
        let mut m = None;
        let mut a = None;
        let mut b = None;
        let mut mean = None;
        let mut std = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "d" => d = Some(parse_usize(key, value)?),
                "n" => n = Some(parse_usize(key, value)?),
                "m" => m = Some(parse_usize(key, value)?),
                "A" => a = Some(parse_floats(key, value)?),
                "B" => b = Some(parse_floats(key, value)?),
                "noise_mean" => mean = Some(parse_floats(key, value)?),
                "noise_std" => std = Some(parse_floats(key, value)?),
                other => return Err(Error::Parse(format!("unknown map key `{other}`"))),
            }
        }
        let d = d.ok_or_else(|| Error::Parse("missing key `d`".into()))?;
        let n = n.ok_or_else(|| Error::Parse("missing key `n`".into()))?;
        let m = m.ok_or_else(|| Error::Parse("missing key `m`".into()))?;
        let a = a.ok_or_else(|| Error::Parse("missing key `A`".into()))?;
        let b = b.ok_or_else(|| Error::Parse("missing key `B`".into()))?;
        let mean = mean.ok_or_else(|| Error::Parse("missing key `noise_mean`".into()))?;
        let std = std.ok_or_else(|| Error::Parse("missing key `noise_std`".into()))?;
        if a.len() != d * n || b.len() != d * m || mean.len() != d || std.len() != d {
            return Err(Error::Parse("map field lengths inconsistent with dims".into()));
        }
        LocationScaleMap::new(
            DMatrix::from_row_slice(d, n, &a),
            DMatrix::from_row_slice(d, m, &b),
            DVector::from_vec(mean),
            DVector::from_vec(std),
        )
    }
}

fn join_row_major(m: &DMatrix<f64>) -> String {
    let mut parts = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            parts.push(format!("{}", m[(i, j)]));
        }
    }
    parts.join(" ")
}

fn join_vector(v: &DVector<f64>) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Parse(format!("key `{key}`: invalid integer `{value}`")))
}

fn parse_floats(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse()
                .map_err(|_| Error::Parse(format!("key `{key}`: invalid float `{tok}`")))
        })
        .collect()
}

/// Running least-squares estimate of the location-scale map.
///
/// Regressors are `u = (x; y; 1)`, so `p = n + m + 1`. The intercept column
/// absorbs the unknown noise mean; it is estimated but never used by the
/// plug-in gradients. Each solve applies ridge `lambda = ridge * (1 +
/// trace(S)/p)`, which keeps the normal equations well posed when early
/// iterates are collinear.
#[derive(Debug, Clone)]
pub struct MapEstimate {
    a_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
    c_hat: DVector<f64>,
    /// Accumulated regressor Gram matrix, `p x p`.
    s: DMatrix<f64>,
    /// Accumulated outcome-regressor cross products, `d x p`.
    r: DMatrix<f64>,
    ridge: f64,
    count: u64,
    n: usize,
    m: usize,
}

pub const DEFAULT_RIDGE: f64 = 1e-6;

impl MapEstimate {
    /// Fresh estimate with zero sufficient statistics; the ridge-only
    /// solution is identically zero.
    pub fn new(d: usize, n: usize, m: usize, ridge: f64) -> Result<Self> {
        if !ridge.is_finite() || ridge <= 0.0 {
            return Err(Error::InvalidArgument("ridge must be > 0".into()));
        }
        let p = n + m + 1;
        Ok(MapEstimate {
            a_hat: DMatrix::zeros(d, n),
            b_hat: DMatrix::zeros(d, m),
            c_hat: DVector::zeros(d),
            s: DMatrix::zeros(p, p),
            r: DMatrix::zeros(d, p),
            ridge,
            count: 0,
            n,
            m,
        })
    }

    pub fn zeroed_for(map: &LocationScaleMap) -> Self {
        let (d, n, m) = map.dims();
        MapEstimate::new(d, n, m, DEFAULT_RIDGE).expect("default ridge is positive")
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a_hat.nrows(), self.n, self.m)
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn intercept(&self) -> &DVector<f64> {
        &self.c_hat
    }

    /// Jacobians of the estimated mean map: `(A_hat, B_hat)`.
    pub fn jacobians(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.a_hat, &self.b_hat)
    }

    pub fn sufficient_statistics(&self) -> (&DMatrix<f64>, &DMatrix<f64>) {
        (&self.s, &self.r)
    }

    /// Absorb a batch observed at probe `(x, y)` and re-solve the normal
    /// equations.
    pub fn ols_update(
        &mut self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        batch: &[Sample],
    ) -> Result<()> {
        let (d, n, m) = self.dims();
        if batch.is_empty() {
            return Err(Error::InvalidArgument(
                "ols_update requires a nonempty batch".into(),
            ));
        }
        if x.len() != n || y.len() != m {
            return Err(Error::DimensionMismatch {
                what: "ols_update probe",
                expected: n + m,
                found: x.len() + y.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("ols_update probe"));
        }
        let p = n + m + 1;
        let mut u = DVector::zeros(p);
        u.rows_mut(0, n).copy_from(x);
        u.rows_mut(n, m).copy_from(y);
        u[p - 1] = 1.0;

        // All samples in the batch share the probe, so the Gram update is
        // rank one with weight |batch| and the cross term uses the summed z.
        let k = batch.len() as f64;
        let mut z_sum = DVector::zeros(d);
        for sample in batch {
            if sample.z.len() != d {
                return Err(Error::DimensionMismatch {
                    what: "ols_update sample",
                    expected: d,
                    found: sample.z.len(),
                });
            }
            if !sample.z.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("ols_update sample"));
            }
            z_sum += &sample.z;
        }
        self.s.ger(k, &u, &u, 1.0);
        self.r.ger(1.0, &z_sum, &u, 1.0);
        self.count += batch.len() as u64;
        self.resolve()
    }

    /// Re-solve `[A_hat B_hat c_hat] = R (S + lambda I)^{-1}` from the stored
    /// sufficient statistics.
    pub fn resolve(&mut self) -> Result<()> {
        let coef = solve_normal_equations(&self.s, &self.r, self.ridge)?;
        let (d, n, m) = self.dims();
        self.a_hat = coef.columns(0, n).into_owned();
        self.b_hat = coef.columns(n, m).into_owned();
        self.c_hat = coef.column(n + m).into_owned();
        debug_assert_eq!(coef.nrows(), d);
        Ok(())
    }

    /// Frobenius errors of the Jacobian estimates against the true map.
    pub fn estimation_error(&self, truth: &LocationScaleMap) -> (f64, f64) {
        let (a, b) = truth.jacobians();
        ((&self.a_hat - a).norm(), (&self.b_hat - b).norm())
    }
}

/// Solve `coef = R (S + lambda I)^{-1}` with `lambda = ridge (1 + trace(S)/p)`.
pub(crate) fn solve_normal_equations(
    s: &DMatrix<f64>,
    r: &DMatrix<f64>,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    let p = s.nrows();
    let lambda = ridge * (1.0 + s.trace() / p as f64);
    let mut reg = s.clone();
    for i in 0..p {
        reg[(i, i)] += lambda;
    }
    let chol = nalgebra::Cholesky::new(reg.clone()).ok_or_else(|| {
        // S + lambda I is symmetric positive definite by construction, so a
        // failed factorization means the statistics are numerically rotten.
        Error::Singular {
            cond: condition_estimate(&reg),
        }
    })?;
    // coef^T = (S + lambda I)^{-1} R^T
    let mut rt = r.transpose();
    chol.solve_mut(&mut rt);
    Ok(rt.transpose())
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sym = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for ev in sym.eigenvalues.iter() {
        lo = lo.min(ev.abs());
        hi = hi.max(ev.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn map_5_1() -> LocationScaleMap {
        LocationScaleMap::new(
            DMatrix::from_row_slice(1, 1, &[4.0]),
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DVector::zeros(1),
            DVector::from_element(1, 1.0),
        )
        .unwrap()
    }

    fn noiseless_map_5_1() -> LocationScaleMap {
        LocationScaleMap::new(
            DMatrix::from_row_slice(1, 1, &[4.0]),
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DVector::zeros(1),
            DVector::zeros(1),
        )
        .unwrap()
    }

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_row_slice(&[x])
    }

    #[test]
    fn noiseless_affine_sample() {
        let map = noiseless_map_5_1();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = map.sample(&v1(2.0), &v1(1.0), 1, &mut rng).unwrap();
        assert_eq!(s.len(), 1);
        assert_abs_diff_eq!(s[0].z[0], 7.0, epsilon = 1e-15);
        assert!(s[0].theta.is_none());
    }

    #[test]
    fn sampler_first_moment() {
        let map = map_5_1();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 100_000;
        let samples = map.sample(&v1(1.0), &v1(1.0), m, &mut rng).unwrap();
        let mean = samples.iter().map(|s| s.z[0]).sum::<f64>() / m as f64;
        // z = 4x - y + xi, so mean 3 with sigma 1; allow 5 sigma / sqrt(M).
        assert_abs_diff_eq!(mean, 3.0, epsilon = 5.0 / (m as f64).sqrt());
    }

    #[test]
    fn decision_independent_map_is_pure_noise() {
        let map = LocationScaleMap::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DVector::zeros(1),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 100_000;
        let samples = map.sample(&v1(7.0), &v1(-2.0), m, &mut rng).unwrap();
        let mean = samples.iter().map(|s| s.z[0]).sum::<f64>() / m as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 5.0 / (m as f64).sqrt());
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let map = map_5_1();
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let s1 = map.sample(&v1(0.3), &v1(-0.7), 32, &mut r1).unwrap();
        let s2 = map.sample(&v1(0.3), &v1(-0.7), 32, &mut r2).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn sample_rejects_dimension_mismatch() {
        let map = map_5_1();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(map.sample(&DVector::zeros(2), &v1(0.0), 1, &mut rng).is_err());
    }

    #[test]
    fn jacobians_of_truth_and_estimate() {
        let map = map_5_1();
        let (a, b) = map.jacobians();
        assert_eq!(a[(0, 0)], 4.0);
        assert_eq!(b[(0, 0)], -1.0);
        let est = MapEstimate::zeroed_for(&map);
        let (ah, bh) = est.jacobians();
        assert_eq!(ah[(0, 0)], 0.0);
        assert_eq!(bh[(0, 0)], 0.0);
    }

    #[test]
    fn zero_samples_is_ridge_only_zero_solution() {
        let est = MapEstimate::new(1, 1, 1, 1e-9).unwrap();
        assert_eq!(est.count(), 0);
        assert_eq!(est.jacobians().0[(0, 0)], 0.0);
        assert_eq!(est.jacobians().1[(0, 0)], 0.0);
    }

    #[test]
    fn exact_recovery_from_independent_probes() {
        let map = noiseless_map_5_1();
        let mut est = MapEstimate::new(1, 1, 1, 1e-9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (x, y) in [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)] {
            let batch = map.sample(&v1(x), &v1(y), 1, &mut rng).unwrap();
            est.ols_update(&v1(x), &v1(y), &batch).unwrap();
        }
        let (ah, bh) = est.jacobians();
        assert_abs_diff_eq!(ah[(0, 0)], 4.0, epsilon = 1e-6);
        assert_abs_diff_eq!(bh[(0, 0)], -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(est.intercept()[0], 0.0, epsilon = 1e-6);
        let (ex, ey) = est.estimation_error(&map);
        assert!(ex <= 1e-6 && ey <= 1e-6);
    }

    #[test]
    fn estimation_error_examples() {
        let map = map_5_1();
        let mut est = MapEstimate::zeroed_for(&map);
        let (ex, ey) = est.estimation_error(&map);
        assert_eq!((ex, ey), (4.0, 1.0));
        // Force the estimate equal to the truth.
        est.a_hat[(0, 0)] = 4.0;
        est.b_hat[(0, 0)] = -1.0;
        assert_eq!(est.estimation_error(&map), (0.0, 0.0));
    }

    #[test]
    fn monte_carlo_recovery_with_noise() {
        let map = map_5_1();
        let mut est = MapEstimate::new(1, 1, 1, DEFAULT_RIDGE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        use rand::Rng;
        for _ in 0..10_000 {
            let x = v1(rng.random_range(-5.0..5.0));
            let y = v1(rng.random_range(-5.0..5.0));
            let batch = map.sample(&x, &y, 1, &mut rng).unwrap();
            est.ols_update(&x, &y, &batch).unwrap();
        }
        let (ex, ey) = est.estimation_error(&map);
        // Observed (ex, ey) = (0.0011, 0.0005) at this seed.
        assert!(
            ex + ey <= 0.05,
            "estimation error too large: ex={ex:.4}, ey={ey:.4}"
        );
    }

    #[test]
    fn sufficient_statistics_resolve_consistency() {
        let map = map_5_1();
        let mut est = MapEstimate::zeroed_for(&map);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        use rand::Rng;
        for _ in 0..100 {
            let x = v1(rng.random_range(-2.0..2.0));
            let y = v1(rng.random_range(-2.0..2.0));
            let batch = map.sample(&x, &y, 3, &mut rng).unwrap();
            est.ols_update(&x, &y, &batch).unwrap();
        }
        let (s, r) = est.sufficient_statistics();
        let coef = solve_normal_equations(s, r, est.ridge()).unwrap();
        let (ah, bh) = est.jacobians();
        assert_abs_diff_eq!(coef[(0, 0)], ah[(0, 0)], epsilon = 1e-10);
        assert_abs_diff_eq!(coef[(0, 1)], bh[(0, 0)], epsilon = 1e-10);
        assert_abs_diff_eq!(coef[(0, 2)], est.intercept()[0], epsilon = 1e-10);
    }

    #[test]
    fn ols_update_rejects_bad_input() {
        let map = map_5_1();
        let mut est = MapEstimate::zeroed_for(&map);
        assert!(est.ols_update(&v1(0.0), &v1(0.0), &[]).is_err());
        let bad = Sample {
            z: v1(f64::NAN),
            theta: None,
        };
        assert!(matches!(
            est.ols_update(&v1(0.0), &v1(0.0), &[bad]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn kv_round_trip_is_exact() {
        let map = LocationScaleMap::new(
            DMatrix::from_row_slice(2, 1, &[4.0, -0.1]),
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.25, 1.0 / 3.0, 7.5e-11]),
            DVector::from_row_slice(&[0.0, -2.5]),
            DVector::from_row_slice(&[1.0, 0.3]),
        )
        .unwrap();
        let text = map.to_kv();
        let back = LocationScaleMap::from_kv(&text).unwrap();
        assert_eq!(map.jacobians().0, back.jacobians().0);
        assert_eq!(map.jacobians().1, back.jacobians().1);
        assert_eq!(map.noise_mean(), back.noise_mean());
        assert_eq!(map.noise_std(), back.noise_std());
    }
}
