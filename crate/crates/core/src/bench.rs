//! Benchmark problem instances.
//!
//! Each factory wires together an integrand, the ground-truth environment
//! map, the constraint set, and the smoothness profile, plus closed-form
//! expectations where they exist. The closed forms are what the metrics
//! and the test oracles consume; the samplers are what the solvers consume.
//! Cross-checking one against the other is part of the invariant suite.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::core::{ConcavityClass, ConstraintSet, SmoothnessProfile};
use crate::distmap::{LocationScaleMap, Sample};
use crate::error::{Error, Result};
use crate::gradients::{true_grad_mc, LossOracle};

type LossFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> (DVector<f64>, DVector<f64>) + Send + Sync>;
type PrimalFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type YStarFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Closed-form expectations of a benchmark, when available.
pub struct ClosedForms {
    /// Exact expected objective.
    pub loss: LossFn,
    /// Exact gradient of the expected objective (chain-rule term included).
    pub grad: GradFn,
    /// Exact naive gradient: expectation of the integrand partials only,
    /// with no distribution-map correction. This is what the primal-dual
    /// baseline follows.
    pub naive_grad: Option<GradFn>,
    /// Exact primal function, where a closed form is known.
    pub primal: Option<PrimalFn>,
    /// Exact inner maximizer. Reserved for test oracles; the inner solver
    /// never reads it.
    pub y_star: Option<YStarFn>,
}

impl std::fmt::Debug for ClosedForms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosedForms")
            .field("has_naive_grad", &self.naive_grad.is_some())
            .field("has_primal", &self.primal.is_some())
            .field("has_y_star", &self.y_star.is_some())
            .finish()
    }
}

/// A fully specified problem: integrand callbacks, ground-truth environment,
/// constraint set for the maximization variable, and smoothness profile.
#[derive(Debug)]
pub struct ProblemInstance {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub loss: LossOracle,
    pub truth: LocationScaleMap,
    pub y_set: ConstraintSet,
    pub profile: SmoothnessProfile,
    pub closed_forms: Option<ClosedForms>,
}

/// Exact or sampled estimate of the gradient of the expected objective.
#[derive(Debug, Clone)]
pub enum TrueGrad {
    Exact {
        gx: DVector<f64>,
        gy: DVector<f64>,
    },
    MonteCarlo {
        gx: DVector<f64>,
        gy: DVector<f64>,
        se_x: f64,
        se_y: f64,
        samples: usize,
    },
}

impl TrueGrad {
    pub fn parts(&self) -> (&DVector<f64>, &DVector<f64>) {
        match self {
            TrueGrad::Exact { gx, gy } => (gx, gy),
            TrueGrad::MonteCarlo { gx, gy, .. } => (gx, gy),
        }
    }
}

impl ProblemInstance {
    /// Consistency of the constraint set with the concavity class: the
    /// strongly concave and merely concave settings require a compact `y`
    /// set (their guarantees consume its diameter); PL problems may be
    /// unconstrained.
    pub fn validate(&self) -> Result<()> {
        let compact_required = matches!(
            self.profile.concavity_class,
            ConcavityClass::StronglyConcave | ConcavityClass::Concave
        );
        if compact_required && !self.y_set.diameter().is_finite() {
            return Err(Error::InvalidArgument(format!(
                "problem `{}` is {} in y and needs a compact constraint set",
                self.name,
                self.profile.concavity_class.name()
            )));
        }
        Ok(())
    }

    /// Exact expected objective, when a closed form exists.
    pub fn exact_loss(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
        self.closed_forms.as_ref().map(|cf| (cf.loss)(x, y))
    }

    /// Gradient of the expected objective under the true map: closed form
    /// when available, otherwise a Monte-Carlo estimate with its standard
    /// error from the supplied budget.
    pub fn true_grad(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        mc: Option<(usize, &mut ChaCha8Rng)>,
    ) -> Result<TrueGrad> {
        if let Some(cf) = &self.closed_forms {
            let (gx, gy) = (cf.grad)(x, y);
            return Ok(TrueGrad::Exact { gx, gy });
        }
        match mc {
            Some((count, rng)) => {
                let est = true_grad_mc(&self.loss, &self.truth, x, y, count, rng)?;
                Ok(TrueGrad::MonteCarlo {
                    gx: est.gx,
                    gy: est.gy,
                    se_x: est.se_x,
                    se_y: est.se_y,
                    samples: est.samples,
                })
            }
            None => Err(Error::InvalidArgument(
                "problem has no closed-form gradient; a Monte-Carlo budget is required".into(),
            )),
        }
    }

    /// Exact naive (uncorrected) expected gradient, when available.
    pub fn naive_expected_grad(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        self.closed_forms
            .as_ref()
            .and_then(|cf| cf.naive_grad.as_ref())
            .map(|g| g(x, y))
    }
}

fn v1(x: f64) -> DVector<f64> {
    DVector::from_row_slice(&[x])
}

/// Quadratic strongly-concave benchmark.
///
/// Integrand `l = -x z + y z - y^2/2` with environment `z = 4x - y + xi`,
/// `xi ~ N(0, 1)`, and `y` constrained to `[-10, 10]`. The expected
/// objective is `-4x^2 + 5xy - 1.5y^2`; the primal function has the
/// three-branch closed form with breakpoints at `|x| = 6`.
pub fn make_quadratic_sc() -> ProblemInstance {
    let truth = LocationScaleMap::new(
        DMatrix::from_row_slice(1, 1, &[4.0]),
        DMatrix::from_row_slice(1, 1, &[-1.0]),
        DVector::zeros(1),
        DVector::from_element(1, 1.0),
    )
    .expect("static map is valid");

    let loss = LossOracle {
        n: 1,
        m: 1,
        d: 1,
        eval: Box::new(|x, y, s| -x[0] * s.z[0] + y[0] * s.z[0] - 0.5 * y[0] * y[0]),
        grad_x: Box::new(|_, _, s| v1(-s.z[0])),
        grad_y: Box::new(|_, y, s| v1(s.z[0] - y[0])),
        grad_z: Box::new(|x, y, _| v1(y[0] - x[0])),
    };

    let closed_forms = ClosedForms {
        loss: Box::new(|x, y| {
            let (x, y) = (x[0], y[0]);
            -4.0 * x * x + 5.0 * x * y - 1.5 * y * y
        }),
        grad: Box::new(|x, y| {
            let (x, y) = (x[0], y[0]);
            (v1(-8.0 * x + 5.0 * y), v1(5.0 * x - 3.0 * y))
        }),
        naive_grad: Some(Box::new(|x, y| {
            let mean_z = 4.0 * x[0] - y[0];
            (v1(-mean_z), v1(mean_z - y[0]))
        })),
        primal: Some(Box::new(|x| quadratic_sc_primal(x[0]))),
        y_star: Some(Box::new(|x| v1((5.0 * x[0] / 3.0).clamp(-10.0, 10.0)))),
    };

    // lip_l, lip_l1 are suprema over the evaluation box [-10, 10]^2:
    // |grad_x L| <= 130, E|grad_x l| = E|z| <= 51, E|grad_z l| <= 20.
    let profile = SmoothnessProfile::new(
        12.0,
        3.0,
        130.0,
        17.0_f64.sqrt(),
        51.0,
        1.0,
        ConcavityClass::StronglyConcave,
    )
    .expect("static profile is valid");

    ProblemInstance {
        name: "quadratic_sc".into(),
        n: 1,
        m: 1,
        d: 1,
        loss,
        truth,
        y_set: ConstraintSet::box_set(v1(-10.0), v1(10.0)).expect("static box is valid"),
        profile,
        closed_forms: Some(closed_forms),
    }
}

/// Three-branch primal function of the quadratic benchmark.
pub fn quadratic_sc_primal(x: f64) -> f64 {
    if x < -6.0 {
        -4.0 * x * x - 50.0 * x - 150.0
    } else if x > 6.0 {
        -4.0 * x * x + 50.0 * x - 150.0
    } else {
        x * x / 6.0
    }
}

/// Sine-perturbed benchmark with a PL inner problem.
///
/// Integrand `l = 2(x + sin x) z - 4(y^2 + 3 sin^2 y)` with environment
/// `z = x + 2y + xi`, `xi ~ N(0, 1)`, unconstrained `y`. The nominal profile
/// is `ell = 32`, `mu = 8` with condition number 4; the modulus is the
/// quadratic-part bound and the sine ripples undercut it away from the
/// maximizer (see the invariant suite, which measures the effective value).
pub fn make_pl_sine() -> ProblemInstance {
    let truth = LocationScaleMap::new(
        DMatrix::from_row_slice(1, 1, &[1.0]),
        DMatrix::from_row_slice(1, 1, &[2.0]),
        DVector::zeros(1),
        DVector::from_element(1, 1.0),
    )
    .expect("static map is valid");

    let loss = LossOracle {
        n: 1,
        m: 1,
        d: 1,
        eval: Box::new(|x, y, s| {
            let (x, y) = (x[0], y[0]);
            2.0 * (x + x.sin()) * s.z[0] - 4.0 * (y * y + 3.0 * y.sin() * y.sin())
        }),
        grad_x: Box::new(|x, _, s| v1(2.0 * (1.0 + x[0].cos()) * s.z[0])),
        grad_y: Box::new(|_, y, _| v1(-8.0 * y[0] - 12.0 * (2.0 * y[0]).sin())),
        grad_z: Box::new(|x, _, _| v1(2.0 * (x[0] + x[0].sin()))),
    };

    let closed_forms = ClosedForms {
        loss: Box::new(|x, y| {
            let (x, y) = (x[0], y[0]);
            2.0 * (x + x.sin()) * (x + 2.0 * y) - 4.0 * y * y - 12.0 * y.sin() * y.sin()
        }),
        grad: Box::new(|x, y| {
            let (x, y) = (x[0], y[0]);
            let gx = 2.0 * (1.0 + x.cos()) * (x + 2.0 * y) + 2.0 * (x + x.sin());
            let gy = 4.0 * (x + x.sin()) - 8.0 * y - 12.0 * (2.0 * y).sin();
            (v1(gx), v1(gy))
        }),
        naive_grad: Some(Box::new(|x, y| {
            let (x, y) = (x[0], y[0]);
            (
                v1(2.0 * (1.0 + x.cos()) * (x + 2.0 * y)),
                v1(-8.0 * y - 12.0 * (2.0 * y).sin()),
            )
        })),
        primal: None,
        y_star: None,
    };

    // lip_l, lip_l1, sigma over the evaluation box [-3, 3]^2:
    // |grad_x L| <= 44, E|grad_x l| <= 40, Var(grad_x l) <= 16.
    let profile = SmoothnessProfile::new(
        32.0,
        8.0,
        44.0,
        5.0_f64.sqrt(),
        40.0,
        4.0,
        ConcavityClass::Pl,
    )
    .expect("static profile is valid");

    ProblemInstance {
        name: "pl_sine".into(),
        n: 1,
        m: 1,
        d: 1,
        loss,
        truth,
        y_set: ConstraintSet::Unconstrained,
        profile,
        closed_forms: Some(closed_forms),
    }
}

/// Election-forecasting duel between two platforms.
///
/// Decisions are the platforms' regression parameters `x, y` in `R^n`. Each
/// individual carries a feature matrix `theta` (entries `N(0, 0.01)`); the
/// observed outcome pair is `z_i = theta^T 1 + A_i x + B_i y + omega_i`,
/// `omega` entries `N(0, 0.01)`. The shared `theta^T 1 + omega` part is
/// decision-independent and is absorbed into the map noise; `theta` rides on
/// the sample so the integrand can form its prediction residuals.
pub fn make_election(n: usize, d: usize, seed: u64, sparsity: f64) -> Result<ProblemInstance> {
    if n < 1 || d < 1 {
        return Err(Error::InvalidArgument("election requires n, d >= 1".into()));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::InvalidArgument("sparsity must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::SeedableRng;
    let sparse = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
        DMatrix::from_fn(rows, cols, |_, _| {
            if rng.random::<f64>() < sparsity {
                let e: f64 = StandardNormal.sample(rng);
                0.2 * e
            } else {
                0.0
            }
        })
    };
    let a1 = sparse(d, n, &mut rng);
    let a2 = sparse(d, n, &mut rng);
    let b1 = sparse(d, n, &mut rng);
    let b2 = sparse(d, n, &mut rng);

    let mut a = DMatrix::zeros(2 * d, n);
    a.rows_mut(0, d).copy_from(&a1);
    a.rows_mut(d, d).copy_from(&a2);
    let mut b = DMatrix::zeros(2 * d, n);
    b.rows_mut(0, d).copy_from(&b1);
    b.rows_mut(d, d).copy_from(&b2);

    let theta_std = 0.1;
    let omega_std = 0.1;
    let exo = Arc::new(move |rng: &mut ChaCha8Rng| {
        let theta = DMatrix::from_fn(n, d, |_, _| {
            let e: f64 = StandardNormal.sample(rng);
            theta_std * e
        });
        let col_sums = theta.row_sum(); // 1^T theta, length d
        let mut offset = DVector::zeros(2 * d);
        for j in 0..d {
            offset[j] = col_sums[j];
            offset[d + j] = col_sums[j];
        }
        (theta, offset)
    });
    let truth = LocationScaleMap::new(
        a,
        b,
        DVector::zeros(2 * d),
        DVector::from_element(2 * d, omega_std),
    )?
    .with_exo_sampler(exo);

    let loss = election_loss(n, d);
    let closed_forms = election_closed_forms(n, d, &a1, &a2, &b1, &b2);

    // Quadratic problem: read the exact constants off the Hessian blocks.
    let tau = 1.0 + 0.01 * d as f64;
    let hx = a1.transpose() * &a1 - a2.transpose() * &a2 + DMatrix::identity(n, n) * tau;
    let hy = b1.transpose() * &b1 - b2.transpose() * &b2 - DMatrix::identity(n, n) * tau;
    let hxy = a1.transpose() * &b1 - a2.transpose() * &b2;
    let mu = -hy.clone().symmetric_eigen().eigenvalues.max();
    if mu <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "generated coupling matrices destroy concavity in y (mu = {mu:.3e}); \
             lower the sparsity or the seed draw"
        )));
    }
    let mut full = DMatrix::zeros(2 * n, 2 * n);
    full.view_mut((0, 0), (n, n)).copy_from(&hx);
    full.view_mut((0, n), (n, n)).copy_from(&hxy);
    full.view_mut((n, 0), (n, n)).copy_from(&hxy.transpose());
    full.view_mut((n, n), (n, n)).copy_from(&hy);
    let ell = full
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, ev| acc.max(ev.abs()));

    // Moment constants over the unit box: measured empirically, recorded
    // with a 1.5x margin.
    let (lip_l1, sigma) = election_moment_bounds(n, d, &truth, seed ^ 0x5eed);

    let profile = SmoothnessProfile::new(
        ell.max(mu),
        mu,
        ell * 2.0,
        truth.jacobians().0.norm().hypot(truth.jacobians().1.norm()),
        lip_l1,
        sigma,
        ConcavityClass::Pl,
    )?;

    Ok(ProblemInstance {
        name: "election".into(),
        n,
        m: n,
        d: 2 * d,
        loss,
        truth,
        y_set: ConstraintSet::Unconstrained,
        profile,
        closed_forms: Some(closed_forms),
    })
}

fn election_loss(n: usize, d: usize) -> LossOracle {
    let res = move |x: &DVector<f64>, theta: &DMatrix<f64>, z: &DVector<f64>, lo: usize| {
        // z_block - theta^T x
        let pred = theta.transpose() * x;
        DVector::from_fn(d, |j, _| z[lo + j] - pred[j])
    };
    LossOracle {
        n,
        m: n,
        d: 2 * d,
        eval: Box::new(move |x, y, s| {
            let theta = s.theta.as_ref().expect("election sample carries theta");
            let r1 = res(x, theta, &s.z, 0);
            let r2 = res(y, theta, &s.z, d);
            0.5 * (r1.norm_squared() - r2.norm_squared()) + 0.5 * x.norm_squared()
                - 0.5 * y.norm_squared()
        }),
        grad_x: Box::new(move |x, y, s| {
            let _ = y;
            let theta = s.theta.as_ref().expect("election sample carries theta");
            let r1 = res(x, theta, &s.z, 0);
            -(theta * r1) + x
        }),
        grad_y: Box::new(move |x, y, s| {
            let _ = x;
            let theta = s.theta.as_ref().expect("election sample carries theta");
            let r2 = res(y, theta, &s.z, d);
            theta * r2 - y
        }),
        grad_z: Box::new(move |x, y, s| {
            let theta = s.theta.as_ref().expect("election sample carries theta");
            let r1 = res(x, theta, &s.z, 0);
            let r2 = res(y, theta, &s.z, d);
            let mut g = DVector::zeros(2 * d);
            g.rows_mut(0, d).copy_from(&r1);
            g.rows_mut(d, d).copy_from(&(-r2));
            g
        }),
    }
}

fn election_closed_forms(
    n: usize,
    d: usize,
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    b2: &DMatrix<f64>,
) -> ClosedForms {
    let scale = 0.01 * d as f64;
    let ones = DVector::from_element(n, 1.0);
    let (a1c, a2c, b1c, b2c) = (a1.clone(), a2.clone(), b1.clone(), b2.clone());
    let ones_c = ones.clone();
    let loss: LossFn = Box::new(move |x, y| {
        let m1 = &a1c * x + &b1c * y;
        let m2 = &a2c * x + &b2c * y;
        0.5 * (m1.norm_squared() - m2.norm_squared())
            + 0.5 * scale * ((&ones_c - x).norm_squared() - (&ones_c - y).norm_squared())
            + 0.5 * (x.norm_squared() - y.norm_squared())
    });
    let (a1g, a2g, b1g, b2g) = (a1.clone(), a2.clone(), b1.clone(), b2.clone());
    let ones_g = ones.clone();
    let grad: GradFn = Box::new(move |x, y| {
        let m1 = &a1g * x + &b1g * y;
        let m2 = &a2g * x + &b2g * y;
        let gx = a1g.transpose() * &m1 - a2g.transpose() * &m2 + (x - &ones_g) * scale + x;
        let gy = b1g.transpose() * &m1 - b2g.transpose() * &m2 - (y - &ones_g) * scale - y;
        (gx, gy)
    });
    let ones_n = ones;
    let naive: GradFn = Box::new(move |x, y| {
        let gx = (x - &ones_n) * scale + x;
        let gy = -((y - &ones_n) * scale) - y;
        (gx, gy)
    });
    ClosedForms {
        loss,
        grad,
        naive_grad: Some(naive),
        primal: None,
        y_star: None,
    }
}

fn election_moment_bounds(
    n: usize,
    d: usize,
    truth: &LocationScaleMap,
    seed: u64,
) -> (f64, f64) {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loss = election_loss(n, d);
    let mut max_first = 0.0f64;
    let mut max_var = 0.0f64;
    for _ in 0..4 {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let batch = truth.sample(&x, &y, 600, &mut rng).expect("dims match");
        let (mut s1x, mut s1z) = (0.0, 0.0);
        let mut mean_xz = DVector::zeros(n + 2 * d);
        let mut sq_xz = 0.0;
        let mut mean_y = DVector::zeros(n);
        let mut sq_y = 0.0;
        for s in &batch {
            let gx = (loss.grad_x)(&x, &y, s);
            let gz = (loss.grad_z)(&x, &y, s);
            let gy = (loss.grad_y)(&x, &y, s);
            s1x += gx.norm();
            s1z += gz.norm();
            let mut stacked = DVector::zeros(n + 2 * d);
            stacked.rows_mut(0, n).copy_from(&gx);
            stacked.rows_mut(n, 2 * d).copy_from(&gz);
            sq_xz += stacked.norm_squared();
            mean_xz += stacked;
            sq_y += gy.norm_squared();
            mean_y += gy;
        }
        let k = batch.len() as f64;
        mean_xz /= k;
        mean_y /= k;
        max_first = max_first.max(s1x / k).max(s1z / k);
        max_var = max_var
            .max(sq_xz / k - mean_xz.norm_squared())
            .max(sq_y / k - mean_y.norm_squared());
    }
    (1.5 * max_first, 1.5 * max_var.max(1e-12).sqrt())
}

/// Strategic-classification benchmark for loan approval.
///
/// A synthetic base dataset stands in for real credit data: two Gaussian
/// feature clusters (means `+/- 1.5/sqrt(n) * 1`, unit covariance), 30%
/// positive labels. Applicants shift their features by `A x` where `A` has
/// every entry 10 except the last two rows, which are zero (the
/// non-strategic features). Querying the environment draws a uniformly
/// random applicant; the outcome `z = (a, b)` stacks the shifted features
/// and the label, and the sample's `theta` carries the applicant index so
/// the integrand can address its dual weight `y_i`.
pub fn make_strategic_classification(
    dataset_size: usize,
    n: usize,
    seed: u64,
) -> Result<ProblemInstance> {
    if dataset_size < 2 {
        return Err(Error::InvalidArgument(
            "strategic classification requires N >= 2".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "strategic classification requires n >= 2".into(),
        ));
    }
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big_n = dataset_size;
    let lambda1 = 1.0;
    let lambda2 = 10.0 / (big_n as f64 * big_n as f64);
    let alpha = 1.0;
    let sep = 1.5 / (n as f64).sqrt();

    let mut base_features = Vec::with_capacity(big_n);
    let mut labels = Vec::with_capacity(big_n);
    for _ in 0..big_n {
        let b = if rng.random::<f64>() < 0.3 { 1.0 } else { -1.0 };
        let mean = sep * b;
        let a0 = DVector::from_fn(n, |_, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            mean + e
        });
        base_features.push(a0);
        labels.push(b);
    }

    // Shift matrix: all entries 10 except the two non-strategic feature rows.
    let mut shift = DMatrix::from_element(n, n, 10.0);
    shift.row_mut(n - 1).fill(0.0);
    shift.row_mut(n - 2).fill(0.0);

    let mut a_aug = DMatrix::zeros(n + 1, n);
    a_aug.rows_mut(0, n).copy_from(&shift);
    let b_aug = DMatrix::zeros(n + 1, big_n);

    let data = Arc::new(StrategicData {
        base_features,
        labels,
        shift: shift.clone(),
        lambda1,
        lambda2,
        alpha,
        n,
        big_n,
    });

    let exo_data = Arc::clone(&data);
    let exo = Arc::new(move |rng: &mut ChaCha8Rng| {
        let i = rng.random_range(0..exo_data.big_n);
        let mut offset = DVector::zeros(exo_data.n + 1);
        offset
            .rows_mut(0, exo_data.n)
            .copy_from(&exo_data.base_features[i]);
        offset[exo_data.n] = exo_data.labels[i];
        (DMatrix::from_element(1, 1, i as f64), offset)
    });

    let truth = LocationScaleMap::new(
        a_aug,
        b_aug,
        DVector::zeros(n + 1),
        DVector::zeros(n + 1),
    )?
    .with_exo_sampler(exo);

    let loss = strategic_loss(Arc::clone(&data));
    let closed_forms = strategic_closed_forms(Arc::clone(&data));

    // mu is exact (the robust regularizer is lambda2 N^2-strongly concave);
    // ell is an empirical spectral bound with margin.
    let mu = lambda2 * (big_n as f64) * (big_n as f64);
    let ell = strategic_smoothness_estimate(&data, seed ^ 0xabcd).max(mu);
    let (lip_l1, sigma) = strategic_moment_bounds(&data, &loss, &truth, seed ^ 0x77);
    let profile = SmoothnessProfile::new(
        ell,
        mu,
        lip_l1,
        shift.norm(),
        lip_l1,
        sigma,
        ConcavityClass::StronglyConcave,
    )?;

    Ok(ProblemInstance {
        name: "strategic".into(),
        n,
        m: big_n,
        d: n + 1,
        loss,
        truth,
        y_set: ConstraintSet::simplex(big_n)?,
        profile,
        closed_forms: Some(closed_forms),
    })
}

struct StrategicData {
    base_features: Vec<DVector<f64>>,
    labels: Vec<f64>,
    shift: DMatrix<f64>,
    lambda1: f64,
    lambda2: f64,
    alpha: f64,
    n: usize,
    big_n: usize,
}

impl StrategicData {
    fn logistic_loss(&self, x: &DVector<f64>, a: &DVector<f64>, b: f64) -> f64 {
        let margin = b * a.dot(x);
        // log(1 + exp(-margin)), stable for large |margin|
        if margin > 0.0 {
            (-margin).exp().ln_1p()
        } else {
            -margin + margin.exp().ln_1p()
        }
    }

    fn sigmoid_neg_margin(&self, x: &DVector<f64>, a: &DVector<f64>, b: f64) -> f64 {
        // sigma(-b a^T x) = 1 / (1 + exp(b a^T x))
        let margin = b * a.dot(x);
        1.0 / (1.0 + margin.exp())
    }

    fn regularizer(&self, x: &DVector<f64>) -> f64 {
        self.lambda1
            * x.iter()
                .map(|xi| self.alpha * xi * xi / (1.0 + self.alpha * xi * xi))
                .sum::<f64>()
    }

    fn regularizer_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            let den = 1.0 + self.alpha * x[i] * x[i];
            self.lambda1 * 2.0 * self.alpha * x[i] / (den * den)
        })
    }

    fn robust_penalty(&self, y: &DVector<f64>) -> f64 {
        let nn = self.big_n as f64;
        let resid = y * nn - DVector::from_element(self.big_n, 1.0);
        0.5 * self.lambda2 * resid.norm_squared()
    }

    fn robust_penalty_grad(&self, y: &DVector<f64>) -> DVector<f64> {
        let nn = self.big_n as f64;
        (y * nn - DVector::from_element(self.big_n, 1.0)) * (self.lambda2 * nn)
    }

    fn shifted_feature(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.base_features[i] + &self.shift * x
    }
}

fn strategic_loss(data: Arc<StrategicData>) -> LossOracle {
    let d_eval = Arc::clone(&data);
    let d_gx = Arc::clone(&data);
    let d_gy = Arc::clone(&data);
    let d_gz = Arc::clone(&data);
    let split = move |s: &Sample, n: usize| -> (DVector<f64>, f64, usize) {
        let a = s.z.rows(0, n).into_owned();
        let b = s.z[n];
        let i = s.theta.as_ref().expect("strategic sample carries index")[(0, 0)] as usize;
        (a, b, i)
    };
    LossOracle {
        n: data.n,
        m: data.big_n,
        d: data.n + 1,
        eval: Box::new(move |x, y, s| {
            let (a, b, i) = split(s, d_eval.n);
            y[i] * d_eval.logistic_loss(x, &a, b) + d_eval.regularizer(x)
                - d_eval.robust_penalty(y)
        }),
        grad_x: Box::new(move |x, y, s| {
            let (a, b, i) = split(s, d_gx.n);
            let w = -y[i] * b * d_gx.sigmoid_neg_margin(x, &a, b);
            a * w + d_gx.regularizer_grad(x)
        }),
        grad_y: Box::new(move |x, y, s| {
            let (a, b, i) = split(s, d_gy.n);
            let mut g = -d_gy.robust_penalty_grad(y);
            g[i] += d_gy.logistic_loss(x, &a, b);
            g
        }),
        grad_z: Box::new(move |x, y, s| {
            let (a, b, i) = split(s, d_gz.n);
            let sig = d_gz.sigmoid_neg_margin(x, &a, b);
            let mut g = DVector::zeros(d_gz.n + 1);
            g.rows_mut(0, d_gz.n).copy_from(&(x * (-y[i] * b * sig)));
            g[d_gz.n] = -y[i] * sig * a.dot(x);
            g
        }),
    }
}

fn strategic_closed_forms(data: Arc<StrategicData>) -> ClosedForms {
    let d_loss = Arc::clone(&data);
    let d_grad = Arc::clone(&data);
    let d_naive = Arc::clone(&data);
    let loss: LossFn = Box::new(move |x, y| {
        let nn = d_loss.big_n as f64;
        let mut acc = 0.0;
        for i in 0..d_loss.big_n {
            let a = d_loss.shifted_feature(i, x);
            acc += y[i] * d_loss.logistic_loss(x, &a, d_loss.labels[i]);
        }
        acc / nn + d_loss.regularizer(x) - d_loss.robust_penalty(y)
    });
    let grad: GradFn = Box::new(move |x, y| {
        let nn = d_grad.big_n as f64;
        let mut gx = d_grad.regularizer_grad(x);
        let mut gy = -d_grad.robust_penalty_grad(y);
        for i in 0..d_grad.big_n {
            let b = d_grad.labels[i];
            let a = d_grad.shifted_feature(i, x);
            let sig = d_grad.sigmoid_neg_margin(x, &a, b);
            // total derivative: the shifted feature moves with x
            let chain = &a + d_grad.shift.transpose() * x;
            gx += chain * (-y[i] * b * sig / nn);
            gy[i] += d_grad.logistic_loss(x, &a, b) / nn;
        }
        (gx, gy)
    });
    let naive: GradFn = Box::new(move |x, y| {
        let nn = d_naive.big_n as f64;
        let mut gx = d_naive.regularizer_grad(x);
        let mut gy = -d_naive.robust_penalty_grad(y);
        for i in 0..d_naive.big_n {
            let b = d_naive.labels[i];
            let a = d_naive.shifted_feature(i, x);
            let sig = d_naive.sigmoid_neg_margin(x, &a, b);
            gx += &a * (-y[i] * b * sig / nn);
            gy[i] += d_naive.logistic_loss(x, &a, b) / nn;
        }
        (gx, gy)
    });
    ClosedForms {
        loss,
        grad,
        naive_grad: Some(naive),
        primal: None,
        y_star: None,
    }
}

fn strategic_smoothness_estimate(data: &Arc<StrategicData>, seed: u64) -> f64 {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cf = strategic_closed_forms(Arc::clone(data));
    let n = data.n;
    let m = data.big_n;
    let h = 1e-5;
    let mut max_norm: f64 = 0.0;
    for _ in 0..6 {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let mut y = DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
        let s = y.sum();
        y /= s;
        // Forward-difference directional Hessian estimates along random
        // unit directions in the joint space.
        for _ in 0..8 {
            let mut dir_x: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let mut dir_y: DVector<f64> = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let norm = (dir_x.norm_squared() + dir_y.norm_squared()).sqrt();
            dir_x /= norm;
            dir_y /= norm;
            let (gx1, gy1) = (cf.grad)(&(&x + &dir_x * h), &(&y + &dir_y * h));
            let (gx0, gy0) = (cf.grad)(&x, &y);
            let num = ((gx1 - gx0).norm_squared() + (gy1 - gy0).norm_squared()).sqrt();
            max_norm = max_norm.max(num / h);
        }
    }
    1.5 * max_norm
}

fn strategic_moment_bounds(
    data: &Arc<StrategicData>,
    loss: &LossOracle,
    truth: &LocationScaleMap,
    seed: u64,
) -> (f64, f64) {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n;
    let m = data.big_n;
    let mut max_first = 0.0f64;
    let mut max_var = 0.0f64;
    for _ in 0..4 {
        let x = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let mut y = DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
        let s = y.sum();
        y /= s;
        let batch = truth.sample(&x, &y, 400, &mut rng).expect("dims match");
        let (mut s1x, mut s1z) = (0.0, 0.0);
        let mut mean = DVector::zeros(n + n + 1);
        let mut sq = 0.0;
        let mut mean_y = DVector::zeros(m);
        let mut sq_y = 0.0;
        for s in &batch {
            let gx = (loss.grad_x)(&x, &y, s);
            let gz = (loss.grad_z)(&x, &y, s);
            let gy = (loss.grad_y)(&x, &y, s);
            s1x += gx.norm();
            s1z += gz.norm();
            let mut stacked = DVector::zeros(n + n + 1);
            stacked.rows_mut(0, n).copy_from(&gx);
            stacked.rows_mut(n, n + 1).copy_from(&gz);
            sq += stacked.norm_squared();
            mean += stacked;
            sq_y += gy.norm_squared();
            mean_y += gy;
        }
        let k = batch.len() as f64;
        mean /= k;
        mean_y /= k;
        max_first = max_first.max(s1x / k).max(s1z / k);
        max_var = max_var
            .max(sq / k - mean.norm_squared())
            .max(sq_y / k - mean_y.norm_squared());
    }
    (1.5 * max_first.max(1e-9), 1.5 * max_var.max(1e-12).sqrt())
}

/// Look up a benchmark by its public name.
///
/// `quadratic_sc` and `pl_sine` ignore the seed (they are fully
/// deterministic); `election` and `strategic` use it to generate their
/// instance data at the documented desk-scale sizes.
pub fn make_by_name(name: &str, seed: u64) -> Result<ProblemInstance> {
    match name {
        "quadratic_sc" => Ok(make_quadratic_sc()),
        "pl_sine" => Ok(make_pl_sine()),
        "election" => make_election(10, 10, seed, 0.1),
        "strategic" => make_strategic_classification(40, 5, seed),
        other => Err(Error::InvalidArgument(format!(
            "unknown problem `{other}`; valid names: quadratic_sc | pl_sine | election | strategic"
        ))),
    }
}

pub const PROBLEM_NAMES: [&str; 4] = ["quadratic_sc", "pl_sine", "election", "strategic"];
