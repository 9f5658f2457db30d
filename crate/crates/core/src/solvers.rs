//! Optimization drivers.
//!
//! Three algorithms share the trace machinery:
//!
//! * `asgda_run`: simultaneous descent-ascent on minibatch plug-in
//!   gradients, with the distribution-map estimate refreshed from the same
//!   batch after the decision update (so the gradient at iteration `t`
//!   always uses the estimate built from iterations `< t`).
//! * `aasgda_run`: alternating single-sample variant: the freshly updated
//!   `x` is used for the `y` step, and the `y` step's sample is reused for
//!   the estimator (a config flag restores the literal third draw).
//! * `spd_run`: the stochastic primal-dual baseline: naive integrand
//!   gradients, no map correction, no learning; divergence is an expected,
//!   recorded outcome.
//!
//! Stepsize schedules follow the per-setting prescriptions; see
//! [`stepsizes_nc_sc`], [`stepsizes_nc_c`], [`stepsizes_nc_pl`].

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bench::ProblemInstance;
use crate::core::{condition_number, ConcavityClass, DecisionPair, SmoothnessProfile};
use crate::distmap::{LocationScaleMap, MapEstimate};
use crate::error::{Error, Result};
use crate::gradients::{g_x_plugin, g_y_plugin, minibatch};
use crate::metrics::{inner_max, moreau_grad};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Asgda,
    Aasgda,
    Spd,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Asgda => "asgda",
            Algo::Aasgda => "aasgda",
            Algo::Spd => "spd",
        }
    }

    pub fn parse(s: &str) -> Result<Algo> {
        match s.to_ascii_lowercase().as_str() {
            "asgda" => Ok(Algo::Asgda),
            "aasgda" => Ok(Algo::Aasgda),
            "spd" => Ok(Algo::Spd),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm `{other}`; valid: asgda | aasgda | spd"
            ))),
        }
    }
}

/// Stepsize selection. `Fixed` uses the given constants; the `Nc*` variants
/// evaluate the per-setting formulas from the problem profile and horizon;
/// `SpdDynamic` is the baseline's `1/(offset + t)` decay (SPD only).
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Fixed { eta_x: f64, eta_y: f64 },
    NcSc,
    NcC,
    NcPl,
    SpdDynamic { offset: f64 },
}

/// Stepsize rule for the strongly concave setting:
/// `eta_x = 1 / (40 (kappa+1)^2 ell)`, `eta_y = 1 / (2 (ell + mu))`.
pub fn stepsizes_nc_sc(profile: &SmoothnessProfile) -> Result<(f64, f64)> {
    if profile.concavity_class != ConcavityClass::StronglyConcave {
        return Err(Error::InvalidClass {
            required: "strongly-concave",
            found: profile.concavity_class.name(),
        });
    }
    let kappa = condition_number(profile)?;
    Ok((
        1.0 / (40.0 * (kappa + 1.0) * (kappa + 1.0) * profile.ell),
        1.0 / (2.0 * (profile.ell + profile.mu)),
    ))
}

/// Horizon-only stepsizes for the merely concave setting:
/// `eta_x = (T+1)^{-3/4}`, `eta_y = (T+1)^{-1/4}`.
pub fn stepsizes_nc_c(t_max: usize) -> (f64, f64) {
    let t1 = (t_max + 1) as f64;
    (t1.powf(-0.75), t1.powf(-0.25))
}

/// Stepsizes for the PL setting:
/// `eta_x = min(1/(16 sqrt(T)), 1/(176 ell kappa^2))`,
/// `eta_y = min(11 kappa^2 / sqrt(T), 1/ell)`.
pub fn stepsizes_nc_pl(profile: &SmoothnessProfile, t_max: usize) -> Result<(f64, f64)> {
    if profile.concavity_class != ConcavityClass::Pl {
        return Err(Error::InvalidClass {
            required: "PL",
            found: profile.concavity_class.name(),
        });
    }
    let kappa = condition_number(profile)?;
    let sqrt_t = (t_max as f64).sqrt();
    let eta_x = (1.0 / (16.0 * sqrt_t)).min(1.0 / (176.0 * profile.ell * kappa * kappa));
    let eta_y = (11.0 * kappa * kappa / sqrt_t).min(1.0 / profile.ell);
    Ok((eta_x, eta_y))
}

/// One experiment's hyperparameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algo: Algo,
    /// Iteration count `T`; the trace holds states `t = 0..=T`.
    pub t_max: usize,
    /// Batch size `M`. The alternating algorithm always draws single
    /// samples and ignores this field.
    pub batch: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub init: DecisionPair,
    /// Probe jitter fed to the estimator's environment queries; never
    /// applied to the optimization iterates.
    pub dither: Option<f64>,
    /// Run halts with the diverged flag once `|x|` or `|objective|`
    /// exceeds this.
    pub divergence_guard: f64,
    /// Evaluate the primal metrics every this many iterations (the final
    /// state is always evaluated).
    pub metric_stride: usize,
    /// Draw a dedicated estimator sample in the alternating algorithm
    /// instead of reusing the `y`-step sample.
    pub aasgda_three_draw: bool,
    /// Tolerance for the inner solves behind `phi` / `grad_metric`.
    pub metric_tol: f64,
}

pub const DEFAULT_GUARD: f64 = 1e8;
pub const DEFAULT_STRIDE: usize = 100;

impl RunConfig {
    pub fn new(algo: Algo, t_max: usize, batch: usize, schedule: Schedule, seed: u64, init: DecisionPair) -> Self {
        RunConfig {
            algo,
            t_max,
            batch,
            schedule,
            seed,
            init,
            dither: None,
            divergence_guard: DEFAULT_GUARD,
            metric_stride: DEFAULT_STRIDE,
            aasgda_three_draw: false,
            metric_tol: crate::metrics::INNER_TOL,
        }
    }

    /// Strict validation used by the experiment harness: positive stepsizes,
    /// positive horizon and batch. The solver loops themselves tolerate
    /// degenerate zero stepsizes (the iterates just stay put).
    pub fn validate(&self) -> Result<()> {
        if self.t_max < 1 {
            return Err(Error::InvalidArgument("T must be >= 1".into()));
        }
        if self.batch < 1 {
            return Err(Error::InvalidArgument("M must be >= 1".into()));
        }
        if self.metric_stride < 1 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        if !self.divergence_guard.is_finite() || self.divergence_guard <= 0.0 {
            return Err(Error::InvalidArgument("divergence guard must be > 0".into()));
        }
        if let Schedule::Fixed { eta_x, eta_y } = self.schedule {
            if !eta_x.is_finite() || eta_x <= 0.0 || !eta_y.is_finite() || eta_y <= 0.0 {
                return Err(Error::InvalidArgument("stepsizes must be > 0".into()));
            }
        }
        if let Schedule::SpdDynamic { offset } = self.schedule {
            if !offset.is_finite() || offset <= 0.0 {
                return Err(Error::InvalidArgument("dynamic offset must be > 0".into()));
            }
        }
        if let Some(d) = self.dither {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::InvalidArgument("dither std must be > 0".into()));
            }
        }
        Ok(())
    }

    fn resolve_constant_stepsizes(&self, problem: &ProblemInstance) -> Result<(f64, f64)> {
        match &self.schedule {
            Schedule::Fixed { eta_x, eta_y } => Ok((*eta_x, *eta_y)),
            Schedule::NcSc => stepsizes_nc_sc(&problem.profile),
            Schedule::NcC => Ok(stepsizes_nc_c(self.t_max)),
            Schedule::NcPl => stepsizes_nc_pl(&problem.profile, self.t_max),
            Schedule::SpdDynamic { .. } => Err(Error::InvalidArgument(
                "the dynamic 1/(a+t) schedule applies to the SPD baseline only".into(),
            )),
        }
    }
}

/// One per-iteration record. `phi` and `grad_metric` are populated on
/// stride-evaluated iterations only.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub t: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub phi: Option<f64>,
    pub grad_metric: Option<f64>,
    pub est_err_x: f64,
    pub est_err_y: f64,
    pub objective: f64,
    pub diverged: bool,
}

/// Full record stream of one run plus budget accounting.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub env_samples: usize,
    pub estimator_updates: usize,
    /// Uniformly drawn iterate index `t >= 1` (the randomized output rule),
    /// drawn with the run's own seeded stream after the loop.
    pub sampled_t: usize,
    pub diverged: bool,
}

impl Trace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("trace always has the t=0 record")
    }

    pub fn sampled_record(&self) -> &TraceRecord {
        self.records
            .iter()
            .find(|r| r.t == self.sampled_t)
            .unwrap_or_else(|| self.last())
    }

    pub fn csv_header(n: usize, m: usize) -> String {
        let mut h = String::from("t");
        for i in 0..n {
            let _ = write!(h, ",x{i}");
        }
        for i in 0..m {
            let _ = write!(h, ",y{i}");
        }
        h.push_str(",phi,grad_metric,est_err_x,est_err_y,objective,diverged");
        h
    }

    /// Render the trace as CSV. Deterministic: identical traces yield
    /// byte-identical text. Floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let (n, m) = self
            .records
            .first()
            .map(|r| (r.x.len(), r.y.len()))
            .unwrap_or((0, 0));
        let mut out = Self::csv_header(n, m);
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{}", r.t);
            for v in r.x.iter() {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            for v in r.y.iter() {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            match r.phi {
                Some(v) => {
                    let _ = write!(out, ",{}", fmt_f64(v));
                }
                None => out.push(','),
            }
            match r.grad_metric {
                Some(v) => {
                    let _ = write!(out, ",{}", fmt_f64(v));
                }
                None => out.push(','),
            }
            let _ = writeln!(
                out,
                ",{},{},{},{}",
                fmt_f64(r.est_err_x),
                fmt_f64(r.est_err_y),
                fmt_f64(r.objective),
                r.diverged
            );
        }
        out
    }
}

/// 17-significant-digit float rendering; round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// A failed run carrying whatever trace prefix was recorded.
#[derive(Debug)]
pub struct RunFailure {
    pub partial: Trace,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run failed: {}", self.error)
    }
}

impl std::error::Error for RunFailure {}

pub type RunResult = std::result::Result<Trace, Box<RunFailure>>;

struct TraceBuilder<'p> {
    problem: &'p ProblemInstance,
    cfg: &'p RunConfig,
    records: Vec<TraceRecord>,
    env_samples: usize,
    estimator_updates: usize,
    diverged: bool,
}

impl<'p> TraceBuilder<'p> {
    fn new(problem: &'p ProblemInstance, cfg: &'p RunConfig) -> Self {
        TraceBuilder {
            problem,
            cfg,
            records: Vec::with_capacity(cfg.t_max + 1),
            env_samples: 0,
            estimator_updates: 0,
            diverged: false,
        }
    }

    /// Append the record for state `t`. Returns `true` if the divergence
    /// guard tripped and the run must halt.
    fn record(
        &mut self,
        t: usize,
        x: &DVector<f64>,
        y: &DVector<f64>,
        est: Option<&MapEstimate>,
        truth: &LocationScaleMap,
    ) -> Result<bool> {
        let objective = self
            .problem
            .exact_loss(x, y)
            .unwrap_or(f64::NAN);
        let guard = self.cfg.divergence_guard;
        let bad = !x.iter().all(|v| v.is_finite())
            || !y.iter().all(|v| v.is_finite())
            || x.norm() > guard
            || (objective.is_finite() && objective.abs() > guard)
            || (objective.is_nan() && self.problem.closed_forms.is_some());
        let evaluate = !bad && (t.is_multiple_of(self.cfg.metric_stride) || t == self.cfg.t_max);
        let (phi, grad_metric) = if evaluate {
            self.eval_metrics(x)?
        } else {
            (None, None)
        };
        let (est_err_x, est_err_y) = match est {
            Some(e) => e.estimation_error(truth),
            None => (f64::NAN, f64::NAN),
        };
        self.records.push(TraceRecord {
            t,
            x: x.clone(),
            y: y.clone(),
            phi,
            grad_metric,
            est_err_x,
            est_err_y,
            objective,
            diverged: bad,
        });
        if bad {
            self.diverged = true;
        }
        Ok(bad)
    }

    fn eval_metrics(&self, x: &DVector<f64>) -> Result<(Option<f64>, Option<f64>)> {
        if self.problem.closed_forms.is_none() {
            return Ok((None, None));
        }
        match self.problem.profile.concavity_class {
            ConcavityClass::StronglyConcave | ConcavityClass::Pl => {
                let report = inner_max(self.problem, x, self.cfg.metric_tol)?;
                let cf = self.problem.closed_forms.as_ref().expect("checked above");
                let grad = (cf.grad)(x, &report.y_star).0;
                Ok((Some(report.value), Some(grad.norm())))
            }
            ConcavityClass::Concave => {
                let report = inner_max(self.problem, x, self.cfg.metric_tol)?;
                let gm = if self.problem.n <= 4 {
                    Some(moreau_grad(
                        self.problem,
                        x,
                        self.problem.profile.ell,
                        crate::metrics::PROX_TOL,
                    )?)
                } else {
                    None
                };
                Ok((Some(report.value), gm))
            }
        }
    }

    fn finish(self, rng: &mut ChaCha8Rng) -> Trace {
        let last_t = self.records.last().map(|r| r.t).unwrap_or(0);
        let sampled_t = if last_t >= 1 {
            rng.random_range(1..=last_t)
        } else {
            0
        };
        Trace {
            records: self.records,
            env_samples: self.env_samples,
            estimator_updates: self.estimator_updates,
            sampled_t,
            diverged: self.diverged,
        }
    }
}

fn fail(builder: TraceBuilder<'_>, rng: &mut ChaCha8Rng, error: Error, t: usize) -> Box<RunFailure> {
    Box::new(RunFailure {
        partial: builder.finish(rng),
        error: error.at_iteration(t),
    })
}

fn check_estimate_dims(est: &MapEstimate, truth: &LocationScaleMap) -> Result<()> {
    if est.dims() != truth.dims() {
        let (d, n, m) = truth.dims();
        return Err(Error::DimensionMismatch {
            what: "map estimate",
            expected: d * (n + m + 1),
            found: {
                let (ed, en, em) = est.dims();
                ed * (en + em + 1)
            },
        });
    }
    Ok(())
}

fn dither_point(
    x: &DVector<f64>,
    y: &DVector<f64>,
    std: f64,
    rng: &mut ChaCha8Rng,
) -> (DVector<f64>, DVector<f64>) {
    let jitter = |v: &DVector<f64>, rng: &mut ChaCha8Rng| {
        DVector::from_iterator(
            v.len(),
            v.iter().map(|c| {
                let e: f64 = StandardNormal.sample(rng);
                c + std * e
            }),
        )
    };
    (jitter(x, rng), jitter(y, rng))
}

/// Simultaneous adaptive descent-ascent with minibatch plug-in gradients
/// and per-iteration map learning.
pub fn asgda_run(
    problem: &ProblemInstance,
    truth: &LocationScaleMap,
    mut est: MapEstimate,
    cfg: &RunConfig,
) -> RunResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut builder = TraceBuilder::new(problem, cfg);
    if cfg.algo != Algo::Asgda {
        return Err(fail(
            builder,
            &mut rng,
            Error::InvalidArgument("config algo is not asgda".into()),
            0,
        ));
    }
    let (eta_x, eta_y) = match cfg.resolve_constant_stepsizes(problem) {
        Ok(pair) => pair,
        Err(e) => return Err(fail(builder, &mut rng, e, 0)),
    };
    if let Err(e) = check_estimate_dims(&est, truth) {
        return Err(fail(builder, &mut rng, e, 0));
    }
    let mut x = cfg.init.x.clone();
    let mut y = match problem.y_set.project(&cfg.init.y) {
        Ok(y) => y,
        Err(e) => return Err(fail(builder, &mut rng, e, 0)),
    };

    for t in 0..cfg.t_max {
        match builder.record(t, &x, &y, Some(&est), truth) {
            Ok(true) => return Ok(builder.finish(&mut rng)),
            Ok(false) => {}
            Err(e) => return Err(fail(builder, &mut rng, e, t)),
        }
        let (probe_x, probe_y) = match cfg.dither {
            Some(std) => dither_point(&x, &y, std, &mut rng),
            None => (x.clone(), y.clone()),
        };
        let batch = match truth.sample(&probe_x, &probe_y, cfg.batch, &mut rng) {
            Ok(b) => b,
            Err(e) => return Err(fail(builder, &mut rng, e, t)),
        };
        builder.env_samples += batch.len();
        let outcome = (|| -> Result<(DVector<f64>, DVector<f64>)> {
            let (jx, jy) = est.jacobians();
            let gx = minibatch(|s| g_x_plugin(&problem.loss, jx, &x, &y, s), &batch)?;
            let gy = minibatch(|s| g_y_plugin(&problem.loss, jy, &x, &y, s), &batch)?;
            let x_next = &x - gx * eta_x;
            let y_next = problem.y_set.project(&(&y + gy * eta_y))?;
            Ok((x_next, y_next))
        })();
        let (x_next, y_next) = match outcome {
            Ok(pair) => pair,
            Err(e) => return Err(fail(builder, &mut rng, e, t)),
        };
        if let Err(e) = est.ols_update(&probe_x, &probe_y, &batch) {
            return Err(fail(builder, &mut rng, e, t));
        }
        builder.estimator_updates += 1;
        x = x_next;
        y = y_next;
    }
    if let Err(e) = builder.record(cfg.t_max, &x, &y, Some(&est), truth) {
        return Err(fail(builder, &mut rng, e, cfg.t_max));
    }
    Ok(builder.finish(&mut rng))
}

/// Alternating adaptive descent-ascent with single-sample gradients: the
/// `x` update sees `(x_t, y_t)`, the `y` update sees `(x_{t+1}, y_t)`, and
/// the estimator absorbs a sample conditioned on `(x_{t+1}, y_t)`. No
/// projection is applied (PL setting).
pub fn aasgda_run(
    problem: &ProblemInstance,
    truth: &LocationScaleMap,
    mut est: MapEstimate,
    cfg: &RunConfig,
) -> RunResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut builder = TraceBuilder::new(problem, cfg);
    if cfg.algo != Algo::Aasgda {
        return Err(fail(
            builder,
            &mut rng,
            Error::InvalidArgument("config algo is not aasgda".into()),
            0,
        ));
    }
    let (eta_x, eta_y) = match cfg.resolve_constant_stepsizes(problem) {
        Ok(pair) => pair,
        Err(e) => return Err(fail(builder, &mut rng, e, 0)),
    };
    if let Err(e) = check_estimate_dims(&est, truth) {
        return Err(fail(builder, &mut rng, e, 0));
    }
    // Probe jitter would decouple the y-step sample from its regressor, so
    // it forces the dedicated estimator draw.
    let three_draw = cfg.aasgda_three_draw || cfg.dither.is_some();
    let mut x = cfg.init.x.clone();
    let mut y = cfg.init.y.clone();

    for t in 0..cfg.t_max {
        match builder.record(t, &x, &y, Some(&est), truth) {
            Ok(true) => return Ok(builder.finish(&mut rng)),
            Ok(false) => {}
            Err(e) => return Err(fail(builder, &mut rng, e, t)),
        }
        let outcome = (|builder: &mut TraceBuilder<'_>,
                        est: &mut MapEstimate,
                        rng: &mut ChaCha8Rng|
         -> Result<(DVector<f64>, DVector<f64>)> {
            let zx = truth.sample(&x, &y, 1, rng)?;
            builder.env_samples += 1;
            let gx = g_x_plugin(&problem.loss, est.jacobians().0, &x, &y, &zx[0])?;
            let x_next = &x - gx * eta_x;
            let zy = truth.sample(&x_next, &y, 1, rng)?;
            builder.env_samples += 1;
            let gy = g_y_plugin(&problem.loss, est.jacobians().1, &x_next, &y, &zy[0])?;
            let y_next = &y + gy * eta_y;
            if three_draw {
                let (probe_x, probe_y) = match cfg.dither {
                    Some(std) => dither_point(&x_next, &y, std, rng),
                    None => (x_next.clone(), y.clone()),
                };
                let zest = truth.sample(&probe_x, &probe_y, 1, rng)?;
                builder.env_samples += 1;
                est.ols_update(&probe_x, &probe_y, &zest)?;
            } else {
                est.ols_update(&x_next, &y, &zy)?;
            }
            builder.estimator_updates += 1;
            Ok((x_next, y_next))
        })(&mut builder, &mut est, &mut rng);
        match outcome {
            Ok((x_next, y_next)) => {
                x = x_next;
                y = y_next;
            }
            Err(e) => return Err(fail(builder, &mut rng, e, t)),
        }
    }
    if let Err(e) = builder.record(cfg.t_max, &x, &y, Some(&est), truth) {
        return Err(fail(builder, &mut rng, e, cfg.t_max));
    }
    Ok(builder.finish(&mut rng))
}

/// Stochastic primal-dual baseline: simultaneous updates on the naive
/// integrand gradients with no distribution-map correction or learning.
/// Seeks the point that is optimal against the distribution it induces,
/// which for shifted objectives differs from a stationary point of the
/// primal function.
pub fn spd_run(problem: &ProblemInstance, truth: &LocationScaleMap, cfg: &RunConfig) -> RunResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut builder = TraceBuilder::new(problem, cfg);
    if cfg.algo != Algo::Spd {
        return Err(fail(
            builder,
            &mut rng,
            Error::InvalidArgument("config algo is not spd".into()),
            0,
        ));
    }
    let eta_at: Box<dyn Fn(usize) -> (f64, f64)> = match &cfg.schedule {
        Schedule::Fixed { eta_x, eta_y } => {
            let (ex, ey) = (*eta_x, *eta_y);
            Box::new(move |_| (ex, ey))
        }
        Schedule::SpdDynamic { offset } => {
            let a = *offset;
            Box::new(move |t| {
                let e = 1.0 / (a + t as f64);
                (e, e)
            })
        }
        other => {
            return Err(fail(
                builder,
                &mut rng,
                Error::InvalidArgument(format!(
                    "SPD supports fixed or dynamic 1/(a+t) stepsizes, got {other:?}"
                )),
                0,
            ))
        }
    };
    let mut x = cfg.init.x.clone();
    let mut y = match problem.y_set.project(&cfg.init.y) {
        Ok(y) => y,
        Err(e) => return Err(fail(builder, &mut rng, e, 0)),
    };
    for t in 0..cfg.t_max {
        match builder.record(t, &x, &y, None, truth) {
            Ok(true) => return Ok(builder.finish(&mut rng)),
            Ok(false) => {}
            Err(e) => return Err(fail(builder, &mut rng, e, t)),
        }
        let batch = match truth.sample(&x, &y, cfg.batch, &mut rng) {
            Ok(b) => b,
            Err(e) => return Err(fail(builder, &mut rng, e, t)),
        };
        builder.env_samples += batch.len();
        let outcome = (|| -> Result<(DVector<f64>, DVector<f64>)> {
            let gx = minibatch(|s| Ok((problem.loss.grad_x)(&x, &y, s)), &batch)?;
            let gy = minibatch(|s| Ok((problem.loss.grad_y)(&x, &y, s)), &batch)?;
            let (ex, ey) = eta_at(t);
            let x_next = &x - gx * ex;
            let y_next = problem.y_set.project(&(&y + gy * ey))?;
            Ok((x_next, y_next))
        })();
        match outcome {
            Ok((x_next, y_next)) => {
                x = x_next;
                y = y_next;
            }
            Err(e) => return Err(fail(builder, &mut rng, e, t)),
        }
    }
    if let Err(e) = builder.record(cfg.t_max, &x, &y, None, truth) {
        return Err(fail(builder, &mut rng, e, cfg.t_max));
    }
    Ok(builder.finish(&mut rng))
}

/// Dispatch on `cfg.algo`, zero-initializing the map estimate for the
/// adaptive algorithms.
pub fn run(problem: &ProblemInstance, cfg: &RunConfig) -> RunResult {
    match cfg.algo {
        Algo::Asgda => asgda_run(problem, &problem.truth, MapEstimate::zeroed_for(&problem.truth), cfg),
        Algo::Aasgda => aasgda_run(problem, &problem.truth, MapEstimate::zeroed_for(&problem.truth), cfg),
        Algo::Spd => spd_run(problem, &problem.truth, cfg),
    }
}
