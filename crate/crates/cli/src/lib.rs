//! Batch experiment harness.
//!
//! Experiments are described by plain-text key-value spec files plus
//! command-line overrides; traces go to CSV, summaries to JSON. Exit codes:
//! 0 success, 1 runtime failure, 2 usage error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use smdd_core::bench::{make_by_name, ProblemInstance, PROBLEM_NAMES};
use smdd_core::metrics::spd_residual;
use smdd_core::solvers::{fmt_f64, run, Algo, RunConfig, Schedule, Trace};
use smdd_core::DecisionPair;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "smdd",
    about = "Stochastic minimax solvers under decision-dependent sampling",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Execute one experiment and write trace.csv + summary.json.
    Run {
        /// Spec file (key = value lines); flags override its entries.
        spec: Option<PathBuf>,
        #[command(flatten)]
        overrides: SpecOverrides,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run several specs on the same problem and join their metrics.
    Compare {
        /// Two or more spec files.
        specs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: SpecOverrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cartesian-product sweep over stepsizes, batch size, and seeds.
    Sweep {
        /// Base spec file.
        spec: PathBuf,
        #[command(flatten)]
        overrides: SpecOverrides,
        /// Comma-separated grid values; defaults to the base spec's value.
        #[arg(long = "eta-x-grid", value_delimiter = ',')]
        eta_x_grid: Vec<f64>,
        #[arg(long = "eta-y-grid", value_delimiter = ',')]
        eta_y_grid: Vec<f64>,
        #[arg(long = "M-grid", value_delimiter = ',')]
        m_grid: Vec<usize>,
        #[arg(long = "seed-grid", value_delimiter = ',')]
        seed_grid: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant check suite and print a pass/fail table.
    Check {
        /// Restrict to one module: core | distmap | gradients | solvers | metrics | bench.
        #[arg(long)]
        only: Option<String>,
    },
}

/// Flag-level overrides applied on top of the spec file.
#[derive(Args, Debug, Default, Clone)]
pub struct SpecOverrides {
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long = "eta-x")]
    pub eta_x: Option<f64>,
    #[arg(long = "eta-y")]
    pub eta_y: Option<f64>,
    /// fixed | nc_sc | nc_c | nc_pl | spd_dynamic:<offset>
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub dither: Option<f64>,
    #[arg(long)]
    pub guard: Option<f64>,
    #[arg(long = "problem-seed")]
    pub problem_seed: Option<u64>,
    #[arg(long = "init-x", allow_hyphen_values = true)]
    pub init_x: Option<String>,
    #[arg(long = "init-y", allow_hyphen_values = true)]
    pub init_y: Option<String>,
    #[arg(long = "three-draw")]
    pub three_draw: bool,
}

/// One experiment, fully resolved. Serialized into the summary so a run can
/// be reproduced from its JSON alone.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub problem: String,
    pub problem_seed: u64,
    pub algo: String,
    pub t: usize,
    pub m: usize,
    pub schedule: String,
    pub eta_x: Option<f64>,
    pub eta_y: Option<f64>,
    pub seed: u64,
    pub init_x: Vec<f64>,
    pub init_y: Vec<f64>,
    pub stride: usize,
    pub dither: Option<f64>,
    pub guard: f64,
    pub three_draw: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            problem: String::new(),
            problem_seed: 1,
            algo: "asgda".into(),
            t: 10_000,
            m: 200,
            schedule: "nc_sc".into(),
            eta_x: None,
            eta_y: None,
            seed: 0,
            init_x: Vec::new(),
            init_y: Vec::new(),
            stride: smdd_core::solvers::DEFAULT_STRIDE,
            dither: None,
            guard: smdd_core::solvers::DEFAULT_GUARD,
            three_draw: false,
        }
    }
}

fn parse_vec(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| anyhow!("invalid number `{t}` in vector"))
        })
        .collect()
}

impl ExperimentSpec {
    /// Parse a plain-text spec document: `key = value` lines, `#` comments.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut spec = ExperimentSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            let ctx = |what: &str| format!("line {}: invalid {what} `{value}`", lineno + 1);
            match key {
                "problem" => spec.problem = value.to_string(),
                "problem_seed" => spec.problem_seed = value.parse().with_context(|| ctx("integer"))?,
                "algo" => spec.algo = value.to_string(),
                "T" => spec.t = value.parse().with_context(|| ctx("integer"))?,
                "M" => spec.m = value.parse().with_context(|| ctx("integer"))?,
                "schedule" => spec.schedule = value.to_string(),
                "eta_x" => spec.eta_x = Some(value.parse().with_context(|| ctx("number"))?),
                "eta_y" => spec.eta_y = Some(value.parse().with_context(|| ctx("number"))?),
                "seed" => spec.seed = value.parse().with_context(|| ctx("integer"))?,
                "init_x" => spec.init_x = parse_vec(value)?,
                "init_y" => spec.init_y = parse_vec(value)?,
                "stride" => spec.stride = value.parse().with_context(|| ctx("integer"))?,
                "dither" => spec.dither = Some(value.parse().with_context(|| ctx("number"))?),
                "guard" => spec.guard = value.parse().with_context(|| ctx("number"))?,
                "three_draw" => spec.three_draw = value.parse().with_context(|| ctx("bool"))?,
                other => bail!("line {}: unknown key `{other}`", lineno + 1),
            }
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read spec file {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in spec file {}", path.display()))
    }

    pub fn apply_overrides(&mut self, ov: &SpecOverrides) -> anyhow::Result<()> {
        if let Some(v) = &ov.problem {
            self.problem = v.clone();
        }
        if let Some(v) = &ov.algo {
            self.algo = v.clone();
        }
        if let Some(v) = ov.t {
            self.t = v;
        }
        if let Some(v) = ov.m {
            self.m = v;
        }
        if let Some(v) = ov.eta_x {
            self.eta_x = Some(v);
        }
        if let Some(v) = ov.eta_y {
            self.eta_y = Some(v);
        }
        if let Some(v) = &ov.schedule {
            self.schedule = v.clone();
        }
        if let Some(v) = ov.seed {
            self.seed = v;
        }
        if let Some(v) = ov.stride {
            self.stride = v;
        }
        if let Some(v) = ov.dither {
            self.dither = Some(v);
        }
        if let Some(v) = ov.guard {
            self.guard = v;
        }
        if let Some(v) = ov.problem_seed {
            self.problem_seed = v;
        }
        if let Some(v) = &ov.init_x {
            self.init_x = parse_vec(v)?;
        }
        if let Some(v) = &ov.init_y {
            self.init_y = parse_vec(v)?;
        }
        if ov.three_draw {
            self.three_draw = true;
        }
        Ok(())
    }

    fn parse_schedule(&self) -> anyhow::Result<Schedule> {
        let s = self.schedule.to_ascii_lowercase();
        if s == "fixed" {
            let (ex, ey) = (
                self.eta_x
                    .ok_or_else(|| anyhow!("schedule `fixed` needs eta_x"))?,
                self.eta_y
                    .ok_or_else(|| anyhow!("schedule `fixed` needs eta_y"))?,
            );
            return Ok(Schedule::Fixed { eta_x: ex, eta_y: ey });
        }
        if s == "nc_sc" {
            return Ok(Schedule::NcSc);
        }
        if s == "nc_c" {
            return Ok(Schedule::NcC);
        }
        if s == "nc_pl" {
            return Ok(Schedule::NcPl);
        }
        if let Some(rest) = s.strip_prefix("spd_dynamic:") {
            let offset: f64 = rest
                .parse()
                .map_err(|_| anyhow!("invalid spd_dynamic offset `{rest}`"))?;
            return Ok(Schedule::SpdDynamic { offset });
        }
        bail!("unknown schedule `{}`; valid: fixed | nc_sc | nc_c | nc_pl | spd_dynamic:<a>", self.schedule)
    }

    fn init_vector(given: &[f64], dim: usize, what: &str) -> anyhow::Result<smdd_core::nalgebra::DVector<f64>> {
        match given.len() {
            0 => Ok(smdd_core::nalgebra::DVector::zeros(dim)),
            1 => Ok(smdd_core::nalgebra::DVector::from_element(dim, given[0])),
            k if k == dim => Ok(smdd_core::nalgebra::DVector::from_row_slice(given)),
            k => bail!("{what} has {k} entries, problem needs {dim} (or 1 to broadcast)"),
        }
    }

    /// Instantiate the problem and the run configuration.
    pub fn build(&self) -> anyhow::Result<(ProblemInstance, RunConfig)> {
        if self.problem.is_empty() {
            bail!(
                "no problem selected; valid names: {}",
                PROBLEM_NAMES.join(" | ")
            );
        }
        let problem = make_by_name(&self.problem, self.problem_seed)
            .map_err(|e| anyhow!("{e}"))?;
        problem.validate().map_err(|e| anyhow!("{e}"))?;
        let algo = Algo::parse(&self.algo).map_err(|e| anyhow!("{e}"))?;
        let schedule = self.parse_schedule()?;
        let init = DecisionPair::new(
            Self::init_vector(&self.init_x, problem.n, "init_x")?,
            Self::init_vector(&self.init_y, problem.m, "init_y")?,
        )
        .map_err(|e| anyhow!("{e}"))?;
        let m = if algo == Algo::Aasgda { 1 } else { self.m };
        let mut cfg = RunConfig::new(algo, self.t, m, schedule, self.seed, init);
        cfg.dither = self.dither;
        cfg.divergence_guard = self.guard;
        cfg.metric_stride = self.stride;
        cfg.aasgda_three_draw = self.three_draw;
        cfg.validate().map_err(|e| anyhow!("{e}"))?;
        Ok((problem, cfg))
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub spec: ExperimentSpec,
    pub dims: (usize, usize, usize),
    pub resolved_eta_x: Option<f64>,
    pub resolved_eta_y: Option<f64>,
    pub records: usize,
    pub env_samples: usize,
    pub estimator_updates: usize,
    pub diverged: bool,
    pub sampled_t: usize,
    pub final_t: usize,
    pub final_objective: Option<f64>,
    pub final_phi: Option<f64>,
    pub final_grad_metric: Option<f64>,
    pub min_grad_metric: Option<f64>,
    pub final_est_err_x: Option<f64>,
    pub final_est_err_y: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

fn not_nan(v: f64) -> Option<f64> {
    if v.is_nan() {
        None
    } else {
        Some(v)
    }
}

fn summarize(
    spec: &ExperimentSpec,
    problem: &ProblemInstance,
    cfg: &RunConfig,
    trace: &Trace,
    wall_time_s: f64,
    error: Option<String>,
) -> RunSummary {
    let last = trace.records.last();
    let min_grad = trace
        .records
        .iter()
        .filter_map(|r| r.grad_metric)
        .fold(f64::INFINITY, f64::min);
    let resolved = match &cfg.schedule {
        Schedule::Fixed { eta_x, eta_y } => Some((*eta_x, *eta_y)),
        Schedule::NcSc => smdd_core::stepsizes_nc_sc(&problem.profile).ok(),
        Schedule::NcC => Some(smdd_core::stepsizes_nc_c(cfg.t_max)),
        Schedule::NcPl => smdd_core::stepsizes_nc_pl(&problem.profile, cfg.t_max).ok(),
        Schedule::SpdDynamic { offset } => Some((1.0 / offset, 1.0 / offset)),
    };
    RunSummary {
        spec: spec.clone(),
        dims: (problem.n, problem.m, problem.d),
        resolved_eta_x: resolved.map(|r| r.0),
        resolved_eta_y: resolved.map(|r| r.1),
        records: trace.records.len(),
        env_samples: trace.env_samples,
        estimator_updates: trace.estimator_updates,
        diverged: trace.diverged,
        sampled_t: trace.sampled_t,
        final_t: last.map(|r| r.t).unwrap_or(0),
        final_objective: last.and_then(|r| not_nan(r.objective)),
        final_phi: last.and_then(|r| r.phi),
        final_grad_metric: last.and_then(|r| r.grad_metric),
        min_grad_metric: if min_grad.is_finite() { Some(min_grad) } else { None },
        final_est_err_x: last.and_then(|r| not_nan(r.est_err_x)),
        final_est_err_y: last.and_then(|r| not_nan(r.est_err_y)),
        wall_time_s,
        error,
    }
}

fn write_outputs(dir: &Path, trace: &Trace, summary: &RunSummary) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.csv"), trace.to_csv())?;
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(summary)?,
    )?;
    Ok(())
}

/// Execute one spec; always flushes whatever trace prefix exists.
fn execute(spec: &ExperimentSpec, dir: &Path) -> anyhow::Result<RunSummary> {
    let (problem, cfg) = spec.build()?;
    let start = std::time::Instant::now();
    match run(&problem, &cfg) {
        Ok(trace) => {
            let summary = summarize(spec, &problem, &cfg, &trace, start.elapsed().as_secs_f64(), None);
            write_outputs(dir, &trace, &summary)?;
            Ok(summary)
        }
        Err(failure) => {
            let summary = summarize(
                spec,
                &problem,
                &cfg,
                &failure.partial,
                start.elapsed().as_secs_f64(),
                Some(failure.error.to_string()),
            );
            write_outputs(dir, &failure.partial, &summary)?;
            Err(anyhow!("{}", failure.error))
        }
    }
}

pub fn cmd_run(spec_path: Option<&Path>, overrides: &SpecOverrides, out: &Path) -> anyhow::Result<i32> {
    let mut spec = match spec_path {
        Some(p) => ExperimentSpec::load(p)?,
        None => ExperimentSpec::default(),
    };
    spec.apply_overrides(overrides)?;
    let summary = execute(&spec, out)?;
    println!(
        "run complete: T={} final objective {} grad metric {} -> {}",
        summary.final_t,
        summary
            .final_objective
            .map(|v| format!("{v:.6e}"))
            .unwrap_or_else(|| "n/a".into()),
        summary
            .final_grad_metric
            .map(|v| format!("{v:.6e}"))
            .unwrap_or_else(|| "n/a".into()),
        out.display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_compare(
    spec_paths: &[PathBuf],
    overrides: &SpecOverrides,
    out: &Path,
) -> anyhow::Result<i32> {
    if spec_paths.len() < 2 {
        bail!("compare needs at least two specs");
    }
    let mut specs = Vec::new();
    for p in spec_paths {
        let mut s = ExperimentSpec::load(p)?;
        s.apply_overrides(overrides)?;
        specs.push(s);
    }
    let first_problem = &specs[0].problem;
    if specs.iter().any(|s| &s.problem != first_problem) {
        bail!("compare requires all specs to target the same problem");
    }
    fs::create_dir_all(out)?;

    let labels: Vec<String> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| format!("run{:02}_{}_{}", i, s.algo, s.schedule.replace(':', "_")))
        .collect();
    let results: Vec<anyhow::Result<(RunSummary, Trace, ProblemInstance)>> = specs
        .par_iter()
        .zip(labels.par_iter())
        .map(|(spec, label)| {
            let (problem, cfg) = spec.build()?;
            let start = std::time::Instant::now();
            match run(&problem, &cfg) {
                Ok(trace) => {
                    let summary =
                        summarize(spec, &problem, &cfg, &trace, start.elapsed().as_secs_f64(), None);
                    write_outputs(&out.join(label), &trace, &summary)?;
                    Ok((summary, trace, problem))
                }
                Err(failure) => {
                    let summary = summarize(
                        spec,
                        &problem,
                        &cfg,
                        &failure.partial,
                        start.elapsed().as_secs_f64(),
                        Some(failure.error.to_string()),
                    );
                    write_outputs(&out.join(label), &failure.partial, &summary)?;
                    Err(anyhow!("{label}: {}", failure.error))
                }
            }
        })
        .collect();

    let mut ok = Vec::new();
    for r in results {
        ok.push(r?);
    }

    // Joined long-format CSV at metric-evaluated iterations.
    let mut ts: Vec<usize> = ok
        .iter()
        .flat_map(|(_, trace, _)| trace.records.iter().filter(|r| r.phi.is_some()).map(|r| r.t))
        .collect();
    ts.sort_unstable();
    ts.dedup();
    let mut csv = String::from("t");
    for label in &labels {
        let _ = write!(
            csv,
            ",{label}_phi,{label}_grad_metric,{label}_objective,{label}_spd_residual"
        );
    }
    csv.push('\n');
    for &t in &ts {
        let _ = write!(csv, "{t}");
        for (_, trace, problem) in &ok {
            match trace.records.iter().find(|r| r.t == t && r.phi.is_some()) {
                Some(r) => {
                    let resid = spd_residual(problem, &r.x, &r.y, None).ok();
                    let _ = write!(
                        csv,
                        ",{},{},{},{}",
                        r.phi.map(fmt_f64).unwrap_or_default(),
                        r.grad_metric.map(fmt_f64).unwrap_or_default(),
                        fmt_f64(r.objective),
                        resid.map(fmt_f64).unwrap_or_default(),
                    );
                }
                None => csv.push_str(",,,,"),
            }
        }
        csv.push('\n');
    }
    fs::write(out.join("comparison.csv"), csv)?;
    println!("compared {} runs -> {}", ok.len(), out.display());
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep(
    spec_path: &Path,
    overrides: &SpecOverrides,
    eta_x_grid: &[f64],
    eta_y_grid: &[f64],
    m_grid: &[usize],
    seed_grid: &[u64],
    out: &Path,
) -> anyhow::Result<i32> {
    let mut base = ExperimentSpec::load(spec_path)?;
    base.apply_overrides(overrides)?;
    fs::create_dir_all(out)?;

    // Empty grids fall back to the base spec's single value.
    let ex_grid: Vec<Option<f64>> = if eta_x_grid.is_empty() {
        vec![None]
    } else {
        eta_x_grid.iter().copied().map(Some).collect()
    };
    let ey_grid: Vec<Option<f64>> = if eta_y_grid.is_empty() {
        vec![None]
    } else {
        eta_y_grid.iter().copied().map(Some).collect()
    };
    let mm_grid: Vec<Option<usize>> = if m_grid.is_empty() {
        vec![None]
    } else {
        m_grid.iter().copied().map(Some).collect()
    };
    let ss_grid: Vec<Option<u64>> = if seed_grid.is_empty() {
        vec![None]
    } else {
        seed_grid.iter().copied().map(Some).collect()
    };

    let mut cells = Vec::new();
    for &ex in &ex_grid {
        for &ey in &ey_grid {
            for &m in &mm_grid {
                for &seed in &ss_grid {
                    let mut spec = base.clone();
                    if ex.is_some() || ey.is_some() {
                        spec.schedule = "fixed".into();
                        spec.eta_x = ex.or(spec.eta_x);
                        spec.eta_y = ey.or(spec.eta_y);
                    }
                    if let Some(m) = m {
                        spec.m = m;
                    }
                    if let Some(s) = seed {
                        spec.seed = s;
                    }
                    cells.push(spec);
                }
            }
        }
    }

    let results: Vec<(usize, Result<RunSummary, String>)> = cells
        .par_iter()
        .enumerate()
        .map(|(idx, spec)| {
            let dir = out.join(format!("cell_{idx:03}"));
            let r = execute(spec, &dir).map_err(|e| e.to_string());
            (idx, r)
        })
        .collect();

    let mut csv = String::from(
        "cell,eta_x,eta_y,M,seed,status,final_t,final_objective,final_phi,final_grad_metric,min_grad_metric,diverged\n",
    );
    let mut failures = 0usize;
    let mut rows: Vec<(usize, String)> = Vec::new();
    for (idx, result) in results {
        let spec = &cells[idx];
        let mut row = format!(
            "{idx},{},{},{},{}",
            spec.eta_x.map(fmt_f64).unwrap_or_default(),
            spec.eta_y.map(fmt_f64).unwrap_or_default(),
            spec.m,
            spec.seed
        );
        match result {
            Ok(s) => {
                let _ = write!(
                    row,
                    ",ok,{},{},{},{},{},{}",
                    s.final_t,
                    s.final_objective.map(fmt_f64).unwrap_or_default(),
                    s.final_phi.map(fmt_f64).unwrap_or_default(),
                    s.final_grad_metric.map(fmt_f64).unwrap_or_default(),
                    s.min_grad_metric.map(fmt_f64).unwrap_or_default(),
                    s.diverged
                );
            }
            Err(e) => {
                failures += 1;
                let _ = write!(row, ",error: {},,,,,", e.replace(',', ";"));
            }
        }
        row.push('\n');
        rows.push((idx, row));
    }
    rows.sort_by_key(|(idx, _)| *idx);
    for (_, row) in rows {
        csv.push_str(&row);
    }
    fs::write(out.join("sweep.csv"), csv)?;
    println!(
        "sweep complete: {} cells ({failures} flagged) -> {}",
        cells.len(),
        out.display()
    );
    Ok(EXIT_OK)
}

pub fn cmd_check(only: Option<&str>) -> anyhow::Result<i32> {
    if let Some(module) = only {
        if !smdd_core::checks::module_names().contains(&module) {
            bail!(
                "unknown module `{module}`; valid: {}",
                smdd_core::checks::module_names().join(" | ")
            );
        }
    }
    let results = smdd_core::checks::run_all(only);
    let mut failed = 0usize;
    println!("{:<10} {:<36} {:<6} detail", "module", "check", "status");
    for r in &results {
        if !r.passed {
            failed += 1;
        }
        println!(
            "{:<10} {:<36} {:<6} {}",
            r.module,
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.detail
        );
    }
    println!(
        "{} checks, {} failed",
        results.len(),
        failed
    );
    Ok(if failed == 0 { EXIT_OK } else { EXIT_RUNTIME })
}

/// Entry point shared by the binary and the integration tests.
pub fn dispatch(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Run { spec, overrides, out } => cmd_run(spec.as_deref(), overrides, out),
        Command::Compare { specs, overrides, out } => cmd_compare(specs, overrides, out),
        Command::Sweep {
            spec,
            overrides,
            eta_x_grid,
            eta_y_grid,
            m_grid,
            seed_grid,
            out,
        } => cmd_sweep(spec, overrides, eta_x_grid, eta_y_grid, m_grid, seed_grid, out),
        Command::Check { only } => cmd_check(only.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Configuration and lookup problems are usage errors; anything
            // that happened mid-run is a runtime failure.
            let msg = format!("{e:#}");
            if msg.contains("unknown problem")
                || msg.contains("unknown schedule")
                || msg.contains("unknown algorithm")
                || msg.contains("unknown module")
                || msg.contains("needs at least two specs")
                || msg.contains("same problem")
                || msg.contains("no problem selected")
                || msg.contains("spec file")
                || msg.contains("invalid")
                || msg.contains("must be")
                || msg.contains("needs eta")
            {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing_round_trip() {
        let text = "\
# comment
problem = quadratic_sc
algo = asgda
T = 100          # inline comment
M = 8
schedule = nc_sc
seed = 5
init_x = 5
init_y = 5
";
        let spec = ExperimentSpec::parse(text).unwrap();
        assert_eq!(spec.problem, "quadratic_sc");
        assert_eq!(spec.t, 100);
        assert_eq!(spec.m, 8);
        let (problem, cfg) = spec.build().unwrap();
        assert_eq!(problem.n, 1);
        assert_eq!(cfg.seed, 5);
    }

    #[test]
    fn spec_rejects_unknown_key() {
        assert!(ExperimentSpec::parse("nonsense = 1").is_err());
    }

    #[test]
    fn spec_rejects_zero_stepsize() {
        let text = "problem = quadratic_sc\nschedule = fixed\neta_x = 0\neta_y = 0.1\n";
        let spec = ExperimentSpec::parse(text).unwrap();
        assert!(spec.build().is_err());
    }

    #[test]
    fn init_broadcast_and_dimension_check() {
        let mut spec = ExperimentSpec {
            problem: "election".into(),
            algo: "aasgda".into(),
            schedule: "nc_pl".into(),
            t: 2,
            ..Default::default()
        };
        spec.init_x = vec![0.5];
        spec.init_y = vec![];
        let (problem, cfg) = spec.build().unwrap();
        assert_eq!(problem.n, 10);
        assert!(cfg.init.x.iter().all(|v| *v == 0.5));
        spec.init_x = vec![1.0, 2.0];
        assert!(spec.build().is_err());
    }

    #[test]
    fn schedule_parsing() {
        let mut spec = ExperimentSpec {
            problem: "quadratic_sc".into(),
            algo: "spd".into(),
            ..Default::default()
        };
        spec.schedule = "spd_dynamic:80000".into();
        let (_, cfg) = spec.build().unwrap();
        assert!(matches!(cfg.schedule, Schedule::SpdDynamic { offset } if offset == 8e4));
        spec.schedule = "bogus".into();
        assert!(spec.build().is_err());
    }
}
