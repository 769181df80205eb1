//! The experiment pipeline: patterns, convex solve, certificate,
//! reconstruction and SGD trials, with every stage's output written to disk.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cvxnn::arrangements::{adaptive_flip, default_margin, enumerate_exact, harvest_patterns, region_count_bound, sample_patterns};
use cvxnn::baseline::{init_gaussian, train_linear_cnn_gd, train_sgd, LinearCnnConfig, TrainConfig};
use cvxnn::cnn::{
    circulant_patches, effective_filter, extract_patches, stack_separable, train_circular_cnn,
    train_linear_cnn, CirculantSpec, PatchSet,
};
use cvxnn::network::reconstruct;
use cvxnn::numerics::svd;
use cvxnn::program::{dual_certificate_with, objective, default_gauge_beta, gauge_value, polar_support};
use cvxnn::solvers::{nuclear_dual_check, solve_group_cone};
use cvxnn::{ArrangementSet, ConvexTrainingProblem, LossKind, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ModelKind, PatternSource};
use crate::data::{dataset_2d_synthetic, dataset_paper_1d, load_csv, DataError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Dataset,
    Patterns,
    Convex,
    Certificate,
    Reconstruct,
    Sgd,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        write!(f, "{}", s.as_str().unwrap_or("unknown"))
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct RunError {
    pub stage: Stage,
    pub message: String,
}

impl RunError {
    fn at(stage: Stage) -> impl FnOnce(String) -> RunError {
        move |message| RunError { stage, message }
    }

    /// Configuration and input problems exit with 1, solver failures with 2.
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Config | Stage::Dataset | Stage::Output => 1,
            _ => 2,
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError {
            stage: Stage::Config,
            message: e.to_string(),
        }
    }
}

/// Which parts of the pipeline run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pipeline {
    Solve,
    Sgd,
    Compare,
}

impl Pipeline {
    fn convex(self) -> bool {
        self != Pipeline::Sgd
    }

    fn sgd(self) -> bool {
        self != Pipeline::Solve
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexReport {
    pub optimum: f64,
    pub certified_gap: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Neurons (ReLU models), rank of `Z` (linear CNN) or nonzero DFT
    /// coefficients (circular CNN) of the optimal solution.
    pub m_star: usize,
    /// Nonconvex cost of the reconstructed network (ReLU models).
    pub reconstructed_cost: Option<f64>,
    /// Certified lower bound on the nonconvex optimum (ReLU models).
    pub lower_bound: Option<f64>,
    pub certificate_valid: Option<bool>,
    pub trace_file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub final_objective: f64,
    /// `final_objective − optimum` when the convex program was solved.
    pub excess: Option<f64>,
    pub diverged: bool,
    pub trace_file: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub patterns: f64,
    pub convex: f64,
    pub sgd: Vec<f64>,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pipeline: Pipeline,
    pub model: ModelKind,
    pub loss: LossKind,
    pub beta: f64,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub pattern_source: Option<String>,
    pub pattern_count: Option<usize>,
    pub convex: Option<ConvexReport>,
    pub sgd: Vec<TrialReport>,
    /// Everything that varies between identical runs lives here.
    pub wall_ms: WallTimes,
}

impl RunReport {
    /// Whether the convex solve, if any, met its tolerance.
    pub fn converged(&self) -> bool {
        self.convex.as_ref().is_none_or(|c| c.converged)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerateReport {
    pub n: usize,
    pub d: usize,
    pub pattern_source: String,
    pub pattern_count: usize,
    /// `2 Σ_{k<r} C(n−1, k)` at the numerical rank `r` of the data.
    pub general_position_count: Option<u64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub n: usize,
    pub d: usize,
    pub beta_small: f64,
    pub gauge: f64,
    pub polar_support: f64,
    pub polar_samples: usize,
    pub relative_difference: f64,
    pub wall_ms: f64,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(Matrix, Vec<f64>), DataError> {
    let ds = &cfg.dataset;
    let (x, y) = match (&ds.builtin, &ds.csv) {
        (Some(b), _) => match b.synthetic_kind() {
            None => dataset_paper_1d(),
            Some(kind) => dataset_2d_synthetic(kind, ds.n.unwrap_or(0), cfg.seed)?,
        },
        (None, Some(path)) => load_csv(path, ds.label.as_deref().unwrap_or(""))?,
        (None, None) => return Err(DataError::Invalid("no dataset given".into())),
    };
    let x = if ds.append_ones { x.with_constant_column(1.0) } else { x };
    Ok((x, y))
}

fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: cfg.sgd.learning_rate,
        batch_size: cfg.sgd.batch_size,
        epochs: cfg.sgd.epochs,
        seed,
        loss: cfg.loss,
        beta: cfg.beta,
        m: cfg.sgd.m,
        init_scale: cfg.sgd.init_scale,
    }
}

fn cnn_config(cfg: &ExperimentConfig, seed: u64) -> LinearCnnConfig {
    LinearCnnConfig {
        m: cfg.sgd.m,
        learning_rate: cfg.sgd.learning_rate,
        iterations: cfg.sgd.epochs,
        seed,
        init_scale: cfg.sgd.init_scale,
    }
}

pub fn acquire_patterns(cfg: &ExperimentConfig, x: &Matrix, y: &[f64]) -> cvxnn::Result<ArrangementSet> {
    Ok(match &cfg.patterns {
        PatternSource::Exact => enumerate_exact(x, default_margin(x))?,
        PatternSource::Sample { count } => sample_patterns(x, *count, cfg.seed)?,
        PatternSource::Alg1 => {
            let (net, _) = train_sgd(x, y, &train_config(cfg, cfg.seed))?;
            harvest_patterns(x, &net)?
        }
        PatternSource::Alg2 => {
            let net = init_gaussian(x.cols(), cfg.sgd.m, cfg.seed, cfg.sgd.init_scale)?;
            harvest_patterns(x, &net)?
        }
        PatternSource::Alg3 { quantile } => {
            let (net, _) = train_sgd(x, y, &train_config(cfg, cfg.seed))?;
            adaptive_flip(x, &net, *quantile)?
        }
    })
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf, RunError> {
    let out = cfg.out.clone().ok_or_else(|| RunError {
        stage: Stage::Config,
        message: "no output directory: set `out` in the config or pass --out".into(),
    })?;
    std::fs::create_dir_all(&out).map_err(|e| RunError {
        stage: Stage::Output,
        message: format!("cannot create {}: {e}", out.display()),
    })?;
    Ok(out)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), RunError> {
    std::fs::write(dir.join(name), contents).map_err(|e| RunError {
        stage: Stage::Output,
        message: format!("cannot write {name}: {e}"),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// `iteration,objective` with 17 significant digits.
fn objective_csv(trace: &[f64]) -> String {
    let mut s = String::from("iteration,objective\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(s, "{i},{v:.16e}");
    }
    s
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Records a failure in `error.json` next to whatever was already written.
fn record_failure(dir: &Path, err: &RunError) {
    let body = serde_json::json!({ "stage": err.stage, "message": err.message });
    let _ = std::fs::write(dir.join("error.json"), to_json(&body));
}

fn with_error_file<T>(dir: &Path, result: Result<T, RunError>) -> Result<T, RunError> {
    if let Err(e) = &result {
        record_failure(dir, e);
    }
    result
}

/// Data in the form the chosen model trains on.
enum Prepared {
    /// Fully connected ReLU network (the separable CNN after stacking).
    Relu { x: Matrix, y: Vec<f64> },
    Linear { ps: PatchSet, y: Vec<f64> },
    Circular { x: Matrix, y: Vec<f64>, spec: CirculantSpec },
}

fn prepare(cfg: &ExperimentConfig, x: Matrix, y: Vec<f64>) -> Result<Prepared, RunError> {
    let m = &cfg.model;
    let patches = |x: &Matrix| extract_patches(x, m.height, m.width, m.channels, m.filter_h, m.filter_w, m.stride);
    let fail = RunError::at(Stage::Dataset);
    Ok(match m.kind {
        ModelKind::Relu => Prepared::Relu { x, y },
        ModelKind::SeparableCnn => {
            // every patch carries its image's label
            let ps = patches(&x).map_err(|e| fail(e.to_string()))?;
            let blocks = vec![y; ps.k()];
            let (x, y) = stack_separable(&ps, &blocks).map_err(|e| RunError::at(Stage::Dataset)(e.to_string()))?;
            Prepared::Relu { x, y }
        }
        ModelKind::LinearCnn => Prepared::Linear {
            ps: patches(&x).map_err(|e| fail(e.to_string()))?,
            y,
        },
        ModelKind::CircularCnn => {
            let d = x.cols();
            let spec = CirculantSpec::new(m.filter_len.unwrap_or(d), d, m.normalization).map_err(|e| fail(e.to_string()))?;
            Prepared::Circular { x, y, spec }
        }
    })
}

fn numerical_rank(z: &Matrix) -> cvxnn::Result<usize> {
    if z.is_empty() {
        return Ok(0);
    }
    let s = svd(z)?.singular_values;
    let top = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&v| v > 1e-9 * top.max(f64::MIN_POSITIVE)).count())
}

fn to_string_error<T>(r: cvxnn::Result<T>, stage: Stage) -> Result<T, RunError> {
    r.map_err(|e| RunError::at(stage)(e.to_string()))
}

/// The full pipeline with outputs in `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, RunError> {
    run_pipeline(cfg, Pipeline::Compare)
}

pub fn run_pipeline(cfg: &ExperimentConfig, pipeline: Pipeline) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let dir = output_dir(cfg)?;
    with_error_file(&dir, run_in(cfg, pipeline, &dir))
}

fn run_in(cfg: &ExperimentConfig, pipeline: Pipeline, dir: &Path) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let (x, y) = load_dataset(cfg).map_err(|e| RunError::at(Stage::Dataset)(e.to_string()))?;
    let prepared = prepare(cfg, x, y)?;
    let (n, d) = match &prepared {
        Prepared::Relu { x, .. } | Prepared::Circular { x, .. } => (x.rows(), x.cols()),
        Prepared::Linear { ps, .. } => (ps.n(), ps.d()),
    };
    let mut report = RunReport {
        pipeline,
        model: cfg.model.kind,
        loss: cfg.loss,
        beta: cfg.beta,
        seed: cfg.seed,
        n,
        d,
        pattern_source: None,
        pattern_count: None,
        convex: None,
        sgd: Vec::new(),
        wall_ms: WallTimes::default(),
    };

    if pipeline.convex() {
        let convex = match &prepared {
            Prepared::Relu { x, y } => {
                let t = Instant::now();
                let patterns = to_string_error(acquire_patterns(cfg, x, y), Stage::Patterns)?;
                report.wall_ms.patterns = ms(t);
                report.pattern_source = Some(cfg.patterns.label());
                report.pattern_count = Some(patterns.len());
                let t = Instant::now();
                let problem = to_string_error(
                    ConvexTrainingProblem::new(x.clone(), y.clone(), cfg.beta, cfg.loss, patterns),
                    Stage::Convex,
                )?;
                let (sol, diag) = to_string_error(solve_group_cone(&problem, &cfg.solver), Stage::Convex)?;
                report.wall_ms.convex = ms(t);
                write(dir, "trace_convex.csv", &objective_csv(&diag.objective_trace))?;
                let cert = to_string_error(
                    dual_certificate_with(&problem, &sol, diag.dual_vector.as_deref(), 200, cfg.seed),
                    Stage::Certificate,
                )?;
                let net = to_string_error(reconstruct(&sol, problem.patterns()), Stage::Reconstruct)?;
                write(dir, "network.json", &net.to_json())?;
                let cost = to_string_error(net.nonconvex_cost(x, y, cfg.beta, cfg.loss), Stage::Reconstruct)?;
                ConvexReport {
                    optimum: to_string_error(objective(&problem, &sol), Stage::Convex)?,
                    certified_gap: diag.certified_gap,
                    converged: diag.converged,
                    iterations: diag.iterations,
                    m_star: net.width(),
                    reconstructed_cost: Some(cost),
                    lower_bound: cert.valid.then_some(cert.global_dual_value),
                    certificate_valid: Some(cert.valid),
                    trace_file: "trace_convex.csv".into(),
                }
            }
            Prepared::Linear { ps, y } => {
                let t = Instant::now();
                let (z, diag, _) = to_string_error(train_linear_cnn(ps, y, cfg.beta, &cfg.solver), Stage::Convex)?;
                report.wall_ms.convex = ms(t);
                write(dir, "trace_convex.csv", &objective_csv(&diag.objective_trace))?;
                let check = to_string_error(nuclear_dual_check(ps, y, cfg.beta, &z), Stage::Certificate)?;
                write(dir, "network.json", &to_json(&serde_json::json!({ "z": z })))?;
                ConvexReport {
                    optimum: check.primal,
                    certified_gap: Some(check.gap),
                    converged: diag.converged,
                    iterations: diag.iterations,
                    m_star: to_string_error(numerical_rank(&z), Stage::Reconstruct)?,
                    reconstructed_cost: None,
                    lower_bound: None,
                    certificate_valid: None,
                    trace_file: "trace_convex.csv".into(),
                }
            }
            Prepared::Circular { x, y, spec } => {
                let t = Instant::now();
                let sol = to_string_error(train_circular_cnn(x, y, cfg.beta, spec, &cfg.solver), Stage::Convex)?;
                report.wall_ms.convex = ms(t);
                let diag = &sol.diagnostics;
                write(dir, "trace_convex.csv", &objective_csv(&diag.objective_trace))?;
                let filter = to_string_error(effective_filter(&sol.z, spec), Stage::Reconstruct)?;
                let re: Vec<f64> = sol.z.iter().map(|c| c.re).collect();
                let im: Vec<f64> = sol.z.iter().map(|c| c.im).collect();
                write(
                    dir,
                    "network.json",
                    &to_json(&serde_json::json!({ "z_re": re, "z_im": im, "effective_filter": filter })),
                )?;
                ConvexReport {
                    optimum: sol.value,
                    certified_gap: diag.certified_gap,
                    converged: diag.converged,
                    iterations: diag.iterations,
                    m_star: sol.z.iter().filter(|c| c.norm() > 0.0).count(),
                    reconstructed_cost: None,
                    lower_bound: None,
                    certificate_valid: None,
                    trace_file: "trace_convex.csv".into(),
                }
            }
        };
        report.convex = Some(convex);
    }

    if pipeline.sgd() {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| RunError::at(Stage::Sgd)(e.to_string()))?;
        let trials: Vec<cvxnn::Result<(Vec<f64>, String, bool, f64)>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = cfg.trial_seed(t);
                    let start = Instant::now();
                    match &prepared {
                        Prepared::Relu { x, y } => {
                            let (_, trace) = train_sgd(x, y, &train_config(cfg, seed))?;
                            let finals = vec![trace.final_objective()];
                            Ok((finals, trace.to_csv(), trace.diverged, ms(start)))
                        }
                        Prepared::Linear { ps, y } => {
                            let (_, trace) = train_linear_cnn_gd(ps, y, cfg.beta, &cnn_config(cfg, seed))?;
                            let diverged = trace.last().is_none_or(|v| !v.is_finite());
                            Ok((trace.clone(), objective_csv(&trace), diverged, ms(start)))
                        }
                        Prepared::Circular { x, y, spec } => {
                            let ps = circulant_patches(x, spec)?;
                            let (_, trace) = train_linear_cnn_gd(&ps, y, cfg.beta, &cnn_config(cfg, seed))?;
                            let diverged = trace.last().is_none_or(|v| !v.is_finite());
                            Ok((trace.clone(), objective_csv(&trace), diverged, ms(start)))
                        }
                    }
                })
                .collect()
        });
        let optimum = report.convex.as_ref().map(|c| c.optimum);
        for (t, trial) in trials.into_iter().enumerate() {
            let (trace, csv, diverged, wall) = to_string_error(trial, Stage::Sgd)?;
            let name = format!("trace_sgd_{t}.csv");
            write(dir, &name, &csv)?;
            let final_objective = trace.last().copied().unwrap_or(f64::NAN);
            report.sgd.push(TrialReport {
                trial: t,
                seed: cfg.trial_seed(t),
                final_objective,
                excess: optimum.map(|o| final_objective - o),
                diverged,
                trace_file: name,
            });
            report.wall_ms.sgd.push(wall);
        }
    }
    report.wall_ms.total = ms(start);
    write(dir, "report.json", &to_json(&report))?;
    Ok(report)
}

/// Patterns of the configured source, written to `patterns.json`.
pub fn run_enumerate(cfg: &ExperimentConfig) -> Result<EnumerateReport, RunError> {
    cfg.validate()?;
    let dir = output_dir(cfg)?;
    with_error_file(&dir, enumerate_in(cfg, &dir))
}

fn enumerate_in(cfg: &ExperimentConfig, dir: &Path) -> Result<EnumerateReport, RunError> {
    let start = Instant::now();
    let (x, y) = load_dataset(cfg).map_err(|e| RunError::at(Stage::Dataset)(e.to_string()))?;
    let patterns = to_string_error(acquire_patterns(cfg, &x, &y), Stage::Patterns)?;
    write(dir, "patterns.json", &patterns.to_json())?;
    let rank = to_string_error(numerical_rank(&x), Stage::Patterns)?;
    let report = EnumerateReport {
        n: x.rows(),
        d: x.cols(),
        pattern_source: cfg.patterns.label(),
        pattern_count: patterns.len(),
        general_position_count: region_count_bound(x.rows(), rank).ok(),
        wall_ms: ms(start),
    };
    write(dir, "report.json", &to_json(&report))?;
    Ok(report)
}

/// Gauge of `y` by the small-`β` path cost against the sampled polar
/// support, written to `report.json`.
pub fn run_gauge(cfg: &ExperimentConfig) -> Result<GaugeReport, RunError> {
    cfg.validate()?;
    let dir = output_dir(cfg)?;
    with_error_file(&dir, gauge_in(cfg, &dir))
}

fn gauge_in(cfg: &ExperimentConfig, dir: &Path) -> Result<GaugeReport, RunError> {
    let start = Instant::now();
    let (x, y) = load_dataset(cfg).map_err(|e| RunError::at(Stage::Dataset)(e.to_string()))?;
    let beta_small = cfg.gauge.beta_small.unwrap_or_else(|| default_gauge_beta(&y));
    let gauge = to_string_error(gauge_value(&x, &y, beta_small, &cfg.solver), Stage::Convex)?;
    let polar = to_string_error(polar_support(&x, &y, cfg.gauge.polar_samples, cfg.seed), Stage::Certificate)?;
    let report = GaugeReport {
        n: x.rows(),
        d: x.cols(),
        beta_small,
        gauge,
        polar_support: polar,
        polar_samples: cfg.gauge.polar_samples,
        relative_difference: (gauge - polar).abs() / polar.abs().max(f64::MIN_POSITIVE),
        wall_ms: ms(start),
    };
    write(dir, "report.json", &to_json(&report))?;
    Ok(report)
}
