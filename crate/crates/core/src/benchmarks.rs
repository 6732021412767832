//! Test problems with known extrema, accuracy metrics, and the replicated
//! study harness.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::adaptive::{run_adaptive_with, run_oneshot, LoopConfig, Strategy, Trace};
use crate::design_space::{DesignSpace, MixedPoint};
use crate::emulator::{FitOptions, Predictor};
use crate::error::{Error, Result};
use crate::report::fmt_f64;
use crate::rng::RngStream;
use crate::sampling::candidate_set;

pub const REPORT_SCHEMA: &str = "# schema: mixact-report v1";

/// Settings used for each study type in the reference experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct Recommended {
    pub optim_n0: usize,
    pub optim_budgets: Vec<usize>,
    pub contour_n0: usize,
    pub contour_budgets: Vec<usize>,
    pub contour_levels: Vec<f64>,
    /// Band for the contour accuracy metric.
    pub epsilon: f64,
    pub delta: f64,
    pub predict_n0: usize,
    pub predict_budgets: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct TestProblem {
    pub name: &'static str,
    pub space: DesignSpace,
    pub evaluate: fn(&MixedPoint) -> f64,
    pub known_min: f64,
    pub known_max: f64,
    pub recommended: Recommended,
}

impl TestProblem {
    pub fn eval(&self, w: &MixedPoint) -> f64 {
        (self.evaluate)(w)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "example1" => Ok(example1_problem()),
            "example2" => Ok(example2_problem()),
            "example3" => Ok(example3_problem()),
            _ => Err(Error::InvalidArgument(format!(
                "unknown problem '{name}' (expected example1, example2 or example3)"
            ))),
        }
    }
}

/// One quantitative input, one three-level factor; minimum -1 at (0.5, 3).
pub fn example1(w: &MixedPoint) -> f64 {
    let x = w.x[0];
    match w.z[0] {
        1 => 2.0 - (2.0 * PI * x).cos(),
        2 => 1.0 - (4.0 * PI * x).cos(),
        3 => (2.0 * PI * x).cos(),
        z => panic!("example1: level {z} out of range"),
    }
}

/// Two quantitative inputs on [0,1]^2, two three-level factors.
pub fn example2(w: &MixedPoint) -> f64 {
    let (x1, x2) = (w.x[0], w.x[1]);
    let i = match w.z[0] {
        1 => x1 + x2 * x2,
        2 => x1 * x1 + x2,
        3 => x1 * x1 + x2 * x2,
        z => panic!("example2: level {z} out of range"),
    };
    let g = match w.z[1] {
        1 => x1.cos() + (2.0 * x2).cos(),
        2 => (2.0 * x1).cos() + x2.cos(),
        3 => (2.0 * x1).cos() + (2.0 * x2).cos(),
        z => panic!("example2: level {z} out of range"),
    };
    i + g
}

/// Three quantitative inputs on [0,1]^3, three three-level factors.
pub fn example3(w: &MixedPoint) -> f64 {
    let (x1, x2, x3) = (w.x[0], w.x[1], w.x[2]);
    let i = match w.z[0] {
        1 | 3 => x1 + x2 * x2 + x3,
        2 => x1 * x1 + x2 + x3,
        z => panic!("example3: level {z} out of range"),
    };
    let g = match w.z[1] {
        1 | 2 => x1.cos() + (2.0 * x2).cos() + x3.cos(),
        3 => (2.0 * x1).cos() + x2.cos() + x3.cos(),
        z => panic!("example3: level {z} out of range"),
    };
    let h = match w.z[2] {
        1 | 2 => x1.sin() + (2.0 * x2).sin() + x3.sin(),
        3 => (2.0 * x1).sin() + x2.sin() + x3.sin(),
        z => panic!("example3: level {z} out of range"),
    };
    i + g + h
}

pub fn example1_problem() -> TestProblem {
    TestProblem {
        name: "example1",
        space: DesignSpace::new(1, vec![3]).expect("valid space"),
        evaluate: example1,
        known_min: -1.0,
        known_max: 3.0,
        recommended: Recommended {
            optim_n0: 9,
            optim_budgets: (10..=15).collect(),
            contour_n0: 9,
            contour_budgets: vec![11, 13, 15, 17, 19],
            contour_levels: vec![-0.7, 1.2, 2.2],
            epsilon: 0.05,
            delta: 0.05,
            predict_n0: 10,
            predict_budgets: vec![15, 21],
        },
    }
}

pub fn example2_problem() -> TestProblem {
    TestProblem {
        name: "example2",
        space: DesignSpace::new(2, vec![3, 3]).expect("valid space"),
        evaluate: example2,
        known_min: 1.0,
        known_max: 2.7,
        recommended: Recommended {
            optim_n0: 9,
            optim_budgets: (10..=18).collect(),
            contour_n0: 9,
            contour_budgets: vec![27, 36, 45, 54, 63],
            contour_levels: vec![1.2, 1.7, 2.1],
            epsilon: 0.05,
            delta: 0.02,
            predict_n0: 20,
            predict_budgets: vec![30, 40],
        },
    }
}

pub fn example3_problem() -> TestProblem {
    TestProblem {
        name: "example3",
        space: DesignSpace::new(3, vec![3, 3, 3]).expect("valid space"),
        evaluate: example3,
        known_min: 3.0,
        known_max: 6.7,
        recommended: Recommended {
            optim_n0: 9,
            optim_budgets: (10..=18).collect(),
            contour_n0: 9,
            contour_budgets: vec![27, 36, 45, 54, 63],
            contour_levels: vec![4.5, 5.5, 6.5],
            epsilon: 0.1,
            delta: 0.1,
            predict_n0: 30,
            predict_budgets: vec![80, 100],
        },
    }
}

/// Running minimum of `responses`.
pub fn metric_best_min(responses: &[f64]) -> Vec<f64> {
    responses
        .iter()
        .scan(f64::INFINITY, |best, &y| {
            *best = best.min(y);
            Some(*best)
        })
        .collect()
}

/// Points of a probe pool with their true responses.
#[derive(Clone, Debug)]
pub struct LabeledPoints {
    pub points: Vec<MixedPoint>,
    pub truth: Vec<f64>,
}

impl LabeledPoints {
    /// A `per_combo`-run LHD at every level combination, labeled by `f`.
    pub fn probe<F: Fn(&MixedPoint) -> f64>(space: &DesignSpace, per_combo: usize, f: F, rng: RngStream) -> Self {
        let points = candidate_set(space, per_combo, rng);
        let truth = points.iter().map(f).collect();
        Self { points, truth }
    }

    /// Probe points whose true response is within `eps` of `a`.
    pub fn near_contour(&self, a: f64, eps: f64) -> Result<Self> {
        let (points, truth): (Vec<_>, Vec<_>) = self
            .points
            .iter()
            .zip(&self.truth)
            .filter(|(_, &y)| (y - a).abs() <= eps)
            .map(|(w, &y)| (w.clone(), y))
            .unzip();
        if points.is_empty() {
            return Err(Error::EmptyContour);
        }
        Ok(Self { points, truth })
    }
}

/// Mean absolute prediction error over `set`.
pub fn mean_abs_error(model: &dyn Predictor, set: &LabeledPoints) -> f64 {
    let posts = model.predict_many(&set.points);
    posts
        .iter()
        .zip(&set.truth)
        .map(|(p, y)| (p.mean - y).abs())
        .sum::<f64>()
        / set.points.len() as f64
}

/// Contour accuracy: mean |truth - prediction| over the 200-per-combination
/// probe points whose true response lies within `eps` of `a`.
pub fn metric_mc0(model: &dyn Predictor, problem: &TestProblem, a: f64, eps: f64, pool_seed: RngStream) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let probe = LabeledPoints::probe(&problem.space, 200, problem.evaluate, pool_seed);
    Ok(mean_abs_error(model, &probe.near_contour(a, eps)?))
}

pub fn metric_rmse(model: &dyn Predictor, test: &LabeledPoints) -> Result<f64> {
    if test.points.is_empty() {
        return Err(Error::InvalidArgument("test set is empty".into()));
    }
    let posts = model.predict_many(&test.points);
    let mse = posts
        .iter()
        .zip(&test.truth)
        .map(|(p, y)| (p.mean - y).powi(2))
        .sum::<f64>()
        / test.points.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Clone, Debug)]
pub enum Method {
    OneShot,
    Adaptive(Strategy),
}

#[derive(Clone, Debug)]
pub struct MethodSpec {
    pub label: String,
    pub method: Method,
}

impl MethodSpec {
    pub fn is_oneshot(&self) -> bool {
        matches!(self.method, Method::OneShot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    BestMin,
    Mc0 {
        a: f64,
        eps: f64,
    },
    /// Natural log of the RMSE on a 200-per-combination test set.
    LogRmse,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BestMin => "best_min",
            Self::Mc0 { .. } => "mc0",
            Self::LogRmse => "log_rmse",
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub name: String,
    pub problem: TestProblem,
    pub methods: Vec<MethodSpec>,
    pub n0: usize,
    pub budgets: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub metric: Metric,
    pub n_per_combo: usize,
    pub fit: FitOptions,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
    pub keep_traces: bool,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.budgets.is_empty() {
            return bad("the budget grid is empty".into());
        }
        if self.n_per_combo == 0 {
            return bad("n_per_combo must be positive".into());
        }
        for &n in &self.budgets {
            if n < self.n0 {
                return bad(format!("budget {n} is below n0 = {}", self.n0));
            }
        }
        if self.n0 < 2 {
            return bad(format!("n0 must be at least 2, got {}", self.n0));
        }
        for m in &self.methods {
            if let Method::Adaptive(Strategy::Criterion(spec)) = &m.method {
                spec.validate()?;
            }
        }
        if let Metric::Mc0 { eps, .. } = self.metric {
            if !(eps > 0.0) {
                return bad("epsilon must be positive".into());
            }
        }
        self.fit.validate()
    }

    /// Stream for replication `r`; shared by every method so that methods
    /// are compared on the same initial designs and probe pools.
    pub fn replication_seed(&self, r: usize) -> RngStream {
        RngStream::new(self.base_seed, r as u64)
    }
}

/// One method at one replication, across the whole budget grid.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub method: String,
    pub replication: usize,
    /// Metric per budget; `None` where the metric is undefined (empty
    /// contour band) or the run failed.
    pub values: BTreeMap<usize, Option<f64>>,
    /// Cumulative fit and selection seconds at each budget.
    pub fit_seconds: BTreeMap<usize, f64>,
    pub select_seconds: BTreeMap<usize, f64>,
    pub failure: Option<String>,
    pub trace: Option<Trace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub method: String,
    pub n: usize,
    pub values: Vec<Option<f64>>,
    pub mean: f64,
    pub sd: f64,
    pub rel_efficiency: f64,
    pub fit_time_mean: f64,
    pub select_time_mean: f64,
    pub failures: usize,
    pub oneshot: bool,
}

#[derive(Clone, Debug)]
pub struct ReplicationReport {
    pub study: String,
    pub metric: Metric,
    pub n0: usize,
    pub cells: Vec<Cell>,
    pub runs: Vec<RunRecord>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Evaluator<'a> {
    config: &'a StudyConfig,
    contour: Option<LabeledPoints>,
    test: Option<LabeledPoints>,
}

impl<'a> Evaluator<'a> {
    fn new(config: &'a StudyConfig, r: usize) -> Self {
        let seed = config.replication_seed(r);
        let problem = &config.problem;
        let (contour, test) = match config.metric {
            Metric::BestMin => (None, None),
            Metric::Mc0 { .. } => {
                let probe = LabeledPoints::probe(&problem.space, 200, problem.evaluate, seed.substream("mc0-probe", 0));
                (Some(probe), None)
            }
            Metric::LogRmse => {
                let test = LabeledPoints::probe(&problem.space, 200, problem.evaluate, seed.substream("test-set", 0));
                (None, Some(test))
            }
        };
        Self { config, contour, test }
    }

    fn model_metric(&self, model: &dyn Predictor) -> Option<f64> {
        match self.config.metric {
            Metric::BestMin => None,
            Metric::Mc0 { a, eps } => {
                let band = self.contour.as_ref()?.near_contour(a, eps).ok()?;
                Some(mean_abs_error(model, &band))
            }
            Metric::LogRmse => metric_rmse(model, self.test.as_ref()?).ok().map(f64::ln),
        }
    }
}

fn run_cell(config: &StudyConfig, method: &MethodSpec, r: usize) -> RunRecord {
    let seed = config.replication_seed(r);
    let problem = &config.problem;
    let eval = Evaluator::new(config, r);
    let mut record = RunRecord {
        method: method.label.clone(),
        replication: r,
        values: config.budgets.iter().map(|&n| (n, None)).collect(),
        fit_seconds: BTreeMap::new(),
        select_seconds: BTreeMap::new(),
        failure: None,
        trace: None,
    };
    match &method.method {
        Method::OneShot => {
            for &n in &config.budgets {
                let t0 = Instant::now();
                match run_oneshot(&problem.evaluate, &problem.space, n, &config.fit, seed) {
                    Ok((model, data)) => {
                        let value = match config.metric {
                            Metric::BestMin => data.responses().iter().copied().reduce(f64::min),
                            _ => eval.model_metric(&model),
                        };
                        record.values.insert(n, value);
                        record.fit_seconds.insert(n, t0.elapsed().as_secs_f64());
                        record.select_seconds.insert(n, 0.0);
                    }
                    Err(e) => {
                        record.failure = Some(format!("N = {n}: {e}"));
                    }
                }
            }
        }
        Method::Adaptive(strategy) => {
            let max_n = *config.budgets.iter().max().expect("non-empty budget grid");
            let mut loop_cfg = LoopConfig::new(problem.space.clone(), config.n0, max_n, strategy.clone(), seed);
            loop_cfg.n_per_combo = config.n_per_combo;
            loop_cfg.fit = config.fit.clone();
            let mut model_values = BTreeMap::new();
            let wanted: Vec<usize> = config.budgets.clone();
            let result = run_adaptive_with(&problem.evaluate, &loop_cfg, |n, model| {
                if wanted.contains(&n) && config.metric != Metric::BestMin {
                    model_values.insert(n, eval.model_metric(model));
                }
            });
            let trace = match result {
                Ok(t) => t,
                Err(e) => {
                    record.failure = Some(e.to_string());
                    *e.trace
                }
            };
            let best = metric_best_min(&trace.responses());
            for &n in &config.budgets {
                let completed = trace.initial.len() + trace.rows.len() >= n && !trace.initial.is_empty();
                let value = match config.metric {
                    Metric::BestMin if completed => Some(best[n - 1]),
                    Metric::BestMin => None,
                    _ => model_values.get(&n).copied().flatten(),
                };
                record.values.insert(n, value);
                let upto = trace.rows.iter().filter(|row| row.n <= n);
                let (f, s) = upto.fold((0.0, 0.0), |(f, s), row| (f + row.fit_seconds, s + row.select_seconds));
                record.fit_seconds.insert(n, f);
                record.select_seconds.insert(n, s);
            }
            if config.keep_traces {
                record.trace = Some(trace);
            }
        }
    }
    record
}

/// Runs every (method, replication) cell and aggregates per (method, N).
/// Failures are recorded in the report rather than aborting the study.
pub fn replicate(config: &StudyConfig) -> Result<ReplicationReport> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.methods.len())
        .flat_map(|m| (0..config.replications).map(move |r| (m, r)))
        .collect();
    let work = || -> Vec<RunRecord> {
        jobs.par_iter()
            .map(|&(m, r)| run_cell(config, &config.methods[m], r))
            .collect()
    };
    let runs = if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {} workers: {e}", config.jobs)))?
            .install(work)
    } else {
        work()
    };
    Ok(aggregate(config, runs))
}

fn aggregate(config: &StudyConfig, runs: Vec<RunRecord>) -> ReplicationReport {
    let mut cells = Vec::new();
    for method in &config.methods {
        let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.method == method.label).collect();
        for &n in &config.budgets {
            let values: Vec<Option<f64>> = mine.iter().map(|r| r.values.get(&n).copied().flatten()).collect();
            let ok: Vec<f64> = values.iter().flatten().copied().collect();
            let (mean, sd) = mean_sd(&ok);
            let fit: Vec<f64> = mine.iter().filter_map(|r| r.fit_seconds.get(&n).copied()).collect();
            let sel: Vec<f64> = mine.iter().filter_map(|r| r.select_seconds.get(&n).copied()).collect();
            cells.push(Cell {
                method: method.label.clone(),
                n,
                values,
                mean,
                sd,
                rel_efficiency: f64::NAN,
                fit_time_mean: mean_sd(&fit).0,
                select_time_mean: mean_sd(&sel).0,
                failures: mine.iter().filter(|r| r.failure.is_some()).count(),
                oneshot: method.is_oneshot(),
            });
        }
    }
    let baseline: BTreeMap<usize, f64> = config
        .methods
        .iter()
        .find(|m| m.is_oneshot())
        .map(|m| {
            cells
                .iter()
                .filter(|c| c.method == m.label)
                .map(|c| (c.n, c.mean))
                .collect()
        })
        .unwrap_or_default();
    for cell in &mut cells {
        if let Some(&base) = baseline.get(&cell.n) {
            cell.rel_efficiency = base / cell.mean;
        }
    }
    ReplicationReport {
        study: config.name.clone(),
        metric: config.metric,
        n0: config.n0,
        cells,
        runs,
    }
}

impl ReplicationReport {
    pub fn cell(&self, method: &str, n: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.method == method && c.n == n)
    }

    /// `method, N, metric_mean, metric_sd, rel_efficiency, fit_time_mean,
    /// select_time_mean` plus per-point timing and counts. Timing columns are
    /// `NA` when `timings` is false.
    pub fn write_summary_csv<W: Write>(&self, mut out: W, timings: bool) -> std::io::Result<()> {
        writeln!(out, "{REPORT_SCHEMA}")?;
        writeln!(out, "# study: {}", self.study)?;
        writeln!(out, "# metric: {}", self.metric.name())?;
        writeln!(
            out,
            "method,N,metric_mean,metric_sd,rel_efficiency,fit_time_mean,select_time_mean,\
             fit_time_per_point,select_time_per_point,n_ok,n_failed"
        )?;
        let time = |v: f64| if timings { fmt_f64(v) } else { "NA".into() };
        for c in &self.cells {
            let added = c.n.saturating_sub(self.n0);
            let per_point = |v: f64| if added == 0 { f64::NAN } else { v / added as f64 };
            let (fpp, spp) = if c.oneshot {
                (f64::NAN, f64::NAN)
            } else {
                (per_point(c.fit_time_mean), per_point(c.select_time_mean))
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                c.method,
                c.n,
                fmt_f64(c.mean),
                fmt_f64(c.sd),
                fmt_f64(c.rel_efficiency),
                time(c.fit_time_mean),
                time(c.select_time_mean),
                time(fpp),
                time(spp),
                c.values.iter().flatten().count(),
                c.failures,
            )?;
        }
        Ok(())
    }

    /// One row per (method, replication, N): the metric value and timings.
    pub fn write_per_seed_csv<W: Write>(&self, mut out: W, timings: bool) -> std::io::Result<()> {
        writeln!(out, "# schema: mixact-per-seed v1")?;
        writeln!(out, "# study: {}", self.study)?;
        writeln!(
            out,
            "method,replication,N,{},fit_seconds,select_seconds,total_seconds",
            self.metric.name()
        )?;
        let time = |v: f64| if timings { fmt_f64(v) } else { "NA".into() };
        let mut runs: Vec<&RunRecord> = self.runs.iter().collect();
        runs.sort_by(|a, b| (&a.method, a.replication).cmp(&(&b.method, b.replication)));
        for r in runs {
            for (&n, v) in &r.values {
                let f = r.fit_seconds.get(&n).copied().unwrap_or(f64::NAN);
                let s = r.select_seconds.get(&n).copied().unwrap_or(f64::NAN);
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.method,
                    r.replication,
                    n,
                    fmt_f64(v.unwrap_or(f64::NAN)),
                    time(f),
                    time(s),
                    time(f + s)
                )?;
            }
        }
        Ok(())
    }
}
