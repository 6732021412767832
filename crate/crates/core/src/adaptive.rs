//! The sequential design loop: initial design, fit, select, evaluate,
//! augment, until the budget is spent.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use crate::acquisition::{self, AcquisitionSpec, CriterionKind, RegionTag};
use crate::design_space::{Dataset, DesignSpace, MixedPoint};
use crate::emulator::{fit, FitOptions, FittedGp, Predictor};
use crate::error::{Error, Result};
use crate::hybrid::{hybrid_step, HybridConfig, HybridState};
use crate::report::fmt_f64;
use crate::rng::RngStream;
use crate::sampling::{candidate_set, initial_design, oneshot_design};

pub const TRACE_SCHEMA: &str = "# schema: mixact-trace v1";

#[derive(Clone, Debug)]
pub enum Strategy {
    Criterion(AcquisitionSpec),
    Hybrid(HybridConfig),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Criterion(spec) => spec.kind.name(),
            Self::Hybrid(_) => "Hybrid",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoopConfig {
    pub space: DesignSpace,
    pub n0: usize,
    /// Budget `N`: final sample size.
    pub budget: usize,
    pub strategy: Strategy,
    /// Quantitative LHD size per level combination in each candidate pool.
    pub n_per_combo: usize,
    pub fit: FitOptions,
    pub seed: RngStream,
}

impl LoopConfig {
    pub fn new(space: DesignSpace, n0: usize, budget: usize, strategy: Strategy, seed: RngStream) -> Self {
        Self {
            space,
            n0,
            budget,
            strategy,
            n_per_combo: 100,
            fit: FitOptions::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 {
            return Err(Error::InvalidArgument(format!(
                "n0 must be at least 2, got {}",
                self.n0
            )));
        }
        if self.budget < self.n0 {
            return Err(Error::InvalidArgument(format!(
                "budget N = {} is below n0 = {}",
                self.budget, self.n0
            )));
        }
        if self.n_per_combo == 0 {
            return Err(Error::InvalidArgument("n_per_combo must be positive".into()));
        }
        if let Strategy::Criterion(spec) = &self.strategy {
            spec.validate()?;
        }
        self.fit.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    /// Sample size after adding this point.
    pub n: usize,
    pub point: MixedPoint,
    pub y: f64,
    pub score: f64,
    pub region: RegionTag,
    pub best_min: f64,
    pub fit_seconds: f64,
    pub select_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub method: String,
    pub initial: Dataset,
    pub rows: Vec<TraceRow>,
    /// Model fitted on the final dataset.
    pub final_model: Option<FittedGp>,
    /// Probe points whose prediction lies within the reporting band of the
    /// contour (contour runs only).
    pub contour: Option<Vec<MixedPoint>>,
}

impl Trace {
    fn new(method: &str, initial: Dataset) -> Self {
        Self {
            method: method.to_string(),
            initial,
            rows: Vec::new(),
            final_model: None,
            contour: None,
        }
    }

    pub fn space(&self) -> &DesignSpace {
        self.initial.space()
    }

    /// Initial design plus every added point.
    pub fn dataset(&self) -> Dataset {
        let mut data = self.initial.clone();
        for row in &self.rows {
            data.push(row.point.clone(), row.y)
                .expect("trace rows form a valid dataset");
        }
        data
    }

    pub fn responses(&self) -> Vec<f64> {
        let mut ys = self.initial.responses().to_vec();
        ys.extend(self.rows.iter().map(|r| r.y));
        ys
    }

    pub fn total_fit_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.fit_seconds).sum()
    }

    pub fn total_select_seconds(&self) -> f64 {
        self.rows.iter().map(|r| r.select_seconds).sum()
    }

    /// Writes initial design rows (region `initial`) then one row per
    /// iteration. Timing columns are `NA` when `timings` is false, which
    /// makes the output a pure function of the seed.
    pub fn write_csv<W: Write>(&self, mut out: W, timings: bool) -> std::io::Result<()> {
        let space = self.space();
        writeln!(out, "{TRACE_SCHEMA}")?;
        let mut header = vec!["n".to_string()];
        header.extend((1..=space.p()).map(|k| format!("x{k}")));
        header.extend((1..=space.q()).map(|h| format!("z{h}")));
        header.extend(["y", "score", "region", "best_min", "fit_seconds", "select_seconds"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        let row = |n: usize, w: &MixedPoint, rest: [String; 6]| {
            let mut cells = vec![n.to_string()];
            cells.extend(w.x.iter().map(|&v| fmt_f64(v)));
            cells.extend(w.z.iter().map(u32::to_string));
            cells.extend(rest);
            cells.join(",")
        };
        let mut best = f64::INFINITY;
        for (i, (w, &y)) in self.initial.points().iter().zip(self.initial.responses()).enumerate() {
            best = best.min(y);
            let na = || "NA".to_string();
            writeln!(
                out,
                "{}",
                row(
                    i + 1,
                    w,
                    [fmt_f64(y), na(), "initial".into(), fmt_f64(best), na(), na()]
                )
            )?;
        }
        let time = |s: f64| if timings { fmt_f64(s) } else { "NA".to_string() };
        for r in &self.rows {
            let rest = [
                fmt_f64(r.y),
                fmt_f64(r.score),
                r.region.to_string(),
                fmt_f64(r.best_min),
                time(r.fit_seconds),
                time(r.select_seconds),
            ];
            writeln!(out, "{}", row(r.n, &r.point, rest))?;
        }
        Ok(())
    }
}

/// A failed run with everything completed before the failure.
#[derive(Debug)]
pub struct RunError {
    pub error: Error,
    pub trace: Box<Trace>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} added points)", self.error, self.trace.rows.len())
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn evaluate<F: Fn(&MixedPoint) -> f64>(objective: &F, points: Vec<MixedPoint>, space: &DesignSpace) -> Result<Dataset> {
    let ys = points.iter().map(objective).collect();
    Dataset::from_parts(space.clone(), points, ys)
}

/// Runs the loop; `checkpoint(n, model)` sees the model fitted on the first
/// `n` observations for every `n` in `n0..=N`.
pub fn run_adaptive_with<F, C>(
    objective: &F,
    config: &LoopConfig,
    mut checkpoint: C,
) -> std::result::Result<Trace, RunError>
where
    F: Fn(&MixedPoint) -> f64,
    C: FnMut(usize, &FittedGp),
{
    let empty = || Box::new(Trace::new(config.strategy.name(), Dataset::new(config.space.clone())));
    let fail_early = |error| RunError { error, trace: empty() };
    config.validate().map_err(fail_early)?;
    let space = &config.space;
    let init = initial_design(space, config.n0, config.seed.substream("init", 0))
        .and_then(|pts| evaluate(objective, pts, space))
        .map_err(fail_early)?;
    let mut trace = Trace::new(config.strategy.name(), init.clone());
    let mut data = init;
    let mut hybrid = match &config.strategy {
        Strategy::Hybrid(_) => Some(HybridState::seeded(&data).map_err(fail_early)?),
        Strategy::Criterion(_) => None,
    };
    let mut best = data.responses().iter().copied().fold(f64::INFINITY, f64::min);

    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => {
                    return Err(RunError {
                        error,
                        trace: Box::new(trace),
                    })
                }
            }
        };
    }

    loop {
        let n = data.len();
        let fit_rng = config.seed.substream("fit", n as u64);
        if n == config.budget {
            let model = bail!(fit(&data, &config.fit, fit_rng));
            checkpoint(n, &model);
            trace.final_model = Some(model);
            return Ok(trace);
        }
        let pool: Vec<MixedPoint> = candidate_set(space, config.n_per_combo, config.seed.substream("pool", n as u64))
            .into_iter()
            .filter(|w| !data.contains(w))
            .collect();
        if pool.is_empty() {
            bail!(Err(Error::InvalidArgument("candidate pool exhausted".into())));
        }
        let (chosen, score, region, fit_seconds, select_seconds, leaf) = match &config.strategy {
            Strategy::Criterion(spec) => {
                let t0 = Instant::now();
                let model = bail!(fit(&data, &config.fit, fit_rng));
                let fit_seconds = t0.elapsed().as_secs_f64();
                checkpoint(n, &model);
                let t1 = Instant::now();
                let sel = bail!(acquisition::select(
                    &model,
                    &pool,
                    spec,
                    config.seed.substream("probe", n as u64)
                ));
                (
                    sel.chosen,
                    sel.score,
                    sel.region,
                    fit_seconds,
                    t1.elapsed().as_secs_f64(),
                    None,
                )
            }
            Strategy::Hybrid(hc) => {
                let state = hybrid.as_ref().expect("hybrid state");
                let iteration = n - config.n0 + 1;
                let alpha = hc.rank_weight.at(iteration, config.budget);
                let prop = bail!(hybrid_step(state, &data, &pool, hc, alpha, &config.fit, fit_rng));
                checkpoint(n, &prop.model);
                (
                    prop.chosen,
                    prop.pick.score,
                    prop.pick.region,
                    prop.fit_seconds,
                    prop.select_seconds,
                    Some(prop.leaf),
                )
            }
        };
        let y = objective(&chosen);
        bail!(data.push(chosen.clone(), y));
        best = best.min(y);
        if let (Some(state), Some(leaf)) = (hybrid.as_mut(), leaf) {
            bail!(state.update(leaf, best, y));
        }
        trace.rows.push(TraceRow {
            n: data.len(),
            point: chosen,
            y,
            score,
            region,
            best_min: best,
            fit_seconds,
            select_seconds,
        });
    }
}

pub fn run_adaptive<F: Fn(&MixedPoint) -> f64>(
    objective: &F,
    config: &LoopConfig,
) -> std::result::Result<Trace, RunError> {
    run_adaptive_with(objective, config, |_, _| {})
}

/// Probe points (a `per_combo`-run LHD at each level combination) whose
/// predicted response lies within `eps` of `a`.
pub fn estimated_contour(
    model: &dyn Predictor,
    space: &DesignSpace,
    a: f64,
    eps: f64,
    per_combo: usize,
    rng: RngStream,
) -> Vec<MixedPoint> {
    let probe = candidate_set(space, per_combo, rng);
    let posts = model.predict_many(&probe);
    probe
        .into_iter()
        .zip(posts)
        .filter(|(_, p)| (p.mean - a).abs() <= eps)
        .map(|(w, _)| w)
        .collect()
}

/// The region-based cooperative contour loop. The returned trace carries
/// the estimated contour set at band `eps_report`.
pub fn run_rcc<F: Fn(&MixedPoint) -> f64>(
    objective: &F,
    config: &LoopConfig,
    eps_report: f64,
) -> std::result::Result<Trace, RunError> {
    let a = match &config.strategy {
        Strategy::Criterion(spec) if spec.kind == CriterionKind::Rcc && spec.a.is_some() => spec.a.unwrap(),
        _ => {
            return Err(RunError {
                error: Error::InvalidArgument("run_rcc needs an RCC criterion with a contour level".into()),
                trace: Box::new(Trace::new(config.strategy.name(), Dataset::new(config.space.clone()))),
            })
        }
    };
    if !(eps_report > 0.0) {
        return Err(RunError {
            error: Error::InvalidArgument("contour reporting band must be positive".into()),
            trace: Box::new(Trace::new(config.strategy.name(), Dataset::new(config.space.clone()))),
        });
    }
    let mut trace = run_adaptive(objective, config)?;
    let model = trace.final_model.as_ref().expect("completed run has a final model");
    let rng = config.seed.substream("contour", 0);
    trace.contour = Some(estimated_contour(model, &config.space, a, eps_report, 200, rng));
    Ok(trace)
}

/// Single `N`-run design and one fit. Uses the same constructor and stream
/// as the initial design of an adaptive run with the same seed.
pub fn run_oneshot<F: Fn(&MixedPoint) -> f64>(
    objective: &F,
    space: &DesignSpace,
    n: usize,
    fit_opts: &FitOptions,
    seed: RngStream,
) -> Result<(FittedGp, Dataset)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("one-shot design needs N >= 2, got {n}")));
    }
    let data = evaluate(objective, oneshot_design(space, n, seed.substream("init", 0))?, space)?;
    let model = fit(&data, fit_opts, seed.substream("fit", n as u64))?;
    Ok((model, data))
}
