//! Study configuration files.
//!
//! A study file is TOML restricted to top-level keys plus dotted per-method
//! keys, for example:
//!
//! ```toml
//! name = "example1_optim"
//! problem = "example1"
//! methods = ["one-shot", "ARSD", "EI", "LCB", "Hybrid"]
//! n0 = 9
//! budgets = [10, 11, 12, 13, 14, 15]
//! replications = 50
//! seed = 1
//! method.arsd.rho = 2.0
//! method.hybrid.alpha_rank = "adaptive"
//! ```
//!
//! Unknown keys are rejected. [`StudyFile::to_text`] writes the same flat
//! form back, and parsing that text returns an identical value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionSpec, CriterionKind};
use crate::adaptive::Strategy;
use crate::benchmarks::{Method, MethodSpec, Metric, StudyConfig, TestProblem};
use crate::emulator::kernel::kernel_by_name;
use crate::emulator::FitOptions;
use crate::error::{Error, Result};
use crate::hybrid::{HybridConfig, KernelPool, RankWeight, DEFAULT_EXPLORATION};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    Optimize,
    Contour,
    Predict,
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Optimize => "optimize",
            Self::Contour => "contour",
            Self::Predict => "predict",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaRank {
    Fixed(f64),
    Named(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodParams {
    pub rho: Option<f64>,
    pub alpha_conf: Option<f64>,
    pub alpha_eps: Option<f64>,
    pub delta: Option<f64>,
    /// Number of EI-MC contour levels.
    pub c: Option<usize>,
    pub levels: Option<Vec<f64>>,
    /// UCT exploration constant.
    pub exploration: Option<f64>,
    pub alpha_rank: Option<AlphaRank>,
    pub kernels: Option<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    pub restarts: Option<usize>,
    pub max_iters: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub name: Option<String>,
    pub problem: String,
    pub methods: Vec<String>,
    pub n0: Option<usize>,
    pub budgets: Option<Vec<usize>>,
    pub replications: usize,
    pub seed: u64,
    /// Contour level (contour studies).
    pub a: Option<f64>,
    /// Band for the contour accuracy metric.
    pub epsilon: Option<f64>,
    pub n_per_combo: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub timings: Option<bool>,
    pub keep_traces: Option<bool>,
    pub fit: Option<FitParams>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub method: BTreeMap<String, MethodParams>,
}

fn method_key(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('-', "_")
}

impl StudyFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Flat `key = value` lines, per-method keys dotted.
    pub fn to_text(&self) -> String {
        let value = toml::Value::try_from(self).expect("study file serializes");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.join("\n") + "\n"
    }

    /// Resolves defaults against the problem's recommended settings and
    /// builds the runnable study.
    pub fn resolve(&self, kind: StudyKind) -> Result<StudyConfig> {
        let problem = TestProblem::by_name(&self.problem).map_err(|_| {
            Error::Config(format!(
                "key `problem`: unknown problem '{}' (expected example1, example2 or example3)",
                self.problem
            ))
        })?;
        let rec = &problem.recommended;
        let (n0, budgets) = match kind {
            StudyKind::Optimize => (rec.optim_n0, rec.optim_budgets.clone()),
            StudyKind::Contour => (rec.contour_n0, rec.contour_budgets.clone()),
            StudyKind::Predict => (rec.predict_n0, rec.predict_budgets.clone()),
        };
        let n0 = self.n0.unwrap_or(n0);
        let budgets = self.budgets.clone().unwrap_or(budgets);
        if self.replications == 0 {
            return Err(Error::Config("key `replications`: must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("key `methods`: at least one method is required".into()));
        }
        let a = match kind {
            StudyKind::Contour => Some(
                self.a
                    .ok_or_else(|| Error::Config("key `a`: a contour study needs a contour level".into()))?,
            ),
            _ => self.a,
        };
        let eps = self.epsilon.unwrap_or(rec.epsilon);
        if kind == StudyKind::Contour && !(eps > 0.0) {
            return Err(Error::Config("key `epsilon`: must be positive".into()));
        }
        let known: Vec<String> = self.methods.iter().map(|m| method_key(m)).collect();
        for key in self.method.keys() {
            if !known.contains(key) {
                return Err(Error::Config(format!(
                    "key `method.{key}`: no such method in `methods`"
                )));
            }
        }
        let mut methods = Vec::new();
        for label in &self.methods {
            let params = self.method.get(&method_key(label)).cloned().unwrap_or_default();
            let method = build_method(label, &params, &problem, kind, a)?;
            methods.push(MethodSpec {
                label: label.clone(),
                method,
            });
        }
        let mut fit = FitOptions::default();
        if let Some(f) = &self.fit {
            fit.restarts = f.restarts.unwrap_or(fit.restarts);
            fit.max_iters = f.max_iters.unwrap_or(fit.max_iters);
        }
        let metric = match kind {
            StudyKind::Optimize => Metric::BestMin,
            StudyKind::Contour => Metric::Mc0 {
                a: a.expect("checked above"),
                eps,
            },
            StudyKind::Predict => Metric::LogRmse,
        };
        let config = StudyConfig {
            name: self.name.clone().unwrap_or_else(|| format!("{}_{kind}", problem.name)),
            problem,
            methods,
            n0,
            budgets,
            replications: self.replications,
            base_seed: self.seed,
            metric,
            n_per_combo: self.n_per_combo.unwrap_or(100),
            fit,
            jobs: self.jobs.unwrap_or(0),
            keep_traces: self.keep_traces.unwrap_or(true),
        };
        config.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        v => out.push(format!("{prefix} = {v}")),
    }
}

fn build_method(
    label: &str,
    p: &MethodParams,
    problem: &TestProblem,
    kind: StudyKind,
    a: Option<f64>,
) -> Result<Method> {
    let key = method_key(label);
    let bad = |field: &str, m: &str| Error::Config(format!("key `method.{key}.{field}`: {m}"));
    match key.as_str() {
        "one_shot" | "oneshot" => return Ok(Method::OneShot),
        "hybrid" => {
            let rank_weight = match &p.alpha_rank {
                None => RankWeight::Fixed(0.5),
                Some(AlphaRank::Fixed(v)) if *v >= 0.0 => RankWeight::Fixed(*v),
                Some(AlphaRank::Named(s)) if s == "adaptive" => RankWeight::Adaptive,
                Some(_) => return Err(bad("alpha_rank", "expected a non-negative number or \"adaptive\"")),
            };
            let exploration = p.exploration.unwrap_or(DEFAULT_EXPLORATION);
            if !(exploration >= 0.0) {
                return Err(bad("exploration", "must be non-negative"));
            }
            let pool = match &p.kernels {
                None => KernelPool::standard(&problem.space),
                Some(names) => KernelPool::new(
                    names
                        .iter()
                        .map(|n| kernel_by_name(n, problem.space.clone()))
                        .collect::<Result<_>>()
                        .map_err(|e| bad("kernels", &e.to_string()))?,
                )
                .map_err(|e| bad("kernels", &e.to_string()))?,
            };
            return Ok(Method::Adaptive(Strategy::Hybrid(HybridConfig {
                exploration,
                rank_weight,
                pool,
            })));
        }
        _ => {}
    }
    let kind_c: CriterionKind = label.parse().map_err(|_| {
        Error::Config(format!(
            "key `methods`: unknown method '{label}' (expected one-shot, Hybrid or a criterion name)"
        ))
    })?;
    let mut spec = AcquisitionSpec::new(kind_c);
    if kind_c.needs_level() {
        spec.a = Some(a.ok_or_else(|| bad("a", "criterion needs a contour level; set top-level `a`"))?);
    }
    if kind == StudyKind::Contour {
        spec.delta = problem.recommended.delta;
    }
    spec.rho = p.rho.unwrap_or(spec.rho);
    spec.alpha_conf = p.alpha_conf.unwrap_or(spec.alpha_conf);
    spec.alpha_eps = p.alpha_eps.unwrap_or(spec.alpha_eps);
    spec.delta = p.delta.unwrap_or(spec.delta);
    spec.n_contours = p.c.unwrap_or(spec.n_contours);
    spec.levels = p.levels.clone();
    spec.validate()
        .map_err(|e| Error::Config(format!("method `{label}`: {e}")))?;
    Ok(Method::Adaptive(Strategy::Criterion(spec)))
}
