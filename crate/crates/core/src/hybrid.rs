//! Tree search over level combinations combined with kernel selection and
//! EI over the quantitative inputs.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use crate::acquisition::{ei_min, Pick, RegionTag};
use crate::design_space::{Dataset, DesignSpace, LevelCombination, MixedPoint};
use crate::emulator::kernel::{CovarianceKernel, EzGpKernel, ProductKernel};
use crate::emulator::{fit_kernel, FitOptions, FittedGp, Predictor};
use crate::error::{Error, Result};
use crate::report::fmt_f64;
use crate::rng::RngStream;

pub const DEFAULT_EXPLORATION: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// One-layer tree: a leaf per level combination.
#[derive(Clone, Debug, PartialEq)]
pub struct McTree {
    leaves: Vec<LevelCombination>,
    visits: Vec<u64>,
    mean_reward: Vec<f64>,
    root_visits: u64,
}

/// `mean + c sqrt(ln parent / n)`; infinite for an unvisited leaf.
pub fn uct_score(mean: f64, visits: u64, parent: u64, c: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    let bonus = if parent > 0 {
        ((parent as f64).ln() / visits as f64).sqrt()
    } else {
        0.0
    };
    mean + c * bonus
}

impl McTree {
    pub fn new(space: &DesignSpace) -> Self {
        let leaves = space.combinations();
        let m = leaves.len();
        Self {
            leaves,
            visits: vec![0; m],
            mean_reward: vec![0.0; m],
            root_visits: 0,
        }
    }

    pub fn leaves(&self) -> &[LevelCombination] {
        &self.leaves
    }

    pub fn visits(&self, leaf: usize) -> u64 {
        self.visits[leaf]
    }

    pub fn mean_reward(&self, leaf: usize) -> f64 {
        self.mean_reward[leaf]
    }

    pub fn root_visits(&self) -> u64 {
        self.root_visits
    }

    /// Leaf index with the largest UCT score. Unvisited leaves come first;
    /// ties are broken uniformly at random.
    pub fn uct_select<R: Rng + ?Sized>(&self, c: f64, rng: &mut R) -> usize {
        let scores: Vec<f64> = (0..self.leaves.len())
            .map(|i| uct_score(self.mean_reward[i], self.visits[i], self.root_visits, c))
            .collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
        tied[rng.random_range(0..tied.len())]
    }

    pub fn backprop(&mut self, leaf: usize, reward: f64) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::InvalidArgument(format!("reward must be finite, got {reward}")));
        }
        if leaf >= self.leaves.len() {
            return Err(Error::InvalidArgument(format!("no leaf {leaf}")));
        }
        self.visits[leaf] += 1;
        self.root_visits += 1;
        self.mean_reward[leaf] += (reward - self.mean_reward[leaf]) / self.visits[leaf] as f64;
        Ok(())
    }

    /// `combination, n, mean_reward` per leaf.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# schema: mixact-tree v1")?;
        writeln!(out, "combination,n,mean_reward")?;
        for ((leaf, n), r) in self.leaves.iter().zip(&self.visits).zip(&self.mean_reward) {
            let r = if *n == 0 { "NA".to_string() } else { fmt_f64(*r) };
            writeln!(out, "\"{leaf}\",{n},{r}")?;
        }
        Ok(())
    }
}

/// Improvement of `y_new` over the worst initial response, relative to the
/// current best, clipped to `[0, 1]`.
pub fn reward(y_worst_init: f64, y_best: f64, y_new: f64) -> f64 {
    let span = y_worst_init - y_best;
    if !(span > 0.0) {
        return 0.0;
    }
    ((y_worst_init - y_new) / span).clamp(0.0, 1.0)
}

#[derive(Clone, Debug)]
pub struct KernelPool {
    kernels: Vec<Arc<dyn CovarianceKernel>>,
}

impl KernelPool {
    pub fn new(kernels: Vec<Arc<dyn CovarianceKernel>>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::InvalidArgument("kernel pool is empty".into()));
        }
        Ok(Self { kernels })
    }

    /// The additive EzGP kernel and the multiplicative product kernel.
    pub fn standard(space: &DesignSpace) -> Self {
        Self {
            kernels: vec![
                Arc::new(EzGpKernel::new(space.clone())),
                Arc::new(ProductKernel::new(space.clone())),
            ],
        }
    }

    pub fn kernels(&self) -> &[Arc<dyn CovarianceKernel>] {
        &self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }
}

/// Rank weight on the acquisition term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankWeight {
    Fixed(f64),
    /// `2 i / N` at iteration `i` of a budget `N`.
    Adaptive,
}

impl RankWeight {
    pub fn at(self, iteration: usize, budget: usize) -> f64 {
        match self {
            Self::Fixed(a) => a,
            Self::Adaptive => 2.0 * iteration as f64 / budget.max(1) as f64,
        }
    }
}

/// Ranks 1..k with k the best; equal values share the lower rank and
/// non-finite values rank 1.
fn ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return 1.0;
            }
            1.0 + values.iter().filter(|&&u| !u.is_finite() || u < v).count() as f64
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct KernelRanking {
    pub chosen: usize,
    pub models: Vec<Option<FittedGp>>,
    pub log_likelihood: Vec<f64>,
    pub max_ei: Vec<f64>,
    pub combined: Vec<f64>,
}

/// Fits every pool member and picks the largest `R_P + alpha R_A`, where
/// `R_P` ranks log-likelihood and `R_A` the maximum EI over `candidates`.
/// Ties go to the higher likelihood, then the lower index. Fit failures are
/// demoted to rank 1; only a pool where every fit fails is an error.
pub fn kernel_rank_select(
    pool: &KernelPool,
    data: &Dataset,
    candidates: &[MixedPoint],
    alpha_rank: f64,
    opts: &FitOptions,
    rng: RngStream,
) -> Result<KernelRanking> {
    let f_min = data.responses().iter().copied().fold(f64::INFINITY, f64::min);
    let mut models = Vec::with_capacity(pool.len());
    let mut last_err = None;
    for (k, kernel) in pool.kernels().iter().enumerate() {
        match fit_kernel(kernel.clone(), data, opts, rng.substream("kernel", k as u64)) {
            Ok(m) => models.push(Some(m)),
            Err(e) => {
                last_err = Some(e);
                models.push(None);
            }
        }
    }
    if models.iter().all(Option::is_none) {
        return Err(last_err.unwrap_or_else(|| Error::FitFailure("no kernel fitted".into())));
    }
    let log_likelihood: Vec<f64> = models
        .iter()
        .map(|m| m.as_ref().map_or(f64::NEG_INFINITY, FittedGp::log_likelihood))
        .collect();
    let max_ei: Vec<f64> = models
        .iter()
        .map(|m| {
            m.as_ref().map_or(f64::NEG_INFINITY, |m| {
                m.predict_many(candidates)
                    .into_iter()
                    .map(|p| ei_min(p, f_min))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
        })
        .collect();
    let rp = ranks(&log_likelihood);
    let ra = ranks(&max_ei);
    let combined: Vec<f64> = rp.iter().zip(&ra).map(|(p, a)| p + alpha_rank * a).collect();
    let mut chosen = 0;
    for k in 1..pool.len() {
        let better = combined[k] > combined[chosen]
            || (combined[k] == combined[chosen] && log_likelihood[k] > log_likelihood[chosen]);
        if better {
            chosen = k;
        }
    }
    Ok(KernelRanking {
        chosen,
        models,
        log_likelihood,
        max_ei,
        combined,
    })
}

#[derive(Clone, Debug)]
pub struct HybridConfig {
    pub exploration: f64,
    pub rank_weight: RankWeight,
    pub pool: KernelPool,
}

impl HybridConfig {
    pub fn standard(space: &DesignSpace) -> Self {
        Self {
            exploration: DEFAULT_EXPLORATION,
            rank_weight: RankWeight::Fixed(0.5),
            pool: KernelPool::standard(space),
        }
    }
}

/// Tree plus the reference values the reward is normalized by.
#[derive(Clone, Debug)]
pub struct HybridState {
    pub tree: McTree,
    pub y_worst_init: f64,
}

impl HybridState {
    /// Builds the tree and credits each initial observation to its leaf.
    pub fn seeded(initial: &Dataset) -> Result<Self> {
        let mut tree = McTree::new(initial.space());
        let ys = initial.responses();
        let worst = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let best = ys.iter().copied().fold(f64::INFINITY, f64::min);
        for (w, &y) in initial.points().iter().zip(ys) {
            let leaf = initial.space().combination_index(&w.z);
            tree.backprop(leaf, reward(worst, best, y))?;
        }
        Ok(Self {
            tree,
            y_worst_init: worst,
        })
    }

    /// Records the outcome at `leaf`; `y_best` is the best response after
    /// augmentation.
    pub fn update(&mut self, leaf: usize, y_best: f64, y_new: f64) -> Result<()> {
        self.tree.backprop(leaf, reward(self.y_worst_init, y_best, y_new))
    }
}

#[derive(Clone, Debug)]
pub struct HybridProposal {
    pub leaf: usize,
    pub kernel: usize,
    pub model: FittedGp,
    pub pick: Pick,
    pub chosen: MixedPoint,
    pub fit_seconds: f64,
    pub select_seconds: f64,
}

/// One Hybrid iteration: choose a leaf, choose a kernel, then EI over the
/// candidates carrying that leaf's levels. Candidates already in `data`
/// must be filtered out by the caller.
pub fn hybrid_step(
    state: &HybridState,
    data: &Dataset,
    candidates: &[MixedPoint],
    config: &HybridConfig,
    alpha_rank: f64,
    opts: &FitOptions,
    rng: RngStream,
) -> Result<HybridProposal> {
    if data.is_empty() {
        return Err(Error::InvalidArgument(
            "hybrid step needs at least one observation".into(),
        ));
    }
    let space = data.space();
    let t0 = Instant::now();
    let leaf = state
        .tree
        .uct_select(config.exploration, &mut rng.substream("uct", 0).rng());
    let combo = &state.tree.leaves()[leaf].0;
    let local: Vec<MixedPoint> = candidates.iter().filter(|w| &w.z == combo).cloned().collect();
    let local = if local.is_empty() { candidates.to_vec() } else { local };
    if local.is_empty() {
        return Err(Error::InvalidArgument("candidate pool is empty".into()));
    }
    let ranking = kernel_rank_select(&config.pool, data, &local, alpha_rank, opts, rng.substream("fit", 0))?;
    let model = ranking.models[ranking.chosen].clone().expect("chosen kernel fitted");
    let fit_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let f_min = data.responses().iter().copied().fold(f64::INFINITY, f64::min);
    let posts = model.predict_many(&local);
    let pick = crate::acquisition::select_ei(&posts, f_min);
    let chosen = local[pick.index].clone();
    let leaf = space.combination_index(&chosen.z);
    let select_seconds = t1.elapsed().as_secs_f64();
    Ok(HybridProposal {
        leaf,
        kernel: ranking.chosen,
        model,
        pick: Pick {
            region: RegionTag::Whole,
            ..pick
        },
        chosen,
        fit_seconds,
        select_seconds,
    })
}
