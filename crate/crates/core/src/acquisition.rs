//! Point-selection criteria.
//!
//! Every criterion is evaluated over a finite candidate pool. The scalar
//! functions take a single posterior; the `select_*` functions work on a
//! slice of posteriors (one per candidate) and return the winning index;
//! the `*_select` functions predict at the candidates first. Ties in any
//! argmax/argmin go to the lowest candidate index.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design_space::{DesignSpace, MixedPoint};
use crate::emulator::{Posterior, Predictor};
use crate::error::{Error, Result};
use crate::normal::{cdf, pdf};
use crate::report::fmt_f64;
use crate::rng::RngStream;
use crate::sampling::oneshot_design;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriterionKind {
    Ei,
    Lcb,
    Ucb,
    Arsd,
    EiC,
    Ecl,
    Rcc,
    ArsdC,
    LcbC,
    EiMc,
    EiSc,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 11] = [
        Self::Ei,
        Self::Lcb,
        Self::Ucb,
        Self::Arsd,
        Self::EiC,
        Self::Ecl,
        Self::Rcc,
        Self::ArsdC,
        Self::LcbC,
        Self::EiMc,
        Self::EiSc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ei => "EI",
            Self::Lcb => "LCB",
            Self::Ucb => "UCB",
            Self::Arsd => "ARSD",
            Self::EiC => "EI-C",
            Self::Ecl => "ECL",
            Self::Rcc => "RCC",
            Self::ArsdC => "ARSD-C",
            Self::LcbC => "LCB-C",
            Self::EiMc => "EI-MC",
            Self::EiSc => "EI-SC",
        }
    }

    /// Kinds that target a contour level `a`.
    pub fn needs_level(self) -> bool {
        matches!(self, Self::EiC | Self::Ecl | Self::Rcc | Self::ArsdC | Self::LcbC)
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown criterion '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: CriterionKind,
    /// Contour level for the contour kinds.
    pub a: Option<f64>,
    pub rho: f64,
    /// Confidence level inside `beta_{0|n}`.
    pub alpha_conf: f64,
    /// Multiplier in `eps = alpha_eps * sd`.
    pub alpha_eps: f64,
    /// Floor in the RCC ratio `sd / max(delta, |mean - a|)`.
    pub delta: f64,
    /// Explicit EI-MC levels; estimated from a probe design when absent.
    pub levels: Option<Vec<f64>>,
    /// Number of EI-MC levels to estimate.
    pub n_contours: usize,
}

impl AcquisitionSpec {
    pub fn new(kind: CriterionKind) -> Self {
        Self {
            kind,
            a: None,
            rho: 2.0,
            alpha_conf: 0.05,
            alpha_eps: 1.96,
            delta: 0.05,
            levels: None,
            n_contours: 10,
        }
    }

    pub fn with_level(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("{}: {m}", self.kind)));
        if self.kind.needs_level() && !self.a.is_some_and(f64::is_finite) {
            return bad("contour level a is required");
        }
        if !(self.rho >= 0.0) {
            return bad("rho must be non-negative");
        }
        if !(self.alpha_conf > 0.0 && self.alpha_conf < 1.0) {
            return bad("alpha_conf must lie in (0, 1)");
        }
        if !(self.alpha_eps > 0.0) {
            return bad("alpha_eps must be positive");
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive");
        }
        if let Some(levels) = &self.levels {
            if levels.is_empty() || levels.windows(2).any(|w| !(w[0] < w[1])) {
                return bad("levels must be non-empty and strictly increasing");
            }
        }
        if self.kind == CriterionKind::EiMc && self.levels.is_none() && self.n_contours == 0 {
            return bad("n_contours must be positive");
        }
        Ok(())
    }

    fn level(&self) -> f64 {
        self.a.expect("validated contour level")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionTag {
    A1,
    A2,
    Whole,
    ArsdRegion,
}

impl RegionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::A1 => "A1",
            Self::A2 => "A2",
            Self::Whole => "whole",
            Self::ArsdRegion => "ARSD-region",
        }
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Winning candidate index with its score and region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pick {
    pub index: usize,
    pub score: f64,
    pub region: RegionTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub chosen: MixedPoint,
    pub score: f64,
    pub region: RegionTag,
}

impl Selection {
    fn from_pick(pick: Pick, candidates: &[MixedPoint]) -> Self {
        Self {
            index: pick.index,
            chosen: candidates[pick.index].clone(),
            score: pick.score,
            region: pick.region,
        }
    }
}

// ---------------------------------------------------------------------------
// scalar criteria

/// Expected improvement below `f_min`.
pub fn ei_min(post: Posterior, f_min: f64) -> f64 {
    let diff = f_min - post.mean;
    if post.sd <= 0.0 {
        return diff.max(0.0);
    }
    let u = diff / post.sd;
    (diff * cdf(u) + post.sd * pdf(u)).max(0.0)
}

pub fn lcb(post: Posterior, rho: f64) -> f64 {
    post.mean - rho * post.sd
}

pub fn ucb(post: Posterior, rho: f64) -> f64 {
    post.mean + rho * post.sd
}

/// `2 ln(pi^2 n^2 M / (6 alpha))`.
pub fn beta0n(n: usize, m: usize, alpha_conf: f64) -> f64 {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let n = n as f64;
    2.0 * (pi2 * n * n * m as f64 / (6.0 * alpha_conf)).ln()
}

/// Expected improvement for hitting contour `a` within `eps = alpha_eps * sd`.
pub fn ei_contour(post: Posterior, a: f64, alpha_eps: f64) -> f64 {
    let sd = post.sd;
    if sd <= 0.0 {
        return 0.0;
    }
    let eps = alpha_eps * sd;
    let d = post.mean - a;
    let u1 = (a - post.mean - eps) / sd;
    let u2 = (a - post.mean + eps) / sd;
    let v = (eps * eps - d * d - sd * sd) * (cdf(u2) - cdf(u1))
        + sd * sd * (u2 * pdf(u2) - u1 * pdf(u1))
        + 2.0 * d * sd * (pdf(u2) - pdf(u1));
    v.max(0.0)
}

/// Binary entropy (nats) of the exceedance probability of level `a`.
pub fn ecl(post: Posterior, a: f64) -> f64 {
    if post.sd <= 0.0 {
        return 0.0;
    }
    let u = (post.mean - a) / post.sd;
    let p = cdf(u);
    let q = cdf(-u);
    let term = |v: f64| if v > 0.0 { -v * v.ln() } else { 0.0 };
    (term(p) + term(q)).clamp(0.0, std::f64::consts::LN_2)
}

/// Sum of per-level contour EI over `levels`.
pub fn ei_mc(post: Posterior, levels: &[f64], alpha_eps: f64) -> f64 {
    levels.iter().map(|&a| ei_contour(post, a, alpha_eps)).sum()
}

// ---------------------------------------------------------------------------
// selection over posteriors

fn argmax(scores: impl IntoIterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best
}

fn argmin(scores: impl IntoIterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    argmax(scores.into_iter().map(|(i, s)| (i, -s))).map(|(i, s)| (i, -s))
}

fn whole(best: Option<(usize, f64)>) -> Pick {
    let (index, score) = best.expect("candidate pool must be non-empty");
    Pick {
        index,
        score,
        region: RegionTag::Whole,
    }
}

pub fn select_ei(posts: &[Posterior], f_min: f64) -> Pick {
    whole(argmax(posts.iter().map(|&p| ei_min(p, f_min)).enumerate()))
}

pub fn select_lcb(posts: &[Posterior], rho: f64) -> Pick {
    whole(argmin(posts.iter().map(|&p| lcb(p, rho)).enumerate()))
}

pub fn select_ucb(posts: &[Posterior], rho: f64) -> Pick {
    whole(argmax(posts.iter().map(|&p| ucb(p, rho)).enumerate()))
}

/// Membership of the adaptive region `{lower bound <= min upper bound}` for
/// bounds `center -/+ sqrt(beta) sd`.
pub fn adaptive_region(centers: &[f64], posts: &[Posterior], beta: f64) -> Vec<bool> {
    let sb = beta.sqrt();
    let min_ub = centers
        .iter()
        .zip(posts)
        .map(|(c, p)| c + sb * p.sd)
        .fold(f64::INFINITY, f64::min);
    centers
        .iter()
        .zip(posts)
        .map(|(c, p)| c - sb * p.sd <= min_ub)
        .collect()
}

fn region_lcb(centers: &[f64], posts: &[Posterior], beta: f64, rho: f64) -> Pick {
    let region = adaptive_region(centers, posts, beta);
    let (index, score) = argmin(
        centers
            .iter()
            .zip(posts)
            .enumerate()
            .filter(|(i, _)| region[*i])
            .map(|(i, (c, p))| (i, c - rho * p.sd)),
    )
    .expect("adaptive region contains the upper-bound minimizer");
    Pick {
        index,
        score,
        region: RegionTag::ArsdRegion,
    }
}

pub fn select_arsd(posts: &[Posterior], beta: f64, rho: f64) -> Pick {
    let centers: Vec<f64> = posts.iter().map(|p| p.mean).collect();
    region_lcb(&centers, posts, beta, rho)
}

pub fn select_arsd_c(posts: &[Posterior], a: f64, beta: f64, rho: f64) -> Pick {
    let centers: Vec<f64> = posts.iter().map(|p| (p.mean - a).abs()).collect();
    region_lcb(&centers, posts, beta, rho)
}

pub fn select_lcb_c(posts: &[Posterior], a: f64, rho: f64) -> Pick {
    whole(argmin(
        posts.iter().map(|p| (p.mean - a).abs() - rho * p.sd).enumerate(),
    ))
}

pub fn select_ei_contour(posts: &[Posterior], a: f64, alpha_eps: f64) -> Pick {
    whole(argmax(posts.iter().map(|&p| ei_contour(p, a, alpha_eps)).enumerate()))
}

pub fn select_ecl(posts: &[Posterior], a: f64) -> Pick {
    whole(argmax(posts.iter().map(|&p| ecl(p, a)).enumerate()))
}

pub fn select_ei_mc(posts: &[Posterior], levels: &[f64], alpha_eps: f64) -> Pick {
    whole(argmax(posts.iter().map(|&p| ei_mc(p, levels, alpha_eps)).enumerate()))
}

/// Contour EI at the level predicted at the highest-variance candidate.
/// Returns the pick and that level.
pub fn select_ei_sc(posts: &[Posterior], alpha_eps: f64) -> (Pick, f64) {
    let (opt, _) = argmax(posts.iter().map(|p| p.sd).enumerate()).expect("candidate pool must be non-empty");
    let a = posts[opt].mean;
    (select_ei_contour(posts, a, alpha_eps), a)
}

/// Split into `A1 = {|mean - a| - sqrt(beta) sd > 0}` and its complement `A2`;
/// `true` marks `A1`.
pub fn rcc_partition(posts: &[Posterior], a: f64, beta: f64) -> Vec<bool> {
    let sb = beta.sqrt();
    posts.iter().map(|p| (p.mean - a).abs() - sb * p.sd > 0.0).collect()
}

pub fn rcc_ratio(post: Posterior, a: f64, delta: f64) -> f64 {
    post.sd / delta.max((post.mean - a).abs())
}

/// Region-based cooperative criterion: the max-variance candidate among the
/// part of `A1` inside the adaptive region competes with the max-ECL
/// candidate of `A2`; the larger `sd / max(delta, |mean - a|)` wins.
pub fn select_rcc(posts: &[Posterior], a: f64, beta: f64, delta: f64) -> Pick {
    let sb = beta.sqrt();
    let in_a1 = rcc_partition(posts, a, beta);
    let min_ub = posts
        .iter()
        .map(|p| (p.mean - a).abs() + sb * p.sd)
        .fold(f64::INFINITY, f64::min);
    let c1 = argmax(
        posts
            .iter()
            .enumerate()
            .filter(|(i, p)| in_a1[*i] && (p.mean - a).abs() - sb * p.sd <= min_ub)
            .map(|(i, p)| (i, p.sd)),
    );
    let c2 = argmax(
        posts
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_a1[*i])
            .map(|(i, &p)| (i, ecl(p, a))),
    );
    let tagged = |i: usize, region| Pick {
        index: i,
        score: rcc_ratio(posts[i], a, delta),
        region,
    };
    match (c1, c2) {
        (Some((i1, _)), Some((i2, _))) => {
            let (r1, r2) = (rcc_ratio(posts[i1], a, delta), rcc_ratio(posts[i2], a, delta));
            if r1 > r2 || (r1 == r2 && i1 < i2) {
                tagged(i1, RegionTag::A1)
            } else {
                tagged(i2, RegionTag::A2)
            }
        }
        (Some((i1, _)), None) => tagged(i1, RegionTag::A1),
        (None, Some((i2, _))) => tagged(i2, RegionTag::A2),
        (None, None) => panic!("candidate pool must be non-empty"),
    }
}

// ---------------------------------------------------------------------------
// model-level entry points

/// State of the run a selection is made in.
#[derive(Clone, Copy, Debug)]
pub struct SelectionContext {
    /// Current sample size `n`.
    pub n: usize,
    /// Number of level combinations `M`.
    pub m: usize,
    /// Best observed response so far.
    pub f_min: f64,
}

/// Scores the candidates under `spec`. `levels` must be supplied for EI-MC.
pub fn select_from_posteriors(
    posts: &[Posterior],
    spec: &AcquisitionSpec,
    ctx: &SelectionContext,
    levels: Option<&[f64]>,
) -> Pick {
    assert!(!posts.is_empty(), "candidate pool must be non-empty");
    let beta = || beta0n(ctx.n, ctx.m, spec.alpha_conf);
    match spec.kind {
        CriterionKind::Ei => select_ei(posts, ctx.f_min),
        CriterionKind::Lcb => select_lcb(posts, spec.rho),
        CriterionKind::Ucb => select_ucb(posts, spec.rho),
        CriterionKind::Arsd => select_arsd(posts, beta(), spec.rho),
        CriterionKind::EiC => select_ei_contour(posts, spec.level(), spec.alpha_eps),
        CriterionKind::Ecl => select_ecl(posts, spec.level()),
        CriterionKind::Rcc => select_rcc(posts, spec.level(), beta(), spec.delta),
        CriterionKind::ArsdC => select_arsd_c(posts, spec.level(), beta(), spec.rho),
        CriterionKind::LcbC => select_lcb_c(posts, spec.level(), spec.rho),
        CriterionKind::EiMc => {
            let levels = levels.or(spec.levels.as_deref()).expect("EI-MC needs contour levels");
            select_ei_mc(posts, levels, spec.alpha_eps)
        }
        CriterionKind::EiSc => select_ei_sc(posts, spec.alpha_eps).0,
    }
}

fn context_of(model: &crate::emulator::FittedGp) -> SelectionContext {
    let data = model.data();
    SelectionContext {
        n: data.len(),
        m: data.space().n_combinations(),
        f_min: data.responses().iter().copied().fold(f64::INFINITY, f64::min),
    }
}

fn non_empty(candidates: &[MixedPoint]) -> Result<()> {
    if candidates.is_empty() {
        Err(Error::InvalidArgument("candidate pool is empty".into()))
    } else {
        Ok(())
    }
}

pub fn arsd_select(
    model: &crate::emulator::FittedGp,
    candidates: &[MixedPoint],
    rho: f64,
    alpha_conf: f64,
) -> Result<Selection> {
    non_empty(candidates)?;
    let ctx = context_of(model);
    let posts = model.predict_many(candidates);
    let pick = select_arsd(&posts, beta0n(ctx.n, ctx.m, alpha_conf), rho);
    Ok(Selection::from_pick(pick, candidates))
}

pub fn rcc_select(
    model: &crate::emulator::FittedGp,
    candidates: &[MixedPoint],
    a: f64,
    alpha_conf: f64,
    delta: f64,
) -> Result<Selection> {
    non_empty(candidates)?;
    let ctx = context_of(model);
    let posts = model.predict_many(candidates);
    let pick = select_rcc(&posts, a, beta0n(ctx.n, ctx.m, alpha_conf), delta);
    Ok(Selection::from_pick(pick, candidates))
}

pub fn lcb_c_select(model: &dyn Predictor, candidates: &[MixedPoint], a: f64, rho: f64) -> Result<Selection> {
    non_empty(candidates)?;
    let posts = model.predict_many(candidates);
    Ok(Selection::from_pick(select_lcb_c(&posts, a, rho), candidates))
}

pub fn arsd_c_select(
    model: &crate::emulator::FittedGp,
    candidates: &[MixedPoint],
    a: f64,
    rho: f64,
    alpha_conf: f64,
) -> Result<Selection> {
    non_empty(candidates)?;
    let ctx = context_of(model);
    let posts = model.predict_many(candidates);
    let pick = select_arsd_c(&posts, a, beta0n(ctx.n, ctx.m, alpha_conf), rho);
    Ok(Selection::from_pick(pick, candidates))
}

pub fn ei_sc_select(model: &dyn Predictor, candidates: &[MixedPoint], alpha_eps: f64) -> Result<Selection> {
    non_empty(candidates)?;
    let posts = model.predict_many(candidates);
    Ok(Selection::from_pick(select_ei_sc(&posts, alpha_eps).0, candidates))
}

/// `c` equally spaced levels spanning the predicted range over a
/// `1000 p`-point balanced probe design (at least 1000 points). Collapses to
/// one level when the predicted surface is flat.
pub fn ei_mc_levels(model: &dyn Predictor, space: &DesignSpace, c: usize, rng: RngStream) -> Result<Vec<f64>> {
    if c == 0 {
        return Err(Error::InvalidArgument("need at least one contour level".into()));
    }
    let probe = oneshot_design(space, 1000 * space.p().max(1), rng)?;
    let (lo, hi) = model
        .predict_many(&probe)
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.mean), hi.max(p.mean))
        });
    if !(hi > lo) || c == 1 {
        return Ok(vec![0.5 * (lo + hi)]);
    }
    Ok((0..c).map(|j| lo + (hi - lo) * j as f64 / (c - 1) as f64).collect())
}

/// General selection for a fitted model; EI-MC levels are estimated from a
/// probe design drawn from `probe_rng` when the spec does not fix them.
pub fn select(
    model: &crate::emulator::FittedGp,
    candidates: &[MixedPoint],
    spec: &AcquisitionSpec,
    probe_rng: RngStream,
) -> Result<Selection> {
    spec.validate()?;
    non_empty(candidates)?;
    let ctx = context_of(model);
    let levels = if spec.kind == CriterionKind::EiMc && spec.levels.is_none() {
        Some(ei_mc_levels(model, model.space(), spec.n_contours, probe_rng)?)
    } else {
        None
    };
    let posts = model.predict_many(candidates);
    let pick = select_from_posteriors(&posts, spec, &ctx, levels.as_deref());
    Ok(Selection::from_pick(pick, candidates))
}

/// Per-candidate criterion values and region membership, for diagnostics.
pub fn candidate_scores(
    posts: &[Posterior],
    spec: &AcquisitionSpec,
    ctx: &SelectionContext,
    levels: Option<&[f64]>,
) -> Vec<(f64, RegionTag)> {
    let beta = beta0n(ctx.n, ctx.m, spec.alpha_conf);
    let whole = |f: &dyn Fn(Posterior) -> f64| posts.iter().map(|&p| (f(p), RegionTag::Whole)).collect();
    match spec.kind {
        CriterionKind::Ei => whole(&|p| ei_min(p, ctx.f_min)),
        CriterionKind::Lcb => whole(&|p| lcb(p, spec.rho)),
        CriterionKind::Ucb => whole(&|p| ucb(p, spec.rho)),
        CriterionKind::EiC => whole(&|p| ei_contour(p, spec.level(), spec.alpha_eps)),
        CriterionKind::Ecl => whole(&|p| ecl(p, spec.level())),
        CriterionKind::LcbC => whole(&|p| (p.mean - spec.level()).abs() - spec.rho * p.sd),
        CriterionKind::EiMc => {
            let levels = levels.or(spec.levels.as_deref()).unwrap_or(&[]);
            whole(&|p| ei_mc(p, levels, spec.alpha_eps))
        }
        CriterionKind::EiSc => {
            let (_, a) = select_ei_sc(posts, spec.alpha_eps);
            whole(&|p| ei_contour(p, a, spec.alpha_eps))
        }
        CriterionKind::Arsd | CriterionKind::ArsdC => {
            let centers: Vec<f64> = if spec.kind == CriterionKind::Arsd {
                posts.iter().map(|p| p.mean).collect()
            } else {
                posts.iter().map(|p| (p.mean - spec.level()).abs()).collect()
            };
            let region = adaptive_region(&centers, posts, beta);
            centers
                .iter()
                .zip(posts)
                .zip(region)
                .map(|((c, p), inside)| {
                    let tag = if inside {
                        RegionTag::ArsdRegion
                    } else {
                        RegionTag::Whole
                    };
                    (c - spec.rho * p.sd, tag)
                })
                .collect()
        }
        CriterionKind::Rcc => {
            let a = spec.level();
            rcc_partition(posts, a, beta)
                .into_iter()
                .zip(posts)
                .map(|(in_a1, &p)| {
                    let tag = if in_a1 { RegionTag::A1 } else { RegionTag::A2 };
                    (rcc_ratio(p, a, spec.delta), tag)
                })
                .collect()
        }
    }
}

/// Writes `index, x..., z..., mean, sd, score, region_tag` per candidate.
pub fn write_scores_csv<W: Write>(
    candidates: &[MixedPoint],
    posts: &[Posterior],
    scores: &[(f64, RegionTag)],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "# schema: mixact-scores v1")?;
    let (p, q) = candidates.first().map_or((0, 0), |w| (w.x.len(), w.z.len()));
    let mut header = vec!["index".to_string()];
    header.extend((1..=p).map(|k| format!("x{k}")));
    header.extend((1..=q).map(|h| format!("z{h}")));
    header.extend(["mean", "sd", "score", "region_tag"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for (i, ((w, post), (score, tag))) in candidates.iter().zip(posts).zip(scores).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(w.x.iter().map(|&v| fmt_f64(v)));
        row.extend(w.z.iter().map(u32::to_string));
        row.extend([fmt_f64(post.mean), fmt_f64(post.sd), fmt_f64(*score), tag.to_string()]);
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(mean: f64, sd: f64) -> Posterior {
        Posterior::new(mean, sd)
    }

    #[test]
    fn ei_min_values() {
        assert!((ei_min(post(0.0, 1.0), 0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert_eq!(ei_min(post(1.0, 0.0), 0.0), 0.0);
        assert_eq!(ei_min(post(-1.0, 0.0), 0.0), 1.0);
        // Phi(1) + phi(1)
        assert!((ei_min(post(0.0, 1.0), 1.0) - 1.083_315_470_248_6).abs() < 1e-9);
    }

    #[test]
    fn confidence_bounds() {
        assert_eq!(lcb(post(1.0, 0.5), 2.0), 0.0);
        assert_eq!(ucb(post(1.0, 0.5), 2.0), 2.0);
        assert_eq!(lcb(post(1.3, 0.5), 0.0), 1.3);
        assert_eq!(lcb(post(1.3, 0.0), 4.0), ucb(post(1.3, 0.0), 4.0));
    }

    #[test]
    fn beta_schedule() {
        assert!((beta0n(9, 3, 0.05) - 17.973).abs() < 5e-4);
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!(beta0n(1, 1, pi2_6).abs() < 1e-12);
        assert!(beta0n(10, 3, 0.05) > beta0n(9, 3, 0.05));
        assert!(beta0n(9, 4, 0.05) > beta0n(9, 3, 0.05));
        assert!(beta0n(9, 3, 0.1) < beta0n(9, 3, 0.05));
    }

    #[test]
    fn contour_ei_values() {
        // 2 phi(1)
        assert!((ei_contour(post(2.0, 1.0), 2.0, 1.0) - 0.483_941_449_038_286_7).abs() < 1e-12);
        assert_eq!(ei_contour(post(2.0, 0.0), 2.0, 1.0), 0.0);
        for t in [0.1, 0.7, 2.5] {
            let up = ei_contour(post(1.0 + t, 0.8), 1.0, 1.96);
            let down = ei_contour(post(1.0 - t, 0.8), 1.0, 1.96);
            assert!((up - down).abs() < 1e-14);
        }
    }

    #[test]
    fn ecl_values() {
        assert!((ecl(post(3.0, 0.2), 3.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((ecl(post(1.5, 0.5), 1.0) - 0.437_433_240_927_119).abs() < 1e-12);
        assert_eq!(ecl(post(1.0, 0.0), 2.0), 0.0);
        assert!((ecl(post(1.3, 0.4), 1.0) - ecl(post(0.7, 0.4), 1.0)).abs() < 1e-15);
    }

    #[test]
    fn multi_contour_reductions() {
        let p = post(0.3, 0.6);
        assert_eq!(ei_mc(p, &[1.0], 1.96), ei_contour(p, 1.0, 1.96));
        assert_eq!(ei_mc(post(0.3, 0.0), &[0.0, 1.0], 1.96), 0.0);
        let t = 0.4;
        let both = ei_mc(p, &[0.3 - t, 0.3 + t], 1.96);
        assert!((both - 2.0 * ei_contour(p, 0.3 + t, 1.96)).abs() < 1e-14);
    }

    #[test]
    fn arsd_degenerate_cases() {
        let one = [post(0.5, 0.2)];
        assert_eq!(select_arsd(&one, 10.0, 2.0).index, 0);
        let flat = [post(0.5, 0.0), post(-0.2, 0.0), post(0.1, 0.0)];
        let pick = select_arsd(&flat, 10.0, 2.0);
        assert_eq!(pick.index, 1);
        assert_eq!(pick.region, RegionTag::ArsdRegion);
    }

    #[test]
    fn arsd_restricts_to_region() {
        // candidate 2 has the best LCB but its lower bound is above the best upper bound
        let posts = [post(0.0, 0.1), post(0.2, 0.1), post(5.0, 2.0)];
        let beta = 1.0;
        // lb of candidate 2 = 3.0 > min ub = 0.1
        assert_eq!(select_lcb(&posts, 3.0).index, 2);
        assert_eq!(select_arsd(&posts, beta, 3.0).index, 0);
    }

    #[test]
    fn lcb_c_rules() {
        let posts = [post(1.0, 0.3), post(2.1, 0.3), post(2.5, 0.3)];
        assert_eq!(select_lcb_c(&posts, 2.0, 0.0).index, 1);
        assert_eq!(select_lcb_c(&posts, 2.0, 5.0).index, 1);
        let single = [post(7.0, 1.0)];
        assert_eq!(select_arsd_c(&single, 2.0, 4.0, 2.0).index, 0);
        let flat = [post(1.0, 0.0), post(2.05, 0.0), post(1.9, 0.0)];
        assert_eq!(select_arsd_c(&flat, 2.0, 4.0, 2.0).index, 1);
    }

    #[test]
    fn rcc_fallbacks() {
        // everything near the contour: A1 empty, pure ECL
        let posts = [post(2.0, 0.5), post(2.2, 0.5), post(1.5, 1.0)];
        let beta = 4.0;
        assert!(rcc_partition(&posts, 2.0, beta).iter().all(|&b| !b));
        let pick = select_rcc(&posts, 2.0, beta, 0.05);
        assert_eq!(pick.index, select_ecl(&posts, 2.0).index);
        assert_eq!(pick.region, RegionTag::A2);
        // everything far with equal distance: largest sd wins
        let posts = [post(10.0, 0.1), post(-6.0, 0.3), post(10.0, 0.2)];
        assert!(rcc_partition(&posts, 2.0, 1.0).iter().all(|&b| b));
        let pick = select_rcc(&posts, 2.0, 1.0, 0.05);
        assert_eq!(pick.index, 1);
        assert_eq!(pick.region, RegionTag::A1);
    }

    #[test]
    fn ei_sc_rules() {
        let one = [post(3.0, 0.4)];
        let (pick, a) = select_ei_sc(&one, 1.96);
        assert_eq!((pick.index, a), (0, 3.0));
        let two = [post(1.0, 0.5), post(2.0, 0.5)];
        let (_, a) = select_ei_sc(&two, 1.96);
        assert_eq!(a, 1.0);
    }

    #[test]
    fn kind_parsing() {
        for k in CriterionKind::ALL {
            assert_eq!(k.name().parse::<CriterionKind>().unwrap(), k);
        }
        assert_eq!("arsd_c".parse::<CriterionKind>().unwrap(), CriterionKind::ArsdC);
        assert!("EIX".parse::<CriterionKind>().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(AcquisitionSpec::new(CriterionKind::Rcc).validate().is_err());
        assert!(AcquisitionSpec::new(CriterionKind::Rcc)
            .with_level(1.0)
            .validate()
            .is_ok());
        let mut s = AcquisitionSpec::new(CriterionKind::EiMc);
        s.levels = Some(vec![1.0, 1.0]);
        assert!(s.validate().is_err());
    }
}
