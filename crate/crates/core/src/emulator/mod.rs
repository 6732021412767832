//! Gaussian-process emulator for mixed inputs.
//!
//! Fitting minimizes the profiled objective
//! `log|Phi| + (y - mu 1)' Phi^-1 (y - mu 1)` with `mu` replaced by its GLS
//! estimate, over log-transformed kernel hyperparameters. Prediction uses the
//! universal-kriging form, so the variance carries the extra term for the
//! uncertainty in `mu`.

pub mod kernel;

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

pub use kernel::{kernel_by_name, CovarianceKernel, EzGpKernel, EzGpParams, FactorParams, HyperBounds, ProductKernel};

use crate::design_space::{Dataset, DesignSpace, MixedPoint};
use crate::error::{Error, Result};
use crate::optim::{minimize_box, BoxOptions};
use crate::rng::RngStream;
use crate::sampling::random_lhd;

pub const MODEL_SCHEMA: &str = "mixact-model v1";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub sd: f64,
}

impl Posterior {
    pub fn new(mean: f64, sd: f64) -> Self {
        debug_assert!(sd >= 0.0);
        Self { mean, sd }
    }
}

/// Anything that produces a predictive distribution at a point.
pub trait Predictor: Send + Sync {
    fn predict(&self, w: &MixedPoint) -> Posterior;

    fn predict_many(&self, points: &[MixedPoint]) -> Vec<Posterior> {
        points.iter().map(|w| self.predict(w)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub bounds: HyperBounds,
    /// Initial diagonal jitter, relative to the prior variance.
    pub jitter: f64,
    /// Largest relative jitter tried before a parameter point is rejected.
    pub max_jitter: f64,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iters: 200,
            bounds: HyperBounds::default(),
            jitter: 1e-8,
            max_jitter: 1e-4,
            tolerance: 1e-9,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.jitter > 0.0 && self.max_jitter >= self.jitter) {
            return Err(Error::InvalidArgument(
                "jitter must be positive and below max_jitter".into(),
            ));
        }
        Ok(())
    }
}

fn kernel_matrix(kernel: &dyn CovarianceKernel, h: &[f64], points: &[MixedPoint]) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = kernel.cov(h, &points[i], &points[j]);
            k[(i, j)] = c;
            k[(j, i)] = c;
        }
    }
    k
}

/// Cholesky of `K + jitter*I`, escalating the relative jitter tenfold until
/// it succeeds or exceeds `max_rel`. Returns the factor and absolute jitter.
fn factor_escalating(k: &DMatrix<f64>, prior_var: f64, rel: f64, max_rel: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut rel = rel;
    loop {
        let jitter = rel * prior_var;
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Ok((c, jitter));
        }
        if rel * 10.0 > max_rel * (1.0 + 1e-12) {
            return Err(Error::FactorizationFailure { jitter });
        }
        rel *= 10.0;
    }
}

/// Jittered Gram matrix `Phi + jitter*I` for the EzGP covariance and its
/// lower Cholesky factor.
pub fn gram_matrix(data: &Dataset, params: &EzGpParams, jitter: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    params.validate(data.space())?;
    let kernel = EzGpKernel::new(data.space().clone());
    gram_matrix_with(&kernel, &params.to_hyper(), data, jitter)
}

pub fn gram_matrix_with(
    kernel: &dyn CovarianceKernel,
    h: &[f64],
    data: &Dataset,
    jitter: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut m = kernel_matrix(kernel, h, data.points());
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    let l = m
        .clone()
        .cholesky()
        .ok_or(Error::FactorizationFailure { jitter })?
        .unpack();
    Ok((m, l))
}

/// GLS estimate `(1' Phi^-1 1)^-1 1' Phi^-1 y`.
pub fn profile_mu(factor: &Cholesky<f64, Dyn>, y: &[f64]) -> f64 {
    let n = y.len();
    let ones = DVector::from_element(n, 1.0);
    let phi_inv_one = factor.solve(&ones);
    let phi_inv_y = factor.solve(&DVector::from_column_slice(y));
    phi_inv_y.sum() / phi_inv_one.sum()
}

struct Profiled {
    nll: f64,
    mu: f64,
    alpha: DVector<f64>,
    phi_inv_one: DVector<f64>,
}

fn profiled(factor: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> Profiled {
    let ones = DVector::from_element(y.len(), 1.0);
    let phi_inv_one = factor.solve(&ones);
    let phi_inv_y = factor.solve(y);
    let mu = phi_inv_y.sum() / phi_inv_one.sum();
    let alpha = &phi_inv_y - &phi_inv_one * mu;
    let log_det = 2.0 * factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let resid = y.add_scalar(-mu);
    let nll = log_det + resid.dot(&alpha);
    Profiled {
        nll,
        mu,
        alpha,
        phi_inv_one,
    }
}

/// Profiled objective at the EzGP parameters in `params` (its `mu` is
/// ignored) with absolute diagonal `jitter`; `+inf` if `Phi` cannot be factored.
pub fn neg_log_likelihood(data: &Dataset, params: &EzGpParams, jitter: f64) -> f64 {
    let kernel = EzGpKernel::new(data.space().clone());
    neg_log_likelihood_with(&kernel, &params.to_hyper(), data, jitter)
}

pub fn neg_log_likelihood_with(kernel: &dyn CovarianceKernel, h: &[f64], data: &Dataset, jitter: f64) -> f64 {
    let mut m = kernel_matrix(kernel, h, data.points());
    for i in 0..m.nrows() {
        m[(i, i)] += jitter;
    }
    match m.cholesky() {
        Some(c) => profiled(&c, &DVector::from_column_slice(data.responses())).nll,
        None => f64::INFINITY,
    }
}

/// Objective and gradient over log hyperparameters, with jitter escalation.
struct Objective<'a> {
    kernel: &'a dyn CovarianceKernel,
    points: &'a [MixedPoint],
    y: DVector<f64>,
    rel_jitter: f64,
    max_rel_jitter: f64,
    pair_grads: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(kernel: &'a dyn CovarianceKernel, data: &'a Dataset, opts: &FitOptions) -> Self {
        let n = data.len();
        let nh = kernel.n_hyper();
        Self {
            kernel,
            points: data.points(),
            y: DVector::from_column_slice(data.responses()),
            rel_jitter: opts.jitter,
            max_rel_jitter: opts.max_jitter,
            pair_grads: vec![0.0; n * (n + 1) / 2 * nh],
            scratch: vec![0.0; nh],
        }
    }

    fn eval(&mut self, log_h: &[f64], grad: &mut [f64]) -> f64 {
        let h: Vec<f64> = log_h.iter().map(|v| v.exp()).collect();
        let n = self.points.len();
        let nh = h.len();
        let mut k = DMatrix::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            for j in 0..=i {
                let g = &mut self.pair_grads[idx * nh..(idx + 1) * nh];
                let c = self.kernel.cov_grad(&h, &self.points[i], &self.points[j], g);
                k[(i, j)] = c;
                k[(j, i)] = c;
                idx += 1;
            }
        }
        let prior_var = self.kernel.prior_variance(&h);
        let (factor, jitter) = match factor_escalating(&k, prior_var, self.rel_jitter, self.max_rel_jitter) {
            Ok(f) => f,
            Err(_) => return f64::INFINITY,
        };
        let pr = profiled(&factor, &self.y);
        if !pr.nll.is_finite() {
            return f64::INFINITY;
        }
        // d nll / d t = tr(Phi^-1 dPhi) - alpha' dPhi alpha  (mu profiled out)
        let inv = factor.inverse();
        grad.fill(0.0);
        let mut idx = 0;
        for i in 0..n {
            for j in 0..=i {
                let w = inv[(i, j)] - pr.alpha[i] * pr.alpha[j];
                let w = if i == j { w } else { 2.0 * w };
                let g = &self.pair_grads[idx * nh..(idx + 1) * nh];
                for t in 0..nh {
                    grad[t] += w * g[t];
                }
                idx += 1;
            }
        }
        let rel = jitter / prior_var;
        self.kernel.prior_variance_grad(&h, &mut self.scratch);
        let w_diag: f64 = (0..n).map(|i| inv[(i, i)] - pr.alpha[i] * pr.alpha[i]).sum();
        for (g, s) in grad.iter_mut().zip(&self.scratch) {
            *g += w_diag * rel * s;
        }
        pr.nll
    }
}

/// Gradient of the profiled objective in the log hyperparameters, at the
/// fitter's initial relative jitter. Exposed for verification.
pub fn nll_gradient(
    kernel: &dyn CovarianceKernel,
    data: &Dataset,
    log_h: &[f64],
    opts: &FitOptions,
) -> (f64, Vec<f64>) {
    let mut obj = Objective::new(kernel, data, opts);
    let mut g = vec![0.0; log_h.len()];
    let f = obj.eval(log_h, &mut g);
    (f, g)
}

/// Profiled objective at log hyperparameters, as seen by the fitter.
pub fn nll_at(kernel: &dyn CovarianceKernel, data: &Dataset, log_h: &[f64], opts: &FitOptions) -> f64 {
    nll_gradient(kernel, data, log_h, opts).0
}

fn response_scale(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 1e-14 * (1.0 + mean * mean) {
        var
    } else {
        1.0
    }
}

/// Fits the EzGP emulator.
pub fn fit(data: &Dataset, opts: &FitOptions, rng: RngStream) -> Result<FittedGp> {
    fit_kernel(Arc::new(EzGpKernel::new(data.space().clone())), data, opts, rng)
}

/// Multi-start bounded quasi-Newton maximum likelihood for any kernel.
pub fn fit_kernel(
    kernel: Arc<dyn CovarianceKernel>,
    data: &Dataset,
    opts: &FitOptions,
    rng: RngStream,
) -> Result<FittedGp> {
    opts.validate()?;
    if data.len() < 2 {
        return Err(Error::FitFailure(format!(
            "need at least 2 observations, have {}",
            data.len()
        )));
    }
    let bounds = kernel.log_bounds(response_scale(data.responses()), &opts.bounds);
    let box_opts = BoxOptions {
        max_iters: opts.max_iters,
        ftol: opts.tolerance,
        ..Default::default()
    };
    // Starts form an LHD over the central half of each log interval; the
    // likelihood is nearly flat near the box edges.
    let starts = random_lhd(opts.restarts, bounds.len(), rng);
    let mut objective = Objective::new(kernel.as_ref(), data, opts);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for u in &starts {
        let x0: Vec<f64> = bounds
            .iter()
            .zip(u)
            .map(|(&(lo, hi), v)| lo + (hi - lo) * (0.25 + 0.5 * v))
            .collect();
        let Some(res) = minimize_box(|x, g| objective.eval(x, g), &x0, &bounds, &box_opts) else {
            continue;
        };
        if best.as_ref().is_none_or(|(_, f)| res.fx < *f) {
            best = Some((res.x, res.fx));
        }
    }
    let (log_h, _) = best
        .ok_or_else(|| Error::FitFailure("every restart failed to factor the Gram matrix at its start point".into()))?;
    let h: Vec<f64> = log_h.iter().map(|v| v.exp()).collect();
    let mut model = FittedGp::from_hyper(kernel, h, data.clone(), opts)?;
    model.seed = Some(rng);
    Ok(model)
}

/// A fitted emulator with cached factorization.
#[derive(Clone, Debug)]
pub struct FittedGp {
    kernel: Arc<dyn CovarianceKernel>,
    hyper: Vec<f64>,
    mu: f64,
    data: Dataset,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    phi_inv_one: DVector<f64>,
    one_phi_inv_one: f64,
    prior_var: f64,
    jitter: f64,
    nll: f64,
    seed: Option<RngStream>,
}

impl FittedGp {
    /// Conditions the kernel at fixed hyperparameters on `data`, with `mu`
    /// profiled.
    pub fn from_hyper(
        kernel: Arc<dyn CovarianceKernel>,
        hyper: Vec<f64>,
        data: Dataset,
        opts: &FitOptions,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        if hyper.len() != kernel.n_hyper() {
            return Err(Error::InvalidArgument(format!(
                "{} hyperparameters for a kernel taking {}",
                hyper.len(),
                kernel.n_hyper()
            )));
        }
        let k = kernel_matrix(kernel.as_ref(), &hyper, data.points());
        let prior_var = kernel.prior_variance(&hyper);
        let (factor, jitter) = factor_escalating(&k, prior_var, opts.jitter, opts.max_jitter)?;
        let y = DVector::from_column_slice(data.responses());
        let pr = profiled(&factor, &y);
        Ok(Self {
            kernel,
            hyper,
            mu: pr.mu,
            one_phi_inv_one: pr.phi_inv_one.sum(),
            chol_l: factor.unpack(),
            alpha: pr.alpha,
            phi_inv_one: pr.phi_inv_one,
            prior_var,
            jitter,
            nll: pr.nll,
            data,
            seed: None,
        })
    }

    /// EzGP model at fixed named parameters (`params.mu` is re-profiled).
    pub fn from_ezgp_params(params: &EzGpParams, data: Dataset, opts: &FitOptions) -> Result<Self> {
        params.validate(data.space())?;
        let kernel = Arc::new(EzGpKernel::new(data.space().clone()));
        Self::from_hyper(kernel, params.to_hyper(), data, opts)
    }

    pub fn kernel(&self) -> &dyn CovarianceKernel {
        self.kernel.as_ref()
    }

    pub fn kernel_name(&self) -> &'static str {
        self.kernel.name()
    }

    pub fn space(&self) -> &DesignSpace {
        self.data.space()
    }

    pub fn hyper(&self) -> &[f64] {
        &self.hyper
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Lower Cholesky factor of the jittered Gram matrix.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol_l
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Achieved profiled objective (lower is better).
    pub fn nll(&self) -> f64 {
        self.nll
    }

    /// Log marginal likelihood up to constants shared by all kernels.
    pub fn log_likelihood(&self) -> f64 {
        -0.5 * self.nll
    }

    pub fn prior_variance(&self) -> f64 {
        self.prior_var
    }

    pub fn seed(&self) -> Option<RngStream> {
        self.seed
    }

    /// Named parameters when the kernel is EzGP.
    pub fn ezgp_params(&self) -> Option<EzGpParams> {
        (self.kernel.name() == "ezgp").then(|| EzGpParams::from_hyper(self.space(), self.mu, &self.hyper))
    }

    /// Predictive mean and variance before the variance is clamped at zero.
    pub fn predict_unclamped(&self, w: &MixedPoint) -> (f64, f64) {
        let r0 = DVector::from_iterator(
            self.data.len(),
            self.data.points().iter().map(|p| self.kernel.cov(&self.hyper, w, p)),
        );
        let mean = self.mu + r0.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&r0)
            .expect("Cholesky factor has a positive diagonal");
        let u = 1.0 - self.phi_inv_one.dot(&r0);
        let var = self.prior_var - v.norm_squared() + u * u / self.one_phi_inv_one;
        (mean, var)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            schema: MODEL_SCHEMA.to_string(),
            kernel: self.kernel.name().to_string(),
            space: self.space().clone(),
            mu: self.mu,
            hyper: self.hyper.clone(),
            ezgp: self.ezgp_params(),
            jitter: self.jitter,
            nll: self.nll,
            seed: self.seed,
            data: self.data.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }

    /// Rebuilds a model from its document, refactoring at the stored
    /// hyperparameters.
    pub fn from_document(doc: &ModelDocument, opts: &FitOptions) -> Result<Self> {
        if doc.schema != MODEL_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "unsupported model schema '{}'",
                doc.schema
            )));
        }
        let kernel = kernel_by_name(&doc.kernel, doc.space.clone())?;
        let mut model = Self::from_hyper(kernel, doc.hyper.clone(), doc.data.clone(), opts)?;
        model.seed = doc.seed;
        Ok(model)
    }

    pub fn from_json(text: &str, opts: &FitOptions) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("model document: {e}")))?;
        Self::from_document(&doc, opts)
    }
}

impl Predictor for FittedGp {
    fn predict(&self, w: &MixedPoint) -> Posterior {
        let (mean, var) = self.predict_unclamped(w);
        Posterior::new(mean, var.max(0.0).sqrt())
    }
}

/// Audit record of a fitted model; see `docs/model-document.md`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: String,
    pub kernel: String,
    pub space: DesignSpace,
    pub mu: f64,
    /// Kernel hyperparameters on their natural scale, in the kernel's layout.
    pub hyper: Vec<f64>,
    pub ezgp: Option<EzGpParams>,
    pub jitter: f64,
    pub nll: f64,
    pub seed: Option<RngStream>,
    pub data: Dataset,
}
