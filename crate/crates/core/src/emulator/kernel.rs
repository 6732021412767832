//! Mixed-input covariance functions.
//!
//! Hyperparameters are passed on their natural (positive) scale; gradients
//! are taken with respect to their logarithms, which is the scale the fitter
//! optimizes on.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::design_space::{DesignSpace, MixedPoint};
use crate::error::{Error, Result};

pub trait CovarianceKernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn space(&self) -> &DesignSpace;
    fn n_hyper(&self) -> usize;
    /// Bounds on the log hyperparameters; `var_scale` is the response variance.
    fn log_bounds(&self, var_scale: f64, opts: &HyperBounds) -> Vec<(f64, f64)>;
    /// `phi(w, w)`, identical for every `w`.
    fn prior_variance(&self, h: &[f64]) -> f64;
    fn prior_variance_grad(&self, h: &[f64], out: &mut [f64]);
    fn cov(&self, h: &[f64], a: &MixedPoint, b: &MixedPoint) -> f64;
    /// Returns `cov(a, b)` and writes its derivative in each log hyperparameter.
    fn cov_grad(&self, h: &[f64], a: &MixedPoint, b: &MixedPoint, out: &mut [f64]) -> f64;
}

/// Box for the hyperparameter search: correlation parameters absolute,
/// variances relative to the response variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub theta: (f64, f64),
    pub var_rel: (f64, f64),
    /// Exchangeable cross-level correlation of the product kernel.
    pub level_corr: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            theta: (1e-3, 1e3),
            var_rel: (1e-6, 1e2),
            level_corr: (1e-3, 0.999),
        }
    }
}

/// The additive EzGP covariance: a shared Gaussian component on `x` plus, for
/// each factor, a level-specific Gaussian component switched on only when
/// both inputs sit at the same level.
///
/// Hyperparameter layout: `sigma2_0..sigma2_q`, then `theta^(0)` (p values),
/// then for each factor `h` and level `l` the `p` values `theta^(h)_{., l}`.
#[derive(Clone, Debug)]
pub struct EzGpKernel {
    space: DesignSpace,
    block_offsets: Vec<usize>,
}

impl EzGpKernel {
    pub fn new(space: DesignSpace) -> Self {
        let p = space.p();
        let q = space.q();
        let mut block_offsets = Vec::with_capacity(q);
        let mut off = q + 1 + p;
        for &m in space.levels() {
            block_offsets.push(off);
            off += p * m as usize;
        }
        Self { space, block_offsets }
    }

    fn theta_offset(&self, h: usize, level: u32) -> usize {
        self.block_offsets[h] + self.space.p() * (level as usize - 1)
    }
}

fn sqdist(a: &[f64], b: &[f64], out: &mut [f64]) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        let d = x - y;
        *o = d * d;
    }
}

fn weighted(theta: &[f64], d2: &[f64]) -> f64 {
    theta.iter().zip(d2).map(|(t, d)| t * d).sum()
}

const MAX_P_STACK: usize = 16;

impl CovarianceKernel for EzGpKernel {
    fn name(&self) -> &'static str {
        "ezgp"
    }

    fn space(&self) -> &DesignSpace {
        &self.space
    }

    fn n_hyper(&self) -> usize {
        EzGpParams::count(&self.space) - 1
    }

    fn log_bounds(&self, var_scale: f64, b: &HyperBounds) -> Vec<(f64, f64)> {
        let q = self.space.q();
        let var = ((b.var_rel.0 * var_scale).ln(), (b.var_rel.1 * var_scale).ln());
        let theta = (b.theta.0.ln(), b.theta.1.ln());
        let mut out = vec![var; q + 1];
        out.resize(self.n_hyper(), theta);
        out
    }

    fn prior_variance(&self, h: &[f64]) -> f64 {
        h[..=self.space.q()].iter().sum()
    }

    fn prior_variance_grad(&self, h: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let q = self.space.q();
        out[..=q].copy_from_slice(&h[..=q]);
    }

    fn cov(&self, h: &[f64], a: &MixedPoint, b: &MixedPoint) -> f64 {
        let p = self.space.p();
        let q = self.space.q();
        let mut buf = [0.0; MAX_P_STACK];
        let mut heap;
        let d2: &mut [f64] = if p <= MAX_P_STACK {
            &mut buf[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        sqdist(&a.x, &b.x, d2);
        let mut c = h[0] * (-weighted(&h[q + 1..q + 1 + p], d2)).exp();
        for f in 0..q {
            if a.z[f] == b.z[f] {
                let off = self.theta_offset(f, a.z[f]);
                c += h[1 + f] * (-weighted(&h[off..off + p], d2)).exp();
            }
        }
        c
    }

    fn cov_grad(&self, h: &[f64], a: &MixedPoint, b: &MixedPoint, out: &mut [f64]) -> f64 {
        let p = self.space.p();
        let q = self.space.q();
        out.fill(0.0);
        let mut d2 = vec![0.0; p];
        sqdist(&a.x, &b.x, &mut d2);
        let base = q + 1;
        let c0 = h[0] * (-weighted(&h[base..base + p], &d2)).exp();
        out[0] = c0;
        for k in 0..p {
            out[base + k] = -c0 * h[base + k] * d2[k];
        }
        let mut c = c0;
        for f in 0..q {
            if a.z[f] == b.z[f] {
                let off = self.theta_offset(f, a.z[f]);
                let cf = h[1 + f] * (-weighted(&h[off..off + p], &d2)).exp();
                out[1 + f] = cf;
                for k in 0..p {
                    out[off + k] = -cf * h[off + k] * d2[k];
                }
                c += cf;
            }
        }
        c
    }
}

/// Named EzGP parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EzGpParams {
    pub mu: f64,
    pub var0: f64,
    pub theta0: Vec<f64>,
    pub factors: Vec<FactorParams>,
}

/// Per-factor variance and its `p x m_h` correlation matrix, `theta[k][l-1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    pub var: f64,
    pub theta: Vec<Vec<f64>>,
}

impl EzGpParams {
    /// `2 + p + q + p * sum(m_h)`.
    pub fn count(space: &DesignSpace) -> usize {
        let p = space.p();
        let sum_m: usize = space.levels().iter().map(|&m| m as usize).sum();
        2 + p + space.q() + p * sum_m
    }

    /// Checks shapes against `space` and positivity of every variance and
    /// correlation parameter.
    pub fn validate(&self, space: &DesignSpace) -> Result<()> {
        let p = space.p();
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.theta0.len() != p || self.factors.len() != space.q() {
            return bad("parameter shapes do not match the design space".into());
        }
        let mut n = 2 + p;
        for (f, (fp, &m)) in self.factors.iter().zip(space.levels()).enumerate() {
            if fp.theta.len() != p || fp.theta.iter().any(|row| row.len() != m as usize) {
                return bad(format!("theta block of factor {f} is not {p}x{m}"));
            }
            n += 1 + p * m as usize;
        }
        assert_eq!(n, Self::count(space), "EzGP parameter count mismatch");
        let positive = std::iter::once(self.var0).chain(self.theta0.iter().copied()).chain(
            self.factors
                .iter()
                .flat_map(|f| std::iter::once(f.var).chain(f.theta.iter().flatten().copied())),
        );
        for v in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("non-positive variance or correlation parameter {v}"));
            }
        }
        if !self.mu.is_finite() {
            return bad("mu is not finite".into());
        }
        Ok(())
    }

    /// Kernel hyperparameter vector (everything except `mu`).
    pub fn to_hyper(&self) -> Vec<f64> {
        let mut h = vec![self.var0];
        h.extend(self.factors.iter().map(|f| f.var));
        h.extend_from_slice(&self.theta0);
        for f in &self.factors {
            let m = f.theta.first().map_or(0, Vec::len);
            for l in 0..m {
                h.extend(f.theta.iter().map(|row| row[l]));
            }
        }
        h
    }

    pub fn from_hyper(space: &DesignSpace, mu: f64, h: &[f64]) -> Self {
        let p = space.p();
        let q = space.q();
        assert_eq!(h.len() + 1, Self::count(space), "EzGP parameter count mismatch");
        let theta0 = h[q + 1..q + 1 + p].to_vec();
        let mut off = q + 1 + p;
        let factors = space
            .levels()
            .iter()
            .enumerate()
            .map(|(f, &m)| {
                let m = m as usize;
                let mut theta = vec![vec![0.0; m]; p];
                for l in 0..m {
                    for (k, row) in theta.iter_mut().enumerate() {
                        row[l] = h[off + l * p + k];
                    }
                }
                off += p * m;
                FactorParams { var: h[1 + f], theta }
            })
            .collect();
        Self {
            mu,
            var0: h[0],
            theta0,
            factors,
        }
    }

    /// `sum_{i=0..q} sigma2_i`.
    pub fn total_variance(&self) -> f64 {
        self.var0 + self.factors.iter().map(|f| f.var).sum::<f64>()
    }
}

/// Product kernel: `sigma2 * exp(-sum theta_k dx_k^2) * prod_h c_h^{1(z_h differ)}`
/// with exchangeable cross-level correlations `c_h` in (0, 1).
///
/// Hyperparameter layout: `sigma2`, `theta` (p values), `c_1..c_q`.
#[derive(Clone, Debug)]
pub struct ProductKernel {
    space: DesignSpace,
}

impl ProductKernel {
    pub fn new(space: DesignSpace) -> Self {
        Self { space }
    }
}

impl CovarianceKernel for ProductKernel {
    fn name(&self) -> &'static str {
        "product"
    }

    fn space(&self) -> &DesignSpace {
        &self.space
    }

    fn n_hyper(&self) -> usize {
        1 + self.space.p() + self.space.q()
    }

    fn log_bounds(&self, var_scale: f64, b: &HyperBounds) -> Vec<(f64, f64)> {
        let mut out = vec![((b.var_rel.0 * var_scale).ln(), (b.var_rel.1 * var_scale).ln())];
        out.extend(std::iter::repeat_n((b.theta.0.ln(), b.theta.1.ln()), self.space.p()));
        out.extend(std::iter::repeat_n(
            (b.level_corr.0.ln(), b.level_corr.1.ln()),
            self.space.q(),
        ));
        out
    }

    fn prior_variance(&self, h: &[f64]) -> f64 {
        h[0]
    }

    fn prior_variance_grad(&self, h: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = h[0];
    }

    fn cov(&self, h: &[f64], a: &MixedPoint, b: &MixedPoint) -> f64 {
        let p = self.space.p();
        let mut s = 0.0;
        for k in 0..p {
            let d = a.x[k] - b.x[k];
            s += h[1 + k] * d * d;
        }
        let mut c = h[0] * (-s).exp();
        for f in 0..self.space.q() {
            if a.z[f] != b.z[f] {
                c *= h[1 + p + f];
            }
        }
        c
    }

    fn cov_grad(&self, h: &[f64], a: &MixedPoint, b: &MixedPoint, out: &mut [f64]) -> f64 {
        let p = self.space.p();
        let c = self.cov(h, a, b);
        out[0] = c;
        for k in 0..p {
            let d = a.x[k] - b.x[k];
            out[1 + k] = -c * h[1 + k] * d * d;
        }
        for f in 0..self.space.q() {
            out[1 + p + f] = if a.z[f] != b.z[f] { c } else { 0.0 };
        }
        c
    }
}

/// Rebuilds a kernel from the name stored in a model document.
pub fn kernel_by_name(name: &str, space: DesignSpace) -> Result<Arc<dyn CovarianceKernel>> {
    match name {
        "ezgp" => Ok(Arc::new(EzGpKernel::new(space))),
        "product" => Ok(Arc::new(ProductKernel::new(space))),
        other => Err(Error::InvalidArgument(format!("unknown kernel '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_params() -> (DesignSpace, EzGpParams) {
        let space = DesignSpace::new(1, vec![2]).unwrap();
        let params = EzGpParams {
            mu: 0.0,
            var0: 1.0,
            theta0: vec![1.0],
            factors: vec![FactorParams {
                var: 2.0,
                theta: vec![vec![3.0, 0.5]],
            }],
        };
        (space, params)
    }

    #[test]
    fn hand_evaluated_covariance() {
        let (space, params) = toy_params();
        let k = EzGpKernel::new(space);
        let h = params.to_hyper();
        let a = MixedPoint::new(vec![0.0], vec![1]);
        let b = MixedPoint::new(vec![0.5], vec![1]);
        let expected = (-0.25f64).exp() + 2.0 * (-0.75f64).exp();
        assert!((k.cov(&h, &a, &b) - expected).abs() < 1e-15);
        assert!((expected - 1.72353).abs() < 1e-5);
        // same point: total variance
        assert_eq!(k.cov(&h, &a, &a), 3.0);
        // different level: shared term only
        let c = MixedPoint::new(vec![0.5], vec![2]);
        assert!((k.cov(&h, &a, &c) - (-0.25f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn param_layout_round_trip() {
        let space = DesignSpace::new(2, vec![2, 3]).unwrap();
        assert_eq!(EzGpParams::count(&space), 2 + 2 + 2 + 2 * 5);
        let k = EzGpKernel::new(space.clone());
        let h: Vec<f64> = (0..k.n_hyper()).map(|i| 1.0 + i as f64).collect();
        let params = EzGpParams::from_hyper(&space, 0.5, &h);
        params.validate(&space).unwrap();
        assert_eq!(params.to_hyper(), h);
        assert_eq!(params.total_variance(), 1.0 + 2.0 + 3.0);
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let (space, mut params) = toy_params();
        params.factors[0].theta[0].push(1.0);
        assert!(params.validate(&space).is_err());
        let (space, mut params) = toy_params();
        params.var0 = 0.0;
        assert!(params.validate(&space).is_err());
    }

    fn check_gradient(kernel: &dyn CovarianceKernel, h: &[f64], a: &MixedPoint, b: &MixedPoint) {
        let mut g = vec![0.0; h.len()];
        let c = kernel.cov_grad(h, a, b, &mut g);
        assert!((c - kernel.cov(h, a, b)).abs() < 1e-14);
        for t in 0..h.len() {
            let step: f64 = 1e-6;
            let mut hp = h.to_vec();
            let mut hm = h.to_vec();
            hp[t] *= step.exp();
            hm[t] *= (-step).exp();
            let fd = (kernel.cov(&hp, a, b) - kernel.cov(&hm, a, b)) / (2.0 * step);
            assert!(
                (fd - g[t]).abs() < 1e-7 * (1.0 + fd.abs()),
                "param {t}: fd {fd} vs {}",
                g[t]
            );
        }
    }

    #[test]
    fn kernel_gradients_match_finite_differences() {
        let space = DesignSpace::new(2, vec![2, 3]).unwrap();
        let a = MixedPoint::new(vec![0.1, 0.7], vec![1, 3]);
        let b = MixedPoint::new(vec![0.4, 0.2], vec![1, 2]);
        let ez = EzGpKernel::new(space.clone());
        let h: Vec<f64> = (0..ez.n_hyper()).map(|i| 0.3 + 0.1 * i as f64).collect();
        check_gradient(&ez, &h, &a, &b);
        check_gradient(&ez, &h, &a, &a);
        let pk = ProductKernel::new(space);
        check_gradient(&pk, &[1.5, 2.0, 0.7, 0.3, 0.6], &a, &b);
    }
}
