#![allow(dead_code)]

use mixact::emulator::kernel::{EzGpParams, FactorParams};
use mixact::{Dataset, DesignSpace, MixedPoint};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Covariance written out directly from the additive definition.
pub fn oracle_cov(params: &EzGpParams, a: &MixedPoint, b: &MixedPoint) -> f64 {
    let sq = |theta: &dyn Fn(usize) -> f64| -> f64 {
        a.x.iter()
            .zip(&b.x)
            .enumerate()
            .map(|(k, (u, v))| theta(k) * (u - v) * (u - v))
            .sum()
    };
    let mut c = params.var0 * (-sq(&|k| params.theta0[k])).exp();
    for (h, f) in params.factors.iter().enumerate() {
        if a.z[h] == b.z[h] {
            let l = (a.z[h] - 1) as usize;
            c += f.var * (-sq(&|k| f.theta[k][l])).exp();
        }
    }
    c
}

pub fn random_params(space: &DesignSpace, rng: &mut impl Rng) -> EzGpParams {
    let p = space.p();
    EzGpParams {
        mu: 0.0,
        var0: rng.random_range(0.5..2.0),
        theta0: (0..p).map(|_| rng.random_range(0.2..4.0)).collect(),
        factors: space
            .levels()
            .iter()
            .map(|&m| FactorParams {
                var: rng.random_range(0.1..1.0),
                theta: (0..p)
                    .map(|_| (0..m).map(|_| rng.random_range(0.2..4.0)).collect())
                    .collect(),
            })
            .collect(),
    }
}

pub fn random_point(space: &DesignSpace, rng: &mut impl Rng) -> MixedPoint {
    MixedPoint::new(
        (0..space.p()).map(|_| rng.random::<f64>()).collect(),
        space.levels().iter().map(|&m| rng.random_range(1..=m)).collect(),
    )
}

pub fn random_dataset(space: &DesignSpace, n: usize, rng: &mut impl Rng) -> Dataset {
    let mut data = Dataset::new(space.clone());
    while data.len() < n {
        let w = random_point(space, rng);
        let y = w.x.iter().map(|v| (3.0 * v).sin()).sum::<f64>() + w.z.iter().map(|&z| 0.3 * z as f64).sum::<f64>();
        if !data.contains(&w) {
            data.push(w, y).unwrap();
        }
    }
    data
}

pub fn oracle_gram(params: &EzGpParams, data: &Dataset, jitter: f64) -> DMatrix<f64> {
    let pts = data.points();
    DMatrix::from_fn(pts.len(), pts.len(), |i, j| {
        oracle_cov(params, &pts[i], &pts[j]) + if i == j { jitter } else { 0.0 }
    })
}

/// Dense predictor through an explicit inverse: (mean, variance).
pub fn oracle_predict(params: &EzGpParams, data: &Dataset, jitter: f64, w: &MixedPoint) -> (f64, f64) {
    let inv = oracle_gram(params, data, jitter).try_inverse().unwrap();
    let n = data.len();
    let one = DVector::from_element(n, 1.0);
    let y = DVector::from_column_slice(data.responses());
    let mu = (one.transpose() * &inv * &y)[0] / (one.transpose() * &inv * &one)[0];
    let r = DVector::from_iterator(n, data.points().iter().map(|p| oracle_cov(params, w, p)));
    let mean = mu + (r.transpose() * &inv * (y - &one * mu))[0];
    let prior = params.var0 + params.factors.iter().map(|f| f.var).sum::<f64>();
    let u = 1.0 - (one.transpose() * &inv * &r)[0];
    let var = prior - (r.transpose() * &inv * &r)[0] + u * u / (one.transpose() * &inv * &one)[0];
    (mean, var.max(0.0))
}

/// Profiled objective: log det plus the GLS quadratic form, by LU
/// determinant and explicit inverse.
pub fn oracle_nll(params: &EzGpParams, data: &Dataset, jitter: f64) -> f64 {
    let phi = oracle_gram(params, data, jitter);
    let inv = phi.clone().try_inverse().unwrap();
    let one = DVector::from_element(data.len(), 1.0);
    let y = DVector::from_column_slice(data.responses());
    let mu = (one.transpose() * &inv * &y)[0] / (one.transpose() * &inv * &one)[0];
    let r = &y - &one * mu;
    phi.determinant().ln() + (r.transpose() * &inv * &r)[0]
}

/// Largest absolute deviation of predict and NLL from the dense oracles over
/// `datasets` random 5-point problems.
pub fn oracle_deviations(datasets: usize, seed: u64) -> (f64, f64) {
    use mixact::emulator::neg_log_likelihood;
    use mixact::{FitOptions, FittedGp, Predictor, RngStream};
    let space = DesignSpace::new(2, vec![2, 3]).unwrap();
    let mut rng = RngStream::new(seed, 0).rng();
    let (mut dp, mut dl) = (0.0f64, 0.0f64);
    for _ in 0..datasets {
        let params = random_params(&space, &mut rng);
        let data = random_dataset(&space, 5, &mut rng);
        let model = FittedGp::from_ezgp_params(&params, data.clone(), &FitOptions::default()).unwrap();
        for _ in 0..10 {
            let w = random_point(&space, &mut rng);
            let post = model.predict(&w);
            let (m, v) = oracle_predict(&params, &data, model.jitter(), &w);
            dp = dp.max((post.mean - m).abs()).max((post.sd * post.sd - v).abs());
        }
        let brute = oracle_nll(&params, &data, 1e-8);
        dl = dl.max((neg_log_likelihood(&data, &params, 1e-8) - brute).abs() / brute.abs().max(1.0));
    }
    (dp, dl)
}
