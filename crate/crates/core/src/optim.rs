//! Box-constrained limited-memory quasi-Newton minimizer.
//!
//! Variables sitting on a bound with the gradient pushing outward are frozen
//! for the iteration; the L-BFGS direction is built on the free set and the
//! step is taken along the projected path with an Armijo backtracking search.

#[derive(Clone, Debug)]
pub struct BoxOptions {
    pub max_iters: usize,
    /// Stop when the relative decrease of the objective falls below this.
    pub ftol: f64,
    /// Stop when the infinity norm of the projected gradient falls below this.
    pub gtol: f64,
    pub memory: usize,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            ftol: 1e-9,
            gtol: 1e-6,
            memory: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoxResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Minimizes `f` over the box. `f(x, grad)` returns the value and fills the
/// gradient; a non-finite value marks an infeasible point. Returns `None`
/// when the projected start point is infeasible.
pub fn minimize_box<F>(mut f: F, x0: &[f64], bounds: &[(f64, f64)], opts: &BoxOptions) -> Option<BoxResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(bounds.len(), n);
    let project = |x: &mut [f64]| {
        for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| {
                let (lo, hi) = bounds[i];
                !((x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0))
            })
            .collect();
        let pg_norm = (0..n).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg_norm < opts.gtol {
            break;
        }

        let gf: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let mut d = two_loop(&gf, &s_hist, &y_hist, &free);
        let mut slope = dot(&d, &gf);
        if slope >= 0.0 || !slope.is_finite() {
            s_hist.clear();
            y_hist.clear();
            d = gf.iter().map(|v| -v).collect();
            slope = -dot(&gf, &gf);
        }
        let mut step = if s_hist.is_empty() {
            (1.0 / pg_norm).min(1.0)
        } else {
            1.0
        };

        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            project(&mut x_new);
            if x_new == x {
                break;
            }
            let moved: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
            let f_new = f(&x_new, &mut g_new);
            evaluations += 1;
            if f_new.is_finite() && g_new.iter().all(|v| v.is_finite()) && f_new <= fx + 1e-4 * moved.min(0.0) {
                accepted = true;
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let yv: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                let sy = dot(&s, &yv);
                if sy > 1e-10 * norm(&s) * norm(&yv) {
                    if s_hist.len() == opts.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(yv);
                }
                let rel = (fx - f_new).abs() / fx.abs().max(f_new.abs()).max(1.0);
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                fx = f_new;
                if rel < opts.ftol {
                    return Some(BoxResult {
                        x,
                        fx,
                        iterations,
                        evaluations,
                    });
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if s_hist.is_empty() {
                break;
            }
            // retry from steepest descent before giving up
            s_hist.clear();
            y_hist.clear();
        }
    }
    Some(BoxResult {
        x,
        fx,
        iterations,
        evaluations,
    })
}

fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], free: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(&a, &f)| if f { a } else { 0.0 }).collect() };
    let s_m: Vec<Vec<f64>> = s_hist.iter().map(|s| mask(s)).collect();
    let y_m: Vec<Vec<f64>> = y_hist.iter().map(|y| mask(y)).collect();
    let mut q = g.to_vec();
    let k = s_m.len();
    let mut alpha = vec![0.0; k];
    let mut rho = vec![0.0; k];
    for i in (0..k).rev() {
        let sy = dot(&s_m[i], &y_m[i]);
        if sy <= 0.0 {
            continue;
        }
        rho[i] = 1.0 / sy;
        alpha[i] = rho[i] * dot(&s_m[i], &q);
        for j in 0..q.len() {
            q[j] -= alpha[i] * y_m[i][j];
        }
    }
    if k > 0 {
        let yy = dot(&y_m[k - 1], &y_m[k - 1]);
        let sy = dot(&s_m[k - 1], &y_m[k - 1]);
        if yy > 0.0 && sy > 0.0 {
            let gamma = sy / yy;
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for i in 0..k {
        if rho[i] == 0.0 {
            continue;
        }
        let beta = rho[i] * dot(&y_m[i], &q);
        for j in 0..q.len() {
            q[j] += s_m[i][j] * (alpha[i] - beta);
        }
    }
    q.iter().map(|v| -v).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
