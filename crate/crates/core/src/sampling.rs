//! Random Latin hypercube designs, candidate pools and balanced one-shot designs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::design_space::{DesignSpace, LevelCombination, MixedPoint};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// `n x p` random LHD, row-major. Column `k` places exactly one value in each
/// stratum `[(i-1)/n, i/n)`, uniformly within the stratum.
pub fn random_lhd(n: usize, p: usize, rng: RngStream) -> Vec<Vec<f64>> {
    let mut gen = rng.rng();
    lhd_with(n, p, &mut gen)
}

fn lhd_with<R: Rng>(n: usize, p: usize, gen: &mut R) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![0.0; p]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..p {
        perm.shuffle(gen);
        for (row, &cell) in rows.iter_mut().zip(&perm) {
            let u: f64 = gen.random();
            // (cell + u) / n can round up to the upper stratum edge; keep it inside.
            let v = (cell as f64 + u) / n as f64;
            row[k] = v.min(next_down((cell + 1) as f64 / n as f64));
        }
    }
    rows
}

fn next_down(v: f64) -> f64 {
    f64::from_bits(v.to_bits() - 1)
}

/// For each level combination, an independent `n_per_combo`-run LHD on `x`.
pub fn candidate_set(space: &DesignSpace, n_per_combo: usize, rng: RngStream) -> Vec<MixedPoint> {
    assert!(n_per_combo >= 1, "n_per_combo must be positive");
    let mut gen = rng.rng();
    let mut out = Vec::with_capacity(n_per_combo * space.n_combinations());
    for LevelCombination(z) in space.combinations() {
        for x in lhd_with(n_per_combo, space.p(), &mut gen) {
            out.push(MixedPoint::new(x, z.clone()));
        }
    }
    out
}

/// One `n`-run LHD on `x`, with level combinations allocated so that counts
/// differ by at most one; which combinations get the extra run, and the
/// pairing with LHD rows, are randomized.
pub fn oneshot_design(space: &DesignSpace, n: usize, rng: RngStream) -> Result<Vec<MixedPoint>> {
    if n == 0 {
        return Err(Error::InvalidArgument("design size must be positive".into()));
    }
    let mut gen = rng.rng();
    let xs = lhd_with(n, space.p(), &mut gen);
    let combos = space.combinations();
    let m = combos.len();
    let mut extra: Vec<usize> = (0..m).collect();
    extra.shuffle(&mut gen);
    let mut assignment = Vec::with_capacity(n);
    for (c, _) in combos.iter().enumerate() {
        assignment.extend(std::iter::repeat_n(c, n / m));
    }
    assignment.extend(extra.into_iter().take(n % m));
    assignment.shuffle(&mut gen);
    Ok(xs
        .into_iter()
        .zip(assignment)
        .map(|(x, c)| MixedPoint::new(x, combos[c].0.clone()))
        .collect())
}

/// Initial design for an adaptive run; same construction as [`oneshot_design`].
pub fn initial_design(space: &DesignSpace, n0: usize, rng: RngStream) -> Result<Vec<MixedPoint>> {
    if n0 < 2 {
        return Err(Error::InvalidArgument(format!(
            "initial design needs n0 >= 2, got {n0}"
        )));
    }
    oneshot_design(space, n0, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strata_counts(col: &[f64]) -> Vec<usize> {
        let n = col.len();
        let mut counts = vec![0; n];
        for &v in col {
            counts[(v * n as f64).floor() as usize] += 1;
        }
        counts
    }

    #[test]
    fn lhd_stratified() {
        for &(n, p) in &[(4, 2), (1, 3), (200, 2)] {
            let d = random_lhd(n, p, RngStream::new(11, 0));
            assert_eq!(d.len(), n);
            for k in 0..p {
                let col: Vec<f64> = d.iter().map(|r| r[k]).collect();
                assert!(col.iter().all(|v| (0.0..1.0).contains(v)));
                assert!(strata_counts(&col).iter().all(|&c| c == 1));
            }
        }
    }

    #[test]
    fn candidate_counts() {
        let space = DesignSpace::new(1, vec![3]).unwrap();
        let pool = candidate_set(&space, 100, RngStream::new(1, 0));
        assert_eq!(pool.len(), 300);
        for l in 1..=3 {
            assert_eq!(pool.iter().filter(|w| w.z == vec![l]).count(), 100);
        }
        let space = DesignSpace::quantitative(2).unwrap();
        assert_eq!(candidate_set(&space, 50, RngStream::new(1, 0)).len(), 50);
        let space = DesignSpace::new(1, vec![2, 2]).unwrap();
        let pool = candidate_set(&space, 1, RngStream::new(1, 0));
        let combos: Vec<_> = pool.iter().map(|w| w.z.clone()).collect();
        assert_eq!(combos, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
    }

    fn level_counts(space: &DesignSpace, d: &[MixedPoint]) -> Vec<usize> {
        let mut counts = vec![0; space.n_combinations()];
        for w in d {
            counts[space.combination_index(&w.z)] += 1;
        }
        counts
    }

    #[test]
    fn oneshot_balance() {
        let space = DesignSpace::new(1, vec![3]).unwrap();
        let d = oneshot_design(&space, 9, RngStream::new(5, 0)).unwrap();
        assert_eq!(level_counts(&space, &d), vec![3, 3, 3]);
        let d = oneshot_design(&space, 10, RngStream::new(5, 0)).unwrap();
        let mut c = level_counts(&space, &d);
        c.sort();
        assert_eq!(c, vec![3, 3, 4]);
        let xs: Vec<f64> = d.iter().map(|w| w.x[0]).collect();
        assert!(strata_counts(&xs).iter().all(|&c| c == 1));
    }

    #[test]
    fn initial_design_rules() {
        let space = DesignSpace::quantitative(1).unwrap();
        assert_eq!(initial_design(&space, 2, RngStream::new(0, 0)).unwrap().len(), 2);
        assert!(initial_design(&space, 1, RngStream::new(0, 0)).is_err());
        let space = DesignSpace::new(1, vec![3]).unwrap();
        assert_eq!(
            initial_design(&space, 9, RngStream::new(3, 1)).unwrap(),
            oneshot_design(&space, 9, RngStream::new(3, 1)).unwrap()
        );
    }
}
