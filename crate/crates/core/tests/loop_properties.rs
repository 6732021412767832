use mixact::acquisition::{AcquisitionSpec, CriterionKind};
use mixact::adaptive::{run_adaptive, run_oneshot, run_rcc, LoopConfig, Strategy, Trace};
use mixact::benchmarks::{example1, example1_problem};
use mixact::hybrid::{reward, HybridConfig, McTree};
use mixact::sampling::{candidate_set, initial_design};
use mixact::{DesignSpace, FitOptions, MixedPoint, RngStream};
use rand::Rng;

fn config(strategy: Strategy, n0: usize, budget: usize, seed: u64) -> LoopConfig {
    let mut c = LoopConfig::new(example1_problem().space, n0, budget, strategy, RngStream::new(seed, 0));
    c.n_per_combo = 30;
    c
}

fn ei() -> Strategy {
    Strategy::Criterion(AcquisitionSpec::new(CriterionKind::Ei))
}

fn bytes(trace: &Trace) -> Vec<u8> {
    let mut out = Vec::new();
    trace.write_csv(&mut out, false).unwrap();
    out
}

fn strategies() -> Vec<Strategy> {
    let space = example1_problem().space;
    vec![
        ei(),
        Strategy::Criterion(AcquisitionSpec::new(CriterionKind::Arsd)),
        Strategy::Criterion(AcquisitionSpec::new(CriterionKind::Lcb)),
        Strategy::Criterion(AcquisitionSpec::new(CriterionKind::Rcc).with_level(1.2)),
        Strategy::Criterion(AcquisitionSpec::new(CriterionKind::EiMc)),
        Strategy::Hybrid(HybridConfig::standard(&space)),
    ]
}

#[test]
fn same_seed_same_trace_bytes() {
    for s in strategies() {
        let a = run_adaptive(&example1, &config(s.clone(), 6, 10, 11)).unwrap();
        let b = run_adaptive(&example1, &config(s.clone(), 6, 10, 11)).unwrap();
        assert_eq!(bytes(&a), bytes(&b), "{}", s.name());
    }
}

#[test]
fn budget_and_incumbent() {
    for s in strategies() {
        for seed in 0..3 {
            let t = run_adaptive(&example1, &config(s.clone(), 5, 11, seed)).unwrap();
            assert_eq!(t.dataset().len(), 11);
            assert_eq!(t.rows.len(), 6);
            let mut best = t.initial.responses().iter().copied().fold(f64::INFINITY, f64::min);
            for row in &t.rows {
                assert!(row.best_min <= best);
                best = best.min(row.y);
                assert_eq!(row.best_min, best);
            }
        }
    }
}

#[test]
fn chosen_points_come_from_the_pool() {
    for s in strategies() {
        let cfg = config(s.clone(), 5, 10, 4);
        let t = run_adaptive(&example1, &cfg).unwrap();
        for row in &t.rows {
            let n = row.n - 1;
            let pool = candidate_set(&cfg.space, cfg.n_per_combo, cfg.seed.substream("pool", n as u64));
            assert!(pool.contains(&row.point), "{} at n={n}", s.name());
        }
        let pts = t.dataset().points().to_vec();
        for i in 0..pts.len() {
            assert!(!pts[i + 1..].contains(&pts[i]), "duplicate design point");
        }
    }
}

#[test]
fn zero_iteration_budget() {
    let t = run_adaptive(&example1, &config(ei(), 9, 9, 1)).unwrap();
    assert!(t.rows.is_empty());
    assert!(t.final_model.is_some());
}

#[test]
fn oneshot_at_n0_is_the_initial_design() {
    let space = example1_problem().space;
    let seed = RngStream::new(2025, 3);
    let (_, data) = run_oneshot(&example1, &space, 9, &FitOptions::default(), seed).unwrap();
    assert_eq!(
        data.points(),
        initial_design(&space, 9, seed.substream("init", 0)).unwrap().as_slice()
    );
}

#[test]
fn rcc_terminates_on_flat_objective() {
    let flat = |_: &MixedPoint| 1.2;
    let s = Strategy::Criterion(AcquisitionSpec::new(CriterionKind::Rcc).with_level(1.2));
    let t = run_rcc(&flat, &config(s, 5, 9, 2), 0.05).unwrap();
    assert_eq!(t.dataset().len(), 9);
    assert!(t.contour.is_some());
}

#[test]
fn uct_visits_every_leaf_first() {
    let mut rng = RngStream::new(5, 0).rng();
    for levels in [vec![3], vec![2, 3], vec![2, 2, 2]] {
        let space = DesignSpace::new(1, levels).unwrap();
        let mut tree = McTree::new(&space);
        let m = tree.leaves().len();
        for _ in 0..m {
            let leaf = tree.uct_select(1.0 / 2f64.sqrt(), &mut rng);
            tree.backprop(leaf, rng.random()).unwrap();
        }
        assert!((0..m).all(|i| tree.visits(i) == 1));
    }
}

#[test]
fn tree_counts_and_rewards_stay_bounded() {
    let space = DesignSpace::new(1, vec![2, 3]).unwrap();
    let mut tree = McTree::new(&space);
    let mut rng = RngStream::new(6, 0).rng();
    let worst = 3.0;
    let mut best = 1.0;
    for k in 1..=200u64 {
        let leaf = tree.uct_select(0.7, &mut rng);
        let y = rng.random_range(-2.0..4.0);
        best = f64::min(best, y);
        tree.backprop(leaf, reward(worst, best, y)).unwrap();
        assert_eq!(tree.root_visits(), k);
        let total: u64 = (0..tree.leaves().len()).map(|i| tree.visits(i)).sum();
        assert_eq!(total, k);
        for i in 0..tree.leaves().len() {
            if tree.visits(i) > 0 {
                assert!((0.0..=1.0).contains(&tree.mean_reward(i)));
            }
        }
    }
}
