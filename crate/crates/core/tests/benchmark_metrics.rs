use mixact::acquisition::{AcquisitionSpec, CriterionKind};
use mixact::adaptive::Strategy;
use mixact::benchmarks::{
    example1_problem, metric_best_min, metric_mc0, metric_rmse, replicate, LabeledPoints, Method, MethodSpec, Metric,
    StudyConfig, TestProblem,
};
use mixact::{FitOptions, MixedPoint, Posterior, Predictor, RngStream};

struct Truth(fn(&MixedPoint) -> f64);

impl Predictor for Truth {
    fn predict(&self, w: &MixedPoint) -> Posterior {
        Posterior::new((self.0)(w), 0.0)
    }
}

struct Shifted(fn(&MixedPoint) -> f64, f64);

impl Predictor for Shifted {
    fn predict(&self, w: &MixedPoint) -> Posterior {
        Posterior::new((self.0)(w) + self.1, 0.0)
    }
}

fn flat(_: &MixedPoint) -> f64 {
    0.75
}

#[test]
fn best_min_is_running_minimum() {
    assert_eq!(metric_best_min(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 1.0]);
    assert_eq!(metric_best_min(&[4.0]), vec![4.0]);
}

#[test]
fn mc0_of_perfect_and_constant_predictors() {
    let p = example1_problem();
    let seed = RngStream::new(1, 0);
    assert_eq!(metric_mc0(&Truth(p.evaluate), &p, 1.2, 0.05, seed).unwrap(), 0.0);
    let flat_problem = TestProblem {
        evaluate: flat,
        ..example1_problem()
    };
    let c = Shifted(flat, -0.25);
    let v = metric_mc0(&c, &flat_problem, 0.75, 0.01, seed).unwrap();
    assert!((v - 0.25).abs() < 1e-15);
    assert!(metric_mc0(&Truth(p.evaluate), &p, 1.2, 1e-12, seed).is_err());
}

#[test]
fn rmse_of_offset_predictor() {
    let p = example1_problem();
    let test = LabeledPoints::probe(&p.space, 50, p.evaluate, RngStream::new(2, 0));
    assert_eq!(metric_rmse(&Truth(p.evaluate), &test).unwrap(), 0.0);
    let v = metric_rmse(&Shifted(p.evaluate, 0.3), &test).unwrap();
    assert!((v - 0.3).abs() < 1e-12);
}

fn study(methods: Vec<MethodSpec>, replications: usize) -> StudyConfig {
    StudyConfig {
        name: "t".into(),
        problem: example1_problem(),
        methods,
        n0: 6,
        budgets: vec![7, 9],
        replications,
        base_seed: 9,
        metric: Metric::BestMin,
        n_per_combo: 20,
        fit: FitOptions::default(),
        jobs: 1,
        keep_traces: true,
    }
}

fn method(label: &str, kind: Option<CriterionKind>) -> MethodSpec {
    MethodSpec {
        label: label.into(),
        method: kind.map_or(Method::OneShot, |k| {
            Method::Adaptive(Strategy::Criterion(AcquisitionSpec::new(k)))
        }),
    }
}

fn summary(report: &mixact::benchmarks::ReplicationReport) -> String {
    let mut out = Vec::new();
    report.write_summary_csv(&mut out, false).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn method_order_does_not_change_results() {
    let a = replicate(&study(
        vec![method("one-shot", None), method("EI", Some(CriterionKind::Ei))],
        2,
    ))
    .unwrap();
    let b = replicate(&study(
        vec![method("EI", Some(CriterionKind::Ei)), method("one-shot", None)],
        2,
    ))
    .unwrap();
    for cell in &a.cells {
        let other = b.cell(&cell.method, cell.n).unwrap();
        assert_eq!(cell.values, other.values);
        assert_eq!(cell.mean.to_bits(), other.mean.to_bits());
    }
}

#[test]
fn single_replication_equals_its_run() {
    let report = replicate(&study(vec![method("EI", Some(CriterionKind::Ei))], 1)).unwrap();
    let run = &report.runs[0];
    let trace = run.trace.as_ref().unwrap();
    let best = metric_best_min(&trace.responses());
    for n in [7, 9] {
        let cell = report.cell("EI", n).unwrap();
        assert_eq!(cell.mean, best[n - 1]);
        assert!(cell.sd.is_nan());
    }
    assert!(summary(&report).starts_with("# schema: mixact-report v1\n"));
}
