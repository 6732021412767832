use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mixact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixact")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const OPTIM: &str = r#"name = "tiny_optim"
problem = "example1"
methods = ["one-shot", "EI"]
n0 = 5
budgets = [6, 7]
replications = 2
seed = 3
n_per_combo = 20
timings = false
"#;

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn optimize_writes_artifacts_and_report_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.toml", OPTIM);
    let res = dir.path().join("res");
    let out = mixact(&["optimize", "--config", &cfg, "--out", res.join("a").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "per_seed.csv", "plot.csv", "study.toml"] {
        let text = fs::read_to_string(res.join("a").join(f)).unwrap();
        assert!(f == "study.toml" || text.starts_with("# schema:"), "{f}");
    }
    let again = mixact(&["optimize", "--config", &cfg, "--out", res.join("b").to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(
        fs::read(res.join("a/summary.csv")).unwrap(),
        fs::read(res.join("b/summary.csv")).unwrap()
    );
    let r1 = mixact(&["report", res.join("a").to_str().unwrap()]);
    let r2 = mixact(&["report", res.join("a").to_str().unwrap()]);
    assert_eq!(r1.status.code(), Some(0));
    assert_eq!(r1.stdout, r2.stdout);
    let text = String::from_utf8(r1.stdout).unwrap();
    assert!(text.contains("tiny_optim (best_min)") && text.contains("EI"), "{text}");
}

#[test]
fn study_file_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.toml", OPTIM);
    let res = dir.path().join("r");
    assert_eq!(
        mixact(&["optimize", "--config", &cfg, "--out", res.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let written = res.join("study.toml");
    let res2 = dir.path().join("r2");
    let out = mixact(&[
        "optimize",
        "--config",
        written.to_str().unwrap(),
        "--out",
        res2.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read(res.join("summary.csv")).unwrap(),
        fs::read(res2.join("summary.csv")).unwrap()
    );
}

#[test]
fn mixed_studies_render_one_table_each() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("res");
    let optim = write(dir.path(), "o.toml", OPTIM);
    let contour = write(
        dir.path(),
        "c.toml",
        &(OPTIM.replace("tiny_optim", "tiny_contour").replace("\"EI\"", "\"RCC\"") + "a = 1.2\nepsilon = 0.05\n"),
    );
    assert_eq!(
        mixact(&["optimize", "--config", &optim, "--out", res.join("o").to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let c = mixact(&[
        "contour",
        "--config",
        &contour,
        "--out",
        res.join("c").to_str().unwrap(),
    ]);
    assert_eq!(c.status.code(), Some(0), "{}", String::from_utf8_lossy(&c.stderr));
    let text = String::from_utf8(mixact(&["report", res.to_str().unwrap()]).stdout).unwrap();
    assert!(text.contains("tiny_optim (best_min)"));
    assert!(text.contains("tiny_contour (mc0)"));
}

#[test]
fn tiny_epsilon_gives_na_cells() {
    let dir = tempfile::tempdir().unwrap();
    let body = OPTIM.replace("\"EI\"", "\"ECL\"") + "a = 1.2\nepsilon = 1e-12\n";
    let cfg = write(dir.path(), "c.toml", &body);
    let res = dir.path().join("r");
    let out = mixact(&["contour", "--config", &cfg, "--out", res.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = fs::read_to_string(res.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().filter(|l| l.starts_with("ECL,")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("NA")), "{summary}");
}

#[test]
fn unknown_method_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.toml", &OPTIM.replace("\"EI\"", "\"EIX\""));
    let out = mixact(&["optimize", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("EIX"));
}

#[test]
fn unknown_key_and_zero_replications_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", &(OPTIM.to_string() + "colour = 1\n"));
    let out = mixact(&["optimize", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("colour"));
    let cfg = write(
        dir.path(),
        "b.toml",
        &OPTIM.replace("replications = 2", "replications = 0"),
    );
    let out = mixact(&["predict", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = mixact(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "runtime");
    assert!(err["message"].as_str().unwrap().contains("no results"));
}

#[test]
fn output_dir_defaults_to_env_base() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.toml", OPTIM);
    let out = Command::new(env!("CARGO_BIN_EXE_mixact"))
        .args(["optimize", "--config", &cfg, "--seed", "4"])
        .env("MIXACT_OUT", dir.path().join("base"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let study = fs::read_to_string(dir.path().join("base/tiny_optim/study.toml")).unwrap();
    assert!(study.contains("seed = 4"), "{study}");
}
