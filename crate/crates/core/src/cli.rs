//! Command implementations behind the `mixact` binary.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use walkdir::WalkDir;

use crate::benchmarks::{replicate, ReplicationReport, StudyConfig, REPORT_SCHEMA};
use crate::config::{StudyFile, StudyKind};
use crate::error::Error;
use crate::report::fmt_f64;

/// Environment variable naming the base directory for study outputs.
pub const OUT_ENV: &str = "MIXACT_OUT";

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    status: &'static str,
    kind: &'static str,
    message: &'a str,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }

    /// Single-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            Self::Config(m) => ("config", m),
            Self::Runtime(m) => ("runtime", m),
        };
        serde_json::to_string(&ErrorRecord {
            status: "error",
            kind,
            message,
        })
        .expect("error record serializes")
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Self::Config(m),
            other => Self::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(Error::io(path, e).to_string())
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out).and_then(|_| out.flush()).map_err(|e| io_err(path, e))
}

/// Loads a study file, applies flag overrides and resolves it.
pub fn load_study(
    path: &Path,
    kind: StudyKind,
    overrides: &Overrides,
) -> Result<(StudyFile, StudyConfig, PathBuf), CliError> {
    let mut file = StudyFile::load(path).map_err(|e| match e {
        Error::Io { .. } => CliError::Config(e.to_string()),
        other => CliError::from(other),
    })?;
    if let Some(seed) = overrides.seed {
        file.seed = seed;
    }
    if let Some(jobs) = overrides.jobs {
        file.jobs = Some(jobs);
    }
    let config = file.resolve(kind)?;
    let out = match (&overrides.out, &file.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => {
            let base = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from);
            base.join(&config.name)
        }
    };
    file.out = Some(out.clone());
    Ok((file, config, out))
}

/// Runs an optimize, contour or predict study and writes its artifacts.
pub fn run_study(path: &Path, kind: StudyKind, overrides: &Overrides) -> Result<ReplicationReport, CliError> {
    let (file, config, out) = load_study(path, kind, overrides)?;
    let report = replicate(&config)?;
    write_study(&out, &file, &report, file.timings.unwrap_or(true))?;
    for run in report.runs.iter().filter(|r| r.failure.is_some()) {
        eprintln!(
            "warning: {} replication {} failed: {}",
            run.method,
            run.replication,
            run.failure.as_deref().unwrap_or_default()
        );
    }
    Ok(report)
}

pub fn write_study(out: &Path, file: &StudyFile, report: &ReplicationReport, timings: bool) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    write_file(&out.join("study.toml"), |w| w.write_all(file.to_text().as_bytes()))?;
    write_file(&out.join("summary.csv"), |w| report.write_summary_csv(w, timings))?;
    write_file(&out.join("per_seed.csv"), |w| report.write_per_seed_csv(w, timings))?;
    write_file(&out.join("plot.csv"), |w| {
        writeln!(w, "# schema: mixact-plot v1")?;
        writeln!(w, "# study: {}", report.study)?;
        writeln!(w, "method,N,{}_mean,{}_sd", report.metric.name(), report.metric.name())?;
        for c in &report.cells {
            writeln!(w, "{},{},{},{}", c.method, c.n, fmt_f64(c.mean), fmt_f64(c.sd))?;
        }
        Ok(())
    })?;
    if report.runs.iter().any(|r| r.trace.is_some()) {
        let dir = out.join("traces");
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        for run in &report.runs {
            if let Some(trace) = &run.trace {
                let name = format!("{}_r{:03}.csv", file_stem(&run.method), run.replication);
                write_file(&dir.join(name), |w| trace.write_csv(w, timings))?;
            }
        }
    }
    Ok(())
}

struct SummaryTable {
    study: String,
    metric: String,
    rows: Vec<(String, usize, f64, f64)>,
}

fn parse_summary(path: &Path) -> Result<SummaryTable, CliError> {
    let data_err = |m: String| CliError::Runtime(Error::data(path, m).to_string());
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_SCHEMA) {
        return Err(data_err(format!("missing schema line '{REPORT_SCHEMA}'")));
    }
    let mut study = None;
    let mut metric = None;
    for line in text.lines().filter(|l| l.starts_with('#')) {
        if let Some(s) = line.strip_prefix("# study: ") {
            study = Some(s.to_string());
        } else if let Some(m) = line.strip_prefix("# metric: ") {
            metric = Some(m.to_string());
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| data_err(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| data_err(format!("missing column '{name}'")))
    };
    let (cm, cn, cv, cr) = (col("method")?, col("N")?, col("metric_mean")?, col("rel_efficiency")?);
    let num = |s: &str| -> Result<f64, CliError> {
        if s == "NA" {
            Ok(f64::NAN)
        } else {
            s.parse().map_err(|_| data_err(format!("bad number '{s}'")))
        }
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let n = rec[cn].parse().map_err(|_| data_err(format!("bad N '{}'", &rec[cn])))?;
        rows.push((rec[cm].to_string(), n, num(&rec[cv])?, num(&rec[cr])?));
    }
    Ok(SummaryTable {
        study: study.ok_or_else(|| data_err("missing '# study:' line".into()))?,
        metric: metric.ok_or_else(|| data_err("missing '# metric:' line".into()))?,
        rows,
    })
}

fn render(table: &SummaryTable) -> String {
    let mut methods: Vec<&str> = Vec::new();
    let mut ns: Vec<usize> = Vec::new();
    for (m, n, _, _) in &table.rows {
        if !methods.contains(&m.as_str()) {
            methods.push(m);
        }
        if !ns.contains(n) {
            ns.push(*n);
        }
    }
    ns.sort_unstable();
    let show_rel = table.metric == "mc0";
    let cell = |m: &str, n: usize| -> String {
        let Some((_, _, v, r)) = table.rows.iter().find(|(rm, rn, _, _)| rm == m && *rn == n) else {
            return "-".into();
        };
        let value = if v.is_nan() {
            "NA".to_string()
        } else {
            format!("{v:.4}")
        };
        if show_rel && r.is_finite() {
            format!("{value} ({r:.1})")
        } else {
            value
        }
    };
    let mut grid = vec![std::iter::once("N".to_string())
        .chain(methods.iter().map(|m| m.to_string()))
        .collect::<Vec<_>>()];
    for &n in &ns {
        grid.push(
            std::iter::once(n.to_string())
                .chain(methods.iter().map(|m| cell(m, n)))
                .collect(),
        );
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|j| grid.iter().map(|row| row[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = format!("{} ({})\n", table.study, table.metric);
    for row in &grid {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Re-renders every `summary.csv` under `dir` as an aligned table, in path
/// order. An empty directory is an error.
pub fn report(dir: &Path) -> Result<String, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Runtime(format!("{}: not a directory", dir.display())));
    }
    let mut paths: Vec<PathBuf> = WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() == "summary.csv")
        .map(|e| e.into_path())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Runtime(format!("no results under {}", dir.display())));
    }
    let tables: Vec<String> = paths
        .iter()
        .map(|p| parse_summary(p).map(|t| render(&t)))
        .collect::<Result<_, _>>()?;
    Ok(tables.join("\n"))
}
