//! Result tables: per-run CSV/JSON, the aggregated markdown table and run
//! artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{group_rows, BenchmarkOutput, Method, MethodOutput, ReportFormat, ResultRow};
use crate::metrics::{aggregate, MetricReport, MetricSummary};
use crate::scenario::Family;

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSON: &str = "results.json";
pub const RESULTS_MD: &str = "results.md";
pub const TIMINGS_CSV: &str = "timings.csv";

/// Column order of the per-run CSV.
pub const CSV_COLUMNS: [&str; 13] = [
    "family",
    "seed",
    "method",
    "dst_pct",
    "vis_pct",
    "legibility",
    "nom_dev",
    "completed",
    "converged",
    "iterations",
    "failed",
    "error",
    "nominal_hash",
];

fn non_empty(rows: &[ResultRow]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Usage("no result rows to report".into()));
    }
    Ok(())
}

pub fn results_csv(rows: &[ResultRow]) -> Result<String> {
    non_empty(rows)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Contract(format!("csv encoding failed: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Contract(format!("csv encoding failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Contract(format!("csv encoding failed: {e}")))
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| Error::parse("<results csv>", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != CSV_COLUMNS {
        return Err(Error::parse("<results csv>", format!("unexpected header {header:?}")));
    }
    rd.deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| Error::parse("<results csv>", e.to_string()))
}

pub fn results_json(rows: &[ResultRow]) -> Result<String> {
    non_empty(rows)?;
    serde_json::to_string_pretty(rows).map_err(|e| Error::Contract(format!("json encoding failed: {e}")))
}

/// Aggregated metrics of one (family, method) cell group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: Family,
    pub method: Method,
    pub summary: MetricSummary,
    pub failed: usize,
}

/// Mean and SD per (family, method) over the successful rows.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    non_empty(rows)?;
    let groups = group_rows(rows);
    let mut out = Vec::new();
    for (&(family, method), group) in &groups {
        let reports: Vec<MetricReport> = group
            .iter()
            .map(|r| MetricReport {
                dst_pct: r.dst_pct,
                vis_pct: r.vis_pct,
                legibility: r.legibility,
                nom_dev: r.nom_dev,
                completed: r.completed,
            })
            .collect();
        let failed = rows.iter().filter(|r| r.failed && r.family == family && r.method == method).count();
        out.push(SummaryRow { family, method, summary: aggregate(&reports)?, failed });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Separation,
    Visibility,
    Legibility,
    NominalDeviation,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Separation, Metric::Visibility, Metric::Legibility, Metric::NominalDeviation];

    pub fn header(self) -> &'static str {
        match self {
            Metric::Separation => "Dst (%)",
            Metric::Visibility => "Vis (%)",
            Metric::Legibility => "Legibility",
            Metric::NominalDeviation => "Nom (m²)",
        }
    }

    pub fn lower_is_better(self) -> bool {
        self == Metric::NominalDeviation
    }

    fn of(self, s: &MetricSummary) -> (f64, f64) {
        let m = match self {
            Metric::Separation => s.dst_pct,
            Metric::Visibility => s.vis_pct,
            Metric::Legibility => s.legibility,
            Metric::NominalDeviation => s.nom_dev,
        };
        (m.mean, m.sd)
    }

    fn decimals(self) -> usize {
        match self {
            Metric::NominalDeviation => 3,
            Metric::Legibility => 2,
            _ => 1,
        }
    }
}

fn shown(metric: Metric, method: Method) -> bool {
    !(metric == Metric::NominalDeviation && method == Method::Nominal)
}

/// Methods holding the best mean of `metric` within `family`; ties are all
/// marked and the Nominal row never competes on nominal deviation.
pub fn best_methods(summaries: &[SummaryRow], family: Family, metric: Metric) -> Vec<Method> {
    let cands: Vec<(Method, f64)> = summaries
        .iter()
        .filter(|s| s.family == family && shown(metric, s.method))
        .map(|s| (s.method, metric.of(&s.summary).0))
        .filter(|(_, v)| v.is_finite())
        .collect();
    let best = if metric.lower_is_better() {
        cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min)
    } else {
        cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max)
    };
    cands.into_iter().filter(|c| c.1 == best).map(|c| c.0).collect()
}

/// Families-by-methods table of mean ± SD with the best cell per family and
/// metric in bold.
pub fn markdown_table(rows: &[ResultRow]) -> Result<String> {
    let summaries = summarize(rows)?;
    let mut s = String::from("| Scenario | Method |");
    for m in Metric::ALL {
        let _ = write!(s, " {} |", m.header());
    }
    s.push_str("\n|---|---|");
    for _ in Metric::ALL {
        s.push_str("---|");
    }
    s.push('\n');
    let mut families: Vec<Family> = summaries.iter().map(|r| r.family).collect();
    families.dedup();
    for family in families {
        let best: Vec<Vec<Method>> = Metric::ALL.iter().map(|&m| best_methods(&summaries, family, m)).collect();
        for row in summaries.iter().filter(|r| r.family == family) {
            let _ = write!(s, "| {} | {} |", family.title(), row.method);
            for (mi, &metric) in Metric::ALL.iter().enumerate() {
                if !shown(metric, row.method) {
                    s.push_str(" n/a |");
                    continue;
                }
                let (mean, sd) = metric.of(&row.summary);
                let p = metric.decimals();
                let cell = format!("{mean:.p$} ± {sd:.p$}");
                if best[mi].contains(&row.method) {
                    let _ = write!(s, " **{cell}** |");
                } else {
                    let _ = write!(s, " {cell} |");
                }
            }
            s.push('\n');
        }
    }
    let failed = rows.iter().filter(|r| r.failed).count();
    if failed > 0 {
        let _ = writeln!(s, "\nFailed runs excluded from the means: {failed}.");
    }
    Ok(s)
}

/// `family,seed,method,wall_time` rows, kept apart from the results so those
/// stay byte-identical between runs.
pub fn timings_csv(output: &BenchmarkOutput) -> String {
    let mut s = String::from("family,seed,method,wall_time\n");
    for r in &output.records {
        let _ = writeln!(s, "{},{},{},{}", r.row.family.name(), r.row.seed, r.row.method, r.wall_time);
    }
    s
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `rows` in `format` under `dir` and returns the file written.
pub fn emit_report(rows: &[ResultRow], format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    let (name, text) = match format {
        ReportFormat::Csv => (RESULTS_CSV, results_csv(rows)?),
        ReportFormat::Json => (RESULTS_JSON, results_json(rows)?),
        ReportFormat::Markdown => (RESULTS_MD, markdown_table(rows)?),
    };
    create_dir(dir)?;
    let path = dir.join(name);
    write_file(&path, &text)?;
    Ok(path)
}

pub fn emit_timings(output: &BenchmarkOutput, dir: &Path) -> Result<PathBuf> {
    create_dir(dir)?;
    let path = dir.join(TIMINGS_CSV);
    write_file(&path, &timings_csv(output))?;
    Ok(path)
}

pub fn artifact_stem(family: Family, seed: u64, method: Method) -> String {
    let m = match method {
        Method::Comoto => "comoto",
        Method::Nominal => "nominal",
        Method::SpeedAdjusted => "speed_adj",
        Method::Legible => "legible",
        Method::DistVis => "distvis",
    };
    format!("{}_{seed}_{m}", family.name())
}

/// Scenario JSON files plus every trajectory (`.traj`) and execution trace
/// (`.csv`) under `dir/scenarios` and `dir/trajectories`.
pub fn write_artifacts(output: &BenchmarkOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    let sdir = dir.join("scenarios");
    let tdir = dir.join("trajectories");
    create_dir(&sdir)?;
    create_dir(&tdir)?;
    let mut written = Vec::new();
    for sc in &output.scenarios {
        let p = sdir.join(format!("{}_{}.json", sc.family.name(), sc.seed));
        sc.save(&p)?;
        written.push(p);
    }
    for rec in &output.records {
        let stem = artifact_stem(rec.row.family, rec.row.seed, rec.row.method);
        match &rec.output {
            Some(MethodOutput::Trajectory(t)) => {
                let p = tdir.join(format!("{stem}.traj"));
                t.save(&p)?;
                written.push(p);
            }
            Some(MethodOutput::Trace(t)) => {
                let p = tdir.join(format!("{stem}.csv"));
                write_file(&p, &t.to_csv())?;
                written.push(p);
            }
            None => {}
        }
    }
    Ok(written)
}
