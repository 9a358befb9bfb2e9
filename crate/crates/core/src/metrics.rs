//! Record emission: CSV or JSON-lines files plus a plain-text manifest.
//!
//! CSV floats are written with 17 significant digits so that parsing a file
//! back yields bit-identical values. Vector columns are `;`-joined.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::ScenarioConfig;
use crate::engine::{LtsRecord, RunOutput, StsRecord};
use crate::error::{Error, Result};
use crate::queues::{DriftRecord, QueueState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::invalid("format", format!("unknown format `{other}`"))),
        }
    }
}

pub const LTS_COLUMNS: [&str; 16] = [
    "lts_index",
    "y",
    "admitted_per_type",
    "revenue",
    "cost",
    "eta",
    "utility",
    "mean_utility",
    "passes",
    "lyapunov_start",
    "lyapunov_end",
    "drift",
    "penalty",
    "bound_constant",
    "bound_rhs",
    "theorem_ok",
];

pub const STS_COLUMNS: [&str; 13] = [
    "lts_index",
    "sts_index",
    "offloading",
    "bus",
    "processing",
    "total_power",
    "objective",
    "iterations",
    "converged",
    "violations",
    "audit_violations",
    "admitted",
    "rates",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(";")
}

fn lts_row(r: &LtsRecord) -> Vec<String> {
    vec![
        r.lts_index.to_string(),
        join(&r.y, |b| if *b { "1".into() } else { "0".into() }),
        join(&r.admitted_per_type, |c| c.to_string()),
        fmt_f64(r.revenue),
        fmt_f64(r.cost),
        fmt_f64(r.eta),
        fmt_f64(r.utility),
        fmt_f64(r.mean_utility),
        r.passes.to_string(),
        fmt_f64(r.drift.lyapunov_start),
        fmt_f64(r.drift.lyapunov_end),
        fmt_f64(r.drift.drift),
        fmt_f64(r.drift.penalty),
        fmt_f64(r.drift.bound_constant),
        fmt_f64(r.drift.bound_rhs),
        r.theorem_ok.to_string(),
    ]
}

fn sts_row(r: &StsRecord) -> Vec<String> {
    vec![
        r.lts_index.to_string(),
        r.sts_index.to_string(),
        fmt_f64(r.queues.offloading),
        fmt_f64(r.queues.bus),
        fmt_f64(r.queues.processing),
        fmt_f64(r.total_power),
        fmt_f64(r.objective),
        r.iterations.to_string(),
        r.converged.to_string(),
        r.violations.to_string(),
        r.audit_violations.to_string(),
        r.admitted.to_string(),
        join(&r.rates, |x| fmt_f64(*x)),
    ]
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Record {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("records serialize"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Paths written by [`emit_metrics`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedFiles {
    pub lts: PathBuf,
    pub sts: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `lts.<ext>`, `sts.<ext>` and `manifest.txt` into `dir`.
pub fn emit_metrics(out: &RunOutput, cfg: &ScenarioConfig, format: Format, dir: &Path) -> Result<EmittedFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let lts = dir.join(format!("lts.{}", format.extension()));
    let sts = dir.join(format!("sts.{}", format.extension()));
    match format {
        Format::Csv => {
            write_csv(&lts, &LTS_COLUMNS, out.lts.iter().map(lts_row))?;
            write_csv(&sts, &STS_COLUMNS, out.sts.iter().map(sts_row))?;
        }
        Format::Jsonl => {
            write_jsonl(&lts, &out.lts)?;
            write_jsonl(&sts, &out.sts)?;
        }
    }
    let manifest = dir.join("manifest.txt");
    fs::write(&manifest, manifest_text(cfg, format, out)).map_err(|e| Error::io(&manifest, e))?;
    Ok(EmittedFiles { lts, sts, manifest })
}

pub fn manifest_text(cfg: &ScenarioConfig, format: Format, out: &RunOutput) -> String {
    format!(
        "artifact=mecsim\nversion={VERSION}\nseed={}\nconfig_hash={}\nbaseline={}\nformat={}\nlts_records={}\nsts_records={}\n",
        cfg.seed,
        cfg.hash(),
        cfg.baseline.label(),
        format.extension(),
        out.lts.len(),
        out.sts.len(),
    )
}

/// Parses `key=value` lines.
pub fn parse_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

struct Row<'a> {
    path: &'a Path,
    rec: csv::StringRecord,
}

impl Row<'_> {
    fn field(&self, i: usize) -> Result<&str> {
        self.rec.get(i).ok_or_else(|| self.bad(format!("missing column {i}")))
    }

    fn bad(&self, reason: String) -> Error {
        Error::Record {
            path: self.path.to_path_buf(),
            reason,
        }
    }

    fn parse<T: FromStr>(&self, i: usize) -> Result<T> {
        let s = self.field(i)?;
        s.parse()
            .map_err(|_| self.bad(format!("cannot parse `{s}` in column {i}")))
    }

    fn list<T: FromStr>(&self, i: usize) -> Result<Vec<T>> {
        let s = self.field(i)?;
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(';')
            .map(|p| {
                p.parse()
                    .map_err(|_| self.bad(format!("cannot parse `{p}` in column {i}")))
            })
            .collect()
    }
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let h = r.headers().map_err(|e| csv_err(path, e))?;
    if h.iter().collect::<Vec<_>>() != header {
        return Err(Error::Record {
            path: path.to_path_buf(),
            reason: "unexpected header".into(),
        });
    }
    r.records().map(|x| x.map_err(|e| csv_err(path, e))).collect()
}

pub fn read_lts_csv(path: &Path) -> Result<Vec<LtsRecord>> {
    read_rows(path, &LTS_COLUMNS)?
        .into_iter()
        .map(|rec| {
            let r = Row { path, rec };
            let y: Vec<u8> = r.list(1)?;
            Ok(LtsRecord {
                lts_index: r.parse(0)?,
                y: y.into_iter().map(|b| b == 1).collect(),
                admitted_per_type: r.list(2)?,
                revenue: r.parse(3)?,
                cost: r.parse(4)?,
                eta: r.parse(5)?,
                utility: r.parse(6)?,
                mean_utility: r.parse(7)?,
                passes: r.parse(8)?,
                drift: DriftRecord {
                    lts_index: r.parse(0)?,
                    lyapunov_start: r.parse(9)?,
                    lyapunov_end: r.parse(10)?,
                    drift: r.parse(11)?,
                    penalty: r.parse(12)?,
                    bound_constant: r.parse(13)?,
                    bound_rhs: r.parse(14)?,
                },
                theorem_ok: r.parse(15)?,
            })
        })
        .collect()
}

pub fn read_sts_csv(path: &Path) -> Result<Vec<StsRecord>> {
    read_rows(path, &STS_COLUMNS)?
        .into_iter()
        .map(|rec| {
            let r = Row { path, rec };
            Ok(StsRecord {
                lts_index: r.parse(0)?,
                sts_index: r.parse(1)?,
                queues: QueueState::new(r.parse(2)?, r.parse(3)?, r.parse(4)?),
                total_power: r.parse(5)?,
                objective: r.parse(6)?,
                iterations: r.parse(7)?,
                converged: r.parse(8)?,
                violations: r.parse(9)?,
                audit_violations: r.parse(10)?,
                admitted: r.parse(11)?,
                rates: r.list(12)?,
            })
        })
        .collect()
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })
        })
        .collect()
}
