use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, DsKind, ReclaimerKind, StallSpec};
use crate::error::BenchError;
use crate::run::{run_trial_caught, BenchResult};

/// One CSV row. Field order is the file's column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub ds: String,
    pub reclaimer: String,
    pub threads: usize,
    pub key_range: usize,
    pub insert_pct: u32,
    pub delete_pct: u32,
    pub duration_ms: u64,
    pub seed: u64,
    pub trial: usize,
    pub total_ops: u64,
    pub throughput_mops: f64,
    pub max_retire_list: usize,
    pub total_unreclaimed: u64,
    pub signals_sent: u64,
    pub handler_runs: u64,
    pub error: String,
}

pub const COLUMNS: [&str; 16] = [
    "ds",
    "reclaimer",
    "threads",
    "key_range",
    "insert_pct",
    "delete_pct",
    "duration_ms",
    "seed",
    "trial",
    "total_ops",
    "throughput_mops",
    "max_retire_list",
    "total_unreclaimed",
    "signals_sent",
    "handler_runs",
    "error",
];

/// Identity of a row apart from its measurements.
pub type RowKey = (String, String, usize, usize, u32, u32, u64, u64, usize);

impl Row {
    pub fn new(cfg: &BenchConfig, outcome: &Result<BenchResult, BenchError>) -> Row {
        let mut row = Row {
            ds: cfg.ds.name().to_string(),
            reclaimer: cfg.reclaimer.name().to_string(),
            threads: cfg.threads,
            key_range: cfg.key_range,
            insert_pct: cfg.insert_pct,
            delete_pct: cfg.delete_pct,
            duration_ms: cfg.duration.as_millis() as u64,
            seed: cfg.seed,
            trial: cfg.trial,
            total_ops: 0,
            throughput_mops: 0.0,
            max_retire_list: 0,
            total_unreclaimed: 0,
            signals_sent: 0,
            handler_runs: 0,
            error: String::new(),
        };
        match outcome {
            Ok(r) => {
                row.total_ops = r.total_ops;
                row.throughput_mops = r.throughput_mops;
                row.max_retire_list = r.max_retire_list;
                row.total_unreclaimed = r.total_unreclaimed;
                row.signals_sent = r.signals_sent;
                row.handler_runs = r.handler_runs;
                if r.uaf_detected + r.double_frees > 0 {
                    row.error = format!(
                        "{} use-after-free, {} double free",
                        r.uaf_detected, r.double_frees
                    );
                }
            }
            Err(e) => row.error = e.to_string(),
        }
        row
    }

    pub fn key(&self) -> RowKey {
        (
            self.ds.clone(),
            self.reclaimer.clone(),
            self.threads,
            self.key_range,
            self.insert_pct,
            self.delete_pct,
            self.duration_ms,
            self.seed,
            self.trial,
        )
    }

    pub fn is_error(&self) -> bool {
        !self.error.is_empty()
    }
}

fn default_trials() -> usize {
    5
}
fn default_duration() -> u64 {
    1000
}
fn default_reclaim_freq() -> usize {
    1024
}
fn default_epoch_freq() -> u64 {
    100
}
fn default_seed() -> u64 {
    42
}

/// Matrix description; every list is crossed with every other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub ds: Vec<String>,
    pub reclaimers: Vec<String>,
    pub threads: Vec<usize>,
    pub key_range: Vec<usize>,
    /// `[insert_pct, delete_pct]` pairs.
    pub mixes: Vec<[u32; 2]>,
    #[serde(default = "default_duration")]
    pub duration_ms: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_reclaim_freq")]
    pub reclaim_freq: usize,
    #[serde(default = "default_epoch_freq")]
    pub epoch_freq: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub stall: Option<String>,
    #[serde(default)]
    pub debug_alloc: bool,
}

impl MatrixSpec {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Every (config, trial) in row order. Names that fail to parse yield
    /// an error entry instead of aborting the whole matrix.
    pub fn expand(&self) -> Vec<Entry> {
        let stall = match self.stall.as_deref().map(str::parse::<StallSpec>) {
            None => Ok(None),
            Some(Ok(s)) => Ok(Some(s)),
            Some(Err(e)) => Err(e.to_string()),
        };
        let mut out = Vec::new();
        for ds in &self.ds {
            for rec in &self.reclaimers {
                for &threads in &self.threads {
                    for &key_range in &self.key_range {
                        for &[insert_pct, delete_pct] in &self.mixes {
                            for trial in 0..self.trials {
                                let parsed = ds
                                    .parse::<DsKind>()
                                    .and_then(|d| rec.parse::<ReclaimerKind>().map(|r| (d, r)));
                                let (d, r, mut status) = match parsed {
                                    Ok((d, r)) => (d, r, Ok(())),
                                    Err(e) => (DsKind::Hml, ReclaimerKind::Nr, Err(e.to_string())),
                                };
                                if let (Err(e), Ok(())) = (&stall, &status) {
                                    status = Err(e.clone());
                                }
                                let cfg = BenchConfig {
                                    ds: d,
                                    reclaimer: r,
                                    threads,
                                    key_range,
                                    insert_pct,
                                    delete_pct,
                                    duration: Duration::from_millis(self.duration_ms),
                                    reclaim_freq: self.reclaim_freq,
                                    epoch_freq: self.epoch_freq,
                                    seed: self.seed,
                                    stall: stall.clone().ok().flatten(),
                                    debug_alloc: self.debug_alloc,
                                    trial,
                                    ..BenchConfig::default()
                                };
                                out.push(Entry {
                                    cfg,
                                    ds: ds.clone(),
                                    reclaimer: rec.clone(),
                                    status,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// One planned row. `ds` and `reclaimer` keep the names as written so that
/// error rows show what was asked for.
#[derive(Debug)]
pub struct Entry {
    pub cfg: BenchConfig,
    pub ds: String,
    pub reclaimer: String,
    pub status: Result<(), String>,
}

impl Entry {
    fn row(&self, outcome: &Result<BenchResult, BenchError>) -> Row {
        let mut row = Row::new(&self.cfg, outcome);
        row.ds = self.ds.clone();
        row.reclaimer = self.reclaimer.clone();
        if let Err(e) = &self.status {
            row.error = e.clone();
        }
        row
    }
}

/// Outcome of a matrix run.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct MatrixReport {
    pub written: usize,
    pub skipped: usize,
    pub errors: usize,
    pub summary: PathBuf,
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>, BenchError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(COLUMNS.iter().copied()) {
        return Err(BenchError::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected columns in {}: {:?}", path.display(), headers),
        ))));
    }
    rdr.deserialize()
        .map(|r| r.map_err(BenchError::from))
        .collect()
}

/// Runs every configuration in `spec`, appending one row per trial to
/// `out`. Rows already present in `out` are skipped, so an interrupted run
/// can simply be restarted. Writes per-config statistics next to `out`.
pub fn run_matrix(
    spec: &MatrixSpec,
    out: &Path,
    mut progress: impl FnMut(&Row),
) -> Result<MatrixReport, BenchError> {
    let existing = if out.exists() && std::fs::metadata(out)?.len() > 0 {
        read_rows(out)?
    } else {
        Vec::new()
    };
    let done: HashSet<RowKey> = existing.iter().map(Row::key).collect();
    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(existing.is_empty())
        .from_writer(file);
    let mut report = MatrixReport::default();
    for entry in spec.expand() {
        if done.contains(&entry.row(&Ok(BenchResult::default())).key()) {
            report.skipped += 1;
            continue;
        }
        let row = match &entry.status {
            Ok(()) => entry.row(&run_trial_caught(&entry.cfg)),
            Err(_) => entry.row(&Ok(BenchResult::default())),
        };
        if row.is_error() {
            report.errors += 1;
        }
        w.serialize(&row)?;
        w.flush()?;
        report.written += 1;
        progress(&row);
    }
    drop(w);
    report.summary = summary_path(out);
    write_summary(&read_rows(out)?, &report.summary)?;
    Ok(report)
}

pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("results");
    out.with_file_name(format!("{stem}.summary.csv"))
}

/// Per-config statistics over successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub ds: String,
    pub reclaimer: String,
    pub threads: usize,
    pub key_range: usize,
    pub insert_pct: u32,
    pub delete_pct: u32,
    pub trials: usize,
    /// Trial whose throughput is the median.
    pub median_trial: usize,
    pub median_throughput_mops: f64,
    pub mean_throughput_mops: f64,
    pub throughput_variance: f64,
    /// Standard deviation over mean, in percent.
    pub throughput_cv_pct: f64,
    pub median_max_retire_list: usize,
    pub median_total_unreclaimed: u64,
}

/// Lower median: always an actual trial.
pub fn median_index(values: &[f64]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Some(idx[(values.len() - 1) / 2])
}

/// (ds, reclaimer, threads, key_range, insert_pct, delete_pct)
type ConfigKey = (String, String, usize, usize, u32, u32);

pub fn summarize(rows: &[Row]) -> Vec<Summary> {
    let mut groups: BTreeMap<ConfigKey, Vec<&Row>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_error()) {
        groups
            .entry((
                r.ds.clone(),
                r.reclaimer.clone(),
                r.threads,
                r.key_range,
                r.insert_pct,
                r.delete_pct,
            ))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(
            |((ds, reclaimer, threads, key_range, insert_pct, delete_pct), rs)| {
                let tp: Vec<f64> = rs.iter().map(|r| r.throughput_mops).collect();
                let n = tp.len() as f64;
                let mean = tp.iter().sum::<f64>() / n;
                let variance = if tp.len() > 1 {
                    tp.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                let m = median_index(&tp).unwrap();
                let mut mem: Vec<usize> = rs.iter().map(|r| r.max_retire_list).collect();
                mem.sort_unstable();
                let mut un: Vec<u64> = rs.iter().map(|r| r.total_unreclaimed).collect();
                un.sort_unstable();
                Summary {
                    ds,
                    reclaimer,
                    threads,
                    key_range,
                    insert_pct,
                    delete_pct,
                    trials: rs.len(),
                    median_trial: rs[m].trial,
                    median_throughput_mops: tp[m],
                    mean_throughput_mops: mean,
                    throughput_variance: variance,
                    throughput_cv_pct: if mean > 0.0 {
                        variance.sqrt() / mean * 100.0
                    } else {
                        0.0
                    },
                    median_max_retire_list: mem[(mem.len() - 1) / 2],
                    median_total_unreclaimed: un[(un.len() - 1) / 2],
                }
            },
        )
        .collect()
}

fn write_summary(rows: &[Row], path: &Path) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for s in summarize(rows) {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a single row (with header when the file is new) for the `bench`
/// subcommand.
pub fn append_row(path: &Path, row: &Row) -> Result<(), BenchError> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    w.serialize(row)?;
    w.flush()?;
    Ok(())
}

/// Header line plus one row, for printing to stdout.
pub fn row_to_csv(row: &Row, header: bool) -> Result<String, BenchError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header)
        .from_writer(Vec::new());
    w.serialize(row)?;
    w.flush()?;
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8_lossy(&bytes).trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_an_actual_trial() {
        assert_eq!(median_index(&[3.0, 1.0, 2.0]), Some(2));
        assert_eq!(median_index(&[4.0, 1.0, 3.0, 2.0]), Some(3));
        assert_eq!(median_index(&[]), None);
    }

    #[test]
    fn spec_expands_to_the_cross_product() {
        let spec = MatrixSpec::from_toml(
            r#"
            ds = ["hml", "ll", "hmht"]
            reclaimers = ["nr", "hp", "he", "ebr", "hp-pop", "he-pop", "epoch-pop"]
            threads = [1, 4, 8]
            key_range = [2048]
            mixes = [[50, 50]]
            "#,
        )
        .unwrap();
        assert_eq!(spec.trials, 5);
        let rows = spec.expand();
        assert_eq!(rows.len(), 63 * 5);
        assert!(rows.iter().all(|e| e.status.is_ok()));
        assert_eq!(rows[0].cfg.trial, 0);
        assert_eq!(rows[4].cfg.trial, 4);
        assert_eq!(rows[5].cfg.threads, 4);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(MatrixSpec::from_toml(
            "ds = []\nreclaimers = []\nthreads = []\nkey_range = []\nmixes = []\ncolour = 1"
        )
        .is_err());
    }
}
