//! Per-round metrics CSV files and the multi-run comparison table.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "round,test_acc,mean_train_loss,wall_ms,strategy,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: usize,
    pub test_acc: f64,
    pub mean_train_loss: f64,
    pub wall_ms: u128,
    pub strategy: String,
    pub seed: u64,
}

pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
    last_round: usize,
}

impl MetricsWriter<File> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        if let Some(dir) = path.as_ref().parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Ok(Self::new(File::create(path)?))
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(sink: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(sink),
            last_round: 0,
        }
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        if record.round <= self.last_round {
            return Err(Error::Validation(format!(
                "round {} written after round {}",
                record.round, self.last_round
            )));
        }
        if !(0.0..=1.0).contains(&record.test_acc) {
            return Err(Error::Validation(format!(
                "accuracy {} outside [0, 1]",
                record.test_acc
            )));
        }
        self.inner.serialize(record)?;
        self.inner.flush()?;
        self.last_round = record.round;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Validation(format!(
            "{}: unexpected header `{}`",
            path.as_ref().display(),
            header.join(",")
        )));
    }
    let mut records: Vec<MetricsRecord> = Vec::new();
    for row in reader.deserialize() {
        let record: MetricsRecord = row?;
        if let Some(prev) = records.last() {
            if record.round <= prev.round {
                return Err(Error::Validation(format!(
                    "{}: rounds not increasing at {}",
                    path.as_ref().display(),
                    record.round
                )));
            }
        }
        records.push(record);
    }
    Ok(records)
}

/// Rounds at 1/5, 2/5, 3/5 and 4/5 of a `t`-round run.
pub fn checkpoint_rounds(t: usize) -> [usize; 4] {
    [1, 2, 3, 4].map(|i| (i * t / 5).max(1))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub strategy: String,
    pub runs: usize,
    pub final_mean: f64,
    /// Sample standard deviation over runs; 0 for a single run.
    pub final_std: f64,
    /// `(round, mean accuracy)` at the four checkpoints.
    pub checkpoints: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rounds: usize,
    pub rows: Vec<StrategySummary>,
}

/// Summarises metrics files: final accuracy mean ± std per strategy and the
/// mean accuracy at the checkpoint rounds. All files must cover the same
/// number of rounds.
pub fn compare<P: AsRef<Path>>(paths: &[P]) -> Result<Comparison> {
    if paths.is_empty() {
        return Err(Error::Validation(
            "compare needs at least one metrics file".into(),
        ));
    }
    let mut rounds = None;
    let mut runs: BTreeMap<String, Vec<Vec<MetricsRecord>>> = BTreeMap::new();
    for path in paths {
        let records = read_metrics(path)?;
        let last = records.last().ok_or_else(|| {
            Error::Validation(format!("{}: no rounds recorded", path.as_ref().display()))
        })?;
        match rounds {
            None => rounds = Some(last.round),
            Some(t) if t != last.round => {
                return Err(Error::Validation(format!(
                    "{} has {} rounds, expected {t}",
                    path.as_ref().display(),
                    last.round
                )))
            }
            Some(_) => {}
        }
        runs.entry(last.strategy.clone()).or_default().push(records);
    }
    let rounds = rounds.expect("at least one file");
    let at = |records: &[MetricsRecord], round: usize| {
        records
            .iter()
            .find(|r| r.round == round)
            .map(|r| r.test_acc)
            .ok_or_else(|| Error::Validation(format!("round {round} missing from a metrics file")))
    };
    let mut rows = Vec::new();
    for (strategy, group) in runs {
        let finals: Vec<f64> = group.iter().map(|r| r.last().unwrap().test_acc).collect();
        let (final_mean, final_std) = mean_std(&finals);
        let mut checkpoints = Vec::new();
        for round in checkpoint_rounds(rounds) {
            let values = group
                .iter()
                .map(|r| at(r, round))
                .collect::<Result<Vec<_>>>()?;
            checkpoints.push((round, mean_std(&values).0));
        }
        rows.push(StrategySummary {
            strategy,
            runs: group.len(),
            final_mean,
            final_std,
            checkpoints,
        });
    }
    Ok(Comparison { rounds, rows })
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<12} {:>4}  {:>15}",
            "strategy", "runs", "final acc (%)"
        )?;
        for round in checkpoint_rounds(self.rounds) {
            write!(f, "  {:>8}", format!("r{round}"))?;
        }
        writeln!(f)?;
        for row in &self.rows {
            write!(
                f,
                "{:<12} {:>4}  {:>15}",
                row.strategy,
                row.runs,
                format!("{:.2}±{:.2}", 100.0 * row.final_mean, 100.0 * row.final_std)
            )?;
            for (_, acc) in &row.checkpoints {
                write!(f, "  {:>8.2}", 100.0 * acc)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Result of one completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub strategy: String,
    pub seed: u64,
    pub rounds: usize,
    pub final_accuracy: f64,
    pub output: PathBuf,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} seed={} rounds={} final_test_acc={:.4} metrics={}",
            self.strategy,
            self.seed,
            self.rounds,
            self.final_accuracy,
            self.output.display()
        )
    }
}
