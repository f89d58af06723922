//! Experiment records and their long-format CSV encoding.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = ["experiment", "config_hash", "N", "n", "p", "seed", "metric", "value"];

/// Grid coordinates of a record. Absent coordinates are empty CSV fields.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    #[serde(rename = "N")]
    pub dim: Option<usize>,
    pub n: Option<usize>,
    pub p: Option<f64>,
}

impl GridPoint {
    pub fn new(dim: Option<usize>, n: Option<usize>, p: Option<f64>) -> Self {
        Self { dim, n, p }
    }

    fn fields(&self) -> [String; 3] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            opt(self.dim.map(|x| x.to_string())),
            opt(self.n.map(|x| x.to_string())),
            opt(self.p.map(|x| x.to_string())),
        ]
    }

    /// Key used to recognize already computed points on resume.
    pub fn key(&self) -> String {
        self.fields().join("|")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub experiment: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub point: GridPoint,
    pub seed: u64,
    pub metrics: Vec<(String, f64)>,
    /// Seconds. Kept out of the CSV so that reruns are byte-identical.
    pub wall_time: f64,
}

impl ExperimentRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

/// Appends records to a CSV file, writing the header only for a new file.
pub fn append_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    for (metric, value) in records.iter().flat_map(|r| &r.metrics) {
        if !value.is_finite() {
            return Err(Error::Invalid(format!("metric {metric} = {value} is not finite")));
        }
    }
    let exists = path.exists() && std::fs::metadata(path)?.len() > 0;
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if !exists {
        w.write_record(CSV_HEADER)?;
    }
    for r in records {
        let [dim, n, p] = r.point.fields();
        for (metric, value) in &r.metrics {
            w.write_record([
                r.experiment.as_str(),
                r.config_hash.as_str(),
                &dim,
                &n,
                &p,
                &r.seed.to_string(),
                metric,
                &value.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Invalid(format!("bad CSV field `{s}`")))
}

/// Reads a long-format CSV back into records, one per grid point, in file order.
pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(File::open(path)?);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Invalid(format!("unexpected CSV header in {}", path.display())));
    }
    let mut out: Vec<ExperimentRecord> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let point = GridPoint::new(parse_opt(&row[2])?, parse_opt(&row[3])?, parse_opt(&row[4])?);
        let seed: u64 = parse_opt(&row[5])?.unwrap_or(0);
        let value: f64 = parse_opt(&row[7])?.ok_or_else(|| Error::Invalid("empty value".into()))?;
        let same = out.last().is_some_and(|r: &ExperimentRecord| {
            r.experiment == row[0] && r.config_hash == row[1] && r.point.key() == point.key()
        });
        if !same {
            out.push(ExperimentRecord {
                experiment: row[0].to_string(),
                config_hash: row[1].to_string(),
                point,
                seed,
                metrics: vec![],
                wall_time: 0.0,
            });
        }
        out.last_mut().expect("pushed").metrics.push((row[6].to_string(), value));
    }
    Ok(out)
}

pub fn completed_points(records: &[ExperimentRecord]) -> BTreeSet<String> {
    records.iter().map(|r| r.point.key()).collect()
}
