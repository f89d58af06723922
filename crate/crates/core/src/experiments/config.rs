//! `key = value` experiment configuration files.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    HilbertScaling,
    GrowthCn,
    LambdaVsBmo,
    ExtrapolationProbe,
    InequalitySuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::HilbertScaling,
        ExperimentKind::GrowthCn,
        ExperimentKind::LambdaVsBmo,
        ExperimentKind::ExtrapolationProbe,
        ExperimentKind::InequalitySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::HilbertScaling => "hilbert_scaling",
            ExperimentKind::GrowthCn => "growth_cn",
            ExperimentKind::LambdaVsBmo => "lambda_vs_bmo",
            ExperimentKind::ExtrapolationProbe => "extrapolation_probe",
            ExperimentKind::InequalitySuite => "inequality_suite",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown experiment `{s}`")))
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A parsed configuration. Keys:
///
/// | key | meaning |
/// |---|---|
/// | `experiment` | one of the [`ExperimentKind`] names (required) |
/// | `N` | matrix sizes, comma-separated |
/// | `n` | dyadic resolutions |
/// | `p` | exponents |
/// | `ensemble` | random members per grid point |
/// | `seed` | base seed |
/// | `output_dir` | where CSV/JSON/replay files go |
/// | `power_tol`, `max_iter` | power iteration settings |
/// | `restarts` | restarts of the `p`-norm ascent |
/// | `sdp_tol` | relative duality gap of majorant solves |
///
/// Missing keys take per-experiment defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dims: Vec<usize>,
    pub resolutions: Vec<usize>,
    pub exponents: Vec<f64>,
    pub ensemble: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub power_tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub sdp_tol: f64,
}

const KEYS: [&str; 11] = [
    "experiment",
    "N",
    "n",
    "p",
    "ensemble",
    "seed",
    "output_dir",
    "power_tol",
    "max_iter",
    "restarts",
    "sdp_tol",
];

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        let powers = |hi: u32| (1..=hi).map(|k| 1usize << k).collect::<Vec<_>>();
        let (dims, resolutions, exponents, ensemble) = match experiment {
            ExperimentKind::HilbertScaling => (powers(10), vec![], vec![], 0),
            ExperimentKind::GrowthCn => (powers(9), vec![], vec![], 8),
            ExperimentKind::LambdaVsBmo => (vec![1, 2, 4, 8], vec![3, 7], vec![], 200),
            ExperimentKind::ExtrapolationProbe => (vec![2], vec![3, 7], vec![1.5, 2.0, 3.0, 4.0], 12),
            ExperimentKind::InequalitySuite => (vec![1, 2, 4, 8], vec![1, 2, 3, 4, 5, 6], vec![], 200),
        };
        Self {
            experiment,
            dims,
            resolutions,
            exponents,
            ensemble,
            seed: 0,
            output_dir: PathBuf::from("results"),
            power_tol: 1e-8,
            max_iter: 20_000,
            restarts: 6,
            sdp_tol: 1e-7,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Invalid(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if pairs.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Invalid(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let experiment: ExperimentKind = pairs
            .get("experiment")
            .ok_or_else(|| Error::Invalid("missing `experiment`".into()))?
            .parse()?;
        let mut cfg = Self::defaults(experiment);
        for (key, value) in &pairs {
            match key.as_str() {
                "experiment" => {}
                "N" => cfg.dims = parse_list(key, value)?,
                "n" => cfg.resolutions = parse_list(key, value)?,
                "p" => cfg.exponents = parse_list(key, value)?,
                "ensemble" => cfg.ensemble = parse_one(key, value)?,
                "seed" => cfg.seed = parse_one(key, value)?,
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "power_tol" => cfg.power_tol = parse_one(key, value)?,
                "max_iter" => cfg.max_iter = parse_one(key, value)?,
                "restarts" => cfg.restarts = parse_one(key, value)?,
                "sdp_tol" => cfg.sdp_tol = parse_one(key, value)?,
                _ => unreachable!("keys validated above"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::Invalid("N entries must be positive".into()));
        }
        if self.exponents.iter().any(|&p| !(p > 1.0 && p.is_finite())) {
            return Err(Error::Invalid("p entries must lie in (1, inf)".into()));
        }
        if !(self.power_tol > 0.0 && self.sdp_tol > 0.0) {
            return Err(Error::Invalid("tolerances must be positive".into()));
        }
        if self.experiment == ExperimentKind::HilbertScaling && self.dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("hilbert_scaling needs ascending N".into()));
        }
        Ok(())
    }

    /// Canonical text of everything that influences recorded values, i.e.
    /// all keys except `output_dir`.
    pub fn canonical(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        format!(
            "experiment={}\nN={}\nn={}\np={}\nensemble={}\nseed={}\npower_tol={}\nmax_iter={}\nrestarts={}\nsdp_tol={}\n",
            self.experiment,
            join(self.dims.iter().map(|x| x.to_string()).collect()),
            join(self.resolutions.iter().map(|x| x.to_string()).collect()),
            join(self.exponents.iter().map(|x| x.to_string()).collect()),
            self.ensemble,
            self.seed,
            self.power_tol,
            self.max_iter,
            self.restarts,
            self.sdp_tol,
        )
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Invalid(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() {
        return Ok(vec![]);
    }
    value.split(',').map(|v| parse_one(key, v.trim())).collect()
}
