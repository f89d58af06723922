use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use paraprod::constructions;
use paraprod::experiments::{self, plot, record, ExperimentConfig};
use paraprod::io;
use paraprod::majorant;
use paraprod::norms::{self, BmoVariant, NormKind};
use paraprod::operators::{self, AscentOptions, OperatorHandle, OperatorKind, PowerOptions};

#[derive(Parser)]
#[command(name = "paraprod", version, about = "Dyadic matrix paraproducts and maximal norms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a named construction as JSON.
    Construct {
        #[arg(long, value_enum)]
        what: Construction,
        #[arg(long = "N", short = 'N')]
        dim: usize,
        /// Coefficient vector for `sharpness` (JSON array).
        #[arg(long)]
        alpha: Option<PathBuf>,
    },
    /// Compute a norm of a function read from a JSON file.
    Norm {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        input: PathBuf,
    },
    /// Estimate the norm of an operator with the given symbol.
    Opnorm {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        phi: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Maximal `L^1` norm of a function sequence.
    Maxnorm {
        /// One file holding a sequence, or several comma-separated files.
        #[arg(long, value_delimiter = ',', required = true)]
        input: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = MaxMode::Positive)]
        mode: MaxMode,
        #[arg(long, default_value_t = majorant::DEFAULT_TOL)]
        tol: f64,
    },
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run (or resume) an experiment configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Render an SVG chart from a results CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Construction {
    Hilbert,
    Th,
    Gk,
    Sharpness,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaxMode {
    Positive,
    Selfadjoint,
}

fn parse_json(s: &str) -> Value {
    serde_json::from_str(s).expect("library emits valid JSON")
}

fn construct(what: Construction, dim: usize, alpha: Option<&Path>) -> Result<Value> {
    if dim == 0 {
        bail!("N must be positive");
    }
    Ok(match what {
        Construction::Hilbert => {
            let h = constructions::hilbert_matrix(dim);
            json!({ "N": dim, "matrix": parse_json(&io::real_matrix_to_json(&h)) })
        }
        Construction::Th => {
            let t = constructions::triangle_projection(&constructions::hilbert_matrix(dim));
            json!({ "N": dim, "matrix": parse_json(&io::real_matrix_to_json(&t)) })
        }
        Construction::Gk => {
            let family: Vec<Value> = constructions::gk_family(dim)
                .iter()
                .map(|m| parse_json(&io::real_matrix_to_json(m)))
                .collect();
            json!({ "N": dim, "family": family })
        }
        Construction::Sharpness => {
            let alpha = match alpha {
                Some(path) => io::alpha_from_json(&read(path)?)?,
                None => constructions::sharpness_alpha(dim),
            };
            if alpha.len() != dim {
                bail!("alpha has {} entries, N = {dim}", alpha.len());
            }
            parse_json(&io::function_to_json(&constructions::sharpness_function(&alpha)?))
        }
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn norm(kind: &str, p: Option<f64>, input: &Path) -> Result<Value> {
    let f = io::read_function(input)?;
    let kind: NormKind = kind.parse()?;
    let report = match kind {
        NormKind::BmoC => norms::bmo_norm(&f, BmoVariant::Column),
        NormKind::BmoR => norms::bmo_norm(&f, BmoVariant::Row),
        NormKind::BmoCr => norms::bmo_norm(&f, BmoVariant::ColumnRow),
        NormKind::BmoM => norms::bmo_m_norm(&f),
        NormKind::H1Max => norms::h1_max_norm(&f),
        NormKind::Lp => norms::lp_report(&f, p.context("--p is required for lp")?)?,
    };
    let mut v = serde_json::to_value(report)?;
    if let Some(p) = p.filter(|_| kind == NormKind::Lp) {
        v["p"] = json!(p);
    }
    Ok(v)
}

fn opnorm(kind: &str, phi: &Path, p: f64, seed: u64) -> Result<Value> {
    let kind: OperatorKind = kind.parse()?;
    let op = OperatorHandle::new(kind, io::read_function(phi)?);
    if p == 2.0 {
        let opts = PowerOptions { seed, ..PowerOptions::default() };
        let est = operators::operator_norm_2(&op, opts)?;
        Ok(json!({ "kind": kind.name(), "p": p, "value": est.value, "iterations": est.iterations, "converged": est.converged, "lower_bound": false }))
    } else {
        let opts = AscentOptions { seed, ..AscentOptions::default() };
        let v = operators::operator_norm_p_lower(&op, p, opts)?;
        Ok(json!({ "kind": kind.name(), "p": p, "value": v, "lower_bound": true }))
    }
}

fn maxnorm(input: &[PathBuf], mode: MaxMode, tol: f64) -> Result<Value> {
    let seq = if let [single] = input {
        io::read_sequence(single)?
    } else {
        input.iter().map(|p| io::read_function(p)).collect::<paraprod::Result<_>>()?
    };
    let report = match mode {
        MaxMode::Positive => majorant::max_norm_l1_positive_tol(&seq, tol)?,
        MaxMode::Selfadjoint => majorant::max_norm_l1_selfadjoint_tol(&seq, tol)?,
    };
    Ok(serde_json::to_value(report)?)
}

fn experiment_run(config: &Path, output_dir: Option<PathBuf>) -> Result<bool> {
    let mut cfg = ExperimentConfig::parse(&read(config)?)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    eprintln!("{} [{}] -> {}", cfg.experiment, cfg.hash(), experiments::csv_path(&cfg).display());
    let outcome = experiments::run_with_progress(&cfg, |r| {
        eprintln!("  {} done in {:.2}s", r.point.key(), r.wall_time);
    })?;
    println!(
        "{}: {} computed, {} resumed",
        cfg.experiment, outcome.computed, outcome.skipped
    );
    for c in &outcome.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("csv: {}", outcome.csv_path.display());
    println!("summary: {}", outcome.json_path.display());
    Ok(outcome.passed())
}

fn experiment_plot(csv: &Path, metric: Option<String>, out: Option<PathBuf>) -> Result<()> {
    let records = record::read_csv(csv)?;
    let experiment = records.first().map(|r| r.experiment.clone()).unwrap_or_default();
    let metric = metric.unwrap_or_else(|| plot::default_metric(&experiment).to_string());
    let svg = plot::render_svg(&records, &metric)?;
    let out = out.unwrap_or_else(|| csv.with_extension("svg"));
    std::fs::write(&out, svg)?;
    println!("{}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Construct { what, dim, alpha } => construct(what, dim, alpha.as_deref()).map(Some),
        Command::Norm { kind, p, input } => norm(&kind, p, &input).map(Some),
        Command::Opnorm { kind, phi, p, seed } => opnorm(&kind, &phi, p, seed).map(Some),
        Command::Maxnorm { input, mode, tol } => maxnorm(&input, mode, tol).map(Some),
        Command::Experiment(ExperimentCommand::Run { config, output_dir }) => match experiment_run(&config, output_dir) {
            Ok(true) => Ok(None),
            Ok(false) => return ExitCode::from(3),
            Err(e) => Err(e),
        },
        Command::Experiment(ExperimentCommand::Plot { csv, metric, out }) => experiment_plot(&csv, metric, out).map(|_| None),
    };
    match result {
        Ok(Some(v)) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
