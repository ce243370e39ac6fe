//! Command-line driver: parse a network file, run the sweep and the
//! optional oracle, write the report and plot data.

pub mod input;
pub mod report;

use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;
use thiserror::Error;

pub use input::{parse_network, parse_network_str, NetworkFile, SPEC_VERSION};
pub use report::{write_plot_csv, Provenance, StabilityReport};

use crate::criteria::{
    certify_with, preconditions, CertifyConfig, CriteriaError, SearchConfig, Verdict,
};
use crate::lti::LtiError;
use crate::netgraph::GraphError;
use crate::network::{Mode, NetworkSpec};
use crate::oracle::{run_oracle, OracleError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("unit error at {pointer}: {message}")]
    Unit { pointer: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    /// Stable machine-readable code for scripts.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Schema { .. } => "schema",
            CliError::Unit { .. } => "unit",
            CliError::Graph(_) => "graph",
            CliError::Lti(LtiError::NoConvergence { .. } | LtiError::NonPhysical { .. }) => {
                "equilibrium"
            }
            CliError::Lti(_) => "model",
            CliError::Criteria(_) => "criteria",
            CliError::Oracle(OracleError::PhaseJump { .. }) => "phase_jump",
            CliError::Oracle(_) => "oracle",
            CliError::Output(_) => "output",
        }
    }
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "mgcert",
    version,
    about = "Decentralized stability certificates for DC microgrids"
)]
pub struct Args {
    /// Network description (JSON).
    pub network: PathBuf,
    /// Lowest swept frequency, rad/s.
    #[arg(long, default_value_t = 1e-2)]
    pub wmin: f64,
    /// Highest swept frequency, rad/s.
    #[arg(long, default_value_t = 1e7)]
    pub wmax: f64,
    #[arg(long, default_value_t = 240)]
    pub per_decade: usize,
    /// Strictness margin eps of every constraint.
    #[arg(long, default_value_t = 1e-6)]
    pub margin: f64,
    /// Override the mode stored in the file.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Cross-check with closed-loop eigenvalues and determinant winding.
    #[arg(long)]
    pub oracle: bool,
    /// Also run the sampled homotopy (implies --oracle).
    #[arg(long)]
    pub homotopy: bool,
    /// Write 0/1 test outcomes per frequency to this CSV file.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Seed of the multiplier search.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "theorem1" => Ok(Mode::Theorem1),
        "theorem2" => Ok(Mode::Theorem2),
        _ => Err(format!("unknown mode {s:?}, expected theorem1 or theorem2")),
    }
}

/// Everything that influences the result, echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub sweep: CertifyConfig,
    pub seed: u64,
    pub search_budget: usize,
    pub oracle: bool,
    pub homotopy: bool,
}

impl RunConfig {
    pub fn from_args(a: &Args) -> Self {
        let search = SearchConfig {
            seed: a.seed,
            ..SearchConfig::default()
        };
        RunConfig {
            sweep: CertifyConfig {
                wmin: a.wmin,
                wmax: a.wmax,
                per_decade: a.per_decade,
                eps: a.margin,
                diagnostics: a.plot.is_some(),
                search,
                ..CertifyConfig::default()
            },
            seed: a.seed,
            search_budget: search.budget,
            oracle: a.oracle || a.homotopy,
            homotopy: a.homotopy,
        }
    }
}

pub fn exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Certified => 0,
        Verdict::Undecided => 2,
        Verdict::Rejected => 3,
    }
}

/// Certify one network. Preconditions that rule the tests out give a
/// REJECTED report rather than an error.
pub fn analyze(
    file: &NetworkFile,
    spec: &NetworkSpec,
    cfg: &RunConfig,
) -> Result<StabilityReport, CliError> {
    let provenance = Provenance {
        tool: "mgcert",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        network: NetworkFile {
            mode: spec.mode,
            ..file.clone()
        },
    };
    let models = match preconditions(spec) {
        Ok(m) => m,
        Err(e @ (CriteriaError::AssumptionViolated { .. } | CriteriaError::IsolatedBus(_))) => {
            return Ok(StabilityReport {
                verdict: Verdict::Rejected,
                mode: spec.mode,
                diagnostic: Some(e.to_string()),
                grid: Vec::new(),
                per_frequency: Vec::new(),
                failing_bands: Vec::new(),
                oracle: None,
                provenance,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let cert = certify_with(spec, &models, &cfg.sweep)?;
    let oracle = if cfg.oracle {
        Some(run_oracle(spec, &models, cfg.homotopy)?)
    } else {
        None
    };
    Ok(StabilityReport {
        verdict: cert.verdict,
        mode: spec.mode,
        diagnostic: None,
        grid: cert.points.iter().map(|p| p.omega).collect(),
        per_frequency: cert.points,
        failing_bands: cert.failing_bands,
        oracle,
        provenance,
    })
}

fn write_file(path: &PathBuf, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// Full command: returns the process exit code.
pub fn run(args: &Args) -> Result<i32, CliError> {
    let file = parse_network(&args.network)?;
    let spec = file.to_spec(args.mode)?;
    let cfg = RunConfig::from_args(args);
    let rep = analyze(&file, &spec, &cfg)?;
    if let Some(p) = &args.plot {
        let mut buf = Vec::new();
        write_plot_csv(&mut buf, &rep.per_frequency)?;
        write_file(p, &buf)?;
    }
    let json = rep.to_json();
    match &args.report {
        Some(p) => write_file(p, json.as_bytes())?,
        None => print!("{json}"),
    }
    eprintln!("{}", summary(&rep));
    Ok(exit_code(rep.verdict))
}

pub fn summary(rep: &StabilityReport) -> String {
    let mut s = format!("{:?}", rep.verdict).to_uppercase();
    if let Some(d) = &rep.diagnostic {
        s.push_str(&format!(": {d}"));
    }
    for b in &rep.failing_bands {
        s.push_str(&format!("\n  not certified on [{}, {}] rad/s", b.lo, b.hi));
    }
    if let Some(o) = &rep.oracle {
        s.push_str(&format!(
            "\n  oracle: {:?}, abscissa {:.4e}, winding {}, min |det| {:.3e}",
            o.eig.verdict, o.eig.abscissa, o.winding, o.min_det
        ));
        if let Some(h) = &o.homotopy {
            s.push_str(&format!(
                ", homotopy {}",
                if h.passed { "passed" } else { "failed" }
            ));
        }
    }
    s
}
