use std::io::Write;

use serde::Serialize;

use super::input::NetworkFile;
use super::{CliError, RunConfig};
use crate::criteria::{FailingBand, FrequencyVerdict, Verdict};
use crate::lti::Omega;
use crate::network::Mode;
use crate::oracle::OracleReport;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub network: NetworkFile,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub mode: Mode,
    /// Why the instance was rejected before any frequency was looked at.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub grid: Vec<Omega>,
    pub per_frequency: Vec<FrequencyVerdict>,
    pub failing_bands: Vec<FailingBand>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    pub provenance: Provenance,
}

impl StabilityReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

const FLAGS: [&str; 8] = [
    "s1_passivity",
    "s1_smallgain",
    "s1",
    "s2_passivity",
    "s2_smallgain",
    "s2_multiplier",
    "s2",
    "combined",
];

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// One row per frequency with 0/1 test outcomes per bus.
pub fn write_plot_csv<W: Write>(out: W, points: &[FrequencyVerdict]) -> Result<(), CliError> {
    let n = points.first().map_or(0, |p| p.buses.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["omega".to_string()];
    for j in 1..=n {
        header.extend(FLAGS.iter().map(|f| format!("bus{j}_{f}")));
    }
    let csv_err = |e: csv::Error| CliError::Output(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        let mut row = vec![p.omega.to_string()];
        for b in &p.buses {
            let opt = |x: Option<bool>| bit(x.unwrap_or(false)).to_string();
            row.extend([
                bit(b.s1_passivity).to_string(),
                bit(b.s1_smallgain).to_string(),
                bit(b.s1).to_string(),
                opt(b.s2_passivity),
                opt(b.s2_smallgain),
                opt(b.s2_multiplier),
                opt(b.s2),
                bit(p.combined).to_string(),
            ]);
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))
}
