//! A complete microgrid instance: bus models, topology, line models and the
//! certification mode.

use serde::{Deserialize, Serialize};

use crate::lti::{
    build_line, linearize_bus, solve_equilibrium, BusSpec, Equilibrium, LineKind, LineModel,
    LineParams, LtiError, NewtonConfig, RationalTransfer, StateSpace,
};
use crate::netgraph::{build_incidence, IncidenceMatrix, NetworkGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// All lines stable; frequencies 0 and infinity included.
    Theorem1,
    /// All lines have a pole at the origin; zero frequency handled by the DC test.
    Theorem2,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Theorem1 => "theorem1",
            Mode::Theorem2 => "theorem2",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BusModel {
    /// Nonlinear buck converter; linearized around the network equilibrium.
    Buck(BusSpec),
    /// A given small-signal injected-current to voltage transfer function.
    Transfer(RationalTransfer),
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub buses: Vec<BusModel>,
    pub graph: NetworkGraph,
    pub lines: Vec<LineModel>,
    pub mode: Mode,
    incidence: IncidenceMatrix,
}

/// Small-signal models of every bus and line at the operating point.
#[derive(Debug, Clone)]
pub struct LinearModels {
    pub buses: Vec<StateSpace>,
    pub lines: Vec<StateSpace>,
    pub equilibrium: Option<Equilibrium>,
}

impl NetworkSpec {
    pub fn new(
        buses: Vec<BusModel>,
        graph: NetworkGraph,
        lines: &[LineParams],
        mode: Mode,
    ) -> Result<Self, LtiError> {
        if buses.len() != graph.n_buses() {
            return Err(LtiError::Dimension(format!(
                "{} buses for a {}-bus graph",
                buses.len(),
                graph.n_buses()
            )));
        }
        if lines.len() != graph.n_edges() {
            return Err(LtiError::Dimension(format!(
                "{} lines for {} edges",
                lines.len(),
                graph.n_edges()
            )));
        }
        for b in &buses {
            if let BusModel::Buck(b) = b {
                b.validate()?;
            }
        }
        let lines = lines
            .iter()
            .map(build_line)
            .collect::<Result<Vec<_>, _>>()?;
        let incidence = build_incidence(&graph);
        Ok(NetworkSpec {
            buses,
            graph,
            lines,
            mode,
            incidence,
        })
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn n_buses(&self) -> usize {
        self.graph.n_buses()
    }

    pub fn n_edges(&self) -> usize {
        self.graph.n_edges()
    }

    pub fn line_params(&self) -> Vec<LineParams> {
        self.lines.iter().map(|l| l.params.clone()).collect()
    }

    /// Lines whose kind does not fit the mode.
    pub fn mode_violations(&self) -> Vec<usize> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| match self.mode {
                Mode::Theorem1 => l.kind == LineKind::PoleAtOrigin,
                Mode::Theorem2 => l.kind != LineKind::PoleAtOrigin,
            })
            .map(|(k, _)| k + 1)
            .collect()
    }

    /// Copy with edge `k` reversed. Line admittances are symmetric, so only
    /// the orientation changes.
    pub fn flipped(&self, k: usize) -> NetworkSpec {
        let graph = self.graph.flipped(k);
        let incidence = build_incidence(&graph);
        NetworkSpec {
            graph,
            incidence,
            ..self.clone()
        }
    }

    /// Copy with every constant-power load multiplied by `factor`.
    pub fn scale_power(&self, factor: f64) -> NetworkSpec {
        let mut out = self.clone();
        for b in &mut out.buses {
            if let BusModel::Buck(b) = b {
                b.p_load *= factor;
            }
        }
        out
    }

    /// Solve the equilibrium when needed and linearize every bus.
    pub fn linearize(&self) -> Result<LinearModels, LtiError> {
        let lines = self.lines.iter().map(|l| l.realize()).collect();
        let buck = self
            .buses
            .iter()
            .filter(|b| matches!(b, BusModel::Buck(_)))
            .count();
        if buck == 0 {
            let buses = self
                .buses
                .iter()
                .map(|b| match b {
                    BusModel::Transfer(tf) => tf.realize(),
                    BusModel::Buck(_) => unreachable!(),
                })
                .collect();
            return Ok(LinearModels {
                buses,
                lines,
                equilibrium: None,
            });
        }
        let eq = solve_equilibrium(self, &NewtonConfig::default())?;
        let buses = self
            .buses
            .iter()
            .enumerate()
            .map(|(j, b)| match b {
                BusModel::Buck(b) => linearize_bus(b, eq.bus_voltages[j]),
                BusModel::Transfer(_) => Err(LtiError::NotNonlinear(j + 1)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LinearModels {
            buses,
            lines,
            equilibrium: Some(eq),
        })
    }
}
