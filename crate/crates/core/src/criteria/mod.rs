//! Decentralized frequency-domain certificates and the frequency sweep.

mod dc;
pub mod qc;
pub mod statement1;
pub mod statement2;
mod sweep;

pub use dc::{dc_condition, DcOutcome};
pub use qc::{qc_holds, qcbar_holds, QCMultiplier, QcOutcome};
pub use statement1::{j_weight, statement1_bus, statement1_network, S1Branch, S1Bus, S1Network};
pub use statement2::{
    build_gj, gj_support, search_multiplier, statement2_bus, statement2_network, Block,
    LineMultiplier, S2Branch, S2Bus, S2Network, SearchConfig, SearchOutcome,
};
pub use sweep::{
    certify, certify_with, evaluate_point, preconditions, BandKind, BusVerdict, Certification,
    CertifyConfig, FailingBand, FrequencyVerdict, Verdict,
};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::lti::LtiError;
use crate::network::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("multiplier block {0} is not Hermitian")]
    NotHermitian(&'static str),
    #[error("bus {0} has no incident line")]
    IsolatedBus(usize),
    #[error("mode {mode} does not accept the kind of line(s) {lines:?}")]
    ModeMismatch { mode: Mode, lines: Vec<usize> },
    #[error("bus {bus} is not stable on its own: eigenvalues {eigenvalues:?}")]
    AssumptionViolated {
        bus: usize,
        eigenvalues: Vec<Complex64>,
    },
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// A single test outcome with its normalized margin (nonnegative iff it holds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Branch {
    pub holds: bool,
    pub margin: f64,
}

impl Branch {
    pub fn new(margin: f64) -> Self {
        Branch {
            holds: margin >= 0.0,
            margin,
        }
    }

    pub fn with_tol(margin: f64, tol: f64) -> Self {
        Branch {
            holds: margin >= -tol,
            margin,
        }
    }
}
