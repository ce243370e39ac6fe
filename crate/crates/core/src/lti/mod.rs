//! Rational and state-space LTI models, line models, the buck bus model and
//! its equilibrium.

mod bus;
mod equilibrium;
mod interconnect;
mod line;
mod rational;
mod statespace;

pub use bus::{
    check_bus_assumption, linearize_bus, zip_slope, AssumptionCheck, BusSpec, LoadImpedance,
};
pub use equilibrium::{
    nonlinear_field, solve_equilibrium, Equilibrium, NewtonConfig, NonlinearNetwork,
};
pub use interconnect::{interconnect, Interconnection};
pub use line::{build_line, LineKind, LineModel, LineParams};
pub use rational::RationalTransfer;
pub use statespace::StateSpace;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("evaluation point {s} is within 1e-12 of a pole")]
    PoleHit { s: Complex64 },
    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    Improper { num: usize, den: usize },
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("inconsistent state-space dimensions: {0}")]
    Dimension(String),
    #[error("bad line parameters: {0}")]
    BadLineParams(String),
    #[error("line transfer function is not strictly positive real: Re L(j{omega}) = {re}")]
    NotSPR { omega: f64, re: f64 },
    #[error("bus parameter {name} = {value} is out of range")]
    BadBusParams { name: &'static str, value: f64 },
    #[error("equilibrium voltage {0} V is not positive")]
    NonPositiveVoltage(f64),
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("equilibrium voltage of bus {bus} is {voltage} V")]
    NonPhysical { bus: usize, voltage: f64 },
    #[error("equilibrium needs a buck model on every bus (bus {0} is a transfer function)")]
    NotNonlinear(usize),
    #[error("algebraic loop: bus {bus} and line {edge} both have direct feedthrough")]
    AlgebraicLoop { bus: usize, edge: usize },
    #[error("eigenvalue iteration failed to converge")]
    Eigen,
}

/// Point of the extended imaginary axis: `Finite(w)` stands for s = jw.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum Omega {
    Finite(f64),
    Infinite,
}

impl Omega {
    pub fn freq(self) -> Freq {
        match self {
            Omega::Finite(w) => Freq::At(Complex64::new(0.0, w)),
            Omega::Infinite => Freq::Infinity,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Omega::Finite(w) => w,
            Omega::Infinite => f64::INFINITY,
        }
    }

    pub fn is_zero(self) -> bool {
        self == Omega::Finite(0.0)
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Omega::Finite(w) => write!(f, "{w}"),
            Omega::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Omega {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Omega::Finite(w) => ser.serialize_f64(*w),
            Omega::Infinite => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Omega {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(w) => Ok(Omega::Finite(w)),
            Raw::Str(s) if s == "inf" => Ok(Omega::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad frequency {s:?}"))),
        }
    }
}

/// Complex evaluation point, with infinity handled via feedthrough limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Freq {
    At(Complex64),
    Infinity,
}

impl Freq {
    pub fn jw(w: f64) -> Freq {
        Freq::At(Complex64::new(0.0, w))
    }
}
