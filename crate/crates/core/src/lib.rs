//! Decentralized stability certificates for DC microgrids.
//!
//! Each bus is checked against conditions that involve only its own
//! small-signal model and the lines it touches. An independent oracle
//! (closed-loop eigenvalues, determinant winding, sampled homotopy)
//! cross-checks every certificate.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod criteria;
pub mod linalg;
pub mod lti;
pub mod netgraph;
pub mod network;
pub mod oracle;
