//! Quadratic-constraint membership tests.

use num_complex::Complex64;

use super::CriteriaError;
use crate::linalg::{max_eigenvalue_hermitian, min_eigenvalue_hermitian, CMat, C64};

/// Tolerance on the minimum eigenvalue for a block to count as PSD.
pub const PSD_TOL: f64 = 1e-12;

/// Multiplier [[pi11, pi12], [pi12*, pi22]].
#[derive(Debug, Clone, PartialEq)]
pub struct QCMultiplier {
    pub pi11: CMat,
    pub pi12: CMat,
    pub pi22: CMat,
}

impl QCMultiplier {
    pub fn new(pi11: CMat, pi12: CMat, pi22: CMat) -> Result<Self, CriteriaError> {
        let n = pi11.nrows();
        let square = |m: &CMat| m.nrows() == m.ncols();
        if !square(&pi11) || !square(&pi22) || pi12.nrows() != n || pi12.ncols() != pi22.nrows() {
            return Err(CriteriaError::DimensionMismatch("multiplier blocks".into()));
        }
        for (name, m) in [("pi11", &pi11), ("pi22", &pi22)] {
            if (m - m.adjoint()).iter().any(|z| z.norm() > 1e-12) {
                return Err(CriteriaError::NotHermitian(name));
            }
        }
        Ok(QCMultiplier { pi11, pi12, pi22 })
    }

    /// [[0, I], [I, 0]]: passivity.
    pub fn passivity(n: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        QCMultiplier {
            pi11: CMat::zeros(n, n),
            pi12: CMat::identity(n, n) * one,
            pi22: CMat::zeros(n, n),
        }
    }

    /// diag(-2 I, I/2): gain at most 1/2.
    pub fn half_gain(n: usize) -> Self {
        QCMultiplier {
            pi11: CMat::identity(n, n) * C64::new(-2.0, 0.0),
            pi12: CMat::zeros(n, n),
            pi22: CMat::identity(n, n) * C64::new(0.5, 0.0),
        }
    }

    /// Scalar multiplier [[p11, p12], [conj p12, p22]].
    pub fn scalar(p11: f64, p12: C64, p22: f64) -> Self {
        QCMultiplier {
            pi11: CMat::from_element(1, 1, C64::new(p11, 0.0)),
            pi12: CMat::from_element(1, 1, p12),
            pi22: CMat::from_element(1, 1, C64::new(p22, 0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcOutcome {
    pub holds: bool,
    pub slack: f64,
}

/// X*P11 X + X*P12 + P12* X + P22 - eps X*X >= 0.
pub fn qc_holds(x: &CMat, pi: &QCMultiplier, eps: f64) -> Result<QcOutcome, CriteriaError> {
    let (p, m) = (x.nrows(), x.ncols());
    if pi.pi11.nrows() != p || pi.pi22.nrows() != m || pi.pi12.nrows() != p || pi.pi12.ncols() != m
    {
        return Err(CriteriaError::DimensionMismatch(format!(
            "X is {p}x{m}, multiplier blocks {}x{} and {}x{}",
            pi.pi11.nrows(),
            pi.pi11.ncols(),
            pi.pi22.nrows(),
            pi.pi22.ncols()
        )));
    }
    let xa = x.adjoint();
    let q = &xa * &pi.pi11 * x + &xa * &pi.pi12 + pi.pi12.adjoint() * x + &pi.pi22
        - (&xa * x) * C64::new(eps, 0.0);
    let slack = min_eigenvalue_hermitian(&q);
    Ok(QcOutcome {
        holds: slack >= -PSD_TOL,
        slack,
    })
}

/// P11 - P12 X - X* P12* + X* P22 X <= -eps_bar I.
pub fn qcbar_holds(x: &CMat, pi: &QCMultiplier, eps_bar: f64) -> Result<QcOutcome, CriteriaError> {
    let (p, m) = (x.nrows(), x.ncols());
    if pi.pi11.nrows() != m || pi.pi22.nrows() != p || pi.pi12.nrows() != m || pi.pi12.ncols() != p
    {
        return Err(CriteriaError::DimensionMismatch(format!(
            "X is {p}x{m}, multiplier blocks {}x{} and {}x{}",
            pi.pi11.nrows(),
            pi.pi11.ncols(),
            pi.pi22.nrows(),
            pi.pi22.ncols()
        )));
    }
    let xa = x.adjoint();
    let q = &pi.pi11 - &pi.pi12 * x - &xa * pi.pi12.adjoint() + &xa * &pi.pi22 * x;
    let slack = -max_eigenvalue_hermitian(&q);
    Ok(QcOutcome {
        holds: slack >= eps_bar - PSD_TOL,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{build_line, Freq, LineParams};
    use crate::netgraph::{build_coupling, build_incidence, NetworkGraph};

    fn s(x: f64) -> CMat {
        CMat::from_element(1, 1, C64::new(x, 0.0))
    }

    #[test]
    fn scalar_qc() {
        let pi = QCMultiplier::passivity(1);
        let r = qc_holds(&s(0.5), &pi, 0.1).unwrap();
        assert!(r.holds && (r.slack - 0.975).abs() < 1e-15);
        let r = qc_holds(&s(-1.0), &pi, 0.0).unwrap();
        assert!(!r.holds && (r.slack + 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_operator_reduces_to_pi22() {
        let n = 3;
        let pi = QCMultiplier::new(
            CMat::identity(n, n) * C64::new(-4.0, 0.0),
            CMat::from_element(n, n, C64::new(0.3, 0.2)),
            CMat::identity(n, n) * C64::new(0.1, 0.0),
        )
        .unwrap();
        assert!(qc_holds(&CMat::zeros(n, n), &pi, 1.0).unwrap().holds);
    }

    #[test]
    fn rl_line_passive_at_all_frequencies() {
        let line = build_line(&LineParams::Rl { r: 0.3, l: 2e-3 }).unwrap();
        let pi = QCMultiplier::passivity(1);
        for k in 0..60 {
            let w = 10f64.powf(-3.0 + 0.2 * k as f64);
            let x = CMat::from_element(1, 1, line.eval(Freq::jw(w)).unwrap());
            assert!(qcbar_holds(&x, &pi, 0.0).unwrap().holds, "w = {w}");
        }
    }

    #[test]
    fn gram_has_gain_at_most_two() {
        let g = NetworkGraph::from_one_based(4, &[(1, 2), (2, 3), (3, 4), (4, 1), (1, 3)]).unwrap();
        let a = build_coupling(&build_incidence(&g)).gram;
        let n = a.nrows();
        let pi = QCMultiplier::half_gain(n);
        assert!(
            qcbar_holds(&crate::linalg::to_complex(&a), &pi, 0.0)
                .unwrap()
                .holds
        );
    }

    #[test]
    fn gain_three_violates_half_gain() {
        let r = qcbar_holds(&s(3.0), &QCMultiplier::half_gain(1), 0.0).unwrap();
        assert!(!r.holds && (r.slack + 2.5).abs() < 1e-15);
    }
}
