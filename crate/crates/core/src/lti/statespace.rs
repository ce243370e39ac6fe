use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Freq, LtiError};
use crate::linalg::{eigenvalues_real, to_complex, CMat};

const POLE_TOL: f64 = 1e-12;

/// Realization (A, B, C, D) of an LTI system.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    poles: Vec<Complex64>,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self, LtiError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LtiError::Dimension(format!("A is {}x{}", n, a.ncols())));
        }
        if b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(LtiError::Dimension(format!(
                "A {n}x{n}, B {}x{}, C {}x{}, D {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        if ![&a, &b, &c, &d]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
        {
            return Err(LtiError::Dimension("non-finite entry".into()));
        }
        let poles = eigenvalues_real(&a).ok_or(LtiError::Eigen)?;
        Ok(StateSpace { a, b, c, d, poles })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Eigenvalues of A.
    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn has_feedthrough(&self) -> bool {
        self.d.iter().any(|&x| x != 0.0)
    }

    /// C (sI - A)^-1 B + D, or D at infinity.
    pub fn eval(&self, s: Freq) -> Result<CMat, LtiError> {
        let d = to_complex(&self.d);
        let s = match s {
            Freq::Infinity => return Ok(d),
            Freq::At(s) => s,
        };
        if self.order() == 0 {
            return Ok(d);
        }
        if self.poles.iter().any(|p| (s - p).norm() <= POLE_TOL) {
            return Err(LtiError::PoleHit { s });
        }
        let n = self.order();
        let m = CMat::from_fn(n, n, |i, j| {
            let v = Complex64::new(-self.a[(i, j)], 0.0);
            if i == j {
                v + s
            } else {
                v
            }
        });
        let x = m
            .lu()
            .solve(&to_complex(&self.b))
            .ok_or(LtiError::PoleHit { s })?;
        Ok(to_complex(&self.c) * x + d)
    }

    /// Scalar response of a single-input single-output model.
    pub fn eval_siso(&self, s: Freq) -> Result<Complex64, LtiError> {
        Ok(self.eval(s)?[(0, 0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order() {
        let ss = StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let v = ss.eval_siso(Freq::jw(1.0)).unwrap();
        assert!((v - Complex64::new(0.5, -0.5)).norm() < 1e-15);
        assert_eq!(
            ss.eval_siso(Freq::Infinity).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        assert!(matches!(
            ss.eval(Freq::At(Complex64::new(-1.0, 0.0))),
            Err(LtiError::PoleHit { .. })
        ));
    }

    #[test]
    fn dimension_check() {
        let r = StateSpace::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(r, Err(LtiError::Dimension(_))));
    }
}
