use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Freq, LtiError, StateSpace};
use crate::linalg::{polyval, roots, trim};

const POLE_TOL: f64 = 1e-12;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransfer {
    num: Vec<f64>,
    den: Vec<f64>,
}

/// Scalar real-coefficient rational function, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransfer")]
pub struct RationalTransfer {
    num: Vec<f64>,
    den: Vec<f64>,
    #[serde(skip)]
    poles: Vec<Complex64>,
}

impl TryFrom<RawTransfer> for RationalTransfer {
    type Error = LtiError;
    fn try_from(r: RawTransfer) -> Result<Self, LtiError> {
        RationalTransfer::new(r.num, r.den)
    }
}

impl RationalTransfer {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, LtiError> {
        let den = trim(&den);
        let num = if num.is_empty() {
            vec![0.0]
        } else {
            trim(&num)
        };
        if den.iter().all(|&c| c == 0.0) {
            return Err(LtiError::ZeroDenominator);
        }
        let (nd, dd) = (degree(&num), den.len() - 1);
        if nd > dd {
            return Err(LtiError::Improper { num: nd, den: dd });
        }
        let poles = roots(&den).ok_or(LtiError::Eigen)?;
        Ok(RationalTransfer { num, den, poles })
    }

    pub fn constant(k: f64) -> Self {
        RationalTransfer {
            num: vec![k],
            den: vec![1.0],
            poles: Vec::new(),
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_strictly_proper(&self) -> bool {
        degree(&self.num) < self.order() || self.num.iter().all(|&c| c == 0.0)
    }

    pub fn eval(&self, s: Freq) -> Result<Complex64, LtiError> {
        match s {
            Freq::Infinity => {
                let n = self.order();
                Ok(Complex64::new(
                    self.num.get(n).copied().unwrap_or(0.0) / self.den[n],
                    0.0,
                ))
            }
            Freq::At(s) => {
                if self.poles.iter().any(|p| (s - p).norm() <= POLE_TOL) {
                    return Err(LtiError::PoleHit { s });
                }
                Ok(polyval(&self.num, s) / polyval(&self.den, s))
            }
        }
    }

    /// Controllable canonical realization.
    pub fn realize(&self) -> StateSpace {
        let n = self.order();
        let lead = self.den[n];
        let a: Vec<f64> = self.den.iter().map(|c| c / lead).collect();
        let b: Vec<f64> = (0..=n)
            .map(|i| self.num.get(i).copied().unwrap_or(0.0) / lead)
            .collect();
        let d = b[n];
        let mut am = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            am[(i, i + 1)] = 1.0;
        }
        for i in 0..n {
            am[(n - 1, i)] = -a[i];
        }
        let mut bm = DMatrix::zeros(n, 1);
        if n > 0 {
            bm[(n - 1, 0)] = 1.0;
        }
        let cm = DMatrix::from_fn(1, n, |_, i| b[i] - d * a[i]);
        StateSpace::new(am, bm, cm, DMatrix::from_element(1, 1, d))
            .expect("canonical form is consistent")
    }
}

fn degree(c: &[f64]) -> usize {
    c.iter().rposition(|&x| x != 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rl_line_values() {
        let tf = RationalTransfer::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(tf.eval(Freq::At(c(0.0, 0.0))).unwrap(), c(1.0, 0.0));
        assert!((tf.eval(Freq::jw(1.0)).unwrap() - c(0.5, -0.5)).norm() < 1e-15);
        assert_eq!(tf.eval(Freq::Infinity).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn biproper_limit_and_pole_hit() {
        let tf = RationalTransfer::new(vec![3.0, 2.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(tf.eval(Freq::Infinity).unwrap(), c(2.0, 0.0));
        assert!(matches!(
            tf.eval(Freq::At(c(0.0, 0.0))),
            Err(LtiError::PoleHit { .. })
        ));
    }

    #[test]
    fn improper_rejected() {
        assert!(matches!(
            RationalTransfer::new(vec![0.0, 0.0, 1.0], vec![1.0, 1.0]),
            Err(LtiError::Improper { num: 2, den: 1 })
        ));
    }

    #[test]
    fn realization_matches_rational() {
        let tf = RationalTransfer::new(vec![1.0, -2.0, 0.5], vec![3.0, 2.0, 4.0]).unwrap();
        let ss = tf.realize();
        for w in [0.0, 0.3, 2.0, 70.0] {
            let a = tf.eval(Freq::jw(w)).unwrap();
            let b = ss.eval(Freq::jw(w)).unwrap()[(0, 0)];
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }
}
