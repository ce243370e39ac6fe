use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Freq, LtiError, RationalTransfer, StateSpace};
use crate::linalg::polymul;

/// User-facing line description, as it appears in network files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LineParams {
    /// Series resistance (ohm) and inductance (henry).
    Rl { r: f64, l: f64 },
    /// Generic strictly positive real admittance.
    Spr { num: Vec<f64>, den: Vec<f64> },
    /// Admittance h(s)/s; `num`/`den` describe h.
    PoleAtOrigin { num: Vec<f64>, den: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineKind {
    Rl,
    Spr,
    PoleAtOrigin,
}

#[derive(Debug, Clone)]
pub struct LineModel {
    pub kind: LineKind,
    pub params: LineParams,
    /// Admittance from voltage difference to line current.
    pub tf: RationalTransfer,
    /// The h factor for pole-at-origin lines.
    pub h: Option<RationalTransfer>,
}

impl LineModel {
    pub fn eval(&self, s: Freq) -> Result<Complex64, LtiError> {
        self.tf.eval(s)
    }

    pub fn in_rh_inf(&self) -> bool {
        self.kind != LineKind::PoleAtOrigin
    }

    pub fn realize(&self) -> StateSpace {
        self.tf.realize()
    }
}

// Log grid used to screen positive realness.
fn screen_grid() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((0..=2800).map(|i| 10f64.powf(-6.0 + 14.0 * i as f64 / 2800.0)))
}

fn lhp_only(tf: &RationalTransfer, what: &str) -> Result<(), LtiError> {
    if let Some(p) = tf.poles().iter().find(|p| p.re >= -1e-12) {
        return Err(LtiError::BadLineParams(format!(
            "{what} has a pole at {p} in the closed right half-plane"
        )));
    }
    Ok(())
}

/// Coefficients (in x = w^2) of Re[n(jw) d(-jw)], which has the sign of
/// Re tf(jw) and avoids the cancellation of evaluating it directly.
fn real_part_numerator(tf: &RationalTransfer) -> Vec<f64> {
    let dneg: Vec<f64> = tf
        .den()
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 2 == 1 { -c } else { c })
        .collect();
    let prod = polymul(tf.num(), &dneg);
    prod.iter()
        .step_by(2)
        .enumerate()
        .map(|(q, &c)| if q % 2 == 1 { -c } else { c })
        .collect()
}

fn polyval_real(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

pub fn build_line(params: &LineParams) -> Result<LineModel, LtiError> {
    match params {
        LineParams::Rl { r, l } => {
            if !(r.is_finite() && *r > 0.0) {
                return Err(LtiError::BadLineParams(format!("r = {r} must be positive")));
            }
            if !(l.is_finite() && *l > 0.0) {
                return Err(LtiError::BadLineParams(format!("l = {l} must be positive")));
            }
            Ok(LineModel {
                kind: LineKind::Rl,
                params: params.clone(),
                tf: RationalTransfer::new(vec![1.0], vec![*r, *l])?,
                h: None,
            })
        }
        LineParams::Spr { num, den } => {
            let tf = RationalTransfer::new(num.clone(), den.clone())?;
            lhp_only(&tf, "line")?;
            let even = real_part_numerator(&tf);
            for w in screen_grid() {
                let re = polyval_real(&even, w * w);
                if !(re > 0.0) {
                    return Err(LtiError::NotSPR {
                        omega: w,
                        re: tf.eval(Freq::jw(w))?.re,
                    });
                }
            }
            Ok(LineModel {
                kind: LineKind::Spr,
                params: params.clone(),
                tf,
                h: None,
            })
        }
        LineParams::PoleAtOrigin { num, den } => {
            let h = RationalTransfer::new(num.clone(), den.clone())?;
            lhp_only(&h, "h")?;
            let h0 = h.eval(Freq::jw(0.0))?.re;
            if !(h0 > 0.0) {
                return Err(LtiError::BadLineParams(format!(
                    "h(0) = {h0} must be positive"
                )));
            }
            let mut tden = vec![0.0];
            tden.extend_from_slice(h.den());
            let tf = RationalTransfer::new(h.num().to_vec(), tden)?;
            for w in screen_grid().skip(1) {
                let v = tf.eval(Freq::jw(w))?;
                if v.re < -1e-10 * v.norm() {
                    return Err(LtiError::NotSPR { omega: w, re: v.re });
                }
            }
            Ok(LineModel {
                kind: LineKind::PoleAtOrigin,
                params: params.clone(),
                tf,
                h: Some(h),
            })
        }
    }
}
