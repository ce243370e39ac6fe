//! Averaged buck converter with a cascaded voltage/current PI controller,
//! droop on the network current and a ZIP load.
//!
//! State order: filter inductor current i, capacitor voltage v, voltage-loop
//! integrator x1, current-loop integrator x2. Input: current i_B injected by
//! the network. Output: v.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{LtiError, StateSpace};

/// Constant-impedance part of the load; `Absent` means an open circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadImpedance {
    Absent,
    Ohms(f64),
}

impl LoadImpedance {
    pub fn conductance(self) -> f64 {
        match self {
            LoadImpedance::Absent => 0.0,
            LoadImpedance::Ohms(z) => 1.0 / z,
        }
    }
}

impl Serialize for LoadImpedance {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            LoadImpedance::Absent => ser.serialize_str("absent"),
            LoadImpedance::Ohms(z) => ser.serialize_f64(*z),
        }
    }
}

impl<'de> Deserialize<'de> for LoadImpedance {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(z) => Ok(LoadImpedance::Ohms(z)),
            Raw::Str(s) if s == "absent" => Ok(LoadImpedance::Absent),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"absent\", got {s:?}"
            ))),
        }
    }
}

fn absent() -> LoadImpedance {
    LoadImpedance::Absent
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    #[serde(rename = "R_f")]
    pub r_f: f64,
    #[serde(rename = "L_f")]
    pub l_f: f64,
    #[serde(rename = "C_f")]
    pub c_f: f64,
    #[serde(rename = "K_Pv")]
    pub k_pv: f64,
    #[serde(rename = "K_Iv")]
    pub k_iv: f64,
    #[serde(rename = "K_Pi")]
    pub k_pi: f64,
    #[serde(rename = "K_Ii")]
    pub k_ii: f64,
    #[serde(rename = "R_droop")]
    pub r_droop: f64,
    pub v_nom: f64,
    #[serde(default)]
    pub i_bar: f64,
    #[serde(rename = "Z_load", default = "absent")]
    pub z_load: LoadImpedance,
    #[serde(rename = "P_load", default)]
    pub p_load: f64,
}

impl BusSpec {
    /// First violated range constraint, by JSON field name.
    pub fn validate(&self) -> Result<(), LtiError> {
        let nonneg = [
            ("R_f", self.r_f),
            ("K_Pv", self.k_pv),
            ("K_Pi", self.k_pi),
            ("R_droop", self.r_droop),
            ("i_bar", self.i_bar),
            ("P_load", self.p_load),
        ];
        let pos = [
            ("L_f", self.l_f),
            ("C_f", self.c_f),
            ("K_Iv", self.k_iv),
            ("K_Ii", self.k_ii),
            ("v_nom", self.v_nom),
        ];
        for (name, value) in nonneg {
            if !(value.is_finite() && value >= 0.0) {
                return Err(LtiError::BadBusParams { name, value });
            }
        }
        for (name, value) in pos {
            if !(value.is_finite() && value > 0.0) {
                return Err(LtiError::BadBusParams { name, value });
            }
        }
        if let LoadImpedance::Ohms(z) = self.z_load {
            if !(z.is_finite() && z > 0.0) {
                return Err(LtiError::BadBusParams {
                    name: "Z_load",
                    value: z,
                });
            }
        }
        Ok(())
    }

    /// ZIP load current at voltage v.
    pub fn load_current(&self, v: f64) -> f64 {
        self.i_bar + v * self.z_load.conductance() + self.p_load / v
    }

    /// Vector field of the nonlinear bus.
    pub fn field(&self, x: &[f64; 4], i_b: f64) -> [f64; 4] {
        let [i, v, x1, x2] = *x;
        let e_v = self.v_nom + self.r_droop * i_b - v;
        let i_ref = self.k_pv * e_v + self.k_iv * x1;
        let u = self.k_pi * (i_ref - i) + self.k_ii * x2;
        [
            (u - v - self.r_f * i) / self.l_f,
            (i - self.load_current(v) + i_b) / self.c_f,
            e_v,
            i_ref - i,
        ]
    }

    /// Jacobian of [`BusSpec::field`] with respect to the state and the input.
    pub fn jacobian(&self, v: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (l, c) = (self.l_f, self.c_f);
        let (kpv, kiv, kpi, kii, rd) = (self.k_pv, self.k_iv, self.k_pi, self.k_ii, self.r_droop);
        let g = zip_slope(self, v);
        #[rustfmt::skip]
        let a = DMatrix::from_row_slice(4, 4, &[
            -(self.r_f + kpi) / l, -(1.0 + kpi * kpv) / l, kpi * kiv / l, kii / l,
            1.0 / c,               -g / c,                 0.0,           0.0,
            0.0,                   -1.0,                   0.0,           0.0,
            -1.0,                  -kpv,                   kiv,           0.0,
        ]);
        let b = DMatrix::from_column_slice(4, 1, &[kpi * kpv * rd / l, 1.0 / c, rd, kpv * rd]);
        (a, b)
    }

    /// Steady state for a given bus voltage and network current.
    pub fn steady_state(&self, v: f64, i_b: f64) -> [f64; 4] {
        let i = self.load_current(v) - i_b;
        [i, v, i / self.k_iv, (v + self.r_f * i) / self.k_ii]
    }
}

/// Small-signal conductance of the ZIP load, 1/Z - P/v^2.
pub fn zip_slope(spec: &BusSpec, v: f64) -> f64 {
    spec.z_load.conductance() - spec.p_load / (v * v)
}

/// Realization of the bus from injected current to voltage deviation.
pub fn linearize_bus(spec: &BusSpec, eq_voltage: f64) -> Result<StateSpace, LtiError> {
    if !(eq_voltage > 0.0) {
        return Err(LtiError::NonPositiveVoltage(eq_voltage));
    }
    let (a, b) = spec.jacobian(eq_voltage);
    let c = DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 0.0, 0.0]);
    StateSpace::new(a, b, c, DMatrix::zeros(1, 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub pass: bool,
    pub offending: Vec<Complex64>,
}

/// Passes iff every eigenvalue of A has real part below -1e-9.
pub fn check_bus_assumption(bus: &StateSpace) -> AssumptionCheck {
    let offending: Vec<Complex64> = bus
        .poles()
        .iter()
        .copied()
        .filter(|p| p.re >= -1e-9)
        .collect();
    AssumptionCheck {
        pass: offending.is_empty(),
        offending,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::Freq;

    pub(crate) fn sample_bus() -> BusSpec {
        BusSpec {
            r_f: 0.1,
            l_f: 1.8e-3,
            c_f: 2.2e-3,
            k_pv: 0.5,
            k_iv: 20.0,
            k_pi: 5.0,
            k_ii: 200.0,
            r_droop: 0.05,
            v_nom: 48.0,
            i_bar: 0.0,
            z_load: LoadImpedance::Ohms(10.0),
            p_load: 0.0,
        }
    }

    // Closed form obtained by eliminating the loops by hand:
    // B = (Z + Ci Cv Rd) / ((C s + g) Z + Ci Cv + 1), Z = L s + R + Ci.
    fn closed_form(b: &BusSpec, g: f64, s: Complex64) -> Complex64 {
        let ci = b.k_pi + b.k_ii / s;
        let cv = b.k_pv + b.k_iv / s;
        let z = b.l_f * s + b.r_f + ci;
        (z + ci * cv * b.r_droop) / ((b.c_f * s + g) * z + ci * cv + 1.0)
    }

    #[test]
    fn matches_closed_form() {
        let mut b = sample_bus();
        b.z_load = LoadImpedance::Absent;
        let ss = linearize_bus(&b, 48.0).unwrap();
        for k in 0..20 {
            let w = 10f64.powf(-1.0 + 0.3 * k as f64);
            let s = Complex64::new(0.0, w);
            let want = closed_form(&b, 0.0, s);
            let got = ss.eval_siso(Freq::At(s)).unwrap();
            assert!(
                (got - want).norm() <= 1e-10 * want.norm(),
                "w={w} got {got} want {want}"
            );
        }
    }

    #[test]
    fn dc_gain_is_droop() {
        let b = sample_bus();
        let ss = linearize_bus(&b, 48.0).unwrap();
        let v = ss.eval_siso(Freq::jw(0.0)).unwrap();
        assert!((v.re - b.r_droop).abs() < 1e-12 && v.im.abs() < 1e-12);
    }

    #[test]
    fn zip_slope_cancels_at_boundary() {
        let mut b = sample_bus();
        b.p_load = 48.0 * 48.0 / 10.0;
        assert_eq!(zip_slope(&b, 48.0), 0.0);
    }

    #[test]
    fn nonpositive_voltage() {
        assert!(matches!(
            linearize_bus(&sample_bus(), 0.0),
            Err(LtiError::NonPositiveVoltage(_))
        ));
    }

    #[test]
    fn steady_state_zeroes_field() {
        let mut b = sample_bus();
        b.p_load = 300.0;
        b.i_bar = 1.0;
        let x = b.steady_state(47.3, 0.4);
        let mut b2 = b.clone();
        b2.v_nom = 47.3 - b.r_droop * 0.4;
        let f = b2.field(&x, 0.4);
        assert!(f.iter().all(|d| d.abs() < 1e-9), "{f:?}");
    }

    #[test]
    fn assumption_check() {
        let ok = StateSpace::new(
            -DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!(check_bus_assumption(&ok).pass);
        let bad = StateSpace::new(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.1])),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let r = check_bus_assumption(&bad);
        assert!(!r.pass);
        assert_eq!(r.offending.len(), 1);
        assert!((r.offending[0].re - 0.1).abs() < 1e-12);
    }

    #[test]
    fn strong_cpl_breaks_assumption() {
        let mut b = sample_bus();
        b.p_load = 4000.0;
        let ss = linearize_bus(&b, 48.0).unwrap();
        assert!(!check_bus_assumption(&ss).pass);
    }
}
