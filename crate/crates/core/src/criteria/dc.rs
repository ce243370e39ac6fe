use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DcOutcome {
    pub holds: bool,
    /// 2 Re B(0) - eps |B(0)|^2
    pub margin: f64,
}

/// Zero-frequency test for lines with a pole at the origin: B_j(0) must be
/// strictly positive, which is what 2 Re B >= eps |B|^2 for some eps > 0 means.
pub fn dc_condition(b0: Complex64, eps: f64) -> DcOutcome {
    let margin = 2.0 * b0.re - eps * b0.norm_sqr();
    DcOutcome {
        holds: b0.re > 0.0 && margin >= 0.0,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{Freq, RationalTransfer};

    fn first_order(k1: f64) -> Complex64 {
        RationalTransfer::new(vec![k1], vec![1.0, 1.0])
            .unwrap()
            .eval(Freq::jw(0.0))
            .unwrap()
    }

    #[test]
    fn remark_cases() {
        assert!(dc_condition(first_order(2.0), 1e-6).holds);
        assert!(!dc_condition(first_order(-1.0), 1e-6).holds);
        assert!(!dc_condition(Complex64::new(0.0, 0.0), 1e-6).holds);
    }
}
