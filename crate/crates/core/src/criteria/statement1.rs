//! Bus-side test: weighted mix of passivity and a J-scaled small-gain bound.

use num_complex::Complex64;
use serde::Serialize;

use super::{Branch, CriteriaError};
use crate::netgraph::IncidenceMatrix;

/// |sum of L_k| + sum of |L_k| over the lines touching bus `j`.
pub fn j_weight(
    j: usize,
    lines: &[Complex64],
    inc: &IncidenceMatrix,
) -> Result<f64, CriteriaError> {
    let e = inc.neighbors(j);
    if e.is_empty() {
        return Err(CriteriaError::IsolatedBus(j + 1));
    }
    let sum: Complex64 = e.iter().map(|&k| lines[k]).sum();
    Ok(sum.norm() + e.iter().map(|&k| lines[k].norm()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum S1Branch {
    Passivity,
    SmallGain,
    Conic,
}

/// Normalized passivity and small-gain values of one bus. Both are divided
/// by the same positive constant, so any mix of the two keeps its sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct S1Terms {
    pub passivity: f64,
    pub small_gain: f64,
}

impl S1Terms {
    pub fn new(b: Complex64, jw: f64, eps: f64) -> Self {
        let m2 = b.norm_sqr();
        if jw == 0.0 {
            // limit of the normalized terms as the weight vanishes
            return S1Terms {
                passivity: 0.0,
                small_gain: 1.0,
            };
        }
        let p = 2.0 * b.re - eps * m2;
        let sg = 1.0 / jw - jw * m2 - eps * m2;
        let c = 2.0 * b.norm() + 1.0 / jw + jw * m2 + eps * m2;
        S1Terms {
            passivity: p / c,
            small_gain: sg / c,
        }
    }

    /// Value of the mix (1 - theta) * passivity + theta * small_gain.
    pub fn mix(&self, theta: f64) -> f64 {
        (1.0 - theta) * self.passivity + theta * self.small_gain
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct S1Bus {
    pub passivity: Branch,
    pub small_gain: Branch,
    /// Best mix for this bus alone.
    pub holds: bool,
    pub branch: S1Branch,
    pub margin: f64,
}

/// Single-bus test: a nonnegative mix of the two terms exists, which for a
/// scalar reduces to either term being nonnegative.
pub fn statement1_bus(b: Complex64, jw: f64, eps: f64) -> S1Bus {
    let t = S1Terms::new(b, jw, eps);
    let passivity = Branch::new(t.passivity);
    let small_gain = Branch::new(t.small_gain);
    let (branch, margin) = if t.passivity >= t.small_gain {
        (S1Branch::Passivity, t.passivity)
    } else {
        (S1Branch::SmallGain, t.small_gain)
    };
    S1Bus {
        passivity,
        small_gain,
        holds: margin >= 0.0,
        branch,
        margin,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S1Network {
    pub holds: bool,
    /// Shared weight on the small-gain term.
    pub theta: f64,
    /// min over buses of the mixed term at `theta`.
    pub margin: f64,
    pub per_bus: Vec<S1Bus>,
    /// Whether each bus meets its constraint at the shared `theta`.
    pub at_theta: Vec<bool>,
}

/// Network test with one weight shared by all buses: maximize over theta in
/// [0, 1] the smallest mixed term.
pub fn statement1_network(bus: &[Complex64], jw: &[f64], eps: f64) -> S1Network {
    let terms: Vec<S1Terms> = bus
        .iter()
        .zip(jw)
        .map(|(&b, &j)| S1Terms::new(b, j, eps))
        .collect();
    let per_bus = bus
        .iter()
        .zip(jw)
        .map(|(&b, &j)| statement1_bus(b, j, eps))
        .collect();
    let worst = |theta: f64| {
        terms
            .iter()
            .map(|t| t.mix(theta))
            .fold(f64::INFINITY, f64::min)
    };
    // the optimum of a min of affine functions sits at an end or at a crossing
    let mut cands = vec![0.0, 1.0];
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            let (da, db) = (a.small_gain - a.passivity, b.small_gain - b.passivity);
            if da != db {
                let th = (b.passivity - a.passivity) / (da - db);
                if (0.0..=1.0).contains(&th) {
                    cands.push(th);
                }
            }
        }
    }
    let mut theta = 0.0;
    let mut margin = f64::NEG_INFINITY;
    for &c in &cands {
        let m = worst(c);
        if m > margin {
            margin = m;
            theta = c;
        }
    }
    let at_theta = terms.iter().map(|t| t.mix(theta) >= 0.0).collect();
    S1Network {
        holds: margin >= 0.0,
        theta,
        margin,
        per_bus,
        at_theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{build_incidence, NetworkGraph};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn weight_examples() {
        let g = NetworkGraph::from_one_based(2, &[(1, 2)]).unwrap();
        let inc = build_incidence(&g);
        assert!((j_weight(0, &[c(0.7, 0.0)], &inc).unwrap() - 1.4).abs() < 1e-15);
        let g = NetworkGraph::from_one_based(3, &[(1, 2), (1, 3)]).unwrap();
        let inc = build_incidence(&g);
        assert!((j_weight(0, &[c(0.7, 0.0), c(0.7, 0.0)], &inc).unwrap() - 2.8).abs() < 1e-15);
        // two r = l = 1 lines at w = 1
        let l = c(0.5, -0.5);
        let want = 2.0 * 2f64.sqrt();
        assert!((j_weight(0, &[l, l], &inc).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn isolated_bus() {
        let g = NetworkGraph::from_one_based(1, &[]).unwrap();
        let inc = build_incidence(&g);
        assert!(matches!(
            j_weight(0, &[], &inc),
            Err(CriteriaError::IsolatedBus(1))
        ));
    }

    #[test]
    fn bus_examples() {
        let r = statement1_bus(c(0.5, 0.0), 10.0, 1e-6);
        assert!(r.holds && r.branch == S1Branch::Passivity);
        let r = statement1_bus(c(-0.1, 0.2), 2.0, 1e-6);
        assert!(r.holds && r.branch == S1Branch::SmallGain && !r.passivity.holds);
        let r = statement1_bus(c(-1.0, 0.0), 2.0, 1e-6);
        assert!(!r.holds && !r.passivity.holds && !r.small_gain.holds);
    }

    #[test]
    fn shared_weight_needs_a_common_theta() {
        // one bus needs pure passivity, the other pure small gain
        let r = statement1_network(&[c(1.0, 0.0), c(-0.2, 0.0)], &[10.0, 1.0], 0.0);
        assert!(r.per_bus[0].holds && r.per_bus[1].holds);
        assert!(!r.holds);
    }
}
