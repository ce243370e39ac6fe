use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::Serialize;

use super::OracleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourKind {
    ImaginaryAxis,
    Modified,
}

/// One piece of a contour, parametrized by t in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// s = j w, w from `w0` to `w1`. `log` spacing needs both of one sign.
    Axis { w0: f64, w1: f64, log: bool },
    /// s = radius * exp(j phi), phi from `phi0` to `phi1`.
    Arc { radius: f64, phi0: f64, phi1: f64 },
}

impl Segment {
    pub fn at(&self, t: f64) -> Complex64 {
        match *self {
            Segment::Axis { w0, w1, log } => {
                let w = if log {
                    let l = w0.abs().ln() + t * (w1.abs().ln() - w0.abs().ln());
                    w0.signum() * l.exp()
                } else {
                    w0 + t * (w1 - w0)
                };
                Complex64::new(0.0, w)
            }
            Segment::Arc { radius, phi0, phi1 } => {
                Complex64::from_polar(radius, phi0 + t * (phi1 - phi0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub s: Complex64,
    pub seg: usize,
    pub t: f64,
}

/// Closed contour around the right half-plane. It runs up the imaginary
/// axis and closes through the large arc, so the enclosed region lies to
/// the right of the direction of travel.
#[derive(Debug, Clone)]
pub struct NyquistContour {
    pub kind: ContourKind,
    pub r: f64,
    pub big_r: f64,
    pub segments: Vec<Segment>,
    pub samples: Vec<Sample>,
}

impl NyquistContour {
    fn build(
        kind: ContourKind,
        r: f64,
        big_r: f64,
        segments: Vec<Segment>,
        per_segment: usize,
    ) -> Self {
        let n = per_segment.max(2);
        let samples = segments
            .iter()
            .enumerate()
            .flat_map(|(i, seg)| {
                (0..n).map(move |q| {
                    let t = q as f64 / n as f64;
                    Sample {
                        s: seg.at(t),
                        seg: i,
                        t,
                    }
                })
            })
            .collect();
        NyquistContour {
            kind,
            r,
            big_r,
            segments,
            samples,
        }
    }

    /// The plain axis contour, with a linear stretch through the origin.
    pub fn imaginary_axis(r: f64, big_r: f64, per_segment: usize) -> Result<Self, OracleError> {
        check_radii(r, big_r)?;
        let segments = vec![
            Segment::Axis {
                w0: -big_r,
                w1: -r,
                log: true,
            },
            Segment::Axis {
                w0: -r,
                w1: r,
                log: false,
            },
            Segment::Axis {
                w0: r,
                w1: big_r,
                log: true,
            },
            Segment::Arc {
                radius: big_r,
                phi0: FRAC_PI_2,
                phi1: -FRAC_PI_2,
            },
        ];
        Ok(Self::build(
            ContourKind::ImaginaryAxis,
            r,
            big_r,
            segments,
            per_segment,
        ))
    }

    pub fn points(&self) -> Vec<Complex64> {
        let mut p: Vec<Complex64> = self.samples.iter().map(|s| s.s).collect();
        p.extend(self.segments.last().map(|s| s.at(1.0)));
        p
    }

    /// Largest gap between the end of one segment and the start of the next.
    pub fn closure_gap(&self) -> f64 {
        let n = self.segments.len();
        (0..n)
            .map(|i| (self.segments[i].at(1.0) - self.segments[(i + 1) % n].at(0.0)).norm())
            .fold(0.0, f64::max)
    }

    fn midpoint(&self, i: usize) -> Sample {
        let a = self.samples[i];
        let b = self.samples[(i + 1) % self.samples.len()];
        let t = if b.seg == a.seg && b.t > a.t {
            0.5 * (a.t + b.t)
        } else {
            0.5 * (a.t + 1.0)
        };
        Sample {
            s: self.segments[a.seg].at(t),
            seg: a.seg,
            t,
        }
    }

    /// Insert a midpoint after each listed sample index.
    pub fn refine(&mut self, after: &[usize]) {
        let mut out = Vec::with_capacity(self.samples.len() + after.len());
        let mut it = after.iter().peekable();
        for i in 0..self.samples.len() {
            out.push(self.samples[i]);
            while it.peek() == Some(&&i) {
                out.push(self.midpoint(i));
                it.next();
            }
        }
        self.samples = out;
    }
}

fn check_radii(r: f64, big_r: f64) -> Result<(), OracleError> {
    if !(r > 0.0 && big_r > r && big_r.is_finite()) {
        return Err(OracleError::BadRadii { r, big_r });
    }
    Ok(())
}

/// Axis segments from r to R on both sides, the large arc and a small
/// right-half-plane detour around the origin.
pub fn modified_contour(
    r: f64,
    big_r: f64,
    per_segment: usize,
) -> Result<NyquistContour, OracleError> {
    check_radii(r, big_r)?;
    let segments = vec![
        Segment::Axis {
            w0: -big_r,
            w1: -r,
            log: true,
        },
        Segment::Arc {
            radius: r,
            phi0: -FRAC_PI_2,
            phi1: FRAC_PI_2,
        },
        Segment::Axis {
            w0: r,
            w1: big_r,
            log: true,
        },
        Segment::Arc {
            radius: big_r,
            phi0: FRAC_PI_2,
            phi1: -FRAC_PI_2,
        },
    ];
    Ok(NyquistContour::build(
        ContourKind::Modified,
        r,
        big_r,
        segments,
        per_segment,
    ))
}

/// Phase jumps larger than this between neighbours count as under-sampling.
pub const MAX_STEP: f64 = FRAC_PI_2;
pub const MAX_REFINES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Winding {
    pub winding: i64,
    pub min_abs: f64,
    pub samples: usize,
}

/// Winding number of f about the origin along the contour. Intervals with
/// large phase steps are bisected, up to `MAX_REFINES` rounds.
pub fn winding_of<F>(contour: &NyquistContour, f: F) -> Result<Winding, OracleError>
where
    F: Fn(Complex64) -> Result<Complex64, OracleError>,
{
    let mut c = contour.clone();
    let mut vals: Vec<Complex64> = c.samples.iter().map(|s| f(s.s)).collect::<Result<_, _>>()?;
    for round in 0..=MAX_REFINES {
        let n = vals.len();
        let jumps: Vec<usize> = (0..n)
            .filter(|&i| {
                (vals[(i + 1) % n] / vals[i]).arg().abs() > MAX_STEP || vals[i].norm() == 0.0
            })
            .collect();
        if jumps.is_empty() {
            let total: f64 = (0..n).map(|i| (vals[(i + 1) % n] / vals[i]).arg()).sum();
            let min_abs = vals.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
            return Ok(Winding {
                winding: (total / std::f64::consts::TAU).round() as i64,
                min_abs,
                samples: n,
            });
        }
        if round == MAX_REFINES {
            return Err(OracleError::PhaseJump {
                at: c.samples[jumps[0]].s,
                rounds: MAX_REFINES,
            });
        }
        let old = c.samples.clone();
        c.refine(&jumps);
        // reuse old values, evaluate only the new points
        let mut next = Vec::with_capacity(c.samples.len());
        let mut k = 0;
        for s in &c.samples {
            if k < old.len() && old[k] == *s {
                next.push(vals[k]);
                k += 1;
            } else {
                next.push(f(s.s)?);
            }
        }
        vals = next;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modified_contour_is_closed_and_avoids_origin() {
        let c = modified_contour(1e-3, 1e6, 1000).unwrap();
        assert!(c.closure_gap() < 1e-12 * 1e6);
        let p = c.points();
        // relative to the outer radius
        assert!((p[0] - p[p.len() - 1]).norm() < 1e-12 * 1e6);
        let dmin = p.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        assert!(dmin >= 1e-3 * (1.0 - 1e-12));
        assert_eq!(c.samples.len(), 4000);
    }

    #[test]
    fn bad_radii() {
        assert!(matches!(
            modified_contour(1.0, 0.5, 10),
            Err(OracleError::BadRadii { .. })
        ));
        assert!(matches!(
            modified_contour(0.0, 2.0, 10),
            Err(OracleError::BadRadii { .. })
        ));
    }

    #[test]
    fn winding_of_a_shifted_identity() {
        // s - 1 has one zero inside
        let c = NyquistContour::imaginary_axis(1e-3, 1e3, 200).unwrap();
        let w = winding_of(&c, |s| Ok(s - 1.0)).unwrap();
        assert_eq!(w.winding.abs(), 1);
        let w = winding_of(&c, |s| Ok(s + 1.0)).unwrap();
        assert_eq!(w.winding, 0);
    }

    #[test]
    fn refinement_inserts_on_the_same_segment() {
        let mut c = NyquistContour::imaginary_axis(1e-2, 1e2, 4).unwrap();
        let last = c.samples.len() - 1;
        c.refine(&[0, last]);
        assert_eq!(c.samples.len(), 18);
        assert_eq!(c.samples[1].seg, 0);
        assert!((c.samples[1].t - 0.125).abs() < 1e-15);
        assert!((c.samples[17].t - 0.875).abs() < 1e-15);
    }
}
