//! Frequency sweep: base log grid, bisection of every branch switch, a
//! golden-section probe of every shallow margin dip and a continuity cover
//! of the certified stretches.

use num_complex::Complex64;
use serde::Serialize;

use super::dc::{dc_condition, DcOutcome};
use super::statement1::{j_weight, statement1_network, S1Branch, S1Network};
use super::statement2::{statement2_network, Block, S2Branch, S2Network, SearchConfig};
use super::CriteriaError;
use crate::lti::{check_bus_assumption, Omega};
use crate::network::{LinearModels, Mode, NetworkSpec};

/// Margins below this are probed for a hidden sign change between samples.
const DIP_LEVEL: f64 = 0.05;
const MAX_ROUNDS: usize = 8;
/// Assumed ratio between the true local slope of the margin and the
/// largest secant slope seen around an interval.
const SLOPE_SAFETY: f64 = 2.0;
/// Narrowest interval, in ln(omega), the cover bisects.
const MIN_LOG_WIDTH: f64 = 1e-12;
/// Evaluation budget of the cover per sweep.
const COVER_BUDGET: usize = 50_000;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CertifyConfig {
    pub wmin: f64,
    pub wmax: f64,
    pub per_decade: usize,
    pub eps: f64,
    /// Relative width to which branch boundaries are bisected.
    pub refine_rel: f64,
    /// Evaluate the bus-plus-lines test everywhere, not only where needed.
    pub diagnostics: bool,
    #[serde(skip)]
    pub search: SearchConfig,
    /// Worker threads for the base grid; 0 picks the available parallelism.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            wmin: 1e-2,
            wmax: 1e7,
            per_decade: 240,
            eps: 1e-6,
            refine_rel: 1e-3,
            diagnostics: false,
            search: SearchConfig::default(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Certified,
    Undecided,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusVerdict {
    pub s1_passivity: bool,
    pub s1_smallgain: bool,
    /// Meets its constraint at the shared weight.
    pub s1: bool,
    pub s1_branch: S1Branch,
    pub s1_margin: f64,
    pub s2_passivity: Option<bool>,
    pub s2_smallgain: Option<bool>,
    pub s2_multiplier: Option<bool>,
    pub s2: Option<bool>,
    pub dc: Option<DcOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyVerdict {
    pub omega: Omega,
    pub buses: Vec<BusVerdict>,
    pub statement1_all: bool,
    /// `None` where the second test was not needed.
    pub statement2_all: Option<bool>,
    pub combined: bool,
    pub theta: Option<f64>,
    pub s1_margin: Option<f64>,
    pub s2_margin: Option<f64>,
    pub s2_branch: Option<S2Branch>,
    pub s2_delta2: Option<f64>,
    pub multipliers: Option<Vec<super::LineMultiplier>>,
    /// Every bus passes one of the two tests on its own. Diagnostic only.
    pub mixed: bool,
}

impl FrequencyVerdict {
    /// Margin used to look for dips: the best available certificate margin.
    fn margin(&self) -> Option<f64> {
        match (self.s1_margin, self.s2_margin) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (Some(a), None) => Some(a),
            _ => None,
        }
    }

    /// Margin used by the cover, clipped where the multiplier search may stop early.
    fn cover_margin(&self) -> Option<f64> {
        if !self.combined {
            return None;
        }
        self.margin().map(|m| m.min(DIP_LEVEL))
    }

    fn signature(&self) -> Vec<bool> {
        let mut s = vec![self.combined, self.statement1_all];
        for b in &self.buses {
            s.extend([b.s1_passivity, b.s1_smallgain, b.s1]);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandKind {
    /// The combined test fails at the sampled points.
    Failed,
    /// Both ends pass, but their margins are too small to rule out a
    /// sign change in between.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FailingBand {
    pub lo: Omega,
    pub hi: Omega,
    pub kind: BandKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub verdict: Verdict,
    pub mode: Mode,
    pub points: Vec<FrequencyVerdict>,
    pub failing_bands: Vec<FailingBand>,
    pub base_points: usize,
    pub refined_points: usize,
}

impl Certification {
    /// Points where the combined test holds count as certified, others not.
    pub fn undecided_points(&self) -> impl Iterator<Item = &FrequencyVerdict> {
        self.points.iter().filter(|p| !p.combined)
    }
}

/// Checks that must pass before any frequency is looked at.
pub fn preconditions(spec: &NetworkSpec) -> Result<LinearModels, CriteriaError> {
    let bad = spec.mode_violations();
    if !bad.is_empty() {
        return Err(CriteriaError::ModeMismatch {
            mode: spec.mode,
            lines: bad,
        });
    }
    for j in 0..spec.n_buses() {
        if spec.incidence().neighbors(j).is_empty() {
            return Err(CriteriaError::IsolatedBus(j + 1));
        }
    }
    let models = spec.linearize()?;
    for (j, b) in models.buses.iter().enumerate() {
        let chk = check_bus_assumption(b);
        if !chk.pass {
            return Err(CriteriaError::AssumptionViolated {
                bus: j + 1,
                eigenvalues: chk.offending,
            });
        }
    }
    Ok(models)
}

/// Evaluate both tests at one frequency.
pub fn evaluate_point(
    spec: &NetworkSpec,
    models: &LinearModels,
    omega: Omega,
    cfg: &CertifyConfig,
) -> Result<FrequencyVerdict, CriteriaError> {
    let s = omega.freq();
    let inc = spec.incidence();
    let bus: Vec<Complex64> = models
        .buses
        .iter()
        .map(|b| b.eval_siso(s))
        .collect::<Result<_, _>>()?;
    if spec.mode == Mode::Theorem2 && omega.is_zero() {
        let dc: Vec<DcOutcome> = bus.iter().map(|&b| dc_condition(b, cfg.eps)).collect();
        let all = dc.iter().all(|d| d.holds);
        let buses = dc
            .iter()
            .map(|d| BusVerdict {
                s1_passivity: d.holds,
                s1_smallgain: false,
                s1: d.holds,
                s1_branch: S1Branch::Passivity,
                s1_margin: d.margin,
                s2_passivity: None,
                s2_smallgain: None,
                s2_multiplier: None,
                s2: None,
                dc: Some(*d),
            })
            .collect();
        return Ok(FrequencyVerdict {
            omega,
            buses,
            statement1_all: all,
            statement2_all: None,
            combined: all,
            theta: None,
            s1_margin: None,
            s2_margin: None,
            s2_branch: None,
            s2_delta2: None,
            multipliers: None,
            mixed: all,
        });
    }
    let lines: Vec<Complex64> = spec
        .lines
        .iter()
        .map(|l| l.eval(s))
        .collect::<Result<_, _>>()?;
    let jw: Vec<f64> = (0..spec.n_buses())
        .map(|j| j_weight(j, &lines, inc))
        .collect::<Result<_, _>>()?;
    let s1: S1Network = statement1_network(&bus, &jw, cfg.eps);
    let s2: Option<S2Network> = if !s1.holds || cfg.diagnostics {
        let blocks: Vec<Block> = (0..spec.n_buses())
            .map(|j| Block::new(j, &lines, inc, bus[j]))
            .collect();
        Some(statement2_network(
            &blocks,
            spec.n_edges(),
            cfg.eps,
            &cfg.search,
        ))
    } else {
        None
    };
    let buses = (0..spec.n_buses())
        .map(|j| {
            let pb = &s1.per_bus[j];
            let p2 = s2.as_ref().map(|s| &s.per_bus[j]);
            BusVerdict {
                s1_passivity: pb.passivity.holds,
                s1_smallgain: pb.small_gain.holds,
                s1: s1.at_theta[j],
                s1_branch: pb.branch,
                s1_margin: pb.margin,
                s2_passivity: p2.map(|b| b.passivity.holds),
                s2_smallgain: p2.map(|b| b.small_gain.holds),
                s2_multiplier: p2.map(|b| b.multiplier.holds),
                s2: s2.as_ref().map(|s| s.at_certificate[j]),
                dc: None,
            }
        })
        .collect::<Vec<_>>();
    let s2_all = s2.as_ref().map(|s| s.holds);
    let mixed = (0..spec.n_buses()).all(|j| {
        s1.per_bus[j].holds
            || s2.as_ref().is_some_and(|s| {
                let b = &s.per_bus[j];
                b.passivity.holds || b.small_gain.holds || b.multiplier.holds
            })
    });
    let combined = s1.holds || s2_all == Some(true);
    Ok(FrequencyVerdict {
        omega,
        buses,
        statement1_all: s1.holds,
        statement2_all: s2_all,
        combined,
        theta: Some(s1.theta),
        s1_margin: Some(s1.margin),
        s2_margin: s2.as_ref().map(|s| s.margin),
        s2_branch: s2.as_ref().and_then(|s| s.branch),
        s2_delta2: s2.as_ref().map(|s| s.delta2),
        multipliers: s2.map(|s| s.multipliers),
        mixed,
    })
}

fn base_grid(cfg: &CertifyConfig) -> Vec<f64> {
    let (lo, hi) = (cfg.wmin.log10(), cfg.wmax.log10());
    let n = ((hi - lo) * cfg.per_decade as f64).round().max(1.0) as usize;
    (0..=n)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / n as f64))
        .collect()
}

fn parallel_eval(
    spec: &NetworkSpec,
    models: &LinearModels,
    ws: &[f64],
    cfg: &CertifyConfig,
) -> Result<Vec<FrequencyVerdict>, CriteriaError> {
    let threads = if cfg.threads == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        cfg.threads
    }
    .min(ws.len().max(1));
    let chunk = ws.len().div_ceil(threads.max(1)).max(1);
    let results: Vec<Result<Vec<FrequencyVerdict>, CriteriaError>> = std::thread::scope(|sc| {
        let handles: Vec<_> = ws
            .chunks(chunk)
            .map(|part| {
                sc.spawn(move || {
                    part.iter()
                        .map(|&w| evaluate_point(spec, models, Omega::Finite(w), cfg))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(ws.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

struct Sweep<'a> {
    spec: &'a NetworkSpec,
    models: &'a LinearModels,
    cfg: &'a CertifyConfig,
    /// Finite positive frequencies, sorted.
    pts: Vec<FrequencyVerdict>,
}

impl Sweep<'_> {
    fn eval(&self, w: f64) -> Result<FrequencyVerdict, CriteriaError> {
        evaluate_point(self.spec, self.models, Omega::Finite(w), self.cfg)
    }

    fn insert(&mut self, v: FrequencyVerdict) {
        let w = v.omega.value();
        let pos = self.pts.partition_point(|p| p.omega.value() < w);
        if self.pts.get(pos).is_some_and(|p| p.omega.value() == w) {
            return;
        }
        self.pts.insert(pos, v);
    }

    /// Bisect every adjacent pair whose flags differ. Returns points added.
    fn refine_switches(&mut self) -> Result<usize, CriteriaError> {
        let rel = self.cfg.refine_rel;
        let mut work: Vec<(f64, Vec<bool>, f64, Vec<bool>)> = self
            .pts
            .windows(2)
            .filter(|p| p[0].signature() != p[1].signature())
            .map(|p| {
                (
                    p[0].omega.value(),
                    p[0].signature(),
                    p[1].omega.value(),
                    p[1].signature(),
                )
            })
            .collect();
        let mut added = 0;
        while let Some((a, sa, b, sb)) = work.pop() {
            if b / a - 1.0 <= rel {
                continue;
            }
            let m = (a * b).sqrt();
            let v = self.eval(m)?;
            let sm = v.signature();
            self.insert(v);
            added += 1;
            if sm != sa {
                work.push((a, sa.clone(), m, sm.clone()));
            }
            if sm != sb {
                work.push((m, sm, b, sb));
            }
        }
        Ok(added)
    }

    /// Golden-section search for the minimum margin around each shallow
    /// local minimum that is still nonnegative.
    fn probe_dips(&mut self) -> Result<usize, CriteriaError> {
        let mut brackets = Vec::new();
        for i in 1..self.pts.len().saturating_sub(1) {
            let (l, c, r) = (&self.pts[i - 1], &self.pts[i], &self.pts[i + 1]);
            let (Some(ml), Some(mc), Some(mr)) = (l.margin(), c.margin(), r.margin()) else {
                continue;
            };
            if c.combined && mc < DIP_LEVEL && mc <= ml && mc <= mr && (mc < ml || mc < mr) {
                brackets.push((
                    l.omega.value().ln(),
                    c.omega.value().ln(),
                    r.omega.value().ln(),
                    mc,
                ));
            }
        }
        let mut added = 0;
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for (mut a, mut x, mut b, mut fx) in brackets {
            for _ in 0..40 {
                if (b - a) < 1e-5 {
                    break;
                }
                // probe the larger side
                let y = if b - x > x - a {
                    x + (1.0 - g) * (b - x)
                } else {
                    x - (1.0 - g) * (x - a)
                };
                let v = self.eval(y.exp())?;
                let fy = v.margin().unwrap_or(f64::NEG_INFINITY);
                let failed = !v.combined;
                self.insert(v);
                added += 1;
                if failed {
                    break;
                }
                if fy < fx {
                    if y > x {
                        a = x;
                    } else {
                        b = x;
                    }
                    x = y;
                    fx = fy;
                } else if y > x {
                    b = y;
                } else {
                    a = y;
                }
            }
        }
        Ok(added)
    }
}

impl Sweep<'_> {
    /// Make sure the margin cannot change sign between adjacent certified
    /// samples. Each pair must satisfy m_a + m_b >= k * ln(b / a), with k a
    /// safety multiple of the steepest secant slope next to the pair; pairs
    /// that do not are bisected. Pairs still open at the minimum width are
    /// returned.
    fn cover(&mut self, spent: &mut usize) -> Result<(usize, Vec<(f64, f64)>), CriteriaError> {
        let full = CertifyConfig {
            diagnostics: true,
            ..*self.cfg
        };
        let mut added = 0;
        loop {
            let n = self.pts.len();
            let lw: Vec<f64> = self.pts.iter().map(|p| p.omega.value().ln()).collect();
            let m: Vec<Option<f64>> = self.pts.iter().map(|p| p.cover_margin()).collect();
            let slope =
                |i: usize| -> Option<f64> { Some((m[i + 1]? - m[i]?).abs() / (lw[i + 1] - lw[i])) };
            let mut open = Vec::new();
            let mut todo: Vec<(usize, Option<f64>)> = Vec::new();
            for i in 0..n.saturating_sub(1) {
                let (Some(ma), Some(mb)) = (m[i], m[i + 1]) else {
                    continue;
                };
                let k = [
                    i.checked_sub(1),
                    Some(i),
                    Some(i + 1).filter(|&j| j + 1 < n),
                ]
                .into_iter()
                .flatten()
                .filter_map(slope)
                .fold(0.0, f64::max);
                let width = lw[i + 1] - lw[i];
                if ma + mb >= SLOPE_SAFETY * k * width {
                    continue;
                }
                // a point certified by the first test alone may hide a
                // large second-test margin; complete the slope window first
                let missing: Vec<usize> = (i.saturating_sub(1)..(i + 3).min(n))
                    .filter(|&j| {
                        self.pts[j].s2_margin.is_none() && m[j].is_some_and(|x| x < DIP_LEVEL)
                    })
                    .collect();
                if !missing.is_empty() {
                    todo.extend(missing.into_iter().map(|j| (j, None)));
                } else if width > MIN_LOG_WIDTH {
                    todo.push((i, Some(0.5 * (lw[i] + lw[i + 1]))));
                } else {
                    open.push((self.pts[i].omega.value(), self.pts[i + 1].omega.value()));
                }
            }
            todo.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.is_some().cmp(&b.1.is_some())));
            todo.dedup_by(|a, b| a.0 == b.0 && a.1.is_none() && b.1.is_none());
            // a bisection is pointless while its window is being completed
            let completing: Vec<usize> =
                todo.iter().filter(|t| t.1.is_none()).map(|t| t.0).collect();
            todo.retain(|t| {
                t.1.is_none() || !(t.0.saturating_sub(1)..t.0 + 3).any(|j| completing.contains(&j))
            });
            if todo.is_empty() || *spent >= COVER_BUDGET {
                if !todo.is_empty() {
                    open.extend(todo.iter().map(|&(i, _)| {
                        let j = (i + 1).min(n - 1);
                        (self.pts[i].omega.value(), self.pts[j].omega.value())
                    }));
                }
                return Ok((added, open));
            }
            let mut fresh = Vec::new();
            for (i, at) in todo {
                *spent += 1;
                match at {
                    None => {
                        let w = self.pts[i].omega;
                        let v = evaluate_point(self.spec, self.models, w, &full)?;
                        self.pts[i] = v;
                    }
                    Some(l) => fresh.push(evaluate_point(
                        self.spec,
                        self.models,
                        Omega::Finite(l.exp()),
                        &full,
                    )?),
                }
            }
            for v in fresh {
                self.insert(v);
                added += 1;
            }
        }
    }
}

fn failing_bands(points: &[FrequencyVerdict]) -> Vec<FailingBand> {
    let mut bands = Vec::new();
    let mut cur: Option<FailingBand> = None;
    for p in points {
        if p.combined {
            if let Some(b) = cur.take() {
                bands.push(b);
            }
        } else {
            cur = Some(match cur {
                Some(b) => FailingBand { hi: p.omega, ..b },
                None => FailingBand {
                    lo: p.omega,
                    hi: p.omega,
                    kind: BandKind::Failed,
                },
            });
        }
    }
    bands.extend(cur);
    bands
}

/// Run the full sweep. CERTIFIED means the combined test holds at every
/// sampled frequency, including 0 and infinity.
pub fn certify(spec: &NetworkSpec, cfg: &CertifyConfig) -> Result<Certification, CriteriaError> {
    let models = preconditions(spec)?;
    certify_with(spec, &models, cfg)
}

pub fn certify_with(
    spec: &NetworkSpec,
    models: &LinearModels,
    cfg: &CertifyConfig,
) -> Result<Certification, CriteriaError> {
    let ws = base_grid(cfg);
    let base = ws.len() + 2;
    let pts = parallel_eval(spec, models, &ws, cfg)?;
    let mut sweep = Sweep {
        spec,
        models,
        cfg,
        pts,
    };
    let mut refined = 0;
    let mut spent = 0;
    for _ in 0..MAX_ROUNDS {
        let n = sweep.refine_switches()? + sweep.probe_dips()?;
        let (covered, _) = sweep.cover(&mut spent)?;
        refined += n + covered;
        if n + covered == 0 {
            break;
        }
    }
    // the final pass only reports: whatever is left open stays undecided
    let (covered, open) = sweep.cover(&mut spent)?;
    refined += covered;
    let mut points = Vec::with_capacity(sweep.pts.len() + 2);
    points.push(evaluate_point(spec, models, Omega::Finite(0.0), cfg)?);
    points.append(&mut sweep.pts);
    points.push(evaluate_point(spec, models, Omega::Infinite, cfg)?);
    let mut failing = failing_bands(&points);
    failing.extend(open.into_iter().map(|(lo, hi)| FailingBand {
        lo: Omega::Finite(lo),
        hi: Omega::Finite(hi),
        kind: BandKind::Unresolved,
    }));
    failing.sort_by(|a, b| a.lo.value().total_cmp(&b.lo.value()));
    let verdict = if failing.is_empty() {
        Verdict::Certified
    } else {
        Verdict::Undecided
    };
    Ok(Certification {
        verdict,
        mode: spec.mode,
        points,
        failing_bands: failing,
        base_points: base,
        refined_points: refined,
    })
}
