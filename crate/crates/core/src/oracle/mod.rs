//! Ground truth for the certificates: closed-loop eigenvalues, return
//! ratios, determinant winding and the sampled homotopy.

mod contour;

pub use contour::{
    modified_contour, winding_of, ContourKind, NyquistContour, Sample, Segment, Winding,
    MAX_REFINES, MAX_STEP,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::criteria::{j_weight, CriteriaError};
use crate::linalg::{det, eigenvalues, rank, spectral_radius, to_complex, CMat};
use crate::lti::{interconnect, Freq, LineModel, LtiError, StateSpace};
use crate::netgraph::{build_coupling, IncidenceMatrix};
use crate::network::{LinearModels, Mode, NetworkSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("phase jump near s = {at} after {rounds} refinements")]
    PhaseJump { at: Complex64, rounds: usize },
    #[error("contour radii must satisfy 0 < r < R, got r = {r}, R = {big_r}")]
    BadRadii { r: f64, big_r: f64 },
    #[error("eigenvalue iteration did not converge")]
    Eigen,
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
}

/// Real part below which an eigenvalue counts as stable.
pub const STABILITY_TOL: f64 = 1e-9;
/// Relative rank tolerance for the semisimplicity test.
pub const RANK_TOL: f64 = 1e-8;
/// Smallest admissible distance of the determinant from zero.
pub const DET_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ClosedLoop {
    /// Autonomous realization: no inputs or outputs.
    pub statespace: StateSpace,
    /// Origin of every state, e.g. "bus2.x1" or "line1.x0".
    pub labels: Vec<String>,
}

pub fn assemble_closed_loop(
    spec: &NetworkSpec,
    models: &LinearModels,
) -> Result<ClosedLoop, OracleError> {
    let ic = interconnect(&models.buses, &models.lines, spec.incidence())?;
    let n = ic.a.nrows();
    let mut labels = Vec::with_capacity(n);
    for (j, b) in models.buses.iter().enumerate() {
        labels.extend((0..b.order()).map(|i| format!("bus{}.x{i}", j + 1)));
    }
    for (k, l) in models.lines.iter().enumerate() {
        labels.extend((0..l.order()).map(|i| format!("line{}.x{i}", k + 1)));
    }
    let statespace = StateSpace::new(
        ic.a,
        DMatrix::zeros(n, 0),
        DMatrix::zeros(0, n),
        DMatrix::zeros(0, 0),
    )?;
    Ok(ClosedLoop { statespace, labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OracleVerdict {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigReport {
    pub verdict: OracleVerdict,
    /// Largest real part over the spectrum.
    pub abscissa: f64,
    /// Eigenvalues treated as exact zeros.
    pub zero_count: usize,
    pub semisimple: bool,
    #[serde(skip)]
    pub spectrum: Vec<Complex64>,
}

pub fn eig_stability(cl: &ClosedLoop, mode: Mode) -> EigReport {
    let a = &cl.statespace.a;
    let spectrum = cl.statespace.poles().to_vec();
    let abscissa = spectrum
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if mode == Mode::Theorem1 || spectrum.is_empty() {
        let verdict = if spectrum.iter().all(|z| z.re < -STABILITY_TOL) {
            OracleVerdict::Stable
        } else {
            OracleVerdict::Unstable
        };
        return EigReport {
            verdict,
            abscissa,
            zero_count: 0,
            semisimple: true,
            spectrum,
        };
    }
    let scale = a.norm().max(1.0);
    let near: Vec<&Complex64> = spectrum.iter().filter(|z| z.re >= -STABILITY_TOL).collect();
    let zero_count = near
        .iter()
        .filter(|z| z.norm() <= STABILITY_TOL * scale)
        .count();
    let n = a.nrows();
    let r1 = rank(a, RANK_TOL);
    let r2 = rank(&(a * a), RANK_TOL);
    let semisimple = n - r1 == zero_count && r1 == r2;
    let verdict = if zero_count == near.len() && semisimple {
        OracleVerdict::Stable
    } else {
        OracleVerdict::Unstable
    };
    EigReport {
        verdict,
        abscissa,
        zero_count,
        semisimple,
        spectrum,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Original,
    New,
}

/// Evaluates the loop transfer matrices of an interconnection.
#[derive(Debug, Clone)]
pub struct ReturnRatio<'a> {
    pub buses: &'a [StateSpace],
    pub lines: &'a [LineModel],
    pub incidence: &'a IncidenceMatrix,
    gram: CMat,
}

impl<'a> ReturnRatio<'a> {
    pub fn new(spec: &'a NetworkSpec, models: &'a LinearModels) -> Self {
        Self::from_parts(&models.buses, &spec.lines, spec.incidence())
    }

    pub fn from_parts(
        buses: &'a [StateSpace],
        lines: &'a [LineModel],
        incidence: &'a IncidenceMatrix,
    ) -> Self {
        let gram = to_complex(&build_coupling(incidence).gram);
        ReturnRatio {
            buses,
            lines,
            incidence,
            gram,
        }
    }

    fn values(&self, s: Freq) -> Result<(Vec<Complex64>, Vec<Complex64>), OracleError> {
        let b = self
            .buses
            .iter()
            .map(|m| m.eval_siso(s))
            .collect::<Result<Vec<_>, _>>()?;
        let l = self
            .lines
            .iter()
            .map(|m| m.eval(s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((b, l))
    }

    /// B(s) A L(s) A^T, size n_buses.
    pub fn original(&self, s: Freq) -> Result<CMat, OracleError> {
        let (b, l) = self.values(s)?;
        let inc = self.incidence;
        let (nb, ne) = (inc.n_buses(), inc.n_edges());
        Ok(CMat::from_fn(nb, nb, |i, j| {
            let x: Complex64 = (0..ne)
                .map(|k| l[k] * (inc.get(i, k) * inc.get(j, k)) as f64)
                .sum();
            b[i] * x
        }))
    }

    /// diag(G_1, ..., G_n) M M^T, size n_buses * n_edges.
    pub fn new_form(&self, s: Freq) -> Result<CMat, OracleError> {
        let (b, l) = self.values(s)?;
        let inc = self.incidence;
        let (nb, ne) = (inc.n_buses(), inc.n_edges());
        let mut g = CMat::zeros(nb * ne, nb * ne);
        for (j, &bj) in b.iter().enumerate() {
            let gj = crate::criteria::build_gj(j, &l, inc, bj);
            g.view_mut((j * ne, j * ne), (ne, ne)).copy_from(&gj);
        }
        Ok(g * &self.gram)
    }

    pub fn eval(&self, s: Freq, which: Which) -> Result<CMat, OracleError> {
        match which {
            Which::Original => self.original(s),
            Which::New => self.new_form(s),
        }
    }

    /// Open-loop poles of every bus and line.
    pub fn poles(&self) -> Vec<Complex64> {
        self.buses
            .iter()
            .flat_map(|b| b.poles().iter().copied())
            .chain(self.lines.iter().flat_map(|l| l.tf.poles().iter().copied()))
            .collect()
    }
}

pub fn return_ratio(
    spec: &NetworkSpec,
    models: &LinearModels,
    s: Freq,
    which: Which,
) -> Result<CMat, OracleError> {
    ReturnRatio::new(spec, models).eval(s, which)
}

/// Distance from -1 to the eigenloci, i.e. min |1 + lambda(Q)|.
pub fn eigenloci_distance(q: &CMat) -> Result<f64, OracleError> {
    let ev = eigenvalues(q).ok_or(OracleError::Eigen)?;
    Ok(ev
        .iter()
        .map(|z| (1.0 + z).norm())
        .fold(f64::INFINITY, f64::min))
}

/// Relative mismatch between the nonzero eigenvalues of two matrices.
/// An eigenvalue counts as nonzero above 1e-7 of the largest modulus.
pub fn nonzero_spectrum_mismatch(x: &CMat, y: &CMat) -> Result<f64, OracleError> {
    let mut ex = eigenvalues(x).ok_or(OracleError::Eigen)?;
    let mut ey = eigenvalues(y).ok_or(OracleError::Eigen)?;
    let by_mod = |a: &Complex64, b: &Complex64| b.norm().total_cmp(&a.norm());
    ex.sort_by(by_mod);
    ey.sort_by(by_mod);
    let scale = ex.iter().chain(&ey).map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let cut = 1e-7 * scale;
    let m = ex.iter().filter(|z| z.norm() > cut).count();
    let my = ey.iter().filter(|z| z.norm() > cut).count();
    if m != my {
        // report the size of the first unmatched value
        let extra = if m > my { ex[my] } else { ey[m] };
        return Ok(extra.norm() / scale);
    }
    let mut used = vec![false; m];
    let mut worst: f64 = 0.0;
    for a in &ex[..m] {
        let (i, d) = (0..m)
            .filter(|&i| !used[i])
            .map(|i| (i, (ey[i] - a).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal counts");
        used[i] = true;
        worst = worst.max(d);
    }
    Ok(worst / scale)
}

/// rho(J^-1 Xi* J^-1 Xi) with Xi = A L A^T and J = diag of the line weights.
pub fn scaled_gain_bound(
    omega: f64,
    lines: &[LineModel],
    inc: &IncidenceMatrix,
) -> Result<f64, OracleError> {
    let l = lines
        .iter()
        .map(|m| m.eval(Freq::jw(omega)))
        .collect::<Result<Vec<_>, _>>()?;
    let (nb, ne) = (inc.n_buses(), inc.n_edges());
    let jinv: Vec<f64> = (0..nb)
        .map(|j| j_weight(j, &l, inc).map(|w| 1.0 / w))
        .collect::<Result<_, _>>()?;
    let xi = CMat::from_fn(nb, nb, |i, j| {
        (0..ne)
            .map(|k| l[k] * (inc.get(i, k) * inc.get(j, k)) as f64)
            .sum::<Complex64>()
    });
    let dj = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        nb,
        jinv.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let f = &dj * xi.adjoint() * &dj * &xi;
    spectral_radius(&f).ok_or(OracleError::Eigen)
}

/// R = 1e3 max(|p|, 1) and r = 1e-3 min(nonzero |p|, 1) over the given poles.
pub fn default_radii(poles: &[Complex64]) -> (f64, f64) {
    let big = poles.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let small = poles
        .iter()
        .map(|p| p.norm())
        .filter(|&m| m > 1e-12)
        .fold(1.0, f64::min);
    (1e-3 * small, 1e3 * big)
}

/// Winding of det(I + tau Q) along the contour, with the smallest |det| seen.
pub fn det_winding(
    contour: &NyquistContour,
    tau: f64,
    rr: &ReturnRatio,
) -> Result<Winding, OracleError> {
    winding_of(contour, |s| {
        let q = rr.original(Freq::At(s))?;
        let n = q.nrows();
        Ok(det(&(CMat::identity(n, n) + q * Complex64::new(tau, 0.0))))
    })
}

pub fn uniform_taus(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyOutcome {
    pub passed: bool,
    pub min_abs: f64,
    /// Homotopy parameters at which winding was nonzero or |det| too small.
    pub failing_taus: Vec<f64>,
}

/// Check that det(I + tau Q) keeps winding number 0 and stays away from 0
/// for every tau in the grid.
pub fn homotopy_check(
    rr: &ReturnRatio,
    contour: &NyquistContour,
    taus: &[f64],
) -> Result<HomotopyOutcome, OracleError> {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let chunk = taus.len().div_ceil(threads).max(1);
    let results: Vec<Result<Vec<(f64, Winding)>, OracleError>> = std::thread::scope(|sc| {
        let hs: Vec<_> = taus
            .chunks(chunk)
            .map(|part| {
                sc.spawn(move || {
                    part.iter()
                        .map(|&t| det_winding(contour, t, rr).map(|w| (t, w)))
                        .collect()
                })
            })
            .collect();
        hs.into_iter()
            .map(|h| h.join().expect("homotopy worker panicked"))
            .collect()
    });
    let mut min_abs = f64::INFINITY;
    let mut failing_taus = Vec::new();
    for r in results {
        for (t, w) in r? {
            min_abs = min_abs.min(w.min_abs);
            if w.winding != 0 || !(w.min_abs > DET_TOL) {
                failing_taus.push(t);
            }
        }
    }
    Ok(HomotopyOutcome {
        passed: failing_taus.is_empty(),
        min_abs,
        failing_taus,
    })
}

/// The contour matching the mode: plain axis when every line is stable,
/// the detour around the origin otherwise.
pub fn contour_for(
    mode: Mode,
    poles: &[Complex64],
    per_segment: usize,
) -> Result<NyquistContour, OracleError> {
    let (r, big_r) = default_radii(poles);
    match mode {
        Mode::Theorem1 => NyquistContour::imaginary_axis(r, big_r, per_segment),
        Mode::Theorem2 => modified_contour(r, big_r, per_segment),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub eig: EigReport,
    pub winding: i64,
    pub min_det: f64,
    pub homotopy: Option<HomotopyOutcome>,
    /// Largest nonzero-spectrum mismatch of the two return ratios over a
    /// few test frequencies.
    pub equivalence_mismatch: f64,
}

pub const DEFAULT_PER_SEGMENT: usize = 2000;

pub fn run_oracle(
    spec: &NetworkSpec,
    models: &LinearModels,
    homotopy: bool,
) -> Result<OracleReport, OracleError> {
    let cl = assemble_closed_loop(spec, models)?;
    let eig = eig_stability(&cl, spec.mode);
    let rr = ReturnRatio::new(spec, models);
    let mut poles = rr.poles();
    poles.extend(eig.spectrum.iter().copied());
    let contour = contour_for(spec.mode, &poles, DEFAULT_PER_SEGMENT)?;
    let w = det_winding(&contour, 1.0, &rr)?;
    let homotopy = if homotopy {
        Some(homotopy_check(&rr, &contour, &uniform_taus(51))?)
    } else {
        None
    };
    let mut mismatch: f64 = 0.0;
    for i in 0..9 {
        let s = Freq::jw(10f64.powi(i - 2) * 1.37);
        if let (Ok(a), Ok(b)) = (rr.original(s), rr.new_form(s)) {
            mismatch = mismatch.max(nonzero_spectrum_mismatch(&a, &b)?);
        }
    }
    Ok(OracleReport {
        eig,
        winding: w.winding,
        min_det: w.min_abs,
        homotopy,
        equivalence_mismatch: mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{build_line, LineParams, RationalTransfer};
    use crate::netgraph::{build_incidence, NetworkGraph};
    use crate::network::BusModel;

    fn tf(num: &[f64], den: &[f64]) -> BusModel {
        BusModel::Transfer(RationalTransfer::new(num.to_vec(), den.to_vec()).unwrap())
    }

    fn two_bus(b: [BusModel; 2], line: LineParams, mode: Mode) -> NetworkSpec {
        let g = NetworkGraph::from_one_based(2, &[(1, 2)]).unwrap();
        NetworkSpec::new(b.to_vec(), g, &[line], mode).unwrap()
    }

    fn cl_of(spec: &NetworkSpec) -> (LinearModels, ClosedLoop) {
        let m = spec.linearize().unwrap();
        let cl = assemble_closed_loop(spec, &m).unwrap();
        (m, cl)
    }

    #[test]
    fn diagonal_verdicts() {
        let mk = |d: &[f64]| ClosedLoop {
            statespace: StateSpace::new(
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
                DMatrix::zeros(d.len(), 0),
                DMatrix::zeros(0, d.len()),
                DMatrix::zeros(0, 0),
            )
            .unwrap(),
            labels: vec![],
        };
        assert_eq!(
            eig_stability(&mk(&[-1.0, -2.0]), Mode::Theorem1).verdict,
            OracleVerdict::Stable
        );
        assert_eq!(
            eig_stability(&mk(&[-1.0, 0.5]), Mode::Theorem1).verdict,
            OracleVerdict::Unstable
        );
        assert_eq!(
            eig_stability(&mk(&[-1.0, 0.0]), Mode::Theorem2).verdict,
            OracleVerdict::Stable
        );
        assert_eq!(
            eig_stability(&mk(&[-1.0, 0.0]), Mode::Theorem1).verdict,
            OracleVerdict::Unstable
        );
    }

    #[test]
    fn jordan_block_at_zero_is_unstable() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let cl = ClosedLoop {
            statespace: StateSpace::new(
                a,
                DMatrix::zeros(2, 0),
                DMatrix::zeros(0, 2),
                DMatrix::zeros(0, 0),
            )
            .unwrap(),
            labels: vec![],
        };
        let r = eig_stability(&cl, Mode::Theorem2);
        assert!(!r.semisimple);
        assert_eq!(r.verdict, OracleVerdict::Unstable);
    }

    #[test]
    fn two_bus_first_order() {
        let spec = two_bus(
            [tf(&[1.0], &[1.0, 1.0]), tf(&[1.0], &[1.0, 1.0])],
            LineParams::Rl { r: 1.0, l: 1.0 },
            Mode::Theorem1,
        );
        let (m, cl) = cl_of(&spec);
        assert_eq!(cl.statespace.order(), 3);
        assert_eq!(cl.labels, ["bus1.x0", "bus2.x0", "line1.x0"]);
        assert_eq!(
            eig_stability(&cl, Mode::Theorem1).verdict,
            OracleVerdict::Stable
        );
        let rr = ReturnRatio::new(&spec, &m);
        let c = contour_for(Mode::Theorem1, &rr.poles(), 500).unwrap();
        let w = det_winding(&c, 1.0, &rr).unwrap();
        assert_eq!(w.winding, 0);
        assert!(w.min_abs > DET_TOL);
        assert_eq!(det_winding(&c, 0.0, &rr).unwrap().min_abs, 1.0);
    }

    #[test]
    fn static_buses_with_integrator_line() {
        let (b1, b2, l) = (0.7, 1.3, 0.5);
        let spec = two_bus(
            [tf(&[b1], &[1.0]), tf(&[b2], &[1.0])],
            LineParams::PoleAtOrigin {
                num: vec![1.0 / l],
                den: vec![1.0],
            },
            Mode::Theorem2,
        );
        let (_, cl) = cl_of(&spec);
        assert_eq!(cl.statespace.order(), 1);
        let ev = cl.statespace.poles()[0];
        assert!((ev.re + (b1 + b2) / l).abs() < 1e-12 && ev.im == 0.0);
    }

    #[test]
    fn return_ratio_single_edge() {
        let spec = two_bus(
            [tf(&[1.0], &[1.0]), tf(&[1.0], &[1.0])],
            LineParams::Rl { r: 2.0, l: 1e-9 },
            Mode::Theorem1,
        );
        let m = spec.linearize().unwrap();
        let q = return_ratio(&spec, &m, Freq::jw(0.0), Which::Original).unwrap();
        let want = CMat::from_row_slice(
            2,
            2,
            &[0.5, -0.5, -0.5, 0.5].map(|x| Complex64::new(x, 0.0)),
        );
        assert!((q - want).norm() < 1e-15);
        let q = return_ratio(&spec, &m, Freq::Infinity, Which::Original).unwrap();
        assert_eq!(q.norm(), 0.0);
    }

    #[test]
    fn negative_scalar_loop_winds_once() {
        // 1 + Q vanishes at s = 0.5
        let c = NyquistContour::imaginary_axis(1e-3, 1e6, 1000).unwrap();
        let w = winding_of(&c, |s| Ok(1.0 - 1.5 / (s + 1.0))).unwrap();
        assert_eq!(w.winding.abs(), 1);
    }

    #[test]
    fn gain_bound_single_edge() {
        let g = NetworkGraph::from_one_based(2, &[(1, 2)]).unwrap();
        let inc = build_incidence(&g);
        let line = build_line(&LineParams::Rl { r: 0.2, l: 3e-3 }).unwrap();
        for w in [0.0, 1.0, 100.0, 1e5] {
            let rho = scaled_gain_bound(w, std::slice::from_ref(&line), &inc).unwrap();
            assert!(rho <= 1.0 + 1e-12, "{rho}");
        }
    }

    #[test]
    fn identical_ring_lines_at_dc() {
        let g = NetworkGraph::from_one_based(3, &[(1, 2), (2, 3), (3, 1)]).unwrap();
        let inc = build_incidence(&g);
        let line = build_line(&LineParams::Rl { r: 0.5, l: 1e-3 }).unwrap();
        let lines = vec![line; 3];
        // L = 2 at dc, so Xi is twice the ring Laplacian (spectrum 0, 6, 6),
        // every J is 8 and F = Xi^2 / 64
        let rho = scaled_gain_bound(0.0, &lines, &inc).unwrap();
        assert!((rho - 36.0 / 64.0).abs() < 1e-12, "{rho}");
    }
}
