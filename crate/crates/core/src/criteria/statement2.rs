//! Test on the bus-plus-incident-lines subsystems G_j, with multipliers
//! shared across buses.
//!
//! Every multiplier tested here is a point of one cone parametrized by
//! x = (delta2, [a_k, d_k, e_k, c_k] per line):
//!
//!   pi11_k = -(2 delta2 + a_k), pi12_k = d_k + e_k + j c_k, pi22_k = delta2 / 2 + d_k
//!
//! delta2 carries the gain-1/2 multiplier and (a, d + e, c, d) a line
//! multiplier with b = d + e >= d. Pure passivity is e_k = 1, everything
//! else 0; the small-gain test is delta2 = 1, everything else 0.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::qc::PSD_TOL;
use super::Branch;
use crate::linalg::{max_singular_value, min_eigenvalue_hermitian, CMat, C64};
use crate::netgraph::IncidenceMatrix;

/// Full n_edges x n_edges G_j = diag(L) a_j^T B_j a_j.
pub fn build_gj(j: usize, lines: &[Complex64], inc: &IncidenceMatrix, b: Complex64) -> CMat {
    let ne = inc.n_edges();
    CMat::from_fn(ne, ne, |k, l| {
        lines[k] * (inc.get(j, k) as f64) * b * (inc.get(j, l) as f64)
    })
}

/// G_j restricted to the rows and columns of the lines touching bus j.
pub fn gj_support(j: usize, lines: &[Complex64], inc: &IncidenceMatrix, b: Complex64) -> CMat {
    let e = inc.neighbors(j);
    CMat::from_fn(e.len(), e.len(), |p, q| {
        let (k, l) = (e[p], e[q]);
        lines[k] * (inc.get(j, k) as f64) * b * (inc.get(j, l) as f64)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum S2Branch {
    Passivity,
    SmallGain,
    Multiplier,
    Conic,
}

/// Line multiplier of the search family; pi12 = b + j c with b >= d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineMultiplier {
    pub pi11: f64,
    pub pi12_re: f64,
    pub pi12_im: f64,
    pub pi22: f64,
}

impl LineMultiplier {
    pub fn side_condition(&self) -> f64 {
        -2.0 * self.pi12_re + 2.0 * self.pi22
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    /// Maximum number of multiplier evaluations per frequency.
    pub budget: usize,
    /// Stop as soon as the margin reaches this value.
    pub stop_margin: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            budget: 600,
            stop_margin: 0.05,
            seed: 0,
        }
    }
}

/// One bus: its support G block and the global indices of its lines.
#[derive(Debug, Clone)]
pub struct Block {
    pub edges: Vec<usize>,
    pub g: CMat,
}

impl Block {
    pub fn new(j: usize, lines: &[Complex64], inc: &IncidenceMatrix, b: Complex64) -> Self {
        Block {
            edges: inc.neighbors(j).to_vec(),
            g: gj_support(j, lines, inc, b),
        }
    }
}

/// Psi_j(x) = psi0 + sum_m x_m basis[m], stored sparsely over the variables
/// that touch this bus.
struct AffineBlock {
    psi0: CMat,
    terms: Vec<(usize, CMat)>,
}

fn affine_block(b: &Block, eps: f64) -> AffineBlock {
    let g = &b.g;
    let n = g.nrows();
    let ga = g.adjoint();
    let gg = &ga * g;
    let one = C64::new(1.0, 0.0);
    let mut terms = Vec::with_capacity(1 + 4 * n);
    terms.push((
        0,
        gg.clone() * C64::new(-2.0, 0.0) + CMat::identity(n, n) * C64::new(0.5, 0.0),
    ));
    for (i, &k) in b.edges.iter().enumerate() {
        let mut ei = CMat::zeros(n, n);
        ei[(i, i)] = one;
        let gae = &ga * &ei;
        let eg = &ei * g;
        let sym = &gae + &eg;
        let base = 1 + 4 * k;
        terms.push((base, -(&gae * g)));
        terms.push((base + 1, &sym + &ei));
        terms.push((base + 2, sym));
        terms.push((base + 3, (gae - eg) * C64::new(0.0, 1.0)));
    }
    AffineBlock {
        psi0: gg * C64::new(-eps, 0.0),
        terms,
    }
}

impl AffineBlock {
    fn at(&self, x: &[f64]) -> CMat {
        let mut m = self.psi0.clone();
        for (v, b) in &self.terms {
            if x[*v] != 0.0 {
                m += b * C64::new(x[*v], 0.0);
            }
        }
        m
    }
}

fn lower(v: usize) -> f64 {
    if v > 0 && (v - 1) % 4 == 3 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    /// Smallest eigenvalue over all buses at `x`.
    pub margin: f64,
    pub evaluations: usize,
}

impl SearchOutcome {
    pub fn delta2(&self) -> f64 {
        self.x[0]
    }

    pub fn multipliers(&self) -> Vec<LineMultiplier> {
        (0..(self.x.len() - 1) / 4)
            .map(|k| {
                let (a, d, e, c) = (
                    self.x[1 + 4 * k],
                    self.x[2 + 4 * k],
                    self.x[3 + 4 * k],
                    self.x[4 + 4 * k],
                );
                LineMultiplier {
                    pi11: -a,
                    pi12_re: d + e,
                    pi12_im: c,
                    pi22: d,
                }
            })
            .collect()
    }
}

pub fn passivity_point(n_lines: usize) -> Vec<f64> {
    let mut x = vec![0.0; 1 + 4 * n_lines];
    for k in 0..n_lines {
        x[3 + 4 * k] = 1.0;
    }
    x
}

pub fn small_gain_point(n_lines: usize) -> Vec<f64> {
    let mut x = vec![0.0; 1 + 4 * n_lines];
    x[0] = 1.0;
    x
}

struct Problem {
    blocks: Vec<AffineBlock>,
    nvars: usize,
    evals: usize,
}

fn upper(_v: usize) -> f64 {
    1.0
}

impl Problem {
    fn margin(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        self.blocks
            .iter()
            .map(|b| min_eigenvalue_hermitian(&b.at(x)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Inverses of Psi_j(x) - t I, or `None` outside the barrier domain.
    fn slacks(&self, x: &[f64], t: f64) -> Option<Vec<CMat>> {
        self.blocks
            .iter()
            .map(|b| {
                let m = b.at(x);
                let n = m.nrows();
                let s = m - CMat::identity(n, n) * C64::new(t, 0.0);
                hermitian_cholesky(s).map(|c| c.inverse())
            })
            .collect()
    }

    /// Barrier value -sigma t - sum log det S_j - box terms, if feasible.
    fn barrier(&mut self, x: &[f64], t: f64, sigma: f64) -> Option<f64> {
        self.evals += 1;
        let mut f = -sigma * t;
        for (v, &xv) in x.iter().enumerate() {
            let (a, b) = (xv - lower(v), upper(v) - xv);
            if a <= 0.0 || b <= 0.0 {
                return None;
            }
            f -= a.ln() + b.ln();
        }
        for blk in &self.blocks {
            let m = blk.at(x);
            let n = m.nrows();
            let s = m - CMat::identity(n, n) * C64::new(t, 0.0);
            let c = hermitian_cholesky(s)?;
            let l = c.l_dirty();
            f -= 2.0 * (0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>();
        }
        Some(f)
    }

    /// Gradient and Hessian of the barrier in z = (x, t).
    fn newton_system(&self, x: &[f64], sinv: &[CMat], sigma: f64) -> (Vec<f64>, DMatrix<f64>) {
        let nz = self.nvars + 1;
        let it = self.nvars;
        let mut g = vec![0.0; nz];
        let mut h = DMatrix::zeros(nz, nz);
        g[it] = -sigma;
        for (blk, si) in self.blocks.iter().zip(sinv) {
            // products S^-1 B_m, with the t direction as B = -I
            let mut prods: Vec<(usize, CMat)> =
                blk.terms.iter().map(|(v, m)| (*v, si * m)).collect();
            prods.push((it, -si.clone()));
            for (p, (vp, mp)) in prods.iter().enumerate() {
                g[*vp] -= mp.trace().re;
                for (vq, mq) in &prods[p..] {
                    let val = (mp * mq).trace().re;
                    h[(*vp, *vq)] += val;
                    if vp != vq {
                        h[(*vq, *vp)] += val;
                    }
                }
            }
        }
        for (v, &xv) in x.iter().enumerate() {
            let (a, b) = (xv - lower(v), upper(v) - xv);
            g[v] += -1.0 / a + 1.0 / b;
            h[(v, v)] += 1.0 / (a * a) + 1.0 / (b * b);
        }
        (g, h)
    }
}

/// Cholesky factor of a Hermitian positive definite matrix. The complex
/// factorization takes complex square roots and so also succeeds on
/// indefinite input; those show up as non-real pivots.
fn hermitian_cholesky(s: CMat) -> Option<nalgebra::Cholesky<C64, nalgebra::Dyn>> {
    let c = s.cholesky()?;
    let l = c.l_dirty();
    (0..l.nrows())
        .all(|i| l[(i, i)].im.abs() < l[(i, i)].re)
        .then_some(c)
}

fn interior(x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(v, &xv)| {
            let (lo, hi) = (lower(v), upper(v));
            let mid = 0.5 * (lo + hi);
            0.95 * xv.clamp(lo, hi) + 0.05 * mid
        })
        .collect()
}

/// Newton step, shifting the diagonal when the Hessian is numerically
/// indefinite.
fn regularized_solve(h: DMatrix<f64>, g: &[f64]) -> Option<DVector<f64>> {
    let rhs = DVector::from_column_slice(g);
    let scale = h.diagonal().amax().max(1e-300);
    let mut shift = 0.0;
    for _ in 0..12 {
        let hs = &h + DMatrix::identity(h.nrows(), h.ncols()) * shift;
        if let Some(c) = hs.cholesky() {
            return Some(c.solve(&rhs));
        }
        shift = if shift == 0.0 {
            1e-12 * scale
        } else {
            shift * 100.0
        };
    }
    None
}

/// Maximize the smallest eigenvalue of Psi_j(x) over all blocks and over the
/// box of the parametrization. The problem is a small semidefinite program;
/// it is solved with a log-barrier Newton method on (x, t) started from the
/// best of a few seeds. Any point with a nonnegative margin is a
/// certificate, so the search stops once `stop_margin` is reached.
pub fn search_multiplier(
    blocks: &[Block],
    n_lines: usize,
    eps: f64,
    cfg: &SearchConfig,
) -> SearchOutcome {
    search_multiplier_from(blocks, n_lines, eps, cfg, None)
}

/// As [`search_multiplier`], with an extra starting point, typically the
/// solution at a nearby frequency.
pub fn search_multiplier_from(
    blocks: &[Block],
    n_lines: usize,
    eps: f64,
    cfg: &SearchConfig,
    warm: Option<&[f64]>,
) -> SearchOutcome {
    let nvars = 1 + 4 * n_lines;
    let mut p = Problem {
        blocks: blocks.iter().map(|b| affine_block(b, eps)).collect(),
        nvars,
        evals: 0,
    };
    let mut seeds = vec![passivity_point(n_lines), small_gain_point(n_lines)];
    if let Some(w) = warm.filter(|w| w.len() == nvars) {
        seeds.push(w.to_vec());
    }
    for phi in [-1.2f64, -0.6, 0.6, 1.2] {
        let mut x = vec![0.0; nvars];
        x[0] = 0.25;
        for k in 0..n_lines {
            x[3 + 4 * k] = phi.cos().max(0.0);
            x[4 + 4 * k] = phi.sin();
        }
        seeds.push(x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..4 {
        let x: Vec<f64> = (0..nvars).map(|v| rng.gen_range(lower(v)..=1.0)).collect();
        seeds.push(x);
    }
    let mut best_x = seeds[0].clone();
    let mut best = f64::NEG_INFINITY;
    for s in &seeds {
        let m = p.margin(s);
        if m > best {
            best = m;
            best_x = s.clone();
        }
    }
    let done = |best: f64, evals: usize| best >= cfg.stop_margin || evals >= cfg.budget;
    if done(best, p.evals) {
        return SearchOutcome {
            x: best_x,
            margin: best,
            evaluations: p.evals,
        };
    }

    let mut x = interior(&best_x);
    let m0 = p.margin(&x);
    let mut t = m0 - 0.5 * m0.abs().max(1e-3);
    // barrier parameter: the gap to the optimum is at most dim / sigma
    let dim = (blocks.iter().map(|b| b.g.nrows()).sum::<usize>() + 2 * nvars) as f64;
    let mut sigma = dim / m0.abs().max(1e-3);
    'outer: for _ in 0..40 {
        for _ in 0..50 {
            let Some(sinv) = p.slacks(&x, t) else {
                break 'outer;
            };
            let (g, h) = p.newton_system(&x, &sinv, sigma);
            let Some(step) = regularized_solve(h, &g) else {
                break 'outer;
            };
            let decrement = g.iter().zip(step.iter()).map(|(a, b)| a * b).sum::<f64>();
            if decrement < 1e-10 {
                break;
            }
            let f0 = p.barrier(&x, t, sigma).expect("current point is feasible");
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let xn: Vec<f64> = (0..nvars).map(|v| x[v] - alpha * step[v]).collect();
                let tn = t - alpha * step[nvars];
                if let Some(f1) = p.barrier(&xn, tn, sigma) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        x = xn;
                        t = tn;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
            if done(best, p.evals) {
                break 'outer;
            }
        }
        let m = p.margin(&x);
        if m > best {
            best = m;
            best_x = x.clone();
        }
        if done(best, p.evals) || dim / sigma < 1e-9 {
            break;
        }
        sigma *= 8.0;
    }
    let m = p.margin(&x);
    if m > best {
        best = m;
        best_x = x;
    }
    SearchOutcome {
        x: best_x,
        margin: best,
        evaluations: p.evals,
    }
}

/// Margin of every block at a given parameter point.
pub fn block_margins(blocks: &[Block], x: &[f64], eps: f64) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| min_eigenvalue_hermitian(&affine_block(b, eps).at(x)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S2Bus {
    pub passivity: Branch,
    pub small_gain: Branch,
    /// Margin of this bus at the searched multiplier.
    pub multiplier: Branch,
}

/// Stand-alone branches for one G block: passivity, small gain and a search
/// over multipliers local to this bus.
pub fn statement2_bus(g: &CMat, eps: f64, cfg: &SearchConfig) -> (S2Bus, SearchOutcome) {
    let n = g.nrows();
    let block = Block {
        edges: (0..n).collect(),
        g: g.clone(),
    };
    let blocks = std::slice::from_ref(&block);
    let pm = block_margins(blocks, &passivity_point(n), eps)[0];
    let sigma = max_singular_value(g);
    let sg = 1.0 - 2.0 * (2.0 + eps) * sigma * sigma;
    let found = search_multiplier(blocks, n, eps, cfg);
    (
        S2Bus {
            passivity: Branch::with_tol(pm, PSD_TOL),
            small_gain: Branch::with_tol(sg, PSD_TOL),
            multiplier: Branch::with_tol(found.margin, PSD_TOL),
        },
        found,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct S2Network {
    pub holds: bool,
    pub branch: Option<S2Branch>,
    pub margin: f64,
    pub delta2: f64,
    pub multipliers: Vec<LineMultiplier>,
    pub per_bus: Vec<S2Bus>,
    /// Whether each bus is PSD at the certificate point.
    pub at_certificate: Vec<bool>,
    pub evaluations: usize,
}

/// Network test with one multiplier set shared by every bus.
pub fn statement2_network(
    blocks: &[Block],
    n_lines: usize,
    eps: f64,
    cfg: &SearchConfig,
) -> S2Network {
    let pass = block_margins(blocks, &passivity_point(n_lines), eps);
    let sg: Vec<f64> = blocks
        .iter()
        .map(|b| {
            let s = max_singular_value(&b.g);
            1.0 - 2.0 * (2.0 + eps) * s * s
        })
        .collect();
    let found = search_multiplier(blocks, n_lines, eps, cfg);
    let mult = block_margins(blocks, &found.x, eps);
    let per_bus = (0..blocks.len())
        .map(|j| S2Bus {
            passivity: Branch::with_tol(pass[j], PSD_TOL),
            small_gain: Branch::with_tol(sg[j], PSD_TOL),
            multiplier: Branch::with_tol(mult[j], PSD_TOL),
        })
        .collect::<Vec<_>>();
    let all = |f: &dyn Fn(&S2Bus) -> bool| per_bus.iter().all(f);
    let (branch, at_certificate) = if all(&|b| b.passivity.holds) {
        (Some(S2Branch::Passivity), vec![true; blocks.len()])
    } else if all(&|b| b.small_gain.holds) {
        (Some(S2Branch::SmallGain), vec![true; blocks.len()])
    } else if all(&|b| b.multiplier.holds) {
        let kind = if found.delta2() == 0.0 {
            S2Branch::Multiplier
        } else {
            S2Branch::Conic
        };
        (Some(kind), vec![true; blocks.len()])
    } else {
        (None, per_bus.iter().map(|b| b.multiplier.holds).collect())
    };
    S2Network {
        holds: branch.is_some(),
        branch,
        margin: found.margin,
        delta2: found.delta2(),
        multipliers: found.multipliers(),
        per_bus,
        at_certificate,
        evaluations: found.evaluations,
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
    fn single_edge_value() {
        let g = NetworkGraph::from_one_based(2, &[(1, 2)]).unwrap();
        let inc = build_incidence(&g);
        let gj = build_gj(0, &[c(0.5, 0.0)], &inc, c(1.0, 0.0));
        assert_eq!(gj[(0, 0)], c(0.5, 0.0));
    }

    #[test]
    fn two_edges_outer_product() {
        let g = NetworkGraph::from_one_based(3, &[(1, 2), (3, 1)]).unwrap();
        let inc = build_incidence(&g);
        let l = [c(0.5, 0.0), c(0.5, 0.0)];
        let gj = gj_support(0, &l, &inc, c(1.0, 0.0));
        let want = CMat::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0)],
        );
        assert_eq!(gj, want);
        let full = build_gj(1, &l, &inc, c(0.3, 0.1));
        let r = crate::linalg::rank(&full.map(|z| z.norm()), 1e-12);
        assert!(r <= 1);
    }

    #[test]
    fn small_gain_branch() {
        let g = CMat::from_element(1, 1, c(0.4, 0.0));
        let (b, _) = statement2_bus(&g, 1e-6, &SearchConfig::default());
        assert!(b.small_gain.holds);
        assert!((b.small_gain.margin - (1.0 - 2.0 * (2.0 + 1e-6) * 0.16)).abs() < 1e-12);
    }

    #[test]
    fn hermitian_g_is_passive() {
        let p = CMat::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0)],
        );
        let g = p * c(0.6, 0.0);
        let (b, _) = statement2_bus(&g, 1e-6, &SearchConfig::default());
        assert!(b.passivity.holds);
    }

    #[test]
    fn combined_multiplier_matches_branch_points() {
        let g = CMat::from_element(1, 1, c(0.1, 0.3));
        let block = Block {
            edges: vec![0],
            g: g.clone(),
        };
        let pm = block_margins(std::slice::from_ref(&block), &passivity_point(1), 0.0)[0];
        assert!((pm - 0.2).abs() < 1e-15);
        let sm = block_margins(std::slice::from_ref(&block), &small_gain_point(1), 0.0)[0];
        assert!((sm - (0.5 - 2.0 * 0.1)).abs() < 1e-15);
    }
}
