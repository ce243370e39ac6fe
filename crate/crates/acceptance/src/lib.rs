//! Seeded random instances for the acceptance suite.

use mgcert::lti::{BusSpec, LineParams, LoadImpedance, RationalTransfer};
use mgcert::netgraph::NetworkGraph;
use mgcert::network::{BusModel, Mode, NetworkSpec};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut Rng8, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Tree,
    Ring,
}

/// Connected graph on `n` buses with random edge orientations. A ring needs
/// at least three buses; with two it degenerates to a single edge.
pub fn random_graph(rng: &mut Rng8, n: usize, topo: Topology) -> NetworkGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    match topo {
        Topology::Tree => {
            for i in 1..n {
                let parent = order[rng.gen_range(0..i)];
                edges.push((parent, order[i]));
            }
        }
        Topology::Ring if n < 3 => edges.push((order[0], order[1])),
        Topology::Ring => {
            for i in 0..n {
                edges.push((order[i], order[(i + 1) % n]));
            }
        }
    }
    for e in &mut edges {
        if rng.gen_bool(0.5) {
            *e = (e.1, e.0);
        }
    }
    NetworkGraph::new(n, edges).expect("generated graph is connected")
}

/// Series RL line with r in [0.01, 1] ohm and l in [1e-5, 1e-2] H, both
/// log-uniform.
pub fn random_rl(rng: &mut Rng8) -> LineParams {
    LineParams::Rl {
        r: log_uniform(rng, 0.01, 1.0),
        l: log_uniform(rng, 1e-5, 1e-2),
    }
}

fn polymul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Strictly proper transfer function of the given order with every pole in
/// the open left half-plane. Zeros may lie anywhere; the DC gain has
/// magnitude `gain` and is negative with probability 0.2.
pub fn random_stable_tf(rng: &mut Rng8, order: usize, gain: f64) -> RationalTransfer {
    let mut den = vec![1.0];
    let mut left = order;
    while left > 0 {
        if left >= 2 && rng.gen_bool(0.5) {
            let wn = log_uniform(rng, 0.3, 3e3);
            let zeta = rng.gen_range(0.05..1.0);
            den = polymul(&den, &[wn * wn, 2.0 * zeta * wn, 1.0]);
            left -= 2;
        } else {
            den = polymul(&den, &[log_uniform(rng, 0.3, 3e3), 1.0]);
            left -= 1;
        }
    }
    let mut num = vec![1.0];
    for _ in 0..rng.gen_range(0..order) {
        let z = log_uniform(rng, 0.3, 3e3);
        let z = if rng.gen_bool(0.3) { -z } else { z };
        num = polymul(&num, &[z, 1.0]);
    }
    let sign = if rng.gen_bool(0.2) { -1.0 } else { 1.0 };
    let k = sign * gain * den[0] / num[0];
    let num: Vec<f64> = num.iter().map(|c| c * k).collect();
    RationalTransfer::new(num, den).expect("proper by construction")
}

/// Transfer-function buses of order 2 to 4 on a random tree or ring with RL
/// lines. Bus DC gains are log-uniform in [1e-3, 1] ohm.
pub fn random_instance(rng: &mut Rng8) -> NetworkSpec {
    let n = rng.gen_range(2..=6);
    let topo = if rng.gen_bool(0.5) {
        Topology::Tree
    } else {
        Topology::Ring
    };
    let graph = random_graph(rng, n, topo);
    let buses = (0..n)
        .map(|_| {
            let order = rng.gen_range(2..=4);
            let gain = log_uniform(rng, 1e-3, 1.0);
            BusModel::Transfer(random_stable_tf(rng, order, gain))
        })
        .collect();
    let lines: Vec<LineParams> = (0..graph.n_edges()).map(|_| random_rl(rng)).collect();
    NetworkSpec::new(buses, graph, &lines, Mode::Theorem1).expect("valid instance")
}

/// Buck bus with every parameter drawn from a physically plausible range.
pub fn random_bus_spec(rng: &mut Rng8) -> BusSpec {
    BusSpec {
        r_f: log_uniform(rng, 0.01, 0.5),
        l_f: log_uniform(rng, 1e-4, 1e-2),
        c_f: log_uniform(rng, 1e-4, 1e-2),
        k_pv: log_uniform(rng, 0.05, 2.0),
        k_iv: log_uniform(rng, 1.0, 100.0),
        k_pi: log_uniform(rng, 0.5, 20.0),
        k_ii: log_uniform(rng, 10.0, 1000.0),
        r_droop: log_uniform(rng, 0.005, 0.2),
        v_nom: rng.gen_range(12.0..400.0),
        i_bar: rng.gen_range(0.0..5.0),
        z_load: if rng.gen_bool(0.2) {
            LoadImpedance::Absent
        } else {
            LoadImpedance::Ohms(log_uniform(rng, 1.0, 100.0))
        },
        p_load: rng.gen_range(0.0..1000.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_tf_has_lhp_poles_and_requested_gain() {
        let mut r = rng(3);
        for order in 2..=4 {
            let tf = random_stable_tf(&mut r, order, 0.5);
            assert_eq!(tf.order(), order);
            assert!(tf.is_strictly_proper());
            assert!(tf.poles().iter().all(|p| p.re < 0.0));
            let g = tf.eval(mgcert::lti::Freq::jw(0.0)).unwrap();
            assert!((g.norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_has_n_edges() {
        let mut r = rng(1);
        let g = random_graph(&mut r, 5, Topology::Ring);
        assert_eq!(g.n_edges(), 5);
        let t = random_graph(&mut r, 5, Topology::Tree);
        assert_eq!(t.n_edges(), 4);
    }
}
