use approx::assert_relative_eq;
use mgcert::cli::parse_network;
use mgcert::lti::{
    build_line, solve_equilibrium, Freq, LineParams, LtiError, NewtonConfig, RationalTransfer,
};
use mgcert::network::BusModel;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use std::path::Path;

fn net(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../networks")
        .join(name)
}

fn from_roots(roots: &[f64]) -> Vec<f64> {
    // ascending coefficients of prod (s + r)
    let mut p = vec![1.0];
    for r in roots {
        let mut q = vec![0.0; p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            q[i] += c * r;
            q[i + 1] += c;
        }
        p = q;
    }
    p
}

proptest! {
    #[test]
    fn realization_matches_rational_eval(
        poles in proptest::collection::vec(0.1f64..100.0, 1..5),
        zeros in proptest::collection::vec(-50.0f64..50.0, 0..4),
        gain in -10.0f64..10.0,
        w in 1e-3f64..1e4,
        feed in any::<bool>(),
    ) {
        let den = from_roots(&poles);
        let nz = zeros.len().min(if feed { poles.len() } else { poles.len() - 1 });
        let num: Vec<f64> = from_roots(&zeros[..nz]).iter().map(|c| c * gain).collect();
        let tf = RationalTransfer::new(num, den).unwrap();
        let ss = tf.realize();
        let s = Freq::jw(w);
        let a = tf.eval(s).unwrap();
        let b = ss.eval_siso(s).unwrap();
        prop_assert!((a - b).norm() <= 1e-8 * (1.0 + a.norm()), "{a} vs {b}");
        prop_assert_eq!(ss.order(), poles.len());
    }
}

#[test]
fn rl_line_admittance() {
    let line = build_line(&LineParams::Rl { r: 0.2, l: 1e-3 }).unwrap();
    for w in [0.0, 10.0, 200.0, 1e5] {
        let y = line.eval(Freq::jw(w)).unwrap();
        let want = Complex64::new(1.0, 0.0) / Complex64::new(0.2, 1e-3 * w);
        assert_relative_eq!(y.re, want.re, max_relative = 1e-12);
        assert_relative_eq!(y.im, want.im, max_relative = 1e-12, epsilon = 1e-15);
    }
    assert_eq!(line.eval(Freq::Infinity).unwrap(), Complex64::new(0.0, 0.0));
    assert!(line.in_rh_inf());
}

#[test]
fn rejects_bad_lines() {
    assert!(matches!(
        build_line(&LineParams::Rl { r: -1.0, l: 1e-3 }),
        Err(LtiError::BadLineParams(_))
    ));
    // 1/(s+1)^3 has negative real part at high enough frequency
    let bad = build_line(&LineParams::Spr {
        num: vec![1.0],
        den: vec![1.0, 3.0, 3.0, 1.0],
    });
    assert!(matches!(bad, Err(LtiError::NotSPR { .. })), "{bad:?}");
    let ok = build_line(&LineParams::Spr {
        num: vec![3.0, 1.0],
        den: vec![1.0, 3.0, 1.0],
    });
    assert!(ok.is_ok());
}

#[test]
fn pole_at_origin_line_blows_up_at_dc() {
    let line = build_line(&LineParams::PoleAtOrigin {
        num: vec![0.5],
        den: vec![1.0],
    })
    .unwrap();
    assert!(!line.in_rh_inf());
    let y = line.eval(Freq::jw(2.0)).unwrap();
    assert_relative_eq!(y.im, -0.25, max_relative = 1e-12);
    assert!(matches!(
        line.eval(Freq::jw(0.0)),
        Err(LtiError::PoleHit { .. })
    ));
}

#[test]
fn improper_transfer_is_rejected() {
    assert_eq!(
        RationalTransfer::new(vec![1.0, 1.0, 1.0], vec![1.0, 1.0]).unwrap_err(),
        LtiError::Improper { num: 2, den: 1 }
    );
}

/// With integral voltage control each bus settles at v_nom + R_droop i_b, and
/// RL lines carry (v_t - v_h)/r at DC. That gives a linear system in v that
/// the loads do not enter.
fn droop_voltages(path: &str) -> (Vec<f64>, Vec<f64>) {
    let file = parse_network(&net(path)).unwrap();
    let spec = file.to_spec(None).unwrap();
    let n = spec.n_buses();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for (k, &(t, h)) in spec.graph.edges().iter().enumerate() {
        let LineParams::Rl { r, .. } = spec.lines[k].params else {
            panic!("expected RL lines");
        };
        for (a, b) in [(t, h), (h, t)] {
            lap[(a, a)] += 1.0 / r;
            lap[(a, b)] -= 1.0 / r;
        }
    }
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for (j, b) in spec.buses.iter().enumerate() {
        let BusModel::Buck(b) = b else { panic!() };
        for c in 0..n {
            m[(j, c)] += b.r_droop * lap[(j, c)];
        }
        rhs[j] = b.v_nom;
    }
    let want = m.lu().solve(&rhs).unwrap();
    let eq = solve_equilibrium(&spec, &NewtonConfig::default()).unwrap();
    (want.iter().copied().collect(), eq.bus_voltages)
}

#[test]
fn equilibrium_matches_droop_solution() {
    for f in ["resistive_ring.json", "cpl_ring.json"] {
        let (want, got) = droop_voltages(f);
        for (a, b) in want.iter().zip(&got) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let file = parse_network(&net("cpl_ring.json")).unwrap();
    let spec = file.to_spec(None).unwrap();
    let eq = solve_equilibrium(&spec, &NewtonConfig::default()).unwrap();
    assert!(eq.residual < 1e-9);
    for (j, b) in spec.buses.iter().enumerate() {
        let BusModel::Buck(b) = b else { panic!() };
        let i_b: f64 = -spec
            .graph
            .edges()
            .iter()
            .zip(&eq.line_currents)
            .map(|(&(t, h), &i)| {
                if t == j {
                    i
                } else if h == j {
                    -i
                } else {
                    0.0
                }
            })
            .sum::<f64>();
        let f = b.field(&eq.bus_states[j], i_b);
        for x in f {
            assert!(x.abs() < 1e-6, "bus {j}: {f:?}");
        }
    }
}
