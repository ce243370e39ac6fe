use mgcert::cli::parse_network;
use mgcert::criteria::{certify_with, preconditions, CertifyConfig, Verdict};
use mgcert::lti::{Freq, LineParams, Omega, RationalTransfer};
use mgcert::netgraph::NetworkGraph;
use mgcert::network::{BusModel, Mode, NetworkSpec};
use mgcert::oracle::{
    assemble_closed_loop, eig_stability, eigenloci_distance, run_oracle, OracleVerdict, ReturnRatio,
};
use num_complex::Complex64;
use std::path::Path;

fn load(name: &str) -> NetworkSpec {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../networks")
        .join(name);
    parse_network(&p).unwrap().to_spec(None).unwrap()
}

fn integrator_pair(k1: f64) -> NetworkSpec {
    let bus = || BusModel::Transfer(RationalTransfer::new(vec![k1], vec![1.0, 1.0]).unwrap());
    NetworkSpec::new(
        vec![bus(), bus()],
        NetworkGraph::new(2, vec![(0, 1)]).unwrap(),
        &[LineParams::PoleAtOrigin {
            num: vec![1.0],
            den: vec![1.0],
        }],
        Mode::Theorem2,
    )
    .unwrap()
}

/// Roots of s^2 + s + q.
fn quad_roots(q: f64) -> [Complex64; 2] {
    let d = Complex64::new(1.0 - 4.0 * q, 0.0).sqrt();
    [(-1.0 + d) / 2.0, (-1.0 - d) / 2.0]
}

#[test]
fn two_bus_integrator_line_spectrum() {
    for k1 in [1.0, -1.0, 0.3] {
        let spec = integrator_pair(k1);
        let models = preconditions(&spec).unwrap();
        let cl = assemble_closed_loop(&spec, &models).unwrap();
        let rep = eig_stability(&cl, spec.mode);
        // common mode keeps the bus pole, the differential mode is s^2 + s + 2 k1
        let mut want = quad_roots(2.0 * k1).to_vec();
        want.push(Complex64::new(-1.0, 0.0));
        assert_eq!(rep.spectrum.len(), 3);
        for w in want {
            let d = rep
                .spectrum
                .iter()
                .map(|z| (z - w).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(
                d < 1e-10,
                "k1 = {k1}: missing {w}, spectrum {:?}",
                rep.spectrum
            );
        }
        let want_verdict = if k1 > 0.0 {
            OracleVerdict::Stable
        } else {
            OracleVerdict::Unstable
        };
        assert_eq!(rep.verdict, want_verdict);
    }
}

#[test]
fn winding_counts_unstable_modes() {
    let nominal = load("cpl_ring.json");
    for spec in [nominal.clone(), nominal.scale_power(1.25)] {
        let models = preconditions(&spec).unwrap();
        let rep = run_oracle(&spec, &models, false).unwrap();
        let rhp = rep.eig.spectrum.iter().filter(|z| z.re > 0.0).count() as i64;
        assert_eq!(rep.winding, -rhp);
        assert!(rep.min_det > 1e-9);
        assert!(rep.equivalence_mismatch < 1e-9);
    }
    let models = preconditions(&nominal.scale_power(1.25)).unwrap();
    let rep = run_oracle(&nominal.scale_power(1.25), &models, false).unwrap();
    assert_eq!(rep.eig.verdict, OracleVerdict::Unstable);
    assert!(rep.winding < 0);
}

#[test]
fn certified_points_keep_eigenloci_off_minus_one() {
    let spec = load("resistive_ring.json");
    let models = preconditions(&spec).unwrap();
    let cert = certify_with(&spec, &models, &CertifyConfig::default()).unwrap();
    assert_eq!(cert.verdict, Verdict::Certified);
    let rr = ReturnRatio::new(&spec, &models);
    let mut tested = 0;
    for p in cert.points.iter().step_by(7) {
        let Omega::Finite(w) = p.omega else { continue };
        let q = rr.original(Freq::jw(w)).unwrap();
        assert!(eigenloci_distance(&q).unwrap() > 0.0, "w = {w}");
        tested += 1;
    }
    assert!(tested > 100);
}

#[test]
fn homotopy_passes_on_certified_ring() {
    let spec = load("integrator_ring_stable.json");
    let models = preconditions(&spec).unwrap();
    let rep = run_oracle(&spec, &models, true).unwrap();
    assert_eq!(rep.eig.verdict, OracleVerdict::Stable);
    assert!(rep.eig.semisimple);
    assert_eq!(rep.eig.zero_count, 1);
    assert!(rep.homotopy.unwrap().passed);
}
