use nalgebra::DMatrix;

use super::{LtiError, StateSpace};
use crate::netgraph::IncidenceMatrix;

/// Linear maps of the negative-feedback wiring: bus inputs are -A i_L, line
/// inputs are A^T v. States are ordered buses first, then lines.
#[derive(Debug, Clone)]
pub struct Interconnection {
    /// Autonomous state matrix.
    pub a: DMatrix<f64>,
    /// Bus voltages as a function of the state.
    pub voltages: DMatrix<f64>,
    /// Line currents as a function of the state.
    pub line_currents: DMatrix<f64>,
    /// Injected bus currents as a function of the state.
    pub bus_currents: DMatrix<f64>,
    pub bus_offsets: Vec<usize>,
    pub line_offsets: Vec<usize>,
}

pub fn interconnect(
    buses: &[StateSpace],
    lines: &[StateSpace],
    inc: &IncidenceMatrix,
) -> Result<Interconnection, LtiError> {
    let (nb, ne) = (inc.n_buses(), inc.n_edges());
    if buses.len() != nb || lines.len() != ne {
        return Err(LtiError::Dimension(format!(
            "{} buses and {} lines for a {nb}x{ne} incidence",
            buses.len(),
            lines.len()
        )));
    }
    for m in buses.iter().chain(lines) {
        if m.inputs() != 1 || m.outputs() != 1 {
            return Err(LtiError::Dimension(
                "bus and line models must be single-input single-output".into(),
            ));
        }
    }
    for (j, bus) in buses.iter().enumerate().take(nb) {
        for &k in inc.neighbors(j) {
            if bus.has_feedthrough() && lines[k].has_feedthrough() {
                return Err(LtiError::AlgebraicLoop {
                    bus: j + 1,
                    edge: k + 1,
                });
            }
        }
    }
    let mut bus_offsets = Vec::with_capacity(nb + 1);
    let mut n = 0;
    for b in buses {
        bus_offsets.push(n);
        n += b.order();
    }
    let mut line_offsets = Vec::with_capacity(ne);
    for l in lines {
        line_offsets.push(n);
        n += l.order();
    }
    let place = |dst: &mut DMatrix<f64>, row: usize, off: usize, c: &DMatrix<f64>, scale: f64| {
        for i in 0..c.ncols() {
            dst[(row, off + i)] += scale * c[(0, i)];
        }
    };

    // line current without the direct voltage term
    let mut lc0 = DMatrix::zeros(ne, n);
    for (k, l) in lines.iter().enumerate() {
        place(&mut lc0, k, line_offsets[k], &l.c, 1.0);
    }
    let mut volt = DMatrix::zeros(nb, n);
    for (j, b) in buses.iter().enumerate() {
        place(&mut volt, j, bus_offsets[j], &b.c, 1.0);
        let dj = b.d[(0, 0)];
        if dj != 0.0 {
            // incident lines have no feedthrough here
            for &k in inc.neighbors(j) {
                let row = lc0.row(k).clone_owned() * (-dj * inc.get(j, k) as f64);
                let mut vr = volt.row_mut(j);
                vr += row;
            }
        }
    }
    let inc_f = inc.to_f64();
    let dv = inc_f.transpose() * &volt;
    let mut line_currents = lc0;
    for (k, l) in lines.iter().enumerate() {
        let dk = l.d[(0, 0)];
        if dk != 0.0 {
            let row = dv.row(k).clone_owned() * dk;
            let mut r = line_currents.row_mut(k);
            r += row;
        }
    }
    let bus_currents = -(&inc_f * &line_currents);

    let mut a = DMatrix::zeros(n, n);
    for (j, b) in buses.iter().enumerate() {
        let o = bus_offsets[j];
        let nj = b.order();
        {
            let mut blk = a.view_mut((o, o), (nj, nj));
            blk += &b.a;
        }
        let inj = &b.b * bus_currents.row(j);
        {
            let mut blk = a.view_mut((o, 0), (nj, n));
            blk += &inj;
        }
    }
    for (k, l) in lines.iter().enumerate() {
        let o = line_offsets[k];
        let nk = l.order();
        {
            let mut blk = a.view_mut((o, o), (nk, nk));
            blk += &l.a;
        }
        let inj = &l.b * dv.row(k);
        {
            let mut blk = a.view_mut((o, 0), (nk, n));
            blk += &inj;
        }
    }
    Ok(Interconnection {
        a,
        voltages: volt,
        line_currents,
        bus_currents,
        bus_offsets,
        line_offsets,
    })
}
