use nalgebra::{DMatrix, DVector};

use super::{interconnect, linearize_bus, BusSpec, Interconnection, LtiError, StateSpace};
use crate::netgraph::IncidenceMatrix;
use crate::network::{BusModel, NetworkSpec};

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Converged when the scaled residual drops below this.
    pub tol: f64,
    /// Residual still accepted if Newton stagnates above `tol`.
    pub accept: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iter: 100,
            tol: 1e-12,
            accept: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub line_currents: Vec<f64>,
    pub bus_voltages: Vec<f64>,
    /// (inductor current, capacitor voltage, voltage integrator, current integrator)
    pub bus_states: Vec<[f64; 4]>,
    pub line_states: Vec<Vec<f64>>,
    /// Scaled residual infinity norm at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// The nonlinear network model assembled for Newton and for finite differences.
pub struct NonlinearNetwork<'a> {
    buses: Vec<&'a BusSpec>,
    lines: Vec<StateSpace>,
    wiring: Interconnection,
    inc: IncidenceMatrix,
    inc_t: DMatrix<f64>,
    scale: DVector<f64>,
}

impl<'a> NonlinearNetwork<'a> {
    pub fn new(spec: &'a NetworkSpec) -> Result<Self, LtiError> {
        let mut buses = Vec::new();
        for (j, b) in spec.buses.iter().enumerate() {
            match b {
                BusModel::Buck(b) => buses.push(b),
                BusModel::Transfer(_) => return Err(LtiError::NotNonlinear(j + 1)),
            }
        }
        let lines: Vec<StateSpace> = spec.lines.iter().map(|l| l.realize()).collect();
        let bus_ss = buses
            .iter()
            .map(|b| linearize_bus(b, b.v_nom))
            .collect::<Result<Vec<_>, _>>()?;
        let wiring = interconnect(&bus_ss, &lines, spec.incidence())?;
        let n = wiring.a.nrows();
        let mut scale = DVector::from_element(n, 1.0);
        for (j, b) in buses.iter().enumerate() {
            let o = wiring.bus_offsets[j];
            scale[o] = b.l_f;
            scale[o + 1] = b.c_f;
        }
        let inc_t = spec.incidence().to_f64().transpose();
        Ok(NonlinearNetwork {
            buses,
            lines,
            wiring,
            inc: spec.incidence().clone(),
            inc_t,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.wiring.a.nrows()
    }

    /// Initial point: nominal voltages, no network current.
    pub fn initial_point(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        for (j, b) in self.buses.iter().enumerate() {
            let o = self.wiring.bus_offsets[j];
            let s = b.steady_state(b.v_nom, 0.0);
            for i in 0..4 {
                x[o + i] = s[i];
            }
        }
        x
    }

    pub fn field(&self, x: &DVector<f64>) -> DVector<f64> {
        let ib = &self.wiring.bus_currents * x;
        let dv = &self.inc_t * (&self.wiring.voltages * x);
        let mut f = DVector::zeros(x.len());
        for (j, b) in self.buses.iter().enumerate() {
            let o = self.wiring.bus_offsets[j];
            let fj = b.field(&[x[o], x[o + 1], x[o + 2], x[o + 3]], ib[j]);
            for i in 0..4 {
                f[o + i] = fj[i];
            }
        }
        for (k, l) in self.lines.iter().enumerate() {
            let o = self.wiring.line_offsets[k];
            let nk = l.order();
            let fk = &l.a * x.rows(o, nk) + &l.b * dv[k];
            f.rows_mut(o, nk).copy_from(&fk);
        }
        f
    }

    /// Analytic Jacobian of [`NonlinearNetwork::field`].
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, LtiError> {
        let v = &self.wiring.voltages * x;
        let bus_ss = self
            .buses
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let (a, bb) = b.jacobian(v[j]);
                StateSpace::new(
                    a,
                    bb,
                    DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 0.0, 0.0]),
                    DMatrix::zeros(1, 1),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(interconnect(&bus_ss, &self.lines, &self.inc)?.a)
    }

    fn scaled_norm(&self, f: &DVector<f64>) -> f64 {
        f.iter()
            .zip(self.scale.iter())
            .map(|(a, s)| (a * s).abs())
            .fold(0.0, f64::max)
    }

    fn unpack(&self, x: &DVector<f64>, residual: f64, iterations: usize) -> Equilibrium {
        let v = &self.wiring.voltages * x;
        let il = &self.wiring.line_currents * x;
        let bus_states = (0..self.buses.len())
            .map(|j| {
                let o = self.wiring.bus_offsets[j];
                [x[o], x[o + 1], x[o + 2], x[o + 3]]
            })
            .collect();
        let line_states = self
            .lines
            .iter()
            .enumerate()
            .map(|(k, l)| {
                x.rows(self.wiring.line_offsets[k], l.order())
                    .iter()
                    .copied()
                    .collect()
            })
            .collect();
        Equilibrium {
            line_currents: il.iter().copied().collect(),
            bus_voltages: v.iter().copied().collect(),
            bus_states,
            line_states,
            residual,
            iterations,
        }
    }
}

/// Public view of the nonlinear vector field for a stacked state.
pub fn nonlinear_field(spec: &NetworkSpec, x: &DVector<f64>) -> Result<DVector<f64>, LtiError> {
    Ok(NonlinearNetwork::new(spec)?.field(x))
}

/// Damped Newton with minimum-norm steps, so that the families of equilibria
/// created by lines with a pole at the origin are handled.
pub fn solve_equilibrium(spec: &NetworkSpec, cfg: &NewtonConfig) -> Result<Equilibrium, LtiError> {
    let net = NonlinearNetwork::new(spec)?;
    let mut x = net.initial_point();
    let mut f = net.field(&x);
    let mut res = net.scaled_norm(&f);
    let mut it = 0;
    while res > cfg.tol && it < cfg.max_iter {
        it += 1;
        let j = net.jacobian(&x)?;
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&(-&f), 1e-11 * smax)
            .map_err(|_| LtiError::NoConvergence {
                iterations: it,
                residual: res,
            })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let xn = &x + &step * lambda;
            let fnew = net.field(&xn);
            let rn = net.scaled_norm(&fnew);
            if rn.is_finite() && rn < res {
                x = xn;
                f = fnew;
                res = rn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(res <= cfg.accept) {
        return Err(LtiError::NoConvergence {
            iterations: it,
            residual: res,
        });
    }
    let eq = net.unpack(&x, res, it);
    if let Some((j, &v)) = eq
        .bus_voltages
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0))
    {
        return Err(LtiError::NonPhysical {
            bus: j + 1,
            voltage: v,
        });
    }
    Ok(eq)
}
