//! Polar-coordinate Jacobians of the power flow map and the affine model
//! `y ≈ J* x + r*` built from them.
//!
//! Column order is always `[v (n); θ (n)]`; the reference-angle column is
//! removed only when the stacked surrogate Jacobian is formed.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::grid::{Network, OperatingPoint};
use crate::linalg::Matrix;

/// Denominator floor for the apparent-flow chain rule (p.u.).
pub const APPARENT_FLOW_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDirection {
    FromTo,
    ToFrom,
}

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check_point(net: &Network, v: &[f64], theta: &[f64]) -> Result<()> {
    check_len("voltage magnitudes", net.n, v.len())?;
    check_len("voltage angles", net.n, theta.len())?;
    if v.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::validation("voltage magnitudes must be positive"));
    }
    Ok(())
}

/// `∂(p_inj, q_inj)/∂(v, θ)`, a `2n × 2n` matrix.
pub fn injection_jacobian(net: &Network, v: &[f64], theta: &[f64]) -> Result<Matrix> {
    check_point(net, v, theta)?;
    let n = net.n;
    let vc = Network::phasors(v, theta);
    let ib = net.currents(&vc);
    let mut jac = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for k in 0..n {
            let y = net.yb_at(i, k);
            // S_i = V_i conj(Σ_k Y_ik V_k)
            let mut ds_dv = vc[i] * (y * vc[k] / v[k]).conj();
            let mut ds_dth = -J * vc[i] * (y * vc[k]).conj();
            if i == k {
                ds_dv += ib[i].conj() * vc[i] / v[i];
                ds_dth += J * vc[i] * ib[i].conj();
            }
            jac[(i, k)] = ds_dv.re;
            jac[(i, n + k)] = ds_dth.re;
            jac[(n + i, k)] = ds_dv.im;
            jac[(n + i, n + k)] = ds_dth.im;
        }
    }
    Ok(jac)
}

/// `∂(p^γ, q^γ)/∂(v, θ)` for one flow direction, a `2m × 2n` matrix with
/// active-power rows first.
pub fn line_flow_jacobian(
    net: &Network,
    v: &[f64],
    theta: &[f64],
    dir: FlowDirection,
) -> Result<Matrix> {
    check_point(net, v, theta)?;
    let (n, m) = (net.n, net.m);
    let vc = Network::phasors(v, theta);
    let mut jac = Matrix::zeros(2 * m, 2 * n);
    for (l, la) in net.lines.iter().enumerate() {
        let (f, t) = (net.from[l], net.to[l]);
        // Flow measured at `a`, through admittances (ya to a, yb to b).
        let (a, b, ya, yb) = match dir {
            FlowDirection::FromTo => (f, t, la.yff, la.yft),
            FlowDirection::ToFrom => (t, f, la.ytt, la.ytf),
        };
        let i_a = ya * vc[a] + yb * vc[b];
        for (k, yk) in [(a, ya), (b, yb)] {
            let mut ds_dv = vc[a] * (yk * vc[k] / v[k]).conj();
            let mut ds_dth = -J * vc[a] * (yk * vc[k]).conj();
            if k == a {
                ds_dv += i_a.conj() * vc[a] / v[a];
                ds_dth += J * vc[a] * i_a.conj();
            }
            jac[(l, k)] += ds_dv.re;
            jac[(l, n + k)] += ds_dth.re;
            jac[(m + l, k)] += ds_dv.im;
            jac[(m + l, n + k)] += ds_dth.im;
        }
    }
    Ok(jac)
}

/// Apparent-flow Jacobian with the lines whose denominator was regularized.
#[derive(Debug, Clone)]
pub struct ApparentJacobian {
    pub matrix: Matrix,
    pub regularized: Vec<usize>,
}

/// `∂s^γ/∂(v, θ)` by the chain rule `(p ∂p + q ∂q) / s`, an `m × 2n` matrix.
pub fn apparent_flow_jacobian(
    net: &Network,
    v: &[f64],
    theta: &[f64],
    dir: FlowDirection,
) -> Result<ApparentJacobian> {
    let pq = line_flow_jacobian(net, v, theta, dir)?;
    let op = net.eval_power_flow(v, theta)?;
    Ok(chain_apparent(net, &op, &pq, dir))
}

fn chain_apparent(
    net: &Network,
    op: &OperatingPoint,
    pq: &Matrix,
    dir: FlowDirection,
) -> ApparentJacobian {
    let (n, m) = (net.n, net.m);
    let (p, q) = match dir {
        FlowDirection::FromTo => (&op.p_ft, &op.q_ft),
        FlowDirection::ToFrom => (&op.p_tf, &op.q_tf),
    };
    let mut out = Matrix::zeros(m, 2 * n);
    let mut regularized = Vec::new();
    for l in 0..m {
        let s = crate::math::hypot(p[l], q[l]);
        if s < APPARENT_FLOW_EPS {
            regularized.push(l);
        }
        let denom = s.max(APPARENT_FLOW_EPS);
        for c in 0..2 * n {
            out[(l, c)] = (p[l] * pq[(l, c)] + q[l] * pq[(m + l, c)]) / denom;
        }
    }
    ApparentJacobian {
        matrix: out,
        regularized,
    }
}

/// Affine power flow model `y_lin = J* x + r*` around `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPfModel {
    /// `(2n+2m) × (2n-1)`.
    pub jstar: Matrix,
    pub rstar: Vec<f64>,
    pub x0: Vec<f64>,
    pub net_id: String,
}

impl LinearPfModel {
    pub fn input_dim(&self) -> usize {
        self.jstar.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.jstar.rows()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.jstar.mul_vec(x);
        for (yi, r) in y.iter_mut().zip(&self.rstar) {
            *yi += r;
        }
        y
    }
}

/// Provenance tag tying a linear model to the network it came from.
pub fn network_tag(net: &Network) -> String {
    format!("{}:n{}:m{}:ref{}", net.name, net.n, net.m, net.bus_ids[net.ref_bus])
}

/// Full stacked Jacobian `[J_pq; J_s,ft; J_s,tf]` at `op` (all `2n` columns).
pub fn stacked_jacobian(net: &Network, op: &OperatingPoint) -> Result<Matrix> {
    let jpq = injection_jacobian(net, &op.v, &op.theta)?;
    let jft = line_flow_jacobian(net, &op.v, &op.theta, FlowDirection::FromTo)?;
    let jtf = line_flow_jacobian(net, &op.v, &op.theta, FlowDirection::ToFrom)?;
    let sft = chain_apparent(net, op, &jft, FlowDirection::FromTo);
    let stf = chain_apparent(net, op, &jtf, FlowDirection::ToFrom);
    Ok(Matrix::vstack(&[&jpq, &sft.matrix, &stf.matrix]))
}

/// Linearize the power flow map at `op`.
pub fn linearize(net: &Network, op: &OperatingPoint) -> Result<LinearPfModel> {
    if op.theta.get(net.ref_bus).copied().unwrap_or(0.0) != 0.0 {
        return Err(Error::validation("reference-bus angle must be zero"));
    }
    let op = net.eval_power_flow(&op.v, &op.theta)?;
    let full = stacked_jacobian(net, &op)?;
    if !full.is_finite() {
        return Err(Error::NonFinite("power flow Jacobian"));
    }
    let jstar = full.without_column(net.n + net.ref_bus);
    let x0 = op.pack_input(net)?;
    let f0 = op.pack_output();
    let jx = jstar.mul_vec(&x0);
    let rstar = f0.iter().zip(&jx).map(|(f, j)| f - j).collect();
    Ok(LinearPfModel {
        jstar,
        rstar,
        x0,
        net_id: network_tag(net),
    })
}
