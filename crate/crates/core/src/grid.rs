//! Network matrices and evaluation of the AC power flow map
//! `(v, θ) -> (p_inj, q_inj, s_ft, s_tf)`.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::case::RawCase;
use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;
use crate::math::{cos, sin, sqrt};

/// π-model admittances of one in-service branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineAdmittance {
    pub yff: Complex64,
    pub yft: Complex64,
    pub ytf: Complex64,
    pub ytt: Complex64,
}

/// Immutable electrical model of a case.
#[derive(Debug, Clone)]
pub struct Network {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub bus_ids: Vec<u32>,
    /// Internal index of the reference bus.
    pub ref_bus: usize,
    /// Dense nodal admittance matrix, row-major `n × n`.
    pub yb: Vec<Complex64>,
    pub lines: Vec<LineAdmittance>,
    /// Sending and receiving bus index per line.
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    /// Series reactance per line (for DC approximations).
    pub x: Vec<f64>,
    pub gsh: Vec<f64>,
    pub bsh: Vec<f64>,
    pub smax: Vec<f64>,
    pub vmin: Vec<f64>,
    pub vmax: Vec<f64>,
    pub ang_min: Vec<f64>,
    pub ang_max: Vec<f64>,
    /// Index of the case branch each line came from.
    pub branch_index: Vec<usize>,
}

impl Network {
    /// Assemble admittance and incidence data from a validated case.
    /// Out-of-service branches are dropped.
    pub fn build(case: &RawCase) -> Result<Network> {
        case.validate()?;
        let n = case.buses.len();
        let ref_bus = case.ref_bus_index().expect("validated");
        let mut yb = vec![Complex64::new(0.0, 0.0); n * n];
        let mut lines = Vec::new();
        let (mut from, mut to, mut x, mut smax, mut amin, mut amax, mut bidx) =
            (vec![], vec![], vec![], vec![], vec![], vec![], vec![]);
        for (k, br) in case.branches.iter().enumerate() {
            if !br.in_service {
                continue;
            }
            let f = case.bus_index(br.from).expect("validated");
            let t = case.bus_index(br.to).expect("validated");
            if f == t {
                return Err(Error::validation(alloc::format!(
                    "branch {} connects bus {} to itself",
                    k + 1,
                    br.from
                )));
            }
            let z = Complex64::new(br.r, br.x);
            if z.norm_sqr() == 0.0 {
                return Err(Error::validation(alloc::format!(
                    "branch {} has zero impedance",
                    k + 1
                )));
            }
            let ys = z.inv();
            let tap = Complex64::from_polar(br.tap_ratio(), br.shift);
            let ytt = ys + Complex64::new(0.0, br.b / 2.0);
            let yff = ytt / (tap * tap.conj());
            let yft = -ys / tap.conj();
            let ytf = -ys / tap;
            yb[f * n + f] += yff;
            yb[f * n + t] += yft;
            yb[t * n + f] += ytf;
            yb[t * n + t] += ytt;
            lines.push(LineAdmittance { yff, yft, ytf, ytt });
            from.push(f);
            to.push(t);
            x.push(br.x);
            smax.push(br.rate_a);
            amin.push(br.ang_min);
            amax.push(br.ang_max);
            bidx.push(k);
        }
        let gsh: Vec<f64> = case.buses.iter().map(|b| b.gs).collect();
        let bsh: Vec<f64> = case.buses.iter().map(|b| b.bs).collect();
        for i in 0..n {
            yb[i * n + i] += Complex64::new(gsh[i], bsh[i]);
        }
        let net = Network {
            name: case.name.clone(),
            n,
            m: lines.len(),
            bus_ids: case.buses.iter().map(|b| b.id).collect(),
            ref_bus,
            yb,
            lines,
            from,
            to,
            x,
            gsh,
            bsh,
            smax,
            vmin: case.buses.iter().map(|b| b.vmin).collect(),
            vmax: case.buses.iter().map(|b| b.vmax).collect(),
            ang_min: amin,
            ang_max: amax,
            branch_index: bidx,
        };
        net.check_connected()?;
        Ok(net)
    }

    fn check_connected(&self) -> Result<()> {
        let hops = self.hops_from_ref();
        let lost: Vec<u32> = hops
            .iter()
            .enumerate()
            .filter(|(_, h)| h.is_none())
            .map(|(i, _)| self.bus_ids[i])
            .collect();
        if lost.is_empty() {
            Ok(())
        } else {
            Err(Error::Disconnected(lost))
        }
    }

    /// Breadth-first hop count from the reference bus; `None` for islands.
    pub fn hops_from_ref(&self) -> Vec<Option<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for l in 0..self.m {
            adj[self.from[l]].push(self.to[l]);
            adj[self.to[l]].push(self.from[l]);
        }
        let mut hops = vec![None; self.n];
        hops[self.ref_bus] = Some(0);
        let mut queue = VecDeque::from([self.ref_bus]);
        while let Some(b) = queue.pop_front() {
            let h = hops[b].unwrap();
            for &c in &adj[b] {
                if hops[c].is_none() {
                    hops[c] = Some(h + 1);
                    queue.push_back(c);
                }
            }
        }
        hops
    }

    pub fn yb_at(&self, i: usize, j: usize) -> Complex64 {
        self.yb[i * self.n + j]
    }

    /// Dense `m × n` from-end line-flow matrix.
    pub fn yft_matrix(&self) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.m * self.n];
        for (l, la) in self.lines.iter().enumerate() {
            y[l * self.n + self.from[l]] = la.yff;
            y[l * self.n + self.to[l]] = la.yft;
        }
        y
    }

    /// Dense `m × n` to-end line-flow matrix.
    pub fn ytf_matrix(&self) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.m * self.n];
        for (l, la) in self.lines.iter().enumerate() {
            y[l * self.n + self.from[l]] = la.ytf;
            y[l * self.n + self.to[l]] = la.ytt;
        }
        y
    }

    /// Signed incidence matrix `E` (`+1` at the sending bus).
    pub fn incidence(&self) -> Matrix {
        let mut e = Matrix::zeros(self.m, self.n);
        for l in 0..self.m {
            e[(l, self.from[l])] = 1.0;
            e[(l, self.to[l])] = -1.0;
        }
        e
    }

    /// Sending-end selector `E1 = (|E| + E) / 2`.
    pub fn sending_selector(&self) -> Matrix {
        let mut e = Matrix::zeros(self.m, self.n);
        for l in 0..self.m {
            e[(l, self.from[l])] = 1.0;
        }
        e
    }

    /// Receiving-end selector `E2 = (|E| - E) / 2`.
    pub fn receiving_selector(&self) -> Matrix {
        let mut e = Matrix::zeros(self.m, self.n);
        for l in 0..self.m {
            e[(l, self.to[l])] = 1.0;
        }
        e
    }

    /// Lines leaving (`ft`) and entering (`tf`) each bus.
    pub fn bus_lines(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut ft = vec![Vec::new(); self.n];
        let mut tf = vec![Vec::new(); self.n];
        for l in 0..self.m {
            ft[self.from[l]].push(l);
            tf[self.to[l]].push(l);
        }
        (ft, tf)
    }

    /// Length of the surrogate input `x = [v; θ without reference]`.
    pub fn input_dim(&self) -> usize {
        2 * self.n - 1
    }

    /// Length of `y = [p_inj; q_inj; s_ft; s_tf]`.
    pub fn output_dim(&self) -> usize {
        2 * self.n + 2 * self.m
    }

    /// Position of bus `b`'s angle inside `x`, `None` for the reference bus.
    pub fn theta_slot(&self, b: usize) -> Option<usize> {
        use core::cmp::Ordering::*;
        match b.cmp(&self.ref_bus) {
            Less => Some(self.n + b),
            Equal => None,
            Greater => Some(self.n + b - 1),
        }
    }

    /// Phasors `v e^{jθ}`.
    pub fn phasors(v: &[f64], theta: &[f64]) -> Vec<Complex64> {
        v.iter()
            .zip(theta)
            .map(|(m, a)| Complex64::new(m * cos(*a), m * sin(*a)))
            .collect()
    }

    /// Nodal currents `Yb V`.
    pub fn currents(&self, vc: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                self.yb[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(vc)
                    .map(|(y, v)| y * v)
                    .sum()
            })
            .collect()
    }

    /// Evaluate injections and both-direction line flows at `(v, θ)`.
    pub fn eval_power_flow(&self, v: &[f64], theta: &[f64]) -> Result<OperatingPoint> {
        check_len("voltage magnitudes", self.n, v.len())?;
        check_len("voltage angles", self.n, theta.len())?;
        if v.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::validation("voltage magnitudes must be positive"));
        }
        let vc = Self::phasors(v, theta);
        let ib = self.currents(&vc);
        let s_inj: Vec<Complex64> = vc.iter().zip(&ib).map(|(v, i)| v * i.conj()).collect();
        let mut op = OperatingPoint {
            v: v.to_vec(),
            theta: theta.to_vec(),
            p_inj: s_inj.iter().map(|s| s.re).collect(),
            q_inj: s_inj.iter().map(|s| s.im).collect(),
            p_ft: vec![0.0; self.m],
            q_ft: vec![0.0; self.m],
            p_tf: vec![0.0; self.m],
            q_tf: vec![0.0; self.m],
            s_ft: vec![0.0; self.m],
            s_tf: vec![0.0; self.m],
        };
        for (l, la) in self.lines.iter().enumerate() {
            let vf = vc[self.from[l]];
            let vt = vc[self.to[l]];
            let sft = vf * (la.yff * vf + la.yft * vt).conj();
            let stf = vt * (la.ytf * vf + la.ytt * vt).conj();
            op.p_ft[l] = sft.re;
            op.q_ft[l] = sft.im;
            op.p_tf[l] = stf.re;
            op.q_tf[l] = stf.im;
            op.s_ft[l] = sqrt(sft.re * sft.re + sft.im * sft.im);
            op.s_tf[l] = sqrt(stf.re * stf.re + stf.im * stf.im);
        }
        Ok(op)
    }

    /// Evaluate the stacked output `y_pf` from a packed input `x`.
    pub fn eval_packed(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (v, th) = self.unpack_input(x)?;
        Ok(self.eval_power_flow(&v, &th)?.pack_output())
    }

    /// Split `x = [v; θ_nonref]` back into full-length `(v, θ)` with
    /// `θ_ref = 0`.
    pub fn unpack_input(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("surrogate input", self.input_dim(), x.len())?;
        let v = x[..self.n].to_vec();
        let mut th = vec![0.0; self.n];
        for b in 0..self.n {
            if let Some(s) = self.theta_slot(b) {
                th[b] = x[s];
            }
        }
        Ok((v, th))
    }
}

/// Voltages, injections and line flows at one state of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    pub p_ft: Vec<f64>,
    pub q_ft: Vec<f64>,
    pub p_tf: Vec<f64>,
    pub q_tf: Vec<f64>,
    pub s_ft: Vec<f64>,
    pub s_tf: Vec<f64>,
}

impl OperatingPoint {
    /// `x = [v; θ]` with the reference-bus angle removed.
    pub fn pack_input(&self, net: &Network) -> Result<Vec<f64>> {
        check_len("voltage magnitudes", net.n, self.v.len())?;
        check_len("voltage angles", net.n, self.theta.len())?;
        let mut x = self.v.clone();
        x.extend(
            self.theta
                .iter()
                .enumerate()
                .filter(|(b, _)| *b != net.ref_bus)
                .map(|(_, a)| *a),
        );
        Ok(x)
    }

    /// `y_pf = [p_inj; q_inj; s_ft; s_tf]`.
    pub fn pack_output(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.p_inj.len() + 2 * self.s_ft.len());
        y.extend_from_slice(&self.p_inj);
        y.extend_from_slice(&self.q_inj);
        y.extend_from_slice(&self.s_ft);
        y.extend_from_slice(&self.s_tf);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::fixtures::*;
    use crate::case::BusType;
    use alloc::vec;

    #[test]
    fn two_bus_admittance() {
        let net = Network::build(&two_bus(0.5, 0.1)).unwrap();
        let c = |re, im| Complex64::new(re, im);
        let expect = [c(0.0, -10.0), c(0.0, 10.0), c(0.0, 10.0), c(0.0, -10.0)];
        for (a, b) in net.yb.iter().zip(expect) {
            assert!((a - b).norm() < 1e-12);
        }
        let e = net.incidence();
        assert_eq!(e.row(0), &[1.0, -1.0]);
        assert_eq!(net.sending_selector().row(0), &[1.0, 0.0]);
        assert_eq!(net.receiving_selector().row(0), &[0.0, 1.0]);
    }

    #[test]
    fn flat_start_has_no_flow() {
        let net = Network::build(&two_bus(0.5, 0.1)).unwrap();
        let op = net.eval_power_flow(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        for v in op.pack_output() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn two_bus_closed_form_flow() {
        let net = Network::build(&two_bus(0.5, 0.1)).unwrap();
        let op = net.eval_power_flow(&[1.0, 1.0], &[0.0, -0.1]).unwrap();
        let expected = 10.0 * libm::sin(0.1);
        assert!((op.p_ft[0] - expected).abs() < 1e-14);
        assert!((op.p_ft[0] - 0.9983).abs() < 1e-4);
    }

    #[test]
    fn packing_dimensions() {
        let net = Network::build(&two_bus(0.5, 0.1)).unwrap();
        let op = net.eval_power_flow(&[1.0, 0.98], &[0.0, -0.05]).unwrap();
        let x = op.pack_input(&net).unwrap();
        assert_eq!(x.len(), 3);
        let (v, th) = net.unpack_input(&x).unwrap();
        assert_eq!((v, th), (op.v.clone(), op.theta.clone()));
        assert_eq!(op.pack_output().len(), 2 * 2 + 2);
    }

    #[test]
    fn island_is_reported() {
        let mut case = four_bus();
        case.buses.push(bus(9, BusType::Pq, 0.0, 0.0));
        match Network::build(&case) {
            Err(Error::Disconnected(ids)) => assert_eq!(ids, vec![9]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = Network::build(&two_bus(0.5, 0.1)).unwrap();
        assert!(net.eval_power_flow(&[1.0], &[0.0, 0.0]).is_err());
        assert!(net.eval_power_flow(&[1.0, 0.0], &[0.0, 0.0]).is_err());
    }
}
