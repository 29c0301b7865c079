//! Exact big-M encoding of the compact model, pre-activation bounds by
//! interval arithmetic or LP/MILP tightening, and ReLU pruning.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::grid::Network;
use crate::instance::UcInstance;
use crate::jacobian::LinearPfModel;
use crate::lp::{solve_milp, DualSimplex, LpStatus, MilpConfig, MilpModel, MilpStatus, Sense, VarTag};
use crate::nn::CompactPwlModel;
use crate::Stopwatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReluStatus {
    Free,
    FixedOff,
    FixedOn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Provenance {
    Interval,
    Lp,
    Milp,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Interval => "interval",
            Provenance::Lp => "lp",
            Provenance::Milp => "milp",
        }
    }
}

/// Pre-activation bounds `Mmin ≤ ẑ ≤ Mmax` per ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct BigMBounds {
    pub mmin: Vec<f64>,
    pub mmax: Vec<f64>,
    pub status: Vec<ReluStatus>,
    pub provenance: Vec<Provenance>,
}

impl BigMBounds {
    pub fn len(&self) -> usize {
        self.mmin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mmin.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.mmin.len();
        check_len("upper big-M bounds", k, self.mmax.len())?;
        check_len("ReLU statuses", k, self.status.len())?;
        check_len("bound provenance", k, self.provenance.len())?;
        for i in 0..k {
            let (lo, hi) = (self.mmin[i], self.mmax[i]);
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::validation(format!("ReLU {i} has invalid bounds [{lo}, {hi}]")));
            }
            match self.status[i] {
                ReluStatus::FixedOff if hi > 0.0 => {
                    return Err(Error::validation(format!("ReLU {i} fixed off but Mmax = {hi} > 0")));
                }
                ReluStatus::FixedOn if lo <= 0.0 => {
                    return Err(Error::validation(format!("ReLU {i} fixed on but Mmin = {lo} <= 0")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn free_count(&self) -> usize {
        self.status.iter().filter(|s| **s == ReluStatus::Free).count()
    }

    /// Same bounds with every ReLU marked free.
    pub fn unpruned(&self) -> BigMBounds {
        BigMBounds {
            status: vec![ReluStatus::Free; self.len()],
            ..self.clone()
        }
    }

    /// `true` when every interval of `self` lies inside the one of `other`.
    pub fn within(&self, other: &BigMBounds) -> bool {
        (0..self.len()).all(|i| self.mmin[i] >= other.mmin[i] && self.mmax[i] <= other.mmax[i])
    }
}

/// Linear constraint `lo ≤ x[from] − x[to] ≤ hi` on two angle slots of `x`
/// (`None` is the reference angle, fixed at zero).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleRow {
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub lo: f64,
    pub hi: f64,
}

/// Engineering constraint sets on the surrogate's inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBox {
    pub n: usize,
    pub ref_bus: usize,
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub angle_rows: Vec<AngleRow>,
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
}

impl BoundBox {
    /// Voltage bounds, line angle-difference limits, the angle box they
    /// imply along shortest paths from the reference bus, and `s ≤ Smax`.
    /// Injections are left unbounded.
    pub fn network(net: &Network) -> BoundBox {
        let (n, m) = (net.n, net.m);
        let pi = core::f64::consts::PI;
        let reach: Vec<f64> = (0..m)
            .map(|l| net.ang_min[l].abs().max(net.ang_max[l].abs()).min(pi))
            .collect();
        let mut dist = vec![f64::INFINITY; n];
        dist[net.ref_bus] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for l in 0..m {
                let (a, b) = (net.from[l], net.to[l]);
                for (s, t) in [(a, b), (b, a)] {
                    if dist[s] + reach[l] < dist[t] {
                        dist[t] = dist[s] + reach[l];
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut x_lo = net.vmin.clone();
        let mut x_hi = net.vmax.clone();
        for b in 0..n {
            if b != net.ref_bus {
                let d = dist[b].min(pi);
                x_lo.push(-d);
                x_hi.push(d);
            }
        }
        let angle_rows = (0..m)
            .filter(|&l| net.ang_min[l].is_finite() || net.ang_max[l].is_finite())
            .map(|l| AngleRow {
                from: net.theta_slot(net.from[l]),
                to: net.theta_slot(net.to[l]),
                lo: net.ang_min[l],
                hi: net.ang_max[l],
            })
            .collect();
        let mut y_lo = vec![f64::NEG_INFINITY; 2 * n + 2 * m];
        let mut y_hi = y_lo.iter().map(|_| f64::INFINITY).collect::<Vec<_>>();
        for l in 0..m {
            y_hi[2 * n + l] = net.smax[l];
            y_hi[2 * n + m + l] = net.smax[l];
            y_lo[2 * n + l] = f64::NEG_INFINITY;
        }
        BoundBox {
            n,
            ref_bus: net.ref_bus,
            x_lo,
            x_hi,
            angle_rows,
            y_lo,
            y_hi,
        }
    }

    /// Add injection ranges implied by generator limits and loads scaled
    /// anywhere within `1 ± envelope`.
    pub fn with_injection_limits(mut self, inst: &UcInstance, envelope: f64) -> BoundBox {
        let n = self.n;
        for b in 0..n {
            let range = |loads: &Vec<Vec<f64>>| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for row in loads {
                    for f in [1.0 - envelope, 1.0 + envelope] {
                        lo = lo.min(row[b] * f);
                        hi = hi.max(row[b] * f);
                    }
                }
                (lo, hi)
            };
            let (pl, ph) = range(&inst.pd);
            let (ql, qh) = range(&inst.qd);
            let units = inst.units.iter().filter(|u| u.bus == b);
            let gp: f64 = units.clone().map(|u| u.pmax.max(0.0)).sum();
            let gq_lo: f64 = units.clone().map(|u| u.qmin.min(0.0)).sum::<f64>()
                + inst.condensers.iter().filter(|c| c.bus == b).map(|c| c.qmin).sum::<f64>();
            let gq_hi: f64 = units.map(|u| u.qmax.max(0.0)).sum::<f64>()
                + inst.condensers.iter().filter(|c| c.bus == b).map(|c| c.qmax).sum::<f64>();
            self.y_lo[b] = -ph;
            self.y_hi[b] = gp - pl;
            self.y_lo[n + b] = gq_lo - qh;
            self.y_hi[n + b] = gq_hi - ql;
        }
        self
    }

    pub fn input_dim(&self) -> usize {
        self.x_lo.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("box input bounds", 2 * self.n - 1, self.x_lo.len())?;
        check_len("box input bounds", self.x_lo.len(), self.x_hi.len())?;
        check_len("box output bounds", self.y_lo.len(), self.y_hi.len())?;
        let bad = self.x_lo.iter().zip(&self.x_hi).chain(self.y_lo.iter().zip(&self.y_hi)).any(|(l, h)| !(l <= h));
        if bad {
            return Err(Error::validation("empty bound box"));
        }
        if self.x_lo.iter().chain(&self.x_hi).any(|v| !v.is_finite()) {
            return Err(Error::validation("input box must be finite"));
        }
        Ok(())
    }

    fn angle_diff(row: &AngleRow, x: &[f64]) -> f64 {
        row.from.map_or(0.0, |s| x[s]) - row.to.map_or(0.0, |s| x[s])
    }

    /// Whether `x` (and, when given, the output `y`) satisfies every set.
    pub fn contains(&self, x: &[f64], y: Option<&[f64]>, tol: f64) -> bool {
        let in_x = x.iter().zip(self.x_lo.iter().zip(&self.x_hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol);
        let in_a = self.angle_rows.iter().all(|r| {
            let d = Self::angle_diff(r, x);
            d >= r.lo - tol && d <= r.hi + tol
        });
        let in_y = y.is_none_or(|y| y.iter().zip(self.y_lo.iter().zip(&self.y_hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol));
        in_x && in_a && in_y
    }
}

/// Interval arithmetic over the input box.
pub fn interval_bounds(model: &CompactPwlModel, bbox: &BoundBox) -> Result<BigMBounds> {
    bbox.validate()?;
    check_len("box input", model.input_dim(), bbox.input_dim())?;
    let rho = model.rho();
    let mut mmin = model.b.clone();
    let mut mmax = model.b.clone();
    for j in 0..model.input_dim() {
        for i in 0..rho {
            let w = model.w1[(j, i)];
            let (a, c) = (w * bbox.x_lo[j], w * bbox.x_hi[j]);
            mmin[i] += a.min(c);
            mmax[i] += a.max(c);
        }
    }
    Ok(BigMBounds {
        mmin,
        mmax,
        status: vec![ReluStatus::Free; rho],
        provenance: vec![Provenance::Interval; rho],
    })
}

/// Fix ReLUs that can never be active (`Mmax ≤ 0`) or are always active
/// (`Mmin > 0`).
pub fn prune(bounds: &BigMBounds) -> BigMBounds {
    let status = (0..bounds.len())
        .map(|i| {
            if bounds.mmax[i] <= 0.0 {
                ReluStatus::FixedOff
            } else if bounds.mmin[i] > 0.0 {
                ReluStatus::FixedOn
            } else {
                ReluStatus::Free
            }
        })
        .collect();
    BigMBounds {
        status,
        ..bounds.clone()
    }
}

/// Variables of one encoded network instance.
#[derive(Debug, Clone, PartialEq)]
pub struct NnFragment {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub zhat: Vec<usize>,
    /// Activation variable; `None` when fixed off. Fixed-on ReLUs reuse
    /// their pre-activation variable.
    pub z: Vec<Option<usize>>,
    pub beta: Vec<Option<usize>>,
}

/// Input variables `x = [v; θ_nonref]` for period `t` with the box's bounds
/// and angle-difference rows.
pub fn add_inputs(milp: &mut MilpModel, bbox: &BoundBox, prefix: &str, t: usize) -> Vec<usize> {
    let n = bbox.n;
    let mut x = Vec::with_capacity(bbox.input_dim());
    for b in 0..n {
        x.push(milp.add_continuous(format!("{prefix}v{b}_{t}"), bbox.x_lo[b], bbox.x_hi[b], VarTag::Voltage { bus: b, t }));
    }
    for b in (0..n).filter(|&b| b != bbox.ref_bus) {
        let s = x.len();
        x.push(milp.add_continuous(format!("{prefix}th{b}_{t}"), bbox.x_lo[s], bbox.x_hi[s], VarTag::Angle { bus: b, t }));
    }
    for (k, r) in bbox.angle_rows.iter().enumerate() {
        let mut terms = Vec::new();
        if let Some(s) = r.from {
            terms.push((x[s], 1.0));
        }
        if let Some(s) = r.to {
            terms.push((x[s], -1.0));
        }
        if terms.is_empty() {
            continue;
        }
        if r.hi.is_finite() {
            milp.add_constraint(format!("{prefix}angmax{k}_{t}"), &terms, Sense::Le, r.hi);
        }
        if r.lo.is_finite() {
            milp.add_constraint(format!("{prefix}angmin{k}_{t}"), &terms, Sense::Ge, r.lo);
        }
    }
    x
}

/// Output variables `y = J*x + r*` (plus `extra` terms per output).
fn add_affine_outputs(
    milp: &mut MilpModel,
    lin: &LinearPfModel,
    x: &[usize],
    extra: &dyn Fn(usize) -> Vec<(usize, f64)>,
    prefix: &str,
    t: usize,
) -> Vec<usize> {
    let mut y = Vec::with_capacity(lin.output_dim());
    for r in 0..lin.output_dim() {
        let yr = milp.add_continuous(format!("{prefix}y{r}_{t}"), f64::NEG_INFINITY, f64::INFINITY, VarTag::Output { index: r, t });
        let mut terms = vec![(yr, 1.0)];
        for (j, &xj) in x.iter().enumerate() {
            terms.push((xj, -lin.jstar[(r, j)]));
        }
        for (v, a) in extra(r) {
            terms.push((v, -a));
        }
        milp.add_constraint(format!("{prefix}out{r}_{t}"), &terms, Sense::Eq, lin.rstar[r]);
        y.push(yr);
    }
    y
}

/// Linear surrogate outputs on existing input variables.
pub fn encode_linear(milp: &mut MilpModel, lin: &LinearPfModel, x: &[usize], prefix: &str, t: usize) -> Result<Vec<usize>> {
    check_len("input variables", lin.input_dim(), x.len())?;
    Ok(add_affine_outputs(milp, lin, x, &|_| Vec::new(), prefix, t))
}

/// Big-M encoding of the compact model on existing input variables.
pub fn encode_relu_network(
    milp: &mut MilpModel,
    model: &CompactPwlModel,
    bounds: &BigMBounds,
    x: &[usize],
    prefix: &str,
    t: usize,
) -> Result<NnFragment> {
    check_len("input variables", model.input_dim(), x.len())?;
    check_len("big-M bounds", model.rho(), bounds.len())?;
    bounds.validate()?;
    let rho = model.rho();
    let (mut zhat, mut z, mut beta) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..rho {
        let (lo, hi) = (bounds.mmin[i], bounds.mmax[i]);
        let zh = milp.add_continuous(format!("{prefix}zh{i}_{t}"), lo, hi, VarTag::PreActivation { relu: i, t });
        let mut terms = vec![(zh, 1.0)];
        for (j, &xj) in x.iter().enumerate() {
            terms.push((xj, -model.w1[(j, i)]));
        }
        milp.add_constraint(format!("{prefix}pre{i}_{t}"), &terms, Sense::Eq, model.b[i]);
        zhat.push(zh);
        match bounds.status[i] {
            ReluStatus::FixedOff => {
                z.push(None);
                beta.push(None);
            }
            ReluStatus::FixedOn => {
                z.push(Some(zh));
                beta.push(None);
            }
            ReluStatus::Free => {
                let zi = milp.add_continuous(format!("{prefix}z{i}_{t}"), 0.0, hi.max(0.0), VarTag::Activation { relu: i, t });
                let bi = milp.add_binary(format!("{prefix}b{i}_{t}"), VarTag::Relu { relu: i, t });
                milp.add_constraint(format!("{prefix}rlo{i}_{t}"), &[(zi, 1.0), (zh, -1.0)], Sense::Ge, 0.0);
                milp.add_constraint(format!("{prefix}rhi{i}_{t}"), &[(zi, 1.0), (zh, -1.0), (bi, -lo)], Sense::Le, -lo);
                milp.add_constraint(format!("{prefix}ron{i}_{t}"), &[(zi, 1.0), (bi, -hi)], Sense::Le, 0.0);
                z.push(Some(zi));
                beta.push(Some(bi));
            }
        }
    }
    let y = {
        let z = &z;
        let extra = move |r: usize| -> Vec<(usize, f64)> {
            (0..rho)
                .filter_map(|i| z[i].map(|v| (v, model.w2[(r, i)])))
                .filter(|(_, a)| *a != 0.0)
                .collect()
        };
        add_affine_outputs(milp, &model.linear, x, &extra, prefix, t)
    };
    Ok(NnFragment {
        x: x.to_vec(),
        y,
        zhat,
        z,
        beta,
    })
}

/// Stand-alone model: inputs in the box, the encoded network, and output
/// bounds from the box.
pub fn encode_on_box(model: &CompactPwlModel, bounds: &BigMBounds, bbox: &BoundBox) -> Result<(MilpModel, NnFragment)> {
    bbox.validate()?;
    check_len("box input", model.input_dim(), bbox.input_dim())?;
    check_len("box output", model.output_dim(), bbox.y_lo.len())?;
    let mut milp = MilpModel::new("nn_box");
    let x = add_inputs(&mut milp, bbox, "", 0);
    let frag = encode_relu_network(&mut milp, model, bounds, &x, "", 0)?;
    for (r, &yr) in frag.y.iter().enumerate() {
        milp.vars[yr].lower = bbox.y_lo[r];
        milp.vars[yr].upper = bbox.y_hi[r];
    }
    Ok((milp, frag))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TightenConfig {
    /// Each bound is relaxed by `widen·(1+|M|)` to absorb solver tolerances.
    pub widen: f64,
    /// Budget for each of the `2ρ` MILP solves.
    pub milp: MilpConfig,
}

impl Default for TightenConfig {
    fn default() -> Self {
        TightenConfig {
            widen: 1e-7,
            milp: MilpConfig {
                gap: 0.0,
                node_limit: 20_000,
                time_limit_secs: 60.0,
                ..MilpConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TightenMode {
    Lp,
    Milp,
}

/// Minimize and maximize each pre-activation over the encoded network and
/// the box. Results are intersected with `start`, so they are never looser.
pub fn tighten_bounds(
    model: &CompactPwlModel,
    bbox: &BoundBox,
    start: &BigMBounds,
    mode: TightenMode,
    cfg: &TightenConfig,
    clock: &dyn Stopwatch,
) -> Result<BigMBounds> {
    let (milp, frag) = encode_on_box(model, start, bbox)?;
    let rho = model.rho();
    let nv = milp.num_vars();
    let mut out = start.clone();
    let mut lp = match mode {
        TightenMode::Lp => Some(DualSimplex::new(&milp.relaxed())?),
        TightenMode::Milp => None,
    };
    for i in 0..rho {
        for sign in [1.0, -1.0] {
            let mut c = vec![0.0; nv];
            c[frag.zhat[i]] = sign;
            // `value` is a valid lower bound on min sign·ẑ_i.
            let value = match lp.as_mut() {
                Some(lp) => {
                    lp.set_objective(&c);
                    match lp.solve()? {
                        LpStatus::Optimal => Some(lp.objective()),
                        LpStatus::Infeasible => {
                            return Err(Error::Infeasible("bound box admits no network state".into()))
                        }
                        _ => None,
                    }
                }
                None => {
                    let mut m = milp.clone();
                    m.objective = c;
                    let sol = solve_milp(&m, &cfg.milp, clock)?;
                    match sol.status {
                        MilpStatus::Infeasible => {
                            return Err(Error::Infeasible("bound box admits no network state".into()))
                        }
                        _ if sol.best_bound.is_finite() => Some(sol.best_bound),
                        _ => None,
                    }
                }
            };
            let Some(v) = value else { continue };
            let slack = cfg.widen * (1.0 + v.abs());
            let prov = match mode {
                TightenMode::Lp => Provenance::Lp,
                TightenMode::Milp => Provenance::Milp,
            };
            if sign > 0.0 {
                let lo = v - slack;
                if lo > out.mmin[i] {
                    out.mmin[i] = lo.min(out.mmax[i]);
                    out.provenance[i] = out.provenance[i].max(prov);
                }
            } else {
                let hi = -v + slack;
                if hi < out.mmax[i] {
                    out.mmax[i] = hi.max(out.mmin[i]);
                    out.provenance[i] = out.provenance[i].max(prov);
                }
            }
        }
    }
    out.status = vec![ReluStatus::Free; rho];
    Ok(out)
}

/// Draw points of the constrained input region by perturbing `anchors`
/// and keeping those whose input and predicted output satisfy the box.
pub fn sample_feasible_inputs(
    model: &CompactPwlModel,
    bbox: &BoundBox,
    anchors: &[Vec<f64>],
    count: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let ok: Vec<&Vec<f64>> = anchors
        .iter()
        .filter(|a| bbox.contains(a, Some(&model.predict(a)), 0.0))
        .collect();
    if ok.is_empty() {
        return Err(Error::validation("no anchor point lies inside the bound box"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(Error::NoSolution("could not sample enough feasible inputs".into()));
        }
        let a = ok[rng.random_range(0..ok.len())];
        let s = scale * rng.random_range(0.0..1.0f64);
        let x: Vec<f64> = a.iter().map(|v| v + s * rng.random_range(-1.0..1.0)).collect();
        if bbox.contains(&x, Some(&model.predict(&x)), 0.0) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Draw points of the constrained input region, including ones on
/// equality or tight output limits. Each activation pattern met near the
/// anchors fixes a polyhedral piece of the region; vertices of a piece are
/// found by LPs with random objectives over the exact encoding, and samples
/// are convex combinations of vertices sharing a piece.
pub fn sample_region_points(
    model: &CompactPwlModel,
    bbox: &BoundBox,
    anchors: &[Vec<f64>],
    count: usize,
    scale: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if anchors.is_empty() {
        return Err(Error::validation("no anchor points given"));
    }
    let bounds = interval_bounds(model, bbox)?.unpruned();
    let (milp, frag) = encode_on_box(model, &bounds, bbox)?;
    let beta: Vec<usize> = frag.beta.iter().map(|b| b.expect("unpruned encodings keep every binary")).collect();
    let mut lp = DualSimplex::new(&milp.relaxed())?;
    let nvars = lp.num_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pieces: Vec<(Vec<bool>, Vec<Vec<f64>>)> = Vec::new();
    let attempts = (count / 4).max(8);
    for _ in 0..attempts {
        let a = &anchors[rng.random_range(0..anchors.len())];
        let x0: Vec<f64> = a.iter().map(|v| v + scale * rng.random_range(-1.0..1.0)).collect();
        let pattern = model.pattern(&x0);
        for (&j, &on) in beta.iter().zip(&pattern) {
            let v = if on { 1.0 } else { 0.0 };
            lp.set_bounds(j, v, v);
        }
        let mut c = vec![0.0; nvars];
        for &j in frag.x.iter().chain(&frag.y) {
            c[j] = rng.random_range(-1.0..1.0);
        }
        lp.set_objective(&c);
        if lp.solve()? != LpStatus::Optimal {
            continue;
        }
        let sol = lp.x();
        let x: Vec<f64> = frag.x.iter().map(|&j| sol[j]).collect();
        match pieces.iter_mut().find(|(p, _)| *p == pattern) {
            Some((_, v)) => v.push(x),
            None => pieces.push((pattern, vec![x])),
        }
    }
    if pieces.is_empty() {
        return Err(Error::NoSolution("no activation piece near the anchors is feasible".into()));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (_, verts) = &pieces[rng.random_range(0..pieces.len())];
        let k = verts.len().min(4);
        let picks: Vec<&Vec<f64>> = (0..k).map(|_| &verts[rng.random_range(0..verts.len())]).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0f64)).collect();
        let total: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let dim = picks[0].len();
        out.push((0..dim).map(|d| picks.iter().zip(&w).map(|(p, wi)| p[d] * wi).sum::<f64>() / total).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::lp::{solve_lp, MilpConfig};
    use crate::NoClock;
    use alloc::string::String;

    fn toy_model(nin: usize, nout: usize, rho: usize, seed: u64) -> CompactPwlModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || rng.random_range(-1.0..1.0);
        let linear = LinearPfModel {
            jstar: Matrix::from_fn(nout, nin, |_, _| g()),
            rstar: (0..nout).map(|_| g()).collect(),
            x0: vec![0.0; nin],
            net_id: String::from("toy"),
        };
        let w1 = Matrix::from_fn(nin, rho, |_, _| g());
        let b = (0..rho).map(|_| 0.3 * g()).collect();
        let mut m = CompactPwlModel::from_linear(linear, w1, b).unwrap();
        m.w2 = Matrix::from_fn(nout, rho, |_, _| g());
        m
    }

    /// `n = 2`: inputs `[v1, v2, θ2]`, outputs of length `2n + 2m` with
    /// `m = 1`.
    fn toy_box() -> BoundBox {
        BoundBox {
            n: 2,
            ref_bus: 0,
            x_lo: vec![0.9, 0.9, -0.3],
            x_hi: vec![1.1, 1.1, 0.3],
            angle_rows: vec![AngleRow {
                from: None,
                to: Some(2),
                lo: -0.2,
                hi: 0.2,
            }],
            y_lo: vec![f64::NEG_INFINITY; 6],
            y_hi: vec![f64::INFINITY; 6],
        }
    }

    fn fixed_linear(nin: usize, nout: usize) -> LinearPfModel {
        LinearPfModel {
            jstar: Matrix::zeros(nout, nin),
            rstar: vec![0.0; nout],
            x0: vec![0.0; nin],
            net_id: String::new(),
        }
    }

    #[test]
    fn interval_bounds_of_voltage_difference() {
        let w1 = Matrix::from_row_major(3, 1, vec![1.0, -1.0, 0.0]).unwrap();
        let m = CompactPwlModel::from_linear(fixed_linear(3, 6), w1, vec![0.0]).unwrap();
        let bd = interval_bounds(&m, &toy_box()).unwrap();
        assert!((bd.mmax[0] - 0.2).abs() < 1e-12 && (bd.mmin[0] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_bias_bounds() {
        let m = CompactPwlModel::from_linear(fixed_linear(3, 6), Matrix::zeros(3, 1), vec![0.7]).unwrap();
        let bd = interval_bounds(&m, &toy_box()).unwrap();
        assert_eq!((bd.mmin[0], bd.mmax[0]), (0.7, 0.7));
    }

    #[test]
    fn prune_rule() {
        let b = BigMBounds {
            mmin: vec![-1.0, 0.05, -1.0, -0.3],
            mmax: vec![-0.1, 1.0, 1.0, 0.0],
            status: vec![ReluStatus::Free; 4],
            provenance: vec![Provenance::Interval; 4],
        };
        let p = prune(&b);
        assert_eq!(
            p.status,
            vec![ReluStatus::FixedOff, ReluStatus::FixedOn, ReluStatus::Free, ReluStatus::FixedOff]
        );
        p.validate().unwrap();
    }

    /// Fix the inputs and every binary, then solve the remaining LP.
    fn output_at(model: &CompactPwlModel, bounds: &BigMBounds, x: &[f64], beta: &[bool]) -> Option<Vec<f64>> {
        let mut bbox = toy_box();
        bbox.x_lo = x.to_vec();
        bbox.x_hi = x.to_vec();
        bbox.angle_rows.clear();
        let (mut milp, frag) = encode_on_box(model, bounds, &bbox).ok()?;
        for (i, b) in frag.beta.iter().enumerate() {
            if let Some(j) = *b {
                let v = f64::from(u8::from(beta[i]));
                milp.vars[j].lower = v;
                milp.vars[j].upper = v;
            }
        }
        let sol = solve_lp(&milp.relaxed()).ok()?;
        (sol.status == LpStatus::Optimal).then(|| frag.y.iter().map(|&j| sol.x[j]).collect())
    }

    #[test]
    fn every_feasible_binary_pattern_reproduces_predict() {
        let model = toy_model(3, 6, 3, 4);
        let bounds = interval_bounds(&model, &toy_box()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..25 {
            let x = vec![rng.random_range(0.9..1.1), rng.random_range(0.9..1.1), rng.random_range(-0.3..0.3)];
            let want = model.predict(&x);
            let mut feasible = 0;
            for pat in 0..8u32 {
                let beta: Vec<bool> = (0..3).map(|i| pat >> i & 1 == 1).collect();
                if let Some(y) = output_at(&model, &bounds, &x, &beta) {
                    feasible += 1;
                    for (a, b) in y.iter().zip(&want) {
                        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
                    }
                }
            }
            assert!(feasible >= 1);
        }
    }

    #[test]
    fn zero_preactivation_admits_both_binary_values() {
        let mut model = toy_model(3, 6, 1, 5);
        let x = vec![1.0, 1.0, 0.1];
        let zh: f64 = (0..3).map(|j| model.w1[(j, 0)] * x[j]).sum();
        model.b[0] = -zh;
        let bounds = interval_bounds(&model, &toy_box()).unwrap();
        let off = output_at(&model, &bounds, &x, &[false]).unwrap();
        let on = output_at(&model, &bounds, &x, &[true]).unwrap();
        for (a, b) in off.iter().zip(&on) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn all_fixed_off_fragment_is_linear_only() {
        let model = toy_model(3, 6, 2, 6);
        let bounds = BigMBounds {
            mmin: vec![-2.0; 2],
            mmax: vec![-1.0; 2],
            status: vec![ReluStatus::FixedOff; 2],
            provenance: vec![Provenance::Interval; 2],
        };
        let (milp, frag) = encode_on_box(&model, &bounds, &toy_box()).unwrap();
        assert_eq!(milp.binaries().count(), 0);
        assert!(frag.z.iter().all(Option::is_none));
    }

    #[test]
    fn tightening_chain_is_nested_and_valid() {
        for seed in 0..5 {
            let model = toy_model(3, 6, 4, 10 + seed);
            let mut bbox = toy_box();
            // Cap one output to carve away part of the input region.
            bbox.y_hi[0] = model.predict(&[1.0, 1.0, 0.0])[0];
            let ib = interval_bounds(&model, &bbox).unwrap();
            let lb = tighten_bounds(&model, &bbox, &ib, TightenMode::Lp, &TightenConfig::default(), &NoClock).unwrap();
            let mb = tighten_bounds(&model, &bbox, &lb, TightenMode::Milp, &TightenConfig::default(), &NoClock).unwrap();
            assert!(lb.within(&ib) && mb.within(&lb));
            let xs = sample_feasible_inputs(&model, &bbox, &[vec![1.0, 1.0, 0.0]], 500, 0.2, seed).unwrap();
            for x in &xs {
                let z = model.preactivation(x);
                for i in 0..4 {
                    assert!(z[i] >= mb.mmin[i] && z[i] <= mb.mmax[i]);
                }
            }
        }
    }

    #[test]
    fn region_points_satisfy_box_and_tight_output() {
        let model = toy_model(3, 6, 4, 31);
        let mut bbox = toy_box();
        // Pin one output to its value at the anchor, giving an equality limit.
        let y0 = model.predict(&[1.0, 1.0, 0.0])[0];
        bbox.y_lo[0] = y0;
        bbox.y_hi[0] = y0;
        let xs = sample_region_points(&model, &bbox, &[vec![1.0, 1.0, 0.0]], 300, 0.2, 4).unwrap();
        assert_eq!(xs.len(), 300);
        for x in &xs {
            assert!(bbox.contains(x, Some(&model.predict(x)), 1e-7));
        }
    }

    #[test]
    fn output_limit_tightens_a_relu() {
        // One ReLU reading θ2 with the first output capped so that θ2 ≤ 0.
        let linear = LinearPfModel {
            jstar: Matrix::from_fn(6, 3, |r, c| if r == 0 && c == 2 { 1.0 } else { 0.0 }),
            rstar: vec![0.0; 6],
            x0: vec![0.0; 3],
            net_id: String::new(),
        };
        let w1 = Matrix::from_row_major(3, 1, vec![0.0, 0.0, 1.0]).unwrap();
        let model = CompactPwlModel::from_linear(linear, w1, vec![0.0]).unwrap();
        let mut bbox = toy_box();
        bbox.y_hi[0] = 0.0;
        let ib = interval_bounds(&model, &bbox).unwrap();
        let lb = tighten_bounds(&model, &bbox, &ib, TightenMode::Lp, &TightenConfig::default(), &NoClock).unwrap();
        assert!((ib.mmax[0] - 0.3).abs() < 1e-12);
        assert!(lb.mmax[0] <= 1e-6);
    }

    #[test]
    fn pruned_and_free_encodings_share_optima() {
        let model = toy_model(3, 6, 4, 21);
        let bbox = toy_box();
        let ib = interval_bounds(&model, &bbox).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Shift two biases so one ReLU is always off and one always on.
        let mut m = model.clone();
        m.b[0] -= ib.mmax[0] + 0.05;
        m.b[1] += -ib.mmin[1] + 0.05;
        let base = interval_bounds(&m, &bbox).unwrap();
        let pruned = prune(&base);
        assert_eq!(pruned.status[0], ReluStatus::FixedOff);
        assert_eq!(pruned.status[1], ReluStatus::FixedOn);
        let (a, fa) = encode_on_box(&m, &pruned, &bbox).unwrap();
        let (b, fb) = encode_on_box(&m, &pruned.unpruned(), &bbox).unwrap();
        for _ in 0..10 {
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let solve = |mut mm: MilpModel, y: &[usize]| {
                for (k, &j) in y.iter().enumerate() {
                    mm.objective[j] = w[k];
                }
                solve_milp(&mm, &MilpConfig::exact(), &NoClock).unwrap().objective
            };
            let (oa, ob) = (solve(a.clone(), &fa.y), solve(b.clone(), &fb.y));
            assert!((oa - ob).abs() <= 1e-7, "{oa} vs {ob}");
        }
    }
}
