//! The compact piecewise-linear surrogate `y = J*x + r* + w2 σ(w1ᵀx + b)`,
//! the direct ReLU baseline, and their training.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{PfDataset, Split};
use crate::encode::BigMBounds;
use crate::error::{check_len, Error, Result};
use crate::jacobian::LinearPfModel;
use crate::linalg::Matrix;
use crate::math::{norm1, sqrt};
use crate::Stopwatch;

/// Compact model: a physics-based affine map plus a low-rank ReLU update.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactPwlModel {
    pub linear: LinearPfModel,
    /// `(2n-1) × ρ`.
    pub w1: Matrix,
    /// `(2n+2m) × ρ`.
    pub w2: Matrix,
    pub b: Vec<f64>,
    /// `true` marks an entry pinned to zero, same layout as `w1`.
    pub mask_w1: Vec<bool>,
    pub mask_w2: Vec<bool>,
    pub bounds: Option<BigMBounds>,
}

fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// `w1ᵀx + b`.
fn preact(w1: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for (j, xj) in x.iter().enumerate() {
        if *xj == 0.0 {
            continue;
        }
        for (zi, w) in z.iter_mut().zip(w1.row(j)) {
            *zi += w * xj;
        }
    }
    z
}

impl CompactPwlModel {
    /// Model with `w2 = 0`, which equals the linear model everywhere.
    pub fn from_linear(linear: LinearPfModel, w1: Matrix, b: Vec<f64>) -> Result<CompactPwlModel> {
        let rho = b.len();
        let w2 = Matrix::zeros(linear.output_dim(), rho);
        let m = CompactPwlModel {
            mask_w1: vec![false; w1.rows() * w1.cols()],
            mask_w2: vec![false; w2.rows() * rho],
            linear,
            w1,
            w2,
            b,
            bounds: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn rho(&self) -> usize {
        self.b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.linear.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.linear.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let (nin, nout, rho) = (self.input_dim(), self.output_dim(), self.rho());
        if rho == 0 {
            return Err(Error::validation("model needs at least one ReLU"));
        }
        check_len("w1 rows", nin, self.w1.rows())?;
        check_len("w1 columns", rho, self.w1.cols())?;
        check_len("w2 rows", nout, self.w2.rows())?;
        check_len("w2 columns", rho, self.w2.cols())?;
        check_len("w1 mask", nin * rho, self.mask_w1.len())?;
        check_len("w2 mask", nout * rho, self.mask_w2.len())?;
        check_len("residual", nout, self.linear.rstar.len())?;
        let finite = self.w1.is_finite()
            && self.w2.is_finite()
            && self.linear.jstar.is_finite()
            && self.b.iter().chain(&self.linear.rstar).all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("model parameters"));
        }
        let pinned = |m: &Matrix, mask: &[bool]| m.as_slice().iter().zip(mask).any(|(w, k)| *k && *w != 0.0);
        if pinned(&self.w1, &self.mask_w1) || pinned(&self.w2, &self.mask_w2) {
            return Err(Error::validation("masked weight is not zero"));
        }
        if let Some(bd) = &self.bounds {
            check_len("big-M bounds", rho, bd.mmin.len())?;
            bd.validate()?;
        }
        Ok(())
    }

    pub fn preactivation(&self, x: &[f64]) -> Vec<f64> {
        preact(&self.w1, &self.b, x)
    }

    /// Activation pattern `π_i = [ẑ_i > 0]`.
    pub fn pattern(&self, x: &[f64]) -> Vec<bool> {
        self.preactivation(x).iter().map(|z| *z > 0.0).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = self.preactivation(x).into_iter().map(relu).collect();
        let mut y = self.linear.predict(x);
        let corr = self.w2.mul_vec(&z);
        for (yi, c) in y.iter_mut().zip(corr) {
            *yi += c;
        }
        y
    }

    /// `J* + w2 diag(π) w1ᵀ`.
    pub fn local_jacobian(&self, pattern: &[bool]) -> Matrix {
        let mut j = self.linear.jstar.clone();
        for (i, &on) in pattern.iter().enumerate() {
            if !on {
                continue;
            }
            for r in 0..j.rows() {
                let a = self.w2[(r, i)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..j.cols() {
                    j[(r, c)] += a * self.w1[(c, i)];
                }
            }
        }
        j
    }

    /// Same model with the ReLU update removed.
    pub fn without_update(&self) -> CompactPwlModel {
        let mut m = self.clone();
        m.w2 = Matrix::zeros(self.w2.rows(), self.w2.cols());
        m
    }

    /// Fraction of `(w1, w2)` entries equal to zero.
    pub fn zero_fraction(&self) -> f64 {
        let all = self.w1.as_slice().iter().chain(self.w2.as_slice());
        let total = self.w1.as_slice().len() + self.w2.as_slice().len();
        all.filter(|w| **w == 0.0).count() as f64 / total as f64
    }

    /// ReLUs whose input or output weights are all zero.
    pub fn dead_relus(&self) -> Vec<usize> {
        (0..self.rho())
            .filter(|&i| {
                (0..self.w1.rows()).all(|j| self.w1[(j, i)] == 0.0)
                    || (0..self.w2.rows()).all(|r| self.w2[(r, i)] == 0.0)
            })
            .collect()
    }
}

/// Direct ReLU network `y = w2 σ(w1ᵀx + b) + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectNn {
    pub w1: Matrix,
    pub w2: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl DirectNn {
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = preact(&self.w1, &self.b, x).into_iter().map(relu).collect();
        let mut y = self.w2.mul_vec(&z);
        for (yi, c) in y.iter_mut().zip(&self.c) {
            *yi += c;
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub sparsity_target: f64,
    /// Full-training-set loss is recorded (and the best parameters kept)
    /// every this many steps.
    pub checkpoint_every: usize,
    pub time_limit_secs: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 2.5e-4,
            batch_size: 75,
            steps: 75_000,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            sparsity_target: 0.25,
            checkpoint_every: 500,
            time_limit_secs: 900.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self, rows: usize) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > rows {
            return Err(Error::validation(format!(
                "batch size {} must be between 1 and the {rows} training rows",
                self.batch_size
            )));
        }
        if !(0.0..1.0).contains(&self.sparsity_target) {
            return Err(Error::validation("sparsity target must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// `(step, mean squared error over the training rows)`.
pub type TrainingCurve = Vec<(usize, f64)>;

/// Trainable parameters of one hidden ReLU layer.
#[derive(Debug, Clone, PartialEq)]
struct Params {
    w1: Matrix,
    w2: Matrix,
    b: Vec<f64>,
    /// Output bias; trained only when `train_c`.
    c: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Grad {
    w1: Vec<f64>,
    w2: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

/// Mean over `rows` of `‖w2 σ(w1ᵀx + b) + c − t‖²` and its gradient.
fn loss_and_grad(p: &Params, xs: &[Vec<f64>], ts: &[Vec<f64>], rows: &[usize]) -> (f64, Grad) {
    let (nin, rho) = (p.w1.rows(), p.w1.cols());
    let nout = p.w2.rows();
    let mut g = Grad {
        w1: vec![0.0; nin * rho],
        w2: vec![0.0; nout * rho],
        b: vec![0.0; rho],
        c: vec![0.0; nout],
    };
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    let mut dz = vec![0.0; rho];
    for &k in rows {
        let x = &xs[k];
        let h = preact(&p.w1, &p.b, x);
        let a: Vec<f64> = h.iter().map(|v| relu(*v)).collect();
        dz.iter_mut().for_each(|d| *d = 0.0);
        for r in 0..nout {
            let wr = p.w2.row(r);
            let e = crate::math::dot(wr, &a) + p.c[r] - ts[k][r];
            loss += e * e * scale;
            let de = 2.0 * e * scale;
            g.c[r] += de;
            let gr = &mut g.w2[r * rho..(r + 1) * rho];
            for i in 0..rho {
                gr[i] += de * a[i];
                dz[i] += de * wr[i];
            }
        }
        for i in 0..rho {
            if h[i] <= 0.0 {
                dz[i] = 0.0;
            }
            g.b[i] += dz[i];
        }
        for (j, xj) in x.iter().enumerate() {
            let gj = &mut g.w1[j * rho..(j + 1) * rho];
            for i in 0..rho {
                gj[i] += dz[i] * xj;
            }
        }
    }
    (loss, g)
}

fn full_loss(p: &Params, xs: &[Vec<f64>], ts: &[Vec<f64>]) -> f64 {
    let rows: Vec<usize> = (0..xs.len()).collect();
    let mut loss = 0.0;
    for &k in &rows {
        let h = preact(&p.w1, &p.b, &xs[k]);
        let a: Vec<f64> = h.into_iter().map(relu).collect();
        let y = p.w2.mul_vec(&a);
        for r in 0..y.len() {
            let e = y[r] + p.c[r] - ts[k][r];
            loss += e * e;
        }
    }
    loss / rows.len().max(1) as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(len: usize) -> Adam {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    fn step(&mut self, w: &mut [f64], g: &[f64], mask: Option<&[bool]>, cfg: &TrainConfig, t: i32) {
        let c1 = 1.0 - crate::math::powi(cfg.beta1, t);
        let c2 = 1.0 - crate::math::powi(cfg.beta2, t);
        for k in 0..w.len() {
            if mask.is_some_and(|m| m[k]) {
                continue;
            }
            self.m[k] = cfg.beta1 * self.m[k] + (1.0 - cfg.beta1) * g[k];
            self.v[k] = cfg.beta2 * self.v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            w[k] -= cfg.learning_rate * mh / (sqrt(vh) + cfg.epsilon);
        }
    }
}

/// Mini-batch Adam on one hidden layer. Returns the best parameters seen
/// at a checkpoint (the starting parameters included) and the loss curve.
#[allow(clippy::too_many_arguments)]
fn fit(
    start: Params,
    masks: (&[bool], &[bool]),
    train_c: bool,
    xs: &[Vec<f64>],
    ts: &[Vec<f64>],
    cfg: &TrainConfig,
    clock: &dyn Stopwatch,
) -> Result<(Params, TrainingCurve)> {
    let t0 = clock.elapsed_secs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xA5A5_5A5A);
    let mut p = start;
    let mut best = p.clone();
    let mut best_loss = full_loss(&p, xs, ts);
    if !best_loss.is_finite() {
        return Err(Error::NonFinite("initial training loss"));
    }
    let mut curve = vec![(0, best_loss)];
    let (mut a1, mut a2, mut ab, mut ac) = (
        Adam::new(p.w1.as_slice().len()),
        Adam::new(p.w2.as_slice().len()),
        Adam::new(p.b.len()),
        Adam::new(p.c.len()),
    );
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut cursor = order.len();
    let every = cfg.checkpoint_every.max(1);
    for step in 1..=cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let (loss, g) = loss_and_grad(&p, xs, ts, &batch);
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss (reduce the learning rate)"));
        }
        let t = step.min(i32::MAX as usize) as i32;
        a1.step(p.w1.as_mut_slice(), &g.w1, Some(masks.0), cfg, t);
        a2.step(p.w2.as_mut_slice(), &g.w2, Some(masks.1), cfg, t);
        ab.step(&mut p.b, &g.b, None, cfg, t);
        if train_c {
            ac.step(&mut p.c, &g.c, None, cfg, t);
        }
        let out_of_time = clock.elapsed_secs() - t0 > cfg.time_limit_secs;
        if step % every == 0 || step == cfg.steps || out_of_time {
            let l = full_loss(&p, xs, ts);
            if !l.is_finite() {
                return Err(Error::NonFinite("training loss (reduce the learning rate)"));
            }
            curve.push((step, l));
            if l < best_loss {
                best_loss = l;
                best = p.clone();
            }
        }
        if out_of_time {
            break;
        }
    }
    Ok((best, curve))
}

fn train_rows(ds: &PfDataset) -> Vec<usize> {
    let idx = ds.indices(Split::Train);
    if idx.is_empty() {
        (0..ds.len()).collect()
    } else {
        idx
    }
}

/// Input-layer initialization: `w1` unit Gaussian over `√nin`, and each
/// bias chosen so its hyperplane passes through a random training input.
fn init_layer(xs: &[Vec<f64>], nin: usize, rho: usize, rng: &mut ChaCha8Rng) -> (Matrix, Vec<f64>) {
    let s = 1.0 / sqrt(nin as f64);
    let w1 = Matrix::from_fn(nin, rho, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * s
    });
    let b = (0..rho)
        .map(|i| {
            let x = &xs[rng.random_range(0..xs.len())];
            -(0..nin).map(|j| w1[(j, i)] * x[j]).sum::<f64>()
        })
        .collect();
    (w1, b)
}

fn check_dims(ds: &PfDataset, nin: usize, nout: usize) -> Result<()> {
    check_len("model input", ds.input_dim(), nin)?;
    check_len("model output", ds.output_dim(), nout)?;
    if ds.is_empty() {
        return Err(Error::validation("empty dataset"));
    }
    Ok(())
}

/// Train a fresh compact model with `rho` ReLUs on the training split.
pub fn train_compact(
    ds: &PfDataset,
    linear: &LinearPfModel,
    rho: usize,
    cfg: &TrainConfig,
    clock: &dyn Stopwatch,
) -> Result<(CompactPwlModel, TrainingCurve)> {
    check_dims(ds, linear.input_dim(), linear.output_dim())?;
    if rho == 0 {
        return Err(Error::validation("model needs at least one ReLU"));
    }
    let rows = train_rows(ds);
    let xs: Vec<Vec<f64>> = rows.iter().map(|&k| ds.x[k].clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w1, b) = init_layer(&xs, linear.input_dim(), rho, &mut rng);
    let model = CompactPwlModel::from_linear(linear.clone(), w1, b)?;
    retrain(model, ds, cfg, clock)
}

/// Continue training `model` on the training split, respecting its masks.
pub fn retrain(
    model: CompactPwlModel,
    ds: &PfDataset,
    cfg: &TrainConfig,
    clock: &dyn Stopwatch,
) -> Result<(CompactPwlModel, TrainingCurve)> {
    model.validate()?;
    check_dims(ds, model.input_dim(), model.output_dim())?;
    let rows = train_rows(ds);
    cfg.validate(rows.len())?;
    let xs: Vec<Vec<f64>> = rows.iter().map(|&k| ds.x[k].clone()).collect();
    let ts: Vec<Vec<f64>> = rows
        .iter()
        .map(|&k| {
            let lin = model.linear.predict(&ds.x[k]);
            ds.y[k].iter().zip(lin).map(|(y, l)| y - l).collect()
        })
        .collect();
    let start = Params {
        w1: model.w1.clone(),
        w2: model.w2.clone(),
        b: model.b.clone(),
        c: vec![0.0; model.output_dim()],
    };
    let (p, curve) = fit(start, (&model.mask_w1, &model.mask_w2), false, &xs, &ts, cfg, clock)?;
    let mut out = model;
    out.w1 = p.w1;
    out.w2 = p.w2;
    out.b = p.b;
    out.bounds = None;
    Ok((out, curve))
}

/// Train the direct ReLU baseline with `width` hidden units.
pub fn train_direct(
    ds: &PfDataset,
    width: usize,
    cfg: &TrainConfig,
    clock: &dyn Stopwatch,
) -> Result<(DirectNn, TrainingCurve)> {
    let (nin, nout) = (ds.input_dim(), ds.output_dim());
    check_dims(ds, nin, nout)?;
    if width == 0 {
        return Err(Error::validation("network needs at least one ReLU"));
    }
    let rows = train_rows(ds);
    cfg.validate(rows.len())?;
    let xs: Vec<Vec<f64>> = rows.iter().map(|&k| ds.x[k].clone()).collect();
    let ts: Vec<Vec<f64>> = rows.iter().map(|&k| ds.y[k].clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (w1, b) = init_layer(&xs, nin, width, &mut rng);
    let mut c = vec![0.0; nout];
    for t in &ts {
        for (ci, v) in c.iter_mut().zip(t) {
            *ci += v / ts.len() as f64;
        }
    }
    let start = Params {
        w1,
        w2: Matrix::zeros(nout, width),
        b,
        c,
    };
    let m1 = vec![false; nin * width];
    let m2 = vec![false; nout * width];
    let (p, curve) = fit(start, (&m1, &m2), true, &xs, &ts, cfg, clock)?;
    Ok((
        DirectNn {
            w1: p.w1,
            w2: p.w2,
            b: p.b,
            c: p.c,
        },
        curve,
    ))
}

/// Pin the smallest-magnitude entries of each weight matrix to zero so
/// that at least `target` of its entries are zero.
pub fn sparsify(model: &CompactPwlModel, target: f64) -> Result<CompactPwlModel> {
    if !(0.0..1.0).contains(&target) {
        return Err(Error::validation("sparsity target must lie in [0, 1)"));
    }
    let mut out = model.clone();
    for (w, mask) in [(&mut out.w1, &mut out.mask_w1), (&mut out.w2, &mut out.mask_w2)] {
        let vals = w.as_mut_slice();
        let need = libm::ceil(target * vals.len() as f64) as usize;
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs()).then(a.cmp(&b)));
        for &k in order.iter().take(need) {
            vals[k] = 0.0;
            mask[k] = true;
        }
    }
    out.bounds = None;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyReport {
    pub error_before: f64,
    pub error_after: f64,
    pub zero_fraction: f64,
    /// ReLUs left with no input or no output weight; candidates for pruning.
    pub dead_relus: Vec<usize>,
    pub curve: TrainingCurve,
}

/// Sparsify and retrain with the pinned entries held at zero. Errors are
/// mean L1 over the test split (training split when there is none).
pub fn sparsify_retrain(
    model: &CompactPwlModel,
    ds: &PfDataset,
    target: f64,
    cfg: &TrainConfig,
    clock: &dyn Stopwatch,
) -> Result<(CompactPwlModel, SparsifyReport)> {
    let split = if ds.indices(Split::Test).is_empty() {
        Split::Train
    } else {
        Split::Test
    };
    let before = evaluate_model(model, None, ds, Some(split))?.mean_compact;
    let sparse = sparsify(model, target)?;
    let (trained, curve) = retrain(sparse, ds, cfg, clock)?;
    let after = evaluate_model(&trained, None, ds, Some(split))?.mean_compact;
    Ok((
        trained.clone(),
        SparsifyReport {
            error_before: before,
            error_after: after,
            zero_fraction: trained.zero_fraction(),
            dead_relus: trained.dead_relus(),
            curve,
        },
    ))
}

/// Per-sample L1 errors of the linear, compact and (optionally) direct
/// models.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub linear: Vec<f64>,
    pub compact: Vec<f64>,
    pub direct: Option<Vec<f64>>,
    pub mean_linear: f64,
    pub mean_compact: f64,
    pub mean_direct: Option<f64>,
}

impl ErrorStats {
    pub fn linear_over_compact(&self) -> f64 {
        self.mean_linear / self.mean_compact
    }

    pub fn direct_over_compact(&self) -> Option<f64> {
        self.mean_direct.map(|d| d / self.mean_compact)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn evaluate_model(
    model: &CompactPwlModel,
    direct: Option<&DirectNn>,
    ds: &PfDataset,
    split: Option<Split>,
) -> Result<ErrorStats> {
    check_dims(ds, model.input_dim(), model.output_dim())?;
    let rows: Vec<usize> = match split {
        Some(s) => ds.indices(s),
        None => (0..ds.len()).collect(),
    };
    if rows.is_empty() {
        return Err(Error::validation("no rows to evaluate"));
    }
    let l1 = |pred: Vec<f64>, y: &[f64]| norm1(&pred.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>());
    let linear: Vec<f64> = rows.iter().map(|&k| l1(model.linear.predict(&ds.x[k]), &ds.y[k])).collect();
    let compact: Vec<f64> = rows.iter().map(|&k| l1(model.predict(&ds.x[k]), &ds.y[k])).collect();
    let direct: Option<Vec<f64>> =
        direct.map(|d| rows.iter().map(|&k| l1(d.predict(&ds.x[k]), &ds.y[k])).collect());
    Ok(ErrorStats {
        mean_linear: mean(&linear),
        mean_compact: mean(&compact),
        mean_direct: direct.as_deref().map(mean),
        linear,
        compact,
        direct,
    })
}

/// One observed linearization region.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternRegion {
    pub pattern: Vec<bool>,
    pub count: usize,
    pub jacobian: Matrix,
}

/// Group `inputs` by activation pattern, with each region's Jacobian.
pub fn enumerate_activation_patterns(model: &CompactPwlModel, inputs: &[Vec<f64>]) -> Vec<PatternRegion> {
    let mut counts: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    for x in inputs {
        *counts.entry(model.pattern(x)).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(pattern, count)| PatternRegion {
            jacobian: model.local_jacobian(&pattern),
            pattern,
            count,
        })
        .collect()
}
