//! Line-oriented text formats for datasets, models, schedules, Jacobian
//! dumps and feasibility reports.
//!
//! Every file starts with a `pwlgrid-<kind> 1` magic line. Numeric blocks
//! are introduced by `<name> <rows> <cols>` and followed by `rows` lines of
//! whitespace-separated values; an absent optional block is written as
//! `<name> none`. Floats use the shortest representation that parses back
//! to the same bits.

use std::fmt::Write as _;

use pwlgrid_core::acopf::FeasibilityReport;
use pwlgrid_core::data::{PfDataset, SampleMeta, Split};
use pwlgrid_core::encode::{BigMBounds, Provenance, ReluStatus};
use pwlgrid_core::grid::Network;
use pwlgrid_core::jacobian::LinearPfModel;
use pwlgrid_core::linalg::Matrix;
use pwlgrid_core::nn::{CompactPwlModel, DirectNn, TrainingCurve};
use pwlgrid_core::schedule::UcSchedule;

use crate::FormatError;

fn f(v: f64) -> String {
    format!("{v:e}")
}

fn join<T>(vals: &[T], fmt: impl Fn(&T) -> String) -> String {
    vals.iter().map(fmt).collect::<Vec<_>>().join(" ")
}

struct Out(String);

impl Out {
    fn new(kind: &str) -> Out {
        Out(format!("pwlgrid-{kind} 1\n"))
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.0.push_str(s.as_ref());
        self.0.push('\n');
    }

    fn rows(&mut self, name: &str, rows: &[Vec<f64>], cols: usize) {
        self.line(format!("{name} {} {cols}", rows.len()));
        for r in rows {
            self.line(join(r, |v| f(*v)));
        }
    }

    fn opt_rows(&mut self, name: &str, rows: Option<&Vec<Vec<f64>>>) {
        match rows {
            Some(r) => self.rows(name, r, r.first().map_or(0, Vec::len)),
            None => self.line(format!("{name} none")),
        }
    }

    fn bits(&mut self, name: &str, rows: &[Vec<bool>]) {
        self.line(format!("{name} {} {}", rows.len(), rows.first().map_or(0, Vec::len)));
        for r in rows {
            self.line(join(r, |b| u8::from(*b).to_string()));
        }
    }

    fn matrix(&mut self, name: &str, m: &Matrix) {
        let rows: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
        self.rows(name, &rows, m.cols());
    }

    fn vector(&mut self, name: &str, v: &[f64]) {
        self.rows(name, &[v.to_vec()], v.len());
    }
}

struct In<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> In<'a> {
    fn new(text: &'a str, kind: &str) -> Result<In<'a>, FormatError> {
        let mut r = In {
            lines: text.lines().enumerate().peekable(),
            last: 0,
        };
        let magic = r.next_line()?;
        if magic.trim() != format!("pwlgrid-{kind} 1") {
            return Err(FormatError::at(1, format!("expected a pwlgrid-{kind} file")));
        }
        Ok(r)
    }

    fn err(&self, msg: impl Into<String>) -> FormatError {
        FormatError::at(self.last, msg)
    }

    fn next_line(&mut self) -> Result<&'a str, FormatError> {
        loop {
            let (k, l) = self.lines.next().ok_or_else(|| FormatError::at(self.last, "unexpected end of file"))?;
            self.last = k + 1;
            if !l.trim().is_empty() && !l.trim_start().starts_with('#') {
                return Ok(l);
            }
        }
    }

    /// `key value...` line; returns the remainder.
    fn keyed(&mut self, key: &str) -> Result<&'a str, FormatError> {
        let l = self.next_line()?.trim();
        match l.split_once(char::is_whitespace) {
            Some((k, rest)) if k == key => Ok(rest.trim()),
            None if l == key => Ok(""),
            _ => Err(self.err(format!("expected `{key}`, found {l:?}"))),
        }
    }

    fn usize(&self, s: &str) -> Result<usize, FormatError> {
        s.parse().map_err(|_| self.err(format!("invalid integer {s:?}")))
    }

    fn num(&self, s: &str) -> Result<f64, FormatError> {
        s.parse().map_err(|_| self.err(format!("invalid number {s:?}")))
    }

    fn header(&mut self, name: &str) -> Result<Option<(usize, usize)>, FormatError> {
        let rest = self.keyed(name)?;
        if rest == "none" {
            return Ok(None);
        }
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(self.err(format!("block `{name}` needs row and column counts")));
        }
        Ok(Some((self.usize(parts[0])?, self.usize(parts[1])?)))
    }

    fn row_tokens(&mut self, cols: usize) -> Result<Vec<&'a str>, FormatError> {
        let l = if cols == 0 {
            // Empty rows are written as blank lines; consume one.
            let (k, l) = self.lines.next().ok_or_else(|| self.err("unexpected end of file"))?;
            self.last = k + 1;
            l
        } else {
            self.next_line()?
        };
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != cols {
            return Err(self.err(format!("expected {cols} values, found {}", toks.len())));
        }
        Ok(toks)
    }

    fn body(&mut self, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>, FormatError> {
        (0..rows)
            .map(|_| {
                let toks = self.row_tokens(cols)?;
                toks.iter().map(|t| self.num(t)).collect()
            })
            .collect()
    }

    fn rows(&mut self, name: &str) -> Result<Vec<Vec<f64>>, FormatError> {
        let (r, c) = self.header(name)?.ok_or_else(|| self.err(format!("block `{name}` is required")))?;
        self.body(r, c)
    }

    fn opt_rows(&mut self, name: &str) -> Result<Option<Vec<Vec<f64>>>, FormatError> {
        match self.header(name)? {
            Some((r, c)) => Ok(Some(self.body(r, c)?)),
            None => Ok(None),
        }
    }

    fn bits(&mut self, name: &str) -> Result<Vec<Vec<bool>>, FormatError> {
        let (r, c) = self.header(name)?.ok_or_else(|| self.err(format!("block `{name}` is required")))?;
        (0..r)
            .map(|_| {
                self.row_tokens(c)?
                    .iter()
                    .map(|t| match *t {
                        "0" => Ok(false),
                        "1" => Ok(true),
                        _ => Err(self.err(format!("expected 0 or 1, found {t:?}"))),
                    })
                    .collect()
            })
            .collect()
    }

    fn matrix(&mut self, name: &str) -> Result<Matrix, FormatError> {
        let (r, c) = self.header(name)?.ok_or_else(|| self.err(format!("block `{name}` is required")))?;
        let data: Vec<f64> = self.body(r, c)?.into_iter().flatten().collect();
        Matrix::from_row_major(r, c, data).map_err(|e| self.err(e.to_string()))
    }

    fn vector(&mut self, name: &str) -> Result<Vec<f64>, FormatError> {
        let mut rows = self.rows(name)?;
        if rows.len() != 1 {
            return Err(self.err(format!("block `{name}` must have one row")));
        }
        Ok(rows.pop().unwrap_or_default())
    }
}

/// Dataset file: a `dims` line `n m ref samples`, then one line per sample:
/// `split hour off x... y... vmin... vmax...` where `off` is a comma list of
/// unit indices or `-`.
pub fn write_dataset(ds: &PfDataset) -> String {
    let mut o = Out::new("dataset");
    o.line("# split hour off | x (2n-1) | y (2n+2m) | vmin (n) | vmax (n)");
    o.line(format!("dims {} {} {} {}", ds.n, ds.m, ds.ref_bus, ds.len()));
    for k in 0..ds.len() {
        let meta = &ds.meta[k];
        let split = match ds.split[k] {
            Split::Train => "train",
            Split::Test => "test",
        };
        let off = if meta.off.is_empty() {
            "-".to_string()
        } else {
            join(&meta.off, |v| v.to_string()).replace(' ', ",")
        };
        o.line(format!(
            "{split} {} {off} {} {} {} {}",
            meta.hour,
            join(&ds.x[k], |v| f(*v)),
            join(&ds.y[k], |v| f(*v)),
            join(&meta.vmin, |v| f(*v)),
            join(&meta.vmax, |v| f(*v)),
        ));
    }
    o.0
}

pub fn read_dataset(text: &str) -> Result<PfDataset, FormatError> {
    let mut r = In::new(text, "dataset")?;
    let dims = r.keyed("dims")?;
    let d: Vec<usize> = dims.split_whitespace().map(|t| r.usize(t)).collect::<Result<_, _>>()?;
    if d.len() != 4 {
        return Err(r.err("dims needs n m ref samples"));
    }
    let (n, m, ref_bus, count) = (d[0], d[1], d[2], d[3]);
    let (nx, ny) = ((2 * n).saturating_sub(1), 2 * n + 2 * m);
    let mut ds = PfDataset {
        n,
        m,
        ref_bus,
        x: Vec::new(),
        y: Vec::new(),
        meta: Vec::new(),
        split: Vec::new(),
    };
    for _ in 0..count {
        let toks = r.row_tokens(3 + nx + ny + 2 * n)?;
        let split = match toks[0] {
            "train" => Split::Train,
            "test" => Split::Test,
            s => return Err(r.err(format!("unknown split {s:?}"))),
        };
        let hour = r.usize(toks[1])? as u32;
        let off = if toks[2] == "-" {
            Vec::new()
        } else {
            toks[2].split(',').map(|t| r.usize(t)).collect::<Result<_, _>>()?
        };
        let nums: Vec<f64> = toks[3..].iter().map(|t| r.num(t)).collect::<Result<_, _>>()?;
        ds.x.push(nums[..nx].to_vec());
        ds.y.push(nums[nx..nx + ny].to_vec());
        ds.meta.push(SampleMeta {
            hour,
            off,
            vmin: nums[nx + ny..nx + ny + n].to_vec(),
            vmax: nums[nx + ny + n..].to_vec(),
        });
        ds.split.push(split);
    }
    Ok(ds)
}

fn status_label(s: ReluStatus) -> &'static str {
    match s {
        ReluStatus::Free => "free",
        ReluStatus::FixedOff => "off",
        ReluStatus::FixedOn => "on",
    }
}

fn write_linear(o: &mut Out, lin: &LinearPfModel) {
    o.line(format!("net {}", lin.net_id));
    o.matrix("jstar", &lin.jstar);
    o.vector("rstar", &lin.rstar);
    o.vector("x0", &lin.x0);
}

fn read_linear(r: &mut In) -> Result<LinearPfModel, FormatError> {
    let net_id = r.keyed("net")?.to_string();
    Ok(LinearPfModel {
        jstar: r.matrix("jstar")?,
        rstar: r.vector("rstar")?,
        x0: r.vector("x0")?,
        net_id,
    })
}

/// Linear model file: the network id, `J*`, `r*` and `x0`.
pub fn write_linear_model(lin: &LinearPfModel) -> String {
    let mut o = Out::new("linear");
    write_linear(&mut o, lin);
    o.0
}

pub fn read_linear_model(text: &str) -> Result<LinearPfModel, FormatError> {
    let mut r = In::new(text, "linear")?;
    read_linear(&mut r)
}

/// Compact model file: the linear part, `w1` (`nin × ρ`), `w2`
/// (`nout × ρ`), `b`, the 0/1 pruning masks and, when present, the big-M
/// bounds with per-ReLU status (`free`/`off`/`on`) and provenance.
pub fn write_model(model: &CompactPwlModel) -> String {
    let mut o = Out::new("model");
    write_linear(&mut o, &model.linear);
    o.matrix("w1", &model.w1);
    o.matrix("w2", &model.w2);
    o.vector("b", &model.b);
    o.line(format!("mask_w1 {}", join(&model.mask_w1, |b| u8::from(*b).to_string())));
    o.line(format!("mask_w2 {}", join(&model.mask_w2, |b| u8::from(*b).to_string())));
    match &model.bounds {
        None => o.line("bounds none"),
        Some(bd) => {
            o.line(format!("bounds {}", bd.len()));
            o.line(format!("mmin {}", join(&bd.mmin, |v| f(*v))));
            o.line(format!("mmax {}", join(&bd.mmax, |v| f(*v))));
            o.line(format!("status {}", join(&bd.status, |s| status_label(*s).to_string())));
            o.line(format!("provenance {}", join(&bd.provenance, |p| p.label().to_string())));
        }
    }
    o.0
}

pub fn read_model(text: &str) -> Result<CompactPwlModel, FormatError> {
    let mut r = In::new(text, "model")?;
    let linear = read_linear(&mut r)?;
    let w1 = r.matrix("w1")?;
    let w2 = r.matrix("w2")?;
    let b = r.vector("b")?;
    let mask = |r: &mut In, key: &str| -> Result<Vec<bool>, FormatError> {
        let rest = r.keyed(key)?;
        rest.split_whitespace()
            .map(|t| match t {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(r.err(format!("bad mask entry {t:?}"))),
            })
            .collect()
    };
    let mask_w1 = mask(&mut r, "mask_w1")?;
    let mask_w2 = mask(&mut r, "mask_w2")?;
    let bounds = match r.keyed("bounds")? {
        "none" => None,
        _ => {
            let nums = |r: &mut In, key: &str| -> Result<Vec<f64>, FormatError> {
                let rest = r.keyed(key)?;
                rest.split_whitespace().map(|t| r.num(t)).collect()
            };
            let mmin = nums(&mut r, "mmin")?;
            let mmax = nums(&mut r, "mmax")?;
            let status = r
                .keyed("status")?
                .split_whitespace()
                .map(|t| match t {
                    "free" => Ok(ReluStatus::Free),
                    "off" => Ok(ReluStatus::FixedOff),
                    "on" => Ok(ReluStatus::FixedOn),
                    _ => Err(r.err(format!("bad status {t:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let provenance = r
                .keyed("provenance")?
                .split_whitespace()
                .map(|t| match t {
                    "interval" => Ok(Provenance::Interval),
                    "lp" => Ok(Provenance::Lp),
                    "milp" => Ok(Provenance::Milp),
                    _ => Err(r.err(format!("bad provenance {t:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(BigMBounds {
                mmin,
                mmax,
                status,
                provenance,
            })
        }
    };
    let model = CompactPwlModel {
        linear,
        w1,
        w2,
        b,
        mask_w1,
        mask_w2,
        bounds,
    };
    model.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(model)
}

/// Direct network file: `w1`, `w2`, `b`, `c`.
pub fn write_direct(nn: &DirectNn) -> String {
    let mut o = Out::new("direct");
    o.matrix("w1", &nn.w1);
    o.matrix("w2", &nn.w2);
    o.vector("b", &nn.b);
    o.vector("c", &nn.c);
    o.0
}

pub fn read_direct(text: &str) -> Result<DirectNn, FormatError> {
    let mut r = In::new(text, "direct")?;
    Ok(DirectNn {
        w1: r.matrix("w1")?,
        w2: r.matrix("w2")?,
        b: r.vector("b")?,
        c: r.vector("c")?,
    })
}

/// Training curve as CSV: `step,loss`.
pub fn write_curve(curve: &TrainingCurve) -> String {
    let mut s = String::from("step,loss\n");
    for (step, loss) in curve {
        let _ = writeln!(s, "{step},{}", f(*loss));
    }
    s
}

/// Schedule file: binaries `[unit][t]`, dispatch, reserve and reactive
/// output (p.u.), condenser output, and optional per-period `v`, `theta`,
/// `s_ft`, `s_tf` blocks `[t][..]`.
pub fn write_schedule(s: &UcSchedule) -> String {
    let mut o = Out::new("schedule");
    o.line(format!("objective {}", f(s.objective)));
    o.bits("y", &s.y);
    o.bits("u", &s.u);
    o.bits("w", &s.w);
    let t = s.horizon();
    o.rows("p_delta", &s.p_delta, t);
    o.rows("reserve", &s.reserve, t);
    o.rows("q", &s.q, t);
    o.rows("q_sc", &s.q_sc, t);
    o.opt_rows("v", s.v.as_ref());
    o.opt_rows("theta", s.theta.as_ref());
    o.opt_rows("s_ft", s.s_ft.as_ref());
    o.opt_rows("s_tf", s.s_tf.as_ref());
    o.0
}

pub fn read_schedule(text: &str) -> Result<UcSchedule, FormatError> {
    let mut r = In::new(text, "schedule")?;
    let obj = r.keyed("objective")?;
    let objective = r.num(obj)?;
    Ok(UcSchedule {
        objective,
        y: r.bits("y")?,
        u: r.bits("u")?,
        w: r.bits("w")?,
        p_delta: r.rows("p_delta")?,
        reserve: r.rows("reserve")?,
        q: r.rows("q")?,
        q_sc: r.rows("q_sc")?,
        v: r.opt_rows("v")?,
        theta: r.opt_rows("theta")?,
        s_ft: r.opt_rows("s_ft")?,
        s_tf: r.opt_rows("s_tf")?,
    })
}

/// Jacobian dump: one labelled row per output (`p<bus>`, `q<bus>`,
/// `sft<line>`, `stf<line>`) against columns `v<bus>` and `th<bus>`
/// (reference angle omitted), 1-based case ids.
pub fn write_jacobian(net: &Network, lin: &LinearPfModel) -> String {
    let mut o = Out::new("jacobian");
    let mut cols: Vec<String> = net.bus_ids.iter().map(|id| format!("v{id}")).collect();
    cols.extend((0..net.n).filter(|&b| b != net.ref_bus).map(|b| format!("th{}", net.bus_ids[b])));
    let mut rows: Vec<String> = net.bus_ids.iter().map(|id| format!("p{id}")).collect();
    rows.extend(net.bus_ids.iter().map(|id| format!("q{id}")));
    rows.extend((1..=net.m).map(|l| format!("sft{l}")));
    rows.extend((1..=net.m).map(|l| format!("stf{l}")));
    o.line(format!("columns {}", cols.join(" ")));
    o.line(format!("rows {} {}", lin.jstar.rows(), lin.jstar.cols()));
    for (i, label) in rows.iter().enumerate() {
        o.line(format!("{label} {}", join(lin.jstar.row(i), |v| f(*v))));
    }
    o.line(format!("residual {}", join(&lin.rstar, |v| f(*v))));
    o.0
}

/// Feasibility report as `key value` lines followed by per-period blocks.
pub fn write_report(rep: &FeasibilityReport) -> String {
    let mut o = Out::new("feasibility");
    o.line(format!("verdict {}", rep.verdict.label()));
    o.line(format!("objective {}", f(rep.objective)));
    o.line(format!("iterations {}", rep.iterations));
    o.line(format!("max_violation {}", f(rep.max_violation())));
    o.line(format!("message {}", rep.message.replace('\n', " ")));
    o.rows("violations", &[rep.violations.clone()], rep.violations.len());
    let t = rep.points.len();
    if t > 0 {
        o.rows("v", &rep.points.iter().map(|p| p.v.clone()).collect::<Vec<_>>(), rep.points[0].v.len());
        o.rows("theta", &rep.points.iter().map(|p| p.theta.clone()).collect::<Vec<_>>(), rep.points[0].theta.len());
        o.rows("s_ft", &rep.points.iter().map(|p| p.s_ft.clone()).collect::<Vec<_>>(), rep.points[0].s_ft.len());
        o.rows("s_tf", &rep.points.iter().map(|p| p.s_tf.clone()).collect::<Vec<_>>(), rep.points[0].s_tf.len());
        o.rows("p", &rep.p, rep.p.first().map_or(0, Vec::len));
        o.rows("q", &rep.q, rep.q.first().map_or(0, Vec::len));
    }
    o.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model(bounds: bool) -> CompactPwlModel {
        let lin = LinearPfModel {
            jstar: Matrix::from_fn(6, 3, |r, c| (r * 3 + c) as f64 * 0.1 - 0.7),
            rstar: vec![0.1, -0.2, 1e-300, 3.5, 0.0, -7.25],
            x0: vec![1.0, 1.02, 0.01],
            net_id: "toy".into(),
        };
        let mut m = CompactPwlModel::from_linear(lin, Matrix::from_fn(3, 2, |r, c| 1.0 / (1.0 + r as f64 + c as f64)), vec![0.3, -0.1]).unwrap();
        m.w2 = Matrix::from_fn(6, 2, |r, c| (r as f64 - c as f64) / 3.0);
        m.mask_w1[1] = true;
        m.w1.as_mut_slice()[1] = 0.0;
        if bounds {
            m.bounds = Some(BigMBounds {
                mmin: vec![-1.0 / 3.0, 0.2],
                mmax: vec![2.0, 0.9],
                status: vec![ReluStatus::Free, ReluStatus::FixedOn],
                provenance: vec![Provenance::Lp, Provenance::Interval],
            });
        }
        m
    }

    #[test]
    fn model_round_trip_is_exact() {
        for bounds in [false, true] {
            let m = toy_model(bounds);
            assert_eq!(read_model(&write_model(&m)).unwrap(), m);
        }
    }

    #[test]
    fn direct_round_trip_is_exact() {
        let nn = DirectNn {
            w1: Matrix::from_fn(2, 3, |r, c| (r + c) as f64 / 7.0),
            w2: Matrix::from_fn(4, 3, |r, c| (r * c) as f64 / 9.0),
            b: vec![0.1, 0.2, 0.3],
            c: vec![1.0, 2.0, 3.0, 4.0],
        };
        assert_eq!(read_direct(&write_direct(&nn)).unwrap(), nn);
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let ds = PfDataset {
            n: 2,
            m: 1,
            ref_bus: 0,
            x: vec![vec![1.0, 0.99, -0.01], vec![1.01, 1.0, 0.1 + 0.2]],
            y: vec![vec![0.1; 6], vec![-0.3; 6]],
            meta: vec![
                SampleMeta { hour: 3, off: vec![], vmin: vec![0.94; 2], vmax: vec![1.06; 2] },
                SampleMeta { hour: 7, off: vec![1, 4], vmin: vec![0.9; 2], vmax: vec![1.1; 2] },
            ],
            split: vec![Split::Train, Split::Test],
        };
        assert_eq!(read_dataset(&write_dataset(&ds)).unwrap(), ds);
    }

    #[test]
    fn schedule_round_trip_is_exact() {
        let s = UcSchedule {
            y: vec![vec![true, false]],
            u: vec![vec![true, false]],
            w: vec![vec![false, true]],
            p_delta: vec![vec![0.25, 0.0]],
            reserve: vec![vec![0.1, 0.0]],
            q: vec![vec![-0.05, 0.0]],
            q_sc: vec![],
            v: Some(vec![vec![1.0, 0.98], vec![1.01, 0.97]]),
            theta: None,
            s_ft: Some(vec![vec![0.4], vec![0.2]]),
            s_tf: Some(vec![vec![0.39], vec![0.19]]),
            objective: 123.456,
        };
        assert_eq!(read_schedule(&write_schedule(&s)).unwrap(), s);
    }

    #[test]
    fn truncated_file_reports_error() {
        let text = write_model(&toy_model(true));
        let cut: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(matches!(read_model(&cut), Err(FormatError::Parse { .. })));
        assert!(read_model("pwlgrid-schedule 1\n").is_err());
    }
}
