//! MATPOWER case files: the `bus`, `branch`, `gen` and `gencost` tables
//! plus `baseMVA`.

use std::fmt::Write as _;

use pwlgrid_core::case::{Branch, Bus, BusType, CostModel, GenCost, Generator, RawCase};

use crate::FormatError;

const DEG: f64 = std::f64::consts::PI / 180.0;

struct Table {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_number(tok: &str, line: usize) -> Result<f64, FormatError> {
    tok.parse::<f64>()
        .map_err(|_| FormatError::at(line, format!("invalid number {tok:?}")))
}

/// Parse MATPOWER case text into a per-unitized case. The reference bus and
/// table references are validated.
pub fn parse_matpower(text: &str) -> Result<RawCase, FormatError> {
    let mut name = String::from("case");
    let mut base: Option<f64> = None;
    let mut tables: Vec<(String, Table)> = Vec::new();
    let mut open: Option<(String, Table)> = None;
    let mut row: Vec<f64> = Vec::new();
    let mut row_line = 0;
    let mut skipping_cell = false;

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let mut line = raw.split('%').next().unwrap_or("").trim();
        if skipping_cell {
            if line.contains('}') {
                skipping_cell = false;
            }
            continue;
        }
        if open.is_none() {
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("function") {
                if let Some((_, n)) = rest.split_once('=') {
                    name = n.trim().trim_end_matches(';').to_string();
                }
                continue;
            }
            let Some(rest) = line.strip_prefix("mpc.") else {
                return Err(FormatError::at(ln, format!("unexpected statement {line:?}")));
            };
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| FormatError::at(ln, "expected assignment"))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(body) = value.strip_prefix('[') {
                open = Some((key.to_string(), Table { line: ln, rows: Vec::new() }));
                line = body;
            } else if value.starts_with('{') {
                skipping_cell = !value.contains('}');
                continue;
            } else {
                let v = value.trim_end_matches(';').trim();
                if key == "baseMVA" {
                    base = Some(parse_number(v, ln)?);
                }
                continue;
            }
        }
        let Some((_, table)) = open.as_mut() else { continue };
        let (body, closed) = match line.find(']') {
            Some(i) => (&line[..i], true),
            None => (line, false),
        };
        let mut pieces = body.split(';').peekable();
        while let Some(piece) = pieces.next() {
            for tok in piece.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                if row.is_empty() {
                    row_line = ln;
                }
                row.push(parse_number(tok, ln)?);
            }
            let ends_row = pieces.peek().is_some();
            if ends_row && !row.is_empty() {
                table.rows.push((row_line, std::mem::take(&mut row)));
            }
        }
        if !row.is_empty() {
            table.rows.push((row_line, std::mem::take(&mut row)));
        }
        if closed {
            tables.push(open.take().expect("table is open"));
        }
    }
    if let Some((key, t)) = open {
        return Err(FormatError::at(t.line, format!("table mpc.{key} is never closed")));
    }

    let base = base.ok_or_else(|| FormatError::at(0, "missing mpc.baseMVA"))?;
    if !(base > 0.0) {
        return Err(FormatError::Invalid(format!("baseMVA must be positive, got {base}")));
    }
    let table = |key: &str| tables.iter().find(|(k, _)| k == key).map(|(_, t)| t);
    let need = |key: &str| table(key).ok_or_else(|| FormatError::at(0, format!("missing table mpc.{key}")));
    let check_cols = |r: &(usize, Vec<f64>), min: usize, what: &str| {
        if r.1.len() < min {
            Err(FormatError::at(r.0, format!("{what} row has {} columns, need {min}", r.1.len())))
        } else {
            Ok(())
        }
    };

    let mut buses = Vec::new();
    for r in &need("bus")?.rows {
        check_cols(r, 13, "bus")?;
        let c = &r.1;
        let kind = BusType::from_code(c[1] as u32)
            .ok_or_else(|| FormatError::at(r.0, format!("unsupported bus type {}", c[1])))?;
        buses.push(Bus {
            id: c[0] as u32,
            kind,
            pd: c[2] / base,
            qd: c[3] / base,
            gs: c[4] / base,
            bs: c[5] / base,
            area: c[6] as u32,
            vm: c[7],
            va: c[8] * DEG,
            base_kv: c[9],
            zone: c[10] as u32,
            vmax: c[11],
            vmin: c[12],
        });
    }
    let mut branches = Vec::new();
    for r in &need("branch")?.rows {
        check_cols(r, 11, "branch")?;
        let c = &r.1;
        let (mut amin, mut amax) = (c.get(11).copied().unwrap_or(-360.0), c.get(12).copied().unwrap_or(360.0));
        if amin == 0.0 && amax == 0.0 {
            amin = -360.0;
            amax = 360.0;
        }
        branches.push(Branch {
            from: c[0] as u32,
            to: c[1] as u32,
            r: c[2],
            x: c[3],
            b: c[4],
            rate_a: c[5] / base,
            rate_b: c[6] / base,
            rate_c: c[7] / base,
            tap: c[8],
            shift: c[9] * DEG,
            in_service: c[10] != 0.0,
            ang_min: amin * DEG,
            ang_max: amax * DEG,
        });
    }
    let mut generators = Vec::new();
    for r in &need("gen")?.rows {
        check_cols(r, 10, "gen")?;
        let c = &r.1;
        generators.push(Generator {
            bus: c[0] as u32,
            pg: c[1] / base,
            qg: c[2] / base,
            qmax: c[3] / base,
            qmin: c[4] / base,
            vg: c[5],
            mbase: c[6],
            in_service: c[7] > 0.0,
            pmax: c[8] / base,
            pmin: c[9] / base,
        });
    }
    let mut gencosts = Vec::new();
    if let Some(t) = table("gencost") {
        for r in &t.rows {
            check_cols(r, 4, "gencost")?;
            let c = &r.1;
            let model = match c[0] as u32 {
                1 => CostModel::PiecewiseLinear,
                2 => CostModel::Polynomial,
                m => return Err(FormatError::at(r.0, format!("unknown cost model {m}"))),
            };
            let count = c[3] as usize * if model == CostModel::PiecewiseLinear { 2 } else { 1 };
            if c.len() < 4 + count {
                return Err(FormatError::at(r.0, "gencost row shorter than its declared size"));
            }
            gencosts.push(GenCost {
                model,
                startup: c[1],
                shutdown: c[2],
                coeffs: c[4..4 + count].to_vec(),
            });
        }
    }
    let case = RawCase {
        name,
        base_mva: base,
        buses,
        branches,
        generators,
        gencosts,
    };
    case.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(case)
}

/// Shortest decimal text for `to_file(v)` that parses back to exactly `v`
/// after `from_file`.
fn scaled(v: f64, to_file: impl Fn(f64) -> f64, from_file: impl Fn(f64) -> f64) -> String {
    let c = to_file(v);
    if !c.is_finite() || from_file(c) == v {
        return num(c);
    }
    let mut lo = c;
    let mut hi = c;
    for _ in 0..256 {
        lo = lo.next_down();
        hi = hi.next_up();
        for cand in [lo, hi] {
            if from_file(cand) == v {
                return num(cand);
            }
        }
    }
    num(c)
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "Inf".into() } else { "-Inf".into() }
    } else {
        format!("{v}")
    }
}

/// Write a case as MATPOWER text that parses back to identical records.
pub fn write_matpower(case: &RawCase) -> String {
    let base = case.base_mva;
    let pu = |v: f64| scaled(v, |x| x * base, |x| x / base);
    let ang = |v: f64| scaled(v, |x| x / DEG, |x| x * DEG);
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = {}", case.name);
    let _ = writeln!(s, "mpc.version = '2';");
    let _ = writeln!(s, "mpc.baseMVA = {};", num(base));
    let _ = writeln!(s, "\n%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin");
    let _ = writeln!(s, "mpc.bus = [");
    for b in &case.buses {
        let cols = [
            b.id.to_string(),
            b.kind.code().to_string(),
            pu(b.pd),
            pu(b.qd),
            pu(b.gs),
            pu(b.bs),
            b.area.to_string(),
            num(b.vm),
            ang(b.va),
            num(b.base_kv),
            b.zone.to_string(),
            num(b.vmax),
            num(b.vmin),
        ];
        let _ = writeln!(s, "\t{};", cols.join("\t"));
    }
    let _ = writeln!(s, "];");
    let _ = writeln!(s, "\n%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin");
    let _ = writeln!(s, "mpc.gen = [");
    for g in &case.generators {
        let cols = [
            g.bus.to_string(),
            pu(g.pg),
            pu(g.qg),
            pu(g.qmax),
            pu(g.qmin),
            num(g.vg),
            num(g.mbase),
            u8::from(g.in_service).to_string(),
            pu(g.pmax),
            pu(g.pmin),
        ];
        let _ = writeln!(s, "\t{};", cols.join("\t"));
    }
    let _ = writeln!(s, "];");
    let _ = writeln!(
        s,
        "\n%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax"
    );
    let _ = writeln!(s, "mpc.branch = [");
    for br in &case.branches {
        let cols = [
            br.from.to_string(),
            br.to.to_string(),
            num(br.r),
            num(br.x),
            num(br.b),
            pu(br.rate_a),
            pu(br.rate_b),
            pu(br.rate_c),
            num(br.tap),
            ang(br.shift),
            u8::from(br.in_service).to_string(),
            ang(br.ang_min),
            ang(br.ang_max),
        ];
        let _ = writeln!(s, "\t{};", cols.join("\t"));
    }
    let _ = writeln!(s, "];");
    if !case.gencosts.is_empty() {
        let _ = writeln!(s, "\n%% generator cost data\n%\tmodel\tstartup\tshutdown\tn\tc(n-1)\t...\tc0");
        let _ = writeln!(s, "mpc.gencost = [");
        for c in &case.gencosts {
            let (code, n) = match c.model {
                CostModel::PiecewiseLinear => (1, c.coeffs.len() / 2),
                CostModel::Polynomial => (2, c.coeffs.len()),
            };
            let mut cols = vec![code.to_string(), num(c.startup), num(c.shutdown), n.to_string()];
            cols.extend(c.coeffs.iter().map(|&v| num(v)));
            let _ = writeln!(s, "\t{};", cols.join("\t"));
        }
        let _ = writeln!(s, "];");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "\
function mpc = two
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 135 1 1.1 0.9;
  2 1 50 10 0 0 1 1 0 135 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 300 -300 1 100 1 250 10;
];
mpc.branch = [
  1 2 0 0.1 0 100 0 0 0 0 1 -30 30;
];
mpc.gencost = [
  2 0 0 3 0.01 20 0;
];
";

    #[test]
    fn two_bus_in_per_unit() {
        let c = parse_matpower(TWO_BUS).unwrap();
        assert_eq!((c.buses.len(), c.branches.len()), (2, 1));
        assert_eq!(c.branches[0].rate_a, 1.0);
        assert_eq!(c.buses[1].pd, 0.5);
        assert_eq!(c.generators[0].pmax, 2.5);
        assert!((c.branches[0].ang_max - std::f64::consts::PI / 6.0).abs() < 1e-15);
        assert_eq!(c.name, "two");
    }

    #[test]
    fn missing_reference_bus_is_rejected() {
        let text = TWO_BUS.replace("1 3 0 0", "1 2 0 0");
        assert!(matches!(parse_matpower(&text), Err(FormatError::Invalid(_))));
    }

    #[test]
    fn nonpositive_base_is_rejected() {
        let text = TWO_BUS.replace("baseMVA = 100", "baseMVA = 0");
        assert!(parse_matpower(&text).is_err());
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = TWO_BUS.replace("2 1 50 10 0 0", "2 1 5x0 10 0 0");
        match parse_matpower(&text) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_row_reports_line() {
        let text = TWO_BUS.replace("1 2 0 0.1 0 100 0 0 0 0 1 -30 30;", "1 2 0 0.1;");
        match parse_matpower(&text) {
            Err(FormatError::Parse { line, .. }) => assert_eq!(line, 12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_angle_limits_mean_unlimited() {
        let text = TWO_BUS.replace("1 -30 30;", "1 0 0;");
        let c = parse_matpower(&text).unwrap();
        assert!((c.branches[0].ang_max - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let c = parse_matpower(TWO_BUS).unwrap();
        let again = parse_matpower(&write_matpower(&c)).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn multi_row_lines_and_cell_arrays() {
        let text = TWO_BUS.replace(
            "mpc.gencost = [",
            "mpc.bus_name = {\n 'a';\n 'b';\n};\nmpc.gencost = [",
        );
        let text = text.replace(
            "  1 3 0 0 0 0 1 1 0 135 1 1.1 0.9;\n  2 1",
            "  1 3 0 0 0 0 1 1 0 135 1 1.1 0.9; 2 1",
        );
        let c = parse_matpower(&text).unwrap();
        assert_eq!(c.buses.len(), 2);
    }
}
