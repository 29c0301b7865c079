//! MPS export and import, and external solution files.
//!
//! Fields are laid out in the fixed-format columns but separated by
//! whitespace, so names must not contain spaces. Every number is written
//! with 17 significant digits, which reproduces each coefficient exactly on
//! reparse. Binaries are declared with `BV` bounds; the objective constant
//! is stored as the negated right-hand side of the objective row.

use std::collections::HashMap;
use std::fmt::Write as _;

use pwlgrid_core::lp::{MilpModel, MilpSolution, MilpStatus, Sense, VarKind, VarTag, Variable};

use crate::FormatError;

const OBJ_ROW: &str = "OBJ";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_name(name: &str, what: &str) -> Result<(), FormatError> {
    if name.is_empty() || name.chars().any(char::is_whitespace) || name.starts_with('$') {
        return Err(FormatError::Invalid(format!("{what} name {name:?} cannot be written to MPS")));
    }
    Ok(())
}

/// Write `model` as MPS text. Fails on empty, blank-containing or duplicate
/// names.
pub fn export_mps(model: &MilpModel) -> Result<String, FormatError> {
    model.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    let mut seen = HashMap::new();
    for v in &model.vars {
        check_name(&v.name, "variable")?;
        if seen.insert(v.name.as_str(), ()).is_some() {
            return Err(FormatError::Invalid(format!("duplicate variable name {}", v.name)));
        }
    }
    let mut rows = HashMap::new();
    rows.insert(OBJ_ROW, ());
    for c in &model.cons {
        check_name(&c.name, "row")?;
        if rows.insert(c.name.as_str(), ()).is_some() {
            return Err(FormatError::Invalid(format!("duplicate row name {}", c.name)));
        }
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.vars.len()];
    for (i, c) in model.cons.iter().enumerate() {
        for &(j, a) in &c.terms {
            cols[j].push((i, a));
        }
    }

    let name = if model.name.is_empty() { "MODEL" } else { model.name.as_str() };
    let mut s = String::new();
    let _ = writeln!(s, "NAME          {name}");
    let _ = writeln!(s, "ROWS");
    let _ = writeln!(s, " N  {OBJ_ROW}");
    for c in &model.cons {
        let code = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(s, " {code}  {}", c.name);
    }
    let _ = writeln!(s, "COLUMNS");
    for (j, v) in model.vars.iter().enumerate() {
        let c = model.objective[j];
        if c != 0.0 || cols[j].is_empty() {
            let _ = writeln!(s, "    {:<8}  {:<8}  {}", v.name, OBJ_ROW, num(c));
        }
        for &(i, a) in &cols[j] {
            let _ = writeln!(s, "    {:<8}  {:<8}  {}", v.name, model.cons[i].name, num(a));
        }
    }
    let _ = writeln!(s, "RHS");
    if model.obj_constant != 0.0 {
        let _ = writeln!(s, "    RHS       {:<8}  {}", OBJ_ROW, num(-model.obj_constant));
    }
    for c in &model.cons {
        if c.rhs != 0.0 {
            let _ = writeln!(s, "    RHS       {:<8}  {}", c.name, num(c.rhs));
        }
    }
    let _ = writeln!(s, "RANGES");
    let _ = writeln!(s, "BOUNDS");
    for v in &model.vars {
        let mut b = |code: &str, val: Option<f64>| {
            let _ = match val {
                Some(x) => writeln!(s, " {code} BND       {:<8}  {}", v.name, num(x)),
                None => writeln!(s, " {code} BND       {}", v.name),
            };
        };
        match v.kind {
            VarKind::Binary => {
                b("BV", None);
                if v.lower != 0.0 {
                    b("LO", Some(v.lower));
                }
                if v.upper != 1.0 {
                    b("UP", Some(v.upper));
                }
            }
            VarKind::Continuous => {
                let (lo, hi) = (v.lower, v.upper);
                if lo == hi {
                    b("FX", Some(lo));
                } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                    b("FR", None);
                } else {
                    if lo == f64::NEG_INFINITY {
                        b("MI", None);
                    } else if lo != 0.0 {
                        b("LO", Some(lo));
                    }
                    if hi.is_finite() {
                        b("UP", Some(hi));
                    }
                }
            }
        }
    }
    let _ = writeln!(s, "ENDATA");
    Ok(s)
}

#[derive(PartialEq)]
enum Section {
    Start,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

/// Parse MPS text produced by [`export_mps`] or any free-format MPS file
/// using the same sections. Ranged rows are split into two one-sided rows.
pub fn parse_mps(text: &str) -> Result<MilpModel, FormatError> {
    let mut model = MilpModel::new("");
    let mut section = Section::Start;
    let mut obj_name: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut ranges: Vec<(usize, f64)> = Vec::new();
    let mut integer_marker = false;

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match toks[0] {
                "NAME" => {
                    model.name = toks.get(1).copied().unwrap_or("").to_string();
                    Section::Start
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return Err(FormatError::at(ln, format!("unknown section {other}"))),
            };
            continue;
        }
        let number = |t: &str| -> Result<f64, FormatError> {
            t.parse::<f64>().map_err(|_| FormatError::at(ln, format!("invalid number {t:?}")))
        };
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(FormatError::at(ln, "row line needs a type and a name"));
                }
                let sense = match toks[0] {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(toks[1].to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    t => return Err(FormatError::at(ln, format!("unknown row type {t}"))),
                };
                if row_index.insert(toks[1].to_string(), model.cons.len()).is_some() {
                    return Err(FormatError::at(ln, format!("duplicate row {}", toks[1])));
                }
                model.add_constraint(toks[1], &[], sense, 0.0);
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    integer_marker = toks[2] == "'INTORG'";
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(FormatError::at(ln, "column line needs name/row/value pairs"));
                }
                let j = match var_index.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        let j = model.push_var(Variable {
                            name: toks[0].to_string(),
                            kind: if integer_marker { VarKind::Binary } else { VarKind::Continuous },
                            lower: 0.0,
                            upper: if integer_marker { 1.0 } else { f64::INFINITY },
                            tag: VarTag::Untagged,
                        });
                        var_index.insert(toks[0].to_string(), j);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let a = number(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        model.objective[j] += a;
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| FormatError::at(ln, format!("unknown row {}", pair[0])))?;
                        if a != 0.0 {
                            model.cons[i].terms.push((j, a));
                        }
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let pairs = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in pairs.chunks(2) {
                    if pair.len() != 2 {
                        return Err(FormatError::at(ln, "expected row/value pairs"));
                    }
                    let v = number(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        if section == Section::Rhs {
                            model.obj_constant = -v;
                        }
                        continue;
                    }
                    let &i = row_index
                        .get(pair[0])
                        .ok_or_else(|| FormatError::at(ln, format!("unknown row {}", pair[0])))?;
                    if section == Section::Rhs {
                        model.cons[i].rhs = v;
                    } else {
                        ranges.push((i, v));
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(FormatError::at(ln, "bound line too short"));
                }
                let &j = var_index
                    .get(toks[2])
                    .ok_or_else(|| FormatError::at(ln, format!("unknown column {}", toks[2])))?;
                let val = || -> Result<f64, FormatError> {
                    number(toks.get(3).ok_or_else(|| FormatError::at(ln, "bound needs a value"))?)
                };
                let v = &mut model.vars[j];
                match toks[0] {
                    "UP" => v.upper = val()?,
                    "LO" => v.lower = val()?,
                    "FX" => {
                        let x = val()?;
                        v.lower = x;
                        v.upper = x;
                    }
                    "FR" => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    "MI" => v.lower = f64::NEG_INFINITY,
                    "PL" => v.upper = f64::INFINITY,
                    "BV" => {
                        v.kind = VarKind::Binary;
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    t => return Err(FormatError::at(ln, format!("unsupported bound type {t}"))),
                }
            }
            Section::Start | Section::End => {
                return Err(FormatError::at(ln, "data outside a section"));
            }
        }
    }
    if section != Section::End {
        return Err(FormatError::at(text.lines().count(), "missing ENDATA"));
    }
    for (i, r) in ranges {
        let c = model.cons[i].clone();
        let (lo, hi) = match c.sense {
            Sense::Le => (c.rhs - r.abs(), c.rhs),
            Sense::Ge => (c.rhs, c.rhs + r.abs()),
            Sense::Eq if r >= 0.0 => (c.rhs, c.rhs + r),
            Sense::Eq => (c.rhs + r, c.rhs),
        };
        model.cons[i].sense = Sense::Ge;
        model.cons[i].rhs = lo;
        model.add_constraint(format!("{}_range", c.name), &c.terms, Sense::Le, hi);
    }
    for c in &mut model.cons {
        c.terms.sort_by_key(|t| t.0);
    }
    model.validate().map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok(model)
}

/// Tolerance for accepting an imported point.
pub const IMPORT_TOL: f64 = 1e-7;

/// Read `name value` lines (unknown names are an error, missing ones are
/// zero) and accept the point only if it satisfies `model` to
/// [`IMPORT_TOL`].
pub fn import_solution(text: &str, model: &MilpModel) -> Result<MilpSolution, FormatError> {
    let index: HashMap<&str, usize> = model.vars.iter().enumerate().map(|(j, v)| (v.name.as_str(), j)).collect();
    let mut x = vec![0.0; model.vars.len()];
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(FormatError::at(k + 1, "expected `name value`"));
        }
        let &j = index
            .get(toks[0])
            .ok_or_else(|| FormatError::at(k + 1, format!("unknown variable {}", toks[0])))?;
        x[j] = toks[1]
            .parse()
            .map_err(|_| FormatError::at(k + 1, format!("invalid number {:?}", toks[1])))?;
    }
    let viol = model.max_violation(&x);
    if viol.amount > IMPORT_TOL {
        return Err(FormatError::Invalid(format!(
            "imported point violates {} by {:e}",
            viol.location, viol.amount
        )));
    }
    let objective = model.objective_value(&x);
    Ok(MilpSolution {
        status: MilpStatus::BudgetExhausted,
        x,
        objective,
        best_bound: f64::NEG_INFINITY,
        gap: f64::INFINITY,
        nodes: 0,
        wall_secs: 0.0,
        lp_iterations: 0,
        bound_trace: Vec::new(),
        numerical_drops: 0,
    })
}

/// `name value` lines for every variable of `x`.
pub fn write_solution(model: &MilpModel, x: &[f64]) -> String {
    let mut s = String::new();
    for (v, val) in model.vars.iter().zip(x) {
        let _ = writeln!(s, "{} {}", v.name, num(*val));
    }
    s
}

/// Structural equality ignoring variable tags.
pub fn same_structure(a: &MilpModel, b: &MilpModel) -> bool {
    let strip = |m: &MilpModel| -> MilpModel {
        let mut m = m.clone();
        for v in &mut m.vars {
            v.tag = VarTag::Untagged;
        }
        m
    };
    strip(a) == strip(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpModel {
        let mut m = MilpModel::new("demo");
        let a = m.add_continuous("a", 0.0, 4.0, VarTag::Untagged);
        let b = m.add_continuous("b", f64::NEG_INFINITY, f64::INFINITY, VarTag::Untagged);
        let c = m.add_continuous("c", -1.5, f64::INFINITY, VarTag::Untagged);
        let d = m.add_continuous("d", f64::NEG_INFINITY, 2.0, VarTag::Untagged);
        let e = m.add_continuous("e", 0.3, 0.3, VarTag::Untagged);
        let z = m.add_binary("z", VarTag::Untagged);
        let zz = m.add_binary("zz", VarTag::Untagged);
        m.vars[zz].upper = 0.0;
        m.add_objective(a, 1.0 / 3.0);
        m.add_objective(z, -2.0);
        m.obj_constant = 0.1;
        m.add_constraint("r1", &[(a, 0.1), (b, 1.0), (z, 1e-17)], Sense::Le, 3.0);
        m.add_constraint("r2", &[(c, -7.0), (d, 2.0 / 7.0)], Sense::Ge, -1.0);
        m.add_constraint("r3", &[(b, 1.0), (e, 1.0), (zz, 1.0)], Sense::Eq, 0.0);
        m
    }

    #[test]
    fn one_variable_model_has_all_seven_sections_in_order() {
        let mut m = MilpModel::new("one");
        m.add_continuous("x", 0.0, 1.0, VarTag::Untagged);
        let text = export_mps(&m).unwrap();
        let heads: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with(' '))
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        assert_eq!(heads, ["NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"]);
    }

    #[test]
    fn round_trip_preserves_every_coefficient() {
        let m = sample();
        let back = parse_mps(&export_mps(&m).unwrap()).unwrap();
        assert!(same_structure(&m, &back), "{back:#?}");
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut m = sample();
        m.vars[1].name = "a".into();
        assert!(export_mps(&m).is_err());
        let mut m = sample();
        m.cons[1].name = "r1".into();
        assert!(export_mps(&m).is_err());
        let mut m = sample();
        m.vars[0].name = "has space".into();
        assert!(export_mps(&m).is_err());
    }

    #[test]
    fn solution_import_checks_feasibility() {
        let m = sample();
        let good = "a 1\nb -0.3\nc 0\nd 0\ne 0.3\nz 1\nzz 0\n";
        let sol = import_solution(good, &m).unwrap();
        assert!((sol.objective - (1.0 / 3.0 - 2.0 + 0.1)).abs() < 1e-15);
        let bad = "a 1\nb -0.299\nc 0\nd 0\ne 0.3\nz 1\nzz 0\n";
        assert!(matches!(import_solution(bad, &m), Err(FormatError::Invalid(_))));
        assert!(import_solution("nope 1\n", &m).is_err());
        let again = import_solution(&write_solution(&m, &sol.x), &m).unwrap();
        assert_eq!(again.x, sol.x);
    }

    #[test]
    fn ranges_become_two_rows() {
        let text = "NAME t\nROWS\n N obj\n L r\nCOLUMNS\n    x obj 1 r 1\nRHS\n    RHS r 4\nRANGES\n    RNG r 1.5\nBOUNDS\n UP BND x 10\nENDATA\n";
        let m = parse_mps(text).unwrap();
        assert_eq!(m.cons.len(), 2);
        assert_eq!((m.cons[0].sense, m.cons[0].rhs), (Sense::Ge, 2.5));
        assert_eq!((m.cons[1].sense, m.cons[1].rhs), (Sense::Le, 4.0));
    }
}
