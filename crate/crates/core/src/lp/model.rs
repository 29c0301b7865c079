//! Solver-agnostic mixed-integer linear model and an independent
//! constraint checker.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Domain meaning of a variable. Unit, bus, line and ReLU indices are
/// 0-based; `t` is the 0-based period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarTag {
    Untagged,
    Commit { unit: usize, t: usize },
    Startup { unit: usize, t: usize },
    Shutdown { unit: usize, t: usize },
    Dispatch { unit: usize, t: usize },
    Reserve { unit: usize, t: usize },
    Reactive { unit: usize, t: usize },
    CondenserReactive { cond: usize, t: usize },
    SegmentPower { unit: usize, t: usize, seg: usize },
    StartupTier { unit: usize, t: usize, tier: usize },
    Voltage { bus: usize, t: usize },
    Angle { bus: usize, t: usize },
    Output { index: usize, t: usize },
    PreActivation { relu: usize, t: usize },
    Activation { relu: usize, t: usize },
    Relu { relu: usize, t: usize },
    Flow { line: usize, t: usize },
}

impl VarTag {
    pub fn is_relu(&self) -> bool {
        matches!(self, VarTag::Relu { .. })
    }

    pub fn is_commitment(&self) -> bool {
        matches!(
            self,
            VarTag::Commit { .. } | VarTag::Startup { .. } | VarTag::Shutdown { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub tag: VarTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Sorted by variable index, no duplicates, no zero coefficients.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimization model `min cᵀx + c0` over linear rows and variable bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MilpModel {
    pub name: String,
    pub vars: Vec<Variable>,
    pub cons: Vec<Constraint>,
    pub objective: Vec<f64>,
    pub obj_constant: f64,
}

/// Largest violation found by [`MilpModel::max_violation`] and where.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub amount: f64,
    pub location: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelStats {
    pub variables: usize,
    pub binaries: usize,
    pub relu_binaries: usize,
    pub commitment_binaries: usize,
    pub constraints: usize,
    pub nonzeros: usize,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> MilpModel {
        MilpModel {
            name: name.into(),
            ..MilpModel::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        tag: VarTag,
    ) -> usize {
        self.push_var(Variable {
            name: name.into(),
            kind: VarKind::Continuous,
            lower,
            upper,
            tag,
        })
    }

    pub fn add_binary(&mut self, name: impl Into<String>, tag: VarTag) -> usize {
        self.push_var(Variable {
            name: name.into(),
            kind: VarKind::Binary,
            lower: 0.0,
            upper: 1.0,
            tag,
        })
    }

    pub fn push_var(&mut self, var: Variable) -> usize {
        self.vars.push(var);
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    /// Add a row; repeated variables are summed and zero coefficients dropped.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: &[(usize, f64)],
        sense: Sense,
        rhs: f64,
    ) -> usize {
        let mut t: Vec<(usize, f64)> = terms.to_vec();
        t.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (j, a) in t {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        self.cons.push(Constraint {
            name: name.into(),
            terms: merged,
            sense,
            rhs,
        });
        self.cons.len() - 1
    }

    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
    }

    /// Same model with every binary treated as continuous on its bounds.
    pub fn relaxed(&self) -> MilpModel {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }

    pub fn find_var(&self, pred: impl Fn(&VarTag) -> bool) -> Option<usize> {
        self.vars.iter().position(|v| pred(&v.tag))
    }

    pub fn var_by_tag(&self, tag: VarTag) -> Option<usize> {
        self.find_var(|t| *t == tag)
    }

    pub fn stats(&self) -> ModelStats {
        let mut s = ModelStats {
            variables: self.vars.len(),
            constraints: self.cons.len(),
            nonzeros: self.cons.iter().map(|c| c.terms.len()).sum(),
            ..ModelStats::default()
        };
        for v in &self.vars {
            if v.kind == VarKind::Binary {
                s.binaries += 1;
                if v.tag.is_relu() {
                    s.relu_binaries += 1;
                }
                if v.tag.is_commitment() {
                    s.commitment_binaries += 1;
                }
            }
        }
        s
    }

    /// Structural checks: references, finiteness, bound order, binary bounds.
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.vars.len() {
            return Err(Error::Dimension {
                what: "objective",
                expected: self.vars.len(),
                got: self.objective.len(),
            });
        }
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::validation(format!(
                    "variable {} has invalid bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::validation(format!(
                    "binary {} has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        for c in &self.cons {
            if !c.rhs.is_finite() {
                return Err(Error::validation(format!("row {} has non-finite rhs", c.name)));
            }
            for &(j, a) in &c.terms {
                if j >= self.vars.len() {
                    return Err(Error::validation(format!(
                        "row {} references undeclared variable {j}",
                        c.name
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::validation(format!(
                        "row {} has a non-finite coefficient",
                        c.name
                    )));
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) || !self.obj_constant.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        Ok(())
    }

    /// Largest bound, row or integrality violation of `x`. Shares no code
    /// with the solvers.
    pub fn max_violation(&self, x: &[f64]) -> Violation {
        let mut worst = Violation {
            amount: 0.0,
            location: String::new(),
        };
        if x.len() != self.vars.len() {
            worst.amount = f64::INFINITY;
            worst.location = format!("length {} != {}", x.len(), self.vars.len());
            return worst;
        }
        let mut note = |amount: f64, loc: &dyn Fn() -> String| {
            if amount.is_nan() || amount > worst.amount {
                worst.amount = if amount.is_nan() { f64::INFINITY } else { amount };
                worst.location = loc();
            }
        };
        for (v, &xv) in self.vars.iter().zip(x) {
            note((v.lower - xv).max(xv - v.upper).max(0.0), &|| format!("bounds of {}", v.name));
            if v.kind == VarKind::Binary {
                note((xv - crate::math::round(xv)).abs(), &|| {
                    format!("integrality of {}", v.name)
                });
            }
        }
        for c in &self.cons {
            note(c.violation(x), &|| format!("row {}", c.name));
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_merge_duplicates_and_drop_zeros() {
        let mut m = MilpModel::new("t");
        let a = m.add_continuous("a", 0.0, 1.0, VarTag::Untagged);
        let b = m.add_continuous("b", 0.0, 1.0, VarTag::Untagged);
        m.add_constraint("r", &[(b, 1.0), (a, 2.0), (b, -1.0), (a, 1.0)], Sense::Le, 1.0);
        assert_eq!(m.cons[0].terms, alloc::vec![(a, 3.0)]);
    }

    #[test]
    fn checker_reports_each_violation_kind() {
        let mut m = MilpModel::new("t");
        let a = m.add_continuous("a", 0.0, 1.0, VarTag::Untagged);
        let z = m.add_binary("z", VarTag::Untagged);
        m.add_constraint("r", &[(a, 1.0), (z, 1.0)], Sense::Ge, 1.0);
        assert_eq!(m.max_violation(&[1.0, 0.0]).amount, 0.0);
        assert!((m.max_violation(&[1.5, 0.0]).amount - 0.5).abs() < 1e-15);
        assert!((m.max_violation(&[0.5, 0.3]).amount - 0.3).abs() < 1e-15);
        let v = m.max_violation(&[0.0, 0.0]);
        assert_eq!(v.location, "row r");
    }

    #[test]
    fn validation_catches_bad_references() {
        let mut m = MilpModel::new("t");
        m.add_continuous("a", 1.0, 0.0, VarTag::Untagged);
        assert!(m.validate().is_err());
        let mut m = MilpModel::new("t");
        m.add_continuous("a", 0.0, 1.0, VarTag::Untagged);
        m.add_constraint("r", &[(3, 1.0)], Sense::Le, 1.0);
        assert!(m.validate().is_err());
    }
}
