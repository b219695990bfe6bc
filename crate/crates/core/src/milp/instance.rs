//! Solver-agnostic mixed-integer linear program and its LP-format text form.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::Serialize;

/// Constraint families of the embedding model. The number of each family is its public
/// identifier in LP comments, checker reports and infeasibility hints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Family {
    Assignment = 5,
    Coexistence = 6,
    ProcessingOnLower = 7,
    ProcessingOnUpper = 8,
    McuCapacity = 9,
    RamCapacity = 10,
    FunctionLink = 11,
    FunctionAvailable = 12,
    ZoneLink = 13,
    ZoneAvailable = 14,
    LinkEmbedding = 15,
    PairDemand = 16,
    PrimaryConservation = 17,
    PrimaryLinkTraffic = 18,
    PrimaryIndicatorLower = 19,
    PrimaryIndicatorUpper = 20,
    PrimaryNoSplit = 21,
    SecondaryConservation = 22,
    SecondaryLinkTraffic = 23,
    SecondaryIndicatorLower = 24,
    SecondaryIndicatorUpper = 25,
    SecondaryNoSplit = 26,
    Disjointness = 27,
    NetworkOnLower = 28,
    NetworkOnUpper = 29,
    Arrival = 30,
    NodeCapacity = 31,
    ArrivalLevel = 32,
    OneLevel = 33,
    NodeLatency = 34,
    SplitPrimaryConservation = 35,
    SplitSecondaryConservation = 36,
}

impl Family {
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn describe(self) -> &'static str {
        use Family::*;
        match self {
            Assignment => "each virtual node embedded in exactly one node",
            Coexistence => "no node hosts two virtual nodes of one BP",
            ProcessingOnLower | ProcessingOnUpper => "processing module on iff hosting",
            McuCapacity => "MCU capacity",
            RamCapacity => "RAM capacity",
            FunctionLink | FunctionAvailable => "required function provided by host",
            ZoneLink | ZoneAvailable => "required zone matched by host",
            LinkEmbedding => "link embedding indicator is the AND of its end placements",
            PairDemand => "pair demand is the sum of embedded virtual link demands",
            PrimaryConservation => "primary flow conservation",
            PrimaryLinkTraffic => "primary link traffic is the sum of primary flows",
            PrimaryIndicatorLower | PrimaryIndicatorUpper => "primary path indicator",
            PrimaryNoSplit => "primary path does not split",
            SecondaryConservation => "secondary flow conservation",
            SecondaryLinkTraffic => "secondary link traffic is the sum of secondary flows",
            SecondaryIndicatorLower | SecondaryIndicatorUpper => "secondary path indicator",
            SecondaryNoSplit => "secondary path does not split",
            Disjointness => "primary and secondary paths share no link",
            NetworkOnLower | NetworkOnUpper => "network module on iff routing",
            Arrival => "node arrival traffic",
            NodeCapacity => "node traffic capacity",
            ArrivalLevel => "arrival rate covered by the chosen level",
            OneLevel => "at most one arrival level per node",
            NodeLatency => "node latency from the chosen level",
            SplitPrimaryConservation => "split primary flow conservation (half demand)",
            SplitSecondaryConservation => "split secondary flow conservation (half demand)",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.number())
    }
}

/// Provenance of a constraint: a model family or an auxiliary definition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Tag {
    Family(Family),
    Aux,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tag::Family(fam) => fam.fmt(f),
            Tag::Aux => f.write_str("aux"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VarKind {
    Binary,
    /// Non-negative.
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub upper: Option<f64>,
    /// Branching class, lower first.
    pub priority: u8,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(Var, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: Var, coef: f64) -> &mut Self {
        self.terms.push((v, coef));
        self
    }

    pub fn with(mut self, v: Var, coef: f64) -> Self {
        self.terms.push((v, coef));
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Merges repeated variables and drops zero coefficients, keeping first-seen order.
    pub fn normalized(&self) -> LinExpr {
        let mut pos: HashMap<Var, usize> = HashMap::new();
        let mut terms: Vec<(Var, f64)> = Vec::new();
        for &(v, c) in &self.terms {
            match pos.get(&v) {
                Some(&i) => terms[i].1 += c,
                None => {
                    pos.insert(v, terms.len());
                    terms.push((v, c));
                }
            }
        }
        terms.retain(|&(_, c)| c != 0.0);
        LinExpr { terms }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InstanceError {
    #[error("duplicate variable name {0}")]
    DuplicateName(String),
    #[error("{0} references an undeclared variable")]
    Undeclared(String),
}

/// Variables, tagged constraints and a minimization objective.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpInstance {
    pub vars: Vec<VarDecl>,
    pub constraints: Vec<Constraint>,
    pub objective: LinExpr,
    names: HashMap<String, Var>,
}

impl MilpInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, upper: Option<f64>, priority: u8) -> Result<Var, InstanceError> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(InstanceError::DuplicateName(name));
        }
        let v = Var(self.vars.len());
        self.names.insert(name.clone(), v);
        self.vars.push(VarDecl { name, kind, upper, priority });
        Ok(v)
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.names.get(name).copied()
    }

    pub fn add_constraint(&mut self, expr: LinExpr, relation: Relation, rhs: f64, tag: Tag) {
        let name = match tag {
            Tag::Family(f) => format!("c{}_{}", f.number(), self.constraints.len()),
            Tag::Aux => format!("aux_{}", self.constraints.len()),
        };
        self.constraints.push(Constraint { name, expr: expr.normalized(), relation, rhs, tag });
    }

    /// Every variable referenced by a constraint or the objective is declared.
    pub fn check_declared(&self) -> Result<(), InstanceError> {
        let n = self.vars.len();
        for c in &self.constraints {
            if c.expr.terms.iter().any(|(v, _)| v.0 >= n) {
                return Err(InstanceError::Undeclared(c.name.clone()));
            }
        }
        if self.objective.terms.iter().any(|(v, _)| v.0 >= n) {
            return Err(InstanceError::Undeclared("objective".into()));
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.eval(values)
    }

    /// Names of constraints violated by `values` beyond `tol`, and bound violations.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (d, &x) in self.vars.iter().zip(values) {
            let upper = match d.kind {
                VarKind::Binary => Some(1.0),
                VarKind::Continuous => d.upper,
            };
            if x < -tol || upper.is_some_and(|u| x > u + tol) {
                out.push(format!("bounds of {}", d.name));
            }
            if d.kind == VarKind::Binary && (x - x.round()).abs() > tol {
                out.push(format!("integrality of {}", d.name));
            }
        }
        for c in &self.constraints {
            let scale = 1.0 + c.rhs.abs();
            if !c.relation.holds(c.expr.eval(values), c.rhs, tol * scale) {
                out.push(format!("{} {}", c.name, c.tag));
            }
        }
        out
    }

    pub fn binary_count(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }
}

const TERMS_PER_LINE: usize = 8;

fn write_expr(out: &mut String, inst: &MilpInstance, expr: &LinExpr) {
    if expr.terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (i, &(v, c)) in expr.terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let mag = c.abs();
        let name = &inst.vars[v.0].name;
        if i == 0 && sign == '+' {
            if mag == 1.0 {
                let _ = write!(out, " {name}");
            } else {
                let _ = write!(out, " {mag} {name}");
            }
        } else if mag == 1.0 {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {mag} {name}");
        }
    }
}

/// CPLEX LP text. Output order follows declaration order, so equal instances give equal text.
pub fn emit_lp(inst: &MilpInstance) -> String {
    let mut out = String::new();
    out.push_str("\\ embedding model\n");
    let _ = writeln!(out, "\\ {} variables, {} constraints", inst.vars.len(), inst.constraints.len());
    out.push_str("Minimize\n obj:");
    write_expr(&mut out, inst, &inst.objective);
    out.push_str("\nSubject To\n");
    for c in &inst.constraints {
        let _ = writeln!(out, "\\ {}", c.tag);
        let _ = write!(out, " {}:", c.name);
        write_expr(&mut out, inst, &c.expr);
        let _ = writeln!(out, " {} {}", c.relation.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &inst.vars {
        if let (VarKind::Continuous, Some(u)) = (v.kind, v.upper) {
            let _ = writeln!(out, " 0 <= {} <= {}", v.name, u);
        }
    }
    out.push_str("Binaries\n");
    for v in inst.vars.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}
