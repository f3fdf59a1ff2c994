//! Solver-neutral description of the mixed-integer conic formulations.
//!
//! A [`ModelIR`] holds declared variables, linear rows, second-order cone
//! rows, a linear objective (always maximized) and cut records. It exports
//! to JSON (lossless) and, for cone-free models, to LP text.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FmclpError, Result};
use crate::fairness::{AlphaParam, FairnessSpec};
use crate::geometry::{self, distance_unchecked, COVER_TOL};
use crate::instance::Instance;
use crate::par::Exec;
use crate::solver::coverage_sets;

pub const DEFAULT_PWL_BREAKPOINTS: usize = 32;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Binary,
    Continuous,
}

mod ext_bound {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad bound {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    #[serde(with = "ext_bound")]
    pub lo: f64,
    #[serde(with = "ext_bound")]
    pub hi: f64,
}

impl Var {
    fn binary(name: String) -> Var {
        Var {
            name,
            kind: VarKind::Binary,
            lo: 0.0,
            hi: 1.0,
        }
    }

    fn cont(name: String, lo: f64, hi: f64) -> Var {
        Var {
            name,
            kind: VarKind::Continuous,
            lo,
            hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub var: VarId,
    pub coef: f64,
}

fn t(var: VarId, coef: f64) -> Term {
    Term { var, coef }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Sense {
    fn lp(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinCon {
    pub terms: Vec<Term>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

impl LinCon {
    fn new(terms: Vec<Term>, sense: Sense, rhs: f64, tag: &str) -> LinCon {
        LinCon {
            terms,
            sense,
            rhs,
            tag: tag.to_string(),
        }
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.coef * x[t.var]).sum()
    }

    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        let lhs = self.lhs(x);
        let slack = tol * lhs.abs().max(self.rhs.abs()).max(1.0);
        match self.sense {
            Sense::Le => lhs <= self.rhs + slack,
            Sense::Ge => lhs >= self.rhs - slack,
            Sense::Eq => (lhs - self.rhs).abs() <= slack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// `head[0] >= ||tail||_2`.
    SecondOrder,
    /// `2 head[0] head[1] >= ||tail||_2^2`, `head >= 0`.
    RotatedSecondOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeCon {
    pub kind: ConeKind,
    pub head: Vec<Term>,
    pub tail: Vec<Term>,
    pub tag: String,
}

impl ConeCon {
    pub fn dimension(&self) -> usize {
        self.head.len() + self.tail.len()
    }

    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        let v = |t: &Term| t.coef * x[t.var];
        let sq: f64 = self.tail.iter().map(|t| v(t) * v(t)).sum();
        match self.kind {
            ConeKind::SecondOrder => {
                let h = v(&self.head[0]);
                let nrm = sq.sqrt();
                h - nrm >= -tol * h.abs().max(nrm).max(1.0)
            }
            ConeKind::RotatedSecondOrder => {
                let (a, b) = (v(&self.head[0]), v(&self.head[1]));
                let lhs = 2.0 * a * b;
                let scale = lhs.abs().max(sq).max(1.0);
                a >= -tol * scale && b >= -tol * scale && lhs - sq >= -tol * scale
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `(1 / (1 - alpha)) sum_k lambda_k Z_k` with `Z_k` a power of `W_k`.
    Power,
    /// `sum_k lambda_k Z_k` with `Z_k` under piecewise-linear tangents of `log W_k`.
    LogPwl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub terms: Vec<Term>,
}

/// Cluster cut `sum_{i in set} x_{i,k} <= |set| - 1`, instantiated for every slot `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutRecord {
    /// 0-based demand point indices.
    pub set: Vec<usize>,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIR {
    pub vars: Vec<Var>,
    pub lincons: Vec<LinCon>,
    pub conecons: Vec<ConeCon>,
    pub objective: Objective,
    pub cuts: Vec<CutRecord>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    LpText,
}

impl ModelIR {
    fn empty(kind: ObjectiveKind) -> ModelIR {
        ModelIR {
            vars: Vec::new(),
            lincons: Vec::new(),
            conecons: Vec::new(),
            objective: Objective {
                kind,
                terms: Vec::new(),
            },
            cuts: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    fn add_var(&mut self, v: Var) -> VarId {
        self.vars.push(v);
        self.vars.len() - 1
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Slots `k` in which cut rows are instantiated.
    fn slot_vars(&self) -> Result<(usize, usize)> {
        let get = |k: &str| -> Result<usize> {
            self.metadata
                .get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| FmclpError::Model(format!("metadata key {k:?} missing")))
        };
        Ok((get("n")?, get("p")?))
    }

    /// Cut records instantiated as rows, one per cut per slot.
    pub fn cut_rows(&self) -> Result<Vec<LinCon>> {
        if self.cuts.is_empty() {
            return Ok(Vec::new());
        }
        let (n, p) = self.slot_vars()?;
        let mut rows = Vec::with_capacity(self.cuts.len() * p);
        for c in &self.cuts {
            for k in 0..p {
                let terms = c
                    .set
                    .iter()
                    .map(|&i| {
                        if i >= n {
                            return Err(FmclpError::Model(format!("cut references point {i} of {n}")));
                        }
                        let name = x_name(i, k);
                        self.var_index(&name)
                            .map(|v| t(v, 1.0))
                            .ok_or_else(|| FmclpError::Model(format!("cut variable {name} not declared")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(LinCon::new(terms, Sense::Le, c.set.len() as f64 - 1.0, &c.tag));
            }
        }
        Ok(rows)
    }

    pub fn validate(&self) -> Result<()> {
        let nv = self.vars.len();
        let bad = |m: String| Err(FmclpError::Model(m));
        let mut names = HashMap::new();
        for (i, v) in self.vars.iter().enumerate() {
            if names.insert(v.name.as_str(), i).is_some() {
                return bad(format!("duplicate variable {}", v.name));
            }
            if v.lo.is_nan() || v.hi.is_nan() || v.lo > v.hi {
                return bad(format!("variable {} has bounds [{}, {}]", v.name, v.lo, v.hi));
            }
            if v.kind == VarKind::Binary && (v.lo < 0.0 || v.hi > 1.0) {
                return bad(format!("binary {} has bounds outside [0, 1]", v.name));
            }
        }
        let check = |ts: &[Term]| ts.iter().all(|t| t.var < nv && t.coef.is_finite());
        for (r, c) in self.lincons.iter().enumerate() {
            if c.terms.is_empty() || !check(&c.terms) || !c.rhs.is_finite() {
                return bad(format!("linear row {r} ({}) is malformed", c.tag));
            }
        }
        for (r, c) in self.conecons.iter().enumerate() {
            let heads = match c.kind {
                ConeKind::SecondOrder => 1,
                ConeKind::RotatedSecondOrder => 2,
            };
            if c.head.len() != heads || c.dimension() < 2 || !check(&c.head) || !check(&c.tail) {
                return bad(format!("cone row {r} ({}) is malformed", c.tag));
            }
        }
        if !check(&self.objective.terms) {
            return bad("objective references undeclared variables".into());
        }
        self.cut_rows().map(|_| ())
    }

    pub fn has_cones(&self) -> bool {
        !self.conecons.is_empty()
    }

    /// Objective value at `x`, or `None` if some bound, integrality
    /// requirement or row is violated beyond `tol`.
    pub fn evaluate(&self, x: &[f64], tol: f64) -> Result<Option<f64>> {
        if x.len() != self.vars.len() {
            return Err(FmclpError::LengthMismatch {
                expected: self.vars.len(),
                got: x.len(),
            });
        }
        for (v, &xi) in self.vars.iter().zip(x) {
            let slack = tol * xi.abs().max(1.0);
            if xi < v.lo - slack || xi > v.hi + slack {
                return Ok(None);
            }
            if v.kind == VarKind::Binary && (xi - xi.round()).abs() > tol {
                return Ok(None);
            }
        }
        let rows_ok = self.lincons.iter().all(|c| c.is_satisfied(x, tol))
            && self.cut_rows()?.iter().all(|c| c.is_satisfied(x, tol))
            && self.conecons.iter().all(|c| c.is_satisfied(x, tol));
        Ok(rows_ok.then(|| self.objective.terms.iter().map(|t| t.coef * x[t.var]).sum()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| FmclpError::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<ModelIR> {
        let m: ModelIR = serde_json::from_str(text).map_err(|e| FmclpError::Model(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn export(&self, format: ExportFormat) -> Result<Vec<u8>> {
        match format {
            ExportFormat::Json => Ok(self.to_json()?.into_bytes()),
            ExportFormat::LpText => Ok(self.to_lp()?.into_bytes()),
        }
    }

    /// LP text: `Maximize`, `Subject To`, `Bounds`, `Binary`, `End`.
    pub fn to_lp(&self) -> Result<String> {
        if self.has_cones() {
            return Err(FmclpError::InvalidParameter(
                "model has cone rows, which LP text cannot express; export JSON instead".into(),
            ));
        }
        let mut out = String::new();
        if let Some(name) = self.metadata.get("name") {
            writeln!(out, "\\ {name}").unwrap();
        }
        out.push_str("Maximize\n");
        write_row(&mut out, "obj", &self.objective.terms, &self.vars);
        out.push('\n');
        out.push_str("Subject To\n");
        let mut counters: HashMap<&str, usize> = HashMap::new();
        let cut_rows = self.cut_rows()?;
        for c in self.lincons.iter().chain(&cut_rows) {
            let k = counters.entry(c.tag.as_str()).or_insert(0);
            *k += 1;
            let name = format!("{}_{}", c.tag, k);
            write_row(&mut out, &name, &c.terms, &self.vars);
            writeln!(out, " {} {}", c.sense.lp(), fmt_num(c.rhs)).unwrap();
        }
        out.push_str("Bounds\n");
        for v in self.vars.iter().filter(|v| v.kind == VarKind::Continuous) {
            let line = match (v.lo.is_finite(), v.hi.is_finite()) {
                (false, false) => format!(" {} free", v.name),
                _ if v.lo == v.hi => format!(" {} = {}", v.name, fmt_num(v.lo)),
                (true, false) => format!(" {} >= {}", v.name, fmt_num(v.lo)),
                (false, true) => format!(" -inf <= {} <= {}", v.name, fmt_num(v.hi)),
                (true, true) => format!(" {} <= {} <= {}", fmt_num(v.lo), v.name, fmt_num(v.hi)),
            };
            out.push_str(&line);
            out.push('\n');
        }
        let bins: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !bins.is_empty() {
            out.push_str("Binary\n");
            for chunk in bins.chunks(8) {
                writeln!(out, " {}", chunk.join(" ")).unwrap();
            }
        }
        out.push_str("End\n");
        Ok(out)
    }
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

/// Writes ` name: c1 v1 + c2 v2 ...` wrapping every eight terms.
fn write_row(out: &mut String, name: &str, terms: &[Term], vars: &[Var]) {
    write!(out, " {name}:").unwrap();
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&vars[0].name);
    }
    for (j, tm) in terms.iter().enumerate() {
        if j > 0 && j % 8 == 0 {
            out.push_str("\n  ");
        }
        let sign = if tm.coef < 0.0 { "-" } else { "+" };
        let mag = tm.coef.abs();
        if j == 0 && sign == "+" {
            out.push(' ');
        } else {
            write!(out, " {sign} ").unwrap();
        }
        if mag != 1.0 {
            write!(out, "{} ", fmt_num(mag)).unwrap();
        }
        out.push_str(&vars[tm.var].name);
    }
}

pub fn x_name(i: usize, k: usize) -> String {
    format!("x_{}_{}", i + 1, k + 1)
}

/// Local indices inside a [`PowerSystem`].
pub const POWER_Z: VarId = 0;
pub const POWER_W: VarId = 1;
pub const POWER_ONE: VarId = 2;

/// Conic encoding of `Z <= W^(1-alpha)` (alpha < 1) or
/// `Z >= W^(1-alpha)` (alpha > 1) for an exact rational alpha.
///
/// Variables are local: `Z`, `W`, the constant `one`, then auxiliaries in
/// creation order (children before parents).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSystem {
    pub alpha: AlphaParam,
    pub vars: Vec<Var>,
    pub cones: Vec<ConeCon>,
    pub lincons: Vec<LinCon>,
    /// `(aux, left, right)`: `aux <= sqrt(left * right)`.
    nodes: Vec<(VarId, VarId, VarId)>,
}

impl PowerSystem {
    fn node(&mut self, a: VarId, b: VarId) -> VarId {
        if a == b {
            return a;
        }
        let z = &self.vars[POWER_Z].name;
        let v = Var::cont(format!("{z}_g{}", self.nodes.len() + 1), 0.0, f64::INFINITY);
        self.vars.push(v);
        let id = self.vars.len() - 1;
        self.geo_mean(id, a, b);
        self.nodes.push((id, a, b));
        id
    }

    fn geo_mean(&mut self, top: VarId, a: VarId, b: VarId) {
        if a == b {
            self.lincons
                .push(LinCon::new(vec![t(top, 1.0), t(a, -1.0)], Sense::Le, 0.0, "power"));
        } else {
            self.cones.push(ConeCon {
                kind: ConeKind::RotatedSecondOrder,
                head: vec![t(a, 0.5), t(b, 1.0)],
                tail: vec![t(top, 1.0)],
                tag: "power".into(),
            });
        }
    }

    fn tower(&mut self, leaves: Vec<VarId>, root: VarId) {
        let mut level = leaves;
        while level.len() > 2 {
            level = level.chunks(2).map(|c| self.node(c[0], c[1])).collect();
        }
        self.geo_mean(root, level[0], level[1]);
    }

    pub fn uses_one(&self) -> bool {
        let uses = |ts: &[Term]| ts.iter().any(|t| t.var == POWER_ONE);
        self.cones.iter().any(|c| uses(&c.head) || uses(&c.tail)) || self.lincons.iter().any(|c| uses(&c.terms))
    }

    /// Values for every local variable with the auxiliaries at their
    /// largest feasible level; the system is satisfiable at `(z, w)` iff
    /// these values satisfy it.
    pub fn complete(&self, z: f64, w: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.vars.len()];
        x[POWER_Z] = z;
        x[POWER_W] = w;
        x[POWER_ONE] = 1.0;
        for &(id, a, b) in &self.nodes {
            x[id] = (x[a].max(0.0) * x[b].max(0.0)).sqrt();
        }
        x
    }

    pub fn is_satisfied(&self, x: &[f64], tol: f64) -> bool {
        self.vars
            .iter()
            .zip(x)
            .all(|(v, &xi)| xi >= v.lo - tol * xi.abs().max(1.0) && xi <= v.hi + tol * xi.abs().max(1.0))
            && self.cones.iter().all(|c| c.is_satisfied(x, tol))
            && self.lincons.iter().all(|c| c.is_satisfied(x, tol))
    }
}

/// Binary tower of rotated cones for the power relation between `Z` and `W`.
///
/// With `|1 - alpha| = a / b`: for alpha < 1 the system encodes
/// `Z^b <= W^a` through `Z <= GM(W x a, 1 x (b - a), Z x (2^L - b))`; for
/// alpha > 1 it encodes `Z^b W^a >= 1` through
/// `1 <= GM(Z x b, W x a, 1 x (2^L - a - b))`. Alpha = 0 is the single row
/// `Z = W`.
pub fn decompose_power(z: &str, w: &str, alpha: AlphaParam) -> Result<PowerSystem> {
    if alpha.is_one() {
        return Err(FmclpError::InvalidParameter(
            "alpha = 1 is a logarithm, not a power".into(),
        ));
    }
    let (a, b, below) = alpha.one_minus();
    let z_lo = if alpha.is_zero() { f64::NEG_INFINITY } else { 0.0 };
    let mut sys = PowerSystem {
        alpha,
        vars: vec![
            Var::cont(z.to_string(), z_lo, f64::INFINITY),
            Var::cont(w.to_string(), 0.0, f64::INFINITY),
            Var::cont("one".into(), 1.0, 1.0),
        ],
        cones: Vec::new(),
        lincons: Vec::new(),
        nodes: Vec::new(),
    };
    if alpha.is_zero() {
        sys.lincons.push(LinCon::new(
            vec![t(POWER_Z, 1.0), t(POWER_W, -1.0)],
            Sense::Eq,
            0.0,
            "power",
        ));
        return Ok(sys);
    }
    let (a, b) = (a as usize, b as usize);
    let total = if below { b } else { a + b };
    let width = total.next_power_of_two().max(2);
    let mut leaves = Vec::with_capacity(width);
    if below {
        leaves.extend(std::iter::repeat_n(POWER_W, a));
        leaves.extend(std::iter::repeat_n(POWER_ONE, b - a));
        leaves.resize(width, POWER_Z);
        sys.tower(leaves, POWER_Z);
    } else {
        leaves.extend(std::iter::repeat_n(POWER_Z, b));
        leaves.extend(std::iter::repeat_n(POWER_W, a));
        leaves.resize(width, POWER_ONE);
        sys.tower(leaves, POWER_ONE);
    }
    Ok(sys)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOptions {
    /// Tangent lines of the logarithm when alpha = 1.
    pub pwl_breakpoints: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            pwl_breakpoints: DEFAULT_PWL_BREAKPOINTS,
        }
    }
}

/// Shared part of every formulation: `x_{i,k}`, `W_k`, `Z_k`, the
/// count-once rows, coverage definitions, sorting rows and the objective.
struct Core {
    x: Vec<Vec<VarId>>,
}

fn add_core(m: &mut ModelIR, instance: &Instance, spec: &FairnessSpec, opts: &ModelOptions) -> Result<Core> {
    let (n, p) = (instance.len(), spec.p());
    let total = instance.total_weight();
    let x: Vec<Vec<VarId>> = (0..n)
        .map(|i| (0..p).map(|k| m.add_var(Var::binary(x_name(i, k)))).collect())
        .collect();
    let alpha = spec.alpha();
    let w: Vec<VarId> = (0..p)
        .map(|k| m.add_var(Var::cont(format!("W_{}", k + 1), 0.0, total)))
        .collect();
    let z_lo = if alpha.is_zero() || alpha.is_one() { f64::NEG_INFINITY } else { 0.0 };
    let z: Vec<VarId> = (0..p)
        .map(|k| m.add_var(Var::cont(format!("Z_{}", k + 1), z_lo, f64::INFINITY)))
        .collect();
    for row in &x {
        m.lincons.push(LinCon::new(
            row.iter().map(|&v| t(v, 1.0)).collect(),
            Sense::Le,
            1.0,
            "count_once",
        ));
    }
    for k in 0..p {
        let mut terms = vec![t(w[k], 1.0)];
        terms.extend((0..n).filter(|&i| instance.weights[i] != 0.0).map(|i| t(x[i][k], -instance.weights[i])));
        m.lincons.push(LinCon::new(terms, Sense::Eq, 0.0, "coverage_def"));
    }
    for k in 1..p {
        m.lincons.push(LinCon::new(
            vec![t(w[k - 1], 1.0), t(w[k], -1.0)],
            Sense::Le,
            0.0,
            "sorting",
        ));
    }
    let lambda = spec.weights().lambda();
    if alpha.is_one() {
        let pos_min = instance
            .weights
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let lo = if pos_min.is_finite() { pos_min } else { 1.0 };
        let hi = total.max(lo);
        let bps = log_breakpoints(lo, hi, opts.pwl_breakpoints.max(1));
        for k in 0..p {
            for &bp in &bps {
                // Z <= ln(bp) + (W - bp) / bp
                m.lincons.push(LinCon::new(
                    vec![t(z[k], 1.0), t(w[k], -1.0 / bp)],
                    Sense::Le,
                    bp.ln() - 1.0,
                    "log_pwl",
                ));
            }
        }
        m.objective.terms = (0..p).filter(|&k| lambda[k] != 0.0).map(|k| t(z[k], lambda[k])).collect();
        m.metadata.insert("pwl_breakpoints".into(), bps.len().to_string());
        m.metadata.insert("pwl_range".into(), format!("[{lo}, {hi}]"));
    } else {
        let mut one: Option<VarId> = None;
        for k in 0..p {
            let sys = decompose_power(&format!("Z_{}", k + 1), &format!("W_{}", k + 1), alpha)?;
            embed_power(m, &sys, z[k], w[k], &mut one);
        }
        let scale = 1.0 / (1.0 - alpha.to_f64());
        m.objective.terms = (0..p)
            .filter(|&k| lambda[k] != 0.0)
            .map(|k| t(z[k], lambda[k] * scale))
            .collect();
    }
    m.metadata.insert("n".into(), n.to_string());
    m.metadata.insert("p".into(), p.to_string());
    m.metadata.insert("alpha".into(), alpha.to_string());
    m.metadata.insert("lambda".into(), serde_json::to_string(lambda).expect("floats"));
    m.metadata.insert("omega".into(), serde_json::to_string(&instance.weights).expect("floats"));
    m.metadata.insert("spec".into(), serde_json::to_string(spec).expect("spec"));
    m.metadata.insert("instance_hash".into(), instance.content_hash());
    m.metadata.insert("name".into(), instance.name.clone());
    Ok(Core { x })
}

fn log_breakpoints(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 || hi <= lo {
        return vec![lo];
    }
    let ratio = hi / lo;
    (0..count)
        .map(|j| lo * ratio.powf(j as f64 / (count - 1) as f64))
        .collect()
}

fn embed_power(m: &mut ModelIR, sys: &PowerSystem, z: VarId, w: VarId, one: &mut Option<VarId>) {
    let mut map = vec![usize::MAX; sys.vars.len()];
    map[POWER_Z] = z;
    map[POWER_W] = w;
    if sys.uses_one() {
        let id = *one.get_or_insert_with(|| m.add_var(Var::cont("one".into(), 1.0, 1.0)));
        map[POWER_ONE] = id;
    }
    for (j, v) in sys.vars.iter().enumerate().skip(3) {
        map[j] = m.add_var(v.clone());
    }
    let remap = |ts: &[Term]| ts.iter().map(|x| t(map[x.var], x.coef)).collect::<Vec<_>>();
    for c in &sys.cones {
        m.conecons.push(ConeCon {
            kind: c.kind,
            head: remap(&c.head),
            tail: remap(&c.tail),
            tag: c.tag.clone(),
        });
    }
    for c in &sys.lincons {
        m.lincons.push(LinCon::new(remap(&c.terms), c.sense, c.rhs, &c.tag));
    }
}

fn objective_kind(spec: &FairnessSpec) -> ObjectiveKind {
    if spec.alpha().is_one() {
        ObjectiveKind::LogPwl
    } else {
        ObjectiveKind::Power
    }
}

fn check_p(spec: &FairnessSpec, p: usize) -> Result<()> {
    if p == 0 || spec.p() != p {
        return Err(FmclpError::LengthMismatch {
            expected: p,
            got: spec.p(),
        });
    }
    Ok(())
}

/// Discrete formulation over the candidate sites of `instance`, with
/// coverage sets computed for radius `r`.
pub fn build_discrete(
    instance: &Instance,
    spec: &FairnessSpec,
    p: usize,
    r: f64,
    opts: &ModelOptions,
) -> Result<ModelIR> {
    instance.validate()?;
    check_p(spec, p)?;
    check_radius(r)?;
    let sites = instance.candidate_sites();
    if p > sites.len() {
        return Err(FmclpError::TooManyFacilities { p, m: sites.len() });
    }
    let mut m = ModelIR::empty(objective_kind(spec));
    let core = add_core(&mut m, instance, spec, opts)?;
    let y: Vec<Vec<VarId>> = (0..sites.len())
        .map(|j| (0..p).map(|k| m.add_var(Var::binary(format!("y_{}_{}", j + 1, k + 1)))).collect())
        .collect();
    let sets = coverage_sets(instance, sites, r);
    let mut coverers = vec![Vec::new(); instance.len()];
    for (j, s) in sets.iter().enumerate() {
        for &i in s {
            coverers[i].push(j);
        }
    }
    for (i, cj) in coverers.iter().enumerate() {
        for k in 0..p {
            let mut terms = vec![t(core.x[i][k], 1.0)];
            terms.extend(cj.iter().map(|&j| t(y[j][k], -1.0)));
            m.lincons.push(LinCon::new(terms, Sense::Le, 0.0, "cover"));
        }
    }
    for k in 0..p {
        m.lincons.push(LinCon::new(
            y.iter().map(|row| t(row[k], 1.0)).collect(),
            Sense::Eq,
            1.0,
            "slot_filled",
        ));
    }
    for row in &y {
        m.lincons.push(LinCon::new(
            row.iter().map(|&v| t(v, 1.0)).collect(),
            Sense::Le,
            1.0,
            "site_once",
        ));
    }
    m.metadata.insert("formulation".into(), "discrete".into());
    m.metadata.insert("m".into(), sites.len().to_string());
    m.metadata.insert("R".into(), r.to_string());
    Ok(m)
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(FmclpError::InvalidParameter(format!("coverage radius must be > 0, got {r}")));
    }
    Ok(())
}

/// Big-M constants `U_i = max_{i'} ||a_i - a_{i'}||`.
pub fn big_m(instance: &Instance) -> Vec<f64> {
    let pts = &instance.points;
    pts.iter()
        .map(|a| {
            pts.iter()
                .map(|b| distance_unchecked(a.coords(), b.coords(), instance.norm))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Continuous Euclidean formulation with facility coordinates and big-M
/// distance rows.
pub fn build_continuous(
    instance: &Instance,
    spec: &FairnessSpec,
    p: usize,
    r: f64,
    opts: &ModelOptions,
) -> Result<ModelIR> {
    instance.validate()?;
    check_p(spec, p)?;
    check_radius(r)?;
    if !instance.norm.is_euclidean() {
        return Err(FmclpError::Unsupported(format!(
            "continuous model needs the Euclidean norm, got {:?}",
            instance.norm
        )));
    }
    let (n, d) = (instance.len(), instance.dim());
    let mut m = ModelIR::empty(objective_kind(spec));
    let core = add_core(&mut m, instance, spec, opts)?;
    let xk: Vec<Vec<VarId>> = (0..p)
        .map(|k| {
            (0..d)
                .map(|l| m.add_var(Var::cont(format!("X_{}_{}", k + 1, l + 1), f64::NEG_INFINITY, f64::INFINITY)))
                .collect()
        })
        .collect();
    let u = big_m(instance);
    for i in 0..n {
        let a = instance.points[i].coords();
        for k in 0..p {
            let v: Vec<VarId> = (0..d)
                .map(|l| m.add_var(Var::cont(format!("v_{}_{}_{}", i + 1, k + 1, l + 1), 0.0, f64::INFINITY)))
                .collect();
            let s = m.add_var(Var::cont(format!("s_{}_{}", i + 1, k + 1), 0.0, f64::INFINITY));
            for l in 0..d {
                m.lincons.push(LinCon::new(
                    vec![t(v[l], 1.0), t(xk[k][l], -1.0)],
                    Sense::Ge,
                    -a[l],
                    "norm_pos",
                ));
                m.lincons.push(LinCon::new(
                    vec![t(v[l], 1.0), t(xk[k][l], 1.0)],
                    Sense::Ge,
                    a[l],
                    "norm_neg",
                ));
            }
            m.conecons.push(ConeCon {
                kind: ConeKind::SecondOrder,
                head: vec![t(s, 1.0)],
                tail: v.iter().map(|&vl| t(vl, 1.0)).collect(),
                tag: "norm_cone".into(),
            });
            m.lincons.push(LinCon::new(
                vec![t(s, 1.0), t(core.x[i][k], u[i])],
                Sense::Le,
                r + u[i],
                "norm_bigm",
            ));
        }
    }
    m.metadata.insert("formulation".into(), "continuous".into());
    m.metadata.insert("R".into(), r.to_string());
    m.metadata.insert("U".into(), serde_json::to_string(&u).expect("floats"));
    Ok(m)
}

/// Coordinate-free planar formulation: cluster cuts replace the facility
/// coordinates. `initial_cuts = None` uses every minimal infeasible set of
/// at most three points.
pub fn build_continuous_cut_model(
    instance: &Instance,
    spec: &FairnessSpec,
    p: usize,
    r: f64,
    initial_cuts: Option<Vec<Vec<usize>>>,
    opts: &ModelOptions,
) -> Result<ModelIR> {
    instance.validate()?;
    check_p(spec, p)?;
    check_radius(r)?;
    if instance.dim() != 2 || !instance.norm.is_euclidean() {
        return Err(FmclpError::Unsupported("cut model needs planar Euclidean instances".into()));
    }
    let cuts = match initial_cuts {
        Some(c) => c,
        None => geometry::incompatible_sets(instance, r, 3, Exec::Seq)?,
    };
    let mut m = ModelIR::empty(objective_kind(spec));
    add_core(&mut m, instance, spec, opts)?;
    m.cuts = cuts
        .into_iter()
        .map(|mut set| {
            set.sort_unstable();
            CutRecord { set, tag: "cut".into() }
        })
        .collect();
    m.metadata.insert("formulation".into(), "continuous_cuts".into());
    m.metadata.insert("R".into(), r.to_string());
    m.metadata.insert("cover_tol".into(), COVER_TOL.to_string());
    m.validate()?;
    Ok(m)
}

/// Visits every feasible point obtained from a 0/1 assignment of the
/// binaries, with its objective value.
///
/// Continuous variables are fixed by propagating equality rows with one
/// unknown; assignments leaving a continuous variable undetermined are an
/// error, so this suits the alpha = 0 models.
pub fn enumerate_binaries(m: &ModelIR, max_binaries: usize, mut visit: impl FnMut(&[f64], f64)) -> Result<()> {
    let bins: Vec<VarId> = (0..m.vars.len()).filter(|&v| m.vars[v].kind == VarKind::Binary).collect();
    if bins.len() > max_binaries.min(40) {
        return Err(FmclpError::CapExceeded {
            states: 1u128 << bins.len().min(127),
            cap: 1u128 << max_binaries.min(40),
        });
    }
    let eqs: Vec<&LinCon> = m.lincons.iter().filter(|c| c.sense == Sense::Eq).collect();
    let mut x = vec![f64::NAN; m.vars.len()];
    for (v, var) in m.vars.iter().enumerate() {
        if var.lo == var.hi {
            x[v] = var.lo;
        }
    }
    let fixed = x.clone();
    for mask in 0u64..(1u64 << bins.len()) {
        x.copy_from_slice(&fixed);
        for (b, &v) in bins.iter().enumerate() {
            x[v] = ((mask >> b) & 1) as f64;
        }
        loop {
            let mut progress = false;
            for c in &eqs {
                let mut unknown = c.terms.iter().filter(|t| x[t.var].is_nan());
                if let (Some(u), None) = (unknown.next(), unknown.next()) {
                    let rest: f64 = c.terms.iter().filter(|t| t.var != u.var).map(|t| t.coef * x[t.var]).sum();
                    x[u.var] = (c.rhs - rest) / u.coef;
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        if let Some(v) = x.iter().position(|v| v.is_nan()) {
            return Err(FmclpError::Model(format!(
                "variable {} is not determined by the binaries",
                m.vars[v].name
            )));
        }
        if let Some(obj) = m.evaluate(&x, 1e-9)? {
            visit(&x, obj);
        }
    }
    Ok(())
}

/// Best objective over [`enumerate_binaries`]; `None` if nothing is feasible.
pub fn brute_force_ir(m: &ModelIR, max_binaries: usize) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    enumerate_binaries(m, max_binaries, |_, obj| {
        if best.is_none_or(|b| obj > b) {
            best = Some(obj);
        }
    })?;
    Ok(best)
}
