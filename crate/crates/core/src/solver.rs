//! Exact solvers for the fair covering problem.
//!
//! * [`solve_discrete`]: branch and bound over candidate subsets, each leaf
//!   resolved by the allocation branch and bound of [`allocate`].
//! * [`solve_continuous_fds`]: the same search over the planar finite
//!   dominating set, facilities moved to the 1-center of their cluster.
//! * [`solve_row_generation`]: assignment master plus cluster-feasibility
//!   separation.
//! * [`brute_force`]: exhaustive oracle.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{FmclpError, Result};
use crate::fairness::{ExtReal, FairnessSpec};
use crate::geometry::{self, distance_unchecked, one_center_refs, Point, COVER_TOL};
use crate::instance::Instance;
use crate::par::{self, Exec};

pub const DEFAULT_TIME_LIMIT: f64 = 7200.0;
pub const DEFAULT_BRUTE_CAP: u128 = 10_000_000;
const CLOCK_EVERY: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Space {
    #[serde(rename = "disc")]
    Discrete,
    #[serde(rename = "cont")]
    Continuous,
}

impl Space {
    pub fn as_str(self) -> &'static str {
        match self {
            Space::Discrete => "disc",
            Space::Continuous => "cont",
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Space {
    type Err = FmclpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disc" | "discrete" => Ok(Space::Discrete),
            "cont" | "continuous" => Ok(Space::Continuous),
            _ => Err(FmclpError::InvalidParameter(format!("unknown space {s:?} (disc|cont)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Branch and bound for discrete sites, the candidate set for the plane.
    #[default]
    Auto,
    BruteForce,
    BranchBound,
    CandidateSet,
    RowGeneration,
}

impl FromStr for SolveMode {
    type Err = FmclpError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SolveMode::Auto),
            "brute" => Ok(SolveMode::BruteForce),
            "bb" => Ok(SolveMode::BranchBound),
            "fds" => Ok(SolveMode::CandidateSet),
            "rowgen" => Ok(SolveMode::RowGeneration),
            _ => Err(FmclpError::InvalidParameter(format!(
                "unknown mode {s:?} (auto|bb|fds|rowgen|brute)"
            ))),
        }
    }
}

/// Initial cut pool for row generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarmStart {
    /// Every minimal infeasible set of size at most `d + 1`.
    #[default]
    Helly,
    /// Infeasible pairs only.
    Pairs,
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    /// Relative optimality gap accepted when pruning.
    pub tol: f64,
    pub mode: SolveMode,
    pub exec: Exec,
    /// Largest number of allocation states the brute-force oracle will visit.
    pub brute_cap: u128,
    pub warm_start: WarmStart,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit: DEFAULT_TIME_LIMIT,
            tol: 0.0,
            mode: SolveMode::Auto,
            exec: Exec::default(),
            brute_cap: DEFAULT_BRUTE_CAP,
            warm_start: WarmStart::Helly,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit > 0.0) {
            return Err(FmclpError::InvalidParameter(format!(
                "time limit must be > 0, got {}",
                self.time_limit
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(FmclpError::InvalidParameter(format!("tolerance must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }

    fn deadline(&self, start: Instant) -> Option<Instant> {
        if self.time_limit.is_finite() {
            start.checked_add(Duration::from_secs_f64(self.time_limit))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped early; `gap` is `(UB - LB) / max(|UB|, 1e-12)`.
    Feasible { gap: f64 },
    /// The best achievable value is minus infinity.
    DegenerateMinusInfinity { witness: String },
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible { .. } => "feasible",
            SolveStatus::DegenerateMinusInfinity { .. } => "degenerate",
        }
    }

    pub fn gap(&self) -> f64 {
        match self {
            SolveStatus::Feasible { gap } => *gap,
            _ => 0.0,
        }
    }

    /// Whether the objective is proven optimal.
    pub fn is_certified(&self) -> bool {
        !matches!(self, SolveStatus::Feasible { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facility {
    /// Index into the candidate sites, for discrete solutions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<usize>,
    pub location: Point,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub rounds: usize,
    pub cuts: usize,
    pub elapsed_seconds: f64,
}

/// A solved instance. Facility slots are ordered by nondecreasing coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSolution {
    pub facilities: Vec<Facility>,
    /// Slot (0-based) serving each demand point, `None` if uncovered.
    pub assignment: Vec<Option<usize>>,
    #[serde(rename = "W")]
    pub coverage: Vec<f64>,
    pub objective: ExtReal,
    pub status: SolveStatus,
    pub instance_hash: String,
    pub stats: SolveStats,
}

impl CoverageSolution {
    pub fn total_coverage(&self) -> f64 {
        self.coverage.iter().sum()
    }

    pub fn min_coverage(&self) -> f64 {
        self.coverage.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks the solution invariants against the instance.
    pub fn verify(&self, instance: &Instance, spec: &FairnessSpec, r: f64) -> Result<()> {
        let bad = |m: String| Err(FmclpError::InvalidInstance(m));
        if self.instance_hash != instance.content_hash() {
            return bad("solution belongs to a different instance".into());
        }
        let p = self.facilities.len();
        if self.coverage.len() != p || p != spec.p() || self.assignment.len() != instance.len() {
            return bad("solution dimensions disagree with the instance".into());
        }
        let limit = r * (1.0 + COVER_TOL);
        let mut w = vec![0.0; p];
        for (i, slot) in self.assignment.iter().enumerate() {
            let a = instance.points[i].coords();
            match *slot {
                Some(k) if k >= p => return bad(format!("point {i} assigned to missing slot {k}")),
                Some(k) => {
                    if distance_unchecked(self.facilities[k].location.coords(), a, instance.norm) > limit {
                        return bad(format!("point {i} is outside the ball of slot {k}"));
                    }
                    w[k] += instance.weights[i];
                }
                None => {
                    let covered = self
                        .facilities
                        .iter()
                        .any(|f| distance_unchecked(f.location.coords(), a, instance.norm) <= limit);
                    if covered {
                        return bad(format!("point {i} is coverable but unassigned"));
                    }
                }
            }
        }
        for (k, (a, b)) in w.iter().zip(&self.coverage).enumerate() {
            if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                return bad(format!("slot {k} coverage {b} does not match assigned weight {a}"));
            }
        }
        if self.coverage.windows(2).any(|x| x[0] > x[1]) {
            return bad("coverage is not sorted by slot".into());
        }
        let obj = crate::fairness::fair_owa(&self.coverage, spec)?;
        if !obj.approx_eq(self.objective, 1e-9) {
            return bad(format!("objective {} does not match recomputed {obj}", self.objective));
        }
        Ok(())
    }
}

/// Outcome of [`allocate`]; slots follow the order of the open facilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub assignment: Vec<Option<usize>>,
    pub coverage: Vec<f64>,
    pub objective: ExtReal,
    pub nodes: u64,
}

fn check_common(instance: &Instance, spec: &FairnessSpec, p: usize, r: f64) -> Result<()> {
    instance.validate()?;
    if p == 0 {
        return Err(FmclpError::InvalidParameter("p must be at least 1".into()));
    }
    if spec.p() != p {
        return Err(FmclpError::LengthMismatch {
            expected: p,
            got: spec.p(),
        });
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(FmclpError::InvalidParameter(format!("coverage radius must be > 0, got {r}")));
    }
    Ok(())
}

/// Demand points covered by each site, in index order.
pub(crate) fn coverage_sets(instance: &Instance, sites: &[Point], r: f64) -> Vec<Vec<usize>> {
    let limit = r * (1.0 + COVER_TOL);
    sites
        .iter()
        .map(|s| {
            (0..instance.len())
                .filter(|&i| distance_unchecked(s.coords(), instance.points[i].coords(), instance.norm) <= limit)
                .collect()
        })
        .collect()
}

fn eval(spec: &FairnessSpec, w: &[f64], scratch: &mut Vec<f64>) -> ExtReal {
    scratch.clear();
    scratch.extend_from_slice(w);
    spec.eval_in_place(scratch)
}

fn rel_gap(ub: ExtReal, lb: ExtReal) -> f64 {
    match (ub, lb) {
        (ExtReal::NegInf, _) => 0.0,
        (ExtReal::Finite(_), ExtReal::NegInf) => f64::INFINITY,
        (ExtReal::Finite(u), ExtReal::Finite(l)) => ((u - l) / u.abs().max(1e-12)).max(0.0),
    }
}

fn within_tol(bound: ExtReal, best: ExtReal, tol: f64) -> bool {
    tol > 0.0 && rel_gap(bound, best) <= tol
}

fn timed_out(nodes: u64, deadline: Option<Instant>) -> bool {
    nodes.is_multiple_of(CLOCK_EVERY) && deadline.is_some_and(|d| Instant::now() >= d)
}

/// Allocation of contested points among fixed facilities.
struct AllocEngine<'a> {
    spec: &'a FairnessSpec,
    weights: &'a [f64],
    p: usize,
    /// Coverers of each point, by facility position.
    who: Vec<Vec<usize>>,
    base: Vec<f64>,
    contested: Vec<usize>,
    suffix: Vec<Vec<f64>>,
}

impl<'a> AllocEngine<'a> {
    fn new(sets: &[&[usize]], n: usize, weights: &'a [f64], spec: &'a FairnessSpec) -> Self {
        let p = sets.len();
        let mut who = vec![Vec::new(); n];
        for (f, s) in sets.iter().enumerate() {
            for &i in *s {
                who[i].push(f);
            }
        }
        let mut base = vec![0.0; p];
        let mut contested = Vec::new();
        for (i, c) in who.iter().enumerate() {
            match c.len() {
                0 => {}
                1 => base[c[0]] += weights[i],
                _ => contested.push(i),
            }
        }
        contested.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        let mut suffix = vec![vec![0.0; p]; contested.len() + 1];
        for t in (0..contested.len()).rev() {
            let i = contested[t];
            let mut row = suffix[t + 1].clone();
            for &f in &who[i] {
                row[f] += weights[i];
            }
            suffix[t] = row;
        }
        AllocEngine {
            spec,
            weights,
            p,
            who,
            base,
            contested,
            suffix,
        }
    }

    fn run(&self) -> Allocation {
        let mut scratch = Vec::with_capacity(self.p);
        let mut cur = self.base.clone();
        let mut choice = Vec::with_capacity(self.contested.len());
        for &i in &self.contested {
            let f = *self.who[i]
                .iter()
                .min_by(|&&a, &&b| cur[a].total_cmp(&cur[b]))
                .expect("contested point has coverers");
            cur[f] += self.weights[i];
            choice.push(f);
        }
        let mut best = (eval(self.spec, &cur, &mut scratch), choice);
        let mut levels = vec![vec![0.0; self.p]; self.contested.len() + 1];
        levels[0].copy_from_slice(&self.base);
        let mut path = vec![0; self.contested.len()];
        let mut nodes = 0;
        self.dfs(0, &mut levels, &mut path, &mut best, &mut scratch, &mut nodes);
        self.finish(&best.1, nodes)
    }

    fn dfs(
        &self,
        t: usize,
        levels: &mut [Vec<f64>],
        path: &mut [usize],
        best: &mut (ExtReal, Vec<usize>),
        scratch: &mut Vec<f64>,
        nodes: &mut u64,
    ) {
        *nodes += 1;
        if t == self.contested.len() {
            let v = eval(self.spec, &levels[t], scratch);
            if v > best.0 {
                *best = (v, path.to_vec());
            }
            return;
        }
        scratch.clear();
        scratch.extend(levels[t].iter().zip(&self.suffix[t]).map(|(a, b)| a + b));
        if self.spec.eval_in_place(scratch) <= best.0 {
            return;
        }
        let i = self.contested[t];
        for &f in &self.who[i] {
            let (head, tail) = levels.split_at_mut(t + 1);
            tail[0].copy_from_slice(&head[t]);
            tail[0][f] += self.weights[i];
            path[t] = f;
            self.dfs(t + 1, levels, path, best, scratch, nodes);
        }
    }

    fn finish(&self, choice: &[usize], nodes: u64) -> Allocation {
        let mut assignment: Vec<Option<usize>> = self.who.iter().map(|c| c.first().copied()).collect();
        for (&i, &f) in self.contested.iter().zip(choice) {
            assignment[i] = Some(f);
        }
        let coverage = coverage_of(&assignment, self.weights, self.p);
        let mut scratch = Vec::with_capacity(self.p);
        Allocation {
            objective: eval(self.spec, &coverage, &mut scratch),
            assignment,
            coverage,
            nodes,
        }
    }
}

fn coverage_of(assignment: &[Option<usize>], weights: &[f64], p: usize) -> Vec<f64> {
    let mut w = vec![0.0; p];
    for (i, s) in assignment.iter().enumerate() {
        if let Some(k) = s {
            w[*k] += weights[i];
        }
    }
    w
}

/// Optimal split of the covered demand among fixed facilities.
///
/// Points covered by a single facility are assigned to it; contested points
/// are resolved by branch and bound, crediting every remaining contested
/// point to all of its coverers as the bound.
pub fn allocate(open: &[Point], instance: &Instance, spec: &FairnessSpec, r: f64) -> Result<Allocation> {
    check_common(instance, spec, open.len(), r)?;
    if let Some(f) = open.iter().find(|f| f.dim() != instance.dim()) {
        return Err(FmclpError::DimensionMismatch {
            expected: instance.dim(),
            got: f.dim(),
        });
    }
    let sets = coverage_sets(instance, open, r);
    let refs: Vec<&[usize]> = sets.iter().map(Vec::as_slice).collect();
    Ok(AllocEngine::new(&refs, instance.len(), &instance.weights, spec).run())
}

struct Incumbent {
    sites: Vec<usize>,
    alloc: Allocation,
    from_search: bool,
}

/// Branch and bound over site subsets (or multisets when `repeat`).
struct SelectSearch<'a> {
    sets: &'a [Vec<usize>],
    full: Vec<f64>,
    suffix_max: Vec<f64>,
    repeat: bool,
    p: usize,
    n: usize,
    weights: &'a [f64],
    spec: &'a FairnessSpec,
    tol: f64,
    deadline: Option<Instant>,
    nodes: u64,
    aborted: bool,
    pending_ub: ExtReal,
    best: Option<Incumbent>,
    scratch: Vec<f64>,
}

impl<'a> SelectSearch<'a> {
    fn new(
        sets: &'a [Vec<usize>],
        repeat: bool,
        p: usize,
        instance: &'a Instance,
        spec: &'a FairnessSpec,
        opts: &SolveOptions,
        start: Instant,
    ) -> Self {
        let full: Vec<f64> = sets.iter().map(|s| s.iter().map(|&i| instance.weights[i]).sum()).collect();
        let mut suffix_max = vec![0.0f64; sets.len() + 1];
        for j in (0..sets.len()).rev() {
            suffix_max[j] = suffix_max[j + 1].max(full[j]);
        }
        SelectSearch {
            sets,
            full,
            suffix_max,
            repeat,
            p,
            n: instance.len(),
            weights: &instance.weights,
            spec,
            tol: opts.tol,
            deadline: opts.deadline(start),
            nodes: 0,
            aborted: false,
            pending_ub: ExtReal::NegInf,
            best: None,
            scratch: Vec::with_capacity(p),
        }
    }

    fn allocate(&mut self, sites: &[usize]) -> Allocation {
        let refs: Vec<&[usize]> = sites.iter().map(|&j| self.sets[j].as_slice()).collect();
        let a = AllocEngine::new(&refs, self.n, self.weights, self.spec).run();
        self.nodes += a.nodes;
        a
    }

    fn greedy(&mut self) {
        let mut covered = vec![false; self.n];
        let mut picks: Vec<usize> = Vec::with_capacity(self.p);
        for _ in 0..self.p {
            let mut best: Option<(f64, usize)> = None;
            for (j, s) in self.sets.iter().enumerate() {
                if !self.repeat && picks.contains(&j) {
                    continue;
                }
                let gain: f64 = s.iter().filter(|&&i| !covered[i]).map(|&i| self.weights[i]).sum();
                if best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, j));
                }
            }
            let (_, j) = best.expect("p <= number of sites");
            for &i in &self.sets[j] {
                covered[i] = true;
            }
            picks.push(j);
        }
        picks.sort_unstable();
        let alloc = self.allocate(&picks);
        self.best = Some(Incumbent {
            sites: picks,
            alloc,
            from_search: false,
        });
    }

    fn bound(&mut self, chosen: &[usize], rest: f64) -> ExtReal {
        self.scratch.clear();
        self.scratch.extend(chosen.iter().map(|&j| self.full[j]));
        self.scratch.resize(self.p, rest);
        self.spec.eval_in_place(&mut self.scratch)
    }

    fn pruned(&self, bound: ExtReal, chosen: &[usize]) -> bool {
        let Some(inc) = &self.best else { return false };
        match bound.cmp(&inc.alloc.objective) {
            Ordering::Less => true,
            Ordering::Equal => inc.from_search || chosen > &inc.sites[..chosen.len()],
            Ordering::Greater => within_tol(bound, inc.alloc.objective, self.tol),
        }
    }

    fn next_start(&self, j: usize) -> usize {
        if self.repeat {
            j
        } else {
            j + 1
        }
    }

    fn dfs(&mut self, start: usize, chosen: &mut Vec<usize>) {
        self.nodes += 1;
        if timed_out(self.nodes, self.deadline) {
            self.aborted = true;
            let b = self.bound(chosen, self.suffix_max[start]);
            self.pending_ub = self.pending_ub.max(b);
            return;
        }
        if chosen.len() == self.p {
            let alloc = self.allocate(chosen);
            let better = match &self.best {
                None => true,
                Some(inc) => match alloc.objective.cmp(&inc.alloc.objective) {
                    Ordering::Greater => true,
                    Ordering::Equal => chosen.as_slice() < inc.sites.as_slice(),
                    Ordering::Less => false,
                },
            };
            if better {
                self.best = Some(Incumbent {
                    sites: chosen.clone(),
                    alloc,
                    from_search: true,
                });
            }
            return;
        }
        let need = self.p - chosen.len();
        let end = if self.repeat {
            self.sets.len()
        } else {
            (self.sets.len() + 1).saturating_sub(need)
        };
        for j in start..end {
            chosen.push(j);
            let next = self.next_start(j);
            let b = self.bound(chosen, self.suffix_max[next]);
            if self.aborted {
                self.pending_ub = self.pending_ub.max(b);
            } else if !self.pruned(b, chosen) {
                self.dfs(next, chosen);
            }
            chosen.pop();
        }
    }

    fn run(mut self) -> (Incumbent, u64, Option<f64>) {
        self.greedy();
        let mut chosen = Vec::with_capacity(self.p);
        self.dfs(0, &mut chosen);
        let inc = self.best.expect("greedy incumbent");
        let gap = self
            .aborted
            .then(|| rel_gap(self.pending_ub.max(inc.alloc.objective), inc.alloc.objective));
        (inc, self.nodes, gap)
    }
}

fn status_for(objective: ExtReal, gap: Option<f64>, coverage: &[f64]) -> SolveStatus {
    match gap {
        Some(g) => SolveStatus::Feasible { gap: g },
        None if objective.is_neg_inf() => {
            let k = coverage.iter().position(|&w| w <= 0.0).unwrap_or(0);
            SolveStatus::DegenerateMinusInfinity {
                witness: format!(
                    "the optimal allocation leaves slot {k} with zero coverage; \
                     with alpha >= 1 every feasible solution scores -inf"
                ),
            }
        }
        None => SolveStatus::Optimal,
    }
}

/// Sorts slots by coverage and fills in objective and status.
fn assemble(
    instance: &Instance,
    spec: &FairnessSpec,
    facilities: Vec<Facility>,
    assignment: Vec<Option<usize>>,
    gap: Option<f64>,
    stats: SolveStats,
) -> CoverageSolution {
    let p = facilities.len();
    let raw = coverage_of(&assignment, &instance.weights, p);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let mut rank = vec![0; p];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    let assignment: Vec<Option<usize>> = assignment.iter().map(|s| s.map(|k| rank[k])).collect();
    let mut slots: Vec<Option<Facility>> = facilities.into_iter().map(Some).collect();
    let facilities: Vec<Facility> = order.iter().map(|&k| slots[k].take().expect("permutation")).collect();
    let coverage = coverage_of(&assignment, &instance.weights, p);
    let objective = spec.eval_sorted(&coverage);
    CoverageSolution {
        status: status_for(objective, gap, &coverage),
        facilities,
        assignment,
        coverage,
        objective,
        instance_hash: instance.content_hash(),
        stats,
    }
}

/// Moves each facility to the 1-center of its cluster, then hands every
/// still-unassigned point that some facility now reaches to the facility
/// that gains the most objective from it.
fn settle_continuous(
    instance: &Instance,
    spec: &FairnessSpec,
    r: f64,
    default_sites: Vec<Point>,
    mut assignment: Vec<Option<usize>>,
) -> Result<(Vec<Facility>, Vec<Option<usize>>)> {
    let p = default_sites.len();
    let mut facilities = Vec::with_capacity(p);
    for (k, site) in default_sites.into_iter().enumerate() {
        let cluster: Vec<&Point> = (0..instance.len())
            .filter(|&i| assignment[i] == Some(k))
            .map(|i| &instance.points[i])
            .collect();
        let location = if cluster.is_empty() {
            site
        } else {
            one_center_refs(&cluster, instance.norm)?.center
        };
        facilities.push(Facility {
            candidate: None,
            location,
        });
    }
    let limit = r * (1.0 + COVER_TOL);
    let mut scratch = Vec::with_capacity(p);
    for i in 0..instance.len() {
        if assignment[i].is_some() {
            continue;
        }
        let a = instance.points[i].coords();
        let reach: Vec<usize> = (0..p)
            .filter(|&k| distance_unchecked(facilities[k].location.coords(), a, instance.norm) <= limit)
            .collect();
        let mut best: Option<(ExtReal, usize)> = None;
        for k in reach {
            assignment[i] = Some(k);
            let v = eval(spec, &coverage_of(&assignment, &instance.weights, p), &mut scratch);
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, k));
            }
        }
        assignment[i] = best.map(|(_, k)| k);
    }
    Ok((facilities, assignment))
}

/// Exact discrete solve: choose `p` distinct candidate sites.
pub fn solve_discrete(
    instance: &Instance,
    spec: &FairnessSpec,
    p: usize,
    r: f64,
    opts: &SolveOptions,
) -> Result<CoverageSolution> {
    let start = Instant::now();
    check_common(instance, spec, p, r)?;
    opts.validate()?;
    let sites = instance.candidate_sites();
    if p > sites.len() {
        return Err(FmclpError::TooManyFacilities { p, m: sites.len() });
    }
    let sets = coverage_sets(instance, sites, r);
    let (inc, nodes, gap) = SelectSearch::new(&sets, false, p, instance, spec, opts, start).run();
    let facilities = inc
        .sites
        .iter()
        .map(|&j| Facility {
            candidate: Some(j),
            location: sites[j].clone(),
        })
        .collect();
    let stats = SolveStats {
        nodes,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(assemble(instance, spec, facilities, inc.alloc.assignment, gap, stats))
}

/// Finite dominating set candidates with distinct coverage, optionally
/// dropping those whose coverage is contained in another's.
fn planar_sites(instance: &Instance, r: f64, drop_dominated: bool) -> Result<(Vec<Point>, Vec<Vec<usize>>)> {
    let cands = geometry::candidate_locations(instance, r)?;
    let sets = coverage_sets(instance, &cands, r);
    let mut keep: Vec<usize> = Vec::new();
    for (j, s) in sets.iter().enumerate() {
        if !keep.iter().any(|&k| sets[k] == *s) {
            keep.push(j);
        }
    }
    if drop_dominated {
        let masks: Vec<Vec<bool>> = keep
            .iter()
            .map(|&j| {
                let mut m = vec![false; instance.len()];
                sets[j].iter().for_each(|&i| m[i] = true);
                m
            })
            .collect();
        let kept = keep.clone();
        keep = kept
            .iter()
            .enumerate()
            .filter(|(a, &ja)| {
                !kept.iter().enumerate().any(|(b, &jb)| {
                    b != *a && sets[jb].len() > sets[ja].len() && sets[ja].iter().all(|&i| masks[b][i])
                })
            })
            .map(|(_, &j)| j)
            .collect();
    }
    let pts = keep.iter().map(|&j| cands[j].clone()).collect();
    let sets = keep.iter().map(|&j| sets[j].clone()).collect();
    Ok((pts, sets))
}

/// Continuous planar solve over the finite dominating set.
///
/// Facilities may share a site; each is finally moved to the 1-center of
/// the points it serves.
pub fn solve_continuous_fds(
    instance: &Instance,
    spec: &FairnessSpec,
    p: usize,
    r: f64,
    opts: &SolveOptions,
) -> Result<CoverageSolution> {
    let start = Instant::now();
    check_common(instance, spec, p, r)?;
    opts.validate()?;
    let (pts, sets) = planar_sites(instance, r, true)?;
    let (inc, nodes, gap) = SelectSearch::new(&sets, true, p, instance, spec, opts, start).run();
    let defaults = inc.sites.iter().map(|&j| pts[j].clone()).collect();
    let (facilities, assignment) = settle_continuous(instance, spec, r, defaults, inc.alloc.assignment)?;
    let stats = SolveStats {
        nodes,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok(assemble(instance, spec, facilities, assignment, gap, stats))
}

/// A separation cut added during row generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutEvent {
    pub round: usize,
    /// Master slot whose cluster was found infeasible.
    pub slot: usize,
    pub set: Vec<usize>,
    /// `sum_{i in set} x_{i,slot} > |set| - 1` at the master incumbent.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowGenOutcome {
    pub solution: CoverageSolution,
    pub warm_cuts: Vec<Vec<usize>>,
    pub added_cuts: Vec<CutEvent>,
}

type Mask = u128;
const MAX_ROWGEN_POINTS: usize = Mask::BITS as usize;

struct Master<'a> {
    order: Vec<usize>,
    weights: &'a [f64],
    spec: &'a FairnessSpec,
    p: usize,
    /// Per point: masks of the other members of every cut containing it.
    cut_masks: Vec<Vec<Mask>>,
    pair_block: Vec<Mask>,
    deadline: Option<Instant>,
    nodes: u64,
    aborted: bool,
    pending_ub: ExtReal,
    best: (ExtReal, Vec<Option<usize>>),
    scratch: Vec<f64>,
}

#[derive(Clone)]
struct Groups {
    w: Vec<f64>,
    members: Vec<Mask>,
    blocked: Vec<Mask>,
    opened: usize,
}

impl<'a> Master<'a> {
    fn add_cut(&mut self, cut: &[usize]) {
        let full: Mask = cut.iter().fold(0, |m, &i| m | (1 << i));
        for &i in cut {
            let others = full & !(1 << i);
            self.cut_masks[i].push(others);
            if others.count_ones() == 1 {
                self.pair_block[i] |= others;
            }
        }
    }

    fn can_join(&self, i: usize, members: Mask) -> bool {
        self.cut_masks[i].iter().all(|&m| m & !members != 0)
    }

    fn bound(&mut self, t: usize, g: &Groups) -> ExtReal {
        let rest = &self.order[t..];
        let total: f64 = rest.iter().map(|&i| self.weights[i]).sum();
        self.scratch.clear();
        for k in 0..self.p {
            if k < g.opened {
                let extra: f64 = rest
                    .iter()
                    .filter(|&&i| g.blocked[k] & (1 << i) == 0)
                    .map(|&i| self.weights[i])
                    .sum();
                self.scratch.push(g.w[k] + extra);
            } else {
                self.scratch.push(total);
            }
        }
        self.spec.eval_in_place(&mut self.scratch)
    }

    fn join(&self, g: &Groups, k: usize, i: usize) -> Groups {
        let mut h = g.clone();
        if k == h.opened {
            h.opened += 1;
        }
        h.w[k] += self.weights[i];
        h.members[k] |= 1 << i;
        h.blocked[k] |= self.pair_block[i];
        h
    }

    fn greedy(&mut self) {
        let n = self.weights.len();
        let mut g = Groups {
            w: vec![0.0; self.p],
            members: vec![0; self.p],
            blocked: vec![0; self.p],
            opened: 0,
        };
        let mut assign = vec![None; n];
        for t in 0..self.order.len() {
            let i = self.order[t];
            let k = if g.opened < self.p {
                Some(g.opened)
            } else {
                (0..g.opened)
                    .filter(|&k| self.can_join(i, g.members[k]))
                    .min_by(|&a, &b| g.w[a].total_cmp(&g.w[b]))
            };
            if let Some(k) = k {
                g = self.join(&g, k, i);
                assign[i] = Some(k);
            }
        }
        let v = eval(self.spec, &g.w, &mut self.scratch);
        self.best = (v, assign);
    }

    fn dfs(&mut self, t: usize, g: &Groups, assign: &mut Vec<Option<usize>>) {
        self.nodes += 1;
        if timed_out(self.nodes, self.deadline) {
            self.aborted = true;
        }
        if t == self.order.len() {
            let v = eval(self.spec, &g.w, &mut self.scratch);
            if v > self.best.0 {
                self.best = (v, assign.clone());
            }
            return;
        }
        let b = self.bound(t, g);
        if self.aborted {
            self.pending_ub = self.pending_ub.max(b);
            return;
        }
        if b <= self.best.0 {
            return;
        }
        let i = self.order[t];
        let mut targets: Vec<usize> = (0..g.opened).filter(|&k| self.can_join(i, g.members[k])).collect();
        if g.opened < self.p {
            targets.push(g.opened);
        }
        for k in targets {
            let h = self.join(g, k, i);
            assign[i] = Some(k);
            self.dfs(t + 1, &h, assign);
        }
        assign[i] = None;
        self.dfs(t + 1, g, assign);
    }

    fn solve(&mut self) {
        self.greedy();
        let n = self.weights.len();
        let g = Groups {
            w: vec![0.0; self.p],
            members: vec![0; self.p],
            blocked: vec![0; self.p],
            opened: 0,
        };
        let mut assign = vec![None; n];
        self.dfs(0, &g, &mut assign);
    }
}

fn groups_of(assign: &[Option<usize>], p: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); p];
    for (i, s) in assign.iter().enumerate() {
        if let Some(k) = s {
            out[*k].push(i);
        }
    }
    out
}

/// Row generation with the full separation trace.
pub fn row_generation(
    instance: &Instance,
    spec: &FairnessSpec,
    p: usize,
    r: f64,
    opts: &SolveOptions,
) -> Result<RowGenOutcome> {
    let start = Instant::now();
    check_common(instance, spec, p, r)?;
    opts.validate()?;
    let n = instance.len();
    if n > MAX_ROWGEN_POINTS {
        return Err(FmclpError::Unsupported(format!(
            "row generation handles at most {MAX_ROWGEN_POINTS} demand points, got {n}"
        )));
    }
    let warm_cuts = match opts.warm_start {
        WarmStart::Helly => geometry::incompatible_sets(instance, r, instance.dim() + 1, opts.exec)?,
        WarmStart::Pairs => geometry::incompatible_sets(instance, r, 2, opts.exec)?,
        WarmStart::Empty => {
            geometry::cluster_feasible(&[0], instance, r)?;
            Vec::new()
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    let w = &instance.weights;
    order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
    let mut master = Master {
        order,
        weights: w,
        spec,
        p,
        cut_masks: vec![Vec::new(); n],
        pair_block: vec![0; n],
        deadline: opts.deadline(start),
        nodes: 0,
        aborted: false,
        pending_ub: ExtReal::NegInf,
        best: (ExtReal::NegInf, Vec::new()),
        scratch: Vec::with_capacity(p),
    };
    for c in &warm_cuts {
        master.add_cut(c);
    }
    let mut added = Vec::new();
    let mut round = 0;
    let (assignment, gap) = loop {
        round += 1;
        master.pending_ub = ExtReal::NegInf;
        master.solve();
        let assign = master.best.1.clone();
        let groups = groups_of(&assign, p);
        if master.aborted {
            let ub = master.pending_ub.max(master.best.0);
            let repaired = repair(instance, r, assign, &groups)?;
            let lb = eval(spec, &coverage_of(&repaired, w, p), &mut Vec::new());
            break (repaired, Some(rel_gap(ub.max(lb), lb)));
        }
        let mut new_cuts = Vec::new();
        for (k, q) in groups.iter().enumerate() {
            if !geometry::cluster_feasible(q, instance, r)? {
                let inside = q.iter().filter(|&&i| assign[i] == Some(k)).count();
                added.push(CutEvent {
                    round,
                    slot: k,
                    set: q.clone(),
                    violated: inside + 1 > q.len(),
                });
                new_cuts.push(q.clone());
            }
        }
        if new_cuts.is_empty() {
            break (assign, None);
        }
        for c in &new_cuts {
            master.add_cut(c);
        }
    };
    let defaults = vec![instance.points[0].clone(); p];
    let (facilities, assignment) = settle_continuous(instance, spec, r, defaults, assignment)?;
    let stats = SolveStats {
        nodes: master.nodes,
        rounds: round,
        cuts: added.len(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RowGenOutcome {
        solution: assemble(instance, spec, facilities, assignment, gap, stats),
        warm_cuts,
        added_cuts: added,
    })
}

/// Drops the lightest members of infeasible clusters until all fit.
fn repair(instance: &Instance, r: f64, mut assign: Vec<Option<usize>>, groups: &[Vec<usize>]) -> Result<Vec<Option<usize>>> {
    for q in groups {
        let mut q = q.clone();
        while !geometry::cluster_feasible(&q, instance, r)? {
            let (pos, _) = q
                .iter()
                .enumerate()
                .min_by(|a, b| instance.weights[*a.1].total_cmp(&instance.weights[*b.1]).then(b.1.cmp(a.1)))
                .expect("infeasible cluster is nonempty");
            assign[q.remove(pos)] = None;
        }
    }
    Ok(assign)
}

/// Continuous planar solve by row generation over cluster-feasibility cuts.
pub fn solve_row_generation(
    instance: &Instance,
    spec: &FairnessSpec,
    p: usize,
    r: f64,
    opts: &SolveOptions,
) -> Result<CoverageSolution> {
    Ok(row_generation(instance, spec, p, r, opts)?.solution)
}

fn combinations(m: usize, p: usize, repeat: bool) -> Vec<Vec<usize>> {
    fn rec(m: usize, p: usize, repeat: bool, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == p {
            out.push(cur.clone());
            return;
        }
        for j in start..m {
            cur.push(j);
            rec(m, p, repeat, if repeat { j } else { j + 1 }, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, p, repeat, 0, &mut Vec::with_capacity(p), &mut out);
    out
}

type BestPerSpec = Vec<(ExtReal, Vec<Option<usize>>)>;

fn enumerate_allocations(sets: &[&[usize]], weights: &[f64], specs: &[FairnessSpec]) -> BestPerSpec {
    let n = weights.len();
    let p = sets.len();
    let mut who = vec![Vec::new(); n];
    for (f, s) in sets.iter().enumerate() {
        for &i in *s {
            who[i].push(f);
        }
    }
    let mut assign: Vec<Option<usize>> = who.iter().map(|c| c.first().copied()).collect();
    let free: Vec<usize> = (0..n).filter(|&i| who[i].len() > 1).collect();
    let mut digit = vec![0usize; free.len()];
    let mut best: BestPerSpec = vec![(ExtReal::NegInf, Vec::new()); specs.len()];
    let mut w = vec![0.0; p];
    loop {
        w.iter_mut().for_each(|x| *x = 0.0);
        for (i, s) in assign.iter().enumerate() {
            if let Some(k) = s {
                w[*k] += weights[i];
            }
        }
        w.sort_by(f64::total_cmp);
        for (s, b) in specs.iter().zip(best.iter_mut()) {
            let v = s.eval_sorted(&w);
            if b.1.is_empty() || v > b.0 {
                *b = (v, assign.clone());
            }
        }
        // odometer over the contested points
        let mut t = 0;
        loop {
            if t == free.len() {
                return best;
            }
            let i = free[t];
            digit[t] += 1;
            if digit[t] < who[i].len() {
                assign[i] = Some(who[i][digit[t]]);
                break;
            }
            digit[t] = 0;
            assign[i] = Some(who[i][0]);
            t += 1;
        }
    }
}

/// Exhaustive oracle for one spec.
pub fn brute_force(
    instance: &Instance,
    spec: &FairnessSpec,
    p: usize,
    r: f64,
    space: Space,
    opts: &SolveOptions,
) -> Result<CoverageSolution> {
    Ok(brute_force_multi(instance, std::slice::from_ref(spec), p, r, space, opts)?.remove(0))
}

/// Exhaustive oracle evaluating several specs over one enumeration.
///
/// Discrete: every `C(m, p)` subset of candidate sites. Continuous: every
/// size-`p` multiset of finite-dominating-set sites with distinct coverage.
/// Each selection is paired with every split of its contested points.
pub fn brute_force_multi(
    instance: &Instance,
    specs: &[FairnessSpec],
    p: usize,
    r: f64,
    space: Space,
    opts: &SolveOptions,
) -> Result<Vec<CoverageSolution>> {
    let start = Instant::now();
    for s in specs {
        check_common(instance, s, p, r)?;
    }
    let (pts, sets) = match space {
        Space::Discrete => {
            let sites = instance.candidate_sites();
            if p > sites.len() {
                return Err(FmclpError::TooManyFacilities { p, m: sites.len() });
            }
            (sites.to_vec(), coverage_sets(instance, sites, r))
        }
        Space::Continuous => planar_sites(instance, r, false)?,
    };
    let combos = combinations(sets.len(), p, space == Space::Continuous);
    let n = instance.len();
    let mut states: u128 = 0;
    for c in &combos {
        let mut cnt = vec![0u128; n];
        for &j in c {
            sets[j].iter().for_each(|&i| cnt[i] += 1);
        }
        states = states.saturating_add(cnt.iter().map(|&x| x.max(1)).fold(1u128, |a, b| a.saturating_mul(b)));
        if states > opts.brute_cap {
            return Err(FmclpError::CapExceeded {
                states,
                cap: opts.brute_cap,
            });
        }
    }
    let per_combo = par::map_vec(opts.exec, combos.clone(), |c| {
        let refs: Vec<&[usize]> = c.iter().map(|&j| sets[j].as_slice()).collect();
        enumerate_allocations(&refs, &instance.weights, specs)
    });
    let mut out = Vec::with_capacity(specs.len());
    for (si, spec) in specs.iter().enumerate() {
        let mut best: Option<(ExtReal, usize)> = None;
        for (ci, res) in per_combo.iter().enumerate() {
            if best.is_none_or(|(b, _)| res[si].0 > b) {
                best = Some((res[si].0, ci));
            }
        }
        let (_, ci) = best.expect("at least one selection");
        let assignment = per_combo[ci][si].1.clone();
        let (facilities, assignment) = match space {
            Space::Discrete => (
                combos[ci]
                    .iter()
                    .map(|&j| Facility {
                        candidate: Some(j),
                        location: pts[j].clone(),
                    })
                    .collect(),
                assignment,
            ),
            Space::Continuous => {
                let defaults = combos[ci].iter().map(|&j| pts[j].clone()).collect();
                settle_continuous(instance, spec, r, defaults, assignment)?
            }
        };
        let stats = SolveStats {
            nodes: states as u64,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            ..Default::default()
        };
        out.push(assemble(instance, spec, facilities, assignment, None, stats));
    }
    Ok(out)
}

/// Dispatches on space and mode.
pub fn solve(
    instance: &Instance,
    spec: &FairnessSpec,
    r: f64,
    space: Space,
    opts: &SolveOptions,
) -> Result<CoverageSolution> {
    let p = spec.p();
    match (space, opts.mode) {
        (Space::Discrete, SolveMode::Auto | SolveMode::BranchBound) => solve_discrete(instance, spec, p, r, opts),
        (Space::Continuous, SolveMode::Auto | SolveMode::CandidateSet) => {
            solve_continuous_fds(instance, spec, p, r, opts)
        }
        (Space::Continuous, SolveMode::RowGeneration) => solve_row_generation(instance, spec, p, r, opts),
        (_, SolveMode::BruteForce) => brute_force(instance, spec, p, r, space, opts),
        (space, mode) => Err(FmclpError::InvalidParameter(format!(
            "mode {mode:?} does not apply to the {space} space"
        ))),
    }
}
