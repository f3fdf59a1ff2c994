//! Efficiency and fairness diagnostics of covering solutions.

use serde::{Deserialize, Serialize};

use crate::error::{FmclpError, Result};
use crate::fairness::{AlphaParam, FairnessSpec, OwaFamily};
use crate::instance::Instance;
use crate::solver::{self, CoverageSolution, SolveOptions, SolveStatus, Space};

const BASELINE_TOL: f64 = 1e-9;

/// Envy of a facility covering `wj` towards one covering `wk`.
pub fn envy(wj: f64, wk: f64) -> f64 {
    (wk - wj).max(0.0)
}

/// Total pairwise envy over `2 p sum(W)`; `None` when nothing is covered.
pub fn gini_index(w: &[f64]) -> Option<f64> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let envy_sum: f64 = w.iter().flat_map(|&a| w.iter().map(move |&b| envy(a, b))).sum();
    Some(envy_sum / (2.0 * w.len() as f64 * total))
}

/// Relative loss of total coverage against the classical maximal-covering optimum.
pub fn price_of_fairness(sol: &CoverageSolution, sum_baseline: f64) -> Result<Option<f64>> {
    pof_from_total(sol.total_coverage(), sum_baseline)
}

pub(crate) fn pof_from_total(total: f64, sum_baseline: f64) -> Result<Option<f64>> {
    if total > sum_baseline * (1.0 + BASELINE_TOL) {
        return Err(FmclpError::InconsistentBaseline(format!(
            "solution covers {total} > baseline optimum {sum_baseline}"
        )));
    }
    if sum_baseline <= 0.0 {
        return Ok(None);
    }
    Ok(Some(((sum_baseline - total) / sum_baseline).max(0.0)))
}

/// Relative loss of the smallest facility coverage against the maximin optimum.
pub fn price_of_efficiency(sol: &CoverageSolution, min_baseline: f64) -> Result<Option<f64>> {
    poe_from_min(sol.min_coverage(), min_baseline)
}

pub(crate) fn poe_from_min(min: f64, min_baseline: f64) -> Result<Option<f64>> {
    if min > min_baseline * (1.0 + BASELINE_TOL) {
        return Err(FmclpError::InconsistentBaseline(format!(
            "smallest coverage {min} > maximin optimum {min_baseline}"
        )));
    }
    if min_baseline <= 0.0 {
        return Ok(None);
    }
    Ok(Some(((min_baseline - min) / min_baseline).max(0.0)))
}

/// Optimal total coverage and optimal smallest coverage on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    /// Total coverage of the (W, alpha = 0) optimum.
    pub sum_baseline: f64,
    /// Smallest facility coverage of the (C, alpha = 0) optimum.
    pub min_baseline: f64,
    pub instance_hash: String,
}

impl Baselines {
    /// Solves both reference problems exactly; refuses non-certified optima.
    pub fn solve(instance: &Instance, p: usize, r: f64, space: Space, opts: &SolveOptions) -> Result<Self> {
        let sum_sol = baseline_solution(instance, &OwaFamily::Average, p, r, space, opts)?;
        let min_sol = baseline_solution(instance, &OwaFamily::Minimum, p, r, space, opts)?;
        Ok(Self::from_solutions(&sum_sol, &min_sol))
    }

    pub fn from_solutions(sum_sol: &CoverageSolution, min_sol: &CoverageSolution) -> Self {
        Baselines {
            sum_baseline: sum_sol.total_coverage(),
            min_baseline: min_sol.min_coverage(),
            instance_hash: sum_sol.instance_hash.clone(),
        }
    }
}

/// Certified optimum of a baseline problem (W or C with alpha = 0).
pub fn baseline_solution(
    instance: &Instance,
    family: &OwaFamily,
    p: usize,
    r: f64,
    space: Space,
    opts: &SolveOptions,
) -> Result<CoverageSolution> {
    let spec = FairnessSpec::from_family(family, p, AlphaParam::ZERO)?;
    let exact = SolveOptions { tol: 0.0, ..opts.clone() };
    let sol = solver::solve(instance, &spec, r, space, &exact)?;
    if !matches!(sol.status, SolveStatus::Optimal) {
        return Err(FmclpError::InconsistentBaseline(format!(
            "baseline {} not solved to optimality ({:?})",
            family.letter(),
            sol.status
        )));
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pof: Option<f64>,
    pub poe: Option<f64>,
    pub gini: Option<f64>,
    pub coverage_pct: f64,
    #[serde(rename = "W")]
    pub coverage: Vec<f64>,
    pub status: SolveStatus,
    pub baselines: Baselines,
}

pub fn report(sol: &CoverageSolution, instance: &Instance, baselines: &Baselines) -> Result<MetricsReport> {
    let hash = instance.content_hash();
    if sol.instance_hash != hash || baselines.instance_hash != hash {
        return Err(FmclpError::InconsistentBaseline(
            "solution, baselines and instance disagree on the instance hash".into(),
        ));
    }
    let total_w = instance.total_weight();
    Ok(MetricsReport {
        pof: price_of_fairness(sol, baselines.sum_baseline)?,
        poe: price_of_efficiency(sol, baselines.min_baseline)?,
        gini: gini_index(&sol.coverage),
        coverage_pct: if total_w > 0.0 { 100.0 * sol.total_coverage() / total_w } else { 0.0 },
        coverage: sol.coverage.clone(),
        status: sol.status.clone(),
        baselines: baselines.clone(),
    })
}
