//! Instance files, the experiment grid and its summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FmclpError, Result};
use crate::fairness::{AlphaParam, ExtReal, FairnessSpec, OwaFamily};
use crate::geometry::{NormSpec, Point};
use crate::instance::Instance;
use crate::metrics::{self, Baselines};
use crate::par;
use crate::solver::{self, CoverageSolution, SolveMode, SolveOptions, Space};

/// A demand instance together with the metadata carried in its CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub instance: Instance,
    pub seed: Option<u64>,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    /// Rescale every axis to `[0, 1]`.
    pub normalize: bool,
    /// Keep only the first `n` demand points.
    pub truncate: Option<usize>,
    pub norm: NormSpec,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            normalize: false,
            truncate: None,
            norm: NormSpec::Euclidean,
        }
    }
}

fn parse_err(line: u64, column: usize, message: impl Into<String>) -> FmclpError {
    FmclpError::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses the instance CSV format.
///
/// ```text
/// # name=towns
/// # seed=7
/// x,y,w
/// 0.1,0.2,0.5
/// ```
///
/// Coordinate columns come first (any header names), the weight column `w`
/// last. Lines starting with `#` are comments; `# key=value` comments carry
/// metadata.
pub fn parse_instance(text: &str, default_name: &str, opts: &LoadOptions) -> Result<InstanceFile> {
    let mut name = default_name.to_string();
    let mut seed = None;
    let mut normalized = false;
    for (ln, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix('#') else { continue };
        if let Some((k, v)) = rest.trim().split_once('=') {
            let v = v.trim();
            match k.trim() {
                "name" => name = v.to_string(),
                "seed" => {
                    seed = Some(v.parse().map_err(|_| parse_err(ln as u64 + 1, 1, format!("bad seed {v:?}")))?)
                }
                "normalized" => normalized = v == "true",
                _ => {}
            }
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 2 || header.get(header.len() - 1) != Some("w") {
        return Err(parse_err(1, header.len().max(1), "header must list coordinate columns then `w`"));
    }
    let d = header.len() - 1;
    let mut coords: Vec<Vec<f64>> = Vec::new();
    let mut weights = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(d + 1);
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, c + 1, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, c + 1, format!("not finite: {field:?}")));
            }
            row.push(v);
        }
        let w = row.pop().expect("record has header length");
        if w < 0.0 {
            return Err(parse_err(line, d + 1, format!("negative weight {w}")));
        }
        coords.push(row);
        weights.push(w);
    }
    if let Some(n) = opts.truncate {
        if n == 0 || n > coords.len() {
            return Err(FmclpError::InvalidParameter(format!(
                "cannot keep the first {n} of {} points",
                coords.len()
            )));
        }
        coords.truncate(n);
        weights.truncate(n);
    }
    if opts.normalize {
        normalize_axes(&mut coords);
        normalized = true;
    }
    let points = coords.into_iter().map(Point::new).collect::<Result<Vec<_>>>()?;
    Ok(InstanceFile {
        instance: Instance::new(name, points, weights, opts.norm)?,
        seed,
        normalized,
    })
}

fn csv_err(e: csv::Error) -> FmclpError {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(line, 0, e.to_string())
}

/// Per-axis min-max rescale onto the unit cube.
fn normalize_axes(coords: &mut [Vec<f64>]) {
    let Some(d) = coords.first().map(Vec::len) else { return };
    for a in 0..d {
        let lo = coords.iter().map(|c| c[a]).fold(f64::INFINITY, f64::min);
        let hi = coords.iter().map(|c| c[a]).fold(f64::NEG_INFINITY, f64::max);
        for c in coords.iter_mut() {
            c[a] = if hi > lo { (c[a] - lo) / (hi - lo) } else { 0.0 };
        }
    }
}

pub fn load_instance(path: &Path, opts: &LoadOptions) -> Result<InstanceFile> {
    let text = std::fs::read_to_string(path).map_err(|e| FmclpError::Io(format!("{}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    parse_instance(&text, stem, opts)
}

/// Serializes to the instance CSV format.
pub fn instance_to_csv(file: &InstanceFile) -> String {
    let inst = &file.instance;
    let mut out = String::new();
    writeln!(out, "# name={}", inst.name).unwrap();
    if let Some(s) = file.seed {
        writeln!(out, "# seed={s}").unwrap();
    }
    if file.normalized {
        out.push_str("# normalized=true\n");
    }
    let d = inst.dim();
    let cols: Vec<String> = if d == 2 {
        vec!["x".into(), "y".into()]
    } else {
        (1..=d).map(|a| format!("x{a}")).collect()
    };
    writeln!(out, "{},w", cols.join(",")).unwrap();
    for (p, w) in inst.points.iter().zip(&inst.weights) {
        for c in p.coords() {
            write!(out, "{c},").unwrap();
        }
        writeln!(out, "{w}").unwrap();
    }
    out
}

/// Uniform points in the unit cube with weights uniform on (0, 1).
pub fn gen_instance(n: usize, d: usize, seed: u64) -> Result<InstanceFile> {
    if n == 0 || d == 0 {
        return Err(FmclpError::InvalidParameter("n and d must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let c: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        points.push(Point::new(c)?);
        weights.push(rng.sample::<f64, _>(Open01));
    }
    Ok(InstanceFile {
        instance: Instance::new(format!("gen-n{n}-d{d}-s{seed}"), points, weights, NormSpec::Euclidean)?,
        seed: Some(seed),
        normalized: true,
    })
}

fn default_families() -> Vec<String> {
    ["W", "C", "K", "D", "G", "H"].iter().map(|s| s.to_string()).collect()
}

fn default_alphas() -> Vec<AlphaParam> {
    ["0", "1/2", "1", "2"].iter().map(|s| s.parse().expect("literal")).collect()
}

fn default_spaces() -> Vec<Space> {
    vec![Space::Discrete, Space::Continuous]
}

fn default_time_limit() -> f64 {
    solver::DEFAULT_TIME_LIMIT
}

fn default_cont_mode() -> SolveMode {
    SolveMode::CandidateSet
}

/// Experiment grid, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_values: Vec<usize>,
    pub p_values: Vec<usize>,
    #[serde(rename = "R_values")]
    pub r_values: Vec<f64>,
    #[serde(default = "default_families")]
    pub families: Vec<String>,
    #[serde(default = "default_alphas")]
    pub alpha_values: Vec<AlphaParam>,
    #[serde(default = "default_spaces")]
    pub spaces: Vec<Space>,
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Instance CSV; generated from `seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_mix: Option<f64>,
    /// Continuous solver: `candidate_set` or `row_generation`.
    #[serde(default = "default_cont_mode")]
    pub cont_mode: SolveMode,
}

impl GridConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let g: GridConfig = toml::from_str(text).map_err(|e| FmclpError::InvalidParameter(format!("grid config: {e}")))?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(FmclpError::InvalidParameter(format!("grid config: {what} is empty")));
        if self.n_values.is_empty() {
            return empty("n_values");
        }
        if self.p_values.is_empty() {
            return empty("p_values");
        }
        if self.r_values.is_empty() {
            return empty("R_values");
        }
        if self.families.is_empty() {
            return empty("families");
        }
        if self.alpha_values.is_empty() {
            return empty("alpha_values");
        }
        if self.spaces.is_empty() {
            return empty("spaces");
        }
        self.families().map(|_| ())
    }

    pub fn families(&self) -> Result<Vec<OwaFamily>> {
        self.families
            .iter()
            .map(|f| OwaFamily::from_letter(f, self.k, self.beta_mix))
            .collect()
    }

    /// `(family, alpha)` cells of one `(n, p, R, space)` combination; the
    /// minimum family is paired with `alpha = 0` only.
    pub fn cells(&self) -> Result<Vec<(OwaFamily, AlphaParam)>> {
        let mut out = Vec::new();
        for f in self.families()? {
            if f == OwaFamily::Minimum {
                out.push((f, AlphaParam::ZERO));
            } else {
                out.extend(self.alpha_values.iter().map(|&a| (f.clone(), a)));
            }
        }
        Ok(out)
    }

    pub fn combinations(&self) -> Vec<(usize, usize, f64, Space)> {
        let mut out = Vec::new();
        for &n in &self.n_values {
            for &p in &self.p_values {
                for &r in &self.r_values {
                    for &s in &self.spaces {
                        out.push((n, p, r, s));
                    }
                }
            }
        }
        out
    }

    pub fn row_count(&self) -> Result<usize> {
        Ok(self.cells()?.len() * self.combinations().len())
    }
}

fn join_w<S: serde::Serializer>(w: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let parts: Vec<String> = w.iter().map(|x| x.to_string()).collect();
    s.serialize_str(&parts.join(";"))
}

fn split_w<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let s = String::deserialize(d)?;
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|x| x.parse().map_err(serde::de::Error::custom))
        .collect()
}

/// One grid cell in the result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: String,
    pub n: usize,
    pub p: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub space: Space,
    pub family: String,
    pub alpha: AlphaParam,
    /// `optimal`, `feasible`, `degenerate` or `error`.
    pub status: String,
    pub objective: Option<ExtReal>,
    pub coverage_pct: Option<f64>,
    #[serde(rename = "W", serialize_with = "join_w", deserialize_with = "split_w")]
    pub coverage: Vec<f64>,
    #[serde(rename = "PoF")]
    pub pof: Option<f64>,
    #[serde(rename = "PoE")]
    pub poe: Option<f64>,
    #[serde(rename = "Gini")]
    pub gini: Option<f64>,
    pub cpu_seconds: f64,
    pub gap: Option<f64>,
    pub error: String,
}

pub const RESULT_COLUMNS: [&str; 17] = [
    "instance",
    "n",
    "p",
    "R",
    "space",
    "family",
    "alpha",
    "status",
    "objective",
    "coverage_pct",
    "W",
    "PoF",
    "PoE",
    "Gini",
    "cpu_seconds",
    "gap",
    "error",
];

/// Side-car metadata written next to a result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub seed: u64,
    pub instance_name: String,
    pub instance_hash: String,
    pub k_default: String,
    pub beta_mix: f64,
    pub time_limit: f64,
    pub cont_mode: SolveMode,
    pub rows: usize,
}

fn solve_cell(
    instance: &Instance,
    family: &OwaFamily,
    alpha: AlphaParam,
    p: usize,
    r: f64,
    space: Space,
    opts: &SolveOptions,
) -> Result<(CoverageSolution, f64)> {
    let spec = FairnessSpec::from_family(family, p, alpha)?;
    let t = Instant::now();
    let sol = solver::solve(instance, &spec, r, space, opts)?;
    Ok((sol, t.elapsed().as_secs_f64()))
}

fn row_from(
    base: &ResultRow,
    instance: &Instance,
    outcome: Result<(CoverageSolution, f64)>,
    baselines: &Result<Baselines>,
) -> ResultRow {
    let mut row = base.clone();
    match outcome {
        Err(e) => {
            row.status = "error".into();
            row.error = e.to_string();
        }
        Ok((sol, secs)) => {
            row.status = sol.status.label().into();
            row.objective = Some(sol.objective);
            row.coverage = sol.coverage.clone();
            row.cpu_seconds = secs;
            row.gap = Some(sol.status.gap());
            let tw = instance.total_weight();
            row.coverage_pct = Some(if tw > 0.0 { 100.0 * sol.total_coverage() / tw } else { 0.0 });
            row.gini = metrics::gini_index(&sol.coverage);
            match baselines {
                Ok(b) => match metrics::report(&sol, instance, b) {
                    Ok(rep) => {
                        row.pof = rep.pof;
                        row.poe = rep.poe;
                    }
                    Err(e) => row.error = e.to_string(),
                },
                Err(e) => row.error = format!("baselines unavailable: {e}"),
            }
        }
    }
    row
}

fn run_combination(
    instance: &Instance,
    cells: &[(OwaFamily, AlphaParam)],
    p: usize,
    r: f64,
    space: Space,
    opts: &SolveOptions,
) -> Vec<ResultRow> {
    let base = ResultRow {
        instance: instance.name.clone(),
        n: instance.len(),
        p,
        r,
        space,
        family: String::new(),
        alpha: AlphaParam::ZERO,
        status: String::new(),
        objective: None,
        coverage_pct: None,
        coverage: Vec::new(),
        pof: None,
        poe: None,
        gini: None,
        cpu_seconds: 0.0,
        gap: None,
        error: String::new(),
    };
    let timed = |f: &OwaFamily| -> Result<(CoverageSolution, f64)> {
        let t = Instant::now();
        let s = metrics::baseline_solution(instance, f, p, r, space, opts)?;
        Ok((s, t.elapsed().as_secs_f64()))
    };
    let sum_sol = timed(&OwaFamily::Average);
    let min_sol = timed(&OwaFamily::Minimum);
    let baselines = match (&sum_sol, &min_sol) {
        (Ok((a, _)), Ok((b, _))) => Ok(Baselines::from_solutions(a, b)),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    cells
        .iter()
        .map(|(family, alpha)| {
            let mut b = base.clone();
            b.family = family.letter().to_string();
            b.alpha = *alpha;
            let outcome = match (family, alpha.is_zero()) {
                (OwaFamily::Average, true) if sum_sol.is_ok() => sum_sol.clone(),
                (OwaFamily::Minimum, true) if min_sol.is_ok() => min_sol.clone(),
                _ => solve_cell(instance, family, *alpha, p, r, space, opts),
            };
            row_from(&b, instance, outcome, &baselines)
        })
        .collect()
}

/// Thread count: `FMCLP_THREADS` overrides the config value.
pub fn grid_threads(config: &GridConfig) -> Option<usize> {
    std::env::var("FMCLP_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .or(config.threads)
}

/// Loads or generates the base instance of a grid.
pub fn grid_instance(config: &GridConfig) -> Result<InstanceFile> {
    let n_max = *config.n_values.iter().max().expect("validated");
    match &config.instance {
        Some(path) => load_instance(
            path,
            &LoadOptions {
                normalize: true,
                ..Default::default()
            },
        ),
        None => gen_instance(n_max, 2, config.seed),
    }
}

/// Runs every cell; rows come back in grid order whatever the pool size.
pub fn run_grid(config: &GridConfig, base: &Instance) -> Result<(Vec<ResultRow>, GridMeta)> {
    config.validate()?;
    let cells = config.cells()?;
    let opts = SolveOptions {
        time_limit: config.time_limit,
        ..Default::default()
    };
    let combos = config.combinations();
    let rows = par::with_threads(grid_threads(config), || {
        par::map_vec(opts.exec, combos, |(n, p, r, space)| {
            let inst = match base.truncated(n) {
                Ok(i) => i,
                Err(e) => return error_rows(base, &cells, n, p, r, space, &e),
            };
            let mode_opts = SolveOptions {
                mode: match space {
                    Space::Discrete => SolveMode::BranchBound,
                    Space::Continuous => config.cont_mode,
                },
                ..opts.clone()
            };
            run_combination(&inst, &cells, p, r, space, &mode_opts)
        })
    });
    let rows: Vec<ResultRow> = rows.into_iter().flatten().collect();
    let meta = GridMeta {
        seed: config.seed,
        instance_name: base.name.clone(),
        instance_hash: base.content_hash(),
        k_default: config.k.map_or("ceil(p/2)".into(), |k| k.to_string()),
        beta_mix: config.beta_mix.unwrap_or(crate::fairness::DEFAULT_BETA_MIX),
        time_limit: config.time_limit,
        cont_mode: config.cont_mode,
        rows: rows.len(),
    };
    Ok((rows, meta))
}

fn error_rows(
    base: &Instance,
    cells: &[(OwaFamily, AlphaParam)],
    n: usize,
    p: usize,
    r: f64,
    space: Space,
    e: &FmclpError,
) -> Vec<ResultRow> {
    cells
        .iter()
        .map(|(f, a)| ResultRow {
            instance: base.name.clone(),
            n,
            p,
            r,
            space,
            family: f.letter().into(),
            alpha: *a,
            status: "error".into(),
            objective: None,
            coverage_pct: None,
            coverage: Vec::new(),
            pof: None,
            poe: None,
            gini: None,
            cpu_seconds: 0.0,
            gap: None,
            error: e.to_string(),
        })
        .collect()
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS).map_err(|e| FmclpError::Io(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| FmclpError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RESULT_COLUMNS.iter().copied()) {
        return Err(parse_err(1, 0, "result CSV header does not match the schema"));
    }
    rdr.deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, 0, e.to_string())
            })
        })
        .collect()
}

/// Share of rows per optimality-gap bucket for one `(n, p, space)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    pub p: usize,
    pub space: Space,
    pub rows: usize,
    #[serde(rename = "GAP0")]
    pub gap0: f64,
    #[serde(rename = "GAP1")]
    pub gap1: f64,
    #[serde(rename = "GAP5")]
    pub gap5: f64,
    #[serde(rename = "GAP+")]
    pub gap_plus: f64,
}

/// Mean metrics of one group; `key` names the extra grouping column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub space: Space,
    pub family: String,
    pub alpha: AlphaParam,
    pub key: String,
    pub rows: usize,
    #[serde(rename = "PoF")]
    pub pof: Option<f64>,
    #[serde(rename = "PoE")]
    pub poe: Option<f64>,
    #[serde(rename = "Gini")]
    pub gini: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub gaps: Vec<GapRow>,
    /// Per `(space, family, alpha)`.
    pub by_family: Vec<MetricRow>,
    /// Additionally split by `n`.
    pub by_n: Vec<MetricRow>,
    /// Additionally split by `p`.
    pub by_p: Vec<MetricRow>,
}

/// Bucket index: 0 solved, 1 gap in (0, 1%], 2 in (1%, 5%], 3 worse or failed.
pub fn gap_bucket(row: &ResultRow) -> usize {
    match row.gap {
        _ if row.status == "error" => 3,
        Some(g) if g <= 0.0 => 0,
        Some(g) if g <= 0.01 => 1,
        Some(g) if g <= 0.05 => 2,
        _ => 3,
    }
}

fn mean(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Gap buckets and metric averages; averages use rows with gap at most 5%.
/// The result does not depend on the order of `rows`.
pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut gaps: BTreeMap<(usize, usize, Space), [usize; 4]> = BTreeMap::new();
    for r in rows {
        gaps.entry((r.n, r.p, r.space)).or_default()[gap_bucket(r)] += 1;
    }
    let gaps = gaps
        .into_iter()
        .map(|((n, p, space), c)| {
            let t: usize = c.iter().sum();
            let pct = |k: usize| 100.0 * c[k] as f64 / t as f64;
            GapRow {
                n,
                p,
                space,
                rows: t,
                gap0: pct(0),
                gap1: pct(1),
                gap5: pct(2),
                gap_plus: pct(3),
            }
        })
        .collect();
    let usable: Vec<&ResultRow> = rows.iter().filter(|r| gap_bucket(r) <= 2).collect();
    let group = |key: &dyn Fn(&ResultRow) -> String| -> Vec<MetricRow> {
        let mut m: BTreeMap<(Space, String, String, String), Vec<&ResultRow>> = BTreeMap::new();
        for r in &usable {
            m.entry((r.space, r.family.clone(), r.alpha.to_string(), key(r)))
                .or_default()
                .push(r);
        }
        m.into_iter()
            .map(|((space, family, _, key), rs)| MetricRow {
                space,
                family,
                alpha: rs[0].alpha,
                key,
                rows: rs.len(),
                pof: mean(rs.iter().filter_map(|r| r.pof).collect()),
                poe: mean(rs.iter().filter_map(|r| r.poe).collect()),
                gini: mean(rs.iter().filter_map(|r| r.gini).collect()),
            })
            .collect()
    };
    Summary {
        gaps,
        by_family: group(&|_| String::new()),
        by_n: group(&|r| format!("n={}", r.n)),
        by_p: group(&|r| format!("p={}", r.p)),
    }
}

fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| FmclpError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `gaps.csv`, `metrics_by_family.csv`, `metrics_by_n.csv` and
/// `metrics_by_p.csv` into `dir`.
pub fn write_summary(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, f: &dyn Fn(std::fs::File) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        f(std::fs::File::create(&path)?)?;
        written.push(path);
        Ok(())
    };
    put("gaps.csv", &|f| write_csv(&summary.gaps, f))?;
    put("metrics_by_family.csv", &|f| write_csv(&summary.by_family, f))?;
    put("metrics_by_n.csv", &|f| write_csv(&summary.by_n, f))?;
    put("metrics_by_p.csv", &|f| write_csv(&summary.by_p, f))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let ok = "# name=tiny\nx,y,w\n0.1,0.2,0.5\n0.3,0.4,1\n0.9,0.9,0.25\n";
        let f = parse_instance(ok, "x", &LoadOptions::default()).unwrap();
        assert_eq!(f.instance.len(), 3);
        assert_eq!(f.instance.name, "tiny");
        let neg = "x,y,w\n0.1,0.2,-1\n";
        match parse_instance(neg, "x", &LoadOptions::default()) {
            Err(FmclpError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        let junk = "x,y,w\n0.1,abc,1\n";
        assert!(matches!(
            parse_instance(junk, "x", &LoadOptions::default()),
            Err(FmclpError::Parse { line: 2, column: 2, .. })
        ));
        assert!(parse_instance("x,y,weight\n1,1,1\n", "x", &LoadOptions::default()).is_err());
    }

    #[test]
    fn normalization_and_truncation() {
        let text = "x,y,w\n10,-5,1\n20,5,1\n15,0,1\n";
        let opts = LoadOptions {
            normalize: true,
            truncate: Some(3),
            ..Default::default()
        };
        let f = parse_instance(text, "x", &opts).unwrap();
        assert!(f.normalized);
        assert_eq!(f.instance.points[2].coords(), &[0.5, 0.5]);
        assert!(f.instance.points.iter().flat_map(|p| p.coords()).all(|c| (0.0..=1.0).contains(c)));
        let opts = LoadOptions {
            truncate: Some(2),
            ..Default::default()
        };
        assert_eq!(parse_instance(text, "x", &opts).unwrap().instance.len(), 2);
    }

    #[test]
    fn generated_round_trip() {
        let f = gen_instance(12, 2, 3).unwrap();
        assert!(f.instance.weights.iter().all(|&w| w > 0.0 && w < 1.0));
        let text = instance_to_csv(&f);
        let back = parse_instance(&text, "x", &LoadOptions::default()).unwrap();
        assert_eq!(back, f);
        assert_eq!(instance_to_csv(&gen_instance(12, 2, 3).unwrap()), text);
    }

    #[test]
    fn full_grid_counts() {
        let g = GridConfig::from_toml(
            "n_values=[45,90,120,179]\np_values=[5,10,15,20]\nR_values=[0.1,0.15]\nspaces=[\"disc\"]\n",
        )
        .unwrap();
        assert_eq!(g.cells().unwrap().len(), 21);
        assert_eq!(g.row_count().unwrap(), 672);
        let desk = GridConfig::from_toml("n_values=[10]\np_values=[2,3]\nR_values=[0.15]\n").unwrap();
        assert_eq!(desk.row_count().unwrap(), 84);
        assert!(GridConfig::from_toml("n_values=[]\np_values=[2]\nR_values=[0.1]\n").is_err());
        assert!(GridConfig::from_toml("n_values=[1]\np_values=[2]\nR_values=[0.1]\nbogus=1\n").is_err());
    }

    #[test]
    fn buckets() {
        let mut r = error_rows(
            &gen_instance(2, 2, 1).unwrap().instance,
            &[(OwaFamily::Average, AlphaParam::ZERO)],
            2,
            1,
            0.1,
            Space::Discrete,
            &FmclpError::Io("x".into()),
        )
        .remove(0);
        assert_eq!(gap_bucket(&r), 3);
        r.status = "feasible".into();
        for (g, b) in [(0.0, 0), (0.005, 1), (0.01, 1), (0.03, 2), (0.05, 2), (0.2, 3)] {
            r.gap = Some(g);
            assert_eq!(gap_bucket(&r), b);
        }
    }
}
