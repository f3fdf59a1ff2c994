//! Norm-based coverage, minimum enclosing balls and the discrete structures
//! derived from them (incompatible clusters, planar candidate locations).

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FmclpError, Result};
use crate::instance::Instance;
use crate::par::{self, Exec};

/// Relative tolerance applied to every radius comparison.
pub const COVER_TOL: f64 = 1e-9;

const WELZL_SEED: u64 = 0x5eed_ba11;

/// A point in `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(FmclpError::InvalidPoint("a point needs at least one coordinate".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(FmclpError::InvalidPoint(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    /// Planar point. Panics on non-finite input.
    pub fn xy(x: f64, y: f64) -> Self {
        Point::new(vec![x, y]).expect("finite planar coordinates")
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn midpoint(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| 0.5 * (a + b)).collect())
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = FmclpError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// Norm used to measure distances between facilities and demand points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    Euclidean,
    LTau { tau: f64 },
    L1,
    LInf,
}

impl NormSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NormSpec::LTau { tau } if !(tau >= 1.0) => Err(FmclpError::InvalidParameter(format!(
                "l_tau norm needs tau >= 1, got {tau}"
            ))),
            _ => Ok(()),
        }
    }

    /// Collapses `LTau` with tau in {1, 2, inf} onto the dedicated variants.
    pub fn canonical(self) -> NormSpec {
        match self {
            NormSpec::LTau { tau: 1.0 } => NormSpec::L1,
            NormSpec::LTau { tau: 2.0 } => NormSpec::Euclidean,
            NormSpec::LTau { tau } if tau.is_infinite() => NormSpec::LInf,
            other => other,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        self.canonical() == NormSpec::Euclidean
    }
}

fn check_dims(a: &Point, b: &Point) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(FmclpError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

pub fn distance(a: &Point, b: &Point, norm: NormSpec) -> Result<f64> {
    check_dims(a, b)?;
    Ok(distance_unchecked(a.coords(), b.coords(), norm))
}

pub(crate) fn distance_unchecked(a: &[f64], b: &[f64], norm: NormSpec) -> f64 {
    let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    match norm.canonical() {
        NormSpec::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        NormSpec::L1 => diffs.sum(),
        NormSpec::LInf => diffs.fold(0.0, f64::max),
        NormSpec::LTau { tau } => diffs.map(|d| d.powf(tau)).sum::<f64>().powf(1.0 / tau),
    }
}

/// Closed coverage ball `{z : ||z - center|| <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    pub norm: NormSpec,
}

impl Ball {
    pub fn new(center: Point, radius: f64, norm: NormSpec) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(FmclpError::InvalidParameter(format!("ball radius must be > 0, got {radius}")));
        }
        norm.validate()?;
        Ok(Ball { center, radius, norm })
    }
}

/// True iff `a` lies in the ball inflated by the relative tolerance `tol`.
pub fn covers(ball: &Ball, a: &Point, tol: f64) -> Result<bool> {
    Ok(distance(&ball.center, a, ball.norm)? <= ball.radius * (1.0 + tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneCenterResult {
    pub center: Point,
    pub radius: f64,
    /// Indices (into the input slice) of the points that determine the ball.
    pub support: Vec<usize>,
}

/// Minimum enclosing ball of `points` under `norm`.
///
/// Euclidean balls use Welzl's move-to-front scheme in any dimension, the
/// sup-norm uses the coordinate bounding box, and the planar l1 norm is
/// reduced to the sup-norm by a 45 degree rotation.
pub fn one_center(points: &[Point], norm: NormSpec) -> Result<OneCenterResult> {
    let refs: Vec<&Point> = points.iter().collect();
    one_center_refs(&refs, norm)
}

pub(crate) fn one_center_refs(points: &[&Point], norm: NormSpec) -> Result<OneCenterResult> {
    let first = points
        .first()
        .ok_or_else(|| FmclpError::InvalidParameter("one_center needs at least one point".into()))?;
    let d = first.dim();
    for p in points {
        if p.dim() != d {
            return Err(FmclpError::DimensionMismatch { expected: d, got: p.dim() });
        }
    }
    norm.validate()?;
    match norm.canonical() {
        NormSpec::Euclidean => Ok(welzl(points)),
        NormSpec::LInf => Ok(box_center(points.iter().map(|p| p.coords().to_vec()).collect())),
        NormSpec::L1 if d == 2 => {
            let rotated = points
                .iter()
                .map(|p| {
                    let (x, y) = (p.coords()[0], p.coords()[1]);
                    vec![x + y, x - y]
                })
                .collect();
            let mut res = box_center(rotated);
            let (u, v) = (res.center.0[0], res.center.0[1]);
            res.center = Point(vec![0.5 * (u + v), 0.5 * (u - v)]);
            // Rotation round-off: report the radius actually needed.
            res.radius = max_dist(points, &res.center, NormSpec::L1);
            Ok(res)
        }
        NormSpec::L1 => Err(FmclpError::Unsupported(format!("l1 one-center only in the plane, got d = {d}"))),
        NormSpec::LTau { tau } => Err(FmclpError::Unsupported(format!("one-center for l_{tau} norm"))),
    }
}

fn max_dist(points: &[&Point], c: &Point, norm: NormSpec) -> f64 {
    points
        .iter()
        .map(|p| distance_unchecked(p.coords(), c.coords(), norm))
        .fold(0.0, f64::max)
}

fn box_center(coords: Vec<Vec<f64>>) -> OneCenterResult {
    let d = coords[0].len();
    let mut center = vec![0.0; d];
    let mut best = (0.0f64, 0usize, 0usize);
    for l in 0..d {
        let (mut lo, mut hi) = (0usize, 0usize);
        for (i, c) in coords.iter().enumerate() {
            if c[l] < coords[lo][l] {
                lo = i;
            }
            if c[l] > coords[hi][l] {
                hi = i;
            }
        }
        let half = 0.5 * (coords[hi][l] - coords[lo][l]);
        center[l] = 0.5 * (coords[hi][l] + coords[lo][l]);
        if half > best.0 || l == 0 {
            best = (half, lo, hi);
        }
    }
    let mut support = vec![best.1, best.2];
    support.sort_unstable();
    support.dedup();
    let radius = coords
        .iter()
        .map(|c| distance_unchecked(c, &center, NormSpec::LInf))
        .fold(0.0, f64::max);
    OneCenterResult {
        center: Point(center),
        radius,
        support,
    }
}

struct Miniball<'a> {
    pts: &'a [&'a Point],
    d: usize,
    order: Vec<usize>,
    boundary: Vec<usize>,
    center: Vec<f64>,
    sq_radius: f64,
    support: Vec<usize>,
}

impl<'a> Miniball<'a> {
    fn excess(&self, idx: usize) -> f64 {
        let p = self.pts[idx].coords();
        let d2: f64 = p.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        d2 - self.sq_radius
    }

    fn mtf(&mut self, end: usize) {
        if self.boundary.len() == self.d + 1 {
            return;
        }
        let mut i = 0;
        while i < end {
            let idx = self.order[i];
            let scale = self.sq_radius.max(1e-300);
            if self.excess(idx) > 1e-12 * scale {
                self.boundary.push(idx);
                if self.fit_boundary() {
                    self.mtf(i);
                    self.boundary.pop();
                    self.order.remove(i);
                    self.order.insert(0, idx);
                } else {
                    self.boundary.pop();
                }
            }
            i += 1;
        }
    }

    /// Smallest ball with every boundary point on its surface; false when the
    /// boundary is affinely dependent.
    fn fit_boundary(&mut self) -> bool {
        let q0 = self.pts[self.boundary[0]].coords();
        let k = self.boundary.len() - 1;
        if k == 0 {
            self.center = q0.to_vec();
            self.sq_radius = 0.0;
            self.support = self.boundary.clone();
            return true;
        }
        let v: Vec<Vec<f64>> = self.boundary[1..]
            .iter()
            .map(|&j| self.pts[j].coords().iter().zip(q0).map(|(a, b)| a - b).collect())
            .collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut m = vec![vec![0.0; k + 1]; k];
        for r in 0..k {
            for c in 0..k {
                m[r][c] = 2.0 * dot(&v[r], &v[c]);
            }
            m[r][k] = dot(&v[r], &v[r]);
        }
        let Some(lambda) = solve_dense(m) else {
            return false;
        };
        let mut center = q0.to_vec();
        for (l, vj) in lambda.iter().zip(&v) {
            for (c, x) in center.iter_mut().zip(vj) {
                *c += l * x;
            }
        }
        self.sq_radius = center.iter().zip(q0).map(|(c, q)| (c - q) * (c - q)).sum();
        self.center = center;
        self.support = self.boundary.clone();
        true
    }
}

/// Gaussian elimination with partial pivoting on an augmented k x (k+1) matrix.
fn solve_dense(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let k = m.len();
    let scale = (0..k).map(|i| m[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..k {
            let f = m[r][col] / m[col][col];
            for c in col..=k {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][k] - s) / m[r][r];
    }
    Some(x)
}

fn welzl(points: &[&Point]) -> OneCenterResult {
    let d = points[0].dim();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(WELZL_SEED));
    let mut mb = Miniball {
        pts: points,
        d,
        order,
        boundary: Vec::with_capacity(d + 1),
        center: points[0].coords().to_vec(),
        sq_radius: -1.0,
        support: vec![],
    };
    let n = points.len();
    mb.mtf(n);
    let center = Point(mb.center);
    let mut support = mb.support;
    support.sort_unstable();
    OneCenterResult {
        radius: max_dist(points, &center, NormSpec::Euclidean),
        center,
        support,
    }
}

/// Whether the demand points indexed by `cluster` fit in one ball of radius `r`.
///
/// An empty cluster is trivially feasible.
pub fn cluster_feasible(cluster: &[usize], instance: &Instance, r: f64) -> Result<bool> {
    if cluster.is_empty() {
        return Ok(true);
    }
    let pts = instance.points_at(cluster)?;
    Ok(one_center_refs(&pts, instance.norm)?.radius <= r * (1.0 + COVER_TOL))
}

/// Minimal infeasible clusters of cardinality at most `size`, in lexicographic order.
///
/// A set is reported only if every proper subset is feasible; a larger set that
/// contains an infeasible one is implied by the smaller cut.
pub fn incompatible_sets(instance: &Instance, r: f64, size: usize, exec: Exec) -> Result<Vec<Vec<usize>>> {
    let n = instance.len();
    // probe once so unsupported norms surface as errors
    one_center_refs(&instance.points_at(&[0])?, instance.norm)?;
    let mut minimal = Vec::new();
    let mut infeasible_prev: HashSet<Vec<usize>> = HashSet::new();
    for s in 2..=size.min(n) {
        let level: Vec<Vec<(Vec<usize>, bool)>> = par::map_range(exec, n, |first| {
            let mut out = Vec::new();
            let mut combo = vec![first];
            level_sets(instance, r, s, n, &mut combo, &infeasible_prev, &mut out);
            out
        });
        let mut next = HashSet::new();
        for (set, is_minimal) in level.into_iter().flatten() {
            if is_minimal {
                minimal.push(set.clone());
            }
            if s < size {
                next.insert(set);
            }
        }
        infeasible_prev = next;
    }
    minimal.sort();
    Ok(minimal)
}

/// Collects infeasible sets of size `s` extending `combo`, flagging minimal ones.
fn level_sets(
    instance: &Instance,
    r: f64,
    s: usize,
    n: usize,
    combo: &mut Vec<usize>,
    infeasible_prev: &HashSet<Vec<usize>>,
    out: &mut Vec<(Vec<usize>, bool)>,
) {
    if combo.len() == s {
        let implied = s > 2
            && (0..s).any(|skip| {
                let sub: Vec<usize> = combo
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                infeasible_prev.contains(&sub)
            });
        if implied {
            out.push((combo.clone(), false));
        } else if !cluster_feasible(combo, instance, r).unwrap_or(true) {
            out.push((combo.clone(), true));
        }
        return;
    }
    let start = *combo.last().unwrap() + 1;
    for next in start..n {
        if n - next < s - combo.len() {
            break;
        }
        combo.push(next);
        level_sets(instance, r, s, n, combo, infeasible_prev, out);
        combo.pop();
    }
}

/// Finite candidate set for the planar Euclidean problem: every demand point
/// plus every pairwise intersection of the radius-`r` circles around them.
///
/// Circles whose centres are `2r` apart up to the coverage tolerance touch;
/// their single contact point (the midpoint) is emitted instead of two
/// numerically coincident intersections. Intersections are taken at
/// `r(1 + COVER_TOL/2)` so every emitted point covers its two generators with
/// room to spare under `covers(.., COVER_TOL)`.
pub fn candidate_locations(instance: &Instance, r: f64) -> Result<Vec<Point>> {
    if instance.dim() != 2 || !instance.norm.is_euclidean() {
        return Err(FmclpError::Unsupported(
            "candidate locations need planar Euclidean instances".into(),
        ));
    }
    let pts = &instance.points;
    let mut out: Vec<Point> = pts.clone();
    let r_in = r * (1.0 + 0.5 * COVER_TOL);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (a, b) = (pts[i].coords(), pts[j].coords());
            let dx = b[0] - a[0];
            let dy = b[1] - a[1];
            let dist = dx.hypot(dy);
            if dist == 0.0 || dist > 2.0 * r * (1.0 + COVER_TOL) {
                continue;
            }
            if (dist - 2.0 * r).abs() <= 2.0 * r * COVER_TOL {
                out.push(pts[i].midpoint(&pts[j]));
                continue;
            }
            let half = 0.5 * dist;
            let h = (r_in * r_in - half * half).max(0.0).sqrt();
            let (mx, my) = (a[0] + 0.5 * dx, a[1] + 0.5 * dy);
            let (ux, uy) = (-dy / dist, dx / dist);
            out.push(Point(vec![mx + h * ux, my + h * uy]));
            out.push(Point(vec![mx - h * ux, my - h * uy]));
        }
    }
    Ok(out)
}
