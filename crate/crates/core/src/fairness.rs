//! OWA weight families, orness, orness-constrained weight fitting, the
//! alpha-fairness welfare function and the combined (alpha, lambda)-fair
//! operator.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{FmclpError, Result};

const SUM_TOL: f64 = 1e-12;

/// Extended real: a finite value or minus infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
}

impl ExtReal {
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
        }
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, ExtReal::NegInf)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::NegInf => None,
            ExtReal::Finite(x) => Some(x),
        }
    }

    /// Equal within `tol` relative (absolute below 1); two minus infinities are equal.
    pub fn approx_eq(self, other: ExtReal, tol: f64) -> bool {
        match (self, other) {
            (ExtReal::NegInf, ExtReal::NegInf) => true,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0),
            _ => false,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtReal::NegInf, ExtReal::NegInf) => Ordering::Equal,
            (ExtReal::NegInf, _) => Ordering::Less,
            (_, ExtReal::NegInf) => Ordering::Greater,
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.total_cmp(b),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::NegInf => s.serialize_str("-inf"),
            ExtReal::Finite(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) if x == f64::NEG_INFINITY => Ok(ExtReal::NegInf),
            Raw::Num(x) => Ok(ExtReal::Finite(x)),
            Raw::Str(s) if s == "-inf" => Ok(ExtReal::NegInf),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad extended real {s:?}"))),
        }
    }
}

/// Inequality-aversion parameter as an exact non-negative rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AlphaParam {
    num: u64,
    den: u64,
}

impl AlphaParam {
    pub const ZERO: AlphaParam = AlphaParam { num: 0, den: 1 };
    pub const ONE: AlphaParam = AlphaParam { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(FmclpError::InvalidParameter("alpha denominator is zero".into()));
        }
        let g = num.gcd(&den);
        Ok(AlphaParam { num: num / g, den: den / g })
    }

    pub fn integer(n: u64) -> Self {
        AlphaParam { num: n, den: 1 }
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }

    /// Reduced `(a, b)` with `|1 - alpha| = a / b`, and whether alpha < 1.
    pub fn one_minus(self) -> (u64, u64, bool) {
        if self.num <= self.den {
            (self.den - self.num, self.den, true)
        } else {
            (self.num - self.den, self.den, false)
        }
    }
}

impl fmt::Display for AlphaParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for AlphaParam {
    type Err = FmclpError;

    /// Accepts `"a/b"`, integers and finite decimals such as `"0.5"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || FmclpError::InvalidParameter(format!("alpha must be a non-negative rational, got {s:?}"));
        if let Some((a, b)) = s.split_once('/') {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            return AlphaParam::new(a, b).map_err(|_| bad());
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || frac.len() > 18 || !frac.bytes().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
            let den = 10u64.pow(frac.len() as u32);
            let frac: u64 = frac.parse().map_err(|_| bad())?;
            let num = int.checked_mul(den).and_then(|x| x.checked_add(frac)).ok_or_else(bad)?;
            return AlphaParam::new(num, den);
        }
        Ok(AlphaParam::integer(s.parse().map_err(|_| bad())?))
    }
}

impl Serialize for AlphaParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for AlphaParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The fair OWA families, by their one-letter tags.
#[derive(Debug, Clone, PartialEq)]
pub enum OwaFamily {
    /// `W`: plain mean.
    Average,
    /// `C`: minimum.
    Minimum,
    /// `K`: mean of the `k` smallest values; `None` resolves to `ceil(p/2)`.
    KAverage { k: Option<usize> },
    /// `D`: convex mix of the minimum and the mean.
    MinAverage { beta_mix: f64 },
    /// `G`: Gini weights.
    Gini,
    /// `H`: harmonic weights.
    Harmonic,
    /// User supplied (or fitted) weights.
    Custom { lambda: Vec<f64> },
}

pub const DEFAULT_BETA_MIX: f64 = 0.5;

impl OwaFamily {
    pub fn letter(&self) -> &'static str {
        match self {
            OwaFamily::Average => "W",
            OwaFamily::Minimum => "C",
            OwaFamily::KAverage { .. } => "K",
            OwaFamily::MinAverage { .. } => "D",
            OwaFamily::Gini => "G",
            OwaFamily::Harmonic => "H",
            OwaFamily::Custom { .. } => "Custom",
        }
    }

    /// Parses a family letter; `k` and `beta_mix` apply to `K` and `D` only.
    pub fn from_letter(letter: &str, k: Option<usize>, beta_mix: Option<f64>) -> Result<Self> {
        Ok(match letter.trim().to_ascii_uppercase().as_str() {
            "W" => OwaFamily::Average,
            "C" => OwaFamily::Minimum,
            "K" => OwaFamily::KAverage { k },
            "D" => OwaFamily::MinAverage {
                beta_mix: beta_mix.unwrap_or(DEFAULT_BETA_MIX),
            },
            "G" => OwaFamily::Gini,
            "H" => OwaFamily::Harmonic,
            other => return Err(FmclpError::InvalidParameter(format!("unknown OWA family {other:?}"))),
        })
    }

    /// The six standard families with default parameters.
    pub fn standard() -> Vec<OwaFamily> {
        vec![
            OwaFamily::Average,
            OwaFamily::Minimum,
            OwaFamily::KAverage { k: None },
            OwaFamily::MinAverage {
                beta_mix: DEFAULT_BETA_MIX,
            },
            OwaFamily::Gini,
            OwaFamily::Harmonic,
        ]
    }

    /// Closed-form orness of the family at size `p >= 2`.
    ///
    /// For `MinAverage` this is `(2 + (p-2) b) / (2 + 2 (p-1) b)`, obtained by
    /// summing the weights directly.
    pub fn closed_form_orness(&self, p: usize) -> Option<f64> {
        if p < 2 {
            return None;
        }
        let pf = p as f64;
        Some(match self {
            OwaFamily::Average => 0.5,
            OwaFamily::Minimum => 1.0,
            OwaFamily::KAverage { k } => {
                let k = k.unwrap_or(p.div_ceil(2)) as f64;
                1.0 - (k - 1.0) / (2.0 * (pf - 1.0))
            }
            OwaFamily::MinAverage { beta_mix: b } => (2.0 + (pf - 2.0) * b) / (2.0 + 2.0 * (pf - 1.0) * b),
            OwaFamily::Gini => (4.0 * pf + 1.0) / (6.0 * pf),
            OwaFamily::Harmonic => 0.75,
            OwaFamily::Custom { .. } => return None,
        })
    }
}

/// Monotone (nonincreasing) OWA weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct OwaWeights {
    lambda: Vec<f64>,
    family: OwaFamily,
}

impl OwaWeights {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        Self::tagged(lambda.clone(), OwaFamily::Custom { lambda })
    }

    fn tagged(lambda: Vec<f64>, family: OwaFamily) -> Result<Self> {
        if lambda.is_empty() {
            return Err(FmclpError::InvalidWeights("empty weight vector".into()));
        }
        if let Some(l) = lambda.iter().find(|l| !(**l >= 0.0 && **l <= 1.0)) {
            return Err(FmclpError::InvalidWeights(format!("weight {l} outside [0,1]")));
        }
        let s: f64 = lambda.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(FmclpError::InvalidWeights(format!("weights sum to {s}, not 1")));
        }
        if lambda.windows(2).any(|w| w[1] > w[0] + SUM_TOL) {
            return Err(FmclpError::InvalidWeights("weights must be nonincreasing".into()));
        }
        Ok(OwaWeights { lambda, family })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn family(&self) -> &OwaFamily {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

fn harmonic(k: usize) -> f64 {
    (1..=k).map(|l| 1.0 / l as f64).sum()
}

/// Builds the weight vector of `family` for `p` facilities.
pub fn owa_family(family: &OwaFamily, p: usize) -> Result<OwaWeights> {
    if p == 0 {
        return Err(FmclpError::InvalidParameter("p must be at least 1".into()));
    }
    let pf = p as f64;
    let (lambda, resolved) = match family {
        OwaFamily::Average => (vec![1.0 / pf; p], family.clone()),
        OwaFamily::Minimum => {
            let mut l = vec![0.0; p];
            l[0] = 1.0;
            (l, family.clone())
        }
        OwaFamily::KAverage { k } => {
            let k = k.unwrap_or(p.div_ceil(2));
            if k == 0 || k > p {
                return Err(FmclpError::InvalidParameter(format!("k-average needs 1 <= k <= p, got k = {k}, p = {p}")));
            }
            let l = (0..p).map(|j| if j < k { 1.0 / k as f64 } else { 0.0 }).collect();
            (l, OwaFamily::KAverage { k: Some(k) })
        }
        OwaFamily::MinAverage { beta_mix } => {
            let b = *beta_mix;
            if !(0.0..=1.0).contains(&b) {
                return Err(FmclpError::InvalidParameter(format!("beta_mix must lie in [0,1], got {b}")));
            }
            let den = 1.0 + (pf - 1.0) * b;
            let mut l = vec![b / den; p];
            l[0] = 1.0 / den;
            (l, family.clone())
        }
        OwaFamily::Gini => (
            (1..=p).map(|j| (2.0 * (pf - j as f64) + 1.0) / (pf * pf)).collect(),
            family.clone(),
        ),
        OwaFamily::Harmonic => {
            let hp = harmonic(p);
            ((1..=p).map(|j| (hp - harmonic(j - 1)) / pf).collect(), family.clone())
        }
        OwaFamily::Custom { lambda } => {
            if lambda.len() != p {
                return Err(FmclpError::LengthMismatch { expected: p, got: lambda.len() });
            }
            (lambda.clone(), family.clone())
        }
    };
    OwaWeights::tagged(lambda, resolved)
}

fn orness_coeffs(p: usize) -> Vec<f64> {
    (1..=p).map(|j| (p - j) as f64 / (p - 1) as f64).collect()
}

fn orness_of(lambda: &[f64]) -> f64 {
    orness_coeffs(lambda.len()).iter().zip(lambda).map(|(c, l)| c * l).sum()
}

pub fn orness(w: &OwaWeights) -> Result<f64> {
    if w.len() < 2 {
        return Err(FmclpError::InvalidParameter("orness is undefined for p = 1".into()));
    }
    Ok(orness_of(&w.lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLoss {
    MaxEntropy,
    MinVariance,
}

/// Weights of prescribed orness `beta` that are optimal for `loss`.
///
/// Both losses have a one-parameter family of KKT points indexed by the
/// orness multiplier `t`: `lambda_j ~ exp(t c_j)` for maximum entropy and the
/// simplex projection of `t c_j` for minimum variance, where `c_j` are the
/// orness coefficients. Orness is monotone in `t`, so `t` is found by bisection.
pub fn fit_weights(p: usize, beta: f64, loss: WeightLoss) -> Result<OwaWeights> {
    if p < 2 {
        return Err(FmclpError::InvalidParameter("weight fitting needs p >= 2".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(FmclpError::InvalidParameter(format!("orness must lie in (0,1), got {beta}")));
    }
    if beta < 0.5 {
        return Err(FmclpError::InvalidParameter(format!(
            "orness {beta} < 1/2 forces increasing weights, which are not valid fair OWA weights"
        )));
    }
    let c = orness_coeffs(p);
    let weights_at = |t: f64| -> Vec<f64> {
        match loss {
            WeightLoss::MaxEntropy => {
                // c_j <= 1, so shifting by t keeps every exponent <= 0
                let e: Vec<f64> = c.iter().map(|cj| (t * (cj - 1.0)).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            }
            WeightLoss::MinVariance => simplex_projection(&c, t),
        }
    };
    let orness_at = |t: f64| orness_of(&weights_at(t));
    let mut hi = 1.0;
    while orness_at(hi) < beta {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(FmclpError::InvalidParameter(format!("orness {beta} not attainable")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if orness_at(mid) < beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut lambda = weights_at(0.5 * (lo + hi));
    let s: f64 = lambda.iter().sum();
    lambda.iter_mut().for_each(|l| *l /= s);
    OwaWeights::new(lambda)
}

/// argmin sum lambda^2 over the simplex with linear tilt `t c`, i.e. the
/// Euclidean projection of `t c` onto the probability simplex (c sorted
/// nonincreasing).
fn simplex_projection(c: &[f64], t: f64) -> Vec<f64> {
    let mut prefix = 0.0;
    let mut shift = 0.0;
    for (r, cj) in c.iter().enumerate() {
        prefix += t * cj;
        let a = (1.0 - prefix) / (r + 1) as f64;
        if t * cj + a > 0.0 {
            shift = a;
        }
    }
    c.iter().map(|cj| (t * cj + shift).max(0.0)).collect()
}

/// Pairing of OWA weights with the inequality-aversion parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessSpec {
    weights: OwaWeights,
    alpha: AlphaParam,
    alpha_f: f64,
}

impl FairnessSpec {
    pub fn new(weights: OwaWeights, alpha: AlphaParam) -> Self {
        FairnessSpec {
            weights,
            alpha,
            alpha_f: alpha.to_f64(),
        }
    }

    pub fn from_family(family: &OwaFamily, p: usize, alpha: AlphaParam) -> Result<Self> {
        Ok(Self::new(owa_family(family, p)?, alpha))
    }

    pub fn weights(&self) -> &OwaWeights {
        &self.weights
    }

    pub fn alpha(&self) -> AlphaParam {
        self.alpha
    }

    pub fn p(&self) -> usize {
        self.weights.len()
    }

    /// Evaluates the operator, sorting `w` in place (nondecreasing).
    pub fn eval_in_place(&self, w: &mut [f64]) -> ExtReal {
        w.sort_by(f64::total_cmp);
        self.eval_sorted(w)
    }

    /// Evaluates the operator on an already nondecreasing vector.
    pub fn eval_sorted(&self, w: &[f64]) -> ExtReal {
        let lam = &self.weights.lambda;
        if self.alpha.is_zero() {
            return ExtReal::Finite(lam.iter().zip(w).map(|(l, x)| l * x).sum());
        }
        if self.alpha_f >= 1.0 && w[0] <= 0.0 {
            return ExtReal::NegInf;
        }
        if self.alpha.is_one() {
            return ExtReal::Finite(lam.iter().zip(w).map(|(l, x)| if *l == 0.0 { 0.0 } else { l * x.ln() }).sum());
        }
        let e = 1.0 - self.alpha_f;
        let s: f64 = if self.alpha.numer() == 1 && self.alpha.denom() == 2 {
            lam.iter().zip(w).map(|(l, x)| l * x.sqrt()).sum()
        } else if self.alpha.numer() == 2 && self.alpha.denom() == 1 {
            lam.iter().zip(w).map(|(l, x)| l / x).sum()
        } else {
            lam.iter().zip(w).map(|(l, x)| l * x.powf(e)).sum()
        };
        ExtReal::Finite(s / e)
    }
}

/// Alpha-fair welfare of a resource vector.
pub fn alpha_fair(w: &[f64], alpha: AlphaParam) -> ExtReal {
    if alpha.is_zero() {
        return ExtReal::Finite(w.iter().sum());
    }
    if alpha.to_f64() >= 1.0 && w.iter().any(|&x| x <= 0.0) {
        return ExtReal::NegInf;
    }
    if alpha.is_one() {
        return ExtReal::Finite(w.iter().map(|x| x.ln()).sum());
    }
    let e = 1.0 - alpha.to_f64();
    ExtReal::Finite(w.iter().map(|x| x.powf(e)).sum::<f64>() / e)
}

/// The (alpha, lambda)-fair operator.
pub fn fair_owa(w: &[f64], spec: &FairnessSpec) -> Result<ExtReal> {
    if w.len() != spec.p() {
        return Err(FmclpError::LengthMismatch {
            expected: spec.p(),
            got: w.len(),
        });
    }
    if let Some(x) = w.iter().find(|x| !(**x >= 0.0)) {
        return Err(FmclpError::InvalidParameter(format!("coverage {x} is negative")));
    }
    let mut v = w.to_vec();
    Ok(spec.eval_in_place(&mut v))
}

/// JSON form: `{"family":"G","p":5,"alpha":"1/2","params":{...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSpecFile {
    pub family: String,
    pub p: usize,
    pub alpha: AlphaParam,
    #[serde(default)]
    pub params: FamilyParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_mix: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

impl FairnessSpecFile {
    pub fn to_spec(&self) -> Result<FairnessSpec> {
        let family = if self.family.eq_ignore_ascii_case("custom") {
            let lambda = self
                .params
                .lambda
                .clone()
                .ok_or_else(|| FmclpError::InvalidParameter("custom family needs params.lambda".into()))?;
            OwaFamily::Custom { lambda }
        } else {
            OwaFamily::from_letter(&self.family, self.params.k, self.params.beta_mix)?
        };
        FairnessSpec::from_family(&family, self.p, self.alpha)
    }

    pub fn from_spec(spec: &FairnessSpec) -> Self {
        let mut params = FamilyParams::default();
        match spec.weights.family() {
            OwaFamily::KAverage { k } => params.k = *k,
            OwaFamily::MinAverage { beta_mix } => params.beta_mix = Some(*beta_mix),
            OwaFamily::Custom { lambda } => params.lambda = Some(lambda.clone()),
            _ => {}
        }
        FairnessSpecFile {
            family: spec.weights.family().letter().to_string(),
            p: spec.p(),
            alpha: spec.alpha,
            params,
        }
    }
}

impl Serialize for FairnessSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FairnessSpecFile::from_spec(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for FairnessSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        FairnessSpecFile::deserialize(d)?.to_spec().map_err(serde::de::Error::custom)
    }
}

/// Counterexamples found by [`axioms_check`]; empty vectors mean the property held.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AxiomReport {
    pub samples: usize,
    pub symmetry: Vec<String>,
    pub pareto: Vec<String>,
    pub continuity: Vec<String>,
    pub concavity: Vec<String>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.symmetry.is_empty() && self.pareto.is_empty() && self.continuity.is_empty() && self.concavity.is_empty()
    }
}

/// Randomised check of symmetry, Pareto monotonicity, local Lipschitz
/// continuity and midpoint concavity of the operator.
pub fn axioms_check(spec: &FairnessSpec, samples: usize, seed: u64) -> AxiomReport {
    let p = spec.p();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AxiomReport {
        samples,
        ..Default::default()
    };
    let f = |w: &[f64]| {
        let mut v = w.to_vec();
        spec.eval_in_place(&mut v).to_f64()
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let alpha = spec.alpha().to_f64();
    for _ in 0..samples {
        let w: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..10.0)).collect();
        let fw = f(&w);

        let mut perm = w.clone();
        perm.shuffle(&mut rng);
        if !close(fw, f(&perm)) {
            report.symmetry.push(format!("F({w:?}) != F({perm:?})"));
        }

        let mut up = w.clone();
        let j = rng.gen_range(0..p);
        up[j] += rng.gen_range(0.0..5.0);
        if f(&up) < fw - 1e-12 * fw.abs().max(1.0) {
            report.pareto.push(format!("F({up:?}) < F({w:?})"));
        }

        let delta = 1e-7;
        let shifted: Vec<f64> = w.iter().map(|x| x + rng.gen_range(-delta..delta)).collect();
        // |dF/dW_j| <= lambda_j W_j^{-alpha}; W >= 0.5 - delta on the sample box
        let lip = (0.5f64 - delta).powf(-alpha);
        if (f(&shifted) - fw).abs() > 1.01 * lip * delta + 1e-12 * fw.abs().max(1.0) {
            report.continuity.push(format!("jump at {w:?}"));
        }

        let v: Vec<f64> = (0..p).map(|_| rng.gen_range(0.5..10.0)).collect();
        let mid: Vec<f64> = w.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let rhs = 0.5 * (fw + f(&v));
        if f(&mid) < rhs - 1e-12 * rhs.abs().max(1.0) {
            report.concavity.push(format!("midpoint of {w:?} and {v:?}"));
        }
    }
    report
}
