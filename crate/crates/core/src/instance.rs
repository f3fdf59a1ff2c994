use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FmclpError, Result};
use crate::geometry::{NormSpec, Point};

/// A covering instance: weighted demand points, the norm, and optionally a
/// finite set of candidate facility sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub norm: NormSpec,
    /// Explicit candidate sites; the demand points themselves when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<Point>>,
}

impl Instance {
    pub fn new(name: impl Into<String>, points: Vec<Point>, weights: Vec<f64>, norm: NormSpec) -> Result<Self> {
        let inst = Instance {
            name: name.into(),
            points,
            weights,
            norm,
            candidates: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_candidates(mut self, candidates: Vec<Point>) -> Result<Self> {
        self.candidates = Some(candidates);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(FmclpError::InvalidInstance("no demand points".into()));
        }
        if self.points.len() != self.weights.len() {
            return Err(FmclpError::LengthMismatch {
                expected: self.points.len(),
                got: self.weights.len(),
            });
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(FmclpError::InvalidInstance(format!("demand weight {w} is not a finite non-negative number")));
        }
        let d = self.points[0].dim();
        let all = self.points.iter().chain(self.candidates.iter().flatten());
        for p in all {
            if p.dim() != d {
                return Err(FmclpError::DimensionMismatch { expected: d, got: p.dim() });
            }
        }
        if matches!(&self.candidates, Some(c) if c.is_empty()) {
            return Err(FmclpError::InvalidInstance("empty candidate set".into()));
        }
        self.norm.validate()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Candidate facility sites for the discrete problem.
    pub fn candidate_sites(&self) -> &[Point] {
        self.candidates.as_deref().unwrap_or(&self.points)
    }

    pub(crate) fn points_at(&self, idx: &[usize]) -> Result<Vec<&Point>> {
        idx.iter()
            .map(|&i| {
                self.points
                    .get(i)
                    .ok_or_else(|| FmclpError::InvalidParameter(format!("point index {i} out of range")))
            })
            .collect()
    }

    /// Keeps only the first `n` demand points.
    pub fn truncated(&self, n: usize) -> Result<Instance> {
        if n == 0 || n > self.len() {
            return Err(FmclpError::InvalidParameter(format!(
                "cannot truncate {} points to {n}",
                self.len()
            )));
        }
        let mut out = self.clone();
        out.points.truncate(n);
        out.weights.truncate(n);
        Ok(out)
    }

    /// Content hash over coordinates, weights, norm and candidates (hex sha-256).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for (p, w) in self.points.iter().zip(&self.weights) {
            for c in p.coords() {
                h.update(c.to_le_bytes());
            }
            h.update(w.to_le_bytes());
        }
        h.update(format!("{:?}", self.norm).as_bytes());
        if let Some(cands) = &self.candidates {
            h.update(b"candidates");
            for p in cands {
                for c in p.coords() {
                    h.update(c.to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
