//! JSON problem files:
//!
//! ```json
//! {
//!   "domain": {"kind": "interval-union", "params": {"intervals": [[-1.0, 1.0]]}},
//!   "weight": {"kind": "polynomial-field", "params": {"coeffs": [0.0, 0.0, 1.0]}},
//!   "measure": {"rule": "natural", "order": 128, "normalize": false},
//!   "precision": {"mode": "extended"}
//! }
//! ```
//!
//! `measure` and `precision` are optional. Without `measure.order` the order
//! is chosen per run as `4(n+1)` for the largest requested level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Domain, Weight, WeightedProblem};
use crate::scalar::Precision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureRule {
    /// Gauss–Legendre on intervals, equispaced on circles, polar product on
    /// disks, counting measure on point clouds.
    #[default]
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub rule: MeasureRule,
    #[serde(default)]
    pub order: Option<usize>,
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionSpec {
    #[serde(default)]
    pub mode: Precision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub domain: Domain,
    pub weight: Weight,
    #[serde(default)]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub precision: PrecisionSpec,
}

impl ProblemFile {
    /// Parses and validates; errors name the offending field and position.
    pub fn parse(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ProblemFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!("field `{path}`: {inner}"))
        })?;
        file.domain
            .validate()
            .map_err(|e| Error::Config(format!("field `domain`: {e}")))?;
        file.weight
            .validate()
            .map_err(|e| Error::Config(format!("field `weight`: {e}")))?;
        if file.measure.order == Some(0) {
            return Err(Error::Config("field `measure.order`: must be >= 1".into()));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn is_real_line(&self) -> bool {
        matches!(self.domain, Domain::RealLine)
    }

    /// Quadrature order for levels up to `max_level`.
    pub fn order_for(&self, max_level: usize) -> usize {
        self.measure.order.unwrap_or(4 * (max_level + 1))
    }

    /// The weighted problem sized for levels up to `max_level`.
    pub fn problem(&self, max_level: usize) -> Result<WeightedProblem> {
        if self.is_real_line() {
            return Err(Error::Config(
                "the real line has no generic measure; use the unbounded command".into(),
            ));
        }
        WeightedProblem::build(
            self.domain.clone(),
            self.weight.clone(),
            self.order_for(max_level),
            self.measure.normalize,
        )
    }
}
