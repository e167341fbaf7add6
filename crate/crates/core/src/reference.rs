//! The three reference problems used throughout the test and verification suites.

use serde::Serialize;

use crate::error::Result;
use crate::measures::{Domain, Weight, WeightedProblem};

/// Half-width of the interval carrying the Gaussian reference problem.
pub const GAUSSIAN_HALF_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Unit circle, `w ≡ 1`, normalized arc length.
    Circle,
    /// `[-1, 1]`, `w ≡ 1`, `dx`.
    Segment,
    /// `[-2, 2]`, `w = exp(-x^2)`, `dx`.
    Gaussian,
}

impl Reference {
    pub const ALL: [Reference; 3] = [Reference::Circle, Reference::Segment, Reference::Gaussian];

    pub fn name(self) -> &'static str {
        match self {
            Reference::Circle => "circle",
            Reference::Segment => "segment",
            Reference::Gaussian => "gaussian",
        }
    }

    /// The problem with `order` quadrature nodes per component.
    pub fn build(self, order: usize) -> Result<WeightedProblem> {
        match self {
            Reference::Circle => {
                WeightedProblem::build(Domain::circle(1.0)?, Weight::Unit, order, true)
            }
            Reference::Segment => {
                WeightedProblem::build(Domain::interval(-1.0, 1.0)?, Weight::Unit, order, false)
            }
            Reference::Gaussian => WeightedProblem::build(
                Domain::interval(-GAUSSIAN_HALF_WIDTH, GAUSSIAN_HALF_WIDTH)?,
                Weight::gaussian(),
                order,
                false,
            ),
        }
    }

    /// Smallest admissible order for level `n`.
    pub fn for_level(self, n: usize) -> Result<WeightedProblem> {
        self.build(4 * (n + 1))
    }
}
