// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::curve::PolygonalCurve;
use crate::scheme::StepReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("k-fold anisotropy with k = {k}, delta = {delta} is not strictly convex: delta*(k^2-1) = {bound} must be < 1")]
    ConvexityGuard { k: u32, delta: f64, bound: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gradient requested at the zero direction p = 0")]
    DegenerateDirection,

    #[error("collapsed edge: element {element} has zero length")]
    CollapsedEdge { element: usize },

    #[error("singular 2x2 pivot block at row {block}")]
    SingularSystem { block: usize },

    #[error("user-supplied splitting violates plus + minus = full by {mismatch:e} at a sample point")]
    SplitMismatch { mismatch: f64 },

    #[error("time {t} lies beyond the extinction time {extinction}")]
    BeyondExtinction { t: f64, extinction: f64 },

    #[error(transparent)]
    NonConvergence(Box<NonConvergence>),

    #[error("step {step} (t = {time}) failed: {source}")]
    Step {
        step: usize,
        time: f64,
        last_good: Box<PolygonalCurve<f64>>,
        #[source]
        source: Box<Error>,
    },
}

/// Newton or Picard iteration that did not reach the residual tolerance.
#[derive(Debug, Error)]
#[error("nonlinear solve did not converge in {} iterations (residual {:e})", .report.iterations, .report.final_residual)]
pub struct NonConvergence {
    /// Iterate with the smallest residual seen.
    pub best_iterate: PolygonalCurve<f64>,
    pub report: StepReport<f64>,
}
