//! The individual inequality checks.

pub mod decay;
pub mod gradient;
pub mod limits;
pub mod measure;
pub mod order;
pub mod reference;

pub use decay::{check_asymptotic_mean, check_decay, DecayOutcome};
pub use gradient::{check_pointwise_gradient, check_smoothing, check_uniform_gradient, GradientMode, SmoothingOutcome};
pub use limits::check_penalization_limit;
pub use measure::{check_hyper, check_logsob, check_poincare};
pub use order::{check_invariance, check_order_properties, check_resolvent_bounds};
pub use reference::{check_mehler_grid, check_mehler_mc};

use statrs::distribution::{ContinuousCDF, Normal};

use super::report::{ToleranceComponent, ToleranceSource};
use crate::error::Result;
use crate::solvers::grid::{GridField, GridSpec, PdeSolution};
use crate::solvers::invariant::InvariantSample;
use crate::stats::{batch_ci, MeanCi, Z95};

/// Boundary layers of fine-grid nodes left out of node-wise checks (two
/// layers of the half-resolution grid).
pub const BOUNDARY_LAYERS: usize = 4;

pub(crate) fn interior_nodes(spec: &GridSpec) -> Vec<usize> {
    (0..spec.len()).filter(|&k| spec.is_interior(k, BOUNDARY_LAYERS)).collect()
}

/// Applies `map` to the fine field and to the half-resolution field at time
/// index `k`, returning the fine result and the coarse result interpolated to
/// the fine nodes.
pub(crate) fn fine_and_coarse<M>(sol: &PdeSolution, k: usize, map: M) -> (Vec<f64>, Option<Vec<f64>>)
where
    M: Fn(&GridField) -> Vec<f64>,
{
    let fine = map(&sol.field(k));
    let coarse = sol.coarse.as_ref().map(|c| {
        let cf = c.field(k);
        let mapped = GridField {
            grid: cf.grid.clone(),
            values: map(&cf),
        };
        mapped.resampled(&sol.grid).values
    });
    (fine, coarse)
}

pub(crate) fn discretization(fine: f64, coarse: Option<f64>) -> ToleranceComponent {
    ToleranceComponent::new(ToleranceSource::Discretization, coarse.map_or(0.0, |c| fine - c))
}

pub(crate) fn ci(value: f64) -> ToleranceComponent {
    ToleranceComponent::new(ToleranceSource::ConfidenceInterval, value)
}

pub(crate) fn roundoff(scale: f64) -> ToleranceComponent {
    ToleranceComponent::new(ToleranceSource::Roundoff, super::report::ROUNDOFF_FLOOR * (1.0 + scale.abs()))
}

/// Factor widening a 95% half-width to a family-wise 95% level over `m`
/// simultaneous comparisons (Bonferroni).
pub(crate) fn family_factor(m: usize) -> f64 {
    if m <= 1 {
        return 1.0;
    }
    let normal = Normal::standard();
    normal.inverse_cdf(1.0 - 0.025 / m as f64) / Z95
}

/// A statistic of weighted column means, estimated on the whole sample with
/// a batch-spread interval: `stat` receives the columns and weights of a
/// subset of the sample.
pub(crate) fn batched_statistic<S>(sample: &InvariantSample, columns: &[Vec<f64>], stat: S) -> Result<MeanCi>
where
    S: Fn(&[&[f64]], &[f64]) -> f64,
{
    let weights = sample.weights();
    let n = weights.len();
    let all: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    let estimate = stat(&all, &weights);
    let size = n / sample.batches;
    let per_batch: Vec<f64> = (0..sample.batches)
        .map(|b| {
            let r = b * size..(b + 1) * size;
            let cols: Vec<&[f64]> = columns.iter().map(|c| &c[r.clone()]).collect();
            stat(&cols, &weights[r])
        })
        .filter(|v| v.is_finite())
        .collect();
    let spread = batch_ci(&per_batch);
    Ok(MeanCi {
        mean: estimate,
        half_width: spread.half_width,
    })
}

/// Weighted mean `Σ w v / Σ w`.
pub(crate) fn wmean(values: &[f64], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, w) in values.iter().zip(weights) {
        num += v * w;
        den += w;
    }
    num / den
}

/// Normalised `L^p` norm of grid values under node weights.
pub(crate) fn grid_norm(values: &[f64], weights: &[f64], p: f64) -> f64 {
    let m = wmean(&values.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>(), weights);
    m.powf(1.0 / p)
}
