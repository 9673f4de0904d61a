//! Monte Carlo tube volumes around zero sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{zero_set_distance, ScalarField, ScalarFieldSpec, ZeroCloud};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::ScalingReport;

/// Fraction of the sampling ball within `delta` of the zero set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubeEstimate {
    pub delta: f64,
    pub volume_fraction: f64,
    pub confidence_halfwidth: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl TubeEstimate {
    pub fn from_count(delta: f64, count: usize, n_samples: usize, seed: u64) -> Self {
        let p = if n_samples == 0 { 0.0 } else { count as f64 / n_samples as f64 };
        TubeEstimate {
            delta,
            volume_fraction: p,
            confidence_halfwidth: binomial_halfwidth(p, n_samples),
            n_samples,
            seed,
        }
    }
}

/// 95% normal-approximation halfwidth `1.96 sqrt(p(1-p)/n)`.
pub fn binomial_halfwidth(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Cloud density used for the nearest-neighbour distance estimate.
pub const CLOUD_PER_AXIS_2D: usize = 801;
pub const CLOUD_PER_AXIS_3D: usize = 81;

fn cloud_for<F: ScalarField>(spec: &ScalarFieldSpec<F>) -> ZeroCloud {
    let per_axis = if spec.field.dim() <= 2 { CLOUD_PER_AXIS_2D } else { CLOUD_PER_AXIS_3D };
    ZeroCloud::build(spec, per_axis)
}

/// Distances of `n_samples` uniform points in the sampling ball, in index order.
pub fn sample_distances<F: ScalarField>(spec: &ScalarFieldSpec<F>, cloud: &ZeroCloud, n_samples: usize, seed: u64) -> Vec<f64> {
    let r = spec.sample_radius();
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let x = rng::in_ball(&mut rng::stream(seed, i as u64), &spec.center, r);
            zero_set_distance(spec, cloud, &x)
        })
        .collect()
}

pub fn tube_volume<F: ScalarField>(spec: &ScalarFieldSpec<F>, delta: f64, n_samples: usize, seed: u64) -> TubeEstimate {
    let cloud = cloud_for(spec);
    let dist = sample_distances(spec, &cloud, n_samples, seed);
    let count = dist.iter().filter(|&&d| d < delta).count();
    TubeEstimate::from_count(delta, count, n_samples, seed)
}

/// Log-log slope of tube volume against `delta`, sharing one sample set across the grid.
pub fn scaling_fit<F: ScalarField>(spec: &ScalarFieldSpec<F>, deltas: &[f64], n_samples: usize, seed: u64) -> Result<ScalingReport> {
    if deltas.len() < 5 {
        return Err(Error::InvalidInput("scaling fit needs at least 5 deltas".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < spec.c1)) {
        return Err(Error::InvalidInput(format!("delta {d} outside (0, {})", spec.c1)));
    }
    let cloud = cloud_for(spec);
    let dist = sample_distances(spec, &cloud, n_samples, seed);
    let estimates = count_tubes(&dist, deltas, n_samples, seed);
    if let Some(e) = estimates.iter().find(|e| e.volume_fraction == 0.0) {
        return Err(Error::InsufficientSamples { delta: e.delta });
    }
    Ok(ScalingReport::fit(
        deltas.to_vec(),
        estimates.iter().map(|e| e.volume_fraction).collect(),
        estimates.iter().map(|e| e.confidence_halfwidth).collect(),
        n_samples,
        seed,
    ))
}

pub(crate) fn count_tubes(dist: &[f64], deltas: &[f64], n_samples: usize, seed: u64) -> Vec<TubeEstimate> {
    deltas
        .iter()
        .map(|&delta| TubeEstimate::from_count(delta, dist.iter().filter(|&&d| d < delta).count(), n_samples, seed))
        .collect()
}

/// `max / min` of `fraction / delta` across a report, the bounded-ratio check.
pub fn ratio_spread(report: &ScalingReport) -> f64 {
    let r: Vec<f64> = report.deltas.iter().zip(&report.estimates).map(|(d, e)| e / d).collect();
    let max = r.iter().cloned().fold(f64::MIN, f64::max);
    let min = r.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::TestField;
    use crate::stats::log_grid;

    #[test]
    fn strip_fraction_matches_area() {
        let spec = ScalarFieldSpec::new(TestField::Hyperplane { dimension: 2 });
        let est = tube_volume(&spec, 0.05, 100_000, 11);
        // strip |x1| < 0.05 inside the disc of radius 0.5
        let (r, a): (f64, f64) = (0.5, 0.05);
        let seg = |h: f64| r * r * (h / r).asin() + h * (r * r - h * h).sqrt();
        let exact = 2.0 * seg(a) / (std::f64::consts::PI * r * r);
        assert!((est.volume_fraction - exact).abs() < 3.0 * est.confidence_halfwidth);
        assert!((exact - 0.127).abs() < 1e-3);
    }

    #[test]
    fn no_zero_field() {
        let spec = ScalarFieldSpec::new(TestField::NoZero { dimension: 2 });
        assert_eq!(tube_volume(&spec, 0.1, 2000, 1).volume_fraction, 0.0);
        let err = scaling_fit(&spec, &log_grid(1e-3, 1e-1, 5), 2000, 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { .. }));
    }

    #[test]
    fn monotone_in_delta() {
        let spec = ScalarFieldSpec::new(TestField::Circle { dimension: 2 });
        let cloud = cloud_for(&spec);
        let dist = sample_distances(&spec, &cloud, 5000, 3);
        let est = count_tubes(&dist, &log_grid(1e-3, 1e-1, 9), 5000, 3);
        assert!(est.windows(2).all(|w| w[0].volume_fraction <= w[1].volume_fraction));
    }
}
