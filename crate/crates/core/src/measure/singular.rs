//! `mu_1` measure of `delta`-neighbourhoods of `T^{-k} S` inside a phase-space window.
//!
//! Samples and singular points are both compared in the line chart of the
//! window's base line, where `mu_1` is Lebesgue measure.

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tube::count_tubes;
use crate::billiard::{phase_to_line, LineChart, OrientedLine, PhaseChart, PhasePoint};
use crate::error::{Error, Result};
use crate::geometry::{BilliardConfig, ScattererInstance};
use crate::linalg::{self, Matrix, Vector};
use crate::rng;
use crate::singularity::{pull_one, solve_tangent_line};
use crate::stats::{median, ScalingReport};

/// Box `|coords_i| <= half_widths_i` in the phase chart at `base`
/// (surface coordinates first, then velocity coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseWindow {
    pub base: PhasePoint,
    pub half_widths: Vec<f64>,
}

impl PhaseWindow {
    fn contains(&self, coords: &[f64], scale: f64) -> bool {
        coords.iter().zip(&self.half_widths).all(|(c, h)| c.abs() <= scale * h)
    }
}

/// Points of `T^{-k} S` near a window, in line-chart coordinates.
pub struct SingularCloud {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    tree: KdTree<f64, usize, Vec<f64>>,
    /// Median nearest-neighbour distance; infinite for fewer than two points.
    pub spacing: f64,
    /// Single-linkage components at a gap of [`COMPONENT_GAP`] spacings.
    pub components: usize,
    pub attempts: usize,
}

/// Padding of the cloud region beyond the window, as a multiple of its half widths.
const CLOUD_PADDING: f64 = 1.5;
const NEIGHBOURS: usize = 8;
/// Linkage threshold in median spacings.
pub const COMPONENT_GAP: f64 = 20.0;

/// Samples tangent lines, pulls them back `k` steps and keeps those landing in
/// the (padded) window. For `k <= 1` directions are drawn from the window's
/// velocity box and aimed at instances whose tangent lines can reach it.
pub fn singularity_cloud(cfg: &BilliardConfig, window: &PhaseWindow, k: usize, attempts: usize, seed: u64) -> Result<SingularCloud> {
    let chart = PhaseChart::at(cfg, &window.base)?;
    let lchart = LineChart::at(&phase_to_line(&window.base));
    let d = cfg.dimension;
    if window.half_widths.len() != 2 * d - 2 {
        return Err(Error::InvalidInput(format!("window needs {} half widths", 2 * d - 2)));
    }
    let targets: Vec<ScattererInstance> = if k == 0 {
        vec![window.base.instance.clone()]
    } else {
        let reach = k as f64 * cfg.horizon_bound + cfg.max_diameter();
        cfg.enumerate_instances(&window.base.q, reach)
    };
    let q0 = &window.base.q;
    let reach_patch = 3.0 * window.half_widths[..d - 1].iter().cloned().fold(0.0, f64::max);
    let found: Vec<Vec<Vec<f64>>> = (0..attempts)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut out = Vec::new();
            let (v, aimed): (Vector, Vec<&ScattererInstance>) = if k <= 1 {
                let mut v = chart.v0.clone();
                for (e, h) in chart.velocity_frame.iter().zip(&window.half_widths[d - 1..]) {
                    v += e * rng::uniform(&mut r, -CLOUD_PADDING * h, CLOUD_PADDING * h);
                }
                let v = v.normalize();
                // only instances whose tangent lines with direction v can pass through the patch
                let aimed = targets
                    .iter()
                    .filter(|b| {
                        let rel = cfg.instance_center(b) - q0;
                        let e = cfg.scatterer(b).extent();
                        k == 0 || (rel.dot(&v) > -e && linalg::project_orthogonal(&rel, &v).norm() <= e + reach_patch)
                    })
                    .collect();
                (v, aimed)
            } else {
                (rng::unit_vector(&mut r, d), vec![&targets[rng::index(&mut r, targets.len())]])
            };
            for target in aimed {
                let c = cfg.instance_center(target);
                let mut toward = linalg::project_orthogonal(&(q0 - &c), &v);
                if toward.norm() < 1e-9 {
                    toward = linalg::project_orthogonal(&rng::unit_vector(&mut r, d), &v);
                }
                let toward = toward.normalize();
                let mut sides = vec![toward.clone(), -toward.clone()];
                if d > 2 {
                    let xi = linalg::project_orthogonal(&rng::unit_vector(&mut r, d), &v) * rng::uniform(&mut r, 0.0, 1.0);
                    sides.push(&toward + xi);
                }
                for u in sides {
                    let p = linalg::project_orthogonal(&c, &v) + u.normalize() * cfg.scatterer(target).extent();
                    let Ok(sol) = solve_tangent_line(cfg, target, &OrientedLine { p, v: v.clone() }) else {
                        continue;
                    };
                    let Ok(y) = pull_one(cfg, &sol.phase_point(), k) else {
                        continue;
                    };
                    if y.instance == window.base.instance
                        && y.v.dot(&chart.v0) > 0.0
                        && window.contains(&chart.coords(&y), CLOUD_PADDING)
                    {
                        out.push(lchart.coords(&phase_to_line(&y)));
                    }
                }
            }
            out
        })
        .collect();
    let points: Vec<Vec<f64>> = found.into_iter().flatten().collect();
    Ok(SingularCloud::new(k, points, attempts))
}

impl SingularCloud {
    fn new(k: usize, points: Vec<Vec<f64>>, attempts: usize) -> Self {
        let dim = points.first().map_or(1, |p| p.len());
        let mut tree = KdTree::new(dim);
        for (i, p) in points.iter().enumerate() {
            tree.add(p.clone(), i).expect("finite line coordinates");
        }
        let mut cloud = SingularCloud {
            k,
            points,
            tree,
            spacing: f64::INFINITY,
            components: 0,
            attempts,
        };
        if cloud.points.len() >= 2 {
            let nn: Vec<f64> = cloud
                .points
                .iter()
                .map(|p| cloud.tree.nearest(p, 2, &squared_euclidean).map_or(f64::INFINITY, |v| v[1].0.sqrt()))
                .collect();
            cloud.spacing = median(&nn);
        }
        cloud.components = cloud.count_components(COMPONENT_GAP * cloud.spacing);
        cloud
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn count_components(&self, gap: f64) -> usize {
        let n = self.points.len();
        if n < 2 {
            return n;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for i in 0..n {
            let near = self.tree.within(&self.points[i], gap * gap, &squared_euclidean).unwrap_or_default();
            for (_, &j) in near {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        (0..n).filter(|&i| root(&mut parent, i) == i).count()
    }

    /// Distance from `c` to the cloud, refined by a hyperplane fit through the
    /// nearest points when the fit is flat and the foot lands inside the patch.
    pub fn distance(&self, c: &[f64]) -> f64 {
        let near = match self.tree.nearest(c, NEIGHBOURS, &squared_euclidean) {
            Ok(v) if !v.is_empty() => v,
            _ => return f64::INFINITY,
        };
        let nn = near[0].0.sqrt();
        if near.len() < NEIGHBOURS {
            return nn;
        }
        let dim = c.len();
        let pts: Vec<Vector> = near.iter().map(|(_, &i)| Vector::from_column_slice(&self.points[i])).collect();
        let centroid = pts.iter().fold(Vector::zeros(dim), |acc, p| acc + p) / pts.len() as f64;
        let mut cov = Matrix::zeros(dim, dim);
        for p in &pts {
            let y = p - &centroid;
            cov += &y * y.transpose();
        }
        let (vals, vecs) = linalg::sorted_eigen(&cov);
        if vals[dim - 1] > 1e-4 * vals[dim - 2] {
            return nn;
        }
        let normal = vecs[dim - 1].clone();
        let y = Vector::from_column_slice(c) - &centroid;
        let along = y.dot(&normal);
        let tangential = (&y - &normal * along).norm();
        let patch = pts.iter().map(|p| (p - &centroid).norm()).fold(0.0, f64::max);
        if tangential > patch {
            return nn;
        }
        along.abs().min(nn)
    }
}

/// Result of [`singularity_tube_measure`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularTubeReport {
    #[serde(flatten)]
    pub scaling: ScalingReport,
    pub k: usize,
    pub cloud_size: usize,
    pub cloud_spacing: f64,
    pub components: usize,
}

/// `mu_1`-weight of a chart point relative to the uniform proposal on the box.
fn mu1_weight(chart: &PhaseChart, x: &PhasePoint, n: &Vector, w: &[f64]) -> f64 {
    let cos = x.v.dot(n);
    if cos <= 0.0 {
        return 0.0;
    }
    let d = x.q.len() as i32;
    let w2: f64 = w.iter().map(|a| a * a).sum();
    cos / n.dot(&chart.n0).abs() * (1.0 + w2).powf(-0.5 * d as f64)
}

fn propose(cfg: &BilliardConfig, chart: &PhaseChart, window: &PhaseWindow, r: &mut rng::Rng) -> Option<(PhasePoint, f64)> {
    let m = window.half_widths.len() / 2;
    let coords: Vec<f64> = window.half_widths.iter().map(|h| rng::uniform(r, -h, *h)).collect();
    let x = chart.point(cfg, &coords).ok()?;
    let n = cfg.gradient_direction(&x.instance, &x.q).ok()?;
    let weight = mu1_weight(chart, &x, &n, &coords[m..]);
    Some((x, weight))
}

const MAX_PROPOSALS: usize = 100_000;

/// Samples `n_samples` window points from `mu_1` by rejection, measures their
/// line-chart distance to `T^{-k} S` and fits the tube-fraction exponent.
pub fn singularity_tube_measure(
    cfg: &BilliardConfig,
    k: usize,
    window: &PhaseWindow,
    deltas: &[f64],
    n_samples: usize,
    cloud_attempts: usize,
    seed: u64,
) -> Result<SingularTubeReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidInput("deltas must be positive".into()));
    }
    let cloud = singularity_cloud(cfg, window, k, cloud_attempts, rng::mix(seed, 0xC10D))?;
    let delta_min = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    if !cloud.is_empty() && cloud.spacing > 0.5 * delta_min {
        return Err(Error::ResolutionTooCoarse {
            spacing: cloud.spacing,
            required: 0.5 * delta_min,
        });
    }
    let chart = PhaseChart::at(cfg, &window.base)?;
    let lchart = LineChart::at(&phase_to_line(&window.base));

    let pilot_seed = rng::mix(seed, 0x9170);
    let bound = (0..2048u64)
        .into_par_iter()
        .filter_map(|i| propose(cfg, &chart, window, &mut rng::stream(pilot_seed, i)).map(|(_, w)| w))
        .reduce(|| 0.0, f64::max);
    if bound <= 0.0 {
        return Err(Error::InvalidInput("window contains no outgoing collision states".into()));
    }
    let bound = 1.1 * bound;

    let dist: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            for _ in 0..MAX_PROPOSALS {
                if let Some((x, w)) = propose(cfg, &chart, window, &mut r) {
                    if rng::uniform(&mut r, 0.0, bound) < w {
                        return Ok(cloud.distance(&lchart.coords(&phase_to_line(&x))));
                    }
                }
            }
            Err(Error::InvalidInput("rejection sampler exhausted".into()))
        })
        .collect::<Result<_>>()?;

    let est = count_tubes(&dist, deltas, n_samples, seed);
    let scaling = ScalingReport::fit(
        deltas.to_vec(),
        est.iter().map(|e| e.volume_fraction).collect(),
        est.iter().map(|e| e.confidence_halfwidth).collect(),
        n_samples,
        seed,
    );
    Ok(SingularTubeReport {
        scaling,
        k,
        cloud_size: cloud.len(),
        cloud_spacing: cloud.spacing,
        components: cloud.components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Scatterer;
    use crate::linalg::vector;

    fn single() -> BilliardConfig {
        BilliardConfig::new(2, vec![Scatterer::sphere(0, &[0.5, 0.5], 0.2)], 2.0, 0.1).unwrap()
    }

    #[test]
    fn cloud_distance_on_a_line() {
        let pts: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 * 1e-3, 0.0]).collect();
        let cloud = SingularCloud::new(0, pts, 200);
        assert_eq!(cloud.components, 1);
        assert!((cloud.spacing - 1e-3).abs() < 1e-12);
        assert!((cloud.distance(&[0.1003, 2e-4]) - 2e-4).abs() < 1e-12);
        assert!((cloud.distance(&[0.5, 0.0]) - (0.5 - 0.199)).abs() < 1e-12);
    }

    #[test]
    fn components_separate() {
        let mut pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 1e-3, 0.0]).collect();
        pts.extend((0..50).map(|i| vec![i as f64 * 1e-3, 1.0]));
        assert_eq!(SingularCloud::new(1, pts, 100).components, 2);
    }

    #[test]
    fn empty_cloud_gives_degenerate_report() {
        let cfg = single();
        let inst = ScattererInstance::origin(0, 2);
        let q = vector(&[0.7, 0.5]);
        let base = PhasePoint::new(inst, q, vector(&[1.0, 0.0]));
        let window = PhaseWindow {
            base,
            half_widths: vec![0.02, 0.05],
        };
        let deltas = crate::stats::log_grid(1e-3, 1e-2, 5);
        let rep = singularity_tube_measure(&cfg, 0, &window, &deltas, 500, 500, 4).unwrap();
        assert_eq!(rep.cloud_size, 0);
        assert!(rep.scaling.degenerate);
        assert!(rep.scaling.estimates.iter().all(|e| *e == 0.0));
    }
}
