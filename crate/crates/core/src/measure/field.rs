//! Scalar test fields and distance to their zero sets.

use kdtree::distance::squared_euclidean;
use kdtree::KdTree;
use serde::{Deserialize, Serialize};

use crate::geometry::lattice_box;
use crate::singularity::{jet_nonvanishing_order, JetOrder};

/// A smooth scalar field on `R^d`.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Central-difference gradient unless overridden.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (self.value(&a) - self.value(&b)) / (2.0 * h)
            })
            .collect()
    }
}

/// The fields used to check the tube-volume law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum TestField {
    /// `x_1`
    Hyperplane { dimension: usize },
    /// `|x|^2 - 0.25`
    Circle { dimension: usize },
    /// `x_1^2 - x_2^2`
    Crossing { dimension: usize },
    /// `x_1^2 + 1`
    NoZero { dimension: usize },
}

impl ScalarField for TestField {
    fn dim(&self) -> usize {
        match *self {
            TestField::Hyperplane { dimension }
            | TestField::Circle { dimension }
            | TestField::Crossing { dimension }
            | TestField::NoZero { dimension } => dimension,
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            TestField::Hyperplane { .. } => x[0],
            TestField::Circle { .. } => x.iter().map(|a| a * a).sum::<f64>() - 0.25,
            TestField::Crossing { .. } => x[0] * x[0] - x[1] * x[1],
            TestField::NoZero { .. } => x[0] * x[0] + 1.0,
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        match self {
            TestField::Hyperplane { .. } => g[0] = 1.0,
            TestField::Circle { .. } => g.iter_mut().zip(x).for_each(|(gi, xi)| *gi = 2.0 * xi),
            TestField::Crossing { .. } => {
                g[0] = 2.0 * x[0];
                g[1] = -2.0 * x[1];
            }
            TestField::NoZero { .. } => g[0] = 2.0 * x[0],
        }
        g
    }
}

/// A field restricted to `B(center, radius)` with its jet bounds.
pub struct ScalarFieldSpec<F: ScalarField> {
    pub field: F,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Samples are drawn from `B(center, c1 * radius)`.
    pub c1: f64,
    /// Smoothness order: one more than the first non-vanishing jet order at the center.
    pub m: usize,
    /// Largest `|d^alpha F(center)|` with `|alpha| = m - 1`.
    pub c0: f64,
    /// Largest sampled `|F|` over the ball.
    pub big_c0: f64,
    /// Largest sampled `|grad F|` over the ball.
    pub big_c1: f64,
}

impl<F: ScalarField> ScalarFieldSpec<F> {
    pub fn new(field: F) -> Self {
        let d = field.dim();
        let center = vec![0.0; d];
        let f = |x: &[f64]| field.value(x);
        let order = match jet_nonvanishing_order(f, &center, 4, 1e-8) {
            Ok(JetOrder::Order(k)) => k,
            _ => 4,
        };
        let c0 = jet_max(&field, &center, order);
        let (mut big_c0, mut big_c1) = (0.0f64, 0.0f64);
        let per_axis = if d <= 2 { 41 } else { 11 };
        for idx in lattice_box(&vec![(0, per_axis - 1); d]) {
            let x: Vec<f64> = idx.iter().map(|&i| -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64).collect();
            if x.iter().map(|a| a * a).sum::<f64>() > 1.0 {
                continue;
            }
            big_c0 = big_c0.max(field.value(&x).abs());
            big_c1 = big_c1.max(field.gradient(&x).iter().map(|g| g * g).sum::<f64>().sqrt());
        }
        ScalarFieldSpec {
            field,
            center,
            radius: 1.0,
            c1: 0.5,
            m: order + 1,
            c0,
            big_c0,
            big_c1,
        }
    }

    pub fn sample_radius(&self) -> f64 {
        self.c1 * self.radius
    }
}

fn jet_max<F: ScalarField>(field: &F, x0: &[f64], order: usize) -> f64 {
    match order {
        0 => field.value(x0).abs(),
        1 => field.gradient(x0).iter().fold(0.0, |m, g| m.max(g.abs())),
        _ => {
            // central second differences bound higher orders well enough for a report
            let h = 1e-3;
            let d = x0.len();
            let mut best = 0.0f64;
            for i in 0..d {
                let mut a = x0.to_vec();
                let mut b = x0.to_vec();
                a[i] += h;
                b[i] -= h;
                best = best.max(((field.value(&a) - 2.0 * field.value(x0) + field.value(&b)) / (h * h)).abs());
            }
            best
        }
    }
}

/// Damped Newton projection `x - F grad F / |grad F|^2` onto `{F = 0}`.
pub fn newton_project<F: ScalarField>(field: &F, x: &[f64], max_iter: usize) -> Option<Vec<f64>> {
    let mut y = x.to_vec();
    let mut fy = field.value(&y);
    for _ in 0..max_iter {
        if fy.abs() < 1e-12 {
            return Some(y);
        }
        let g = field.gradient(&y);
        let g2: f64 = g.iter().map(|a| a * a).sum();
        if g2 < 1e-300 {
            return None;
        }
        let mut lambda = 1.0;
        loop {
            let cand: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - lambda * fy * gi / g2).collect();
            let fc = field.value(&cand);
            if fc.abs() < fy.abs() || lambda < 1e-6 {
                y = cand;
                fy = fc;
                break;
            }
            lambda *= 0.5;
        }
    }
    (fy.abs() < 1e-12).then_some(y)
}

/// Zero-set points from Newton projections of grid nodes near `{F = 0}`,
/// indexed for nearest-neighbour queries.
pub struct ZeroCloud {
    tree: KdTree<f64, usize, Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    pub spacing: f64,
}

impl ZeroCloud {
    pub fn build<F: ScalarField>(spec: &ScalarFieldSpec<F>, per_axis: usize) -> Self {
        let d = spec.field.dim();
        let r = spec.radius;
        let spacing = 2.0 * r / (per_axis - 1) as f64;
        let mut points = Vec::new();
        for idx in lattice_box(&vec![(0, per_axis as i64 - 1); d]) {
            let x: Vec<f64> = idx
                .iter()
                .zip(&spec.center)
                .map(|(&i, c)| c - r + spacing * i as f64)
                .collect();
            if dist2(&x, &spec.center) > r * r {
                continue;
            }
            let g: f64 = spec.field.gradient(&x).iter().map(|a| a * a).sum::<f64>().sqrt();
            if spec.field.value(&x).abs() > 2.0 * spacing * g {
                continue;
            }
            if let Some(y) = newton_project(&spec.field, &x, 60) {
                if dist2(&y, &spec.center) <= r * r {
                    points.push(y);
                }
            }
        }
        let mut tree = KdTree::new(d);
        for (i, p) in points.iter().enumerate() {
            tree.add(p.clone(), i).expect("finite cloud point");
        }
        ZeroCloud { tree, points, spacing }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, x: &[f64]) -> Option<f64> {
        self.tree
            .nearest(x, 1, &squared_euclidean)
            .ok()
            .and_then(|v| v.first().map(|(d2, _)| d2.sqrt()))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance from `x` to `{F = 0}` within the field's ball: the smaller of the
/// Newton-projection displacement and the nearest cloud point. Infinite when
/// neither finds a zero.
pub fn zero_set_distance<F: ScalarField>(spec: &ScalarFieldSpec<F>, cloud: &ZeroCloud, x: &[f64]) -> f64 {
    let r2 = spec.radius * spec.radius;
    let newton = newton_project(&spec.field, x, 60)
        .filter(|y| dist2(y, &spec.center) <= r2)
        .map(|y| dist2(&y, x).sqrt())
        .unwrap_or(f64::INFINITY);
    let nn = cloud.nearest(x).unwrap_or(f64::INFINITY);
    newton.min(nn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let spec = ScalarFieldSpec::new(TestField::Hyperplane { dimension: 2 });
        let cloud = ZeroCloud::build(&spec, 101);
        assert!((zero_set_distance(&spec, &cloud, &[0.3, 0.7 * 0.5]) - 0.3).abs() < 1e-12);

        let spec = ScalarFieldSpec::new(TestField::Circle { dimension: 2 });
        let cloud = ZeroCloud::build(&spec, 101);
        assert!((zero_set_distance(&spec, &cloud, &[0.0, 0.0]) - 0.5).abs() < 1e-3);

        let spec = ScalarFieldSpec::new(TestField::NoZero { dimension: 2 });
        let cloud = ZeroCloud::build(&spec, 41);
        assert!(cloud.is_empty());
        assert_eq!(zero_set_distance(&spec, &cloud, &[0.1, 0.2]), f64::INFINITY);
    }

    #[test]
    fn cloud_points_have_zero_distance() {
        let spec = ScalarFieldSpec::new(TestField::Crossing { dimension: 2 });
        let cloud = ZeroCloud::build(&spec, 81);
        for p in cloud.points.iter().step_by(17) {
            assert!(zero_set_distance(&spec, &cloud, p) < 1e-10);
        }
    }

    #[test]
    fn jet_bounds() {
        let spec = ScalarFieldSpec::new(TestField::Hyperplane { dimension: 2 });
        assert_eq!(spec.m, 2);
        assert!((spec.c0 - 1.0).abs() < 1e-9);
        let spec = ScalarFieldSpec::new(TestField::Crossing { dimension: 2 });
        assert_eq!(spec.m, 3);
        assert!((spec.c0 - 2.0).abs() < 1e-6);
    }
}
