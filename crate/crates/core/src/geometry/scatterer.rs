use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// Highest derivative order the finite-difference jet supports.
pub const MAX_DERIVATIVE_ORDER: usize = 4;

/// Base quadric of a scatterer. `R < 0` inside the body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `R = |x - c|^2 - r^2`
    Sphere { radius: f64 },
    /// `R = sum (x_i - c_i)^2 / a_i^2 - 1`
    Ellipsoid { semi_axes: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScattererKind {
    Sphere,
    Ellipsoid,
    BumpPerturbed,
}

/// Compactly supported smooth bump `a exp(-1 / (1 - |x - c|^2 / rho^2))`.
///
/// The bump is subtracted from `R`, so a positive amplitude pushes the surface
/// outward (the body grows near `center`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    fn support_weight(&self, x: &Vector) -> Option<(f64, Vector)> {
        let y = Vector::from_iterator(
            x.len(),
            x.iter().zip(&self.center).map(|(xi, ci)| xi - ci),
        );
        let u = y.norm_squared() / (self.radius * self.radius);
        if u >= 1.0 {
            None
        } else {
            Some((u, y))
        }
    }

    /// Value, gradient and Hessian of the bump profile (without amplitude).
    fn jet(&self, x: &Vector) -> Option<(f64, Vector, Matrix)> {
        let (u, y) = self.support_weight(x)?;
        let rho2 = self.radius * self.radius;
        let w = 1.0 / (1.0 - u);
        let g = (-w).exp();
        let g1 = -g * w * w;
        let g2 = g * (w.powi(4) - 2.0 * w.powi(3));
        let du = &y * (2.0 / rho2);
        let grad = &du * g1;
        let mut hess = &du * du.transpose() * g2;
        for i in 0..x.len() {
            hess[(i, i)] += g1 * 2.0 / rho2;
        }
        Some((g, grad, hess))
    }

    fn value(&self, x: &Vector) -> Option<f64> {
        let (u, _) = self.support_weight(x)?;
        Some((-1.0 / (1.0 - u)).exp())
    }
}

/// Value and derivatives of `R` at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBundle {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Row-major `d x d`.
    pub hessian: Vec<f64>,
    pub higher: Vec<HigherDerivative>,
}

/// Fully symmetric derivative tensor of order 3 or 4, row-major `d^order`,
/// obtained by Richardson-extrapolated central differences of the Hessian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HigherDerivative {
    pub order: usize,
    pub values: Vec<f64>,
    pub error_estimate: f64,
}

impl DerivativeBundle {
    pub fn hessian_matrix(&self) -> Matrix {
        let d = self.gradient.len();
        Matrix::from_row_slice(d, d, &self.hessian)
    }
}

/// A strictly convex implicit scatterer `{R = 0}` in local (unshifted) coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub id: usize,
    pub center: Vec<f64>,
    pub shape: Shape,
    #[serde(default)]
    pub bumps: Vec<Bump>,
    #[serde(default = "default_derivative_order")]
    pub derivative_order: usize,
}

fn default_derivative_order() -> usize {
    MAX_DERIVATIVE_ORDER
}

impl Scatterer {
    pub fn sphere(id: usize, center: &[f64], radius: f64) -> Self {
        Scatterer {
            id,
            center: center.to_vec(),
            shape: Shape::Sphere { radius },
            bumps: Vec::new(),
            derivative_order: MAX_DERIVATIVE_ORDER,
        }
    }

    pub fn ellipsoid(id: usize, center: &[f64], semi_axes: &[f64]) -> Self {
        Scatterer {
            id,
            center: center.to_vec(),
            shape: Shape::Ellipsoid {
                semi_axes: semi_axes.to_vec(),
            },
            bumps: Vec::new(),
            derivative_order: MAX_DERIVATIVE_ORDER,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn kind(&self) -> ScattererKind {
        if self.active_bumps().next().is_some() {
            return ScattererKind::BumpPerturbed;
        }
        match self.shape {
            Shape::Sphere { .. } => ScattererKind::Sphere,
            Shape::Ellipsoid { .. } => ScattererKind::Ellipsoid,
        }
    }

    /// Radius of an unperturbed sphere.
    pub fn radius(&self) -> Option<f64> {
        match self.shape {
            Shape::Sphere { radius } if self.is_quadric() => Some(radius),
            _ => None,
        }
    }

    fn active_bumps(&self) -> impl Iterator<Item = &Bump> {
        self.bumps.iter().filter(|b| b.amplitude != 0.0)
    }

    /// True when `R` restricted to any line is an exact quadratic polynomial.
    pub fn is_quadric(&self) -> bool {
        self.active_bumps().next().is_none()
    }

    /// Structural checks on parameters (positivity, dimensions).
    pub fn check(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("scatterer {}: {msg}", self.id)));
        if self.center.len() != d {
            return bad(format!("center has dimension {}", self.center.len()));
        }
        if self.center.iter().any(|c| !c.is_finite()) {
            return bad("non-finite center".into());
        }
        match &self.shape {
            Shape::Sphere { radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return bad(format!("radius {radius} must be positive"));
                }
            }
            Shape::Ellipsoid { semi_axes } => {
                if semi_axes.len() != d || semi_axes.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                    return bad("semi-axes must be d positive reals".into());
                }
            }
        }
        for b in &self.bumps {
            if b.center.len() != d || !(b.radius > 0.0) || !b.amplitude.is_finite() {
                return bad("bump needs a d-dimensional center, radius > 0 and finite amplitude".into());
            }
        }
        if self.derivative_order < 2 || self.derivative_order > MAX_DERIVATIVE_ORDER {
            return bad(format!(
                "derivative_order {} outside [2, {MAX_DERIVATIVE_ORDER}]",
                self.derivative_order
            ));
        }
        Ok(())
    }

    /// Diagonal quadric weights `w_i` and offset `k` with `R_base = sum w_i y_i^2 - k`.
    fn quadric_weights(&self) -> (Vec<f64>, f64) {
        match &self.shape {
            Shape::Sphere { radius } => (vec![1.0; self.dim()], radius * radius),
            Shape::Ellipsoid { semi_axes } => {
                (semi_axes.iter().map(|a| 1.0 / (a * a)).collect(), 1.0)
            }
        }
    }

    /// Largest semi-axis of the base quadric.
    pub fn base_extent(&self) -> f64 {
        match &self.shape {
            Shape::Sphere { radius } => *radius,
            Shape::Ellipsoid { semi_axes } => semi_axes.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Smallest semi-axis of the base quadric.
    pub fn base_min_extent(&self) -> f64 {
        match &self.shape {
            Shape::Sphere { radius } => *radius,
            Shape::Ellipsoid { semi_axes } => {
                semi_axes.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Radius of a ball around the center that contains the whole body.
    pub fn extent(&self) -> f64 {
        let bump_mass: f64 = self
            .active_bumps()
            .map(|b| b.amplitude.max(0.0))
            .sum::<f64>()
            * (-1.0f64).exp();
        let a = self.base_extent();
        let r = match &self.shape {
            Shape::Sphere { radius } => (radius * radius + bump_mass).sqrt(),
            Shape::Ellipsoid { .. } => a * (1.0 + bump_mass).sqrt(),
        };
        r * (1.0 + 1e-9) + 1e-12
    }

    /// Smallest bump support radius, if any bump is present.
    pub fn min_bump_radius(&self) -> Option<f64> {
        self.active_bumps()
            .map(|b| b.radius)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.min(r))))
    }

    fn local(&self, x: &Vector) -> Vector {
        Vector::from_iterator(x.len(), x.iter().zip(&self.center).map(|(a, c)| a - c))
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let y = self.local(x);
        let (w, k) = self.quadric_weights();
        let mut r = y.iter().zip(&w).map(|(yi, wi)| wi * yi * yi).sum::<f64>() - k;
        for b in self.active_bumps() {
            if let Some(phi) = b.value(x) {
                r -= b.amplitude * phi;
            }
        }
        r
    }

    pub fn value_grad(&self, x: &Vector) -> (f64, Vector) {
        let (r, g, _) = self.jet2(x, false);
        (r, g)
    }

    pub fn value_grad_hess(&self, x: &Vector) -> (f64, Vector, Matrix) {
        self.jet2(x, true)
    }

    fn jet2(&self, x: &Vector, with_hessian: bool) -> (f64, Vector, Matrix) {
        let d = x.len();
        let y = self.local(x);
        let (w, k) = self.quadric_weights();
        let mut r = y.iter().zip(&w).map(|(yi, wi)| wi * yi * yi).sum::<f64>() - k;
        let mut g = Vector::from_iterator(d, y.iter().zip(&w).map(|(yi, wi)| 2.0 * wi * yi));
        let mut h = if with_hessian {
            Matrix::from_diagonal(&Vector::from_iterator(d, w.iter().map(|wi| 2.0 * wi)))
        } else {
            Matrix::zeros(0, 0)
        };
        for b in self.active_bumps() {
            if let Some((phi, bg, bh)) = b.jet(x) {
                r -= b.amplitude * phi;
                g -= bg * b.amplitude;
                if with_hessian {
                    h -= bh * b.amplitude;
                }
            }
        }
        (r, g, h)
    }

    /// `R` and its derivatives up to `order`. Orders 0..=2 are analytic; orders 3
    /// and 4 come from Richardson-extrapolated central differences of the Hessian.
    pub fn eval(&self, x: &Vector, order: usize) -> Result<DerivativeBundle> {
        if order > self.derivative_order || order > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder {
                requested: order,
                max: self.derivative_order.min(MAX_DERIVATIVE_ORDER),
            });
        }
        let d = x.len();
        let (value, g, h) = self.value_grad_hess(x);
        let mut higher = Vec::new();
        if order >= 3 {
            let scale = self.base_min_extent();
            for k in 3..=order {
                higher.push(self.fd_tensor(x, k, scale));
            }
        }
        Ok(DerivativeBundle {
            value,
            gradient: g.iter().copied().collect(),
            hessian: (0..d * d).map(|i| h[(i / d, i % d)]).collect(),
            higher,
        })
    }

    fn fd_tensor(&self, x: &Vector, order: usize, scale: f64) -> HigherDerivative {
        let h = f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * scale;
        let coarse = self.fd_tensor_raw(x, order, h);
        let fine = self.fd_tensor_raw(x, order, h / 2.0);
        let mut error = 0.0f64;
        let values: Vec<f64> = coarse
            .iter()
            .zip(&fine)
            .map(|(c, f)| {
                error = error.max((f - c).abs() / 3.0);
                (4.0 * f - c) / 3.0
            })
            .collect();
        HigherDerivative {
            order,
            values: symmetrize(&values, x.len(), order),
            error_estimate: error,
        }
    }

    fn fd_tensor_raw(&self, x: &Vector, order: usize, h: f64) -> Vec<f64> {
        let d = x.len();
        let hess_at = |offsets: &[(usize, f64)]| {
            let mut y = x.clone();
            for &(axis, s) in offsets {
                y[axis] += s;
            }
            self.value_grad_hess(&y).2
        };
        let mut out = vec![0.0; d.pow(order as u32)];
        match order {
            3 => {
                for k in 0..d {
                    let dh = (hess_at(&[(k, h)]) - hess_at(&[(k, -h)])) / (2.0 * h);
                    for i in 0..d {
                        for j in 0..d {
                            out[(i * d + j) * d + k] = dh[(i, j)];
                        }
                    }
                }
            }
            4 => {
                let h0 = hess_at(&[]);
                for k in 0..d {
                    for l in k..d {
                        let ddh = if k == l {
                            (hess_at(&[(k, h)]) - &h0 * 2.0 + hess_at(&[(k, -h)])) / (h * h)
                        } else {
                            (hess_at(&[(k, h), (l, h)]) - hess_at(&[(k, h), (l, -h)])
                                - hess_at(&[(k, -h), (l, h)])
                                + hess_at(&[(k, -h), (l, -h)]))
                                / (4.0 * h * h)
                        };
                        for i in 0..d {
                            for j in 0..d {
                                out[((i * d + j) * d + k) * d + l] = ddh[(i, j)];
                                out[((i * d + j) * d + l) * d + k] = ddh[(i, j)];
                            }
                        }
                    }
                }
            }
            _ => unreachable!("fd tensors exist for orders 3 and 4 only"),
        }
        out
    }

    /// Surface point on the ray `center + s u`, `s > 0`, for unit `u`.
    pub fn radial_surface_point(&self, u: &Vector) -> Vector {
        let c = Vector::from_column_slice(&self.center);
        let (w, k) = self.quadric_weights();
        let q: f64 = u.iter().zip(&w).map(|(ui, wi)| wi * ui * ui).sum();
        let s0 = (k / q).sqrt();
        if self.is_quadric() {
            return &c + u * s0;
        }
        let f = |s: f64| {
            let x = &c + u * s;
            let (r, g) = self.value_grad(&x);
            (r, g.dot(u))
        };
        let s = crate::roots::bracketed_newton(f, 0.0, self.extent() * 1.5, s0, 1e-15, 100)
            .unwrap_or(s0);
        &c + u * s
    }

    /// Coefficients `(a, b, c)` of `R(q + t v) = a t^2 + b t + c`; exact when
    /// [`Scatterer::is_quadric`].
    pub fn quadric_along_line(&self, q: &Vector, v: &Vector) -> (f64, f64, f64) {
        let (w, k) = self.quadric_weights();
        let mut a = 0.0;
        let mut b = 0.0;
        let mut c = -k;
        for i in 0..q.len() {
            let y = q[i] - self.center[i];
            a += w[i] * v[i] * v[i];
            b += 2.0 * w[i] * y * v[i];
            c += w[i] * y * y;
        }
        (a, b, c)
    }

    /// Adds a bump. No convexity check; see `genericity::bump_perturb`.
    pub fn with_bump(&self, bump: Bump) -> Scatterer {
        let mut s = self.clone();
        s.bumps.push(bump);
        s
    }
}

fn symmetrize(values: &[f64], d: usize, order: usize) -> Vec<f64> {
    let n = values.len();
    let decode = |mut idx: usize| {
        let mut ix = vec![0usize; order];
        for slot in ix.iter_mut().rev() {
            *slot = idx % d;
            idx /= d;
        }
        ix
    };
    let encode = |ix: &[usize]| ix.iter().fold(0usize, |acc, &i| acc * d + i);
    (0..n)
        .map(|idx| {
            let mut ix = decode(idx);
            ix.sort_unstable();
            let perms = permutations(&ix);
            perms.iter().map(|p| values[encode(p)]).sum::<f64>() / perms.len() as f64
        })
        .collect()
}

fn permutations(ix: &[usize]) -> Vec<Vec<usize>> {
    if ix.len() <= 1 {
        return vec![ix.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..ix.len() {
        let mut rest = ix.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}
