//! Even/odd splitting `F(upsilon) = G+(upsilon^2) + upsilon G-(upsilon^2)` and
//! the resolved level set `G+^2 = x G-^2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `G+` and `G-` tabulated on `tau = upsilon^2`, including the `tau = 0` node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionTable {
    pub tau: Vec<f64>,
    #[serde(rename = "G_plus")]
    pub g_plus: Vec<f64>,
    #[serde(rename = "G_minus")]
    pub g_minus: Vec<f64>,
    /// Max of `|G+ + u G- - F(u)|` and `|G+ - u G- - F(-u)|` over the grid.
    pub reconstruction_residual: f64,
}

/// Splits `f` into even and odd parts on `upsilon_grid` (positive, ascending).
/// `G-(0)` is extrapolated quadratically in `tau` from the three smallest nodes.
pub fn even_odd_decompose<F>(f: F, upsilon_grid: &[f64]) -> Result<ResolutionTable>
where
    F: Fn(f64) -> Result<f64>,
{
    if upsilon_grid.len() < 3 || upsilon_grid.windows(2).any(|w| !(w[0] < w[1])) || !(upsilon_grid[0] > 0.0) {
        return Err(Error::InvalidInput("upsilon grid must be positive, ascending, >= 3 nodes".into()));
    }
    let f0 = f(0.0)?;
    let mut tau = vec![0.0];
    let mut g_plus = vec![f0];
    let mut g_minus = vec![0.0];
    let mut residual = 0.0f64;
    for &u in upsilon_grid {
        let fp = f(u)?;
        let fm = f(-u).map_err(|_| Error::ContinuationUnavailable { upsilon: -u })?;
        let gp = 0.5 * (fp + fm);
        let gm = (fp - fm) / (2.0 * u);
        residual = residual.max((gp + u * gm - fp).abs()).max((gp - u * gm - fm).abs());
        tau.push(u * u);
        g_plus.push(gp);
        g_minus.push(gm);
    }
    g_minus[0] = lagrange(&tau[1..4], &g_minus[1..4], 0.0);
    Ok(ResolutionTable {
        tau,
        g_plus,
        g_minus,
        reconstruction_residual: residual,
    })
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..xs.len() {
        let mut w = 1.0;
        for j in 0..xs.len() {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        sum += w * ys[i];
    }
    sum
}

impl ResolutionTable {
    /// Cubic interpolation of `(G+, G-)` at `tau`.
    pub fn eval(&self, tau: f64) -> (f64, f64) {
        let n = self.tau.len();
        let idx = self.tau.partition_point(|t| *t < tau);
        let lo = idx.saturating_sub(2).min(n.saturating_sub(4));
        let hi = (lo + 4).min(n);
        let xs = &self.tau[lo..hi];
        (lagrange(xs, &self.g_plus[lo..hi], tau), lagrange(xs, &self.g_minus[lo..hi], tau))
    }
}

/// Agreement between `F(sqrt x) F(-sqrt x)` and `G+^2 - x G-^2` at probe values `x >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelCheck {
    pub max_residual: f64,
    /// Probes where one side is clearly positive and the other clearly negative.
    pub sign_mismatches: usize,
    pub probes: usize,
}

pub fn resolved_level_check<F>(f: F, table: &ResolutionTable, probes: &[f64]) -> Result<LevelCheck>
where
    F: Fn(f64) -> Result<f64>,
{
    let tol = 1e-8;
    let mut max_residual = 0.0f64;
    let mut sign_mismatches = 0;
    for &x in probes {
        let u = x.max(0.0).sqrt();
        let direct = f(u)? * f(-u)?;
        let (gp, gm) = table.eval(x);
        let resolved = gp * gp - x * gm * gm;
        max_residual = max_residual.max((direct - resolved).abs());
        if (direct > tol && resolved < -tol) || (direct < -tol && resolved > tol) {
            sign_mismatches += 1;
        }
    }
    Ok(LevelCheck {
        max_residual,
        sign_mismatches,
        probes: probes.len(),
    })
}

/// Result of [`jet_nonvanishing_order`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum JetOrder {
    Order(usize),
    ExceedsCap,
}

/// Highest order the finite-difference jet probe can certify.
pub const JET_ORDER_CAP: usize = 4;

const STENCILS: [&[f64]; 5] = [
    &[1.0],
    &[-0.5, 0.0, 0.5],
    &[1.0, -2.0, 1.0],
    &[-0.5, 1.0, 0.0, -1.0, 0.5],
    &[1.0, -4.0, 6.0, -4.0, 1.0],
];

/// Smallest `m` with some `|d^alpha f(x0)| > tol`, `|alpha| = m <= max_order`.
pub fn jet_nonvanishing_order<F>(f: F, x0: &[f64], max_order: usize, tol: f64) -> Result<JetOrder>
where
    F: Fn(&[f64]) -> f64,
{
    if max_order > JET_ORDER_CAP {
        return Err(Error::UnsupportedOrder {
            requested: max_order,
            max: JET_ORDER_CAP,
        });
    }
    let d = x0.len();
    for m in 0..=max_order {
        for alpha in multi_indices(d, m) {
            let at = |h: f64| partial(&f, x0, &alpha, h);
            let h = 1e-2;
            let value = (4.0 * at(h / 2.0) - at(h)) / 3.0;
            if value.abs() > tol {
                return Ok(JetOrder::Order(m));
            }
        }
    }
    Ok(JetOrder::ExceedsCap)
}

fn partial<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], alpha: &[usize], h: f64) -> f64 {
    // tensor product of one-dimensional central stencils
    let axes: Vec<(usize, &[f64])> = alpha.iter().enumerate().filter(|(_, a)| **a > 0).map(|(i, a)| (i, STENCILS[*a])).collect();
    let order: usize = alpha.iter().sum();
    let mut total = 0.0;
    let mut idx = vec![0usize; axes.len()];
    loop {
        let mut x = x0.to_vec();
        let mut w = 1.0;
        for (k, (axis, st)) in axes.iter().enumerate() {
            let half = (st.len() / 2) as f64;
            x[*axis] += (idx[k] as f64 - half) * h;
            w *= st[idx[k]];
        }
        if w != 0.0 {
            total += w * f(&x);
        }
        let mut k = 0;
        loop {
            if k == axes.len() {
                return total / h.powi(order as i32);
            }
            idx[k] += 1;
            if idx[k] < axes[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn multi_indices(d: usize, m: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in (0..=m).rev() {
        for mut rest in multi_indices(d - 1, m - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (1..=50).map(|i| i as f64 * 2e-3).collect()
    }

    #[test]
    fn decompose_polynomials() {
        let t = even_odd_decompose(Ok, &grid()).unwrap();
        assert!(t.g_plus.iter().all(|g| g.abs() < 1e-15));
        assert!(t.g_minus.iter().all(|g| (g - 1.0).abs() < 1e-12));

        let t = even_odd_decompose(|u| Ok(u * u), &grid()).unwrap();
        for (tau, gp) in t.tau.iter().zip(&t.g_plus) {
            assert!((gp - tau).abs() < 1e-15);
        }
        assert!(t.g_minus.iter().all(|g| g.abs() < 1e-12));

        let (a, b, c) = (0.3, -1.2, 2.5);
        let t = even_odd_decompose(|u| Ok(a + b * u + c * u * u), &grid()).unwrap();
        for ((tau, gp), gm) in t.tau.iter().zip(&t.g_plus).zip(&t.g_minus) {
            assert!((gp - (a + c * tau)).abs() < 1e-14);
            assert!((gm - b).abs() < 1e-11);
        }
        assert!(t.reconstruction_residual < 1e-12);
    }

    #[test]
    fn failing_negative_side_is_reported() {
        let err = even_odd_decompose(|u| if u < 0.0 { Err(Error::NoMinimum) } else { Ok(u) }, &grid()).unwrap_err();
        assert!(matches!(err, Error::ContinuationUnavailable { .. }));
    }

    #[test]
    fn level_sets_agree() {
        let c = 0.05;
        let f = |u: f64| Ok(u - c);
        let t = even_odd_decompose(f, &grid()).unwrap();
        let (gp, gm) = t.eval(c * c);
        assert!((gp * gp - c * c * gm * gm).abs() < 1e-12);
        let probes: Vec<f64> = (0..100).map(|i| i as f64 * 1e-4).collect();
        assert!(resolved_level_check(f, &t, &probes).unwrap().max_residual < 1e-8);

        let f = |u: f64| Ok(u * u - 0.004);
        let t = even_odd_decompose(f, &grid()).unwrap();
        let (gp, _) = t.eval(0.004);
        assert!(gp.abs() < 1e-12);
        assert_eq!(resolved_level_check(f, &t, &probes).unwrap().sign_mismatches, 0);
    }

    #[test]
    fn jet_orders() {
        assert_eq!(jet_nonvanishing_order(|x| x[0], &[0.0, 0.0], 4, 1e-6).unwrap(), JetOrder::Order(1));
        assert_eq!(jet_nonvanishing_order(|x| x[0] * x[0], &[0.0, 0.0], 4, 1e-6).unwrap(), JetOrder::Order(2));
        assert_eq!(jet_nonvanishing_order(|x| x[0].powi(6), &[0.0, 0.0], 4, 1e-6).unwrap(), JetOrder::ExceedsCap);
        assert_eq!(jet_nonvanishing_order(|x| x[0] * x[1] * x[1], &[0.0, 0.0], 4, 1e-6).unwrap(), JetOrder::Order(3));
        assert!(jet_nonvanishing_order(|x| x[0], &[0.0], 5, 1e-6).is_err());
    }
}
