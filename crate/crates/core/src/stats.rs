//! Log-log scaling fits.

use serde::{Deserialize, Serialize};

/// Weighted least-squares line `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> LineFit {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        sxx += wi * (xi - mx) * (xi - mx);
        sxy += wi * (xi - mx) * (yi - my);
        syy += wi * (yi - my) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((xi, yi), wi)| wi * (yi - slope * xi - intercept).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let dof = (x.len() as f64 - 2.0).max(1.0);
    LineFit {
        slope,
        intercept,
        r2,
        slope_se: (sse / dof / sxx).sqrt(),
    }
}

/// Fitted power law over a scale grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub deltas: Vec<f64>,
    #[serde(rename = "fractions")]
    pub estimates: Vec<f64>,
    pub ci: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// All estimates vanished; no fit was attempted.
    #[serde(default)]
    pub degenerate: bool,
}

impl ScalingReport {
    /// Fits `log estimate` against `log delta`. Weights are inverse variances of
    /// the log estimates when `ci` halfwidths are positive, uniform otherwise.
    pub fn fit(deltas: Vec<f64>, estimates: Vec<f64>, ci: Vec<f64>, n_samples: usize, seed: u64) -> Self {
        if estimates.iter().all(|e| *e == 0.0) {
            return ScalingReport {
                deltas,
                estimates,
                ci,
                slope: 0.0,
                intercept: f64::NEG_INFINITY,
                r2: 0.0,
                n_samples,
                seed,
                degenerate: true,
            };
        }
        let x: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
        let y: Vec<f64> = estimates.iter().map(|e| e.ln()).collect();
        let w: Vec<f64> = if ci.iter().all(|c| *c > 0.0) {
            ci.iter()
                .zip(&estimates)
                .map(|(c, e)| {
                    let sd = c / 1.96 / e;
                    1.0 / (sd * sd)
                })
                .collect()
        } else {
            vec![1.0; x.len()]
        };
        let f = linear_fit(&x, &y, &w);
        ScalingReport {
            deltas,
            estimates,
            ci,
            slope: f.slope,
            intercept: f.intercept,
            r2: f.r2,
            n_samples,
            seed,
            degenerate: false,
        }
    }

    pub fn slope_within(&self, lo: f64, hi: f64) -> bool {
        !self.degenerate && self.slope >= lo && self.slope <= hi
    }
}

/// `n` points log-spaced from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let d = log_grid(1e-3, 1e-1, 7);
        let e: Vec<f64> = d.iter().map(|x| 3.0 * x.powf(1.5)).collect();
        let r = ScalingReport::fit(d, e, vec![0.0; 7], 10, 1);
        assert!((r.slope - 1.5).abs() < 1e-12);
        assert!((r.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((r.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let r = ScalingReport::fit(vec![0.1, 0.2], vec![0.0, 0.0], vec![0.0, 0.0], 10, 1);
        assert!(r.degenerate);
        assert!(!r.slope_within(-1.0, 1.0));
    }

    #[test]
    fn grid_endpoints() {
        let g = log_grid(1e-7, 1e-3, 9);
        assert!((g[0] - 1e-7).abs() < 1e-20 && (g[8] - 1e-3).abs() < 1e-16);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
