//! Samples of `T^{-k} S` obtained by running tangent states backwards.

use rayon::prelude::*;

use crate::billiard::{billiard_map_n, inverse_step, PhasePoint, Termination};
use crate::geometry::BilliardConfig;

/// Forward-check threshold on `|cos phi|` at the re-landing event.
pub const RELAND_COS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct PullbackSamples {
    pub k: usize,
    pub points: Vec<PhasePoint>,
    /// Index of the dropped input and the reason.
    pub dropped: Vec<(usize, String)>,
}

/// Applies `T^{-1}` `k` times to grazing states `(q*, v)`. Samples whose
/// backward orbit meets another tangency, leaves the horizon, or fails the
/// forward re-landing check are dropped with a reason.
pub fn pullback_singularity(cfg: &BilliardConfig, tangent: &[PhasePoint], k: usize) -> PullbackSamples {
    let results: Vec<Result<PhasePoint, String>> = tangent.par_iter().map(|x| pull_one(cfg, x, k)).collect();
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => points.push(p),
            Err(reason) => dropped.push((i, reason)),
        }
    }
    PullbackSamples { k, points, dropped }
}

pub(crate) fn pull_one(cfg: &BilliardConfig, x: &PhasePoint, k: usize) -> Result<PhasePoint, String> {
    let mut y = x.clone();
    for step in 0..k {
        let (prev, e) = inverse_step(cfg, &y).map_err(|e| format!("backward step {step}: {e}"))?;
        if e.tangency {
            return Err(format!("backward step {step}: further tangency"));
        }
        y = prev;
    }
    if k == 0 {
        return Ok(y);
    }
    let rec = billiard_map_n(cfg, &y, k, false).map_err(|e| format!("forward check: {e}"))?;
    if rec.termination != Termination::Completed {
        return Err("forward check: trajectory ended early".into());
    }
    let last = rec.events.last().expect("k > 0 events");
    if last.instance != x.instance || last.cos_phi.abs() >= RELAND_COS {
        return Err(format!("forward check: re-landed with cos {:e}", last.cos_phi));
    }
    if rec.events[..k - 1].iter().any(|e| e.tangency) {
        return Err("forward check: intermediate tangency".into());
    }
    Ok(y)
}
