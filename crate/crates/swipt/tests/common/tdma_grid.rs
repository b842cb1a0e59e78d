//! Brute-force single-user reference for the TDMA baseline, shared with the
//! workspace acceptance suite.

use swipt::metrics::{group_feasible, GroupView, Tolerances};
use swipt::SystemConfig;

const EXACT: Tolerances = Tolerances { rate: 0.0, harvest_rel: 0.0, harvest_abs: 0.0 };

/// For each split on a uniform grid, the smallest feasible power on a fine
/// geometric ladder, found by bisection on the ladder index. Feasibility is
/// judged by the metrics module alone.
pub fn grid_minimum(gain: f64, slot: f64, cfg: &SystemConfig) -> (f64, f64) {
    const SPLITS: usize = 4000;
    const RATIO: f64 = 1.0 + 1e-6;
    let lo = 1e-16_f64;
    let top = (1e4 / lo).ln() / RATIO.ln();
    let feasible = |p: f64, b: f64| {
        let view = GroupView { gains: &[gain], power: &[p], split: &[b], slot_time: slot };
        group_feasible(&view, cfg, &EXACT)
    };
    let mut best = (f64::INFINITY, 0.0);
    for k in 1..SPLITS {
        let b = k as f64 / SPLITS as f64;
        let (mut a, mut z) = (0u64, top.ceil() as u64);
        if !feasible(lo * RATIO.powf(z as f64), b) {
            continue;
        }
        while z - a > 1 {
            let mid = (a + z) / 2;
            if feasible(lo * RATIO.powf(mid as f64), b) {
                z = mid;
            } else {
                a = mid;
            }
        }
        let p = lo * RATIO.powf(z as f64);
        if p < best.0 {
            best = (p, b);
        }
    }
    best
}
