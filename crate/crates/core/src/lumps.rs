//! Splitting a density into separated lumps along z.
//!
//! Weighted 1-D k-means with two centres on the z-marginal. The pair is
//! accepted when the centre separation is at least 4 lump widths (standard
//! deviations); at most 3 widths the density counts as one lump; anything in
//! between is reported as not yet separated.

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::grid::ScalarGridField;
use crate::num::Real;

pub const TWO_LUMP_RATIO: f64 = 4.0;
pub const ONE_LUMP_RATIO: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lump {
    pub centroid: f64,
    /// Standard deviation of the lump along z.
    pub width: f64,
    /// Share of the total weight.
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LumpSplit {
    /// Ordered by centroid, lowest first.
    pub lumps: Vec<Lump>,
    /// Separation over width of the two-centre fit.
    pub ratio: f64,
}

impl LumpSplit {
    /// Weight above and below `z0`, lumps assigned by their centroid.
    pub fn fractions_about(&self, z0: f64) -> (f64, f64) {
        let up = self
            .lumps
            .iter()
            .filter(|l| l.centroid > z0)
            .map(|l| l.fraction)
            .sum::<f64>();
        let down = self
            .lumps
            .iter()
            .filter(|l| l.centroid <= z0)
            .map(|l| l.fraction)
            .sum::<f64>();
        (up, down)
    }
}

fn stats(z: &[f64], w: &[f64], members: impl Iterator<Item = usize> + Clone) -> (f64, f64, f64) {
    let wt: f64 = members.clone().map(|i| w[i]).sum();
    if wt <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = members.clone().map(|i| w[i] * z[i]).sum::<f64>() / wt;
    let var = members.map(|i| w[i] * (z[i] - mean).powi(2)).sum::<f64>() / wt;
    (wt, mean, var.sqrt())
}

/// Splits weighted samples `(z, w)` into one or two lumps.
pub fn split_lumps(z: &[f64], w: &[f64]) -> Result<LumpSplit> {
    if z.len() != w.len() {
        return Err(SimError::InvalidParams(
            "sample and weight counts differ".into(),
        ));
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(SimError::InvalidParams("no weight to split".into()));
    }
    let wmax = w.iter().fold(0.0f64, |m, &v| m.max(v));
    let live: Vec<usize> = (0..z.len()).filter(|&i| w[i] > 1e-10 * wmax).collect();
    let lo = live.iter().map(|&i| z[i]).fold(f64::INFINITY, f64::min);
    let hi = live.iter().map(|&i| z[i]).fold(f64::NEG_INFINITY, f64::max);
    let single = |ratio: f64| {
        let (_, mean, sd) = stats(z, w, 0..z.len());
        LumpSplit {
            lumps: vec![Lump {
                centroid: mean,
                width: sd,
                fraction: 1.0,
            }],
            ratio,
        }
    };
    if hi <= lo {
        return Ok(single(0.0));
    }
    let mut c = [lo, hi];
    let mut assign = vec![0usize; z.len()];
    for _ in 0..200 {
        let mut changed = false;
        for (i, a) in assign.iter_mut().enumerate() {
            let na = usize::from((z[i] - c[1]).abs() < (z[i] - c[0]).abs());
            changed |= na != *a;
            *a = na;
        }
        for (k, ck) in c.iter_mut().enumerate() {
            let (wt, mean, _) = stats(z, w, (0..z.len()).filter(|&i| assign[i] == k));
            if wt > 0.0 {
                *ck = mean;
            }
        }
        if !changed {
            break;
        }
    }
    let parts = [0, 1].map(|k| stats(z, w, (0..z.len()).filter(|&i| assign[i] == k)));
    let width = parts[0].2.max(parts[1].2);
    let ratio = if width > 0.0 {
        (parts[1].1 - parts[0].1).abs() / width
    } else {
        f64::INFINITY
    };
    if ratio >= TWO_LUMP_RATIO {
        let mut lumps: Vec<Lump> = parts
            .iter()
            .map(|&(wt, mean, sd)| Lump {
                centroid: mean,
                width: sd,
                fraction: wt / total,
            })
            .collect();
        lumps.sort_by(|a, b| a.centroid.total_cmp(&b.centroid));
        Ok(LumpSplit { lumps, ratio })
    } else if ratio <= ONE_LUMP_RATIO {
        Ok(single(ratio))
    } else {
        Err(SimError::NotSeparated { ratio })
    }
}

/// Splits a (possibly signed) density using |ρ| marginalised onto z.
pub fn split_density<T: Real>(rho: &ScalarGridField<T>) -> Result<LumpSplit> {
    let abs = ScalarGridField {
        grid: rho.grid,
        values: rho.values.iter().map(|v| v.abs()).collect(),
    };
    let w: Vec<f64> = abs.z_marginal().iter().map(|v| v.to_f64_lossy()).collect();
    let z: Vec<f64> = rho
        .grid
        .axis_coords(2)
        .iter()
        .map(|v| v.to_f64_lossy())
        .collect();
    split_lumps(&z, &w)
}
