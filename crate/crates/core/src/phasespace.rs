//! Husimi Q function, photon-number distribution, Bloch vector and
//! phase-space mode detection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, C64};

/// Square sampling grid in the complex `α` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Points per axis.
    pub resolution: usize,
}

impl GridSpec {
    /// Symmetric grid `[−r, r]²`.
    pub fn symmetric(radius: f64, resolution: usize) -> Self {
        Self { x_range: (-radius, radius), y_range: (-radius, radius), resolution }
    }

    /// 101 × 101 points over `±1.5 √N_crit`.
    pub fn for_critical_photon_number(n_crit: f64) -> Self {
        Self::symmetric(1.5 * n_crit.sqrt(), 101)
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (range.0 + range.1)];
        }
        (0..n).map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_range, self.resolution)
    }

    pub fn ys(&self) -> Vec<f64> {
        Self::axis(self.y_range, self.resolution)
    }
}

/// Sampled Q function; `values[iy * resolution + ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    /// Set when part of the grid has `|α|² > 0.8 · cutoff`, where the
    /// truncated expansion is unreliable.
    pub truncated: bool,
}

impl QGrid {
    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.spec.resolution + ix]
    }

    pub fn cell_area(&self) -> f64 {
        let n = (self.spec.resolution.max(2) - 1) as f64;
        (self.spec.x_range.1 - self.spec.x_range.0) / n * (self.spec.y_range.1 - self.spec.y_range.0) / n
    }

    /// Riemann sum `Σ Q ΔxΔy`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }
}

/// `⟨n|α⟩` for `n < cutoff`, evaluated in log space.
fn coherent_overlaps(alpha: C64, cutoff: usize, ln_fact: &[f64]) -> Vec<C64> {
    let r2 = alpha.norm_sqr();
    if r2 == 0.0 {
        let mut v = vec![C64::new(0.0, 0.0); cutoff];
        v[0] = C64::new(1.0, 0.0);
        return v;
    }
    let ln_r = 0.5 * r2.ln();
    let theta = alpha.arg();
    (0..cutoff)
        .map(|n| {
            let mag = (-0.5 * r2 + n as f64 * ln_r - 0.5 * ln_fact[n]).exp();
            C64::from_polar(mag, n as f64 * theta)
        })
        .collect()
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    for k in 0..n {
        if k > 0 {
            acc += (k as f64).ln();
        }
        out.push(acc);
    }
    out
}

/// `Q(α) = ⟨α|ρ|α⟩/π` for a cavity density matrix in the Fock basis.
pub fn q_function(rho_cavity: &DensityMatrix, grid: &GridSpec) -> Result<QGrid> {
    if grid.resolution == 0 {
        return Err(Error::EmptyGrid);
    }
    let n = rho_cavity.dim();
    let ln_fact = ln_factorials(n);
    let xs = grid.xs();
    let ys = grid.ys();
    let rho = rho_cavity.as_slice();
    let values: Vec<f64> = ys
        .par_iter()
        .flat_map_iter(|&y| {
            let ln_fact = &ln_fact;
            xs.iter().map(move |&x| {
                let v = coherent_overlaps(C64::new(x, y), n, ln_fact);
                let mut q = C64::new(0.0, 0.0);
                for (i, vi) in v.iter().enumerate() {
                    let mut row = C64::new(0.0, 0.0);
                    for (j, vj) in v.iter().enumerate() {
                        row += rho[i * n + j] * vj;
                    }
                    q += vi.conj() * row;
                }
                (q.re / std::f64::consts::PI).max(0.0)
            })
        })
        .collect();
    let reach = |r: (f64, f64)| r.0.abs().max(r.1.abs());
    let r2_max = reach(grid.x_range).powi(2) + reach(grid.y_range).powi(2);
    Ok(QGrid { spec: *grid, values, truncated: r2_max > 0.8 * n as f64 })
}

/// `P_n = ⟨n|ρ|n⟩`
pub fn photon_distribution(rho_cavity: &DensityMatrix) -> Vec<f64> {
    rho_cavity.populations()
}

/// `(⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩)` of a qubit with `σ− = |0⟩⟨1|` and
/// `σ_z = |1⟩⟨1| − |0⟩⟨0|`.
pub fn bloch_vector(rho_qubit: &DensityMatrix) -> Result<[f64; 3]> {
    if rho_qubit.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: rho_qubit.dim() });
    }
    let s = rho_qubit.get(1, 0);
    Ok([2.0 * s.re, -2.0 * s.im, rho_qubit.get(1, 1).re - rho_qubit.get(0, 0).re])
}

/// A local maximum of the Q function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub x: f64,
    pub y: f64,
    pub height: f64,
    /// `|x + iy|²`
    pub photon_number: f64,
}

/// Local maxima sorted by height, highest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub peaks: Vec<Peak>,
    /// Two dominant peaks within the equal-height tolerance.
    pub equal_height: bool,
}

impl ModeSet {
    /// Relative height difference of the two highest peaks.
    pub fn height_asymmetry(&self) -> Option<f64> {
        match self.peaks.as_slice() {
            [a, b, ..] => Some((a.height - b.height) / a.height),
            _ => None,
        }
    }
}

/// Knobs for [`find_modes_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeOptions {
    /// Peaks below this fraction of the global maximum are ignored.
    pub floor: f64,
    /// Peaks within this many cells (Chebyshev distance) are merged.
    pub merge_radius: usize,
    /// Relative tolerance for the equal-height flag.
    pub equal_tolerance: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self { floor: 0.01, merge_radius: 1, equal_tolerance: 0.05 }
    }
}

pub fn find_modes(q: &QGrid) -> Result<ModeSet> {
    find_modes_with(q, &ModeOptions::default())
}

pub fn find_modes_with(q: &QGrid, opts: &ModeOptions) -> Result<ModeSet> {
    let n = q.resolution();
    if q.values.is_empty() || n == 0 {
        return Err(Error::EmptyGrid);
    }
    if n < 32 {
        return Err(Error::InvalidParameter { name: "resolution", reason: format!("mode search needs >= 32 points, got {n}") });
    }
    let global = q.values.iter().cloned().fold(0.0, f64::max);
    if global <= 0.0 {
        return Ok(ModeSet { peaks: Vec::new(), equal_height: false });
    }
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            let v = q.value(ix, iy);
            if v < opts.floor * global {
                continue;
            }
            let mut is_max = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                    if jx < 0 || jy < 0 || jx >= n as i64 || jy >= n as i64 {
                        continue;
                    }
                    if q.value(jx as usize, jy as usize) > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push((ix, iy, v));
            }
        }
    }
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut kept: Vec<(usize, usize, f64)> = Vec::new();
    for c in candidates {
        let near = kept.iter().any(|k| k.0.abs_diff(c.0).max(k.1.abs_diff(c.1)) <= opts.merge_radius);
        if !near {
            kept.push(c);
        }
    }
    let xs = q.spec.xs();
    let ys = q.spec.ys();
    let peaks: Vec<Peak> = kept
        .into_iter()
        .map(|(ix, iy, h)| Peak { x: xs[ix], y: ys[iy], height: h, photon_number: xs[ix].powi(2) + ys[iy].powi(2) })
        .collect();
    let equal_height = peaks.len() >= 2 && (peaks[0].height - peaks[1].height) / peaks[0].height <= opts.equal_tolerance;
    Ok(ModeSet { peaks, equal_height })
}
