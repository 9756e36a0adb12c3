//! Binned evaluation of the estimator.
//!
//! Samples are grouped by phase bin b (centre φ_b, offset δ = Φ − φ_b) and by
//! cell of y = X/√η (centre y_j, offset ε = y − y_j). To second order in
//! (δ, ε) every sample's contribution is a combination of per-bin sums
//!
//! ```text
//! C0(ξ) = Σ e^{−iξy_j} (m00 − iξ m01 − ξ² m02 / 2)
//! C1(ξ) = Σ e^{−iξy_j} (m10 − iξ m11)
//! C2(ξ) = Σ e^{−iξy_j} m20
//! ```
//!
//! over the cell moments m_ab = Σ δ^a ε^b. With s = q cos φ_b + p sin φ_b and
//! s⊥ = −q sin φ_b + p cos φ_b the bin contributes
//!
//! ```text
//! A0(s) + s⊥ A1(s) − (s/2) A2(s) + (s⊥²/2) A3(s)
//! ```
//!
//! where the A tables are one-dimensional in s and are interpolated.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::exact::{evaluate_with, exact_grid};
use super::{DeconvolutionKernel, GridMeta, Method, ReconstructionParams, WignerGrid};
use crate::error::{Error, Result};
use crate::sampling::{QuadratureBatch, QuadratureSample};
use crate::states::PhasePoint;
use crate::summation::NeumaierSum;

/// Upper limit on phase bins × y cells held in memory.
const MAX_CELLS: usize = 1 << 26;

/// Largest expansion parameter x = ξ·|s′|·δ allowed by [`FastSettings::for_params`].
const PHASE_EXPANSION_LIMIT: f64 = 0.25;

/// Resolution of the binned path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastSettings {
    pub phi_bins: usize,
    /// Spacing of the interpolation tables in s.
    pub table_step: f64,
    /// Width of the y cells.
    pub y_bin_width: f64,
    /// Compare against direct summation on a subsample and fall back if off.
    pub self_check: bool,
    pub check_samples: usize,
    /// Allowed deviation relative to the largest grid value.
    pub check_tolerance: f64,
}

impl FastSettings {
    /// Defaults for truncation radius `r` and bandwidth `h`.
    ///
    /// The phase expansion is second order in the offset δ from the bin
    /// centre; its error is governed by x = ξ·|s′|·δ ≤ (r/h)·π/(2·bins), and
    /// the leading surviving term after averaging over a bin is ~x⁴/120.
    /// Bins are added beyond 512 until x ≤ 1/4.
    pub fn for_params(r: f64, h: f64) -> Self {
        let needed = (PI * r / (2.0 * PHASE_EXPANSION_LIMIT * h)).ceil();
        let phi_bins = if needed.is_finite() && needed > 512.0 {
            (needed as usize).div_ceil(64) * 64
        } else {
            512
        };
        Self {
            phi_bins,
            table_step: h / 16.0,
            y_bin_width: h / 20.0,
            self_check: true,
            check_samples: 2048,
            check_tolerance: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi_bins == 0 {
            return Err(Error::domain("need at least one phase bin"));
        }
        if !(self.table_step > 0.0) || !(self.y_bin_width > 0.0) {
            return Err(Error::domain("table step and y cell width must be positive"));
        }
        if !(self.check_tolerance >= 0.0) {
            return Err(Error::domain("self-check tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// Where each sample falls.
struct Binning {
    bins: usize,
    bin_width: f64,
    y_min: f64,
    dy: f64,
    cells: usize,
}

impl Binning {
    fn new(samples: &[QuadratureSample], inv_sqrt_eta: f64, s: &FastSettings) -> Result<Self> {
        let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            let y = x.x * inv_sqrt_eta;
            (lo.min(y), hi.max(y))
        });
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::domain("non-finite quadrature value in batch"));
        }
        let dy = s.y_bin_width;
        let cells = ((hi - lo) / dy).floor() as usize + 1;
        if cells.saturating_mul(s.phi_bins) > MAX_CELLS {
            return Err(Error::Range(format!(
                "quadrature values span [{lo}, {hi}], too wide for {} cells of width {dy}",
                MAX_CELLS / s.phi_bins
            )));
        }
        Ok(Self {
            bins: s.phi_bins,
            bin_width: PI / s.phi_bins as f64,
            y_min: lo,
            dy,
            cells,
        })
    }

    fn phi_centre(&self, b: usize) -> f64 {
        (b as f64 + 0.5) * self.bin_width
    }

    fn y_centre(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * self.dy
    }

    /// (bin, δ, cell, ε) of a sample.
    fn locate(&self, phi: f64, y: f64) -> (usize, f64, usize, f64) {
        let b = ((phi / self.bin_width).floor().max(0.0) as usize).min(self.bins - 1);
        let j = (((y - self.y_min) / self.dy).floor().max(0.0) as usize).min(self.cells - 1);
        (b, phi - self.phi_centre(b), j, y - self.y_centre(j))
    }
}

/// Per-cell moments [m00, m01, m02, m10, m11, m20] of every bin.
fn moments(samples: &[QuadratureSample], inv_sqrt_eta: f64, bin: &Binning) -> Vec<[f64; 6]> {
    let mut m = vec![[0.0; 6]; bin.bins * bin.cells];
    for s in samples {
        let (b, d, j, e) = bin.locate(s.phi, s.x * inv_sqrt_eta);
        let c = &mut m[b * bin.cells + j];
        c[0] += 1.0;
        c[1] += e;
        c[2] += e * e;
        c[3] += d;
        c[4] += d * e;
        c[5] += d * d;
    }
    m
}

struct TableGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl TableGrid {
    /// Cubic Lagrange stencil (first index, weights) at s.
    #[inline]
    fn stencil(&self, s: f64) -> (usize, [f64; 4]) {
        let u = (s - self.start) / self.step;
        let m = (u.floor() as usize).clamp(1, self.len - 3);
        let t = u - m as f64;
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        (m - 1, w)
    }
}

/// The four A tables of one bin, interleaved by s index.
fn bin_tables(
    kernel: &DeconvolutionKernel,
    cells: &[[f64; 6]],
    bin: &Binning,
    table: &TableGrid,
) -> Vec<[f64; 4]> {
    let mut out = vec![[0.0; 4]; table.len];
    let occupied: Vec<usize> = (0..cells.len()).filter(|&j| cells[j][0] > 0.0).collect();
    let (first, last) = match (occupied.first(), occupied.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return out,
    };
    // March e^{−iξy_j} cell by cell when the bin is dense, otherwise call sincos.
    let dense = occupied.len() * 8 >= last - first + 1;
    let zero = Complex64::new(0.0, 0.0);
    for (&xi, &w) in kernel.nodes().iter().zip(kernel.weights()) {
        let (mut c0, mut c1, mut c2) = (zero, zero, zero);
        let mut add = |z: Complex64, m: &[f64; 6]| {
            c0 += z * Complex64::new(m[0] - 0.5 * xi * xi * m[2], -xi * m[1]);
            c1 += z * Complex64::new(m[3], -xi * m[4]);
            c2 += z * m[5];
        };
        if dense {
            let mut z = Complex64::from_polar(1.0, -xi * bin.y_centre(first));
            let step = Complex64::from_polar(1.0, -xi * bin.dy);
            for m in &cells[first..=last] {
                if m[0] > 0.0 {
                    add(z, m);
                }
                z *= step;
            }
        } else {
            for &j in &occupied {
                add(Complex64::from_polar(1.0, -xi * bin.y_centre(j)), &cells[j]);
            }
        }
        let i = Complex64::i();
        let d = [w * c0, w * i * xi * c1, w * i * xi * c2, -w * xi * xi * c2];
        let mut z = Complex64::from_polar(1.0, xi * table.start);
        let step = Complex64::from_polar(1.0, xi * table.step);
        for a in out.iter_mut() {
            for (ak, dk) in a.iter_mut().zip(&d) {
                *ak += z.re * dk.re - z.im * dk.im;
            }
            z *= step;
        }
    }
    out
}

/// Estimator on the grid via the binned expansion.
///
/// With `settings.self_check` set, the expansion is compared with direct
/// summation on a subsample at a few probe points; if the deviation exceeds
/// the tolerance a warning is logged and the exact path is used instead.
pub fn reconstruct_fast(batch: &QuadratureBatch, params: &ReconstructionParams) -> Result<WignerGrid> {
    params.check_batch(batch)?;
    let kernel = params.kernel_for(batch)?;
    let settings = params.fast;
    let inv_sqrt_eta = 1.0 / params.eta.sqrt();
    let samples = &batch.samples;
    let bin = Binning::new(samples, inv_sqrt_eta, &settings)?;
    let cell_moments = moments(samples, inv_sqrt_eta, &bin);

    let mut grid = WignerGrid::zeros(
        params.grid_size,
        params.grid_extent,
        params.r,
        GridMeta::for_batch(Method::Fast, params, batch),
    );
    let reach = params.r.min(params.grid_extent * std::f64::consts::SQRT_2);
    let pad = 3.0 * settings.table_step;
    let len = (2.0 * (reach + pad) / settings.table_step).ceil() as usize + 1;
    let table = TableGrid {
        start: -(reach + pad),
        step: settings.table_step,
        len: len.max(4),
    };

    let tables: Vec<Vec<[f64; 4]>> = (0..bin.bins)
        .into_par_iter()
        .map(|b| {
            let cells = &cell_moments[b * bin.cells..(b + 1) * bin.cells];
            bin_tables(&kernel, cells, &bin, &table)
        })
        .collect();
    drop(cell_moments);
    let trig: Vec<(f64, f64)> = (0..bin.bins).map(|b| bin.phi_centre(b).sin_cos()).collect();

    let size = grid.size;
    let n = samples.len() as f64;
    let rows: Vec<Vec<f64>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; size];
            let Some((lo, hi)) = grid.disk_columns(i) else {
                return row;
            };
            let q = grid.coord(i);
            for j in lo..=hi {
                let p = grid.coord(j);
                let mut acc = NeumaierSum::new();
                for (tab, &(sin, cos)) in tables.iter().zip(&trig) {
                    let s = q * cos + p * sin;
                    let sp = -q * sin + p * cos;
                    let (m, w) = table.stencil(s);
                    let mut a = [0.0; 4];
                    for (k, wk) in w.iter().enumerate() {
                        for (ai, ti) in a.iter_mut().zip(&tab[m + k]) {
                            *ai += wk * ti;
                        }
                    }
                    acc.add(a[0] + sp * a[1] - 0.5 * s * a[2] + 0.5 * sp * sp * a[3]);
                }
                row[j] = acc.value() / n;
            }
            row
        })
        .collect();
    for (i, row) in rows.into_iter().enumerate() {
        grid.values[i * size..(i + 1) * size].copy_from_slice(&row);
    }

    if settings.self_check {
        let deviation = self_check_deviation(&kernel, samples, params, &bin, &settings);
        let scale = grid.max_abs();
        if !(deviation <= settings.check_tolerance * scale) {
            log::warn!(
                "binned reconstruction deviates by {deviation:.3e} (scale {scale:.3e}); \
                 falling back to direct summation"
            );
            let meta = GridMeta::for_batch(Method::ExactFallback, params, batch);
            return Ok(exact_grid(&kernel, samples, params, meta));
        }
        log::debug!("binned reconstruction self-check deviation {deviation:.3e}");
    }
    Ok(grid)
}

/// Probe points: the origin and eight points at 0.6 r.
fn probes(r: f64) -> Vec<PhasePoint> {
    let mut pts = vec![PhasePoint::new(0.0, 0.0)];
    for k in 0..8 {
        let a = k as f64 * PI / 4.0;
        pts.push(PhasePoint::new(0.6 * r * a.cos(), 0.6 * r * a.sin()));
    }
    pts
}

/// Largest |mean(expansion) − mean(direct)| over the probes, on an evenly
/// strided subsample.
fn self_check_deviation(
    kernel: &DeconvolutionKernel,
    samples: &[QuadratureSample],
    params: &ReconstructionParams,
    bin: &Binning,
    settings: &FastSettings,
) -> f64 {
    let m = settings.check_samples.clamp(1, samples.len());
    let stride = samples.len() / m;
    let sub: Vec<QuadratureSample> = (0..m).map(|k| samples[k * stride]).collect();
    let pts = probes(params.r);
    let direct = evaluate_with(kernel, &sub, params, &pts);
    let inv_sqrt_eta = 1.0 / params.eta.sqrt();
    let i = Complex64::i();
    pts.iter()
        .zip(&direct)
        .map(|(pt, d)| {
            let mut acc = NeumaierSum::new();
            for s in &sub {
                let (b, delta, j, eps) = bin.locate(s.phi, s.x * inv_sqrt_eta);
                let (sin, cos) = bin.phi_centre(b).sin_cos();
                let sb = pt.q * cos + pt.p * sin;
                let sp = -pt.q * sin + pt.p * cos;
                let yj = bin.y_centre(j);
                let mut v = 0.0;
                for (&xi, &w) in kernel.nodes().iter().zip(kernel.weights()) {
                    let c0 = Complex64::new(1.0 - 0.5 * xi * xi * eps * eps, -xi * eps);
                    let c1 = Complex64::new(delta, -xi * delta * eps);
                    let c2 = delta * delta;
                    let f = c0 + i * xi * sp * c1 - 0.5 * sb * i * xi * c2 - 0.5 * sp * sp * xi * xi * c2;
                    v += w * (Complex64::from_polar(1.0, xi * (sb - yj)) * f).re;
                }
                acc.add(v);
            }
            (acc.value() / m as f64 - d).abs()
        })
        .fold(0.0, f64::max)
}
