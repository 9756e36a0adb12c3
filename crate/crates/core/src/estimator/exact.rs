//! Direct summation of the estimator over every sample.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{DeconvolutionKernel, GridMeta, Method, ReconstructionParams, WignerGrid};
use crate::error::Result;
use crate::sampling::{QuadratureBatch, QuadratureSample};
use crate::states::PhasePoint;
use crate::summation::NeumaierSum;

/// Samples per work unit. Fixed so the summation order, and hence the
/// result, does not depend on the number of threads.
const CHUNK: usize = 2048;

/// Adds per-chunk partial sums in chunk order.
fn reduce_in_order(partials: Vec<Vec<NeumaierSum>>, len: usize) -> Vec<f64> {
    let mut total = vec![NeumaierSum::new(); len];
    for part in partials {
        for (acc, s) in total.iter_mut().zip(part) {
            acc.add(s.value());
        }
    }
    total.iter().map(NeumaierSum::value).collect()
}

/// Estimator values at arbitrary points, each kernel evaluated directly.
/// Points outside the disk of radius r get 0.
pub fn evaluate_exact(
    batch: &QuadratureBatch,
    params: &ReconstructionParams,
    points: &[PhasePoint],
) -> Result<Vec<f64>> {
    params.check_batch(batch)?;
    let kernel = params.kernel_for(batch)?;
    Ok(evaluate_with(&kernel, &batch.samples, params, points))
}

pub(crate) fn evaluate_with(
    kernel: &DeconvolutionKernel,
    samples: &[QuadratureSample],
    params: &ReconstructionParams,
    points: &[PhasePoint],
) -> Vec<f64> {
    let inv_sqrt_eta = 1.0 / params.eta.sqrt();
    let r2 = params.r * params.r;
    let partials: Vec<Vec<NeumaierSum>> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![NeumaierSum::new(); points.len()];
            for s in chunk {
                let (sin, cos) = s.phi.sin_cos();
                let y = s.x * inv_sqrt_eta;
                for (a, pt) in acc.iter_mut().zip(points) {
                    if pt.q * pt.q + pt.p * pt.p <= r2 {
                        a.add(kernel.eval(pt.q * cos + pt.p * sin - y));
                    }
                }
            }
            acc
        })
        .collect();
    let n = samples.len() as f64;
    reduce_in_order(partials, points.len())
        .into_iter()
        .map(|v| v / n)
        .collect()
}

/// Estimator on the full grid by direct summation over samples.
///
/// For each sample the phases e^{iξ_k t} are marched across the grid by
/// complex multiplication, so the cost is one multiply per (sample, node,
/// frequency) and no trigonometric calls in the inner loop.
pub fn reconstruct_exact(batch: &QuadratureBatch, params: &ReconstructionParams) -> Result<WignerGrid> {
    params.check_batch(batch)?;
    let kernel = params.kernel_for(batch)?;
    let meta = GridMeta::for_batch(Method::Exact, params, batch);
    Ok(exact_grid(&kernel, &batch.samples, params, meta))
}

pub(crate) fn exact_grid(
    kernel: &DeconvolutionKernel,
    samples: &[QuadratureSample],
    params: &ReconstructionParams,
    meta: GridMeta,
) -> WignerGrid {
    let mut grid = WignerGrid::zeros(params.grid_size, params.grid_extent, params.r, meta);
    let size = grid.size;
    let cell = grid.cell();
    let q0 = grid.coord(0);
    let rows: Vec<(usize, usize, usize)> = (0..size)
        .filter_map(|i| grid.disk_columns(i).map(|(lo, hi)| (i, lo, hi)))
        .collect();
    let inv_sqrt_eta = 1.0 / params.eta.sqrt();
    let xi = kernel.nodes();
    let w = kernel.weights();
    let nk = xi.len();

    let partials: Vec<Vec<NeumaierSum>> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![NeumaierSum::new(); size * size];
            let mut row_phase = vec![Complex64::new(0.0, 0.0); nk];
            let mut row_step = vec![Complex64::new(0.0, 0.0); nk];
            let mut col_step = vec![Complex64::new(0.0, 0.0); nk];
            let mut line = vec![0.0; size];
            for s in chunk {
                let (sin, cos) = s.phi.sin_cos();
                let y = s.x * inv_sqrt_eta;
                // t at node (0, 0); rows step by cell·cosΦ, columns by cell·sinΦ.
                let t00 = q0 * cos + q0 * sin - y;
                for k in 0..nk {
                    row_phase[k] = Complex64::from_polar(1.0, xi[k] * t00);
                    row_step[k] = Complex64::from_polar(1.0, xi[k] * cell * cos);
                    col_step[k] = Complex64::from_polar(1.0, xi[k] * cell * sin);
                }
                let mut next_row = 0;
                for &(i, lo, hi) in &rows {
                    while next_row < i {
                        for k in 0..nk {
                            row_phase[k] *= row_step[k];
                        }
                        next_row += 1;
                    }
                    let line = &mut line[lo..=hi];
                    line.iter_mut().for_each(|v| *v = 0.0);
                    for k in 0..nk {
                        let mut z = row_phase[k] * col_step[k].powu(lo as u32);
                        let step = col_step[k];
                        let wk = w[k];
                        for v in line.iter_mut() {
                            *v += wk * z.re;
                            z *= step;
                        }
                    }
                    for (j, v) in (lo..=hi).zip(line.iter()) {
                        acc[i * size + j].add(*v);
                    }
                }
            }
            acc
        })
        .collect();
    let n = samples.len() as f64;
    grid.values = reduce_in_order(partials, size * size)
        .into_iter()
        .map(|v| v / n)
        .collect();
    grid
}
