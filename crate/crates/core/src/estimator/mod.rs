//! Kernel-deconvolution estimator of the Wigner function.
//!
//! Given n noisy pairs (Xℓ, Φℓ), the estimate at (q, p) is
//!
//! ```text
//! W(q, p) = χ_r(q, p) · (1/n) Σℓ K(q cos Φℓ + p sin Φℓ − Xℓ/√η)
//! K(t)    = (1/2π) ∫₀^{1/h} ξ e^{γξ²} cos(ξt) dξ
//! ```
//!
//! with χ_r the indicator of the disk of radius r.

mod exact;
mod fast;
mod kernel;
mod oracle;

use serde::{Deserialize, Serialize};

pub use exact::{evaluate_exact, reconstruct_exact};
pub use fast::{reconstruct_fast, FastSettings};
pub use kernel::{kernel, DeconvolutionKernel, DEFAULT_NODES_PER_PANEL};
pub use oracle::estimator_mean_oracle;

use crate::error::{Error, Result};
use crate::sampling::QuadratureBatch;
use crate::states::{CatState, NoiseModel, PhasePoint};

/// γ = (1 − η)/(4η).
pub fn gamma_of(eta: f64) -> Result<f64> {
    Ok(NoiseModel::new(eta)?.gamma())
}

/// Leading-order optimal truncation radius and bandwidth,
/// r = 1/h = √(ln n / (β + 2γ)).
pub fn optimal_bandwidth(n: usize, beta: f64, gamma: f64) -> Result<(f64, f64)> {
    optimal_bandwidth_real(n as f64, beta, gamma)
}

/// [`optimal_bandwidth`] for a real-valued sample count.
pub fn optimal_bandwidth_real(n: f64, beta: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(n >= 2.0) {
        return Err(Error::domain(format!("sample count {n} below 2")));
    }
    check_beta(beta)?;
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("gamma = {gamma} must be non-negative")));
    }
    let r = (n.ln() / (beta + 2.0 * gamma)).sqrt();
    Ok((r, 1.0 / r))
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 0.25 {
        Ok(())
    } else {
        Err(Error::domain(format!("beta = {beta} outside (0, 1/4)")))
    }
}

/// Everything needed to turn a batch into a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionParams {
    pub beta: f64,
    pub n: usize,
    pub eta: f64,
    /// Truncation radius of χ_r.
    pub r: f64,
    /// Bandwidth; the kernel integrates frequencies up to 1/h.
    pub h: f64,
    /// Nodes per axis (odd, so the origin is a node).
    pub grid_size: usize,
    /// Half-width of the square grid.
    pub grid_extent: f64,
    /// Gauss–Legendre nodes per kernel quadrature panel.
    pub nodes_per_panel: usize,
    pub fast: FastSettings,
}

impl ReconstructionParams {
    /// Parameters with (r, h) from [`optimal_bandwidth`] and default
    /// resolutions: 201² grid over [−r, r]².
    pub fn optimal(n: usize, beta: f64, noise: NoiseModel) -> Result<Self> {
        let (r, h) = optimal_bandwidth(n, beta, noise.gamma())?;
        Ok(Self {
            beta,
            n,
            eta: noise.eta(),
            r,
            h,
            grid_size: 201,
            grid_extent: r,
            nodes_per_panel: DEFAULT_NODES_PER_PANEL,
            fast: FastSettings::for_params(r, h),
        })
    }

    pub fn with_grid_size(mut self, size: usize) -> Self {
        self.grid_size = size;
        self
    }

    pub fn with_grid_extent(mut self, extent: f64) -> Self {
        self.grid_extent = extent;
        self
    }

    pub fn gamma(&self) -> f64 {
        (1.0 - self.eta) / (4.0 * self.eta)
    }

    pub fn cutoff(&self) -> f64 {
        1.0 / self.h
    }

    pub fn validate(&self) -> Result<()> {
        NoiseModel::new(self.eta)?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::domain(format!("bandwidth h = {} must be positive", self.h)));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::domain(format!("radius r = {} must be positive", self.r)));
        }
        if self.grid_size < 3 || self.grid_size % 2 == 0 {
            return Err(Error::domain(format!(
                "grid size {} must be odd and at least 3",
                self.grid_size
            )));
        }
        if !(self.grid_extent > 0.0) {
            return Err(Error::domain("grid extent must be positive"));
        }
        if self.nodes_per_panel == 0 {
            return Err(Error::domain("kernel quadrature needs at least one node"));
        }
        self.fast.validate()
    }

    pub(crate) fn check_batch(&self, batch: &QuadratureBatch) -> Result<()> {
        self.validate()?;
        if batch.is_empty() {
            return Err(Error::Empty("quadrature batch"));
        }
        if batch.meta.eta != self.eta {
            return Err(Error::Mismatch(format!(
                "batch efficiency {} differs from reconstruction efficiency {}",
                batch.meta.eta, self.eta
            )));
        }
        Ok(())
    }

    /// Kernel covering every argument the reconstruction of `batch` can produce.
    pub(crate) fn kernel_for(&self, batch: &QuadratureBatch) -> Result<DeconvolutionKernel> {
        let max_y = batch
            .samples
            .iter()
            .map(|s| s.x.abs())
            .fold(0.0, f64::max)
            / self.eta.sqrt();
        let reach = self.r.min(self.grid_extent * std::f64::consts::SQRT_2);
        DeconvolutionKernel::new(self.gamma(), self.h, reach + max_y, self.nodes_per_panel)
    }
}

/// Which algorithm produced a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Fast,
    /// The fast path's self-check failed and the exact path was used.
    ExactFallback,
    Analytic,
    Average,
}

/// Provenance carried along with grid values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub method: Method,
    pub params: Option<ReconstructionParams>,
    pub state: Option<CatState>,
    pub seed: Option<u64>,
    pub replicate: Option<u32>,
    /// Content hashes (hex SHA-256) of the input files.
    #[serde(default)]
    pub sources: Vec<String>,
}

impl GridMeta {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            params: None,
            state: None,
            seed: None,
            replicate: None,
            sources: Vec::new(),
        }
    }

    pub(crate) fn for_batch(method: Method, params: &ReconstructionParams, batch: &QuadratureBatch) -> Self {
        Self {
            method,
            params: Some(*params),
            state: Some(batch.meta.state),
            seed: Some(batch.meta.seed),
            replicate: Some(batch.meta.replicate),
            sources: Vec::new(),
        }
    }
}

/// Square uniform grid of Wigner values, zero outside the disk of radius
/// `radius`. Values are row-major with rows indexed by q: `values[i * size + j]`
/// is the value at (q_i, p_j).
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub size: usize,
    pub extent: f64,
    pub radius: f64,
    pub values: Vec<f64>,
    pub meta: GridMeta,
}

impl WignerGrid {
    pub fn zeros(size: usize, extent: f64, radius: f64, meta: GridMeta) -> Self {
        Self {
            size,
            extent,
            radius,
            values: vec![0.0; size * size],
            meta,
        }
    }

    /// Sample `f` at every node inside the disk.
    pub fn from_fn(
        size: usize,
        extent: f64,
        radius: f64,
        meta: GridMeta,
        f: impl Fn(PhasePoint) -> f64,
    ) -> Self {
        let mut g = Self::zeros(size, extent, radius, meta);
        for i in 0..size {
            for j in 0..size {
                if g.in_disk(i, j) {
                    g.values[i * size + j] = f(g.node(i, j));
                }
            }
        }
        g
    }

    /// Node spacing.
    pub fn cell(&self) -> f64 {
        2.0 * self.extent / (self.size - 1) as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell().powi(2)
    }

    /// Coordinate of index `k` along either axis; the centre index maps to 0 exactly.
    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - ((self.size - 1) / 2) as f64) * self.cell()
    }

    pub fn node(&self, i: usize, j: usize) -> PhasePoint {
        PhasePoint::new(self.coord(i), self.coord(j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn in_disk(&self, i: usize, j: usize) -> bool {
        let (q, p) = (self.coord(i), self.coord(j));
        q * q + p * p <= self.radius * self.radius
    }

    /// Column range [lo, hi] of row `i` inside the disk, if any.
    pub fn disk_columns(&self, i: usize) -> Option<(usize, usize)> {
        let lo = (0..self.size).find(|&j| self.in_disk(i, j))?;
        let hi = (lo..self.size).rev().find(|&j| self.in_disk(i, j))?;
        Some((lo, hi))
    }

    /// Iterator over (i, j, node) for nodes inside the disk.
    pub fn disk_nodes(&self) -> impl Iterator<Item = (usize, usize, PhasePoint)> + '_ {
        (0..self.size).flat_map(move |i| {
            (0..self.size)
                .filter(move |&j| self.in_disk(i, j))
                .map(move |j| (i, j, self.node(i, j)))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_geometry(&self, other: &WignerGrid) -> bool {
        self.size == other.size && self.extent == other.extent && self.radius == other.radius
    }

    /// Nodewise mean of grids sharing one geometry, summed in input order.
    pub fn average(grids: &[WignerGrid]) -> Result<WignerGrid> {
        let first = grids.first().ok_or(Error::Empty("grid list"))?;
        if let Some(bad) = grids.iter().find(|g| !g.same_geometry(first)) {
            return Err(Error::Mismatch(format!(
                "grid geometry {}x{} over ±{} differs from {}x{} over ±{}",
                bad.size, bad.size, bad.extent, first.size, first.size, first.extent
            )));
        }
        let m = grids.len() as f64;
        let mut values = vec![0.0; first.values.len()];
        for g in grids {
            for (acc, v) in values.iter_mut().zip(&g.values) {
                *acc += v;
            }
        }
        values.iter_mut().for_each(|v| *v /= m);
        let mut meta = GridMeta::new(Method::Average);
        meta.params = first.meta.params;
        meta.state = first.meta.state;
        meta.seed = first.meta.seed;
        meta.sources = grids.iter().flat_map(|g| g.meta.sources.clone()).collect();
        Ok(WignerGrid {
            size: first.size,
            extent: first.extent,
            radius: first.radius,
            values,
            meta,
        })
    }
}
