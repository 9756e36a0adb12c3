use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate};

pub const DEFAULT_NODES_PER_PANEL: usize = 12;

/// Largest γ/h² for which e^{γ/h²} is safely representable.
const MAX_EXPONENT: f64 = 700.0;

fn check_exponent(gamma: f64, h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::domain(format!("bandwidth h = {h} must be positive")));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("gamma = {gamma} must be non-negative")));
    }
    let exponent = gamma / (h * h);
    if exponent > MAX_EXPONENT {
        return Err(Error::Range(format!(
            "kernel amplification exp({exponent:.1}) overflows; increase h or eta"
        )));
    }
    Ok(())
}

/// Reference evaluation of K(t) by adaptive quadrature. Slow; used for checks.
pub fn kernel(t: f64, gamma: f64, h: f64) -> Result<f64> {
    check_exponent(gamma, h)?;
    let cutoff = 1.0 / h;
    // Split at the zeros of cos(ξt) so each piece is smooth and mildly oscillating.
    let step = if t.abs() > 0.0 { (PI / t.abs()).min(cutoff) } else { cutoff };
    let mut total = 0.0;
    let mut a = 0.0;
    while a < cutoff {
        let b = (a + step).min(cutoff);
        let est = integrate(
            |xi| xi * (gamma * xi * xi).exp() * (xi * t).cos(),
            a,
            b,
            0.0,
            1e-13,
        )?;
        total += est.value;
        a = b;
    }
    Ok(total / (2.0 * PI))
}

/// K(t) tabulated as a fixed Gauss–Legendre rule in ξ, accurate for |t| ≤ t_max.
///
/// K(t) = Σ_k w_k cos(ξ_k t), where the weights already carry ξ e^{γξ²}/(2π).
#[derive(Debug, Clone)]
pub struct DeconvolutionKernel {
    gamma: f64,
    h: f64,
    t_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl DeconvolutionKernel {
    pub fn new(gamma: f64, h: f64, t_max: f64, nodes_per_panel: usize) -> Result<Self> {
        check_exponent(gamma, h)?;
        if nodes_per_panel == 0 {
            return Err(Error::domain("kernel quadrature needs at least one node"));
        }
        let cutoff = 1.0 / h;
        let t_max = t_max.abs().max(1.0);
        // Panel width limited by the growth of e^{γξ²} and by the oscillation of cos(ξt).
        let mut width = 1.0f64.min(4.0 / t_max);
        if gamma > 0.0 {
            width = width.min(1.0 / (2.0 * gamma.sqrt() * cutoff));
        }
        let panels = (cutoff / width).ceil().max(1.0) as usize;
        let width = cutoff / panels as f64;
        let (x, w) = gauss_legendre(nodes_per_panel);
        let mut nodes = Vec::with_capacity(panels * nodes_per_panel);
        let mut weights = Vec::with_capacity(panels * nodes_per_panel);
        for k in 0..panels {
            let mid = (k as f64 + 0.5) * width;
            for (xi, wi) in x.iter().zip(&w) {
                let xi = mid + 0.5 * width * xi;
                nodes.push(xi);
                weights.push(0.5 * width * wi * xi * (gamma * xi * xi).exp() / (2.0 * PI));
            }
        }
        Ok(Self {
            gamma,
            h,
            t_max,
            nodes,
            weights,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(xi, w)| w * (xi * t).cos())
            .sum()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// Frequencies ξ_k in (0, 1/h).
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
