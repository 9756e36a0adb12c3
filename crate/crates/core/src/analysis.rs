//! Error metrology, the analytic error bound and witness statistics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{check_beta, optimal_bandwidth, WignerGrid};
use crate::quadrature::integrate;
use crate::states::{incoherent_witness_mean, pure_witness_mean, wigner_true, witness_phase_fn, CatState, NoiseModel, PhasePoint};
use crate::summation::NeumaierSum;

/// Factor turning the bare overlap ∫∫ O_α W dq dp into ⟨Ô_α⟩.
///
/// Fixed by requiring the analytic Wigner function of the cat state to give
/// exactly 1/2; its overlap with O_α is 1/(4√π) for every α.
pub const WITNESS_PAIRING: f64 = 3.544_907_701_811_032; // 2√π

fn check_state(grid: &WignerGrid, state: &CatState) -> Result<()> {
    state.validate()?;
    if let Some(s) = grid.meta.state {
        if s != *state {
            return Err(Error::Mismatch(format!(
                "grid was reconstructed for alpha = ({}, {}), not ({}, {})",
                s.alpha1, s.alpha2, state.alpha1, state.alpha2
            )));
        }
    }
    Ok(())
}

/// ∫∫ over |z| > r of W_α², by angular and radial adaptive quadrature.
fn outside_disk_norm(state: &CatState, r: f64) -> Result<f64> {
    // W_α² is below e^{−2·18²} beyond this radius.
    let reach = (2.0 * state.abs_alpha_sq()).sqrt() + 18.0;
    if r >= reach {
        return Ok(0.0);
    }
    let mut failure = None;
    let est = integrate(
        |theta| {
            let (s, c) = theta.sin_cos();
            match integrate(
                |rho| rho * wigner_true(state, PhasePoint::new(rho * c, rho * s)).powi(2),
                r,
                reach,
                1e-12,
                1e-10,
            ) {
                Ok(e) => e.value,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        2.0 * PI,
        1e-10,
        1e-9,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(est.value),
    }
}

/// Squared L² distance ∫∫ |W_α − W_rec|² dq dp.
///
/// Inside the disk: midpoint sum over grid nodes. Outside, where the
/// reconstruction vanishes: ∫∫ W_α² by quadrature.
pub fn l2_error(grid: &WignerGrid, state: &CatState) -> Result<f64> {
    check_state(grid, state)?;
    if grid.extent < grid.radius {
        return Err(Error::domain(format!(
            "grid half-width {} does not cover the disk of radius {}",
            grid.extent, grid.radius
        )));
    }
    let inside: NeumaierSum = grid
        .disk_nodes()
        .map(|(i, j, pt)| (wigner_true(state, pt) - grid.get(i, j)).powi(2))
        .collect();
    Ok(inside.value() * grid.cell_area() + outside_disk_norm(state, grid.radius)?)
}

/// Mean of per-replicate squared L² distances.
pub fn mean_square_error(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("error list"));
    }
    let s: NeumaierSum = errors.iter().copied().collect();
    Ok(s.value() / errors.len() as f64)
}

/// Δ₁(γ) = √π / (16π² √γ).
pub fn delta1(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("gamma = {gamma} must be positive")));
    }
    Ok(PI.sqrt() / (16.0 * PI * PI * gamma.sqrt()))
}

/// ln of √(3(1 + e^{kβ|α|²/d}(1 + 2√π|α|/√d − e^{−4|α|²/d})) / (4π²·π·d)), d = 1 − cβ.
fn ln_tail_factor(beta: f64, k: f64, c: f64, state: &CatState) -> f64 {
    let a2 = state.abs_alpha_sq();
    let d = 1.0 - c * beta;
    let e = k * beta * a2 / d;
    let inner = 1.0 + 2.0 * PI.sqrt() * a2.sqrt() / d.sqrt() - (-4.0 * a2 / d).exp();
    // ln(1 + e^E · inner) without overflowing e^E.
    let ln_bracket = if e > 0.0 {
        e + inner.ln() + (-e - inner.ln()).exp().ln_1p()
    } else {
        (e.exp() * inner).ln_1p()
    };
    0.5 * ((3.0f64).ln() + ln_bracket - (4.0 * PI * PI * PI * d).ln())
}

/// Δ₂(β), the tail constant.
pub fn delta2(beta: f64, state: &CatState) -> Result<f64> {
    check_beta(beta)?;
    Ok(ln_tail_factor(beta, 4.0, 1.0, state).exp())
}

/// Δ₃(β), the bias constant. Grows without bound as β → 1/4.
pub fn delta3(beta: f64, state: &CatState) -> Result<f64> {
    check_beta(beta)?;
    let v = ln_tail_factor(beta, 16.0, 4.0, state).exp();
    if !v.is_finite() {
        return Err(Error::Range(format!("bias constant overflows at beta = {beta}")));
    }
    Ok(v)
}

/// The three addends of the bound at the optimal (r, h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub n: usize,
    pub beta: f64,
    pub eta: f64,
    pub r: f64,
    pub h: f64,
    pub term_variance: f64,
    pub term_tail: f64,
    pub term_bias: f64,
}

impl BoundTerms {
    pub fn total(&self) -> f64 {
        self.term_variance + self.term_tail + self.term_bias
    }
}

/// Variance, tail and bias terms of the mean square error bound
///
/// ```text
/// Δ = (r²/(n h)) e^{2γ/h²} Δ₁(γ) + e^{−βr²} Δ₂(β) + e^{−β/h²} Δ₃(β)
/// ```
///
/// with r = 1/h from [`optimal_bandwidth`]. Requires η < 1.
pub fn delta_terms(n: usize, beta: f64, eta: f64, state: &CatState) -> Result<BoundTerms> {
    state.validate()?;
    let noise = NoiseModel::new(eta)?;
    if eta >= 1.0 {
        return Err(Error::domain("the variance term diverges at eta = 1"));
    }
    let gamma = noise.gamma();
    let (r, h) = optimal_bandwidth(n, beta, gamma)?;
    let amp = 2.0 * gamma / (h * h);
    if amp > 700.0 {
        return Err(Error::Range(format!("exp({amp:.1}) in the variance term overflows")));
    }
    let term_variance = r * r / (n as f64 * h) * amp.exp() * delta1(gamma)?;
    let term_tail = (-beta * r * r + ln_tail_factor(beta, 4.0, 1.0, state)).exp();
    let term_bias = (-beta / (h * h) + ln_tail_factor(beta, 16.0, 4.0, state)).exp();
    if !term_bias.is_finite() {
        return Err(Error::Range(format!("bias term overflows at beta = {beta}")));
    }
    Ok(BoundTerms {
        n,
        beta,
        eta,
        r,
        h,
        term_variance,
        term_tail,
        term_bias,
    })
}

/// Parameters an [`ErrorReport`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub n: usize,
    pub beta: f64,
    pub eta: f64,
    pub r: f64,
    pub h: f64,
    pub state: CatState,
}

/// Empirical mean square error next to its analytic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Mean of `errors`, absent until replicates are measured.
    pub delta_numeric: Option<f64>,
    pub delta_bound: f64,
    pub term_variance: f64,
    pub term_tail: f64,
    pub term_bias: f64,
    pub params: ReportParams,
    /// Number of replicates.
    pub m: usize,
    /// Per-replicate squared L² distances.
    #[serde(default)]
    pub errors: Vec<f64>,
}

impl ErrorReport {
    /// Attach per-replicate squared L² errors.
    pub fn with_errors(mut self, errors: Vec<f64>) -> Result<Self> {
        self.delta_numeric = Some(mean_square_error(&errors)?);
        self.m = errors.len();
        self.errors = errors;
        Ok(self)
    }
}

/// Bound part of an [`ErrorReport`].
pub fn error_upper_bound(n: usize, beta: f64, eta: f64, state: &CatState) -> Result<ErrorReport> {
    let t = delta_terms(n, beta, eta, state)?;
    Ok(ErrorReport {
        delta_numeric: None,
        delta_bound: t.total(),
        term_variance: t.term_variance,
        term_tail: t.term_tail,
        term_bias: t.term_bias,
        params: ReportParams {
            n,
            beta,
            eta,
            r: t.r,
            h: t.h,
            state: *state,
        },
        m: 0,
        errors: Vec::new(),
    })
}

/// `count` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Bound terms along a list of β values.
pub fn beta_sweep(n: usize, eta: f64, state: &CatState, betas: &[f64]) -> Result<Vec<BoundTerms>> {
    betas.iter().map(|&b| delta_terms(n, b, eta, state)).collect()
}

/// Reconstructed ⟨Ô_α⟩: midpoint rule for ∫∫ O_α W_rec over the disk, times
/// [`WITNESS_PAIRING`].
pub fn witness_mean_from_grid(grid: &WignerGrid, state: &CatState) -> Result<f64> {
    check_state(grid, state)?;
    let s: NeumaierSum = grid
        .disk_nodes()
        .map(|(i, j, pt)| witness_phase_fn(state, pt) * grid.get(i, j))
        .collect();
    Ok(WITNESS_PAIRING * s.value() * grid.cell_area())
}

/// Replicate statistics of the witness and the incompatibility test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessStats {
    pub means: Vec<f64>,
    pub av: f64,
    /// Population standard deviation (divisor M).
    pub sd: f64,
    pub incoherent_ref: f64,
    pub pure_ref: f64,
    /// |av − incoherent_ref| > sd.
    pub separated: bool,
}

pub fn witness_stats(means: &[f64], state: &CatState) -> Result<WitnessStats> {
    if means.len() < 2 {
        return Err(Error::domain(format!(
            "need at least two replicate means, got {}",
            means.len()
        )));
    }
    let m = means.len() as f64;
    let av = means.iter().copied().collect::<NeumaierSum>().value() / m;
    // Two-pass form of √(mean of squares − av²); same quantity, no cancellation.
    let var = means
        .iter()
        .map(|x| (x - av).powi(2))
        .collect::<NeumaierSum>()
        .value()
        / m;
    let sd = var.sqrt();
    let incoherent_ref = incoherent_witness_mean(state);
    Ok(WitnessStats {
        means: means.to_vec(),
        av,
        sd,
        incoherent_ref,
        pure_ref: pure_witness_mean(state),
        separated: (av - incoherent_ref).abs() > sd,
    })
}
