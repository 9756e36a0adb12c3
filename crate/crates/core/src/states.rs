//! Closed-form phase-space description of the even coherent-state
//! superposition (|α⟩ + |−α⟩)/√(2(1 + e^{−2|α|²})).
//!
//! Conventions: ħ = 1, q̂ = (â + â†)/√2, p̂ = (â − â†)/(i√2), and the
//! quadrature at phase φ is x̂_φ = q̂ cos φ + p̂ sin φ. The coherent state |α⟩
//! is a Gaussian of variance 1/2 per axis centred at √2(α₁, α₂).
//!
//! The interference fringes of the cat state run perpendicular to the line
//! joining the two lobes, so the oscillatory term is
//! `cos(2√2 (p α₁ − q α₂))`. For real α this is `cos(2√2 p α₁)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// The superposition amplitude α = α₁ + iα₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatState {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl CatState {
    pub fn new(alpha1: f64, alpha2: f64) -> Self {
        Self { alpha1, alpha2 }
    }

    /// α = 3/√2, the amplitude used throughout the reference experiments.
    pub fn reference() -> Self {
        Self::new(3.0 / SQRT_2, 0.0)
    }

    pub fn abs_alpha_sq(&self) -> f64 {
        self.alpha1 * self.alpha1 + self.alpha2 * self.alpha2
    }

    /// e^{−2|α|²}, the overlap ⟨α|−α⟩.
    pub fn overlap(&self) -> f64 {
        (-2.0 * self.abs_alpha_sq()).exp()
    }

    /// 1 + e^{−2|α|²}.
    fn norm_factor(&self) -> f64 {
        1.0 + self.overlap()
    }

    /// Normalization constant 2(1 + e^{−2|α|²}), in (2, 4].
    pub fn norm_const(&self) -> f64 {
        2.0 * self.norm_factor()
    }

    /// α(φ) = α₁ cos φ + α₂ sin φ.
    pub fn alpha_phi(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.alpha1 * c + self.alpha2 * s
    }

    /// β(φ) = α₂ cos φ − α₁ sin φ.
    pub fn beta_phi(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.alpha2 * c - self.alpha1 * s
    }

    fn is_finite(&self) -> bool {
        self.alpha1.is_finite() && self.alpha2.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("non-finite amplitude {self:?}")))
        }
    }
}

/// Gaussian detection noise parametrized by the efficiency η ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    eta: f64,
}

impl NoiseModel {
    pub fn new(eta: f64) -> Result<Self> {
        if eta > 0.0 && eta <= 1.0 {
            Ok(Self { eta })
        } else {
            Err(Error::domain(format!("efficiency eta = {eta} outside (0, 1]")))
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Deconvolution strength γ = (1 − η)/(4η).
    pub fn gamma(&self) -> f64 {
        (1.0 - self.eta) / (4.0 * self.eta)
    }
}

/// A point of phase space, or of its Fourier dual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }
}

fn check_phase(phi: f64) -> Result<()> {
    if (0.0..=PI).contains(&phi) {
        Ok(())
    } else {
        Err(Error::domain(format!("phase {phi} outside [0, pi]")))
    }
}

/// Wigner function W_α(q, p) of the cat state.
pub fn wigner_true(state: &CatState, pt: PhasePoint) -> f64 {
    let (q0, p0) = (SQRT_2 * state.alpha1, SQRT_2 * state.alpha2);
    let (q, p) = (pt.q, pt.p);
    let plus = (-(q - q0).powi(2) - (p - p0).powi(2)).exp();
    let minus = (-(q + q0).powi(2) - (p + p0).powi(2)).exp();
    let fringe = 2.0
        * (-q * q - p * p).exp()
        * (2.0 * SQRT_2 * (p * state.alpha1 - q * state.alpha2)).cos();
    (plus + minus + fringe) / (2.0 * PI * state.norm_factor())
}

/// Wigner function of the incoherent mixture λ|α⟩⟨α| + (1 − λ)|−α⟩⟨−α|.
pub fn wigner_incoherent(state: &CatState, lambda: f64, pt: PhasePoint) -> f64 {
    let (q0, p0) = (SQRT_2 * state.alpha1, SQRT_2 * state.alpha2);
    let plus = (-(pt.q - q0).powi(2) - (pt.p - p0).powi(2)).exp();
    let minus = (-(pt.q + q0).powi(2) - (pt.p + p0).powi(2)).exp();
    (lambda * plus + (1.0 - lambda) * minus) / PI
}

/// Fourier transform F[W_α](w) = ∫∫ e^{−i(q w₁ + p w₂)} W_α dq dp.
///
/// Real because W_α is even under (q, p) → (−q, −p).
pub fn wigner_fourier(state: &CatState, w: PhasePoint) -> f64 {
    let k = 2.0 * SQRT_2;
    let (a1, a2) = (state.alpha1, state.alpha2);
    let (w1, w2) = (w.q, w.p);
    let shifted_a = (-((w1 + k * a2).powi(2) + (w2 - k * a1).powi(2)) / 4.0).exp();
    let shifted_b = (-((w1 - k * a2).powi(2) + (w2 + k * a1).powi(2)) / 4.0).exp();
    let centre =
        2.0 * (-(w1 * w1 + w2 * w2) / 4.0).exp() * (SQRT_2 * (w1 * a1 + w2 * a2)).cos();
    (shifted_a + shifted_b + centre) / (2.0 * state.norm_factor())
}

/// Closed-form mixture components of a quadrature density: two unit-width
/// Gaussians e^{−(x ∓ mean)²} plus `fringe_amp · e^{−x²} cos(fringe_freq · x)`,
/// all divided by `2√π (1 + e^{−2|α|²})`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DensityTerms {
    pub mean: f64,
    pub fringe_amp: f64,
    pub fringe_freq: f64,
    pub norm: f64,
}

impl DensityTerms {
    pub(crate) fn ideal(state: &CatState, phi: f64) -> Self {
        let a = state.alpha_phi(phi);
        let b = state.beta_phi(phi);
        Self {
            mean: SQRT_2 * a,
            fringe_amp: 2.0 * (-2.0 * a * a).exp(),
            fringe_freq: 2.0 * SQRT_2 * b,
            norm: 2.0 * PI.sqrt() * state.norm_factor(),
        }
    }

    pub(crate) fn noisy(state: &CatState, eta: f64, phi: f64) -> Self {
        let a = state.alpha_phi(phi);
        let b = state.beta_phi(phi);
        Self {
            mean: (2.0 * eta).sqrt() * a,
            fringe_amp: 2.0 * (-2.0 * state.abs_alpha_sq() + 2.0 * eta * b * b).exp(),
            fringe_freq: 2.0 * (2.0 * eta).sqrt() * b,
            norm: 2.0 * PI.sqrt() * state.norm_factor(),
        }
    }

    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let g = (-(x - self.mean).powi(2)).exp() + (-(x + self.mean).powi(2)).exp();
        let f = self.fringe_amp * (-x * x).exp() * (self.fringe_freq * x).cos();
        (g + f) / self.norm
    }

    /// ∫ e^{−iωx} p(x) dx.
    pub(crate) fn characteristic(&self, omega: f64) -> f64 {
        let g = 2.0 * (omega * self.mean).cos() * (-omega * omega / 4.0).exp();
        let f = 0.5
            * self.fringe_amp
            * ((-(omega - self.fringe_freq).powi(2) / 4.0).exp()
                + (-(omega + self.fringe_freq).powi(2) / 4.0).exp());
        PI.sqrt() * (g + f) / self.norm
    }
}

/// Ideal quadrature density p_α(x, φ), the Radon transform of W_α.
pub fn quadrature_density(state: &CatState, x: f64, phi: f64) -> Result<f64> {
    check_phase(phi)?;
    Ok(DensityTerms::ideal(state, phi).eval(x))
}

/// Quadrature density p_α^η(x, φ) after Gaussian detection noise: the
/// convolution of the ideal density scaled by √η with a Gaussian of
/// variance (1 − η)/2.
pub fn noisy_quadrature_density(
    state: &CatState,
    noise: &NoiseModel,
    x: f64,
    phi: f64,
) -> Result<f64> {
    check_phase(phi)?;
    Ok(DensityTerms::noisy(state, noise.eta(), phi).eval(x))
}

/// Characteristic function ∫ e^{−iωx} p_α^η(x, φ) dx of the noisy density.
pub fn noisy_characteristic(
    state: &CatState,
    noise: &NoiseModel,
    omega: f64,
    phi: f64,
) -> Result<f64> {
    check_phase(phi)?;
    Ok(DensityTerms::noisy(state, noise.eta(), phi).characteristic(omega))
}

/// Reference Radon transform: integrates W_α numerically along the line
/// (x cos φ − t sin φ, x sin φ + t cos φ), t ∈ ℝ.
pub fn radon_oracle(state: &CatState, x: f64, phi: f64) -> Result<f64> {
    check_phase(phi)?;
    let (s, c) = phi.sin_cos();
    let reach = SQRT_2 * state.abs_alpha_sq().sqrt() + 9.0;
    let est = quadrature::integrate(
        |t| wigner_true(state, PhasePoint::new(x * c - t * s, x * s + t * c)),
        -reach,
        reach,
        1e-13,
        1e-12,
    )?;
    Ok(est.value)
}

/// Phase-space function O_α(q, p) of the interference witness
/// Ô_α = (|α⟩⟨−α| + |−α⟩⟨α|) / (2(1 + e^{−2|α|²})).
pub fn witness_phase_fn(state: &CatState, pt: PhasePoint) -> f64 {
    let (q, p) = (pt.q, pt.p);
    (-q * q - p * p).exp() * (2.0 * SQRT_2 * (p * state.alpha1 - q * state.alpha2)).cos()
        / (PI.sqrt() * state.norm_factor())
}

/// ⟨Ô_α⟩ on any incoherent mixture of |α⟩ and |−α⟩: e^{−2|α|²}/(1 + e^{−2|α|²}).
pub fn incoherent_witness_mean(state: &CatState) -> f64 {
    // 1/(1 + e^{2|α|²}) written to stay finite for any |α|.
    let two_a = 2.0 * state.abs_alpha_sq();
    (-two_a - (-two_a).exp().ln_1p()).exp()
}

/// ⟨Ψ_α|Ô_α|Ψ_α⟩ = 1/2 for every α.
pub fn pure_witness_mean(_state: &CatState) -> f64 {
    0.5
}
