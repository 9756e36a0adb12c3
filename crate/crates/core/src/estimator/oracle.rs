//! Expected value of the estimator, by numerical quadrature.

use std::cell::Cell;
use std::f64::consts::PI;

use super::ReconstructionParams;
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::states::{CatState, DensityTerms, PhasePoint};

/// E[Ŵ(q, p)] for samples drawn from the state:
///
/// ```text
/// (1/2π²) ∫₀^π dφ ∫₀^{1/h} ξ cos(ξ s) e^{γξ²} Φ^η(ξ/√η, φ) dξ,   s = q cos φ + p sin φ
/// ```
///
/// with Φ^η the characteristic function of the noisy quadrature density.
/// The exponents of e^{γξ²} and Φ^η are combined before exponentiation so
/// the integrand stays finite for any η.
pub fn estimator_mean_oracle(state: &CatState, params: &ReconstructionParams, pt: PhasePoint) -> Result<f64> {
    params.validate()?;
    state.validate()?;
    if pt.q * pt.q + pt.p * pt.p > params.r * params.r {
        return Err(Error::domain(format!(
            "point ({}, {}) lies outside the disk of radius {}",
            pt.q, pt.p, params.r
        )));
    }
    let eta = params.eta;
    let gamma = params.gamma();
    let cutoff = params.cutoff();
    let failure: Cell<Option<Error>> = Cell::new(None);

    let inner = |phi: f64| -> f64 {
        let t = DensityTerms::noisy(state, eta, phi);
        let (sin, cos) = phi.sin_cos();
        let s = pt.q * cos + pt.p * sin;
        let ln_amp = t.fringe_amp.ln();
        let scale = PI.sqrt() / t.norm;
        let f = |xi: f64| {
            let w = xi / eta.sqrt();
            let g = 2.0 * (w * t.mean).cos() * (gamma * xi * xi - w * w / 4.0).exp();
            let fr = 0.5
                * ((ln_amp + gamma * xi * xi - (w - t.fringe_freq).powi(2) / 4.0).exp()
                    + (ln_amp + gamma * xi * xi - (w + t.fringe_freq).powi(2) / 4.0).exp());
            xi * (xi * s).cos() * scale * (g + fr)
        };
        match integrate(f, 0.0, cutoff, 1e-13, 1e-11) {
            Ok(e) => e.value,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let outer = integrate(inner, 0.0, PI, 1e-12, 1e-10);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    Ok(outer?.value / (2.0 * PI * PI))
}
