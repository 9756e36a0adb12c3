//! Seedable generation of noisy homodyne pairs (X, Φ).
//!
//! Each pair is drawn in two stages: an ideal quadrature x ~ p_α(·, φ) by
//! rejection sampling, followed by the detection noise
//! X = √η x + √((1 − η)/2) y with y standard normal.
//!
//! Streams: a batch is cut into shards of [`SHARD_LEN`] samples. Shard `k` of
//! replicate `r` under seed `s` is drawn from a ChaCha20 generator keyed with
//! SHA-256("homodyne-batch/v1" ∥ s ∥ r ∥ k) (integers little-endian u64).
//! The output therefore does not depend on how shards are scheduled.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::states::{CatState, DensityTerms, NoiseModel};

/// Samples per generator sub-stream.
pub const SHARD_LEN: usize = 1 << 16;

/// Proposal cap of the rejection sampler.
pub const MAX_PROPOSALS: usize = 10_000;

/// One measured pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub x: f64,
    pub phi: f64,
}

/// Generation metadata of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub state: CatState,
    pub eta: f64,
    pub n: usize,
    pub seed: u64,
    pub replicate: u32,
}

impl BatchMeta {
    pub fn noise(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.eta)
    }

    /// [`generate_batch`] with these parameters.
    pub fn generate(&self) -> Result<QuadratureBatch> {
        generate_batch(self.state, self.noise()?, self.n, self.seed, self.replicate)
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureBatch {
    pub samples: Vec<QuadratureSample>,
    pub meta: BatchMeta,
}

impl QuadratureBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Generator for one shard of one replicate.
pub fn shard_rng(seed: u64, replicate: u32, shard: u64) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"homodyne-batch/v1");
    hasher.update(seed.to_le_bytes());
    hasher.update(u64::from(replicate).to_le_bytes());
    hasher.update(shard.to_le_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

/// Uniform phase on [0, π).
#[inline]
pub fn sample_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen::<f64>() * PI
}

/// The rejection envelope at a fixed phase: a mixture of three variance-1/2
/// Gaussians at ±√2α(φ) and 0 with weights 1 : 1 : 2e^{−2α(φ)²}. Dropping
/// the cosine from the target density leaves exactly this (unnormalized)
/// envelope, so p_α ≤ envelope pointwise.
#[derive(Debug, Clone, Copy)]
pub struct Envelope {
    terms: DensityTerms,
    centre_weight: f64,
}

impl Envelope {
    pub fn new(state: &CatState, phi: f64) -> Self {
        let terms = DensityTerms::ideal(state, phi);
        let centre_weight = terms.fringe_amp / (2.0 + terms.fringe_amp);
        Self {
            terms,
            centre_weight,
        }
    }

    /// Normalized proposal density g(x).
    pub fn density(&self, x: f64) -> f64 {
        let m = self.terms.mean;
        let side = 0.5 * (1.0 - self.centre_weight);
        (side * ((-(x - m).powi(2)).exp() + (-(x + m).powi(2)).exp())
            + self.centre_weight * (-x * x).exp())
            / PI.sqrt()
    }

    /// Target-to-proposal bound sup p/g = (1 + e^{−2α(φ)²}) / (1 + e^{−2|α|²}) ≤ 2.
    pub fn bound(&self) -> f64 {
        (2.0 + self.terms.fringe_amp) / (self.terms.norm / PI.sqrt())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.gen();
        let centre = if u < self.centre_weight {
            0.0
        } else if u < self.centre_weight + 0.5 * (1.0 - self.centre_weight) {
            self.terms.mean
        } else {
            -self.terms.mean
        };
        centre + FRAC_1_SQRT_2 * z
    }

    /// Acceptance probability p(x) / (bound · g(x)).
    fn accept_ratio(&self, x: f64) -> f64 {
        let m = self.terms.mean;
        let g = (-(x - m).powi(2)).exp() + (-(x + m).powi(2)).exp();
        let f = self.terms.fringe_amp * (-x * x).exp();
        let envelope = g + f;
        if envelope <= 0.0 {
            return 0.0;
        }
        (g + f * (self.terms.fringe_freq * x).cos()) / envelope
    }
}

/// Draw x ~ p_α(·, φ) by rejection from [`Envelope`].
pub fn sample_ideal_quadrature<R: Rng + ?Sized>(
    state: &CatState,
    phi: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(0.0..=PI).contains(&phi) {
        return Err(Error::domain(format!("phase {phi} outside [0, pi]")));
    }
    let env = Envelope::new(state, phi);
    for _ in 0..MAX_PROPOSALS {
        let x = env.draw(rng);
        let u: f64 = rng.gen();
        if u < env.accept_ratio(x) {
            return Ok(x);
        }
    }
    Err(Error::Envelope {
        phi,
        proposals: MAX_PROPOSALS,
    })
}

/// X = √η x + √((1 − η)/2) y.
#[inline]
pub fn add_detection_noise<R: Rng + ?Sized>(x: f64, noise: &NoiseModel, rng: &mut R) -> f64 {
    let eta = noise.eta();
    let y: f64 = rng.sample(StandardNormal);
    eta.sqrt() * x + ((1.0 - eta) / 2.0).sqrt() * y
}

/// One noisy pair: phase, ideal quadrature, detection noise.
pub fn sample_pair<R: Rng + ?Sized>(
    state: &CatState,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<QuadratureSample> {
    let phi = sample_phase(rng);
    let x = sample_ideal_quadrature(state, phi, rng)?;
    Ok(QuadratureSample {
        x: add_detection_noise(x, noise, rng),
        phi,
    })
}

fn shard_count(n: usize) -> usize {
    n.div_ceil(SHARD_LEN)
}

/// Fill one shard.
pub fn generate_shard(
    meta: &BatchMeta,
    noise: &NoiseModel,
    shard: usize,
) -> Result<Vec<QuadratureSample>> {
    let start = shard * SHARD_LEN;
    let len = SHARD_LEN.min(meta.n.saturating_sub(start));
    let mut rng = shard_rng(meta.seed, meta.replicate, shard as u64);
    (0..len)
        .map(|_| sample_pair(&meta.state, noise, &mut rng))
        .collect()
}

/// Generate a full batch in memory. Shards are drawn in parallel and
/// concatenated in shard order.
pub fn generate_batch(
    state: CatState,
    noise: NoiseModel,
    n: usize,
    seed: u64,
    replicate: u32,
) -> Result<QuadratureBatch> {
    if n == 0 {
        return Err(Error::domain("batch size must be at least 1"));
    }
    state.validate()?;
    let meta = BatchMeta {
        state,
        eta: noise.eta(),
        n,
        seed,
        replicate,
    };
    let shards: Vec<Vec<QuadratureSample>> = (0..shard_count(n))
        .into_par_iter()
        .map(|k| generate_shard(&meta, &noise, k))
        .collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(n);
    for s in shards {
        samples.extend(s);
    }
    Ok(QuadratureBatch { samples, meta })
}

/// Generate a batch shard by shard, handing each shard to `sink` in order.
/// Memory use is bounded by one shard.
pub fn generate_streaming<F>(meta: &BatchMeta, mut sink: F) -> Result<()>
where
    F: FnMut(&[QuadratureSample]) -> Result<()>,
{
    if meta.n == 0 {
        return Err(Error::domain("batch size must be at least 1"));
    }
    let noise = meta.noise()?;
    for k in 0..shard_count(meta.n) {
        let shard = generate_shard(meta, &noise, k)?;
        sink(&shard)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gof;
    use crate::quadrature::CompositeRule;
    use crate::states::{noisy_quadrature_density, quadrature_density};
    use statrs::function::erf::erf;

    fn rng(seed: u64) -> ChaCha20Rng {
        shard_rng(seed, 0, 0)
    }

    #[test]
    fn phase_is_uniform() {
        let mut r = rng(3);
        let draws: Vec<f64> = (0..1_000_000).map(|_| sample_phase(&mut r)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - PI / 2.0).abs() < 0.005);
        let d = gof::ks_statistic(&draws, |x| (x / PI).clamp(0.0, 1.0));
        assert!(d < 0.002, "KS distance {d}");
    }

    #[test]
    fn phase_draws_are_reproducible() {
        let a = sample_phase(&mut rng(42));
        let b = sample_phase(&mut rng(42));
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((0.0..PI).contains(&a));
    }

    #[test]
    fn vacuum_quadrature_is_gaussian() {
        let s = CatState::new(0.0, 0.0);
        let mut r = rng(5);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_ideal_quadrature(&s, 0.7, &mut r).unwrap())
            .collect();
        let d = gof::ks_statistic(&xs, |x| 0.5 * (1.0 + erf(x)));
        assert!(gof::ks_p_value(xs.len(), d) > 0.01);
    }

    fn histogram_test(xs: &[f64], density: impl Fn(f64) -> f64) -> gof::ChiSquareTest {
        let (lo, hi, bins) = (-7.0, 7.0, 100);
        let w = (hi - lo) / bins as f64;
        let mut obs = vec![0.0; bins];
        for &x in xs {
            let k = ((x - lo) / w).floor();
            if k >= 0.0 && (k as usize) < bins {
                obs[k as usize] += 1.0;
            }
        }
        let n = xs.len() as f64;
        let exp: Vec<f64> = (0..bins)
            .map(|k| {
                let a = lo + k as f64 * w;
                n * CompositeRule::new(a, a + w, 1, 12).integrate(&density)
            })
            .collect();
        gof::chi_square(&obs, &exp, 1).unwrap()
    }

    #[test]
    fn cat_quadrature_fits_density() {
        let s = CatState::reference();
        let mut r = rng(6);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_ideal_quadrature(&s, 0.0, &mut r).unwrap())
            .collect();
        let t = histogram_test(&xs, |x| quadrature_density(&s, x, 0.0).unwrap());
        assert!(t.p_value > 0.01, "{t:?}");
    }

    #[test]
    fn envelope_dominates_target() {
        let mut r = rng(8);
        for _ in 0..50 {
            let radius: f64 = r.gen_range(0.0..4.0);
            let angle: f64 = r.gen_range(0.0..2.0 * PI);
            let s = CatState::new(radius * angle.cos(), radius * angle.sin());
            let phi = sample_phase(&mut r);
            let env = Envelope::new(&s, phi);
            let mut worst: f64 = 0.0;
            for k in -2000..=2000 {
                let x = k as f64 * 0.005;
                let g = env.density(x);
                if g > 1e-300 {
                    worst = worst.max(quadrature_density(&s, x, phi).unwrap() / g);
                }
            }
            assert!(worst <= 3.0);
            assert!(worst <= env.bound() * (1.0 + 1e-12));
            assert!(1.0 / env.bound() >= 0.5, "acceptance below one half");
        }
    }

    #[test]
    fn noise_at_full_efficiency_is_identity() {
        let noise = NoiseModel::new(1.0).unwrap();
        let mut r = rng(9);
        for x in [-2.5, 0.0, 1.0, 3.7] {
            assert_eq!(add_detection_noise(x, &noise, &mut r), x);
        }
    }

    #[test]
    fn noise_variance() {
        let noise = NoiseModel::new(0.45).unwrap();
        let mut r = rng(10);
        let ys: Vec<f64> = (0..1_000_000)
            .map(|_| add_detection_noise(0.0, &noise, &mut r))
            .collect();
        let var = ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64;
        assert!((var - 0.275).abs() < 0.275 * 0.02, "variance {var}");
    }

    #[test]
    fn composed_pipeline_fits_noisy_density() {
        let s = CatState::reference();
        let noise = NoiseModel::new(0.45).unwrap();
        let mut r = rng(12);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                let x = sample_ideal_quadrature(&s, 0.0, &mut r).unwrap();
                add_detection_noise(x, &noise, &mut r)
            })
            .collect();
        let t = histogram_test(&xs, |x| noisy_quadrature_density(&s, &noise, x, 0.0).unwrap());
        assert!(t.p_value > 0.01, "{t:?}");
    }

    #[test]
    fn batches_are_deterministic_and_separated() {
        let s = CatState::reference();
        let noise = NoiseModel::new(0.45).unwrap();
        let a = generate_batch(s, noise, 10, 1, 0).unwrap();
        let b = generate_batch(s, noise, 10, 1, 0).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = generate_batch(s, noise, 10, 1, 1).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(a.samples.iter().all(|p| (0.0..=PI).contains(&p.phi)));
        assert!(generate_batch(s, noise, 0, 1, 0).is_err());
    }

    #[test]
    fn streaming_matches_in_memory() {
        let s = CatState::new(1.0, -0.5);
        let noise = NoiseModel::new(0.8).unwrap();
        let n = SHARD_LEN + 123;
        let batch = generate_batch(s, noise, n, 77, 3).unwrap();
        let mut streamed = Vec::new();
        generate_streaming(&batch.meta, |shard| {
            streamed.extend_from_slice(shard);
            Ok(())
        })
        .unwrap();
        assert_eq!(streamed, batch.samples);
    }
}
