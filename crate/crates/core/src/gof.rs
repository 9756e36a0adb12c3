//! Goodness-of-fit statistics used to validate the sampler.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Result of a Pearson χ² test.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson χ² test of `observed` counts against `expected` counts.
///
/// Adjacent cells are merged left to right until each expected count is at
/// least 5; `constraints` is the number of fitted constraints (1 when the
/// expected counts were scaled to the observed total).
pub fn chi_square(observed: &[f64], expected: &[f64], constraints: usize) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() {
        return Err(Error::Mismatch(format!(
            "{} observed cells vs {} expected",
            observed.len(),
            expected.len()
        )));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        o_acc += o;
        e_acc += e;
        if e_acc >= 5.0 {
            cells.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => cells.push((o_acc, e_acc)),
        }
    }
    if cells.len() <= constraints {
        return Err(Error::domain("too few cells for a chi-square test"));
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len() - constraints;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::domain(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// Combine independent χ² tests by summing statistics and degrees of freedom.
pub fn combine(tests: &[ChiSquareTest]) -> Result<ChiSquareTest> {
    let statistic = tests.iter().map(|t| t.statistic).sum();
    let dof: usize = tests.iter().map(|t| t.dof).sum();
    if dof == 0 {
        return Err(Error::Empty("chi-square tests"));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::domain(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// One-sample Kolmogorov–Smirnov distance between `data` and `cdf`.
pub fn ks_statistic(data: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the Kolmogorov distribution, Q(λ) = 2 Σ (−1)^{k−1} e^{−2k²λ²}.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS distance `d` from `n` samples (Stephens' correction).
pub fn ks_p_value(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_points() {
        // Classical critical values: Q(1.3581) = 0.05, Q(1.6276) = 0.01.
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let e = vec![100.0; 10];
        let t = chi_square(&e, &e, 1).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 9);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_merges_sparse_cells() {
        let o = [1.0, 2.0, 50.0, 47.0, 0.0];
        let e = [1.5, 1.5, 48.0, 48.0, 1.0];
        let t = chi_square(&o, &e, 1).unwrap();
        // cells: (53, 51), (47, 49) after merging the tails
        assert_eq!(t.dof, 1);
        let expect = 4.0 / 51.0 + 4.0 / 49.0;
        assert!((t.statistic - expect).abs() < 1e-12);
    }

    #[test]
    fn ks_of_uniform_grid_is_small() {
        let data: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&data, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.0005).abs() < 1e-12);
        assert!(ks_p_value(1000, d) > 0.99);
    }
}
