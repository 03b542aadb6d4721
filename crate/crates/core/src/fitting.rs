//! Learning-curve fits: the exponential CDF `P(n) = 1 − e^{−n/n_c}` and the
//! power law `n_c = α·D^β`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Characteristic number of iterations.
    pub n_c: f64,
    /// RMS deviation between the data and the fitted CDF.
    pub residual: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta: f64,
    /// RMS residual of the log-log regression.
    pub residual: f64,
    pub n_points: usize,
}

/// Empirical learning probability at each distinct success time.
/// `total` counts every trial, converged or not, so the curve tops out at
/// the converged fraction.
pub fn empirical_cdf(success_times: &[u64], total: usize) -> Result<Vec<(f64, f64)>> {
    if total == 0 || success_times.len() > total {
        return Err(invalid_arg(format!(
            "{} successes out of {total} trials",
            success_times.len()
        )));
    }
    let mut sorted = success_times.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &n) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / total as f64;
        match out.last_mut() {
            Some(last) if last.0 == n as f64 => last.1 = p,
            _ => out.push((n as f64, p)),
        }
    }
    Ok(out)
}

fn cdf_sse(points: &[(f64, f64)], n_c: f64) -> f64 {
    points
        .iter()
        .map(|&(n, p)| {
            let r = p - (1.0 - (-n / n_c).exp());
            r * r
        })
        .sum()
}

/// Least-squares `n_c` for `P(n) = 1 − e^{−n/n_c}`.
///
/// The search starts from the mean success time implied by the data, scans
/// six decades around it on a log grid, then refines by golden-section
/// search in `ln n_c`.
pub fn fit_exponential_cdf(points: &[(f64, f64)]) -> Result<ExponentialFit> {
    if points.len() < 2 {
        return Err(Error::FitUndefined(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(&(n, p)) = points
        .iter()
        .find(|(n, p)| !n.is_finite() || *n < 0.0 || !(0.0..=1.0).contains(p))
    {
        return Err(invalid_arg(format!("bad point ({n}, {p})")));
    }
    if points.iter().all(|&(_, p)| p == 0.0) || points.iter().all(|&(_, p)| p == 1.0) {
        return Err(Error::FitUndefined("learning probability is constant".into()));
    }

    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut prev = 0.0;
    let mut mean = 0.0;
    for &(n, p) in &sorted {
        mean += n * (p - prev).max(0.0);
        prev = p;
    }
    if prev > 0.0 {
        mean /= prev;
    }
    let centre = mean.max(sorted.iter().map(|p| p.0).fold(0.0, f64::max) * 1e-3).max(1e-6);

    const GRID: usize = 241;
    let (lo, hi) = (centre.ln() - 3.0 * std::f64::consts::LN_10, centre.ln() + 3.0 * std::f64::consts::LN_10);
    let step = (hi - lo) / (GRID - 1) as f64;
    let sse_at = |ln_nc: f64| cdf_sse(&sorted, ln_nc.exp());
    let best = (0..GRID)
        .map(|i| lo + step * i as f64)
        .min_by(|a, b| sse_at(*a).total_cmp(&sse_at(*b)))
        .expect("nonempty grid");

    let (mut a, mut b) = (best - step, best + step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (sse_at(c), sse_at(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sse_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sse_at(d);
        }
    }
    let n_c = ((a + b) / 2.0).exp();
    Ok(ExponentialFit {
        n_c,
        residual: (cdf_sse(&sorted, n_c) / sorted.len() as f64).sqrt(),
        n_points: sorted.len(),
    })
}

/// Ordinary least squares on `(ln D, ln n_c)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(invalid_arg(format!("need at least 2 points, got {}", points.len())));
    }
    if let Some(&(d, n)) = points
        .iter()
        .find(|(d, n)| !(*d > 0.0 && *n > 0.0 && d.is_finite() && n.is_finite()))
    {
        return Err(invalid_arg(format!("power-law inputs must be positive, got ({d}, {n})")));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(d, n)| (d.ln(), n.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid_arg("all D values are equal"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let residual = (logs
        .iter()
        .map(|p| (p.1 - intercept - beta * p.0).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(PowerLawFit {
        alpha: intercept.exp(),
        beta,
        residual,
        n_points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn geometric_samples(gamma: f64, count: usize, seed: u64) -> Vec<u64> {
        let mut rng = substream(seed, 0);
        (0..count)
            .map(|_| {
                let u: f64 = 1.0 - rng.gen::<f64>();
                (u.ln() / (1.0 - gamma).ln()).ceil().max(1.0) as u64
            })
            .collect()
    }

    #[test]
    fn recovers_synthetic_n_c() {
        // Geometric with 1 − γ = e^{−1/100} has CDF exactly 1 − e^{−n/100}.
        let gamma = 1.0 - (-0.01f64).exp();
        for seed in 0..5 {
            let samples = geometric_samples(gamma, 4000, seed);
            let fit = fit_exponential_cdf(&empirical_cdf(&samples, 4000).unwrap()).unwrap();
            assert!((90.0..=110.0).contains(&fit.n_c), "seed {seed}: {fit:?}");
            assert!(fit.residual < 0.02);
        }
    }

    #[test]
    fn within_three_standard_errors_of_inverse_gamma() {
        let gamma = 0.02;
        let samples = geometric_samples(gamma, 6000, 17);
        let fit = fit_exponential_cdf(&empirical_cdf(&samples, 6000).unwrap()).unwrap();
        // Standard error of the mean of a geometric sample.
        let se = ((1.0 - gamma).sqrt() / gamma) / (6000f64).sqrt();
        assert!((fit.n_c - 1.0 / gamma).abs() < 3.0 * se, "{fit:?}, se {se}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_exponential_cdf(&[(1.0, 0.0), (2.0, 0.0)]),
            Err(Error::FitUndefined(_))
        ));
        assert!(matches!(
            fit_exponential_cdf(&[(1.0, 1.0), (2.0, 1.0)]),
            Err(Error::FitUndefined(_))
        ));
        assert!(fit_exponential_cdf(&[(1.0, 0.5)]).is_err());
        assert!(fit_exponential_cdf(&[(1.0, 0.5), (2.0, 1.5)]).is_err());
        assert!(fit_power_law(&[(2.0, 1.0)]).is_err());
        assert!(fit_power_law(&[(2.0, 1.0), (0.0, 3.0)]).is_err());
        assert!(fit_power_law(&[(2.0, 1.0), (4.0, -3.0)]).is_err());
        assert!(empirical_cdf(&[1, 2, 3], 2).is_err());
    }

    #[test]
    fn empirical_cdf_steps() {
        let cdf = empirical_cdf(&[4, 1, 2, 2], 5).unwrap();
        assert_eq!(cdf, vec![(1.0, 0.2), (2.0, 0.6), (4.0, 0.8)]);
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=7).map(|n| {
            let d = (1u32 << n) as f64;
            (d, 2.0 * d)
        }).collect();
        let fit = fit_power_law(&pts).unwrap();
        assert_relative_eq!(fit.alpha, 2.0, epsilon = 1e-10);
        assert_relative_eq!(fit.beta, 1.0, epsilon = 1e-10);
        assert!(fit.residual < 1e-10);
    }

    proptest! {
        #[test]
        fn power_law_exact_and_scale_equivariant(
            alpha in 0.1f64..100.0, beta in -2.0f64..3.0, c in 0.01f64..100.0
        ) {
            let pts: Vec<(f64, f64)> = (1..=7).map(|n| {
                let d = (1u32 << n) as f64;
                (d, alpha * d.powf(beta))
            }).collect();
            let fit = fit_power_law(&pts).unwrap();
            prop_assert!((fit.alpha / alpha - 1.0).abs() < 1e-9);
            prop_assert!((fit.beta - beta).abs() < 1e-10);
            prop_assert!(fit.residual < 1e-10);
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(d, n)| (d, c * n)).collect();
            let fs = fit_power_law(&scaled).unwrap();
            prop_assert!((fs.alpha / (c * fit.alpha) - 1.0).abs() < 1e-9);
            prop_assert!((fs.beta - fit.beta).abs() < 1e-10);
        }
    }
}
