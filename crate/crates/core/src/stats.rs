//! Monte Carlo summaries and statistical tests used by the experiments.

use rayon::prelude::*;
use statrs::function::gamma::gamma_ur;

use crate::error::{invalid, Result};

/// Runs `f` on trial indices `0..trials` in parallel; results are returned
/// in trial order, so aggregates do not depend on the thread count.
pub fn run_trials<T: Send>(trials: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..trials).into_par_iter().map(f).collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

/// Mean and standard error (`s / sqrt(n)`, unbiased `s`).
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n: 0 };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSe { mean, se: 0.0, n: 1 };
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    MeanSe { mean, se: (ss / (n - 1) as f64 / n as f64).sqrt(), n: n as u64 }
}

/// Standard error of a proportion `p` estimated from `n` trials.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Unbiased sample variance and an asymptotic standard error
/// `sqrt((m4 - s^4) / n)`.
pub fn variance_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n < 2 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n: n as u64 };
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
    MeanSe { mean: s2, se: ((m4 - s2 * s2).max(0.0) / n as f64).sqrt(), n: n as u64 }
}

/// Pearson chi-square goodness-of-fit outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: u32) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, statistic / 2.0)
}

/// Chi-square test of counts against expected cell probabilities.
pub fn chi_square_counts(counts: &[u64], probs: &[f64]) -> Result<GofResult> {
    if counts.len() != probs.len() || counts.len() < 2 {
        return invalid("counts and probabilities must align with at least two cells");
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return invalid("no observations");
    }
    let mut stat = 0.0;
    for (c, p) in counts.iter().zip(probs) {
        let e = p * n as f64;
        if e <= 0.0 {
            return invalid("expected cell count must be positive");
        }
        stat += (*c as f64 - e).powi(2) / e;
    }
    let dof = counts.len() as u32 - 1;
    Ok(GofResult { statistic: stat, dof, p_value: chi_square_sf(stat, dof) })
}

/// Chi-square test of continuous samples against a target CDF using
/// `bins` cells of equal target probability.
pub fn chi_square_gof(samples: &[f64], cdf: impl Fn(f64) -> f64, bins: usize) -> Result<GofResult> {
    if bins < 2 {
        return invalid("need at least two bins");
    }
    let mut counts = vec![0u64; bins];
    for &y in samples {
        let c = cdf(y).clamp(0.0, 1.0);
        let b = ((c * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    chi_square_counts(&counts, &vec![1.0 / bins as f64; bins])
}

/// Splits indices into `bins` groups of (nearly) equal size by ascending key.
/// Ties are ordered by index.
pub fn quantile_bins(keys: &[f64], bins: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|a, b| keys[*a].total_cmp(&keys[*b]).then(a.cmp(b)));
    let n = order.len();
    (0..bins).map(|b| order[b * n / bins..(b + 1) * n / bins].to_vec()).collect()
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_small() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!((binomial_se(0.5, 100) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn chi_square_tail_known_values() {
        // Median of chi-square(2) is 2 ln 2; tail at 3.841 with 1 dof is 0.05.
        assert!((chi_square_sf(2.0 * 2f64.ln(), 2) - 0.5).abs() < 1e-12);
        assert!((chi_square_sf(3.841_458_820_694_124, 1) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn gof_rejects_shifted_samples() {
        let ys: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        assert!(chi_square_gof(&ys, |y| y, 50).unwrap().p_value > 0.99);
        assert!(chi_square_gof(&ys, |y| y * y, 50).unwrap().p_value < 1e-6);
    }

    #[test]
    fn quantile_bins_partition() {
        let keys: Vec<f64> = (0..103).map(|i| ((i * 37) % 103) as f64).collect();
        let bins = quantile_bins(&keys, 20);
        assert_eq!(bins.iter().map(Vec::len).sum::<usize>(), 103);
        for w in bins.windows(2) {
            let hi = w[0].iter().map(|i| keys[*i]).fold(f64::MIN, f64::max);
            let lo = w[1].iter().map(|i| keys[*i]).fold(f64::MAX, f64::min);
            assert!(hi < lo);
        }
    }

    #[test]
    fn spearman_monotone() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 25.0, 100.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }
}
