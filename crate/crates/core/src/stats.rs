//! Small statistical utilities shared by the samplers and the harness:
//! moment summaries, bootstrap standard errors, chi-square uniformity,
//! and a two-sample Kolmogorov-Smirnov test.

use crate::rng::Stream;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    if n == 0 {
        return Summary {
            n: 0,
            mean: f64::NAN,
            se: f64::NAN,
        };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Summary {
            n,
            mean,
            se: f64::INFINITY,
        };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Summary {
        n,
        mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Mean and SE of a ratio estimator sum(w*f)/sum(w), linearized (delta method).
pub fn ratio_summary(weights: &[f64], values: &[f64]) -> Summary {
    assert_eq!(weights.len(), values.len());
    let n = weights.len();
    let wbar = weights.iter().sum::<f64>() / n as f64;
    let wf: Vec<f64> = weights
        .iter()
        .zip(values)
        .map(|(w, f)| w * f)
        .collect();
    let wfbar = wf.iter().sum::<f64>() / n as f64;
    let r = wfbar / wbar;
    // influence values of the ratio
    let infl: Vec<f64> = wf
        .iter()
        .zip(weights)
        .map(|(a, w)| (a - r * w) / wbar)
        .collect();
    let s = summarize(&infl);
    Summary {
        n,
        mean: r,
        se: s.se,
    }
}

/// Bootstrap standard error of the mean with `resamples` resamples.
pub fn bootstrap_se(xs: &[f64], resamples: usize, rng: &mut Stream) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut s = 0.0;
        for _ in 0..n {
            s += xs[rng.gen_range(0..n)];
        }
        means.push(s / n as f64);
    }
    let m = means.iter().sum::<f64>() / resamples as f64;
    (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (resamples as f64 - 1.0)).sqrt()
}

/// Chi-square goodness-of-fit p-value for observed counts against expected
/// counts (same total). Returns the upper-tail p.
pub fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    let chi = ChiSquared::new(dof).expect("dof > 0");
    1.0 - chi.cdf(stat)
}

/// Two-sample Kolmogorov-Smirnov test; returns (statistic, asymptotic p).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len(), ys.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    // Kolmogorov distribution tail, standard series with small-sample correction.
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1.0f64).powi(k as i32 + 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Least-squares line fit y = a + b x; returns (slope, slope SE).
/// With `weights = None` the fit is unweighted.
pub fn line_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let w: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let xbar = xs.iter().zip(&w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ybar = ys.iter().zip(&w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - xbar).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(&w)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    // residual variance -> slope SE
    let dof = (n as f64 - 2.0).max(1.0);
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .zip(&w)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let se = (ss_res / dof / sxx).sqrt();
    (slope, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn summary_of_constants() {
        let s = summarize(&[3.0; 10]);
        assert_abs_diff_eq!(s.mean, 3.0);
        assert_abs_diff_eq!(s.se, 0.0);
    }

    #[test]
    fn exact_line_fit() {
        let xs: Vec<f64> = (1..=5).map(|i| (i as f64).ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 4.0 * x).collect();
        let (slope, _) = line_fit(&xs, &ys, None);
        assert_abs_diff_eq!(slope, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn ks_same_distribution_has_large_p() {
        let mut rng = sample_stream(1, 0);
        let a: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
        let (_, p) = ks_two_sample(&a, &b);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn ks_separated_distributions_reject() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..500).map(|i| i as f64 + 1000.0).collect();
        let (d, p) = ks_two_sample(&a, &b);
        assert_abs_diff_eq!(d, 1.0);
        assert!(p < 1e-6);
    }

    #[test]
    fn chi_square_uniform_counts() {
        let p = chi_square_p(&[100, 101, 99], &[100.0, 100.0, 100.0]);
        assert!(p > 0.9);
    }

    #[test]
    fn ratio_estimator_constant_statistic_is_exact() {
        let w = vec![1.0, 2.0, 3.0, 0.5];
        let f = vec![1.0; 4];
        let s = ratio_summary(&w, &f);
        assert_abs_diff_eq!(s.mean, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.se, 0.0, epsilon = 1e-15);
    }
}
