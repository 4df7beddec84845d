//! Scaling harness: rescaled measures, comparison of Monte Carlo output to
//! exact or quadrature moment values, size-biased-exponential moment tests,
//! and mass-exponent fits.

use crate::error::{Error, Result};
use crate::law::{OffspringLaw, Point, StepLaw};
use crate::moments::{rho_fourier, sb_exp_moment, RPointQuery};
use crate::rng::aux_stream;
use crate::stats::{bootstrap_se, line_fit, Summary};
use std::collections::HashMap;

/// X_{n,t}: generation floor(n t) of a population profile, bucketed into the
/// unit cells of the lattice shrunk by sqrt(sigma^2 n) and carrying mass
/// count / n.
#[derive(Debug, Clone)]
pub struct RescaledMeasure {
    pub scale: usize,
    pub times: Vec<f64>,
    pub masses: Vec<HashMap<Point, f64>>,
}

impl RescaledMeasure {
    /// Total mass X_{n,t}(1) = N_{floor(n t)} / n.
    pub fn total_mass(&self, i: usize) -> f64 {
        self.masses[i].values().sum()
    }
}

pub fn rescale(
    populations: &[HashMap<Point, u64>],
    n: usize,
    sigma_sq: f64,
    times: &[f64],
) -> Result<RescaledMeasure> {
    if n == 0 || sigma_sq <= 0.0 {
        return Err(Error::InvalidConfig("need n >= 1 and sigma^2 > 0".into()));
    }
    let side = (sigma_sq * n as f64).sqrt();
    let mut masses = Vec::with_capacity(times.len());
    for &t in times {
        if t < 0.0 {
            return Err(Error::InvalidConfig("negative time".into()));
        }
        let g = (n as f64 * t).floor() as usize;
        if g >= populations.len() {
            return Err(Error::InvalidConfig(format!(
                "profile covers generations < {}, need {g}",
                populations.len()
            )));
        }
        let mut cells: HashMap<Point, f64> = HashMap::new();
        for (x, &c) in &populations[g] {
            let cell: Point = x
                .iter()
                .map(|&coord| (coord as f64 / side).floor() as i64)
                .collect();
            *cells.entry(cell).or_insert(0.0) += c as f64 / n as f64;
        }
        masses.push(cells);
    }
    Ok(RescaledMeasure {
        scale: n,
        times: times.to_vec(),
        masses,
    })
}

/// One moment-order check of the size-biased-exponential limit.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentCheck {
    pub order: usize,
    pub empirical: f64,
    pub se: f64,
    /// exact finite-m moment of N_m/m
    pub exact: f64,
    /// the m -> infinity limit (sigma_p^2)^l 2^{-l} (l+1)!
    pub limit: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SbExpReport {
    pub m: usize,
    pub band_se: f64,
    pub checks: Vec<MomentCheck>,
}

impl SbExpReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Compares the empirical moments of N_m/m samples (drawn under the
/// conditioned sampler) against exact finite-m values from the Fourier
/// recursion, with the limit moments reported alongside as the convergence
/// target. Bootstrap standard errors; pass at `band_se` standard errors.
pub fn sb_exp_test(
    samples: &[f64],
    law: &OffspringLaw,
    step: &StepLaw,
    m: usize,
    max_order: usize,
    band_se: f64,
    resamples: usize,
    seed: u64,
) -> Result<SbExpReport> {
    if samples.len() < 1000 {
        return Err(Error::InsufficientSamples {
            got: samples.len(),
            need: 1000,
        });
    }
    let sigma = law.sigma_p_sq();
    let mut checks = Vec::with_capacity(max_order);
    for l in 1..=max_order {
        let powered: Vec<f64> = samples.iter().map(|x| x.powi(l as i32)).collect();
        let mean = powered.iter().sum::<f64>() / powered.len() as f64;
        let mut rng = aux_stream(seed, l as u64);
        let se = bootstrap_se(&powered, resamples, &mut rng);
        let q = RPointQuery::new(vec![m; l], vec![vec![0.0; step.dim()]; l])?;
        let exact = rho_fourier(law, step, &q)?.value / (m as f64).powi(l as i32);
        let limit = sigma.powi(l as i32) * sb_exp_moment(l, 1.0);
        let z = if se > 0.0 {
            (mean - exact) / se
        } else if (mean - exact).abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        checks.push(MomentCheck {
            order: l,
            empirical: mean,
            se,
            exact,
            limit,
            z,
            pass: z.abs() <= band_se,
        });
    }
    Ok(SbExpReport {
        m,
        band_se,
        checks,
    })
}

/// A weighted log-log slope fit of mass against radius.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FitResult {
    pub exponent: f64,
    pub se: f64,
    pub r_range: (f64, f64),
    /// log-scale residuals of the included points
    pub residuals: Vec<f64>,
    /// nonpositive mass estimates dropped before fitting
    pub excluded: usize,
}

pub fn fit_exponent(radii: &[f64], masses: &[Summary]) -> Result<FitResult> {
    if radii.len() != masses.len() {
        return Err(Error::InvalidConfig("radii and masses must align".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut excluded = 0usize;
    for (&r, s) in radii.iter().zip(masses) {
        if !(s.mean > 0.0) || r <= 0.0 {
            excluded += 1;
            continue;
        }
        xs.push(r.ln());
        ys.push(s.mean.ln());
        // delta method: var(ln mean) ~ (se/mean)^2
        let rel = s.se / s.mean;
        ws.push(if rel > 0.0 && rel.is_finite() {
            1.0 / (rel * rel)
        } else {
            f64::NAN
        });
    }
    if xs.len() < 4 {
        return Err(Error::InvalidConfig(
            "exponent fit needs at least 4 positive scale points".into(),
        ));
    }
    let rmin = xs.iter().cloned().fold(f64::INFINITY, f64::min).exp();
    let rmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    if rmax / rmin < 4.0 - 1e-9 {
        return Err(Error::InvalidConfig(
            "scale points must span a factor of at least 4".into(),
        ));
    }
    // weighted only when every point carries a finite weight
    let weights = if ws.iter().all(|w| w.is_finite()) {
        Some(ws)
    } else {
        None
    };
    let (slope, se) = line_fit(&xs, &ys, weights.as_deref());
    let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
    let ybar = ys.iter().sum::<f64>() / ys.len() as f64;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - ybar - slope * (x - xbar))
        .collect();
    Ok(FitResult {
        exponent: slope,
        se,
        r_range: (rmin, rmax),
        residuals,
        excluded,
    })
}

/// Per-query z-scores of Monte Carlo estimates against exact targets, with
/// an optional free common amplitude fitted first (weighted least squares).
#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentComparison {
    pub amplitude: Option<f64>,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
}

pub fn compare_to_moments(
    estimates: &[Summary],
    targets: &[f64],
    fit_amplitude: bool,
) -> Result<MomentComparison> {
    if estimates.is_empty() || estimates.len() != targets.len() {
        return Err(Error::InvalidConfig(
            "estimates and targets must be nonempty and aligned".into(),
        ));
    }
    let amplitude = if fit_amplitude {
        let (mut num, mut den) = (0.0, 0.0);
        for (e, &t) in estimates.iter().zip(targets) {
            if !(e.se > 0.0) || !e.se.is_finite() {
                return Err(Error::Estimation(
                    "amplitude fit needs a positive finite variance per query".into(),
                ));
            }
            let w = 1.0 / (e.se * e.se);
            num += w * e.mean * t;
            den += w * t * t;
        }
        if den == 0.0 {
            return Err(Error::Estimation("all targets vanish".into()));
        }
        Some(num / den)
    } else {
        None
    };
    let amp = amplitude.unwrap_or(1.0);
    let z_scores: Vec<f64> = estimates
        .iter()
        .zip(targets)
        .map(|(e, &t)| {
            let gap = e.mean - amp * t;
            if e.se > 0.0 && e.se.is_finite() {
                gap / e.se
            } else if gap.abs() <= 1e-12 * t.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let max_abs_z = z_scores.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    Ok(MomentComparison {
        amplitude,
        z_scores,
        max_abs_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::origin;
    use crate::rng::sample_stream;
    use crate::stats::summarize;
    use crate::tree::sample_population_profile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rescale_time_zero_is_unit_mass_over_n() {
        let populations = vec![[(origin(2), 1u64)].into_iter().collect()];
        let r = rescale(&populations, 50, 1.0, &[0.0]).unwrap();
        assert_eq!(r.masses[0].len(), 1);
        assert_abs_diff_eq!(r.total_mass(0), 1.0 / 50.0);
    }

    #[test]
    fn rescale_total_mass_identity() {
        let law = OffspringLaw::binary();
        let step = StepLaw::simple(2);
        let n = 40;
        for i in 0..20 {
            let mut rng = sample_stream(3, i);
            let pops = sample_population_profile(&law, &step, n, &mut rng, 1_000_000).unwrap();
            let r = rescale(&pops, n, step.sigma_sq(), &[0.25, 0.5, 1.0]).unwrap();
            for (j, &t) in [0.25, 0.5, 1.0].iter().enumerate() {
                let g = (n as f64 * t).floor() as usize;
                let nm: u64 = pops[g].values().sum();
                assert_abs_diff_eq!(r.total_mass(j), nm as f64 / n as f64, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rescale_missing_generation_rejected() {
        let populations = vec![[(origin(1), 1u64)].into_iter().collect()];
        assert!(rescale(&populations, 10, 1.0, &[1.0]).is_err());
    }

    #[test]
    fn rescaled_mean_mass_is_one_over_n() {
        // E[X_{n,1}(1)] = E[N_n]/n = 1/n by the martingale property
        let law = OffspringLaw::binary();
        let step = StepLaw::simple(1);
        let n = 100;
        let samples = 20_000;
        let mut masses = Vec::with_capacity(samples);
        for i in 0..samples {
            let mut rng = sample_stream(5, i as u64);
            let pops = sample_population_profile(&law, &step, n, &mut rng, 1_000_000).unwrap();
            let r = rescale(&pops, n, step.sigma_sq(), &[1.0]).unwrap();
            masses.push(r.total_mass(0));
        }
        let s = summarize(&masses);
        assert!(
            (s.mean - 0.01).abs() <= 3.0 * s.se,
            "mean {} se {}",
            s.mean,
            s.se
        );
    }

    #[test]
    fn sb_exp_test_constant_samples_mean_is_exact() {
        let law = OffspringLaw::binary();
        let step = StepLaw::simple(1);
        let samples = vec![2.5; 1000];
        let report = sb_exp_test(&samples, &law, &step, 10, 2, 3.0, 200, 7).unwrap();
        assert_abs_diff_eq!(report.checks[0].empirical, 2.5);
        assert_abs_diff_eq!(report.checks[1].empirical, 6.25);
        assert_abs_diff_eq!(report.checks[0].se, 0.0);
    }

    #[test]
    fn sb_exp_test_rejects_small_samples() {
        let law = OffspringLaw::binary();
        let step = StepLaw::simple(1);
        assert!(matches!(
            sb_exp_test(&vec![1.0; 999], &law, &step, 10, 2, 3.0, 100, 7),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn sb_exp_exact_targets_match_known_values() {
        // first moment target (1 + sigma^2 m)/m, limit sigma^2
        let law = OffspringLaw::binary();
        let step = StepLaw::simple(1);
        let m = 100;
        let samples = vec![1.0; 1000];
        let report = sb_exp_test(&samples, &law, &step, m, 2, 3.0, 100, 7).unwrap();
        assert_abs_diff_eq!(report.checks[0].exact, 1.01, epsilon = 1e-10);
        assert_abs_diff_eq!(report.checks[0].limit, 1.0, epsilon = 1e-12);
        // limit second moment: sigma^4 * 2^{-2} * 3! = 1.5
        assert_abs_diff_eq!(report.checks[1].limit, 1.5, epsilon = 1e-12);
        assert!(report.checks[1].exact > report.checks[0].exact);
    }

    #[test]
    fn fit_exponent_exact_power_laws() {
        let radii = vec![4.0f64, 8.0, 16.0, 32.0];
        let quartic: Vec<Summary> = radii
            .iter()
            .map(|&r| Summary {
                n: 1,
                mean: 3.0 * r.powi(4),
                se: 0.0,
            })
            .collect();
        let f = fit_exponent(&radii, &quartic).unwrap();
        assert_abs_diff_eq!(f.exponent, 4.0, epsilon = 1e-9);
        let quadratic: Vec<Summary> = radii
            .iter()
            .map(|&r| Summary {
                n: 1,
                mean: 0.5 * r.powi(2),
                se: 0.0,
            })
            .collect();
        let f = fit_exponent(&radii, &quadratic).unwrap();
        assert_abs_diff_eq!(f.exponent, 2.0, epsilon = 1e-9);
        assert_eq!(f.excluded, 0);
        assert_eq!(f.r_range, (4.0, 32.0));
    }

    #[test]
    fn fit_exponent_preconditions() {
        let s = |m: f64| Summary {
            n: 1,
            mean: m,
            se: 0.1,
        };
        // too few points
        assert!(fit_exponent(&[1.0, 2.0, 4.0], &[s(1.0), s(2.0), s(3.0)]).is_err());
        // insufficient span
        assert!(fit_exponent(
            &[1.0, 1.5, 2.0, 3.0],
            &[s(1.0), s(1.5), s(2.0), s(3.0)]
        )
        .is_err());
        // nonpositive estimates are dropped, possibly below the minimum
        assert!(fit_exponent(
            &[1.0, 2.0, 4.0, 8.0],
            &[s(-1.0), s(2.0), s(3.0), s(4.0)]
        )
        .is_err());
    }

    #[test]
    fn fit_exponent_excludes_nonpositive() {
        let radii = vec![2.0f64, 4.0, 8.0, 16.0, 32.0];
        let masses: Vec<Summary> = radii
            .iter()
            .map(|&r| Summary {
                n: 1,
                mean: if r == 2.0 { -1.0 } else { r.powi(3) },
                se: 0.0,
            })
            .collect();
        let f = fit_exponent(&radii, &masses).unwrap();
        assert_eq!(f.excluded, 1);
        assert_abs_diff_eq!(f.exponent, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn compare_exact_inputs_gap_zero() {
        let est = vec![
            Summary {
                n: 1,
                mean: 1.0,
                se: 0.0,
            },
            Summary {
                n: 1,
                mean: 2.5,
                se: 0.0,
            },
        ];
        let cmp = compare_to_moments(&est, &[1.0, 2.5], false).unwrap();
        assert_abs_diff_eq!(cmp.max_abs_z, 0.0);
    }

    #[test]
    fn compare_scores_in_se_units() {
        let est = vec![Summary {
            n: 100,
            mean: 1.2,
            se: 0.1,
        }];
        let cmp = compare_to_moments(&est, &[1.0], false).unwrap();
        assert_abs_diff_eq!(cmp.z_scores[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn amplitude_fit_recovers_common_factor() {
        let targets = vec![1.0, 2.0, 4.0];
        let est: Vec<Summary> = targets
            .iter()
            .map(|&t| Summary {
                n: 100,
                mean: 3.7 * t,
                se: 0.05,
            })
            .collect();
        let cmp = compare_to_moments(&est, &targets, true).unwrap();
        assert_abs_diff_eq!(cmp.amplitude.unwrap(), 3.7, epsilon = 1e-12);
        assert_abs_diff_eq!(cmp.max_abs_z, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn amplitude_fit_rejects_degenerate_variance() {
        let est = vec![Summary {
            n: 1,
            mean: 1.0,
            se: 0.0,
        }];
        assert!(compare_to_moments(&est, &[1.0], true).is_err());
    }
}
