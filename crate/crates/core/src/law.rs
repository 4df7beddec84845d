//! Critical offspring laws and symmetric lattice step distributions.

use crate::error::{Error, Result};
use crate::rng::Stream;
use rand::Rng;
use smallvec::{smallvec, SmallVec};

pub const PROB_TOL: f64 = 1e-12;

/// A lattice site. Inline storage covers every dimension used in practice.
pub type Point = SmallVec<[i64; 5]>;

pub fn origin(dim: usize) -> Point {
    smallvec![0; dim]
}

/// A critical offspring distribution with finite support `0..=m_max`.
///
/// Criticality (mean exactly 1) is a validated invariant, not a convention:
/// the survival recursion and the moment recursions both rely on it.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    size_biased_cumulative: Vec<f64>,
}

impl OffspringLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidLaw("empty probability table".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidLaw("probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidLaw(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let mean: f64 = probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        if (mean - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidLaw(format!(
                "offspring mean is {mean}, law must be critical"
            )));
        }
        let var: f64 = probs
            .iter()
            .enumerate()
            .map(|(m, p)| (m as f64) * (m as f64 - 1.0) * p)
            .sum();
        if var <= 0.0 {
            return Err(Error::InvalidLaw(
                "offspring variance must be positive".into(),
            ));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        let mut size_biased_cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for (m, p) in probs.iter().enumerate() {
            acc += m as f64 * p; // total mass 1 by criticality
            size_biased_cumulative.push(acc);
        }
        Ok(Self {
            probs,
            cumulative,
            size_biased_cumulative,
        })
    }

    /// Binary branching: p_0 = p_2 = 1/2.
    pub fn binary() -> Self {
        Self::new(vec![0.5, 0.0, 0.5]).expect("binary law is valid")
    }

    /// Poisson(1) truncated at `m_max`, renormalized, then re-centered to
    /// mean exactly 1 by moving mass delta = (1 - mean)/m_max from p_0 to
    /// p_{m_max}. This keeps the total at 1 while restoring criticality.
    pub fn poisson1(m_max: usize) -> Result<Self> {
        if m_max < 2 {
            return Err(Error::InvalidLaw("poisson1 needs m_max >= 2".into()));
        }
        let mut probs = Vec::with_capacity(m_max + 1);
        let mut term = (-1.0f64).exp();
        for m in 0..=m_max {
            if m > 0 {
                term /= m as f64;
            }
            probs.push(term);
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        let mean: f64 = probs.iter().enumerate().map(|(m, p)| m as f64 * p).sum();
        let delta = (1.0 - mean) / m_max as f64;
        probs[0] -= delta;
        probs[m_max] += delta;
        Self::new(probs)
    }

    pub fn m_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, m: usize) -> f64 {
        self.probs.get(m).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// sigma_p^2 = sum m(m-1) p_m; equals the second factorial moment.
    pub fn sigma_p_sq(&self) -> f64 {
        self.factorial_moment(2)
    }

    /// f_j = sum_{m >= j} m!/(m-j)! p_m. f_0 = 1 and f_1 = 1 by criticality.
    pub fn factorial_moment(&self, j: usize) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let mut total = 0.0;
        for (m, &p) in self.probs.iter().enumerate().skip(j) {
            let mut falling = 1.0;
            for i in 0..j {
                falling *= (m - i) as f64;
            }
            total += falling * p;
        }
        total
    }

    /// Probability generating function g(s) = sum p_m s^m (Horner form).
    pub fn pgf(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for &p in self.probs.iter().rev() {
            acc = acc * s + p;
        }
        acc
    }

    pub fn sample(&self, rng: &mut Stream) -> usize {
        let u: f64 = rng.gen();
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) | Err(i) => i.min(self.m_max()),
        }
    }

    /// Samples the size-biased total offspring: P(l) = l p_l, l >= 1.
    pub fn sample_size_biased(&self, rng: &mut Stream) -> usize {
        let u: f64 = rng.gen();
        match self
            .size_biased_cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) | Err(i) => i.min(self.m_max()).max(1),
        }
    }
}

/// A symmetric finite-support step distribution on Z^d with a real Fourier
/// transform D^(k) = sum_x D(x) cos(k.x).
#[derive(Debug, Clone)]
pub struct StepLaw {
    dim: usize,
    support: Vec<(Point, f64)>,
    cumulative: Vec<f64>,
    uniform: bool,
    delta: f64,
}

impl StepLaw {
    pub fn new(dim: usize, support: Vec<(Point, f64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidStep("dimension must be positive".into()));
        }
        if support.is_empty() {
            return Err(Error::InvalidStep("empty support".into()));
        }
        let mut sorted = support;
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        for (x, p) in &sorted {
            if x.len() != dim {
                return Err(Error::InvalidStep(format!(
                    "support point {x:?} has wrong dimension"
                )));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidStep("probabilities must lie in [0, 1]".into()));
            }
            let neg: Point = x.iter().map(|c| -c).collect();
            let mirror = sorted
                .binary_search_by(|probe| probe.0.cmp(&neg))
                .ok()
                .map(|i| sorted[i].1);
            if mirror.map_or(true, |q| (q - p).abs() > PROB_TOL) {
                return Err(Error::InvalidStep(format!(
                    "support is not symmetric at {x:?}"
                )));
            }
        }
        let total: f64 = sorted.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidStep(format!(
                "step probabilities sum to {total}, not 1"
            )));
        }
        let sigma_sq: f64 = sorted
            .iter()
            .map(|(x, p)| p * x.iter().map(|c| (*c as f64).powi(2)).sum::<f64>())
            .sum();
        if sigma_sq <= 0.0 {
            return Err(Error::InvalidStep("step variance must be positive".into()));
        }
        let mut cumulative = Vec::with_capacity(sorted.len());
        let mut acc = 0.0;
        for (_, p) in &sorted {
            acc += p;
            cumulative.push(acc);
        }
        let first = sorted[0].1;
        let uniform = sorted.iter().all(|(_, p)| (p - first).abs() <= PROB_TOL);
        Ok(Self {
            dim,
            support: sorted,
            cumulative,
            uniform,
            delta: 0.5,
        })
    }

    /// Nearest-neighbour step: D(+-e_i) = 1/(2d).
    pub fn simple(dim: usize) -> Self {
        let p = 1.0 / (2 * dim) as f64;
        let mut support = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            for sign in [-1i64, 1] {
                let mut x = origin(dim);
                x[i] = sign;
                support.push((x, p));
            }
        }
        Self::new(dim, support).expect("simple step is valid")
    }

    /// Spread-out step: uniform over 0 < ||x||_inf <= L.
    pub fn spread_out(dim: usize, l: i64) -> Result<Self> {
        if l < 1 {
            return Err(Error::InvalidStep("spread-out range must be >= 1".into()));
        }
        let offsets = box_offsets(dim, l);
        let p = 1.0 / offsets.len() as f64;
        Self::new(dim, offsets.into_iter().map(|x| (x, p)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[(Point, f64)] {
        &self.support
    }

    /// sigma^2 = sum |x|^2 D(x) (Euclidean norm).
    pub fn sigma_sq(&self) -> f64 {
        self.support
            .iter()
            .map(|(x, p)| p * x.iter().map(|c| (*c as f64).powi(2)).sum::<f64>())
            .sum()
    }

    /// The declared exponent for the (2+2delta)-moment, always finite here
    /// because the support is finite.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// D^(k) = sum_x D(x) cos(k.x); real by symmetry.
    pub fn fourier(&self, k: &[f64]) -> f64 {
        debug_assert_eq!(k.len(), self.dim);
        self.support
            .iter()
            .map(|(x, p)| {
                let dot: f64 = x.iter().zip(k).map(|(c, kc)| *c as f64 * kc).sum();
                p * dot.cos()
            })
            .sum()
    }

    pub fn sample(&self, rng: &mut Stream) -> &Point {
        if self.uniform {
            return &self.support[rng.gen_range(0..self.support.len())].0;
        }
        let u: f64 = rng.gen();
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&u).unwrap())
        {
            Ok(i) | Err(i) => i.min(self.support.len() - 1),
        };
        &self.support[i].0
    }
}

/// All offsets with 0 < ||x||_inf <= l.
pub fn box_offsets(dim: usize, l: i64) -> Vec<Point> {
    let mut offsets = Vec::new();
    let mut cur = origin(dim);
    fill_box(dim, l, 0, &mut cur, &mut offsets);
    offsets.retain(|x| x.iter().any(|&c| c != 0));
    offsets
}

fn fill_box(dim: usize, l: i64, axis: usize, cur: &mut Point, out: &mut Vec<Point>) {
    if axis == dim {
        out.push(cur.clone());
        return;
    }
    for v in -l..=l {
        cur[axis] = v;
        fill_box(dim, l, axis + 1, cur, out);
    }
    cur[axis] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn binary_law_basics() {
        let law = OffspringLaw::binary();
        assert_abs_diff_eq!(law.sigma_p_sq(), 1.0);
        assert_abs_diff_eq!(law.factorial_moment(0), 1.0);
        assert_abs_diff_eq!(law.factorial_moment(1), 1.0);
        assert_abs_diff_eq!(law.factorial_moment(2), 1.0);
        assert_abs_diff_eq!(law.factorial_moment(3), 0.0);
        assert_abs_diff_eq!(law.pgf(0.5), 0.5 + 0.5 * 0.25);
    }

    #[test]
    fn poisson1_is_exactly_critical() {
        let law = OffspringLaw::poisson1(12).unwrap();
        let mean: f64 = law
            .probs()
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum();
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-14);
        let total: f64 = law.probs().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
        // Poisson(1) factorial moments are all 1; truncation perturbs the
        // high orders only slightly.
        assert_abs_diff_eq!(law.factorial_moment(2), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(law.factorial_moment(3), 1.0, epsilon = 1e-5);
    }

    #[test]
    fn poisson1_factorial_moments_match_series_oracle() {
        // Independent oracle: f_j of untruncated Poisson(1) by direct series
        // summation; the truncated law must agree to truncation accuracy.
        let law = OffspringLaw::poisson1(16).unwrap();
        for j in 0..=4usize {
            let mut oracle = 0.0;
            let mut pm = (-1.0f64).exp();
            for m in 0..60 {
                if m > 0 {
                    pm /= m as f64;
                }
                if m >= j {
                    let mut falling = 1.0;
                    for i in 0..j {
                        falling *= (m - i) as f64;
                    }
                    oracle += falling * pm;
                }
            }
            assert_abs_diff_eq!(law.factorial_moment(j), oracle, epsilon = 1e-8);
        }
    }

    #[test]
    fn non_critical_law_rejected() {
        assert!(OffspringLaw::new(vec![0.4, 0.0, 0.6]).is_err());
        assert!(OffspringLaw::new(vec![0.5, 0.4]).is_err());
        assert!(OffspringLaw::new(vec![0.0, 1.0]).is_err()); // zero variance
    }

    #[test]
    fn simple_step_fourier_is_cosine_average() {
        let step = StepLaw::simple(1);
        for k in [0.0, 0.3, 1.7, std::f64::consts::PI] {
            assert_abs_diff_eq!(step.fourier(&[k]), k.cos(), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(step.fourier(&[0.0]), 1.0);
        assert_abs_diff_eq!(step.sigma_sq(), 1.0);
    }

    #[test]
    fn spread_out_fourier_matches_direct_sum() {
        let step = StepLaw::spread_out(2, 1).unwrap();
        assert_eq!(step.support().len(), 8);
        let k = [std::f64::consts::PI, std::f64::consts::PI];
        // brute-force oracle over the 8 support points
        let mut oracle = 0.0;
        for (x, p) in step.support() {
            let dot: f64 = x.iter().zip(&k).map(|(c, kc)| *c as f64 * kc).sum();
            oracle += p * dot.cos();
        }
        assert_abs_diff_eq!(step.fourier(&k), oracle, epsilon = 1e-15);
        assert!(step.fourier(&k).abs() <= 1.0 + 1e-15);
    }

    #[test]
    fn small_k_expansion() {
        let step = StepLaw::spread_out(3, 2).unwrap();
        let s2 = step.sigma_sq();
        let k = [1e-3, -2e-3, 0.5e-3];
        let ksq: f64 = k.iter().map(|x| x * x).sum();
        let expected = 1.0 - s2 * ksq / (2.0 * 3.0);
        assert_abs_diff_eq!(step.fourier(&k), expected, epsilon = 1e-10);
    }

    #[test]
    fn asymmetric_step_rejected() {
        let support = vec![(smallvec::smallvec![1i64], 0.6), (smallvec::smallvec![-1i64], 0.4)];
        assert!(StepLaw::new(1, support).is_err());
    }

    #[test]
    fn sampling_matches_probabilities() {
        let law = OffspringLaw::binary();
        let mut rng = sample_stream(3, 0);
        let n = 100_000;
        let twos = (0..n).filter(|_| law.sample(&mut rng) == 2).count();
        let p = twos as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25f64 / n as f64).sqrt());
        // binary size-biased total is always 2
        for _ in 0..100 {
            assert_eq!(law.sample_size_biased(&mut rng), 2);
        }
    }
}
