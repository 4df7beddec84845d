//! r-point functions in Fourier space: the exact branching random walk
//! recursion, its size-biased (incipient) counterpart, the moment measures
//! of the canonical super-Brownian motion and its incipient version by
//! nested quadrature, and the scaling gap between the two hierarchies.

use crate::error::{Error, Result};
use crate::law::{OffspringLaw, Point, StepLaw};
use crate::quad::integrate;
use crate::tree::enumerate_embedded_prefixes;
use std::collections::HashMap;

/// Hard cap on the number of marked points: ordered-partition growth is
/// Bell-number fast beyond this.
pub const MAX_MARKED: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ExactRecursion,
    Quadrature,
    ClosedForm,
}

#[derive(Debug, Clone, Copy)]
pub struct MomentValue {
    pub value: f64,
    pub imag_residue: f64,
    pub provenance: Provenance,
}

/// An r-point query: one generation and one wave vector per marked point.
#[derive(Debug, Clone)]
pub struct RPointQuery {
    pub times: Vec<usize>,
    pub kvecs: Vec<Vec<f64>>,
}

impl RPointQuery {
    pub fn new(times: Vec<usize>, kvecs: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != kvecs.len() {
            return Err(Error::InvalidConfig(
                "times and wave vectors must be nonempty and of equal length".into(),
            ));
        }
        Ok(Self { times, kvecs })
    }
}

/// An ordered partition of {0..n-1} into nonempty blocks, ordered by their
/// minimal elements, so block 0 always contains 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub blocks: Vec<Vec<usize>>,
}

/// All ordered partitions of {0..n-1} into exactly j blocks (ordered by
/// minima), generated as restricted growth strings.
pub fn partitions(n: usize, j: usize) -> Vec<BlockPartition> {
    let mut out = Vec::new();
    if j == 0 || j > n {
        return out;
    }
    let mut assign = vec![0usize; n];
    grow(&mut assign, 1, 0, j, n, &mut out);
    out
}

fn grow(
    assign: &mut Vec<usize>,
    pos: usize,
    max_used: usize,
    j: usize,
    n: usize,
    out: &mut Vec<BlockPartition>,
) {
    if pos == n {
        if max_used + 1 == j {
            let mut blocks = vec![Vec::new(); j];
            for (i, &b) in assign.iter().enumerate() {
                blocks[b].push(i);
            }
            out.push(BlockPartition { blocks });
        }
        return;
    }
    // pruning: remaining positions must be able to open the missing blocks
    let remaining = n - pos;
    if max_used + 1 + remaining < j {
        return;
    }
    for b in 0..=(max_used + 1).min(j - 1) {
        assign[pos] = b;
        grow(assign, pos + 1, max_used.max(b), j, n, out);
    }
}

fn dhat_block(step: &StepLaw, kvecs: &[Vec<f64>], mask: u32) -> f64 {
    let d = step.dim();
    let mut ksum = vec![0.0; d];
    for (i, k) in kvecs.iter().enumerate() {
        if mask & (1 << i) != 0 {
            for (a, b) in ksum.iter_mut().zip(k) {
                *a += b;
            }
        }
    }
    step.fourier(&ksum)
}

struct TauEval<'a> {
    step: &'a StepLaw,
    times: &'a [usize],
    kvecs: &'a [Vec<f64>],
    memo: HashMap<(u32, u32), f64>,
    fjs: Vec<f64>,
}

impl TauEval<'_> {
    /// tau^ for the marked points in `mask`, each at time times[i] - shift.
    /// Points whose residual time is 0 sit at the current branch point and
    /// carry phase 1, so they are dropped; the empty set evaluates to 1.
    fn eval(&mut self, mask: u32, shift: u32) -> f64 {
        let mut active: u32 = 0;
        let mut idx = Vec::new();
        for i in 0..self.times.len() {
            if mask & (1 << i) != 0 && self.times[i] as u32 > shift {
                active |= 1 << i;
                idx.push(i);
            }
        }
        if idx.is_empty() {
            return 1.0;
        }
        if let Some(&v) = self.memo.get(&(active, shift)) {
            return v;
        }
        let value = if idx.len() == 1 {
            // single point: tau^_n(k) = D^(k)^n by criticality
            let i = idx[0];
            self.step
                .fourier(&self.kvecs[i])
                .powi((self.times[i] as u32 - shift) as i32)
        } else {
            let mut total = 0.0;
            for j in 1..=idx.len() {
                let fj = self.fjs[j];
                if fj == 0.0 {
                    continue;
                }
                let mut psum = 0.0;
                for part in partitions(idx.len(), j) {
                    let mut term = 1.0;
                    for block in &part.blocks {
                        let bmask: u32 = block.iter().map(|&b| 1u32 << idx[b]).sum();
                        term *= dhat_block(self.step, self.kvecs, bmask)
                            * self.eval(bmask, shift + 1);
                    }
                    psum += term;
                }
                total += fj * psum;
            }
            total
        };
        self.memo.insert((active, shift), value);
        value
    }
}

/// The BRW r-point function tau^_{n}(k) by the exact factorial-moment
/// recursion over ordered partitions. Real-valued: the step law is
/// symmetric, so every phase factor collapses to a cosine transform.
pub fn tau_fourier(law: &OffspringLaw, step: &StepLaw, q: &RPointQuery) -> Result<MomentValue> {
    if q.times.len() > MAX_MARKED {
        return Err(Error::OrderTooLarge {
            got: q.times.len(),
            max: MAX_MARKED,
        });
    }
    for k in &q.kvecs {
        if k.len() != step.dim() {
            return Err(Error::InvalidConfig(format!(
                "wave vector of dimension {} against a step law of dimension {}",
                k.len(),
                step.dim()
            )));
        }
    }
    let fjs: Vec<f64> = (0..=q.times.len()).map(|j| law.factorial_moment(j)).collect();
    let mut eval = TauEval {
        step,
        times: &q.times,
        kvecs: &q.kvecs,
        memo: HashMap::new(),
        fjs,
    };
    let mask = (1u32 << q.times.len()) - 1;
    Ok(MomentValue {
        value: eval.eval(mask, 0),
        imag_residue: 0.0,
        provenance: Provenance::ExactRecursion,
    })
}

/// Brute-force tau_{n}(x) = E[prod_j mu_{n_j}(x_j)] by exhaustive
/// enumeration of embedded prefixes up to depth max(n).
pub fn tau_lattice_oracle(
    law: &OffspringLaw,
    step: &StepLaw,
    times: &[usize],
    xs: &[Point],
    bound: usize,
) -> Result<f64> {
    let m = times.iter().copied().max().unwrap_or(0);
    let prefixes = enumerate_embedded_prefixes(law, step, m, bound)?;
    let mut total = 0.0;
    for (prefix, prob) in &prefixes {
        let mut product = 1.0;
        for (n, x) in times.iter().zip(xs) {
            let count = prefix
                .nodes
                .iter()
                .filter(|(w, site)| w.len() == *n && *site == x)
                .count();
            product *= count as f64;
        }
        total += prob * product;
    }
    Ok(total)
}

/// Fourier sum of the lattice oracle: sum_x tau_{n}(x) e^{ik.x}, computed
/// as E[prod_j sum_x mu_{n_j}(x) e^{ik_j.x}] over the enumeration. Returns
/// (real, imag); the imaginary part must vanish for symmetric step laws.
pub fn tau_fourier_oracle(
    law: &OffspringLaw,
    step: &StepLaw,
    q: &RPointQuery,
    bound: usize,
) -> Result<(f64, f64)> {
    let m = q.times.iter().copied().max().unwrap_or(0);
    let prefixes = enumerate_embedded_prefixes(law, step, m, bound)?;
    let (mut re_tot, mut im_tot) = (0.0, 0.0);
    for (prefix, prob) in &prefixes {
        let (mut re, mut im) = (1.0, 0.0);
        for (n, k) in q.times.iter().zip(&q.kvecs) {
            let (mut sre, mut sim) = (0.0, 0.0);
            for (w, site) in &prefix.nodes {
                if w.len() == *n {
                    let dot: f64 = site.iter().zip(k).map(|(c, kc)| *c as f64 * kc).sum();
                    sre += dot.cos();
                    sim += dot.sin();
                }
            }
            let (nre, nim) = (re * sre - im * sim, re * sim + im * sre);
            re = nre;
            im = nim;
        }
        re_tot += prob * re;
        im_tot += prob * im;
    }
    Ok((re_tot, im_tot))
}

/// The IIBRW r-point function: rho^_{m}(k) = tau^_{(mbar, m)}(0, k) with
/// mbar the largest marked time.
pub fn rho_fourier(law: &OffspringLaw, step: &StepLaw, q: &RPointQuery) -> Result<MomentValue> {
    let mbar = *q.times.iter().max().expect("query is nonempty");
    let mut times = Vec::with_capacity(q.times.len() + 1);
    times.push(mbar);
    times.extend_from_slice(&q.times);
    let mut kvecs = Vec::with_capacity(q.kvecs.len() + 1);
    kvecs.push(vec![0.0; step.dim()]);
    kvecs.extend_from_slice(&q.kvecs);
    tau_fourier(law, step, &RPointQuery { times, kvecs })
}

/// Quadrature settings for the super-Brownian moment recursion.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    /// Absolute tolerance at order 2; relaxed tenfold per extra order.
    pub tol: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { tol: 1e-8 }
    }
}

impl QuadConfig {
    fn level_tol(&self, l: usize) -> f64 {
        self.tol * 10f64.powi(l.saturating_sub(2) as i32)
    }
}

fn gaussian_hat(ksum: &[f64], t: f64) -> f64 {
    let d = ksum.len() as f64;
    let ksq: f64 = ksum.iter().map(|x| x * x).sum();
    (-ksq * t / (2.0 * d)).exp()
}

fn sbm_eval(times: &[f64], kvecs: &[Vec<f64>], cfg: &QuadConfig) -> Result<f64> {
    let l = times.len();
    if l == 1 {
        return Ok(gaussian_hat(&kvecs[0], times[0]));
    }
    let tmin = times.iter().cloned().fold(f64::INFINITY, f64::min);
    if tmin <= 0.0 {
        return Ok(0.0);
    }
    let d = kvecs[0].len();
    let mut kall = vec![0.0; d];
    for k in kvecs {
        for (a, b) in kall.iter_mut().zip(k) {
            *a += b;
        }
    }
    // subsets I of {1..l-1} (index 0 stays with the complement)
    let mut splits: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for mask in 1u32..(1 << (l - 1)) {
        let mut inside = Vec::new();
        let mut outside = vec![0usize];
        for i in 1..l {
            if mask & (1 << (i - 1)) != 0 {
                inside.push(i);
            } else {
                outside.push(i);
            }
        }
        splits.push((inside, outside));
    }
    let tol = cfg.level_tol(l);
    let mut failure: Option<Error> = None;
    let value = integrate(
        |t| {
            if failure.is_some() {
                return 0.0;
            }
            let mut sum = 0.0;
            for (inside, outside) in &splits {
                let sub = |ix: &[usize]| -> Result<f64> {
                    let st: Vec<f64> = ix.iter().map(|&i| times[i] - t).collect();
                    let sk: Vec<Vec<f64>> = ix.iter().map(|&i| kvecs[i].clone()).collect();
                    sbm_eval(&st, &sk, cfg)
                };
                match (sub(inside), sub(outside)) {
                    (Ok(a), Ok(b)) => sum += a * b,
                    (Err(e), _) | (_, Err(e)) => {
                        failure = Some(e);
                        return 0.0;
                    }
                }
            }
            gaussian_hat(&kall, t) * sum
        },
        0.0,
        tmin,
        tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(value)
}

/// M^(l)_{t}(k): the l-th moment measure of the canonical super-Brownian
/// motion in Fourier form, by nested adaptive quadrature over the first
/// branch time.
pub fn sbm_moment(times: &[f64], kvecs: &[Vec<f64>], cfg: &QuadConfig) -> Result<MomentValue> {
    if times.is_empty() || times.len() != kvecs.len() {
        return Err(Error::InvalidConfig(
            "times and wave vectors must be nonempty and of equal length".into(),
        ));
    }
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::InvalidConfig("negative time".into()));
    }
    let provenance = if times.len() == 1 {
        Provenance::ClosedForm
    } else {
        Provenance::Quadrature
    };
    Ok(MomentValue {
        value: sbm_eval(times, kvecs, cfg)?,
        imag_residue: 0.0,
        provenance,
    })
}

/// M^(l)_{inf;s}(k) = M^(l+1)_{(sbar, s)}(0, k): the moment measures of the
/// incipient (immortal) canonical super-Brownian motion.
pub fn icsbm_moment(times: &[f64], kvecs: &[Vec<f64>], cfg: &QuadConfig) -> Result<MomentValue> {
    if times.is_empty() || times.len() != kvecs.len() {
        return Err(Error::InvalidConfig(
            "times and wave vectors must be nonempty and of equal length".into(),
        ));
    }
    if times.iter().any(|&t| t <= 0.0) {
        return Err(Error::InvalidConfig(
            "incipient moment measures need strictly positive times".into(),
        ));
    }
    let sbar = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let d = kvecs[0].len();
    let mut full_times = Vec::with_capacity(times.len() + 1);
    full_times.push(sbar);
    full_times.extend_from_slice(times);
    let mut full_k = Vec::with_capacity(kvecs.len() + 1);
    full_k.push(vec![0.0; d]);
    full_k.extend_from_slice(kvecs);
    sbm_moment(&full_times, &full_k, cfg)
}

/// E_inf[X_s(1)^l] = s^l 2^{-l} (l+1)!: the moments of a size-biased
/// exponential with parameter 2/s.
pub fn sb_exp_moment(l: usize, s: f64) -> f64 {
    let mut fact = 1.0;
    for i in 2..=(l + 1) {
        fact *= i as f64;
    }
    s.powi(l as i32) * 0.5f64.powi(l as i32) * fact
}

/// The constants linking a lattice model's r-point functions to the
/// super-Brownian limit: amplitude A, vertex factor V, diffusion factor v,
/// and the error exponent delta.
#[derive(Debug, Clone, Copy)]
pub struct ScalingConstants {
    pub amplitude: f64,
    pub vertex: f64,
    pub diffusion: f64,
    pub delta: f64,
}

impl ScalingConstants {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude <= 0.0 || self.vertex <= 0.0 || self.diffusion <= 0.0 {
            return Err(Error::InvalidConfig(
                "scaling constants A, V, v must be positive".into(),
            ));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::InvalidConfig("delta must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// For critical branching random walk the constants are explicit:
    /// A = 1, V = sigma_p^2, v = 1.
    pub fn brw(law: &OffspringLaw) -> Self {
        Self {
            amplitude: 1.0,
            vertex: law.sigma_p_sq(),
            diffusion: 1.0,
            delta: 0.5,
        }
    }
}

/// Relative distance between the rescaled incipient r-point function at
/// scale m and its super-Brownian limit:
/// |(A^2 V)^{-(r-1)} rho^_{mt}(k/sqrt(sigma^2 v m)) - m^{r-1} M_inf| /
/// (m^{r-1} M_inf).
pub fn scaling_gap(
    law: &OffspringLaw,
    step: &StepLaw,
    consts: &ScalingConstants,
    times: &[f64],
    kvecs: &[Vec<f64>],
    m: usize,
    cfg: &QuadConfig,
) -> Result<f64> {
    consts.validate()?;
    if m == 0 {
        return Err(Error::InvalidConfig("scale m must be positive".into()));
    }
    let r_minus_1 = times.len();
    let lattice_times: Vec<usize> = times.iter().map(|t| (t * m as f64).round() as usize).collect();
    if lattice_times.iter().any(|&n| n == 0) {
        return Err(Error::InvalidConfig(
            "rescaled times must be at least one generation".into(),
        ));
    }
    let scale = (step.sigma_sq() * consts.diffusion * m as f64).sqrt();
    let scaled_k: Vec<Vec<f64>> = kvecs
        .iter()
        .map(|k| k.iter().map(|c| c / scale).collect())
        .collect();
    let rho = rho_fourier(
        law,
        step,
        &RPointQuery {
            times: lattice_times,
            kvecs: scaled_k,
        },
    )?;
    let limit = icsbm_moment(times, kvecs, cfg)?.value;
    let prefactor = (consts.amplitude * consts.amplitude * consts.vertex).powi(r_minus_1 as i32);
    let m_pow = (m as f64).powi(r_minus_1 as i32);
    Ok((rho.value / prefactor - m_pow * limit).abs() / (m_pow * limit))
}
