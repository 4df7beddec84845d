//! Spread-out oriented percolation on Z^d x Z_+: cluster growth, survival
//! curves, a criticality search, incipient-cluster estimators in both the
//! size-biased and conditioned constructions, r-point statistics, ball
//! masses, susceptibility, and disjoint-survival probabilities.

use crate::error::{Error, Result};
use crate::law::{box_offsets, origin, Point, StepLaw, PROB_TOL};
use crate::maxflow::max_flow_capped;
use crate::rng::{sample_stream, Stream};
use crate::stats::{ratio_summary, summarize, Summary};
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use std::collections::{HashMap, HashSet};

/// Default cap on frontier size per generation.
pub const DEFAULT_FRONTIER_CAP: usize = 2_000_000;

/// Default cap on total cluster size for subcritical sampling.
pub const DEFAULT_CLUSTER_CAP: u64 = 10_000_000;

/// Bond structure: each directed bond ((x,n), (x+y,n+1)) with offset y is
/// occupied independently with the offset's occupancy probability.
#[derive(Debug, Clone)]
pub struct OPConfig {
    dim: usize,
    offsets: Vec<Point>,
    /// the normalized step weights D(y); for the contact discretization the
    /// occupancies are stored directly and p is fixed at 1
    d_probs: Vec<f64>,
    p: f64,
    /// set when all occupancies are equal (the spread-out fast path)
    uniform_occupancy: Option<f64>,
}

impl OPConfig {
    fn build(dim: usize, offsets: Vec<Point>, d_probs: Vec<f64>, p: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if offsets.is_empty() || offsets.len() != d_probs.len() {
            return Err(Error::InvalidConfig("empty or mismatched bond table".into()));
        }
        if p < 0.0 {
            return Err(Error::InvalidConfig("bond weight p must be >= 0".into()));
        }
        for (x, &q) in offsets.iter().zip(&d_probs) {
            if x.len() != dim {
                return Err(Error::InvalidConfig(format!(
                    "offset {x:?} has wrong dimension"
                )));
            }
            if !(0.0..=1.0).contains(&q) || p * q > 1.0 + PROB_TOL {
                return Err(Error::InvalidConfig(format!(
                    "occupancy probability {} outside [0, 1]",
                    p * q
                )));
            }
        }
        let q0 = p * d_probs[0];
        let uniform_occupancy = if d_probs
            .iter()
            .all(|&q| (p * q - q0).abs() <= PROB_TOL)
        {
            Some(q0)
        } else {
            None
        };
        Ok(Self {
            dim,
            offsets,
            d_probs,
            p,
            uniform_occupancy,
        })
    }

    /// Uniform spread-out bonds: D(y) = 1/((2L+1)^d - 1) on 0 < ||y||_inf <= L,
    /// occupied with probability p D(y), so p is the expected number of
    /// occupied bonds per vertex.
    pub fn spread_out(dim: usize, l: i64, p: f64) -> Result<Self> {
        if l < 1 {
            return Err(Error::InvalidConfig("spread-out range must be >= 1".into()));
        }
        let offsets = box_offsets(dim, l);
        let q = 1.0 / offsets.len() as f64;
        let d_probs = vec![q; offsets.len()];
        Self::build(dim, offsets, d_probs, p)
    }

    /// Explicit step table D (must sum to 1), occupancy p D(y).
    pub fn explicit(dim: usize, table: Vec<(Point, f64)>, p: f64) -> Result<Self> {
        let total: f64 = table.iter().map(|(_, q)| q).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidConfig(format!(
                "step weights sum to {total}, not 1"
            )));
        }
        let (offsets, d_probs): (Vec<Point>, Vec<f64>) = table.into_iter().unzip();
        Self::build(dim, offsets, d_probs, p)
    }

    /// Discretized contact process: the vertical bond ((x,n),(x,n+1)) is
    /// occupied with probability 1 - eps, and ((x,n),(x+y,n+1)) with
    /// probability lambda eps D(y) for y != 0.
    pub fn contact(step: &StepLaw, lambda: f64, eps: f64) -> Result<Self> {
        if !(0.0 < eps && eps < 1.0) || lambda < 0.0 {
            return Err(Error::InvalidConfig(
                "contact discretization needs eps in (0,1) and lambda >= 0".into(),
            ));
        }
        let dim = step.dim();
        let mut offsets = vec![origin(dim)];
        let mut occupancies = vec![1.0 - eps];
        for (y, d) in step.support() {
            if y.iter().all(|&c| c == 0) {
                return Err(Error::InvalidConfig(
                    "contact step law must not carry mass at 0".into(),
                ));
            }
            let q = lambda * eps * d;
            if q > 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "contact occupancy {q} exceeds 1; reduce eps or lambda"
                )));
            }
            offsets.push(y.clone());
            occupancies.push(q);
        }
        Self::build(dim, offsets, occupancies, 1.0)
    }

    /// Same bond structure at a different weight p.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::build(self.dim, self.offsets.clone(), self.d_probs.clone(), p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Occupancy probability of the bond with offset index i.
    pub fn occupancy(&self, i: usize) -> f64 {
        self.p * self.d_probs[i]
    }

    pub fn offsets(&self) -> &[Point] {
        &self.offsets
    }

    /// Expected number of occupied bonds per vertex.
    pub fn mean_bonds(&self) -> f64 {
        (0..self.offsets.len()).map(|i| self.occupancy(i)).sum()
    }
}

/// One sampled cluster of the space-time origin up to a horizon.
#[derive(Debug, Clone)]
pub struct ClusterSample {
    /// occupied sites per generation, deduplicated; empty after death
    pub generations: Vec<Vec<Point>>,
    /// occupied bonds (generation of the source, source, target), recorded
    /// only on request
    pub bonds: Option<Vec<(usize, Point, Point)>>,
}

impl ClusterSample {
    pub fn horizon(&self) -> usize {
        self.generations.len() - 1
    }

    /// S_k: the cluster reaches generation k.
    pub fn survives(&self, k: usize) -> bool {
        !self.generations[k].is_empty()
    }

    /// N_k: number of generation-k sites.
    pub fn n_at(&self, k: usize) -> u64 {
        self.generations[k].len() as u64
    }

    pub fn total_size(&self) -> u64 {
        self.generations.iter().map(|g| g.len() as u64).sum()
    }

    /// Number of cluster sites (y, m) with Euclidean |y| <= r.
    pub fn ball_mass(&self, r: f64) -> u64 {
        let r_sq = r * r;
        self.generations
            .iter()
            .flatten()
            .filter(|y| {
                y.iter().map(|&c| (c * c) as f64).sum::<f64>() <= r_sq + 1e-12
            })
            .count() as u64
    }
}

fn sample_targets(
    cfg: &OPConfig,
    x: &Point,
    rng: &mut Stream,
    mut visit: impl FnMut(Point),
) {
    let n_off = cfg.offsets.len();
    if let Some(q) = cfg.uniform_occupancy {
        // exact equivalent of independent Bernoulli bonds: draw the bond
        // count, then a uniform subset of offsets of that size
        let bin = Binomial::new(n_off as u64, q).expect("valid binomial");
        let count = bin.sample(rng) as usize;
        if count == 0 {
            return;
        }
        // BTreeSet keeps the visit order deterministic for a given stream
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < count {
            chosen.insert(rng.gen_range(0..n_off));
        }
        for i in chosen {
            let y: Point = x
                .iter()
                .zip(cfg.offsets[i].iter())
                .map(|(a, b)| a + b)
                .collect();
            visit(y);
        }
    } else {
        for i in 0..n_off {
            if rng.gen::<f64>() < cfg.occupancy(i) {
                let y: Point = x
                    .iter()
                    .zip(cfg.offsets[i].iter())
                    .map(|(a, b)| a + b)
                    .collect();
                visit(y);
            }
        }
    }
}

/// Grows the cluster of (0, 0) generation by generation up to horizon n.
pub fn sample_cluster(
    cfg: &OPConfig,
    n: usize,
    rng: &mut Stream,
    record_bonds: bool,
    frontier_cap: usize,
) -> Result<ClusterSample> {
    let mut generations: Vec<Vec<Point>> = Vec::with_capacity(n + 1);
    generations.push(vec![origin(cfg.dim)]);
    let mut bonds = if record_bonds { Some(Vec::new()) } else { None };
    for gen in 0..n {
        let mut seen: HashSet<Point> = HashSet::new();
        let mut next: Vec<Point> = Vec::new();
        for x in &generations[gen] {
            sample_targets(cfg, x, rng, |y| {
                if let Some(b) = bonds.as_mut() {
                    b.push((gen, x.clone(), y.clone()));
                }
                if seen.insert(y.clone()) {
                    next.push(y);
                }
            });
        }
        if next.len() > frontier_cap {
            return Err(Error::FrontierCap {
                size: next.len(),
                cap: frontier_cap,
            });
        }
        generations.push(next);
        if generations[gen + 1].is_empty() {
            // extinct: pad the remaining generations
            while generations.len() <= n {
                generations.push(Vec::new());
            }
            break;
        }
    }
    Ok(ClusterSample { generations, bonds })
}

/// Monte Carlo survival curve with binomial standard errors. Computed from
/// per-sample death times, so theta^_k is nonincreasing in k by construction.
#[derive(Debug, Clone)]
pub struct ThetaCurve {
    pub thetas: Vec<f64>,
    pub ses: Vec<f64>,
    pub samples: usize,
}

impl ThetaCurve {
    pub fn theta(&self, k: usize) -> f64 {
        self.thetas[k]
    }
}

pub fn estimate_theta(cfg: &OPConfig, n: usize, samples: usize, seed: u64) -> Result<ThetaCurve> {
    let depths: Vec<usize> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(seed, i);
            let c = sample_cluster(cfg, n, &mut rng, false, DEFAULT_FRONTIER_CAP)?;
            Ok((0..=n).take_while(|&k| c.survives(k)).count() - 1)
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut survive_counts = vec![0u64; n + 1];
    for &d in &depths {
        for k in 0..=d {
            survive_counts[k] += 1;
        }
    }
    let m = samples as f64;
    let thetas: Vec<f64> = survive_counts.iter().map(|&c| c as f64 / m).collect();
    let ses: Vec<f64> = thetas
        .iter()
        .map(|&t| (t * (1.0 - t) / m).sqrt())
        .collect();
    Ok(ThetaCurve {
        thetas,
        ses,
        samples,
    })
}

/// Criticality search: bisection on p for a flat k theta^_k over [n/2, n].
#[derive(Debug, Clone, Copy)]
pub struct PcEstimate {
    pub p: f64,
    /// relative drift of k theta^_k between k = n/2 and k = n at p
    pub drift: f64,
    pub iterations: usize,
}

fn theta_drift(cfg: &OPConfig, n: usize, samples: usize, seed: u64) -> Result<f64> {
    let curve = estimate_theta(cfg, n, samples, seed)?;
    let half = n / 2;
    let a = half as f64 * curve.theta(half);
    let b = n as f64 * curve.theta(n);
    if a <= 0.0 {
        return Ok(-1.0);
    }
    Ok(b / a - 1.0)
}

pub fn estimate_pc(
    cfg: &OPConfig,
    mut lo: f64,
    mut hi: f64,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<PcEstimate> {
    if !(lo < hi) {
        return Err(Error::InvalidConfig("need lo < hi for bisection".into()));
    }
    // common random numbers across p values couple the curves
    let d_lo = theta_drift(&cfg.with_p(lo)?, n, samples, seed)?;
    let d_hi = theta_drift(&cfg.with_p(hi)?, n, samples, seed)?;
    if d_lo >= 0.0 || d_hi <= 0.0 {
        return Err(Error::Estimation(format!(
            "bisection bracket does not straddle criticality: drift({lo}) = {d_lo:.3}, drift({hi}) = {d_hi:.3}"
        )));
    }
    let mut iterations = 0;
    let mut drift = 0.0;
    while hi - lo > 1e-3 && iterations < 20 {
        let mid = 0.5 * (lo + hi);
        drift = theta_drift(&cfg.with_p(mid)?, n, samples, seed)?;
        if drift > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(PcEstimate {
        p: 0.5 * (lo + hi),
        drift,
        iterations,
    })
}

/// The two constructions of the incipient infinite cluster measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IicMode {
    /// reweight every sample by N_n
    SizeBiased,
    /// keep only samples surviving to n
    Conditioned,
}

/// Estimates the IIC expectation of a cylinder statistic (a function of the
/// cluster restricted to generations <= n). Both modes share the random
/// streams, so their difference is a low-variance comparison.
pub fn iic_estimate<F>(
    cfg: &OPConfig,
    statistic: F,
    n: usize,
    mode: IicMode,
    samples: usize,
    seed: u64,
) -> Result<Summary>
where
    F: Fn(&ClusterSample) -> f64 + Sync,
{
    let pairs: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(seed, i);
            let c = sample_cluster(cfg, n, &mut rng, false, DEFAULT_FRONTIER_CAP)?;
            Ok((c.n_at(n) as f64, statistic(&c)))
        })
        .collect::<Result<Vec<_>>>()?;
    match mode {
        IicMode::SizeBiased => {
            let (weights, values): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if weights.iter().all(|&w| w == 0.0) {
                return Err(Error::ZeroEffectiveSamples { total: samples });
            }
            Ok(ratio_summary(&weights, &values))
        }
        IicMode::Conditioned => {
            let accepted: Vec<f64> = pairs
                .into_iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(_, v)| v)
                .collect();
            if accepted.is_empty() {
                return Err(Error::ZeroEffectiveSamples { total: samples });
            }
            Ok(summarize(&accepted))
        }
    }
}

/// Monte Carlo r-point estimates at wave vectors: the unconditioned
/// tau^op_{n}(k) and the IIC rho^op_{n}(k) (size-biased at horizon n).
#[derive(Debug, Clone)]
pub struct RPointEstimate {
    pub tau: Summary,
    pub rho: Summary,
}

pub fn estimate_rpoint_op(
    cfg: &OPConfig,
    times: &[usize],
    kvecs: &[Vec<f64>],
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<RPointEstimate> {
    if times.is_empty() || times.len() != kvecs.len() {
        return Err(Error::InvalidConfig(
            "times and wave vectors must be nonempty and of equal length".into(),
        ));
    }
    let mbar = *times.iter().max().unwrap();
    if n < mbar {
        return Err(Error::InvalidConfig(format!(
            "horizon {n} below the largest marked time {mbar}"
        )));
    }
    for k in kvecs {
        if k.len() != cfg.dim {
            return Err(Error::InvalidConfig("wave vector dimension mismatch".into()));
        }
    }
    let rows: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(seed, i);
            let c = sample_cluster(cfg, n, &mut rng, false, DEFAULT_FRONTIER_CAP)?;
            // real part of prod_j sum_{x in gen n_j} e^{i k_j . x}
            let (mut re, mut im) = (1.0, 0.0);
            for (t, k) in times.iter().zip(kvecs) {
                let (mut sre, mut sim) = (0.0, 0.0);
                for x in &c.generations[*t] {
                    let dot: f64 = x.iter().zip(k).map(|(c, kc)| *c as f64 * kc).sum();
                    sre += dot.cos();
                    sim += dot.sin();
                }
                let (nre, nim) = (re * sre - im * sim, re * sim + im * sre);
                re = nre;
                im = nim;
            }
            Ok((c.n_at(n) as f64, re))
        })
        .collect::<Result<Vec<_>>>()?;
    let (weights, values): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let tau = summarize(&values);
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::ZeroEffectiveSamples { total: samples });
    }
    // rho^op = E_inf[prod phases] scaled by the incipient mean mass: the
    // size-biased ratio gives the normalized expectation under the IIC
    let rho = ratio_summary(&weights, &values);
    Ok(RPointEstimate { tau, rho })
}

/// Mean total cluster size for subcritical p (grown to extinction).
pub fn susceptibility(
    cfg: &OPConfig,
    samples: usize,
    seed: u64,
    cluster_cap: u64,
) -> Result<Summary> {
    let sizes: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(seed, i);
            let mut frontier = vec![origin(cfg.dim)];
            let mut total: u64 = 1;
            while !frontier.is_empty() {
                let mut seen: HashSet<Point> = HashSet::new();
                let mut next: Vec<Point> = Vec::new();
                for x in &frontier {
                    sample_targets(cfg, x, &mut rng, |y| {
                        if seen.insert(y.clone()) {
                            next.push(y);
                        }
                    });
                }
                total += next.len() as u64;
                if total > cluster_cap {
                    return Err(Error::RunawayCluster {
                        size: total,
                        cap: cluster_cap,
                    });
                }
                frontier = next;
            }
            Ok(total as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&sizes))
}

/// Size-biased IIC estimates of the ball mass M(R) for each radius.
#[derive(Debug, Clone)]
pub struct BallMassEstimate {
    pub radii: Vec<f64>,
    pub masses: Vec<Summary>,
    /// true when the horizon is below max(R)^2 and masses are truncated
    pub truncated: bool,
}

pub fn iic_ball_mass(
    cfg: &OPConfig,
    radii: &[f64],
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<BallMassEstimate> {
    if radii.is_empty() {
        return Err(Error::InvalidConfig("no radii given".into()));
    }
    let rows: Vec<(f64, Vec<f64>)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(seed, i);
            let c = sample_cluster(cfg, n, &mut rng, false, DEFAULT_FRONTIER_CAP)?;
            let masses: Vec<f64> = radii.iter().map(|&r| c.ball_mass(r) as f64).collect();
            Ok((c.n_at(n) as f64, masses))
        })
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = rows.iter().map(|(w, _)| *w).collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::ZeroEffectiveSamples { total: samples });
    }
    let mut masses = Vec::with_capacity(radii.len());
    for (j, _) in radii.iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|(_, m)| m[j]).collect();
        masses.push(ratio_summary(&weights, &values));
    }
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    Ok(BallMassEstimate {
        radii: radii.to_vec(),
        masses,
        truncated: (n as f64) < r_max * r_max,
    })
}

/// Whether two bond-disjoint occupied paths run from distinct generation-m
/// sites to generation k (Menger: max flow >= 2 with unit bond capacities,
/// unit source edges, and a super source/sink).
pub fn has_disjoint_survival(c: &ClusterSample, m: usize, k: usize) -> bool {
    if k == m {
        return c.n_at(m) >= 2;
    }
    let bonds = c.bonds.as_ref().expect("bond record required");
    // index the sites of generations m..=k
    let mut ids: HashMap<(usize, &Point), usize> = HashMap::new();
    let mut next_id = 2usize; // 0 = source, 1 = sink
    for gen in m..=k {
        for x in &c.generations[gen] {
            ids.insert((gen, x), next_id);
            next_id += 1;
        }
    }
    let mut edges: Vec<(usize, usize, u32)> = Vec::new();
    for x in &c.generations[m] {
        edges.push((0, ids[&(m, x)], 1));
    }
    for x in &c.generations[k] {
        edges.push((ids[&(k, x)], 1, 2));
    }
    for (gen, from, to) in bonds {
        if *gen >= m && *gen < k {
            if let (Some(&a), Some(&b)) = (ids.get(&(*gen, from)), ids.get(&(*gen + 1, to))) {
                edges.push((a, b, 1));
            }
        }
    }
    max_flow_capped(next_id, &edges, 0, 1, 2) >= 2
}

/// Q_n-probability of disjoint survival from generation m to generation k.
pub fn disjoint_survival(
    cfg: &OPConfig,
    m: usize,
    k: usize,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Summary> {
    if !(m <= k && k <= n) {
        return Err(Error::InvalidConfig(
            "need m <= k <= n for disjoint survival".into(),
        ));
    }
    let rows: Vec<Option<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(seed, i);
            let c = sample_cluster(cfg, n, &mut rng, true, DEFAULT_FRONTIER_CAP)?;
            if !c.survives(n) {
                return Ok(None);
            }
            Ok(Some(if has_disjoint_survival(&c, m, k) { 1.0 } else { 0.0 }))
        })
        .collect::<Result<Vec<_>>>()?;
    let accepted: Vec<f64> = rows.into_iter().flatten().collect();
    if accepted.is_empty() {
        return Err(Error::ZeroEffectiveSamples { total: samples });
    }
    Ok(summarize(&accepted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use smallvec::smallvec;

    fn line_cfg(p: f64) -> OPConfig {
        // degenerate single-target step: D(e_1) = 1
        OPConfig::explicit(1, vec![(smallvec![1i64], 1.0)], p).unwrap()
    }

    #[test]
    fn p_zero_is_the_origin_only() {
        let cfg = OPConfig::spread_out(2, 1, 0.0).unwrap();
        let mut rng = sample_stream(1, 0);
        let c = sample_cluster(&cfg, 5, &mut rng, false, 1000).unwrap();
        assert_eq!(c.n_at(0), 1);
        for k in 1..=5 {
            assert_eq!(c.n_at(k), 0);
        }
        assert_eq!(c.total_size(), 1);
        assert_eq!(c.ball_mass(100.0), 1);
        let curve = estimate_theta(&cfg, 3, 50, 2).unwrap();
        assert_abs_diff_eq!(curve.theta(0), 1.0);
        for k in 1..=3 {
            assert_abs_diff_eq!(curve.theta(k), 0.0);
        }
    }

    #[test]
    fn deterministic_line_survives() {
        let cfg = line_cfg(1.0);
        let mut rng = sample_stream(3, 0);
        let c = sample_cluster(&cfg, 20, &mut rng, false, 1000).unwrap();
        for k in 0..=20 {
            assert_eq!(c.n_at(k), 1);
            assert_eq!(c.generations[k][0][0], k as i64);
        }
    }

    #[test]
    fn one_step_survival_closed_form() {
        // d=1, L=1: two offsets with occupancy p/2 each
        let p = 0.6;
        let cfg = OPConfig::spread_out(1, 1, p).unwrap();
        let expected = 1.0 - (1.0 - p / 2.0) * (1.0 - p / 2.0);
        let samples = 100_000;
        let curve = estimate_theta(&cfg, 1, samples, 5).unwrap();
        assert!(
            (curve.theta(1) - expected).abs() <= 3.0 * curve.ses[1],
            "theta_1 = {} vs {}",
            curve.theta(1),
            expected
        );
    }

    #[test]
    fn binomial_subset_matches_bernoulli_bonds() {
        // the uniform fast path and the generic loop must agree in law;
        // compare one-step target counts on the same configuration
        let cfg = OPConfig::spread_out(2, 1, 0.9).unwrap();
        assert!(cfg.uniform_occupancy.is_some());
        // force the generic path by perturbing one weight below tolerance
        let mut table: Vec<(Point, f64)> = cfg
            .offsets
            .iter()
            .cloned()
            .zip(cfg.d_probs.iter().cloned())
            .collect();
        let eps = 1e-9;
        table[0].1 += eps;
        table[1].1 -= eps;
        let cfg2 = OPConfig::explicit(2, table, 0.9).unwrap();
        assert!(cfg2.uniform_occupancy.is_none());
        let n = 40_000u64;
        let count = |cfg: &OPConfig, master: u64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut rng = sample_stream(master, i);
                    let mut c = 0.0;
                    sample_targets(cfg, &origin(2), &mut rng, |_| c += 1.0);
                    c
                })
                .collect()
        };
        let a = count(&cfg, 7);
        let b = count(&cfg2, 11);
        let (_, p) = crate::stats::ks_two_sample(&a, &b);
        assert!(p > 0.01, "p = {p}");
        let sa = summarize(&a);
        assert!((sa.mean - 0.9).abs() <= 3.0 * sa.se);
    }

    #[test]
    fn contact_one_step_probabilities() {
        // one-step occupancy frequencies against the discretization law
        let step = StepLaw::simple(1);
        let lambda = 1.5;
        for eps in [0.1, 0.05] {
            let cfg = OPConfig::contact(&step, lambda, eps).unwrap();
            let n = 50_000u64;
            let mut stay = 0u64;
            let mut side = 0u64;
            for i in 0..n {
                let mut rng = sample_stream(13, i);
                sample_targets(&cfg, &origin(1), &mut rng, |y| {
                    if y[0] == 0 {
                        stay += 1;
                    } else {
                        side += 1;
                    }
                });
            }
            let stay_hat = stay as f64 / n as f64;
            let side_hat = side as f64 / n as f64;
            let se_stay = (eps * (1.0 - eps) / n as f64).sqrt();
            assert!(
                (stay_hat - (1.0 - eps)).abs() <= 4.0 * se_stay,
                "stay {stay_hat} vs {}",
                1.0 - eps
            );
            // two side bonds, each lambda eps / 2
            let mean_side = lambda * eps;
            assert!(
                (side_hat - mean_side).abs() <= 4.0 * (mean_side / n as f64).sqrt(),
                "side {side_hat} vs {mean_side}"
            );
        }
    }

    #[test]
    fn susceptibility_trivial_and_geometric() {
        let cfg0 = OPConfig::spread_out(3, 1, 0.0).unwrap();
        let s = susceptibility(&cfg0, 50, 17, 1000).unwrap();
        assert_abs_diff_eq!(s.mean, 1.0);
        assert_abs_diff_eq!(s.se, 0.0);
        // geometric line: chi = 1/(1-p)
        let p = 0.5;
        let s = susceptibility(&line_cfg(p), 40_000, 19, 1_000_000).unwrap();
        let expected = 1.0 / (1.0 - p);
        assert!(
            (s.mean - expected).abs() <= 3.0 * s.se,
            "chi = {} vs {}",
            s.mean,
            expected
        );
    }

    #[test]
    fn susceptibility_monotone_in_p() {
        let mut prev = 0.0;
        for p in [0.2, 0.4, 0.6] {
            let cfg = OPConfig::spread_out(1, 2, p).unwrap();
            let s = susceptibility(&cfg, 8000, 23, 1_000_000).unwrap();
            assert!(s.mean > prev, "chi({p}) = {} after {prev}", s.mean);
            prev = s.mean;
        }
    }

    #[test]
    fn runaway_cluster_detected() {
        let cfg = line_cfg(1.0);
        assert!(matches!(
            susceptibility(&cfg, 2, 29, 100),
            Err(Error::RunawayCluster { .. })
        ));
    }

    #[test]
    fn iic_constant_statistic_is_one() {
        let cfg = OPConfig::spread_out(1, 1, 1.0).unwrap();
        for mode in [IicMode::SizeBiased, IicMode::Conditioned] {
            let s = iic_estimate(&cfg, |_| 1.0, 8, mode, 500, 31).unwrap();
            assert_abs_diff_eq!(s.mean, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn iic_extinction_statistic_vanishes_size_biased() {
        let cfg = OPConfig::spread_out(1, 1, 1.0).unwrap();
        let m = 3;
        let s = iic_estimate(
            &cfg,
            |c| if c.n_at(m) == 0 { 1.0 } else { 0.0 },
            8,
            IicMode::SizeBiased,
            500,
            37,
        )
        .unwrap();
        assert_abs_diff_eq!(s.mean, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn iic_rejects_when_nothing_survives() {
        let cfg = OPConfig::spread_out(1, 1, 0.0).unwrap();
        assert!(matches!(
            iic_estimate(&cfg, |_| 1.0, 4, IicMode::Conditioned, 50, 41),
            Err(Error::ZeroEffectiveSamples { .. })
        ));
    }

    #[test]
    fn rpoint_zero_wave_vector_is_mean_mass() {
        let cfg = OPConfig::spread_out(1, 2, 0.9).unwrap();
        let n = 6;
        let est = estimate_rpoint_op(&cfg, &[n], &[vec![0.0]], n, 30_000, 43).unwrap();
        // independent direct estimate of E[N_n]
        let masses: Vec<f64> = (0..30_000u64)
            .map(|i| {
                let mut rng = sample_stream(47, i);
                sample_cluster(&cfg, n, &mut rng, false, 100_000)
                    .unwrap()
                    .n_at(n) as f64
            })
            .collect();
        let direct = summarize(&masses);
        let gap = (est.tau.mean - direct.mean).abs();
        let se = (est.tau.se.powi(2) + direct.se.powi(2)).sqrt();
        assert!(gap <= 3.0 * se, "tau {} vs direct {}", est.tau.mean, direct.mean);
    }

    #[test]
    fn rpoint_p_zero_vanishes() {
        let cfg = OPConfig::spread_out(1, 1, 0.0).unwrap();
        assert!(matches!(
            estimate_rpoint_op(&cfg, &[2], &[vec![0.4]], 2, 100, 53),
            Err(Error::ZeroEffectiveSamples { .. })
        ));
    }

    #[test]
    fn theta_curve_is_monotone() {
        let cfg = OPConfig::spread_out(2, 1, 1.05).unwrap();
        let curve = estimate_theta(&cfg, 20, 2000, 59).unwrap();
        for k in 1..=20 {
            assert!(curve.thetas[k] <= curve.thetas[k - 1]);
        }
    }

    #[test]
    fn disjoint_survival_line_is_never_disjoint() {
        // a single line can never carry two distinct generation-m sites
        let cfg = line_cfg(1.0);
        let s = disjoint_survival(&cfg, 1, 3, 5, 50, 61).unwrap();
        assert_abs_diff_eq!(s.mean, 0.0);
    }

    #[test]
    fn disjoint_survival_k_equals_m_counts_pairs() {
        let cfg = OPConfig::spread_out(1, 2, 1.1).unwrap();
        let (m, n) = (2, 6);
        let s = disjoint_survival(&cfg, m, m, n, 4000, 67).unwrap();
        // direct check: Q_n(N_m >= 2)
        let direct: Vec<f64> = (0..4000u64)
            .filter_map(|i| {
                let mut rng = sample_stream(67, i);
                let c = sample_cluster(&cfg, n, &mut rng, true, 100_000).unwrap();
                if c.survives(n) {
                    Some(if c.n_at(m) >= 2 { 1.0 } else { 0.0 })
                } else {
                    None
                }
            })
            .collect();
        let d = summarize(&direct);
        assert_abs_diff_eq!(s.mean, d.mean, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_survival_decreases_in_k() {
        let cfg = OPConfig::spread_out(1, 3, 1.05).unwrap();
        let (m, n) = (2, 12);
        let mut prev = f64::INFINITY;
        for k in [2usize, 6, 12] {
            let s = disjoint_survival(&cfg, m, k, n, 6000, 71).unwrap();
            assert!(
                s.mean <= prev + 3.0 * s.se,
                "k={k}: {} after {prev}",
                s.mean
            );
            prev = s.mean;
        }
    }

    #[test]
    fn ball_mass_radius_zero_counts_origin_column() {
        let cfg = line_cfg(1.0);
        let mut rng = sample_stream(73, 0);
        let c = sample_cluster(&cfg, 10, &mut rng, false, 1000).unwrap();
        // the line moves right immediately; only (0,0) sits at the origin
        assert_eq!(c.ball_mass(0.0), 1);
    }

    #[test]
    fn ball_mass_truncation_flag() {
        let cfg = OPConfig::spread_out(1, 1, 1.0).unwrap();
        let est = iic_ball_mass(&cfg, &[4.0], 8, 200, 79).unwrap();
        assert!(est.truncated);
        let est = iic_ball_mass(&cfg, &[2.0], 8, 200, 79).unwrap();
        assert!(!est.truncated);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(OPConfig::spread_out(0, 1, 1.0).is_err());
        assert!(OPConfig::spread_out(1, 0, 1.0).is_err());
        // occupancy above 1
        assert!(OPConfig::spread_out(1, 1, 2.5).is_err());
        assert!(OPConfig::explicit(1, vec![(smallvec![1i64], 0.5)], 1.0).is_err());
        assert!(OPConfig::contact(&StepLaw::simple(1), 1.0, 1.5).is_err());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let cfg = OPConfig::spread_out(3, 2, 1.0).unwrap();
        let a = sample_cluster(&cfg, 10, &mut sample_stream(83, 5), false, 100_000).unwrap();
        let b = sample_cluster(&cfg, 10, &mut sample_stream(83, 5), false, 100_000).unwrap();
        assert_eq!(a.generations, b.generations);
    }
}
