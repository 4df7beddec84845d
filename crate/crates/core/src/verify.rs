//! The built-in verification batteries: an exact suite of deterministic
//! identities, a seeded statistical-fast suite, and a statistical-full suite
//! whose heaviest findings are recorded with confidence intervals.

use crate::error::Result;
use crate::harness::{fit_exponent, sb_exp_test};
use crate::iibrw::{finite_n_probability, iibrw_probability, sample_spine_step};
use crate::law::{origin, OffspringLaw, Point, StepLaw};
use crate::lattice::{invade, wilson, InvasionConfig, MultiGraph};
use crate::moments::{
    icsbm_moment, rho_fourier, sbm_moment, scaling_gap, tau_fourier, tau_fourier_oracle,
    QuadConfig, RPointQuery, ScalingConstants,
};
use crate::op::{
    disjoint_survival, estimate_pc, estimate_rpoint_op, estimate_theta, iic_estimate,
    sample_cluster, ClusterSample, IicMode, OPConfig, DEFAULT_FRONTIER_CAP,
};
use crate::rng::{sample_stream, Stream};
use crate::stats::{chi_square_p, summarize, Summary};
use crate::tree::{enumerate_embedded_prefixes, survival_probability};
use rayon::prelude::*;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Exact,
    StatisticalFast,
    StatisticalFull,
}

impl Suite {
    pub fn parse(name: &str) -> Option<Suite> {
        match name {
            "exact" => Some(Suite::Exact),
            "statistical-fast" => Some(Suite::StatisticalFast),
            "statistical-full" => Some(Suite::StatisticalFull),
            _ => None,
        }
    }

    fn contains(&self, id: usize) -> bool {
        match self {
            Suite::Exact => (1..=7).contains(&id),
            Suite::StatisticalFast => (8..=10).contains(&id),
            Suite::StatisticalFull => (11..=13).contains(&id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Passed,
    Failed,
    /// findings reported with intervals, not asserted
    Recorded,
    /// not part of the requested suite
    Skipped,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    /// replaces the binary offspring law; must still be critical
    pub offspring: Option<Vec<f64>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 20260824,
            offspring: None,
        }
    }
}

impl VerifyOptions {
    fn primary_law(&self) -> Result<OffspringLaw> {
        match &self.offspring {
            Some(probs) => OffspringLaw::new(probs.clone()),
            None => Ok(OffspringLaw::binary()),
        }
    }

    fn crit_seed(&self, id: usize, sub: u64) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((id as u64) << 32)
            .wrapping_add(sub)
    }
}

pub const CRITERION_NAMES: [(usize, &str); 13] = [
    (1, "two-point transform closed form"),
    (2, "transform recursion vs enumeration"),
    (3, "incipient mass identity"),
    (4, "limit measure normalization and convergence"),
    (5, "survival asymptotics"),
    (6, "super-Brownian quadrature"),
    (7, "scaling gap"),
    (8, "spine sampler moments"),
    (9, "Wilson uniformity"),
    (10, "invasion weights"),
    (11, "incipient mass exponent"),
    (12, "IIC mode agreement"),
    (13, "oriented-percolation findings"),
];

/// Runs one suite; the report lists every criterion exactly once, marking
/// out-of-suite entries skipped.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<CriterionResult> {
    CRITERION_NAMES
        .iter()
        .map(|&(id, name)| {
            if !suite.contains(id) {
                return CriterionResult {
                    id,
                    name,
                    status: Status::Skipped,
                    detail: String::new(),
                };
            }
            let (status, detail) = match run_criterion(id, opts) {
                Ok(pair) => pair,
                Err(e) => (Status::Failed, e.to_string()),
            };
            CriterionResult {
                id,
                name,
                status,
                detail,
            }
        })
        .collect()
}

pub fn run_criterion(id: usize, opts: &VerifyOptions) -> Result<(Status, String)> {
    match id {
        1 => c1_two_point(opts),
        2 => c2_recursion_vs_enumeration(opts),
        3 => c3_mass_identity(opts),
        4 => c4_limit_measure(opts),
        5 => c5_survival(opts),
        6 => c6_quadrature(opts),
        7 => c7_scaling_gap(opts),
        8 => c8_spine_moments(opts),
        9 => c9_wilson(opts),
        10 => c10_invasion(opts),
        11 => c11_mass_exponent(opts),
        12 => c12_iic_modes(opts),
        13 => c13_op_findings(opts),
        _ => Err(crate::Error::InvalidConfig(format!(
            "unknown criterion {id}"
        ))),
    }
}

fn verdict(ok: bool, detail: String) -> Result<(Status, String)> {
    Ok((if ok { Status::Passed } else { Status::Failed }, detail))
}

fn c1_two_point(opts: &VerifyOptions) -> Result<(Status, String)> {
    let law = opts.primary_law()?;
    let steps = [StepLaw::simple(1), StepLaw::spread_out(2, 2)?];
    let kss: [Vec<Vec<f64>>; 2] = [
        vec![vec![0.0], vec![0.7], vec![2.1]],
        vec![vec![0.0, 0.0], vec![0.7, -0.3], vec![1.9, 0.4]],
    ];
    let mut worst: f64 = 0.0;
    for (step, ks) in steps.iter().zip(&kss) {
        for k in ks {
            let dhat = step.fourier(k);
            for n in 1..=50usize {
                let q = RPointQuery::new(vec![n], vec![k.clone()])?;
                let got = tau_fourier(&law, step, &q)?.value;
                worst = worst.max((got - dhat.powi(n as i32)).abs());
            }
        }
    }
    verdict(worst <= 1e-12, format!("max |gap| = {worst:.2e} (tol 1e-12)"))
}

fn c2_recursion_vs_enumeration(opts: &VerifyOptions) -> Result<(Status, String)> {
    let law = opts.primary_law()?;
    let step = StepLaw::simple(1);
    let ks = [0.7, -0.4, 1.3, 0.25];
    let mut worst: f64 = 0.0;
    let mut queries = 0usize;
    for r in 1..=4usize {
        let mut times = vec![1usize; r];
        loop {
            let kvecs: Vec<Vec<f64>> = (0..r).map(|i| vec![ks[i]]).collect();
            let q = RPointQuery::new(times.clone(), kvecs)?;
            let got = tau_fourier(&law, &step, &q)?;
            let (re, im) = tau_fourier_oracle(&law, &step, &q, 2_000_000)?;
            worst = worst.max((got.value - re).abs()).max(im.abs());
            queries += 1;
            // next time tuple in {1,2,3}^r
            let mut i = 0;
            while i < r {
                if times[i] < 3 {
                    times[i] += 1;
                    break;
                }
                times[i] = 1;
                i += 1;
            }
            if i == r {
                break;
            }
        }
    }
    verdict(
        worst <= 1e-10,
        format!("{queries} queries, max |gap| = {worst:.2e} (tol 1e-10)"),
    )
}

fn c3_mass_identity(opts: &VerifyOptions) -> Result<(Status, String)> {
    let laws = [opts.primary_law()?, OffspringLaw::poisson1(10)?];
    let step = StepLaw::simple(1);
    let mut worst: f64 = 0.0;
    for law in &laws {
        for m in 1..=20usize {
            let q = RPointQuery::new(vec![m], vec![vec![0.0]])?;
            let got = rho_fourier(law, &step, &q)?.value;
            worst = worst.max((got - (1.0 + law.sigma_p_sq() * m as f64)).abs());
        }
    }
    verdict(worst <= 1e-10, format!("max |gap| = {worst:.2e} (tol 1e-10)"))
}

fn c4_limit_measure(opts: &VerifyOptions) -> Result<(Status, String)> {
    let law = opts.primary_law()?;
    let step = StepLaw::simple(1);
    let prefixes = enumerate_embedded_prefixes(&law, &step, 3, 2_000_000)?;
    let mut total = 0.0;
    for (c, _) in &prefixes {
        total += iibrw_probability(&law, &step, c)?;
    }
    let n = 10_000usize;
    let curve = survival_probability(&law, n);
    let mut max_gap: f64 = 0.0;
    let mut max_p: f64 = 0.0;
    for (c, _) in &prefixes {
        let p_inf = iibrw_probability(&law, &step, c)?;
        let q = finite_n_probability(&law, &step, c, n, &curve)?;
        max_gap = max_gap.max((q - p_inf).abs());
        max_p = max_p.max(p_inf);
    }
    let norm_ok = (total - 1.0).abs() <= 1e-9;
    let conv_ok = max_gap <= 1e-3 * max_p;
    verdict(
        norm_ok && conv_ok,
        format!(
            "depth-3 total = 1 {:+.2e}; max |Q_n - P| = {:.2e} vs budget {:.2e}",
            total - 1.0,
            max_gap,
            1e-3 * max_p
        ),
    )
}

fn c5_survival(opts: &VerifyOptions) -> Result<(Status, String)> {
    let laws = [opts.primary_law()?, OffspringLaw::poisson1(10)?];
    let n = 100_000usize;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for law in &laws {
        let theta = survival_probability(law, n).theta(n);
        let gap = (n as f64 * theta - 2.0 / law.sigma_p_sq()).abs();
        parts.push(format!("{:.4}", n as f64 * theta));
        worst = worst.max(gap);
    }
    verdict(
        worst <= 0.05,
        format!(
            "n theta_n = {} vs limits, max |gap| = {worst:.3} (tol 0.05)",
            parts.join(", ")
        ),
    )
}

fn c6_quadrature(_opts: &VerifyOptions) -> Result<(Status, String)> {
    let cfg = QuadConfig::default();
    // closed single integral for the two-point measure
    let (t1, t2) = (0.8, 1.3);
    let (k1, k2) = (vec![0.6, -0.2], vec![0.3, 0.9]);
    let got = sbm_moment(&[t1, t2], &[k1.clone(), k2.clone()], &cfg)?.value;
    let d = 2.0;
    let ksq = |k: &[f64]| k.iter().map(|x| x * x).sum::<f64>();
    let ks = ksq(&[k1[0] + k2[0], k1[1] + k2[1]]);
    let (a1, a2) = (ksq(&k1), ksq(&k2));
    // integrand exp(c0 + c1 t); integrate on [0, min(t1,t2)]
    let c0 = -(a1 * t1 + a2 * t2) / (2.0 * d);
    let c1 = -(ks - a1 - a2) / (2.0 * d);
    let tmin = t1.min(t2);
    let closed = if c1 == 0.0 {
        c0.exp() * tmin
    } else {
        c0.exp() * (c1 * tmin).exp_m1() / c1
    };
    let pair_gap = (got - closed).abs();
    // diagonal closed form t^{l-1} 2^{-(l-1)} l!
    let t = 0.9;
    let mut diag_gap: f64 = 0.0;
    for l in 2..=4usize {
        let got = sbm_moment(&vec![t; l], &vec![vec![0.0]; l], &cfg)?.value;
        let mut fact = 1.0;
        for i in 2..=l {
            fact *= i as f64;
        }
        let exact = t.powi(l as i32 - 1) * 0.5f64.powi(l as i32 - 1) * fact;
        diag_gap = diag_gap.max((got - exact).abs() / exact);
    }
    // incipient closed forms at k = 0, s = 1
    let one = icsbm_moment(&[1.0], &[vec![0.0]], &cfg)?.value;
    let three_halves = icsbm_moment(&[1.0, 1.0], &[vec![0.0], vec![0.0]], &cfg)?.value;
    let ok = pair_gap <= 1e-6
        && diag_gap <= 1e-5
        && (one - 1.0).abs() <= 1e-6
        && (three_halves - 1.5).abs() <= 1e-5;
    verdict(
        ok,
        format!(
            "pair gap {pair_gap:.1e}, diagonal rel gap {diag_gap:.1e}, incipient values {one:.8}, {three_halves:.8}"
        ),
    )
}

fn c7_scaling_gap(opts: &VerifyOptions) -> Result<(Status, String)> {
    let law = opts.primary_law()?;
    let step = StepLaw::simple(1);
    let consts = ScalingConstants::brw(&law);
    let cfg = QuadConfig::default();
    let mut exact_gap: f64 = 0.0;
    for m in [10usize, 50, 200] {
        let gap = scaling_gap(&law, &step, &consts, &[1.0], &[vec![0.0]], m, &cfg)?;
        exact_gap = exact_gap.max((gap - 1.0 / (law.sigma_p_sq() * m as f64)).abs());
    }
    let gap_k = scaling_gap(&law, &step, &consts, &[1.0], &[vec![1.0]], 200, &cfg)?;
    let gaps3: Vec<f64> = [50usize, 100, 200]
        .iter()
        .map(|&m| scaling_gap(&law, &step, &consts, &[1.0, 1.0], &[vec![0.0], vec![0.0]], m, &cfg))
        .collect::<Result<Vec<f64>>>()?;
    let ok = exact_gap <= 1e-9 && gap_k <= 0.05 && gaps3[0] > gaps3[1] && gaps3[1] > gaps3[2];
    verdict(
        ok,
        format!(
            "two-point identity gap {exact_gap:.1e}; k!=0 gap at m=200: {gap_k:.4}; three-point gaps {:.4} > {:.4} > {:.4}",
            gaps3[0], gaps3[1], gaps3[2]
        ),
    )
}

/// N_m of the conditioned tree, counts only: the spine plus the per
/// generation side population evolved as unconditioned branching.
fn sample_mass(law: &OffspringLaw, m: usize, rng: &mut Stream) -> u64 {
    let mut side: u64 = 0;
    for _ in 0..m {
        let mut next: u64 = 0;
        for _ in 0..side {
            next += law.sample(rng) as u64;
        }
        side = next + sample_spine_step(law, rng).zeta as u64;
    }
    side + 1
}

fn c8_spine_moments(opts: &VerifyOptions) -> Result<(Status, String)> {
    let law = opts.primary_law()?;
    let step = StepLaw::simple(1);
    let m = 100usize;
    let master = opts.crit_seed(8, 0);
    let samples: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(master, i);
            sample_mass(&law, m, &mut rng) as f64 / m as f64
        })
        .collect();
    let report = sb_exp_test(&samples, &law, &step, m, 2, 3.0, 1000, opts.crit_seed(8, 1))?;
    let detail = report
        .checks
        .iter()
        .map(|c| {
            format!(
                "l={}: {:.4} vs exact {:.4} (z = {:+.2})",
                c.order, c.empirical, c.exact, c.z
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    verdict(report.all_pass(), detail)
}

fn wired_square() -> (MultiGraph, usize, Vec<(usize, usize)>) {
    // 2x2 block of vertices 0..4 on a cycle, two wired edges each
    let wired = 4;
    let mut g = MultiGraph::new(5);
    let mut edges = Vec::new();
    for &(u, v) in &[(0, 1), (1, 3), (3, 2), (2, 0)] {
        g.add_edge(u, v);
        edges.push((u, v));
    }
    for v in 0..4 {
        for _ in 0..2 {
            g.add_edge(v, wired);
            edges.push((v, wired));
        }
    }
    (g, wired, edges)
}

fn spanning_trees(edges: &[(usize, usize)], n_vertices: usize) -> Vec<Vec<usize>> {
    // all (n_vertices - 1)-subsets of edge ids that connect every vertex
    let need = n_vertices - 1;
    let m = edges.len();
    let mut out = Vec::new();
    let mut pick: Vec<usize> = (0..need).collect();
    loop {
        // union-find connectivity
        let mut parent: Vec<usize> = (0..n_vertices).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut merged = 0;
        for &e in &pick {
            let (a, b) = (find(&mut parent, edges[e].0), find(&mut parent, edges[e].1));
            if a != b {
                parent[a] = b;
                merged += 1;
            }
        }
        if merged == need {
            out.push(pick.clone());
        }
        // next combination
        let mut i = need;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if pick[i] < m - (need - i) {
                pick[i] += 1;
                for j in i + 1..need {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn c9_wilson(opts: &VerifyOptions) -> Result<(Status, String)> {
    let n = 100_000u64;
    // triangle: three spanning trees, keyed by the omitted edge
    let mut tri = MultiGraph::new(3);
    tri.add_edge(0, 1);
    tri.add_edge(1, 2);
    tri.add_edge(0, 2);
    let master = opts.crit_seed(9, 0);
    let keys: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(master, i);
            let f = wilson(&tri, 2, &[0, 1], &mut rng);
            let key = f.edge_key();
            (0..3).find(|e| !key.contains(e)).unwrap()
        })
        .collect();
    let mut tri_counts = [0u64; 3];
    for k in keys {
        tri_counts[k] += 1;
    }
    let p_tri = chi_square_p(&tri_counts, &vec![n as f64 / 3.0; 3]);

    // wired 2x2 block against the exhaustive spanning-tree list
    let (g, wired, edges) = wired_square();
    let trees = spanning_trees(&edges, 5);
    let index: HashMap<Vec<usize>, usize> = trees
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    let master = opts.crit_seed(9, 1);
    let keys: Vec<usize> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(master, i);
            let f = wilson(&g, wired, &[0, 1, 2, 3], &mut rng);
            index[&f.edge_key()]
        })
        .collect();
    let mut counts = vec![0u64; trees.len()];
    for k in keys {
        counts[k] += 1;
    }
    let p_sq = chi_square_p(&counts, &vec![n as f64 / trees.len() as f64; trees.len()]);
    verdict(
        p_tri > 0.01 && p_sq > 0.01,
        format!(
            "triangle p = {p_tri:.3}; wired block p = {p_sq:.3} over {} trees",
            trees.len()
        ),
    )
}

fn c10_invasion(opts: &VerifyOptions) -> Result<(Status, String)> {
    // The record weight should settle just above p_c = 1/2 once the run is
    // long enough to have broken out of the origin's critical cluster. At
    // 1e5 bonds roughly half of all runs are still inside one large critical
    // cluster and have never accepted a weight above p_c, so the single-run
    // record is a coin flip around 0.5. The upper quartile over independent
    // replicates is stable: it requires both that breakouts happen at a
    // healthy rate and that they overshoot p_c only slightly.
    let cfg = InvasionConfig { dim: 2, cap: None };
    let runs = 49usize;
    let mut maxima = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(opts.crit_seed(10, i as u64), 0);
            let state = invade(&cfg, 100_000, &mut rng, 50_000_000)?;
            Ok(state
                .trace
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    maxima.sort_by(f64::total_cmp);
    let upper_quartile = maxima[3 * (runs - 1) / 4];
    let median = maxima[(runs - 1) / 2];
    let capped = InvasionConfig {
        dim: 2,
        cap: Some(0.5),
    };
    let mut rng = sample_stream(opts.crit_seed(10, 1000), 0);
    let cstate = invade(&capped, 20_000, &mut rng, 50_000_000)?;
    let worst_finite = cstate
        .trace
        .iter()
        .filter(|w| w.is_finite())
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let ok = (0.50..=0.53).contains(&upper_quartile) && worst_finite <= 0.5;
    verdict(
        ok,
        format!(
            "running-max upper quartile = {upper_quartile:.4} over {runs} runs (band [0.50, 0.53]), median = {median:.4}; capped max finite accept = {worst_finite:.4}, {} uniform picks",
            cstate.uniform_picks
        ),
    )
}

/// Space-time ball masses of one conditioned sample: for each (R, horizon)
/// pair, the number of particles within Euclidean distance R born at
/// generations <= horizon.
fn sample_ball_masses(
    law: &OffspringLaw,
    step: &StepLaw,
    radii: &[(f64, usize)],
    rng: &mut Stream,
) -> Vec<f64> {
    let m_max = radii.iter().map(|&(_, h)| h).max().unwrap();
    let dim = step.dim();
    let mut masses = vec![0.0; radii.len()];
    let count = |y: &Point, g: usize, masses: &mut [f64]| {
        let r2: f64 = y.iter().map(|&c| (c * c) as f64).sum();
        for (i, &(rad, hor)) in radii.iter().enumerate() {
            if g <= hor && r2 <= rad * rad {
                masses[i] += 1.0;
            }
        }
    };
    let mut spine_site = origin(dim);
    count(&spine_site, 0, &mut masses);
    let mut side: Vec<Point> = Vec::new();
    for g in 0..m_max {
        let cur = std::mem::take(&mut side);
        for x in cur {
            let xi = law.sample(rng);
            for _ in 0..xi {
                let off = step.sample(rng);
                let y: Point = x.iter().zip(off.iter()).map(|(a, b)| a + b).collect();
                count(&y, g + 1, &mut masses);
                side.push(y);
            }
        }
        let s = sample_spine_step(law, rng);
        let mut next_spine = spine_site.clone();
        for j in 1..=(s.zeta + 1) {
            let off = step.sample(rng);
            let y: Point = spine_site.iter().zip(off.iter()).map(|(a, b)| a + b).collect();
            count(&y, g + 1, &mut masses);
            if j == s.v {
                next_spine = y;
            } else {
                side.push(y);
            }
        }
        spine_site = next_spine;
    }
    masses
}

fn c11_mass_exponent(opts: &VerifyOptions) -> Result<(Status, String)> {
    let law = opts.primary_law()?;
    let step = StepLaw::simple(5);
    // the horizon scales with R^2 so every radius sees the same fraction of
    // its diffusive occupation; the largest uses the full 1024 generations
    let radii: Vec<(f64, usize)> = [4.0f64, 8.0, 16.0, 32.0]
        .iter()
        .map(|&r| (r, (r * r) as usize))
        .collect();
    let master = opts.crit_seed(11, 0);
    let samples = 800u64;
    let rows: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(master, i);
            sample_ball_masses(&law, &step, &radii, &mut rng)
        })
        .collect();
    let rs: Vec<f64> = radii.iter().map(|&(r, _)| r).collect();
    let masses: Vec<Summary> = (0..rs.len())
        .map(|j| summarize(&rows.iter().map(|m| m[j]).collect::<Vec<f64>>()))
        .collect();
    let fit = fit_exponent(&rs, &masses)?;
    let ok = (fit.exponent - 4.0).abs() <= 0.5;
    let means: Vec<String> = masses.iter().map(|s| format!("{:.0}", s.mean)).collect();
    verdict(
        ok,
        format!(
            "slope = {:.3} +- {:.3} over R in {{4,8,16,32}} (band 4 +- 0.5); means {}",
            fit.exponent,
            fit.se,
            means.join(", ")
        ),
    )
}

fn c12_iic_modes(opts: &VerifyOptions) -> Result<(Status, String)> {
    let base = OPConfig::spread_out(5, 3, 1.0)?;
    let pc = estimate_pc(&base, 0.9, 1.1, 30, 60_000, opts.crit_seed(12, 0))?;
    let cfg = base.with_p(pc.p)?;
    let n = 30usize;
    let samples = 30_000usize;
    // cylinder statistics at depths well below the horizon
    let stats: [(&str, fn(&ClusterSample) -> f64); 3] = [
        ("N_1", |c| c.n_at(1) as f64),
        ("N_2", |c| c.n_at(2) as f64),
        ("N_3", |c| c.n_at(3) as f64),
    ];
    let seed = opts.crit_seed(12, 1);
    let mut ok = true;
    let mut parts = vec![format!("p_c = {:.4} (drift {:+.3})", pc.p, pc.drift)];
    for (name, f) in stats {
        let sb = iic_estimate(&cfg, f, n, IicMode::SizeBiased, samples, seed)?;
        let cd = iic_estimate(&cfg, f, n, IicMode::Conditioned, samples, seed)?;
        let z = (sb.mean - cd.mean) / (sb.se * sb.se + cd.se * cd.se).sqrt();
        ok &= z.abs() <= 3.0;
        parts.push(format!(
            "{name}: {:.3} vs {:.3} (z = {z:+.2})",
            sb.mean, cd.mean
        ));
    }
    verdict(ok, parts.join("; "))
}

fn c13_op_findings(opts: &VerifyOptions) -> Result<(Status, String)> {
    let base = OPConfig::spread_out(5, 3, 1.0)?;
    let pc = estimate_pc(&base, 0.9, 1.1, 30, 60_000, opts.crit_seed(13, 0))?;
    let cfg = base.with_p(pc.p)?;
    let mut parts = Vec::new();

    // plateau of k theta_k at the estimated critical point
    let curve = estimate_theta(&cfg, 60, 60_000, opts.crit_seed(13, 1))?;
    let a = 30.0 * curve.theta(30);
    let b = 60.0 * curve.theta(60);
    parts.push(format!(
        "k theta_k plateau: 30->60 drift {:+.1}% (values {:.3}, {:.3})",
        100.0 * (b / a - 1.0),
        a,
        b
    ));

    // two-point amplitude stability: rho_m(0)/m at two scales
    let mut amps = Vec::new();
    for m in [10usize, 20] {
        let est = estimate_rpoint_op(
            &cfg,
            &[m],
            &[vec![0.0; 5]],
            m,
            40_000,
            opts.crit_seed(13, 2 + m as u64),
        )?;
        amps.push(est.rho.mean / m as f64);
    }
    parts.push(format!(
        "two-point amplitude: {:.3} at m=10 vs {:.3} at m=20 ({:+.1}%)",
        amps[0],
        amps[1],
        100.0 * (amps[1] / amps[0] - 1.0)
    ));

    // space-time ball mass exponent, horizons scaled with R^2
    let radii = [2.0f64, 4.0, 6.0, 8.0];
    let n = 64usize;
    let seed = opts.crit_seed(13, 30);
    let mut masses = Vec::new();
    for &r in &radii {
        let hor = ((r * r) as usize).min(n);
        let stat = move |c: &ClusterSample| {
            let mut total = 0.0;
            for (g, gen) in c.generations.iter().enumerate().take(hor + 1) {
                let _ = g;
                for y in gen {
                    let r2: f64 = y.iter().map(|&c| (c * c) as f64).sum();
                    if r2 <= r * r {
                        total += 1.0;
                    }
                }
            }
            total
        };
        masses.push(iic_estimate(&cfg, stat, n, IicMode::SizeBiased, 20_000, seed)?);
    }
    let fit = fit_exponent(&radii, &masses)?;
    parts.push(format!(
        "ball mass slope = {:.2} +- {:.2} (reference 4 +- 0.8)",
        fit.exponent, fit.se
    ));

    // decay of two bond-disjoint survivals from generation 3
    let mut decays = Vec::new();
    for k in [3usize, 9, 15] {
        let s = disjoint_survival(&cfg, 3, k, 20, 20_000, opts.crit_seed(13, 40 + k as u64))?;
        decays.push(format!("k={k}: {:.3} +- {:.3}", s.mean, s.se));
    }
    parts.push(format!("disjoint survival from generation 3: {}", decays.join(", ")));

    // sanity only: the findings must all be finite
    let _ = sample_cluster(&cfg, 1, &mut sample_stream(opts.crit_seed(13, 99), 0), false, DEFAULT_FRONTIER_CAP)?;
    Ok((Status::Recorded, parts.join(" | ")))
}
