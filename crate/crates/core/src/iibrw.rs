//! The incipient infinite branching random walk: cylinder probabilities of
//! the limit measure, the finite-horizon conditioned measure converging to
//! it, and direct samplers built on the immortal-particle decomposition.

use crate::error::{Error, Result};
use crate::law::{origin, OffspringLaw, Point, StepLaw};
use crate::rng::Stream;
use crate::tree::{
    sample_population_profile, EmbeddedPrefix, EmbeddedTree, SurvivalCurve, Word,
};
use std::collections::{BTreeMap, HashMap};

/// P_inf(C) = N_m(C) P(C): the size-biased limit of conditioning on deep
/// survival. Normalized because E[N_m] = 1 at criticality.
pub fn iibrw_probability(law: &OffspringLaw, step: &StepLaw, prefix: &EmbeddedPrefix) -> Result<f64> {
    let n_m = prefix.generation_count(prefix.depth) as f64;
    Ok(n_m * prefix.probability(law, step)?)
}

/// Q_n(C) = P(C) (1 - (1 - theta_{n-m})^{N_m}) / theta_n: the law of the
/// depth-m prefix conditioned on survival to generation n >= m.
pub fn finite_n_probability(
    law: &OffspringLaw,
    step: &StepLaw,
    prefix: &EmbeddedPrefix,
    n: usize,
    curve: &SurvivalCurve,
) -> Result<f64> {
    let m = prefix.depth;
    if n < m {
        return Err(Error::InvalidConfig(format!(
            "survival horizon {n} below the prefix depth {m}"
        )));
    }
    let n_m = prefix.generation_count(m);
    let theta_tail = curve.theta(n - m);
    // 1 - (1-theta)^N without cancellation
    let surv = -((n_m as f64) * (-theta_tail).ln_1p()).exp_m1();
    Ok(prefix.probability(law, step)? * surv / curve.theta(n))
}

/// One spine generation: the spine individual produces 1 + zeta children in
/// total (size-biased), the spine continues through one of them, and the
/// remaining `zeta` start independent unconditioned critical trees.
#[derive(Debug, Clone, Copy)]
pub struct SpineStep {
    /// 1-based index of the spine child among the brood.
    pub v: u32,
    /// Number of side children.
    pub zeta: u32,
}

pub fn sample_spine_step(law: &OffspringLaw, rng: &mut Stream) -> SpineStep {
    use rand::Rng;
    let total = law.sample_size_biased(rng) as u32;
    let v = rng.gen_range(1..=total);
    SpineStep { v, zeta: total - 1 }
}

/// Samples the depth-m prefix of the IIBRW with the spine words recorded.
pub fn sample_iibrw(
    law: &OffspringLaw,
    step: &StepLaw,
    m: usize,
    rng: &mut Stream,
    population_cap: u64,
) -> Result<EmbeddedTree> {
    let mut nodes: BTreeMap<Word, Point> = BTreeMap::new();
    nodes.insert(Word::new(), origin(step.dim()));
    let mut spine: Vec<Word> = vec![Word::new()];
    let mut spine_word = Word::new();
    let mut spine_site = origin(step.dim());
    let mut live: u64 = 1;
    // side subtrees pending growth: (word, site, remaining horizon)
    let mut side: Vec<(Word, Point, usize)> = Vec::new();
    for gen in 0..m {
        let s = sample_spine_step(law, rng);
        let mut next_spine: Option<(Word, Point)> = None;
        for j in 1..=(s.zeta + 1) {
            let offset = step.sample(rng);
            let site: Point = spine_site.iter().zip(offset.iter()).map(|(a, b)| a + b).collect();
            let mut w = spine_word.clone();
            w.push(j);
            nodes.insert(w.clone(), site.clone());
            live += 1;
            if j == s.v {
                next_spine = Some((w.clone(), site));
                spine.push(w);
            } else {
                side.push((w, site, m - gen - 1));
            }
        }
        let (w, site) = next_spine.expect("spine child index is in range");
        spine_word = w;
        spine_site = site;
        if live > population_cap {
            return Err(Error::PopulationCap {
                live,
                cap: population_cap,
            });
        }
    }
    // grow the side trees, breadth first within each
    while let Some((w, x, horizon)) = side.pop() {
        if horizon == 0 {
            continue;
        }
        let xi = law.sample(rng);
        for j in 1..=xi as u32 {
            let offset = step.sample(rng);
            let site: Point = x.iter().zip(offset.iter()).map(|(a, b)| a + b).collect();
            let mut cw = w.clone();
            cw.push(j);
            nodes.insert(cw.clone(), site.clone());
            live += 1;
            if live > population_cap {
                return Err(Error::PopulationCap {
                    live,
                    cap: population_cap,
                });
            }
            side.push((cw, site, horizon - 1));
        }
    }
    Ok(EmbeddedTree {
        nodes,
        spine: Some(spine),
    })
}

/// Per-generation site populations of an IIBRW sample up to depth m, without
/// tree labels: only the spine trajectory and the aggregate counts are kept,
/// so deep horizons in high dimension stay cheap.
pub struct IibrwProfile {
    /// omega(0..=m): the spine positions.
    pub spine: Vec<Point>,
    /// mu_0..mu_m as site -> count maps.
    pub populations: Vec<HashMap<Point, u64>>,
}

pub fn sample_iibrw_profile(
    law: &OffspringLaw,
    step: &StepLaw,
    m: usize,
    rng: &mut Stream,
    population_cap: u64,
) -> Result<IibrwProfile> {
    let mut spine = Vec::with_capacity(m + 1);
    spine.push(origin(step.dim()));
    let mut populations: Vec<HashMap<Point, u64>> = Vec::with_capacity(m + 1);
    populations.push([(origin(step.dim()), 1u64)].into_iter().collect());
    for _ in 1..=m {
        populations.push(HashMap::new());
    }
    // side frontiers per birth generation, advanced one step at a time:
    // frontier[g] holds the live side particles currently at generation g.
    let mut frontiers: Vec<Vec<Point>> = vec![Vec::new(); m + 1];
    for gen in 0..m {
        let s = sample_spine_step(law, rng);
        let x = spine[gen].clone();
        for j in 1..=(s.zeta + 1) {
            let offset = step.sample(rng);
            let site: Point = x.iter().zip(offset.iter()).map(|(a, b)| a + b).collect();
            *populations[gen + 1].entry(site.clone()).or_insert(0) += 1;
            if j == s.v {
                spine.push(site);
            } else {
                frontiers[gen + 1].push(site);
            }
        }
        // advance every existing side frontier by one generation
        let mut live: u64 = 0;
        for g in (1..=gen).rev() {
            let cur = std::mem::take(&mut frontiers[g]);
            let mut next = Vec::new();
            for x in &cur {
                let xi = law.sample(rng);
                for _ in 0..xi {
                    let offset = step.sample(rng);
                    let site: Point =
                        x.iter().zip(offset.iter()).map(|(a, b)| a + b).collect();
                    *populations[g + 1].entry(site.clone()).or_insert(0) += 1;
                    next.push(site);
                }
            }
            live += next.len() as u64;
            frontiers[g + 1].extend(next);
        }
        if live > population_cap {
            return Err(Error::PopulationCap {
                live,
                cap: population_cap,
            });
        }
    }
    Ok(IibrwProfile { spine, populations })
}

/// The spatially-marked immortal-particle construction spelled out against a
/// given spine trajectory: at each generation n the spine sits at omega(n)
/// and sheds zeta_n side trees started there. This variant consumes an
/// externally supplied walk, for studies that decouple the walk from the
/// branching.
pub fn sample_iibrw_along_walk(
    law: &OffspringLaw,
    step: &StepLaw,
    walk: &[Point],
    rng: &mut Stream,
    population_cap: u64,
) -> Result<Vec<HashMap<Point, u64>>> {
    let m = walk.len() - 1;
    let mut populations: Vec<HashMap<Point, u64>> = vec![HashMap::new(); m + 1];
    populations[0].insert(walk[0].clone(), 1);
    for (gen, x) in walk.iter().enumerate() {
        if gen > 0 {
            *populations[gen].entry(x.clone()).or_insert(0) += 1;
        }
        if gen == m {
            break;
        }
        let zeta = sample_spine_step(law, rng).zeta;
        for _ in 0..zeta {
            // each side tree is rooted at the spine position and its root's
            // own displacement is part of the side tree's first step
            let offset = step.sample(rng);
            let root: Point = x.iter().zip(offset.iter()).map(|(a, b)| a + b).collect();
            *populations[gen + 1].entry(root.clone()).or_insert(0) += 1;
            if gen + 1 < m + 1 {
                let profile =
                    sample_population_profile(law, step, m - gen - 1, rng, population_cap)?;
                for (dt, mu) in profile.iter().enumerate().skip(1) {
                    for (y, c) in mu {
                        let site: Point =
                            root.iter().zip(y.iter()).map(|(a, b)| a + b).collect();
                        *populations[gen + 1 + dt].entry(site).or_insert(0) += c;
                    }
                }
            }
        }
    }
    Ok(populations)
}
