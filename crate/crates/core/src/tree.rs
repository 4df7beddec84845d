//! Family trees in word representation, lattice embeddings, exhaustive
//! enumeration of embedded-tree prefixes, Monte Carlo samplers, and the
//! survival-probability recursion.

use crate::error::{Error, Result};
use crate::law::{origin, OffspringLaw, Point, StepLaw};
use crate::rng::Stream;
use std::collections::{BTreeMap, HashMap};

/// A tree node label: the sequence of 1-based child indices from the root.
/// The root is the empty word.
pub type Word = Vec<u32>;

/// Default cap on live particles per sample.
pub const DEFAULT_POPULATION_CAP: u64 = 10_000_000;

/// Default bound on enumeration size.
pub const DEFAULT_ENUMERATION_BOUND: usize = 2_000_000;

/// A finite family tree represented by its prefix-closed word set.
/// Two trees are equal iff their word sets are equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    words: Vec<Word>, // sorted
}

impl Tree {
    pub fn new(mut words: Vec<Word>) -> Result<Self> {
        words.sort();
        words.dedup();
        if words.is_empty() || !words[0].is_empty() {
            return Err(Error::InvalidTree("word set must contain the root".into()));
        }
        let tree = Self { words };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        for w in &self.words {
            if w.is_empty() {
                continue;
            }
            // prefix closure
            let parent = &w[..w.len() - 1];
            if !self.contains(parent) {
                return Err(Error::InvalidTree(format!(
                    "word {w:?} present without its parent"
                )));
            }
            // gapless sibling indices: word ...j requires ...(j-1)
            let j = *w.last().unwrap();
            if j == 0 {
                return Err(Error::InvalidTree("child indices are 1-based".into()));
            }
            if j > 1 {
                let mut sib = w.clone();
                *sib.last_mut().unwrap() = j - 1;
                if !self.contains(&sib) {
                    return Err(Error::InvalidTree(format!(
                        "word {w:?} present but sibling {} missing",
                        j - 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, w: &[u32]) -> bool {
        self.words.binary_search_by(|probe| probe.as_slice().cmp(w)).is_ok()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    /// Offspring count of node `w`.
    pub fn offspring(&self, w: &[u32]) -> u32 {
        let mut child: Word = w.to_vec();
        child.push(1);
        let mut count = 0;
        while self.contains(&child) {
            count += 1;
            *child.last_mut().unwrap() += 1;
        }
        count
    }

    pub fn depth(&self) -> usize {
        self.words.iter().map(|w| w.len()).max().unwrap_or(0)
    }
}

/// P(T) = prod_i p_{xi_i} over all nodes of a finite tree.
pub fn tree_probability(law: &OffspringLaw, tree: &Tree) -> Result<f64> {
    let mut prob = 1.0;
    for w in tree.words() {
        let xi = tree.offspring(w) as usize;
        if xi > law.m_max() {
            return Err(Error::InvalidTree(format!(
                "offspring count {xi} exceeds the law's maximum {}",
                law.m_max()
            )));
        }
        prob *= law.prob(xi);
    }
    Ok(prob)
}

/// A labelled family tree with its embedding into Z^d, optionally carrying a
/// spine marker (the unique infinite line of descent of a conditioned sample).
#[derive(Debug, Clone)]
pub struct EmbeddedTree {
    pub nodes: BTreeMap<Word, Point>,
    pub spine: Option<Vec<Word>>,
}

impl EmbeddedTree {
    pub fn generation_count(&self, n: usize) -> u64 {
        self.nodes.keys().filter(|w| w.len() == n).count() as u64
    }

    /// mu_n: counts per site in generation n.
    pub fn site_population(&self, n: usize) -> HashMap<Point, u64> {
        let mut mu = HashMap::new();
        for (w, x) in &self.nodes {
            if w.len() == n {
                *mu.entry(x.clone()).or_insert(0) += 1;
            }
        }
        mu
    }

    pub fn depth(&self) -> usize {
        self.nodes.keys().map(|w| w.len()).max().unwrap_or(0)
    }
}

/// A depth-m embedded-tree prefix (T, phi)_m: the cylinder data on which the
/// incipient measures are defined. Offspring counts are specified for nodes
/// of generation < m only; generation-m nodes are leaves of the prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddedPrefix {
    pub depth: usize,
    pub nodes: BTreeMap<Word, Point>,
}

impl EmbeddedPrefix {
    pub fn root_only() -> Self {
        Self {
            depth: 0,
            nodes: [(Word::new(), origin(1))].into_iter().collect(),
        }
    }

    pub fn root_only_dim(dim: usize) -> Self {
        Self {
            depth: 0,
            nodes: [(Word::new(), origin(dim))].into_iter().collect(),
        }
    }

    /// N_m: number of generation-m nodes.
    pub fn generation_count(&self, n: usize) -> u64 {
        self.nodes.keys().filter(|w| w.len() == n).count() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.nodes.contains_key(&Word::new()) {
            return Err(Error::InvalidTree("prefix must contain the root".into()));
        }
        for (w, x) in &self.nodes {
            if w.len() > self.depth {
                return Err(Error::InvalidTree(format!(
                    "word {w:?} deeper than the prefix depth {}",
                    self.depth
                )));
            }
            if w.is_empty() {
                if x.iter().any(|&c| c != 0) {
                    return Err(Error::InvalidTree("root must sit at the origin".into()));
                }
                continue;
            }
            if *w.last().unwrap() == 0 {
                return Err(Error::InvalidTree("child indices are 1-based".into()));
            }
            if !self.nodes.contains_key(&w[..w.len() - 1]) {
                return Err(Error::InvalidTree(format!(
                    "word {w:?} present without its parent"
                )));
            }
            if *w.last().unwrap() > 1 {
                let mut sib = w.clone();
                *sib.last_mut().unwrap() -= 1;
                if !self.nodes.contains_key(&sib) {
                    return Err(Error::InvalidTree(format!(
                        "word {w:?} present but a lower sibling is missing"
                    )));
                }
            }
        }
        Ok(())
    }

    /// P^brw((T, phi)_m = C): offspring factors for generations < m and one
    /// step factor per edge.
    pub fn probability(&self, law: &OffspringLaw, step: &StepLaw) -> Result<f64> {
        self.validate()?;
        let mut prob = 1.0;
        for (w, x) in &self.nodes {
            if w.len() < self.depth {
                let mut child = w.clone();
                child.push(1);
                let mut xi = 0usize;
                while self.nodes.contains_key(&child) {
                    xi += 1;
                    *child.last_mut().unwrap() += 1;
                }
                if xi > law.m_max() {
                    return Err(Error::InvalidTree(format!(
                        "offspring count {xi} exceeds the law's maximum"
                    )));
                }
                prob *= law.prob(xi);
            }
            if !w.is_empty() {
                let parent = &self.nodes[&w[..w.len() - 1]];
                let diff: Point = x.iter().zip(parent.iter()).map(|(a, b)| a - b).collect();
                let d = step
                    .support()
                    .iter()
                    .find(|(o, _)| *o == diff)
                    .map(|(_, p)| *p)
                    .unwrap_or(0.0);
                prob *= d;
            }
        }
        Ok(prob)
    }
}

/// Exhaustive list of all depth-m embedded prefixes with their probabilities.
pub fn enumerate_embedded_prefixes(
    law: &OffspringLaw,
    step: &StepLaw,
    m: usize,
    bound: usize,
) -> Result<Vec<(EmbeddedPrefix, f64)>> {
    let root = EmbeddedPrefix::root_only_dim(step.dim());
    let mut level: Vec<(EmbeddedPrefix, f64)> = vec![(root, 1.0)];
    for gen in 0..m {
        let mut next = Vec::new();
        for (prefix, prob) in &level {
            let frontier: Vec<(Word, Point)> = prefix
                .nodes
                .iter()
                .filter(|(w, _)| w.len() == gen)
                .map(|(w, x)| (w.clone(), x.clone()))
                .collect();
            // Extensions of this prefix: for each frontier node choose an
            // offspring count and a site for every child.
            let mut partials: Vec<(BTreeMap<Word, Point>, f64)> =
                vec![(BTreeMap::new(), *prob)];
            for (w, x) in &frontier {
                let mut grown = Vec::new();
                for (partial, p) in &partials {
                    for xi in 0..=law.m_max() {
                        let pxi = law.prob(xi);
                        if pxi == 0.0 {
                            continue;
                        }
                        // all site assignments for xi children
                        let mut assigns: Vec<(Vec<(Word, Point)>, f64)> = vec![(Vec::new(), 1.0)];
                        for j in 1..=xi as u32 {
                            let mut next_assigns = Vec::new();
                            for (children, cp) in &assigns {
                                for (offset, dprob) in step.support() {
                                    let mut cw = w.clone();
                                    cw.push(j);
                                    let site: Point =
                                        x.iter().zip(offset.iter()).map(|(a, b)| a + b).collect();
                                    let mut c2 = children.clone();
                                    c2.push((cw, site));
                                    next_assigns.push((c2, cp * dprob));
                                }
                            }
                            assigns = next_assigns;
                        }
                        for (children, cp) in assigns {
                            let mut np = partial.clone();
                            for (cw, site) in children {
                                np.insert(cw, site);
                            }
                            grown.push((np, p * pxi * cp));
                        }
                    }
                }
                partials = grown;
                if partials.len() > bound {
                    return Err(Error::EnumerationBound {
                        size: partials.len(),
                        bound,
                    });
                }
            }
            for (new_nodes, p) in partials {
                let mut nodes = prefix.nodes.clone();
                nodes.extend(new_nodes);
                next.push((
                    EmbeddedPrefix {
                        depth: gen + 1,
                        nodes,
                    },
                    p,
                ));
            }
            if next.len() > bound {
                return Err(Error::EnumerationBound {
                    size: next.len(),
                    bound,
                });
            }
        }
        level = next;
    }
    // normalize depth field (trees extinct before m still have depth m)
    for (prefix, _) in &mut level {
        prefix.depth = m;
    }
    Ok(level)
}

/// Samples a full embedded tree (explicit words) truncated at `depth_cap`.
pub fn sample_embedded_tree(
    law: &OffspringLaw,
    step: &StepLaw,
    depth_cap: usize,
    rng: &mut Stream,
    population_cap: u64,
) -> Result<EmbeddedTree> {
    let mut nodes = BTreeMap::new();
    nodes.insert(Word::new(), origin(step.dim()));
    let mut frontier: Vec<(Word, Point)> = vec![(Word::new(), origin(step.dim()))];
    for _ in 0..depth_cap {
        let mut next = Vec::new();
        for (w, x) in &frontier {
            let xi = law.sample(rng);
            for j in 1..=xi as u32 {
                let offset = step.sample(rng);
                let site: Point = x.iter().zip(offset.iter()).map(|(a, b)| a + b).collect();
                let mut cw = w.clone();
                cw.push(j);
                nodes.insert(cw.clone(), site.clone());
                next.push((cw, site));
            }
        }
        if next.len() as u64 > population_cap {
            return Err(Error::PopulationCap {
                live: next.len() as u64,
                cap: population_cap,
            });
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(EmbeddedTree { nodes, spine: None })
}

/// Per-generation site populations mu_0..mu_depth of one BRW sample, using
/// the frontier-only representation (no tree labels kept).
pub fn sample_population_profile(
    law: &OffspringLaw,
    step: &StepLaw,
    depth_cap: usize,
    rng: &mut Stream,
    population_cap: u64,
) -> Result<Vec<HashMap<Point, u64>>> {
    let mut profile = Vec::with_capacity(depth_cap + 1);
    let mut frontier: Vec<Point> = vec![origin(step.dim())];
    profile.push([(origin(step.dim()), 1u64)].into_iter().collect());
    for _ in 0..depth_cap {
        let mut next: Vec<Point> = Vec::new();
        for x in &frontier {
            let xi = law.sample(rng);
            for _ in 0..xi {
                let offset = step.sample(rng);
                next.push(x.iter().zip(offset.iter()).map(|(a, b)| a + b).collect());
            }
        }
        if next.len() as u64 > population_cap {
            return Err(Error::PopulationCap {
                live: next.len() as u64,
                cap: population_cap,
            });
        }
        let mut mu: HashMap<Point, u64> = HashMap::new();
        for x in &next {
            *mu.entry(x.clone()).or_insert(0) += 1;
        }
        profile.push(mu);
        frontier = next;
        if frontier.is_empty() {
            // extinct: remaining generations are empty
            while profile.len() <= depth_cap {
                profile.push(HashMap::new());
            }
            break;
        }
    }
    Ok(profile)
}

/// The survival curve theta_0..theta_n.
#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    pub thetas: Vec<f64>,
}

impl SurvivalCurve {
    pub fn theta(&self, n: usize) -> f64 {
        self.thetas[n]
    }
}

/// theta_0 = 1, theta_k = 1 - g(1 - theta_{k-1}).
///
/// Evaluated as theta_k = sum_m p_m (1 - (1-theta)^m) with log1p/expm1 and
/// compensated summation, since theta_n ~ 2/(sigma_p^2 n) loses relative
/// accuracy through the naive form at large n.
pub fn survival_probability(law: &OffspringLaw, n: usize) -> SurvivalCurve {
    let mut thetas = Vec::with_capacity(n + 1);
    thetas.push(1.0);
    let mut theta = 1.0f64;
    for _ in 0..n {
        let log_1mt = if theta >= 1.0 {
            f64::NEG_INFINITY
        } else {
            (-theta).ln_1p()
        };
        // Kahan summation of sum_m p_m * (1 - (1-theta)^m)
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (m, &p) in law.probs().iter().enumerate() {
            if p == 0.0 || m == 0 {
                continue;
            }
            let term = p * (-(m as f64 * log_1mt).exp_m1());
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        theta = sum;
        thetas.push(theta);
    }
    SurvivalCurve { thetas }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_stream;
    use approx::assert_abs_diff_eq;

    fn binary() -> OffspringLaw {
        OffspringLaw::binary()
    }

    #[test]
    fn tree_probability_examples() {
        let law = binary();
        // single root, xi = 0 -> p_0 = 1/2
        let t = Tree::new(vec![vec![]]).unwrap();
        assert_abs_diff_eq!(tree_probability(&law, &t).unwrap(), 0.5);
        // root with two leaf children -> p_2 p_0 p_0 = 1/8
        let t = Tree::new(vec![vec![], vec![1], vec![2]]).unwrap();
        assert_abs_diff_eq!(tree_probability(&law, &t).unwrap(), 0.125);
        // degenerate: offspring count with zero probability
        let t = Tree::new(vec![vec![], vec![1]]).unwrap();
        assert_abs_diff_eq!(tree_probability(&law, &t).unwrap(), 0.0);
    }

    #[test]
    fn invalid_word_sets_rejected() {
        // missing parent
        assert!(Tree::new(vec![vec![], vec![1, 1]]).is_err());
        // gap in sibling indices
        assert!(Tree::new(vec![vec![], vec![2]]).is_err());
        // 0-based child index
        assert!(Tree::new(vec![vec![], vec![0]]).is_err());
        // missing root
        assert!(Tree::new(vec![vec![1]]).is_err());
    }

    #[test]
    fn enumeration_binary_depth_one() {
        let law = binary();
        let step = StepLaw::simple(1);
        let prefixes = enumerate_embedded_prefixes(&law, &step, 1, 10_000).unwrap();
        // xi = 0 gives 1 prefix (prob 1/2); xi = 2 gives 4 site assignments
        // (prob 1/8 each): 5 prefixes in total.
        assert_eq!(prefixes.len(), 5);
        let total: f64 = prefixes.iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        for (prefix, prob) in &prefixes {
            let recomputed = prefix.probability(&law, &step).unwrap();
            assert_abs_diff_eq!(recomputed, *prob, epsilon = 1e-14);
        }
    }

    #[test]
    fn enumeration_depth_zero() {
        let law = binary();
        let step = StepLaw::simple(1);
        let prefixes = enumerate_embedded_prefixes(&law, &step, 0, 100).unwrap();
        assert_eq!(prefixes.len(), 1);
        assert_abs_diff_eq!(prefixes[0].1, 1.0);
    }

    #[test]
    fn enumeration_total_probability_depth_three() {
        let law = binary();
        let step = StepLaw::simple(1);
        let prefixes = enumerate_embedded_prefixes(&law, &step, 3, 200_000).unwrap();
        let total: f64 = prefixes.iter().map(|(_, p)| p).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn enumeration_bound_error() {
        let law = binary();
        let step = StepLaw::simple(1);
        assert!(matches!(
            enumerate_embedded_prefixes(&law, &step, 4, 100),
            Err(Error::EnumerationBound { .. })
        ));
    }

    #[test]
    fn survival_binary_exact_values() {
        let law = binary();
        let curve = survival_probability(&law, 2);
        assert_abs_diff_eq!(curve.theta(0), 1.0);
        assert_abs_diff_eq!(curve.theta(1), 0.5, epsilon = 1e-15);
        // enumeration oracle at depth 2: surviving mass 3/8
        assert_abs_diff_eq!(curve.theta(2), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn survival_binary_depth_two_matches_enumeration() {
        let law = binary();
        let step = StepLaw::simple(1);
        let prefixes = enumerate_embedded_prefixes(&law, &step, 2, 100_000).unwrap();
        let surviving: f64 = prefixes
            .iter()
            .filter(|(c, _)| c.generation_count(2) > 0)
            .map(|(_, p)| p)
            .sum();
        let curve = survival_probability(&law, 2);
        assert_abs_diff_eq!(curve.theta(2), surviving, epsilon = 1e-12);
    }

    #[test]
    fn survival_poisson_first_step() {
        let law = OffspringLaw::poisson1(16).unwrap();
        let curve = survival_probability(&law, 1);
        // theta_1 = 1 - g(0) = 1 - p_0; for Poisson(1) truncated this is
        // close to 1 - e^{-1}
        assert_abs_diff_eq!(curve.theta(1), 1.0 - law.pgf(0.0), epsilon = 1e-15);
        assert_abs_diff_eq!(curve.theta(1), 1.0 - (-1.0f64).exp(), epsilon = 1e-3);
    }

    #[test]
    fn survival_is_monotone_and_positive() {
        for law in [binary(), OffspringLaw::poisson1(12).unwrap()] {
            let curve = survival_probability(&law, 2000);
            for k in 1..curve.thetas.len() {
                assert!(curve.thetas[k] <= curve.thetas[k - 1]);
                assert!(curve.thetas[k] > 0.0);
            }
        }
    }

    #[test]
    fn kolmogorov_asymptotics() {
        for law in [binary(), OffspringLaw::poisson1(16).unwrap()] {
            let n = 100_000;
            let curve = survival_probability(&law, n);
            let target = 2.0 / law.sigma_p_sq();
            assert!(
                (n as f64 * curve.theta(n) - target).abs() <= 0.05,
                "n*theta_n = {} vs {}",
                n as f64 * curve.theta(n),
                target
            );
        }
    }

    #[test]
    fn sampler_depth_zero() {
        let law = binary();
        let step = StepLaw::simple(1);
        let mut rng = sample_stream(1, 0);
        let t = sample_embedded_tree(&law, &step, 0, &mut rng, 1000).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.generation_count(0), 1);
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        let law = binary();
        let step = StepLaw::simple(2);
        let a = sample_embedded_tree(&law, &step, 8, &mut sample_stream(9, 4), 100_000).unwrap();
        let b = sample_embedded_tree(&law, &step, 8, &mut sample_stream(9, 4), 100_000).unwrap();
        assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn first_generation_split_probability() {
        let law = binary();
        let step = StepLaw::simple(1);
        let n = 100_000;
        let mut hits = 0u64;
        for i in 0..n {
            let mut rng = sample_stream(11, i);
            let t = sample_embedded_tree(&law, &step, 1, &mut rng, 1000).unwrap();
            if t.generation_count(1) == 2 {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let se = (0.25f64 / n as f64).sqrt();
        assert!((p - 0.5).abs() <= 3.0 * se, "p = {p}");
    }

    #[test]
    fn mass_martingale() {
        // empirical E[N_n] = 1 within 3 SE for n <= 20
        let law = binary();
        let step = StepLaw::simple(1);
        let samples = 20_000;
        let mut counts = vec![Vec::with_capacity(samples); 21];
        for i in 0..samples {
            let mut rng = sample_stream(13, i as u64);
            let profile =
                sample_population_profile(&law, &step, 20, &mut rng, 10_000_000).unwrap();
            for n in 0..=20 {
                let total: u64 = profile[n].values().sum();
                counts[n].push(total as f64);
            }
        }
        for n in 1..=20 {
            let s = crate::stats::summarize(&counts[n]);
            assert!(
                (s.mean - 1.0).abs() <= 3.0 * s.se,
                "generation {n}: mean {} se {}",
                s.mean,
                s.se
            );
        }
    }
}
