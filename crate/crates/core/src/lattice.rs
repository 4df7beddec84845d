//! Infinite-structure samplers: wired uniform spanning forests by Wilson's
//! algorithm (explicit small boxes and a lazy large-box variant), loop-erased
//! random walk, invasion percolation with the capped-weight variant, and
//! shortest-path distance infrastructure.

use crate::error::{Error, Result};
use crate::law::{origin, Point};
use crate::rng::Stream;
use crate::stats::{summarize, Summary};
use rand::Rng;
use rayon::prelude::*;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

/// An undirected multigraph; parallel edges are distinct and matter for
/// spanning-tree counts.
#[derive(Debug, Clone)]
pub struct MultiGraph {
    adj: Vec<Vec<(usize, usize)>>, // (neighbor, edge id)
    n_edges: usize,
}

impl MultiGraph {
    pub fn new(n_vertices: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n_vertices],
            n_edges: 0,
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> usize {
        let id = self.n_edges;
        self.adj[u].push((v, id));
        self.adj[v].push((u, id));
        self.n_edges += 1;
        id
    }

    pub fn n_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    fn random_step(&self, v: usize, rng: &mut Stream) -> (usize, usize) {
        self.adj[v][rng.gen_range(0..self.adj[v].len())]
    }
}

/// Chronological loop-erased random walk from `start` until it hits
/// `in_target`. Returns the self-avoiding path as (vertex, edge into it);
/// the first entry has no incoming edge. A start inside the target set
/// yields a path with no edges.
pub fn lerw(
    graph: &MultiGraph,
    start: usize,
    in_target: impl Fn(usize) -> bool,
    rng: &mut Stream,
) -> Vec<(usize, Option<usize>)> {
    let mut path: Vec<(usize, Option<usize>)> = vec![(start, None)];
    let mut pos: HashMap<usize, usize> = HashMap::new();
    pos.insert(start, 0);
    while !in_target(path.last().unwrap().0) {
        let (v, _) = *path.last().unwrap();
        let (next, edge) = graph.random_step(v, rng);
        if let Some(&i) = pos.get(&next) {
            // loop: erase everything after the earlier visit
            for (u, _) in path.drain(i + 1..) {
                pos.remove(&u);
            }
        } else {
            pos.insert(next, path.len());
            path.push((next, Some(edge)));
        }
    }
    path
}

/// A rooted spanning tree of a multigraph: parent vertex and connecting
/// edge id per non-root vertex.
#[derive(Debug, Clone)]
pub struct ForestSample {
    pub root: usize,
    pub parent: Vec<Option<(usize, usize)>>,
}

impl ForestSample {
    /// Sorted edge ids of the tree, a canonical key for its shape.
    pub fn edge_key(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.parent.iter().flatten().map(|&(_, e)| e).collect();
        ids.sort_unstable();
        ids
    }

    /// Tree distances from `from` over the tree edges; the root is a valid
    /// endpoint like any other vertex.
    pub fn tree_distances(&self, from: usize) -> Vec<u32> {
        let n = self.parent.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (v, p) in self.parent.iter().enumerate() {
            if let Some((u, _)) = p {
                adj[v].push(*u);
                adj[*u].push(v);
            }
        }
        let mut dist = vec![u32::MAX; n];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if dist[u] == u32::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist
    }
}

/// Wilson's algorithm rooted at `root`: repeatedly loop-erase a walk from
/// the next unvisited vertex to the current forest and graft it. `order`
/// defaults to 0..n; the resulting tree law does not depend on it.
pub fn wilson(graph: &MultiGraph, root: usize, order: &[usize], rng: &mut Stream) -> ForestSample {
    let n = graph.n_vertices();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut in_tree = vec![false; n];
    in_tree[root] = true;
    for &start in order {
        if in_tree[start] {
            continue;
        }
        let path = lerw(graph, start, |v| in_tree[v], rng);
        for w in path.windows(2) {
            let (u, _) = w[0];
            let (v, e) = w[1];
            parent[u] = Some((v, e.expect("non-initial path entries carry edges")));
            in_tree[u] = true;
        }
    }
    ForestSample { root, parent }
}

/// The box [-n, n]^d with nearest-neighbour adjacency and a single wired
/// vertex absorbing every edge that leaves the box (so boundary vertices
/// keep full degree 2d via parallel edges to the wired vertex).
#[derive(Debug, Clone)]
pub struct WiredBox {
    pub dim: usize,
    pub n: i64,
    side: i64,
}

/// Explicit-graph size cap for the wired box.
pub const WIRED_BOX_VERTEX_CAP: usize = 2_000_000;

impl WiredBox {
    pub fn new(dim: usize, n: i64) -> Result<Self> {
        if dim == 0 || n < 0 {
            return Err(Error::InvalidConfig("need dim >= 1 and n >= 0".into()));
        }
        Ok(Self {
            dim,
            n,
            side: 2 * n + 1,
        })
    }

    pub fn n_vertices(&self) -> usize {
        (self.side as usize).pow(self.dim as u32)
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.iter().all(|&c| c.abs() <= self.n)
    }

    pub fn index(&self, x: &Point) -> usize {
        let mut idx = 0usize;
        for &c in x.iter() {
            idx = idx * self.side as usize + (c + self.n) as usize;
        }
        idx
    }

    pub fn vertex(&self, mut idx: usize) -> Point {
        let mut x = origin(self.dim);
        for i in (0..self.dim).rev() {
            x[i] = (idx % self.side as usize) as i64 - self.n;
            idx /= self.side as usize;
        }
        x
    }

    /// The explicit multigraph; the wired vertex gets the last index.
    pub fn graph(&self) -> Result<(MultiGraph, usize)> {
        let nv = self.n_vertices();
        if nv > WIRED_BOX_VERTEX_CAP {
            return Err(Error::EnumerationBound {
                size: nv,
                bound: WIRED_BOX_VERTEX_CAP,
            });
        }
        let wired = nv;
        let mut graph = MultiGraph::new(nv + 1);
        for idx in 0..nv {
            let x = self.vertex(idx);
            for axis in 0..self.dim {
                for sign in [-1i64, 1] {
                    let mut y = x.clone();
                    y[axis] += sign;
                    if self.contains(&y) {
                        // each in-box edge once
                        if sign == 1 {
                            graph.add_edge(idx, self.index(&y));
                        }
                    } else {
                        graph.add_edge(idx, wired);
                    }
                }
            }
        }
        Ok((graph, wired))
    }
}

/// T(0) of a lazily grown wired spanning tree: tree distances from the
/// origin for every vertex of the origin's component within distance cap.
///
/// Only the origin and the vertices of the lattice ball of radius `m_max`
/// are processed; by the order independence of Wilson's algorithm this
/// yields the correct joint law of all tree distances up to `m_max`, since
/// a tree path of length <= m_max only visits vertices at lattice distance
/// <= m_max.
pub fn wired_tree_ball(
    boxx: &WiredBox,
    m_max: usize,
    rng: &mut Stream,
) -> Result<HashMap<Point, u32>> {
    if m_max as i64 * 4 > 2 * boxx.n {
        return Err(Error::BoundaryGuard {
            t: m_max,
            guard: (boxx.n / 2) as usize,
        });
    }
    // parent chains; None marks the wired root as parent
    let mut parent: HashMap<Point, Option<Point>> = HashMap::new();
    let mut in_tree: HashSet<Point> = HashSet::new();

    let grow = |start: Point,
                    parent: &mut HashMap<Point, Option<Point>>,
                    in_tree: &mut HashSet<Point>,
                    rng: &mut Stream| {
        if in_tree.contains(&start) {
            return;
        }
        // loop-erased walk until the current tree or the wired boundary
        let mut path: Vec<Point> = vec![start.clone()];
        let mut pos: HashMap<Point, usize> = HashMap::new();
        pos.insert(start, 0);
        let hits_wired;
        loop {
            let v = path.last().unwrap().clone();
            if in_tree.contains(&v) {
                hits_wired = false;
                break;
            }
            let axis = rng.gen_range(0..boxx.dim);
            let sign = if rng.gen::<bool>() { 1 } else { -1 };
            let mut next = v.clone();
            next[axis] += sign;
            if !boxx.contains(&next) {
                hits_wired = true;
                break;
            }
            if let Some(&i) = pos.get(&next) {
                for u in path.drain(i + 1..) {
                    pos.remove(&u);
                }
            } else {
                pos.insert(next.clone(), path.len());
                path.push(next);
            }
        }
        for w in path.windows(2) {
            parent.insert(w[0].clone(), Some(w[1].clone()));
            in_tree.insert(w[0].clone());
        }
        let last = path.last().unwrap().clone();
        if hits_wired {
            parent.insert(last.clone(), None);
            in_tree.insert(last);
        }
    };

    grow(origin(boxx.dim), &mut parent, &mut in_tree, rng);
    // every lattice point within L1 distance m_max
    let ball = l1_ball(boxx.dim, m_max as i64);
    for x in &ball {
        if boxx.contains(x) {
            grow(x.clone(), &mut parent, &mut in_tree, rng);
        }
    }

    // ancestors of the origin with their depth along the chain
    let mut origin_chain: HashMap<Point, u32> = HashMap::new();
    let mut cur = Some(origin(boxx.dim));
    let mut depth = 0u32;
    while let Some(v) = cur {
        origin_chain.insert(v.clone(), depth);
        depth += 1;
        cur = parent[&v].clone();
    }

    let mut dist: HashMap<Point, u32> = HashMap::new();
    for x in &ball {
        if !boxx.contains(x) {
            continue;
        }
        // climb from x until the origin's chain or the wired root
        let mut steps = 0u32;
        let mut cur = Some(x.clone());
        let mut found: Option<u32> = None;
        while let Some(v) = cur {
            if let Some(&d0) = origin_chain.get(&v) {
                found = Some(steps + d0);
                break;
            }
            steps += 1;
            cur = parent[&v].clone();
        }
        // reaching the wired root without meeting the chain means x is in
        // another component of the forest
        if let Some(d) = found {
            if d as usize <= m_max {
                dist.insert(x.clone(), d);
            }
        }
    }
    Ok(dist)
}

/// All lattice points with L1 norm <= r.
pub fn l1_ball(dim: usize, r: i64) -> Vec<Point> {
    let mut out = Vec::new();
    let mut cur = origin(dim);
    fn rec(dim: usize, axis: usize, left: i64, cur: &mut Point, out: &mut Vec<Point>) {
        if axis == dim {
            out.push(cur.clone());
            return;
        }
        for v in -left..=left {
            cur[axis] = v;
            rec(dim, axis + 1, left - v.abs(), cur, out);
        }
        cur[axis] = 0;
    }
    rec(dim, 0, r, &mut cur, &mut out);
    out
}

/// Wired-forest r-point estimates: phase sums over tree-distance shells of
/// T(0), averaged over independent forests.
#[derive(Debug, Clone)]
pub struct UsfEstimate {
    pub rho: Summary,
    /// mean shell sizes #{x in T(0): |SP(x)| = m} for m = 0..=m_max
    pub shells: Vec<Summary>,
}

pub fn usf_rpoint(
    boxx: &WiredBox,
    times: &[usize],
    kvecs: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<UsfEstimate> {
    if times.is_empty() || times.len() != kvecs.len() {
        return Err(Error::InvalidConfig(
            "times and wave vectors must be nonempty and of equal length".into(),
        ));
    }
    for k in kvecs {
        if k.len() != boxx.dim {
            return Err(Error::InvalidConfig("wave vector dimension mismatch".into()));
        }
    }
    let m_max = *times.iter().max().unwrap();
    let rows: Vec<(f64, Vec<f64>)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::rng::sample_stream(seed, i);
            let dist = wired_tree_ball(boxx, m_max, &mut rng)?;
            let mut shells = vec![0.0f64; m_max + 1];
            for &d in dist.values() {
                shells[d as usize] += 1.0;
            }
            let value = phase_product(&dist, times, kvecs);
            Ok((value, shells))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = rows.iter().map(|(v, _)| *v).collect();
    let mut shells = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let col: Vec<f64> = rows.iter().map(|(_, s)| s[m]).collect();
        shells.push(summarize(&col));
    }
    Ok(UsfEstimate {
        rho: summarize(&values),
        shells,
    })
}

/// Re(prod_j sum_{x: dist(x) = m_j} e^{i k_j . x}).
fn phase_product(dist: &HashMap<Point, u32>, times: &[usize], kvecs: &[Vec<f64>]) -> f64 {
    let (mut re, mut im) = (1.0, 0.0);
    for (m, k) in times.iter().zip(kvecs) {
        let (mut sre, mut sim) = (0.0, 0.0);
        for (x, &d) in dist {
            if d as usize == *m {
                let dot: f64 = x.iter().zip(k).map(|(c, kc)| *c as f64 * kc).sum();
                sre += dot.cos();
                sim += dot.sin();
            }
        }
        let (nre, nim) = (re * sre - im * sim, re * sim + im * sre);
        re = nre;
        im = nim;
    }
    re
}

/// Canonical undirected bond key.
pub fn bond_key(a: &Point, b: &Point) -> (Point, Point) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Weight(f64);
impl Eq for Weight {}
impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Weight {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Invasion percolation setup on Z^d with nearest-neighbour bonds. With a
/// cap, weights are uniform on [0, cap] with probability cap and infinite
/// otherwise; infinite-weight bonds are only crossed when no finite-weight
/// boundary bond remains, by a uniform pick among the boundary bonds.
#[derive(Debug, Clone)]
pub struct InvasionConfig {
    pub dim: usize,
    pub cap: Option<f64>,
}

/// Default cap on the exposed-bond table.
pub const DEFAULT_EXPOSED_CAP: usize = 50_000_000;

#[derive(Debug, Clone)]
pub struct InvasionState {
    pub invaded_bonds: Vec<(Point, Point)>,
    pub invaded_vertices: HashSet<Point>,
    /// accepted weights in invasion order; infinity marks uniform picks of
    /// the capped variant
    pub trace: Vec<f64>,
    pub uniform_picks: u64,
    /// every exposed weight, for replay checks
    pub weights: HashMap<(Point, Point), f64>,
}

fn neighbors(x: &Point) -> Vec<Point> {
    let mut out = Vec::with_capacity(2 * x.len());
    for axis in 0..x.len() {
        for sign in [-1i64, 1] {
            let mut y = x.clone();
            y[axis] += sign;
            out.push(y);
        }
    }
    out
}

pub fn invade(
    cfg: &InvasionConfig,
    budget: usize,
    rng: &mut Stream,
    exposed_cap: usize,
) -> Result<InvasionState> {
    if budget == 0 {
        return Err(Error::InvalidConfig("bond budget must be >= 1".into()));
    }
    if let Some(cap) = cfg.cap {
        if !(0.0 < cap && cap <= 1.0) {
            return Err(Error::InvalidConfig("weight cap must lie in (0, 1]".into()));
        }
    }
    let mut weights: HashMap<(Point, Point), f64> = HashMap::new();
    let mut invaded_bond_set: HashSet<(Point, Point)> = HashSet::new();
    let mut invaded_bonds: Vec<(Point, Point)> = Vec::with_capacity(budget);
    let mut invaded_vertices: HashSet<Point> = HashSet::new();
    let mut heap: BinaryHeap<Reverse<(Weight, Point, Point)>> = BinaryHeap::new();
    // boundary bonds with infinite weight (capped variant only)
    let mut frozen: Vec<(Point, Point)> = Vec::new();
    let mut trace = Vec::with_capacity(budget);
    let mut uniform_picks = 0u64;

    let expose = |x: &Point,
                      weights: &mut HashMap<(Point, Point), f64>,
                      heap: &mut BinaryHeap<Reverse<(Weight, Point, Point)>>,
                      frozen: &mut Vec<(Point, Point)>,
                      rng: &mut Stream|
     -> Result<()> {
        for y in neighbors(x) {
            let key = bond_key(x, &y);
            if weights.contains_key(&key) {
                continue;
            }
            let w = match cfg.cap {
                None => rng.gen::<f64>(),
                Some(cap) => {
                    if rng.gen::<f64>() < cap {
                        cap * rng.gen::<f64>()
                    } else {
                        f64::INFINITY
                    }
                }
            };
            weights.insert(key.clone(), w);
            if w.is_finite() {
                heap.push(Reverse((Weight(w), key.0, key.1)));
            } else {
                frozen.push(key);
            }
            if weights.len() > exposed_cap {
                return Err(Error::FrontierCap {
                    size: weights.len(),
                    cap: exposed_cap,
                });
            }
        }
        Ok(())
    };

    let start = origin(cfg.dim);
    invaded_vertices.insert(start.clone());
    expose(&start, &mut weights, &mut heap, &mut frozen, rng)?;

    while trace.len() < budget {
        // minimal finite boundary bond, skipping stale entries
        let mut picked: Option<((Point, Point), f64)> = None;
        while let Some(Reverse((w, a, b))) = heap.pop() {
            let key = (a, b);
            if !invaded_bond_set.contains(&key) {
                picked = Some((key, w.0));
                break;
            }
        }
        let (key, w) = match picked {
            Some(p) => p,
            None => {
                // capped variant out of finite bonds: uniform boundary pick
                frozen.retain(|k| !invaded_bond_set.contains(k));
                if frozen.is_empty() {
                    return Err(Error::Estimation(
                        "no boundary bonds left to invade".into(),
                    ));
                }
                let i = rng.gen_range(0..frozen.len());
                let key = frozen.swap_remove(i);
                uniform_picks += 1;
                (key, f64::INFINITY)
            }
        };
        invaded_bond_set.insert(key.clone());
        trace.push(w);
        for v in [key.0.clone(), key.1.clone()] {
            if invaded_vertices.insert(v.clone()) {
                expose(&v, &mut weights, &mut heap, &mut frozen, rng)?;
            }
        }
        invaded_bonds.push(key);
    }
    Ok(InvasionState {
        invaded_bonds,
        invaded_vertices,
        trace,
        uniform_picks,
        weights,
    })
}

/// Breadth-first |SP(x)| over a bond set; unreachable vertices are absent.
pub fn shortest_path_distances(
    bonds: &[(Point, Point)],
    start: &Point,
) -> HashMap<Point, u32> {
    let mut adj: HashMap<&Point, Vec<&Point>> = HashMap::new();
    for (a, b) in bonds {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut dist: HashMap<Point, u32> = HashMap::new();
    dist.insert(start.clone(), 0);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        let ns: Vec<Point> = match adj.get(&v) {
            Some(ns) => ns.iter().map(|&u| u.clone()).collect(),
            None => continue,
        };
        for u in ns {
            if !dist.contains_key(&u) {
                dist.insert(u.clone(), d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Invasion-percolation r-point estimates over shortest-path shells of the
/// invaded region.
#[derive(Debug, Clone)]
pub struct InvasionEstimate {
    pub rho: Summary,
    pub shells: Vec<Summary>,
}

pub fn invasion_rpoint(
    cfg: &InvasionConfig,
    budget: usize,
    times: &[usize],
    kvecs: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<InvasionEstimate> {
    if times.is_empty() || times.len() != kvecs.len() {
        return Err(Error::InvalidConfig(
            "times and wave vectors must be nonempty and of equal length".into(),
        ));
    }
    for k in kvecs {
        if k.len() != cfg.dim {
            return Err(Error::InvalidConfig("wave vector dimension mismatch".into()));
        }
    }
    let m_max = *times.iter().max().unwrap();
    let rows: Vec<(f64, Vec<f64>)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = crate::rng::sample_stream(seed, i);
            let state = invade(cfg, budget, &mut rng, DEFAULT_EXPOSED_CAP)?;
            let dist = shortest_path_distances(&state.invaded_bonds, &origin(cfg.dim));
            let mut shells = vec![0.0f64; m_max + 1];
            for &d in dist.values() {
                if (d as usize) <= m_max {
                    shells[d as usize] += 1.0;
                }
            }
            let capped: HashMap<Point, u32> = dist
                .into_iter()
                .filter(|(_, d)| (*d as usize) <= m_max)
                .collect();
            Ok((phase_product(&capped, times, kvecs), shells))
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = rows.iter().map(|(v, _)| *v).collect();
    let mut shells = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let col: Vec<f64> = rows.iter().map(|(_, s)| s[m]).collect();
        shells.push(summarize(&col));
    }
    Ok(InvasionEstimate {
        rho: summarize(&values),
        shells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::sample_stream;
    use approx::assert_abs_diff_eq;
    use smallvec::smallvec;

    fn triangle() -> MultiGraph {
        let mut g = MultiGraph::new(3);
        g.add_edge(0, 1); // edge 0
        g.add_edge(1, 2); // edge 1
        g.add_edge(0, 2); // edge 2
        g
    }

    #[test]
    fn lerw_trivial_cases() {
        let g = triangle();
        let mut rng = sample_stream(1, 0);
        let path = lerw(&g, 0, |v| v == 0, &mut rng);
        assert_eq!(path.len(), 1);
        // path graph a-b-c, target c: always the full path
        let mut pg = MultiGraph::new(3);
        pg.add_edge(0, 1);
        pg.add_edge(1, 2);
        let path = lerw(&pg, 0, |v| v == 2, &mut rng);
        let vs: Vec<usize> = path.iter().map(|(v, _)| *v).collect();
        assert_eq!(vs, vec![0, 1, 2]);
    }

    #[test]
    fn lerw_is_self_avoiding() {
        let g = triangle();
        for i in 0..200 {
            let mut rng = sample_stream(3, i);
            let path = lerw(&g, 0, |v| v == 2, &mut rng);
            let mut vs: Vec<usize> = path.iter().map(|(v, _)| *v).collect();
            assert_eq!(*vs.first().unwrap(), 0);
            assert_eq!(*vs.last().unwrap(), 2);
            vs.sort_unstable();
            vs.dedup();
            assert_eq!(vs.len(), path.len());
        }
    }

    #[test]
    fn lerw_triangle_direct_probability() {
        // absorption oracle: P(direct 0-2) = (1/2) / (1/2 + 1/4) = 2/3
        let g = triangle();
        let n = 40_000u64;
        let mut direct = 0u64;
        for i in 0..n {
            let mut rng = sample_stream(5, i);
            let path = lerw(&g, 0, |v| v == 2, &mut rng);
            if path.len() == 2 {
                direct += 1;
            }
        }
        let p = direct as f64 / n as f64;
        let se = (2.0 / 3.0 * (1.0 / 3.0) / n as f64).sqrt();
        assert!((p - 2.0 / 3.0).abs() <= 3.0 * se, "p = {p}");
    }

    #[test]
    fn wilson_triangle_is_uniform() {
        // 3 spanning trees, keyed by the omitted edge
        let g = triangle();
        let n = 30_000u64;
        let mut counts = [0u64; 3];
        for i in 0..n {
            let mut rng = sample_stream(7, i);
            let f = wilson(&g, 2, &[0, 1], &mut rng);
            let key = f.edge_key();
            let omitted = (0..3).find(|e| !key.contains(e)).unwrap();
            counts[omitted] += 1;
        }
        let expected = vec![n as f64 / 3.0; 3];
        let p = crate::stats::chi_square_p(&counts, &expected);
        assert!(p > 0.01, "p = {p}, counts {counts:?}");
    }

    #[test]
    fn wilson_spans_and_is_acyclic() {
        let boxx = WiredBox::new(2, 2).unwrap();
        let (g, wired) = boxx.graph().unwrap();
        let order: Vec<usize> = (0..g.n_vertices()).collect();
        let mut rng = sample_stream(9, 0);
        let f = wilson(&g, wired, &order, &mut rng);
        // every non-root vertex has a parent and reaches the root
        for v in 0..g.n_vertices() {
            if v == wired {
                assert!(f.parent[v].is_none());
                continue;
            }
            let mut cur = v;
            let mut steps = 0;
            while let Some((p, _)) = f.parent[cur] {
                cur = p;
                steps += 1;
                assert!(steps <= g.n_vertices(), "cycle detected");
            }
            assert_eq!(cur, wired);
        }
    }

    #[test]
    fn wilson_order_invariance() {
        // edge-marginal frequencies agree between two processing orders
        let boxx = WiredBox::new(1, 1).unwrap();
        let (g, wired) = boxx.graph().unwrap();
        let fwd: Vec<usize> = (0..g.n_vertices()).collect();
        let rev: Vec<usize> = (0..g.n_vertices()).rev().collect();
        let n = 20_000u64;
        let count = |order: &[usize], master: u64| -> Vec<u64> {
            let mut c = vec![0u64; g.n_edges()];
            for i in 0..n {
                let mut rng = sample_stream(master, i);
                let f = wilson(&g, wired, order, &mut rng);
                for e in f.edge_key() {
                    c[e] += 1;
                }
            }
            c
        };
        let a = count(&fwd, 11);
        let b = count(&rev, 13);
        for e in 0..g.n_edges() {
            let (pa, pb) = (a[e] as f64 / n as f64, b[e] as f64 / n as f64);
            let se = ((pa * (1.0 - pa) + pb * (1.0 - pb)) / n as f64).sqrt();
            assert!(
                (pa - pb).abs() <= 4.0 * se.max(1e-9),
                "edge {e}: {pa} vs {pb}"
            );
        }
    }

    #[test]
    fn single_vertex_box() {
        let boxx = WiredBox::new(1, 0).unwrap();
        let (g, wired) = boxx.graph().unwrap();
        assert_eq!(g.n_vertices(), 2);
        assert_eq!(g.n_edges(), 2); // two parallel wired edges
        let mut rng = sample_stream(15, 0);
        let f = wilson(&g, wired, &[0], &mut rng);
        let (p, _) = f.parent[0].unwrap();
        assert_eq!(p, wired);
    }

    #[test]
    fn box_indexing_roundtrip() {
        let boxx = WiredBox::new(3, 2).unwrap();
        for idx in 0..boxx.n_vertices() {
            assert_eq!(boxx.index(&boxx.vertex(idx)), idx);
        }
    }

    #[test]
    fn tree_distances_are_additive() {
        let boxx = WiredBox::new(2, 2).unwrap();
        let (g, wired) = boxx.graph().unwrap();
        let order: Vec<usize> = (0..g.n_vertices()).collect();
        let mut rng = sample_stream(17, 3);
        let f = wilson(&g, wired, &order, &mut rng);
        let from = boxx.index(&origin(2));
        let dist = f.tree_distances(from);
        assert_eq!(dist[from], 0);
        // distance drops by exactly 1 along the parent chain toward `from`
        for v in 0..g.n_vertices() {
            if let Some((p, _)) = f.parent[v] {
                assert!((dist[v] as i64 - dist[p] as i64).abs() == 1);
            }
        }
    }

    #[test]
    fn lazy_ball_matches_explicit_wilson_in_law() {
        // shell-1 size distribution: lazy partial Wilson vs the full
        // explicit-box sampler
        let boxx = WiredBox::new(2, 4).unwrap();
        let n = 8000u64;
        let mut lazy_counts = [0u64; 5];
        for i in 0..n {
            let mut rng = sample_stream(19, i);
            let dist = wired_tree_ball(&boxx, 1, &mut rng).unwrap();
            let shell1 = dist.values().filter(|&&d| d == 1).count();
            lazy_counts[shell1] += 1;
        }
        let (g, wired) = boxx.graph().unwrap();
        let order: Vec<usize> = (0..g.n_vertices()).collect();
        let from = boxx.index(&origin(2));
        let mut full_counts = [0u64; 5];
        for i in 0..n {
            let mut rng = sample_stream(23, i);
            let f = wilson(&g, wired, &order, &mut rng);
            let dist = f.tree_distances(from);
            let shell1 = (0..g.n_vertices())
                .filter(|&v| v != wired && dist[v] == 1)
                .count();
            full_counts[shell1] += 1;
        }
        // compare via chi-square of lazy against full-sampler frequencies
        let expected: Vec<f64> = full_counts
            .iter()
            .map(|&c| (c.max(1)) as f64)
            .collect();
        let p = crate::stats::chi_square_p(&lazy_counts, &expected);
        assert!(p > 0.005, "p = {p}: {lazy_counts:?} vs {full_counts:?}");
    }

    #[test]
    fn usf_time_zero_is_exact() {
        let boxx = WiredBox::new(2, 8).unwrap();
        let est = usf_rpoint(&boxx, &[0], &[vec![0.7, -0.2]], 40, 29).unwrap();
        assert_abs_diff_eq!(est.rho.mean, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.shells[0].mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn usf_boundary_guard() {
        let boxx = WiredBox::new(2, 8).unwrap();
        assert!(matches!(
            usf_rpoint(&boxx, &[5], &[vec![0.0, 0.0]], 10, 31),
            Err(Error::BoundaryGuard { .. })
        ));
    }

    #[test]
    fn invasion_first_bond_is_minimal() {
        let cfg = InvasionConfig { dim: 2, cap: None };
        for i in 0..50 {
            let mut rng = sample_stream(37, i);
            let state = invade(&cfg, 1, &mut rng, 1000).unwrap();
            assert_eq!(state.invaded_bonds.len(), 1);
            assert_eq!(state.trace.len(), 1);
            // minimal among the four bonds incident to the origin
            let o = origin(2);
            let min = neighbors(&o)
                .iter()
                .map(|y| state.weights[&bond_key(&o, y)])
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(state.trace[0], min);
        }
    }

    #[test]
    fn invasion_greediness_replay() {
        let cfg = InvasionConfig { dim: 2, cap: None };
        let mut rng = sample_stream(41, 0);
        let state = invade(&cfg, 300, &mut rng, 1_000_000).unwrap();
        // replay: every accepted bond is minimal among the current boundary
        let mut invaded: HashSet<(Point, Point)> = HashSet::new();
        let mut vertices: HashSet<Point> = HashSet::new();
        vertices.insert(origin(2));
        for (i, bond) in state.invaded_bonds.iter().enumerate() {
            let mut boundary_min = f64::INFINITY;
            for v in &vertices {
                for u in neighbors(v) {
                    let key = bond_key(v, &u);
                    if !invaded.contains(&key) {
                        if let Some(&w) = state.weights.get(&key) {
                            boundary_min = boundary_min.min(w);
                        }
                    }
                }
            }
            assert!(
                state.trace[i] <= boundary_min + 1e-15,
                "step {i}: accepted {} but boundary min {}",
                state.trace[i],
                boundary_min
            );
            invaded.insert(bond.clone());
            vertices.insert(bond.0.clone());
            vertices.insert(bond.1.clone());
        }
    }

    #[test]
    fn invasion_region_is_connected() {
        for cap in [None, Some(0.5)] {
            let cfg = InvasionConfig { dim: 2, cap };
            let mut rng = sample_stream(43, 1);
            let state = invade(&cfg, 200, &mut rng, 1_000_000).unwrap();
            let mut vertices: HashSet<Point> = HashSet::new();
            vertices.insert(origin(2));
            for bond in &state.invaded_bonds {
                assert!(
                    vertices.contains(&bond.0) || vertices.contains(&bond.1),
                    "bond does not touch the invaded region"
                );
                vertices.insert(bond.0.clone());
                vertices.insert(bond.1.clone());
            }
            assert_eq!(vertices, state.invaded_vertices);
        }
    }

    #[test]
    fn capped_invasion_never_accepts_above_cap() {
        let cfg = InvasionConfig {
            dim: 2,
            cap: Some(0.5),
        };
        let mut rng = sample_stream(47, 0);
        let state = invade(&cfg, 2000, &mut rng, 10_000_000).unwrap();
        for &w in &state.trace {
            assert!(w <= 0.5 || w.is_infinite());
        }
        assert_eq!(state.trace.len(), 2000);
    }

    #[test]
    fn invasion_weight_trace_stabilizes_below_supercritical() {
        // smoke version of the limsup check: on Z^2 the late accepted
        // weights stay near 1/2
        let cfg = InvasionConfig { dim: 2, cap: None };
        let mut rng = sample_stream(53, 0);
        let state = invade(&cfg, 20_000, &mut rng, 20_000_000).unwrap();
        let late_max = state.trace[10_000..]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            (0.45..0.56).contains(&late_max),
            "late running max = {late_max}"
        );
    }

    #[test]
    fn bfs_distances_basics() {
        let o = origin(1);
        assert_eq!(shortest_path_distances(&[], &o).len(), 1);
        let p = |c: i64| -> Point { smallvec![c] };
        let bonds = vec![(p(0), p(1)), (p(1), p(2)), (p(2), p(3))];
        let dist = shortest_path_distances(&bonds, &o);
        for c in 0..=3i64 {
            assert_eq!(dist[&p(c)], c as u32);
        }
    }

    #[test]
    fn bfs_triangle_inequality() {
        let cfg = InvasionConfig { dim: 2, cap: None };
        let mut rng = sample_stream(59, 2);
        let state = invade(&cfg, 400, &mut rng, 1_000_000).unwrap();
        let verts: Vec<Point> = state.invaded_vertices.iter().cloned().collect();
        let d0 = shortest_path_distances(&state.invaded_bonds, &origin(2));
        for v in verts.iter().take(10) {
            let dv = shortest_path_distances(&state.invaded_bonds, v);
            for u in verts.iter().take(10) {
                let lhs = d0[u] as i64;
                let rhs = d0[v] as i64 + dv[u] as i64;
                assert!(lhs <= rhs);
            }
        }
    }

    #[test]
    fn invasion_rpoint_shells_sum_to_vertices() {
        let cfg = InvasionConfig { dim: 2, cap: None };
        let budget = 150;
        let m_max = 30;
        let est = invasion_rpoint(
            &cfg,
            budget,
            &[m_max],
            &[vec![0.0, 0.0]],
            30,
            61,
        )
        .unwrap();
        // time 0 shell is always the origin
        assert_abs_diff_eq!(est.shells[0].mean, 1.0, epsilon = 1e-12);
        // direct recount for one sample
        let mut rng = sample_stream(61, 0);
        let state = invade(&cfg, budget, &mut rng, 1_000_000).unwrap();
        let dist = shortest_path_distances(&state.invaded_bonds, &origin(2));
        let within: u64 = dist.values().filter(|&&d| (d as usize) <= m_max).count() as u64;
        let shell_sum: u64 = (0..=m_max)
            .map(|m| dist.values().filter(|&&d| d as usize == m).count() as u64)
            .sum();
        assert_eq!(within, shell_sum);
        assert!(within <= state.invaded_vertices.len() as u64);
    }

    #[test]
    fn samplers_are_deterministic_per_seed() {
        let cfg = InvasionConfig { dim: 3, cap: None };
        let a = invade(&cfg, 500, &mut sample_stream(67, 4), 1_000_000).unwrap();
        let b = invade(&cfg, 500, &mut sample_stream(67, 4), 1_000_000).unwrap();
        assert_eq!(a.invaded_bonds, b.invaded_bonds);
        assert_eq!(a.trace, b.trace);
        let boxx = WiredBox::new(3, 6).unwrap();
        let x = wired_tree_ball(&boxx, 2, &mut sample_stream(71, 9)).unwrap();
        let y = wired_tree_ball(&boxx, 2, &mut sample_stream(71, 9)).unwrap();
        assert_eq!(x, y);
    }
}
