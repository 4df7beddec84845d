//! Small Edmonds-Karp max-flow, used to certify bond-disjoint paths
//! (Menger): the needed flow values are tiny, so augmentation is capped.

/// Max flow from `s` to `t` over directed edges with integer capacities,
/// stopping early once `cap` units are routed.
pub fn max_flow_capped(
    nodes: usize,
    edges: &[(usize, usize, u32)],
    s: usize,
    t: usize,
    cap: u32,
) -> u32 {
    if s == t {
        return cap;
    }
    // residual graph in forward/backward pairs
    let mut head = Vec::with_capacity(edges.len() * 2);
    let mut capacity = Vec::with_capacity(edges.len() * 2);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for &(u, v, c) in edges {
        adj[u].push(head.len());
        head.push(v);
        capacity.push(c as i64);
        adj[v].push(head.len());
        head.push(u);
        capacity.push(0);
    }
    let mut flow = 0u32;
    let mut prev_edge = vec![usize::MAX; nodes];
    while flow < cap {
        // BFS for an augmenting path
        for p in prev_edge.iter_mut() {
            *p = usize::MAX;
        }
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(s);
        let mut reached = false;
        'bfs: while let Some(u) = queue.pop_front() {
            for &e in &adj[u] {
                let v = head[e];
                if capacity[e] > 0 && prev_edge[v] == usize::MAX && v != s {
                    prev_edge[v] = e;
                    if v == t {
                        reached = true;
                        break 'bfs;
                    }
                    queue.push_back(v);
                }
            }
        }
        if !reached {
            break;
        }
        // bottleneck along the path
        let mut bottleneck = i64::MAX;
        let mut v = t;
        while v != s {
            let e = prev_edge[v];
            bottleneck = bottleneck.min(capacity[e]);
            v = head[e ^ 1];
        }
        let push = bottleneck.min((cap - flow) as i64);
        let mut v = t;
        while v != s {
            let e = prev_edge[v];
            capacity[e] -= push;
            capacity[e ^ 1] += push;
            v = head[e ^ 1];
        }
        flow += push as u32;
    }
    flow
}
