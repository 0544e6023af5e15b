//! Independent optimal-transport oracles.
//!
//! Two deliberately different algorithms re-derive transport values so the
//! transportation simplex in [`super::transport`] is never the only route
//! to a number:
//!
//! - [`vertex_enumeration_value`] enumerates every basis (spanning tree) of
//!   the transportation polytope and takes the cheapest feasible vertex.
//!   Exponential; intended for supports up to about 5 x 5.
//! - [`min_cost_flow_value`] runs successive shortest-path augmentation on
//!   the flow network with Bellman-Ford path search; polynomial and usable
//!   as a second opinion on larger instances.

use crate::error::{AirError, Result};

use super::check_law;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Flows determined by a spanning-tree basis, by repeatedly resolving
/// degree-one nodes; `None` when some flow is negative (infeasible vertex).
fn tree_flows(
    cells: &[usize],
    m: usize,
    n: usize,
    mu1: &[f64],
    mu2: &[f64],
) -> Option<Vec<(usize, usize, f64)>> {
    let mut remaining: Vec<f64> = mu1.iter().chain(mu2.iter()).copied().collect();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); m + n];
    for (idx, &cell) in cells.iter().enumerate() {
        let (i, j) = (cell / n, cell % n);
        adjacency[i].push(idx);
        adjacency[m + j].push(idx);
    }
    let mut degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut used = vec![false; cells.len()];
    let mut flows = Vec::with_capacity(cells.len());
    let mut leaves: Vec<usize> = (0..m + n).filter(|&v| degree[v] == 1).collect();
    while let Some(v) = leaves.pop() {
        let Some(&idx) = adjacency[v].iter().find(|&&idx| !used[idx]) else {
            continue;
        };
        used[idx] = true;
        let cell = cells[idx];
        let (i, j) = (cell / n, cell % n);
        let flow = remaining[v];
        if flow < -1e-12 {
            return None;
        }
        flows.push((i, j, flow));
        let other = if v == i { m + j } else { i };
        remaining[other] -= flow;
        remaining[v] = 0.0;
        degree[v] -= 1;
        degree[other] -= 1;
        if degree[other] == 1 {
            leaves.push(other);
        }
    }
    if flows.len() != cells.len() {
        return None;
    }
    Some(flows)
}

/// Exact transport value by brute-force vertex enumeration over all
/// spanning-tree bases of the transportation polytope.
///
/// The basis count grows as `C(mn, m+n-1)`; keep supports at or below
/// roughly 5 x 5.
pub fn vertex_enumeration_value(cost: &[Vec<f64>], mu1: &[f64], mu2: &[f64]) -> Result<f64> {
    check_law(mu1)?;
    check_law(mu2)?;
    let (m, n) = (mu1.len(), mu2.len());
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(AirError::Domain("cost matrix shape mismatch".into()));
    }
    if m * n > 25 {
        return Err(AirError::Domain(format!(
            "vertex enumeration limited to 25 cells, got {}",
            m * n
        )));
    }
    let basis_size = m + n - 1;
    let mut combo: Vec<usize> = (0..basis_size).collect();
    let mut best = f64::INFINITY;
    loop {
        // Acyclic selection of m+n-1 edges on m+n nodes is a spanning tree.
        let mut uf = UnionFind::new(m + n);
        let mut acyclic = true;
        for &cell in &combo {
            if !uf.union(cell / n, m + (cell % n)) {
                acyclic = false;
                break;
            }
        }
        if acyclic {
            if let Some(flows) = tree_flows(&combo, m, n, mu1, mu2) {
                let value: f64 = flows.iter().map(|&(i, j, f)| f * cost[i][j]).sum();
                best = best.min(value);
            }
        }
        // Advance to the next lexicographic combination of cells.
        let mut pos = basis_size;
        loop {
            if pos == 0 {
                return if best.is_finite() {
                    Ok(best)
                } else {
                    Err(AirError::Audit(
                        "no feasible transportation vertex found".into(),
                    ))
                };
            }
            pos -= 1;
            if combo[pos] != m * n - basis_size + pos {
                break;
            }
        }
        combo[pos] += 1;
        for k in pos + 1..basis_size {
            combo[k] = combo[k - 1] + 1;
        }
    }
}

#[derive(Clone, Copy)]
struct Arc {
    to: usize,
    capacity: f64,
    cost: f64,
    flow: f64,
}

/// Exact transport value by successive shortest-path min-cost flow with
/// Bellman-Ford path search on the residual network.
pub fn min_cost_flow_value(cost: &[Vec<f64>], mu1: &[f64], mu2: &[f64]) -> Result<f64> {
    check_law(mu1)?;
    check_law(mu2)?;
    let (m, n) = (mu1.len(), mu2.len());
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(AirError::Domain("cost matrix shape mismatch".into()));
    }
    let nodes = m + n + 2;
    let (source, sink) = (0usize, m + n + 1);
    let row = |i: usize| 1 + i;
    let col = |j: usize| 1 + m + j;
    // Paired arcs: index k is forward, k ^ 1 its reverse.
    let mut arcs: Vec<Arc> = Vec::new();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let push = |arcs: &mut Vec<Arc>, out: &mut Vec<Vec<usize>>, from: usize, to: usize, capacity: f64, cost: f64| {
        out[from].push(arcs.len());
        arcs.push(Arc { to, capacity, cost, flow: 0.0 });
        out[to].push(arcs.len());
        arcs.push(Arc { to: from, capacity: 0.0, cost: -cost, flow: 0.0 });
    };
    for i in 0..m {
        if mu1[i] > 0.0 {
            push(&mut arcs, &mut out, source, row(i), mu1[i], 0.0);
        }
    }
    for j in 0..n {
        if mu2[j] > 0.0 {
            push(&mut arcs, &mut out, col(j), sink, mu2[j], 0.0);
        }
    }
    let mut transports = Vec::new();
    for i in 0..m {
        if mu1[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if mu2[j] == 0.0 {
                continue;
            }
            transports.push(arcs.len());
            push(&mut arcs, &mut out, row(i), col(j), f64::INFINITY, cost[i][j]);
        }
    }
    let cap = 100 * (m + n) * (m + n) + 100;
    for _ in 0..cap {
        // Bellman-Ford shortest path by residual cost.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut parent_arc = vec![usize::MAX; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for (node, dist_node) in dist.clone().into_iter().enumerate() {
                if !dist_node.is_finite() {
                    continue;
                }
                for &k in &out[node] {
                    let arc = arcs[k];
                    if arc.capacity - arc.flow > 1e-15 && dist_node + arc.cost < dist[arc.to] - 1e-15 {
                        dist[arc.to] = dist_node + arc.cost;
                        parent_arc[arc.to] = k;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[sink].is_finite() {
            // All shippable mass has been routed.
            let value = transports
                .iter()
                .map(|&k| arcs[k].flow * arcs[k].cost)
                .sum();
            return Ok(value);
        }
        let mut bottleneck = f64::INFINITY;
        let mut node = sink;
        while node != source {
            let k = parent_arc[node];
            bottleneck = bottleneck.min(arcs[k].capacity - arcs[k].flow);
            node = arcs[k ^ 1].to;
        }
        let mut node = sink;
        while node != source {
            let k = parent_arc[node];
            arcs[k].flow += bottleneck;
            arcs[k ^ 1].flow -= bottleneck;
            node = arcs[k ^ 1].to;
        }
    }
    Err(AirError::Audit(format!(
        "min-cost flow exceeded {cap} augmentations"
    )))
}
