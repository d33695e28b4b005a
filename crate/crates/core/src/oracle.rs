//! Exact optima for small instances.
//!
//! Because a route may revisit nodes and reuse arcs, the cheapest closed walk
//! through all terminals is a tour over `{depot} ∪ V_R` in the metric closure
//! of the graph. [`optimal_cost`] solves that tour by subset dynamic
//! programming and expands each leg back into arcs. [`enumerate_walk_optimum`]
//! is an independent exhaustive search over arc-level walks, used to
//! cross-check it.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::graph::{AdjacencyIndex, ArcId, Instance, NodeId, DEPOT};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("terminal {0} is unreachable from or cannot return to the depot")]
    Unreachable(NodeId),
    #[error("too many terminals for the subset table: {0}")]
    TooManyTerminals(usize),
}

/// A closed walk given as arc ids in traversal order.
#[derive(Clone, Debug, PartialEq)]
pub struct Route {
    pub arcs: Vec<ArcId>,
    pub cost: f64,
}

impl Route {
    /// Builds a route and sums its cost. Unknown arc ids contribute nothing;
    /// `decoder::validate_route` reports them.
    pub fn from_arcs(inst: &Instance, arcs: Vec<ArcId>) -> Self {
        let cost = arcs.iter().filter_map(|&id| inst.arc_by_id(id)).map(|a| a.cost).sum();
        Self { arcs, cost }
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Terminals touched by the walk, ascending.
    pub fn visited_terminals(&self, inst: &Instance) -> Vec<NodeId> {
        let mut seen: Vec<NodeId> = self
            .arcs
            .iter()
            .filter_map(|&id| inst.arc_by_id(id))
            .flat_map(|a| [a.tail, a.head])
            .filter(|&n| inst.is_terminal(n))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }
}

/// All-pairs shortest walk costs, indexed by node id.
#[derive(Clone, Debug)]
pub struct DistanceClosure {
    dist: Vec<Vec<f64>>,
    /// First arc (position in the instance) of a shortest path.
    next_hop: Vec<Vec<Option<usize>>>,
}

impl DistanceClosure {
    pub fn dist(&self, from: NodeId, to: NodeId) -> f64 {
        self.dist
            .get(from)
            .and_then(|row| row.get(to))
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    pub fn next_hop(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.next_hop.get(from).and_then(|row| row.get(to)).copied().flatten()
    }

    /// Arc positions of a shortest path; empty when `from == to`.
    pub fn path(&self, inst: &Instance, from: NodeId, to: NodeId) -> Option<Vec<usize>> {
        if !self.dist(from, to).is_finite() {
            return None;
        }
        let mut out = Vec::new();
        let mut at = from;
        while at != to {
            let pos = self.next_hop(at, to)?;
            out.push(pos);
            at = inst.arcs()[pos].head;
        }
        Some(out)
    }
}

pub fn metric_closure(inst: &Instance) -> DistanceClosure {
    let n = inst.node_bound();
    let mut dist = vec![vec![f64::INFINITY; n]; n];
    let mut next_hop = vec![vec![None; n]; n];
    for node in inst.nodes() {
        dist[node.id][node.id] = 0.0;
    }
    for (pos, a) in inst.arcs().iter().enumerate() {
        if a.cost < dist[a.tail][a.head] {
            dist[a.tail][a.head] = a.cost;
            next_hop[a.tail][a.head] = Some(pos);
        }
    }
    let ids: Vec<NodeId> = inst.nodes().iter().map(|n| n.id).collect();
    for &k in &ids {
        for &i in &ids {
            let dik = dist[i][k];
            if !dik.is_finite() {
                continue;
            }
            for &j in &ids {
                let via = dik + dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                    next_hop[i][j] = next_hop[i][k];
                }
            }
        }
    }
    DistanceClosure { dist, next_hop }
}

const MAX_DP_TERMINALS: usize = 20;

/// Minimum-cost closed walk from the depot covering every terminal.
pub fn optimal_cost(inst: &Instance) -> Result<(f64, Route), OracleError> {
    let closure = metric_closure(inst);
    optimal_cost_with(inst, &closure)
}

pub fn optimal_cost_with(
    inst: &Instance,
    closure: &DistanceClosure,
) -> Result<(f64, Route), OracleError> {
    let terminals = inst.terminals();
    for &t in &terminals {
        if !closure.dist(DEPOT, t).is_finite() || !closure.dist(t, DEPOT).is_finite() {
            return Err(OracleError::Unreachable(t));
        }
    }
    let m = terminals.len();
    if m == 0 {
        return Ok((0.0, Route { arcs: Vec::new(), cost: 0.0 }));
    }
    if m > MAX_DP_TERMINALS {
        return Err(OracleError::TooManyTerminals(m));
    }

    let full = (1usize << m) - 1;
    let mut best = vec![f64::INFINITY; (full + 1) * m];
    let mut parent = vec![usize::MAX; (full + 1) * m];
    let cell = |mask: usize, j: usize| mask * m + j;
    for j in 0..m {
        best[cell(1 << j, j)] = closure.dist(DEPOT, terminals[j]);
    }
    for mask in 1..=full {
        for j in 0..m {
            let here = best[cell(mask, j)];
            if mask & (1 << j) == 0 || !here.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = here + closure.dist(terminals[j], terminals[k]);
                // strict comparison keeps the lowest predecessor index on ties
                if cand < best[cell(next, k)] {
                    best[cell(next, k)] = cand;
                    parent[cell(next, k)] = j;
                }
            }
        }
    }
    let (mut last, mut total) = (usize::MAX, f64::INFINITY);
    for j in 0..m {
        let cand = best[cell(full, j)] + closure.dist(terminals[j], DEPOT);
        if cand < total {
            total = cand;
            last = j;
        }
    }

    let mut order = Vec::with_capacity(m);
    let mut mask = full;
    let mut j = last;
    while j != usize::MAX {
        order.push(terminals[j]);
        let p = parent[cell(mask, j)];
        mask &= !(1 << j);
        j = p;
    }
    order.reverse();

    let mut stops = vec![DEPOT];
    stops.extend(order);
    stops.push(DEPOT);
    let arcs: Vec<ArcId> = stops
        .windows(2)
        .flat_map(|w| closure.path(inst, w[0], w[1]).expect("finite leg"))
        .map(|pos| inst.arcs()[pos].id)
        .collect();
    let route = Route::from_arcs(inst, arcs);
    Ok((total, route))
}

/// Exhaustive search over closed walks from the depot with at most `max_len`
/// arcs that visit every terminal. Returns `None` when no such walk exists.
///
/// Branches whose cost already reaches the incumbent are cut, as are states
/// `(node, visited terminals)` already reached no later and no dearer.
pub fn enumerate_walk_optimum(inst: &Instance, max_len: usize) -> Option<f64> {
    let terminals = inst.terminals();
    if terminals.is_empty() {
        return Some(0.0);
    }
    let bit: HashMap<NodeId, u64> =
        terminals.iter().enumerate().map(|(b, &t)| (t, 1u64 << b)).collect();
    let full = (1u64 << terminals.len()) - 1;

    struct Search<'a> {
        inst: &'a Instance,
        adj: AdjacencyIndex,
        bit: HashMap<NodeId, u64>,
        full: u64,
        max_len: usize,
        best: f64,
        seen: HashMap<(NodeId, u64), Vec<f64>>,
    }

    impl Search<'_> {
        fn dominated(&mut self, node: NodeId, mask: u64, depth: usize, cost: f64) -> bool {
            let slots = self
                .seen
                .entry((node, mask))
                .or_insert_with(|| vec![f64::INFINITY; self.max_len + 1]);
            if slots[..=depth].iter().any(|&c| c <= cost) {
                return true;
            }
            slots[depth] = cost;
            false
        }

        fn walk(&mut self, node: NodeId, mask: u64, depth: usize, cost: f64) {
            if node == DEPOT && mask == self.full && depth > 0 {
                self.best = self.best.min(cost);
                return;
            }
            if depth == self.max_len {
                return;
            }
            let out: Vec<usize> = self.adj.out_arcs(node).to_vec();
            for pos in out {
                let a = self.inst.arcs()[pos];
                let next_cost = cost + a.cost;
                if next_cost >= self.best {
                    continue;
                }
                let next_mask = mask | self.bit.get(&a.head).copied().unwrap_or(0);
                if self.dominated(a.head, next_mask, depth + 1, next_cost) {
                    continue;
                }
                self.walk(a.head, next_mask, depth + 1, next_cost);
            }
        }
    }

    let mut search = Search {
        inst,
        adj: AdjacencyIndex::new(inst),
        bit,
        full,
        max_len,
        best: f64::INFINITY,
        seen: HashMap::new(),
    };
    search.walk(DEPOT, 0, 0, 0.0);
    search.best.is_finite().then_some(search.best)
}

/// A feasible (not necessarily optimal) closed walk: terminals in random
/// order, each leg a shortest path, with up to `detours` random intermediate
/// stops. Returns `None` when some terminal is unreachable.
pub fn random_feasible_route<R: Rng + ?Sized>(
    inst: &Instance,
    closure: &DistanceClosure,
    rng: &mut R,
    detours: usize,
) -> Option<Route> {
    let mut stops = inst.terminals();
    stops.shuffle(rng);
    let nodes: Vec<NodeId> = inst.nodes().iter().map(|n| n.id).collect();
    for _ in 0..detours {
        let at = rng.gen_range(0..=stops.len());
        stops.insert(at, *nodes.choose(rng)?);
    }
    stops.insert(0, DEPOT);
    stops.push(DEPOT);
    let mut arcs = Vec::new();
    for w in stops.windows(2) {
        let leg = closure.path(inst, w[0], w[1])?;
        arcs.extend(leg.into_iter().map(|pos| inst.arcs()[pos].id));
    }
    Some(Route::from_arcs(inst, arcs))
}
