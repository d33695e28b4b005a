//! Instance data model: a directed graph with a depot (node 0), a set of
//! terminal nodes that must be visited, optional steiner nodes and positive
//! arc costs.
//!
//! Node and arc ids are stable labels. After arc reduction an instance may
//! have holes in both id ranges, so most lookups go through positions in
//! [`Instance::arcs`] rather than raw ids.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type NodeId = usize;
pub type ArcId = usize;

/// The depot is always node 0.
pub const DEPOT: NodeId = 0;

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("depot missing")]
    DepotMissing,
    #[error("depot cannot be a terminal")]
    DepotIsTerminal,
    #[error("node {0} is declared twice")]
    DuplicateNode(NodeId),
    #[error("arc {0}: nonpositive cost")]
    NonPositiveCost(ArcId),
    #[error("arc {id}: duplicate arc ({tail},{head})")]
    DuplicateArc { id: ArcId, tail: NodeId, head: NodeId },
    #[error("arc id {0} is declared twice")]
    DuplicateArcId(ArcId),
    #[error("arc {0}: self-loop")]
    SelfLoop(ArcId),
    #[error("arc {id}: unknown node {node}")]
    UnknownNode { id: ArcId, node: NodeId },
    #[error("invalid size: need at least 2 non-depot nodes, got {0}")]
    InvalidSize(usize),
    #[error("invalid density {0}: must lie in [0, 1]")]
    InvalidDensity(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Depot,
    Terminal,
    Steiner,
}

impl NodeKind {
    fn as_str(self) -> &'static str {
        match self {
            NodeKind::Depot => "depot",
            NodeKind::Terminal => "terminal",
            NodeKind::Steiner => "steiner",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub kind: NodeKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub id: ArcId,
    pub tail: NodeId,
    pub head: NodeId,
    pub cost: f64,
}

/// A validated STSP instance. Nodes are kept sorted by id; arcs keep their
/// insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
}

impl Instance {
    pub fn new(mut nodes: Vec<Node>, arcs: Vec<Arc>) -> Result<Self, InstanceError> {
        nodes.sort_by_key(|n| n.id);
        for w in nodes.windows(2) {
            if w[0].id == w[1].id {
                return Err(InstanceError::DuplicateNode(w[0].id));
            }
        }
        match nodes.first() {
            Some(n) if n.id == DEPOT => {
                if n.kind != NodeKind::Depot {
                    return Err(InstanceError::DepotIsTerminal);
                }
            }
            _ => return Err(InstanceError::DepotMissing),
        }
        if nodes[1..].iter().any(|n| n.kind == NodeKind::Depot) {
            return Err(InstanceError::DepotMissing);
        }
        let ids: HashSet<NodeId> = nodes.iter().map(|n| n.id).collect();
        let mut pairs = HashSet::new();
        let mut arc_ids = HashSet::new();
        for a in &arcs {
            if !arc_ids.insert(a.id) {
                return Err(InstanceError::DuplicateArcId(a.id));
            }
            for node in [a.tail, a.head] {
                if !ids.contains(&node) {
                    return Err(InstanceError::UnknownNode { id: a.id, node });
                }
            }
            if a.tail == a.head {
                return Err(InstanceError::SelfLoop(a.id));
            }
            if a.cost.is_nan() || a.cost <= 0.0 || !a.cost.is_finite() {
                return Err(InstanceError::NonPositiveCost(a.id));
            }
            if !pairs.insert((a.tail, a.head)) {
                return Err(InstanceError::DuplicateArc { id: a.id, tail: a.tail, head: a.head });
            }
        }
        Ok(Self { nodes, arcs })
    }

    /// Builds an instance without coordinates; node kinds follow from
    /// `terminals`, every other listed node is a steiner node.
    pub fn from_parts(
        node_ids: &[NodeId],
        terminals: &[NodeId],
        arcs: &[(NodeId, NodeId, f64)],
    ) -> Result<Self, InstanceError> {
        let terminals: HashSet<_> = terminals.iter().copied().collect();
        if terminals.contains(&DEPOT) {
            return Err(InstanceError::DepotIsTerminal);
        }
        let nodes = node_ids
            .iter()
            .map(|&id| Node {
                id,
                x: 0.0,
                y: 0.0,
                kind: if id == DEPOT {
                    NodeKind::Depot
                } else if terminals.contains(&id) {
                    NodeKind::Terminal
                } else {
                    NodeKind::Steiner
                },
            })
            .collect();
        let arcs = arcs
            .iter()
            .enumerate()
            .map(|(id, &(tail, head, cost))| Arc { id, tail, head, cost })
            .collect();
        Self::new(nodes, arcs)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// One past the largest node id; sizes id-indexed tables.
    pub fn node_bound(&self) -> usize {
        self.nodes.last().map_or(0, |n| n.id + 1)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &self.nodes[i])
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn terminals(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Terminal)
            .map(|n| n.id)
            .collect()
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.node(id).is_some_and(|n| n.kind == NodeKind::Terminal)
    }

    /// Depot or terminal.
    pub fn is_required(&self, id: NodeId) -> bool {
        self.node(id)
            .is_some_and(|n| matches!(n.kind, NodeKind::Depot | NodeKind::Terminal))
    }

    /// Position of the arc with the given id in [`Instance::arcs`].
    pub fn arc_position(&self, id: ArcId) -> Option<usize> {
        self.arcs.iter().position(|a| a.id == id)
    }

    pub fn arc_by_id(&self, id: ArcId) -> Option<&Arc> {
        self.arcs.iter().find(|a| a.id == id)
    }

    pub fn total_cost(&self) -> f64 {
        self.arcs.iter().map(|a| a.cost).sum()
    }

    /// Keeps the nodes and arcs accepted by the filters. Ids are preserved.
    pub(crate) fn retain(
        &self,
        keep_node: impl Fn(&Node) -> bool,
        keep_arc: impl Fn(&Arc) -> bool,
    ) -> Instance {
        let nodes: Vec<Node> = self.nodes.iter().filter(|n| keep_node(n)).copied().collect();
        let alive: HashSet<NodeId> = nodes.iter().map(|n| n.id).collect();
        let arcs = self
            .arcs
            .iter()
            .filter(|a| alive.contains(&a.tail) && alive.contains(&a.head) && keep_arc(a))
            .copied()
            .collect();
        Instance { nodes, arcs }
    }

    /// Nodes reachable from `source` following arc directions (or against
    /// them when `reverse` is set).
    pub fn reachable(&self, source: NodeId, reverse: bool) -> BTreeSet<NodeId> {
        let adj = AdjacencyIndex::new(self);
        let mut seen = BTreeSet::new();
        if !self.contains_node(source) {
            return seen;
        }
        let mut stack = vec![source];
        seen.insert(source);
        while let Some(u) = stack.pop() {
            let list = if reverse { adj.in_arcs(u) } else { adj.out_arcs(u) };
            for &pos in list {
                let a = &self.arcs[pos];
                let v = if reverse { a.tail } else { a.head };
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Terminals that cannot be reached from the depot or cannot return to it.
    pub fn unreachable_terminals(&self) -> Vec<NodeId> {
        let fwd = self.reachable(DEPOT, false);
        let bwd = self.reachable(DEPOT, true);
        self.terminals()
            .into_iter()
            .filter(|t| !fwd.contains(t) || !bwd.contains(t))
            .collect()
    }
}

/// Outgoing and incoming arc lists per node, holding positions into
/// [`Instance::arcs`] in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencyIndex {
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
}

impl AdjacencyIndex {
    pub fn new(inst: &Instance) -> Self {
        let bound = inst.node_bound();
        let mut out_arcs = vec![Vec::new(); bound];
        let mut in_arcs = vec![Vec::new(); bound];
        for (pos, a) in inst.arcs().iter().enumerate() {
            out_arcs[a.tail].push(pos);
            in_arcs[a.head].push(pos);
        }
        Self { out_arcs, in_arcs }
    }

    pub fn out_arcs(&self, node: NodeId) -> &[usize] {
        self.out_arcs.get(node).map_or(&[], Vec::as_slice)
    }

    pub fn in_arcs(&self, node: NodeId) -> &[usize] {
        self.in_arcs.get(node).map_or(&[], Vec::as_slice)
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.out_arcs(node).len() + self.in_arcs(node).len()
    }
}

pub fn build_adjacency(inst: &Instance) -> AdjacencyIndex {
    AdjacencyIndex::new(inst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CostMode {
    /// Uniform integer in [20, 50].
    #[default]
    RandomInteger,
    /// Euclidean distance between the endpoints, rounded to the nearest
    /// integer and clamped to at least 1.
    Euclidean,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorConfig {
    /// Probability that an ordered pair outside the backbone cycle gets an arc.
    pub density: f64,
    pub cost_mode: CostMode,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self { density: 0.3, cost_mode: CostMode::RandomInteger }
    }
}

pub const MIN_COST: u32 = 20;
pub const MAX_COST: u32 = 50;
pub const REGION_SIDE: f64 = 100.0;

/// Generates a random instance with a depot plus `n` further nodes.
///
/// Coordinates are uniform in the 100x100 square. The first `floor(0.7 n)`
/// non-depot nodes are terminals. The arc set is a random Hamiltonian cycle
/// through every node plus each remaining ordered pair with probability
/// `config.density`.
pub fn generate_instance(
    n: usize,
    seed: u64,
    config: &GeneratorConfig,
) -> Result<Instance, InstanceError> {
    if n < 2 {
        return Err(InstanceError::InvalidSize(n));
    }
    if !(0.0..=1.0).contains(&config.density) {
        return Err(InstanceError::InvalidDensity(config.density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_terminals = n * 7 / 10;
    let nodes: Vec<Node> = (0..=n)
        .map(|id| Node {
            id,
            x: rng.gen_range(0.0..REGION_SIDE),
            y: rng.gen_range(0.0..REGION_SIDE),
            kind: match id {
                DEPOT => NodeKind::Depot,
                i if i <= num_terminals => NodeKind::Terminal,
                _ => NodeKind::Steiner,
            },
        })
        .collect();

    let mut order: Vec<NodeId> = (1..=n).collect();
    order.shuffle(&mut rng);
    order.insert(0, DEPOT);
    let mut pairs: Vec<(NodeId, NodeId)> = (0..order.len())
        .map(|i| (order[i], order[(i + 1) % order.len()]))
        .collect();
    let backbone: HashSet<_> = pairs.iter().copied().collect();
    for i in 0..=n {
        for j in 0..=n {
            if i != j && !backbone.contains(&(i, j)) && rng.gen_bool(config.density) {
                pairs.push((i, j));
            }
        }
    }

    let arcs = pairs
        .into_iter()
        .enumerate()
        .map(|(id, (tail, head))| {
            let cost = match config.cost_mode {
                CostMode::RandomInteger => f64::from(rng.gen_range(MIN_COST..=MAX_COST)),
                CostMode::Euclidean => {
                    let (a, b) = (&nodes[tail], &nodes[head]);
                    (a.x - b.x).hypot(a.y - b.y).round().max(1.0)
                }
            };
            Arc { id, tail, head, cost }
        })
        .collect();
    Instance::new(nodes, arcs)
}

/// Serializes an instance into the line-oriented `stsp 1` document.
pub fn save_instance(inst: &Instance) -> String {
    let mut out = String::from("stsp 1\n");
    writeln!(out, "nodes {}", inst.num_nodes()).unwrap();
    for n in inst.nodes() {
        writeln!(out, "node {} {} {} {}", n.id, n.x, n.y, n.kind.as_str()).unwrap();
    }
    for a in inst.arcs() {
        writeln!(out, "arc {} {} {} {}", a.id, a.tail, a.head, a.cost).unwrap();
    }
    out
}

pub fn load_instance(text: &str) -> Result<Instance, InstanceError> {
    fn field<T: std::str::FromStr>(
        tok: Option<&str>,
        line: usize,
        name: &str,
    ) -> Result<T, InstanceError> {
        let tok = tok.ok_or_else(|| InstanceError::Parse { line, msg: format!("missing {name}") })?;
        tok.parse()
            .map_err(|_| InstanceError::Parse { line, msg: format!("bad {name} '{tok}'") })
    }

    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "stsp 1")) => {}
        other => {
            return Err(InstanceError::Parse {
                line: other.map_or(1, |(line, _)| line),
                msg: "expected header 'stsp 1'".into(),
            })
        }
    }

    let mut declared = None;
    let mut nodes = Vec::new();
    let mut arcs = Vec::new();
    for (line, l) in lines {
        let mut tok = l.split_whitespace();
        match tok.next() {
            Some("nodes") => {
                if declared.is_some() {
                    return Err(InstanceError::Parse { line, msg: "duplicate nodes line".into() });
                }
                declared = Some(field::<usize>(tok.next(), line, "node count")?);
            }
            Some("node") => {
                let id = field(tok.next(), line, "node id")?;
                let x = field(tok.next(), line, "x")?;
                let y = field(tok.next(), line, "y")?;
                let kind = match tok.next() {
                    Some("depot") => NodeKind::Depot,
                    Some("terminal") => NodeKind::Terminal,
                    Some("steiner") => NodeKind::Steiner,
                    other => {
                        return Err(InstanceError::Parse {
                            line,
                            msg: format!("bad node kind '{}'", other.unwrap_or("")),
                        })
                    }
                };
                nodes.push(Node { id, x, y, kind });
            }
            Some("arc") => {
                let id = field(tok.next(), line, "arc id")?;
                let tail = field(tok.next(), line, "tail")?;
                let head = field(tok.next(), line, "head")?;
                let cost: f64 = field(tok.next(), line, "cost")?;
                arcs.push(Arc { id, tail, head, cost });
            }
            Some(other) => {
                return Err(InstanceError::Parse { line, msg: format!("unknown line '{other}'") })
            }
            None => unreachable!("blank lines are filtered"),
        }
        if tok.next().is_some() {
            return Err(InstanceError::Parse { line, msg: "trailing tokens".into() });
        }
    }
    match declared {
        None => return Err(InstanceError::Parse { line: 0, msg: "missing nodes line".into() }),
        Some(count) if count != nodes.len() => {
            return Err(InstanceError::Parse {
                line: 0,
                msg: format!("nodes line declares {count}, found {}", nodes.len()),
            })
        }
        _ => {}
    }
    if let Some(n) = nodes.iter().find(|n| n.id == DEPOT) {
        if n.kind != NodeKind::Depot {
            return Err(InstanceError::DepotIsTerminal);
        }
    }
    Instance::new(nodes, arcs)
}
