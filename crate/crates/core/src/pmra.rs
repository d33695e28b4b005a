//! Arc reduction preprocessing.
//!
//! Four passes over the instance:
//! 1. drop arcs with neither endpoint in the required set (terminals and depot);
//! 2. compute the mean arc cost `m` and the threshold `alpha = m + 0.1 m`;
//! 3. drop arcs with cost `>= alpha`, most expensive first, unless both
//!    endpoints are required or the removal would leave an endpoint with no
//!    incident arc at all;
//! 4. repeatedly drop steiner nodes lacking incoming or outgoing arcs.
//!
//! If passes 3 and 4 leave a terminal cut off from the depot, their removals
//! are undone and the report records the fallback.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::graph::{ArcId, Instance, NodeId, NodeKind};

#[derive(Debug, Error, PartialEq)]
pub enum PmraError {
    #[error("cannot compute a threshold over an empty cost list")]
    EmptyCosts,
    #[error("instance infeasible under PMRA step 1: terminal {0} is disconnected from the depot")]
    InfeasibleAfterStep1(NodeId),
}

/// Returns the mean cost `m` and the removal threshold `alpha = m + 0.1 m`.
pub fn compute_threshold(costs: &[f64]) -> Result<(f64, f64), PmraError> {
    if costs.is_empty() {
        return Err(PmraError::EmptyCosts);
    }
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    Ok((mean, mean + 0.1 * mean))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmraReport {
    pub mean_cost: f64,
    pub threshold: f64,
    pub removed_step1: Vec<ArcId>,
    pub removed_step3: Vec<ArcId>,
    /// Steiner nodes removed in step 4 with the arcs that went with them.
    pub removed_nodes_step4: Vec<(NodeId, Vec<ArcId>)>,
    pub arcs_before: usize,
    pub arcs_after: usize,
    pub feasibility_fallback: bool,
}

impl PmraReport {
    pub fn total_removed(&self) -> usize {
        self.removed_step1.len()
            + self.removed_step3.len()
            + self.removed_nodes_step4.iter().map(|(_, a)| a.len()).sum::<usize>()
    }
}

impl fmt::Display for PmraReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn ids(v: &[usize]) -> String {
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        }
        writeln!(f, "mean_cost = {}", self.mean_cost)?;
        writeln!(f, "threshold = {}", self.threshold)?;
        writeln!(f, "arcs_before = {}", self.arcs_before)?;
        writeln!(f, "arcs_after = {}", self.arcs_after)?;
        writeln!(f, "removed_step1 = {}", ids(&self.removed_step1))?;
        writeln!(f, "removed_step3 = {}", ids(&self.removed_step3))?;
        let nodes: Vec<String> = self
            .removed_nodes_step4
            .iter()
            .map(|(n, arcs)| format!("{n}:[{}]", ids(arcs)))
            .collect();
        writeln!(f, "removed_nodes_step4 = {}", nodes.join(","))?;
        writeln!(f, "feasibility_fallback = {}", self.feasibility_fallback)
    }
}

/// Step 4 on its own: removes steiner nodes without incoming or without
/// outgoing arcs until none remain. Returns the pruned instance and the
/// removed nodes with their incident arcs, in removal order.
pub fn prune_steiner_nodes(inst: &Instance) -> (Instance, Vec<(NodeId, Vec<ArcId>)>) {
    let bound = inst.node_bound();
    let mut alive_arc = vec![true; inst.num_arcs()];
    let mut indeg = vec![0usize; bound];
    let mut outdeg = vec![0usize; bound];
    for a in inst.arcs() {
        outdeg[a.tail] += 1;
        indeg[a.head] += 1;
    }
    let mut dead_nodes = BTreeSet::new();
    let mut removed = Vec::new();
    loop {
        let victims: Vec<NodeId> = inst
            .nodes()
            .iter()
            .filter(|n| {
                n.kind == NodeKind::Steiner
                    && !dead_nodes.contains(&n.id)
                    && (indeg[n.id] == 0 || outdeg[n.id] == 0)
            })
            .map(|n| n.id)
            .collect();
        if victims.is_empty() {
            break;
        }
        for v in victims {
            dead_nodes.insert(v);
            let mut arcs = Vec::new();
            for (pos, a) in inst.arcs().iter().enumerate() {
                if alive_arc[pos] && (a.tail == v || a.head == v) {
                    alive_arc[pos] = false;
                    outdeg[a.tail] -= 1;
                    indeg[a.head] -= 1;
                    arcs.push(a.id);
                }
            }
            removed.push((v, arcs));
        }
    }
    let dead_arcs: BTreeSet<ArcId> = removed.iter().flat_map(|(_, a)| a.iter().copied()).collect();
    let pruned = inst.retain(|n| !dead_nodes.contains(&n.id), |a| !dead_arcs.contains(&a.id));
    (pruned, removed)
}

pub fn reduce(inst: &Instance) -> Result<(Instance, PmraReport), PmraError> {
    let arcs_before = inst.num_arcs();

    let removed_step1: Vec<ArcId> = inst
        .arcs()
        .iter()
        .filter(|a| !inst.is_required(a.tail) && !inst.is_required(a.head))
        .map(|a| a.id)
        .collect();
    let step1 = inst.retain(|_| true, |a| inst.is_required(a.tail) || inst.is_required(a.head));
    if let Some(&t) = step1.unreachable_terminals().first() {
        return Err(PmraError::InfeasibleAfterStep1(t));
    }

    let costs: Vec<f64> = step1.arcs().iter().map(|a| a.cost).collect();
    let (mean_cost, threshold) = match compute_threshold(&costs) {
        Ok(v) => v,
        Err(_) => {
            // nothing left to threshold
            let report = PmraReport {
                mean_cost: 0.0,
                threshold: 0.0,
                arcs_after: step1.num_arcs(),
                removed_step1,
                removed_step3: Vec::new(),
                removed_nodes_step4: Vec::new(),
                arcs_before,
                feasibility_fallback: false,
            };
            let (pruned, removed) = prune_steiner_nodes(&step1);
            return Ok((pruned, PmraReport { removed_nodes_step4: removed, ..report }));
        }
    };

    let mut degree: HashMap<NodeId, usize> = HashMap::new();
    for a in step1.arcs() {
        *degree.entry(a.tail).or_default() += 1;
        *degree.entry(a.head).or_default() += 1;
    }
    let mut candidates: Vec<_> = step1.arcs().iter().filter(|a| a.cost >= threshold).collect();
    candidates.sort_by(|a, b| b.cost.total_cmp(&a.cost).then(a.id.cmp(&b.id)));
    let mut removed_step3 = Vec::new();
    for a in candidates {
        if step1.is_required(a.tail) && step1.is_required(a.head) {
            continue;
        }
        if degree[&a.tail] <= 1 || degree[&a.head] <= 1 {
            continue;
        }
        *degree.get_mut(&a.tail).unwrap() -= 1;
        *degree.get_mut(&a.head).unwrap() -= 1;
        removed_step3.push(a.id);
    }
    let dropped: BTreeSet<ArcId> = removed_step3.iter().copied().collect();
    let step3 = step1.retain(|_| true, |a| !dropped.contains(&a.id));
    let (step4, removed_nodes_step4) = prune_steiner_nodes(&step3);

    let mut report = PmraReport {
        mean_cost,
        threshold,
        removed_step1,
        removed_step3,
        removed_nodes_step4,
        arcs_before,
        arcs_after: 0,
        feasibility_fallback: false,
    };
    let reduced = if step4.unreachable_terminals().is_empty() {
        step4
    } else {
        report.removed_step3.clear();
        report.removed_nodes_step4.clear();
        report.feasibility_fallback = true;
        step1
    };
    report.arcs_after = reduced.num_arcs();
    Ok((reduced, report))
}
