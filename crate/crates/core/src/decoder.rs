//! Turning assignments back into routes.
//!
//! QUBO energies mix the route cost with penalty terms, so samples are
//! judged by the walk they encode: the active arcs of each period must form a
//! single walk leaving the depot in period 1, moving every period while away
//! from the depot, and ending back there with every terminal visited. The
//! walk may idle at the depot and leave again later, which the model allows.
//! Nothing is repaired.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::graph::{ArcId, Instance, NodeId, DEPOT};
use crate::model::ConstrainedModel;
use crate::oracle::Route;
use crate::qubo::Qubo;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeViolation {
    NoArcAtPeriodOne,
    MultipleArcs { period: usize },
    /// The arc active in `period` does not leave the node the walk is at.
    Discontinuity { period: usize },
    /// No arc is active in `period` while the walk is away from the depot.
    Stalled { node: NodeId, period: usize },
    NotReturned { node: NodeId },
    TerminalUnvisited(NodeId),
}

impl fmt::Display for DecodeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeViolation::NoArcAtPeriodOne => write!(f, "no arc at period 1"),
            DecodeViolation::MultipleArcs { period } => {
                write!(f, "multiple arcs in one period (period {period})")
            }
            DecodeViolation::Discontinuity { period } => write!(f, "discontinuity at period {period}"),
            DecodeViolation::Stalled { node, period } => {
                write!(f, "walk stalls at node {node} in period {period}")
            }
            DecodeViolation::NotReturned { node } => write!(f, "walk ends at node {node}, not the depot"),
            DecodeViolation::TerminalUnvisited(t) => write!(f, "terminal {t} unvisited"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DecodeOutcome {
    Feasible(Route),
    Infeasible(Vec<DecodeViolation>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeReport {
    pub outcome: DecodeOutcome,
    /// Sum of the costs of all active decision variables.
    pub objective: f64,
    /// Filled by [`decode_sample`].
    pub energy: Option<f64>,
    /// `energy - objective`: zero for a feasible walk whose slack bits hold
    /// the exact surplus.
    pub penalty_part: Option<f64>,
}

impl DecodeReport {
    pub fn route(&self) -> Option<&Route> {
        match &self.outcome {
            DecodeOutcome::Feasible(r) => Some(r),
            DecodeOutcome::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.route().is_some()
    }

    pub fn true_cost(&self) -> Option<f64> {
        self.route().map(|r| r.cost)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("assignment has {got} values, model needs at least {expected}")]
    TooShort { expected: usize, got: usize },
    #[error("route has {len} arcs, horizon is {horizon}")]
    RouteTooLong { len: usize, horizon: usize },
    #[error("arc {0} is not a model arc")]
    UnknownArc(ArcId),
}

/// Decodes the decision part of `asg` (slack bits after the model variables
/// are ignored).
pub fn decode(
    asg: &[bool],
    model: &ConstrainedModel,
    inst: &Instance,
) -> Result<DecodeReport, DecodeError> {
    let n = model.num_variables();
    if asg.len() < n {
        return Err(DecodeError::TooShort { expected: n, got: asg.len() });
    }
    let decision = &asg[..n];
    let horizon = model.horizon();
    let mut by_period: Vec<Vec<ArcId>> = vec![Vec::new(); horizon + 1];
    for (v, _) in model.variables().iter().zip(decision).filter(|(_, &x)| x) {
        by_period[v.period].push(v.arc);
    }
    let objective = model.objective_value(decision);

    let mut violations = Vec::new();
    if by_period[1].is_empty() {
        violations.push(DecodeViolation::NoArcAtPeriodOne);
    }
    for (t, arcs) in by_period.iter().enumerate().skip(1) {
        if arcs.len() > 1 {
            violations.push(DecodeViolation::MultipleArcs { period: t });
        }
    }

    let mut walk = Vec::new();
    let mut visited = BTreeSet::new();
    for arcs in &by_period {
        for &id in arcs {
            if let Some(a) = inst.arc_by_id(id) {
                visited.insert(a.tail);
                visited.insert(a.head);
            }
        }
    }

    if violations.is_empty() {
        let mut at = DEPOT;
        for (t, arcs) in by_period.iter().enumerate().skip(1) {
            match arcs.first().and_then(|&id| inst.arc_by_id(id)) {
                Some(a) => {
                    if a.tail != at {
                        violations.push(DecodeViolation::Discontinuity { period: t });
                        break;
                    }
                    walk.push(a.id);
                    at = a.head;
                }
                None if at != DEPOT => {
                    violations.push(DecodeViolation::Stalled { node: at, period: t });
                    break;
                }
                None => {}
            }
        }
        if violations.is_empty() && at != DEPOT {
            violations.push(DecodeViolation::NotReturned { node: at });
        }
    }
    for t in inst.terminals() {
        if !visited.contains(&t) {
            violations.push(DecodeViolation::TerminalUnvisited(t));
        }
    }

    let outcome = if violations.is_empty() {
        DecodeOutcome::Feasible(Route::from_arcs(inst, walk))
    } else {
        DecodeOutcome::Infeasible(violations)
    };
    Ok(DecodeReport { outcome, objective, energy: None, penalty_part: None })
}

/// [`decode`] plus the sample's QUBO energy and its penalty share.
pub fn decode_sample(
    asg: &[bool],
    qubo: &Qubo,
    model: &ConstrainedModel,
    inst: &Instance,
) -> Result<DecodeReport, DecodeError> {
    let mut report = decode(asg, model, inst)?;
    let energy = qubo
        .energy(asg)
        .map_err(|_| DecodeError::TooShort { expected: qubo.num_variables(), got: asg.len() })?;
    report.energy = Some(energy);
    report.penalty_part = Some(energy - report.objective);
    Ok(report)
}

/// Places the `t`-th arc of the route in period `t`.
pub fn encode_route(route: &Route, model: &ConstrainedModel) -> Result<Vec<bool>, DecodeError> {
    if route.len() > model.horizon() {
        return Err(DecodeError::RouteTooLong { len: route.len(), horizon: model.horizon() });
    }
    let mut asg = vec![false; model.num_variables()];
    for (step, &arc) in route.arcs.iter().enumerate() {
        let i = model.var_index(arc, step + 1).ok_or(DecodeError::UnknownArc(arc))?;
        asg[i] = true;
    }
    Ok(asg)
}

/// Checks a route against the instance; an empty list means it is valid.
pub fn validate_route(route: &Route, inst: &Instance) -> Vec<String> {
    let mut problems = Vec::new();
    let mut arcs = Vec::with_capacity(route.len());
    for &id in &route.arcs {
        match inst.arc_by_id(id) {
            Some(a) => arcs.push(*a),
            None => problems.push(format!("unknown arc {id}")),
        }
    }
    if !problems.is_empty() {
        return problems;
    }
    if let Some(first) = arcs.first() {
        if first.tail != DEPOT {
            problems.push("route does not start at the depot".to_string());
        }
    }
    for (step, w) in arcs.windows(2).enumerate() {
        if w[0].head != w[1].tail {
            problems.push(format!("discontinuity at step {}", step + 2));
        }
    }
    if let Some(last) = arcs.last() {
        if last.head != DEPOT {
            problems.push("route does not end at the depot".to_string());
        }
    }
    let visited = route.visited_terminals(inst);
    for t in inst.terminals() {
        if visited.binary_search(&t).is_err() {
            problems.push(format!("terminal {t} unvisited"));
        }
    }
    let recomputed: f64 = arcs.iter().map(|a| a.cost).sum();
    if recomputed != route.cost {
        problems.push(format!("stored cost {} differs from arc sum {recomputed}", route.cost));
    }
    problems
}
