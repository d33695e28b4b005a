//! Time-indexed binary model.
//!
//! One binary `y[k][t]` per arc `k` and period `t = 1..=T`, where the horizon
//! `T` defaults to the number of arcs. The constraint families are:
//!
//! * `eq2`: exactly one depot arc in period 1;
//! * `eq3_k<k>`: every other arc is idle in period 1;
//! * `eq4`: depot departures equal depot arrivals over all periods;
//! * `eq5_i<i>`: each terminal is left at least once;
//! * `eq6_i<i>_t<t>`: for every non-depot node, arrivals in period `t` equal
//!   departures in period `t + 1`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::graph::{AdjacencyIndex, ArcId, Instance, NodeId, DEPOT};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("instance has no arcs")]
    NoArcs,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("assignment has {got} values, model has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
    #[error("objective has {got} coefficients, model has {expected} variables")]
    ObjectiveLength { expected: usize, got: usize },
    #[error("constraint {tag} references variable {index} out of range")]
    BadTerm { tag: String, index: usize },
}

/// `y[arc][period]`; `arc` is the arc id, `period` starts at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecisionVar {
    pub arc: ArcId,
    pub period: usize,
}

impl fmt::Display for DecisionVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y[{}][{}]", self.arc, self.period)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Ge,
    Le,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Le => "<=",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Le => lhs <= rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintTag {
    DepotStart,
    FirstPeriodIdle { arc: ArcId },
    DepotBalance,
    Coverage { node: NodeId },
    Flow { node: NodeId, period: usize },
    Named(String),
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintTag::DepotStart => write!(f, "eq2"),
            ConstraintTag::FirstPeriodIdle { arc } => write!(f, "eq3_k{arc}"),
            ConstraintTag::DepotBalance => write!(f, "eq4"),
            ConstraintTag::Coverage { node } => write!(f, "eq5_i{node}"),
            ConstraintTag::Flow { node, period } => write!(f, "eq6_i{node}_t{period}"),
            ConstraintTag::Named(name) => f.write_str(name),
        }
    }
}

/// `Σ coeff·x  <relation>  rhs`, terms refer to model variable indices.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: ConstraintTag,
}

impl LinearConstraint {
    pub fn lhs(&self, asg: &[bool]) -> f64 {
        self.terms.iter().filter(|(i, _)| asg[*i]).map(|(_, c)| c).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub tag: ConstraintTag,
    /// `lhs - rhs`
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub violations: Vec<Violation>,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedModel {
    variables: Vec<DecisionVar>,
    objective: Vec<f64>,
    constraints: Vec<LinearConstraint>,
    horizon: usize,
    index: HashMap<DecisionVar, usize>,
}

impl ConstrainedModel {
    /// Assembles a model from explicit parts. Used for hand-written models;
    /// [`build_model`] is the route from an instance.
    pub fn new(
        variables: Vec<DecisionVar>,
        objective: Vec<f64>,
        constraints: Vec<LinearConstraint>,
    ) -> Result<Self, ModelError> {
        if objective.len() != variables.len() {
            return Err(ModelError::ObjectiveLength {
                expected: variables.len(),
                got: objective.len(),
            });
        }
        for c in &constraints {
            if let Some(&(index, _)) = c.terms.iter().find(|(i, _)| *i >= variables.len()) {
                return Err(ModelError::BadTerm { tag: c.tag.to_string(), index });
            }
        }
        let horizon = variables.iter().map(|v| v.period).max().unwrap_or(0);
        let index = variables.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        Ok(Self { variables, objective, constraints, horizon, index })
    }

    pub fn variables(&self) -> &[DecisionVar] {
        &self.variables
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn var_index(&self, arc: ArcId, period: usize) -> Option<usize> {
        self.index.get(&DecisionVar { arc, period }).copied()
    }

    pub fn objective_value(&self, asg: &[bool]) -> f64 {
        self.objective.iter().zip(asg).filter(|(_, &x)| x).map(|(c, _)| c).sum()
    }

    pub fn evaluate(&self, asg: &[bool]) -> Result<Evaluation, ModelError> {
        evaluate_assignment(self, asg)
    }
}

pub fn build_model(inst: &Instance) -> Result<ConstrainedModel, ModelError> {
    build_model_with_horizon(inst, None)
}

/// Like [`build_model`] with an optional horizon override (default: `|A|`).
pub fn build_model_with_horizon(
    inst: &Instance,
    horizon: Option<usize>,
) -> Result<ConstrainedModel, ModelError> {
    let arcs = inst.arcs();
    if arcs.is_empty() {
        return Err(ModelError::NoArcs);
    }
    let horizon = horizon.unwrap_or(arcs.len());
    if horizon == 0 {
        return Err(ModelError::ZeroHorizon);
    }
    let adj = AdjacencyIndex::new(inst);
    let n_arcs = arcs.len();
    // period-major layout: index = (t - 1) * |A| + arc position
    let at = |pos: usize, t: usize| (t - 1) * n_arcs + pos;

    let mut variables = Vec::with_capacity(n_arcs * horizon);
    let mut objective = Vec::with_capacity(n_arcs * horizon);
    for t in 1..=horizon {
        for a in arcs {
            variables.push(DecisionVar { arc: a.id, period: t });
            objective.push(a.cost);
        }
    }

    let mut constraints = Vec::new();
    let depot_out = adj.out_arcs(DEPOT);
    let depot_in = adj.in_arcs(DEPOT);

    constraints.push(LinearConstraint {
        terms: depot_out.iter().map(|&p| (at(p, 1), 1.0)).collect(),
        relation: Relation::Eq,
        rhs: 1.0,
        tag: ConstraintTag::DepotStart,
    });
    for (pos, a) in arcs.iter().enumerate() {
        if a.tail != DEPOT {
            constraints.push(LinearConstraint {
                terms: vec![(at(pos, 1), 1.0)],
                relation: Relation::Eq,
                rhs: 0.0,
                tag: ConstraintTag::FirstPeriodIdle { arc: a.id },
            });
        }
    }
    let mut balance = Vec::new();
    for t in 1..=horizon {
        balance.extend(depot_out.iter().map(|&p| (at(p, t), 1.0)));
        balance.extend(depot_in.iter().map(|&p| (at(p, t), -1.0)));
    }
    constraints.push(LinearConstraint {
        terms: balance,
        relation: Relation::Eq,
        rhs: 0.0,
        tag: ConstraintTag::DepotBalance,
    });
    for node in inst.terminals() {
        let terms = (1..=horizon)
            .flat_map(|t| adj.out_arcs(node).iter().map(move |&p| (at(p, t), 1.0)))
            .collect();
        constraints.push(LinearConstraint {
            terms,
            relation: Relation::Ge,
            rhs: 1.0,
            tag: ConstraintTag::Coverage { node },
        });
    }
    for node in inst.nodes().iter().map(|n| n.id).filter(|&i| i != DEPOT) {
        for t in 1..horizon {
            let mut terms: Vec<(usize, f64)> =
                adj.in_arcs(node).iter().map(|&p| (at(p, t), 1.0)).collect();
            terms.extend(adj.out_arcs(node).iter().map(|&p| (at(p, t + 1), -1.0)));
            constraints.push(LinearConstraint {
                terms,
                relation: Relation::Eq,
                rhs: 0.0,
                tag: ConstraintTag::Flow { node, period: t },
            });
        }
    }

    ConstrainedModel::new(variables, objective, constraints)
}

pub fn evaluate_assignment(
    model: &ConstrainedModel,
    asg: &[bool],
) -> Result<Evaluation, ModelError> {
    if asg.len() != model.num_variables() {
        return Err(ModelError::AssignmentLength {
            expected: model.num_variables(),
            got: asg.len(),
        });
    }
    let violations = model
        .constraints
        .iter()
        .filter_map(|c| {
            let lhs = c.lhs(asg);
            (!c.relation.holds(lhs, c.rhs))
                .then(|| Violation { tag: c.tag.clone(), residual: lhs - c.rhs })
        })
        .collect();
    Ok(Evaluation { objective: model.objective_value(asg), violations })
}

fn lp_name(v: &DecisionVar) -> String {
    format!("y_{}_{}", v.arc, v.period)
}

const TERMS_PER_LINE: usize = 8;

fn write_expr(out: &mut String, model: &ConstrainedModel, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        // LP syntax needs at least one term
        let _ = write!(out, " 0 {}", lp_name(&model.variables[0]));
        return;
    }
    for (n, &(i, c)) in terms.iter().enumerate() {
        if n > 0 && n % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let mag = c.abs();
        let name = lp_name(&model.variables[i]);
        match (n, mag == 1.0) {
            (0, true) if sign == '+' => { let _ = write!(out, " {name}"); }
            (0, false) if sign == '+' => { let _ = write!(out, " {mag} {name}"); }
            (_, true) => { let _ = write!(out, " {sign} {name}"); }
            (_, false) => { let _ = write!(out, " {sign} {mag} {name}"); }
        }
    }
}

/// Writes the model in CPLEX LP text format. Output is deterministic.
pub fn export_lp(model: &ConstrainedModel) -> String {
    let mut out = String::from("\\ time-indexed STSP model\nMinimize\n obj:");
    let obj: Vec<(usize, f64)> = model
        .objective
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, &c)| (i, c))
        .collect();
    write_expr(&mut out, model, &obj);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.tag);
        write_expr(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.relation.symbol(), c.rhs);
    }
    out.push_str("Binaries\n");
    for chunk in model.variables.chunks(TERMS_PER_LINE) {
        let names: Vec<String> = chunk.iter().map(lp_name).collect();
        let _ = writeln!(out, " {}", names.join(" "));
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::t1;

    /// Route 0->1 at t=1, 1->0 at t=2 on T1.
    fn t1_route_assignment(model: &ConstrainedModel) -> Vec<bool> {
        let mut asg = vec![false; model.num_variables()];
        asg[model.var_index(0, 1).unwrap()] = true;
        asg[model.var_index(1, 2).unwrap()] = true;
        asg
    }

    #[test]
    fn t1_model_shape() {
        let inst = t1();
        let model = build_model(&inst).unwrap();
        assert_eq!(model.num_variables(), 36);
        assert_eq!(model.constraints().len(), 1 + 4 + 1 + 1 + 2 * 5);
        assert_eq!(model.horizon(), 6);
        let k = model.var_index(0, 3).unwrap();
        assert_eq!(model.objective()[k], 25.0);
        assert!(model.objective().iter().all(|&c| c > 0.0));
    }

    #[test]
    fn single_arc_model_has_no_flow_constraints() {
        let inst = Instance::from_parts(&[0, 1], &[], &[(0, 1, 20.0)]).unwrap();
        let model = build_model(&inst).unwrap();
        assert_eq!(model.num_variables(), 1);
        assert!(model
            .constraints()
            .iter()
            .all(|c| !matches!(c.tag, ConstraintTag::Flow { .. })));
        // eq2 + eq4, node 1 is steiner and 0->1 leaves the depot
        assert_eq!(model.constraints().len(), 2);
    }

    #[test]
    fn empty_arc_set_is_rejected() {
        let inst = Instance::from_parts(&[0, 1], &[1], &[]).unwrap();
        assert_eq!(build_model(&inst), Err(ModelError::NoArcs));
    }

    #[test]
    fn all_zero_assignment_on_t1() {
        let model = build_model(&t1()).unwrap();
        let ev = evaluate_assignment(&model, &[false; 36]).unwrap();
        assert_eq!(ev.objective, 0.0);
        let tags: Vec<(String, f64)> =
            ev.violations.iter().map(|v| (v.tag.to_string(), v.residual)).collect();
        assert_eq!(tags, vec![("eq2".to_string(), -1.0), ("eq5_i1".to_string(), -1.0)]);
    }

    #[test]
    fn optimal_route_on_t1_is_feasible() {
        let model = build_model(&t1()).unwrap();
        let ev = evaluate_assignment(&model, &t1_route_assignment(&model)).unwrap();
        assert_eq!(ev.objective, 55.0);
        assert!(ev.is_feasible(), "{:?}", ev.violations);
    }

    #[test]
    fn two_arcs_in_first_period() {
        let model = build_model(&t1()).unwrap();
        let mut asg = vec![false; 36];
        asg[model.var_index(0, 1).unwrap()] = true;
        asg[model.var_index(2, 1).unwrap()] = true;
        let ev = evaluate_assignment(&model, &asg).unwrap();
        let eq2 = ev.violations.iter().find(|v| v.tag == ConstraintTag::DepotStart).unwrap();
        assert_eq!(eq2.residual, 1.0);

        let mut asg = vec![false; 36];
        asg[model.var_index(0, 1).unwrap()] = true;
        asg[model.var_index(3, 1).unwrap()] = true;
        let ev = evaluate_assignment(&model, &asg).unwrap();
        assert!(ev.violations.iter().any(|v| v.tag == ConstraintTag::FirstPeriodIdle { arc: 3 }));
    }

    #[test]
    fn wrong_length_assignment() {
        let model = build_model(&t1()).unwrap();
        assert_eq!(
            evaluate_assignment(&model, &[true]),
            Err(ModelError::AssignmentLength { expected: 36, got: 1 })
        );
    }

    #[test]
    fn lp_export_t1() {
        let model = build_model(&t1()).unwrap();
        let lp = export_lp(&model);
        assert_eq!(lp, export_lp(&model));
        let binaries: usize = lp
            .split("Binaries\n")
            .nth(1)
            .unwrap()
            .split("End")
            .next()
            .unwrap()
            .split_whitespace()
            .count();
        assert_eq!(binaries, 36);
        let constraints = lp
            .split("Subject To\n")
            .nth(1)
            .unwrap()
            .split("Binaries")
            .next()
            .unwrap()
            .lines()
            .filter(|l| l.trim_start().split(':').next().is_some_and(|h| h.starts_with("eq")) && l.contains(':'))
            .count();
        assert_eq!(constraints, 17);
        assert!(lp.contains(" eq2: y_0_1 + y_2_1 = 1\n"));
        assert!(lp.contains(" eq5_i1: "));
        assert!(lp.contains(" eq6_i2_t5: y_2_5 + y_4_5 - y_3_6 - y_5_6 = 0\n"));
    }

    #[test]
    fn horizon_override() {
        let model = build_model_with_horizon(&t1(), Some(2)).unwrap();
        assert_eq!(model.num_variables(), 12);
        assert_eq!(model.constraints().len(), 1 + 4 + 1 + 1 + 2);
        assert_eq!(build_model_with_horizon(&t1(), Some(0)), Err(ModelError::ZeroHorizon));
    }
}
