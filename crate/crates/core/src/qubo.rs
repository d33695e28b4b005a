//! Penalty conversion of a [`ConstrainedModel`] into a QUBO.
//!
//! Every equality `expr = b` adds `P (expr - b)^2`. Every inequality
//! `expr >= b` first gets a slack `s` in `[0, U - b]` (U is the sum of the
//! positive coefficients of `expr`), encoded in binary, and adds
//! `P (expr - b - s)^2`. The model objective is added unsquared.
//! Products `x * x` collapse to `x`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{ConstrainedModel, DecisionVar, Relation};

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("constraint {0}: relation '<=' is not supported")]
    UnsupportedRelation(String),
    #[error("penalty must be positive and finite, got {0}")]
    BadPenalty(f64),
    #[error("assignment has {got} values, qubo has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuboLabel {
    Decision(DecisionVar),
    /// Bit `bit` of the slack attached to constraint number `constraint`.
    Slack { constraint: usize, bit: usize },
}

impl fmt::Display for QuboLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuboLabel::Decision(v) => v.fmt(f),
            QuboLabel::Slack { constraint, bit } => write!(f, "s[{constraint}][{bit}]"),
        }
    }
}

impl std::str::FromStr for QuboLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad label '{s}'");
        let (kind, rest) = s.split_at(s.find('[').ok_or_else(bad)?);
        let inner = rest.strip_prefix('[').and_then(|r| r.strip_suffix(']')).ok_or_else(bad)?;
        let (a, b) = inner.split_once("][").ok_or_else(bad)?;
        let a: usize = a.parse().map_err(|_| bad())?;
        let b: usize = b.parse().map_err(|_| bad())?;
        match kind {
            "y" => Ok(QuboLabel::Decision(DecisionVar { arc: a, period: b })),
            "s" => Ok(QuboLabel::Slack { constraint: a, bit: b }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarOrigin {
    Decision,
    Slack,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Penalty {
    /// Twice the summed cost of the model's arcs (each arc counted once,
    /// however many periods it spans).
    Auto,
    /// `1 + Σ |objective coefficients|`. This exceeds the objective of every
    /// assignment, so with integral coefficients any violated assignment has
    /// higher energy than any feasible one.
    Dominant,
    Fixed(f64),
}

impl Penalty {
    pub fn resolve(self, model: &ConstrainedModel) -> Result<f64, QuboError> {
        let p = match self {
            Penalty::Auto => {
                let mut per_arc: BTreeMap<usize, f64> = BTreeMap::new();
                for (v, c) in model.variables().iter().zip(model.objective()) {
                    per_arc.entry(v.arc).or_insert(c.abs());
                }
                2.0 * per_arc.values().sum::<f64>()
            }
            Penalty::Dominant => 1.0 + model.objective().iter().map(|c| c.abs()).sum::<f64>(),
            Penalty::Fixed(p) => p,
        };
        if p > 0.0 && p.is_finite() {
            Ok(p)
        } else {
            Err(QuboError::BadPenalty(p))
        }
    }
}

/// Binary encoding of the slack for one `>=` constraint. Weights are
/// `1, 2, 4, ...` with the last one capped so they sum to `range`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlackEncoding {
    pub constraint: usize,
    pub range: f64,
    pub weights: Vec<f64>,
}

impl SlackEncoding {
    fn new(constraint: usize, range: f64) -> Self {
        let range = range.floor().max(0.0);
        let mut bits = 0u32;
        while 2f64.powi(bits as i32) - 1.0 < range {
            bits += 1;
        }
        let mut weights: Vec<f64> = (0..bits.saturating_sub(1)).map(|b| 2f64.powi(b as i32)).collect();
        if bits > 0 {
            weights.push(range - (2f64.powi(bits as i32 - 1) - 1.0));
        }
        Self { constraint, range, weights }
    }

    /// Bits that represent `value` clamped into `[0, range]`.
    pub fn encode(&self, value: f64) -> Vec<bool> {
        let mut rest = value.clamp(0.0, self.range).floor();
        let mut bits = vec![false; self.weights.len()];
        if let Some((last, lower)) = self.weights.split_last() {
            let lower_max: f64 = lower.iter().sum();
            if rest > lower_max {
                bits[lower.len()] = true;
                rest -= last;
            }
            for (b, w) in lower.iter().enumerate().rev() {
                if rest >= *w {
                    bits[b] = true;
                    rest -= w;
                }
            }
        }
        bits
    }

    pub fn decode(&self, bits: &[bool]) -> f64 {
        self.weights.iter().zip(bits).filter(|(_, &b)| b).map(|(w, _)| w).sum()
    }
}

/// Slack encodings for every `>=` constraint of the model, in constraint order.
pub fn slack_encodings(model: &ConstrainedModel) -> Vec<SlackEncoding> {
    model
        .constraints()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.relation == Relation::Ge)
        .map(|(ci, c)| {
            let upper: f64 = c.terms.iter().map(|(_, a)| a.max(0.0)).sum();
            SlackEncoding::new(ci, upper - c.rhs)
        })
        .collect()
}

/// Total QUBO variable count (decision plus slack bits) without building it.
pub fn qubo_variable_count(model: &ConstrainedModel) -> usize {
    model.num_variables() + slack_encodings(model).iter().map(|s| s.weights.len()).sum::<usize>()
}

/// Extends a decision assignment with the slack bits that minimise each
/// inequality's penalty.
pub fn with_optimal_slacks(model: &ConstrainedModel, decision: &[bool]) -> Vec<bool> {
    let mut full = decision.to_vec();
    for enc in slack_encodings(model) {
        let c = &model.constraints()[enc.constraint];
        full.extend(enc.encode(c.lhs(decision) - c.rhs));
    }
    full
}

#[derive(Clone, Debug, PartialEq)]
pub struct Qubo {
    labels: Vec<QuboLabel>,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
    penalty: f64,
}

impl Qubo {
    pub fn new(
        labels: Vec<QuboLabel>,
        linear: Vec<f64>,
        quadratic: BTreeMap<(usize, usize), f64>,
        offset: f64,
        penalty: f64,
    ) -> Self {
        assert_eq!(labels.len(), linear.len());
        debug_assert!(quadratic.keys().all(|&(i, j)| i < j && j < labels.len()));
        Self { labels, linear, quadratic, offset, penalty }
    }

    pub fn num_variables(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[QuboLabel] {
        &self.labels
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn origin(&self, i: usize) -> VarOrigin {
        match self.labels[i] {
            QuboLabel::Decision(_) => VarOrigin::Decision,
            QuboLabel::Slack { .. } => VarOrigin::Slack,
        }
    }

    pub fn num_decision(&self) -> usize {
        self.labels.iter().filter(|l| matches!(l, QuboLabel::Decision(_))).count()
    }

    /// Number of exported term lines: nonzero linear plus quadratic entries.
    pub fn num_terms(&self) -> usize {
        self.linear.iter().filter(|&&c| c != 0.0).count() + self.quadratic.len()
    }

    pub fn energy(&self, asg: &[bool]) -> Result<f64, QuboError> {
        if asg.len() != self.num_variables() {
            return Err(QuboError::AssignmentLength { expected: self.num_variables(), got: asg.len() });
        }
        let mut e = self.offset;
        for (c, _) in self.linear.iter().zip(asg).filter(|(_, &x)| x) {
            e += c;
        }
        for (&(i, j), c) in &self.quadratic {
            if asg[i] && asg[j] {
                e += c;
            }
        }
        Ok(e)
    }
}

pub fn energy(q: &Qubo, asg: &[bool]) -> Result<f64, QuboError> {
    q.energy(asg)
}

pub fn to_qubo(model: &ConstrainedModel, penalty: Penalty) -> Result<Qubo, QuboError> {
    let p = penalty.resolve(model)?;
    if let Some(c) = model.constraints().iter().find(|c| c.relation == Relation::Le) {
        return Err(QuboError::UnsupportedRelation(c.tag.to_string()));
    }

    let mut labels: Vec<QuboLabel> =
        model.variables().iter().map(|&v| QuboLabel::Decision(v)).collect();
    let mut slack_start = HashMap::new();
    for enc in slack_encodings(model) {
        slack_start.insert(enc.constraint, (labels.len(), enc.weights.clone()));
        labels.extend(
            (0..enc.weights.len()).map(|bit| QuboLabel::Slack { constraint: enc.constraint, bit }),
        );
    }

    let mut linear = vec![0.0; labels.len()];
    linear[..model.num_variables()].copy_from_slice(model.objective());
    let mut quad: HashMap<(usize, usize), f64> = HashMap::new();
    let mut offset = 0.0;

    for (ci, c) in model.constraints().iter().enumerate() {
        let mut terms: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, a) in &c.terms {
            *terms.entry(i).or_default() += a;
        }
        if let Some((start, weights)) = slack_start.get(&ci) {
            for (b, w) in weights.iter().enumerate() {
                *terms.entry(start + b).or_default() -= w;
            }
        }
        let terms: Vec<(usize, f64)> = terms.into_iter().filter(|(_, a)| *a != 0.0).collect();
        let constant = -c.rhs;
        // P (Σ a_i x_i + k)^2 with x_i^2 = x_i
        for (n, &(i, a)) in terms.iter().enumerate() {
            linear[i] += p * (a * a + 2.0 * constant * a);
            for &(j, b) in &terms[n + 1..] {
                *quad.entry((i, j)).or_default() += 2.0 * p * a * b;
            }
        }
        offset += p * constant * constant;
    }

    let quadratic = quad.into_iter().filter(|(_, v)| *v != 0.0).collect();
    Ok(Qubo::new(labels, linear, quadratic, offset, p))
}

/// Text form: `qubo <nvars> <nterms> <offset> <penalty>`, one `<i> <j> <coeff>`
/// line per term (`i = j` for linear) sorted by `(i, j)`, then one
/// `<index> <label>` line per variable.
pub fn export_qubo(q: &Qubo) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubo {} {} {} {}", q.num_variables(), q.num_terms(), q.offset, q.penalty);
    let mut terms: Vec<((usize, usize), f64)> = q
        .linear
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, &c)| ((i, i), c))
        .chain(q.quadratic.iter().map(|(&k, &v)| (k, v)))
        .collect();
    terms.sort_by_key(|&(k, _)| k);
    for ((i, j), c) in terms {
        let _ = writeln!(out, "{i} {j} {c}");
    }
    for (i, l) in q.labels.iter().enumerate() {
        let _ = writeln!(out, "{i} {l}");
    }
    out
}

pub fn parse_qubo(text: &str) -> Result<Qubo, QuboError> {
    let err = |line: usize, msg: &str| QuboError::Parse { line, msg: msg.to_string() };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| err(1, "empty document"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "qubo" {
        return Err(err(hl, "expected 'qubo <nvars> <nterms> <offset> <penalty>'"));
    }
    let nvars: usize = h[1].parse().map_err(|_| err(hl, "bad nvars"))?;
    let nterms: usize = h[2].parse().map_err(|_| err(hl, "bad nterms"))?;
    let offset: f64 = h[3].parse().map_err(|_| err(hl, "bad offset"))?;
    let penalty: f64 = h[4].parse().map_err(|_| err(hl, "bad penalty"))?;

    let mut linear = vec![0.0; nvars];
    let mut quadratic = BTreeMap::new();
    let mut labels: Vec<Option<QuboLabel>> = vec![None; nvars];
    let mut seen_terms = 0;
    for (ln, l) in lines {
        let tok: Vec<&str> = l.split_whitespace().collect();
        let index = |s: &str| -> Result<usize, QuboError> {
            let i: usize = s.parse().map_err(|_| err(ln, "bad index"))?;
            if i >= nvars {
                return Err(err(ln, "index out of range"));
            }
            Ok(i)
        };
        match tok.as_slice() {
            [i, j, c] => {
                let (i, j) = (index(i)?, index(j)?);
                let c: f64 = c.parse().map_err(|_| err(ln, "bad coefficient"))?;
                if i == j {
                    linear[i] = c;
                } else {
                    quadratic.insert((i.min(j), i.max(j)), c);
                }
                seen_terms += 1;
            }
            [i, label] => {
                let i = index(i)?;
                labels[i] = Some(label.parse().map_err(|m: String| err(ln, &m))?);
            }
            _ => return Err(err(ln, "expected a term or a label line")),
        }
    }
    if seen_terms != nterms {
        return Err(err(hl, &format!("header declares {nterms} terms, found {seen_terms}")));
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| err(0, &format!("variable {i} has no label"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Qubo::new(labels, linear, quadratic, offset, penalty))
}
