//! Batch experiments: generate instances, optionally reduce them, solve, and
//! aggregate per `(|V|, variant)` into rows shaped like the result tables
//! (average and standard deviation of cost over solved runs, percentage of
//! solved runs, average and standard deviation of wall time over all runs).

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::anneal::{anneal, AnnealParams};
use crate::decoder::decode;
use crate::graph::{generate_instance, GeneratorConfig, Instance, InstanceError};
use crate::model::{build_model, export_lp};
use crate::oracle::optimal_cost;
use crate::pmra::reduce;
use crate::qubo::{export_qubo, qubo_variable_count, to_qubo, Penalty};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Solver {
    Sa,
    Exact,
    ExportLp,
    ExportQubo,
}

impl Solver {
    fn variant(self, reduced: bool) -> &'static str {
        match (self, reduced) {
            (Solver::Sa, false) => "SQUBO",
            (Solver::Sa, true) => "RQUBO",
            (Solver::Exact, false) => "SILP",
            (Solver::Exact, true) => "RILP",
            (Solver::ExportLp, false) => "SILP-export",
            (Solver::ExportLp, true) => "RILP-export",
            (Solver::ExportQubo, false) => "SQUBO-export",
            (Solver::ExportQubo, true) => "RQUBO-export",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// Total node counts `|V|`, depot included.
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed_base: u64,
    pub with_pmra: bool,
    pub without_pmra: bool,
    pub solver: Solver,
    pub time_limit: Duration,
    pub generator: GeneratorConfig,
    pub penalty: Penalty,
    pub reads: usize,
    pub sweeps: usize,
    /// Export solvers write `<variant>_v<size>_r<rep>.{lp,qubo}` here.
    pub export_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sizes: vec![4, 5, 6, 7],
            repetitions: 10,
            seed_base: 0,
            with_pmra: true,
            without_pmra: true,
            solver: Solver::Sa,
            time_limit: Duration::from_secs(10),
            generator: GeneratorConfig::default(),
            penalty: Penalty::Auto,
            reads: 1000,
            sweeps: 1000,
            export_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::InvalidConfig(m.to_string()));
        if self.sizes.is_empty() {
            return bad("sizes must be nonempty");
        }
        if let Some(s) = self.sizes.iter().find(|&&s| s < 3) {
            return bad(&format!("|V| = {s} is below the minimum of 3"));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if !self.with_pmra && !self.without_pmra {
            return bad("select at least one of with/without PMRA");
        }
        if self.reads == 0 || self.sweeps == 0 {
            return bad("reads and sweeps must be positive");
        }
        if !(0.0..=1.0).contains(&self.generator.density) {
            return bad("density must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Outcome of one solver run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOutcome {
    pub cost: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultsRow {
    pub size: usize,
    pub variant: String,
    /// `None` when no run was solved.
    pub avg_objective: Option<f64>,
    pub std_objective: Option<f64>,
    pub pct_solved: f64,
    pub avg_time: f64,
    pub std_time: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population statistics: cost over solved runs, time over all runs.
pub fn aggregate(size: usize, variant: &str, runs: &[RunOutcome]) -> ResultsRow {
    let costs: Vec<f64> = runs.iter().filter_map(|r| r.cost).collect();
    let times: Vec<f64> = runs.iter().map(|r| r.seconds).collect();
    let (avg_objective, std_objective) = if costs.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&costs);
        (Some(m), Some(s))
    };
    let (avg_time, std_time) = if times.is_empty() { (0.0, 0.0) } else { mean_std(&times) };
    ResultsRow {
        size,
        variant: variant.to_string(),
        avg_objective,
        std_objective,
        pct_solved: if runs.is_empty() { 0.0 } else { 100.0 * costs.len() as f64 / runs.len() as f64 },
        avg_time,
        std_time,
    }
}

fn export_file(cfg: &ExperimentConfig, name: String, body: &str) -> Result<(), BenchError> {
    if let Some(dir) = &cfg.export_dir {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| BenchError::Io { path, source })?;
    }
    Ok(())
}

/// Runs one solver on a prepared instance. The clock starts before the
/// reduction so the reduced variant pays for its preprocessing.
fn run_once(
    cfg: &ExperimentConfig,
    inst: &Instance,
    reduced: bool,
    size: usize,
    rep: usize,
) -> Result<RunOutcome, BenchError> {
    let started = Instant::now();
    let prepared = if reduced {
        match reduce(inst) {
            Ok((r, _)) => r,
            Err(_) => return Ok(RunOutcome { cost: None, seconds: started.elapsed().as_secs_f64() }),
        }
    } else {
        inst.clone()
    };
    let seed = cfg.seed_base + rep as u64;
    let tag = cfg.solver.variant(reduced);
    let cost = match cfg.solver {
        Solver::Exact => optimal_cost(&prepared).ok().map(|(c, _)| c),
        Solver::Sa => {
            let model = build_model(&prepared).ok();
            let qubo = model.as_ref().and_then(|m| to_qubo(m, cfg.penalty).ok());
            match (model, qubo) {
                (Some(model), Some(qubo)) => {
                    let params = AnnealParams {
                        num_reads: cfg.reads,
                        sweeps: cfg.sweeps,
                        seed,
                        time_limit: Some(cfg.time_limit),
                        ..Default::default()
                    };
                    let samples = anneal(&qubo, &params);
                    samples
                        .best()
                        .and_then(|b| decode(&b.assignment, &model, &prepared).ok())
                        .and_then(|r| r.true_cost())
                }
                _ => None,
            }
        }
        Solver::ExportLp => {
            if let Ok(model) = build_model(&prepared) {
                let text = export_lp(&model);
                let seconds = started.elapsed().as_secs_f64();
                export_file(cfg, format!("{tag}_v{size}_r{rep}.lp"), &text)?;
                return Ok(RunOutcome { cost: None, seconds });
            }
            None
        }
        Solver::ExportQubo => {
            let text = build_model(&prepared)
                .ok()
                .and_then(|m| to_qubo(&m, cfg.penalty).ok())
                .map(|q| export_qubo(&q));
            if let Some(text) = text {
                let seconds = started.elapsed().as_secs_f64();
                export_file(cfg, format!("{tag}_v{size}_r{rep}.qubo"), &text)?;
                return Ok(RunOutcome { cost: None, seconds });
            }
            None
        }
    };
    Ok(RunOutcome { cost, seconds: started.elapsed().as_secs_f64() })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultsRow>, BenchError> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let mut standard = Vec::new();
        let mut reduced = Vec::new();
        for rep in 0..cfg.repetitions {
            let inst = generate_instance(size - 1, cfg.seed_base + rep as u64, &cfg.generator)?;
            if cfg.without_pmra {
                standard.push(run_once(cfg, &inst, false, size, rep)?);
            }
            if cfg.with_pmra {
                reduced.push(run_once(cfg, &inst, true, size, rep)?);
            }
        }
        if cfg.without_pmra {
            rows.push(aggregate(size, cfg.solver.variant(false), &standard));
        }
        if cfg.with_pmra {
            rows.push(aggregate(size, cfg.solver.variant(true), &reduced));
        }
    }
    rows.sort_by(|a, b| a.size.cmp(&b.size).then_with(|| a.variant.cmp(&b.variant)));
    Ok(rows)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

/// CSV with point decimals; `-` marks cells with no solved run. With
/// `timing = false` the two time columns are left out.
pub fn emit_csv(rows: &[ResultsRow], timing: bool) -> String {
    let mut out = String::from("V,variant,avg_obj,std_obj,pct_solved");
    if timing {
        out.push_str(",avg_time,std_time");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{:.2}",
            r.size,
            r.variant,
            cell(r.avg_objective),
            cell(r.std_objective),
            r.pct_solved
        );
        if timing {
            let _ = write!(out, ",{:.2},{:.2}", r.avg_time, r.std_time);
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub size: usize,
    pub seed: u64,
    pub nvar_standard: usize,
    /// `None` when the reduction rejected the instance.
    pub nvar_reduced: Option<usize>,
}

impl GapRow {
    pub fn gap(&self) -> Option<i64> {
        self.nvar_reduced.map(|r| gap_percent(self.nvar_standard, r))
    }
}

/// `round(100 (1 - reduced / standard))`.
pub fn gap_percent(standard: usize, reduced: usize) -> i64 {
    (100.0 * (1.0 - reduced as f64 / standard as f64)).round() as i64
}

/// QUBO variable counts (decision plus slack) with and without reduction,
/// one row per `(size, seed)`.
pub fn gap_table(
    sizes: &[usize],
    seeds: &[u64],
    generator: &GeneratorConfig,
) -> Result<Vec<GapRow>, BenchError> {
    let mut rows = Vec::new();
    for &size in sizes {
        if size < 3 {
            return Err(BenchError::InvalidConfig(format!("|V| = {size} is below the minimum of 3")));
        }
        for &seed in seeds {
            let inst = generate_instance(size - 1, seed, generator)?;
            let count = |i: &Instance| build_model(i).ok().map(|m| qubo_variable_count(&m));
            let nvar_standard = count(&inst).unwrap_or(0);
            let nvar_reduced = reduce(&inst).ok().and_then(|(r, _)| count(&r));
            rows.push(GapRow { size, seed, nvar_standard, nvar_reduced });
        }
    }
    Ok(rows)
}

pub fn emit_gap_csv(rows: &[GapRow]) -> String {
    let mut out = String::from("V,seed,nvar_squbo,nvar_rqubo,gap\n");
    for r in rows {
        let reduced = r.nvar_reduced.map_or("-".to_string(), |n| n.to_string());
        let gap = r.gap().map_or("-".to_string(), |g| format!("{g}%"));
        let _ = writeln!(out, "{},{},{},{},{}", r.size, r.seed, r.nvar_standard, reduced, gap);
    }
    out
}

/// Mean GAP over rows where the reduction succeeded.
pub fn mean_gap(rows: &[GapRow]) -> Option<f64> {
    let gaps: Vec<f64> = rows.iter().filter_map(|r| r.gap()).map(|g| g as f64).collect();
    (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
}
