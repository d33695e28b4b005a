use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use stsp::anneal::{anneal, AnnealParams};
use stsp::bench::{self, ExperimentConfig, Solver};
use stsp::decoder::{decode_sample, DecodeOutcome};
use stsp::graph::{generate_instance, load_instance, save_instance, CostMode, GeneratorConfig, Instance};
use stsp::model::{build_model, export_lp, ConstraintTag};
use stsp::oracle::optimal_cost;
use stsp::pmra::reduce;
use stsp::qubo::{export_qubo, to_qubo, Penalty};

/// Steiner TSP toolkit: instance generation, arc reduction, time-indexed
/// model and QUBO export, simulated annealing and an exact oracle.
#[derive(Parser)]
#[command(name = "stsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance document.
    Generate {
        /// Total node count |V|, depot included.
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply arc reduction; writes the reduced instance and prints the report.
    Reduce {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the time-indexed model and print its size.
    Build {
        input: PathBuf,
        #[arg(long)]
        pmra: bool,
    },
    /// Export the time-indexed model in LP format.
    ExportLp {
        input: PathBuf,
        #[arg(long)]
        pmra: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the penalty QUBO with its variable map.
    ExportQubo {
        input: PathBuf,
        #[arg(long)]
        pmra: bool,
        /// `auto`, `dominant` or a positive number.
        #[arg(long, default_value = "auto")]
        penalty: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the QUBO by simulated annealing and decode the best sample.
    SolveSa {
        input: PathBuf,
        #[arg(long)]
        pmra: bool,
        #[command(flatten)]
        sa: SaArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        beta_hot: Option<f64>,
        #[arg(long)]
        beta_cold: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "auto")]
        penalty: String,
    },
    /// Exact optimum by subset dynamic programming.
    Exact {
        input: PathBuf,
        #[arg(long)]
        pmra: bool,
    },
    /// Batch experiment over sizes and repetitions, as CSV.
    Bench {
        /// Comma-separated |V| values, depot included.
        #[arg(long, value_delimiter = ',', default_value = "4,5,6,7")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SolverArg::Sa)]
        solver: SolverArg,
        /// Only the reduced variant.
        #[arg(long, conflicts_with = "no_pmra")]
        pmra: bool,
        /// Only the unreduced variant.
        #[arg(long)]
        no_pmra: bool,
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        sa: SaArgs,
        #[arg(long, default_value = "auto")]
        penalty: String,
        /// Leave out the time columns so repeated runs compare byte for byte.
        #[arg(long)]
        no_timing: bool,
        /// Directory for files written by the export solvers.
        #[arg(long)]
        export_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// QUBO variable counts with and without reduction.
    Gap {
        #[arg(long, value_delimiter = ',', default_value = "4,5,6,7,8,9,10,11,12")]
        sizes: Vec<usize>,
        /// Instances per size (seeds `seed..seed+reps`).
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    /// Probability of each non-backbone arc.
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, value_enum, default_value_t = CostArg::Random)]
    cost_mode: CostArg,
}

impl GenArgs {
    fn config(&self) -> GeneratorConfig {
        GeneratorConfig {
            density: self.density,
            cost_mode: match self.cost_mode {
                CostArg::Random => CostMode::RandomInteger,
                CostArg::Euclidean => CostMode::Euclidean,
            },
        }
    }
}

#[derive(Args)]
struct SaArgs {
    #[arg(long, default_value_t = 1000)]
    reads: usize,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    /// Seconds after which no new reads start.
    #[arg(long, default_value_t = 10.0)]
    time_limit: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Random,
    Euclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Sa,
    Exact,
    ExportLp,
    ExportQubo,
}

fn parse_penalty(s: &str) -> Result<Penalty> {
    match s {
        "auto" => return Ok(Penalty::Auto),
        "dominant" => return Ok(Penalty::Dominant),
        _ => {}
    }
    let p: f64 = s
        .parse()
        .with_context(|| format!("penalty '{s}' is not 'auto', 'dominant' or a number"))?;
    if p.is_nan() || p <= 0.0 {
        bail!("penalty must be positive");
    }
    Ok(Penalty::Fixed(p))
}

fn read_instance(path: &Path, pmra: bool) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = load_instance(&text).with_context(|| format!("parsing {}", path.display()))?;
    if pmra {
        let (reduced, report) = reduce(&inst)?;
        eprintln!("reduced {} -> {} arcs", report.arcs_before, report.arcs_after);
        Ok(reduced)
    } else {
        Ok(inst)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn time_limit(seconds: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(seconds).context("time limit must be a nonnegative number of seconds")
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate { size, seed, gen, out } => {
            if size < 3 {
                bail!("--size counts the depot and must be at least 3");
            }
            let inst = generate_instance(size - 1, seed, &gen.config())?;
            emit(out.as_deref(), &save_instance(&inst))?;
        }
        Command::Reduce { input, out } => {
            let inst = read_instance(&input, false)?;
            let (reduced, report) = reduce(&inst)?;
            match out {
                Some(p) => {
                    emit(Some(&p), &save_instance(&reduced))?;
                    print!("{report}");
                }
                None => print!("{}{report}", save_instance(&reduced)),
            }
        }
        Command::Build { input, pmra } => {
            let inst = read_instance(&input, pmra)?;
            let model = build_model(&inst)?;
            let count = |f: fn(&ConstraintTag) -> bool| model.constraints().iter().filter(|c| f(&c.tag)).count();
            println!("variables = {}", model.num_variables());
            println!("horizon = {}", model.horizon());
            println!("constraints = {}", model.constraints().len());
            println!("  eq2 = {}", count(|t| matches!(t, ConstraintTag::DepotStart)));
            println!("  eq3 = {}", count(|t| matches!(t, ConstraintTag::FirstPeriodIdle { .. })));
            println!("  eq4 = {}", count(|t| matches!(t, ConstraintTag::DepotBalance)));
            println!("  eq5 = {}", count(|t| matches!(t, ConstraintTag::Coverage { .. })));
            println!("  eq6 = {}", count(|t| matches!(t, ConstraintTag::Flow { .. })));
        }
        Command::ExportLp { input, pmra, out } => {
            let model = build_model(&read_instance(&input, pmra)?)?;
            emit(out.as_deref(), &export_lp(&model))?;
        }
        Command::ExportQubo { input, pmra, penalty, out } => {
            let model = build_model(&read_instance(&input, pmra)?)?;
            let qubo = to_qubo(&model, parse_penalty(&penalty)?)?;
            emit(out.as_deref(), &export_qubo(&qubo))?;
        }
        Command::SolveSa { input, pmra, sa, seed, beta_hot, beta_cold, threads, penalty } => {
            let inst = read_instance(&input, pmra)?;
            let model = build_model(&inst)?;
            let qubo = to_qubo(&model, parse_penalty(&penalty)?)?;
            let beta_range = match (beta_hot, beta_cold) {
                (Some(h), Some(c)) if 0.0 < h && h < c => Some((h, c)),
                (None, None) => None,
                _ => bail!("--beta-hot and --beta-cold go together with 0 < hot < cold"),
            };
            let params = AnnealParams {
                num_reads: sa.reads,
                sweeps: sa.sweeps,
                beta_range,
                seed,
                time_limit: Some(time_limit(sa.time_limit)?),
                threads,
                ..Default::default()
            };
            let samples = anneal(&qubo, &params);
            println!("variables = {}", qubo.num_variables());
            println!("reads = {}", samples.records.len());
            println!("truncated = {}", samples.truncated);
            println!("beta_range = {} {}", samples.beta_range.0, samples.beta_range.1);
            println!("elapsed = {:.3}", samples.elapsed.as_secs_f64());
            let Some(best) = samples.best() else {
                println!("status = no reads completed");
                return Ok(());
            };
            let report = decode_sample(&best.assignment, &qubo, &model, &inst)?;
            println!("energy = {}", best.energy);
            println!("penalty_part = {}", report.penalty_part.unwrap_or(f64::NAN));
            match report.outcome {
                DecodeOutcome::Feasible(route) => {
                    println!("status = feasible");
                    println!("cost = {}", route.cost);
                    println!("route = {}", route_text(&inst, &route.arcs));
                }
                DecodeOutcome::Infeasible(v) => {
                    println!("status = infeasible");
                    for x in v {
                        println!("violation = {x}");
                    }
                }
            }
        }
        Command::Exact { input, pmra } => {
            let inst = read_instance(&input, pmra)?;
            let (cost, route) = optimal_cost(&inst)?;
            println!("cost = {cost}");
            println!("route = {}", route_text(&inst, &route.arcs));
        }
        Command::Bench {
            sizes, reps, seed, solver, pmra, no_pmra, gen, sa, penalty, no_timing, export_dir, out,
        } => {
            let cfg = ExperimentConfig {
                sizes,
                repetitions: reps,
                seed_base: seed,
                with_pmra: !no_pmra,
                without_pmra: !pmra,
                solver: match solver {
                    SolverArg::Sa => Solver::Sa,
                    SolverArg::Exact => Solver::Exact,
                    SolverArg::ExportLp => Solver::ExportLp,
                    SolverArg::ExportQubo => Solver::ExportQubo,
                },
                time_limit: time_limit(sa.time_limit)?,
                generator: gen.config(),
                penalty: parse_penalty(&penalty)?,
                reads: sa.reads,
                sweeps: sa.sweeps,
                export_dir,
            };
            let rows = bench::run_experiment(&cfg)?;
            emit(out.as_deref(), &bench::emit_csv(&rows, !no_timing))?;
        }
        Command::Gap { sizes, reps, seed, gen, out } => {
            let seeds: Vec<u64> = (seed..seed + reps as u64).collect();
            let rows = bench::gap_table(&sizes, &seeds, &gen.config())?;
            let mut text = bench::emit_gap_csv(&rows);
            if let Some(mean) = bench::mean_gap(&rows) {
                text.push_str(&format!("# mean gap {mean:.1}%\n"));
            }
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn route_text(inst: &Instance, arcs: &[usize]) -> String {
    arcs.iter()
        .filter_map(|&id| inst.arc_by_id(id))
        .map(|a| format!("{}->{}", a.tail, a.head))
        .collect::<Vec<_>>()
        .join(" ")
}
