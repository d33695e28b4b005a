//! Steiner traveling salesman toolkit.
//!
//! The pipeline runs from a random [`graph::Instance`] through optional arc
//! reduction ([`pmra`]), the time-indexed binary model ([`model`]), penalty
//! conversion to a QUBO ([`qubo`]) and simulated annealing ([`anneal`]), to
//! decoded routes ([`decoder`]). [`oracle`] certifies optima on small
//! instances and [`bench`] aggregates batches of runs into CSV tables.

pub mod anneal;
pub mod bench;
pub mod decoder;
pub mod fixtures;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod pmra;
pub mod qubo;

pub use anneal::{anneal, auto_beta_range, AnnealParams, SampleSet};
pub use decoder::{decode, validate_route, DecodeReport};
pub use graph::{build_adjacency, generate_instance, load_instance, save_instance, Instance};
pub use model::{build_model, evaluate_assignment, export_lp, ConstrainedModel};
pub use oracle::{enumerate_walk_optimum, metric_closure, optimal_cost, Route};
pub use pmra::{compute_threshold, reduce, PmraReport};
pub use qubo::{energy, export_qubo, parse_qubo, to_qubo, Penalty, Qubo};
