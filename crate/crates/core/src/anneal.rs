//! Simulated annealing over a [`Qubo`].
//!
//! Each read starts from a uniform random assignment and performs `sweeps`
//! Metropolis sweeps, one single-bit flip attempt per variable per sweep, with
//! the inverse temperature following a geometric progression from
//! `beta_hot` to `beta_cold`. Reads draw from their own RNG stream derived
//! from `(seed, read index)`, so the output does not depend on how reads are
//! scheduled across threads.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::qubo::Qubo;

#[derive(Clone, Debug, PartialEq)]
pub struct AnnealParams {
    pub num_reads: usize,
    pub sweeps: usize,
    /// `(beta_hot, beta_cold)`; derived from the QUBO when `None`.
    pub beta_range: Option<(f64, f64)>,
    pub seed: u64,
    /// Visit variables in a fresh random order each sweep instead of index order.
    pub randomize_order: bool,
    /// No new reads start once this much wall time has elapsed.
    pub time_limit: Option<Duration>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self {
            num_reads: 1000,
            sweeps: 1000,
            beta_range: None,
            seed: 0,
            randomize_order: false,
            time_limit: None,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub assignment: Vec<bool>,
    pub energy: f64,
    pub read: usize,
}

#[derive(Clone, Debug)]
pub struct SampleSet {
    /// Sorted by energy, ties by read index.
    pub records: Vec<SampleRecord>,
    pub params: AnnealParams,
    pub beta_range: (f64, f64),
    pub elapsed: Duration,
    /// Set when the time limit stopped reads from starting.
    pub truncated: bool,
}

impl SampleSet {
    pub fn best(&self) -> Option<&SampleRecord> {
        self.records.first()
    }
}

impl PartialEq for SampleSet {
    /// Wall time is not part of the result.
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
            && self.params == other.params
            && self.beta_range == other.beta_range
            && self.truncated == other.truncated
    }
}

pub const FALLBACK_BETA_RANGE: (f64, f64) = (0.1, 10.0);

/// Inverse temperature endpoints. The hot end accepts the largest possible
/// uphill flip, `max_i (|h_i| + Σ_j |q_ij|)`, with probability 1/2. The cold
/// end accepts an uphill step the size of the smallest nonzero coefficient
/// with probability 1/1000.
pub fn auto_beta_range(q: &Qubo) -> (f64, f64) {
    let mut delta: Vec<f64> = q.linear().iter().map(|h| h.abs()).collect();
    for (&(i, j), c) in q.quadratic() {
        delta[i] += c.abs();
        delta[j] += c.abs();
    }
    let max = delta.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return FALLBACK_BETA_RANGE;
    }
    let min = q
        .linear()
        .iter()
        .chain(q.quadratic().values())
        .map(|c| c.abs())
        .filter(|&c| c > 0.0)
        .fold(f64::INFINITY, f64::min);
    let hot = 2f64.ln() / max;
    let mut cold = 1000f64.ln() / min.max(1e-9);
    if cold <= hot {
        cold = hot * 1000f64.ln() / 2f64.ln();
    }
    (hot, cold)
}

pub fn geometric_schedule(hot: f64, cold: f64, sweeps: usize) -> Vec<f64> {
    match sweeps {
        0 => Vec::new(),
        1 => vec![cold],
        n => {
            let ratio = (cold / hot).ln() / (n - 1) as f64;
            (0..n).map(|k| hot * (ratio * k as f64).exp()).collect()
        }
    }
}

/// Sparse symmetric view of the quadratic part.
struct Couplings {
    start: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl Couplings {
    fn new(q: &Qubo) -> Self {
        let n = q.num_variables();
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(i, j), &c) in q.quadratic() {
            lists[i].push((j, c));
            lists[j].push((i, c));
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut entries = Vec::new();
        for l in lists {
            start.push(entries.len());
            entries.extend(l);
        }
        start.push(entries.len());
        Self { start, entries }
    }

    fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[self.start[i]..self.start[i + 1]]
    }
}

fn read_rng(seed: u64, read: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(read as u64);
    rng
}

/// One annealing run. Returns the final state and its incrementally
/// tracked energy.
fn anneal_read(
    q: &Qubo,
    couplings: &Couplings,
    schedule: &[f64],
    randomize_order: bool,
    rng: &mut ChaCha8Rng,
) -> (Vec<bool>, f64) {
    let n = q.num_variables();
    let mut state: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    // field[i] = h_i + Σ_j q_ij x_j, so flipping i changes the energy by
    // (1 - 2 x_i) field[i]
    let mut field = q.linear().to_vec();
    for i in (0..n).filter(|&i| state[i]) {
        for &(j, c) in couplings.row(i) {
            field[j] += c;
        }
    }
    let mut energy = q.offset();
    for i in (0..n).filter(|&i| state[i]) {
        energy += q.linear()[i];
        energy += couplings.row(i).iter().filter(|(j, _)| *j > i && state[*j]).map(|(_, c)| c).sum::<f64>();
    }

    let mut order: Vec<usize> = (0..n).collect();
    for &beta in schedule {
        if randomize_order {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
        }
        for &i in &order {
            let delta = if state[i] { -field[i] } else { field[i] };
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                let step = if state[i] { -1.0 } else { 1.0 };
                state[i] = !state[i];
                energy += delta;
                for &(j, c) in couplings.row(i) {
                    field[j] += step * c;
                }
            }
        }
    }
    (state, energy)
}

pub fn anneal(q: &Qubo, params: &AnnealParams) -> SampleSet {
    match params.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(|| anneal_in_pool(q, params)),
        None => anneal_in_pool(q, params),
    }
}

fn anneal_in_pool(q: &Qubo, params: &AnnealParams) -> SampleSet {
    let started = Instant::now();
    let (hot, cold) = params.beta_range.unwrap_or_else(|| auto_beta_range(q));
    let schedule = geometric_schedule(hot, cold, params.sweeps);
    let couplings = Couplings::new(q);

    let results: Vec<Option<SampleRecord>> = (0..params.num_reads)
        .into_par_iter()
        .map(|read| {
            if params.time_limit.is_some_and(|limit| started.elapsed() >= limit) {
                return None;
            }
            let mut rng = read_rng(params.seed, read);
            let (assignment, _) = anneal_read(q, &couplings, &schedule, params.randomize_order, &mut rng);
            let energy = q.energy(&assignment).expect("assignment sized to qubo");
            Some(SampleRecord { assignment, energy, read })
        })
        .collect();
    let truncated = results.iter().any(Option::is_none);
    let mut records: Vec<SampleRecord> = results.into_iter().flatten().collect();
    records.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.read.cmp(&b.read)));
    SampleSet {
        records,
        params: params.clone(),
        beta_range: (hot, cold),
        elapsed: started.elapsed(),
        truncated,
    }
}
