//! Monte Carlo simulation of the discrete-time walk and the variable-speed
//! continuous-time walk.
//!
//! Steps are sampled from the word rule (`ConductanceParams::local_edges`),
//! so the walk moves on the infinite graph and never needs a materialized
//! ball; a configurable maximum level only guards against runaway
//! configurations. Holding times are exponential with rate
//! `alpha(x) = pi(x)/m(x)`, drawn by inverse CDF from a ChaCha8 stream so
//! that every trace is reproducible from `(seed, trace index)` alone and
//! results do not depend on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::address::{Word, POW3};
use crate::conductance::ConductanceParams;
use crate::error::{Error, Result};

/// Convergence and budget knobs for a single trace.
#[derive(Clone, Copy, Debug)]
pub struct WalkOptions {
    /// Exit cells are reported at this level.
    pub stop_level: usize,
    /// The walk converged once it spent this many consecutive steps inside
    /// one stop-level subtree at the depth margin or below.
    pub confluence_steps: usize,
    /// Depth margin below the stop level required during confluence.
    pub depth_margin: usize,
    pub step_budget: usize,
    /// Hard depth guard; hitting it is an error, not a truncation.
    pub max_level: usize,
}

impl WalkOptions {
    pub fn new(stop_level: usize) -> WalkOptions {
        WalkOptions {
            stop_level,
            confluence_steps: 50,
            depth_margin: 4,
            step_budget: 1_000_000,
            max_level: (stop_level + 4 + 50 + 16).min(crate::address::MAX_WORD_LEN - 1),
        }
    }
}

/// One sampled trajectory.
#[derive(Clone, Debug)]
pub struct WalkTrace {
    pub nodes: Vec<Word>,
    /// Empty for the discrete-time walk.
    pub holding_times: Vec<f64>,
    /// Accumulated lifetime up to the convergence criterion; `None` for the
    /// discrete-time walk.
    pub lifetime: Option<f64>,
    /// Estimated expected lifetime beyond the truncation point.
    pub lifetime_tail_estimate: f64,
    pub exit_cell: Word,
    pub rng_stream: u64,
}

/// Compact per-trace record used by batch runs.
#[derive(Clone, Copy, Debug)]
pub struct TraceSummary {
    pub exit_cell: Word,
    pub steps: u32,
    pub lifetime: f64,
    pub lifetime_tail_estimate: f64,
    pub returned_to_start: bool,
    pub visited_root: bool,
    pub max_level: u16,
}

/// RNG stream for one trace: one ChaCha8 key per seed, one counter stream
/// per trace index.
pub fn trace_rng(seed: u64, trace_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trace_index);
    rng
}

/// Exponential holding time by inverse CDF: `-ln(1 - U) / rate`.
fn sample_exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    (-(1.0 - u).ln() / rate).max(f64::MIN_POSITIVE)
}

/// One step of the walk: a neighbor sampled with probability
/// `c(x,y) / pi(x)`.
pub fn step_walk<R: Rng>(params: &ConductanceParams, x: &Word, rng: &mut R) -> Word {
    let edges = params.local_edges(x);
    let total: f64 = edges.iter().map(|(_, c)| c).sum();
    let mut t = rng.gen::<f64>() * total;
    for (nb, c) in &edges {
        t -= c;
        if t <= 0.0 {
            return *nb;
        }
    }
    edges.last().unwrap().0
}

/// Closed-form envelope for the expected remaining lifetime of a walk
/// currently at depth `d`.
///
/// The mean holding time at depth k is m/pi <= gamma^k / (3 + 3 lambda), a
/// level is revisited at most 1/(1 - lambda) times in expectation, and the
/// walk returns above its current depth to level k < d with probability at
/// most lambda^{d-k}. Summing both directions:
/// `[lambda^d / (1 - gamma/lambda) + gamma^{d+1} / (1 - gamma)]
///  / ((3 + 3 lambda)(1 - lambda))`.
/// Shallow revisits dominate, so the envelope decays like lambda^d.
pub fn lifetime_tail_estimate(params: &ConductanceParams, depth: usize) -> f64 {
    let (lambda, gamma) = (params.lambda, params.gamma);
    (lambda.powi(depth as i32) / (1.0 - gamma / lambda)
        + gamma.powi(depth as i32 + 1) / (1.0 - gamma))
        / ((3.0 + 3.0 * lambda) * (1.0 - lambda))
}

struct Confluence {
    stop_level: usize,
    min_level: usize,
    needed: usize,
    candidate: Option<Word>,
    count: usize,
}

impl Confluence {
    fn new(opts: &WalkOptions) -> Confluence {
        Confluence {
            stop_level: opts.stop_level,
            min_level: opts.stop_level + opts.depth_margin,
            needed: opts.confluence_steps,
            candidate: None,
            count: 0,
        }
    }

    fn observe(&mut self, x: &Word) -> Option<Word> {
        if x.len() < self.min_level {
            self.candidate = None;
            self.count = 0;
            return None;
        }
        let cell = x.ancestor(self.stop_level);
        if self.candidate == Some(cell) {
            self.count += 1;
        } else {
            self.candidate = Some(cell);
            self.count = 1;
        }
        (self.count >= self.needed).then_some(cell)
    }
}

fn run_single<R: Rng>(
    params: &ConductanceParams,
    start: &Word,
    opts: &WalkOptions,
    rng: &mut R,
    ctrw: bool,
    record_nodes: bool,
) -> Result<(Option<WalkTrace>, TraceSummary)> {
    if start.len() > opts.max_level {
        return Err(Error::TruncationBoundary { level: start.len() });
    }
    let mut x = *start;
    let mut nodes = if record_nodes { vec![x] } else { Vec::new() };
    let mut holding = Vec::new();
    let mut lifetime = 0.0f64;
    let mut confluence = Confluence::new(opts);
    let mut returned = false;
    let mut visited_root = start.is_root();
    let mut max_level = start.len() as u16;
    let mut steps = 0u32;
    let exit_cell = loop {
        if steps as usize >= opts.step_budget {
            return Err(Error::StepBudgetExhausted { budget: opts.step_budget });
        }
        if ctrw {
            let rate = params.pi_local(&x) / params.measure_m(&x);
            let t = sample_exponential(rng, rate);
            lifetime += t;
            if record_nodes {
                holding.push(t);
            }
        }
        x = step_walk(params, &x, rng);
        steps += 1;
        if record_nodes {
            nodes.push(x);
        }
        if x == *start {
            returned = true;
        }
        if x.is_root() {
            visited_root = true;
        }
        max_level = max_level.max(x.len() as u16);
        if x.len() > opts.max_level {
            return Err(Error::TruncationBoundary { level: x.len() });
        }
        if let Some(cell) = confluence.observe(&x) {
            break cell;
        }
    };
    let tail = if ctrw { lifetime_tail_estimate(params, x.len()) } else { 0.0 };
    let summary = TraceSummary {
        exit_cell,
        steps,
        lifetime: if ctrw { lifetime } else { 0.0 },
        lifetime_tail_estimate: tail,
        returned_to_start: returned,
        visited_root,
        max_level,
    };
    let trace = record_nodes.then(|| WalkTrace {
        nodes,
        holding_times: holding,
        lifetime: ctrw.then_some(lifetime),
        lifetime_tail_estimate: tail,
        exit_cell,
        rng_stream: 0,
    });
    Ok((trace, summary))
}

/// Discrete-time walk until the confluence criterion assigns an exit cell.
pub fn run_discrete<R: Rng>(
    params: &ConductanceParams,
    start: &Word,
    opts: &WalkOptions,
    rng: &mut R,
) -> Result<WalkTrace> {
    run_single(params, start, opts, rng, false, true).map(|(t, _)| t.unwrap())
}

/// Variable-speed continuous-time walk: the discrete skeleton plus
/// exponential holding times and the accumulated lifetime.
pub fn run_ctrw<R: Rng>(
    params: &ConductanceParams,
    start: &Word,
    opts: &WalkOptions,
    rng: &mut R,
) -> Result<WalkTrace> {
    run_single(params, start, opts, rng, true, true).map(|(t, _)| t.unwrap())
}

/// Batch statistics over independent traces.
pub struct BatchResult {
    pub summaries: Vec<TraceSummary>,
    pub hitting: EmpiricalHitting,
}

/// Run `samples` independent traces with per-trace RNG streams. Traces are
/// collected in index order, so the result is identical for any worker
/// count.
pub fn run_batch(
    params: &ConductanceParams,
    start: &Word,
    opts: &WalkOptions,
    seed: u64,
    samples: usize,
    ctrw: bool,
) -> Result<BatchResult> {
    if samples == 0 {
        return Err(Error::InvalidParams("sample count must be positive".into()));
    }
    let summaries: Result<Vec<TraceSummary>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trace_rng(seed, i);
            run_single(params, start, opts, &mut rng, ctrw, false).map(|(_, s)| s)
        })
        .collect();
    let summaries = summaries?;
    let hitting = EmpiricalHitting::from_summaries(opts.stop_level, &summaries);
    Ok(BatchResult { summaries, hitting })
}

impl BatchResult {
    pub fn mean_lifetime(&self) -> f64 {
        self.summaries.iter().map(|s| s.lifetime).sum::<f64>() / self.summaries.len() as f64
    }

    pub fn lifetime_std(&self) -> f64 {
        let mean = self.mean_lifetime();
        let var = self.summaries.iter().map(|s| (s.lifetime - mean).powi(2)).sum::<f64>()
            / (self.summaries.len() - 1) as f64;
        var.sqrt()
    }

    pub fn return_fraction(&self) -> f64 {
        self.summaries.iter().filter(|s| s.returned_to_start).count() as f64
            / self.summaries.len() as f64
    }

    pub fn root_hit_fraction(&self) -> f64 {
        self.summaries.iter().filter(|s| s.visited_root).count() as f64
            / self.summaries.len() as f64
    }

    pub fn all_lifetimes_finite(&self) -> bool {
        self.summaries.iter().all(|s| s.lifetime.is_finite())
    }

    pub fn mean_steps(&self) -> f64 {
        self.summaries.iter().map(|s| s.steps as f64).sum::<f64>() / self.summaries.len() as f64
    }
}

/// Empirical exit-cell counts at a fixed level.
pub struct EmpiricalHitting {
    pub level: usize,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl EmpiricalHitting {
    pub fn from_summaries(level: usize, summaries: &[TraceSummary]) -> EmpiricalHitting {
        let mut counts = vec![0u64; POW3[level] as usize];
        for s in summaries {
            debug_assert_eq!(s.exit_cell.len(), level);
            counts[s.exit_cell.code() as usize] += 1;
        }
        EmpiricalHitting { level, counts, total: summaries.len() as u64 }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// Largest deviation from the uniform distribution over level cells.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let uniform = 1.0 / self.counts.len() as f64;
        self.frequencies().iter().map(|f| (f - uniform).abs()).fold(0.0, f64::max)
    }
}

/// Record levels of one trace: each time the walk reaches a new maximum
/// level, the step index and elapsed time are recorded.
pub struct EscapeRecord {
    pub level: u16,
    pub step: u32,
    pub elapsed: f64,
}

pub struct EscapeProfile {
    pub per_trace: Vec<Vec<EscapeRecord>>,
    pub downward_step_fraction: f64,
}

/// Summarize how traces escape to depth. Requires traces with recorded
/// nodes; checks that every trace reaches its final record level in finite
/// elapsed time.
pub fn escape_profile(traces: &[WalkTrace]) -> Result<EscapeProfile> {
    if traces.is_empty() {
        return Err(Error::Precondition("escape profile needs at least one trace".into()));
    }
    let mut per_trace = Vec::with_capacity(traces.len());
    let mut down = 0u64;
    let mut total = 0u64;
    for trace in traces {
        let mut records = Vec::new();
        let mut best = 0u16;
        let mut elapsed = 0.0f64;
        for (i, node) in trace.nodes.iter().enumerate() {
            if i > 0 {
                total += 1;
                if node.len() > trace.nodes[i - 1].len() {
                    down += 1;
                }
                if let Some(t) = trace.holding_times.get(i - 1) {
                    elapsed += t;
                }
            }
            let level = node.len() as u16;
            if level > best || i == 0 {
                best = level;
                records.push(EscapeRecord { level, step: i as u32, elapsed });
            }
        }
        if !elapsed.is_finite() {
            return Err(Error::Precondition("trace has non-finite elapsed time".into()));
        }
        per_trace.push(records);
    }
    Ok(EscapeProfile { per_trace, downward_step_fraction: down as f64 / total as f64 })
}
