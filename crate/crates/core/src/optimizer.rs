//! Hybrid minimization of the clustering cost: random restarts, a Metropolis
//! Monte-Carlo exploration phase, then finite-difference steepest descent
//! with backtracking. The cost is piecewise-smooth (assignments switch
//! discretely); backtracking is what carries the descent across switches.
//!
//! Restarts are independent: each derives its RNG from (seed, restart index),
//! so results are identical whether restarts run serially or in parallel.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitParams;
use crate::clustering::{evaluate_success, ClusterProblem, CostReport};
use crate::error::{Error, Result};
use crate::hardware::PlateDevice;
use crate::polarization::wrap_angle;

/// Optimizer knobs. `mc_temperature: None` scales the Metropolis acceptance
/// adaptively to a tenth of each restart's initial cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub n_restarts: usize,
    /// Monte-Carlo proposals per restart.
    pub mc_samples: usize,
    /// Proposal std-dev per angle, radians.
    pub mc_step: f64,
    pub mc_temperature: Option<f64>,
    /// Descent step, radians per unit gradient.
    pub lr: f64,
    /// Central-difference step, radians.
    pub fd_eps: f64,
    /// Descent iteration cap per restart.
    pub max_iters: usize,
    /// Relative cost-change threshold counting toward convergence.
    pub rel_tol: f64,
    /// Consecutive below-threshold iterations required to stop.
    pub patience: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_restarts: 10,
            mc_samples: 50,
            mc_step: 0.15,
            mc_temperature: None,
            lr: 0.05,
            fd_eps: 1e-4,
            max_iters: 30,
            rel_tol: 1e-4,
            patience: 3,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 {
            return Err(Error::invalid("n_restarts must be positive"));
        }
        if !(self.mc_step > 0.0) {
            return Err(Error::invalid("mc_step must be positive"));
        }
        if let Some(t) = self.mc_temperature {
            if !(t > 0.0) {
                return Err(Error::invalid("mc_temperature must be positive"));
            }
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("lr must be positive"));
        }
        if !(self.fd_eps > 0.0 && self.fd_eps <= 0.1) {
            return Err(Error::invalid("fd_eps must lie in (0, 0.1]"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid("rel_tol must lie in (0, 1)"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        Ok(())
    }
}

/// Which stage of a restart produced a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Mc,
    Descent,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Mc => "mc",
            Phase::Descent => "descent",
        })
    }
}

/// One evaluated point along a restart: the phase-local iteration index, the
/// cost, and the parameters at that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub phase: Phase,
    pub cost: f64,
    pub params: CircuitParams,
}

/// Chronological record of one restart (Monte-Carlo phase, then descent).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    /// Running minimum of the recorded costs; non-increasing by construction.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                best = best.min(r.cost);
                best
            })
            .collect()
    }

    /// Records belonging to one phase, in order.
    pub fn phase_records(&self, phase: Phase) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.phase == phase)
    }
}

/// Aggregate outcome of all restarts.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// Parameters of the lowest-cost point visited by any restart.
    pub best_params: CircuitParams,
    /// Cost recorded at that point (for a noisy backend: as measured then).
    pub best_cost: f64,
    /// Index of the restart that found it.
    pub best_restart: usize,
    /// Fresh evaluation at `best_params` (assignment, centroids, fidelities).
    pub report: CostReport,
    /// Best-over-permutations label agreement, when ground truth is known.
    pub success_ratio: Option<f64>,
    /// Full per-restart traces.
    pub traces: Vec<Trace>,
}

/// Uniform angles on [0, π), reproducible from the RNG state.
pub fn random_init(layers: usize, rng: &mut impl Rng) -> Result<CircuitParams> {
    if layers == 0 {
        return Err(Error::invalid("random_init requires at least one layer"));
    }
    let flat: Vec<f64> = (0..2 * layers)
        .map(|_| rng.random_range(0.0..std::f64::consts::PI))
        .collect();
    CircuitParams::from_flat(&flat)
}

/// Central-difference gradient of the cost, cost units per radian.
pub fn fd_gradient<F>(cost_fn: &mut F, params: &CircuitParams, fd_eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&CircuitParams) -> Result<f64>,
{
    if !(fd_eps > 0.0 && fd_eps <= 0.1) {
        return Err(Error::invalid("fd_eps must lie in (0, 0.1]"));
    }
    let flat = params.to_flat();
    let mut grad = Vec::with_capacity(flat.len());
    for j in 0..flat.len() {
        let mut plus = flat.clone();
        plus[j] += fd_eps;
        let mut minus = flat.clone();
        minus[j] -= fd_eps;
        let up = cost_fn(&CircuitParams::from_flat(&plus)?)?;
        let down = cost_fn(&CircuitParams::from_flat(&minus)?)?;
        grad.push((up - down) / (2.0 * fd_eps));
    }
    Ok(grad)
}

/// Result of the Monte-Carlo exploration phase.
#[derive(Debug, Clone)]
pub struct McOutcome {
    /// Lowest-cost visited point (start included).
    pub best: CircuitParams,
    pub best_cost: f64,
    /// Chain state after each proposal; record 0 is the start.
    pub records: Vec<TraceRecord>,
}

/// Metropolis random walk: Gaussian proposals wrapped into [0, π) per angle,
/// acceptance exp(−Δcost/T). Returns the lowest-cost visited point.
pub fn monte_carlo_phase<F>(
    cost_fn: &mut F,
    start: CircuitParams,
    cfg: &OptimizerConfig,
    rng: &mut impl Rng,
) -> Result<McOutcome>
where
    F: FnMut(&CircuitParams) -> Result<f64>,
{
    let start_cost = cost_fn(&start)?;
    let temperature = cfg.mc_temperature.unwrap_or(start_cost / 10.0);
    let proposal = Normal::new(0.0, cfg.mc_step).map_err(|e| Error::invalid(e.to_string()))?;

    let mut current = start.clone();
    let mut current_cost = start_cost;
    let mut best = start;
    let mut best_cost = start_cost;
    let mut records = vec![TraceRecord {
        iter: 0,
        phase: Phase::Mc,
        cost: current_cost,
        params: current.clone(),
    }];

    for sample in 1..=cfg.mc_samples {
        let flat: Vec<f64> = current
            .to_flat()
            .iter()
            .map(|&theta| wrap_angle(theta + proposal.sample(rng)))
            .collect();
        let candidate = CircuitParams::from_flat(&flat)?;
        let candidate_cost = cost_fn(&candidate)?;
        if candidate_cost < best_cost {
            best = candidate.clone();
            best_cost = candidate_cost;
        }
        let delta = candidate_cost - current_cost;
        let accept = delta <= 0.0
            || (temperature > 0.0 && rng.random_range(0.0..1.0) < (-delta / temperature).exp());
        if accept {
            current = candidate;
            current_cost = candidate_cost;
        }
        records.push(TraceRecord {
            iter: sample,
            phase: Phase::Mc,
            cost: current_cost,
            params: current.clone(),
        });
    }

    Ok(McOutcome {
        best,
        best_cost,
        records,
    })
}

/// Result of the descent phase.
#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub params: CircuitParams,
    pub cost: f64,
    /// Accepted point per iteration; record 0 is the start.
    pub records: Vec<TraceRecord>,
}

/// Gradient descent with per-iteration backtracking: a step that increases
/// the cost halves the learning rate, up to 8 halvings, before the iteration
/// is abandoned. Stops at `max_iters` or after `patience` consecutive
/// iterations with relative cost change below `rel_tol`.
pub fn steepest_descent<F>(
    cost_fn: &mut F,
    start: CircuitParams,
    cfg: &OptimizerConfig,
) -> Result<DescentOutcome>
where
    F: FnMut(&CircuitParams) -> Result<f64>,
{
    const MAX_HALVINGS: usize = 8;

    let mut current = start;
    let mut current_cost = cost_fn(&current)?;
    let mut records = vec![TraceRecord {
        iter: 0,
        phase: Phase::Descent,
        cost: current_cost,
        params: current.clone(),
    }];

    let mut stall = 0;
    for iter in 1..=cfg.max_iters {
        let grad = fd_gradient(cost_fn, &current, cfg.fd_eps)?;
        let flat = current.to_flat();

        let mut lr = cfg.lr;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial_flat: Vec<f64> = flat
                .iter()
                .zip(&grad)
                .map(|(&theta, &g)| wrap_angle(theta - lr * g))
                .collect();
            let trial = CircuitParams::from_flat(&trial_flat)?;
            let trial_cost = cost_fn(&trial)?;
            if trial_cost <= current_cost {
                accepted = Some((trial, trial_cost));
                break;
            }
            lr *= 0.5;
        }

        let previous = current_cost;
        if let Some((params, cost)) = accepted {
            current = params;
            current_cost = cost;
        }
        records.push(TraceRecord {
            iter,
            phase: Phase::Descent,
            cost: current_cost,
            params: current.clone(),
        });

        let rel = (previous - current_cost).abs() / previous.abs().max(f64::MIN_POSITIVE);
        if rel < cfg.rel_tol {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        } else {
            stall = 0;
        }
    }

    Ok(DescentOutcome {
        params: current,
        cost: current_cost,
        records,
    })
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64 + 1);
    rng
}

/// One full restart: random init → Monte-Carlo phase → steepest descent.
fn run_restart<F>(
    cost_fn: &mut F,
    restart: usize,
    layers: usize,
    cfg: &OptimizerConfig,
) -> Result<Trace>
where
    F: FnMut(&CircuitParams) -> Result<f64>,
{
    let mut rng = restart_rng(cfg.seed, restart);
    let init = random_init(layers, &mut rng)?;
    let mc = monte_carlo_phase(cost_fn, init, cfg, &mut rng)?;
    let descent = steepest_descent(cost_fn, mc.best, cfg)?;
    let mut records = mc.records;
    records.extend(descent.records);
    Ok(Trace { records })
}

fn assemble<F>(
    problem: &ClusterProblem,
    traces: Vec<Trace>,
    mut evaluate: F,
) -> Result<RunResult>
where
    F: FnMut(&CircuitParams) -> Result<CostReport>,
{
    let mut best: Option<(usize, &TraceRecord)> = None;
    for (restart, trace) in traces.iter().enumerate() {
        for record in &trace.records {
            if best.map_or(true, |(_, b)| record.cost < b.cost) {
                best = Some((restart, record));
            }
        }
    }
    let (best_restart, best_record) =
        best.ok_or_else(|| Error::invalid("no trace records produced"))?;
    let best_params = best_record.params.clone();
    let best_cost = best_record.cost;
    let report = evaluate(&best_params)?;
    let success_ratio = match problem.dataset().truth_labels() {
        Some(_) => Some(evaluate_success(&report.assignment, problem.dataset())?),
        None => None,
    };
    Ok(RunResult {
        best_params,
        best_cost,
        best_restart,
        report,
        success_ratio,
        traces,
    })
}

/// Full optimization against the ideal (pure, concurrency-safe) cost;
/// restarts run in parallel and the outcome is schedule-independent.
pub fn optimize(problem: &ClusterProblem, cfg: &OptimizerConfig) -> Result<RunResult> {
    cfg.validate()?;
    if problem.layers() == 0 {
        return Err(Error::invalid("optimization requires at least one layer"));
    }
    let traces: Result<Vec<Trace>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|restart| {
            let mut cost_fn = |p: &CircuitParams| Ok(problem.cost(p).value);
            run_restart(&mut cost_fn, restart, problem.layers(), cfg)
        })
        .collect();
    assemble(problem, traces?, |p| Ok(problem.cost(p)))
}

/// Full optimization driving a plate device. The device owns mutable state
/// (stage positions, noise stream), so restarts run sequentially; the result
/// is still deterministic for a given device seed.
pub fn optimize_on_device(
    problem: &ClusterProblem,
    device: &mut dyn PlateDevice,
    cfg: &OptimizerConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    if problem.layers() == 0 {
        return Err(Error::invalid("optimization requires at least one layer"));
    }
    let mut traces = Vec::with_capacity(cfg.n_restarts);
    for restart in 0..cfg.n_restarts {
        let mut cost_fn =
            |p: &CircuitParams| Ok(problem.cost_on_device(p, device)?.value);
        traces.push(run_restart(&mut cost_fn, restart, problem.layers(), cfg)?);
    }
    assemble(problem, traces, |p| problem.cost_on_device(p, device))
}

/// CSV export: `restart,iter,phase,cost,theta_0,...,theta_{2m-1}`, radians
/// at 12 significant digits.
pub fn traces_to_csv(traces: &[Trace]) -> String {
    let width = traces
        .iter()
        .flat_map(|t| t.records.first())
        .map(|r| r.params.len())
        .max()
        .unwrap_or(0);
    let mut out = String::from("restart,iter,phase,cost");
    for j in 0..width {
        let _ = write!(out, ",theta_{j}");
    }
    out.push('\n');
    for (restart, trace) in traces.iter().enumerate() {
        for r in &trace.records {
            let _ = write!(out, "{restart},{},{},{:.11e}", r.iter, r.phase, r.cost);
            for theta in r.params.to_flat() {
                let _ = write!(out, ",{theta:.11e}");
            }
            out.push('\n');
        }
    }
    out
}
