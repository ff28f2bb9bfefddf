//! Paired Monte-Carlo trials and their aggregation.
//!
//! Trial `t` of every sweep value uses seed `base.seed ^ t`: the channel
//! draws come from stream 0 of that seed and the random phase draws from
//! stream 1. Every scheme sees the same channels, and the optimized solver
//! starts from the first phase vector the random baseline draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ao::{self, SolveResult};
use crate::baselines::{self, BaselineKind};
use crate::channel::{generate_channels, ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::manifold::BeamVector;

use super::config::{SweepSpec, SweepVariable};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub scheme: BaselineKind,
    /// Mean sum rate over feasible trials, bits/s/Hz; NaN when none were.
    pub mean_sum_rate: f64,
    pub stderr: f64,
    pub feasible_frac: f64,
    pub n_trials: usize,
}

/// Sum rate of every scheme in one trial, `None` when infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub value_index: usize,
    pub trial: usize,
    /// Indexed like `SweepSpec::schemes`.
    pub sum_rates: Vec<Option<f64>>,
}

pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base ^ trial as u64
}

fn phase_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs one scheme on one channel realization.
pub fn run_scheme(
    scheme: BaselineKind,
    ch: &ChannelSet,
    cfg: &ScenarioConfig,
    spec: &SweepSpec,
    seed: u64,
) -> Result<SolveResult> {
    match scheme {
        BaselineKind::Proposed => {
            let v0 = BeamVector::random(ch.q_ris() + 1, &mut phase_rng(seed));
            ao::solve(ch, cfg, &v0, &spec.solver)
        }
        BaselineKind::RandomRis => baselines::random_ris(ch, cfg, &mut phase_rng(seed), spec.random_ris_draws),
        BaselineKind::NomabcNoRis => baselines::nomabc_no_ris(ch, cfg, &spec.solver),
        BaselineKind::OmabcNoRis => baselines::omabc_no_ris(ch, cfg),
    }
}

fn run_trial(spec: &SweepSpec, value_index: usize, trial: usize) -> Result<TrialRecord> {
    let cfg = spec.scenario_for(spec.values[value_index])?;
    let seed = trial_seed(cfg.seed, trial);
    let ch = generate_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let sum_rates = spec
        .schemes
        .iter()
        .map(|s| run_scheme(*s, &ch, &cfg, spec, seed).map(|r| r.is_feasible().then_some(r.sum_rate_bits)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialRecord { value_index, trial, sum_rates })
}

/// Every (value, trial) pair, in value-major order, on `parallel` worker
/// threads. The output does not depend on `parallel`.
pub fn run_trials(spec: &SweepSpec, parallel: usize) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.values.len()).flat_map(|v| (0..spec.n_trials).map(move |t| (v, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|&(v, t)| run_trial(spec, v, t)).collect())
}

/// One row per (value, scheme), in sweep order.
pub fn aggregate(spec: &SweepSpec, trials: &[TrialRecord]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(spec.values.len() * spec.schemes.len());
    for (vi, value) in spec.values.iter().enumerate() {
        for (si, scheme) in spec.schemes.iter().enumerate() {
            let rates: Vec<f64> =
                trials.iter().filter(|t| t.value_index == vi).filter_map(|t| t.sum_rates[si]).collect();
            let n = trials.iter().filter(|t| t.value_index == vi).count();
            let (mean, stderr) = mean_stderr(&rates);
            rows.push(SweepRow {
                variable: spec.variable,
                value: *value,
                scheme: *scheme,
                mean_sum_rate: mean,
                stderr,
                feasible_frac: if n == 0 { 0.0 } else { rates.len() as f64 / n as f64 },
                n_trials: n,
            });
        }
    }
    rows
}

/// Sample mean and standard error of the mean; NaN for an empty sample and
/// zero error for a single value.
pub fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn run_sweep(spec: &SweepSpec, parallel: usize) -> Result<Vec<SweepRow>> {
    let trials = run_trials(spec, parallel)?;
    Ok(aggregate(spec, &trials))
}
