//! Alternating optimization of the BD reflection coefficients `w` and the
//! RIS phase vector `v` for a fixed decoding order, and the search over
//! decoding orders.
//!
//! Each outer iteration
//!
//! 1. sets `w` to the closed-form optimum for the gains `H_k = |b_kᴴ v|²`,
//! 2. runs SCA on the penalized auxiliary problem in `a_k ≈ b_kᴴ v`,
//! 3. pulls `v` toward the SCA solution by manifold descent,
//! 4. raises the penalty weight `μ` while the auxiliary variables and the
//!    realized channels disagree by more than `ε_pen`.
//!
//! A new `v` is kept only if the gains stay ordered, the closed-form `w` stays
//! feasible and the sum rate does not drop; otherwise `μ` is raised and the
//! step is retried from the previous `v`.
//!
//! Internally every channel vector is scaled by `sqrt(P_T / σ²)`, so gains
//! are SNRs and the noise term is 1.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{combined_gain_theta, ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::manifold::{descend, BeamVector, DescendSettings, QuadraticObjective};
use crate::power_alloc::{self, optimal_w, PowerAllocation, QosTargets, ORDER_EPS};
use crate::sca::{PenaltyConfig, ScaProblem, ScaSettings};

/// Rate shortfall tolerated by [`rate_report`], in bits/s/Hz.
pub const RATE_AUDIT_TOL: f64 = 1e-6;

/// A decoding order. `sequence()[i]` is the BD decoded in position `i`
/// (position 0 is decoded first and sees the most interference).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecodingOrder {
    sequence: Vec<usize>,
}

impl DecodingOrder {
    /// Order from the list of BDs in decoding sequence.
    pub fn from_sequence(sequence: Vec<usize>) -> Result<Self> {
        let k = sequence.len();
        let mut seen = vec![false; k];
        for &bd in &sequence {
            if bd >= k || seen[bd] {
                return Err(Error::Domain(format!("{sequence:?} is not a permutation of 0..{k}")));
            }
            seen[bd] = true;
        }
        Ok(Self { sequence })
    }

    /// Order from decoding positions: `positions[k]` is where BD `k` is
    /// decoded.
    pub fn from_positions(positions: &[usize]) -> Result<Self> {
        let k = positions.len();
        let mut sequence = vec![usize::MAX; k];
        for (bd, &pos) in positions.iter().enumerate() {
            if pos >= k || sequence[pos] != usize::MAX {
                return Err(Error::Domain(format!("{positions:?} is not a permutation of 0..{k}")));
            }
            sequence[pos] = bd;
        }
        Ok(Self { sequence })
    }

    pub fn identity(k: usize) -> Self {
        Self { sequence: (0..k).collect() }
    }

    /// Decodes BDs in decreasing order of `gains`, ties broken by index.
    pub fn by_decreasing_gain(gains: &[f64]) -> Self {
        let mut sequence: Vec<usize> = (0..gains.len()).collect();
        sequence.sort_by(|a, b| gains[*b].total_cmp(&gains[*a]).then(a.cmp(b)));
        Self { sequence }
    }

    /// All `K!` orders, sequences in lexicographic order.
    pub fn all(k: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(k);
        let mut used = vec![false; k];
        permutations(k, &mut current, &mut used, &mut out);
        out
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    /// `positions()[k]` is the decoding position of BD `k`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.sequence.len()];
        for (i, &bd) in self.sequence.iter().enumerate() {
            pos[bd] = i;
        }
        pos
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Reorders per-BD values into decoding sequence.
    pub fn to_sequence<T: Clone>(&self, per_bd: &[T]) -> Vec<T> {
        self.sequence.iter().map(|&bd| per_bd[bd].clone()).collect()
    }

    /// Inverse of [`Self::to_sequence`].
    pub fn to_per_bd<T: Clone + Default>(&self, in_sequence: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); in_sequence.len()];
        for (i, &bd) in self.sequence.iter().enumerate() {
            out[bd] = in_sequence[i].clone();
        }
        out
    }
}

fn permutations(k: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<DecodingOrder>) {
    if current.len() == k {
        out.push(DecodingOrder { sequence: current.clone() });
        return;
    }
    for bd in 0..k {
        if !used[bd] {
            used[bd] = true;
            current.push(bd);
            permutations(k, current, used, out);
            current.pop();
            used[bd] = false;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Infeasible,
    IterationCapped,
}

/// How the decoding order of a [`SolveResult`] was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderSelection {
    Fixed,
    Enumerated,
    /// `K` exceeded the enumeration cap; BDs were sorted by direct-path gain.
    Heuristic,
}

/// Per-iteration diagnostics of one fixed-order solve.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Traces {
    /// Sum rate after every outer iteration, starting with the initial point.
    pub sum_rate: Vec<f64>,
    /// Objective trace of every SCA run.
    pub sca: Vec<Vec<f64>>,
    /// Objective trace of every manifold descent.
    pub manifold: Vec<Vec<f64>>,
    /// `Σ_k |a_k − b_kᴴ v|²` after every v-step, in channel units.
    pub penalty_residual: Vec<f64>,
    /// Penalty weight used by every outer iteration.
    pub mu: Vec<f64>,
    /// Whether the v-step of every outer iteration was kept.
    pub accepted: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Reflection coefficients indexed by BD.
    pub w: Vec<f64>,
    pub v: BeamVector,
    pub order: DecodingOrder,
    /// Achievable rates indexed by BD, bits/s/Hz.
    pub per_bd_rates: Vec<f64>,
    pub sum_rate_bits: f64,
    pub traces: Traces,
    pub status: SolveStatus,
    pub order_selection: OrderSelection,
    /// Outer iterations run.
    pub iterations: usize,
}

impl SolveResult {
    pub fn is_feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }

    fn infeasible(k: usize, v: BeamVector, order: DecodingOrder, traces: Traces) -> Self {
        Self {
            w: vec![0.0; k],
            v,
            order,
            per_bd_rates: vec![0.0; k],
            sum_rate_bits: 0.0,
            traces,
            status: SolveStatus::Infeasible,
            order_selection: OrderSelection::Fixed,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub penalty: PenaltyConfig,
    pub sca: ScaSettings,
    pub descend: DescendSettings,
    /// Descent stops once one step lowers `f` by less than this times
    /// `max(1, f(v_0))`.
    pub descend_rel_tol: f64,
    /// Outer loop stops once the sum rate improves by less than this.
    pub eps_ao: f64,
    pub max_ao_iter: usize,
    /// Largest `K` for which every decoding order is tried.
    pub order_enum_cap: usize,
    /// Attempts at turning an infeasible starting `v` into a feasible one.
    pub repair_attempts: usize,
    /// Consecutive rejected v-steps after which the outer loop stops.
    pub max_rejections: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            penalty: PenaltyConfig::default(),
            sca: ScaSettings::default(),
            descend: DescendSettings::default(),
            descend_rel_tol: 1e-6,
            eps_ao: 1e-4,
            max_ao_iter: 30,
            order_enum_cap: 5,
            repair_attempts: 10,
            max_rejections: 3,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        if !(self.eps_ao > 0.0) {
            return Err(Error::Config(format!("eps_ao must be positive, got {}", self.eps_ao)));
        }
        if self.max_ao_iter == 0 {
            return Err(Error::Config("max_ao_iter must be at least 1".into()));
        }
        if self.order_enum_cap == 0 {
            return Err(Error::Config("order_enum_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Channel vectors in decoding sequence, scaled to SNR units.
struct Normalized {
    b: Vec<DVector<Complex64>>,
    targets: QosTargets,
    /// `σ² / P_T`, converting squared normalized amplitudes back.
    to_channel_units: f64,
}

impl Normalized {
    fn new(ch: &ChannelSet, cfg: &ScenarioConfig, order: &DecodingOrder) -> Result<Self> {
        let scale = Complex64::new((cfg.p_t / cfg.sigma2).sqrt(), 0.0);
        let b = order.sequence().iter().map(|&bd| &ch.b[bd] * scale).collect();
        let targets = QosTargets::from_rates(&cfg.r_min)?.permuted(order.sequence());
        Ok(Self { b, targets, to_channel_units: cfg.sigma2 / cfg.p_t })
    }

    fn gains(&self, v: &BeamVector) -> Vec<f64> {
        self.b.iter().map(|bk| bk.dotc(v.as_vector()).norm_sqr()).collect()
    }

    /// Closed-form `w` and resulting sum rate at `v`, if feasible.
    fn evaluate(&self, v: &BeamVector) -> Result<Option<(Vec<f64>, f64)>> {
        let h = self.gains(v);
        match optimal_w(&h, &self.targets, 1.0, 1.0)? {
            PowerAllocation::Feasible(w) => {
                let rate = power_alloc::sum_rate(w.as_slice(), &h, 1.0, 1.0);
                Ok(Some((w.0, rate)))
            }
            PowerAllocation::Infeasible(_) => Ok(None),
        }
    }

    fn pull_toward(&self, aux: &[Complex64], v: &BeamVector, opts: &SolverOptions) -> Result<(BeamVector, Vec<f64>)> {
        let obj = QuadraticObjective::from_auxiliary(&self.b, aux)?;
        let mut settings = opts.descend.clone();
        settings.tol = opts.descend_rel_tol * obj.value(v.as_vector()).max(f64::MIN_POSITIVE);
        let res = descend(&obj, v, &settings)?;
        Ok((res.v, res.trace))
    }

    /// Penalty residual `Σ_k |a_k − b_kᴴ v|²` in channel units.
    fn residual(&self, aux: &[Complex64], v: &BeamVector) -> f64 {
        let r: f64 = self.b.iter().zip(aux).map(|(bk, a)| (a - bk.dotc(v.as_vector())).norm_sqr()).sum();
        r * self.to_channel_units
    }
}

/// Runs the alternating optimization for one decoding order from `v0`.
pub fn solve_fixed_order(
    ch: &ChannelSet,
    cfg: &ScenarioConfig,
    order: &DecodingOrder,
    v0: &BeamVector,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let k = ch.k();
    if order.len() != k {
        return Err(Error::Dimension { expected: k, got: order.len() });
    }
    if v0.len() != ch.q_ris() + 1 {
        return Err(Error::Dimension { expected: ch.q_ris() + 1, got: v0.len() });
    }
    cfg.validate()?;
    opts.validate()?;
    let norm = Normalized::new(ch, cfg, order)?;
    let mut traces = Traces::default();

    let mut v = v0.clone();
    let mut state = norm.evaluate(&v)?;
    if state.is_none() {
        match repair(&norm, &v, opts, &mut traces)? {
            Some(repaired) => {
                v = repaired;
                state = norm.evaluate(&v)?;
            }
            None => return Ok(SolveResult::infeasible(k, v0.clone(), order.clone(), traces)),
        }
    }
    let Some((mut w, mut rate)) = state else {
        return Ok(SolveResult::infeasible(k, v0.clone(), order.clone(), traces));
    };

    traces.sum_rate.push(rate);
    let mut mu = opts.penalty.initial_mu(&w);
    let mut rejections = 0;
    let mut status = SolveStatus::IterationCapped;
    let mut iterations = 0;
    while iterations < opts.max_ao_iter {
        iterations += 1;
        traces.mu.push(mu);
        let problem = ScaProblem::new(&w, &norm.b, v.as_vector(), &norm.targets, 1.0, 1.0, mu)?;
        let step = sca_then_descend(&norm, &problem, &v, opts, &mut traces);
        let candidate = match step {
            Ok((v_new, residual)) => {
                traces.penalty_residual.push(residual);
                norm.evaluate(&v_new)?.map(|s| (v_new, s, residual))
            }
            Err(Error::Infeasible(_)) | Err(Error::NotConverged { .. }) | Err(Error::Numerical(_)) => None,
            Err(e) => return Err(e),
        };

        match candidate {
            Some((v_new, (w_new, rate_new), residual)) if rate_new >= rate => {
                traces.accepted.push(true);
                rejections = 0;
                let gain = rate_new - rate;
                v = v_new;
                w = w_new;
                rate = rate_new;
                traces.sum_rate.push(rate);
                if residual > opts.penalty.eps_pen {
                    mu = (mu * opts.penalty.mu_growth).min(opts.penalty.mu_max);
                }
                if gain < opts.eps_ao {
                    status = SolveStatus::Converged;
                    break;
                }
            }
            _ => {
                traces.accepted.push(false);
                traces.sum_rate.push(rate);
                rejections += 1;
                if rejections >= opts.max_rejections || mu >= opts.penalty.mu_max {
                    status = SolveStatus::Converged;
                    break;
                }
                mu = (mu * opts.penalty.mu_growth).min(opts.penalty.mu_max);
            }
        }
    }

    let h = norm.gains(&v);
    let rates_seq = power_alloc::rates(&w, &h, 1.0, 1.0);
    Ok(SolveResult {
        w: order.to_per_bd(&w),
        v: v.canonical(),
        order: order.clone(),
        per_bd_rates: order.to_per_bd(&rates_seq),
        sum_rate_bits: rate,
        traces,
        status,
        order_selection: OrderSelection::Fixed,
        iterations,
    })
}

fn sca_then_descend(
    norm: &Normalized,
    problem: &ScaProblem,
    v: &BeamVector,
    opts: &SolverOptions,
    traces: &mut Traces,
) -> Result<(BeamVector, f64)> {
    let start = if problem.is_strictly_feasible(&problem.anchors) {
        problem.anchors.clone()
    } else {
        problem.find_feasible_start(&problem.anchors, &opts.sca)?.a
    };
    let run = problem.run(&start, &opts.sca)?;
    traces.sca.push(run.trace);
    let (v_new, trace) = norm.pull_toward(&run.a, v, opts)?;
    traces.manifold.push(trace);
    let residual = norm.residual(&run.a, &v_new);
    Ok((v_new, residual))
}

/// Moves an infeasible `v` toward auxiliary channels that satisfy every QoS
/// and ordering constraint with margin.
fn repair(norm: &Normalized, v0: &BeamVector, opts: &SolverOptions, traces: &mut Traces) -> Result<Option<BeamVector>> {
    let k = norm.b.len();
    let ones = vec![1.0; k];
    let mut v = v0.clone();
    for _ in 0..opts.repair_attempts {
        let problem = ScaProblem::new(&ones, &norm.b, v.as_vector(), &norm.targets, 1.0, 1.0, 1.0)?;
        let start = match problem.find_feasible_start(&problem.anchors, &opts.sca) {
            Ok(s) => s,
            Err(Error::Infeasible(_)) | Err(Error::NotConverged { .. }) | Err(Error::Numerical(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (v_new, trace) = norm.pull_toward(&start.a, &v, opts)?;
        traces.manifold.push(trace);
        v = v_new;
        if norm.evaluate(&v)?.is_some() {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

/// Best result over decoding orders. Every order is tried when
/// `K <= opts.order_enum_cap`; otherwise BDs are decoded in decreasing order
/// of their direct-path gain.
pub fn solve(ch: &ChannelSet, cfg: &ScenarioConfig, v0: &BeamVector, opts: &SolverOptions) -> Result<SolveResult> {
    let k = ch.k();
    let (orders, selection) = if k <= opts.order_enum_cap {
        (DecodingOrder::all(k), OrderSelection::Enumerated)
    } else {
        (vec![DecodingOrder::by_decreasing_gain(&ch.direct_gains())], OrderSelection::Heuristic)
    };
    let mut best: Option<SolveResult> = None;
    for order in &orders {
        let res = solve_fixed_order(ch, cfg, order, v0, opts)?;
        let better = match &best {
            None => true,
            Some(b) => res.is_feasible() && (!b.is_feasible() || res.sum_rate_bits > b.sum_rate_bits),
        };
        if better {
            best = Some(res);
        }
    }
    let mut best = best.ok_or_else(|| Error::Domain("no backscatter devices".into()))?;
    best.order_selection = selection;
    Ok(best)
}

/// A constraint a solution fails when re-evaluated from its phase shifts.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Qos { bd: usize, rate: f64, required: f64 },
    Ordering { earlier: usize, later: usize },
    Box { bd: usize, w: f64 },
    UnitModulus { deviation: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// Combined gains `H_k`, indexed by BD.
    pub gains: Vec<f64>,
    pub per_bd_rates: Vec<f64>,
    pub sum_rate: f64,
    pub violations: Vec<Violation>,
}

/// Recomputes gains from the phase shifts of `result.v` through the
/// cascaded-channel form and audits every constraint.
pub fn rate_report(result: &SolveResult, ch: &ChannelSet, cfg: &ScenarioConfig) -> Result<RateReport> {
    let k = ch.k();
    if result.w.len() != k || result.order.len() != k {
        return Err(Error::Dimension { expected: k, got: result.w.len() });
    }
    let theta = result.v.theta();
    let gains = (0..k).map(|bd| combined_gain_theta(ch, &theta, bd)).collect::<Result<Vec<f64>>>()?;
    let h_seq = result.order.to_sequence(&gains);
    let w_seq = result.order.to_sequence(&result.w);
    let rates_seq = power_alloc::rates(&w_seq, &h_seq, cfg.p_t, cfg.sigma2);
    let per_bd_rates = result.order.to_per_bd(&rates_seq);

    let mut violations = Vec::new();
    let seq = result.order.sequence();
    for (i, &bd) in seq.iter().enumerate() {
        if !(0.0..=1.0).contains(&result.w[bd]) {
            violations.push(Violation::Box { bd, w: result.w[bd] });
        }
        if per_bd_rates[bd] < cfg.r_min[bd] - RATE_AUDIT_TOL {
            violations.push(Violation::Qos { bd, rate: per_bd_rates[bd], required: cfg.r_min[bd] });
        }
        if let Some(&next) = seq.get(i + 1) {
            if !(gains[bd] > gains[next] * (1.0 + 0.5 * ORDER_EPS)) {
                violations.push(Violation::Ordering { earlier: bd, later: next });
            }
        }
    }
    let deviation = result.v.max_modulus_deviation();
    if deviation > 1e-12 {
        violations.push(Violation::UnitModulus { deviation });
    }
    Ok(RateReport { gains, sum_rate: rates_seq.iter().sum(), per_bd_rates, violations })
}
