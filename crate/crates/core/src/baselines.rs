//! Reference schemes the optimized design is compared against.
//!
//! * `random_ris`: random RIS phases, closed-form reflection coefficients.
//! * `nomabc_no_ris`: NOMA backscatter without the surface.
//! * `omabc_no_ris`: equal-time TDMA backscatter without the surface, every
//!   BD reflecting fully in its own slot.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::ao::{DecodingOrder, OrderSelection, SolveResult, SolveStatus, SolverOptions, Traces};
use crate::channel::{ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::manifold::BeamVector;
use crate::power_alloc::{self, optimal_w, PowerAllocation, QosTargets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaselineKind {
    Proposed,
    RandomRis,
    NomabcNoRis,
    OmabcNoRis,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] =
        [BaselineKind::Proposed, BaselineKind::RandomRis, BaselineKind::NomabcNoRis, BaselineKind::OmabcNoRis];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Proposed => "proposed",
            BaselineKind::RandomRis => "random_ris",
            BaselineKind::NomabcNoRis => "nomabc_no_ris",
            BaselineKind::OmabcNoRis => "omabc_no_ris",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}; expected one of proposed, random_ris, nomabc_no_ris, omabc_no_ris")))
    }
}

/// Closed-form allocation at fixed `v` with BDs decoded in decreasing gain.
fn noma_at(ch: &ChannelSet, cfg: &ScenarioConfig, v: &BeamVector, order: DecodingOrder) -> Result<SolveResult> {
    let h = ch.gains(v.as_vector());
    let h_seq = order.to_sequence(&h);
    let targets = QosTargets::from_rates(&cfg.r_min)?.permuted(order.sequence());
    let k = ch.k();
    let (w_seq, status) = match optimal_w(&h_seq, &targets, cfg.p_t, cfg.sigma2)? {
        PowerAllocation::Feasible(w) => (w.0, SolveStatus::Converged),
        PowerAllocation::Infeasible(_) => (vec![0.0; k], SolveStatus::Infeasible),
    };
    let rates_seq = if status == SolveStatus::Infeasible {
        vec![0.0; k]
    } else {
        power_alloc::rates(&w_seq, &h_seq, cfg.p_t, cfg.sigma2)
    };
    Ok(SolveResult {
        w: order.to_per_bd(&w_seq),
        v: v.canonical(),
        per_bd_rates: order.to_per_bd(&rates_seq),
        sum_rate_bits: rates_seq.iter().sum(),
        order,
        traces: Traces::default(),
        status,
        order_selection: OrderSelection::Fixed,
        iterations: 0,
    })
}

/// Best of `n_draws` uniformly random phase vectors. Each draw decodes BDs in
/// decreasing gain and uses the closed-form reflection coefficients.
pub fn random_ris<R: Rng + ?Sized>(ch: &ChannelSet, cfg: &ScenarioConfig, rng: &mut R, n_draws: usize) -> Result<SolveResult> {
    if n_draws == 0 {
        return Err(Error::Domain("random_ris needs at least one draw".into()));
    }
    cfg.validate()?;
    let mut best: Option<SolveResult> = None;
    for _ in 0..n_draws {
        let v = BeamVector::random(ch.q_ris() + 1, rng);
        let order = DecodingOrder::by_decreasing_gain(&ch.gains(v.as_vector()));
        let res = noma_at(ch, cfg, &v, order)?;
        let better = match &best {
            None => true,
            Some(b) => res.is_feasible() && (!b.is_feasible() || res.sum_rate_bits > b.sum_rate_bits),
        };
        if better {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one draw"))
}

/// NOMA backscatter over the direct links only, best decoding order.
pub fn nomabc_no_ris(ch: &ChannelSet, cfg: &ScenarioConfig, opts: &SolverOptions) -> Result<SolveResult> {
    cfg.validate()?;
    let direct = ch.without_ris();
    let v = BeamVector::ones(direct.q_ris() + 1);
    let k = ch.k();
    let (orders, selection) = if k <= opts.order_enum_cap {
        (DecodingOrder::all(k), OrderSelection::Enumerated)
    } else {
        (vec![DecodingOrder::by_decreasing_gain(&direct.direct_gains())], OrderSelection::Heuristic)
    };
    let mut best: Option<SolveResult> = None;
    for order in orders {
        let res = noma_at(&direct, cfg, &v, order)?;
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

/// Equal-time TDMA over the direct links: BD `k` gets `1/K` of the frame at
/// rate `log2(1 + P_T H_k / σ²)` with `w_k = 1`.
pub fn omabc_no_ris(ch: &ChannelSet, cfg: &ScenarioConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let k = ch.k();
    let h = ch.direct_gains();
    let rates: Vec<f64> = h.iter().map(|h| (1.0 + cfg.p_t * h / cfg.sigma2).log2() / k as f64).collect();
    let feasible = rates.iter().zip(&cfg.r_min).all(|(r, min)| *r >= *min * (1.0 - 1e-12));
    let (per_bd_rates, status) = if feasible {
        (rates, SolveStatus::Converged)
    } else {
        (vec![0.0; k], SolveStatus::Infeasible)
    };
    Ok(SolveResult {
        w: if feasible { vec![1.0; k] } else { vec![0.0; k] },
        v: BeamVector::ones(ch.q_ris() + 1),
        order: DecodingOrder::identity(k),
        sum_rate_bits: per_bd_rates.iter().sum(),
        per_bd_rates,
        traces: Traces::default(),
        status,
        order_selection: OrderSelection::Fixed,
        iterations: 0,
    })
}
