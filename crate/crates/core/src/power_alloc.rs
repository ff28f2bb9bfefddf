//! NOMA rates under successive interference cancellation and the
//! closed-form power reflection coefficients for a fixed decoding order.
//!
//! Everything here assumes the identity decoding order: BD 1 is decoded
//! first and sees interference from every later BD, BD K is decoded last and
//! sees only noise. Callers permute gains and coefficients beforehand.

use crate::error::{Error, Result};

/// Relative margin used when checking the strict gain ordering `H_k > H_{k+1}`.
pub const ORDER_EPS: f64 = 1e-9;

/// Relative slack used when auditing QoS constraints of a computed solution.
const QOS_AUDIT_TOL: f64 = 1e-9;

/// Power reflection coefficients, one per BD, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionCoefficients(pub Vec<f64>);

impl ReflectionCoefficients {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("reflection coefficient {bad} outside [0, 1]")));
        }
        Ok(Self(w))
    }

    pub fn ones(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Linear SINR thresholds `r_k = 2^{R_k^min} - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QosTargets(pub Vec<f64>);

impl QosTargets {
    pub fn from_rates(r_min_bits: &[f64]) -> Result<Self> {
        Self::new(r_min_bits.iter().map(|r| r.exp2() - 1.0).collect())
    }

    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Domain("SINR thresholds must be >= 0".into()));
        }
        Ok(Self(r))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Same thresholds reindexed so that position `i` holds BD `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(perm.iter().map(|&i| self.0[i]).collect())
    }
}

/// Rate of BD `k` (0-based) under the identity decoding order.
pub fn rate_k(w: &[f64], h: &[f64], p_t: f64, sigma2: f64, k: usize) -> f64 {
    let interference: f64 = (k + 1..w.len()).map(|j| w[j] * p_t * h[j]).sum();
    (1.0 + w[k] * p_t * h[k] / (interference + sigma2)).log2()
}

/// Per-BD rates under the identity decoding order.
pub fn rates(w: &[f64], h: &[f64], p_t: f64, sigma2: f64) -> Vec<f64> {
    (0..w.len()).map(|k| rate_k(w, h, p_t, sigma2, k)).collect()
}

/// Sum rate in its telescoped form, independent of the decoding order.
pub fn sum_rate(w: &[f64], h: &[f64], p_t: f64, sigma2: f64) -> f64 {
    let total: f64 = w.iter().zip(h).map(|(w, h)| w * p_t * h).sum();
    (1.0 + total / sigma2).log2()
}

/// Smallest coefficients meeting every QoS target when all later BDs also
/// sit at their lower bound.
pub fn lower_bounds(h: &[f64], targets: &QosTargets, p_t: f64, sigma2: f64) -> Result<Vec<f64>> {
    let r = targets.as_slice();
    if r.len() != h.len() {
        return Err(Error::Dimension { expected: h.len(), got: r.len() });
    }
    let k_total = h.len();
    let mut out = vec![0.0; k_total];
    // running product of (r_j + 1) over j > k
    let mut tail = 1.0;
    for k in (0..k_total).rev() {
        if r[k] > 0.0 {
            if !(h[k] > 0.0) {
                return Err(Error::Infeasible(format!(
                    "BD {} has zero gain but a positive rate target",
                    k + 1
                )));
            }
            out[k] = sigma2 * r[k] * tail / (p_t * h[k]);
        }
        tail *= r[k] + 1.0;
    }
    Ok(out)
}

/// Outcome of the closed-form power allocation.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerAllocation {
    Feasible(ReflectionCoefficients),
    Infeasible(String),
}

impl PowerAllocation {
    pub fn feasible(&self) -> Option<&ReflectionCoefficients> {
        match self {
            PowerAllocation::Feasible(w) => Some(w),
            PowerAllocation::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, PowerAllocation::Feasible(_))
    }
}

/// True when `h` is strictly decreasing with relative margin [`ORDER_EPS`].
pub fn is_strictly_ordered(h: &[f64]) -> bool {
    h.windows(2).all(|p| p[0] > p[1] * (1.0 + ORDER_EPS) && p[0] > 0.0)
}

/// Checks the QoS constraints `w_k P H_k >= r_k (P Σ_{j>k} w_j H_j + σ²)` and
/// the box `0 <= w <= 1`, with a small relative slack.
pub fn satisfies_qos(w: &[f64], h: &[f64], targets: &QosTargets, p_t: f64, sigma2: f64) -> bool {
    let r = targets.as_slice();
    let mut interference = 0.0;
    for k in (0..w.len()).rev() {
        if !(-QOS_AUDIT_TOL..=1.0 + QOS_AUDIT_TOL).contains(&w[k]) {
            return false;
        }
        let need = r[k] * (p_t * interference + sigma2);
        let have = w[k] * p_t * h[k];
        if have < need * (1.0 - QOS_AUDIT_TOL) {
            return false;
        }
        interference += w[k] * h[k];
    }
    true
}

/// Closed-form maximizer of `Σ w_k H_k` subject to the QoS constraints and
/// `0 <= w <= 1` for gains sorted strictly decreasing.
///
/// BD 1 always reflects fully. Each subsequent BD takes
/// `min(1, w_k^UB)` while every earlier BD is at 1, where the upper bound is
/// the tightest of the earlier BDs' QoS constraints with later BDs at their
/// lower bounds. Once a BD is capped below 1 every later BD drops to its
/// lower bound.
pub fn optimal_w(h: &[f64], targets: &QosTargets, p_t: f64, sigma2: f64) -> Result<PowerAllocation> {
    let r = targets.as_slice();
    let k_total = h.len();
    if r.len() != k_total {
        return Err(Error::Dimension { expected: k_total, got: r.len() });
    }
    if k_total == 0 {
        return Ok(PowerAllocation::Feasible(ReflectionCoefficients(Vec::new())));
    }
    if !is_strictly_ordered(h) {
        return Ok(PowerAllocation::Infeasible("gains are not strictly decreasing".into()));
    }
    let lb = match lower_bounds(h, targets, p_t, sigma2) {
        Ok(lb) => lb,
        Err(Error::Infeasible(msg)) => return Ok(PowerAllocation::Infeasible(msg)),
        Err(e) => return Err(e),
    };
    if let Some(k) = lb.iter().position(|x| *x > 1.0) {
        return Ok(PowerAllocation::Infeasible(format!(
            "BD {} needs reflection coefficient {:.4} > 1",
            k + 1,
            lb[k]
        )));
    }

    let noise = sigma2 / p_t;
    let mut w = vec![0.0; k_total];
    w[0] = 1.0;
    let mut capped = false;
    for k in 1..k_total {
        if capped {
            w[k] = lb[k];
            continue;
        }
        let tail_lb: f64 = (k + 1..k_total).map(|j| lb[j] * h[j]).sum();
        // earlier BDs m < k are all at 1; constraint of BD m bounds w_k
        let mut ub = f64::INFINITY;
        for m in 0..k {
            if r[m] <= 0.0 {
                continue;
            }
            let between: f64 = h[m + 1..k].iter().sum();
            let bound = (h[m] / r[m] - between - tail_lb - noise) / h[k];
            if bound < ub {
                ub = bound;
            }
        }
        if ub >= 1.0 {
            w[k] = 1.0;
        } else {
            w[k] = ub;
            capped = true;
        }
    }

    if w.iter().zip(&lb).any(|(w, lb)| *w < lb * (1.0 - QOS_AUDIT_TOL) || *w < 0.0) {
        return Ok(PowerAllocation::Infeasible("upper bound below lower bound".into()));
    }
    if !satisfies_qos(&w, h, targets, p_t, sigma2) {
        return Ok(PowerAllocation::Infeasible("QoS constraint violated after assignment".into()));
    }
    for x in &mut w {
        *x = x.clamp(0.0, 1.0);
    }
    Ok(PowerAllocation::Feasible(ReflectionCoefficients(w)))
}

/// Objective `Σ w_k H_k`.
pub fn weighted_gain(w: &[f64], h: &[f64]) -> f64 {
    w.iter().zip(h).map(|(w, h)| w * h).sum()
}

/// Exhaustive search over the grid `{0, step, 2·step, …, 1}^K` for the
/// feasible point with the largest `Σ w_k H_k`. Test oracle; `K <= 3`.
///
/// The last coordinate only appears in upper bounds of earlier constraints
/// and in its own lower bound, and the objective grows with it, so for each
/// grid point of the leading coordinates the best last grid value is found
/// by scanning down from the largest value those bounds allow. The result
/// equals the full grid enumeration.
pub fn brute_force_w(
    h: &[f64],
    targets: &QosTargets,
    p_t: f64,
    sigma2: f64,
    grid_step: f64,
) -> Result<Option<ReflectionCoefficients>> {
    let k_total = h.len();
    if k_total > 3 {
        return Err(Error::TooLarge(format!("grid oracle supports K <= 3, got {k_total}")));
    }
    if targets.len() != k_total {
        return Err(Error::Dimension { expected: k_total, got: targets.len() });
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Domain(format!("grid step must be in (0, 1], got {grid_step}")));
    }
    if k_total == 0 {
        return Ok(Some(ReflectionCoefficients(Vec::new())));
    }
    let n = (1.0 / grid_step).round() as usize;
    let grid = |i: usize| (i as f64 / n as f64).min(1.0);
    let lead = k_total - 1;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; lead];
    let mut w = vec![0.0; k_total];
    loop {
        for (slot, i) in idx.iter().enumerate() {
            w[slot] = grid(*i);
        }
        // largest last coordinate allowed by the earlier BDs' constraints
        let r = targets.as_slice();
        let mut ub = 1.0f64;
        for m in 0..lead {
            if r[m] > 0.0 {
                let between: f64 = (m + 1..lead).map(|j| w[j] * h[j]).sum();
                ub = ub.min((w[m] * h[m] / r[m] - between - sigma2 / p_t) / h[lead]);
            }
        }
        if ub >= 0.0 {
            let top = ((ub * n as f64).floor() as usize + 1).min(n);
            for i in (0..=top).rev() {
                w[lead] = grid(i);
                if grid_feasible(&w, h, r, p_t, sigma2) {
                    let obj = weighted_gain(&w, h);
                    if best.as_ref().is_none_or(|(b, _)| obj > *b) {
                        best = Some((obj, w.clone()));
                    }
                    break;
                }
                // once the last BD's own target fails, smaller values fail too
                if w[lead] * p_t * h[lead] < r[lead] * sigma2 {
                    break;
                }
            }
        }
        // odometer over leading coordinates
        let mut pos = 0;
        loop {
            if pos == lead {
                return Ok(best.map(|(_, w)| ReflectionCoefficients(w)));
            }
            idx[pos] += 1;
            if idx[pos] <= n {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

fn grid_feasible(w: &[f64], h: &[f64], r: &[f64], p_t: f64, sigma2: f64) -> bool {
    let mut interference = 0.0;
    for k in (0..w.len()).rev() {
        if w[k] * p_t * h[k] < r[k] * (p_t * interference + sigma2) * (1.0 - 1e-12) {
            return false;
        }
        interference += w[k] * h[k];
    }
    true
}
