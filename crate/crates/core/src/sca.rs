//! Auxiliary-variable update by successive convex approximation.
//!
//! With the reflection coefficients `w` and the beamforming vector `v`
//! fixed, the auxiliary variables `a_k` (stand-ins for `b_kᴴ v`) solve
//!
//! ```text
//! minimize   −Σ w_k |a_k|² + μ Σ |a_k − c_k|²,        c_k = b_kᴴ v
//! subject to w_k |a_k|² >= r_k (Σ_{j>k} w_j |a_j|² + σ²/P_T)
//!            |a_k|² > |a_j|²                           for j > k
//! ```
//!
//! Every `|a_k|²` that appears with a negative sign is replaced by its
//! tangent minorant [`f_sca`] at the current point, which turns each round
//! into a convex QCQP over `2K` real variables. Rounds repeat until the
//! objective settles. [`ScaProblem::find_feasible_start`] produces a strictly
//! feasible starting point by minimizing a shared constraint slack.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::power_alloc::{QosTargets, ORDER_EPS};
use crate::qcqp::{self, BarrierSettings, SeparableQuadratic};

/// Tangent minorant of `|a|²` at `a_ref`: `2 Re(conj(a_ref) a) − |a_ref|²`.
pub fn f_sca(a: Complex64, a_ref: Complex64) -> f64 {
    2.0 * (a_ref.conj() * a).re - a_ref.norm_sqr()
}

/// Penalty weight schedule for the equality `a_k = b_kᴴ v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    /// Initial weight as a multiple of `max_k w_k`.
    pub mu_init_factor: f64,
    pub mu_growth: f64,
    pub mu_max: f64,
    /// Tolerance on `Σ |a_k − b_kᴴ v|²`, in noise-normalized units.
    pub eps_pen: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { mu_init_factor: 10.0, mu_growth: 5.0, mu_max: 1e8, eps_pen: 1e-6 }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_init_factor > 0.0) || !(self.mu_growth >= 1.0) || !(self.eps_pen > 0.0) || !(self.mu_max > 0.0) {
            return Err(Error::Config("penalty schedule needs mu > 0, growth >= 1, eps_pen > 0".into()));
        }
        Ok(())
    }

    pub fn initial_mu(&self, w: &[f64]) -> f64 {
        let wmax = w.iter().cloned().fold(0.0, f64::max);
        (self.mu_init_factor * wmax).max(f64::MIN_POSITIVE).min(self.mu_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaSettings {
    /// Relative objective change that ends the SCA loop.
    pub eps_sca: f64,
    pub max_iter: usize,
    pub max_feasibility_iter: usize,
    /// Stop level for the feasibility search's slack.
    pub eps_feas: f64,
    /// How far below zero the feasibility search may push its slack, in
    /// units of the scaled constraints. A negative slack certifies a strictly
    /// feasible point.
    pub feasibility_margin: f64,
    pub barrier: BarrierSettings,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            eps_sca: 1e-6,
            max_iter: 50,
            max_feasibility_iter: 50,
            eps_feas: 1e-8,
            feasibility_margin: 1e-2,
            barrier: BarrierSettings::default(),
        }
    }
}

/// Data of one auxiliary-variable problem, in any consistent power units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaProblem {
    pub w: Vec<f64>,
    /// Penalty anchors `c_k = b_kᴴ v`.
    pub anchors: Vec<Complex64>,
    pub targets: QosTargets,
    /// `σ² / P_T`.
    pub noise: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub a: Vec<Complex64>,
    pub objective: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaRun {
    pub a: Vec<Complex64>,
    /// Objective of each convex round, starting with the true objective at
    /// the initial point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub max_kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleStart {
    pub a: Vec<Complex64>,
    /// Final infeasibility indicator, clamped at zero.
    pub x: f64,
    pub iterations: usize,
}

/// Which constraint family a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Qos(usize),
    Order(usize, usize),
}

impl ScaProblem {
    /// Builds the problem from channel vectors and the current beamformer.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w: &[f64],
        b: &[DVector<Complex64>],
        v: &DVector<Complex64>,
        targets: &QosTargets,
        p_t: f64,
        sigma2: f64,
        mu: f64,
    ) -> Result<Self> {
        let k = w.len();
        if b.len() != k {
            return Err(Error::Dimension { expected: k, got: b.len() });
        }
        if targets.len() != k {
            return Err(Error::Dimension { expected: k, got: targets.len() });
        }
        if let Some(bk) = b.iter().find(|bk| bk.len() != v.len()) {
            return Err(Error::Dimension { expected: v.len(), got: bk.len() });
        }
        if !(mu > 0.0) {
            return Err(Error::Domain(format!("penalty weight must be positive, got {mu}")));
        }
        Ok(Self {
            w: w.to_vec(),
            anchors: b.iter().map(|bk| bk.dotc(v)).collect(),
            targets: targets.clone(),
            noise: sigma2 / p_t,
            mu,
        })
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }

    /// True objective `−Σ w_k |a_k|² + μ Σ |a_k − c_k|²`.
    pub fn objective(&self, a: &[Complex64]) -> f64 {
        a.iter()
            .zip(&self.anchors)
            .zip(&self.w)
            .map(|((a, c), w)| -w * a.norm_sqr() + self.mu * (a - c).norm_sqr())
            .sum()
    }

    /// Objective of the convexified round linearized at `a_ref`.
    pub fn linearized_objective(&self, a: &[Complex64], a_ref: &[Complex64]) -> f64 {
        (0..self.k())
            .map(|k| -self.w[k] * f_sca(a[k], a_ref[k]) + self.mu * (a[k] - self.anchors[k]).norm_sqr())
            .sum()
    }

    /// `Σ |a_k − c_k|²`.
    pub fn penalty_residual(&self, a: &[Complex64]) -> f64 {
        a.iter().zip(&self.anchors).map(|(a, c)| (a - c).norm_sqr()).sum()
    }

    fn rows(&self) -> Vec<Row> {
        let k = self.k();
        let r = self.targets.as_slice();
        let mut rows = Vec::new();
        // a zero target makes the QoS row vacuous in the unlinearized problem
        rows.extend((0..k).filter(|&i| r[i] > 0.0).map(Row::Qos));
        for i in 0..k {
            for j in i + 1..k {
                rows.push(Row::Order(i, j));
            }
        }
        rows
    }

    /// Slack of each constraint of the round linearized at `a_ref`, as
    /// `g(a) <= 0` values in unscaled units.
    pub fn linearized_constraints(&self, a: &[Complex64], a_ref: &[Complex64]) -> Vec<f64> {
        let r = self.targets.as_slice();
        self.rows()
            .into_iter()
            .map(|row| match row {
                Row::Qos(k) => {
                    let interference: f64 = (k + 1..self.k()).map(|j| self.w[j] * a[j].norm_sqr()).sum();
                    r[k] * (interference + self.noise) - self.w[k] * f_sca(a[k], a_ref[k])
                }
                Row::Order(k, j) => (1.0 + ORDER_EPS) * a[j].norm_sqr() - f_sca(a[k], a_ref[k]),
            })
            .collect()
    }

    /// Scaled constraint rows linearized at `a_ref`; variables are
    /// `y = [Re a_1/s, Im a_1/s, …]` and each row is divided by `s²`.
    fn scaled_rows(&self, a_ref: &[Complex64], s: f64, extra_vars: usize) -> Vec<SeparableQuadratic> {
        let n = 2 * self.k() + extra_vars;
        let r = self.targets.as_slice();
        let noise = self.noise / (s * s);
        self.rows()
            .into_iter()
            .map(|row| {
                let mut q = SeparableQuadratic::zeros(n);
                let (lin_k, weight) = match row {
                    Row::Qos(k) => {
                        for j in k + 1..self.k() {
                            q.diag[2 * j] = 2.0 * r[k] * self.w[j];
                            q.diag[2 * j + 1] = 2.0 * r[k] * self.w[j];
                        }
                        q.constant = r[k] * noise;
                        (k, self.w[k])
                    }
                    Row::Order(k, j) => {
                        q.diag[2 * j] = 2.0 * (1.0 + ORDER_EPS);
                        q.diag[2 * j + 1] = 2.0 * (1.0 + ORDER_EPS);
                        (k, 1.0)
                    }
                };
                // − weight · (2 Re(conj(â) y) − |â|²)
                let ar = a_ref[lin_k] / s;
                q.linear[2 * lin_k] -= 2.0 * weight * ar.re;
                q.linear[2 * lin_k + 1] -= 2.0 * weight * ar.im;
                q.constant += weight * ar.norm_sqr();
                q
            })
            .collect()
    }

    fn scale_for(&self, a: &[Complex64]) -> f64 {
        a.iter()
            .chain(&self.anchors)
            .map(|x| x.norm())
            .fold(self.noise.sqrt(), f64::max)
            .max(1e-300)
    }

    /// Solves one convex round linearized at `a_ref`, which must be strictly
    /// feasible for the unlinearized constraints.
    pub fn solve_subproblem(&self, a_ref: &[Complex64], settings: &BarrierSettings) -> Result<SubproblemSolution> {
        let k = self.k();
        if a_ref.len() != k {
            return Err(Error::Dimension { expected: k, got: a_ref.len() });
        }
        if self.linearized_constraints(a_ref, a_ref).iter().any(|g| !(*g < 0.0)) {
            return Err(Error::Infeasible("linearization point is not strictly feasible".into()));
        }
        let s = self.scale_for(a_ref);
        let n = 2 * k;
        let mut obj = SeparableQuadratic::zeros(n);
        let ratio = |wk: f64| wk / self.mu;
        for i in 0..k {
            let c = self.anchors[i] / s;
            let ar = a_ref[i] / s;
            obj.diag[2 * i] = 2.0;
            obj.diag[2 * i + 1] = 2.0;
            obj.linear[2 * i] = -2.0 * c.re - 2.0 * ratio(self.w[i]) * ar.re;
            obj.linear[2 * i + 1] = -2.0 * c.im - 2.0 * ratio(self.w[i]) * ar.im;
            obj.constant += c.norm_sqr() + ratio(self.w[i]) * ar.norm_sqr();
        }
        let cons = self.scaled_rows(a_ref, s, 0);
        let z0 = DVector::from_iterator(n, a_ref.iter().flat_map(|a| [a.re / s, a.im / s]));
        let sol = qcqp::solve(&obj, &cons, &z0, settings)?;
        let a: Vec<Complex64> = (0..k).map(|i| Complex64::new(sol.z[2 * i], sol.z[2 * i + 1]) * s).collect();
        Ok(SubproblemSolution { objective: self.linearized_objective(&a, a_ref), a, kkt_residual: sol.kkt_residual })
    }

    /// Successive convex approximation from a strictly feasible `init`.
    pub fn run(&self, init: &[Complex64], settings: &ScaSettings) -> Result<ScaRun> {
        let mut a = init.to_vec();
        let mut trace = vec![self.objective(&a)];
        let mut max_kkt = 0.0f64;
        let mut iterations = 0;
        while iterations < settings.max_iter {
            let sol = self.solve_subproblem(&a, &settings.barrier)?;
            iterations += 1;
            max_kkt = max_kkt.max(sol.kkt_residual);
            let prev = *trace.last().expect("trace starts non-empty");
            trace.push(sol.objective);
            a = sol.a;
            if (prev - sol.objective).abs() <= settings.eps_sca * prev.abs().max(sol.objective.abs()).max(1e-300) {
                break;
            }
        }
        Ok(ScaRun { a, trace, iterations, max_kkt_residual: max_kkt })
    }

    /// Finds a point strictly inside the constraint set by repeatedly
    /// minimizing a shared slack `x` over the constraints linearized at the
    /// previous iterate.
    pub fn find_feasible_start(&self, a_guess: &[Complex64], settings: &ScaSettings) -> Result<FeasibleStart> {
        let k = self.k();
        if a_guess.len() != k {
            return Err(Error::Dimension { expected: k, got: a_guess.len() });
        }
        let mut a = a_guess.to_vec();
        // a zero linearization point freezes the tangent minorant at zero
        let s0 = self.scale_for(&a);
        for x in a.iter_mut() {
            if x.norm() <= 1e-12 * s0 {
                *x = Complex64::new(1e-3 * s0, 0.0);
            }
        }
        let mut prev_x = f64::INFINITY;
        for iter in 1..=settings.max_feasibility_iter {
            let s = self.scale_for(&a);
            let worst = self
                .linearized_constraints(&a, &a)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
                / (s * s);
            if worst < 0.0 {
                return Ok(FeasibleStart { a, x: 0.0, iterations: iter });
            }
            let n = 2 * k + 1;
            let xi = 2 * k;
            let mut cons = self.scaled_rows(&a, s, 1);
            for c in cons.iter_mut() {
                c.linear[xi] = -1.0;
            }
            let mut floor = SeparableQuadratic::zeros(n);
            floor.linear[xi] = -1.0;
            floor.constant = -settings.feasibility_margin;
            cons.push(floor);

            // minimize x, with a light proximal term fixing directions the
            // linearized rows leave free
            let prox = 1e-6;
            let mut obj = SeparableQuadratic::zeros(n);
            obj.linear[xi] = 1.0;
            for i in 0..k {
                let y = a[i] / s;
                obj.diag[2 * i] = prox;
                obj.diag[2 * i + 1] = prox;
                obj.linear[2 * i] = -prox * y.re;
                obj.linear[2 * i + 1] = -prox * y.im;
            }
            let mut z0 = DVector::from_iterator(n, a.iter().flat_map(|a| [a.re / s, a.im / s]).chain([0.0]));
            z0[xi] = worst + 1.0;
            let sol = qcqp::solve(&obj, &cons, &z0, &settings.barrier)?;
            let x = sol.z[xi];
            a = (0..k).map(|i| Complex64::new(sol.z[2 * i], sol.z[2 * i + 1]) * s).collect();
            if x < 0.0 {
                // strictly feasible for the rows linearized at the old point,
                // hence for the unlinearized constraints
                return Ok(FeasibleStart { a, x: 0.0, iterations: iter });
            }
            if x <= settings.eps_feas && iter > 1 && x >= prev_x - settings.eps_feas {
                break;
            }
            if x >= prev_x * (1.0 - 1e-9) {
                return Err(Error::Infeasible(format!("feasibility search stalled at slack {x:.3e}")));
            }
            prev_x = x;
        }
        let s = self.scale_for(&a);
        let worst = self.linearized_constraints(&a, &a).into_iter().fold(f64::NEG_INFINITY, f64::max) / (s * s);
        if worst < 0.0 {
            Ok(FeasibleStart { a, x: 0.0, iterations: settings.max_feasibility_iter })
        } else {
            Err(Error::Infeasible(format!("feasibility search ended at slack {worst:.3e}")))
        }
    }

    /// True when `a` strictly satisfies every unlinearized constraint.
    pub fn is_strictly_feasible(&self, a: &[Complex64]) -> bool {
        self.linearized_constraints(a, a).iter().all(|g| *g < 0.0)
    }
}
