//! Log-barrier interior-point solver for small convex QCQPs whose quadratic
//! forms are diagonal.
//!
//! Solves
//!
//! ```text
//! minimize    f_0(z)
//! subject to  f_i(z) <= 0,   i = 1..m
//! ```
//!
//! where every `f_i(z) = ½ zᵀ diag(d_i) z + q_iᵀ z + r_i` with `d_i >= 0`.
//! Each outer step centers `t·f_0(z) − Σ log(−f_i(z))` with damped Newton
//! iterations and then multiplies `t` by a fixed factor until the duality gap
//! `m / t` is below tolerance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `½ zᵀ diag(diag) z + linearᵀ z + constant`, with `diag >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableQuadratic {
    pub diag: DVector<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl SeparableQuadratic {
    pub fn zeros(n: usize) -> Self {
        Self { diag: DVector::zeros(n), linear: DVector::zeros(n), constant: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        let mut acc = self.constant;
        for i in 0..z.len() {
            acc += z[i] * (0.5 * self.diag[i] * z[i] + self.linear[i]);
        }
        acc
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        self.diag.component_mul(z) + &self.linear
    }

    /// Multiplies the function by `s > 0`.
    pub fn scaled(mut self, s: f64) -> Self {
        self.diag *= s;
        self.linear *= s;
        self.constant *= s;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSettings {
    /// Initial barrier weight `t`.
    pub t0: f64,
    /// Multiplier applied to `t` after each centering step.
    pub t_growth: f64,
    /// Centering stops once half the squared Newton decrement falls below
    /// this and the barrier gradient divided by `t` is below
    /// `stationarity_tol`.
    pub newton_tol: f64,
    pub stationarity_tol: f64,
    /// Outer loop stops once `m / t` falls below this.
    pub gap_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self { t0: 1.0, t_growth: 10.0, newton_tol: 1e-9, stationarity_tol: 1e-10, gap_tol: 1e-8, max_newton: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    /// Dual estimates `1 / (t · (−f_i(z)))`.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub newton_steps: usize,
    pub final_t: f64,
}

/// Largest of the stationarity, complementarity and primal-infeasibility
/// residuals at `(z, multipliers)`.
pub fn kkt_residual(
    objective: &SeparableQuadratic,
    constraints: &[SeparableQuadratic],
    z: &DVector<f64>,
    multipliers: &[f64],
) -> f64 {
    let mut stationarity = objective.gradient(z);
    let mut complementarity = 0.0f64;
    let mut primal = 0.0f64;
    for (c, l) in constraints.iter().zip(multipliers) {
        stationarity += c.gradient(z) * *l;
        let v = c.value(z);
        complementarity = complementarity.max((l * v).abs());
        primal = primal.max(v);
    }
    stationarity.amax().max(complementarity).max(primal)
}

/// Minimizes `objective` subject to `constraints[i](z) <= 0` from a strictly
/// feasible `z0`.
pub fn solve(
    objective: &SeparableQuadratic,
    constraints: &[SeparableQuadratic],
    z0: &DVector<f64>,
    settings: &BarrierSettings,
) -> Result<BarrierSolution> {
    let n = z0.len();
    if objective.dim() != n {
        return Err(Error::Dimension { expected: n, got: objective.dim() });
    }
    if let Some(c) = constraints.iter().find(|c| c.dim() != n) {
        return Err(Error::Dimension { expected: n, got: c.dim() });
    }
    if constraints.iter().any(|c| !(c.value(z0) < 0.0)) {
        return Err(Error::Infeasible("starting point is not strictly feasible".into()));
    }

    let m = constraints.len();
    let mut z = z0.clone();
    let mut t = settings.t0;
    let mut newton_steps = 0;
    loop {
        newton_steps += center(objective, constraints, &mut z, t, settings)?;
        if m == 0 || (m as f64) / t <= settings.gap_tol {
            break;
        }
        t *= settings.t_growth;
    }

    let multipliers: Vec<f64> = constraints.iter().map(|c| 1.0 / (t * -c.value(&z))).collect();
    let kkt = kkt_residual(objective, constraints, &z, &multipliers);
    Ok(BarrierSolution {
        objective: objective.value(&z),
        z,
        multipliers,
        kkt_residual: kkt,
        newton_steps,
        final_t: t,
    })
}

fn barrier_value(objective: &SeparableQuadratic, constraints: &[SeparableQuadratic], z: &DVector<f64>, t: f64) -> f64 {
    let mut acc = t * objective.value(z);
    for c in constraints {
        let v = c.value(z);
        if !(v < 0.0) {
            return f64::INFINITY;
        }
        acc -= (-v).ln();
    }
    acc
}

fn barrier_gradient(
    objective: &SeparableQuadratic,
    constraints: &[SeparableQuadratic],
    z: &DVector<f64>,
    t: f64,
) -> DVector<f64> {
    let mut grad = objective.gradient(z) * t;
    for c in constraints {
        grad += c.gradient(z) / -c.value(z);
    }
    grad
}

fn center(
    objective: &SeparableQuadratic,
    constraints: &[SeparableQuadratic],
    z: &mut DVector<f64>,
    t: f64,
    settings: &BarrierSettings,
) -> Result<usize> {
    let n = z.len();
    let mut last_stationarity = f64::INFINITY;
    for step in 0..settings.max_newton {
        let grad = barrier_gradient(objective, constraints, z, t);
        let mut hess = DMatrix::from_diagonal(&(&objective.diag * t));
        for c in constraints {
            let s = -c.value(z);
            let g = c.gradient(z);
            for i in 0..n {
                hess[(i, i)] += c.diag[i] / s;
            }
            hess.ger(1.0 / (s * s), &g, &g, 1.0);
        }

        let delta = newton_direction(hess, &grad)?;
        let decrement = -grad.dot(&delta);
        if decrement / 2.0 <= settings.newton_tol {
            // keep polishing stationarity while Newton steps still reduce it
            let g = grad.amax() / t;
            if g <= settings.stationarity_tol || g >= 0.5 * last_stationarity {
                return Ok(step);
            }
            last_stationarity = g;
        }

        // Armijo on the barrier value; once its decrease drops below the
        // rounding level of phi, a step that shrinks the gradient is taken
        let phi0 = barrier_value(objective, constraints, z, t);
        let grad_norm = grad.norm();
        let slope = grad.dot(&delta);
        let mut alpha = 1.0;
        loop {
            let trial = &*z + &delta * alpha;
            let phi = barrier_value(objective, constraints, &trial, t);
            if phi <= phi0 + 0.25 * alpha * slope {
                *z = trial;
                break;
            }
            if phi.is_finite()
                && phi - phi0 <= 64.0 * f64::EPSILON * phi0.abs()
                && barrier_gradient(objective, constraints, &trial, t).norm() <= (1.0 - 0.25 * alpha) * grad_norm
            {
                *z = trial;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                // no further progress possible at this precision
                return Ok(step);
            }
        }
    }
    Err(Error::NotConverged { iterations: settings.max_newton, residual: f64::NAN })
}

fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut h = hess.clone();
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            return Ok(-ch.solve(grad));
        }
        ridge = if ridge == 0.0 { scale * 1e-14 } else { ridge * 100.0 };
    }
    Err(Error::Numerical("Newton system is not positive definite".into()))
}
