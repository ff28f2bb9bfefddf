//! Gradient descent on the product of unit circles for the passive
//! beamforming update
//!
//! ```text
//! minimize  f(v) = Σ_k |a_k − b_kᴴ v|² = vᴴ A v − 2 Re(cᴴ v) + Σ_k |a_k|²
//! subject to |v_q| = 1
//! ```
//!
//! with `A = Σ_k b_k b_kᴴ` and `c = Σ_k a_k b_k`. Each step projects the
//! Euclidean gradient onto the tangent space, moves by a fixed step
//! `1 / λ_max(A)` and normalizes every entry back onto the unit circle.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Modulus tolerance accepted by operations that require a point on the
/// manifold.
pub const UNIT_MODULUS_TOL: f64 = 1e-8;

/// Passive beamforming vector `[e^{jθ_1} … e^{jθ_Q} e^{jθ_{Q+1}}]`; the last
/// entry carries the direct path.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector(DVector<Complex64>);

impl BeamVector {
    /// Wraps `v`, rejecting entries off the unit circle.
    pub fn new(v: DVector<Complex64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Domain("beam vector must be non-empty".into()));
        }
        let dev = max_modulus_deviation(&v);
        if !(dev <= UNIT_MODULUS_TOL) {
            return Err(Error::Domain(format!("entry modulus deviates from 1 by {dev:.3e}")));
        }
        Ok(Self(v))
    }

    /// Canonical vector from RIS phase shifts (last entry 1).
    pub fn from_phases(theta: &[f64]) -> Self {
        let mut v: Vec<Complex64> = theta.iter().map(|t| Complex64::from_polar(1.0, *t)).collect();
        v.push(Complex64::new(1.0, 0.0));
        Self(DVector::from_vec(v))
    }

    /// Uniform random phases on every entry, `len = Q + 1`.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self(DVector::from_iterator(len, (0..len).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..TAU)))))
    }

    pub fn ones(len: usize) -> Self {
        Self(DVector::from_element(len, Complex64::new(1.0, 0.0)))
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<Complex64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// RIS phase shifts relative to the last entry, each in `[0, 2π)`.
    pub fn theta(&self) -> Vec<f64> {
        let n = self.0.len();
        let reference = self.0[n - 1].arg();
        self.0
            .iter()
            .take(n - 1)
            .map(|x| {
                let t = (x.arg() - reference).rem_euclid(TAU);
                if t >= TAU {
                    0.0
                } else {
                    t
                }
            })
            .collect()
    }

    /// Same point rotated so that the last entry is 1. Every `|b_kᴴ v|` is
    /// unchanged.
    pub fn canonical(&self) -> Self {
        let n = self.0.len();
        let rot = self.0[n - 1].conj() / self.0[n - 1].norm();
        Self(self.0.map(|x| x * rot))
    }

    pub fn max_modulus_deviation(&self) -> f64 {
        max_modulus_deviation(&self.0)
    }
}

fn max_modulus_deviation(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|x| (x.norm() - 1.0).abs()).fold(0.0, f64::max)
}

/// `f(v) = vᴴ A v − 2 Re(cᴴ v) + constant`.
///
/// When built from channel vectors the factors are kept, and products with
/// `A` run in `O(K·n)` instead of `O(n²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub a: DMatrix<Complex64>,
    pub c: DVector<Complex64>,
    pub constant: f64,
    factors: Option<Vec<DVector<Complex64>>>,
}

impl QuadraticObjective {
    /// `Σ_k |aux_k − b_kᴴ v|²`.
    pub fn from_auxiliary(b: &[DVector<Complex64>], aux: &[Complex64]) -> Result<Self> {
        if b.len() != aux.len() {
            return Err(Error::Dimension { expected: b.len(), got: aux.len() });
        }
        let n = b.first().map_or(0, |x| x.len());
        if n == 0 {
            return Err(Error::Domain("need at least one channel vector".into()));
        }
        let mut a = DMatrix::zeros(n, n);
        let mut c = DVector::zeros(n);
        for (bk, ak) in b.iter().zip(aux) {
            if bk.len() != n {
                return Err(Error::Dimension { expected: n, got: bk.len() });
            }
            a.ger(Complex64::new(1.0, 0.0), bk, &bk.conjugate(), Complex64::new(1.0, 0.0));
            c.axpy(*ak, bk, Complex64::new(1.0, 0.0));
        }
        let constant = aux.iter().map(|x| x.norm_sqr()).sum();
        Ok(Self { a, c, constant, factors: Some(b.to_vec()) })
    }

    /// Objective from an explicit Hermitian PSD matrix.
    pub fn dense(a: DMatrix<Complex64>, c: DVector<Complex64>, constant: f64) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != c.len() {
            return Err(Error::Dimension { expected: c.len(), got: a.nrows() });
        }
        Ok(Self { a, c, constant, factors: None })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// `A x`.
    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        match &self.factors {
            Some(b) => {
                let mut out = DVector::zeros(x.len());
                for bk in b {
                    out.axpy(bk.dotc(x), bk, Complex64::new(1.0, 0.0));
                }
                out
            }
            None => &self.a * x,
        }
    }

    pub fn value(&self, v: &DVector<Complex64>) -> f64 {
        let quad = match &self.factors {
            Some(b) => b.iter().map(|bk| bk.dotc(v).norm_sqr()).sum(),
            None => v.dotc(&(&self.a * v)).re,
        };
        quad - 2.0 * self.c.dotc(v).re + self.constant
    }
}

/// `2 A v − 2 c`.
pub fn euclidean_grad(obj: &QuadraticObjective, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if v.len() != obj.dim() {
        return Err(Error::Dimension { expected: obj.dim(), got: v.len() });
    }
    Ok((obj.apply(v) - &obj.c) * Complex64::new(2.0, 0.0))
}

/// Projection of `eg` onto the tangent space at `v`:
/// `eg − Re(conj(eg) ⊙ v) ⊙ v`.
pub fn riemannian_grad(eg: &DVector<Complex64>, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if eg.len() != v.len() {
        return Err(Error::Dimension { expected: v.len(), got: eg.len() });
    }
    let dev = max_modulus_deviation(v);
    if !(dev <= UNIT_MODULUS_TOL) {
        return Err(Error::Domain(format!("point is off the manifold by {dev:.3e}")));
    }
    Ok(project(eg, v))
}

fn project(eg: &DVector<Complex64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    eg.zip_map(v, |g, x| g - x * (g.conj() * x).re)
}

/// Largest `|Re(z_q · conj(v_q))|`; zero for a tangent vector `z` at `v`.
pub fn tangency_residual(z: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    z.iter().zip(v.iter()).map(|(z, v)| (z * v.conj()).re.abs()).fold(0.0, f64::max)
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration, to the
/// given relative tolerance. Returns 0 for the zero matrix.
pub fn largest_eigenvalue(a: &DMatrix<Complex64>, rel_tol: f64, max_iter: usize) -> f64 {
    if a.iter().all(|x| x.norm_sqr() == 0.0) {
        return 0.0;
    }
    power_iteration(a.nrows(), |x| a * x, rel_tol, max_iter)
}

fn power_iteration<F>(n: usize, apply: F, rel_tol: f64, max_iter: usize) -> f64
where
    F: Fn(&DVector<Complex64>) -> DVector<Complex64>,
{
    if n == 0 {
        return 0.0;
    }
    // fixed, generic start vector
    let mut x = DVector::from_iterator(n, (0..n).map(|i| Complex64::from_polar(1.0, 0.754_877_666 * (i as f64 + 1.0))));
    x /= Complex64::new(x.norm(), 0.0);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let y = apply(&x);
        let next = x.dotc(&y).re;
        let norm = y.norm();
        if norm == 0.0 {
            return 0.0;
        }
        x = y / Complex64::new(norm, 0.0);
        if (next - lambda).abs() <= rel_tol * next.abs() {
            // the Rayleigh quotient converges quadratically faster than the
            // vector, so one more product tightens it cheaply
            let y = apply(&x);
            return x.dotc(&y).re.max(next);
        }
        lambda = next;
    }
    lambda
}

/// Step size `1 / λ_max(A)`, or `fallback` when `A = 0`.
pub fn max_step(obj: &QuadraticObjective, fallback: f64) -> f64 {
    let lambda = if obj.a.iter().all(|x| x.norm_sqr() == 0.0) {
        0.0
    } else {
        power_iteration(obj.dim(), |x| obj.apply(x), 1e-8, 100_000)
    };
    if lambda > 0.0 {
        1.0 / lambda
    } else {
        fallback
    }
}

/// Elementwise normalization back onto the manifold. A zero entry takes the
/// corresponding entry of `previous`, or 1 when none is given.
pub fn retract(v_tilde: &DVector<Complex64>, previous: Option<&BeamVector>) -> BeamVector {
    BeamVector(DVector::from_iterator(
        v_tilde.len(),
        v_tilde.iter().enumerate().map(|(i, x)| {
            let m = x.norm();
            if m > 0.0 && m.is_finite() {
                x / m
            } else {
                previous.map_or(Complex64::new(1.0, 0.0), |p| p.0[i])
            }
        }),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescendSettings {
    /// Stop when `|f(v_{t+1}) − f(v_t)| <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step used when `A = 0`.
    pub fallback_step: f64,
    /// Maximum halvings of the step when a full step would increase `f`.
    pub max_backtracks: usize,
}

impl Default for DescendSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 5000, fallback_step: 1.0, max_backtracks: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescendResult {
    pub v: BeamVector,
    /// `f` at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_grad_norm: f64,
    /// Largest modulus deviation seen over all iterates.
    pub max_modulus_deviation: f64,
    /// Largest tangency residual seen over all Riemannian gradients.
    pub max_tangency_residual: f64,
}

/// Riemannian gradient descent from `v0` with step `1 / λ_max(A)`.
pub fn descend(obj: &QuadraticObjective, v0: &BeamVector, settings: &DescendSettings) -> Result<DescendResult> {
    if v0.len() != obj.dim() {
        return Err(Error::Dimension { expected: obj.dim(), got: v0.len() });
    }
    let step = max_step(obj, settings.fallback_step);
    let mut v = v0.clone();
    let mut f = obj.value(v.as_vector());
    let mut trace = vec![f];
    let mut max_dev = v.max_modulus_deviation();
    let mut max_tan = 0.0f64;
    let mut grad_norm;
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let eg = euclidean_grad(obj, v.as_vector())?;
        let rg = riemannian_grad(&eg, v.as_vector())?;
        max_tan = max_tan.max(tangency_residual(&rg, v.as_vector()));
        grad_norm = rg.norm();
        if grad_norm == 0.0 {
            converged = true;
            break;
        }
        if iterations >= settings.max_iter {
            break;
        }
        iterations += 1;

        let mut lambda = step;
        let mut accepted = None;
        for _ in 0..=settings.max_backtracks {
            let v_tilde = v.as_vector() - &rg * Complex64::new(lambda, 0.0);
            let cand = retract(&v_tilde, Some(&v));
            let f_cand = obj.value(cand.as_vector());
            if f_cand <= f {
                accepted = Some((cand, f_cand));
                break;
            }
            lambda *= 0.5;
        }
        let Some((cand, f_cand)) = accepted else {
            // no decrease representable at this precision
            converged = true;
            break;
        };
        max_dev = max_dev.max(cand.max_modulus_deviation());
        let change = (f - f_cand).abs();
        v = cand;
        f = f_cand;
        trace.push(f);
        if change <= settings.tol {
            converged = true;
            break;
        }
    }
    Ok(DescendResult {
        v,
        trace,
        iterations,
        converged,
        final_grad_norm: grad_norm,
        max_modulus_deviation: max_dev,
        max_tangency_residual: max_tan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> DVector<Complex64> {
        DVector::from_iterator(n, (0..n).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal))))
    }

    fn random_objective(n: usize, k: usize, rng: &mut ChaCha8Rng) -> QuadraticObjective {
        let b: Vec<_> = (0..k).map(|_| random_complex(n, rng)).collect();
        let aux: Vec<_> = (0..k).map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)) * 3.0).collect();
        QuadraticObjective::from_auxiliary(&b, &aux).unwrap()
    }

    #[test]
    fn objective_matches_sum_of_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<_> = (0..3).map(|_| random_complex(5, &mut rng)).collect();
        let aux = vec![c(1.0, 2.0), c(-0.5, 0.1), c(0.0, -1.0)];
        let obj = QuadraticObjective::from_auxiliary(&b, &aux).unwrap();
        let v = BeamVector::random(5, &mut rng);
        let direct: f64 = b.iter().zip(&aux).map(|(bk, ak)| (ak - bk.dotc(v.as_vector())).norm_sqr()).sum();
        assert_relative_eq!(obj.value(v.as_vector()), direct, max_relative = 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let v = DVector::from_element(3, c(1.0, 0.0));
        let obj = QuadraticObjective::dense(DMatrix::identity(3, 3), DVector::zeros(3), 0.0).unwrap();
        assert_eq!(euclidean_grad(&obj, &v).unwrap(), DVector::from_element(3, c(2.0, 0.0)));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut obj = random_objective(4, 2, &mut rng);
        let v = BeamVector::random(4, &mut rng);
        obj.c = &obj.a * v.as_vector();
        assert!(euclidean_grad(&obj, v.as_vector()).unwrap().norm() < 1e-12);
    }

    #[test]
    fn riemannian_grad_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = BeamVector::random(6, &mut rng);
        let radial = riemannian_grad(v.as_vector(), v.as_vector()).unwrap();
        assert!(radial.norm() < 1e-14);
        let tangential = v.as_vector() * c(0.0, 1.0);
        let out = riemannian_grad(&tangential, v.as_vector()).unwrap();
        assert!((out - &tangential).norm() < 1e-14);
        for _ in 0..50 {
            let eg = random_complex(6, &mut rng);
            let out = riemannian_grad(&eg, v.as_vector()).unwrap();
            assert!(tangency_residual(&out, v.as_vector()) <= 1e-10);
        }
        let off = DVector::from_element(6, c(2.0, 0.0));
        assert!(riemannian_grad(&off, &off).is_err());
    }

    #[test]
    fn max_step_examples() {
        let ident = QuadraticObjective::dense(DMatrix::identity(4, 4), DVector::zeros(4), 0.0).unwrap();
        assert_relative_eq!(max_step(&ident, 7.0), 1.0, max_relative = 1e-8);
        let mut d = DMatrix::zeros(2, 2);
        d[(0, 0)] = c(4.0, 0.0);
        d[(1, 1)] = c(1.0, 0.0);
        let diag = QuadraticObjective::dense(d, DVector::zeros(2), 0.0).unwrap();
        assert_relative_eq!(max_step(&diag, 7.0), 0.25, max_relative = 1e-8);
        let zero = QuadraticObjective::dense(DMatrix::zeros(3, 3), DVector::zeros(3), 0.0).unwrap();
        assert_eq!(max_step(&zero, 7.0), 7.0);
    }

    #[test]
    fn retract_examples() {
        let out = retract(&DVector::from_vec(vec![c(2.0, 0.0), c(0.0, 2.0)]), None);
        assert_eq!(out.as_vector()[0], c(1.0, 0.0));
        assert_eq!(out.as_vector()[1], c(0.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let unit = BeamVector::random(8, &mut rng);
        let same = retract(unit.as_vector(), None);
        assert!((same.as_vector() - unit.as_vector()).norm() < 1e-15);
        for _ in 0..20 {
            let r = retract(&random_complex(16, &mut rng), None);
            assert!(r.max_modulus_deviation() <= 1e-12);
        }
        let prev = BeamVector::from_phases(&[1.0]);
        let out = retract(&DVector::from_vec(vec![c(0.0, 0.0), c(3.0, 0.0)]), Some(&prev));
        assert_eq!(out.as_vector()[0], prev.as_vector()[0]);
    }

    #[test]
    fn theta_and_canonical() {
        let v = BeamVector::new(DVector::from_vec(vec![c(0.0, 1.0), c(-1.0, 0.0), c(0.0, 1.0)])).unwrap();
        let theta = v.theta();
        assert_relative_eq!(theta[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(theta[1], std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        let canon = v.canonical();
        assert_relative_eq!(canon.as_vector()[2].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(canon.as_vector()[1].im, 1.0, epsilon = 1e-15);
        assert!(theta.iter().all(|t| (0.0..TAU).contains(t)));
    }

    #[test]
    fn descend_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b: Vec<_> = (0..2).map(|_| random_complex(4, &mut rng)).collect();
        let v = BeamVector::random(4, &mut rng);
        let aux: Vec<_> = b.iter().map(|bk| bk.dotc(v.as_vector())).collect();
        let obj = QuadraticObjective::from_auxiliary(&b, &aux).unwrap();
        let res = descend(&obj, &v, &DescendSettings::default()).unwrap();
        assert!(res.iterations <= 1);
        assert!((res.v.as_vector() - v.as_vector()).norm() < 1e-9);
    }

    #[test]
    fn descend_rank_one_aligns_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_complex(6, &mut rng);
        let coherent: f64 = b.iter().map(|x| x.norm()).sum();
        // target far outside the reachable disc
        let target = Complex64::from_polar(10.0 * coherent, 0.3);
        let obj = QuadraticObjective::from_auxiliary(std::slice::from_ref(&b), &[target]).unwrap();
        let v0 = BeamVector::random(6, &mut rng);
        let res = descend(&obj, &v0, &DescendSettings { tol: 1e-14, max_iter: 20_000, ..Default::default() }).unwrap();
        let z = b.dotc(res.v.as_vector());
        assert_relative_eq!(z.norm(), coherent, max_relative = 1e-6);
        assert_relative_eq!(z.arg(), 0.3, epsilon = 1e-5);
    }
}
