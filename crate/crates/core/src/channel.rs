//! Scenario geometry, large-scale path loss, Rician small-scale fading and
//! the per-BD combined channel vectors used by the optimizers.
//!
//! A BD's effective channel towards the receiver is the direct
//! CT→BD→BR cascade plus the CT→BD→RIS→BR cascade. With the passive
//! beamforming vector `v = [e^{jθ_1} … e^{jθ_Q} 1]ᵀ` the combined gain is
//! `H_k = |b_kᴴ v|²`, where `b_k` stacks the per-element reflected paths and
//! the direct path.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// One value per link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkClasses {
    pub ct_bd: f64,
    pub bd_br: f64,
    pub bd_ris: f64,
    pub ris_br: f64,
}

impl LinkClasses {
    fn iter(&self) -> impl Iterator<Item = f64> {
        [self.ct_bd, self.bd_br, self.bd_ris, self.ris_br].into_iter()
    }
}

/// Node placement. BDs are dropped uniformly in the axis-aligned rectangle
/// spanned by `bd_min` and `bd_max`; a zero-height rectangle is a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ct: Point,
    pub ris: Point,
    pub br: Point,
    pub bd_min: Point,
    pub bd_max: Point,
}

/// One experiment point. All powers are linear milliwatts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub k: usize,
    pub q_ris: usize,
    pub p_t: f64,
    pub sigma2: f64,
    /// Minimum rate per BD, bits/s/Hz, indexed by BD.
    pub r_min: Vec<f64>,
    pub geometry: Geometry,
    pub alpha: LinkClasses,
    /// Path loss at the 1 m reference distance, linear.
    pub rho: f64,
    pub kappa: LinkClasses,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if self.q_ris == 0 {
            return Err(Error::Config("Q_RIS must be at least 1".into()));
        }
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return Err(Error::Config(format!("P_T must be positive, got {}", self.p_t)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!(
                "noise power must be positive, got {}",
                self.sigma2
            )));
        }
        if self.r_min.len() != self.k {
            return Err(Error::Config(format!(
                "r_min has {} entries but K = {}",
                self.r_min.len(),
                self.k
            )));
        }
        if self.r_min.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("r_min entries must be finite and >= 0".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if self.kappa.iter().any(|k| !(k >= 0.0)) {
            return Err(Error::Config("kappa entries must be >= 0".into()));
        }
        if self.alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("alpha entries must be finite".into()));
        }
        Ok(())
    }

    /// Sets every BD's minimum rate to `r`.
    pub fn with_uniform_r_min(mut self, r: f64) -> Self {
        self.r_min = vec![r; self.k];
        self
    }

    /// Linear SINR thresholds `2^{R_min} - 1`.
    pub fn sinr_targets(&self) -> Vec<f64> {
        self.r_min.iter().map(|r| r.exp2() - 1.0).collect()
    }
}

/// dBm to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// dB to linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Large-scale gain `rho * d^(-alpha)`.
pub fn path_loss(d: f64, alpha: f64, rho: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(rho * d.powf(-alpha))
}

/// Unit-power Rician draws with an all-ones LoS component.
pub fn sample_rician<R: Rng + ?Sized>(kappa: f64, n: usize, rng: &mut R) -> Result<Vec<Complex64>> {
    if !(kappa >= 0.0) {
        return Err(Error::Domain(format!("Rician factor must be >= 0, got {kappa}")));
    }
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let (los_w, nlos_w) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    };
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Ok((0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(los_w, 0.0) + Complex64::new(re, im) * (scale * nlos_w)
        })
        .collect())
}

/// One realization of every link in the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// CT→BD_k.
    pub h: Vec<Complex64>,
    /// BD_k→BR.
    pub h_tilde: Vec<Complex64>,
    /// BD_k→RIS, one vector of length Q per BD.
    pub f: Vec<Vec<Complex64>>,
    /// RIS→BR.
    pub g: Vec<Complex64>,
    /// Stacked vectors of length Q+1, see [`ChannelSet::from_links`].
    pub b: Vec<DVector<Complex64>>,
    pub bd_positions: Vec<Point>,
}

impl ChannelSet {
    /// Builds a channel set from raw links and derives
    /// `b_k = [h_k gᴴ diag(f_k), h_k h̃_k]ᴴ`.
    pub fn from_links(
        h: Vec<Complex64>,
        h_tilde: Vec<Complex64>,
        f: Vec<Vec<Complex64>>,
        g: Vec<Complex64>,
    ) -> Result<Self> {
        let k = h.len();
        if h_tilde.len() != k {
            return Err(Error::Dimension { expected: k, got: h_tilde.len() });
        }
        if f.len() != k {
            return Err(Error::Dimension { expected: k, got: f.len() });
        }
        let q = g.len();
        for fk in &f {
            if fk.len() != q {
                return Err(Error::Dimension { expected: q, got: fk.len() });
            }
        }
        let b = (0..k)
            .map(|i| {
                let mut bk = DVector::zeros(q + 1);
                for j in 0..q {
                    bk[j] = (h[i] * g[j].conj() * f[i][j]).conj();
                }
                bk[q] = (h[i] * h_tilde[i]).conj();
                bk
            })
            .collect();
        Ok(Self { h, h_tilde, f, g, b, bd_positions: Vec::new() })
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }

    pub fn q_ris(&self) -> usize {
        self.g.len()
    }

    /// Same links with the RIS→BR channel removed.
    pub fn without_ris(&self) -> Self {
        let mut out = Self::from_links(
            self.h.clone(),
            self.h_tilde.clone(),
            self.f.clone(),
            vec![Complex64::new(0.0, 0.0); self.q_ris()],
        )
        .expect("dimensions already validated");
        out.bd_positions = self.bd_positions.clone();
        out
    }

    /// Direct-path gains `|h̃_k h_k|²`.
    pub fn direct_gains(&self) -> Vec<f64> {
        self.h.iter().zip(&self.h_tilde).map(|(h, ht)| (h * ht).norm_sqr()).collect()
    }

    /// `b_kᴴ v` for every BD.
    pub fn effective_channels(&self, v: &DVector<Complex64>) -> Vec<Complex64> {
        self.b.iter().map(|bk| bk.dotc(v)).collect()
    }

    /// `|b_kᴴ v|²` for every BD.
    pub fn gains(&self, v: &DVector<Complex64>) -> Vec<f64> {
        self.b.iter().map(|bk| bk.dotc(v).norm_sqr()).collect()
    }

    fn all_finite(&self) -> bool {
        let fin = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        self.h.iter().all(fin)
            && self.h_tilde.iter().all(fin)
            && self.g.iter().all(fin)
            && self.f.iter().flatten().all(fin)
    }
}

/// Draws BD positions and every link for one trial.
///
/// The RIS links are drawn from child generators seeded from `rng` up front,
/// so the parent stream consumption does not depend on `Q` and a larger
/// surface extends the element draws of a smaller one.
pub fn generate_channels(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<ChannelSet> {
    cfg.validate()?;
    let k = cfg.k;
    let q = cfg.q_ris;
    let g_seed = rng.next_u64();
    let f_seeds: Vec<u64> = (0..k).map(|_| rng.next_u64()).collect();

    let geo = &cfg.geometry;
    let bd_positions: Vec<Point> = (0..k)
        .map(|_| {
            let x = uniform_between(rng, geo.bd_min.x, geo.bd_max.x);
            let y = uniform_between(rng, geo.bd_min.y, geo.bd_max.y);
            Point::new(x, y)
        })
        .collect();

    let link = |d: f64, alpha: f64, kappa: f64, n: usize, r: &mut ChaCha8Rng| -> Result<Vec<Complex64>> {
        let amp = path_loss(d, alpha, cfg.rho)?.sqrt();
        Ok(sample_rician(kappa, n, r)?.into_iter().map(|s| s * amp).collect())
    };

    let mut h = Vec::with_capacity(k);
    let mut h_tilde = Vec::with_capacity(k);
    for p in &bd_positions {
        h.push(link(geo.ct.distance(p), cfg.alpha.ct_bd, cfg.kappa.ct_bd, 1, rng)?[0]);
        h_tilde.push(link(p.distance(&geo.br), cfg.alpha.bd_br, cfg.kappa.bd_br, 1, rng)?[0]);
    }

    let mut g_rng = ChaCha8Rng::seed_from_u64(g_seed);
    let g = link(geo.ris.distance(&geo.br), cfg.alpha.ris_br, cfg.kappa.ris_br, q, &mut g_rng)?;
    let f = bd_positions
        .iter()
        .zip(&f_seeds)
        .map(|(p, seed)| {
            let mut f_rng = ChaCha8Rng::seed_from_u64(*seed);
            link(p.distance(&geo.ris), cfg.alpha.bd_ris, cfg.kappa.bd_ris, q, &mut f_rng)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut ch = ChannelSet::from_links(h, h_tilde, f, g)?;
    ch.bd_positions = bd_positions;
    if !ch.all_finite() {
        return Err(Error::Numerical("non-finite channel coefficient".into()));
    }
    Ok(ch)
}

fn uniform_between(rng: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// `H_k = |b_kᴴ v|²`.
pub fn combined_gain(ch: &ChannelSet, v: &DVector<Complex64>, k: usize) -> Result<f64> {
    let expected = ch.q_ris() + 1;
    if v.len() != expected {
        return Err(Error::Dimension { expected, got: v.len() });
    }
    let bk = ch.b.get(k).ok_or_else(|| Error::Domain(format!("BD index {k} out of range")))?;
    Ok(bk.dotc(v).norm_sqr())
}

/// `H_k = |(h̃_k + gᴴ Θ f_k) h_k|²` evaluated from the phase shifts directly.
pub fn combined_gain_theta(ch: &ChannelSet, theta: &[f64], k: usize) -> Result<f64> {
    let q = ch.q_ris();
    if theta.len() != q {
        return Err(Error::Dimension { expected: q, got: theta.len() });
    }
    if k >= ch.k() {
        return Err(Error::Domain(format!("BD index {k} out of range")));
    }
    let reflected: Complex64 = ch
        .g
        .iter()
        .zip(&ch.f[k])
        .zip(theta)
        .map(|((g, f), t)| g.conj() * Complex64::from_polar(1.0, *t) * f)
        .sum();
    Ok(((ch.h_tilde[k] + reflected) * ch.h[k]).norm_sqr())
}
