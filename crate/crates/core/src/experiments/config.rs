//! Sweep description and its TOML file format.
//!
//! ```toml
//! [scenario]            # every key optional, defaults to the reference setup
//! k = 3
//! q_ris = 50
//! p_t_dbm = 40.0
//! noise_dbm = -114.0
//! r_min = 1.0           # bits/s/Hz, one value for all BDs or a list of K
//! rho_db = -30.0
//! seed = 1
//!
//! [scenario.geometry]
//! ct = [0.0, 10.0]
//! ris = [65.0, 10.0]
//! br = [70.0, 10.0]
//! bd_min = [40.0, 0.0]
//! bd_max = [50.0, 0.0]
//!
//! [scenario.path_loss_exponent]
//! ct_bd = 2.5
//! bd_br = 2.5
//! bd_ris = 2.1
//! ris_br = 2.1
//!
//! [scenario.rician_factor]
//! bd_ris = 3.0
//! ris_br = 3.0
//!
//! [sweep]
//! variable = "q_ris"    # q_ris | p_t_dbm | r_min
//! values = [10, 20, 30, 40, 50]
//! trials = 100
//! schemes = ["proposed", "random_ris", "nomabc_no_ris", "omabc_no_ris"]
//!
//! [solver]              # optional
//! random_ris_draws = 1
//! eps_ao = 1e-4
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::ao::SolverOptions;
use crate::baselines::BaselineKind;
use crate::channel::{db_to_linear, dbm_to_mw, Point, ScenarioConfig};
use crate::error::{Error, Result};

use super::presets::default_paper_scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVariable {
    QRis,
    PtDbm,
    RMin,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::QRis => "q_ris",
            SweepVariable::PtDbm => "p_t_dbm",
            SweepVariable::RMin => "r_min",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "q_ris" => Ok(SweepVariable::QRis),
            "p_t_dbm" => Ok(SweepVariable::PtDbm),
            "r_min" => Ok(SweepVariable::RMin),
            _ => Err(Error::Config(format!("unknown sweep variable {s:?}; expected q_ris, p_t_dbm or r_min"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub n_trials: usize,
    pub schemes: Vec<BaselineKind>,
    pub base: ScenarioConfig,
    pub solver: SolverOptions,
    /// Phase draws per trial for the random-phase baseline.
    pub random_ris_draws: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("sweep.values must not be empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sweep.values must be finite".into()));
        }
        if self.values.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::Config("sweep.values must be sorted ascending".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("sweep.trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("sweep.schemes must not be empty".into()));
        }
        if self.random_ris_draws == 0 {
            return Err(Error::Config("solver.random_ris_draws must be at least 1".into()));
        }
        self.solver.validate()?;
        for v in &self.values {
            self.scenario_for(*v)?.validate()?;
        }
        Ok(())
    }

    /// Base scenario with the swept parameter set to `value`.
    pub fn scenario_for(&self, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = self.base.clone();
        match self.variable {
            SweepVariable::QRis => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Config(format!("q_ris values must be positive integers, got {value}")));
                }
                cfg.q_ris = value as usize;
            }
            SweepVariable::PtDbm => cfg.p_t = dbm_to_mw(value),
            SweepVariable::RMin => cfg = cfg.with_uniform_r_min(value),
        }
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    scenario: ScenarioSection,
    sweep: SweepSection,
    #[serde(default)]
    solver: SolverSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    k: Option<usize>,
    q_ris: Option<usize>,
    p_t_dbm: Option<f64>,
    noise_dbm: Option<f64>,
    r_min: Option<RMin>,
    rho_db: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    geometry: GeometrySection,
    #[serde(default)]
    path_loss_exponent: LinkSection,
    #[serde(default)]
    rician_factor: LinkSection,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RMin {
    Uniform(f64),
    PerBd(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySection {
    ct: Option<[f64; 2]>,
    ris: Option<[f64; 2]>,
    br: Option<[f64; 2]>,
    bd_min: Option<[f64; 2]>,
    bd_max: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    ct_bd: Option<f64>,
    bd_br: Option<f64>,
    bd_ris: Option<f64>,
    ris_br: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    variable: String,
    values: Vec<f64>,
    trials: usize,
    schemes: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    random_ris_draws: Option<usize>,
    mu_init_factor: Option<f64>,
    mu_growth: Option<f64>,
    mu_max: Option<f64>,
    eps_pen: Option<f64>,
    eps_ao: Option<f64>,
    max_ao_iter: Option<usize>,
    order_enum_cap: Option<usize>,
}

fn point(p: Option<[f64; 2]>, default: Point) -> Point {
    p.map_or(default, |[x, y]| Point::new(x, y))
}

/// Parses and validates a sweep file. Syntax errors carry line and column.
pub fn parse_config(text: &str) -> Result<SweepSpec> {
    let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut base = default_paper_scenario();
    let s = file.scenario;
    if let Some(k) = s.k {
        base.k = k;
        base.r_min = vec![base.r_min[0]; k];
    }
    if let Some(q) = s.q_ris {
        base.q_ris = q;
    }
    if let Some(p) = s.p_t_dbm {
        base.p_t = dbm_to_mw(p);
    }
    if let Some(n) = s.noise_dbm {
        base.sigma2 = dbm_to_mw(n);
    }
    match s.r_min {
        Some(RMin::Uniform(r)) => base = base.with_uniform_r_min(r),
        Some(RMin::PerBd(r)) => base.r_min = r,
        None => {}
    }
    if let Some(rho) = s.rho_db {
        base.rho = db_to_linear(rho);
    }
    if let Some(seed) = s.seed {
        base.seed = seed;
    }
    let g = &mut base.geometry;
    g.ct = point(s.geometry.ct, g.ct);
    g.ris = point(s.geometry.ris, g.ris);
    g.br = point(s.geometry.br, g.br);
    g.bd_min = point(s.geometry.bd_min, g.bd_min);
    g.bd_max = point(s.geometry.bd_max, g.bd_max);
    for (sec, links) in [(&s.path_loss_exponent, &mut base.alpha), (&s.rician_factor, &mut base.kappa)] {
        links.ct_bd = sec.ct_bd.unwrap_or(links.ct_bd);
        links.bd_br = sec.bd_br.unwrap_or(links.bd_br);
        links.bd_ris = sec.bd_ris.unwrap_or(links.bd_ris);
        links.ris_br = sec.ris_br.unwrap_or(links.ris_br);
    }

    let schemes = match file.sweep.schemes {
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<BaselineKind>>>()?,
        None => BaselineKind::ALL.to_vec(),
    };
    let mut solver = SolverOptions::default();
    let sv = file.solver;
    solver.penalty.mu_init_factor = sv.mu_init_factor.unwrap_or(solver.penalty.mu_init_factor);
    solver.penalty.mu_growth = sv.mu_growth.unwrap_or(solver.penalty.mu_growth);
    solver.penalty.mu_max = sv.mu_max.unwrap_or(solver.penalty.mu_max);
    solver.penalty.eps_pen = sv.eps_pen.unwrap_or(solver.penalty.eps_pen);
    solver.eps_ao = sv.eps_ao.unwrap_or(solver.eps_ao);
    solver.max_ao_iter = sv.max_ao_iter.unwrap_or(solver.max_ao_iter);
    solver.order_enum_cap = sv.order_enum_cap.unwrap_or(solver.order_enum_cap);

    let spec = SweepSpec {
        variable: file.sweep.variable.parse()?,
        values: file.sweep.values,
        n_trials: file.sweep.trials,
        schemes,
        base,
        solver,
        random_ris_draws: sv.random_ris_draws.unwrap_or(1),
    };
    spec.validate()?;
    Ok(spec)
}

/// Reads and parses a sweep file; errors name the path.
pub fn load_config(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
