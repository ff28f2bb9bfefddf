//! The simulation setup of the reference scenario and the three figure
//! sweeps built on it.

use crate::ao::SolverOptions;
use crate::baselines::BaselineKind;
use crate::channel::{db_to_linear, dbm_to_mw, Geometry, LinkClasses, Point, ScenarioConfig};
use crate::error::{Error, Result};

use super::config::{SweepSpec, SweepVariable};

pub const PRESET_NAMES: [&str; 3] = ["fig3", "fig4", "fig5"];

/// Trials per point used by the presets.
pub const PRESET_TRIALS: usize = 100;

/// CT at (0, 10), RIS at (65, 10), BR at (70, 10), three BDs dropped on the
/// segment from (40, 0) to (50, 0); noise −114 dBm.
///
/// The sweep-dependent parameters default to `Q = 50`, `P_T = 40 dBm` and
/// `R_min = 1` bit/s/Hz.
pub fn default_paper_scenario() -> ScenarioConfig {
    ScenarioConfig {
        k: 3,
        q_ris: 50,
        p_t: dbm_to_mw(40.0),
        sigma2: dbm_to_mw(-114.0),
        r_min: vec![1.0; 3],
        geometry: Geometry {
            ct: Point::new(0.0, 10.0),
            ris: Point::new(65.0, 10.0),
            br: Point::new(70.0, 10.0),
            bd_min: Point::new(40.0, 0.0),
            bd_max: Point::new(50.0, 0.0),
        },
        alpha: LinkClasses { ct_bd: 2.5, bd_br: 2.5, bd_ris: 2.1, ris_br: 2.1 },
        rho: db_to_linear(-30.0),
        kappa: LinkClasses { ct_bd: 0.0, bd_br: 0.0, bd_ris: 3.0, ris_br: 3.0 },
        seed: 1,
    }
}

/// Sweep for one figure: `fig3` (surface size), `fig4` (transmit power) or
/// `fig5` (QoS target).
pub fn preset(name: &str) -> Result<SweepSpec> {
    let base = default_paper_scenario();
    let (variable, values, base) = match name {
        "fig3" => {
            let mut b = base.with_uniform_r_min(0.5);
            b.p_t = dbm_to_mw(35.0);
            (SweepVariable::QRis, vec![10.0, 20.0, 30.0, 40.0, 50.0], b)
        }
        "fig4" => (SweepVariable::PtDbm, vec![30.0, 35.0, 40.0, 45.0], base.with_uniform_r_min(1.0)),
        "fig5" => (SweepVariable::RMin, vec![0.5, 1.0, 1.5, 2.0], base),
        other => {
            return Err(Error::Config(format!("unknown preset {other:?}; expected one of {}", PRESET_NAMES.join(", "))))
        }
    };
    let schemes = match variable {
        SweepVariable::PtDbm => BaselineKind::ALL.to_vec(),
        _ => vec![BaselineKind::Proposed, BaselineKind::RandomRis, BaselineKind::NomabcNoRis],
    };
    let spec = SweepSpec {
        variable,
        values,
        n_trials: PRESET_TRIALS,
        schemes,
        base,
        solver: SolverOptions::default(),
        random_ris_draws: 1,
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_scenario_values() {
        let s = default_paper_scenario();
        assert_relative_eq!(s.sigma2, 10f64.powf(-11.4), max_relative = 1e-12);
        assert_eq!(s.k, 3);
        assert_relative_eq!(s.rho, 1e-3, max_relative = 1e-12);
        s.validate().unwrap();
    }

    #[test]
    fn presets_match_the_figures() {
        let f3 = preset("fig3").unwrap();
        assert_eq!(f3.variable, SweepVariable::QRis);
        assert_eq!(f3.values, vec![10.0, 20.0, 30.0, 40.0, 50.0]);
        assert_relative_eq!(f3.base.p_t, dbm_to_mw(35.0));
        let f4 = preset("fig4").unwrap();
        assert_eq!(f4.base.r_min, vec![1.0; 3]);
        assert_eq!(f4.base.q_ris, 50);
        assert!(f4.schemes.contains(&BaselineKind::OmabcNoRis));
        let f5 = preset("fig5").unwrap();
        assert_eq!(f5.values, vec![0.5, 1.0, 1.5, 2.0]);
        assert_relative_eq!(f5.base.p_t, dbm_to_mw(40.0));
        assert!(preset("fig6").is_err());
    }
}
