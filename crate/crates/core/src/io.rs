//! Configuration files and the certificate document.
//!
//! Both are JSON. Unknown keys are rejected and every section is re-validated
//! after parsing, so a file that loads is safe to hand to the algorithms.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dga::DgaConfig;
use crate::dynamics::{ArmGeometry, ControlBounds, SystemParams};
use crate::error::{Error, Result};
use crate::evaluation::SweepConfig;
use crate::safe_control::DEFAULT_ETA;
use crate::simulation::Scenario;
use crate::sos::Multipliers;
use crate::synthesis::SynthesisConfig;

/// Version of the certificate document layout.
pub const CERTIFICATE_FORMAT: u32 = 1;

/// Crate version recorded in emitted documents.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Synthesis options as they appear in a config file. The seed comes from the
/// top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSection {
    pub k_grid: Vec<f64>,
    pub restarts: usize,
    pub p_init_max: f64,
    pub race: bool,
    /// Ascent settings for each cold start.
    pub inner: DgaConfig,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let d = SynthesisConfig::default();
        Self {
            k_grid: d.k_grid,
            restarts: d.restarts,
            p_init_max: d.p_init_max,
            race: d.race,
            inner: d.dga,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub geometry: ArmGeometry,
    pub bounds: ControlBounds,
    pub eta: f64,
    /// Dynamics parameters that `synth` certifies and `adapt` moves away from.
    pub rho: SystemParams,
    /// Target parameters for `adapt`.
    pub rho_new: Option<SystemParams>,
    pub dga: DgaConfig,
    pub synthesis: SynthesisSection,
    pub sweep: SweepConfig,
    pub scenario: Scenario,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            geometry: ArmGeometry::default(),
            bounds: ControlBounds::default(),
            eta: DEFAULT_ETA,
            rho: SystemParams::nominal(),
            rho_new: None,
            dga: DgaConfig::default(),
            synthesis: SynthesisSection::default(),
            sweep: SweepConfig::default(),
            scenario: Scenario::default(),
            seed: 0,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.bounds.validate()?;
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {}", self.eta)));
        }
        self.rho.validate()?;
        if let Some(r) = &self.rho_new {
            r.validate()?;
        }
        self.dga.validate()?;
        self.synthesis_config().validate()?;
        self.sweep.validate()?;
        self.scenario.validate(&self.geometry)?;
        Ok(())
    }

    pub fn synthesis_config(&self) -> SynthesisConfig {
        SynthesisConfig {
            k_grid: self.synthesis.k_grid.clone(),
            restarts: self.synthesis.restarts,
            p_init_max: self.synthesis.p_init_max,
            dga: self.synthesis.inner,
            seed: self.seed,
            race: self.synthesis.race,
        }
    }
}

/// Record of the adaptation that produced a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub previous_rho: SystemParams,
    pub previous_k: f64,
    pub rho: SystemParams,
    pub iterations: u64,
    pub wall_time_s: f64,
}

/// A certified safety index for one set of dynamics parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub format: u32,
    pub rho: SystemParams,
    pub k: f64,
    /// One row of `[pp1, pp2, p1..p9]` per sign assignment.
    pub multipliers: [Multipliers; 4],
    pub eta: f64,
    pub geometry: ArmGeometry,
    pub bounds: ControlBounds,
    pub tool_version: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Certificate {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rho: SystemParams,
        k: f64,
        multipliers: [Multipliers; 4],
        eta: f64,
        geometry: ArmGeometry,
        bounds: ControlBounds,
        seed: u64,
    ) -> Self {
        Self {
            format: CERTIFICATE_FORMAT,
            rho,
            k,
            multipliers,
            eta,
            geometry,
            bounds,
            tool_version: TOOL_VERSION.to_string(),
            seed,
            provenance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != CERTIFICATE_FORMAT {
            return Err(Error::Schema(format!(
                "unsupported certificate format {}, expected {CERTIFICATE_FORMAT}",
                self.format
            )));
        }
        self.rho.validate()?;
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!("k must be >= 0, got {}", self.k)));
        }
        for m in &self.multipliers {
            m.validate()?;
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be > 0, got {}", self.eta)));
        }
        self.geometry.validate()?;
        self.bounds.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Certificate = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        c.validate().map_err(|e| Error::Schema(e.to_string()))?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Writes a 9x9 matrix as headerless CSV.
pub fn write_matrix_csv(path: &Path, q: &crate::sos::CertificateMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in q.rows() {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the ascent trace with one worst-minor column per matrix.
pub fn write_trace_csv(path: &Path, trace: &[crate::dga::TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "worst_minor_q1", "worst_minor_q2", "worst_minor_q3", "worst_minor_q4", "k"])?;
    for r in trace {
        w.serialize((r.iteration, r.worst_minor[0], r.worst_minor[1], r.worst_minor[2], r.worst_minor[3], r.k))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Certificate {
        let mut m = Multipliers::zeros();
        m.pp = [-0.25, 0.125];
        m.p[1] = 6.1;
        Certificate::new(
            SystemParams::nominal(),
            0.3178,
            [m; 4],
            0.1,
            ArmGeometry::default(),
            ControlBounds::default(),
            7,
        )
    }

    #[test]
    fn certificate_round_trip() {
        let c = sample();
        let back = Certificate::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn certificate_rejects_negative_multiplier() {
        let text = sample().to_json().unwrap().replacen("6.1", "-6.1", 1);
        assert!(matches!(Certificate::from_json(&text), Err(Error::Schema(_))));
    }

    #[test]
    fn certificate_rejects_unknown_key() {
        let text = sample().to_json().unwrap().replacen("{", "{\"extra\": 1,", 1);
        assert!(Certificate::from_json(&text).is_err());
    }

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let c = Config::default();
        c.validate().unwrap();
        let back = Config::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(Config::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(Config::from_json(r#"{"eta": -1}"#).is_err());
        assert!(Config::from_json(r#"{"synthesis": {"restarts": 0}}"#).is_err());
        let c = Config::from_json(r#"{"seed": 5, "eta": 0.2}"#).unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.synthesis_config().seed, 5);
    }
}
