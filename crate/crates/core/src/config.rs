//! JSON scenario files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doppler::DopplerConfig;
use crate::error::{Error, Result};
use crate::model::{DriveConfig, Handedness, MediumConfig, MoleculeParams};
use crate::spectra::{self, Engine, Solver, TableSetup};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeSection {
    pub gamma31_pop: f64,
    pub gamma21_pop: f64,
    pub gamma32_pop: f64,
    /// Coherence rates default to the closed-system values.
    #[serde(default)]
    pub gamma12: Option<f64>,
    #[serde(default)]
    pub gamma13: Option<f64>,
    #[serde(default)]
    pub gamma23: Option<f64>,
}

impl MoleculeSection {
    pub fn build(&self) -> Result<MoleculeParams> {
        let closed =
            MoleculeParams::default_closed(self.gamma31_pop, self.gamma21_pop, self.gamma32_pop)?;
        MoleculeParams::new(
            self.gamma31_pop,
            self.gamma21_pop,
            self.gamma32_pop,
            self.gamma12.unwrap_or(closed.gamma12),
            self.gamma13.unwrap_or(closed.gamma13),
            self.gamma23.unwrap_or(closed.gamma23),
        )
    }
}

impl Default for MoleculeSection {
    fn default() -> Self {
        Self {
            gamma31_pop: 1.0,
            gamma21_pop: 1.0,
            gamma32_pop: 1.0,
            gamma12: None,
            gamma13: None,
            gamma23: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub omega21: f64,
    pub omega31: f64,
    pub omega32: f64,
    #[serde(default)]
    pub theta: f64,
    /// Detuning for single-point commands.
    #[serde(default)]
    pub delta: f64,
}

impl DriveSection {
    pub fn build(&self) -> Result<DriveConfig> {
        DriveConfig::new(
            self.omega21,
            self.omega31,
            self.omega32,
            self.delta,
            self.theta,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub p_plus: f64,
    pub zeta: f64,
    #[serde(default = "one")]
    pub dipole_ratio: f64,
}

fn one() -> f64 {
    1.0
}

impl MediumSection {
    pub fn build(&self) -> Result<MediumConfig> {
        MediumConfig::new(self.p_plus, 1.0 - self.p_plus, self.zeta, self.dipole_ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
}

impl SweepSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.delta_min.is_finite() && self.delta_max.is_finite())
            || self.delta_max < self.delta_min
        {
            return Err(Error::InvalidParameter(format!(
                "sweep range [{}, {}] is not a finite interval",
                self.delta_min, self.delta_max
            )));
        }
        if self.points == 0 {
            return Err(Error::InvalidParameter(
                "sweep needs at least one point".into(),
            ));
        }
        Ok(spectra::linspace(
            self.delta_min,
            self.delta_max,
            self.points,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DopplerSection {
    pub k21_ud: f64,
    /// Defaults to the probe width.
    #[serde(default)]
    pub k32_ud: Option<f64>,
    /// Must equal `k21_ud + k32_ud` when given.
    #[serde(default)]
    pub k31_ud: Option<f64>,
    /// Quadrature order; defaults to the recommended order for the widths.
    #[serde(default)]
    pub nodes: Option<usize>,
}

impl DopplerSection {
    pub fn build(&self) -> Result<DopplerConfig> {
        let k32 = self.k32_ud.unwrap_or(self.k21_ud);
        let nodes = self
            .nodes
            .unwrap_or_else(|| DopplerConfig::recommended_nodes(self.k21_ud, k32));
        match self.k31_ud {
            Some(k31) => DopplerConfig::from_widths(self.k21_ud, k31, k32, nodes),
            None => DopplerConfig::new(self.k21_ud, k32, nodes),
        }
    }
}

/// Grid for the δp → δp′ table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    pub zeta: Vec<f64>,
    pub omega32: Vec<f64>,
    pub dp: Vec<f64>,
}

impl Default for TableSection {
    fn default() -> Self {
        Self {
            zeta: vec![0.05, 0.1, 0.2],
            omega32: vec![10.0, 100.0],
            dp: vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

/// One reproduction scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub molecule: MoleculeSection,
    pub drive: DriveSection,
    pub medium: MediumSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub doppler: Option<DopplerSection>,
    /// Enantiomer for `steady`.
    #[serde(default)]
    pub handedness: Option<Handedness>,
    #[serde(default)]
    pub table: Option<TableSection>,
    /// Depth step of the full engine.
    #[serde(default)]
    pub full_step: Option<f64>,
    /// Number of uniform δp samples in calibration curves.
    #[serde(default)]
    pub calibration_points: Option<usize>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn molecule(&self) -> Result<MoleculeParams> {
        self.molecule.build()
    }

    pub fn drive(&self) -> Result<DriveConfig> {
        self.drive.build()
    }

    pub fn medium(&self) -> Result<MediumConfig> {
        self.medium.build()
    }

    pub fn solver(&self) -> Result<Solver> {
        let mut solver = Solver::new(self.engine);
        if let Some(step) = self.full_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "full_step must be positive, got {step}"
                )));
            }
            solver.full_step = step;
        }
        Ok(solver)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        self.sweep
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("config has no sweep section".into()))?
            .grid()
    }

    pub fn doppler(&self) -> Result<DopplerConfig> {
        self.doppler
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("config has no doppler section".into()))?
            .build()
    }

    pub fn table_setup(&self) -> Result<TableSetup> {
        Ok(TableSetup {
            mol: self.molecule()?,
            probe: self.drive.omega21,
            dipole_ratio: self.medium.dipole_ratio,
            solver: self.solver()?,
        })
    }

    pub fn calibration_points(&self) -> usize {
        self.calibration_points
            .unwrap_or(spectra::DEFAULT_CURVE_SAMPLES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"{
        "molecule": {"gamma31_pop": 1, "gamma21_pop": 1, "gamma32_pop": 1},
        "drive": {"omega21": 0.1, "omega31": 0.1, "omega32": 10, "theta": 0},
        "medium": {"p_plus": 0.75, "zeta": 0.2, "dipole_ratio": 1},
        "sweep": {"delta_min": -10, "delta_max": 10, "points": 401},
        "engine": "full"
    }"#;

    #[test]
    fn parses_scenario() {
        let c = Config::from_json(FIG3).unwrap();
        assert_eq!(c.molecule().unwrap(), MoleculeParams::reference());
        assert_eq!(c.engine, Engine::Full);
        assert!((c.medium().unwrap().dp() - 0.5).abs() < 1e-15);
        let grid = c.grid().unwrap();
        assert_eq!((grid.len(), grid[0], grid[400]), (401, -10.0, 10.0));
        assert!(c.doppler().is_err());
        assert_eq!(c.calibration_points(), 41);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let typo = FIG3.replace("\"zeta\"", "\"zetta\"");
        assert!(Config::from_json(&typo).unwrap_err().is_config());
        let bad = FIG3.replace("\"p_plus\": 0.75", "\"p_plus\": 1.5");
        assert!(Config::from_json(&bad).unwrap().medium().is_err());
        let bad_engine = FIG3.replace("\"full\"", "\"exact\"");
        assert!(Config::from_json(&bad_engine).is_err());
    }

    #[test]
    fn doppler_defaults() {
        let text = FIG3.replace(
            "\"engine\": \"full\"",
            "\"engine\": \"linear\", \"doppler\": {\"k21_ud\": 2}",
        );
        let d = Config::from_json(&text).unwrap().doppler().unwrap();
        assert_eq!((d.k21_ud, d.k32_ud, d.nodes), (2.0, 2.0, 512));
        let wide = text.replace("\"k21_ud\": 2", "\"k21_ud\": 5");
        let d = Config::from_json(&wide).unwrap().doppler().unwrap();
        assert_eq!(d.nodes, 4096);
        let inconsistent = FIG3.replace(
            "\"engine\": \"full\"",
            "\"doppler\": {\"k21_ud\": 2, \"k32_ud\": 1, \"k31_ud\": 2}",
        );
        assert!(Config::from_json(&inconsistent).unwrap().doppler().is_err());
    }
}
