//! Calibrated parameter sets and their TOML representation.

use serde::{Deserialize, Serialize};

use crate::array::ArrayConfig;
use crate::cell::{AccessModel, BitCellConfig, ReadoutModel, RetentionSolver};
use crate::cim::CimModel;
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::refresh::PowerModel;

pub const PROFILE_SCHEMA: &str = "cryo-edram-profile/1";

/// Everything above the device and cell level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Models {
    pub access: AccessModel,
    pub readout: ReadoutModel,
    pub power: PowerModel,
    pub cim: CimModel,
}

/// Array geometry and variability, without the device and cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySettings {
    pub rows: usize,
    pub cols: usize,
    #[serde(rename = "sigma_vth_mismatch_v")]
    pub sigma_vth_mismatch: f64,
    pub sigma_floor_jitter: f64,
    pub chip_leak_scale_sigma: f64,
    /// Seed the variability was fitted on.
    pub seed: u64,
    pub solver: RetentionSolver,
}

impl Default for ArraySettings {
    fn default() -> Self {
        let a = ArrayConfig::default();
        Self {
            rows: a.rows,
            cols: a.cols,
            sigma_vth_mismatch: a.sigma_vth_mismatch,
            sigma_floor_jitter: a.sigma_floor_jitter,
            chip_leak_scale_sigma: a.chip_leak_scale_sigma,
            seed: a.seed,
            solver: a.solver,
        }
    }
}

/// How a residual is measured against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// `value / target - 1`.
    Relative,
    /// `value - target`.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub name: String,
    pub unit: String,
    pub target: f64,
    pub value: f64,
    pub kind: ErrorKind,
    pub error: f64,
    pub tolerance: f64,
    /// A failing mandatory residual makes calibration fail.
    pub mandatory: bool,
}

impl Residual {
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        target: f64,
        value: f64,
        kind: ErrorKind,
        tolerance: f64,
        mandatory: bool,
    ) -> Self {
        let error = match kind {
            ErrorKind::Relative => value / target - 1.0,
            ErrorKind::Absolute => value - target,
        };
        Self {
            name: name.into(),
            unit: unit.into(),
            target,
            value,
            kind,
            error,
            tolerance,
            mandatory,
        }
    }

    pub fn passed(&self) -> bool {
        self.error.abs() <= self.tolerance
    }
}

/// A complete calibrated parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub schema: String,
    pub tool_version: String,
    pub device: DeviceParams,
    pub cell: BitCellConfig,
    pub array: ArraySettings,
    pub access: AccessModel,
    pub readout: ReadoutModel,
    pub power: PowerModel,
    pub cim: CimModel,
    /// Parameters left at their defaults because no anchor constrained them.
    #[serde(default)]
    pub defaulted: Vec<String>,
    /// Free-form remarks from calibration.
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default, rename = "residual")]
    pub residuals: Vec<Residual>,
}

impl Default for Profile {
    fn default() -> Self {
        let m = Models::default();
        Self {
            schema: PROFILE_SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            device: DeviceParams::default(),
            cell: BitCellConfig::default(),
            array: ArraySettings::default(),
            access: m.access,
            readout: m.readout,
            power: m.power,
            cim: m.cim,
            defaulted: Vec::new(),
            notes: Vec::new(),
            residuals: Vec::new(),
        }
    }
}

impl Profile {
    pub fn array_config(&self) -> ArrayConfig {
        ArrayConfig {
            rows: self.array.rows,
            cols: self.array.cols,
            cell: self.cell,
            dev: self.device,
            sigma_vth_mismatch: self.array.sigma_vth_mismatch,
            sigma_floor_jitter: self.array.sigma_floor_jitter,
            chip_leak_scale_sigma: self.array.chip_leak_scale_sigma,
            seed: self.array.seed,
            solver: self.array.solver,
        }
    }

    /// Array configuration with the variability draws re-keyed by `seed`.
    pub fn array_config_seeded(&self, seed: u64) -> ArrayConfig {
        ArrayConfig {
            seed,
            ..self.array_config()
        }
    }

    pub fn models(&self) -> Models {
        Models {
            access: self.access,
            readout: self.readout,
            power: self.power,
            cim: self.cim,
        }
    }

    pub fn set_array(&mut self, a: &ArrayConfig) {
        self.device = a.dev;
        self.cell = a.cell;
        self.array = ArraySettings {
            rows: a.rows,
            cols: a.cols,
            sigma_vth_mismatch: a.sigma_vth_mismatch,
            sigma_floor_jitter: a.sigma_floor_jitter,
            chip_leak_scale_sigma: a.chip_leak_scale_sigma,
            seed: a.seed,
            solver: a.solver,
        };
    }

    pub fn failed_mandatory(&self) -> Vec<&Residual> {
        self.residuals
            .iter()
            .filter(|r| r.mandatory && !r.passed())
            .collect()
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("profile serialization: {e}")))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let p: Profile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if p.schema != PROFILE_SCHEMA {
            return Err(Error::Parse(format!(
                "unsupported profile schema '{}' (expected '{PROFILE_SCHEMA}')",
                p.schema
            )));
        }
        p.device
            .validate()
            .map_err(|e| Error::Validation(format!("[device] {e}")))?;
        p.array_config()
            .validate()
            .map_err(|e| Error::Validation(format!("[array] {e}")))?;
        Ok(p)
    }
}
