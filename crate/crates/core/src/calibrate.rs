//! End-to-end calibration of a [`Profile`] against a set of anchors.
//!
//! The stages run bottom-up, each fixing parameters the next one relies on:
//!
//! 1. leakage prefactors and the subthreshold/junction split (nominal-cell
//!    retention plus the warm worst-cell retention),
//! 2. cell mismatch (retention spread at each temperature),
//! 3. supply exponents (low-supply retention and spread),
//! 4. chip-to-chip scale, write-bitline disturb gain,
//! 5. access, readout and power constants (closed form),
//! 6. CIM constants against the bundled ResNet-18 workload.
//!
//! Fitting uses the closed-form retention solver; the residual report is
//! produced afterwards with the profile's own solver.

use std::collections::HashMap;

use serde::Deserialize;

use crate::array::{
    calibrate_chip_sigma, calibrate_variability, chip_ensemble, sample_array, ArrayConfig,
    RetentionMap, VariabilityTargets,
};
use crate::cell::{retention_time_with, BitCellConfig, RetentionSolver, Topology};
use crate::cim::{cim_energy, resnet18, CimReport, CrossTemperature, WorkloadSpec};
use crate::device::{
    calibrate_device_with, CalibrationTargets, DeviceParams, RetentionAnchor,
    ThermalOperatingPoint,
};
use crate::dvs::{default_grid, optimal_vdd, vdd_sweep, Objective};
use crate::error::{Error, Result};
use crate::profile::{ErrorKind, Models, Profile, Residual};
use crate::refresh::{
    dynamic_power, energy_budget, nominal_activity, retention_power, PowerModel, RefreshPolicy,
};

pub const TARGETS_SCHEMA: &str = "cryo-edram-targets/1";
pub const DEFAULT_TARGETS_TOML: &str = include_str!("../data/anchors.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub key: String,
    pub temperature_k: Option<f64>,
    pub vdd_v: Option<f64>,
    pub v_sn_v: Option<f64>,
    pub chips: Option<u32>,
    pub value: f64,
    #[serde(default)]
    pub unit: String,
    #[serde(default = "default_kind")]
    pub kind: String,
    pub tolerance: f64,
    /// Compared after calibration but not fitted.
    #[serde(default)]
    pub check: bool,
    #[serde(default)]
    pub source: String,
}

fn default_kind() -> String {
    "rel".into()
}

impl Anchor {
    fn error_kind(&self) -> Result<ErrorKind> {
        match self.kind.as_str() {
            "rel" => Ok(ErrorKind::Relative),
            "abs" => Ok(ErrorKind::Absolute),
            other => Err(Error::Validation(format!(
                "anchor '{}': kind must be \"rel\" or \"abs\", got \"{other}\"",
                self.key
            ))),
        }
    }

    fn label(&self) -> String {
        let mut s = self.key.clone();
        if let Some(t) = self.temperature_k {
            s += &format!("@{t}K");
        }
        if let Some(v) = self.vdd_v {
            s += &format!("/{v}V");
        }
        if let Some(v) = self.v_sn_v {
            s += &format!("/vsn={v}V");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTargets {
    schema: String,
    #[serde(default)]
    anchor: Vec<Anchor>,
}

/// A parsed anchors file.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub anchors: Vec<Anchor>,
}

const KNOWN_KEYS: &[&str] = &[
    "mean_retention",
    "retention_cv",
    "retention_std",
    "min_retention",
    "std_ratio",
    "chip_mean_spread",
    "wbl_bias_ratio",
    "write_energy_ratio_n",
    "write_delay_ratio_n",
    "write_energy_ratio_p",
    "write_delay_ratio_p",
    "read_energy_ratio_1t",
    "read_delay_ratio_1t",
    "read_delay",
    "readout_edp_ratio",
    "retention_power",
    "retention_power_saving",
    "retention_power_ratio",
    "dynamic_power",
    "dynamic_power_saving",
    "dvs_optimum_vdd",
    "tops_per_watt",
    "refresh_fraction",
    "frame_rate_ratio",
    "equal_time_energy_ratio",
    "efficiency_ratio",
];

fn same(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|x| (x - b).abs() < 1e-9)
}

impl TargetSet {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawTargets = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if raw.schema != TARGETS_SCHEMA {
            return Err(Error::Parse(format!(
                "unsupported targets schema '{}' (expected '{TARGETS_SCHEMA}')",
                raw.schema
            )));
        }
        for a in &raw.anchor {
            if !KNOWN_KEYS.contains(&a.key.as_str()) {
                return Err(Error::Validation(format!("unknown anchor key '{}'", a.key)));
            }
            a.error_kind()?;
            if !a.value.is_finite() || !(a.tolerance >= 0.0) {
                return Err(Error::Validation(format!(
                    "anchor '{}': value and tolerance must be finite, tolerance >= 0",
                    a.label()
                )));
            }
        }
        Ok(Self { anchors: raw.anchor })
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(DEFAULT_TARGETS_TOML).expect("bundled anchors parse")
    }

    fn fitted(&self, key: &str) -> impl Iterator<Item = &Anchor> {
        let key = key.to_string();
        self.anchors.iter().filter(move |a| a.key == key && !a.check)
    }

    fn find(&self, key: &str, t: Option<f64>, vdd: Option<f64>) -> Option<&Anchor> {
        self.fitted(key).find(|a| {
            t.is_none_or(|t| same(a.temperature_k, t)) && vdd.is_none_or(|v| same(a.vdd_v, v))
        })
    }
}

/// Everything needed to compute an anchored quantity from a profile.
struct Evaluator<'a> {
    cfg: ArrayConfig,
    models: Models,
    workload: &'a WorkloadSpec,
    maps: HashMap<(u64, u64), RetentionMap>,
    cim: Option<CrossTemperature>,
}

impl<'a> Evaluator<'a> {
    fn new(cfg: ArrayConfig, models: Models, workload: &'a WorkloadSpec) -> Self {
        Self {
            cfg,
            models,
            workload,
            maps: HashMap::new(),
            cim: None,
        }
    }

    fn vnom(&self) -> f64 {
        self.cfg.dev.vdd_nominal
    }

    fn map(&mut self, t: f64, vdd: f64) -> Result<&RetentionMap> {
        let key = (t.to_bits(), vdd.to_bits());
        if !self.maps.contains_key(&key) {
            let op = ThermalOperatingPoint::new(t, vdd)?;
            let m = sample_array(&self.cfg, &op)?;
            self.maps.insert(key, m);
        }
        Ok(&self.maps[&key])
    }

    fn nominal_retention(&self, t: f64, vdd: f64) -> Result<f64> {
        let op = ThermalOperatingPoint::new(t, vdd)?;
        Ok(retention_time_with(&self.cfg.cell, &self.cfg.dev, &op, self.cfg.solver)?.seconds_or_inf())
    }

    fn retention_power(&mut self, t: f64, vdd: f64) -> Result<f64> {
        let t_min = self.map(t, vdd)?.min;
        let op = ThermalOperatingPoint::new(t, vdd)?;
        let b = energy_budget(&self.cfg, &self.models.power, &self.models.access, &op, t_min)?;
        retention_power(&b, t_min)
    }

    fn dynamic_power(&self, t: f64, vdd: f64) -> Result<f64> {
        let f = nominal_activity(&self.cfg, &self.models.access, t)?;
        let op = ThermalOperatingPoint::new(t, vdd)?;
        dynamic_power(&self.cfg, &self.models.power, &op, f)
    }

    fn cim_report(&mut self, t: f64) -> Result<CimReport> {
        let vnom = self.vnom();
        let period = self.map(t, vnom)?.min;
        let op = ThermalOperatingPoint::new(t, vnom)?;
        let policy = RefreshPolicy::new(period, crate::refresh::RefreshMode::FullYield)?;
        cim_energy(self.workload, &self.cfg, &self.models, &op, &policy)
    }

    fn cross(&mut self) -> Result<CrossTemperature> {
        if let Some(c) = self.cim {
            return Ok(c);
        }
        let room = self.cim_report(crate::device::T_ROOM)?;
        let cryo = self.cim_report(crate::device::T_CRYO)?;
        let idle = room.n_arrays as f64 * self.models.cim.idle_power_per_array;
        let c = CrossTemperature::from_reports(room, cryo, idle);
        self.cim = Some(c);
        Ok(c)
    }

    fn access_ratio(&self, a: &Anchor) -> Result<f64> {
        let t = a.temperature_k.unwrap_or(10.0);
        let op = ThermalOperatingPoint::new(t, self.vnom())?;
        let acc = &self.models.access;
        let dev = &self.cfg.dev;
        let w = |topo| acc.write_access(&BitCellConfig::with_topology(topo), dev, &op);
        let r = |topo| acc.read_access(&BitCellConfig::with_topology(topo), dev, &op, true);
        Ok(match a.key.as_str() {
            "write_energy_ratio_n" => w(Topology::NWrite)?.energy / w(Topology::TgWrite2tnRead)?.energy,
            "write_delay_ratio_n" => w(Topology::NWrite)?.delay / w(Topology::TgWrite2tnRead)?.delay,
            "write_energy_ratio_p" => w(Topology::PWrite)?.energy / w(Topology::TgWrite2tnRead)?.energy,
            "write_delay_ratio_p" => w(Topology::PWrite)?.delay / w(Topology::TgWrite2tnRead)?.delay,
            "read_energy_ratio_1t" => r(Topology::Read1t)?.energy / r(Topology::Read2tn)?.energy,
            "read_delay_ratio_1t" => r(Topology::Read1t)?.delay / r(Topology::Read2tn)?.delay,
            _ => unreachable!(),
        })
    }

    fn wbl_ratio(&self, t: f64) -> Result<f64> {
        wbl_ratio(&self.cfg.cell, &self.cfg.dev, t, self.cfg.solver)
    }

    fn edp_ratio(&self, t: f64, v_sn: f64) -> Result<f64> {
        let op = ThermalOperatingPoint::new(t, self.vnom())?;
        let r = &self.models.readout;
        let dev = &self.cfg.dev;
        Ok(r.readout_edp(dev, crate::cell::ReadoutStructure::Inverter, v_sn, &op)?
            / r.readout_edp(dev, crate::cell::ReadoutStructure::SenseAmp, v_sn, &op)?)
    }

    /// Value of the quantity an anchor refers to.
    fn value(&mut self, a: &Anchor) -> Result<f64> {
        let vnom = self.vnom();
        let t = a.temperature_k.unwrap_or(crate::device::T_ROOM);
        let vdd = a.vdd_v.unwrap_or(vnom);
        Ok(match a.key.as_str() {
            "mean_retention" if same(Some(vdd), vnom) => self.nominal_retention(t, vdd)?,
            "mean_retention" => self.map(t, vdd)?.mean,
            "retention_cv" => self.map(t, vnom)?.cv,
            "retention_std" => self.map(t, vnom)?.std,
            "min_retention" => self.map(t, vnom)?.min,
            "std_ratio" => {
                let hi = self.map(t, vnom)?.std;
                hi / self.map(t, vdd)?.std
            }
            "chip_mean_spread" => {
                let op = ThermalOperatingPoint::new(t, vnom)?;
                let e = chip_ensemble(&self.cfg, &op, a.chips.unwrap_or(6))?;
                let lo = e.iter().map(|c| c.mean_rel).fold(f64::INFINITY, f64::min);
                let hi = e.iter().map(|c| c.mean_rel).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            }
            "wbl_bias_ratio" => self.wbl_ratio(t)?,
            k if k.starts_with("write_") || k.starts_with("read_energy") || k == "read_delay_ratio_1t" => {
                self.access_ratio(a)?
            }
            "read_delay" => {
                let op = ThermalOperatingPoint::new(t, vdd)?;
                self.models
                    .access
                    .read_access(&self.cfg.cell, &self.cfg.dev, &op, true)?
                    .delay
            }
            "readout_edp_ratio" => self.edp_ratio(t, a.v_sn_v.unwrap_or(vnom))?,
            "retention_power" => {
                let p = self.retention_power(t, vdd)?;
                if a.unit == "W/Kb" {
                    p / (self.cfg.n_cells() as f64 / 1024.0)
                } else {
                    p
                }
            }
            "retention_power_saving" => 1.0 - self.retention_power(t, vdd)? / self.retention_power(t, vnom)?,
            "retention_power_ratio" => {
                self.retention_power(crate::device::T_ROOM, vnom)?
                    / self.retention_power(crate::device::T_CRYO, vnom)?
            }
            "dynamic_power" => self.dynamic_power(t, vdd)?,
            "dynamic_power_saving" => 1.0 - self.dynamic_power(t, vdd)? / self.dynamic_power(t, vnom)?,
            "dvs_optimum_vdd" => {
                let pts = vdd_sweep(&self.cfg, &self.models, t, &default_grid())?;
                optimal_vdd(&pts, Objective::MinRetentionPower)?.vdd
            }
            "tops_per_watt" => self.cim_report(t)?.tops_per_watt,
            "refresh_fraction" => self.cim_report(t)?.refresh_fraction,
            "frame_rate_ratio" => self.cross()?.frame_rate_ratio,
            "equal_time_energy_ratio" => self.cross()?.equal_time_energy_ratio,
            "efficiency_ratio" => self.cross()?.efficiency_ratio,
            other => return Err(Error::Validation(format!("unknown anchor key '{other}'"))),
        })
    }
}

fn wbl_ratio(cell: &BitCellConfig, dev: &DeviceParams, t: f64, solver: RetentionSolver) -> Result<f64> {
    let op = ThermalOperatingPoint::new(t, dev.vdd_nominal)?;
    let at = |b: f64| -> Result<f64> {
        let c = BitCellConfig { wbl_bias: b, ..*cell };
        Ok(retention_time_with(&c, dev, &op, solver)?.seconds_or_inf())
    };
    Ok(at(0.0)? / at(op.vdd)?)
}

/// Evaluate every anchor against a profile.
pub fn residual_report(profile: &Profile, targets: &TargetSet) -> Result<Vec<Residual>> {
    let workload = resnet18();
    let mut ev = Evaluator::new(profile.array_config(), profile.models(), &workload);
    targets
        .anchors
        .iter()
        .map(|a| {
            let mut target = a.value;
            if a.key == "retention_power" && a.unit == "W/Kb" {
                target = a.value;
            }
            let v = ev.value(a)?;
            Ok(Residual::new(
                a.label(),
                a.unit.clone(),
                target,
                v,
                a.error_kind()?,
                a.tolerance,
                !a.check,
            ))
        })
        .collect()
}

fn bisect(mut lo: f64, mut hi: f64, iters: usize, mut go_up: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if go_up(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn log_bisect(lo: f64, hi: f64, iters: usize, mut go_up: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    Ok(bisect(lo.ln(), hi.ln(), iters, |x| go_up(x.exp()))?.exp())
}

/// Calibrate a profile against `targets` and attach the residual report.
pub fn calibrate_profile(targets: &TargetSet) -> Result<Profile> {
    let mut profile = Profile::default();
    let vnom = profile.device.vdd_nominal;
    let cell = profile.cell;
    let mut defaulted = Vec::new();
    let mut notes = Vec::new();

    // Stage 1-2: device and mismatch.
    let mut device_anchors: Vec<RetentionAnchor> = targets
        .fitted("mean_retention")
        .filter(|a| same(a.vdd_v, vnom) || a.vdd_v.is_none())
        .filter_map(|a| {
            a.temperature_k.map(|t| RetentionAnchor {
                temperature: t,
                vdd: vnom,
                retention: a.value,
            })
        })
        .collect();
    device_anchors.sort_by(|a, b| b.temperature.total_cmp(&a.temperature));
    if device_anchors.is_empty() {
        return Err(Error::Validation(
            "targets need at least one mean_retention anchor at the nominal supply".into(),
        ));
    }
    let warm_t = device_anchors[0].temperature;
    let cold_t = device_anchors.last().unwrap().temperature;
    let two = device_anchors.len() > 1;
    if !two {
        defaulted.push("device.i_floor_a (held at 0: single retention anchor)".to_string());
    }

    let warm_op = ThermalOperatingPoint::new(warm_t, vnom)?;
    let cold_op = ThermalOperatingPoint::new(cold_t, vnom)?;
    let cv_warm = targets.find("retention_cv", Some(warm_t), None).map(|a| a.value);
    let cv_cold = if two {
        targets.find("retention_cv", Some(cold_t), None).map(|a| a.value)
    } else {
        None
    };
    let min_warm = targets.find("min_retention", Some(warm_t), None).map(|a| a.value);

    let mut base_cfg = ArrayConfig {
        cell,
        solver: RetentionSolver::Analytic,
        ..ArrayConfig::default()
    };
    let fit_device = |share: f64| -> Result<DeviceParams> {
        let mut ct = CalibrationTargets::new(device_anchors.clone());
        ct.cell = cell;
        ct.subthreshold_share = share;
        calibrate_device_with(&ct, RetentionSolver::Analytic)
    };
    let stage_a = |share: f64, cfg: &ArrayConfig| -> Result<(ArrayConfig, f64)> {
        let dev = fit_device(share)?;
        let mut c = ArrayConfig { dev, ..*cfg };
        let mut min = f64::NAN;
        if let Some(cv) = cv_warm {
            let fit = calibrate_variability(
                &c,
                &VariabilityTargets {
                    cv_warm: Some((warm_op, cv)),
                    cv_cold: None,
                },
            )?;
            c.sigma_vth_mismatch = fit.sigma_vth_mismatch;
            min = sample_array(&c, &warm_op)?.min;
        }
        Ok((c, min))
    };

    let default_share = CalibrationTargets::new(vec![]).subthreshold_share;
    let share = match (min_warm, cv_warm) {
        (Some(target), Some(_)) => {
            let (lo, hi) = (0.05, 1.0);
            let min_lo = stage_a(lo, &base_cfg)?.1;
            let min_hi = stage_a(hi, &base_cfg)?.1;
            if target <= min_lo {
                notes.push(format!(
                    "worst-cell retention target {target:.4e} s is below the reachable range; \
                     subthreshold share pinned at {lo}"
                ));
                lo
            } else if target >= min_hi {
                notes.push(format!(
                    "worst-cell retention target {target:.4e} s is above the reachable range; \
                     subthreshold share pinned at {hi}"
                ));
                hi
            } else {
                bisect(lo, hi, 24, |p| Ok(stage_a(p, &base_cfg)?.1 < target))?
            }
        }
        _ => {
            defaulted.push(format!("subthreshold share ({default_share})"));
            default_share
        }
    };
    let (cfg_a, _) = stage_a(share, &base_cfg)?;
    base_cfg = cfg_a;
    if cv_warm.is_none() {
        defaulted.push("array.sigma_vth_mismatch_v".into());
    }
    if let Some(cv) = cv_cold {
        let fit = calibrate_variability(
            &base_cfg,
            &VariabilityTargets {
                cv_warm: None,
                cv_cold: Some((cold_op, cv)),
            },
        )?;
        base_cfg.sigma_floor_jitter = fit.sigma_floor_jitter;
    } else {
        defaulted.push("array.sigma_floor_jitter".into());
    }
    notes.push(format!("subthreshold share of warm leakage: {share:.6}"));

    // Stage 3: supply exponents.
    let mean_at = |cfg: &ArrayConfig, t: f64, v: f64| -> Result<f64> {
        Ok(sample_array(cfg, &ThermalOperatingPoint::new(t, v)?)?.mean)
    };
    let low_cold = targets
        .fitted("mean_retention")
        .find(|a| same(a.temperature_k, cold_t) && a.vdd_v.is_some_and(|v| !same(Some(v), vnom)))
        .cloned();
    let low_warm = targets
        .fitted("mean_retention")
        .find(|a| same(a.temperature_k, warm_t) && a.vdd_v.is_some_and(|v| !same(Some(v), vnom)))
        .cloned();
    if let (true, Some(a)) = (two, &low_cold) {
        let v = a.vdd_v.unwrap();
        let mut c = base_cfg;
        let g = bisect(-0.9, 10.0, 50, |g| {
            c.dev.vdd_exp_floor = g;
            Ok(mean_at(&c, cold_t, v)? > a.value)
        })?;
        base_cfg.dev.vdd_exp_floor = g;
    } else {
        defaulted.push("device.vdd_exp_floor".into());
    }
    if let Some(a) = &low_warm {
        let v = a.vdd_v.unwrap();
        let ratio = targets.find("std_ratio", Some(warm_t), Some(v)).map(|r| r.value);
        let fit_mean = |d: f64, cfg: &ArrayConfig| -> Result<ArrayConfig> {
            let mut c = *cfg;
            let g = bisect(-0.9, 15.0, 40, |g| {
                c.dev.vdd_exp_junction = g;
                c.dev.vdd_exp_subthreshold = g + d;
                Ok(mean_at(&c, warm_t, v)? > a.value)
            })?;
            c.dev.vdd_exp_junction = g;
            c.dev.vdd_exp_subthreshold = g + d;
            Ok(c)
        };
        base_cfg = match ratio {
            Some(target) => {
                let std_hi = sample_array(&base_cfg, &warm_op)?.std;
                let cfg0 = base_cfg;
                let std_ratio = |d: f64| -> Result<f64> {
                    let c = fit_mean(d, &cfg0)?;
                    Ok(std_hi / sample_array(&c, &ThermalOperatingPoint::new(warm_t, v)?)?.std)
                };
                let d = bisect(-6.0, 6.0, 30, |d| Ok(std_ratio(d)? > target))?;
                fit_mean(d, &cfg0)?
            }
            None => {
                defaulted.push("split of supply exponents between subthreshold and junction".into());
                fit_mean(0.0, &base_cfg)?
            }
        };
    } else {
        defaulted.push("device.vdd_exp_subthreshold".into());
        defaulted.push("device.vdd_exp_junction".into());
    }

    // Stage 4: chip scale and write-bitline disturb.
    if let Some(a) = targets.find("chip_mean_spread", Some(warm_t), None) {
        base_cfg.chip_leak_scale_sigma =
            calibrate_chip_sigma(&base_cfg, &warm_op, a.chips.unwrap_or(6), a.value)?;
    } else {
        defaulted.push("array.chip_leak_scale_sigma".into());
    }
    if let Some(a) = targets.find("wbl_bias_ratio", None, None) {
        let t = a.temperature_k.unwrap_or(cold_t);
        let mut c = base_cfg.cell;
        let k = bisect(0.0, 100.0, 60, |k| {
            c.wbl_disturb_gain = k;
            Ok(wbl_ratio(&c, &base_cfg.dev, t, RetentionSolver::Analytic)? < a.value)
        })?;
        base_cfg.cell.wbl_disturb_gain = k;
    } else {
        defaulted.push("cell.wbl_disturb_gain".into());
    }

    // Stage 5: access, readout, power.
    let dev = base_cfg.dev;
    let mut models = Models::default();
    fit_access(&mut models, &dev, targets, vnom, &mut defaulted)?;
    fit_readout(&mut models, &dev, targets, vnom, &mut defaulted)?;
    fit_power(&mut models, &base_cfg, targets, vnom, &mut defaulted)?;

    // Stage 6: CIM.
    let workload = resnet18();
    fit_cim(&mut models, &base_cfg, &workload, targets, &mut defaulted)?;

    let final_cfg = ArrayConfig {
        solver: RetentionSolver::Adaptive,
        ..base_cfg
    };
    profile.set_array(&final_cfg);
    profile.access = models.access;
    profile.readout = models.readout;
    profile.power = models.power;
    profile.cim = models.cim;
    profile.defaulted = defaulted;
    profile.notes = notes;
    profile.residuals = residual_report(&profile, targets)?;
    Ok(profile)
}

fn fit_access(
    models: &mut Models,
    dev: &DeviceParams,
    targets: &TargetSet,
    vnom: f64,
    defaulted: &mut Vec<String>,
) -> Result<()> {
    let acc = &mut models.access;
    let cell = BitCellConfig::default();
    let c = cell.c_sn;

    // Read delay at two temperatures fixes the 2T-NMOS drive and the mobility gain.
    let mut delays: Vec<(f64, f64)> = targets
        .fitted("read_delay")
        .filter_map(|a| a.temperature_k.map(|t| (t, a.value)))
        .collect();
    delays.sort_by(|a, b| b.0.total_cmp(&a.0));
    let x = |t: f64| (crate::device::T_ROOM - t.max(crate::device::T_CRYO)) / (crate::device::T_ROOM - crate::device::T_CRYO);
    let ov = |t: f64| vnom - dev.vth_unchecked(t);
    if delays.len() >= 2 {
        let (t1, d1) = delays[0];
        let (t2, d2) = delays[delays.len() - 1];
        let r = (ov(t1) / ov(t2)).powf(acc.alpha) * d1 / d2;
        let g = (r - 1.0) / (x(t2) - r * x(t1));
        if !(g > -1.0) || !g.is_finite() {
            return Err(Error::Calibration {
                what: "read delays imply a non-physical mobility change".into(),
                residual: g,
            });
        }
        acc.mobility_gain_cryo = g;
    } else {
        defaulted.push("access.mobility_gain_cryo".into());
    }
    if let Some(&(t1, d1)) = delays.first() {
        acc.read_drive[0] = acc.c_rbl * acc.sense_swing / (d1 * ov(t1).powf(acc.alpha) * acc.mobility(t1));
    } else {
        defaulted.push("access.read_drive_a".into());
    }
    match targets.find("read_delay_ratio_1t", None, None) {
        Some(a) => acc.read_drive[1] = acc.read_drive[0] / a.value,
        None => defaulted.push("access.read_drive_a[1t]".into()),
    }
    match targets.find("read_energy_ratio_1t", None, None) {
        Some(a) => acc.read_cap_scale[1] = acc.read_cap_scale[0] * a.value,
        None => defaulted.push("access.read_cap_scale[1t]".into()),
    }

    // Write ports: swing relative to the TG's full rail sets the residual ratio.
    for (idx, topo, e_key, d_key) in [
        (1, Topology::NWrite, "write_energy_ratio_n", "write_delay_ratio_n"),
        (2, Topology::PWrite, "write_energy_ratio_p", "write_delay_ratio_p"),
    ] {
        let w = BitCellConfig::with_topology(topo);
        if let Some(a) = targets.find(d_key, None, None) {
            let op = ThermalOperatingPoint::new(a.temperature_k.unwrap_or(10.0), vnom)?;
            let swing = w.v_init(dev, &op) - w.v_zero(dev, &op);
            acc.write_drive[idx] = acc.write_drive[0] * (swing / op.vdd) / a.value;
        } else {
            defaulted.push(format!("access.write_drive_a[{topo:?}]"));
        }
        if let Some(a) = targets.find(e_key, None, None) {
            let op = ThermalOperatingPoint::new(a.temperature_k.unwrap_or(10.0), vnom)?;
            let swing = w.v_init(dev, &op) - w.v_zero(dev, &op);
            let cp = a.value * (c + acc.write_parasitic[0]) - c * swing / op.vdd;
            if !(cp >= 0.0) {
                return Err(Error::Calibration {
                    what: format!("{e_key} needs negative parasitic capacitance"),
                    residual: cp,
                });
            }
            acc.write_parasitic[idx] = cp;
        } else {
            defaulted.push(format!("access.write_parasitic_f[{topo:?}]"));
        }
    }
    Ok(())
}

fn fit_readout(
    models: &mut Models,
    dev: &DeviceParams,
    targets: &TargetSet,
    vnom: f64,
    defaulted: &mut Vec<String>,
) -> Result<()> {
    let pts: Vec<&Anchor> = targets.fitted("readout_edp_ratio").collect();
    if pts.len() < 2 {
        defaulted.push("readout.inv_switch_ratio".into());
        defaulted.push("readout.inv_crowbar_ratio".into());
        return Ok(());
    }
    let r = &mut models.readout;
    let t = pts[0].temperature_k.unwrap_or(crate::device::T_CRYO);
    let op = ThermalOperatingPoint::new(t, vnom)?;
    let g = |a: &Anchor| r.slowdown(dev, a.v_sn_v.unwrap_or(vnom), &op);
    let (g1, g2) = (g(pts[0])?, g(pts[1])?);
    let b = (pts[1].value - pts[0].value) / (g2 - g1);
    let a = pts[0].value - b * g1;
    if !(a > 0.0 && b >= 0.0) {
        return Err(Error::Calibration {
            what: "readout EDP ratios need a positive switching and crowbar split".into(),
            residual: a.min(b),
        });
    }
    r.inv_switch_ratio = a;
    r.inv_crowbar_ratio = b;
    Ok(())
}

/// Retention power decomposed as `kappa * access + leak + m * standby`, each per period.
struct PowerTerms {
    access: f64,
    leak: f64,
    standby: f64,
}

fn power_terms(cfg: &ArrayConfig, models: &Models, t: f64, vdd: f64) -> Result<PowerTerms> {
    let op = ThermalOperatingPoint::new(t, vdd)?;
    let t_min = sample_array(cfg, &op)?.min;
    let bare = PowerModel {
        refresh_overhead: crate::refresh::TempPair { cryo: 1.0, room: 1.0 },
        static_multiplier: 0.0,
        ..models.power
    };
    let b = energy_budget(cfg, &bare, &models.access, &op, t_min)?;
    let unit_static = PowerModel {
        static_multiplier: 1.0,
        ..bare
    };
    let n = cfg.n_cells() as f64;
    Ok(PowerTerms {
        access: (b.e_read + b.e_write) / t_min,
        leak: b.e_leakage / t_min,
        standby: n * vdd * unit_static.static_current(cfg, &op),
    })
}

fn fit_power(
    models: &mut Models,
    cfg: &ArrayConfig,
    targets: &TargetSet,
    vnom: f64,
    defaulted: &mut Vec<String>,
) -> Result<()> {
    let kb = cfg.n_cells() as f64 / 1024.0;
    let watts = |a: &Anchor| if a.unit == "W/Kb" { a.value * kb } else { a.value };
    let mut rp: Vec<&Anchor> = targets
        .fitted("retention_power")
        .filter(|a| a.temperature_k.is_some())
        .collect();
    rp.sort_by(|a, b| a.temperature_k.unwrap().total_cmp(&b.temperature_k.unwrap()));

    // The supply saving fixes the standby multiplier at its temperature.
    let saving = targets.fitted("retention_power_saving").next();
    let mut kappa: Vec<(f64, f64)> = Vec::new();
    if let Some(s) = saving {
        let t = s.temperature_k.unwrap_or(crate::device::T_CRYO);
        let base = rp
            .iter()
            .find(|a| same(a.temperature_k, t))
            .ok_or_else(|| Error::Validation("retention_power_saving needs retention_power at the same temperature".into()))?;
        let p0 = watts(base);
        let hi = power_terms(cfg, models, t, vnom)?;
        let lo = power_terms(cfg, models, t, s.vdd_v.unwrap_or(1.0))?;
        let p1 = (1.0 - s.value) * p0;
        // [hi.access hi.standby; lo.access lo.standby] [k m]^T = [p0 - hi.leak; p1 - lo.leak]
        let det = hi.access * lo.standby - hi.standby * lo.access;
        let r0 = p0 - hi.leak;
        let r1 = p1 - lo.leak;
        let k = (r0 * lo.standby - hi.standby * r1) / det;
        let m = (hi.access * r1 - r0 * lo.access) / det;
        if !(k > 0.0 && m >= 0.0) {
            return Err(Error::Calibration {
                what: format!("retention power anchors at {t} K need kappa = {k:.3e}, standby multiplier = {m:.3e}"),
                residual: k.min(m),
            });
        }
        models.power.static_multiplier = m;
        kappa.push((t, k));
    } else {
        defaulted.push("power.static_multiplier".into());
    }
    for a in &rp {
        let t = a.temperature_k.unwrap();
        if kappa.iter().any(|(tk, _)| (tk - t).abs() < 1e-9) {
            continue;
        }
        let pt = power_terms(cfg, models, t, a.vdd_v.unwrap_or(vnom))?;
        let k = (watts(a) - pt.leak - models.power.static_multiplier * pt.standby) / pt.access;
        if !(k > 0.0) {
            return Err(Error::Calibration {
                what: format!("retention power at {t} K is below the leakage floor"),
                residual: k,
            });
        }
        kappa.push((t, k));
    }
    models.power.refresh_overhead = pair_from(&kappa, models.power.refresh_overhead, "power.refresh_overhead", defaulted);

    // Dynamic power.
    let mut dp: Vec<&Anchor> = targets
        .fitted("dynamic_power")
        .filter(|a| a.temperature_k.is_some())
        .collect();
    dp.sort_by(|a, b| a.temperature_k.unwrap().total_cmp(&b.temperature_k.unwrap()));
    let n = cfg.n_cells() as f64;
    let static_i = |m: &Models, t: f64, v: f64| -> Result<f64> {
        Ok(n * m.power.static_current(cfg, &ThermalOperatingPoint::new(t, v)?))
    };
    let mut energy: Vec<(f64, f64)> = Vec::new();
    if let Some(s) = targets.fitted("dynamic_power_saving").next() {
        let t = s.temperature_k.unwrap_or(crate::device::T_CRYO);
        let base = dp
            .iter()
            .find(|a| same(a.temperature_k, t))
            .ok_or_else(|| Error::Validation("dynamic_power_saving needs dynamic_power at the same temperature".into()))?;
        let v1 = base.vdd_v.unwrap_or(vnom);
        let v2 = s.vdd_v.unwrap_or(1.0);
        let f = nominal_activity(cfg, &models.access, t)?;
        let p1 = base.value;
        let p2 = (1.0 - s.value) * p1;
        // e f (v/vnom)^2 + v Ib = P - v N i_s(v)
        let (a11, a12, b1) = (f * (v1 / vnom).powi(2), v1, p1 - v1 * static_i(models, t, v1)?);
        let (a21, a22, b2) = (f * (v2 / vnom).powi(2), v2, p2 - v2 * static_i(models, t, v2)?);
        let det = a11 * a22 - a12 * a21;
        let e = (b1 * a22 - a12 * b2) / det;
        let ib = (a11 * b2 - b1 * a21) / det;
        if !(e > 0.0 && ib >= 0.0) {
            return Err(Error::Calibration {
                what: format!("dynamic power anchors at {t} K need access energy {e:.3e} J, bias {ib:.3e} A"),
                residual: e.min(ib),
            });
        }
        models.power.bias_current = ib;
        energy.push((t, e));
    } else {
        defaulted.push("power.bias_current_a".into());
    }
    for a in &dp {
        let t = a.temperature_k.unwrap();
        if energy.iter().any(|(te, _)| (te - t).abs() < 1e-9) {
            continue;
        }
        let v = a.vdd_v.unwrap_or(vnom);
        let f = nominal_activity(cfg, &models.access, t)?;
        let e = (a.value - v * (models.power.bias_current + static_i(models, t, v)?)) / (f * (v / vnom).powi(2));
        if !(e > 0.0) {
            return Err(Error::Calibration {
                what: format!("dynamic power at {t} K is below the static floor"),
                residual: e,
            });
        }
        energy.push((t, e));
    }
    models.power.access_energy = pair_from(&energy, models.power.access_energy, "power.access_energy_j", defaulted);
    Ok(())
}

/// Build a temperature pair from fitted points; a single point fills both ends.
fn pair_from(
    pts: &[(f64, f64)],
    default: crate::refresh::TempPair,
    name: &str,
    defaulted: &mut Vec<String>,
) -> crate::refresh::TempPair {
    use crate::refresh::TempPair;
    let mid = 0.5 * (crate::device::T_CRYO + crate::device::T_ROOM);
    let cryo = pts.iter().find(|(t, _)| *t < mid).map(|p| p.1);
    let room = pts.iter().find(|(t, _)| *t >= mid).map(|p| p.1);
    match (cryo, room) {
        (Some(c), Some(r)) => TempPair { cryo: c, room: r },
        (Some(x), None) | (None, Some(x)) => {
            defaulted.push(format!("{name} (one temperature only)"));
            TempPair { cryo: x, room: x }
        }
        (None, None) => {
            defaulted.push(name.to_string());
            default
        }
    }
}

fn fit_cim(
    models: &mut Models,
    cfg: &ArrayConfig,
    workload: &WorkloadSpec,
    targets: &TargetSet,
    defaulted: &mut Vec<String>,
) -> Result<()> {
    use crate::device::{T_CRYO, T_ROOM};
    let vnom = cfg.dev.vdd_nominal;
    let tops = targets.find("tops_per_watt", None, None).map(|a| a.value);
    let frac = targets.find("refresh_fraction", None, None).cloned();
    let frame = targets.find("frame_rate_ratio", None, None).map(|a| a.value);
    let eq = targets.find("equal_time_energy_ratio", None, None).map(|a| a.value);
    if tops.is_none() && frac.is_none() && frame.is_none() && eq.is_none() {
        defaulted.extend(
            ["cim.periphery_speedup", "cim.macs_per_cycle", "cim.e_op_j", "cim.idle_power_per_array_w"]
                .map(String::from),
        );
        return Ok(());
    }

    let room_op = ThermalOperatingPoint::new(T_ROOM, vnom)?;
    let cryo_op = ThermalOperatingPoint::new(T_CRYO, vnom)?;
    let room_policy = RefreshPolicy::full_yield(&sample_array(cfg, &room_op)?);
    let cryo_policy = RefreshPolicy::full_yield(&sample_array(cfg, &cryo_op)?);
    let report = |m: &Models, cold: bool| -> Result<CimReport> {
        if cold {
            cim_energy(workload, cfg, m, &cryo_op, &cryo_policy)
        } else {
            cim_energy(workload, cfg, m, &room_op, &room_policy)
        }
    };

    if let Some(r) = frame {
        let room = report(models, false)?;
        let cryo = report(models, true)?;
        let acc = &models.access;
        let d_room = acc.read_access(&cfg.cell, &cfg.dev, &room_op, true)?.delay;
        let d_cryo = acc.read_access(&cfg.cell, &cfg.dev, &cryo_op, true)?.delay;
        let s = r * (d_cryo / d_room) * (1.0 - room.refresh_stall) / (1.0 - cryo.refresh_stall);
        models.cim.periphery_speedup = crate::refresh::TempPair { cryo: s, room: 1.0 };
    } else {
        defaulted.push("cim.periphery_speedup".into());
    }

    let ops = workload.total_ops();
    // Compute energy per op that lands the cold efficiency on target.
    let solve_e_op = |m: &mut Models| -> Result<()> {
        if let Some(target) = tops {
            m.cim.e_op = 0.0;
            let rest = report(m, true)?.energy_total;
            let e = (ops / (target * 1e12) - rest) / ops;
            if !(e > 0.0) {
                return Err(Error::Calibration {
                    what: "memory and refresh energy alone exceed the efficiency target".into(),
                    residual: e,
                });
            }
            m.cim.e_op = e;
        }
        Ok(())
    };
    match &frac {
        Some(a) if ops > 0.0 => {
            let cold = a.temperature_k.is_some_and(|t| t < 150.0);
            let mut m = *models;
            let mpc = log_bisect(1.0, 1e13, 80, |mpc| {
                m.cim.macs_per_cycle = mpc;
                solve_e_op(&mut m)?;
                Ok(report(&m, cold)?.refresh_fraction > a.value)
            })?;
            models.cim.macs_per_cycle = mpc;
        }
        _ => defaulted.push("cim.macs_per_cycle".into()),
    }
    if tops.is_some() && ops > 0.0 {
        solve_e_op(models)?;
    } else {
        defaulted.push("cim.e_op_j".into());
    }
    match eq {
        Some(r) if ops > 0.0 => {
            let room = report(models, false)?;
            let cryo = report(models, true)?;
            let wait = room.inference_time - cryo.inference_time;
            let p = (room.energy_total / r - cryo.energy_total) / wait;
            if !(p >= 0.0 && wait > 0.0) {
                return Err(Error::Calibration {
                    what: "equal-time energy ratio needs negative idle power".into(),
                    residual: p,
                });
            }
            models.cim.idle_power_per_array = p / room.n_arrays as f64;
        }
        _ => defaulted.push("cim.idle_power_per_array_w".into()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_targets_parse() {
        let t = TargetSet::bundled();
        assert!(t.anchors.len() > 30);
        assert!(t.find("mean_retention", Some(300.0), Some(1.1)).is_some());
    }

    #[test]
    fn unknown_key_rejected() {
        let doc = "schema = \"cryo-edram-targets/1\"\n[[anchor]]\nkey = \"bogus\"\nvalue = 1.0\ntolerance = 0.1\n";
        assert!(matches!(TargetSet::from_toml_str(doc), Err(Error::Validation(_))));
    }

    #[test]
    fn single_anchor_profile_lists_defaults() {
        let doc = "schema = \"cryo-edram-targets/1\"\n[[anchor]]\nkey = \"mean_retention\"\ntemperature_k = 300.0\nvdd_v = 1.1\nvalue = 112.09e-6\ntolerance = 0.01\n";
        let p = calibrate_profile(&TargetSet::from_toml_str(doc).unwrap()).unwrap();
        assert!(p.defaulted.iter().any(|d| d.contains("i_floor")));
        assert_eq!(p.residuals.len(), 1);
        assert!(p.residuals[0].passed());
    }
}
