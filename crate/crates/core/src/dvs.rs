//! Supply-voltage sweeps and operating-point selection.

use serde::{Deserialize, Serialize};

use crate::array::{sample_array, ArrayConfig, RetentionMap};
use crate::device::ThermalOperatingPoint;
use crate::error::{Error, Result};
use crate::profile::Models;
use crate::refresh::{
    drps_select, dynamic_power, energy_budget, nominal_activity, retention_power,
};

/// Supply range inside which the calibration anchors sit.
pub const REGIME: (f64, f64) = (0.6, 1.1);

/// 0.6 V to 1.1 V in 0.1 V steps.
pub fn default_grid() -> Vec<f64> {
    (6..=11).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub vdd: f64,
    pub mean_ret: f64,
    pub std_ret: f64,
    pub t_min: f64,
    pub p_retention: f64,
    pub p_dynamic: f64,
    /// The supply lies outside the calibrated 0.6–1.1 V regime.
    pub extrapolated: bool,
}

fn in_regime(vdd: f64) -> bool {
    vdd >= REGIME.0 - 1e-9 && vdd <= REGIME.1 + 1e-9
}

/// Retention power of `map` refreshed every `period` seconds.
pub fn power_at_period(
    cfg: &ArrayConfig,
    models: &Models,
    op: &ThermalOperatingPoint,
    period: f64,
) -> Result<f64> {
    let budget = energy_budget(cfg, &models.power, &models.access, op, period)?;
    retention_power(&budget, period)
}

fn point(
    cfg: &ArrayConfig,
    models: &Models,
    op: &ThermalOperatingPoint,
    map: &RetentionMap,
    activity: f64,
) -> Result<SweepPoint> {
    Ok(SweepPoint {
        vdd: op.vdd,
        mean_ret: map.mean,
        std_ret: map.std,
        t_min: map.min,
        p_retention: power_at_period(cfg, models, op, map.min)?,
        p_dynamic: dynamic_power(cfg, &models.power, op, activity)?,
        extrapolated: !in_regime(op.vdd),
    })
}

/// Sample, summarize and price the array at every supply in `vdds`.
pub fn vdd_sweep(cfg: &ArrayConfig, models: &Models, t: f64, vdds: &[f64]) -> Result<Vec<SweepPoint>> {
    let activity = nominal_activity(cfg, &models.access, t)?;
    vdds.iter()
        .map(|&v| {
            let op = ThermalOperatingPoint::new(t, v)?;
            let map = sample_array(cfg, &op)?;
            point(cfg, models, &op, &map, activity)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    MinRetentionPower,
    MinDynamicPower,
    /// Weighted sum `w_retention * P_ret + w_dynamic * P_dyn`.
    MinTotal { w_retention: f64, w_dynamic: f64 },
}

impl Objective {
    pub fn cost(&self, p: &SweepPoint) -> f64 {
        match *self {
            Objective::MinRetentionPower => p.p_retention,
            Objective::MinDynamicPower => p.p_dynamic,
            Objective::MinTotal {
                w_retention,
                w_dynamic,
            } => w_retention * p.p_retention + w_dynamic * p.p_dynamic,
        }
    }
}

/// Argmin of the objective; equal costs resolve to the lower supply.
pub fn optimal_vdd(points: &[SweepPoint], objective: Objective) -> Result<SweepPoint> {
    let mut best: Option<&SweepPoint> = None;
    for p in points {
        let better = match best {
            None => true,
            Some(b) => {
                let (cp, cb) = (objective.cost(p), objective.cost(b));
                cp < cb || (cp == cb && p.vdd < b.vdd)
            }
        };
        if better {
            best = Some(p);
        }
    }
    best.copied()
        .ok_or_else(|| Error::Usage("cannot pick an operating point from an empty sweep".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointChoice {
    pub vdd: f64,
    pub period: f64,
    pub p_retention: f64,
}

/// Per supply, stretch the refresh period to the error budget and reprice;
/// return the cheapest supply.
pub fn joint_dvs_drps(
    cfg: &ArrayConfig,
    models: &Models,
    t: f64,
    vdds: &[f64],
    max_error: f64,
) -> Result<JointChoice> {
    let mut best: Option<JointChoice> = None;
    for &v in vdds {
        let op = ThermalOperatingPoint::new(t, v)?;
        let map = sample_array(cfg, &op)?;
        let period = drps_select(&map, max_error)?;
        let p = power_at_period(cfg, models, &op, period)?;
        let c = JointChoice {
            vdd: v,
            period,
            p_retention: p,
        };
        best = match best {
            Some(b) if b.p_retention < p || (b.p_retention == p && b.vdd <= v) => Some(b),
            _ => Some(c),
        };
    }
    best.ok_or_else(|| Error::Usage("empty supply grid".into()))
}
