//! Refresh periods, error rates and the retention/dynamic power model.
//!
//! Retention power is the energy of one full-array refresh (read and write
//! back every cell, plus everything that leaks while waiting) divided by the
//! refresh period.

use serde::{Deserialize, Serialize};

use crate::array::{phi, ArrayConfig, RetentionMap};
use crate::cell::{node_voltage_after, AccessModel};
use crate::device::{CellMismatch, ThermalOperatingPoint, T_CRYO, T_ROOM};
use crate::error::{check_positive, check_range, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RefreshMode {
    FullYield,
    Drps { max_error_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefreshPolicy {
    /// s.
    pub period: f64,
    pub mode: RefreshMode,
}

impl RefreshPolicy {
    pub fn new(period: f64, mode: RefreshMode) -> Result<Self> {
        check_positive("period", period)?;
        if let RefreshMode::Drps { max_error_rate } = mode {
            check_range("max_error_rate", max_error_rate, 0.0, 1.0)?;
        }
        Ok(Self { period, mode })
    }

    /// Full-yield policy at the map's minimum retention.
    pub fn full_yield(map: &RetentionMap) -> Self {
        Self {
            period: map.min,
            mode: RefreshMode::FullYield,
        }
    }

    /// Period chosen by [`drps_select`] on `map`.
    pub fn drps(map: &RetentionMap, max_error_rate: f64) -> Result<Self> {
        Ok(Self {
            period: drps_select(map, max_error_rate)?,
            mode: RefreshMode::Drps { max_error_rate },
        })
    }
}

/// Energy of one full-array refresh cycle, J.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBudget {
    pub e_read: f64,
    pub e_write: f64,
    pub e_leakage: f64,
}

impl EnergyBudget {
    pub fn total(&self) -> f64 {
        self.e_read + self.e_write + self.e_leakage
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            e_read: self.e_read * k,
            e_write: self.e_write * k,
            e_leakage: self.e_leakage * k,
        }
    }
}

/// A quantity calibrated at 4.2 K and 300 K and interpolated linearly in
/// temperature between them (held constant outside).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempPair {
    pub cryo: f64,
    pub room: f64,
}

impl TempPair {
    pub fn at(&self, t: f64) -> f64 {
        let x = ((t - T_CRYO) / (T_ROOM - T_CRYO)).clamp(0.0, 1.0);
        self.cryo + (self.room - self.cryo) * x
    }
}

/// Calibrated constants behind retention and dynamic power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// Refresh energy per cell over the bare cell read + write energy
    /// (wordline drivers, sense amplifiers, control).
    pub refresh_overhead: TempPair,
    /// Standby current of a cell's read path relative to its storage-node
    /// leakage at nominal supply.
    pub static_multiplier: f64,
    /// Drain-induced barrier lowering coefficient of that standby current, V/V.
    pub static_dibl: f64,
    /// Array energy per access at nominal supply, J.
    #[serde(rename = "access_energy_j")]
    pub access_energy: TempPair,
    /// Constant periphery bias current, A.
    #[serde(rename = "bias_current_a")]
    pub bias_current: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self {
            refresh_overhead: TempPair {
                cryo: 1.0,
                room: 1.0,
            },
            static_multiplier: 0.0,
            static_dibl: 0.15,
            access_energy: TempPair {
                cryo: 5.0e-14,
                room: 5.0e-14,
            },
            bias_current: 0.0,
        }
    }
}

impl PowerModel {
    /// Standby current of one cell outside the storage node, A.
    pub fn static_current(&self, array: &ArrayConfig, op: &ThermalOperatingPoint) -> f64 {
        if self.static_multiplier == 0.0 {
            return 0.0;
        }
        let dev = &array.dev;
        let nominal = ThermalOperatingPoint {
            temperature: op.temperature,
            vdd: dev.vdd_nominal,
        };
        let i_nom = dev
            .cell_leakage(&nominal, &CellMismatch::default())
            .current(dev.vdd_nominal);
        let ss = dev.ss_unchecked(op.temperature);
        self.static_multiplier
            * i_nom
            * 10f64.powf(self.static_dibl * (op.vdd - dev.vdd_nominal) / ss)
    }
}

/// Full-yield refresh period: `guard * min(map)`.
pub fn min_refresh_period(map: &RetentionMap, guard: f64) -> Result<f64> {
    if !(guard > 0.0 && guard <= 1.0) {
        return Err(Error::domain("guard", guard, "must lie in (0, 1]"));
    }
    Ok(guard * map.min)
}

/// Fraction of cells whose retention is shorter than `period`.
pub fn error_rate(map: &RetentionMap, period: f64) -> f64 {
    let failing = map.retention.iter().filter(|&&r| r < period).count();
    failing as f64 / map.len() as f64
}

/// Error rate for many periods at once, against a sorted copy of the map.
pub fn error_rate_curve(map: &RetentionMap, periods: &[f64]) -> Vec<f64> {
    let sorted = map.sorted();
    let n = sorted.len() as f64;
    periods
        .iter()
        .map(|&p| sorted.partition_point(|&r| r < p) as f64 / n)
        .collect()
}

/// Gaussian closed form `Phi((period - mean) / std)`.
pub fn error_rate_analytic(mean: f64, std: f64, period: f64) -> Result<f64> {
    check_positive("std", std)?;
    Ok(phi((period - mean) / std))
}

/// `(e_read + e_write + e_leakage) / t_min`.
pub fn retention_power(budget: &EnergyBudget, t_min: f64) -> Result<f64> {
    check_positive("t_min", t_min)?;
    Ok(budget.total() / t_min)
}

/// Energy to refresh every cell of chip 0 once per `t_min`.
///
/// Read and write energies come from the access model, scaled by the
/// calibrated refresh overhead. Leakage energy is the charge each storage node
/// loses over `t_min`, `C (V0^2 - V(t_min)^2) / 2`, plus the standby current of
/// the read path.
pub fn energy_budget(
    array: &ArrayConfig,
    power: &PowerModel,
    access: &AccessModel,
    op: &ThermalOperatingPoint,
    t_min: f64,
) -> Result<EnergyBudget> {
    if array.n_cells() == 0 {
        return Ok(EnergyBudget::default());
    }
    array.validate()?;
    op.validate()?;
    check_positive("t_min", t_min)?;
    let n = array.n_cells() as f64;
    let cell = &array.cell;
    let dev = &array.dev;
    let kappa = power.refresh_overhead.at(op.temperature);
    let read1 = access.read_access(cell, dev, op, true)?.energy;
    let read0 = access.read_access(cell, dev, op, false)?.energy;
    let write = access.write_access(cell, dev, op)?.energy;

    let v0 = cell.v_init(dev, op);
    let c = cell.c_sn;
    let mut node = 0.0;
    for row in 0..array.rows {
        for col in 0..array.cols {
            let m = array.mismatch(0, 1.0, row, col);
            let leak = dev.cell_leakage(op, &m);
            let v = node_voltage_after(c, v0, &leak, t_min);
            node += 0.5 * c * (v0 * v0 - v * v);
        }
    }
    let standby = n * op.vdd * power.static_current(array, op) * t_min;
    Ok(EnergyBudget {
        e_read: n * kappa * 0.5 * (read1 + read0),
        e_write: n * kappa * write,
        e_leakage: node + standby,
    })
}

/// Accesses per second at which the array is considered fully active: one
/// row access per nominal-supply read delay.
pub fn nominal_activity(array: &ArrayConfig, access: &AccessModel, t: f64) -> Result<f64> {
    let op = ThermalOperatingPoint::new(t, array.dev.vdd_nominal)?;
    let d = access.read_access(&array.cell, &array.dev, &op, true)?.delay;
    Ok(1.0 / d)
}

/// Switching power at `activity` accesses per second plus static power.
pub fn dynamic_power(
    array: &ArrayConfig,
    power: &PowerModel,
    op: &ThermalOperatingPoint,
    activity: f64,
) -> Result<f64> {
    op.validate()?;
    check_positive("activity", activity)?;
    let vr = op.vdd / array.dev.vdd_nominal;
    let e = power.access_energy.at(op.temperature) * vr * vr;
    let n = array.n_cells() as f64;
    Ok(e * activity + op.vdd * (power.bias_current + n * power.static_current(array, op)))
}

/// Longest refresh period whose error rate on `map` stays within `max_error`.
pub fn drps_select(map: &RetentionMap, max_error: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&max_error) {
        return Err(Error::domain("max_error", max_error, "must lie in [0, 1)"));
    }
    let sorted = map.sorted();
    let n = sorted.len();
    // Refreshing at the k-th smallest retention loses at most k cells.
    let k = ((max_error * n as f64) * (1.0 + 1e-12)).floor() as usize;
    Ok(sorted[k.min(n - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(values: Vec<f64>) -> RetentionMap {
        let n = values.len();
        RetentionMap::from_values(1, n, values).unwrap()
    }

    #[test]
    fn guard_is_linear() {
        let m = map(vec![3.0, 2.0, 5.0]);
        assert_eq!(min_refresh_period(&m, 1.0).unwrap(), 2.0);
        assert_eq!(min_refresh_period(&m, 0.5).unwrap(), 1.0);
        assert!(min_refresh_period(&m, 0.0).is_err());
        assert!(min_refresh_period(&m, 1.5).is_err());
    }

    #[test]
    fn error_rate_steps() {
        let m = map(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(error_rate(&m, 1e-9), 0.0);
        assert_eq!(error_rate(&m, 1.0), 0.0);
        assert_eq!(error_rate(&m, 2.5), 0.5);
        assert_eq!(error_rate(&m, 10.0), 1.0);
        assert_eq!(error_rate_curve(&m, &[1.0, 2.5, 10.0]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn analytic_error_rate_values() {
        assert_eq!(error_rate_analytic(5.0, 1.0, 5.0).unwrap(), 0.5);
        let p = error_rate_analytic(112.09e-6, 16.80e-6, 78.49e-6).unwrap();
        assert!((p - 0.02275).abs() < 1e-4, "{p}");
        assert!(error_rate_analytic(1.0, 0.1, 1.0 - 0.6).unwrap() < 1e-8);
        assert!(error_rate_analytic(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn retention_power_quotient() {
        let b = EnergyBudget {
            e_read: 1e-9,
            e_write: 0.0,
            e_leakage: 0.0,
        };
        assert!((retention_power(&b, 1.0).unwrap() - 1e-9).abs() < 1e-24);
        let b = EnergyBudget {
            e_read: 3.0e-12,
            e_write: 2.45e-12,
            e_leakage: 2.0e-12,
        };
        let p = retention_power(&b, 66.50).unwrap();
        assert!((p - 112e-15).abs() / 112e-15 < 1e-3, "{p}");
        assert_eq!(retention_power(&b.scaled(2.0), 66.5).unwrap(), 2.0 * p);
        assert!(retention_power(&b, 0.0).is_err());
    }

    #[test]
    fn zero_size_budget() {
        let a = ArrayConfig {
            rows: 0,
            ..ArrayConfig::default()
        };
        let op = ThermalOperatingPoint::new(4.2, 1.1).unwrap();
        let b = energy_budget(&a, &PowerModel::default(), &AccessModel::default(), &op, 1.0).unwrap();
        assert_eq!(b, EnergyBudget::default());
    }

    #[test]
    fn drps_order_statistics() {
        let values: Vec<f64> = (0..4096).map(|i| 1.0 + ((i * 7919) % 4096) as f64).collect();
        let m = map(values);
        assert_eq!(drps_select(&m, 0.0).unwrap(), 1.0);
        assert_eq!(drps_select(&m, 1.0 / 4096.0).unwrap(), 2.0);
        assert_eq!(drps_select(&m, 1.0 - 1.0 / 4096.0).unwrap(), 4096.0);
        assert!(drps_select(&m, 1.0).is_err());
        for e in [0.0, 0.01, 0.1, 0.5] {
            let p = drps_select(&m, e).unwrap();
            assert!(error_rate(&m, p) <= e);
        }
    }
}
