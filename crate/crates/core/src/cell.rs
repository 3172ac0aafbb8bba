//! Behavioral model of the four-transistor transmission-gate gain cell and
//! the single-port comparison variants.
//!
//! Storage-node discharge is integrated with the adaptive solver in
//! [`crate::integrate`]. Access energy and delay are ratio models anchored
//! to a handful of simulated comparison points; see [`AccessModel`].

use serde::{Deserialize, Serialize};

use crate::device::{
    drain_factor, CellMismatch, DeviceParams, LeakageComponents, ThermalOperatingPoint, T_CRYO,
    T_ROOM,
};
use crate::error::{check_positive, check_range, Error, Result};
use crate::integrate::{first_crossing, Crossing, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Transmission-gate write port with a two-NMOS read port (the 4T cell).
    TgWrite2tnRead,
    NWrite,
    PWrite,
    Read1t,
    Read2tn,
}

impl Topology {
    pub fn is_write_variant(self) -> bool {
        matches!(self, Topology::TgWrite2tnRead | Topology::NWrite | Topology::PWrite)
    }

    pub fn is_read_variant(self) -> bool {
        matches!(self, Topology::TgWrite2tnRead | Topology::Read1t | Topology::Read2tn)
    }

    fn write_index(self) -> Option<usize> {
        match self {
            Topology::TgWrite2tnRead => Some(0),
            Topology::NWrite => Some(1),
            Topology::PWrite => Some(2),
            _ => None,
        }
    }

    fn read_index(self) -> Option<usize> {
        match self {
            Topology::TgWrite2tnRead | Topology::Read2tn => Some(0),
            Topology::Read1t => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitCellConfig {
    pub topology: Topology,
    /// Storage-node capacitance, F.
    #[serde(rename = "c_sn_f")]
    pub c_sn: f64,
    /// Write-bitline level while not writing, V.
    #[serde(rename = "wbl_bias_v")]
    pub wbl_bias: f64,
    /// Misread threshold as a fraction of VDD.
    pub v_fail_fraction: f64,
    /// Written '1' level as a fraction of VDD. `None` uses the topology default:
    /// full rail for the transmission gate, `vdd - Vth(T)` for an NMOS-only port.
    pub v_init_fraction: Option<f64>,
    /// Scale of the current a high write bitline injects into a stored '0',
    /// relative to the write-port leakage of a stored '1'.
    pub wbl_disturb_gain: f64,
    /// Integration horizon, s.
    #[serde(rename = "horizon_s")]
    pub horizon: f64,
}

impl Default for BitCellConfig {
    fn default() -> Self {
        Self {
            topology: Topology::TgWrite2tnRead,
            c_sn: 1.0e-15,
            wbl_bias: 0.0,
            v_fail_fraction: 0.5,
            v_init_fraction: None,
            wbl_disturb_gain: 1.48,
            horizon: 1.0e4,
        }
    }
}

impl BitCellConfig {
    pub fn with_topology(topology: Topology) -> Self {
        Self {
            topology,
            ..Self::default()
        }
    }

    pub fn v_fail(&self, vdd: f64) -> f64 {
        self.v_fail_fraction * vdd
    }

    /// Voltage actually written for a '1'.
    pub fn v_init(&self, dev: &DeviceParams, op: &ThermalOperatingPoint) -> f64 {
        match (self.v_init_fraction, self.topology) {
            (Some(f), _) => f * op.vdd,
            (None, Topology::NWrite) => op.vdd - dev.vth_unchecked(op.temperature),
            (None, _) => op.vdd,
        }
    }

    /// Voltage actually written for a '0'.
    pub fn v_zero(&self, dev: &DeviceParams, op: &ThermalOperatingPoint) -> f64 {
        match self.topology {
            Topology::PWrite => dev.vth_unchecked(op.temperature).abs(),
            _ => 0.0,
        }
    }

    pub fn validate(&self, dev: &DeviceParams, op: &ThermalOperatingPoint) -> Result<()> {
        check_positive("c_sn", self.c_sn)?;
        check_range("wbl_bias", self.wbl_bias, 0.0, op.vdd)?;
        check_positive("horizon", self.horizon)?;
        if !(self.wbl_disturb_gain >= 0.0) {
            return Err(Error::domain("wbl_disturb_gain", self.wbl_disturb_gain, "must be >= 0"));
        }
        if let Some(f) = self.v_init_fraction {
            check_range("v_init_fraction", f, f64::MIN_POSITIVE, 1.0)?;
            if self.topology == Topology::TgWrite2tnRead && f != 1.0 {
                return Err(Error::domain(
                    "v_init_fraction",
                    f,
                    "transmission-gate write port stores the full rail (must be 1)",
                ));
            }
        }
        let v_fail = self.v_fail(op.vdd);
        let v_init = self.v_init(dev, op);
        if !(v_fail > self.v_zero(dev, op) && v_fail < v_init) {
            return Err(Error::domain(
                "v_fail",
                v_fail,
                format!("must lie strictly between the written levels (< {v_init:.4} V)"),
            ));
        }
        Ok(())
    }
}

/// Which integrator evaluates storage-node discharge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionSolver {
    /// Adaptive Dormand–Prince with threshold-crossing detection.
    #[default]
    Adaptive,
    /// Closed-form solution of the piecewise-affine discharge equation.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RetentionTime {
    Seconds(f64),
    /// No misread within the configured horizon.
    ExceedsHorizon,
}

impl RetentionTime {
    pub fn seconds(self) -> Option<f64> {
        match self {
            RetentionTime::Seconds(s) => Some(s),
            RetentionTime::ExceedsHorizon => None,
        }
    }

    pub fn seconds_or_inf(self) -> f64 {
        self.seconds().unwrap_or(f64::INFINITY)
    }

    fn min(self, other: Self) -> Self {
        match (self, other) {
            (RetentionTime::Seconds(a), RetentionTime::Seconds(b)) => {
                RetentionTime::Seconds(a.min(b))
            }
            (RetentionTime::Seconds(a), _) | (_, RetentionTime::Seconds(a)) => {
                RetentionTime::Seconds(a)
            }
            _ => RetentionTime::ExceedsHorizon,
        }
    }
}

/// `c_sn * delta_v / i_const`.
pub fn retention_time_analytic(c_sn: f64, delta_v: f64, i_const: f64) -> Result<f64> {
    check_positive("c_sn", c_sn)?;
    check_positive("delta_v", delta_v)?;
    check_positive("i_const", i_const)?;
    Ok(c_sn * delta_v / i_const)
}

/// Worst-case retention of a nominal cell over both stored values.
pub fn retention_time(
    cell: &BitCellConfig,
    dev: &DeviceParams,
    op: &ThermalOperatingPoint,
) -> Result<RetentionTime> {
    retention_time_with(cell, dev, op, RetentionSolver::Adaptive)
}

pub fn retention_time_with(
    cell: &BitCellConfig,
    dev: &DeviceParams,
    op: &ThermalOperatingPoint,
    solver: RetentionSolver,
) -> Result<RetentionTime> {
    op.validate()?;
    cell.validate(dev, op)?;
    let leak = dev.cell_leakage(op, &CellMismatch::default());
    retention_from_leakage(cell, dev, op, &leak, solver)
}

/// Retention for already-evaluated leakage components; used by the array
/// sampler, which validates once per array rather than per cell.
pub(crate) fn retention_from_leakage(
    cell: &BitCellConfig,
    dev: &DeviceParams,
    op: &ThermalOperatingPoint,
    leak: &LeakageComponents,
    solver: RetentionSolver,
) -> Result<RetentionTime> {
    let v_fail = cell.v_fail(op.vdd);
    let one = discharge(
        cell.c_sn,
        cell.v_init(dev, op),
        v_fail,
        leak.port,
        leak.junction,
        leak.vdd_nominal,
        cell.horizon,
        solver,
    )?;
    let inject = cell.wbl_disturb_gain * leak.port * cell.wbl_bias / op.vdd;
    let zero = if inject > 0.0 {
        charge(
            cell.c_sn,
            cell.v_zero(dev, op),
            v_fail,
            inject,
            leak.junction,
            leak.vdd_nominal,
            cell.horizon,
            solver,
        )?
    } else {
        RetentionTime::ExceedsHorizon
    };
    Ok(one.min(zero))
}

/// Constant-current discharge; the oracle the integrator is checked against.
pub fn retention_constant_current(
    c_sn: f64,
    v_init: f64,
    v_fail: f64,
    i_const: f64,
    horizon: f64,
    solver: RetentionSolver,
) -> Result<RetentionTime> {
    discharge(c_sn, v_init, v_fail, i_const, 0.0, 1.0, horizon, solver)
}

/// Stored '1': `C dV/dt = -(port + junction * f(V))` from `v0` down to `v_fail`.
#[allow(clippy::too_many_arguments)]
fn discharge(
    c: f64,
    v0: f64,
    v_fail: f64,
    port: f64,
    junction: f64,
    vn: f64,
    horizon: f64,
    solver: RetentionSolver,
) -> Result<RetentionTime> {
    let rate0 = port + junction * drain_factor(v0, vn);
    if !(rate0 > 0.0) {
        return Ok(RetentionTime::ExceedsHorizon);
    }
    let t = match solver {
        RetentionSolver::Analytic => discharge_closed_form(c, v0, v_fail, port, junction, vn),
        RetentionSolver::Adaptive => {
            let h0 = 1e-3 * c * (v0 - v_fail) / rate0;
            let rhs = |_t: f64, v: f64| -(port + junction * drain_factor(v, vn)) / c;
            match first_crossing(rhs, v0, v_fail, horizon, h0, Tolerances::default())?.0 {
                Crossing::At(t) => t,
                Crossing::Beyond => f64::INFINITY,
            }
        }
    };
    Ok(if t <= horizon {
        RetentionTime::Seconds(t)
    } else {
        RetentionTime::ExceedsHorizon
    })
}

fn discharge_closed_form(c: f64, v0: f64, v_fail: f64, a: f64, b: f64, vn: f64) -> f64 {
    // Above vn the junction factor saturates: constant current a + b.
    let mut t = 0.0;
    let mut v = v0;
    if v > vn {
        let stop = v_fail.max(vn);
        t += c * (v - stop) / (a + b);
        v = stop;
    }
    if v <= v_fail {
        return t;
    }
    if b == 0.0 {
        t + c * (v - v_fail) / a
    } else {
        // C dV/dt = -(a + b V / vn)
        let k = b / vn;
        t + (c / k) * (k * (v - v_fail) / (a + k * v_fail)).ln_1p()
    }
}

/// Storage-node voltage of a stored '1' after holding for `t` seconds.
pub(crate) fn node_voltage_after(c: f64, v0: f64, leak: &LeakageComponents, t: f64) -> f64 {
    let (a, b, vn) = (leak.port, leak.junction, leak.vdd_nominal);
    let mut v = v0;
    let mut t = t;
    if v > vn {
        let t_sat = c * (v - vn) / (a + b);
        if t <= t_sat {
            return v - (a + b) * t / c;
        }
        t -= t_sat;
        v = vn;
    }
    let v_end = if b == 0.0 {
        v - a * t / c
    } else {
        let k = b / vn;
        let x = k * t / c;
        v * (-x).exp() + (a / k) * (-x).exp_m1()
    };
    v_end.max(0.0)
}

/// Stored '0' disturbed upward: `C dV/dt = inject - junction * f(V)`.
#[allow(clippy::too_many_arguments)]
fn charge(
    c: f64,
    v0: f64,
    v_fail: f64,
    inject: f64,
    junction: f64,
    vn: f64,
    horizon: f64,
    solver: RetentionSolver,
) -> Result<RetentionTime> {
    let k = junction / vn;
    // Settling level below the threshold: never misread.
    if inject <= junction * drain_factor(v_fail, vn) {
        return Ok(RetentionTime::ExceedsHorizon);
    }
    let t = match solver {
        RetentionSolver::Analytic => {
            if k == 0.0 {
                c * (v_fail - v0) / inject
            } else {
                (c / k) * (k * (v_fail - v0) / (inject - k * v_fail)).ln_1p()
            }
        }
        RetentionSolver::Adaptive => {
            let rate0 = inject - junction * drain_factor(v0, vn);
            let h0 = 1e-3 * c * (v_fail - v0) / rate0;
            let rhs = |_t: f64, v: f64| (inject - junction * drain_factor(v, vn)) / c;
            match first_crossing(rhs, v0, v_fail, horizon, h0, Tolerances::default())?.0 {
                Crossing::At(t) => t,
                Crossing::Beyond => f64::INFINITY,
            }
        }
    };
    Ok(if t <= horizon {
        RetentionTime::Seconds(t)
    } else {
        RetentionTime::ExceedsHorizon
    })
}

/// Worst-case retention at each write-bitline bias.
pub fn wbl_bias_sweep(
    cell: &BitCellConfig,
    dev: &DeviceParams,
    op: &ThermalOperatingPoint,
    biases: &[f64],
) -> Result<Vec<(f64, RetentionTime)>> {
    biases
        .iter()
        .map(|&b| {
            check_range("wbl_bias", b, 0.0, op.vdd)?;
            let c = BitCellConfig {
                wbl_bias: b,
                ..*cell
            };
            Ok((b, retention_time(&c, dev, op)?))
        })
        .collect()
}

/// Energy and delay of one access.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessMetrics {
    /// J.
    pub energy: f64,
    /// s.
    pub delay: f64,
}

/// Parametric access model. Drive currents follow an alpha-power law in the
/// gate overdrive, with a carrier-mobility gain that grows linearly as the
/// temperature drops from 300 K to 4.2 K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessModel {
    pub alpha: f64,
    /// Mobility at 4.2 K relative to 300 K, minus one.
    pub mobility_gain_cryo: f64,
    /// Drive coefficients for the TG, N-only and P-only write ports, A/V^alpha.
    #[serde(rename = "write_drive_a")]
    pub write_drive: [f64; 3],
    /// Switched parasitic capacitance per write port, F.
    #[serde(rename = "write_parasitic_f")]
    pub write_parasitic: [f64; 3],
    /// Read bitline capacitance, F.
    #[serde(rename = "c_rbl_f")]
    pub c_rbl: f64,
    /// Bitline swing the sense amplifier needs, V.
    #[serde(rename = "sense_swing_v")]
    pub sense_swing: f64,
    /// Drive coefficients for the 2T-NMOS and 1T read ports, A/V^alpha.
    #[serde(rename = "read_drive_a")]
    pub read_drive: [f64; 2],
    /// Effective read-bitline capacitance multiplier per read port.
    pub read_cap_scale: [f64; 2],
    /// Read '0' energy as a fraction of read '1' energy (precharge upkeep only).
    pub read_zero_fraction: f64,
}

impl Default for AccessModel {
    fn default() -> Self {
        Self {
            alpha: 1.3,
            mobility_gain_cryo: 0.75,
            write_drive: [2.0e-5, 1.0e-5, 1.1e-5],
            write_parasitic: [0.5e-15, 1.2e-15, 1.0e-15],
            c_rbl: 20.0e-15,
            sense_swing: 0.1,
            read_drive: [3.0e-6, 2.1e-6],
            read_cap_scale: [1.0, 1.98],
            read_zero_fraction: 0.1,
        }
    }
}

impl AccessModel {
    pub fn mobility(&self, t: f64) -> f64 {
        let t = t.clamp(T_CRYO, T_ROOM.max(t));
        1.0 + self.mobility_gain_cryo * (T_ROOM - t) / (T_ROOM - T_CRYO)
    }

    fn drive(&self, coeff: f64, dev: &DeviceParams, gate: f64, t: f64) -> Result<f64> {
        let overdrive = gate - dev.vth_unchecked(t);
        if !(overdrive > 0.0) {
            return Err(Error::domain(
                "gate overdrive",
                overdrive,
                "device must be on (gate above threshold)",
            ));
        }
        Ok(coeff * overdrive.powf(self.alpha) * self.mobility(t))
    }

    /// Write a full '1' and '0' swing into the storage node.
    pub fn write_access(
        &self,
        cell: &BitCellConfig,
        dev: &DeviceParams,
        op: &ThermalOperatingPoint,
    ) -> Result<AccessMetrics> {
        op.validate()?;
        let idx = cell.topology.write_index().ok_or_else(|| {
            Error::Usage(format!("{:?} has no write port", cell.topology))
        })?;
        let swing = cell.v_init(dev, op) - cell.v_zero(dev, op);
        let i = self.drive(self.write_drive[idx], dev, op.vdd, op.temperature)?;
        Ok(AccessMetrics {
            energy: cell.c_sn * swing * op.vdd + self.write_parasitic[idx] * op.vdd * op.vdd,
            delay: cell.c_sn * swing / i,
        })
    }

    /// Read one stored bit. Only a stored '1' discharges the read bitline.
    pub fn read_access(
        &self,
        cell: &BitCellConfig,
        dev: &DeviceParams,
        op: &ThermalOperatingPoint,
        stored: bool,
    ) -> Result<AccessMetrics> {
        op.validate()?;
        let idx = cell.topology.read_index().ok_or_else(|| {
            Error::Usage(format!("{:?} has no read port", cell.topology))
        })?;
        let i = self.drive(self.read_drive[idx], dev, cell.v_init(dev, op), op.temperature)?;
        let e_one = self.read_cap_scale[idx] * self.c_rbl * op.vdd * op.vdd;
        Ok(AccessMetrics {
            energy: if stored {
                e_one
            } else {
                self.read_zero_fraction * e_one
            },
            delay: self.c_rbl * self.sense_swing / i,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutStructure {
    SenseAmp,
    Inverter,
}

/// Energy-delay product of the column readout as a function of the
/// storage-node level.
///
/// Both structures slow down as the read transistor's overdrive shrinks,
/// by the factor `g(v_sn) = I(vdd) / I(v_sn)`. The sense amplifier's energy is
/// fixed; the inverter additionally burns crowbar current for as long as its
/// input transition lasts, so its energy grows with `g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub alpha: f64,
    /// Sense-amplifier energy, J.
    #[serde(rename = "sa_energy_j")]
    pub sa_energy: f64,
    /// Sense-amplifier delay at full storage level, s.
    #[serde(rename = "sa_delay_s")]
    pub sa_delay: f64,
    /// Inverter switching EDP over sense-amplifier EDP at full level.
    pub inv_switch_ratio: f64,
    /// Inverter crowbar EDP over sense-amplifier EDP, per unit slowdown.
    pub inv_crowbar_ratio: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self {
            alpha: 1.3,
            sa_energy: 5.0e-15,
            sa_delay: 100.0e-12,
            inv_switch_ratio: 2.9,
            inv_crowbar_ratio: 0.1,
        }
    }
}

impl ReadoutModel {
    pub fn slowdown(&self, dev: &DeviceParams, v_sn: f64, op: &ThermalOperatingPoint) -> Result<f64> {
        let vth = dev.vth_unchecked(op.temperature);
        let ov = v_sn - vth;
        if !(ov > 0.0) {
            return Err(Error::domain("v_sn", v_sn, format!("must exceed Vth = {vth:.4} V")));
        }
        Ok(((op.vdd - vth) / ov).powf(self.alpha))
    }

    pub fn readout_edp(
        &self,
        dev: &DeviceParams,
        structure: ReadoutStructure,
        v_sn: f64,
        op: &ThermalOperatingPoint,
    ) -> Result<f64> {
        op.validate()?;
        check_range("v_sn", v_sn, 0.6, op.vdd)?;
        let g = self.slowdown(dev, v_sn, op)?;
        let sa = self.sa_energy * self.sa_delay * g;
        Ok(match structure {
            ReadoutStructure::SenseAmp => sa,
            ReadoutStructure::Inverter => sa * (self.inv_switch_ratio + self.inv_crowbar_ratio * g),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(t: f64, v: f64) -> ThermalOperatingPoint {
        ThermalOperatingPoint::new(t, v).unwrap()
    }

    fn constant_leak_device(i: f64) -> DeviceParams {
        DeviceParams {
            i_sub0: f64::MIN_POSITIVE,
            junction_i0: 0.0,
            i_floor: i,
            ..DeviceParams::default()
        }
    }

    #[test]
    fn analytic_formula_examples() {
        let r = retention_time_analytic(1e-15, 0.55, 1e-12).unwrap();
        assert!((r - 0.55e-3).abs() < 1e-15);
        let r = retention_time_analytic(1e-15, 0.55, 0.55e-6).unwrap();
        assert!((r - 1e-9).abs() < 1e-21);
        let r2 = retention_time_analytic(2e-15, 0.55, 1e-12).unwrap();
        assert!((r2 / retention_time_analytic(1e-15, 0.55, 1e-12).unwrap() - 2.0).abs() < 1e-12);
        assert!(retention_time_analytic(0.0, 0.55, 1e-12).is_err());
        assert!(retention_time_analytic(1e-15, -0.1, 1e-12).is_err());
    }

    #[test]
    fn constant_leak_matches_closed_form() {
        let cell = BitCellConfig::default();
        let dev = constant_leak_device(1e-12);
        let r = retention_time(&cell, &dev, &op(4.2, 1.1)).unwrap().seconds().unwrap();
        let expect = 1e-15 * 0.55 / 1e-12;
        assert!(((r - expect) / expect).abs() < 1e-3, "{r} vs {expect}");
    }

    #[test]
    fn horizon_sentinel_for_tiny_leak() {
        let cell = BitCellConfig::default();
        let dev = constant_leak_device(1e-25);
        assert_eq!(
            retention_time(&cell, &dev, &op(4.2, 1.1)).unwrap(),
            RetentionTime::ExceedsHorizon
        );
    }

    #[test]
    fn solvers_agree_with_junction_term() {
        let dev = DeviceParams {
            i_sub0: 1e-6,
            junction_i0: 5e-3,
            i_floor: 1e-17,
            ..DeviceParams::default()
        };
        let o = op(300.0, 1.1);
        for bias in [0.0, 0.8, 1.1] {
            let cell = BitCellConfig {
                wbl_bias: bias,
                ..BitCellConfig::default()
            };
            let a = retention_time_with(&cell, &dev, &o, RetentionSolver::Adaptive)
                .unwrap()
                .seconds()
                .unwrap();
            let b = retention_time_with(&cell, &dev, &o, RetentionSolver::Analytic)
                .unwrap()
                .seconds()
                .unwrap();
            assert!(((a - b) / b).abs() < 1e-5, "bias {bias}: {a} vs {b}");
        }
    }

    #[test]
    fn retention_monotone_in_capacitance_and_leak() {
        let dev = DeviceParams {
            i_sub0: 1e-6,
            junction_i0: 5e-3,
            i_floor: 1e-17,
            ..DeviceParams::default()
        };
        let o = op(300.0, 1.1);
        let base = BitCellConfig::default();
        let r = |c: &BitCellConfig, d: &DeviceParams| {
            retention_time(c, d, &o).unwrap().seconds().unwrap()
        };
        let r0 = r(&base, &dev);
        let bigger = BitCellConfig {
            c_sn: 2e-15,
            ..base
        };
        assert!(r(&bigger, &dev) > r0);
        let lower_fail = BitCellConfig {
            v_fail_fraction: 0.4,
            ..base
        };
        assert!(r(&lower_fail, &dev) > r0);
        let leakier = DeviceParams {
            i_sub0: dev.i_sub0 * 1.1,
            junction_i0: dev.junction_i0 * 1.1,
            i_floor: dev.i_floor * 1.1,
            ..dev
        };
        assert!(r(&base, &leakier) < r0);
    }

    #[test]
    fn bias_sweep_is_non_increasing_and_keeps_length() {
        let dev = constant_leak_device(1e-17);
        let cell = BitCellConfig::default();
        let o = op(4.2, 1.1);
        let single = wbl_bias_sweep(&cell, &dev, &o, &[0.3]).unwrap();
        assert_eq!(single.len(), 1);
        let biases: Vec<f64> = (0..=11).map(|i| i as f64 * 0.1).collect();
        let sweep = wbl_bias_sweep(&cell, &dev, &o, &biases).unwrap();
        for w in sweep.windows(2) {
            assert!(w[1].1.seconds_or_inf() <= w[0].1.seconds_or_inf());
        }
        let ratio = sweep[0].1.seconds_or_inf() / sweep[11].1.seconds_or_inf();
        assert!((ratio - 1.48).abs() < 1e-3, "{ratio}");
        assert!(wbl_bias_sweep(&cell, &dev, &o, &[1.2]).is_err());
    }

    #[test]
    fn tg_cell_requires_full_rail() {
        let cell = BitCellConfig {
            v_init_fraction: Some(0.9),
            ..BitCellConfig::default()
        };
        assert!(cell.validate(&DeviceParams::default(), &op(4.2, 1.1)).is_err());
    }

    #[test]
    fn access_usage_errors() {
        let m = AccessModel::default();
        let dev = DeviceParams::default();
        let o = op(10.0, 1.1);
        let r1t = BitCellConfig::with_topology(Topology::Read1t);
        assert!(matches!(m.write_access(&r1t, &dev, &o), Err(Error::Usage(_))));
        let nw = BitCellConfig::with_topology(Topology::NWrite);
        assert!(matches!(m.read_access(&nw, &dev, &o, true), Err(Error::Usage(_))));
    }

    #[test]
    fn read_zero_is_cheaper_than_read_one() {
        let m = AccessModel::default();
        let dev = DeviceParams::default();
        for t in [4.2, 77.0, 300.0] {
            for topo in [Topology::TgWrite2tnRead, Topology::Read1t, Topology::Read2tn] {
                let c = BitCellConfig::with_topology(topo);
                let e0 = m.read_access(&c, &dev, &op(t, 1.1), false).unwrap().energy;
                let e1 = m.read_access(&c, &dev, &op(t, 1.1), true).unwrap().energy;
                assert!(e0 < e1);
            }
        }
    }

    #[test]
    fn self_comparison_ratios_are_one() {
        let m = AccessModel::default();
        let dev = DeviceParams::default();
        let c = BitCellConfig::default();
        let a = m.write_access(&c, &dev, &op(10.0, 1.1)).unwrap();
        let b = m.write_access(&c, &dev, &op(10.0, 1.1)).unwrap();
        assert_eq!(a.energy / b.energy, 1.0);
        assert_eq!(a.delay / b.delay, 1.0);
        let r = ReadoutModel::default();
        for v in [0.6, 0.8, 1.1] {
            let x = r.readout_edp(&dev, ReadoutStructure::SenseAmp, v, &op(4.2, 1.1)).unwrap();
            assert_eq!(x / x, 1.0);
        }
    }

    #[test]
    fn readout_range_checked() {
        let r = ReadoutModel::default();
        let dev = DeviceParams::default();
        assert!(r.readout_edp(&dev, ReadoutStructure::Inverter, 0.5, &op(4.2, 1.1)).is_err());
        assert!(r.readout_edp(&dev, ReadoutStructure::Inverter, 1.2, &op(4.2, 1.1)).is_err());
    }
}
