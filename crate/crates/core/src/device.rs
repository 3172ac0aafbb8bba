//! Temperature- and voltage-dependent transistor leakage model.
//!
//! Off-state current is the sum of three parts:
//!
//! * a subthreshold term `i_sub0 * 10^(-(Vth(T) - Vgs) / SS(T))` whose swing
//!   saturates at `ss_floor` at cryogenic temperatures,
//! * a reverse-biased junction term `junction_i0 * exp(-Ea / kT) * f(Vds)`,
//! * a temperature-independent floor (gate tunneling and similar paths).
//!
//! The floor is what keeps 4.2 K leakage finite; a pure thermionic law would
//! suppress leakage by hundreds of decades. Its magnitude is a calibration
//! output (see [`calibrate_device`]).

use serde::{Deserialize, Serialize};

use crate::cell::{retention_time_with, BitCellConfig, RetentionSolver};
use crate::error::{check_range, Error, Result};

/// Boltzmann constant over elementary charge, V/K.
pub const K_OVER_Q: f64 = 8.617_333_262e-5;

/// Cryogenic anchor temperature of the threshold-voltage curve.
pub const T_CRYO: f64 = 4.2;
/// Room-temperature anchor of the threshold-voltage curve.
pub const T_ROOM: f64 = 300.0;

pub const T_MIN: f64 = 1.0;
pub const T_MAX: f64 = 400.0;
pub const VDD_MIN: f64 = 0.3;
pub const VDD_MAX: f64 = 1.5;

/// Thermal voltage kT/q.
#[inline]
pub fn thermal_voltage(t: f64) -> f64 {
    K_OVER_Q * t
}

/// A (temperature, supply) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalOperatingPoint {
    /// Kelvin.
    pub temperature: f64,
    /// Volts.
    pub vdd: f64,
}

impl ThermalOperatingPoint {
    pub fn new(temperature: f64, vdd: f64) -> Result<Self> {
        check_range("temperature", temperature, T_MIN, T_MAX)?;
        check_range("vdd", vdd, VDD_MIN, VDD_MAX)?;
        Ok(Self { temperature, vdd })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.temperature, self.vdd).map(|_| ())
    }
}

/// Calibrated transistor leakage and threshold parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Subthreshold prefactor, A.
    #[serde(rename = "i_sub0_a")]
    pub i_sub0: f64,
    /// Subthreshold slope ideality factor.
    pub n_ideality: f64,
    /// Low-temperature swing saturation, V/decade.
    #[serde(rename = "ss_floor_v_per_dec")]
    pub ss_floor: f64,
    /// Temperature-independent leakage floor, A.
    #[serde(rename = "i_floor_a")]
    pub i_floor: f64,
    /// Threshold voltage at 300 K, V.
    #[serde(rename = "vth_300_v")]
    pub vth_300: f64,
    /// Threshold increase from 300 K down to 4.2 K, V.
    #[serde(rename = "dvth_cryo_v")]
    pub dvth_cryo: f64,
    /// Junction leakage prefactor, A.
    #[serde(rename = "junction_i0_a")]
    pub junction_i0: f64,
    /// Junction activation energy, eV.
    #[serde(rename = "junction_ea_ev")]
    pub junction_ea: f64,
    /// Supply at which the drain-bias factor reaches 1 and the supply
    /// scaling below is normalized, V.
    #[serde(rename = "vdd_nominal_v")]
    pub vdd_nominal: f64,
    /// Leakage grows as `(vdd / vdd_nominal)^-exp` for each component.
    pub vdd_exp_subthreshold: f64,
    pub vdd_exp_junction: f64,
    pub vdd_exp_floor: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            i_sub0: 1.0e-6,
            n_ideality: 1.3,
            ss_floor: 0.020,
            i_floor: 1.0e-17,
            vth_300: 0.45,
            dvth_cryo: 0.12,
            junction_i0: 1.0e-2,
            junction_ea: 0.56,
            vdd_nominal: 1.1,
            vdd_exp_subthreshold: 0.0,
            vdd_exp_junction: 0.0,
            vdd_exp_floor: 0.0,
        }
    }
}

/// Per-cell deviations applied on top of [`DeviceParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMismatch {
    /// Threshold-voltage shift of the write port, V.
    pub dvth: f64,
    /// Multiplier on the leakage floor.
    pub floor_scale: f64,
    /// Chip-level multiplier on the thermally activated components.
    pub chip_scale: f64,
}

impl Default for CellMismatch {
    fn default() -> Self {
        Self {
            dvth: 0.0,
            floor_scale: 1.0,
            chip_scale: 1.0,
        }
    }
}

/// Leakage seen by a storage node, split by how it depends on the node voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageComponents {
    /// Write-port current (subthreshold + floor), independent of the node voltage, A.
    pub port: f64,
    /// Junction current at full drain-bias factor, A.
    pub junction: f64,
    pub vdd_nominal: f64,
}

impl LeakageComponents {
    /// Total current at storage-node voltage `v_sn`.
    #[inline]
    pub fn current(&self, v_sn: f64) -> f64 {
        self.port + self.junction * drain_factor(v_sn, self.vdd_nominal)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            port: self.port * k,
            junction: self.junction * k,
            vdd_nominal: self.vdd_nominal,
        }
    }
}

/// Bounded non-decreasing drain-bias factor, `v_ds / vdd_nominal` clamped to [0, 1].
#[inline]
pub fn drain_factor(v_ds: f64, vdd_nominal: f64) -> f64 {
    (v_ds / vdd_nominal).clamp(0.0, 1.0)
}

fn check_temperature(t: f64) -> Result<()> {
    check_range("temperature", t, T_MIN, T_MAX)
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |name: &'static str, v: f64, cond: bool, bound: &str| {
            if cond && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(name, v, bound.to_string()))
            }
        };
        ok("i_sub0", self.i_sub0, self.i_sub0 > 0.0, "must be > 0")?;
        ok("i_floor", self.i_floor, self.i_floor >= 0.0, "must be >= 0")?;
        ok("junction_i0", self.junction_i0, self.junction_i0 >= 0.0, "must be >= 0")?;
        ok("ss_floor", self.ss_floor, self.ss_floor > 0.0, "must be > 0")?;
        ok("n_ideality", self.n_ideality, self.n_ideality >= 1.0, "must be >= 1")?;
        ok("dvth_cryo", self.dvth_cryo, self.dvth_cryo >= 0.0, "must be >= 0")?;
        ok("junction_ea", self.junction_ea, self.junction_ea >= 0.0, "must be >= 0")?;
        ok("vdd_nominal", self.vdd_nominal, self.vdd_nominal > 0.0, "must be > 0")?;
        Ok(())
    }

    /// Threshold voltage at temperature `t`.
    ///
    /// Piecewise linear through `(4.2 K, vth_300 + dvth_cryo)` and
    /// `(300 K, vth_300)`, held flat below 4.2 K and extrapolated above 300 K.
    pub fn threshold_voltage(&self, t: f64) -> Result<f64> {
        check_temperature(t)?;
        Ok(self.vth_unchecked(t))
    }

    #[inline]
    pub(crate) fn vth_unchecked(&self, t: f64) -> f64 {
        let t = t.max(T_CRYO);
        self.vth_300 + self.dvth_cryo * (T_ROOM - t) / (T_ROOM - T_CRYO)
    }

    /// Subthreshold swing in V/decade: thermionic `n ln(10) kT/q`, saturating at `ss_floor`.
    pub fn subthreshold_swing(&self, t: f64) -> Result<f64> {
        check_temperature(t)?;
        Ok(self.ss_unchecked(t))
    }

    #[inline]
    pub(crate) fn ss_unchecked(&self, t: f64) -> f64 {
        (self.n_ideality * std::f64::consts::LN_10 * thermal_voltage(t)).max(self.ss_floor)
    }

    /// Temperature below which the swing sits on its floor.
    pub fn swing_crossover_temperature(&self) -> f64 {
        self.ss_floor / (self.n_ideality * std::f64::consts::LN_10 * K_OVER_Q)
    }

    /// Off-state drain current at gate underdrive `v_gs_off` and drain bias `v_ds`.
    pub fn off_leakage(&self, v_gs_off: f64, v_ds: f64, t: f64) -> Result<f64> {
        check_temperature(t)?;
        check_range("v_gs_off", v_gs_off, -VDD_MAX, VDD_MAX)?;
        if !(v_ds >= 0.0) {
            return Err(Error::domain("v_ds", v_ds, "must be >= 0"));
        }
        Ok(self.subthreshold(t, v_gs_off, 0.0)
            + self.junction(t) * drain_factor(v_ds, self.vdd_nominal)
            + self.i_floor)
    }

    #[inline]
    fn subthreshold(&self, t: f64, v_gs_off: f64, dvth: f64) -> f64 {
        let overdrive = self.vth_unchecked(t) + dvth - v_gs_off;
        self.i_sub0 * 10f64.powf(-overdrive / self.ss_unchecked(t))
    }

    #[inline]
    fn junction(&self, t: f64) -> f64 {
        if self.junction_i0 == 0.0 {
            return 0.0;
        }
        self.junction_i0 * (-self.junction_ea / thermal_voltage(t)).exp()
    }

    #[inline]
    fn vdd_scale(&self, vdd: f64, exponent: f64) -> f64 {
        if exponent == 0.0 {
            1.0
        } else {
            (vdd / self.vdd_nominal).powf(-exponent)
        }
    }

    /// Storage-node leakage components for a cell in hold state (write port
    /// gate at 0 V) at operating point `op`.
    pub fn cell_leakage(&self, op: &ThermalOperatingPoint, m: &CellMismatch) -> LeakageComponents {
        let t = op.temperature;
        let sub = self.subthreshold(t, 0.0, m.dvth)
            * self.vdd_scale(op.vdd, self.vdd_exp_subthreshold)
            * m.chip_scale;
        let floor = self.i_floor * m.floor_scale * self.vdd_scale(op.vdd, self.vdd_exp_floor);
        let junction =
            self.junction(t) * self.vdd_scale(op.vdd, self.vdd_exp_junction) * m.chip_scale;
        LeakageComponents {
            port: sub + floor,
            junction,
            vdd_nominal: self.vdd_nominal,
        }
    }

    /// Subthreshold and junction currents alone (no floor) for a nominal cell.
    pub fn thermal_leakage(&self, op: &ThermalOperatingPoint, v_sn: f64) -> f64 {
        let c = self.cell_leakage(
            op,
            &CellMismatch {
                floor_scale: 0.0,
                ..CellMismatch::default()
            },
        );
        c.current(v_sn)
    }
}

/// A measured mean retention time at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetentionAnchor {
    pub temperature: f64,
    pub vdd: f64,
    /// Seconds.
    pub retention: f64,
}

/// Inputs to [`calibrate_device`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTargets {
    /// One or two anchors. With one anchor the floor is held at zero.
    pub anchors: Vec<RetentionAnchor>,
    pub cell: BitCellConfig,
    /// Starting point; shape parameters (swing, threshold, activation energy,
    /// supply exponents) are kept, the current prefactors are fitted.
    pub base: DeviceParams,
    /// Share of the warmest anchor's leakage carried by the subthreshold term,
    /// the remainder being junction leakage.
    pub subthreshold_share: f64,
}

impl CalibrationTargets {
    pub fn new(anchors: Vec<RetentionAnchor>) -> Self {
        Self {
            anchors,
            cell: BitCellConfig::default(),
            base: DeviceParams::default(),
            subthreshold_share: 0.35,
        }
    }
}

const BISECT_ITERS: usize = 90;

/// Bisection on `ln x` in `[lo, hi]` for a function that is decreasing in x.
/// Returns the midpoint of the final bracket.
pub(crate) fn bisect_log_decreasing(
    mut lo: f64,
    mut hi: f64,
    iters: usize,
    mut above_target: impl FnMut(f64) -> Result<bool>,
) -> Result<f64> {
    for _ in 0..iters {
        let mid = (lo.ln() * 0.5 + hi.ln() * 0.5).exp();
        if above_target(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo.ln() * 0.5 + hi.ln() * 0.5).exp())
}

/// Fit the leakage prefactors so that nominal-cell retention reproduces every anchor.
///
/// The subthreshold and junction prefactors move together (their ratio is
/// fixed by `subthreshold_share`), and are solved against the warmest anchor;
/// the floor is solved against the coldest. The two one-dimensional
/// bisections alternate for a fixed number of sweeps, so the result is
/// deterministic.
pub fn calibrate_device(targets: &CalibrationTargets) -> Result<DeviceParams> {
    calibrate_device_with(targets, RetentionSolver::Adaptive)
}

pub(crate) fn calibrate_device_with(
    targets: &CalibrationTargets,
    solver: RetentionSolver,
) -> Result<DeviceParams> {
    let base = targets.base;
    base.validate()?;
    if targets.anchors.is_empty() || targets.anchors.len() > 2 {
        return Err(Error::Usage(format!(
            "device calibration takes one or two retention anchors, got {}",
            targets.anchors.len()
        )));
    }
    let p = targets.subthreshold_share;
    check_range("subthreshold_share", p, 0.0, 1.0)?;
    let mut anchors = targets.anchors.clone();
    anchors.sort_by(|a, b| b.temperature.total_cmp(&a.temperature));
    for a in &anchors {
        ThermalOperatingPoint::new(a.temperature, a.vdd)?;
        crate::error::check_positive("anchor retention", a.retention)?;
    }
    let hot = anchors[0];
    let hot_op = ThermalOperatingPoint::new(hot.temperature, hot.vdd)?;
    let cell = &targets.cell;

    // Unit prefactors: at s = 1 the hot anchor sees 1 A of thermal leakage at the
    // mid-discharge voltage, split p : (1 - p).
    let v_mid = 0.5 * (cell.v_init(&base, &hot_op) + cell.v_fail(hot_op.vdd));
    let mut unit = base;
    unit.i_floor = 0.0;
    unit.i_sub0 = 1.0;
    unit.junction_i0 = 1.0;
    let probe = unit.cell_leakage(&hot_op, &CellMismatch::default());
    let sub_at_one = probe.port;
    let junction_at_one = probe.junction * drain_factor(v_mid, base.vdd_nominal);
    let sub_unit = if p > 0.0 { p / sub_at_one } else { 0.0 };
    let junction_unit = if p < 1.0 {
        if junction_at_one <= 0.0 {
            return Err(Error::Calibration {
                what: "junction leakage vanishes at the warm anchor".into(),
                residual: f64::INFINITY,
            });
        }
        (1.0 - p) / junction_at_one
    } else {
        0.0
    };
    if !sub_unit.is_finite() || sub_unit == 0.0 && p > 0.0 {
        return Err(Error::Calibration {
            what: "subthreshold leakage vanishes at the warm anchor".into(),
            residual: f64::INFINITY,
        });
    }

    let with = |s: f64, floor: f64| {
        let mut d = base;
        d.i_sub0 = (s * sub_unit).max(f64::MIN_POSITIVE);
        d.junction_i0 = s * junction_unit;
        d.i_floor = floor;
        d
    };
    let retention_at = |d: &DeviceParams, a: &RetentionAnchor| -> Result<f64> {
        let op = ThermalOperatingPoint::new(a.temperature, a.vdd)?;
        Ok(retention_time_with(cell, d, &op, solver)?.seconds_or_inf())
    };

    // Initial guess for the thermal scale: constant-current estimate.
    let dv = cell.v_init(&base, &hot_op) - cell.v_fail(hot_op.vdd);
    let s_guess = cell.c_sn * dv / hot.retention;
    let mut s = s_guess;
    let mut floor = 0.0;

    let sweeps = if anchors.len() == 1 { 1 } else { 4 };
    for _ in 0..sweeps {
        s = bisect_log_decreasing(s_guess * 1e-6, s_guess * 1e6, BISECT_ITERS, |x| {
            Ok(retention_at(&with(x, floor), &hot)? > hot.retention)
        })?;
        if anchors.len() == 2 {
            let cold = anchors[1];
            let thermal_only = retention_at(&with(s, 0.0), &cold)?;
            if thermal_only < cold.retention {
                let residual = (thermal_only - cold.retention) / cold.retention;
                return Err(Error::Calibration {
                    what: format!(
                        "retention ratio {:.3e} not reachable: thermal leakage alone limits \
                         {} K retention to {:.4e} s",
                        cold.retention / hot.retention,
                        cold.temperature,
                        thermal_only
                    ),
                    residual,
                });
            }
            let cold_op = ThermalOperatingPoint::new(cold.temperature, cold.vdd)?;
            let dv_cold = cell.v_init(&base, &cold_op) - cell.v_fail(cold_op.vdd);
            let f_guess = cell.c_sn * dv_cold / cold.retention;
            floor = bisect_log_decreasing(f_guess * 1e-8, f_guess * 1e4, BISECT_ITERS, |x| {
                Ok(retention_at(&with(s, x), &cold)? > cold.retention)
            })?;
        }
    }

    let fitted = with(s, floor);
    for a in &anchors {
        let r = retention_at(&fitted, a)?;
        let residual = (r - a.retention) / a.retention;
        if residual.abs() > 1e-3 {
            return Err(Error::Calibration {
                what: format!("anchor at {} K / {} V", a.temperature, a.vdd),
                residual,
            });
        }
    }
    Ok(fitted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    #[test]
    fn threshold_anchor_points() {
        let d = DeviceParams::default();
        assert_eq!(d.threshold_voltage(300.0).unwrap(), d.vth_300);
        assert!(close(
            d.threshold_voltage(4.2).unwrap(),
            d.vth_300 + d.dvth_cryo,
            1e-12
        ));
        assert!(d.dvth_cryo >= 0.11);
        let flat = DeviceParams {
            dvth_cryo: 0.0,
            ..d
        };
        for t in [1.0, 4.2, 77.0, 150.0, 300.0] {
            assert_eq!(flat.threshold_voltage(t).unwrap(), flat.vth_300);
        }
    }

    #[test]
    fn threshold_extrapolates_above_room() {
        let d = DeviceParams::default();
        let slope = d.dvth_cryo / (T_ROOM - T_CRYO);
        assert!(close(
            d.threshold_voltage(350.0).unwrap(),
            d.vth_300 - 50.0 * slope,
            1e-12
        ));
    }

    #[test]
    fn temperature_domain_errors_name_the_bound() {
        let d = DeviceParams::default();
        let e = d.threshold_voltage(0.5).unwrap_err();
        assert!(e.to_string().contains("lower bound"), "{e}");
        let e = d.subthreshold_swing(500.0).unwrap_err();
        assert!(e.to_string().contains("upper bound"), "{e}");
        assert!(d.off_leakage(0.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn swing_values() {
        let d = DeviceParams {
            n_ideality: 1.0,
            ss_floor: 1e-9,
            ..DeviceParams::default()
        };
        let ss300 = d.subthreshold_swing(300.0).unwrap();
        // ln(10) kT/q at 300 K, worked by hand: 2.302585 * 0.0258520 = 0.0595264 V.
        assert!((ss300 * 1e3 - 59.53).abs() < 0.5, "{ss300}");
        let d15 = DeviceParams {
            n_ideality: 1.5,
            ..d
        };
        assert!(close(d15.subthreshold_swing(300.0).unwrap(), 1.5 * ss300, 1e-12));
        let floored = DeviceParams {
            n_ideality: 1.0,
            ss_floor: 0.020,
            ..DeviceParams::default()
        };
        assert_eq!(floored.subthreshold_swing(4.2).unwrap(), 0.020);
    }

    #[test]
    fn floor_only_leakage() {
        let d = DeviceParams {
            i_sub0: f64::MIN_POSITIVE,
            junction_i0: 0.0,
            i_floor: 1e-18,
            ..DeviceParams::default()
        };
        for t in [4.2, 77.0, 300.0] {
            assert!(close(d.off_leakage(0.0, 1.1, t).unwrap(), 1e-18, 1e-9));
        }
    }

    #[test]
    fn subthreshold_ratio_matches_closed_form() {
        let d = DeviceParams {
            i_floor: 0.0,
            junction_i0: 0.0,
            ..DeviceParams::default()
        };
        let i300 = d.off_leakage(0.0, 1.1, 300.0).unwrap();
        let i150 = d.off_leakage(0.0, 1.1, 150.0).unwrap();
        // Independent evaluation of the exponent difference.
        let vt = |t: f64| 0.45 + 0.12 * (300.0 - t) / 295.8;
        let ss = |t: f64| 1.3 * 10f64.ln() * 8.617_333_262e-5 * t;
        let expected = 10f64.powf(-vt(300.0) / ss(300.0) + vt(150.0) / ss(150.0));
        assert!(close(i300 / i150, expected, 1e-9));
        assert!(i300 / i150 > 1.0);
    }

    #[test]
    fn crossover_temperature() {
        let d = DeviceParams::default();
        let tc = d.swing_crossover_temperature();
        assert!(close(d.subthreshold_swing(tc * 1.01).unwrap(), d.ss_floor * 1.01, 1e-9));
        assert_eq!(d.subthreshold_swing(tc * 0.99).unwrap(), d.ss_floor);
    }

    #[test]
    fn single_anchor_fit_is_exact() {
        let t = CalibrationTargets::new(vec![RetentionAnchor {
            temperature: 300.0,
            vdd: 1.1,
            retention: 112.09e-6,
        }]);
        let d = calibrate_device(&t).unwrap();
        assert_eq!(d.i_floor, 0.0);
        let op = ThermalOperatingPoint::new(300.0, 1.1).unwrap();
        let r = crate::cell::retention_time(&t.cell, &d, &op).unwrap();
        assert!(close(r.seconds().unwrap(), 112.09e-6, 1e-6));
    }

    #[test]
    fn infeasible_ratio_is_reported() {
        // A 1e12 ratio with a swing floor so high that cryogenic subthreshold
        // leakage stays above what 112.09 s of retention would allow.
        let mut t = CalibrationTargets::new(vec![
            RetentionAnchor {
                temperature: 300.0,
                vdd: 1.1,
                retention: 112.09e-6,
            },
            RetentionAnchor {
                temperature: 4.2,
                vdd: 1.1,
                retention: 112.09e-6 * 1e12,
            },
        ]);
        t.base.ss_floor = 0.150;
        match calibrate_device(&t) {
            Err(Error::Calibration { residual, .. }) => assert!(residual < 0.0),
            other => panic!("expected calibration error, got {other:?}"),
        }
    }
}
