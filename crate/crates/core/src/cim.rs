//! Energy and throughput accounting for a compute-in-memory accelerator whose
//! weight and activation buffers are built from gain-cell arrays.

use serde::{Deserialize, Serialize};

use crate::array::{sample_array, ArrayConfig};
use crate::device::{ThermalOperatingPoint, T_CRYO, T_ROOM};
use crate::error::{check_positive, Error, Result};
use crate::profile::Models;
use crate::refresh::{energy_budget, RefreshPolicy, TempPair};

pub const RESNET18_TOML: &str = include_str!("../data/resnet18.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub macs: u64,
    pub weight_bytes: u64,
    pub activation_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub layers: Vec<Layer>,
    /// CIM clock period at 300 K and nominal supply, s.
    pub t_cim_cycle: f64,
    pub ops_per_mac: f64,
    /// Overrides the profile's compute energy per operation, J.
    pub compute_energy_per_op: Option<f64>,
}

impl WorkloadSpec {
    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(|l| l.macs).sum()
    }

    pub fn total_ops(&self) -> f64 {
        self.total_macs() as f64 * self.ops_per_mac
    }

    pub fn weight_bytes(&self) -> u64 {
        self.layers.iter().map(|l| l.weight_bytes).sum()
    }

    pub fn activation_bytes(&self) -> u64 {
        self.layers.iter().map(|l| l.activation_bytes).sum()
    }

    /// Largest single activation buffer.
    pub fn peak_activation_bytes(&self) -> u64 {
        self.layers.iter().map(|l| l.activation_bytes).max().unwrap_or(0)
    }

    /// Bits that must stay resident: every weight plus the largest activation buffer.
    pub fn resident_bits(&self) -> u64 {
        8 * (self.weight_bytes() + self.peak_activation_bytes())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    name: String,
    #[serde(default = "default_cycle")]
    t_cim_cycle_s: f64,
    #[serde(default = "default_ops_per_mac")]
    ops_per_mac: f64,
    compute_energy_per_op_j: Option<f64>,
    #[serde(default)]
    layer: Vec<RawLayer>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    name: String,
    macs: i64,
    weight_bytes: i64,
    activation_bytes: i64,
}

fn default_cycle() -> f64 {
    4.84e-3
}

fn default_ops_per_mac() -> f64 {
    2.0
}

/// Parse a workload descriptor (see `FORMATS.md`).
pub fn load_workload(text: &str) -> Result<WorkloadSpec> {
    let raw: RawWorkload = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let count = |layer: &str, field: &str, v: i64| -> Result<u64> {
        u64::try_from(v).map_err(|_| {
            Error::Validation(format!("layer '{layer}': {field} = {v} must be >= 0"))
        })
    };
    let layers = raw
        .layer
        .into_iter()
        .map(|l| {
            Ok(Layer {
                macs: count(&l.name, "macs", l.macs)?,
                weight_bytes: count(&l.name, "weight_bytes", l.weight_bytes)?,
                activation_bytes: count(&l.name, "activation_bytes", l.activation_bytes)?,
                name: l.name,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if !(raw.t_cim_cycle_s > 0.0 && raw.t_cim_cycle_s.is_finite()) {
        return Err(Error::Validation(format!(
            "t_cim_cycle_s = {} must be > 0",
            raw.t_cim_cycle_s
        )));
    }
    if !(raw.ops_per_mac > 0.0) {
        return Err(Error::Validation(format!("ops_per_mac = {} must be > 0", raw.ops_per_mac)));
    }
    if let Some(e) = raw.compute_energy_per_op_j {
        if !(e >= 0.0) {
            return Err(Error::Validation(format!("compute_energy_per_op_j = {e} must be >= 0")));
        }
    }
    Ok(WorkloadSpec {
        name: raw.name,
        layers,
        t_cim_cycle: raw.t_cim_cycle_s,
        ops_per_mac: raw.ops_per_mac,
        compute_energy_per_op: raw.compute_energy_per_op_j,
    })
}

/// The bundled ResNet-18 descriptor.
pub fn resnet18() -> WorkloadSpec {
    load_workload(RESNET18_TOML).expect("bundled workload parses")
}

/// Calibrated CIM constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CimModel {
    /// Compute energy per operation, J.
    #[serde(rename = "e_op_j")]
    pub e_op: f64,
    /// MACs the macro completes per CIM cycle.
    pub macs_per_cycle: f64,
    /// Arrays in the CIM macro; weights are streamed through them tile by tile.
    pub macro_arrays: u64,
    /// Clock speedup from the periphery beyond the read-delay ratio.
    pub periphery_speedup: TempPair,
    /// Standby power of one array while waiting, W.
    #[serde(rename = "idle_power_per_array_w")]
    pub idle_power_per_array: f64,
}

impl Default for CimModel {
    fn default() -> Self {
        Self {
            e_op: 1.0e-15,
            macs_per_cycle: 1.0e7,
            macro_arrays: 1,
            periphery_speedup: TempPair {
                cryo: 1.0,
                room: 1.0,
            },
            idle_power_per_array: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CimReport {
    pub temperature: f64,
    pub vdd: f64,
    pub ops: f64,
    pub n_arrays: u64,
    pub cycles: u64,
    /// s.
    pub refresh_period: f64,
    /// Fraction of array time spent refreshing.
    pub refresh_stall: f64,
    /// Time for one inference, s.
    pub inference_time: f64,
    pub energy_compute: f64,
    pub energy_memory: f64,
    pub energy_refresh: f64,
    pub energy_total: f64,
    pub refresh_fraction: f64,
    /// Tera-operations per second per watt, i.e. `ops / energy_total / 1e12`.
    pub tops_per_watt: f64,
    /// Frame rate relative to an unstalled 300 K clock.
    pub frame_rate_rel: f64,
}

pub fn cim_energy(
    w: &WorkloadSpec,
    cfg: &ArrayConfig,
    models: &Models,
    op: &ThermalOperatingPoint,
    policy: &RefreshPolicy,
) -> Result<CimReport> {
    op.validate()?;
    check_positive("refresh period", policy.period)?;
    let cim = &models.cim;
    let access = &models.access;
    let n_arrays = cim.macro_arrays;
    let mut r = CimReport {
        temperature: op.temperature,
        vdd: op.vdd,
        n_arrays,
        refresh_period: policy.period,
        ..CimReport::default()
    };
    if w.total_macs() == 0 {
        return Ok(r);
    }
    check_positive("macs_per_cycle", cim.macs_per_cycle)?;
    check_positive("macro_arrays", n_arrays as f64)?;

    let ref_op = ThermalOperatingPoint::new(T_ROOM, cfg.dev.vdd_nominal)?;
    let read = access.read_access(&cfg.cell, &cfg.dev, op, true)?;
    let write = access.write_access(&cfg.cell, &cfg.dev, op)?;
    let read_ref = access.read_access(&cfg.cell, &cfg.dev, &ref_op, true)?;

    let stall = cfg.rows as f64 * (read.delay + write.delay) / policy.period;
    if stall >= 1.0 {
        return Err(Error::domain(
            "refresh stall fraction",
            stall,
            "refresh must leave time for computation (< 1)",
        ));
    }
    let cycles: u64 = w
        .layers
        .iter()
        .map(|l| (l.macs as f64 / cim.macs_per_cycle).ceil() as u64)
        .sum();
    let clock = w.t_cim_cycle * (read.delay / read_ref.delay)
        / cim.periphery_speedup.at(op.temperature);
    let t_inf = cycles as f64 * clock / (1.0 - stall);

    let vr = op.vdd / cfg.dev.vdd_nominal;
    let e_bit = models.power.access_energy.at(op.temperature) * vr * vr / cfg.cols as f64;
    // Weights and activations are read once, activations written once.
    let bits = 8 * (w.weight_bytes() + 2 * w.activation_bytes());
    let e_op = w.compute_energy_per_op.unwrap_or(cim.e_op);

    let budget = energy_budget(cfg, &models.power, access, op, policy.period)?;
    r.ops = w.total_ops();
    r.cycles = cycles;
    r.refresh_stall = stall;
    r.inference_time = t_inf;
    r.energy_compute = r.ops * e_op;
    r.energy_memory = bits as f64 * e_bit;
    r.energy_refresh = n_arrays as f64 * budget.total() * t_inf / policy.period;
    r.energy_total = r.energy_compute + r.energy_memory + r.energy_refresh;
    r.refresh_fraction = if r.energy_total > 0.0 {
        r.energy_refresh / r.energy_total
    } else {
        0.0
    };
    r.tops_per_watt = if r.energy_total > 0.0 {
        r.ops / r.energy_total / 1e12
    } else {
        0.0
    };
    r.frame_rate_rel = cycles as f64 * w.t_cim_cycle / t_inf;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTemperature {
    pub room: CimReport,
    pub cryo: CimReport,
    /// TOPS/W at 4.2 K over TOPS/W at 300 K.
    pub efficiency_ratio: f64,
    /// Inference time at 300 K over inference time at 4.2 K.
    pub frame_rate_ratio: f64,
    /// Energy at 300 K over energy at 4.2 K when the faster 4.2 K run idles
    /// until the 300 K run finishes.
    pub equal_time_energy_ratio: f64,
    /// W, for the whole accelerator.
    pub idle_power: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

impl CrossTemperature {
    pub fn from_reports(room: CimReport, cryo: CimReport, idle_power: f64) -> Self {
        let wait = (room.inference_time - cryo.inference_time).max(0.0);
        Self {
            room,
            cryo,
            efficiency_ratio: ratio(cryo.tops_per_watt, room.tops_per_watt),
            frame_rate_ratio: ratio(room.inference_time, cryo.inference_time),
            equal_time_energy_ratio: ratio(room.energy_total, cryo.energy_total + idle_power * wait),
            idle_power,
        }
    }
}

/// Run the workload at (300 K, nominal) and (4.2 K, nominal), each refreshed
/// at its own full-yield period.
pub fn compare_temperatures(w: &WorkloadSpec, cfg: &ArrayConfig, models: &Models) -> Result<CrossTemperature> {
    let report = |t: f64| -> Result<CimReport> {
        let op = ThermalOperatingPoint::new(t, cfg.dev.vdd_nominal)?;
        let map = sample_array(cfg, &op)?;
        cim_energy(w, cfg, models, &op, &RefreshPolicy::full_yield(&map))
    };
    let room = report(T_ROOM)?;
    let cryo = report(T_CRYO)?;
    let idle = room.n_arrays as f64 * models.cim.idle_power_per_array;
    Ok(CrossTemperature::from_reports(room, cryo, idle))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_workload_is_valid() {
        let w = load_workload("name = \"empty\"\n").unwrap();
        assert!(w.layers.is_empty());
        assert_eq!(w.total_ops(), 0.0);
        assert_eq!(w.t_cim_cycle, 4.84e-3);
    }

    #[test]
    fn malformed_field_is_named() {
        let doc = "name = \"x\"\n[[layer]]\nname = \"a\"\nmacs = \"many\"\nweight_bytes = 1\nactivation_bytes = 1\n";
        match load_workload(doc) {
            Err(Error::Parse(msg)) => assert!(msg.contains("macs"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_count_is_a_validation_error() {
        let doc = "name = \"x\"\n[[layer]]\nname = \"a\"\nmacs = -3\nweight_bytes = 1\nactivation_bytes = 1\n";
        assert!(matches!(load_workload(doc), Err(Error::Validation(_))));
    }

    #[test]
    fn identical_reports_give_unit_ratios() {
        let r = CimReport {
            ops: 10.0,
            energy_total: 2.0,
            tops_per_watt: 5e-12,
            inference_time: 1.0,
            ..CimReport::default()
        };
        let c = CrossTemperature::from_reports(r, r, 3.0);
        assert_eq!(
            (c.efficiency_ratio, c.frame_rate_ratio, c.equal_time_energy_ratio),
            (1.0, 1.0, 1.0)
        );
    }
}
