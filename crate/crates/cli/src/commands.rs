use std::path::Path;

use serde::Serialize;

use cryo_edram::array::{array_stats, chip_ensemble, sample_array, ArrayStats};
use cryo_edram::calibrate::{calibrate_profile, residual_report, TargetSet, DEFAULT_TARGETS_TOML};
use cryo_edram::cim::{cim_energy, compare_temperatures, load_workload, CimReport, RESNET18_TOML};
use cryo_edram::dvs::{joint_dvs_drps, optimal_vdd, vdd_sweep, JointChoice, Objective, SweepPoint};
use cryo_edram::profile::Residual;
use cryo_edram::refresh::RefreshPolicy;
use cryo_edram::{Error, Profile, ThermalOperatingPoint};

use crate::output::{ensure_dir, num, read_text, write_csv, write_text, write_toml, Provenance, TOOL};
use crate::{Failure, ObjectiveArg};

fn load_profile(path: &Path) -> Result<(Profile, String), Failure> {
    let text = read_text(path)?;
    let p = Profile::from_toml_str(&text)?;
    Ok((p, text))
}

fn print_residuals(rs: &[Residual]) {
    println!(
        "{:<4} {:<36} {:>13} {:>13} {:>10} {:>9}",
        "", "anchor", "target", "value", "error", "tol"
    );
    for r in rs {
        let status = match (r.passed(), r.mandatory) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "warn",
        };
        println!(
            "{:<4} {:<36} {:>13.5e} {:>13.5e} {:>+10.4} {:>9}",
            status, r.name, r.target, r.value, r.error, r.tolerance
        );
    }
}

fn residual_rows(rs: &[Residual]) -> Vec<Vec<String>> {
    rs.iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.unit.clone(),
                num(r.target),
                num(r.value),
                format!("{:?}", r.kind).to_lowercase(),
                num(r.error),
                num(r.tolerance),
                r.mandatory.to_string(),
                r.passed().to_string(),
            ]
        })
        .collect()
}

const RESIDUAL_HEADER: &[&str] = &[
    "anchor", "unit", "target", "value", "kind", "error", "tolerance", "mandatory", "passed",
];

pub fn calibrate(targets: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let text = match targets {
        Some(p) => read_text(p)?,
        None => DEFAULT_TARGETS_TOML.to_string(),
    };
    let set = TargetSet::from_toml_str(&text)?;
    let profile = calibrate_profile(&set)?;
    let prov = Provenance::new(text.as_bytes(), profile.array.seed);
    let body = profile.to_toml_string()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_text(out, &format!("{}{body}", prov.comment()))?;

    print_residuals(&profile.residuals);
    for d in &profile.defaulted {
        eprintln!("warning: no anchor constrains {d}; default kept");
    }
    let failed: Vec<String> = profile.failed_mandatory().iter().map(|r| r.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Residuals(failed))
    }
}

#[derive(Serialize)]
struct ArrayReport {
    temperature_k: f64,
    vdd_v: f64,
    rows: usize,
    cols: usize,
    t_min_s: f64,
    stats: ArrayStats,
}

pub fn array(
    profile_path: &Path,
    t: f64,
    vdd: Option<f64>,
    seed: u64,
    chips: Option<u32>,
    out: &Path,
) -> Result<(), Failure> {
    let (profile, text) = load_profile(profile_path)?;
    let cfg = profile.array_config_seeded(seed);
    let op = ThermalOperatingPoint::new(t, vdd.unwrap_or(profile.device.vdd_nominal))?;
    let map = sample_array(&cfg, &op)?;
    let stats = array_stats(&map);
    let prov = Provenance::new(text.as_bytes(), seed);
    ensure_dir(out)?;

    let where_ = format!("retention time, s, at {} K, {} V", op.temperature, op.vdd);
    let grid: Vec<Vec<String>> = map
        .retention
        .chunks(map.cols)
        .map(|row| row.iter().map(|&x| num(x)).collect())
        .collect();
    write_csv(
        &out.join("retention_map.csv"),
        &prov,
        &[format!("{where_}; {} rows x {} columns", map.rows, map.cols)],
        &[],
        &grid,
    )?;
    let cells: Vec<Vec<String>> = (0..map.len())
        .map(|i| {
            vec![
                (i / map.cols).to_string(),
                (i % map.cols).to_string(),
                num(map.retention[i]),
            ]
        })
        .collect();
    write_csv(
        &out.join("retention_cells.csv"),
        &prov,
        &[where_],
        &["row", "col", "retention_s"],
        &cells,
    )?;
    write_toml(
        &out.join("array_stats.toml"),
        &prov,
        &ArrayReport {
            temperature_k: op.temperature,
            vdd_v: op.vdd,
            rows: map.rows,
            cols: map.cols,
            t_min_s: map.min,
            stats,
        },
    )?;
    if let Some(n) = chips {
        let e = chip_ensemble(&cfg, &op, n)?;
        let rows: Vec<Vec<String>> = e
            .iter()
            .map(|c| {
                vec![
                    c.chip.to_string(),
                    num(c.mean),
                    num(c.std),
                    num(c.mean_rel),
                    num(c.std_rel),
                ]
            })
            .collect();
        write_csv(
            &out.join("chips.csv"),
            &prov,
            &[],
            &["chip", "mean_s", "std_s", "mean_rel", "std_rel"],
            &rows,
        )?;
    }
    println!(
        "mean {:.5e} s  std {:.5e} s  min {:.5e} s  cv {:.4}",
        map.mean, map.std, map.min, map.cv
    );
    Ok(())
}

/// `a,b,c` or `start:stop:step` (inclusive).
fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Model(Error::Usage(format!("cannot read supply grid '{s}'")));
    let parts: Vec<&str> = s.split(':').collect();
    let v = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step): (f64, f64, f64) = (
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
                step.trim().parse().map_err(|_| bad())?,
            );
            if !(step > 0.0) || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            // Round to the step's decimal resolution so 0.6 + 3 * 0.1 prints as 0.9.
            (0..=n).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect()
        }
        [list] => list
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

#[derive(Serialize)]
struct SweepChoice {
    temperature_k: f64,
    objective: String,
    choice: SweepPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    joint: Option<JointReport>,
}

#[derive(Serialize)]
struct JointReport {
    max_error: f64,
    #[serde(flatten)]
    choice: JointChoice,
}

pub fn sweep(
    profile_path: &Path,
    t: f64,
    grid: &str,
    objective: ObjectiveArg,
    max_error: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    let (profile, text) = load_profile(profile_path)?;
    let vdds = parse_grid(grid)?;
    let cfg = profile.array_config_seeded(seed);
    let models = profile.models();
    let points = vdd_sweep(&cfg, &models, t, &vdds)?;
    let (obj, name) = match objective {
        ObjectiveArg::MinRetention => (Objective::MinRetentionPower, "min-retention"),
        ObjectiveArg::MinDynamic => (Objective::MinDynamicPower, "min-dynamic"),
    };
    let best = optimal_vdd(&points, obj)?;
    let joint = match max_error {
        Some(e) => Some(JointReport {
            max_error: e,
            choice: joint_dvs_drps(&cfg, &models, t, &vdds, e)?,
        }),
        None => None,
    };
    let prov = Provenance::new(text.as_bytes(), seed);
    ensure_dir(out)?;
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                num(p.vdd),
                num(p.mean_ret),
                num(p.std_ret),
                num(p.t_min),
                num(p.p_retention),
                num(p.p_dynamic),
                p.extrapolated.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &prov,
        &[format!("supply sweep at {t} K")],
        &[
            "vdd_V",
            "mean_retention_s",
            "std_retention_s",
            "t_min_s",
            "p_retention_W",
            "p_dynamic_W",
            "extrapolated",
        ],
        &rows,
    )?;
    write_toml(
        &out.join("choice.toml"),
        &prov,
        &SweepChoice {
            temperature_k: t,
            objective: name.into(),
            choice: best,
            joint,
        },
    )?;
    println!(
        "{name}: {} V  P_ret {:.4e} W  P_dyn {:.4e} W",
        best.vdd, best.p_retention, best.p_dynamic
    );
    Ok(())
}

#[derive(Serialize)]
struct CimCompare {
    efficiency_ratio: f64,
    frame_rate_ratio: f64,
    equal_time_energy_ratio: f64,
    idle_power_w: f64,
    ops_per_mac: f64,
    room: CimReport,
    cryo: CimReport,
}

fn report_row(r: &CimReport) -> Vec<String> {
    vec![
        num(r.temperature),
        num(r.vdd),
        num(r.ops),
        r.cycles.to_string(),
        num(r.refresh_period),
        num(r.inference_time),
        num(r.energy_compute),
        num(r.energy_memory),
        num(r.energy_refresh),
        num(r.energy_total),
        num(r.refresh_fraction),
        num(r.tops_per_watt),
        num(r.frame_rate_rel),
    ]
}

const REPORT_HEADER: &[&str] = &[
    "temperature_K",
    "vdd_V",
    "ops",
    "cycles",
    "refresh_period_s",
    "inference_time_s",
    "energy_compute_J",
    "energy_memory_J",
    "energy_refresh_J",
    "energy_total_J",
    "refresh_fraction",
    "tops_per_watt",
    "frame_rate_rel",
];

pub fn cim(
    profile_path: &Path,
    workload: Option<&Path>,
    t: f64,
    vdd: Option<f64>,
    both: bool,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    let (profile, text) = load_profile(profile_path)?;
    let w = match workload {
        Some(p) => load_workload(&read_text(p)?)?,
        None => load_workload(RESNET18_TOML)?,
    };
    let cfg = profile.array_config_seeded(seed);
    let models = profile.models();
    let prov = Provenance::new(text.as_bytes(), seed);
    let note = format!(
        "workload '{}', {} ops per MAC",
        w.name, w.ops_per_mac
    );
    ensure_dir(out)?;
    if both {
        let c = compare_temperatures(&w, &cfg, &models)?;
        write_toml(
            &out.join("cim_compare.toml"),
            &prov,
            &CimCompare {
                efficiency_ratio: c.efficiency_ratio,
                frame_rate_ratio: c.frame_rate_ratio,
                equal_time_energy_ratio: c.equal_time_energy_ratio,
                idle_power_w: c.idle_power,
                ops_per_mac: w.ops_per_mac,
                room: c.room,
                cryo: c.cryo,
            },
        )?;
        let rows = vec![
            vec!["tops_per_watt".into(), num(c.room.tops_per_watt), num(c.cryo.tops_per_watt), num(c.efficiency_ratio)],
            vec!["inference_time_s".into(), num(c.room.inference_time), num(c.cryo.inference_time), num(c.frame_rate_ratio)],
            vec![
                "energy_equal_time_J".into(),
                num(c.room.energy_total),
                num(c.cryo.energy_total + c.idle_power * (c.room.inference_time - c.cryo.inference_time).max(0.0)),
                num(c.equal_time_energy_ratio),
            ],
            vec!["refresh_fraction".into(), num(c.room.refresh_fraction), num(c.cryo.refresh_fraction), String::new()],
        ];
        write_csv(
            &out.join("cim_compare.csv"),
            &prov,
            &[note],
            &["quantity", "300K", "4.2K", "ratio"],
            &rows,
        )?;
        println!(
            "TOPS/W {:.2} (300 K) / {:.2} (4.2 K)  efficiency x{:.3}  frame rate x{:.3}  equal-time energy x{:.3}",
            c.room.tops_per_watt,
            c.cryo.tops_per_watt,
            c.efficiency_ratio,
            c.frame_rate_ratio,
            c.equal_time_energy_ratio
        );
    } else {
        let op = ThermalOperatingPoint::new(t, vdd.unwrap_or(profile.device.vdd_nominal))?;
        let policy = RefreshPolicy::full_yield(&sample_array(&cfg, &op)?);
        let r = cim_energy(&w, &cfg, &models, &op, &policy)?;
        write_toml(&out.join("cim_report.toml"), &prov, &r)?;
        write_csv(
            &out.join("cim_report.csv"),
            &prov,
            &[note],
            REPORT_HEADER,
            &[report_row(&r)],
        )?;
        println!(
            "TOPS/W {:.2}  refresh fraction {:.4}  energy {:.4e} J",
            r.tops_per_watt, r.refresh_fraction, r.energy_total
        );
    }
    Ok(())
}

pub fn report(profile_path: &Path, targets: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let (profile, text) = load_profile(profile_path)?;
    let residuals = match targets {
        Some(p) => residual_report(&profile, &TargetSet::from_toml_str(&read_text(p)?)?)?,
        None => profile.residuals.clone(),
    };
    println!("profile {} ({})", profile_path.display(), TOOL);
    print_residuals(&residuals);
    for d in &profile.defaulted {
        println!("defaulted: {d}");
    }
    for n in &profile.notes {
        println!("note: {n}");
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let prov = Provenance::new(text.as_bytes(), profile.array.seed);
        write_csv(
            &dir.join("residuals.csv"),
            &prov,
            &[],
            RESIDUAL_HEADER,
            &residual_rows(&residuals),
        )?;
    }
    Ok(())
}
