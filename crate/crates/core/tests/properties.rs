use proptest::prelude::*;

use cryo_edram::cell::{retention_time_with, AccessModel, BitCellConfig, RetentionSolver, Topology};
use cryo_edram::cim::{cim_energy, load_workload};
use cryo_edram::profile::Models;
use cryo_edram::refresh::{
    drps_select, error_rate, retention_power, EnergyBudget, RefreshMode, RefreshPolicy,
};
use cryo_edram::{ArrayConfig, DeviceParams, RetentionMap, ThermalOperatingPoint};

fn small_map(values: Vec<f64>) -> RetentionMap {
    RetentionMap::from_values(4, 4, values).unwrap()
}

fn retention(cell: &BitCellConfig, dev: &DeviceParams, t: f64, solver: RetentionSolver) -> f64 {
    let op = ThermalOperatingPoint::new(t, 1.1).unwrap();
    retention_time_with(cell, dev, &op, solver).unwrap().seconds_or_inf()
}

fn device(i_sub0: f64, i_floor: f64, junction_i0: f64) -> DeviceParams {
    DeviceParams {
        i_sub0,
        i_floor,
        junction_i0,
        ..DeviceParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn error_rate_is_a_monotone_step_function(
        values in prop::collection::vec(1e-6f64..1.0, 16),
        probes in prop::collection::vec(0.0f64..1.2, 8),
    ) {
        let map = small_map(values.clone());
        let mut probes = probes;
        probes.sort_by(f64::total_cmp);
        let rates: Vec<f64> = probes.iter().map(|&p| error_rate(&map, p)).collect();
        prop_assert!(rates.windows(2).all(|w| w[0] <= w[1]));
        for &r in &rates {
            prop_assert!((r * 16.0 - (r * 16.0).round()).abs() < 1e-12);
        }
        // One step per distinct retention value.
        let mut distinct = values.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let mut levels: Vec<f64> = distinct.iter().map(|&v| error_rate(&map, v * (1.0 + 1e-12))).collect();
        levels.dedup();
        prop_assert_eq!(levels.len(), distinct.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn drps_period_grows_with_error_budget(
        values in prop::collection::vec(1e-6f64..1.0, 16),
        a in 0.0f64..0.999,
        b in 0.0f64..0.999,
    ) {
        let map = small_map(values);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = drps_select(&map, lo).unwrap();
        let p_hi = drps_select(&map, hi).unwrap();
        prop_assert!(p_hi >= p_lo);
        prop_assert!(error_rate(&map, p_lo) <= lo + 1e-12);
    }

    #[test]
    fn retention_power_times_period_is_the_budget(
        r in 0.0f64..1e-9, w in 0.0f64..1e-9, l in 0.0f64..1e-9, t in 1e-6f64..100.0,
    ) {
        let b = EnergyBudget { e_read: r, e_write: w, e_leakage: l };
        let p = retention_power(&b, t).unwrap();
        prop_assert!((p * t - (r + w + l)).abs() <= 1e-12 * (r + w + l).max(1e-300));
    }

    #[test]
    fn swing_never_below_floor(t in 1.0f64..400.0, n in 1.0f64..2.0, floor in 0.0f64..0.06) {
        let d = DeviceParams { n_ideality: n, ss_floor: floor, ..DeviceParams::default() };
        let ss = d.subthreshold_swing(t).unwrap();
        prop_assert!(ss >= floor);
        if t < d.swing_crossover_temperature() {
            prop_assert_eq!(ss, floor);
        }
    }

    #[test]
    fn off_leakage_monotone_in_temperature_and_overdrive(
        t1 in 1.0f64..400.0, t2 in 1.0f64..400.0,
        v1 in -0.5f64..0.3, v2 in -0.5f64..0.3,
        vds in 0.0f64..1.1,
    ) {
        let d = device(1e-6, 1e-18, 1e-2);
        let (tl, th) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(d.off_leakage(0.0, vds, th).unwrap() >= d.off_leakage(0.0, vds, tl).unwrap());
        // Larger gate underdrive means larger Vth overdrive and less current.
        let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
        prop_assert!(d.off_leakage(lo, vds, 300.0).unwrap() <= d.off_leakage(hi, vds, 300.0).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn retention_monotone_in_capacitance_margin_and_leakage(
        i_sub0 in 1e-9f64..1e-5,
        i_floor in 1e-19f64..1e-16,
        junction in 0.0f64..1e-1,
        t in prop::sample::select(vec![4.2, 77.0, 150.0, 300.0]),
        k in 1.05f64..4.0,
        adaptive in any::<bool>(),
    ) {
        let solver = if adaptive { RetentionSolver::Adaptive } else { RetentionSolver::Analytic };
        let dev = device(i_sub0, i_floor, junction);
        let cell = BitCellConfig { horizon: 1e30, ..BitCellConfig::default() };
        let base = retention(&cell, &dev, t, solver);

        let bigger = BitCellConfig { c_sn: cell.c_sn * k, ..cell };
        prop_assert!(retention(&bigger, &dev, t, solver) > base);

        let wider = BitCellConfig { v_fail_fraction: cell.v_fail_fraction / k, ..cell };
        prop_assert!(retention(&wider, &dev, t, solver) > base);

        let leaky = device(i_sub0 * k, i_floor * k, junction * k);
        prop_assert!(retention(&cell, &leaky, t, solver) < base);
    }

    #[test]
    fn access_ratios_survive_capacitance_rescaling(
        k in 0.1f64..10.0,
        t in prop::sample::select(vec![4.2, 10.0, 300.0]),
    ) {
        let dev = DeviceParams::default();
        let op = ThermalOperatingPoint::new(t, 1.1).unwrap();
        let acc = AccessModel::default();
        let scaled = AccessModel {
            c_rbl: acc.c_rbl * k,
            write_parasitic: acc.write_parasitic.map(|c| c * k),
            write_drive: acc.write_drive.map(|d| d * k),
            read_drive: acc.read_drive.map(|d| d * k),
            ..acc
        };
        let cell = |topo| {
            let c = BitCellConfig::with_topology(topo);
            BitCellConfig { c_sn: c.c_sn * k, ..c }
        };
        let plain = |topo| BitCellConfig::with_topology(topo);
        for topo in [Topology::NWrite, Topology::PWrite] {
            let a = acc.write_access(&plain(topo), &dev, &op).unwrap();
            let a0 = acc.write_access(&plain(Topology::TgWrite2tnRead), &dev, &op).unwrap();
            let b = scaled.write_access(&cell(topo), &dev, &op).unwrap();
            let b0 = scaled.write_access(&cell(Topology::TgWrite2tnRead), &dev, &op).unwrap();
            prop_assert!(((a.energy / a0.energy) / (b.energy / b0.energy) - 1.0).abs() < 1e-12);
            prop_assert!(((a.delay / a0.delay) / (b.delay / b0.delay) - 1.0).abs() < 1e-12);
        }
        let a = acc.read_access(&plain(Topology::Read1t), &dev, &op, true).unwrap();
        let a0 = acc.read_access(&plain(Topology::Read2tn), &dev, &op, true).unwrap();
        let b = scaled.read_access(&cell(Topology::Read1t), &dev, &op, true).unwrap();
        let b0 = scaled.read_access(&cell(Topology::Read2tn), &dev, &op, true).unwrap();
        prop_assert!(((a.energy / a0.energy) / (b.energy / b0.energy) - 1.0).abs() < 1e-12);
        prop_assert!(((a.delay / a0.delay) / (b.delay / b0.delay) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cim_identity_and_refresh_fraction_trend(
        macs in 1u64..10_000_000,
        p1 in 1e-4f64..1.0,
        p2 in 1e-4f64..1.0,
    ) {
        let doc = format!(
            "name = \"toy\"\n[[layer]]\nname = \"fc\"\nmacs = {macs}\nweight_bytes = 4096\nactivation_bytes = 512\n"
        );
        let w = load_workload(&doc).unwrap();
        let cfg = ArrayConfig { rows: 8, cols: 8, ..ArrayConfig::default() };
        let models = Models::default();
        let op = ThermalOperatingPoint::new(300.0, 1.1).unwrap();
        let (short, long) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let run = |p| {
            let policy = RefreshPolicy::new(p, RefreshMode::FullYield).unwrap();
            cim_energy(&w, &cfg, &models, &op, &policy).unwrap()
        };
        let a = run(short);
        let b = run(long);
        prop_assert!((a.tops_per_watt * 1e12 * a.energy_total / a.ops - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.refresh_fraction));
        prop_assert!(b.refresh_fraction <= a.refresh_fraction);
    }
}
