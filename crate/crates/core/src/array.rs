//! Monte Carlo retention maps of a gain-cell array.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cell::{retention_from_leakage, BitCellConfig, RetentionSolver, RetentionTime};
use crate::device::{CellMismatch, DeviceParams, ThermalOperatingPoint};
use crate::error::{check_positive, Error, Result};
use crate::rng::{cell_normals, chip_normal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell: BitCellConfig,
    pub dev: DeviceParams,
    /// Per-cell write-port threshold mismatch, V.
    #[serde(rename = "sigma_vth_mismatch_v")]
    pub sigma_vth_mismatch: f64,
    /// Per-cell lognormal jitter of the leakage floor.
    pub sigma_floor_jitter: f64,
    /// Chip-to-chip lognormal scale of the thermally activated leakage.
    pub chip_leak_scale_sigma: f64,
    pub seed: u64,
    pub solver: RetentionSolver,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            rows: 32,
            cols: 128,
            cell: BitCellConfig::default(),
            dev: DeviceParams::default(),
            sigma_vth_mismatch: 0.0,
            sigma_floor_jitter: 0.0,
            chip_leak_scale_sigma: 0.0,
            seed: 0,
            solver: RetentionSolver::Adaptive,
        }
    }
}

impl ArrayConfig {
    pub fn n_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::domain(
                "rows * cols",
                (self.rows * self.cols) as f64,
                "must be >= 1",
            ));
        }
        if self.rows > 1 << 16 || self.cols > 1 << 16 {
            return Err(Error::Usage("array dimensions are limited to 65536".into()));
        }
        for (name, v) in [
            ("sigma_vth_mismatch", self.sigma_vth_mismatch),
            ("sigma_floor_jitter", self.sigma_floor_jitter),
            ("chip_leak_scale_sigma", self.chip_leak_scale_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "must be >= 0"));
            }
        }
        self.dev.validate()
    }

    /// Global leakage multiplier of a chip. Chip 0 is the reference.
    pub fn chip_scale(&self, chip: u32) -> f64 {
        if chip == 0 || self.chip_leak_scale_sigma == 0.0 {
            1.0
        } else {
            (self.chip_leak_scale_sigma * chip_normal(self.seed, chip)).exp()
        }
    }

    pub(crate) fn mismatch(&self, chip: u32, chip_scale: f64, row: usize, col: usize) -> CellMismatch {
        let (z_vth, z_floor) = cell_normals(self.seed, chip, row as u32, col as u32);
        CellMismatch {
            dvth: self.sigma_vth_mismatch * z_vth,
            floor_scale: (self.sigma_floor_jitter * z_floor).exp(),
            chip_scale,
        }
    }
}

/// Per-cell retention times in row-major order plus summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct RetentionMap {
    pub rows: usize,
    pub cols: usize,
    pub retention: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub cv: f64,
}

impl RetentionMap {
    pub fn from_values(rows: usize, cols: usize, retention: Vec<f64>) -> Result<Self> {
        if rows * cols != retention.len() || retention.is_empty() {
            return Err(Error::Usage(format!(
                "{} values do not fill a {rows}x{cols} map",
                retention.len()
            )));
        }
        if let Some(bad) = retention.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::domain("retention", *bad, "entries must be positive and finite"));
        }
        let (mean, std) = mean_std(&retention);
        let min = retention.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            rows,
            cols,
            mean,
            std,
            min,
            cv: std / mean,
            retention,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.retention[row * self.cols + col]
    }

    pub fn len(&self) -> usize {
        self.retention.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retention.is_empty()
    }

    /// Retention values in ascending order.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.retention.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Sequential two-pass mean and population standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let x0 = xs[0];
    let shift = xs.iter().map(|x| x - x0).sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - x0 - shift).powi(2)).sum::<f64>() / n;
    (x0 + shift, var.sqrt())
}

pub fn sample_array(cfg: &ArrayConfig, op: &ThermalOperatingPoint) -> Result<RetentionMap> {
    sample_chip(cfg, op, 0)
}

/// Retention map of chip `chip` of the ensemble defined by `cfg.seed`.
pub fn sample_chip(cfg: &ArrayConfig, op: &ThermalOperatingPoint, chip: u32) -> Result<RetentionMap> {
    cfg.validate()?;
    op.validate()?;
    cfg.cell.validate(&cfg.dev, op)?;
    let chip_scale = cfg.chip_scale(chip);
    let cols = cfg.cols;
    let values: Vec<f64> = (0..cfg.n_cells())
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            cell_retention(cfg, op, chip, chip_scale, row, col).map_err(|e| Error::Cell {
                row,
                col,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    RetentionMap::from_values(cfg.rows, cfg.cols, values)
}

fn cell_retention(
    cfg: &ArrayConfig,
    op: &ThermalOperatingPoint,
    chip: u32,
    chip_scale: f64,
    row: usize,
    col: usize,
) -> Result<f64> {
    let m = cfg.mismatch(chip, chip_scale, row, col);
    let leak = cfg.dev.cell_leakage(op, &m);
    match retention_from_leakage(&cfg.cell, &cfg.dev, op, &leak, cfg.solver)? {
        RetentionTime::Seconds(s) => Ok(s),
        RetentionTime::ExceedsHorizon => Err(Error::Usage(format!(
            "retention exceeds the {} s integration horizon",
            cfg.cell.horizon
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub cv: f64,
    /// Anderson–Darling A² against a normal with the sample's own mean and
    /// standard deviation. `None` when every value is identical.
    pub anderson_darling: Option<f64>,
}

pub fn array_stats(map: &RetentionMap) -> ArrayStats {
    let (mean, std) = mean_std(&map.retention);
    let sorted = map.sorted();
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    ArrayStats {
        mean,
        std,
        min,
        max,
        cv: std / mean,
        anderson_darling: anderson_darling(&sorted, mean, std),
    }
}

fn anderson_darling(sorted: &[f64], mean: f64, std: f64) -> Option<f64> {
    if !(std > 0.0) {
        return None;
    }
    let normal = Normal::new(mean, std).ok()?;
    let n = sorted.len();
    let eps = 1e-300;
    let s: f64 = (0..n)
        .map(|i| {
            let lo = normal.cdf(sorted[i]).max(eps).ln();
            let hi = (1.0 - normal.cdf(sorted[n - 1 - i])).max(eps).ln();
            (2 * i + 1) as f64 * (lo + hi)
        })
        .sum();
    Some(-(n as f64) - s / n as f64)
}

/// Mean and standard deviation of each chip normalized to chip 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChipSummary {
    pub chip: u32,
    pub mean: f64,
    pub std: f64,
    pub mean_rel: f64,
    pub std_rel: f64,
}

pub fn chip_ensemble(
    cfg: &ArrayConfig,
    op: &ThermalOperatingPoint,
    n_chips: u32,
) -> Result<Vec<ChipSummary>> {
    if n_chips == 0 {
        return Err(Error::domain("n_chips", 0.0, "must be >= 1"));
    }
    let maps = (0..n_chips)
        .map(|c| sample_chip(cfg, op, c))
        .collect::<Result<Vec<_>>>()?;
    let (m0, s0) = (maps[0].mean, maps[0].std);
    Ok(maps
        .iter()
        .zip(0..)
        .map(|(m, chip)| ChipSummary {
            chip,
            mean: m.mean,
            std: m.std,
            mean_rel: m.mean / m0,
            std_rel: if s0 > 0.0 { m.std / s0 } else { 1.0 },
        })
        .collect())
}

/// Spread-of-retention targets for [`calibrate_variability`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariabilityTargets {
    /// Coefficient of variation at the warm operating point.
    pub cv_warm: Option<(ThermalOperatingPoint, f64)>,
    /// Coefficient of variation at the cold operating point.
    pub cv_cold: Option<(ThermalOperatingPoint, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariabilityFit {
    pub sigma_vth_mismatch: f64,
    pub sigma_floor_jitter: f64,
    /// Relative cv residuals (sampled / target - 1) at the warm and cold points.
    pub residual_warm: Option<f64>,
    pub residual_cold: Option<f64>,
}

const VAR_BISECT_ITERS: usize = 48;

/// Fit threshold mismatch to the warm cv, then floor jitter to the cold cv.
///
/// Threshold mismatch moves the subthreshold current, which dominates warm
/// leakage; floor jitter moves the floor, which dominates cold leakage. The
/// two are fitted in that order, each by bisection on the sampled cv of the
/// seed's own draws, so the search is deterministic.
pub fn calibrate_variability(cfg: &ArrayConfig, targets: &VariabilityTargets) -> Result<VariabilityFit> {
    let mut work = ArrayConfig {
        solver: RetentionSolver::Analytic,
        chip_leak_scale_sigma: 0.0,
        ..*cfg
    };
    let mut fit = VariabilityFit {
        sigma_vth_mismatch: cfg.sigma_vth_mismatch,
        sigma_floor_jitter: cfg.sigma_floor_jitter,
        residual_warm: None,
        residual_cold: None,
    };
    if let Some((op, target)) = targets.cv_warm {
        let s = fit_sigma(&mut work, &op, target, 0.2, |c, s| c.sigma_vth_mismatch = s)?;
        fit.sigma_vth_mismatch = s;
        work.sigma_vth_mismatch = s;
    }
    if let Some((op, target)) = targets.cv_cold {
        let s = fit_sigma(&mut work, &op, target, 0.1, |c, s| c.sigma_floor_jitter = s)?;
        fit.sigma_floor_jitter = s;
        work.sigma_floor_jitter = s;
    }
    // Report residuals with both parameters in place.
    if let Some((op, target)) = targets.cv_warm {
        fit.residual_warm = Some(cv_residual(&work, &op, target)?);
    }
    if let Some((op, target)) = targets.cv_cold {
        fit.residual_cold = Some(cv_residual(&work, &op, target)?);
    }
    Ok(fit)
}

fn cv_residual(cfg: &ArrayConfig, op: &ThermalOperatingPoint, target: f64) -> Result<f64> {
    let cv = sample_array(cfg, op)?.cv;
    Ok(if target > 0.0 { cv / target - 1.0 } else { cv })
}

fn fit_sigma(
    cfg: &mut ArrayConfig,
    op: &ThermalOperatingPoint,
    target: f64,
    hi: f64,
    set: impl Fn(&mut ArrayConfig, f64),
) -> Result<f64> {
    if !(target >= 0.0) {
        return Err(Error::domain("cv target", target, "must be >= 0"));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..VAR_BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        set(cfg, mid);
        if sample_array(cfg, op)?.cv < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    set(cfg, s);
    let cv = sample_array(cfg, op)?.cv;
    if ((cv - target) / target).abs() > 0.05 {
        return Err(Error::Calibration {
            what: format!("cv {target} at {} K is outside the searchable range", op.temperature),
            residual: cv / target - 1.0,
        });
    }
    Ok(s)
}

/// Fit the chip-to-chip sigma so that the spread (max - min) of chip-0
/// normalized means over `n_chips` chips equals `target_spread`.
pub fn calibrate_chip_sigma(
    cfg: &ArrayConfig,
    op: &ThermalOperatingPoint,
    n_chips: u32,
    target_spread: f64,
) -> Result<f64> {
    check_positive("target_spread", target_spread)?;
    if n_chips < 2 {
        return Err(Error::domain("n_chips", n_chips as f64, "must be >= 2 to define a spread"));
    }
    let mut work = ArrayConfig {
        solver: RetentionSolver::Analytic,
        ..*cfg
    };
    let spread = |w: &ArrayConfig| -> Result<f64> {
        let e = chip_ensemble(w, op, n_chips)?;
        let lo = e.iter().map(|c| c.mean_rel).fold(f64::INFINITY, f64::min);
        let hi = e.iter().map(|c| c.mean_rel).fold(f64::NEG_INFINITY, f64::max);
        Ok(hi - lo)
    };
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..VAR_BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        work.chip_leak_scale_sigma = mid;
        if spread(&work)? < target_spread {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Standard normal CDF.
pub(crate) fn phi(x: f64) -> f64 {
    Normal::standard().cdf(x)
}
