//! Behavioral simulator of a cryogenic gain-cell eDRAM array.
//!
//! The crate is organized bottom-up:
//!
//! * [`device`]: temperature- and supply-dependent transistor leakage,
//! * [`cell`]: storage-node discharge, retention, access energy and delay,
//! * [`array`]: Monte Carlo retention maps with cell and chip variability,
//! * [`refresh`]: refresh periods, error rates, retention and dynamic power,
//! * [`dvs`]: supply sweeps and operating-point selection,
//! * [`cim`]: compute-in-memory workload energy accounting,
//! * [`profile`]: calibrated parameter sets and their file format.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod calibrate;
pub mod cell;
pub mod cim;
pub mod device;
pub mod dvs;
pub mod error;
pub mod integrate;
pub mod profile;
pub mod refresh;
pub mod rng;

pub use array::{array_stats, chip_ensemble, sample_array, ArrayConfig, ArrayStats, RetentionMap};
pub use cell::{
    retention_time, retention_time_analytic, AccessMetrics, AccessModel, BitCellConfig,
    ReadoutModel, ReadoutStructure, RetentionSolver, RetentionTime, Topology,
};
pub use device::{DeviceParams, ThermalOperatingPoint};
pub use error::{Error, Result};
pub use profile::Profile;
