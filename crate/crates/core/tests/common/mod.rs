#![allow(dead_code)]

use std::sync::OnceLock;

use cryo_edram::calibrate::{calibrate_profile, TargetSet};
use cryo_edram::Profile;

/// Profile calibrated once per test binary on the bundled anchors.
pub fn profile() -> &'static Profile {
    static P: OnceLock<Profile> = OnceLock::new();
    P.get_or_init(|| calibrate_profile(&TargetSet::bundled()).expect("bundled calibration"))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

/// Standard normal CDF by Abramowitz–Stegun 7.1.26, an oracle independent of
/// the library's own implementation.
pub fn phi_oracle(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * z);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    let erf = 1.0 - poly * (-z * z).exp();
    if x >= 0.0 {
        0.5 * (1.0 + erf)
    } else {
        0.5 * (1.0 - erf)
    }
}
