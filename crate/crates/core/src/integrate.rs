//! Adaptive Dormand–Prince 5(4) integration of a scalar ODE up to the first
//! crossing of a threshold.

use crate::error::{Error, Result};

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer & Wanner dense output).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    /// Time of the first crossing.
    At(f64),
    /// No crossing before the horizon.
    Beyond,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: u32,
    pub rejected: u32,
}

/// Integrate `dy/dt = f(t, y)` from `(0, y0)` until `y` first reaches
/// `threshold` or `t` passes `horizon`.
///
/// The crossing inside the bracketing step is located by bisection on the
/// method's fourth-order dense output.
pub fn first_crossing(
    f: impl Fn(f64, f64) -> f64,
    y0: f64,
    threshold: f64,
    horizon: f64,
    h0: f64,
    tol: Tolerances,
) -> Result<(Crossing, Stats)> {
    let mut stats = Stats::default();
    let side = (y0 - threshold).signum();
    if side == 0.0 {
        return Ok((Crossing::At(0.0), stats));
    }

    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(t, y);
    let mut h = h0.min(horizon);
    const MAX_STEPS: u32 = 1_000_000;

    while t < horizon {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::Numeric {
                reason: "step budget exhausted",
                t,
                v: y,
                h,
            });
        }
        if h < 1e-14 * t.max(1e-300) || h < f64::MIN_POSITIVE * 1e10 {
            return Err(Error::Numeric {
                reason: "step size underflow",
                t,
                v: y,
                h,
            });
        }
        h = h.min(horizon - t).max(0.0);
        if h == 0.0 {
            break;
        }

        let k2 = f(t + C2 * h, y + h * A21 * k1);
        let k3 = f(t + C3 * h, y + h * (A31 * k1 + A32 * k2));
        let k4 = f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(
            t + h,
            y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        );
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = f(t + h, y_new);
        let err_abs = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = tol.atol + tol.rtol * y.abs().max(y_new.abs());
        let err = (err_abs / scale).abs();

        if !err.is_finite() {
            return Err(Error::Numeric {
                reason: "non-finite error estimate",
                t,
                v: y,
                h,
            });
        }

        if err <= 1.0 {
            stats.accepted += 1;
            if (y_new - threshold).signum() != side {
                let dense = [
                    y,
                    y_new - y,
                    h * k1 - (y_new - y),
                    (y_new - y) - h * k7 - (h * k1 - (y_new - y)),
                    h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
                ];
                let tc = locate(t, h, &dense, threshold);
                return Ok((Crossing::At(tc), stats));
            }
            t += h;
            y = y_new;
            k1 = k7;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    Ok((Crossing::Beyond, stats))
}

fn locate(t0: f64, h: f64, r: &[f64; 5], threshold: f64) -> f64 {
    let y = |s: f64| r[0] + s * (r[1] + (1.0 - s) * (r[2] + s * (r[3] + (1.0 - s) * r[4])));
    let side0 = (r[0] - threshold).signum();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (y(mid) - threshold).signum() == side0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t0 + h * 0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_decay_crossing() {
        // dy/dt = -2, y0 = 1, threshold 0.5 -> t = 0.25.
        let (c, _) = first_crossing(|_, _| -2.0, 1.0, 0.5, 10.0, 1e-3, Tolerances::default())
            .unwrap();
        match c {
            Crossing::At(t) => assert!((t - 0.25).abs() < 1e-12, "{t}"),
            Crossing::Beyond => panic!("no crossing"),
        }
    }

    #[test]
    fn exponential_decay_crossing() {
        // y = e^{-t}, crossing 0.5 at ln 2.
        let (c, stats) =
            first_crossing(|_, y| -y, 1.0, 0.5, 10.0, 1e-2, Tolerances::default()).unwrap();
        let Crossing::At(t) = c else { panic!() };
        assert!((t - std::f64::consts::LN_2).abs() < 1e-6, "{t}");
        assert!(stats.accepted < 100);
    }

    #[test]
    fn horizon_sentinel() {
        let (c, _) =
            first_crossing(|_, _| -1e-6, 1.0, 0.5, 10.0, 1.0, Tolerances::default()).unwrap();
        assert_eq!(c, Crossing::Beyond);
    }

    #[test]
    fn rising_crossing() {
        let (c, _) =
            first_crossing(|_, _| 3.0, 0.0, 0.6, 10.0, 1e-3, Tolerances::default()).unwrap();
        let Crossing::At(t) = c else { panic!() };
        assert!((t - 0.2).abs() < 1e-12);
    }

    #[test]
    fn non_finite_rhs_is_a_numeric_error() {
        let r = first_crossing(|_, _| f64::NAN, 1.0, 0.5, 10.0, 1e-3, Tolerances::default());
        assert!(matches!(r, Err(Error::Numeric { .. })));
    }
}
