//! Calibrate against the bundled anchors and print the residual table.

use cryo_edram::calibrate::{calibrate_profile, TargetSet};

fn main() {
    let t0 = std::time::Instant::now();
    let profile = calibrate_profile(&TargetSet::bundled()).expect("calibration");
    for r in &profile.residuals {
        println!(
            "{:5} {:40} target {:>12.4e} value {:>12.4e} error {:>+9.4} tol {}",
            if r.passed() { "ok" } else { "FAIL" },
            r.name,
            r.target,
            r.value,
            r.error,
            r.tolerance
        );
    }
    for n in &profile.notes {
        println!("note: {n}");
    }
    println!("{:.1} s", t0.elapsed().as_secs_f64());
}
