//! Prints the Wishart event percentiles that `WISHART_EVENT` freezes.
//!
//! cargo run --release -p benchgen --example calibrate_wishart [draws]

use benchgen::calibrate_wishart_event;

fn main() {
    let draws = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(10_000);
    let mut c1 = 0.0_f64;
    let mut c2 = f64::INFINITY;
    let mut c3 = 0.0_f64;
    for (i, s) in [50usize, 100, 200].into_iter().enumerate() {
        let cal = calibrate_wishart_event(s, draws, 100 + i as u64).expect("valid calibration");
        println!(
            "s={} draws={} low_p90={:.4} gap_p10={:.4} gap_p90={:.4} norm_ok={:.4}",
            cal.s, cal.draws, cal.low_p90, cal.gap_p10, cal.gap_p90, cal.norm_ok
        );
        c1 = c1.max(cal.low_p90);
        c2 = c2.min(cal.gap_p10);
        c3 = c3.max(cal.gap_p90);
    }
    println!("frozen: c1={c1:.2} c2={c2:.2} c3={c3:.2}");
}
