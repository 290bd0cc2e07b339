//! Relative operator error δ = ‖M − M̃‖₂ / ‖M‖₂ for the time- and
//! frequency-domain models under a deterministic radius error.
//!
//! cargo run --release --example delta_sweep -- [desk|paper] [x_percent ...]

use std::time::Instant;

use pat_core::experiments::{run_delta_sweep_with, Profile, SweepConfig};
use pat_core::geometry::PerturbMode;

fn main() -> pat_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let profile: Profile = args.next().as_deref().unwrap_or("desk").parse()?;
    let mut cfg = SweepConfig::for_profile(profile);
    cfg.mode = PerturbMode::Deterministic;
    let xs: Vec<f64> = args.map(|s| s.parse().expect("X in percent")).collect();
    if !xs.is_empty() {
        cfg.x_percents = xs;
    }

    let start = Instant::now();
    println!("{:>8}  {:>9}  {:>9}", "X %", "delta_td", "delta_fd");
    let rows = run_delta_sweep_with(&cfg, |r| {
        println!("{:>8}  {:>9.4}  {:>9.4}", r.x_percent, r.delta_td, r.delta_fd);
    })?;
    let fd_above = rows.iter().filter(|r| r.delta_fd >= r.delta_td).count();
    println!("delta_fd >= delta_td at {fd_above} of {} X values", rows.len());
    println!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
