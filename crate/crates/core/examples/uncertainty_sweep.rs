//! Monte-Carlo sweep of reconstruction quality against sensor-radius error.
//!
//! cargo run --release --example uncertainty_sweep -- [desk|paper] [trials] [out_dir]

use std::path::Path;
use std::time::Instant;

use pat_core::experiments::{run_uncertainty_sweep, write_sweep_outputs, Profile, SweepConfig};

fn main() -> pat_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let profile: Profile = args.next().as_deref().unwrap_or("desk").parse()?;
    let mut cfg = SweepConfig::for_profile(profile);
    if let Some(t) = args.next() {
        cfg.trials = t.parse().expect("trials must be an integer");
    }
    let out_dir = args.next();

    let start = Instant::now();
    let result = run_uncertainty_sweep(&cfg)?;
    println!("{:>8}  {:>6}  {:>8}  {:>8}", "X %", "method", "mean PC", "std");
    for s in &result.summary {
        println!("{:>8}  {:>6}  {:>8.4}  {:>8.4}", s.x_percent, s.method.as_str(), s.mean_pc, s.std_pc);
    }
    println!("{} trials per X in {:.1} s", cfg.trials, start.elapsed().as_secs_f64());

    if let Some(dir) = out_dir {
        for path in write_sweep_outputs(&result, Path::new(&dir))? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
