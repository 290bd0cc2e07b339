//! Time-domain forward model on the desk ring: simulate a sinogram, band-pass
//! it, add 1% noise, and report where the energy arrives.
//!
//! cargo run --release --example forward_td

use pat_core::experiments::SweepConfig;
use pat_core::uncertainty::{add_noise, NoiseSpec};
use pat_core::{shepp_logan, TdModel};

fn main() -> pat_core::Result<()> {
    let cfg = SweepConfig::desk();
    let ring = cfg.ring()?;
    let model = TdModel::assemble(cfg.grid, &ring, &cfg.acoustic, cfg.tof_window)?;
    println!(
        "A_s: {} nonzeros over {} rows, {} columns",
        model.tof.nnz(),
        ring.len() * cfg.acoustic.nt,
        cfg.grid.len()
    );

    let sino = model.forward(&shepp_logan(cfg.grid))?;
    let filtered = cfg.bandpass()?.apply_sinogram(&sino);
    let noisy = add_noise(&filtered, &NoiseSpec::new(cfg.noise_fraction, cfg.seed)?)?;

    let trace = noisy.trace(0);
    let (k_peak, _) = trace
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (k, &v)| if v.abs() > best.1 { (k, v.abs()) } else { best });
    println!(
        "sensor 0: peak |p| at t = {:.2} us (sample {k_peak}); max |p| raw {:.3e}, filtered {:.3e}",
        cfg.acoustic.sample_time(k_peak) * 1e6,
        sino.max_abs(),
        filtered.max_abs()
    );
    let nearest = cfg.radius - cfg.grid.side_length / 2.0;
    println!(
        "earliest possible arrival {:.2} us, record ends at {:.2} us",
        nearest / cfg.acoustic.sound_speed * 1e6,
        cfg.acoustic.record_end() * 1e6
    );
    Ok(())
}
