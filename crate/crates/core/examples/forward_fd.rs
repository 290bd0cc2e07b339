//! Frequency-domain forward model and its agreement with the time-domain
//! model: the scaled DFT of TD data against K p0 at shared frequencies.
//!
//! cargo run --release --example forward_fd -- [f_hi_hz]

use pat_core::experiments::SweepConfig;
use pat_core::forward_fd::{relative_l2_error, spectrum_of_sinogram, FdStorage};
use pat_core::{shepp_logan, AcousticConfig, FdModel, FrequencyGrid, TdModel};

fn cross_domain_error(
    cfg: &SweepConfig,
    acoustic: &AcousticConfig,
    freqs: FrequencyGrid,
) -> pat_core::Result<f64> {
    let phantom = shepp_logan(cfg.grid);
    let ring = cfg.ring()?;
    let td = TdModel::assemble(cfg.grid, &ring, acoustic, cfg.tof_window)?;
    let fd = FdModel::assemble(cfg.grid, &ring, freqs, acoustic, FdStorage::default())?;
    let from_td = spectrum_of_sinogram(&td.forward(&phantom)?, &freqs)?;
    let direct = fd.forward(&phantom)?;
    relative_l2_error(&from_td, &direct)
}

fn main() -> pat_core::Result<()> {
    let cfg = SweepConfig::desk();
    let f_hi: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("f_hi in Hz"))
        .unwrap_or(cfg.acoustic.f_hi);
    let base = AcousticConfig { f_hi, ..cfg.acoustic };
    let fine = AcousticConfig {
        dt: base.dt / 2.0,
        nt: base.nt * 2,
        ..base
    };
    println!(
        "grid {}x{}, {} sensors, band [{:.2}, {:.2}] MHz",
        cfg.grid.nx,
        cfg.grid.ny,
        cfg.n_sensors,
        base.f_lo / 1e6,
        f_hi.min(base.nyquist()) / 1e6
    );
    // the halved step keeps the record length, so both runs share these bins
    let freqs = FrequencyGrid::from_config(&base)?;
    for (label, acoustic) in [("dt", base), ("dt/2", fine)] {
        let err = cross_domain_error(&cfg, &acoustic, freqs)?;
        println!(
            "{label:>5}: dt = {:.1} ns, {} frequencies, relative L2 error {:.4}",
            acoustic.dt * 1e9,
            freqs.len(),
            err
        );
    }
    Ok(())
}
