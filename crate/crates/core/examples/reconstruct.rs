//! Noiseless round trip at desk scale: simulate with the true geometry and
//! reconstruct with TDMM, FDMM and back-projection.
//!
//! cargo run --release --example reconstruct

use std::time::Instant;

use pat_core::experiments::SweepConfig;
use pat_core::forward_fd::FdStorage;
use pat_core::geometry::point_source;
use pat_core::metrics::pearson;
use pat_core::{
    backproject, shepp_logan, tikhonov_solve, FdModel, ForwardModel, FrequencyGrid, ImageGrid, Measurement,
    ReconResult, TdModel,
};

fn reconstruct_all(cfg: &SweepConfig, td: &TdModel, fd: &FdModel, p0: &ImageGrid) -> pat_core::Result<Vec<ReconResult>> {
    let sino = td.forward(p0)?;
    let spectra = fd.forward(p0)?;
    Ok(vec![
        tikhonov_solve(&ForwardModel::Td(td.clone()), &Measurement::Time(sino.clone()), &cfg.solver)?,
        tikhonov_solve(&ForwardModel::Fd(fd.clone()), &Measurement::Spectral(spectra), &cfg.solver)?,
        backproject(&sino, &td.sensors, cfg.grid, &cfg.acoustic)?,
    ])
}

fn main() -> pat_core::Result<()> {
    let cfg = SweepConfig::desk();
    let ring = cfg.ring()?;
    let td = TdModel::assemble(cfg.grid, &ring, &cfg.acoustic, cfg.tof_window)?;
    let freqs = FrequencyGrid::from_config(&cfg.acoustic)?;
    let fd = FdModel::assemble(cfg.grid, &ring, freqs, &cfg.acoustic, FdStorage::default())?;
    println!(
        "{}x{} grid, {} sensors, {} samples, {} frequencies",
        cfg.grid.nx,
        cfg.grid.ny,
        cfg.n_sensors,
        cfg.acoustic.nt,
        freqs.len()
    );

    let phantom = shepp_logan(cfg.grid);
    let start = Instant::now();
    for r in reconstruct_all(&cfg, &td, &fd, &phantom)? {
        println!(
            "shepp-logan {:>4}: pc {:.4}, {} iterations, residual {:.2e}",
            r.method,
            pearson(&r.image, &phantom)?,
            r.iterations_used,
            r.final_residual_norm
        );
    }
    println!("  ({:.1} s)", start.elapsed().as_secs_f64());

    let (ix, iy) = (cfg.grid.nx / 3, cfg.grid.ny / 2 + 4);
    let point = point_source(cfg.grid, ix, iy)?;
    for r in reconstruct_all(&cfg, &td, &fd, &point)? {
        let (mx, my) = r.image.argmax();
        println!("point ({ix},{iy}) {:>4}: peak at ({mx},{my})", r.method);
    }
    Ok(())
}
