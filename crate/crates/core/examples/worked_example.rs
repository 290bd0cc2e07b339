//! A single pixel at the origin seen by one sensor at 22.5 mm, and the same
//! sensor moved 1% inward. Prints the phasor and kernel terms that the two
//! model matrices assign to that pixel.
//!
//! cargo run --release --example worked_example

use std::f64::consts::PI;

use num_complex::Complex64;
use pat_core::geometry::PerturbMode;
use pat_core::recon::ForwardModel;
use pat_core::uncertainty::{make_model_pair, ModelKind, ModelOptions};
use pat_core::{AcousticConfig, GridSpec};

fn main() -> pat_core::Result<()> {
    let grid = GridSpec::new(1, 1, 1e-4)?;
    // 1 MHz lands exactly on a DFT bin
    let cfg = AcousticConfig {
        sound_speed: 1500.0,
        dt: 50e-9,
        nt: 20 * 30,
        f_lo: 0.99e6,
        f_hi: 1.01e6,
    };
    let pair = |kind| {
        make_model_pair(
            kind,
            grid,
            &cfg,
            22.5e-3,
            1,
            1.0,
            PerturbMode::DeterministicInward,
            0,
            &ModelOptions::default(),
        )
    };

    let fd = pair(ModelKind::Fd)?;
    let (ForwardModel::Fd(truth), ForwardModel::Fd(moved)) = (&fd.truth, &fd.nominal) else {
        unreachable!("frequency-domain pair");
    };
    let f = truth.freqs.frequency(0);
    let k = truth.freqs.wavenumber(0);
    let prefactor = Complex64::new(0.0, -k) * grid.voxel_volume() / (4.0 * PI);
    println!("frequency-domain, f = {:.3} MHz", f / 1e6);
    for (label, m) in [("22.5 mm", truth), ("22.275 mm", moved)] {
        let term = m.entry(0, 0, 0) / prefactor;
        let d = m.distance(0, 0);
        let phasor = term * d;
        println!(
            "  |r_d| = {label:>9}: e^(ikd) = {:.2} {:+.2}i, e^(ikd)/d = {:.2} {:+.2}i 1/m",
            phasor.re, phasor.im, term.re, term.im
        );
    }

    let td = pair(ModelKind::Td)?;
    let (ForwardModel::Td(truth), ForwardModel::Td(moved)) = (&td.truth, &td.nominal) else {
        unreachable!("time-domain pair");
    };
    let weight_scale = grid.voxel_volume() / (4.0 * PI * cfg.sound_speed.powi(2) * cfg.dt.powi(2));
    println!("time-domain, dt = {:.0} ns", cfg.dt * 1e9);
    for (label, m) in [("22.5 mm", truth), ("22.275 mm", moved)] {
        println!(
            "  |r_d| = {label:>9}: 1/d = {:.1} 1/m at sample {}",
            m.tof.weight(0, 0) / weight_scale,
            m.tof.bin(0, 0).expect("in window")
        );
    }
    Ok(())
}
