//! Rasterize the Shepp-Logan phantom and a point source, and write them as
//! 16-bit PGM images.
//!
//! cargo run --release --example phantom -- [out_dir]

use std::path::PathBuf;

use pat_core::geometry::point_source;
use pat_core::io::write_image;
use pat_core::{shepp_logan, GridSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pat_out".into()));
    std::fs::create_dir_all(&dir)?;
    let grid = GridSpec::new(64, 64, 30e-3)?;

    let sl = shepp_logan(grid);
    let (lo, hi) = sl.min_max();
    let inside = sl.values.iter().filter(|&&v| v != 0.0).count();
    println!("shepp-logan {}x{}: values in [{lo}, {hi}], {inside} nonzero pixels", grid.nx, grid.ny);
    write_image(&dir.join("shepp_logan.pgm"), &sl)?;

    let point = point_source(grid, grid.nx / 2, grid.ny / 2)?;
    println!("point source at {:?}", point.argmax());
    write_image(&dir.join("point.pgm"), &point)?;
    println!("wrote images to {}", dir.display());
    Ok(())
}
