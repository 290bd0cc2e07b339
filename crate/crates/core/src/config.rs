//! Flat `key = value` sweep configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. `profile` selects
//! the base parameter set and is applied first wherever it appears; every
//! other key overrides one field of that profile.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{PatError, Result};
use crate::experiments::{Profile, SweepConfig};
use crate::geometry::PerturbMode;
use crate::recon::Method;

pub const KEYS: [&str; 20] = [
    "nx",
    "ny",
    "side_length_m",
    "radius_m",
    "n_sensors",
    "vs_mps",
    "dt_s",
    "nt",
    "f_lo_hz",
    "f_hi_hz",
    "x_percents",
    "trials",
    "methods",
    "mode",
    "seed",
    "alpha",
    "max_iters",
    "rel_tol",
    "out_dir",
    "profile",
];

pub fn load_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| PatError::io(path, e))?;
    parse_config(&text, path)
}

/// Parses config text; `origin` is only used in error messages.
pub fn parse_config(text: &str, origin: &Path) -> Result<SweepConfig> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| PatError::parse(origin, line_no, format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(PatError::parse(origin, line_no, format!("unknown key '{key}'")));
        }
        if entries.iter().any(|(_, k, _): &(usize, &str, &str)| *k == key) {
            return Err(PatError::parse(origin, line_no, format!("duplicate key '{key}'")));
        }
        entries.push((line_no, key, value));
    }

    let profile = match entries.iter().find(|(_, k, _)| *k == "profile") {
        Some(&(n, _, v)) => v.parse::<Profile>().map_err(|e| PatError::parse(origin, n, e.to_string()))?,
        None => Profile::Desk,
    };
    let mut cfg = SweepConfig::for_profile(profile);
    for &(n, key, value) in &entries {
        apply(&mut cfg, key, value).map_err(|e| match e {
            PatError::Parse { .. } => e,
            other => PatError::parse(origin, n, format!("{key}: {other}")),
        })?;
    }
    cfg.validate()
        .map_err(|e| PatError::invalid(format!("{}: {e}", origin.display())))?;
    Ok(cfg)
}

fn num<T: FromStr>(value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| PatError::invalid(format!("cannot parse '{value}'")))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| PatError::invalid(format!("'{s}': {e}"))))
        .collect()
}

fn apply(cfg: &mut SweepConfig, key: &str, value: &str) -> Result<()> {
    match key {
        "nx" => cfg.grid.nx = num(value)?,
        "ny" => cfg.grid.ny = num(value)?,
        "side_length_m" => cfg.grid.side_length = num(value)?,
        "radius_m" => cfg.radius = num(value)?,
        "n_sensors" => cfg.n_sensors = num(value)?,
        "vs_mps" => cfg.acoustic.sound_speed = num(value)?,
        "dt_s" => cfg.acoustic.dt = num(value)?,
        "nt" => cfg.acoustic.nt = num(value)?,
        "f_lo_hz" => cfg.acoustic.f_lo = num(value)?,
        "f_hi_hz" => cfg.acoustic.f_hi = num(value)?,
        "x_percents" => cfg.x_percents = list(value)?,
        "trials" => cfg.trials = num(value)?,
        "methods" => cfg.methods = list::<Method>(value)?,
        "mode" => cfg.mode = value.parse::<PerturbMode>()?,
        "seed" => cfg.seed = num(value)?,
        "alpha" => cfg.solver.alpha = num(value)?,
        "max_iters" => cfg.solver.max_iters = num(value)?,
        "rel_tol" => cfg.solver.rel_tolerance = num(value)?,
        "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
        "profile" => {}
        _ => unreachable!("keys are checked before applying"),
    }
    Ok(())
}

/// Renders a config in the file format; parsing the output gives back the
/// same config.
pub fn render_config(cfg: &SweepConfig) -> String {
    let join = |v: Vec<String>| v.join(",");
    let mut lines = vec![
        format!("profile = {}", match cfg.profile {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }),
        format!("nx = {}", cfg.grid.nx),
        format!("ny = {}", cfg.grid.ny),
        format!("side_length_m = {:?}", cfg.grid.side_length),
        format!("radius_m = {:?}", cfg.radius),
        format!("n_sensors = {}", cfg.n_sensors),
        format!("vs_mps = {:?}", cfg.acoustic.sound_speed),
        format!("dt_s = {:?}", cfg.acoustic.dt),
        format!("nt = {}", cfg.acoustic.nt),
        format!("f_lo_hz = {:?}", cfg.acoustic.f_lo),
        format!("f_hi_hz = {:?}", cfg.acoustic.f_hi),
        format!("x_percents = {}", join(cfg.x_percents.iter().map(|x| format!("{x:?}")).collect())),
        format!("trials = {}", cfg.trials),
        format!("methods = {}", join(cfg.methods.iter().map(|m| m.to_string()).collect())),
        format!("mode = {}", cfg.mode),
        format!("seed = {}", cfg.seed),
        format!("alpha = {:?}", cfg.solver.alpha),
        format!("max_iters = {}", cfg.solver.max_iters),
        format!("rel_tol = {:?}", cfg.solver.rel_tolerance),
    ];
    if let Some(dir) = &cfg.out_dir {
        lines.push(format!("out_dir = {}", dir.display()));
    }
    lines.join("\n") + "\n"
}
