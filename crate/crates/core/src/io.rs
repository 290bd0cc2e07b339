//! File formats: binary sinograms, spectra and images with text headers,
//! 16-bit PGM previews, CSV exports, and model matrix caches.
//!
//! Binary payloads are little-endian `f64`. Every header is a single line
//! starting with `# ` followed by `key=value` pairs separated by spaces.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{PatError, Result};
use crate::forward_fd::{FdModel, FrequencyGrid, SpectralData, SIGN_CONVENTION};
use crate::forward_td::{Sinogram, TofMatrix};
use crate::geometry::{AcousticConfig, GridSpec, ImageGrid, Point, SensorArray};
use crate::operator::LinearOperator;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| PatError::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| PatError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PatError::io(path, e))
}

/// Appends `suffix` to the full file name, e.g. `a.pgm` → `a.pgm.meta`.
pub fn sidecar_path(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

struct Header {
    path: PathBuf,
    fields: BTreeMap<String, String>,
}

impl Header {
    fn parse(path: &Path, line: &str, line_no: usize) -> Result<Self> {
        let body = line
            .strip_prefix("# ")
            .ok_or_else(|| PatError::parse(path, line_no, "expected a header line starting with '# '"))?;
        let mut fields = BTreeMap::new();
        for tok in body.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| PatError::parse(path, line_no, format!("malformed header field '{tok}'")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        Ok(Self {
            path: path.to_path_buf(),
            fields,
        })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .fields
            .get(key)
            .ok_or_else(|| PatError::parse(&self.path, 1, format!("header is missing '{key}'")))?;
        raw.parse()
            .map_err(|_| PatError::parse(&self.path, 1, format!("cannot parse {key}={raw}")))
    }
}

fn read_header(path: &Path, reader: &mut BufReader<File>) -> Result<Header> {
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| PatError::io(path, e))?;
    if !line.ends_with('\n') {
        return Err(PatError::parse(path, 1, "missing header line"));
    }
    Header::parse(path, line.trim_end_matches('\n'), 1)
}

fn write_f64s(w: &mut impl Write, path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes()).map_err(|e| PatError::io(path, e))?;
    }
    Ok(())
}

fn read_f64s(path: &Path, reader: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| PatError::io(path, e))?;
    if bytes.len() != count * 8 {
        return Err(PatError::parse(
            path,
            2,
            format!("payload has {} bytes, header implies {}", bytes.len(), count * 8),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| PatError::io(path, e))
}

pub fn write_sinogram(path: &Path, sino: &Sinogram) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "# nd={} nt={} dt_s={:?} t0_s={:?}",
        sino.n_sensors, sino.nt, sino.dt, sino.t0
    )
    .map_err(|e| PatError::io(path, e))?;
    write_f64s(&mut w, path, sino.data.iter().copied())?;
    finish(w, path)
}

pub fn read_sinogram(path: &Path) -> Result<Sinogram> {
    let mut r = open(path)?;
    let h = read_header(path, &mut r)?;
    let (nd, nt): (usize, usize) = (h.get("nd")?, h.get("nt")?);
    let data = read_f64s(path, &mut r, nd * nt)?;
    Sinogram::from_data(nd, nt, h.get("dt_s")?, h.get("t0_s")?, data)
        .map_err(|e| PatError::parse(path, 1, e.to_string()))
}

pub fn write_spectra(path: &Path, spectra: &SpectralData) -> Result<()> {
    let f = &spectra.freqs;
    let mut w = create(path)?;
    writeln!(
        w,
        "# nd={} nf={} df_hz={:?} first_index={} vs_mps={:?}",
        spectra.n_sensors, f.count, f.df, f.first_index, f.sound_speed
    )
    .map_err(|e| PatError::io(path, e))?;
    write_f64s(&mut w, path, spectra.data.iter().flat_map(|c| [c.re, c.im]))?;
    finish(w, path)
}

pub fn read_spectra(path: &Path) -> Result<SpectralData> {
    let mut r = open(path)?;
    let h = read_header(path, &mut r)?;
    let (nd, nf): (usize, usize) = (h.get("nd")?, h.get("nf")?);
    let freqs = FrequencyGrid::uniform(h.get("df_hz")?, h.get("first_index")?, nf, h.get("vs_mps")?)
        .map_err(|e| PatError::parse(path, 1, e.to_string()))?;
    let raw = read_f64s(path, &mut r, 2 * nd * nf)?;
    let data = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    SpectralData::from_data(nd, freqs, data).map_err(|e| PatError::parse(path, 1, e.to_string()))
}

/// Exact image file: header plus row-major `f64` pixel values.
pub fn write_image_raw(path: &Path, img: &ImageGrid) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "# nx={} ny={} side_length_m={:?}",
        img.spec.nx, img.spec.ny, img.spec.side_length
    )
    .map_err(|e| PatError::io(path, e))?;
    write_f64s(&mut w, path, img.values.iter().copied())?;
    finish(w, path)
}

pub fn read_image_raw(path: &Path) -> Result<ImageGrid> {
    let mut r = open(path)?;
    let h = read_header(path, &mut r)?;
    let spec = GridSpec::new(h.get("nx")?, h.get("ny")?, h.get("side_length_m")?)
        .map_err(|e| PatError::parse(path, 1, e.to_string()))?;
    let values = read_f64s(path, &mut r, spec.len())?;
    ImageGrid::from_values(spec, values).map_err(|e| PatError::parse(path, 1, e.to_string()))
}

/// 16-bit binary PGM with the value range in a `.meta` sidecar. Row 0 of
/// the file is the top of the image (largest `y`).
pub fn write_pgm(path: &Path, img: &ImageGrid) -> Result<()> {
    let (lo, hi) = img.min_max();
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = create(path)?;
    write!(w, "P5\n{} {}\n65535\n", img.spec.nx, img.spec.ny).map_err(|e| PatError::io(path, e))?;
    for iy in (0..img.spec.ny).rev() {
        for ix in 0..img.spec.nx {
            let q = ((img.get(ix, iy) - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16;
            w.write_all(&q.to_be_bytes()).map_err(|e| PatError::io(path, e))?;
        }
    }
    finish(w, path)?;
    let meta = sidecar_path(path, ".meta");
    std::fs::write(
        &meta,
        format!("min={lo:?}\nmax={hi:?}\nside_length_m={:?}\n", img.spec.side_length),
    )
    .map_err(|e| PatError::io(&meta, e))
}

/// Reads a PGM written by [`write_pgm`]; values are quantized to 16 bits.
pub fn read_pgm(path: &Path) -> Result<ImageGrid> {
    let bytes = std::fs::read(path).map_err(|e| PatError::io(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(PatError::parse(path, 1, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(PatError::parse(path, 1, format!("expected P5 magic, got {}", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| PatError::parse(path, 1, format!("bad PGM header value '{s}'")))
    };
    let (nx, ny, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 65535 {
        return Err(PatError::parse(path, 1, "only 16-bit PGM files are supported"));
    }
    let payload = &bytes[pos.min(bytes.len())..];
    if payload.len() != nx * ny * 2 {
        return Err(PatError::parse(path, 2, "PGM payload size does not match its header"));
    }
    let (mut lo, mut hi, mut side) = (0.0, 1.0, 1.0);
    let meta = sidecar_path(path, ".meta");
    if meta.exists() {
        let text = std::fs::read_to_string(&meta).map_err(|e| PatError::io(&meta, e))?;
        for (i, line) in text.lines().enumerate() {
            let Some((k, v)) = line.split_once('=') else { continue };
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| PatError::parse(&meta, i + 1, format!("bad number '{v}'")))?;
            match k.trim() {
                "min" => lo = v,
                "max" => hi = v,
                "side_length_m" => side = v,
                _ => {}
            }
        }
    }
    let spec = GridSpec::new(nx, ny, side)?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut values = vec![0.0; spec.len()];
    for (row, chunk) in payload.chunks_exact(2 * nx).enumerate() {
        let iy = ny - 1 - row;
        for ix in 0..nx {
            let q = u16::from_be_bytes([chunk[2 * ix], chunk[2 * ix + 1]]);
            values[spec.index(ix, iy)] = lo + q as f64 / 65535.0 * span;
        }
    }
    ImageGrid::from_values(spec, values)
}

/// Writes an image by extension: `.pgm` gives a PGM preview plus an exact
/// raw copy at `<path>.f64`; anything else is the raw format.
pub fn write_image(path: &Path, img: &ImageGrid) -> Result<()> {
    if is_pgm(path) {
        write_pgm(path, img)?;
        write_image_raw(&sidecar_path(path, ".f64"), img)
    } else {
        write_image_raw(path, img)
    }
}

/// Reads an image by extension, preferring the exact raw copy of a PGM.
pub fn read_image(path: &Path) -> Result<ImageGrid> {
    if is_pgm(path) {
        let raw = sidecar_path(path, ".f64");
        if raw.exists() {
            return read_image_raw(&raw);
        }
        read_pgm(path)
    } else {
        read_image_raw(path)
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

pub fn write_sinogram_csv(path: &Path, sino: &Sinogram) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| PatError::io(path, e);
    writeln!(w, "sensor,k,t_s,value").map_err(io)?;
    for l in 0..sino.n_sensors {
        for (k, v) in sino.trace(l).iter().enumerate() {
            writeln!(w, "{l},{k},{:?},{v:?}", sino.t0 + k as f64 * sino.dt).map_err(io)?;
        }
    }
    finish(w, path)
}

pub fn write_spectra_csv(path: &Path, spectra: &SpectralData) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| PatError::io(path, e);
    writeln!(w, "sensor,f_hz,re,im").map_err(io)?;
    let freqs = spectra.freqs.frequencies();
    for l in 0..spectra.n_sensors {
        for (p, f) in freqs.iter().enumerate() {
            let c = spectra.data[l * freqs.len() + p];
            writeln!(w, "{l},{f:?},{:?},{:?}", c.re, c.im).map_err(io)?;
        }
    }
    finish(w, path)
}

pub fn write_image_csv(path: &Path, img: &ImageGrid) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| PatError::io(path, e);
    writeln!(w, "ix,iy,x_m,y_m,value").map_err(io)?;
    for j in 0..img.len() {
        let (ix, iy) = img.spec.coords(j);
        let c = img.spec.center(j);
        writeln!(w, "{ix},{iy},{:?},{:?},{:?}", c[0], c[1], img.values[j]).map_err(io)?;
    }
    finish(w, path)
}

pub fn write_sensors_csv(path: &Path, sensors: &SensorArray) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| PatError::io(path, e);
    writeln!(w, "x_m,y_m").map_err(io)?;
    for p in &sensors.positions {
        writeln!(w, "{:?},{:?}", p[0], p[1]).map_err(io)?;
    }
    finish(w, path)
}

/// Reads `x_m,y_m` rows; the ring center is taken as the origin and the
/// nominal radius as the mean distance from it.
pub fn read_sensors_csv(path: &Path) -> Result<SensorArray> {
    let text = std::fs::read_to_string(path).map_err(|e| PatError::io(path, e))?;
    let mut positions: Vec<Point> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("x_m")) || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(PatError::parse(path, i + 1, "expected two columns x_m,y_m"));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| PatError::parse(path, i + 1, format!("bad number '{s}'")))
        };
        positions.push([parse(parts[0])?, parse(parts[1])?]);
    }
    if positions.is_empty() {
        return Err(PatError::parse(path, 1, "no sensor positions"));
    }
    let radius = positions.iter().map(|p| p[0].hypot(p[1])).sum::<f64>() / positions.len() as f64;
    SensorArray::from_positions(positions, radius, [0.0, 0.0])
}

/// SHA-256 over the bit patterns of everything that determines a model.
pub fn geometry_hash(grid: &GridSpec, sensors: &SensorArray, cfg: &AcousticConfig) -> String {
    let mut h = Sha256::new();
    h.update((grid.nx as u64).to_le_bytes());
    h.update((grid.ny as u64).to_le_bytes());
    h.update(grid.side_length.to_bits().to_le_bytes());
    h.update((sensors.len() as u64).to_le_bytes());
    for p in &sensors.positions {
        h.update(p[0].to_bits().to_le_bytes());
        h.update(p[1].to_bits().to_le_bytes());
    }
    for v in [cfg.sound_speed, cfg.dt, cfg.f_lo, cfg.f_hi] {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update((cfg.nt as u64).to_le_bytes());
    hex(&h.finalize())
}

/// SHA-256 of arbitrary bytes, hex encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes the `(row: u64, col: u64, value: f64)` triples of `A_s` with a
/// text sidecar holding its shape and geometry hash.
pub fn write_tof_cache(path: &Path, tof: &TofMatrix, hash: &str) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| PatError::io(path, e);
    for (r, c, v) in tof.triplets() {
        w.write_all(&r.to_le_bytes()).map_err(io)?;
        w.write_all(&c.to_le_bytes()).map_err(io)?;
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    finish(w, path)?;
    let meta = sidecar_path(path, ".meta");
    std::fs::write(
        &meta,
        format!(
            "n_sensors={}\nnt={}\nn_pixels={}\nnnz={}\ngeometry_hash={hash}\n",
            tof.n_sensors,
            tof.nt,
            tof.n_pixels,
            tof.nnz()
        ),
    )
    .map_err(|e| PatError::io(&meta, e))
}

fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| PatError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| PatError::parse(path, i + 1, "expected key=value"))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Loads a cached `A_s`; `None` when the cache is absent or was built for a
/// different geometry.
pub fn read_tof_cache(path: &Path, hash: &str) -> Result<Option<TofMatrix>> {
    let meta_path = sidecar_path(path, ".meta");
    if !path.exists() || !meta_path.exists() {
        return Ok(None);
    }
    let meta = read_meta(&meta_path)?;
    if meta.get("geometry_hash").map(String::as_str) != Some(hash) {
        return Ok(None);
    }
    let field = |k: &str| -> Result<usize> {
        meta.get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| PatError::parse(&meta_path, 1, format!("missing or bad '{k}'")))
    };
    let (nd, nt, n) = (field("n_sensors")?, field("nt")?, field("n_pixels")?);
    let bytes = std::fs::read(path).map_err(|e| PatError::io(path, e))?;
    if bytes.len() % 24 != 0 || bytes.len() / 24 != field("nnz")? {
        return Err(PatError::parse(path, 1, "cache size does not match its sidecar"));
    }
    let triplets = bytes.chunks_exact(24).map(|c| {
        (
            u64::from_le_bytes(c[0..8].try_into().expect("8 bytes")),
            u64::from_le_bytes(c[8..16].try_into().expect("8 bytes")),
            f64::from_le_bytes(c[16..24].try_into().expect("8 bytes")),
        )
    });
    TofMatrix::from_triplets(nd, nt, n, triplets).map(Some)
}

/// Writes `K` row-major with interleaved re/im and a sidecar describing the
/// row ordering and sign convention.
pub fn write_fd_matrix(path: &Path, model: &FdModel, hash: &str) -> Result<()> {
    let mut w = create(path)?;
    let nf = model.freqs.len();
    for row in 0..model.nrows() {
        let r = model.row(row / nf, row % nf);
        write_f64s(&mut w, path, r.iter().flat_map(|c| [c.re, c.im]))?;
    }
    finish(w, path)?;
    let meta = sidecar_path(path, ".meta");
    std::fs::write(
        &meta,
        format!(
            "rows={}\ncols={}\nrow_order=sensor_major\nnf={nf}\ndf_hz={:?}\nfirst_index={}\nsign_convention={SIGN_CONVENTION}\ngeometry_hash={hash}\n",
            model.nrows(),
            model.ncols(),
            model.freqs.df,
            model.freqs.first_index,
        ),
    )
    .map_err(|e| PatError::io(&meta, e))
}
