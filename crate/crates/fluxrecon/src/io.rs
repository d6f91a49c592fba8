//! On-disk formats: binary field snapshots, enslaving-map descriptor files,
//! and observation/trajectory archives with a text manifest.
//!
//! Snapshot layout: magic bytes `SPF1`, `u8` dimension, little-endian `u32`
//! grid half-width `K`, then little-endian `f64` pairs `(re, im)` in
//! row-major order over `k` in `[-K, K]^dim`. Vector fields prepend a `u8`
//! component count to the concatenated component blocks.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use crate::error::{FluxError, Result};
use crate::forcing::{EnslavingMap, ModeGain};
use crate::solver::ObservationStream;
use crate::spectral::{FieldOps, ScalarSpectralField, VectorSpectralField, WaveGrid};

const MAGIC: &[u8; 4] = b"SPF1";

fn write_header<W: Write>(w: &mut W, grid: WaveGrid) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u8(grid.dim() as u8)?;
    w.write_u32::<LittleEndian>(grid.k_max() as u32)?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<WaveGrid> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FluxError::Format(format!("bad snapshot magic {magic:?}")));
    }
    let dim = r.read_u8()? as usize;
    let k_max = r.read_u32::<LittleEndian>()? as usize;
    WaveGrid::new(dim, k_max)
}

fn write_coeffs<W: Write>(w: &mut W, coeffs: &[Complex64]) -> Result<()> {
    for c in coeffs {
        w.write_f64::<LittleEndian>(c.re)?;
        w.write_f64::<LittleEndian>(c.im)?;
    }
    Ok(())
}

fn read_coeffs<R: Read>(r: &mut R, n: usize) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let re = r.read_f64::<LittleEndian>()?;
        let im = r.read_f64::<LittleEndian>()?;
        out.push(Complex64::new(re, im));
    }
    Ok(out)
}

/// A field type that can be stored as an `SPF1` snapshot.
pub trait SnapshotField: FieldOps {
    /// Writes the snapshot.
    fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()>;
    /// Reads a snapshot.
    fn read_snapshot<R: Read>(r: &mut R) -> Result<Self>;
    /// Manifest tag (`scalar` or `vector`).
    fn kind_tag() -> &'static str;
    /// Underlying grid.
    fn snapshot_grid(&self) -> WaveGrid;
}

impl SnapshotField for ScalarSpectralField {
    fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, self.grid())?;
        write_coeffs(w, self.coeffs())
    }

    fn read_snapshot<R: Read>(r: &mut R) -> Result<Self> {
        let grid = read_header(r)?;
        ScalarSpectralField::from_coeffs(grid, read_coeffs(r, grid.num_modes())?)
    }

    fn kind_tag() -> &'static str {
        "scalar"
    }

    fn snapshot_grid(&self) -> WaveGrid {
        self.grid()
    }
}

impl SnapshotField for VectorSpectralField {
    fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, self.grid())?;
        w.write_u8(self.components().len() as u8)?;
        for c in self.components() {
            write_coeffs(w, c.coeffs())?;
        }
        Ok(())
    }

    fn read_snapshot<R: Read>(r: &mut R) -> Result<Self> {
        let grid = read_header(r)?;
        let ncomp = r.read_u8()? as usize;
        if ncomp != grid.dim() {
            return Err(FluxError::Format(format!(
                "vector snapshot has {ncomp} components for a {}-dimensional grid",
                grid.dim()
            )));
        }
        let mut comps = Vec::with_capacity(ncomp);
        for _ in 0..ncomp {
            comps.push(ScalarSpectralField::from_coeffs(grid, read_coeffs(r, grid.num_modes())?)?);
        }
        VectorSpectralField::from_components(comps)
    }

    fn kind_tag() -> &'static str {
        "vector"
    }

    fn snapshot_grid(&self) -> WaveGrid {
        self.grid()
    }
}

/// Writes bytes atomically: to a sibling temp file, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| FluxError::Io(e.error))?;
    Ok(())
}

/// Writes a field snapshot to `path` (atomically).
pub fn write_snapshot_file<F: SnapshotField>(path: &Path, field: &F) -> Result<()> {
    let mut buf = Vec::new();
    field.write_snapshot(&mut buf)?;
    atomic_write(path, &buf)
}

/// Reads a field snapshot from `path`.
pub fn read_snapshot_file<F: SnapshotField>(path: &Path) -> Result<F> {
    let bytes = fs::read(path)?;
    F::read_snapshot(&mut bytes.as_slice())
}

/// Parses `key = value` lines; `#` starts a comment. Returns an ordered map
/// (later duplicate keys append with an index to preserve repeats).
fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| FluxError::Format(format!("line {}: expected key = value", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Enslaving-map descriptor: `key = value` text with `kind`, `rank`,
/// `order_in`/`order_out`, kind-specific parameters, and optional
/// `lipschitz` and `raise_rank` entries. Fourierwise gains are repeated
/// `gain = tx ty tz sx sy sz re im` lines.
pub fn read_map_descriptor(text: &str, grid: WaveGrid) -> Result<EnslavingMap> {
    let pairs = parse_kv(text)?;
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    let mut gains = Vec::new();
    for (k, v) in &pairs {
        if k == "gain" {
            let nums: Vec<f64> = v
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|e| FluxError::Format(e.to_string())))
                .collect::<Result<_>>()?;
            if nums.len() != 8 {
                return Err(FluxError::Format(format!("gain needs 8 numbers, got {}", nums.len())));
            }
            gains.push(ModeGain {
                target: [nums[0] as i64, nums[1] as i64, nums[2] as i64],
                source: [nums[3] as i64, nums[4] as i64, nums[5] as i64],
                gain: Complex64::new(nums[6], nums[7]),
            });
        } else {
            fields.insert(k.as_str(), v.as_str());
        }
    }
    let known = ["kind", "rank", "order_in", "order_out", "exponent", "weight", "lipschitz", "raise_rank"];
    for k in fields.keys() {
        if !known.contains(k) {
            return Err(FluxError::Format(format!("unknown map descriptor key `{k}`")));
        }
    }
    let get = |k: &str| -> Result<&str> {
        fields.get(k).copied().ok_or_else(|| FluxError::Format(format!("missing map key `{k}`")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse().map_err(|e| FluxError::Format(format!("map key `{k}`: {e}")))
    };
    let rank = num("rank")? as usize;
    let order_in = num("order_in")?;
    let order_out = num("order_out")?;
    let mut map = match get("kind")? {
        "zero" => EnslavingMap::zero(rank, order_in, order_out),
        "power_law_tail" => {
            EnslavingMap::power_law_tail(grid, rank, num("exponent")?, num("weight")?, order_in, order_out)?
        }
        "fourierwise" => EnslavingMap::fourierwise(rank, gains, order_in, order_out)?,
        other => return Err(FluxError::Format(format!("unknown map kind `{other}`"))),
    };
    if let Some(l) = fields.get("lipschitz") {
        let l: f64 = l.parse().map_err(|e| FluxError::Format(format!("lipschitz: {e}")))?;
        map = map.with_declared_lipschitz(l);
    }
    if let Some(m) = fields.get("raise_rank") {
        let m: usize = m.parse().map_err(|e| FluxError::Format(format!("raise_rank: {e}")))?;
        map = map.raise_rank(m)?;
    }
    Ok(map)
}

/// Serializes a map as a descriptor file body (inverse of
/// [`read_map_descriptor`] for the supported kinds).
pub fn write_map_descriptor(map: &EnslavingMap) -> Result<String> {
    use crate::forcing::MapKind;
    let mut out = String::new();
    let (order_in, order_out) = map.orders();
    let body = |out: &mut String, kind: &str, rank: usize| {
        out.push_str(&format!("kind = {kind}\nrank = {rank}\n"));
        out.push_str(&format!("order_in = {order_in}\norder_out = {order_out}\n"));
    };
    let emit = |out: &mut String, kind: &MapKind, rank: usize| match kind {
        MapKind::Zero => body(&mut *out, "zero", rank),
        MapKind::PowerLawTail { exponent, weight } => {
            body(&mut *out, "power_law_tail", rank);
            out.push_str(&format!("exponent = {exponent}\nweight = {weight}\n"));
        }
        MapKind::Fourierwise { gains } => {
            body(&mut *out, "fourierwise", rank);
            for g in gains {
                out.push_str(&format!(
                    "gain = {} {} {} {} {} {} {} {}\n",
                    g.target[0], g.target[1], g.target[2], g.source[0], g.source[1], g.source[2],
                    g.gain.re, g.gain.im
                ));
            }
        }
        MapKind::RankRaised { .. } => unreachable!("handled below"),
    };
    match map.kind() {
        MapKind::RankRaised { inner, new_rank } => {
            emit(&mut out, inner.kind(), inner.rank());
            out.push_str(&format!("raise_rank = {new_rank}\n"));
        }
        k => emit(&mut out, k, map.rank()),
    }
    out.push_str(&format!("lipschitz = {}\n", map.lipschitz()));
    Ok(out)
}

fn snapshot_name(prefix: &str, i: usize) -> String {
    format!("{prefix}_{i:06}.spf")
}

/// Writes an observation stream as an archive: one snapshot per sample
/// (plus the recorded right-hand sides, if any) and a `manifest.txt` echoing
/// the stream layout and any extra key-value pairs.
pub fn write_observation_archive<F: SnapshotField>(
    dir: &Path,
    obs: &ObservationStream<F>,
    extra: &[(String, String)],
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = obs.sample(0).snapshot_grid();
    let mut manifest = String::new();
    manifest.push_str(&format!("kind = {}\n", F::kind_tag()));
    manifest.push_str(&format!("dim = {}\n", grid.dim()));
    manifest.push_str(&format!("k_max = {}\n", grid.k_max()));
    manifest.push_str(&format!("n_obs = {}\n", obs.n_obs()));
    manifest.push_str(&format!("t0 = {:.17e}\n", obs.t0()));
    manifest.push_str(&format!("dt = {:.17e}\n", obs.dt()));
    manifest.push_str(&format!("samples = {}\n", obs.len()));
    manifest.push_str(&format!("has_rhs = {}\n", obs.has_rhs()));
    for (k, v) in extra {
        manifest.push_str(&format!("config.{k} = {v}\n"));
    }
    for (i, s) in obs.samples().iter().enumerate() {
        write_snapshot_file(&dir.join(snapshot_name("obs", i)), s)?;
    }
    if let Some(rhs) = obs.rhs_samples() {
        for (i, s) in rhs.iter().enumerate() {
            write_snapshot_file(&dir.join(snapshot_name("rhs", i)), s)?;
        }
    }
    atomic_write(&dir.join("manifest.txt"), manifest.as_bytes())
}

/// Reads an observation archive written by [`write_observation_archive`].
/// Returns the stream and the echoed `config.*` pairs.
pub fn read_observation_archive<F: SnapshotField>(
    dir: &Path,
) -> Result<(ObservationStream<F>, Vec<(String, String)>)> {
    let manifest = fs::read_to_string(dir.join("manifest.txt"))?;
    let pairs = parse_kv(&manifest)?;
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut extra = Vec::new();
    for (k, v) in pairs {
        if let Some(stripped) = k.strip_prefix("config.") {
            extra.push((stripped.to_string(), v));
        } else {
            fields.insert(k, v);
        }
    }
    let get = |k: &str| -> Result<&String> {
        fields.get(k).ok_or_else(|| FluxError::Format(format!("manifest missing `{k}`")))
    };
    if get("kind")?.as_str() != F::kind_tag() {
        return Err(FluxError::Format(format!(
            "archive holds {} fields, expected {}",
            get("kind")?,
            F::kind_tag()
        )));
    }
    let samples: usize =
        get("samples")?.parse().map_err(|e| FluxError::Format(format!("samples: {e}")))?;
    let t0: f64 = get("t0")?.parse().map_err(|e| FluxError::Format(format!("t0: {e}")))?;
    let dt: f64 = get("dt")?.parse().map_err(|e| FluxError::Format(format!("dt: {e}")))?;
    let n_obs: usize =
        get("n_obs")?.parse().map_err(|e| FluxError::Format(format!("n_obs: {e}")))?;
    let has_rhs: bool =
        get("has_rhs")?.parse().map_err(|e| FluxError::Format(format!("has_rhs: {e}")))?;
    let read_series = |prefix: &str| -> Result<Vec<F>> {
        (0..samples).map(|i| read_snapshot_file(&dir.join(snapshot_name(prefix, i)))).collect()
    };
    let low = read_series("obs")?;
    let rhs = if has_rhs { Some(read_series("rhs")?) } else { None };
    Ok((ObservationStream::new(t0, dt, n_obs, low, rhs)?, extra))
}

/// Resolves a possibly relative snapshot/descriptor path against a base dir.
pub fn resolve_path(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
