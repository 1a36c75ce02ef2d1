//! Binary field dumps, trajectory sidecars and CSV helpers.
//!
//! Dump layout: `b"PCD1"`, `u32` dim, `u32` N, `u64` coefficient count, then
//! `count` pairs of little-endian `f64` (re, im). Coefficients are written in
//! row-major wavevector order with every axis ascending from `-N/2` to `N/2-1`.

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, SpectralField, TrajectoryField};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"PCD1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

fn dump_order(spec: LatticeSpec) -> impl Iterator<Item = [i64; 3]> {
    let n = spec.n() as i64;
    let dim = spec.dim();
    (0..spec.len()).map(move |lin| {
        let mut rem = lin as i64;
        let mut k = [0i64; 3];
        for a in (0..dim).rev() {
            k[a] = rem % n - n / 2;
            rem /= n;
        }
        k
    })
}

pub fn encode_field(u: &SpectralField) -> Vec<u8> {
    let spec = u.spec();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * spec.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(spec.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.n() as u32).to_le_bytes());
    out.extend_from_slice(&(spec.len() as u64).to_le_bytes());
    for k in dump_order(spec) {
        let idx = spec.index_of(&k).expect("dump order stays on the lattice");
        let c = u.coeffs()[idx];
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

pub fn write_field<W: Write>(w: &mut W, u: &SpectralField) -> Result<()> {
    w.write_all(&encode_field(u))?;
    Ok(())
}

/// Decodes one dump from the front of `bytes`; returns the field and the
/// number of bytes consumed.
pub fn decode_field(bytes: &[u8]) -> Result<(SpectralField, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Decode("truncated header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Decode("bad magic or unsupported version".into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if !(1..=3).contains(&dim) || n < 8 || n % 2 != 0 || n > 1 << 12 {
        return Err(Error::Decode(format!("unsupported lattice d={dim}, N={n}")));
    }
    let spec = LatticeSpec::new(dim, n).map_err(|e| Error::Decode(e.to_string()))?;
    if count != spec.len() as u64 {
        return Err(Error::Decode(format!("count {count} does not match N^d = {}", spec.len())));
    }
    let body = 16 * spec.len();
    if bytes.len() < HEADER_LEN + body {
        return Err(Error::Decode("truncated coefficient block".into()));
    }
    let mut coeffs = vec![Complex64::default(); spec.len()];
    let mut off = HEADER_LEN;
    for k in dump_order(spec) {
        let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
        coeffs[spec.index_of(&k).expect("dump order stays on the lattice")] = Complex64::new(re, im);
        off += 16;
    }
    let u = SpectralField::from_coeffs(spec, coeffs)?;
    Ok((u, off))
}

pub fn read_field<R: Read>(r: &mut R) -> Result<SpectralField> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(Error::Decode("bad magic or unsupported version".into()));
    }
    let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
    if count > 1 << 36 {
        return Err(Error::Decode(format!("implausible coefficient count {count}")));
    }
    let mut bytes = header.to_vec();
    let mut body = vec![0u8; 16 * count as usize];
    r.read_exact(&mut body)?;
    bytes.extend_from_slice(&body);
    decode_field(&bytes).map(|(u, _)| u)
}

/// One line of a trajectory sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidecarRecord {
    pub t: f64,
    pub seed: u64,
    pub stream_id: u64,
    pub epsilon: f64,
}

pub fn parse_sidecar(text: &str) -> Result<Vec<SidecarRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec: SidecarRecord = serde_json::from_str(l)
                .map_err(|e| Error::Decode(format!("sidecar line {}: {e}", i + 1)))?;
            if !rec.t.is_finite() || !rec.epsilon.is_finite() || rec.epsilon < 0.0 {
                return Err(Error::Decode(format!("sidecar line {}: invalid values", i + 1)));
            }
            Ok(rec)
        })
        .collect()
}

/// Concatenated dumps plus the JSON-line sidecar text.
pub fn encode_trajectory(u: &TrajectoryField, seed: u64, stream_id: u64, epsilon: f64) -> (Vec<u8>, String) {
    let mut bin = Vec::new();
    let mut side = String::new();
    for (i, s) in u.snapshots().iter().enumerate() {
        bin.extend_from_slice(&encode_field(s));
        let rec = SidecarRecord { t: u.time(i), seed, stream_id, epsilon };
        side.push_str(&serde_json::to_string(&rec).expect("sidecar record serializes"));
        side.push('\n');
    }
    (bin, side)
}

/// Inverse of [`encode_trajectory`]; requires one record per dump and a
/// uniform, increasing time grid.
pub fn decode_trajectory(bin: &[u8], sidecar: &str) -> Result<TrajectoryField> {
    let recs = parse_sidecar(sidecar)?;
    let mut snaps = Vec::with_capacity(recs.len());
    let mut off = 0;
    while off < bin.len() {
        let (u, used) = decode_field(&bin[off..])?;
        snaps.push(u);
        off += used;
    }
    if snaps.len() != recs.len() {
        return Err(Error::Decode(format!(
            "{} dumps but {} sidecar records",
            snaps.len(),
            recs.len()
        )));
    }
    if snaps.len() < 2 {
        return Err(Error::Decode("a trajectory needs at least two snapshots".into()));
    }
    let t0 = recs[0].t;
    let t1 = recs[recs.len() - 1].t;
    let n = recs.len() - 1;
    let dt = (t1 - t0) / n as f64;
    for (i, r) in recs.iter().enumerate() {
        if (r.t - (t0 + i as f64 * dt)).abs() > 1e-9 * (1.0 + t1.abs()) {
            return Err(Error::Decode("sidecar times are not a uniform grid".into()));
        }
    }
    TrajectoryField::new(t0, t1, snaps).map_err(|e| Error::Decode(e.to_string()))
}

/// Minimal deterministic CSV table.
#[derive(Clone, Debug, Default)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Fixed-format float for CSV cells.
pub fn fmt_f(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x:.12e}").unwrap();
    s
}
