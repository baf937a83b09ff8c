//! File formats: text point clouds, the PCF1 binary matrix container, the
//! NIT1 packed neighbor table, and the TOML network description.
//!
//! Text clouds hold one whitespace-separated `x y z` triple per line; blank
//! lines and lines starting with `#` are skipped.
//!
//! PCF1 is a row-major f32 matrix: magic `PCF1`, little-endian u32 row and
//! column counts, then `rows * cols` little-endian f32 words.
//!
//! NIT1 mirrors the aggregation unit's entry layout: magic `NIT1`,
//! little-endian u32 `n_out` and `k`, then one 98-byte entry per centroid.
//! An entry is a little-endian u16 valid count followed by 64 neighbor
//! indices packed 12 bits each (96 bytes), unused slots zero. The format
//! has no separate centroid field; the centroid is recovered as the entry's
//! first index, which holds whenever the table lists each centroid as its
//! own nearest neighbor. Tables where that is not the case cannot be
//! serialized losslessly and are rejected on write.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{NeighborIndexTable, PointCloud};
use crate::pipeline::{ModuleConfig, NetworkConfig, SearchSpace};
use crate::rng::{derive_seed, Xorshift64Star};
use crate::tensor::{Activation, Mat, Mlp};

pub const NIT_MAGIC: [u8; 4] = *b"NIT1";
pub const PCF_MAGIC: [u8; 4] = *b"PCF1";
pub const NIT_HEADER_BYTES: u64 = 12;
pub const NIT_ENTRY_BYTES: u64 = 98;
/// Neighbor slots in one fixed-size entry.
pub const NIT_ENTRY_SLOTS: usize = 64;
/// Widest index one entry slot can hold.
pub const NIT_MAX_INDEX: usize = (1 << 12) - 1;

/// Size of a serialized neighbor table. Valid for `k` up to
/// [`NIT_ENTRY_SLOTS`], which is all the writer accepts.
pub fn nit_file_bytes(n_out: usize) -> u64 {
    NIT_HEADER_BYTES + NIT_ENTRY_BYTES * n_out as u64
}

/// Bytes a neighbor table occupies as a DRAM stream. Tables wider than one
/// entry spill into `ceil(k / 64)` entries per centroid; for `k <= 64` this
/// equals [`nit_file_bytes`].
pub fn nit_stream_bytes(n_out: usize, k: usize) -> u64 {
    NIT_HEADER_BYTES + NIT_ENTRY_BYTES * n_out as u64 * (k as u64).div_ceil(64)
}

fn io_err(path: &Path, err: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Parse a text cloud: one `x y z` triple per line.
pub fn read_cloud_text(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 3 coordinates, found {}", fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(3);
        for f in fields {
            let v: f32 = f
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("bad number {f:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line_no, format!("non-finite value {f:?}")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no points"));
    }
    PointCloud::new_raw(Mat::from_rows(&rows)?)
}

/// Write a cloud as text, one point per line. Values use the shortest
/// decimal form that parses back to the same f32.
pub fn write_cloud_text(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut out = String::new();
    for r in 0..cloud.len() {
        let row = cloud.mat().row(r);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Read a PCF1 matrix.
pub fn read_matrix_pcf1(path: &Path) -> Result<Mat> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 12 || bytes[..4] != PCF_MAGIC {
        return Err(parse_err(path, 0, "not a PCF1 file"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(parse_err(path, 0, "empty matrix"));
    }
    let expect = 12 + rows as u64 * cols as u64 * 4;
    if bytes.len() as u64 != expect {
        return Err(parse_err(
            path,
            0,
            format!("{rows}x{cols} matrix needs {expect} bytes, file has {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for chunk in bytes[12..].chunks_exact(4) {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(parse_err(path, 0, "non-finite value in matrix"));
        }
        data.push(v);
    }
    Mat::from_vec(rows, cols, data)
}

/// Write a matrix in PCF1 form.
pub fn write_matrix_pcf1(path: &Path, mat: &Mat) -> Result<()> {
    if mat.rows() > u32::MAX as usize || mat.cols() > u32::MAX as usize {
        return Err(Error::Capacity(format!(
            "{}x{} matrix exceeds the u32 header fields",
            mat.rows(),
            mat.cols()
        )));
    }
    if !mat.is_finite() {
        return Err(Error::Argument(
            "refusing to write a matrix with non-finite values".into(),
        ));
    }
    let mut bytes = Vec::with_capacity(12 + mat.data().len() * 4);
    bytes.extend_from_slice(&PCF_MAGIC);
    bytes.extend_from_slice(&(mat.rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(mat.cols() as u32).to_le_bytes());
    for v in mat.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Read a cloud from either format, sniffing the PCF1 magic.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() >= 4 && bytes[..4] == PCF_MAGIC {
        PointCloud::new(read_matrix_pcf1(path)?)
    } else {
        read_cloud_text(path)
    }
}

/// Write a cloud, choosing PCF1 for a `.pcf1` or `.pcf` extension and text
/// otherwise.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pcf1") | Some("pcf") => write_matrix_pcf1(path, cloud.mat()),
        _ => write_cloud_text(path, cloud),
    }
}

fn pack_slot(buf: &mut [u8], slot: usize, value: usize) {
    let bit = 12 * slot;
    let byte = bit / 8;
    let shifted = (value as u32) << (bit % 8);
    buf[byte] |= (shifted & 0xff) as u8;
    buf[byte + 1] |= (shifted >> 8) as u8;
}

fn unpack_slot(buf: &[u8], slot: usize) -> usize {
    let bit = 12 * slot;
    let byte = bit / 8;
    let pair = u32::from(buf[byte]) | (u32::from(buf[byte + 1]) << 8);
    ((pair >> (bit % 8)) & 0xfff) as usize
}

/// Serialize a neighbor table. Rejects tables the entry format cannot hold:
/// more than 64 neighbors, indices past 4095, or a centroid that is not its
/// entry's first index (the format stores no centroid column).
pub fn write_nit(path: &Path, nit: &NeighborIndexTable) -> Result<()> {
    if nit.k() > NIT_ENTRY_SLOTS {
        return Err(Error::Capacity(format!(
            "k = {} but one entry holds at most {NIT_ENTRY_SLOTS} neighbors",
            nit.k()
        )));
    }
    if nit.n_out() > u32::MAX as usize {
        return Err(Error::Capacity(format!(
            "n_out = {} exceeds the u32 header field",
            nit.n_out()
        )));
    }
    let mut bytes = Vec::with_capacity(nit_file_bytes(nit.n_out()) as usize);
    bytes.extend_from_slice(&NIT_MAGIC);
    bytes.extend_from_slice(&(nit.n_out() as u32).to_le_bytes());
    bytes.extend_from_slice(&(nit.k() as u32).to_le_bytes());
    for c in 0..nit.n_out() {
        let row = nit.row(c);
        if row[0] != nit.centroid(c) {
            return Err(Error::Argument(format!(
                "entry {c} starts with index {} but its centroid is {}; \
                 the format recovers centroids from the first slot",
                row[0],
                nit.centroid(c)
            )));
        }
        bytes.extend_from_slice(&(nit.k() as u16).to_le_bytes());
        let mut packed = [0u8; 96];
        for (slot, &idx) in row.iter().enumerate() {
            if idx > NIT_MAX_INDEX {
                return Err(Error::Capacity(format!(
                    "index {idx} does not fit in 12 bits"
                )));
            }
            pack_slot(&mut packed, slot, idx);
        }
        bytes.extend_from_slice(&packed);
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Deserialize a neighbor table written by [`write_nit`].
pub fn read_nit(path: &Path) -> Result<NeighborIndexTable> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.len() < 12 || bytes[..4] != NIT_MAGIC {
        return Err(parse_err(path, 0, "not a NIT1 file"));
    }
    let n_out = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let k = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if n_out == 0 || k == 0 || k > NIT_ENTRY_SLOTS {
        return Err(parse_err(path, 0, format!("bad header: n_out={n_out}, k={k}")));
    }
    if bytes.len() as u64 != nit_file_bytes(n_out) {
        return Err(parse_err(
            path,
            0,
            format!(
                "{n_out} entries need {} bytes, file has {}",
                nit_file_bytes(n_out),
                bytes.len()
            ),
        ));
    }
    let mut indices = Vec::with_capacity(n_out * k);
    let mut centroids = Vec::with_capacity(n_out);
    for c in 0..n_out {
        let entry = &bytes[12 + 98 * c..12 + 98 * (c + 1)];
        let valid = u16::from_le_bytes(entry[..2].try_into().unwrap()) as usize;
        if valid != k {
            return Err(parse_err(
                path,
                0,
                format!("entry {c} holds {valid} indices but the header says {k}"),
            ));
        }
        let packed = &entry[2..];
        for slot in 0..k {
            indices.push(unpack_slot(packed, slot));
        }
        centroids.push(indices[c * k]);
    }
    NeighborIndexTable::new(n_out, k, indices, centroids)
}

/// Raw deserialization target for the TOML network description.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    input_dim: Option<usize>,
    seed: Option<u64>,
    #[serde(rename = "module")]
    modules: Vec<ModuleDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModuleDoc {
    n_out: usize,
    k: usize,
    widths: Vec<usize>,
    activation: Option<String>,
    search: Option<SearchSpace>,
    include_self: Option<bool>,
    seed: Option<u64>,
}

/// A parsed network description.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub net: NetworkConfig,
    pub input_dim: usize,
    pub seed: u64,
}

fn materialize_mlp(widths: &[usize], activation: Activation, seed: u64) -> Result<Mlp> {
    let mut rng = Xorshift64Star::new(seed);
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for w in widths.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
        let data: Vec<f32> = (0..fan_in * fan_out)
            .map(|_| (rng.next_f32() * 2.0 - 1.0) * limit)
            .collect();
        layers.push(Mat::from_vec(fan_in, fan_out, data)?);
    }
    Mlp::new(layers, activation)
}

/// Build runnable module configs from parsed TOML. The base seed is the
/// document's `seed`, or `fallback_seed` when the document has none. Weights
/// are drawn from a per-module stream seeded by `derive_seed(base, 2 *
/// index)`; centroid sampling uses `derive_seed(base, 2 * index + 1)` unless
/// the module pins its own seed. The same document and base seed always
/// produce identical weights.
pub fn parse_network_toml(text: &str, origin: &str, fallback_seed: u64) -> Result<LoadedNetwork> {
    let doc: NetworkDoc = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    if doc.modules.is_empty() {
        return Err(Error::Config("the network has no modules".into()));
    }
    let input_dim = doc.input_dim.unwrap_or(3);
    let base_seed = doc.seed.unwrap_or(fallback_seed);

    let mut modules = Vec::with_capacity(doc.modules.len());
    for (i, m) in doc.modules.iter().enumerate() {
        if m.widths.len() < 2 {
            return Err(Error::Config(format!(
                "module {i} needs at least an input and an output width"
            )));
        }
        if m.widths.contains(&0) {
            return Err(Error::Config(format!("module {i} has a zero width")));
        }
        if m.n_out == 0 || m.k == 0 {
            return Err(Error::Config(format!(
                "module {i} needs positive n_out and k"
            )));
        }
        let activation = match m.activation.as_deref() {
            None | Some("rectifier") => Activation::Rectifier,
            Some("identity") => Activation::Identity,
            Some(other) => {
                return Err(Error::Config(format!(
                    "module {i} has unknown activation {other:?} \
                     (expected \"identity\" or \"rectifier\")"
                )))
            }
        };
        let mlp = materialize_mlp(&m.widths, activation, derive_seed(base_seed, 2 * i as u64))?;
        modules.push(ModuleConfig {
            n_out: m.n_out,
            k: m.k,
            mlp,
            search_space: m.search.unwrap_or(SearchSpace::Coordinates),
            seed: m.seed.unwrap_or_else(|| derive_seed(base_seed, 2 * i as u64 + 1)),
            include_self: m.include_self.unwrap_or(true),
        });
    }
    let net = NetworkConfig { modules };
    net.validate_chain(input_dim)?;
    Ok(LoadedNetwork {
        net,
        input_dim,
        seed: base_seed,
    })
}

/// [`parse_network_toml`] from a file.
pub fn load_network_toml(path: &Path, fallback_seed: u64) -> Result<LoadedNetwork> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_network_toml(&text, &path.display().to_string(), fallback_seed)
}
