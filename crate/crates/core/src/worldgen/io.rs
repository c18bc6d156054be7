//! World dataset container. Byte layout is documented in `docs/FORMATS.md`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Node, NodeSet, Split, WorldDataset, WorldEntry, WorldMap};
use crate::error::{Error, Result};

/// `major.minor`; readers accept any file with the same major version.
pub const FORMAT_VERSION: &str = "1.0";
const MAGIC: &[u8; 4] = b"IGWD";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CellEncoding {
    #[default]
    Json,
    Packed,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: String,
    generator_name: String,
    seed: u64,
    resolution: f64,
    dims: [usize; 2],
    count: usize,
    split: Split,
    cell_encoding: CellEncoding,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonWorld {
    occupied_delta: Vec<usize>,
    nodes: Vec<(usize, f64, f64, f64)>,
    start_id: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonContainer {
    header: Header,
    worlds: Vec<JsonWorld>,
}

fn delta_encode(sorted: &[usize]) -> Vec<usize> {
    let mut prev = 0;
    sorted
        .iter()
        .map(|&c| {
            let d = c - prev;
            prev = c;
            d
        })
        .collect()
}

fn delta_decode(deltas: &[usize]) -> Result<Vec<usize>> {
    let mut acc = 0usize;
    let mut out = Vec::with_capacity(deltas.len());
    for (i, &d) in deltas.iter().enumerate() {
        if i > 0 && d == 0 {
            return Err(Error::Format("occupied cell list is not strictly increasing".into()));
        }
        acc = acc
            .checked_add(d)
            .ok_or_else(|| Error::Format("cell index overflow".into()))?;
        out.push(acc);
    }
    Ok(out)
}

fn header_of(d: &WorldDataset, encoding: CellEncoding) -> Result<Header> {
    let first = &d
        .entries
        .first()
        .ok_or_else(|| Error::InvalidConfig("cannot save an empty dataset".into()))?
        .world;
    Ok(Header {
        format_version: FORMAT_VERSION.to_string(),
        generator_name: d.generator_name.clone(),
        seed: d.seed,
        resolution: first.resolution(),
        dims: [first.width(), first.height()],
        count: d.entries.len(),
        split: d.split,
        cell_encoding: encoding,
    })
}

fn check_version(v: &str) -> Result<()> {
    let major = |s: &str| s.split('.').next().and_then(|m| m.parse::<u32>().ok());
    match (major(v), major(FORMAT_VERSION)) {
        (Some(a), Some(b)) if a == b => Ok(()),
        _ => Err(Error::FormatVersion {
            found: v.to_string(),
            supported: FORMAT_VERSION.to_string(),
        }),
    }
}

fn build_entry(h: &Header, occupied: &[usize], nodes: Vec<Node>, start_id: usize) -> Result<WorldEntry> {
    let world = WorldMap::from_occupied(h.dims[0], h.dims[1], h.resolution, occupied)?;
    let nodes = NodeSet::new(nodes, start_id, &world)?;
    Ok(WorldEntry { world, nodes })
}

/// Serializes a dataset to bytes in the requested cell encoding.
pub fn encode(d: &WorldDataset, encoding: CellEncoding) -> Result<Vec<u8>> {
    let header = header_of(d, encoding)?;
    match encoding {
        CellEncoding::Json => {
            let worlds = d
                .entries
                .iter()
                .map(|e| JsonWorld {
                    occupied_delta: delta_encode(&e.world.occupied_cells()),
                    nodes: e.nodes.nodes().iter().map(|n| (n.id, n.x, n.y, n.heading)).collect(),
                    start_id: e.nodes.start_id(),
                })
                .collect();
            let mut out = serde_json::to_vec(&JsonContainer { header, worlds })?;
            out.push(b'\n');
            Ok(out)
        }
        CellEncoding::Packed => {
            let header = serde_json::to_vec(&header)?;
            let mut out = Vec::new();
            out.extend_from_slice(MAGIC);
            out.extend_from_slice(&(header.len() as u32).to_le_bytes());
            out.extend_from_slice(&header);
            for e in &d.entries {
                let occ = e.world.occupied_cells();
                out.extend_from_slice(&(occ.len() as u32).to_le_bytes());
                for delta in delta_encode(&occ) {
                    write_varint(&mut out, delta as u64);
                }
                out.extend_from_slice(&(e.nodes.len() as u32).to_le_bytes());
                for n in e.nodes.nodes() {
                    out.extend_from_slice(&(n.id as u32).to_le_bytes());
                    out.extend_from_slice(&n.x.to_le_bytes());
                    out.extend_from_slice(&n.y.to_le_bytes());
                    out.extend_from_slice(&n.heading.to_le_bytes());
                }
                out.extend_from_slice(&(e.nodes.start_id() as u32).to_le_bytes());
            }
            Ok(out)
        }
    }
}

/// Parses either container encoding, detected from the leading bytes.
pub fn decode(bytes: &[u8]) -> Result<WorldDataset> {
    let (header, entries) = if bytes.starts_with(MAGIC) {
        decode_packed(bytes)?
    } else {
        let c: JsonContainer = serde_json::from_slice(bytes)?;
        check_version(&c.header.format_version)?;
        let entries = c
            .worlds
            .into_iter()
            .map(|w| {
                let nodes = w
                    .nodes
                    .into_iter()
                    .map(|(id, x, y, heading)| Node { id, x, y, heading })
                    .collect();
                build_entry(&c.header, &delta_decode(&w.occupied_delta)?, nodes, w.start_id)
            })
            .collect::<Result<Vec<_>>>()?;
        (c.header, entries)
    };
    if entries.len() != header.count || entries.is_empty() {
        return Err(Error::Format(format!(
            "header declares {} worlds, found {}",
            header.count,
            entries.len()
        )));
    }
    Ok(WorldDataset {
        entries,
        seed: header.seed,
        generator_name: header.generator_name,
        split: header.split,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn varint(&mut self) -> Result<u64> {
        let mut value = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.take(1)?[0];
            value |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::Format("varint too long".into()))
    }
}

fn write_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let b = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn decode_packed(bytes: &[u8]) -> Result<(Header, Vec<WorldEntry>)> {
    let mut r = Reader { bytes, pos: MAGIC.len() };
    let hlen = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(hlen)?)?;
    check_version(&header.format_version)?;
    let cells = header.dims[0].saturating_mul(header.dims[1]);
    let mut entries = Vec::with_capacity(header.count.min(1 << 16));
    for _ in 0..header.count {
        let n_occ = r.u32()? as usize;
        if n_occ > cells {
            return Err(Error::Format("occupied count exceeds grid size".into()));
        }
        let deltas = (0..n_occ)
            .map(|_| r.varint().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let n_nodes = r.u32()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes.min(cells));
        for _ in 0..n_nodes {
            let id = r.u32()? as usize;
            let (x, y, heading) = (r.f64()?, r.f64()?, r.f64()?);
            nodes.push(Node { id, x, y, heading });
        }
        let start_id = r.u32()? as usize;
        entries.push(build_entry(&header, &delta_decode(&deltas)?, nodes, start_id)?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after last world".into()));
    }
    Ok((header, entries))
}

pub fn save_dataset(d: &WorldDataset, path: &Path, encoding: CellEncoding) -> Result<()> {
    fs::write(path, encode(d, encoding)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<WorldDataset> {
    decode(&fs::read(path)?)
}
