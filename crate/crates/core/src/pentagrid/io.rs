//! Patch persistence.
//!
//! Two forms carry the same fields. The JSON form stores params, radius and
//! per-tile `families`, `indices`, `kind` and the four vertex keys. The
//! binary form starts with the magic `QWPATCH1` and stores the same data as
//! fixed-width little-endian values. Euclidean coordinates are never stored;
//! they are recomputed from the keys on load.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{make_grid_params, PentagridError, Tile, TileKind, TilingPatch, VertexKey};

pub const BINARY_MAGIC: &[u8; 8] = b"QWPATCH1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchFormat {
    Json,
    Binary,
}

#[derive(Debug, Error)]
pub enum PatchIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error: truncated binary patch")]
    Truncated,
    #[error("parse error: {0}")]
    Invalid(String),
    #[error("invalid params: {0}")]
    Params(#[from] PentagridError),
}

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    offsets: [f64; 5],
}

#[derive(Serialize, Deserialize)]
struct TileDoc {
    families: [u8; 2],
    indices: [i32; 2],
    kind: TileKind,
    vkeys: [VertexKey; 4],
}

#[derive(Serialize, Deserialize)]
struct PatchDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
    params: ParamsDoc,
    radius: f64,
    tiles: Vec<TileDoc>,
}

fn rebuild_tile(
    families: [u8; 2],
    indices: [i32; 2],
    kind: TileKind,
    vkeys: [VertexKey; 4],
) -> Result<Tile, PatchIoError> {
    let (j, k) = (families[0], families[1]);
    if j >= k || k > 4 {
        return Err(PatchIoError::Invalid(format!("bad families ({j}, {k})")));
    }
    let tile = Tile::from_base((j, k), (indices[0], indices[1]), vkeys[0]);
    if tile.vkeys() != vkeys {
        return Err(PatchIoError::Invalid(format!(
            "vertex keys of tile ({j},{k},{},{}) are not a rhombus",
            indices[0], indices[1]
        )));
    }
    if vkeys[0][j as usize] != indices[0] || vkeys[0][k as usize] != indices[1] {
        return Err(PatchIoError::Invalid("vertex keys disagree with indices".into()));
    }
    if tile.kind != kind {
        return Err(PatchIoError::Invalid("kind disagrees with families".into()));
    }
    Ok(tile)
}

/// Serialize a patch. `meta` is embedded verbatim (tool version, config hash).
pub fn write_patch<W: Write>(
    patch: &TilingPatch,
    format: PatchFormat,
    meta: Option<&serde_json::Value>,
    mut out: W,
) -> Result<(), PatchIoError> {
    match format {
        PatchFormat::Json => {
            let doc = PatchDoc {
                meta: meta.cloned(),
                params: ParamsDoc {
                    offsets: patch.params.offsets(),
                },
                radius: patch.radius,
                tiles: patch
                    .tiles
                    .iter()
                    .map(|t| TileDoc {
                        families: [t.families.0, t.families.1],
                        indices: [t.indices.0, t.indices.1],
                        kind: t.kind,
                        vkeys: t.vkeys(),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut out, &doc)?;
        }
        PatchFormat::Binary => {
            out.write_all(BINARY_MAGIC)?;
            let meta_bytes = match meta {
                Some(m) => serde_json::to_vec(m)?,
                None => Vec::new(),
            };
            out.write_all(&(meta_bytes.len() as u32).to_le_bytes())?;
            out.write_all(&meta_bytes)?;
            for g in patch.params.offsets() {
                out.write_all(&g.to_le_bytes())?;
            }
            out.write_all(&patch.radius.to_le_bytes())?;
            out.write_all(&(patch.tiles.len() as u64).to_le_bytes())?;
            let mut buf = Vec::with_capacity(91);
            for t in &patch.tiles {
                buf.clear();
                buf.push(t.families.0);
                buf.push(t.families.1);
                buf.push(match t.kind {
                    TileKind::Thick => 0,
                    TileKind::Thin => 1,
                });
                buf.extend_from_slice(&t.indices.0.to_le_bytes());
                buf.extend_from_slice(&t.indices.1.to_le_bytes());
                for key in t.vkeys() {
                    for c in key {
                        buf.extend_from_slice(&c.to_le_bytes());
                    }
                }
                out.write_all(&buf)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PatchIoError> {
        let end = self.pos.checked_add(n).ok_or(PatchIoError::Truncated)?;
        let s = self.data.get(self.pos..end).ok_or(PatchIoError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], PatchIoError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn f64(&mut self) -> Result<f64, PatchIoError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn i32(&mut self) -> Result<i32, PatchIoError> {
        Ok(i32::from_le_bytes(self.array()?))
    }
}

/// Read a patch in either form, detected from the leading bytes.
pub fn read_patch<R: Read>(mut input: R) -> Result<(TilingPatch, Option<serde_json::Value>), PatchIoError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    if data.starts_with(BINARY_MAGIC) {
        read_binary(&data)
    } else {
        let doc: PatchDoc = serde_json::from_slice(&data)?;
        let params = make_grid_params(doc.params.offsets)?;
        let tiles = doc
            .tiles
            .into_iter()
            .map(|t| rebuild_tile(t.families, t.indices, t.kind, t.vkeys))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((
            TilingPatch {
                params,
                radius: doc.radius,
                tiles,
            },
            doc.meta,
        ))
    }
}

fn read_binary(data: &[u8]) -> Result<(TilingPatch, Option<serde_json::Value>), PatchIoError> {
    let mut cur = Cursor { data, pos: 8 };
    let meta_len = u32::from_le_bytes(cur.array()?) as usize;
    let meta_bytes = cur.take(meta_len)?;
    let meta = if meta_len == 0 {
        None
    } else {
        Some(serde_json::from_slice(meta_bytes)?)
    };
    let mut offsets = [0.0; 5];
    for g in &mut offsets {
        *g = cur.f64()?;
    }
    let params = make_grid_params(offsets)?;
    let radius = cur.f64()?;
    let count = u64::from_le_bytes(cur.array()?) as usize;
    if count > data.len() / 91 + 1 {
        return Err(PatchIoError::Truncated);
    }
    let mut tiles = Vec::with_capacity(count);
    for _ in 0..count {
        let head: [u8; 3] = cur.array()?;
        let kind = match head[2] {
            0 => TileKind::Thick,
            1 => TileKind::Thin,
            other => return Err(PatchIoError::Invalid(format!("bad kind byte {other}"))),
        };
        let indices = [cur.i32()?, cur.i32()?];
        let mut vkeys = [[0i32; 5]; 4];
        for key in &mut vkeys {
            for c in key.iter_mut() {
                *c = cur.i32()?;
            }
        }
        tiles.push(rebuild_tile([head[0], head[1]], indices, kind, vkeys)?);
    }
    if cur.pos != data.len() {
        return Err(PatchIoError::Invalid("trailing bytes after tiles".into()));
    }
    Ok((
        TilingPatch {
            params,
            radius,
            tiles,
        },
        meta,
    ))
}
