//! Ensemble files and kernel tables.
//!
//! Ensemble layout (little-endian): magic, u64 header length, header JSON,
//! then `starts` and `escaped_at` as u32 arrays, then per checkpoint the
//! columns dx, dy (f64), d_graph (u32, only if recorded) and tile (u32).

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{WalkGraph, UNREACHED};

use super::{DisplacementEnsemble, HeatKernelField};

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"QWENSMB1";

#[derive(Debug, Error)]
pub enum EnsembleIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error: not an ensemble file")]
    BadMagic,
    #[error("parse error: file ends early")]
    Truncated,
    #[error("parse error: {0}")]
    Header(String),
}

#[derive(Serialize, Deserialize)]
struct Header {
    master_seed: u64,
    n_max: usize,
    samples: usize,
    checkpoints: Vec<usize>,
    escapes: usize,
    has_distances: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

fn put_u32s<W: Write>(out: &mut W, xs: &[u32]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(4 * xs.len());
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)
}

fn put_f64s<W: Write>(out: &mut W, xs: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(8 * xs.len());
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn write_ensemble<W: Write>(
    ens: &DisplacementEnsemble,
    meta: Option<&serde_json::Value>,
    mut out: W,
) -> io::Result<()> {
    let header = Header {
        master_seed: ens.master_seed,
        n_max: ens.n_max,
        samples: ens.samples(),
        checkpoints: ens.checkpoints.clone(),
        escapes: ens.escapes(),
        has_distances: ens.has_distances(),
        meta: meta.cloned(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(ENSEMBLE_MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    put_u32s(&mut out, &ens.starts)?;
    put_u32s(&mut out, &ens.escaped_at)?;
    for c in 0..ens.checkpoints.len() {
        put_f64s(&mut out, &ens.dx[c])?;
        put_f64s(&mut out, &ens.dy[c])?;
        if ens.has_distances() {
            put_u32s(&mut out, &ens.dist[c])?;
        }
        put_u32s(&mut out, &ens.tiles[c])?;
    }
    out.flush()
}

struct Cursor<'a> {
    data: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EnsembleIoError> {
        if self.data.len() < n {
            return Err(EnsembleIoError::Truncated);
        }
        let (head, rest) = self.data.split_at(n);
        self.data = rest;
        Ok(head)
    }

    fn u32s(&mut self, n: usize) -> Result<Vec<u32>, EnsembleIoError> {
        let bytes = self.take(n.checked_mul(4).ok_or(EnsembleIoError::Truncated)?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, EnsembleIoError> {
        let bytes = self.take(n.checked_mul(8).ok_or(EnsembleIoError::Truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn read_ensemble<R: Read>(
    mut input: R,
) -> Result<(DisplacementEnsemble, Option<serde_json::Value>), EnsembleIoError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut cur = Cursor { data: &data };
    if cur.take(8).map_err(|_| EnsembleIoError::BadMagic)? != ENSEMBLE_MAGIC {
        return Err(EnsembleIoError::BadMagic);
    }
    let len = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| EnsembleIoError::Truncated)?;
    let header: Header = serde_json::from_slice(cur.take(len)?)
        .map_err(|e| EnsembleIoError::Header(e.to_string()))?;
    let n = header.samples;
    let starts = cur.u32s(n)?;
    let escaped_at = cur.u32s(n)?;
    let k = header.checkpoints.len();
    let (mut dx, mut dy, mut dist, mut tiles) = (vec![], vec![], vec![], vec![]);
    for _ in 0..k {
        dx.push(cur.f64s(n)?);
        dy.push(cur.f64s(n)?);
        if header.has_distances {
            dist.push(cur.u32s(n)?);
        }
        tiles.push(cur.u32s(n)?);
    }
    if !cur.data.is_empty() {
        return Err(EnsembleIoError::Header("trailing bytes".into()));
    }
    let ens = DisplacementEnsemble {
        master_seed: header.master_seed,
        n_max: header.n_max,
        checkpoints: header.checkpoints,
        starts,
        escaped_at,
        dx,
        dy,
        dist,
        tiles,
    };
    if ens.escapes() != header.escapes {
        return Err(EnsembleIoError::Header("escape count mismatch".into()));
    }
    Ok((ens, header.meta))
}

/// Kernel table `tile_id,cx,cy,d_graph,p_n,p_n1` over the support of the
/// field. Unreached distances are written empty.
pub fn write_kernel_csv<G: WalkGraph + ?Sized, W: Write>(
    field: &HeatKernelField,
    graph: &G,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "tile_id,cx,cy,d_graph,p_n,p_n1")?;
    for v in field.support() {
        let c = graph.position(v);
        let d = field.distance[v];
        let d = if d == UNREACHED { String::new() } else { d.to_string() };
        writeln!(
            out,
            "{v},{},{},{d},{:e},{:e}",
            c[0], c[1], field.probs[v], field.next[v]
        )?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::square::SquareLattice;
    use crate::walk::{heat_kernel_evolve, simulate_ensemble, EnsembleConfig, Starts};

    fn sample() -> DisplacementEnsemble {
        let sq = SquareLattice::new(60);
        simulate_ensemble(&sq, &Starts::Fixed(sq.origin()), &EnsembleConfig::new(20, 300, 1)).unwrap()
    }

    #[test]
    fn ensemble_round_trip() {
        let ens = sample();
        let meta = serde_json::json!({"config_hash": "abc"});
        let mut buf = Vec::new();
        write_ensemble(&ens, Some(&meta), &mut buf).unwrap();
        let (back, m) = read_ensemble(&buf[..]).unwrap();
        assert_eq!(back, ens);
        assert_eq!(m, Some(meta));
    }

    #[test]
    fn truncated_ensemble_is_a_parse_error() {
        let mut buf = Vec::new();
        write_ensemble(&sample(), None, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        let err = read_ensemble(&buf[..]).unwrap_err();
        assert!(err.to_string().starts_with("parse error"));
        assert!(read_ensemble(&b"nonsense"[..]).is_err());
    }

    #[test]
    fn kernel_csv_rows() {
        let sq = SquareLattice::new(10);
        let f = &heat_kernel_evolve(&sq, sq.origin(), &[1], 1e-9).unwrap()[0];
        let mut buf = Vec::new();
        write_kernel_csv(f, &sq, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tile_id,cx,cy,d_graph,p_n,p_n1");
        // p_1 lives on 4 sites, p_2 on 9.
        assert_eq!(lines.len(), 1 + 13);
    }
}
