//! De Bruijn pentagrid construction of Penrose rhombus tilings.
//!
//! Five families of parallel lines `{z : z·ζᵏ + γₖ = p}` are laid over the
//! plane. Every intersection of two lines (one from family `j`, one from
//! family `k`) dualizes to a rhombus with edges `ζʲ` and `ζᵏ`; every open
//! mesh cell dualizes to a tiling vertex `Σ Kₘ ζᵐ` with integer key
//! `K ∈ ℤ⁵`. Vertex identity is always decided on the integer keys.

mod geometry;
mod io;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::LazyLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geometry::{check_patch, Coverage, GeometryReport};
pub use io::{read_patch, write_patch, PatchFormat, PatchIoError, BINARY_MAGIC};

/// Golden mean `(1 + √5) / 2`.
pub const TAU: f64 = 1.618_033_988_749_895;

/// Tolerance on `Σ γₖ = 0`.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Minimum distance of a query point (or a third line) from a grid line.
pub const LINE_TOLERANCE: f64 = 1e-9;

/// Default grid phases; they sum to zero and are regular in practice.
pub const DEFAULT_OFFSETS: [f64; 5] = [0.1, 0.2, 0.3, 0.15, -0.75];

/// Smallest generation radius accepted by [`generate_patch`].
pub const MIN_RADIUS: f64 = 5.0;

/// Geometric margin separating the interior of a patch from its ragged rim.
pub const INTERIOR_MARGIN: f64 = 3.0;

/// Largest absolute key coordinate representable in packed edge keys.
pub const MAX_KEY: i32 = 2047;

/// The five unit star directions `ζᵏ = (cos 2πk/5, sin 2πk/5)`.
pub static STAR: LazyLock<[[f64; 2]; 5]> = LazyLock::new(|| {
    let mut star = [[0.0; 2]; 5];
    for (k, s) in star.iter_mut().enumerate() {
        let angle = 2.0 * PI * k as f64 / 5.0;
        *s = [angle.cos(), angle.sin()];
    }
    star
});

/// A point of the plane, `[x, y]`.
pub type Point = [f64; 2];

/// An integer vertex key in ℤ⁵.
pub type VertexKey = [i32; 5];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PentagridError {
    #[error("offsets must be finite")]
    NonFinite,
    #[error("offsets sum to {0:e}; Penrose tilings need a zero sum")]
    SumNonzero(f64),
    #[error("degenerate offsets: all five index-0 grid lines pass through the origin")]
    Degenerate,
    #[error("family {0} paired with itself")]
    SameFamily(usize),
    #[error("families ({0}, {1}) must satisfy 0 <= j < k <= 4")]
    BadFamilies(usize, usize),
    #[error("point lies on grid line (family {family}, index {index})")]
    OnGridLine { family: usize, index: i64 },
    #[error("irregular intersection of ({j},{p}) and ({k},{q}): line ({family}, {index}) passes through it")]
    Irregular {
        j: usize,
        p: i32,
        k: usize,
        q: i32,
        family: usize,
        index: i64,
    },
    #[error("irregular params: {0}")]
    IrregularParams(Box<PentagridError>),
    #[error("radius {0} is below the minimum of {MIN_RADIUS}")]
    RadiusTooSmall(f64),
    #[error("radius {0} exceeds the representable key range")]
    RadiusTooLarge(f64),
    #[error("cannot expand a patch of radius {from} to radius {to}")]
    ShrinkRequest { from: f64, to: f64 },
}

/// Grid phases `γ₀..γ₄` selecting one Penrose tiling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridParams {
    offsets: [f64; 5],
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            offsets: DEFAULT_OFFSETS,
        }
    }
}

impl GridParams {
    pub fn offsets(&self) -> [f64; 5] {
        self.offsets
    }

    /// Value of the family-`m` line function `z·ζᵐ + γₘ` at `z`.
    #[inline]
    pub fn grid_coordinate(&self, m: usize, z: Point) -> f64 {
        let s = STAR[m];
        z[0] * s[0] + z[1] * s[1] + self.offsets[m]
    }
}

/// Validate offsets and build [`GridParams`].
///
/// Regularity (no three concurrent lines) is checked later, during
/// generation, since it depends on the window.
pub fn make_grid_params(offsets: [f64; 5]) -> Result<GridParams, PentagridError> {
    if offsets.iter().any(|g| !g.is_finite()) {
        return Err(PentagridError::NonFinite);
    }
    let sum: f64 = offsets.iter().sum();
    if sum.abs() > SUM_TOLERANCE {
        return Err(PentagridError::SumNonzero(sum));
    }
    if offsets
        .iter()
        .all(|g| (g - g.round()).abs() <= SUM_TOLERANCE)
    {
        return Err(PentagridError::Degenerate);
    }
    Ok(GridParams { offsets })
}

/// Intersection of line `(j, p)` with line `(k, q)`.
pub fn line_intersection(
    j: usize,
    p: i32,
    k: usize,
    q: i32,
    params: &GridParams,
) -> Result<Point, PentagridError> {
    if j == k {
        return Err(PentagridError::SameFamily(j));
    }
    if j > 4 || k > 4 {
        return Err(PentagridError::BadFamilies(j, k));
    }
    Ok(intersect(j, p, k, q, params))
}

#[inline]
fn intersect(j: usize, p: i32, k: usize, q: i32, params: &GridParams) -> Point {
    let a = STAR[j];
    let b = STAR[k];
    let rj = p as f64 - params.offsets[j];
    let rk = q as f64 - params.offsets[k];
    let det = a[0] * b[1] - a[1] * b[0];
    [(rj * b[1] - rk * a[1]) / det, (a[0] * rk - b[0] * rj) / det]
}

/// Position of the tiling vertex with key `key`.
#[inline]
pub fn key_position(key: &VertexKey) -> Point {
    let mut v = [0.0; 2];
    for (m, &km) in key.iter().enumerate() {
        v[0] += km as f64 * STAR[m][0];
        v[1] += km as f64 * STAR[m][1];
    }
    v
}

/// Dualize a point of an open mesh cell to its tiling vertex.
pub fn dual_vertex(z: Point, params: &GridParams) -> Result<(VertexKey, Point), PentagridError> {
    let mut key = [0i32; 5];
    for (m, km) in key.iter_mut().enumerate() {
        let t = params.grid_coordinate(m, z);
        let nearest = t.round();
        if (t - nearest).abs() <= LINE_TOLERANCE {
            return Err(PentagridError::OnGridLine {
                family: m,
                index: nearest as i64,
            });
        }
        *km = t.ceil() as i32;
    }
    Ok((key, key_position(&key)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TileKind {
    Thick,
    Thin,
}

impl TileKind {
    pub fn for_families(j: usize, k: usize) -> Self {
        match (k + 5 - j) % 5 {
            1 | 4 => TileKind::Thick,
            _ => TileKind::Thin,
        }
    }

    /// Area of the unit-edge rhombus of this kind.
    pub fn area(self) -> f64 {
        match self {
            TileKind::Thick => (0.4 * PI).sin(),
            TileKind::Thin => (0.2 * PI).sin(),
        }
    }
}

/// One rhombus, dual to the intersection of lines `(j, p)` and `(k, q)`.
///
/// Only the base vertex key is stored; the other three keys differ from it
/// by unit steps in families `j` and `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tile {
    pub families: (u8, u8),
    pub indices: (i32, i32),
    pub kind: TileKind,
    base: VertexKey,
    center: Point,
}

impl Tile {
    pub(crate) fn from_base(families: (u8, u8), indices: (i32, i32), base: VertexKey) -> Self {
        let (j, k) = (families.0 as usize, families.1 as usize);
        let b = key_position(&base);
        let c = [
            b[0] + 0.5 * (STAR[j][0] + STAR[k][0]),
            b[1] + 0.5 * (STAR[j][1] + STAR[k][1]),
        ];
        Tile {
            families,
            indices,
            kind: TileKind::for_families(j, k),
            base,
            center: c,
        }
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn base_key(&self) -> VertexKey {
        self.base
    }

    /// The four vertex keys in cyclic order: base, +eⱼ, +eⱼ+eₖ, +eₖ.
    pub fn vkeys(&self) -> [VertexKey; 4] {
        let (j, k) = (self.families.0 as usize, self.families.1 as usize);
        let mut keys = [self.base; 4];
        keys[1][j] += 1;
        keys[2][j] += 1;
        keys[2][k] += 1;
        keys[3][k] += 1;
        keys
    }

    pub fn vertices(&self) -> [Point; 4] {
        self.vkeys().map(|k| key_position(&k))
    }

    /// Signed area (shoelace) of the vertex polygon.
    pub fn signed_area(&self) -> f64 {
        let v = self.vertices();
        let mut a = 0.0;
        for i in 0..4 {
            let (p, q) = (v[i], v[(i + 1) % 4]);
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    /// Whether `pt` lies in the closed rhombus, with slack `tol`.
    pub fn contains(&self, pt: Point, tol: f64) -> bool {
        let v = self.vertices();
        let sign = self.signed_area().signum();
        (0..4).all(|i| {
            let (a, b) = (v[i], v[(i + 1) % 4]);
            let cross = (b[0] - a[0]) * (pt[1] - a[1]) - (b[1] - a[1]) * (pt[0] - a[0]);
            sign * cross >= -tol
        })
    }

    /// Doubled grid coordinates of the defining intersection: `2·index` on
    /// the two defining families, `2·Kₘ − 1` (an open-interval code) on the
    /// other three.
    pub fn line_code(&self) -> [i32; 5] {
        let (j, k) = (self.families.0 as usize, self.families.1 as usize);
        let mut code = [0i32; 5];
        for m in 0..5 {
            code[m] = if m == j || m == k {
                2 * self.base[m]
            } else {
                2 * self.base[m] - 1
            };
        }
        code
    }
}

/// Build the tile dual to the intersection of `(j, p)` and `(k, q)`.
pub fn tile_at(j: usize, p: i32, k: usize, q: i32, params: &GridParams) -> Result<Tile, PentagridError> {
    if j == k {
        return Err(PentagridError::SameFamily(j));
    }
    if j > k || k > 4 {
        return Err(PentagridError::BadFamilies(j, k));
    }
    let z = intersect(j, p, k, q, params);
    let mut base = [0i32; 5];
    for m in 0..5 {
        if m == j {
            base[m] = p;
        } else if m == k {
            base[m] = q;
        } else {
            let t = params.grid_coordinate(m, z);
            let nearest = t.round();
            if (t - nearest).abs() <= LINE_TOLERANCE {
                return Err(PentagridError::Irregular {
                    j,
                    p,
                    k,
                    q,
                    family: m,
                    index: nearest as i64,
                });
            }
            base[m] = t.ceil() as i32;
        }
    }
    Ok(Tile::from_base((j as u8, k as u8), (p, q), base))
}

/// The ten family pairs `(j, k)`, `j < k`, in lexicographic order.
pub fn family_pairs() -> impl Iterator<Item = (usize, usize)> {
    (0..5).flat_map(|j| (j + 1..5).map(move |k| (j, k)))
}

/// A finite window of the tiling: every tile whose center lies in the
/// closed disk of radius `radius`.
#[derive(Debug, Clone)]
pub struct TilingPatch {
    pub params: GridParams,
    pub radius: f64,
    pub tiles: Vec<Tile>,
}

impl TilingPatch {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Radius inside which the patch is free of truncation effects.
    pub fn interior_radius(&self) -> f64 {
        self.radius - INTERIOR_MARGIN
    }

    /// Map from vertex key to the tiles incident to it.
    pub fn vertex_index(&self) -> HashMap<VertexKey, Vec<usize>> {
        let mut index: HashMap<VertexKey, Vec<usize>> = HashMap::new();
        for (i, t) in self.tiles.iter().enumerate() {
            for key in t.vkeys() {
                index.entry(key).or_default().push(i);
            }
        }
        index
    }

    pub fn count_kind(&self, kind: TileKind) -> usize {
        self.tiles.iter().filter(|t| t.kind == kind).count()
    }
}

/// Bound on `|center − 2.5·z₀|` over all tiles, used to size the grid window.
fn center_slack(params: &GridParams) -> f64 {
    params.offsets.iter().map(|g| g.abs()).sum::<f64>() + 5.0
}

fn tiles_for_pair(
    j: usize,
    k: usize,
    radius: f64,
    params: &GridParams,
) -> Result<Vec<Tile>, PentagridError> {
    // Tile centers sit near 2.5·z₀, so the grid window is shrunk accordingly.
    let rho = (radius + center_slack(params)) / 2.5;
    let range = |m: usize| {
        let g = params.offsets[m];
        ((-rho + g).ceil() as i32)..=((rho + g).floor() as i32)
    };
    let mut out = Vec::new();
    for p in range(j) {
        for q in range(k) {
            let z = intersect(j, p, k, q, params);
            if z[0] * z[0] + z[1] * z[1] > rho * rho {
                continue;
            }
            let tile = tile_at(j, p, k, q, params)?;
            let c = tile.center;
            if c[0] * c[0] + c[1] * c[1] <= radius * radius {
                out.push(tile);
            }
        }
    }
    Ok(out)
}

fn check_radius(radius: f64, params: &GridParams) -> Result<(), PentagridError> {
    if !(radius >= MIN_RADIUS) {
        return Err(PentagridError::RadiusTooSmall(radius));
    }
    let reach = (radius + center_slack(params)) / 2.5 + 2.0;
    if reach >= MAX_KEY as f64 {
        return Err(PentagridError::RadiusTooLarge(radius));
    }
    Ok(())
}

/// Generate every tile whose center lies within `radius` of the origin.
///
/// Tiles are ordered by `(j, k, p, q)`; the ten family pairs are built in
/// parallel and merged in that order, so the result does not depend on the
/// worker count.
pub fn generate_patch(radius: f64, params: &GridParams) -> Result<TilingPatch, PentagridError> {
    check_radius(radius, params)?;
    let pairs: Vec<(usize, usize)> = family_pairs().collect();
    let parts: Vec<Result<Vec<Tile>, PentagridError>> = pairs
        .par_iter()
        .map(|&(j, k)| tiles_for_pair(j, k, radius, params))
        .collect();
    let mut tiles = Vec::new();
    for part in parts {
        tiles.extend(part.map_err(|e| PentagridError::IrregularParams(Box::new(e)))?);
    }
    Ok(TilingPatch {
        params: *params,
        radius,
        tiles,
    })
}

/// Grow a patch to `new_radius`. Existing tiles keep their positions in the
/// tile list; new tiles are appended in `(j, k, p, q)` order.
pub fn expand_patch(patch: &TilingPatch, new_radius: f64) -> Result<TilingPatch, PentagridError> {
    if !(new_radius > patch.radius) {
        return Err(PentagridError::ShrinkRequest {
            from: patch.radius,
            to: new_radius,
        });
    }
    let fresh = generate_patch(new_radius, &patch.params)?;
    let r2 = patch.radius * patch.radius;
    let mut tiles = patch.tiles.clone();
    tiles.extend(fresh.tiles.into_iter().filter(|t| {
        let c = t.center;
        c[0] * c[0] + c[1] * c[1] > r2
    }));
    Ok(TilingPatch {
        params: patch.params,
        radius: new_radius,
        tiles,
    })
}
