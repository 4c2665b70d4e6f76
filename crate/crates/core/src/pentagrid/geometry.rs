//! Whole-patch geometric self-checks.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::{key_position, Point, TileKind, TilingPatch, VertexKey, STAR};

const SHAPE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct Coverage {
    pub samples: usize,
    pub covered: usize,
    pub overlapped: usize,
}

impl Coverage {
    pub fn covered_fraction(&self) -> f64 {
        self.covered as f64 / self.samples.max(1) as f64
    }

    pub fn overlap_fraction(&self) -> f64 {
        self.overlapped as f64 / self.samples.max(1) as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub tiles: usize,
    pub thick: usize,
    pub thin: usize,
    /// Largest deviation of any edge length from 1.
    pub max_edge_error: f64,
    /// Largest deviation of any tile area from its kind's area.
    pub max_area_error: f64,
    /// Edges whose direction is not one of ±ζᵏ.
    pub stray_directions: usize,
    pub interior_edges: usize,
    /// Interior edges not shared by exactly two tiles.
    pub bad_interior_edges: usize,
    /// Sum of tile areas over tiles centered in the interior disk, divided
    /// by the area of that disk.
    pub area_ratio: f64,
    pub coverage: Coverage,
    /// Smallest distance between vertices with distinct keys.
    pub min_vertex_separation: f64,
}

impl GeometryReport {
    pub fn passes(&self) -> bool {
        self.max_edge_error <= SHAPE_TOLERANCE
            && self.max_area_error <= SHAPE_TOLERANCE
            && self.stray_directions == 0
            && self.bad_interior_edges == 0
            && self.coverage.covered_fraction() >= 0.995
            && self.min_vertex_separation > 1e-6
    }
}

fn norm2(p: Point) -> f64 {
    p[0] * p[0] + p[1] * p[1]
}

fn is_star_direction(d: Point) -> bool {
    STAR.iter().any(|s| {
        ((d[0] - s[0]).abs() < SHAPE_TOLERANCE && (d[1] - s[1]).abs() < SHAPE_TOLERANCE)
            || ((d[0] + s[0]).abs() < SHAPE_TOLERANCE && (d[1] + s[1]).abs() < SHAPE_TOLERANCE)
    })
}

/// Run the geometric invariants over a patch. `spacing` sets the sample
/// grid used for the coverage estimate.
pub fn check_patch(patch: &TilingPatch, spacing: f64) -> GeometryReport {
    let inner = patch.interior_radius();
    let inner2 = inner * inner;

    let mut max_edge_error = 0.0f64;
    let mut max_area_error = 0.0f64;
    let mut stray_directions = 0;
    let mut area_sum = 0.0;
    let mut edges: HashMap<(VertexKey, u8), u8> = HashMap::new();

    for t in &patch.tiles {
        let v = t.vertices();
        for i in 0..4 {
            let (a, b) = (v[i], v[(i + 1) % 4]);
            let d = [b[0] - a[0], b[1] - a[1]];
            max_edge_error = max_edge_error.max((norm2(d).sqrt() - 1.0).abs());
            if !is_star_direction(d) {
                stray_directions += 1;
            }
        }
        let area = t.signed_area().abs();
        max_area_error = max_area_error.max((area - t.kind.area()).abs());
        if norm2(t.center()) < inner2 {
            area_sum += area;
        }

        let (j, k) = (t.families.0, t.families.1);
        let keys = t.vkeys();
        for (low, dir) in [(keys[0], j), (keys[3], j), (keys[0], k), (keys[1], k)] {
            *edges.entry((low, dir)).or_default() += 1;
        }
    }

    let mut interior_edges = 0;
    let mut bad_interior_edges = 0;
    for (&(low, dir), &count) in &edges {
        let mut high = low;
        high[dir as usize] += 1;
        if norm2(key_position(&low)) < inner2 && norm2(key_position(&high)) < inner2 {
            interior_edges += 1;
            if count != 2 {
                bad_interior_edges += 1;
            }
        }
    }

    GeometryReport {
        tiles: patch.len(),
        thick: patch.count_kind(TileKind::Thick),
        thin: patch.count_kind(TileKind::Thin),
        max_edge_error,
        max_area_error,
        stray_directions,
        interior_edges,
        bad_interior_edges,
        area_ratio: area_sum / (std::f64::consts::PI * inner2),
        coverage: coverage(patch, inner, spacing),
        min_vertex_separation: min_vertex_separation(patch),
    }
}

fn cell_of(p: Point, size: f64) -> (i64, i64) {
    ((p[0] / size).floor() as i64, (p[1] / size).floor() as i64)
}

/// Sample a square grid inside the disk of radius `radius` and count how
/// many points are covered by at least one tile, and by two or more.
fn coverage(patch: &TilingPatch, radius: f64, spacing: f64) -> Coverage {
    // Tile centers are within 1 of every point of the tile.
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, t) in patch.tiles.iter().enumerate() {
        buckets.entry(cell_of(t.center(), 1.0)).or_default().push(i);
    }
    // Irrational shift keeps samples off tile edges.
    let shift = [0.123_456_789 * spacing, 0.314_159_265 * spacing];
    let steps = (radius / spacing).ceil() as i64;
    let mut cov = Coverage {
        samples: 0,
        covered: 0,
        overlapped: 0,
    };
    for a in -steps..=steps {
        for b in -steps..=steps {
            let pt = [a as f64 * spacing + shift[0], b as f64 * spacing + shift[1]];
            if norm2(pt) >= radius * radius {
                continue;
            }
            cov.samples += 1;
            let (cx, cy) = cell_of(pt, 1.0);
            let mut hits = 0;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = buckets.get(&(cx + dx, cy + dy)) {
                        hits += list
                            .iter()
                            .filter(|&&i| patch.tiles[i].contains(pt, -1e-12))
                            .count();
                    }
                }
            }
            if hits >= 1 {
                cov.covered += 1;
            }
            if hits >= 2 {
                cov.overlapped += 1;
            }
        }
    }
    cov
}

fn min_vertex_separation(patch: &TilingPatch) -> f64 {
    let keys: HashSet<VertexKey> = patch.tiles.iter().flat_map(|t| t.vkeys()).collect();
    let size = 0.5;
    let mut buckets: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
    for key in &keys {
        let p = key_position(key);
        buckets.entry(cell_of(p, size)).or_default().push(p);
    }
    let mut best = f64::INFINITY;
    for (&(cx, cy), points) in &buckets {
        for dx in -1..=1 {
            for dy in -1..=1 {
                let Some(other) = buckets.get(&(cx + dx, cy + dy)) else {
                    continue;
                };
                for p in points {
                    for q in other {
                        if !std::ptr::eq(p, q) {
                            best = best.min(norm2([p[0] - q[0], p[1] - q[1]]).sqrt());
                        }
                    }
                }
            }
        }
    }
    best
}
