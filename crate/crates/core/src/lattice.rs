//! The Penrose lattice: tiles as vertices, edge-adjacent tiles as
//! neighbors, with the Euclidean metric on tile centers and the
//! shortest-path metric on the graph.
//!
//! Edge weights are `μ_{x,y} ≡ 1`, so `μ(x)` is the degree. Balls follow
//! the strict convention `B(x, r) = {y : d(x, y) < r}` throughout.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Bfs, WalkGraph};
use crate::pentagrid::{GridParams, Point, TileKind, TilingPatch, INTERIOR_MARGIN, MAX_KEY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("edge claimed by three or more tiles (first tile {0})")]
    DuplicateEdgeKey(usize),
    #[error("vertex key coordinate out of packable range in tile {0}")]
    KeyOutOfRange(usize),
    #[error("vertex {0} is out of range")]
    InvalidVertex(usize),
    #[error("ball B({x}, {r}) touches the patch boundary")]
    BoundaryContact { x: usize, r: u32 },
    #[error("ball radius must be at least 1")]
    ZeroRadius,
}

/// Packs `(lower endpoint key, direction)` of a tiling edge into a u64.
fn edge_key(low: &[i32; 5], dir: u8) -> Option<u64> {
    let mut packed = 0u64;
    for &c in low {
        if c.abs() > MAX_KEY {
            return None;
        }
        packed = (packed << 12) | (c + 2048) as u64;
    }
    Some((packed << 3) | dir as u64)
}

#[derive(Debug, Clone)]
pub struct PenroseLattice {
    params: GridParams,
    radius: f64,
    centers: Vec<Point>,
    neighbors: Vec<[u32; 4]>,
    degree: Vec<u8>,
    interior: Vec<bool>,
    line_codes: Vec<[i32; 5]>,
    kinds: Vec<TileKind>,
    edge_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeSummary {
    pub tiles: usize,
    pub edges: usize,
    pub interior_count: usize,
    /// `degree_histogram[d]` = number of tiles of degree `d`.
    pub degree_histogram: [usize; 5],
}

/// Build the dual graph: two tiles are adjacent iff they share an edge, an
/// unordered pair of ℤ⁵ vertex keys.
pub fn build_dual(patch: &TilingPatch) -> Result<PenroseLattice, LatticeError> {
    let n = patch.len();
    let mut edges: Vec<(u64, u32)> = Vec::with_capacity(4 * n);
    for (i, t) in patch.tiles.iter().enumerate() {
        let (j, k) = t.families;
        let keys = t.vkeys();
        for (low, dir) in [(keys[0], j), (keys[3], j), (keys[0], k), (keys[1], k)] {
            let key = edge_key(&low, dir).ok_or(LatticeError::KeyOutOfRange(i))?;
            edges.push((key, i as u32));
        }
    }
    edges.sort_unstable();

    let mut neighbors = vec![[u32::MAX; 4]; n];
    let mut degree = vec![0u8; n];
    let mut edge_count = 0;
    let mut i = 0;
    while i < edges.len() {
        let mut end = i + 1;
        while end < edges.len() && edges[end].0 == edges[i].0 {
            end += 1;
        }
        match end - i {
            1 => {}
            2 => {
                let (a, b) = (edges[i].1, edges[i + 1].1);
                for (x, y) in [(a, b), (b, a)] {
                    let d = &mut degree[x as usize];
                    neighbors[x as usize][*d as usize] = y;
                    *d += 1;
                }
                edge_count += 1;
            }
            _ => return Err(LatticeError::DuplicateEdgeKey(edges[i].1 as usize)),
        }
        i = end;
    }
    drop(edges);

    for (list, &d) in neighbors.iter_mut().zip(&degree) {
        list[..d as usize].sort_unstable();
    }

    let inner = patch.radius - INTERIOR_MARGIN;
    let centers: Vec<Point> = patch.tiles.iter().map(|t| t.center()).collect();
    let interior = centers
        .iter()
        .zip(&degree)
        .map(|(c, &d)| d == 4 && c[0] * c[0] + c[1] * c[1] < inner * inner)
        .collect();

    Ok(PenroseLattice {
        params: patch.params,
        radius: patch.radius,
        centers,
        neighbors,
        degree,
        interior,
        line_codes: patch.tiles.iter().map(|t| t.line_code()).collect(),
        kinds: patch.tiles.iter().map(|t| t.kind).collect(),
        edge_count,
    })
}

impl PenroseLattice {
    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn kind(&self, v: usize) -> TileKind {
        self.kinds[v]
    }

    pub fn summary(&self) -> LatticeSummary {
        let mut degree_histogram = [0; 5];
        for &d in &self.degree {
            degree_histogram[d as usize] += 1;
        }
        LatticeSummary {
            tiles: self.centers.len(),
            edges: self.edge_count,
            interior_count: self.interior.iter().filter(|&&b| b).count(),
            degree_histogram,
        }
    }

    /// Interior tiles whose center lies within `r` of the origin.
    pub fn interior_within(&self, r: f64) -> Vec<usize> {
        (0..self.centers.len())
            .filter(|&v| {
                let c = self.centers[v];
                self.interior[v] && c[0] * c[0] + c[1] * c[1] <= r * r
            })
            .collect()
    }

    /// Write the adjacency as `tile_id,neighbor_id` rows with `tile_id < neighbor_id`.
    pub fn write_adjacency_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "tile_id,neighbor_id")?;
        for v in 0..self.centers.len() {
            for &w in self.neighbors(v) {
                if (v as u32) < w {
                    writeln!(out, "{v},{w}")?;
                }
            }
        }
        Ok(())
    }
}

/// Number of even integers strictly between two doubled coordinates.
fn lines_between(a: i32, b: i32) -> i32 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    (-((-hi).div_euclid(2)) - lo.div_euclid(2) - 1).max(0)
}

impl WalkGraph for PenroseLattice {
    fn vertex_count(&self) -> usize {
        self.centers.len()
    }

    #[inline]
    fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[v][..self.degree[v] as usize]
    }

    #[inline]
    fn is_interior(&self, v: usize) -> bool {
        self.interior[v]
    }

    #[inline]
    fn position(&self, v: usize) -> Point {
        self.centers[v]
    }

    fn clearance(&self, v: usize) -> f64 {
        let c = self.centers[v];
        self.radius - INTERIOR_MARGIN - (c[0] * c[0] + c[1] * c[1]).sqrt()
    }

    /// Tiles are the vertices of the pentagrid line arrangement, and two
    /// tiles are adjacent when they are consecutive on a grid line. Each
    /// step arrives on exactly one new line, and a path must arrive on every
    /// line separating the two intersections plus the target's own lines.
    /// The count is exact for most pairs and short by at most a few steps
    /// otherwise.
    fn distance_lower_bound(&self, a: usize, b: usize) -> u32 {
        if a == b {
            return 0;
        }
        let (ca, cb) = (&self.line_codes[a], &self.line_codes[b]);
        let mut d = 0;
        for m in 0..5 {
            d += lines_between(ca[m], cb[m]);
            if cb[m] % 2 == 0 && cb[m] != ca[m] {
                d += 1;
            }
        }
        d as u32
    }
}

/// Shortest-path distance, or `None` when it exceeds `cap`.
pub fn graph_distance<G: WalkGraph + ?Sized>(
    graph: &G,
    x: usize,
    y: usize,
    cap: u32,
) -> Result<Option<u32>, LatticeError> {
    let n = graph.vertex_count();
    for v in [x, y] {
        if v >= n {
            return Err(LatticeError::InvalidVertex(v));
        }
    }
    let mut bfs = Bfs::new(n);
    bfs.run(graph, x, cap, Some(y));
    Ok(bfs.distance(y))
}

#[derive(Debug, Clone)]
pub struct Ball {
    pub center: usize,
    pub radius: u32,
    /// Members in BFS order; the center comes first.
    pub members: Vec<u32>,
    pub volume: f64,
}

/// `B(x, r) = {y : d(x, y) < r}` and its measure `V(x, r) = Σ μ(y)`.
pub fn ball_volume<G: WalkGraph + ?Sized>(graph: &G, x: usize, r: u32) -> Result<Ball, LatticeError> {
    let mut bfs = Bfs::new(graph.vertex_count());
    ball_with(&mut bfs, graph, x, r)
}

/// As [`ball_volume`], reusing a caller-owned search buffer.
pub fn ball_with<G: WalkGraph + ?Sized>(
    bfs: &mut Bfs,
    graph: &G,
    x: usize,
    r: u32,
) -> Result<Ball, LatticeError> {
    if x >= graph.vertex_count() {
        return Err(LatticeError::InvalidVertex(x));
    }
    if r == 0 {
        return Err(LatticeError::ZeroRadius);
    }
    bfs.run(graph, x, r - 1, None);
    let members = bfs.visited().to_vec();
    if members.iter().any(|&v| !graph.is_interior(v as usize)) {
        return Err(LatticeError::BoundaryContact { x, r });
    }
    let volume = members.iter().map(|&v| graph.mass(v as usize)).sum();
    Ok(Ball {
        center: x,
        radius: r,
        members,
        volume,
    })
}

/// Whether the tiles centered within `r` of the origin induce a connected graph.
pub fn is_connected_within(lat: &PenroseLattice, r: f64) -> bool {
    let inside: Vec<bool> = lat
        .centers
        .iter()
        .map(|c| c[0] * c[0] + c[1] * c[1] < r * r)
        .collect();
    let Some(start) = inside.iter().position(|&b| b) else {
        return true;
    };
    let mut seen = vec![false; inside.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &w in lat.neighbors(v) {
            let w = w as usize;
            if inside[w] && !seen[w] {
                seen[w] = true;
                count += 1;
                stack.push(w);
            }
        }
    }
    count == inside.iter().filter(|&&b| b).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bfs_distances, GuidedSearch};
    use crate::pentagrid::generate_patch;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lattice(r: f64) -> PenroseLattice {
        build_dual(&generate_patch(r, &GridParams::default()).unwrap()).unwrap()
    }

    #[test]
    fn lines_between_counts_even_integers() {
        assert_eq!(lines_between(1, 7), 3); // 2, 4, 6
        assert_eq!(lines_between(2, 6), 1); // 4
        assert_eq!(lines_between(-3, 1), 2); // -2, 0
        assert_eq!(lines_between(4, 4), 0);
        assert_eq!(lines_between(5, 3), 1);
        assert_eq!(lines_between(-4, -3), 0);
    }

    #[test]
    fn interior_degree_and_handshake() {
        let lat = lattice(30.0);
        let s = lat.summary();
        assert_eq!(s.degree_histogram.iter().sum::<usize>(), s.tiles);
        let degree_sum: usize = (0..s.tiles).map(|v| lat.degree(v)).sum();
        assert_eq!(degree_sum, 2 * s.edges);
        for v in 0..s.tiles {
            let c = lat.position(v);
            if (c[0] * c[0] + c[1] * c[1]).sqrt() < lat.radius() - INTERIOR_MARGIN {
                assert_eq!(lat.degree(v), 4, "tile {v} at {c:?}");
            }
            assert!((1..=4).contains(&lat.degree(v)));
            let nb = lat.neighbors(v);
            assert!(nb.windows(2).all(|w| w[0] < w[1]));
            for &w in nb {
                assert_ne!(w as usize, v);
                assert!(lat.neighbors(w as usize).contains(&(v as u32)));
            }
        }
        assert!(is_connected_within(&lat, lat.radius() - INTERIOR_MARGIN));
    }

    #[test]
    fn small_balls() {
        let lat = lattice(20.0);
        let x = lat.nearest_vertex([0.0, 0.0]);
        let b1 = ball_volume(&lat, x, 1).unwrap();
        assert_eq!(b1.members, vec![x as u32]);
        assert_eq!(b1.volume, 4.0);
        let b2 = ball_volume(&lat, x, 2).unwrap();
        assert_eq!(b2.members.len(), 5);
        assert_eq!(b2.volume, 20.0);
        assert!(matches!(
            ball_volume(&lat, x, 40),
            Err(LatticeError::BoundaryContact { .. })
        ));
        assert_eq!(ball_volume(&lat, x, 0).unwrap_err(), LatticeError::ZeroRadius);
    }

    #[test]
    fn distance_basics() {
        let lat = lattice(15.0);
        let x = lat.nearest_vertex([0.0, 0.0]);
        assert_eq!(graph_distance(&lat, x, x, 0).unwrap(), Some(0));
        let y = lat.neighbors(x)[0] as usize;
        assert_eq!(graph_distance(&lat, x, y, 5).unwrap(), Some(1));
        let far = lat.nearest_vertex([10.0, 0.0]);
        assert_eq!(graph_distance(&lat, x, far, 2).unwrap(), None);
        assert!(graph_distance(&lat, x, usize::MAX, 2).is_err());
    }

    #[test]
    fn guided_search_matches_bfs() {
        let lat = lattice(40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pool = lat.interior_within(15.0);
        let mut search = GuidedSearch::new(lat.vertex_count());
        let mut slack = 0;
        for _ in 0..30 {
            let x = pool[rng.random_range(0..pool.len())];
            let dist = bfs_distances(&lat, x, u32::MAX);
            for &y in &pool {
                let lb = lat.distance_lower_bound(x, y);
                assert!(lb <= dist[y]);
                slack = slack.max(dist[y] - lb);
                assert_eq!(search.distance(&lat, x, y), Some(dist[y]), "pair ({x}, {y})");
            }
        }
        assert!(slack > 0, "bound unexpectedly exact on every sampled pair");
    }

    #[test]
    fn lower_bound_is_consistent() {
        let lat = lattice(20.0);
        let pool = lat.interior_within(12.0);
        let target = pool[pool.len() / 2];
        for &v in &pool {
            for &w in lat.neighbors(v) {
                let a = lat.distance_lower_bound(v, target) as i64;
                let b = lat.distance_lower_bound(w as usize, target) as i64;
                assert!((a - b).abs() <= 1);
            }
        }
    }

    #[test]
    fn geometric_distance_bound() {
        // Adjacent centers are at most 1 apart (each center is half an edge
        // vector away from the shared edge's midpoint).
        let lat = lattice(25.0);
        for v in 0..lat.vertex_count() {
            let c = lat.position(v);
            for &w in lat.neighbors(v) {
                let d = lat.position(w as usize);
                assert!(((c[0] - d[0]).powi(2) + (c[1] - d[1]).powi(2)).sqrt() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn adjacency_csv_has_one_row_per_edge() {
        let lat = lattice(8.0);
        let mut buf = Vec::new();
        lat.write_adjacency_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), lat.edge_count() + 1);
    }
}
