//! The rough isometry between the Penrose lattice and εℤ²: each tile
//! center goes to the ε-square containing it.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Bfs, WalkGraph};
use crate::lattice::PenroseLattice;
use crate::pentagrid::Point;
use crate::walk::sample_rng;

/// Longest rhombus diagonal for unit edges, `2 cos 18°`.
pub fn max_diagonal() -> f64 {
    2.0 * (PI / 10.0).cos()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsometryError {
    #[error("sample too small: {got} pairs, need at least {need}")]
    SampleTooSmall { got: usize, need: usize },
    #[error("violation of {bound} for tiles {x} and {y}: d_P = {d_p}, d_Z = {d_z}")]
    ViolationFound {
        bound: &'static str,
        x: usize,
        y: usize,
        d_p: u32,
        d_z: u64,
    },
}

/// Minimum pair count accepted by the sampled checks.
pub const MIN_PAIRS: usize = 100;

/// `(m, ε)`: the thin rhombus width `sin 36°` and `ε = √2·m/4`.
pub fn epsilon_constant() -> (f64, f64) {
    let m = (PI / 5.0).sin();
    (m, 2f64.sqrt() * m / 4.0)
}

/// Index of the half-open ε-square `[kε, (k+1)ε)²` containing `p`, and
/// whether `p` sits exactly on a square boundary.
pub fn psi_square(p: Point, eps: f64) -> ((i64, i64), bool) {
    let (u, v) = (p[0] / eps, p[1] / eps);
    let (a, b) = (u.floor(), v.floor());
    ((a as i64, b as i64), u == a || v == b)
}

#[derive(Debug, Clone)]
pub struct PsiMap {
    pub eps: f64,
    pub squares: Vec<(i64, i64)>,
    /// Tiles whose center lies on a square boundary (resolved half-open).
    pub on_boundary: Vec<usize>,
    /// Pairs of tiles mapped to the same square.
    pub collisions: Vec<(usize, usize)>,
}

impl PsiMap {
    pub fn injective(&self) -> bool {
        self.collisions.is_empty()
    }
}

pub fn psi_map<G: WalkGraph + ?Sized>(graph: &G, eps: f64) -> PsiMap {
    let n = graph.vertex_count();
    let mut squares = Vec::with_capacity(n);
    let mut on_boundary = Vec::new();
    let mut owner: HashMap<(i64, i64), usize> = HashMap::with_capacity(n);
    let mut collisions = Vec::new();
    for v in 0..n {
        let (sq, edge) = psi_square(graph.position(v), eps);
        if edge {
            on_boundary.push(v);
        }
        if let Some(&u) = owner.get(&sq) {
            collisions.push((u, v));
        } else {
            owner.insert(sq, v);
        }
        squares.push(sq);
    }
    PsiMap {
        eps,
        squares,
        on_boundary,
        collisions,
    }
}

/// ℓ¹ distance between square indices.
pub fn lattice_distance(a: (i64, i64), b: (i64, i64)) -> u64 {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// Number of consecutive ε-intervals needed to cover the longest
/// diagonal laid along an axis, `⌈2cos18°/ε⌉`. This is `2L`.
pub fn diagonal_cover(eps: f64) -> u32 {
    (max_diagonal() / eps).ceil() as u32
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryConfig {
    pub pairs: usize,
    pub seed: u64,
    /// Margin from the patch edge for the fullness scan.
    pub fullness_margin: f64,
}

impl Default for IsometryConfig {
    fn default() -> Self {
        IsometryConfig {
            pairs: 10_000,
            seed: 1,
            fullness_margin: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSample {
    pub x: usize,
    pub y: usize,
    pub d_p: u32,
    pub d_z: u64,
    pub euclid: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub epsilon: f64,
    pub m: f64,
    pub two_l: u32,
    pub l: u32,
    pub injective: bool,
    pub collisions: Vec<(usize, usize)>,
    pub centers_on_square_boundary: usize,
    /// Least-squares fit `d_Z ≈ a·d_P + b` over the sample.
    pub r1_fit_a: f64,
    pub r1_fit_b: f64,
    /// Largest observed `d_Z/d_P` and `d_P/d_Z`.
    pub max_dz_over_dp: f64,
    pub max_dp_over_dz: f64,
    /// Largest `d_Z` between images of adjacent tiles.
    pub max_edge_dz: u64,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// Fullness: every ε-square in the scanned disk is within `M` of an image.
    pub r2_m: u64,
    /// Measure comparison constant; μ = 4 on interior tiles on both sides.
    pub r3_c: f64,
    pub sample_size: usize,
    pub pass: bool,
    #[serde(skip)]
    pub samples: Vec<PairSample>,
}

impl IsometryReport {
    /// The first offending pair, if any inequality failed.
    pub fn first_violation(&self) -> Result<(), IsometryError> {
        for s in &self.samples {
            if (s.d_p as u64) > s.d_z {
                return Err(IsometryError::ViolationFound {
                    bound: "d_P <= d_Z",
                    x: s.x,
                    y: s.y,
                    d_p: s.d_p,
                    d_z: s.d_z,
                });
            }
            if s.d_z > self.two_l as u64 * s.d_p as u64 {
                return Err(IsometryError::ViolationFound {
                    bound: "d_Z <= 2L d_P",
                    x: s.x,
                    y: s.y,
                    d_p: s.d_p,
                    d_z: s.d_z,
                });
            }
        }
        Ok(())
    }
}

/// Sample interior pairs as `sources × targets` with one full search per
/// source. Each source has its own random stream.
pub fn sample_pairs<G: WalkGraph + ?Sized>(
    graph: &G,
    squares: Option<&[(i64, i64)]>,
    pairs: usize,
    seed: u64,
) -> Vec<PairSample> {
    let interior = graph.interior_vertices();
    if interior.len() < 2 || pairs == 0 {
        return Vec::new();
    }
    let sources = (pairs as f64).sqrt().ceil() as usize;
    let per = pairs.div_ceil(sources);
    let mut out: Vec<PairSample> = (0..sources)
        .into_par_iter()
        .map_init(
            || Bfs::new(graph.vertex_count()),
            |bfs, s| {
                let mut rng = sample_rng(seed, s as u64);
                let x = interior[rng.random_range(0..interior.len())];
                bfs.run(graph, x, u32::MAX - 1, None);
                let px = graph.position(x);
                let mut local = Vec::with_capacity(per);
                while local.len() < per {
                    let y = interior[rng.random_range(0..interior.len())];
                    if y == x {
                        continue;
                    }
                    let Some(d_p) = bfs.distance(y) else { continue };
                    let py = graph.position(y);
                    local.push(PairSample {
                        x,
                        y,
                        d_p,
                        d_z: squares.map_or(0, |sq| lattice_distance(sq[x], sq[y])),
                        euclid: (px[0] - py[0]).hypot(px[1] - py[1]),
                    });
                }
                local
            },
        )
        .flatten()
        .collect();
    out.truncate(pairs);
    out
}

/// Largest ℓ¹ distance from an ε-square whose center lies within `radius`
/// of the origin to the nearest image square.
pub fn fullness_constant(images: &[(i64, i64)], eps: f64, radius: f64) -> u64 {
    if images.is_empty() || radius <= 0.0 {
        return 0;
    }
    let lo = (-radius / eps).floor() as i64 - 2;
    let hi = (radius / eps).ceil() as i64 + 2;
    let side = (hi - lo + 1) as usize;
    let idx = |a: i64, b: i64| ((a - lo) as usize) * side + (b - lo) as usize;
    let mut dist = vec![u32::MAX; side * side];
    let mut queue = VecDeque::new();
    for &(a, b) in images {
        if (lo..=hi).contains(&a) && (lo..=hi).contains(&b) && dist[idx(a, b)] == u32::MAX {
            dist[idx(a, b)] = 0;
            queue.push_back((a, b));
        }
    }
    while let Some((a, b)) = queue.pop_front() {
        let d = dist[idx(a, b)];
        for (na, nb) in [(a - 1, b), (a + 1, b), (a, b - 1), (a, b + 1)] {
            if (lo..=hi).contains(&na) && (lo..=hi).contains(&nb) && dist[idx(na, nb)] == u32::MAX {
                dist[idx(na, nb)] = d + 1;
                queue.push_back((na, nb));
            }
        }
    }
    let mut worst = 0u64;
    for a in lo..=hi {
        for b in lo..=hi {
            let (cx, cy) = ((a as f64 + 0.5) * eps, (b as f64 + 0.5) * eps);
            if cx.hypot(cy) <= radius {
                worst = worst.max(dist[idx(a, b)] as u64);
            }
        }
    }
    worst
}

pub fn rough_isometry_check(
    lat: &PenroseLattice,
    eps: f64,
    config: &IsometryConfig,
) -> Result<IsometryReport, IsometryError> {
    if config.pairs < MIN_PAIRS {
        return Err(IsometryError::SampleTooSmall {
            got: config.pairs,
            need: MIN_PAIRS,
        });
    }
    let (m, _) = epsilon_constant();
    let psi = psi_map(lat, eps);
    let two_l = diagonal_cover(eps);
    let samples = sample_pairs(lat, Some(&psi.squares), config.pairs, config.seed);
    if samples.len() < MIN_PAIRS {
        return Err(IsometryError::SampleTooSmall {
            got: samples.len(),
            need: MIN_PAIRS,
        });
    }

    let mut lower = 0;
    let mut upper = 0;
    let (mut up_ratio, mut down_ratio) = (0.0f64, 0.0f64);
    for s in &samples {
        if (s.d_p as u64) > s.d_z {
            lower += 1;
        }
        if s.d_z > two_l as u64 * s.d_p as u64 {
            upper += 1;
        }
        up_ratio = up_ratio.max(s.d_z as f64 / s.d_p as f64);
        if s.d_z > 0 {
            down_ratio = down_ratio.max(s.d_p as f64 / s.d_z as f64);
        } else {
            down_ratio = f64::INFINITY;
        }
    }
    let (a, b) = least_squares(samples.iter().map(|s| (s.d_p as f64, s.d_z as f64)));

    let mut max_edge_dz = 0;
    for v in 0..lat.vertex_count() {
        for &w in lat.neighbors(v) {
            max_edge_dz = max_edge_dz.max(lattice_distance(psi.squares[v], psi.squares[w as usize]));
        }
    }

    let r2_m = fullness_constant(&psi.squares, eps, lat.radius() - config.fullness_margin);
    let injective = psi.injective();
    Ok(IsometryReport {
        epsilon: eps,
        m,
        two_l,
        l: two_l.div_ceil(2),
        injective,
        collisions: psi.collisions,
        centers_on_square_boundary: psi.on_boundary.len(),
        r1_fit_a: a,
        r1_fit_b: b,
        max_dz_over_dp: up_ratio,
        max_dp_over_dz: down_ratio,
        max_edge_dz,
        lower_violations: lower,
        upper_violations: upper,
        r2_m,
        r3_c: 1.0,
        sample_size: samples.len(),
        pass: injective && lower == 0 && upper == 0,
        samples,
    })
}

fn least_squares(points: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in points {
        n += 1.0;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}

#[derive(Debug, Clone, Serialize)]
pub struct BiLipschitzStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    /// `(q, value)` for q in 1%, 10%, 50%, 90%, 99%.
    pub quantiles: Vec<(f64, f64)>,
    pub spread: f64,
    pub max_spread: f64,
    pub pass: bool,
}

/// Distribution of `d_P(x, y) / |c_x − c_y|` over pairs at least
/// `min_euclid` apart.
pub fn bilipschitz_stats(
    samples: &[PairSample],
    min_euclid: f64,
    max_spread: f64,
) -> Result<BiLipschitzStats, IsometryError> {
    let mut ratios: Vec<f64> = samples
        .iter()
        .filter(|s| s.x != s.y && s.euclid >= min_euclid)
        .map(|s| s.d_p as f64 / s.euclid)
        .collect();
    if ratios.len() < MIN_PAIRS {
        return Err(IsometryError::SampleTooSmall {
            got: ratios.len(),
            need: MIN_PAIRS,
        });
    }
    ratios.sort_by(f64::total_cmp);
    let q = |p: f64| ratios[((ratios.len() - 1) as f64 * p).round() as usize];
    let (min, max) = (ratios[0], ratios[ratios.len() - 1]);
    let spread = max / min;
    Ok(BiLipschitzStats {
        count: ratios.len(),
        min,
        max,
        quantiles: [0.01, 0.1, 0.5, 0.9, 0.99].iter().map(|&p| (p, q(p))).collect(),
        spread,
        max_spread,
        pass: spread <= max_spread,
    })
}

/// `x,y,d_p,d_z,euclid` per sampled pair.
pub fn write_pairs_csv<W: Write>(samples: &[PairSample], mut out: W) -> io::Result<()> {
    writeln!(out, "x,y,d_p,d_z,euclid")?;
    for s in samples {
        writeln!(out, "{},{},{},{},{}", s.x, s.y, s.d_p, s.d_z, s.euclid)?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_dual;
    use crate::pentagrid::{generate_patch, GridParams};

    #[test]
    fn constants() {
        let (m, eps) = epsilon_constant();
        assert!((m - 0.587785).abs() < 1e-6);
        assert!((eps - 0.207813).abs() < 1e-6);
        assert!((eps - 0.207818).abs() < 1e-5);
        assert!((eps * 2f64.sqrt() - m / 2.0).abs() < 1e-14);
        assert_eq!(diagonal_cover(eps), 10);
    }

    #[test]
    fn thin_width_from_vertices() {
        // Distance between the opposite sides of a thin rhombus, measured
        // from the vertex coordinates of an actual tile.
        let patch = generate_patch(8.0, &GridParams::default()).unwrap();
        let thin = patch
            .tiles
            .iter()
            .find(|t| t.kind == crate::pentagrid::TileKind::Thin)
            .unwrap();
        let v = thin.vertices();
        let (a, b, p) = (v[0], v[1], v[3]);
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let width = ((p[0] - a[0]) * ey - (p[1] - a[1]) * ex).abs() / ex.hypot(ey);
        assert!((width - epsilon_constant().0).abs() < 1e-12);
    }

    #[test]
    fn psi_examples() {
        let (_, eps) = epsilon_constant();
        assert_eq!(psi_square([0.5, 0.5], eps), ((2, 2), false));
        assert_eq!(psi_square([-0.1, 0.0], eps), ((-1, 0), true));
        let c = [3.17, -8.2];
        let ((a, b), _) = psi_square(c, eps);
        let ((a2, b2), _) = psi_square([c[0] + eps, c[1]], eps);
        assert_eq!((a2 - a, b2 - b), (1, 0));
    }

    #[test]
    fn epsilon_square_inside_tile() {
        let patch = generate_patch(60.0, &GridParams::default()).unwrap();
        let (_, eps) = epsilon_constant();
        for t in &patch.tiles {
            let ((a, b), _) = psi_square(t.center(), eps);
            for (da, db) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let corner = [(a + da) as f64 * eps, (b + db) as f64 * eps];
                assert!(t.contains(corner, 1e-12));
            }
        }
    }

    #[test]
    fn cover_count_oracle() {
        // Lay the diagonal along the x axis from several offsets and count
        // the distinct ε-intervals it meets.
        let (_, eps) = epsilon_constant();
        let d = max_diagonal();
        let mut best = u32::MAX;
        for k in 0..50 {
            let x0 = k as f64 * eps / 50.0;
            let first = (x0 / eps).floor() as i64;
            let last = ((x0 + d) / eps).ceil() as i64 - 1;
            best = best.min((last - first + 1) as u32);
        }
        assert_eq!(best, diagonal_cover(eps));
    }

    #[test]
    fn rough_isometry_small_patch() {
        let lat = build_dual(&generate_patch(50.0, &GridParams::default()).unwrap()).unwrap();
        let (_, eps) = epsilon_constant();
        let config = IsometryConfig {
            pairs: 900,
            ..Default::default()
        };
        let report = rough_isometry_check(&lat, eps, &config).unwrap();
        assert!(report.injective);
        assert_eq!(report.lower_violations, 0);
        assert_eq!(report.upper_violations, 0);
        assert!(report.first_violation().is_ok());
        assert!(report.max_edge_dz >= 1 && report.max_edge_dz <= report.two_l as u64);
        assert!(report.r2_m >= 1 && report.r2_m < 20);
        assert_eq!(report.sample_size, 900);

        let bl = bilipschitz_stats(&report.samples, 2.0, 10.0).unwrap();
        assert!(bl.min >= 1.0 / max_diagonal());
        assert!(bl.pass);

        let err = rough_isometry_check(&lat, eps, &IsometryConfig { pairs: 50, ..config }).unwrap_err();
        assert!(matches!(err, IsometryError::SampleTooSmall { .. }));
    }

    #[test]
    fn fullness_on_a_full_grid() {
        let images: Vec<(i64, i64)> = (-60..60)
            .flat_map(|a| (-60..60).map(move |b| (a, b)))
            .filter(|&(a, b)| (a + b) % 3 == 0)
            .collect();
        assert_eq!(fullness_constant(&images, 0.1, 5.0), 1);
    }
}
