//! Volume doubling and the Poincaré constant of balls.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{Bfs, WalkGraph};
use crate::lattice::{ball_with, Ball};

use super::stats::{linear_fit, LinearFit};
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DoublingRow {
    pub x: usize,
    pub r: u32,
    pub v_r: f64,
    pub v_2r: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VolumeDoubling {
    pub rows: Vec<DoublingRow>,
    /// Largest `V(x, 2r) / V(x, r)` over the table.
    pub c_vd: f64,
    pub min_ratio: f64,
}

/// `V(x, 2r) / V(x, r)` for every center and radius.
pub fn volume_doubling<G: WalkGraph + ?Sized>(
    graph: &G,
    xs: &[usize],
    rs: &[u32],
) -> Result<VolumeDoubling, AnalysisError> {
    let per_center: Vec<Result<Vec<DoublingRow>, AnalysisError>> = xs
        .par_iter()
        .map_init(
            || Bfs::new(graph.vertex_count()),
            |bfs, &x| {
                let mut rows = Vec::with_capacity(rs.len());
                for &r in rs {
                    let v_r = ball_with(bfs, graph, x, r)?.volume;
                    let v_2r = ball_with(bfs, graph, x, 2 * r)?.volume;
                    rows.push(DoublingRow {
                        x,
                        r,
                        v_r,
                        v_2r,
                        ratio: v_2r / v_r,
                    });
                }
                Ok(rows)
            },
        )
        .collect();
    let mut rows = Vec::new();
    for r in per_center {
        rows.extend(r?);
    }
    if rows.is_empty() {
        return Err(AnalysisError::EmptySample("volume doubling"));
    }
    let c_vd = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(VolumeDoubling {
        rows,
        c_vd,
        min_ratio,
    })
}

/// Pooled regression of `log V(x, r)` on `log r`.
pub fn volume_growth<G: WalkGraph + ?Sized>(
    graph: &G,
    xs: &[usize],
    rs: &[u32],
) -> Result<LinearFit, AnalysisError> {
    let mut bfs = Bfs::new(graph.vertex_count());
    let mut points = Vec::new();
    for &x in xs {
        for &r in rs {
            let v = ball_with(&mut bfs, graph, x, r)?.volume;
            points.push(((r as f64).ln(), v.ln()));
        }
    }
    Ok(linear_fit(points))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tolerance: 1e-8,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareGap {
    pub x: usize,
    pub r: u32,
    pub ball_size: usize,
    pub lambda2: f64,
    /// Best constant for this ball, `1 / (λ₂ r²)`.
    pub c_pi: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// The ball's edge form against its μ-weighted mass form, symmetrized:
/// `S = M^{-1/2} A M^{-1/2}` with `(Af)(y) = 2 Σ_{z∼y, z∈B} (f(y) − f(z))`.
/// The factor 2 counts each edge once per ordered pair.
pub(crate) struct BallOperator {
    nbrs: Vec<Vec<u32>>,
    inv_sqrt_mass: Vec<f64>,
    /// Unit vector spanning the kernel, `M^{1/2}·1` normalized.
    kernel: Vec<f64>,
}

impl BallOperator {
    pub(crate) fn new<G: WalkGraph + ?Sized>(graph: &G, ball: &Ball) -> Self {
        let mut local = std::collections::HashMap::with_capacity(ball.members.len());
        for (i, &v) in ball.members.iter().enumerate() {
            local.insert(v, i as u32);
        }
        let nbrs = ball
            .members
            .iter()
            .map(|&v| {
                graph
                    .neighbors(v as usize)
                    .iter()
                    .filter_map(|w| local.get(w).copied())
                    .collect()
            })
            .collect();
        let mass: Vec<f64> = ball.members.iter().map(|&v| graph.mass(v as usize)).collect();
        let norm = mass.iter().sum::<f64>().sqrt();
        BallOperator {
            nbrs,
            inv_sqrt_mass: mass.iter().map(|m| 1.0 / m.sqrt()).collect(),
            kernel: mass.iter().map(|m| m.sqrt() / norm).collect(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.nbrs.len()
    }

    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (y, nb) in self.nbrs.iter().enumerate() {
            let fy = x[y] * self.inv_sqrt_mass[y];
            let mut s = 0.0;
            for &z in nb {
                s += fy - x[z as usize] * self.inv_sqrt_mass[z as usize];
            }
            out[y] = 2.0 * s * self.inv_sqrt_mass[y];
        }
    }

    fn deflate(&self, x: &mut [f64]) {
        let c = dot(x, &self.kernel);
        for (xi, ki) in x.iter_mut().zip(&self.kernel) {
            *xi -= c * ki;
        }
    }

    /// Conjugate gradients for `S y = b` on the complement of the kernel.
    fn solve(&self, b: &[f64], y: &mut [f64]) {
        let n = self.len();
        y.fill(0.0);
        let mut r = b.to_vec();
        self.deflate(&mut r);
        let mut p = r.clone();
        let mut q = vec![0.0; n];
        let mut rr = dot(&r, &r);
        let stop = rr * 1e-28;
        for _ in 0..(20 * n).max(100) {
            if rr <= stop {
                break;
            }
            self.apply(&p, &mut q);
            let alpha = rr / dot(&p, &q);
            for i in 0..n {
                y[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            self.deflate(&mut r);
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
        }
        self.deflate(y);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormalize(vs: &mut [Vec<f64>]) {
    for pass in 0..2 {
        for i in 0..vs.len() {
            let (done, rest) = vs.split_at_mut(i);
            let v = &mut rest[0];
            for u in done.iter() {
                let c = dot(v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
            let norm = dot(v, v).sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            } else if pass == 1 {
                v.fill(0.0);
            }
        }
    }
}

/// Smallest nonzero eigenvalue by block inverse iteration with
/// Rayleigh–Ritz. The block absorbs the near-degenerate low modes of
/// round balls.
fn lowest_nonzero<G: WalkGraph + ?Sized>(
    graph: &G,
    ball: &Ball,
    op: &BallOperator,
    opts: &EigenOptions,
) -> Result<(f64, usize, f64), AnalysisError> {
    let n = op.len();
    let block = 4.min(n - 1);
    let c0 = graph.position(ball.center);
    let mut vs: Vec<Vec<f64>> = (0..block)
        .map(|b| {
            ball.members
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let p = graph.position(v as usize);
                    let (x, y) = (p[0] - c0[0], p[1] - c0[1]);
                    let s = 1.0 + 1e-3 * i as f64;
                    [x * s, y * s, x * x - y * y + 0.1 * x, x * y + 0.1 * y][b]
                })
                .collect()
        })
        .collect();
    for v in &mut vs {
        op.deflate(v);
    }
    orthonormalize(&mut vs);

    let mut ys = vec![vec![0.0; n]; block];
    let mut sv = vec![vec![0.0; n]; block];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        for (v, y) in vs.iter().zip(ys.iter_mut()) {
            op.solve(v, y);
        }
        orthonormalize(&mut ys);
        for (y, s) in ys.iter().zip(sv.iter_mut()) {
            op.apply(y, s);
        }
        let h = DMatrix::from_fn(block, block, |i, j| 0.5 * (dot(&ys[i], &sv[j]) + dot(&ys[j], &sv[i])));
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for (slot, &k) in order.iter().enumerate() {
            let v = &mut vs[slot];
            v.fill(0.0);
            for j in 0..block {
                let c = eig.eigenvectors[(j, k)];
                for i in 0..n {
                    v[i] += c * ys[j][i];
                }
            }
        }
        let lambda = eig.eigenvalues[order[0]];
        let mut s = vec![0.0; n];
        op.apply(&vs[0], &mut s);
        residual = s
            .iter()
            .zip(&vs[0])
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= opts.tolerance {
            return Ok((lambda, it, residual));
        }
    }
    Err(AnalysisError::NoConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}

/// Spectral gap `λ₂` of the ball `B(x, r)` and the best Poincaré constant
/// `c = 1/(λ₂ r²)` for it.
pub fn poincare_gap<G: WalkGraph + ?Sized>(
    graph: &G,
    x: usize,
    r: u32,
    opts: &EigenOptions,
) -> Result<PoincareGap, AnalysisError> {
    if r < 4 {
        return Err(AnalysisError::InvalidArgument(format!(
            "Poincaré radius must be at least 4, got {r}"
        )));
    }
    let mut bfs = Bfs::new(graph.vertex_count());
    let ball = ball_with(&mut bfs, graph, x, r)?;
    let op = BallOperator::new(graph, &ball);
    let (lambda2, iterations, residual) = lowest_nonzero(graph, &ball, &op, opts)?;
    Ok(PoincareGap {
        x,
        r,
        ball_size: ball.members.len(),
        lambda2,
        c_pi: 1.0 / (lambda2 * (r as f64).powi(2)),
        iterations,
        residual,
    })
}

/// Poincaré constants over a grid of centers and radii, in input order.
pub fn poincare_table<G: WalkGraph + ?Sized>(
    graph: &G,
    xs: &[usize],
    rs: &[u32],
    opts: &EigenOptions,
) -> Result<Vec<PoincareGap>, AnalysisError> {
    let jobs: Vec<(usize, u32)> = xs.iter().flat_map(|&x| rs.iter().map(move |&r| (x, r))).collect();
    jobs.par_iter()
        .map(|&(x, r)| poincare_gap(graph, x, r, opts))
        .collect()
}

/// Largest over smallest of a set of positive constants.
pub fn band_factor(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi / lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ball_volume, build_dual, PenroseLattice};
    use crate::pentagrid::{generate_patch, GridParams};
    use crate::square::SquareLattice;

    fn lattice(r: f64) -> PenroseLattice {
        build_dual(&generate_patch(r, &GridParams::default()).unwrap()).unwrap()
    }

    /// Dense oracle: second-smallest eigenvalue of the symmetrized form.
    fn dense_gap<G: WalkGraph>(graph: &G, x: usize, r: u32) -> f64 {
        let ball = ball_volume(graph, x, r).unwrap();
        let op = BallOperator::new(graph, &ball);
        let n = op.len();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            op.apply(&e, &mut col);
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-10);
        ev[1]
    }

    #[test]
    fn doubling_at_radius_one() {
        let lat = lattice(30.0);
        let x = lat.nearest_vertex([0.0, 0.0]);
        let t = volume_doubling(&lat, &[x], &[1]).unwrap();
        assert_eq!(t.rows[0].v_r, 4.0);
        assert_eq!(t.rows[0].v_2r, 20.0);
        assert_eq!(t.c_vd, 5.0);
    }

    #[test]
    fn doubling_needs_room() {
        let lat = lattice(15.0);
        let x = lat.nearest_vertex([0.0, 0.0]);
        assert!(matches!(
            volume_doubling(&lat, &[x], &[16]),
            Err(AnalysisError::Lattice(_))
        ));
    }

    #[test]
    fn gap_matches_dense_solver() {
        let lat = lattice(30.0);
        let x = lat.nearest_vertex([0.3, -0.7]);
        for r in [4, 6, 9] {
            let g = poincare_gap(&lat, x, r, &EigenOptions::default()).unwrap();
            let d = dense_gap(&lat, x, r);
            assert!((g.lambda2 - d).abs() <= 1e-8 * d.max(1.0), "r={r}: {} vs {d}", g.lambda2);
        }
        let sq = SquareLattice::new(20);
        for r in [4, 7] {
            let g = poincare_gap(&sq, sq.origin(), r, &EigenOptions::default()).unwrap();
            let d = dense_gap(&sq, sq.origin(), r);
            assert!((g.lambda2 - d).abs() <= 1e-8 * d.max(1.0));
        }
    }

    #[test]
    fn rayleigh_quotient_bounds_the_gap() {
        // Any function orthogonal to constants has quotient ≥ λ₂.
        let lat = lattice(30.0);
        let x = lat.nearest_vertex([0.0, 0.0]);
        let g = poincare_gap(&lat, x, 8, &EigenOptions::default()).unwrap();
        let ball = ball_volume(&lat, x, 8).unwrap();
        let op = BallOperator::new(&lat, &ball);
        let mut f: Vec<f64> = ball
            .members
            .iter()
            .map(|&v| lat.position(v as usize)[0].sin())
            .collect();
        op.deflate(&mut f);
        let mut s = vec![0.0; f.len()];
        op.apply(&f, &mut s);
        assert!(dot(&f, &s) / dot(&f, &f) >= g.lambda2 * (1.0 - 1e-9));
    }

    #[test]
    fn small_radius_rejected() {
        let sq = SquareLattice::new(10);
        assert!(matches!(
            poincare_gap(&sq, sq.origin(), 3, &EigenOptions::default()),
            Err(AnalysisError::InvalidArgument(_))
        ));
    }
}
