//! Diffusive statistics of walk ensembles: mean square displacement,
//! drift, covariance and Gaussianity.

use std::collections::HashSet;

use serde::Serialize;

use crate::graph::{WalkGraph, UNREACHED};
use crate::walk::DisplacementEnsemble;

use super::stats::{correlation, estimate, ks_normal, ks_two_sample, sym2_eigenvalues, Estimate};
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MsdRow {
    pub n: usize,
    /// `E|X_n − X_0|² / n` over tile centers.
    pub euclid: Estimate,
    /// `E d²(X_0, X_n) / n`, when distances were recorded.
    pub graph: Option<Estimate>,
}

/// Surviving (non-escaped) samples at a checkpoint.
fn alive(ens: &DisplacementEnsemble, c: usize) -> impl Iterator<Item = usize> + '_ {
    (0..ens.samples()).filter(move |&i| !ens.dx[c][i].is_nan())
}

pub fn msd_curve(ens: &DisplacementEnsemble) -> Vec<MsdRow> {
    ens.checkpoints
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            let nf = n as f64;
            let euclid = estimate(alive(ens, c).map(|i| (ens.dx[c][i].powi(2) + ens.dy[c][i].powi(2)) / nf));
            let graph = ens.has_distances().then(|| {
                estimate(
                    alive(ens, c)
                        .filter(|&i| ens.dist[c][i] != UNREACHED)
                        .map(|i| (ens.dist[c][i] as f64).powi(2) / nf),
                )
            });
            MsdRow { n, euclid, graph }
        })
        .collect()
}

/// Exact conditional drift `φ(x) = E(X_1 − X_0 | X_0 = x)`.
pub fn site_drift<G: WalkGraph + ?Sized>(graph: &G, x: usize) -> [f64; 2] {
    let c = graph.position(x);
    let nb = graph.neighbors(x);
    let mut phi = [0.0; 2];
    for &y in nb {
        let p = graph.position(y as usize);
        phi[0] += p[0] - c[0];
        phi[1] += p[1] - c[1];
    }
    let k = nb.len() as f64;
    [phi[0] / k, phi[1] / k]
}

/// Exact one-step covariance at `x` about its drift.
pub fn site_diffusion<G: WalkGraph + ?Sized>(graph: &G, x: usize) -> [[f64; 2]; 2] {
    let c = graph.position(x);
    let phi = site_drift(graph, x);
    let nb = graph.neighbors(x);
    let mut d = [[0.0; 2]; 2];
    for &y in nb {
        let p = graph.position(y as usize);
        let v = [p[0] - c[0] - phi[0], p[1] - c[1] - phi[1]];
        for a in 0..2 {
            for b in 0..2 {
                d[a][b] += v[a] * v[b];
            }
        }
    }
    let k = nb.len() as f64;
    d.map(|row| row.map(|v| v / k))
}

#[derive(Debug, Clone, Serialize)]
pub struct Covariance {
    pub n: usize,
    pub samples: usize,
    /// `Cov(X_n)/n`.
    pub matrix: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
    /// Smallest over largest eigenvalue.
    pub isotropy_ratio: f64,
    pub correlation: f64,
    /// Standard error of the smallest eigenvalue from batch means.
    pub min_eigenvalue_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftCovariance {
    pub distinct_starts: usize,
    pub drift_x: Estimate,
    pub drift_y: Estimate,
    /// Largest `|φ(x)|` over the starts.
    pub max_site_drift: f64,
    /// μ-average of the exact one-step covariance.
    pub one_step: [[f64; 2]; 2],
    pub one_step_eigenvalues: [f64; 2],
    pub one_step_isotropy: f64,
    pub limit: Covariance,
}

/// Number of batches behind eigenvalue standard errors.
const BATCHES: usize = 20;

fn covariance_of(xs: &[f64], ys: &[f64], n: usize) -> [[f64; 2]; 2] {
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let s = (k - 1.0) * n as f64;
    [[sxx / s, sxy / s], [sxy / s, syy / s]]
}

pub fn limit_covariance(ens: &DisplacementEnsemble, n: usize) -> Result<Covariance, AnalysisError> {
    let c = ens
        .checkpoint_index(n)
        .ok_or(AnalysisError::MissingCheckpoint(n))?;
    let idx: Vec<usize> = alive(ens, c).collect();
    if idx.len() < 2 * BATCHES {
        return Err(AnalysisError::InsufficientSamples {
            got: idx.len(),
            need: 2 * BATCHES,
        });
    }
    let xs: Vec<f64> = idx.iter().map(|&i| ens.dx[c][i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| ens.dy[c][i]).collect();
    let matrix = covariance_of(&xs, &ys, n);
    let eigenvalues = sym2_eigenvalues(matrix);
    let size = xs.len() / BATCHES;
    let batch_min = estimate((0..BATCHES).map(|b| {
        let r = b * size..(b + 1) * size;
        sym2_eigenvalues(covariance_of(&xs[r.clone()], &ys[r], n))[0]
    }));
    Ok(Covariance {
        n,
        samples: xs.len(),
        matrix,
        eigenvalues,
        isotropy_ratio: eigenvalues[0] / eigenvalues[1],
        correlation: matrix[0][1] / (matrix[0][0] * matrix[1][1]).sqrt(),
        min_eigenvalue_se: batch_min.se / (BATCHES as f64).sqrt(),
    })
}

/// Drift and covariance under the start distribution of the ensemble.
pub fn drift_and_covariance<G: WalkGraph + ?Sized>(
    ens: &DisplacementEnsemble,
    graph: &G,
    n: usize,
    min_starts: usize,
) -> Result<DriftCovariance, AnalysisError> {
    let distinct: HashSet<u32> = ens.starts.iter().copied().collect();
    if distinct.len() < min_starts {
        return Err(AnalysisError::InsufficientStarts {
            got: distinct.len(),
            need: min_starts,
        });
    }
    let phis: Vec<[f64; 2]> = ens.starts.iter().map(|&s| site_drift(graph, s as usize)).collect();
    let max_site_drift = phis.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let mut one_step = [[0.0; 2]; 2];
    for &s in &ens.starts {
        let d = site_diffusion(graph, s as usize);
        for a in 0..2 {
            for b in 0..2 {
                one_step[a][b] += d[a][b];
            }
        }
    }
    let k = ens.samples() as f64;
    let one_step = one_step.map(|row| row.map(|v| v / k));
    let ev = sym2_eigenvalues(one_step);
    Ok(DriftCovariance {
        distinct_starts: distinct.len(),
        drift_x: estimate(phis.iter().map(|p| p[0])),
        drift_y: estimate(phis.iter().map(|p| p[1])),
        max_site_drift,
        one_step,
        one_step_eigenvalues: ev,
        one_step_isotropy: ev[0] / ev[1],
        limit: limit_covariance(ens, n)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsRow {
    pub n: usize,
    pub samples: usize,
    /// Per-axis variance rate `E X²/n` used for the reference normal.
    pub sigma2: [f64; 2],
    pub ks: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementCorrelation {
    /// Blocks `(0, mid]` and `(mid, end]`.
    pub mid: usize,
    pub end: usize,
    pub samples: usize,
    pub rho: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct GaussianityReport {
    pub ks: Vec<KsRow>,
    pub increments: Vec<IncrementCorrelation>,
    pub collapse_ns: Vec<usize>,
    /// Largest pairwise sup-distance between the laws of `X_n/√n`, per axis.
    pub collapse: [f64; 2],
}

fn scaled(ens: &DisplacementEnsemble, c: usize) -> [Vec<f64>; 2] {
    let s = (ens.checkpoints[c] as f64).sqrt();
    [
        alive(ens, c).map(|i| ens.dx[c][i] / s).collect(),
        alive(ens, c).map(|i| ens.dy[c][i] / s).collect(),
    ]
}

pub fn gaussianity_report(
    ens: &DisplacementEnsemble,
    collapse_ns: &[usize],
    min_samples: usize,
) -> Result<GaussianityReport, AnalysisError> {
    let mut ks = Vec::new();
    for c in 0..ens.checkpoints.len() {
        let [xs, ys] = scaled(ens, c);
        if xs.len() < min_samples {
            return Err(AnalysisError::InsufficientSamples {
                got: xs.len(),
                need: min_samples,
            });
        }
        let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let sigma2 = [var(&xs), var(&ys)];
        ks.push(KsRow {
            n: ens.checkpoints[c],
            samples: xs.len(),
            sigma2,
            ks: [ks_normal(&xs, sigma2[0]), ks_normal(&ys, sigma2[1])],
        });
    }

    let mut increments = Vec::new();
    for c in 1..ens.checkpoints.len() {
        let (mid, end) = (ens.checkpoints[c - 1], ens.checkpoints[c]);
        if end != 2 * mid {
            continue;
        }
        let idx: Vec<usize> = alive(ens, c).collect();
        let mut rho = [0.0; 2];
        for (axis, col) in [&ens.dx, &ens.dy].into_iter().enumerate() {
            let first: Vec<f64> = idx.iter().map(|&i| col[c - 1][i]).collect();
            let second: Vec<f64> = idx.iter().map(|&i| col[c][i] - col[c - 1][i]).collect();
            rho[axis] = correlation(&first, &second);
        }
        increments.push(IncrementCorrelation {
            mid,
            end,
            samples: idx.len(),
            rho,
        });
    }

    let mut laws = Vec::new();
    for &n in collapse_ns {
        let c = ens
            .checkpoint_index(n)
            .ok_or(AnalysisError::MissingCheckpoint(n))?;
        laws.push(scaled(ens, c));
    }
    let mut collapse = [0.0f64; 2];
    for a in 0..laws.len() {
        for b in a + 1..laws.len() {
            for axis in 0..2 {
                collapse[axis] = collapse[axis].max(ks_two_sample(&laws[a][axis], &laws[b][axis]));
            }
        }
    }
    Ok(GaussianityReport {
        ks,
        increments,
        collapse_ns: collapse_ns.to_vec(),
        collapse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_dual;
    use crate::pentagrid::{generate_patch, GridParams};
    use crate::square::SquareLattice;
    use crate::walk::{simulate_ensemble, EnsembleConfig, Starts};

    #[test]
    fn one_step_msd_is_exact_average() {
        let lat = build_dual(&generate_patch(40.0, &GridParams::default()).unwrap()).unwrap();
        let pool = lat.interior_within(10.0);
        let ens = simulate_ensemble(&lat, &Starts::Uniform(pool), &EnsembleConfig::new(1, 200_000, 8)).unwrap();
        let exact: f64 = ens
            .starts
            .iter()
            .map(|&s| {
                let c = lat.position(s as usize);
                lat.neighbors(s as usize)
                    .iter()
                    .map(|&y| {
                        let p = lat.position(y as usize);
                        (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)
                    })
                    .sum::<f64>()
                    / 4.0
            })
            .sum::<f64>()
            / ens.samples() as f64;
        let row = msd_curve(&ens)[0];
        assert!((row.euclid.mean - exact).abs() < 4.0 * row.euclid.se);
        assert_eq!(row.graph.unwrap().mean, 1.0);
    }

    #[test]
    fn site_drift_is_bounded() {
        let lat = build_dual(&generate_patch(40.0, &GridParams::default()).unwrap()).unwrap();
        for x in lat.interior_vertices() {
            let p = site_drift(&lat, x);
            assert!(p[0].hypot(p[1]) <= crate::isometry::max_diagonal());
        }
    }

    #[test]
    fn square_lattice_is_isotropic_and_gaussian() {
        let sq = SquareLattice::new(200);
        let mut config = EnsembleConfig::new(256, 20_000, 5);
        config.record_distances = false;
        let ens = simulate_ensemble(&sq, &Starts::Fixed(sq.origin()), &config).unwrap();
        let cov = limit_covariance(&ens, 256).unwrap();
        // Per-axis variance rate 1/2.
        assert!((cov.matrix[0][0] - 0.5).abs() < 0.03);
        assert!(cov.isotropy_ratio > 0.9);
        let g = gaussianity_report(&ens, &[64, 256], 10_000).unwrap();
        assert!(g.ks[0].ks[0] > 0.2);
        // ℤ² positions at n are confined to one parity class; the laws
        // still converge at the scale of the lattice spacing.
        assert!(g.ks.last().unwrap().ks[0] < 0.06);
        for inc in &g.increments {
            for r in inc.rho {
                assert!(r.abs() < 4.0 / (inc.samples as f64).sqrt());
            }
        }
        assert!(g.collapse[0] < 0.08);
        let d = drift_and_covariance(&ens, &sq, 256, 2);
        assert!(matches!(d, Err(AnalysisError::InsufficientStarts { .. })));
    }
}
