use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{GuidedSearch, WalkGraph, UNREACHED};

use super::{sample_rng, ChoiceStream, WalkError};

/// `escaped_at` value of a walker that stayed inside the patch.
pub const NOT_ESCAPED: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq)]
pub enum Starts {
    /// Every sample starts at this vertex.
    Fixed(usize),
    /// Each sample draws its start uniformly from this pool.
    Uniform(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_max: usize,
    pub samples: usize,
    pub master_seed: u64,
    /// Record exact graph distances at checkpoints.
    pub record_distances: bool,
    /// Largest tolerated fraction of escaped samples.
    pub escape_budget: f64,
}

impl EnsembleConfig {
    pub fn new(n_max: usize, samples: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            n_max,
            samples,
            master_seed,
            record_distances: true,
            escape_budget: 1e-3,
        }
    }
}

/// Clearance a start needs so that escapes before `n_max` are negligible.
pub fn patch_margin(n_max: usize) -> f64 {
    8.0 * (n_max as f64).sqrt() + 10.0
}

/// `1, 2, 4, …` up to `n_max`, with `n_max` appended if it is not a power
/// of two.
pub fn dyadic_checkpoints(n_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut t = 1;
    while t <= n_max {
        out.push(t);
        t *= 2;
    }
    if out.last() != Some(&n_max) && n_max > 0 {
        out.push(n_max);
    }
    out
}

/// Columnar per-checkpoint records of a walk ensemble.
///
/// Columns are indexed `[checkpoint][sample]`. Entries at or after a
/// sample's escape are `NaN` (positions) or `u32::MAX` (ids, distances).
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementEnsemble {
    pub master_seed: u64,
    pub n_max: usize,
    pub checkpoints: Vec<usize>,
    pub starts: Vec<u32>,
    pub escaped_at: Vec<u32>,
    pub dx: Vec<Vec<f64>>,
    pub dy: Vec<Vec<f64>>,
    /// Empty when distances were not recorded.
    pub dist: Vec<Vec<u32>>,
    pub tiles: Vec<Vec<u32>>,
}

impl DisplacementEnsemble {
    pub fn samples(&self) -> usize {
        self.starts.len()
    }

    pub fn escapes(&self) -> usize {
        self.escaped_at.iter().filter(|&&e| e != NOT_ESCAPED).count()
    }

    pub fn checkpoint_index(&self, t: usize) -> Option<usize> {
        self.checkpoints.iter().position(|&c| c == t)
    }

    pub fn has_distances(&self) -> bool {
        !self.dist.is_empty()
    }
}

struct SampleRecord {
    start: u32,
    escaped_at: u32,
    dx: Vec<f64>,
    dy: Vec<f64>,
    dist: Vec<u32>,
    tiles: Vec<u32>,
}

fn run_sample<G: WalkGraph + ?Sized>(
    graph: &G,
    starts: &Starts,
    config: &EnsembleConfig,
    checkpoints: &[usize],
    index: usize,
    search: &mut GuidedSearch,
) -> SampleRecord {
    let mut rng = sample_rng(config.master_seed, index as u64);
    let start = match starts {
        Starts::Fixed(x) => *x,
        Starts::Uniform(pool) => pool[rng.random_range(0..pool.len())],
    };
    let mut choices = ChoiceStream::new(rng);
    let origin = graph.position(start);
    let k = checkpoints.len();
    let mut rec = SampleRecord {
        start: start as u32,
        escaped_at: NOT_ESCAPED,
        dx: vec![f64::NAN; k],
        dy: vec![f64::NAN; k],
        dist: if config.record_distances {
            vec![UNREACHED; k]
        } else {
            Vec::new()
        },
        tiles: vec![UNREACHED; k],
    };
    let mut pos = start;
    let mut next_cp = 0;
    for t in 1..=config.n_max {
        let nb = graph.neighbors(pos);
        pos = nb[choices.next_quarter()] as usize;
        if !graph.is_interior(pos) {
            rec.escaped_at = t as u32;
            break;
        }
        if checkpoints[next_cp] == t {
            let p = graph.position(pos);
            rec.dx[next_cp] = p[0] - origin[0];
            rec.dy[next_cp] = p[1] - origin[1];
            rec.tiles[next_cp] = pos as u32;
            if config.record_distances {
                rec.dist[next_cp] = search.distance(graph, start, pos).unwrap_or(UNREACHED);
            }
            next_cp += 1;
        }
    }
    rec
}

/// Run `config.samples` independent walks of `config.n_max` steps.
///
/// Sample `i` uses its own random stream, so the output does not depend on
/// the number of worker threads.
pub fn simulate_ensemble<G: WalkGraph + ?Sized>(
    graph: &G,
    starts: &Starts,
    config: &EnsembleConfig,
) -> Result<DisplacementEnsemble, WalkError> {
    let pool: &[usize] = match starts {
        Starts::Fixed(x) => std::slice::from_ref(x),
        Starts::Uniform(pool) => pool,
    };
    if pool.is_empty() {
        return Err(WalkError::NoStarts);
    }
    let needed = patch_margin(config.n_max);
    for &s in pool {
        if s >= graph.vertex_count() {
            return Err(WalkError::InvalidVertex(s));
        }
        if !graph.is_interior(s) {
            return Err(WalkError::BoundaryTile(s));
        }
        let clearance = graph.clearance(s);
        if clearance < needed {
            return Err(WalkError::PatchTooSmall {
                start: s,
                clearance,
                needed,
            });
        }
    }

    let checkpoints = dyadic_checkpoints(config.n_max);
    let records: Vec<SampleRecord> = (0..config.samples)
        .into_par_iter()
        .map_init(
            || GuidedSearch::new(graph.vertex_count()),
            |search, i| run_sample(graph, starts, config, &checkpoints, i, search),
        )
        .collect();

    let k = checkpoints.len();
    let n = config.samples;
    let mut ens = DisplacementEnsemble {
        master_seed: config.master_seed,
        n_max: config.n_max,
        checkpoints,
        starts: Vec::with_capacity(n),
        escaped_at: Vec::with_capacity(n),
        dx: vec![Vec::with_capacity(n); k],
        dy: vec![Vec::with_capacity(n); k],
        dist: if config.record_distances {
            vec![Vec::with_capacity(n); k]
        } else {
            Vec::new()
        },
        tiles: vec![Vec::with_capacity(n); k],
    };
    for rec in records {
        ens.starts.push(rec.start);
        ens.escaped_at.push(rec.escaped_at);
        for c in 0..k {
            ens.dx[c].push(rec.dx[c]);
            ens.dy[c].push(rec.dy[c]);
            ens.tiles[c].push(rec.tiles[c]);
            if config.record_distances {
                ens.dist[c].push(rec.dist[c]);
            }
        }
    }

    let escapes = ens.escapes();
    if n > 0 && escapes as f64 / n as f64 > config.escape_budget {
        return Err(WalkError::EscapeBudgetExceeded {
            escapes,
            samples: n,
            budget: config.escape_budget,
        });
    }
    Ok(ens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_dual;
    use crate::pentagrid::{generate_patch, GridParams};
    use crate::walk::{heat_kernel_evolve, DEFAULT_LEAK_BUDGET};
    use std::collections::HashMap;

    #[test]
    fn checkpoints_are_dyadic() {
        assert_eq!(dyadic_checkpoints(1), vec![1]);
        assert_eq!(dyadic_checkpoints(8), vec![1, 2, 4, 8]);
        assert_eq!(dyadic_checkpoints(12), vec![1, 2, 4, 8, 12]);
    }

    #[test]
    fn one_step_law() {
        let lat = build_dual(&generate_patch(25.0, &GridParams::default()).unwrap()).unwrap();
        let x0 = lat.nearest_vertex([0.0, 0.0]);
        let ens = simulate_ensemble(&lat, &Starts::Fixed(x0), &EnsembleConfig::new(1, 40_000, 3)).unwrap();
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for &t in &ens.tiles[0] {
            *counts.entry(t).or_default() += 1;
        }
        let nb = lat.neighbors(x0);
        assert_eq!(counts.len(), 4);
        for &y in nb {
            assert!((counts[&y] as f64 / 40_000.0 - 0.25).abs() < 0.01);
        }
        for i in 0..ens.samples() {
            assert_eq!(ens.dist[0][i], 1);
            let c = lat.position(ens.tiles[0][i] as usize);
            let o = lat.position(x0);
            assert_eq!(ens.dx[0][i], c[0] - o[0]);
        }
    }

    #[test]
    fn small_patch_is_rejected() {
        let lat = build_dual(&generate_patch(20.0, &GridParams::default()).unwrap()).unwrap();
        let x0 = lat.nearest_vertex([0.0, 0.0]);
        let err = simulate_ensemble(&lat, &Starts::Fixed(x0), &EnsembleConfig::new(64, 10, 3)).unwrap_err();
        assert!(matches!(err, WalkError::PatchTooSmall { .. }));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let lat = build_dual(&generate_patch(90.0, &GridParams::default()).unwrap()).unwrap();
        let pool = lat.interior_within(5.0);
        let config = EnsembleConfig::new(64, 2000, 11);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&lat, &Starts::Uniform(pool.clone()), &config).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn reversibility_flux() {
        // Uniform starts on a disk keep the density exactly uniform near the
        // middle for short times, so each edge carries equal flux both ways.
        let lat = build_dual(&generate_patch(60.0, &GridParams::default()).unwrap()).unwrap();
        let pool = lat.interior_within(30.0);
        let inner = |v: usize| {
            let c = lat.position(v);
            c[0].hypot(c[1]) < 10.0
        };
        let mut flux: HashMap<(u32, u32), i64> = HashMap::new();
        for i in 0..200_000u64 {
            let mut rng = sample_rng(99, i);
            let mut pos = pool[rng.random_range(0..pool.len())];
            let mut choices = ChoiceStream::new(rng);
            for _ in 0..10 {
                let nxt = crate::walk::step(&lat, pos, &mut choices).unwrap();
                if inner(pos) && inner(nxt) {
                    *flux.entry((pos as u32, nxt as u32)).or_default() += 1;
                }
                pos = nxt;
            }
        }
        let (mut worst, mut total) = (0.0f64, 0usize);
        for (&(a, b), &f) in &flux {
            let back = flux.get(&(b, a)).copied().unwrap_or(0);
            if a < b {
                let z = (f - back) as f64 / ((f + back) as f64).sqrt();
                worst = worst.max(z.abs());
                total += 1;
            }
        }
        assert!(total > 300);
        assert!(worst < 5.0, "largest flux imbalance {worst} sigma");
    }

    #[test]
    fn ensemble_matches_kernel() {
        let lat = build_dual(&generate_patch(70.0, &GridParams::default()).unwrap()).unwrap();
        let x0 = lat.nearest_vertex([0.0, 0.0]);
        let mut config = EnsembleConfig::new(32, 1_000_000, 17);
        config.record_distances = false;
        let ens = simulate_ensemble(&lat, &Starts::Fixed(x0), &config).unwrap();
        let field = &heat_kernel_evolve(&lat, x0, &[32], DEFAULT_LEAK_BUDGET).unwrap()[0];
        let c = ens.checkpoint_index(32).unwrap();
        let mut counts = vec![0usize; lat.vertex_count()];
        for &t in &ens.tiles[c] {
            counts[t as usize] += 1;
        }
        let tv: f64 = 0.5
            * (0..lat.vertex_count())
                .map(|v| (counts[v] as f64 / 1e6 - field.p(v)).abs())
                .sum::<f64>();
        assert!(tv <= 0.01, "total variation {tv}");
    }
}
