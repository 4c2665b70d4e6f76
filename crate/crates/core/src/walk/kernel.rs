use std::collections::VecDeque;
use std::sync::Arc;

use crate::graph::{bfs_distances, WalkGraph, UNREACHED};

use super::WalkError;

/// Largest mass allowed to leave the patch before a field is unusable.
pub const DEFAULT_LEAK_BUDGET: f64 = 1e-9;

/// `p_n(x₀, ·)` together with `p_{n+1}(x₀, ·)`.
#[derive(Debug, Clone)]
pub struct HeatKernelField {
    pub origin: usize,
    pub n: usize,
    /// Indexed by vertex of the graph.
    pub probs: Vec<f64>,
    pub next: Vec<f64>,
    pub leaked: f64,
    pub leaked_next: f64,
    /// Graph distance from the origin, [`UNREACHED`] beyond the horizon.
    pub distance: Arc<Vec<u32>>,
}

impl HeatKernelField {
    pub fn p(&self, v: usize) -> f64 {
        self.probs[v]
    }

    /// `p̃_n = p_n + p_{n+1}`.
    pub fn p_tilde(&self, v: usize) -> f64 {
        self.probs[v] + self.next[v]
    }

    pub fn mass_error(&self) -> f64 {
        (self.probs.iter().sum::<f64>() + self.leaked - 1.0).abs()
    }

    /// Vertices carrying mass at step n or n+1, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.probs.len()).filter(|&v| self.probs[v] > 0.0 || self.next[v] > 0.0)
    }
}

/// Region reachable by mass from the origin, relabelled in BFS order so
/// each step only touches the vertices it can reach.
struct Region {
    global: Vec<u32>,
    /// Local neighbor ids in global sorted order; absent slots point at
    /// the zero cell `global.len()`.
    nbrs: Vec<[u32; 4]>,
    interior: Vec<bool>,
    /// `level_end[d]` = number of local vertices at distance ≤ d.
    level_end: Vec<usize>,
}

impl Region {
    fn build<G: WalkGraph + ?Sized>(graph: &G, origin: usize, depth: usize) -> Region {
        let n = graph.vertex_count();
        let mut local = vec![UNREACHED; n];
        let mut global = vec![origin as u32];
        let mut dist = vec![0u32];
        local[origin] = 0;
        let mut queue = VecDeque::from([origin as u32]);
        while let Some(v) = queue.pop_front() {
            let d = dist[local[v as usize] as usize];
            if d as usize >= depth || !graph.is_interior(v as usize) {
                continue;
            }
            for &w in graph.neighbors(v as usize) {
                if local[w as usize] == UNREACHED {
                    local[w as usize] = global.len() as u32;
                    global.push(w);
                    dist.push(d + 1);
                    queue.push_back(w);
                }
            }
        }
        let zero = global.len() as u32;
        let mut nbrs = Vec::with_capacity(global.len());
        let mut interior = Vec::with_capacity(global.len());
        for &g in &global {
            let mut slots = [zero; 4];
            for (slot, &w) in slots.iter_mut().zip(graph.neighbors(g as usize)) {
                if local[w as usize] != UNREACHED {
                    *slot = local[w as usize];
                }
            }
            nbrs.push(slots);
            interior.push(graph.is_interior(g as usize));
        }
        let mut level_end = vec![0usize; depth + 1];
        for &d in &dist {
            level_end[d as usize] += 1;
        }
        for d in 1..=depth {
            level_end[d] += level_end[d - 1];
        }
        Region {
            global,
            nbrs,
            interior,
            level_end,
        }
    }
}

#[inline]
fn pull(p: &[f64], slots: &[u32; 4]) -> f64 {
    (((p[slots[0] as usize] + p[slots[1] as usize]) + p[slots[2] as usize]) + p[slots[3] as usize])
        * 0.25
}

/// Evolve the heat kernel from `origin` and keep the fields at the
/// requested step counts.
///
/// Mass that arrives at a non-interior vertex is absorbed into `leaked`.
/// Fails as soon as the absorbed mass exceeds `leak_budget`.
pub fn heat_kernel_evolve<G: WalkGraph + ?Sized>(
    graph: &G,
    origin: usize,
    retain: &[usize],
    leak_budget: f64,
) -> Result<Vec<HeatKernelField>, WalkError> {
    if origin >= graph.vertex_count() {
        return Err(WalkError::InvalidVertex(origin));
    }
    if !graph.is_interior(origin) {
        return Err(WalkError::BoundaryTile(origin));
    }
    let mut retain = retain.to_vec();
    retain.sort_unstable();
    retain.dedup();
    let Some(&last) = retain.last() else {
        return Ok(Vec::new());
    };
    let horizon = last + 1;
    let region = Region::build(graph, origin, horizon);
    let distance = Arc::new(bfs_distances(graph, origin, horizon as u32));

    let size = region.global.len();
    let mut cur = vec![0.0f64; size + 1];
    let mut nxt = vec![0.0f64; size + 1];
    cur[0] = 1.0;
    let mut leaked = 0.0f64;
    // A retained step waits here until p_{n+1} is available.
    let mut pending: Option<(usize, Vec<f64>, f64)> = None;
    let mut fields = Vec::with_capacity(retain.len());
    let mut want = retain.iter().copied().peekable();

    let scatter = |local: &[f64]| {
        let mut out = vec![0.0; graph.vertex_count()];
        for (i, &g) in region.global.iter().enumerate() {
            out[g as usize] = local[i];
        }
        out
    };

    for step in 0..=horizon {
        if let Some((n, probs, leaked_n)) = pending.take() {
            fields.push(HeatKernelField {
                origin,
                n,
                probs,
                next: scatter(&cur),
                leaked: leaked_n,
                leaked_next: leaked,
                distance: Arc::clone(&distance),
            });
        }
        if want.peek() == Some(&step) {
            want.next();
            pending = Some((step, scatter(&cur), leaked));
        }
        if step == horizon {
            break;
        }
        let active = region.level_end[(step + 1).min(region.level_end.len() - 1)];
        let mut arrived = 0.0;
        for y in 0..active {
            let v = pull(&cur, &region.nbrs[y]);
            if region.interior[y] {
                nxt[y] = v;
            } else {
                arrived += v;
            }
        }
        leaked += arrived;
        std::mem::swap(&mut cur, &mut nxt);
        if leaked > leak_budget {
            return Err(WalkError::LeakBudgetExceeded {
                leaked,
                step: step + 1,
                budget: leak_budget,
            });
        }
    }
    Ok(fields)
}

/// One-vertex-at-a-time evolution of an arbitrary distribution over the
/// whole graph, with the same update and summation order as
/// [`heat_kernel_evolve`]. Returns the new distribution and leaked mass.
pub fn evolve_distribution<G: WalkGraph + ?Sized>(
    graph: &G,
    probs: &[f64],
    leaked: f64,
    steps: usize,
) -> (Vec<f64>, f64) {
    let n = graph.vertex_count();
    let mut cur = probs.to_vec();
    let mut nxt = vec![0.0; n];
    let mut leaked = leaked;
    for _ in 0..steps {
        let mut arrived = 0.0;
        for y in 0..n {
            let mut s = 0.0;
            for &x in graph.neighbors(y) {
                if graph.is_interior(x as usize) {
                    s += cur[x as usize];
                }
            }
            let v = s * 0.25;
            if graph.is_interior(y) {
                nxt[y] = v;
            } else {
                arrived += v;
                nxt[y] = 0.0;
            }
        }
        leaked += arrived;
        std::mem::swap(&mut cur, &mut nxt);
    }
    (cur, leaked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_dual;
    use crate::pentagrid::{generate_patch, GridParams};
    use crate::square::SquareLattice;

    fn z2_return(n: u64) -> f64 {
        // (4^{-n} C(2n, n))², built as a running product to stay exact-ish.
        let mut c = 1.0f64;
        for i in 1..=n {
            c *= (n + i) as f64 / (4.0 * i as f64);
        }
        c * c
    }

    #[test]
    fn square_lattice_return_probabilities() {
        let sq = SquareLattice::new(30);
        let ns: Vec<usize> = (0..=12).map(|n| 2 * n).collect();
        let fields = heat_kernel_evolve(&sq, sq.origin(), &ns, DEFAULT_LEAK_BUDGET).unwrap();
        assert_eq!(fields[1].p(sq.origin()), 0.25);
        assert_eq!(fields[2].p(sq.origin()), 9.0 / 64.0);
        for (f, n) in fields.iter().zip(0..) {
            assert!((f.p(sq.origin()) - z2_return(n)).abs() < 1e-12, "n = {n}");
            assert_eq!(f.leaked, 0.0);
            assert!(f.mass_error() < 1e-12);
            // Bipartite: odd steps never return.
            assert_eq!(f.next[sq.origin()], 0.0);
        }
    }

    #[test]
    fn penrose_two_step_return_is_a_quarter() {
        let lat = build_dual(&generate_patch(20.0, &GridParams::default()).unwrap()).unwrap();
        let x0 = lat.nearest_vertex([0.0, 0.0]);
        let fields = heat_kernel_evolve(&lat, x0, &[0, 2], DEFAULT_LEAK_BUDGET).unwrap();
        assert_eq!(fields[0].p(x0), 1.0);
        assert_eq!(fields[0].support().count(), 5);
        assert_eq!(fields[1].p(x0), 0.25);
    }

    #[test]
    fn mass_is_conserved_and_p_tilde_positive() {
        let lat = build_dual(&generate_patch(30.0, &GridParams::default()).unwrap()).unwrap();
        let x0 = lat.nearest_vertex([1.0, -2.0]);
        let ns: Vec<usize> = (0..=40).collect();
        let fields = heat_kernel_evolve(&lat, x0, &ns, 1.0).unwrap();
        for f in &fields {
            assert!(f.mass_error() < 1e-12);
            assert!(f.probs.iter().all(|&p| p >= 0.0));
            assert!(f.p_tilde(x0) > 0.0);
        }
    }

    #[test]
    fn markov_consistency() {
        let lat = build_dual(&generate_patch(25.0, &GridParams::default()).unwrap()).unwrap();
        let x0 = lat.nearest_vertex([0.5, 0.5]);
        let fields = heat_kernel_evolve(&lat, x0, &[7, 19], 1.0).unwrap();
        let (p, leaked) = evolve_distribution(&lat, &fields[0].probs, fields[0].leaked, 12);
        for v in 0..lat.vertex_count() {
            assert!((p[v] - fields[1].probs[v]).abs() <= 1e-12);
        }
        assert!((leaked - fields[1].leaked).abs() <= 1e-12);
    }

    #[test]
    fn leak_budget_is_enforced() {
        let lat = build_dual(&generate_patch(10.0, &GridParams::default()).unwrap()).unwrap();
        let x0 = lat.nearest_vertex([0.0, 0.0]);
        let err = heat_kernel_evolve(&lat, x0, &[100], DEFAULT_LEAK_BUDGET).unwrap_err();
        assert!(matches!(err, WalkError::LeakBudgetExceeded { .. }));
        assert!(err.to_string().starts_with("LeakBudgetExceeded"));
    }
}
