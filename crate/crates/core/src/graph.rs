//! The graph interface shared by the Penrose lattice and the ℤ² adapter,
//! plus breadth-first search over it.

use std::collections::VecDeque;

use crate::pentagrid::Point;

/// Marker for "not reached" in distance arrays.
pub const UNREACHED: u32 = u32::MAX;

/// A locally finite graph embedded in the plane, with a finite window.
///
/// Vertices whose neighborhood may be truncated by the window are not
/// interior; walks and heat kernels treat them as absorbing.
pub trait WalkGraph: Sync {
    fn vertex_count(&self) -> usize;

    /// Neighbors of `v`, sorted ascending.
    fn neighbors(&self, v: usize) -> &[u32];

    fn is_interior(&self, v: usize) -> bool;

    fn position(&self, v: usize) -> Point;

    /// Euclidean distance from `v` to the edge of the interior region.
    fn clearance(&self, v: usize) -> f64;

    /// A lower bound on the graph distance that changes by at most one
    /// across an edge (so it is a consistent search heuristic).
    fn distance_lower_bound(&self, a: usize, b: usize) -> u32;

    /// Whether [`WalkGraph::distance_lower_bound`] is already exact.
    fn lower_bound_is_exact(&self) -> bool {
        false
    }

    /// Vertex measure `μ(v) = Σ μ_{v,y}` with unit edge weights.
    fn mass(&self, v: usize) -> f64 {
        self.neighbors(v).len() as f64
    }

    fn degree(&self, v: usize) -> usize {
        self.neighbors(v).len()
    }

    /// Interior vertices, ascending.
    fn interior_vertices(&self) -> Vec<usize> {
        (0..self.vertex_count())
            .filter(|&v| self.is_interior(v))
            .collect()
    }

    /// The vertex whose position is closest to `p`.
    fn nearest_vertex(&self, p: Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for v in 0..self.vertex_count() {
            let q = self.position(v);
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best.0 {
                best = (d, v);
            }
        }
        best.1
    }
}

/// Reusable breadth-first search state. Resetting touches only the
/// vertices visited by the previous run.
#[derive(Debug, Clone)]
pub struct Bfs {
    dist: Vec<u32>,
    order: Vec<u32>,
    queue: VecDeque<u32>,
}

impl Bfs {
    pub fn new(vertex_count: usize) -> Self {
        Bfs {
            dist: vec![UNREACHED; vertex_count],
            order: Vec::new(),
            queue: VecDeque::new(),
        }
    }

    fn reset(&mut self) {
        for &v in &self.order {
            self.dist[v as usize] = UNREACHED;
        }
        self.order.clear();
        self.queue.clear();
    }

    /// Search from `source` up to depth `cap`, optionally stopping once
    /// `target` is settled.
    pub fn run<G: WalkGraph + ?Sized>(
        &mut self,
        graph: &G,
        source: usize,
        cap: u32,
        target: Option<usize>,
    ) {
        self.reset();
        self.dist[source] = 0;
        self.order.push(source as u32);
        self.queue.push_back(source as u32);
        if target == Some(source) {
            return;
        }
        while let Some(v) = self.queue.pop_front() {
            let d = self.dist[v as usize];
            if d >= cap {
                continue;
            }
            for &w in graph.neighbors(v as usize) {
                if self.dist[w as usize] == UNREACHED {
                    self.dist[w as usize] = d + 1;
                    self.order.push(w);
                    if target == Some(w as usize) {
                        return;
                    }
                    self.queue.push_back(w);
                }
            }
        }
    }

    pub fn distance(&self, v: usize) -> Option<u32> {
        match self.dist[v] {
            UNREACHED => None,
            d => Some(d),
        }
    }

    /// Visited vertices in nondecreasing distance order.
    pub fn visited(&self) -> &[u32] {
        &self.order
    }

    pub fn distances(&self) -> &[u32] {
        &self.dist
    }
}

/// Distances from `source` to every vertex within `cap` steps.
pub fn bfs_distances<G: WalkGraph + ?Sized>(graph: &G, source: usize, cap: u32) -> Vec<u32> {
    let mut bfs = Bfs::new(graph.vertex_count());
    bfs.run(graph, source, cap, None);
    bfs.dist
}

/// Exact point-to-point distances by A* search guided by
/// [`WalkGraph::distance_lower_bound`]. The buffers are reusable, so one
/// instance per worker is enough.
#[derive(Debug, Clone)]
pub struct GuidedSearch {
    g: Vec<u32>,
    touched: Vec<u32>,
    buckets: Vec<Vec<u32>>,
    expanded: u64,
}

impl GuidedSearch {
    pub fn new(vertex_count: usize) -> Self {
        GuidedSearch {
            g: vec![UNREACHED; vertex_count],
            touched: Vec::new(),
            buckets: Vec::new(),
            expanded: 0,
        }
    }

    /// Total vertices expanded over the lifetime of this instance.
    pub fn expanded(&self) -> u64 {
        self.expanded
    }

    /// Shortest-path distance from `a` to `b`, or `None` if `b` is not
    /// reachable.
    pub fn distance<G: WalkGraph + ?Sized>(&mut self, graph: &G, a: usize, b: usize) -> Option<u32> {
        let base = graph.distance_lower_bound(a, b);
        if graph.lower_bound_is_exact() || a == b {
            return Some(base);
        }
        for &v in &self.touched {
            self.g[v as usize] = UNREACHED;
        }
        self.touched.clear();
        for bucket in &mut self.buckets {
            bucket.clear();
        }

        // Buckets hold vertices by f - base; LIFO order within a bucket
        // favours deeper vertices.
        self.g[a] = 0;
        self.touched.push(a as u32);
        self.push(0, a as u32);
        let mut level = 0;
        loop {
            while level < self.buckets.len() && self.buckets[level].is_empty() {
                level += 1;
            }
            if level == self.buckets.len() {
                return None;
            }
            let v = self.buckets[level].pop().expect("non-empty bucket") as usize;
            let gv = self.g[v];
            let f = gv + graph.distance_lower_bound(v, b);
            if (f - base) as usize != level {
                // Stale entry.
                continue;
            }
            if v == b {
                return Some(gv);
            }
            self.expanded += 1;
            for &w in graph.neighbors(v) {
                let gw = gv + 1;
                if gw < self.g[w as usize] {
                    if self.g[w as usize] == UNREACHED {
                        self.touched.push(w);
                    }
                    self.g[w as usize] = gw;
                    let fw = gw + graph.distance_lower_bound(w as usize, b);
                    self.push((fw - base) as usize, w);
                }
            }
        }
    }

    fn push(&mut self, level: usize, v: u32) {
        if level >= self.buckets.len() {
            self.buckets.resize_with(level + 1, Vec::new);
        }
        self.buckets[level].push(v);
    }
}
