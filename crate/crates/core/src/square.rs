//! The square lattice ℤ² on a finite box, as a reference graph.
//!
//! Every analysis routine accepts any [`WalkGraph`], so the same code paths
//! run here against closed-form answers.

use crate::graph::WalkGraph;
use crate::pentagrid::Point;

#[derive(Debug, Clone)]
pub struct SquareLattice {
    half_width: i64,
    side: i64,
    neighbors: Vec<[u32; 4]>,
    degree: Vec<u8>,
}

impl SquareLattice {
    /// Vertices `(x, y)` with `|x|, |y| <= half_width`.
    pub fn new(half_width: usize) -> Self {
        let h = half_width as i64;
        let side = 2 * h + 1;
        let n = (side * side) as usize;
        let mut neighbors = vec![[u32::MAX; 4]; n];
        let mut degree = vec![0u8; n];
        for x in -h..=h {
            for y in -h..=h {
                let v = ((x + h) * side + (y + h)) as usize;
                let mut list: Vec<u32> = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
                    .into_iter()
                    .filter(|&(a, b)| a.abs() <= h && b.abs() <= h)
                    .map(|(a, b)| ((a + h) * side + (b + h)) as u32)
                    .collect();
                list.sort_unstable();
                degree[v] = list.len() as u8;
                neighbors[v][..list.len()].copy_from_slice(&list);
            }
        }
        SquareLattice {
            half_width: h,
            side,
            neighbors,
            degree,
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width as usize
    }

    pub fn vertex(&self, x: i64, y: i64) -> usize {
        assert!(x.abs() <= self.half_width && y.abs() <= self.half_width);
        ((x + self.half_width) * self.side + (y + self.half_width)) as usize
    }

    pub fn origin(&self) -> usize {
        self.vertex(0, 0)
    }

    pub fn coords(&self, v: usize) -> (i64, i64) {
        let v = v as i64;
        (v / self.side - self.half_width, v % self.side - self.half_width)
    }
}

impl WalkGraph for SquareLattice {
    fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }

    fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[v][..self.degree[v] as usize]
    }

    fn is_interior(&self, v: usize) -> bool {
        let (x, y) = self.coords(v);
        x.abs().max(y.abs()) < self.half_width
    }

    fn position(&self, v: usize) -> Point {
        let (x, y) = self.coords(v);
        [x as f64, y as f64]
    }

    fn clearance(&self, v: usize) -> f64 {
        let (x, y) = self.coords(v);
        (self.half_width - 1 - x.abs().max(y.abs())) as f64
    }

    fn lower_bound_is_exact(&self) -> bool {
        true
    }

    fn distance_lower_bound(&self, a: usize, b: usize) -> u32 {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ((ax - bx).abs() + (ay - by).abs()) as u32
    }

    fn nearest_vertex(&self, p: Point) -> usize {
        let h = self.half_width as f64;
        self.vertex(p[0].round().clamp(-h, h) as i64, p[1].round().clamp(-h, h) as i64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::bfs_distances;

    #[test]
    fn box_structure() {
        let sq = SquareLattice::new(5);
        assert_eq!(sq.vertex_count(), 121);
        let o = sq.origin();
        assert_eq!(sq.coords(o), (0, 0));
        assert_eq!(sq.degree(o), 4);
        assert_eq!(sq.degree(sq.vertex(5, 5)), 2);
        assert!(!sq.is_interior(sq.vertex(5, 0)));
        assert!(sq.is_interior(sq.vertex(4, -4)));
        let d = bfs_distances(&sq, o, 100);
        for v in 0..sq.vertex_count() {
            assert_eq!(d[v], sq.distance_lower_bound(o, v));
        }
    }
}
