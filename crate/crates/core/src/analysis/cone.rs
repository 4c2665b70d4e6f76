//! Directional second moments of the heat kernel over cone–annulus regions.
//!
//! The cone about `e` is two-sided: a tile belongs to it when the line
//! through the origin and its center makes an angle at most `α` with `e`.
//! With `α = π/2` the cone is the whole plane.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::graph::{WalkGraph, UNREACHED};
use crate::walk::HeatKernelField;

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Annulus {
    /// Graph-distance bounds `C₁√n ≤ d < C₂√n`; `c2` may be infinite.
    pub c1: f64,
    pub c2: f64,
}

impl Annulus {
    fn contains(&self, d: u32, n: usize) -> bool {
        if d == UNREACHED {
            return false;
        }
        let s = (n as f64).sqrt();
        let d = d as f64;
        d >= self.c1 * s && d < self.c2 * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeValue {
    pub direction: [f64; 2],
    pub s: f64,
    pub tiles: usize,
}

/// Angle of `v` in `[0, 2π)`.
fn angle(v: [f64; 2]) -> f64 {
    let a = v[1].atan2(v[0]);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

fn check(field: &HeatKernelField, annulus: &Annulus) -> Result<(), AnalysisError> {
    if !(annulus.c1 >= 0.0 && annulus.c2 > annulus.c1) {
        return Err(AnalysisError::InvalidArgument(format!(
            "annulus needs 0 <= C1 < C2, got {} and {}",
            annulus.c1, annulus.c2
        )));
    }
    if field.leaked > crate::walk::DEFAULT_LEAK_BUDGET {
        return Err(AnalysisError::LeakTainted {
            origin: field.origin,
            n: field.n,
            leaked: field.leaked,
        });
    }
    Ok(())
}

fn moment<G: WalkGraph + ?Sized>(
    field: &HeatKernelField,
    graph: &G,
    weight: [f64; 2],
    annulus: &Annulus,
    mut keep: impl FnMut(f64) -> bool,
) -> (f64, usize) {
    let o = graph.position(field.origin);
    let (mut s, mut tiles) = (0.0, 0);
    for v in 0..field.probs.len() {
        let p = field.probs[v];
        if p == 0.0 || !annulus.contains(field.distance[v], field.n) {
            continue;
        }
        let c = graph.position(v);
        let x = [c[0] - o[0], c[1] - o[1]];
        if !keep(angle(x)) {
            continue;
        }
        let proj = weight[0] * x[0] + weight[1] * x[1];
        s += proj * proj * p;
        tiles += 1;
    }
    (s / field.n as f64, tiles)
}

/// `s = (1/n) Σ_{x∈H} (e·(c_x − c_0))² p_n(x₀, x)` over the two-sided cone
/// of half-angle `alpha` about `e`, intersected with the annulus.
pub fn cone_statistic<G: WalkGraph + ?Sized>(
    field: &HeatKernelField,
    graph: &G,
    e: [f64; 2],
    alpha: f64,
    annulus: &Annulus,
) -> Result<ConeValue, AnalysisError> {
    check(field, annulus)?;
    if !(alpha > 0.0 && alpha <= PI / 2.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "cone angle must lie in (0, π/2], got {alpha}"
        )));
    }
    let norm = e[0].hypot(e[1]);
    let e = [e[0] / norm, e[1] / norm];
    let theta = angle(e);
    let (s, tiles) = moment(field, graph, e, annulus, |a| {
        let mut diff = (a - theta).rem_euclid(PI);
        if diff > PI / 2.0 {
            diff = PI - diff;
        }
        diff <= alpha
    });
    if tiles == 0 {
        return Err(AnalysisError::EmptyRegion);
    }
    Ok(ConeValue {
        direction: e,
        s,
        tiles,
    })
}

/// As [`cone_statistic`], over the half-open angular sector `[from, to)`
/// (radians in `[0, 2π]`), with the projection taken along `weight`.
pub fn sector_moment<G: WalkGraph + ?Sized>(
    field: &HeatKernelField,
    graph: &G,
    weight: [f64; 2],
    from: f64,
    to: f64,
    annulus: &Annulus,
) -> Result<f64, AnalysisError> {
    check(field, annulus)?;
    Ok(moment(field, graph, weight, annulus, |a| a >= from && a < to).0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeScan {
    pub alpha: f64,
    pub annulus: Annulus,
    pub n: usize,
    pub values: Vec<ConeValue>,
    pub min: f64,
    pub mean: f64,
    /// `min / mean`.
    pub ratio: f64,
}

/// The statistic for `directions` equally spaced directions in `[0, π)`.
pub fn cone_scan<G: WalkGraph + ?Sized>(
    field: &HeatKernelField,
    graph: &G,
    directions: usize,
    alpha: f64,
    annulus: &Annulus,
) -> Result<ConeScan, AnalysisError> {
    let mut values = Vec::with_capacity(directions);
    for k in 0..directions {
        let t = PI * k as f64 / directions as f64;
        values.push(cone_statistic(field, graph, [t.cos(), t.sin()], alpha, annulus)?);
    }
    let min = values.iter().map(|v| v.s).fold(f64::INFINITY, f64::min);
    let mean = values.iter().map(|v| v.s).sum::<f64>() / directions as f64;
    Ok(ConeScan {
        alpha,
        annulus: *annulus,
        n: field.n,
        values,
        min,
        mean,
        ratio: min / mean,
    })
}
