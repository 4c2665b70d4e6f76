//! Shared fixtures for the benchmarks.

use quasiwalk_core::{build_dual, generate_patch, GridParams, PenroseLattice, TilingPatch};

pub fn patch(radius: f64) -> TilingPatch {
    generate_patch(radius, &GridParams::default()).expect("default offsets are regular")
}

pub fn lattice(radius: f64) -> PenroseLattice {
    build_dual(&patch(radius)).expect("fresh patch")
}
