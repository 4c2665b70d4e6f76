//! Random walks on the dual graph of Penrose rhombus tilings.
//!
//! [`pentagrid`] builds tilings, [`lattice`] turns them into graphs,
//! [`walk`] evolves exact heat kernels and Monte Carlo ensembles on any
//! [`WalkGraph`], and [`analysis`] turns those into statistics. The
//! [`square`] lattice runs through the same code as a reference.

pub mod analysis;
pub mod graph;
pub mod isometry;
pub mod lattice;
pub mod pentagrid;
pub mod render;
pub mod square;
pub mod walk;

pub use analysis::{AnalysisError, Thresholds};
pub use graph::{WalkGraph, UNREACHED};
pub use isometry::{IsometryConfig, IsometryReport};
pub use lattice::{build_dual, LatticeError, PenroseLattice};
pub use pentagrid::{generate_patch, make_grid_params, GridParams, PentagridError, Point, TileKind, TilingPatch};
pub use square::SquareLattice;
pub use walk::{DisplacementEnsemble, EnsembleConfig, HeatKernelField, Starts, WalkError};

/// Crate version, embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
