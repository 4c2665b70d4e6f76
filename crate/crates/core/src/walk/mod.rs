//! Dynamics of the nearest-neighbor walk: exact heat-kernel evolution and
//! seeded Monte Carlo ensembles.

mod ensemble;
mod io;
mod kernel;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::WalkGraph;

pub use ensemble::{
    dyadic_checkpoints, patch_margin, simulate_ensemble, DisplacementEnsemble, EnsembleConfig,
    Starts, NOT_ESCAPED,
};
pub use io::{read_ensemble, write_ensemble, write_kernel_csv, EnsembleIoError, ENSEMBLE_MAGIC};
pub use kernel::{evolve_distribution, heat_kernel_evolve, HeatKernelField, DEFAULT_LEAK_BUDGET};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("tile {0} is not interior; the walk cannot continue from it")]
    BoundaryTile(usize),
    #[error("patch too small: start {start} has clearance {clearance:.1}, need {needed:.1}")]
    PatchTooSmall {
        start: usize,
        clearance: f64,
        needed: f64,
    },
    #[error("{escapes} of {samples} walkers escaped the patch (budget {budget})")]
    EscapeBudgetExceeded {
        escapes: usize,
        samples: usize,
        budget: f64,
    },
    #[error("LeakBudgetExceeded: {leaked:e} of the mass left the patch by step {step} (budget {budget:e})")]
    LeakBudgetExceeded { leaked: f64, step: usize, budget: f64 },
    #[error("no start tiles given")]
    NoStarts,
    #[error("vertex {0} is out of range")]
    InvalidVertex(usize),
}

/// Per-sample random stream: ChaCha8 keyed by the master seed, with the
/// sample index as the stream id. Streams are independent of how samples
/// are scheduled across workers.
pub fn sample_rng(master_seed: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(sample);
    rng
}

/// Two-bit choices drawn 32 at a time from a 64-bit word.
#[derive(Debug)]
pub struct ChoiceStream<R> {
    rng: R,
    word: u64,
    left: u32,
}

impl<R: RngCore> ChoiceStream<R> {
    pub fn new(rng: R) -> Self {
        ChoiceStream {
            rng,
            word: 0,
            left: 0,
        }
    }

    /// Uniform value in `0..4`.
    #[inline]
    pub fn next_quarter(&mut self) -> usize {
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 32;
        }
        let c = (self.word & 3) as usize;
        self.word >>= 2;
        self.left -= 1;
        c
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

/// One step of the walk: `P(x, y) = 1/4` for each of the four neighbors.
#[inline]
pub fn step<G: WalkGraph + ?Sized, R: RngCore>(
    graph: &G,
    x: usize,
    choices: &mut ChoiceStream<R>,
) -> Result<usize, WalkError> {
    if !graph.is_interior(x) {
        return Err(WalkError::BoundaryTile(x));
    }
    let nb = graph.neighbors(x);
    debug_assert_eq!(nb.len(), 4);
    Ok(nb[choices.next_quarter()] as usize)
}
