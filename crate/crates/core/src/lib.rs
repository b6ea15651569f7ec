//! Kernel lab for the integral formulation of the radiative transfer
//! equation: attenuation along segments, truncated phase expansions, the
//! angular moment kernels in 2D and 3D, a moment-system solver, and
//! separability (low-rank) experiments on the resulting kernels.

pub mod config;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod medium;
pub mod phase;
pub mod quadrature;
pub mod separability;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{BoxDomain, Dim, Grid, Point};
pub use medium::{attenuation, Medium, ScalarField};
pub use phase::PhaseExpansion;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Sizes the global rayon pool and faer's parallelism. Call once, before
/// any parallel work; later calls fail because the pool already exists.
pub fn set_threads(threads: usize) -> Result<()> {
    let threads = threads.max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("cannot configure {threads} threads: {e}")))?;
    faer::set_global_parallelism(if threads == 1 { faer::Par::Seq } else { faer::Par::rayon(threads) });
    Ok(())
}
