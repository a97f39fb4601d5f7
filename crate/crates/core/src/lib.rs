//! Numerical laboratory for synchronisation by noise in random dynamical
//! systems.
//!
//! * [`noise`]: Wiener paths and i.i.d. sequences on a time grid, with exact
//!   shifts and order-independent leftward extension.
//! * [`systems`]: the double-well SDE and a random circle map behind the
//!   [`Cocycle`](systems::Cocycle) trait, plus flows, two-point motion and
//!   tangent flows.
//! * [`measures`]: pullback sampling of the invariant random measure and
//!   two estimators of its number of atoms.
//! * [`diagnostics`]: Monte Carlo certificates for synchronisation,
//!   stability, contractibility, transitivity, Lyapunov exponents and the
//!   Grönwall bound.

pub mod diagnostics;
pub mod error;
pub mod measures;
pub mod noise;
pub mod seed;
pub mod stats;
pub mod systems;

pub use error::{RdsError, Result};
pub use noise::{NoisePath, NoiseSeq, NoiseWindow};
pub use seed::SeedLineage;
pub use systems::{CircleMap, Cocycle, DoubleWell};
