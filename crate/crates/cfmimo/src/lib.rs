//! Uplink simulator for cell-free massive MIMO under channel aging.
//!
//! The crate provides two independent engines for the per-user uplink SINR of
//! a cell-free massive MIMO system whose channels decorrelate over the frame
//! (Jakes-type Doppler aging, with optionally different aging rates per
//! access point):
//!
//! - a link-level Monte Carlo engine ([`uplink`]) that realizes fading
//!   channels, simulates the pilot phase, forms MMSE channel estimates and
//!   the centralized MMSE combiner, and evaluates the conditional SINR per
//!   realization, and
//! - a deterministic-equivalent engine ([`detequiv`]) that computes the
//!   large-system limit of the same SINR from large-scale quantities only
//!   (path gains, estimation quality, correlation coefficients) via fixed
//!   points and small linear solves.
//!
//! The two engines cross-validate each other; `cfsim compare` and the
//! acceptance test suite assert agreement. Cellular massive MIMO and
//! small-cell baselines ([`baselines`]) run under the identical aging and
//! estimation model for architecture comparisons, and [`harness`] packages
//! the standard experiments (SINR vs time, aging-rate spread, velocity
//! sweeps) with CSV/JSON emission.
//!
//! Start with the runnable examples (`cargo run --release --example ...`):
//! each one demonstrates a single capability end to end.

pub mod baselines;
pub mod channel;
pub mod detequiv;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod scenario;
pub mod uplink;

pub use error::{Error, Result};
