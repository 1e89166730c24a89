//! Startup-governor optimization for hydro-generating units.
//!
//! The crate finds governor parameters that minimize the largest strain cycle
//! seen by a turbine runner during startup, subject to a limit on the time
//! needed to reach synchronous speed. It combines:
//!
//! - [`sim`]: a fast startup simulator (four-phase governor, guide-vane servo,
//!   quasi-static torque surface, fixed-step RK4);
//! - [`envelope`]: strain envelopes, extremum-preserving decimation and the
//!   largest-cycle loss;
//! - [`sensor`]: a 5-member heteroscedastic ensemble predicting the strain
//!   envelope from speed and opening;
//! - [`blackbox`]: the composite startup cost and a mesh adaptive direct search;
//! - [`campaign`]: the init / active / optimization measurement loop;
//! - [`plant`]: a seeded synthetic turbine used in place of real measurements.

pub mod blackbox;
pub mod campaign;
pub mod config;
pub mod envelope;
pub mod error;
pub mod plant;
pub mod sensor;
pub mod sim;

pub use error::{Error, Result};

/// Derives an independent stream seed from a base seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
