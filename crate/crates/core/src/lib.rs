//! Deterministic multirotor simulation for landings on overhead line conductors.
//!
//! The crate is organised around four layers:
//!
//! * [`wind`]: seeded stochastic lateral wind profiles with a -5/3 spectral law
//! * [`dynamics`]: rigid-body vehicle model (coaxial rotor pairs, flat-plate drag, RK4)
//! * [`control`]: outer-loop PD guidance, inner-loop velocity/attitude surrogate,
//!   and the landing state machine
//! * [`envelope`]: single landing trials, Monte Carlo success maps over start
//!   positions, map algebra, and gain sweeps
//!
//! Conventions used throughout: NED axes (x forward along the conductor, y right,
//! z down), SI units internally, ZYX (yaw-pitch-roll) Euler angles, quaternions kept
//! unit-norm. The conductor lies along the inertial x axis through the origin; wind
//! blows along +y. All stochastic behaviour is driven by explicit 64-bit seeds so
//! that any result can be reproduced bit for bit.

pub mod control;
pub mod dynamics;
pub mod envelope;
pub mod wind;

use thiserror::Error;

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.81;

/// Conversion factor: km/h to m/s.
pub const KMH_TO_MPS: f64 = 1.0 / 3.6;

/// Crate-wide error type. Variants mirror the failure classes callers need to
/// distinguish: bad arguments, bad configuration, incompatible operands, and
/// numerical breakdown inside the integrator.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A parameter set fails validation; the message names the offending field.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Two operands that must agree (e.g. map grids) do not.
    #[error("contract violation: {0}")]
    Contract(String),
    /// The state integrator produced a non-finite quantity.
    #[error("integration fault: {0}")]
    Fault(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// SplitMix64 finalizer; full-avalanche mix of a 64-bit word.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and two indices (e.g. grid cell and
/// trial number). The derivation is a pure function of its inputs, so adding
/// work items or reordering execution never changes the seed any individual
/// work item observes.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(master ^ splitmix64(stream));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x51ed_270b)))
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
