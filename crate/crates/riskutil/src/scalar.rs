//! Scalar abstraction for the numeric core.
//!
//! All value-level math (grids, distributions, planners, projections) is
//! generic over [`Real`], instantiated in practice with `f64` (the crate-root
//! type aliases) and usable with `f32` where less precision is acceptable.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used throughout the numeric core.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for lifting an `f64` literal into the generic scalar.
#[inline]
pub fn c<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Absolute float-comparison tolerance used where no tighter one is stated.
pub const ABS_TOL: f64 = 1e-9;

/// Tolerance for transition-probability row sums.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Tolerance under which two expected utilities count as tied (optimal sets).
pub const TIE_TOL: f64 = 1e-10;

/// Default cap on `|S| * |reachable returns|` for exact forward recursions.
pub const DEFAULT_EXACT_CAP: u64 = 2_000_000;

/// Default cap on the number of policies an exhaustive oracle may evaluate.
pub const DEFAULT_ENUM_CAP: u64 = 10_000_000;

/// Enumeration/recursion cap, overridable through the `RISKUTIL_CAP`
/// environment variable.
pub fn enum_cap() -> u64 {
    env_cap().unwrap_or(DEFAULT_ENUM_CAP)
}

/// Exact-evaluation cap, overridable through `RISKUTIL_CAP`.
pub fn exact_cap() -> u64 {
    env_cap().unwrap_or(DEFAULT_EXACT_CAP)
}

fn env_cap() -> Option<u64> {
    std::env::var("RISKUTIL_CAP").ok()?.trim().parse().ok()
}

/// Deterministic seed derivation for sub-streams (episodes, triples, stages).
///
/// The result depends only on `seed` and `parts`, never on scheduling order,
/// so parallel and serial sampling see identical streams.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut state = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        state ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(state << 6)
            .wrapping_add(state >> 2);
        state = splitmix(state);
    }
    splitmix(state)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
