//! Risk-sensitive models of demonstrated behavior in tabular MDPs.
//!
//! An agent that cares about the full distribution of its episode return,
//! not just its mean, maximizes the expected *utility* of the return. This
//! crate implements that behavior model end to end for finite-horizon
//! tabular MDPs:
//!
//! - exact planning for a given utility through the enlarged state space
//!   (state plus accumulated discretized reward), with independent
//!   enumeration oracles to certify it;
//! - compatibility scoring and threshold classification of candidate
//!   utilities against demonstrations (`caty`);
//! - learning a utility by online projected gradient descent over the
//!   discretized monotone-Lipschitz polytope (`tractor`);
//! - feasible-set analytics, environment-design elicitation of a hidden
//!   utility, and transfer/imitation/assessment diagnostics (`ident`);
//! - a zoo of small benchmark environments with golden values.
//!
//! The numeric core is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the crate-root aliases fix `f64`, which every
//! tolerance in the test suites assumes.

pub mod caty;
pub mod error;
pub mod estimation;
pub mod grid;
pub mod ident;
pub mod io;
pub mod mdp;
pub mod oracle;
pub mod planner;
pub mod qp;
pub mod returns;
pub mod scalar;
pub mod tractor;
pub mod utility;
pub mod zoo;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default scalar type used by the CLI and the test suites.
pub type Scalar = f64;

pub type Mdp = mdp::Mdp<Scalar>;
pub type RsMdp = mdp::RsMdp<Scalar>;
pub type HistoryPolicy = mdp::HistoryPolicy<Scalar>;
pub type Grid = grid::Grid<Scalar>;
pub type ReturnDistribution = returns::ReturnDistribution<Scalar>;
pub type Utility = utility::Utility<Scalar>;
pub type DiscretizedUtility = utility::DiscretizedUtility<Scalar>;
pub type EnlargedPolicy = planner::EnlargedPolicy;
pub type ZooEntry = zoo::ZooEntry<Scalar>;
