//! Continuous-time no-regret learning on the probability simplex.
//!
//! The crate covers softmax geometry ([`simplex`]), rational and state-space
//! SISO systems ([`lti`]), the learning rules themselves ([`dynamics`]), a
//! fixed-step integrator ([`sim`]), reward and regret accounting
//! ([`metrics`]) and periodic steady-state analysis ([`freq`]).

pub mod dynamics;
pub mod error;
pub mod freq;
pub mod lti;
pub mod metrics;
pub mod sim;
pub mod simplex;

pub use dynamics::{matched_initialization, DynamicsModel, DynamicsState, Rule, RuleKind};
pub use error::{Error, Result};
pub use lti::{RationalTf, StateSpaceSiso};
pub use sim::{simulate, PayoffSignal, SinusoidTerm, Trajectory, Waveform};
pub use simplex::{softmax, SimplexVector};
