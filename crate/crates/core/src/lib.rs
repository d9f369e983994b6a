//! Longitudinal frequency estimation under local differential privacy.
//!
//! Every user holds a Boolean value that changes at most `k` times over a
//! horizon of `d` time steps. The server wants the population count at every
//! step, online, while each user's full reported stream stays ε-LDP.
//!
//! The crate is organised bottom-up:
//!
//! * [`dyadic`]: dyadic intervals, the derivative transform, partial sums.
//! * [`randomizer`]: the composed randomizer with its annulus rejection step,
//!   the exact ⟨gap⟩ machinery, and an exact output-distribution oracle.
//! * [`protocol`]: the online client state machine and the server estimator.
//! * [`baselines`]: naive per-coordinate RR, sample-one-change, and the
//!   symmetric-annulus composed randomizer, all plugged into the same protocol.
//! * [`audit`]: enumeration-based privacy audits and statistical testers.
//! * [`harness`]: population generation, seeded experiments and scaling studies.
//!
//! Probabilities that the estimator divides by are carried in 128-bit binary
//! floating point ([`rug::Float`]); binomial coefficients are exact integers.

pub mod audit;
pub mod baselines;
pub mod dyadic;
mod error;
pub mod harness;
pub mod precision;
pub mod protocol;
pub mod randomizer;

pub use error::{Error, Result};
pub use rug::Float;
