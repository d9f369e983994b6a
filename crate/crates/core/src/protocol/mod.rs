//! Dyadic client/server protocol.
//!
//! Each client samples one order `h` uniformly from `0..=log2 d` and, at the
//! end of every order-`h` window, sends one ±1 bit that encodes the window's
//! partial sum of the derivative stream. The server rescales the bit sums into
//! interval estimates σ̂ and answers `f̂(t)` by adding the σ̂ of the dyadic
//! decomposition of `[1, t]`.

mod client;
mod mechanism;
mod server;
mod wire;

pub use client::{ClientReport, ClientState};
pub use mechanism::{Algorithm, Mechanism, Perturbation};
pub use server::{estimates_from_sums, ServerState};
pub use wire::{estimate_from_records, read_records, write_records, ReportRecord};
