//! The composed randomizer and its exact analysis.
//!
//! A sign vector `b ∈ {-1,1}^k` is first perturbed coordinate-wise by
//! randomized response with budget ε̃ = ε/(5√k). If the result lands outside
//! the annulus of Hamming distances `[lb, ub]` around `b`, it is replaced by a
//! fresh uniform draw from the complement. Every output inside the annulus
//! then has probability `g(dist) = p^dist (1-p)^(k-dist)`, every output
//! outside has the common probability q*, and the coordinate-wise bias
//! ⟨gap⟩ = P[b̃ᵢ = bᵢ] - P[b̃ᵢ = -bᵢ] is Θ(ε/√k) instead of the Θ(ε/k) of
//! independent perturbation.

mod config;
mod exact;
mod sampling;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use config::{
    annulus_bounds, annulus_real_bounds, g_weight, g_weight_real, gap_lower_bound_expr,
    gap_simplified, gap_two_sum, q_star, RandomizerConfig, MAX_K,
};
pub use exact::{exact_output_distribution, DistributionTable, MAX_ENUMERATION_K};
pub use sampling::{compose_randomize, sample_outside_annulus};

/// A vector over `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(Error::invalid(format!("sign vector entry {b} is not ±1")));
        }
        Ok(SignVector(bits))
    }

    /// The all-ones vector `1^k`.
    pub fn ones(k: usize) -> Self {
        SignVector(vec![1; k])
    }

    /// Decode a bitmask: bit `i` set means coordinate `i` is `-1`.
    pub fn from_mask(k: usize, mask: u64) -> Self {
        SignVector((0..k).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn to_mask(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == -1)
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    /// Number of coordinates where `self` and `other` differ.
    pub fn hamming(&self, other: &SignVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub(crate) fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }
}

impl TryFrom<Vec<i8>> for SignVector {
    type Error = Error;
    fn try_from(bits: Vec<i8>) -> Result<Self> {
        SignVector::new(bits)
    }
}

impl From<SignVector> for Vec<i8> {
    fn from(v: SignVector) -> Vec<i8> {
        v.0
    }
}

/// Flip probability `1 / (e^ε̃ + 1)` in double precision.
pub fn flip_probability(eps_tilde: f64) -> f64 {
    1.0 / (eps_tilde.exp() + 1.0)
}

/// Randomized response: keep `bit` w.p. `e^ε̃ / (e^ε̃ + 1)`, otherwise negate it.
pub fn basic_rr<R: Rng + ?Sized>(bit: i8, eps_tilde: f64, rng: &mut R) -> i8 {
    flip_with(bit, flip_probability(eps_tilde), rng)
}

#[inline]
pub(crate) fn flip_with<R: Rng + ?Sized>(bit: i8, flip_p: f64, rng: &mut R) -> i8 {
    if rng.random_bool(flip_p) {
        -bit
    } else {
        bit
    }
}
