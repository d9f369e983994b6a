use std::fmt;
use std::str::FromStr;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_config, BaselineKind};
use crate::dyadic::Horizon;
use crate::precision::PRECISION;
use crate::randomizer::RandomizerConfig;
use crate::{Error, Result};

/// Which randomizer the clients run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "futurerand")]
    FutureRand,
    #[serde(rename = "naive")]
    Naive,
    #[serde(rename = "sample-one")]
    SampleOne,
    #[serde(rename = "bns19")]
    Bns19,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::FutureRand,
        Algorithm::Naive,
        Algorithm::SampleOne,
        Algorithm::Bns19,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::FutureRand => "futurerand",
            Algorithm::Naive => "naive",
            Algorithm::SampleOne => "sample-one",
            Algorithm::Bns19 => "bns19",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "futurerand" => Ok(Algorithm::FutureRand),
            "naive" => Ok(Algorithm::Naive),
            "sample-one" | "sample_one" => Ok(Algorithm::SampleOne),
            "bns19" => Ok(Algorithm::Bns19),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// How a client turns a non-zero partial sum into a reported bit.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Perturbation {
    /// Draw `b̃ = R̃(1^k)` once at init; the `c`-th non-zero partial sum `v`
    /// is reported as `v·b̃_c`.
    Precomputed(RandomizerConfig),
    /// Each non-zero partial sum goes through RR independently.
    Independent { flip_p: f64 },
    /// Only one of `k` change slots is kept; the surviving partial sum goes
    /// through RR.
    SampleOne { flip_p: f64 },
}

/// A fully parameterised randomizer strategy, shared by all clients and the server.
#[derive(Debug, Clone)]
pub struct Mechanism {
    algorithm: Algorithm,
    k: usize,
    eps: f64,
    bit_gap: Float,
    estimator_factor: u64,
    perturbation: Perturbation,
}

impl Mechanism {
    pub fn new(algorithm: Algorithm, k: usize, eps: f64) -> Result<Self> {
        match algorithm {
            Algorithm::FutureRand => Ok(Self::future_rand(RandomizerConfig::future_rand(k, eps)?)),
            other => Ok(Self::from(baseline_config(other, k, eps)?)),
        }
    }

    pub fn future_rand(config: RandomizerConfig) -> Self {
        Mechanism {
            algorithm: Algorithm::FutureRand,
            k: config.k(),
            eps: config.eps(),
            bit_gap: config.gap().clone(),
            estimator_factor: 1,
            perturbation: Perturbation::Precomputed(config),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    /// Bias of one reported bit about its non-zero input.
    pub fn bit_gap(&self) -> &Float {
        &self.bit_gap
    }

    pub fn estimator_factor(&self) -> u64 {
        self.estimator_factor
    }

    pub fn effective_gap(&self) -> Float {
        Float::with_val(PRECISION, &self.bit_gap / self.estimator_factor)
    }

    /// Server multiplier `(1 + log2 d)·factor/⟨gap⟩`.
    pub fn scale(&self, horizon: Horizon) -> Float {
        Float::with_val(PRECISION, horizon.num_orders()) * self.estimator_factor / &self.bit_gap
    }
}

impl From<BaselineKind> for Mechanism {
    fn from(kind: BaselineKind) -> Self {
        let algorithm = kind.algorithm();
        let k = kind.k();
        let eps = kind.eps();
        let bit_gap = kind.gap().clone();
        let estimator_factor = kind.estimator_factor();
        let flip_p = {
            let e = Float::with_val(PRECISION, kind.eps_tilde().exp_ref());
            (Float::with_val(PRECISION, 1) / (e + 1u32)).to_f64()
        };
        let perturbation = match kind {
            BaselineKind::Naive { .. } => Perturbation::Independent { flip_p },
            BaselineKind::SampleOne { .. } => Perturbation::SampleOne { flip_p },
            BaselineKind::Bns19 { config, .. } => Perturbation::Precomputed(config),
        };
        Mechanism {
            algorithm,
            k,
            eps,
            bit_gap,
            estimator_factor,
            perturbation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_roundtrip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{a}\""));
        }
        assert!("laplace".parse::<Algorithm>().is_err());
    }

    #[test]
    fn scale_includes_orders_and_factor() {
        let h = Horizon::new(16).unwrap();
        let m = Mechanism::new(Algorithm::SampleOne, 8, 1.0).unwrap();
        let expected = 5.0 * 8.0 / m.bit_gap().to_f64();
        assert!((m.scale(h).to_f64() / expected - 1.0).abs() < 1e-15);
        let f = Mechanism::new(Algorithm::FutureRand, 8, 1.0).unwrap();
        assert_eq!(f.estimator_factor(), 1);
    }
}
