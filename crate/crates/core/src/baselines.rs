//! Comparison randomizers that plug into the same client/server protocol.
//!
//! * `naive`: every non-zero partial sum is perturbed independently with
//!   budget ε/k, so ⟨gap⟩ shrinks like ε/k.
//! * `sample_one`: the client keeps a single change and perturbs it with
//!   budget ε/2; the server multiplies its estimator by k to undo the sampling.
//! * `bns19`: a composed randomizer with an annulus symmetric around kp, of
//!   half-width √((k/2)·ln(2/λ)), and a smaller per-bit budget.

use rug::ops::Pow;
use rug::Float;
use serde::Serialize;

use crate::precision::{from_usize, real, PRECISION};
use crate::protocol::Algorithm;
use crate::randomizer::{RandomizerConfig, MAX_K};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum BaselineKind {
    Naive {
        k: usize,
        eps: f64,
        eps_tilde: Float,
        gap: Float,
    },
    SampleOne {
        k: usize,
        eps: f64,
        eps_tilde: Float,
        gap: Float,
    },
    Bns19 {
        lambda: Float,
        config: RandomizerConfig,
    },
}

/// Numbers describing a baseline, for reports.
#[derive(Debug, Clone, Serialize)]
pub struct BaselineSummary {
    pub algorithm: Algorithm,
    pub k: usize,
    pub eps: f64,
    pub eps_tilde: f64,
    pub gap: f64,
    pub effective_gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annulus: Option<(usize, usize)>,
}

impl BaselineKind {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            BaselineKind::Naive { .. } => Algorithm::Naive,
            BaselineKind::SampleOne { .. } => Algorithm::SampleOne,
            BaselineKind::Bns19 { .. } => Algorithm::Bns19,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            BaselineKind::Naive { k, .. } | BaselineKind::SampleOne { k, .. } => *k,
            BaselineKind::Bns19 { config, .. } => config.k(),
        }
    }

    pub fn eps(&self) -> f64 {
        match self {
            BaselineKind::Naive { eps, .. } | BaselineKind::SampleOne { eps, .. } => *eps,
            BaselineKind::Bns19 { config, .. } => config.eps(),
        }
    }

    /// Per-bit budget ε̃.
    pub fn eps_tilde(&self) -> &Float {
        match self {
            BaselineKind::Naive { eps_tilde, .. } | BaselineKind::SampleOne { eps_tilde, .. } => {
                eps_tilde
            }
            BaselineKind::Bns19 { config, .. } => config.eps_tilde(),
        }
    }

    /// Bias of a single reported bit, `P[keep] - P[flip]`.
    pub fn gap(&self) -> &Float {
        match self {
            BaselineKind::Naive { gap, .. } | BaselineKind::SampleOne { gap, .. } => gap,
            BaselineKind::Bns19 { config, .. } => config.gap(),
        }
    }

    /// Extra multiplier the server applies on top of `(1 + log d)/⟨gap⟩`.
    pub fn estimator_factor(&self) -> u64 {
        match self {
            BaselineKind::SampleOne { k, .. } => *k as u64,
            _ => 1,
        }
    }

    /// ⟨gap⟩ divided by the estimator factor; this is what the error scales with.
    pub fn effective_gap(&self) -> Float {
        Float::with_val(PRECISION, self.gap() / self.estimator_factor())
    }

    pub fn summary(&self) -> BaselineSummary {
        let (lambda, annulus) = match self {
            BaselineKind::Bns19 { lambda, config } => {
                (Some(lambda.to_f64()), Some((config.lb(), config.ub())))
            }
            _ => (None, None),
        };
        BaselineSummary {
            algorithm: self.algorithm(),
            k: self.k(),
            eps: self.eps(),
            eps_tilde: self.eps_tilde().to_f64(),
            gap: self.gap().to_f64(),
            effective_gap: self.effective_gap().to_f64(),
            lambda,
            annulus,
        }
    }
}

/// `(e^x - 1)/(e^x + 1)`, the bias of plain randomized response.
pub fn rr_gap(eps_tilde: &Float) -> Float {
    let e = Float::with_val(PRECISION, eps_tilde.exp_ref());
    Float::with_val(PRECISION, &e - 1u32) / (e + 1u32)
}

fn check_common(k: usize, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("epsilon {eps} must be positive and finite")));
    }
    if k == 0 {
        return Err(Error::config("sparsity bound k must be at least 1"));
    }
    if k > MAX_K {
        return Err(Error::Capacity {
            what: "k",
            value: k,
            limit: MAX_K,
        });
    }
    Ok(())
}

/// Independent per-coordinate RR with budget ε/k.
pub fn naive_config(k: usize, eps: f64) -> Result<BaselineKind> {
    check_common(k, eps)?;
    let eps_tilde = real(eps) / from_usize(k);
    let gap = rr_gap(&eps_tilde);
    Ok(BaselineKind::Naive { k, eps, eps_tilde, gap })
}

/// Keep one change, perturb it with budget ε/2, scale the estimator by k.
pub fn sample_one_config(k: usize, eps: f64) -> Result<BaselineKind> {
    check_common(k, eps)?;
    let eps_tilde = real(eps) / 2u32;
    let gap = rr_gap(&eps_tilde);
    Ok(BaselineKind::SampleOne { k, eps, eps_tilde, gap })
}

/// Symmetric-annulus composed randomizer with
/// λ = ε/(12(k+1)·√(1 + ln(1/ε))) and ε̃ = ε/(6·√(k·ln(1/λ))).
pub fn bns19_config(k: usize, eps: f64) -> Result<BaselineKind> {
    check_common(k, eps)?;
    if eps > 1.0 {
        return Err(Error::config(format!("epsilon {eps} outside (0, 1]")));
    }
    let (lambda, eps_tilde) = bns19_parameters(k, eps);
    let kf = from_usize(k);
    let limit = Float::with_val(PRECISION, kf.sqrt_ref()) * &eps_tilde / (2 * (k as u64 + 1));
    let limit = limit.pow(Float::with_val(PRECISION, 2) / 3u32);
    if !(lambda > 0 && lambda < limit) {
        return Err(Error::config(format!(
            "0 < λ < (ε̃·√k/(2(k+1)))^(2/3) violated: λ = {}, bound = {}",
            lambda.to_f64(),
            limit.to_f64()
        )));
    }
    let e = Float::with_val(PRECISION, eps_tilde.exp_ref());
    let p = Float::with_val(PRECISION, 1) / (e + 1u32);
    let center = Float::with_val(PRECISION, &kf * &p);
    let two_over_lambda = Float::with_val(PRECISION, 2) / &lambda;
    let half_width = (kf / 2u32 * two_over_lambda.ln()).sqrt();
    let lo = Float::with_val(PRECISION, &center - &half_width).ceil();
    let hi = (center + half_width).floor();
    let lb = lo.to_integer().and_then(|v| v.to_i64()).unwrap_or(0).max(0) as usize;
    let ub = hi
        .to_integer()
        .and_then(|v| v.to_i64())
        .unwrap_or(k as i64)
        .min(k as i64);
    if (lb as i64) > ub {
        return Err(Error::config(format!(
            "symmetric annulus collapses after rounding at k = {k}"
        )));
    }
    let config = RandomizerConfig::with_annulus(k, eps, eps_tilde, lb, ub as usize)?;
    Ok(BaselineKind::Bns19 { lambda, config })
}

/// `(λ, ε̃)` for the symmetric-annulus randomizer.
pub fn bns19_parameters(k: usize, eps: f64) -> (Float, Float) {
    let e = real(eps);
    let inv_ln = Float::with_val(PRECISION, 1u32 / &e).ln() + 1u32;
    let lambda = Float::with_val(PRECISION, &e / (12 * (k as u64 + 1))) / inv_ln.sqrt();
    let ln_inv_lambda = Float::with_val(PRECISION, 1u32 / &lambda).ln();
    let eps_tilde = e / (from_usize(k) * ln_inv_lambda).sqrt() / 6u32;
    (lambda, eps_tilde)
}

/// Config for any of the three baselines.
pub fn baseline_config(algorithm: Algorithm, k: usize, eps: f64) -> Result<BaselineKind> {
    match algorithm {
        Algorithm::Naive => naive_config(k, eps),
        Algorithm::SampleOne => sample_one_config(k, eps),
        Algorithm::Bns19 => bns19_config(k, eps),
        Algorithm::FutureRand => Err(Error::config("futurerand is not a baseline")),
    }
}
