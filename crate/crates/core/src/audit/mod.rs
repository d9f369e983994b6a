//! Exact privacy audits by enumeration, gap cross-checks and statistical testers.

mod stats;

use rand::Rng;
use rug::{Assign, Float};
use serde::{Serialize, Serializer};

use crate::dyadic::{DerivativeStream, Horizon};
use crate::precision::{from_usize, inv_pow2, real, rel_diff, PRECISION};
use crate::protocol::{Mechanism, Perturbation};
use crate::randomizer::{
    compose_randomize, exact_output_distribution, gap_lower_bound_expr, RandomizerConfig, SignVector,
};
use crate::{Error, Result};

pub use stats::{chi_square, normal_quantile, ChiSquareOutcome};

/// Largest `k` for [`audit_randomizer`].
pub const MAX_AUDIT_K: usize = 12;
/// Largest horizon for client audits.
pub const MAX_AUDIT_D: usize = 8;
/// Largest `k` for client audits.
pub const MAX_AUDIT_CLIENT_K: usize = 4;

/// Slack on `e^ε` that absorbs extended-precision rounding.
pub const RATIO_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct WorstCase {
    pub input_a: Vec<i8>,
    pub input_b: Vec<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    pub output: Vec<i8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub epsilon: f64,
    #[serde(serialize_with = "float_as_f64")]
    pub max_ratio: Float,
    pub pass: bool,
    pub worst_case: WorstCase,
}

fn float_as_f64<S: Serializer>(x: &Float, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(x.to_f64())
}

impl AuditReport {
    fn new(epsilon: f64, max_ratio: Float, worst_case: WorstCase) -> Self {
        let pass = max_ratio <= ratio_limit(epsilon);
        AuditReport {
            epsilon,
            max_ratio,
            pass,
            worst_case,
        }
    }
}

/// `e^ε·(1 + 1e-9)`.
pub fn ratio_limit(epsilon: f64) -> Float {
    real(epsilon).exp() * real(1.0 + RATIO_SLACK)
}

/// Largest `P[R̃(b) = s] / P[R̃(b') = s]` over every output `s` and input pair.
pub fn audit_randomizer(cfg: &RandomizerConfig, inputs: &[SignVector]) -> Result<AuditReport> {
    let k = cfg.k();
    if k > MAX_AUDIT_K {
        return Err(Error::Capacity {
            what: "k for randomizer audit",
            value: k,
            limit: MAX_AUDIT_K,
        });
    }
    if inputs.is_empty() {
        return Err(Error::invalid("randomizer audit needs at least one input"));
    }
    // Per output: (max prob, arg, min prob, arg).
    let mut extremes: Vec<(Float, usize, Float, usize)> = Vec::new();
    for (i, b) in inputs.iter().enumerate() {
        let table = exact_output_distribution(b, cfg)?;
        if i == 0 {
            extremes = table
                .probabilities()
                .iter()
                .map(|p| (p.clone(), 0, p.clone(), 0))
                .collect();
            continue;
        }
        for (e, p) in extremes.iter_mut().zip(table.probabilities()) {
            if *p > e.0 {
                e.0.assign(p);
                e.1 = i;
            }
            if *p < e.2 {
                e.2.assign(p);
                e.3 = i;
            }
        }
    }
    let mut best: Option<(Float, usize)> = None;
    for (s, e) in extremes.iter().enumerate() {
        let r = Float::with_val(PRECISION, &e.0 / &e.2);
        if best.as_ref().is_none_or(|(m, _)| r > *m) {
            best = Some((r, s));
        }
    }
    let (max_ratio, s) = best.expect("at least one output");
    let e = &extremes[s];
    Ok(AuditReport::new(
        cfg.eps(),
        max_ratio,
        WorstCase {
            input_a: inputs[e.1].bits().to_vec(),
            input_b: inputs[e.3].bits().to_vec(),
            order: None,
            output: SignVector::from_mask(k, s as u64).bits().to_vec(),
        },
    ))
}

/// All `2^k` sign vectors.
pub fn all_sign_vectors(k: usize) -> Vec<SignVector> {
    (0..1u64 << k).map(|m| SignVector::from_mask(k, m)).collect()
}

/// Exact distribution of a client's full transcript `(h, ω)`.
///
/// `probs[h][m]` is the probability of sampling order `h` and sending the
/// bits whose `-1` positions are the set bits of `m`.
#[derive(Debug, Clone)]
pub struct ClientDistribution {
    pub probs: Vec<Vec<Float>>,
}

impl ClientDistribution {
    pub fn total(&self) -> Float {
        let mut acc = Float::with_val(PRECISION, 0);
        for p in self.probs.iter().flatten() {
            acc += p;
        }
        acc
    }
}

fn check_client_caps(horizon: Horizon, k: usize) -> Result<()> {
    if horizon.len() > MAX_AUDIT_D {
        return Err(Error::Capacity {
            what: "d for client audit",
            value: horizon.len(),
            limit: MAX_AUDIT_D,
        });
    }
    if k > MAX_AUDIT_CLIENT_K {
        return Err(Error::Capacity {
            what: "k for client audit",
            value: k,
            limit: MAX_AUDIT_CLIENT_K,
        });
    }
    Ok(())
}

/// Analytic client output distribution for one derivative stream.
pub fn client_output_distribution(
    mech: &Mechanism,
    horizon: Horizon,
    stream: &DerivativeStream,
) -> Result<ClientDistribution> {
    let k = mech.k();
    check_client_caps(horizon, k)?;
    if stream.len() != horizon.len() {
        return Err(Error::invalid(format!(
            "stream length {} differs from horizon {}",
            stream.len(),
            horizon.len()
        )));
    }
    let order_weight = Float::with_val(PRECISION, 1) / horizon.num_orders();
    let keep = Float::with_val(PRECISION, mech.bit_gap() + 1u32) / 2u32;
    let flip = Float::with_val(PRECISION, 1u32 - mech.bit_gap()) / 2u32;
    let marginals = match mech.perturbation() {
        Perturbation::Precomputed(cfg) => {
            let table = exact_output_distribution(&SignVector::ones(k), cfg)?;
            (0..=k).map(|m| table.prefix_marginal(m)).collect()
        }
        _ => Vec::new(),
    };
    let rr = |windows: &[(usize, i8)], mask: u64| -> Float {
        let mut p = Float::with_val(PRECISION, 1);
        for &(j, v) in windows {
            let sent = if mask >> (j - 1) & 1 == 1 { -1 } else { 1 };
            p *= if sent == v { &keep } else { &flip };
        }
        p
    };

    let mut probs = Vec::with_capacity(horizon.num_orders() as usize);
    for h in 0..horizon.num_orders() {
        let len = horizon.len() >> h;
        let windows = stream.nonzero_partial_sums(h);
        let m = windows.len();
        if m > k {
            return Err(Error::SparsityViolation { k, order: h });
        }
        let free = inv_pow2(len - m);
        let row = (0..1u64 << len)
            .map(|mask| {
                let p = match mech.perturbation() {
                    Perturbation::Precomputed(_) => {
                        let mut pattern = 0usize;
                        for (c, &(j, v)) in windows.iter().enumerate() {
                            let sent = if mask >> (j - 1) & 1 == 1 { -1 } else { 1 };
                            if sent * v == -1 {
                                pattern |= 1 << c;
                            }
                        }
                        Float::with_val(PRECISION, &free * &marginals[m][pattern])
                    }
                    Perturbation::Independent { .. } => free.clone() * rr(&windows, mask),
                    Perturbation::SampleOne { .. } => {
                        let mut acc = Float::with_val(PRECISION, 0);
                        for c in 1..=k {
                            let kept = stream.single_change(c);
                            let w = kept
                                .map(|ch| crate::dyadic::window_sums(&[ch], h))
                                .unwrap_or_default();
                            acc += inv_pow2(len - w.len()) * rr(&w, mask);
                        }
                        acc / from_usize(k)
                    }
                };
                p * &order_weight
            })
            .collect();
        probs.push(row);
    }
    Ok(ClientDistribution { probs })
}

/// Compare two client distributions output by output.
pub fn compare_client_distributions(
    epsilon: f64,
    a: (&DerivativeStream, &ClientDistribution),
    b: (&DerivativeStream, &ClientDistribution),
) -> AuditReport {
    let mut best: Option<(Float, bool, u32, u64)> = None;
    for (h, (ra, rb)) in a.1.probs.iter().zip(&b.1.probs).enumerate() {
        for (mask, (pa, pb)) in ra.iter().zip(rb).enumerate() {
            let (ratio, a_over_b) = if pa >= pb {
                (Float::with_val(PRECISION, pa / pb), true)
            } else {
                (Float::with_val(PRECISION, pb / pa), false)
            };
            if best.as_ref().is_none_or(|(m, ..)| ratio > *m) {
                best = Some((ratio, a_over_b, h as u32, mask as u64));
            }
        }
    }
    let (max_ratio, a_over_b, h, mask) = best.expect("non-empty distribution");
    let (hi, lo) = if a_over_b { (a.0, b.0) } else { (b.0, a.0) };
    let len = a.0.len() >> h;
    AuditReport::new(
        epsilon,
        max_ratio,
        WorstCase {
            input_a: hi.entries(),
            input_b: lo.entries(),
            order: Some(h),
            output: SignVector::from_mask(len, mask).bits().to_vec(),
        },
    )
}

/// Client-level audit of the composed-randomizer protocol.
pub fn audit_client(
    d: usize,
    k: usize,
    eps: f64,
    stream_a: &DerivativeStream,
    stream_b: &DerivativeStream,
) -> Result<AuditReport> {
    let mech = Mechanism::future_rand(RandomizerConfig::future_rand(k, eps)?);
    audit_client_with(&mech, d, stream_a, stream_b)
}

/// Client-level audit for any mechanism.
pub fn audit_client_with(
    mech: &Mechanism,
    d: usize,
    stream_a: &DerivativeStream,
    stream_b: &DerivativeStream,
) -> Result<AuditReport> {
    let horizon = Horizon::new(d)?;
    let da = client_output_distribution(mech, horizon, stream_a)?;
    let db = client_output_distribution(mech, horizon, stream_b)?;
    Ok(compare_client_distributions(mech.eps(), (stream_a, &da), (stream_b, &db)))
}

/// Every derivative stream of length `d` with at most `k` changes.
pub fn all_streams(d: usize, k: usize) -> Result<Vec<DerivativeStream>> {
    if d > 20 {
        return Err(Error::Capacity {
            what: "d for stream enumeration",
            value: d,
            limit: 20,
        });
    }
    let mut out = Vec::new();
    for bits in 0u32..1 << d {
        let series: Vec<u8> = (0..d).map(|i| (bits >> i & 1) as u8).collect();
        let stream = DerivativeStream::derive(&series)?;
        if stream.nnz() <= k {
            out.push(stream);
        }
    }
    Ok(out)
}

/// Outcome of the three-way ⟨gap⟩ cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct GapVerification {
    pub gap: f64,
    /// Largest relative deviation of any enumerated coordinate bias (k ≤ 12 only).
    pub enumeration_rel_err: Option<f64>,
    pub enumeration_pass: Option<bool>,
    pub monte_carlo_mean: f64,
    pub monte_carlo_sigma: f64,
    pub monte_carlo_pass: bool,
    pub lower_bound: Option<f64>,
    pub lower_bound_pass: Option<bool>,
    pub pass: bool,
}

/// Check ⟨gap⟩ against enumeration, a Monte-Carlo marginal and the lower-bound sum.
pub fn verify_gap<R: Rng + ?Sized>(cfg: &RandomizerConfig, draws: usize, rng: &mut R) -> Result<GapVerification> {
    if draws < 2 {
        return Err(Error::invalid("Monte-Carlo leg needs at least two draws"));
    }
    let k = cfg.k();
    let gap = cfg.gap();
    let (enumeration_rel_err, enumeration_pass) = if k <= MAX_AUDIT_K {
        let table = exact_output_distribution(&SignVector::ones(k), cfg)?;
        let worst = (0..k)
            .map(|i| rel_diff(&table.coordinate_bias(i), gap))
            .fold(0.0, f64::max);
        (Some(worst), Some(worst <= 1e-10))
    } else {
        (None, None)
    };

    let ones = SignVector::ones(k);
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..draws {
        let s = compose_randomize(&ones, cfg, rng)?;
        let agree: i64 = s.bits().iter().map(|&b| b as i64).sum();
        let x = agree as f64 / k as f64;
        sum += x;
        sum_sq += x * x;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean) / (n - 1.0);
    let sigma = (var.max(0.0) / n).sqrt();
    let monte_carlo_pass = (mean - gap.to_f64()).abs() <= 4.0 * sigma;

    let lb = gap_lower_bound_expr(cfg);
    let lower_bound_pass = lb.as_ref().map(|l| *l > 0 && gap >= l);
    let pass = enumeration_pass.unwrap_or(true) && monte_carlo_pass && lower_bound_pass.unwrap_or(true);
    Ok(GapVerification {
        gap: gap.to_f64(),
        enumeration_rel_err,
        enumeration_pass,
        monte_carlo_mean: mean,
        monte_carlo_sigma: sigma,
        monte_carlo_pass,
        lower_bound: lb.map(|l| l.to_f64()),
        lower_bound_pass,
        pass,
    })
}
