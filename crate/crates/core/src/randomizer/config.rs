use std::cmp::Ordering;

use rug::{Float, Integer};
use serde::Serialize;

use super::sampling::OutsideSampler;
use crate::precision::{binomial_row, from_int, from_usize, inv_pow2, real, PRECISION};
use crate::{Error, Result};

/// Largest sparsity bound accepted by any configuration.
pub const MAX_K: usize = crate::precision::MAX_BINOMIAL_K;

/// Every derived parameter of the composed randomizer.
#[derive(Debug, Clone)]
pub struct RandomizerConfig {
    eps: f64,
    k: usize,
    eps_tilde: Float,
    p: Float,
    lb: usize,
    ub: usize,
    /// `g(0), ..., g(k)`.
    weights: Vec<Float>,
    q_star: Option<Float>,
    gap: Float,
    flip_p: f64,
    pub(super) outside: OutsideSampler,
}

/// Plain-number view of a configuration, for reports and the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigSummary {
    pub eps: f64,
    pub k: usize,
    pub eps_tilde: f64,
    pub p: f64,
    pub lb: usize,
    pub ub: usize,
    pub q_star: Option<f64>,
    pub gap: f64,
}

impl RandomizerConfig {
    /// The configuration with ε̃ = ε/(5√k) and the rounded annulus
    /// `[max(0, ⌈kp - 2√k⌉), min(k, ⌊(k/ε̃)·ln(2e^ε̃/(e^ε̃+1))⌋)]`.
    pub fn future_rand(k: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::config(format!("epsilon {eps} outside (0, 1]")));
        }
        check_k(k)?;
        let eps_tilde = real(eps) / from_usize(k).sqrt() / 5u32;
        let (lb, ub) = annulus_bounds(k, &eps_tilde)?;
        Self::with_annulus(k, eps, eps_tilde, lb, ub)
    }

    /// A composed randomizer with an explicit per-bit budget and annulus.
    ///
    /// `eps` is the total budget the mechanism claims; it is recorded for
    /// audits and not otherwise used.
    pub fn with_annulus(k: usize, eps: f64, eps_tilde: Float, lb: usize, ub: usize) -> Result<Self> {
        check_k(k)?;
        if eps_tilde.cmp0() != Some(Ordering::Greater) || !eps_tilde.is_finite() {
            return Err(Error::config(format!("per-bit budget {eps_tilde} must be positive")));
        }
        if lb > ub || ub > k {
            return Err(Error::config(format!(
                "annulus [{lb}, {ub}] is empty or exceeds k = {k}"
            )));
        }
        let eps_tilde = Float::with_val(PRECISION, eps_tilde);
        let p = flip_prob(&eps_tilde);
        let row = binomial_row(k);
        let weights = weight_table(k, &p);
        let q_star = q_star_with(&row, &weights, lb, ub);
        let gap = gap_simplified_with(&row, &weights, lb, ub, q_star.as_ref());
        if !(gap > 0 && gap < 1) {
            return Err(Error::config(format!(
                "gap {} outside (0, 1) for k = {k}, annulus [{lb}, {ub}]",
                gap.to_f64()
            )));
        }
        let outside = OutsideSampler::new(&row, lb, ub);
        Ok(RandomizerConfig {
            eps,
            k,
            flip_p: p.to_f64(),
            eps_tilde,
            p,
            lb,
            ub,
            weights,
            q_star,
            gap,
            outside,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eps_tilde(&self) -> &Float {
        &self.eps_tilde
    }

    /// Flip probability `p = 1/(e^ε̃ + 1)`.
    pub fn p(&self) -> &Float {
        &self.p
    }

    pub(crate) fn flip_p(&self) -> f64 {
        self.flip_p
    }

    pub fn lb(&self) -> usize {
        self.lb
    }

    pub fn ub(&self) -> usize {
        self.ub
    }

    pub fn in_annulus(&self, distance: usize) -> bool {
        (self.lb..=self.ub).contains(&distance)
    }

    /// True when some distance lies outside `[lb, ub]`.
    pub fn has_complement(&self) -> bool {
        self.lb > 0 || self.ub < self.k
    }

    /// `g(i)` from the cached table.
    pub fn weight(&self, i: usize) -> &Float {
        &self.weights[i]
    }

    /// Common probability of every output outside the annulus; `None` when the
    /// annulus is all of `[0, k]`.
    pub fn q_star(&self) -> Option<&Float> {
        self.q_star.as_ref()
    }

    /// ⟨gap⟩ = P[b̃ᵢ = bᵢ] - P[b̃ᵢ = -bᵢ].
    pub fn gap(&self) -> &Float {
        &self.gap
    }

    /// Exact probability of an output at Hamming distance `distance` from the input.
    pub fn output_probability(&self, distance: usize) -> &Float {
        if self.in_annulus(distance) {
            &self.weights[distance]
        } else {
            self.q_star
                .as_ref()
                .expect("distance outside the annulus implies a complement")
        }
    }

    pub fn summary(&self) -> ConfigSummary {
        ConfigSummary {
            eps: self.eps,
            k: self.k,
            eps_tilde: self.eps_tilde.to_f64(),
            p: self.p.to_f64(),
            lb: self.lb,
            ub: self.ub,
            q_star: self.q_star.as_ref().map(Float::to_f64),
            gap: self.gap.to_f64(),
        }
    }
}

fn check_k(k: usize) -> Result<()> {
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

fn flip_prob(eps_tilde: &Float) -> Float {
    let e = Float::with_val(PRECISION, eps_tilde.exp_ref());
    Float::with_val(PRECISION, 1) / (e + 1u32)
}

/// Unrounded `(kp - 2√k, (k/ε̃)·ln(2e^ε̃/(e^ε̃+1)))`.
pub fn annulus_real_bounds(k: usize, eps_tilde: &Float) -> (Float, Float) {
    let kf = from_usize(k);
    let p = flip_prob(eps_tilde);
    let lower = Float::with_val(PRECISION, &kf * &p) - Float::with_val(PRECISION, kf.sqrt_ref()) * 2u32;
    let e = Float::with_val(PRECISION, eps_tilde.exp_ref());
    let ratio = Float::with_val(PRECISION, &e * 2u32) / (e + 1u32);
    let upper = kf / eps_tilde * ratio.ln();
    (lower, upper)
}

/// Integer annulus: lower bound rounded up and clamped at 0, upper bound
/// rounded down and clamped at `k`.
pub fn annulus_bounds(k: usize, eps_tilde: &Float) -> Result<(usize, usize)> {
    if k == 0 || eps_tilde.cmp0() != Some(Ordering::Greater) {
        return Err(Error::config("annulus needs k >= 1 and a positive per-bit budget"));
    }
    let (lower, upper) = annulus_real_bounds(k, eps_tilde);
    let lb = to_i64(lower.ceil()).max(0);
    let ub = to_i64(upper.floor()).min(k as i64);
    if lb > ub {
        return Err(Error::config(format!(
            "annulus collapses after rounding: lb = {lb} > ub = {ub} (k = {k})"
        )));
    }
    Ok((lb as usize, ub as usize))
}

fn to_i64(x: Float) -> i64 {
    x.to_integer()
        .and_then(|i| i.to_i64())
        .expect("annulus bound is a finite small integer")
}

/// `g(i) = p^i (1-p)^(k-i)`, evaluated in the log domain.
pub fn g_weight(i: usize, k: usize, p: &Float) -> Float {
    g_weight_real(&from_usize(i), k, p)
}

/// `g` at a real-valued distance.
pub fn g_weight_real(x: &Float, k: usize, p: &Float) -> Float {
    let ln_p = Float::with_val(PRECISION, p.ln_ref());
    let q = Float::with_val(PRECISION, 1u32 - p);
    let ln_q = q.ln();
    let rest = from_usize(k) - x;
    let log_g = Float::with_val(PRECISION, x * ln_p) + rest * ln_q;
    log_g.exp()
}

fn weight_table(k: usize, p: &Float) -> Vec<Float> {
    let ln_p = Float::with_val(PRECISION, p.ln_ref());
    let ln_q = Float::with_val(PRECISION, 1u32 - p).ln();
    (0..=k)
        .map(|i| {
            let a = Float::with_val(PRECISION, &ln_p * i as u64);
            let b = Float::with_val(PRECISION, &ln_q * (k - i) as u64);
            (a + b).exp()
        })
        .collect()
}

fn outside(k: usize, lb: usize, ub: usize) -> impl Iterator<Item = usize> {
    (0..=k).filter(move |i| *i < lb || *i > ub)
}

fn q_star_with(row: &[Integer], weights: &[Float], lb: usize, ub: usize) -> Option<Float> {
    let k = row.len() - 1;
    let mut num = Float::with_val(PRECISION, 0);
    let mut den = Integer::new();
    let mut any = false;
    for i in outside(k, lb, ub) {
        any = true;
        num += from_int(&row[i]) * &weights[i];
        den += &row[i];
    }
    any.then(|| num / from_int(&den))
}

/// q* = Σ_{i∉[lb,ub]} C(k,i)·g(i) / Σ_{i∉[lb,ub]} C(k,i).
pub fn q_star(k: usize, lb: usize, ub: usize, p: &Float) -> Result<Float> {
    check_k(k)?;
    q_star_with(&binomial_row(k), &weight_table(k, p), lb, ub)
        .ok_or_else(|| Error::config(format!("annulus [{lb}, {ub}] leaves no complement in [0, {k}]")))
}

fn signed_share(k: usize, i: usize) -> Float {
    (from_usize(k) - 2 * i as u64) / from_usize(k)
}

fn gap_simplified_with(
    row: &[Integer],
    weights: &[Float],
    lb: usize,
    ub: usize,
    q_star: Option<&Float>,
) -> Float {
    let k = row.len() - 1;
    let zero = Float::with_val(PRECISION, 0);
    let q = q_star.unwrap_or(&zero);
    let mut acc = Float::with_val(PRECISION, 0);
    for i in lb..=ub {
        let excess = Float::with_val(PRECISION, &weights[i] - q);
        acc += from_int(&row[i]) * excess * signed_share(k, i);
    }
    acc
}

fn gap_two_sum_with(
    row: &[Integer],
    weights: &[Float],
    lb: usize,
    ub: usize,
    q_star: Option<&Float>,
) -> Float {
    let k = row.len() - 1;
    let mut inside = Float::with_val(PRECISION, 0);
    for i in lb..=ub {
        inside += from_int(&row[i]) * &weights[i] * signed_share(k, i);
    }
    let mut rest = Float::with_val(PRECISION, 0);
    if let Some(q) = q_star {
        for i in outside(k, lb, ub) {
            rest += from_int(&row[i]) * signed_share(k, i);
        }
        rest *= q;
    }
    inside + rest
}

/// ⟨gap⟩ = Σ_{i=lb}^{ub} C(k,i)·(g(i) - q*)·(k-2i)/k.
pub fn gap_simplified(k: usize, lb: usize, ub: usize, p: &Float) -> Result<Float> {
    check_k(k)?;
    let row = binomial_row(k);
    let weights = weight_table(k, p);
    let q = q_star_with(&row, &weights, lb, ub);
    Ok(gap_simplified_with(&row, &weights, lb, ub, q.as_ref()))
}

/// ⟨gap⟩ via the unsimplified form
/// Σ_{i=lb}^{ub} C(k,i)·g(i)·(k-2i)/k + q*·Σ_{i∉[lb,ub]} C(k,i)·(k-2i)/k.
pub fn gap_two_sum(k: usize, lb: usize, ub: usize, p: &Float) -> Result<Float> {
    check_k(k)?;
    let row = binomial_row(k);
    let weights = weight_table(k, p);
    let q = q_star_with(&row, &weights, lb, ub);
    Ok(gap_two_sum_with(&row, &weights, lb, ub, q.as_ref()))
}

/// The certified lower bound
/// Σ_{i=⌈Ūb-2√k⌉}^{⌊Ūb-√k/2⌋} C(k,i)·(g(i) - 2^-k)·(k-2i)/k,
/// with Ūb the unrounded upper annulus bound for the config's ε̃.
///
/// `None` when the rounded range is empty or leaves `[0, k]` (small k).
pub fn gap_lower_bound_expr(cfg: &RandomizerConfig) -> Option<Float> {
    let k = cfg.k();
    let (_, ub_real) = annulus_real_bounds(k, cfg.eps_tilde());
    let root = from_usize(k).sqrt();
    let lo = to_i64(Float::with_val(PRECISION, &ub_real - Float::with_val(PRECISION, &root * 2u32)).ceil());
    let hi = to_i64((ub_real - root / 2u32).floor());
    if lo > hi || lo < 0 || hi > k as i64 {
        return None;
    }
    let row = binomial_row(k);
    let floor_prob = inv_pow2(k);
    let mut acc = Float::with_val(PRECISION, 0);
    for (i, c) in row.iter().enumerate().take(hi as usize + 1).skip(lo as usize) {
        let excess = Float::with_val(PRECISION, cfg.weight(i) - &floor_prob);
        acc += from_int(c) * excess * signed_share(k, i);
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::rel_diff;
    use rug::ops::Pow;

    fn cfg(k: usize, eps: f64) -> RandomizerConfig {
        RandomizerConfig::future_rand(k, eps).unwrap()
    }

    #[test]
    fn k4_eps1_bounds() {
        let c = cfg(4, 1.0);
        assert!((c.eps_tilde().to_f64() - 0.1).abs() < 1e-15);
        let (lower, upper) = annulus_real_bounds(4, c.eps_tilde());
        assert!(lower < 0);
        // Ūb = 40·ln(2e^0.1/(e^0.1+1)) = 1.9500208...
        assert!((upper.to_f64() - 1.950_020_819).abs() < 1e-9);
        assert_eq!((c.lb(), c.ub()), (0, 1));
    }

    #[test]
    fn rejects_out_of_range_epsilon_and_k() {
        assert!(RandomizerConfig::future_rand(4, 1.5).is_err());
        assert!(RandomizerConfig::future_rand(4, 0.0).is_err());
        assert!(RandomizerConfig::future_rand(0, 0.5).is_err());
        assert!(matches!(
            RandomizerConfig::future_rand(MAX_K + 1, 0.5),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn full_annulus_reduces_to_independent_rr() {
        let et = real(0.3);
        let c = RandomizerConfig::with_annulus(6, 1.0, et.clone(), 0, 6).unwrap();
        assert!(c.q_star().is_none());
        let e = real(0.3f64).exp();
        let rr_gap = Float::with_val(PRECISION, &e - 1u32) / (e + 1u32);
        assert!(rel_diff(c.gap(), &rr_gap) < 1e-30);
    }

    #[test]
    fn weights_are_normalised_and_decreasing() {
        for k in [1usize, 7, 64, 1000] {
            let c = cfg(k, 1.0);
            let row = binomial_row(k);
            let total: Float = row
                .iter()
                .enumerate()
                .map(|(i, b)| from_int(b) * c.weight(i))
                .fold(Float::with_val(PRECISION, 0), |a, x| a + x);
            assert!((total.to_f64() - 1.0).abs() < 1e-12, "k = {k}");
            assert!((1..=k).all(|i| c.weight(i) < c.weight(i - 1)));
        }
    }

    #[test]
    fn g_endpoints() {
        let p = real(0.3);
        let q = Float::with_val(PRECISION, 1u32 - &p);
        assert!(rel_diff(&g_weight(0, 5, &p), &q.clone().pow(5u32)) < 1e-30);
        assert!(rel_diff(&g_weight(5, 5, &p), &p.clone().pow(5u32)) < 1e-30);
    }

    #[test]
    fn q_star_two_term_case() {
        let p = real(0.4);
        let expected = (real(0.6).pow(2u32) + real(0.4).pow(2u32)) / 2u32;
        let got = q_star(2, 1, 1, &p).unwrap();
        assert!(rel_diff(&got, &expected) < 1e-30);
    }

    #[test]
    fn q_star_uniform_weights() {
        let got = q_star(5, 0, 4, &real(0.5)).unwrap();
        assert!(rel_diff(&got, &inv_pow2(5)) < 1e-30);
    }

    #[test]
    fn q_star_empty_complement_is_an_error() {
        assert!(matches!(q_star(3, 0, 3, &real(0.4)), Err(Error::Configuration(_))));
    }

    #[test]
    fn bound_ordering_invariants() {
        for k in [1usize, 2, 3, 10, 64, 256, 1024, 4096] {
            for eps in [0.25, 0.5, 1.0] {
                let c = cfg(k, eps);
                assert!(c.lb() <= c.ub() && c.ub() <= k);
                let two_k = inv_pow2(k);
                assert!(*c.weight(c.ub()) >= two_k, "g(ub) >= 2^-k at k = {k}");
                if let Some(q) = c.q_star() {
                    assert!(*q <= two_k, "q* <= 2^-k at k = {k}, eps = {eps}");
                }
                assert!(c.p() > &0 && c.p() < &0.5);
            }
        }
    }

    #[test]
    fn simplified_and_two_sum_gap_agree() {
        for k in [1usize, 2, 5, 16, 64, 256, 1024, 4096] {
            let c = cfg(k, 1.0);
            let a = gap_simplified(k, c.lb(), c.ub(), c.p()).unwrap();
            let b = gap_two_sum(k, c.lb(), c.ub(), c.p()).unwrap();
            assert!(rel_diff(&a, &b) < 1e-12, "k = {k}");
            assert!(rel_diff(&a, c.gap()) == 0.0);
        }
    }

    #[test]
    fn lower_bound_not_applicable_for_tiny_k() {
        assert!(gap_lower_bound_expr(&cfg(1, 1.0)).is_none());
        assert!(gap_lower_bound_expr(&cfg(4, 1.0)).is_none());
    }

    #[test]
    fn lower_bound_holds() {
        for k in [16usize, 64, 256, 1024] {
            let c = cfg(k, 1.0);
            let lower = gap_lower_bound_expr(&c).expect("range applies");
            assert!(lower > 0 && lower <= *c.gap(), "k = {k}");
        }
    }
}
