use rug::Float;

use super::{RandomizerConfig, SignVector};
use crate::precision::PRECISION;
use crate::{Error, Result};

/// Largest `k` for which the full `2^k` output table is built.
pub const MAX_ENUMERATION_K: usize = 20;

/// Exact output distribution of the composed randomizer on one input.
///
/// Entry `m` holds the probability of the sign vector whose `-1` coordinates
/// are the set bits of `m`.
#[derive(Debug, Clone)]
pub struct DistributionTable {
    k: usize,
    probs: Vec<Float>,
}

impl DistributionTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn probabilities(&self) -> &[Float] {
        &self.probs
    }

    pub fn prob(&self, s: &SignVector) -> &Float {
        &self.probs[s.to_mask() as usize]
    }

    pub fn prob_mask(&self, mask: u64) -> &Float {
        &self.probs[mask as usize]
    }

    pub fn total(&self) -> Float {
        let mut acc = Float::with_val(PRECISION, 0);
        for p in &self.probs {
            acc += p;
        }
        acc
    }

    /// `P[sᵢ = +1] - P[sᵢ = -1]`.
    pub fn coordinate_bias(&self, i: usize) -> Float {
        let mut acc = Float::with_val(PRECISION, 0);
        for (mask, p) in self.probs.iter().enumerate() {
            if mask >> i & 1 == 0 {
                acc += p;
            } else {
                acc -= p;
            }
        }
        acc
    }

    /// Marginal of the first `m` coordinates, indexed by the low `m` mask bits.
    pub fn prefix_marginal(&self, m: usize) -> Vec<Float> {
        assert!(m <= self.k, "prefix length {m} exceeds k = {}", self.k);
        let mut out = vec![Float::with_val(PRECISION, 0); 1 << m];
        let low = (1usize << m) - 1;
        for (mask, p) in self.probs.iter().enumerate() {
            out[mask & low] += p;
        }
        out
    }
}

/// Enumerate `P[R̃(b) = s]` for all `2^k` outputs: `g(dist)` inside the
/// annulus, `q*` outside.
pub fn exact_output_distribution(b: &SignVector, cfg: &RandomizerConfig) -> Result<DistributionTable> {
    let k = cfg.k();
    if k > MAX_ENUMERATION_K {
        return Err(Error::Capacity {
            what: "k for exact enumeration",
            value: k,
            limit: MAX_ENUMERATION_K,
        });
    }
    if b.len() != k {
        return Err(Error::invalid(format!("input has length {}, expected {k}", b.len())));
    }
    let base = b.to_mask();
    let probs = (0..1u64 << k)
        .map(|s| cfg.output_probability((s ^ base).count_ones() as usize).clone())
        .collect();
    Ok(DistributionTable { k, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{real, rel_diff};

    #[test]
    fn single_bit_is_plain_rr() {
        let cfg = RandomizerConfig::with_annulus(1, 1.0, real(0.2), 0, 1).unwrap();
        let t = exact_output_distribution(&SignVector::new(vec![-1]).unwrap(), &cfg).unwrap();
        let p = cfg.p().clone();
        assert!(rel_diff(t.prob_mask(1), &(Float::with_val(PRECISION, 1) - &p)) < 1e-30);
        assert!(rel_diff(t.prob_mask(0), &p) < 1e-30);
    }

    #[test]
    fn tables_sum_to_one() {
        for k in 1..=12 {
            let cfg = RandomizerConfig::future_rand(k, 1.0).unwrap();
            let t = exact_output_distribution(&SignVector::ones(k), &cfg).unwrap();
            assert!((t.total().to_f64() - 1.0).abs() < 1e-12, "k = {k}");
            assert!(t.probabilities().iter().all(|p| *p > 0));
        }
    }

    #[test]
    fn k3_ratio_within_budget() {
        let cfg = RandomizerConfig::future_rand(3, 1.0).unwrap();
        let t = exact_output_distribution(&SignVector::ones(3), &cfg).unwrap();
        let max = t.probabilities().iter().max_by(|a, b| a.total_cmp(b)).unwrap();
        let min = t.probabilities().iter().min_by(|a, b| a.total_cmp(b)).unwrap();
        assert!(Float::with_val(PRECISION, max / min) <= real(1.0).exp());
    }

    #[test]
    fn marginals_reproduce_gap() {
        for k in [2usize, 4, 7, 10] {
            let cfg = RandomizerConfig::future_rand(k, 1.0).unwrap();
            let b = SignVector::from_mask(k, 0b101);
            let t = exact_output_distribution(&b, &cfg).unwrap();
            for i in 0..k {
                let bias = t.coordinate_bias(i) * b.get(i) as i32;
                assert!(rel_diff(&bias, cfg.gap()) < 1e-12, "k = {k}, coordinate {i}");
            }
        }
    }

    #[test]
    fn prefix_marginal_sums_match() {
        let cfg = RandomizerConfig::future_rand(4, 1.0).unwrap();
        let t = exact_output_distribution(&SignVector::ones(4), &cfg).unwrap();
        let m2 = t.prefix_marginal(2);
        assert_eq!(m2.len(), 4);
        let manual = t.prob_mask(0b0001).clone()
            + t.prob_mask(0b0101)
            + t.prob_mask(0b1001)
            + t.prob_mask(0b1101);
        assert!(rel_diff(&m2[1], &manual) < 1e-30);
    }

    #[test]
    fn capacity_enforced() {
        let cfg = RandomizerConfig::future_rand(21, 1.0).unwrap();
        assert!(matches!(
            exact_output_distribution(&SignVector::ones(21), &cfg),
            Err(Error::Capacity { .. })
        ));
    }
}
