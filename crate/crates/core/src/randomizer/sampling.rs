use rand::seq::index;
use rand::Rng;
use rug::{Float, Integer};

use super::{flip_with, RandomizerConfig, SignVector};
use crate::precision::PRECISION;
use crate::{Error, Result};

/// Distance distribution of a uniform draw from the annulus complement.
///
/// A uniform sign vector outside the annulus has Hamming distance `i` with
/// probability proportional to `C(k, i)`. The cumulative weights are exact
/// integer prefix sums, each divided once by the exact total.
#[derive(Debug, Clone)]
pub(crate) struct OutsideSampler {
    distances: Vec<usize>,
    cdf: Vec<f64>,
}

impl OutsideSampler {
    pub(crate) fn new(row: &[Integer], lb: usize, ub: usize) -> Self {
        let k = row.len() - 1;
        let distances: Vec<usize> = (0..=k).filter(|i| *i < lb || *i > ub).collect();
        let total: Integer = distances.iter().map(|&i| &row[i]).sum();
        let mut running = Integer::new();
        let mut cdf = Vec::with_capacity(distances.len());
        for &i in &distances {
            running += &row[i];
            let frac = Float::with_val(PRECISION, &running) / Float::with_val(PRECISION, &total);
            cdf.push(frac.to_f64());
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        OutsideSampler { distances, cdf }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub(crate) fn sample_distance<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.distances[idx.min(self.distances.len() - 1)]
    }
}

/// Uniform draw from the sign vectors whose distance to `b` lies outside `[lb, ub]`.
///
/// Two stages: a distance `i` with weight `C(k, i)`, then a uniformly random
/// `i`-subset of coordinates to flip.
pub fn sample_outside_annulus<R: Rng + ?Sized>(
    b: &SignVector,
    cfg: &RandomizerConfig,
    rng: &mut R,
) -> Result<SignVector> {
    check_len(b, cfg)?;
    if cfg.outside.is_empty() {
        return Err(Error::config(format!(
            "annulus [{}, {}] covers every distance; nothing to resample",
            cfg.lb(),
            cfg.ub()
        )));
    }
    let distance = cfg.outside.sample_distance(rng);
    let mut out = b.clone();
    for i in index::sample(rng, cfg.k(), distance) {
        out.flip(i);
    }
    Ok(out)
}

/// The composed randomizer: coordinate-wise RR, then a fresh uniform draw
/// from the complement if the result leaves the annulus around `b`.
pub fn compose_randomize<R: Rng + ?Sized>(
    b: &SignVector,
    cfg: &RandomizerConfig,
    rng: &mut R,
) -> Result<SignVector> {
    check_len(b, cfg)?;
    let p = cfg.flip_p();
    let candidate = SignVector(b.bits().iter().map(|&x| flip_with(x, p, rng)).collect());
    if cfg.in_annulus(candidate.hamming(b)) {
        Ok(candidate)
    } else {
        sample_outside_annulus(b, cfg, rng)
    }
}

fn check_len(b: &SignVector, cfg: &RandomizerConfig) -> Result<()> {
    if b.len() != cfg.k() {
        return Err(Error::invalid(format!(
            "input has length {}, configuration expects k = {}",
            b.len(),
            cfg.k()
        )));
    }
    Ok(())
}
