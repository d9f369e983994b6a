use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::{Error, Result};

/// Result of a Pearson χ² goodness-of-fit test.
#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    /// Degrees of freedom after merging sparse bins.
    pub df: usize,
    pub p_value: f64,
    pub pass: bool,
}

/// Pearson χ² test of `observed` against `expected` weights (any scale).
///
/// Adjacent bins are merged until each carries at least 5 expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64], significance: f64) -> Result<ChiSquareOutcome> {
    if observed.len() != expected.len() {
        return Err(Error::invalid(format!(
            "{} observed bins but {} expected weights",
            observed.len(),
            expected.len()
        )));
    }
    if !(significance > 0.0 && significance < 1.0) {
        return Err(Error::invalid(format!("significance {significance} outside (0, 1)")));
    }
    if let Some(w) = expected.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("expected weight {w} is not positive")));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::invalid("empty histogram"));
    }
    let weight_sum: f64 = expected.iter().sum();
    let scale = total as f64 / weight_sum;

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&o, &w) in observed.iter().zip(expected) {
        acc.0 += o as f64;
        acc.1 += w * scale;
        if acc.1 >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => bins.push(acc),
        }
    }
    if bins.len() < 2 {
        return Err(Error::invalid("fewer than two bins with 5 expected counts"));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = bins.len() - 1;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let p_value = dist.sf(statistic);
    Ok(ChiSquareOutcome {
        statistic,
        df,
        p_value,
        pass: p_value >= significance,
    })
}

/// Two-sided standard-normal quantile for confidence `level`, e.g. 2.5758 at 0.99.
pub fn normal_quantile(level: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + level / 2.0)
}
