use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DerivativeStream, TruthSeries};
use crate::{Error, Result};

/// How change times are drawn for a synthetic user.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChangeModel {
    /// `k' ~ Uniform{0..=k}` change times, uniform without replacement over `[1, d]`.
    #[default]
    Uniform,
    /// Exactly `k` change times, uniform without replacement.
    ExactlyK,
    /// `k' ~ Uniform{0..=k}` change times packed into a random window of width
    /// `min(d, 2k')`.
    Bursty,
}

impl fmt::Display for ChangeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChangeModel::Uniform => "uniform",
            ChangeModel::ExactlyK => "exactly-k",
            ChangeModel::Bursty => "bursty",
        })
    }
}

impl FromStr for ChangeModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ChangeModel::Uniform),
            "exactly-k" => Ok(ChangeModel::ExactlyK),
            "bursty" => Ok(ChangeModel::Bursty),
            other => Err(Error::invalid(format!("unknown change model '{other}'"))),
        }
    }
}

/// One user's Boolean series, starting at 0 and toggling at each change time.
pub fn gen_user_stream<R: Rng + ?Sized>(d: usize, k: usize, model: ChangeModel, rng: &mut R) -> Result<DerivativeStream> {
    if k > d {
        return Err(Error::invalid(format!("k = {k} exceeds horizon d = {d}")));
    }
    let count = match model {
        ChangeModel::ExactlyK => k,
        ChangeModel::Uniform | ChangeModel::Bursty => rng.random_range(0..=k),
    };
    let (offset, width) = match model {
        ChangeModel::Bursty => {
            let width = (2 * count).clamp(count, d);
            (rng.random_range(0..=d - width), width)
        }
        _ => (0, d),
    };
    let mut times: Vec<usize> = sample(rng, width, count).into_iter().map(|i| offset + i + 1).collect();
    times.sort_unstable();
    let changes = times
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t, if i % 2 == 0 { 1 } else { -1 }))
        .collect();
    DerivativeStream::from_changes(d, changes)
}

/// `n` independent users drawn from one generator, plus their exact counts.
pub fn gen_population<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    k: usize,
    model: ChangeModel,
    rng: &mut R,
) -> Result<(Vec<DerivativeStream>, TruthSeries)> {
    let streams = (0..n)
        .map(|_| gen_user_stream(d, k, model, rng))
        .collect::<Result<Vec<_>>>()?;
    let truth = TruthSeries::from_streams(d, &streams);
    Ok((streams, truth))
}
