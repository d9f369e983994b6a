//! Synthetic populations, end-to-end simulations and error metrics.

mod population;
mod rng;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DerivativeStream, Horizon, TruthSeries};
use crate::precision::{real, PRECISION};
use crate::protocol::{estimates_from_sums, Algorithm, ClientReport, ClientState, Mechanism};
use crate::{Error, Result};

pub use population::{gen_population, gen_user_stream, ChangeModel};
pub use rng::{Purpose, SeedTree, MAX_REPS, MAX_USERS};

/// One simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: u64,
    pub d: usize,
    pub k: usize,
    pub eps: f64,
    pub beta: f64,
    pub algorithm: Algorithm,
    pub reps: u64,
    pub seed: u64,
    #[serde(default)]
    pub change_model: ChangeModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.reps == 0 || self.k == 0 {
            return Err(Error::config("n, k and reps must be at least 1"));
        }
        if self.n > MAX_USERS {
            return Err(Error::Capacity {
                what: "n",
                value: self.n as usize,
                limit: MAX_USERS as usize,
            });
        }
        if self.reps > MAX_REPS {
            return Err(Error::Capacity {
                what: "reps",
                value: self.reps as usize,
                limit: MAX_REPS as usize,
            });
        }
        Horizon::new(self.d)?;
        if self.k > self.d {
            return Err(Error::config(format!("k = {} exceeds d = {}", self.k, self.d)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(format!("beta {} outside (0, 1)", self.beta)));
        }
        self.mechanism().map(|_| ())
    }

    pub fn horizon(&self) -> Result<Horizon> {
        Horizon::new(self.d)
    }

    pub fn mechanism(&self) -> Result<Mechanism> {
        Mechanism::new(self.algorithm, self.k, self.eps)
    }
}

/// `(1 + log2 d)·⟨gap⟩⁻¹·√(2n·ln(2d/β))`, with ⟨gap⟩ the effective gap of `mech`.
pub fn hoeffding_bound(mech: &Mechanism, horizon: Horizon, n: u64, beta: f64) -> Float {
    let d = horizon.len() as f64;
    let log_term = (Float::with_val(PRECISION, 2) * d / real(beta)).ln();
    let root = (log_term * 2u32 * n).sqrt();
    Float::with_val(PRECISION, horizon.num_orders()) / mech.effective_gap() * root
}

/// Whether `ε⁻¹·log2 d·√(k·ln(d/β)) ≤ √n`.
pub fn regime_ok(eps: f64, d: usize, k: usize, beta: f64, n: u64) -> bool {
    let lhs = (d as f64).log2() / eps * (k as f64 * (d as f64 / beta).ln()).sqrt();
    lhs <= (n as f64).sqrt()
}

/// Raw outcome of one repetition.
#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub truth: TruthSeries,
    pub estimates: Vec<f64>,
    pub max_err: f64,
}

struct Accumulator {
    sums: Vec<Vec<i64>>,
    diff: Vec<i64>,
}

impl Accumulator {
    fn new(horizon: Horizon) -> Self {
        Accumulator {
            sums: (0..horizon.num_orders()).map(|h| vec![0; horizon.len() >> h]).collect(),
            diff: vec![0; horizon.len() + 1],
        }
    }

    fn add(&mut self, stream: &DerivativeStream, report: &ClientReport) {
        for &(t, s) in stream.changes() {
            self.diff[t] += s as i64;
        }
        for (acc, &b) in self.sums[report.order as usize].iter_mut().zip(&report.bits) {
            *acc += b as i64;
        }
    }

    fn merge(mut self, other: Accumulator) -> Self {
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.diff.iter_mut().zip(other.diff) {
            *x += y;
        }
        self
    }
}

fn simulate_user(
    spec: &ExperimentSpec,
    tree: &SeedTree,
    mech: &Mechanism,
    horizon: Horizon,
    rep: u64,
    user: u64,
) -> Result<(DerivativeStream, ClientReport)> {
    let mut pop_rng = tree.stream(rep, user, Purpose::Population)?;
    let stream = gen_user_stream(spec.d, spec.k, spec.change_model, &mut pop_rng)?;
    let mut client_rng = tree.stream(rep, user, Purpose::Client)?;
    let report = ClientState::init(mech, horizon, &mut client_rng)?.run(user, &stream, &mut client_rng)?;
    Ok((stream, report))
}

/// Run repetition `rep` of `spec`: fresh population, clients, aggregation.
pub fn simulate_rep(spec: &ExperimentSpec, mech: &Mechanism, rep: u64) -> Result<RepOutcome> {
    let horizon = spec.horizon()?;
    let tree = SeedTree::new(spec.seed);
    let acc = (0..spec.n)
        .into_par_iter()
        .try_fold(
            || Accumulator::new(horizon),
            |mut acc, user| {
                let (stream, report) = simulate_user(spec, &tree, mech, horizon, rep, user)?;
                acc.add(&stream, &report);
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(|| Accumulator::new(horizon), |a, b| Ok(a.merge(b)))?;
    let mut level = 0i64;
    let counts: Vec<u64> = acc.diff[1..]
        .iter()
        .map(|&dv| {
            level += dv;
            level as u64
        })
        .collect();
    let truth = TruthSeries { counts, n: spec.n };
    let scale = mech.scale(horizon).to_f64();
    let estimates = estimates_from_sums(scale, horizon, &acc.sums)?;
    let max_err = estimates
        .iter()
        .zip(&truth.counts)
        .map(|(e, &f)| (e - f as f64).abs())
        .fold(0.0, f64::max);
    Ok(RepOutcome {
        truth,
        estimates,
        max_err,
    })
}

/// The raw client reports and input streams behind [`simulate_rep`], in user order.
pub fn simulate_rep_reports(
    spec: &ExperimentSpec,
    mech: &Mechanism,
    rep: u64,
) -> Result<(Vec<DerivativeStream>, Vec<ClientReport>)> {
    let horizon = spec.horizon()?;
    let tree = SeedTree::new(spec.seed);
    let pairs = (0..spec.n)
        .into_par_iter()
        .map(|user| simulate_user(spec, &tree, mech, horizon, rep, user))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().unzip())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RepMetrics {
    pub max_err: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub stddev: f64,
    /// Root mean square of the per-rep max error.
    pub rms: f64,
    pub quantiles: Quantiles,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stddev = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let rms = (values.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Summary {
            mean,
            stddev,
            rms,
            quantiles: Quantiles {
                min: sorted[0],
                q25: q(0.25),
                median: q(0.5),
                q75: q(0.75),
                q95: q(0.95),
                max: sorted[sorted.len() - 1],
            },
        }
    }
}

/// Mean and sample standard deviation of `f̂(t) - f(t)` across reps.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PerTError {
    pub t: usize,
    pub mean: f64,
    pub stddev: f64,
}

/// Rep-0 trajectory point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub f: u64,
    pub fhat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub spec: ExperimentSpec,
    /// Bias of a single reported bit.
    pub gap: f64,
    /// Bit gap divided by the estimator factor.
    pub effective_gap: f64,
    pub bound: f64,
    pub regime_ok: bool,
    pub reps: Vec<RepMetrics>,
    pub summary: Summary,
    /// Reps whose max error exceeded `bound`.
    pub exceedances: u64,
    pub per_t: Vec<PerTError>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub wall_clock_secs: f64,
}

/// Run every repetition of `spec` and aggregate the errors.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunMetrics> {
    spec.validate()?;
    let started = Instant::now();
    let mech = spec.mechanism()?;
    let horizon = spec.horizon()?;
    let bound = hoeffding_bound(&mech, horizon, spec.n, spec.beta).to_f64();
    let d = spec.d;
    let mut mean = vec![0.0f64; d];
    let mut m2 = vec![0.0f64; d];
    let mut reps = Vec::with_capacity(spec.reps as usize);
    let mut trajectory = Vec::new();
    for rep in 0..spec.reps {
        let out = simulate_rep(spec, &mech, rep)?;
        let count = (rep + 1) as f64;
        for (i, (e, &f)) in out.estimates.iter().zip(&out.truth.counts).enumerate() {
            let err = e - f as f64;
            let delta = err - mean[i];
            mean[i] += delta / count;
            m2[i] += delta * (err - mean[i]);
        }
        if rep == 0 {
            trajectory = (1..=d)
                .map(|t| TrajectoryPoint {
                    t,
                    f: out.truth.at(t),
                    fhat: out.estimates[t - 1],
                })
                .collect();
        }
        reps.push(RepMetrics { max_err: out.max_err });
    }
    let denom = (spec.reps.max(2) - 1) as f64;
    let per_t = (0..d)
        .map(|i| PerTError {
            t: i + 1,
            mean: mean[i],
            stddev: (m2[i] / denom).sqrt(),
        })
        .collect();
    let max_errs: Vec<f64> = reps.iter().map(|r| r.max_err).collect();
    Ok(RunMetrics {
        spec: spec.clone(),
        gap: mech.bit_gap().to_f64(),
        effective_gap: mech.effective_gap().to_f64(),
        bound,
        regime_ok: regime_ok(spec.eps, spec.d, spec.k, spec.beta, spec.n),
        exceedances: max_errs.iter().filter(|&&e| e > bound).count() as u64,
        summary: Summary::of(&max_errs),
        reps,
        per_t,
        trajectory,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Write `summary.json` and the rep-0 `per_t.csv` into `dir`.
pub fn write_outputs(metrics: &RunMetrics, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(json, metrics)?;
    let mut csv = std::io::BufWriter::new(fs::File::create(dir.join("per_t.csv"))?);
    writeln!(csv, "t,f,fhat,abs_err,bound")?;
    for p in &metrics.trajectory {
        let abs_err = (p.fhat - p.f as f64).abs();
        writeln!(csv, "{},{},{},{},{}", p.t, p.f, p.fhat, abs_err, metrics.bound)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub k: usize,
    pub algorithm: Algorithm,
    pub rms_max_err: f64,
    pub mean_max_err: f64,
    pub gap: f64,
    pub effective_gap: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub algorithm: Algorithm,
    /// Least-squares slope of `ln(RMS max error)` against `ln k`.
    pub slope: f64,
    /// Same fit for `ln(1/effective gap)`.
    pub gap_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingTable {
    pub base: ExperimentSpec,
    pub rows: Vec<ScalingRow>,
    pub slopes: Vec<SlopeFit>,
}

impl ScalingTable {
    pub fn row(&self, algorithm: Algorithm, k: usize) -> Option<&ScalingRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm && r.k == k)
    }

    pub fn slope(&self, algorithm: Algorithm) -> Option<f64> {
        self.slopes.iter().find(|s| s.algorithm == algorithm).map(|s| s.slope)
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Run `base` for every `(k, algorithm)` cell and fit log-log slopes per algorithm.
pub fn scaling_study(base: &ExperimentSpec, k_grid: &[usize], algorithms: &[Algorithm]) -> Result<ScalingTable> {
    if k_grid.is_empty() || algorithms.is_empty() {
        return Err(Error::config("scaling study needs a non-empty k grid and algorithm list"));
    }
    let mut rows = Vec::new();
    for &algorithm in algorithms {
        for &k in k_grid {
            let spec = ExperimentSpec {
                k,
                algorithm,
                out: None,
                ..base.clone()
            };
            let m = run_experiment(&spec)?;
            rows.push(ScalingRow {
                k,
                algorithm,
                rms_max_err: m.summary.rms,
                mean_max_err: m.summary.mean,
                gap: m.gap,
                effective_gap: m.effective_gap,
                bound: m.bound,
            });
        }
    }
    let slopes = if k_grid.len() > 1 {
        algorithms
            .iter()
            .map(|&algorithm| {
                let cells: Vec<_> = rows.iter().filter(|r| r.algorithm == algorithm).collect();
                let x: Vec<f64> = cells.iter().map(|r| (r.k as f64).ln()).collect();
                let err: Vec<f64> = cells.iter().map(|r| r.rms_max_err.ln()).collect();
                let inv_gap: Vec<f64> = cells.iter().map(|r| -r.effective_gap.ln()).collect();
                SlopeFit {
                    algorithm,
                    slope: fit_slope(&x, &err),
                    gap_slope: fit_slope(&x, &inv_gap),
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ScalingTable {
        base: base.clone(),
        rows,
        slopes,
    })
}
