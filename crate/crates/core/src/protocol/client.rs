use rand::{Rng, RngCore};

use super::{Mechanism, Perturbation};
use crate::dyadic::{window_sums, DerivativeStream, Horizon};
use crate::randomizer::{compose_randomize, flip_with, RandomizerConfig, SignVector};
use crate::{Error, Result};

/// Per-user perturbation state fixed at init.
#[derive(Debug, Clone)]
enum Slot {
    Precomputed { b_tilde: SignVector },
    Independent { flip_p: f64 },
    /// Keep only the `keep`-th change seen (1-based).
    SampleOne { flip_p: f64, keep: usize, seen: usize },
}

/// Online client: one sampled order, one report per window of that order.
#[derive(Debug, Clone)]
pub struct ClientState {
    horizon: Horizon,
    order: u32,
    k: usize,
    slot: Slot,
    nnz: usize,
    window_acc: i8,
    last_t: usize,
    coins: u64,
    coins_left: u32,
}

impl ClientState {
    /// Sample `h_u` uniformly from `0..=log2 d` and initialise the perturbation.
    pub fn init<R: Rng + ?Sized>(mech: &Mechanism, horizon: Horizon, rng: &mut R) -> Result<Self> {
        let order = rng.random_range(0..=horizon.log2());
        let slot = match mech.perturbation() {
            Perturbation::Precomputed(cfg) => Slot::Precomputed {
                b_tilde: compose_randomize(&SignVector::ones(cfg.k()), cfg, rng)?,
            },
            Perturbation::Independent { flip_p } => Slot::Independent { flip_p: *flip_p },
            Perturbation::SampleOne { flip_p } => Slot::SampleOne {
                flip_p: *flip_p,
                keep: rng.random_range(1..=mech.k()),
                seen: 0,
            },
        };
        Ok(ClientState {
            horizon,
            order,
            k: mech.k(),
            slot,
            nnz: 0,
            window_acc: 0,
            last_t: 0,
            coins: 0,
            coins_left: 0,
        })
    }

    /// Composed-randomizer client with ε̃ = ε/(5√k).
    pub fn future_rand<R: Rng + ?Sized>(k: usize, d: usize, eps: f64, rng: &mut R) -> Result<Self> {
        let mech = Mechanism::future_rand(RandomizerConfig::future_rand(k, eps)?);
        Self::init(&mech, Horizon::new(d)?, rng)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Number of reports this client emits, `d / 2^h`.
    pub fn reports_due(&self) -> usize {
        self.horizon.len() >> self.order
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// The pre-computed `b̃`, for composed mechanisms.
    pub fn b_tilde(&self) -> Option<&SignVector> {
        match &self.slot {
            Slot::Precomputed { b_tilde } => Some(b_tilde),
            _ => None,
        }
    }

    /// Feed `ΔX[t]`; returns a bit when `t` closes a window of the sampled order.
    pub fn step<R: Rng + ?Sized>(&mut self, t: usize, delta: i8, rng: &mut R) -> Result<Option<i8>> {
        if t != self.last_t + 1 || t > self.horizon.len() {
            return Err(Error::protocol(format!(
                "client expected t = {}, got {t}",
                self.last_t + 1
            )));
        }
        if !(-1..=1).contains(&delta) {
            return Err(Error::invalid(format!("derivative value {delta} not in {{-1,0,1}}")));
        }
        self.last_t = t;
        let delta = match &mut self.slot {
            Slot::SampleOne { keep, seen, .. } if delta != 0 => {
                *seen += 1;
                if *seen == *keep {
                    delta
                } else {
                    0
                }
            }
            _ => delta,
        };
        self.window_acc += delta;
        if !(-1..=1).contains(&self.window_acc) {
            return Err(Error::invalid(format!(
                "window partial sum {} leaves {{-1,0,1}} at t = {t}",
                self.window_acc
            )));
        }
        if t & ((1 << self.order) - 1) != 0 {
            return Ok(None);
        }
        let v = std::mem::take(&mut self.window_acc);
        self.emit(v, rng).map(Some)
    }

    /// Run a whole stream through a fresh client; equivalent to calling
    /// [`step`](Self::step) for `t = 1..=d` but touching only window boundaries.
    pub fn run<R: Rng + ?Sized>(mut self, user: u64, stream: &DerivativeStream, rng: &mut R) -> Result<ClientReport> {
        if self.last_t != 0 {
            return Err(Error::protocol("run() needs a client that has not stepped yet"));
        }
        if stream.len() != self.horizon.len() {
            return Err(Error::invalid(format!(
                "stream length {} differs from horizon {}",
                stream.len(),
                self.horizon.len()
            )));
        }
        let kept;
        let changes = match &mut self.slot {
            Slot::SampleOne { keep, seen, .. } => {
                *seen = stream.nnz();
                kept = stream.single_change(*keep);
                kept.as_slice()
            }
            _ => stream.changes(),
        };
        let windows = window_sums(changes, self.order);
        let len = self.reports_due();
        let mut bits = Vec::with_capacity(len);
        let mut next = windows.iter().peekable();
        for j in 1..=len {
            let v = match next.peek() {
                Some(&&(wj, v)) if wj == j => {
                    next.next();
                    v
                }
                _ => 0,
            };
            bits.push(self.emit(v, rng)?);
        }
        self.last_t = self.horizon.len();
        Ok(ClientReport {
            user,
            order: self.order,
            bits,
        })
    }

    fn emit<R: Rng + ?Sized>(&mut self, v: i8, rng: &mut R) -> Result<i8> {
        if v == 0 {
            return Ok(self.coin(rng));
        }
        self.nnz += 1;
        if self.nnz > self.k {
            return Err(Error::SparsityViolation {
                k: self.k,
                order: self.order,
            });
        }
        Ok(match &self.slot {
            Slot::Precomputed { b_tilde } => v * b_tilde.get(self.nnz - 1),
            Slot::Independent { flip_p } | Slot::SampleOne { flip_p, .. } => flip_with(v, *flip_p, rng),
        })
    }

    /// A fair ±1, drawn from a buffered 64-bit word.
    fn coin<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> i8 {
        if self.coins_left == 0 {
            self.coins = rng.next_u64();
            self.coins_left = 64;
        }
        let bit = self.coins & 1;
        self.coins >>= 1;
        self.coins_left -= 1;
        if bit == 1 {
            1
        } else {
            -1
        }
    }
}

/// Everything one client sends: its order and one bit per window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClientReport {
    pub user: u64,
    pub order: u32,
    /// `bits[j - 1]` is reported at `t = j·2^order`.
    pub bits: Vec<i8>,
}

impl ClientReport {
    pub fn timed_bits(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .map(move |(i, &b)| ((i + 1) << self.order, b))
    }

    /// The bit due at time `t`, if `2^order` divides it.
    pub fn bit_at(&self, t: usize) -> Option<i8> {
        if t == 0 || t & ((1 << self.order) - 1) != 0 {
            return None;
        }
        self.bits.get((t >> self.order) - 1).copied()
    }
}
