//! Dyadic intervals, the data-derivative transform and partial sums.
//!
//! Time is 1-indexed. A user's Boolean series `X[1..=d]` (with `X[0] = 0`) is
//! replaced by its derivative `ΔX[t] = X[t] - X[t-1]`, which is k-sparse when
//! the value changes at most `k` times. The window `((j-1)·2^h, j·2^h]` is the
//! dyadic interval of order `h` and index `j`; every prefix `[1, t]` is the
//! disjoint union of one interval per set bit of `t`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A time horizon `d`, required to be a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Horizon(usize);

impl Horizon {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 || !d.is_power_of_two() {
            return Err(Error::invalid(format!("horizon d = {d} is not a power of two")));
        }
        Ok(Horizon(d))
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        self.0
    }

    /// `log2 d`, the largest order.
    pub fn log2(self) -> u32 {
        self.0.trailing_zeros()
    }

    /// Number of distinct orders, `1 + log2 d`.
    pub fn num_orders(self) -> u32 {
        self.log2() + 1
    }
}

impl TryFrom<usize> for Horizon {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Horizon::new(d)
    }
}

impl From<Horizon> for usize {
    fn from(h: Horizon) -> usize {
        h.0
    }
}

/// The interval `((index-1)·2^order, index·2^order]` inside a horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicInterval {
    order: u32,
    index: usize,
    horizon: Horizon,
}

impl DyadicInterval {
    pub fn new(order: u32, index: usize, horizon: Horizon) -> Result<Self> {
        if order > horizon.log2() {
            return Err(Error::invalid(format!(
                "order {order} exceeds log2 d = {}",
                horizon.log2()
            )));
        }
        let count = horizon.len() >> order;
        if index == 0 || index > count {
            return Err(Error::invalid(format!(
                "index {index} outside 1..={count} at order {order}"
            )));
        }
        Ok(DyadicInterval { order, index, horizon })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn width(&self) -> usize {
        1 << self.order
    }

    /// First covered time step.
    pub fn start(&self) -> usize {
        (self.index - 1) * self.width() + 1
    }

    /// Last covered time step; always a multiple of `2^order`.
    pub fn end(&self) -> usize {
        self.index * self.width()
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start()..=self.end()).contains(&t)
    }
}

/// Minimal distinct-order dyadic cover of `[1, t]`, ordered by decreasing order.
///
/// One interval per set bit of `t`.
pub fn decompose(t: usize, horizon: Horizon) -> Result<Vec<DyadicInterval>> {
    if t == 0 || t > horizon.len() {
        return Err(Error::invalid(format!(
            "time step {t} outside 1..={}",
            horizon.len()
        )));
    }
    let mut out = Vec::with_capacity(t.count_ones() as usize);
    for order in (0..=horizon.log2()).rev() {
        if t & (1 << order) != 0 {
            out.push(DyadicInterval {
                order,
                index: t >> order,
                horizon,
            });
        }
    }
    Ok(out)
}

/// A user's derivative stream over `{-1, 0, +1}`, stored sparsely.
///
/// Invariant: every prefix sum is 0 or 1, so non-zero entries alternate
/// `+1, -1, +1, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DerivativeStream {
    len: usize,
    /// `(t, sign)` pairs, strictly increasing in `t`.
    changes: Vec<(usize, i8)>,
}

impl DerivativeStream {
    /// The all-zero stream of length `len`.
    pub fn zero(len: usize) -> Self {
        DerivativeStream { len, changes: Vec::new() }
    }

    /// Derivative of a Boolean series.
    pub fn derive(series: &[u8]) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::invalid("empty series"));
        }
        let mut prev = 0u8;
        let mut changes = Vec::new();
        for (i, &x) in series.iter().enumerate() {
            if x > 1 {
                return Err(Error::invalid(format!("non-Boolean value {x} at t = {}", i + 1)));
            }
            if x != prev {
                changes.push((i + 1, x as i8 - prev as i8));
            }
            prev = x;
        }
        Ok(DerivativeStream { len: series.len(), changes })
    }

    /// Build from dense entries, checking the alternation invariant.
    pub fn from_entries(entries: &[i8]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("empty stream"));
        }
        let changes = entries
            .iter()
            .enumerate()
            .filter(|(_, &e)| e != 0)
            .map(|(i, &e)| (i + 1, e))
            .collect::<Vec<_>>();
        if let Some(&bad) = entries.iter().find(|e| !(-1..=1).contains(*e)) {
            return Err(Error::invalid(format!("derivative entry {bad} not in {{-1,0,1}}")));
        }
        Self::from_changes(entries.len(), changes)
    }

    /// Build from sparse `(t, sign)` pairs.
    pub fn from_changes(len: usize, changes: Vec<(usize, i8)>) -> Result<Self> {
        let mut level = 0i8;
        let mut last = 0usize;
        for &(t, s) in &changes {
            if t <= last || t > len {
                return Err(Error::invalid(format!(
                    "change time {t} out of order or outside 1..={len}"
                )));
            }
            level += s;
            if !(0..=1).contains(&level) || s == 0 {
                return Err(Error::invalid(format!(
                    "prefix sum leaves {{0,1}} at t = {t}"
                )));
            }
            last = t;
        }
        Ok(DerivativeStream { len, changes })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of non-zero entries.
    pub fn nnz(&self) -> usize {
        self.changes.len()
    }

    pub fn changes(&self) -> &[(usize, i8)] {
        &self.changes
    }

    pub fn entries(&self) -> Vec<i8> {
        let mut dense = vec![0i8; self.len];
        for &(t, s) in &self.changes {
            dense[t - 1] = s;
        }
        dense
    }

    /// The underlying Boolean series `X[1..=d]`.
    pub fn prefix_sums(&self) -> Vec<u8> {
        let mut level = 0i8;
        self.entries()
            .into_iter()
            .map(|e| {
                level += e;
                level as u8
            })
            .collect()
    }

    /// `X[t]` for `0 <= t <= d`.
    pub fn value_at(&self, t: usize) -> u8 {
        let upto = self.changes.partition_point(|&(ct, _)| ct <= t);
        self.changes[..upto].iter().map(|&(_, s)| s).sum::<i8>() as u8
    }

    /// Keep only the `ordinal`-th change (1-based); every other entry becomes 0.
    ///
    /// The result can have a prefix sum of `-1`, so it is returned as raw changes.
    pub fn single_change(&self, ordinal: usize) -> Option<(usize, i8)> {
        ordinal
            .checked_sub(1)
            .and_then(|i| self.changes.get(i).copied())
    }

    /// Sparse list of `(index, partial sum)` for the non-zero windows at `order`.
    pub fn nonzero_partial_sums(&self, order: u32) -> Vec<(usize, i8)> {
        window_sums(&self.changes, order)
    }
}

/// Group sparse changes into windows of width `2^order` and keep the non-zero sums.
pub(crate) fn window_sums(changes: &[(usize, i8)], order: u32) -> Vec<(usize, i8)> {
    let mut out: Vec<(usize, i8)> = Vec::new();
    for &(t, s) in changes {
        let j = ((t - 1) >> order) + 1;
        match out.last_mut() {
            Some((lj, v)) if *lj == j => *v += s,
            _ => out.push((j, s)),
        }
    }
    out.retain(|&(_, v)| v != 0);
    out
}

/// `Σ_{t ∈ interval} ΔX[t]`, equal to `X[end] - X[start - 1]`.
pub fn partial_sum(stream: &DerivativeStream, interval: &DyadicInterval) -> Result<i8> {
    if interval.horizon().len() != stream.len() {
        return Err(Error::invalid(format!(
            "interval horizon {} does not match stream length {}",
            interval.horizon().len(),
            stream.len()
        )));
    }
    Ok(stream.value_at(interval.end()) as i8 - stream.value_at(interval.start() - 1) as i8)
}

/// Indices `j` whose order-`h` partial sum is non-zero, ascending.
pub fn order_support(stream: &DerivativeStream, order: u32) -> Vec<usize> {
    stream
        .nonzero_partial_sums(order)
        .into_iter()
        .map(|(j, _)| j)
        .collect()
}

/// Ground-truth population counts `f(1..=d)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSeries {
    pub counts: Vec<u64>,
    pub n: u64,
}

impl TruthSeries {
    pub fn from_streams<'a, I>(len: usize, streams: I) -> Self
    where
        I: IntoIterator<Item = &'a DerivativeStream>,
    {
        let mut diff = vec![0i64; len + 1];
        let mut n = 0;
        for s in streams {
            n += 1;
            for &(t, sign) in s.changes() {
                diff[t] += sign as i64;
            }
        }
        let mut level = 0i64;
        let counts = diff[1..]
            .iter()
            .map(|&dv| {
                level += dv;
                level as u64
            })
            .collect();
        TruthSeries { counts, n }
    }

    /// `f(t)` for `1 <= t <= d`.
    pub fn at(&self, t: usize) -> u64 {
        self.counts[t - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(d: usize) -> Horizon {
        Horizon::new(d).unwrap()
    }

    #[test]
    fn derive_examples() {
        let s = DerivativeStream::derive(&[0, 1, 1, 0]).unwrap();
        assert_eq!(s.entries(), vec![0, 1, 0, -1]);
        assert_eq!(DerivativeStream::derive(&[0, 0, 0, 0]).unwrap().entries(), vec![0; 4]);
        assert_eq!(
            DerivativeStream::derive(&[1, 1, 1, 1]).unwrap().entries(),
            vec![1, 0, 0, 0]
        );
    }

    #[test]
    fn derive_rejects_non_boolean() {
        assert!(matches!(
            DerivativeStream::derive(&[0, 2, 1]),
            Err(Error::InvalidInput(_))
        ));
        assert!(DerivativeStream::derive(&[]).is_err());
    }

    #[test]
    fn from_entries_rejects_bad_prefix() {
        assert!(DerivativeStream::from_entries(&[1, 1, 0, 0]).is_err());
        assert!(DerivativeStream::from_entries(&[-1, 1, 0, 0]).is_err());
        assert!(DerivativeStream::from_entries(&[0, 2, 0, 0]).is_err());
        assert!(DerivativeStream::from_entries(&[1, -1, 1, 0]).is_ok());
    }

    #[test]
    fn horizon_must_be_power_of_two() {
        assert!(Horizon::new(0).is_err());
        assert!(Horizon::new(6).is_err());
        assert_eq!(h(1).log2(), 0);
        assert_eq!(h(1024).num_orders(), 11);
    }

    #[test]
    fn decompose_examples() {
        let got = decompose(3, h(4)).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!((got[0].order(), got[0].index()), (1, 1));
        assert_eq!((got[0].start(), got[0].end()), (1, 2));
        assert_eq!((got[1].order(), got[1].index()), (0, 3));
        assert_eq!((got[1].start(), got[1].end()), (3, 3));

        let whole = decompose(16, h(16)).unwrap();
        assert_eq!(whole.len(), 1);
        assert_eq!((whole[0].order(), whole[0].index()), (4, 1));

        let seven: Vec<_> = decompose(7, h(8))
            .unwrap()
            .iter()
            .map(|i| (i.order(), i.index()))
            .collect();
        assert_eq!(seven, vec![(2, 1), (1, 3), (0, 7)]);
    }

    #[test]
    fn decompose_rejects_out_of_range() {
        assert!(decompose(0, h(8)).is_err());
        assert!(decompose(9, h(8)).is_err());
    }

    #[test]
    fn interval_bounds_checked() {
        assert!(DyadicInterval::new(3, 1, h(4)).is_err());
        assert!(DyadicInterval::new(1, 3, h(4)).is_err());
        assert!(DyadicInterval::new(1, 0, h(4)).is_err());
    }

    #[test]
    fn partial_sum_and_support_examples() {
        let s = DerivativeStream::from_entries(&[0, 1, 0, -1]).unwrap();
        let i11 = DyadicInterval::new(1, 1, h(4)).unwrap();
        let i12 = DyadicInterval::new(1, 2, h(4)).unwrap();
        let i21 = DyadicInterval::new(2, 1, h(4)).unwrap();
        assert_eq!(partial_sum(&s, &i11).unwrap(), 1);
        assert_eq!(partial_sum(&s, &i12).unwrap(), -1);
        assert_eq!(partial_sum(&s, &i21).unwrap(), 0);
        assert_eq!(order_support(&s, 1), vec![1, 2]);
        assert!(order_support(&s, 2).is_empty());

        let z = DerivativeStream::zero(4);
        assert_eq!(partial_sum(&z, &i21).unwrap(), 0);
        for order in 0..=2 {
            assert!(order_support(&z, order).is_empty());
        }
    }

    #[test]
    fn partial_sum_rejects_mismatched_horizon() {
        let s = DerivativeStream::zero(8);
        let i = DyadicInterval::new(0, 1, h(4)).unwrap();
        assert!(partial_sum(&s, &i).is_err());
    }

    #[test]
    fn truth_series_counts_ones() {
        let a = DerivativeStream::derive(&[0, 1, 1, 0]).unwrap();
        let b = DerivativeStream::derive(&[1, 1, 0, 1]).unwrap();
        let truth = TruthSeries::from_streams(4, [&a, &b]);
        assert_eq!(truth.counts, vec![1, 2, 1, 1]);
        assert_eq!(truth.n, 2);
    }

    fn boolean_series() -> impl Strategy<Value = (u32, Vec<u8>)> {
        (0u32..=6).prop_flat_map(|log_d| {
            (Just(log_d), prop::collection::vec(0u8..=1, 1usize << log_d))
        })
    }

    proptest! {
        #[test]
        fn decomposition_covers_prefix((log_d, series) in boolean_series(), t_seed in any::<usize>()) {
            let d = 1usize << log_d;
            let horizon = h(d);
            let t = t_seed % d + 1;
            let parts = decompose(t, horizon).unwrap();
            prop_assert_eq!(parts.len(), t.count_ones() as usize);
            prop_assert!(parts.windows(2).all(|w| w[0].order() > w[1].order()));
            let mut covered = Vec::new();
            for i in &parts {
                prop_assert_eq!(i.end() % i.width(), 0);
                covered.extend(i.start()..=i.end());
            }
            covered.sort_unstable();
            prop_assert_eq!(covered, (1..=t).collect::<Vec<_>>());

            let stream = DerivativeStream::derive(&series).unwrap();
            let total: i32 = parts.iter().map(|i| partial_sum(&stream, i).unwrap() as i32).sum();
            prop_assert_eq!(total, series[t - 1] as i32);
        }

        #[test]
        fn derive_then_prefix_sum_is_identity((_log_d, series) in boolean_series()) {
            let stream = DerivativeStream::derive(&series).unwrap();
            prop_assert_eq!(stream.prefix_sums(), series.clone());
            let again = DerivativeStream::from_entries(&stream.entries()).unwrap();
            prop_assert_eq!(again, stream);
        }

        #[test]
        fn support_is_bounded((log_d, series) in boolean_series()) {
            let d = 1usize << log_d;
            let stream = DerivativeStream::derive(&series).unwrap();
            for order in 0..=log_d {
                let support = order_support(&stream, order);
                prop_assert!(support.len() <= stream.nnz().min(d >> order));
                for j in 1..=(d >> order) {
                    let i = DyadicInterval::new(order, j, h(d)).unwrap();
                    let v = partial_sum(&stream, &i).unwrap();
                    prop_assert!((-1..=1).contains(&v));
                    prop_assert_eq!(v != 0, support.contains(&j));
                }
            }
        }
    }
}
