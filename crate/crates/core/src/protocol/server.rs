use rug::Float;

use super::{ClientReport, Mechanism};
use crate::dyadic::{DyadicInterval, Horizon};
use crate::{Error, Result};

/// Aggregator: sums the ±1 reports of every order and answers prefix counts.
#[derive(Debug, Clone)]
pub struct ServerState {
    horizon: Horizon,
    n: u64,
    scale: Float,
    scale_f64: f64,
    orders: Vec<Option<u32>>,
    registered_per_order: Vec<usize>,
    /// `sums[h][j - 1]` = sum of bits reported for `I_{h,j}`.
    sums: Vec<Vec<i64>>,
    last_report: Vec<usize>,
    t: usize,
    estimates: Vec<f64>,
}

impl ServerState {
    pub fn new(mech: &Mechanism, horizon: Horizon, n: u64) -> Result<Self> {
        let users = usize::try_from(n).map_err(|_| Error::invalid(format!("n = {n} too large")))?;
        let scale = mech.scale(horizon);
        let sums = (0..horizon.num_orders())
            .map(|h| vec![0i64; horizon.len() >> h])
            .collect();
        Ok(ServerState {
            horizon,
            n,
            scale_f64: scale.to_f64(),
            scale,
            orders: vec![None; users],
            registered_per_order: vec![0; horizon.num_orders() as usize],
            sums,
            last_report: vec![0; users],
            t: 0,
            estimates: Vec::with_capacity(horizon.len()),
        })
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `(1 + log2 d)·factor/⟨gap⟩`.
    pub fn scale(&self) -> &Float {
        &self.scale
    }

    /// Last time step processed.
    pub fn time(&self) -> usize {
        self.t
    }

    pub fn registered(&self) -> usize {
        self.registered_per_order.iter().sum()
    }

    /// Record the order a client sampled. Must happen before the first step.
    pub fn register(&mut self, user: u64, order: u32) -> Result<()> {
        if self.t != 0 {
            return Err(Error::protocol(format!(
                "user {user} registered after t = {}",
                self.t
            )));
        }
        if order > self.horizon.log2() {
            return Err(Error::protocol(format!(
                "user {user} registered order {order} above log2 d = {}",
                self.horizon.log2()
            )));
        }
        let slot = self.slot(user)?;
        if self.orders[slot].is_some() {
            return Err(Error::protocol(format!("user {user} registered twice")));
        }
        self.orders[slot] = Some(order);
        self.registered_per_order[order as usize] += 1;
        Ok(())
    }

    /// Process the reports arriving at time `t` and return `f̂(t)`.
    ///
    /// Every registered user whose order divides `t` must report exactly once.
    pub fn step(&mut self, t: usize, reports: &[(u64, i8)]) -> Result<f64> {
        if t != self.t + 1 || t > self.horizon.len() {
            return Err(Error::protocol(format!("server expected t = {}, got {t}", self.t + 1)));
        }
        let mut due = 0;
        for h in 0..=t.trailing_zeros().min(self.horizon.log2()) {
            due += self.registered_per_order[h as usize];
        }
        for &(user, bit) in reports {
            if bit != 1 && bit != -1 {
                return Err(Error::protocol(format!("user {user} sent bit {bit}")));
            }
            let slot = self.slot(user)?;
            let order = self.orders[slot]
                .ok_or_else(|| Error::protocol(format!("unregistered user {user} reported at t = {t}")))?;
            if t & ((1 << order) - 1) != 0 {
                return Err(Error::protocol(format!(
                    "user {user} at order {order} has no report due at t = {t}"
                )));
            }
            if self.last_report[slot] == t {
                return Err(Error::protocol(format!("user {user} reported twice at t = {t}")));
            }
            self.last_report[slot] = t;
            self.sums[order as usize][(t >> order) - 1] += bit as i64;
        }
        if reports.len() != due {
            return Err(Error::protocol(format!(
                "{} of {due} due reports missing at t = {t}",
                due - reports.len()
            )));
        }
        self.t = t;
        let f = self.prefix_estimate(t);
        self.estimates.push(f);
        Ok(f)
    }

    /// Bulk path: register a client and add all of its bits at once.
    /// Call [`close`](Self::close) after the last report.
    pub fn absorb(&mut self, report: &ClientReport) -> Result<()> {
        self.register(report.user, report.order)?;
        let due = self.horizon.len() >> report.order;
        if report.bits.len() != due {
            return Err(Error::protocol(format!(
                "user {} sent {} bits, expected {due}",
                report.user,
                report.bits.len()
            )));
        }
        let row = &mut self.sums[report.order as usize];
        for (acc, &b) in row.iter_mut().zip(&report.bits) {
            if b != 1 && b != -1 {
                return Err(Error::protocol(format!("user {} sent bit {b}", report.user)));
            }
            *acc += b as i64;
        }
        Ok(())
    }

    /// Finish a bulk aggregation: fills `f̂(1..=d)`.
    pub fn close(&mut self) -> Result<&[f64]> {
        if self.t != 0 {
            return Err(Error::protocol("close() after online steps"));
        }
        self.t = self.horizon.len();
        self.estimates = (1..=self.t).map(|t| self.prefix_estimate(t)).collect();
        Ok(&self.estimates)
    }

    /// `σ̂(I)` once the interval has closed.
    pub fn sigma_hat(&self, interval: &DyadicInterval) -> Result<f64> {
        if interval.horizon() != self.horizon {
            return Err(Error::invalid("interval belongs to a different horizon"));
        }
        if interval.end() > self.t {
            return Err(Error::protocol(format!(
                "interval ends at {} but only t = {} has been processed",
                interval.end(),
                self.t
            )));
        }
        Ok(self.scale_f64 * self.sums[interval.order() as usize][interval.index() - 1] as f64)
    }

    /// `f̂(1..=time())`.
    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    fn prefix_estimate(&self, t: usize) -> f64 {
        self.scale_f64 * prefix_bit_sum(&self.sums, t) as f64
    }

    fn slot(&self, user: u64) -> Result<usize> {
        if user >= self.n {
            return Err(Error::protocol(format!("user id {user} outside 0..{}", self.n)));
        }
        Ok(user as usize)
    }
}

/// Sum of the bit totals over the dyadic decomposition of `[1, t]`.
fn prefix_bit_sum(sums: &[Vec<i64>], t: usize) -> i64 {
    let mut total = 0i64;
    let mut rest = t;
    while rest != 0 {
        let h = rest.trailing_zeros();
        total += sums[h as usize][(t >> h) - 1];
        rest &= rest - 1;
    }
    total
}

/// `f̂(1..=d)` from per-order bit totals, `sums[h][j - 1]` for `I_{h,j}`.
pub fn estimates_from_sums(scale: f64, horizon: Horizon, sums: &[Vec<i64>]) -> Result<Vec<f64>> {
    let shape_ok = sums.len() == horizon.num_orders() as usize
        && sums.iter().enumerate().all(|(h, row)| row.len() == horizon.len() >> h);
    if !shape_ok {
        return Err(Error::invalid("bit totals do not match the dyadic layout of the horizon"));
    }
    Ok((1..=horizon.len())
        .map(|t| scale * prefix_bit_sum(sums, t) as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::decompose;
    use crate::protocol::Algorithm;

    fn server(d: usize, n: u64) -> ServerState {
        let m = Mechanism::new(Algorithm::FutureRand, 2, 1.0).unwrap();
        ServerState::new(&m, Horizon::new(d).unwrap(), n).unwrap()
    }

    #[test]
    fn estimate_sums_decomposition() {
        let mut s = server(4, 3);
        s.register(0, 0).unwrap();
        s.register(1, 1).unwrap();
        s.register(2, 2).unwrap();
        let c = s.scale().to_f64();
        assert_eq!(s.step(1, &[(0, 1)]).unwrap(), c);
        // f̂(2) = σ̂(I_{1,1}), f̂(3) = σ̂(I_{1,1}) + σ̂(I_{0,3}).
        assert_eq!(s.step(2, &[(1, -1), (0, -1)]).unwrap(), -c);
        assert_eq!(s.step(3, &[(0, 1)]).unwrap(), 0.0);
        let f4 = s.step(4, &[(2, 1), (1, 1), (0, 1)]).unwrap();
        assert_eq!(f4, c);
        let h = s.horizon();
        for t in 1..=4 {
            let manual: f64 = decompose(t, h)
                .unwrap()
                .iter()
                .map(|i| s.sigma_hat(i).unwrap())
                .sum();
            assert!((manual - s.estimates()[t - 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_protocol_violations() {
        let mut s = server(4, 2);
        s.register(0, 1).unwrap();
        assert!(s.register(0, 0).is_err());
        assert!(s.register(5, 0).is_err());
        assert!(s.register(1, 3).is_err());
        assert!(s.step(1, &[(0, 1)]).is_err(), "not due");
        let mut s = server(4, 2);
        s.register(0, 0).unwrap();
        assert!(s.step(1, &[(1, 1)]).is_err(), "unregistered");
        assert!(s.step(1, &[]).is_err(), "missing");
        assert!(s.step(1, &[(0, 1), (0, 1)]).is_err(), "duplicate");
        let mut s = server(4, 2);
        s.register(0, 0).unwrap();
        s.step(1, &[(0, 1)]).unwrap();
        assert!(s.register(1, 0).is_err(), "late registration");
        assert!(s.step(3, &[(0, 1)]).is_err(), "skipped t");
        assert!(s.sigma_hat(&DyadicInterval::new(0, 2, s.horizon()).unwrap()).is_err());
    }

    #[test]
    fn bulk_matches_online() {
        let reports = [
            ClientReport { user: 0, order: 0, bits: vec![1, -1, 1, 1] },
            ClientReport { user: 1, order: 1, bits: vec![-1, 1] },
            ClientReport { user: 2, order: 2, bits: vec![1] },
        ];
        let mut bulk = server(4, 3);
        for r in &reports {
            bulk.absorb(r).unwrap();
        }
        let bulk_est = bulk.close().unwrap().to_vec();
        let mut online = server(4, 3);
        for r in &reports {
            online.register(r.user, r.order).unwrap();
        }
        for t in 1..=4 {
            let due: Vec<_> = reports
                .iter()
                .filter_map(|r| r.bit_at(t).map(|b| (r.user, b)))
                .collect();
            online.step(t, &due).unwrap();
        }
        assert_eq!(online.estimates(), bulk_est.as_slice());
    }
}
