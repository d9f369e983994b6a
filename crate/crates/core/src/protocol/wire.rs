//! Newline-delimited JSON report records, one per reported bit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ClientReport, Mechanism, ServerState};
use crate::dyadic::Horizon;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRecord {
    pub user: u64,
    pub h: u32,
    pub t: usize,
    pub bit: i8,
}

impl ClientReport {
    pub fn records(&self) -> impl Iterator<Item = ReportRecord> + '_ {
        self.timed_bits().map(move |(t, bit)| ReportRecord {
            user: self.user,
            h: self.order,
            t,
            bit,
        })
    }
}

pub fn write_records<W: Write, I: IntoIterator<Item = ReportRecord>>(mut out: W, records: I) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, &r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parse NDJSON records; blank lines are skipped.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<ReportRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ReportRecord = serde_json::from_str(&line)
            .map_err(|e| Error::invalid(format!("line {}: {e}", i + 1)))?;
        if r.bit != 1 && r.bit != -1 {
            return Err(Error::invalid(format!("line {}: bit {} is not ±1", i + 1, r.bit)));
        }
        out.push(r);
    }
    Ok(out)
}

/// Replay a record log through an online server and return `f̂(1..=d)`.
pub fn estimate_from_records(mech: &Mechanism, horizon: Horizon, n: u64, records: &[ReportRecord]) -> Result<Vec<f64>> {
    let mut server = ServerState::new(mech, horizon, n)?;
    let mut orders = BTreeMap::new();
    let mut by_t: Vec<Vec<(u64, i8)>> = vec![Vec::new(); horizon.len() + 1];
    for r in records {
        if r.t == 0 || r.t > horizon.len() {
            return Err(Error::protocol(format!("record time {} outside 1..={}", r.t, horizon.len())));
        }
        match orders.insert(r.user, r.h) {
            Some(h) if h != r.h => {
                return Err(Error::protocol(format!("user {} reported orders {h} and {}", r.user, r.h)))
            }
            _ => {}
        }
        by_t[r.t].push((r.user, r.bit));
    }
    for (&user, &h) in &orders {
        server.register(user, h)?;
    }
    for (t, reports) in by_t.iter().enumerate().skip(1) {
        server.step(t, reports)?;
    }
    Ok(server.estimates().to_vec())
}
