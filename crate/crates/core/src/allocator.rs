//! Adaptive code reallocation: per-load codebook tables, a Monte-Carlo
//! estimator of the rate and power gains they buy, and a message-driven
//! replay of the control unit's online loop.
//!
//! Codebook ids are the active-user count `n`.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::CodeParams;
use crate::design::{
    power_optimize_brute, rate_optimize_brute, rate_optimize_heuristic, DesignResult, DesignTarget,
    Method, SearchBounds,
};
use crate::{Error, Result};

/// Number of PRNG streams the Monte-Carlo intervals are split across. Fixed,
/// so results do not depend on the worker count.
const SHARDS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationMode {
    /// Shortest code per load: maximizes per-user rate.
    Rate,
    /// Fixed length, lightest code per load: minimizes optical power.
    Power,
}

impl fmt::Display for AllocationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AllocationMode::Rate => "rate",
            AllocationMode::Power => "power",
        })
    }
}

impl FromStr for AllocationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(AllocationMode::Rate),
            "power" => Ok(AllocationMode::Power),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// Code parameters for every load level `n = 1..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookTable {
    pub mode: AllocationMode,
    pub users: u32,
    pub wavelengths: u32,
    pub pe_threshold: f64,
    entries: Vec<CodeParams>,
}

impl CodebookTable {
    /// Book for `n` active users.
    pub fn book(&self, n: u32) -> Option<&CodeParams> {
        n.checked_sub(1).and_then(|i| self.entries.get(i as usize))
    }

    /// `(n, code)` pairs in increasing `n`.
    pub fn entries(&self) -> impl Iterator<Item = (u32, &CodeParams)> {
        self.entries.iter().zip(1..).map(|(c, n)| (n, c))
    }

    /// Checks the mode's monotonicity invariant: nondecreasing `L_n` in
    /// rate mode; a shared `L` and nondecreasing `W_n` in power mode.
    pub fn check_monotone(&self) -> Result<()> {
        for (n, pair) in (2..).zip(self.entries.windows(2)) {
            let (prev, cur) = (&pair[0], &pair[1]);
            let ok = match self.mode {
                AllocationMode::Rate => cur.length >= prev.length,
                AllocationMode::Power => cur.length == prev.length && cur.weight >= prev.weight,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "{} table not monotone at n={n}: {prev:?} then {cur:?}",
                    self.mode
                )));
            }
        }
        Ok(())
    }

    /// The design problem book `n` solves.
    pub fn target(&self, n: u32) -> DesignTarget {
        DesignTarget::new(n, self.wavelengths, self.pe_threshold)
    }
}

fn rate_design(
    target: &DesignTarget,
    method: Method,
    bounds: &SearchBounds,
) -> Result<DesignResult> {
    match method {
        Method::Heuristic => rate_optimize_heuristic(target),
        Method::Brute => rate_optimize_brute(target, bounds),
        Method::Power => Err(Error::InvalidArgument(
            "rate designs use the brute or heuristic method".into(),
        )),
    }
}

/// Designs the codebook for every load `1..=N`.
///
/// Rate mode runs the rate design per load. Power mode fixes `L` at the
/// `N`-user rate design and minimizes the weight per load. Any infeasible
/// load fails the whole table.
pub fn build_codebooks(
    mode: AllocationMode,
    target: &DesignTarget,
    method: Method,
    bounds: &SearchBounds,
) -> Result<CodebookTable> {
    target.validate()?;
    let at = |n: u32| DesignTarget {
        users: n,
        ..*target
    };
    let results: Vec<DesignResult> = match mode {
        AllocationMode::Rate => (1..=target.users)
            .into_par_iter()
            .map(|n| rate_design(&at(n), method, bounds))
            .collect::<Result<_>>()?,
        AllocationMode::Power => {
            let full = rate_design(target, method, bounds)?;
            let length = full
                .code
                .ok_or(Error::Infeasible {
                    users: target.users,
                })?
                .length;
            (1..=target.users)
                .into_par_iter()
                .map(|n| power_optimize_brute(&at(n), length, bounds))
                .collect::<Result<_>>()?
        }
    };
    let entries = results
        .iter()
        .zip(1..)
        .map(|(r, n)| r.code.ok_or(Error::Infeasible { users: n }))
        .collect::<Result<Vec<_>>>()?;
    Ok(CodebookTable {
        mode,
        users: target.users,
        wavelengths: target.wavelengths,
        pe_threshold: target.pe_threshold,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub users: u32,
    pub wavelengths: u32,
    pub pe_threshold: f64,
    /// Probability that a user is active in a reallocation interval.
    pub p_active: f64,
    pub intervals: u64,
    pub seed: u64,
    /// Reallocation period, used only by the message-driven simulation.
    pub period: f64,
    pub mode: AllocationMode,
    /// Keep the per-interval `(n, L_n or W_n)` sequence in the report.
    pub trace: bool,
}

impl SimConfig {
    pub fn new(users: u32, wavelengths: u32, pe_threshold: f64, mode: AllocationMode) -> Self {
        Self {
            users,
            wavelengths,
            pe_threshold,
            p_active: 0.5,
            intervals: 100_000,
            seed: 42,
            period: 1.0,
            mode,
            trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_active) {
            return Err(Error::InvalidArgument(format!(
                "p_active {} outside [0, 1]",
                self.p_active
            )));
        }
        if self.intervals == 0 {
            return Err(Error::InvalidArgument(
                "at least one interval is required".into(),
            ));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        Ok(())
    }

    fn check_table(&self, table: &CodebookTable) -> Result<()> {
        self.validate()?;
        if table.mode != self.mode
            || table.users != self.users
            || table.wavelengths != self.wavelengths
            || table.pe_threshold != self.pe_threshold
        {
            return Err(Error::InvalidArgument(
                "codebook table was built for a different configuration".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainVariant {
    /// Mean over intervals of `L_N / L_n`.
    MeanRatio,
    /// `Σ n·W_n / Σ n·W_N`: average transmit weight per active user.
    UserWeighted,
    /// Mean over intervals of `W_n / W_N`.
    Unweighted,
}

impl fmt::Display for GainVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GainVariant::MeanRatio => "mean-ratio",
            GainVariant::UserWeighted => "user-weighted",
            GainVariant::Unweighted => "unweighted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub variant: GainVariant,
    pub gain: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub mode: AllocationMode,
    /// Headline estimate: mean ratio in rate mode, user-weighted in power mode.
    pub gain: f64,
    pub stderr: f64,
    pub variant: GainVariant,
    /// Every computed variant, headline first.
    pub estimates: Vec<GainEstimate>,
    /// Intervals with at least one active user.
    pub intervals_used: u64,
    pub trace: Option<Vec<(u32, u32)>>,
}

impl GainReport {
    pub fn estimate(&self, variant: GainVariant) -> Option<&GainEstimate> {
        self.estimates.iter().find(|e| e.variant == variant)
    }
}

struct Shard {
    histogram: Vec<u64>,
    draws: Vec<u32>,
}

fn run_shard(cfg: &SimConfig, shard: u64, dist: &Binomial) -> Shard {
    let lo = cfg.intervals * shard / SHARDS;
    let hi = cfg.intervals * (shard + 1) / SHARDS;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(shard);
    let mut histogram = vec![0u64; cfg.users as usize + 1];
    let mut draws = Vec::new();
    for _ in lo..hi {
        let n = dist.sample(&mut rng) as u32;
        histogram[n as usize] += 1;
        if cfg.trace && n > 0 {
            draws.push(n);
        }
    }
    Shard { histogram, draws }
}

/// Sample mean and standard error of a value taking `values[n]` with
/// multiplicity `counts[n]`.
fn mean_and_stderr(counts: &[u64], values: &[f64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let mean = counts
        .iter()
        .zip(values)
        .map(|(&c, &v)| c as f64 * v)
        .sum::<f64>()
        / total as f64;
    if total < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = counts
        .iter()
        .zip(values)
        .map(|(&c, &v)| c as f64 * (v - mean).powi(2))
        .sum();
    (mean, (ss / (total - 1) as f64 / total as f64).sqrt())
}

/// Monte-Carlo estimate of the adaptive-allocation gain.
///
/// Each interval draws `n ~ Binomial(N, p_active)`; all-idle intervals are
/// skipped. Intervals are split across a fixed set of seeded streams and
/// only integer histograms are merged, so the report is bit-identical for a
/// given configuration regardless of scheduling.
pub fn simulate_gain(cfg: &SimConfig, table: &CodebookTable) -> Result<GainReport> {
    cfg.check_table(table)?;
    if cfg.p_active == 0.0 {
        return Err(Error::InvalidArgument(
            "p_active = 0 leaves every interval idle".into(),
        ));
    }
    let dist = Binomial::new(u64::from(cfg.users), cfg.p_active)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let shards: Vec<Shard> = (0..SHARDS)
        .into_par_iter()
        .map(|s| run_shard(cfg, s, &dist))
        .collect();

    let mut histogram = vec![0u64; cfg.users as usize + 1];
    for s in &shards {
        for (h, c) in histogram.iter_mut().zip(&s.histogram) {
            *h += c;
        }
    }
    let counts = &histogram[1..];
    let intervals_used: u64 = counts.iter().sum();
    if intervals_used == 0 {
        return Err(Error::InvalidArgument(
            "every simulated interval was idle".into(),
        ));
    }
    let books: Vec<&CodeParams> = (1..=cfg.users)
        .map(|n| table.book(n).expect("full table"))
        .collect();
    let full = books[books.len() - 1];

    let estimates = match cfg.mode {
        AllocationMode::Rate => {
            let ratios: Vec<f64> = books
                .iter()
                .map(|b| f64::from(full.length) / f64::from(b.length))
                .collect();
            let (gain, stderr) = mean_and_stderr(counts, &ratios);
            vec![GainEstimate {
                variant: GainVariant::MeanRatio,
                gain,
                stderr,
            }]
        }
        AllocationMode::Power => {
            let ratios: Vec<f64> = books
                .iter()
                .map(|b| f64::from(b.weight) / f64::from(full.weight))
                .collect();
            let (mean, mean_err) = mean_and_stderr(counts, &ratios);
            vec![
                user_weighted(counts, &books, full.weight),
                GainEstimate {
                    variant: GainVariant::Unweighted,
                    gain: mean,
                    stderr: mean_err,
                },
            ]
        }
    };
    let trace = cfg.trace.then(|| {
        shards
            .iter()
            .flat_map(|s| s.draws.iter())
            .map(|&n| {
                let b = books[n as usize - 1];
                (
                    n,
                    if cfg.mode == AllocationMode::Rate {
                        b.length
                    } else {
                        b.weight
                    },
                )
            })
            .collect()
    });
    Ok(GainReport {
        mode: cfg.mode,
        gain: estimates[0].gain,
        stderr: estimates[0].stderr,
        variant: estimates[0].variant,
        estimates,
        intervals_used,
        trace,
    })
}

/// Ratio estimator `Σ n·W_n / (W_N Σ n)`, with a delta-method standard
/// error. Sums are exact integers, so `p_active = 1` yields exactly 1.
fn user_weighted(counts: &[u64], books: &[&CodeParams], full_weight: u32) -> GainEstimate {
    let (mut num, mut den) = (0u128, 0u128);
    for ((&c, b), n) in counts.iter().zip(books).zip(1u128..) {
        num += u128::from(c) * n * u128::from(b.weight);
        den += u128::from(c) * n;
    }
    let gain = num as f64 / (den as f64 * f64::from(full_weight));
    let total: u64 = counts.iter().sum();
    let mean_n = den as f64 / total as f64;
    let residuals: Vec<f64> = books
        .iter()
        .zip(1u32..)
        .map(|(b, n)| f64::from(n) * (f64::from(b.weight) / f64::from(full_weight) - gain))
        .collect();
    let (_, err) = mean_and_stderr(counts, &residuals);
    GainEstimate {
        variant: GainVariant::UserWeighted,
        gain,
        stderr: err / mean_n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Activate,
    Deactivate,
}

/// A control message from an ONU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub user: u32,
    pub kind: EventKind,
}

/// A code-assignment broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub time: f64,
    pub book: u32,
    pub code: CodeParams,
}

/// Parses `time,user_id,activate|deactivate` lines. A leading header row is
/// skipped when its first field is `time`.
pub fn parse_events<R: Read>(reader: R) -> Result<Vec<Event>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut events = Vec::new();
    for (idx, record) in csv.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::MalformedTrace(format!("line {line}: {e}")))?;
        if idx == 0 && record.get(0) == Some("time") {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::MalformedTrace(format!(
                "line {line}: expected 3 fields, found {}",
                record.len()
            )));
        }
        let time: f64 = record[0].parse().map_err(|_| {
            Error::MalformedTrace(format!("line {line}: bad time {:?}", &record[0]))
        })?;
        let user: u32 = record[1].parse().map_err(|_| {
            Error::MalformedTrace(format!("line {line}: bad user id {:?}", &record[1]))
        })?;
        let kind = match &record[2] {
            "activate" => EventKind::Activate,
            "deactivate" => EventKind::Deactivate,
            other => {
                return Err(Error::MalformedTrace(format!(
                    "line {line}: unknown message {other:?}"
                )))
            }
        };
        events.push(Event { time, user, kind });
    }
    Ok(events)
}

/// Replays the control unit's online loop.
///
/// All `N` users start active and book `N` is broadcast at time 0. Messages
/// update the active count as they arrive; at each tick `k·T`,
/// `k = 1..=intervals`, the book for the current count is broadcast, after
/// every message stamped at or before the tick. Ticks with no active user
/// broadcast nothing.
pub fn run_message_simulation(
    cfg: &SimConfig,
    table: &CodebookTable,
    events: &[Event],
) -> Result<Vec<Assignment>> {
    cfg.check_table(table)?;
    let n_max = cfg.users;
    let mut active = vec![true; n_max as usize + 1];
    let mut count = n_max;
    let book = |n: u32| *table.book(n).expect("full table");

    let mut out = vec![Assignment {
        time: 0.0,
        book: n_max,
        code: book(n_max),
    }];
    let mut pending = events.iter().enumerate().peekable();
    let mut last_time = f64::NEG_INFINITY;
    for k in 1..=cfg.intervals {
        let tick = k as f64 * cfg.period;
        while let Some(&(idx, ev)) = pending.peek() {
            if ev.time > tick {
                break;
            }
            apply_event(idx, ev, &mut last_time, &mut active, &mut count)?;
            pending.next();
        }
        if count > 0 {
            out.push(Assignment {
                time: tick,
                book: count,
                code: book(count),
            });
        }
    }
    // messages after the last tick produce no broadcast but must still be valid
    for (idx, ev) in pending {
        apply_event(idx, ev, &mut last_time, &mut active, &mut count)?;
    }
    Ok(out)
}

fn apply_event(
    idx: usize,
    ev: &Event,
    last_time: &mut f64,
    active: &mut [bool],
    count: &mut u32,
) -> Result<()> {
    let bad = |why: String| Err(Error::MalformedTrace(format!("event {idx}: {why}")));
    if !ev.time.is_finite() || ev.time < 0.0 {
        return bad(format!("invalid time {}", ev.time));
    }
    if ev.time < *last_time {
        return bad(format!("time {} precedes {}", ev.time, last_time));
    }
    *last_time = ev.time;
    if ev.user == 0 || ev.user as usize >= active.len() {
        return bad(format!(
            "user id {} outside 1..={}",
            ev.user,
            active.len() - 1
        ));
    }
    let slot = &mut active[ev.user as usize];
    match (ev.kind, *slot) {
        (EventKind::Deactivate, true) => {
            *slot = false;
            *count -= 1;
        }
        (EventKind::Activate, false) => {
            *slot = true;
            *count += 1;
        }
        (EventKind::Deactivate, false) => {
            return bad(format!("user {} is already inactive", ev.user))
        }
        (EventKind::Activate, true) => return bad(format!("user {} is already active", ev.user)),
    }
    Ok(())
}
