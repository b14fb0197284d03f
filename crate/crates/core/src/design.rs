//! Rate-optimized and power-optimized single-class code design.
//!
//! Both problems share the feasibility predicate
//!
//! * C1 `λ ≤ W ≤ ML`,
//! * C2 Johnson cardinality for `N` users,
//! * C3 `W² ≤ 2MλL`,
//! * C4 exact BER (worst-case interference) `≤ Pe_th`,
//!
//! over positive integers. The rate problem minimizes `L`; the power problem
//! fixes `L` and minimizes `W`.
//!
//! Search effort is measured in candidate evaluations: one unit per
//! `(L, W, λ)` triple submitted to the feasibility predicate.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ber::{approx_ber_single, formal_single_class_ber, single_class_ber, Precision};
use crate::combinatorics::{
    check_constraints, johnson_min_length, weight_bound_min_length, CodeParams,
};
use crate::{Error, Result};

/// Largest weight the heuristic's boundary walks will consider.
pub const HEURISTIC_WEIGHT_CAP: u32 = 200;

/// Box limits of the exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub l_max: u32,
    pub w_max: u32,
    pub lambda_max: u32,
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            l_max: 4000,
            w_max: 100,
            lambda_max: 5,
        }
    }
}

impl SearchBounds {
    pub fn validate(&self) -> Result<()> {
        if self.l_max == 0 || self.w_max == 0 || self.lambda_max == 0 {
            return Err(Error::InvalidArgument(format!(
                "search bounds must be >= 1: {self:?}"
            )));
        }
        if self.lambda_max > self.w_max {
            return Err(Error::InvalidArgument(format!(
                "lambda_max exceeds w_max: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Brute,
    Heuristic,
    /// Exhaustive minimum-weight search at a fixed length.
    Power,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Brute => "brute",
            Method::Heuristic => "heuristic",
            Method::Power => "power",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Method::Brute),
            "heuristic" => Ok(Method::Heuristic),
            "power" => Ok(Method::Power),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// User count, wavelength count and BER target of a design problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignTarget {
    pub users: u32,
    pub wavelengths: u32,
    pub pe_threshold: f64,
    pub precision: Precision,
}

impl DesignTarget {
    pub fn new(users: u32, wavelengths: u32, pe_threshold: f64) -> Self {
        Self {
            users,
            wavelengths,
            pe_threshold,
            precision: Precision::DEFAULT,
        }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::InvalidArgument(
                "at least one user is required".into(),
            ));
        }
        if self.wavelengths == 0 {
            return Err(Error::InvalidArgument(
                "at least one wavelength is required".into(),
            ));
        }
        if !(self.pe_threshold > 0.0 && self.pe_threshold < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "BER threshold must lie in (0, 0.5), got {}",
                self.pe_threshold
            )));
        }
        Precision::digits(self.precision.get())?;
        Ok(())
    }

    fn code(&self, length: u32, weight: u32, lambda: u32) -> CodeParams {
        CodeParams {
            wavelengths: self.wavelengths,
            length,
            weight,
            lambda,
        }
    }
}

/// Optimizer output. `code` is `None` when nothing feasible was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub code: Option<CodeParams>,
    pub eval_count: u64,
    pub method: Method,
}

impl DesignResult {
    pub fn feasible(&self) -> bool {
        self.code.is_some()
    }
}

/// C4 alone, for a code that already satisfies C1.
fn ber_within(target: &DesignTarget, p: &CodeParams) -> Result<bool> {
    Ok(single_class_ber(target.users, p, target.precision)?.to_f64() <= target.pe_threshold)
}

/// Full C1–C4 feasibility of `p` for the target.
pub fn is_feasible(target: &DesignTarget, p: &CodeParams) -> Result<bool> {
    if p.wavelengths != target.wavelengths || p.length == 0 || p.weight == 0 || p.lambda == 0 {
        return Ok(false);
    }
    if !check_constraints(target.users, p).all() {
        return Ok(false);
    }
    ber_within(target, p)
}

/// Exhaustive search for the shortest feasible code.
///
/// Lengths are scanned in ascending order; each length's full
/// `W_max × λ_max` row is evaluated, and the scan stops after the first row
/// holding a feasible point. Within that row the smallest `W`, then the
/// smallest `λ`, wins. `eval_count` is the number of triples visited.
///
/// Worst-case BER decreases in `L` at fixed `(W, λ)`, so C4 reduces to
/// `L ≥ L_ber(W, λ)`. Each threshold is found by bisection the first time
/// its pair clears C1–C3, and every later visit of that pair is answered
/// from it.
pub fn rate_optimize_brute(target: &DesignTarget, bounds: &SearchBounds) -> Result<DesignResult> {
    target.validate()?;
    bounds.validate()?;
    let row: Vec<(u32, u32)> = (1..=bounds.w_max)
        .flat_map(|w| (1..=bounds.lambda_max).map(move |lambda| (w, lambda)))
        .collect();
    let mut thresholds: Vec<Option<u32>> = vec![None; row.len()];
    let mut eval_count = 0u64;
    for length in 1..=bounds.l_max {
        let structural: Vec<bool> = row
            .iter()
            .map(|&(w, lambda)| {
                check_constraints(target.users, &target.code(length, w, lambda)).all()
            })
            .collect();
        let fresh: Vec<usize> = (0..row.len())
            .filter(|&i| structural[i] && thresholds[i].is_none())
            .collect();
        let found = fresh
            .par_iter()
            .map(|&i| ber_threshold(target, length, bounds.l_max, row[i]))
            .collect::<Result<Vec<u32>>>()?;
        for (i, l_ber) in fresh.into_iter().zip(found) {
            thresholds[i] = Some(l_ber);
        }
        eval_count += row.len() as u64;
        let hit = (0..row.len())
            .find(|&i| structural[i] && thresholds[i].is_some_and(|l_ber| length >= l_ber));
        if let Some(i) = hit {
            let (w, lambda) = row[i];
            return Ok(DesignResult {
                code: Some(target.code(length, w, lambda)),
                eval_count,
                method: Method::Brute,
            });
        }
    }
    Ok(DesignResult {
        code: None,
        eval_count,
        method: Method::Brute,
    })
}

/// Smallest `L` in `[from, l_max]` meeting the BER target at `(W, λ)`, or
/// `u32::MAX` if there is none. `from` must satisfy C1–C3.
fn ber_threshold(
    target: &DesignTarget,
    from: u32,
    l_max: u32,
    (w, lambda): (u32, u32),
) -> Result<u32> {
    let ok = |l: u32| ber_within(target, &target.code(l, w, lambda));
    if ok(from)? {
        return Ok(from);
    }
    if !ok(l_max)? {
        return Ok(u32::MAX);
    }
    let (mut lo, mut hi) = (from, l_max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Exhaustive search for the lightest feasible code at a fixed length.
pub fn power_optimize_brute(
    target: &DesignTarget,
    length: u32,
    bounds: &SearchBounds,
) -> Result<DesignResult> {
    target.validate()?;
    bounds.validate()?;
    if length == 0 {
        return Err(Error::InvalidArgument("code length must be >= 1".into()));
    }
    let mut eval_count = 0u64;
    for w in 1..=bounds.w_max {
        for lambda in 1..=bounds.lambda_max {
            eval_count += 1;
            let p = target.code(length, w, lambda);
            if is_feasible(target, &p)? {
                return Ok(DesignResult {
                    code: Some(p),
                    eval_count,
                    method: Method::Power,
                });
            }
        }
    }
    Ok(DesignResult {
        code: None,
        eval_count,
        method: Method::Power,
    })
}

/// `eval_count(brute) / eval_count(heuristic)` on identical inputs.
pub fn complexity_gain(target: &DesignTarget, bounds: &SearchBounds) -> Result<f64> {
    let brute = rate_optimize_brute(target, bounds)?;
    let heuristic = rate_optimize_heuristic(target)?;
    if !brute.feasible() || !heuristic.feasible() {
        return Err(Error::Infeasible {
            users: target.users,
        });
    }
    Ok(brute.eval_count as f64 / heuristic.eval_count as f64)
}

type Triple = (u32, u32, u32);

/// A stage candidate: `(L, W)`, with `None` standing for a rejected
/// (infinite-length) candidate.
type Candidate = Option<(u32, u32)>;

fn better(a: Candidate, b: Candidate) -> Candidate {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y < x { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Boundary-intersection search with memoized, counted evaluations.
struct Heuristic<'a> {
    target: &'a DesignTarget,
    seen: HashSet<Triple>,
    bers: HashMap<Triple, f64>,
}

impl<'a> Heuristic<'a> {
    fn new(target: &'a DesignTarget) -> Self {
        Self {
            target,
            seen: HashSet::new(),
            bers: HashMap::new(),
        }
    }

    fn evals(&self) -> u64 {
        self.seen.len() as u64
    }

    fn ber(&mut self, length: u32, weight: u32, lambda: u32) -> Result<f64> {
        let key = (length, weight, lambda);
        self.seen.insert(key);
        if let Some(&b) = self.bers.get(&key) {
            return Ok(b);
        }
        let p = self.target.code(length, weight, lambda);
        let b = if p.validate().is_err() {
            f64::INFINITY
        } else {
            formal_single_class_ber(self.target.users, &p, self.target.precision)
        };
        self.bers.insert(key, b);
        Ok(b)
    }

    fn ber_ok(&mut self, length: u32, weight: u32, lambda: u32) -> Result<bool> {
        Ok(self.ber(length, weight, lambda)? <= self.target.pe_threshold)
    }

    fn feasible(&mut self, length: u32, weight: u32, lambda: u32) -> Result<bool> {
        self.seen.insert((length, weight, lambda));
        if !check_constraints(self.target.users, &self.target.code(length, weight, lambda)).all() {
            return Ok(false);
        }
        self.ber_ok(length, weight, lambda)
    }

    /// Smallest weight whose point on `boundary` meets the BER target.
    ///
    /// BER decreases along both boundaries as `W` grows, so after seeding
    /// from the closed-form approximation an exponential probe brackets the
    /// crossing and bisection finishes it.
    fn smallest_weight(
        &mut self,
        lambda: u32,
        boundary: &dyn Fn(u32) -> u32,
    ) -> Result<Option<u32>> {
        let t = self.target;
        let seed = (lambda..=HEURISTIC_WEIGHT_CAP)
            .find(|&w| {
                approx_ber_single(t.users, &t.code(boundary(w), w, lambda)) <= t.pe_threshold
            })
            .unwrap_or(HEURISTIC_WEIGHT_CAP);

        let (mut lo, mut hi);
        if self.ber_ok(boundary(seed), seed, lambda)? {
            hi = seed;
            let mut step = 1;
            loop {
                if hi < lambda + step {
                    lo = lambda - 1;
                    break;
                }
                let c = hi - step;
                if self.ber_ok(boundary(c), c, lambda)? {
                    hi = c;
                    step *= 2;
                } else {
                    lo = c;
                    break;
                }
            }
        } else {
            lo = seed;
            let mut step = 1;
            loop {
                let c = (lo + step).min(HEURISTIC_WEIGHT_CAP);
                if c == lo {
                    return Ok(None);
                }
                if self.ber_ok(boundary(c), c, lambda)? {
                    hi = c;
                    break;
                }
                lo = c;
                step *= 2;
            }
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.ber_ok(boundary(mid), mid, lambda)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Some(hi))
    }

    /// Local search around the intersection found at `w0`.
    ///
    /// The discrete optimum is either `(boundary(w0), w0)` or a point of
    /// weight `w0 − 1` with length in `(boundary(w0 − 1), boundary(w0)]`,
    /// where the BER constraint rather than the boundary is active. The latter is located by log-log secant steps on the BER.
    fn refine(
        &mut self,
        lambda: u32,
        w0: u32,
        boundary: &dyn Fn(u32) -> u32,
    ) -> Result<(u32, u32)> {
        let corner = (boundary(w0), w0);
        if w0 <= lambda {
            return Ok(corner);
        }
        let w = w0 - 1;
        let mut lo = boundary(w);
        let mut hi = corner.0;
        if hi <= lo || !self.feasible(hi, w, lambda)? {
            return Ok(corner);
        }
        let target = self.target.pe_threshold.ln();
        while hi - lo > 1 {
            let (b_lo, b_hi) = (self.ber(lo, w, lambda)?, self.ber(hi, w, lambda)?);
            let (x0, x1) = (f64::from(lo).ln(), f64::from(hi).ln());
            let (y0, y1) = (b_lo.ln(), b_hi.ln());
            let guess = (x0 + (target - y0) * (x1 - x0) / (y1 - y0)).exp().ceil();
            let mid = if guess.is_finite() {
                (guess.min(f64::from(u32::MAX)) as u32).clamp(lo + 1, hi - 1)
            } else {
                lo + (hi - lo) / 2
            };
            if self.feasible(mid, w, lambda)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((hi, w))
    }
}

/// Heuristic rate-optimized design.
///
/// Starts at `λ = 1` on the closed-form cardinality boundary
/// `L = (N·W(W−1) + M) / M²`, then repeatedly tries `λ + 1`: the
/// intersection of the BER constraint with the cardinality boundary
/// (rejected when it violates C3) and with the weight boundary
/// `L = W²/(2Mλ)` (rejected when it violates the cardinality bound). The
/// shorter candidate is accepted while it improves on the current length.
/// Approximate BER seeds every boundary walk; exact BER decides it.
pub fn rate_optimize_heuristic(target: &DesignTarget) -> Result<DesignResult> {
    target.validate()?;
    let (n, m) = (target.users, target.wavelengths);
    let mut h = Heuristic::new(target);

    let card1 = move |w: u32| johnson_min_length(n, m, w, 1);
    let Some(w) = h.smallest_weight(1, &card1)? else {
        return Ok(DesignResult {
            code: None,
            eval_count: h.evals(),
            method: Method::Heuristic,
        });
    };
    let (l, w) = h.refine(1, w, &card1)?;
    let mut best: Candidate = if h.feasible(l, w, 1)? {
        Some((l, w))
    } else {
        None
    };
    let mut lambda = 1;

    while lambda < HEURISTIC_WEIGHT_CAP {
        let trial = lambda + 1;
        let card = move |w: u32| johnson_min_length(n, m, w, trial);
        let weight_bound = move |w: u32| weight_bound_min_length(m, w, trial);

        let on_card = match h.smallest_weight(trial, &card)? {
            Some(w) if check_constraints(n, &target.code(card(w), w, trial)).c3 => {
                Some(h.refine(trial, w, &card)?)
            }
            _ => None,
        };
        let on_weight = match h.smallest_weight(trial, &weight_bound)? {
            Some(w) if check_constraints(n, &target.code(weight_bound(w), w, trial)).c2 => {
                Some(h.refine(trial, w, &weight_bound)?)
            }
            _ => None,
        };
        let candidate = better(on_card, on_weight);
        let improves = match (candidate, best) {
            (Some((lc, _)), Some((lb, _))) => lc < lb,
            (Some(_), None) => true,
            _ => false,
        };
        if !improves {
            break;
        }
        best = candidate;
        lambda = trial;
    }

    let code = match best {
        Some((l, w)) if is_feasible(target, &target.code(l, w, lambda))? => {
            Some(target.code(l, w, lambda))
        }
        _ => None,
    };
    Ok(DesignResult {
        code,
        eval_count: h.evals(),
        method: Method::Heuristic,
    })
}
