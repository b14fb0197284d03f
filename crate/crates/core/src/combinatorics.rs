//! Exact combinatorial primitives and the code-design constraints shared by
//! the BER engine and the optimizers.
//!
//! All arithmetic here is exact: products of falling factorials overflow
//! 64-bit integers quickly (`(ML)^λ` with `ML = 4000`, `λ = 5` already needs
//! 60 bits before multiplying by the user count), so everything goes through
//! arbitrary-size integers.

use dashu_int::{IBig, UBig};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Geometry of one class of 1D/2D optical orthogonal codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    /// Number of wavelengths `M`.
    pub wavelengths: u32,
    /// Code length `L` in chips.
    pub length: u32,
    /// Code weight `W` (pulses per codeword).
    pub weight: u32,
    /// Maximum cross-correlation `λ`.
    pub lambda: u32,
}

impl CodeParams {
    /// Builds a validated parameter set.
    pub fn new(wavelengths: u32, length: u32, weight: u32, lambda: u32) -> Result<Self> {
        let p = Self {
            wavelengths,
            length,
            weight,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// Total number of time/wavelength cells, `M·L`.
    pub fn cells(&self) -> u64 {
        u64::from(self.wavelengths) * u64::from(self.length)
    }

    pub fn validate(&self) -> Result<()> {
        if self.wavelengths == 0 || self.length == 0 || self.weight == 0 || self.lambda == 0 {
            return Err(Error::InvalidCode(format!(
                "all parameters must be positive: {self:?}"
            )));
        }
        if self.lambda > self.weight || u64::from(self.weight) > self.cells() {
            return Err(Error::InvalidCode(format!(
                "requires lambda <= W <= M*L: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Verdict of the three combinatorial design constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    /// `λ ≤ W ≤ ML`.
    pub c1: bool,
    /// Johnson cardinality: `N·W(W−1)⋯(W−λ) ≤ M(ML−1)⋯(ML−λ)`.
    pub c2: bool,
    /// Weight bound `W ≤ sqrt(2MλL)`, compared as `W² ≤ 2MλL`.
    pub c3: bool,
}

impl ConstraintCheck {
    pub fn all(&self) -> bool {
        self.c1 && self.c2 && self.c3
    }
}

/// Binomial coefficient `C(n, k)`; zero whenever `k < 0`, `n < 0` or `n < k`.
pub fn binomial(n: i64, k: i64) -> UBig {
    if k < 0 || n < 0 || n < k {
        return UBig::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = UBig::ONE;
    for i in 1..=k {
        // acc * (n - k + i) is divisible by i at every step
        acc = acc * UBig::from((n - k + i) as u64) / UBig::from(i as u64);
    }
    acc
}

/// `x (x−1) ⋯ (x−count+1)` with signed factors.
fn falling(x: i64, count: u32) -> IBig {
    (0..i64::from(count)).fold(IBig::ONE, |acc, t| acc * IBig::from(x - t))
}

/// Left side of the cardinality constraint: `N·W(W−1)⋯(W−λ)`.
fn cardinality_demand(users: u32, p: &CodeParams) -> IBig {
    IBig::from(users) * falling(i64::from(p.weight), p.lambda + 1)
}

/// Right side of the cardinality constraint: `M(ML−1)⋯(ML−λ)`.
fn cardinality_supply(p: &CodeParams) -> IBig {
    let ml = p.cells() as i64;
    IBig::from(p.wavelengths) * falling(ml - 1, p.lambda)
}

/// Johnson upper bound on the number of codewords of a `(ML, W, λ)` code:
/// `⌊ M(ML−1)⋯(ML−λ) / (W(W−1)⋯(W−λ)) ⌋`.
///
/// Rejects `W ≤ λ`, where the denominator vanishes.
pub fn johnson_bound(p: &CodeParams) -> Result<UBig> {
    p.validate()?;
    if p.weight <= p.lambda {
        return Err(Error::InvalidCode(format!(
            "Johnson bound needs W > lambda, got W={} lambda={}",
            p.weight, p.lambda
        )));
    }
    let num = cardinality_supply(p);
    let den = falling(i64::from(p.weight), p.lambda + 1);
    // both positive once W > λ and ML ≥ W
    let q = num / den;
    Ok(UBig::try_from(q).unwrap_or(UBig::ZERO))
}

/// Evaluates the constraints C1–C3 for `users` simultaneous users.
pub fn check_constraints(users: u32, p: &CodeParams) -> ConstraintCheck {
    let c1 = p.lambda <= p.weight && u64::from(p.weight) <= p.cells();
    let c2 = cardinality_demand(users, p) <= cardinality_supply(p);
    let w = u64::from(p.weight);
    let c3 = w * w <= 2 * u64::from(p.wavelengths) * u64::from(p.lambda) * u64::from(p.length);
    ConstraintCheck { c1, c2, c3 }
}

/// Smallest code length satisfying the cardinality constraint C2 for the
/// given `(N, M, W, λ)`.
///
/// For `λ = 1` this is the closed form `⌈(N·W(W−1) + M) / M²⌉`; for larger
/// `λ` the approximate root `(1/M)·(N·W⋯(W−λ)/M)^{1/λ}` is refined to the
/// exact integer boundary.
pub(crate) fn johnson_min_length(users: u32, wavelengths: u32, weight: u32, lambda: u32) -> u32 {
    let m = u64::from(wavelengths);
    if lambda == 1 {
        let w = u64::from(weight);
        let num = u64::from(users) * w * w.saturating_sub(1) + m;
        return num.div_ceil(m * m).max(1) as u32;
    }
    let demand: f64 = (0..=lambda)
        .map(|t| f64::from(weight) - f64::from(t))
        .fold(f64::from(users), |acc, f| acc * f.max(0.0));
    let root = (demand / m as f64).powf(1.0 / f64::from(lambda)) / m as f64;
    let mut length = (root.ceil() as i64 - i64::from(lambda)).max(1) as u32;
    let probe = |length: u32| {
        let p = CodeParams {
            wavelengths,
            length,
            weight,
            lambda,
        };
        cardinality_demand(users, &p) <= cardinality_supply(&p)
    };
    while !probe(length) {
        length += 1;
    }
    // the float root may overshoot by a cell or two
    while length > 1 && probe(length - 1) {
        length -= 1;
    }
    length
}

/// Smallest code length satisfying C3, `⌈W² / (2Mλ)⌉`.
pub(crate) fn weight_bound_min_length(wavelengths: u32, weight: u32, lambda: u32) -> u32 {
    let w = u64::from(weight);
    let den = 2 * u64::from(wavelengths) * u64::from(lambda);
    (w * w).div_ceil(den).max(1) as u32
}
