//! Bit-error rate of multi-class OCDMA systems limited by multi-access
//! interference.
//!
//! Two evaluators live here:
//!
//! * [`exact_ber`] evaluates the inclusion-exclusion sum over the `W + 1`
//!   mark-subset sizes. The terms alternate in sign and reach
//!   `C(W, W/2)` in magnitude while the result sits near `1e-9`, so the sum
//!   is carried in software floating point with a caller-chosen number of
//!   significant decimal digits.
//! * [`approx_ber`] / [`approx_ber_single`] evaluate the closed-form
//!   approximation that keeps only the dominant `λ`-hit term of each class.
//!
//! Interference statistics are supplied through an [`InterferenceModel`]:
//! for every ordered class pair `(k, q)` a vector of per-pattern hit
//! probabilities `P_1..P_λ`, where `P_m` is the probability that one class-`q`
//! user covers a *specific* set of `m` marks of a class-`k` receiver
//! (i.e. the probability of an `m`-hit event divided by `C(W_k, m)`).

use dashu_float::{round::mode::HalfEven, FBig};
use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, CodeParams};
use crate::{Error, Result};

type Float = FBig<HalfEven, 2>;

/// Working precision of [`exact_ber`], in significant decimal digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Precision(u32);

impl Precision {
    pub const MIN_DIGITS: u32 = 30;
    pub const DEFAULT: Precision = Precision(80);

    pub fn digits(digits: u32) -> Result<Self> {
        if digits < Self::MIN_DIGITS {
            return Err(Error::PrecisionTooLow {
                requested: digits,
                minimum: Self::MIN_DIGITS,
            });
        }
        Ok(Precision(digits))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Mantissa bits carried for this many decimal digits, plus guard bits.
    fn bits(self) -> usize {
        (f64::from(self.0) * std::f64::consts::LOG2_10).ceil() as usize + 16
    }
}

impl Default for Precision {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// High-precision result of [`exact_ber`].
#[derive(Debug, Clone, PartialEq)]
pub struct BerValue(Float);

impl BerValue {
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    /// Exact binary expansion: the value equals `significand · 2^exponent`.
    pub fn to_parts(&self) -> (IBig, isize) {
        (
            self.0.repr().significand().clone(),
            self.0.repr().exponent(),
        )
    }

    /// `|self − other| / |other|` evaluated at the finer of the two
    /// precisions; `0` when both are zero.
    pub fn relative_diff(&self, other: &BerValue) -> f64 {
        let diff = &self.0 - &other.0;
        if other.0 == Float::ZERO {
            return if diff == Float::ZERO {
                0.0
            } else {
                f64::INFINITY
            };
        }
        let rel = diff / &other.0;
        rel.to_f64().value().abs()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == Float::ZERO
    }
}

/// A `K`-class, `M`-wavelength OCDMA system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub wavelengths: u32,
    /// Users per class, `N_i`.
    pub users: Vec<u32>,
    /// Code length per class, `L_i`.
    pub lengths: Vec<u32>,
    /// Code weight per class, `W_i`.
    pub weights: Vec<u32>,
    /// Cross-correlation matrix, `λ_ij`.
    pub correlation: Vec<Vec<u32>>,
    /// Power-ratio matrix, `c_ij` (see [`power_ratio_matrix`]).
    pub power_ratio: Vec<Vec<u32>>,
    /// Diversity order per class, `b_i`.
    pub diversity: Vec<u32>,
    /// Common chip rate; only used to report class rates.
    pub chip_rate: f64,
}

impl SystemSpec {
    /// Single-class system with unit power ratio and no diversity.
    pub fn single_class(users: u32, p: &CodeParams) -> Self {
        Self {
            wavelengths: p.wavelengths,
            users: vec![users],
            lengths: vec![p.length],
            weights: vec![p.weight],
            correlation: vec![vec![p.lambda]],
            power_ratio: vec![vec![1]],
            diversity: vec![1],
            chip_rate: 1.0,
        }
    }

    pub fn classes(&self) -> usize {
        self.users.len()
    }

    /// Transmission rate of class `k`, `R_c / L_k`.
    pub fn class_rate(&self, k: usize) -> f64 {
        self.chip_rate / f64::from(self.lengths[k])
    }

    /// Code geometry of class `k` (using its auto cross-correlation `λ_kk`).
    pub fn class_code(&self, k: usize) -> CodeParams {
        CodeParams {
            wavelengths: self.wavelengths,
            length: self.lengths[k],
            weight: self.weights[k],
            lambda: self.correlation[k][k],
        }
    }

    fn has_unit_power_and_diversity(&self) -> bool {
        self.power_ratio.iter().flatten().all(|&c| c == 1) && self.diversity.iter().all(|&b| b == 1)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.classes();
        let bad = |msg: String| Err(Error::InvalidSystem(msg));
        if k == 0 {
            return bad("at least one class is required".into());
        }
        if self.lengths.len() != k || self.weights.len() != k || self.diversity.len() != k {
            return bad(format!("class vectors must all have length {k}"));
        }
        let square = |m: &Vec<Vec<u32>>| m.len() == k && m.iter().all(|row| row.len() == k);
        if !square(&self.correlation) || !square(&self.power_ratio) {
            return bad(format!("matrices must be {k}x{k}"));
        }
        if self.correlation.iter().flatten().any(|&l| l == 0) {
            return bad("cross-correlations must be >= 1".into());
        }
        for (i, row) in self.power_ratio.iter().enumerate() {
            if row[i] != 1 {
                return bad(format!("power ratio c[{i}][{i}] must be 1"));
            }
            if row.contains(&0) {
                return bad("power ratios must be >= 1".into());
            }
        }
        if self.diversity.contains(&0) {
            return bad("diversity orders must be >= 1".into());
        }
        if !(self.chip_rate.is_finite() && self.chip_rate > 0.0) {
            return bad("chip rate must be positive".into());
        }
        for i in 0..k {
            self.class_code(i).validate()?;
        }
        Ok(())
    }
}

/// Power-ratio matrix from per-class power levels: `⌊P_i / P_j⌋` when
/// `P_i ≥ P_j`, otherwise `1`.
pub fn power_ratio_matrix(levels: &[f64]) -> Result<Vec<Vec<u32>>> {
    if levels.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidArgument(
            "power levels must be positive".into(),
        ));
    }
    Ok(levels
        .iter()
        .map(|&pi| {
            levels
                .iter()
                .map(|&pj| {
                    if pi >= pj {
                        (pi / pj).floor() as u32
                    } else {
                        1
                    }
                })
                .collect()
        })
        .collect())
}

/// Per-pattern hit probabilities for every ordered class pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceModel {
    probs: Vec<Vec<Vec<RBig>>>,
}

impl InterferenceModel {
    /// `probs[k][q][m − 1]` is `P_m` for a class-`q` interferer on a class-`k`
    /// receiver.
    pub fn new(probs: Vec<Vec<Vec<RBig>>>) -> Self {
        Self { probs }
    }

    pub fn pair(&self, k: usize, q: usize) -> &[RBig] {
        &self.probs[k][q]
    }

    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        let k = spec.classes();
        if self.probs.len() != k || self.probs.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidModel(format!(
                "expected a {k}x{k} table of vectors"
            )));
        }
        for (a, row) in self.probs.iter().enumerate() {
            for (b, ps) in row.iter().enumerate() {
                let lambda = spec.correlation[a][b] as usize;
                if ps.len() != lambda {
                    return Err(Error::InvalidModel(format!(
                        "pair ({a},{b}) needs {lambda} probabilities, got {}",
                        ps.len()
                    )));
                }
                if ps.iter().any(|p| *p < RBig::ZERO) {
                    return Err(Error::InvalidModel(format!(
                        "pair ({a},{b}) has a negative entry"
                    )));
                }
                let total = ps.iter().fold(RBig::ZERO, |acc, p| acc + p);
                if total > RBig::ONE {
                    return Err(Error::InvalidModel(format!("pair ({a},{b}) sums above 1")));
                }
            }
        }
        Ok(())
    }
}

/// Worst-case interference: every interferer that hits does so with the
/// full `λ_kq` marks, `P_m = 0` for `m < λ_kq` and
/// `P_λ = W_k·W_q / (2·M·λ_kq·L_q·C(W_k, λ_kq))`.
pub fn worst_case_model(spec: &SystemSpec) -> Result<InterferenceModel> {
    spec.validate()?;
    let k = spec.classes();
    let mut probs = Vec::with_capacity(k);
    for a in 0..k {
        let mut row = Vec::with_capacity(k);
        for b in 0..k {
            let lambda = spec.correlation[a][b];
            let wk = spec.weights[a];
            if lambda > wk {
                return Err(Error::InvalidSystem(format!(
                    "lambda[{a}][{b}] = {lambda} exceeds W_{a} = {wk}"
                )));
            }
            let num = UBig::from(wk) * UBig::from(spec.weights[b]);
            let den = UBig::from(2u8)
                * UBig::from(spec.wavelengths)
                * UBig::from(lambda)
                * UBig::from(spec.lengths[b])
                * binomial(wk.into(), lambda.into());
            let p = RBig::from_parts(IBig::from(num), den);
            if p > RBig::ONE {
                return Err(Error::InvalidModel(format!(
                    "worst-case hit probability for pair ({a},{b}) exceeds 1"
                )));
            }
            let mut ps = vec![RBig::ZERO; lambda as usize];
            ps[lambda as usize - 1] = p;
            row.push(ps);
        }
        probs.push(row);
    }
    Ok(InterferenceModel { probs })
}

/// Coefficients of the per-interferer factor in the binomial basis:
/// the factor is `Σ_j β_j·C(i, j)` for `j = 0..=λ_kq`, with `β_0 = 1` and
/// `β_j = (−1)^j Σ_{m=j}^{λ} C(W_k − j, m − j)·P_m`.
///
/// Evaluated at `i` it is the probability that one class-`q` interferer
/// leaves a given set of `i` marks of the class-`k` receiver untouched.
pub fn bracket_coefficients(
    spec: &SystemSpec,
    model: &InterferenceModel,
    k: usize,
    q: usize,
) -> Result<Vec<RBig>> {
    spec.validate()?;
    if k >= spec.classes() || q >= spec.classes() {
        return Err(Error::InvalidArgument(format!(
            "class index out of range: ({k},{q})"
        )));
    }
    model.validate(spec)?;
    Ok(coefficients(spec.weights[k], model.pair(k, q)))
}

fn coefficients(weight: u32, ps: &[RBig]) -> Vec<RBig> {
    let lambda = ps.len() as u32;
    let mut out = Vec::with_capacity(ps.len() + 1);
    out.push(RBig::ONE);
    for j in 1..=lambda {
        let mut acc = RBig::ZERO;
        for m in j..=lambda {
            let c = binomial(i64::from(weight) - i64::from(j), i64::from(m - j));
            acc += RBig::from(c) * &ps[m as usize - 1];
        }
        out.push(if j % 2 == 1 { -acc } else { acc });
    }
    out
}

fn to_float(r: &RBig, bits: usize) -> Float {
    let num = Float::from(r.numerator().clone())
        .with_precision(bits)
        .value();
    let den = Float::from(r.denominator().clone())
        .with_precision(bits)
        .value();
    num / den
}

/// `Σ_{i=0}^{W} (−1)^i C(W, i) Π_q bracket_q(i)^{e_q}`. In strict mode a
/// bracket outside `[0, 1]` (beyond rounding) is an error.
fn alternating_sum(
    weight: u32,
    interferers: &[(Vec<Float>, u32)],
    bits: usize,
    strict: bool,
) -> Result<Float> {
    let one = Float::ONE.with_precision(bits).value();
    let tolerance = Float::from_parts(IBig::ONE, -(bits as isize) / 2);
    let degree = interferers.iter().map(|(c, _)| c.len()).max().unwrap_or(1) - 1;
    let choose = |n: u32, k: usize| Float::from(binomial(n.into(), k as i64));
    let mut sum = Float::ZERO.with_precision(bits).value();
    for i in 0..=weight {
        let basis: Vec<Float> = (0..=degree).map(|j| choose(i, j)).collect();
        let mut product = one.clone();
        for (coeffs, exponent) in interferers {
            let mut bracket = one.clone();
            for (c, b) in coeffs.iter().zip(&basis).skip(1) {
                if *b != Float::ZERO {
                    bracket += c * b;
                }
            }
            if strict {
                if bracket < -tolerance.clone() || bracket > &one + &tolerance {
                    return Err(Error::InvalidModel(format!(
                        "interference factor at i={i} is {} (outside [0, 1])",
                        bracket.to_f64().value()
                    )));
                }
                if bracket < Float::ZERO {
                    bracket = Float::ZERO.with_precision(bits).value();
                }
            }
            if *exponent > 0 {
                product *= bracket.powi(IBig::from(*exponent));
            }
        }
        let term = product * choose(weight, i as usize);
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum)
}

/// Exact-bound BER of class `k`:
/// `½ Σ_{i=0}^{W_k} (−1)^i C(W_k, i) Π_q [bracket_kq(i)]^{N_q − [q = k]}`,
/// clamped to `[0, ½]`.
///
/// Only unit-power, no-diversity systems are supported; evaluation carries
/// at least `precision` significant digits.
pub fn exact_ber(
    spec: &SystemSpec,
    k: usize,
    model: &InterferenceModel,
    precision: Precision,
) -> Result<BerValue> {
    spec.validate()?;
    if k >= spec.classes() {
        return Err(Error::InvalidArgument(format!(
            "class index {k} out of range"
        )));
    }
    if !spec.has_unit_power_and_diversity() {
        return Err(Error::Unsupported(
            "exact BER is only defined for unit power ratios and diversity orders".into(),
        ));
    }
    if spec.users[k] == 0 {
        return Err(Error::InvalidSystem(format!("class {k} has no users")));
    }
    Precision::digits(precision.get())?;
    model.validate(spec)?;

    let bits = precision.bits();
    let weight = spec.weights[k];
    let interferers: Vec<(Vec<Float>, u32)> = (0..spec.classes())
        .map(|q| {
            let coeffs = coefficients(weight, model.pair(k, q));
            let exponent = spec.users[q] - u32::from(q == k);
            (coeffs.iter().map(|c| to_float(c, bits)).collect(), exponent)
        })
        .collect();
    let sum = alternating_sum(weight, &interferers, bits, true)?;
    let half = Float::from_parts(IBig::ONE, -1);
    let mut ber = sum * &half;
    if ber < Float::ZERO {
        ber = Float::ZERO;
    } else if ber > half {
        ber = half;
    }
    Ok(BerValue(ber))
}

/// [`exact_ber`] of a single-class system under the worst-case model.
pub fn single_class_ber(users: u32, p: &CodeParams, precision: Precision) -> Result<BerValue> {
    let spec = SystemSpec::single_class(users, p);
    let model = worst_case_model(&spec)?;
    exact_ber(&spec, 0, &model, precision)
}

/// Worst-case single-class BER evaluated formally: no model validation, no
/// range checks, no clamping. Past the weight bound the value has no
/// probabilistic meaning but stays a smooth function of the parameters,
/// which is what a boundary walk needs.
pub(crate) fn formal_single_class_ber(users: u32, p: &CodeParams, precision: Precision) -> f64 {
    let bits = precision.bits();
    let hit = RBig::from_parts(
        IBig::from(p.weight) * IBig::from(p.weight),
        UBig::from(2u8)
            * UBig::from(p.wavelengths)
            * UBig::from(p.lambda)
            * UBig::from(p.length)
            * binomial(p.weight.into(), p.lambda.into()),
    );
    let mut ps = vec![RBig::ZERO; p.lambda as usize];
    ps[p.lambda as usize - 1] = hit;
    let coeffs = coefficients(p.weight, &ps)
        .iter()
        .map(|c| to_float(c, bits))
        .collect();
    let sum = alternating_sum(p.weight, &[(coeffs, users - 1)], bits, false)
        .expect("non-strict evaluation cannot fail");
    (sum * Float::from_parts(IBig::ONE, -1)).to_f64().value()
}

fn approx_term(users: u32, weight: u32, wavelengths: u32, lambda: u32, length: u32, c: u32) -> f64 {
    let base = (f64::from(users) * f64::from(weight))
        / (2.0 * f64::from(wavelengths) * f64::from(lambda) * f64::from(length));
    base.powf(f64::from(c) / f64::from(lambda))
}

fn approx_total(sum: f64, weight: u32, diversity: u32) -> f64 {
    0.5 * sum.powf(f64::from(weight) * f64::from(diversity))
}

/// Closed-form approximate BER of class `k`:
/// `½ [Σ_i (N_i W_i / (2 M λ_ki L_i))^{c_ki/λ_ki}]^{W_k b_k}`.
///
/// Not clamped; outside its validity regime the value can exceed `½`.
pub fn approx_ber(spec: &SystemSpec, k: usize) -> Result<f64> {
    spec.validate()?;
    if k >= spec.classes() {
        return Err(Error::InvalidArgument(format!(
            "class index {k} out of range"
        )));
    }
    let sum = (0..spec.classes()).fold(0.0, |acc, i| {
        acc + approx_term(
            spec.users[i],
            spec.weights[i],
            spec.wavelengths,
            spec.correlation[k][i],
            spec.lengths[i],
            spec.power_ratio[k][i],
        )
    });
    Ok(approx_total(sum, spec.weights[k], spec.diversity[k]))
}

/// Single-class approximation `½ (N W / (2 M L λ))^{W/λ}`.
pub fn approx_ber_single(users: u32, p: &CodeParams) -> f64 {
    let term = approx_term(users, p.weight, p.wavelengths, p.lambda, p.length, 1);
    approx_total(0.0 + term, p.weight, 1)
}
