//! Exact-rational oracle shared by the integration tests.
//!
//! The oracle never uses the engine's binomial-basis coefficients. Each
//! interferer factor is rebuilt from its meaning, the probability that an
//! interferer's hit pattern misses a given set of `i` marks, by
//! enumerating every `m`-subset of the `W` marks.

#![allow(dead_code)]

use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;
use num_bigint::BigInt;
use num_integer::binomial as nbinom;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ocdma_core::{
    bracket_coefficients, exact_ber, worst_case_model, CodeParams, InterferenceModel, Precision,
    SystemSpec,
};

pub fn big(n: u64) -> BigInt {
    BigInt::from(n)
}

pub fn choose(n: u64, k: u64) -> BigInt {
    if k > n {
        BigInt::zero()
    } else {
        nbinom(big(n), big(k))
    }
}

/// `C(x, k)` as a polynomial in `x`, valid for negative `x`.
pub fn poly_choose(x: i64, k: u32) -> BigRational {
    let num = (0..i64::from(k)).fold(BigInt::one(), |acc, t| acc * BigInt::from(x - t));
    let factorial = (1..=u64::from(k)).fold(BigInt::one(), |acc, t| acc * big(t));
    BigRational::new(num, factorial)
}

pub fn rat(r: &RBig) -> BigRational {
    let num: BigInt = r.numerator().to_string().parse().unwrap();
    let den: BigInt = r.denominator().to_string().parse().unwrap();
    BigRational::new(num, den)
}

pub fn to_rbig(r: &BigRational) -> RBig {
    let num: IBig = r.numer().to_string().parse().unwrap();
    let den: UBig = r.denom().to_string().parse().unwrap();
    RBig::from_parts(num, den)
}

/// Probability that one interferer with per-pattern hit probabilities
/// `ps[m-1]` leaves the first `i` of `w` marks untouched.
pub fn miss_probability(w: u32, i: u32, ps: &[BigRational]) -> BigRational {
    let marked: u32 = (1u32 << i) - 1;
    let mut prob = BigRational::one();
    for pattern in 0u32..(1u32 << w) {
        let m = pattern.count_ones() as usize;
        if m == 0 || m > ps.len() {
            continue;
        }
        if pattern & marked != 0 {
            prob -= &ps[m - 1];
        }
    }
    prob
}

/// `½ Σ_i (−1)^i C(W_k, i) Π_q miss_q(i)^{N_q − [q = k]}` over exact rationals.
pub fn oracle_ber(spec: &SystemSpec, k: usize, probs: &[Vec<Vec<BigRational>>]) -> BigRational {
    let w = spec.weights[k];
    let mut sum = BigRational::zero();
    for i in 0..=w {
        let mut term = BigRational::from_integer(choose(w.into(), i.into()));
        for (q, hits) in probs[k].iter().enumerate() {
            let e = spec.users[q] - u32::from(q == k);
            let f = miss_probability(w, i, hits);
            term *= num_traits::pow(f, e as usize);
        }
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum / BigRational::from_integer(big(2))
}

pub fn ber_as_rational(spec: &SystemSpec, k: usize, model: &InterferenceModel) -> BigRational {
    let v = exact_ber(spec, k, model, Precision::DEFAULT).unwrap();
    let (sig, exp) = v.to_parts();
    let sig: BigInt = sig.to_string().parse().unwrap();
    let scale = BigRational::from_integer(num_traits::pow(big(2), exp.unsigned_abs()));
    let sig = BigRational::from_integer(sig);
    if exp >= 0 {
        sig * scale
    } else {
        sig / scale
    }
}

pub fn worst_case_rationals(spec: &SystemSpec) -> Vec<Vec<Vec<BigRational>>> {
    let model = worst_case_model(spec).unwrap();
    (0..spec.classes())
        .map(|k| {
            (0..spec.classes())
                .map(|q| model.pair(k, q).iter().map(rat).collect())
                .collect()
        })
        .collect()
}

/// Random per-pattern probabilities whose total hit mass stays at most 1.
pub fn random_rationals(rng: &mut ChaCha8Rng, spec: &SystemSpec) -> Vec<Vec<Vec<BigRational>>> {
    (0..spec.classes())
        .map(|k| {
            (0..spec.classes())
                .map(|q| {
                    let lambda = spec.correlation[k][q];
                    let budget = BigRational::new(big(rng.gen_range(1..=40)), big(100));
                    (1..=lambda)
                        .map(|m| {
                            let share = BigRational::new(
                                big(rng.gen_range(0..=10)),
                                big(10 * u64::from(lambda)),
                            );
                            &budget * share / choose(spec.weights[k].into(), m.into())
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn random_spec(rng: &mut ChaCha8Rng, classes: usize) -> SystemSpec {
    let weights: Vec<u32> = (0..classes).map(|_| rng.gen_range(1..=10)).collect();
    let correlation: Vec<Vec<u32>> = (0..classes)
        .map(|k| {
            (0..classes)
                .map(|_| rng.gen_range(1..=weights[k].min(3)))
                .collect()
        })
        .collect();
    let lengths: Vec<u32> = (0..classes)
        .map(|q| {
            // long enough for every worst-case hit probability to stay below 1
            let wmax = *weights.iter().max().unwrap();
            let need = (wmax * weights[q]).div_ceil(2);
            rng.gen_range(need.max(weights[q])..=need.max(weights[q]) + 60)
        })
        .collect();
    let users: Vec<u32> = (0..classes)
        .map(|_| rng.gen_range(1..=20 / classes as u32))
        .collect();
    SystemSpec {
        wavelengths: 1,
        users,
        lengths,
        weights,
        correlation,
        power_ratio: vec![vec![1; classes]; classes],
        diversity: vec![1; classes],
        chip_rate: 1.0,
    }
}

pub fn relative_error(got: &BigRational, want: &BigRational) -> f64 {
    if want.is_zero() {
        return if got.is_zero() {
            0.0
        } else {
            got.abs().to_f64().unwrap()
        };
    }
    ((got - want) / want).abs().to_f64().unwrap()
}

/// Binomial-basis coefficients of a polynomial of degree ≤ `degree`, read
/// off as forward differences at 0: `β_j = Δ^j f(0)`.
pub fn forward_differences(f: impl Fn(u32) -> BigRational, degree: u32) -> Vec<BigRational> {
    let values: Vec<BigRational> = (0..=degree + 1).map(&f).collect();
    (0..=degree + 1)
        .map(|j| {
            (0..=j).fold(BigRational::zero(), |acc, t| {
                let c = BigRational::from_integer(choose(j.into(), t.into()));
                if (j - t) % 2 == 0 {
                    acc + c * &values[t as usize]
                } else {
                    acc - c * &values[t as usize]
                }
            })
        })
        .collect()
}

/// `f(i) = 1 − (W²/(2MλL))·[1 − C(W−i, λ)/C(W, λ)]`.
pub fn single_class_factor(w: u32, lambda: u32, length: u32, i: u32) -> BigRational {
    let q = BigRational::new(big(u64::from(w * w)), big(2 * u64::from(lambda * length)));
    let ratio = poly_choose(i64::from(w) - i64::from(i), lambda)
        / BigRational::from_integer(choose(w.into(), lambda.into()));
    BigRational::one() - q * (BigRational::one() - ratio)
}

/// Cross-class factor coefficients `g_j = q·(−1)^j C(W_1 − j, λ − j)`,
/// `q = W_1 W_2 / (2Mλ L_2 C(W_1, λ))`, with `kernel(w1, λ, j)` supplying
/// the binomial.
pub fn cross_class_coefficients(
    w1: u32,
    w2: u32,
    lambda: u32,
    l2: u32,
    kernel: impl Fn(u32, u32, u32) -> BigInt,
) -> Vec<BigRational> {
    let q = BigRational::new(
        big(u64::from(w1 * w2)),
        big(2 * u64::from(lambda * l2)) * choose(w1.into(), lambda.into()),
    );
    std::iter::once(BigRational::one())
        .chain((1..=lambda).map(|j| {
            let c = &q * BigRational::from_integer(kernel(w1, lambda, j));
            if j % 2 == 1 {
                -c
            } else {
                c
            }
        }))
        .collect()
}

pub fn two_class(w1: u32, w2: u32, l1: u32, l2: u32, lambda: [[u32; 2]; 2]) -> SystemSpec {
    SystemSpec {
        wavelengths: 1,
        users: vec![4, 3],
        lengths: vec![l1, l2],
        weights: vec![w1, w2],
        correlation: lambda.iter().map(|r| r.to_vec()).collect(),
        power_ratio: vec![vec![1; 2]; 2],
        diversity: vec![1; 2],
        chip_rate: 1.0,
    }
}

/// Engine vs. oracle on `count` random instances (a third of them
/// two-class, half with random rather than worst-case models).
pub fn check_random_instances(count: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..count {
        let classes = if case % 3 == 2 { 2 } else { 1 };
        let spec = random_spec(&mut rng, classes);
        let probs = if case % 2 == 0 {
            worst_case_rationals(&spec)
        } else {
            random_rationals(&mut rng, &spec)
        };
        let model = InterferenceModel::new(
            probs
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|ps| ps.iter().map(to_rbig).collect())
                        .collect()
                })
                .collect(),
        );
        for k in 0..classes {
            let want = oracle_ber(&spec, k, &probs);
            if want.is_negative() {
                return Err(format!("oracle BER negative for {spec:?}"));
            }
            let got = ber_as_rational(&spec, k, &model);
            let err = relative_error(&got, &want);
            if err > 1e-15 {
                return Err(format!(
                    "case {case} class {k}: relative error {err:e} for {spec:?}"
                ));
            }
            worst = worst.max(err);
        }
    }
    Ok(format!(
        "{count} instances, worst relative error {worst:.2e}"
    ))
}

/// Single-class worst-case bracket vs. the closed-form factor
/// `1 − (W²/(2MλL))·[1 − C(W−i, λ)/C(W, λ)]`, for every `λ ≤ W ≤ max_w`.
pub fn check_single_class_brackets(max_w: u32) -> Result<String, String> {
    let mut checked = 0;
    for w in 1..=max_w {
        for lambda in 1..=w {
            let length = 50 + 7 * w;
            let spec = SystemSpec::single_class(5, &CodeParams::new(1, length, w, lambda).unwrap());
            let got: Vec<BigRational> =
                bracket_coefficients(&spec, &worst_case_model(&spec).unwrap(), 0, 0)
                    .map_err(|e| e.to_string())?
                    .iter()
                    .map(rat)
                    .collect();
            let want = forward_differences(|i| single_class_factor(w, lambda, length, i), lambda);
            if got.len() as u32 != lambda + 1 || want[..=lambda as usize] != got[..] {
                return Err(format!("W={w} λ={lambda}: {got:?} vs {want:?}"));
            }
            if !want[lambda as usize + 1].is_zero() {
                return Err(format!(
                    "closed form has degree above λ for W={w} λ={lambda}"
                ));
            }
            if got
                .iter()
                .enumerate()
                .skip(1)
                .any(|(j, c)| c.is_negative() != (j % 2 == 1))
            {
                return Err(format!(
                    "coefficient signs do not alternate for W={w} λ={lambda}"
                ));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} single-class (W, λ) pairs"))
}

/// Two-class worst-case brackets vs. the cross-class polynomials with
/// kernel `C(W_1 − j, λ − j)`. The kernel `C(W_1 − λ, λ − j)` is also
/// compared: it must agree for `λ = 1` and differ somewhere above.
pub fn check_two_class_brackets(max_w: u32) -> Result<String, String> {
    let corrected = |w1: u32, lambda: u32, j: u32| choose((w1 - j).into(), (lambda - j).into());
    let shifted = |w1: u32, lambda: u32, j: u32| choose((w1 - lambda).into(), (lambda - j).into());
    let (mut checked, mut shifted_mismatch) = (0, 0);
    for w1 in 1..=max_w {
        for w2 in 1..=max_w {
            for l12 in 1..=w1.min(3) {
                let l11 = w1.min(2);
                let spec = two_class(w1, w2, 90, 70, [[l11, l12], [w2.min(l12), w2.min(2)]]);
                let model = worst_case_model(&spec).map_err(|e| e.to_string())?;
                let coeffs = |k, q| -> Result<Vec<BigRational>, String> {
                    Ok(bracket_coefficients(&spec, &model, k, q)
                        .map_err(|e| e.to_string())?
                        .iter()
                        .map(rat)
                        .collect())
                };
                let (f, g) = (coeffs(0, 0)?, coeffs(0, 1)?);
                if g != cross_class_coefficients(w1, w2, l12, 70, corrected) {
                    return Err(format!(
                        "cross-class bracket differs at W1={w1} W2={w2} λ12={l12}"
                    ));
                }
                if f != cross_class_coefficients(w1, w1, l11, 90, corrected) {
                    return Err(format!("own-class bracket differs at W1={w1} λ11={l11}"));
                }
                let from_values = forward_differences(
                    |i| {
                        let q =
                            BigRational::new(big(u64::from(w1 * w2)), big(2 * u64::from(l12) * 70));
                        let ratio = poly_choose(i64::from(w1) - i64::from(i), l12)
                            / BigRational::from_integer(choose(w1.into(), l12.into()));
                        BigRational::one() - q * (BigRational::one() - ratio)
                    },
                    l12,
                );
                if from_values[..=l12 as usize] != g[..] {
                    return Err(format!(
                        "value-based coefficients differ at W1={w1} W2={w2} λ12={l12}"
                    ));
                }
                let alt = cross_class_coefficients(w1, w2, l12, 70, shifted);
                if l12 == 1 && alt != g {
                    return Err(format!("λ = 1 kernels disagree at W1={w1} W2={w2}"));
                }
                if g != alt {
                    shifted_mismatch += 1;
                }
                checked += 1;
            }
        }
    }
    if shifted_mismatch == 0 {
        return Err("C(W−λ, λ−j) kernel unexpectedly matched everywhere".into());
    }
    Ok(format!("{checked} two-class configurations; C(W−λ, λ−j) kernel differs in {shifted_mismatch} (all λ ≥ 2)"))
}
