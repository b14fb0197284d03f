//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use ocdma_core::{
    approx_ber, approx_ber_single, build_codebooks, complexity_gain, rate_optimize_brute,
    rate_optimize_heuristic, simulate_gain, single_class_ber, AllocationMode, CodeParams,
    CodebookTable, DesignResult, DesignTarget, GainVariant, Method, Precision, SearchBounds,
    SimConfig, SystemSpec,
};

const THRESHOLDS: [f64; 3] = [1e-5, 1e-7, 1e-9];

type Outcome = Result<String, String>;

/// `(N, threshold index) → (brute, heuristic)` on N = 10..60 step 10.
type Grid = BTreeMap<(u32, usize), (DesignResult, DesignResult)>;

fn design_grid() -> Grid {
    let mut grid = Grid::new();
    for (t, &pe) in THRESHOLDS.iter().enumerate() {
        for n in (10..=60).step_by(10) {
            let target = DesignTarget::new(n, 1, pe);
            let brute = rate_optimize_brute(&target, &SearchBounds::default()).expect("brute");
            let heuristic = rate_optimize_heuristic(&target).expect("heuristic");
            grid.insert((n, t), (brute, heuristic));
        }
    }
    grid
}

/// Worst-case single-class BER from the closed-form factor, over rationals.
fn rational_ber(users: u32, length: u32, weight: u32, lambda: u32) -> BigRational {
    let half = BigRational::new(1.into(), 2.into());
    (0..=weight).fold(BigRational::zero(), |acc, i| {
        let f = common::single_class_factor(weight, lambda, length, i);
        let term = BigRational::from_integer(common::choose(weight.into(), i.into()))
            * num_traits::pow(f, (users - 1) as usize);
        if i % 2 == 0 {
            acc + term
        } else {
            acc - term
        }
    }) * half
}

fn design_reproduction(grid: &Grid) -> Outcome {
    let reported = [809u32, 1139, 1445];
    let mut notes = Vec::new();
    let mut fallback = false;
    for (t, &want) in reported.iter().enumerate() {
        let code = grid[&(60, t)].0.code.ok_or("N=60 infeasible")?;
        let got = code.length;
        let dev = (f64::from(got) - f64::from(want)) / f64::from(want);
        if got == want {
            notes.push(format!("{got}"));
        } else if dev.abs() <= 0.05 {
            fallback = true;
            // exact-rational trace: the reported length misses the target at
            // the chosen (W, λ), the returned one meets it
            let pe = BigRational::new(1.into(), num_traits::pow(num_bigint::BigInt::from(10), 9));
            let at_reported = rational_ber(60, want, code.weight, code.lambda);
            let below = rational_ber(60, got - 1, code.weight, code.lambda);
            let at_got = rational_ber(60, got, code.weight, code.lambda);
            if !(at_reported > pe && below > pe && at_got <= pe) {
                return Err(format!("rational trace inconsistent at L={got}"));
            }
            notes.push(format!(
                "{got} (reported {want}, {:+.2}%; rational BER at W={} λ={}: L={want} {:.3e}, L={} {:.3e}, L={got} {:.3e})",
                100.0 * dev,
                code.weight,
                code.lambda,
                at_reported.to_f64().unwrap(),
                got - 1,
                below.to_f64().unwrap(),
                at_got.to_f64().unwrap(),
            ));
        } else {
            return Err(format!(
                "Pe_th={}: L={got}, reported {want} ({:+.2}%)",
                THRESHOLDS[t],
                100.0 * dev
            ));
        }
    }
    let how = if fallback {
        "exact match or within ±5% fallback"
    } else {
        "exact match"
    };
    Ok(format!("N=60 brute-force L = {} [{how}]", notes.join(", ")))
}

fn heuristic_parity(grid: &Grid) -> Outcome {
    let mut worst = 0.0f64;
    for (&(n, t), (brute, heuristic)) in grid {
        let b = brute.code.ok_or(format!("brute infeasible at N={n}"))?;
        let h = heuristic
            .code
            .ok_or(format!("heuristic infeasible at N={n}"))?;
        if (b.weight, b.lambda) != (h.weight, h.lambda) {
            return Err(format!(
                "N={n} Pe_th={}: brute {b:?} vs heuristic {h:?}",
                THRESHOLDS[t]
            ));
        }
        let ratio = f64::from(h.length) / f64::from(b.length);
        if ratio > 1.02 {
            return Err(format!("N={n} Pe_th={}: L ratio {ratio:.4}", THRESHOLDS[t]));
        }
        worst = worst.max(ratio);
    }
    Ok(format!(
        "{} grid points: W and λ identical, worst L ratio {worst:.4}",
        grid.len()
    ))
}

fn complexity(grid: &Grid) -> Outcome {
    let target = DesignTarget::new(60, 1, 1e-7);
    let gain = complexity_gain(&target, &SearchBounds::default()).map_err(|e| e.to_string())?;
    let (b, h) = &grid[&(60, 1)];
    let msg = format!("G_com = {} / {} = {gain:.0}", b.eval_count, h.eval_count);
    if gain >= 1e4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

struct Tables {
    rate: CodebookTable,
    power: CodebookTable,
}

fn tables() -> Vec<Tables> {
    THRESHOLDS
        .iter()
        .map(|&pe| {
            let target = DesignTarget::new(60, 1, pe);
            let build = |mode| {
                build_codebooks(mode, &target, Method::Heuristic, &SearchBounds::default())
                    .expect("codebooks")
            };
            Tables {
                rate: build(AllocationMode::Rate),
                power: build(AllocationMode::Power),
            }
        })
        .collect()
}

fn gains(tabs: &[Tables], p_active: f64, t: usize) -> (f64, f64, f64) {
    let cfg = |mode| SimConfig {
        p_active,
        ..SimConfig::new(60, 1, THRESHOLDS[t], mode)
    };
    let rate = simulate_gain(&cfg(AllocationMode::Rate), &tabs[t].rate).expect("rate sim");
    let power = simulate_gain(&cfg(AllocationMode::Power), &tabs[t].power).expect("power sim");
    let variant = |v| power.estimate(v).expect("variant").gain;
    (
        rate.gain,
        variant(GainVariant::UserWeighted),
        variant(GainVariant::Unweighted),
    )
}

fn adaptive_gains(tabs: &[Tables]) -> Outcome {
    let (g_rat, g_pow, g_pow_flat) = gains(tabs, 0.5, 1);
    if (g_rat - 2.25).abs() > 0.20 {
        return Err(format!("G_rat = {g_rat:.4} outside 2.25 ± 0.20"));
    }
    if (g_pow - 0.27).abs() > 0.05 {
        return Err(format!(
            "user-weighted G_pow = {g_pow:.4} outside 0.27 ± 0.05 (unweighted {g_pow_flat:.4})"
        ));
    }
    let grid: Vec<f64> = (1..=10).map(|k| f64::from(k) / 10.0).collect();
    for (t, pe) in THRESHOLDS.iter().enumerate() {
        let sweep: Vec<(f64, f64, f64)> = grid.iter().map(|&p| gains(tabs, p, t)).collect();
        for (w, p) in sweep.windows(2).zip(&grid[1..]) {
            let (a, b) = (w[0], w[1]);
            if b.0 > a.0 || b.1 < a.1 || b.2 < a.2 {
                return Err(format!(
                    "Pe_th={pe}: ordering breaks at p_active={p}: {a:?} then {b:?}"
                ));
            }
        }
    }
    let by_pe: Vec<(f64, f64, f64)> = (0..THRESHOLDS.len()).map(|t| gains(tabs, 0.5, t)).collect();
    for w in by_pe.windows(2) {
        if !(w[1].0 > w[0].0 && w[1].1 > w[0].1 && w[1].2 > w[0].2) {
            return Err(format!("Pe_th ordering breaks: {by_pe:?}"));
        }
    }
    Ok(format!(
        "G_rat = {g_rat:.4}, G_pow = {g_pow:.4} (user-weighted default; unweighted {g_pow_flat:.4}); orderings hold over p_active 0.1..1.0 and Pe_th"
    ))
}

fn approximation_fidelity() -> Outcome {
    let systems = [(1000u32, 6u32, 1u32), (1000, 12, 2), (1000, 24, 3)];
    let mut notes = Vec::new();
    for (length, weight, lambda) in systems {
        let p = CodeParams::new(1, length, weight, lambda).map_err(|e| e.to_string())?;
        let (mut worst, mut points, mut users) = (0.0f64, 0, 1u32);
        loop {
            let exact = single_class_ber(users, &p, Precision::DEFAULT)
                .map_err(|e| e.to_string())?
                .to_f64();
            if exact > 1e-2 {
                break;
            }
            if exact >= 1e-9 {
                let gap = (approx_ber_single(users, &p).log10() - exact.log10()).abs();
                if gap > 1.0 {
                    return Err(format!(
                        "L={length} W={weight} λ={lambda} N={users}: {gap:.3} decades"
                    ));
                }
                worst = worst.max(gap);
                points += 1;
            }
            users += 1;
        }
        if points == 0 {
            return Err(format!("L={length} W={weight} λ={lambda}: empty window"));
        }
        notes.push(format!(
            "λ={lambda} (L={length}, W={weight}): {points} pts, worst {worst:.3}"
        ));
    }
    Ok(format!("|Δlog10| ≤ 1 decade; {}", notes.join("; ")))
}

fn oracle_equivalence() -> Outcome {
    let random = common::check_random_instances(200, 0x0c0de)?;
    let single = common::check_single_class_brackets(8)?;
    let two = common::check_two_class_brackets(8)?;
    Ok(format!(
        "{random}; brackets coefficient-exact: {single}, {two}"
    ))
}

fn trivial_anchors(tabs: &[Tables]) -> Outcome {
    for w in 1..=20 {
        let p = CodeParams::new(1, 400, w, w.min(3)).map_err(|e| e.to_string())?;
        if !single_class_ber(1, &p, Precision::DEFAULT)
            .map_err(|e| e.to_string())?
            .is_zero()
        {
            return Err(format!("N=1 BER nonzero at W={w}"));
        }
    }
    let one = CodeParams::new(1, 1, 1, 1).unwrap();
    for pe in THRESHOLDS {
        let target = DesignTarget::new(1, 1, pe);
        let b =
            rate_optimize_brute(&target, &SearchBounds::default()).map_err(|e| e.to_string())?;
        let h = rate_optimize_heuristic(&target).map_err(|e| e.to_string())?;
        if b.code != Some(one) || h.code != Some(one) {
            return Err(format!("N=1 design at {pe}: {:?} / {:?}", b.code, h.code));
        }
    }
    for t in 0..THRESHOLDS.len() {
        let (r, w, u) = gains(tabs, 1.0, t);
        if (r, w, u) != (1.0, 1.0, 1.0) {
            return Err(format!("p_active=1 gains {r}, {w}, {u}"));
        }
    }
    let mut checked = 0;
    for m in 1..=3 {
        for length in [1u32, 7, 100, 1139, 4000] {
            for weight in [1u32, 2, 5, 28, 100] {
                for lambda in 1..=5 {
                    let Ok(p) = CodeParams::new(m, length, weight, lambda) else {
                        continue;
                    };
                    for users in [1u32, 2, 10, 60, 500] {
                        let general = approx_ber(&SystemSpec::single_class(users, &p), 0)
                            .map_err(|e| e.to_string())?;
                        if general.to_bits() != approx_ber_single(users, &p).to_bits() {
                            return Err(format!(
                                "general approximation differs at {p:?} N={users}"
                            ));
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(format!(
        "N=1 ⇒ BER 0 and (1,1,1); p_active=1 ⇒ gains exactly 1; {checked} single-class reductions bit-identical"
    ))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let grid = design_grid();
    let tabs = tables();
    let criteria: [Criterion; 7] = [
        (
            "design reproduction",
            Box::new(|| design_reproduction(&grid)),
        ),
        ("heuristic parity", Box::new(|| heuristic_parity(&grid))),
        ("complexity gain", Box::new(|| complexity(&grid))),
        ("adaptive gains", Box::new(|| adaptive_gains(&tabs))),
        ("approximation fidelity", Box::new(approximation_fidelity)),
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("trivial anchors", Box::new(|| trivial_anchors(&tabs))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {} {name}: PASS - {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} {name}: FAIL - {msg}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
