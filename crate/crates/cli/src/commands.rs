use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use ocdma_core::{
    approx_ber_single, build_codebooks, complexity_gain, parse_events, power_optimize_brute,
    rate_optimize_brute, rate_optimize_heuristic, run_message_simulation, simulate_gain,
    single_class_ber, AllocationMode, CodeParams, DesignResult, DesignTarget, Method, Precision,
    SearchBounds, SimConfig,
};

use crate::config::{require, RunConfig};

/// Sweep points with no feasible design. Reported as exit code 1.
#[derive(Debug, Serialize)]
pub struct InfeasiblePoints {
    pub points: Vec<Point>,
}

#[derive(Debug, Serialize)]
pub struct Point {
    #[serde(rename = "N")]
    pub users: u32,
    pub pe_th: f64,
}

impl std::fmt::Display for InfeasiblePoints {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} sweep point(s) have no feasible design",
            self.points.len()
        )
    }
}

impl std::error::Error for InfeasiblePoints {}

const BER_KEYS: &[&str] = &["precision", "N", "M", "L", "W", "lambda"];
const DESIGN_KEYS: &[&str] = &[
    "precision",
    "N",
    "M",
    "pe_th",
    "method",
    "L",
    "l_max",
    "w_max",
    "lambda_max",
];
const SIMULATE_KEYS: &[&str] = &[
    "seed",
    "precision",
    "N",
    "M",
    "pe_th",
    "method",
    "l_max",
    "w_max",
    "lambda_max",
    "mode",
    "p_active",
    "intervals",
    "events",
    "period",
];
const COMPLEXITY_KEYS: &[&str] = &[
    "precision",
    "N",
    "M",
    "pe_th",
    "l_max",
    "w_max",
    "lambda_max",
];
const CODEBOOK_KEYS: &[&str] = &[
    "precision",
    "N",
    "M",
    "pe_th",
    "method",
    "l_max",
    "w_max",
    "lambda_max",
    "mode",
];

pub fn run(command: &str, cfg: &RunConfig) -> Result<()> {
    match command {
        "ber" => {
            cfg.check_keys(command, BER_KEYS)?;
            ber(cfg)
        }
        "design" => {
            cfg.check_keys(command, DESIGN_KEYS)?;
            design(cfg)
        }
        "simulate" => {
            cfg.check_keys(command, SIMULATE_KEYS)?;
            simulate(cfg)
        }
        "complexity" => {
            cfg.check_keys(command, COMPLEXITY_KEYS)?;
            complexity(cfg)
        }
        "codebooks" => {
            cfg.check_keys(command, CODEBOOK_KEYS)?;
            codebooks(cfg)
        }
        other => bail!("unknown command {other:?}"),
    }
}

fn precision(cfg: &RunConfig) -> Result<Precision> {
    Ok(match cfg.precision {
        Some(d) => Precision::digits(d)?,
        None => Precision::DEFAULT,
    })
}

fn bounds(cfg: &RunConfig) -> Result<SearchBounds> {
    let d = SearchBounds::default();
    let b = SearchBounds {
        l_max: cfg.l_max.unwrap_or(d.l_max),
        w_max: cfg.w_max.unwrap_or(d.w_max),
        lambda_max: cfg.lambda_max.unwrap_or(d.lambda_max),
    };
    b.validate()?;
    Ok(b)
}

fn single<T: Copy>(values: &[T], key: &str) -> Result<T> {
    match values {
        [v] => Ok(*v),
        _ => bail!("{key} takes a single value for this command"),
    }
}

fn target(cfg: &RunConfig) -> Result<DesignTarget> {
    let users = single(&require(&cfg.users, "N")?.0, "N")?;
    let pe = single(&require(&cfg.pe_th, "pe_th")?.0, "pe_th")?;
    let t =
        DesignTarget::new(users, cfg.wavelengths.unwrap_or(1), pe).with_precision(precision(cfg)?);
    t.validate()?;
    Ok(t)
}

fn method(cfg: &RunConfig, default: Method) -> Result<Method> {
    Ok(match &cfg.method {
        Some(m) => m.parse()?,
        None => default,
    })
}

fn mode(cfg: &RunConfig) -> Result<AllocationMode> {
    Ok(cfg.mode.as_deref().unwrap_or("rate").parse()?)
}

/// CSV writer on `--out`, or standard output.
fn writer(cfg: &RunConfig) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match &cfg.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn ber(cfg: &RunConfig) -> Result<()> {
    let users = require(&cfg.users, "N")?;
    let code = CodeParams::new(
        cfg.wavelengths.unwrap_or(1),
        require(&cfg.length, "L")?,
        require(&cfg.weight, "W")?,
        require(&cfg.lambda, "lambda")?,
    )?;
    let prec = precision(cfg)?;
    if users.0.contains(&0) {
        bail!("N must be at least 1");
    }
    let rows: Vec<(u32, f64, f64)> = users
        .0
        .par_iter()
        .map(|&n| {
            Ok((
                n,
                single_class_ber(n, &code, prec)?.to_f64(),
                approx_ber_single(n, &code),
            ))
        })
        .collect::<ocdma_core::Result<_>>()?;
    let mut out = writer(cfg)?;
    out.write_record(["N", "exact", "approx"])?;
    for (n, exact, approx) in rows {
        out.write_record([n.to_string(), sci(exact), sci(approx)])?;
    }
    out.flush()?;
    Ok(())
}

fn design(cfg: &RunConfig) -> Result<()> {
    let users = require(&cfg.users, "N")?.0;
    let thresholds = require(&cfg.pe_th, "pe_th")?.0;
    let m = cfg.wavelengths.unwrap_or(1);
    let prec = precision(cfg)?;
    let method = method(cfg, Method::Heuristic)?;
    let bounds = bounds(cfg)?;
    let length = match method {
        Method::Power => Some(require(&cfg.length, "L")?),
        _ if cfg.length.is_some() => bail!("L is only used by the power method"),
        _ => None,
    };

    let points: Vec<DesignTarget> = thresholds
        .iter()
        .flat_map(|&pe| {
            users
                .iter()
                .map(move |&n| DesignTarget::new(n, m, pe).with_precision(prec))
        })
        .collect();
    for t in &points {
        t.validate()?;
    }
    let results: Vec<DesignResult> = points
        .par_iter()
        .map(|t| match (method, length) {
            (Method::Power, Some(l)) => power_optimize_brute(t, l, &bounds),
            (Method::Brute, _) => rate_optimize_brute(t, &bounds),
            _ => rate_optimize_heuristic(t),
        })
        .collect::<ocdma_core::Result<_>>()?;

    let mut out = writer(cfg)?;
    out.write_record(["N", "Pe_th", "L", "W", "lambda", "eval_count", "method"])?;
    let mut missing = Vec::new();
    for (t, r) in points.iter().zip(&results) {
        let (l, w, lambda) = match r.code {
            Some(c) => (
                c.length.to_string(),
                c.weight.to_string(),
                c.lambda.to_string(),
            ),
            None => {
                missing.push(Point {
                    users: t.users,
                    pe_th: t.pe_threshold,
                });
                Default::default()
            }
        };
        out.write_record([
            t.users.to_string(),
            format!("{:e}", t.pe_threshold),
            l,
            w,
            lambda,
            r.eval_count.to_string(),
            r.method.to_string(),
        ])?;
    }
    out.flush()?;
    if !missing.is_empty() {
        return Err(InfeasiblePoints { points: missing }.into());
    }
    Ok(())
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let users = single(&require(&cfg.users, "N")?.0, "N")?;
    let thresholds = require(&cfg.pe_th, "pe_th")?.0;
    let m = cfg.wavelengths.unwrap_or(1);
    let mode = mode(cfg)?;
    let method = method(cfg, Method::Heuristic)?;
    let bounds = bounds(cfg)?;
    let prec = precision(cfg)?;

    let base = |pe: f64| {
        let mut sim = SimConfig::new(users, m, pe, mode);
        if let Some(s) = cfg.seed {
            sim.seed = s;
        }
        if let Some(i) = cfg.intervals {
            sim.intervals = i;
        }
        if let Some(t) = cfg.period {
            sim.period = t;
        }
        sim
    };
    let table_for = |pe: f64| {
        let target = DesignTarget::new(users, m, pe).with_precision(prec);
        build_codebooks(mode, &target, method, &bounds)
    };

    if let Some(path) = &cfg.events {
        if cfg.p_active.is_some() {
            bail!("p_active is not used with an event trace");
        }
        let pe = single(&thresholds, "pe_th")?;
        let events =
            parse_events(File::open(path).with_context(|| format!("opening {}", path.display()))?)?;
        let sim = base(pe);
        let table = table_for(pe)?;
        let assignments = run_message_simulation(&sim, &table, &events)?;
        let mut out = writer(cfg)?;
        out.write_record(["time", "book", "L", "W", "lambda"])?;
        for a in assignments {
            out.write_record([
                a.time.to_string(),
                a.book.to_string(),
                a.code.length.to_string(),
                a.code.weight.to_string(),
                a.code.lambda.to_string(),
            ])?;
        }
        out.flush()?;
        return Ok(());
    }

    let grid = cfg
        .p_active
        .clone()
        .map(|p| p.0)
        .unwrap_or_else(|| vec![0.5]);
    for &p in &grid {
        if !(p > 0.0 && p <= 1.0) {
            bail!("p_active must lie in (0, 1], got {p}");
        }
    }
    let mut rows = Vec::new();
    for &pe in &thresholds {
        let table = table_for(pe)?;
        for &p in &grid {
            let report = simulate_gain(
                &SimConfig {
                    p_active: p,
                    ..base(pe)
                },
                &table,
            )?;
            for e in report.estimates {
                rows.push([
                    p.to_string(),
                    format!("{pe:e}"),
                    sci(e.gain),
                    sci(e.stderr),
                    e.variant.to_string(),
                ]);
            }
        }
    }
    let mut out = writer(cfg)?;
    out.write_record(["p_active", "Pe_th", "gain", "stderr", "variant"])?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

fn complexity(cfg: &RunConfig) -> Result<()> {
    let ratio = complexity_gain(&target(cfg)?, &bounds(cfg)?)?;
    let line = format!("{ratio}\n");
    match &cfg.out {
        Some(path) => create(path)?.write_all(line.as_bytes())?,
        None => io::stdout().write_all(line.as_bytes())?,
    }
    Ok(())
}

fn codebooks(cfg: &RunConfig) -> Result<()> {
    let table = build_codebooks(
        mode(cfg)?,
        &target(cfg)?,
        method(cfg, Method::Heuristic)?,
        &bounds(cfg)?,
    )?;
    let mut out = writer(cfg)?;
    out.write_record(["n", "L", "W", "lambda"])?;
    for (n, c) in table.entries() {
        out.write_record([
            n.to_string(),
            c.length.to_string(),
            c.weight.to_string(),
            c.lambda.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
