use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Integer sweep: `a,b,c` or an inclusive range `start:end[:step]`, or a
/// mix such as `1,5:60:5`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Sweep(pub Vec<u32>);

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let nums: Vec<u32> = part
                .split(':')
                .map(|x| {
                    x.trim()
                        .parse::<u32>()
                        .map_err(|_| format!("bad integer in {part:?}"))
                })
                .collect::<Result<_, _>>()?;
            match nums[..] {
                [v] => out.push(v),
                [a, b] | [a, b, 1] => out.extend(a..=b),
                [_, _, 0] => return Err(format!("zero step in {part:?}")),
                [a, b, step] => out.extend((a..=b).step_by(step as usize)),
                _ => return Err(format!("bad range {part:?}")),
            }
        }
        if out.is_empty() {
            return Err(format!("empty sweep {s:?}"));
        }
        Ok(Sweep(out))
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl<'de> Deserialize<'de> for Sweep {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(u32),
            Many(Vec<u32>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::One(v) => Ok(Sweep(vec![v])),
            Raw::Many(v) if !v.is_empty() => Ok(Sweep(v)),
            Raw::Many(_) => Err(serde::de::Error::custom("empty sweep")),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Float list: `1e-5,1e-7` on the command line, a number or an array in JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<f64>().map_err(|_| format!("bad number {p:?}")))
            .collect::<Result<_, _>>()?;
        if v.is_empty() {
            return Err(format!("empty list {s:?}"));
        }
        Ok(FloatList(v))
    }
}

impl<'de> Deserialize<'de> for FloatList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(f64),
            Many(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::One(v) => Ok(FloatList(vec![v])),
            Raw::Many(v) if !v.is_empty() => Ok(FloatList(v)),
            Raw::Many(_) => Err(serde::de::Error::custom("empty list")),
        }
    }
}

/// Every run parameter. The same shape is read from a `--config` JSON file
/// and built from command-line flags; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub struct RunConfig {
    pub command: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub precision: Option<u32>,
    pub threads: Option<usize>,
    #[serde(rename = "N")]
    pub users: Option<Sweep>,
    #[serde(rename = "M")]
    pub wavelengths: Option<u32>,
    pub pe_th: Option<FloatList>,
    pub method: Option<String>,
    #[serde(rename = "L")]
    pub length: Option<u32>,
    #[serde(rename = "W")]
    pub weight: Option<u32>,
    pub lambda: Option<u32>,
    pub l_max: Option<u32>,
    pub w_max: Option<u32>,
    pub lambda_max: Option<u32>,
    pub mode: Option<String>,
    pub p_active: Option<FloatList>,
    pub intervals: Option<u64>,
    pub events: Option<PathBuf>,
    pub period: Option<f64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($field:ident),+) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field; } )+
    };
}

macro_rules! present {
    ($cfg:ident, $($field:ident => $key:literal),+) => {{
        let mut keys = Vec::new();
        $( if $cfg.$field.is_some() { keys.push($key); } )+
        keys
    }};
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overlay(mut self, flags: RunConfig) -> Self {
        overlay!(
            self,
            flags,
            command,
            out,
            seed,
            precision,
            threads,
            users,
            wavelengths,
            pe_th,
            method,
            length,
            weight,
            lambda,
            l_max,
            w_max,
            lambda_max,
            mode,
            p_active,
            intervals,
            events,
            period
        );
        self
    }

    fn keys(&self) -> Vec<&'static str> {
        present!(self,
            seed => "seed", precision => "precision", users => "N", wavelengths => "M",
            pe_th => "pe_th", method => "method", length => "L", weight => "W", lambda => "lambda",
            l_max => "l_max", w_max => "w_max", lambda_max => "lambda_max", mode => "mode",
            p_active => "p_active", intervals => "intervals", events => "events", period => "period"
        )
    }

    /// Rejects parameters the command does not use.
    pub fn check_keys(&self, command: &str, allowed: &[&str]) -> Result<()> {
        if let Some(c) = &self.command {
            if c != command {
                bail!("config is for command {c:?}, not {command:?}");
            }
        }
        let stray: Vec<&str> = self
            .keys()
            .into_iter()
            .filter(|k| !allowed.contains(k))
            .collect();
        if !stray.is_empty() {
            bail!("parameters not used by `{command}`: {}", stray.join(", "));
        }
        Ok(())
    }
}

pub fn require<T: Clone>(value: &Option<T>, key: &str) -> Result<T> {
    value
        .clone()
        .with_context(|| format!("missing required parameter {key}"))
}
