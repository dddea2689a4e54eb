//! Energy functions on trees and paths, and their derivation from
//! nearest-neighbour thermodynamic model (NNTM) multiloop parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::TwoMotzkinPath;
use crate::tree::PlaneTree;

/// Coefficients of `alpha*d0 + beta*d1 + gamma*r + delta*n` (kcal/mol).
///
/// Only `alpha` and `beta` enter the Gibbs weights; `delta*n` is constant
/// for a fixed edge count and `gamma` is carried for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl EnergyParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        EnergyParams {
            alpha,
            beta,
            gamma: 0.0,
            delta: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite() && self.delta.is_finite()
    }
}

/// NNTM inputs: multiloop constants `a`, `b`, `c`; helix `h`; hairpin `f`;
/// interior loop `i`; dangles `g`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NntmParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub h: f64,
    pub f: f64,
    pub i: f64,
    pub g: f64,
}

/// Collapses NNTM loop parameters into tree-energy coefficients.
pub fn derive_params(p: &NntmParams) -> EnergyParams {
    EnergyParams {
        alpha: p.f - p.a - 4.0 * p.b - p.c - p.g,
        beta: p.i - p.a - 8.0 * p.b - 2.0 * p.c - 2.0 * p.g,
        gamma: -4.0 * p.b - p.c,
        delta: p.a + 8.0 * p.b + 2.0 * p.c + p.h + 2.0 * p.g,
    }
}

/// A published parameter row together with its rounded derived coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuiltinParamSet {
    pub name: &'static str,
    pub nntm: NntmParams,
    /// `(alpha, beta, gamma)` as published, rounded to one decimal.
    pub published: (f64, f64, f64),
}

const fn row(a: f64, b: f64, c: f64, h: f64, f: f64, i: f64, g: f64) -> NntmParams {
    NntmParams { a, b, c, h, f, i, g }
}

/// Turner 1989, 1999 and 2004 rule sets for closing pairs C-G and G-C.
pub const BUILTIN_PARAM_SETS: [BuiltinParamSet; 6] = [
    BuiltinParamSet {
        name: "turner89-cg",
        nntm: row(4.6, 0.4, 0.1, -10.9, 3.8, 3.0, -1.6),
        published: (-0.9, -1.8, -1.7),
    },
    BuiltinParamSet {
        name: "turner89-gc",
        nntm: row(4.6, 0.4, 0.1, -16.5, 3.5, 3.0, -1.9),
        published: (-0.9, -1.2, -1.7),
    },
    BuiltinParamSet {
        name: "turner99-cg",
        nntm: row(3.4, 0.0, 0.4, -12.9, 4.5, 2.3, -1.6),
        published: (2.3, 1.3, -0.4),
    },
    BuiltinParamSet {
        name: "turner99-gc",
        nntm: row(3.4, 0.0, 0.4, -16.9, 4.1, 2.3, -1.9),
        published: (2.2, 1.9, -0.4),
    },
    BuiltinParamSet {
        name: "turner04-cg",
        nntm: row(9.3, 0.0, -0.9, -12.9, 4.5, 2.3, -1.1),
        published: (-2.8, -3.0, 0.9),
    },
    BuiltinParamSet {
        name: "turner04-gc",
        nntm: row(9.3, 0.0, -0.9, -16.9, 4.1, 2.3, -1.5),
        published: (-2.8, -2.2, 0.9),
    },
];

pub fn builtin_params(name: &str) -> Result<NntmParams> {
    BUILTIN_PARAM_SETS
        .iter()
        .find(|set| set.name.eq_ignore_ascii_case(name))
        .map(|set| set.nntm)
        .ok_or_else(|| Error::UnknownParameterSet(name.to_string()))
}

/// Either raw NNTM parameters or energy coefficients given directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParamSpec {
    Nntm(NntmParams),
    Energy(EnergyParams),
}

impl ParamSpec {
    pub fn energy(&self) -> EnergyParams {
        match self {
            ParamSpec::Nntm(p) => derive_params(p),
            ParamSpec::Energy(e) => *e,
        }
    }
}

/// Parses a `key=value` parameter file.
///
/// Keys are either all of `a b c h f i g` or `alpha beta` with optional
/// `gamma delta`. Blank lines and `#` comments are ignored.
pub fn parse_param_file(text: &str) -> Result<ParamSpec> {
    let mut values: Vec<(String, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::ParameterFile(format!("line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().to_ascii_lowercase();
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::ParameterFile(format!("line {}: {:?} is not a number", lineno + 1, value.trim())))?;
        if !value.is_finite() {
            return Err(Error::ParameterFile(format!(
                "line {}: value must be finite",
                lineno + 1
            )));
        }
        if values.iter().any(|(k, _)| *k == key) {
            return Err(Error::ParameterFile(format!(
                "line {}: duplicate key {key}",
                lineno + 1
            )));
        }
        values.push((key, value));
    }
    let get = |k: &str| values.iter().find(|(key, _)| key == k).map(|(_, v)| *v);
    const NNTM_KEYS: [&str; 7] = ["a", "b", "c", "h", "f", "i", "g"];
    const ENERGY_KEYS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];
    if let Some((k, _)) = values
        .iter()
        .find(|(k, _)| !NNTM_KEYS.contains(&k.as_str()) && !ENERGY_KEYS.contains(&k.as_str()))
    {
        return Err(Error::ParameterFile(format!("unknown key {k}")));
    }
    let has_nntm = NNTM_KEYS.iter().any(|k| get(k).is_some());
    let has_energy = ENERGY_KEYS.iter().any(|k| get(k).is_some());
    match (has_nntm, has_energy) {
        (true, true) => Err(Error::ParameterFile("mixes NNTM keys with alpha/beta keys".into())),
        (true, false) => {
            let need = |k: &str| get(k).ok_or_else(|| Error::ParameterFile(format!("missing key {k}")));
            Ok(ParamSpec::Nntm(NntmParams {
                a: need("a")?,
                b: need("b")?,
                c: need("c")?,
                h: need("h")?,
                f: need("f")?,
                i: need("i")?,
                g: need("g")?,
            }))
        }
        (false, true) => {
            let need = |k: &str| get(k).ok_or_else(|| Error::ParameterFile(format!("missing key {k}")));
            Ok(ParamSpec::Energy(EnergyParams {
                alpha: need("alpha")?,
                beta: need("beta")?,
                gamma: get("gamma").unwrap_or(0.0),
                delta: get("delta").unwrap_or(0.0),
            }))
        }
        (false, false) => Err(Error::ParameterFile("no parameters given".into())),
    }
}

impl fmt::Display for EnergyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha={} beta={} gamma={} delta={}",
            self.alpha, self.beta, self.gamma, self.delta
        )
    }
}

impl FromStr for ParamSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_param_file(s)
    }
}

/// `alpha*d0 + beta*d1`, plus `gamma*r` when `include_root` is set.
pub fn tree_energy(t: &PlaneTree, e: &EnergyParams, include_root: bool) -> Result<f64> {
    let prof = t.degree_profile()?;
    let mut energy = e.alpha * prof.d0 as f64 + e.beta * prof.d1 as f64;
    if include_root {
        energy += e.gamma * prof.r as f64;
    }
    Ok(energy)
}

/// Energy of the tree encoded by `x`, read from symbol counts.
pub fn path_energy(x: &TwoMotzkinPath, e: &EnergyParams) -> f64 {
    let c = x.counts();
    energy_from_counts(c.u, c.h, c.i, e)
}

#[inline]
pub(crate) fn energy_from_counts(u: usize, h: usize, i: usize, e: &EnergyParams) -> f64 {
    e.alpha * (u + h + 1) as f64 + e.beta * i as f64
}

/// Unnormalized log Gibbs weight, `-E(x)`.
pub fn gibbs_log_weight(x: &TwoMotzkinPath, e: &EnergyParams) -> f64 {
    -path_energy(x, e)
}
