//! Subcommand arguments. Each struct parses from flags and also deserializes
//! from a TOML table (the `run` route), with the same key names and defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bregvar::paths::LevyModel;
use clap::{Parser, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Seed used when neither `seed` nor `BREGVAR_SEED` is given.
pub const DEFAULT_SEED: u64 = 7;
pub const SEED_ENV: &str = "BREGVAR_SEED";

/// A value given inline as JSON (flags) or as a TOML table or JSON string
/// (config files).
#[derive(Debug, Clone, PartialEq)]
pub struct Json<T>(pub T);

impl<T: DeserializeOwned> FromStr for Json<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map(Json).map_err(|e| e.to_string())
    }
}

impl<T: Serialize> Serialize for Json<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de, T: DeserializeOwned> Deserialize<'de> for Json<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            v => serde_json::from_value(v)
                .map(Json)
                .map_err(serde::de::Error::custom),
        }
    }
}

pub type Model = Json<LevyModel>;

/// Two numbers written `a,b` or `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair(pub f64, pub f64);

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [a, b] => {
                let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number `{t}`"));
                Ok(Pair(num(a)?, num(b)?))
            }
            _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

impl Serialize for Pair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.0, self.1].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Array([f64; 2]),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Array([a, b]) => Ok(Pair(a, b)),
        }
    }
}

/// `key=value` with a numeric value.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: f64,
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
        let value = v
            .trim()
            .parse()
            .map_err(|_| format!("bad number `{v}` for `{k}`"))?;
        Ok(Setting {
            key: k.trim().to_string(),
            value,
        })
    }
}

impl Serialize for Setting {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        format!("{}={}", self.key, self.value).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Defaults of the config route are the flag defaults.
macro_rules! flag_defaults {
    ($($t:ty => $name:literal),* $(,)?) => {$(
        impl Default for $t {
            fn default() -> Self {
                <$t>::parse_from([$name])
            }
        }
    )*};
}

flag_defaults!(
    YoungArgs => "young",
    OrliczArgs => "orlicz",
    SimulateArgs => "simulate",
    VariationArgs => "variation",
    IsometryArgs => "isometry",
    DoobArgs => "doob",
    SumIndepArgs => "sum-indep",
    SemigroupArgs => "semigroup",
    HardySteinArgs => "hardy-stein",
    SuiteArgs => "suite",
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YoungMode {
    /// Δ₂ constant, Simonenko indices and Doob constant.
    Info,
    /// Bregman divergence F_φ(x, y).
    Bregman,
    /// Legendre transform φ*(x).
    Conjugate,
}

/// Young-function diagnostics.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YoungArgs {
    #[arg(value_enum, default_value = "info")]
    pub mode: YoungMode,
    /// Young function, e.g. `power:3` or `plog:2:1`; overrides --family.
    #[arg(long)]
    pub phi: Option<String>,
    /// Builtin family: power or plog.
    #[arg(long, default_value = "power")]
    pub family: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub y: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrliczMode {
    /// Luxemburg norm of a weighted sample.
    Norm,
}

/// Orlicz norms of data read from a `value,weight` CSV file.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrliczArgs {
    #[arg(value_enum, default_value = "norm")]
    pub mode: OrliczMode,
    #[arg(long, default_value = "power:2")]
    pub phi: String,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Relative bisection tolerance.
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
}

/// Simulates one path and writes `t,x,is_jump,x_left` rows.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Model as JSON, e.g. {"sigma2":1.0,"jumps":{"type":"cp","intensity":2.0,"law":"two_point","a":1.0}}.
    #[arg(long, default_value = r#"{"sigma2":1.0}"#)]
    pub model: Model,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    #[arg(long = "M", default_value_t = 1024)]
    #[serde(rename = "M")]
    pub steps: usize,
    /// Dyadic refinements simulated on top of the M-grid.
    #[arg(long, default_value_t = 0)]
    pub levels: u32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Pathwise,
    Definition,
    Discrete,
}

/// φ-variation trace of a path CSV, written as `t,v,cont_term,jump_term`.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationArgs {
    #[arg(long, default_value = "power:2")]
    pub phi: String,
    /// Path CSV with columns t,x,is_jump,x_left.
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "pathwise")]
    pub route: Route,
    /// Diffusion coefficient of the path; needed by the pathwise route.
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsometryMode {
    /// Exact enumeration on the ±step random walk.
    Enumerate,
    /// Monte-Carlo on [0, T].
    Mc,
    /// Monte-Carlo for the path stopped on leaving an interval.
    Stopped,
}

/// Checks Eφ(X_T) = E V^φ(X)_T.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsometryArgs {
    #[arg(long, value_enum, default_value = "enumerate")]
    pub mode: IsometryMode,
    #[arg(long, default_value = "power:2")]
    pub phi: String,
    /// Walk length for enumeration.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long, default_value = r#"{"sigma2":1.0}"#)]
    pub model: Model,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    #[arg(long = "M", default_value_t = 64)]
    #[serde(rename = "M")]
    pub steps: usize,
    #[arg(long = "N", default_value_t = 100_000)]
    #[serde(rename = "N")]
    pub paths: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stopping interval `a,b` for the stopped mode.
    #[arg(long, allow_negative_numbers = true)]
    pub interval: Option<Pair>,
}

/// Checks E sup φ(X_s) ≤ C_φ Eφ(X_T).
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoobArgs {
    #[arg(long, default_value = "power:2")]
    pub phi: String,
    #[arg(long, default_value = r#"{"sigma2":1.0}"#)]
    pub model: Model,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    #[arg(long = "M", default_value_t = 64)]
    #[serde(rename = "M")]
    pub steps: usize,
    #[arg(long = "N", default_value_t = 20_000)]
    #[serde(rename = "N")]
    pub paths: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Checks the variation bounds for a sum of independent processes.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SumIndepArgs {
    #[arg(long, default_value = "power:2")]
    pub phi: String,
    #[arg(long = "model-x", default_value = r#"{"sigma2":1.0}"#)]
    #[serde(rename = "model-x")]
    pub model_x: Model,
    #[arg(
        long = "model-y",
        default_value = r#"{"sigma2":0.0,"jumps":{"type":"cp","intensity":2.0,"law":"two_point","a":1.0}}"#
    )]
    #[serde(rename = "model-y")]
    pub model_y: Model,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    #[arg(long = "M", default_value_t = 32)]
    #[serde(rename = "M")]
    pub steps: usize,
    #[arg(long = "N", default_value_t = 20_000)]
    #[serde(rename = "N")]
    pub paths: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemigroupMode {
    /// Transition density p_t on the grid, written as `x,p`.
    Density,
}

/// Spectral semigroup on the periodic grid [−L, L) with 2^m points.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemigroupArgs {
    #[arg(value_enum, default_value = "density")]
    pub mode: SemigroupMode,
    /// Lévy symbol in the model JSON format.
    #[arg(long, default_value = r#"{"sigma2":2.0}"#)]
    pub symbol: Model,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long = "L", default_value_t = 40.0)]
    #[serde(rename = "L")]
    pub half_width: f64,
    #[arg(long, default_value_t = 12)]
    pub m: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardySteinMode {
    /// Quadrature of the finite-horizon parabolic identity.
    Parabolic,
    /// Monte-Carlo route to the parabolic right-hand side.
    ParabolicMc,
    /// Exact elliptic identity for Brownian motion on an interval.
    Elliptic,
}

/// Hardy–Stein identities.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardySteinArgs {
    #[arg(value_enum, default_value = "parabolic")]
    pub mode: HardySteinMode,
    #[arg(long, default_value = "power:2")]
    pub phi: String,
    /// Lévy symbol (parabolic) or model (parabolic-mc), model JSON format.
    #[arg(long, default_value = r#"{"sigma2":2.0}"#)]
    pub symbol: Model,
    /// Initial function `gaussian:S` or `gaussian:S:AMPLITUDE`.
    #[arg(long, default_value = "gaussian:1.0")]
    pub f: String,
    #[arg(long = "T", default_value_t = 8.0)]
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Geometric time panels of the quadrature.
    #[arg(long = "K", default_value_t = 14)]
    #[serde(rename = "K")]
    pub levels: usize,
    #[arg(long = "time-nodes", default_value_t = 8)]
    #[serde(rename = "time-nodes")]
    pub time_nodes: usize,
    #[arg(long = "L", default_value_t = 40.0)]
    #[serde(rename = "L")]
    pub half_width: f64,
    #[arg(long, default_value_t = 12)]
    pub m: u32,
    /// Relative accounting tolerance (parabolic) or equality tolerance
    /// (elliptic).
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value = "0,1", allow_negative_numbers = true)]
    pub interval: Pair,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Affine u(x) = a·x + b given as `a,b`.
    #[arg(long, default_value = "1,0", allow_negative_numbers = true)]
    pub u: Pair,
    /// Monte-Carlo paths (parabolic-mc; exit sampling for elliptic when set).
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub paths: Option<usize>,
    /// Time steps of the Monte-Carlo grids.
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    /// Euler step of the exit sampling.
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteLevel {
    Quick,
    Full,
}

/// Runs the full list of reproduction checks.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteArgs {
    #[arg(long, value_enum, default_value = "quick")]
    pub level: SuiteLevel,
    /// Shorthand for --level quick.
    #[arg(long, conflicts_with = "full")]
    #[serde(skip_serializing)]
    pub quick: bool,
    /// Shorthand for --level full.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub full: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerance override `name=value`; repeatable.
    #[arg(long = "tol")]
    pub tol: Vec<Setting>,
    /// Run only these checks (1..=13); repeatable.
    #[arg(long)]
    pub only: Vec<u32>,
}

impl SuiteArgs {
    pub fn effective_level(&self) -> SuiteLevel {
        if self.full {
            SuiteLevel::Full
        } else if self.quick {
            SuiteLevel::Quick
        } else {
            self.level
        }
    }
}
