//! Experiment configuration files.
//!
//! ```json
//! {
//!   "experiment": "erasure-sweep",
//!   "channels": ["identity(2)"],
//!   "grid": { "lambda": "0.02:0.5:10" },
//!   "optimizer": { "restarts": 8 },
//!   "seed": 7,
//!   "out": { "csv": "sweep.csv", "json": "sweep.json", "svg": "sweep.svg" }
//! }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use herald_core::games::{Game, SeesawOptions};
use herald_core::holevo::HolevoOptions;
use herald_core::io::{resolve_channel, resolve_game, GameFile, LoadedChannel};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ErasureSweep,
    HeraldedAdditivity,
    Thm51,
    Blocksize,
    GamesMonogamy,
}

impl ExperimentKind {
    /// Grid axes in iteration order (first varies slowest).
    pub fn axes(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::ErasureSweep => &["lambda"],
            ExperimentKind::HeraldedAdditivity => &["n", "k"],
            ExperimentKind::Thm51 => &["n", "lambda"],
            ExperimentKind::Blocksize => &["n", "lambda"],
            ExperimentKind::GamesMonogamy => &["n"],
        }
    }

    fn integer_axis(axis: &str) -> bool {
        matches!(axis, "n" | "k")
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        write!(f, "{}", s.as_str().expect("string"))
    }
}

/// `"start:end:points"` (inclusive, evenly spaced) or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridAxis {
    List(Vec<f64>),
    Range(String),
}

impl GridAxis {
    pub fn expand(&self, name: &str) -> Result<Vec<f64>> {
        let bad = |why: String| CliError::Config(format!("grid.{name}: {why}"));
        let values = match self {
            GridAxis::List(v) => v.clone(),
            GridAxis::Range(s) => {
                let parts: Vec<&str> = s.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad(format!("`{s}` is not start:end:points")));
                }
                let start: f64 = parts[0].trim().parse().map_err(|_| bad(format!("bad start in `{s}`")))?;
                let end: f64 = parts[1].trim().parse().map_err(|_| bad(format!("bad end in `{s}`")))?;
                let points: usize = parts[2].trim().parse().map_err(|_| bad(format!("bad point count in `{s}`")))?;
                match points {
                    0 => return Err(bad("point count must be positive".into())),
                    1 => vec![start],
                    _ => (0..points).map(|i| start + (end - start) * i as f64 / (points - 1) as f64).collect(),
                }
            }
        };
        if values.is_empty() {
            return Err(bad("empty grid".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(bad(format!("non-finite value {v}")));
        }
        Ok(values)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
}

/// Experiment-specific settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Extra channel for the joint bound in heralded-additivity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<String>,
    /// Alice's dimension in games-monogamy (default 2).
    #[serde(default, rename = "dA", skip_serializing_if = "Option::is_none")]
    pub d_a: Option<usize>,
    /// Each Bob's dimension in games-monogamy (default 2).
    #[serde(default, rename = "dB", skip_serializing_if = "Option::is_none")]
    pub d_b: Option<usize>,
    /// Estimate the blocksize left side (default true).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate_lhs: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub channels: Vec<String>,
    #[serde(default)]
    pub games: Vec<String>,
    pub grid: BTreeMap<String, GridAxis>,
    #[serde(default)]
    pub optimizer: HolevoOptions,
    #[serde(default)]
    pub seesaw: SeesawOptions,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Outputs,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// A config with every reference resolved and the grid expanded.
#[derive(Clone, Debug)]
pub struct ResolvedConfig {
    pub kind: ExperimentKind,
    pub channels: Vec<LoadedChannel>,
    pub phi0: Option<LoadedChannel>,
    pub games: Vec<Game>,
    /// Axis values in [`ExperimentKind::axes`] order.
    pub axes: Vec<(String, Vec<f64>)>,
    pub optimizer: HolevoOptions,
    pub seesaw: SeesawOptions,
    pub params: Params,
    pub seed: u64,
    pub out: Outputs,
    pub fingerprint: String,
}

fn expect_count(what: &str, got: usize, want: usize, kind: ExperimentKind) -> Result<()> {
    if got != want {
        return Err(CliError::Config(format!("{what}: {kind} needs {want}, got {got}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Resolves channel and game references relative to `base`. A `seed`
    /// override replaces the config's seed.
    pub fn resolve(&self, base: &Path, seed: Option<u64>) -> Result<ResolvedConfig> {
        let kind = self.experiment;
        let mut axes = Vec::new();
        for name in self.grid.keys() {
            if !kind.axes().contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "grid.{name}: not an axis of {kind} (expected {})",
                    kind.axes().join(", ")
                )));
            }
        }
        for &name in kind.axes() {
            let axis = self
                .grid
                .get(name)
                .ok_or_else(|| CliError::Config(format!("grid.{name}: missing, {kind} needs it")))?;
            let values = axis.expand(name)?;
            if ExperimentKind::integer_axis(name) {
                if let Some(v) = values.iter().find(|v| v.fract() != 0.0 || **v < 1.0) {
                    return Err(CliError::Config(format!("grid.{name}: {v} is not a positive integer")));
                }
            } else if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
                return Err(CliError::Config(format!("grid.{name}: {v} outside (0, 1]")));
            }
            axes.push((name.to_string(), values));
        }

        let resolve = |i: usize, r: &String| {
            resolve_channel(r, base, None).map_err(|e| CliError::Config(format!("channels[{i}]: {e}")))
        };
        let channels = self.channels.iter().enumerate().map(|(i, r)| resolve(i, r)).collect::<Result<Vec<_>>>()?;
        let phi0 = self
            .params
            .phi0
            .as_ref()
            .map(|r| resolve_channel(r, base, None).map_err(|e| CliError::Config(format!("params.phi0: {e}"))))
            .transpose()?;
        let games = self
            .games
            .iter()
            .enumerate()
            .map(|(i, r)| resolve_game(r, base).map_err(|e| CliError::Config(format!("games[{i}]: {e}"))))
            .collect::<Result<Vec<_>>>()?;

        match kind {
            ExperimentKind::GamesMonogamy => {
                expect_count("channels", channels.len(), 0, kind)?;
                if games.is_empty() {
                    return Err(CliError::Config(format!("games: {kind} needs at least one game")));
                }
            }
            _ => {
                expect_count("channels", channels.len(), 1, kind)?;
                expect_count("games", games.len(), 0, kind)?;
            }
        }
        if matches!(kind, ExperimentKind::Thm51 | ExperimentKind::Blocksize) && channels[0].meta.chi_pot_spec().is_none() {
            return Err(CliError::Config(format!(
                "channels[0]: {kind} needs the potential capacity; declare meta.declared_chi_pot or meta.strongly_additive"
            )));
        }
        if phi0.is_some() && kind != ExperimentKind::HeraldedAdditivity {
            return Err(CliError::Config(format!("params.phi0: not used by {kind}")));
        }

        let seed = seed.unwrap_or(self.seed);
        let optimizer = HolevoOptions { seed, ..self.optimizer.clone() };
        let seesaw = SeesawOptions { seed, ..self.seesaw.clone() };
        let fingerprint = fingerprint(&json!({
            "version": VERSION,
            "experiment": kind,
            "channels": self.channels.iter().zip(&channels)
                .map(|(r, c)| json!({ "ref": r, "kraus": c.channel.fingerprint(), "meta": c.meta }))
                .collect::<Vec<_>>(),
            "phi0": phi0.as_ref().map(|c| json!({ "kraus": c.channel.fingerprint(), "meta": c.meta })),
            "games": games.iter().map(GameFile::from_game).collect::<Vec<_>>(),
            "grid": axes.iter().map(|(n, v)| (n.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "optimizer": optimizer,
            "seesaw": seesaw,
            "params": self.params,
            "seed": seed,
        }));
        Ok(ResolvedConfig {
            kind,
            channels,
            phi0,
            games,
            axes,
            optimizer,
            seesaw,
            params: self.params.clone(),
            seed,
            out: self.out.clone(),
            fingerprint,
        })
    }
}

/// SHA-256 of the canonical serialization (object keys sorted).
pub fn fingerprint(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(&canonicalize(value)).expect("serializable");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn canonicalize(v: &serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(m) => {
            let sorted: BTreeMap<&String, Value> = m.iter().map(|(k, v)| (k, canonicalize(v))).collect();
            Value::Object(sorted.into_iter().map(|(k, v)| (k.clone(), v)).collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}
