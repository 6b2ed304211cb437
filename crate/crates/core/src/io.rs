//! Channel, game and state-suite files, and the named-constructor
//! expressions accepted wherever a file reference is.
//!
//! All files are JSON. Matrix literals are nested arrays of `[re, im]`
//! pairs, row-major, with the dimensions declared next to them.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channels::{
    amplitude_damping, dephasing, depolarizing, erasure_channel_default, identity, trivial_channel_default,
    KrausChannel,
};
use crate::error::{Error, Result};
use crate::games::{Game, Weight};
use crate::holevo::{validate_declared, ChiPotSpec, HolevoOptions};
use crate::qcore::linalg::{CMatrix, C64};
use crate::qcore::{named, DensityOperator, SpaceShape};

pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

/// Checks a literal against its declared `rows x cols`.
pub fn matrix_from_literal(lit: &MatrixLiteral, rows: usize, cols: usize) -> Result<CMatrix> {
    if lit.len() != rows {
        return Err(Error::Parse(format!("matrix has {} rows, declared {rows}", lit.len())));
    }
    if let Some((i, r)) = lit.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Parse(format!("matrix row {i} has {} entries, declared {cols}", r.len())));
    }
    if lit.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Parse("matrix literal has a non-finite entry".into()));
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| C64::new(lit[r][c][0], lit[r][c][1])))
}

pub fn matrix_to_literal(m: &CMatrix) -> MatrixLiteral {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Unresolvable(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_chi_pot: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strongly_additive: Option<bool>,
}

impl ChannelMeta {
    /// How the potential capacity should be obtained, if the metadata says.
    pub fn chi_pot_spec(&self) -> Option<ChiPotSpec> {
        match (self.declared_chi_pot, self.strongly_additive) {
            (Some(v), _) => Some(ChiPotSpec::Declared(v)),
            (None, Some(true)) => Some(ChiPotSpec::StronglyAdditive),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub name: String,
    pub in_dims: Vec<usize>,
    pub out_dims: Vec<usize>,
    pub kraus: Vec<MatrixLiteral>,
    #[serde(default)]
    pub meta: ChannelMeta,
}

impl ChannelFile {
    pub fn from_channel(ch: &KrausChannel, meta: ChannelMeta) -> Self {
        Self {
            name: ch.name().to_string(),
            in_dims: ch.in_shape().factors().to_vec(),
            out_dims: ch.out_shape().factors().to_vec(),
            kraus: ch.kraus().iter().map(matrix_to_literal).collect(),
            meta,
        }
    }

    pub fn to_channel(&self) -> Result<KrausChannel> {
        let in_shape = SpaceShape::new(self.in_dims.clone())?;
        let out_shape = SpaceShape::new(self.out_dims.clone())?;
        let kraus = self
            .kraus
            .iter()
            .enumerate()
            .map(|(i, k)| {
                matrix_from_literal(k, out_shape.dim(), in_shape.dim())
                    .map_err(|e| Error::Parse(format!("kraus[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        for (what, v) in [("declared_chi", self.meta.declared_chi), ("declared_chi_pot", self.meta.declared_chi_pot)] {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Parse(format!("meta.{what} = {v} must be a nonnegative number")));
                }
            }
        }
        KrausChannel::new(self.name.clone(), in_shape, out_shape, kraus)
    }
}

/// A channel with whatever capacity metadata came with it.
#[derive(Clone, Debug)]
pub struct LoadedChannel {
    pub channel: KrausChannel,
    pub meta: ChannelMeta,
}

/// Parses a channel file. With `check`, declared capacities are compared
/// with the channel's own Holevo estimate and rejected when they are below
/// it.
pub fn parse_channel_file(text: &str, check: Option<&HolevoOptions>) -> Result<LoadedChannel> {
    let file: ChannelFile = parse_json(text, "channel file")?;
    let channel = file.to_channel()?;
    if let Some(opts) = check {
        for v in [file.meta.declared_chi, file.meta.declared_chi_pot].into_iter().flatten() {
            validate_declared(&channel, v, opts)?;
        }
    }
    Ok(LoadedChannel { channel, meta: file.meta })
}

pub fn load_channel_file(path: &Path, check: Option<&HolevoOptions>) -> Result<LoadedChannel> {
    parse_channel_file(&read(path)?, check)
}

/// Splits `head(arg, arg, ...)` at top-level commas.
fn call(expr: &str) -> Result<(&str, Vec<&str>)> {
    let expr = expr.trim();
    let Some(open) = expr.find('(') else {
        return Ok((expr, Vec::new()));
    };
    if !expr.ends_with(')') {
        return Err(Error::Parse(format!("unbalanced parentheses in `{expr}`")));
    }
    let head = expr[..open].trim();
    let inner = &expr[open + 1..expr.len() - 1];
    let mut args = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(Error::Parse(format!("unbalanced parentheses in `{expr}`")));
        }
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced parentheses in `{expr}`")));
    }
    if !inner.trim().is_empty() {
        args.push(inner[start..].trim());
    }
    Ok((head, args))
}

fn arg<T: std::str::FromStr>(args: &[&str], i: usize, expr: &str) -> Result<T> {
    args.get(i)
        .and_then(|a| a.parse().ok())
        .ok_or_else(|| Error::Parse(format!("bad or missing argument {} in `{expr}`", i + 1)))
}

fn arity(args: &[&str], n: usize, expr: &str) -> Result<()> {
    if args.len() != n {
        return Err(Error::Parse(format!("`{expr}` takes {n} argument(s), got {}", args.len())));
    }
    Ok(())
}

/// Named channel such as `identity(2)`, `depolarizing(2,0.3)`,
/// `dephasing(0.1)`, `amplitude_damping(0.2)`, `trivial(2)` or
/// `erasure(identity(2),0.5)`. Returns `None` when the head is not a known
/// constructor.
pub fn named_channel(expr: &str) -> Result<Option<LoadedChannel>> {
    let (head, args) = call(expr)?;
    let additive = |channel| LoadedChannel { channel, meta: ChannelMeta { strongly_additive: Some(true), ..Default::default() } };
    let plain = |channel| LoadedChannel { channel, meta: ChannelMeta::default() };
    let ch = match head {
        "identity" => {
            arity(&args, 1, expr)?;
            additive(identity(arg(&args, 0, expr)?)?)
        }
        "depolarizing" => {
            arity(&args, 2, expr)?;
            additive(depolarizing(arg(&args, 0, expr)?, arg(&args, 1, expr)?)?)
        }
        "dephasing" => {
            arity(&args, 1, expr)?;
            additive(dephasing(arg(&args, 0, expr)?)?)
        }
        "amplitude_damping" => {
            arity(&args, 1, expr)?;
            plain(amplitude_damping(arg(&args, 0, expr)?)?)
        }
        "trivial" => {
            arity(&args, 1, expr)?;
            LoadedChannel {
                channel: trivial_channel_default(arg(&args, 0, expr)?)?,
                meta: ChannelMeta { declared_chi: Some(0.0), declared_chi_pot: Some(0.0), strongly_additive: Some(true) },
            }
        }
        "erasure" => {
            arity(&args, 2, expr)?;
            let inner = named_channel(args[0])?
                .ok_or_else(|| Error::Parse(format!("unknown channel `{}` inside `{expr}`", args[0])))?;
            plain(erasure_channel_default(&inner.channel, arg(&args, 1, expr)?)?)
        }
        _ => return Ok(None),
    };
    Ok(Some(ch))
}

/// A named constructor, else a channel file relative to `base`.
pub fn resolve_channel(reference: &str, base: &Path, check: Option<&HolevoOptions>) -> Result<LoadedChannel> {
    if let Some(ch) = named_channel(reference)? {
        return Ok(ch);
    }
    let path = base.join(reference);
    if !path.is_file() {
        return Err(Error::Unresolvable(format!("`{reference}` is neither a named channel nor a file")));
    }
    load_channel_file(&path, check)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub name: String,
    #[serde(rename = "nX")]
    pub n_x: usize,
    #[serde(rename = "nY")]
    pub n_y: usize,
    #[serde(rename = "nA")]
    pub n_a: usize,
    #[serde(rename = "nB")]
    pub n_b: usize,
    pub pi: Vec<Vec<Weight>>,
    /// `v[x][y][a][b]`, entries 0 or 1.
    pub v: Vec<Vec<Vec<Vec<u8>>>>,
}

impl GameFile {
    pub fn from_game(g: &Game) -> Self {
        let [n_x, n_y, n_a, n_b] = g.sizes();
        Self {
            name: g.name().to_string(),
            n_x,
            n_y,
            n_a,
            n_b,
            pi: (0..n_x).map(|x| (0..n_y).map(|y| g.weight(x, y)).collect()).collect(),
            v: (0..n_x)
                .map(|x| {
                    (0..n_y)
                        .map(|y| (0..n_a).map(|a| (0..n_b).map(|b| g.wins(x, y, a, b) as u8).collect()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_game(&self) -> Result<Game> {
        let shape_err = |what: &str| Error::Parse(format!("game `{}`: {what} does not match declared sizes", self.name));
        if self.pi.len() != self.n_x || self.pi.iter().any(|r| r.len() != self.n_y) {
            return Err(shape_err("pi"));
        }
        let ok_v = self.v.len() == self.n_x
            && self.v.iter().all(|vx| {
                vx.len() == self.n_y
                    && vx.iter().all(|vy| vy.len() == self.n_a && vy.iter().all(|va| va.len() == self.n_b))
            });
        if !ok_v {
            return Err(shape_err("v"));
        }
        let flat: Vec<u8> = self.v.iter().flatten().flatten().flatten().copied().collect();
        if let Some(bad) = flat.iter().find(|&&e| e > 1) {
            return Err(Error::Parse(format!("game `{}`: v entry {bad} is not 0 or 1", self.name)));
        }
        Game::new(
            self.name.clone(),
            [self.n_x, self.n_y, self.n_a, self.n_b],
            self.pi.iter().flatten().copied().collect(),
            flat.into_iter().map(|e| e == 1).collect(),
        )
    }
}

pub fn parse_game_file(text: &str) -> Result<Game> {
    parse_json::<GameFile>(text, "game file")?.to_game()
}

/// `chsh`, else a game file relative to `base`.
pub fn resolve_game(reference: &str, base: &Path) -> Result<Game> {
    if reference == "chsh" {
        return Ok(Game::chsh());
    }
    let path = base.join(reference);
    if !path.is_file() {
        return Err(Error::Unresolvable(format!("`{reference}` is neither a built-in game nor a file")));
    }
    parse_game_file(&read(&path)?)
}

/// One state of a suite: either a matrix literal or a named constructor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub name: String,
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixLiteral>,
    /// `bell`, `singlet`, `ghz(n)`, `werner(p)`, `classically_correlated`,
    /// `zero`, `plus`, `mixed(d)` or `product(s1, s2, ...)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub named: Option<String>,
    /// Factors of the `A` side; default the first factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<usize>>,
    /// Factors of the `B` side; default all but the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_esq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSuite {
    pub name: String,
    pub states: Vec<StateEntry>,
}

/// A resolved suite entry.
#[derive(Clone, Debug)]
pub struct SuiteState {
    pub name: String,
    pub state: DensityOperator,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub analytic_esq: Option<f64>,
    pub analytic_note: Option<String>,
}

/// Named state constructor.
pub fn named_state(expr: &str) -> Result<DensityOperator> {
    let (head, args) = call(expr)?;
    let no_args = |s: DensityOperator| arity(&args, 0, expr).map(|_| s);
    match head {
        "bell" => no_args(named::bell()),
        "singlet" => no_args(named::singlet()),
        "classically_correlated" => no_args(named::classically_correlated()),
        "zero" => no_args(named::zero()),
        "plus" => no_args(named::plus()),
        "ghz" => {
            arity(&args, 1, expr)?;
            let n: usize = arg(&args, 0, expr)?;
            if !(2..=8).contains(&n) {
                return Err(Error::OutOfRange(format!("ghz({n}) needs 2..=8 qubits")));
            }
            Ok(named::ghz(n))
        }
        "werner" => {
            arity(&args, 1, expr)?;
            named::werner(arg(&args, 0, expr)?)
        }
        "mixed" => {
            arity(&args, 1, expr)?;
            Ok(DensityOperator::maximally_mixed(SpaceShape::qudit(arg(&args, 0, expr)?)?))
        }
        "product" => {
            if args.is_empty() {
                return Err(Error::Parse("product() needs at least one factor".into()));
            }
            let mut acc = named_state(args[0])?;
            for a in &args[1..] {
                acc = acc.tensor(&named_state(a)?)?;
            }
            Ok(acc)
        }
        _ => Err(Error::Parse(format!("unknown state constructor `{head}`"))),
    }
}

impl StateEntry {
    pub fn resolve(&self) -> Result<SuiteState> {
        let shape = SpaceShape::new(self.dims.clone())?;
        let state = match (&self.matrix, &self.named) {
            (Some(m), None) => DensityOperator::new(shape.clone(), matrix_from_literal(m, shape.dim(), shape.dim())?)?,
            (None, Some(expr)) => {
                let s = named_state(expr)?;
                if s.dims() != shape.factors() {
                    return Err(Error::Parse(format!(
                        "state `{}`: `{expr}` has dims {:?}, declared {:?}",
                        self.name,
                        s.dims(),
                        self.dims
                    )));
                }
                s
            }
            _ => {
                return Err(Error::Parse(format!(
                    "state `{}` needs exactly one of `matrix` and `named`",
                    self.name
                )))
            }
        };
        if self.dims.len() < 2 && (self.a.is_none() || self.b.is_none()) {
            return Err(Error::Parse(format!("state `{}` needs at least two factors", self.name)));
        }
        let a = self.a.clone().unwrap_or_else(|| vec![0]);
        let b = self.b.clone().unwrap_or_else(|| (1..self.dims.len()).collect());
        shape.check_selection(&a)?;
        shape.check_selection(&b)?;
        if let Some(f) = a.iter().find(|f| b.contains(f)) {
            return Err(Error::Overlap(*f));
        }
        if let Some(v) = self.analytic_esq {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse(format!("state `{}`: analytic_esq = {v}", self.name)));
            }
        }
        Ok(SuiteState {
            name: self.name.clone(),
            state,
            a,
            b,
            analytic_esq: self.analytic_esq,
            analytic_note: self.analytic_note.clone(),
        })
    }
}

pub fn parse_state_suite(text: &str) -> Result<Vec<SuiteState>> {
    let suite: StateSuite = parse_json(text, "state suite")?;
    suite.states.iter().map(StateEntry::resolve).collect()
}

pub fn load_state_suite(path: &Path) -> Result<Vec<SuiteState>> {
    parse_state_suite(&read(path)?)
}

#[cfg(test)]
mod tests;
