use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use herald_core::bounds::{
    blocksize_bound, correction, cor53_bound, post_selected_capacity, thm51_compare, FValues, LogForm,
};
use herald_core::channels::KrausChannel;
use herald_core::esq::{esq_upper, EsqOptions};
use herald_core::games::{classical_value, entangled_value_lower, multi_bob_values, SeesawOptions};
use herald_core::holevo::{maximize_holevo, maximize_holevo_auto, maximize_holevo_flagged, HolevoOptions};
use herald_core::io::{load_state_suite, named_state, resolve_channel, resolve_game, LoadedChannel};
use herald_core::report::BoundReport;
use herald_expcli::cache::{write_atomic, CACHE_ENV};
use herald_expcli::svg::{render_svg, Series, Style};
use herald_expcli::{run_config, CliError, Result, RunOptions};
use serde::Deserialize;
use serde_json::json;

/// Numerical experiments on heralded and erasure channels.
#[derive(Parser)]
#[command(name = "herald", version)]
struct Cli {
    /// Seed for every optimizer (overrides config files).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid points.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Result cache directory.
    #[arg(long, global = true, env = CACHE_ENV, default_value = ".cache")]
    cache_dir: PathBuf,
    /// Output file (single-result commands) or base directory (run).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect or validate a channel.
    #[command(subcommand)]
    Channel(ChannelCmd),
    /// Holevo information estimate of a channel.
    Holevo(HolevoArgs),
    /// Squashed-entanglement upper bounds.
    Esq(EsqArgs),
    /// Nonlocal game values.
    #[command(subcommand)]
    Game(GameCmd),
    /// Evaluate a single bound.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Run an experiment config.
    Run(RunArgs),
    /// Render a series file to SVG.
    Render(RenderArgs),
}

#[derive(Subcommand)]
enum ChannelCmd {
    /// Dimensions, Kraus count, flags and fingerprint.
    Inspect {
        /// Named channel such as `depolarizing(2,0.3)` or a channel file.
        channel: String,
    },
    /// Load the channel and check declared capacities against estimates.
    Validate {
        channel: String,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
}

#[derive(Args, Clone)]
struct OptimizerArgs {
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    ensemble_size: Option<usize>,
}

impl OptimizerArgs {
    fn options(&self, seed: Option<u64>) -> HolevoOptions {
        let d = HolevoOptions::default();
        HolevoOptions {
            ensemble_size: self.ensemble_size.or(d.ensemble_size),
            restarts: self.restarts.unwrap_or(d.restarts),
            tol: self.tol.unwrap_or(d.tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            seed: seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PathChoice {
    Auto,
    Naive,
    Flagged,
}

#[derive(Args)]
struct HolevoArgs {
    channel: String,
    #[arg(long, value_enum, default_value = "auto")]
    path: PathChoice,
    #[command(flatten)]
    opt: OptimizerArgs,
}

#[derive(Args)]
struct EsqArgs {
    /// Named state such as `bell` or `product(bell, plus)`.
    #[arg(long, conflicts_with = "suite")]
    state: Option<String>,
    /// State-suite file.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Factors of A (default 0).
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<usize>>,
    /// Factors of B (default all others).
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<usize>>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    ext_dim: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GameMode {
    Classical,
    Seesaw,
}

#[derive(Subcommand)]
enum GameCmd {
    /// Classical value or see-saw lower bound on the entangled value.
    Value {
        #[arg(long)]
        game: String,
        #[arg(long, value_enum, default_value = "classical")]
        mode: GameMode,
        #[arg(long = "dA", default_value_t = 2)]
        d_a: usize,
        #[arg(long = "dB", default_value_t = 2)]
        d_b: usize,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Average values when Alice plays one game against each Bob.
    Multibob {
        #[arg(long, value_delimiter = ',', required = true)]
        games: Vec<String>,
        #[arg(long = "dA", default_value_t = 2)]
        d_a: usize,
        #[arg(long = "dB", default_value_t = 2)]
        d_b: usize,
        #[arg(long)]
        restarts: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormChoice {
    Four,
    Dim,
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// Closed-form correction term.
    Correction {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        multiplicity: f64,
        #[arg(long, value_enum, default_value = "four")]
        form: FormChoice,
    },
    /// Capacity of the erasure channel against its single-letter bound.
    Erasure {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Interval for the post-selected capacity.
    PostSelected {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Erasure product against the heralded channel with floor(lambda n) successes.
    Binomial {
        #[arg(long)]
        channel: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: f64,
        #[command(flatten)]
        opt: OptimizerArgs,
    },
    /// Blocksize bound from declared single and potential values.
    Blocksize {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        single: f64,
        #[arg(long)]
        potential: f64,
        #[arg(long)]
        lhs: Option<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Record wall-clock times (outputs are then not byte-stable).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// JSON file `{ "style": {...}, "series": [{ "label", "points": [[x, y], ...] }] }`.
    series: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesFile {
    #[serde(default)]
    style: Style,
    series: Vec<Series>,
}

fn channel(reference: &str, check: Option<&HolevoOptions>) -> Result<LoadedChannel> {
    Ok(resolve_channel(reference, Path::new("."), check)?)
}

fn emit(out: &Option<PathBuf>, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Exit code 4 when a report is inconclusive.
fn emit_report(out: &Option<PathBuf>, r: &BoundReport) -> Result<u8> {
    emit(out, r)?;
    Ok(if r.verdict.is_pass() { 0 } else { 4 })
}

fn inspect(ch: &KrausChannel) -> serde_json::Value {
    json!({
        "name": ch.name(),
        "in_dims": ch.in_shape().factors(),
        "out_dims": ch.out_shape().factors(),
        "kraus_operators": ch.kraus().len(),
        "completeness_error": ch.completeness_error(),
        "flag_sectors": ch.flags().map(|f| f.len()),
        "constant_output": ch.constant_output().is_some(),
        "fingerprint": ch.fingerprint(),
    })
}

fn seesaw(seed: Option<u64>, restarts: Option<usize>) -> SeesawOptions {
    let d = SeesawOptions::default();
    SeesawOptions { restarts: restarts.unwrap_or(d.restarts), seed: seed.unwrap_or(d.seed), ..d }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let seed = cli.seed;
    let out = &cli.out;
    match cli.command {
        Command::Channel(ChannelCmd::Inspect { channel: r }) => {
            let c = channel(&r, None)?;
            let mut v = inspect(&c.channel);
            v["meta"] = json!(c.meta);
            emit(out, &v)?;
            Ok(0)
        }
        Command::Channel(ChannelCmd::Validate { channel: r, opt }) => {
            let c = channel(&r, Some(&opt.options(seed)))?;
            emit(out, &json!({ "name": c.channel.name(), "valid": true }))?;
            Ok(0)
        }
        Command::Holevo(a) => {
            let c = channel(&a.channel, None)?;
            let opts = a.opt.options(seed);
            let est = match a.path {
                PathChoice::Auto => maximize_holevo_auto(&c.channel, &opts, &[])?,
                PathChoice::Naive => maximize_holevo(&c.channel, &opts)?,
                PathChoice::Flagged => maximize_holevo_flagged(&c.channel, &opts)?,
            };
            emit(out, &est)?;
            Ok(0)
        }
        Command::Esq(a) => {
            let d = EsqOptions::default();
            let opts = EsqOptions {
                restarts: a.restarts.unwrap_or(d.restarts),
                ext_dim: a.ext_dim.or(d.ext_dim),
                seed: seed.unwrap_or(d.seed),
                ..d
            };
            let states = match (&a.state, &a.suite) {
                (Some(expr), None) => {
                    let s = named_state(expr)?;
                    let n = s.dims().len();
                    if n < 2 {
                        return Err(CliError::Config(format!("`{expr}` has a single factor")));
                    }
                    let av = a.a.clone().unwrap_or_else(|| vec![0]);
                    let bv = a.b.clone().unwrap_or_else(|| (0..n).filter(|f| !av.contains(f)).collect());
                    vec![(expr.clone(), s, av, bv, None)]
                }
                (None, Some(path)) => load_state_suite(path)?
                    .into_iter()
                    .map(|s| (s.name, s.state, s.a, s.b, s.analytic_esq))
                    .collect(),
                _ => return Err(CliError::Config("give exactly one of --state and --suite".into())),
            };
            let mut results = Vec::new();
            for (name, state, av, bv, analytic) in states {
                let r = esq_upper(&state, &av, &bv, &opts)?;
                results.push(json!({
                    "name": name,
                    "a": av,
                    "b": bv,
                    "upper": r.value,
                    "baseline": r.baseline,
                    "analytic_esq": analytic,
                    "bound": r,
                }));
            }
            emit(out, &results)?;
            Ok(0)
        }
        Command::Game(GameCmd::Value { game, mode, d_a, d_b, restarts }) => {
            let g = resolve_game(&game, Path::new("."))?;
            if !g.is_exact() {
                eprintln!("warning: game `{}` has floating-point question probabilities; the classical value is not exact", g.name());
            }
            match mode {
                GameMode::Classical => emit(out, &classical_value(&g)?)?,
                GameMode::Seesaw => emit(out, &entangled_value_lower(&g, d_a, d_b, &seesaw(seed, restarts))?)?,
            }
            Ok(0)
        }
        Command::Game(GameCmd::Multibob { games, d_a, d_b, restarts }) => {
            let gs = games.iter().map(|g| resolve_game(g, Path::new("."))).collect::<herald_core::Result<Vec<_>>>()?;
            let r = multi_bob_values(&gs, d_a, &vec![d_b; gs.len()], &seesaw(seed, restarts))?;
            emit(out, &r)?;
            Ok(0)
        }
        Command::Bounds(b) => match b {
            BoundsCmd::Correction { lambda, d, multiplicity, form } => {
                let form = match form {
                    FormChoice::Four => LogForm::Four,
                    FormChoice::Dim => LogForm::Dim,
                };
                let c = correction(lambda, d, multiplicity, form)?;
                emit(out, &c)?;
                Ok(if c.holds { 0 } else { 4 })
            }
            BoundsCmd::Erasure { channel: r, lambda, opt } => {
                emit_report(out, &cor53_bound(&channel(&r, None)?.channel, lambda, &opt.options(seed))?)
            }
            BoundsCmd::PostSelected { channel: r, lambda, opt } => {
                let p = post_selected_capacity(&channel(&r, None)?.channel, lambda, &opt.options(seed))?;
                emit(out, &p)?;
                Ok(if p.report.verdict.is_pass() { 0 } else { 4 })
            }
            BoundsCmd::Binomial { channel: r, n, lambda, opt } => {
                let c = channel(&r, None)?;
                let pot = c.meta.chi_pot_spec().ok_or_else(|| {
                    CliError::Config(format!("`{r}`: potential capacity unknown; use a channel file with meta"))
                })?;
                emit_report(out, &thm51_compare(&c.channel, n, lambda, &pot, &opt.options(seed))?)
            }
            BoundsCmd::Blocksize { lambda, n, single, potential, lhs } => {
                emit_report(out, &blocksize_bound(lambda, &vec![FValues { single, potential }; n], lhs)?)
            }
        },
        Command::Run(a) => {
            let opts = RunOptions {
                cache_dir: cli.cache_dir.clone(),
                jobs: cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
                seed,
                out_dir: cli.out.clone(),
                timings: a.timings,
            };
            let outcome = run_config(&a.config, &opts)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let r = &outcome.record;
            let summary = json!({
                "fingerprint": r.fingerprint,
                "experiment": r.experiment,
                "cached": outcome.cached,
                "points": r.points.len(),
                "pass": r.count("PASS"),
                "inconclusive_hypothesis": r.count("INCONCLUSIVE(hypothesis)"),
                "inconclusive_optimization": r.count("INCONCLUSIVE(optimization)"),
                "written": outcome.written,
            });
            println!("{}", serde_json::to_string(&summary).expect("serializable"));
            Ok(if r.inconclusive_only() { 4 } else { 0 })
        }
        Command::Render(a) => {
            let text = std::fs::read_to_string(&a.series).map_err(|e| CliError::io(&a.series, e))?;
            let file: SeriesFile =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", a.series.display())))?;
            let svg = render_svg(&file.series, &file.style)?;
            match out {
                Some(p) => write_atomic(p, svg.as_bytes())?,
                None => print!("{svg}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
