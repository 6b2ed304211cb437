//! Experiment registry: each experiment maps grid points to reports.

use std::time::Instant;

use herald_core::bounds::{blocksize_bound, blocksize_holevo_lhs, cor42_bound, cor43_bound, cor53_bound, thm51_compare, FValues, HeraldBlock, HeraldSpec};
use herald_core::games::{multi_bob_values, Game};
use herald_core::holevo::{chi_pot, maximize_holevo_auto};
use herald_core::report::{fingerprint, BoundReport, Component, InconclusiveReason, Provenance, Verdict};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentKind, ResolvedConfig};
use crate::error::{CliError, Result};
use crate::VERSION;

/// Allowance for the monogamy comparison; the bound holds for the true
/// value, so any lower estimate satisfies it.
const GAME_ALLOWANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Self { version: VERSION.into(), os: std::env::consts::OS.into(), arch: std::env::consts::ARCH.into() }
    }
}

/// One evaluated grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    /// `(column, value)` pairs identifying the point.
    pub keys: Vec<(String, String)>,
    pub report: BoundReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

impl Point {
    pub fn restarts_used(&self) -> Option<f64> {
        self.report.diagnostic_value("restarts_used")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub fingerprint: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub environment: Environment,
    pub points: Vec<Point>,
}

impl ResultRecord {
    /// True when there is at least one point and none passed.
    pub fn inconclusive_only(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| !p.report.verdict.is_pass())
    }

    /// Copy without timings, for byte-stable output.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for p in &mut r.points {
            p.wall_ms = None;
        }
        r
    }

    pub fn count(&self, label: &str) -> usize {
        self.points.iter().filter(|p| p.report.verdict.label() == label).count()
    }
}

/// Formats a value for keys and CSV cells: shortest round-trip digits,
/// switching to exponent form for very small or large magnitudes.
pub fn fmt_value(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

enum Task {
    Erasure { lambda: f64 },
    Herald { n: usize, k: usize, joint: bool },
    Thm51 { n: usize, lambda: f64 },
    Blocksize { n: usize, lambda: f64 },
    Games { n: usize },
}

fn tasks(cfg: &ResolvedConfig) -> Result<Vec<Task>> {
    let axis = |name: &str| -> &[f64] {
        &cfg.axes.iter().find(|(n, _)| n == name).expect("validated axis").1
    };
    let mut out = Vec::new();
    match cfg.kind {
        ExperimentKind::ErasureSweep => out.extend(axis("lambda").iter().map(|&lambda| Task::Erasure { lambda })),
        ExperimentKind::HeraldedAdditivity => {
            for &n in axis("n") {
                for &k in axis("k") {
                    let (n, k) = (n as usize, k as usize);
                    if k > n {
                        continue;
                    }
                    out.push(Task::Herald { n, k, joint: false });
                    if cfg.phi0.is_some() {
                        out.push(Task::Herald { n, k, joint: true });
                    }
                }
            }
            if out.is_empty() {
                return Err(CliError::Config("grid: no (n, k) pair with k <= n".into()));
            }
        }
        ExperimentKind::Thm51 => {
            for &n in axis("n") {
                out.extend(axis("lambda").iter().map(|&lambda| Task::Thm51 { n: n as usize, lambda }));
            }
        }
        ExperimentKind::Blocksize => {
            for &n in axis("n") {
                out.extend(axis("lambda").iter().map(|&lambda| Task::Blocksize { n: n as usize, lambda }));
            }
        }
        ExperimentKind::GamesMonogamy => out.extend(axis("n").iter().map(|&n| Task::Games { n: n as usize })),
    }
    Ok(out)
}

fn key(name: &str, v: impl ToString) -> (String, String) {
    (name.to_string(), v.to_string())
}

fn evaluate(cfg: &ResolvedConfig, task: &Task) -> Result<Point> {
    let opts = &cfg.optimizer;
    let start = Instant::now();
    let (keys, report, detail) = match *task {
        Task::Erasure { lambda } => {
            let r = cor53_bound(&cfg.channels[0].channel, lambda, opts)?;
            (vec![key("lambda", fmt_value(lambda))], r, None)
        }
        Task::Herald { n, k, joint } => {
            let phi = &cfg.channels[0].channel;
            let spec = HeraldSpec::new(vec![HeraldBlock::heralded(vec![phi.clone(); n], k)])?;
            let r = if joint {
                cor43_bound(&cfg.phi0.as_ref().expect("checked").channel, &spec, opts)?
            } else {
                cor42_bound(&spec, opts)?
            };
            let keys = vec![
                key("id", &r.id),
                key("n", n),
                key("k", k),
                key("lambda", fmt_value(k as f64 / n as f64)),
            ];
            (keys, r, None)
        }
        Task::Thm51 { n, lambda } => {
            let ch = &cfg.channels[0];
            let pot = ch.meta.chi_pot_spec().expect("checked at load");
            let r = thm51_compare(&ch.channel, n, lambda, &pot, opts)?;
            (vec![key("n", n), key("lambda", fmt_value(lambda))], r, None)
        }
        Task::Blocksize { n, lambda } => {
            let ch = &cfg.channels[0];
            let pot = ch.meta.chi_pot_spec().expect("checked at load");
            let est = maximize_holevo_auto(&ch.channel, opts, &[])?;
            let single = est.value;
            let potential = chi_pot(&ch.channel, &pot, opts)?.value.max(single);
            let values = vec![FValues { single, potential }; n];
            let lhs = if cfg.params.estimate_lhs.unwrap_or(true) {
                Some(blocksize_holevo_lhs(&vec![ch.channel.clone(); n], lambda, &[n], opts)?)
            } else {
                None
            };
            let r = blocksize_bound(lambda, &values, lhs)?.diagnostic("restarts_used", est.restarts_used as f64);
            (vec![key("n", n), key("lambda", fmt_value(lambda))], r, None)
        }
        Task::Games { n } => {
            let games: Vec<Game> = cfg.games.iter().cycle().take(n).cloned().collect();
            let (d_a, d_b) = (cfg.params.d_a.unwrap_or(2), cfg.params.d_b.unwrap_or(2));
            let g = multi_bob_values(&games, d_a, &vec![d_b; n], &cfg.seesaw)?;
            let bound = g.monogamy_bound.expect("multi-Bob runs carry the bound");
            let mut r = BoundReport::new("monogamy_game", g.entangled_lower, Provenance::Estimate, vec![
                Component::new("classical_average", g.classical),
                Component::new("monogamy_bound", bound),
            ])
            .with_allowance(GAME_ALLOWANCE)
            .with_seed(g.seed)
            .with_fingerprint(fingerprint(&[
                "monogamy_game",
                &games.iter().map(|g| g.name()).collect::<Vec<_>>().join(","),
                &format!("dA={d_a} dB={d_b} n={n}"),
                &serde_json::to_string(&cfg.seesaw).expect("serializable"),
            ]))
            .diagnostic("gap", g.gap)
            .diagnostic("restarts_used", g.restart_values.len() as f64)
            .judge(Ok(()), "see-saw value is a lower bound");
            if g.entangled_lower < g.classical - 1e-9 {
                r = r.note("entangled estimate below the classical value");
            }
            let detail = serde_json::json!({
                "classical_exact": g.classical_exact,
                "restart_values": g.restart_values,
                "trace": g.trace,
                "max_povm_drift": g.max_povm_drift,
            });
            (vec![key("n", n)], r, Some(detail))
        }
    };
    Ok(Point { keys, report, detail, wall_ms: Some(start.elapsed().as_millis() as u64) })
}

/// Runs every grid point, concurrently on `jobs` threads; the result order
/// follows the grid.
pub fn run_experiment(cfg: &ResolvedConfig, jobs: usize) -> Result<ResultRecord> {
    let tasks = tasks(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    let points = pool.install(|| tasks.par_iter().map(|t| evaluate(cfg, t)).collect::<Vec<_>>());
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ResultRecord {
        fingerprint: cfg.fingerprint.clone(),
        experiment: cfg.kind,
        seed: cfg.seed,
        environment: Environment::current(),
        points,
    })
}

/// Short description of why a point is inconclusive.
pub fn reason(v: &Verdict) -> Option<String> {
    match v {
        Verdict::Pass => None,
        Verdict::Inconclusive { reason: InconclusiveReason::Hypothesis { detail } } => Some(detail.clone()),
        Verdict::Inconclusive { reason: InconclusiveReason::OptimizationBudget { surrogate } } => Some(surrogate.clone()),
    }
}
