//! End-to-end acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p herald-expcli --test acceptance`.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use herald_core::bounds::{blocksize_bound, blocksize_coefficient, blocksize_coefficient_o2, thm51_compare, FValues};
use herald_core::channels::{
    binomial_mixture_check, depolarizing, erasure_channel_default, heralded_channel_default, identity,
    trivial_channel_default, KrausChannel,
};
use herald_core::entropy::{
    alicki_fannes_bound, binary_entropy, conditional_entropy, conditional_mutual_information, mutual_information,
    AfVariant,
};
use herald_core::esq::{
    esq_upper, heralded_averaging_check, ppt_witness_lower_bound, separable_approx, EsqOptions, HeraldInput,
    SeparableOptions,
};
use herald_core::games::{classical_value, entangled_value_lower, monogamy_game_bound, multi_bob_values, Game, SeesawOptions};
use herald_core::holevo::{maximize_holevo, maximize_holevo_auto, maximize_holevo_flagged, ChiPotSpec, HolevoOptions};
use herald_core::qcore::{named, random_density, trace_distance_norm, DensityOperator, SpaceShape};
use herald_expcli::{run_config, RunOptions};
use tempfile::TempDir;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn mm(d: usize) -> DensityOperator {
    DensityOperator::maximally_mixed(SpaceShape::qudit(d).unwrap())
}

fn id2() -> KrausChannel {
    identity(2).unwrap()
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let t = start.elapsed();
    if t > limit {
        Err(format!("{what} took {t:.1?}, limit {limit:?}"))
    } else {
        Ok(t)
    }
}

fn mixture_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for phi in [id2(), depolarizing(2, 0.3).unwrap()] {
        for n in [2, 3] {
            for lambda in [0.1, 0.5, 0.9] {
                let r = binomial_mixture_check(&vec![phi.clone(); n], lambda, &mm(2)).map_err(|e| e.to_string())?;
                ensure!(r.lhs <= 1e-10, "{} n={n} lambda={lambda}: distance {:e}", phi.name(), r.lhs);
                worst = worst.max(r.lhs);
            }
        }
    }
    let t = within(start, Duration::from_secs(10), "mixture checks")?;
    Ok(format!("max distance {worst:.1e} over 12 cases in {t:.1?}"))
}

fn holevo_regressions() -> Outcome {
    let opts = HolevoOptions::default();
    let mut slowest = Duration::ZERO;
    let mut check = |ch: KrausChannel, target: f64, tol: f64| -> Result<(), String> {
        let start = Instant::now();
        let v = maximize_holevo_auto(&ch, &opts, &[]).map_err(|e| e.to_string())?.value;
        slowest = slowest.max(within(start, Duration::from_secs(60), ch.name())?);
        ensure!((v - target).abs() <= tol, "{}: {v} vs {target} (tol {tol:e})", ch.name());
        Ok(())
    };
    check(id2(), 1.0, 1e-4)?;
    check(trivial_channel_default(2).unwrap(), 0.0, 1e-6)?;
    for p in [0.2, 0.4, 0.8] {
        check(depolarizing(2, p).unwrap(), 1.0 - binary_entropy(p / 2.0).unwrap(), 1e-3)?;
    }
    for lambda in [0.25, 0.5, 0.75] {
        check(erasure_channel_default(&id2(), lambda).unwrap(), lambda, 1e-3)?;
    }
    Ok(format!("9 channels at default budget, slowest {slowest:.1?}"))
}

fn flag_decomposition() -> Outcome {
    let opts = HolevoOptions::default();
    let mut worst: f64 = 0.0;
    for ch in [
        erasure_channel_default(&id2(), 0.25).unwrap(),
        erasure_channel_default(&id2(), 0.5).unwrap(),
        heralded_channel_default(&[id2(), id2()], 1).unwrap(),
    ] {
        let naive = maximize_holevo(&ch, &opts).map_err(|e| e.to_string())?.value;
        let flagged = maximize_holevo_flagged(&ch, &opts).map_err(|e| e.to_string())?.value;
        ensure!((naive - flagged).abs() <= 1e-6, "{}: naive {naive} flagged {flagged}", ch.name());
        worst = worst.max((naive - flagged).abs());
    }
    // speed gate at a reduced common budget
    let gate = HolevoOptions { restarts: 2, max_iters: 100, ..HolevoOptions::default() };
    let z3 = heralded_channel_default(&[id2(), id2(), id2()], 1).unwrap();
    let start = Instant::now();
    let f = maximize_holevo_flagged(&z3, &gate).map_err(|e| e.to_string())?.value;
    let t_flagged = start.elapsed();
    let start = Instant::now();
    let n = maximize_holevo(&z3, &gate).map_err(|e| e.to_string())?.value;
    let t_naive = start.elapsed();
    let ratio = t_naive.as_secs_f64() / t_flagged.as_secs_f64().max(1e-9);
    ensure!(ratio >= 5.0, "flagged path only {ratio:.1}x faster ({t_flagged:.2?} vs {t_naive:.2?})");
    ensure!((f - n).abs() <= 1e-6, "Z_1(id2^3): naive {n} flagged {f}");
    Ok(format!("max disagreement {worst:.1e}; Z_1(id2,id2,id2) flagged {ratio:.0}x faster ({t_flagged:.2?} vs {t_naive:.2?})"))
}

fn heralded_averaging() -> Outcome {
    let opts = EsqOptions::default();
    let mut parts = Vec::new();
    for n in [2usize, 3] {
        let input = HeraldInput::bell_with_ancillas(n).map_err(|e| e.to_string())?;
        let r = heralded_averaging_check(&vec![id2(); n], 1, &mm(2), &[input], &opts).map_err(|e| e.to_string())?;
        let r = &r[0];
        ensure!(r.lhs <= r.rhs + 1e-4, "n={n}: esq bound {} above {}", r.lhs, r.rhs);
        if n == 2 {
            ensure!((r.lhs - r.rhs).abs() <= 1e-3, "n=2: {} not at equality with {}", r.lhs, r.rhs);
        }
        parts.push(format!("(n={n},k=1) {:.6} <= {:.6}", r.lhs, r.rhs));
    }
    Ok(parts.join("; "))
}

fn entropy_suite() -> Outcome {
    let start = Instant::now();
    let mut min_cmi = f64::INFINITY;
    for (i, dims) in [[2usize, 2, 2], [2, 2, 3]].iter().enumerate() {
        for s in 0..500u64 {
            let d: usize = dims.iter().product();
            let rank = 1 + (s as usize % d);
            let rho = random_density(SpaceShape::new(dims.to_vec()).unwrap(), rank, 1000 * i as u64 + s).unwrap();
            let cmi = conditional_mutual_information(&rho, &[0], &[1], &[2]).unwrap();
            ensure!(cmi >= -1e-9, "strong subadditivity: I(A;B|C) = {cmi} on {dims:?}, seed {s}");
            min_cmi = min_cmi.min(cmi);
        }
    }
    let mut worst_ratio: f64 = 0.0;
    for s in 0..500u64 {
        let db = 1 + (s as usize % 3);
        let shape = SpaceShape::new(vec![2, db]).unwrap();
        let rho = random_density(shape.clone(), 2 * db, 50_000 + s).unwrap();
        let tau = random_density(shape, 1 + (s as usize % (2 * db)), 60_000 + s).unwrap();
        let t = (s as f64 + 0.5) / 500.0;
        let sigma = DensityOperator::mixture(&[1.0 - t, t], &[rho.clone(), tau]).unwrap();
        let delta = (trace_distance_norm(&rho, &sigma).unwrap() / 2.0).min(1.0);
        let gap = (conditional_entropy(&rho, &[0], &[1]).unwrap() - conditional_entropy(&sigma, &[0], &[1]).unwrap()).abs();
        let refined = alicki_fannes_bound(delta, 2, AfVariant::Refined).unwrap();
        let weak = alicki_fannes_bound(delta, 2, AfVariant::Weak).unwrap();
        ensure!(gap <= refined + 1e-9, "continuity: gap {gap} > refined {refined} at delta {delta}");
        ensure!(refined <= weak + 1e-12, "refined {refined} > weak {weak} at delta {delta}");
        if refined > 0.0 {
            worst_ratio = worst_ratio.max(gap / refined);
        }
    }
    let t = within(start, Duration::from_secs(120), "entropy suite")?;
    Ok(format!("min I(A;B|C) {min_cmi:.2e} over 1000 states; max gap/refined {worst_ratio:.3} over 500 pairs; {t:.1?}"))
}

fn binomial_comparison() -> Outcome {
    let opts = HolevoOptions::default();
    let mut parts = Vec::new();
    for n in [2usize, 3] {
        for lambda in [1.0 / 3.0, 0.5] {
            let r = thm51_compare(&id2(), n, lambda, &ChiPotSpec::StronglyAdditive, &opts).map_err(|e| e.to_string())?;
            let bound = 1.0 + (n as f64 * lambda * (1.0 - lambda)).sqrt();
            ensure!(r.verdict.is_pass(), "n={n} lambda={lambda}: {}", r.verdict.label());
            ensure!((r.rhs - bound).abs() <= 1e-9, "n={n} lambda={lambda}: rhs {} vs {bound}", r.rhs);
            ensure!(r.lhs <= bound, "n={n} lambda={lambda}: lhs {} above {bound}", r.lhs);
            parts.push(format!("n={n} l={lambda:.3} slack {:.3}", r.slack));
        }
    }
    Ok(parts.join("; "))
}

const SWEEP: &str = r#"{
  "experiment": "erasure-sweep",
  "channels": ["identity(2)"],
  "grid": { "lambda": "0.02:0.5:10" },
  "seed": 7,
  "out": { "csv": "sweep.csv", "json": "sweep.json", "svg": "sweep.svg" }
}"#;

fn run_in(dir: &Path, config: &str, cache: &Path) -> Result<(herald_expcli::RunOutcome, Vec<Vec<u8>>), String> {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).map_err(|e| e.to_string())?;
    let opts = RunOptions { cache_dir: cache.to_path_buf(), jobs: 4, seed: None, out_dir: Some(dir.to_path_buf()), timings: false };
    let outcome = run_config(&cfg, &opts).map_err(|e| e.to_string())?;
    let bytes = outcome.written.iter().map(|p| fs::read(p).unwrap()).collect();
    Ok((outcome, bytes))
}

fn erasure_sweep() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let (outcome, bytes) = run_in(dir.path(), SWEEP, &dir.path().join("cache-a"))?;
    let points = &outcome.record.points;
    ensure!(points.len() == 10, "{} points", points.len());
    let (mut pass, mut hyp) = (0, 0);
    for p in points {
        let lambda: f64 = p.keys[0].1.parse().unwrap();
        let admissible = 3.1 * 2.0 * lambda.powf(0.25) <= 2.0;
        let v = &p.report.verdict;
        if admissible {
            ensure!(v.is_pass() && p.report.slack >= 0.0, "lambda {lambda}: {} slack {}", v.label(), p.report.slack);
            pass += 1;
        } else {
            ensure!(v.is_hypothesis_failure(), "lambda {lambda}: expected INCONCLUSIVE(hypothesis), got {}", v.label());
            hyp += 1;
        }
    }
    let csv = String::from_utf8(bytes[0].clone()).unwrap();
    ensure!(csv.lines().count() == 11, "csv has {} lines", csv.lines().count());
    let (_, again) = run_in(dir.path(), SWEEP, &dir.path().join("cache-b"))?;
    ensure!(again == bytes, "outputs differ between two cold runs");
    Ok(format!("{pass} PASS, {hyp} INCONCLUSIVE(hypothesis) as predicted; CSV/JSON/SVG identical across cold runs"))
}

fn blocksize() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=6usize {
        for i in 0..=20 {
            let lambda = i as f64 / 20.0;
            // binomial expansion of 1 - (1-l)^(n-1)
            let mut expansion = 0.0;
            let mut binom = 1.0;
            for j in 1..n {
                binom *= (n - j) as f64 / j as f64;
                expansion -= binom * (-lambda).powi(j as i32);
            }
            let diff = (blocksize_coefficient(lambda, n) - lambda * expansion).abs();
            ensure!(diff <= 1e-12, "coefficient off by {diff:e} at lambda {lambda}, n {n}");
            worst = worst.max(diff);
            let flat = vec![FValues { single: 0.7, potential: 0.7 }; n];
            let r = blocksize_bound(lambda, &flat, None).map_err(|e| e.to_string())?;
            ensure!(r.component("blocksize_correction") == Some(0.0), "nonzero correction with F_pot = F_1");
        }
    }
    let mut worst_rel: f64 = 0.0;
    for i in 1..=50 {
        let lambda = i as f64 * 0.001;
        let exact = blocksize_coefficient(lambda, 2);
        let rel = (blocksize_coefficient_o2(lambda, 2) - exact).abs() / exact;
        ensure!(rel <= 0.1, "second-order form off by {:.1}% at lambda {lambda}", 100.0 * rel);
        worst_rel = worst_rel.max(rel);
    }
    Ok(format!("coefficient max error {worst:.1e}; zero correction exact; O(l^2) max rel. error {worst_rel:.1e}"))
}

fn games() -> Outcome {
    let chsh = Game::chsh();
    let c = classical_value(&chsh).map_err(|e| e.to_string())?;
    ensure!(c.exact.as_deref() == Some("3/4") && c.value == 0.75, "classical {:?}", c.exact);
    let start = Instant::now();
    let q = entangled_value_lower(&chsh, 2, 2, &SeesawOptions::default()).map_err(|e| e.to_string())?;
    let t = within(start, Duration::from_secs(30), "see-saw")?;
    let tsirelson = (std::f64::consts::PI / 8.0).cos().powi(2);
    ensure!(q.entangled_lower >= 0.8525, "see-saw {}", q.entangled_lower);
    ensure!((q.entangled_lower - tsirelson).abs() <= 1e-3, "see-saw {} vs {tsirelson}", q.entangled_lower);
    ensure!(q.entangled_lower >= q.classical - 1e-9, "single game below classical");
    let m = multi_bob_values(&[chsh.clone(), chsh], 2, &[2, 2], &SeesawOptions::default()).map_err(|e| e.to_string())?;
    let bound = monogamy_game_bound(2, 2).map_err(|e| e.to_string())?;
    ensure!((bound - 2.0 * 2f64.powf(-0.25)).abs() < 1e-12, "bound {bound}");
    ensure!(m.gap <= bound + 1e-9, "gap {} above {bound}", m.gap);
    ensure!(m.entangled_lower >= m.classical - 1e-9, "multi-Bob below classical");
    Ok(format!(
        "classical 3/4; see-saw {:.6} in {t:.1?}; multi-Bob n=2 gap {:.4} <= {bound:.4}",
        q.entangled_lower, m.gap
    ))
}

fn squashed_entanglement() -> Outcome {
    let opts = EsqOptions::default();
    let mut worst: f64 = f64::NEG_INFINITY;
    for s in 0..12u64 {
        let db = 2 + (s as usize % 2);
        let rho = random_density(SpaceShape::new(vec![2, db]).unwrap(), 1 + (s as usize % (2 * db)), 70_000 + s).unwrap();
        let e = esq_upper(&rho, &[0], &[1], &EsqOptions { restarts: 2, seed: s, ..opts.clone() }).map_err(|e| e.to_string())?;
        let half = 0.5 * mutual_information(&rho, &[0], &[1]).unwrap();
        ensure!(e.value <= half + 1e-9, "seed {s}: {} above {half}", e.value);
        worst = worst.max(e.value - half);
    }
    let cc = esq_upper(&named::classically_correlated(), &[0], &[1], &EsqOptions { ext_dim: Some(2), ..opts.clone() })
        .map_err(|e| e.to_string())?;
    ensure!(cc.value <= 1e-4, "classically correlated: {}", cc.value);
    let bell = esq_upper(&named::bell(), &[0], &[1], &opts).map_err(|e| e.to_string())?;
    ensure!((bell.value - 1.0).abs() <= 1e-6, "Bell: {}", bell.value);
    let sep = separable_approx(&named::bell(), &[0], &[1], &SeparableOptions::default()).map_err(|e| e.to_string())?;
    let lower = ppt_witness_lower_bound(&named::bell(), &[0], &[1]).map_err(|e| e.to_string())?;
    ensure!(sep.distance >= lower - 1e-9, "separable distance {} below witness bound {lower}", sep.distance);
    Ok(format!(
        "max esq - I/2 {worst:.1e}; classical {:.1e}; Bell {:.9}; Bell distance {:.4} >= witness {lower:.4}",
        cc.value, bell.value, sep.distance
    ))
}

const GAMES: &str = r#"{
  "experiment": "games-monogamy",
  "games": ["chsh"],
  "grid": { "n": [1, 2] },
  "seesaw": { "restarts": 2 },
  "seed": 3,
  "out": { "csv": "g.csv", "json": "g.json", "svg": "g.svg" }
}"#;

fn determinism() -> Outcome {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let cache = dir.path().join("cache");
    let (first, bytes) = run_in(dir.path(), GAMES, &cache)?;
    ensure!(!first.cached, "first run served from cache");
    let (second, again) = run_in(dir.path(), GAMES, &cache)?;
    ensure!(second.cached, "second run missed the cache");
    ensure!(again == bytes, "cached outputs differ");
    let (third, cold) = run_in(dir.path(), GAMES, &dir.path().join("cold"))?;
    ensure!(!third.cached && cold == bytes, "recomputed outputs differ");
    Ok(format!("games-monogamy rerun: cache hit, {} files byte-identical; cold recompute identical", bytes.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("binomial mixture identity", mixture_identity),
        ("Holevo regressions", holevo_regressions),
        ("flag decomposition", flag_decomposition),
        ("heralded averaging", heralded_averaging),
        ("entropy property suite", entropy_suite),
        ("binomial comparison harness", binomial_comparison),
        ("erasure sweep", erasure_sweep),
        ("blocksize bound", blocksize),
        ("games", games),
        ("squashed entanglement", squashed_entanglement),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let t = start.elapsed();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name} ({t:.1?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} ({t:.1?}): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
