//! Command-line front end: model files in, CSV/JSON artifacts out.
//!
//! Exit codes: 0 on success, 1 when verification reports a failure, 2 on
//! usage or configuration errors. `IFIRE_THREADS` caps the worker pool.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::flow::IntegratorConfig;
use crate::map::{natural_and_tilde, FiringMap, Period2};
use crate::model::{
    cross_coupled_pair, example4_pair, peskin_pair, quadratic_pair, random_leaky_ensemble,
    EnsembleModel,
};
use crate::schema::ModelFile;
use crate::sim::{
    audit_sync_window, detect_clusters, fmt_sig, replicate_ensemble_experiment, run, sync_event_index,
    sync_time, FiringLog, StopRule,
};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ifire",
    version,
    about = "Simulation and firing-map analysis of pulse-coupled integrate-and-fire oscillators"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct IntegratorArgs {
    /// Relative integration tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Absolute integration tolerance.
    #[arg(long)]
    atol: Option<f64>,
    /// Firing-time localization tolerance.
    #[arg(long = "event-tol")]
    event_tol: Option<f64>,
}

impl IntegratorArgs {
    fn to_config(&self) -> Result<IntegratorConfig> {
        let mut cfg = IntegratorConfig::default();
        if let Some(r) = self.rtol {
            cfg.rel_tol = r;
        }
        if let Some(a) = self.atol {
            cfg.abs_tol = a;
        }
        if let Some(e) = self.event_tol {
            cfg.event_tol = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the firing map L, L², L³ with an analysis report and a
    /// cobweb trace.
    Map {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Number of grid cells on [0, 1].
        #[arg(long, default_value_t = 512)]
        grid: usize,
        /// Cobweb start value.
        #[arg(long, default_value_t = 0.25)]
        v0: f64,
        /// Largest region index to resolve.
        #[arg(long, default_value_t = 12)]
        kmax: usize,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// Run the hybrid system and log every firing.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Initial coordinates, comma-separated. Mutually exclusive with --seed.
        #[arg(long)]
        x0: Option<String>,
        /// Draw the initial coordinates uniformly from this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "max-events", default_value_t = 200)]
        max_events: usize,
        #[arg(long = "t-max")]
        t_max: Option<f64>,
        /// Consecutive all-fire events required to call the run synchronized.
        #[arg(long, default_value_t = 3)]
        persistence: usize,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// Print the synchronization regions S_k of the pair map.
    Regions {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        kmax: usize,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// Fixed point, map conditions, and the period-2 limits.
    Fixedpoints {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// The seeded random-ensemble experiment with staged snapshots.
    Ensemble {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0.08)]
        epsilon: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Snapshot positions: state is captured before these system firings.
        #[arg(long, default_value = "1,21,42,63")]
        snapshots: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// Audit a run against the map recursion and the timing window.
    Audit {
        #[arg(long)]
        model: PathBuf,
        /// Initial coordinates; at least one must be exactly 0.
        #[arg(long)]
        x0: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// Run the full acceptance-verification suite.
    Verify {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        integ: IntegratorArgs,
    },
    /// Emit a catalog model as JSON (reparses hash-identical).
    DumpModel {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        /// Flow drive S (leaky and cross-coupled presets).
        #[arg(long, default_value_t = 2.0)]
        s: f64,
        /// Leak rate gamma.
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Quadratic coefficient c.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Cross-coupling strength beta.
        #[arg(long, default_value_t = 0.05)]
        beta: f64,
        /// Ensemble size (random preset).
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    /// Identical leaky pair.
    Peskin,
    /// Quadratic pair (does not synchronize).
    Quadratic,
    /// Piecewise-linear pair with the inner 2-cycle.
    Piecewise,
    /// Cross-coupled leaky pair.
    Cross,
    /// Seeded random near-identical leaky ensemble.
    Random,
}

/// Parse argv, dispatch, and map the outcome to the exit-code contract.
pub fn run_cli() -> i32 {
    if let Ok(v) = std::env::var("IFIRE_THREADS") {
        if let Ok(k) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap exits 0 for --help/--version, 2 for usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Map { model, out, grid, v0, kmax, integ } => {
            cmd_map(&model, &out, grid, v0, kmax, &integ.to_config()?)
        }
        Command::Simulate { model, out, x0, seed, max_events, t_max, persistence, integ } => {
            cmd_simulate(&model, &out, x0, seed, max_events, t_max, persistence, &integ.to_config()?)
        }
        Command::Regions { model, out, kmax, integ } => {
            cmd_regions(&model, &out, kmax, &integ.to_config()?)
        }
        Command::Fixedpoints { model, out, integ } => {
            cmd_fixedpoints(&model, &out, &integ.to_config()?)
        }
        Command::Ensemble { n, epsilon, seed, snapshots, out, integ } => {
            cmd_ensemble(n, epsilon, seed, &snapshots, &out, &integ.to_config()?)
        }
        Command::Audit { model, x0, out, integ } => {
            cmd_audit(&model, &x0, &out, &integ.to_config()?)
        }
        Command::Verify { out, integ } => cmd_verify(&out, &integ.to_config()?),
        Command::DumpModel { preset, epsilon, s, gamma, c, beta, n, seed, out } => {
            cmd_dump_model(preset, epsilon, s, gamma, c, beta, n, seed, out.as_deref())
        }
    }
}

fn load_model(path: &Path) -> Result<(EnsembleModel, ModelFile)> {
    let file = ModelFile::load(path)
        .map_err(|e| Error::Config(format!("cannot load model {}: {e}", path.display())))?;
    let model = file.to_model()?;
    Ok((model, file))
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("not a number: {s:?}")))
        })
        .collect()
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("not an index: {s:?}")))
        })
        .collect()
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

/// Build the pair map from a model: numerically through the hybrid system
/// for n = 2, or from the free flow alone otherwise.
fn map_of(model: &EnsembleModel, cfg: &IntegratorConfig) -> Result<FiringMap> {
    if model.n == 2 {
        FiringMap::numeric_from_model(model, cfg)
    } else {
        FiringMap::numeric_from_flow(&model.flow, model.jump.epsilon(), cfg)
    }
}

fn analysis_json(map: &FiringMap, model: &EnsembleModel, kmax: usize) -> serde_json::Value {
    let cond = map.check_conditions_grid(512);
    let v_star = map.fixed_point().ok();
    let period2 = map.period2_points().ok().map(|p| match p {
        Period2::Degenerate { v_star } => json!({ "kind": "degenerate", "v_star": v_star }),
        Period2::Cycle { v_star2, v_hat } => {
            json!({ "kind": "cycle", "v_star2": v_star2, "v_hat": v_hat })
        }
    });
    let regions = map.sync_partition(kmax).ok().map(|p| {
        p.regions
            .iter()
            .map(|r| {
                json!({
                    "k": r.k, "lo": r.lo, "hi": r.hi,
                    "lo_closed": r.lo_closed, "hi_closed": r.hi_closed,
                })
            })
            .collect::<Vec<_>>()
    });
    let periods = v_star.and_then(|v| natural_and_tilde(&model.flow, v).ok());
    json!({
        "epsilon": map.epsilon,
        "eta": map.eta,
        "conditions": { "a1": cond.a1, "a2": cond.a2, "a3": cond.a3, "eta": cond.eta },
        "v_star": v_star,
        "period2": period2,
        "regions": regions,
        "natural_period": periods.map(|p| p.0),
        "tilde_period": periods.map(|p| p.1),
    })
}

fn cmd_map(
    model_path: &Path,
    out: &Path,
    grid: usize,
    v0: f64,
    kmax: usize,
    cfg: &IntegratorConfig,
) -> Result<i32> {
    let (model, _) = load_model(model_path)?;
    let map = map_of(&model, cfg)?;

    let mut csv = String::from("v,l1,l2,l3\n");
    for j in 0..=grid {
        let v = j as f64 / grid as f64;
        let (l1, l2, l3) = (map.eval(v), map.iterate(v, 2), map.iterate(v, 3));
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig(v),
            fmt_sig(l1),
            fmt_sig(l2),
            fmt_sig(l3)
        ));
    }
    write_out(out, "map.csv", &csv)?;

    let mut cobweb = String::from("step,x,y\n");
    let mut x = v0.clamp(0.0, 1.0);
    cobweb.push_str(&format!("0,{},{}\n", fmt_sig(x), fmt_sig(0.0)));
    for step in 1..=20 {
        let y = map.eval(x);
        cobweb.push_str(&format!("{step},{},{}\n", fmt_sig(x), fmt_sig(y)));
        cobweb.push_str(&format!("{step},{},{}\n", fmt_sig(y), fmt_sig(y)));
        x = y;
    }
    write_out(out, "cobweb.csv", &cobweb)?;

    let analysis = analysis_json(&map, &model, kmax);
    write_out(out, "analysis.json", &serde_json::to_string_pretty(&analysis)?)?;
    println!("wrote map.csv, cobweb.csv, analysis.json to {}", out.display());
    Ok(0)
}

fn log_header(file: &ModelFile, x0: &[f64], seed: Option<u64>, cfg: &IntegratorConfig) -> Result<String> {
    Ok(serde_json::to_string(&json!({
        "model_hash": file.hash()?,
        "n": file.n,
        "x0": x0,
        "seed": seed,
        "rel_tol": cfg.rel_tol,
        "abs_tol": cfg.abs_tol,
        "event_tol": cfg.event_tol,
    }))?)
}

fn summary_json(log: &FiringLog, persistence: usize) -> serde_json::Value {
    let st = sync_time(log, persistence);
    let clusters = detect_clusters(log, log.n.max(persistence));
    json!({
        "n": log.n,
        "events": log.events.len(),
        "t_end": log.t_end,
        "sync_time": st,
        "sync_event_index": sync_event_index(log, persistence),
        "synchronized": st.is_some(),
        "final_cluster_count": clusters.blocks.len(),
        "final_clusters": clusters.blocks,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model_path: &Path,
    out: &Path,
    x0: Option<String>,
    seed: Option<u64>,
    max_events: usize,
    t_max: Option<f64>,
    persistence: usize,
    cfg: &IntegratorConfig,
) -> Result<i32> {
    let (model, file) = load_model(model_path)?;
    let x0 = match (x0, seed) {
        (Some(text), _) => parse_f64_list(&text)?,
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..model.n).map(|_| rng.gen::<f64>()).collect()
        }
        (None, None) => {
            return Err(Error::Config("provide --x0 or --seed for the initial state".into()))
        }
    };
    if x0.len() != model.n {
        return Err(Error::Config(format!(
            "initial state has {} coordinates, model has n = {}",
            x0.len(),
            model.n
        )));
    }

    let mut stop = StopRule::max_events(max_events);
    if let Some(t) = t_max {
        stop.t_max = t;
    }
    let log = run(&model, &x0, stop, cfg)?;

    write_out(out, "log.csv", &log.to_csv(&log_header(&file, &x0, seed, cfg)?))?;
    let summary = summary_json(&log, persistence);
    write_out(out, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
    println!("wrote log.csv, summary.json to {}", out.display());
    Ok(0)
}

fn cmd_regions(model_path: &Path, out: &Path, kmax: usize, cfg: &IntegratorConfig) -> Result<i32> {
    let (model, _) = load_model(model_path)?;
    let map = map_of(&model, cfg)?;
    let partition = map.sync_partition(kmax)?;
    let mut csv = String::from("k,lo,hi,lo_closed,hi_closed\n");
    for r in &partition.regions {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k,
            fmt_sig(r.lo),
            fmt_sig(r.hi),
            r.lo_closed,
            r.hi_closed
        ));
    }
    write_out(out, "regions.csv", &csv)?;
    print!("{csv}");
    Ok(0)
}

fn cmd_fixedpoints(model_path: &Path, out: &Path, cfg: &IntegratorConfig) -> Result<i32> {
    let (model, _) = load_model(model_path)?;
    let map = map_of(&model, cfg)?;
    let analysis = analysis_json(&map, &model, 12);
    write_out(out, "fixedpoints.json", &serde_json::to_string_pretty(&analysis)?)?;
    println!("{}", serde_json::to_string_pretty(&analysis)?);
    Ok(0)
}

fn cmd_ensemble(
    n: usize,
    epsilon: f64,
    seed: u64,
    snapshots: &str,
    out: &Path,
    cfg: &IntegratorConfig,
) -> Result<i32> {
    let snapshots = parse_usize_list(snapshots)?;
    let (report, log, model) = replicate_ensemble_experiment(seed, n, epsilon, &snapshots, cfg)?;

    let file = ModelFile::from_model(&model)?;
    write_out(out, "log.csv", &log.to_csv(&log_header(&file, &log.initial_state_x, Some(seed), cfg)?))?;

    let mut clusters = String::from("before_firing,t,cluster_count,available\n");
    for shot in &report.snapshots {
        clusters.push_str(&format!(
            "{},{},{},{}\n",
            shot.before_firing,
            fmt_sig(shot.t),
            shot.cluster_count,
            shot.available
        ));
        write_out(
            out,
            &format!("snapshot_before_{}.csv", shot.before_firing),
            &shot.to_csv(&log, &model),
        )?;
    }
    write_out(out, "clusters.csv", &clusters)?;
    write_out(out, "report.json", &serde_json::to_string_pretty(&report)?)?;
    println!(
        "seed {seed}: {} events, synchronized = {}, wrote report.json to {}",
        report.total_events,
        report.synchronized,
        out.display()
    );
    Ok(0)
}

fn cmd_audit(model_path: &Path, x0: &str, out: &Path, cfg: &IntegratorConfig) -> Result<i32> {
    let (model, _) = load_model(model_path)?;
    let x0 = parse_f64_list(x0)?;
    let map = map_of(&model, cfg)?;
    let v_star = map.fixed_point()?;
    let (t_nat, t_tilde) = natural_and_tilde(&model.flow, v_star)?;
    let report = audit_sync_window(&model, &x0, &map, t_nat, t_tilde, cfg)?;
    write_out(out, "audit.json", &serde_json::to_string_pretty(&report)?)?;
    println!(
        "max deviation {:.3e}, window check = {:?}",
        report.max_deviation, report.within_window
    );
    Ok(0)
}

fn cmd_verify(out: &Path, cfg: &IntegratorConfig) -> Result<i32> {
    let results = crate::verify::run_all(cfg)?;
    for r in &results {
        println!("{}", r.summary_line());
    }
    let passed = results.iter().all(|r| r.passed);
    let doc = json!({ "passed": passed, "criteria": results });
    write_out(out, "verify.json", &serde_json::to_string_pretty(&doc)?)?;
    println!(
        "{}: {}/{} criteria passed",
        if passed { "PASS" } else { "FAIL" },
        results.iter().filter(|r| r.passed).count(),
        results.len()
    );
    Ok(if passed { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_dump_model(
    preset: Preset,
    epsilon: f64,
    s: f64,
    gamma: f64,
    c: f64,
    beta: f64,
    n: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<i32> {
    let model = match preset {
        Preset::Peskin => peskin_pair(s, gamma, epsilon)?,
        Preset::Quadratic => quadratic_pair(c, epsilon)?,
        Preset::Piecewise => example4_pair(epsilon)?,
        Preset::Cross => cross_coupled_pair(s, gamma, beta, epsilon)?,
        Preset::Random => random_leaky_ensemble(n, epsilon, seed)?,
    };
    let mut file = ModelFile::from_model(&model)?;
    if matches!(preset, Preset::Random) {
        file.seed = Some(seed);
    }
    let text = file.to_json()?;
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            std::fs::write(path, &text)?;
        }
        None => println!("{text}"),
    }
    Ok(0)
}
