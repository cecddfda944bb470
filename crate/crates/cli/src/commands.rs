//! The five verbs. Each writes its artifacts under `Options::out_dir`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use agvsb_core::agdqn::{evaluate_policy, train as train_agent, EnvScenario};
use agvsb_core::simulator::{
    collisions_from_events, read_trace_csv, station_from_events, write_trace_csv,
};
use serde::{Deserialize, Serialize};

use crate::compare::{summarize, write_charts};
use crate::config::{load_spec, ScenarioSpec, TrainWorld};
use crate::error::{CliError, Result};
use crate::output::{read_results, write_table, Format, ResultRow, Table};
use crate::run::{checked_run, run_sweep};

#[derive(Clone, Debug, PartialEq)]
pub struct Options {
    pub out_dir: PathBuf,
    pub format: Format,
    /// Worker threads for sweeps.
    pub jobs: usize,
    /// Replaces the scenario's top-level seed.
    pub seed: Option<u64>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            format: Format::Csv,
            jobs: 1,
            seed: None,
        }
    }
}

fn spec_with_seed(path: &Path, opts: &Options) -> Result<ScenarioSpec> {
    let mut spec = load_spec(path)?;
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

/// Files a verb wrote, plus a one-line human summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Runs the base scenario once and writes `results` and `trace.csv`.
pub fn simulate(spec_path: &Path, opts: &Options) -> Result<Report> {
    let spec = spec_with_seed(spec_path, opts)?;
    let config = spec.base_config()?;
    let outcome = checked_run(&config)?;
    let row = ResultRow::new(&config, &outcome.report);
    let results = write_table(
        &opts.out_dir,
        "results",
        std::slice::from_ref(&row),
        opts.format,
    )?;
    let trace = opts.out_dir.join("trace.csv");
    write_trace_csv(BufWriter::new(File::create(&trace)?), &outcome.trace.events)?;
    Ok(Report {
        files: vec![results, trace],
        summary: format!(
            "{} K={} N={}: WT {:.2} s, CoD {:.2} $, CoS {:.2} $, service level {:.3}",
            row.rule, row.fs, row.oq, row.wt, row.cod, row.cos, row.service_level
        ),
    })
}

/// Runs every sweep point under every rule and writes `results` and
/// `errors`. Fails with an abort after writing both if any run failed.
pub fn sweep(spec_path: &Path, opts: &Options) -> Result<Report> {
    let spec = spec_with_seed(spec_path, opts)?;
    let jobs = spec.jobs()?;
    log::info!("{} runs on {} worker(s)", jobs.len(), opts.jobs);
    let outcome = run_sweep(&jobs, opts.jobs)?;
    let results = write_table(&opts.out_dir, "results", &outcome.rows, opts.format)?;
    let errors = write_table(&opts.out_dir, "errors", &outcome.failures, opts.format)?;
    if !outcome.failures.is_empty() {
        return Err(CliError::Aborted(format!(
            "{} of {} runs failed; see {}",
            outcome.failures.len(),
            jobs.len(),
            errors.display()
        )));
    }
    Ok(Report {
        files: vec![results, errors],
        summary: format!("{} runs completed", outcome.rows.len()),
    })
}

/// Summarises a results CSV per scenario and rule and charts every KPI.
pub fn compare(results_path: &Path, opts: &Options) -> Result<Report> {
    let rows = read_results(results_path)?;
    let summary = summarize(&rows);
    let mut files = vec![write_table(
        &opts.out_dir,
        "summary",
        &summary,
        opts.format,
    )?];
    files.extend(write_charts(&opts.out_dir.join("charts"), &summary)?);
    let best = summary
        .iter()
        .filter_map(|r| r.cod_delta_pct.map(|d| (r, d)))
        .filter(|(r, _)| r.rule == "PDSP" || r.rule == "DCSP")
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let summary_line = match best {
        Some((r, d)) => format!(
            "{} summary rows; largest CoD change vs best baseline: {} {:+.1}% ({})",
            summary.len(),
            r.rule,
            d,
            r.key().label()
        ),
        None => format!("{} summary rows", summary.len()),
    };
    Ok(Report {
        files,
        summary: summary_line,
    })
}

/// Greedy evaluation of a trained network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    #[serde(rename = "Completed")]
    pub completed: bool,
    #[serde(rename = "Ticks")]
    pub ticks: u64,
    #[serde(rename = "OrdersPicked")]
    pub orders_picked: usize,
    #[serde(rename = "BlockedMoves")]
    pub blocked_moves: usize,
    #[serde(rename = "Collisions")]
    pub collisions: usize,
}

impl Table for EvaluationRow {
    const COLUMNS: &'static [&'static str] = &[
        "Completed",
        "Ticks",
        "OrdersPicked",
        "BlockedMoves",
        "Collisions",
    ];
}

/// Learning curve of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    #[serde(rename = "cumulativeReward")]
    pub cumulative_reward: f64,
    #[serde(rename = "meanLoss")]
    pub mean_loss: f64,
    pub epsilon: f64,
}

impl Table for CurveRow {
    const COLUMNS: &'static [&'static str] =
        &["episode", "cumulativeReward", "meanLoss", "epsilon"];
}

/// Trains the Q-network and writes `curves`, `evaluation` and
/// `qnet.params`. Divergence aborts without writing anything.
pub fn train(spec_path: &Path, opts: &Options) -> Result<Report> {
    let spec = spec_with_seed(spec_path, opts)?;
    let cfg = spec.train_config()?;
    let t = &spec.train;
    let scen = match t.world {
        TrainWorld::SingleGoal => EnvScenario::single_goal(),
        TrainWorld::SmallWarehouse => {
            EnvScenario::small_warehouse(t.orders, t.agents, t.layout_seed)?
        }
    };
    log::info!("training {} episodes on {:?}", cfg.episodes, t.world);
    let outcome = train_agent(&cfg, &scen)?;
    let curves: Vec<CurveRow> = outcome
        .curves
        .iter()
        .map(|c| CurveRow {
            episode: c.episode,
            cumulative_reward: c.cumulative_reward,
            mean_loss: c.mean_loss,
            epsilon: c.epsilon,
        })
        .collect();
    let rollout = evaluate_policy(&outcome.q, &scen);
    let eval = EvaluationRow {
        completed: rollout.completed,
        ticks: rollout.ticks,
        orders_picked: rollout.order_sequence.len(),
        blocked_moves: rollout.blocked_moves,
        collisions: rollout.collisions,
    };
    let mut files = vec![
        write_table(&opts.out_dir, "curves", &curves, opts.format)?,
        write_table(
            &opts.out_dir,
            "evaluation",
            std::slice::from_ref(&eval),
            opts.format,
        )?,
    ];
    let params = opts.out_dir.join("qnet.params");
    let mut w = BufWriter::new(File::create(&params)?);
    outcome.q.save(&mut w)?;
    w.flush()?;
    files.push(params);
    Ok(Report {
        files,
        summary: format!(
            "{} episodes; greedy rollout completed={} in {} ticks, {} of {} orders, {} collisions",
            curves.len(),
            eval.completed,
            eval.ticks,
            eval.orders_picked,
            scen.orders.len(),
            eval.collisions
        ),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionRow {
    #[serde(rename = "Tick")]
    pub tick: u64,
    #[serde(rename = "X")]
    pub x: i32,
    #[serde(rename = "Y")]
    pub y: i32,
}

impl Table for CollisionRow {
    const COLUMNS: &'static [&'static str] = &["Tick", "X", "Y"];
}

/// Replays a trace and lists every tick at which two AGVs shared a cell
/// other than the station.
pub fn replay(trace_path: &Path, opts: &Options) -> Result<Report> {
    let file = File::open(trace_path).map_err(|source| CliError::Read {
        file: trace_path.to_path_buf(),
        source,
    })?;
    let events = read_trace_csv(BufReader::new(file))?;
    let station = station_from_events(&events);
    let rows: Vec<CollisionRow> = collisions_from_events(&events, station)
        .into_iter()
        .map(|(tick, cell)| CollisionRow {
            tick,
            x: cell.x,
            y: cell.y,
        })
        .collect();
    let path = write_table(&opts.out_dir, "collisions", &rows, opts.format)?;
    Ok(Report {
        files: vec![path],
        summary: format!(
            "{} events replayed, {} collisions",
            events.len(),
            rows.len()
        ),
    })
}
