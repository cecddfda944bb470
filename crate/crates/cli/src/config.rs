//! Scenario files.
//!
//! A scenario is one TOML document:
//!
//! ```toml
//! seed = 42            # top-level seed; every run derives its own from it
//! replications = 2     # runs per sweep point, >= 1
//!
//! [sim]                # base simulator config; omitted keys keep defaults
//! scale = "medium"
//! fleet_size = 3
//! order_quantity = 500
//! owt = { lo = 0.0, hi = 5.0 }
//! dtw = { hours = [1.0, 2.0, 4.0, 4.0] }
//! rule = "pdsp"
//!
//! [sim.cost]
//! beta = 1.0
//!
//! [sweep]              # each non-empty axis replaces the base value
//! scales = ["small", "medium"]
//! fleet_sizes = [3, 4, 5]
//! order_quantities = [500]
//! owt = [[0.0, 5.0]]
//! dtw = [[1.0, 2.0, 4.0, 4.0]]
//! rules = ["fcfs", "pdsp", "dcsp"]
//!
//! [train]
//! world = "small_warehouse"
//! orders = 20
//! agents = 2
//! layout_seed = 7
//!
//! [train.agdqn]
//! episodes = 60
//! ```
//!
//! Any key can be overridden from the environment: `AGVSB_SIM__FLEET_SIZE=5`
//! sets `sim.fleet_size`. Sections are separated by a double underscore and
//! names are lowercased. Values are read as TOML (`5`, `[3, 4]`, `"x"`) and
//! fall back to a plain string.

use std::path::Path;

use agvsb_core::agdqn::AgdqnConfig;
use agvsb_core::layout::WarehouseScale;
use agvsb_core::orders::{ArrivalWindow, DeadlineWindows};
use agvsb_core::scheduler::Rule;
use agvsb_core::simulator::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const ENV_PREFIX: &str = "AGVSB_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub replications: usize,
    pub sim: SimConfig,
    pub sweep: SweepAxes,
    pub train: TrainSpec,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            replications: 1,
            sim: SimConfig::default(),
            sweep: SweepAxes::default(),
            train: TrainSpec::default(),
        }
    }
}

/// Sweep axes. An empty axis means "use the base value".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub scales: Vec<String>,
    pub fleet_sizes: Vec<usize>,
    pub order_quantities: Vec<usize>,
    /// `[lo, hi]` inter-arrival bounds in seconds.
    pub owt: Vec<[f64; 2]>,
    /// Deadline offsets in hours for classes A..D.
    pub dtw: Vec<[f64; 4]>,
    pub rules: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainWorld {
    /// 5x5 grid, one agent, one order behind a wall.
    SingleGoal,
    /// Generated small warehouse with a dynamic order stream.
    SmallWarehouse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub world: TrainWorld,
    /// Orders and agents of the small warehouse.
    pub orders: usize,
    pub agents: usize,
    pub layout_seed: u64,
    pub agdqn: AgdqnConfig,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            world: TrainWorld::SingleGoal,
            orders: 20,
            agents: 2,
            layout_seed: 7,
            agdqn: AgdqnConfig::default(),
        }
    }
}

/// One combination of axis values and one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub replication: usize,
    /// Seeded config; the rule is filled in per job.
    pub config: SimConfig,
}

/// One simulation: a sweep point under one rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Job {
    pub point: usize,
    pub config: SimConfig,
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sweep point `index`; independent of every other point.
pub fn child_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(index as u64))
}

fn config_err(path: impl Into<String>, reason: impl ToString) -> CliError {
    CliError::Config {
        path: path.into(),
        reason: reason.to_string(),
    }
}

/// Reads a scenario file and applies `AGVSB_` overrides from the process
/// environment.
pub fn load_spec(path: &Path) -> Result<ScenarioSpec> {
    load_spec_with_env(path, std::env::vars())
}

pub fn load_spec_with_env<I>(path: &Path, env: I) -> Result<ScenarioSpec>
where
    I: IntoIterator<Item = (String, String)>,
{
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        file: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text, env).map_err(|e| match e {
        CliError::Toml { source, .. } => CliError::Toml {
            file: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Parses scenario text, applies overrides and validates every sweep point.
pub fn parse_spec<I>(text: &str, env: I) -> Result<ScenarioSpec>
where
    I: IntoIterator<Item = (String, String)>,
{
    let toml_err = |source| CliError::Toml {
        file: "<spec>".into(),
        source,
    };
    let mut table: toml::Table = toml::from_str(text).map_err(toml_err)?;
    let mut overrides: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    overrides.sort();
    for (key, value) in overrides {
        apply_override(&mut table, &key[ENV_PREFIX.len()..], &value)?;
    }
    let spec: ScenarioSpec = toml::Value::Table(table).try_into().map_err(toml_err)?;
    spec.expand()?;
    spec.train_config()?;
    Ok(spec)
}

fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let var = format!("{ENV_PREFIX}{key}");
    let segments: Vec<String> = key.split("__").map(str::to_ascii_lowercase).collect();
    if segments.iter().any(String::is_empty) {
        return Err(config_err(var, "empty key segment"));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = segments.split_last().expect("split yields one segment");
    let mut node = table;
    for seg in parents {
        let entry = node
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| config_err(var.clone(), format!("`{seg}` is not a section")))?;
    }
    node.insert(last.clone(), value);
    Ok(())
}

/// Scenario-file location of the value behind a core validation error.
fn core_error_path(e: &agvsb_core::Error) -> String {
    use agvsb_core::Error as E;
    match e {
        E::InvalidParameter { field, .. } => match *field {
            "delta1" | "delta2" | "ep" | "gamma" | "uihc" | "beta" | "self_weight" | "speed"
            | "battery_budget" => {
                format!("sim.cost.{field}")
            }
            "saturation_factor" => format!("sim.profiles.{field}"),
            other => format!("sim.{other}"),
        },
        E::WeightRange(_) => "sim.cost.w_t".into(),
        E::CapOrdering(_) => "sim.profiles.caps".into(),
        E::DeadlineOrdering(_) => "sim.dtw".into(),
        E::InvalidProportions { .. } => "sim.synthesis".into(),
        _ => "sim".into(),
    }
}

fn axis<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

impl ScenarioSpec {
    pub fn rules(&self) -> Result<Vec<Rule>> {
        if self.sweep.rules.is_empty() {
            return Ok(vec![self.sim.rule]);
        }
        self.sweep
            .rules
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse()
                    .map_err(|e| config_err(format!("sweep.rules[{i}]"), e))
            })
            .collect()
    }

    fn scales(&self) -> Result<Vec<WarehouseScale>> {
        if self.sweep.scales.is_empty() {
            return Ok(vec![self.sim.scale]);
        }
        self.sweep
            .scales
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse()
                    .map_err(|e| config_err(format!("sweep.scales[{i}]"), e))
            })
            .collect()
    }

    fn check_axes(&self) -> Result<()> {
        let s = &self.sweep;
        for (i, k) in s.fleet_sizes.iter().enumerate() {
            if *k == 0 {
                return Err(config_err(
                    format!("sweep.fleet_sizes[{i}]"),
                    "need at least one AGV",
                ));
            }
        }
        for (i, n) in s.order_quantities.iter().enumerate() {
            if *n == 0 {
                return Err(config_err(
                    format!("sweep.order_quantities[{i}]"),
                    "need at least one order",
                ));
            }
        }
        for (i, [lo, hi]) in s.owt.iter().enumerate() {
            ArrivalWindow::new(*lo, *hi).map_err(|e| config_err(format!("sweep.owt[{i}]"), e))?;
        }
        for (i, hours) in s.dtw.iter().enumerate() {
            DeadlineWindows::new(*hours).map_err(|e| config_err(format!("sweep.dtw[{i}]"), e))?;
        }
        Ok(())
    }

    /// Every sweep point in index order: scales, fleet sizes, order
    /// quantities, OWT, DTW, then replications vary fastest.
    pub fn expand(&self) -> Result<Vec<SweepPoint>> {
        if self.replications == 0 {
            return Err(config_err("replications", "must be >= 1"));
        }
        self.check_axes()?;
        self.rules()?;
        let base = &self.sim;
        let owts: Vec<ArrivalWindow> = if self.sweep.owt.is_empty() {
            vec![base.owt]
        } else {
            self.sweep
                .owt
                .iter()
                .map(|[lo, hi]| ArrivalWindow { lo: *lo, hi: *hi })
                .collect()
        };
        let dtws: Vec<DeadlineWindows> = if self.sweep.dtw.is_empty() {
            vec![base.dtw]
        } else {
            self.sweep
                .dtw
                .iter()
                .map(|h| DeadlineWindows { hours: *h })
                .collect()
        };
        let mut points = Vec::new();
        for scale in self.scales()? {
            for fleet_size in axis(&self.sweep.fleet_sizes, base.fleet_size) {
                for order_quantity in axis(&self.sweep.order_quantities, base.order_quantity) {
                    for owt in &owts {
                        for dtw in &dtws {
                            for replication in 0..self.replications {
                                let index = points.len();
                                let config = SimConfig {
                                    scale,
                                    fleet_size,
                                    order_quantity,
                                    owt: *owt,
                                    dtw: *dtw,
                                    seed: child_seed(self.seed, index),
                                    ..base.clone()
                                };
                                config
                                    .validate()
                                    .map_err(|e| config_err(core_error_path(&e), e))?;
                                points.push(SweepPoint {
                                    index,
                                    replication,
                                    config,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(points)
    }

    /// Every (point, rule) run in output order.
    pub fn jobs(&self) -> Result<Vec<Job>> {
        let rules = self.rules()?;
        let mut jobs = Vec::new();
        for p in self.expand()? {
            for rule in &rules {
                jobs.push(Job {
                    point: p.index,
                    config: SimConfig {
                        rule: *rule,
                        ..p.config.clone()
                    },
                });
            }
        }
        Ok(jobs)
    }

    /// The base config alone, seeded as sweep point 0.
    pub fn base_config(&self) -> Result<SimConfig> {
        let config = SimConfig {
            seed: child_seed(self.seed, 0),
            ..self.sim.clone()
        };
        config
            .validate()
            .map_err(|e| config_err(core_error_path(&e), e))?;
        Ok(config)
    }

    /// Trainer config seeded from the top-level seed.
    pub fn train_config(&self) -> Result<AgdqnConfig> {
        let cfg = AgdqnConfig {
            seed: child_seed(self.seed, 0),
            ..self.train.agdqn.clone()
        };
        cfg.validate().map_err(|e| {
            let path = match &e {
                agvsb_core::Error::InvalidParameter { field, .. } => format!("train.agdqn.{field}"),
                _ => "train.agdqn".into(),
            };
            config_err(path, e)
        })?;
        if self.train.world == TrainWorld::SmallWarehouse {
            if self.train.orders == 0 {
                return Err(config_err("train.orders", "need at least one order"));
            }
            if self.train.agents == 0 {
                return Err(config_err("train.agents", "need at least one agent"));
            }
        }
        Ok(cfg)
    }
}
