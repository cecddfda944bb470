//! Tabular outputs in CSV or JSON.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use agvsb_core::simulator::{KpiReport, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}`, expected csv or json")),
        }
    }
}

/// A table with a fixed column order.
pub trait Table: Serialize {
    const COLUMNS: &'static [&'static str];
}

pub const RESULT_COLUMNS: [&str; 22] = [
    "Layout",
    "FS",
    "OQ",
    "OWT",
    "DTW",
    "TrT",
    "WT",
    "OpT",
    "E1",
    "CoI",
    "CoD",
    "EmT",
    "RT",
    "E2",
    "E",
    "CoE",
    "CoT",
    "SRT",
    "CoS",
    "Rule",
    "Seed",
    "ServiceLevel",
];

/// One simulation run. Field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    #[serde(rename = "Layout")]
    pub layout: String,
    #[serde(rename = "FS")]
    pub fs: usize,
    #[serde(rename = "OQ")]
    pub oq: usize,
    #[serde(rename = "OWT")]
    pub owt: String,
    #[serde(rename = "DTW")]
    pub dtw: String,
    #[serde(rename = "TrT")]
    pub trt: f64,
    #[serde(rename = "WT")]
    pub wt: f64,
    #[serde(rename = "OpT")]
    pub opt: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    #[serde(rename = "CoI")]
    pub coi: f64,
    #[serde(rename = "CoD")]
    pub cod: f64,
    #[serde(rename = "EmT")]
    pub emt: f64,
    #[serde(rename = "RT")]
    pub rt: f64,
    #[serde(rename = "E2")]
    pub e2: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "CoE")]
    pub coe: f64,
    #[serde(rename = "CoT")]
    pub cot: f64,
    #[serde(rename = "SRT")]
    pub srt: f64,
    #[serde(rename = "CoS")]
    pub cos: f64,
    #[serde(rename = "Rule")]
    pub rule: String,
    #[serde(rename = "Seed")]
    pub seed: u64,
    #[serde(rename = "ServiceLevel")]
    pub service_level: f64,
}

impl Table for ResultRow {
    const COLUMNS: &'static [&'static str] = &RESULT_COLUMNS;
}

impl ResultRow {
    pub fn new(config: &SimConfig, r: &KpiReport) -> Self {
        Self {
            layout: config.scale.to_string(),
            fs: config.fleet_size,
            oq: config.order_quantity,
            owt: config.owt.to_string(),
            dtw: config.dtw.to_string(),
            trt: r.trt,
            wt: r.wt,
            opt: r.opt,
            e1: r.e1,
            coi: r.coi,
            cod: r.cod,
            emt: r.emt,
            rt: r.rt,
            e2: r.e2,
            e: r.e,
            coe: r.coe,
            cot: r.cot,
            srt: r.srt,
            cos: r.cos,
            rule: config.rule.to_string(),
            seed: config.seed,
            service_level: r.service_level,
        }
    }

    pub fn report(&self) -> KpiReport {
        KpiReport {
            trt: self.trt,
            wt: self.wt,
            opt: self.opt,
            e1: self.e1,
            coi: self.coi,
            cod: self.cod,
            emt: self.emt,
            rt: self.rt,
            e2: self.e2,
            e: self.e,
            coe: self.coe,
            cot: self.cot,
            srt: self.srt,
            cos: self.cos,
            service_level: self.service_level,
        }
    }
}

/// A run that produced no result row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    #[serde(rename = "Point")]
    pub point: usize,
    #[serde(rename = "Rule")]
    pub rule: String,
    #[serde(rename = "Seed")]
    pub seed: u64,
    #[serde(rename = "Error")]
    pub error: String,
}

impl Table for FailureRow {
    const COLUMNS: &'static [&'static str] = &["Point", "Rule", "Seed", "Error"];
}

/// Writes `rows` to `dir/stem.{csv,json}`. CSV always carries a header,
/// even with no rows; floats use the shortest round-trip form.
pub fn write_table<T: Table>(
    dir: &Path,
    stem: &str,
    rows: &[T],
    format: Format,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let file = BufWriter::new(File::create(&path)?);
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(file);
            w.write_record(T::COLUMNS)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut file = file;
            serde_json::to_writer_pretty(&mut file, rows)?;
            writeln!(file)?;
            file.flush()?;
        }
    }
    Ok(path)
}

/// Reads a results CSV, checking the header first.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != RESULT_COLUMNS {
        return Err(CliError::Config {
            path: path.display().to_string(),
            reason: format!(
                "expected columns {}, got {}",
                RESULT_COLUMNS.join(","),
                header.join(",")
            ),
        });
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}
