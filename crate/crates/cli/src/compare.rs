//! Per-rule summaries of a results table and SVG bar charts per KPI.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::output::{ResultRow, Table};

/// KPI columns summarised and charted, in table order.
pub const KPIS: [&str; 15] = [
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
    "ServiceLevel",
];

/// Rules the proposed rules are measured against.
pub const BASELINES: [&str; 4] = ["FCFS", "SPT", "EDT", "LDC"];

fn kpi_values(r: &ResultRow) -> [f64; 15] {
    [
        r.trt,
        r.wt,
        r.opt,
        r.e1,
        r.coi,
        r.cod,
        r.emt,
        r.rt,
        r.e2,
        r.e,
        r.coe,
        r.cot,
        r.srt,
        r.cos,
        r.service_level,
    ]
}

/// Scenario columns shared by every rule compared against each other.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioKey {
    pub layout: String,
    pub fs: usize,
    pub oq: usize,
    pub owt: String,
    pub dtw: String,
}

impl ScenarioKey {
    fn of(r: &ResultRow) -> Self {
        Self {
            layout: r.layout.clone(),
            fs: r.fs,
            oq: r.oq,
            owt: r.owt.clone(),
            dtw: r.dtw.clone(),
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{} K={} N={} OWT {} DTW {}",
            self.layout, self.fs, self.oq, self.owt, self.dtw
        )
    }
}

/// Mean KPIs of one rule in one scenario, with deltas against the best
/// baseline rule of that scenario. A delta is negative when the rule is
/// cheaper than the best baseline and empty when that baseline is zero or
/// absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
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
    #[serde(rename = "Rule")]
    pub rule: String,
    #[serde(rename = "Runs")]
    pub runs: usize,
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
    #[serde(rename = "ServiceLevel")]
    pub service_level: f64,
    #[serde(rename = "CoDvsBestBaselinePct")]
    pub cod_delta_pct: Option<f64>,
    #[serde(rename = "CoSvsBestBaselinePct")]
    pub cos_delta_pct: Option<f64>,
}

impl Table for SummaryRow {
    const COLUMNS: &'static [&'static str] = &[
        "Layout",
        "FS",
        "OQ",
        "OWT",
        "DTW",
        "Rule",
        "Runs",
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
        "ServiceLevel",
        "CoDvsBestBaselinePct",
        "CoSvsBestBaselinePct",
    ];
}

impl SummaryRow {
    pub fn key(&self) -> ScenarioKey {
        ScenarioKey {
            layout: self.layout.clone(),
            fs: self.fs,
            oq: self.oq,
            owt: self.owt.clone(),
            dtw: self.dtw.clone(),
        }
    }

    pub fn kpis(&self) -> [f64; 15] {
        [
            self.trt,
            self.wt,
            self.opt,
            self.e1,
            self.coi,
            self.cod,
            self.emt,
            self.rt,
            self.e2,
            self.e,
            self.coe,
            self.cot,
            self.srt,
            self.cos,
            self.service_level,
        ]
    }
}

/// Percentage change of `value` relative to `best`; `None` unless `best > 0`.
pub fn pct_delta(value: f64, best: f64) -> Option<f64> {
    (best > 0.0).then(|| (value - best) / best * 100.0)
}

/// Groups scenarios and rules in first-appearance order and averages each
/// KPI over the group's runs.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    type RuleRuns<'a> = Vec<(String, Vec<&'a ResultRow>)>;
    let mut scenarios: Vec<(ScenarioKey, RuleRuns)> = Vec::new();
    for r in rows {
        let key = ScenarioKey::of(r);
        let idx = match scenarios.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                scenarios.push((key, Vec::new()));
                scenarios.len() - 1
            }
        };
        let rules = &mut scenarios[idx].1;
        match rules.iter_mut().find(|(rule, _)| *rule == r.rule) {
            Some((_, group)) => group.push(r),
            None => rules.push((r.rule.clone(), vec![r])),
        }
    }

    let mut out = Vec::new();
    for (key, rules) in scenarios {
        let means: Vec<(String, usize, [f64; 15])> = rules
            .iter()
            .map(|(rule, group)| {
                let mut sum = [0.0; 15];
                for r in group {
                    for (s, v) in sum.iter_mut().zip(kpi_values(r)) {
                        *s += v;
                    }
                }
                let n = group.len() as f64;
                (rule.clone(), group.len(), sum.map(|s| s / n))
            })
            .collect();
        let best = |col: usize| {
            means
                .iter()
                .filter(|(rule, _, _)| BASELINES.contains(&rule.as_str()))
                .map(|(_, _, m)| m[col])
                .min_by(f64::total_cmp)
        };
        let cod_col = KPIS.iter().position(|k| *k == "CoD").unwrap();
        let cos_col = KPIS.iter().position(|k| *k == "CoS").unwrap();
        let (best_cod, best_cos) = (best(cod_col), best(cos_col));
        for (rule, runs, m) in means {
            out.push(SummaryRow {
                layout: key.layout.clone(),
                fs: key.fs,
                oq: key.oq,
                owt: key.owt.clone(),
                dtw: key.dtw.clone(),
                rule,
                runs,
                trt: m[0],
                wt: m[1],
                opt: m[2],
                e1: m[3],
                coi: m[4],
                cod: m[5],
                emt: m[6],
                rt: m[7],
                e2: m[8],
                e: m[9],
                coe: m[10],
                cot: m[11],
                srt: m[12],
                cos: m[13],
                service_level: m[14],
                cod_delta_pct: best_cod.and_then(|b| pct_delta(m[cod_col], b)),
                cos_delta_pct: best_cos.and_then(|b| pct_delta(m[cos_col], b)),
            });
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64, top: f64) -> String {
    if top >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Grouped bar chart: one group per scenario, one bar per rule. Output
/// depends only on the inputs, so charts are byte-stable.
pub fn bar_chart(
    title: &str,
    groups: &[String],
    series: &[String],
    values: &[Vec<Option<f64>>],
) -> String {
    const BAR: f64 = 16.0;
    const GAP: f64 = 24.0;
    const LEFT: f64 = 80.0;
    const TOP: f64 = 40.0;
    const PLOT_H: f64 = 240.0;
    const LEGEND_W: f64 = 120.0;

    let group_w = series.len().max(1) as f64 * BAR + GAP;
    let plot_w = (groups.len().max(1) as f64 * group_w).max(200.0);
    let width = LEFT + plot_w + LEGEND_W;
    let height = TOP + PLOT_H + 30.0 + 16.0 * groups.len() as f64 + 20.0;
    let max = values
        .iter()
        .flatten()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let top = if max > 0.0 { max * 1.1 } else { 1.0 };
    let y = |v: f64| TOP + PLOT_H - (v / top) * PLOT_H;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for i in 0..=5 {
        let v = top * i as f64 / 5.0;
        let yy = y(v);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            yy + 4.0,
            tick_label(v, top)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="black"/>"#,
        TOP + PLOT_H
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        TOP + PLOT_H,
        LEFT + plot_w,
        TOP + PLOT_H
    );
    for (g, row) in values.iter().enumerate() {
        let x0 = LEFT + g as f64 * group_w + GAP / 2.0;
        for (k, v) in row.iter().enumerate() {
            let Some(v) = v.filter(|v| v.is_finite()) else {
                continue;
            };
            let yy = y(v.max(0.0));
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{yy:.1}" width="{BAR}" height="{:.1}" fill="{}"><title>{}: {v}</title></rect>"#,
                x0 + k as f64 * BAR,
                TOP + PLOT_H - yy,
                PALETTE[k % PALETTE.len()],
                escape(&series[k])
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">S{}</text>"#,
            x0 + (group_w - GAP) / 2.0,
            TOP + PLOT_H + 16.0,
            g + 1
        );
    }
    for (g, label) in groups.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{LEFT}" y="{:.1}">S{}: {}</text>"#,
            TOP + PLOT_H + 40.0 + 16.0 * g as f64,
            g + 1,
            escape(label)
        );
    }
    for (k, name) in series.iter().enumerate() {
        let ly = TOP + 16.0 * k as f64;
        let lx = LEFT + plot_w + 16.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{ly:.1}" width="10" height="10" fill="{}"/>"#,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 14.0,
            ly + 9.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes one chart per KPI to `dir/<KPI>.svg`.
pub fn write_charts(dir: &Path, summary: &[SummaryRow]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut groups: Vec<String> = Vec::new();
    let mut series: Vec<String> = Vec::new();
    for r in summary {
        let label = r.key().label();
        if !groups.contains(&label) {
            groups.push(label);
        }
        if !series.contains(&r.rule) {
            series.push(r.rule.clone());
        }
    }
    let mut paths = Vec::new();
    for (col, kpi) in KPIS.iter().enumerate() {
        let mut values = vec![vec![None; series.len()]; groups.len()];
        for r in summary {
            let label = r.key().label();
            let g = groups.iter().position(|l| *l == label).unwrap();
            let k = series.iter().position(|s| *s == r.rule).unwrap();
            values[g][k] = Some(r.kpis()[col]);
        }
        let path = dir.join(format!("{kpi}.svg"));
        std::fs::write(
            &path,
            bar_chart(&format!("Mean {kpi} by rule"), &groups, &series, &values),
        )?;
        paths.push(path);
    }
    Ok(paths)
}
