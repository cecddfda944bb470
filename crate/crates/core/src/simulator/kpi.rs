use serde::{Deserialize, Serialize};

use crate::costmodel::{energy_cost, reported_system_cost, CostParams, OrderServiceRecord};

/// Fleet-level performance report. Times are seconds, energies Wh, costs $.
///
/// `trt`, `wt` and `opt` are per-order means; `emt`, `rt` and `srt` are
/// fleet totals; energies and costs are sums over all orders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub trt: f64,
    pub wt: f64,
    pub opt: f64,
    pub e1: f64,
    pub coi: f64,
    pub cod: f64,
    pub emt: f64,
    pub rt: f64,
    pub e2: f64,
    pub e: f64,
    pub coe: f64,
    pub cot: f64,
    pub srt: f64,
    pub cos: f64,
    pub service_level: f64,
}

/// Fleet totals collected by the engine alongside per-order records.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FleetTotals {
    pub empty_seconds: f64,
    pub running_seconds: f64,
    pub empty_energy: f64,
    pub fleet_size: usize,
    pub makespan: f64,
}

/// Share of orders with zero delay; 1 for an empty set.
pub fn service_level(records: &[OrderServiceRecord]) -> f64 {
    if records.is_empty() {
        return 1.0;
    }
    records.iter().filter(|r| r.delay_time == 0.0).count() as f64 / records.len() as f64
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl KpiReport {
    pub fn from_records(
        records: &[OrderServiceRecord],
        totals: &FleetTotals,
        params: &CostParams,
    ) -> Self {
        let trt = mean(records.iter().map(|r| r.travel_time));
        let wt = mean(records.iter().map(|r| r.waiting_time));
        let e1: f64 = records.iter().map(|r| r.order_energy).sum();
        let coi: f64 = records.iter().map(|r| r.inventory_cost).sum();
        let cod: f64 = records.iter().map(|r| r.delay_cost).sum();
        let e = e1 + totals.empty_energy;
        let coe = energy_cost(e, params);
        let cot = coi + params.beta * cod;
        Self {
            trt,
            wt,
            opt: trt + wt,
            e1,
            coi,
            cod,
            emt: totals.empty_seconds,
            rt: totals.running_seconds,
            e2: totals.empty_energy,
            e,
            coe,
            cot,
            srt: totals.fleet_size as f64 * totals.makespan,
            cos: reported_system_cost(coe, cot),
            service_level: service_level(records),
        }
    }

    /// Names of accounting identities that fail at relative tolerance `tol`.
    pub fn identity_failures(&self, beta: f64, tol: f64) -> Vec<&'static str> {
        let close = |lhs: f64, rhs: f64| {
            (lhs - rhs).abs() <= tol * lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
        };
        let mut failed = Vec::new();
        if !close(self.opt, self.trt + self.wt) {
            failed.push("OpT = TrT + WT");
        }
        if !close(self.e, self.e1 + self.e2) {
            failed.push("E = E1 + E2");
        }
        if !close(self.cot, self.coi + beta * self.cod) {
            failed.push("CoT = CoI + beta*CoD");
        }
        if !close(self.cos, self.coe + self.cot) {
            failed.push("CoS = CoE + CoT");
        }
        failed
    }
}
