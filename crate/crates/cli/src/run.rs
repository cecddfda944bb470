//! Checked simulation runs and concurrent sweeps.

use agvsb_core::simulator::{simulate, validate_constraints, SimConfig, SimOutcome};
use rayon::prelude::*;

use crate::config::Job;
use crate::error::{CliError, Result};
use crate::output::{FailureRow, ResultRow};

/// Relative tolerance of the accounting identities on emitted rows.
pub const IDENTITY_TOL: f64 = 1e-6;

/// Runs one simulation and rejects any outcome that breaks a constraint or
/// an accounting identity, so every emitted row is known to satisfy both.
pub fn checked_run(config: &SimConfig) -> Result<SimOutcome> {
    let outcome = simulate(config)?;
    let violations = validate_constraints(&outcome.trace);
    if !violations.is_empty() {
        let listed: Vec<String> = violations.iter().take(5).map(ToString::to_string).collect();
        return Err(CliError::Aborted(format!(
            "{} constraint violation(s): {}",
            violations.len(),
            listed.join("; ")
        )));
    }
    let broken = outcome
        .report
        .identity_failures(config.cost.beta, IDENTITY_TOL);
    if !broken.is_empty() {
        return Err(CliError::Aborted(format!(
            "accounting identity failed: {}",
            broken.join(", ")
        )));
    }
    Ok(outcome)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOutcome {
    /// Successful runs in job order.
    pub rows: Vec<ResultRow>,
    pub failures: Vec<FailureRow>,
}

/// Runs `jobs` on at most `threads` workers. A failed job is recorded and
/// the rest proceed; output order is job order whatever the completion
/// order.
pub fn run_sweep(jobs: &[Job], threads: usize) -> Result<SweepOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Aborted(format!("cannot start worker pool: {e}")))?;
    let results: Vec<std::result::Result<ResultRow, FailureRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                log::info!(
                    "point {} {} K={} N={} seed {}",
                    job.point,
                    job.config.rule,
                    job.config.fleet_size,
                    job.config.order_quantity,
                    job.config.seed
                );
                let config = SimConfig {
                    record_moves: false,
                    ..job.config.clone()
                };
                checked_run(&config)
                    .map(|o| ResultRow::new(&job.config, &o.report))
                    .map_err(|e| FailureRow {
                        point: job.point,
                        rule: job.config.rule.to_string(),
                        seed: job.config.seed,
                        error: e.to_string(),
                    })
            })
            .collect()
    });
    let mut out = SweepOutcome::default();
    for r in results {
        match r {
            Ok(row) => out.rows.push(row),
            Err(f) => {
                log::warn!("point {} {} failed: {}", f.point, f.rule, f.error);
                out.failures.push(f);
            }
        }
    }
    Ok(out)
}
