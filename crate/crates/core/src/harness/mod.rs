//! Experiment drivers: configuration, the diffusion experiment, the grid
//! sweep, the end-to-end report and their CSV outputs.
//!
//! Every run is a pure function of the config (seed included). Work is
//! spread over a rayon pool sized by `threads`, and results are gathered in
//! index order, so outputs do not depend on the thread count.

pub mod config;
pub mod diffusion;
pub mod output;
pub mod sweep;

use std::fs;
use std::path::PathBuf;

pub use config::{ExperimentConfig, ProfileSpec, RateList};
pub use diffusion::{run_diffusion, DiffusionSummary, LinkIncrement, PeakRate, TraceKey};
pub use sweep::{export_line_status, load_grid, run_sweep, run_sweep_with, SweepResult};

use crate::error::{Error, Result};
use crate::profiles::LinkCondition;
use output::{fmt_rate, CsvOut};

/// Run `f` inside a pool with the configured number of worker threads.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.resolve(&cfg.out);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

pub fn diffuse(cfg: &ExperimentConfig) -> Result<(DiffusionSummary, Vec<PathBuf>)> {
    let dir = out_dir(cfg)?;
    let summary = with_threads(cfg.threads, || run_diffusion(cfg))??;
    let files = summary.write(&dir, cfg.diffusion()?.write_traces)?;
    Ok((summary, files))
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<(SweepResult, Vec<PathBuf>)> {
    let dir = out_dir(cfg)?;
    let (res, calibrated) = with_threads(cfg.threads, || -> Result<_> {
        let grid = load_grid(cfg)?;
        Ok((run_sweep(cfg, &grid)?, sweep::calibrated_grid(cfg, &grid)?))
    })??;
    let mut files = res.write(&dir)?;
    let feeders = dir.join("feeders.csv");
    calibrated.write_csv(&feeders)?;
    files.push(feeders);
    Ok((res, files))
}

pub const REPORT_HEADER: [&str; 9] = [
    "model",
    "k",
    "seed_fraction",
    "step_hours",
    "follow_rate",
    "ev_rate",
    "mean_blackout_fraction",
    "min_blackout_fraction",
    "max_blackout_fraction",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EndToEnd {
    pub diffusion: DiffusionSummary,
    pub sweep: SweepResult,
}

/// Diffusion first; its mean peak-time follow-through rates (no-link
/// condition) become the follow axis of the grid sweep.
pub fn end_to_end(cfg: &ExperimentConfig) -> Result<(EndToEnd, Vec<PathBuf>)> {
    let dir = out_dir(cfg)?;
    let g = cfg.grid()?;
    let result = with_threads(cfg.threads, || -> Result<EndToEnd> {
        let diffusion = run_diffusion(cfg)?;
        let mut rates: Vec<f64> = diffusion
            .peak_rates
            .iter()
            .filter(|p| p.key.condition == LinkCondition::WithoutLink)
            .map(|p| p.mean)
            .collect();
        rates.sort_by(f64::total_cmp);
        rates.dedup();
        let grid = load_grid(cfg)?;
        let sweep = run_sweep_with(cfg, &grid, &rates, &g.ev_rates.values()?)?;
        Ok(EndToEnd { diffusion, sweep })
    })??;

    let mut files = result.diffusion.write(&dir, cfg.diffusion()?.write_traces)?;
    let s = &result.sweep;
    let mut report = CsvOut::create(&dir.join("report.csv"), &REPORT_HEADER)?;
    for p in result
        .diffusion
        .peak_rates
        .iter()
        .filter(|p| p.key.condition == LinkCondition::WithoutLink)
    {
        let f = s
            .follow_rates
            .iter()
            .position(|&r| r == p.mean)
            .expect("every peak rate is on the follow axis");
        for (e, ev) in s.ev_rates.iter().enumerate() {
            let (lo, hi) = s.range(e, f);
            report.row([
                p.key.model.to_string(),
                p.key.k.to_string(),
                fmt_rate(p.seed_fraction),
                p.step_hours.to_string(),
                fmt_rate(p.mean),
                fmt_rate(*ev),
                fmt_rate(s.mean(e, f)),
                fmt_rate(lo),
                fmt_rate(hi),
            ])?;
        }
    }
    let report = report.finish()?;
    output::validate_rate_columns(&report, &["follow_rate", "ev_rate", "mean_blackout_fraction"])?;
    files.push(report);
    Ok((result, files))
}
