use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::error::Result;
use crate::influence::{follow_through_rate_at_peak, mean_trace, peak_step, run_cascade, PropagationConfig, StepCounts};
use crate::profiles::{assign_profiles, LinkCondition, ModelKind, ProfileSet};
use crate::seed;
use crate::social_graph::generate_scale_free;

use super::config::{build_profile_set, ExperimentConfig};
use super::output::{self, fmt_rate, CsvOut};

/// One cell of the diffusion design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceKey {
    pub condition: LinkCondition,
    pub model: ModelKind,
    pub k: usize,
    /// Index into the configured seed fractions.
    pub fraction: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakRate {
    pub key: TraceKey,
    pub seed_fraction: f64,
    pub step_hours: u32,
    pub peak_step: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkIncrement {
    pub model: ModelKind,
    pub k: usize,
    pub seed_fraction: f64,
    pub step_hours: u32,
    pub without_link: f64,
    pub with_link: f64,
}

impl LinkIncrement {
    pub fn absolute(&self) -> f64 {
        self.without_link - self.with_link
    }

    /// Relative gain from dropping the link; `None` when the with-link rate is 0.
    pub fn relative(&self) -> Option<f64> {
        (self.with_link > 0.0).then(|| self.without_link / self.with_link - 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSummary {
    pub population: usize,
    pub seed_fractions: Vec<f64>,
    /// Per-network traces, indexed by network replicate.
    pub traces: BTreeMap<TraceKey, Vec<Vec<StepCounts>>>,
    pub peak_rates: Vec<PeakRate>,
    pub increments: Vec<LinkIncrement>,
}

impl DiffusionSummary {
    pub fn peak_rate(&self, key: TraceKey, step_hours: u32) -> Option<&PeakRate> {
        self.peak_rates
            .iter()
            .find(|p| p.key == key && p.step_hours == step_hours)
    }
}

/// Cascade every (condition, model, k, seed fraction) cell on each network
/// replicate. All cells on one replicate share the network, and the two link
/// conditions share assignment and cascade seeds, so comparisons between
/// cells are paired.
pub fn run_diffusion(cfg: &ExperimentConfig) -> Result<DiffusionSummary> {
    let d = cfg.diffusion()?;
    let conditions = d.conditions();
    let mut sets: BTreeMap<(LinkCondition, ModelKind), ProfileSet> = BTreeMap::new();
    for &c in &conditions {
        for &m in &d.models {
            sets.insert((c, m), build_profile_set(cfg, m, c)?);
        }
    }

    let per_network: Vec<Vec<(TraceKey, Vec<StepCounts>)>> = (0..d.n_networks)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let net = generate_scale_free(d.nodes, d.attachments, seed::derive(cfg.seed, "network", &[r as u64]))?;
            let mut out = Vec::new();
            for (&(condition, model), set) in &sets {
                let assignment = assign_profiles(&net, set, seed::derive(cfg.seed, "assign", &[r as u64, model as u64]));
                for &k in &d.k {
                    for (fi, &fraction) in d.seed_fractions.iter().enumerate() {
                        let pc = PropagationConfig {
                            model,
                            k,
                            seed_fraction: fraction,
                            max_steps: d.max_steps,
                            rng_seed: seed::derive(cfg.seed, "cascade", &[r as u64, model as u64, k as u64, fi as u64]),
                        };
                        let trace = run_cascade(&net, &assignment, &pc)?;
                        let key = TraceKey { condition, model, k, fraction: fi };
                        out.push((key, trace.steps));
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut traces: BTreeMap<TraceKey, Vec<Vec<StepCounts>>> = BTreeMap::new();
    for network in per_network {
        for (key, steps) in network {
            traces.entry(key).or_default().push(steps);
        }
    }

    let mut peak_rates = Vec::new();
    for (key, runs) in &traces {
        for &h in &d.step_hours {
            let rates: Vec<f64> = runs
                .iter()
                .map(|t| follow_through_rate_at_peak(t, h, d.lead_hours, d.nodes))
                .collect::<Result<_>>()?;
            peak_rates.push(PeakRate {
                key: *key,
                seed_fraction: d.seed_fractions[key.fraction],
                step_hours: h,
                peak_step: peak_step(h, d.lead_hours)?,
                mean: rates.iter().sum::<f64>() / rates.len() as f64,
                min: rates.iter().copied().fold(f64::INFINITY, f64::min),
                max: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }

    let mut increments = Vec::new();
    for p in peak_rates.iter().filter(|p| p.key.condition == LinkCondition::WithoutLink) {
        let linked = TraceKey { condition: LinkCondition::WithLink, ..p.key };
        if let Some(q) = peak_rates.iter().find(|q| q.key == linked && q.step_hours == p.step_hours) {
            increments.push(LinkIncrement {
                model: p.key.model,
                k: p.key.k,
                seed_fraction: p.seed_fraction,
                step_hours: p.step_hours,
                without_link: p.mean,
                with_link: q.mean,
            });
        }
    }

    Ok(DiffusionSummary {
        population: d.nodes,
        seed_fractions: d.seed_fractions.clone(),
        traces,
        peak_rates,
        increments,
    })
}

pub const TRACE_HEADER: [&str; 7] = ["model", "k", "trial", "step", "cum_recipients", "cum_forwarders", "cum_followers"];
pub const MEAN_TRACE_HEADER: [&str; 7] = ["condition", "model", "k", "seed_fraction", "step", "mean_recipients_frac", "mean_followers_frac"];
pub const PEAK_HEADER: [&str; 9] = ["condition", "model", "k", "seed_fraction", "step_hours", "peak_step", "mean_follow_rate", "min_follow_rate", "max_follow_rate"];
pub const INCREMENT_HEADER: [&str; 8] = ["model", "k", "seed_fraction", "step_hours", "rate_without_link", "rate_with_link", "absolute_increment", "relative_increment"];

pub fn trace_file_name(condition: LinkCondition, seed_fraction: f64) -> String {
    format!("traces_{}_sf{}.csv", condition, fmt_rate(seed_fraction))
}

impl DiffusionSummary {
    /// Write trace, mean-trace, peak-rate and (when both link conditions ran)
    /// increment tables into `out`, then re-validate them.
    pub fn write(&self, out: &Path, write_traces: bool) -> Result<Vec<std::path::PathBuf>> {
        let mut written = Vec::new();

        if write_traces {
            let mut files: BTreeMap<(LinkCondition, usize), CsvOut> = BTreeMap::new();
            for (key, runs) in &self.traces {
                let name = trace_file_name(key.condition, self.seed_fractions[key.fraction]);
                let w = match files.entry((key.condition, key.fraction)) {
                    std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::btree_map::Entry::Vacant(e) => e.insert(CsvOut::create(&out.join(name), &TRACE_HEADER)?),
                };
                for (trial, steps) in runs.iter().enumerate() {
                    for (step, c) in steps.iter().enumerate() {
                        w.row([
                            key.model.to_string(),
                            key.k.to_string(),
                            trial.to_string(),
                            step.to_string(),
                            c.recipients.to_string(),
                            c.forwarders.to_string(),
                            c.followers.to_string(),
                        ])?;
                    }
                }
            }
            for (_, w) in files {
                let path = w.finish()?;
                output::validate_trace_csv(&path)?;
                written.push(path);
            }
        }

        let n = self.population as f64;
        let mut mean = CsvOut::create(&out.join("mean_traces.csv"), &MEAN_TRACE_HEADER)?;
        for (key, runs) in &self.traces {
            let m = mean_trace(runs)?;
            for step in 0..m.len() {
                mean.row([
                    key.condition.to_string(),
                    key.model.to_string(),
                    key.k.to_string(),
                    fmt_rate(self.seed_fractions[key.fraction]),
                    step.to_string(),
                    fmt_rate(m.recipients[step] / n),
                    fmt_rate(m.followers[step] / n),
                ])?;
            }
        }
        written.push(mean.finish()?);

        let mut peaks = CsvOut::create(&out.join("peak_rates.csv"), &PEAK_HEADER)?;
        for p in &self.peak_rates {
            peaks.row([
                p.key.condition.to_string(),
                p.key.model.to_string(),
                p.key.k.to_string(),
                fmt_rate(p.seed_fraction),
                p.step_hours.to_string(),
                p.peak_step.to_string(),
                fmt_rate(p.mean),
                fmt_rate(p.min),
                fmt_rate(p.max),
            ])?;
        }
        let path = peaks.finish()?;
        output::validate_rate_columns(&path, &["mean_follow_rate", "min_follow_rate", "max_follow_rate"])?;
        written.push(path);

        if !self.increments.is_empty() {
            let mut inc = CsvOut::create(&out.join("link_increment.csv"), &INCREMENT_HEADER)?;
            for i in &self.increments {
                inc.row([
                    i.model.to_string(),
                    i.k.to_string(),
                    fmt_rate(i.seed_fraction),
                    i.step_hours.to_string(),
                    fmt_rate(i.without_link),
                    fmt_rate(i.with_link),
                    fmt_rate(i.absolute()),
                    i.relative().map(fmt_rate).unwrap_or_default(),
                ])?;
            }
            written.push(inc.finish()?);
        }
        Ok(written)
    }
}
