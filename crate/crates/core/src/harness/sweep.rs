use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{build_grid, calibrate_capacities, generate_synthetic_city, CityModel, FeederTree, Grid};
use crate::load::{LoadConfig, LoadProfile, Population, Resident, PEAK_HOURS};
use crate::power::{baseline_peak_flows, simulate_attack_hour, write_line_status, FlowState, TripMode};
use crate::seed;

use super::config::{ExperimentConfig, GridConfig};
use super::output::{self, fmt_rate, CsvOut};

/// City from the configured geometry file, or a synthetic one.
pub fn load_city(cfg: &ExperimentConfig) -> Result<CityModel> {
    let g = cfg.grid()?;
    match &g.geometry {
        Some(p) => CityModel::read_json(&cfg.resolve(p)),
        None => generate_synthetic_city(g.buildings, g.substations, g.extent_m, seed::derive(cfg.seed, "city", &[])),
    }
}

pub fn load_grid(cfg: &ExperimentConfig) -> Result<Grid> {
    build_grid(&load_city(cfg)?, &cfg.grid()?.constraints())
}

/// Demand of every building under each of the four (EV, follows-through)
/// combinations, for one trial's population.
struct TrialLoads {
    pop: Population,
    /// Indexed by `2 * has_ev + follows_through`.
    variants: [Vec<LoadProfile>; 4],
}

impl TrialLoads {
    fn new(grid: &Grid, occupancy: &crate::histogram::Histogram, load: &LoadConfig, seed: u64) -> Result<Self> {
        let ids: Vec<u64> = grid.buildings().map(|b| b.id).collect();
        let pop = Population::sample(&ids, occupancy, seed);
        let base = pop.base_profiles(load);
        let variant = |ev: f64, f: f64| -> Result<Vec<LoadProfile>> { Ok(pop.demand(&pop.residents(ev, f)?, &base, load)) };
        let variants = [variant(0.0, 0.0)?, variant(0.0, 1.0)?, variant(1.0, 0.0)?, variant(1.0, 1.0)?];
        Ok(TrialLoads { pop, variants })
    }

    fn profile(&self, i: usize, r: &Resident) -> &LoadProfile {
        &self.variants[2 * r.has_ev as usize + r.follows_through as usize][i]
    }

    fn demand(&self, residents: &[Resident]) -> Vec<LoadProfile> {
        residents.iter().enumerate().map(|(i, r)| *self.profile(i, r)).collect()
    }

    /// Feeders with capacities sized for an attack-free day at `supported` EV
    /// adoption.
    fn calibrate(&self, grid: &Grid, supported: f64, headroom: f64) -> Result<Vec<FeederTree>> {
        let residents = self.pop.residents(supported, 0.0)?;
        let demand = self.demand(&residents);
        grid.feeders
            .iter()
            .enumerate()
            .map(|(f, tree)| {
                let r = grid.building_range(f);
                let base = baseline_peak_flows(tree, &residents[r.clone()], &demand[r])?;
                calibrate_capacities(tree, &base, headroom)
            })
            .collect()
    }

    fn attack(&self, grid: &Grid, feeders: &[FeederTree], residents: &[Resident], mode: TripMode) -> Result<Vec<FlowState>> {
        feeders
            .iter()
            .enumerate()
            .map(|(f, tree)| {
                let range = grid.building_range(f);
                let mut state: Option<FlowState> = None;
                for &h in &PEAK_HOURS {
                    let loads: Vec<f64> = range.clone().map(|i| self.profile(i, &residents[i]).hourly_kw[h]).collect();
                    state = Some(simulate_attack_hour(tree, &loads, state.as_ref(), mode)?);
                }
                Ok(state.expect("non-empty window"))
            })
            .collect()
    }
}

fn supported_rate(g: &GridConfig, ev_rate: f64) -> f64 {
    g.supported_ev_rate.unwrap_or(ev_rate)
}

fn blackout(states: &[FlowState], total: usize) -> f64 {
    states.iter().map(FlowState::disconnected_count).sum::<usize>() as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub follow_rates: Vec<f64>,
    pub ev_rates: Vec<f64>,
    pub supported_ev_rates: Vec<f64>,
    /// `blackout[trial][ev][follow]`.
    pub blackout: Vec<Vec<Vec<f64>>>,
}

impl SweepResult {
    pub fn trials(&self) -> usize {
        self.blackout.len()
    }

    pub fn mean(&self, ev: usize, follow: usize) -> f64 {
        self.blackout.iter().map(|t| t[ev][follow]).sum::<f64>() / self.trials() as f64
    }

    pub fn range(&self, ev: usize, follow: usize) -> (f64, f64) {
        self.blackout
            .iter()
            .map(|t| t[ev][follow])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Smallest follow rate whose mean blackout reaches `level`.
    pub fn threshold_rate(&self, ev: usize, level: f64) -> Option<f64> {
        (0..self.follow_rates.len())
            .find(|&f| self.mean(ev, f) >= level)
            .map(|f| self.follow_rates[f])
    }
}

/// Blackout fraction for every trial, EV rate and follow-through rate. Each
/// trial samples one population, so EV owners and followers are nested as
/// the rates grow, and recalibrates capacities per EV rate.
pub fn run_sweep_with(cfg: &ExperimentConfig, grid: &Grid, follow_rates: &[f64], ev_rates: &[f64]) -> Result<SweepResult> {
    let g = cfg.grid()?;
    if grid.building_count() == 0 {
        return Err(Error::Geometry("grid has no buildings".into()));
    }
    let total = grid.building_count();
    let blackout = (0..g.n_trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<Vec<f64>>> {
            let loads = TrialLoads::new(grid, &g.occupancy, &cfg.load, seed::derive(cfg.seed, "population", &[t as u64]))?;
            ev_rates
                .iter()
                .map(|&ev| {
                    let feeders = loads.calibrate(grid, supported_rate(g, ev), g.headroom)?;
                    follow_rates
                        .iter()
                        .map(|&f| {
                            let residents = loads.pop.residents(ev, f)?;
                            let states = loads.attack(grid, &feeders, &residents, g.trip_mode)?;
                            Ok(blackout(&states, total))
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        follow_rates: follow_rates.to_vec(),
        ev_rates: ev_rates.to_vec(),
        supported_ev_rates: ev_rates.iter().map(|&e| supported_rate(g, e)).collect(),
        blackout,
    })
}

pub fn run_sweep(cfg: &ExperimentConfig, grid: &Grid) -> Result<SweepResult> {
    let g = cfg.grid()?;
    run_sweep_with(cfg, grid, &g.follow_rates.values()?, &g.ev_rates.values()?)
}

/// Line states of one sweep cell, reproducing the sweep's seeds.
pub fn attack_states(cfg: &ExperimentConfig, grid: &Grid, follow_rate: f64, ev_rate: f64, trial: usize) -> Result<Vec<FlowState>> {
    let g = cfg.grid()?;
    let loads = TrialLoads::new(grid, &g.occupancy, &cfg.load, seed::derive(cfg.seed, "population", &[trial as u64]))?;
    let feeders = loads.calibrate(grid, supported_rate(g, ev_rate), g.headroom)?;
    let residents = loads.pop.residents(ev_rate, follow_rate)?;
    loads.attack(grid, &feeders, &residents, g.trip_mode)
}

pub fn export_line_status(cfg: &ExperimentConfig, follow_rate: f64, ev_rate: f64, trial: usize, path: &Path) -> Result<()> {
    let grid = load_grid(cfg)?;
    let states = attack_states(cfg, &grid, follow_rate, ev_rate, trial)?;
    write_line_status(&grid, &states, path)
}

/// Feeder table with capacities from trial 0 at the first EV rate's
/// supported adoption level.
pub fn calibrated_grid(cfg: &ExperimentConfig, grid: &Grid) -> Result<Grid> {
    let g = cfg.grid()?;
    let ev = g.ev_rates.values()?[0];
    let loads = TrialLoads::new(grid, &g.occupancy, &cfg.load, seed::derive(cfg.seed, "population", &[0]))?;
    Ok(Grid::new(loads.calibrate(grid, supported_rate(g, ev), g.headroom)?))
}

pub const SWEEP_HEADER: [&str; 5] = ["follow_rate", "ev_rate", "supported_ev_rate", "trial", "blackout_fraction"];
pub const HEATMAP_HEADER: [&str; 5] = ["follow_rate", "ev_rate", "mean_blackout_fraction", "min_blackout_fraction", "max_blackout_fraction"];

impl SweepResult {
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let mut sweep = CsvOut::create(&out.join("sweep.csv"), &SWEEP_HEADER)?;
        for (e, ev) in self.ev_rates.iter().enumerate() {
            for (f, fr) in self.follow_rates.iter().enumerate() {
                for (t, trial) in self.blackout.iter().enumerate() {
                    sweep.row([
                        fmt_rate(*fr),
                        fmt_rate(*ev),
                        fmt_rate(self.supported_ev_rates[e]),
                        t.to_string(),
                        fmt_rate(trial[e][f]),
                    ])?;
                }
            }
        }
        let sweep = sweep.finish()?;
        output::validate_rate_columns(&sweep, &["follow_rate", "ev_rate", "supported_ev_rate", "blackout_fraction"])?;

        let mut heat = CsvOut::create(&out.join("heatmap.csv"), &HEATMAP_HEADER)?;
        for (e, ev) in self.ev_rates.iter().enumerate() {
            for (f, fr) in self.follow_rates.iter().enumerate() {
                let (lo, hi) = self.range(e, f);
                heat.row([fmt_rate(*fr), fmt_rate(*ev), fmt_rate(self.mean(e, f)), fmt_rate(lo), fmt_rate(hi)])?;
            }
        }
        let heat = heat.finish()?;
        output::validate_rate_columns(&heat, &["follow_rate", "ev_rate", "mean_blackout_fraction"])?;
        Ok(vec![sweep, heat])
    }
}
