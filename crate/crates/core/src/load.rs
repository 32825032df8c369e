//! Hourly residential demand.
//!
//! A household's day is a fixed 24-hour shape scaled to a daily energy that
//! grows with occupancy, with optional per-hour multiplicative jitter. EVs
//! charge a fixed daily energy in an overnight off-peak block. Residents who
//! follow through on the fake discount move their EV charging into the
//! 20:00-22:00 window at full charger power and shift a deferrable share of
//! their other consumption into the same window.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::histogram::Histogram;
use crate::seed;

pub const HOURS: usize = 24;
/// Discount window 20:00-22:00 as hour slots.
pub const PEAK_HOURS: [usize; 2] = [20, 21];

pub fn is_peak_hour(h: usize) -> bool {
    PEAK_HOURS.contains(&h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadProfile {
    /// Average kW in each hour, hour 0 = midnight to 01:00.
    pub hourly_kw: [f64; HOURS],
}

impl LoadProfile {
    pub const ZERO: LoadProfile = LoadProfile { hourly_kw: [0.0; HOURS] };

    pub fn flat(kw: f64) -> Self {
        LoadProfile { hourly_kw: [kw; HOURS] }
    }

    pub fn daily_kwh(&self) -> f64 {
        self.hourly_kw.iter().sum()
    }

    pub fn peak_window_kw(&self) -> f64 {
        PEAK_HOURS.iter().map(|&h| self.hourly_kw[h]).sum()
    }

    fn add(&mut self, other: &LoadProfile) {
        for (a, b) in self.hourly_kw.iter_mut().zip(&other.hourly_kw) {
            *a += b;
        }
    }
}

/// Typical domestic day: low overnight, a breakfast bump and a larger
/// 17:00-20:00 evening peak. Fractions of daily energy.
pub const DEFAULT_TEMPLATE: [f64; HOURS] = [
    0.030, 0.025, 0.022, 0.021, 0.021, 0.023, 0.032, 0.046, 0.050, 0.045, 0.041, 0.040,
    0.042, 0.040, 0.038, 0.039, 0.045, 0.060, 0.070, 0.068, 0.060, 0.052, 0.045, 0.035,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    /// Relative hourly shape; normalised to unit sum before use.
    pub template: Vec<f64>,
    pub base_kwh_per_day: f64,
    pub kwh_per_person: f64,
    /// Each hour is scaled by `1 + jitter * u`, `u ~ U(-1, 1)`.
    pub jitter: f64,
    pub ev_daily_kwh: f64,
    /// EV daily energy is scaled by `1 + ev_energy_jitter * u`.
    pub ev_energy_jitter: f64,
    pub charger_kw: f64,
    /// Off-peak charging hours `offpeak_start..offpeak_end`.
    pub offpeak_start: usize,
    pub offpeak_end: usize,
    /// Share of non-peak household load a follower moves into the window.
    pub deferrable_fraction: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            template: DEFAULT_TEMPLATE.to_vec(),
            base_kwh_per_day: 4.0,
            kwh_per_person: 2.0,
            jitter: 0.2,
            ev_daily_kwh: 14.0,
            ev_energy_jitter: 0.0,
            charger_kw: 7.0,
            offpeak_start: 1,
            offpeak_end: 5,
            deferrable_fraction: 0.3,
        }
    }
}

impl LoadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.template.len() != HOURS {
            return Err(invalid(format!("load template needs {HOURS} values")));
        }
        if self.template.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.template.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("load template must be non-negative with positive sum"));
        }
        for (name, v) in [
            ("base_kwh_per_day", self.base_kwh_per_day),
            ("kwh_per_person", self.kwh_per_person),
            ("ev_daily_kwh", self.ev_daily_kwh),
            ("charger_kw", self.charger_kw),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} = {v} must be non-negative")));
            }
        }
        for (name, v) in [("jitter", self.jitter), ("ev_energy_jitter", self.ev_energy_jitter), ("deferrable_fraction", self.deferrable_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.offpeak_start < self.offpeak_end && self.offpeak_end <= HOURS)
            || (self.offpeak_start..self.offpeak_end).any(is_peak_hour)
        {
            return Err(invalid("off-peak window must be a non-empty range of non-peak hours"));
        }
        Ok(())
    }

    pub fn daily_kwh_for(&self, occupancy: u32) -> f64 {
        self.base_kwh_per_day + self.kwh_per_person * f64::from(occupancy)
    }

    /// Template scaled to the occupancy's daily energy, before jitter.
    pub fn template_profile(&self, occupancy: u32) -> LoadProfile {
        let total: f64 = self.template.iter().sum();
        let daily = self.daily_kwh_for(occupancy);
        let mut p = LoadProfile::ZERO;
        for (h, w) in self.template.iter().enumerate() {
            p.hourly_kw[h] = w / total * daily;
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resident {
    pub building_id: u64,
    pub occupancy: u32,
    pub has_ev: bool,
    pub follows_through: bool,
}

pub fn base_profile(occupancy: u32, seed: u64, cfg: &LoadConfig) -> Result<LoadProfile> {
    if occupancy < 1 {
        return Err(invalid("occupancy must be at least 1"));
    }
    let mut p = cfg.template_profile(occupancy);
    if cfg.jitter > 0.0 {
        let mut rng = seed::rng(seed);
        for v in &mut p.hourly_kw {
            *v *= 1.0 + cfg.jitter * rng.gen_range(-1.0..=1.0);
        }
    }
    Ok(p)
}

pub fn ev_charging_profile(follows_through: bool, seed: u64, cfg: &LoadConfig) -> LoadProfile {
    let mut energy = cfg.ev_daily_kwh;
    if cfg.ev_energy_jitter > 0.0 {
        let mut rng = seed::rng(seed);
        energy *= 1.0 + cfg.ev_energy_jitter * rng.gen_range(-1.0..=1.0);
    }
    let mut p = LoadProfile::ZERO;
    if follows_through {
        for &h in &PEAK_HOURS {
            let e = energy.min(cfg.charger_kw);
            p.hourly_kw[h] = e;
            energy -= e;
        }
    }
    // Whatever does not fit in the window stays in the off-peak block.
    if energy > 0.0 {
        let hours = cfg.offpeak_end - cfg.offpeak_start;
        for h in cfg.offpeak_start..cfg.offpeak_end {
            p.hourly_kw[h] += energy / hours as f64;
        }
    }
    p
}

/// Move `deferrable_fraction` of every non-peak hour into the peak window,
/// split evenly across its hours.
pub fn household_attack_shift(profile: &LoadProfile, deferrable_fraction: f64) -> Result<LoadProfile> {
    if !(0.0..=1.0).contains(&deferrable_fraction) {
        return Err(invalid(format!("deferrable fraction {deferrable_fraction} outside [0, 1]")));
    }
    let mut out = *profile;
    let mut moved = 0.0;
    for (h, v) in out.hourly_kw.iter_mut().enumerate() {
        if !is_peak_hour(h) {
            let d = *v * deferrable_fraction;
            *v -= d;
            moved += d;
        }
    }
    for &h in &PEAK_HOURS {
        out.hourly_kw[h] += moved / PEAK_HOURS.len() as f64;
    }
    Ok(out)
}

/// Independent per-building draws shared across every EV / follow-through
/// rate in a trial. A resident owns an EV when its EV draw falls below the
/// adoption rate, so owners at a lower rate are always a subset of owners at
/// a higher rate (likewise for followers).
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub building_ids: Vec<u64>,
    pub occupancy: Vec<u32>,
    ev_draw: Vec<f64>,
    follow_draw: Vec<f64>,
    profile_seed: Vec<u64>,
}

impl Population {
    /// `occupancy` bin `i` is a household of `i + 1` people.
    pub fn sample(building_ids: &[u64], occupancy: &Histogram, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let occ = occupancy.sampler();
        let n = building_ids.len();
        let mut pop = Population {
            building_ids: building_ids.to_vec(),
            occupancy: Vec::with_capacity(n),
            ev_draw: Vec::with_capacity(n),
            follow_draw: Vec::with_capacity(n),
            profile_seed: Vec::with_capacity(n),
        };
        for _ in 0..n {
            pop.occupancy.push(occ.sample(&mut rng) as u32 + 1);
            pop.ev_draw.push(rng.gen());
            pop.follow_draw.push(rng.gen());
            pop.profile_seed.push(rng.gen());
        }
        pop
    }

    pub fn len(&self) -> usize {
        self.building_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.building_ids.is_empty()
    }

    pub fn residents(&self, ev_rate: f64, follow_rate: f64) -> Result<Vec<Resident>> {
        for (name, r) in [("EV rate", ev_rate), ("follow rate", follow_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(invalid(format!("{name} {r} outside [0, 1]")));
            }
        }
        Ok((0..self.len())
            .map(|i| Resident {
                building_id: self.building_ids[i],
                occupancy: self.occupancy[i],
                has_ev: self.ev_draw[i] < ev_rate,
                follows_through: self.follow_draw[i] < follow_rate,
            })
            .collect())
    }

    /// Unshifted household profiles, one per building.
    pub fn base_profiles(&self, cfg: &LoadConfig) -> Vec<LoadProfile> {
        (0..self.len())
            .map(|i| {
                base_profile(self.occupancy[i], seed::derive(self.profile_seed[i], "base", &[]), cfg)
                    .expect("occupancy >= 1 by construction")
            })
            .collect()
    }

    /// Full day demand for each resident, given the population's base
    /// profiles.
    pub fn demand(&self, residents: &[Resident], base: &[LoadProfile], cfg: &LoadConfig) -> Vec<LoadProfile> {
        residents
            .iter()
            .enumerate()
            .map(|(i, r)| {
                resident_profile(r, &base[i], seed::derive(self.profile_seed[i], "ev", &[]), cfg)
            })
            .collect()
    }
}

pub fn assign_residents(
    building_ids: &[u64],
    occupancy: &Histogram,
    ev_rate: f64,
    follow_rate: f64,
    seed: u64,
) -> Result<Vec<Resident>> {
    Population::sample(building_ids, occupancy, seed).residents(ev_rate, follow_rate)
}

/// Day profile of one resident: household load (shifted if following
/// through) plus EV charging if they own one.
pub fn resident_profile(r: &Resident, base: &LoadProfile, ev_seed: u64, cfg: &LoadConfig) -> LoadProfile {
    let mut p = if r.follows_through {
        household_attack_shift(base, cfg.deferrable_fraction).expect("validated fraction")
    } else {
        *base
    };
    if r.has_ev {
        p.add(&ev_charging_profile(r.follows_through, ev_seed, cfg));
    }
    p
}

/// `building_id,h0,...,h23`, one row per resident.
pub fn write_profiles_csv(residents: &[Resident], profiles: &[LoadProfile], path: &Path) -> Result<()> {
    if residents.len() != profiles.len() {
        return Err(invalid("residents and profiles differ in length"));
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["building_id".to_string()];
    header.extend((0..HOURS).map(|h| format!("h{h}")));
    w.write_record(&header)?;
    for (r, p) in residents.iter().zip(profiles) {
        let mut row = vec![r.building_id.to_string()];
        row.extend(p.hourly_kw.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
