//! Line flows, overload trips and blackout accounting on radial feeders.
//!
//! The flow on a line is the total load of the connected buildings below it.
//! A line whose flow exceeds its capacity trips, and every line and building
//! below a tripped line loses supply. Trips are permanent for the simulated
//! day, so later hours of the attack window start from the earlier outages.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{FeederTree, Grid};
use crate::load::{LoadProfile, Resident, HOURS, PEAK_HOURS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LineStatus {
    Active,
    Tripped,
    Deenergized,
}

impl LineStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LineStatus::Active => "active",
            LineStatus::Tripped => "tripped",
            LineStatus::Deenergized => "deenergized",
        }
    }
}

/// How overloads are resolved within one hour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripMode {
    /// Every overloaded line trips at once, judged against the flows with
    /// all currently connected load.
    #[default]
    Simultaneous,
    /// Only overloaded lines with no overloaded line below them trip; flows
    /// are recomputed and the check repeats. Shedding load low in the tree
    /// can save upstream lines.
    IterativeBottomUp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// kW per line; zero on lines without supply.
    pub flows: Vec<f64>,
    pub status: Vec<LineStatus>,
    /// Per building, indexed like [`FeederTree::buildings`].
    pub disconnected: Vec<bool>,
}

impl FlowState {
    pub fn disconnected_count(&self) -> usize {
        self.disconnected.iter().filter(|d| **d).count()
    }

    pub fn tripped_count(&self) -> usize {
        self.status.iter().filter(|s| **s == LineStatus::Tripped).count()
    }

    pub fn disconnected_buildings(&self, tree: &FeederTree) -> Vec<u64> {
        tree.buildings()
            .iter()
            .zip(&self.disconnected)
            .filter(|(_, d)| **d)
            .map(|(b, _)| b.id)
            .collect()
    }
}

fn check_loads(tree: &FeederTree, len: usize) -> Result<()> {
    if len != tree.buildings().len() {
        return Err(Error::Missing(format!(
            "loads given for {len} of {} buildings under substation {}",
            tree.buildings().len(),
            tree.root().id
        )));
    }
    Ok(())
}

/// Subtree sums in one bottom-up pass; lines with `energized[l] == false`
/// carry nothing.
fn subtree_flows(tree: &FeederTree, loads: &[f64], energized: Option<&[bool]>) -> Vec<f64> {
    let lines = tree.lines();
    let mut flows: Vec<f64> = lines.iter().map(|l| loads[l.child_building]).collect();
    for i in (0..lines.len()).rev() {
        if let Some(live) = energized {
            if !live[i] {
                flows[i] = 0.0;
                continue;
            }
        }
        if let Some(p) = lines[i].parent_line {
            flows[p] += flows[i];
        }
    }
    flows
}

/// Per-line flow for one hour of per-building loads (kW).
pub fn compute_flows(tree: &FeederTree, loads: &[f64]) -> Result<Vec<f64>> {
    check_loads(tree, loads.len())?;
    Ok(subtree_flows(tree, loads, None))
}

/// Largest hourly flow on each line over an attack-free day.
pub fn baseline_peak_flows(tree: &FeederTree, residents: &[Resident], demand: &[LoadProfile]) -> Result<Vec<f64>> {
    check_loads(tree, demand.len())?;
    if residents.len() != demand.len() {
        return Err(invalid("residents and demand profiles differ in length"));
    }
    if let Some(r) = residents.iter().find(|r| r.follows_through) {
        return Err(invalid(format!(
            "baseline must be attack-free but building {} follows through",
            r.building_id
        )));
    }
    let lines = tree.lines();
    let mut flows: Vec<[f64; HOURS]> = lines.iter().map(|l| demand[l.child_building].hourly_kw).collect();
    for i in (0..lines.len()).rev() {
        if let Some(p) = lines[i].parent_line {
            let child = flows[i];
            for (a, b) in flows[p].iter_mut().zip(child) {
                *a += b;
            }
        }
    }
    Ok(flows
        .iter()
        .map(|f| f.iter().copied().fold(0.0, f64::max))
        .collect())
}

/// Mark lines below a tripped line as de-energized and collect the
/// disconnected buildings.
fn settle(tree: &FeederTree, tripped: &[bool], loads: &[f64]) -> FlowState {
    let lines = tree.lines();
    let mut status = vec![LineStatus::Active; lines.len()];
    let mut live = vec![true; lines.len()];
    let mut disconnected = vec![false; tree.buildings().len()];
    for (i, l) in lines.iter().enumerate() {
        let upstream_live = l.parent_line.is_none_or(|p| live[p]);
        if !upstream_live {
            status[i] = LineStatus::Deenergized;
            live[i] = false;
        } else if tripped[i] {
            status[i] = LineStatus::Tripped;
            live[i] = false;
        }
        if !live[i] {
            disconnected[l.child_building] = true;
        }
    }
    let flows = subtree_flows(tree, loads, Some(&live));
    FlowState {
        flows,
        status,
        disconnected,
    }
}

/// Resolve one hour of load against the feeder's capacities. Lines already
/// tripped in `prior` stay tripped.
pub fn simulate_attack_hour(
    tree: &FeederTree,
    loads: &[f64],
    prior: Option<&FlowState>,
    mode: TripMode,
) -> Result<FlowState> {
    check_loads(tree, loads.len())?;
    let lines = tree.lines();
    let mut tripped: Vec<bool> = match prior {
        Some(s) => s.status.iter().map(|st| *st == LineStatus::Tripped).collect(),
        None => vec![false; lines.len()],
    };
    if tripped.len() != lines.len() {
        return Err(invalid("prior state belongs to a different feeder"));
    }

    let mut state = settle(tree, &tripped, loads);
    loop {
        let overloaded: Vec<bool> = (0..lines.len())
            .map(|i| state.status[i] == LineStatus::Active && state.flows[i] > lines[i].capacity_kw)
            .collect();
        if !overloaded.iter().any(|o| *o) {
            break;
        }
        match mode {
            TripMode::Simultaneous => {
                for (t, o) in tripped.iter_mut().zip(&overloaded) {
                    *t |= *o;
                }
                state = settle(tree, &tripped, loads);
                break;
            }
            TripMode::IterativeBottomUp => {
                let mut below = vec![false; lines.len()];
                for i in (0..lines.len()).rev() {
                    if overloaded[i] && !below[i] {
                        tripped[i] = true;
                    }
                    if let Some(p) = lines[i].parent_line {
                        below[p] |= below[i] || overloaded[i];
                    }
                }
                state = settle(tree, &tripped, loads);
            }
        }
    }
    Ok(state)
}

/// Run every hour of the discount window in order. A building counts as
/// blacked out if it lost supply in any of them.
pub fn simulate_attack_window(tree: &FeederTree, demand: &[LoadProfile], mode: TripMode) -> Result<FlowState> {
    check_loads(tree, demand.len())?;
    let mut state: Option<FlowState> = None;
    for &h in &PEAK_HOURS {
        let loads: Vec<f64> = demand.iter().map(|p| p.hourly_kw[h]).collect();
        state = Some(simulate_attack_hour(tree, &loads, state.as_ref(), mode)?);
    }
    Ok(state.expect("window has at least one hour"))
}

pub fn blackout_fraction(state: &FlowState, total_buildings: usize) -> Result<f64> {
    if total_buildings == 0 {
        return Err(invalid("blackout fraction over zero buildings"));
    }
    Ok(state.disconnected_count() as f64 / total_buildings as f64)
}

/// Blackout fraction across all feeders of a grid.
pub fn grid_blackout_fraction(states: &[FlowState], total_buildings: usize) -> Result<f64> {
    if total_buildings == 0 {
        return Err(invalid("blackout fraction over zero buildings"));
    }
    let down: usize = states.iter().map(FlowState::disconnected_count).sum();
    Ok(down as f64 / total_buildings as f64)
}

pub const LINE_STATUS_CSV_HEADER: [&str; 8] = ["line_id", "parent", "child", "x1", "y1", "x2", "y2", "status"];

/// Line-status table for map rendering; `states[f]` belongs to feeder `f`.
pub fn write_line_status(grid: &Grid, states: &[FlowState], path: &Path) -> Result<()> {
    if states.len() != grid.feeders.len() {
        return Err(invalid("one flow state per feeder required"));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(LINE_STATUS_CSV_HEADER)?;
    for (tree, state) in grid.feeders.iter().zip(states) {
        for (i, l) in tree.lines().iter().enumerate() {
            let (a, b) = tree.line_endpoints(i);
            w.write_record([
                l.id.to_string(),
                l.parent.to_string(),
                l.child.to_string(),
                format!("{:.3}", a.x),
                format!("{:.3}", a.y),
                format!("{:.3}", b.x),
                format!("{:.3}", b.y),
                state.status[i].as_str().to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
