//! Experiment configuration.
//!
//! The config is a TOML file: flat `key = value` pairs grouped in
//! `[diffusion]`, `[grid]` and `[load]` sections, `#` comments allowed.
//! Relative paths inside it resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{TreeConstraints, DEFAULT_MAX_CHILDREN};
use crate::histogram::Histogram;
use crate::influence::DEFAULT_MAX_STEPS;
use crate::load::LoadConfig;
use crate::power::TripMode;
use crate::profiles::{
    load_profiles, synthesize_profiles, LinkCondition, ModelKind, ProfileDistribution, ProfileSet,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    pub diffusion: Option<DiffusionConfig>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub load: LoadConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, dir).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if let Some(d) = &self.diffusion {
            d.validate()?;
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        self.load.validate().map_err(|e| Error::Config(format!("[load] {e}")))
    }

    pub fn diffusion(&self) -> Result<&DiffusionConfig> {
        self.diffusion
            .as_ref()
            .ok_or_else(|| Error::Config("missing [diffusion] section".into()))
    }

    pub fn grid(&self) -> Result<&GridConfig> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::Config("missing [grid] section".into()))
    }
}

/// Where a profile set comes from. A bare string is a keyword
/// (`"synthetic"`, `"all-zero"`, `"all-one"`) or else a CSV path; a table
/// `{ synthetic = { ... } }` overrides individual histograms of the
/// illustrative synthetic distribution.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(String),
    Synthetic { synthetic: SyntheticOverrides },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticOverrides {
    pub follow_stranger: Option<Histogram>,
    pub forward_stranger: Option<Histogram>,
    pub follow_friend: Option<Histogram>,
    pub forward_friend: Option<Histogram>,
    pub threshold_follow: Option<Histogram>,
    pub threshold_forward: Option<Histogram>,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Named("synthetic".into())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    pub models: Vec<ModelKind>,
    pub k: Vec<usize>,
    pub seed_fractions: Vec<f64>,
    pub step_hours: Vec<u32>,
    pub lead_hours: u32,
    pub n_networks: usize,
    pub nodes: usize,
    pub attachments: usize,
    pub max_steps: usize,
    /// Size of each synthesized profile set.
    pub profile_count: usize,
    pub shared_lt_threshold: bool,
    pub ic_profiles: ProfileSpec,
    pub lt_profiles: ProfileSpec,
    pub ic_profiles_with_link: Option<ProfileSpec>,
    pub lt_profiles_with_link: Option<ProfileSpec>,
    /// Write the per-trial trace CSVs (large at full scale).
    pub write_traces: bool,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            models: vec![ModelKind::IndependentCascade, ModelKind::LinearThreshold],
            k: vec![1, 2, 3],
            seed_fractions: vec![0.2],
            step_hours: vec![1, 2, 3],
            lead_hours: 6,
            n_networks: 100,
            nodes: 1_000_000,
            attachments: 5,
            max_steps: DEFAULT_MAX_STEPS,
            profile_count: 5124,
            shared_lt_threshold: false,
            ic_profiles: ProfileSpec::default(),
            lt_profiles: ProfileSpec::default(),
            ic_profiles_with_link: None,
            lt_profiles_with_link: None,
            write_traces: true,
        }
    }
}

impl DiffusionConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("[diffusion] {m}")));
        if self.models.is_empty() || self.k.is_empty() || self.seed_fractions.is_empty() || self.step_hours.is_empty() {
            return bad("models, k, seed_fractions and step_hours must be non-empty".into());
        }
        if self.k.contains(&0) {
            return bad("k values must be at least 1".into());
        }
        if let Some(f) = self.seed_fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return bad(format!("seed fraction {f} outside [0, 1]"));
        }
        if self.step_hours.contains(&0) {
            return bad("step durations must be positive".into());
        }
        if self.n_networks < 1 {
            return bad("n_networks must be at least 1".into());
        }
        if self.attachments < 1 || self.nodes <= self.attachments {
            return bad("need nodes > attachments >= 1".into());
        }
        if self.max_steps < 1 || self.profile_count < 1 {
            return bad("max_steps and profile_count must be positive".into());
        }
        Ok(())
    }

    pub fn profile_spec(&self, model: ModelKind, condition: LinkCondition) -> Option<&ProfileSpec> {
        match (model, condition) {
            (ModelKind::IndependentCascade, LinkCondition::WithoutLink) => Some(&self.ic_profiles),
            (ModelKind::LinearThreshold, LinkCondition::WithoutLink) => Some(&self.lt_profiles),
            (ModelKind::IndependentCascade, LinkCondition::WithLink) => self.ic_profiles_with_link.as_ref(),
            (ModelKind::LinearThreshold, LinkCondition::WithLink) => self.lt_profiles_with_link.as_ref(),
        }
    }

    /// Conditions with a profile source for every configured model.
    pub fn conditions(&self) -> Vec<LinkCondition> {
        let mut out = vec![LinkCondition::WithoutLink];
        if self
            .models
            .iter()
            .all(|&m| self.profile_spec(m, LinkCondition::WithLink).is_some())
        {
            out.push(LinkCondition::WithLink);
        }
        out
    }
}

/// Materialize the profile set for a model and link condition.
pub fn build_profile_set(
    cfg: &ExperimentConfig,
    model: ModelKind,
    condition: LinkCondition,
) -> Result<ProfileSet> {
    let d = cfg.diffusion()?;
    let spec = d.profile_spec(model, condition).ok_or_else(|| {
        Error::Config(format!("no {model} profile source for condition {condition}"))
    })?;
    let synth_seed = seed::derive(cfg.seed, "profiles", &[model as u64, condition as u64]);
    let set = match spec {
        ProfileSpec::Named(name) => match name.as_str() {
            "synthetic" => synthesize_profiles(
                d.profile_count,
                &ProfileDistribution::illustrative(model, condition),
                synth_seed,
            )?,
            "all-zero" => synthesize_profiles(1, &degenerate(model, condition, 0), synth_seed)?,
            "all-one" => synthesize_profiles(1, &degenerate(model, condition, 10), synth_seed)?,
            path => {
                let path = cfg.resolve(Path::new(path));
                let set = load_profiles(&path)?;
                if set.model() != model {
                    return Err(Error::Config(format!(
                        "{} holds {} profiles, expected {model}",
                        path.display(),
                        set.model()
                    )));
                }
                set
            }
        },
        ProfileSpec::Synthetic { synthetic } => {
            let mut dist = ProfileDistribution::illustrative(model, condition);
            let o = synthetic.clone();
            let fields = [
                (o.follow_stranger, &mut dist.follow_stranger),
                (o.forward_stranger, &mut dist.forward_stranger),
                (o.follow_friend, &mut dist.follow_friend),
                (o.forward_friend, &mut dist.forward_friend),
                (o.threshold_follow, &mut dist.threshold_follow),
                (o.threshold_forward, &mut dist.threshold_forward),
            ];
            for (over, slot) in fields {
                if let Some(h) = over {
                    *slot = h;
                }
            }
            synthesize_profiles(d.profile_count, &dist, synth_seed)?
        }
    };
    Ok(if d.shared_lt_threshold {
        set.with_shared_threshold()
    } else {
        set
    })
}

/// Point mass at Likert `x`; LT thresholds of 1 for "all-one", unreachable
/// ones for "all-zero".
fn degenerate(model: ModelKind, condition: LinkCondition, x: u8) -> ProfileDistribution {
    let threshold = if x == 0 { 1_000 } else { 1 };
    let mut d = ProfileDistribution::point_mass(model, x, threshold);
    d.condition = condition;
    d
}

/// A list of rates, given explicitly or as an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RateList {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl RateList {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            RateList::Values(v) => v.clone(),
            RateList::Range { start, stop, step } => {
                if step.is_nan() || *step <= 0.0 || stop < start {
                    return Err(Error::Config(format!(
                        "bad rate range {start}..={stop} step {step}"
                    )));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n)
                    .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                    .collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config("empty rate list".into()));
        }
        if let Some(r) = v.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("rate {r} outside [0, 1]")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Geometry JSON; when absent a synthetic city is generated.
    pub geometry: Option<PathBuf>,
    pub buildings: usize,
    pub substations: usize,
    pub extent_m: f64,
    pub fan_out_cap: bool,
    pub max_children: usize,
    /// Bin `i` is a household of `i + 1` people.
    pub occupancy: Histogram,
    pub ev_rates: RateList,
    pub follow_rates: RateList,
    /// EV adoption the grid was upgraded for; absent means "exactly the
    /// simulated EV rate".
    pub supported_ev_rate: Option<f64>,
    pub headroom: f64,
    pub n_trials: usize,
    pub trip_mode: TripMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            geometry: None,
            buildings: 5000,
            substations: 9,
            extent_m: 8000.0,
            fan_out_cap: true,
            max_children: DEFAULT_MAX_CHILDREN,
            occupancy: Histogram::new(vec![0.3, 0.35, 0.16, 0.13, 0.06]).expect("default occupancy"),
            ev_rates: RateList::Range { start: 0.0, stop: 1.0, step: 0.05 },
            follow_rates: RateList::Range { start: 0.0, stop: 1.0, step: 0.01 },
            supported_ev_rate: None,
            headroom: 0.1,
            n_trials: 100,
            trip_mode: TripMode::Simultaneous,
        }
    }
}

impl GridConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("[grid] {m}")));
        if self.geometry.is_none() && (self.buildings < 1 || self.substations < 1) {
            return bad("need at least one building and one substation".into());
        }
        if !(self.extent_m.is_finite() && self.extent_m > 0.0) {
            return bad(format!("extent_m {} must be positive", self.extent_m));
        }
        if self.n_trials < 1 {
            return bad("n_trials must be at least 1".into());
        }
        if !(self.headroom.is_finite() && self.headroom >= 0.0) {
            return bad(format!("headroom {} must be non-negative", self.headroom));
        }
        if let Some(s) = self.supported_ev_rate {
            if !(0.0..=1.0).contains(&s) {
                return bad(format!("supported_ev_rate {s} outside [0, 1]"));
            }
        }
        self.ev_rates.values().map_err(|e| e.context("[grid] ev_rates"))?;
        self.follow_rates.values().map_err(|e| e.context("[grid] follow_rates"))?;
        Ok(())
    }

    pub fn constraints(&self) -> TreeConstraints {
        TreeConstraints {
            max_children: self.fan_out_cap.then_some(self.max_children),
        }
    }
}
