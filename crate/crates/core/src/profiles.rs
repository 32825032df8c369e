//! Survey-derived behaviour parameters for the two influence models.
//!
//! Each participant answered on a 0-10 Likert scale; a response `x` is used
//! as the probability `x / 10`. Independent-cascade (IC) participants give a
//! follow and a forward likelihood for both a stranger and a friend sender.
//! Linear-threshold (LT) participants give stranger likelihoods plus the
//! number of distinct friends they must hear from before following and
//! before forwarding.
//!
//! The real survey responses are not bundled. [`ProfileDistribution`]
//! describes per-field histograms used to synthesize stand-in sets; the
//! shipped defaults are illustrative only.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::histogram::Histogram;
use crate::seed;
use crate::social_graph::SocialNetwork;

pub const LIKERT_MAX: u8 = 10;
pub const LIKERT_BINS: usize = LIKERT_MAX as usize + 1;

pub const CSV_HEADER: [&str; 9] = [
    "participant_id",
    "model",
    "condition",
    "follow_stranger",
    "forward_stranger",
    "follow_friend",
    "forward_friend",
    "threshold_follow",
    "threshold_forward",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "IC")]
    IndependentCascade,
    #[serde(rename = "LT")]
    LinearThreshold,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::IndependentCascade => "IC",
            ModelKind::LinearThreshold => "LT",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "IC" | "ic" => Ok(ModelKind::IndependentCascade),
            "LT" | "lt" => Ok(ModelKind::LinearThreshold),
            other => Err(invalid(format!("unknown model `{other}` (expected IC or LT)"))),
        }
    }
}

/// Whether the notification shown to the participant carried an external link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkCondition {
    WithoutLink,
    WithLink,
}

impl LinkCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkCondition::WithoutLink => "without_link",
            LinkCondition::WithLink => "with_link",
        }
    }
}

impl fmt::Display for LinkCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinkCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "without_link" => Ok(LinkCondition::WithoutLink),
            "with_link" => Ok(LinkCondition::WithLink),
            other => Err(invalid(format!(
                "unknown condition `{other}` (expected with_link or without_link)"
            ))),
        }
    }
}

/// Reaction to a notification forwarded by a friend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FriendResponse {
    /// IC: independent per-exposure probabilities.
    Probabilistic { follow: f64, forward: f64 },
    /// LT: distinct forwarding friends needed to follow / to forward.
    Threshold { follow: u32, forward: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorProfile {
    pub participant_id: String,
    pub condition: LinkCondition,
    pub follow_stranger: f64,
    pub forward_stranger: f64,
    pub friend: FriendResponse,
}

impl BehaviorProfile {
    pub fn ic(follow_stranger: f64, forward_stranger: f64, follow_friend: f64, forward_friend: f64) -> Self {
        BehaviorProfile {
            participant_id: String::new(),
            condition: LinkCondition::WithoutLink,
            follow_stranger,
            forward_stranger,
            friend: FriendResponse::Probabilistic {
                follow: follow_friend,
                forward: forward_friend,
            },
        }
    }

    pub fn lt(follow_stranger: f64, forward_stranger: f64, threshold_follow: u32, threshold_forward: u32) -> Self {
        BehaviorProfile {
            participant_id: String::new(),
            condition: LinkCondition::WithoutLink,
            follow_stranger,
            forward_stranger,
            friend: FriendResponse::Threshold {
                follow: threshold_follow,
                forward: threshold_forward,
            },
        }
    }

    pub fn model(&self) -> ModelKind {
        match self.friend {
            FriendResponse::Probabilistic { .. } => ModelKind::IndependentCascade,
            FriendResponse::Threshold { .. } => ModelKind::LinearThreshold,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut probs = vec![
            ("follow_stranger", self.follow_stranger),
            ("forward_stranger", self.forward_stranger),
        ];
        if let FriendResponse::Probabilistic { follow, forward } = self.friend {
            probs.push(("follow_friend", follow));
            probs.push(("forward_friend", forward));
        }
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!(
                    "profile `{}`: {name} = {p} is not a probability",
                    self.participant_id
                )));
            }
        }
        Ok(())
    }
}

pub fn likert_to_probability(x: u8) -> Result<f64> {
    if x > LIKERT_MAX {
        return Err(invalid(format!("Likert response {x} outside 0..=10")));
    }
    Ok(f64::from(x) / 10.0)
}

/// Inverse of [`likert_to_probability`]; `None` unless `p` is exactly `x/10`.
pub fn probability_to_likert(p: f64) -> Option<u8> {
    let x = (p * 10.0).round();
    if !(0.0..=10.0).contains(&x) {
        return None;
    }
    let x = x as u8;
    (likert_to_probability(x).ok()? == p).then_some(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    SurveyFile(PathBuf),
    Synthetic {
        distribution: Box<ProfileDistribution>,
        seed: u64,
    },
    Manual,
}

/// Non-empty, single-model collection of profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    profiles: Vec<BehaviorProfile>,
    model: ModelKind,
    source: ProfileSource,
}

impl ProfileSet {
    pub fn new(profiles: Vec<BehaviorProfile>, source: ProfileSource) -> Result<Self> {
        let first = profiles.first().ok_or(Error::NoProfiles)?.model();
        for p in &profiles {
            if p.model() != first {
                return Err(Error::MixedModels {
                    first,
                    other: p.model(),
                });
            }
            p.validate()?;
        }
        Ok(ProfileSet {
            profiles,
            model: first,
            source,
        })
    }

    pub fn profiles(&self) -> &[BehaviorProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn source(&self) -> &ProfileSource {
        &self.source
    }

    /// Collapse LT thresholds so forwarding uses the follow threshold.
    pub fn with_shared_threshold(mut self) -> Self {
        for p in &mut self.profiles {
            if let FriendResponse::Threshold { follow, forward } = &mut p.friend {
                *forward = *follow;
            }
        }
        self
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for p in &self.profiles {
            let likert = |name: &str, v: f64| {
                probability_to_likert(v).map(|x| x.to_string()).ok_or_else(|| {
                    invalid(format!(
                        "profile `{}`: {name} = {v} is not a Likert probability",
                        p.participant_id
                    ))
                })
            };
            let (ff, fw, tf, tw) = match p.friend {
                FriendResponse::Probabilistic { follow, forward } => (
                    likert("follow_friend", follow)?,
                    likert("forward_friend", forward)?,
                    String::new(),
                    String::new(),
                ),
                FriendResponse::Threshold { follow, forward } => {
                    (String::new(), String::new(), follow.to_string(), forward.to_string())
                }
            };
            w.write_record([
                p.participant_id.as_str(),
                p.model().as_str(),
                p.condition.as_str(),
                &likert("follow_stranger", p.follow_stranger)?,
                &likert("forward_stranger", p.forward_stranger)?,
                &ff,
                &fw,
                &tf,
                &tw,
            ])?;
        }
        w.flush().map_err(|e| Error::io("<profile csv>", e))?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub fn load_profiles(path: &Path) -> Result<ProfileSet> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_profiles(file, ProfileSource::SurveyFile(path.to_path_buf()))
}

/// Parse the profile CSV. Row numbers in errors are file line numbers (the
/// header is row 1).
pub fn parse_profiles<R: Read>(reader: R, source: ProfileSource) -> Result<ProfileSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|_| Error::NoProfiles)?.clone();
    if header.len() <= 1 && header.iter().all(str::is_empty) {
        return Err(Error::NoProfiles);
    }
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::ProfileRow {
            row: 1,
            column: "header".into(),
            message: format!("expected `{}`", CSV_HEADER.join(",")),
        });
    }

    let mut profiles = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record?;
        if record.len() != CSV_HEADER.len() {
            return Err(Error::ProfileRow {
                row,
                column: "*".into(),
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()),
            });
        }
        let err = |col: usize, message: String| Error::ProfileRow {
            row,
            column: CSV_HEADER[col].into(),
            message,
        };
        let likert = |col: usize| -> Result<f64> {
            let raw = &record[col];
            let x: u8 = raw
                .parse()
                .map_err(|_| err(col, format!("`{raw}` is not an integer 0-10")))?;
            likert_to_probability(x).map_err(|e| err(col, e.to_string()))
        };
        let threshold = |col: usize| -> Result<u32> {
            let raw = &record[col];
            raw.parse()
                .map_err(|_| err(col, format!("`{raw}` is not a non-negative integer")))
        };
        let model: ModelKind = record[1].parse().map_err(|e: Error| err(1, e.to_string()))?;
        let condition: LinkCondition =
            record[2].parse().map_err(|e: Error| err(2, e.to_string()))?;
        let friend = match model {
            ModelKind::IndependentCascade => FriendResponse::Probabilistic {
                follow: likert(5)?,
                forward: likert(6)?,
            },
            ModelKind::LinearThreshold => FriendResponse::Threshold {
                follow: threshold(7)?,
                forward: threshold(8)?,
            },
        };
        profiles.push(BehaviorProfile {
            participant_id: record[0].to_string(),
            condition,
            follow_stranger: likert(3)?,
            forward_stranger: likert(4)?,
            friend,
        });
    }
    ProfileSet::new(profiles, source)
}

/// Per-field distributions for synthesizing a profile set. Likert fields use
/// 11-bin histograms over responses 0..=10; thresholds use a histogram over
/// `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistribution {
    pub model: ModelKind,
    pub condition: LinkCondition,
    pub follow_stranger: Histogram,
    pub forward_stranger: Histogram,
    pub follow_friend: Histogram,
    pub forward_friend: Histogram,
    pub threshold_follow: Histogram,
    pub threshold_forward: Histogram,
    /// Draw one LT threshold and use it for both follow and forward.
    #[serde(default)]
    pub shared_threshold: bool,
}

fn likert_hist(w: [f64; LIKERT_BINS]) -> Histogram {
    Histogram::new(w.to_vec()).expect("built-in histogram")
}

impl ProfileDistribution {
    /// Every Likert field set to `x` and every threshold to `threshold`.
    pub fn point_mass(model: ModelKind, x: u8, threshold: usize) -> Self {
        let l = Histogram::point_mass(x as usize, LIKERT_BINS);
        let t = Histogram::point_mass(threshold, threshold + 1);
        ProfileDistribution {
            model,
            condition: LinkCondition::WithoutLink,
            follow_stranger: l.clone(),
            forward_stranger: l.clone(),
            follow_friend: l.clone(),
            forward_friend: l,
            threshold_follow: t.clone(),
            threshold_forward: t,
            shared_threshold: false,
        }
    }

    pub fn uniform(model: ModelKind) -> Self {
        let l = Histogram::uniform(LIKERT_BINS);
        let t = Histogram::uniform(6);
        ProfileDistribution {
            model,
            condition: LinkCondition::WithoutLink,
            follow_stranger: l.clone(),
            forward_stranger: l.clone(),
            follow_friend: l.clone(),
            forward_friend: l,
            threshold_follow: t.clone(),
            threshold_forward: t,
            shared_threshold: false,
        }
    }

    /// Illustrative default for the given model and link condition. These
    /// are placeholders for the unpublished survey histograms, tuned so that
    /// a 20% stranger send on an m = 5 network puts 3-hour-step peak
    /// follow-through in the low tens of percent.
    pub fn illustrative(model: ModelKind, condition: LinkCondition) -> Self {
        // Responses cluster at "unlikely" with a long tail towards 10.
        let stranger_follow = likert_hist([0.14, 0.04, 0.05, 0.06, 0.07, 0.12, 0.09, 0.11, 0.10, 0.09, 0.13]);
        let stranger_forward = likert_hist([0.40, 0.09, 0.08, 0.07, 0.06, 0.08, 0.06, 0.05, 0.05, 0.03, 0.03]);
        let friend_follow = likert_hist([0.20, 0.06, 0.07, 0.08, 0.08, 0.12, 0.09, 0.09, 0.08, 0.06, 0.07]);
        let friend_forward = likert_hist([0.30, 0.08, 0.08, 0.07, 0.07, 0.10, 0.07, 0.07, 0.06, 0.05, 0.05]);
        let thresholds = Histogram::new(vec![0.0, 0.35, 0.30, 0.20, 0.10, 0.05]).expect("built-in");

        let mut d = ProfileDistribution {
            model,
            condition,
            follow_stranger: stranger_follow,
            forward_stranger: stranger_forward,
            follow_friend: friend_follow,
            forward_friend: friend_forward,
            threshold_follow: thresholds.clone(),
            threshold_forward: thresholds,
            shared_threshold: false,
        };
        if condition == LinkCondition::WithLink {
            // A link makes people warier: shift 7% of every Likert mass
            // down to 0.
            for h in [
                &mut d.follow_stranger,
                &mut d.forward_stranger,
                &mut d.follow_friend,
                &mut d.forward_friend,
            ] {
                *h = shift_towards_zero(h, 0.07);
            }
        }
        d
    }

    fn validate(&self) -> Result<()> {
        for (name, h) in [
            ("follow_stranger", &self.follow_stranger),
            ("forward_stranger", &self.forward_stranger),
            ("follow_friend", &self.follow_friend),
            ("forward_friend", &self.forward_friend),
        ] {
            if h.len() != LIKERT_BINS {
                return Err(Error::InvalidHistogram(format!(
                    "{name} has {} bins, expected {LIKERT_BINS}",
                    h.len()
                )));
            }
        }
        Ok(())
    }
}

fn shift_towards_zero(h: &Histogram, share: f64) -> Histogram {
    let mut w: Vec<f64> = h.weights().iter().map(|x| x * (1.0 - share)).collect();
    w[0] += share;
    Histogram::new(w).expect("mass-preserving shift")
}

pub fn synthesize_profiles(count: usize, dist: &ProfileDistribution, seed: u64) -> Result<ProfileSet> {
    if count == 0 {
        return Err(Error::NoProfiles);
    }
    dist.validate()?;
    let mut rng = seed::rng(seed);
    let fs = dist.follow_stranger.sampler();
    let ws = dist.forward_stranger.sampler();
    let ff = dist.follow_friend.sampler();
    let wf = dist.forward_friend.sampler();
    let tf = dist.threshold_follow.sampler();
    let tw = dist.threshold_forward.sampler();
    let prob = |x: usize| f64::from(x as u8) / 10.0;

    let profiles = (0..count)
        .map(|i| {
            let follow_stranger = prob(fs.sample(&mut rng));
            let forward_stranger = prob(ws.sample(&mut rng));
            let friend = match dist.model {
                ModelKind::IndependentCascade => FriendResponse::Probabilistic {
                    follow: prob(ff.sample(&mut rng)),
                    forward: prob(wf.sample(&mut rng)),
                },
                ModelKind::LinearThreshold => {
                    let follow = tf.sample(&mut rng) as u32;
                    let forward = if dist.shared_threshold {
                        follow
                    } else {
                        tw.sample(&mut rng) as u32
                    };
                    FriendResponse::Threshold { follow, forward }
                }
            };
            BehaviorProfile {
                participant_id: format!("s{i}"),
                condition: dist.condition,
                follow_stranger,
                forward_stranger,
                friend,
            }
        })
        .collect();
    ProfileSet::new(
        profiles,
        ProfileSource::Synthetic {
            distribution: Box::new(dist.clone()),
            seed,
        },
    )
}

/// Node-to-profile mapping: node `v` behaves like `set[index[v]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAssignment {
    set: ProfileSet,
    index: Vec<u32>,
}

impl ProfileAssignment {
    /// One explicit profile per node, in node order.
    pub fn per_node(profiles: Vec<BehaviorProfile>) -> Result<Self> {
        let n = profiles.len();
        let set = ProfileSet::new(profiles, ProfileSource::Manual)?;
        Ok(ProfileAssignment {
            set,
            index: (0..n as u32).collect(),
        })
    }

    /// Every node gets the same profile.
    pub fn uniform(profile: BehaviorProfile, node_count: usize) -> Result<Self> {
        let set = ProfileSet::new(vec![profile], ProfileSource::Manual)?;
        Ok(ProfileAssignment {
            set,
            index: vec![0; node_count],
        })
    }

    pub fn node_count(&self) -> usize {
        self.index.len()
    }

    pub fn model(&self) -> ModelKind {
        self.set.model()
    }

    pub fn set(&self) -> &ProfileSet {
        &self.set
    }

    pub fn profile_index(&self, node: usize) -> usize {
        self.index[node] as usize
    }

    pub fn profile(&self, node: usize) -> &BehaviorProfile {
        &self.set.profiles[self.index[node] as usize]
    }
}

/// Give every node an independent, uniformly chosen member of `set`.
pub fn assign_profiles(net: &SocialNetwork, set: &ProfileSet, seed: u64) -> ProfileAssignment {
    let mut rng = seed::rng(seed);
    let k = set.len() as u32;
    let index = (0..net.node_count()).map(|_| rng.gen_range(0..k)).collect();
    ProfileAssignment {
        set: set.clone(),
        index,
    }
}
