//! Modified independent-cascade / linear-threshold propagation.
//!
//! Three departures from the textbook models:
//!
//! 1. Following through (being "activated") and forwarding (influencing
//!    others) are separate decisions with separate flags.
//! 2. The stranger sender (the attacker, at step 0) and friend senders use
//!    different parameters.
//! 3. A forwarding node only reaches `k` neighbors, sampled uniformly without
//!    replacement (all of them when its degree is at most `k`).
//!
//! Timing: messages forwarded at step `t` are delivered at step `t + 1`, and
//! recipients decide in the step they receive. Step 0 is the stranger send.
//! A run stops after the first step in which no node's received, followed or
//! forwarded flag changed, or when `max_steps` is reached. The recorded trace
//! covers steps `0..=steps_executed`.
//!
//! IC: a node that committed to forwarding delivers to each of its `k`
//! targets independently with its `forward_friend` probability. Every friend
//! delivery is an exposure with fresh follow / forward trials for whatever the
//! node has not yet done. LT: delivery to the `k` targets is certain, and a
//! node follows (forwards) once the number of distinct friends that forwarded
//! to it reaches its follow (forward) threshold. Thresholds are only checked
//! on receipt, so a threshold of 0 behaves like 1. Under both models a node
//! follows at most once and forwards at most once.

use rand::seq::index;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::profiles::{FriendResponse, ModelKind, ProfileAssignment};
use crate::seed;
use crate::social_graph::{sample_stranger_recipients, NodeId, SocialNetwork};

pub const DEFAULT_MAX_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationConfig {
    pub model: ModelKind,
    /// Friends considered per forward.
    pub k: usize,
    pub seed_fraction: f64,
    pub max_steps: usize,
    pub rng_seed: u64,
}

impl PropagationConfig {
    pub fn new(model: ModelKind, k: usize, seed_fraction: f64, rng_seed: u64) -> Self {
        PropagationConfig {
            model,
            k,
            seed_fraction,
            max_steps: DEFAULT_MAX_STEPS,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(invalid("k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.seed_fraction) {
            return Err(invalid(format!(
                "seed fraction {} outside [0, 1]",
                self.seed_fraction
            )));
        }
        if self.max_steps < 1 {
            return Err(invalid("max_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeState {
    pub received_from_stranger: bool,
    /// Distinct neighbors that forwarded to this node. Each neighbor forwards
    /// at most once, to distinct targets, so deliveries never repeat a sender.
    pub friend_senders: u32,
    pub followed: bool,
    pub forwarded: bool,
    pub step_received: Option<u32>,
    pub step_followed: Option<u32>,
    pub step_forwarded: Option<u32>,
}

impl NodeState {
    pub fn received(&self) -> bool {
        self.step_received.is_some()
    }
}

/// Cumulative counts at the end of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub recipients: u64,
    pub forwarders: u64,
    pub followers: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTrace {
    pub steps: Vec<StepCounts>,
    pub node_states: Vec<NodeState>,
    pub steps_executed: usize,
    pub stranger_recipients: usize,
}

impl PropagationTrace {
    pub fn final_counts(&self) -> StepCounts {
        *self.steps.last().expect("trace always has step 0")
    }

    pub fn followers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.node_states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.followed)
            .map(|(v, _)| v as NodeId)
    }
}

impl AsRef<[StepCounts]> for PropagationTrace {
    fn as_ref(&self) -> &[StepCounts] {
        &self.steps
    }
}

#[derive(Clone, Copy)]
struct Params {
    follow_stranger: f64,
    forward_stranger: f64,
    follow_friend: f64,
    forward_friend: f64,
    threshold_follow: u32,
    threshold_forward: u32,
}

pub fn run_cascade(
    net: &SocialNetwork,
    assignment: &ProfileAssignment,
    cfg: &PropagationConfig,
) -> Result<PropagationTrace> {
    cfg.validate()?;
    if assignment.model() != cfg.model {
        return Err(Error::ModelMismatch {
            expected: cfg.model,
            found: assignment.model(),
        });
    }
    let n = net.node_count();
    if assignment.node_count() != n {
        return Err(invalid(format!(
            "assignment covers {} nodes, network has {n}",
            assignment.node_count()
        )));
    }

    let params: Vec<Params> = assignment
        .set()
        .profiles()
        .iter()
        .map(|p| {
            let mut q = Params {
                follow_stranger: p.follow_stranger,
                forward_stranger: p.forward_stranger,
                follow_friend: 0.0,
                forward_friend: 1.0,
                threshold_follow: 0,
                threshold_forward: 0,
            };
            match p.friend {
                FriendResponse::Probabilistic { follow, forward } => {
                    q.follow_friend = follow;
                    q.forward_friend = forward;
                }
                FriendResponse::Threshold { follow, forward } => {
                    q.threshold_follow = follow;
                    q.threshold_forward = forward;
                }
            }
            q
        })
        .collect();
    let param = |v: usize| &params[assignment.profile_index(v)];
    let is_ic = cfg.model == ModelKind::IndependentCascade;

    let strangers = sample_stranger_recipients(
        net,
        cfg.seed_fraction,
        seed::derive(cfg.rng_seed, "strangers", &[]),
    )?;
    let mut rng = seed::rng(seed::derive(cfg.rng_seed, "decisions", &[]));
    // Follow draws get their own stream so that follow probabilities never
    // perturb who receives or forwards.
    let mut follow_rng = seed::rng(seed::derive(cfg.rng_seed, "follow", &[]));

    let mut states = vec![NodeState::default(); n];
    let mut counts = StepCounts::default();
    let mut steps = Vec::new();
    let mut forwarders: Vec<NodeId> = Vec::new();

    for &v in &strangers {
        let p = param(v as usize);
        let s = &mut states[v as usize];
        s.received_from_stranger = true;
        s.step_received = Some(0);
        counts.recipients += 1;
        if follow_rng.gen_bool(p.follow_stranger) {
            s.followed = true;
            s.step_followed = Some(0);
            counts.followers += 1;
        }
        if rng.gen_bool(p.forward_stranger) {
            s.forwarded = true;
            s.step_forwarded = Some(0);
            counts.forwarders += 1;
            forwarders.push(v);
        }
    }
    steps.push(counts);
    let mut changed = !strangers.is_empty();

    let mut step = 0usize;
    let mut inbox: Vec<NodeId> = Vec::new();
    let mut picks: Vec<NodeId> = Vec::with_capacity(cfg.k);
    while changed && step < cfg.max_steps {
        inbox.clear();
        for &v in &forwarders {
            let adj = net.neighbors(v);
            picks.clear();
            if adj.len() <= cfg.k {
                picks.extend_from_slice(adj);
            } else {
                picks.extend(index::sample(&mut rng, adj.len(), cfg.k).into_iter().map(|i| adj[i]));
            }
            let deliver = param(v as usize).forward_friend;
            for &w in &picks {
                if !is_ic || rng.gen_bool(deliver) {
                    inbox.push(w);
                }
            }
        }

        step += 1;
        let t = step as u32;
        forwarders.clear();
        changed = false;
        for &w in &inbox {
            let p = param(w as usize);
            let s = &mut states[w as usize];
            if s.step_received.is_none() {
                s.step_received = Some(t);
                counts.recipients += 1;
                changed = true;
            }
            s.friend_senders += 1;
            let (follow, forward) = if is_ic {
                (
                    !s.followed && follow_rng.gen_bool(p.follow_friend),
                    !s.forwarded && rng.gen_bool(p.forward_friend),
                )
            } else {
                (
                    !s.followed && s.friend_senders >= p.threshold_follow,
                    !s.forwarded && s.friend_senders >= p.threshold_forward,
                )
            };
            if follow {
                s.followed = true;
                s.step_followed = Some(t);
                counts.followers += 1;
                changed = true;
            }
            if forward {
                s.forwarded = true;
                s.step_forwarded = Some(t);
                counts.forwarders += 1;
                forwarders.push(w);
                changed = true;
            }
        }
        steps.push(counts);
    }

    Ok(PropagationTrace {
        steps,
        node_states: states,
        steps_executed: step,
        stranger_recipients: strangers.len(),
    })
}

/// Step index read for a notification sent `lead_h` hours before the peak
/// window when each step lasts `step_duration_h` hours.
pub fn peak_step(step_duration_h: u32, lead_h: u32) -> Result<usize> {
    if step_duration_h == 0 {
        return Err(invalid("step duration must be positive"));
    }
    Ok((lead_h / step_duration_h) as usize)
}

/// Cumulative follow-through fraction at the start of the peak window. Runs
/// that terminated earlier hold their final value.
pub fn follow_through_rate_at_peak<T: AsRef<[StepCounts]>>(
    trace: &T,
    step_duration_h: u32,
    lead_h: u32,
    population: usize,
) -> Result<f64> {
    if population == 0 {
        return Err(invalid("population must be positive"));
    }
    let steps = trace.as_ref();
    let last = steps.len().checked_sub(1).ok_or_else(|| invalid("empty trace"))?;
    let at = peak_step(step_duration_h, lead_h)?.min(last);
    Ok(steps[at].followers as f64 / population as f64)
}

/// Element-wise mean of cumulative counts across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTrace {
    pub recipients: Vec<f64>,
    pub forwarders: Vec<f64>,
    pub followers: Vec<f64>,
}

impl MeanTrace {
    pub fn len(&self) -> usize {
        self.followers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.followers.is_empty()
    }
}

/// Shorter traces are extended with their final value before averaging.
pub fn mean_trace<T: AsRef<[StepCounts]>>(traces: &[T]) -> Result<MeanTrace> {
    if traces.is_empty() {
        return Err(invalid("mean of zero traces"));
    }
    let len = traces.iter().map(|t| t.as_ref().len()).max().unwrap_or(0);
    if len == 0 {
        return Err(invalid("empty trace"));
    }
    let mut sums = vec![[0u64; 3]; len];
    for t in traces {
        let steps = t.as_ref();
        let last = *steps.last().ok_or_else(|| invalid("empty trace"))?;
        for (i, acc) in sums.iter_mut().enumerate() {
            let c = steps.get(i).copied().unwrap_or(last);
            acc[0] += c.recipients;
            acc[1] += c.forwarders;
            acc[2] += c.followers;
        }
    }
    let k = traces.len() as f64;
    let column = |j: usize| sums.iter().map(|s| s[j] as f64 / k).collect();
    Ok(MeanTrace {
        recipients: column(0),
        forwarders: column(1),
        followers: column(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::BehaviorProfile;

    fn path4() -> SocialNetwork {
        SocialNetwork::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    fn cfg(model: ModelKind, k: usize, fraction: f64, seed: u64) -> PropagationConfig {
        PropagationConfig::new(model, k, fraction, seed)
    }

    #[test]
    fn flood_fill_on_path() {
        // Only node 0 is a stranger recipient: give every other node
        // zero stranger propensity and seed everyone, then only node 0 acts.
        let mut profiles = vec![BehaviorProfile::ic(1.0, 1.0, 1.0, 1.0)];
        profiles.extend((1..4).map(|_| BehaviorProfile::ic(0.0, 0.0, 1.0, 1.0)));
        let a = ProfileAssignment::per_node(profiles).unwrap();
        let trace = run_cascade(&path4(), &a, &cfg(ModelKind::IndependentCascade, 2, 1.0, 3)).unwrap();
        let followers: Vec<u64> = trace.steps.iter().map(|c| c.followers).collect();
        assert_eq!(followers, vec![1, 2, 3, 4, 4]);
        assert_eq!(trace.steps_executed, 4);
        assert_eq!(trace.node_states[3].step_followed, Some(3));
    }

    #[test]
    fn zero_follow_means_zero_followers() {
        let net = crate::social_graph::generate_scale_free(2000, 3, 5).unwrap();
        let a = ProfileAssignment::uniform(BehaviorProfile::ic(0.0, 0.8, 0.0, 0.8), 2000).unwrap();
        let trace = run_cascade(&net, &a, &cfg(ModelKind::IndependentCascade, 3, 0.2, 9)).unwrap();
        assert!(trace.steps.iter().all(|c| c.followers == 0));
        assert!(trace.final_counts().recipients > 400);
    }

    #[test]
    fn no_forwarding_stops_at_step_one() {
        let net = crate::social_graph::generate_scale_free(500, 2, 5).unwrap();
        let a = ProfileAssignment::uniform(BehaviorProfile::lt(0.5, 0.0, 1, 1), 500).unwrap();
        let trace = run_cascade(&net, &a, &cfg(ModelKind::LinearThreshold, 3, 0.3, 1)).unwrap();
        assert_eq!(trace.steps_executed, 1);
        assert_eq!(trace.steps.len(), 2);
        assert_eq!(trace.steps[0], trace.steps[1]);
    }

    #[test]
    fn stranger_decliner_contributes_nothing() {
        let net = path4();
        let a = ProfileAssignment::uniform(BehaviorProfile::ic(0.0, 0.0, 1.0, 1.0), 4).unwrap();
        let trace = run_cascade(&net, &a, &cfg(ModelKind::IndependentCascade, 3, 0.25, 0)).unwrap();
        let c = trace.final_counts();
        assert_eq!((c.recipients, c.forwarders, c.followers), (1, 0, 0));
    }

    #[test]
    fn lt_threshold_counts_distinct_senders() {
        // Star: leaves 1..=3 are forced seeds, hub needs 3 senders.
        let net = SocialNetwork::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let mut profiles = vec![BehaviorProfile::lt(0.0, 0.0, 3, 99)];
        profiles.extend((1..4).map(|_| BehaviorProfile::lt(0.0, 1.0, 1, 1)));
        let a = ProfileAssignment::per_node(profiles.clone()).unwrap();
        let trace = run_cascade(&net, &a, &cfg(ModelKind::LinearThreshold, 1, 1.0, 2)).unwrap();
        assert!(trace.node_states[0].followed);
        assert_eq!(trace.node_states[0].friend_senders, 3);

        profiles[0] = BehaviorProfile::lt(0.0, 0.0, 4, 99);
        let a = ProfileAssignment::per_node(profiles).unwrap();
        let trace = run_cascade(&net, &a, &cfg(ModelKind::LinearThreshold, 1, 1.0, 2)).unwrap();
        assert!(!trace.node_states[0].followed);
    }

    #[test]
    fn rejects_bad_config() {
        let a = ProfileAssignment::uniform(BehaviorProfile::ic(1.0, 1.0, 1.0, 1.0), 4).unwrap();
        let e = run_cascade(&path4(), &a, &cfg(ModelKind::LinearThreshold, 1, 0.5, 0)).unwrap_err();
        assert!(matches!(e, Error::ModelMismatch { .. }));
        assert!(run_cascade(&path4(), &a, &cfg(ModelKind::IndependentCascade, 0, 0.5, 0)).is_err());
        assert!(run_cascade(&path4(), &a, &cfg(ModelKind::IndependentCascade, 1, 1.5, 0)).is_err());
    }

    #[test]
    fn peak_reading() {
        assert_eq!(peak_step(3, 6).unwrap(), 2);
        assert_eq!(peak_step(1, 6).unwrap(), 6);
        assert_eq!(peak_step(4, 6).unwrap(), 1);
        assert!(peak_step(0, 6).is_err());

        let frozen: Vec<StepCounts> = [0u64, 30, 30]
            .iter()
            .map(|&f| StepCounts { followers: f, ..Default::default() })
            .collect();
        for dur in [1, 2, 3] {
            assert_eq!(follow_through_rate_at_peak(&frozen, dur, 6, 100).unwrap(), 0.3);
        }
        let rising: Vec<StepCounts> = (0..10u64)
            .map(|f| StepCounts { followers: f, ..Default::default() })
            .collect();
        assert_eq!(follow_through_rate_at_peak(&rising, 3, 6, 10).unwrap(), 0.2);
        assert_eq!(follow_through_rate_at_peak(&rising, 1, 6, 10).unwrap(), 0.6);
    }

    #[test]
    fn mean_trace_pads_with_final_value() {
        let mk = |v: &[u64]| -> Vec<StepCounts> {
            v.iter().map(|&f| StepCounts { followers: f, recipients: f, forwarders: 0 }).collect()
        };
        let m = mean_trace(&[mk(&[1, 2]), mk(&[1, 4])]).unwrap();
        assert_eq!(m.followers, vec![1.0, 3.0]);
        let m = mean_trace(&[mk(&[1, 2, 5]), mk(&[1, 2, 5])]).unwrap();
        assert_eq!(m.followers, vec![1.0, 2.0, 5.0]);
        let m = mean_trace(&[mk(&[2]), mk(&[0, 2, 4])]).unwrap();
        assert_eq!(m.followers, vec![1.0, 2.0, 3.0]);
        assert!(mean_trace::<Vec<StepCounts>>(&[]).is_err());
    }
}
