//! Reference implementations shared by the integration tests and the
//! acceptance suite. Each is written independently of the library code it
//! checks.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeSet, HashMap};

use disinfo_grid::grid::{FeederTree, Site};
use disinfo_grid::profiles::{BehaviorProfile, FriendResponse, ModelKind};
use disinfo_grid::social_graph::SocialNetwork;
use rand::Rng;

/// G(n, p) with edges listed once as (lo, hi).
pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> SocialNetwork {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    SocialNetwork::from_edges(n, &edges).unwrap()
}

fn friend_forward(p: &BehaviorProfile) -> f64 {
    match p.friend {
        FriendResponse::Probabilistic { forward, .. } => forward,
        FriendResponse::Threshold { .. } => 1.0,
    }
}

pub struct Outcome {
    pub recipients: BTreeSet<u32>,
    pub forwarders: BTreeSet<u32>,
    pub followers: BTreeSet<u32>,
}

/// Final state of a cascade whose probabilities are all 0 or 1 and whose `k`
/// covers every neighbor, as a least fixed point over sets.
pub fn fixed_point(net: &SocialNetwork, profiles: &[BehaviorProfile], strangers: &BTreeSet<u32>) -> Outcome {
    let n = net.node_count();
    let one = |p: f64| {
        assert!(p == 0.0 || p == 1.0, "fixed point needs 0/1 probabilities");
        p == 1.0
    };
    let mut fwd: BTreeSet<u32> = strangers.iter().copied().filter(|&v| one(profiles[v as usize].forward_stranger)).collect();
    // Senders that actually reach their neighbors.
    let reaches = |u: u32| one(friend_forward(&profiles[u as usize]));
    let senders_of = |v: u32, fwd: &BTreeSet<u32>| net.neighbors(v).iter().filter(|&&u| fwd.contains(&u) && reaches(u)).count();
    loop {
        let mut grew = false;
        for v in 0..n as u32 {
            if fwd.contains(&v) {
                continue;
            }
            let s = senders_of(v, &fwd);
            let joins = match profiles[v as usize].friend {
                FriendResponse::Probabilistic { forward, .. } => s >= 1 && one(forward),
                FriendResponse::Threshold { forward, .. } => s >= 1 && s >= forward as usize,
            };
            if joins {
                fwd.insert(v);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let mut recipients = strangers.clone();
    let mut followers: BTreeSet<u32> = strangers.iter().copied().filter(|&v| one(profiles[v as usize].follow_stranger)).collect();
    for v in 0..n as u32 {
        let s = senders_of(v, &fwd);
        if s >= 1 {
            recipients.insert(v);
        }
        let follows = match profiles[v as usize].friend {
            FriendResponse::Probabilistic { follow, .. } => s >= 1 && one(follow),
            FriendResponse::Threshold { follow, .. } => s >= 1 && s >= follow as usize,
        };
        if follows {
            followers.insert(v);
        }
    }
    Outcome {
        recipients,
        forwarders: fwd,
        followers,
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct State {
    received: Vec<bool>,
    followed: Vec<bool>,
    forwarded: Vec<bool>,
    senders: Vec<u32>,
    /// Nodes that started forwarding in the last step.
    fresh: Vec<u32>,
    done: bool,
}

type Dist = HashMap<State, f64>;

fn expand(dist: Dist, f: impl Fn(&State) -> Vec<(f64, State)>) -> Dist {
    let mut out = Dist::new();
    for (s, p) in dist {
        for (q, t) in f(&s) {
            if q > 0.0 {
                *out.entry(t).or_insert(0.0) += p * q;
            }
        }
    }
    out
}

fn coin(p: f64) -> [(f64, bool); 2] {
    [(p, true), (1.0 - p, false)]
}

fn subsets(items: &[u32], k: usize) -> Vec<Vec<u32>> {
    if k == 0 {
        return vec![vec![]];
    }
    if items.len() < k {
        return vec![];
    }
    let mut with: Vec<Vec<u32>> = subsets(&items[1..], k - 1)
        .into_iter()
        .map(|mut s| {
            s.insert(0, items[0]);
            s
        })
        .collect();
    with.extend(subsets(&items[1..], k));
    with
}

/// Exact expected final follower count, enumerating every random choice
/// (follow/forward trials, k-subsets, IC deliveries). Every node is a
/// stranger recipient.
pub fn exact_expected_followers(net: &SocialNetwork, profiles: &[BehaviorProfile], model: ModelKind, k: usize, max_steps: usize) -> f64 {
    let n = net.node_count();
    let start = State {
        received: vec![true; n],
        followed: vec![false; n],
        forwarded: vec![false; n],
        senders: vec![0; n],
        fresh: vec![],
        done: false,
    };
    let mut dist: Dist = HashMap::from([(start, 1.0)]);
    for v in 0..n {
        let p = &profiles[v];
        dist = expand(dist, |s| {
            let mut out = Vec::new();
            for (pf, f) in coin(p.follow_stranger) {
                for (pw, w) in coin(p.forward_stranger) {
                    let mut t = s.clone();
                    t.followed[v] = f;
                    t.forwarded[v] = w;
                    if w {
                        t.fresh.push(v as u32);
                    }
                    out.push((pf * pw, t));
                }
            }
            out
        });
    }

    for _ in 0..max_steps {
        // Choose targets and deliveries for every fresh forwarder; collect
        // the inbox as a per-node count.
        #[derive(Clone, PartialEq, Eq, Hash)]
        struct Mid {
            s: State,
            inbox: Vec<u32>,
        }
        let mut mids: HashMap<Mid, f64> = HashMap::new();
        for (s, p) in dist {
            if s.done {
                mids.insert(Mid { s, inbox: vec![] }, p);
                continue;
            }
            let mut partial: HashMap<Vec<u32>, f64> = HashMap::from([(vec![0; n], 1.0)]);
            for &u in &s.fresh {
                let adj = net.neighbors(u);
                let choices = if adj.len() <= k { vec![adj.to_vec()] } else { subsets(adj, k) };
                let pc = 1.0 / choices.len() as f64;
                let deliver = if model == ModelKind::IndependentCascade { friend_forward(&profiles[u as usize]) } else { 1.0 };
                let mut next: HashMap<Vec<u32>, f64> = HashMap::new();
                for (inbox, q) in &partial {
                    for c in &choices {
                        let mut outcomes: Vec<(f64, Vec<u32>)> = vec![(q * pc, inbox.clone())];
                        for &w in c {
                            outcomes = outcomes
                                .into_iter()
                                .flat_map(|(q, ib)| {
                                    coin(deliver).into_iter().map(move |(pd, d)| {
                                        let mut ib = ib.clone();
                                        if d {
                                            ib[w as usize] += 1;
                                        }
                                        (q * pd, ib)
                                    })
                                })
                                .collect();
                        }
                        for (q, ib) in outcomes {
                            if q > 0.0 {
                                *next.entry(ib).or_insert(0.0) += q;
                            }
                        }
                    }
                }
                partial = next;
            }
            for (inbox, q) in partial {
                *mids.entry(Mid { s: s.clone(), inbox }).or_insert(0.0) += p * q;
            }
        }

        dist = Dist::new();
        for (mid, p) in mids {
            if mid.s.done {
                *dist.entry(mid.s).or_insert(0.0) += p;
                continue;
            }
            let mut local: Dist = HashMap::from([(
                State {
                    fresh: vec![],
                    ..mid.s.clone()
                },
                1.0,
            )]);
            let mut changed_somewhere = false;
            for w in 0..n {
                let hits = mid.inbox[w];
                if hits == 0 {
                    continue;
                }
                if !mid.s.received[w] {
                    changed_somewhere = true;
                }
                let prof = &profiles[w];
                for _ in 0..hits {
                    local = expand(local, |s| {
                        let mut t = s.clone();
                        t.received[w] = true;
                        t.senders[w] += 1;
                        match prof.friend {
                            FriendResponse::Probabilistic { follow, forward } => {
                                let mut out = Vec::new();
                                let fc: Vec<(f64, bool)> = if t.followed[w] { vec![(1.0, true)] } else { coin(follow).to_vec() };
                                let wc: Vec<(f64, bool)> = if t.forwarded[w] { vec![(1.0, false)] } else { coin(forward).to_vec() };
                                for &(pf, f) in &fc {
                                    for &(pw, fw) in &wc {
                                        let mut u = t.clone();
                                        u.followed[w] = u.followed[w] || f;
                                        if fw {
                                            u.forwarded[w] = true;
                                            u.fresh.push(w as u32);
                                        }
                                        out.push((pf * pw, u));
                                    }
                                }
                                out
                            }
                            FriendResponse::Threshold { follow, forward } => {
                                if t.senders[w] >= follow {
                                    t.followed[w] = true;
                                }
                                if !t.forwarded[w] && t.senders[w] >= forward {
                                    t.forwarded[w] = true;
                                    t.fresh.push(w as u32);
                                }
                                vec![(1.0, t)]
                            }
                        }
                    });
                }
            }
            for (mut s, q) in local {
                let followed_more = s.followed.iter().zip(&mid.s.followed).any(|(a, b)| a != b);
                s.done = !(changed_somewhere || followed_more || !s.fresh.is_empty());
                *dist.entry(s).or_insert(0.0) += p * q;
            }
        }
        if dist.keys().all(|s| s.done) {
            break;
        }
    }
    dist.iter()
        .map(|(s, p)| p * s.followed.iter().filter(|f| **f).count() as f64)
        .sum()
}

/// 4-node star, hub 0. Leaves ignore the stranger message, so only the hub
/// seeds the cascade.
pub fn star_example() -> (SocialNetwork, Vec<BehaviorProfile>) {
    let net = SocialNetwork::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let mut profiles = vec![BehaviorProfile::ic(1.0, 1.0, 1.0, 0.5)];
    profiles.extend(std::iter::repeat_n(BehaviorProfile::ic(0.0, 0.0, 1.0, 0.5), 3));
    (net, profiles)
}

/// Prim's algorithm on the complete Euclidean graph; returns MST edges as
/// sorted `(lo_id, hi_id)` pairs.
pub fn prim_edges(sites: &[Site]) -> Vec<(u64, u64)> {
    let n = sites.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, usize::MAX); n];
    best[0].0 = 0.0;
    let mut edges = Vec::new();
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
            .unwrap();
        in_tree[u] = true;
        if best[u].1 != usize::MAX {
            let (a, b) = (sites[u].id, sites[best[u].1].id);
            edges.push((a.min(b), a.max(b)));
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = sites[u].distance(&sites[v]);
                if d < best[v].0 {
                    best[v] = (d, u);
                }
            }
        }
    }
    edges.sort_unstable();
    edges
}

pub fn tree_edges(tree: &FeederTree) -> Vec<(u64, u64)> {
    let mut e: Vec<(u64, u64)> = tree.lines().iter().map(|l| (l.parent.min(l.child), l.parent.max(l.child))).collect();
    e.sort_unstable();
    e
}

/// Per-line flow by walking up from every building: O(n * depth).
pub fn subtree_flow_oracle(tree: &FeederTree, loads: &[f64]) -> Vec<f64> {
    let lines = tree.lines();
    let line_of_building: HashMap<u64, usize> = lines.iter().enumerate().map(|(i, l)| (l.child, i)).collect();
    let parent_of: HashMap<u64, u64> = lines.iter().map(|l| (l.child, l.parent)).collect();
    let mut flows = vec![0.0; lines.len()];
    for (b, site) in tree.buildings().iter().enumerate() {
        let mut node = site.id;
        while let Some(&line) = line_of_building.get(&node) {
            flows[line] += loads[b];
            node = parent_of[&node];
        }
    }
    flows
}
