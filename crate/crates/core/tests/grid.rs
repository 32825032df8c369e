mod common;

use disinfo_grid::grid::{build_feeder_tree, generate_synthetic_city, partition_by_substation, Site, TreeConstraints};
use disinfo_grid::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{prim_edges, tree_edges};

const UNCAPPED: TreeConstraints = TreeConstraints { max_children: None };

fn random_sites<R: Rng>(n: usize, rng: &mut R) -> (Site, Vec<Site>) {
    let sub = Site::new(10_000, rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0));
    let b = (0..n)
        .map(|i| Site::new(i as u64, rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)))
        .collect();
    (sub, b)
}

#[test]
fn uncapped_tree_is_the_minimum_spanning_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.gen_range(1..=60);
        let (sub, b) = random_sites(n, &mut rng);
        let tree = build_feeder_tree(&b, &sub, None, &UNCAPPED).unwrap();
        let mut all = vec![sub];
        all.extend(b.iter().copied());
        assert_eq!(tree_edges(&tree), prim_edges(&all));
    }
}

/// Every spanning tree of the complete graph on `sites`, by edge subsets.
fn min_spanning_length(sites: &[Site]) -> f64 {
    let n = sites.len();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut comp: Vec<usize> = (0..n).collect();
        let mut len = 0.0;
        let mut ok = true;
        for (i, &(a, b)) in edges.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            let (ca, cb) = (comp[a], comp[b]);
            if ca == cb {
                ok = false;
                break;
            }
            for c in comp.iter_mut() {
                if *c == cb {
                    *c = ca;
                }
            }
            len += sites[a].distance(&sites[b]);
        }
        if ok {
            best = best.min(len);
        }
    }
    best
}

#[test]
fn small_trees_have_minimal_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let n = rng.gen_range(1..=5);
        let (sub, b) = random_sites(n, &mut rng);
        let tree = build_feeder_tree(&b, &sub, None, &UNCAPPED).unwrap();
        let mut all = vec![sub];
        all.extend(b.iter().copied());
        let brute = min_spanning_length(&all);
        assert!((tree.total_length() - brute).abs() < 1e-9, "{} vs {brute}", tree.total_length());
    }
}

#[test]
fn collinear_buildings_form_a_chain() {
    let sub = Site::new(9, 0.0, 0.0);
    let b = vec![Site::new(3, 300.0, 0.0), Site::new(1, 100.0, 0.0), Site::new(2, 200.0, 0.0)];
    let all = [sub, b[0], b[1], b[2]];
    for c in [UNCAPPED, TreeConstraints::default(), TreeConstraints { max_children: Some(1) }] {
        let tree = build_feeder_tree(&b, &sub, None, &c).unwrap();
        let chain: Vec<(u64, u64)> = tree.lines().iter().map(|l| (l.parent, l.child)).collect();
        assert_eq!(chain, vec![(9, 1), (1, 2), (2, 3)]);
        assert_eq!(tree.total_length(), min_spanning_length(&all));
    }
}

#[test]
fn partition_matches_nearest_neighbour_scan() {
    let city = generate_synthetic_city(200, 6, 3000.0, 42).unwrap();
    let part = partition_by_substation(&city);
    assert_eq!(part.values().map(Vec::len).sum::<usize>(), 200);
    for b in &city.buildings {
        let nearest = city
            .substations
            .iter()
            .min_by(|x, y| b.distance(x).total_cmp(&b.distance(y)).then(x.id.cmp(&y.id)))
            .unwrap();
        assert!(part[&nearest.id].contains(&b.id), "building {}", b.id);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feeder_invariants(n in 1usize..120, cap in prop::option::of(1usize..6), s in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (sub, b) = random_sites(n, &mut rng);
        let c = TreeConstraints { max_children: cap };
        match build_feeder_tree(&b, &sub, None, &c) {
            Ok(tree) => {
                let lines = tree.lines();
                prop_assert_eq!(lines.len(), n);
                let mut children: std::collections::HashMap<u64, usize> = Default::default();
                for (i, l) in lines.iter().enumerate() {
                    *children.entry(l.parent).or_default() += 1;
                    prop_assert_eq!(l.id, l.child);
                    prop_assert_eq!(b[l.child_building].id, l.child);
                    match l.parent_line {
                        None => {
                            prop_assert_eq!(l.parent, sub.id);
                            prop_assert_eq!(tree.line_depth(i), 1);
                        }
                        Some(p) => {
                            prop_assert!(p < i);
                            prop_assert_eq!(lines[p].child, l.parent);
                            prop_assert_eq!(tree.line_depth(i), tree.line_depth(p) + 1);
                        }
                    }
                }
                let mut kids: Vec<u64> = lines.iter().map(|l| l.child).collect();
                kids.sort_unstable();
                kids.dedup();
                prop_assert_eq!(kids.len(), n);
                if let Some(cap) = cap {
                    prop_assert!(children.values().all(|&c| c <= cap));
                }
            }
            Err(e) => {
                prop_assert!(cap.is_some());
                prop_assert!(matches!(e, Error::Infeasible { .. }), "{}", e);
                prop_assert!(e.to_string().contains("max_children"));
            }
        }
    }
}
