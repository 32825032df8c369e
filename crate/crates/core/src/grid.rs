//! Radial distribution network model.
//!
//! Power lines are assumed to follow roads, every building is one household,
//! and each building hangs off its nearest substation. Within a substation's
//! partition a spanning tree is grown by Kruskal's algorithm with one change:
//! an edge is skipped when taking it would give either endpoint more than
//! `max_children` children once the tree is rooted at the substation. Edge
//! weights are road lengths when a road graph is supplied, straight-line
//! distances otherwise. Ties (in distance or edge weight) go to the lower id.
//!
//! Line `i` of a feeder is identified by its child's building id, which is
//! unique because every building has exactly one upstream line.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

pub const DEFAULT_MAX_CHILDREN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: u64,
    pub x: f64,
    pub y: f64,
}

impl Site {
    pub fn new(id: u64, x: f64, y: f64) -> Self {
        Site { id, x, y }
    }

    fn dist2(&self, other: &Site) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Site) -> f64 {
        self.dist2(other).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub a: u64,
    pub b: u64,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityModel {
    pub buildings: Vec<Site>,
    pub substations: Vec<Site>,
    #[serde(default, rename = "roads", skip_serializing_if = "Option::is_none")]
    pub roads: Option<Vec<Road>>,
}

impl CityModel {
    pub fn validate(&self) -> Result<()> {
        if self.substations.is_empty() {
            return Err(Error::Geometry("at least one substation is required".into()));
        }
        let mut ids = HashSet::new();
        for s in self.substations.iter().chain(&self.buildings) {
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(Error::Geometry(format!("site {} has non-finite coordinates", s.id)));
            }
            if !ids.insert(s.id) {
                return Err(Error::Geometry(format!("duplicate id {}", s.id)));
            }
        }
        if let Some(roads) = &self.roads {
            for r in roads {
                if !ids.contains(&r.a) || !ids.contains(&r.b) {
                    return Err(Error::Geometry(format!(
                        "road {}-{} references an unknown site",
                        r.a, r.b
                    )));
                }
                if !(r.length.is_finite() && r.length >= 0.0) || r.a == r.b {
                    return Err(Error::Geometry(format!("road {}-{} is invalid", r.a, r.b)));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let city: CityModel = serde_json::from_str(text)?;
        city.validate()?;
        Ok(city)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Clustered synthetic city in a `extent_m` square. Substations sit at
/// jittered grid points, one per cluster; buildings scatter normally around
/// a uniformly chosen cluster. Buildings get ids `0..n`, substations
/// `n..n+s`.
pub fn generate_synthetic_city(
    n_buildings: usize,
    n_substations: usize,
    extent_m: f64,
    seed: u64,
) -> Result<CityModel> {
    if n_buildings < 1 || n_substations < 1 {
        return Err(invalid("need at least one building and one substation"));
    }
    if !(extent_m.is_finite() && extent_m > 0.0) {
        return Err(invalid(format!("extent {extent_m} must be positive")));
    }
    let mut rng = seed::rng(seed);
    let cols = (n_substations as f64).sqrt().ceil() as usize;
    let rows = n_substations.div_ceil(cols);
    let cell_w = extent_m / cols as f64;
    let cell_h = extent_m / rows as f64;

    let substations: Vec<Site> = (0..n_substations)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let x = (c as f64 + 0.5 + rng.gen_range(-0.25..=0.25)) * cell_w;
            let y = (r as f64 + 0.5 + rng.gen_range(-0.25..=0.25)) * cell_h;
            Site::new((n_buildings + i) as u64, x, y)
        })
        .collect();

    let spread = Normal::new(0.0, 0.3 * cell_w.min(cell_h)).expect("positive spread");
    let buildings = (0..n_buildings)
        .map(|i| {
            let centre = substations[rng.gen_range(0..n_substations)];
            let x = (centre.x + spread.sample(&mut rng)).clamp(0.0, extent_m);
            let y = (centre.y + spread.sample(&mut rng)).clamp(0.0, extent_m);
            Site::new(i as u64, x, y)
        })
        .collect();

    Ok(CityModel {
        buildings,
        substations,
        roads: None,
    })
}

/// Assign each building to its nearest substation. Every substation appears
/// in the result, possibly with no buildings.
pub fn partition_by_substation(city: &CityModel) -> BTreeMap<u64, Vec<u64>> {
    let mut subs: Vec<&Site> = city.substations.iter().collect();
    subs.sort_by_key(|s| s.id);
    let mut out: BTreeMap<u64, Vec<u64>> = subs.iter().map(|s| (s.id, Vec::new())).collect();
    for b in &city.buildings {
        let mut best = subs[0];
        let mut best_d = b.dist2(best);
        for s in &subs[1..] {
            let d = b.dist2(s);
            if d < best_d {
                best = s;
                best_d = d;
            }
        }
        out.get_mut(&best.id).expect("known substation").push(b.id);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConstraints {
    /// `None` disables the fan-out cap (plain Kruskal).
    pub max_children: Option<usize>,
}

impl Default for TreeConstraints {
    fn default() -> Self {
        TreeConstraints {
            max_children: Some(DEFAULT_MAX_CHILDREN),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    /// Equal to the child building id.
    pub id: u64,
    pub parent: u64,
    pub child: u64,
    pub length_m: f64,
    pub capacity_kw: f64,
    /// Index of the upstream line in the same feeder; `None` when fed
    /// directly by the substation.
    pub parent_line: Option<usize>,
    /// Index of the child building in [`FeederTree::buildings`].
    pub child_building: usize,
}

/// A rooted radial feeder. Lines are stored top-down (breadth-first from the
/// substation), so iterating them in reverse visits children before parents.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederTree {
    root: Site,
    buildings: Vec<Site>,
    lines: Vec<Line>,
    depth: Vec<u32>,
}

impl FeederTree {
    pub fn root(&self) -> &Site {
        &self.root
    }

    pub fn buildings(&self) -> &[Site] {
        &self.buildings
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Depth of the line's child node (substation = 0).
    pub fn line_depth(&self, line: usize) -> u32 {
        self.depth[line]
    }

    pub fn total_length(&self) -> f64 {
        self.lines.iter().map(|l| l.length_m).sum()
    }

    /// Line feeding each building, indexed like [`FeederTree::buildings`].
    pub fn building_lines(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.buildings.len()];
        for (i, l) in self.lines.iter().enumerate() {
            out[l.child_building] = i;
        }
        out
    }

    /// Coordinates of a line's parent and child ends.
    pub fn line_endpoints(&self, line: usize) -> (Site, Site) {
        let l = &self.lines[line];
        let parent = match l.parent_line {
            Some(p) => self.buildings[self.lines[p].child_building],
            None => self.root,
        };
        (parent, self.buildings[l.child_building])
    }

    pub fn write_csv<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for l in &self.lines {
            w.write_record([
                l.id.to_string(),
                l.parent.to_string(),
                l.child.to_string(),
                format!("{:.3}", l.length_m),
                format!("{:.6}", l.capacity_kw),
            ])?;
        }
        Ok(())
    }
}

pub const FEEDER_CSV_HEADER: [&str; 5] = ["line_id", "parent", "child", "length_m", "capacity_kw"];

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

struct Candidate {
    weight: f64,
    lo_id: u64,
    hi_id: u64,
    a: usize,
    b: usize,
}

/// Grow the feeder for one substation over `buildings`.
pub fn build_feeder_tree(
    buildings: &[Site],
    substation: &Site,
    roads: Option<&[Road]>,
    constraints: &TreeConstraints,
) -> Result<FeederTree> {
    if buildings.is_empty() {
        return Err(invalid(format!("substation {} has no buildings", substation.id)));
    }
    // Node 0 is the substation, node i + 1 is buildings[i].
    let site = |i: usize| if i == 0 { substation } else { &buildings[i - 1] };
    let n = buildings.len() + 1;

    let mut candidates = Vec::new();
    let mut push = |a: usize, b: usize, weight: f64| {
        let (ia, ib) = (site(a).id, site(b).id);
        candidates.push(Candidate {
            weight,
            lo_id: ia.min(ib),
            hi_id: ia.max(ib),
            a,
            b,
        });
    };
    match roads {
        None => {
            for a in 0..n {
                for b in a + 1..n {
                    push(a, b, site(a).distance(site(b)));
                }
            }
        }
        Some(roads) => {
            let local: HashMap<u64, usize> = (0..n).map(|i| (site(i).id, i)).collect();
            for r in roads {
                if let (Some(&a), Some(&b)) = (local.get(&r.a), local.get(&r.b)) {
                    if a != b {
                        push(a, b, r.length);
                    }
                }
            }
        }
    }
    candidates.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.lo_id.cmp(&y.lo_id))
            .then(x.hi_id.cmp(&y.hi_id))
    });

    // Non-root nodes use one degree slot for their parent.
    let cap = |i: usize| -> usize {
        match constraints.max_children {
            None => usize::MAX,
            Some(c) if i == 0 => c,
            Some(c) => c.saturating_add(1),
        }
    };
    let mut uf = UnionFind::new(n);
    let mut degree = vec![0usize; n];
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut taken = 0;
    for c in &candidates {
        if taken == n - 1 {
            break;
        }
        if degree[c.a] >= cap(c.a) || degree[c.b] >= cap(c.b) {
            continue;
        }
        if uf.union(c.a, c.b) {
            degree[c.a] += 1;
            degree[c.b] += 1;
            adj[c.a].push((c.b, c.weight));
            adj[c.b].push((c.a, c.weight));
            taken += 1;
        }
    }
    if taken < n - 1 {
        return Err(match constraints.max_children {
            Some(max_children) => Error::Infeasible {
                substation: substation.id,
                max_children,
                components: n - taken,
            },
            None => Error::Geometry(format!(
                "roads leave {} disconnected components under substation {}",
                n - taken,
                substation.id
            )),
        });
    }

    // Orient away from the substation, breadth first.
    let mut line_of = vec![None; n];
    let mut lines = Vec::with_capacity(n - 1);
    let mut depth = Vec::with_capacity(n - 1);
    let mut node_depth = vec![0u32; n];
    let mut visited = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    visited[0] = true;
    while let Some(u) = queue.pop_front() {
        let mut next: Vec<(usize, f64)> = adj[u].iter().copied().filter(|(v, _)| !visited[*v]).collect();
        next.sort_by_key(|(v, _)| site(*v).id);
        for (v, w) in next {
            visited[v] = true;
            node_depth[v] = node_depth[u] + 1;
            line_of[v] = Some(lines.len());
            lines.push(Line {
                id: site(v).id,
                parent: site(u).id,
                child: site(v).id,
                length_m: w,
                capacity_kw: 0.0,
                parent_line: line_of[u],
                child_building: v - 1,
            });
            depth.push(node_depth[v]);
            queue.push_back(v);
        }
    }

    Ok(FeederTree {
        root: *substation,
        buildings: buildings.to_vec(),
        lines,
        depth,
    })
}

/// Set each line's capacity to `(1 + headroom)` times its regular peak flow.
pub fn calibrate_capacities(tree: &FeederTree, baseline_peak_kw: &[f64], headroom: f64) -> Result<FeederTree> {
    if !(headroom.is_finite() && headroom >= 0.0) {
        return Err(invalid(format!("headroom {headroom} must be non-negative")));
    }
    if baseline_peak_kw.len() != tree.lines.len() {
        return Err(Error::Missing(format!(
            "baseline flows cover {} of {} lines under substation {}",
            baseline_peak_kw.len(),
            tree.lines.len(),
            tree.root.id
        )));
    }
    let mut out = tree.clone();
    for (line, &base) in out.lines.iter_mut().zip(baseline_peak_kw) {
        if !(base.is_finite() && base >= 0.0) {
            return Err(invalid(format!("baseline flow {base} on line {}", line.id)));
        }
        line.capacity_kw = (1.0 + headroom) * base;
    }
    Ok(out)
}

/// All feeders of a city. Buildings are numbered globally in feeder order:
/// feeder `f` owns the global range `building_offsets[f]..building_offsets[f + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub feeders: Vec<FeederTree>,
    building_offsets: Vec<usize>,
}

impl Grid {
    pub fn new(feeders: Vec<FeederTree>) -> Self {
        let mut building_offsets = vec![0];
        for f in &feeders {
            building_offsets.push(building_offsets.last().unwrap() + f.buildings.len());
        }
        Grid {
            feeders,
            building_offsets,
        }
    }

    pub fn building_count(&self) -> usize {
        *self.building_offsets.last().unwrap()
    }

    pub fn line_count(&self) -> usize {
        self.feeders.iter().map(|f| f.lines.len()).sum()
    }

    pub fn building_range(&self, feeder: usize) -> std::ops::Range<usize> {
        self.building_offsets[feeder]..self.building_offsets[feeder + 1]
    }

    /// Building sites in global order.
    pub fn buildings(&self) -> impl Iterator<Item = &Site> {
        self.feeders.iter().flat_map(|f| f.buildings.iter())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(FEEDER_CSV_HEADER)?;
        for f in &self.feeders {
            f.write_csv(&mut w)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Partition the city and build every non-empty feeder in parallel.
pub fn build_grid(city: &CityModel, constraints: &TreeConstraints) -> Result<Grid> {
    city.validate()?;
    let by_id: HashMap<u64, &Site> = city.buildings.iter().map(|b| (b.id, b)).collect();
    let partition = partition_by_substation(city);
    let subs: HashMap<u64, &Site> = city.substations.iter().map(|s| (s.id, s)).collect();
    let jobs: Vec<(&Site, Vec<Site>)> = partition
        .iter()
        .filter(|(_, b)| !b.is_empty())
        .map(|(s, b)| (subs[s], b.iter().map(|id| *by_id[id]).collect()))
        .collect();
    let feeders = jobs
        .par_iter()
        .map(|(sub, buildings)| {
            build_feeder_tree(buildings, sub, city.roads.as_deref(), constraints)
                .map_err(|e| e.context(format!("feeder for substation {}", sub.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid::new(feeders))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sites(points: &[(f64, f64)]) -> Vec<Site> {
        points.iter().enumerate().map(|(i, &(x, y))| Site::new(i as u64, x, y)).collect()
    }

    #[test]
    fn collinear_chain() {
        let sub = Site::new(100, 0.0, 0.0);
        let b = sites(&[(30.0, 0.0), (10.0, 0.0), (20.0, 0.0)]);
        let t = build_feeder_tree(&b, &sub, None, &TreeConstraints::default()).unwrap();
        let edges: Vec<(u64, u64)> = t.lines().iter().map(|l| (l.parent, l.child)).collect();
        assert_eq!(edges, vec![(100, 1), (1, 2), (2, 0)]);
        assert_eq!(t.total_length(), 30.0);
        assert_eq!((0..3).map(|i| t.line_depth(i)).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn single_building_single_line() {
        let sub = Site::new(9, 0.0, 0.0);
        let t = build_feeder_tree(&sites(&[(3.0, 4.0)]), &sub, None, &TreeConstraints::default()).unwrap();
        assert_eq!(t.lines().len(), 1);
        assert_eq!(t.lines()[0].length_m, 5.0);
        assert_eq!(t.lines()[0].parent_line, None);
    }

    #[test]
    fn fan_out_cap_is_respected_or_reported() {
        // Ring of 12 buildings around the substation: unconstrained the
        // substation would take every spoke.
        let sub = Site::new(100, 0.0, 0.0);
        let ring: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 12.0;
                (10.0 * a.cos(), 10.0 * a.sin())
            })
            .collect();
        let b = sites(&ring);
        let t = build_feeder_tree(&b, &sub, None, &TreeConstraints { max_children: Some(2) }).unwrap();
        let mut children: HashMap<u64, usize> = HashMap::new();
        for l in t.lines() {
            *children.entry(l.parent).or_default() += 1;
        }
        assert!(children.values().all(|&c| c <= 2));
        assert_eq!(t.lines().len(), 12);

        let err = build_feeder_tree(&b, &sub, None, &TreeConstraints { max_children: Some(0) }).unwrap_err();
        assert!(matches!(err, Error::Infeasible { substation: 100, .. }));
        assert!(err.to_string().contains("larger max_children"));
    }

    #[test]
    fn roads_restrict_candidate_edges() {
        let sub = Site::new(10, 0.0, 0.0);
        let b = sites(&[(1.0, 0.0), (2.0, 0.0)]);
        // Only a long detour road reaches building 1.
        let roads = [
            Road { a: 10, b: 0, length: 1.0 },
            Road { a: 10, b: 1, length: 50.0 },
        ];
        let t = build_feeder_tree(&b, &sub, Some(&roads), &TreeConstraints::default()).unwrap();
        assert_eq!(t.total_length(), 51.0);
        let missing = [Road { a: 10, b: 0, length: 1.0 }];
        assert!(build_feeder_tree(&b, &sub, Some(&missing), &TreeConstraints::default()).is_err());
    }

    #[test]
    fn partition_ties_go_to_lower_id() {
        let city = CityModel {
            buildings: vec![Site::new(0, 1.0, 0.0), Site::new(1, 1.9, 0.0)],
            substations: vec![Site::new(11, 2.0, 0.0), Site::new(10, 0.0, 0.0)],
            roads: None,
        };
        let p = partition_by_substation(&city);
        assert_eq!(p[&10], vec![0]);
        assert_eq!(p[&11], vec![1]);
    }

    #[test]
    fn single_substation_takes_everything() {
        let city = generate_synthetic_city(50, 1, 1000.0, 3).unwrap();
        let p = partition_by_substation(&city);
        assert_eq!(p.len(), 1);
        assert_eq!(p.values().next().unwrap().len(), 50);
    }

    #[test]
    fn synthetic_city_shape_and_determinism() {
        let a = generate_synthetic_city(500, 9, 5000.0, 1).unwrap();
        assert_eq!(a.substations.len(), 9);
        assert_eq!(a.buildings.len(), 500);
        a.validate().unwrap();
        assert!(a.buildings.iter().all(|b| (0.0..=5000.0).contains(&b.x) && (0.0..=5000.0).contains(&b.y)));
        assert_eq!(a, generate_synthetic_city(500, 9, 5000.0, 1).unwrap());
        let one = generate_synthetic_city(1, 1, 10.0, 0).unwrap();
        assert_eq!((one.buildings.len(), one.substations.len()), (1, 1));
        assert!(generate_synthetic_city(0, 1, 10.0, 0).is_err());
    }

    #[test]
    fn calibration() {
        let sub = Site::new(100, 0.0, 0.0);
        let t = build_feeder_tree(&sites(&[(1.0, 0.0), (2.0, 0.0)]), &sub, None, &TreeConstraints::default()).unwrap();
        let c = calibrate_capacities(&t, &[100.0, 50.0], 0.10).unwrap();
        assert!((c.lines()[0].capacity_kw - 110.0).abs() < 1e-12);
        assert!((c.lines()[1].capacity_kw - 55.0).abs() < 1e-12);
        let c = calibrate_capacities(&t, &[100.0, 50.0], 0.0).unwrap();
        assert_eq!(c.lines()[0].capacity_kw, 100.0);
        let c = calibrate_capacities(&t, &[0.0, 0.0], 0.1).unwrap();
        assert!(c.lines().iter().all(|l| l.capacity_kw == 0.0));
        assert!(matches!(calibrate_capacities(&t, &[1.0], 0.1), Err(Error::Missing(_))));
        assert!(calibrate_capacities(&t, &[1.0, 1.0], -0.1).is_err());
    }

    #[test]
    fn geometry_json() {
        let json = r#"{"buildings":[{"id":1,"x":0,"y":1}],"substations":[{"id":2,"x":0,"y":0}],"roads":[{"a":1,"b":2,"length":1.5}]}"#;
        let city = CityModel::from_json(json).unwrap();
        assert_eq!(city.roads.as_ref().unwrap()[0].length, 1.5);
        let dup = r#"{"buildings":[{"id":1,"x":0,"y":1}],"substations":[{"id":1,"x":0,"y":0}]}"#;
        assert!(CityModel::from_json(dup).is_err());
        let none = r#"{"buildings":[],"substations":[]}"#;
        assert!(CityModel::from_json(none).is_err());
    }

    #[test]
    fn grid_spans_every_building() {
        let city = generate_synthetic_city(400, 9, 4000.0, 5).unwrap();
        let grid = build_grid(&city, &TreeConstraints::default()).unwrap();
        assert_eq!(grid.building_count(), 400);
        assert_eq!(grid.line_count(), 400);
        for f in &grid.feeders {
            for (i, l) in f.lines().iter().enumerate() {
                let parent_depth = l.parent_line.map_or(0, |p| f.line_depth(p));
                assert_eq!(parent_depth + 1, f.line_depth(i));
                if let Some(p) = l.parent_line {
                    assert!(p < i, "lines must be top-down");
                }
            }
        }
    }
}
