//! Hyperbolic filling graphs, regions of the sample, hulls, rings and anchor sets.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, UNREACHED};
use crate::index::GridIndex;
use crate::metric_space::{greedy_maximal_net, MemberIndex, PointCloudSpace};
use crate::scalar::{inv_pow, Real};

/// Absolute tolerance of the open-ball intersection test.
pub const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vertex<T> {
    pub id: usize,
    pub center: usize,
    pub level: u32,
    pub radius: T,
}

/// Leveled ball graph over a sampled space. Vertex ids are assigned level by level, and within a
/// level in ascending center id; the root `O` is vertex 0.
#[derive(Debug, Clone)]
pub struct Filling<T> {
    space: Arc<PointCloudSpace<T>>,
    s: T,
    max_level: u32,
    vertices: Vec<Vertex<T>>,
    level_start: Vec<usize>,
    graph: Graph,
    max_degree: usize,
    level_index: Vec<GridIndex>,
}

fn balls_meet<T: Real>(d: T, r1: T, r2: T) -> bool {
    d + T::lit(EDGE_TOL) < r1 + r2
}

/// Builds the filling on levels `0..=max_level`.
pub fn build_filling<T: Real>(space: Arc<PointCloudSpace<T>>, s: T, max_level: u32) -> Result<Filling<T>> {
    if s.partial_cmp(&T::one()) != Some(std::cmp::Ordering::Greater) {
        return Err(invalid("s", "must exceed 1"));
    }
    let guard = space.max_level(s);
    if max_level > guard {
        return Err(Error::ResolutionGuard { requested: max_level, max: guard });
    }
    let two = T::lit(2.0);
    let mut vertices = vec![Vertex { id: 0, center: 0, level: 0, radius: two }];
    let mut level_start = vec![0, 1];
    for k in 1..=max_level {
        let net = greedy_maximal_net(&space, k, s)?;
        let radius = two * inv_pow(s, k);
        for c in net.members {
            let id = vertices.len();
            vertices.push(Vertex { id, center: c, level: k, radius });
        }
        level_start.push(vertices.len());
    }
    let dim = space.dim();
    let indexes: Vec<GridIndex> = (0..=max_level as usize)
        .map(|k| {
            let cell = space.to_euclid(vertices[level_start[k]].radius).max(1e-12);
            let mut idx = GridIndex::new(dim, cell);
            for v in &vertices[level_start[k]..level_start[k + 1]] {
                idx.insert(space.point_f64(v.center), v.id);
            }
            idx
        })
        .collect();
    let found: Vec<Vec<usize>> = (0..vertices.len())
        .into_par_iter()
        .map(|vi| {
            let v = vertices[vi];
            let q = space.point_f64(v.center);
            let mut out = Vec::new();
            let k = v.level as usize;
            for (lvl, same) in [(k, true), (k + 1, false)] {
                if lvl > max_level as usize {
                    continue;
                }
                let rw = vertices[level_start[lvl]].radius;
                indexes[lvl].visit_within(&q, space.to_euclid(v.radius + rw), |w, _| {
                    if (!same || w > vi) && balls_meet(space.dist(v.center, vertices[w].center), v.radius, rw) {
                        out.push(w);
                    }
                    true
                });
            }
            out.sort_unstable();
            out
        })
        .collect();
    // Edges ordered by their deeper endpoint, so truncations keep a prefix of the edge ids.
    let mut pairs: Vec<(usize, usize)> =
        found.iter().enumerate().flat_map(|(v, ws)| ws.iter().map(move |&w| (w, v))).collect();
    pairs.sort_unstable();
    let mut graph = Graph::new(vertices.len());
    for (w, v) in pairs {
        graph.add_edge(v, w);
    }
    graph.sort_adjacency();
    let max_degree = graph.max_degree();
    Ok(Filling { space, s, max_level, vertices, level_start, graph, max_degree, level_index: indexes })
}

impl<T: Real> Filling<T> {
    pub fn space(&self) -> &PointCloudSpace<T> {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<PointCloudSpace<T>> {
        Arc::clone(&self.space)
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn vertices(&self) -> &[Vertex<T>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Vertex<T> {
        &self.vertices[v]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Degree bound recorded at build time.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn level(&self, v: usize) -> u32 {
        self.vertices[v].level
    }

    /// Vertex ids at level `k`, a contiguous range.
    pub fn level_range(&self, k: u32) -> std::ops::Range<usize> {
        self.level_start[k as usize]..self.level_start[k as usize + 1]
    }

    pub fn level_radius(&self, k: u32) -> T {
        T::lit(2.0) * inv_pow(self.s, k)
    }

    /// Level of an edge: the larger endpoint level.
    pub fn edge_level(&self, e: usize) -> u32 {
        let (a, b) = self.graph.edge(e);
        self.level(a).max(self.level(b))
    }

    /// Distance between the centers of two vertices.
    pub fn center_dist(&self, v: usize, w: usize) -> T {
        self.space.dist(self.vertices[v].center, self.vertices[w].center)
    }

    /// Level-`k` vertex whose center is nearest to sample point `p` (smallest id on ties).
    pub fn nearest_at_level(&self, k: u32, p: usize) -> usize {
        let q = self.space.point_f64(p);
        let (mut best, _) = self.level_index[k as usize].nearest(&q).expect("nonempty level");
        let mut bd = self.space.dist(self.vertices[best].center, p);
        // Recheck candidates with the exact metric in case of rounding in the index.
        self.level_index[k as usize].visit_within(&q, self.space.to_euclid(bd), |w, _| {
            let d = self.space.dist(self.vertices[w].center, p);
            if d < bd || (d == bd && w < best) {
                best = w;
                bd = d;
            }
            true
        });
        best
    }

    /// Level-`k` vertices with `d(z_w, p) <= r`, ascending.
    pub fn level_vertices_within(&self, k: u32, p: usize, r: T) -> Vec<usize> {
        let q = self.space.point_f64(p);
        let mut out = Vec::new();
        self.level_index[k as usize].visit_within(&q, self.space.to_euclid(r), |w, _| {
            if self.space.dist(self.vertices[w].center, p) <= r {
                out.push(w);
            }
            true
        });
        out.sort_unstable();
        out
    }

    /// `θ(z_v, R)` for every vertex.
    pub fn center_distances(&self, region: &Region<T>) -> Vec<T> {
        let idx = MemberIndex::new(&self.space, region.members());
        self.vertices.iter().map(|v| idx.distance(&self.space, v.center)).collect()
    }

    /// The filling graph with every vertex deeper than `depth` isolated. Vertex ids are unchanged and
    /// edge ids are a prefix of the full graph's.
    pub fn graph_to_depth(&self, depth: u32) -> Graph {
        if depth >= self.max_level {
            return self.graph.clone();
        }
        let keep = self.level_start[depth as usize + 1];
        let mut g = Graph::new(self.vertices.len());
        for (a, b) in self.graph.edges() {
            if a < keep && b < keep {
                g.add_edge(a, b);
            }
        }
        g
    }

    /// Writes the graph export format.
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# s={} max_level={}", self.s, self.max_level)?;
        for v in &self.vertices {
            writeln!(w, "v {} {} {} {}", v.id, v.level, v.center, v.radius)?;
        }
        for (a, b) in self.graph.edges() {
            writeln!(w, "e {a} {b}")?;
        }
        Ok(())
    }
}

/// Outcome of re-checking every structural invariant of a filling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FillingReport {
    /// Centers at each level are pairwise `>= s^{-k}` apart.
    pub separated: bool,
    /// Every sample point is within `s^{-k}` of a level-`k` center.
    pub maximal: bool,
    /// Adjacency matches the ball-intersection rule on adjacent or equal levels.
    pub edge_rule: bool,
    pub single_root: bool,
    pub connected: bool,
    pub max_degree: usize,
    /// The recorded degree bound equals the observed maximum degree.
    pub degree_recorded: bool,
}

impl FillingReport {
    pub fn all_pass(&self) -> bool {
        self.separated && self.maximal && self.edge_rule && self.single_root && self.connected && self.degree_recorded
    }
}

pub fn check_filling<T: Real>(f: &Filling<T>) -> FillingReport {
    let space = &f.space;
    let mut separated = true;
    let mut maximal = true;
    for k in 1..=f.max_level {
        let sep = inv_pow(f.s, k);
        let range = f.level_range(k);
        let centers: Vec<usize> = range.clone().map(|v| f.vertices[v].center).collect();
        let idx = MemberIndex::new(space, &centers);
        for &c in &centers {
            space.for_each_in_ball(c, sep, |p, _| {
                if p != c && centers.binary_search(&p).is_ok() {
                    separated = false;
                }
            });
        }
        maximal &= (0..space.len()).all(|p| idx.any_within(space, p, sep));
    }
    let edge_rule = (0..f.vertices.len()).into_par_iter().all(|vi| {
        let v = f.vertices[vi];
        let q = space.point_f64(v.center);
        let mut want = Vec::new();
        let lo = v.level.saturating_sub(1);
        let hi = (v.level + 1).min(f.max_level);
        for lvl in lo..=hi {
            let rw = f.vertices[f.level_start[lvl as usize]].radius;
            f.level_index[lvl as usize].visit_within(&q, space.to_euclid(v.radius + rw), |w, _| {
                if w != vi && balls_meet(space.dist(v.center, f.vertices[w].center), v.radius, rw) {
                    want.push(w);
                }
                true
            });
        }
        want.sort_unstable();
        let mut have: Vec<usize> = f.graph.neighbors(vi).iter().map(|&(w, _)| w as usize).collect();
        have.sort_unstable();
        want == have
    });
    let max_degree = f.graph.max_degree();
    FillingReport {
        separated,
        maximal,
        edge_rule,
        single_root: f.level_range(0).len() == 1 && f.vertices[0].level == 0,
        connected: f.graph.is_connected(),
        max_degree,
        degree_recorded: max_degree == f.max_degree,
    }
}

/// Shortest edge count between two vertices.
pub fn graph_distance<T: Real>(filling: &Filling<T>, u: usize, v: usize) -> u32 {
    if u == v {
        return 0;
    }
    filling.graph.bfs(&[u])[v]
}

/// Level-`n` vertices with their same-level edges, using local indices.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    pub level: u32,
    /// Global vertex id of each local vertex.
    pub vertices: Vec<usize>,
    pub graph: Graph,
}

pub fn level_graph<T: Real>(filling: &Filling<T>, n: u32) -> Result<LevelGraph> {
    if n < 1 || n > filling.max_level {
        return Err(Error::LevelOutOfRange { n, max: filling.max_level });
    }
    let vertices: Vec<usize> = filling.level_range(n).collect();
    let (graph, _) = filling.graph.induced(&vertices);
    Ok(LevelGraph { level: n, vertices, graph })
}

/// Outcome of checking the level-`n` balls against the κ-approximation conditions with κ = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KappaCheck {
    /// Cores `B(z_v, s^{-n}/2)` are pairwise disjoint.
    pub disjoint_cores: bool,
    /// Sets `U_v = B_v` cover the sample.
    pub covers: bool,
}

pub fn kappa_check<T: Real>(filling: &Filling<T>, n: u32) -> Result<KappaCheck> {
    let lg = level_graph(filling, n)?;
    let space = filling.space();
    let sep = inv_pow(filling.s, n);
    let centers: Vec<usize> = lg.vertices.iter().map(|&v| filling.vertices[v].center).collect();
    let mut disjoint = true;
    for (i, &c) in centers.iter().enumerate() {
        space.for_each_in_ball(c, sep, |p, _| {
            if p != c && centers.binary_search(&p).is_ok() {
                disjoint = false;
            }
        });
        if !disjoint {
            break;
        }
        let _ = i;
    }
    let idx = MemberIndex::new(space, &centers);
    let r = filling.level_radius(n);
    let covers = (0..space.len()).all(|p| idx.any_within(space, p, r));
    Ok(KappaCheck { disjoint_cores: disjoint, covers })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Shape<T> {
    /// Union of open balls `(center, radius)`.
    Balls(Vec<(usize, T)>),
    /// Points at distance greater than `radius` from `center`.
    OutsideClosedBall { center: usize, radius: T },
    /// An explicit member list.
    Members,
}

/// A subset of the sample, described by its shape and its member points.
#[derive(Debug, Clone)]
pub struct Region<T> {
    shape: Shape<T>,
    members: Vec<usize>,
    mask: Vec<bool>,
    diam: T,
}

impl<T: Real> Region<T> {
    fn from_sorted(space: &PointCloudSpace<T>, shape: Shape<T>, members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let mut mask = vec![false; space.len()];
        for &m in &members {
            mask[m] = true;
        }
        let diam = space.diameter_of(&members);
        Ok(Region { shape, members, mask, diam })
    }

    pub fn ball(space: &PointCloudSpace<T>, center: usize, radius: T) -> Result<Self> {
        Self::balls(space, &[(center, radius)])
    }

    pub fn balls(space: &PointCloudSpace<T>, balls: &[(usize, T)]) -> Result<Self> {
        let mut members = Vec::new();
        for &(c, r) in balls {
            if c >= space.len() {
                return Err(invalid("center", format!("point {c} out of range")));
            }
            members.extend(space.ball(c, r));
        }
        members.sort_unstable();
        members.dedup();
        Self::from_sorted(space, Shape::Balls(balls.to_vec()), members)
    }

    /// `Z \ B̄(center, radius)`.
    pub fn outside_closed_ball(space: &PointCloudSpace<T>, center: usize, radius: T) -> Result<Self> {
        let members = (0..space.len()).filter(|&p| space.dist(center, p) > radius).collect();
        Self::from_sorted(space, Shape::OutsideClosedBall { center, radius }, members)
    }

    pub fn from_members(space: &PointCloudSpace<T>, members: &[usize]) -> Result<Self> {
        let mut m = members.to_vec();
        m.sort_unstable();
        m.dedup();
        if m.last().is_some_and(|&x| x >= space.len()) {
            return Err(invalid("members", "point id out of range"));
        }
        Self::from_sorted(space, Shape::Members, m)
    }

    /// Union of two regions; ball lists are concatenated when both are ball unions.
    pub fn union(&self, other: &Region<T>, space: &PointCloudSpace<T>) -> Result<Self> {
        let mut m: Vec<usize> = self.members.iter().chain(&other.members).copied().collect();
        m.sort_unstable();
        m.dedup();
        let shape = match (&self.shape, &other.shape) {
            (Shape::Balls(a), Shape::Balls(b)) => Shape::Balls(a.iter().chain(b).copied().collect()),
            _ => Shape::Members,
        };
        Self::from_sorted(space, shape, m)
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    /// Member point ids, ascending.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, p: usize) -> bool {
        self.mask[p]
    }

    pub fn diam(&self) -> T {
        self.diam
    }

    pub fn is_subset_of(&self, other: &Region<T>) -> bool {
        self.members.iter().all(|&m| other.contains(m))
    }
}

/// Two positively separated regions.
#[derive(Debug, Clone)]
pub struct SetPair<T> {
    pub a: Region<T>,
    pub b: Region<T>,
    pub dist: T,
    pub delta: T,
}

impl<T: Real> SetPair<T> {
    pub fn new(space: &PointCloudSpace<T>, a: Region<T>, b: Region<T>) -> Result<Self> {
        let (dist, _, _) = space.set_distance(a.members(), b.members());
        if !(dist > T::zero()) {
            return Err(Error::NotSeparated);
        }
        let m = a.diam().min(b.diam());
        if !(m > T::zero()) {
            return Err(invalid("region", "sets must have positive diameter"));
        }
        Ok(SetPair { delta: dist / m, a, b, dist })
    }

    pub fn swapped(&self) -> SetPair<T> {
        SetPair { a: self.b.clone(), b: self.a.clone(), dist: self.dist, delta: self.delta }
    }
}

#[derive(Debug, Clone)]
pub struct Hull {
    pub j: u32,
    /// Member vertex ids, ascending.
    pub vertices: Vec<usize>,
    mask: Vec<bool>,
}

impl Hull {
    pub fn contains(&self, v: usize) -> bool {
        self.mask[v]
    }
}

/// Smallest `j` with `s^{-j} < diam`; then `diam/s <= s^{-j}` holds as well.
pub fn hull_level<T: Real>(s: T, diam: T) -> u32 {
    let mut j = 0;
    while inv_pow(s, j) >= diam {
        j += 1;
    }
    j
}

pub fn hull<T: Real>(filling: &Filling<T>, region: &Region<T>) -> Result<Hull> {
    if region.diam() <= inv_pow(filling.s, filling.max_level) {
        return Err(Error::RegionTooSmall { diam: region.diam().f64(), depth: filling.max_level });
    }
    let j = hull_level(filling.s, region.diam());
    let idx = MemberIndex::new(filling.space(), region.members());
    let start = filling.level_start[j as usize];
    let flags: Vec<bool> =
        filling.vertices[start..].par_iter().map(|v| idx.any_within(filling.space(), v.center, v.radius)).collect();
    let mut mask = vec![false; filling.vertex_count()];
    let mut vertices = Vec::new();
    for (i, f) in flags.into_iter().enumerate() {
        if f {
            mask[start + i] = true;
            vertices.push(start + i);
        }
    }
    Ok(Hull { j, vertices, mask })
}

/// Largest usable outer radius around `z`: beyond it `Z \ B(z, r)` is empty.
pub fn ring_radius_limit<T: Real>(space: &PointCloudSpace<T>, z: usize) -> T {
    (0..space.len()).map(|p| space.dist(z, p)).fold(T::zero(), T::max)
}

/// Graph distance between `H(B(z, r1))` and the complement of `H(B(z, r2))`.
pub fn ring_separation<T: Real>(filling: &Filling<T>, z: usize, r1: T, r2: T) -> Result<u32> {
    if !(r1 > T::zero() && r1 < r2) {
        return Err(invalid("r1", "need 0 < r1 < r2"));
    }
    let r_max = ring_radius_limit(filling.space(), z);
    if r2 >= r_max {
        return Err(Error::RadiusTooLarge { r2: r2.f64(), r_max: r_max.f64() });
    }
    let space = filling.space();
    let inner = hull(filling, &Region::ball(space, z, r1)?)?;
    let outer = hull(filling, &Region::ball(space, z, r2)?)?;
    let dist = filling.graph.bfs(&inner.vertices);
    let d = (0..filling.vertex_count()).filter(|&v| !outer.contains(v)).map(|v| dist[v]).min().unwrap_or(UNREACHED);
    Ok(d)
}

/// Level-`n` vertices whose centers lie in `region`.
pub fn anchors<T: Real>(filling: &Filling<T>, region: &Region<T>, n: u32, pair_dist: T) -> Result<Vec<usize>> {
    if n > filling.max_level {
        return Err(Error::LevelOutOfRange { n, max: filling.max_level });
    }
    let bound = pair_dist / T::lit(4.0);
    if !(filling.level_radius(n) < bound) {
        return Err(Error::AnchorGuard { depth: n, bound: bound.f64() });
    }
    Ok(filling.level_range(n).filter(|&v| region.contains(filling.vertices[v].center)).collect())
}
