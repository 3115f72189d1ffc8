//! Weighted shortest paths, binary path structures and the quantitative ascending-path bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::filling::{hull, Filling, Region, Shape};
use crate::graph::{Domain, Graph};
use crate::scalar::Real;
use crate::weak_norm::WeightFunction;

const BALL_TOL: f64 = 1e-12;

struct Key<T>(T, u32, usize);

impl<T: Real> PartialEq for Key<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Real> Eq for Key<T> {}
impl<T: Real> PartialOrd for Key<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for Key<T> {
    // Reversed so that `BinaryHeap` pops the smallest key.
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal).then(o.1.cmp(&self.1)).then(o.2.cmp(&self.2))
    }
}

fn less<T: Real>(a: (T, u32), b: (T, u32)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Distances and hop counts to the nearest target under `w`; vertex weights count every vertex
/// on the path including both ends.
pub(crate) fn distances_to<T: Real>(g: &Graph, w: &[T], domain: Domain, targets: &[usize]) -> (Vec<T>, Vec<u32>) {
    let n = g.vertex_count();
    let mut d = vec![T::infinity(); n];
    let mut h = vec![u32::MAX; n];
    let mut heap = BinaryHeap::new();
    for &t in targets {
        let start = if domain == Domain::Vertex { w[t] } else { T::zero() };
        if less((start, 0), (d[t], h[t])) {
            d[t] = start;
            h[t] = 0;
            heap.push(Key(start, 0, t));
        }
    }
    while let Some(Key(dx, hx, x)) = heap.pop() {
        if dx != d[x] || hx != h[x] {
            continue;
        }
        for &(u, e) in g.neighbors(x) {
            let u = u as usize;
            let step = if domain == Domain::Vertex { w[u] } else { w[e as usize] };
            let cand = (step + dx, hx + 1);
            if less(cand, (d[u], h[u])) {
                d[u] = cand.0;
                h[u] = cand.1;
                heap.push(Key(cand.0, cand.1, u));
            }
        }
    }
    (d, h)
}

/// Shortest-path tree grown from `sources`, abandoned once the frontier reaches `cutoff`.
/// Returns distances and `(parent vertex, parent edge)` links.
pub(crate) fn forward_tree<T: Real>(
    g: &Graph,
    w: &[T],
    domain: Domain,
    sources: &[usize],
    cutoff: T,
) -> (Vec<T>, Vec<(u32, u32)>) {
    let n = g.vertex_count();
    let mut d = vec![T::infinity(); n];
    let mut h = vec![u32::MAX; n];
    let mut parent = vec![(u32::MAX, u32::MAX); n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        let start = if domain == Domain::Vertex { w[s] } else { T::zero() };
        if less((start, 0), (d[s], h[s])) {
            d[s] = start;
            h[s] = 0;
            heap.push(Key(start, 0, s));
        }
    }
    while let Some(Key(dx, hx, x)) = heap.pop() {
        if dx != d[x] || hx != h[x] {
            continue;
        }
        if dx >= cutoff {
            break;
        }
        for &(u, e) in g.neighbors(x) {
            let ui = u as usize;
            let step = if domain == Domain::Vertex { w[ui] } else { w[e as usize] };
            let cand = (dx + step, hx + 1);
            if less(cand, (d[ui], h[ui])) {
                d[ui] = cand.0;
                h[ui] = cand.1;
                parent[ui] = (x as u32, e);
                heap.push(Key(cand.0, cand.1, ui));
            }
        }
    }
    (d, parent)
}

/// Follows parent links back to a source; returns vertices (source first) and edges.
pub(crate) fn trace(parent: &[(u32, u32)], end: usize) -> (Vec<usize>, Vec<usize>) {
    let mut vs = vec![end];
    let mut es = Vec::new();
    let mut x = end;
    while parent[x].0 != u32::MAX {
        es.push(parent[x].1 as usize);
        x = parent[x].0 as usize;
        vs.push(x);
    }
    vs.reverse();
    es.reverse();
    (vs, es)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedPath<T> {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub length: T,
}

/// Minimum-weight path from `from` to `to`, or `None` when no path exists.
///
/// Among minimum paths the one with fewest hops is returned, and remaining ties go to the
/// lexicographically smallest vertex sequence. Overlapping endpoint sets give the empty path.
pub fn min_weighted_path<T: Real>(
    g: &Graph,
    w: &WeightFunction<T>,
    from: &[usize],
    to: &[usize],
) -> Result<Option<WeightedPath<T>>> {
    if from.is_empty() || to.is_empty() {
        return Err(invalid("endpoints", "endpoint sets must be nonempty"));
    }
    let mut is_target = vec![false; g.vertex_count()];
    for &t in to {
        is_target[t] = true;
    }
    if from.iter().any(|&f| is_target[f]) {
        return Ok(Some(WeightedPath { vertices: Vec::new(), edges: Vec::new(), length: T::zero() }));
    }
    Ok(lex_min_path(g, w.values(), w.domain(), from, to))
}

pub(crate) fn lex_min_path<T: Real>(
    g: &Graph,
    w: &[T],
    domain: Domain,
    from: &[usize],
    to: &[usize],
) -> Option<WeightedPath<T>> {
    let (d, h) = distances_to(g, w, domain, to);
    let mut start: Option<usize> = None;
    for &f in from {
        if d[f].is_finite() {
            start = match start {
                Some(s) if !less((d[f], h[f]), (d[s], h[s])) && !(d[f] == d[s] && h[f] == h[s] && f < s) => Some(s),
                _ => Some(f),
            };
        }
    }
    let s = start?;
    let mut vertices = vec![s];
    let mut edges = Vec::new();
    let mut u = s;
    while h[u] > 0 {
        let mut next: Option<(usize, usize)> = None;
        for &(x, e) in g.neighbors(u) {
            let (x, e) = (x as usize, e as usize);
            let term = if domain == Domain::Vertex { w[u] } else { w[e] };
            if h[x] != u32::MAX && h[x] + 1 == h[u] && term + d[x] == d[u] && next.is_none_or(|(b, _)| x < b) {
                next = Some((x, e));
            }
        }
        let (x, e) = next.expect("consistent distance labels");
        vertices.push(x);
        edges.push(e);
        u = x;
    }
    Some(WeightedPath { length: d[s], vertices, edges })
}

/// Total weight of a vertex sequence under `w`.
pub fn path_weight<T: Real>(g: &Graph, w: &WeightFunction<T>, vertices: &[usize]) -> Result<T> {
    match w.domain() {
        Domain::Vertex => Ok(vertices.iter().map(|&v| w.get(v)).sum()),
        Domain::Edge => {
            let mut total = T::zero();
            for pair in vertices.windows(2) {
                let e = g
                    .edge_between(pair[0], pair[1])
                    .ok_or_else(|| invalid("path", format!("{} and {} are not adjacent", pair[0], pair[1])))?;
                total += w.get(e);
            }
            Ok(total)
        }
    }
}

/// Two vertices one level band below `v` whose balls lie in `B_v` and whose doubled balls are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Split {
    pub v1: usize,
    pub v2: usize,
    pub m: u32,
}

fn contained<T: Real>(f: &Filling<T>, outer: usize, inner: usize, factor: T) -> bool {
    let (o, i) = (f.vertex(outer), f.vertex(inner));
    f.center_dist(outer, inner) + i.radius <= factor * o.radius + T::lit(BALL_TOL)
}

fn doubled_disjoint<T: Real>(f: &Filling<T>, a: usize, b: usize) -> bool {
    let two = T::lit(2.0);
    f.center_dist(a, b) >= two * (f.vertex(a).radius + f.vertex(b).radius)
}

/// Split of `v` at exactly `m` levels below it, lexicographically first pair of candidates.
pub fn split_at<T: Real>(f: &Filling<T>, v: usize, m: u32) -> Option<Split> {
    let lv = f.level(v) + m;
    if m == 0 || lv > f.max_level() {
        return None;
    }
    let vx = f.vertex(v);
    let reach = vx.radius - f.level_radius(lv) + T::lit(BALL_TOL);
    if reach < T::zero() {
        return None;
    }
    let cands: Vec<usize> =
        f.level_vertices_within(lv, vx.center, reach).into_iter().filter(|&c| contained(f, v, c, T::one())).collect();
    for (i, &a) in cands.iter().enumerate() {
        for &b in &cands[i + 1..] {
            if doubled_disjoint(f, a, b) {
                return Some(Split { v1: a, v2: b, m });
            }
        }
    }
    None
}

/// Searches increasing `m` for a split of `v`.
pub fn vertex_split<T: Real>(f: &Filling<T>, v: usize) -> Result<Split> {
    let vx = f.vertex(v);
    if f.space().ball_count(vx.center, vx.radius) < 2 {
        return Err(Error::ResolutionExhausted(v));
    }
    let mut m = 1;
    while f.level(v) + m <= f.max_level() {
        if let Some(s) = split_at(f, v, m) {
            return Ok(s);
        }
        m += 1;
    }
    Err(Error::DepthExhausted(format!("no split of vertex {v} above level {}", f.max_level())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub vertex: usize,
    pub parent: Option<usize>,
    /// Node indices of the two children, empty for leaves.
    pub children: Vec<usize>,
    /// Vertex sequence from this node's vertex to each child's vertex, one level per step.
    pub child_paths: Vec<Vec<usize>>,
    pub child_edges: Vec<Vec<usize>>,
}

/// Dyadic tree of ascending paths rooted at `root`, with `2^k` nodes at level `ℓ(root) + k·m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryPathStructure {
    pub root: usize,
    pub m: u32,
    pub nodes: Vec<TreeNode>,
    /// Node indices per generation.
    pub generations: Vec<Vec<usize>>,
    /// Path from the requested start vertex to `root` (just `[root]` when no detour was needed).
    pub preamble: Vec<usize>,
}

/// Where the leaves of a structure must end up.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a, T> {
    /// Leaves inside `10B` for the ball `B`; the start vertex must lie in `H(B)`.
    Inside(&'a Region<T>),
    /// Leaves avoiding the closure of `inner`; the start vertex must lie in `H(outer) \ H(inner)`.
    Outside { inner: &'a Region<T>, outer: &'a Region<T> },
}

fn single_ball<T: Real>(r: &Region<T>) -> Result<(usize, T)> {
    match r.shape() {
        Shape::Balls(b) if b.len() == 1 => Ok(b[0]),
        _ => Err(Error::Precondition("target regions must be single balls".into())),
    }
}

/// Ascending chain from `w` to `c`, nearest-center steps, avoiding `avoid` except at `w`.
fn climb<T: Real>(f: &Filling<T>, w: usize, c: usize, avoid: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    let (lw, lc) = (f.level(w), f.level(c));
    let zc = f.vertex(c).center;
    let mut vs = vec![w];
    let mut es = Vec::new();
    for k in lw + 1..=lc {
        let prev = *vs.last().unwrap();
        let pick = if k == lc {
            Some(c)
        } else {
            let first = f.nearest_at_level(k, zc);
            let ok = |x: usize| {
                !avoid.contains(&x) && contained(f, w, x, T::lit(2.0)) && f.graph().edge_between(prev, x).is_some()
            };
            if ok(first) {
                Some(first)
            } else {
                let r = f.level_radius(k);
                let mut alt = f.level_vertices_within(k, zc, r + r);
                alt.retain(|&x| ok(x));
                alt.sort_by(|&a, &b| {
                    let da = f.space().dist(f.vertex(a).center, zc);
                    let db = f.space().dist(f.vertex(b).center, zc);
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                });
                alt.first().copied()
            }
        };
        let x = pick?;
        if avoid.contains(&x) && x != w {
            return None;
        }
        let e = f.graph().edge_between(prev, x)?;
        vs.push(x);
        es.push(e);
    }
    Some((vs, es))
}

fn try_build<T: Real>(
    f: &Filling<T>,
    root: usize,
    generations: u32,
    m: u32,
) -> Option<(Vec<TreeNode>, Vec<Vec<usize>>)> {
    let mut nodes =
        vec![TreeNode { vertex: root, parent: None, children: vec![], child_paths: vec![], child_edges: vec![] }];
    let mut gens = vec![vec![0usize]];
    for _ in 0..generations {
        let mut next = Vec::new();
        for &ni in gens.last().unwrap() {
            let w = nodes[ni].vertex;
            let sp = split_at(f, w, m)?;
            let (p1, e1) = climb(f, w, sp.v1, &[])?;
            let (p2, e2) = climb(f, w, sp.v2, &p1[1..])?;
            for (child, (p, e)) in [(sp.v1, (p1, e1)), (sp.v2, (p2, e2))] {
                let ci = nodes.len();
                nodes.push(TreeNode {
                    vertex: child,
                    parent: Some(ni),
                    children: vec![],
                    child_paths: vec![],
                    child_edges: vec![],
                });
                nodes[ni].children.push(ci);
                nodes[ni].child_paths.push(p);
                nodes[ni].child_edges.push(e);
                next.push(ci);
            }
        }
        gens.push(next);
    }
    Some((nodes, gens))
}

/// Builds a binary path structure with the smallest uniform splitting constant that works.
pub fn build_binary_structure<T: Real>(
    f: &Filling<T>,
    v: usize,
    generations: u32,
    target: Target<'_, T>,
) -> Result<BinaryPathStructure> {
    let (root, preamble) = match target {
        Target::Inside(b) => {
            let h = hull(f, b)?;
            if !h.contains(v) {
                return Err(Error::Precondition(format!("vertex {v} is not in the hull of the target ball")));
            }
            (v, vec![v])
        }
        Target::Outside { inner, outer } => {
            let (z, r) = single_ball(inner)?;
            let hi = hull(f, inner)?;
            let ho = hull(f, outer)?;
            if !ho.contains(v) || hi.contains(v) {
                return Err(Error::Precondition(format!("vertex {v} is not in H(B') \\ H(B)")));
            }
            sidestep(f, v, z, r)?
        }
    };
    if generations == 0 {
        let nodes =
            vec![TreeNode { vertex: root, parent: None, children: vec![], child_paths: vec![], child_edges: vec![] }];
        return Ok(BinaryPathStructure { root, m: 1, nodes, generations: vec![vec![0]], preamble });
    }
    let mut m = vertex_split(f, root)?.m;
    loop {
        if f.level(root) + generations * m > f.max_level() {
            return Err(Error::DepthExhausted(format!(
                "{generations} generations with splitting constant {m} from level {}",
                f.level(root)
            )));
        }
        if let Some((nodes, gens)) = try_build(f, root, generations, m) {
            let s = BinaryPathStructure { root, m, nodes, generations: gens, preamble };
            s.verify(f).map_err(Error::Precondition)?;
            match target {
                Target::Inside(b) => {
                    let (z, r) = single_ball(b)?;
                    let ten = T::lit(10.0) * r;
                    for &leaf in s.generations.last().unwrap() {
                        let x = s.nodes[leaf].vertex;
                        let zx = f.vertex(x).center;
                        if f.space().dist(z, zx) + f.vertex(x).radius > ten + T::lit(BALL_TOL) {
                            return Err(Error::Precondition(format!("leaf {x} leaves 10B")));
                        }
                    }
                }
                Target::Outside { inner, .. } => {
                    let (z, r) = single_ball(inner)?;
                    for &leaf in s.generations.last().unwrap() {
                        let x = s.nodes[leaf].vertex;
                        if f.space().dist(z, f.vertex(x).center) <= r + f.vertex(x).radius {
                            return Err(Error::Precondition(format!("leaf {x} meets the closed ball")));
                        }
                    }
                }
            }
            return Ok(s);
        }
        m += 1;
    }
}

/// Nearest vertex (by graph distance through levels `ℓ(v)` and `ℓ(v)+1`) whose closed ball misses
/// the closed ball `B̄(z, r)`.
fn sidestep<T: Real>(f: &Filling<T>, v: usize, z: usize, r: T) -> Result<(usize, Vec<usize>)> {
    let lv = f.level(v);
    let clear = |w: usize| f.space().dist(z, f.vertex(w).center) > r + f.vertex(w).radius;
    if clear(v) {
        return Ok((v, vec![v]));
    }
    let allow = |w: usize| f.level(w) == lv || f.level(w) == lv + 1;
    let dist = f.graph().bfs_filtered(&[v], allow);
    let best = (0..f.vertex_count())
        .filter(|&w| dist[w] != u32::MAX && clear(w))
        .min_by_key(|&w| (dist[w], w))
        .ok_or_else(|| Error::Precondition(format!("no vertex near {v} avoids the ball")))?;
    let mut path = vec![best];
    let mut x = best;
    while x != v {
        x = f
            .graph()
            .neighbors(x)
            .iter()
            .map(|&(y, _)| y as usize)
            .filter(|&y| dist[y] != u32::MAX && dist[y] + 1 == dist[x])
            .min()
            .expect("bfs predecessor");
        path.push(x);
    }
    path.reverse();
    Ok((best, path))
}

impl BinaryPathStructure {
    pub fn generation_count(&self) -> usize {
        self.generations.len() - 1
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.generations.last().unwrap().iter().map(|&n| self.nodes[n].vertex)
    }

    /// All edge ids in the subtree below `node`.
    pub fn subtree_edges(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            for (i, &c) in self.nodes[n].children.iter().enumerate() {
                out.extend_from_slice(&self.nodes[n].child_edges[i]);
                stack.push(c);
            }
        }
        out
    }

    pub fn edges(&self) -> Vec<usize> {
        self.subtree_edges(0)
    }

    /// Vertices on child paths of `node` other than the node itself.
    fn path_vertices(&self, node: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.nodes[node].child_paths.iter().flat_map(|p| p[1..].iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Re-checks every structural invariant against the filling.
    pub fn verify<T: Real>(&self, f: &Filling<T>) -> std::result::Result<(), String> {
        let base = f.level(self.root);
        for (k, g) in self.generations.iter().enumerate() {
            if g.len() != 1 << k {
                return Err(format!("generation {k} has {} nodes", g.len()));
            }
            for &n in g {
                let lv = f.level(self.nodes[n].vertex);
                if lv != base + k as u32 * self.m {
                    return Err(format!("node {n} at level {lv} in generation {k}"));
                }
            }
        }
        for (ni, node) in self.nodes.iter().enumerate() {
            let w = node.vertex;
            for (i, &c) in node.children.iter().enumerate() {
                let cv = self.nodes[c].vertex;
                if !contained(f, w, cv, T::one()) {
                    return Err(format!("child {cv} not inside the ball of {w}"));
                }
                let p = &node.child_paths[i];
                if p.first() != Some(&w) || p.last() != Some(&cv) {
                    return Err(format!("path of node {ni} has wrong endpoints"));
                }
                for (j, pair) in p.windows(2).enumerate() {
                    if f.level(pair[1]) != f.level(pair[0]) + 1 {
                        return Err(format!("path of node {ni} is not ascending"));
                    }
                    if f.graph().edge_between(pair[0], pair[1]) != Some(node.child_edges[i][j]) {
                        return Err(format!("path of node {ni} uses a missing edge"));
                    }
                }
                for &x in p {
                    if !contained(f, w, x, T::lit(2.0)) {
                        return Err(format!("path vertex {x} leaves 2B of {w}"));
                    }
                }
            }
            if node.children.len() == 2 {
                let shared = node.child_paths[0][1..].iter().any(|x| node.child_paths[1].contains(x));
                if shared {
                    return Err(format!("sibling paths of node {ni} meet"));
                }
            }
        }
        for g in &self.generations {
            for (i, &a) in g.iter().enumerate() {
                for &b in &g[i + 1..] {
                    let (va, vb) = (self.nodes[a].vertex, self.nodes[b].vertex);
                    if !doubled_disjoint(f, va, vb) {
                        return Err(format!("doubled balls of {va} and {vb} meet"));
                    }
                    let pa = self.path_vertices(a);
                    if self.path_vertices(b).iter().any(|x| pa.binary_search(x).is_ok()) {
                        return Err(format!("paths below {va} and {vb} intersect"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AscendingPath<T> {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub length: T,
    /// Node indices visited, root first.
    pub nodes: Vec<usize>,
}

fn segment_cost<T: Real>(t: &BinaryPathStructure, w: &WeightFunction<T>, node: usize, i: usize) -> T {
    match w.domain() {
        Domain::Edge => t.nodes[node].child_edges[i].iter().map(|&e| w.get(e)).sum(),
        Domain::Vertex => t.nodes[node].child_paths[i][1..].iter().map(|&x| w.get(x)).sum(),
    }
}

/// Minimum-weight root-to-leaf path through the structure below `start`.
pub fn ascending_min_path_from<T: Real>(
    t: &BinaryPathStructure,
    w: &WeightFunction<T>,
    start: usize,
) -> AscendingPath<T> {
    let mut cost = vec![T::zero(); t.nodes.len()];
    let mut choice = vec![usize::MAX; t.nodes.len()];
    for g in t.generations.iter().rev() {
        for &n in g {
            let mut best: Option<(T, usize)> = None;
            for i in 0..t.nodes[n].children.len() {
                let c = segment_cost(t, w, n, i) + cost[t.nodes[n].children[i]];
                if best.is_none_or(|(b, _)| c < b) {
                    best = Some((c, i));
                }
            }
            if let Some((c, i)) = best {
                cost[n] = c;
                choice[n] = i;
            }
        }
    }
    let mut vertices = vec![t.nodes[start].vertex];
    let mut edges = Vec::new();
    let mut nodes = vec![start];
    let mut n = start;
    while choice[n] != usize::MAX {
        let i = choice[n];
        vertices.extend_from_slice(&t.nodes[n].child_paths[i][1..]);
        edges.extend_from_slice(&t.nodes[n].child_edges[i]);
        n = t.nodes[n].children[i];
        nodes.push(n);
    }
    let mut length = cost[start];
    if w.domain() == Domain::Vertex {
        length += w.get(t.nodes[start].vertex);
    }
    AscendingPath { vertices, edges, length, nodes }
}

/// Minimum-weight path from the root to the deepest generation. Ties go to the first child.
pub fn ascending_min_path<T: Real>(t: &BinaryPathStructure, w: &WeightFunction<T>) -> AscendingPath<T> {
    ascending_min_path_from(t, w, 0)
}

/// Smallest `N >= 0` with `a^p/β^p <= (2^{N+1} - 1) M`.
pub fn bracket_index<T: Real>(a: T, beta: T, m: u32, p: T) -> u32 {
    let ratio = (a / beta).powf(p);
    let mm = T::count(m as usize);
    let mut n = 0u32;
    let two = T::lit(2.0);
    while ratio > (two.powi(n as i32 + 1) - T::one()) * mm && n < 4000 {
        n += 1;
    }
    n
}

/// Upper bound on the average weight of the ascending paths of a binary path structure whose
/// weights obey `weak <= a` and `max <= β`. The series tail is bounded geometrically and included.
pub fn s_bound<T: Real>(a: T, beta: T, m: u32, p: T) -> Result<T> {
    if !(p > T::one()) {
        return Err(invalid("p", "series bound needs p > 1"));
    }
    if !(a > T::zero() && beta > T::zero()) {
        return Err(invalid("a", "a and beta must be positive"));
    }
    if m < 1 {
        return Err(invalid("M", "splitting constant must be at least 1"));
    }
    let n = bracket_index(a, beta, m, p);
    let mm = T::count(m as usize);
    let inv = T::one() / p;
    let two = T::lit(2.0);
    let head = mm * beta * T::count(n as usize + 1);
    let mut sum = T::zero();
    let ratio = two.powf(-inv);
    let mut j = n + 1;
    loop {
        let pow = two.powi(j as i32);
        let term = mm * a / ((pow - T::one()) * mm).powf(inv);
        sum += term;
        // Terms beyond j are at most M a (2^{i-1} M)^{-1/p}, a geometric series of ratio 2^{-1/p}.
        let tail = mm * a * (pow * mm).powf(-inv) / (T::one() - ratio);
        if tail <= T::lit(1e-10) * (head + sum) || !pow.is_finite() {
            return Ok(head + sum + tail);
        }
        j += 1;
    }
}

/// `ceil(count · (1 - α/h))`: the guaranteed number of paths of weight at most `h`.
pub fn path_count_bound<T: Real>(count: usize, alpha: T, h: T) -> Result<usize> {
    if !(h > alpha && alpha >= T::zero()) {
        return Err(invalid("h", "need h > alpha >= 0"));
    }
    if count < 1 {
        return Err(invalid("count", "need at least one path"));
    }
    let x = T::count(count) * (T::one() - alpha / h);
    Ok((x - T::lit(1e-9)).ceil().max(T::zero()).to_usize().unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathCensus<T> {
    pub alpha: T,
    pub bound: usize,
    pub cheap: usize,
}

/// Checks the path-count bound on an explicit family of path lengths with `α` their mean.
pub fn path_count_census<T: Real>(lengths: &[T], h: T) -> Result<PathCensus<T>> {
    if lengths.is_empty() {
        return Err(invalid("lengths", "empty family"));
    }
    let alpha = lengths.iter().copied().sum::<T>() / T::count(lengths.len());
    let bound = path_count_bound(lengths.len(), alpha, h)?;
    let cheap = lengths.iter().filter(|&&l| l <= h).count();
    Ok(PathCensus { alpha, bound, cheap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MainPathParameters<T> {
    pub beta: T,
    pub k: u32,
    pub ell0: u32,
    pub s: T,
}

/// Largest `β` with `3 S(a, β) < δ`, the generation count `k` and `ℓ0 = k M`.
pub fn main_path_parameters<T: Real>(a: T, delta: T, m: u32, p: T) -> Result<MainPathParameters<T>> {
    if !(delta > T::zero()) {
        return Err(invalid("delta", "must be positive"));
    }
    let three = T::lit(3.0);
    let ok = |b: T| -> Result<bool> { Ok(three * s_bound(a, b, m, p)? < delta) };
    let mut lo = T::one();
    while !ok(lo)? {
        lo /= T::lit(2.0);
        if lo < T::min_positive_value() * T::lit(1e6) {
            return Err(Error::Precondition("no admissible beta".into()));
        }
    }
    let mut hi = lo * T::lit(2.0);
    while ok(hi)? {
        lo = hi;
        hi *= T::lit(2.0);
        if !hi.is_finite() {
            return Err(Error::Precondition("beta unbounded".into()));
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = lo;
    let need = (a / beta).powf(p) + T::one();
    let mut k = 1u32;
    while T::lit(2.0).powi(k as i32 - 1) <= need {
        k += 1;
    }
    Ok(MainPathParameters { beta, k, ell0: k * m, s: s_bound(a, beta, m, p)? })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MainPathFailure {
    /// Some structure edge within the first `k` generations carries weight above `β`.
    WeightAboveBeta { edge: usize },
    /// No cheap prefix has a subtree free of weights above `β`.
    NoQualifyingSubtree,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainPathOutcome<T> {
    pub path: Option<AscendingPath<T>>,
    pub params: MainPathParameters<T>,
    pub failure: Option<MainPathFailure>,
}

/// Finds an ascending path of weight `< δ` by the cheap-prefix / clean-subtree argument.
pub fn main_path_search<T: Real>(
    t: &BinaryPathStructure,
    w: &WeightFunction<T>,
    delta: T,
    p: T,
    a: T,
) -> Result<MainPathOutcome<T>> {
    let params = main_path_parameters(a, delta, t.m, p)?;
    let k = params.k as usize;
    if t.generation_count() < k {
        return Err(Error::DepthExhausted(format!(
            "structure has {} generations, {} required",
            t.generation_count(),
            k
        )));
    }
    let fail = |failure| Ok(MainPathOutcome { path: None, params, failure: Some(failure) });
    let element_values = |node: usize, i: usize| -> Vec<(usize, T)> {
        match w.domain() {
            Domain::Edge => t.nodes[node].child_edges[i].iter().map(|&e| (e, w.get(e))).collect(),
            Domain::Vertex => t.nodes[node].child_paths[i][1..].iter().map(|&x| (x, w.get(x))).collect(),
        }
    };
    for g in &t.generations[..k] {
        for &n in g {
            for i in 0..t.nodes[n].children.len() {
                if let Some(&(e, _)) = element_values(n, i).iter().find(|(_, x)| *x > params.beta) {
                    return fail(MainPathFailure::WeightAboveBeta { edge: e });
                }
            }
        }
    }
    let h = T::lit(2.0) * params.s;
    // Prefix weights to every node of generation k.
    let mut prefix = vec![T::zero(); t.nodes.len()];
    if w.domain() == Domain::Vertex {
        prefix[0] = w.get(t.root);
    }
    for g in &t.generations[..k] {
        for &n in g {
            for i in 0..t.nodes[n].children.len() {
                let c = t.nodes[n].children[i];
                prefix[c] = prefix[n] + segment_cost(t, w, n, i);
            }
        }
    }
    for &n in &t.generations[k] {
        if prefix[n] > h {
            continue;
        }
        let clean = match w.domain() {
            Domain::Edge => t.subtree_edges(n).iter().all(|&e| w.get(e) <= params.beta),
            Domain::Vertex => subtree_vertices(t, n).iter().all(|&x| w.get(x) <= params.beta),
        };
        if !clean {
            continue;
        }
        let tail = ascending_min_path_from(t, w, n);
        let mut head_nodes = vec![n];
        let mut x = n;
        while let Some(pp) = t.nodes[x].parent {
            head_nodes.push(pp);
            x = pp;
        }
        head_nodes.reverse();
        let mut vertices = vec![t.root];
        let mut edges = Vec::new();
        for pair in head_nodes.windows(2) {
            let i = t.nodes[pair[0]].children.iter().position(|&c| c == pair[1]).unwrap();
            vertices.extend_from_slice(&t.nodes[pair[0]].child_paths[i][1..]);
            edges.extend_from_slice(&t.nodes[pair[0]].child_edges[i]);
        }
        vertices.extend_from_slice(&tail.vertices[1..]);
        edges.extend_from_slice(&tail.edges);
        let tail_len = if w.domain() == Domain::Vertex { tail.length - w.get(t.nodes[n].vertex) } else { tail.length };
        let mut nodes = head_nodes;
        nodes.extend_from_slice(&tail.nodes[1..]);
        let path = AscendingPath { vertices, edges, length: prefix[n] + tail_len, nodes };
        return Ok(MainPathOutcome { path: Some(path), params, failure: None });
    }
    fail(MainPathFailure::NoQualifyingSubtree)
}

fn subtree_vertices(t: &BinaryPathStructure, node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        for (i, &c) in t.nodes[n].children.iter().enumerate() {
            out.extend_from_slice(&t.nodes[n].child_paths[i][1..]);
            stack.push(c);
        }
    }
    out
}
