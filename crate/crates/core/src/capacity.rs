//! Admissibility checks and two-sided bounds for discrete p-modulus and weak p-capacity.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::filling::{anchors, hull, Filling, Region, SetPair};
use crate::graph::{Domain, Graph};
use crate::metric_space::MemberIndex;
use crate::paths::{distances_to, forward_tree, min_weighted_path, trace, WeightedPath};
use crate::scalar::Real;
use crate::weak_norm::WeightFunction;

mod potential;
pub use potential::{potential_solve, potential_weights, PotentialOptions, PotentialSolution};

/// Minimum path length accepted as `>= 1`.
pub const ADMISSIBLE_TOL: f64 = 1e-9;

/// A finite family of paths: all paths in `graph` from a source vertex to a target vertex.
#[derive(Debug, Clone)]
pub struct PathProblem<T> {
    pub graph: Graph,
    pub sources: Vec<usize>,
    pub targets: Vec<usize>,
    pub p: T,
    pub domain: Domain,
}

impl<T: Real> PathProblem<T> {
    pub fn new(graph: Graph, sources: Vec<usize>, targets: Vec<usize>, p: T, domain: Domain) -> Result<Self> {
        if sources.is_empty() || targets.is_empty() {
            return Err(invalid("endpoints", "source and target sets must be nonempty"));
        }
        let n = graph.vertex_count();
        if sources.iter().chain(&targets).any(|&v| v >= n) {
            return Err(invalid("endpoints", "vertex id out of range"));
        }
        Ok(PathProblem { graph, sources, targets, p, domain })
    }

    /// Number of weighted elements (edges or vertices).
    pub fn element_count(&self) -> usize {
        match self.domain {
            Domain::Edge => self.graph.edge_count(),
            Domain::Vertex => self.graph.vertex_count(),
        }
    }

    fn elements(&self, vertices: &[usize], edges: &[usize]) -> Vec<u32> {
        match self.domain {
            Domain::Edge => edges.iter().map(|&e| e as u32).collect(),
            Domain::Vertex => vertices.iter().map(|&v| v as u32).collect(),
        }
    }
}

/// Paths in levels `<= depth` joining the anchors of `A` to the anchors of `B`.
#[derive(Debug, Clone)]
pub struct TruncatedProblem<T> {
    pub depth: u32,
    pub pair: SetPair<T>,
    pub anchors_a: Vec<usize>,
    pub anchors_b: Vec<usize>,
    pub problem: PathProblem<T>,
}

impl<T: Real> TruncatedProblem<T> {
    pub fn new(filling: &Filling<T>, pair: &SetPair<T>, p: T, depth: u32, domain: Domain) -> Result<Self> {
        let anchors_a = anchors(filling, &pair.a, depth, pair.dist)?;
        let anchors_b = anchors(filling, &pair.b, depth, pair.dist)?;
        if anchors_a.is_empty() || anchors_b.is_empty() {
            return Err(Error::NoAnchors(depth));
        }
        let graph = filling.graph_to_depth(depth);
        let problem = PathProblem::new(graph, anchors_a.clone(), anchors_b.clone(), p, domain)?;
        Ok(TruncatedProblem { depth, pair: pair.clone(), anchors_a, anchors_b, problem })
    }
}

/// Factor `C` in `weak(out)^p <= C · weak(in)^p` for a conversion out of `from` on a graph of
/// maximum degree `degree`.
pub fn conversion_factor<T: Real>(from: Domain, degree: usize, p: T) -> T {
    let d = T::count(degree);
    let two = T::lit(2.0);
    match from {
        Domain::Edge => two * d.powf(p),
        Domain::Vertex => d * two.powf(p),
    }
}

/// Moves weights between domains: a vertex gets the sum over its incident edges, an edge the sum
/// over its two endpoints. Values are clamped to 1 only when `clamp` is set.
pub fn convert_weights<T: Real>(
    w: &WeightFunction<T>,
    graph: &Graph,
    to: Domain,
    clamp: bool,
) -> Result<WeightFunction<T>> {
    if w.domain() == to {
        return Err(invalid("to", "weights are already on the target domain"));
    }
    let values: Vec<T> = match to {
        Domain::Vertex => {
            if w.len() != graph.edge_count() {
                return Err(invalid("weights", "length differs from the edge count"));
            }
            (0..graph.vertex_count())
                .map(|v| graph.neighbors(v).iter().map(|&(_, e)| w.get(e as usize)).sum())
                .collect()
        }
        Domain::Edge => {
            if w.len() != graph.vertex_count() {
                return Err(invalid("weights", "length differs from the vertex count"));
            }
            graph.edges().map(|(a, b)| w.get(a) + w.get(b)).collect()
        }
    };
    let out = WeightFunction::new(to, values)?;
    Ok(if clamp { out.clamped() } else { out })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility<T> {
    pub admissible: bool,
    /// No connecting path exists, so every weight is admissible.
    pub vacuous: bool,
    pub worst: Option<WeightedPath<T>>,
    /// Minimum connecting-path length (infinite when vacuous).
    pub length: T,
}

pub fn check_admissible<T: Real>(prob: &PathProblem<T>, w: &WeightFunction<T>) -> Result<Admissibility<T>> {
    if w.domain() != prob.domain || w.len() != prob.element_count() {
        return Err(invalid("weights", "domain or length does not match the problem"));
    }
    match min_weighted_path(&prob.graph, w, &prob.sources, &prob.targets)? {
        None => Ok(Admissibility { admissible: true, vacuous: true, worst: None, length: T::infinity() }),
        Some(path) => Ok(Admissibility {
            admissible: path.length >= T::one() - T::lit(ADMISSIBLE_TOL),
            vacuous: false,
            length: path.length,
            worst: Some(path),
        }),
    }
}

/// Minimum connecting-path length under `values`, infinite if no path exists.
fn min_length<T: Real>(prob: &PathProblem<T>, values: &[T]) -> T {
    let (d, _) = distances_to(&prob.graph, values, prob.domain, &prob.targets);
    prob.sources.iter().map(|&s| d[s]).fold(T::infinity(), T::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Separation stops once every path has length `>= 1 - tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Violated paths added per separation round.
    pub batch: usize,
    /// Coordinate-ascent sweeps allowed per round.
    pub sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-6, max_iterations: 10_000, batch: 256, sweeps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusSolution<T> {
    /// `Σ w^p` of the returned admissible weights.
    pub value: T,
    /// Dual objective; a lower bound on the modulus.
    pub lower: T,
    pub gap: T,
    pub weights: WeightFunction<T>,
    pub iterations: usize,
    pub active_paths: usize,
    pub converged: bool,
    /// Unit flow `Σ_γ μ_γ 1_γ / Σ_γ μ_γ` of the dual path multipliers, zero when they vanish.
    pub flow: Vec<T>,
}

/// Solves `a_e + t` so that `Σ ((a_e + t)/p)^q = 1`, `t >= 0`.
fn coordinate_step<T: Real>(a: &[T], p: T, q: T, start: T) -> T {
    let len = |t: T| -> T { a.iter().map(|&x| ((x + t) / p).powf(q)).sum::<T>() - T::one() };
    if len(T::zero()) >= T::zero() {
        return T::zero();
    }
    let mut lo = T::zero();
    let mut hi = p * T::count(a.len()).powf(T::one() - p);
    let mut t = if start > lo && start < hi { start } else { (lo + hi) / T::lit(2.0) };
    for _ in 0..100 {
        let f = len(t);
        if f == T::zero() {
            return t;
        }
        if f < T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        let df: T = a.iter().map(|&x| q / p * ((x + t) / p).powf(q - T::one())).sum();
        let nt = t - f / df;
        t = if df.is_finite() && df > T::zero() && nt > lo && nt < hi { nt } else { (lo + hi) / T::lit(2.0) };
        if hi - lo <= T::epsilon() * hi * T::lit(4.0) {
            break;
        }
    }
    t
}

/// Minimizes `Σ w^p` over admissible weights by constraint generation with dual coordinate ascent.
///
/// Returns the solution even when the iteration cap is hit; its weights are always rescaled to
/// be admissible.
pub fn modulus_solve_with<T: Real>(prob: &PathProblem<T>, opts: &SolverOptions) -> Result<ModulusSolution<T>> {
    let p = prob.p;
    if !(p > T::one()) {
        return Err(invalid("p", "modulus needs p > 1"));
    }
    let m = prob.element_count();
    let ones = vec![T::one(); m];
    let Some(first) = crate::paths::lex_min_path(&prob.graph, &ones, prob.domain, &prob.sources, &prob.targets) else {
        return Ok(ModulusSolution {
            value: T::zero(),
            lower: T::zero(),
            gap: T::zero(),
            weights: WeightFunction::zeros(prob.domain, m),
            iterations: 0,
            active_paths: 0,
            converged: true,
            flow: vec![T::zero(); m],
        });
    };
    let first = prob.elements(&first.vertices, &first.edges);
    let hop = T::count(first.len());
    if first.is_empty() {
        return Err(Error::Unrealizable(0.0));
    }
    let q = T::one() / (p - T::one());
    let tol = T::lit(opts.tolerance);
    let inner_tol = tol * T::lit(1e-3);
    let mut active: Vec<Vec<u32>> = vec![first.clone()];
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    seen.insert({
        let mut f = first.clone();
        f.sort_unstable();
        f
    });
    let mut mu = vec![T::zero()];
    let mut c = vec![T::zero(); m];
    let mut w = vec![T::zero(); m];
    let mut iterations = 0;
    let mut converged = false;
    let mut scratch = Vec::new();
    let mut last_min = T::zero();

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut settled = false;
        // Cheap sweeps while the oracle still finds badly violated paths.
        let budget = if last_min < T::lit(0.9) { opts.sweeps.min(3) } else { opts.sweeps };
        for _ in 0..budget {
            let mut worst = T::zero();
            for (i, path) in active.iter().enumerate() {
                scratch.clear();
                let mut len = T::zero();
                for &e in path {
                    let e = e as usize;
                    len += w[e];
                    scratch.push((c[e] - mu[i]).max(T::zero()));
                }
                let viol = if mu[i] > T::zero() { (len - T::one()).abs() } else { (T::one() - len).max(T::zero()) };
                worst = worst.max(viol);
                if viol <= inner_tol * T::lit(0.1) {
                    continue;
                }
                let t = coordinate_step(&scratch, p, q, mu[i]);
                for (k, &e) in path.iter().enumerate() {
                    let e = e as usize;
                    c[e] = scratch[k] + t;
                    w[e] = (c[e] / p).powf(q);
                }
                mu[i] = t;
            }
            if worst <= inner_tol {
                settled = true;
                break;
            }
        }
        let cutoff = T::one() - tol;
        let (ds, ps) = forward_tree(&prob.graph, &w, prob.domain, &prob.sources, cutoff);
        let (dt, pt) = forward_tree(&prob.graph, &w, prob.domain, &prob.targets, cutoff);
        // Shortest connecting walk through each vertex.
        let through = |x: usize| {
            let own = if prob.domain == Domain::Vertex { w[x] } else { T::zero() };
            ds[x] + dt[x] - own
        };
        let mut violated: Vec<(T, usize)> = (0..prob.graph.vertex_count())
            .filter(|&x| ds[x] < cutoff && dt[x] < cutoff)
            .map(|x| (through(x), x))
            .filter(|&(l, _)| l < cutoff)
            .collect();
        last_min = violated.iter().map(|v| v.0).fold(T::one(), T::min);
        if violated.is_empty() {
            if settled {
                converged = true;
                break;
            }
            continue;
        }
        violated.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut added = 0;
        for (_, x) in violated {
            let (mut vs, mut es) = trace(&ps, x);
            let (vt, et) = trace(&pt, x);
            vs.extend(vt.iter().rev().skip(1));
            es.extend(et.iter().rev());
            let el = prob.elements(&vs, &es);
            if el.is_empty() {
                return Err(Error::Unrealizable(0.0));
            }
            let mut sorted = el.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() == el.len() && seen.insert(sorted) {
                active.push(el);
                mu.push(T::zero());
                added += 1;
                if added == opts.batch {
                    break;
                }
            }
        }
        if added == 0 && settled {
            converged = true;
            break;
        }
    }
    let lower = mu.iter().copied().sum::<T>() - (p - T::one()) * c.iter().map(|&x| (x / p).powf(p * q)).sum::<T>();
    let mut minlen = min_length(prob, &w);
    if minlen < T::lit(0.5) {
        // Unfinished run: pad with the uniform hop witness so that every path reaches length 1.
        let pad = (T::one() - minlen) / hop;
        for x in &mut w {
            *x += pad;
        }
        minlen = min_length(prob, &w);
    }
    for x in &mut w {
        *x /= minlen;
    }
    let value: T = w.iter().map(|&x| x.powf(p)).sum();
    let total: T = mu.iter().copied().sum();
    let mut flow = vec![T::zero(); m];
    if total > T::zero() {
        for (path, &t) in active.iter().zip(&mu) {
            for &e in path {
                flow[e as usize] += t / total;
            }
        }
    }
    Ok(ModulusSolution {
        value,
        lower: lower.max(T::zero()),
        gap: (value - lower).max(T::zero()),
        weights: WeightFunction::new(prob.domain, w)?,
        iterations,
        active_paths: active.len(),
        converged,
        flow,
    })
}

/// [`modulus_solve_with`] at default options, failing when the iteration cap is reached.
pub fn modulus_solve<T: Real>(prob: &PathProblem<T>) -> Result<ModulusSolution<T>> {
    let sol = modulus_solve_with(prob, &SolverOptions::default())?;
    if !sol.converged {
        return Err(Error::NoConvergence { iterations: sol.iterations, gap: sol.gap.f64() });
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GWeights<T> {
    pub weights: WeightFunction<T>,
    /// `D = dist(A, B)`.
    pub dist: T,
    /// Support annulus `[D/4, 3D/4]` in distance to the smaller set.
    pub annulus: (T, T),
    /// Whether the roles of `A` and `B` were exchanged so that the first set is the smaller.
    pub swapped: bool,
}

/// Vertex weights `min(1, (2+s)/ln 3 · r_v / max(θ(z_v, A), D/4))` on `θ(z_v, A) <= 3D/4`, with `A`
/// the set of smaller diameter.
pub fn g_function<T: Real>(filling: &Filling<T>, pair: &SetPair<T>) -> Result<GWeights<T>> {
    let swapped = pair.b.diam() < pair.a.diam();
    let a = if swapped { &pair.b } else { &pair.a };
    let space = filling.space();
    let d = pair.dist;
    let quarter = d / T::lit(4.0);
    let outer = T::lit(3.0) * quarter;
    let scale = (T::lit(2.0) + filling.s()) / T::lit(3.0).ln();
    let idx = MemberIndex::new(space, a.members());
    let values: Vec<T> = filling
        .vertices()
        .iter()
        .map(|v| match idx.distance_within(space, v.center, outer) {
            Some(theta) => (scale * v.radius / theta.max(quarter)).min(T::one()),
            None => T::zero(),
        })
        .collect();
    Ok(GWeights { weights: WeightFunction::new(Domain::Vertex, values)?, dist: d, annulus: (quarter, outer), swapped })
}

/// Package counts and the ratio between consecutive concentric radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RingParams {
    pub n1: usize,
    pub n2: usize,
    pub shell_ratio: f64,
}

impl Default for RingParams {
    fn default() -> Self {
        RingParams { n1: 1, n2: 1, shell_ratio: 30.0 }
    }
}

impl RingParams {
    /// Smallest `n1` with `2^p φ1 / n1^{p-1} < ε` and smallest `n2 > 2(φ1²/β² + 2)`.
    pub fn for_target(p: f64, epsilon: f64, phi1: f64, beta: f64, shell_ratio: f64) -> Result<Self> {
        if !(p > 1.0 && epsilon > 0.0 && phi1 > 0.0 && beta > 0.0) {
            return Err(invalid("epsilon", "need p > 1 and positive epsilon, phi1, beta"));
        }
        let mut n1 = 1usize;
        while 2f64.powf(p) * phi1 / (n1 as f64).powf(p - 1.0) >= epsilon {
            n1 += 1;
            if n1 > 1 << 40 {
                return Err(invalid("epsilon", "package count overflows"));
            }
        }
        let n2 = (2.0 * (phi1 * phi1 / (beta * beta) + 2.0)).floor() as usize + 1;
        Ok(RingParams { n1, n2, shell_ratio })
    }

    /// Number of concentric shells, `N = n1 (2 n2 + 2)`.
    pub fn shells(&self) -> usize {
        self.n1 * (2 * self.n2 + 2)
    }

    /// Relative distance guaranteed between `10 B_k` and the complement of `B_{k+1}`.
    pub fn c1(&self) -> f64 {
        self.shell_ratio / 20.0 - 0.5
    }

    /// Relative distance of the pair that makes the construction possible.
    pub fn threshold(&self) -> f64 {
        self.shell_ratio.powi(self.shells() as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingPackage<T> {
    pub weights: WeightFunction<T>,
    pub params: RingParams,
    /// Concentric radii `r_0 .. r_N` around `center`.
    pub radii: Vec<T>,
    pub center: usize,
    /// Largest weak quantity `^p` over the pieces.
    pub phi_hat: T,
    /// `2^p φ̂ / n1^{p-1}`, an upper bound for the weak quantity `^p` of the result.
    pub bound: T,
    /// Whether every nonzero weight lies in the hull of the outermost ball.
    pub support_ok: bool,
}

/// `2^p φ / n1^{p-1}`.
pub fn ring_package_bound<T: Real>(phi: T, n1: usize, p: T) -> T {
    T::lit(2.0).powf(p) * phi / T::count(n1).powf(p - T::one())
}

/// Averages `n1` disjointly supported admissible pieces built on a family of concentric shells
/// around a point of the smaller set.
pub fn ring_package<T: Real>(
    filling: &Filling<T>,
    pair: &SetPair<T>,
    p: T,
    params: &RingParams,
) -> Result<RingPackage<T>> {
    if params.n1 == 0 || params.n2 == 0 {
        return Err(invalid("n1", "package counts must be positive"));
    }
    if !(params.shell_ratio > 10.0) {
        return Err(invalid("shell_ratio", "must exceed 10 so that 10B_k misses the next complement"));
    }
    let (small, large) = if pair.b.diam() <= pair.a.diam() { (&pair.b, &pair.a) } else { (&pair.a, &pair.b) };
    let space = filling.space();
    let big_n = params.shells();
    let required = params.threshold();
    let not_met = || Error::ThresholdNotMet { required, actual: pair.delta.f64() };
    if pair.delta.f64() < required {
        return Err(not_met());
    }
    let center = small.members()[0];
    let ratio = T::lit(params.shell_ratio);
    let mut radii = vec![small.diam() * T::lit(1.0 + 1e-9)];
    for k in 0..big_n {
        radii.push(radii[k] * ratio);
    }
    let r_n = radii[big_n];
    if large.members().iter().any(|&x| space.dist(center, x) < r_n) {
        return Err(not_met());
    }
    if r_n >= crate::filling::ring_radius_limit(space, center) {
        return Err(Error::RadiusTooLarge {
            r2: r_n.f64(),
            r_max: crate::filling::ring_radius_limit(space, center).f64(),
        });
    }
    let hulls: Vec<_> =
        radii.iter().map(|&r| hull(filling, &Region::ball(space, center, r)?)).collect::<Result<_>>()?;
    let two = T::lit(2.0);
    let n1 = T::count(params.n1);
    let mut values = vec![T::zero(); filling.vertex_count()];
    let mut phi_hat = T::zero();
    for i in 0..params.n1 {
        let q = i * (2 * params.n2 + 2);
        let m = q + params.n2;
        let e = Region::ball(space, center, T::lit(10.0) * radii[m])?;
        let f = Region::outside_closed_ball(space, center, radii[m + 1])?;
        let sub = SetPair::new(space, e, f)?;
        let tau = g_function(filling, &sub)?.weights;
        let (lo, hi) = (&hulls[q], &hulls[q + 2 * params.n2 + 2]);
        let piece: Vec<T> = (0..filling.vertex_count())
            .map(|v| if hi.contains(v) && !lo.contains(v) { tau.get(v) } else { T::zero() })
            .collect();
        phi_hat =
            phi_hat.max(crate::weak_norm::weak_quantity_of(&piece, p, crate::weak_norm::WeakMode::Sorted)?.powf(p));
        for (v, x) in piece.into_iter().enumerate() {
            if x > T::zero() {
                values[v] = two * x / n1;
            }
        }
    }
    let weights = WeightFunction::new(Domain::Vertex, values)?;
    let bound = ring_package_bound(phi_hat, params.n1, p);
    debug_assert!(weights.weak(p).powf(p) <= bound * T::lit(1.0 + 1e-9) + T::lit(1e-12));
    let outer = &hulls[big_n];
    let support_ok = (0..weights.len()).all(|v| weights.get(v) == T::zero() || outer.contains(v));
    Ok(RingPackage { weights, params: *params, radii, center, phi_hat, bound, support_ok })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisjointLower<T> {
    pub value: T,
    /// Element counts of the extracted disjoint paths, in extraction order.
    pub lengths: Vec<usize>,
}

/// Hop-shortest path avoiding `used` elements, as `(vertices, edges)`.
fn disjoint_bfs<T>(prob: &PathProblem<T>, used: &[bool]) -> Option<(Vec<usize>, Vec<usize>)> {
    let g = &prob.graph;
    let n = g.vertex_count();
    let vertex = prob.domain == Domain::Vertex;
    let mut parent = vec![(u32::MAX, u32::MAX); n];
    let mut seen = vec![false; n];
    let mut is_target = vec![false; n];
    for &t in &prob.targets {
        is_target[t] = true;
    }
    let mut queue = VecDeque::new();
    for &s in &prob.sources {
        if !(vertex && used[s]) && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(x) = queue.pop_front() {
        if is_target[x] {
            return Some(trace(&parent, x));
        }
        for &(u, e) in g.neighbors(x) {
            let ui = u as usize;
            let blocked = if vertex { used[ui] } else { used[e as usize] };
            if !seen[ui] && !blocked {
                seen[ui] = true;
                parent[ui] = (x as u32, e);
                queue.push_back(ui);
            }
        }
    }
    None
}

/// Lower bound on the weak quantity `^p` of every admissible weight, from greedily extracted
/// element-disjoint connecting paths.
///
/// With `k` disjoint paths of at most `L` elements, `k` elements carry weight `>= 1/L`; with `M`
/// elements in total, `k <= W · Σ_{j<=M} j^{-1/p}` for the weak quantity `W`.
pub fn disjoint_path_lower<T: Real>(prob: &PathProblem<T>) -> DisjointLower<T> {
    const CAP: usize = 4096;
    let mut used = vec![false; prob.element_count()];
    let mut lengths = Vec::new();
    while lengths.len() < CAP {
        let Some((vs, es)) = disjoint_bfs(prob, &used) else { break };
        let el = prob.elements(&vs, &es);
        if el.is_empty() {
            break;
        }
        for &e in &el {
            used[e as usize] = true;
        }
        lengths.push(el.len());
    }
    let p = prob.p;
    let inv = T::one() / p;
    let mut best = T::zero();
    let mut longest = 0;
    let mut total = 0usize;
    let mut harmonic = T::zero();
    for (k, &l) in lengths.iter().enumerate() {
        let k1 = T::count(k + 1);
        longest = longest.max(l);
        for j in total + 1..=total + l {
            harmonic += T::count(j).powf(-inv);
        }
        total += l;
        best = best.max(k1 / T::count(longest).powf(p));
        best = best.max((k1 / harmonic).powf(p));
    }
    DisjointLower { value: best, lengths }
}

/// Lower bound on the weak quantity `^p` of every admissible weight, from a unit flow `F` (a
/// convex combination of connecting paths): `Σ F ρ >= 1` and rearrangement give
/// `weak(ρ)^p >= (Σ_k F*_k k^{-1/p})^{-p}`.
pub fn flow_lower<T: Real>(flow: &[T], p: T) -> T {
    let mut f: Vec<T> = flow.iter().copied().filter(|&x| x > T::zero()).collect();
    if f.is_empty() {
        return T::zero();
    }
    f.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let inv = T::one() / p;
    let s: T = f.iter().enumerate().map(|(k, &x)| x * T::count(k + 1).powf(-inv)).sum();
    s.powf(-p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateOptions<T> {
    pub domain: Domain,
    pub solver: SolverOptions,
    /// Exponent offset of the extra ℓ^q candidate; `None` skips it.
    pub lq_offset: Option<f64>,
    pub ring: Option<RingParams>,
    /// Potential descent started from the relative-distance potential; `None` skips it.
    pub potential: Option<PotentialOptions>,
    /// Further candidate weights (over all filling vertices, or edges in the edge domain).
    pub extra: Vec<(String, WeightFunction<T>)>,
}

impl<T> Default for EstimateOptions<T> {
    fn default() -> Self {
        EstimateOptions {
            domain: Domain::Vertex,
            solver: SolverOptions { max_iterations: 40, ..SolverOptions::default() },
            lq_offset: Some(0.5),
            ring: Some(RingParams::default()),
            potential: Some(PotentialOptions::default()),
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate<T> {
    pub method: String,
    /// Weak quantity `^p` after rescaling to admissible; infinite if the weight cannot be rescaled.
    pub upper: T,
}

/// A bracket `[lower, upper]` for the weak p-capacity of a pair at one truncation depth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityEstimate<T> {
    pub p: T,
    pub depth: u32,
    pub upper: T,
    pub lower: T,
    #[serde(skip)]
    pub upper_witness: WeightFunction<T>,
    pub upper_method: String,
    pub lower_method: String,
    pub candidates: Vec<Candidate<T>>,
    pub iterations: usize,
    pub gap: T,
    pub tolerance: f64,
    /// No connecting path exists at this depth.
    pub vacuous: bool,
}

/// `w / minlen` clamped to `[0, 1]`, or `None` when some connecting path has zero weight.
pub fn rescale_admissible<T: Real>(prob: &PathProblem<T>, w: &WeightFunction<T>) -> Option<WeightFunction<T>> {
    let minlen = min_length(prob, w.values());
    if !(minlen > T::zero()) {
        return None;
    }
    if !minlen.is_finite() {
        return Some(WeightFunction::zeros(w.domain(), w.len()));
    }
    let mut out = w.scaled(T::one() / minlen).ok()?.clamped();
    // Guard against rounding leaving the minimum a hair below 1.
    let again = min_length(prob, out.values());
    if again < T::one() {
        for x in out.values_mut() {
            *x = (*x / again).min(T::one());
        }
    }
    Some(out)
}

pub fn wcap_estimate<T: Real>(
    filling: &Filling<T>,
    pair: &SetPair<T>,
    p: T,
    depth: u32,
    opts: &EstimateOptions<T>,
) -> Result<CapacityEstimate<T>> {
    let tp = TruncatedProblem::new(filling, pair, p, depth, opts.domain)?;
    let prob = &tp.problem;
    let m = prob.element_count();
    // Candidates are built over all filling vertices; weights below the truncation are dropped.
    let keep = filling.level_range(depth).end;
    let to_domain = |w: WeightFunction<T>| -> Result<WeightFunction<T>> {
        let mut v = w.into_values();
        v.truncate(filling.vertex_count());
        for x in &mut v[keep..] {
            *x = T::zero();
        }
        let w = WeightFunction::new(Domain::Vertex, v)?;
        if opts.domain == Domain::Vertex {
            Ok(w)
        } else {
            convert_weights(&w, &prob.graph, Domain::Edge, true)
        }
    };
    let mut raw: Vec<(String, WeightFunction<T>)> = Vec::new();
    let sol = modulus_solve_with(prob, &opts.solver)?;
    let mut iterations = sol.iterations;
    let gap = sol.gap;
    if min_length(prob, &vec![T::one(); m]).is_infinite() {
        return Ok(CapacityEstimate {
            p,
            depth,
            upper: T::zero(),
            lower: T::zero(),
            upper_witness: WeightFunction::zeros(opts.domain, m),
            upper_method: "vacuous".into(),
            lower_method: "vacuous".into(),
            candidates: Vec::new(),
            iterations,
            gap,
            tolerance: opts.solver.tolerance,
            vacuous: true,
        });
    }
    let mut flows = vec![("modulus_flow".to_string(), sol.flow)];
    raw.push(("modulus".into(), sol.weights));
    raw.push(("g".into(), to_domain(g_function(filling, pair)?.weights)?));
    if let Some(rp) = &opts.ring {
        if let Ok(pkg) = ring_package(filling, pair, p, rp) {
            raw.push(("ring".into(), to_domain(pkg.weights)?));
        }
    }
    if let Some(po) = &opts.potential {
        let init = relative_potential(filling, pair);
        let ps = potential_solve(prob, &init, po)?;
        raw.push(("potential".into(), ps.weights));
    }
    if let Some(off) = opts.lq_offset {
        let mut shifted = prob.clone();
        shifted.p = p + T::lit(off);
        let s2 = modulus_solve_with(&shifted, &opts.solver)?;
        iterations += s2.iterations;
        flows.push((format!("lq{}_flow", shifted.p), s2.flow));
        raw.push((format!("lq{}", shifted.p), s2.weights));
    }
    for (name, w) in &opts.extra {
        if w.len() != m || w.domain() != opts.domain {
            return Err(invalid("extra", format!("candidate {name} does not match the problem")));
        }
        raw.push((name.clone(), w.clone()));
    }
    let mut candidates = Vec::new();
    let mut best: Option<(T, String, WeightFunction<T>)> = None;
    for (name, w) in raw {
        let (upper, scaled) = match rescale_admissible(prob, &w) {
            Some(s) => (s.weak(p).powf(p), Some(s)),
            None => (T::infinity(), None),
        };
        candidates.push(Candidate { method: name.clone(), upper });
        if let Some(s) = scaled {
            if best.as_ref().is_none_or(|(b, _, _)| upper < *b) {
                best = Some((upper, name, s));
            }
        }
    }
    let (upper, upper_method, upper_witness) =
        best.ok_or_else(|| Error::Precondition("no candidate could be made admissible".into()))?;
    let mut lower = disjoint_path_lower(prob).value;
    let mut lower_method = "disjoint_paths".to_string();
    for (name, fl) in &flows {
        let l = flow_lower(fl, p);
        if l > lower {
            lower = l;
            lower_method = name.clone();
        }
    }
    Ok(CapacityEstimate {
        p,
        depth,
        upper,
        lower,
        upper_witness,
        upper_method,
        lower_method,
        candidates,
        iterations,
        gap,
        tolerance: opts.solver.tolerance,
        vacuous: false,
    })
}

/// `θ(z_v, A) / (θ(z_v, A) + θ(z_v, B))` at every filling vertex.
pub fn relative_potential<T: Real>(filling: &Filling<T>, pair: &SetPair<T>) -> Vec<f64> {
    let space = filling.space();
    let ia = MemberIndex::new(space, pair.a.members());
    let ib = MemberIndex::new(space, pair.b.members());
    filling
        .vertices()
        .iter()
        .map(|v| {
            let a: f64 = ia.distance(space, v.center).f64();
            let b: f64 = ib.distance(space, v.center).f64();
            if a + b > 0.0 {
                a / (a + b)
            } else {
                0.5
            }
        })
        .collect()
}

/// Maximum of two witnesses, admissible for the union of the first sets.
pub fn union_witness<T: Real>(a: &WeightFunction<T>, b: &WeightFunction<T>) -> WeightFunction<T> {
    a.pointwise_max(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filling::build_filling;
    use crate::metric_space::{make_model_space, ParamMap, SpaceKind};
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn simple_paths(prob: &PathProblem<f64>, cap: usize) -> Option<Vec<Vec<u32>>> {
        let g = &prob.graph;
        let mut out = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        let mut edges: Vec<usize> = Vec::new();
        let mut on = vec![false; g.vertex_count()];
        fn rec(
            prob: &PathProblem<f64>,
            u: usize,
            stack: &mut Vec<usize>,
            edges: &mut Vec<usize>,
            on: &mut Vec<bool>,
            out: &mut Vec<Vec<u32>>,
            cap: usize,
        ) -> bool {
            if prob.targets.contains(&u) {
                out.push(prob.elements(stack, edges));
                return out.len() <= cap;
            }
            for &(x, e) in prob.graph.neighbors(u) {
                let x = x as usize;
                if !on[x] {
                    on[x] = true;
                    stack.push(x);
                    edges.push(e as usize);
                    let ok = rec(prob, x, stack, edges, on, out, cap);
                    stack.pop();
                    edges.pop();
                    on[x] = false;
                    if !ok {
                        return false;
                    }
                }
            }
            true
        }
        for &s in &prob.sources {
            on[s] = true;
            stack.push(s);
            if !rec(prob, s, &mut stack, &mut edges, &mut on, &mut out, cap) {
                return None;
            }
            stack.pop();
            on[s] = false;
        }
        Some(out)
    }

    /// Exhaustive convex program over all simple paths, solved with an interior-point method.
    fn oracle(prob: &PathProblem<f64>, paths: &[Vec<u32>]) -> f64 {
        let m = prob.element_count();
        let mut trip = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut row = 0;
        let mut push = |r: usize, c: usize, v: f64| {
            trip.0.push(r);
            trip.1.push(c);
            trip.2.push(v);
        };
        for e in 0..m {
            push(row, e, -1.0);
            push(row + 2, m + e, -1.0);
            b.extend_from_slice(&[0.0, 1.0, 0.0]);
            cones.push(SupportedConeT::PowerConeT(1.0 / prob.p));
            row += 3;
        }
        for path in paths {
            for &e in path {
                push(row, m + e as usize, -1.0);
            }
            b.push(-1.0);
            row += 1;
        }
        for e in 0..m {
            push(row, m + e, -1.0);
            b.push(0.0);
            row += 1;
        }
        cones.push(SupportedConeT::NonnegativeConeT(paths.len() + m));
        let a = CscMatrix::new_from_triplets(row, 2 * m, trip.0, trip.1, trip.2);
        let pm = CscMatrix::zeros((2 * m, 2 * m));
        let mut qv = vec![1.0; m];
        qv.extend(vec![0.0; m]);
        let settings =
            DefaultSettings { verbose: false, tol_gap_abs: 1e-10, tol_gap_rel: 1e-10, ..DefaultSettings::default() };
        let mut solver = DefaultSolver::new(&pm, &qv, &a, &b, &cones, settings).unwrap();
        solver.solve();
        assert!(matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved));
        solver.solution.obj_val
    }

    #[test]
    fn solver_matches_exhaustive_program() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 30 {
            let n = rng.gen_range(3..=10);
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if rng.gen_bool(0.35) {
                        edges.push((a, b));
                    }
                }
            }
            let g = Graph::from_edges(n, &edges);
            let p = [1.5, 2.0, 3.0][checked % 3];
            let domain = if checked % 2 == 0 { Domain::Vertex } else { Domain::Edge };
            let prob = PathProblem::new(g, vec![0], vec![n - 1], p, domain).unwrap();
            let Some(paths) = simple_paths(&prob, 400) else { continue };
            if paths.is_empty() || prob.element_count() == 0 {
                continue;
            }
            let sol = modulus_solve(&prob).unwrap();
            let want = oracle(&prob, &paths);
            assert!((sol.value - want).abs() <= 1e-4 * want, "{} vs {want}", sol.value);
            assert!(check_admissible(&prob, &sol.weights).unwrap().admissible);
            assert!(sol.lower <= sol.value + 1e-9);
            checked += 1;
        }
    }

    fn path_graph(n: usize) -> Graph {
        Graph::from_edges(n + 1, &(0..n).map(|i| (i, i + 1)).collect::<Vec<_>>())
    }

    #[test]
    fn closed_forms() {
        for &p in &[1.5, 2.0, 4.0] {
            let n = 5;
            let prob = PathProblem::new(path_graph(n), vec![0], vec![n], p, Domain::Edge).unwrap();
            let sol = modulus_solve(&prob).unwrap();
            assert!((sol.value - (n as f64).powf(1.0 - p)).abs() < 1e-6);
            for &x in sol.weights.values() {
                assert!((x - 0.2).abs() < 1e-6);
            }
            // k parallel paths of n edges between a shared source and target.
            let k = 3;
            let mut edges = Vec::new();
            let mut next = 2;
            for _ in 0..k {
                let mut prev = 0;
                for _ in 0..n - 1 {
                    edges.push((prev, next));
                    prev = next;
                    next += 1;
                }
                edges.push((prev, 1));
            }
            let prob = PathProblem::new(Graph::from_edges(next, &edges), vec![0], vec![1], p, Domain::Edge).unwrap();
            let sol = modulus_solve(&prob).unwrap();
            let want = k as f64 * (n as f64).powf(1.0 - p);
            assert!((sol.value - want).abs() < 1e-6 * want);
            let low = disjoint_path_lower(&prob);
            assert_eq!(low.lengths, vec![n; k]);
            assert!(low.value <= want);
        }
    }

    #[test]
    fn disconnected_is_zero() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]);
        let prob = PathProblem::new(g, vec![0], vec![3], 2.0, Domain::Vertex).unwrap();
        let sol = modulus_solve(&prob).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(disjoint_path_lower(&prob).value, 0.0);
        assert!(check_admissible(&prob, &sol.weights).unwrap().vacuous);
    }

    #[test]
    fn admissibility_checks() {
        let prob = PathProblem::new(path_graph(4), vec![0], vec![4], 2.0, Domain::Vertex).unwrap();
        assert!(check_admissible(&prob, &WeightFunction::constant(Domain::Vertex, 5, 1.0)).unwrap().admissible);
        let z = check_admissible(&prob, &WeightFunction::zeros(Domain::Vertex, 5)).unwrap();
        assert!(!z.admissible && z.length == 0.0);
        let eprob = PathProblem::new(path_graph(4), vec![0], vec![4], 2.0, Domain::Edge).unwrap();
        let edge = check_admissible(&eprob, &WeightFunction::constant(Domain::Edge, 4, 0.25)).unwrap();
        assert!(edge.admissible && edge.length == 1.0);
        let low = disjoint_path_lower(&eprob);
        let want = 4f64.powi(-2).max((1.0 / (1.0 + 2f64.powf(-0.5) + 3f64.powf(-0.5) + 0.5)).powi(2));
        assert!((low.value - want).abs() < 1e-12);
    }

    #[test]
    fn conversion_bounds() {
        let g = path_graph(1);
        let w = WeightFunction::new(Domain::Edge, vec![1.0]).unwrap();
        assert_eq!(convert_weights(&w, &g, Domain::Vertex, false).unwrap().values(), &[1.0, 1.0]);
        let mut p = ParamMap::new();
        p.insert("h".into(), 1.0 / 64.0);
        let f = build_filling(Arc::new(make_model_space::<f64>(SpaceKind::Square, &p).unwrap()), 2.0, 4).unwrap();
        let d = f.max_degree();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let p = 1.5 + trial as f64 * 0.05;
            let e = WeightFunction::new(
                Domain::Edge,
                (0..f.graph().edge_count()).map(|_| rng.gen::<f64>().powi(8)).collect(),
            )
            .unwrap();
            let v = convert_weights(&e, f.graph(), Domain::Vertex, false).unwrap();
            assert!(v.weak(p).powf(p) <= conversion_factor(Domain::Edge, d, p) * e.weak(p).powf(p) * (1.0 + 1e-12));
            let back = convert_weights(&v, f.graph(), Domain::Edge, false).unwrap();
            assert!(
                back.weak(p).powf(p) <= conversion_factor(Domain::Vertex, d, p) * v.weak(p).powf(p) * (1.0 + 1e-12)
            );
        }
    }

    #[test]
    fn converted_witness_stays_admissible() {
        let mut p = ParamMap::new();
        p.insert("h".into(), 1.0 / 256.0);
        let sp = make_model_space::<f64>(SpaceKind::Interval, &p).unwrap();
        let a = Region::ball(&sp, 0, 0.1).unwrap();
        let b = Region::ball(&sp, sp.len() - 1, 0.1).unwrap();
        let f = build_filling(Arc::new(sp), 2.0, 6).unwrap();
        let pair = SetPair::new(f.space(), a, b).unwrap();
        let et = TruncatedProblem::new(&f, &pair, 2.0, 6, Domain::Edge).unwrap();
        let sol = modulus_solve(&et.problem).unwrap();
        let vt = TruncatedProblem::new(&f, &pair, 2.0, 6, Domain::Vertex).unwrap();
        let conv = convert_weights(&sol.weights, &vt.problem.graph, Domain::Vertex, false).unwrap();
        assert!(check_admissible(&vt.problem, &conv).unwrap().admissible);
    }
}
