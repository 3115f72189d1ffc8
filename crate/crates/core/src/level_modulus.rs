//! Combinatorial p-modulus on single-level graphs, and the per-level restriction probes.

use serde::Serialize;

use crate::capacity::{check_admissible, modulus_solve_with, PathProblem, SolverOptions};
use crate::error::{Error, Result};
use crate::filling::{kappa_check, level_graph, Filling, KappaCheck, Region, SetPair};
use crate::graph::{Domain, Graph};
use crate::metric_space::MemberIndex;
use crate::scalar::{inv_pow, Real};
use crate::weak_norm::WeightFunction;

/// Modulus of the level-`n` chains joining `{v : U_v ∩ A ≠ ∅}` to `{v : U_v ∩ B ≠ ∅}`.
#[derive(Debug, Clone, Serialize)]
pub struct LevelModulusResult<T> {
    pub level: u32,
    pub p: T,
    pub value: T,
    /// Dual lower bound from the solver.
    pub lower: T,
    pub gap: T,
    pub iterations: usize,
    pub converged: bool,
    /// Global vertex id of each entry of `weights`.
    pub vertices: Vec<usize>,
    #[serde(skip)]
    pub weights: WeightFunction<T>,
    pub sources: usize,
    pub targets: usize,
    /// Both endpoint sets induce connected subgraphs of the level graph.
    pub sets_connected: bool,
    pub kappa: KappaCheck,
    pub delta: T,
}

impl<T: Real> LevelModulusResult<T> {
    /// The minimizer as a weight over every filling vertex, zero off level `n`.
    pub fn lifted(&self, vertex_count: usize) -> WeightFunction<T> {
        let mut v = vec![T::zero(); vertex_count];
        for (i, &g) in self.vertices.iter().enumerate() {
            v[g] = self.weights.get(i);
        }
        WeightFunction::new(Domain::Vertex, v).expect("nonnegative weights")
    }
}

/// Local indices of the level vertices whose ball meets `region`.
fn meeting<T: Real>(filling: &Filling<T>, vertices: &[usize], region: &Region<T>) -> Vec<usize> {
    let space = filling.space();
    let idx = MemberIndex::new(space, region.members());
    vertices
        .iter()
        .enumerate()
        .filter(|(_, &v)| {
            let x = filling.vertex(v);
            idx.any_within(space, x.center, x.radius)
        })
        .map(|(i, _)| i)
        .collect()
}

fn induces_connected(graph: &Graph, set: &[usize]) -> bool {
    let mut inside = vec![false; graph.vertex_count()];
    for &v in set {
        inside[v] = true;
    }
    let reach = graph.bfs_filtered(&set[..1.min(set.len())], |v| inside[v]);
    set.iter().all(|&v| reach[v] != u32::MAX)
}

pub fn mod_p_level<T: Real>(filling: &Filling<T>, pair: &SetPair<T>, p: T, n: u32) -> Result<LevelModulusResult<T>> {
    mod_p_level_with(filling, pair, p, n, &SolverOptions::default())
}

pub fn mod_p_level_with<T: Real>(
    filling: &Filling<T>,
    pair: &SetPair<T>,
    p: T,
    n: u32,
    opts: &SolverOptions,
) -> Result<LevelModulusResult<T>> {
    let scale = inv_pow(filling.s(), n);
    let smaller = pair.a.diam().min(pair.b.diam());
    if scale > smaller {
        return Err(Error::RegionTooSmall { diam: smaller.f64(), depth: n });
    }
    let lg = level_graph(filling, n)?;
    let sources = meeting(filling, &lg.vertices, &pair.a);
    let targets = meeting(filling, &lg.vertices, &pair.b);
    let sets_connected = induces_connected(&lg.graph, &sources) && induces_connected(&lg.graph, &targets);
    let (ns, nt) = (sources.len(), targets.len());
    let prob = PathProblem::new(lg.graph, sources, targets, p, Domain::Vertex)?;
    let sol = modulus_solve_with(&prob, opts)?;
    let check = check_admissible(&prob, &sol.weights)?;
    if !check.admissible {
        return Err(Error::Precondition(format!("level-{n} minimizer failed its admissibility check")));
    }
    Ok(LevelModulusResult {
        level: n,
        p,
        value: sol.value,
        lower: sol.lower,
        gap: sol.gap,
        iterations: sol.iterations,
        converged: sol.converged,
        vertices: lg.vertices,
        weights: sol.weights,
        sources: ns,
        targets: nt,
        sets_connected,
        kappa: kappa_check(filling, n)?,
        delta: pair.delta,
    })
}

/// Smallest and largest level modulus of one pair across the levels that satisfy the scale
/// condition.
#[derive(Debug, Clone, Serialize)]
pub struct ModulusEnvelope<T> {
    pub delta: T,
    pub levels: Vec<u32>,
    pub values: Vec<T>,
    pub min: T,
    pub max: T,
}

pub fn modulus_envelope<T: Real>(
    filling: &Filling<T>,
    pair: &SetPair<T>,
    p: T,
    levels: &[u32],
    opts: &SolverOptions,
) -> Result<ModulusEnvelope<T>> {
    let mut used = Vec::new();
    let mut values = Vec::new();
    for &n in levels {
        match mod_p_level_with(filling, pair, p, n, opts) {
            Ok(r) => {
                used.push(n);
                values.push(r.value);
            }
            Err(Error::RegionTooSmall { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::Precondition("no level satisfies the scale condition".into()));
    }
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(ModulusEnvelope { delta: pair.delta, levels: used, values, min, max })
}

/// `Σ_{ℓ(v) = n} (2 w(v))^q`.
pub fn level_restriction_norm<T: Real>(w: &WeightFunction<T>, filling: &Filling<T>, n: u32, q: T) -> Result<T> {
    if w.domain() != Domain::Vertex || w.len() != filling.vertex_count() {
        return Err(Error::Precondition("expected a vertex weight over the filling".into()));
    }
    if n > filling.max_level() {
        return Ok(T::zero());
    }
    let two = T::lit(2.0);
    Ok(filling.level_range(n).map(|v| w.get(v)).filter(|&x| x > T::zero()).map(|x| (two * x).powf(q)).sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct GoodLevel<T> {
    pub level: u32,
    /// `Σ w^2` over the chosen level.
    pub value: T,
    pub window_mean: T,
    /// Weak quantity of `w` at exponent 2, squared.
    pub weak2: T,
    /// `window_mean / weak2`, zero when `w` vanishes.
    pub constant: T,
    /// `Σ w^2` for each level in `[N', 2N']`.
    pub sums: Vec<T>,
}

/// Level in `[N', 2N']` with the smallest `Σ w^2`, ties going to the smallest level. Edge weights
/// are grouped by their deeper endpoint.
pub fn find_good_level<T: Real>(w: &WeightFunction<T>, filling: &Filling<T>, n_prime: u32) -> Result<GoodLevel<T>> {
    let hi = 2 * n_prime;
    if hi > filling.max_level() {
        return Err(Error::LevelOutOfRange { n: hi, max: filling.max_level() });
    }
    let expected = match w.domain() {
        Domain::Vertex => filling.vertex_count(),
        Domain::Edge => filling.graph().edge_count(),
    };
    if w.len() != expected {
        return Err(Error::Precondition("weight does not match the filling".into()));
    }
    let mut sums = vec![T::zero(); (hi - n_prime + 1) as usize];
    for (i, &x) in w.values().iter().enumerate() {
        let l = match w.domain() {
            Domain::Vertex => filling.level(i),
            Domain::Edge => filling.edge_level(i),
        };
        if (n_prime..=hi).contains(&l) {
            sums[(l - n_prime) as usize] += x * x;
        }
    }
    let mut best = 0;
    for (i, &s) in sums.iter().enumerate() {
        if s < sums[best] {
            best = i;
        }
    }
    let window_mean = sums.iter().copied().sum::<T>() / T::count(sums.len());
    let weak2 = w.weak(T::lit(2.0)).powi(2);
    let constant = if weak2 > T::zero() { window_mean / weak2 } else { T::zero() };
    Ok(GoodLevel { level: n_prime + best as u32, value: sums[best], window_mean, weak2, constant, sums })
}
