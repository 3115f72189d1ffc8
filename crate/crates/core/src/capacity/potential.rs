//! Admissible weights from potentials.
//!
//! A potential `u` with `u = 0` on the sources and `u = 1` on the targets yields the admissible
//! vertex weight `ρ(v) = max_{w ~ v} (u(w) - u(v))^+` and edge weight `ρ(e) = |u(a) - u(b)|`, by
//! telescoping along any connecting path. Taking `u` to be the distance from the sources under an
//! optimal weight shows the modulus is the minimum of `Σ ρ^p` over potentials; the vertex maximum
//! is smoothed by an `ℓ^r` sum for quasi-Newton descent, with `r` increased in stages.

use std::cell::RefCell;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Domain, Graph};
use crate::scalar::Real;
use crate::weak_norm::WeightFunction;

use super::PathProblem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialOptions {
    /// Smoothing exponents, one quasi-Newton run each.
    pub stages: Vec<i32>,
    /// Iteration cap per stage.
    pub iterations: u64,
    pub memory: usize,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        PotentialOptions { stages: vec![4, 8, 16], iterations: 150, memory: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct PotentialSolution<T> {
    pub weights: WeightFunction<T>,
    /// Potential clamped to `[0, 1]`.
    pub potential: Vec<T>,
    /// `Σ ρ^p` of `weights`.
    pub value: T,
    pub iterations: u64,
}

struct Objective<'a> {
    offsets: &'a [usize],
    nbrs: &'a [u32],
    edges: &'a [(u32, u32)],
    domain: Domain,
    free: &'a [usize],
    base: &'a [f64],
    p: f64,
    r: i32,
    /// Last evaluated point with its value and gradient.
    cache: RefCell<Option<Evaluation>>,
}

type Evaluation = (Vec<f64>, f64, Vec<f64>);

impl Objective<'_> {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        if let Some((cx, c, g)) = self.cache.borrow().as_ref() {
            if cx.as_slice() == x {
                return (*c, g.clone());
            }
        }
        let mut u = self.base.to_vec();
        for (i, &v) in self.free.iter().enumerate() {
            u[v] = x[i];
        }
        let mut grad = vec![0.0; u.len()];
        let mut cost = 0.0;
        let p = self.p;
        match self.domain {
            Domain::Vertex => {
                let r = self.r;
                for v in 0..u.len() {
                    let ns = &self.nbrs[self.offsets[v]..self.offsets[v + 1]];
                    let m = ns.iter().map(|&w| u[w as usize] - u[v]).fold(0.0, f64::max);
                    if m <= 0.0 {
                        continue;
                    }
                    let s: f64 = ns.iter().map(|&w| ((u[w as usize] - u[v]).max(0.0) / m).powi(r)).sum();
                    let rho = m * s.powf(1.0 / r as f64);
                    let rp1 = rho.powf(p - 1.0);
                    cost += rp1 * rho;
                    let c = p * rp1;
                    for &w in ns {
                        let d = u[w as usize] - u[v];
                        if d > 0.0 {
                            let k = c * (d / rho).powi(r - 1);
                            grad[w as usize] += k;
                            grad[v] -= k;
                        }
                    }
                }
            }
            Domain::Edge => {
                for &(a, b) in self.edges {
                    let d = u[b as usize] - u[a as usize];
                    let ad = d.abs();
                    if ad > 0.0 {
                        let dp1 = ad.powf(p - 1.0);
                        cost += dp1 * ad;
                        let k = p * dp1 * d.signum();
                        grad[b as usize] += k;
                        grad[a as usize] -= k;
                    }
                }
            }
        }
        let g: Vec<f64> = self.free.iter().map(|&v| grad[v]).collect();
        *self.cache.borrow_mut() = Some((x.to_vec(), cost, g.clone()));
        (cost, g)
    }
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(x).0)
    }
}

impl Gradient for Objective<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.eval(x).1)
    }
}

/// Exact weights of a potential on `graph`.
pub fn potential_weights<T: Real>(graph: &Graph, u: &[f64], domain: Domain) -> WeightFunction<T> {
    let values: Vec<T> = match domain {
        Domain::Vertex => (0..graph.vertex_count())
            .map(|v| T::lit(graph.neighbors(v).iter().map(|&(w, _)| u[w as usize] - u[v]).fold(0.0, f64::max)))
            .collect(),
        Domain::Edge => graph.edges().map(|(a, b)| T::lit((u[a] - u[b]).abs())).collect(),
    };
    WeightFunction::new(domain, values).expect("nonnegative weights")
}

/// Descends `Σ ρ^p` over potentials from `init` (one value per graph vertex; anchors are reset).
pub fn potential_solve<T: Real>(
    prob: &PathProblem<T>,
    init: &[f64],
    opts: &PotentialOptions,
) -> Result<PotentialSolution<T>> {
    let g = &prob.graph;
    let n = g.vertex_count();
    if init.len() < n {
        return Err(Error::Precondition("initial potential is shorter than the graph".into()));
    }
    let mut base: Vec<f64> = init[..n].iter().map(|x| x.clamp(0.0, 1.0)).collect();
    let mut fixed = vec![false; n];
    for &s in &prob.sources {
        base[s] = 0.0;
        fixed[s] = true;
    }
    for &t in &prob.targets {
        if fixed[t] {
            return Err(Error::Precondition("a vertex is both source and target".into()));
        }
        base[t] = 1.0;
        fixed[t] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&v| !fixed[v]).collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut nbrs = Vec::new();
    offsets.push(0);
    for v in 0..n {
        nbrs.extend(g.neighbors(v).iter().map(|&(w, _)| w));
        offsets.push(nbrs.len());
    }
    let edges: Vec<(u32, u32)> = g.edges().map(|(a, b)| (a as u32, b as u32)).collect();
    let stages: Vec<i32> = if prob.domain == Domain::Edge { vec![1] } else { opts.stages.clone() };
    let mut x: Vec<f64> = free.iter().map(|&v| base[v]).collect();
    let mut iterations = 0;
    for r in stages {
        if free.is_empty() {
            break;
        }
        let obj = Objective {
            offsets: &offsets,
            nbrs: &nbrs,
            edges: &edges,
            domain: prob.domain,
            free: &free,
            base: &base,
            p: prob.p.f64(),
            r,
            cache: RefCell::new(None),
        };
        let solver = LBFGS::new(MoreThuenteLineSearch::new(), opts.memory);
        let res = Executor::new(obj, solver)
            .configure(|s| s.param(x.clone()).max_iters(opts.iterations))
            .run()
            .map_err(|e| Error::Precondition(format!("potential descent failed: {e}")))?;
        iterations += res.state().get_iter();
        if let Some(best) = res.state().get_best_param() {
            x = best.clone();
        }
    }
    for (i, &v) in free.iter().enumerate() {
        base[v] = x[i].clamp(0.0, 1.0);
    }
    let weights: WeightFunction<T> = potential_weights(g, &base, prob.domain);
    let p = prob.p;
    let value = weights.values().iter().map(|&w| w.powf(p)).sum();
    Ok(PotentialSolution { weights, potential: base.iter().map(|&x| T::lit(x)).collect(), value, iterations })
}
