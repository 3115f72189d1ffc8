//! ℓ^p norms, the weak ℓ^{p,∞} quantity and the flattening transform for weight functions.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::filling::Filling;
pub use crate::graph::Domain;
use crate::scalar::Real;

/// Values at or above `1 - UNIT_TOL` count as equal to 1.
const UNIT_TOL: f64 = 1e-12;

/// Nonnegative weights indexed by edge id or vertex id.
///
/// Values are finite and nonnegative; most constructions keep them in `[0, 1]`, which
/// [`WeightFunction::is_unit_bounded`] reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightFunction<T> {
    domain: Domain,
    values: Vec<T>,
}

impl<T: Real> WeightFunction<T> {
    pub fn new(domain: Domain, values: Vec<T>) -> Result<Self> {
        if let Some(x) = values.iter().find(|x| !(x.is_finite() && **x >= T::zero())) {
            return Err(invalid("weights", format!("value {x} is not finite and nonnegative")));
        }
        Ok(WeightFunction { domain, values })
    }

    pub fn zeros(domain: Domain, len: usize) -> Self {
        WeightFunction { domain, values: vec![T::zero(); len] }
    }

    pub fn constant(domain: Domain, len: usize, c: T) -> Self {
        assert!(c >= T::zero() && c.is_finite());
        WeightFunction { domain, values: vec![c; len] }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> T {
        self.values[i]
    }

    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&x| x > T::zero()).count()
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    pub fn is_unit_bounded(&self) -> bool {
        self.values.iter().all(|&x| x <= T::one())
    }

    /// `min(w, 1)` pointwise.
    pub fn clamped(&self) -> Self {
        WeightFunction { domain: self.domain, values: self.values.iter().map(|&x| x.min(T::one())).collect() }
    }

    pub fn scaled(&self, a: T) -> Result<Self> {
        Self::new(self.domain, self.values.iter().map(|&x| x * a).collect())
    }

    /// Pointwise maximum of two weight functions on the same domain.
    pub fn pointwise_max(&self, other: &Self) -> Self {
        assert_eq!(self.domain, other.domain);
        assert_eq!(self.len(), other.len());
        WeightFunction {
            domain: self.domain,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a.max(b)).collect(),
        }
    }

    /// Weak quantity in the default (sorted) mode.
    pub fn weak(&self, p: T) -> T {
        weak_quantity(self, p, WeakMode::Sorted).expect("positive exponent")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeakMode {
    /// `sup_λ λ · #{w > λ}^{1/p}`, evaluated at the value breakpoints.
    Tail,
    /// `sup_k k^{1/p} · w_(k)` over the decreasing rearrangement.
    Sorted,
}

fn check_exponent<T: Real>(p: T) -> Result<()> {
    if p > T::zero() && p.is_finite() {
        Ok(())
    } else {
        Err(invalid("p", "exponent must be positive"))
    }
}

pub fn weak_quantity<T: Real>(w: &WeightFunction<T>, p: T, mode: WeakMode) -> Result<T> {
    weak_quantity_of(&w.values, p, mode)
}

/// Weak quantity of a raw slice of nonnegative values.
pub fn weak_quantity_of<T: Real>(values: &[T], p: T, mode: WeakMode) -> Result<T> {
    check_exponent(p)?;
    let inv = T::one() / p;
    let mut v: Vec<T> = values.iter().copied().filter(|&x| x > T::zero()).collect();
    match mode {
        WeakMode::Sorted => {
            v.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
            Ok(v.iter().enumerate().map(|(i, &x)| T::count(i + 1).powf(inv) * x).fold(T::zero(), T::max))
        }
        WeakMode::Tail => {
            v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len();
            let mut best = T::zero();
            let mut i = 0;
            while i < n {
                let lambda = v[i];
                let count = n - v.partition_point(|&x| x < lambda);
                best = best.max(T::count(count).powf(inv) * lambda);
                i = v.partition_point(|&x| x <= lambda);
            }
            Ok(best)
        }
    }
}

/// `sup_n n^{-1+1/q} · (sum of the n largest values)`.
pub fn comparable_norm<T: Real>(w: &WeightFunction<T>, q: T) -> Result<T> {
    if !(q > T::one() && q.is_finite()) {
        return Err(invalid("q", "comparable norm needs q > 1"));
    }
    let mut v: Vec<T> = w.values.iter().copied().filter(|&x| x > T::zero()).collect();
    v.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let e = T::one() / q - T::one();
    let mut sum = T::zero();
    let mut best = T::zero();
    for (i, &x) in v.iter().enumerate() {
        sum += x;
        best = best.max(T::count(i + 1).powf(e) * sum);
    }
    Ok(best)
}

pub fn lp_norm<T: Real>(w: &WeightFunction<T>, p: T) -> Result<T> {
    check_exponent(p)?;
    let norm = w.values.iter().map(|&x| x.powf(p)).sum::<T>().powf(T::one() / p);
    debug_assert!(weak_quantity(w, p, WeakMode::Tail)? <= norm * (T::one() + T::lit(1e-9)));
    Ok(norm)
}

/// A flattened weight function together with the parameters used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flattened<T> {
    pub weights: WeightFunction<T>,
    pub epsilon: T,
    /// Level that received the extra `epsilon`, if any value equalled 1.
    pub level: Option<u32>,
}

/// Lowers the values equal to 1 to `1 - ε` and adds `ε` on the first level below them.
pub fn flatten_below_one<T: Real>(w: &WeightFunction<T>, filling: &Filling<T>) -> Result<Flattened<T>> {
    if !w.is_unit_bounded() {
        return Err(invalid("weights", "flattening expects values in [0, 1]"));
    }
    let len = match w.domain {
        Domain::Vertex => filling.vertex_count(),
        Domain::Edge => filling.graph().edge_count(),
    };
    if w.len() != len {
        return Err(invalid("weights", "length does not match the filling"));
    }
    let level_of = |i: usize| match w.domain {
        Domain::Vertex => filling.level(i),
        Domain::Edge => filling.edge_level(i),
    };
    let one = T::one() - T::lit(UNIT_TOL);
    let c = w.values.iter().copied().filter(|&x| x < one).fold(T::zero(), T::max);
    if c >= T::one() - T::lit(1e-9) {
        return Err(Error::AccumulatesAtOne(c.f64()));
    }
    let eps = (T::one() - c) / T::lit(2.0);
    let top = (0..w.len()).filter(|&i| w.values[i] >= one).map(level_of).max();
    let Some(top) = top else {
        return Ok(Flattened { weights: w.clone(), epsilon: eps, level: None });
    };
    let level = top + 1;
    if level > filling.max_level() {
        return Err(Error::DepthExhausted(format!("flattening needs level {level}")));
    }
    let mut values = w.values.clone();
    for (i, x) in values.iter_mut().enumerate() {
        if *x >= one {
            *x = T::one() - eps;
        } else if level_of(i) == level {
            *x += eps;
        }
    }
    Ok(Flattened { weights: WeightFunction { domain: w.domain, values }, epsilon: eps, level: Some(level) })
}

/// Right-hand side of the cross-exponent inequality `Σ w^q ≤ q/(q-p) · weak^p · (1-ε)^{q-p}`.
pub fn cross_exponent_bound<T: Real>(weak: T, p: T, q: T, eps: T) -> T {
    q / (q - p) * weak.powf(p) * (T::one() - eps).powf(q - p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wf(v: Vec<f64>) -> WeightFunction<f64> {
        WeightFunction::new(Domain::Vertex, v).unwrap()
    }

    #[test]
    fn basic_values() {
        assert_eq!(wf(vec![0.0; 5]).weak(2.0), 0.0);
        assert_eq!(wf(vec![0.0, 1.0, 0.0]).weak(2.0), 1.0);
        for &p in &[0.5, 1.0, 2.0, 3.7] {
            let v: Vec<f64> = (1..=100).map(|k| (k as f64).powf(-1.0 / p)).collect();
            let w = wf(v);
            for mode in [WeakMode::Sorted, WeakMode::Tail] {
                assert!((weak_quantity(&w, p, mode).unwrap() - 1.0).abs() < 1e-12);
            }
        }
        assert!(weak_quantity(&wf(vec![1.0]), 0.0, WeakMode::Tail).is_err());
    }

    #[test]
    fn comparable_examples() {
        assert_eq!(comparable_norm(&wf(vec![1.0]), 2.0).unwrap(), 1.0);
        assert!((comparable_norm(&wf(vec![1.0, 1.0]), 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(comparable_norm(&wf(vec![1.0]), 1.0).is_err());
    }

    #[test]
    fn lp_examples() {
        assert_eq!(lp_norm(&wf(vec![0.0; 3]), 2.0).unwrap(), 0.0);
        let n: f64 = 9.0;
        let got = lp_norm(&wf(vec![0.3; 9]), 2.5).unwrap();
        assert!((got - 0.3 * n.powf(1.0 / 2.5)).abs() < 1e-12);
    }

    #[test]
    fn f32_agrees() {
        let v: Vec<f32> = (1..=50).map(|k| 1.0 / k as f32).collect();
        let w = WeightFunction::new(Domain::Edge, v).unwrap();
        let a = weak_quantity(&w, 2.0f32, WeakMode::Sorted).unwrap();
        let b = weak_quantity(&w, 2.0f32, WeakMode::Tail).unwrap();
        assert_eq!(a, b);
    }

    fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(0.5), 0.0..1.0f64], 0..80)
    }

    proptest! {
        #[test]
        fn tail_equals_sorted(v in vec_strategy(), p in 0.2..6.0f64) {
            let w = wf(v);
            let a = weak_quantity(&w, p, WeakMode::Sorted).unwrap();
            let b = weak_quantity(&w, p, WeakMode::Tail).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b));
        }

        #[test]
        fn weak_below_strong(v in vec_strategy(), p in 0.2..6.0f64) {
            let w = wf(v);
            prop_assert!(w.weak(p) <= lp_norm(&w, p).unwrap() * (1.0 + 1e-12));
        }

        #[test]
        fn scaling(v in vec_strategy(), p in 0.5..4.0f64, a in 0.0..5.0f64) {
            let w = wf(v);
            let lhs = weak_quantity_of(&w.scaled(a).unwrap().values, p, WeakMode::Tail).unwrap();
            prop_assert!((lhs - a * w.weak(p)).abs() <= 1e-12 * (1.0 + lhs));
        }

        #[test]
        fn comparable_dominates(v in vec_strategy(), q in 1.1..5.0f64) {
            let w = wf(v);
            let c = comparable_norm(&w, q).unwrap();
            prop_assert!(weak_quantity(&w, q, WeakMode::Tail).unwrap() <= c * (1.0 + 1e-12));
        }

        #[test]
        fn max_combination_counts(a in vec_strategy(), b in vec_strategy(), lambda in 0.0..1.0f64) {
            let n = a.len().min(b.len());
            let (wa, wb) = (wf(a[..n].to_vec()), wf(b[..n].to_vec()));
            let m = wa.pointwise_max(&wb);
            let count = |w: &WeightFunction<f64>| w.values().iter().filter(|&&x| x > lambda).count();
            prop_assert!(count(&m) <= count(&wa) + count(&wb));
        }
    }
}
