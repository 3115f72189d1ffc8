//! Relative distance, empirical control curves `φ_p(t)` and exponent sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{wcap_estimate, CapacityEstimate, EstimateOptions};
use crate::error::{invalid, Error, Result};
use crate::filling::{Filling, Region, SetPair};
use crate::metric_space::PointCloudSpace;
use crate::scalar::{inv_pow, Real};

/// `Δ(A, B) = dist(A, B) / min(diam A, diam B)` over the sampled members.
pub fn relative_distance<T: Real>(space: &PointCloudSpace<T>, a: &Region<T>, b: &Region<T>) -> Result<T> {
    let (dist, _, _) = space.set_distance(a.members(), b.members());
    if !(dist > T::zero()) {
        return Err(Error::NotSeparated);
    }
    let m = a.diam().min(b.diam());
    if !(m > T::zero()) {
        return Err(invalid("region", "sets must have positive diameter"));
    }
    Ok(dist / m)
}

/// `Φ(t) = 1 / (3 η(1/t))`, after checking `η` is positive and increasing on a dyadic probe of
/// `(0, 2/t]`.
pub fn qs_transfer_bound<T: Real>(eta: &dyn Fn(T) -> T, t: T) -> Result<T> {
    if !(t > T::zero()) {
        return Err(invalid("t", "must be positive"));
    }
    let top = T::lit(2.0) / t;
    let mut prev = T::zero();
    for k in (0..40).rev() {
        let u = top * inv_pow(T::lit(2.0), k);
        let e = eta(u);
        if !(e > prev) {
            return Err(Error::Nonmonotone(u.f64()));
        }
        prev = e;
    }
    Ok(T::one() / (T::lit(3.0) * eta(T::one() / t)))
}

fn seed_for(seed: u64, x: f64) -> u64 {
    seed ^ x.to_bits().rotate_left(23) ^ 0x9E37_79B9_7F4A_7C15
}

/// Centers of the net at the first level finer than `spacing`.
fn net_centers<T: Real>(filling: &Filling<T>, spacing: f64) -> Vec<usize> {
    let mut k = 0;
    while k < filling.max_level() && inv_pow(filling.s(), k).f64() > spacing {
        k += 1;
    }
    filling.level_range(k).map(|v| filling.vertex(v).center).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiOptions<T> {
    pub seed: u64,
    /// Accepted relative error of the realized `Δ`.
    pub tolerance: f64,
    /// Range of `radius(B) / radius(A)`.
    pub radius_ratio: (f64, f64),
    /// Attempts per requested pair.
    pub attempts: usize,
    pub estimate: EstimateOptions<T>,
}

impl<T> Default for PhiOptions<T> {
    fn default() -> Self {
        PhiOptions {
            seed: 0,
            tolerance: 0.05,
            radius_ratio: (1.0, 2.0),
            attempts: 200,
            estimate: EstimateOptions::default(),
        }
    }
}

/// One control-curve sample: envelopes over the pairs drawn at relative distance `≈ t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint<T> {
    pub t: T,
    pub upper: T,
    pub lower: T,
    pub pairs: usize,
    /// Realized relative distances.
    pub deltas: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlCurve<T> {
    pub p: T,
    pub depth: u32,
    pub seed: u64,
    pub samples: Vec<CurvePoint<T>>,
    /// Values of `t` whose upper envelope exceeds an earlier one by more than 10%.
    pub violations: Vec<T>,
}

/// Ball pair at net points with `Δ` within `tol` of `t` and separation above `min_dist`.
fn pair_at_delta<T: Real>(
    filling: &Filling<T>,
    centers: &[usize],
    t: f64,
    min_dist: f64,
    opts: &PhiOptions<T>,
    rng: &mut ChaCha8Rng,
) -> Option<SetPair<T>> {
    let space = filling.space();
    for _ in 0..opts.attempts {
        let za = centers[rng.gen_range(0..centers.len())];
        let zb = centers[rng.gen_range(0..centers.len())];
        let gap = space.dist(za, zb).f64();
        let k = rng.gen_range(opts.radius_ratio.0..=opts.radius_ratio.1);
        // With radii ra and k·ra the relative distance is about (gap - (1 + k) ra) / (2 ra).
        let guess = gap / (2.0 * t + 1.0 + k);
        let (mut lo, mut hi) = (guess * 0.5, guess * 1.5);
        let build = |ra: f64| -> Option<SetPair<T>> {
            let a = Region::ball(space, za, T::lit(ra)).ok()?;
            let b = Region::ball(space, zb, T::lit(k * ra)).ok()?;
            SetPair::new(space, a, b).ok()
        };
        for _ in 0..30 {
            let ra = 0.5 * (lo + hi);
            let Some(pair) = build(ra) else {
                hi = ra;
                continue;
            };
            let d = pair.delta.f64();
            if (d - t).abs() <= opts.tolerance * t {
                if pair.dist.f64() > min_dist && pair.a.members().len() > 1 && pair.b.members().len() > 1 {
                    return Some(pair);
                }
                break;
            }
            // Δ decreases as the radii grow.
            if d > t {
                lo = ra;
            } else {
                hi = ra;
            }
        }
    }
    None
}

/// Empirical `φ_p(t)`: for each `t`, the largest upper and lower capacity bounds over random
/// ball pairs with relative distance within the tolerance of `t`.
pub fn phi_curve<T: Real>(
    filling: &Filling<T>,
    p: T,
    t_grid: &[T],
    pairs_per_t: usize,
    depth: u32,
    opts: &PhiOptions<T>,
) -> Result<ControlCurve<T>> {
    if t_grid.is_empty() || pairs_per_t == 0 {
        return Err(invalid("t_grid", "needs at least one value and one pair per value"));
    }
    if t_grid.iter().any(|&t| !(t > T::zero())) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("t_grid", "values must be positive and increasing"));
    }
    if depth > filling.max_level() {
        return Err(Error::LevelOutOfRange { n: depth, max: filling.max_level() });
    }
    let min_dist = 8.0 * inv_pow(filling.s(), depth).f64();
    let centers = net_centers(filling, 0.02);
    let mut jobs = Vec::new();
    for (i, &t) in t_grid.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(opts.seed, t.f64()));
        for _ in 0..pairs_per_t {
            let pair = pair_at_delta(filling, &centers, t.f64(), min_dist, opts, &mut rng)
                .ok_or(Error::Unrealizable(t.f64()))?;
            jobs.push((i, pair));
        }
    }
    let estimates: Vec<Result<CapacityEstimate<T>>> =
        jobs.par_iter().map(|(_, pair)| wcap_estimate(filling, pair, p, depth, &opts.estimate)).collect();
    let mut samples: Vec<CurvePoint<T>> = t_grid
        .iter()
        .map(|&t| CurvePoint { t, upper: T::neg_infinity(), lower: T::neg_infinity(), pairs: 0, deltas: Vec::new() })
        .collect();
    for ((i, pair), est) in jobs.iter().zip(estimates) {
        let est = est?;
        let s = &mut samples[*i];
        s.upper = s.upper.max(est.upper);
        s.lower = s.lower.max(est.lower);
        s.pairs += 1;
        s.deltas.push(pair.delta);
    }
    let mut violations = Vec::new();
    let mut best = T::infinity();
    for s in &samples {
        if s.upper > best * T::lit(1.1) {
            violations.push(s.t);
        }
        best = best.min(s.upper);
    }
    Ok(ControlCurve { p, depth, seed: opts.seed, samples, violations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Growing,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOptions<T> {
    pub seed: u64,
    /// Range of the ball radii.
    pub radius: (f64, f64),
    /// Largest accepted separation.
    pub max_dist: f64,
    /// Relative spread of the last two mean upper bounds accepted as stable.
    pub stable: f64,
    pub attempts: usize,
    pub estimate: EstimateOptions<T>,
}

impl<T> Default for SweepOptions<T> {
    fn default() -> Self {
        SweepOptions {
            seed: 0,
            radius: (0.09, 0.12),
            max_dist: 0.5,
            stable: 0.1,
            attempts: 10_000,
            estimate: EstimateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord<T> {
    pub centers: (usize, usize),
    pub radii: (T, T),
    pub dist: T,
    pub delta: T,
}

impl<T: Real> PairRecord<T> {
    /// Record of a pair of single balls; other shapes get center `usize::MAX` and radius 0.
    pub fn of(pair: &SetPair<T>) -> Self {
        let (ca, ra) = single_ball(pair.a.shape());
        let (cb, rb) = single_ball(pair.b.shape());
        PairRecord { centers: (ca, cb), radii: (ra, rb), dist: pair.dist, delta: pair.delta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentTrend<T> {
    pub p: T,
    pub verdict: Verdict,
    /// Mean over the pairs, one entry per depth.
    pub mean_lower: Vec<T>,
    pub mean_upper: Vec<T>,
    /// Least-squares slopes of the means against depth.
    pub lower_slope: T,
    pub upper_slope: T,
    /// `(pair index, depth, estimate)` for every run.
    pub estimates: Vec<(usize, u32, CapacityEstimate<T>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport<T> {
    pub depths: Vec<u32>,
    pub seed: u64,
    pub pairs: Vec<PairRecord<T>>,
    pub trends: Vec<ExponentTrend<T>>,
    /// Largest exponent judged growing and smallest judged bounded.
    pub bracket: (Option<T>, Option<T>),
}

fn slope<T: Real>(xs: &[u32], ys: &[T]) -> T {
    let n = T::count(xs.len());
    let mx = xs.iter().map(|&x| T::count(x as usize)).sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = T::count(x as usize) - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    if sxx > T::zero() {
        sxy / sxx
    } else {
        T::zero()
    }
}

/// Bounded when the last two mean upper bounds agree within `stable`; otherwise growing when the
/// mean lower bound increases strictly and faster than linearly in depth (`lower / depth` strictly
/// increasing) across at least three depths; otherwise inconclusive.
pub fn verdict<T: Real>(depths: &[u32], mean_lower: &[T], mean_upper: &[T], stable: f64) -> Verdict {
    let n = depths.len();
    if n >= 2 {
        let (a, b) = (mean_upper[n - 2], mean_upper[n - 1]);
        if a.is_finite() && b.is_finite() && (b - a).abs() <= T::lit(stable) * a.max(b) {
            return Verdict::Bounded;
        }
    }
    if n >= 3 {
        let rate: Vec<T> = depths.iter().zip(mean_lower).map(|(&d, &l)| l / T::count(d as usize)).collect();
        if mean_lower.windows(2).all(|w| w[1] > w[0]) && rate.windows(2).all(|w| w[1] > w[0]) {
            return Verdict::Growing;
        }
    }
    Verdict::Inconclusive
}

/// Random ball pairs at net points with radii in `opts.radius` and separation in
/// `(min_dist, opts.max_dist]`, drawn from the stream of `opts.seed`.
pub fn sample_pairs<T: Real>(
    filling: &Filling<T>,
    count: usize,
    min_dist: f64,
    opts: &SweepOptions<T>,
) -> Result<Vec<SetPair<T>>> {
    let space = filling.space();
    let centers = net_centers(filling, 0.02);
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(opts.seed, 0.0));
    let mut out = Vec::new();
    for _ in 0..opts.attempts {
        if out.len() == count {
            break;
        }
        let za = centers[rng.gen_range(0..centers.len())];
        let zb = centers[rng.gen_range(0..centers.len())];
        let ra = rng.gen_range(opts.radius.0..=opts.radius.1);
        let rb = rng.gen_range(opts.radius.0..=opts.radius.1);
        let (Ok(a), Ok(b)) = (Region::ball(space, za, T::lit(ra)), Region::ball(space, zb, T::lit(rb))) else {
            continue;
        };
        if let Ok(pair) = SetPair::new(space, a, b) {
            let d = pair.dist.f64();
            if d > min_dist && d <= opts.max_dist {
                out.push(pair);
            }
        }
    }
    if out.len() < count {
        return Err(Error::Precondition(format!("found {} of {count} separated ball pairs", out.len())));
    }
    Ok(out)
}

/// Capacity bounds over a grid of exponents and depths for randomly drawn ball pairs, with a
/// divergence verdict per exponent.
pub fn exponent_sweep<T: Real>(
    filling: &Filling<T>,
    p_grid: &[T],
    pair_samples: usize,
    depths: &[u32],
    opts: &SweepOptions<T>,
) -> Result<SweepReport<T>> {
    if p_grid.is_empty() {
        return Err(invalid("p_grid", "must not be empty"));
    }
    if depths.is_empty() || depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("depths", "must be nonempty and increasing"));
    }
    if pair_samples == 0 {
        return Err(invalid("pair_samples", "must be positive"));
    }
    if depths[depths.len() - 1] > filling.max_level() {
        return Err(Error::LevelOutOfRange { n: depths[depths.len() - 1], max: filling.max_level() });
    }
    let min_dist = 8.0 * inv_pow(filling.s(), depths[0]).f64();
    let pairs = sample_pairs(filling, pair_samples, min_dist, opts)?;
    let mut jobs = Vec::new();
    for (pi, &p) in p_grid.iter().enumerate() {
        for k in 0..pairs.len() {
            for &d in depths {
                jobs.push((pi, p, k, d));
            }
        }
    }
    let results: Vec<Result<CapacityEstimate<T>>> =
        jobs.par_iter().map(|&(_, p, k, d)| wcap_estimate(filling, &pairs[k], p, d, &opts.estimate)).collect();
    let mut trends: Vec<ExponentTrend<T>> = p_grid
        .iter()
        .map(|&p| ExponentTrend {
            p,
            verdict: Verdict::Inconclusive,
            mean_lower: vec![T::zero(); depths.len()],
            mean_upper: vec![T::zero(); depths.len()],
            lower_slope: T::zero(),
            upper_slope: T::zero(),
            estimates: Vec::new(),
        })
        .collect();
    let count = T::count(pairs.len());
    for (&(pi, _, k, d), est) in jobs.iter().zip(results) {
        let est = est?;
        let di = depths.iter().position(|&x| x == d).expect("listed depth");
        let tr = &mut trends[pi];
        tr.mean_lower[di] += est.lower / count;
        tr.mean_upper[di] += est.upper / count;
        tr.estimates.push((k, d, est));
    }
    for tr in &mut trends {
        tr.verdict = verdict(depths, &tr.mean_lower, &tr.mean_upper, opts.stable);
        tr.lower_slope = slope(depths, &tr.mean_lower);
        tr.upper_slope = slope(depths, &tr.mean_upper);
    }
    let growing = trends
        .iter()
        .filter(|t| t.verdict == Verdict::Growing)
        .map(|t| t.p)
        .fold(None, |a: Option<T>, p| Some(a.map_or(p, |x| x.max(p))));
    let bounded = trends
        .iter()
        .filter(|t| t.verdict == Verdict::Bounded)
        .map(|t| t.p)
        .fold(None, |a: Option<T>, p| Some(a.map_or(p, |x| x.min(p))));
    let records = pairs.iter().map(PairRecord::of).collect();
    Ok(SweepReport { depths: depths.to_vec(), seed: opts.seed, pairs: records, trends, bracket: (growing, bounded) })
}

fn single_ball<T: Real>(shape: &crate::filling::Shape<T>) -> (usize, T) {
    match shape {
        crate::filling::Shape::Balls(b) if !b.is_empty() => b[0],
        _ => (usize::MAX, T::zero()),
    }
}
