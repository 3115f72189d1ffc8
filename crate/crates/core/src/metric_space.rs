//! Finite samples of the model compact metric spaces, greedy nets and ball-counting probes.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::index::GridIndex;
use crate::scalar::{inv_pow, Real};

/// Relative slack applied to candidate searches in the index; exact filtering happens afterwards.
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Interval,
    Circle,
    Square,
    Sphere,
    Carpet,
    Snowflake,
}

impl SpaceKind {
    pub fn name(self) -> &'static str {
        match self {
            SpaceKind::Interval => "interval",
            SpaceKind::Circle => "circle",
            SpaceKind::Square => "square",
            SpaceKind::Sphere => "sphere",
            SpaceKind::Carpet => "carpet",
            SpaceKind::Snowflake => "snowflake",
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpaceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "interval" => SpaceKind::Interval,
            "circle" => SpaceKind::Circle,
            "square" => SpaceKind::Square,
            "sphere" => SpaceKind::Sphere,
            "carpet" => SpaceKind::Carpet,
            "snowflake" => SpaceKind::Snowflake,
            other => return Err(Error::UnknownKind(other.to_string())),
        })
    }
}

/// Named kind parameters: `h` (grid step), `depth` (carpet), `alpha` (snowflake).
pub type ParamMap = BTreeMap<String, f64>;

/// Distances are `scale * |x - y|` or `scale * |x - y|^alpha`.
#[derive(Debug, Clone, Copy)]
enum Form<T> {
    Euclid,
    Power(T),
}

/// A finite sample of a compact metric space, normalized to diameter 1.
///
/// Every supported metric is an increasing function of the Euclidean distance between the
/// stored coordinates, which lets all ball queries go through one spatial index.
#[derive(Debug, Clone)]
pub struct PointCloudSpace<T> {
    kind: SpaceKind,
    params: ParamMap,
    dim: usize,
    coords: Vec<[T; 3]>,
    form: Form<T>,
    scale: T,
    resolution: T,
    index: GridIndex,
}

fn param(params: &ParamMap, name: &'static str) -> Result<f64> {
    params.get(name).copied().ok_or_else(|| invalid(name, "missing"))
}

fn grid_count(h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", "resolution must be positive"));
    }
    if h > 1.0 {
        return Err(invalid("h", "resolution must be at most 1"));
    }
    let steps = (1.0 / h - 1e-9).ceil().max(1.0);
    if steps > 1.0e7 {
        return Err(invalid("h", "grid too fine"));
    }
    Ok(steps as usize + 1)
}

fn carpet_keeps(mut i: usize, mut j: usize) -> bool {
    while i > 0 || j > 0 {
        if i % 3 == 1 && j % 3 == 1 {
            return false;
        }
        i /= 3;
        j /= 3;
    }
    true
}

/// Builds a sample of one of the model spaces. Construction is deterministic in the parameters.
pub fn make_model_space<T: Real>(kind: SpaceKind, params: &ParamMap) -> Result<PointCloudSpace<T>> {
    let lit = T::lit;
    let mut coords: Vec<[T; 3]> = Vec::new();
    let mut form = Form::Euclid;
    let dim;
    // Covering radius of the sample in the ambient (unnormalized) metric.
    let ambient_res: f64;
    match kind {
        SpaceKind::Interval | SpaceKind::Snowflake => {
            let n = grid_count(param(params, "h")?)?;
            dim = 1;
            for i in 0..n {
                coords.push([lit(i as f64) / lit((n - 1) as f64), T::zero(), T::zero()]);
            }
            let half = 0.5 / (n - 1) as f64;
            if kind == SpaceKind::Snowflake {
                let alpha = param(params, "alpha")?;
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(invalid("alpha", "must lie in (0, 1]"));
                }
                form = Form::Power(lit(alpha));
                ambient_res = half.powf(alpha);
            } else {
                ambient_res = half;
            }
        }
        SpaceKind::Square => {
            let n = grid_count(param(params, "h")?)?;
            if n * n > 4_000_000 {
                return Err(invalid("h", "grid too fine"));
            }
            dim = 2;
            for j in 0..n {
                for i in 0..n {
                    let d = lit((n - 1) as f64);
                    coords.push([lit(i as f64) / d, lit(j as f64) / d, T::zero()]);
                }
            }
            ambient_res = std::f64::consts::FRAC_1_SQRT_2 / (n - 1) as f64;
        }
        SpaceKind::Circle => {
            let h = param(params, "h")?;
            if !(h > 0.0 && h <= 1.0) {
                return Err(invalid("h", "resolution must lie in (0, 1]"));
            }
            let n = ((2.0 * std::f64::consts::PI / h).ceil() as usize).max(4);
            dim = 2;
            for i in 0..n {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                coords.push([lit(a.cos()), lit(a.sin()), T::zero()]);
            }
            ambient_res = 2.0 * (std::f64::consts::PI / (2 * n) as f64).sin();
        }
        SpaceKind::Sphere => {
            let h = param(params, "h")?;
            if !(h > 0.0 && h <= 1.0) {
                return Err(invalid("h", "resolution must lie in (0, 1]"));
            }
            let n = ((4.0 * std::f64::consts::PI / (h * h)).ceil() as usize).max(8);
            if n > 4_000_000 {
                return Err(invalid("h", "lattice too fine"));
            }
            dim = 3;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..n {
                let z = 1.0 - (2 * i + 1) as f64 / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                coords.push([lit(rho * a.cos()), lit(rho * a.sin()), lit(z)]);
            }
            // Fibonacci lattices cover the sphere with caps of area about twice the mean cell.
            ambient_res = (8.0 / n as f64).sqrt() * 1.2;
        }
        SpaceKind::Carpet => {
            let d = param(params, "depth")?;
            if !(d >= 1.0 && d.fract() == 0.0 && d <= 7.0) {
                return Err(invalid("depth", "must be an integer in 1..=7"));
            }
            let m = 3usize.pow(d as u32);
            dim = 2;
            for j in 0..m {
                for i in 0..m {
                    if carpet_keeps(i, j) {
                        let c = |k: usize| lit((2 * k + 1) as f64) / lit((2 * m) as f64);
                        coords.push([c(i), c(j), T::zero()]);
                    }
                }
            }
            ambient_res = std::f64::consts::FRAC_1_SQRT_2 / m as f64;
        }
    }
    let index = GridIndex::build(dim, coords.iter().map(|c| to_f64(c)).zip(0..));
    let mut space = PointCloudSpace {
        kind,
        params: params.clone(),
        dim,
        coords,
        form,
        scale: T::one(),
        resolution: T::zero(),
        index,
    };
    let all: Vec<usize> = (0..space.len()).collect();
    let raw = space.diameter_of(&all);
    if raw <= T::zero() {
        return Err(invalid("h", "sample has zero diameter"));
    }
    space.scale = T::one() / raw;
    space.resolution = lit(ambient_res) * space.scale;
    Ok(space)
}

fn to_f64<T: Real>(c: &[T; 3]) -> [f64; 3] {
    [c[0].f64(), c[1].f64(), c[2].f64()]
}

impl<T: Real> PointCloudSpace<T> {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn params(&self) -> &ParamMap {
        &self.params
    }

    /// Number of ambient coordinates that carry data.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn point_f64(&self, i: usize) -> [f64; 3] {
        to_f64(&self.coords[i])
    }

    pub fn coords(&self, i: usize) -> &[T] {
        &self.coords[i][..self.dim]
    }

    /// Every ideal point of the model space lies within this normalized distance of a sample point.
    pub fn resolution(&self) -> T {
        self.resolution
    }

    /// Diameter of the sample, 1 by construction.
    pub fn diameter(&self) -> T {
        T::one()
    }

    fn euclid(&self, a: &[T; 3], b: &[T; 3]) -> T {
        let d0 = a[0] - b[0];
        let d1 = a[1] - b[1];
        let d2 = a[2] - b[2];
        (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
    }

    fn metric_of_euclid(&self, e: T) -> T {
        match self.form {
            Form::Euclid => e * self.scale,
            Form::Power(a) => e.powf(a) * self.scale,
        }
    }

    pub(crate) fn to_euclid(&self, r: T) -> f64 {
        let r = r.f64().max(0.0) / self.scale.f64();
        let e = match self.form {
            Form::Euclid => r,
            Form::Power(a) => r.powf(1.0 / a.f64()),
        };
        e * (1.0 + SLACK) + 1e-15
    }

    pub fn dist(&self, i: usize, j: usize) -> T {
        if i == j {
            return T::zero();
        }
        self.metric_of_euclid(self.euclid(&self.coords[i], &self.coords[j]))
    }

    /// Calls `f(id, d(z, id))` for every sample point with `d(z, id) < r`.
    pub fn for_each_in_ball(&self, z: usize, r: T, mut f: impl FnMut(usize, T)) {
        let q = to_f64(&self.coords[z]);
        self.index.visit_within(&q, self.to_euclid(r), |id, _| {
            let d = self.dist(z, id);
            if d < r {
                f(id, d);
            }
            true
        });
    }

    /// Point ids of the open ball `B(z, r)`, ascending.
    pub fn ball(&self, z: usize, r: T) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_in_ball(z, r, |id, _| out.push(id));
        out.sort_unstable();
        out
    }

    pub fn ball_count(&self, z: usize, r: T) -> usize {
        let mut n = 0;
        self.for_each_in_ball(z, r, |_, _| n += 1);
        n
    }

    /// Largest level `k` with `s^{-k} >= 4 * resolution`.
    pub fn max_level(&self, s: T) -> u32 {
        let four_h = T::lit(4.0) * self.resolution;
        let mut k = 0;
        while k < 64 && inv_pow(s, k + 1) >= four_h {
            k += 1;
        }
        k
    }

    /// Exact diameter of a subset of the sample.
    pub fn diameter_of(&self, members: &[usize]) -> T {
        if members.len() < 2 {
            return T::zero();
        }
        match self.kind {
            SpaceKind::Circle | SpaceKind::Sphere => self.diameter_antipodal(members),
            _ => self.diameter_pruned(members),
        }
    }

    // On a round sphere the farthest member from p is the member nearest to -p.
    fn diameter_antipodal(&self, members: &[usize]) -> T {
        let idx = GridIndex::build(self.dim, members.iter().map(|&i| (to_f64(&self.coords[i]), i)));
        let mut best = T::zero();
        for &i in members {
            let c = to_f64(&self.coords[i]);
            let (j, _) = idx.nearest(&[-c[0], -c[1], -c[2]]).expect("nonempty");
            best = best.max(self.dist(i, j));
        }
        best
    }

    fn diameter_pruned(&self, members: &[usize]) -> T {
        let n = T::count(members.len());
        let mut c = [T::zero(); 3];
        for &i in members {
            for (ca, &x) in c.iter_mut().zip(&self.coords[i]) {
                *ca += x;
            }
        }
        for x in &mut c {
            *x /= n;
        }
        let mut order: Vec<(T, usize)> = members.iter().map(|&i| (self.euclid(&self.coords[i], &c), i)).collect();
        order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut best = T::zero();
        let slack = T::one() + T::lit(1e-12);
        for i in 1..order.len() {
            if (order[i].0 + order[0].0) * slack < best {
                break;
            }
            for j in 0..i {
                if (order[i].0 + order[j].0) * slack < best {
                    break;
                }
                let e = self.euclid(&self.coords[order[i].1], &self.coords[order[j].1]);
                if e > best {
                    best = e;
                }
            }
        }
        self.metric_of_euclid(best)
    }

    /// Distance between two subsets of the sample, with the pair of points attaining it.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> (T, usize, usize) {
        let (small, large, flip) = if a.len() <= b.len() { (a, b, false) } else { (b, a, true) };
        let idx = GridIndex::build(self.dim, small.iter().map(|&i| (to_f64(&self.coords[i]), i)));
        let mut best = (T::infinity(), usize::MAX, usize::MAX);
        for &j in large {
            if let Some((i, _)) = idx.nearest(&to_f64(&self.coords[j])) {
                let d = self.dist(i, j);
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        if flip {
            (best.0, best.2, best.1)
        } else {
            best
        }
    }

    /// For each query point, the distance to the nearest member of `members`.
    pub fn distances_to_set(&self, members: &[usize], queries: &[usize]) -> Vec<T> {
        let idx = MemberIndex::new(self, members);
        queries.iter().map(|&q| idx.distance(self, q)).collect()
    }

    /// Writes the space in the text export format.
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "# kind={} h={} diam=1", self.kind, self.resolution)?;
        for (i, c) in self.coords.iter().enumerate() {
            write!(w, "{i}")?;
            for x in &c[..self.dim] {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Nearest-member queries against a fixed subset of the sample.
pub(crate) struct MemberIndex {
    idx: GridIndex,
}

impl MemberIndex {
    pub(crate) fn new<T: Real>(space: &PointCloudSpace<T>, members: &[usize]) -> Self {
        MemberIndex { idx: GridIndex::build(space.dim, members.iter().map(|&i| (to_f64(&space.coords[i]), i))) }
    }

    pub(crate) fn distance<T: Real>(&self, space: &PointCloudSpace<T>, q: usize) -> T {
        match self.idx.nearest(&to_f64(&space.coords[q])) {
            Some((i, _)) => space.dist(i, q),
            None => T::infinity(),
        }
    }

    /// Distance from `q` to the nearest member when it is at most `r`.
    pub(crate) fn distance_within<T: Real>(&self, space: &PointCloudSpace<T>, q: usize, r: T) -> Option<T> {
        let mut best: Option<T> = None;
        self.idx.visit_within(&to_f64(&space.coords[q]), space.to_euclid(r), |i, _| {
            let d = space.dist(i, q);
            if d <= r && best.is_none_or(|b| d < b) {
                best = Some(d);
            }
            true
        });
        best
    }

    /// Whether some member lies at distance `< r` from sample point `q`.
    pub(crate) fn any_within<T: Real>(&self, space: &PointCloudSpace<T>, q: usize, r: T) -> bool {
        let mut found = false;
        self.idx.visit_within(&to_f64(&space.coords[q]), space.to_euclid(r), |i, _| {
            found = space.dist(i, q) < r;
            !found
        });
        found
    }
}

/// A maximal `s^{-k}`-separated subset of the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Net<T> {
    pub level: u32,
    pub separation: T,
    pub members: Vec<usize>,
}

/// Greedy maximal net in ascending point-id order.
pub fn greedy_maximal_net<T: Real>(space: &PointCloudSpace<T>, level: u32, s: T) -> Result<Net<T>> {
    if level < 1 {
        return Err(invalid("level", "must be at least 1"));
    }
    if s.partial_cmp(&T::one()) != Some(std::cmp::Ordering::Greater) {
        return Err(invalid("s", "must exceed 1"));
    }
    let sep = inv_pow(s, level);
    let members = greedy_net_of(space, (0..space.len()).collect::<Vec<_>>().as_slice(), sep);
    Ok(Net { level, separation: sep, members })
}

/// Greedy maximal `sep`-separated subset of `candidates` (processed in the given order).
pub(crate) fn greedy_net_of<T: Real>(space: &PointCloudSpace<T>, candidates: &[usize], sep: T) -> Vec<usize> {
    let reach = space.to_euclid(sep);
    let mut idx = GridIndex::new(space.dim, reach.max(1e-12));
    let mut out = Vec::new();
    for &p in candidates {
        let q = to_f64(&space.coords[p]);
        let mut blocked = false;
        idx.visit_within(&q, reach, |m, _| {
            if space.dist(m, p) < sep {
                blocked = true;
                false
            } else {
                true
            }
        });
        if !blocked {
            idx.insert(q, p);
            out.push(p);
        }
    }
    out
}

/// Fitted Ahlfors-regularity data for the normalized counting measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport<T> {
    pub exponent_fit: T,
    pub lower_const: T,
    pub upper_const: T,
    pub radii_tested: Vec<T>,
    pub residual: T,
}

/// Ball-counting fit with 64 random centers drawn from a fixed stream.
pub fn regularity_probe<T: Real>(space: &PointCloudSpace<T>, radii: &[T]) -> Result<RegularityReport<T>> {
    regularity_probe_with(space, radii, 64, 0)
}

/// Fits `log mu(B(z, r))` against `log r`.
///
/// The slope is taken from the per-radius maximum over centers, which is insensitive to balls
/// being truncated by the boundary of the space; `c` and `C` cover every sampled ball.
pub fn regularity_probe_with<T: Real>(
    space: &PointCloudSpace<T>,
    radii: &[T],
    centers: usize,
    seed: u64,
) -> Result<RegularityReport<T>> {
    if radii.len() < 3 {
        return Err(invalid("radii", "at least 3 radii are required"));
    }
    let two_h = T::lit(2.0) * space.resolution;
    for &r in radii {
        if !(r > two_h && r <= T::one()) {
            return Err(invalid("radii", format!("radius {r} outside (2h, 1] with h = {}", space.resolution)));
        }
    }
    if centers == 0 {
        return Err(invalid("centers", "at least one center is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zs: Vec<usize> = (0..centers).map(|_| rng.gen_range(0..space.len())).collect();
    let total = T::count(space.len());
    let mut xs = Vec::with_capacity(radii.len());
    let mut ys = Vec::with_capacity(radii.len());
    let mut all = Vec::new();
    for &r in radii {
        let mut top = T::zero();
        for &z in &zs {
            let mu = T::count(space.ball_count(z, r)) / total;
            top = top.max(mu);
            all.push((r, mu));
        }
        xs.push(r.ln());
        ys.push(top.ln());
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    let n = T::count(xs.len());
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum::<T>()
        / n)
        .sqrt();
    let ratios = all.iter().map(|&(r, mu)| mu / r.powf(slope));
    let lower = ratios.clone().fold(T::infinity(), T::min);
    let upper = ratios.fold(T::zero(), T::max);
    Ok(RegularityReport {
        exponent_fit: slope,
        lower_const: lower,
        upper_const: upper,
        radii_tested: radii.to_vec(),
        residual,
    })
}

pub(crate) fn least_squares<T: Real>(xs: &[T], ys: &[T]) -> (T, T) {
    let n = T::count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > T::zero() { sxy / sxx } else { T::zero() };
    (slope, my - slope * mx)
}

/// Number of points of a greedy `(r/2)`-net of `B(z, r)`; bounded in terms of the doubling constant.
pub fn doubling_count<T: Real>(space: &PointCloudSpace<T>, z: usize, r: T) -> usize {
    let ball = space.ball(z, r);
    greedy_net_of(space, &ball, r / T::lit(2.0)).len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> ParamMap {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn interval(h: f64) -> PointCloudSpace<f64> {
        make_model_space(SpaceKind::Interval, &params(&[("h", h)])).unwrap()
    }

    #[test]
    fn interval_grid() {
        let sp = interval(0.1);
        assert_eq!(sp.len(), 11);
        assert_eq!(sp.coords(10)[0], 1.0);
        assert_eq!(sp.dist(0, 10), 1.0);
    }

    #[test]
    fn carpet_counts() {
        for d in 1..=3 {
            let sp: PointCloudSpace<f64> =
                make_model_space(SpaceKind::Carpet, &params(&[("depth", d as f64)])).unwrap();
            assert_eq!(sp.len(), 8usize.pow(d));
        }
    }

    #[test]
    fn snowflake_metric() {
        let sp: PointCloudSpace<f64> =
            make_model_space(SpaceKind::Snowflake, &params(&[("h", 0.01), ("alpha", 0.5)])).unwrap();
        assert!((sp.dist(0, sp.len() - 1) - 1.0).abs() < 1e-12);
        let x = |i: usize| sp.coords(i)[0];
        assert!((sp.dist(3, 40) - (x(40) - x(3)).sqrt()).abs() < 1e-12);
        assert!((sp.dist(0, 1) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!("blob".parse::<SpaceKind>(), Err(Error::UnknownKind(_))));
        let e = make_model_space::<f64>(SpaceKind::Interval, &params(&[("h", 0.0)]));
        assert!(e.is_err());
        let e = make_model_space::<f64>(SpaceKind::Snowflake, &params(&[("h", 0.1), ("alpha", 1.5)]));
        assert!(e.is_err());
        let e = make_model_space::<f64>(SpaceKind::Carpet, &params(&[("depth", 0.0)]));
        assert!(e.is_err());
    }

    #[test]
    fn circle_and_sphere_normalized() {
        let c: PointCloudSpace<f64> = make_model_space(SpaceKind::Circle, &params(&[("h", 0.05)])).unwrap();
        let s: PointCloudSpace<f64> = make_model_space(SpaceKind::Sphere, &params(&[("h", 0.1)])).unwrap();
        for sp in [&c, &s] {
            let mut top: f64 = 0.0;
            for i in 0..sp.len() {
                for j in 0..sp.len() {
                    top = top.max(sp.dist(i, j));
                }
            }
            assert!((top - 1.0).abs() < 1e-12, "{}", sp.kind());
        }
    }

    #[test]
    fn net_on_tenth_grid() {
        let sp = interval(0.1);
        let net = greedy_maximal_net(&sp, 1, 2.0).unwrap();
        assert_eq!(net.members, vec![0, 5, 10]);
        let fine = greedy_maximal_net(&sp, 4, 2.0).unwrap();
        assert_eq!(fine.members.len(), 11);
    }

    #[test]
    fn net_brute_force_small() {
        // Exhaustive check over all subsets: the greedy net is separated and maximal, and every
        // separated maximal subset has at least the size lower bound implied by covering.
        let sp = interval(0.1);
        let sep = 0.5;
        let net = greedy_maximal_net(&sp, 1, 2.0).unwrap();
        let n = sp.len();
        let mut maximal_sets = Vec::new();
        for mask in 0u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let separated = set.iter().all(|&a| set.iter().all(|&b| a == b || sp.dist(a, b) >= sep));
            let maximal = (0..n).all(|p| set.iter().any(|&m| sp.dist(m, p) < sep));
            if separated && maximal {
                maximal_sets.push(set);
            }
        }
        assert!(maximal_sets.contains(&net.members));
    }

    #[test]
    fn two_point_space_level_one() {
        let sp = interval(1.0);
        assert_eq!(sp.len(), 2);
        let net = greedy_maximal_net(&sp, 1, 2.0).unwrap();
        assert_eq!(net.members, vec![0, 1]);
    }

    #[test]
    fn regularity_exponents() {
        let radii = [0.05, 0.1, 0.2, 0.4];
        let sq: PointCloudSpace<f64> = make_model_space(SpaceKind::Square, &params(&[("h", 1.0 / 128.0)])).unwrap();
        let rep = regularity_probe(&sq, &radii).unwrap();
        assert!((rep.exponent_fit - 2.0).abs() <= 0.2, "{rep:?}");
        assert!(rep.lower_const <= rep.upper_const);
        let iv = interval(0.001);
        let rep = regularity_probe(&iv, &radii).unwrap();
        assert!((rep.exponent_fit - 1.0).abs() <= 0.2, "{rep:?}");
        let sf: PointCloudSpace<f64> =
            make_model_space(SpaceKind::Snowflake, &params(&[("h", 0.0005), ("alpha", 0.5)])).unwrap();
        let rep = regularity_probe(&sf, &radii).unwrap();
        assert!((rep.exponent_fit - 2.0).abs() <= 0.3, "{rep:?}");
    }

    #[test]
    fn regularity_rejects_bad_radii() {
        let sp = interval(0.01);
        assert!(regularity_probe(&sp, &[0.1, 0.2]).is_err());
        assert!(regularity_probe(&sp, &[0.001, 0.1, 0.2]).is_err());
    }

    #[test]
    fn works_in_f32() {
        let sp: PointCloudSpace<f32> = make_model_space(SpaceKind::Square, &params(&[("h", 1.0 / 16.0)])).unwrap();
        assert_eq!(sp.len(), 289);
        let net = greedy_maximal_net(&sp, 2, 2.0f32).unwrap();
        for &a in &net.members {
            for &b in &net.members {
                assert!(a == b || sp.dist(a, b) >= 0.25);
            }
        }
    }
}
