//! Fast property checks of every module, run on small samples.

use std::sync::Arc;

use hyperfill::capacity::{
    check_admissible, disjoint_path_lower, modulus_solve, wcap_estimate, EstimateOptions, PathProblem,
};
use hyperfill::exponents::{qs_transfer_bound, relative_distance, verdict, Verdict};
use hyperfill::filling::{build_filling, check_filling, Region, SetPair};
use hyperfill::graph::{Domain, Graph};
use hyperfill::level_modulus::mod_p_level;
use hyperfill::metric_space::{make_model_space, regularity_probe, ParamMap, SpaceKind};
use hyperfill::paths::{
    ascending_min_path, build_binary_structure, main_path_search, path_count_census, s_bound, Target,
};
use hyperfill::weak_norm::{cross_exponent_bound, flatten_below_one, lp_norm, weak_quantity_of, WeakMode};
use hyperfill::{Error, Filling, Space, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub module: &'static str,
    pub check: &'static str,
    pub pass: bool,
    pub detail: String,
}

type Outcome = Result<(bool, String), Error>;

fn space(kind: SpaceKind, params: &[(&str, f64)]) -> Result<Space, Error> {
    let p: ParamMap = params.iter().map(|&(k, v)| (k.to_string(), v)).collect();
    make_model_space(kind, &p)
}

fn filling(kind: SpaceKind, h: f64, depth: u32) -> Result<Filling, Error> {
    build_filling(Arc::new(space(kind, &[("h", h)])?), 2.0, depth)
}

fn normalized_diameter(_: &mut ChaCha8Rng) -> Outcome {
    let cases: [(SpaceKind, &[(&str, f64)]); 6] = [
        (SpaceKind::Interval, &[("h", 0.01)]),
        (SpaceKind::Circle, &[("h", 0.02)]),
        (SpaceKind::Square, &[("h", 1.0 / 32.0)]),
        (SpaceKind::Sphere, &[("h", 0.05)]),
        (SpaceKind::Carpet, &[("depth", 3.0)]),
        (SpaceKind::Snowflake, &[("h", 0.01), ("alpha", 0.5)]),
    ];
    let mut worst: f64 = 0.0;
    for (k, p) in cases {
        worst = worst.max((space(k, p)?.diameter() - 1.0).abs());
    }
    Ok((worst < 1e-9, format!("max |diam - 1| = {worst:.3e}")))
}

fn regularity_fit(_: &mut ChaCha8Rng) -> Outcome {
    let sq = regularity_probe(&space(SpaceKind::Square, &[("h", 1.0 / 128.0)])?, &[0.05, 0.1, 0.2, 0.4])?;
    let iv = regularity_probe(&space(SpaceKind::Interval, &[("h", 1.0 / 512.0)])?, &[0.05, 0.1, 0.2, 0.4])?;
    let ok = (sq.exponent_fit - 2.0).abs() < 0.2 && (iv.exponent_fit - 1.0).abs() < 0.1;
    Ok((ok, format!("square {:.4} interval {:.4}", sq.exponent_fit, iv.exponent_fit)))
}

fn filling_invariants(_: &mut ChaCha8Rng) -> Outcome {
    let carpet = Arc::new(space(SpaceKind::Carpet, &[("depth", 3.0)])?);
    let cl = carpet.max_level(2.0).min(5);
    let fs = [
        filling(SpaceKind::Interval, 1.0 / 128.0, 5)?,
        filling(SpaceKind::Square, 1.0 / 64.0, 4)?,
        build_filling(carpet, 2.0, cl)?,
    ];
    let reports: Vec<_> = fs.iter().map(check_filling).collect();
    let ok = reports.iter().all(|r| r.all_pass());
    let degrees: Vec<String> = reports.iter().map(|r| r.max_degree.to_string()).collect();
    Ok((ok, format!("max degrees {}", degrees.join("/"))))
}

fn single_root(_: &mut ChaCha8Rng) -> Outcome {
    let f = filling(SpaceKind::Interval, 1.0 / 64.0, 3)?;
    let n = f.level_range(0).len();
    Ok((n == 1 && f.level(f.root()) == 0, format!("{n} level-0 vertex")))
}

fn random_vector(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.gen_range(0..120);
    (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => 0.0,
            1 => 0.5,
            _ => rng.gen::<f64>().powi(rng.gen_range(1..6)),
        })
        .collect()
}

fn weak_modes_agree(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let v = random_vector(rng);
        let p = rng.gen_range(0.5..5.0);
        let a = weak_quantity_of(&v, p, WeakMode::Sorted)?;
        let b = weak_quantity_of(&v, p, WeakMode::Tail)?;
        if a.max(b) > 0.0 {
            worst = worst.max((a - b).abs() / a.max(b));
        }
    }
    Ok((worst <= 1e-12, format!("max relative difference {worst:.3e}")))
}

fn weak_below_lp(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst = f64::INFINITY;
    for _ in 0..300 {
        let v = random_vector(rng);
        let p = rng.gen_range(0.5..5.0);
        let w = Weights::new(Domain::Vertex, v)?;
        let l = lp_norm(&w, p)?;
        if l > 0.0 {
            worst = worst.min(1.0 - w.weak(p) / l);
        }
    }
    Ok((worst >= -1e-12, format!("min 1 - weak/lp {worst:.3e}")))
}

fn cross_exponent(rng: &mut ChaCha8Rng) -> Outcome {
    let f = filling(SpaceKind::Interval, 1.0 / 64.0, 5)?;
    let mut worst = f64::INFINITY;
    for _ in 0..50 {
        let v: Vec<f64> = (0..f.vertex_count())
            .map(|i| if f.level(i) < 2 && rng.gen_bool(0.5) { 1.0 } else { 0.7 * rng.gen::<f64>().powi(3) })
            .collect();
        let p = rng.gen_range(1.2..3.0);
        let q = p + 1.0;
        let fl = flatten_below_one(&Weights::new(Domain::Vertex, v)?, &f)?;
        let lhs: f64 = fl.weights.values().iter().map(|x| x.powf(q)).sum();
        let rhs = cross_exponent_bound(fl.weights.weak(p), p, q, fl.epsilon);
        worst = worst.min(1.0 - lhs / rhs);
    }
    Ok((worst >= -1e-12, format!("min 1 - lhs/rhs {worst:.3e}")))
}

fn s_bound_series(_: &mut ChaCha8Rng) -> Outcome {
    let s: f64 = s_bound(1.0, 1.0, 1, 2.0)?;
    let shrinks = (1..=6).map(|e| s_bound(1.0, 10f64.powi(-e), 2, 2.0)).collect::<Result<Vec<_>, _>>()?;
    let ok = (s - 3.8).abs() < 0.05 && shrinks.windows(2).all(|w| w[1] < w[0]);
    Ok((ok, format!("S(1, 1, 1, 2) = {s:.6}")))
}

fn path_count_tight(rng: &mut ChaCha8Rng) -> Outcome {
    let mut ok = true;
    for _ in 0..50 {
        let count = rng.gen_range(2..40);
        let j = rng.gen_range(0..count);
        let h = rng.gen_range(0.5..4.0);
        let mut lengths = vec![0.0; count - j];
        lengths.extend(std::iter::repeat_n(h * (1.0 + 1e-6), j));
        let c = path_count_census(&lengths, h)?;
        ok &= c.cheap == c.bound && c.bound == count - j;
    }
    Ok((ok, "bound attained on 50 families".into()))
}

fn ascending_paths(rng: &mut ChaCha8Rng) -> Outcome {
    let f = filling(SpaceKind::Square, 1.0 / 512.0, 8)?;
    let sp = f.space();
    let z = (sp.len() - 1) / 2;
    let b = Region::ball(sp, z, 0.3)?;
    let t = build_binary_structure(&f, f.nearest_at_level(2, z), 3, Target::Inside(&b))?;
    if let Err(e) = t.verify(&f) {
        return Ok((false, e));
    }
    let ne = f.graph().edge_count();
    let edges = t.edges();
    let mut worst = f64::INFINITY;
    for _ in 0..30 {
        let p = rng.gen_range(1.5..3.0);
        let mut v = vec![0.0; ne];
        for &e in &edges {
            v[e] = rng.gen::<f64>().powi(rng.gen_range(1..8));
        }
        let w = Weights::new(Domain::Edge, v)?;
        let a = w.weak(p);
        let beta = w.max_value();
        if a > 0.0 {
            let bound = s_bound(a, beta, t.m, p)?;
            worst = worst.min(bound - ascending_min_path(&t, &w).length);
        }
    }
    let zero = Weights::zeros(Domain::Edge, ne);
    let main = main_path_search(&t, &zero, 0.5, 2.0, 1.0);
    let main_ok = match &main {
        Ok(o) => o.path.as_ref().is_some_and(|p| p.length < 0.5),
        Err(Error::DepthExhausted(_)) => true,
        Err(_) => false,
    };
    Ok((worst >= 0.0 && main_ok, format!("M = {} min slack {worst:.4e}", t.m)))
}

fn path_graph(n: usize) -> Graph {
    Graph::from_edges(n + 1, &(0..n).map(|i| (i, i + 1)).collect::<Vec<_>>())
}

fn modulus_closed_forms(_: &mut ChaCha8Rng) -> Outcome {
    let mut worst: f64 = 0.0;
    for &p in &[1.5, 2.0, 3.0] {
        let n = 6;
        let single = PathProblem::new(path_graph(n), vec![0], vec![n], p, Domain::Edge)?;
        let want = (n as f64).powf(1.0 - p);
        worst = worst.max((modulus_solve(&single)?.value - want).abs() / want);
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
        let par = PathProblem::new(Graph::from_edges(next, &edges), vec![0], vec![1], p, Domain::Edge)?;
        let want = k as f64 * (n as f64).powf(1.0 - p);
        let sol = modulus_solve(&par)?;
        worst = worst.max((sol.value - want).abs() / want);
        if disjoint_path_lower(&par).value > sol.value * (1.0 + 1e-9) {
            return Ok((false, "disjoint lower bound exceeds the modulus".into()));
        }
    }
    Ok((worst < 1e-6, format!("max relative error {worst:.3e}")))
}

fn interval_pair(f: &Filling, r: f64) -> Result<SetPair<f64>, Error> {
    let sp = f.space();
    SetPair::new(sp, Region::ball(sp, 0, r)?, Region::ball(sp, sp.len() - 1, r)?)
}

fn estimate_bracket(_: &mut ChaCha8Rng) -> Outcome {
    let f = filling(SpaceKind::Interval, 1.0 / 256.0, 6)?;
    let pair = interval_pair(&f, 0.1)?;
    let e = wcap_estimate(&f, &pair, 2.0, 6, &EstimateOptions::default())?;
    let tp = hyperfill::capacity::TruncatedProblem::new(&f, &pair, 2.0, 6, Domain::Vertex)?;
    let adm = check_admissible(&tp.problem, &e.upper_witness)?;
    let ok = e.lower <= e.upper * (1.0 + 1e-9) && adm.admissible && e.upper.is_finite();
    Ok((ok, format!("[{:.6}, {:.6}] by {}", e.lower, e.upper, e.upper_method)))
}

fn level_chain(_: &mut ChaCha8Rng) -> Outcome {
    let f = filling(SpaceKind::Interval, 1.0 / 256.0, 6)?;
    let pair = interval_pair(&f, 0.05)?;
    let small = matches!(mod_p_level(&f, &pair, 2.0, 3), Err(Error::RegionTooSmall { .. }));
    let r = mod_p_level(&f, &pair, 2.0, 5)?;
    // The level graph of an interval is a chain; the endpoint sets are joined by a chain of
    // at most its length minus the source and target cores.
    let m = f.level_range(5).len() as f64;
    let ok = small && r.converged && r.value >= m.powf(-1.0) && r.kappa.covers && r.kappa.disjoint_cores;
    Ok((ok, format!("mod_2 at level 5 = {:.6}", r.value)))
}

fn exponent_rules(_: &mut ChaCha8Rng) -> Outcome {
    let sp = space(SpaceKind::Interval, &[("h", 1.0 / 400.0)])?;
    let a = Region::from_members(&sp, &(0..=100).collect::<Vec<_>>())?;
    let b = Region::from_members(&sp, &(300..=400).collect::<Vec<_>>())?;
    let d = relative_distance(&sp, &a, &b)?;
    let sym = relative_distance(&sp, &b, &a)? == d;
    let id = |u: f64| u;
    let phi = qs_transfer_bound(&id, 6.0)?;
    let v = verdict(&[5, 6, 7], &[1.0, 2.5, 5.0], &[10.0, 20.0, 40.0], 0.1) == Verdict::Growing
        && verdict(&[5, 6, 7], &[1.0, 1.1, 1.2], &[2.0, 2.1, 2.15], 0.1) == Verdict::Bounded;
    let ok = (d - 2.0).abs() < 1e-12 && sym && (phi - 2.0).abs() < 1e-12 && v;
    Ok((ok, format!("delta {d:.6} transfer(6) {phi:.6}")))
}

type Check = (&'static str, &'static str, fn(&mut ChaCha8Rng) -> Outcome);

const CHECKS: &[Check] = &[
    ("metric_space", "normalized_diameter", normalized_diameter),
    ("metric_space", "regularity_fit", regularity_fit),
    ("filling", "invariants", filling_invariants),
    ("filling", "single_root", single_root),
    ("weak_norm", "tail_equals_sorted", weak_modes_agree),
    ("weak_norm", "weak_below_lp", weak_below_lp),
    ("weak_norm", "cross_exponent", cross_exponent),
    ("paths", "s_bound_series", s_bound_series),
    ("paths", "path_count_tight", path_count_tight),
    ("paths", "ascending_paths", ascending_paths),
    ("capacity", "closed_forms", modulus_closed_forms),
    ("capacity", "estimate_bracket", estimate_bracket),
    ("level_modulus", "chain_and_scale", level_chain),
    ("exponents", "rules", exponent_rules),
];

/// Runs every check with its own stream derived from `seed`.
pub fn run(seed: u64) -> Vec<Row> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, &(module, check, f))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64));
            let (pass, detail) = match f(&mut rng) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            Row { module, check, pass, detail }
        })
        .collect()
}
