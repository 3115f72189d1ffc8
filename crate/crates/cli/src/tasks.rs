use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hyperfill::capacity::{wcap_estimate, EstimateOptions, PotentialOptions, RingParams, SolverOptions};
use hyperfill::exponents::{exponent_sweep, phi_curve, sample_pairs, PairRecord, PhiOptions, SweepOptions};
use hyperfill::filling::{build_filling, check_filling, Region, SetPair};
use hyperfill::graph::Domain;
use hyperfill::level_modulus::mod_p_level;
use hyperfill::metric_space::{make_model_space, regularity_probe, ParamMap, SpaceKind};
use hyperfill::{Error, Filling, Space};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Config, ConfigError, ConfigResult};
use crate::suite;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Space,
    Fill,
    Cap,
    Mod,
    Phi,
    Sweep,
    Suite,
}

impl Task {
    /// Name recorded in the manifest.
    pub fn name(self) -> &'static str {
        match self {
            Task::Space => "space",
            Task::Fill => "fill-export",
            Task::Cap => "capacity",
            Task::Mod => "level-modulus",
            Task::Phi => "phi-curve",
            Task::Sweep => "sweep",
            Task::Suite => "lemma-suite",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Task::Space => "space",
            Task::Fill => "fill",
            Task::Cap => "cap",
            Task::Mod => "mod",
            Task::Phi => "phi",
            Task::Sweep => "sweep",
            Task::Suite => "suite",
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(Error),
    Io(std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Compute(e) => write!(f, "computation failed: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Compute(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

type RunResult<T> = Result<T, RunError>;

/// Files written by a task, relative to the output directory.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<S: Serialize>(&mut self, name: &str, v: &S) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(v).expect("outputs serialize");
        s.push('\n');
        self.write(name, s.as_bytes())
    }
}

struct SpaceSpec {
    kind: SpaceKind,
    params: ParamMap,
}

fn space_spec(cfg: &Config) -> ConfigResult<SpaceSpec> {
    let kind: String = cfg.require("space.kind")?;
    let kind: SpaceKind = kind.parse().map_err(|e: Error| ConfigError::new("space.kind", e.to_string()))?;
    let mut params = ParamMap::new();
    for key in ["h", "alpha", "depth"] {
        if let Some(v) = cfg.get::<f64>(&format!("space.{key}"))? {
            params.insert(key.to_string(), v);
        }
    }
    Ok(SpaceSpec { kind, params })
}

fn build_space(spec: &SpaceSpec) -> RunResult<Space> {
    make_model_space(spec.kind, &spec.params).map_err(|e| match e {
        Error::InvalidParameter { name, reason } => RunError::Config(ConfigError::new(format!("space.{name}"), reason)),
        other => RunError::Compute(other),
    })
}

struct FillSpec {
    s: f64,
    max_level: Option<u32>,
}

fn fill_spec(cfg: &Config) -> ConfigResult<FillSpec> {
    let s: f64 = cfg.get_or("filling.s", 2.0)?;
    if !(s > 1.0 && s.is_finite()) {
        return Err(ConfigError::new("filling.s", "must exceed 1"));
    }
    Ok(FillSpec { s, max_level: cfg.peek("filling.max_level")? })
}

fn build(cfg: &Config, space: &SpaceSpec, fill: &FillSpec) -> RunResult<Filling> {
    let space = Arc::new(build_space(space)?);
    let max = space.max_level(fill.s);
    let level = fill.max_level.unwrap_or(max);
    cfg.record("filling.max_level", &level);
    build_filling(space, fill.s, level).map_err(|e| match e {
        Error::ResolutionGuard { .. } => RunError::Config(ConfigError::new("filling.max_level", e.to_string())),
        other => RunError::Compute(other),
    })
}

enum PairSpec {
    Explicit(Vec<[f64; 4]>),
    Random { count: usize, radius: (f64, f64), max_dist: f64 },
}

fn pair_spec(cfg: &Config, prefix: &str) -> ConfigResult<PairSpec> {
    let key = format!("{prefix}.pairs");
    let rkey = format!("{prefix}.random_pairs");
    let explicit: Option<Vec<[f64; 4]>> = cfg.get(&key)?;
    let random: Option<usize> = cfg.get(&rkey)?;
    match (explicit, random) {
        (Some(_), Some(_)) => Err(ConfigError::new(rkey, format!("conflicts with `{key}`"))),
        (None, None) => Err(ConfigError::new(key, "missing (or give a count in `random_pairs`)")),
        (Some(list), None) => {
            for q in &list {
                for i in [0, 2] {
                    if !(q[i] >= 0.0 && q[i].fract() == 0.0) {
                        return Err(ConfigError::new(key, format!("center {} is not a point index", q[i])));
                    }
                }
                if !(q[1] > 0.0 && q[3] > 0.0) {
                    return Err(ConfigError::new(key, "radii must be positive"));
                }
            }
            Ok(PairSpec::Explicit(list))
        }
        (None, Some(count)) => {
            if count == 0 {
                return Err(ConfigError::new(rkey, "must be positive"));
            }
            let rk = format!("{prefix}.radius");
            let [lo, hi]: [f64; 2] = cfg.get_or(&rk, [0.09, 0.12])?;
            if !(lo > 0.0 && lo <= hi) {
                return Err(ConfigError::new(rk, "need 0 < lo <= hi"));
            }
            let max_dist: f64 = cfg.get_or(&format!("{prefix}.max_dist"), 0.5)?;
            Ok(PairSpec::Random { count, radius: (lo, hi), max_dist })
        }
    }
}

fn make_pairs(f: &Filling, spec: &PairSpec, prefix: &str, min_dist: f64, seed: u64) -> RunResult<Vec<SetPair<f64>>> {
    let space = f.space();
    match spec {
        PairSpec::Explicit(list) => list
            .iter()
            .map(|q| {
                let (a, b) = (q[0] as usize, q[2] as usize);
                if a >= space.len() || b >= space.len() {
                    return Err(RunError::Config(ConfigError::new(
                        format!("{prefix}.pairs"),
                        format!("point index out of range (sample has {} points)", space.len()),
                    )));
                }
                let ra = Region::ball(space, a, q[1])?;
                let rb = Region::ball(space, b, q[3])?;
                Ok(SetPair::new(space, ra, rb)?)
            })
            .collect(),
        PairSpec::Random { count, radius, max_dist } => {
            let opts = SweepOptions { seed, radius: *radius, max_dist: *max_dist, ..SweepOptions::default() };
            Ok(sample_pairs(f, *count, min_dist, &opts)?)
        }
    }
}

fn check_p(key: &str, ps: &[f64]) -> ConfigResult<()> {
    if ps.is_empty() {
        return Err(ConfigError::new(key, "must not be empty"));
    }
    match ps.iter().find(|&&p| !(p > 1.0 && p.is_finite())) {
        Some(p) => Err(ConfigError::new(key, format!("exponent {p} must exceed 1"))),
        None => Ok(()),
    }
}

fn check_levels(key: &str, levels: &[u32], increasing: bool) -> ConfigResult<()> {
    if levels.is_empty() {
        return Err(ConfigError::new(key, "must not be empty"));
    }
    if levels.contains(&0) {
        return Err(ConfigError::new(key, "levels start at 1"));
    }
    if increasing && levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::new(key, "must be strictly increasing"));
    }
    Ok(())
}

fn check_depth_fits(key: &str, levels: &[u32], f: &Filling) -> RunResult<()> {
    match levels.iter().find(|&&n| n > f.max_level()) {
        Some(n) => Err(RunError::Config(ConfigError::new(
            key,
            format!("level {n} exceeds filling.max_level {}", f.max_level()),
        ))),
        None => Ok(()),
    }
}

fn estimate_options(cfg: &Config, prefix: &str) -> ConfigResult<EstimateOptions<f64>> {
    let dkey = format!("{prefix}.domain");
    let domain = match cfg.get_or(&dkey, "vertex".to_string())?.as_str() {
        "vertex" => Domain::Vertex,
        "edge" => Domain::Edge,
        other => return Err(ConfigError::new(dkey, format!("unknown domain `{other}` (vertex or edge)"))),
    };
    let ikey = format!("{prefix}.iterations");
    let iterations: usize = cfg.get_or(&ikey, 40)?;
    if iterations == 0 {
        return Err(ConfigError::new(ikey, "must be positive"));
    }
    let lkey = format!("{prefix}.lq");
    let lq: f64 = cfg.get_or(&lkey, 0.5)?;
    if !(lq >= 0.0) {
        return Err(ConfigError::new(lkey, "must be nonnegative (0 disables)"));
    }
    let ring: bool = cfg.get_or(&format!("{prefix}.ring"), true)?;
    let potential: bool = cfg.get_or(&format!("{prefix}.potential"), true)?;
    Ok(EstimateOptions {
        domain,
        solver: SolverOptions { max_iterations: iterations, ..SolverOptions::default() },
        lq_offset: (lq > 0.0).then_some(lq),
        ring: ring.then(RingParams::default),
        potential: potential.then(PotentialOptions::default),
        extra: Vec::new(),
    })
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Index triples in row-major order.
fn grid(a: usize, b: usize, c: usize) -> Vec<(usize, usize, usize)> {
    (0..a).flat_map(|i| (0..b).flat_map(move |j| (0..c).map(move |k| (i, j, k)))).collect()
}

fn anchor_min_dist(f: &Filling, depth: u32) -> f64 {
    8.0 * f.s().powi(-(depth as i32))
}

/// Validates `cfg` for `task`, runs it, and writes its outputs and `manifest.json` to `out`.
pub fn run(task: Task, cfg: &Config, out: &Path) -> RunResult<Vec<String>> {
    if let Some(t) = cfg.peek::<String>("task")? {
        if t != task.name() && t != task.short() {
            return Err(
                ConfigError::new("task", format!("`{t}` does not match the `{}` subcommand", task.short())).into()
            );
        }
    }
    cfg.record("task", &task.name());
    let seed: u64 = cfg.require("seed")?;
    let mut outputs = Outputs::new(out)?;
    match task {
        Task::Suite => {
            cfg.finish()?;
            let rows = suite::run(seed);
            let mut csv = String::from("module,check,status,detail\n");
            for r in &rows {
                let _ = writeln!(
                    csv,
                    "{},{},{},{}",
                    r.module,
                    r.check,
                    if r.pass { "pass" } else { "fail" },
                    r.detail.replace(',', ";")
                );
            }
            outputs.write("suite.csv", csv.as_bytes())?;
            outputs.json("suite.json", &rows)?;
        }
        Task::Space => {
            let spec = space_spec(cfg)?;
            let radii: Option<Vec<f64>> = cfg.get("space.radii")?;
            cfg.finish()?;
            let space = build_space(&spec)?;
            let regularity = match &radii {
                Some(r) => Some(regularity_probe(&space, r).map_err(|e| match e {
                    Error::InvalidParameter { reason, .. } => RunError::Config(ConfigError::new("space.radii", reason)),
                    other => RunError::Compute(other),
                })?),
                None => None,
            };
            let mut txt = Vec::new();
            space.write_to(&mut txt)?;
            outputs.write("space.txt", &txt)?;
            outputs.json(
                "space.json",
                &json!({
                    "kind": space.kind(),
                    "params": space.params(),
                    "points": space.len(),
                    "dim": space.dim(),
                    "resolution": space.resolution(),
                    "diameter": space.diameter(),
                    "regularity": regularity,
                }),
            )?;
        }
        Task::Fill => {
            let spec = space_spec(cfg)?;
            let fs = fill_spec(cfg)?;
            cfg.finish()?;
            let f = build(cfg, &spec, &fs)?;
            let mut txt = Vec::new();
            f.write_to(&mut txt)?;
            outputs.write("filling.txt", &txt)?;
            let levels: Vec<usize> = (0..=f.max_level()).map(|k| f.level_range(k).len()).collect();
            outputs.json(
                "filling.json",
                &json!({
                    "s": f.s(),
                    "max_level": f.max_level(),
                    "vertices": f.vertex_count(),
                    "edges": f.graph().edge_count(),
                    "level_counts": levels,
                    "max_degree": f.max_degree(),
                    "checks": check_filling(&f),
                }),
            )?;
        }
        Task::Cap => {
            let spec = space_spec(cfg)?;
            let fs = fill_spec(cfg)?;
            let ps: Vec<f64> = cfg.get_or("cap.p", vec![2.0])?;
            check_p("cap.p", &ps)?;
            let depths: Vec<u32> = cfg.require("cap.depth")?;
            check_levels("cap.depth", &depths, false)?;
            let pairs = pair_spec(cfg, "cap")?;
            let opts = estimate_options(cfg, "cap")?;
            let witness: bool = cfg.get_or("cap.witness", false)?;
            cfg.finish()?;
            let f = build(cfg, &spec, &fs)?;
            check_depth_fits("cap.depth", &depths, &f)?;
            let min_depth = *depths.iter().min().unwrap();
            let pairs = make_pairs(&f, &pairs, "cap", anchor_min_dist(&f, min_depth), seed)?;
            let jobs = grid(pairs.len(), ps.len(), depths.len());
            let results: Vec<_> = jobs
                .par_iter()
                .map(|&(i, j, k)| wcap_estimate(&f, &pairs[i], ps[j], depths[k], &opts))
                .collect::<Result<_, _>>()?;
            let mut rows = Vec::new();
            for (&(i, j, k), est) in jobs.iter().zip(&results) {
                let file = witness.then(|| format!("witness/pair{i}_p{j}_d{k}.txt"));
                if let Some(name) = &file {
                    let mut s = format!(
                        "# domain={} p={} depth={}\n",
                        domain_name(est.upper_witness.domain()),
                        fmt_f(est.p),
                        est.depth
                    );
                    for (id, &w) in est.upper_witness.values().iter().enumerate() {
                        if w > 0.0 {
                            let _ = writeln!(s, "{id} {}", fmt_f(w));
                        }
                    }
                    outputs.write(name, s.as_bytes())?;
                }
                rows.push(json!({ "pair": i, "p": ps[j], "depth": depths[k], "estimate": est, "witness": file }));
            }
            let records: Vec<PairRecord<f64>> = pairs.iter().map(PairRecord::of).collect();
            outputs.json("estimates.json", &json!({ "pairs": records, "estimates": rows }))?;
        }
        Task::Mod => {
            let spec = space_spec(cfg)?;
            let fs = fill_spec(cfg)?;
            let ps: Vec<f64> = cfg.get_or("mod.p", vec![2.0])?;
            check_p("mod.p", &ps)?;
            let levels: Vec<u32> = cfg.require("mod.levels")?;
            check_levels("mod.levels", &levels, false)?;
            let pairs = pair_spec(cfg, "mod")?;
            cfg.finish()?;
            let f = build(cfg, &spec, &fs)?;
            check_depth_fits("mod.levels", &levels, &f)?;
            let pairs = make_pairs(&f, &pairs, "mod", 0.0, seed)?;
            let jobs = grid(pairs.len(), ps.len(), levels.len());
            let results: Vec<_> = jobs
                .par_iter()
                .map(|&(i, j, k)| mod_p_level(&f, &pairs[i], ps[j], levels[k]))
                .collect::<Result<_, _>>()?;
            let mut csv = String::from("pair_id,p,n,delta,modulus,iterations,gap\n");
            let mut rows = Vec::new();
            for (&(i, _, _), r) in jobs.iter().zip(&results) {
                let _ = writeln!(
                    csv,
                    "{i},{},{},{},{},{},{}",
                    fmt_f(r.p),
                    r.level,
                    fmt_f(r.delta),
                    fmt_f(r.value),
                    r.iterations,
                    fmt_f(r.gap)
                );
                rows.push(json!({ "pair": i, "result": r }));
            }
            outputs.write("level_modulus.csv", csv.as_bytes())?;
            let records: Vec<PairRecord<f64>> = pairs.iter().map(PairRecord::of).collect();
            outputs.json("level_modulus.json", &json!({ "pairs": records, "levels": rows }))?;
        }
        Task::Phi => {
            let spec = space_spec(cfg)?;
            let fs = fill_spec(cfg)?;
            let p: f64 = cfg.get_or("phi.p", 2.0)?;
            check_p("phi.p", &[p])?;
            let ts: Vec<f64> = cfg.require("phi.t")?;
            if ts.is_empty() || ts.iter().any(|&t| !(t > 0.0)) || ts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ConfigError::new("phi.t", "must be positive and strictly increasing").into());
            }
            let per_t: usize = cfg.get_or("phi.pairs_per_t", 2)?;
            if per_t == 0 {
                return Err(ConfigError::new("phi.pairs_per_t", "must be positive").into());
            }
            let depth: u32 = cfg.require("phi.depth")?;
            check_levels("phi.depth", &[depth], false)?;
            let tolerance: f64 = cfg.get_or("phi.tolerance", 0.05)?;
            if !(tolerance > 0.0 && tolerance < 1.0) {
                return Err(ConfigError::new("phi.tolerance", "must lie in (0, 1)").into());
            }
            let [k0, k1]: [f64; 2] = cfg.get_or("phi.radius_ratio", [1.0, 2.0])?;
            if !(k0 >= 1.0 && k0 <= k1) {
                return Err(ConfigError::new("phi.radius_ratio", "need 1 <= lo <= hi").into());
            }
            let estimate = estimate_options(cfg, "phi")?;
            cfg.finish()?;
            let f = build(cfg, &spec, &fs)?;
            check_depth_fits("phi.depth", &[depth], &f)?;
            let opts = PhiOptions { seed, tolerance, radius_ratio: (k0, k1), estimate, ..PhiOptions::default() };
            let curve = phi_curve(&f, p, &ts, per_t, depth, &opts)?;
            let mut csv = String::from("p,t,upper_env,lower_env,pairs\n");
            for s in &curve.samples {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    fmt_f(curve.p),
                    fmt_f(s.t),
                    fmt_f(s.upper),
                    fmt_f(s.lower),
                    s.pairs
                );
            }
            outputs.write("curve.csv", csv.as_bytes())?;
            outputs.json("curve.json", &curve)?;
        }
        Task::Sweep => {
            let spec = space_spec(cfg)?;
            let fs = fill_spec(cfg)?;
            let ps: Vec<f64> = cfg.require("sweep.p")?;
            check_p("sweep.p", &ps)?;
            let count: usize = cfg.get_or("sweep.pairs", 2)?;
            if count == 0 {
                return Err(ConfigError::new("sweep.pairs", "must be positive").into());
            }
            let depths: Vec<u32> = cfg.require("sweep.depths")?;
            check_levels("sweep.depths", &depths, true)?;
            let [lo, hi]: [f64; 2] = cfg.get_or("sweep.radius", [0.09, 0.12])?;
            if !(lo > 0.0 && lo <= hi) {
                return Err(ConfigError::new("sweep.radius", "need 0 < lo <= hi").into());
            }
            let max_dist: f64 = cfg.get_or("sweep.max_dist", 0.5)?;
            let stable: f64 = cfg.get_or("sweep.stable", 0.1)?;
            if !(stable > 0.0) {
                return Err(ConfigError::new("sweep.stable", "must be positive").into());
            }
            let estimate = estimate_options(cfg, "sweep")?;
            cfg.finish()?;
            let f = build(cfg, &spec, &fs)?;
            check_depth_fits("sweep.depths", &depths, &f)?;
            let opts = SweepOptions { seed, radius: (lo, hi), max_dist, stable, estimate, ..SweepOptions::default() };
            let report = exponent_sweep(&f, &ps, count, &depths, &opts)?;
            outputs.json("sweep.json", &report)?;
        }
    }
    let mut files = outputs.files.clone();
    files.sort();
    let manifest: Value = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "task": task.name(),
        "config": cfg.resolved(),
        "outputs": files,
    });
    outputs.json("manifest.json", &manifest)?;
    Ok(outputs.files)
}

fn domain_name(d: Domain) -> &'static str {
    match d {
        Domain::Vertex => "vertex",
        Domain::Edge => "edge",
    }
}
