//! Config-driven experiment runner.
//!
//! A config expands into an ordered list of tasks, each a pure function of
//! its parameters and a seed derived from the master seed. Tasks run on a
//! pool of the requested size and their rows are written in task order, so
//! outputs do not depend on the worker count.

mod config;

pub use config::{
    Common, CycleSource, EntangleConfig, ExperimentConfig, ExperimentKind, GraphSource, Grid, KindConfig,
    LabyrinthConfig, PercConfig, RcConfig, ScanConfig,
};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{count_connected_edge_sets, linking_number_seeded, LatticeCycle, MAX_ANIMAL_EDGES};
use crate::error::{check_probability, Error};
use crate::graph::{build_graph, FiniteGraph, LatticeSpec};
use crate::labyrinth::{msd_curve, sample_environment, BoundaryPolicy, EnvParams, MsdPoint};
use crate::percolation::{crossing_probability, estimate_pc, CrossingRow, PcOptions};
use crate::random_cluster::{leaf_boundary, rc_summary, RcParams, RcRow};
use crate::rigidity::{estimate_theta_rig, grid_pivot, RigidityPoint};
use crate::seed::{derive_seed, RngSeed};
use crate::sets::VertexSet;
use crate::uniqueness::{trifurcation_scan, UniquenessRow};

pub const TOOL_NAME: &str = "perclab";
pub const WORKERS_ENV: &str = "PERCLAB_WORKERS";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::Runtime(_) => 2,
        }
    }
}

fn config_err(e: Error) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn runtime_err(e: Error) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub index: usize,
    pub seed: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub workers: usize,
    pub wall_time_seconds: f64,
    pub tasks: Vec<TaskRecord>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<OutputFile>,
    pub tasks: Vec<TaskRecord>,
}

enum Task {
    Pc { spec: LatticeSpec, tolerance: f64, options: PcOptions },
    Crossing { spec: LatticeSpec, p: f64 },
    Trifurcation { spec: LatticeSpec, p: f64 },
    Rc { graph: Arc<FiniteGraph>, params: RcParams, pair: (usize, usize) },
    Rigidity { spec: LatticeSpec, p: f64 },
    Count { n: usize },
    Link { index: usize, a: LatticeCycle, b: LatticeCycle },
    Msd { params: EnvParams, dims: Vec<usize>, t_max: usize, boundary: BoundaryPolicy },
}

impl Task {
    fn label(&self) -> String {
        match self {
            Task::Pc { spec, .. } => format!("pc {spec}"),
            Task::Crossing { spec, p } => format!("crossing {spec} p={p}"),
            Task::Trifurcation { spec, p } => format!("trifurcations {spec} p={p}"),
            Task::Rc { params, .. } => format!("rc p={} q={} b={}", params.p, params.q, params.boundary.as_bit()),
            Task::Rigidity { spec, p } => format!("rigidity {spec} p={p}"),
            Task::Count { n } => format!("edge sets n={n}"),
            Task::Link { index, .. } => format!("linking pair {index}"),
            Task::Msd { dims, .. } => format!("msd dims={dims:?}"),
        }
    }
}

/// Rows destined for one output file.
type Rows = Vec<(&'static str, String)>;

struct TaskResult {
    rows: Rows,
    rigidity: Option<RigidityPoint>,
}

struct Plan {
    /// File names with their CSV headers, in output order.
    files: Vec<(&'static str, &'static str)>,
    tasks: Vec<Task>,
    /// Scan kinds share one seed over the grid (common random numbers),
    /// which keeps per-replica outcomes monotone in `p`.
    shared_seed: bool,
}

const PC_HEADER: &str = "spec,L,replicas,tolerance,p_c,lower,upper,iterations,rule,clamped";
const COUNT_HEADER: &str = "n,count";
const LINK_HEADER: &str = "pair,length_a,length_b,linking_number,projection_1,projection_2";
const FIT_HEADER: &str = "delta_hat,fit_residual,stabilized,localized";
const PIVOT_HEADER: &str = "statistic,pivot,stderr,clamped";

fn grid(g: &Grid) -> Result<Vec<f64>, HarnessError> {
    let values = g.values()?;
    for &p in &values {
        check_probability(p).map_err(config_err)?;
    }
    Ok(values)
}

fn load_cycle(source: &CycleSource, base: &Path) -> Result<LatticeCycle, HarnessError> {
    match source {
        CycleSource::Inline(v) => LatticeCycle::new(v.clone()).map_err(config_err),
        CycleSource::File(path) => {
            let full = if path.is_absolute() { path.clone() } else { base.join(path) };
            let text = fs::read_to_string(&full)
                .map_err(|e| HarnessError::Config(format!("reading {}: {e}", full.display())))?;
            LatticeCycle::parse(&text).map_err(config_err)
        }
    }
}

/// The config with cycle files replaced by their vertices, so that the
/// manifest echo reruns from any directory.
fn self_contained(config: &ExperimentConfig, base: &Path) -> Result<ExperimentConfig, HarnessError> {
    let mut out = config.clone();
    if let KindConfig::Entangle(c) = &mut out.params {
        for pair in &mut c.pairs {
            for source in [&mut pair.0, &mut pair.1] {
                if let CycleSource::File(_) = source {
                    *source = CycleSource::Inline(load_cycle(source, base)?.vertices().to_vec());
                }
            }
        }
    }
    Ok(out)
}

/// Validates every parameter and expands the config into tasks.
fn plan(config: &ExperimentConfig, base: &Path) -> Result<Plan, HarnessError> {
    if config.replicas == 0 {
        return Err(HarnessError::Config("replicas must be at least 1".into()));
    }
    let kind_mismatch = || HarnessError::Config(format!("parameters do not fit experiment kind {}", config.kind));
    let mut tasks = Vec::new();
    let plan = match (&config.kind, &config.params) {
        (ExperimentKind::Perc, KindConfig::Perc(c)) => {
            if c.lattices.is_empty() {
                return Err(HarnessError::Config("no lattices given".into()));
            }
            if !(c.tolerance > 0.0) {
                return Err(HarnessError::Config(format!("tolerance must be positive, got {}", c.tolerance)));
            }
            let mut options = PcOptions::default();
            options.lower = c.lower.unwrap_or(options.lower);
            options.upper = c.upper.unwrap_or(options.upper);
            check_probability(options.lower).map_err(config_err)?;
            check_probability(options.upper).map_err(config_err)?;
            for &spec in &c.lattices {
                spec.validate().map_err(config_err)?;
                tasks.push(Task::Pc { spec, tolerance: c.tolerance, options });
            }
            Plan { files: vec![("pc.csv", PC_HEADER)], tasks, shared_seed: false }
        }
        (ExperimentKind::PcScan | ExperimentKind::Uniq | ExperimentKind::Rigid, KindConfig::Scan(c)) => {
            let spec = c.lattice;
            spec.validate().map_err(config_err)?;
            if !spec.is_box() {
                return Err(config_err(Error::NotABox));
            }
            let ps = grid(&c.p)?;
            match config.kind {
                ExperimentKind::PcScan => {
                    tasks.extend(ps.into_iter().map(|p| Task::Crossing { spec, p }));
                    Plan { files: vec![("crossing.csv", CrossingRow::HEADER)], tasks, shared_seed: true }
                }
                ExperimentKind::Uniq => {
                    tasks.extend(ps.into_iter().map(|p| Task::Trifurcation { spec, p }));
                    Plan { files: vec![("uniqueness.csv", UniquenessRow::HEADER)], tasks, shared_seed: false }
                }
                _ => {
                    if !matches!(spec, LatticeSpec::Triangular { .. }) {
                        return Err(HarnessError::Config(
                            "rigidity percolation needs the triangular lattice: the hypercubic lattice is not itself rigid"
                                .into(),
                        ));
                    }
                    tasks.extend(ps.into_iter().map(|p| Task::Rigidity { spec, p }));
                    Plan {
                        files: vec![("rigidity.csv", RigidityPoint::HEADER), ("rigidity_pivots.csv", PIVOT_HEADER)],
                        tasks,
                        shared_seed: true,
                    }
                }
            }
        }
        (ExperimentKind::Rc, KindConfig::Rc(c)) => {
            let graph = Arc::new(match &c.graph {
                GraphSource::Lattice { lattice } => build_graph(*lattice).map_err(config_err)?,
                GraphSource::Edges { vertices, edges, boundary } => {
                    let g = FiniteGraph::from_edges(*vertices, edges).map_err(config_err)?;
                    let set = match boundary {
                        Some(list) => {
                            if let Some(&v) = list.iter().find(|&&v| v >= *vertices) {
                                return Err(HarnessError::Config(format!("boundary vertex {v} out of range")));
                            }
                            VertexSet::from_indices(*vertices, list.iter().copied())
                        }
                        None => leaf_boundary(&g),
                    };
                    g.with_boundary(set).map_err(config_err)?
                }
            });
            let n = graph.vertex_count();
            let pair = c.pair.unwrap_or((0, n.saturating_sub(1)));
            if pair.0 >= n || pair.1 >= n {
                return Err(HarnessError::Config(format!("pair {pair:?} out of range for {n} vertices")));
            }
            if c.boundaries.is_empty() {
                return Err(HarnessError::Config("no boundary conditions given".into()));
            }
            let qs = c.q.values()?;
            for p in grid(&c.p)? {
                for &q in &qs {
                    for &boundary in &c.boundaries {
                        let params = RcParams { p, q, boundary, burn_in: c.burn_in, spacing: c.spacing };
                        params.validate_for_sampling().map_err(config_err)?;
                        tasks.push(Task::Rc { graph: Arc::clone(&graph), params, pair });
                    }
                }
            }
            Plan { files: vec![("rc.csv", RcRow::HEADER)], tasks, shared_seed: false }
        }
        (ExperimentKind::Entangle, KindConfig::Entangle(c)) => {
            if c.max_edges > MAX_ANIMAL_EDGES {
                return Err(HarnessError::Config(format!(
                    "max_edges {} exceeds the enumeration limit {MAX_ANIMAL_EDGES}",
                    c.max_edges
                )));
            }
            tasks.extend((1..=c.max_edges).map(|n| Task::Count { n }));
            for (index, (a, b)) in c.pairs.iter().enumerate() {
                let (a, b) = (load_cycle(a, base)?, load_cycle(b, base)?);
                if a.vertices().iter().any(|v| b.vertices().contains(v)) {
                    return Err(HarnessError::Config(format!("cycles of pair {index} share a vertex")));
                }
                tasks.push(Task::Link { index, a, b });
            }
            if tasks.is_empty() {
                return Err(HarnessError::Config("nothing to do: set max_edges or pairs".into()));
            }
            Plan { files: vec![("edge_sets.csv", COUNT_HEADER), ("linking.csv", LINK_HEADER)], tasks, shared_seed: false }
        }
        (ExperimentKind::Labyrinth, KindConfig::Labyrinth(c)) => {
            let params = EnvParams {
                p_rw: c.p_rw,
                p_cross: c.p_cross,
                reflectors: c.reflectors.clone(),
                weights: c.weights.clone(),
            };
            params.resolve(c.dims.len()).map_err(config_err)?;
            if c.p_rw <= 0.0 {
                return Err(HarnessError::Config("p_rw must be positive for diffusivity estimates".into()));
            }
            if c.t_max < 4 {
                return Err(HarnessError::Config("t_max must be at least 4".into()));
            }
            tasks.push(Task::Msd { params, dims: c.dims.clone(), t_max: c.t_max, boundary: c.boundary });
            Plan {
                files: vec![("msd.csv", MsdPoint::HEADER), ("msd_fit.csv", FIT_HEADER), ("environment.txt", "")],
                tasks,
                shared_seed: false,
            }
        }
        _ => return Err(kind_mismatch()),
    };
    Ok(plan)
}

fn run_task(task: &Task, replicas: usize, seed: RngSeed) -> Result<TaskResult, HarnessError> {
    let mut rigidity = None;
    let rows = match task {
        Task::Pc { spec, tolerance, options } => {
            let est = estimate_pc(*spec, replicas, *tolerance, seed, *options).map_err(runtime_err)?;
            let side = spec.box_side().unwrap_or(0);
            let rule = serde_json::to_value(est.rule).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            vec![(
                "pc.csv",
                format!(
                    "{spec},{side},{replicas},{tolerance},{},{},{},{},{rule},{}",
                    est.p_c, est.lower, est.upper, est.iterations, est.clamped
                ),
            )]
        }
        Task::Crossing { spec, p } => {
            let est = crossing_probability(*spec, *p, replicas, seed).map_err(runtime_err)?;
            let row = CrossingRow {
                spec: spec.to_string(),
                p: *p,
                side: spec.box_side().unwrap_or(0),
                replicas,
                crossing_fraction: est.mean,
                stderr: est.stderr,
                seed: seed.0,
            };
            vec![("crossing.csv", row.to_csv())]
        }
        Task::Trifurcation { spec, p } => {
            vec![("uniqueness.csv", trifurcation_scan(*spec, *p, replicas, seed).map_err(runtime_err)?.to_csv())]
        }
        Task::Rc { graph, params, pair } => {
            vec![("rc.csv", rc_summary(graph, params, pair.0, pair.1, replicas, seed).map_err(runtime_err)?.to_csv())]
        }
        Task::Rigidity { spec, p } => {
            let point = estimate_theta_rig(*spec, *p, replicas, seed).map_err(runtime_err)?;
            rigidity = Some(point);
            vec![("rigidity.csv", point.to_csv())]
        }
        Task::Count { n } => {
            vec![("edge_sets.csv", format!("{n},{}", count_connected_edge_sets(*n).map_err(runtime_err)?))]
        }
        Task::Link { index, a, b } => {
            let r = linking_number_seeded(a, b, seed).map_err(runtime_err)?;
            vec![(
                "linking.csv",
                format!("{index},{},{},{},{},{}", a.len(), b.len(), r.value, r.projections[0], r.projections[1]),
            )]
        }
        Task::Msd { params, dims, t_max, boundary } => {
            let curve = msd_curve(params, dims, *t_max, replicas, seed, *boundary).map_err(runtime_err)?;
            let env = sample_environment(dims, params, derive_seed(seed, 0)).map_err(runtime_err)?;
            let mut rows: Rows = curve.points.iter().map(|p| ("msd.csv", p.to_csv())).collect();
            let residual = curve.fit.map_or(f64::NAN, |f| f.residual);
            rows.push((
                "msd_fit.csv",
                format!("{},{},{},{}", curve.delta_hat, residual, curve.stabilized, curve.localized),
            ));
            rows.push(("environment.txt", env.dump()));
            rows
        }
    };
    Ok(TaskResult { rows, rigidity })
}

/// Pivot rows derived from the rigidity grid once all tasks are done.
fn rigidity_pivots(rows: &[RigidityPoint]) -> Vec<String> {
    let rig: Vec<_> = rows.iter().map(|r| (r.p, r.theta_rig)).collect();
    let conn: Vec<_> = rows.iter().map(|r| (r.p, r.theta_conn)).collect();
    [("rigidity", rig), ("connectivity", conn)]
        .into_iter()
        .filter_map(|(name, pts)| {
            grid_pivot(&pts, 0.5).map(|pv| format!("{name},{},{},{}", pv.p, pv.stderr, pv.clamped))
        })
        .collect()
}

/// Runs a validated config on `workers` threads and returns the rendered
/// files without touching the filesystem.
pub fn execute(config: &ExperimentConfig, workers: usize, base: &Path) -> Result<RunOutput, HarnessError> {
    let plan = plan(config, base)?;
    let master = RngSeed(config.seed);
    let seeds: Vec<RngSeed> = (0..plan.tasks.len())
        .map(|i| derive_seed(master, if plan.shared_seed { 0 } else { i as u64 }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Runtime(format!("thread pool: {e}")))?;
    let results: Vec<TaskResult> = pool.install(|| {
        plan.tasks
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(task, &seed)| run_task(task, config.replicas, seed))
            .collect::<Result<_, _>>()
    })?;

    let mut contents: Vec<(&str, String)> = plan
        .files
        .iter()
        .map(|&(name, header)| (name, if header.is_empty() { String::new() } else { format!("{header}\n") }))
        .collect();
    let mut push = |file: &str, line: &str| {
        let slot = contents.iter_mut().find(|(n, _)| *n == file).expect("declared output");
        slot.1.push_str(line);
        if !line.ends_with('\n') {
            slot.1.push('\n');
        }
    };
    for (file, line) in results.iter().flat_map(|r| &r.rows) {
        push(file, line);
    }
    if config.kind == ExperimentKind::Rigid {
        let points: Vec<RigidityPoint> = results.iter().filter_map(|r| r.rigidity).collect();
        for line in rigidity_pivots(&points) {
            push("rigidity_pivots.csv", &line);
        }
    }
    let tasks = plan
        .tasks
        .iter()
        .zip(&seeds)
        .enumerate()
        .map(|(index, (t, s))| TaskRecord { index, seed: s.0, label: t.label() })
        .collect();
    let files = contents.into_iter().map(|(name, contents)| OutputFile { name: name.to_string(), contents }).collect();
    Ok(RunOutput { files, tasks })
}

/// Executes the config and writes every output plus the manifest into
/// `out_dir`.
pub fn run(config: &ExperimentConfig, workers: usize, out_dir: &Path, base: &Path) -> Result<RunManifest, HarnessError> {
    let started = Instant::now();
    let output = execute(config, workers, base)?;
    let io = |e: std::io::Error| HarnessError::Runtime(format!("writing to {}: {e}", out_dir.display()));
    fs::create_dir_all(out_dir).map_err(io)?;
    for f in &output.files {
        fs::write(out_dir.join(&f.name), &f.contents).map_err(io)?;
    }
    let manifest = RunManifest {
        tool: TOOL_NAME.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: config.kind,
        config: self_contained(config, base)?,
        workers,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        tasks: output.tasks,
        outputs: output.files.iter().map(|f| f.name.clone()).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    fs::write(out_dir.join(MANIFEST_FILE), json + "\n").map_err(io)?;
    Ok(manifest)
}

/// Output directory: the CLI flag, then the config, then `perclab-out`.
pub fn output_dir(cli: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    cli.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("perclab-out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text, None).unwrap()
    }

    #[test]
    fn probability_out_of_range_is_config_error() {
        let c = cfg(r#"{"kind":"pc-scan","lattice":{"kind":"hypercubic","dim":2,"side":8},"p":[0.5,1.5]}"#);
        let err = execute(&c, 1, Path::new(".")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("probability out of range"), "{err}");
    }

    #[test]
    fn scan_rows_in_task_order() {
        let c = cfg(r#"{"kind":"pc-scan","replicas":10,"lattice":{"kind":"hypercubic","dim":2,"side":6},"p":[0.2,0.5,0.8]}"#);
        let out = execute(&c, 2, Path::new(".")).unwrap();
        let lines: Vec<&str> = out.files[0].contents.lines().collect();
        assert_eq!(lines[0], CrossingRow::HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].contains(",0.2,"));
        assert!(lines[3].contains(",0.8,"));
    }

    #[test]
    fn rigid_rejects_hypercubic() {
        let c = cfg(r#"{"kind":"rigid","lattice":{"kind":"hypercubic","dim":2,"side":6},"p":[0.5]}"#);
        assert_eq!(execute(&c, 1, Path::new(".")).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn manifest_echo_round_trips() {
        let c = cfg(r#"{"kind":"entangle","seed":5,"max_edges":2,
            "pairs":[[[[0,0,0],[1,0,0],[2,0,0],[2,1,0],[2,2,0],[1,2,0],[0,2,0],[0,1,0]],
                      [[1,1,-1],[2,1,-1],[3,1,-1],[3,1,0],[3,1,1],[2,1,1],[1,1,1],[1,1,0]]]]}"#);
        let dir = tempfile::tempdir().unwrap();
        let manifest = run(&c, 1, dir.path(), Path::new(".")).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let again = ExperimentConfig::from_json(&text, None).unwrap();
        assert_eq!(again, c);
        assert_eq!(manifest.tasks.len(), 3);
        let counts = fs::read_to_string(dir.path().join("edge_sets.csv")).unwrap();
        assert_eq!(counts, "n,count\n1,6\n2,45\n");
        let links = fs::read_to_string(dir.path().join("linking.csv")).unwrap();
        let lk: i64 = links.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(lk.abs(), 1);
    }
}
