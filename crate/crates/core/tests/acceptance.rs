//! End-to-end acceptance checks. Each test prints one PASS or FAIL line to
//! stderr before asserting, so the lines show up even under capture.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use perclab::entanglement::{
    count_connected_edge_sets, cycle_edges, entanglement_witness, hopf_pair, lattice_square, linking_number_seeded,
    EntanglementVerdict, LatticeEdge, Point3,
};
use perclab::labyrinth::{
    equivalence_class, msd_curve, msd_curve_in_env, reversal_replays, run_walk, sample_environment, trap_environment,
    BoundaryPolicy, EnvParams, EquivalenceClass, WalkOptions,
};
use perclab::percolation::{estimate_pc, sample_bernoulli, PcOptions, PivotRule};
use perclab::random_cluster::{chain_samples, exact_rc_distribution, leaf_boundary, sample_rc, Boundary, RcParams};
use perclab::rigidity::{
    generic_rank, grid_pivot, independent_edge_count, is_generically_rigid_2d, is_rigid_by_rank, rigidity_scan,
};
use perclab::stats::{total_variation, two_sample_chi_square};
use perclab::uniqueness::{box_trifurcations, phase_scan, tree_cluster_proliferation, SpanningCriterion};
use perclab::*;

fn report(criterion: u32, pass: bool, detail: &str, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "acceptance criterion {criterion}: {verdict} ({detail}; {:.1}s)\n",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_trifurcation_count_bound() {
    let started = Instant::now();
    let g = build_graph(LatticeSpec::Hypercubic { dim: 2, side: 20 }).unwrap();
    let mut worst = (0usize, 0usize);
    let mut violations = 0;
    for (k, p) in [0.3, 0.5, 0.55, 0.7].into_iter().enumerate() {
        for i in 0..1000 {
            let config = sample_bernoulli(&g, p, derive_seed(RngSeed(k as u64), i)).unwrap();
            let r = box_trifurcations(&g, &config).unwrap();
            if r.count > r.boundary_size {
                violations += 1;
            }
            if r.count > worst.0 {
                worst = (r.count, r.boundary_size);
            }
        }
    }
    let detail = format!("{violations} violations in 4000 configs, max N = {} vs |boundary| = {}", worst.0, worst.1);
    report(1, violations == 0, &detail, started);
}

#[test]
fn criterion_2_square_lattice_critical_point() {
    let started = Instant::now();
    let spec = LatticeSpec::Hypercubic { dim: 2, side: 64 };
    let est = estimate_pc(spec, 1000, 0.02, RngSeed(2024), PcOptions::default()).unwrap();
    let pass = (0.48..=0.52).contains(&est.p_c) && !est.clamped;
    report(2, pass, &format!("p_c estimate {:.4} in [{:.4}, {:.4}]", est.p_c, est.lower, est.upper), started);
}

#[test]
fn criterion_3_tree_versus_square_lattice() {
    let started = Instant::now();
    let tree = LatticeSpec::BinaryTree { depth: 12 };
    let options = PcOptions { rule: Some(PivotRule::MeanGenerationOne), ..PcOptions::default() };
    let pivot = estimate_pc(tree, 4000, 0.005, RngSeed(31), options).unwrap();
    let d8 = tree_cluster_proliferation(8, 0.75, 2000, RngSeed(32)).unwrap();
    let d12 = tree_cluster_proliferation(12, 0.75, 2000, RngSeed(33)).unwrap();
    let pooled = (d8.stderr.powi(2) + d12.stderr.powi(2)).sqrt();
    let square = LatticeSpec::Hypercubic { dim: 2, side: 48 };
    let scan = phase_scan(square, &[0.7], SpanningCriterion::TwoOppositeFaces, 1000, RngSeed(34)).unwrap();
    let spanning = scan.rows[0].1.mean;
    let pass = (0.47..=0.53).contains(&pivot.p_c) && d12.mean > d8.mean + 3.0 * pooled && (spanning - 1.0).abs() <= 0.02;
    let detail = format!(
        "tree pivot {:.4}, long clusters {:.2} at depth 8 vs {:.2} at depth 12, Z2 spanning count {:.3}",
        pivot.p_c, d8.mean, d12.mean, spanning
    );
    report(3, pass, &detail, started);
}

#[test]
fn criterion_4_random_cluster_sampler_matches_enumeration() {
    let started = Instant::now();
    let layers = common::graphs_without_isolated_vertices(5);
    let graphs: Vec<&Vec<(usize, usize)>> = layers.iter().flatten().collect();
    let samples = 100_000;
    let mut worst = (0.0f64, String::new());
    let mut cases = 0;
    for (gi, edges) in graphs.iter().enumerate() {
        let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap();
        let g = FiniteGraph::from_edges(n, edges).unwrap();
        let g = { let b = leaf_boundary(&g); g.with_boundary(b).unwrap() };
        for p in [0.3, 0.6] {
            for q in [1.0, 2.0, 4.0] {
                for boundary in [Boundary::Free, Boundary::Wired] {
                    let exact = exact_rc_distribution(&g, p, q, boundary).unwrap();
                    let params = RcParams { p, q, boundary, burn_in: 50, spacing: 1 };
                    let seed = derive_seed(RngSeed(4), cases);
                    let mut hist = vec![0usize; 1 << g.edge_count()];
                    for c in chain_samples(&g, &params, samples, seed).unwrap() {
                        hist[c.to_mask() as usize] += 1;
                    }
                    let tv = total_variation(&hist, exact.probabilities());
                    if tv > worst.0 {
                        worst = (tv, format!("graph {gi} {edges:?} p={p} q={q} {boundary:?}"));
                    }
                    cases += 1;
                }
            }
        }
    }
    let edge = FiniteGraph::from_edges(2, &[(0, 1)]).unwrap();
    let params = RcParams { p: 0.5, q: 2.0, boundary: Boundary::Free, burn_in: 10, spacing: 1 };
    let draws = chain_samples(&edge, &params, 20_000, RngSeed(44)).unwrap();
    let open = Estimate::binomial(draws.iter().filter(|c| c.is_open(0)).count(), draws.len());
    let pass = graphs.len() == 45 && worst.0 <= 0.02 && open.contains(1.0 / 3.0, 3.0);
    let detail = format!(
        "{} graphs, {cases} cases, worst TV {:.4} at {}, single edge P(open) = {:.4} +/- {:.4}",
        graphs.len(),
        worst.0,
        worst.1,
        open.mean,
        open.stderr
    );
    report(4, pass, &detail, started);
}

#[test]
fn criterion_5_q_one_is_bernoulli() {
    let started = Instant::now();
    let g = build_graph(LatticeSpec::Hypercubic { dim: 2, side: 4 }).unwrap();
    let p = 0.5;
    let params = RcParams { p, q: 1.0, boundary: Boundary::Free, burn_in: 5, spacing: 1 };
    let rc: Vec<usize> =
        (0..10_000).map(|i| sample_rc(&g, &params, derive_seed(RngSeed(50), i)).unwrap().open_count()).collect();
    let bern: Vec<usize> =
        (0..10_000).map(|i| sample_bernoulli(&g, p, derive_seed(RngSeed(51), i)).unwrap().open_count()).collect();
    let test = two_sample_chi_square(&rc, &bern).unwrap();
    let detail = format!("chi-square {:.2} on {} dof, p-value {:.3}", test.statistic, test.degrees_of_freedom, test.p_value);
    report(5, test.p_value >= 0.01, &detail, started);
}

#[test]
fn criterion_6_rigidity_threshold_above_connectivity() {
    let started = Instant::now();
    let spec = LatticeSpec::Triangular { side: 24 };
    let grid: Vec<f64> = (0..=25).map(|i| 0.30 + 0.02 * i as f64).collect();
    let points = rigidity_scan(spec, &grid, 400, RngSeed(6)).unwrap();
    let rig: Vec<(f64, Estimate)> = points.iter().map(|pt| (pt.p, pt.theta_rig)).collect();
    let conn: Vec<(f64, Estimate)> = points.iter().map(|pt| (pt.p, pt.theta_conn)).collect();
    let r = grid_pivot(&rig, 0.5).unwrap();
    let c = grid_pivot(&conn, 0.5).unwrap();
    let pooled = (r.stderr.powi(2) + c.stderr.powi(2)).sqrt();

    let mut disagreements = 0;
    let mut checked = 0;
    for n in 1..=6 {
        for edges in common::connected_labelled_graphs(n) {
            let g = FiniteGraph::from_edges(n, &edges).unwrap();
            let seed = RngSeed(checked);
            if is_generically_rigid_2d(&g) != is_rigid_by_rank(&g, seed).unwrap()
                || independent_edge_count(&g) != generic_rank(&g, seed).unwrap()
            {
                disagreements += 1;
            }
            checked += 1;
        }
    }
    let pass = !r.clamped && !c.clamped && r.p - c.p > 2.0 * pooled && disagreements == 0;
    let detail = format!(
        "rigidity pivot {:.4} +/- {:.4}, connectivity pivot {:.4} +/- {:.4}, {disagreements} disagreements in {checked} graphs",
        r.p, r.stderr, c.p, c.stderr
    );
    report(6, pass, &detail, started);
}

fn random_walk_edges(start: Point3, steps: usize, seed: RngSeed, allowed: impl Fn(Point3) -> bool) -> Vec<LatticeEdge> {
    use rand::Rng;
    let mut rng = seed.rng();
    let mut at = start;
    let mut out = Vec::new();
    for _ in 0..steps {
        let d: usize = rng.gen_range(0..6);
        let mut next = at;
        next[d / 2] += if d.is_multiple_of(2) { 1 } else { -1 };
        if allowed(next) {
            out.push((at, next));
            at = next;
        }
    }
    out
}

#[test]
fn criterion_7_entanglement_witnesses() {
    let started = Instant::now();
    let mut failures = Vec::new();

    for i in 0..500 {
        let edges = random_walk_edges([0, 0, 0], 1 + i % 80, derive_seed(RngSeed(70), i as u64), |_| true);
        if entanglement_witness(&edges).unwrap() != EntanglementVerdict::EntangledByConnectivity {
            failures.push(format!("connected set {i} not certified"));
            break;
        }
    }

    let (a, b) = hopf_pair();
    let lk = linking_number_seeded(&a, &b, RngSeed(71)).unwrap();
    let gauss = common::gauss_linking(&a, &b);
    if lk.value.abs() != 1 || lk.projections[0] != lk.projections[1] || (gauss - lk.value as f64).abs() > 1e-9 {
        failures.push(format!("hopf pair: {lk:?}, gauss {gauss}"));
    }
    let mut pair_edges = cycle_edges(&a);
    pair_edges.extend(cycle_edges(&b));
    if !matches!(entanglement_witness(&pair_edges).unwrap(), EntanglementVerdict::EntangledByLinking { linking, .. } if linking.abs() == 1)
    {
        failures.push("hopf pair not certified".into());
    }

    let mut separable = 0;
    for i in 0..500u64 {
        let mut edges = random_walk_edges([0, 0, 0], 40, derive_seed(RngSeed(72), i), |p| p[2] <= 0);
        edges.extend(random_walk_edges([0, 0, 2], 40, derive_seed(RngSeed(73), i), |p| p[2] >= 2));
        edges.extend(cycle_edges(&lattice_square([0, 0, -3], 0, 1, 2)));
        edges.extend(cycle_edges(&lattice_square([0, 0, 4], 0, 2, 2)));
        if entanglement_witness(&edges).unwrap().is_entangled() {
            failures.push(format!("separable set {i} certified"));
            break;
        }
        separable += 1;
    }

    let counts: Vec<u64> = (1..=4).map(|n| count_connected_edge_sets(n).unwrap()).collect();
    let frozen = [6u64, 45, 380, 3402];
    let grown: Vec<u64> = common::edge_set_counts_by_growth(4).into_iter().map(|c| c as u64).collect();
    if counts != frozen || grown != frozen {
        failures.push(format!("edge-set counts {counts:?}, growth oracle {grown:?}"));
    }

    let detail = format!(
        "lk = {} by projections {:?}, gauss {:.6}, {separable} separable sets uncertified, counts {counts:?}{}",
        lk.value,
        lk.projections,
        gauss,
        if failures.is_empty() { String::new() } else { format!(", failures {failures:?}") }
    );
    report(7, failures.is_empty(), &detail, started);
}

#[test]
fn criterion_8_labyrinth_diffusivity() {
    let started = Instant::now();
    let srw = msd_curve(&EnvParams::new(1.0, 0.0), &[64, 64], 1000, 16_000, RngSeed(80), BoundaryPolicy::Periodic).unwrap();
    let mixed = msd_curve(&EnvParams::new(0.95, 0.05), &[128, 128], 1000, 2000, RngSeed(81), BoundaryPolicy::Periodic).unwrap();

    let (trap, centre) = trap_environment();
    let trapped = msd_curve_in_env(&trap, centre, 1000, 200, RngSeed(82), BoundaryPolicy::Halt).unwrap();
    let trap_max = trapped.points.iter().map(|p| p.msd).fold(0.0f64, f64::max);
    let trap_class = match equivalence_class(&trap, centre, 1000, BoundaryPolicy::Halt).unwrap() {
        EquivalenceClass::Complete { members, .. } => members.len(),
        EquivalenceClass::TruncatedAtCap { .. } => usize::MAX,
    };

    let mut replays = 0;
    let trajectories = 1000u64;
    let params = EnvParams::new(0.4, 0.3).with_reflectors(&["xy", "anti-xy", "reverse"], &[1.0, 1.0, 1.0]);
    for i in 0..trajectories {
        let env = sample_environment(&[24, 24], &params, derive_seed(RngSeed(83), 2 * i)).unwrap();
        let Some(start) = env.central_rw_point() else { continue };
        let boundary = if i % 2 == 0 { BoundaryPolicy::Periodic } else { BoundaryPolicy::Halt };
        let opts = WalkOptions { boundary, record_path: true };
        let walk = run_walk(&env, start, 400, derive_seed(RngSeed(83), 2 * i + 1), opts).unwrap();
        if reversal_replays(&env, walk.path.as_ref().unwrap(), boundary).unwrap() {
            replays += 1;
        }
    }

    let pass = (srw.delta_hat - 1.0).abs() <= 0.05
        && mixed.stabilized
        && mixed.delta_hat > 0.0
        && trap_max <= 4.0
        && trap_class == 1
        && replays == trajectories;
    let detail = format!(
        "SRW slope {:.4}, mixed slope {:.4} stabilized {}, trap max MSD {trap_max} class size {trap_class}, {replays}/{trajectories} replays",
        srw.delta_hat, mixed.delta_hat, mixed.stabilized
    );
    report(8, pass, &detail, started);
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(kind: &str, config: &Path, workers: usize, out: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_perclab"))
        .args([kind, "--config"])
        .arg(config)
        .args(["--workers", &workers.to_string(), "--out"])
        .arg(out)
        .status()
        .expect("perclab runs");
    assert!(status.success(), "perclab {kind} failed with {status}");
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv" || x == "txt"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn criterion_9_manifest_reruns_are_byte_identical() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for kind in ["perc", "pc-scan", "uniq", "rigid", "rc", "entangle", "labyrinth"] {
        let config = configs_dir().join(format!("{kind}.json"));
        let first = tmp.path().join(format!("{kind}-w1"));
        run_cli(kind, &config, 1, &first);
        let reference = csv_files(&first);
        assert!(!reference.is_empty(), "{kind} wrote no outputs");
        let manifest = first.join("manifest.json");
        for (label, workers) in [("manifest-w1", 1), ("manifest-w8", 8)] {
            let out = tmp.path().join(format!("{kind}-{label}"));
            run_cli(kind, &manifest, workers, &out);
            let rerun = csv_files(&out);
            compared += rerun.len();
            if rerun != reference {
                mismatches.push(format!("{kind} {label}"));
            }
        }
    }
    let detail = format!("{compared} output files compared across 7 kinds, mismatches {mismatches:?}");
    report(9, mismatches.is_empty(), &detail, started);
}
