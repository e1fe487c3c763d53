//! Trifurcation census in a box, the `N <= |∂Λ|` counting bound, spanning
//! cluster counts, cluster proliferation on trees, and an empirical
//! finite-energy check for configuration samplers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::graph::{build_graph, FiniteGraph, LatticeSpec};
use crate::percolation::{
    check_replicas, cluster_decomposition, sample_bernoulli, sample_with, Configuration,
};
use crate::seed::{derive_seed, RngSeed};
use crate::sets::VertexSet;
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrifurcationReport {
    pub trifurcations: VertexSet,
    pub count: usize,
    pub boundary_size: usize,
}

/// Finds every trifurcation of the box.
///
/// `x` qualifies when it is off the boundary, has exactly three open
/// incident edges, and removing it leaves its three open neighbours in three
/// distinct open clusters that each meet the boundary.
pub fn box_trifurcations(graph: &FiniteGraph, config: &Configuration) -> Result<TrifurcationReport> {
    if !graph.is_box() {
        return Err(Error::NotABox);
    }
    if config.len() != graph.edge_count() {
        return Err(Error::LengthMismatch { expected: graph.edge_count(), found: config.len() });
    }
    let n = graph.vertex_count();
    let boundary = graph.boundary();
    if boundary.len() == n {
        return Err(Error::InvalidParameter("box has no interior vertices".into()));
    }

    let mut found = VertexSet::empty(n);
    let mut search = ArmSearch::new(n);
    for x in 0..n {
        if boundary.contains(x) {
            continue;
        }
        let mut arms = [0usize; 3];
        let mut k = 0;
        for &(y, e) in graph.neighbors(x) {
            if config.is_open(e) {
                if k == 3 {
                    k = 4;
                    break;
                }
                arms[k] = y;
                k += 1;
            }
        }
        if k != 3 {
            continue;
        }
        if search.separated_to_boundary(graph, config, x, arms) {
            found.insert(x);
        }
    }
    let count = found.len();
    Ok(TrifurcationReport { trifurcations: found, count, boundary_size: boundary.len() })
}

/// Breadth-first searches that reuse one stamp array.
struct ArmSearch {
    stamp: Vec<u32>,
    generation: u32,
    queue: Vec<usize>,
}

impl ArmSearch {
    fn new(n: usize) -> Self {
        ArmSearch { stamp: vec![0; n], generation: 0, queue: Vec::new() }
    }

    /// Each arm must reach the boundary without meeting another arm, with
    /// `removed` deleted from the graph.
    fn separated_to_boundary(
        &mut self,
        graph: &FiniteGraph,
        config: &Configuration,
        removed: usize,
        arms: [usize; 3],
    ) -> bool {
        for (i, &start) in arms.iter().enumerate() {
            self.generation += 1;
            let g = self.generation;
            self.stamp[removed] = g;
            self.stamp[start] = g;
            self.queue.clear();
            self.queue.push(start);
            let mut head = 0;
            let mut touches_boundary = false;
            while head < self.queue.len() {
                let v = self.queue[head];
                head += 1;
                if graph.boundary().contains(v) {
                    touches_boundary = true;
                }
                for &(w, e) in graph.neighbors(v) {
                    if !config.is_open(e) || self.stamp[w] == g {
                        continue;
                    }
                    if arms.iter().enumerate().any(|(j, &a)| j != i && a == w) {
                        return false;
                    }
                    self.stamp[w] = g;
                    self.queue.push(w);
                }
            }
            if !touches_boundary {
                return false;
            }
        }
        true
    }
}

/// `N <= |∂Λ|`. Holds for every configuration: distinct trifurcations
/// can be matched to distinct boundary vertices.
pub fn check_burton_keane_bound(report: &TrifurcationReport) -> bool {
    report.count <= report.boundary_size
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpanningCriterion {
    /// The cluster touches both faces `x[a] = 0` and `x[a] = L - 1` for some
    /// axis `a`.
    TwoOppositeFaces,
    /// The cluster meets the boundary and has at least `min_size` vertices.
    BoundaryTouch { min_size: usize },
}

pub fn spanning_cluster_count(
    graph: &FiniteGraph,
    config: &Configuration,
    criterion: SpanningCriterion,
) -> Result<usize> {
    let labels = cluster_decomposition(graph, config)?;
    let n = graph.vertex_count();
    match criterion {
        SpanningCriterion::TwoOppositeFaces => {
            let Some(side) = graph.box_side() else {
                return Err(Error::NotABox);
            };
            let dim = graph.dimension();
            let top = side as i64 - 1;
            // Bit 2a: touches low face of axis a; bit 2a+1: high face.
            let mut faces = vec![0u64; n];
            for v in 0..n {
                let c = graph.coords(v);
                let id = labels.component_of(v);
                for (axis, &x) in c.iter().enumerate().take(dim) {
                    if x == 0 {
                        faces[id] |= 1 << (2 * axis);
                    }
                    if x == top {
                        faces[id] |= 1 << (2 * axis + 1);
                    }
                }
            }
            Ok(labels
                .components()
                .iter()
                .filter(|&&(id, _)| (0..dim).any(|a| faces[id] >> (2 * a) & 3 == 3))
                .count())
        }
        SpanningCriterion::BoundaryTouch { min_size } => {
            if min_size == 0 {
                return Err(Error::InvalidParameter("min_size must be at least 1".into()));
            }
            let mut touches = vec![false; n];
            for v in graph.boundary().iter() {
                touches[labels.component_of(v)] = true;
            }
            Ok(labels
                .components()
                .iter()
                .filter(|&&(id, size)| touches[id] && size >= min_size)
                .count())
        }
    }
}

/// Mean spanning-cluster count per `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScanResult {
    pub rows: Vec<(f64, Estimate)>,
}

pub fn phase_scan(
    spec: LatticeSpec,
    ps: &[f64],
    criterion: SpanningCriterion,
    replicas: usize,
    seed: RngSeed,
) -> Result<PhaseScanResult> {
    check_replicas(replicas)?;
    let graph = build_graph(spec)?;
    let mut rows = Vec::with_capacity(ps.len());
    for (k, &p) in ps.iter().enumerate() {
        check_probability(p)?;
        let batch = derive_seed(seed, k as u64);
        let counts = (0..replicas as u64)
            .into_par_iter()
            .map(|i| {
                let c = sample_bernoulli(&graph, p, derive_seed(batch, i))?;
                spanning_cluster_count(&graph, &c, criterion).map(|k| k as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((p, Estimate::from_samples(&counts)));
    }
    Ok(PhaseScanResult { rows })
}

/// Mean number of disjoint open clusters of the depth-`depth` binary tree
/// that contain a downward open path of at least `ceil(depth / 2)` edges.
pub fn tree_cluster_proliferation(
    depth: usize,
    p: f64,
    replicas: usize,
    seed: RngSeed,
) -> Result<Estimate> {
    check_probability(p)?;
    check_replicas(replicas)?;
    let graph = build_graph(LatticeSpec::BinaryTree { depth })?;
    let threshold = depth.div_ceil(2);
    let counts: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_seed(seed, i).rng();
            let c = sample_with(graph.edge_count(), p, &mut rng);
            long_tree_clusters(graph.vertex_count(), &c, threshold) as f64
        })
        .collect();
    Ok(Estimate::from_samples(&counts))
}

/// Heap-ordered tree; edge `v - 1` joins `v` to its parent.
fn long_tree_clusters(n: usize, config: &Configuration, threshold: usize) -> usize {
    let open_up = |v: usize| v > 0 && config.is_open(v - 1);
    let mut down = vec![0usize; n];
    for v in (0..n).rev() {
        let mut best = 0;
        for child in [2 * v + 1, 2 * v + 2] {
            if child < n && open_up(child) {
                best = best.max(1 + down[child]);
            }
        }
        down[v] = best;
    }
    // A cluster is identified by its topmost vertex.
    let mut top = vec![0usize; n];
    let mut long = vec![false; n];
    for v in 0..n {
        top[v] = if open_up(v) { top[(v - 1) / 2] } else { v };
        if down[v] >= threshold {
            long[top[v]] = true;
        }
    }
    long.iter().filter(|&&l| l).count()
}

/// Anything that draws configurations on a fixed graph from a seed.
pub trait ConfigSampler: Sync {
    fn edge_count(&self) -> usize;
    fn sample(&self, seed: RngSeed) -> Configuration;
}

/// Product measure with density `p`.
pub struct BernoulliSampler<'g> {
    graph: &'g FiniteGraph,
    p: f64,
}

impl<'g> BernoulliSampler<'g> {
    pub fn new(graph: &'g FiniteGraph, p: f64) -> Result<Self> {
        check_probability(p)?;
        Ok(BernoulliSampler { graph, p })
    }
}

impl ConfigSampler for BernoulliSampler<'_> {
    fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    fn sample(&self, seed: RngSeed) -> Configuration {
        sample_bernoulli(self.graph, self.p, seed).expect("p validated at construction")
    }
}

/// Wraps a closure as a sampler.
pub struct FnSampler<F> {
    edge_count: usize,
    f: F,
}

impl<F: Fn(RngSeed) -> Configuration + Sync> FnSampler<F> {
    pub fn new(edge_count: usize, f: F) -> Self {
        FnSampler { edge_count, f }
    }
}

impl<F: Fn(RngSeed) -> Configuration + Sync> ConfigSampler for FnSampler<F> {
    fn edge_count(&self) -> usize {
        self.edge_count
    }

    fn sample(&self, seed: RngSeed) -> Configuration {
        (self.f)(seed)
    }
}

/// Exact-match conditioning is only practical on graphs this small.
pub const FINITE_ENERGY_MAX_EDGES: usize = 12;
/// Fewer matching samples than this yields `Inconclusive`.
pub const FINITE_ENERGY_MIN_MATCHES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiniteEnergyVerdict {
    /// Conditional frequency strictly inside (0, 1).
    Interior,
    /// Conditional frequency is exactly 0 or 1.
    Violation,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteEnergyReport {
    pub matches: usize,
    pub frequency: Estimate,
    pub verdict: FiniteEnergyVerdict,
}

/// Frequency of `edge` being open among samples that agree with
/// `reference` on every other edge.
pub fn finite_energy_check<S: ConfigSampler + ?Sized>(
    sampler: &S,
    edge: usize,
    reference: &Configuration,
    samples: usize,
    seed: RngSeed,
) -> Result<FiniteEnergyReport> {
    let m = sampler.edge_count();
    if m > FINITE_ENERGY_MAX_EDGES {
        return Err(Error::TooManyEdges { edges: m, limit: FINITE_ENERGY_MAX_EDGES });
    }
    if reference.len() != m {
        return Err(Error::LengthMismatch { expected: m, found: reference.len() });
    }
    if edge >= m {
        return Err(Error::IndexOutOfRange { index: edge, len: m });
    }
    let outcomes: Vec<Option<bool>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let c = sampler.sample(derive_seed(seed, i));
            let agrees = (0..m).all(|f| f == edge || c.is_open(f) == reference.is_open(f));
            agrees.then(|| c.is_open(edge))
        })
        .collect();
    let matched: Vec<bool> = outcomes.into_iter().flatten().collect();
    let open = matched.iter().filter(|&&o| o).count();
    let frequency = Estimate::binomial(open, matched.len());
    let verdict = if matched.len() < FINITE_ENERGY_MIN_MATCHES {
        FiniteEnergyVerdict::Inconclusive
    } else if open == 0 || open == matched.len() {
        FiniteEnergyVerdict::Violation
    } else {
        FiniteEnergyVerdict::Interior
    };
    Ok(FiniteEnergyReport { matches: matched.len(), frequency, verdict })
}

/// CSV row summarising trifurcations and spanning clusters at one `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessRow {
    pub p: f64,
    pub side: usize,
    pub n_mean: f64,
    pub boundary_size: usize,
    pub density: f64,
    pub spanning_count_mean: f64,
    /// Whether `N <= |∂Λ|` held in every replica.
    pub bound_held: bool,
}

impl UniquenessRow {
    pub const HEADER: &'static str = "p,L,N_mean,boundary_size,N_over_volume,spanning_count_mean";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.p, self.side, self.n_mean, self.boundary_size, self.density, self.spanning_count_mean
        )
    }
}

pub fn trifurcation_scan(spec: LatticeSpec, p: f64, replicas: usize, seed: RngSeed) -> Result<UniquenessRow> {
    check_replicas(replicas)?;
    let graph = build_graph(spec)?;
    let side = graph.box_side().ok_or(Error::NotABox)?;
    let results = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let c = sample_bernoulli(&graph, p, derive_seed(seed, i))?;
            let report = box_trifurcations(&graph, &c)?;
            let spanning = spanning_cluster_count(&graph, &c, SpanningCriterion::TwoOppositeFaces)?;
            Ok((report.count, check_burton_keane_bound(&report), spanning))
        })
        .collect::<Result<Vec<_>>>()?;
    let reps = replicas as f64;
    let n_mean = results.iter().map(|r| r.0 as f64).sum::<f64>() / reps;
    Ok(UniquenessRow {
        p,
        side,
        n_mean,
        boundary_size: graph.boundary().len(),
        density: n_mean / graph.vertex_count() as f64,
        spanning_count_mean: results.iter().map(|r| r.2 as f64).sum::<f64>() / reps,
        bound_held: results.iter().all(|r| r.1),
    })
}
