//! Bernoulli bond percolation: sampling, cluster labels, crossing estimates
//! and the bisection estimate of the critical point.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::graph::{build_graph, FiniteGraph, LatticeSpec};
use crate::seed::{derive_seed, RngSeed};
use crate::sets::EdgeSet;
use crate::stats::Estimate;
use crate::union_find::UnionFind;

/// One open/closed flag per edge index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    open: Vec<bool>,
}

impl Configuration {
    pub fn all_closed(edge_count: usize) -> Self {
        Configuration { open: vec![false; edge_count] }
    }

    pub fn all_open(edge_count: usize) -> Self {
        Configuration { open: vec![true; edge_count] }
    }

    pub fn from_flags(open: Vec<bool>) -> Self {
        Configuration { open }
    }

    pub fn from_open_edges<I: IntoIterator<Item = usize>>(edge_count: usize, open: I) -> Self {
        let mut c = Self::all_closed(edge_count);
        for e in open {
            c.open[e] = true;
        }
        c
    }

    /// Bit `e` of `mask` is edge `e`.
    pub fn from_mask(edge_count: usize, mask: u64) -> Self {
        Configuration { open: (0..edge_count).map(|e| mask >> e & 1 == 1).collect() }
    }

    pub fn to_mask(&self) -> u64 {
        self.open
            .iter()
            .enumerate()
            .fold(0u64, |m, (e, &o)| if o { m | 1 << e } else { m })
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn is_open(&self, e: usize) -> bool {
        self.open[e]
    }

    pub fn set(&mut self, e: usize, open: bool) {
        self.open[e] = open;
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn flags(&self) -> &[bool] {
        &self.open
    }

    /// The set of open edge indices.
    pub fn open_edges(&self) -> EdgeSet {
        EdgeSet::from_mask(self.open.clone())
    }

    fn check(&self, graph: &FiniteGraph) -> Result<()> {
        if self.open.len() != graph.edge_count() {
            return Err(Error::LengthMismatch { expected: graph.edge_count(), found: self.open.len() });
        }
        Ok(())
    }
}

/// Each edge draws one uniform `U_e` in edge order and is open iff `U_e < p`.
///
/// Because the uniforms depend only on the seed, two calls with the same seed
/// at `p1 <= p2` give nested open sets.
pub fn sample_bernoulli(graph: &FiniteGraph, p: f64, seed: RngSeed) -> Result<Configuration> {
    check_probability(p)?;
    let mut rng = seed.rng();
    Ok(sample_with(graph.edge_count(), p, &mut rng))
}

pub(crate) fn sample_with<R: Rng>(edge_count: usize, p: f64, rng: &mut R) -> Configuration {
    Configuration { open: (0..edge_count).map(|_| rng.gen::<f64>() < p).collect() }
}

/// Component labels of the open subgraph.
///
/// A component's id is its smallest vertex index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    component: Vec<usize>,
    /// `(id, size)` sorted by id.
    sizes: Vec<(usize, usize)>,
}

impl ClusterLabels {
    pub fn component_of(&self, v: usize) -> usize {
        self.component[v]
    }

    pub fn size_of(&self, v: usize) -> usize {
        let id = self.component[v];
        let i = self.sizes.binary_search_by_key(&id, |&(c, _)| c).expect("id is canonical");
        self.sizes[i].1
    }

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn components(&self) -> &[(usize, usize)] {
        &self.sizes
    }

    pub fn labels(&self) -> &[usize] {
        &self.component
    }

    /// Vertices grouped by component, in id order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut slot = vec![usize::MAX; self.component.len()];
        let mut out: Vec<Vec<usize>> = Vec::with_capacity(self.sizes.len());
        for (i, &(id, size)) in self.sizes.iter().enumerate() {
            slot[id] = i;
            out.push(Vec::with_capacity(size));
        }
        for (v, &id) in self.component.iter().enumerate() {
            out[slot[id]].push(v);
        }
        out
    }
}

pub fn cluster_decomposition(graph: &FiniteGraph, config: &Configuration) -> Result<ClusterLabels> {
    config.check(graph)?;
    let mut uf = open_union_find(graph, config);
    Ok(labels_from(&mut uf, graph.vertex_count()))
}

pub(crate) fn open_union_find(graph: &FiniteGraph, config: &Configuration) -> UnionFind {
    let mut uf = UnionFind::new(graph.vertex_count());
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        if config.is_open(e) {
            uf.union(u, v);
        }
    }
    uf
}

pub(crate) fn labels_from(uf: &mut UnionFind, n: usize) -> ClusterLabels {
    let mut canonical = vec![usize::MAX; n];
    let mut component = vec![0; n];
    let mut sizes = Vec::new();
    for v in 0..n {
        let r = uf.find(v);
        if canonical[r] == usize::MAX {
            canonical[r] = v;
            sizes.push((v, 0));
        }
        component[v] = canonical[r];
    }
    for &c in &component {
        let i = sizes.binary_search_by_key(&c, |&(id, _)| id).expect("id present");
        sizes[i].1 += 1;
    }
    ClusterLabels { component, sizes }
}

pub fn connects(labels: &ClusterLabels, x: usize, y: usize) -> bool {
    labels.component_of(x) == labels.component_of(y)
}

/// The finite event standing in for "the origin percolates".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanningEvent {
    /// An open path joins the faces `x0 = 0` and `x0 = L - 1` of a box.
    LeftRightCrossing,
    /// An open path joins the root of a tree to its deepest level.
    RootToLeaves,
}

impl SpanningEvent {
    pub fn for_spec(spec: &LatticeSpec) -> Result<Self> {
        match spec {
            s if s.is_box() => Ok(SpanningEvent::LeftRightCrossing),
            LatticeSpec::BinaryTree { .. } => Ok(SpanningEvent::RootToLeaves),
            other => Err(Error::Unsupported(format!("no spanning event for {other}"))),
        }
    }

    pub fn occurs(&self, graph: &FiniteGraph, config: &Configuration) -> bool {
        match self {
            SpanningEvent::LeftRightCrossing => has_left_right_crossing(graph, config),
            SpanningEvent::RootToLeaves => root_generation_size(graph, config) > 0,
        }
    }
}

pub(crate) fn has_left_right_crossing(graph: &FiniteGraph, config: &Configuration) -> bool {
    let n = graph.vertex_count();
    let (left, right) = (n, n + 1);
    let mut uf = UnionFind::new(n + 2);
    for v in graph.face(0, false) {
        uf.union(left, v);
    }
    for v in graph.face(0, true) {
        uf.union(right, v);
    }
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        if config.is_open(e) {
            uf.union(u, v);
        }
    }
    uf.same(left, right)
}

/// Number of deepest-level tree vertices joined to the root by open edges.
///
/// Relies on heap order: edge `v - 1` joins `v` to its parent.
pub(crate) fn root_generation_size(graph: &FiniteGraph, config: &Configuration) -> usize {
    let n = graph.vertex_count();
    let mut reached = vec![false; n];
    reached[0] = true;
    for v in 1..n {
        reached[v] = config.is_open(v - 1) && reached[(v - 1) / 2];
    }
    let first_leaf = n / 2;
    reached[first_leaf..].iter().filter(|&&r| r).count()
}

/// Fraction of replicas with an open left-right crossing of the box.
pub fn crossing_probability(
    spec: LatticeSpec,
    p: f64,
    replicas: usize,
    seed: RngSeed,
) -> Result<Estimate> {
    if !spec.is_box() {
        return Err(Error::NotABox);
    }
    check_probability(p)?;
    check_replicas(replicas)?;
    let graph = build_graph(spec)?;
    Ok(event_probability(&graph, SpanningEvent::LeftRightCrossing, p, replicas, seed))
}

pub(crate) fn check_replicas(replicas: usize) -> Result<()> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be at least 1".into()));
    }
    Ok(())
}

fn event_probability(
    graph: &FiniteGraph,
    event: SpanningEvent,
    p: f64,
    replicas: usize,
    seed: RngSeed,
) -> Estimate {
    let hits: usize = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_seed(seed, i).rng();
            let config = sample_with(graph.edge_count(), p, &mut rng);
            usize::from(event.occurs(graph, &config))
        })
        .sum();
    Estimate::binomial(hits, replicas)
}

fn mean_root_generation(graph: &FiniteGraph, p: f64, replicas: usize, seed: RngSeed) -> Estimate {
    let sizes: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_seed(seed, i).rng();
            let config = sample_with(graph.edge_count(), p, &mut rng);
            root_generation_size(graph, &config) as f64
        })
        .collect();
    Estimate::from_samples(&sizes)
}

/// CSV row for one crossing-probability batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRow {
    pub spec: String,
    pub p: f64,
    pub side: usize,
    pub replicas: usize,
    pub crossing_fraction: f64,
    pub stderr: f64,
    pub seed: u64,
}

impl CrossingRow {
    pub const HEADER: &'static str = "spec,p,L,replicas,crossing_fraction,stderr,seed";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.spec, self.p, self.side, self.replicas, self.crossing_fraction, self.stderr, self.seed
        )
    }
}

/// Statistic that the bisection drives to its target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    /// Probability of the spec's spanning event reaches 1/2.
    SpanningHalf,
    /// Mean number of deepest-level tree vertices joined to the root reaches
    /// 1. This is the mean-offspring-one condition of the exploration
    /// process, free of the finite-depth shift the 1/2 level carries.
    MeanGenerationOne,
}

impl PivotRule {
    pub fn default_for(spec: &LatticeSpec) -> Self {
        match spec {
            LatticeSpec::BinaryTree { .. } => PivotRule::MeanGenerationOne,
            _ => PivotRule::SpanningHalf,
        }
    }

    fn target(&self) -> f64 {
        match self {
            PivotRule::SpanningHalf => 0.5,
            PivotRule::MeanGenerationOne => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcOptions {
    pub lower: f64,
    pub upper: f64,
    pub max_iterations: usize,
    pub rule: Option<PivotRule>,
}

impl Default for PcOptions {
    fn default() -> Self {
        PcOptions { lower: 0.0, upper: 1.0, max_iterations: 64, rule: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcEstimate {
    pub p_c: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub rule: PivotRule,
    /// The statistic was already at or above target at `lower`, or still
    /// below it at `upper`; `p_c` is then that endpoint.
    pub clamped: bool,
}

impl PcEstimate {
    pub fn bracket_width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Bisection on `p` for the pivot of the spec's spanning statistic.
///
/// Every evaluation reuses the same replica seeds, so the per-replica
/// indicators are monotone in `p` and the bracket is well defined.
pub fn estimate_pc(
    spec: LatticeSpec,
    replicas: usize,
    tolerance: f64,
    seed: RngSeed,
    options: PcOptions,
) -> Result<PcEstimate> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tolerance}")));
    }
    check_probability(options.lower)?;
    check_probability(options.upper)?;
    if options.lower > options.upper {
        return Err(Error::InvalidParameter("lower bracket exceeds upper".into()));
    }
    check_replicas(replicas)?;
    let rule = options.rule.unwrap_or_else(|| PivotRule::default_for(&spec));
    let event = SpanningEvent::for_spec(&spec)?;
    if rule == PivotRule::MeanGenerationOne && event != SpanningEvent::RootToLeaves {
        return Err(Error::Unsupported("mean-generation pivot needs a binary tree".into()));
    }
    let graph = build_graph(spec)?;
    let statistic = |p: f64| match rule {
        PivotRule::SpanningHalf => event_probability(&graph, event, p, replicas, seed).mean,
        PivotRule::MeanGenerationOne => mean_root_generation(&graph, p, replicas, seed).mean,
    };
    let target = rule.target();

    let (mut lo, mut hi) = (options.lower, options.upper);
    if statistic(lo) >= target {
        return Ok(PcEstimate { p_c: lo, lower: lo, upper: lo, iterations: 0, rule, clamped: true });
    }
    if statistic(hi) < target {
        return Ok(PcEstimate { p_c: hi, lower: hi, upper: hi, iterations: 0, rule, clamped: true });
    }
    let mut iterations = 0;
    while hi - lo > tolerance {
        if iterations >= options.max_iterations {
            return Err(Error::NonConvergence { iterations });
        }
        let mid = 0.5 * (lo + hi);
        if statistic(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(PcEstimate { p_c: 0.5 * (lo + hi), lower: lo, upper: hi, iterations, rule, clamped: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: usize) -> FiniteGraph {
        build_graph(LatticeSpec::Hypercubic { dim: 2, side }).unwrap()
    }

    #[test]
    fn extreme_probabilities() {
        let g = square(4);
        assert_eq!(sample_bernoulli(&g, 0.0, RngSeed(1)).unwrap().open_count(), 0);
        assert_eq!(sample_bernoulli(&g, 1.0, RngSeed(1)).unwrap().open_count(), g.edge_count());
        assert_eq!(sample_bernoulli(&g, 1.5, RngSeed(1)), Err(Error::ProbabilityOutOfRange(1.5)));
        assert!(sample_bernoulli(&g, -0.1, RngSeed(1)).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let g = square(6);
        assert_eq!(
            sample_bernoulli(&g, 0.4, RngSeed(9)).unwrap(),
            sample_bernoulli(&g, 0.4, RngSeed(9)).unwrap()
        );
    }

    #[test]
    fn mean_open_count_within_binomial_band() {
        // 12 edges, p = 1/2: count ~ Bin(12, 1/2) per replica.
        let g = square(3);
        let reps = 10_000u64;
        let total: usize = (0..reps)
            .map(|i| sample_bernoulli(&g, 0.5, derive_seed(RngSeed(5), i)).unwrap().open_count())
            .sum();
        let mean = total as f64 / reps as f64;
        let sigma = (12.0 * 0.25 / reps as f64).sqrt();
        assert!((mean - 6.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn all_open_and_all_closed_labels() {
        let g = square(4);
        let open = cluster_decomposition(&g, &Configuration::all_open(g.edge_count())).unwrap();
        assert_eq!(open.components(), &[(0, 16)]);
        assert!(connects(&open, 0, 15));
        let closed = cluster_decomposition(&g, &Configuration::all_closed(g.edge_count())).unwrap();
        assert_eq!(closed.component_count(), 16);
        assert!(!connects(&closed, 0, 1));
    }

    #[test]
    fn four_cycle_with_one_closed_edge() {
        // a-b-c-d-a with da closed.
        let g = FiniteGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let c = Configuration::from_open_edges(4, [0, 1, 2]);
        let labels = cluster_decomposition(&g, &c).unwrap();
        assert_eq!(labels.components(), &[(0, 4)]);
        assert!(connects(&labels, 0, 3));
    }

    #[test]
    fn length_mismatch_rejected() {
        let g = square(3);
        assert_eq!(
            cluster_decomposition(&g, &Configuration::all_open(3)),
            Err(Error::LengthMismatch { expected: 12, found: 3 })
        );
    }

    #[test]
    fn crossing_at_extremes() {
        let spec = LatticeSpec::Hypercubic { dim: 2, side: 8 };
        assert_eq!(crossing_probability(spec, 1.0, 20, RngSeed(0)).unwrap().mean, 1.0);
        assert_eq!(crossing_probability(spec, 0.0, 20, RngSeed(0)).unwrap().mean, 0.0);
        assert_eq!(
            crossing_probability(LatticeSpec::BinaryTree { depth: 3 }, 0.5, 10, RngSeed(0)),
            Err(Error::NotABox)
        );
    }

    #[test]
    fn pc_clamps_to_lower_edge_when_already_crossing() {
        let spec = LatticeSpec::Hypercubic { dim: 2, side: 16 };
        let opts = PcOptions { lower: 0.9, upper: 1.0, ..PcOptions::default() };
        let est = estimate_pc(spec, 200, 0.01, RngSeed(2), opts).unwrap();
        assert_eq!(est.p_c, 0.9);
        assert!(est.clamped);
    }

    #[test]
    fn pc_reports_nonconvergence() {
        let spec = LatticeSpec::Hypercubic { dim: 2, side: 8 };
        let opts = PcOptions { max_iterations: 2, ..PcOptions::default() };
        assert_eq!(
            estimate_pc(spec, 50, 1e-6, RngSeed(2), opts),
            Err(Error::NonConvergence { iterations: 2 })
        );
        assert!(estimate_pc(spec, 50, 0.0, RngSeed(2), PcOptions::default()).is_err());
    }

    #[test]
    fn root_generation_counts_reached_leaves() {
        let g = build_graph(LatticeSpec::BinaryTree { depth: 2 }).unwrap();
        // Open root->1 (edge 0), 1->3 (edge 2), 1->4 (edge 3), 2->5 (edge 4).
        let c = Configuration::from_open_edges(6, [0, 2, 3, 4]);
        assert_eq!(root_generation_size(&g, &c), 2);
    }
}
