//! The random-cluster measure on a finite graph with free or wired boundary:
//! exact enumeration for small graphs and a single-edge heat-bath chain.
//!
//! A configuration `ω` has weight `∏ p^ω(e) (1-p)^(1-ω(e)) · q^k(ω)`, where
//! `k(ω)` counts open clusters. Under the wired boundary every boundary
//! vertex is glued into one super-vertex before counting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::graph::FiniteGraph;
use crate::sets::VertexSet;
use crate::percolation::{check_replicas, Configuration};
use crate::seed::{RngSeed, SimRng};
use crate::stats::Estimate;
use crate::uniqueness::ConfigSampler;
use crate::union_find::UnionFind;

/// Largest edge count accepted by [`exact_rc_distribution`].
pub const EXACT_MAX_EDGES: usize = 20;
pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_SPACING: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// All edges outside the graph closed (`b = 0`).
    Free,
    /// All edges outside the graph open (`b = 1`).
    Wired,
}

impl Boundary {
    pub fn as_bit(self) -> u8 {
        match self {
            Boundary::Free => 0,
            Boundary::Wired => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcParams {
    pub p: f64,
    pub q: f64,
    pub boundary: Boundary,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_spacing")]
    pub spacing: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_spacing() -> usize {
    DEFAULT_SPACING
}

impl RcParams {
    pub fn new(p: f64, q: f64, boundary: Boundary) -> Self {
        RcParams { p, q, boundary, burn_in: DEFAULT_BURN_IN, spacing: DEFAULT_SPACING }
    }

    /// The heat-bath sampler needs `q >= 1`.
    pub fn validate_for_sampling(&self) -> Result<()> {
        check_probability(self.p)?;
        if self.q.is_nan() || self.q < 1.0 {
            return Err(Error::InvalidParameter(format!("sampler requires q >= 1, got {}", self.q)));
        }
        Ok(())
    }
}

/// Boundary used for graphs given as bare edge lists: the vertices of
/// degree at most one, or the first and last vertex if there are none.
pub fn leaf_boundary(graph: &FiniteGraph) -> VertexSet {
    let n = graph.vertex_count();
    let leaves: Vec<usize> = (0..n).filter(|&v| graph.degree(v) <= 1).collect();
    if leaves.is_empty() && n > 0 {
        VertexSet::from_indices(n, [0, n - 1])
    } else {
        VertexSet::from_indices(n, leaves)
    }
}

/// Number of open clusters, with the boundary glued under `Wired`.
pub fn cluster_count(graph: &FiniteGraph, config: &Configuration, boundary: Boundary) -> usize {
    let n = graph.vertex_count();
    let mut uf = UnionFind::new(n + 1);
    let glued = boundary == Boundary::Wired && !graph.boundary().is_empty();
    if glued {
        for v in graph.boundary().iter() {
            uf.union(n, v);
        }
    }
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        if config.is_open(e) {
            uf.union(u, v);
        }
    }
    uf.set_count() - usize::from(!glued)
}

/// Probabilities of all `2^|E|` configurations, indexed by edge bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct RcDistribution {
    edge_count: usize,
    probs: Vec<f64>,
}

impl RcDistribution {
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, config: &Configuration) -> f64 {
        self.probs[config.to_mask() as usize]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability that edge `e` is open.
    pub fn edge_marginal(&self, e: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask >> e & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// Expected fraction of open edges.
    pub fn mean_open_fraction(&self) -> f64 {
        if self.edge_count == 0 {
            return 0.0;
        }
        self.probs
            .iter()
            .enumerate()
            .map(|(mask, p)| p * mask.count_ones() as f64)
            .sum::<f64>()
            / self.edge_count as f64
    }
}

pub fn exact_rc_distribution(
    graph: &FiniteGraph,
    p: f64,
    q: f64,
    boundary: Boundary,
) -> Result<RcDistribution> {
    check_probability(p)?;
    if q.is_nan() || q <= 0.0 {
        return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
    }
    let m = graph.edge_count();
    if m > EXACT_MAX_EDGES {
        return Err(Error::TooManyEdges { edges: m, limit: EXACT_MAX_EDGES });
    }
    let mut probs: Vec<f64> = (0..1u64 << m)
        .map(|mask| {
            let config = Configuration::from_mask(m, mask);
            let open = mask.count_ones() as i32;
            let k = cluster_count(graph, &config, boundary) as i32;
            p.powi(open) * (1.0 - p).powi(m as i32 - open) * q.powi(k)
        })
        .collect();
    let z: f64 = probs.iter().sum();
    for w in &mut probs {
        *w /= z;
    }
    Ok(RcDistribution { edge_count: m, probs })
}

/// A configuration together with its boundary condition and cluster count.
#[derive(Debug, Clone, PartialEq)]
pub struct RcState {
    config: Configuration,
    boundary: Boundary,
    cluster_count: usize,
}

impl RcState {
    pub fn new(graph: &FiniteGraph, config: Configuration, boundary: Boundary) -> Result<Self> {
        if config.len() != graph.edge_count() {
            return Err(Error::LengthMismatch { expected: graph.edge_count(), found: config.len() });
        }
        let cluster_count = cluster_count(graph, &config, boundary);
        Ok(RcState { config, boundary, cluster_count })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }
}

/// Breadth-first connectivity queries on the open graph, with the wired
/// boundary acting as a single vertex.
struct Connectivity {
    stamp: Vec<u32>,
    generation: u32,
    queue: Vec<usize>,
}

impl Connectivity {
    fn new(n: usize) -> Self {
        Connectivity { stamp: vec![0; n], generation: 0, queue: Vec::new() }
    }

    /// Whether `x` and `y` are joined without using edge `skip`.
    fn joined(
        &mut self,
        graph: &FiniteGraph,
        config: &Configuration,
        boundary: Boundary,
        x: usize,
        y: usize,
        skip: Option<usize>,
    ) -> bool {
        if x == y {
            return true;
        }
        let wired = boundary == Boundary::Wired;
        let bset = graph.boundary();
        if wired && bset.contains(x) && bset.contains(y) {
            return true;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        let g = self.generation;
        self.queue.clear();
        self.queue.push(x);
        self.stamp[x] = g;
        let mut glued = false;
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            head += 1;
            if wired && !glued && bset.contains(v) {
                glued = true;
                if bset.contains(y) {
                    return true;
                }
                for b in bset.iter() {
                    if self.stamp[b] != g {
                        self.stamp[b] = g;
                        self.queue.push(b);
                    }
                }
            }
            for &(w, e) in graph.neighbors(v) {
                if Some(e) == skip || !config.is_open(e) || self.stamp[w] == g {
                    continue;
                }
                if w == y {
                    return true;
                }
                self.stamp[w] = g;
                self.queue.push(w);
            }
        }
        false
    }
}

/// Single-edge heat-bath dynamics for the random-cluster measure.
pub struct HeatBath<'g> {
    graph: &'g FiniteGraph,
    params: RcParams,
    state: RcState,
    conn: Connectivity,
}

impl<'g> HeatBath<'g> {
    pub fn new(graph: &'g FiniteGraph, params: RcParams, state: RcState) -> Result<Self> {
        params.validate_for_sampling()?;
        if state.config.len() != graph.edge_count() {
            return Err(Error::LengthMismatch {
                expected: graph.edge_count(),
                found: state.config.len(),
            });
        }
        if state.boundary != params.boundary {
            return Err(Error::InvalidParameter("state and params disagree on boundary".into()));
        }
        Ok(HeatBath { graph, params, state, conn: Connectivity::new(graph.vertex_count()) })
    }

    /// Chain started from the all-closed configuration.
    pub fn from_closed(graph: &'g FiniteGraph, params: RcParams) -> Result<Self> {
        let state = RcState::new(graph, Configuration::all_closed(graph.edge_count()), params.boundary)?;
        Self::new(graph, params, state)
    }

    pub fn state(&self) -> &RcState {
        &self.state
    }

    pub fn into_state(self) -> RcState {
        self.state
    }

    fn endpoints_joined_elsewhere(&mut self, e: usize) -> bool {
        let (u, v) = self.graph.edge(e);
        self.conn.joined(self.graph, &self.state.config, self.state.boundary, u, v, Some(e))
    }

    /// `P(e open | all other edges)`.
    pub fn conditional(&mut self, e: usize) -> f64 {
        let joined = self.endpoints_joined_elsewhere(e);
        conditional_probability(self.params.p, self.params.q, joined)
    }

    /// Resample every edge once, in index order.
    pub fn sweep<R: Rng>(&mut self, rng: &mut R) {
        let (p, q) = (self.params.p, self.params.q);
        for e in 0..self.graph.edge_count() {
            let joined = self.endpoints_joined_elsewhere(e);
            let open = rng.gen::<f64>() < conditional_probability(p, q, joined);
            let was = self.state.config.is_open(e);
            if open != was {
                self.state.config.set(e, open);
                if !joined {
                    if open {
                        self.state.cluster_count -= 1;
                    } else {
                        self.state.cluster_count += 1;
                    }
                }
            }
        }
    }

    pub fn sweeps<R: Rng>(&mut self, count: usize, rng: &mut R) {
        for _ in 0..count {
            self.sweep(rng);
        }
    }
}

fn conditional_probability(p: f64, q: f64, endpoints_joined: bool) -> f64 {
    if endpoints_joined {
        p
    } else {
        let denom = p + (1.0 - p) * q;
        if denom == 0.0 {
            0.0
        } else {
            p / denom
        }
    }
}

/// Probability that edge `e` is open given the states of all other edges:
/// `p` if its endpoints are otherwise joined, else `p / (p + (1 - p) q)`.
pub fn single_edge_conditional(
    graph: &FiniteGraph,
    state: &RcState,
    e: usize,
    params: &RcParams,
) -> Result<f64> {
    params.validate_for_sampling()?;
    if e >= graph.edge_count() {
        return Err(Error::IndexOutOfRange { index: e, len: graph.edge_count() });
    }
    let (u, v) = graph.edge(e);
    let joined =
        Connectivity::new(graph.vertex_count()).joined(graph, state.config(), state.boundary, u, v, Some(e));
    Ok(conditional_probability(params.p, params.q, joined))
}

pub fn heat_bath_sweep(
    graph: &FiniteGraph,
    state: RcState,
    params: &RcParams,
    seed: RngSeed,
) -> Result<RcState> {
    let mut chain = HeatBath::new(graph, *params, state)?;
    chain.sweep(&mut seed.rng());
    Ok(chain.into_state())
}

/// Start all-closed, discard `burn_in` sweeps, return the configuration.
pub fn sample_rc(graph: &FiniteGraph, params: &RcParams, seed: RngSeed) -> Result<Configuration> {
    let mut chain = HeatBath::from_closed(graph, *params)?;
    chain.sweeps(params.burn_in, &mut seed.rng());
    Ok(chain.into_state().into_config())
}

/// Draws `count` configurations from one chain: `burn_in` sweeps, then one
/// sample every `spacing` sweeps.
pub fn chain_samples(
    graph: &FiniteGraph,
    params: &RcParams,
    count: usize,
    seed: RngSeed,
) -> Result<Vec<Configuration>> {
    let mut chain = HeatBath::from_closed(graph, *params)?;
    let mut rng: SimRng = seed.rng();
    chain.sweeps(params.burn_in, &mut rng);
    let spacing = params.spacing.max(1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        chain.sweeps(spacing, &mut rng);
        out.push(chain.state().config().clone());
    }
    Ok(out)
}

/// Connection under the boundary convention: with `Wired`, two vertices
/// that both reach the boundary are joined through it.
pub fn rc_connects(graph: &FiniteGraph, config: &Configuration, boundary: Boundary, x: usize, y: usize) -> bool {
    Connectivity::new(graph.vertex_count()).joined(graph, config, boundary, x, y, None)
}

/// Estimate of `φ(x ↔ y)` from `replicas` spaced samples of one chain.
///
/// The standard error is binomial and treats the spaced samples as
/// independent.
pub fn two_point_estimate(
    graph: &FiniteGraph,
    params: &RcParams,
    x: usize,
    y: usize,
    replicas: usize,
    seed: RngSeed,
) -> Result<Estimate> {
    check_replicas(replicas)?;
    let n = graph.vertex_count();
    for v in [x, y] {
        if v >= n {
            return Err(Error::IndexOutOfRange { index: v, len: n });
        }
    }
    let samples = chain_samples(graph, params, replicas, seed)?;
    let mut conn = Connectivity::new(n);
    let hits = samples
        .iter()
        .filter(|c| conn.joined(graph, c, params.boundary, x, y, None))
        .count();
    Ok(Estimate::binomial(hits, replicas))
}

/// Independent random-cluster samples, one chain per seed.
pub struct RcSampler<'g> {
    graph: &'g FiniteGraph,
    params: RcParams,
}

impl<'g> RcSampler<'g> {
    pub fn new(graph: &'g FiniteGraph, params: RcParams) -> Result<Self> {
        params.validate_for_sampling()?;
        Ok(RcSampler { graph, params })
    }
}

impl ConfigSampler for RcSampler<'_> {
    fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    fn sample(&self, seed: RngSeed) -> Configuration {
        sample_rc(self.graph, &self.params, seed).expect("params validated at construction")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcRow {
    pub p: f64,
    pub q: f64,
    pub boundary: Boundary,
    pub sweeps: usize,
    pub open_fraction: f64,
    pub two_point: f64,
    pub seed: u64,
}

impl RcRow {
    pub const HEADER: &'static str = "p,q,b,sweeps,open_fraction,two_point,seed";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.p,
            self.q,
            self.boundary.as_bit(),
            self.sweeps,
            self.open_fraction,
            self.two_point,
            self.seed
        )
    }
}

/// Runs one chain and reports the mean open fraction and `φ(x ↔ y)`.
pub fn rc_summary(
    graph: &FiniteGraph,
    params: &RcParams,
    x: usize,
    y: usize,
    samples: usize,
    seed: RngSeed,
) -> Result<RcRow> {
    check_replicas(samples)?;
    let configs = chain_samples(graph, params, samples, seed)?;
    let m = graph.edge_count().max(1) as f64;
    let open_fraction =
        configs.iter().map(|c| c.open_count() as f64 / m).sum::<f64>() / samples as f64;
    let mut conn = Connectivity::new(graph.vertex_count());
    let hits = configs
        .iter()
        .filter(|c| conn.joined(graph, c, params.boundary, x, y, None))
        .count();
    Ok(RcRow {
        p: params.p,
        q: params.q,
        boundary: params.boundary,
        sweeps: params.burn_in + samples * params.spacing.max(1),
        open_fraction,
        two_point: hits as f64 / samples as f64,
        seed: seed.0,
    })
}
