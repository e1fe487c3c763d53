//! Generic rigidity in the plane.
//!
//! Two independent routes decide rigidity: the numerical rank of the
//! rigidity matrix at random placements, and the combinatorial (2,3)
//! pebble game. Rigid components of a configuration come from the pebble
//! game, and rigidity percolation is estimated on the triangular lattice.

mod pebble;

pub use pebble::PebbleGame;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::graph::{build_graph, FiniteGraph, LatticeSpec};
use crate::percolation::{check_replicas, sample_bernoulli, Configuration};
use crate::seed::{derive_seed, RngSeed};
use crate::stats::Estimate;
use crate::union_find::UnionFind;

/// Singular values at or below this count as zero.
pub const RANK_TOLERANCE: f64 = 1e-9;
/// Placements tried by [`generic_rank`].
pub const GENERIC_ATTEMPTS: u64 = 3;

/// A graph with a point of the plane for each vertex.
#[derive(Debug, Clone)]
pub struct Framework<'g> {
    graph: &'g FiniteGraph,
    placement: Vec<[f64; 2]>,
}

impl<'g> Framework<'g> {
    pub fn new(graph: &'g FiniteGraph, placement: Vec<[f64; 2]>) -> Result<Self> {
        if placement.len() != graph.vertex_count() {
            return Err(Error::LengthMismatch { expected: graph.vertex_count(), found: placement.len() });
        }
        Ok(Framework { graph, placement })
    }

    /// Independent uniform points in the unit square.
    pub fn generic(graph: &'g FiniteGraph, seed: RngSeed) -> Self {
        let mut rng = seed.rng();
        let placement = (0..graph.vertex_count()).map(|_| [rng.gen(), rng.gen()]).collect();
        Framework { graph, placement }
    }

    pub fn placement(&self) -> &[[f64; 2]] {
        &self.placement
    }

    /// `|E| x 2n` matrix; the row of edge `uv` holds `f(u) - f(v)` in the
    /// columns of `u` and `f(v) - f(u)` in those of `v`.
    pub fn rigidity_matrix(&self) -> DMatrix<f64> {
        let n = self.graph.vertex_count();
        let mut m = DMatrix::zeros(self.graph.edge_count(), 2 * n);
        for (row, &(u, v)) in self.graph.edges().iter().enumerate() {
            for k in 0..2 {
                let d = self.placement[u][k] - self.placement[v][k];
                m[(row, 2 * u + k)] = d;
                m[(row, 2 * v + k)] = -d;
            }
        }
        m
    }

    fn check_injective(&self) -> Result<()> {
        let mut order: Vec<usize> = (0..self.placement.len()).collect();
        order.sort_by(|&a, &b| self.placement[a].partial_cmp(&self.placement[b]).expect("finite"));
        for w in order.windows(2) {
            if self.placement[w[0]] == self.placement[w[1]] {
                return Err(Error::DegeneratePlacement(format!(
                    "vertices {} and {} share a point; resample the placement",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Rank of the rigidity matrix. The framework is infinitesimally rigid iff
/// the rank is `2n - 3`.
pub fn rigidity_matrix_rank(framework: &Framework<'_>) -> Result<usize> {
    if framework.placement.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::DegeneratePlacement("non-finite coordinate".into()));
    }
    framework.check_injective()?;
    if framework.graph.edge_count() == 0 {
        return Ok(0);
    }
    let svd = framework.rigidity_matrix().svd(false, false);
    Ok(svd.singular_values.iter().filter(|&&s| s > RANK_TOLERANCE).count())
}

/// Largest rank over a few random placements. Generic rank is the maximum
/// over all placements, attained almost surely by a random one.
pub fn generic_rank(graph: &FiniteGraph, seed: RngSeed) -> Result<usize> {
    let mut best = 0;
    for i in 0..GENERIC_ATTEMPTS {
        let fw = Framework::generic(graph, derive_seed(seed, i));
        match rigidity_matrix_rank(&fw) {
            Ok(r) => best = best.max(r),
            Err(Error::DegeneratePlacement(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Rank route: rigid iff generic rank equals `2n - 3`.
pub fn is_rigid_by_rank(graph: &FiniteGraph, seed: RngSeed) -> Result<bool> {
    let n = graph.vertex_count();
    if n < 2 {
        return Ok(true);
    }
    Ok(generic_rank(graph, seed)? == 2 * n - 3)
}

/// Number of independent edges found by the pebble game.
pub fn independent_edge_count(graph: &FiniteGraph) -> usize {
    let mut game = PebbleGame::new(graph.vertex_count());
    for &(u, v) in graph.edges() {
        game.add_edge(u, v);
    }
    game.accepted()
}

/// Pebble-game route: rigid iff there are `2n - 3` independent edges.
pub fn is_generically_rigid_2d(graph: &FiniteGraph) -> bool {
    let n = graph.vertex_count();
    n < 2 || independent_edge_count(graph) == 2 * n - 3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigidComponent {
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
}

/// Partition of the open edges into maximal rigid components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RigidCensus {
    pub components: Vec<RigidComponent>,
    edge_component: Vec<Option<usize>>,
}

impl RigidCensus {
    pub fn component_of_edge(&self, e: usize) -> Option<usize> {
        self.edge_component[e]
    }

    /// Edge counts per component.
    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.edges.len()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Pebble game over a fixed set of open edges, with rigid-component queries.
struct RigidityAnalyzer<'a> {
    graph: &'a FiniteGraph,
    config: &'a Configuration,
    game: PebbleGame,
    known: Vec<bool>,
    tested: Vec<bool>,
    touched: Vec<usize>,
}

impl<'a> RigidityAnalyzer<'a> {
    fn new<I: IntoIterator<Item = usize>>(graph: &'a FiniteGraph, config: &'a Configuration, edges: I) -> Self {
        let n = graph.vertex_count();
        let mut game = PebbleGame::new(n);
        for e in edges {
            let (u, v) = graph.edge(e);
            game.add_edge(u, v);
        }
        RigidityAnalyzer { graph, config, game, known: vec![false; n], tested: vec![false; n], touched: Vec::new() }
    }

    /// Vertices of the maximal rigid component containing the played edge `e`.
    fn component_vertices(&mut self, e: usize) -> Vec<usize> {
        for &t in &self.touched {
            self.known[t] = false;
            self.tested[t] = false;
        }
        self.touched.clear();

        let (u, v) = self.graph.edge(e);
        let pinned = self.game.pin(u, v);
        debug_assert_eq!(pinned, 3, "edge {e} must hold exactly three pebbles");
        let mut members = vec![u, v];
        for x in [u, v] {
            self.known[x] = true;
            self.touched.push(x);
        }
        let mut queue = members.clone();
        let mut newly = Vec::new();
        while let Some(x) = queue.pop() {
            for &(y, f) in self.graph.neighbors(x) {
                if !self.config.is_open(f) || self.known[y] || self.tested[y] {
                    continue;
                }
                newly.clear();
                if self.game.rigid_with(y, u, v, &self.known, &mut newly) {
                    for &z in &newly {
                        if !self.known[z] {
                            self.known[z] = true;
                            self.touched.push(z);
                            members.push(z);
                            queue.push(z);
                        }
                    }
                } else {
                    self.tested[y] = true;
                    self.touched.push(y);
                }
            }
        }
        members.sort_unstable();
        members
    }
}

pub fn rigid_component_census(graph: &FiniteGraph, config: &Configuration) -> Result<RigidCensus> {
    if config.len() != graph.edge_count() {
        return Err(Error::LengthMismatch { expected: graph.edge_count(), found: config.len() });
    }
    let open: Vec<usize> = (0..graph.edge_count()).filter(|&e| config.is_open(e)).collect();
    let mut analyzer = RigidityAnalyzer::new(graph, config, open.iter().copied());
    let mut edge_component = vec![None; graph.edge_count()];
    let mut components = Vec::new();
    let mut member = vec![false; graph.vertex_count()];
    for &e in &open {
        if edge_component[e].is_some() {
            continue;
        }
        let vertices = analyzer.component_vertices(e);
        for &x in &vertices {
            member[x] = true;
        }
        let id = components.len();
        let mut edges = Vec::new();
        for &x in &vertices {
            for &(y, f) in graph.neighbors(x) {
                if x < y && member[y] && config.is_open(f) && edge_component[f].is_none() {
                    edge_component[f] = Some(id);
                    edges.push(f);
                }
            }
        }
        for &x in &vertices {
            member[x] = false;
        }
        edges.sort_unstable();
        components.push(RigidComponent { edges, vertices });
    }
    Ok(RigidCensus { components, edge_component })
}

/// Rigidity and connectivity spanning estimates from the same samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityPoint {
    pub p: f64,
    pub side: usize,
    /// Some rigid component holding the centre meets both faces `x0 = 0`
    /// and `x0 = L - 1`.
    pub theta_rig: Estimate,
    /// The open cluster of the centre meets both faces.
    pub theta_conn: Estimate,
}

impl RigidityPoint {
    pub const HEADER: &'static str = "p,L,theta_rig_estimate,theta_conn_estimate,rig_stderr,conn_stderr";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.p, self.side, self.theta_rig.mean, self.theta_conn.mean, self.theta_rig.stderr, self.theta_conn.stderr
        )
    }
}

fn triangular_only(spec: &LatticeSpec) -> Result<usize> {
    match *spec {
        LatticeSpec::Triangular { side } => Ok(side),
        LatticeSpec::Hypercubic { .. } => Err(Error::Unsupported(
            "rigidity percolation needs the triangular lattice: the hypercubic lattice is not itself rigid".into(),
        )),
        other => Err(Error::Unsupported(format!("rigidity percolation on {other}"))),
    }
}

/// `(rigid spanning, connected spanning)` for one configuration.
pub fn center_spanning(graph: &FiniteGraph, config: &Configuration) -> Result<(bool, bool)> {
    let side = graph.box_side().ok_or(Error::NotABox)?;
    let center = graph.center().ok_or(Error::NotABox)?;
    let last = side as i64 - 1;
    let n = graph.vertex_count();
    let mut uf = UnionFind::new(n);
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        if config.is_open(e) {
            uf.union(u, v);
        }
    }
    let root = uf.find(center);
    let in_cluster: Vec<bool> = (0..n).map(|v| uf.find(v) == root).collect();
    let spans = |vs: &mut dyn Iterator<Item = usize>| {
        let (mut lo, mut hi) = (false, false);
        for v in vs {
            let x = graph.coords(v)[0];
            lo |= x == 0;
            hi |= x == last;
        }
        lo && hi
    };
    let conn = spans(&mut (0..n).filter(|&v| in_cluster[v]));
    if !conn {
        return Ok((false, false));
    }
    let cluster_edges = (0..graph.edge_count()).filter(|&e| config.is_open(e) && in_cluster[graph.edge(e).0]);
    let mut analyzer = RigidityAnalyzer::new(graph, config, cluster_edges);
    let mut covered = vec![false; n];
    for &(y, e) in graph.neighbors(center) {
        if !config.is_open(e) || covered[y] {
            continue;
        }
        let vertices = analyzer.component_vertices(e);
        if spans(&mut vertices.iter().copied()) {
            return Ok((true, true));
        }
        for &x in &vertices {
            covered[x] = true;
        }
    }
    Ok((false, true))
}

pub fn estimate_theta_rig(spec: LatticeSpec, p: f64, replicas: usize, seed: RngSeed) -> Result<RigidityPoint> {
    let side = triangular_only(&spec)?;
    check_probability(p)?;
    check_replicas(replicas)?;
    let graph = build_graph(spec)?;
    let outcomes = (0..replicas as u64)
        .into_par_iter()
        .map(|i| center_spanning(&graph, &sample_bernoulli(&graph, p, derive_seed(seed, i))?))
        .collect::<Result<Vec<_>>>()?;
    let rig = outcomes.iter().filter(|o| o.0).count();
    let conn = outcomes.iter().filter(|o| o.1).count();
    Ok(RigidityPoint {
        p,
        side,
        theta_rig: Estimate::binomial(rig, replicas),
        theta_conn: Estimate::binomial(conn, replicas),
    })
}

/// [`estimate_theta_rig`] over a grid of `p`, every point reusing the same
/// replica seeds so the per-replica indicators are monotone in `p`.
pub fn rigidity_scan(spec: LatticeSpec, grid: &[f64], replicas: usize, seed: RngSeed) -> Result<Vec<RigidityPoint>> {
    grid.iter().map(|&p| estimate_theta_rig(spec, p, replicas, seed)).collect()
}

/// Where a gridded estimate first reaches a level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pivot {
    pub p: f64,
    pub stderr: f64,
    /// The level was not crossed inside the grid; `p` is a grid endpoint.
    pub clamped: bool,
}

/// Linear interpolation between the grid points that bracket `level`,
/// with a delta-method standard error.
pub fn grid_pivot(points: &[(f64, Estimate)], level: f64) -> Option<Pivot> {
    let first = points.first()?;
    let Some(i) = points.iter().position(|(_, e)| e.mean >= level) else {
        let last = points.last()?;
        return Some(Pivot { p: last.0, stderr: 0.0, clamped: true });
    };
    if i == 0 {
        return Some(Pivot { p: first.0, stderr: 0.0, clamped: true });
    }
    let (p0, e0) = points[i - 1];
    let (p1, e1) = points[i];
    let slope = (e1.mean - e0.mean) / (p1 - p0);
    let t = (level - e0.mean) / (e1.mean - e0.mean);
    let se_level = ((1.0 - t).powi(2) * e0.stderr.powi(2) + t.powi(2) * e1.stderr.powi(2)).sqrt();
    Some(Pivot { p: p0 + t * (p1 - p0), stderr: se_level / slope, clamped: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> FiniteGraph {
        FiniteGraph::from_edges(n, edges).unwrap()
    }

    /// Fixed generic-looking placement used for the hand-checked ranks.
    fn fixed_placement(n: usize) -> Vec<[f64; 2]> {
        [[0.13, 0.71], [0.92, 0.24], [0.57, 0.88], [0.31, 0.05], [0.77, 0.49], [0.05, 0.36]][..n].to_vec()
    }

    #[test]
    fn ranks_of_small_frameworks() {
        let single = graph(2, &[(0, 1)]);
        let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let k4 = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        for (g, rank) in [(&single, 1), (&c4, 4), (&k4, 5)] {
            let fw = Framework::new(g, fixed_placement(g.vertex_count())).unwrap();
            assert_eq!(rigidity_matrix_rank(&fw).unwrap(), rank);
        }
    }

    #[test]
    fn repeated_point_is_degenerate() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let fw = Framework::new(&g, vec![[0.1, 0.2], [0.5, 0.5], [0.1, 0.2]]).unwrap();
        assert!(matches!(rigidity_matrix_rank(&fw), Err(Error::DegeneratePlacement(_))));
    }

    #[test]
    fn pebble_game_small_cases() {
        assert!(is_generically_rigid_2d(&graph(3, &[(0, 1), (1, 2), (0, 2)])));
        assert!(!is_generically_rigid_2d(&graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])));
        assert!(!is_generically_rigid_2d(&graph(3, &[(0, 1), (1, 2)])));
        assert!(is_generically_rigid_2d(&graph(2, &[(0, 1)])));
    }

    #[test]
    fn path_census_is_one_edge_per_component() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let census = rigid_component_census(&g, &Configuration::all_open(4)).unwrap();
        assert_eq!(census.sizes(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn empty_census() {
        let g = build_graph(LatticeSpec::Triangular { side: 4 }).unwrap();
        let census = rigid_component_census(&g, &Configuration::all_closed(g.edge_count())).unwrap();
        assert!(census.is_empty());
    }

    #[test]
    fn full_triangular_patch_is_one_component() {
        let g = build_graph(LatticeSpec::Triangular { side: 4 }).unwrap();
        let census = rigid_component_census(&g, &Configuration::all_open(g.edge_count())).unwrap();
        assert_eq!(census.components.len(), 1);
        assert_eq!(census.components[0].edges.len(), g.edge_count());
        assert_eq!(census.components[0].vertices.len(), 16);
    }

    #[test]
    fn two_triangles_sharing_a_vertex() {
        // Bowtie: rigid triangles 0-1-2 and 2-3-4 hinge at 2.
        let g = graph(5, &[(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)]);
        let census = rigid_component_census(&g, &Configuration::all_open(6)).unwrap();
        assert_eq!(census.sizes(), vec![3, 3]);
        assert_eq!(census.components[0].vertices, vec![0, 1, 2]);
        assert_eq!(census.components[1].vertices, vec![2, 3, 4]);
    }

    #[test]
    fn hypercubic_rejected() {
        let err = estimate_theta_rig(LatticeSpec::Hypercubic { dim: 2, side: 8 }, 0.5, 10, RngSeed(0));
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn theta_rig_extremes() {
        let spec = LatticeSpec::Triangular { side: 8 };
        let full = estimate_theta_rig(spec, 1.0, 5, RngSeed(1)).unwrap();
        assert_eq!((full.theta_rig.mean, full.theta_conn.mean), (1.0, 1.0));
        let empty = estimate_theta_rig(spec, 0.0, 5, RngSeed(1)).unwrap();
        assert_eq!((empty.theta_rig.mean, empty.theta_conn.mean), (0.0, 0.0));
    }

    #[test]
    fn pivot_interpolates() {
        let e = |m: f64| Estimate { mean: m, stderr: 0.01, samples: 100 };
        let pts = [(0.1, e(0.0)), (0.2, e(0.25)), (0.3, e(0.75)), (0.4, e(1.0))];
        let pv = grid_pivot(&pts, 0.5).unwrap();
        assert!((pv.p - 0.25).abs() < 1e-12);
        assert!(!pv.clamped);
        assert!(grid_pivot(&pts[2..], 0.5).unwrap().clamped);
    }
}
