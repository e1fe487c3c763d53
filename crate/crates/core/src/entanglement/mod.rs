//! Entanglement certificates for finite edge sets of `Z^3`.
//!
//! Deciding entanglement is out of reach, so only one-sided witnesses are
//! produced: a connected set is entangled, and so is a set containing two
//! cycles with nonzero linking number. Anything else is `Unknown`.

mod animals;

pub use animals::{count_connected_edge_sets, MAX_ANIMAL_EDGES};

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, RngSeed};
use crate::union_find::UnionFind;

pub type Point3 = [i64; 3];
pub type LatticeEdge = (Point3, Point3);

const DEFAULT_PROJECTION_SEED: RngSeed = RngSeed(0x5eed_11c4);
const MAX_PROJECTION_ATTEMPTS: u64 = 64;
const EPS: f64 = 1e-9;
/// Cycles examined per component by [`entanglement_witness`].
pub const DEFAULT_CYCLE_BUDGET: usize = 256;

fn is_unit_step(a: Point3, b: Point3) -> bool {
    (0..3).map(|k| (a[k] - b[k]).abs()).sum::<i64>() == 1
}

/// Simple closed lattice polygon, stored without repeating the first vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeCycle {
    vertices: Vec<Point3>,
}

impl LatticeCycle {
    /// Accepts the vertex list with or without the closing repeat.
    pub fn new(mut vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 4 {
            return Err(Error::InvalidCycle(format!("length {} is below 4", vertices.len())));
        }
        let n = vertices.len();
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if !is_unit_step(a, b) {
                return Err(Error::InvalidCycle(format!("{a:?} and {b:?} are not adjacent")));
            }
        }
        let distinct: HashSet<Point3> = vertices.iter().copied().collect();
        if distinct.len() != n {
            return Err(Error::InvalidCycle("a vertex repeats".into()));
        }
        Ok(LatticeCycle { vertices })
    }

    /// One `x y z` triple per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let coords: Vec<i64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidCycle(format!("line {}: {e}", lineno + 1)))?;
            let [x, y, z] = coords[..] else {
                return Err(Error::InvalidCycle(format!("line {}: expected three integers", lineno + 1)));
            };
            vertices.push([x, y, z]);
        }
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        LatticeCycle { vertices }
    }

    pub fn translated(&self, by: Point3) -> Self {
        let vertices = self.vertices.iter().map(|v| [v[0] + by[0], v[1] + by[1], v[2] + by[2]]).collect();
        LatticeCycle { vertices }
    }

    /// Directed segments in cycle order.
    pub fn segments(&self) -> impl Iterator<Item = (Point3, Point3)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

impl fmt::Display for LatticeCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.vertices {
            writeln!(f, "{} {} {}", v[0], v[1], v[2])?;
        }
        Ok(())
    }
}

type Vec3 = [f64; 3];

/// Rotation matrix of a uniformly random unit quaternion.
fn random_rotation(seed: RngSeed) -> [Vec3; 3] {
    let mut rng = seed.rng();
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (x, y, z, w) = (a * (2.0 * PI * u2).sin(), a * (2.0 * PI * u2).cos(), b * (2.0 * PI * u3).sin(), b * (2.0 * PI * u3).cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn rotate(m: &[Vec3; 3], p: Point3) -> Vec3 {
    let p = [p[0] as f64, p[1] as f64, p[2] as f64];
    [0, 1, 2].map(|r| m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2])
}

fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Signed crossings of `a` over `b` and of `b` over `a` in the projection
/// to the first two rotated coordinates, or `None` if the projection is not
/// generic.
fn project_and_count(a: &LatticeCycle, b: &LatticeCycle, rotation: &[Vec3; 3]) -> Option<(i64, i64)> {
    let ra: Vec<Vec3> = a.vertices.iter().map(|&p| rotate(rotation, p)).collect();
    let rb: Vec<Vec3> = b.vertices.iter().map(|&p| rotate(rotation, p)).collect();
    let (mut a_over, mut b_over) = (0i64, 0i64);
    for i in 0..ra.len() {
        let (p, p2) = (ra[i], ra[(i + 1) % ra.len()]);
        let d1 = [p2[0] - p[0], p2[1] - p[1]];
        for j in 0..rb.len() {
            let (q, q2) = (rb[j], rb[(j + 1) % rb.len()]);
            let d2 = [q2[0] - q[0], q2[1] - q[1]];
            let w = [q[0] - p[0], q[1] - p[1]];
            let denom = cross2(d1, d2);
            if denom.abs() < EPS {
                // Parallel images are degenerate only if they overlap.
                if cross2(d1, w).abs() < EPS {
                    let len2 = d1[0] * d1[0] + d1[1] * d1[1];
                    let s0 = (w[0] * d1[0] + w[1] * d1[1]) / len2;
                    let s1 = s0 + (d2[0] * d1[0] + d2[1] * d1[1]) / len2;
                    if s0.max(s1) > -EPS && s0.min(s1) < 1.0 + EPS {
                        return None;
                    }
                }
                continue;
            }
            let t = cross2(w, d2) / denom;
            let s = cross2(w, d1) / denom;
            if !(-EPS..=1.0 + EPS).contains(&t) || !(-EPS..=1.0 + EPS).contains(&s) {
                continue;
            }
            if !(EPS..=1.0 - EPS).contains(&t) || !(EPS..=1.0 - EPS).contains(&s) {
                return None;
            }
            let za = p[2] + t * (p2[2] - p[2]);
            let zb = q[2] + s * (q2[2] - q[2]);
            if (za - zb).abs() < EPS {
                return None;
            }
            // Sign of (over direction) x (under direction).
            let sign = if denom > 0.0 { 1 } else { -1 };
            if za > zb {
                a_over += sign;
            } else {
                b_over -= sign;
            }
        }
    }
    Some((a_over, b_over))
}

/// Linking number with the projections that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkingReport {
    pub value: i64,
    /// Values from two independent generic projections.
    pub projections: [i64; 2],
    /// Projections drawn, including rejected non-generic ones.
    pub attempts: u64,
}

fn check_disjoint(a: &LatticeCycle, b: &LatticeCycle) -> Result<()> {
    let va: HashSet<Point3> = a.vertices.iter().copied().collect();
    if let Some(v) = b.vertices.iter().find(|v| va.contains(*v)) {
        return Err(Error::InvalidCycle(format!("cycles share vertex {v:?}")));
    }
    Ok(())
}

pub fn linking_number_seeded(a: &LatticeCycle, b: &LatticeCycle, seed: RngSeed) -> Result<LinkingReport> {
    check_disjoint(a, b)?;
    let mut found = Vec::with_capacity(2);
    let mut attempts = 0;
    while found.len() < 2 {
        if attempts == MAX_PROJECTION_ATTEMPTS {
            return Err(Error::NonConvergence { iterations: attempts as usize });
        }
        let rotation = random_rotation(derive_seed(seed, attempts));
        attempts += 1;
        if let Some((a_over, b_over)) = project_and_count(a, b, &rotation) {
            if a_over != b_over {
                return Err(Error::InvalidCycle(format!(
                    "over and under crossing sums differ ({a_over} vs {b_over})"
                )));
            }
            found.push(a_over);
        }
    }
    if found[0] != found[1] {
        return Err(Error::InvalidCycle(format!("projections disagree: {} vs {}", found[0], found[1])));
    }
    Ok(LinkingReport { value: found[0], projections: [found[0], found[1]], attempts })
}

/// Linking number of two vertex-disjoint lattice cycles.
pub fn linking_number(a: &LatticeCycle, b: &LatticeCycle) -> Result<i64> {
    linking_number_seeded(a, b, DEFAULT_PROJECTION_SEED).map(|r| r.value)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntanglementVerdict {
    EntangledByConnectivity,
    EntangledByLinking { first: LatticeCycle, second: LatticeCycle, linking: i64 },
    /// No certificate found. This does not mean the set is separable.
    Unknown,
}

impl EntanglementVerdict {
    pub fn is_entangled(&self) -> bool {
        !matches!(self, EntanglementVerdict::Unknown)
    }

    pub fn label(&self) -> &'static str {
        match self {
            EntanglementVerdict::EntangledByConnectivity => "connected",
            EntanglementVerdict::EntangledByLinking { .. } => "linked",
            EntanglementVerdict::Unknown => "unknown",
        }
    }
}

/// Simple graph on the vertices of an edge set, with vertices sorted.
struct EdgeGraph {
    points: Vec<Point3>,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl EdgeGraph {
    fn new(edges: &[LatticeEdge]) -> Result<Self> {
        let mut index = BTreeMap::new();
        for &(a, b) in edges {
            if !is_unit_step(a, b) {
                return Err(Error::InvalidParameter(format!("{a:?}-{b:?} is not a lattice edge")));
            }
            index.insert(a, 0);
            index.insert(b, 0);
        }
        let points: Vec<Point3> = index.keys().copied().collect();
        for (i, v) in index.values_mut().enumerate() {
            *v = i;
        }
        let mut adj = vec![Vec::new(); points.len()];
        let mut seen = HashSet::new();
        let mut list = Vec::new();
        for &(a, b) in edges {
            let (u, v) = (index[&a], index[&b]);
            let key = (u.min(v), u.max(v));
            if seen.insert(key) {
                adj[u].push(v);
                adj[v].push(u);
                list.push(key);
            }
        }
        Ok(EdgeGraph { points, adj, edges: list })
    }

    /// Fundamental cycles of each component with respect to a BFS forest,
    /// at most `budget` per component. Returns `(cycles, truncated)`.
    fn cycle_bases(&self, component: &[usize], budget: usize) -> (Vec<Vec<LatticeCycle>>, bool) {
        let n = self.points.len();
        let mut parent = vec![usize::MAX; n];
        let mut depth = vec![0usize; n];
        let mut seen = vec![false; n];
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(x) = queue.pop_front() {
                for &y in &self.adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        parent[y] = x;
                        depth[y] = depth[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
        }
        let comp_count = component.iter().max().map_or(0, |&c| c + 1);
        let mut bases = vec![Vec::new(); comp_count];
        let mut truncated = false;
        for &(u, v) in &self.edges {
            if parent[u] == v || parent[v] == u {
                continue;
            }
            let c = component[u];
            if bases[c].len() >= budget {
                truncated = true;
                continue;
            }
            let (mut x, mut y) = (u, v);
            let (mut left, mut right) = (vec![x], vec![y]);
            while x != y {
                if depth[x] >= depth[y] {
                    x = parent[x];
                    left.push(x);
                } else {
                    y = parent[y];
                    right.push(y);
                }
            }
            right.pop();
            left.extend(right.into_iter().rev());
            let cycle = LatticeCycle::new(left.iter().map(|&i| self.points[i]).collect())
                .expect("fundamental cycles of a simple lattice graph are simple");
            bases[c].push(cycle);
        }
        (bases, truncated)
    }
}

/// [`entanglement_witness_with_budget`] with the default cycle budget.
pub fn entanglement_witness(edges: &[LatticeEdge]) -> Result<EntanglementVerdict> {
    entanglement_witness_with_budget(edges, DEFAULT_CYCLE_BUDGET)
}

/// Connected sets are certified directly. Otherwise linking numbers are
/// checked between fundamental cycles of distinct components; since
/// linking is bilinear in the cycle space, a zero result over the bases
/// rules out every linked pair unless the budget truncated a basis.
pub fn entanglement_witness_with_budget(edges: &[LatticeEdge], budget: usize) -> Result<EntanglementVerdict> {
    let g = EdgeGraph::new(edges)?;
    if g.points.is_empty() {
        return Ok(EntanglementVerdict::Unknown);
    }
    let mut uf = UnionFind::new(g.points.len());
    for &(u, v) in &g.edges {
        uf.union(u, v);
    }
    if uf.set_count() == 1 {
        return Ok(EntanglementVerdict::EntangledByConnectivity);
    }
    let mut ids = BTreeMap::new();
    let component: Vec<usize> = (0..g.points.len())
        .map(|v| {
            let r = uf.find(v);
            let next = ids.len();
            *ids.entry(r).or_insert(next)
        })
        .collect();
    let (bases, _) = g.cycle_bases(&component, budget);
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            for a in &bases[i] {
                for b in &bases[j] {
                    let lk = linking_number(a, b)?;
                    if lk != 0 {
                        return Ok(EntanglementVerdict::EntangledByLinking {
                            first: a.clone(),
                            second: b.clone(),
                            linking: lk,
                        });
                    }
                }
            }
        }
    }
    Ok(EntanglementVerdict::Unknown)
}

/// Edges of a cycle, for building edge sets.
pub fn cycle_edges(c: &LatticeCycle) -> Vec<LatticeEdge> {
    c.segments().collect()
}

/// Axis-aligned square of side `side` in the plane spanned by axes `a`
/// and `b`, with lower corner `origin`, traversed counterclockwise.
pub fn lattice_square(origin: Point3, a: usize, b: usize, side: i64) -> LatticeCycle {
    assert!(a != b && a < 3 && b < 3 && side >= 1);
    let at = |s: i64, t: i64| {
        let mut p = origin;
        p[a] += s;
        p[b] += t;
        p
    };
    let mut vertices = Vec::new();
    vertices.extend((0..side).map(|s| at(s, 0)));
    vertices.extend((0..side).map(|t| at(side, t)));
    vertices.extend((0..side).map(|s| at(side - s, side)));
    vertices.extend((0..side).map(|t| at(0, side - t)));
    LatticeCycle::new(vertices).expect("square is a simple cycle")
}

/// The standard interlocked pair: the boundary of `[0,2]^2` at `z = 0`,
/// threaded by a square of side 2 in the plane `y = 1`.
pub fn hopf_pair() -> (LatticeCycle, LatticeCycle) {
    (lattice_square([0, 0, 0], 0, 1, 2), lattice_square([1, 1, -1], 0, 2, 2))
}
