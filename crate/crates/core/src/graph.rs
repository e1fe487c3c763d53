//! Finite lattice patches and trees.
//!
//! Vertex order is row-major in the coordinate tuple: for a hypercubic box of
//! side `L` the vertex at `(x0, .., x_{d-1})` has index
//! `((x0 * L + x1) * L + ..) + x_{d-1}`. Trees use heap order, which is
//! row-major in `(level, position)`. The triangular lattice is `Z^2` with
//! the extra `(+1, +1)` diagonal.
//!
//! Each vertex also records its degree in the ambient infinite graph, so the
//! boundary relative to the infinite lattice can be recovered from the finite
//! patch alone.

use std::fmt;
use std::io::{self, Write};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sets::VertexSet;

/// Upper bound on vertices a spec may produce.
pub const MAX_VERTICES: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeSpec {
    Hypercubic { dim: usize, side: usize },
    Triangular { side: usize },
    BinaryTree { depth: usize },
    TreeCrossLine { depth: usize, line_length: usize },
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match *self {
            LatticeSpec::Hypercubic { dim, side } => {
                if dim < 2 {
                    return bad(format!("dimension {dim} < 2"));
                }
                if side < 2 {
                    return bad(format!("side {side} < 2"));
                }
                let count = (0..dim).try_fold(1usize, |acc, _| acc.checked_mul(side));
                if count.is_none_or(|c| c > MAX_VERTICES) {
                    return bad(format!("{side}^{dim} vertices exceeds limit"));
                }
            }
            LatticeSpec::Triangular { side } => {
                if side < 2 {
                    return bad(format!("side {side} < 2"));
                }
                if side.checked_mul(side).is_none_or(|c| c > MAX_VERTICES) {
                    return bad(format!("side {side} exceeds limit"));
                }
            }
            LatticeSpec::BinaryTree { depth } => {
                if depth < 1 {
                    return bad("depth must be at least 1".into());
                }
                if depth > 23 {
                    return bad(format!("depth {depth} exceeds limit"));
                }
            }
            LatticeSpec::TreeCrossLine { depth, line_length } => {
                if depth < 1 {
                    return bad("depth must be at least 1".into());
                }
                if line_length < 2 {
                    return bad(format!("line length {line_length} < 2"));
                }
                let count = (1usize << (depth + 1).min(63)).checked_mul(line_length);
                if depth > 23 || count.is_none_or(|c| c > MAX_VERTICES) {
                    return bad("tree x line exceeds vertex limit".into());
                }
            }
        }
        Ok(())
    }

    /// Hypercubic and triangular specs are boxes; trees are not.
    pub fn is_box(&self) -> bool {
        matches!(self, LatticeSpec::Hypercubic { .. } | LatticeSpec::Triangular { .. })
    }

    pub fn box_side(&self) -> Option<usize> {
        match *self {
            LatticeSpec::Hypercubic { side, .. } | LatticeSpec::Triangular { side } => Some(side),
            _ => None,
        }
    }

    /// Same lattice family with a different box side. Trees are unchanged.
    pub fn with_side(&self, side: usize) -> LatticeSpec {
        match *self {
            LatticeSpec::Hypercubic { dim, .. } => LatticeSpec::Hypercubic { dim, side },
            LatticeSpec::Triangular { .. } => LatticeSpec::Triangular { side },
            other => other,
        }
    }
}

impl fmt::Display for LatticeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LatticeSpec::Hypercubic { dim, side } => write!(f, "hypercubic d={dim} L={side}"),
            LatticeSpec::Triangular { side } => write!(f, "triangular L={side}"),
            LatticeSpec::BinaryTree { depth } => write!(f, "binary-tree depth={depth}"),
            LatticeSpec::TreeCrossLine { depth, line_length } => {
                write!(f, "tree-cross-line depth={depth} line={line_length}")
            }
        }
    }
}

/// Which graph a boundary is taken relative to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambient {
    /// The finite patch sits inside the infinite lattice (or infinite tree);
    /// neighbours outside the patch count as outside `W`.
    InfiniteLattice,
    /// Only the finite graph itself exists.
    Subgraph,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGraph {
    spec: Option<LatticeSpec>,
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
    coords: Vec<Vec<i64>>,
    ambient_degree: Vec<usize>,
    boundary: VertexSet,
}

struct Builder {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Builder { n, edges: Vec::new(), adjacency: vec![Vec::new(); n] }
    }

    fn edge(&mut self, u: usize, v: usize) {
        let e = self.edges.len();
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.edges.push((a, b));
        self.adjacency[u].push((v, e));
        self.adjacency[v].push((u, e));
    }
}

fn strides(dim: usize, side: usize) -> Vec<usize> {
    let mut s = vec![1usize; dim];
    for axis in (0..dim.saturating_sub(1)).rev() {
        s[axis] = s[axis + 1] * side;
    }
    s
}

fn box_coords(dim: usize, side: usize, v: usize) -> Vec<i64> {
    let mut c = vec![0i64; dim];
    let mut rest = v;
    for axis in (0..dim).rev() {
        c[axis] = (rest % side) as i64;
        rest /= side;
    }
    c
}

fn tree_level(v: usize) -> usize {
    (usize::BITS - 1 - (v + 1).leading_zeros()) as usize
}

pub fn build_graph(spec: LatticeSpec) -> Result<FiniteGraph> {
    spec.validate()?;
    let graph = match spec {
        LatticeSpec::Hypercubic { dim, side } => {
            let n = side.pow(dim as u32);
            let st = strides(dim, side);
            let mut b = Builder::new(n);
            let coords: Vec<Vec<i64>> = (0..n).map(|v| box_coords(dim, side, v)).collect();
            for v in 0..n {
                for axis in 0..dim {
                    if (coords[v][axis] as usize) + 1 < side {
                        b.edge(v, v + st[axis]);
                    }
                }
            }
            FiniteGraph::assemble(Some(spec), b, coords, vec![2 * dim; n])
        }
        LatticeSpec::Triangular { side } => {
            let n = side * side;
            let mut b = Builder::new(n);
            let coords: Vec<Vec<i64>> = (0..n).map(|v| box_coords(2, side, v)).collect();
            for v in 0..n {
                let (x, y) = (coords[v][0] as usize, coords[v][1] as usize);
                if x + 1 < side {
                    b.edge(v, v + side);
                }
                if y + 1 < side {
                    b.edge(v, v + 1);
                }
                if x + 1 < side && y + 1 < side {
                    b.edge(v, v + side + 1);
                }
            }
            FiniteGraph::assemble(Some(spec), b, coords, vec![6; n])
        }
        LatticeSpec::BinaryTree { depth } => {
            let n = (1usize << (depth + 1)) - 1;
            let mut b = Builder::new(n);
            for v in 1..n {
                b.edge((v - 1) / 2, v);
            }
            let coords = (0..n)
                .map(|v| {
                    let level = tree_level(v);
                    vec![level as i64, (v + 1 - (1 << level)) as i64]
                })
                .collect();
            let ambient = (0..n).map(|v| if v == 0 { 2 } else { 3 }).collect();
            FiniteGraph::assemble(Some(spec), b, coords, ambient)
        }
        LatticeSpec::TreeCrossLine { depth, line_length } => {
            let tree_n = (1usize << (depth + 1)) - 1;
            let n = tree_n * line_length;
            let mut b = Builder::new(n);
            let idx = |t: usize, j: usize| t * line_length + j;
            for t in 0..tree_n {
                for j in 0..line_length {
                    if j + 1 < line_length {
                        b.edge(idx(t, j), idx(t, j + 1));
                    }
                    for child in [2 * t + 1, 2 * t + 2] {
                        if child < tree_n {
                            b.edge(idx(t, j), idx(child, j));
                        }
                    }
                }
            }
            let mut coords = Vec::with_capacity(n);
            let mut ambient = Vec::with_capacity(n);
            for t in 0..tree_n {
                let level = tree_level(t);
                for j in 0..line_length {
                    coords.push(vec![level as i64, (t + 1 - (1 << level)) as i64, j as i64]);
                    ambient.push(if t == 0 { 4 } else { 5 });
                }
            }
            FiniteGraph::assemble(Some(spec), b, coords, ambient)
        }
    };
    Ok(graph)
}

impl FiniteGraph {
    fn assemble(
        spec: Option<LatticeSpec>,
        b: Builder,
        coords: Vec<Vec<i64>>,
        ambient_degree: Vec<usize>,
    ) -> Self {
        let boundary = VertexSet::from_mask(
            (0..b.n).map(|v| ambient_degree[v] > b.adjacency[v].len()).collect(),
        );
        FiniteGraph {
            spec,
            vertex_count: b.n,
            edges: b.edges,
            adjacency: b.adjacency,
            coords,
            ambient_degree,
            boundary,
        }
    }

    /// An arbitrary simple graph. Its ambient graph is itself, so the
    /// boundary starts empty; set one with [`FiniteGraph::with_boundary`].
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut b = Builder::new(vertex_count);
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= vertex_count {
                    return Err(Error::IndexOutOfRange { index: x, len: vertex_count });
                }
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidParameter(format!("repeated edge {u}-{v}")));
            }
            b.edge(u, v);
        }
        let coords = (0..vertex_count).map(|v| vec![v as i64]).collect();
        let ambient = b.adjacency.iter().map(Vec::len).collect();
        Ok(FiniteGraph::assemble(None, b, coords, ambient))
    }

    pub fn with_boundary(mut self, boundary: VertexSet) -> Result<Self> {
        if boundary.universe() != self.vertex_count {
            return Err(Error::LengthMismatch {
                expected: self.vertex_count,
                found: boundary.universe(),
            });
        }
        self.boundary = boundary;
        Ok(self)
    }

    pub fn spec(&self) -> Option<LatticeSpec> {
        self.spec
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// `(neighbour, edge index)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn ambient_degree(&self, v: usize) -> usize {
        self.ambient_degree[v]
    }

    pub fn coords(&self, v: usize) -> &[i64] {
        &self.coords[v]
    }

    /// Vertices with a neighbour outside the patch in the ambient lattice.
    pub fn boundary(&self) -> &VertexSet {
        &self.boundary
    }

    pub fn is_box(&self) -> bool {
        self.spec.is_some_and(|s| s.is_box())
    }

    pub fn box_side(&self) -> Option<usize> {
        self.spec.and_then(|s| s.box_side())
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency
            .get(u)?
            .iter()
            .find(|&&(w, _)| w == v)
            .map(|&(_, e)| e)
    }

    /// Box vertex at the given coordinates.
    pub fn vertex_at(&self, coords: &[i64]) -> Option<usize> {
        let side = self.box_side()? as i64;
        if coords.len() != self.coords[0].len() {
            return None;
        }
        let mut v = 0i64;
        for &c in coords {
            if !(0..side).contains(&c) {
                return None;
            }
            v = v * side + c;
        }
        Some(v as usize)
    }

    /// Box vertex with every coordinate equal to `side / 2`.
    pub fn center(&self) -> Option<usize> {
        let side = self.box_side()? as i64;
        let dim = self.coords[0].len();
        self.vertex_at(&vec![side / 2; dim])
    }

    /// Vertices of a box on the face `x[axis] = 0` (`high = false`) or
    /// `x[axis] = L - 1` (`high = true`).
    pub fn face(&self, axis: usize, high: bool) -> Vec<usize> {
        let Some(side) = self.box_side() else {
            return Vec::new();
        };
        let target = if high { side as i64 - 1 } else { 0 };
        (0..self.vertex_count)
            .filter(|&v| self.coords[v].get(axis) == Some(&target))
            .collect()
    }

    pub fn dimension(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    /// Plain-text dump: two header lines, then one `u v` line per edge.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        match self.spec {
            Some(spec) => writeln!(out, "# spec {spec}")?,
            None => writeln!(out, "# spec custom")?,
        }
        writeln!(out, "# vertices {} edges {}", self.vertex_count, self.edges.len())?;
        for &(u, v) in &self.edges {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn to_dump(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dump is ascii")
    }
}

/// Vertices of `w` adjacent to some vertex outside `w`.
pub fn vertex_boundary(graph: &FiniteGraph, w: &VertexSet, ambient: Ambient) -> Result<VertexSet> {
    if w.universe() != graph.vertex_count() {
        return Err(Error::LengthMismatch { expected: graph.vertex_count(), found: w.universe() });
    }
    let mut out = VertexSet::empty(graph.vertex_count());
    for v in w.iter() {
        let escapes_patch =
            ambient == Ambient::InfiniteLattice && graph.ambient_degree(v) > graph.degree(v);
        if escapes_patch || graph.neighbors(v).iter().any(|&(u, _)| !w.contains(u)) {
            out.insert(v);
        }
    }
    Ok(out)
}

/// `|∂W| / |W|` in exact arithmetic.
pub fn isoperimetric_ratio(graph: &FiniteGraph, w: &VertexSet, ambient: Ambient) -> Result<Ratio<u64>> {
    let size = w.len();
    if size == 0 {
        return Err(Error::EmptySet);
    }
    let boundary = vertex_boundary(graph, w, ambient)?;
    Ok(Ratio::new(boundary.len() as u64, size as u64))
}
