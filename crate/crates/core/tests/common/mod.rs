//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;

use perclab::entanglement::{LatticeCycle, Point3};

/// Component labels (minimum vertex of each component) by plain BFS.
pub fn bfs_labels(n: usize, edges: &[(usize, usize)], open: &[bool]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for (e, &(u, v)) in edges.iter().enumerate() {
        if open[e] {
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    let mut label = vec![usize::MAX; n];
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if label[y] == usize::MAX {
                    label[y] = s;
                    queue.push_back(y);
                }
            }
        }
    }
    label
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    n <= 1 || bfs_labels(n, edges, &vec![true; edges.len()]).iter().all(|&l| l == 0)
}

type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit(a: Vec3) -> Option<Vec3> {
    let n = dot(a, a).sqrt();
    (n > 1e-12).then(|| [a[0] / n, a[1] / n, a[2] / n])
}

fn as_f(p: Point3) -> Vec3 {
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

/// Solid angle swept by the segment pair, the exact value of the Gauss
/// double integral over two straight segments.
fn segment_pair(p1: Vec3, p2: Vec3, p3: Vec3, p4: Vec3) -> f64 {
    let (r13, r14, r23, r24) = (sub(p3, p1), sub(p4, p1), sub(p3, p2), sub(p4, p2));
    let normals = [cross(r13, r14), cross(r14, r24), cross(r24, r23), cross(r23, r13)];
    let Some(n) = normals.iter().map(|&v| unit(v)).collect::<Option<Vec<_>>>() else {
        return 0.0;
    };
    let omega: f64 = (0..4).map(|i| dot(n[i], n[(i + 1) % 4]).clamp(-1.0, 1.0).asin()).sum();
    let orientation = dot(cross(sub(p4, p3), sub(p2, p1)), r13);
    omega * orientation.signum()
}

/// Gauss linking integral summed segment pair by segment pair.
pub fn gauss_linking(a: &LatticeCycle, b: &LatticeCycle) -> f64 {
    let mut total = 0.0;
    for (p1, p2) in a.segments() {
        for (p3, p4) in b.segments() {
            total += segment_pair(as_f(p1), as_f(p2), as_f(p3), as_f(p4));
        }
    }
    total / (4.0 * PI)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Lexicographically smallest relabelled edge list of a connected graph.
fn canonical_component(vertices: &[usize], edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let index = |v: usize| vertices.iter().position(|&w| w == v).unwrap();
    let local: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (index(u), index(v))).collect();
    permutations(vertices.len())
        .into_iter()
        .map(|perm| {
            let mut relabelled: Vec<(usize, usize)> = local
                .iter()
                .map(|&(u, v)| (perm[u].min(perm[v]), perm[u].max(perm[v])))
                .collect();
            relabelled.sort_unstable();
            relabelled
        })
        .min()
        .unwrap()
}

/// Isomorphism invariant: the sorted canonical forms of the components.
fn canonical_graph(edges: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let n = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let labels = bfs_labels(n, edges, &vec![true; edges.len()]);
    let roots: BTreeSet<usize> = edges.iter().map(|&(u, _)| labels[u]).collect();
    let mut forms: Vec<Vec<(usize, usize)>> = roots
        .into_iter()
        .map(|r| {
            let comp_edges: Vec<(usize, usize)> = edges.iter().copied().filter(|&(u, _)| labels[u] == r).collect();
            let verts: Vec<usize> =
                comp_edges.iter().flat_map(|&(u, v)| [u, v]).collect::<BTreeSet<_>>().into_iter().collect();
            canonical_component(&verts, &comp_edges)
        })
        .collect();
    forms.sort();
    forms
}

/// Every simple graph with `1..=max_edges` edges and no isolated vertex, one
/// per isomorphism class, vertices labelled `0..n`. Each graph with `k + 1`
/// edges arises from one with `k` edges by adding an edge.
pub fn graphs_without_isolated_vertices(max_edges: usize) -> Vec<Vec<Vec<(usize, usize)>>> {
    let relabel = |forms: &Vec<Vec<(usize, usize)>>| -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for f in forms {
            let m = f.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap();
            out.extend(f.iter().map(|&(u, v)| (u + offset, v + offset)));
            offset += m;
        }
        out
    };
    let mut layers = vec![vec![vec![(0usize, 1usize)]]];
    while layers.len() < max_edges {
        let mut seen = BTreeSet::new();
        let mut next = Vec::new();
        for g in layers.last().unwrap() {
            let n = g.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap();
            // Both ends old, one new end, or two new ends.
            let candidates = (0..n)
                .flat_map(|u| (u + 1..=n).map(move |v| (u, v)))
                .chain(std::iter::once((n, n + 1)));
            for (u, v) in candidates {
                if g.contains(&(u, v)) {
                    continue;
                }
                let mut h = g.clone();
                h.push((u, v));
                let form = canonical_graph(&h);
                if seen.insert(form.clone()) {
                    next.push(relabel(&form));
                }
            }
        }
        layers.push(next);
    }
    layers
}

/// All connected simple graphs on exactly `n` labelled vertices.
pub fn connected_labelled_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    (0u32..1 << pairs.len())
        .map(|mask| pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect::<Vec<_>>())
        .filter(|edges| is_connected(n, edges))
        .collect()
}

/// Connected `n`-edge sets of `Z^3` meeting the origin, for `n = 1..=max`,
/// found by growing every set one adjacent edge at a time and deduplicating.
pub fn edge_set_counts_by_growth(max: usize) -> Vec<usize> {
    type Edge = (Point3, Point3);
    let steps: [Point3; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
    let edge = |a: Point3, b: Point3| -> Edge { if a < b { (a, b) } else { (b, a) } };
    let mut level: BTreeSet<Vec<Edge>> = steps.iter().map(|&s| vec![edge([0, 0, 0], s)]).collect();
    let mut counts = vec![level.len()];
    while counts.len() < max {
        let mut next = BTreeSet::new();
        for set in &level {
            let ends: BTreeSet<Point3> = set.iter().flat_map(|&(a, b)| [a, b]).collect();
            for &v in &ends {
                for s in steps {
                    let e = edge(v, [v[0] + s[0], v[1] + s[1], v[2] + s[2]]);
                    if !set.contains(&e) {
                        let mut grown = set.clone();
                        grown.push(e);
                        grown.sort_unstable();
                        next.insert(grown);
                    }
                }
            }
        }
        counts.push(next.len());
        level = next;
    }
    counts
}
