//! Counting connected edge sets of `Z^3` that touch the origin.
//!
//! Redelmeier's enumeration on the line graph of `Z^3`, with a virtual
//! root adjacent to the six edges at the origin. A connected set of `n + 1`
//! nodes containing the root is exactly a connected `n`-edge set with an
//! edge at the origin, because the origin edges are pairwise adjacent.

use std::collections::HashSet;

use rayon::prelude::*;

use super::Point3;
use crate::error::{Error, Result};

/// Largest `n` accepted by [`count_connected_edge_sets`].
pub const MAX_ANIMAL_EDGES: usize = 7;

/// Edge from `base` to `base + e_axis`.
type Edge = (Point3, u8);

fn shifted(p: Point3, axis: u8, by: i64) -> Point3 {
    let mut q = p;
    q[axis as usize] += by;
    q
}

fn origin_edges() -> Vec<Edge> {
    (0..3u8).flat_map(|a| [([0, 0, 0], a), (shifted([0, 0, 0], a, -1), a)]).collect()
}

fn neighbours((base, axis): Edge) -> impl Iterator<Item = Edge> {
    let ends = [base, shifted(base, axis, 1)];
    ends.into_iter()
        .flat_map(|w| (0..3u8).flat_map(move |b| [(w, b), (shifted(w, b, -1), b)]))
        .filter(move |&e| e != (base, axis))
}

struct Redelmeier {
    target: usize,
    seen: HashSet<Edge>,
}

impl Redelmeier {
    /// Counts extensions of a current set of `size` edges by members of
    /// `untried`, each extension exactly once.
    fn count(&mut self, mut untried: Vec<Edge>, size: usize) -> u64 {
        let mut total = 0;
        while let Some(x) = untried.pop() {
            if size + 1 == self.target {
                total += 1;
                continue;
            }
            let mut next = untried.clone();
            let mut added = Vec::new();
            for y in neighbours(x) {
                if self.seen.insert(y) {
                    added.push(y);
                    next.push(y);
                }
            }
            total += self.count(next, size + 1);
            for y in added {
                self.seen.remove(&y);
            }
        }
        total
    }
}

/// Number of connected `n`-edge subsets of the `Z^3` edge set containing
/// at least one edge incident to the origin.
pub fn count_connected_edge_sets(n: usize) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidParameter("edge-set size must be positive".into()));
    }
    if n > MAX_ANIMAL_EDGES {
        return Err(Error::Unsupported(format!(
            "exhaustive enumeration of {n}-edge sets is too large; the limit is {MAX_ANIMAL_EDGES}"
        )));
    }
    let first = origin_edges();
    // Branch i takes origin edge i and excludes origin edges after it, as
    // the sequential loop over the root's untried list would.
    Ok((0..first.len())
        .into_par_iter()
        .map(|i| {
            let mut run = Redelmeier { target: n, seen: first.iter().copied().collect() };
            if n == 1 {
                return 1;
            }
            let mut untried = first[..i].to_vec();
            for y in neighbours(first[i]) {
                if run.seen.insert(y) {
                    untried.push(y);
                }
            }
            run.count(untried, 1)
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn key(e: Edge) -> [i64; 4] {
        [e.0[0], e.0[1], e.0[2], e.1 as i64]
    }

    /// Grows every connected set by one adjacent edge and deduplicates.
    fn closure_counts(max: usize) -> Vec<u64> {
        let mut layer: BTreeSet<Vec<[i64; 4]>> = origin_edges().into_iter().map(|e| vec![key(e)]).collect();
        let mut counts = vec![layer.len() as u64];
        for _ in 1..max {
            let mut next = BTreeSet::new();
            for set in &layer {
                for k in set {
                    let e = ([k[0], k[1], k[2]], k[3] as u8);
                    for y in neighbours(e) {
                        let ky = key(y);
                        if !set.contains(&ky) {
                            let mut grown = set.clone();
                            grown.push(ky);
                            grown.sort_unstable();
                            next.insert(grown);
                        }
                    }
                }
            }
            counts.push(next.len() as u64);
            layer = next;
        }
        counts
    }

    #[test]
    fn neighbour_count() {
        assert_eq!(neighbours(([0, 0, 0], 0)).count(), 10);
    }

    #[test]
    fn matches_closure_oracle() {
        let oracle = closure_counts(4);
        let fast: Vec<u64> = (1..=4).map(|n| count_connected_edge_sets(n).unwrap()).collect();
        assert_eq!(fast, oracle);
        assert_eq!(fast[0], 6);
    }

    #[test]
    fn refuses_large_n() {
        assert!(count_connected_edge_sets(MAX_ANIMAL_EDGES + 1).is_err());
        assert!(count_connected_edge_sets(0).is_err());
    }
}
