//! The (2,3) pebble game for planar generic rigidity.
//!
//! Every vertex starts with two pebbles. An edge is independent when four
//! pebbles can be gathered on its endpoints; it is then oriented away from
//! the endpoint that pays one pebble. Pebbles move by reversing directed
//! paths. At every moment `pebbles + accepted edges = 2n`.

/// Pebble counts and the orientation of accepted edges.
#[derive(Debug, Clone)]
pub struct PebbleGame {
    pebbles: Vec<u8>,
    out: Vec<Vec<usize>>,
    accepted: usize,
    rejected: usize,
    stamp: Vec<u32>,
    generation: u32,
    parent: Vec<usize>,
    stack: Vec<usize>,
}

impl PebbleGame {
    pub fn new(n: usize) -> Self {
        PebbleGame {
            pebbles: vec![2; n],
            out: vec![Vec::new(); n],
            accepted: 0,
            rejected: 0,
            stamp: vec![0; n],
            generation: 0,
            parent: vec![usize::MAX; n],
            stack: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.pebbles.len()
    }

    pub fn pebbles(&self, v: usize) -> u8 {
        self.pebbles[v]
    }

    pub fn total_pebbles(&self) -> usize {
        self.pebbles.iter().map(|&p| p as usize).sum()
    }

    /// Number of independent edges so far.
    pub fn accepted(&self) -> usize {
        self.accepted
    }

    /// Number of redundant edges so far.
    pub fn rejected(&self) -> usize {
        self.rejected
    }

    /// Directed copies of the accepted edges.
    pub fn orientation(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out.iter().enumerate().flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }

    fn next_generation(&mut self) -> u32 {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        self.generation
    }

    /// Depth-first search along out-edges from `start` for a vertex holding
    /// a pebble. Vertices in `blocked`, and any already stamped with the
    /// current generation, are skipped. Returns the vertex found.
    fn search(&mut self, start: usize, blocked: &[usize], fresh: bool) -> Option<usize> {
        let g = if fresh { self.next_generation() } else { self.generation };
        for &b in blocked {
            self.stamp[b] = g;
        }
        if self.stamp[start] == g {
            return None;
        }
        self.stamp[start] = g;
        self.parent[start] = usize::MAX;
        self.stack.clear();
        self.stack.push(start);
        while let Some(v) = self.stack.pop() {
            if self.pebbles[v] > 0 && v != start {
                return Some(v);
            }
            for i in 0..self.out[v].len() {
                let w = self.out[v][i];
                if self.stamp[w] != g {
                    self.stamp[w] = g;
                    self.parent[w] = v;
                    self.stack.push(w);
                }
            }
        }
        None
    }

    /// Moves one pebble to `start` from a reachable vertex, reversing the
    /// path. Fails if no pebble is reachable without passing `blocked`.
    fn draw_pebble(&mut self, start: usize, blocked: &[usize]) -> bool {
        let Some(found) = self.search(start, blocked, true) else {
            return false;
        };
        let mut w = found;
        while w != start {
            let v = self.parent[w];
            let pos = self.out[v].iter().position(|&x| x == w).expect("tree edge exists");
            self.out[v].swap_remove(pos);
            self.out[w].push(v);
            w = v;
        }
        self.pebbles[found] -= 1;
        self.pebbles[start] += 1;
        true
    }

    /// Collects pebbles on `u` and `v`, up to two each, and returns the total.
    fn gather(&mut self, u: usize, v: usize) -> u8 {
        while self.pebbles[u] < 2 && self.draw_pebble(u, &[v]) {}
        while self.pebbles[v] < 2 && self.draw_pebble(v, &[u]) {}
        self.pebbles[u] + self.pebbles[v]
    }

    /// Tests edge `uv` and accepts it if independent.
    pub fn add_edge(&mut self, u: usize, v: usize) -> bool {
        assert_ne!(u, v, "self-loop");
        if self.gather(u, v) == 4 {
            self.pebbles[u] -= 1;
            self.out[u].push(v);
            self.accepted += 1;
            true
        } else {
            self.rejected += 1;
            false
        }
    }

    /// Pins three pebbles on an edge `uv` that has already been played.
    pub(crate) fn pin(&mut self, u: usize, v: usize) -> u8 {
        self.gather(u, v)
    }

    /// With pebbles pinned on `u`, `v`: does `w` reach a free pebble? The
    /// search skips `u`, `v` and everything stamped by `known` (vertices
    /// already shown to be rigid with `uv`). On failure, every vertex the
    /// search visited is rigid with `uv` and is appended to `rigid`.
    pub(crate) fn rigid_with(
        &mut self,
        w: usize,
        u: usize,
        v: usize,
        known: &[bool],
        rigid: &mut Vec<usize>,
    ) -> bool {
        let g = self.next_generation();
        self.stamp[u] = g;
        self.stamp[v] = g;
        if self.pebbles[w] > 0 {
            return false;
        }
        self.stamp[w] = g;
        let mut visited = vec![w];
        self.stack.clear();
        self.stack.push(w);
        while let Some(x) = self.stack.pop() {
            for i in 0..self.out[x].len() {
                let y = self.out[x][i];
                if self.stamp[y] == g || known[y] {
                    continue;
                }
                if self.pebbles[y] > 0 {
                    return false;
                }
                self.stamp[y] = g;
                visited.push(y);
                self.stack.push(y);
            }
        }
        rigid.extend(visited);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn play(n: usize, edges: &[(usize, usize)]) -> PebbleGame {
        let mut g = PebbleGame::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
            assert_eq!(g.total_pebbles() + g.accepted(), 2 * n);
            assert!((0..n).all(|x| g.pebbles(x) <= 2));
        }
        g
    }

    #[test]
    fn triangle_is_independent() {
        let g = play(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(g.accepted(), 3);
        assert_eq!(g.rejected(), 0);
    }

    #[test]
    fn k4_has_one_redundant_edge() {
        let g = play(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert_eq!(g.accepted(), 5);
        assert_eq!(g.rejected(), 1);
    }

    #[test]
    fn orientation_covers_accepted_edges() {
        let g = play(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(g.orientation().count(), 4);
    }
}
