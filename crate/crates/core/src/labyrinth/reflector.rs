use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed unit direction: `2 * axis` is `+e_axis`, `2 * axis + 1` is `-e_axis`.
pub type Dir = u8;

pub fn negate(u: Dir) -> Dir {
    u ^ 1
}

pub fn axis(u: Dir) -> usize {
    (u / 2) as usize
}

pub fn sign(u: Dir) -> i64 {
    if u.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

pub fn dir_name(u: Dir) -> String {
    let axis_name = ["x", "y", "z", "w"].get(axis(u)).copied().unwrap_or("?");
    format!("{}{}", if sign(u) > 0 { '+' } else { '-' }, axis_name)
}

/// `rho(-rho(u)) = -u` for every direction, with the table total.
pub fn validate_reflector(table: &[Dir]) -> bool {
    let n = table.len();
    if n == 0 || n % 2 == 1 || table.iter().any(|&t| t as usize >= n) {
        return false;
    }
    (0..n as Dir).all(|u| table[negate(table[u as usize]) as usize] == negate(u))
}

/// A named direction map. The identity is the crossing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reflector {
    pub name: String,
    pub table: Vec<Dir>,
}

impl Reflector {
    pub fn new(name: impl Into<String>, table: Vec<Dir>) -> Result<Self> {
        let name = name.into();
        if !validate_reflector(&table) {
            return Err(Error::InvalidReflector(format!("{name}: {table:?} does not retrace paths")));
        }
        Ok(Reflector { name, table })
    }

    pub fn apply(&self, u: Dir) -> Dir {
        self.table[u as usize]
    }

    pub fn dim(&self) -> usize {
        self.table.len() / 2
    }

    pub fn is_crossing(&self) -> bool {
        self.table.iter().enumerate().all(|(u, &t)| u == t as usize)
    }

    pub fn crossing(dim: usize) -> Self {
        Reflector { name: "cross".into(), table: (0..2 * dim as Dir).collect() }
    }

    /// Sends every direction back where it came from.
    pub fn reversal(dim: usize) -> Self {
        Reflector { name: "reverse".into(), table: (0..2 * dim as Dir).map(negate).collect() }
    }

    /// Mirror in the plane of axes `a < b`. The diagonal type swaps
    /// `+e_a` with `+e_b`; the anti-diagonal type swaps `+e_a` with `-e_b`.
    pub fn mirror(dim: usize, a: usize, b: usize, anti: bool) -> Self {
        let mut table: Vec<Dir> = (0..2 * dim as Dir).collect();
        let (pa, pb) = (2 * a as Dir, 2 * b as Dir);
        let partner = if anti { negate(pb) } else { pb };
        table[pa as usize] = partner;
        table[partner as usize] = pa;
        table[negate(pa) as usize] = negate(partner);
        table[negate(partner) as usize] = negate(pa);
        let axes = ["x", "y", "z", "w"];
        let name = format!("{}{}{}", if anti { "anti-" } else { "" }, axes[a], axes[b]);
        Reflector { name, table }
    }

    /// Rotation by a quarter turn in the plane of axes `a < b`. It fails
    /// the retrace condition and is kept only for testing.
    pub fn quarter_turn(dim: usize, a: usize, b: usize) -> Vec<Dir> {
        let mut table: Vec<Dir> = (0..2 * dim as Dir).collect();
        let (pa, pb) = (2 * a as Dir, 2 * b as Dir);
        table[pa as usize] = pb;
        table[pb as usize] = negate(pa);
        table[negate(pa) as usize] = negate(pb);
        table[negate(pb) as usize] = pa;
        table
    }
}

/// The crossing, the half-turn reversal and the two mirror types in every
/// coordinate plane. The crossing comes first.
pub fn reflector_catalog(dim: usize) -> Vec<Reflector> {
    let mut out = vec![Reflector::crossing(dim), Reflector::reversal(dim)];
    for a in 0..dim {
        for b in a + 1..dim {
            out.push(Reflector::mirror(dim, a, b, false));
            out.push(Reflector::mirror(dim, a, b, true));
        }
    }
    out
}

pub fn catalog_entry(dim: usize, name: &str) -> Result<Reflector> {
    reflector_catalog(dim)
        .into_iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::InvalidReflector(format!("no reflector named {name:?} in dimension {dim}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_valid() {
        for dim in 1..=3 {
            for r in reflector_catalog(dim) {
                assert!(validate_reflector(&r.table), "{} in dim {dim}", r.name);
            }
        }
        assert_eq!(reflector_catalog(2).len(), 4);
        assert_eq!(reflector_catalog(3).len(), 8);
    }

    #[test]
    fn diagonal_mirror_by_hand() {
        // e1 <-> e2 and -e1 <-> -e2.
        let m = Reflector::mirror(2, 0, 1, false);
        assert_eq!(m.table, vec![2, 3, 0, 1]);
        let anti = Reflector::mirror(2, 0, 1, true);
        assert_eq!(anti.table, vec![3, 2, 1, 0]);
    }

    #[test]
    fn invalid_tables() {
        assert!(!validate_reflector(&[0, 0, 2, 3]));
        assert!(!validate_reflector(&Reflector::quarter_turn(2, 0, 1)));
        assert!(!validate_reflector(&[0, 1, 5, 3]));
        assert!(validate_reflector(&[0, 1, 2, 3]));
    }
}
