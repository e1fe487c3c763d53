//! Index-set newtypes over vertices and edges.

use serde::{Deserialize, Serialize};

macro_rules! index_set {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
        pub struct $name {
            members: Vec<bool>,
        }

        impl $name {
            pub fn empty(universe: usize) -> Self {
                Self { members: vec![false; universe] }
            }

            pub fn full(universe: usize) -> Self {
                Self { members: vec![true; universe] }
            }

            /// Panics if an index is outside `0..universe`.
            pub fn from_indices<I: IntoIterator<Item = usize>>(universe: usize, indices: I) -> Self {
                let mut set = Self::empty(universe);
                for i in indices {
                    set.insert(i);
                }
                set
            }

            pub fn from_mask(members: Vec<bool>) -> Self {
                Self { members }
            }

            pub fn universe(&self) -> usize {
                self.members.len()
            }

            pub fn contains(&self, i: usize) -> bool {
                self.members.get(i).copied().unwrap_or(false)
            }

            pub fn insert(&mut self, i: usize) {
                self.members[i] = true;
            }

            pub fn remove(&mut self, i: usize) {
                self.members[i] = false;
            }

            pub fn len(&self) -> usize {
                self.members.iter().filter(|&&b| b).count()
            }

            pub fn is_empty(&self) -> bool {
                !self.members.iter().any(|&b| b)
            }

            pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
                self.members.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
            }

            pub fn as_mask(&self) -> &[bool] {
                &self.members
            }
        }
    };
}

index_set!(
    /// Subset of a graph's vertex indices.
    VertexSet
);
index_set!(
    /// Subset of a graph's edge indices.
    EdgeSet
);
