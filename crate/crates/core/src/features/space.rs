use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::NamedVec;
use crate::sparse::SparseVec;

/// Frozen bijection between feature names and dense ids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureSpace {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for FeatureSpace {
    fn from(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        FeatureSpace { names, index }
    }
}

impl From<FeatureSpace> for Vec<String> {
    fn from(s: FeatureSpace) -> Self {
        s.names
    }
}

impl FeatureSpace {
    /// Registers every name seen, numbered in lexicographic order.
    pub fn fit<'a>(vectors: impl IntoIterator<Item = &'a NamedVec>) -> Self {
        let names: BTreeSet<&str> = vectors.into_iter().flat_map(|v| v.names()).collect();
        FeatureSpace::from(names.into_iter().map(str::to_string).collect::<Vec<_>>())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    /// Namespace of a feature: `tfidf`, `kw`, `tag`, `gaz`, `ctx` or `dlc`.
    pub fn family(&self, id: u32) -> &str {
        let n = self.name(id);
        n.split_once(':').map_or(n, |(f, _)| f)
    }

    /// Maps names to ids; names outside the space are dropped.
    pub fn transform(&self, v: &NamedVec) -> SparseVec {
        SparseVec::from_pairs(
            v.iter()
                .filter_map(|(n, w)| self.id(n).map(|id| (id, w)))
                .collect(),
        )
    }
}
