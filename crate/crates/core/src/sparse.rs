use serde::{Deserialize, Serialize};

/// Sparse real vector: ascending feature ids, no stored zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseVec {
    entries: Vec<(u32, f64)>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from unordered pairs; duplicate ids are summed and zeros dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (id, w) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == id => last.1 += w,
                _ => entries.push((id, w)),
            }
        }
        entries.retain(|e| e.1 != 0.0);
        SparseVec { entries }
    }

    /// Dense slice to sparse, skipping zeros.
    pub fn from_dense(values: &[f64]) -> Self {
        SparseVec {
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> f64 {
        self.entries
            .binary_search_by_key(&id, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Dot product with a dense weight vector; ids past its end count as zero.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|&(id, v)| dense.get(id as usize).map(|w| w * v))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn max_id(&self) -> Option<u32> {
        self.entries.last().map(|e| e.0)
    }

    pub fn scaled(&self, factor: f64) -> SparseVec {
        if factor == 0.0 {
            return SparseVec::new();
        }
        SparseVec {
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &SparseVec, factor: f64) -> SparseVec {
        if factor == 0.0 || other.is_empty() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(ia, va)), Some(&&(ib, vb))) => {
                    if ia < ib {
                        out.push((ia, va));
                        a.next();
                    } else if ib < ia {
                        out.push((ib, factor * vb));
                        b.next();
                    } else {
                        out.push((ia, va + factor * vb));
                        a.next();
                        b.next();
                    }
                }
                (Some(&&e), None) => {
                    out.push(e);
                    a.next();
                }
                (None, Some(&&(ib, vb))) => {
                    out.push((ib, factor * vb));
                    b.next();
                }
                (None, None) => break,
            }
        }
        out.retain(|e| e.1 != 0.0);
        SparseVec { entries: out }
    }
}
