//! Centered-cosine (Pearson) similarity and K-nearest-neighbor lists.
//!
//! Vectors are rows or columns of a [`CenteredMatrix`], with unobserved cells
//! read as zero. Dot products therefore only need the co-observed indexes,
//! and they are always accumulated in ascending index order so the pairwise
//! kernel and the neighborhood search produce bit-identical scores.

use crate::dataset::{Axis, CenteredMatrix};
use crate::error::{Error, Result};

/// Norms at or below this are treated as zero (constant raters).
pub const ZERO_NORM: f64 = 1e-12;

/// Sparse real vector with indexes ascending and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_unstable_by_key(|&(i, _)| i);
        if let Some(&(i, _)) = entries.iter().find(|&&(i, _)| i >= dim) {
            return Err(Error::Dimension {
                expected: dim,
                actual: i + 1,
            });
        }
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Config("repeated index in sparse vector".into()));
        }
        Ok(SparseVector { dim, entries })
    }

    /// Keeps every cell of a dense slice, zeros included.
    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            dim: values.len(),
            entries: values.iter().copied().enumerate().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SparseVector {
            dim: self.dim,
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }
}

pub(crate) fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

pub(crate) fn sparse_norm(a: &[(usize, f64)]) -> f64 {
    a.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn cosine_from_parts(dot: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a <= ZERO_NORM || norm_b <= ZERO_NORM {
        0.0
    } else {
        (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
    }
}

/// Cosine of two centered vectors; 0 when either has zero norm.
pub fn centered_cosine(a: &SparseVector, b: &SparseVector) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Dimension {
            expected: a.dim,
            actual: b.dim,
        });
    }
    let dot = sparse_dot(&a.entries, &b.entries);
    Ok(cosine_from_parts(
        dot,
        sparse_norm(&a.entries),
        sparse_norm(&b.entries),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u64,
    pub index: usize,
    pub score: f64,
}

/// Most similar users (or items) to a target, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub target: u64,
    pub axis: Axis,
    pub neighbors: Vec<Neighbor>,
}

/// Row (axis user) or column (axis item) of `c` as a sparse vector.
pub fn vector(c: &CenteredMatrix, axis: Axis, index: usize) -> SparseVector {
    let dim = match axis {
        Axis::User => c.n_items(),
        Axis::Item => c.n_users(),
    };
    SparseVector {
        dim,
        entries: c.lines(axis)[index].clone(),
    }
}

/// The `k` candidates most similar to `target` along `axis`.
///
/// Candidates with zero norm are skipped, as is everything when the target
/// itself has zero norm. Ordering is score descending, then id ascending.
pub fn top_k_neighbors(
    c: &CenteredMatrix,
    target: u64,
    k: usize,
    axis: Axis,
) -> Result<NeighborList> {
    let index = c.ids(axis).index(target).ok_or(match axis {
        Axis::User => Error::UnknownUser(target),
        Axis::Item => Error::UnknownItem(target),
    })?;
    if k == 0 {
        return Err(Error::Config("neighborhood size k must be at least 1".into()));
    }
    let ids = c.ids(axis);
    let neighbors = neighbors_by_index(c, index, k, axis)
        .into_iter()
        .map(|(idx, score)| Neighbor {
            id: ids.id(idx),
            index: idx,
            score,
        })
        .collect();
    Ok(NeighborList {
        target,
        axis,
        neighbors,
    })
}

/// Index-level neighborhood search shared with the CF models.
pub(crate) fn neighbors_by_index(
    c: &CenteredMatrix,
    target: usize,
    k: usize,
    axis: Axis,
) -> Vec<(usize, f64)> {
    let lines = c.lines(axis);
    let cross = c.cross_lines(axis);
    let norms = c.norms(axis);
    let target_norm = norms[target];
    if target_norm <= ZERO_NORM {
        return Vec::new();
    }

    // Accumulate co-observed products in ascending cross-index order, which is
    // the same order sparse_dot uses.
    let mut dots = vec![0.0; lines.len()];
    for &(j, tv) in &lines[target] {
        for &(other, ov) in &cross[j] {
            dots[other] += tv * ov;
        }
    }

    let mut scored: Vec<(usize, f64)> = (0..lines.len())
        .filter(|&o| o != target && norms[o] > ZERO_NORM)
        .map(|o| (o, cosine_from_parts(dots[o], target_norm, norms[o])))
        .collect();
    let by_rank = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, by_rank);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_rank);
    scored
}
