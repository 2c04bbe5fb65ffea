//! Dense brute-force reference implementations used as test oracles.
//!
//! Everything here works on a full `rows × cols` grid of `Option<f64>` and
//! recomputes every quantity from scratch, with no shared code paths into the
//! library beyond building the `RatingMatrix` under test.
#![allow(dead_code)]

use std::sync::Arc;

use movierec::dataset::{IdMap, RatingMatrix, RatingTriple};

pub type Dense = Vec<Vec<Option<f64>>>;

/// Matrix with user ids `1..=rows` and item ids `1..=cols`, including users
/// and items that have no ratings.
pub fn to_matrix(d: &Dense) -> RatingMatrix {
    let rows = d.len();
    let cols = d.first().map_or(0, Vec::len);
    let mut triples = Vec::new();
    for (u, row) in d.iter().enumerate() {
        for (i, r) in row.iter().enumerate() {
            if let Some(r) = r {
                triples.push(RatingTriple::new(u as u64 + 1, i as u64 + 1, *r));
            }
        }
    }
    RatingMatrix::with_ids(
        Arc::new(IdMap::from_ids(1..=rows as u64)),
        Arc::new(IdMap::from_ids(1..=cols as u64)),
        triples,
    )
    .unwrap()
}

pub fn transpose(d: &Dense) -> Dense {
    let cols = d.first().map_or(0, Vec::len);
    (0..cols).map(|i| d.iter().map(|row| row[i]).collect()).collect()
}

pub fn row_mean(row: &[Option<f64>]) -> Option<f64> {
    let seen: Vec<f64> = row.iter().flatten().copied().collect();
    (!seen.is_empty()).then(|| seen.iter().sum::<f64>() / seen.len() as f64)
}

pub fn global_mean(d: &Dense) -> f64 {
    let seen: Vec<f64> = d.iter().flatten().flatten().copied().collect();
    if seen.is_empty() {
        3.0
    } else {
        seen.iter().sum::<f64>() / seen.len() as f64
    }
}

/// Row-centered grid with missing cells as 0. The centered value is written
/// as `(n r - sum) / n` so mathematically tied similarities stay bit-tied.
pub fn center(d: &Dense) -> Vec<Vec<f64>> {
    d.iter()
        .map(|row| {
            let seen: Vec<f64> = row.iter().flatten().copied().collect();
            let n = seen.len() as f64;
            let sum: f64 = seen.iter().sum();
            row.iter()
                .map(|r| r.map_or(0.0, |r| (n * r - sum) / n))
                .collect()
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na <= 1e-12 || nb <= 1e-12 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Every other row with nonzero centered norm, scored and fully sorted by
/// score descending then index ascending, cut to `k`.
pub fn top_k(d: &Dense, target: usize, k: usize) -> Vec<(usize, f64)> {
    let c = center(d);
    if norm(&c[target]) <= 1e-12 {
        return Vec::new();
    }
    let mut all: Vec<(usize, f64)> = (0..c.len())
        .filter(|&v| v != target && norm(&c[v]) > 1e-12)
        .map(|v| (v, cosine(&c[target], &c[v])))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// User-based prediction for row `u`, column `i`.
pub fn predict(
    d: &Dense,
    u: usize,
    i: usize,
    k: usize,
    weighted: bool,
    restore_means: bool,
) -> (f64, usize) {
    let c = center(d);
    let own = row_mean(&d[u]);
    let mut used = Vec::new();
    for (v, s) in top_k(d, u, k) {
        if let Some(r) = d[v][i] {
            if !weighted || s > 0.0 {
                let value = if restore_means { c[v][i] } else { r };
                used.push((s, value));
            }
        }
    }
    if used.is_empty() {
        let v = own.unwrap_or_else(|| global_mean(d));
        return (v.clamp(1.0, 5.0), 0);
    }
    let mut value = if weighted {
        let num: f64 = used.iter().map(|(s, r)| s * r).sum();
        let den: f64 = used.iter().map(|(s, _)| s.abs()).sum();
        num / den
    } else {
        used.iter().map(|(_, r)| r).sum::<f64>() / used.len() as f64
    };
    if restore_means {
        value += own.unwrap_or_else(|| global_mean(d));
    }
    (value.clamp(1.0, 5.0), used.len())
}

/// Checks a ranked neighbor list against the oracle's full scoring.
///
/// Scores must agree position by position within `tol`. Ids may differ only
/// where the oracle itself scores the swapped candidates within `tol`.
pub fn same_ranking(actual: &[(usize, f64)], expected: &[(usize, f64)], all: &[f64], tol: f64) -> Result<(), String> {
    if actual.len() != expected.len() {
        return Err(format!("length {} vs {}", actual.len(), expected.len()));
    }
    for (p, (a, e)) in actual.iter().zip(expected).enumerate() {
        if (a.1 - e.1).abs() > tol {
            return Err(format!("position {p}: score {} vs {}", a.1, e.1));
        }
        if a.0 != e.0 && (all[a.0] - e.1).abs() > tol {
            return Err(format!("position {p}: id {} vs {}", a.0, e.0));
        }
    }
    let mut ids: Vec<usize> = actual.iter().map(|a| a.0).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != actual.len() {
        return Err("repeated neighbor".into());
    }
    Ok(())
}

/// Oracle similarity of `target` to every row (0 for itself).
pub fn all_scores(d: &Dense, target: usize) -> Vec<f64> {
    let c = center(d);
    (0..c.len())
        .map(|v| if v == target { 0.0 } else { cosine(&c[target], &c[v]) })
        .collect()
}

/// Relative error between two gradient vectors.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let up = f(&probe);
            probe[j] = x[j] - h;
            let down = f(&probe);
            probe[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect()
}
