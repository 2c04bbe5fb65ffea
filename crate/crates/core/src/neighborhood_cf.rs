//! User-user and item-item neighborhood collaborative filtering.
//!
//! Similarities come from centered cosine over the training matrix (row
//! centering for the user axis, column centering for the item axis). The
//! aggregated values are raw ratings unless `restore_means` is set, in which
//! case neighbors contribute centered values and the target's own mean is
//! added back.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::dataset::{center_columns, center_rows, Axis, CenteredMatrix, RatingMatrix};
use crate::error::{Error, Result};
use crate::predictor::{clamp_rating, Prediction, Predictor};
use crate::similarity::{neighbors_by_index, Neighbor, NeighborList};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Plain mean over neighbors that rated the item.
    Simple,
    /// Similarity-weighted mean over positively similar neighbors.
    Weighted,
}

impl Weighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::Simple => "simple",
            Weighting::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfConfig {
    pub axis: Axis,
    pub k: usize,
    pub weighting: Weighting,
    pub restore_means: bool,
}

impl CfConfig {
    pub fn new(axis: Axis, k: usize, weighting: Weighting) -> Self {
        CfConfig {
            axis,
            k,
            weighting,
            restore_means: false,
        }
    }
}

pub struct CfModel {
    train: RatingMatrix,
    centered: CenteredMatrix,
    config: CfConfig,
    global_mean: f64,
    neighbors: Vec<OnceLock<Vec<(usize, f64)>>>,
}

impl CfModel {
    pub fn new(train: RatingMatrix, config: CfConfig) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::Config("neighborhood size k must be at least 1".into()));
        }
        let centered = match config.axis {
            Axis::User => center_rows(&train),
            Axis::Item => center_columns(&train),
        };
        let n = match config.axis {
            Axis::User => train.n_users(),
            Axis::Item => train.n_items(),
        };
        Ok(CfModel {
            global_mean: train.global_mean(),
            train,
            centered,
            config,
            neighbors: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn config(&self) -> &CfConfig {
        &self.config
    }

    pub fn train(&self) -> &RatingMatrix {
        &self.train
    }

    pub fn centered(&self) -> &CenteredMatrix {
        &self.centered
    }

    fn neighbors_of(&self, index: usize) -> &[(usize, f64)] {
        self.neighbors[index]
            .get_or_init(|| neighbors_by_index(&self.centered, index, self.config.k, self.config.axis))
    }

    /// Neighborhood of a user (user axis) or item (item axis).
    pub fn neighbor_list(&self, target: u64) -> Result<NeighborList> {
        let ids = match self.config.axis {
            Axis::User => self.train.users(),
            Axis::Item => self.train.items(),
        };
        let index = match self.config.axis {
            Axis::User => self.train.user_index(target)?,
            Axis::Item => self.train.item_index(target)?,
        };
        let neighbors = self
            .neighbors_of(index)
            .iter()
            .map(|&(idx, score)| Neighbor {
                id: ids.id(idx),
                index: idx,
                score,
            })
            .collect();
        Ok(NeighborList {
            target,
            axis: self.config.axis,
            neighbors,
        })
    }

    /// Neighbors that observed the cell being predicted, as
    /// `(similarity, raw rating, centered value)`.
    fn qualifying(&self, user: usize, item: usize) -> Vec<(f64, f64, f64)> {
        match self.config.axis {
            Axis::User => self
                .neighbors_of(user)
                .iter()
                .filter_map(|&(y, s)| {
                    self.train
                        .get(y, item)
                        .map(|r| (s, r, self.centered.get(y, item)))
                })
                .collect(),
            Axis::Item => self
                .neighbors_of(item)
                .iter()
                .filter_map(|&(j, s)| {
                    self.train
                        .get(user, j)
                        .map(|r| (s, r, self.centered.get(user, j)))
                })
                .collect(),
        }
    }

    fn own_mean(&self, user: usize, item: usize) -> Option<f64> {
        match self.config.axis {
            Axis::User => self.centered.means()[user],
            Axis::Item => self.centered.means()[item],
        }
    }

    fn indices(&self, user_id: u64, item_id: u64) -> Result<(usize, usize)> {
        Ok((
            self.train.user_index(user_id)?,
            self.train.item_index(item_id)?,
        ))
    }

    fn finish(
        &self,
        user_id: u64,
        item_id: u64,
        user: usize,
        item: usize,
        aggregate: Option<(f64, usize)>,
    ) -> Prediction {
        let own = self.own_mean(user, item);
        let (value, support) = match aggregate {
            Some((v, support)) if support > 0 => {
                let v = if self.config.restore_means {
                    own.unwrap_or(self.global_mean) + v
                } else {
                    v
                };
                (v, support)
            }
            _ => (own.unwrap_or(self.global_mean), 0),
        };
        Prediction {
            user_id,
            item_id,
            value: clamp_rating(value),
            support,
        }
    }

    fn pick(&self, raw: f64, centered: f64) -> f64 {
        if self.config.restore_means {
            centered
        } else {
            raw
        }
    }

    /// Unweighted mean over the neighbors that rated the cell.
    pub fn predict_simple(&self, user_id: u64, item_id: u64) -> Result<Prediction> {
        let (user, item) = self.indices(user_id, item_id)?;
        let q = self.qualifying(user, item);
        let aggregate = (!q.is_empty()).then(|| {
            let sum: f64 = q.iter().map(|&(_, r, c)| self.pick(r, c)).sum();
            (sum / q.len() as f64, q.len())
        });
        Ok(self.finish(user_id, item_id, user, item, aggregate))
    }

    /// `Σ s·r / Σ |s|` over neighbors with positive similarity that rated the cell.
    pub fn predict_weighted(&self, user_id: u64, item_id: u64) -> Result<Prediction> {
        let (user, item) = self.indices(user_id, item_id)?;
        let q: Vec<_> = self
            .qualifying(user, item)
            .into_iter()
            .filter(|&(s, _, _)| s > 0.0)
            .collect();
        let aggregate = (!q.is_empty()).then(|| {
            let num: f64 = q.iter().map(|&(s, r, c)| s * self.pick(r, c)).sum();
            let den: f64 = q.iter().map(|&(s, _, _)| s.abs()).sum();
            (num / den, q.len())
        });
        Ok(self.finish(user_id, item_id, user, item, aggregate))
    }

    pub fn recommend_top_n(&self, user_id: u64, n: usize) -> Result<Vec<Recommendation>> {
        recommend_top_n(self, &self.train, user_id, n)
    }
}

impl Predictor for CfModel {
    fn name(&self) -> String {
        format!("{}-cf", self.config.axis.as_str())
    }

    fn predict(&self, user_id: u64, item_id: u64) -> Result<Prediction> {
        match self.config.weighting {
            Weighting::Simple => self.predict_simple(user_id, item_id),
            Weighting::Weighted => self.predict_weighted(user_id, item_id),
        }
    }

    fn fallback(&self, user_id: u64, item_id: u64) -> f64 {
        let mean = match self.config.axis {
            Axis::User => self
                .train
                .users()
                .index(user_id)
                .and_then(|u| self.centered.means()[u]),
            Axis::Item => self
                .train
                .items()
                .index(item_id)
                .and_then(|i| self.centered.means()[i]),
        };
        mean.unwrap_or(self.global_mean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub item_id: u64,
    pub value: f64,
    pub support: usize,
}

/// The `n` highest-predicted items the user has not rated in `train`.
///
/// Items whose prediction had zero support rank below every supported item;
/// remaining ties go to the lower item id.
pub fn recommend_top_n<P: Predictor + ?Sized>(
    predictor: &P,
    train: &RatingMatrix,
    user_id: u64,
    n: usize,
) -> Result<Vec<Recommendation>> {
    if n == 0 {
        return Err(Error::Config("recommendation count must be at least 1".into()));
    }
    let user = train.user_index(user_id)?;
    let rated = train.user_row(user);
    let candidates: Vec<u64> = (0..train.n_items())
        .filter(|&i| rated.binary_search_by_key(&i, |&(j, _)| j).is_err())
        .map(|i| train.items().id(i))
        .collect();
    let mut scored: Vec<Recommendation> = candidates
        .par_iter()
        .map(|&item_id| match predictor.predict(user_id, item_id) {
            Ok(p) => Recommendation {
                item_id,
                value: p.value,
                support: p.support,
            },
            Err(_) => Recommendation {
                item_id,
                value: predictor.fallback(user_id, item_id),
                support: 0,
            },
        })
        .collect();
    scored.sort_by(|a, b| {
        (a.support == 0)
            .cmp(&(b.support == 0))
            .then(b.value.total_cmp(&a.value))
            .then(a.item_id.cmp(&b.item_id))
    });
    scored.truncate(n);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_ratings, RatingTriple};

    fn matrix(triples: &[(u64, u64, f64)]) -> RatingMatrix {
        RatingMatrix::from_triples(
            triples
                .iter()
                .map(|&(u, i, r)| RatingTriple::new(u, i, r))
                .collect(),
        )
        .unwrap()
    }

    // User 1 agrees with users 2 and 3 on items 1-3, user 4 disagrees; all but
    // user 1 have rated item 9.
    fn neighborhood() -> RatingMatrix {
        matrix(&[
            (1, 1, 5.0),
            (1, 2, 1.0),
            (1, 3, 3.0),
            (2, 1, 5.0),
            (2, 2, 1.0),
            (2, 3, 3.0),
            (2, 9, 4.0),
            (3, 1, 4.0),
            (3, 2, 2.0),
            (3, 3, 3.0),
            (3, 9, 5.0),
            (4, 1, 1.0),
            (4, 2, 5.0),
            (4, 9, 1.0),
        ])
    }

    #[test]
    fn simple_mean_of_rating_neighbors() {
        let m = CfModel::new(neighborhood(), CfConfig::new(Axis::User, 2, Weighting::Simple))
            .unwrap();
        let p = m.predict_simple(1, 9).unwrap();
        assert_eq!(p.support, 2);
        assert_eq!(p.value, 4.5);
    }

    #[test]
    fn single_neighbor_simple() {
        let m = CfModel::new(neighborhood(), CfConfig::new(Axis::User, 1, Weighting::Simple))
            .unwrap();
        // user 2 is the closest and rated item 9 with a 4
        assert_eq!(m.predict_simple(1, 9).unwrap().value, 4.0);
    }

    #[test]
    fn zero_support_falls_back_to_row_mean() {
        let m = matrix(&[(1, 1, 5.0), (1, 2, 1.0), (2, 1, 5.0), (2, 2, 1.0), (3, 3, 2.0)]);
        let model = CfModel::new(m, CfConfig::new(Axis::User, 5, Weighting::Simple)).unwrap();
        let p = model.predict_simple(1, 3).unwrap();
        assert_eq!((p.value, p.support), (3.0, 0));
        let model = CfModel::new(
            model.train().clone(),
            CfConfig::new(Axis::User, 5, Weighting::Weighted),
        )
        .unwrap();
        let p = model.predict_weighted(1, 3).unwrap();
        assert_eq!((p.value, p.support), (3.0, 0));
    }

    #[test]
    fn weighted_skips_negative_neighbors() {
        let m = CfModel::new(neighborhood(), CfConfig::new(Axis::User, 3, Weighting::Weighted))
            .unwrap();
        let list = m.neighbor_list(1).unwrap();
        assert_eq!(list.neighbors.len(), 3);
        assert!(list.neighbors[2].score < 0.0);
        let p = m.predict_weighted(1, 9).unwrap();
        assert_eq!(p.support, 2);
        let (s2, s3) = (list.neighbors[0].score, list.neighbors[1].score);
        let expected = (s2 * 4.0 + s3 * 5.0) / (s2 + s3);
        assert!((p.value - expected).abs() < 1e-12);
    }

    #[test]
    fn restore_means_adds_back_the_target_mean() {
        let mut cfg = CfConfig::new(Axis::User, 1, Weighting::Weighted);
        cfg.restore_means = true;
        let m = CfModel::new(neighborhood(), cfg).unwrap();
        // user 2: mean 13/4, centered rating of item 9 = 4 - 13/4; user 1 mean 3
        let p = m.predict(1, 9).unwrap();
        assert!((p.value - (3.0 + 4.0 - 13.0 / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn item_axis_uses_user_ratings_of_similar_items() {
        let m = CfModel::new(neighborhood(), CfConfig::new(Axis::Item, 2, Weighting::Weighted))
            .unwrap();
        let p = m.predict(1, 9).unwrap();
        assert!(p.support >= 1);
        assert!((1.0..=5.0).contains(&p.value));
        assert_eq!(m.name(), "item-cf");
    }

    #[test]
    fn unknown_ids() {
        let m = CfModel::new(neighborhood(), CfConfig::new(Axis::User, 2, Weighting::Simple))
            .unwrap();
        assert!(matches!(m.predict(77, 1), Err(Error::UnknownUser(77))));
        assert!(matches!(m.predict(1, 77), Err(Error::UnknownItem(77))));
        assert!(matches!(m.recommend_top_n(77, 3), Err(Error::UnknownUser(77))));
        assert!(CfModel::new(neighborhood(), CfConfig::new(Axis::User, 0, Weighting::Simple))
            .is_err());
    }

    struct Fixed(Vec<(u64, f64)>);

    impl Predictor for Fixed {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn predict(&self, user_id: u64, item_id: u64) -> Result<Prediction> {
            let value = self.0.iter().find(|(i, _)| *i == item_id).unwrap().1;
            Ok(Prediction {
                user_id,
                item_id,
                value,
                support: usize::from(value > 0.0),
            })
        }
        fn fallback(&self, _: u64, _: u64) -> f64 {
            3.0
        }
    }

    #[test]
    fn recommendation_order_and_truncation() {
        let train = matrix(&[(1, 1, 3.0), (2, 3, 3.0), (2, 7, 3.0), (2, 9, 3.0)]);
        let p = Fixed(vec![(9, 2.0), (7, 4.5), (3, 4.5)]);
        let recs = recommend_top_n(&p, &train, 1, 10).unwrap();
        let ids: Vec<u64> = recs.iter().map(|r| r.item_id).collect();
        assert_eq!(ids, vec![3, 7, 9]);
        assert_eq!(recommend_top_n(&p, &train, 1, 1).unwrap().len(), 1);
    }

    #[test]
    fn unsupported_items_rank_last() {
        let train = matrix(&[(1, 1, 3.0), (2, 2, 3.0), (2, 3, 3.0)]);
        let p = Fixed(vec![(2, 0.0), (3, 1.5)]);
        let recs = recommend_top_n(&p, &train, 1, 5).unwrap();
        assert_eq!(recs.iter().map(|r| r.item_id).collect::<Vec<_>>(), vec![3, 2]);
    }

    #[test]
    fn user_who_rated_everything_gets_nothing() {
        let train = load_ratings("userId,movieId,rating\n1,1,4\n1,2,3\n2,1,5\n".as_bytes()).unwrap();
        let m = CfModel::new(train, CfConfig::new(Axis::User, 3, Weighting::Weighted)).unwrap();
        assert!(m.recommend_top_n(1, 10).unwrap().is_empty());
        assert_eq!(m.recommend_top_n(2, 10).unwrap().len(), 1);
    }
}
