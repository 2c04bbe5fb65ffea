//! Content-based prediction over binary item features.
//!
//! A user's profile holds, for every feature, the mean centered rating of the
//! user's rated items carrying that feature. Ratings themselves are predicted
//! by a similarity-weighted average of the user's ratings of the items whose
//! feature vectors are closest to the target.

use crate::dataset::{FeatureMatrix, RatingMatrix};
use crate::error::{Error, Result};
use crate::predictor::{clamp_rating, Prediction, Predictor};

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u64,
    pub vector: Vec<f64>,
}

/// Rated items of a user that have a feature row, with their centered ratings.
fn centered_rated_items<'f>(
    train: &RatingMatrix,
    features: &'f FeatureMatrix,
    user_id: u64,
) -> Result<Vec<(&'f [u8], f64)>> {
    let user = train.user_index(user_id)?;
    let row = train.user_row(user);
    if row.is_empty() {
        return Err(Error::Empty(format!("user {user_id} has no training ratings")));
    }
    let n = row.len() as f64;
    let sum: f64 = row.iter().map(|&(_, r)| r).sum();
    let usable: Vec<_> = row
        .iter()
        .filter_map(|&(i, r)| {
            features
                .vector(train.items().id(i))
                .map(|v| (v, (n * r - sum) / n))
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::Empty(format!(
            "user {user_id} has no rated items with features"
        )));
    }
    Ok(usable)
}

pub fn build_profile(
    train: &RatingMatrix,
    features: &FeatureMatrix,
    user_id: u64,
) -> Result<UserProfile> {
    let rated = centered_rated_items(train, features, user_id)?;
    let mut sums = vec![0.0; features.n_features()];
    let mut counts = vec![0usize; features.n_features()];
    for (vector, centered) in rated {
        for (f, &bit) in vector.iter().enumerate() {
            if bit == 1 {
                sums[f] += centered;
                counts[f] += 1;
            }
        }
    }
    let vector = sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    Ok(UserProfile { user_id, vector })
}

/// Cosine between a profile and an item's binary feature vector.
pub fn score_item(profile: &UserProfile, features: &FeatureMatrix, item_id: u64) -> Result<f64> {
    let item = features.vector(item_id).ok_or(Error::UnknownItem(item_id))?;
    if item.len() != profile.vector.len() {
        return Err(Error::Dimension {
            expected: item.len(),
            actual: profile.vector.len(),
        });
    }
    let dot: f64 = profile
        .vector
        .iter()
        .zip(item)
        .filter(|(_, &b)| b == 1)
        .map(|(p, _)| p)
        .sum();
    let profile_norm = profile.vector.iter().map(|p| p * p).sum::<f64>().sqrt();
    let item_norm = (item.iter().filter(|&&b| b == 1).count() as f64).sqrt();
    if profile_norm == 0.0 || item_norm == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (profile_norm * item_norm)).clamp(-1.0, 1.0))
}

/// Cosine between two binary feature vectors; 0 if either is empty.
pub fn feature_similarity(a: &[u8], b: &[u8]) -> f64 {
    let (mut common, mut na, mut nb) = (0u32, 0u32, 0u32);
    for (&x, &y) in a.iter().zip(b) {
        common += u32::from(x & y);
        na += u32::from(x);
        nb += u32::from(y);
    }
    if na == 0 || nb == 0 {
        0.0
    } else {
        (f64::from(common) / (f64::from(na) * f64::from(nb)).sqrt()).min(1.0)
    }
}

/// Weighted average of the user's ratings of the `k` rated items most similar
/// to `item_id` in feature space, restricted to positive similarities.
pub fn predict_content(
    train: &RatingMatrix,
    features: &FeatureMatrix,
    user_id: u64,
    item_id: u64,
    k: usize,
) -> Result<Prediction> {
    if k == 0 {
        return Err(Error::Config("neighborhood size k must be at least 1".into()));
    }
    let target = features
        .vector(item_id)
        .ok_or(Error::MissingFeatures(item_id))?;
    let user = train.user_index(user_id)?;
    let row = train.user_row(user);
    if row.is_empty() {
        return Err(Error::Empty(format!("user {user_id} has no training ratings")));
    }
    let mut scored: Vec<(u64, f64, f64)> = row
        .iter()
        .filter_map(|&(i, r)| {
            let id = train.items().id(i);
            features
                .vector(id)
                .map(|v| (id, feature_similarity(v, target), r))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored.retain(|&(_, s, _)| s > 0.0);

    let (value, support) = if scored.is_empty() {
        (row.iter().map(|&(_, r)| r).sum::<f64>() / row.len() as f64, 0)
    } else {
        let num: f64 = scored.iter().map(|&(_, s, r)| s * r).sum();
        let den: f64 = scored.iter().map(|&(_, s, _)| s).sum();
        (num / den, scored.len())
    };
    Ok(Prediction {
        user_id,
        item_id,
        value: clamp_rating(value),
        support,
    })
}

/// [`predict_content`] bundled with its data as a [`Predictor`].
pub struct ContentModel {
    train: RatingMatrix,
    features: FeatureMatrix,
    k: usize,
    global_mean: f64,
}

impl ContentModel {
    pub fn new(train: RatingMatrix, features: FeatureMatrix, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("neighborhood size k must be at least 1".into()));
        }
        Ok(ContentModel {
            global_mean: train.global_mean(),
            train,
            features,
            k,
        })
    }

    pub fn train(&self) -> &RatingMatrix {
        &self.train
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn profile(&self, user_id: u64) -> Result<UserProfile> {
        build_profile(&self.train, &self.features, user_id)
    }
}

impl Predictor for ContentModel {
    fn name(&self) -> String {
        "content".into()
    }

    fn predict(&self, user_id: u64, item_id: u64) -> Result<Prediction> {
        predict_content(&self.train, &self.features, user_id, item_id, self.k)
    }

    fn fallback(&self, user_id: u64, _item_id: u64) -> f64 {
        self.train
            .users()
            .index(user_id)
            .and_then(|u| self.train.user_mean(u))
            .unwrap_or(self.global_mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_features, RatingTriple};

    fn two_actor_movies() -> FeatureMatrix {
        load_features("movieId,ActorID-A,ActorID-B\n1,1,0\n2,1,0\n3,0,1\n4,0,1\n5,0,1\n".as_bytes())
            .unwrap()
    }

    fn ratings(user_ratings: &[(u64, f64)]) -> RatingMatrix {
        let mut triples: Vec<_> = user_ratings
            .iter()
            .map(|&(i, r)| RatingTriple::new(1, i, r))
            .collect();
        // a second user so every item id is known to the matrix
        triples.extend((1..=5).map(|i| RatingTriple::new(2, i, 3.0)));
        RatingMatrix::from_triples(triples).unwrap()
    }

    #[test]
    fn profile_from_centered_ratings() {
        let p = build_profile(&ratings(&[(1, 5.0), (3, 1.0)]), &two_actor_movies(), 1).unwrap();
        assert_eq!(p.vector, vec![2.0, -2.0]);
    }

    #[test]
    fn single_rating_and_constant_rater_profiles_are_zero() {
        let f = two_actor_movies();
        assert_eq!(build_profile(&ratings(&[(1, 4.0)]), &f, 1).unwrap().vector, vec![0.0, 0.0]);
        let p = build_profile(&ratings(&[(3, 5.0), (4, 5.0), (5, 5.0)]), &f, 1).unwrap();
        assert_eq!(p.vector, vec![0.0, 0.0]);
    }

    #[test]
    fn profile_errors() {
        let f = load_features("movieId,Drama\n9,1\n".as_bytes()).unwrap();
        assert!(matches!(
            build_profile(&ratings(&[(1, 4.0)]), &f, 1),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            build_profile(&ratings(&[(1, 4.0)]), &f, 42),
            Err(Error::UnknownUser(42))
        ));
    }

    #[test]
    fn item_scores() {
        let f = two_actor_movies();
        let p = UserProfile {
            user_id: 1,
            vector: vec![2.0, -2.0],
        };
        let half_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((score_item(&p, &f, 1).unwrap() - half_sqrt2).abs() < 1e-12);
        assert!((score_item(&p, &f, 3).unwrap() + half_sqrt2).abs() < 1e-12);
        let zero = UserProfile {
            user_id: 1,
            vector: vec![0.0, 0.0],
        };
        assert_eq!(score_item(&zero, &f, 2).unwrap(), 0.0);
        assert!(matches!(score_item(&p, &f, 99), Err(Error::UnknownItem(99))));
    }

    #[test]
    fn predictions() {
        let f = two_actor_movies();
        let p = predict_content(&ratings(&[(1, 5.0), (3, 2.0)]), &f, 1, 2, 10).unwrap();
        assert_eq!((p.value, p.support), (5.0, 1));

        let p = predict_content(&ratings(&[(1, 4.0)]), &f, 1, 2, 10).unwrap();
        assert_eq!(p.value, 4.0);

        // only actor-B movies rated, target is actor-A: fall back to the row mean
        let p = predict_content(&ratings(&[(3, 2.0), (4, 5.0)]), &f, 1, 1, 10).unwrap();
        assert_eq!((p.value, p.support), (3.5, 0));
    }

    #[test]
    fn missing_feature_row() {
        let train = RatingMatrix::from_triples(vec![
            RatingTriple::new(1, 1, 4.0),
            RatingTriple::new(1, 77, 4.0),
        ])
        .unwrap();
        assert!(matches!(
            predict_content(&train, &two_actor_movies(), 1, 77, 5),
            Err(Error::MissingFeatures(77))
        ));
    }

    #[test]
    fn self_similarity() {
        assert_eq!(feature_similarity(&[1, 0, 1], &[1, 0, 1]), 1.0);
        assert_eq!(feature_similarity(&[0, 0], &[1, 0]), 0.0);
    }
}
