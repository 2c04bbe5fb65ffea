use std::collections::HashMap;
use std::sync::Arc;

use crate::dataset::{FeatureKind, FeatureMatrix, IdMap, ItemCatalog, RatingMatrix};
use crate::error::{Error, Result};

use super::Mode;

/// One labelled network input.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedExample {
    pub user_id: u64,
    pub item_id: u64,
    pub input: Vec<f64>,
    /// Rating class 1 to 5.
    pub label: u8,
}

/// Numeric input columns derived from a rating's user and item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputField {
    UserId,
    ReleaseYear,
    Genres,
    Country,
    LeadActor,
    Director,
}

impl InputField {
    /// User ordinal (global mode only), release year, and ordinal codes for
    /// genre combination, country, lead actor and director.
    pub fn defaults(mode: Mode) -> Vec<InputField> {
        let mut fields = Vec::new();
        if mode == Mode::Global {
            fields.push(InputField::UserId);
        }
        fields.extend([
            InputField::ReleaseYear,
            InputField::Genres,
            InputField::Country,
            InputField::LeadActor,
            InputField::Director,
        ]);
        fields
    }
}

/// Ordinal codes in order of first appearance, starting at 1.
#[derive(Debug, Clone, Default)]
struct Codebook(HashMap<String, f64>);

impl Codebook {
    fn code(&mut self, key: String) -> f64 {
        let next = self.0.len() as f64 + 1.0;
        *self.0.entry(key).or_insert(next)
    }
}

/// Encoded attributes of one item.
#[derive(Debug, Clone)]
struct ItemAttributes {
    year: f64,
    genres: f64,
    country: f64,
    actor: f64,
    director: f64,
}

/// Turns (user, item) pairs into numeric vectors.
///
/// Categorical attributes get integer codes by first appearance while
/// scanning items in ascending id order. Genre combinations come from the
/// catalog when it lists the item, otherwise from the genre feature columns.
/// Country, lead actor and director are the first set column of their kind.
/// A missing release year encodes as 0.
#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    fields: Vec<InputField>,
    users: Arc<IdMap>,
    items: HashMap<u64, ItemAttributes>,
}

impl FeatureEncoder {
    pub fn fit(
        features: &FeatureMatrix,
        catalog: Option<&ItemCatalog>,
        users: &Arc<IdMap>,
        fields: &[InputField],
    ) -> Self {
        let mut genres = Codebook::default();
        let mut countries = Codebook::default();
        let mut actors = Codebook::default();
        let mut directors = Codebook::default();
        let first_of = |vector: &[u8], kind: FeatureKind| -> String {
            features
                .kinds()
                .iter()
                .zip(vector)
                .position(|(&k, &b)| k == kind && b == 1)
                .map(|f| features.names()[f].clone())
                .unwrap_or_else(|| "(none)".into())
        };

        let mut items = HashMap::new();
        for &item_id in features.item_ids() {
            let vector = features.vector(item_id).unwrap();
            let genre_key = match catalog.and_then(|c| c.get(item_id)) {
                Some(entry) if !entry.genres.is_empty() => entry.genres.join("|"),
                _ => {
                    let set: Vec<&str> = features
                        .kinds()
                        .iter()
                        .zip(vector)
                        .zip(features.names())
                        .filter(|((&k, &b), _)| k == FeatureKind::Genre && b == 1)
                        .map(|(_, name)| name.as_str())
                        .collect();
                    if set.is_empty() {
                        "(none)".into()
                    } else {
                        set.join("|")
                    }
                }
            };
            let year = catalog
                .and_then(|c| c.release_year(item_id))
                .map_or(0.0, f64::from);
            items.insert(
                item_id,
                ItemAttributes {
                    year,
                    genres: genres.code(genre_key),
                    country: countries.code(first_of(vector, FeatureKind::Country)),
                    actor: actors.code(first_of(vector, FeatureKind::Actor)),
                    director: directors.code(first_of(vector, FeatureKind::Director)),
                },
            );
        }
        FeatureEncoder {
            fields: fields.to_vec(),
            users: Arc::clone(users),
            items,
        }
    }

    pub fn fields(&self) -> &[InputField] {
        &self.fields
    }

    pub fn input_dim(&self) -> usize {
        self.fields.len()
    }

    pub fn encode_input(&self, user_id: u64, item_id: u64) -> Result<Vec<f64>> {
        let item = self
            .items
            .get(&item_id)
            .ok_or(Error::MissingFeatures(item_id))?;
        self.fields
            .iter()
            .map(|field| {
                Ok(match field {
                    InputField::UserId => {
                        self.users
                            .index(user_id)
                            .ok_or(Error::UnknownUser(user_id))? as f64
                            + 1.0
                    }
                    InputField::ReleaseYear => item.year,
                    InputField::Genres => item.genres,
                    InputField::Country => item.country,
                    InputField::LeadActor => item.actor,
                    InputField::Director => item.director,
                })
            })
            .collect()
    }

    /// Rating value rounded to the nearest class and clamped to 1..=5.
    pub fn label(rating: f64) -> u8 {
        rating.round().clamp(1.0, 5.0) as u8
    }

    /// Encodes the ratings of accepted users in insertion order, skipping
    /// items without a feature row.
    pub fn encode_ratings(
        &self,
        m: &RatingMatrix,
        keep_user: impl Fn(u64) -> bool,
    ) -> Vec<EncodedExample> {
        m.triples()
            .filter(|t| keep_user(t.user_id))
            .filter_map(|t| {
                self.encode_input(t.user_id, t.item_id)
                    .ok()
                    .map(|input| EncodedExample {
                        user_id: t.user_id,
                        item_id: t.item_id,
                        input,
                        label: Self::label(t.rating),
                    })
            })
            .collect()
    }
}

/// Per-dimension zero-mean, unit-variance scaling fitted on training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &[EncodedExample]) -> Result<Self> {
        let first = data
            .first()
            .ok_or_else(|| Error::Empty("cannot standardize without examples".into()))?;
        let dim = first.input.len();
        let n = data.len() as f64;
        let mut mean = vec![0.0; dim];
        for ex in data {
            if ex.input.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: ex.input.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(&ex.input) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for ex in data {
            for ((s, v), m) in var.iter_mut().zip(&ex.input).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        // constant columns map to 0
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, input: &mut [f64]) {
        for ((v, m), s) in input.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }

    pub fn apply_all(&self, data: &mut [EncodedExample]) {
        for ex in data {
            self.apply(&mut ex.input);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_catalog, load_features, RatingTriple};

    fn fixtures() -> (FeatureMatrix, ItemCatalog) {
        let features = load_features(
            "movieId,ActorID-1,ActorID-2,DirID-1,Drama,Comedy,USA,France\n\
             10,0,1,1,1,0,0,1\n\
             20,1,1,1,1,1,1,0\n\
             30,0,1,0,1,0,0,1\n"
                .as_bytes(),
        )
        .unwrap();
        let catalog = load_catalog(
            "movieId,title,genres\n10,A (1990),Drama\n20,B (2001),Comedy|Drama\n".as_bytes(),
        )
        .unwrap();
        (features, catalog)
    }

    #[test]
    fn ordinal_codes_follow_first_appearance() {
        let (features, catalog) = fixtures();
        let users = Arc::new(IdMap::from_ids([5, 7]));
        let enc = FeatureEncoder::fit(
            &features,
            Some(&catalog),
            &users,
            &InputField::defaults(Mode::Global),
        );
        assert_eq!(enc.encode_input(7, 10).unwrap(), vec![2.0, 1990.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(enc.encode_input(5, 20).unwrap(), vec![1.0, 2001.0, 2.0, 2.0, 2.0, 1.0]);
        // item 30 is not in the catalog: genres come from the feature columns
        // and reuse the "Drama" code, the year is unknown, and no director is set
        assert_eq!(enc.encode_input(5, 30).unwrap(), vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        assert!(matches!(enc.encode_input(5, 99), Err(Error::MissingFeatures(99))));
        assert!(matches!(enc.encode_input(6, 10), Err(Error::UnknownUser(6))));
    }

    #[test]
    fn encode_ratings_skips_featureless_items() {
        let (features, catalog) = fixtures();
        let m = RatingMatrix::from_triples(vec![
            RatingTriple::new(1, 10, 4.4),
            RatingTriple::new(1, 99, 2.0),
            RatingTriple::new(2, 20, 1.0),
        ])
        .unwrap();
        let enc = FeatureEncoder::fit(
            &features,
            Some(&catalog),
            m.users(),
            &InputField::defaults(Mode::PerUser),
        );
        let examples = enc.encode_ratings(&m, |u| u == 1);
        assert_eq!(examples.len(), 1);
        assert_eq!(examples[0].label, 4);
        assert_eq!(examples[0].input.len(), 5);
    }

    #[test]
    fn standardized_columns() {
        let data: Vec<_> = [[1.0, 5.0], [3.0, 5.0]]
            .iter()
            .map(|x| EncodedExample {
                user_id: 1,
                item_id: 1,
                input: x.to_vec(),
                label: 1,
            })
            .collect();
        let s = Standardizer::fit(&data).unwrap();
        let mut x = vec![1.0, 5.0];
        s.apply(&mut x);
        assert_eq!(x, vec![-1.0, 0.0]);
    }
}
