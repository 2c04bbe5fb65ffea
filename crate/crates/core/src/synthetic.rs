//! Seeded MovieLens-shaped data for demos and end-to-end tests.
//!
//! Ratings come from a biased latent-factor model whose item factors are
//! built from binary item features (actors, directors, genres, countries),
//! so every predictor in the crate has signal to find. Rating counts per user
//! are heavy-tailed with a floor, and item choice is popularity weighted.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Pareto};

use crate::dataset::{
    CatalogEntry, FeatureKind, FeatureMatrix, ItemCatalog, RatingMatrix, RatingTriple,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    pub min_ratings_per_user: usize,
    pub latent_dim: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// 943 users, 1,682 movies, 100,000 ratings, at least 20 per user.
    pub fn movielens_100k(seed: u64) -> Self {
        SyntheticConfig {
            n_users: 943,
            n_items: 1682,
            n_ratings: 100_000,
            min_ratings_per_user: 20,
            latent_dim: 8,
            noise: 0.85,
            seed,
        }
    }
}

pub struct SyntheticData {
    pub ratings: RatingMatrix,
    pub catalog: ItemCatalog,
    pub features: FeatureMatrix,
}

/// Column names of the generated features file.
pub fn feature_names() -> Vec<String> {
    let mut names: Vec<String> = (1..=14).map(|i| format!("ActorID-{i}")).collect();
    names.extend((1..=19).map(|i| format!("DirID-{i}")));
    names.extend(
        [
            "Action", "Adventure", "Animation", "Belgium", "Comedy", "Crime", "Drama", "Family",
            "Fantasy", "Horror", "Music", "Mystery", "Romance", "Sci-Fi", "Spain", "Thriller",
            "UK", "USA", "France", "Germany",
        ]
        .map(String::from),
    );
    names
}

fn pick_weighted<R: Rng>(rng: &mut R, choices: &[usize], weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random_range(0.0..total);
    for (&c, &w) in choices.iter().zip(weights) {
        if x < w {
            return c;
        }
        x -= w;
    }
    *choices.last().unwrap()
}

fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize, sd: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, sd).unwrap();
    (0..dim).map(|_| normal.sample(rng)).collect()
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    if cfg.n_users == 0 || cfg.n_items == 0 || cfg.latent_dim == 0 {
        return Err(Error::Config("synthetic data needs users, items and factors".into()));
    }
    let cap = (cfg.n_items / 2).max(cfg.min_ratings_per_user);
    if cfg.min_ratings_per_user > cfg.n_items
        || cfg.n_ratings < cfg.n_users * cfg.min_ratings_per_user
        || cfg.n_ratings > cfg.n_users * cap
    {
        return Err(Error::Config("rating count incompatible with per-user limits".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let names = feature_names();
    let kinds: Vec<FeatureKind> = names.iter().map(|n| FeatureKind::classify(n)).collect();
    let of_kind = |kind| -> Vec<usize> { (0..names.len()).filter(|&f| kinds[f] == kind).collect() };
    let (actors, directors, genres, countries) = (
        of_kind(FeatureKind::Actor),
        of_kind(FeatureKind::Director),
        of_kind(FeatureKind::Genre),
        of_kind(FeatureKind::Country),
    );
    let genre_weights: Vec<f64> = genres
        .iter()
        .map(|&g| match names[g].as_str() {
            "Drama" => 5.0,
            "Comedy" => 4.0,
            "Action" | "Thriller" | "Romance" => 2.5,
            _ => 1.0,
        })
        .collect();
    let country_weights: Vec<f64> = countries
        .iter()
        .map(|&c| match names[c].as_str() {
            "USA" => 12.0,
            "UK" => 3.0,
            "France" => 2.0,
            _ => 1.0,
        })
        .collect();

    let d = cfg.latent_dim;
    let embeddings: Vec<Vec<f64>> = (0..names.len()).map(|_| gaussian_vec(&mut rng, d, 1.0)).collect();
    let director_quality = Normal::new(0.0, 0.3).unwrap();
    let quality: Vec<f64> = (0..names.len()).map(|_| director_quality.sample(&mut rng)).collect();
    let item_bias_dist = Normal::new(0.0, 0.4).unwrap();
    let age: Exp<f64> = Exp::new(1.0 / 12.0).unwrap();

    let mut feature_rows = Vec::with_capacity(cfg.n_items);
    let mut item_factors = Vec::with_capacity(cfg.n_items);
    let mut item_bias: Vec<f64> = Vec::with_capacity(cfg.n_items);
    let mut catalog = ItemCatalog::default();
    for item in 0..cfg.n_items {
        let mut row = vec![0u8; names.len()];
        for _ in 0..rng.random_range(1..=3) {
            row[pick_weighted(&mut rng, &genres, &genre_weights)] = 1;
        }
        row[pick_weighted(&mut rng, &countries, &country_weights)] = 1;
        for _ in 0..rng.random_range(1..=3) {
            row[*actors.choose(&mut rng).unwrap()] = 1;
        }
        let director = *directors.choose(&mut rng).unwrap();
        row[director] = 1;

        let set: Vec<usize> = (0..names.len()).filter(|&f| row[f] == 1).collect();
        let scale = 1.0 / (set.len() as f64).sqrt();
        let noise = gaussian_vec(&mut rng, d, 0.5);
        let factors: Vec<f64> = (0..d)
            .map(|j| set.iter().map(|&f| embeddings[f][j]).sum::<f64>() * scale + noise[j])
            .collect();
        item_factors.push(factors);
        item_bias.push(item_bias_dist.sample(&mut rng) + quality[director]);

        let year = (1998.0 - age.sample(&mut rng)).max(1922.0) as i32;
        let item_genres = genres
            .iter()
            .filter(|&&g| row[g] == 1)
            .map(|&g| names[g].clone())
            .collect();
        catalog.insert(
            item as u64 + 1,
            CatalogEntry {
                title: format!("Movie {} ({year})", item + 1),
                genres: item_genres,
            },
        );
        feature_rows.push((item as u64 + 1, row));
    }
    let features = FeatureMatrix::new(names, feature_rows)?;

    // popularity falls off with a random rank; better items are a bit more popular
    let mut ranks: Vec<usize> = (1..=cfg.n_items).collect();
    ranks.shuffle(&mut rng);
    let popularity: Vec<f64> = ranks
        .iter()
        .zip(&item_bias)
        .map(|(&r, &b)| (r as f64).powf(-0.85) * (0.6 * b).exp())
        .collect();

    let pareto = Pareto::new(1.0, 1.2).unwrap();
    let draws: Vec<f64> = (0..cfg.n_users).map(|_| pareto.sample(&mut rng)).collect();
    let spare = (cfg.n_ratings - cfg.n_users * cfg.min_ratings_per_user) as f64;
    let total: f64 = draws.iter().sum();
    let mut counts: Vec<usize> = draws
        .iter()
        .map(|a| (cfg.min_ratings_per_user + (a / total * spare) as usize).min(cap))
        .collect();
    let mut missing = cfg.n_ratings - counts.iter().sum::<usize>();
    while missing > 0 {
        for c in counts.iter_mut() {
            if missing > 0 && *c < cap {
                *c += 1;
                missing -= 1;
            }
        }
    }

    let user_sd = 0.6 / (d as f64).sqrt();
    let user_bias_dist = Normal::new(0.0, 0.4).unwrap();
    let noise = Normal::new(0.0, cfg.noise).unwrap();
    let mut triples = Vec::with_capacity(cfg.n_ratings);
    for (user, &count) in counts.iter().enumerate() {
        let factors = gaussian_vec(&mut rng, d, user_sd);
        let bias = user_bias_dist.sample(&mut rng);
        // weighted sampling without replacement via exponential keys
        let mut keyed: Vec<(f64, usize)> = popularity
            .iter()
            .enumerate()
            .map(|(i, &w)| (rng.random::<f64>().ln() / w, i))
            .collect();
        keyed.select_nth_unstable_by(count - 1, |a, b| b.0.total_cmp(&a.0));
        let mut chosen: Vec<usize> = keyed[..count].iter().map(|&(_, i)| i).collect();
        chosen.sort_unstable();
        chosen.shuffle(&mut rng);
        for item in chosen {
            let affinity: f64 = factors.iter().zip(&item_factors[item]).map(|(a, b)| a * b).sum();
            let raw = 3.53 + bias + item_bias[item] + affinity + noise.sample(&mut rng);
            triples.push(RatingTriple {
                user_id: user as u64 + 1,
                item_id: item as u64 + 1,
                rating: raw.round().clamp(1.0, 5.0),
                timestamp: Some(874_724_710 + rng.random_range(0..20_000_000)),
            });
        }
    }
    Ok(SyntheticData {
        ratings: RatingMatrix::from_triples(triples)?,
        catalog,
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_instance_shape() {
        let cfg = SyntheticConfig {
            n_users: 30,
            n_items: 80,
            n_ratings: 900,
            min_ratings_per_user: 20,
            latent_dim: 4,
            noise: 0.8,
            seed: 1,
        };
        let data = generate(&cfg).unwrap();
        assert_eq!(data.ratings.len(), 900);
        assert_eq!(data.ratings.n_users(), 30);
        for u in 0..30 {
            assert!(data.ratings.user_row(u).len() >= 20);
        }
        assert_eq!(data.features.n_features(), 53);
        assert_eq!(data.catalog.len(), 80);
        let again = generate(&cfg).unwrap();
        assert!(again.ratings.triples().eq(data.ratings.triples()));
    }

    #[test]
    fn impossible_counts() {
        let mut cfg = SyntheticConfig::movielens_100k(0);
        cfg.n_ratings = 10;
        assert!(generate(&cfg).is_err());
    }
}
