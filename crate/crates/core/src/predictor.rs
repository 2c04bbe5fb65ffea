use crate::dataset::{MAX_RATING, MIN_RATING};
use crate::error::Result;

/// A single rating estimate.
///
/// `support` counts the neighbors (or other evidence) that backed the value;
/// zero means the predictor fell back to a default such as a mean rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub user_id: u64,
    pub item_id: u64,
    pub value: f64,
    pub support: usize,
}

impl Prediction {
    pub fn is_fallback(&self) -> bool {
        self.support == 0
    }
}

/// Anything that can estimate the rating a user would give an item.
pub trait Predictor: Sync {
    fn name(&self) -> String;

    fn predict(&self, user_id: u64, item_id: u64) -> Result<Prediction>;

    /// Value used when [`Predictor::predict`] fails for a pair.
    fn fallback(&self, user_id: u64, item_id: u64) -> f64;
}

pub fn clamp_rating(value: f64) -> f64 {
    value.clamp(MIN_RATING, MAX_RATING)
}
