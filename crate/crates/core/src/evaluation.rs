//! Error metrics and the holdout evaluation loop.

use std::fmt;

use rayon::prelude::*;

use crate::dataset::RatingMatrix;
use crate::error::{Error, Result};
use crate::predictor::Predictor;

fn check_lengths(predictions: &[f64], truths: &[f64]) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension {
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    Ok(())
}

/// Mean squared error between predictions and truths.
pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(predictions, truths)?;
    let sse: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(o, t)| (o - t) * (o - t))
        .sum();
    Ok(sse / predictions.len() as f64)
}

/// Root mean squared error between predictions and truths.
pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    mse(predictions, truths).map(f64::sqrt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub predictor: String,
    pub n: usize,
    pub rmse: f64,
    pub mse: f64,
    /// Fraction of test pairs scored without a fallback.
    pub coverage: f64,
    pub fallbacks: usize,
    /// Pairs where the predictor returned an error (a subset of `fallbacks`).
    pub failures: usize,
}

impl EvalReport {
    /// `key=value` lines, one field per line.
    pub fn to_record(&self) -> String {
        format!(
            "predictor={}\nn={}\nrmse={}\nmse={}\ncoverage={}\nfallbacks={}\nfailures={}\n",
            self.predictor, self.n, self.rmse, self.mse, self.coverage, self.fallbacks, self.failures
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "predictor  {}", self.predictor)?;
        writeln!(f, "test pairs {}", self.n)?;
        writeln!(f, "RMSE       {:.6}", self.rmse)?;
        writeln!(f, "MSE        {:.6}", self.mse)?;
        writeln!(
            f,
            "coverage   {:.4} ({} fallbacks, {} failures)",
            self.coverage, self.fallbacks, self.failures
        )
    }
}

/// Scores every test rating with `predictor`.
///
/// A failed prediction never aborts the run: it is counted and replaced by
/// the predictor's fallback value. Pairs are scored in parallel but the error
/// sum is reduced sequentially in test-file order.
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, test: &RatingMatrix) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Empty("test split has no ratings".into()));
    }
    let triples: Vec<_> = test.triples().collect();
    let scored: Vec<(f64, bool, bool)> = triples
        .par_iter()
        .map(|t| match predictor.predict(t.user_id, t.item_id) {
            Ok(p) => (p.value, p.is_fallback(), false),
            Err(_) => (predictor.fallback(t.user_id, t.item_id), true, true),
        })
        .collect();
    let predictions: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let truths: Vec<f64> = triples.iter().map(|t| t.rating).collect();
    let mse = mse(&predictions, &truths)?;
    let fallbacks = scored.iter().filter(|s| s.1).count();
    let failures = scored.iter().filter(|s| s.2).count();
    let n = triples.len();
    Ok(EvalReport {
        predictor: predictor.name(),
        n,
        rmse: mse.sqrt(),
        mse,
        coverage: (n - fallbacks) as f64 / n as f64,
        fallbacks,
        failures,
    })
}
