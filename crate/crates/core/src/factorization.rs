//! Latent-factor model trained by stochastic gradient descent.
//!
//! Users get factor rows `p_x` and items factor rows `q_i` of width `k`; a
//! rating is predicted by the dot product `q_i · p_x`. Training minimizes the
//! squared reconstruction error over observed ratings, optionally with an L2
//! penalty on the factors. There are no bias terms.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{IdMap, RatingMatrix};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalReport};
use crate::predictor::{clamp_rating, Prediction, Predictor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub k: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    /// Factors start uniform in `(-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            k: 25,
            epochs: 50,
            learning_rate: 0.005,
            regularization: 0.0,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        let problem = if self.k == 0 {
            "k must be at least 1"
        } else if self.epochs == 0 {
            "epochs must be at least 1"
        } else if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            "learning rate must be positive"
        } else if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            "regularization must be non-negative"
        } else if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            "init scale must be positive"
        } else {
            return Ok(());
        };
        Err(Error::Config(problem.into()))
    }
}

impl fmt::Display for SgdConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "k={} epochs={} lr={} reg={} init={} seed={}",
            self.k, self.epochs, self.learning_rate, self.regularization, self.init_scale, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    config: SgdConfig,
    /// Row-major `n_users × k`.
    p: Vec<f64>,
    /// Row-major `n_items × k`.
    q: Vec<f64>,
    trace: Vec<f64>,
    user_counts: Vec<u32>,
    item_counts: Vec<u32>,
    global_mean: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One SGD update for a single observed rating; returns the pre-update error.
///
/// Both vectors move from their old values:
/// `q += lr (e p - reg q)` and `p += lr (e q - reg p)` with `e = r - q·p`.
pub fn sgd_step(
    user_factors: &mut [f64],
    item_factors: &mut [f64],
    rating: f64,
    learning_rate: f64,
    regularization: f64,
) -> f64 {
    let err = rating - dot(item_factors, user_factors);
    for (pf, qf) in user_factors.iter_mut().zip(item_factors.iter_mut()) {
        let (p_old, q_old) = (*pf, *qf);
        *qf += learning_rate * (err * p_old - regularization * q_old);
        *pf += learning_rate * (err * q_old - regularization * p_old);
    }
    err
}

/// Sum of squared errors over the observed entries.
fn sse(entries: &[(usize, usize, f64)], p: &[f64], q: &[f64], k: usize) -> f64 {
    entries
        .iter()
        .map(|&(u, i, r)| {
            let e = r - dot(&q[i * k..(i + 1) * k], &p[u * k..(u + 1) * k]);
            e * e
        })
        .sum()
}

pub fn train_factors(train: &RatingMatrix, cfg: &SgdConfig) -> Result<FactorModel> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training matrix has no ratings".into()));
    }
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = cfg.init_scale;
    // negating a draw from [-s, s) gives (-s, s]
    let mut init = |n: usize| -> Vec<f64> {
        (0..n * k)
            .map(|_| -rng.random_range(-scale..scale))
            .collect()
    };
    let mut p = init(train.n_users());
    let mut q = init(train.n_items());

    let entries: Vec<(usize, usize, f64)> = train.indexed_entries().collect();
    let mut user_counts = vec![0u32; train.n_users()];
    let mut item_counts = vec![0u32; train.n_items()];
    for &(u, i, _) in &entries {
        user_counts[u] += 1;
        item_counts[i] += 1;
    }

    let mut order: Vec<usize> = (0..entries.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng);
        for &n in &order {
            let (u, i, r) = entries[n];
            sgd_step(
                &mut p[u * k..(u + 1) * k],
                &mut q[i * k..(i + 1) * k],
                r,
                cfg.learning_rate,
                cfg.regularization,
            );
        }
        let loss = sse(&entries, &p, &q, k);
        if !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("SSE became {loss}"),
            });
        }
        trace.push(loss);
    }

    Ok(FactorModel {
        users: Arc::clone(train.users()),
        items: Arc::clone(train.items()),
        config: *cfg,
        p,
        q,
        trace,
        user_counts,
        item_counts,
        global_mean: train.global_mean(),
    })
}

impl FactorModel {
    /// Wraps hand-built factors; every user and item is treated as trained.
    pub fn from_factors(
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        k: usize,
        p: Vec<f64>,
        q: Vec<f64>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        for (len, rows) in [(p.len(), users.len()), (q.len(), items.len())] {
            if len != rows * k {
                return Err(Error::Dimension {
                    expected: rows * k,
                    actual: len,
                });
            }
        }
        Ok(FactorModel {
            config: SgdConfig {
                k,
                ..SgdConfig::default()
            },
            user_counts: vec![1; users.len()],
            item_counts: vec![1; items.len()],
            users,
            items,
            p,
            q,
            trace: Vec::new(),
            global_mean: 3.0,
        })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn config(&self) -> &SgdConfig {
        &self.config
    }

    /// SSE after each epoch.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    pub fn user_factors(&self, user: usize) -> &[f64] {
        let k = self.config.k;
        &self.p[user * k..(user + 1) * k]
    }

    pub fn item_factors(&self, item: usize) -> &[f64] {
        let k = self.config.k;
        &self.q[item * k..(item + 1) * k]
    }

    /// Unclamped `q_i · p_x` by dense index.
    pub fn raw_score(&self, user: usize, item: usize) -> Result<f64> {
        if user >= self.users.len() {
            return Err(Error::Dimension {
                expected: self.users.len(),
                actual: user,
            });
        }
        if item >= self.items.len() {
            return Err(Error::Dimension {
                expected: self.items.len(),
                actual: item,
            });
        }
        Ok(dot(self.item_factors(item), self.user_factors(user)))
    }

    /// Prediction by dense index, clamped to the rating scale.
    pub fn predict_index(&self, user: usize, item: usize) -> Result<Prediction> {
        let raw = self.raw_score(user, item)?;
        let trained = self.user_counts[user] > 0 && self.item_counts[item] > 0;
        Ok(Prediction {
            user_id: self.users.id(user),
            item_id: self.items.id(item),
            value: if trained { clamp_rating(raw) } else { self.global_mean },
            support: usize::from(trained),
        })
    }

    const MAGIC: &'static [u8; 4] = b"MRFM";
    const VERSION: u32 = 1;

    /// Little-endian binary dump: header, config, id maps, counts, `P`, `Q`, trace.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.config;
        out.write_all(Self::MAGIC)?;
        out.write_all(&Self::VERSION.to_le_bytes())?;
        for v in [self.users.len(), self.items.len(), c.k, c.epochs] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        for v in [c.learning_rate, c.regularization, c.init_scale, self.global_mean] {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&c.seed.to_le_bytes())?;
        for id in self.users.ids().iter().chain(self.items.ids()) {
            out.write_all(&id.to_le_bytes())?;
        }
        for n in self.user_counts.iter().chain(&self.item_counts) {
            out.write_all(&n.to_le_bytes())?;
        }
        for v in self.p.iter().chain(&self.q) {
            out.write_all(&v.to_le_bytes())?;
        }
        out.write_all(&(self.trace.len() as u64).to_le_bytes())?;
        for v in &self.trace {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Model("bad magic".into()));
        }
        let version = read_u32(&mut input)?;
        if version != Self::VERSION {
            return Err(Error::Model(format!("unsupported version {version}")));
        }
        let n_users = read_len(&mut input)?;
        let n_items = read_len(&mut input)?;
        let k = read_len(&mut input)?;
        let epochs = read_len(&mut input)?;
        let learning_rate = read_f64(&mut input)?;
        let regularization = read_f64(&mut input)?;
        let init_scale = read_f64(&mut input)?;
        let global_mean = read_f64(&mut input)?;
        let seed = read_u64(&mut input)?;
        let users = read_ids(&mut input, n_users)?;
        let items = read_ids(&mut input, n_items)?;
        let user_counts = (0..n_users)
            .map(|_| read_u32(&mut input))
            .collect::<Result<_>>()?;
        let item_counts = (0..n_items)
            .map(|_| read_u32(&mut input))
            .collect::<Result<_>>()?;
        let p = read_f64s(&mut input, n_users * k)?;
        let q = read_f64s(&mut input, n_items * k)?;
        let trace_len = read_len(&mut input)?;
        let trace = read_f64s(&mut input, trace_len)?;
        Ok(FactorModel {
            users: Arc::new(users),
            items: Arc::new(items),
            config: SgdConfig {
                k,
                epochs,
                learning_rate,
                regularization,
                init_scale,
                seed,
            },
            p,
            q,
            trace,
            user_counts,
            item_counts,
            global_mean,
        })
    }
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len<R: Read>(input: &mut R) -> Result<usize> {
    let v = read_u64(input)?;
    usize::try_from(v)
        .ok()
        .filter(|&n| n < (1 << 40))
        .ok_or_else(|| Error::Model(format!("implausible length {v}")))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    read_u64(input).map(f64::from_bits)
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(input)).collect()
}

fn read_ids<R: Read>(input: &mut R, n: usize) -> Result<IdMap> {
    let ids = (0..n).map(|_| read_u64(input)).collect::<Result<Vec<_>>>()?;
    if ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Model("id list is not strictly ascending".into()));
    }
    Ok(IdMap::from_ids(ids))
}

/// Dot-product prediction for a user/item pair by external id.
pub fn predict_factor(model: &FactorModel, user_id: u64, item_id: u64) -> Result<Prediction> {
    let user = model.users.index(user_id).ok_or(Error::UnknownUser(user_id))?;
    let item = model.items.index(item_id).ok_or(Error::UnknownItem(item_id))?;
    model.predict_index(user, item)
}

impl Predictor for FactorModel {
    fn name(&self) -> String {
        format!("svd k={}", self.config.k)
    }

    fn predict(&self, user_id: u64, item_id: u64) -> Result<Prediction> {
        predict_factor(self, user_id, item_id)
    }

    fn fallback(&self, _: u64, _: u64) -> f64 {
        self.global_mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub report: EvalReport,
    pub final_sse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub config: SgdConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Largest minus smallest RMSE across the sweep.
    pub fn rmse_spread(&self) -> f64 {
        let rmses = self.rows.iter().map(|r| r.report.rmse);
        let max = rmses.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = rmses.fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn to_record(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format!(
                "k={} rmse={} mse={} coverage={} train_sse={}\n",
                row.k, row.report.rmse, row.report.mse, row.report.coverage, row.final_sse
            ));
        }
        out
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6}  {:>8}  {:>14}", "k", "RMSE", "train SSE")?;
        for row in &self.rows {
            writeln!(
                f,
                "{:>6}  {:>8.4}  {:>14.4}",
                row.k, row.report.rmse, row.final_sse
            )?;
        }
        Ok(())
    }
}

/// Trains one model per `k` (all sharing the template's seed) and scores each on `test`.
pub fn sweep_k(
    train: &RatingMatrix,
    test: &RatingMatrix,
    ks: &[usize],
    template: &SgdConfig,
) -> Result<SweepReport> {
    if ks.is_empty() {
        return Err(Error::Config("no k values to sweep".into()));
    }
    let rows = ks
        .par_iter()
        .map(|&k| {
            let cfg = SgdConfig { k, ..*template };
            let annotate = |e: Error| e.context(format!("k={k}"));
            let model = train_factors(train, &cfg).map_err(annotate)?;
            let report = evaluate(&model, test).map_err(annotate)?;
            Ok(SweepRow {
                k,
                final_sse: *model.trace.last().unwrap(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        config: *template,
        rows,
    })
}
