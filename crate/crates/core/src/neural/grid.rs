use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{mlp_mse, train_mlp, Activation, EncodedExample, MlpConfig, Mode, Standardizer};

/// Activation × architecture table of test MSE.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub mode: Mode,
    pub activations: Vec<Activation>,
    /// `(hidden layers, hidden nodes)` per column.
    pub architectures: Vec<(usize, usize)>,
    /// `cells[row][column]`, rows following `activations`.
    pub cells: Vec<Vec<f64>>,
    /// Networks trained per cell (users in per-user mode, 1 in global mode).
    pub networks_per_cell: usize,
}

impl GridReport {
    pub fn min_mse(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cell(&self, activation: Activation, architecture: (usize, usize)) -> Option<f64> {
        let r = self.activations.iter().position(|&a| a == activation)?;
        let c = self.architectures.iter().position(|&a| a == architecture)?;
        Some(self.cells[r][c])
    }

    pub fn to_record(&self) -> String {
        let mut out = String::new();
        for (act, row) in self.activations.iter().zip(&self.cells) {
            for (&(layers, nodes), mse) in self.architectures.iter().zip(row) {
                out.push_str(&format!(
                    "mode={} activation={} layers={} nodes={} mse={}\n",
                    self.mode.as_str(),
                    act,
                    layers,
                    nodes,
                    mse
                ));
            }
        }
        out
    }
}

impl fmt::Display for GridReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let headers: Vec<String> = self
            .architectures
            .iter()
            .map(|(l, n)| format!("Hidden Layers: {l} Hidden Nodes: {n}"))
            .collect();
        let width = headers.iter().map(String::len).max().unwrap_or(3);
        write!(f, "{:<12}", "Activation")?;
        for h in &headers {
            write!(f, "  {h:<width$}")?;
        }
        writeln!(f)?;
        write!(f, "{:<12}", "")?;
        for _ in &headers {
            write!(f, "  {:<width$}", "MSE")?;
        }
        writeln!(f)?;
        for (act, row) in self.activations.iter().zip(&self.cells) {
            write!(f, "{:<12}", format!("'{act}'"))?;
            for mse in row {
                write!(f, "  {:<width$}", format!("{mse:.4}"))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn cell_seed(base: u64, row: usize, column: usize, user_id: u64) -> u64 {
    mix(mix(mix(base ^ row as u64) ^ column as u64) ^ user_id)
}

fn fit_and_score(
    cfg: &MlpConfig,
    train: &[EncodedExample],
    test: &[EncodedExample],
) -> Result<f64> {
    let standardizer = Standardizer::fit(train)?;
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    standardizer.apply_all(&mut train);
    standardizer.apply_all(&mut test);
    let model = train_mlp(cfg, &train)?;
    mlp_mse(&model, &test)
}

/// Trains one network per grid cell (global mode) or one per user per cell
/// (per-user mode, MSE averaged over users) and reports test MSE.
///
/// Inputs are standardized on the training examples of each network. In
/// per-user mode, users lacking either training or test examples are skipped.
/// Each network's seed is derived from `base.seed`, the cell coordinates and
/// the user id, so cells can train in parallel without changing results.
pub fn grid_experiment(
    train: &[EncodedExample],
    test: &[EncodedExample],
    mode: Mode,
    activations: &[Activation],
    architectures: &[(usize, usize)],
    base: &MlpConfig,
) -> Result<GridReport> {
    if activations.is_empty() || architectures.is_empty() {
        return Err(Error::Config("grid needs at least one activation and architecture".into()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Empty("grid needs training and test examples".into()));
    }

    let groups: Vec<(u64, Vec<EncodedExample>, Vec<EncodedExample>)> = match mode {
        Mode::Global => vec![(0, train.to_vec(), test.to_vec())],
        Mode::PerUser => {
            let mut by_user: BTreeMap<u64, (Vec<EncodedExample>, Vec<EncodedExample>)> =
                BTreeMap::new();
            for ex in train {
                by_user.entry(ex.user_id).or_default().0.push(ex.clone());
            }
            for ex in test {
                by_user.entry(ex.user_id).or_default().1.push(ex.clone());
            }
            by_user
                .into_iter()
                .filter(|(_, (tr, te))| !tr.is_empty() && !te.is_empty())
                .map(|(u, (tr, te))| (u, tr, te))
                .collect()
        }
    };
    if groups.is_empty() {
        return Err(Error::Empty("no user has both training and test examples".into()));
    }

    let coords: Vec<(usize, usize)> = (0..activations.len())
        .flat_map(|r| (0..architectures.len()).map(move |c| (r, c)))
        .collect();
    let values = coords
        .par_iter()
        .map(|&(r, c)| {
            let (layers, nodes) = architectures[c];
            let mut total = 0.0;
            for (user_id, tr, te) in &groups {
                let cfg = MlpConfig {
                    hidden_layers: layers,
                    hidden_nodes: nodes,
                    activation: activations[r],
                    seed: cell_seed(base.seed, r, c, *user_id),
                    mode,
                    ..*base
                };
                total += fit_and_score(&cfg, tr, te).map_err(|e| {
                    e.context(format!(
                        "cell {} layers={layers} nodes={nodes} user={user_id}",
                        activations[r]
                    ))
                })?;
            }
            Ok(total / groups.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    let cells = values
        .chunks(architectures.len())
        .map(<[f64]>::to_vec)
        .collect();
    Ok(GridReport {
        mode,
        activations: activations.to_vec(),
        architectures: architectures.to_vec(),
        cells,
        networks_per_cell: groups.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn examples(users: &[u64], per_user: usize) -> Vec<EncodedExample> {
        users
            .iter()
            .flat_map(|&u| {
                (0..per_user).map(move |i| EncodedExample {
                    user_id: u,
                    item_id: i as u64,
                    input: vec![i as f64, (i % 2) as f64],
                    label: (i % 5 + 1) as u8,
                })
            })
            .collect()
    }

    #[test]
    fn single_cell() {
        let data = examples(&[1, 2], 6);
        let cfg = MlpConfig {
            epochs: 5,
            ..MlpConfig::default()
        };
        let report =
            grid_experiment(&data, &data, Mode::PerUser, &[Activation::Tanh], &[(1, 3)], &cfg)
                .unwrap();
        assert_eq!(report.cells.len(), 1);
        assert_eq!(report.cells[0].len(), 1);
        assert_eq!(report.networks_per_cell, 2);
        let text = report.to_string();
        assert!(text.contains("Hidden Layers: 1 Hidden Nodes: 3"));
        assert!(text.contains("'tanh'"));
    }

    #[test]
    fn grid_is_reproducible() {
        let data = examples(&[1, 2, 3], 8);
        let cfg = MlpConfig {
            epochs: 5,
            seed: 9,
            ..MlpConfig::default()
        };
        let run = || {
            grid_experiment(
                &data,
                &data,
                Mode::Global,
                &Activation::ALL,
                &[(1, 2), (2, 3)],
                &cfg,
            )
            .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.cells.len(), 4);
        assert!(a.cell(Activation::Relu, (2, 3)).is_some());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let data = examples(&[1], 3);
        let cfg = MlpConfig::default();
        assert!(grid_experiment(&data, &data, Mode::Global, &[], &[(1, 1)], &cfg).is_err());
        assert!(grid_experiment(&[], &data, Mode::Global, &[Activation::Tanh], &[(1, 1)], &cfg)
            .is_err());
    }
}
