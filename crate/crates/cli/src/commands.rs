use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use movierec::content_based::ContentModel;
use movierec::dataset::{
    holdout_split, load_catalog, load_features, load_ratings, Axis, FeatureMatrix, ItemCatalog,
    RatingMatrix,
};
use movierec::evaluation::evaluate;
use movierec::factorization::{sweep_k, train_factors, FactorModel, SgdConfig};
use movierec::neighborhood_cf::{recommend_top_n, CfConfig, CfModel, Weighting};
use movierec::neural::{grid_experiment, Activation, FeatureEncoder, GridReport, InputField, MlpConfig, MlpRater, Mode};
use movierec::synthetic::{generate, SyntheticConfig};
use movierec::Predictor;

use crate::{
    Algo, Cli, Command, DataArgs, EvaluateArgs, Format, GenerateArgs, GridArgs, GridMode,
    ModelArgs, RecommendArgs, SplitArgs, SweepArgs, WeightingArg,
};

/// Writes the effective configuration first, then the report body.
struct Output<'a, W: Write> {
    format: Format,
    out: &'a mut W,
}

impl<W: Write> Output<'_, W> {
    fn config(&mut self, command: &str, pairs: &[(&str, String)]) -> Result<()> {
        match self.format {
            Format::Text => {
                write!(self.out, "# movierec {command}")?;
                for (k, v) in pairs {
                    write!(self.out, " {k}={v}")?;
                }
                writeln!(self.out)?;
            }
            Format::Record => {
                writeln!(self.out, "config.command={command}")?;
                for (k, v) in pairs {
                    writeln!(self.out, "config.{k}={v}")?;
                }
            }
        }
        Ok(())
    }

    fn body(&mut self, text: &str, record: &str) -> Result<()> {
        match self.format {
            Format::Text => write!(self.out, "{text}")?,
            Format::Record => write!(self.out, "{record}")?,
        }
        Ok(())
    }
}

pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    let mut out = Output {
        format: cli.format,
        out,
    };
    match &cli.command {
        Command::Generate(args) => run_generate(args, cli.seed, &mut out),
        Command::Split(args) => run_split(args, cli.seed, &mut out),
        Command::Evaluate(args) => run_evaluate(args, cli.seed, &mut out),
        Command::Recommend(args) => run_recommend(args, cli.seed, &mut out),
        Command::SweepK(args) => run_sweep(args, cli.seed, &mut out),
        Command::NnGrid(args) => run_grid(args, cli.seed, &mut out),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn read_ratings(path: &Path) -> Result<RatingMatrix> {
    load_ratings(open(path)?).with_context(|| format!("reading ratings from {}", path.display()))
}

fn read_features(path: &Path) -> Result<FeatureMatrix> {
    load_features(open(path)?).with_context(|| format!("reading features from {}", path.display()))
}

fn read_catalog(path: &Path) -> Result<ItemCatalog> {
    load_catalog(open(path)?).with_context(|| format!("reading catalog from {}", path.display()))
}

fn display(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map_or_else(|| "-".into(), |p| p.display().to_string())
}

fn run_generate<W: Write>(args: &GenerateArgs, seed: u64, out: &mut Output<W>) -> Result<()> {
    let cfg = SyntheticConfig {
        n_users: args.users,
        n_items: args.items,
        n_ratings: args.ratings,
        ..SyntheticConfig::movielens_100k(seed)
    };
    out.config(
        "generate",
        &[
            ("out_dir", args.out_dir.display().to_string()),
            ("users", cfg.n_users.to_string()),
            ("items", cfg.n_items.to_string()),
            ("ratings", cfg.n_ratings.to_string()),
            ("seed", seed.to_string()),
        ],
    )?;
    let data = generate(&cfg)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let ratings = args.out_dir.join("ratings.csv");
    let movies = args.out_dir.join("movies.csv");
    let features = args.out_dir.join("features.csv");
    data.ratings.write_csv(create(&ratings)?)?;
    data.catalog.write_csv(create(&movies)?)?;
    data.features.write_csv(create(&features)?)?;
    out.body(
        &format!(
            "wrote {} ratings, {} movies, {} feature columns\n",
            data.ratings.len(),
            data.catalog.len(),
            data.features.n_features()
        ),
        &format!(
            "ratings={}\nmovies={}\nfeatures={}\n",
            data.ratings.len(),
            data.catalog.len(),
            data.features.n_features()
        ),
    )
}

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map_or_else(|| "ratings".into(), |s| s.to_string_lossy().into_owned());
    input.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn run_split<W: Write>(args: &SplitArgs, seed: u64, out: &mut Output<W>) -> Result<()> {
    let train_out = args
        .train_out
        .clone()
        .unwrap_or_else(|| sibling(&args.ratings, "train"));
    let test_out = args
        .test_out
        .clone()
        .unwrap_or_else(|| sibling(&args.ratings, "test"));
    out.config(
        "split",
        &[
            ("ratings", args.ratings.display().to_string()),
            ("test_fraction", args.test_fraction.to_string()),
            ("train_out", train_out.display().to_string()),
            ("test_out", test_out.display().to_string()),
            ("seed", seed.to_string()),
        ],
    )?;
    let m = read_ratings(&args.ratings)?;
    let (train, test) = holdout_split(&m, args.test_fraction, seed)?;
    train.write_csv(create(&train_out)?)?;
    test.write_csv(create(&test_out)?)?;
    out.body(
        &format!("train {} ratings\ntest  {} ratings\n", train.len(), test.len()),
        &format!("train={}\ntest={}\n", train.len(), test.len()),
    )
}

/// Loads explicit train/test files, or splits `--ratings` with the run's seed.
fn load_split(data: &DataArgs, seed: u64) -> Result<(RatingMatrix, RatingMatrix)> {
    match (&data.ratings, &data.train, &data.test) {
        (Some(r), None, None) => Ok(holdout_split(&read_ratings(r)?, data.test_fraction, seed)?),
        (None, Some(train), Some(test)) => Ok((read_ratings(train)?, read_ratings(test)?)),
        _ => bail!("pass either --ratings or both --train and --test"),
    }
}

fn data_pairs(data: &DataArgs) -> Vec<(&'static str, String)> {
    let mut pairs = Vec::new();
    if data.ratings.is_some() {
        pairs.push(("ratings", display(&data.ratings)));
        pairs.push(("test_fraction", data.test_fraction.to_string()));
    } else {
        pairs.push(("train", display(&data.train)));
        pairs.push(("test", display(&data.test)));
    }
    pairs.push(("features", display(&data.features)));
    pairs.push(("catalog", display(&data.catalog)));
    pairs
}

fn model_pairs(m: &ModelArgs, seed: u64) -> Vec<(&'static str, String)> {
    let mut pairs = vec![("algo", algo_name(m.algo).to_string())];
    match m.algo {
        Algo::UserCf | Algo::ItemCf => {
            pairs.push(("k_neighbors", m.k_neighbors.to_string()));
            pairs.push(("weighting", weighting(m.weighting).as_str().to_string()));
            pairs.push(("restore_means", m.restore_means.to_string()));
        }
        Algo::Content => pairs.push(("k_neighbors", m.k_neighbors.to_string())),
        Algo::Svd => {
            if let Some(path) = &m.model {
                pairs.push(("model", path.display().to_string()));
            } else {
                pairs.push(("k", m.k.to_string()));
                pairs.push(("epochs", m.epochs.to_string()));
                pairs.push(("lr", m.lr.to_string()));
                pairs.push(("reg", m.reg.to_string()));
                pairs.push(("init_scale", m.init_scale.to_string()));
            }
        }
        Algo::Mlp => {
            pairs.push(("hidden_layers", m.mlp.hidden_layers.to_string()));
            pairs.push(("hidden_nodes", m.mlp.hidden_nodes.to_string()));
            pairs.push(("activation", m.mlp.activation.clone()));
            pairs.push(("mlp_epochs", m.mlp.mlp_epochs.to_string()));
            pairs.push(("mlp_lr", m.mlp.mlp_lr.to_string()));
            pairs.push(("batch_size", m.mlp.batch_size.to_string()));
        }
    }
    pairs.push(("seed", seed.to_string()));
    pairs
}

fn algo_name(algo: Algo) -> &'static str {
    match algo {
        Algo::UserCf => "user-cf",
        Algo::ItemCf => "item-cf",
        Algo::Content => "content",
        Algo::Svd => "svd",
        Algo::Mlp => "mlp",
    }
}

fn weighting(w: WeightingArg) -> Weighting {
    match w {
        WeightingArg::Simple => Weighting::Simple,
        WeightingArg::Weighted => Weighting::Weighted,
    }
}

fn build_predictor(
    m: &ModelArgs,
    train: RatingMatrix,
    features: Option<&Path>,
    catalog: Option<&Path>,
    seed: u64,
) -> Result<Box<dyn Predictor>> {
    let need_features = || -> Result<FeatureMatrix> {
        let path = features
            .with_context(|| format!("--algo {} needs --features", algo_name(m.algo)))?;
        read_features(path)
    };
    Ok(match m.algo {
        Algo::UserCf | Algo::ItemCf => {
            let axis = if m.algo == Algo::UserCf {
                Axis::User
            } else {
                Axis::Item
            };
            let config = CfConfig {
                restore_means: m.restore_means,
                ..CfConfig::new(axis, m.k_neighbors, weighting(m.weighting))
            };
            Box::new(CfModel::new(train, config)?)
        }
        Algo::Content => Box::new(ContentModel::new(train, need_features()?, m.k_neighbors)?),
        Algo::Svd => {
            let model = match &m.model {
                Some(path) => FactorModel::load(open(path)?)
                    .with_context(|| format!("loading model from {}", path.display()))?,
                None => {
                    let cfg = SgdConfig {
                        k: m.k,
                        epochs: m.epochs,
                        learning_rate: m.lr,
                        regularization: m.reg,
                        init_scale: m.init_scale,
                        seed,
                    };
                    train_factors(&train, &cfg)?
                }
            };
            if let Some(path) = &m.save_model {
                model.save(create(path)?)?;
            }
            Box::new(model)
        }
        Algo::Mlp => {
            let features = need_features()?;
            let catalog = catalog.map(read_catalog).transpose()?;
            let cfg = MlpConfig {
                hidden_layers: m.mlp.hidden_layers,
                hidden_nodes: m.mlp.hidden_nodes,
                activation: m.mlp.activation.parse()?,
                learning_rate: m.mlp.mlp_lr,
                epochs: m.mlp.mlp_epochs,
                batch_size: m.mlp.batch_size,
                seed,
                mode: Mode::Global,
            };
            Box::new(MlpRater::fit(&train, &features, catalog.as_ref(), &cfg)?)
        }
    })
}

fn run_evaluate<W: Write>(args: &EvaluateArgs, seed: u64, out: &mut Output<W>) -> Result<()> {
    let mut pairs = data_pairs(&args.data);
    pairs.extend(model_pairs(&args.model, seed));
    out.config("evaluate", &pairs)?;
    let (train, test) = load_split(&args.data, seed)?;
    let predictor = build_predictor(
        &args.model,
        train,
        args.data.features.as_deref(),
        args.data.catalog.as_deref(),
        seed,
    )?;
    let report = evaluate(predictor.as_ref(), &test)?;
    out.body(&report.to_string(), &report.to_record())
}

fn run_recommend<W: Write>(args: &RecommendArgs, seed: u64, out: &mut Output<W>) -> Result<()> {
    let mut pairs = vec![
        ("ratings", args.ratings.display().to_string()),
        ("features", display(&args.features)),
        ("catalog", display(&args.catalog)),
        ("user", args.user.to_string()),
        ("n", args.n.to_string()),
    ];
    pairs.extend(model_pairs(&args.model, seed));
    out.config("recommend", &pairs)?;
    let train = read_ratings(&args.ratings)?;
    train
        .user_index(args.user)
        .with_context(|| format!("user {} has no ratings in {}", args.user, args.ratings.display()))?;
    let catalog = args.catalog.as_deref().map(read_catalog).transpose()?;
    let predictor = build_predictor(
        &args.model,
        train.clone(),
        args.features.as_deref(),
        args.catalog.as_deref(),
        seed,
    )?;
    let recs = recommend_top_n(predictor.as_ref(), &train, args.user, args.n)?;
    let mut text = String::new();
    let mut record = String::new();
    for (rank, rec) in recs.iter().enumerate() {
        let entry = catalog.as_ref().and_then(|c| c.get(rec.item_id));
        let title = entry.map_or_else(|| format!("movie {}", rec.item_id), |e| e.title.clone());
        let genres = entry.map_or_else(String::new, |e| e.genres.join("|"));
        text.push_str(&format!("{}. {} {} — {:.4}\n", rank + 1, title, genres, rec.value));
        record.push_str(&format!(
            "rank={} item={} value={} support={}\n",
            rank + 1,
            rec.item_id,
            rec.value,
            rec.support
        ));
    }
    if recs.is_empty() {
        text.push_str("no unrated items\n");
    }
    out.body(&text, &record)
}

fn run_sweep<W: Write>(args: &SweepArgs, seed: u64, out: &mut Output<W>) -> Result<()> {
    let template = SgdConfig {
        k: args.ks.0[0],
        epochs: args.epochs,
        learning_rate: args.lr,
        regularization: args.reg,
        init_scale: args.init_scale,
        seed,
    };
    let mut pairs = data_pairs(&args.data);
    pairs.extend([
        (
            "ks",
            args.ks.0.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        ),
        ("epochs", args.epochs.to_string()),
        ("lr", args.lr.to_string()),
        ("reg", args.reg.to_string()),
        ("init_scale", args.init_scale.to_string()),
        ("max_users", args.max_users.map_or_else(|| "all".into(), |n| n.to_string())),
        ("seed", seed.to_string()),
    ]);
    out.config("sweep-k", &pairs)?;
    let (mut train, mut test) = load_split(&args.data, seed)?;
    if let Some(limit) = args.max_users {
        let mut ids: Vec<u64> = train.users().ids().to_vec();
        ids.extend(test.users().ids());
        ids.sort_unstable();
        ids.dedup();
        let cutoff = ids[(limit.min(ids.len())) - 1];
        train = train.retain_users(|u| u <= cutoff)?;
        test = test.retain_users(|u| u <= cutoff)?;
    }
    let report = sweep_k(&train, &test, &args.ks.0, &template)?;
    out.body(
        &format!("{report}RMSE spread {:.4}\n", report.rmse_spread()),
        &format!("{}spread={}\n", report.to_record(), report.rmse_spread()),
    )
}

fn run_grid<W: Write>(args: &GridArgs, seed: u64, out: &mut Output<W>) -> Result<()> {
    let activations = args
        .activations
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse::<Activation>)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if activations.is_empty() {
        bail!("--activations must name at least one activation");
    }
    let mode_name = match args.mode {
        GridMode::Global => "global",
        GridMode::PerUser => "per-user",
        GridMode::Both => "both",
    };
    out.config(
        "nn-grid",
        &[
            ("ratings", args.ratings.display().to_string()),
            ("features", args.features.display().to_string()),
            ("catalog", display(&args.catalog)),
            ("mode", mode_name.into()),
            (
                "activations",
                activations.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(","),
            ),
            (
                "architectures",
                args.architectures
                    .0
                    .iter()
                    .map(|(l, n)| format!("{l}x{n}"))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("users", args.users.to_string()),
            ("test_fraction", args.test_fraction.to_string()),
            ("mlp_epochs", args.mlp_epochs.to_string()),
            ("mlp_lr", args.mlp_lr.to_string()),
            ("batch_size", args.batch_size.to_string()),
            ("seed", seed.to_string()),
        ],
    )?;

    let ratings = read_ratings(&args.ratings)?;
    let features = read_features(&args.features)?;
    let catalog = args.catalog.as_deref().map(read_catalog).transpose()?;
    let ids = ratings.users().ids();
    let cutoff = ids[args.users.min(ids.len()) - 1];
    let subset = ratings.retain_users(|u| u <= cutoff)?;
    let (train, test) = holdout_split(&subset, args.test_fraction, seed)?;

    let modes: Vec<Mode> = match args.mode {
        GridMode::Global => vec![Mode::Global],
        GridMode::PerUser => vec![Mode::PerUser],
        GridMode::Both => vec![Mode::PerUser, Mode::Global],
    };
    let mut reports: Vec<GridReport> = Vec::new();
    for mode in modes {
        let encoder = FeatureEncoder::fit(
            &features,
            catalog.as_ref(),
            subset.users(),
            &InputField::defaults(mode),
        );
        let train_x = encoder.encode_ratings(&train, |_| true);
        let test_x = encoder.encode_ratings(&test, |_| true);
        let base = MlpConfig {
            learning_rate: args.mlp_lr,
            epochs: args.mlp_epochs,
            batch_size: args.batch_size,
            seed,
            mode,
            ..MlpConfig::default()
        };
        reports.push(grid_experiment(
            &train_x,
            &test_x,
            mode,
            &activations,
            &args.architectures.0,
            &base,
        )?);
    }

    let mut text = String::new();
    let mut record = String::new();
    for report in &reports {
        text.push_str(&format!(
            "{} mode ({} network(s) per cell)\n{report}min MSE {:.4}\n\n",
            report.mode.as_str(),
            report.networks_per_cell,
            report.min_mse()
        ));
        record.push_str(&report.to_record());
        record.push_str(&format!("mode={} min_mse={}\n", report.mode.as_str(), report.min_mse()));
    }
    if let [per_user, global] = reports.as_slice() {
        let lower = per_user.min_mse() < global.min_mse();
        text.push_str(&format!(
            "per-user min MSE {:.4} vs global min MSE {:.4}: per-user lower = {}\n",
            per_user.min_mse(),
            global.min_mse(),
            if lower { "yes" } else { "no" }
        ));
        record.push_str(&format!("per_user_lower={lower}\n"));
    }
    out.body(&text, &record)
}
