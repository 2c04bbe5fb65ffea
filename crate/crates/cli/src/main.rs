mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "movierec", version, about = "Rating prediction and top-N recommendation")]
pub struct Cli {
    /// Seed for every random choice (splits, initialization, shuffling).
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Output style for reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Record,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a seeded MovieLens-shaped dataset (ratings, movies, features).
    Generate(GenerateArgs),
    /// Split a ratings file into train and test files.
    Split(SplitArgs),
    /// Train a predictor and report holdout RMSE.
    Evaluate(EvaluateArgs),
    /// Print the top-N unrated items for a user.
    Recommend(RecommendArgs),
    /// Latent-factor RMSE for several numbers of factors.
    SweepK(SweepArgs),
    /// MLP test MSE over activation × architecture grids.
    NnGrid(GridArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    UserCf,
    ItemCf,
    Content,
    Svd,
    Mlp,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Simple,
    Weighted,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GridMode {
    Global,
    PerUser,
    Both,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("test fraction must lie strictly between 0 and 1, got {v}"))
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected a positive integer, got {s:?}")),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountList(pub Vec<usize>);

fn parse_count_list(s: &str) -> Result<CountList, String> {
    let values = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse_positive)
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        Err("list must contain at least one value".into())
    } else {
        Ok(CountList(values))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Architectures(pub Vec<(usize, usize)>);

fn parse_architectures(s: &str) -> Result<Architectures, String> {
    let values = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (layers, nodes) = p
                .split_once('x')
                .ok_or_else(|| format!("architecture {p:?} is not LAYERSxNODES"))?;
            Ok((parse_positive(layers)?, parse_positive(nodes)?))
        })
        .collect::<Result<Vec<_>, String>>()?;
    if values.is_empty() {
        Err("list must contain at least one architecture".into())
    } else {
        Ok(Architectures(values))
    }
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 943)]
    pub users: usize,
    #[arg(long, default_value_t = 1682)]
    pub items: usize,
    #[arg(long, default_value_t = 100_000)]
    pub ratings: usize,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long, default_value = "0.25", value_parser = parse_fraction)]
    pub test_fraction: f64,
    /// Defaults to `<ratings stem>.train.csv` next to the input.
    #[arg(long)]
    pub train_out: Option<PathBuf>,
    /// Defaults to `<ratings stem>.test.csv` next to the input.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

/// Where ratings come from: explicit train/test files, or one file split here.
#[derive(Args, Debug)]
pub struct DataArgs {
    #[arg(long, conflicts_with_all = ["train", "test"])]
    pub ratings: Option<PathBuf>,
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    #[arg(long, default_value = "0.25", value_parser = parse_fraction)]
    pub test_fraction: f64,
    /// Binary item features (`movieId,<feature names...>`).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Titles and genres (`movieId,title,genres`).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Neighborhood size for user-cf, item-cf and content.
    #[arg(long, default_value = "30", value_parser = parse_positive)]
    pub k_neighbors: usize,
    #[arg(long, value_enum, default_value_t = WeightingArg::Weighted)]
    pub weighting: WeightingArg,
    /// Aggregate centered neighbor ratings and add the target's mean back.
    #[arg(long)]
    pub restore_means: bool,
    /// Latent factors for svd.
    #[arg(long, default_value = "25", value_parser = parse_positive)]
    pub k: usize,
    #[arg(long, default_value = "50", value_parser = parse_positive)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub reg: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    /// Load a saved svd model instead of training one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Save the trained svd model.
    #[arg(long)]
    pub save_model: Option<PathBuf>,
    #[command(flatten)]
    pub mlp: MlpArgs,
}

#[derive(Args, Debug, Clone)]
pub struct MlpArgs {
    #[arg(long, default_value = "4", value_parser = parse_positive)]
    pub hidden_layers: usize,
    #[arg(long, default_value = "12", value_parser = parse_positive)]
    pub hidden_nodes: usize,
    #[arg(long, default_value = "tanh")]
    pub activation: String,
    #[arg(long, default_value = "200", value_parser = parse_positive)]
    pub mlp_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub mlp_lr: f64,
    #[arg(long, default_value = "16", value_parser = parse_positive)]
    pub batch_size: usize,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct RecommendArgs {
    /// All ratings of this file are used for training.
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub user: u64,
    #[arg(long, default_value = "10", value_parser = parse_positive)]
    pub n: usize,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "3,25,75,99", value_parser = parse_count_list)]
    pub ks: CountList,
    #[arg(long, default_value = "50", value_parser = parse_positive)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub reg: f64,
    #[arg(long, default_value_t = 0.1)]
    pub init_scale: f64,
    /// Keep only the users with the smallest ids.
    #[arg(long, value_parser = parse_positive)]
    pub max_users: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GridMode::Both)]
    pub mode: GridMode,
    #[arg(long, default_value = "relu,logistic,identity,tanh")]
    pub activations: String,
    #[arg(long, default_value = "4x12,8x12,4x6", value_parser = parse_architectures)]
    pub architectures: Architectures,
    /// Number of users (smallest ids) in the experiment.
    #[arg(long, default_value = "9", value_parser = parse_positive)]
    pub users: usize,
    #[arg(long, default_value = "0.25", value_parser = parse_fraction)]
    pub test_fraction: f64,
    #[arg(long, default_value = "200", value_parser = parse_positive)]
    pub mlp_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub mlp_lr: f64,
    #[arg(long, default_value = "16", value_parser = parse_positive)]
    pub batch_size: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match commands::run(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsers() {
        assert_eq!(parse_count_list("3,25, 75,99").unwrap().0, vec![3, 25, 75, 99]);
        assert!(parse_count_list("").is_err());
        assert!(parse_count_list("3,0").is_err());
        assert_eq!(parse_architectures("4x12,4x6").unwrap().0, vec![(4, 12), (4, 6)]);
        assert!(parse_architectures("4-12").is_err());
        assert!(parse_fraction("1.5").is_err());
        assert_eq!(parse_fraction("0.25").unwrap(), 0.25);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
