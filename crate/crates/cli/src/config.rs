use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nngp_info::DatasetVariant;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "nngp-info",
    version,
    about = "Information content and PAC-Bayes bounds for relu NNGP classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Estimate C0 and C1 for one dataset.
    Info,
    /// PAC-Bayes error bounds from both C0 and the C1 upper bound.
    Bound,
    /// Grid over variants, sizes and seeds, with per-cell aggregates.
    Sweep,
    /// Compare the estimator with rejection sampling on a small problem.
    Oracle,
    /// Weight-counting bound with hidden-unit permutation symmetry.
    Symmetry,
    /// Summary statistics of the kernel matrix.
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    pub fn suffix(self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }

    pub fn convert(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// Kernel matrix of a small dataset.
    Dataset,
    /// Unit-variance 2x2 kernel with correlation `--rho`, labels (+1, +1).
    Bivariate,
    /// Identity kernel of size `--n`, all labels +1.
    Identity,
}

fn parse_variant(s: &str) -> Result<DatasetVariant, String> {
    s.parse().map_err(|e: nngp_info::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Dataset variant(s): binary_digits, decimal_digits, random_labels, synthetic.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_variant)]
    pub variant: Option<Vec<DatasetVariant>>,

    /// Training-set size.
    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Strictly increasing training-set sizes for `sweep`.
    #[arg(long, global = true)]
    pub n_list: Option<String>,

    /// Network depth L; the kernel applies the arccosine step L - 1 times.
    #[arg(long, global = true, default_value_t = 7)]
    pub depth: usize,

    /// Monte-Carlo samples M.
    #[arg(long, global = true, default_value_t = nngp_info::orthant::DEFAULT_SAMPLES)]
    pub samples: usize,

    /// PAC-Bayes failure probability.
    #[arg(long, global = true, default_value_t = nngp_info::pac_bayes::DEFAULT_DELTA)]
    pub delta: f64,

    /// Seed for single-run commands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Seeds for `sweep`.
    #[arg(long, global = true, default_value = "0,1,2")]
    pub seeds: String,

    #[arg(
        long,
        global = true,
        default_value = "data/mnist/train-images-idx3-ubyte"
    )]
    pub mnist_images: PathBuf,

    #[arg(
        long,
        global = true,
        default_value = "data/mnist/train-labels-idx1-ubyte"
    )]
    pub mnist_labels: PathBuf,

    /// Add this multiple of the identity to every kernel matrix.
    #[arg(long, global = true, default_value_t = 0.0)]
    pub jitter: f64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[arg(long, global = true, value_enum, default_value_t = Units::Nats)]
    pub units: Units,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Within-class cosine for the synthetic variant.
    #[arg(long, global = true, default_value_t = 0.9)]
    pub intra_cos: f64,

    /// Input dimension for synthetic data and the symmetry bound.
    #[arg(long, global = true, default_value_t = 784)]
    pub d0: usize,

    #[arg(long, global = true, value_enum, default_value_t = Fixture::Dataset)]
    pub fixture: Fixture,

    /// Correlation of the bivariate oracle fixture.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub rho: f64,

    /// Rejection-sampling trials for `oracle`.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub trials: u64,

    /// Hidden widths for `symmetry`.
    #[arg(long, global = true, value_delimiter = ',', default_value = "512,512")]
    pub widths: Vec<usize>,

    #[arg(long, global = true, default_value_t = 32)]
    pub weight_bits: u32,

    /// `symmetry`: also estimate C0 on the selected dataset.
    #[arg(long, global = true)]
    pub with_c0: bool,

    /// `bound`: use this information value instead of estimating it.
    #[arg(long, global = true)]
    pub info_nats: Option<f64>,
}

fn parse_sweep_list<T: std::str::FromStr>(flag: &str, text: &str) -> CliResult<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse().map_err(|_| {
                CliError::new(
                    "INVALID_SWEEP",
                    format!("{flag} entry {t:?} is not a non-negative integer"),
                )
            })
        })
        .collect()
}

/// Fully resolved settings, embedded in every emitted record.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub variants: Vec<DatasetVariant>,
    pub mnist_images: PathBuf,
    pub mnist_labels: PathBuf,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub depth: usize,
    pub samples: usize,
    pub delta: f64,
    pub jitter: f64,
    pub format: Format,
    pub units: Units,
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetryConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub info_nats: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SyntheticConfig {
    pub intra_class_cos: f64,
    pub d0: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleConfig {
    pub fixture: Fixture,
    pub rho: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryConfig {
    pub d0: usize,
    pub widths: Vec<usize>,
    pub weight_bits: u32,
    pub with_c0: bool,
}

impl RunConfig {
    pub fn resolve(command: Command, o: Options) -> CliResult<Self> {
        if !(o.delta > 0.0 && o.delta < 1.0) {
            return Err(CliError::invalid(format!(
                "--delta must lie in (0, 1), got {}",
                o.delta
            )));
        }
        if !(o.jitter >= 0.0 && o.jitter.is_finite()) {
            return Err(CliError::invalid(format!(
                "--jitter must be a finite value >= 0, got {}",
                o.jitter
            )));
        }
        if o.samples == 0 {
            return Err(CliError::invalid("--samples must be positive"));
        }
        if o.depth < 2 {
            return Err(CliError::invalid(format!(
                "--depth must be at least 2, got {}",
                o.depth
            )));
        }

        let variants = match (command, o.variant) {
            (_, Some(v)) if v.is_empty() => {
                return Err(CliError::invalid("--variant list is empty"))
            }
            (Command::Sweep, Some(mut v)) => {
                v.sort();
                v.dedup();
                v
            }
            (_, Some(v)) if v.len() > 1 => {
                return Err(CliError::invalid("only `sweep` accepts several variants"));
            }
            (_, Some(v)) => v,
            (Command::Sweep, None) => DatasetVariant::MNIST.to_vec(),
            (_, None) => vec![DatasetVariant::DecimalDigits],
        };

        let (n_list, seeds) = if command == Command::Sweep {
            let n_list = match o.n_list.as_deref() {
                None => vec![100, 200, 500],
                Some(text) => parse_sweep_list("--n-list", text)?,
            };
            if n_list.is_empty() {
                return Err(CliError::new("INVALID_SWEEP", "--n-list is empty"));
            }
            if n_list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::new(
                    "INVALID_SWEEP",
                    format!("--n-list must be strictly increasing, got {n_list:?}"),
                ));
            }
            if n_list[0] < 2 {
                return Err(CliError::new("INVALID_N", "sweep sizes must be at least 2"));
            }
            let seeds: Vec<u64> = parse_sweep_list("--seeds", &o.seeds)?;
            if seeds.is_empty() {
                return Err(CliError::new("INVALID_SWEEP", "--seeds is empty"));
            }
            (n_list, seeds)
        } else {
            let default_n = match (command, o.fixture) {
                (Command::Oracle, Fixture::Bivariate) => 2,
                (Command::Oracle, _) => 10,
                _ => 100,
            };
            let n = o.n.unwrap_or(default_n);
            let min_n = if command == Command::Bound { 2 } else { 1 };
            if n < min_n {
                return Err(CliError::new(
                    "INVALID_N",
                    format!("n must be at least {min_n}, got {n}"),
                ));
            }
            (vec![n], vec![o.seed])
        };

        let synthetic = variants
            .contains(&DatasetVariant::Synthetic)
            .then_some(SyntheticConfig {
                intra_class_cos: o.intra_cos,
                d0: o.d0,
            });
        let oracle = (command == Command::Oracle).then_some(OracleConfig {
            fixture: o.fixture,
            rho: o.rho,
            trials: o.trials,
        });
        let symmetry = (command == Command::Symmetry).then(|| SymmetryConfig {
            d0: o.d0,
            widths: o.widths.clone(),
            weight_bits: o.weight_bits,
            with_c0: o.with_c0,
        });
        let info_nats = if command == Command::Bound {
            o.info_nats
        } else {
            None
        };
        if let Some(i) = info_nats {
            if !(i >= 0.0 && i.is_finite()) {
                return Err(CliError::invalid(format!(
                    "--info-nats must be a finite value >= 0, got {i}"
                )));
            }
        }

        Ok(Self {
            command,
            variants,
            mnist_images: o.mnist_images,
            mnist_labels: o.mnist_labels,
            n_list,
            seeds,
            depth: o.depth,
            samples: o.samples,
            delta: o.delta,
            jitter: o.jitter,
            format: o.format,
            units: o.units,
            out: o.out,
            synthetic,
            oracle,
            symmetry,
            info_nats,
        })
    }

    /// The single size of a non-sweep command.
    pub fn n(&self) -> usize {
        self.n_list[0]
    }

    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }

    pub fn variant(&self) -> DatasetVariant {
        self.variants[0]
    }
}
