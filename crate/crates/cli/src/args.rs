use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmpar::{Backend, BackendMode, MmConfig};

/// Data-parallel MM solvers: NNMF, PET reconstruction and MDS.
#[derive(Parser, Debug)]
#[command(name = "mmpar", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Shared {
    /// Relative-change tolerance of the stopping rule
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub epsilon: f64,

    /// Iteration cap; reaching it is not an error
    #[arg(long, global = true, default_value_t = 100_000)]
    pub max_iters: usize,

    /// Seed for random starts and simulated data
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for the parallel backend (default: available cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = BackendKind::Serial)]
    pub backend: BackendKind,

    /// Write the objective trace as CSV
    #[arg(long, global = true)]
    pub trace_out: Option<PathBuf>,

    /// Write a JSON run manifest
    #[arg(long, global = true)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Serial,
    Parallel,
}

impl Shared {
    pub fn config(&self) -> MmConfig {
        MmConfig::default()
            .with_epsilon(self.epsilon)
            .with_max_iters(self.max_iters)
            .with_seed(self.seed)
    }

    pub fn thread_count(&self) -> usize {
        self.threads.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }

    pub fn backend_mode(&self) -> BackendMode {
        match self.backend {
            BackendKind::Serial => BackendMode::Serial,
            BackendKind::Parallel => BackendMode::Parallel {
                threads: self.thread_count(),
            },
        }
    }

    pub fn make_backend(&self) -> mmpar::Result<Backend> {
        Backend::from_mode(self.backend_mode())
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Frobenius-loss nonnegative matrix factorization
    Nnmf(NnmfArgs),
    /// Poisson-loss nonnegative matrix factorization
    NnmfPoisson(NnmfArgs),
    /// Penalized PET reconstruction
    Pet(PetArgs),
    /// Multidimensional scaling by stress majorization
    Mds(MdsArgs),
    /// MM descent on the 2-D Rosenbrock function
    Rosenbrock(RosenbrockArgs),
    /// Serial vs parallel timing over a parameter grid
    Bench(BenchArgs),
    /// Write the disk phantom image
    GenPhantom(PhantomArgs),
    /// Write the PET system matrix
    GenSysmat(SysmatArgs),
}

#[derive(Args, Debug)]
pub struct NnmfArgs {
    /// Data matrix (.mmx binary, otherwise CSV)
    #[arg(
        long,
        conflicts_with = "synthetic",
        required_unless_present = "synthetic"
    )]
    pub input: Option<PathBuf>,

    /// Random nonnegative data of the given shape instead, e.g. 200x100
    #[arg(long)]
    pub synthetic: Option<String>,

    #[arg(long)]
    pub rank: usize,

    /// Standardize rows to mean and std 0.25, then clamp to [0, 1]
    #[arg(long)]
    pub preprocess: bool,

    #[arg(long)]
    pub v_out: Option<PathBuf>,

    #[arg(long)]
    pub w_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PetArgs {
    /// Pixels per image side
    #[arg(long, default_value_t = 64)]
    pub grid: usize,

    #[arg(long, default_value_t = 64)]
    pub detectors: usize,

    /// Roughness penalty
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,

    /// Observed counts (one column); simulated from the phantom if absent
    #[arg(long)]
    pub counts: Option<PathBuf>,

    /// Precomputed system matrix with unit column sums
    #[arg(long)]
    pub system_matrix: Option<PathBuf>,

    /// Phantom scale used when simulating counts
    #[arg(long, default_value_t = 1000.0)]
    pub intensity_scale: f64,

    /// Reconstructed image as 16-bit PGM
    #[arg(long)]
    pub image_out: Option<PathBuf>,

    /// Reconstructed image as a grid x grid matrix
    #[arg(long)]
    pub lambda_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MdsArgs {
    /// Symmetric dissimilarity matrix
    #[arg(long, conflicts_with = "votes", required_unless_present = "votes")]
    pub dissimilarities: Option<PathBuf>,

    /// Vote matrix, one row per object, entries 1 / -1 / 0
    #[arg(long)]
    pub votes: Option<PathBuf>,

    /// Embedding dimension
    #[arg(long, default_value_t = 2)]
    pub dim: usize,

    /// Leave the configuration as the solver returns it
    #[arg(long)]
    pub no_anchor: bool,

    /// Coordinates, one row per object
    #[arg(long)]
    pub coords_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RosenbrockArgs {
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub x0: f64,

    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub y0: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Nnmf,
    Pet,
    Mds,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,

    /// Parameter grid: ranks, penalties or dimensions
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,

    /// NNMF data shape
    #[arg(long, default_value = "200x100")]
    pub shape: String,

    /// PET pixels per side
    #[arg(long, default_value_t = 16)]
    pub pet_grid: usize,

    #[arg(long, default_value_t = 32)]
    pub detectors: usize,

    /// MDS objects (legislators with simulated votes)
    #[arg(long, default_value_t = 60)]
    pub objects: usize,

    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 64)]
    pub grid: usize,

    #[arg(long, default_value_t = 1000.0)]
    pub intensity_scale: f64,

    /// Image as a grid x grid matrix
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SysmatArgs {
    #[arg(long, default_value_t = 64)]
    pub grid: usize,

    #[arg(long, default_value_t = 64)]
    pub detectors: usize,

    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `ROWSxCOLS`.
pub fn parse_shape(s: &str) -> anyhow::Result<(usize, usize)> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| mmpar::Error::InvalidInput(format!("shape {s:?} is not ROWSxCOLS")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| mmpar::Error::InvalidInput(format!("shape {s:?} is not ROWSxCOLS")))
    };
    Ok((parse(r)?, parse(c)?))
}
