use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::dfe::DfeParams;
use crate::commands::ingest::IngestParams;
use crate::commands::inner_product::InnerProductParams;
use crate::commands::lincomb::LincombParams;
use crate::commands::mp_curve::MpCurveParams;
use crate::commands::ratio_table::RatioTableParams;
use crate::commands::{self, MatrixSource};
use crate::error::{CliResult, EXIT_OK};
use crate::manifest::{self, load_config, ExperimentManifest};

/// Experiments on Lp-norm sample-query structures. Parameters resolve as
/// flags, then `--config` JSON, then defaults; `SQP_SEED` sets the default
/// seed.
#[derive(Debug, Parser)]
#[command(name = "sqp-bench", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean M(p) over a grid of exponents, with the large-n prediction (CSV).
    MpCurve(MpCurveArgs),
    /// Mean M(2)/M(1) per distribution and n (CSV plus a printed grid).
    RatioTable(RatioTableArgs),
    /// Inner-product estimates and error scales on row pairs of a sparse matrix (JSON).
    InnerProduct(InnerProductArgs),
    /// Rejection sampling from combinations of matrix rows (JSON).
    Lincomb(LincombArgs),
    /// Direct fidelity estimation runs (JSON lines plus an aggregate).
    Dfe(DfeArgs),
    /// Validate a sparse matrix file and print its shape.
    Ingest(IngestArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct MpCurveArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Entry distribution for both A and x, e.g. normal:0,1.
    #[arg(long)]
    pub dist: Option<String>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n: Option<Vec<usize>>,
    /// start:stop:step or a comma list.
    #[arg(long)]
    pub p_grid: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Lift the desk-scale trial budget.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct RatioTableArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Entry distributions for A, e.g. --dists normal:0,1 uniform:-1,1.
    #[arg(long, num_args = 1..)]
    pub dists: Option<Vec<String>>,
    #[arg(long)]
    pub x_dist: Option<String>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Sparse matrix file.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// matrix-market or csv-coo.
    #[arg(long)]
    pub format: Option<String>,
    /// Synthetic sparse matrix, ROWSxCOLS:DENSITY.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Value distribution for synthetic entries.
    #[arg(long)]
    pub values: Option<String>,
}

#[derive(Debug, Args)]
pub struct InnerProductArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub min_overlap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LincombArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n_users: Option<Vec<usize>>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub x_dist: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DfeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// w:N or ghz:N.
    #[arg(long)]
    pub target: Option<String>,
    /// none or depolarizing:LAMBDA.
    #[arg(long)]
    pub noise: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// l1, l2 or both.
    #[arg(long)]
    pub norm: Option<String>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub path: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a normalized Matrix Market copy here.
    #[arg(long)]
    pub write_mm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs here instead of their recorded locations.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($params:expr, $flags:expr; $($field:ident),* $(,)?) => {
        $( if let Some(v) = $flags.$field.clone() { $params.$field = v; } )*
    };
}

fn overlay_source(s: &mut MatrixSource, a: &SourceArgs) {
    if a.matrix.is_some() {
        s.matrix = a.matrix.clone();
    }
    if a.synthetic.is_some() {
        s.synthetic = a.synthetic.clone();
    }
    overlay!(s, a; format, values);
}

impl MpCurveArgs {
    pub fn resolve(&self) -> CliResult<MpCurveParams> {
        let mut p: MpCurveParams = load_config(self.config.as_deref())?;
        overlay!(p, self; dist, m, n, p_grid, trials, seed, out);
        p.full |= self.full;
        Ok(p)
    }
}

impl RatioTableArgs {
    pub fn resolve(&self) -> CliResult<RatioTableParams> {
        let mut p: RatioTableParams = load_config(self.config.as_deref())?;
        overlay!(p, self; dists, x_dist, m, n_list, trials, seed, out);
        p.full |= self.full;
        Ok(p)
    }
}

impl InnerProductArgs {
    pub fn resolve(&self) -> CliResult<InnerProductParams> {
        let mut p: InnerProductParams = load_config(self.config.as_deref())?;
        overlay_source(&mut p.source, &self.source);
        overlay!(p, self; p, epsilon, delta, pairs, min_overlap, seed, out);
        Ok(p)
    }
}

impl LincombArgs {
    pub fn resolve(&self) -> CliResult<LincombParams> {
        let mut p: LincombParams = load_config(self.config.as_deref())?;
        overlay_source(&mut p.source, &self.source);
        overlay!(p, self; n_users, trials, p, samples, x_dist, seed, out);
        Ok(p)
    }
}

impl DfeArgs {
    pub fn resolve(&self) -> CliResult<DfeParams> {
        let mut p: DfeParams = load_config(self.config.as_deref())?;
        overlay!(p, self; target, noise, epsilon, delta, norm, runs, seed, out);
        Ok(p)
    }
}

impl IngestArgs {
    pub fn resolve(&self) -> CliResult<IngestParams> {
        let mut p: IngestParams = load_config(self.config.as_deref())?;
        p.path = self.path.clone();
        overlay!(p, self; format, out);
        if self.write_mm.is_some() {
            p.write_mm = self.write_mm.clone();
        }
        Ok(p)
    }
}

pub fn dispatch(cli: &Cli) -> CliResult<ExperimentManifest> {
    match &cli.command {
        Command::MpCurve(a) => manifest::run(&a.resolve()?),
        Command::RatioTable(a) => manifest::run(&a.resolve()?),
        Command::InnerProduct(a) => manifest::run(&a.resolve()?),
        Command::Lincomb(a) => manifest::run(&a.resolve()?),
        Command::Dfe(a) => manifest::run(&a.resolve()?),
        Command::Ingest(a) => manifest::run(&a.resolve()?),
        Command::Replay(a) => commands::replay(&a.manifest, a.out_dir.as_deref()),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            eprintln!("sqp-bench: {e}");
            e.exit_code()
        }
    }
}
