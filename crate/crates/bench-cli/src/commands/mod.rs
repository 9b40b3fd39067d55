pub mod dfe;
pub mod ingest;
pub mod inner_product;
pub mod lincomb;
pub mod mp_curve;
pub mod ratio_table;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqp::randkit::MIN_MONTE_CARLO_SAMPLES;
use sqp::{DistributionSpec, MomentMethod};

use crate::error::{CliError, CliResult};
use crate::manifest::{self, ExperimentManifest, RunLog};
use crate::sparse::{self, Format, SparseMatrix, SyntheticSpec};

/// Element operations (`m * n * trials`) allowed per experiment cell unless
/// `--full` is given.
pub const DESK_BUDGET: u64 = 200_000_000;

/// Samples for Monte Carlo moments when a family has no closed form.
pub const MOMENT_SAMPLES: u64 = 1_000_000;

pub fn parse_dist(s: &str) -> CliResult<DistributionSpec> {
    s.parse().map_err(|e: sqp::Error| CliError::Usage(e.to_string()))
}

/// Closed-form moments where the family has them, otherwise Monte Carlo.
pub fn moment_method(spec: &DistributionSpec, seed: u64) -> MomentMethod {
    if spec.abs_moment_closed_form(1.5).is_some() {
        MomentMethod::ClosedForm
    } else {
        MomentMethod::MonteCarlo {
            samples: MOMENT_SAMPLES.max(MIN_MONTE_CARLO_SAMPLES),
            seed,
        }
    }
}

/// Seed for an independent sub-experiment, so its stream ids never collide
/// with the parent's.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    (seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_mul(0xD1B5_4A32_D192_ED03) ^ tag
}

/// Trials that fit the desk budget for a cell of `cost` element operations
/// per trial.
pub fn desk_trials(trials: usize, cost: u64, full: bool, what: &str, log: &mut RunLog) -> usize {
    if full || cost == 0 {
        return trials;
    }
    let fit = (DESK_BUDGET / cost).max(1) as usize;
    if fit < trials {
        log.note(format!(
            "{what}: trials reduced from {trials} to {fit} to stay within the desk budget; \
             standard errors widen by about {:.2}x (pass --full to lift)",
            (trials as f64 / fit as f64).sqrt()
        ));
        fit
    } else {
        trials
    }
}

/// `a:b:step` (inclusive) or a comma list.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("p grid {s:?} must be start:stop:step or a comma list"));
    let grid: Vec<f64> = if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<CliResult<_>>()?;
        let [a, b, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || b < a {
            return Err(bad());
        }
        let k = ((b - a) / step + 1e-9).floor() as usize;
        (0..=k).map(|i| a + i as f64 * step).collect()
    } else {
        s.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    if grid.is_empty() {
        return Err(bad());
    }
    if let Some(p) = grid.iter().find(|p| !(p.is_finite() && **p >= 1.0)) {
        return Err(CliError::Usage(format!("exponent {p} in the grid is below 1")));
    }
    Ok(grid)
}

pub fn require_nonempty<T>(v: &[T], flag: &str) -> CliResult<()> {
    if v.is_empty() {
        Err(CliError::Usage(format!("{flag} needs at least one value")))
    } else {
        Ok(())
    }
}

/// Where a sparse matrix comes from: a file or a synthetic draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatrixSource {
    pub matrix: Option<PathBuf>,
    pub format: String,
    pub synthetic: Option<String>,
    /// Value distribution for synthetic entries.
    pub values: String,
}

impl Default for MatrixSource {
    fn default() -> Self {
        Self {
            matrix: None,
            format: "matrix-market".into(),
            synthetic: None,
            values: "uniform:1,5".into(),
        }
    }
}

impl MatrixSource {
    pub fn load(&self, seed: u64) -> CliResult<SparseMatrix> {
        match (&self.matrix, &self.synthetic) {
            (Some(path), None) => {
                let format: Format = self.format.parse().map_err(CliError::Usage)?;
                sparse::read_path(path, format)
            }
            (None, Some(spec)) => {
                let spec: SyntheticSpec = spec.parse().map_err(CliError::Usage)?;
                let values = parse_dist(&self.values)?;
                Ok(sparse::synthetic(&spec, &values, derive_seed(seed, 0x5A)))
            }
            (Some(_), Some(_)) => Err(CliError::Usage("give either --matrix or --synthetic, not both".into())),
            (None, None) => Err(CliError::Usage("one of --matrix or --synthetic is required".into())),
        }
    }

    pub fn describe(&self) -> String {
        match (&self.matrix, &self.synthetic) {
            (Some(p), _) => format!("{} ({})", p.display(), self.format),
            (None, Some(s)) => format!("synthetic {s} values {}", self.values),
            _ => "none".into(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invariant(e.to_string()))?;
    text.push('\n');
    manifest::write_file(path, text.as_bytes())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Invariant(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Invariant(e.to_string()))?;
    manifest::write_file(path, &bytes)
}

/// Runs the command recorded in a manifest.
pub fn replay(path: &Path, out_dir: Option<&Path>) -> CliResult<ExperimentManifest> {
    let m = manifest::read_manifest(path)?;
    use manifest::{replay_as, Experiment};
    match m.command.as_str() {
        mp_curve::MpCurveParams::NAME => replay_as::<mp_curve::MpCurveParams>(&m, out_dir),
        ratio_table::RatioTableParams::NAME => replay_as::<ratio_table::RatioTableParams>(&m, out_dir),
        inner_product::InnerProductParams::NAME => replay_as::<inner_product::InnerProductParams>(&m, out_dir),
        lincomb::LincombParams::NAME => replay_as::<lincomb::LincombParams>(&m, out_dir),
        dfe::DfeParams::NAME => replay_as::<dfe::DfeParams>(&m, out_dir),
        ingest::IngestParams::NAME => replay_as::<ingest::IngestParams>(&m, out_dir),
        other => Err(CliError::Data(format!("manifest names unknown command {other:?}"))),
    }
}
