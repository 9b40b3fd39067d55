//! Experiment manifests: every command records its resolved parameters,
//! seed, version and outputs next to the outputs, and a manifest can be
//! replayed to regenerate them byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = concat!("sqp-bench ", env!("CARGO_PKG_VERSION"));
pub const SEED_ENV: &str = "SQP_SEED";
const BUILTIN_SEED: u64 = 1;

/// `$SQP_SEED` when set to an integer, else a fixed builtin.
pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(BUILTIN_SEED)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub command: String,
    pub params: serde_json::Value,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Notes collected while a command runs; each is echoed to stderr.
#[derive(Debug, Default)]
pub struct RunLog {
    pub notes: Vec<String>,
}

impl RunLog {
    pub fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("note: {msg}");
        self.notes.push(msg);
    }
}

pub trait Experiment: Serialize + DeserializeOwned + Clone {
    const NAME: &'static str;

    fn seed(&self) -> u64;

    /// Primary output path; the manifest is written beside it.
    fn out(&self) -> &Path;

    fn set_out(&mut self, out: PathBuf);

    /// Runs the command and returns every file written.
    fn execute(&self, log: &mut RunLog) -> CliResult<Vec<PathBuf>>;
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn run<E: Experiment>(params: &E) -> CliResult<ExperimentManifest> {
    let started_at = now();
    let mut log = RunLog::default();
    let outputs = params.execute(&mut log)?;
    let manifest = ExperimentManifest {
        schema_version: SCHEMA_VERSION,
        command: E::NAME.to_string(),
        params: serde_json::to_value(params).map_err(|e| CliError::Invariant(e.to_string()))?,
        seed: params.seed(),
        version: TOOL_VERSION.to_string(),
        started_at,
        finished_at: now(),
        outputs,
        notes: log.notes,
    };
    let path = manifest_path(params.out());
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Invariant(e.to_string()))?;
    write_file(&path, text.as_bytes())?;
    Ok(manifest)
}

/// Reads a JSON config file into a parameter set; absent fields keep their
/// defaults.
pub fn load_config<P: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<P> {
    let Some(path) = path else {
        return Ok(P::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}

pub fn read_manifest(path: &Path) -> CliResult<ExperimentManifest> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let m: ExperimentManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("manifest {}: {e}", path.display())))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(CliError::Data(format!(
            "manifest schema version {} is not supported (expected {SCHEMA_VERSION})",
            m.schema_version
        )));
    }
    Ok(m)
}

/// Re-runs `manifest` with its recorded parameters. With `out_dir`, outputs
/// go there under their original file names.
pub fn replay_as<E: Experiment>(manifest: &ExperimentManifest, out_dir: Option<&Path>) -> CliResult<ExperimentManifest> {
    let mut params: E = serde_json::from_value(manifest.params.clone())
        .map_err(|e| CliError::Data(format!("manifest parameters for {}: {e}", E::NAME)))?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let name = params
            .out()
            .file_name()
            .ok_or_else(|| CliError::Data("recorded output path has no file name".into()))?
            .to_owned();
        params.set_out(dir.join(name));
    }
    run(&params)
}
