use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::write_json;
use crate::error::{CliError, CliResult};
use crate::manifest::{Experiment, RunLog, SCHEMA_VERSION};
use crate::sparse::{self, Format, SparseStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestParams {
    pub path: PathBuf,
    pub format: String,
    /// Stats JSON.
    pub out: PathBuf,
    /// Optional normalized Matrix Market copy (duplicates summed).
    pub write_mm: Option<PathBuf>,
}

impl Default for IngestParams {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            format: "matrix-market".into(),
            out: "ingest.json".into(),
            write_mm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestReport {
    pub schema_version: u32,
    pub path: PathBuf,
    pub format: String,
    #[serde(flatten)]
    pub stats: SparseStats,
}

impl Experiment for IngestParams {
    const NAME: &'static str = "ingest";

    fn seed(&self) -> u64 {
        0
    }

    fn out(&self) -> &Path {
        &self.out
    }

    fn set_out(&mut self, out: PathBuf) {
        self.out = out;
    }

    fn execute(&self, _log: &mut RunLog) -> CliResult<Vec<PathBuf>> {
        if self.path.as_os_str().is_empty() {
            return Err(CliError::Usage("ingest needs a matrix path".into()));
        }
        let format: Format = self.format.parse().map_err(CliError::Usage)?;
        let a = sparse::read_path(&self.path, format)?;
        let stats = a.stats();
        println!("m={} n={} nnz={} density={:.6}", stats.m, stats.n, stats.nnz, stats.density);
        let report = IngestReport {
            schema_version: SCHEMA_VERSION,
            path: self.path.clone(),
            format: format.to_string(),
            stats,
        };
        write_json(&self.out, &report)?;
        let mut outputs = vec![self.out.clone()];
        if let Some(mm) = &self.write_mm {
            let mut buf = Vec::new();
            sparse::write_matrix_market(&a, &mut buf).map_err(|e| CliError::io(mm, e))?;
            crate::manifest::write_file(mm, &buf)?;
            outputs.push(mm.clone());
        }
        Ok(outputs)
    }
}
