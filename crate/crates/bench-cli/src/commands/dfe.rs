use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqp::dfe::{bound_comparison, run_dfe_seeded, well_conditioned_check, BoundComparison, DfeRun, NoiseModel, Norm, TargetState, WellConditioned};
use sqp::stats::{ks_two_sample, KsResult};

use super::write_json;
use crate::error::{CliError, CliResult};
use crate::manifest::{default_seed, write_file, Experiment, RunLog, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DfeParams {
    pub target: String,
    pub noise: String,
    pub epsilon: f64,
    pub delta: f64,
    /// `l1`, `l2` or `both`.
    pub norm: String,
    pub runs: usize,
    pub seed: u64,
    /// JSON lines, one run per line; the aggregate goes to
    /// `<stem>.aggregate.json`.
    pub out: PathBuf,
}

impl Default for DfeParams {
    fn default() -> Self {
        Self {
            target: "w:5".into(),
            noise: "depolarizing:0.1".into(),
            epsilon: 0.05,
            delta: 0.1,
            norm: "l1".into(),
            runs: 20,
            seed: default_seed(),
            out: "dfe.jsonl".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSummary {
    pub norm: Norm,
    pub runs: usize,
    /// Fraction of runs with `|estimate - F| <= 2 epsilon`.
    pub coverage: f64,
    pub mean_estimate: f64,
    pub mean_total_measurements: f64,
    pub max_total_measurements: u64,
    /// Whether every run stayed within the L1 closed-form budget bound
    /// (W targets under L1 only).
    pub l1_bound_held: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfeAggregate {
    pub schema_version: u32,
    pub target: TargetState,
    pub noise: NoiseModel,
    pub epsilon: f64,
    pub delta: f64,
    pub true_fidelity: f64,
    pub norms: Vec<NormSummary>,
    pub bounds: Option<BoundComparison>,
    pub well_conditioned: WellConditioned,
    /// Two-sample test of the L1 and L2 estimate distributions.
    pub l1_vs_l2: Option<KsResult>,
}

pub struct DfeOutcome {
    pub runs: Vec<DfeRun>,
    pub aggregate: DfeAggregate,
}

impl DfeParams {
    fn norms(&self) -> CliResult<Vec<Norm>> {
        if self.norm.eq_ignore_ascii_case("both") {
            return Ok(vec![Norm::L1, Norm::L2]);
        }
        Ok(vec![self.norm.parse().map_err(|e: sqp::Error| CliError::Usage(e.to_string()))?])
    }

    pub fn compute(&self, _log: &mut RunLog) -> CliResult<DfeOutcome> {
        let target: TargetState = self.target.parse()?;
        let noise: NoiseModel = self.noise.parse()?;
        let norms = self.norms()?;
        if self.runs == 0 {
            return Err(CliError::Usage("--runs must be positive".into()));
        }
        let bounds = match target {
            TargetState::W(n) => Some(bound_comparison(n, self.epsilon, self.delta)?),
            TargetState::Ghz(_) => None,
        };
        let fidelity = noise.fidelity(&target);
        let mut runs = Vec::new();
        let mut summaries = Vec::new();
        let mut estimates = Vec::new();
        for &norm in &norms {
            let mut est = Vec::with_capacity(self.runs);
            let mut covered = 0usize;
            let mut totals = Vec::with_capacity(self.runs);
            for r in 0..self.runs {
                let run = run_dfe_seeded(&target, &noise, self.epsilon, self.delta, norm, self.seed.wrapping_add(r as u64))?;
                if (run.estimate - run.true_fidelity).abs() <= 2.0 * self.epsilon {
                    covered += 1;
                }
                est.push(run.estimate);
                totals.push(run.total_measurements);
                runs.push(run);
            }
            let l1_bound_held = match (norm, &bounds) {
                (Norm::L1, Some(b)) => Some(totals.iter().all(|&t| t as f64 <= b.l1_bound)),
                _ => None,
            };
            summaries.push(NormSummary {
                norm,
                runs: self.runs,
                coverage: covered as f64 / self.runs as f64,
                mean_estimate: est.iter().sum::<f64>() / self.runs as f64,
                mean_total_measurements: totals.iter().sum::<u64>() as f64 / self.runs as f64,
                max_total_measurements: totals.iter().copied().max().unwrap_or(0),
                l1_bound_held,
            });
            estimates.push(est);
        }
        let l1_vs_l2 = (estimates.len() == 2).then(|| ks_two_sample(&estimates[0], &estimates[1]));
        Ok(DfeOutcome {
            runs,
            aggregate: DfeAggregate {
                schema_version: SCHEMA_VERSION,
                target,
                noise,
                epsilon: self.epsilon,
                delta: self.delta,
                true_fidelity: fidelity,
                norms: summaries,
                bounds,
                well_conditioned: well_conditioned_check(&target),
                l1_vs_l2,
            },
        })
    }

    pub fn aggregate_path(&self) -> PathBuf {
        self.out.with_extension("aggregate.json")
    }
}

impl Experiment for DfeParams {
    const NAME: &'static str = "dfe";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn out(&self) -> &Path {
        &self.out
    }

    fn set_out(&mut self, out: PathBuf) {
        self.out = out;
    }

    fn execute(&self, log: &mut RunLog) -> CliResult<Vec<PathBuf>> {
        let outcome = self.compute(log)?;
        let mut lines = String::new();
        for run in &outcome.runs {
            lines.push_str(&serde_json::to_string(run).map_err(|e| CliError::Invariant(e.to_string()))?);
            lines.push('\n');
        }
        write_file(&self.out, lines.as_bytes())?;
        let agg = self.aggregate_path();
        write_json(&agg, &outcome.aggregate)?;
        for s in &outcome.aggregate.norms {
            println!(
                "{} {}: coverage {:.3}, mean estimate {:.5} (F = {:.6}), mean N {:.0}",
                outcome.aggregate.target, s.norm, s.coverage, s.mean_estimate, outcome.aggregate.true_fidelity, s.mean_total_measurements
            );
        }
        Ok(vec![self.out.clone(), agg])
    }
}
