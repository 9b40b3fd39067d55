use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sqp::lincomb::{CombinationSampler, IterationCap};
use sqp::stats::Summary;
use sqp::{stream, WeightedMatrixTree};

use super::{derive_seed, parse_dist, require_nonempty, write_json, MatrixSource};
use crate::error::{CliError, CliResult};
use crate::manifest::{default_seed, Experiment, RunLog, SCHEMA_VERSION};
use crate::sparse::SparseMatrix;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LincombParams {
    #[serde(flatten)]
    pub source: MatrixSource,
    /// Numbers of rows (users) combined.
    pub n_users: Vec<usize>,
    pub trials: usize,
    pub p: Vec<f64>,
    /// Accepted samples drawn per trial.
    pub samples: usize,
    pub x_dist: String,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for LincombParams {
    fn default() -> Self {
        Self {
            source: MatrixSource::default(),
            n_users: vec![1, 10],
            trials: 100,
            p: vec![1.0, 2.0],
            samples: 1,
            x_dist: "normal:0,1".into(),
            seed: default_seed(),
            out: "lincomb.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub p: f64,
    pub mean_iterations: f64,
    pub stderr_iterations: f64,
    pub mean_exact_m: f64,
    pub stderr_exact_m: f64,
    pub mean_queries: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsersReport {
    pub n: usize,
    pub trials: usize,
    pub exponents: Vec<ExponentReport>,
    /// Mean exact `M(2)` over mean exact `M(1)`, when both were run.
    pub exact_ratio: Option<f64>,
    pub empirical_ratio: Option<f64>,
    pub redraws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LincombReport {
    pub schema_version: u32,
    pub source: String,
    pub m: usize,
    pub items: usize,
    pub nnz: usize,
    pub results: Vec<UsersReport>,
}

/// `M(p)` straight from the sparse rows: the combined rows are the columns
/// of `A`, so `Ax` accumulates over the selected rows' items.
fn sparse_m(a: &SparseMatrix, users: &[usize], x: &[f64], p: f64) -> Option<f64> {
    let mut ax = vec![0.0; a.cols()];
    let mut numer = 0.0;
    for (&u, &xu) in users.iter().zip(x) {
        let (idx, vals) = a.row(u);
        for (&j, &v) in idx.iter().zip(vals) {
            ax[j] += xu * v;
            numer += (xu * v).abs().powf(p);
        }
    }
    let denom: f64 = ax.iter().map(|v| v.abs().powf(p)).sum();
    (denom > 0.0).then(|| (users.len() as f64).powf(p - 1.0) * numer / denom)
}

impl LincombParams {
    pub fn compute(&self, _log: &mut RunLog) -> CliResult<LincombReport> {
        require_nonempty(&self.n_users, "--n-users")?;
        require_nonempty(&self.p, "--p")?;
        if self.trials == 0 || self.samples == 0 {
            return Err(CliError::Usage("--trials and --samples must be positive".into()));
        }
        let xs = parse_dist(&self.x_dist)?;
        let a = self.source.load(self.seed)?;
        let stats = a.stats();
        let mut results = Vec::new();
        for &n in &self.n_users {
            if n == 0 || n > a.rows() {
                return Err(CliError::Usage(format!("--n-users {n} outside 1..={}", a.rows())));
            }
            let seed = derive_seed(self.seed, n as u64);
            let mut iters = vec![Vec::new(); self.p.len()];
            let mut exact = vec![Vec::new(); self.p.len()];
            let mut queries = vec![Vec::new(); self.p.len()];
            let mut redraws = 0;
            let sampler_x = xs.sampler();
            for t in 0..self.trials {
                let mut rng = stream(seed, t as u64);
                let (users, x) = loop {
                    let users = rand::seq::index::sample(&mut rng, a.rows(), n).into_vec();
                    let x: Vec<f64> = (0..n).map(|_| rng.sample(&sampler_x)).collect();
                    if sparse_m(&a, &users, &x, 1.0).is_some() {
                        break (users, x);
                    }
                    redraws += 1;
                    if redraws > MAX_REDRAWS * self.trials.max(1) {
                        return Err(CliError::Data(format!("n={n}: Ax = 0 redraw cap exceeded")));
                    }
                };
                let columns: Vec<Vec<f64>> = users.iter().map(|&u| a.dense_row(u)).collect();
                for (k, &p) in self.p.iter().enumerate() {
                    let tree = WeightedMatrixTree::from_columns(&columns, p)?;
                    let sampler = CombinationSampler::new(&tree, &x, IterationCap::Auto)?;
                    for _ in 0..self.samples {
                        let r = sampler.draw(&mut rng)?;
                        iters[k].push(r.iterations as f64);
                        queries[k].push(r.queries as f64);
                    }
                    exact[k].push(sparse_m(&a, &users, &x, p).expect("checked nonzero"));
                }
            }
            let exponents: Vec<ExponentReport> = self
                .p
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let it = Summary::of(&iters[k]);
                    let ex = Summary::of(&exact[k]);
                    ExponentReport {
                        p,
                        mean_iterations: it.mean,
                        stderr_iterations: it.std_err,
                        mean_exact_m: ex.mean,
                        stderr_exact_m: ex.std_err,
                        mean_queries: Summary::of(&queries[k]).mean,
                    }
                })
                .collect();
            let find = |p: f64| exponents.iter().find(|e| e.p == p);
            let (exact_ratio, empirical_ratio) = match (find(1.0), find(2.0)) {
                (Some(a), Some(b)) => (
                    Some(b.mean_exact_m / a.mean_exact_m),
                    Some(b.mean_iterations / a.mean_iterations),
                ),
                _ => (None, None),
            };
            results.push(UsersReport {
                n,
                trials: self.trials,
                exponents,
                exact_ratio,
                empirical_ratio,
                redraws,
            });
        }
        Ok(LincombReport {
            schema_version: SCHEMA_VERSION,
            source: self.source.describe(),
            m: stats.m,
            items: stats.n,
            nnz: stats.nnz,
            results,
        })
    }
}

impl Experiment for LincombParams {
    const NAME: &'static str = "lincomb";

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
        let report = self.compute(log)?;
        write_json(&self.out, &report)?;
        for r in &report.results {
            let cells: Vec<String> = r
                .exponents
                .iter()
                .map(|e| format!("M({})={:.3}", e.p, e.mean_iterations))
                .collect();
            println!("n={}: {}", r.n, cells.join("  "));
        }
        Ok(vec![self.out.clone()])
    }
}
