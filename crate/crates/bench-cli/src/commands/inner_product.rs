use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sqp::estimators::{error_scale, estimate_inner_product};
use sqp::{stream, WeightedVectorTree};

use super::{write_json, MatrixSource};
use crate::error::{CliError, CliResult};
use crate::manifest::{default_seed, Experiment, RunLog, SCHEMA_VERSION};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerProductParams {
    #[serde(flatten)]
    pub source: MatrixSource,
    /// Exponents to run the estimator at.
    pub p: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub pairs: usize,
    pub min_overlap: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for InnerProductParams {
    fn default() -> Self {
        Self {
            source: MatrixSource::default(),
            p: vec![1.0, 2.0],
            epsilon: 0.1,
            delta: 0.1,
            pairs: 100,
            min_overlap: 50,
            seed: default_seed(),
            out: "inner_product.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEstimate {
    pub p: f64,
    pub estimate: f64,
    pub error_scale: f64,
    /// `|estimate - true| <= epsilon * error_scale`.
    pub within_bound: bool,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    /// 1-based row indices; `x` is row `a`, `y` is row `b`.
    pub row_a: usize,
    pub row_b: usize,
    pub overlap: usize,
    pub true_inner_product: f64,
    pub estimates: Vec<PairEstimate>,
    pub scale_p1: f64,
    pub scale_p2: f64,
    /// `scale_p2 / scale_p1`; above 1 when the L1 structure is tighter.
    pub scale_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerProductReport {
    pub schema_version: u32,
    pub source: String,
    pub m: usize,
    pub n: usize,
    pub nnz: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub min_overlap: usize,
    pub requested_pairs: usize,
    pub pairs: Vec<PairReport>,
    pub mean_scale_ratio: Option<f64>,
}

fn pick_pairs(a: &SparseMatrix, count: usize, min_overlap: usize, seed: u64) -> CliResult<Vec<(usize, usize, usize)>> {
    let eligible: Vec<usize> = (0..a.rows()).filter(|&i| a.row_nnz(i) >= min_overlap.max(1)).collect();
    let max_nnz = a.stats().max_row_nnz;
    if min_overlap > max_nnz || eligible.len() < 2 {
        return Err(CliError::Data(format!(
            "no eligible pairs: min overlap {min_overlap} but the largest row has {max_nnz} nonzeros"
        )));
    }
    let mut rng = stream(seed, 0);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let attempts = 1000 * count + 10_000;
    for _ in 0..attempts {
        if out.len() == count {
            break;
        }
        let i = eligible[rng.random_range(0..eligible.len())];
        let j = eligible[rng.random_range(0..eligible.len())];
        if i == j || !seen.insert((i, j)) {
            continue;
        }
        let ov = a.overlap(i, j);
        if ov >= min_overlap {
            out.push((i, j, ov));
        }
    }
    if out.is_empty() {
        return Err(CliError::Data(format!(
            "no eligible pairs: no sampled row pair shares {min_overlap} nonzero positions"
        )));
    }
    Ok(out)
}

impl InnerProductParams {
    pub fn compute(&self, log: &mut RunLog) -> CliResult<InnerProductReport> {
        let a = self.source.load(self.seed)?;
        let stats = a.stats();
        let mut report = InnerProductReport {
            schema_version: SCHEMA_VERSION,
            source: self.source.describe(),
            m: stats.m,
            n: stats.n,
            nnz: stats.nnz,
            epsilon: self.epsilon,
            delta: self.delta,
            min_overlap: self.min_overlap,
            requested_pairs: self.pairs,
            pairs: Vec::new(),
            mean_scale_ratio: None,
        };
        if self.pairs == 0 {
            return Ok(report);
        }
        let picked = pick_pairs(&a, self.pairs, self.min_overlap, self.seed)?;
        if picked.len() < self.pairs {
            log.note(format!("only {} of {} requested pairs found", picked.len(), self.pairs));
        }
        for (k, (i, j, overlap)) in picked.into_iter().enumerate() {
            let x = a.dense_row(i);
            let y = a.dense_row(j);
            let truth: f64 = x.iter().zip(&y).map(|(u, v)| u * v).sum();
            let mut rng = stream(self.seed, 1 + k as u64);
            let mut estimates = Vec::new();
            for &p in &self.p {
                let tree = WeightedVectorTree::new(&x, p)?;
                let r = estimate_inner_product(&tree, &y, self.epsilon, self.delta, &mut rng)?;
                estimates.push(PairEstimate {
                    p,
                    estimate: r.estimate,
                    error_scale: r.error_scale,
                    within_bound: (r.estimate - truth).abs() <= self.epsilon * r.error_scale,
                    samples: r.total_samples,
                });
            }
            let s1 = error_scale(&x, &y, 1.0)?;
            let s2 = error_scale(&x, &y, 2.0)?;
            report.pairs.push(PairReport {
                row_a: i + 1,
                row_b: j + 1,
                overlap,
                true_inner_product: truth,
                estimates,
                scale_p1: s1,
                scale_p2: s2,
                scale_ratio: s2 / s1,
            });
        }
        let n = report.pairs.len() as f64;
        report.mean_scale_ratio = Some(report.pairs.iter().map(|p| p.scale_ratio).sum::<f64>() / n);
        Ok(report)
    }
}

impl Experiment for InnerProductParams {
    const NAME: &'static str = "inner-product";

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
        if let Some(r) = report.mean_scale_ratio {
            println!("{} pairs, mean error-scale ratio (p=2 / p=1) = {r:.4}", report.pairs.len());
        } else {
            println!("0 pairs");
        }
        Ok(vec![self.out.clone()])
    }
}
