use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqp::lincomb::{mixed_limit, run_ratio_experiment};
use sqp::randkit::moment_profile;
use sqp::DistributionSpec;

use super::{derive_seed, desk_trials, moment_method, parse_dist, require_nonempty, write_csv};
use crate::error::CliResult;
use crate::manifest::{default_seed, Experiment, RunLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatioTableParams {
    pub dists: Vec<String>,
    /// Coefficient distribution; standard normal in the reference protocol.
    pub x_dist: String,
    pub m: usize,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub full: bool,
}

impl Default for RatioTableParams {
    fn default() -> Self {
        Self {
            dists: vec!["normal:0,1".into()],
            x_dist: "normal:0,1".into(),
            m: 256,
            n_list: vec![2, 8, 32, 128],
            trials: 100,
            seed: default_seed(),
            out: "ratio_table.csv".into(),
            full: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub dist: String,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub mean_m1: f64,
    pub stderr_m1: f64,
    pub mean_m2: f64,
    pub stderr_m2: f64,
    pub mean_ratio: f64,
    pub stderr_ratio: f64,
    /// `sqrt(n)` times the ratio of the large-`n` limits; empty outside the
    /// limit's hypothesis (nonzero-mean entries).
    pub theory_ratio: Option<f64>,
    pub redraws: usize,
    pub within_hypothesis: bool,
}

fn limit_ratio(a: &DistributionSpec, x: &DistributionSpec, seed: u64) -> CliResult<f64> {
    let prof = |s: &DistributionSpec, p, tag| moment_profile(s, p, moment_method(s, derive_seed(seed, tag)));
    let l1 = mixed_limit(&prof(a, 1.0, 1)?, &prof(x, 1.0, 2)?)?;
    let l2 = mixed_limit(&prof(a, 2.0, 3)?, &prof(x, 2.0, 4)?)?;
    Ok(l2.value / l1.value)
}

impl RatioTableParams {
    pub fn compute(&self, log: &mut RunLog) -> CliResult<Vec<RatioRow>> {
        require_nonempty(&self.dists, "--dists")?;
        require_nonempty(&self.n_list, "--n-list")?;
        let x = parse_dist(&self.x_dist)?;
        let mut rows = Vec::new();
        for (d, name) in self.dists.iter().enumerate() {
            let a = parse_dist(name)?;
            let theory = if a.is_zero_mean() {
                Some(limit_ratio(&a, &x, derive_seed(self.seed, 0x40 + d as u64))?)
            } else {
                log.note(format!("{a}: nonzero mean, outside theory, empirical only"));
                None
            };
            for &n in &self.n_list {
                let trials = desk_trials(self.trials, (self.m * n) as u64, self.full, &format!("{a} n={n}"), log);
                let seed = derive_seed(self.seed, ((d as u64) << 32) | n as u64);
                let r = run_ratio_experiment(self.m, n, &a, &x, trials, seed)?;
                if r.redraws > 0 {
                    log.note(format!("{a} n={n}: {} degenerate draws with Ax = 0 redrawn", r.redraws));
                }
                rows.push(RatioRow {
                    dist: a.to_string(),
                    n,
                    m: self.m,
                    trials,
                    mean_m1: r.m1.mean,
                    stderr_m1: r.m1.std_err,
                    mean_m2: r.m2.mean,
                    stderr_m2: r.m2.std_err,
                    mean_ratio: r.ratio.mean,
                    stderr_ratio: r.ratio.std_err,
                    theory_ratio: theory.map(|t| t * (n as f64).sqrt()),
                    redraws: r.redraws,
                    within_hypothesis: r.within_hypothesis,
                });
            }
        }
        Ok(rows)
    }
}

/// Distribution rows by `n` columns of `ratio (stderr)`.
pub fn render_grid(rows: &[RatioRow], n_list: &[usize]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<20}", "dist \\ n");
    for n in n_list {
        let _ = write!(out, "{n:>18}");
    }
    out.push('\n');
    let mut dists: Vec<&str> = Vec::new();
    for r in rows {
        if !dists.contains(&r.dist.as_str()) {
            dists.push(&r.dist);
        }
    }
    for d in dists {
        let _ = write!(out, "{d:<20}");
        for n in n_list {
            match rows.iter().find(|r| r.dist == d && r.n == *n) {
                Some(r) => {
                    let _ = write!(out, "{:>18}", format!("{:.2} ({:.2})", r.mean_ratio, r.stderr_ratio));
                }
                None => {
                    let _ = write!(out, "{:>18}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

impl Experiment for RatioTableParams {
    const NAME: &'static str = "ratio-table";

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
        let rows = self.compute(log)?;
        write_csv(&self.out, &rows)?;
        print!("{}", render_grid(&rows, &self.n_list));
        Ok(vec![self.out.clone()])
    }
}
