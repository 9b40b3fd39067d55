use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqp::lincomb::{mp_curve, MpCurvePoint};

use super::{desk_trials, moment_method, parse_dist, parse_grid, require_nonempty, write_csv};
use crate::error::CliResult;
use crate::manifest::{default_seed, Experiment, RunLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpCurveParams {
    pub dist: String,
    pub m: usize,
    pub n: Vec<usize>,
    pub p_grid: String,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub full: bool,
}

impl Default for MpCurveParams {
    fn default() -> Self {
        Self {
            dist: "normal:0,1".into(),
            m: 256,
            n: vec![64],
            p_grid: "1:2:0.25".into(),
            trials: 100,
            seed: default_seed(),
            out: "mp_curve.csv".into(),
            full: false,
        }
    }
}

/// One CSV row. `theory_bias` says whether the large-`n` prediction sits
/// above (`positive`) or below (`negative`) the empirical mean by more than
/// two standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub p: f64,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    #[serde(rename = "mean_M")]
    pub mean_m: f64,
    #[serde(rename = "stderr_M")]
    pub stderr_m: f64,
    #[serde(rename = "theory_M")]
    pub theory_m: f64,
    pub theory_bias: &'static str,
    pub within_hypothesis: bool,
}

pub fn theory_bias(pt: &MpCurvePoint) -> &'static str {
    let gap = pt.theory_m - pt.mean_m;
    if gap > 2.0 * pt.stderr_m {
        "positive"
    } else if gap < -2.0 * pt.stderr_m {
        "negative"
    } else {
        "none"
    }
}

impl MpCurveParams {
    pub fn compute(&self, log: &mut RunLog) -> CliResult<Vec<CurveRow>> {
        let spec = parse_dist(&self.dist)?;
        let grid = parse_grid(&self.p_grid)?;
        require_nonempty(&self.n, "--n")?;
        if !spec.is_zero_mean() {
            log.note(format!("{spec} has nonzero mean: theory_M is outside the limit's hypothesis"));
        }
        let method = moment_method(&spec, super::derive_seed(self.seed, 0x30));
        let mut rows = Vec::new();
        for &n in &self.n {
            let cost = (self.m * n * grid.len()) as u64;
            let trials = desk_trials(self.trials, cost, self.full, &format!("n={n}"), log);
            for pt in mp_curve(self.m, n, &spec, &grid, trials, self.seed, method)? {
                rows.push(CurveRow {
                    p: pt.p,
                    n: pt.n,
                    m: pt.m,
                    trials: pt.trials,
                    mean_m: pt.mean_m,
                    stderr_m: pt.stderr_m,
                    theory_m: pt.theory_m,
                    theory_bias: theory_bias(&pt),
                    within_hypothesis: pt.within_hypothesis,
                });
            }
        }
        Ok(rows)
    }
}

impl Experiment for MpCurveParams {
    const NAME: &'static str = "mp-curve";

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
        Ok(vec![self.out.clone()])
    }
}
