//! Rejection sampling from `D_{Ax}^(p)` given SQ_p(A) and query access to
//! `x`, together with the exact expected iteration count `M(p)` and the
//! large-`n` limit it follows for i.i.d. random inputs.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::ptree::{abs_pow, check_exponent, WeightedMatrixTree, WeightedVectorTree};
use crate::query::QueryAccess;
use crate::randkit::{gaussian_abs_moment, stream, DistributionSpec, MomentProfile};
use crate::stats::Summary;

/// Row-wise accumulator of the two sums in
/// `M(p) = n^(p-1) sum_i sum_j |x_j A_ij|^p / sum_i |sum_j x_j A_ij|^p`
/// for several exponents at once. Rows can be streamed without storing `A`.
#[derive(Debug, Clone)]
pub struct MAccumulator {
    n: usize,
    exponents: Vec<f64>,
    numer: Vec<f64>,
    denom: Vec<f64>,
}

impl MAccumulator {
    pub fn new(n: usize, exponents: &[f64]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        for &p in exponents {
            check_exponent(p)?;
        }
        Ok(Self {
            n,
            exponents: exponents.to_vec(),
            numer: vec![0.0; exponents.len()],
            denom: vec![0.0; exponents.len()],
        })
    }

    /// Adds row `a` (length `n`) under coefficients `x`.
    pub fn push_row(&mut self, a: &[f64], x: &[f64]) {
        debug_assert_eq!(a.len(), self.n);
        debug_assert_eq!(x.len(), self.n);
        let mut s = 0.0;
        for (aj, xj) in a.iter().zip(x) {
            s += aj * xj;
        }
        for (k, &p) in self.exponents.iter().enumerate() {
            let t: f64 = if p == 1.0 {
                a.iter().zip(x).map(|(aj, xj)| (aj * xj).abs()).sum()
            } else if p == 2.0 {
                a.iter().zip(x).map(|(aj, xj)| (aj * xj) * (aj * xj)).sum()
            } else {
                a.iter().zip(x).map(|(aj, xj)| abs_pow(aj * xj, p)).sum()
            };
            self.numer[k] += t;
            self.denom[k] += abs_pow(s, p);
        }
    }

    /// `M(p)` per exponent, in the order given at construction.
    pub fn finish(&self) -> Result<Vec<f64>> {
        let n = self.n as f64;
        self.exponents
            .iter()
            .zip(self.numer.iter().zip(&self.denom))
            .map(|(&p, (&num, &den))| {
                if den > 0.0 {
                    Ok(n.powf(p - 1.0) * num / den)
                } else {
                    Err(Error::ZeroCombination)
                }
            })
            .collect()
    }
}

/// Closed-form `M(p)` for a dense `A` (m x n) and `x` (length n).
pub fn exact_m(a: &DenseMatrix, x: &[f64], p: f64) -> Result<f64> {
    if x.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            got: x.len(),
        });
    }
    let mut acc = MAccumulator::new(a.cols(), &[p])?;
    for i in 0..a.rows() {
        acc.push_row(a.row(i), x);
    }
    Ok(acc.finish()?[0])
}

/// `D_{Ax}^(p)` by direct normalization.
pub fn combination_distribution(a: &DenseMatrix, x: &[f64], p: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    let ax = a.mul_vec(x)?;
    let w: Vec<f64> = ax.iter().map(|v| abs_pow(*v, p)).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroCombination);
    }
    Ok(w.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RejectionSampleResult {
    /// Row index drawn from `D_{Ax}^(p)`.
    pub index: usize,
    /// Proposals consumed, at least 1.
    pub iterations: u64,
    /// Entry queries consumed by the proposals: `2n` per iteration (row `i`
    /// of `A` and all of `x`), excluding the one-off setup.
    pub queries: u64,
}

/// Bound on proposals per sample before giving up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IterationCap {
    /// `10^4 * max(1, M(p))`, with `M(p)` computed once in `O(mn)`.
    Auto,
    Fixed(u64),
}

/// Reusable rejection sampler. The proposal draws `j` with probability
/// proportional to `|x_j|^p ||A^(j)||_p^p`, then `i ~ D_{A^(j)}^(p)`, and
/// accepts with `|sum_j x_j A_ij|^p / (n^(p-1) sum_j |x_j A_ij|^p)`.
pub struct CombinationSampler<'a, Q: ?Sized> {
    matrix: &'a WeightedMatrixTree,
    x: &'a Q,
    proposal: WeightedVectorTree,
    scale: f64,
    cap: u64,
    setup_queries: u64,
}

impl<'a, Q: QueryAccess + ?Sized> CombinationSampler<'a, Q> {
    pub fn new(matrix: &'a WeightedMatrixTree, x: &'a Q, cap: IterationCap) -> Result<Self> {
        let n = matrix.cols();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if !(matrix.pnorm_power() > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        let p = matrix.p();
        let weights: Vec<f64> = (0..n)
            .map(|j| abs_pow(x.query(j), p) * matrix.column_norm_tree().weight_unchecked(j))
            .collect();
        let proposal = WeightedVectorTree::from_weights(&weights, 1.0)?;
        if !(proposal.pnorm_power() > 0.0) {
            return Err(Error::ZeroCombination);
        }
        let mut setup_queries = 2 * n as u64;
        let cap = match cap {
            IterationCap::Fixed(c) => c.max(1),
            IterationCap::Auto => {
                let xs = x.to_vec();
                let mut acc = MAccumulator::new(n, &[p])?;
                let mut row = vec![0.0; n];
                for i in 0..matrix.rows() {
                    for (j, r) in row.iter_mut().enumerate() {
                        *r = matrix.entry_unchecked(i, j);
                    }
                    acc.push_row(&row, &xs);
                }
                setup_queries += (matrix.rows() * n) as u64;
                let m = acc.finish()?[0];
                (1e4 * m.max(1.0)).ceil() as u64
            }
        };
        Ok(Self {
            matrix,
            x,
            proposal,
            scale: (n as f64).powf(p - 1.0),
            cap,
            setup_queries,
        })
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// Queries spent building the proposal (and the automatic cap).
    pub fn setup_queries(&self) -> u64 {
        self.setup_queries
    }

    /// Acceptance probability for row `i`; 0 for a row outside the support
    /// of every weighted column.
    pub fn acceptance_ratio(&self, i: usize) -> f64 {
        let p = self.matrix.p();
        let (mut s, mut t) = (0.0, 0.0);
        for j in 0..self.matrix.cols() {
            let v = self.x.query(j) * self.matrix.entry_unchecked(i, j);
            s += v;
            t += abs_pow(v, p);
        }
        if t == 0.0 {
            return 0.0;
        }
        // Hölder bounds this by 1 up to rounding.
        (abs_pow(s, p) / (self.scale * t)).min(1.0)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<RejectionSampleResult> {
        let per_iteration = 2 * self.matrix.cols() as u64;
        for iteration in 1..=self.cap {
            let j = self.proposal.sample(rng)?;
            let i = self.matrix.sample_row(j, rng)?;
            let r = self.acceptance_ratio(i);
            if r >= 1.0 || rng.random::<f64>() < r {
                return Ok(RejectionSampleResult {
                    index: i,
                    iterations: iteration,
                    queries: iteration * per_iteration,
                });
            }
        }
        Err(Error::IterationCapExceeded { cap: self.cap })
    }
}

/// One draw from `D_{Ax}^(p)` with the automatic iteration cap.
pub fn sample_from_combination<Q, R>(matrix: &WeightedMatrixTree, x: &Q, rng: &mut R) -> Result<RejectionSampleResult>
where
    Q: QueryAccess + ?Sized,
    R: Rng + ?Sized,
{
    CombinationSampler::new(matrix, x, IterationCap::Auto)?.draw(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpReport {
    pub p: f64,
    pub m: usize,
    pub n: usize,
    pub m_exact: f64,
    /// Mean proposals per accepted sample, when the sampler was run.
    pub m_empirical: Option<f64>,
    pub trials: usize,
}

/// Runs the sampler `trials` times on one instance and compares the mean
/// iteration count with the exact value.
pub fn measure_iterations(a: &DenseMatrix, x: &[f64], p: f64, trials: usize, seed: u64) -> Result<(MpReport, Summary)> {
    let tree = WeightedMatrixTree::from_dense(a, p)?;
    let sampler = CombinationSampler::new(&tree, x, IterationCap::Auto)?;
    let mut rng = stream(seed, 0);
    let mut its = Vec::with_capacity(trials);
    for _ in 0..trials {
        its.push(sampler.draw(&mut rng)?.iterations as f64);
    }
    let summary = Summary::of(&its);
    Ok((
        MpReport {
            p,
            m: a.rows(),
            n: a.cols(),
            m_exact: exact_m(a, x, p)?,
            m_empirical: Some(summary.mean),
            trials,
        },
        summary,
    ))
}

/// Large-`n` limit of `M(p) / n^(p/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryLimit {
    pub value: f64,
    /// False for nonzero-mean families, where the limit is empirical only.
    pub within_hypothesis: bool,
}

/// `mu_p^2 / mu~_p` when `A` and `x` share the profiled distribution.
pub fn theoretical_limit(profile: &MomentProfile) -> Result<TheoryLimit> {
    mixed_limit(profile, profile)
}

/// Limit for `A` i.i.d. from one family and `x` from another:
/// `mu_{A,p} mu_{x,p} / E|N(0, s_A^2 s_x^2)|^p`. Reduces to
/// [`theoretical_limit`] when the families coincide.
pub fn mixed_limit(a: &MomentProfile, x: &MomentProfile) -> Result<TheoryLimit> {
    if a.p != x.p {
        return Err(Error::InvalidParameter(format!("profiles at different p: {} vs {}", a.p, x.p)));
    }
    if !(a.sigma2 > 0.0 && x.sigma2 > 0.0) {
        return Err(Error::InvalidParameter("degenerate family: variance is zero".into()));
    }
    Ok(TheoryLimit {
        value: a.mu_p * x.mu_p / gaussian_abs_moment(a.sigma2 * x.sigma2, a.p),
        within_hypothesis: a.zero_mean && x.zero_mean,
    })
}

const MAX_REDRAWS_PER_TRIAL: usize = 100;

/// Draws `x` then `A` row by row from stream `(seed, trial)` and returns
/// `M(p)` for each exponent plus the number of degenerate redraws.
fn m_trial(
    m: usize,
    n: usize,
    spec_a: &DistributionSpec,
    spec_x: &DistributionSpec,
    exponents: &[f64],
    seed: u64,
    trial: u64,
) -> Result<(Vec<f64>, usize)> {
    let mut rng = stream(seed, trial);
    let sa = spec_a.sampler();
    let sx = spec_x.sampler();
    let mut x = vec![0.0; n];
    let mut row = vec![0.0; n];
    for redraws in 0..MAX_REDRAWS_PER_TRIAL {
        for v in x.iter_mut() {
            *v = rng.sample(&sx);
        }
        let mut acc = MAccumulator::new(n, exponents)?;
        for _ in 0..m {
            for v in row.iter_mut() {
                *v = rng.sample(&sa);
            }
            acc.push_row(&row, &x);
        }
        match acc.finish() {
            Ok(ms) => return Ok((ms, redraws)),
            Err(Error::ZeroCombination) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ZeroCombination)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioExperiment {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub spec_a: DistributionSpec,
    pub spec_x: DistributionSpec,
    pub p1: MpReport,
    pub p2: MpReport,
    pub m1: Summary,
    pub m2: Summary,
    /// Summary of the per-trial `M(2) / M(1)`.
    pub ratio: Summary,
    /// Trials whose first draw had `Ax = 0` and was redrawn.
    pub redraws: usize,
    /// False when `A`'s family has nonzero mean.
    pub within_hypothesis: bool,
}

/// Fresh `A` (m x n, from `spec_a`) and `x` (from `spec_x`) per trial,
/// recording `M(1)`, `M(2)` and their ratio.
pub fn run_ratio_experiment(
    m: usize,
    n: usize,
    spec_a: &DistributionSpec,
    spec_x: &DistributionSpec,
    trials: usize,
    seed: u64,
) -> Result<RatioExperiment> {
    if m == 0 || n == 0 || trials == 0 {
        return Err(Error::InvalidParameter("m, n and trials must be positive".into()));
    }
    let mut v1 = Vec::with_capacity(trials);
    let mut v2 = Vec::with_capacity(trials);
    let mut ratio = Vec::with_capacity(trials);
    let mut redraws = 0;
    for t in 0..trials {
        let (ms, r) = m_trial(m, n, spec_a, spec_x, &[1.0, 2.0], seed, t as u64)?;
        redraws += r;
        v1.push(ms[0]);
        v2.push(ms[1]);
        ratio.push(ms[1] / ms[0]);
    }
    let (m1, m2) = (Summary::of(&v1), Summary::of(&v2));
    let report = |p, s: &Summary| MpReport {
        p,
        m,
        n,
        m_exact: s.mean,
        m_empirical: None,
        trials,
    };
    Ok(RatioExperiment {
        m,
        n,
        trials,
        spec_a: *spec_a,
        spec_x: *spec_x,
        p1: report(1.0, &m1),
        p2: report(2.0, &m2),
        m1,
        m2,
        ratio: Summary::of(&ratio),
        redraws,
        within_hypothesis: spec_a.is_zero_mean(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpCurvePoint {
    pub p: f64,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub mean_m: f64,
    pub stderr_m: f64,
    /// `n^(p/2) mu_p^2 / mu~_p`.
    pub theory_m: f64,
    pub within_hypothesis: bool,
}

/// Mean `M(p)` over `trials` draws of `A` and `x` i.i.d. from `spec`, for
/// each `p` in the grid, next to the large-`n` prediction.
pub fn mp_curve(
    m: usize,
    n: usize,
    spec: &DistributionSpec,
    p_grid: &[f64],
    trials: usize,
    seed: u64,
    moment_method: crate::randkit::MomentMethod,
) -> Result<Vec<MpCurvePoint>> {
    if m == 0 || n == 0 || trials == 0 || p_grid.is_empty() {
        return Err(Error::InvalidParameter("m, n, trials and the p grid must be non-empty".into()));
    }
    let mut per_p = vec![Vec::with_capacity(trials); p_grid.len()];
    for t in 0..trials {
        let (ms, _) = m_trial(m, n, spec, spec, p_grid, seed, t as u64)?;
        for (k, v) in ms.into_iter().enumerate() {
            per_p[k].push(v);
        }
    }
    p_grid
        .iter()
        .zip(per_p)
        .map(|(&p, values)| {
            let s = Summary::of(&values);
            let profile = crate::randkit::moment_profile(spec, p, moment_method)?;
            let limit = theoretical_limit(&profile)?;
            Ok(MpCurvePoint {
                p,
                n,
                m,
                trials,
                mean_m: s.mean,
                stderr_m: s.std_err,
                theory_m: (n as f64).powf(p / 2.0) * limit.value,
                within_hypothesis: limit.within_hypothesis,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randkit::{moment_profile, MomentMethod};
    use crate::stats;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn counterexample() -> (DenseMatrix, [f64; 2]) {
        (DenseMatrix::from_rows(&[[1.0, 1.0], [2.0, -2.0]]).unwrap(), [1.0, -1.0])
    }

    #[test]
    fn counterexample_values() {
        let (a, x) = counterexample();
        assert!((exact_m(&a, &x, 1.0).unwrap() - 1.5).abs() <= 1e-12);
        assert!((exact_m(&a, &x, 2.0).unwrap() - 1.25).abs() <= 1e-12);
        assert_eq!(combination_distribution(&a, &x, 2.0).unwrap(), vec![0.0, 1.0]);
        let tree = WeightedMatrixTree::from_dense(&a, 2.0).unwrap();
        let mut rng = stream(4, 0);
        for _ in 0..200 {
            assert_eq!(sample_from_combination(&tree, &x, &mut rng).unwrap().index, 1);
        }
    }

    #[test]
    fn sign_aligned_m1_is_one() {
        let x = [1.0, -2.0, 0.5];
        // each row is +-sign(x) with arbitrary magnitudes
        let a = DenseMatrix::from_rows(&[[1.0, -3.0, 2.0], [-0.5, 1.0, -4.0], [2.0, -2.0, 2.0]]).unwrap();
        assert_relative_eq!(exact_m(&a, &x, 1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert!(exact_m(&a, &x, 2.0).unwrap() >= 1.0);
    }

    #[test]
    fn single_nonzero_column() {
        let n = 5;
        let mut a = DenseMatrix::zeros(3, n);
        for (i, v) in [1.0, -2.0, 3.0].into_iter().enumerate() {
            a.set(i, 2, v);
        }
        let x = [0.3, -1.0, 2.0, 4.0, 1.0];
        assert_relative_eq!(exact_m(&a, &x, 2.0).unwrap(), n as f64, max_relative = 1e-14);
    }

    #[test]
    fn zero_combination_errors() {
        let a = DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let x = [1.0, -1.0];
        assert_eq!(exact_m(&a, &x, 1.0).unwrap_err(), Error::ZeroCombination);
        let tree = WeightedMatrixTree::from_dense(&a, 1.0).unwrap();
        let mut rng = stream(0, 0);
        assert_eq!(
            sample_from_combination(&tree, &x, &mut rng).unwrap_err(),
            Error::ZeroCombination
        );
        let s = CombinationSampler::new(&tree, &x, IterationCap::Fixed(50)).unwrap();
        assert_eq!(s.draw(&mut rng).unwrap_err(), Error::IterationCapExceeded { cap: 50 });
        let zero = WeightedMatrixTree::from_dense(&DenseMatrix::zeros(2, 2), 1.0).unwrap();
        assert!(CombinationSampler::new(&zero, &x, IterationCap::Auto).is_err());
    }

    #[test]
    fn single_column_accepts_immediately() {
        let a = DenseMatrix::from_rows(&[[1.0], [-3.0], [0.0]]).unwrap();
        for p in [1.0, 2.0, 2.5] {
            let tree = WeightedMatrixTree::from_dense(&a, p).unwrap();
            let mut rng = stream(1, 0);
            for _ in 0..50 {
                let r = sample_from_combination(&tree, &[2.0], &mut rng).unwrap();
                assert_eq!(r.iterations, 1);
                assert_eq!(r.queries, 2);
            }
        }
    }

    #[test]
    fn disjoint_supports_accept_at_p1() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]]).unwrap();
        let tree = WeightedMatrixTree::from_dense(&a, 1.0).unwrap();
        let x = [1.0, -1.0];
        let s = CombinationSampler::new(&tree, &x, IterationCap::Auto).unwrap();
        for i in 0..3 {
            assert_eq!(s.acceptance_ratio(i), 1.0);
        }
        assert_relative_eq!(exact_m(&a, &x, 1.0).unwrap(), 1.0);
        assert_relative_eq!(exact_m(&a, &x, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn accepted_distribution_and_iterations() {
        let (a, x) = counterexample();
        let (report, summary) = measure_iterations(&a, &x, 1.0, 20_000, 9).unwrap();
        assert!((report.m_empirical.unwrap() - 1.5).abs() < 3.0 * summary.std_err + 1e-12);

        let a = DenseMatrix::from_rows(&[[1.0, -0.5, 2.0], [0.3, 1.0, -1.0], [-2.0, 0.7, 0.1]]).unwrap();
        let x = [0.8, -1.2, 0.4];
        for p in [1.0, 2.0] {
            let tree = WeightedMatrixTree::from_dense(&a, p).unwrap();
            let s = CombinationSampler::new(&tree, &x, IterationCap::Auto).unwrap();
            let mut rng = stream(3, p as u64);
            let mut c = [0u64; 3];
            for _ in 0..100_000 {
                c[s.draw(&mut rng).unwrap().index] += 1;
            }
            let target = combination_distribution(&a, &x, p).unwrap();
            assert!(stats::total_variation(&stats::empirical(&c), &target) < 0.01);
        }
    }

    #[test]
    fn normal_limits() {
        let normal = DistributionSpec::standard_normal();
        let l2 = theoretical_limit(&moment_profile(&normal, 2.0, MomentMethod::ClosedForm).unwrap()).unwrap();
        assert_relative_eq!(l2.value, 1.0, max_relative = 1e-12);
        let l1 = theoretical_limit(&moment_profile(&normal, 1.0, MomentMethod::ClosedForm).unwrap()).unwrap();
        assert_relative_eq!(l1.value, (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-12);
        let implied = 1024.0 / (l1.value * 32.0);
        assert!((implied - 40.1).abs() < 0.05, "{implied}");

        let shifted = DistributionSpec::normal(1.0, 1.0).unwrap();
        let prof = moment_profile(&shifted, 2.0, MomentMethod::MonteCarlo { samples: 20_000, seed: 1 }).unwrap();
        assert!(!theoretical_limit(&prof).unwrap().within_hypothesis);
    }

    #[test]
    fn mixed_limit_uniform_with_normal_coefficients() {
        let u = DistributionSpec::uniform(-1.0, 1.0).unwrap();
        let g = DistributionSpec::standard_normal();
        let prof = |s, p| moment_profile(s, p, MomentMethod::ClosedForm).unwrap();
        let l1 = mixed_limit(&prof(&u, 1.0), &prof(&g, 1.0)).unwrap().value;
        let l2 = mixed_limit(&prof(&u, 2.0), &prof(&g, 2.0)).unwrap().value;
        assert_relative_eq!(l1, 3f64.sqrt() / 2.0, max_relative = 1e-12);
        assert_relative_eq!(l2, 1.0, max_relative = 1e-12);
        let implied = 2048.0 * l2 / (2048f64.sqrt() * l1);
        assert!((implied - 52.3).abs() < 0.1, "{implied}");
    }

    #[test]
    fn ratio_experiment_small() {
        let g = DistributionSpec::standard_normal();
        let r = run_ratio_experiment(64, 2, &g, &g, 300, 11).unwrap();
        assert!((r.ratio.mean - 1.58).abs() < 0.15 * 1.58, "{}", r.ratio.mean);
        assert!(r.m1.mean >= 1.0 && r.m2.mean >= 1.0);
        let again = run_ratio_experiment(64, 2, &g, &g, 300, 11).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn ratio_experiment_counts_redraws() {
        let point = DistributionSpec::constant(0.0).unwrap();
        let g = DistributionSpec::standard_normal();
        assert_eq!(
            run_ratio_experiment(2, 2, &point, &g, 1, 0).unwrap_err(),
            Error::ZeroCombination
        );
    }

    #[test]
    fn curve_is_nondecreasing() {
        let g = DistributionSpec::standard_normal();
        let grid = [1.0, 1.25, 1.5, 1.75, 2.0];
        let pts = mp_curve(128, 16, &g, &grid, 30, 5, MomentMethod::ClosedForm).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].mean_m >= w[0].mean_m);
        }
        assert_relative_eq!(pts[4].theory_m, 16.0, max_relative = 1e-12);
    }

    fn instance(m: usize, n: usize) -> impl Strategy<Value = (DenseMatrix, Vec<f64>)> {
        (
            prop::collection::vec(-3.0f64..3.0, m * n),
            prop::collection::vec(-3.0f64..3.0, n),
        )
            .prop_map(move |(a, x)| (DenseMatrix::from_row_major(m, n, a).unwrap(), x))
    }

    proptest! {
        #[test]
        fn acceptance_ratio_bounded(
            (a, x) in (1usize..6, 1usize..6).prop_flat_map(|(m, n)| instance(m, n)),
            p in 1.0f64..3.0,
        ) {
            let tree = WeightedMatrixTree::from_dense(&a, p).unwrap();
            if let Ok(s) = CombinationSampler::new(&tree, &x, IterationCap::Fixed(1)) {
                let n = a.cols() as f64;
                for i in 0..a.rows() {
                    let (mut sum, mut t) = (0.0, 0.0);
                    for j in 0..a.cols() {
                        let v = a.get(i, j) * x[j];
                        sum += v;
                        t += v.abs().powf(p);
                    }
                    let raw = sum.abs().powf(p) / (n.powf(p - 1.0) * t);
                    prop_assert!(t == 0.0 || raw <= 1.0 + 1e-12);
                    prop_assert!(s.acceptance_ratio(i) <= 1.0);
                }
            }
            if let Ok(mp) = exact_m(&a, &x, p) {
                prop_assert!(mp >= 1.0 - 1e-12);
            }
        }
    }
}
