//! Importance-sampling inner-product estimation on SQ_p structures.
//!
//! For `i ~ D_x^(p)` the sample `||x||_p^p * sgn(x_i) |x_i|^(1-p) * y_i` is an
//! unbiased estimate of `<x, y>` whose second moment is
//! `||x||_p^p <x^(2-p), y^(2)>`. Samples are aggregated by median of means.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ptree::{abs_pow, WeightedMatrixTree, WeightedVectorTree};
use crate::query::QueryAccess;
use crate::randkit::{stream, DistributionSpec};
use crate::stats::Summary;

/// `ceil(x)`, ignoring representation noise of order 1e-12 relative so that
/// e.g. `9 / (2 * 0.1^2)` yields 450.
fn ceil_count(x: f64) -> usize {
    (x * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Median of `ceil(6 ln(1/delta))` means of `ceil(9 / (2 eps^2))` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MedianOfMeans {
    pub groups: usize,
    pub samples_per_group: usize,
}

impl MedianOfMeans {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        check_unit_interval("epsilon", epsilon)?;
        check_unit_interval("delta", delta)?;
        Ok(Self {
            groups: ceil_count(6.0 * (1.0 / delta).ln()),
            samples_per_group: ceil_count(9.0 / (2.0 * epsilon * epsilon)),
        })
    }

    pub fn total_samples(&self) -> usize {
        self.groups * self.samples_per_group
    }

    /// Runs the scheme over `draw`, groups in order. Even group counts take
    /// the lower median.
    pub fn run(&self, mut draw: impl FnMut() -> Result<f64>) -> Result<f64> {
        let mut means = Vec::with_capacity(self.groups);
        for _ in 0..self.groups {
            let mut sum = 0.0;
            for _ in 0..self.samples_per_group {
                sum += draw()?;
            }
            means.push(sum / self.samples_per_group as f64);
        }
        Ok(lower_median(&mut means))
    }
}

fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// The additive error is at most `epsilon * error_scale` with
    /// probability at least `1 - delta`.
    pub error_scale: f64,
    pub groups: usize,
    pub samples_per_group: usize,
    pub total_samples: usize,
}

/// Single-sample estimator of `<x, y>` from SQ_p(x) and Q(y).
pub struct InnerProductSampler<'a, Q: ?Sized> {
    tree: &'a WeightedVectorTree,
    y: &'a Q,
    /// `||x||_p^p`; for p = 1 each sample is `+-norm * y_i`, no division.
    norm_power: f64,
}

impl<'a, Q: QueryAccess + ?Sized> InnerProductSampler<'a, Q> {
    pub fn new(tree: &'a WeightedVectorTree, y: &'a Q) -> Result<Self> {
        if y.len() != tree.len() {
            return Err(Error::DimensionMismatch {
                expected: tree.len(),
                got: y.len(),
            });
        }
        let norm_power = tree.pnorm_power();
        if !(norm_power > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self { tree, y, norm_power })
    }

    /// The sample value for index `i`, `||x||_p^p sgn(x_i) |x_i|^(1-p) y_i`.
    /// Zero for an index with `x_i = 0`, which is never drawn.
    #[inline]
    pub fn value_at(&self, i: usize) -> f64 {
        let w = self.tree.weight_unchecked(i);
        if w == 0.0 {
            return 0.0;
        }
        if self.tree.p() == 1.0 {
            f64::from(self.tree.signs()[i]) * self.norm_power * self.y.query(i)
        } else {
            // sgn(x_i)|x_i|^(1-p) = x_i / |x_i|^p
            self.norm_power * self.tree.entry_unchecked(i) / w * self.y.query(i)
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let i = self.tree.sample(rng)?;
        Ok(self.value_at(i))
    }
}

/// Estimates `<x, y>` to additive error `epsilon * error_scale(x, y, p)`
/// with probability at least `1 - delta`.
pub fn estimate_inner_product<Q, R>(
    tree: &WeightedVectorTree,
    y: &Q,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<EstimateReport>
where
    Q: QueryAccess + ?Sized,
    R: Rng + ?Sized,
{
    let mom = MedianOfMeans::new(epsilon, delta)?;
    let sampler = InnerProductSampler::new(tree, y)?;
    let estimate = mom.run(|| sampler.draw(rng))?;
    let scale = error_scale(&tree.to_values(), &y.to_vec(), tree.p())?;
    Ok(EstimateReport {
        estimate,
        epsilon,
        delta,
        error_scale: scale,
        groups: mom.groups,
        samples_per_group: mom.samples_per_group,
        total_samples: mom.total_samples(),
    })
}

/// `||x||_p^(p/2) * sqrt(sum_i |x_i|^(2-p) y_i^2)` where indices with
/// `x_i = 0` contribute nothing. For `p > 2` such an index with `y_i != 0`
/// makes the scale undefined.
pub fn error_scale(x: &[f64], y: &[f64], p: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)?;
    let mut norm_power = 0.0;
    let mut weighted = 0.0;
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        if xi == 0.0 {
            if p > 2.0 && yi != 0.0 {
                return Err(Error::UndefinedScale { index: i });
            }
            continue;
        }
        norm_power += abs_pow(xi, p);
        weighted += xi.abs().powf(2.0 - p) * yi * yi;
    }
    if norm_power == 0.0 {
        return Err(Error::EmptyDistribution);
    }
    Ok(norm_power.powf(0.5) * weighted.sqrt())
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|a| !a.is_finite()) {
        Some(index) => Err(Error::NonFinite { index, value: v[index] }),
        None => Ok(()),
    }
}

/// `f(p) = ||x||_p^p * ||x||_{2-p}^{2-p}` over the nonzero entries of `x`.
/// Minimized at `p = 1`.
pub fn f_curve(x: &[f64], p: f64) -> Result<f64> {
    check_finite(x)?;
    if !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be finite, got {p}")));
    }
    let (mut a, mut b) = (0.0, 0.0);
    for &v in x.iter().filter(|v| **v != 0.0) {
        let m = v.abs();
        a += m.powf(p);
        b += m.powf(2.0 - p);
    }
    if a == 0.0 {
        return Err(Error::EmptyDistribution);
    }
    Ok(a * b)
}

/// `E[X^2] / (E|X|)^2`: the average sample-count ratio of SQ_2 to SQ_1 for
/// inner products with i.i.d. entries drawn from `spec`.
pub fn improvement_factor(spec: &DistributionSpec) -> Result<f64> {
    let m1 = spec.abs_mean();
    if m1 == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{spec} has E|X| = 0; the improvement factor is undefined"
        )));
    }
    Ok(spec.second_moment() / (m1 * m1))
}

/// Monte Carlo estimate of the averaged estimator variance
/// `E_x[v f(p) - E_y <x, y>^2]` at `p = 1` and `p = 2`, with `x` drawn i.i.d.
/// from `spec` and `E_y` evaluated in closed form for `y` i.i.d. from the
/// same family (`v = E[y_i^2]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AveragedVariance {
    pub n: usize,
    pub trials: usize,
    pub p1: Summary,
    pub p2: Summary,
    /// `p2.mean / p1.mean`.
    pub ratio: f64,
}

pub fn averaged_variance(spec: &DistributionSpec, n: usize, trials: usize, seed: u64) -> Result<AveragedVariance> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidParameter("n and trials must be positive".into()));
    }
    let second = spec.second_moment();
    let var_y = spec.variance();
    let mean_y = spec.mean();
    let sampler = spec.sampler();
    let mut rng = stream(seed, 0);
    let mut v1 = Vec::with_capacity(trials);
    let mut v2 = Vec::with_capacity(trials);
    let mut x = vec![0.0; n];
    for _ in 0..trials {
        for xi in x.iter_mut() {
            *xi = rng.sample(&sampler);
        }
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        let l2sq: f64 = x.iter().map(|v| v * v).sum();
        let sum: f64 = x.iter().sum();
        let nnz = x.iter().filter(|v| **v != 0.0).count() as f64;
        let ey_inner_sq = var_y * l2sq + mean_y * mean_y * sum * sum;
        v1.push(second * l1 * l1 - ey_inner_sq);
        v2.push(second * l2sq * nnz - ey_inner_sq);
    }
    let p1 = Summary::of(&v1);
    let p2 = Summary::of(&v2);
    Ok(AveragedVariance {
        n,
        trials,
        p1,
        p2,
        ratio: p2.mean / p1.mean,
    })
}

/// Single-sample estimator of `x^T A y` from SQ_p(A), Q(x) and Q(y): draw
/// `(i, j)` with probability `|A_ij|^p / sum |A|^p` and return
/// `sum |A|^p * sgn(A_ij) |A_ij|^(1-p) * x_i * y_j`.
pub struct TraceSampler<'a, Qx: ?Sized, Qy: ?Sized> {
    matrix: &'a WeightedMatrixTree,
    x: &'a Qx,
    y: &'a Qy,
    total: f64,
}

impl<'a, Qx: QueryAccess + ?Sized, Qy: QueryAccess + ?Sized> TraceSampler<'a, Qx, Qy> {
    pub fn new(matrix: &'a WeightedMatrixTree, x: &'a Qx, y: &'a Qy) -> Result<Self> {
        if x.len() != matrix.rows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                got: x.len(),
            });
        }
        if y.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                got: y.len(),
            });
        }
        let total = matrix.pnorm_power();
        if !(total > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        Ok(Self { matrix, x, y, total })
    }

    #[inline]
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        let column = &self.matrix.column(j).expect("column in range");
        let w = column.weight_unchecked(i);
        if w == 0.0 {
            return 0.0;
        }
        self.total * column.entry_unchecked(i) / w * self.x.query(i) * self.y.query(j)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let (i, j) = self.matrix.sample_entry(rng)?;
        Ok(self.value_at(i, j))
    }

    /// `sqrt(sum |A|^p * sum_{A_ij != 0} |A_ij|^(2-p) x_i^2 y_j^2)`, the
    /// square root of the sample second moment.
    pub fn error_scale(&self) -> f64 {
        let p = self.matrix.p();
        let mut weighted = 0.0;
        for j in 0..self.matrix.cols() {
            let yj = self.y.query(j);
            for i in 0..self.matrix.rows() {
                let a = self.matrix.entry_unchecked(i, j);
                if a != 0.0 {
                    let xi = self.x.query(i);
                    weighted += a.abs().powf(2.0 - p) * xi * xi * yj * yj;
                }
            }
        }
        (self.total * weighted).sqrt()
    }
}

/// Estimates `x^T A y` with the same median-of-means aggregation as
/// [`estimate_inner_product`].
pub fn estimate_trace_inner_product<Qx, Qy, R>(
    matrix: &WeightedMatrixTree,
    x: &Qx,
    y: &Qy,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<EstimateReport>
where
    Qx: QueryAccess + ?Sized,
    Qy: QueryAccess + ?Sized,
    R: Rng + ?Sized,
{
    let mom = MedianOfMeans::new(epsilon, delta)?;
    let sampler = TraceSampler::new(matrix, x, y)?;
    let estimate = mom.run(|| sampler.draw(rng))?;
    Ok(EstimateReport {
        estimate,
        epsilon,
        delta,
        error_scale: sampler.error_scale(),
        groups: mom.groups,
        samples_per_group: mom.samples_per_group,
        total_samples: mom.total_samples(),
    })
}
