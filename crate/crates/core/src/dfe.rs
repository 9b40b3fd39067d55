//! Direct fidelity estimation against W and GHZ targets with L1- or
//! L2-weighted Pauli sampling, simulated under depolarizing noise.
//!
//! A Pauli label `(j, k)` stands for `i^(j.k) X^j Z^k`, which is Hermitian.
//! Characteristic values are `chi(j, k) = tr(rho W) / sqrt(d)`.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Binomial;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::randkit::stream;

/// Largest qubit count representable by the bitmask labels.
pub const MAX_QUBITS: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PauliLabel {
    pub n: usize,
    /// X positions.
    pub j_bits: u64,
    /// Z positions. Both bits set means Y.
    pub k_bits: u64,
}

impl PauliLabel {
    pub fn new(n: usize, j_bits: u64, k_bits: u64) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidParameter(format!("qubit count {n} outside 1..={MAX_QUBITS}")));
        }
        let mask = (1u64 << n) - 1;
        if j_bits & !mask != 0 || k_bits & !mask != 0 {
            return Err(Error::InvalidParameter(format!("label bits exceed {n} qubits")));
        }
        Ok(Self { n, j_bits, k_bits })
    }

    pub fn identity(n: usize) -> Self {
        Self { n, j_bits: 0, k_bits: 0 }
    }

    pub fn is_identity(&self) -> bool {
        self.j_bits == 0 && self.k_bits == 0
    }

    /// Number of positions where both X and Z are present.
    pub fn overlap(&self) -> u32 {
        (self.j_bits & self.k_bits).count_ones()
    }
}

/// Written with bit 0 leftmost, e.g. `XIZ`, `YY`.
impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            let c = match ((self.j_bits >> q) & 1, (self.k_bits >> q) & 1) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut j, mut k) = (0u64, 0u64);
        for (q, c) in s.chars().enumerate() {
            if q >= MAX_QUBITS {
                return Err(Error::InvalidParameter(format!("label longer than {MAX_QUBITS}")));
            }
            match c.to_ascii_uppercase() {
                'I' => {}
                'X' => j |= 1 << q,
                'Z' => k |= 1 << q,
                'Y' => {
                    j |= 1 << q;
                    k |= 1 << q;
                }
                other => return Err(Error::InvalidParameter(format!("bad Pauli letter {other:?}"))),
            }
        }
        Self::new(s.chars().count(), j, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetState {
    W(usize),
    Ghz(usize),
}

impl TargetState {
    pub fn w(n: usize) -> Result<Self> {
        if !(3..=MAX_QUBITS).contains(&n) {
            return Err(Error::InvalidParameter(format!("W state needs 3 <= n <= {MAX_QUBITS}, got {n}")));
        }
        Ok(Self::W(n))
    }

    pub fn ghz(n: usize) -> Result<Self> {
        if !(2..=MAX_QUBITS).contains(&n) {
            return Err(Error::InvalidParameter(format!("GHZ state needs 2 <= n <= {MAX_QUBITS}, got {n}")));
        }
        Ok(Self::Ghz(n))
    }

    pub fn n(&self) -> usize {
        match *self {
            Self::W(n) | Self::Ghz(n) => n,
        }
    }

    pub fn dimension(&self) -> f64 {
        (self.n() as f64).exp2()
    }

    pub fn characteristic(&self, label: &PauliLabel) -> Result<f64> {
        match *self {
            Self::W(n) => w_characteristic(n, label),
            Self::Ghz(n) => ghz_characteristic(n, label),
        }
    }

    /// `sum_k |chi(k)|`.
    pub fn l1_norm(&self) -> f64 {
        match *self {
            Self::W(n) => z_exact(n).expect("validated n"),
            Self::Ghz(_) => self.dimension().sqrt(),
        }
    }

    /// Upper bound on `Z / sqrt(d)` used for the L1 measurement budget.
    fn l1_budget_bound(&self) -> f64 {
        match *self {
            Self::W(n) => n as f64 / 2.0,
            Self::Ghz(_) => 1.0,
        }
    }
}

impl fmt::Display for TargetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::W(n) => write!(f, "w:{n}"),
            Self::Ghz(n) => write!(f, "ghz:{n}"),
        }
    }
}

impl FromStr for TargetState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("expected kind:n, got {s:?}")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad qubit count in {s:?}")))?;
        match kind.trim().to_ascii_lowercase().as_str() {
            "w" => Self::w(n),
            "ghz" => Self::ghz(n),
            other => Err(Error::InvalidParameter(format!("unknown target {other:?}"))),
        }
    }
}

impl Serialize for TargetState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn check_width(n: usize, label: &PauliLabel) -> Result<()> {
    if label.n != n {
        return Err(Error::DimensionMismatch { expected: n, got: label.n });
    }
    Ok(())
}

/// W-state characteristic: `(n - 2|k|) / (n sqrt d)` for `j = 0`,
/// `2 / (n sqrt d)` for `|j| = 2` with `j.k` even, otherwise 0.
pub fn w_characteristic(n: usize, label: &PauliLabel) -> Result<f64> {
    TargetState::w(n)?;
    check_width(n, label)?;
    let nf = n as f64;
    let sqrt_d = (nf).exp2().sqrt();
    let value = match label.j_bits.count_ones() {
        0 => (nf - 2.0 * f64::from(label.k_bits.count_ones())) / (nf * sqrt_d),
        2 if label.overlap() % 2 == 0 => 2.0 / (nf * sqrt_d),
        _ => 0.0,
    };
    Ok(value)
}

/// GHZ characteristic: `+-1/sqrt d` when `j` is all-zero or all-one and
/// `|k|` is even; the sign is `(-1)^(|k|/2)` for the all-one `j`.
pub fn ghz_characteristic(n: usize, label: &PauliLabel) -> Result<f64> {
    TargetState::ghz(n)?;
    check_width(n, label)?;
    let all = (1u64 << n) - 1;
    let weight = label.k_bits.count_ones();
    if weight % 2 == 1 {
        return Ok(0.0);
    }
    let inv = 1.0 / (n as f64).exp2().sqrt();
    Ok(if label.j_bits == 0 {
        inv
    } else if label.j_bits == all {
        if (weight / 2) % 2 == 0 {
            inv
        } else {
            -inv
        }
    } else {
        0.0
    })
}

/// Exact `C(n, k)` in 128-bit arithmetic (exact for `n <= 128`).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    c
}

/// `Z' = sum_w C(n, w) |n - 2w| = 2n C(n-1, floor(n/2))`.
pub fn z_prime(n: usize) -> u128 {
    if n == 0 {
        return 0;
    }
    let n = n as u64;
    2 * u128::from(n) * binomial(n - 1, n / 2)
}

/// `Z'` by direct summation.
pub fn z_prime_direct(n: usize) -> u128 {
    let n = n as u64;
    (0..=n).map(|w| binomial(n, w) * u128::from(n.abs_diff(2 * w))).sum()
}

/// `Z = sum |chi|` for the W state: `(2/sqrt d) C(n-1, floor(n/2)) + (n-1) sqrt(d) / 2`.
pub fn z_exact(n: usize) -> Result<f64> {
    TargetState::w(n)?;
    let sqrt_d = (n as f64).exp2().sqrt();
    let c = binomial(n as u64 - 1, n as u64 / 2) as f64;
    Ok(2.0 * c / sqrt_d + (n as f64 - 1.0) * sqrt_d / 2.0)
}

/// `(n/2 + 1/sqrt(n) - 1/2) sqrt(d)`, from Cauchy-Schwarz on the Z branch.
pub fn z_upper_bound(n: usize) -> Result<f64> {
    TargetState::w(n)?;
    let nf = n as f64;
    Ok((nf / 2.0 + 1.0 / nf.sqrt() - 0.5) * nf.exp2().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L1 => "l1",
            Self::L2 => "l2",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" | "1" => Ok(Self::L1),
            "l2" | "2" => Ok(Self::L2),
            other => Err(Error::InvalidParameter(format!("unknown norm {other:?}"))),
        }
    }
}

/// Probability of drawing `label`: `|chi| / Z` under L1, `chi^2` under L2.
pub fn label_probability(target: &TargetState, norm: Norm, label: &PauliLabel) -> Result<f64> {
    let chi = target.characteristic(label)?;
    Ok(match norm {
        Norm::L1 => chi.abs() / target.l1_norm(),
        Norm::L2 => chi * chi,
    })
}

/// Uniform `n`-bit string with exactly `w` ones.
fn random_subset<R: Rng + ?Sized>(n: usize, w: usize, rng: &mut R) -> u64 {
    rand::seq::index::sample(rng, n, w)
        .iter()
        .fold(0u64, |acc, q| acc | (1 << q))
}

fn random_bits<R: Rng + ?Sized>(n: usize, rng: &mut R) -> u64 {
    rng.random::<u64>() & ((1u64 << n) - 1)
}

/// `|j| = 2` branch of the W support: uniform pair, uniform `k` with `j.k` even.
fn w_pair_label<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PauliLabel {
    let pair = rand::seq::index::sample(rng, n, 2);
    let (a, b) = (pair.index(0), pair.index(1));
    let mut k = random_bits(n, rng);
    // force k_b = k_a
    k = (k & !(1 << b)) | (((k >> a) & 1) << b);
    PauliLabel {
        n,
        j_bits: (1 << a) | (1 << b),
        k_bits: k,
    }
}

/// `j = 0` branch: weight `w` drawn proportional to `C(n, w) g(n - 2w)`.
fn w_diagonal_label<R: Rng + ?Sized>(n: usize, g: fn(f64) -> f64, rng: &mut R) -> PauliLabel {
    let weights: Vec<f64> = (0..=n)
        .map(|w| binomial(n as u64, w as u64) as f64 * g(n as f64 - 2.0 * w as f64))
        .collect();
    let w = WeightedIndex::new(&weights).expect("positive weights").sample(rng);
    PauliLabel {
        n,
        j_bits: 0,
        k_bits: random_subset(n, w, rng),
    }
}

/// Draws a Pauli label with probability `|chi|/Z` (L1) or `chi^2` (L2).
pub fn sample_pauli<R: Rng + ?Sized>(target: &TargetState, norm: Norm, rng: &mut R) -> PauliLabel {
    match *target {
        TargetState::W(n) => {
            let sqrt_d = (n as f64).exp2().sqrt();
            let pair_branch = match norm {
                Norm::L1 => (n as f64 - 1.0) * sqrt_d / (2.0 * target.l1_norm()),
                Norm::L2 => (n as f64 - 1.0) / n as f64,
            };
            if rng.random::<f64>() < pair_branch {
                w_pair_label(n, rng)
            } else {
                match norm {
                    Norm::L1 => w_diagonal_label(n, f64::abs, rng),
                    Norm::L2 => w_diagonal_label(n, |v| v * v, rng),
                }
            }
        }
        // Uniform over the d stabilizer labels under either norm.
        TargetState::Ghz(n) => {
            let k = random_bits(n, rng);
            let k = if k.count_ones() % 2 == 1 { k ^ 1 } else { k };
            let j = if rng.random::<bool>() { (1u64 << n) - 1 } else { 0 };
            PauliLabel { n, j_bits: j, k_bits: k }
        }
    }
}

/// All labels with nonzero characteristic and their values. Exponential in
/// `n`; refuses `n > 16`.
pub fn support(target: &TargetState) -> Result<Vec<(PauliLabel, f64)>> {
    let n = target.n();
    if n > 16 {
        return Err(Error::InvalidParameter(format!("support enumeration limited to n <= 16, got {n}")));
    }
    let mut out = Vec::new();
    let top = 1u64 << n;
    let mut push = |j: u64, k: u64| -> Result<()> {
        let label = PauliLabel { n, j_bits: j, k_bits: k };
        let chi = target.characteristic(&label)?;
        if chi != 0.0 {
            out.push((label, chi));
        }
        Ok(())
    };
    for j in 0..top {
        let candidate = match target {
            TargetState::W(_) => j.count_ones() == 0 || j.count_ones() == 2,
            TargetState::Ghz(_) => j == 0 || j == top - 1,
        };
        if candidate {
            for k in 0..top {
                push(j, k)?;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// `sigma = (1 - lambda) rho + lambda I / d`.
    Depolarizing(f64),
}

impl NoiseModel {
    pub fn depolarizing(lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(Self::Depolarizing(lambda))
    }

    fn lambda(&self) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Depolarizing(l) => l,
        }
    }

    /// `tr(rho sigma) = (1 - lambda) + lambda / d` for a pure target.
    pub fn fidelity(&self, target: &TargetState) -> f64 {
        let l = self.lambda();
        (1.0 - l) + l / target.dimension()
    }

    /// `tr(sigma W)`.
    pub fn expectation(&self, target: &TargetState, label: &PauliLabel) -> Result<f64> {
        if label.is_identity() {
            return Ok(1.0);
        }
        let chi = target.characteristic(label)?;
        Ok((1.0 - self.lambda()) * target.dimension().sqrt() * chi)
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Depolarizing(l) => write!(f, "depolarizing:{l}"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(Self::None);
        }
        let (kind, v) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("expected none or depolarizing:LAMBDA, got {s:?}")))?;
        if !kind.eq_ignore_ascii_case("depolarizing") {
            return Err(Error::InvalidParameter(format!("unknown noise model {kind:?}")));
        }
        let l: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad lambda in {s:?}")))?;
        Self::depolarizing(l)
    }
}

impl Serialize for NoiseModel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn check_expectation(e: f64) -> Result<f64> {
    if e.abs() > 1.0 + 1e-12 {
        return Err(Error::Invariant(format!("Pauli expectation {e} outside [-1, 1]")));
    }
    Ok(e.clamp(-1.0, 1.0))
}

/// `count` i.i.d. +-1 outcomes with mean `tr(sigma W)`.
pub fn simulate_measurements<R: Rng + ?Sized>(
    target: &TargetState,
    noise: &NoiseModel,
    label: &PauliLabel,
    count: usize,
    rng: &mut R,
) -> Result<Vec<i8>> {
    let e = check_expectation(noise.expectation(target, label)?)?;
    let up = (1.0 + e) / 2.0;
    Ok((0..count).map(|_| if rng.random::<f64>() < up { 1 } else { -1 }).collect())
}

/// Sum of `count` outcomes, drawn as one binomial.
fn measurement_sum<R: Rng + ?Sized>(e: f64, count: u64, rng: &mut R) -> i64 {
    let up = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
    let ups = Binomial::new(count, up).expect("probability in [0, 1]").sample(rng) as i64;
    2 * ups - count as i64
}

fn check_accuracy(epsilon: f64, delta: f64) -> Result<()> {
    for (name, v) in [("epsilon", epsilon), ("delta", delta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    Ok(())
}

/// `ceil(1 / (eps^2 delta))`.
pub fn levels(epsilon: f64, delta: f64) -> Result<u64> {
    check_accuracy(epsilon, delta)?;
    Ok((1.0 / (epsilon * epsilon * delta) * (1.0 - 1e-12)).ceil() as u64)
}

/// Measurements for one level holding `label`.
pub fn level_budget(target: &TargetState, norm: Norm, chi: f64, epsilon: f64, delta: f64, l: u64) -> u64 {
    let base = (2.0 / delta).ln() / (l as f64 * epsilon * epsilon);
    let n = match norm {
        Norm::L1 => 2.0 * target.l1_budget_bound().powi(2) * base,
        Norm::L2 => 2.0 * base / (target.dimension() * chi * chi),
    };
    ((n * (1.0 - 1e-12)).ceil() as u64).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfeRun {
    pub target: TargetState,
    pub n: usize,
    pub noise: NoiseModel,
    pub epsilon: f64,
    pub delta: f64,
    pub norm: Norm,
    pub l: u64,
    pub total_measurements: u64,
    pub estimate: f64,
    pub true_fidelity: f64,
    pub seed: Option<u64>,
    /// Per-level measurement counts.
    #[serde(skip)]
    pub budgets: Vec<u64>,
}

/// Estimates `tr(rho sigma)` to within `2 epsilon` with probability at least
/// `1 - 2 delta`.
pub fn run_dfe<R: Rng + ?Sized>(
    target: &TargetState,
    noise: &NoiseModel,
    epsilon: f64,
    delta: f64,
    norm: Norm,
    rng: &mut R,
) -> Result<DfeRun> {
    let l = levels(epsilon, delta)?;
    let sqrt_d = target.dimension().sqrt();
    let z = target.l1_norm();
    let mut budgets = Vec::with_capacity(l as usize);
    let mut total = 0u64;
    let mut sum = 0.0;
    for _ in 0..l {
        let label = sample_pauli(target, norm, rng);
        let chi = target.characteristic(&label)?;
        let weight = match norm {
            Norm::L1 => z * chi.signum() / sqrt_d,
            Norm::L2 => 1.0 / (sqrt_d * chi),
        };
        let count = level_budget(target, norm, chi, epsilon, delta, l);
        let e = check_expectation(noise.expectation(target, &label)?)?;
        let outcomes = measurement_sum(e, count, rng);
        sum += weight * outcomes as f64 / count as f64;
        budgets.push(count);
        total += count;
    }
    Ok(DfeRun {
        target: *target,
        n: target.n(),
        noise: *noise,
        epsilon,
        delta,
        norm,
        l,
        total_measurements: total,
        estimate: sum / l as f64,
        true_fidelity: noise.fidelity(target),
        seed: None,
        budgets,
    })
}

/// [`run_dfe`] on stream `(seed, 0)`, recording the seed.
pub fn run_dfe_seeded(
    target: &TargetState,
    noise: &NoiseModel,
    epsilon: f64,
    delta: f64,
    norm: Norm,
    seed: u64,
) -> Result<DfeRun> {
    let mut rng = stream(seed, 0);
    let mut run = run_dfe(target, noise, epsilon, delta, norm, &mut rng)?;
    run.seed = Some(seed);
    Ok(run)
}

/// `E[estimate]` by summing over the label distribution; needs the support.
pub fn exact_expected_estimate(target: &TargetState, noise: &NoiseModel, norm: Norm) -> Result<f64> {
    let sqrt_d = target.dimension().sqrt();
    let z = target.l1_norm();
    let mut total = 0.0;
    for (label, chi) in support(target)? {
        let prob = label_probability(target, norm, &label)?;
        let weight = match norm {
            Norm::L1 => z * chi.signum() / sqrt_d,
            Norm::L2 => 1.0 / (sqrt_d * chi),
        };
        total += prob * weight * noise.expectation(target, &label)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundComparison {
    /// `(2 ln(2/delta) / eps^2) n^2 + 1/(eps^2 delta) + 1`.
    pub l2_bound: f64,
    /// `(ln(2/delta) / (2 eps^2)) n^2 + 1/(eps^2 delta) + 1`.
    pub l1_bound: f64,
    pub l2_coefficient: f64,
    pub l1_coefficient: f64,
    pub coefficient_ratio: f64,
}

pub fn bound_comparison(n: usize, epsilon: f64, delta: f64) -> Result<BoundComparison> {
    TargetState::w(n)?;
    check_accuracy(epsilon, delta)?;
    let log = (2.0 / delta).ln();
    let e2 = epsilon * epsilon;
    let l2_coefficient = 2.0 * log / e2;
    let l1_coefficient = log / (2.0 * e2);
    let tail = 1.0 / (e2 * delta) + 1.0;
    let n2 = (n * n) as f64;
    Ok(BoundComparison {
        l2_bound: l2_coefficient * n2 + tail,
        l1_bound: l1_coefficient * n2 + tail,
        l2_coefficient,
        l1_coefficient,
        coefficient_ratio: l2_coefficient / l1_coefficient,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WellConditioned {
    /// Smallest nonzero `|tr(rho W)|`.
    pub alpha: f64,
    pub z: f64,
    pub sqrt_d_over_alpha: f64,
    pub holds: bool,
}

/// Checks `Z <= sqrt(d) / alpha` with `alpha` the smallest nonzero Pauli
/// expectation magnitude.
pub fn well_conditioned_check(target: &TargetState) -> WellConditioned {
    let n = target.n();
    let alpha = match target {
        // |n - 2w| / n bottoms out at 1/n for odd n and 2/n for even n;
        // the |j| = 2 branch contributes 2/n.
        TargetState::W(_) => {
            if n % 2 == 1 {
                1.0 / n as f64
            } else {
                2.0 / n as f64
            }
        }
        TargetState::Ghz(_) => 1.0,
    };
    let z = target.l1_norm();
    let bound = target.dimension().sqrt() / alpha;
    WellConditioned {
        alpha,
        z,
        sqrt_d_over_alpha: bound,
        holds: z <= bound * (1.0 + 1e-12),
    }
}
