//! Seeded random streams, scalar distribution families, and moment profiles.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed (expanded to
//! the 256-bit ChaCha key by `seed_from_u64`) with the 64-bit ChaCha stream
//! number set to `stream_id`. This generator is pinned: experiment tolerances
//! are calibrated against its output.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Exp, Gamma, Normal, Open01};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::erf::erf;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

pub type Stream = ChaCha8Rng;

/// Deterministic stream for `(seed, stream_id)`.
pub fn stream(seed: u64, stream_id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// A scalar distribution family with validated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    Normal { mean: f64, std_dev: f64 },
    Uniform { low: f64, high: f64 },
    Laplace { location: f64, scale: f64 },
    Exponential { rate: f64 },
    Beta { alpha: f64, beta: f64 },
    /// Shape `k`, scale `theta`.
    Gamma { shape: f64, scale: f64 },
    /// Point mass.
    Constant { value: f64 },
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

impl DistributionSpec {
    pub fn normal(mean: f64, std_dev: f64) -> Result<Self> {
        finite("mean", mean)?;
        positive("std_dev", std_dev)?;
        Ok(Self::Normal { mean, std_dev })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        finite("low", low)?;
        finite("high", high)?;
        if low >= high {
            return Err(invalid(format!("uniform needs low < high, got {low}, {high}")));
        }
        Ok(Self::Uniform { low, high })
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        finite("location", location)?;
        positive("scale", scale)?;
        Ok(Self::Laplace { location, scale })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        Ok(Self::Beta { alpha, beta })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        positive("shape", shape)?;
        positive("scale", scale)?;
        Ok(Self::Gamma { shape, scale })
    }

    pub fn constant(value: f64) -> Result<Self> {
        finite("value", value)?;
        Ok(Self::Constant { value })
    }

    pub fn standard_normal() -> Self {
        Self::Normal {
            mean: 0.0,
            std_dev: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Normal { mean, .. } => mean,
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::Laplace { location, .. } => location,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
            Self::Gamma { shape, scale } => shape * scale,
            Self::Constant { value } => value,
        }
    }

    /// `sigma_f^2`.
    pub fn variance(&self) -> f64 {
        match *self {
            Self::Normal { std_dev, .. } => std_dev * std_dev,
            Self::Uniform { low, high } => (high - low).powi(2) / 12.0,
            Self::Laplace { scale, .. } => 2.0 * scale * scale,
            Self::Exponential { rate } => 1.0 / (rate * rate),
            Self::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
            Self::Gamma { shape, scale } => shape * scale * scale,
            Self::Constant { .. } => 0.0,
        }
    }

    /// `E[X^2]`.
    pub fn second_moment(&self) -> f64 {
        self.variance() + self.mean().powi(2)
    }

    /// `E|X|`, in closed form for every family.
    pub fn abs_mean(&self) -> f64 {
        match *self {
            Self::Normal { mean, std_dev } => {
                // folded normal
                let z = mean / (std_dev * 2f64.sqrt());
                std_dev * (2.0 / PI).sqrt() * (-z * z).exp() + mean * erf(z)
            }
            Self::Uniform { low, high } => {
                if low >= 0.0 || high <= 0.0 {
                    (0.5 * (low + high)).abs()
                } else {
                    (low * low + high * high) / (2.0 * (high - low))
                }
            }
            Self::Laplace { location, scale } => location.abs() + scale * (-location.abs() / scale).exp(),
            Self::Exponential { .. } | Self::Beta { .. } | Self::Gamma { .. } => self.mean(),
            Self::Constant { value } => value.abs(),
        }
    }

    pub fn is_zero_mean(&self) -> bool {
        self.mean() == 0.0
    }

    /// `E|X|^p` where a closed form is implemented: centred normal,
    /// uniform, and point mass.
    pub fn abs_moment_closed_form(&self, p: f64) -> Option<f64> {
        match *self {
            Self::Normal { mean, std_dev } if mean == 0.0 => Some(gaussian_abs_moment(std_dev * std_dev, p)),
            Self::Uniform { low, high } => {
                let antiderivative = |x: f64| x.signum() * x.abs().powf(p + 1.0) / (p + 1.0);
                Some((antiderivative(high) - antiderivative(low)) / (high - low))
            }
            Self::Constant { value } => Some(value.abs().powf(p)),
            _ => None,
        }
    }

    pub fn sampler(&self) -> Sampler {
        let kind = match *self {
            Self::Normal { mean, std_dev } => SamplerKind::Normal(Normal::new(mean, std_dev).expect("validated")),
            Self::Uniform { low, high } => SamplerKind::Uniform(Uniform::new(low, high).expect("validated")),
            Self::Laplace { location, scale } => SamplerKind::Laplace { location, scale },
            Self::Exponential { rate } => SamplerKind::Exponential(Exp::new(rate).expect("validated")),
            Self::Beta { alpha, beta } => SamplerKind::Beta(Beta::new(alpha, beta).expect("validated")),
            Self::Gamma { shape, scale } => SamplerKind::Gamma(Gamma::new(shape, scale).expect("validated")),
            Self::Constant { value } => SamplerKind::Constant(value),
        };
        Sampler { kind }
    }
}

/// `E|X|^p` for `X ~ N(0, variance)`.
pub fn gaussian_abs_moment(variance: f64, p: f64) -> f64 {
    variance.powf(p / 2.0) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt()
}

/// `mu_tilde_{f,p}`, the absolute `p`-th moment of `N(0, sigma_f^4)`.
pub fn mu_tilde(sigma2: f64, p: f64) -> f64 {
    gaussian_abs_moment(sigma2 * sigma2, p)
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Normal { mean, std_dev } => write!(f, "normal:{mean},{std_dev}"),
            Self::Uniform { low, high } => write!(f, "uniform:{low},{high}"),
            Self::Laplace { location, scale } => write!(f, "laplace:{location},{scale}"),
            Self::Exponential { rate } => write!(f, "exp:{rate}"),
            Self::Beta { alpha, beta } => write!(f, "beta:{alpha},{beta}"),
            Self::Gamma { shape, scale } => write!(f, "gamma:{shape},{scale}"),
            Self::Constant { value } => write!(f, "const:{value}"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Parses `family:param[,param]`, e.g. `normal:0,1`, `uniform:-1,1`,
    /// `beta:5,2`, `exp:1`, `gamma:2,2`, `laplace:0,1`, `const:3`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, params) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("distribution '{s}' is missing ':'")))?;
        let params = params
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad parameter '{t}' in '{s}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let want = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(invalid(format!("'{family}' takes {n} parameter(s), got {}", params.len())))
            }
        };
        match family.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => {
                want(2)?;
                Self::normal(params[0], params[1])
            }
            "uniform" => {
                want(2)?;
                Self::uniform(params[0], params[1])
            }
            "laplace" => {
                want(2)?;
                Self::laplace(params[0], params[1])
            }
            "exp" | "exponential" => {
                want(1)?;
                Self::exponential(params[0])
            }
            "beta" => {
                want(2)?;
                Self::beta(params[0], params[1])
            }
            "gamma" => {
                want(2)?;
                Self::gamma(params[0], params[1])
            }
            "const" | "constant" | "point" => {
                want(1)?;
                Self::constant(params[0])
            }
            other => Err(invalid(format!("unknown distribution family '{other}'"))),
        }
    }
}

impl Serialize for DistributionSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
    Laplace { location: f64, scale: f64 },
    Exponential(Exp<f64>),
    Beta(Beta<f64>),
    Gamma(Gamma<f64>),
    Constant(f64),
}

/// Prepared sampler for a [`DistributionSpec`].
#[derive(Debug, Clone, Copy)]
pub struct Sampler {
    kind: SamplerKind,
}

impl Distribution<f64> for Sampler {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Normal(d) => d.sample(rng),
            SamplerKind::Uniform(d) => d.sample(rng),
            SamplerKind::Laplace { location, scale } => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            SamplerKind::Exponential(d) => d.sample(rng),
            SamplerKind::Beta(d) => d.sample(rng),
            SamplerKind::Gamma(d) => d.sample(rng),
            SamplerKind::Constant(v) => *v,
        }
    }
}

/// Single draw. Prefer [`DistributionSpec::sampler`] in loops.
pub fn draw<R: Rng + ?Sized>(spec: &DistributionSpec, rng: &mut R) -> f64 {
    spec.sampler().sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MomentMethod {
    ClosedForm,
    MonteCarlo { samples: u64, seed: u64 },
}

/// Minimum Monte Carlo sample count accepted by [`moment_profile`].
pub const MIN_MONTE_CARLO_SAMPLES: u64 = 10_000;

/// Moments of a scalar distribution `f` at exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentProfile {
    pub p: f64,
    /// `Var[X]`, always exact.
    pub sigma2: f64,
    /// `E|X|^p`.
    pub mu_p: f64,
    /// `Var|X|^p`.
    pub sigma2_p: f64,
    /// `E|Y|^p` for `Y ~ N(0, sigma2^2)`.
    pub mu_tilde_p: f64,
    pub method: MomentMethod,
    /// Standard error of `mu_p` under Monte Carlo; zero for closed forms.
    pub mu_p_std_err: f64,
    pub zero_mean: bool,
}

pub fn moment_profile(spec: &DistributionSpec, p: f64, method: MomentMethod) -> Result<MomentProfile> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let sigma2 = spec.variance();
    let (mu_p, sigma2_p, mu_p_std_err) = match method {
        MomentMethod::ClosedForm => {
            let mu = spec
                .abs_moment_closed_form(p)
                .ok_or_else(|| Error::NoClosedForm(spec.to_string()))?;
            let mu2 = spec.abs_moment_closed_form(2.0 * p).expect("same family");
            (mu, (mu2 - mu * mu).max(0.0), 0.0)
        }
        MomentMethod::MonteCarlo { samples, seed } => {
            if samples < MIN_MONTE_CARLO_SAMPLES {
                return Err(invalid(format!(
                    "Monte Carlo moments need at least {MIN_MONTE_CARLO_SAMPLES} samples, got {samples}"
                )));
            }
            let mut rng = stream(seed, 0);
            let sampler = spec.sampler();
            let values: Vec<f64> = (0..samples)
                .map(|_| crate::ptree::abs_pow(sampler.sample(&mut rng), p))
                .collect();
            let s = crate::stats::Summary::of(&values);
            (s.mean, s.variance, s.std_err)
        }
    };
    Ok(MomentProfile {
        p,
        sigma2,
        mu_p,
        sigma2_p,
        mu_tilde_p: mu_tilde(sigma2, p),
        method,
        mu_p_std_err,
        zero_mean: spec.is_zero_mean(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Summary;
    use approx::assert_relative_eq;

    fn draws(spec: &DistributionSpec, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, 0);
        let s = spec.sampler();
        (0..n).map(|_| s.sample(&mut rng)).collect()
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = {
            let mut r = stream(42, 7);
            (0..100).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = stream(42, 7);
            (0..100).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut r = stream(42, 8);
            (0..100).map(|_| r.random()).collect()
        };
        assert_ne!(a, c);
        let mut zero = stream(0, 0);
        let _: u64 = zero.random();
    }

    #[test]
    fn parse_and_display() {
        let s: DistributionSpec = "normal:0,1".parse().unwrap();
        assert_eq!(s, DistributionSpec::standard_normal());
        assert_eq!(s.to_string(), "normal:0,1");
        let b: DistributionSpec = "beta:5,2".parse().unwrap();
        assert_eq!(b, DistributionSpec::Beta { alpha: 5.0, beta: 2.0 });
        assert_eq!("uniform:-1,1".parse::<DistributionSpec>().unwrap().to_string(), "uniform:-1,1");
        for bad in ["normal", "normal:0", "normal:0,-1", "uniform:1,1", "cauchy:0,1", "beta:a,2", "exp:0"] {
            assert!(bad.parse::<DistributionSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn sample_means() {
        let u = Summary::of(&draws(&DistributionSpec::uniform(-1.0, 1.0).unwrap(), 1_000_000, 1));
        assert!(u.mean.abs() < 0.005);

        let n = draws(&DistributionSpec::standard_normal(), 1_000_000, 2);
        let abs: Vec<f64> = n.iter().map(|v| v.abs()).collect();
        assert!((Summary::of(&abs).mean - (2.0 / PI).sqrt()).abs() < 0.005);

        let e = Summary::of(&draws(&DistributionSpec::exponential(1.0).unwrap(), 1_000_000, 3));
        assert!((e.mean - 1.0).abs() < 0.005);
    }

    #[test]
    fn sample_variances_match() {
        let specs = [
            "normal:0,1",
            "uniform:-1,1",
            "laplace:0,1",
            "laplace:1,1",
            "exp:1",
            "beta:2,2",
            "beta:5,2",
            "gamma:2,2",
            "gamma:0.5,1",
            "gamma:10,0.5",
        ];
        for (k, text) in specs.iter().enumerate() {
            let spec: DistributionSpec = text.parse().unwrap();
            let x = draws(&spec, 1_000_000, 100 + k as u64);
            let s = Summary::of(&x);
            // SE of the sample variance: sqrt((mu4 - sigma^4) / N), estimated
            // from the draws themselves.
            let mu4 = x.iter().map(|v| (v - s.mean).powi(4)).sum::<f64>() / x.len() as f64;
            let se = ((mu4 - s.variance * s.variance) / x.len() as f64).sqrt();
            assert!(
                (s.variance - spec.variance()).abs() <= 3.0 * se,
                "{text}: {} vs {} (se {se})",
                s.variance,
                spec.variance()
            );
            assert!((s.mean - spec.mean()).abs() <= 4.0 * s.std_err, "{text} mean");
        }
    }

    #[test]
    fn abs_mean_closed_forms() {
        let cases = ["normal:0.7,1.3", "uniform:-1,3", "uniform:2,3", "laplace:1,1", "laplace:0,2"];
        for (k, text) in cases.iter().enumerate() {
            let spec: DistributionSpec = text.parse().unwrap();
            let x: Vec<f64> = draws(&spec, 1_000_000, 300 + k as u64).into_iter().map(f64::abs).collect();
            let s = Summary::of(&x);
            assert!((s.mean - spec.abs_mean()).abs() < 4.0 * s.std_err, "{text}");
        }
    }

    #[test]
    fn profile_examples() {
        let n = moment_profile(&DistributionSpec::standard_normal(), 2.0, MomentMethod::ClosedForm).unwrap();
        assert_relative_eq!(n.mu_p, 1.0, max_relative = 1e-14);
        assert_relative_eq!(n.mu_tilde_p, 1.0, max_relative = 1e-14);
        assert_relative_eq!(n.sigma2_p, 2.0, max_relative = 1e-13); // E X^4 - 1

        let u = DistributionSpec::uniform(-1.0, 1.0).unwrap();
        let u1 = moment_profile(&u, 1.0, MomentMethod::ClosedForm).unwrap();
        assert_relative_eq!(u1.mu_p, 0.5, max_relative = 1e-15);
        // E|Y|^2 for Y ~ N(0, (1/3)^2) is 1/9
        let u2 = moment_profile(&u, 2.0, MomentMethod::ClosedForm).unwrap();
        assert_relative_eq!(u2.mu_tilde_p, 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(u2.mu_p, 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn profile_errors() {
        let e = DistributionSpec::exponential(1.0).unwrap();
        assert!(matches!(
            moment_profile(&e, 1.0, MomentMethod::ClosedForm),
            Err(Error::NoClosedForm(_))
        ));
        assert!(moment_profile(&e, 1.0, MomentMethod::MonteCarlo { samples: 9_999, seed: 0 }).is_err());
        assert!(moment_profile(&e, 0.5, MomentMethod::ClosedForm).is_err());
        let mc = moment_profile(&e, 1.0, MomentMethod::MonteCarlo { samples: 200_000, seed: 4 }).unwrap();
        assert!((mc.mu_p - 1.0).abs() < 4.0 * mc.mu_p_std_err);
        assert!(!mc.zero_mean);
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        let u = DistributionSpec::uniform(-1.0, 1.0).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0] {
            let exact = moment_profile(&u, p, MomentMethod::ClosedForm).unwrap();
            let mc = moment_profile(&u, p, MomentMethod::MonteCarlo { samples: 400_000, seed: 9 }).unwrap();
            assert!((exact.mu_p - mc.mu_p).abs() < 4.0 * mc.mu_p_std_err, "p={p}");
            assert_eq!(exact.mu_tilde_p, mc.mu_tilde_p);
        }
    }

    #[test]
    fn mu_tilde_matches_gamma_formula() {
        // sigma^{2p} 2^{p/2} Gamma((p+1)/2) / sqrt(pi), written out directly
        for (sigma2, p) in [(1.0, 1.0), (1.0 / 3.0, 1.5), (2.5, 2.0), (0.7, 3.0)] {
            let direct = sigma2_pow(sigma2, p) * 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / PI.sqrt();
            assert_relative_eq!(mu_tilde(sigma2, p), direct, max_relative = 1e-12);
        }
    }

    fn sigma2_pow(sigma2: f64, p: f64) -> f64 {
        sigma2.powf(p)
    }
}
