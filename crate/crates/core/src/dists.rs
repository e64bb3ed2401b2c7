//! Parametric nonnegative laws for claims, offspring and resource production.
//!
//! Every claim family exposes a closed-form partial expectation
//! `M(τ) = ∫₀^τ x dF(x)`, which is what the equilibrium solver evaluates in
//! its inner loop. Configuration uses tagged records such as
//! `{"family": "exponential", "rate": 1.0}`.

use crate::numeric::{
    adaptive_simpson, normal_cdf, normal_quantile, SIMPSON_MAX_DEPTH, SIMPSON_TOL,
};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp, Gamma, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("negative truncation point {0}")]
    NegativeTau(f64),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> DistError {
    DistError::InvalidParameter { field, reason: reason.into() }
}

fn check_simplex(probs: &[f64], len: usize) -> Result<(), DistError> {
    if probs.len() != len {
        return Err(invalid("probs", format!("expected {len} weights, got {}", probs.len())));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid("probs", "weights must be finite and nonnegative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid("probs", format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Claim-size law `F` of one sub-population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", try_from = "RawClaim")]
pub enum ClaimDistribution {
    Uniform { lower: f64, upper: f64 },
    Exponential { rate: f64 },
    #[serde(rename = "lognormal")]
    LogNormal { mu: f64, sigma: f64 },
    PointMass { value: f64 },
    FiniteDiscrete { atoms: Vec<f64>, probs: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum RawClaim {
    Uniform { lower: f64, upper: f64 },
    Exponential { rate: f64 },
    #[serde(rename = "lognormal")]
    LogNormal { mu: f64, sigma: f64 },
    PointMass { value: f64 },
    FiniteDiscrete { atoms: Vec<f64>, probs: Vec<f64> },
}

impl TryFrom<RawClaim> for ClaimDistribution {
    type Error = DistError;

    fn try_from(raw: RawClaim) -> Result<Self, DistError> {
        match raw {
            RawClaim::Uniform { lower, upper } => Self::uniform(lower, upper),
            RawClaim::Exponential { rate } => Self::exponential(rate),
            RawClaim::LogNormal { mu, sigma } => Self::lognormal(mu, sigma),
            RawClaim::PointMass { value } => Self::point_mass(value),
            RawClaim::FiniteDiscrete { atoms, probs } => Self::finite_discrete(atoms, probs),
        }
    }
}

impl ClaimDistribution {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self, DistError> {
        if !(lower.is_finite() && lower >= 0.0) {
            return Err(invalid("lower", "must be finite and >= 0"));
        }
        if !(upper.is_finite() && upper > lower) {
            return Err(invalid("upper", "must be finite and > lower"));
        }
        Ok(Self::Uniform { lower, upper })
    }

    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(invalid("rate", "must be finite and > 0"));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self, DistError> {
        if !mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid("sigma", "must be finite and > 0"));
        }
        Ok(Self::LogNormal { mu, sigma })
    }

    pub fn point_mass(value: f64) -> Result<Self, DistError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(invalid("value", "must be finite and >= 0"));
        }
        Ok(Self::PointMass { value })
    }

    pub fn finite_discrete(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self, DistError> {
        if atoms.is_empty() {
            return Err(invalid("atoms", "at least one atom required"));
        }
        if atoms.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(invalid("atoms", "atoms must be finite and >= 0"));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("atoms", "atoms must be strictly ascending"));
        }
        check_simplex(&probs, atoms.len())?;
        Ok(Self::FiniteDiscrete { atoms, probs })
    }

    /// Families with a density; the equilibrium solver only accepts these.
    pub fn is_absolutely_continuous(&self) -> bool {
        matches!(self, Self::Uniform { .. } | Self::Exponential { .. } | Self::LogNormal { .. })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::Exponential { .. } => "exponential",
            Self::LogNormal { .. } => "lognormal",
            Self::PointMass { .. } => "point_mass",
            Self::FiniteDiscrete { .. } => "finite_discrete",
        }
    }

    /// `(inf support, sup support)`; the upper end may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Uniform { lower, upper } => (*lower, *upper),
            Self::Exponential { .. } | Self::LogNormal { .. } => (0.0, f64::INFINITY),
            Self::PointMass { value } => (*value, *value),
            Self::FiniteDiscrete { atoms, .. } => (atoms[0], atoms[atoms.len() - 1]),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Self::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    normal_cdf((x.ln() - mu) / sigma)
                }
            }
            Self::PointMass { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::FiniteDiscrete { atoms, probs } => {
                if x >= atoms[atoms.len() - 1] {
                    return 1.0;
                }
                atoms.iter().zip(probs).take_while(|(a, _)| **a <= x).map(|(_, p)| p).sum()
            }
        }
    }

    /// Density, for absolutely continuous families.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Self::Uniform { lower, upper } => {
                Some(if x >= *lower && x <= *upper { 1.0 / (upper - lower) } else { 0.0 })
            }
            Self::Exponential { rate } => Some(if x < 0.0 { 0.0 } else { rate * (-rate * x).exp() }),
            Self::LogNormal { mu, sigma } => Some(if x <= 0.0 {
                0.0
            } else {
                let z = (x.ln() - mu) / sigma;
                (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
            }),
            Self::PointMass { .. } | Self::FiniteDiscrete { .. } => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Uniform { lower, upper } => 0.5 * (lower + upper),
            Self::Exponential { rate } => 1.0 / rate,
            Self::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Self::PointMass { value } => *value,
            Self::FiniteDiscrete { atoms, probs } => atoms.iter().zip(probs).map(|(a, p)| a * p).sum(),
        }
    }

    /// `M(τ) = ∫₀^τ x dF(x)`.
    pub fn partial_mean(&self, tau: f64) -> Result<f64, DistError> {
        if tau.is_nan() || tau < 0.0 {
            return Err(DistError::NegativeTau(tau));
        }
        Ok(self.partial_mean_at(tau))
    }

    pub(crate) fn partial_mean_at(&self, tau: f64) -> f64 {
        match self {
            Self::Uniform { lower, upper } => {
                if tau <= *lower {
                    0.0
                } else {
                    let t = tau.min(*upper);
                    (t * t - lower * lower) / (2.0 * (upper - lower))
                }
            }
            Self::Exponential { rate } => {
                if tau == f64::INFINITY {
                    return 1.0 / rate;
                }
                let x = rate * tau;
                (-(-x).exp_m1() - x * (-x).exp()) / rate
            }
            Self::LogNormal { mu, sigma } => {
                if tau <= 0.0 {
                    0.0
                } else {
                    self.mean() * normal_cdf((tau.ln() - mu - sigma * sigma) / sigma)
                }
            }
            Self::PointMass { value } => {
                if tau >= *value {
                    *value
                } else {
                    0.0
                }
            }
            Self::FiniteDiscrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .take_while(|(a, _)| **a <= tau)
                .map(|(a, p)| a * p)
                .sum(),
        }
    }

    /// `∫₀^τ x² dF(x)`; feeds the within-bin variances of the binned sampler.
    pub(crate) fn partial_second_moment(&self, tau: f64) -> f64 {
        match self {
            Self::Uniform { lower, upper } => {
                if tau <= *lower {
                    0.0
                } else {
                    let t = tau.min(*upper);
                    (t.powi(3) - lower.powi(3)) / (3.0 * (upper - lower))
                }
            }
            Self::Exponential { rate } => {
                let l2 = rate * rate;
                if tau == f64::INFINITY {
                    return 2.0 / l2;
                }
                let x = rate * tau;
                (2.0 - (-x).exp() * (x * x + 2.0 * x + 2.0)) / l2
            }
            Self::LogNormal { mu, sigma } => {
                if tau <= 0.0 {
                    0.0
                } else {
                    let s2 = sigma * sigma;
                    (2.0 * mu + 2.0 * s2).exp() * normal_cdf((tau.ln() - mu - 2.0 * s2) / sigma)
                }
            }
            Self::PointMass { value } => {
                if tau >= *value {
                    value * value
                } else {
                    0.0
                }
            }
            Self::FiniteDiscrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .take_while(|(a, _)| **a <= tau)
                .map(|(a, p)| a * a * p)
                .sum(),
        }
    }

    /// Partial expectation by adaptive Simpson on `x · density(x)`.
    ///
    /// Generic fallback for families without a closed form; the shipped
    /// families use it only as a cross-check.
    pub fn partial_mean_by_quadrature(&self, tau: f64) -> Option<f64> {
        let (lo, hi) = self.support();
        let upper = tau.min(hi);
        if upper <= lo {
            return self.density(lo).map(|_| 0.0);
        }
        self.density(lo)?;
        Some(adaptive_simpson(
            |x| x * self.density(x).unwrap_or(0.0),
            lo,
            upper,
            SIMPSON_TOL,
            SIMPSON_MAX_DEPTH,
        ))
    }

    /// Generalized inverse `inf{x : F(x) ≥ u}`.
    pub fn quantile(&self, u: f64) -> Result<f64, DistError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(DistError::ProbabilityOutOfRange(u));
        }
        Ok(self.quantile_at(u))
    }

    pub(crate) fn quantile_at(&self, u: f64) -> f64 {
        match self {
            Self::Uniform { lower, upper } => lower + u * (upper - lower),
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::LogNormal { mu, sigma } => {
                if u <= 0.0 {
                    0.0
                } else {
                    (mu + sigma * normal_quantile(u)).exp()
                }
            }
            Self::PointMass { value } => *value,
            Self::FiniteDiscrete { atoms, probs } => {
                let mut cum = 0.0;
                for (a, p) in atoms.iter().zip(probs) {
                    cum += p;
                    if cum >= u {
                        return *a;
                    }
                }
                atoms[atoms.len() - 1]
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Uniform { lower, upper } => lower + (upper - lower) * rng.gen::<f64>(),
            Self::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            Self::LogNormal { mu, sigma } => {
                LogNormal::new(*mu, *sigma).expect("validated sigma").sample(rng)
            }
            Self::PointMass { value } => *value,
            Self::FiniteDiscrete { .. } => {
                // u in (0, 1] so that zero-weight leading atoms are never drawn
                let u = 1.0 - rng.gen::<f64>();
                self.quantile_at(u)
            }
        }
    }

    /// Inverse-transform draw conditioned on `F(X) ∈ [cdf_lo, cdf_hi)`.
    pub(crate) fn sample_between<R: Rng + ?Sized>(&self, cdf_lo: f64, cdf_hi: f64, rng: &mut R) -> f64 {
        let u = cdf_lo + (cdf_hi - cdf_lo) * rng.gen::<f64>();
        self.quantile_at(u)
    }
}

/// Offspring law of one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", try_from = "RawOffspring")]
pub enum OffspringDistribution {
    Poisson { mean: f64 },
    /// Failures before the first success; support `{0, 1, 2, ...}`.
    Geometric { mean: f64 },
    Deterministic { count: u64 },
    FinitePmf { counts: Vec<u64>, probs: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum RawOffspring {
    Poisson { mean: f64 },
    Geometric { mean: f64 },
    Deterministic { count: u64 },
    FinitePmf { counts: Vec<u64>, probs: Vec<f64> },
}

impl TryFrom<RawOffspring> for OffspringDistribution {
    type Error = DistError;

    fn try_from(raw: RawOffspring) -> Result<Self, DistError> {
        match raw {
            RawOffspring::Poisson { mean } => Self::poisson(mean),
            RawOffspring::Geometric { mean } => Self::geometric(mean),
            RawOffspring::Deterministic { count } => Ok(Self::Deterministic { count }),
            RawOffspring::FinitePmf { counts, probs } => Self::finite_pmf(counts, probs),
        }
    }
}

impl OffspringDistribution {
    pub fn poisson(mean: f64) -> Result<Self, DistError> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(invalid("mean", "must be finite and > 0"));
        }
        Ok(Self::Poisson { mean })
    }

    pub fn geometric(mean: f64) -> Result<Self, DistError> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(invalid("mean", "must be finite and > 0"));
        }
        Ok(Self::Geometric { mean })
    }

    pub fn deterministic(count: u64) -> Self {
        Self::Deterministic { count }
    }

    pub fn finite_pmf(counts: Vec<u64>, probs: Vec<f64>) -> Result<Self, DistError> {
        if counts.is_empty() {
            return Err(invalid("counts", "at least one outcome required"));
        }
        check_simplex(&probs, counts.len())?;
        Ok(Self::FinitePmf { counts, probs })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Poisson { mean } | Self::Geometric { mean } => *mean,
            Self::Deterministic { count } => *count as f64,
            Self::FinitePmf { counts, probs } => {
                counts.iter().zip(probs).map(|(k, p)| *k as f64 * p).sum()
            }
        }
    }

    /// Probability of no offspring.
    pub fn p0(&self) -> f64 {
        match self {
            Self::Poisson { mean } => (-mean).exp(),
            Self::Geometric { mean } => 1.0 / (1.0 + mean),
            Self::Deterministic { count } => {
                if *count == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::FinitePmf { counts, probs } => {
                counts.iter().zip(probs).filter(|(k, _)| **k == 0).map(|(_, p)| p).sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_total(1, rng)
    }

    /// Total offspring of `parents` independent individuals, drawn from the
    /// exact law of the sum (Poisson, negative binomial, multinomial).
    pub fn sample_total<R: Rng + ?Sized>(&self, parents: u64, rng: &mut R) -> u64 {
        if parents == 0 {
            return 0;
        }
        match self {
            Self::Poisson { mean } => poisson(mean * parents as f64, rng),
            Self::Geometric { mean } => {
                let lambda = Gamma::new(parents as f64, *mean).expect("validated mean").sample(rng);
                poisson(lambda, rng)
            }
            Self::Deterministic { count } => count * parents,
            Self::FinitePmf { counts, probs } => {
                let mut remaining = parents;
                let mut mass_left = 1.0;
                let mut total = 0;
                for (k, p) in counts.iter().zip(probs) {
                    if remaining == 0 {
                        break;
                    }
                    let q = if mass_left > 0.0 { (p / mass_left).clamp(0.0, 1.0) } else { 1.0 };
                    let n = binomial(remaining, q, rng);
                    total += n * k;
                    remaining -= n;
                    mass_left -= p;
                }
                total
            }
        }
    }
}

/// Resource production of one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", try_from = "RawResource")]
pub enum ResourceModel {
    Deterministic { value: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
enum RawResource {
    Deterministic { value: f64 },
    Gamma { shape: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl TryFrom<RawResource> for ResourceModel {
    type Error = DistError;

    fn try_from(raw: RawResource) -> Result<Self, DistError> {
        match raw {
            RawResource::Deterministic { value } => Self::deterministic(value),
            RawResource::Gamma { shape, scale } => Self::gamma(shape, scale),
            RawResource::Uniform { lower, upper } => Self::uniform(lower, upper),
        }
    }
}

impl ResourceModel {
    pub fn deterministic(value: f64) -> Result<Self, DistError> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(invalid("value", "must be finite and >= 0"));
        }
        Ok(Self::Deterministic { value })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self, DistError> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(invalid("shape", "must be finite and > 0"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid("scale", "must be finite and > 0"));
        }
        Ok(Self::Gamma { shape, scale })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self, DistError> {
        if !(lower.is_finite() && lower >= 0.0) {
            return Err(invalid("lower", "must be finite and >= 0"));
        }
        if !(upper.is_finite() && upper >= lower) {
            return Err(invalid("upper", "must be finite and >= lower"));
        }
        Ok(Self::Uniform { lower, upper })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Deterministic { value } => *value,
            Self::Gamma { shape, scale } => shape * scale,
            Self::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_total(1, rng)
    }

    /// Total production of `producers` independent individuals.
    pub fn sample_total<R: Rng + ?Sized>(&self, producers: u64, rng: &mut R) -> f64 {
        if producers == 0 {
            return 0.0;
        }
        match self {
            Self::Deterministic { value } => value * producers as f64,
            Self::Gamma { shape, scale } => {
                Gamma::new(shape * producers as f64, *scale).expect("validated gamma").sample(rng)
            }
            Self::Uniform { lower, upper } => {
                (0..producers).map(|_| lower + (upper - lower) * rng.gen::<f64>()).sum()
            }
        }
    }
}

pub(crate) fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(lambda).expect("positive finite lambda").sample(rng);
    draw as u64
}

pub(crate) fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
}
