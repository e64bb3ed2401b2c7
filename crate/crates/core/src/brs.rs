//! Maximal number of i.i.d. claims that fit in a budget, and the bound
//! `E[N(n, s)] ≤ n F(τ*)` with `n ∫₀^{τ*} x dF = s`.

use crate::dists::ClaimDistribution;
use crate::numeric::{bisect_predicate, normal_quantile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_RUNS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BrsError {
    #[error("n must be at least 1")]
    ZeroClaims,
    #[error("budget must be finite and >= 0, got {0}")]
    InvalidBudget(f64),
    #[error("runs must be at least {MIN_RUNS}, got {0}")]
    TooFewRuns(usize),
}

/// Maximum number of claims whose sum stays within `budget`.
///
/// Taking claims in ascending order is optimal, so this is the length of the
/// longest affordable sorted prefix.
pub fn greedy_count(claims: &[f64], budget: f64) -> usize {
    let mut sorted = claims.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut spent = 0.0;
    for (k, c) in sorted.iter().enumerate() {
        spent += c;
        if spent > budget {
            return k;
        }
    }
    sorted.len()
}

/// Same count as [`greedy_count`] in expected linear time; reorders `claims`.
pub fn greedy_count_in_place(claims: &mut [f64], mut budget: f64) -> usize {
    let mut taken = 0;
    let mut rest = claims;
    loop {
        if rest.len() <= 32 {
            rest.sort_unstable_by(f64::total_cmp);
            let mut spent = 0.0;
            for (k, c) in rest.iter().enumerate() {
                spent += c;
                if spent > budget {
                    return taken + k;
                }
            }
            return taken + rest.len();
        }
        let mid = rest.len() / 2;
        rest.select_nth_unstable_by(mid, f64::total_cmp);
        let (low, high) = rest.split_at_mut(mid);
        let low_sum: f64 = low.iter().sum();
        if low_sum > budget {
            rest = low;
        } else {
            budget -= low_sum;
            taken += mid;
            rest = high;
        }
    }
}

mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrsBound {
    pub n: u64,
    pub budget: f64,
    /// `null` in JSON when the budget covers every claim of an unbounded law.
    #[serde(with = "inf_as_null")]
    pub tau_star: f64,
    pub bound: f64,
}

fn validate(n: u64, budget: f64) -> Result<(), BrsError> {
    if n == 0 {
        return Err(BrsError::ZeroClaims);
    }
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(BrsError::InvalidBudget(budget));
    }
    Ok(())
}

/// Smallest `τ` with `n M(τ) ≥ s`, or the upper end of the support when the
/// whole mean fits in the budget. On an atom straddling the budget this is
/// the atom itself, so `F(τ*)` includes the atom's mass.
pub fn brs_tau(dist: &ClaimDistribution, n: u64, budget: f64) -> Result<f64, BrsError> {
    validate(n, budget)?;
    let n = n as f64;
    if n * dist.mean() <= budget {
        return Ok(dist.support().1);
    }
    let mut hi = dist.support().1;
    if !hi.is_finite() {
        hi = dist.mean().max(1.0);
        while n * dist.partial_mean_at(hi) < budget {
            hi *= 2.0;
        }
    }
    Ok(bisect_predicate(|t| n * dist.partial_mean_at(t) >= budget, 0.0, hi))
}

pub fn brs_bound(dist: &ClaimDistribution, n: u64, budget: f64) -> Result<BrsBound, BrsError> {
    let tau_star = brs_tau(dist, n, budget)?;
    Ok(BrsBound { n, budget, tau_star, bound: n as f64 * dist.cdf(tau_star) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrsCheck {
    #[serde(flatten)]
    pub bound: BrsBound,
    pub estimate: f64,
    /// 99% normal-approximation half-width of the estimate.
    pub ci: f64,
    pub runs: usize,
    pub seed: u64,
}

impl BrsCheck {
    pub fn holds(&self) -> bool {
        self.estimate <= self.bound.bound + self.ci
    }
}

/// Monte Carlo mean of the greedy count over `runs` draws of `n` claims.
/// Run `k` uses its own stream seeded with `seed + k`.
pub fn brs_check(dist: &ClaimDistribution, n: u64, budget: f64, runs: usize, seed: u64) -> Result<BrsCheck, BrsError> {
    if runs < MIN_RUNS {
        return Err(BrsError::TooFewRuns(runs));
    }
    let bound = brs_bound(dist, n, budget)?;
    let counts: Vec<f64> = (0..runs)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n as usize),
            |buf, run| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(run as u64));
                buf.clear();
                buf.extend((0..n).map(|_| dist.sample(&mut rng)));
                greedy_count_in_place(buf, budget) as f64
            },
        )
        .collect();
    let r = runs as f64;
    let estimate = counts.iter().sum::<f64>() / r;
    let var = counts.iter().map(|c| (c - estimate).powi(2)).sum::<f64>() / (r - 1.0);
    let ci = normal_quantile(0.995) * (var / r).sqrt();
    Ok(BrsCheck { bound, estimate, ci, runs, seed })
}
