//! One generation of the joint society: reproduction, resource creation,
//! claim submission to the shared resource space, and weakest-first service.
//!
//! Claims are served in ascending order of `(claim, subpop_index,
//! birth_index)` until the next claim no longer fits into the remaining
//! budget. Served descendants form the next generation.

use crate::dists::{binomial, ClaimDistribution, OffspringDistribution, ResourceModel};
use crate::sim::GenerationRecord;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// `(m, r, F)` of one sub-population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubPopulationSpec {
    pub label: String,
    pub offspring: OffspringDistribution,
    pub resource: ResourceModel,
    pub claims: ClaimDistribution,
}

impl SubPopulationSpec {
    pub fn new(
        label: impl Into<String>,
        offspring: OffspringDistribution,
        resource: ResourceModel,
        claims: ClaimDistribution,
    ) -> Self {
        Self { label: label.into(), offspring, resource, claims }
    }

    /// Mean reproduction `m`.
    pub fn m(&self) -> f64 {
        self.offspring.mean()
    }

    /// Mean resource production `r`.
    pub fn r(&self) -> f64 {
        self.resource.mean()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Claimant {
    pub claim: f64,
    pub birth_index: u64,
    pub subpop_index: u32,
}

impl Claimant {
    pub fn new(subpop_index: u32, claim: f64, birth_index: u64) -> Self {
        Self { claim, birth_index, subpop_index }
    }

    /// Total service order: claim, then sub-population, then birth index.
    pub fn order(&self, other: &Self) -> Ordering {
        self.claim
            .total_cmp(&other.claim)
            .then(self.subpop_index.cmp(&other.subpop_index))
            .then(self.birth_index.cmp(&other.birth_index))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub served_counts: Vec<u64>,
    /// Largest served claim, 0 when nobody is served.
    pub threshold: f64,
    pub consumed: f64,
    pub budget: f64,
}

/// Serves claimants in ascending order while the cumulative claim stays
/// within `budget`.
pub fn allocate_weakest_first(
    mut claimants: Vec<Claimant>,
    budget: f64,
    subpopulations: usize,
) -> AllocationResult {
    allocate_in_place(&mut claimants, budget, subpopulations)
}

/// Same result as sorting and scanning, in expected linear time: a
/// quickselect that recurses on sums instead of ranks. Permutes `claimants`.
pub(crate) fn allocate_in_place(
    claimants: &mut [Claimant],
    budget: f64,
    subpopulations: usize,
) -> AllocationResult {
    let mut served = vec![0u64; subpopulations];
    let mut consumed = 0.0f64;
    let mut threshold = 0.0f64;
    let (mut lo, mut hi) = (0usize, claimants.len());

    while lo < hi {
        let part = &mut claimants[lo..hi];
        if part.len() <= 32 {
            part.sort_unstable_by(Claimant::order);
            for c in part.iter() {
                if consumed + c.claim > budget {
                    break;
                }
                consumed += c.claim;
                threshold = threshold.max(c.claim);
                served[c.subpop_index as usize] += 1;
            }
            break;
        }
        let mid = part.len() / 2;
        part.select_nth_unstable_by(mid, Claimant::order);
        let lower_sum: f64 = part[..mid].iter().map(|c| c.claim).sum();
        if consumed + lower_sum <= budget {
            for c in &part[..mid] {
                served[c.subpop_index as usize] += 1;
                threshold = threshold.max(c.claim);
            }
            consumed += lower_sum;
            let pivot = part[mid];
            if consumed + pivot.claim > budget {
                break;
            }
            consumed += pivot.claim;
            threshold = threshold.max(pivot.claim);
            served[pivot.subpop_index as usize] += 1;
            lo += mid + 1;
        } else {
            hi = lo + mid;
        }
    }

    AllocationResult { served_counts: served, threshold, consumed, budget }
}

/// How a generation's claims are realized.
///
/// `Exact` draws every descendant's claim. `Binned` draws the multinomial
/// counts of claims in a fine grid of claim-space bins exactly, replaces the
/// claim sum of each fully served bin by a normal draw with the exact
/// conditional mean and variance, and draws the claims of the boundary bin
/// individually. It needs absolutely continuous claim laws and falls back to
/// `Exact` otherwise. `Auto` switches to `Binned` above `exact_limit`
/// descendants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClaimSampling {
    Exact,
    Binned,
    Auto { exact_limit: u64 },
}

impl Default for ClaimSampling {
    fn default() -> Self {
        ClaimSampling::Auto { exact_limit: 100_000 }
    }
}

/// Reusable state for repeated generation steps.
#[derive(Debug, Default)]
pub struct StepEngine {
    sampling: ClaimSampling,
    scratch: Vec<Claimant>,
}

impl StepEngine {
    pub fn new(sampling: ClaimSampling) -> Self {
        Self { sampling, scratch: Vec::new() }
    }

    /// One generation from counts `Γ_t`. The returned record has `t = 0`,
    /// `capped = false`; callers own the bookkeeping.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        counts: &[u64],
        specs: &[SubPopulationSpec],
        rng: &mut R,
    ) -> GenerationRecord {
        assert_eq!(counts.len(), specs.len(), "one count per sub-population");
        let mut descendants = Vec::with_capacity(specs.len());
        let mut budget = 0.0;
        for (spec, &n) in specs.iter().zip(counts) {
            descendants.push(spec.offspring.sample_total(n, rng));
            budget += spec.resource.sample_total(n, rng);
        }
        let total: u64 = descendants.iter().sum();
        let binned = match self.sampling {
            ClaimSampling::Exact => false,
            ClaimSampling::Binned => true,
            ClaimSampling::Auto { exact_limit } => total > exact_limit,
        } && specs.iter().all(|s| s.claims.is_absolutely_continuous());

        let (allocation, max_claim) = if binned {
            binned_allocation(&descendants, specs, budget, rng, &mut self.scratch)
        } else {
            self.scratch.clear();
            self.scratch.reserve(total as usize);
            let mut max_claim = 0.0f64;
            for (k, (spec, &d)) in specs.iter().zip(&descendants).enumerate() {
                for b in 0..d {
                    let claim = spec.claims.sample(rng);
                    max_claim = max_claim.max(claim);
                    self.scratch.push(Claimant::new(k as u32, claim, b));
                }
            }
            (allocate_in_place(&mut self.scratch, budget, specs.len()), max_claim)
        };

        GenerationRecord {
            t: 0,
            ratio: GenerationRecord::ratio_of(counts),
            counts: counts.to_vec(),
            descendants,
            resources_total: budget,
            threshold: allocation.threshold,
            served: allocation.served_counts,
            consumed: allocation.consumed,
            max_claim,
            capped: false,
        }
    }
}

/// One generation with exact per-descendant claims.
pub fn step_generation<R: Rng + ?Sized>(
    counts: &[u64],
    specs: &[SubPopulationSpec],
    rng: &mut R,
) -> GenerationRecord {
    StepEngine::new(ClaimSampling::Exact).step(counts, specs, rng)
}

/// Largest of `n` claims drawn from `law` conditioned on `F(X) ∈ [lo, hi)`.
fn max_of<R: Rng + ?Sized>(law: &ClaimDistribution, n: u64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let v: f64 = rng.gen::<f64>();
    let u = lo + (hi - lo) * v.powf(1.0 / n as f64);
    law.quantile_at(u.min(hi))
}

fn binned_allocation<R: Rng + ?Sized>(
    descendants: &[u64],
    specs: &[SubPopulationSpec],
    budget: f64,
    rng: &mut R,
    scratch: &mut Vec<Claimant>,
) -> (AllocationResult, f64) {
    let s = specs.len();
    let mut edges: Vec<f64> = Vec::new();
    for (spec, &d) in specs.iter().zip(descendants) {
        if d == 0 {
            continue;
        }
        let grid = ((2.0 * (d as f64).sqrt()) as usize).clamp(16, 4096);
        edges.extend((1..grid).map(|j| spec.claims.quantile_at(j as f64 / grid as f64)));
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let bins = edges.len() + 1;
    let lower_edge = |j: usize| if j == 0 { 0.0 } else { edges[j - 1] };
    let upper_edge = |j: usize| if j == bins - 1 { f64::INFINITY } else { edges[j] };

    let mut remaining: Vec<u64> = descendants.to_vec();
    let mut served = vec![0u64; s];
    let mut consumed = 0.0f64;
    // counts of the most recent nonempty, fully served bin
    let mut last_full: Option<(usize, Vec<u64>)> = None;
    let mut counts = vec![0u64; s];
    let mut boundary: Option<usize> = None;

    for j in 0..bins {
        if remaining.iter().all(|&r| r == 0) {
            break;
        }
        let (lo, hi) = (lower_edge(j), upper_edge(j));
        let mut mean = 0.0;
        let mut var = 0.0;
        for k in 0..s {
            let law = &specs[k].claims;
            let f_lo = law.cdf(lo);
            let f_hi = if hi.is_finite() { law.cdf(hi) } else { 1.0 };
            let tail = 1.0 - f_lo;
            let p = f_hi - f_lo;
            counts[k] = if j == bins - 1 || tail <= 0.0 {
                remaining[k]
            } else {
                binomial(remaining[k], (p / tail).clamp(0.0, 1.0), rng)
            };
            if counts[k] > 0 && p > 0.0 {
                let m1 = law.partial_mean_at(hi) - law.partial_mean_at(lo);
                let m2 = law.partial_second_moment(hi) - law.partial_second_moment(lo);
                let mu = m1 / p;
                let sd2 = (m2 / p - mu * mu).max(0.0);
                mean += counts[k] as f64 * mu;
                var += counts[k] as f64 * sd2;
            }
        }
        let n_bin: u64 = counts.iter().sum();
        if n_bin == 0 {
            continue;
        }
        let is_last = j == bins - 1;
        if !is_last {
            let noise: f64 = StandardNormal.sample(rng);
            let bin_sum = (mean + var.sqrt() * noise).clamp(n_bin as f64 * lo, n_bin as f64 * hi);
            if consumed + bin_sum <= budget {
                consumed += bin_sum;
                for k in 0..s {
                    served[k] += counts[k];
                    remaining[k] -= counts[k];
                }
                last_full = Some((j, counts.clone()));
                continue;
            }
        }
        for k in 0..s {
            remaining[k] -= counts[k];
        }
        boundary = Some(j);
        break;
    }

    let mut threshold = 0.0f64;
    let mut max_claim = 0.0f64;
    let full_bin_max = |rng: &mut R, j: usize, c: &[u64]| -> f64 {
        let (lo, hi) = (lower_edge(j), upper_edge(j));
        let mut m = 0.0f64;
        for (k, &n) in c.iter().enumerate() {
            if n > 0 {
                let law = &specs[k].claims;
                let f_hi = if hi.is_finite() { law.cdf(hi) } else { 1.0 };
                m = m.max(max_of(law, n, law.cdf(lo), f_hi, rng));
            }
        }
        m
    };

    match boundary {
        Some(j) => {
            let (lo, hi) = (lower_edge(j), upper_edge(j));
            scratch.clear();
            for k in 0..s {
                let law = &specs[k].claims;
                let f_lo = law.cdf(lo);
                let f_hi = if hi.is_finite() { law.cdf(hi) } else { 1.0 };
                for b in 0..counts[k] {
                    let x = law.sample_between(f_lo, f_hi, rng).clamp(lo, hi);
                    max_claim = max_claim.max(x);
                    scratch.push(Claimant::new(k as u32, x, b));
                }
            }
            scratch.sort_unstable_by(Claimant::order);
            for c in scratch.iter() {
                if consumed + c.claim > budget {
                    break;
                }
                consumed += c.claim;
                threshold = c.claim;
                served[c.subpop_index as usize] += 1;
            }
            if threshold == 0.0 {
                if let Some((jf, cf)) = &last_full {
                    threshold = full_bin_max(rng, *jf, cf);
                }
            }
            // largest claim above the boundary bin, from the exact law of the maximum
            let f_top = |law: &ClaimDistribution| if hi.is_finite() { law.cdf(hi) } else { 1.0 };
            for k in 0..s {
                if remaining[k] > 0 {
                    let law = &specs[k].claims;
                    max_claim = max_claim.max(max_of(law, remaining[k], f_top(law), 1.0, rng));
                }
            }
        }
        None => {
            if let Some((jf, cf)) = &last_full {
                threshold = full_bin_max(rng, *jf, cf);
                max_claim = threshold;
            }
        }
    }

    (AllocationResult { served_counts: served, threshold, consumed, budget }, max_claim)
}
