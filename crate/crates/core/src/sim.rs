//! Trajectories and Monte Carlo experiments over multi-population RDBPs.
//!
//! Index 0 is the home population and index 1 the immigrant population;
//! the ratio `α_t = Γ_t^i / Γ_t^h` is recorded whenever `Γ_t^h > 0`.

use crate::numeric::sorted_quantile;
use crate::society::{ClaimSampling, StepEngine, SubPopulationSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("at least one sub-population is required")]
    NoSubPopulations,
    #[error("expected {expected} initial counts, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("runs must be at least 1")]
    ZeroRuns,
    #[error("population cap {cap} is smaller than the initial count {initial}")]
    CapTooSmall { cap: u64, initial: u64 },
    #[error("home population is empty at generation {0}")]
    EmptyHome(usize),
    #[error("ratio recursion needs at least two sub-populations")]
    NeedsTwoPopulations,
    #[error("no descendant passes the threshold at generation {0}")]
    DegenerateThreshold(usize),
}

/// State and flows of one generation `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub t: usize,
    /// `Γ_t` per sub-population.
    pub counts: Vec<u64>,
    /// `D_t` per sub-population.
    pub descendants: Vec<u64>,
    /// `R_t`, produced by the current generation.
    pub resources_total: f64,
    /// `τ_t`, the largest served claim.
    pub threshold: f64,
    /// `Γ_t^i / Γ_t^h`; absent when the home count is 0 or there is no second population.
    pub ratio: Option<f64>,
    /// Served descendants per sub-population, before any down-sampling.
    pub served: Vec<u64>,
    /// Sum of served claims.
    pub consumed: f64,
    /// Largest claim among all descendants.
    pub max_claim: f64,
    /// The served population exceeded the cap and was down-sampled.
    pub capped: bool,
}

impl GenerationRecord {
    pub fn ratio_of(counts: &[u64]) -> Option<f64> {
        match counts {
            [h, i, ..] if *h > 0 => Some(*i as f64 / *h as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapMode {
    /// Uniformly down-sample the served population to exactly `cap` individuals.
    #[default]
    Downsample,
    /// Stop the run the first time the cap is exceeded.
    Halt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: usize,
    pub population_cap: u64,
    pub cap_mode: CapMode,
    pub sampling: ClaimSampling,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            horizon: 300,
            population_cap: 1_000_000,
            cap_mode: CapMode::Downsample,
            sampling: ClaimSampling::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    /// Every sub-population is alive after `generations` steps.
    AllSurvived { generations: usize, halted_at_cap: bool },
    /// `label` was the first sub-population to hit 0, at `generation`.
    Extinct { label: String, generation: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub seed: u64,
    pub status: TrajectoryStatus,
    /// Counts after the last simulated step.
    pub final_counts: Vec<u64>,
    /// First generation whose served population was down-sampled.
    pub capping_started: Option<usize>,
    pub trace: Vec<GenerationRecord>,
}

impl TrajectoryOutcome {
    pub fn final_record(&self) -> Option<&GenerationRecord> {
        self.trace.last()
    }

    pub fn jointly_survived(&self) -> bool {
        self.final_counts.iter().all(|&c| c > 0)
    }

    pub fn final_ratio(&self) -> Option<f64> {
        GenerationRecord::ratio_of(&self.final_counts)
    }

    pub fn final_threshold(&self) -> Option<f64> {
        self.final_record().map(|r| r.threshold)
    }
}

fn validate(specs: &[SubPopulationSpec], initial: &[u64], options: &SimOptions) -> Result<(), SimError> {
    if specs.is_empty() {
        return Err(SimError::NoSubPopulations);
    }
    if initial.len() != specs.len() {
        return Err(SimError::CountMismatch { expected: specs.len(), got: initial.len() });
    }
    if options.horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    let largest = initial.iter().copied().max().unwrap_or(0);
    let total: u64 = initial.iter().sum();
    if options.population_cap < largest || options.population_cap < total {
        return Err(SimError::CapTooSmall { cap: options.population_cap, initial: total });
    }
    Ok(())
}

/// Uniform sample of exactly `target` individuals without replacement,
/// drawn as a multivariate hypergeometric split of `counts`.
fn downsample(counts: &[u64], target: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut population: u64 = counts.iter().sum();
    let mut draws = target.min(population);
    let mut out = Vec::with_capacity(counts.len());
    for (k, &c) in counts.iter().enumerate() {
        let x = if k + 1 == counts.len() {
            draws
        } else if draws == 0 || c == 0 {
            0
        } else if c == population {
            draws
        } else {
            Hypergeometric::new(population, c, draws).expect("valid hypergeometric").sample(rng)
        };
        out.push(x);
        population -= c;
        draws -= x;
    }
    out
}

/// Runs one trajectory for `options.horizon` generations or until every
/// sub-population is extinct.
pub fn run_trajectory(
    specs: &[SubPopulationSpec],
    initial_counts: &[u64],
    options: &SimOptions,
    seed: u64,
) -> Result<TrajectoryOutcome, SimError> {
    validate(specs, initial_counts, options)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut engine = StepEngine::new(options.sampling);
    let mut counts = initial_counts.to_vec();
    let mut trace = Vec::with_capacity(options.horizon);
    let mut first_extinct: Option<(usize, usize)> =
        counts.iter().position(|&c| c == 0).map(|k| (k, 0));
    let mut capping_started = None;
    let mut halted = false;

    for t in 0..options.horizon {
        if counts.iter().all(|&c| c == 0) {
            break;
        }
        let mut record = engine.step(&counts, specs, &mut rng);
        record.t = t;
        let total: u64 = record.served.iter().sum();
        let next = if total > options.population_cap {
            match options.cap_mode {
                CapMode::Downsample => {
                    record.capped = true;
                    capping_started.get_or_insert(t);
                    downsample(&record.served, options.population_cap, &mut rng)
                }
                CapMode::Halt => {
                    halted = true;
                    record.served.clone()
                }
            }
        } else {
            record.served.clone()
        };
        trace.push(record);
        counts = next;
        if first_extinct.is_none() {
            first_extinct = counts.iter().position(|&c| c == 0).map(|k| (k, t + 1));
        }
        if halted {
            break;
        }
    }

    let status = match first_extinct {
        Some((k, generation)) => TrajectoryStatus::Extinct { label: specs[k].label.clone(), generation },
        None => TrajectoryStatus::AllSurvived { generations: trace.len(), halted_at_cap: halted },
    };
    Ok(TrajectoryOutcome { seed, status, final_counts: counts, capping_started, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
    pub min: f64,
    pub max: f64,
}

impl SummaryStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Some(Self {
            count: v.len(),
            mean,
            median: sorted_quantile(&v, 0.5),
            q05: sorted_quantile(&v, 0.05),
            q25: sorted_quantile(&v, 0.25),
            q75: sorted_quantile(&v, 0.75),
            q95: sorted_quantile(&v, 0.95),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFinal {
    pub run_id: usize,
    pub seed: u64,
    pub status: TrajectoryStatus,
    pub final_counts: Vec<u64>,
    pub final_ratio: Option<f64>,
    pub final_threshold: Option<f64>,
    pub capping_started: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub base_seed: u64,
    pub horizon: usize,
    pub population_cap: u64,
    pub cap_mode: CapMode,
    pub joint_survival_fraction: f64,
    /// `α_T` over jointly surviving runs.
    pub conditional_ratio_stats: Option<SummaryStats>,
    /// `τ_T` over jointly surviving runs.
    pub conditional_threshold_stats: Option<SummaryStats>,
    pub finals: Vec<RunFinal>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub summary: MonteCarloSummary,
    pub trajectories: Vec<TrajectoryOutcome>,
}

/// Independent trajectories with seeds `base_seed + run_id`.
pub fn monte_carlo(
    specs: &[SubPopulationSpec],
    initial_counts: &[u64],
    options: &SimOptions,
    runs: usize,
    base_seed: u64,
) -> Result<MonteCarloRun, SimError> {
    if runs == 0 {
        return Err(SimError::ZeroRuns);
    }
    validate(specs, initial_counts, options)?;
    let trajectories: Vec<TrajectoryOutcome> = (0..runs)
        .into_par_iter()
        .map(|run| run_trajectory(specs, initial_counts, options, base_seed.wrapping_add(run as u64)))
        .collect::<Result<_, _>>()?;
    let summary = summarize(&trajectories, options, base_seed);
    Ok(MonteCarloRun { summary, trajectories })
}

pub fn summarize(trajectories: &[TrajectoryOutcome], options: &SimOptions, base_seed: u64) -> MonteCarloSummary {
    let survivors: Vec<&TrajectoryOutcome> = trajectories.iter().filter(|t| t.jointly_survived()).collect();
    let ratios: Vec<f64> = survivors.iter().filter_map(|t| t.final_ratio()).collect();
    let thresholds: Vec<f64> = survivors.iter().filter_map(|t| t.final_threshold()).collect();
    let finals = trajectories
        .iter()
        .enumerate()
        .map(|(run_id, t)| RunFinal {
            run_id,
            seed: t.seed,
            status: t.status.clone(),
            final_counts: t.final_counts.clone(),
            final_ratio: t.final_ratio(),
            final_threshold: t.final_threshold(),
            capping_started: t.capping_started,
        })
        .collect();
    MonteCarloSummary {
        runs: trajectories.len(),
        base_seed,
        horizon: options.horizon,
        population_cap: options.population_cap,
        cap_mode: options.cap_mode,
        joint_survival_fraction: survivors.len() as f64 / trajectories.len().max(1) as f64,
        conditional_ratio_stats: SummaryStats::from_values(&ratios),
        conditional_threshold_stats: SummaryStats::from_values(&thresholds),
        finals,
    }
}

/// `|Σ served claims − R_t| / Γ_t^h`, the per-home-capita slack of the
/// resource balance.
pub fn balance_residual(record: &GenerationRecord) -> Result<f64, SimError> {
    let home = record.counts.first().copied().unwrap_or(0);
    if home == 0 {
        return Err(SimError::EmptyHome(record.t));
    }
    Ok((record.consumed - record.resources_total).abs() / home as f64)
}

/// Distance between the realized home share of generation `t + 1` and the
/// share predicted from `D_t` and the claim CDFs at `τ_t`:
/// `|1/(1+α_{t+1}) − D^h F_h(τ_t) / Σ_k D^k F_k(τ_t)|`.
pub fn ratio_recursion_check(
    record_t: &GenerationRecord,
    record_next: &GenerationRecord,
    specs: &[SubPopulationSpec],
) -> Result<f64, SimError> {
    if specs.len() < 2 || record_t.counts.len() < 2 || record_next.counts.len() < 2 {
        return Err(SimError::NeedsTwoPopulations);
    }
    if record_t.counts[0] == 0 {
        return Err(SimError::EmptyHome(record_t.t));
    }
    if record_next.counts[0] == 0 {
        return Err(SimError::EmptyHome(record_next.t));
    }
    let tau = record_t.threshold;
    let weights: Vec<f64> = specs
        .iter()
        .zip(&record_t.descendants)
        .map(|(s, &d)| d as f64 * s.claims.cdf(tau))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(SimError::DegenerateThreshold(record_t.t));
    }
    let predicted = weights[0] / total;
    let realized = record_next.counts[0] as f64 / record_next.counts.iter().sum::<u64>() as f64;
    Ok((realized - predicted).abs())
}
