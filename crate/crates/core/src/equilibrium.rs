//! Equilibria `(τ, α)` between a home and an immigrant population.
//!
//! An equilibrium threshold satisfies the constraint
//! `m_h F_h(τ) = m_i F_i(τ)` together with the balance
//! `m_h M_h(τ) + α m_i M_i(τ) = r_h + α r_i`, where `M(τ) = ∫₀^τ x dF(x)`.
//! The balance is affine in `α` for fixed `τ`, so the solver enumerates the
//! sign changes of `φ(τ) = m_h F_h(τ) − m_i F_i(τ)` on a grid, refines each by
//! bisection and solves for `α` directly. Tangential roots of `φ` (touching
//! zero without a sign change) are not detected; raise `grid_points` if a
//! configuration is suspected to have them.

use crate::numeric::bisect;
use crate::society::SubPopulationSpec;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// `|effective_mean − 1|` at or below this is classified critical.
pub const CRITICAL_BAND: f64 = 1e-9;
const IDENTICALLY_ZERO_TOL: f64 = 1e-12;
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("claim law of `{label}` ({family}) is not absolutely continuous")]
    NotAbsolutelyContinuous { label: String, family: &'static str },
    #[error("empty search domain (upper = {0})")]
    EmptyDomain(f64),
    #[error("grid_points must be at least 2")]
    TooFewGridPoints,
}

fn default_grid_points() -> usize {
    4096
}

fn default_bisection_tol() -> f64 {
    1e-12
}

/// Search interval `(0, upper]` for equilibrium thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchDomain {
    /// Defaults to the larger of the two laws' `1 − 10⁻⁶` quantiles, each
    /// capped at its support's upper end.
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_bisection_tol")]
    pub bisection_tol: f64,
}

impl Default for SearchDomain {
    fn default() -> Self {
        Self { upper: None, grid_points: default_grid_points(), bisection_tol: default_bisection_tol() }
    }
}

impl SearchDomain {
    pub fn resolve_upper(&self, home: &SubPopulationSpec, immigrant: &SubPopulationSpec) -> f64 {
        self.upper.unwrap_or_else(|| {
            [home, immigrant]
                .iter()
                .map(|s| s.claims.quantile_at(1.0 - 1e-6).min(s.claims.support().1))
                .fold(0.0, f64::max)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintRoots {
    Roots(Vec<f64>),
    /// `m_h F_h ≡ m_i F_i` on the whole grid.
    IdenticallyZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Value(f64),
    /// Every `α > 0` solves the balance at this `τ`.
    AnyPositive,
}

impl Alpha {
    pub fn value(&self) -> Option<f64> {
        match self {
            Alpha::Value(a) => Some(*a),
            Alpha::AnyPositive => None,
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Alpha::Value(a) => s.serialize_f64(*a),
            Alpha::AnyPositive => s.serialize_str("any"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(a) => Ok(Alpha::Value(a)),
            Repr::Text(t) if t == "any" => Ok(Alpha::AnyPositive),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"any\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Effective mean above 1: equilibrium reachable with positive probability.
    Strict,
    /// Effective mean equal to 1 within [`CRITICAL_BAND`].
    Critical,
    /// Effective mean below 1: no equilibrium can form at this threshold.
    Inadmissible,
}

impl Classification {
    pub fn of(effective_mean: f64) -> Self {
        if (effective_mean - 1.0).abs() <= CRITICAL_BAND {
            Classification::Critical
        } else if effective_mean > 1.0 {
            Classification::Strict
        } else {
            Classification::Inadmissible
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub equation: f64,
    pub constraint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub tau: f64,
    pub alpha: Alpha,
    /// `m_h F_h(τ)`.
    pub effective_mean: f64,
    pub classification: Classification,
    pub residuals: Residuals,
}

/// A constraint root that produced no admissible `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRoot {
    pub tau: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveReport {
    /// Sorted by `τ`; the first entry is the infimum solution.
    pub solutions: Vec<EquilibriumSolution>,
    pub dropped: Vec<DroppedRoot>,
}

fn require_continuous(spec: &SubPopulationSpec) -> Result<(), EquilibriumError> {
    if spec.claims.is_absolutely_continuous() {
        Ok(())
    } else {
        Err(EquilibriumError::NotAbsolutelyContinuous {
            label: spec.label.clone(),
            family: spec.claims.family_name(),
        })
    }
}

fn constraint_gap(home: &SubPopulationSpec, immigrant: &SubPopulationSpec, tau: f64) -> f64 {
    home.m() * home.claims.cdf(tau) - immigrant.m() * immigrant.claims.cdf(tau)
}

/// All sign changes of `m_h F_h − m_i F_i` on `(0, upper]`, each refined by
/// bisection.
pub fn constraint_roots(
    home: &SubPopulationSpec,
    immigrant: &SubPopulationSpec,
    domain: &SearchDomain,
) -> Result<ConstraintRoots, EquilibriumError> {
    require_continuous(home)?;
    require_continuous(immigrant)?;
    if domain.grid_points < 2 {
        return Err(EquilibriumError::TooFewGridPoints);
    }
    let upper = domain.resolve_upper(home, immigrant);
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(EquilibriumError::EmptyDomain(upper));
    }
    let n = domain.grid_points;
    let phi = |t: f64| constraint_gap(home, immigrant, t);
    let grid: Vec<(f64, f64)> = (1..=n)
        .map(|k| {
            let t = upper * k as f64 / n as f64;
            (t, phi(t))
        })
        .collect();
    if grid.iter().all(|(_, v)| v.abs() <= IDENTICALLY_ZERO_TOL) {
        return Ok(ConstraintRoots::IdenticallyZero);
    }
    let mut roots = Vec::new();
    let mut last: Option<(f64, f64)> = None;
    for &(t, v) in &grid {
        if v == 0.0 {
            continue;
        }
        if let Some((t0, v0)) = last {
            if v0.signum() != v.signum() {
                roots.push(bisect(phi, t0, t, domain.bisection_tol));
            }
        }
        last = Some((t, v));
    }
    Ok(ConstraintRoots::Roots(roots))
}

/// Recomputes both sides of the balance and the constraint at `alpha`.
pub fn verify_at(
    solution: &EquilibriumSolution,
    alpha: f64,
    home: &SubPopulationSpec,
    immigrant: &SubPopulationSpec,
) -> Residuals {
    let tau = solution.tau;
    let lhs = home.m() * home.claims.partial_mean_at(tau) + alpha * immigrant.m() * immigrant.claims.partial_mean_at(tau);
    let rhs = home.r() + alpha * immigrant.r();
    Residuals { equation: (lhs - rhs).abs(), constraint: constraint_gap(home, immigrant, tau).abs() }
}

/// Residuals at the solution's own `α` (`α = 1` for the continuum case).
pub fn verify(solution: &EquilibriumSolution, home: &SubPopulationSpec, immigrant: &SubPopulationSpec) -> Residuals {
    let alpha = solution.alpha.value().unwrap_or(1.0);
    verify_at(solution, alpha, home, immigrant)
}

fn make_solution(
    tau: f64,
    alpha: Alpha,
    home: &SubPopulationSpec,
    immigrant: &SubPopulationSpec,
) -> EquilibriumSolution {
    let effective_mean = home.m() * home.claims.cdf(tau);
    let mut s = EquilibriumSolution {
        tau,
        alpha,
        effective_mean,
        classification: Classification::of(effective_mean),
        residuals: Residuals { equation: 0.0, constraint: 0.0 },
    };
    s.residuals = verify(&s, home, immigrant);
    s
}

/// Every `(τ, α)` with `α ∈ (0, ∞)` (or the continuum marker) that solves
/// the constraint and the balance, classified by effective mean.
pub fn solve_equilibrium(
    home: &SubPopulationSpec,
    immigrant: &SubPopulationSpec,
    domain: &SearchDomain,
) -> Result<SolveReport, EquilibriumError> {
    let mut report = SolveReport::default();
    match constraint_roots(home, immigrant, domain)? {
        ConstraintRoots::IdenticallyZero => solve_degenerate(home, immigrant, domain, &mut report),
        ConstraintRoots::Roots(roots) => {
            for tau in roots {
                let numerator = home.r() - home.m() * home.claims.partial_mean_at(tau);
                let denominator = immigrant.m() * immigrant.claims.partial_mean_at(tau) - immigrant.r();
                if denominator.abs() <= DEGENERATE_TOL {
                    if numerator.abs() <= DEGENERATE_TOL {
                        report.solutions.push(make_solution(tau, Alpha::AnyPositive, home, immigrant));
                    } else {
                        report.dropped.push(DroppedRoot {
                            tau: Some(tau),
                            reason: format!("zero slope in alpha with nonzero offset {numerator:e}: no finite alpha"),
                        });
                    }
                    continue;
                }
                let alpha = numerator / denominator;
                if alpha > 0.0 && alpha.is_finite() {
                    report.solutions.push(make_solution(tau, Alpha::Value(alpha), home, immigrant));
                } else {
                    report.dropped.push(DroppedRoot {
                        tau: Some(tau),
                        reason: format!("alpha = {alpha:e} is not in (0, inf)"),
                    });
                }
            }
        }
    }
    report.solutions.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(report)
}

/// `m_h F_h ≡ m_i F_i`: the balance reduces to `m M(τ) (1 + α) = r_h + α r_i`,
/// which has an `α`-free solution only when both populations balance at the
/// same `τ`.
fn solve_degenerate(
    home: &SubPopulationSpec,
    immigrant: &SubPopulationSpec,
    domain: &SearchDomain,
    report: &mut SolveReport,
) {
    let (m, r) = (home.m(), home.r());
    if m * home.claims.mean() <= r {
        report.dropped.push(DroppedRoot {
            tau: None,
            reason: format!("m * mean = {} never reaches r = {r}: resources are never exhausted", m * home.claims.mean()),
        });
        return;
    }
    let mut hi = domain.resolve_upper(home, immigrant).max(home.claims.mean());
    while m * home.claims.partial_mean_at(hi) < r {
        hi *= 2.0;
    }
    let tau = bisect(|t| m * home.claims.partial_mean_at(t) - r, 0.0, hi, domain.bisection_tol);
    let immigrant_gap = immigrant.m() * immigrant.claims.partial_mean_at(tau) - immigrant.r();
    if immigrant_gap.abs() > 1e-9 {
        report.dropped.push(DroppedRoot {
            tau: Some(tau),
            reason: "identical constraint but unequal resource balance: tau depends on alpha".into(),
        });
        return;
    }
    report.solutions.push(make_solution(tau, Alpha::AnyPositive, home, immigrant));
}

/// Derivative at `α*` of the large-population ratio map
/// `α ↦ α · m_i F_i(τ(α)) / (m_h F_h(τ(α)))`, where `τ(α)` solves the balance.
///
/// `|λ| < 1`: nearby trajectories are pulled toward `α*`; `|λ| > 1`: they
/// drift away even though `(τ*, α*)` solves both equations. `None` for the
/// continuum case.
pub fn linearized_ratio_multiplier(
    solution: &EquilibriumSolution,
    home: &SubPopulationSpec,
    immigrant: &SubPopulationSpec,
) -> Option<f64> {
    let alpha = solution.alpha.value()?;
    let tau = solution.tau;
    let (fh, fi) = (home.claims.density(tau)?, immigrant.claims.density(tau)?);
    let (cdf_h, cdf_i) = (home.claims.cdf(tau), immigrant.claims.cdf(tau));
    let dlog_g = fi / cdf_i - fh / cdf_h;
    let slope_tau = home.m() * tau * fh + alpha * immigrant.m() * tau * fi;
    let dtau_dalpha = -(immigrant.m() * immigrant.claims.partial_mean_at(tau) - immigrant.r()) / slope_tau;
    Some(1.0 + alpha * dlog_g * dtau_dalpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{ClaimDistribution, OffspringDistribution, ResourceModel};

    fn spec(label: &str, m: f64, r: f64, claims: ClaimDistribution) -> SubPopulationSpec {
        SubPopulationSpec::new(
            label,
            OffspringDistribution::poisson(m).unwrap(),
            ResourceModel::deterministic(r).unwrap(),
            claims,
        )
    }

    fn worked() -> (SubPopulationSpec, SubPopulationSpec) {
        (
            spec("home", 2.0, 0.9, ClaimDistribution::uniform(0.0, 1.0).unwrap()),
            spec("immigrant", 3.0, 0.5, ClaimDistribution::exponential(1.0).unwrap()),
        )
    }

    // Oracle: plain bisection on 2τ − 3(1 − e^{−τ}) over [0.5, 1], written
    // without the grid scanner or the distribution types.
    fn oracle_tau() -> f64 {
        let f = |t: f64| 2.0 * t - 3.0 * (1.0 - (-t).exp());
        let (mut a, mut b) = (0.5f64, 1.0f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    // Oracle: composite Simpson with many panels on x·e^{−x}.
    fn oracle_partial_mean_exp(tau: f64) -> f64 {
        let n = 20_000;
        let h = tau / n as f64;
        let f = |x: f64| x * (-x).exp();
        let mut s = f(0.0) + f(tau);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        s * h / 3.0
    }

    const TAU_STAR: f64 = 0.874_217_465_798_717;
    const ALPHA_STAR: f64 = 0.879_768_754_376_144;

    #[test]
    fn frozen_oracle_values() {
        let tau = oracle_tau();
        assert!((tau - TAU_STAR).abs() < 1e-12);
        let m_h = tau * tau / 2.0;
        let m_i = oracle_partial_mean_exp(tau);
        let alpha = (0.9 - 2.0 * m_h) / (3.0 * m_i - 0.5);
        assert!((alpha - ALPHA_STAR).abs() < 1e-10, "{alpha}");
    }

    #[test]
    fn worked_example_single_strict_solution() {
        let (h, i) = worked();
        let roots = constraint_roots(&h, &i, &SearchDomain::default()).unwrap();
        match roots {
            ConstraintRoots::Roots(r) => {
                // the second crossing sits where F_h saturates: 2 = 3(1 − e^{−τ})
                assert_eq!(r.len(), 2);
                assert!((r[0] - oracle_tau()).abs() < 1e-10);
                assert!((r[1] - 3f64.ln()).abs() < 1e-10);
            }
            other => panic!("{other:?}"),
        }
        let report = solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap();
        assert_eq!(report.solutions.len(), 1);
        // at τ = ln 3 the home side alone overspends (M_h = 1/2 > r_h / m_h), so α < 0
        assert_eq!(report.dropped.len(), 1);
        let s = &report.solutions[0];
        assert!((s.tau - TAU_STAR).abs() < 1e-10);
        assert!((s.alpha.value().unwrap() - ALPHA_STAR).abs() < 1e-9);
        assert!((s.effective_mean - 2.0 * TAU_STAR).abs() < 1e-10);
        assert_eq!(s.classification, Classification::Strict);
        assert!(s.residuals.equation < 1e-9 && s.residuals.constraint < 1e-9);
    }

    #[test]
    fn identical_specs_give_any_alpha() {
        let h = spec("h", 2.0, 0.4, ClaimDistribution::uniform(0.0, 1.0).unwrap());
        let i = spec("i", 2.0, 0.4, ClaimDistribution::uniform(0.0, 1.0).unwrap());
        assert_eq!(constraint_roots(&h, &i, &SearchDomain::default()).unwrap(), ConstraintRoots::IdenticallyZero);
        let report = solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap();
        assert_eq!(report.solutions.len(), 1);
        let s = &report.solutions[0];
        assert_eq!(s.alpha, Alpha::AnyPositive);
        assert!((s.tau - 0.4f64.sqrt()).abs() < 1e-11);
        assert!((s.effective_mean - 2.0 * 0.4f64.sqrt()).abs() < 1e-10);
        assert_eq!(s.classification, Classification::Strict);
        for alpha in [1.0, 7.0] {
            assert!(verify_at(s, alpha, &h, &i).equation < 1e-9);
        }
    }

    #[test]
    fn identical_constraint_unequal_resources_is_dropped() {
        let h = spec("h", 2.0, 0.4, ClaimDistribution::uniform(0.0, 1.0).unwrap());
        let i = spec("i", 2.0, 0.6, ClaimDistribution::uniform(0.0, 1.0).unwrap());
        let report = solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap();
        assert!(report.solutions.is_empty());
        assert_eq!(report.dropped.len(), 1);
    }

    #[test]
    fn no_sign_change_gives_no_roots() {
        // 1·F_h(τ) = τ/2 stays below 4·(1 − e^{−τ}) everywhere on (0, 2]
        let h = spec("h", 1.0, 0.5, ClaimDistribution::uniform(0.0, 2.0).unwrap());
        let i = spec("i", 4.0, 0.5, ClaimDistribution::exponential(1.0).unwrap());
        let roots = constraint_roots(&h, &i, &SearchDomain { upper: Some(2.0), ..Default::default() }).unwrap();
        assert_eq!(roots, ConstraintRoots::Roots(vec![]));
        assert!(solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap().solutions.is_empty());
    }

    #[test]
    fn scaled_down_means_are_inadmissible() {
        let c = 0.8 / (2.0 * TAU_STAR);
        let h = spec("h", 2.0 * c, 0.9 * c, ClaimDistribution::uniform(0.0, 1.0).unwrap());
        let i = spec("i", 3.0 * c, 0.5 * c, ClaimDistribution::exponential(1.0).unwrap());
        let report = solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap();
        assert_eq!(report.solutions.len(), 1);
        let s = &report.solutions[0];
        assert!((s.effective_mean - 0.8).abs() < 1e-9);
        assert_eq!(s.classification, Classification::Inadmissible);
        assert!((s.alpha.value().unwrap() - ALPHA_STAR).abs() < 1e-9);
    }

    #[test]
    fn classification_band() {
        assert_eq!(Classification::of(1.0 + 5e-10), Classification::Critical);
        assert_eq!(Classification::of(1.0 + 5e-9), Classification::Strict);
        assert_eq!(Classification::of(0.99), Classification::Inadmissible);
    }

    #[test]
    fn perturbed_tau_has_visible_constraint_residual() {
        let (h, i) = worked();
        let mut s = solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap().solutions[0].clone();
        s.tau += 0.01;
        assert!(verify(&s, &h, &i).constraint > 1e-3);
    }

    #[test]
    fn atomic_claims_rejected() {
        let h = spec("h", 2.0, 0.9, ClaimDistribution::point_mass(1.0).unwrap());
        let (_, i) = worked();
        assert!(matches!(
            solve_equilibrium(&h, &i, &SearchDomain::default()),
            Err(EquilibriumError::NotAbsolutelyContinuous { .. })
        ));
        let f = spec("f", 2.0, 0.9, ClaimDistribution::finite_discrete(vec![1.0], vec![1.0]).unwrap());
        assert!(constraint_roots(&i, &f, &SearchDomain::default()).is_err());
    }

    #[test]
    fn zero_slope_and_negative_alpha_are_reported() {
        // numerator and denominator signs disagree: alpha < 0 gets dropped
        let h = spec("h", 2.0, 0.1, ClaimDistribution::uniform(0.0, 1.0).unwrap());
        let (_, i) = worked();
        let report = solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap();
        assert!(report.solutions.is_empty());
        assert_eq!(report.dropped.len(), 2);
        // r_i chosen so that m_i M_i(τ*) = r_i exactly while r_h differs
        let m_i = i.claims.partial_mean_at(TAU_STAR);
        let i0 = spec("i", 3.0, 3.0 * m_i, ClaimDistribution::exponential(1.0).unwrap());
        let report = solve_equilibrium(&worked().0, &i0, &SearchDomain::default()).unwrap();
        assert!(report.solutions.is_empty());
        assert!(report.dropped[0].reason.contains("zero slope"));
    }

    #[test]
    fn multiple_roots_sorted_ascending() {
        // φ(τ) = F_h(τ) − F_i(τ) for laws crossing twice
        let h = spec("h", 2.0, 1.0, ClaimDistribution::lognormal(0.0, 0.3).unwrap());
        let i = spec("i", 2.0, 0.2, ClaimDistribution::lognormal(0.0, 1.0).unwrap());
        let roots = constraint_roots(&h, &i, &SearchDomain::default()).unwrap();
        let ConstraintRoots::Roots(r) = roots else { panic!() };
        assert!(!r.is_empty());
        assert!(r.windows(2).all(|w| w[0] < w[1]));
        for t in &r {
            assert!(constraint_gap(&h, &i, *t).abs() < 1e-9);
        }
    }

    #[test]
    fn worked_equilibrium_is_linearly_unstable() {
        let (h, i) = worked();
        let s = solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap().solutions[0].clone();
        let lambda = linearized_ratio_multiplier(&s, &h, &i).unwrap();
        assert!(lambda > 1.0, "{lambda}");
        // finite-difference check of the same map
        let map = |alpha: f64| {
            let tau = bisect(
                |t| h.m() * h.claims.partial_mean_at(t) + alpha * i.m() * i.claims.partial_mean_at(t) - h.r() - alpha * i.r(),
                0.0,
                5.0,
                1e-15,
            );
            alpha * i.m() * i.claims.cdf(tau) / (h.m() * h.claims.cdf(tau))
        };
        let a = s.alpha.value().unwrap();
        let fd = (map(a + 1e-5) - map(a - 1e-5)) / 2e-5;
        assert!((fd - lambda).abs() < 1e-5, "{fd} vs {lambda}");
    }

    #[test]
    fn alpha_json_forms() {
        assert_eq!(serde_json::to_string(&Alpha::AnyPositive).unwrap(), "\"any\"");
        assert_eq!(serde_json::from_str::<Alpha>("0.5").unwrap(), Alpha::Value(0.5));
        assert_eq!(serde_json::from_str::<Alpha>("\"any\"").unwrap(), Alpha::AnyPositive);
        assert!(serde_json::from_str::<Alpha>("\"all\"").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn exactness_and_scaling(
                theta in 0.7..1.05f64,
                m_h in 1.5..3.0f64,
                r_h in 0.1..1.5f64,
                r_i in 0.1..1.5f64,
                lambda in 0.2..5.0f64,
            ) {
                let h = spec("h", m_h, r_h, ClaimDistribution::uniform(0.0, theta).unwrap());
                let i = spec("i", 3.0, r_i, ClaimDistribution::exponential(1.0).unwrap());
                let report = solve_equilibrium(&h, &i, &SearchDomain::default()).unwrap();
                for s in &report.solutions {
                    prop_assert!(s.residuals.constraint < 1e-9);
                    prop_assert!(s.residuals.equation < 1e-9);
                    if let Some(a) = s.alpha.value() {
                        // residual is affine in alpha with the solver's alpha as its zero
                        let e = |x: f64| {
                            h.m() * h.claims.partial_mean_at(s.tau) + x * i.m() * i.claims.partial_mean_at(s.tau)
                                - h.r() - x * i.r()
                        };
                        let mid = e(a + 1.0);
                        prop_assert!((e(a + 2.0) - 2.0 * mid + e(a)).abs() < 1e-9);
                    }
                }
                let hs = spec("h", m_h, lambda * r_h, ClaimDistribution::uniform(0.0, theta).unwrap());
                let is = spec("i", 3.0, lambda * r_i, ClaimDistribution::exponential(1.0).unwrap());
                let rs = constraint_roots(&hs, &is, &SearchDomain::default()).unwrap();
                let r0 = constraint_roots(&h, &i, &SearchDomain::default()).unwrap();
                prop_assert_eq!(&rs, &r0);
                let scaled = solve_equilibrium(&hs, &is, &SearchDomain::default()).unwrap();
                for s in &scaled.solutions {
                    let num = lambda * r_h - m_h * h.claims.partial_mean_at(s.tau);
                    let den = 3.0 * i.claims.partial_mean_at(s.tau) - lambda * r_i;
                    prop_assert!((s.alpha.value().unwrap() - num / den).abs() <= 1e-9 * (num / den).abs().max(1.0));
                }
            }
        }
    }
}
