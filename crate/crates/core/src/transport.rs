//! Transport view of the allocation rule.
//!
//! A cost matrix satisfies the Monge condition when
//! `c[i][j] + c[i'][j'] ≤ c[i][j'] + c[i'][j]` for all `i < i'`, `j < j'`.
//! Checking adjacent 2×2 blocks is enough: the inequality for any
//! `(i, i') × (j, j')` rectangle is the sum of the adjacent inequalities over
//! the unit cells it covers, since the interior terms telescope. With a
//! tolerance the adjacent check certifies the full condition up to
//! `tol · (i' − i)(j' − j)`.
//!
//! Under the Monge condition the northwest-corner plan is optimal. Its
//! cumulative flows are `min(A_i, B_j)` for cumulative marginals `A`, `B`,
//! which is the discrete comonotone coupling; the continuous counterpart is
//! the quantile coupling in [`quantile_coupling_cost`].

use crate::dists::ClaimDistribution;
use crate::equilibrium::{solve_equilibrium, Alpha, Classification, EquilibriumError, SearchDomain};
use crate::numeric::gauss_legendre;
use crate::society::SubPopulationSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BALANCE_TOL: f64 = 1e-9;
pub const DEFAULT_QUAD_POINTS: usize = 512;
pub const MAX_ORACLE_UNITS: u64 = 14;
pub const MAX_ORACLE_DIMENSION: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("marginal: {0}")]
    InvalidMarginal(String),
    #[error("cost matrix: {0}")]
    InvalidCost(String),
    #[error("cost matrix is {rows}x{cols}, marginals need {m}x{n}")]
    DimensionMismatch { rows: usize, cols: usize, m: usize, n: usize },
    #[error("unbalanced marginals: supply {supply} vs demand {demand}")]
    Unbalanced { supply: f64, demand: f64 },
    #[error("mass {mass} is not an integer multiple of the unit {unit}")]
    NotIntegral { mass: f64, unit: f64 },
    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("exponent p must be finite and >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("quad_points must be positive")]
    NoQuadraturePoints,
    #[error("candidate grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMarginal {
    pub masses: Vec<f64>,
    /// Support points, strictly ascending when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<f64>>,
}

impl DiscreteMarginal {
    pub fn new(masses: Vec<f64>) -> Result<Self, TransportError> {
        Self::validate(masses, None)
    }

    pub fn with_labels(masses: Vec<f64>, labels: Vec<f64>) -> Result<Self, TransportError> {
        Self::validate(masses, Some(labels))
    }

    fn validate(masses: Vec<f64>, labels: Option<Vec<f64>>) -> Result<Self, TransportError> {
        if masses.is_empty() {
            return Err(TransportError::InvalidMarginal("no bins".into()));
        }
        if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(TransportError::InvalidMarginal("masses must be finite and >= 0".into()));
        }
        if masses.iter().sum::<f64>() <= 0.0 {
            return Err(TransportError::InvalidMarginal("total mass must be positive".into()));
        }
        if let Some(l) = &labels {
            if l.len() != masses.len() {
                return Err(TransportError::InvalidMarginal("labels and masses differ in length".into()));
            }
            if l.windows(2).any(|w| !(w[0] < w[1])) || l.iter().any(|x| !x.is_finite()) {
                return Err(TransportError::InvalidMarginal("labels must be finite and strictly ascending".into()));
            }
        }
        Ok(Self { masses, labels })
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.masses
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect()
    }

    /// `bins` equal-mass bins of a claim law, labelled by their conditional
    /// medians.
    pub fn from_quantiles(dist: &ClaimDistribution, bins: usize) -> Result<Self, TransportError> {
        if bins == 0 {
            return Err(TransportError::InvalidMarginal("no bins".into()));
        }
        let labels: Vec<f64> = (0..bins).map(|k| dist.quantile_at((k as f64 + 0.5) / bins as f64)).collect();
        if labels.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(TransportError::InvalidMarginal("law has repeated quantiles; use an explicit marginal".into()));
        }
        Self::with_labels(vec![1.0 / bins as f64; bins], labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    /// Row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, TransportError> {
        if rows == 0 || cols == 0 {
            return Err(TransportError::InvalidCost("empty matrix".into()));
        }
        if entries.len() != rows * cols {
            return Err(TransportError::InvalidCost(format!("{} entries for a {rows}x{cols} matrix", entries.len())));
        }
        if let Some(k) = entries.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(TransportError::InvalidCost(format!(
                "entry ({}, {}) = {} is not finite and >= 0",
                k / cols,
                k % cols,
                entries[k]
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TransportError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TransportError::InvalidCost("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// `|x_i − y_j|^p`.
    pub fn from_points(x: &[f64], y: &[f64], p: f64) -> Result<Self, TransportError> {
        let entries = x.iter().flat_map(|a| y.iter().map(move |b| (a - b).abs().powf(p))).collect();
        Self::new(x.len(), y.len(), entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }
}

/// Adjacent 2×2 Monge check.
pub fn check_monge(cost: &CostMatrix, tol: f64) -> bool {
    (0..cost.rows.saturating_sub(1)).all(|i| {
        (0..cost.cols.saturating_sub(1))
            .all(|j| cost.get(i, j) + cost.get(i + 1, j + 1) <= cost.get(i, j + 1) + cost.get(i + 1, j) + tol)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub flows: Vec<f64>,
    pub row_marginals: Vec<f64>,
    pub col_marginals: Vec<f64>,
    pub total_cost: Option<f64>,
}

impl TransportPlan {
    pub fn flow(&self, i: usize, j: usize) -> f64 {
        self.flows[i * self.cols + j]
    }

    pub fn flow_rows(&self) -> Vec<Vec<f64>> {
        self.flows.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn positive_entries(&self) -> usize {
        self.flows.iter().filter(|&&x| x > 0.0).count()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.flows.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.flow(i, j)).sum()).collect()
    }

    /// `Σ_{k ≤ i, l ≤ j} x_{kl}` for every cell.
    pub fn cumulative_flows(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.flows.len()];
        for i in 0..self.rows {
            let mut row_acc = 0.0;
            for j in 0..self.cols {
                row_acc += self.flow(i, j);
                let above = if i > 0 { out[(i - 1) * self.cols + j] } else { 0.0 };
                out[i * self.cols + j] = above + row_acc;
            }
        }
        out
    }

    pub fn cost(&self, cost: &CostMatrix) -> Result<f64, TransportError> {
        if cost.rows != self.rows || cost.cols != self.cols {
            return Err(TransportError::DimensionMismatch { rows: cost.rows, cols: cost.cols, m: self.rows, n: self.cols });
        }
        Ok(self.flows.iter().zip(&cost.entries).map(|(x, c)| x * c).sum())
    }

    pub fn priced(mut self, cost: &CostMatrix) -> Result<Self, TransportError> {
        self.total_cost = Some(self.cost(cost)?);
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    /// Totals must agree within [`BALANCE_TOL`].
    #[default]
    Strict,
    /// Rescale the demand side to the supply total.
    NormalizeDemand,
}

fn balanced(a: &DiscreteMarginal, b: &DiscreteMarginal, balance: Balance) -> Result<Vec<f64>, TransportError> {
    let (supply, demand) = (a.total(), b.total());
    match balance {
        Balance::Strict if (supply - demand).abs() > BALANCE_TOL => Err(TransportError::Unbalanced { supply, demand }),
        Balance::Strict => Ok(b.masses.clone()),
        Balance::NormalizeDemand => Ok(b.masses.iter().map(|m| m * supply / demand).collect()),
    }
}

/// Classical northwest-corner traversal.
pub fn northwest_plan(a: &DiscreteMarginal, b: &DiscreteMarginal, balance: Balance) -> Result<TransportPlan, TransportError> {
    let demand = balanced(a, b, balance)?;
    let (m, n) = (a.len(), demand.len());
    let mut flows = vec![0.0; m * n];
    let mut supply_left = a.masses[0];
    let mut demand_left = demand[0];
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        if supply_left < demand_left {
            flows[i * n + j] = supply_left;
            demand_left -= supply_left;
            i += 1;
            supply_left = a.masses.get(i).copied().unwrap_or(0.0);
        } else if demand_left < supply_left {
            flows[i * n + j] = demand_left;
            supply_left -= demand_left;
            j += 1;
            demand_left = demand.get(j).copied().unwrap_or(0.0);
        } else {
            flows[i * n + j] = supply_left;
            i += 1;
            j += 1;
            supply_left = a.masses.get(i).copied().unwrap_or(0.0);
            demand_left = demand.get(j).copied().unwrap_or(0.0);
        }
    }
    Ok(TransportPlan { rows: m, cols: n, flows, row_marginals: a.masses.clone(), col_marginals: demand, total_cost: None })
}

/// The same plan from the cumulative coupling `X_ij = min(A_i, B_j)`: cell
/// `(i, j)` carries the overlap of `[A_{i−1}, A_i]` and `[B_{j−1}, B_j]`.
pub fn cumulative_min_plan(
    a: &DiscreteMarginal,
    b: &DiscreteMarginal,
    balance: Balance,
) -> Result<TransportPlan, TransportError> {
    let demand = balanced(a, b, balance)?;
    let big_a = a.cumulative();
    let big_b = DiscreteMarginal { masses: demand.clone(), labels: None }.cumulative();
    let (m, n) = (a.len(), demand.len());
    let mut flows = vec![0.0; m * n];
    for i in 0..m {
        let a0 = if i > 0 { big_a[i - 1] } else { 0.0 };
        for j in 0..n {
            let b0 = if j > 0 { big_b[j - 1] } else { 0.0 };
            flows[i * n + j] = (big_a[i].min(big_b[j]) - a0.max(b0)).max(0.0);
        }
    }
    Ok(TransportPlan { rows: m, cols: n, flows, row_marginals: a.masses.clone(), col_marginals: demand, total_cost: None })
}

fn to_units(masses: &[f64], unit: f64) -> Result<Vec<u64>, TransportError> {
    masses
        .iter()
        .map(|&mass| {
            let k = (mass / unit).round();
            if (mass / unit - k).abs() > 1e-9 {
                Err(TransportError::NotIntegral { mass, unit })
            } else {
                Ok(k as u64)
            }
        })
        .collect()
}

/// Exact optimum by enumerating integer flow tables in multiples of
/// `mass_unit`, with pruning on the running cost. Limited to
/// [`MAX_ORACLE_UNITS`] units and `m + n ≤` [`MAX_ORACLE_DIMENSION`].
pub fn brute_force_optimal(
    a: &DiscreteMarginal,
    b: &DiscreteMarginal,
    cost: &CostMatrix,
    mass_unit: f64,
) -> Result<f64, TransportError> {
    let (m, n) = (a.len(), b.len());
    if cost.rows != m || cost.cols != n {
        return Err(TransportError::DimensionMismatch { rows: cost.rows, cols: cost.cols, m, n });
    }
    if m + n > MAX_ORACLE_DIMENSION {
        return Err(TransportError::TooLarge(format!("m + n = {} > {MAX_ORACLE_DIMENSION}", m + n)));
    }
    if !(mass_unit > 0.0 && mass_unit.is_finite()) {
        return Err(TransportError::InvalidMarginal(format!("mass unit {mass_unit}")));
    }
    let supply = to_units(&a.masses, mass_unit)?;
    let mut demand = to_units(&b.masses, mass_unit)?;
    let total: u64 = supply.iter().sum();
    if total != demand.iter().sum::<u64>() {
        return Err(TransportError::Unbalanced { supply: a.total(), demand: b.total() });
    }
    if total > MAX_ORACLE_UNITS {
        return Err(TransportError::TooLarge(format!("{total} units > {MAX_ORACLE_UNITS}")));
    }
    let mut best = f64::INFINITY;
    search_rows(cost, &supply, &mut demand, 0, 0.0, &mut best);
    Ok(best * mass_unit)
}

fn search_rows(cost: &CostMatrix, supply: &[u64], demand: &mut [u64], i: usize, spent: f64, best: &mut f64) {
    if spent >= *best {
        return;
    }
    if i == supply.len() {
        *best = spent;
        return;
    }
    fill_row(cost, supply, demand, i, 0, supply[i], spent, best);
}

#[allow(clippy::too_many_arguments)]
fn fill_row(
    cost: &CostMatrix,
    supply: &[u64],
    demand: &mut [u64],
    i: usize,
    j: usize,
    left: u64,
    spent: f64,
    best: &mut f64,
) {
    if spent >= *best {
        return;
    }
    let n = demand.len();
    if j == n - 1 {
        if left <= demand[j] {
            demand[j] -= left;
            search_rows(cost, supply, demand, i + 1, spent + left as f64 * cost.get(i, j), best);
            demand[j] += left;
        }
        return;
    }
    let remaining_capacity: u64 = demand[j + 1..].iter().sum();
    let lo = left.saturating_sub(remaining_capacity);
    for x in lo..=left.min(demand[j]) {
        demand[j] -= x;
        fill_row(cost, supply, demand, i, j + 1, left - x, spent + x as f64 * cost.get(i, j), best);
        demand[j] += x;
    }
}

const TAIL_DECADES: i32 = 7;
const PANEL_ORDER: usize = 8;
pub const QUANTILE_CLIP: f64 = 1e-9;

/// `∫ |Q_src(u) − Q_dst(u)|^p du` over `[10⁻⁹, 1 − 10⁻⁹]`.
///
/// Composite Gauss–Legendre with 8-point panels: seven decade panels at each
/// tail (`[10⁻⁹, 10⁻⁸]`, …, `[10⁻³, 10⁻²]`) absorb the quantile
/// singularities of unbounded laws, and the remaining nodes fill `[0.01, 0.99]`
/// with equal panels.
pub fn quantile_coupling_cost(
    src: &ClaimDistribution,
    dst: &ClaimDistribution,
    p: f64,
    quad_points: usize,
) -> Result<f64, TransportError> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(TransportError::InvalidExponent(p));
    }
    if quad_points == 0 {
        return Err(TransportError::NoQuadraturePoints);
    }
    let tail_panels = 2 * TAIL_DECADES as usize;
    let interior = (quad_points / PANEL_ORDER).saturating_sub(tail_panels).max(1);
    let mut breaks = Vec::with_capacity(tail_panels + interior + 1);
    breaks.extend((0..=TAIL_DECADES).map(|k| 10f64.powi(k - 9)));
    breaks.extend((1..interior).map(|k| 0.01 + 0.98 * k as f64 / interior as f64));
    breaks.extend((0..=TAIL_DECADES).rev().map(|k| 1.0 - 10f64.powi(k - 9)));
    let (nodes, weights) = gauss_legendre(PANEL_ORDER);
    let integrand = |u: f64| (src.quantile_at(u) - dst.quantile_at(u)).abs().powf(p);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        total += half * nodes.iter().zip(&weights).map(|(x, wt)| wt * integrand(mid + half * x)).sum::<f64>();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleDemand {
    pub candidate: ClaimDistribution,
    pub tau_tilde: f64,
    pub alpha_tilde: Alpha,
    pub effective_mean: f64,
}

/// First strict equilibrium when `candidate` replaces the home claim law.
/// Critical solutions do not qualify.
pub fn admissible_demand(
    candidate: &ClaimDistribution,
    home: &SubPopulationSpec,
    immigrant: &SubPopulationSpec,
    domain: &SearchDomain,
) -> Result<Option<AdmissibleDemand>, TransportError> {
    let replaced = SubPopulationSpec { claims: candidate.clone(), ..home.clone() };
    let report = solve_equilibrium(&replaced, immigrant, domain)?;
    Ok(report.solutions.into_iter().find(|s| s.classification == Classification::Strict).map(|s| AdmissibleDemand {
        candidate: candidate.clone(),
        tau_tilde: s.tau,
        alpha_tilde: s.alpha,
        effective_mean: s.effective_mean,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCandidate {
    /// Position in the supplied grid.
    pub index: usize,
    pub demand: AdmissibleDemand,
    pub cost: f64,
}

/// Admissible members of `grid`, ordered by quantile-coupling cost from
/// `source` (ties keep grid order).
pub fn control_search(
    source: &ClaimDistribution,
    grid: &[ClaimDistribution],
    home: &SubPopulationSpec,
    immigrant: &SubPopulationSpec,
    p: f64,
    domain: &SearchDomain,
    quad_points: usize,
) -> Result<Vec<ControlCandidate>, TransportError> {
    if grid.is_empty() {
        return Err(TransportError::EmptyGrid);
    }
    let mut ranked = Vec::new();
    for (index, candidate) in grid.iter().enumerate() {
        if let Some(demand) = admissible_demand(candidate, home, immigrant, domain)? {
            let cost = quantile_coupling_cost(source, candidate, p, quad_points)?;
            ranked.push(ControlCandidate { index, demand, cost });
        }
    }
    ranked.sort_by(|x, y| x.cost.total_cmp(&y.cost));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{OffspringDistribution, ResourceModel};

    fn marginal(m: &[f64]) -> DiscreteMarginal {
        DiscreteMarginal::new(m.to_vec()).unwrap()
    }

    #[test]
    fn monge_hand_cases() {
        let x = [0.0, 0.5, 2.0];
        let y = [0.1, 0.3, 1.0, 4.0];
        assert!(check_monge(&CostMatrix::from_points(&x, &y, 2.0).unwrap(), 0.0));
        assert!(!check_monge(&CostMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), 1e-12));
        assert!(check_monge(&CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(), 0.0));
        assert!(check_monge(&CostMatrix::from_rows(&[vec![3.0, 1.0, 2.0]]).unwrap(), 0.0));
    }

    #[test]
    fn northwest_hand_cases() {
        let p = northwest_plan(&marginal(&[1.0]), &marginal(&[1.0]), Balance::Strict).unwrap();
        assert_eq!(p.flows, vec![1.0]);
        let p = northwest_plan(&marginal(&[2.0, 1.0]), &marginal(&[1.0, 2.0]), Balance::Strict).unwrap();
        assert_eq!(p.flow_rows(), vec![vec![1.0, 1.0], vec![0.0, 1.0]]);
        let c = CostMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(p.clone().priced(&c).unwrap().total_cost, Some(1.0));
        assert_eq!(brute_force_optimal(&marginal(&[2.0, 1.0]), &marginal(&[1.0, 2.0]), &c, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn unbalanced_marginals() {
        let a = marginal(&[1.0, 1.0]);
        let b = marginal(&[1.0, 3.0]);
        assert!(matches!(northwest_plan(&a, &b, Balance::Strict), Err(TransportError::Unbalanced { .. })));
        let p = northwest_plan(&a, &b, Balance::NormalizeDemand).unwrap();
        assert_eq!(p.col_marginals, vec![0.5, 1.5]);
        assert_eq!(p.flow_rows(), vec![vec![0.5, 0.5], vec![0.0, 1.0]]);
    }

    #[test]
    fn traversal_and_cumulative_min_agree() {
        let a = marginal(&[0.3, 0.0, 0.2, 0.5]);
        let b = marginal(&[0.25, 0.25, 0.1, 0.4]);
        let nw = northwest_plan(&a, &b, Balance::Strict).unwrap();
        let cm = cumulative_min_plan(&a, &b, Balance::Strict).unwrap();
        for (x, y) in nw.flows.iter().zip(&cm.flows) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(nw.positive_entries() <= 4 + 4 - 1);
    }

    #[test]
    fn single_row_oracle_is_forced() {
        let a = marginal(&[4.0]);
        let b = marginal(&[1.0, 2.0, 1.0]);
        let c = CostMatrix::from_rows(&[vec![0.5, 2.0, 1.0]]).unwrap();
        assert_eq!(brute_force_optimal(&a, &b, &c, 1.0).unwrap(), 0.5 + 4.0 + 1.0);
    }

    #[test]
    fn oracle_limits_and_units() {
        let c = CostMatrix::new(1, 1, vec![1.0]).unwrap();
        assert!(matches!(
            brute_force_optimal(&marginal(&[15.0]), &marginal(&[15.0]), &c, 1.0),
            Err(TransportError::TooLarge(_))
        ));
        assert!(matches!(
            brute_force_optimal(&marginal(&[1.5]), &marginal(&[1.5]), &c, 1.0),
            Err(TransportError::NotIntegral { .. })
        ));
        assert_eq!(brute_force_optimal(&marginal(&[1.5]), &marginal(&[1.5]), &c, 0.5).unwrap(), 1.5);
        let big = CostMatrix::new(5, 4, vec![0.0; 20]).unwrap();
        assert!(brute_force_optimal(&marginal(&[1.0; 5]), &marginal(&[1.0, 1.0, 1.0, 2.0]), &big, 1.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(DiscreteMarginal::new(vec![]).is_err());
        assert!(DiscreteMarginal::new(vec![0.0, 0.0]).is_err());
        assert!(DiscreteMarginal::new(vec![-1.0, 2.0]).is_err());
        assert!(DiscreteMarginal::with_labels(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(CostMatrix::new(1, 2, vec![1.0, -1.0]).is_err());
        assert!(CostMatrix::new(1, 2, vec![1.0]).is_err());
        assert!(CostMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn quantile_cost_examples() {
        let u1 = ClaimDistribution::uniform(0.0, 1.0).unwrap();
        let u2 = ClaimDistribution::uniform(0.0, 2.0).unwrap();
        let c = quantile_coupling_cost(&u1, &u2, 2.0, DEFAULT_QUAD_POINTS).unwrap();
        assert!((c - 1.0 / 3.0).abs() < 1e-6);
        let e = ClaimDistribution::exponential(1.0).unwrap();
        assert_eq!(quantile_coupling_cost(&e, &e, 1.0, DEFAULT_QUAD_POINTS).unwrap(), 0.0);
        let a = ClaimDistribution::point_mass(0.3).unwrap();
        let b = ClaimDistribution::point_mass(1.0).unwrap();
        let c = quantile_coupling_cost(&a, &b, 1.0, DEFAULT_QUAD_POINTS).unwrap();
        assert!((c - 0.7).abs() < 1e-8);
        // two exponentials: |Q1 − Q2| = (1/1 − 1/2)·(−ln(1 − u)), so p = 2 gives 0.25·2
        let e2 = ClaimDistribution::exponential(2.0).unwrap();
        let c = quantile_coupling_cost(&e, &e2, 2.0, DEFAULT_QUAD_POINTS).unwrap();
        assert!((c - 0.5).abs() < 1e-6, "{c}");
        assert!(quantile_coupling_cost(&e, &e2, 0.5, 64).is_err());
    }

    fn spec(m: f64, r: f64, claims: ClaimDistribution) -> SubPopulationSpec {
        SubPopulationSpec::new(
            "x",
            OffspringDistribution::poisson(m).unwrap(),
            ResourceModel::deterministic(r).unwrap(),
            claims,
        )
    }

    #[test]
    fn admissible_demand_matches_solver() {
        let home = spec(2.0, 0.9, ClaimDistribution::uniform(0.0, 1.0).unwrap());
        let immigrant = spec(3.0, 0.5, ClaimDistribution::exponential(1.0).unwrap());
        let d = admissible_demand(&home.claims, &home, &immigrant, &SearchDomain::default()).unwrap().unwrap();
        let s = &solve_equilibrium(&home, &immigrant, &SearchDomain::default()).unwrap().solutions[0];
        assert_eq!((d.tau_tilde, d.alpha_tilde), (s.tau, s.alpha));
        // claims far above the immigrant's bulk: m_h F stays below m_i F_i until
        // F_i is close to 1, and at the crossing m_h F is far below 1
        let far = ClaimDistribution::uniform(50.0, 60.0).unwrap();
        assert_eq!(admissible_demand(&far, &spec(1.2, 0.9, far.clone()), &immigrant, &SearchDomain::default()).unwrap(), None);
    }

    #[test]
    fn control_search_ranks_source_first() {
        let home = spec(2.0, 0.9, ClaimDistribution::uniform(0.0, 1.0).unwrap());
        let immigrant = spec(3.0, 0.5, ClaimDistribution::exponential(1.0).unwrap());
        let grid: Vec<_> = [1.25, 1.0, 0.75].iter().map(|t| ClaimDistribution::uniform(0.0, *t).unwrap()).collect();
        let ranked = control_search(&home.claims, &grid, &home, &immigrant, 2.0, &SearchDomain::default(), 512).unwrap();
        assert!(!ranked.is_empty());
        assert_eq!(ranked[0].index, 1);
        assert_eq!(ranked[0].cost, 0.0);
        assert!(ranked.windows(2).all(|w| w[0].cost <= w[1].cost));
        assert!(matches!(
            control_search(&home.claims, &[], &home, &immigrant, 2.0, &SearchDomain::default(), 512),
            Err(TransportError::EmptyGrid)
        ));
        let far = vec![ClaimDistribution::uniform(50.0, 60.0).unwrap()];
        let none = control_search(&home.claims, &far, &spec(1.2, 0.9, far[0].clone()), &immigrant, 2.0, &SearchDomain::default(), 512);
        assert!(none.unwrap().is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn masses(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0..3.0f64, len)
        }

        proptest! {
            #[test]
            fn nw_marginals_sparsity_and_cumulative_min(a in masses(1..7usize).prop_filter("mass", |v| v.iter().sum::<f64>() > 0.1),
                                                         b in masses(1..7usize).prop_filter("mass", |v| v.iter().sum::<f64>() > 0.1)) {
                let a = marginal(&a);
                let b = marginal(&b);
                let plan = northwest_plan(&a, &b, Balance::NormalizeDemand).unwrap();
                for (s, t) in plan.row_sums().iter().zip(&plan.row_marginals) {
                    prop_assert!((s - t).abs() < 1e-9);
                }
                for (s, t) in plan.col_sums().iter().zip(&plan.col_marginals) {
                    prop_assert!((s - t).abs() < 1e-9);
                }
                prop_assert!(plan.positive_entries() <= plan.rows + plan.cols - 1);
                prop_assert!(plan.flows.iter().all(|&x| x >= 0.0));
                let big_a = a.cumulative();
                let big_b = DiscreteMarginal { masses: plan.col_marginals.clone(), labels: None }.cumulative();
                let cum = plan.cumulative_flows();
                for i in 0..plan.rows {
                    for j in 0..plan.cols {
                        prop_assert!((cum[i * plan.cols + j] - big_a[i].min(big_b[j])).abs() < 1e-12 * 10.0);
                    }
                }
            }

            #[test]
            fn quantile_cost_symmetric(r1 in 0.5..3.0f64, r2 in 0.5..3.0f64, p in 1.0..3.0f64) {
                let x = ClaimDistribution::exponential(r1).unwrap();
                let y = ClaimDistribution::lognormal(0.0, r2 / 4.0).unwrap();
                let c1 = quantile_coupling_cost(&x, &y, p, 256).unwrap();
                let c2 = quantile_coupling_cost(&y, &x, p, 256).unwrap();
                prop_assert_eq!(c1, c2);
            }
        }
    }
}
