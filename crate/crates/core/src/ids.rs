//! Information-directed sampling for Beta-Bernoulli bandits.
//!
//! One decision runs four stages on a [`BetaPosterior`]:
//!
//! 1. `alpha[i]`, the posterior probability that arm `i` has the largest mean,
//!    as `∫ f_i(x) Π_{k≠i} F_k(x) dx`;
//! 2. the conditional means `M[i][j] = E[X_j | arm i is maximal]`;
//! 3. the expected optimal reward `ρ* = Σ alpha[i] M[i][i]`, the immediate
//!    regrets `Δ[i] = ρ* − E[X_i]` and the information gains
//!    `g[i] = Σ_j alpha[j] KL(M[j][i] ‖ E[X_i])`;
//! 4. the distribution `π` minimizing `(π·Δ)² / (π·g)`, searched over all
//!    distributions supported on at most two arms.
//!
//! All integrals are trapezoid sums on a [`Grid`]. Leave-one-out products of
//! the CDFs are formed directly, so no `f_i / F_i` ratio is ever evaluated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{bernoulli_kl, BetaPosterior};
use crate::special::{BetaDensity, Grid};

/// Rows of `M` for arms with `alpha` below this use unconditional means.
pub const ALPHA_FLOOR: f64 = 1e-8;
/// Below this every gain counts as zero and IDS falls back to pure exploitation.
pub const GAIN_FLOOR: f64 = 1e-12;
/// Pairs whose information ratios differ by less than this are treated as tied.
pub const PSI_TIE_TOL: f64 = 1e-12;

const SCAN_STEPS: usize = 1000;
const GOLDEN_TOL: f64 = 1e-9;
const PROB_SUM_TOL: f64 = 1e-12;

/// Square matrix of conditional means, row-major: `get(i, j) = E[X_j | i is maximal]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMeans {
    size: usize,
    values: Vec<f64>,
}

impl ConditionalMeans {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != size) {
            return Err(Error::LengthMismatch {
                expected: size,
                got: bad.len(),
            });
        }
        Ok(Self {
            size,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.get(i, i)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Per-step IDS quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdsQuantities {
    pub alpha: Vec<f64>,
    pub m: ConditionalMeans,
    pub delta: Vec<f64>,
    pub gain: Vec<f64>,
    pub rho_star: f64,
}

/// Regret/gain triple produced from `alpha` and `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGain {
    pub delta: Vec<f64>,
    pub gain: Vec<f64>,
    pub rho_star: f64,
}

/// A probability vector over arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty action distribution".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain(
                "action probabilities must be nonnegative and finite".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self { probs })
    }

    pub fn point_mass(num_arms: usize, arm: usize) -> Self {
        let mut probs = vec![0.0; num_arms];
        probs[arm] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_arms(&self) -> usize {
        self.probs.len()
    }

    /// Indices with nonzero probability.
    pub fn support(&self) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Draws an arm by inverting the cumulative distribution with one uniform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if p > 0.0 && u < acc {
                return i;
            }
        }
        self.probs
            .iter()
            .rposition(|&p| p > 0.0)
            .expect("distribution has positive mass")
    }

    /// `Σ π_i v_i`.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

/// Minimizer of the information ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiMinimum {
    pub pi: ActionDistribution,
    /// `(π·Δ)² / (π·g)`; `+∞` when no arm carries information.
    pub psi: f64,
}

/// Outcome of one IDS decision.
#[derive(Debug, Clone, PartialEq)]
pub struct IdsDecision {
    pub arm: usize,
    pub quantities: IdsQuantities,
    pub pi: ActionDistribution,
    pub psi: f64,
}

/// Grid samples of one arm's posterior.
///
/// Integrals against the density are taken cell by cell from CDF increments,
/// `∫_cell f·G ≈ (F(b) − F(a))·(G(a) + G(b))/2`, which stays exact for the
/// density factor even when it is sharply peaked or singular at an endpoint.
#[derive(Debug, Clone)]
struct ArmTable {
    params: (f64, f64),
    cdf: Vec<f64>,
    /// `Q(y) = ∫₀^y x f(x) dx`, exact via `x·Beta(a, b) = mean·Beta(a + 1, b)`.
    partial_mean: Vec<f64>,
    /// Per-cell probability mass.
    mass: Vec<f64>,
    /// Per-cell first-moment mass.
    moment: Vec<f64>,
}

impl ArmTable {
    fn build(density: &BetaDensity, grid: &Grid) -> Self {
        let xs = grid.points();
        let (b1, b2) = density.shape();
        let mean = density.mean();
        let shifted = BetaDensity::new_unchecked(b1 + 1.0, b2);
        let cdf: Vec<f64> = xs.iter().map(|&x| density.cdf(x)).collect();
        let partial_mean: Vec<f64> = xs.iter().map(|&x| mean * shifted.cdf(x)).collect();
        let mass = cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
        let moment = partial_mean
            .windows(2)
            .map(|w| (w[1] - w[0]).max(0.0))
            .collect();
        Self {
            params: (b1, b2),
            cdf,
            partial_mean,
            mass,
            moment,
        }
    }
}

fn build_tables(state: &BetaPosterior, grid: &Grid) -> Vec<ArmTable> {
    state
        .densities()
        .iter()
        .map(|d| ArmTable::build(d, grid))
        .collect()
}

/// `Π_{k∉skip} F_k(x_g)` at every grid point.
fn cdf_product(tables: &[ArmTable], skip: &[usize], points: usize) -> Vec<f64> {
    let mut out = vec![1.0; points];
    for (k, table) in tables.iter().enumerate() {
        if skip.contains(&k) {
            continue;
        }
        for (o, f) in out.iter_mut().zip(&table.cdf) {
            *o *= f;
        }
    }
    out
}

/// `Σ_cells weight[c]·(g[c] + g[c+1])/2`.
fn cell_sum(weight: &[f64], g: &[f64]) -> f64 {
    weight
        .iter()
        .zip(g.windows(2))
        .map(|(w, pair)| w * 0.5 * (pair[0] + pair[1]))
        .sum()
}

fn alpha_from_tables(tables: &[ArmTable], grid: &Grid) -> Vec<f64> {
    let n = grid.len();
    (0..tables.len())
        .map(|i| cell_sum(&tables[i].mass, &cdf_product(tables, &[i], n)))
        .collect()
}

fn m_from_tables(tables: &[ArmTable], alpha: &[f64], grid: &Grid) -> ConditionalMeans {
    let k = tables.len();
    let n = grid.len();
    let means: Vec<f64> = tables
        .iter()
        .map(|t| t.params.0 / (t.params.0 + t.params.1))
        .collect();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        let row = &mut values[i * k..(i + 1) * k];
        if alpha[i] < ALPHA_FLOOR {
            row.copy_from_slice(&means);
            continue;
        }
        let others = cdf_product(tables, &[i], n);
        row[i] = (cell_sum(&tables[i].moment, &others) / alpha[i]).clamp(0.0, 1.0);
        for j in (0..k).filter(|&j| j != i) {
            let rest = cdf_product(tables, &[i, j], n);
            let q_j = &tables[j].partial_mean;
            let integrand: Vec<f64> = rest.iter().zip(q_j).map(|(r, q)| r * q).collect();
            row[j] = (cell_sum(&tables[i].mass, &integrand) / alpha[i]).clamp(0.0, 1.0);
        }
    }
    ConditionalMeans { size: k, values }
}

/// Posterior probability of optimality of every arm.
pub fn compute_alpha(state: &BetaPosterior, grid: &Grid) -> Vec<f64> {
    alpha_from_tables(&build_tables(state, grid), grid)
}

/// Conditional means `M[i][j] = E[X_j | X_k ≤ X_i ∀k]`.
///
/// `alpha` must come from [`compute_alpha`] on the same state and grid.
pub fn compute_m(state: &BetaPosterior, alpha: &[f64], grid: &Grid) -> Result<ConditionalMeans> {
    check_len(state.num_arms(), alpha.len())?;
    Ok(m_from_tables(&build_tables(state, grid), alpha, grid))
}

/// Expected optimal reward, immediate regrets and information gains.
pub fn compute_delta_gain(
    state: &BetaPosterior,
    alpha: &[f64],
    m: &ConditionalMeans,
) -> Result<DeltaGain> {
    let k = state.num_arms();
    check_len(k, alpha.len())?;
    check_len(k, m.size())?;
    let means = state.means();
    let rho_star: f64 = (0..k).map(|i| alpha[i] * m.get(i, i)).sum();
    let delta = means.iter().map(|mu| rho_star - mu).collect();
    let gain = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| alpha[j] * bernoulli_kl(m.get(j, i), means[i]))
                .sum()
        })
        .collect();
    Ok(DeltaGain {
        delta,
        gain,
        rho_star,
    })
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}

/// Information ratio of the mixture `q·e_i + (1−q)·e_j`.
fn pair_ratio(q: f64, d: (f64, f64), g: (f64, f64)) -> f64 {
    let num = q * d.0 + (1.0 - q) * d.1;
    let den = q * g.0 + (1.0 - q) * g.1;
    if num == 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num * num / den
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Best weight `q` on the first arm of a pair and the ratio it attains.
fn minimize_pair(d: (f64, f64), g: (f64, f64)) -> (f64, f64) {
    let f = |q: f64| pair_ratio(q, d, g);
    let step = 1.0 / SCAN_STEPS as f64;
    let (mut best_q, mut best_v) = (0.0_f64, f(0.0));
    for s in 1..=SCAN_STEPS {
        let q = if s == SCAN_STEPS {
            1.0
        } else {
            s as f64 * step
        };
        let v = f(q);
        // a flat objective (identical arms) resolves to the most balanced mixture
        let tied = (v - best_v).abs() <= PSI_TIE_TOL * best_v.abs().max(1.0);
        if (v < best_v && !tied) || (tied && (q - 0.5).abs() < (best_q - 0.5).abs()) {
            best_q = q;
            best_v = v;
        }
    }
    if best_v.is_finite() && best_v > 0.0 {
        let lo = (best_q - step).max(0.0);
        let hi = (best_q + step).min(1.0);
        let (q, v) = golden_section(f, lo, hi, GOLDEN_TOL);
        if v < best_v - PSI_TIE_TOL * best_v {
            return (q, v);
        }
    }
    (best_q, best_v)
}

/// Minimizes `(π·Δ)² / (π·g)` over distributions on at most two arms.
///
/// Negative entries of `delta` and `gain` (quadrature noise) are treated as
/// zero. When every gain is at or below [`GAIN_FLOOR`] the result is a point
/// mass on the arm with the smallest regret and `psi = +∞`.
pub fn minimize_psi(delta: &[f64], gain: &[f64]) -> Result<PsiMinimum> {
    check_len(delta.len(), gain.len())?;
    let k = delta.len();
    if k == 0 {
        return Err(Error::Domain("minimize_psi needs at least one arm".into()));
    }
    if delta.iter().chain(gain).any(|v| !v.is_finite()) {
        return Err(Error::Domain("regrets and gains must be finite".into()));
    }
    let delta: Vec<f64> = delta.iter().map(|d| d.max(0.0)).collect();
    let gain: Vec<f64> = gain.iter().map(|g| g.max(0.0)).collect();

    if gain.iter().all(|&g| g <= GAIN_FLOOR) {
        let arm = argmin(&delta);
        return Ok(PsiMinimum {
            pi: ActionDistribution::point_mass(k, arm),
            psi: f64::INFINITY,
        });
    }
    if k == 1 {
        return Ok(PsiMinimum {
            pi: ActionDistribution::point_mass(1, 0),
            psi: pair_ratio(1.0, (delta[0], 0.0), (gain[0], 0.0)),
        });
    }

    let mut best: Option<(usize, usize, f64, f64)> = None;
    for i in 0..k {
        for j in (i + 1)..k {
            let (q, v) = minimize_pair((delta[i], delta[j]), (gain[i], gain[j]));
            let better = match best {
                None => true,
                Some((_, _, _, bv)) => v < bv - PSI_TIE_TOL,
            };
            if better {
                best = Some((i, j, q, v));
            }
        }
    }
    let (i, j, q, _) = best.expect("at least one pair");
    let mut probs = vec![0.0; k];
    probs[i] = q;
    probs[j] = 1.0 - q;
    let pi = ActionDistribution { probs };
    let num = pi.expect(&delta);
    let den = pi.expect(&gain);
    let psi = if num == 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num * num / den
    };
    Ok(PsiMinimum { pi, psi })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Computes every IDS quantity for `state`.
pub fn compute_quantities(state: &BetaPosterior, grid: &Grid) -> IdsQuantities {
    quantities_from_tables(state, &build_tables(state, grid), grid)
}

fn quantities_from_tables(
    state: &BetaPosterior,
    tables: &[ArmTable],
    grid: &Grid,
) -> IdsQuantities {
    let alpha = alpha_from_tables(tables, grid);
    let m = m_from_tables(tables, &alpha, grid);
    let DeltaGain {
        delta,
        gain,
        rho_star,
    } = compute_delta_gain(state, &alpha, &m).expect("consistent dimensions");
    IdsQuantities {
        alpha,
        m,
        delta,
        gain,
        rho_star,
    }
}

fn decide<R: Rng + ?Sized>(quantities: IdsQuantities, rng: &mut R) -> Result<IdsDecision> {
    let PsiMinimum { pi, psi } = minimize_psi(&quantities.delta, &quantities.gain)?;
    let arm = pi.sample(rng);
    Ok(IdsDecision {
        arm,
        quantities,
        pi,
        psi,
    })
}

/// One IDS decision: quantities, information-ratio minimization, then a draw from `π`.
pub fn ids_select_arm<R: Rng + ?Sized>(
    state: &BetaPosterior,
    grid: &Grid,
    rng: &mut R,
) -> Result<IdsDecision> {
    decide(compute_quantities(state, grid), rng)
}

/// IDS decision maker that keeps each arm's grid tables between calls.
///
/// Only the pulled arm's posterior changes per round, so rebuilding one table
/// per decision instead of K gives identical results at a fraction of the cost.
#[derive(Debug, Clone)]
pub struct IdsSampler {
    grid: Grid,
    tables: Vec<ArmTable>,
}

impl IdsSampler {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            tables: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn refresh(&mut self, state: &BetaPosterior) {
        if self.tables.len() != state.num_arms() {
            self.tables = build_tables(state, &self.grid);
            return;
        }
        for (table, &params) in self.tables.iter_mut().zip(state.arms()) {
            if table.params != params {
                let density = BetaDensity::new_unchecked(params.0, params.1);
                *table = ArmTable::build(&density, &self.grid);
            }
        }
    }

    pub fn quantities(&mut self, state: &BetaPosterior) -> IdsQuantities {
        self.refresh(state);
        quantities_from_tables(state, &self.tables, &self.grid)
    }

    pub fn select<R: Rng + ?Sized>(
        &mut self,
        state: &BetaPosterior,
        rng: &mut R,
    ) -> Result<IdsDecision> {
        let quantities = self.quantities(state);
        decide(quantities, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::BetaPrior;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(arms: &[(f64, f64)]) -> BetaPosterior {
        BetaPosterior::new(arms.to_vec()).unwrap()
    }

    #[test]
    fn alpha_symmetric_for_identical_arms() {
        let grid = Grid::default();
        for k in 2..=5 {
            let s = state(&vec![(3.0, 4.0); k]);
            for a in compute_alpha(&s, &grid) {
                assert!((a - 1.0 / k as f64).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn alpha_two_arm_closed_form() {
        // P(X2 ≥ X1) with X1 uniform is E[X2] = 2/3
        let alpha = compute_alpha(&state(&[(1.0, 1.0), (2.0, 1.0)]), &Grid::default());
        assert!((alpha[0] - 1.0 / 3.0).abs() < 1e-3);
        assert!((alpha[1] - 2.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn alpha_concentrates_on_dominant_arm() {
        // against two uniform arms, P(θ0 is largest) = E[θ0²]
        let alpha = compute_alpha(
            &state(&[(50.0, 10.0), (1.0, 1.0), (1.0, 1.0)]),
            &Grid::default(),
        );
        let exact = 50.0 * 51.0 / (60.0 * 61.0);
        assert!((alpha[0] - exact).abs() < 1e-4);
        assert!(alpha[0] > alpha[1] && (alpha[1] - alpha[2]).abs() < 1e-12);
    }

    #[test]
    fn m_two_uniform_arms_order_statistics() {
        let grid = Grid::default();
        let s = state(&[(1.0, 1.0), (1.0, 1.0)]);
        let alpha = compute_alpha(&s, &grid);
        let m = compute_m(&s, &alpha, &grid).unwrap();
        assert!((m.get(0, 0) - 2.0 / 3.0).abs() < 2e-3);
        assert!((m.get(1, 1) - 2.0 / 3.0).abs() < 2e-3);
        assert!((m.get(0, 1) - 1.0 / 3.0).abs() < 2e-3);
        assert!((m.get(1, 0) - 1.0 / 3.0).abs() < 2e-3);
    }

    #[test]
    fn m_floor_rows_use_unconditional_means() {
        let grid = Grid::default();
        let s = state(&[(400.0, 2.0), (2.0, 400.0), (3.0, 5.0)]);
        let alpha = compute_alpha(&s, &grid);
        assert!(alpha[1] < ALPHA_FLOOR);
        let m = compute_m(&s, &alpha, &grid).unwrap();
        assert_eq!(m.row(1), s.means().as_slice());
    }

    #[test]
    fn m_rejects_wrong_alpha_length() {
        let s = state(&[(1.0, 1.0), (1.0, 1.0)]);
        assert!(compute_m(&s, &[0.5], &Grid::default()).is_err());
    }

    #[test]
    fn delta_gain_identities() {
        let grid = Grid::default();
        let s = state(&[(2.0, 3.0), (2.0, 3.0)]);
        let q = compute_quantities(&s, &grid);
        assert!((q.delta[0] - q.delta[1]).abs() < 1e-12);
        assert!((q.gain[0] - q.gain[1]).abs() < 1e-12);

        let s = state(&[(1.0, 1.0), (2.0, 1.0), (5.0, 9.0)]);
        let q = compute_quantities(&s, &grid);
        let rho: f64 = (0..3).map(|i| q.alpha[i] * q.m.get(i, i)).sum();
        assert_eq!(rho, q.rho_star);
        for (i, mu) in s.means().iter().enumerate() {
            assert_eq!(q.delta[i], q.rho_star - mu);
        }
    }

    #[test]
    fn psi_zero_regret_arm_wins() {
        let r = minimize_psi(&[0.0, 0.3], &[0.1, 0.2]).unwrap();
        assert_eq!(r.pi.probs(), &[1.0, 0.0]);
        assert_eq!(r.psi, 0.0);
    }

    #[test]
    fn psi_equal_regret_prefers_larger_gain() {
        let r = minimize_psi(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.pi.probs(), &[0.0, 1.0]);
        assert!((r.psi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn psi_fallback_without_information() {
        let r = minimize_psi(&[0.3, 0.1, 0.1], &[0.0, 1e-13, -1e-7]).unwrap();
        assert_eq!(r.pi.probs(), &[0.0, 1.0, 0.0]);
        assert!(r.psi.is_infinite());
    }

    #[test]
    fn psi_rejects_mismatched_or_nonfinite() {
        assert!(minimize_psi(&[0.1, 0.2], &[0.1]).is_err());
        assert!(minimize_psi(&[0.1, f64::NAN], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn psi_interior_mixture() {
        // arm 0: no regret, no information; arm 1: costly but informative
        let r = minimize_psi(&[0.05, 0.4], &[1e-4, 0.3]).unwrap();
        assert_eq!(r.pi.support().len(), 2);
        let q = r.pi.probs()[0];
        // closed-form stationary point of ((q d0 + (1-q) d1)^2) / (q g0 + (1-q) g1)
        let (d0, d1, g0, g1) = (0.05f64, 0.4f64, 1e-4f64, 0.3f64);
        let f = |q: f64| (q * d0 + (1.0 - q) * d1).powi(2) / (q * g0 + (1.0 - q) * g1);
        let fine = (0..=1_000_000)
            .map(|s| s as f64 / 1e6)
            .map(f)
            .fold(f64::INFINITY, f64::min);
        assert!(r.psi <= fine + 1e-12, "{} vs {}", r.psi, fine);
        assert!(q > 0.0 && q < 1.0);
    }

    #[test]
    fn select_is_deterministic_for_a_seed() {
        let grid = Grid::uniform(201).unwrap();
        let s = state(&[(2.0, 5.0), (4.0, 3.0), (1.0, 1.0)]);
        let a = ids_select_arm(&s, &grid, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = ids_select_arm(&s, &grid, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn select_identical_arms_is_balanced() {
        let grid = Grid::uniform(201).unwrap();
        let s = BetaPosterior::from_prior(2, BetaPrior::UNIFORM).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10_000;
        let first = (0..n)
            .filter(|_| ids_select_arm(&s, &grid, &mut rng).unwrap().arm == 0)
            .count();
        let freq = first as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "arm 0 frequency {freq}");
    }

    #[test]
    fn select_certain_optimal_arm() {
        // a zero-regret arm is played with probability one
        let grid = Grid::default();
        let s = state(&[(1.0, 1.0), (2.0, 1.0)]);
        let mut q = compute_quantities(&s, &grid);
        q.delta = vec![0.0, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert_eq!(decide(q.clone(), &mut rng).unwrap().arm, 0);
        }
    }

    #[test]
    fn sampler_matches_uncached_path() {
        let grid = Grid::uniform(301).unwrap();
        let mut sampler = IdsSampler::new(grid.clone());
        let mut s = BetaPosterior::from_prior(3, BetaPrior::UNIFORM).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        for t in 0..30 {
            let a = sampler.select(&s, &mut r1).unwrap();
            let b = ids_select_arm(&s, &grid, &mut r2).unwrap();
            assert_eq!(a, b);
            s = s.update(a.arm, t % 3 == 0).unwrap();
        }
    }

    #[test]
    fn action_distribution_validation() {
        assert!(ActionDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(ActionDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(ActionDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(ActionDistribution::new(vec![]).is_err());
        let d = ActionDistribution::point_mass(4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| d.sample(&mut rng) == 2));
        assert_eq!(d.support(), vec![2]);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..=5).prop_flat_map(|k| {
            (
                prop::collection::vec(0.001f64..1.0, k),
                prop::collection::vec(0.001f64..1.0, k),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn psi_beats_random_distributions((delta, gain) in instance(), seed in any::<u64>()) {
            let best = minimize_psi(&delta, &gain).unwrap();
            let sum: f64 = best.pi.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(best.pi.support().len() <= 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10_000 {
                let raw: Vec<f64> = (0..delta.len()).map(|_| -rng.random::<f64>().ln()).collect();
                let total: f64 = raw.iter().sum();
                let pi: Vec<f64> = raw.iter().map(|r| r / total).collect();
                let d: f64 = pi.iter().zip(&delta).map(|(p, v)| p * v).sum();
                let g: f64 = pi.iter().zip(&gain).map(|(p, v)| p * v).sum();
                prop_assert!(best.psi <= d * d / g * (1.0 + 1e-9));
            }
        }

        #[test]
        fn psi_scales_inversely_with_gain((delta, gain) in instance(), c in 0.01f64..100.0) {
            let base = minimize_psi(&delta, &gain).unwrap();
            let scaled_gain: Vec<f64> = gain.iter().map(|g| g * c).collect();
            let scaled = minimize_psi(&delta, &scaled_gain).unwrap();
            prop_assert_eq!(base.pi.support(), scaled.pi.support());
            let want = base.psi / c;
            prop_assert!((scaled.psi - want).abs() <= 1e-9 * want.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn quantities_invariants(
            arms in prop::collection::vec((1.0f64..60.0, 1.0f64..60.0), 2..=4)
        ) {
            let grid = Grid::uniform(1001).unwrap();
            let s = BetaPosterior::new(arms).unwrap();
            let q = compute_quantities(&s, &grid);
            let total: f64 = q.alpha.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-3);
            prop_assert!(q.alpha.iter().all(|&a| a >= 0.0));
            let means = s.means();
            for i in 0..s.num_arms() {
                prop_assert!(q.delta[i] >= -1e-6);
                prop_assert!(q.gain[i] >= -1e-6);
                if q.alpha[i] >= ALPHA_FLOOR {
                    prop_assert!(q.m.get(i, i) >= means[i] - 1e-3);
                }
                for j in 0..s.num_arms() {
                    let v = q.m.get(i, j);
                    prop_assert!((0.0..=1.0).contains(&v));
                    if q.alpha[i] > 1e-4 {
                        prop_assert!(q.m.get(i, i) >= v - 1e-6);
                    }
                }
            }
        }
    }
}
