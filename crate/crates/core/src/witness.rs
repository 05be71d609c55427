//! Two-basis GHZ fidelity witness, exact fidelity decompositions and
//! critical visibilities.
//!
//! The witness is `W = p(identical | C^{⊗n}) + p(sum ≡ 0 mod d | F^{⊗n})`.
//! For qutrits, `W > 5/3` certifies genuinely three-dimensional multipartite
//! entanglement and `F_GHZ ≥ W − 1`. For other `d` the numbers are computed
//! but carry no certificate (`certified = false`).

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{
    computational_basis, fourier_basis, outcome_distribution, probability_table, CountTable, GlobalSetting,
    MeasurementBasis, ProbabilityTable,
};
use crate::qudit::{CMatrix, DensityMatrix, DimProfile, C64};
use crate::states::{ghz_state, GhzParams};

/// Witness value above which qutrit GME of dimension three is certified.
pub const WITNESS_THRESHOLD: f64 = 5.0 / 3.0;
/// Largest GHZ fidelity of a state whose GME dimension is at most two.
pub const BISEPARABLE_FIDELITY_BOUND: f64 = 2.0 / 3.0;

/// Setting label for all parties in the computational basis.
pub const COMPUTATIONAL_LABEL: usize = 0;
/// Setting label for all parties in the Fourier basis.
pub const FOURIER_LABEL: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessResult {
    pub n: usize,
    pub d: usize,
    pub p_identical: f64,
    pub p_sum_zero: f64,
    pub w: f64,
    pub fidelity_lower_bound: f64,
    pub threshold: f64,
    pub biseparable_fidelity_bound: f64,
    pub violated: bool,
    /// Only qutrit witnesses carry the dimension certificate.
    pub certified: bool,
}

impl WitnessResult {
    pub fn from_terms(n: usize, d: usize, p_identical: f64, p_sum_zero: f64) -> Self {
        let w = p_identical + p_sum_zero;
        Self {
            n,
            d,
            p_identical,
            p_sum_zero,
            w,
            fidelity_lower_bound: w - 1.0,
            threshold: WITNESS_THRESHOLD,
            biseparable_fidelity_bound: BISEPARABLE_FIDELITY_BOUND,
            violated: w > WITNESS_THRESHOLD,
            certified: d == 3,
        }
    }
}

fn uniform_shape(profile: &DimProfile) -> Result<(usize, usize)> {
    let d = profile
        .uniform_dim()
        .ok_or_else(|| Error::ShapeMismatch(format!("witness needs equal local dimensions, got {:?}", profile.dims())))?;
    Ok((profile.parties(), d))
}

fn basis_for_label(label: usize, d: usize) -> Result<MeasurementBasis> {
    match label {
        COMPUTATIONAL_LABEL => computational_basis(d),
        FOURIER_LABEL => fourier_basis(d),
        other => Err(Error::OutOfRange { name: "witness setting", value: other as f64, range: "{0, 1}" }),
    }
}

fn all_equal(digits: &[usize]) -> bool {
    digits.windows(2).all(|w| w[0] == w[1])
}

fn sums_to_zero(digits: &[usize], d: usize) -> bool {
    digits.iter().sum::<usize>() % d == 0
}

fn success_mass(probs: &[f64], profile: &DimProfile, pred: impl Fn(&[usize]) -> bool) -> f64 {
    probs
        .iter()
        .enumerate()
        .filter(|(flat, _)| pred(&profile.digits(*flat)))
        .map(|(_, p)| p)
        .sum()
}

/// Probability that all parties report the same computational outcome.
pub fn p_identical(state: &DensityMatrix) -> Result<f64> {
    let (n, d) = uniform_shape(state.profile())?;
    let c = computational_basis(d)?;
    let probs = outcome_distribution(state, &vec![&c; n])?;
    Ok(success_mass(&probs, state.profile(), all_equal))
}

/// Probability that the Fourier outcomes sum to zero modulo `d`.
pub fn p_sum_zero(state: &DensityMatrix) -> Result<f64> {
    let (n, d) = uniform_shape(state.profile())?;
    let f = fourier_basis(d)?;
    let probs = outcome_distribution(state, &vec![&f; n])?;
    Ok(success_mass(&probs, state.profile(), |digits| sums_to_zero(digits, d)))
}

pub fn witness_w(state: &DensityMatrix) -> Result<WitnessResult> {
    let (n, d) = uniform_shape(state.profile())?;
    Ok(WitnessResult::from_terms(n, d, p_identical(state)?, p_sum_zero(state)?))
}

/// The two global settings the witness needs.
pub fn witness_settings(n: usize) -> [GlobalSetting; 2] {
    [
        GlobalSetting::uniform(n, COMPUTATIONAL_LABEL),
        GlobalSetting::uniform(n, FOURIER_LABEL),
    ]
}

/// Exact outcome table for both witness settings.
pub fn witness_table(state: &DensityMatrix) -> Result<ProbabilityTable> {
    let (n, d) = uniform_shape(state.profile())?;
    probability_table(state, &witness_settings(n), |_, label| basis_for_label(label, d))
}

/// Success and trial counts behind a count-based witness estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessTotals {
    pub identical_successes: u64,
    pub computational_total: u64,
    pub sum_zero_successes: u64,
    pub fourier_total: u64,
}

impl WitnessTotals {
    /// Both settings pooled into one trial stream.
    pub fn pooled_total(&self) -> u64 {
        self.computational_total + self.fourier_total
    }
}

/// Plug-in witness estimate from counts in the computational (label 0) and
/// Fourier (label 1) settings.
pub fn witness_from_counts(counts: &CountTable) -> Result<(WitnessResult, WitnessTotals)> {
    let n = counts.parties();
    let d = counts.outcomes();
    let [comp, four] = witness_settings(n);
    let tally = |setting: &GlobalSetting, pred: &dyn Fn(&[usize]) -> bool| -> Result<(u64, u64)> {
        let row = counts.row(setting).ok_or_else(|| Error::MissingSetting(setting.0.clone()))?;
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(Error::ZeroTotals(setting.0.clone()));
        }
        let hits = row
            .iter()
            .enumerate()
            .filter(|(flat, _)| pred(&counts.outcome_digits(*flat)))
            .map(|(_, c)| c)
            .sum();
        Ok((hits, total))
    };
    let (identical_successes, computational_total) = tally(&comp, &all_equal)?;
    let (sum_zero_successes, fourier_total) = tally(&four, &|digits| sums_to_zero(digits, d))?;
    let totals = WitnessTotals { identical_successes, computational_total, sum_zero_successes, fourier_total };
    let result = WitnessResult::from_terms(
        n,
        d,
        identical_successes as f64 / computational_total as f64,
        sum_zero_successes as f64 / fourier_total as f64,
    );
    Ok((result, totals))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Coherence {
    pub i: usize,
    pub j: usize,
    /// `Re⟨i…i|ρ|j…j⟩`.
    pub re: f64,
}

/// GHZ fidelity split into branch populations and branch coherences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FidelityDecomposition {
    pub populations: Vec<f64>,
    pub coherences: Vec<Coherence>,
    pub fidelity: f64,
}

/// `F = (1/d)[Σ_i ⟨i…i|ρ|i…i⟩ + 2 Σ_{i<j} Re⟨i…i|ρ|j…j⟩]`.
pub fn ghz_fidelity_decomposition(rho: &DensityMatrix) -> Result<FidelityDecomposition> {
    let (n, d) = uniform_shape(rho.profile())?;
    let p = GhzParams::new(n, d)?;
    let m = rho.matrix();
    let populations: Vec<f64> = (0..d).map(|i| m[(p.branch_index(i), p.branch_index(i))].re).collect();
    let mut coherences = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            coherences.push(Coherence { i, j, re: m[(p.branch_index(i), p.branch_index(j))].re });
        }
    }
    let fidelity =
        (populations.iter().sum::<f64>() + 2.0 * coherences.iter().map(|c| c.re).sum::<f64>()) / d as f64;
    Ok(FidelityDecomposition { populations, coherences, fidelity })
}

fn check_parity_string(s: &str, n: usize) -> Result<()> {
    if s.len() != n || !s.chars().all(|c| c == 'X' || c == 'Y') {
        return Err(Error::Config(format!("parity string {s:?} must be {n} characters from {{X, Y}}")));
    }
    Ok(())
}

/// All `2^n` strings over `{X, Y}` in lexicographic order.
pub fn parity_strings(n: usize) -> Vec<String> {
    (0..1usize << n)
        .map(|mask| {
            (0..n)
                .map(|k| if mask >> (n - 1 - k) & 1 == 1 { 'Y' } else { 'X' })
                .collect()
        })
        .collect()
}

/// Two-level Pauli operator on levels `{i, j}` of a `d`-level system.
fn subspace_pauli(d: usize, i: usize, j: usize, kind: char) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    match kind {
        'X' => {
            m[(i, j)] = C64::new(1.0, 0.0);
            m[(j, i)] = C64::new(1.0, 0.0);
        }
        _ => {
            m[(i, j)] = C64::new(0.0, -1.0);
            m[(j, i)] = C64::new(0.0, 1.0);
        }
    }
    m
}

/// Exact expectation of a subspace parity string such as `"XYY"` on levels
/// `{i, j}` of every party.
pub fn parity_expectation(rho: &DensityMatrix, i: usize, j: usize, string: &str) -> Result<f64> {
    let (n, d) = uniform_shape(rho.profile())?;
    check_parity_string(string, n)?;
    if i >= d || j >= d || i == j {
        return Err(Error::Config(format!("levels ({i}, {j}) invalid for d = {d}")));
    }
    let op = string
        .chars()
        .map(|c| subspace_pauli(d, i, j, c))
        .reduce(|acc, m| acc.kronecker(&m))
        .expect("n >= 1");
    Ok((rho.matrix() * op).trace().re)
}

fn parity_sum(expectations: &BTreeMap<String, f64>, n: usize, odd: bool) -> Result<f64> {
    let mut acc = 0.0;
    for s in parity_strings(n) {
        let ys = s.chars().filter(|&c| c == 'Y').count();
        if (ys % 2 == 1) != odd {
            continue;
        }
        let value = *expectations.get(&s).ok_or_else(|| Error::MissingExpectation(s.clone()))?;
        let sign = if (ys / 2) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * value;
    }
    Ok(acc / (1u64 << n) as f64)
}

/// `Re⟨i…i|ρ|j…j⟩ = 2^{-n} Σ_{even #Y} (−1)^{#Y/2} ⟨S⟩`.
pub fn coherence_from_parities(expectations: &BTreeMap<String, f64>, n: usize) -> Result<f64> {
    parity_sum(expectations, n, false)
}

/// `Im⟨i…i|ρ|j…j⟩ = −2^{-n} Σ_{odd #Y} (−1)^{(#Y−1)/2} ⟨S⟩`.
pub fn imag_coherence_from_parities(expectations: &BTreeMap<String, f64>, n: usize) -> Result<f64> {
    parity_sum(expectations, n, true).map(|v| -v)
}

/// Visibility at which the isotropic GHZ mixture reaches the witness
/// threshold, `v = (5/3 − W_white)/(W_ghz − W_white)`.
pub fn critical_visibility_witness(n: usize, d: usize) -> Result<f64> {
    let p = GhzParams::new(n, d)?;
    let ideal = witness_w(&ghz_state(p).to_density())?.w;
    let white = witness_w(&DensityMatrix::maximally_mixed(p.profile()))?.w;
    Ok((WITNESS_THRESHOLD - white) / (ideal - white))
}
