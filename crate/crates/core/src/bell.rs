//! Bell functionals `Σ c(a…|x…)·p(a…|x…)` as data.
//!
//! The default functional lives in the three-party, three-input,
//! three-output scenario. It is supported on the nine settings with
//! `x + y + z ≡ 0 (mod 3)`, and for each of them it rewards the outcome-sum
//! residue that the ideal qutrit GHZ state produces with certainty under the
//! phased Fourier measurements. Its local bound is 7, the GHZ value is 9 and
//! white noise scores 3.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{
    phased_fourier_basis, probability_table, CountTable, GlobalSetting, ProbabilityTable,
};
use crate::qudit::DensityMatrix;
use crate::states::{ghz_state, GhzParams};

/// Default cap on the number of joint deterministic strategies enumerated.
pub const DEFAULT_LHV_CAP: u128 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellScenario {
    pub parties: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl BellScenario {
    pub fn new(parties: usize, inputs: usize, outputs: usize) -> Result<Self> {
        if parties < 2 || inputs < 1 || outputs < 2 {
            return Err(Error::ShapeMismatch(format!(
                "scenario ({parties}, {inputs}, {outputs}) needs parties >= 2, inputs >= 1, outputs >= 2"
            )));
        }
        Ok(Self { parties, inputs, outputs })
    }

    pub fn tripartite_qutrit() -> Self {
        Self { parties: 3, inputs: 3, outputs: 3 }
    }

    pub fn settings(&self) -> usize {
        self.inputs.pow(self.parties as u32)
    }

    pub fn outcome_tuples(&self) -> usize {
        self.outputs.pow(self.parties as u32)
    }

    fn digits(&self, mut flat: usize, base: usize) -> Vec<usize> {
        let mut out = vec![0; self.parties];
        for p in (0..self.parties).rev() {
            out[p] = flat % base;
            flat /= base;
        }
        out
    }

    pub fn setting_digits(&self, flat: usize) -> Vec<usize> {
        self.digits(flat, self.inputs)
    }

    pub fn outcome_digits(&self, flat: usize) -> Vec<usize> {
        self.digits(flat, self.outputs)
    }

    pub fn flat_setting(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &x| acc * self.inputs + x)
    }

    pub fn flat_outcome(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &a| acc * self.outputs + a)
    }
}

/// Reference bounds on a functional: local, dimension-restricted and
/// algebraic. Dimension tuples are stored sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundChain {
    pub lhv: f64,
    pub dim_bounds: Vec<(Vec<usize>, f64)>,
    pub algebraic_max: f64,
}

impl BoundChain {
    pub fn new(lhv: f64, dim_bounds: BTreeMap<Vec<usize>, f64>, algebraic_max: f64) -> Result<Self> {
        let mut bounds: Vec<(Vec<usize>, f64)> = dim_bounds
            .into_iter()
            .map(|(mut dims, b)| {
                dims.sort_unstable();
                (dims, b)
            })
            .collect();
        bounds.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut prev = lhv;
        for (dims, b) in &bounds {
            if *b < prev {
                return Err(Error::Config(format!("bound {b} for {dims:?} is below the previous link {prev}")));
            }
            prev = *b;
        }
        if algebraic_max < prev {
            return Err(Error::Config(format!("algebraic maximum {algebraic_max} below chain link {prev}")));
        }
        Ok(Self { lhv, dim_bounds: bounds, algebraic_max })
    }

    /// Published chain for the default functional:
    /// `7 ≤ 7.446 (2,2,2) ≤ 7.584 (2,2,3) ≤ 8.225 (2,3,3) ≤ 9`.
    pub fn reference() -> Self {
        let dims = BTreeMap::from([
            (vec![2, 2, 2], 7.446),
            (vec![2, 2, 3], 7.584),
            (vec![2, 3, 3], 8.225),
        ]);
        Self::new(7.0, dims, 9.0).expect("reference chain is ordered")
    }

    pub fn bound_for(&self, dims: &[usize]) -> Option<f64> {
        let mut key = dims.to_vec();
        key.sort_unstable();
        self.dim_bounds.iter().find(|(d, _)| *d == key).map(|(_, b)| *b)
    }
}

/// Highest link of a [`BoundChain`] strictly exceeded by a value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "tier", content = "dims", rename_all = "snake_case")]
pub enum ViolationTier {
    NoViolation,
    Lhv,
    Dimension(Vec<usize>),
}

impl ViolationTier {
    pub fn label(&self) -> String {
        match self {
            Self::NoViolation => "no violation".into(),
            Self::Lhv => "exceeds LHV bound".into(),
            Self::Dimension(d) => format!(
                "exceeds ({}) bound",
                d.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            ),
        }
    }
}

/// Violation means strictly above a bound.
pub fn classify_violation(value: f64, chain: &BoundChain) -> ViolationTier {
    let mut tier = ViolationTier::NoViolation;
    if value > chain.lhv {
        tier = ViolationTier::Lhv;
    }
    for (dims, bound) in &chain.dim_bounds {
        if value > *bound {
            tier = ViolationTier::Dimension(dims.clone());
        }
    }
    tier
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    scenario: BellScenario,
    /// Indexed by `flat_setting · outputs^parties + flat_outcome`.
    coefficients: Vec<f64>,
    pub name: String,
    pub reference: Option<BoundChain>,
}

impl BellFunctional {
    pub fn zeros(scenario: BellScenario, name: impl Into<String>) -> Self {
        Self {
            scenario,
            coefficients: vec![0.0; scenario.settings() * scenario.outcome_tuples()],
            name: name.into(),
            reference: None,
        }
    }

    pub fn scenario(&self) -> BellScenario {
        self.scenario
    }

    fn index(&self, setting: &[usize], outcome: &[usize]) -> Result<usize> {
        let s = self.scenario;
        if setting.len() != s.parties
            || outcome.len() != s.parties
            || setting.iter().any(|&x| x >= s.inputs)
            || outcome.iter().any(|&a| a >= s.outputs)
        {
            return Err(Error::ShapeMismatch(format!(
                "entry {setting:?}/{outcome:?} outside scenario ({}, {}, {})",
                s.parties, s.inputs, s.outputs
            )));
        }
        Ok(s.flat_setting(setting) * s.outcome_tuples() + s.flat_outcome(outcome))
    }

    pub fn coefficient(&self, setting: &[usize], outcome: &[usize]) -> Result<f64> {
        Ok(self.coefficients[self.index(setting, outcome)?])
    }

    pub fn set(&mut self, setting: &[usize], outcome: &[usize], value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::OutOfRange { name: "coefficient", value, range: "finite" });
        }
        let i = self.index(setting, outcome)?;
        self.coefficients[i] = value;
        Ok(())
    }

    /// Coefficients of one setting over flattened outcome tuples.
    pub fn setting_row(&self, flat_setting: usize) -> &[f64] {
        let k = self.scenario.outcome_tuples();
        &self.coefficients[flat_setting * k..(flat_setting + 1) * k]
    }

    /// Settings that carry at least one nonzero coefficient, in order.
    pub fn support(&self) -> Vec<GlobalSetting> {
        (0..self.scenario.settings())
            .filter(|&s| self.setting_row(s).iter().any(|&c| c != 0.0))
            .map(|s| GlobalSetting(self.scenario.setting_digits(s)))
            .collect()
    }

    /// Nonzero entries as `(setting, outcome, coefficient)`.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, Vec<usize>, f64)> + '_ {
        let k = self.scenario.outcome_tuples();
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(move |(i, &c)| (self.scenario.setting_digits(i / k), self.scenario.outcome_digits(i % k), c))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * alpha).collect(),
            reference: None,
            ..self.clone()
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Line-oriented text form: `scenario n m k` followed by one
    /// `settings… outcomes… coefficient` line per nonzero entry.
    pub fn to_text(&self) -> String {
        let s = self.scenario;
        let mut out = format!("# {}\nscenario {} {} {}\n", self.name, s.parties, s.inputs, s.outputs);
        for (setting, outcome, c) in self.terms() {
            for v in setting.iter().chain(&outcome) {
                write!(out, "{v} ").expect("write to String");
            }
            writeln!(out, "{c:.16e}").expect("write to String");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut functional: Option<BellFunctional> = None;
        let mut name = String::from("loaded");
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let (content, comment) = match raw.find('#') {
                Some(pos) => (&raw[..pos], Some(raw[pos + 1..].trim())),
                None => (raw, None),
            };
            if functional.is_none() {
                if let Some(c) = comment.filter(|c| !c.is_empty()) {
                    name = c.to_string();
                }
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let Some(f) = functional.as_mut() else {
                functional = Some(parse_header(&fields, line, &name)?);
                continue;
            };
            let s = f.scenario;
            if fields.len() != 2 * s.parties + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "line {line}: expected {} fields for scenario ({}, {}, {}), found {}",
                    2 * s.parties + 1,
                    s.parties,
                    s.inputs,
                    s.outputs,
                    fields.len()
                )));
            }
            let labels = fields[..2 * s.parties]
                .iter()
                .map(|t| t.parse::<usize>().map_err(|e| Error::Parse { line, msg: format!("bad label {t:?}: {e}") }))
                .collect::<Result<Vec<_>>>()?;
            let (setting, outcome) = labels.split_at(s.parties);
            if let Some(x) = setting.iter().find(|&&x| x >= s.inputs) {
                return Err(Error::Parse { line, msg: format!("input {x} >= {}", s.inputs) });
            }
            if let Some(a) = outcome.iter().find(|&&a| a >= s.outputs) {
                return Err(Error::Parse { line, msg: format!("outcome {a} >= {}", s.outputs) });
            }
            let value: f64 = fields[2 * s.parties]
                .parse()
                .map_err(|e| Error::Parse { line, msg: format!("bad coefficient: {e}") })?;
            if !value.is_finite() {
                return Err(Error::Parse { line, msg: "coefficient is not finite".into() });
            }
            f.set(setting, outcome, value)?;
        }
        functional.ok_or(Error::Parse { line: 1, msg: "missing scenario header".into() })
    }
}

fn parse_header(fields: &[&str], line: usize, name: &str) -> Result<BellFunctional> {
    if fields[0] != "scenario" {
        return Err(Error::Parse { line, msg: format!("expected `scenario <n> <m> <k>`, found {:?}", fields[0]) });
    }
    if fields.len() != 4 {
        return Err(Error::ShapeMismatch(format!("line {line}: scenario header needs three integers")));
    }
    let nums = fields[1..]
        .iter()
        .map(|t| t.parse::<usize>().map_err(|e| Error::Parse { line, msg: format!("bad scenario field {t:?}: {e}") }))
        .collect::<Result<Vec<_>>>()?;
    let scenario = BellScenario::new(nums[0], nums[1], nums[2])
        .map_err(|e| Error::ShapeMismatch(format!("line {line}: {e}")))?;
    Ok(BellFunctional::zeros(scenario, name))
}

pub fn save_functional(f: &BellFunctional, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, f.to_text())?;
    Ok(())
}

pub fn load_functional(path: impl AsRef<Path>) -> Result<BellFunctional> {
    BellFunctional::from_text(&std::fs::read_to_string(path)?)
}

/// Exact outcome table of `state` under phased Fourier settings.
pub fn phased_fourier_table(state: &DensityMatrix, settings: &[GlobalSetting]) -> Result<ProbabilityTable> {
    let d = state
        .profile()
        .uniform_dim()
        .ok_or_else(|| Error::ShapeMismatch("phased Fourier tables need equal local dimensions".into()))?;
    probability_table(state, settings, |_, x| phased_fourier_basis(d, x))
}

/// Table of the ideal `GHZ_{n,k}` state over every setting of the scenario.
pub fn ideal_ghz_table(scenario: BellScenario) -> Result<ProbabilityTable> {
    if scenario.inputs > scenario.outputs {
        return Err(Error::ShapeMismatch("phased Fourier settings need inputs <= outputs".into()));
    }
    let rho = ghz_state(GhzParams::new(scenario.parties, scenario.outputs)?).to_density();
    let settings: Vec<GlobalSetting> =
        (0..scenario.settings()).map(|s| GlobalSetting(scenario.setting_digits(s))).collect();
    phased_fourier_table(&rho, &settings)
}

/// The three-qutrit functional described in the module docs. Winning
/// residues are recomputed from the ideal state on every call.
pub fn default_functional() -> Result<BellFunctional> {
    let scenario = BellScenario::tripartite_qutrit();
    let k = scenario.outputs;
    let table = ideal_ghz_table(scenario)?;
    let mut f = BellFunctional::zeros(scenario, "three-qutrit GHZ residue functional");
    for flat in 0..scenario.settings() {
        let setting = scenario.setting_digits(flat);
        if setting.iter().sum::<usize>() % k != 0 {
            continue;
        }
        let row = table.row(&GlobalSetting(setting.clone())).expect("all settings tabulated");
        let mut mass = vec![0.0; k];
        for (o, p) in row.iter().enumerate() {
            mass[scenario.outcome_digits(o).iter().sum::<usize>() % k] += p;
        }
        let r = mass
            .iter()
            .position(|&m| (m - 1.0).abs() < 1e-9)
            .ok_or_else(|| Error::NoWinningResidue(setting.clone()))?;
        for o in 0..scenario.outcome_tuples() {
            let outcome = scenario.outcome_digits(o);
            if outcome.iter().sum::<usize>() % k == r {
                f.set(&setting, &outcome, 1.0)?;
            }
        }
    }
    f.reference = Some(BoundChain::reference());
    Ok(f)
}

/// `Σ c·p` over the functional's support.
pub fn bell_value(f: &BellFunctional, pt: &ProbabilityTable) -> Result<f64> {
    let s = f.scenario();
    if pt.parties() != s.parties || pt.outcomes() != s.outputs {
        return Err(Error::ShapeMismatch(format!(
            "table with {} parties/{} outcomes for scenario ({}, {}, {})",
            pt.parties(),
            pt.outcomes(),
            s.parties,
            s.inputs,
            s.outputs
        )));
    }
    let mut value = 0.0;
    for setting in f.support() {
        let row = pt.row(&setting).ok_or_else(|| Error::MissingSetting(setting.0.clone()))?;
        let coeffs = f.setting_row(s.flat_setting(&setting.0));
        value += coeffs.iter().zip(row).map(|(c, p)| c * p).sum::<f64>();
    }
    Ok(value)
}

/// Plug-in estimate from counts, with the per-setting totals used.
pub fn bell_value_from_counts(
    f: &BellFunctional,
    counts: &CountTable,
) -> Result<(f64, BTreeMap<GlobalSetting, u64>)> {
    let mut totals = BTreeMap::new();
    for setting in f.support() {
        let total = counts.total(&setting).ok_or_else(|| Error::MissingSetting(setting.0.clone()))?;
        if total == 0 {
            return Err(Error::ZeroTotals(setting.0.clone()));
        }
        totals.insert(setting, total);
    }
    let mut restricted = CountTable::new(counts.parties(), counts.outcomes())?;
    for setting in totals.keys() {
        restricted.insert(setting.clone(), counts.row(setting).expect("checked").to_vec())?;
    }
    Ok((bell_value(f, &restricted.frequencies()?)?, totals))
}

/// Each party's output for every input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeterministicStrategy {
    pub outputs: Vec<Vec<usize>>,
}

impl DeterministicStrategy {
    pub fn value(&self, f: &BellFunctional) -> f64 {
        f.support()
            .iter()
            .map(|setting| {
                let outcome: Vec<usize> =
                    setting.0.iter().enumerate().map(|(p, &x)| self.outputs[p][x]).collect();
                f.coefficient(&setting.0, &outcome).expect("in range")
            })
            .sum()
    }
}

/// Precomputed evaluation data for enumerating deterministic strategies.
struct LhvTable {
    /// Per supported setting: its coefficient row and its per-party inputs.
    rows: Vec<(Vec<usize>, Vec<f64>)>,
    per_party: usize,
    outputs: usize,
    inputs: usize,
    parties: usize,
}

impl LhvTable {
    fn new(f: &BellFunctional) -> Self {
        let s = f.scenario();
        let rows = f
            .support()
            .into_iter()
            .map(|g| {
                let row = f.setting_row(s.flat_setting(&g.0)).to_vec();
                (g.0, row)
            })
            .collect();
        Self {
            rows,
            per_party: s.outputs.pow(s.inputs as u32),
            outputs: s.outputs,
            inputs: s.inputs,
            parties: s.parties,
        }
    }

    /// Output of a single-party strategy index for input `x` (input 0 is the
    /// most significant digit).
    fn output(&self, strategy: usize, x: usize) -> usize {
        strategy / self.outputs.pow((self.inputs - 1 - x) as u32) % self.outputs
    }

    fn evaluate(&self, strategies: &[usize]) -> f64 {
        self.rows
            .iter()
            .map(|(setting, row)| {
                let flat = setting
                    .iter()
                    .zip(strategies)
                    .fold(0, |acc, (&x, &st)| acc * self.outputs + self.output(st, x));
                row[flat]
            })
            .sum()
    }

    fn decode(&self, mut joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.parties];
        for p in (0..self.parties).rev() {
            out[p] = joint % self.per_party;
            joint /= self.per_party;
        }
        out
    }

    /// Best `(value, joint index)` with the first party fixed.
    fn best_with_first(&self, first: usize) -> (f64, usize) {
        let rest = self.per_party.pow((self.parties - 1) as u32);
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for r in 0..rest {
            let joint = first * rest + r;
            let v = self.evaluate(&self.decode(joint));
            if v > best.0 {
                best = (v, joint);
            }
        }
        best
    }
}

fn better(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Exact local bound by enumerating every deterministic strategy. The first
/// party's strategies are split across worker threads when `parallel`; ties
/// resolve to the lowest joint strategy index either way.
pub fn lhv_max_bruteforce_with(
    f: &BellFunctional,
    cap: u128,
    parallel: bool,
) -> Result<(f64, DeterministicStrategy)> {
    let s = f.scenario();
    let per_party = (s.outputs as u128).pow(s.inputs as u32);
    let joint = per_party.checked_pow(s.parties as u32).unwrap_or(u128::MAX);
    if joint > cap {
        return Err(Error::ScenarioTooLarge { strategies: joint, cap });
    }
    let table = LhvTable::new(f);
    let init = (f64::NEG_INFINITY, usize::MAX);
    let (value, index) = if parallel {
        (0..table.per_party)
            .into_par_iter()
            .map(|first| table.best_with_first(first))
            .reduce(|| init, better)
    } else {
        (0..table.per_party).map(|first| table.best_with_first(first)).fold(init, better)
    };
    let outputs = table
        .decode(index)
        .into_iter()
        .map(|st| (0..s.inputs).map(|x| table.output(st, x)).collect())
        .collect();
    Ok((value, DeterministicStrategy { outputs }))
}

pub fn lhv_max_bruteforce(f: &BellFunctional) -> Result<(f64, DeterministicStrategy)> {
    lhv_max_bruteforce_with(f, DEFAULT_LHV_CAP, true)
}

/// Value on the uniform distribution.
pub fn white_noise_value(f: &BellFunctional) -> f64 {
    f.coefficients().iter().sum::<f64>() / f.scenario().outcome_tuples() as f64
}

/// Visibility `v` at which `q_max·v + (1−v)·white = threshold`, with `q_max`
/// the ideal GHZ value under phased Fourier settings.
pub fn critical_visibility_bell(f: &BellFunctional, threshold: f64) -> Result<f64> {
    let q_max = bell_value(f, &ideal_ghz_table(f.scenario())?)?;
    let white = white_noise_value(f);
    if threshold >= q_max {
        return Err(Error::OutOfRange { name: "threshold", value: threshold, range: "< quantum maximum" });
    }
    Ok(((threshold - white) / (q_max - white)).max(0.0))
}
