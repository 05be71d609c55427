//! Local measurement bases, outcome tables, Born-rule evaluation, trigger
//! projection and multinomial count sampling.
//!
//! Setting and outcome labels are 0-based. For the two-basis witness, label
//! 0 is the computational basis and label 1 the Fourier basis; for the Bell
//! test, label `x` is the phased Fourier basis `x`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qudit::{
    normalize_parties, CMatrix, CVector, DensityMatrix, DimProfile, StateVector, C64, TOLERANCE,
};

/// Orthonormal `d`-outcome basis for one party at one setting.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBasis {
    d: usize,
    vectors: Vec<StateVector>,
    label: usize,
}

impl MeasurementBasis {
    pub fn new(vectors: Vec<StateVector>, label: usize) -> Result<Self> {
        let d = vectors.len();
        if d < 2 {
            return Err(Error::ShapeMismatch("a basis needs at least two vectors".into()));
        }
        for v in &vectors {
            if v.profile().dims() != [d] {
                return Err(Error::ShapeMismatch(format!(
                    "basis vector with profile {:?} in a {d}-outcome basis",
                    v.profile().dims()
                )));
            }
        }
        for (i, u) in vectors.iter().enumerate() {
            for (j, v) in vectors.iter().enumerate() {
                let overlap = u.inner(v)?;
                let expected = if i == j { 1.0 } else { 0.0 };
                if (overlap - C64::new(expected, 0.0)).norm() > TOLERANCE {
                    return Err(Error::ShapeMismatch(format!(
                        "basis vectors {i} and {j} are not orthonormal (overlap {overlap})"
                    )));
                }
            }
        }
        Ok(Self { d, vectors, label })
    }

    fn from_amplitudes(d: usize, label: usize, amp: impl Fn(usize, usize) -> C64) -> Self {
        let profile = DimProfile::uniform(1, d).expect("d >= 2");
        let vectors = (0..d)
            .map(|a| {
                let v = CVector::from_fn(d, |j, _| amp(a, j));
                StateVector::new(profile.clone(), v).expect("unit vector by construction")
            })
            .collect();
        Self::new(vectors, label).expect("orthonormal by construction")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn vector(&self, outcome: usize) -> &StateVector {
        &self.vectors[outcome]
    }

    /// Matrix whose row `a` is `⟨v_a|`.
    fn analysis_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.d, self.d, |a, j| self.vectors[a].amplitudes()[j].conj())
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::OutOfRange { name: "dimension", value: d as f64, range: ">= 2" });
    }
    Ok(())
}

pub fn computational_basis(d: usize) -> Result<MeasurementBasis> {
    check_dim(d)?;
    Ok(MeasurementBasis::from_amplitudes(d, 0, |a, j| {
        C64::new(if a == j { 1.0 } else { 0.0 }, 0.0)
    }))
}

/// Vector `a` has amplitudes `ω^{aj}/√d` with `ω = e^{2πi/d}`.
pub fn fourier_basis(d: usize) -> Result<MeasurementBasis> {
    phased_fourier_basis(d, 0).map(|b| MeasurementBasis { label: 1, ..b })
}

/// Vector `a` has amplitudes `ω^{aj}·γ^{xj}/√d` with `ω = e^{2πi/d}` and
/// `γ = e^{2πi/d²}`. Setting `x = 0` is the plain Fourier basis.
pub fn phased_fourier_basis(d: usize, x: usize) -> Result<MeasurementBasis> {
    check_dim(d)?;
    if x >= d {
        return Err(Error::OutOfRange { name: "setting", value: x as f64, range: "0..d" });
    }
    let norm = 1.0 / (d as f64).sqrt();
    let d2 = (d * d) as f64;
    Ok(MeasurementBasis::from_amplitudes(d, x, |a, j| {
        // ω^{aj} γ^{xj} = exp(2πi (d·a + x)·j / d²)
        let phase = 2.0 * PI * (((d * a + x) * j) % (d * d)) as f64 / d2;
        C64::from_polar(norm, phase)
    }))
}

/// Per-party setting labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GlobalSetting(pub Vec<usize>);

impl GlobalSetting {
    pub fn uniform(parties: usize, label: usize) -> Self {
        Self(vec![label; parties])
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for GlobalSetting {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Per-setting table of values indexed by outcome tuples.
///
/// Each setting row holds `outcomes^parties` entries in flattened outcome
/// order (party 0 most significant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "TableRepr<T>",
    into = "TableRepr<T>",
    bound(serialize = "T: Serialize + Clone", deserialize = "T: DeserializeOwned")
)]
pub struct OutcomeTable<T> {
    parties: usize,
    outcomes: usize,
    rows: BTreeMap<GlobalSetting, Vec<T>>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr<T> {
    parties: usize,
    outcomes: usize,
    rows: Vec<RowRepr<T>>,
}

#[derive(Serialize, Deserialize)]
struct RowRepr<T> {
    setting: Vec<usize>,
    values: Vec<T>,
}

impl<T: Clone> From<OutcomeTable<T>> for TableRepr<T> {
    fn from(t: OutcomeTable<T>) -> Self {
        Self {
            parties: t.parties,
            outcomes: t.outcomes,
            rows: t
                .rows
                .into_iter()
                .map(|(s, values)| RowRepr { setting: s.0, values })
                .collect(),
        }
    }
}

impl<T> TryFrom<TableRepr<T>> for OutcomeTable<T> {
    type Error = Error;
    fn try_from(r: TableRepr<T>) -> Result<Self> {
        let mut table = OutcomeTable::new(r.parties, r.outcomes)?;
        for row in r.rows {
            table.insert_raw(GlobalSetting(row.setting), row.values)?;
        }
        Ok(table)
    }
}

/// Born-rule probabilities per setting.
pub type ProbabilityTable = OutcomeTable<f64>;
/// Detection counts per setting.
pub type CountTable = OutcomeTable<u64>;

impl<T> OutcomeTable<T> {
    pub fn new(parties: usize, outcomes: usize) -> Result<Self> {
        if parties == 0 || outcomes == 0 {
            return Err(Error::ShapeMismatch("table needs at least one party and outcome".into()));
        }
        Ok(Self { parties, outcomes, rows: BTreeMap::new() })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn outcome_tuples(&self) -> usize {
        self.outcomes.pow(self.parties as u32)
    }

    pub fn outcome_digits(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.parties];
        for p in (0..self.parties).rev() {
            out[p] = flat % self.outcomes;
            flat /= self.outcomes;
        }
        out
    }

    pub fn flat_outcome(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &a| acc * self.outcomes + a)
    }

    pub fn settings(&self) -> impl Iterator<Item = &GlobalSetting> {
        self.rows.keys()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&GlobalSetting, &[T])> {
        self.rows.iter().map(|(s, v)| (s, v.as_slice()))
    }

    pub fn row(&self, setting: &GlobalSetting) -> Option<&[T]> {
        self.rows.get(setting).map(Vec::as_slice)
    }

    pub fn get(&self, setting: &GlobalSetting, outcome: &[usize]) -> Option<&T> {
        self.rows.get(setting)?.get(self.flat_outcome(outcome))
    }

    fn insert_raw(&mut self, setting: GlobalSetting, values: Vec<T>) -> Result<()> {
        if setting.0.len() != self.parties {
            return Err(Error::ShapeMismatch(format!(
                "setting {:?} for {} parties",
                setting.0, self.parties
            )));
        }
        if values.len() != self.outcome_tuples() {
            return Err(Error::LengthMismatch { expected: self.outcome_tuples(), found: values.len() });
        }
        self.rows.insert(setting, values);
        Ok(())
    }
}

impl ProbabilityTable {
    /// Inserts a setting row; probabilities must be nonnegative and sum to 1.
    pub fn insert(&mut self, setting: GlobalSetting, probs: Vec<f64>) -> Result<()> {
        if let Some(&p) = probs.iter().find(|&&p| !(p >= -TOLERANCE) || !p.is_finite()) {
            return Err(Error::OutOfRange { name: "probability", value: p, range: "[0, 1]" });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > TOLERANCE {
            return Err(Error::OutOfRange { name: "probability sum", value: sum, range: "{1}" });
        }
        self.insert_raw(setting, probs)
    }

    /// Uniform distribution on every listed setting.
    pub fn uniform(parties: usize, outcomes: usize, settings: &[GlobalSetting]) -> Result<Self> {
        let mut t = Self::new(parties, outcomes)?;
        let k = t.outcome_tuples();
        for s in settings {
            t.insert(s.clone(), vec![1.0 / k as f64; k])?;
        }
        Ok(t)
    }

    /// Entrywise `w·self + (1−w)·other` over the settings of `self`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        let mut out = Self::new(self.parties, self.outcomes)?;
        for (s, row) in &self.rows {
            let o = other.row(s).ok_or_else(|| Error::MissingSetting(s.0.clone()))?;
            if o.len() != row.len() {
                return Err(Error::LengthMismatch { expected: row.len(), found: o.len() });
            }
            out.insert(s.clone(), row.iter().zip(o).map(|(a, b)| w * a + (1.0 - w) * b).collect())?;
        }
        Ok(out)
    }
}

impl CountTable {
    pub fn insert(&mut self, setting: GlobalSetting, counts: Vec<u64>) -> Result<()> {
        self.insert_raw(setting, counts)
    }

    pub fn total(&self, setting: &GlobalSetting) -> Option<u64> {
        self.rows.get(setting).map(|r| r.iter().sum())
    }

    pub fn grand_total(&self) -> u64 {
        self.rows.values().flatten().sum()
    }

    /// Relative frequencies per setting; every setting needs a positive total.
    pub fn frequencies(&self) -> Result<ProbabilityTable> {
        let mut out = ProbabilityTable::new(self.parties, self.outcomes)?;
        for (s, row) in &self.rows {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return Err(Error::ZeroTotals(s.0.clone()));
            }
            out.insert_raw(s.clone(), row.iter().map(|&c| c as f64 / total as f64).collect())?;
        }
        Ok(out)
    }
}

impl<T> OutcomeTable<T>
where
    T: Copy + std::fmt::Display + std::str::FromStr,
    T::Err: std::fmt::Display,
{
    /// Writes `s0..s{n-1}, o0..o{n-1}, value` rows. Floats use the shortest
    /// representation that parses back to the identical value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.parties).map(|p| format!("s{p}")).collect();
        header.extend((0..self.parties).map(|p| format!("o{p}")));
        header.push("value".into());
        w.write_record(&header)?;
        for (s, row) in &self.rows {
            for (flat, v) in row.iter().enumerate() {
                let mut rec: Vec<String> = s.0.iter().map(usize::to_string).collect();
                rec.extend(self.outcome_digits(flat).iter().map(usize::to_string));
                rec.push(v.to_string());
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`write_csv`](Self::write_csv). The
    /// outcome count is inferred from the largest outcome label; missing
    /// entries are an error.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let columns = header.len();
        if columns < 3 || columns % 2 == 0 {
            return Err(Error::Parse { line: 1, msg: format!("unexpected header with {columns} columns") });
        }
        let parties = (columns - 1) / 2;
        let mut records: Vec<(Vec<usize>, Vec<usize>, T)> = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let parse_label = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse { line, msg: format!("bad label {s:?}: {e}") })
            };
            let setting = (0..parties).map(|c| parse_label(&rec[c])).collect::<Result<Vec<_>>>()?;
            let outcome = (parties..2 * parties)
                .map(|c| parse_label(&rec[c]))
                .collect::<Result<Vec<_>>>()?;
            let value = rec[2 * parties]
                .trim()
                .parse::<T>()
                .map_err(|e| Error::Parse { line, msg: format!("bad value: {e}") })?;
            records.push((setting, outcome, value));
        }
        let outcomes = records
            .iter()
            .flat_map(|(_, o, _)| o.iter().copied())
            .max()
            .map_or(1, |m| m + 1);
        let mut table = Self::new(parties, outcomes)?;
        let tuples = table.outcome_tuples();
        let mut rows: BTreeMap<GlobalSetting, Vec<Option<T>>> = BTreeMap::new();
        for (setting, outcome, value) in records {
            let flat = table.flat_outcome(&outcome);
            rows.entry(GlobalSetting(setting)).or_insert_with(|| vec![None; tuples])[flat] = Some(value);
        }
        for (s, row) in rows {
            let values = row
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Parse { line: 0, msg: format!("setting {:?} is missing outcomes", s.0) })?;
            table.insert_raw(s, values)?;
        }
        Ok(table)
    }
}

fn check_bases(profile: &DimProfile, bases: &[&MeasurementBasis]) -> Result<()> {
    let dims: Vec<usize> = bases.iter().map(|b| b.dim()).collect();
    if dims != profile.dims() {
        return Err(Error::ProfileMismatch { expected: profile.dims().to_vec(), found: dims });
    }
    Ok(())
}

/// `⊗_p U_p` with `U_p` the analysis matrix of party `p`'s basis.
fn product_analysis(bases: &[&MeasurementBasis]) -> CMatrix {
    bases
        .iter()
        .skip(1)
        .fold(bases[0].analysis_matrix(), |acc, b| acc.kronecker(&b.analysis_matrix()))
}

/// Born-rule probabilities over flattened outcome tuples.
pub fn outcome_distribution(state: &DensityMatrix, bases: &[&MeasurementBasis]) -> Result<Vec<f64>> {
    check_bases(state.profile(), bases)?;
    let u = product_analysis(bases);
    let rotated = &u * state.matrix();
    Ok((0..u.nrows())
        .map(|i| {
            let p: C64 = rotated.row(i).iter().zip(u.row(i).iter()).map(|(a, b)| a * b.conj()).sum();
            p.re.max(0.0)
        })
        .collect())
}

/// Born-rule probabilities for a pure state.
pub fn outcome_distribution_pure(state: &StateVector, bases: &[&MeasurementBasis]) -> Result<Vec<f64>> {
    check_bases(state.profile(), bases)?;
    let amps = product_analysis(bases) * state.amplitudes();
    Ok(amps.iter().map(|z| z.norm_sqr()).collect())
}

/// Probability table for `state` over `settings`, where `basis_for(party,
/// label)` supplies each local basis.
pub fn probability_table<F>(state: &DensityMatrix, settings: &[GlobalSetting], basis_for: F) -> Result<ProbabilityTable>
where
    F: Fn(usize, usize) -> Result<MeasurementBasis>,
{
    let profile = state.profile();
    let outcomes = profile
        .uniform_dim()
        .ok_or_else(|| Error::ShapeMismatch("probability tables need equal local dimensions".into()))?;
    let mut table = ProbabilityTable::new(profile.parties(), outcomes)?;
    for s in settings {
        if s.0.len() != profile.parties() {
            return Err(Error::ShapeMismatch(format!("setting {:?} for {} parties", s.0, profile.parties())));
        }
        let bases = s
            .0
            .iter()
            .enumerate()
            .map(|(p, &x)| basis_for(p, x))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&MeasurementBasis> = bases.iter().collect();
        let mut probs = outcome_distribution(state, &refs)?;
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        table.insert(s.clone(), probs)?;
    }
    Ok(table)
}

/// `I ⊗ ⟨v| ⊗ I` mapping the full register onto the remaining parties.
fn trigger_map(profile: &DimProfile, party: usize, vector: &StateVector) -> Result<(DimProfile, CMatrix)> {
    normalize_parties(profile, &[party])?;
    if profile.parties() < 2 {
        return Err(Error::InvalidParties("trigger needs at least one remaining party".into()));
    }
    if vector.profile().dims() != [profile.dims()[party]] {
        return Err(Error::ProfileMismatch {
            expected: vec![profile.dims()[party]],
            found: vector.profile().dims().to_vec(),
        });
    }
    let rest: Vec<usize> = (0..profile.parties()).filter(|&p| p != party).collect();
    let rest_profile = profile.select(&rest);
    let mut k = CMatrix::zeros(rest_profile.total(), profile.total());
    for flat in 0..profile.total() {
        let digits = profile.digits(flat);
        let rest_digits: Vec<usize> = rest.iter().map(|&p| digits[p]).collect();
        k[(rest_profile.flat_index(&rest_digits), flat)] = vector.amplitudes()[digits[party]].conj();
    }
    Ok((rest_profile, k))
}

/// Projects `party` onto `vector` and returns the renormalized state of the
/// remaining parties together with the success probability.
pub fn project_trigger(state: &DensityMatrix, party: usize, vector: &StateVector) -> Result<(DensityMatrix, f64)> {
    let (rest, k) = trigger_map(state.profile(), party, vector)?;
    let sigma = &k * state.matrix() * k.adjoint();
    let p = sigma.trace().re;
    if p <= 1e-12 {
        return Err(Error::ZeroProbability(p));
    }
    let sigma = sigma.unscale(p);
    let sigma = (&sigma + sigma.adjoint()).scale(0.5);
    Ok((DensityMatrix::new_unchecked(rest, sigma), p))
}

pub fn project_trigger_pure(state: &StateVector, party: usize, vector: &StateVector) -> Result<(StateVector, f64)> {
    let (rest, k) = trigger_map(state.profile(), party, vector)?;
    let amps = &k * state.amplitudes();
    let p = amps.norm_squared();
    if p <= 1e-12 {
        return Err(Error::ZeroProbability(p));
    }
    Ok((StateVector::normalized(rest, amps)?, p))
}

/// Splits `total` shots evenly over `settings`, remainder to the first
/// settings in lexicographic order.
pub fn split_shots(total: u64, settings: &[GlobalSetting]) -> BTreeMap<GlobalSetting, u64> {
    let mut sorted = settings.to_vec();
    sorted.sort();
    sorted.dedup();
    let n = sorted.len() as u64;
    if n == 0 {
        return BTreeMap::new();
    }
    let (base, extra) = (total / n, total % n);
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, base + u64::from((i as u64) < extra)))
        .collect()
}

fn multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = remaining;
            break;
        }
        let p = p.max(0.0);
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q).expect("q in (0,1)").sample(rng)
        };
        out[i] = draw;
        remaining -= draw;
        mass -= p;
    }
    out
}

/// Multinomial draw with `shots` trials for every setting of `pt`.
pub fn sample_counts<R: Rng + ?Sized>(pt: &ProbabilityTable, shots: u64, rng: &mut R) -> CountTable {
    let budget = pt.settings().map(|s| (s.clone(), shots)).collect();
    sample_counts_budgeted(pt, &budget, rng).expect("budget covers exactly the table's settings")
}

/// Multinomial draw with a per-setting shot budget. Settings are visited in
/// lexicographic order so a seeded generator reproduces the same table.
pub fn sample_counts_budgeted<R: Rng + ?Sized>(
    pt: &ProbabilityTable,
    budget: &BTreeMap<GlobalSetting, u64>,
    rng: &mut R,
) -> Result<CountTable> {
    let mut counts = CountTable::new(pt.parties(), pt.outcomes())?;
    for (s, &shots) in budget {
        let row = pt.row(s).ok_or_else(|| Error::MissingSetting(s.0.clone()))?;
        counts.insert(s.clone(), multinomial(row, shots, rng))?;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{ghz_state, GhzParams};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ghz(n: usize) -> StateVector {
        ghz_state(GhzParams::new(n, 3).unwrap())
    }

    #[test]
    fn computational_and_fourier() {
        let c = computational_basis(3).unwrap();
        assert_eq!(c.vector(2).amplitudes()[2], C64::new(1.0, 0.0));
        assert_eq!(computational_basis(2).unwrap().vectors().len(), 2);
        let f2 = fourier_basis(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(f2.vector(1).amplitudes()[1].re, -s, epsilon = 1e-15);
        let f3 = fourier_basis(3).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(f3.vector(0).amplitudes()[j].re, 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        }
        for a in 0..3 {
            for i in 0..3 {
                assert_abs_diff_eq!(f3.vector(a).amplitudes()[i].norm_sqr(), 1.0 / 3.0, epsilon = 1e-15);
            }
        }
        assert!(computational_basis(1).is_err());
    }

    #[test]
    fn phased_fourier_settings() {
        let f = fourier_basis(3).unwrap();
        let p0 = phased_fourier_basis(3, 0).unwrap();
        for a in 0..3 {
            assert!((f.vector(a).amplitudes() - p0.vector(a).amplitudes()).norm() < 1e-15);
        }
        for x in 0..3 {
            let b = phased_fourier_basis(3, x).unwrap();
            for a in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(b.vector(a).amplitudes()[j].norm_sqr(), 1.0 / 3.0, epsilon = 1e-15);
                }
            }
        }
        assert!(phased_fourier_basis(3, 3).is_err());
    }

    #[test]
    fn ghz_outcome_sums_are_deterministic_on_balanced_settings() {
        let rho = ghz(3).to_density();
        for x in 0..3 {
            for y in 0..3 {
                let z = (9 - x - y) % 3;
                let bases = [x, y, z].map(|s| phased_fourier_basis(3, s).unwrap());
                let probs = outcome_distribution(&rho, &bases.iter().collect::<Vec<_>>()).unwrap();
                let mut by_residue = [0.0; 3];
                for (flat, p) in probs.iter().enumerate() {
                    let digits = DimProfile::uniform(3, 3).unwrap().digits(flat);
                    by_residue[digits.iter().sum::<usize>() % 3] += p;
                }
                assert_eq!(by_residue.iter().filter(|&&p| (p - 1.0).abs() < 1e-12).count(), 1);
            }
        }
    }

    #[test]
    fn outcome_distribution_examples() {
        let rho = ghz(3).to_density();
        let c = computational_basis(3).unwrap();
        let probs = outcome_distribution(&rho, &[&c, &c, &c]).unwrap();
        for (i, p) in probs.iter().enumerate() {
            let e = if [0, 13, 26].contains(&i) { 1.0 / 3.0 } else { 0.0 };
            assert_abs_diff_eq!(*p, e, epsilon = 1e-12);
        }

        // direct amplitude sum: ⟨f_a f_b f_c|GHZ⟩ = (1/√3)(1/3^{3/2}) Σ_j ω^{-(a+b+c)j}
        let f = fourier_basis(3).unwrap();
        let probs = outcome_distribution(&rho, &[&f, &f, &f]).unwrap();
        let omega = C64::from_polar(1.0, 2.0 * PI / 3.0);
        for (flat, p) in probs.iter().enumerate() {
            let digits = DimProfile::uniform(3, 3).unwrap().digits(flat);
            let s: usize = digits.iter().sum();
            let amp: C64 = (0..3).map(|j| omega.powi(-((s * j) as i32))).sum::<C64>() / 9.0;
            assert_abs_diff_eq!(*p, amp.norm_sqr(), epsilon = 1e-12);
            let e = if s % 3 == 0 { 1.0 / 9.0 } else { 0.0 };
            assert_abs_diff_eq!(*p, e, epsilon = 1e-12);
        }

        let white = DensityMatrix::maximally_mixed(DimProfile::uniform(3, 3).unwrap());
        let b = phased_fourier_basis(3, 2).unwrap();
        for p in outcome_distribution(&white, &[&c, &f, &b]).unwrap() {
            assert_abs_diff_eq!(p, 1.0 / 27.0, epsilon = 1e-12);
        }
        assert!(outcome_distribution(&white, &[&c, &f]).is_err());
    }

    #[test]
    fn trigger_on_four_qutrit_ghz() {
        let psi = ghz(4);
        let f = fourier_basis(3).unwrap();
        let (rest, p) = project_trigger(&psi.to_density(), 0, f.vector(0)).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        assert!((rest.matrix() - ghz(3).projector()).norm() < 1e-12);

        let c = computational_basis(3).unwrap();
        let (rest, p) = project_trigger_pure(&psi, 0, c.vector(0)).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        let zero = StateVector::basis(DimProfile::uniform(3, 3).unwrap(), &[0, 0, 0]).unwrap();
        assert_abs_diff_eq!(rest.inner(&zero).unwrap().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trigger_on_product_state_leaves_rest_alone() {
        let q = DimProfile::uniform(1, 3).unwrap();
        let a = StateVector::normalized(q.clone(), CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.3, 0.2), C64::new(0.0, 0.0)])).unwrap();
        let b = phased_fourier_basis(3, 1).unwrap().vector(2).clone();
        let prod = crate::qudit::tensor_product(&a, &b);
        let f = fourier_basis(3).unwrap();
        let (rest, _) = project_trigger_pure(&prod, 0, f.vector(1)).unwrap();
        assert_abs_diff_eq!(rest.inner(&b).unwrap().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trigger_probabilities_over_a_basis_sum_to_one() {
        let rho = crate::states::isotropic_mix(&ghz(3), 0.7).unwrap();
        for basis in [computational_basis(3).unwrap(), phased_fourier_basis(3, 2).unwrap()] {
            let total: f64 = basis.vectors().iter().map(|v| project_trigger(&rho, 1, v).unwrap().1).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn trigger_errors() {
        let psi = ghz(3);
        let c = computational_basis(3).unwrap();
        let zero = StateVector::basis(DimProfile::uniform(3, 3).unwrap(), &[0, 0, 0]).unwrap();
        assert!(matches!(project_trigger_pure(&zero, 0, c.vector(1)), Err(Error::ZeroProbability(_))));
        assert!(project_trigger_pure(&psi, 3, c.vector(1)).is_err());
        let q2 = computational_basis(2).unwrap();
        assert!(project_trigger_pure(&psi, 0, q2.vector(0)).is_err());
    }

    fn single_party_table(probs: Vec<f64>) -> ProbabilityTable {
        let mut t = ProbabilityTable::new(1, probs.len()).unwrap();
        t.insert(GlobalSetting(vec![0]), probs).unwrap();
        t
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = single_party_table(vec![0.2, 0.3, 0.5]);
        let zero = sample_counts(&t, 0, &mut rng);
        assert_eq!(zero.row(&GlobalSetting(vec![0])).unwrap(), &[0, 0, 0]);
        let det = single_party_table(vec![0.0, 1.0, 0.0]);
        let counts = sample_counts(&det, 500, &mut rng);
        assert_eq!(counts.row(&GlobalSetting(vec![0])).unwrap(), &[0, 500, 0]);
        let a = sample_counts(&t, 1000, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_counts(&t, 1000, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!(a.total(&GlobalSetting(vec![0])), Some(1000));
    }

    #[test]
    fn uniform_sampling_converges() {
        let t = single_party_table(vec![1.0 / 3.0; 3]);
        let shots = 3_000_000;
        let band = 5.0 * ((1.0 / 3.0) * (2.0 / 3.0) / shots as f64).sqrt();
        for seed in 0..4 {
            let counts = sample_counts(&t, shots, &mut ChaCha8Rng::seed_from_u64(seed));
            for &c in counts.row(&GlobalSetting(vec![0])).unwrap() {
                let f = c as f64 / shots as f64;
                assert!((f - 1.0 / 3.0).abs() < band.min(0.002), "freq {f}");
            }
        }
    }

    #[test]
    fn shot_split_puts_remainder_first() {
        let settings: Vec<GlobalSetting> = vec![vec![1, 1], vec![0, 0], vec![0, 1]].into_iter().map(GlobalSetting).collect();
        let split = split_shots(11, &settings);
        let values: Vec<u64> = split.values().copied().collect();
        assert_eq!(values, vec![4, 4, 3]);
        assert_eq!(split.keys().next().unwrap().0, vec![0, 0]);
    }

    #[test]
    fn probability_table_validation() {
        let mut t = ProbabilityTable::new(1, 3).unwrap();
        assert!(t.insert(GlobalSetting(vec![0]), vec![0.5, 0.5, 0.5]).is_err());
        assert!(t.insert(GlobalSetting(vec![0]), vec![0.5, 0.5]).is_err());
        assert!(t.insert(GlobalSetting(vec![0, 1]), vec![0.5, 0.5, 0.0]).is_err());
        assert!(t.insert(GlobalSetting(vec![0]), vec![1.5, -0.5, 0.0]).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rho = crate::states::isotropic_mix(&ghz(3), 0.83).unwrap();
        let settings = vec![GlobalSetting(vec![0, 0, 0]), GlobalSetting(vec![1, 2, 0])];
        let pt = probability_table(&rho, &settings, |_, x| phased_fourier_basis(3, x)).unwrap();
        let mut buf = Vec::new();
        pt.write_csv(&mut buf).unwrap();
        let back = ProbabilityTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, pt);
        let json = serde_json::to_string(&pt).unwrap();
        let back: ProbabilityTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pt);

        let counts = sample_counts(&pt, 777, &mut ChaCha8Rng::seed_from_u64(1));
        let mut buf = Vec::new();
        counts.write_csv(&mut buf).unwrap();
        assert_eq!(CountTable::read_csv(buf.as_slice()).unwrap(), counts);
        let json = serde_json::to_string(&counts).unwrap();
        assert_eq!(serde_json::from_str::<CountTable>(&json).unwrap(), counts);
    }

    #[test]
    fn csv_reports_bad_lines() {
        let text = "s0,o0,value\n0,0,0.5\n0,x,0.5\n";
        match ProbabilityTable::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
