//! Dense complex linear algebra on tensor products of qudit spaces.
//!
//! Flattened indices are row-major over parties: party 0 is the most
//! significant digit, so `|i_0 i_1 … i_{n-1}⟩` lives at
//! `i_0·(d_1⋯d_{n-1}) + … + i_{n-1}`. Kronecker products follow the same
//! convention (the first factor is the most significant).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance for Hermiticity, normalization, trace and positivity checks.
pub const TOLERANCE: f64 = 1e-9;

/// Ordered list of local dimensions, one per party.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DimProfile(Vec<usize>);

impl DimProfile {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidProfile("no parties".into()));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidProfile(format!("local dimension {d} < 2")));
        }
        Ok(Self(dims))
    }

    /// `n` parties of local dimension `d`.
    pub fn uniform(n: usize, d: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn parties(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    /// Common local dimension if all parties agree.
    pub fn uniform_dim(&self) -> Option<usize> {
        let d = self.0[0];
        self.0.iter().all(|&x| x == d).then_some(d)
    }

    /// Place value of each party's digit in the flattened index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for p in (0..self.0.len().saturating_sub(1)).rev() {
            strides[p] = strides[p + 1] * self.0[p + 1];
        }
        strides
    }

    pub fn digits(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.0.len()];
        for p in (0..self.0.len()).rev() {
            out[p] = flat % self.0[p];
            flat /= self.0[p];
        }
        out
    }

    pub fn flat_index(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.0)
            .fold(0, |acc, (&digit, &d)| acc * d + digit)
    }

    pub fn concat(&self, other: &Self) -> Self {
        Self(self.0.iter().chain(&other.0).copied().collect())
    }

    /// Profile restricted to the given (sorted) parties.
    pub fn select(&self, parties: &[usize]) -> Self {
        Self(parties.iter().map(|&p| self.0[p]).collect())
    }
}

impl TryFrom<Vec<usize>> for DimProfile {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<DimProfile> for Vec<usize> {
    fn from(p: DimProfile) -> Self {
        p.0
    }
}

fn check_profile(expected: &DimProfile, found: &DimProfile) -> Result<()> {
    if expected != found {
        return Err(Error::ProfileMismatch {
            expected: expected.dims().to_vec(),
            found: found.dims().to_vec(),
        });
    }
    Ok(())
}

/// Largest entrywise deviation of `m` from its conjugate transpose.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rotate the global phase so the largest-magnitude amplitude (first one on
/// ties) is real and positive.
pub fn fix_global_phase(v: &mut CVector) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|z| *z *= phase);
}

/// Kronecker composition of two values of the same kind.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

pub fn tensor_product<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Normalized pure state on a qudit register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    profile: DimProfile,
    amplitudes: CVector,
}

impl StateVector {
    pub fn new(profile: DimProfile, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != profile.total() {
            return Err(Error::LengthMismatch {
                expected: profile.total(),
                found: amplitudes.len(),
            });
        }
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > TOLERANCE {
            return Err(Error::NotNormalized(norm2));
        }
        Ok(Self { profile, amplitudes })
    }

    /// Builds a state from unnormalized amplitudes.
    pub fn normalized(profile: DimProfile, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        Self::new(profile, amplitudes.unscale(norm))
    }

    pub fn basis(profile: DimProfile, digits: &[usize]) -> Result<Self> {
        if digits.len() != profile.parties() || digits.iter().zip(profile.dims()).any(|(a, d)| a >= d) {
            return Err(Error::ShapeMismatch(format!(
                "basis digits {digits:?} for profile {:?}",
                profile.dims()
            )));
        }
        let mut amps = CVector::zeros(profile.total());
        amps[profile.flat_index(digits)] = C64::new(1.0, 0.0);
        Ok(Self { profile, amplitudes: amps })
    }

    pub fn profile(&self) -> &DimProfile {
        &self.profile
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_profile(&self.profile, &other.profile)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn projector(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            profile: self.profile.clone(),
            matrix: self.projector(),
        }
    }
}

impl Tensor for StateVector {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            profile: self.profile.concat(&other.profile),
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        }
    }
}

/// Square operator on a qudit register.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    profile: DimProfile,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(profile: DimProfile, matrix: CMatrix) -> Result<Self> {
        let n = profile.total();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix for total dimension {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { profile, matrix })
    }

    pub fn identity(profile: DimProfile) -> Self {
        let n = profile.total();
        Self { profile, matrix: CMatrix::identity(n, n) }
    }

    pub fn zeros(profile: DimProfile) -> Self {
        let n = profile.total();
        Self { profile, matrix: CMatrix::zeros(n, n) }
    }

    pub fn profile(&self) -> &DimProfile {
        &self.profile
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> Result<C64> {
        check_profile(&self.profile, &psi.profile)?;
        Ok(psi.amplitudes.dotc(&(&self.matrix * &psi.amplitudes)))
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            profile: self.profile.concat(&other.profile),
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    profile: DimProfile,
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(profile: DimProfile, matrix: CMatrix) -> Result<Self> {
        let op = Operator::new(profile, matrix)?;
        let defect = hermiticity_defect(&op.matrix);
        if defect > TOLERANCE {
            return Err(Error::NotHermitian(defect));
        }
        let trace = op.matrix.trace();
        if (trace.re - 1.0).abs() > TOLERANCE || trace.im.abs() > TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!("trace = {trace}")));
        }
        let (values, _) = hermitian_eigen(&op.matrix);
        if values[0] < -TOLERANCE {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {:e}",
                values[0]
            )));
        }
        Ok(Self { profile: op.profile, matrix: op.matrix })
    }

    /// Skips validation; callers guarantee the invariants by construction.
    pub(crate) fn new_unchecked(profile: DimProfile, matrix: CMatrix) -> Self {
        Self { profile, matrix }
    }

    pub fn maximally_mixed(profile: DimProfile) -> Self {
        let n = profile.total();
        Self { profile, matrix: CMatrix::identity(n, n).unscale(n as f64) }
    }

    pub fn profile(&self) -> &DimProfile {
        &self.profile
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        check_profile(&self.profile, &other.profile)?;
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::OutOfRange { name: "mixing weight", value: w, range: "[0, 1]" });
        }
        Ok(Self::new_unchecked(
            self.profile.clone(),
            self.matrix.scale(w) + other.matrix.scale(1.0 - w),
        ))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            profile: self.profile.concat(&other.profile),
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }
}

impl From<&StateVector> for DensityMatrix {
    fn from(psi: &StateVector) -> Self {
        psi.to_density()
    }
}

/// Validates a party subset and returns it sorted and deduplicated.
pub(crate) fn normalize_parties(profile: &DimProfile, parties: &[usize]) -> Result<Vec<usize>> {
    if parties.is_empty() {
        return Err(Error::InvalidParties("empty party set".into()));
    }
    let mut sorted = parties.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&p) = sorted.iter().find(|&&p| p >= profile.parties()) {
        return Err(Error::InvalidParties(format!(
            "party {p} out of range for {} parties",
            profile.parties()
        )));
    }
    Ok(sorted)
}

/// For each flat index, its position within the kept and traced subsystems.
fn split_indices(profile: &DimProfile, keep: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let kept_profile: Vec<usize> = keep.iter().map(|&p| profile.dims()[p]).collect();
    let traced: Vec<usize> = (0..profile.parties()).filter(|p| !keep.contains(p)).collect();
    let mut kidx = Vec::with_capacity(profile.total());
    let mut tidx = Vec::with_capacity(profile.total());
    for flat in 0..profile.total() {
        let digits = profile.digits(flat);
        let k = keep
            .iter()
            .zip(&kept_profile)
            .fold(0, |acc, (&p, &d)| acc * d + digits[p]);
        let t = traced
            .iter()
            .fold(0, |acc, &p| acc * profile.dims()[p] + digits[p]);
        kidx.push(k);
        tidx.push(t);
    }
    (kidx, tidx)
}

/// Reduced state on the parties in `keep` (kept in ascending party order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let keep = normalize_parties(&rho.profile, keep)?;
    let out_profile = rho.profile.select(&keep);
    if keep.len() == rho.profile.parties() {
        return Ok(rho.clone());
    }
    let (kidx, tidx) = split_indices(&rho.profile, &keep);
    let n = out_profile.total();
    let mut out = CMatrix::zeros(n, n);
    let total = rho.profile.total();
    for f in 0..total {
        for g in 0..total {
            if tidx[f] == tidx[g] {
                out[(kidx[f], kidx[g])] += rho.matrix[(f, g)];
            }
        }
    }
    Ok(DensityMatrix::new_unchecked(out_profile, out))
}

/// `⟨ψ|ρ|ψ⟩`, clamped to `[0, 1]`.
pub fn fidelity_with_pure(rho: &DensityMatrix, psi: &StateVector) -> Result<f64> {
    check_profile(&rho.profile, &psi.profile)?;
    let defect = hermiticity_defect(&rho.matrix);
    if defect > TOLERANCE {
        return Err(Error::NotHermitian(defect));
    }
    let value = psi.amplitudes.dotc(&(&rho.matrix * &psi.amplitudes));
    Ok(value.re.clamp(0.0, 1.0))
}

/// Largest eigenvalue of a Hermitian operator and a unit eigenvector whose
/// largest-magnitude amplitude is real and positive.
pub fn principal_eigenpair(op: &Operator) -> Result<(f64, StateVector)> {
    let defect = hermiticity_defect(&op.matrix);
    if defect > TOLERANCE {
        return Err(Error::NotHermitian(defect));
    }
    let (values, vectors) = hermitian_eigen(&op.matrix);
    let top = values.len() - 1;
    let mut v: CVector = vectors.column(top).into_owned();
    v.unscale_mut(v.norm());
    fix_global_phase(&mut v);
    Ok((values[top], StateVector { profile: op.profile.clone(), amplitudes: v }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn ghz(n: usize, d: usize) -> StateVector {
        let p = DimProfile::uniform(n, d).unwrap();
        let mut amps = CVector::zeros(p.total());
        for i in 0..d {
            amps[p.flat_index(&vec![i; n])] = c(1.0);
        }
        StateVector::normalized(p, amps).unwrap()
    }

    #[test]
    fn profile_rejects_bad_dims() {
        assert!(DimProfile::new(vec![]).is_err());
        assert!(DimProfile::new(vec![3, 1]).is_err());
        let p = DimProfile::new(vec![2, 3, 3]).unwrap();
        assert_eq!(p.total(), 18);
        assert_eq!(p.strides(), vec![9, 3, 1]);
        assert_eq!(p.digits(17), vec![1, 2, 2]);
        assert_eq!(p.flat_index(&[1, 2, 2]), 17);
    }

    #[test]
    fn basis_states_compose_most_significant_first() {
        let q = DimProfile::uniform(1, 3).unwrap();
        let zero = StateVector::basis(q.clone(), &[0]).unwrap();
        let both = zero.tensor(&zero);
        assert_eq!(both.amplitudes()[0], c(1.0));
        assert_eq!(both.profile().dims(), &[3, 3]);

        let two = StateVector::basis(q.clone(), &[2]).unwrap();
        let plus = StateVector::normalized(
            q,
            CVector::from_vec(vec![c(1.0), c(1.0), c(0.0)]),
        )
        .unwrap();
        let v = tensor_product(&plus, &two);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (i, amp) in v.amplitudes().iter().enumerate() {
            let expected = if i == 2 || i == 5 { s } else { 0.0 };
            assert_abs_diff_eq!(amp.re, expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn identity_tensor_identity() {
        let q = DimProfile::uniform(1, 3).unwrap();
        let id = Operator::identity(q.clone()).tensor(&Operator::identity(q));
        assert_eq!(id, Operator::identity(DimProfile::uniform(2, 3).unwrap()));
    }

    #[test]
    fn partial_trace_of_ghz_pair_is_maximally_mixed() {
        let rho = ghz(2, 3).to_density();
        let red = partial_trace(&rho, &[1]).unwrap();
        let expected = CMatrix::identity(3, 3).unscale(3.0);
        assert!((red.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_edge_cases() {
        let rho = ghz(3, 3).to_density();
        assert!(matches!(partial_trace(&rho, &[]), Err(Error::InvalidParties(_))));
        assert!(partial_trace(&rho, &[3]).is_err());
        assert_eq!(partial_trace(&rho, &[2, 0, 1]).unwrap(), rho);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let q = DimProfile::uniform(1, 3).unwrap();
        let a = StateVector::normalized(q.clone(), CVector::from_vec(vec![c(1.0), C64::new(0.0, 1.0), c(0.5)]))
            .unwrap()
            .to_density();
        let b = DensityMatrix::maximally_mixed(q);
        let red = partial_trace(&a.tensor(&b), &[0]).unwrap();
        assert!((red.matrix() - a.matrix()).norm() < 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let psi = ghz(3, 3);
        assert_abs_diff_eq!(fidelity_with_pure(&psi.to_density(), &psi).unwrap(), 1.0, epsilon = 1e-12);
        let mixed = DensityMatrix::maximally_mixed(psi.profile().clone());
        assert_abs_diff_eq!(fidelity_with_pure(&mixed, &psi).unwrap(), 1.0 / 27.0, epsilon = 1e-12);
        let iso = psi.to_density().mix(&mixed, 0.91).unwrap();
        assert_abs_diff_eq!(fidelity_with_pure(&iso, &psi).unwrap(), 0.91 + 0.09 / 27.0, epsilon = 1e-12);
        assert!(fidelity_with_pure(&iso, &ghz(2, 3)).is_err());
    }

    #[test]
    fn eigenpair_of_diagonal() {
        let p = DimProfile::uniform(1, 3).unwrap();
        let op = Operator::new(p, CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0), c(3.0), c(2.0)]))).unwrap();
        let (lambda, v) = principal_eigenpair(&op).unwrap();
        assert_abs_diff_eq!(lambda, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.amplitudes()[1].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.amplitudes()[1].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eigenpair_of_ghz_projector() {
        let psi = ghz(3, 3);
        let op = Operator::new(psi.profile().clone(), psi.projector()).unwrap();
        let (lambda, v) = principal_eigenpair(&op).unwrap();
        assert_abs_diff_eq!(lambda, 1.0, epsilon = 1e-12);
        assert!((v.amplitudes() - psi.amplitudes()).norm() < 1e-9);
    }

    #[test]
    fn eigenpair_rejects_non_hermitian() {
        let p = DimProfile::uniform(1, 2).unwrap();
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let op = Operator::new(p, m).unwrap();
        assert!(matches!(principal_eigenpair(&op), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn density_validation() {
        let p = DimProfile::uniform(1, 2).unwrap();
        let bad_trace = CMatrix::identity(2, 2);
        assert!(DensityMatrix::new(p.clone(), bad_trace).is_err());
        let negative = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(DensityMatrix::new(p, negative).is_err());
    }
}
