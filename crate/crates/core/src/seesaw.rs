//! Lower bounds on the dimension-restricted quantum value of a Bell
//! functional by alternating optimization.
//!
//! Each sweep replaces the shared state by the principal eigenvector of the
//! Bell operator, then re-optimizes every party's measurements against its
//! steering operators with the other parties held fixed. Every step is
//! accepted only if it does not lower the value, so the trace of a restart
//! is non-decreasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::bell::BellFunctional;
use crate::error::{Error, Result};
use crate::qudit::{
    fix_global_phase, hermitian_eigen, hermiticity_defect, principal_eigenpair, CMatrix, DimProfile, Operator,
    StateVector, C64, TOLERANCE,
};
use crate::random::{haar_unitary, random_state};

/// Positive operators, one per outcome, summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    elements: Vec<CMatrix>,
}

impl Povm {
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let povm = Self { elements };
        povm.validate(TOLERANCE)?;
        Ok(povm)
    }

    fn new_unchecked(elements: Vec<CMatrix>) -> Self {
        Self { elements }
    }

    /// Projective measurement onto the columns of `basis`, column `i` going
    /// to outcome `assignment[i]`.
    pub fn projective(basis: &CMatrix, assignment: &[usize], outcomes: usize) -> Self {
        let d = basis.nrows();
        let mut elements = vec![CMatrix::zeros(d, d); outcomes];
        for (i, &a) in assignment.iter().enumerate() {
            let col = basis.column(i);
            elements[a] += &col * col.adjoint();
        }
        Self { elements }
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::ShapeMismatch("POVM without elements".into()));
        }
        let d = self.dim();
        let mut sum = CMatrix::zeros(d, d);
        for e in &self.elements {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::ShapeMismatch("POVM elements of different sizes".into()));
            }
            let defect = hermiticity_defect(e);
            if defect > tol {
                return Err(Error::NotHermitian(defect));
            }
            let min = hermitian_eigen(e).0[0];
            if min < -tol {
                return Err(Error::InvalidDensityMatrix(format!("POVM element eigenvalue {min:e}")));
            }
            sum += e;
        }
        let defect = (sum - CMatrix::identity(d, d)).norm();
        if defect > tol {
            return Err(Error::ShapeMismatch(format!("POVM completeness defect {defect:e}")));
        }
        Ok(())
    }

    /// `Σ_a tr(M_a R_a)`.
    pub fn score(&self, steering: &[CMatrix]) -> f64 {
        self.elements
            .iter()
            .zip(steering)
            .map(|(m, r)| m.component_mul(&r.transpose()).sum().re)
            .sum()
    }
}

/// Measurements indexed `[party][setting]`.
pub type Measurements = Vec<Vec<Povm>>;

/// Shared state and local measurements on a dimension profile.
#[derive(Clone, Debug, PartialEq)]
pub struct Strategy {
    pub profile: DimProfile,
    pub state: StateVector,
    pub measurements: Measurements,
}

impl Strategy {
    pub fn validate(&self) -> Result<()> {
        if self.state.profile() != &self.profile {
            return Err(Error::ProfileMismatch {
                expected: self.profile.dims().to_vec(),
                found: self.state.profile().dims().to_vec(),
            });
        }
        for (p, settings) in self.measurements.iter().enumerate() {
            for povm in settings {
                if povm.dim() != self.profile.dims()[p] {
                    return Err(Error::ShapeMismatch(format!("party {p} POVM of dimension {}", povm.dim())));
                }
                povm.validate(TOLERANCE)?;
            }
        }
        Ok(())
    }

    /// `⟨ψ|B|ψ⟩`.
    pub fn value(&self, f: &BellFunctional) -> Result<f64> {
        let b = bell_operator(f, &self.profile, &self.measurements)?;
        Ok(b.expectation(&self.state)?.re)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeesawConfig {
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Stop a restart once a full sweep gains less than this.
    pub tolerance: f64,
    pub seed: u64,
    /// After the projective phase converges, continue with general POVM
    /// updates.
    pub povm_polish: bool,
    /// Run restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self { restarts: 200, max_sweeps: 400, tolerance: 1e-10, seed: 0, povm_polish: true, parallel: true }
    }
}

impl SeesawConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartReport {
    pub index: usize,
    pub final_value: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Value after the initial draw and after every state or party update.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl RestartReport {
    /// Largest decrease between consecutive trace entries (0 when monotone).
    pub fn worst_decrease(&self) -> f64 {
        self.trace.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeesawResult {
    pub dims: Vec<usize>,
    pub best_value: f64,
    pub best_restart: usize,
    #[serde(serialize_with = "serialize_strategy")]
    pub best_strategy: Strategy,
    pub restarts: Vec<RestartReport>,
}

/// Σ over supported settings and nonzero outcome tuples of `c · ⊗_p M_p`.
pub fn bell_operator(f: &BellFunctional, profile: &DimProfile, measurements: &Measurements) -> Result<Operator> {
    check_shapes(f, profile, measurements)?;
    let n = profile.total();
    let mut b = CMatrix::zeros(n, n);
    for (setting, outcome, c) in f.terms() {
        let term = (0..profile.parties())
            .map(|p| &measurements[p][setting[p]].elements[outcome[p]])
            .skip(1)
            .fold(measurements[0][setting[0]].elements[outcome[0]].clone(), |acc, m| acc.kronecker(m));
        b += term.scale(c);
    }
    Operator::new(profile.clone(), b)
}

fn check_shapes(f: &BellFunctional, profile: &DimProfile, measurements: &Measurements) -> Result<()> {
    let s = f.scenario();
    if profile.parties() != s.parties || measurements.len() != s.parties {
        return Err(Error::ShapeMismatch(format!(
            "{} parties in profile, {} measured, scenario has {}",
            profile.parties(),
            measurements.len(),
            s.parties
        )));
    }
    for (p, settings) in measurements.iter().enumerate() {
        if settings.len() != s.inputs {
            return Err(Error::ShapeMismatch(format!("party {p} has {} settings, expected {}", settings.len(), s.inputs)));
        }
        for povm in settings {
            if povm.outcomes() != s.outputs || povm.dim() != profile.dims()[p] {
                return Err(Error::ShapeMismatch(format!(
                    "party {p}: POVM with {} outcomes on dimension {}",
                    povm.outcomes(),
                    povm.dim()
                )));
            }
        }
    }
    Ok(())
}

/// Principal eigenvector of the Bell operator.
pub fn state_update(b: &Operator) -> Result<(f64, StateVector)> {
    principal_eigenpair(b)
}

/// `ψ` reshaped to a `d_party × (rest)` matrix, other parties in order.
fn party_matrix(psi: &StateVector, party: usize) -> CMatrix {
    let profile = psi.profile();
    let d = profile.dims()[party];
    let rest_total = profile.total() / d;
    let rest: Vec<usize> = (0..profile.parties()).filter(|&q| q != party).collect();
    let mut m = CMatrix::zeros(d, rest_total);
    for flat in 0..profile.total() {
        let digits = profile.digits(flat);
        let r = rest.iter().fold(0, |acc, &q| acc * profile.dims()[q] + digits[q]);
        m[(digits[party], r)] = psi.amplitudes()[flat];
    }
    m
}

/// Conditional operators `R[x][a]` on `party`'s space such that the Bell
/// value equals `Σ_{x,a} tr(M_{a|x} R[x][a])` with the other parties fixed.
pub fn steering_operators(
    f: &BellFunctional,
    psi: &StateVector,
    measurements: &Measurements,
    party: usize,
) -> Result<Vec<Vec<CMatrix>>> {
    let profile = psi.profile();
    check_shapes(f, profile, measurements)?;
    let s = f.scenario();
    let d = profile.dims()[party];
    let psi_m = party_matrix(psi, party);
    let psi_adj = psi_m.adjoint();
    let mut r = vec![vec![CMatrix::zeros(d, d); s.outputs]; s.inputs];
    let others: Vec<usize> = (0..s.parties).filter(|&q| q != party).collect();
    let other_tuples = s.outputs.pow(others.len() as u32);
    for setting in f.support() {
        let x = setting.0[party];
        let row = f.setting_row(s.flat_setting(&setting.0));
        for t in 0..other_tuples {
            // outcomes of the other parties, most significant first
            let mut rest = vec![0; others.len()];
            let mut rem = t;
            for i in (0..others.len()).rev() {
                rest[i] = rem % s.outputs;
                rem /= s.outputs;
            }
            let coeffs: Vec<f64> = (0..s.outputs)
                .map(|a| {
                    let mut outcome = vec![0; s.parties];
                    outcome[party] = a;
                    for (i, &q) in others.iter().enumerate() {
                        outcome[q] = rest[i];
                    }
                    row[s.flat_outcome(&outcome)]
                })
                .collect();
            if coeffs.iter().all(|&c| c == 0.0) {
                continue;
            }
            let o = others
                .iter()
                .zip(&rest)
                .map(|(&q, &a)| &measurements[q][setting.0[q]].elements[a])
                .skip(1)
                .fold(measurements[others[0]][setting.0[others[0]]].elements[rest[0]].clone(), |acc, m| {
                    acc.kronecker(m)
                });
            let t_op = &psi_m * o.transpose() * &psi_adj;
            for (a, &c) in coeffs.iter().enumerate() {
                if c != 0.0 {
                    r[x][a] += t_op.scale(c);
                }
            }
        }
    }
    for ops in &mut r {
        for m in ops.iter_mut() {
            *m = (&*m + m.adjoint()).scale(0.5);
        }
    }
    if f.coefficients().iter().all(|&c| c >= 0.0) {
        for ops in &r {
            for m in ops {
                let min = hermitian_eigen(m).0[0];
                if min < -TOLERANCE {
                    return Err(Error::NonPsdSteering(min));
                }
            }
        }
    }
    Ok(r)
}

/// Polar factor `W V†` of `g = W Σ V†`.
fn polar_unitary(g: &CMatrix) -> CMatrix {
    let svd = g.clone().svd(true, true);
    svd.u.expect("requested") * svd.v_t.expect("requested")
}

/// Best orthonormal basis for a fixed outcome assignment by convex ascent:
/// `U ← polar([R_{σ(0)} u_0, …])` never lowers `Σ_i ⟨u_i|R_{σ(i)}|u_i⟩` when
/// the `R` are positive semidefinite.
fn basis_ascent(steering: &[CMatrix], mut u: CMatrix, assignment: &[usize]) -> CMatrix {
    let score = |u: &CMatrix| -> f64 {
        assignment
            .iter()
            .enumerate()
            .map(|(i, &a)| u.column(i).dotc(&(&steering[a] * u.column(i))).re)
            .sum()
    };
    let mut last = score(&u);
    for _ in 0..200 {
        let g = CMatrix::from_fn(u.nrows(), u.ncols(), |r, c| (&steering[assignment[c]] * u.column(c))[r]);
        let next = polar_unitary(&g);
        let value = score(&next);
        if value <= last + 1e-15 {
            if value > last {
                u = next;
            }
            break;
        }
        u = next;
        last = value;
    }
    u
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

/// Candidate projective measurements: all weight on one outcome, optimal
/// splits between two outcomes, and basis ascent over injective
/// assignments seeded from the joint eigenbasis of the steering operators.
fn projective_candidates(steering: &[CMatrix], current: &Povm) -> Vec<Povm> {
    let k = steering.len();
    let d = steering[0].nrows();
    let mut out = Vec::new();
    for a in 0..k {
        let mut elements = vec![CMatrix::zeros(d, d); k];
        elements[a] = CMatrix::identity(d, d);
        out.push(Povm::new_unchecked(elements));
    }
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let (_, vecs) = hermitian_eigen(&(&steering[a] - &steering[b]));
            for rank in 1..d {
                // top `rank` eigenvectors to `a`, the rest to `b`
                let assignment: Vec<usize> = (0..d).map(|i| if i >= d - rank { a } else { b }).collect();
                out.push(Povm::projective(&vecs, &assignment, k));
            }
        }
    }
    if d >= 3 && k >= 3 {
        let mut seed_op = CMatrix::zeros(d, d);
        for (a, r) in steering.iter().enumerate() {
            seed_op += r.scale((a + 1) as f64);
        }
        let (_, basis) = hermitian_eigen(&seed_op);
        let outcomes: Vec<usize> = (0..k).collect();
        let mut seeds: Vec<(CMatrix, Vec<usize>)> = Vec::new();
        for perm in permutations(&outcomes) {
            seeds.push((basis.clone(), perm[..d.min(k)].to_vec()));
        }
        if let Some((u, assignment)) = rank_one_decomposition(current) {
            seeds.push((u, assignment));
        }
        for (u, assignment) in seeds {
            if assignment.len() != d {
                continue;
            }
            let u = basis_ascent(steering, u, &assignment);
            out.push(Povm::projective(&u, &assignment, k));
        }
    }
    out
}

/// Basis and outcome assignment of a POVM made of `d` rank-one projectors.
fn rank_one_decomposition(povm: &Povm) -> Option<(CMatrix, Vec<usize>)> {
    let d = povm.dim();
    let mut cols = Vec::new();
    let mut assignment = Vec::new();
    for (a, m) in povm.elements.iter().enumerate() {
        let (vals, vecs) = hermitian_eigen(m);
        for (i, &v) in vals.iter().enumerate() {
            if (v - 1.0).abs() < 1e-6 {
                cols.push(vecs.column(i).into_owned());
                assignment.push(a);
            } else if v.abs() > 1e-6 {
                return None;
            }
        }
    }
    if cols.len() != d {
        return None;
    }
    let u = CMatrix::from_columns(&cols);
    // re-orthonormalize
    Some((polar_unitary(&u), assignment))
}

fn inverse_sqrt(m: &CMatrix) -> Option<CMatrix> {
    let (vals, vecs) = hermitian_eigen(m);
    let max = vals.last().copied().unwrap_or(0.0);
    if !(max > 0.0) || !max.is_finite() {
        return None;
    }
    let floor = max * 1e-14;
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::new(1.0 / v.max(floor).sqrt(), 0.0)),
    ));
    Some(&vecs * diag * vecs.adjoint())
}

/// Fixed-point iteration `M_a ← Λ^{-1/2} R_a M_a R_a Λ^{-1/2}` with
/// `Λ = Σ_a R_a M_a R_a`, whose fixed points satisfy the optimality
/// conditions of `max Σ tr(M_a R_a)`. Steering operators are shifted to be
/// positive definite first (a common shift does not change the optimizer).
fn povm_fixed_point(steering: &[CMatrix], start: &Povm, tol: f64) -> Option<Povm> {
    let k = steering.len();
    let d = steering[0].nrows();
    let min = steering.iter().map(|r| hermitian_eigen(r).0[0]).fold(f64::INFINITY, f64::min);
    let scale = steering.iter().map(|r| r.norm()).fold(0.0, f64::max).max(1e-300);
    let shift = (-min).max(0.0) + 1e-6 * scale;
    let shifted: Vec<CMatrix> = steering.iter().map(|r| r + CMatrix::identity(d, d).scale(shift)).collect();
    let mix = 1e-3;
    let mut elements: Vec<CMatrix> = start
        .elements
        .iter()
        .map(|m| m.scale(1.0 - mix) + CMatrix::identity(d, d).scale(mix / k as f64))
        .collect();
    let mut best = Povm::new_unchecked(elements.clone());
    let mut best_score = best.score(steering);
    let mut last = best_score;
    for _ in 0..500 {
        let products: Vec<CMatrix> = shifted.iter().zip(&elements).map(|(r, m)| r * m * r).collect();
        let lambda = products.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p);
        let li = inverse_sqrt(&lambda)?;
        elements = products
            .iter()
            .map(|p| {
                let m = &li * p * &li;
                (&m + m.adjoint()).scale(0.5)
            })
            .collect();
        // completeness projection
        let total = elements.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
        let ti = inverse_sqrt(&total)?;
        elements = elements
            .iter()
            .map(|m| {
                let m = &ti * m * &ti;
                (&m + m.adjoint()).scale(0.5)
            })
            .collect();
        if elements.iter().any(|m| m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return None;
        }
        let candidate = Povm::new_unchecked(elements.clone());
        let score = candidate.score(steering);
        if score > best_score {
            best_score = score;
            best = candidate;
        }
        if (score - last).abs() < tol {
            break;
        }
        last = score;
    }
    Some(best)
}

/// Measurement for one setting of one party maximizing `Σ_a tr(M_a R_a)`.
/// The current POVM is returned unless a candidate scores strictly higher.
pub fn measurement_update(steering: &[CMatrix], current: &Povm, allow_povm: bool) -> Result<Povm> {
    if steering.len() != current.outcomes() || steering.iter().any(|r| r.nrows() != current.dim()) {
        return Err(Error::ShapeMismatch("steering operators do not match the POVM".into()));
    }
    for r in steering {
        let defect = hermiticity_defect(r);
        if defect > TOLERANCE {
            return Err(Error::NotHermitian(defect));
        }
    }
    let mut best = current.clone();
    let mut best_score = current.score(steering);
    let consider = |candidate: Povm, best: &mut Povm, best_score: &mut f64| {
        let score = candidate.score(steering);
        if score > *best_score {
            *best_score = score;
            *best = candidate;
        }
    };
    for candidate in projective_candidates(steering, current) {
        consider(candidate, &mut best, &mut best_score);
    }
    if allow_povm {
        if let Some(candidate) = povm_fixed_point(steering, &best, 1e-13) {
            if candidate.validate(TOLERANCE).is_ok() {
                consider(candidate, &mut best, &mut best_score);
            }
        }
    }
    Ok(best)
}

fn initial_measurements<R: Rng + ?Sized>(profile: &DimProfile, inputs: usize, outputs: usize, rng: &mut R) -> Measurements {
    profile
        .dims()
        .iter()
        .map(|&d| {
            (0..inputs)
                .map(|_| {
                    let u = haar_unitary(d, rng);
                    let assignment: Vec<usize> = (0..d).map(|i| i.min(outputs - 1)).collect();
                    Povm::projective(&u, &assignment, outputs)
                })
                .collect()
        })
        .collect()
}

fn sweep_value(steering: &[Vec<CMatrix>], measurements: &[Povm]) -> f64 {
    steering.iter().zip(measurements).map(|(r, m)| m.score(r)).sum()
}

/// One restart from a seeded random strategy.
pub fn seesaw_restart(
    f: &BellFunctional,
    profile: &DimProfile,
    config: &SeesawConfig,
    index: usize,
) -> Result<(RestartReport, Strategy)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ index as u64);
    let s = f.scenario();
    let mut measurements = initial_measurements(profile, s.inputs, s.outputs, &mut rng);
    let mut state = random_state(profile, &mut rng);
    let mut trace = vec![bell_operator(f, profile, &measurements)?.expectation(&state)?.re];
    let mut allow_povm = false;
    let mut sweeps = 0;
    let mut converged = false;
    let mut sweep_start = trace[0];
    while sweeps < config.max_sweeps {
        sweeps += 1;
        let b = bell_operator(f, profile, &measurements)?;
        let (lambda, next) = state_update(&b)?;
        // keep the old state on a numerically tied eigenvalue
        if lambda >= *trace.last().expect("nonempty") {
            state = next;
        }
        trace.push(b.expectation(&state)?.re);
        for party in 0..s.parties {
            let steering = steering_operators(f, &state, &measurements, party)?;
            for x in 0..s.inputs {
                measurements[party][x] = measurement_update(&steering[x], &measurements[party][x], allow_povm)?;
            }
            trace.push(sweep_value(&steering, &measurements[party]));
        }
        let value = *trace.last().expect("nonempty");
        if value - sweep_start < config.tolerance {
            if config.povm_polish && !allow_povm {
                allow_povm = true;
            } else {
                converged = true;
                break;
            }
        }
        sweep_start = value;
    }
    // final state for the final measurements
    let b = bell_operator(f, profile, &measurements)?;
    let (lambda, next) = state_update(&b)?;
    if lambda >= *trace.last().expect("nonempty") {
        state = next;
        trace.push(lambda);
    }
    let mut amps = state.amplitudes().clone();
    fix_global_phase(&mut amps);
    let state = StateVector::normalized(profile.clone(), amps)?;
    let final_value = b.expectation(&state)?.re;
    let report = RestartReport { index, final_value, sweeps, converged, trace };
    Ok((report, Strategy { profile: profile.clone(), state, measurements }))
}

/// Best value over seeded restarts. Restart `i` uses seed `seed ⊕ i`; the
/// reported strategy is the lowest-index restart within 1e-12 of the best.
pub fn seesaw_optimize(f: &BellFunctional, dims: &[usize], config: &SeesawConfig) -> Result<SeesawResult> {
    config.validate()?;
    let profile = DimProfile::new(dims.to_vec())?;
    if profile.parties() != f.scenario().parties {
        return Err(Error::ShapeMismatch(format!(
            "{} dimensions for a {}-party functional",
            profile.parties(),
            f.scenario().parties
        )));
    }
    let run = |i: usize| seesaw_restart(f, &profile, config, i);
    let runs: Vec<(RestartReport, Strategy)> = if config.parallel {
        (0..config.restarts).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..config.restarts).map(run).collect::<Result<_>>()?
    };
    let max = runs.iter().map(|(r, _)| r.final_value).fold(f64::NEG_INFINITY, f64::max);
    let best = runs.iter().position(|(r, _)| r.final_value >= max - 1e-12).expect("at least one restart");
    let best_strategy = runs[best].1.clone();
    Ok(SeesawResult {
        dims: dims.to_vec(),
        best_value: runs[best].0.final_value,
        best_restart: best,
        best_strategy,
        restarts: runs.into_iter().map(|(r, _)| r).collect(),
    })
}

#[derive(Serialize)]
struct MatrixJson {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let rows = |part: fn(&C64) -> f64| (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| part(&m[(r, c)])).collect()).collect();
        Self { re: rows(|z| z.re), im: rows(|z| z.im) }
    }
}

#[derive(Serialize)]
struct StrategyJson {
    dims: Vec<usize>,
    state_re: Vec<f64>,
    state_im: Vec<f64>,
    /// `[party][setting][outcome]`
    povms: Vec<Vec<Vec<MatrixJson>>>,
}

fn serialize_strategy<S: Serializer>(s: &Strategy, ser: S) -> std::result::Result<S::Ok, S::Error> {
    StrategyJson {
        dims: s.profile.dims().to_vec(),
        state_re: s.state.amplitudes().iter().map(|z| z.re).collect(),
        state_im: s.state.amplitudes().iter().map(|z| z.im).collect(),
        povms: s
            .measurements
            .iter()
            .map(|settings| settings.iter().map(|p| p.elements.iter().map(MatrixJson::from).collect()).collect())
            .collect(),
    }
    .serialize(ser)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{bell_value, default_functional, phased_fourier_table};
    use crate::measurement::phased_fourier_basis;
    use crate::states::{ghz_state, GhzParams};
    use approx::assert_abs_diff_eq;

    fn phased_fourier_measurements(parties: usize) -> Measurements {
        (0..parties)
            .map(|_| {
                (0..3)
                    .map(|x| {
                        let b = phased_fourier_basis(3, x).unwrap();
                        Povm::new(b.vectors().iter().map(|v| v.projector()).collect()).unwrap()
                    })
                    .collect()
            })
            .collect()
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn bell_operator_at_ghz_optimum() {
        let f = default_functional().unwrap();
        let profile = DimProfile::uniform(3, 3).unwrap();
        let m = phased_fourier_measurements(3);
        let b = bell_operator(&f, &profile, &m).unwrap();
        let (lambda, v) = principal_eigenpair(&b).unwrap();
        assert_abs_diff_eq!(lambda, 9.0, epsilon = 1e-9);
        let ghz = ghz_state(GhzParams::new(3, 3).unwrap());
        assert_abs_diff_eq!(v.inner(&ghz).unwrap().norm(), 1.0, epsilon = 1e-9);
        let residual = (b.matrix() * v.amplitudes() - v.amplitudes().scale(lambda)).norm();
        assert!(residual < 1e-9);
    }

    #[test]
    fn bell_operator_matches_table_value() {
        let f = default_functional().unwrap();
        let profile = DimProfile::uniform(3, 3).unwrap();
        let m = phased_fourier_measurements(3);
        let b = bell_operator(&f, &profile, &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi = random_state(&profile, &mut rng);
        let table = phased_fourier_table(&psi.to_density(), &f.support()).unwrap();
        assert_abs_diff_eq!(
            b.expectation(&psi).unwrap().re,
            bell_value(&f, &table).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn bell_operator_linearity() {
        let f = default_functional().unwrap();
        let profile = DimProfile::uniform(3, 3).unwrap();
        let m = phased_fourier_measurements(3);
        let zero = crate::bell::BellFunctional::zeros(f.scenario(), "zero");
        assert_eq!(bell_operator(&zero, &profile, &m).unwrap().matrix().norm(), 0.0);
        let b = bell_operator(&f, &profile, &m).unwrap();
        let b2 = bell_operator(&f.scaled(2.5), &profile, &m).unwrap();
        assert!((b2.matrix() - b.matrix().scale(2.5)).norm() < 1e-12);
    }

    #[test]
    fn bell_operator_shape_errors() {
        let f = default_functional().unwrap();
        let m = phased_fourier_measurements(3);
        assert!(bell_operator(&f, &DimProfile::new(vec![2, 3, 3]).unwrap(), &m).is_err());
        assert!(bell_operator(&f, &DimProfile::uniform(2, 3).unwrap(), &m[..2].to_vec()).is_err());
    }

    #[test]
    fn steering_reproduces_value() {
        let f = default_functional().unwrap();
        let profile = DimProfile::new(vec![2, 3, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = initial_measurements(&profile, 3, 3, &mut rng);
        let psi = random_state(&profile, &mut rng);
        let value = bell_operator(&f, &profile, &m).unwrap().expectation(&psi).unwrap().re;
        for party in 0..3 {
            let r = steering_operators(&f, &psi, &m, party).unwrap();
            assert_abs_diff_eq!(sweep_value(&r, &m[party]), value, epsilon = 1e-12);
        }
    }

    #[test]
    fn dominant_outcome_takes_identity() {
        let d = 3;
        let r0 = CMatrix::identity(d, d).scale(2.0);
        let r1 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(0.5), c(0.2)]));
        let r2 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.3), c(1.5), c(0.0)]));
        let start = Povm::projective(&CMatrix::identity(d, d), &[1, 2, 1], 3);
        let best = measurement_update(&[r0, r1, r2], &start, true).unwrap();
        assert!((best.elements()[0].clone() - CMatrix::identity(d, d)).norm() < 1e-9);
    }

    #[test]
    fn commuting_steering_matches_assignment_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for d in [2usize, 3] {
            for _ in 0..20 {
                let diag: Vec<Vec<f64>> = (0..3).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
                let u = haar_unitary(d, &mut rng);
                let steering: Vec<CMatrix> = diag
                    .iter()
                    .map(|dg| {
                        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, dg.iter().map(|&x| c(x))));
                        &u * m * u.adjoint()
                    })
                    .collect();
                // oracle: enumerate every assignment of eigen-directions to outcomes
                let mut oracle = f64::NEG_INFINITY;
                for code in 0..3usize.pow(d as u32) {
                    let mut rem = code;
                    let mut total = 0.0;
                    for i in 0..d {
                        total += diag[rem % 3][i];
                        rem /= 3;
                    }
                    oracle = oracle.max(total);
                }
                let start = initial_measurements(&DimProfile::uniform(1, d).unwrap(), 1, 3, &mut rng)
                    .remove(0)
                    .remove(0);
                let best = measurement_update(&steering, &start, false).unwrap();
                assert_abs_diff_eq!(best.score(&steering), oracle, epsilon = 1e-9);
                best.validate(1e-9).unwrap();
            }
        }
    }

    #[test]
    fn update_from_optimum_keeps_value_nine() {
        let f = default_functional().unwrap();
        let profile = DimProfile::uniform(3, 3).unwrap();
        let mut m = phased_fourier_measurements(3);
        let ghz = ghz_state(GhzParams::new(3, 3).unwrap());
        for party in 0..3 {
            let r = steering_operators(&f, &ghz, &m, party).unwrap();
            for x in 0..3 {
                m[party][x] = measurement_update(&r[x], &m[party][x], true).unwrap();
            }
        }
        let value = bell_operator(&f, &profile, &m).unwrap().expectation(&ghz).unwrap().re;
        assert_abs_diff_eq!(value, 9.0, epsilon = 1e-9);
    }

    #[test]
    fn povm_fixed_point_never_loses_to_projective_on_trine_problem() {
        // three symmetric qubit steering operators: the optimum is a trine POVM
        let d = 2;
        let steering: Vec<CMatrix> = (0..3)
            .map(|a| {
                let theta = 2.0 * std::f64::consts::PI * a as f64 / 3.0;
                let v = nalgebra::DVector::from_vec(vec![c((theta / 2.0).cos()), c((theta / 2.0).sin())]);
                &v * v.adjoint()
            })
            .collect();
        let start = Povm::projective(&CMatrix::identity(d, d), &[0, 1], 3);
        let projective = measurement_update(&steering, &start, false).unwrap();
        let general = measurement_update(&steering, &start, true).unwrap();
        general.validate(1e-9).unwrap();
        assert_abs_diff_eq!(projective.score(&steering), 1.0 + 0.75f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(general.score(&steering), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn restarts_are_monotone_and_feasible() {
        let f = default_functional().unwrap();
        let config = SeesawConfig { restarts: 3, seed: 5, ..Default::default() };
        let result = seesaw_optimize(&f, &[2, 2, 2], &config).unwrap();
        for r in &result.restarts {
            assert!(r.worst_decrease() <= 1e-12, "restart {} decreased by {}", r.index, r.worst_decrease());
        }
        result.best_strategy.validate().unwrap();
        assert_abs_diff_eq!(
            result.best_strategy.value(&f).unwrap(),
            result.best_value,
            epsilon = 1e-9
        );
    }

    #[test]
    fn seesaw_is_reproducible() {
        let f = default_functional().unwrap();
        let config = SeesawConfig { restarts: 2, seed: 77, ..Default::default() };
        let a = seesaw_optimize(&f, &[2, 3, 2], &config).unwrap();
        let b = seesaw_optimize(&f, &[2, 3, 2], &SeesawConfig { parallel: false, ..config }).unwrap();
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.restarts, b.restarts);
    }

    #[test]
    fn seesaw_config_validation() {
        let f = default_functional().unwrap();
        assert!(seesaw_optimize(&f, &[2, 2, 2], &SeesawConfig { restarts: 0, ..Default::default() }).is_err());
        assert!(seesaw_optimize(&f, &[2, 2, 2], &SeesawConfig { tolerance: 0.0, ..Default::default() }).is_err());
        assert!(seesaw_optimize(&f, &[2, 2], &SeesawConfig::default()).is_err());
    }

    #[test]
    fn result_serializes_with_povm_matrices() {
        let f = default_functional().unwrap();
        let config = SeesawConfig { restarts: 1, max_sweeps: 5, ..Default::default() };
        let result = seesaw_optimize(&f, &[2, 2, 2], &config).unwrap();
        let json = serde_json::to_value(&result).unwrap();
        let povm = &json["best_strategy"]["povms"][0][0][0];
        assert_eq!(povm["re"].as_array().unwrap().len(), 2);
        assert!(povm["im"].is_array());
    }
}
