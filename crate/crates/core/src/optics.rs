//! Post-selected simulation of the path-identity source: pair sources
//! emitting into `d` path layers, per-layer path exchanges, fourfold
//! coincidence, and partial distinguishability of the exchanged photons.
//!
//! Only the coincidence subspace is modelled. Every pair of source terms
//! that survives post-selection contributes a coherence equal to the overlap
//! of the internal states of the photons reaching each detector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::project_trigger;
use crate::qudit::{fidelity_with_pure, CMatrix, DensityMatrix, DimProfile, StateVector, C64};
use crate::states::{ghz_state, GhzParams};

/// A source of `Σ_ℓ w_ℓ |ℓ⟩|ℓ⟩` on two photons.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSourceSpec {
    pub photons: [String; 2],
}

impl PairSourceSpec {
    pub fn new(first: &str, second: &str) -> Result<Self> {
        if first == second {
            return Err(Error::Config(format!("source emits photon {first} twice")));
        }
        Ok(Self { photons: [first.to_string(), second.to_string()] })
    }
}

/// Exchange of the paths of two photons in one layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeSpec {
    pub first: String,
    pub second: String,
    pub layer: usize,
}

impl ExchangeSpec {
    pub fn new(first: &str, second: &str, layer: usize) -> Self {
        Self { first: first.to_string(), second: second.to_string(), layer }
    }
}

/// Pairwise HOM visibilities `s = |⟨φ_p|φ_q⟩|²` of the photons' internal
/// states. Pairs not listed are treated as identical photons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhotonOverlap {
    pub bc: f64,
    pub bd: f64,
    pub cd: f64,
}

impl Default for PhotonOverlap {
    fn default() -> Self {
        Self { bc: 1.0, bd: 1.0, cd: 1.0 }
    }
}

impl PhotonOverlap {
    pub fn new(bc: f64, bd: f64, cd: f64) -> Result<Self> {
        let o = Self { bc, bd, cd };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("s_bc", self.bc), ("s_bd", self.bd), ("s_cd", self.cd)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { name, value: v, range: "[0, 1]" });
            }
        }
        Ok(())
    }

    /// Amplitude overlap `√s` of two photons.
    pub fn amplitude(&self, p: &str, q: &str) -> f64 {
        if p == q {
            return 1.0;
        }
        let key = if p < q { (p, q) } else { (q, p) };
        match key {
            ("b", "c") => self.bc.sqrt(),
            ("b", "d") => self.bd.sqrt(),
            ("c", "d") => self.cd.sqrt(),
            _ => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    pub dim: usize,
    pub sources: Vec<PairSourceSpec>,
    pub exchanges: Vec<ExchangeSpec>,
    #[serde(default)]
    pub overlaps: PhotonOverlap,
    /// Relative pump amplitude per layer, shared by all sources.
    #[serde(default)]
    pub layer_weights: Option<Vec<f64>>,
    /// Phase of each source's emission per layer, `[source][layer]`.
    #[serde(default)]
    pub phases: Option<Vec<Vec<f64>>>,
    /// Project the first photon onto the uniform superposition afterwards.
    #[serde(default)]
    pub trigger: bool,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            sources: vec![
                PairSourceSpec { photons: ["a".into(), "b".into()] },
                PairSourceSpec { photons: ["c".into(), "d".into()] },
            ],
            exchanges: vec![ExchangeSpec::new("b", "c", 1), ExchangeSpec::new("b", "d", 2)],
            overlaps: PhotonOverlap::default(),
            layer_weights: None,
            phases: None,
            trigger: false,
        }
    }
}

impl CircuitConfig {
    /// Detector labels, one per photon in source order.
    pub fn detectors(&self) -> Vec<String> {
        self.sources.iter().flat_map(|s| s.photons.iter().cloned()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config(format!("path dimension {} < 2", self.dim)));
        }
        if self.sources.is_empty() {
            return Err(Error::Config("no sources".into()));
        }
        let detectors = self.detectors();
        for (i, p) in detectors.iter().enumerate() {
            if detectors[..i].contains(p) {
                return Err(Error::Config(format!("photon {p} emitted by more than one source")));
            }
        }
        for e in &self.exchanges {
            for p in [&e.first, &e.second] {
                if !detectors.contains(p) {
                    return Err(Error::Config(format!("exchange names unknown photon {p}")));
                }
            }
            if e.first == e.second {
                return Err(Error::Config(format!("exchange of photon {} with itself", e.first)));
            }
            if e.layer >= self.dim {
                return Err(Error::Config(format!("exchange in layer {} of a {}-layer circuit", e.layer, self.dim)));
            }
        }
        self.overlaps.validate()?;
        if let Some(w) = &self.layer_weights {
            if w.len() != self.dim || w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(Error::Config(format!("layer weights must be {} non-negative numbers", self.dim)));
            }
            if w.iter().all(|&x| x == 0.0) {
                return Err(Error::Config("all layer weights are zero".into()));
            }
        }
        if let Some(ph) = &self.phases {
            if ph.len() != self.sources.len() || ph.iter().any(|row| row.len() != self.dim) {
                return Err(Error::Config(format!(
                    "phases must be {} rows of {} entries",
                    self.sources.len(),
                    self.dim
                )));
            }
        }
        Ok(())
    }

    /// For each layer, the detector reached by each photon.
    fn routing(&self) -> Vec<BTreeMap<String, String>> {
        let detectors = self.detectors();
        (0..self.dim)
            .map(|layer| {
                let mut route: BTreeMap<String, String> = detectors.iter().map(|p| (p.clone(), p.clone())).collect();
                for e in self.exchanges.iter().filter(|e| e.layer == layer) {
                    for target in route.values_mut() {
                        if *target == e.first {
                            *target = e.second.clone();
                        } else if *target == e.second {
                            *target = e.first.clone();
                        }
                    }
                }
                route
            })
            .collect()
    }

    fn source_amplitudes(&self) -> Vec<Vec<C64>> {
        let w: Vec<f64> = self.layer_weights.clone().unwrap_or_else(|| vec![1.0; self.dim]);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        (0..self.sources.len())
            .map(|s| {
                (0..self.dim)
                    .map(|l| {
                        let phase = self.phases.as_ref().map_or(0.0, |ph| ph[s][l]);
                        C64::from_polar(w[l] / norm, phase)
                    })
                    .collect()
            })
            .collect()
    }
}

/// A source term that survives coincidence: output digit and arriving photon
/// per detector.
#[derive(Clone, Debug)]
struct Branch {
    amplitude: C64,
    digits: Vec<usize>,
    arrivals: Vec<String>,
}

fn surviving_branches(config: &CircuitConfig) -> Vec<Branch> {
    let detectors = config.detectors();
    let routing = config.routing();
    let amps = config.source_amplitudes();
    let sources = config.sources.len();
    let mut out = Vec::new();
    for code in 0..config.dim.pow(sources as u32) {
        let mut layers = vec![0; sources];
        let mut rem = code;
        for s in (0..sources).rev() {
            layers[s] = rem % config.dim;
            rem /= config.dim;
        }
        let mut arrivals: Vec<Option<(String, usize)>> = vec![None; detectors.len()];
        let mut coincident = true;
        let mut amplitude = C64::new(1.0, 0.0);
        for (s, source) in config.sources.iter().enumerate() {
            amplitude *= amps[s][layers[s]];
            for photon in &source.photons {
                let target = &routing[layers[s]][photon];
                let slot = detectors.iter().position(|d| d == target).expect("routing stays on detectors");
                if arrivals[slot].is_some() {
                    coincident = false;
                }
                arrivals[slot] = Some((photon.clone(), layers[s]));
            }
        }
        if coincident && amplitude.norm() > 0.0 {
            let (arrivals, digits) = arrivals.into_iter().map(|a| a.expect("one photon per detector")).unzip();
            out.push(Branch { amplitude, digits, arrivals });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpticsOutput {
    pub state: DensityMatrix,
    pub success_probability: f64,
    /// Fidelity with the `n`-party GHZ state of the path dimension.
    pub ghz_fidelity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpticsReport {
    pub postselected: OpticsOutput,
    pub triggered: Option<OpticsOutput>,
}

/// State of the detected path modes conditioned on one photon per detector,
/// and the probability of that coincidence.
pub fn simulate_postselected(config: &CircuitConfig) -> Result<(DensityMatrix, f64)> {
    config.validate()?;
    let branches = surviving_branches(config);
    if branches.is_empty() {
        return Err(Error::ZeroProbability(0.0));
    }
    let detectors = config.detectors().len();
    let profile = DimProfile::uniform(detectors, config.dim)?;
    let n = profile.total();
    let mut m = CMatrix::zeros(n, n);
    for bj in &branches {
        let row = profile.flat_index(&bj.digits);
        for bk in &branches {
            let col = profile.flat_index(&bk.digits);
            let overlap: f64 = bj
                .arrivals
                .iter()
                .zip(&bk.arrivals)
                .map(|(p, q)| config.overlaps.amplitude(p, q))
                .product();
            m[(row, col)] += bj.amplitude * bk.amplitude.conj() * overlap;
        }
    }
    let p = m.trace().re;
    if p <= 1e-15 {
        return Err(Error::ZeroProbability(p));
    }
    let m = m.unscale(p);
    let state = DensityMatrix::new(profile, m).map_err(|e| match e {
        Error::InvalidDensityMatrix(msg) => {
            Error::Config(format!("photon overlaps are not realizable by any internal states ({msg})"))
        }
        other => other,
    })?;
    Ok((state, p))
}

/// Normalized coincidence probability `½(1 − s·e^{−t²})` at delay `t` in units
/// of the coherence time.
pub fn hom_coincidence(s: f64, t: f64) -> f64 {
    0.5 * (1.0 - s * (-t * t).exp())
}

/// Dip visibility `1 − C(0)/C(∞)`.
pub fn hom_visibility(s: f64) -> f64 {
    1.0 - hom_coincidence(s, 0.0) / 0.5
}

/// Projects the first party onto the uniform superposition of paths.
pub fn trigger_to_three(state: &DensityMatrix) -> Result<(DensityMatrix, f64)> {
    let d = state
        .profile()
        .uniform_dim()
        .ok_or_else(|| Error::InvalidProfile(format!("trigger needs equal dimensions, got {:?}", state.profile().dims())))?;
    if state.profile().parties() < 2 {
        return Err(Error::InvalidParties("trigger needs at least two parties".into()));
    }
    let plus = StateVector::normalized(
        DimProfile::uniform(1, d)?,
        nalgebra::DVector::from_element(d, C64::new(1.0, 0.0)),
    )?;
    project_trigger(state, 0, &plus)
}

fn ghz_fidelity(state: &DensityMatrix) -> Result<f64> {
    let profile = state.profile();
    let d = profile.uniform_dim().ok_or_else(|| Error::InvalidProfile("mixed dimensions".into()))?;
    fidelity_with_pure(state, &ghz_state(GhzParams::new(profile.parties(), d)?))
}

/// Full run of a circuit config, including the optional trigger step.
pub fn run_circuit(config: &CircuitConfig) -> Result<OpticsReport> {
    let (state, p) = simulate_postselected(config)?;
    let postselected = OpticsOutput { ghz_fidelity: ghz_fidelity(&state)?, state, success_probability: p };
    let triggered = if config.trigger {
        let (state, p) = trigger_to_three(&postselected.state)?;
        Some(OpticsOutput { ghz_fidelity: ghz_fidelity(&state)?, state, success_probability: p })
    } else {
        None
    };
    Ok(OpticsReport { postselected, triggered })
}

#[derive(Serialize)]
struct OutputJson {
    dims: Vec<usize>,
    success_probability: f64,
    ghz_fidelity: f64,
    /// Nonzero entries as `[row, col, re, im]`.
    entries: Vec<(usize, usize, f64, f64)>,
}

impl From<&OpticsOutput> for OutputJson {
    fn from(o: &OpticsOutput) -> Self {
        let m = o.state.matrix();
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                if z.norm() > 1e-15 {
                    entries.push((r, c, z.re, z.im));
                }
            }
        }
        Self {
            dims: o.state.profile().dims().to_vec(),
            success_probability: o.success_probability,
            ghz_fidelity: o.ghz_fidelity,
            entries,
        }
    }
}

impl Serialize for OpticsOutput {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OutputJson::from(self).serialize(s)
    }
}

impl Serialize for OpticsReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            postselected: &'a OpticsOutput,
            triggered: &'a Option<OpticsOutput>,
        }
        Repr { postselected: &self.postselected, triggered: &self.triggered }.serialize(s)
    }
}
