//! GHZ states and the noise models applied to them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qudit::{CMatrix, CVector, DensityMatrix, DimProfile, StateVector, C64};

/// Party count and local dimension of a GHZ state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhzParams {
    pub n: usize,
    pub d: usize,
}

impl GhzParams {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n < 2 || d < 2 {
            return Err(Error::Config(format!("GHZ needs n >= 2 and d >= 2, got n={n}, d={d}")));
        }
        Ok(Self { n, d })
    }

    pub fn profile(&self) -> DimProfile {
        DimProfile::uniform(self.n, self.d).expect("validated on construction")
    }

    /// Flat index of `|j j … j⟩`.
    pub fn branch_index(&self, j: usize) -> usize {
        let profile = self.profile();
        profile.flat_index(&vec![j; self.n])
    }
}

/// `(1/√d) Σ_j |j⟩^{⊗n}`.
pub fn ghz_state(p: GhzParams) -> StateVector {
    let profile = p.profile();
    let mut amps = CVector::zeros(profile.total());
    let a = C64::new(1.0 / (p.d as f64).sqrt(), 0.0);
    for j in 0..p.d {
        amps[p.branch_index(j)] = a;
    }
    StateVector::new(profile, amps).expect("GHZ amplitudes are normalized")
}

/// Visibility of the target state in an isotropic mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub visibility: f64,
}

impl NoiseModel {
    pub fn new(visibility: f64) -> Result<Self> {
        check_unit_interval("visibility", visibility)?;
        Ok(Self { visibility })
    }
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange { name, value, range: "[0, 1]" });
    }
    Ok(())
}

/// `v|ψ⟩⟨ψ| + (1−v)·I/D`.
pub fn isotropic_mix(psi: &StateVector, v: f64) -> Result<DensityMatrix> {
    check_unit_interval("visibility", v)?;
    let noise = DensityMatrix::maximally_mixed(psi.profile().clone());
    psi.to_density().mix(&noise, v)
}

/// Symmetric matrix of coherence factors `λ_{jk}` between GHZ branches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchDamping {
    factors: Vec<Vec<f64>>,
}

impl BranchDamping {
    pub fn new(factors: Vec<Vec<f64>>) -> Result<Self> {
        let d = factors.len();
        for (j, row) in factors.iter().enumerate() {
            if row.len() != d {
                return Err(Error::ShapeMismatch(format!("damping row {j} has {} entries, expected {d}", row.len())));
            }
            if (row[j] - 1.0).abs() > 1e-12 {
                return Err(Error::OutOfRange { name: "diagonal damping factor", value: row[j], range: "{1}" });
            }
            for (k, &l) in row.iter().enumerate() {
                check_unit_interval("damping factor", l)?;
                if (l - factors[k][j]).abs() > 1e-12 {
                    return Err(Error::ShapeMismatch(format!("damping not symmetric at ({j},{k})")));
                }
            }
        }
        Ok(Self { factors })
    }

    /// Every off-diagonal factor equal to `lambda`.
    pub fn uniform(d: usize, lambda: f64) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|j| (0..d).map(|k| if j == k { 1.0 } else { lambda }).collect())
                .collect(),
        )
    }

    /// Factors given as the upper triangle `λ_{01}, λ_{02}, …, λ_{12}, …`.
    pub fn from_upper(d: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != d * (d - 1) / 2 {
            return Err(Error::ShapeMismatch(format!(
                "{} upper-triangle factors for d = {d}",
                upper.len()
            )));
        }
        let mut factors = vec![vec![1.0; d]; d];
        let mut it = upper.iter();
        for j in 0..d {
            for k in j + 1..d {
                let l = *it.next().expect("length checked");
                factors[j][k] = l;
                factors[k][j] = l;
            }
        }
        Self::new(factors)
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.factors[j][k]
    }
}

/// GHZ projector with the `(j, k)` branch coherence scaled by `λ_{jk}`.
pub fn damped_ghz(p: GhzParams, damping: &BranchDamping) -> Result<DensityMatrix> {
    if damping.dim() != p.d {
        return Err(Error::ShapeMismatch(format!(
            "damping for d = {} applied to d = {}",
            damping.dim(),
            p.d
        )));
    }
    let profile = p.profile();
    let n = profile.total();
    let mut m = CMatrix::zeros(n, n);
    let w = 1.0 / p.d as f64;
    for j in 0..p.d {
        for k in 0..p.d {
            m[(p.branch_index(j), p.branch_index(k))] = C64::new(w * damping.get(j, k), 0.0);
        }
    }
    DensityMatrix::new(profile, m)
}
