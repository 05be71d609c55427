//! Seeded random unitaries, states and density matrices.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::qudit::{CMatrix, CVector, DensityMatrix, DimProfile, StateVector, C64};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed `d × d` unitary (QR of a Ginibre matrix with the phase
/// of `R`'s diagonal absorbed into `Q`).
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let qr = ginibre(d, d, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..d {
        let diag = r[(c, c)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { C64::new(1.0, 0.0) };
        for row in 0..d {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(profile: &DimProfile, rng: &mut R) -> StateVector {
    let v: CVector = ginibre(profile.total(), 1, rng).column(0).into_owned();
    StateVector::normalized(profile.clone(), v).expect("Gaussian vector is nonzero")
}

/// Random density matrix `G G† / tr(G G†)` with `G` a `D × rank` Ginibre
/// matrix.
pub fn random_density<R: Rng + ?Sized>(profile: &DimProfile, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(profile.total(), rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let m = m.unscale(tr);
    let m = (&m + m.adjoint()).scale(0.5);
    DensityMatrix::new_unchecked(profile.clone(), m)
}
