//! Finite-count significance: Bernoulli relative entropy, Chernoff-type
//! p-values, sample-size inversion, binomial standard errors and z-scores.
//!
//! Witness and Bell values are mapped to success probabilities by dividing
//! by their algebraic maximum (2 and 9 respectively).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::witness::WitnessTotals;

/// Algebraic maximum of the two-basis witness.
pub const WITNESS_SCALE: f64 = 2.0;
/// Algebraic maximum of the default Bell functional.
pub const BELL_SCALE: f64 = 9.0;

/// `D(p‖q)` for Bernoulli distributions, in nats. Terms with zero mass in
/// `p` vanish; positive mass where `q` has none gives `+∞`.
pub fn kl_bernoulli(p: f64, q: f64) -> f64 {
    fn term(a: f64, b: f64) -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    }
    term(p, q) + term(1.0 - p, 1.0 - q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PValueQuery {
    pub observed: f64,
    pub bound: f64,
    pub scale: f64,
    pub counts: u64,
}

impl PValueQuery {
    pub fn new(observed: f64, bound: f64, scale: f64, counts: u64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::OutOfRange { name: "scale", value: scale, range: "(0, inf)" });
        }
        let b = bound / scale;
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::OutOfRange { name: "bound/scale", value: b, range: "(0, 1)" });
        }
        let o = observed / scale;
        if !(0.0..=1.0).contains(&o) {
            return Err(Error::OutOfRange { name: "observed/scale", value: o, range: "[0, 1]" });
        }
        if counts == 0 {
            return Err(Error::OutOfRange { name: "counts", value: 0.0, range: ">= 1" });
        }
        Ok(Self { observed, bound, scale, counts })
    }

    pub fn is_violation(&self) -> bool {
        self.observed > self.bound
    }

    /// `D(observed/scale ‖ bound/scale)`.
    pub fn divergence(&self) -> f64 {
        kl_bernoulli(self.observed / self.scale, self.bound / self.scale)
    }
}

/// `exp(−N·D(observed/scale ‖ bound/scale))`, or 1 when the observed value
/// does not exceed the bound.
pub fn p_value(q: &PValueQuery) -> f64 {
    if !q.is_violation() {
        return 1.0;
    }
    (-(q.counts as f64) * q.divergence()).exp()
}

/// Smallest `N` with `p_value ≤ target` for an observed value `bound + delta`.
pub fn required_counts(delta: f64, bound: f64, scale: f64, target: f64) -> Result<u64> {
    if !(delta > 0.0) {
        return Err(Error::OutOfRange { name: "delta", value: delta, range: "(0, inf)" });
    }
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::OutOfRange { name: "target", value: target, range: "(0, 1]" });
    }
    let base = PValueQuery::new(bound + delta, bound, scale, 1)?;
    let kl = base.divergence();
    let p_at = |n: u64| p_value(&PValueQuery { counts: n, ..base });
    let mut n = ((-target.ln()) / kl).ceil().max(1.0) as u64;
    while p_at(n) > target {
        n += 1;
    }
    while n > 1 && p_at(n - 1) <= target {
        n -= 1;
    }
    Ok(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrequencyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub counts: u64,
}

/// Binomial standard error `scale·√(p̂(1−p̂)/N)` of a quantity whose value
/// divided by `scale` is a success frequency over `N` trials.
pub fn binomial_stderr(value: f64, scale: f64, counts: u64) -> Result<FrequencyEstimate> {
    if counts == 0 {
        return Err(Error::OutOfRange { name: "counts", value: 0.0, range: ">= 1" });
    }
    if !(scale > 0.0) {
        return Err(Error::OutOfRange { name: "scale", value: scale, range: "(0, inf)" });
    }
    let p = (value / scale).clamp(0.0, 1.0);
    Ok(FrequencyEstimate { value, stderr: scale * (p * (1.0 - p) / counts as f64).sqrt(), counts })
}

/// Witness estimate with both settings pooled into one trial stream.
pub fn stderr_witness(totals: &WitnessTotals) -> Result<FrequencyEstimate> {
    if totals.computational_total == 0 {
        return Err(Error::ZeroTotals(vec![0]));
    }
    if totals.fourier_total == 0 {
        return Err(Error::ZeroTotals(vec![1]));
    }
    let w = totals.identical_successes as f64 / totals.computational_total as f64
        + totals.sum_zero_successes as f64 / totals.fourier_total as f64;
    binomial_stderr(w, WITNESS_SCALE, totals.pooled_total())
}

pub fn stderr_bell(value: f64, counts: u64) -> Result<FrequencyEstimate> {
    binomial_stderr(value, BELL_SCALE, counts)
}

pub fn z_score(observed: f64, bound: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::OutOfRange { name: "sigma", value: sigma, range: "(0, inf)" });
    }
    Ok((observed - bound) / sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PValueReport {
    pub observed: f64,
    pub bound: f64,
    pub scale: f64,
    #[serde(rename = "N")]
    pub counts: u64,
    pub kl: f64,
    pub p_value: f64,
    pub violation: bool,
    /// Distance above the bound in binomial standard errors, when defined.
    pub z: Option<f64>,
}

impl PValueReport {
    pub fn new(q: &PValueQuery) -> Self {
        let sigma = binomial_stderr(q.observed, q.scale, q.counts).map(|e| e.stderr).ok();
        Self {
            observed: q.observed,
            bound: q.bound,
            scale: q.scale,
            counts: q.counts,
            kl: q.divergence(),
            p_value: p_value(q),
            violation: q.is_violation(),
            z: sigma.and_then(|s| z_score(q.observed, q.bound, s).ok()),
        }
    }
}
