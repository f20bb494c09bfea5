//! Realisable PAC-Bayes certificates and the symmetry-counting bound.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::ArchSpec;

/// Failure probability used when none is given.
pub const DEFAULT_DELTA: f64 = 0.01;

/// Error bounds at or above this are no better than chance on balanced labels.
pub const VACUOUS_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneralisationBound {
    pub n: usize,
    pub delta: f64,
    pub info_nats: f64,
    /// `B = (I + ln(2n/δ)) / (n − 1)`, a bound on `ln 1/(1 − ε)`.
    pub raw_bound: f64,
    /// `min(1, 1 − e^{−B})`, a bound on the version-space average error `ε`.
    pub error_bound: f64,
    pub vacuous: bool,
}

/// Version-space average test error bound holding for a `1 − δ` fraction of
/// training sets of size `n`, given information content `info_nats`.
pub fn realisable_bound(info_nats: f64, n: usize, delta: f64) -> Result<GeneralisationBound> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "PAC-Bayes bound needs n >= 2, got {n}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !(info_nats >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "information must be non-negative, got {info_nats}"
        )));
    }
    let nf = n as f64;
    let raw_bound = (info_nats + (2.0 * nf / delta).ln()) / (nf - 1.0);
    // 1 − e^{−B} via expm1 keeps precision when B is small.
    let error_bound = (-(-raw_bound).exp_m1()).min(1.0);
    Ok(GeneralisationBound {
        n,
        delta,
        info_nats,
        raw_bound,
        error_bound,
        vacuous: error_bound >= VACUOUS_THRESHOLD,
    })
}

/// `ln 2 · w · Σ_l d_l d_{l−1} − Σ_{hidden} ln(d_l!)`, in nats.
///
/// Compares the number of `w`-bit weight vectors with the hidden-unit
/// permutation symmetries; factorials go through `ln Γ(d + 1)`.
pub fn symmetry_info_bound(arch: &ArchSpec) -> Result<f64> {
    arch.validate()?;
    let dims = arch.layer_dims();
    let weights: f64 = dims.windows(2).map(|p| p[0] as f64 * p[1] as f64).sum();
    let symmetries: f64 = arch.widths.iter().map(|&d| ln_factorial(d)).sum();
    Ok(LN_2 * f64::from(arch.weight_bits) * weights - symmetries)
}

pub fn ln_factorial(d: usize) -> f64 {
    libm::lgamma(d as f64 + 1.0)
}

/// Stirling's `d ln d − d`, kept for comparison against the exact form.
pub fn stirling_ln_factorial(d: usize) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let d = d as f64;
    d * d.ln() - d
}
