//! Gaussian orthant probabilities and the kernel complexity measures.
//!
//! For `z ~ N(0, Σ)` and labels `c ∈ {±1}ⁿ`, the orthant probability
//! `p = P[sign z = c]` satisfies
//!
//! ```text
//! p = 2⁻ⁿ E_u[exp(−½ (c⊙|u|)ᵀ A (c⊙|u|))],   A = ⁿ√det Σ · Σ⁻¹ − I,  u ~ N(0, I)
//! ```
//!
//! `C₀ = −ln p` is estimated by Monte Carlo over that expectation, and
//! Jensen's inequality on the same expectation gives the closed form
//! `C₀ ≤ n(ln 2 − ½) + C₁` with
//! `C₁ = ⁿ√det Σ [(½ − 1/π) tr Σ⁻¹ + (1/π) cᵀΣ⁻¹c]`.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, inverse_from_cholesky, normalized_det_root, CholeskyFactor, CovarianceMatrix, Matrix,
    DEFAULT_RESIDUAL_TOLERANCE,
};
use crate::rng::{self, Domain};

/// Monte-Carlo sample count used when none is given.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Largest dimension the rejection oracle accepts.
pub const ORACLE_MAX_N: usize = 12;

/// Smallest trial count the rejection oracle accepts.
pub const ORACLE_MIN_TRIALS: u64 = 10_000;

const ORACLE_CHUNK: u64 = 1 << 16;

/// Binary class labels, each exactly `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct LabelVector(Vec<i8>);

impl LabelVector {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if let Some(i) = labels.iter().position(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidArgument(format!(
                "label {i} is {}, expected ±1",
                labels[i]
            )));
        }
        Ok(Self(labels))
    }

    pub fn from_f64(labels: &[f64]) -> Result<Self> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if c == 1.0 {
                    Ok(1)
                } else if c == -1.0 {
                    Ok(-1)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "label {i} is {c}, expected ±1"
                    )))
                }
            })
            .collect::<Result<Vec<i8>>>()
            .map(Self)
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn sign(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    /// `Σ cᵢ`.
    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&c| i64::from(c)).sum()
    }
}

/// Monte-Carlo `C₀` together with the closed-form `C₁` and the derived bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoEstimate {
    pub n: usize,
    pub c0_nats: f64,
    pub c0_std_error: f64,
    pub c1_nats: f64,
    /// `n(ln 2 − ½) + C₁`.
    pub info_upper_nats: f64,
    pub samples: usize,
    pub seed: u64,
    pub inverse_residual: f64,
}

impl InfoEstimate {
    /// `p̂ = e^{−C₀}`.
    pub fn orthant_probability(&self) -> f64 {
        (-self.c0_nats).exp()
    }

    /// Standard error of `p̂`, carried through the exponential.
    pub fn orthant_std_error(&self) -> f64 {
        self.orthant_probability() * self.c0_std_error
    }
}

/// Negative log of the Jensen lower bound on the orthant probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoUpperBound {
    /// `n ln 2 − n/2 + C₁`.
    pub exact_nats: f64,
    /// `n/5 + C₁`, the rounded form; always at least `exact_nats`.
    pub display_nats: f64,
}

/// Rejection-sampling estimate of an orthant probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleEstimate {
    pub probability: f64,
    pub std_error: f64,
    pub hits: u64,
    pub trials: u64,
}

/// Cholesky factor, inverse and normalised determinant root of a kernel
/// matrix that has passed the residual gate.
#[derive(Debug, Clone)]
pub struct KernelAnalysis {
    factor: CholeskyFactor,
    inverse: Matrix,
    det_root: f64,
    residual: f64,
}

impl KernelAnalysis {
    pub fn new(sigma: &CovarianceMatrix) -> Result<Self> {
        Self::with_tolerance(sigma, DEFAULT_RESIDUAL_TOLERANCE)
    }

    pub fn with_tolerance(sigma: &CovarianceMatrix, tolerance: f64) -> Result<Self> {
        let mut factor = cholesky(sigma)?;
        let inverse = inverse_from_cholesky(&mut factor, sigma);
        let residual = factor.inverse_residual().unwrap_or(f64::INFINITY);
        if !(residual < tolerance) {
            return Err(Error::ResidualTooLarge {
                residual,
                tolerance,
            });
        }
        let det_root = normalized_det_root(&factor);
        Ok(Self {
            factor,
            inverse,
            det_root,
            residual,
        })
    }

    pub fn n(&self) -> usize {
        self.inverse.n()
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }

    pub fn det_root(&self) -> f64 {
        self.det_root
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `A = ⁿ√det Σ · Σ⁻¹ − I`.
    pub fn anisotropy(&self) -> Matrix {
        let n = self.n();
        let mut a = self.inverse.clone();
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] *= self.det_root;
            }
            a[(i, i)] -= 1.0;
        }
        a
    }

    fn check_labels(&self, c: &LabelVector) -> Result<()> {
        if c.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {}x{} kernel",
                c.len(),
                self.n(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `C₁(Σ, c)`.
    pub fn c1(&self, c: &LabelVector) -> Result<f64> {
        self.check_labels(c)?;
        let signs: Vec<f64> = (0..c.len()).map(|i| c.sign(i)).collect();
        let trace = self.inverse.trace();
        let label_form = self.inverse.quadratic_form(&signs);
        Ok(self.det_root * ((0.5 - 1.0 / PI) * trace + label_form / PI))
    }

    /// Exponents `aᵢ = −½ (c⊙|uᵢ|)ᵀ A (c⊙|uᵢ|)` for `i < samples`.
    ///
    /// Sample `i` reads the normal stream at `(seed, Estimator, i)`, so the
    /// output does not depend on the thread pool.
    pub fn log_weights(&self, c: &LabelVector, samples: usize, seed: u64) -> Result<Vec<f64>> {
        self.check_labels(c)?;
        let a = self.anisotropy();
        let n = self.n();
        let signs: Vec<f64> = (0..n).map(|i| c.sign(i)).collect();
        let weights = (0..samples as u64)
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |v, i| {
                    rng::normals(seed, Domain::Estimator, i).fill(v);
                    for (x, s) in v.iter_mut().zip(&signs) {
                        *x = s * x.abs();
                    }
                    -0.5 * a.quadratic_form(v)
                },
            )
            .collect();
        Ok(weights)
    }

    pub fn estimate_c0(&self, c: &LabelVector, samples: usize, seed: u64) -> Result<InfoEstimate> {
        if samples < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 samples, got {samples}"
            )));
        }
        let n = self.n();
        let log_w = self.log_weights(c, samples, seed)?;
        let (log_mean, rel_se) = log_mean_exp(&log_w);
        let c1 = self.c1(c)?;
        Ok(InfoEstimate {
            n,
            c0_nats: n as f64 * LN_2 - log_mean,
            c0_std_error: rel_se,
            c1_nats: c1,
            info_upper_nats: info_upper_bound(n, c1)?.exact_nats,
            samples,
            seed,
            inverse_residual: self.residual,
        })
    }
}

/// `ln(M⁻¹ Σ e^{aᵢ})` by the max-shift decomposition, plus the delta-method
/// standard error of that logarithm, `s / (√M · w̄)` with `wᵢ = e^{aᵢ − a★}`.
pub fn log_mean_exp(log_w: &[f64]) -> (f64, f64) {
    let m = log_w.len() as f64;
    let a_star = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = log_w.iter().map(|a| (a - a_star).exp()).collect();
    let sum: f64 = shifted.iter().sum();
    let mean = sum / m;
    let var = shifted.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (m - 1.0);
    let log_mean = a_star + sum.ln() - m.ln();
    (log_mean, var.sqrt() / (m.sqrt() * mean))
}

/// Monte-Carlo estimate of `C₀(Σ, c)` with the default residual tolerance.
pub fn estimate_c0(
    sigma: &CovarianceMatrix,
    c: &LabelVector,
    samples: usize,
    seed: u64,
) -> Result<InfoEstimate> {
    KernelAnalysis::new(sigma)?.estimate_c0(c, samples, seed)
}

/// Closed-form `C₁(Σ, c)` with the default residual tolerance.
pub fn c1_bound(sigma: &CovarianceMatrix, c: &LabelVector) -> Result<f64> {
    KernelAnalysis::new(sigma)?.c1(c)
}

pub fn info_upper_bound(n: usize, c1: f64) -> Result<InfoUpperBound> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(c1 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C1 must be non-negative, got {c1}"
        )));
    }
    let n = n as f64;
    Ok(InfoUpperBound {
        exact_nats: n * (LN_2 - 0.5) + c1,
        display_nats: n / 5.0 + c1,
    })
}

/// Fraction of draws `z = L g` whose signs match `c` exactly.
///
/// Exponentially inefficient in `n`; meant as an independent check of the
/// estimator on small problems. Trials are split into fixed-size chunks
/// with one random stream each and hit counts are summed as integers.
pub fn orthant_oracle(
    sigma: &CovarianceMatrix,
    c: &LabelVector,
    trials: u64,
    seed: u64,
) -> Result<OracleEstimate> {
    let n = sigma.n();
    if n > ORACLE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "rejection oracle supports n <= {ORACLE_MAX_N}, got {n}"
        )));
    }
    if trials < ORACLE_MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "rejection oracle needs at least {ORACLE_MIN_TRIALS} trials, got {trials}"
        )));
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a {n}x{n} kernel",
            c.len()
        )));
    }
    let factor = cholesky(sigma)?;
    let l = factor.lower();
    let chunks = trials.div_ceil(ORACLE_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * ORACLE_CHUNK;
            let count = ORACLE_CHUNK.min(trials - start);
            let mut normals = rng::normals(seed, Domain::Oracle, chunk);
            let mut g = vec![0.0; n];
            let mut hits = 0u64;
            for _ in 0..count {
                normals.fill(&mut g);
                let inside = (0..n).all(|i| {
                    let z: f64 = (0..=i).map(|k| l[(i, k)] * g[k]).sum();
                    z * c.sign(i) > 0.0
                });
                hits += u64::from(inside);
            }
            hits
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(OracleEstimate {
        probability: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        hits,
        trials,
    })
}

/// `(DΣD, 𝟙)` with `D = diag(c)`; the orthant probability is unchanged.
pub fn sign_flip_canonicalize(
    sigma: &CovarianceMatrix,
    c: &LabelVector,
) -> Result<(CovarianceMatrix, LabelVector)> {
    let n = sigma.n();
    if c.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a {n}x{n} kernel",
            c.len()
        )));
    }
    let mut m = sigma.matrix().clone();
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= c.sign(i) * c.sign(j);
        }
    }
    Ok((CovarianceMatrix::new(m)?, LabelVector::ones(n)))
}
