#![allow(dead_code)]

use std::path::PathBuf;

use nngp_info::linalg::{CovarianceMatrix, Matrix};
use nngp_info::rng::{normals, stream, uniform, Domain};
use nngp_info::{normalize_inputs, InputMatrix, LabelVector};

/// Random unit-diagonal SPD matrix: the correlation matrix of `B Bᵀ`
/// with `B` an `n × (n + extra)` standard normal matrix.
pub fn random_correlation(n: usize, extra: usize, seed: u64) -> CovarianceMatrix {
    let k = n + extra;
    let mut b = vec![0.0; n * k];
    normals(seed, Domain::Synthetic, 1_000_000).fill(&mut b);
    let mut s = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..k).map(|t| b[i * k + t] * b[j * k + t]).sum();
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let d: Vec<f64> = (0..n).map(|i| s[(i, i)].sqrt()).collect();
    let mut c = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = if i == j {
                1.0
            } else {
                s[(i, j)] / (d[i] * d[j])
            };
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    CovarianceMatrix::new(c).unwrap()
}

pub fn random_labels(n: usize, seed: u64) -> LabelVector {
    let mut rng = stream(seed, Domain::RandomLabels, 1_000_000);
    LabelVector::new(
        (0..n)
            .map(|_| if uniform(&mut rng) < 0.5 { -1 } else { 1 })
            .collect(),
    )
    .unwrap()
}

pub fn random_inputs(n: usize, d0: usize, seed: u64) -> InputMatrix {
    let mut raw = vec![0.0; n * d0];
    normals(seed, Domain::Synthetic, 2_000_000).fill(&mut raw);
    normalize_inputs(n, d0, &raw).unwrap()
}

/// Bivariate orthant probability by quadrature, independent of the closed
/// form: P[z₁ > 0, s·z₂ > 0] = ∫₀^∞ φ(x) Φ(sρx/√(1−ρ²)) dx, Simpson's rule
/// on [0, 12] with Φ from erfc.
pub fn bivariate_orthant_quadrature(rho: f64, same_sign: bool) -> f64 {
    let s = if same_sign { 1.0 } else { -1.0 };
    let k = s * rho / (1.0 - rho * rho).sqrt();
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let cdf = |x: f64| 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
    let f = |x: f64| phi(x) * cdf(k * x);
    let (a, b, m) = (0.0, 12.0, 20_000);
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let x = a + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// Closed form 1/4 + s·arcsin(ρ)/(2π).
pub fn bivariate_orthant_closed_form(rho: f64, same_sign: bool) -> f64 {
    let s = if same_sign { 1.0 } else { -1.0 };
    0.25 + s * rho.asin() / (2.0 * std::f64::consts::PI)
}

/// MNIST IDX pair: `$NNGP_MNIST_DIR`, else `<workspace>/data/mnist`.
pub fn mnist_paths() -> Option<(PathBuf, PathBuf)> {
    let dir = std::env::var_os("NNGP_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"));
    let images = dir.join("train-images-idx3-ubyte");
    let labels = dir.join("train-labels-idx1-ubyte");
    (images.is_file() && labels.is_file()).then_some((images, labels))
}
