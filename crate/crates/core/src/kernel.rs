//! Infinite-width NNGP covariance for relu MLPs.
//!
//! With inputs normalised to Euclidean norm `√d0`, the output covariance of
//! a depth-`L` relu network is the cosine similarity `xᵢᵀxⱼ / d0` pushed
//! through the arccosine map `h` exactly `L − 1` times.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CovarianceMatrix, Matrix};

/// Cosines this far outside `[-1, 1]` are treated as rounding error and clamped.
pub const CLAMP_BAND: f64 = 1e-9;

/// Relative tolerance on row norms of a normalised input matrix.
pub const NORM_TOLERANCE: f64 = 1e-6;

const ZERO_NORM: f64 = 1e-12;

/// Architecture of the finite network whose wide limit is modelled.
///
/// Only `depth` and `input_dim` affect the kernel. `widths` and
/// `weight_bits` are used by the symmetry-counting bound alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArchSpec {
    pub depth: usize,
    pub input_dim: usize,
    pub widths: Vec<usize>,
    pub weight_bits: u32,
}

impl ArchSpec {
    /// Kernel-only architecture: hidden widths are irrelevant at infinite width.
    pub fn for_kernel(depth: usize, input_dim: usize) -> Result<Self> {
        let arch = Self {
            depth,
            input_dim,
            widths: vec![1; depth.saturating_sub(1)],
            weight_bits: 1,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn new(
        depth: usize,
        input_dim: usize,
        widths: Vec<usize>,
        weight_bits: u32,
    ) -> Result<Self> {
        let arch = Self {
            depth,
            input_dim,
            widths,
            weight_bits,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidArgument(format!(
                "depth must be at least 2, got {}",
                self.depth
            )));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument(
                "input dimension must be positive".into(),
            ));
        }
        if self.widths.len() != self.depth - 1 {
            return Err(Error::InvalidArgument(format!(
                "depth {} needs {} hidden widths, got {}",
                self.depth,
                self.depth - 1,
                self.widths.len()
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden widths must be positive".into(),
            ));
        }
        if self.weight_bits == 0 {
            return Err(Error::InvalidArgument(
                "weight bits must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Layer dimensions `d0, d1, ..., d_{L-1}, d_L = 1`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.depth + 1);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.widths);
        dims.push(1);
        dims
    }
}

/// Inputs whose rows all have Euclidean norm `√d0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputMatrix {
    n: usize,
    d0: usize,
    data: Vec<f64>,
}

impl InputMatrix {
    /// Wraps already-normalised rows, checking the norm invariant.
    pub fn from_normalized(n: usize, d0: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {n}x{d0} inputs",
                data.len()
            )));
        }
        let m = Self { n, d0, data };
        let target = (d0 as f64).sqrt();
        for i in 0..n {
            let norm = norm(m.row(i));
            if ((norm - target) / target).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has norm {norm}, expected {target}"
                )));
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d0(&self) -> usize {
        self.d0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d0..(i + 1) * self.d0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales each row of a row-major `n × d0` array to norm `√d0`.
pub fn normalize_inputs(n: usize, d0: usize, raw: &[f64]) -> Result<InputMatrix> {
    if d0 == 0 {
        return Err(Error::InvalidArgument(
            "input dimension must be positive".into(),
        ));
    }
    if raw.len() != n * d0 {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {n}x{d0} inputs",
            raw.len()
        )));
    }
    let target = (d0 as f64).sqrt();
    let mut data = Vec::with_capacity(raw.len());
    for (i, row) in raw.chunks_exact(d0).enumerate() {
        let r = norm(row);
        if r < ZERO_NORM {
            return Err(Error::ZeroInputRow { row: i });
        }
        let scale = target / r;
        data.extend(row.iter().map(|x| x * scale));
    }
    Ok(InputMatrix { n, d0, data })
}

/// A one-layer update of an NNGP correlation.
pub trait KernelMap: Sync {
    fn name(&self) -> &'static str;

    /// Maps a correlation in `[-1, 1]` to the next layer's correlation.
    fn apply(&self, t: f64) -> f64;
}

/// The relu map `h(t) = (1/π)[√(1−t²) + t(π − arccos t)]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ArcCosine;

impl KernelMap for ArcCosine {
    fn name(&self) -> &'static str {
        "arccosine"
    }

    #[inline]
    fn apply(&self, t: f64) -> f64 {
        ((1.0 - t * t).sqrt() + t * (PI - t.acos())) / PI
    }
}

fn clamp_cosine(t: f64) -> Result<f64> {
    if !(-1.0 - CLAMP_BAND..=1.0 + CLAMP_BAND).contains(&t) {
        return Err(Error::Domain { value: t });
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// `h(t)` with the clamp band applied.
pub fn arccos_step(t: f64) -> Result<f64> {
    Ok(ArcCosine.apply(clamp_cosine(t)?))
}

/// `h` composed `depth − 1` times.
pub fn compose(map: &impl KernelMap, t: f64, depth: usize) -> Result<f64> {
    let mut t = clamp_cosine(t)?;
    for _ in 1..depth {
        t = map.apply(t);
    }
    Ok(t)
}

/// Relu NNGP kernel matrix for a depth-`L` network.
pub fn kernel_matrix(x: &InputMatrix, arch: &ArchSpec) -> Result<CovarianceMatrix> {
    if arch.depth < 2 {
        return Err(Error::InvalidArgument(format!(
            "depth must be at least 2, got {}",
            arch.depth
        )));
    }
    if arch.input_dim != x.d0() {
        return Err(Error::DimensionMismatch(format!(
            "architecture expects d0 = {}, inputs have d0 = {}",
            arch.input_dim,
            x.d0()
        )));
    }
    kernel_matrix_with(&ArcCosine, x, arch.depth)
}

/// Kernel matrix under an arbitrary layer map. Rows of the upper triangle
/// are computed in parallel; each entry is an independent pure function.
pub fn kernel_matrix_with(
    map: &impl KernelMap,
    x: &InputMatrix,
    depth: usize,
) -> Result<CovarianceMatrix> {
    let n = x.n();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "kernel matrix needs at least one input".into(),
        ));
    }
    let d0 = x.d0() as f64;
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            (i + 1..n)
                .map(|j| {
                    let dot: f64 = xi.iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
                    compose(map, dot / d0, depth)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut m = Matrix::identity(n);
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CovarianceMatrix::new(m)
}
