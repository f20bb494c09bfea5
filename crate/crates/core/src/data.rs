//! MNIST IDX ingestion and the binary-labelled dataset variants.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{normalize_inputs, InputMatrix};
use crate::orthant::LabelVector;
use crate::rng::{self, Domain};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Images and digit labels as stored in an IDX pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImageSet {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

/// Pixel block of an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::TruncatedFile {
            expected: offset + 4,
            actual: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let found = read_be_u32(bytes, 0)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::InvalidArgument(format!(
            "IDX image file has {} trailing bytes",
            bytes.len() - expected
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_be_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::InvalidArgument(format!(
            "IDX label file has {} trailing bytes",
            bytes.len() - expected
        )));
    }
    let labels = bytes[8..].to_vec();
    if let Some(index) = labels.iter().position(|&l| l > 9) {
        return Err(Error::LabelOutOfRange {
            index,
            value: labels[index],
        });
    }
    Ok(labels)
}

impl RawImageSet {
    pub fn from_parts(images: IdxImages, labels: Vec<u8>) -> Result<Self> {
        if images.count != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images but {} labels",
                images.count,
                labels.len()
            )));
        }
        Ok(Self {
            count: images.count,
            rows: images.rows,
            cols: images.cols,
            pixels: images.pixels,
            labels,
        })
    }

    pub fn from_bytes(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Self> {
        Self::from_parts(
            parse_idx_images(image_bytes)?,
            parse_idx_labels(label_bytes)?,
        )
    }

    /// Reads an IDX image/label pair from explicit paths.
    pub fn from_files(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        let read = |p: &Path| {
            if !p.is_file() {
                return Err(Error::DatasetNotFound {
                    path: p.to_path_buf(),
                });
            }
            Ok(std::fs::read(p)?)
        };
        Self::from_bytes(&read(images.as_ref())?, &read(labels.as_ref())?)
    }

    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let d = self.pixels_per_image();
        &self.pixels[i * d..(i + 1) * d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetVariant {
    /// Digits 0 and 1, labelled by parity.
    BinaryDigits,
    /// All digits, even ↦ −1, odd ↦ +1.
    DecimalDigits,
    /// All digits, one fair coin per selected image.
    RandomLabels,
    /// Two Gaussian clusters with a prescribed cosine structure.
    Synthetic,
}

impl DatasetVariant {
    pub const MNIST: [DatasetVariant; 3] = [
        DatasetVariant::BinaryDigits,
        DatasetVariant::DecimalDigits,
        DatasetVariant::RandomLabels,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetVariant::BinaryDigits => "binary_digits",
            DatasetVariant::DecimalDigits => "decimal_digits",
            DatasetVariant::RandomLabels => "random_labels",
            DatasetVariant::Synthetic => "synthetic",
        }
    }

    fn admits(self, digit: u8) -> bool {
        match self {
            DatasetVariant::BinaryDigits => digit <= 1,
            _ => true,
        }
    }
}

impl fmt::Display for DatasetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary_digits" => Ok(DatasetVariant::BinaryDigits),
            "decimal_digits" => Ok(DatasetVariant::DecimalDigits),
            "random_labels" => Ok(DatasetVariant::RandomLabels),
            "synthetic" => Ok(DatasetVariant::Synthetic),
            other => Err(Error::InvalidArgument(format!(
                "unknown dataset variant {other:?}"
            ))),
        }
    }
}

/// Normalised inputs with ±1 labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub inputs: InputMatrix,
    pub labels: LabelVector,
    pub variant: DatasetVariant,
    pub n: usize,
    pub seed: u64,
    pub source_digits: BTreeSet<u8>,
    /// Pool indices of the selected images, in selection order. Empty for
    /// synthetic data.
    pub source_indices: Vec<usize>,
    /// Pixel-identical images passed over while sampling.
    pub duplicates_skipped: usize,
}

fn parity_label(digit: u8) -> i8 {
    if digit.is_multiple_of(2) {
        -1
    } else {
        1
    }
}

/// Draws `n` images uniformly without replacement from the variant's pool
/// and assigns binary labels.
pub fn build_dataset(
    raw: &RawImageSet,
    variant: DatasetVariant,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    Ok(build_dataset_split(raw, variant, n, 0, seed)?.0)
}

/// As [`build_dataset`], also returning `n_test` held-out examples drawn
/// from the same shuffle and disjoint from the training sample.
pub fn build_dataset_split(
    raw: &RawImageSet,
    variant: DatasetVariant,
    n: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if variant == DatasetVariant::Synthetic {
        return Err(Error::InvalidArgument(
            "synthetic data is built by synthetic_dataset".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut pool: Vec<usize> = (0..raw.count)
        .filter(|&i| variant.admits(raw.labels[i]))
        .collect();
    let available = pool.len();
    let total = n + n_test;
    if total > available {
        return Err(Error::InsufficientData {
            requested: total,
            available,
        });
    }
    pool.shuffle(&mut rng::stream(seed, Domain::Subsample, 0));

    // Walk the shuffled pool, passing over pixel-identical repeats: two
    // equal inputs make the kernel matrix singular.
    let mut seen: HashSet<&[u8]> = HashSet::with_capacity(total);
    let mut chosen = Vec::with_capacity(total);
    let mut skipped = 0;
    for &idx in &pool {
        if chosen.len() == total {
            break;
        }
        if seen.insert(raw.image(idx)) {
            chosen.push(idx);
        } else {
            skipped += 1;
        }
    }
    if chosen.len() < total {
        return Err(Error::InsufficientData {
            requested: total,
            available: chosen.len(),
        });
    }
    let (train_idx, test_idx) = chosen.split_at(n);
    let mut coins = rng::stream(seed, Domain::RandomLabels, 0);
    let mut assemble = |indices: &[usize], skipped: usize| -> Result<Dataset> {
        let d0 = raw.pixels_per_image();
        let mut data = Vec::with_capacity(indices.len() * d0);
        let mut labels = Vec::with_capacity(indices.len());
        let mut digits = BTreeSet::new();
        for &idx in indices {
            data.extend(raw.image(idx).iter().map(|&p| f64::from(p)));
            let digit = raw.labels[idx];
            digits.insert(digit);
            labels.push(match variant {
                DatasetVariant::RandomLabels => {
                    if rng::uniform(&mut coins) < 0.5 {
                        -1
                    } else {
                        1
                    }
                }
                _ => parity_label(digit),
            });
        }
        Ok(Dataset {
            inputs: normalize_inputs(indices.len(), d0, &data)?,
            labels: LabelVector::new(labels)?,
            variant,
            n: indices.len(),
            seed,
            source_digits: digits,
            source_indices: indices.to_vec(),
            duplicates_skipped: skipped,
        })
    };
    let train = assemble(train_idx, skipped)?;
    let test = if n_test > 0 {
        assemble(test_idx, 0)?
    } else {
        Dataset {
            inputs: InputMatrix::from_normalized(0, raw.pixels_per_image(), Vec::new())?,
            labels: LabelVector::new(Vec::new())?,
            variant,
            n: 0,
            seed,
            source_digits: BTreeSet::new(),
            source_indices: Vec::new(),
            duplicates_skipped: 0,
        }
    };
    Ok((train, test))
}

/// Two clusters of normalised inputs in `ℝ^{d0}`.
///
/// Point `i` has label `cᵢ = +1` for even `i` and `−1` for odd `i`, and raw
/// direction `cᵢ √ρ μ + √(1 − ρ) gᵢ / √d0` with `μ` a random unit vector and
/// `gᵢ` standard normal. Within-class cosines concentrate near `ρ`,
/// between-class cosines near `−ρ`. Negative `ρ` is rejected: more than two
/// points cannot all be pairwise anti-correlated.
pub fn synthetic_dataset(n: usize, d0: usize, intra_class_cos: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if d0 < 2 {
        return Err(Error::InvalidArgument(format!(
            "d0 must be at least 2, got {d0}"
        )));
    }
    if !(0.0..=1.0).contains(&intra_class_cos) {
        return Err(Error::InvalidArgument(format!(
            "intra-class cosine must lie in [0, 1], got {intra_class_cos}"
        )));
    }
    let mut mu = vec![0.0; d0];
    rng::normals(seed, Domain::Synthetic, 0).fill(&mut mu);
    let mu_norm = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
    mu.iter_mut().for_each(|x| *x /= mu_norm);

    let signal = intra_class_cos.sqrt();
    let noise = (1.0 - intra_class_cos).sqrt() / (d0 as f64).sqrt();
    let mut data = Vec::with_capacity(n * d0);
    let mut labels = Vec::with_capacity(n);
    let mut g = vec![0.0; d0];
    for i in 0..n {
        let c: i8 = if i % 2 == 0 { 1 } else { -1 };
        rng::normals(seed, Domain::Synthetic, i as u64 + 1).fill(&mut g);
        data.extend(
            mu.iter()
                .zip(&g)
                .map(|(m, z)| f64::from(c) * signal * m + noise * z),
        );
        labels.push(c);
    }
    Ok(Dataset {
        inputs: normalize_inputs(n, d0, &data)?,
        labels: LabelVector::new(labels)?,
        variant: DatasetVariant::Synthetic,
        n,
        seed,
        source_digits: BTreeSet::new(),
        source_indices: Vec::new(),
        duplicates_skipped: 0,
    })
}
