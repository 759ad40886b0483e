//! Dataset ingestion (Iris-style CSV, MNIST IDX), deterministic splits, and
//! encoding into delay vectors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coding::{
    encode_conv_like, encode_numeric, encode_pixels_1to1, neuron_count, AttributeRange, CodingParams, DelayVector,
};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Where a dataset came from: file path plus SHA-256 of its raw bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDigest {
    pub path: String,
    pub sha256: String,
}

impl SourceDigest {
    fn of(path: &Path, bytes: &[u8]) -> Self {
        SourceDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }
}

/// Attribute records with string labels mapped to class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericDataset {
    pub attributes: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub sources: Vec<SourceDigest>,
}

/// Grayscale images stored back to back, `rows * cols` bytes each.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
    pub sources: Vec<SourceDigest>,
}

impl ImageDataset {
    pub fn image(&self, index: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[index * size..(index + 1) * size]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawDataset {
    Numeric(NumericDataset),
    Images(ImageDataset),
}

impl RawDataset {
    pub fn len(&self) -> usize {
        match self {
            RawDataset::Numeric(d) => d.labels.len(),
            RawDataset::Images(d) => d.labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, index: usize) -> usize {
        match self {
            RawDataset::Numeric(d) => d.labels[index],
            RawDataset::Images(d) => usize::from(d.labels[index]),
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        match self {
            RawDataset::Numeric(d) => d.class_names.clone(),
            RawDataset::Images(_) => (0..10).map(|d| d.to_string()).collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            RawDataset::Numeric(d) => d.class_names.len(),
            RawDataset::Images(_) => 10,
        }
    }

    pub fn sources(&self) -> &[SourceDigest] {
        match self {
            RawDataset::Numeric(d) => &d.sources,
            RawDataset::Images(d) => &d.sources,
        }
    }

    /// Records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> RawDataset {
        match self {
            RawDataset::Numeric(d) => RawDataset::Numeric(NumericDataset {
                attributes: indices.iter().map(|&i| d.attributes[i].clone()).collect(),
                labels: indices.iter().map(|&i| d.labels[i]).collect(),
                class_names: d.class_names.clone(),
                sources: d.sources.clone(),
            }),
            RawDataset::Images(d) => {
                let mut pixels = Vec::with_capacity(indices.len() * d.rows * d.cols);
                for &i in indices {
                    pixels.extend_from_slice(d.image(i));
                }
                RawDataset::Images(ImageDataset {
                    rows: d.rows,
                    cols: d.cols,
                    pixels,
                    labels: indices.iter().map(|&i| d.labels[i]).collect(),
                    sources: d.sources.clone(),
                })
            }
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads a comma-separated file whose last column is a class label and whose
/// other columns are numeric. A header row is detected when its first field
/// does not parse as a number. Class indices follow the sorted label names.
pub fn load_numeric_csv(path: impl AsRef<Path>) -> Result<NumericDataset> {
    let path = path.as_ref();
    parse_numeric_csv(path, &read_file(path)?)
}

/// [`load_numeric_csv`] on in-memory bytes; `path` only labels errors and
/// provenance.
pub fn parse_numeric_csv(path: &Path, bytes: &[u8]) -> Result<NumericDataset> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);

    let mut rows: Vec<(Vec<f64>, String)> = Vec::new();
    let mut width: Option<usize> = None;
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(n as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if n == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue; // header
        }
        if record.len() < 2 {
            return Err(parse_err(
                line,
                format!("expected attributes and a label, got {} field(s)", record.len()),
            ));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(line, format!("expected {w} fields, got {}", record.len())));
            }
            _ => {}
        }
        let last = record.len() - 1;
        let mut attrs = Vec::with_capacity(last);
        for (col, field) in record.iter().take(last).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("column {} is not numeric: {field:?}", col + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column {} is not finite: {field:?}", col + 1)));
            }
            attrs.push(v);
        }
        rows.push((attrs, record[last].to_string()));
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no data rows".to_string()));
    }

    let mut class_names: Vec<String> = rows.iter().map(|(_, l)| l.clone()).collect();
    class_names.sort();
    class_names.dedup();
    let index: BTreeMap<&str, usize> = class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let labels = rows.iter().map(|(_, l)| index[l.as_str()]).collect();
    let attributes = rows.into_iter().map(|(a, _)| a).collect();
    Ok(NumericDataset {
        attributes,
        labels,
        class_names,
        sources: vec![SourceDigest::of(path, bytes)],
    })
}

/// Iris: four numeric attributes and a species label per row.
pub fn load_iris(path: impl AsRef<Path>) -> Result<RawDataset> {
    let path = path.as_ref();
    parse_iris(path, &read_file(path)?)
}

/// [`load_iris`] on in-memory bytes.
pub fn parse_iris(path: &Path, bytes: &[u8]) -> Result<RawDataset> {
    let data = parse_numeric_csv(path, bytes)?;
    let width = data.attributes[0].len();
    if width != 4 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected 4 numeric attributes, got {width}"),
        });
    }
    let mut per_class = vec![0usize; data.class_names.len()];
    for &l in &data.labels {
        per_class[l] += 1;
    }
    if data.class_names.len() != 3 || per_class.iter().any(|&c| c != 50) {
        log::warn!(
            "{}: expected 3 classes of 50 samples, found {:?} with counts {:?}",
            path.display(),
            data.class_names,
            per_class
        );
    }
    Ok(RawDataset::Numeric(data))
}

fn maybe_gunzip(path: &Path, bytes: Vec<u8>) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    let b = bytes.get(offset..offset + 4)?;
    Some(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Parses an IDX image file (magic `0x00000803`): returns `(rows, cols, pixels)`.
pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0).ok_or_else(|| format_err(path, "file too short for an IDX header"))?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(format_err(
            path,
            format!("bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x} for images"),
        ));
    }
    let header = |i: usize| be_u32(bytes, 4 + 4 * i).ok_or_else(|| format_err(path, "truncated IDX header"));
    let (count, rows, cols) = (header(0)? as usize, header(1)? as usize, header(2)? as usize);
    let payload = &bytes[16..];
    let expected = count * rows * cols;
    if payload.len() < expected {
        return Err(format_err(
            path,
            format!(
                "truncated payload: {count} images of {rows}x{cols} need {expected} bytes, found {}",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(format_err(
            path,
            format!("{} trailing bytes after payload", payload.len() - expected),
        ));
    }
    Ok((count, rows, cols, payload.to_vec()))
}

/// Parses an IDX label file (magic `0x00000801`).
pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0).ok_or_else(|| format_err(path, "file too short for an IDX header"))?;
    if magic != IDX_LABELS_MAGIC {
        return Err(format_err(
            path,
            format!("bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x} for labels"),
        ));
    }
    let count = be_u32(bytes, 4).ok_or_else(|| format_err(path, "truncated IDX header"))? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(format_err(
            path,
            format!("truncated payload: {count} labels, found {} bytes", payload.len()),
        ));
    }
    if payload.len() > count {
        return Err(format_err(
            path,
            format!("{} trailing bytes after payload", payload.len() - count),
        ));
    }
    if let Some(bad) = payload.iter().find(|&&l| l > 9) {
        return Err(format_err(path, format!("label {bad} is not a digit")));
    }
    Ok(payload.to_vec())
}

/// Serialises images in IDX format (uncompressed).
pub fn write_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let count = pixels.len().checked_div(rows * cols).unwrap_or(0);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

/// Serialises labels in IDX format (uncompressed).
pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Loads an MNIST image/label file pair, either raw or gzip-compressed.
pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<RawDataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let image_bytes = read_file(images_path)?;
    let label_bytes = read_file(labels_path)?;
    let sources = vec![
        SourceDigest::of(images_path, &image_bytes),
        SourceDigest::of(labels_path, &label_bytes),
    ];
    let (count, rows, cols, pixels) = parse_idx_images(images_path, &maybe_gunzip(images_path, image_bytes)?)?;
    let labels = parse_idx_labels(labels_path, &maybe_gunzip(labels_path, label_bytes)?)?;
    if labels.len() != count {
        return Err(format_err(
            labels_path,
            format!(
                "{} labels for {count} images in {}",
                labels.len(),
                images_path.display()
            ),
        ));
    }
    Ok(RawDataset::Images(ImageDataset {
        rows,
        cols,
        pixels,
        labels,
        sources,
    }))
}

/// Seeded, disjoint train/test split.
///
/// When both counts divide evenly by the number of classes and every class
/// holds enough records, each class contributes the same number of records to
/// each side; otherwise records are drawn from a plain seeded shuffle.
pub fn split(data: &RawDataset, train_count: usize, test_count: usize, seed: u64) -> Result<(RawDataset, RawDataset)> {
    let total = train_count + test_count;
    if total > data.len() {
        return Err(Error::config(format!(
            "split of {train_count} + {test_count} exceeds the {} available records",
            data.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = data.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for i in 0..data.len() {
        by_class[data.label(i)].push(i);
    }
    let stratify = classes > 0
        && train_count.is_multiple_of(classes)
        && test_count.is_multiple_of(classes)
        && by_class.iter().all(|c| c.len() >= total / classes);

    let (mut train, mut test) = (Vec::with_capacity(train_count), Vec::with_capacity(test_count));
    if stratify {
        let (per_train, per_test) = (train_count / classes, test_count / classes);
        for members in by_class.iter_mut() {
            members.shuffle(&mut rng);
            train.extend_from_slice(&members[..per_train]);
            test.extend_from_slice(&members[per_train..per_train + per_test]);
        }
        train.shuffle(&mut rng);
        test.shuffle(&mut rng);
    } else {
        let mut all: Vec<usize> = (0..data.len()).collect();
        all.shuffle(&mut rng);
        train.extend_from_slice(&all[..train_count]);
        test.extend_from_slice(&all[train_count..total]);
    }
    Ok((data.select(&train), data.select(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodingScheme {
    Numeric,
    OneToOne,
    ConvLike,
}

/// Everything needed to encode new records exactly as the training data was
/// encoded. Stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum CodingSnapshot {
    Numeric {
        params: CodingParams,
        ranges: Vec<AttributeRange>,
    },
    OneToOne {
        params: CodingParams,
        side: usize,
        max_intensity: u8,
    },
    ConvLike {
        params: CodingParams,
        side: usize,
    },
}

impl CodingSnapshot {
    /// Fixes the coding against a training split: attribute ranges for
    /// numeric data, image geometry for pixel data.
    pub fn fit(scheme: CodingScheme, params: CodingParams, train: &RawDataset) -> Result<Self> {
        params.resolution()?;
        match (scheme, train) {
            (CodingScheme::Numeric, RawDataset::Numeric(d)) => {
                let ranges = AttributeRange::fit(d.attributes.iter().map(Vec::as_slice));
                if ranges.is_empty() {
                    return Err(Error::config("cannot fit attribute ranges on an empty split"));
                }
                if let Some(i) = ranges.iter().position(|r| !(r.max > r.min)) {
                    return Err(Error::config(format!(
                        "attribute {i} is constant on the training split"
                    )));
                }
                Ok(CodingSnapshot::Numeric { params, ranges })
            }
            (CodingScheme::OneToOne, RawDataset::Images(d)) => {
                square_side(d)?;
                Ok(CodingSnapshot::OneToOne {
                    params,
                    side: d.rows,
                    max_intensity: 255,
                })
            }
            (CodingScheme::ConvLike, RawDataset::Images(d)) => {
                let side = square_side(d)?;
                params.validate_conv()?;
                if params.kernel > side {
                    return Err(Error::config(format!(
                        "kernel width {} exceeds image width {side}",
                        params.kernel
                    )));
                }
                Ok(CodingSnapshot::ConvLike { params, side })
            }
            (scheme, _) => Err(Error::config(format!(
                "{scheme:?} coding does not apply to this kind of dataset"
            ))),
        }
    }

    pub fn params(&self) -> &CodingParams {
        match self {
            CodingSnapshot::Numeric { params, .. }
            | CodingSnapshot::OneToOne { params, .. }
            | CodingSnapshot::ConvLike { params, .. } => params,
        }
    }

    pub fn scheme(&self) -> CodingScheme {
        match self {
            CodingSnapshot::Numeric { .. } => CodingScheme::Numeric,
            CodingSnapshot::OneToOne { .. } => CodingScheme::OneToOne,
            CodingSnapshot::ConvLike { .. } => CodingScheme::ConvLike,
        }
    }

    /// Length of the delay vectors this coding produces.
    pub fn input_size(&self) -> usize {
        match self {
            CodingSnapshot::Numeric { ranges, .. } => ranges.len(),
            CodingSnapshot::OneToOne { side, .. } => side * side,
            CodingSnapshot::ConvLike { params, side } => neuron_count(*side, params.kernel, params.stride),
        }
    }
}

fn square_side(d: &ImageDataset) -> Result<usize> {
    if d.rows != d.cols || d.rows == 0 {
        return Err(Error::config(format!(
            "expected square images, got {}x{}",
            d.rows, d.cols
        )));
    }
    Ok(d.rows)
}

/// One encoded record.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub input: DelayVector,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub samples: Vec<EncodedSample>,
    pub class_names: Vec<String>,
    pub coding: CodingSnapshot,
    pub sources: Vec<SourceDigest>,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Encodes every record of `data` with `coding`.
pub fn encode_dataset(data: &RawDataset, coding: &CodingSnapshot) -> Result<EncodedDataset> {
    let samples = match (coding, data) {
        (CodingSnapshot::Numeric { params, ranges }, RawDataset::Numeric(d)) => d
            .attributes
            .iter()
            .zip(&d.labels)
            .map(|(a, &label)| {
                Ok(EncodedSample {
                    input: encode_numeric(a, ranges, params)?,
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        (
            CodingSnapshot::OneToOne {
                params,
                side,
                max_intensity,
            },
            RawDataset::Images(d),
        ) => {
            check_geometry(d, *side)?;
            (0..d.labels.len())
                .map(|i| {
                    Ok(EncodedSample {
                        input: encode_pixels_1to1(d.image(i), *side, *max_intensity, params)?,
                        label: usize::from(d.labels[i]),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        (CodingSnapshot::ConvLike { params, side }, RawDataset::Images(d)) => {
            check_geometry(d, *side)?;
            (0..d.labels.len())
                .map(|i| {
                    Ok(EncodedSample {
                        input: encode_conv_like(d.image(i), *side, params)?,
                        label: usize::from(d.labels[i]),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        (coding, _) => {
            return Err(Error::shape(format!(
                "{:?} coding does not apply to this kind of dataset",
                coding.scheme()
            )))
        }
    };
    Ok(EncodedDataset {
        samples,
        class_names: data.class_names(),
        coding: coding.clone(),
        sources: data.sources().to_vec(),
    })
}

fn check_geometry(d: &ImageDataset, side: usize) -> Result<()> {
    if d.rows != side || d.cols != side {
        return Err(Error::shape(format!(
            "coding expects {side}x{side} images, dataset has {}x{}",
            d.rows, d.cols
        )));
    }
    Ok(())
}
