//! Temporal coding unit: maps attributes and grayscale images onto one spike
//! per input neuron, with the information carried by the spike delay.
//!
//! Delays live on a grid of `R = window / tau` slots. A strong stimulus fires
//! early (delay 0) and a weak one fires late (delay `window`). Three schemes
//! are provided:
//!
//! - numeric: one neuron per attribute, min/max normalised against a range
//!   fitted on the training split;
//! - one-to-one: one neuron per pixel, no spike for a zero pixel;
//! - conv-like: one neuron per `k x k` receptive field of a binarised image,
//!   delay = number of zero cells inside the field. Since `k * k = R`, a larger
//!   kernel trades input neurons for temporal resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_EPS: f64 = 1e-9;

/// How the image is extended when the kernel grid overruns its edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Padding {
    /// Extra rows/columns of intensity 0 on the right and bottom edges.
    #[default]
    ZeroBottomRight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingParams {
    /// Encoding window `T`, in time units.
    pub window: f64,
    /// Unit time interval `tau`, in time units.
    pub tau: f64,
    /// Receptive-field width for conv-like coding (pixels). Must satisfy
    /// `kernel * kernel == resolution()`.
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    /// Receptive-field stride for conv-like coding (pixels).
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Pixels with intensity `>= threshold` binarise to 1.
    #[serde(default = "default_threshold")]
    pub threshold: u8,
    #[serde(default)]
    pub padding: Padding,
}

fn default_kernel() -> usize {
    4
}

fn default_stride() -> usize {
    2
}

fn default_threshold() -> u8 {
    128
}

impl CodingParams {
    pub fn new(window: f64, tau: f64) -> Self {
        CodingParams {
            window,
            tau,
            kernel: default_kernel(),
            stride: default_stride(),
            threshold: default_threshold(),
            padding: Padding::default(),
        }
    }

    pub fn with_kernel(mut self, kernel: usize, stride: usize) -> Self {
        self.kernel = kernel;
        self.stride = stride;
        self
    }

    pub fn with_threshold(mut self, threshold: u8) -> Self {
        self.threshold = threshold;
        self
    }

    /// Temporal resolution `R = window / tau`, rejected unless it is a
    /// positive integer.
    pub fn resolution(&self) -> Result<usize> {
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(Error::config(format!(
                "encoding window must be positive, got {}",
                self.window
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config(format!(
                "unit time interval must be positive, got {}",
                self.tau
            )));
        }
        let r = self.window / self.tau;
        let rounded = r.round();
        if (r - rounded).abs() > GRID_EPS * r.max(1.0) || rounded < 1.0 {
            return Err(Error::config(format!(
                "window {} is not an integer multiple of tau {}",
                self.window, self.tau
            )));
        }
        Ok(rounded as usize)
    }

    /// Checks the conv-like constraints (`k^2 = R`, `k >= 1`, `S >= 1`).
    pub fn validate_conv(&self) -> Result<usize> {
        let r = self.resolution()?;
        if self.kernel == 0 {
            return Err(Error::config("conv-like kernel width must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::config("conv-like stride must be at least 1"));
        }
        if self.kernel * self.kernel != r {
            return Err(Error::config(format!(
                "conv-like coding needs kernel^2 == resolution, got kernel {} and resolution {}",
                self.kernel, r
            )));
        }
        Ok(r)
    }

    fn quantize(&self, fraction: f64, resolution: usize) -> f64 {
        let slots = (resolution as f64 * fraction).round();
        (self.tau * slots).clamp(0.0, self.window)
    }
}

/// Per-neuron spike delays of one layer for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayVector {
    pub delays: Vec<f64>,
    pub fired: Vec<bool>,
}

impl DelayVector {
    /// Every entry fires.
    pub fn from_delays(delays: Vec<f64>) -> Self {
        let fired = vec![true; delays.len()];
        DelayVector { delays, fired }
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn spike_count(&self) -> usize {
        self.fired.iter().filter(|&&f| f).count()
    }
}

/// Attribute range fitted on the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeRange {
    pub min: f64,
    pub max: f64,
}

impl AttributeRange {
    pub fn new(min: f64, max: f64) -> Self {
        AttributeRange { min, max }
    }

    /// Column-wise min/max over `records`. Returns an empty vector for no
    /// records.
    pub fn fit<'a, I>(records: I) -> Vec<AttributeRange>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut ranges: Vec<AttributeRange> = Vec::new();
        for record in records {
            if ranges.is_empty() {
                ranges = record.iter().map(|&v| AttributeRange::new(v, v)).collect();
                continue;
            }
            for (range, &v) in ranges.iter_mut().zip(record) {
                range.min = range.min.min(v);
                range.max = range.max.max(v);
            }
        }
        ranges
    }
}

/// `delay_i = tau * round(R * (1 - (v_i - min_i) / (max_i - min_i)))`,
/// clamped to `[0, window]`. Every attribute fires.
pub fn encode_numeric(values: &[f64], ranges: &[AttributeRange], p: &CodingParams) -> Result<DelayVector> {
    let resolution = p.resolution()?;
    if values.len() != ranges.len() {
        return Err(Error::shape(format!(
            "{} attributes but {} ranges",
            values.len(),
            ranges.len()
        )));
    }
    let mut delays = Vec::with_capacity(values.len());
    for (i, (&v, range)) in values.iter().zip(ranges).enumerate() {
        if !(range.max > range.min) {
            return Err(Error::config(format!(
                "attribute {i} has a degenerate range [{}, {}]",
                range.min, range.max
            )));
        }
        if !v.is_finite() {
            return Err(Error::config(format!("attribute {i} is not finite: {v}")));
        }
        let normalized = (v - range.min) / (range.max - range.min);
        delays.push(p.quantize(1.0 - normalized, resolution));
    }
    Ok(DelayVector::from_delays(delays))
}

/// One input neuron per pixel: `delay_i = tau * round(R * (1 - p_i / p_max))`.
/// A zero pixel does not fire and carries delay `window`.
pub fn encode_pixels_1to1(pixels: &[u8], side: usize, max_intensity: u8, p: &CodingParams) -> Result<DelayVector> {
    let resolution = p.resolution()?;
    check_square(pixels, side)?;
    if max_intensity == 0 {
        return Err(Error::config("maximum pixel intensity must be positive"));
    }
    let p_max = f64::from(max_intensity);
    let mut delays = Vec::with_capacity(pixels.len());
    let mut fired = Vec::with_capacity(pixels.len());
    for &px in pixels {
        if px == 0 {
            delays.push(p.window);
            fired.push(false);
        } else {
            let intensity = f64::from(px.min(max_intensity));
            delays.push(p.quantize(1.0 - intensity / p_max, resolution));
            fired.push(true);
        }
    }
    Ok(DelayVector { delays, fired })
}

/// Number of conv-like input neurons, `ceil((P - k + 1) / S)^2`.
///
/// Panics if `kernel > side` or `stride == 0`.
pub fn neuron_count(side: usize, kernel: usize, stride: usize) -> usize {
    let per_axis = positions_per_axis(side, kernel, stride);
    per_axis * per_axis
}

fn positions_per_axis(side: usize, kernel: usize, stride: usize) -> usize {
    assert!(kernel <= side, "kernel {kernel} wider than image {side}");
    assert!(stride >= 1, "stride must be at least 1");
    (side - kernel + 1).div_ceil(stride)
}

/// Conv-like coding: binarise, slide a `k x k` kernel with stride `S` over the
/// zero-padded image and emit, per position, `tau * (number of zero cells)`.
/// Every output neuron fires.
pub fn encode_conv_like(pixels: &[u8], side: usize, p: &CodingParams) -> Result<DelayVector> {
    p.validate_conv()?;
    check_square(pixels, side)?;
    let k = p.kernel;
    if k > side {
        return Err(Error::config(format!("kernel width {k} exceeds image width {side}")));
    }
    let per_axis = positions_per_axis(side, k, p.stride);
    let binary: Vec<bool> = pixels.iter().map(|&px| px >= p.threshold).collect();
    // cells past the right/bottom edge read as intensity 0
    let cell = |r: usize, c: usize| -> bool { r < side && c < side && binary[r * side + c] };

    let mut delays = Vec::with_capacity(per_axis * per_axis);
    for row in 0..per_axis {
        for col in 0..per_axis {
            let (r0, c0) = (row * p.stride, col * p.stride);
            let mut zeros = 0usize;
            for r in r0..r0 + k {
                for c in c0..c0 + k {
                    if !cell(r, c) {
                        zeros += 1;
                    }
                }
            }
            delays.push(p.tau * zeros as f64);
        }
    }
    Ok(DelayVector::from_delays(delays))
}

fn check_square(pixels: &[u8], side: usize) -> Result<()> {
    if side == 0 || pixels.len() != side * side {
        return Err(Error::shape(format!(
            "expected a {side}x{side} image, got {} pixels",
            pixels.len()
        )));
    }
    Ok(())
}

/// Counts fired delays per grid slot `0..=R`. Non-fired entries are skipped.
pub fn delay_histogram<'a, I>(vectors: I, p: &CodingParams) -> Result<Vec<usize>>
where
    I: IntoIterator<Item = &'a DelayVector>,
{
    let resolution = p.resolution()?;
    let mut bins = vec![0usize; resolution + 1];
    for v in vectors {
        for (&d, &fired) in v.delays.iter().zip(&v.fired) {
            if fired {
                let slot = (d / p.tau).round().clamp(0.0, resolution as f64) as usize;
                bins[slot] += 1;
            }
        }
    }
    Ok(bins)
}
