//! Image-processing primitives used by the inspection tools: histograms,
//! Otsu thresholding, binary morphology, blob analysis and bar scanning.
//!
//! Every function is pure; frames are plain row-major byte buffers.

mod bars;
mod blob;
mod morph;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{CoreError, CoreResult};

pub use bars::{bar_runs, BarScan, BarScanner};
pub use blob::{circularity, circularity_from, connected_components, label_components, Blob, ComponentLabels};
pub use morph::{dilate, erode, open};

pub const FRAME_WIDTH: u32 = 640;
pub const FRAME_HEIGHT: u32 = 480;

/// 8-bit grayscale image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl core::fmt::Debug for Frame {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Frame {
    /// A frame filled with `value`.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    /// A blank camera-sized frame.
    pub fn camera() -> Self {
        Self::filled(FRAME_WIDTH, FRAME_HEIGHT, 0)
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> CoreResult<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(CoreError::invalid(
                "frame.pixels",
                alloc::format!(
                    "expected {} pixels for {width}x{height}, got {}",
                    width as usize * height as usize,
                    pixels.len()
                ),
            ));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.pixels[(y * self.width + x) as usize] = v;
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let start = (y * self.width) as usize;
        &self.pixels[start..start + self.width as usize]
    }

    pub fn full_roi(&self) -> Roi {
        Roi::new(0, 0, self.width, self.height)
    }
}

/// Binary image; each pixel is 0 (background) or 1 (foreground).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BinaryImage {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl BinaryImage {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width as usize * height as usize],
        }
    }

    /// Builds an image from booleans in row-major order.
    pub fn from_bools(width: u32, height: u32, bits: &[bool]) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize);
        Self {
            width,
            height,
            bits: bits.iter().map(|&b| u8::from(b)).collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize] != 0
    }

    /// Foreground test that treats everything outside the image as background.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < i64::from(self.width)
            && y < i64::from(self.height)
            && self.bits[(y as usize) * self.width as usize + x as usize] != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.bits[(y * self.width + x) as usize] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| 1 - b).collect(),
        }
    }

    /// Scales to a 0/255 grayscale frame.
    pub fn to_frame(&self) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| b * 255).collect(),
        }
    }
}

/// Axis-aligned region of interest in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Roi {
    pub const fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    /// Checks that the ROI is nonempty and lies inside a frame of the given size.
    pub fn check(&self, frame_width: u32, frame_height: u32) -> CoreResult<()> {
        let inside = self.width > 0
            && self.height > 0
            && u64::from(self.x) + u64::from(self.width) <= u64::from(frame_width)
            && u64::from(self.y) + u64::from(self.height) <= u64::from(frame_height);
        if inside {
            Ok(())
        } else {
            Err(CoreError::RoiOutOfBounds {
                x: self.x,
                y: self.y,
                width: self.width,
                height: self.height,
                frame_width,
                frame_height,
            })
        }
    }

    pub fn contains_row(&self, y: u32) -> bool {
        y >= self.y && y < self.y + self.height
    }
}

/// Copies a validated ROI out of a frame.
pub fn crop(frame: &Frame, roi: &Roi) -> CoreResult<Frame> {
    roi.check(frame.width, frame.height)?;
    let mut pixels = Vec::with_capacity(roi.area() as usize);
    for y in roi.y..roi.y + roi.height {
        let row = frame.row(y);
        pixels.extend_from_slice(&row[roi.x as usize..(roi.x + roi.width) as usize]);
    }
    Ok(Frame {
        width: roi.width,
        height: roi.height,
        pixels,
    })
}

/// 256-bin intensity histogram.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Histogram {
    pub bins: [u64; 256],
}

impl Default for Histogram {
    fn default() -> Self {
        Self { bins: [0; 256] }
    }
}

impl Histogram {
    pub fn from_bins(bins: [u64; 256]) -> Self {
        Self { bins }
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }

    /// Mean intensity, `None` for an empty histogram.
    pub fn mean(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| {
            let s: u64 = self.bins.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();
            s as f64 / n as f64
        })
    }

    /// Mean intensity of the pixels `<= t` and `> t`.
    pub fn class_means(&self, t: u8) -> (Option<f64>, Option<f64>) {
        let mut acc = [(0u64, 0u64); 2];
        for (v, &c) in self.bins.iter().enumerate() {
            let k = usize::from(v > usize::from(t));
            acc[k].0 += c;
            acc[k].1 += v as u64 * c;
        }
        let mean = |(n, s): (u64, u64)| (n > 0).then(|| s as f64 / n as f64);
        (mean(acc[0]), mean(acc[1]))
    }
}

pub fn histogram(frame: &Frame) -> Histogram {
    let mut h = Histogram::default();
    for &p in &frame.pixels {
        h.bins[usize::from(p)] += 1;
    }
    h
}

/// Histogram of the pixels inside a ROI.
pub fn histogram_roi(frame: &Frame, roi: &Roi) -> CoreResult<Histogram> {
    roi.check(frame.width, frame.height)?;
    let mut h = Histogram::default();
    for y in roi.y..roi.y + roi.height {
        for &p in &frame.row(y)[roi.x as usize..(roi.x + roi.width) as usize] {
            h.bins[usize::from(p)] += 1;
        }
    }
    Ok(h)
}

/// Otsu's threshold: the `t` maximising the between-class variance of the
/// split `{v <= t}` / `{v > t}`; the lowest such `t` on ties. A histogram
/// holding a single intensity returns that intensity.
pub fn otsu_threshold(hist: &Histogram) -> CoreResult<u8> {
    let n: u64 = hist.total();
    if n == 0 {
        return Err(CoreError::EmptyHistogram);
    }
    let occupied: Vec<usize> = (0..256).filter(|&v| hist.bins[v] > 0).collect();
    if occupied.len() == 1 {
        return Ok(occupied[0] as u8);
    }
    let s: u128 = hist
        .bins
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u128 * u128::from(c))
        .sum();

    // σ_B² · N² = D² / (n0·n1) with D = s0·n1 − s1·n0. Candidates are compared
    // as exact fractions; only astronomically large histograms fall back to f64.
    let mut best: Option<(u8, u128, u128)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for t in 0..255usize {
        n0 += u128::from(hist.bins[t]);
        s0 += t as u128 * u128::from(hist.bins[t]);
        let n1 = u128::from(n) - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = s - s0;
        let (a, b) = (s0 * n1, s1 * n0);
        let d = a.abs_diff(b);
        let num = d * d;
        let den = n0 * n1;
        match best {
            None => best = Some((t as u8, num, den)),
            Some((_, bn, bd)) => {
                if fraction_gt(num, den, bn, bd) {
                    best = Some((t as u8, num, den));
                }
            }
        }
    }
    // Two or more occupied bins guarantee a split with both classes nonempty.
    Ok(best.map(|(t, _, _)| t).unwrap_or(occupied[0] as u8))
}

/// `a/b > c/d` for positive denominators.
fn fraction_gt(a: u128, b: u128, c: u128, d: u128) -> bool {
    match (a.checked_mul(d), c.checked_mul(b)) {
        (Some(l), Some(r)) => l > r,
        _ => (a as f64 / b as f64) > (c as f64 / d as f64),
    }
}

/// Otsu's threshold of a whole frame.
pub fn otsu_frame(frame: &Frame) -> CoreResult<u8> {
    otsu_threshold(&histogram(frame))
}

/// Foreground is every pixel strictly brighter than `t`.
pub fn binarize(frame: &Frame, t: u8) -> BinaryImage {
    BinaryImage {
        width: frame.width,
        height: frame.height,
        bits: frame.pixels.iter().map(|&p| u8::from(p > t)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    /// Exhaustive σ_B² scan in exact rational arithmetic.
    fn otsu_oracle(bins: &[u64; 256]) -> u8 {
        let n: i128 = bins.iter().map(|&c| c as i128).sum();
        let distinct: Vec<usize> = (0..256).filter(|&v| bins[v] > 0).collect();
        if distinct.len() == 1 {
            return distinct[0] as u8;
        }
        let mut best_t = 0u8;
        let mut best = Ratio::from_integer(-1i128);
        for t in 0..=255usize {
            let n0: i128 = bins[..=t].iter().map(|&c| c as i128).sum();
            let n1 = n - n0;
            let var = if n0 == 0 || n1 == 0 {
                Ratio::from_integer(0)
            } else {
                let s0: i128 = (0..=t).map(|v| v as i128 * bins[v] as i128).sum();
                let s1: i128 = (t + 1..256).map(|v| v as i128 * bins[v] as i128).sum();
                let w0 = Ratio::new(n0, n);
                let w1 = Ratio::new(n1, n);
                let d = Ratio::new(s0, n0) - Ratio::new(s1, n1);
                w0 * w1 * d * d
            };
            if var > best {
                best = var;
                best_t = t as u8;
            }
        }
        best_t
    }

    #[test]
    fn histogram_of_blank_frame() {
        let h = histogram(&Frame::camera());
        assert_eq!(h.bins[0], 307_200);
        assert_eq!(h.total(), 307_200);
        assert!(h.bins[1..].iter().all(|&c| c == 0));
    }

    #[test]
    fn histogram_counts() {
        let f = Frame::from_pixels(2, 2, vec![10, 10, 200, 200]).unwrap();
        let h = histogram(&f);
        assert_eq!((h.bins[10], h.bins[200], h.total()), (2, 2, 4));
    }

    #[test]
    fn otsu_two_spikes_takes_lowest_tie() {
        let mut bins = [0u64; 256];
        bins[10] = 2;
        bins[200] = 2;
        let h = Histogram::from_bins(bins);
        assert_eq!(otsu_threshold(&h).unwrap(), 10);
        assert_eq!(otsu_oracle(&bins), 10);
        // σ_B² = 0.25 · 190² = 95² for every t in [10, 199].
        let (m0, m1) = h.class_means(120);
        assert_eq!(0.25 * (m1.unwrap() - m0.unwrap()).powi(2), 9025.0);
    }

    #[test]
    fn otsu_single_value() {
        let mut bins = [0u64; 256];
        bins[77] = 307_200;
        assert_eq!(otsu_threshold(&Histogram::from_bins(bins)).unwrap(), 77);
    }

    #[test]
    fn otsu_rejects_empty() {
        assert_eq!(otsu_threshold(&Histogram::default()), Err(CoreError::EmptyHistogram));
    }

    #[test]
    fn binarize_rules() {
        let f = Frame::from_pixels(2, 2, vec![10, 10, 200, 200]).unwrap();
        assert_eq!(binarize(&f, 255).count(), 0);
        assert_eq!(binarize(&f, 10).count(), 2);
        let g = Frame::from_pixels(3, 1, vec![0, 255, 0]).unwrap();
        assert_eq!(binarize(&g, 0).bits(), &[0, 1, 0]);
    }

    #[test]
    fn roi_bounds() {
        assert!(Roi::new(600, 0, 40, 480).check(640, 480).is_ok());
        assert!(Roi::new(601, 0, 40, 480).check(640, 480).is_err());
        assert!(Roi::new(0, 0, 0, 10).check(640, 480).is_err());
    }

    proptest! {
        #[test]
        fn otsu_matches_exhaustive(bins in proptest::collection::vec(prop_oneof![3 => Just(0u64), 1 => 0u64..1000], 256)) {
            let mut arr = [0u64; 256];
            arr.copy_from_slice(&bins);
            prop_assume!(arr.iter().any(|&c| c > 0));
            prop_assert_eq!(otsu_threshold(&Histogram::from_bins(arr)).unwrap(), otsu_oracle(&arr));
        }

        #[test]
        fn rethreshold_is_idempotent(px in proptest::collection::vec(any::<u8>(), 64)) {
            let f = Frame::from_pixels(8, 8, px).unwrap();
            let t = otsu_frame(&f).unwrap();
            let b = binarize(&f, t);
            let scaled = b.to_frame();
            let t2 = otsu_frame(&scaled).unwrap();
            prop_assert_eq!(binarize(&scaled, t2), b);
        }
    }
}
