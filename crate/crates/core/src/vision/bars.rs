//! Bar-code style run counting along scan rows.

use alloc::vec::Vec;

use super::{histogram_roi, otsu_threshold, Frame, Roi};
use crate::{CoreError, CoreResult};

/// Outcome of a bar scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarScan {
    pub dark_runs: u32,
    /// `(μ_light − μ_dark)/255` of the Otsu classes inside the ROI.
    pub min_contrast: f64,
}

/// Otsu split of a ROI, reusable across scan rows.
#[derive(Debug, Clone)]
pub struct BarScanner<'a> {
    frame: &'a Frame,
    roi: Roi,
    /// `None` when the ROI holds a single intensity (no bars to find).
    threshold: Option<u8>,
    contrast: f64,
}

impl<'a> BarScanner<'a> {
    pub fn new(frame: &'a Frame, roi: Roi) -> CoreResult<Self> {
        let hist = histogram_roi(frame, &roi)?;
        let t = otsu_threshold(&hist)?;
        let (dark, light) = hist.class_means(t);
        let (threshold, contrast) = match (dark, light) {
            (Some(d), Some(l)) => (Some(t), (l - d) / 255.0),
            _ => (None, 0.0),
        };
        Ok(Self {
            frame,
            roi,
            threshold,
            contrast,
        })
    }

    pub fn threshold(&self) -> Option<u8> {
        self.threshold
    }

    pub fn contrast(&self) -> f64 {
        self.contrast
    }

    /// Maximal dark runs (`<= threshold`) along `row`, clipped to the ROI.
    pub fn runs(&self, row: u32) -> CoreResult<u32> {
        if !self.roi.contains_row(row) {
            return Err(CoreError::invalid("scan_row", "scan row lies outside the ROI"));
        }
        let Some(t) = self.threshold else {
            return Ok(0);
        };
        let line = &self.frame.row(row)[self.roi.x as usize..(self.roi.x + self.roi.width) as usize];
        let mut runs = 0;
        let mut in_dark = false;
        for &p in line {
            let dark = p <= t;
            if dark && !in_dark {
                runs += 1;
            }
            in_dark = dark;
        }
        Ok(runs)
    }

    pub fn runs_many(&self, rows: impl IntoIterator<Item = u32>) -> CoreResult<Vec<u32>> {
        rows.into_iter().map(|r| self.runs(r)).collect()
    }
}

/// Counts dark runs along `scan_row` after Otsu binarisation of the ROI.
pub fn bar_runs(frame: &Frame, roi: &Roi, scan_row: u32) -> CoreResult<BarScan> {
    let scanner = BarScanner::new(frame, *roi)?;
    Ok(BarScan {
        dark_runs: scanner.runs(scan_row)?,
        min_contrast: scanner.contrast(),
    })
}
