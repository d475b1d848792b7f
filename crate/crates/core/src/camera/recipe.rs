//! Inspection recipes: ordered tool invocations with acceptance criteria.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scenarios::CaseKind;
use crate::vision::{
    binarize, circularity, connected_components, crop, histogram, otsu_threshold, BarScanner, Blob, Frame, Roi,
    FRAME_HEIGHT, FRAME_WIDTH,
};
use crate::{CoreError, CoreResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "Pass",
            Outcome::Fail => "Fail",
        }
    }
}

/// How a blob tool separates foreground from background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Otsu,
    Fixed(u8),
}

/// Tool palette.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Tool {
    /// Mean intensity of the ROI.
    IntensityMean { roi: Roi },
    /// Number of blobs with at least `min_area` pixels. If the two
    /// threshold classes differ by less than `min_contrast` (fraction of
    /// full scale) the ROI is treated as empty.
    BlobCount {
        roi: Roi,
        threshold: ThresholdMode,
        min_area: u32,
        min_contrast: f64,
    },
    /// Largest circularity among blobs with at least `min_area` pixels
    /// (0 when there are none).
    MaxCircularity {
        roi: Roi,
        threshold: ThresholdMode,
        min_area: u32,
        min_contrast: f64,
    },
    /// Dark-run count on every `row_step`-th row of the ROI. The criterion
    /// must hold on every scanned row; the reported value is the count of
    /// the worst row.
    BarRuns { roi: Roi, row_step: u32 },
    /// `(μ_light − μ_dark)/255` of the Otsu classes of the ROI.
    Contrast { roi: Roi },
}

impl Tool {
    pub fn roi(&self) -> &Roi {
        match self {
            Tool::IntensityMean { roi }
            | Tool::BlobCount { roi, .. }
            | Tool::MaxCircularity { roi, .. }
            | Tool::BarRuns { roi, .. }
            | Tool::Contrast { roi } => roi,
        }
    }
}

/// Closed acceptance interval; a missing bound is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Criterion {
    pub fn between(min: f64, max: f64) -> Self {
        Self {
            min: Some(min),
            max: Some(max),
        }
    }

    pub fn at_least(min: f64) -> Self {
        Self {
            min: Some(min),
            max: None,
        }
    }

    pub fn at_most(max: f64) -> Self {
        Self {
            min: None,
            max: Some(max),
        }
    }

    pub fn holds(&self, v: f64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }

    /// Distance outside the interval (0 inside).
    fn violation(&self, v: f64) -> f64 {
        let below = self.min.map_or(0.0, |m| (m - v).max(0.0));
        let above = self.max.map_or(0.0, |m| (v - m).max(0.0));
        below + above
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub id: String,
    pub tool: Tool,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionRecipe {
    pub case_kind: CaseKind,
    pub tools: Vec<ToolSpec>,
}

impl InspectionRecipe {
    pub fn validate(&self) -> CoreResult<()> {
        if self.tools.is_empty() {
            return Err(CoreError::invalid("recipe.tools", "recipe has no tools"));
        }
        for spec in &self.tools {
            spec.tool.roi().check(FRAME_WIDTH, FRAME_HEIGHT)?;
            if let Tool::BarRuns { row_step: 0, .. } = spec.tool {
                return Err(CoreError::invalid("recipe.tools.row_step", "row_step must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub id: String,
    /// Measured value; `None` when the tool could not run.
    pub value: Option<f64>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub tool_results: Vec<ToolResult>,
}

fn foreground_blobs(
    frame: &Frame,
    roi: &Roi,
    threshold: ThresholdMode,
    min_area: u32,
    min_contrast: f64,
) -> CoreResult<Vec<Blob>> {
    let patch = crop(frame, roi)?;
    let hist = histogram(&patch);
    let t = match threshold {
        ThresholdMode::Otsu => otsu_threshold(&hist)?,
        ThresholdMode::Fixed(t) => t,
    };
    match hist.class_means(t) {
        (Some(dark), Some(light)) if (light - dark) / 255.0 >= min_contrast => {}
        _ => return Ok(Vec::new()),
    }
    let mut blobs = connected_components(&binarize(&patch, t));
    blobs.retain(|b| b.area >= min_area);
    Ok(blobs)
}

fn measure(frame: &Frame, spec: &ToolSpec) -> CoreResult<(f64, bool)> {
    let crit = &spec.criterion;
    let single = |v: f64| Ok((v, crit.holds(v)));
    match &spec.tool {
        Tool::IntensityMean { roi } => {
            let patch = crop(frame, roi)?;
            single(histogram(&patch).mean().unwrap_or(0.0))
        }
        Tool::BlobCount {
            roi,
            threshold,
            min_area,
            min_contrast,
        } => single(foreground_blobs(frame, roi, *threshold, *min_area, *min_contrast)?.len() as f64),
        Tool::MaxCircularity {
            roi,
            threshold,
            min_area,
            min_contrast,
        } => {
            let blobs = foreground_blobs(frame, roi, *threshold, *min_area, *min_contrast)?;
            single(blobs.iter().map(circularity).fold(0.0, f64::max))
        }
        Tool::BarRuns { roi, row_step } => {
            let scanner = BarScanner::new(frame, *roi)?;
            let rows = (roi.y..roi.y + roi.height).step_by((*row_step).max(1) as usize);
            let counts = scanner.runs_many(rows)?;
            // Report the worst row; on a tie the first one.
            let worst = counts
                .iter()
                .map(|&c| f64::from(c))
                .fold(None, |acc: Option<f64>, c| match acc {
                    Some(a) if crit.violation(a) >= crit.violation(c) => Some(a),
                    _ => Some(c),
                })
                .unwrap_or(0.0);
            Ok((worst, counts.iter().all(|&c| crit.holds(f64::from(c)))))
        }
        Tool::Contrast { roi } => single(BarScanner::new(frame, *roi)?.contrast()),
    }
}

/// Runs the tools in order. A tool that cannot run fails with a diagnostic;
/// the outcome is Pass only if every criterion holds.
pub fn run_recipe(frame: &Frame, recipe: &InspectionRecipe) -> Verdict {
    let tool_results: Vec<ToolResult> = recipe
        .tools
        .iter()
        .map(|spec| match measure(frame, spec) {
            Ok((value, pass)) => ToolResult {
                id: spec.id.clone(),
                value: Some(value),
                pass,
                diagnostic: None,
            },
            Err(e) => ToolResult {
                id: spec.id.clone(),
                value: None,
                pass: false,
                diagnostic: Some(format!("{e}")),
            },
        })
        .collect();
    let outcome = if !tool_results.is_empty() && tool_results.iter().all(|r| r.pass) {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Verdict {
        outcome,
        tool_results,
    }
}
