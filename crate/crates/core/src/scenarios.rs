//! Case-study generators: object streams with ground truth, defect models
//! and the matching shipped inspection recipes.
//!
//! * A: bar codes screen-printed on containers (bar count and print contrast)
//! * B: presence of a resistor on a PCB
//! * C: two hex-head screws, one possibly replaced by a round head

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::camera::{render, Criterion, InspectionRecipe, ThresholdMode, Tool, ToolSpec};
use crate::plant::ObjectInstance;
use crate::rng::SimRng;
use crate::{CoreError, CoreResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseKind {
    A,
    B,
    C,
}

impl CaseKind {
    pub const ALL: [CaseKind; 3] = [CaseKind::A, CaseKind::B, CaseKind::C];

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseKind::A => "A",
            CaseKind::B => "B",
            CaseKind::C => "C",
        }
    }
}

impl core::str::FromStr for CaseKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(CaseKind::A),
            "B" | "b" => Ok(CaseKind::B),
            "C" | "c" => Ok(CaseKind::C),
            other => Err(CoreError::invalid(
                "case_kind",
                alloc::format!("unknown case `{other}` (expected A, B or C)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Truth {
    Good,
    Defective,
}

/// How a defect alters a bar code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BarDefect {
    /// Ink fills the gap after bar `gap` over a horizontal band.
    Merge { gap: u8, band_top: u16, band_height: u16 },
    /// Bar `bar` is missing over a horizontal band.
    Void { bar: u8, band_top: u16, band_height: u16 },
    /// All bars printed lighter; `fade` is the lost fraction of ink density.
    Fade { fade: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarcodeLook {
    pub defect: Option<BarDefect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcbLook {
    pub resistor_present: bool,
    /// Solder left bridging the empty pads, 0 (clean) to 1 (resistor-sized).
    pub residue: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScrewHead {
    /// 0 is a sharp hexagon, 1 a disc; in between the corners are rounded.
    pub roundness: f64,
    /// Rotation of the hexagon in radians.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrewLook {
    pub heads: [ScrewHead; 2],
}

/// Render parameters of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Appearance {
    Barcode(BarcodeLook),
    Pcb(PcbLook),
    Screws(ScrewLook),
}

impl Appearance {
    /// Nominal defect-free appearance.
    pub fn good(case: CaseKind) -> Self {
        match case {
            CaseKind::A => Appearance::Barcode(BarcodeLook { defect: None }),
            CaseKind::B => Appearance::Pcb(PcbLook {
                resistor_present: true,
                residue: 0.0,
            }),
            CaseKind::C => Appearance::Screws(ScrewLook {
                heads: [ScrewHead {
                    roundness: 0.0,
                    angle: 0.0,
                }; 2],
            }),
        }
    }

    pub fn case_kind(&self) -> CaseKind {
        match self {
            Appearance::Barcode(_) => CaseKind::A,
            Appearance::Pcb(_) => CaseKind::B,
            Appearance::Screws(_) => CaseKind::C,
        }
    }
}

/// Severity distribution and per-case shape constants of the defect model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefectModel {
    /// Severities are drawn uniformly from `(severity_min, severity_max]`.
    pub severity_min: f64,
    pub severity_max: f64,
    /// Case B: severity below which solder residue remains on the pads.
    pub residue_span: f64,
    /// Case C: severity at which a replaced head becomes a full disc.
    pub roundness_span: f64,
}

impl DefectModel {
    pub fn for_case(case: CaseKind) -> Self {
        let base = DefectModel {
            severity_min: 0.0,
            severity_max: 1.0,
            residue_span: 0.05,
            roundness_span: 0.31,
        };
        match case {
            // Print defects are gross; no near-good misprints.
            CaseKind::A => DefectModel {
                severity_min: 0.2,
                ..base
            },
            CaseKind::B | CaseKind::C => base,
        }
    }

    fn validate(&self) -> CoreResult<()> {
        let ok = (0.0..=1.0).contains(&self.severity_min)
            && (0.0..=1.0).contains(&self.severity_max)
            && self.severity_min < self.severity_max;
        if !ok {
            return Err(CoreError::invalid(
                "scenario.defect_model",
                "require 0 <= severity_min < severity_max <= 1",
            ));
        }
        if !(self.residue_span > 0.0 && self.roundness_span > 0.0) {
            return Err(CoreError::invalid(
                "scenario.defect_model",
                "residue_span and roundness_span must be positive",
            ));
        }
        Ok(())
    }
}

impl Default for DefectModel {
    fn default() -> Self {
        Self::for_case(CaseKind::A)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub case_kind: CaseKind,
    #[serde(default = "default_defect_fraction")]
    pub defect_fraction: f64,
    /// Leading-edge spacing between consecutive objects, cm.
    #[serde(default = "default_pitch")]
    pub pitch: f64,
    #[serde(default = "default_object_length")]
    pub object_length: f64,
    /// Defaults to the shipped model for `case_kind`.
    #[serde(default)]
    pub defect_model: Option<DefectModel>,
    #[serde(default)]
    pub seed: u64,
    /// Exactly `round(10·defect_fraction)` defectives in every block of ten.
    #[serde(default)]
    pub stratified: bool,
}

fn default_defect_fraction() -> f64 {
    0.5
}
fn default_pitch() -> f64 {
    10.31
}
fn default_object_length() -> f64 {
    6.0
}

impl ScenarioConfig {
    pub fn new(case_kind: CaseKind) -> Self {
        Self {
            case_kind,
            defect_fraction: default_defect_fraction(),
            pitch: default_pitch(),
            object_length: default_object_length(),
            defect_model: None,
            seed: 0,
            stratified: false,
        }
    }

    pub fn defect_model(&self) -> DefectModel {
        self.defect_model
            .unwrap_or_else(|| DefectModel::for_case(self.case_kind))
    }

    pub fn validate(&self) -> CoreResult<()> {
        if !(0.0..=1.0).contains(&self.defect_fraction) {
            return Err(CoreError::range(
                "scenario.defect_fraction",
                self.defect_fraction,
                0.0,
                1.0,
            ));
        }
        if !(self.object_length > 0.0 && self.object_length.is_finite()) {
            return Err(CoreError::range(
                "scenario.object_length",
                self.object_length,
                0.0,
                f64::MAX,
            ));
        }
        if !(self.pitch > self.object_length && self.pitch.is_finite()) {
            return Err(CoreError::invalid(
                "scenario.pitch",
                "pitch must exceed object_length",
            ));
        }
        self.defect_model().validate()
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::new(CaseKind::A)
    }
}

/// Lazily generated object stream. Truth labels and appearances come from a
/// single seeded random stream, so the n-th object is reproducible.
#[derive(Debug, Clone)]
pub struct ObjectStream {
    cfg: ScenarioConfig,
    rng: SimRng,
    next_id: u64,
    block: Vec<Truth>,
}

impl ObjectStream {
    pub fn new(cfg: ScenarioConfig) -> Self {
        Self {
            rng: SimRng::new(cfg.seed),
            cfg,
            next_id: 0,
            block: Vec::new(),
        }
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    fn next_truth(&mut self) -> Truth {
        if !self.cfg.stratified {
            return if self.rng.bernoulli(self.cfg.defect_fraction) {
                Truth::Defective
            } else {
                Truth::Good
            };
        }
        if self.block.is_empty() {
            let defective = libm::round(10.0 * self.cfg.defect_fraction) as usize;
            self.block = (0..10)
                .map(|i| if i < defective { Truth::Defective } else { Truth::Good })
                .collect();
            // Fisher-Yates; popped from the back below.
            for i in (1..self.block.len()).rev() {
                let j = self.rng.below(i as u64 + 1) as usize;
                self.block.swap(i, j);
            }
        }
        self.block.pop().unwrap_or(Truth::Good)
    }

    /// Next object with its leading edge at `x`.
    pub fn next_at(&mut self, x: f64) -> ObjectInstance {
        let truth = self.next_truth();
        let case = self.cfg.case_kind;
        let mut appearance = Appearance::good(case);
        if let Appearance::Screws(look) = &mut appearance {
            for head in &mut look.heads {
                head.angle = self.rng.uniform(0.0, core::f64::consts::FRAC_PI_3);
            }
        }
        if truth == Truth::Defective {
            let model = self.cfg.defect_model();
            let severity =
                model.severity_max - (model.severity_max - model.severity_min) * self.rng.unit();
            appearance = defect_inject_with(case, severity, &appearance, &model, &mut self.rng)
                .expect("appearance matches the configured case");
        }
        let obj = ObjectInstance {
            id: self.next_id,
            case_kind: case,
            truth,
            x,
            length: self.cfg.object_length,
            appearance,
        };
        self.next_id += 1;
        obj
    }
}

/// `count` objects at uniform pitch, the first with its leading edge at 0
/// and the rest queued upstream.
pub fn spawn_stream(cfg: &ScenarioConfig, count: usize) -> Vec<ObjectInstance> {
    let mut stream = ObjectStream::new(*cfg);
    (0..count)
        .map(|i| stream.next_at(-(i as f64) * cfg.pitch))
        .collect()
}

/// Applies a defect of the given severity to `base` using the shipped
/// defect model of the case.
pub fn defect_inject(
    case_kind: CaseKind,
    severity: f64,
    base: &Appearance,
    rng: &mut SimRng,
) -> CoreResult<Appearance> {
    defect_inject_with(case_kind, severity, base, &DefectModel::for_case(case_kind), rng)
}

pub fn defect_inject_with(
    case_kind: CaseKind,
    severity: f64,
    base: &Appearance,
    model: &DefectModel,
    rng: &mut SimRng,
) -> CoreResult<Appearance> {
    if !(severity > 0.0 && severity <= 1.0) {
        return Err(CoreError::range("severity", severity, 0.0, 1.0));
    }
    if base.case_kind() != case_kind {
        return Err(CoreError::invalid(
            "case_kind",
            alloc::format!(
                "appearance belongs to case {} but case {} was requested",
                base.case_kind().as_str(),
                case_kind.as_str()
            ),
        ));
    }
    Ok(match base {
        Appearance::Barcode(_) => {
            let bar_height = render::BAR_HEIGHT;
            let band_height = (libm::round(severity * f64::from(bar_height)) as u16).max(1);
            let band_top = rng.below(u64::from(bar_height - band_height) + 1) as u16;
            let defect = match rng.below(3) {
                0 => BarDefect::Merge {
                    gap: rng.below(render::BAR_WIDTHS.len() as u64 - 1) as u8,
                    band_top,
                    band_height,
                },
                1 => BarDefect::Void {
                    bar: rng.below(render::BAR_WIDTHS.len() as u64) as u8,
                    band_top,
                    band_height,
                },
                _ => BarDefect::Fade { fade: severity },
            };
            Appearance::Barcode(BarcodeLook {
                defect: Some(defect),
            })
        }
        // Binary defect; severity only governs how much solder is left behind.
        Appearance::Pcb(_) => Appearance::Pcb(PcbLook {
            resistor_present: false,
            residue: (1.0 - severity / model.residue_span).clamp(0.0, 1.0),
        }),
        Appearance::Screws(look) => {
            let mut look = look.clone();
            let which = rng.below(2) as usize;
            look.heads[which].roundness = (severity / model.roundness_span).min(1.0);
            Appearance::Screws(look)
        }
    })
}

/// The shipped, calibrated recipe for a case.
pub fn recipe_for(case_kind: CaseKind) -> InspectionRecipe {
    use alloc::string::ToString;
    let tools = match case_kind {
        CaseKind::A => alloc::vec![
            ToolSpec {
                id: "bar_count".to_string(),
                tool: Tool::BarRuns {
                    roi: render::BARCODE_ROI,
                    row_step: 1,
                },
                criterion: Criterion::between(12.0, 12.0),
            },
            ToolSpec {
                id: "print_contrast".to_string(),
                tool: Tool::Contrast {
                    roi: render::BARCODE_ROI,
                },
                criterion: Criterion::at_least(0.6),
            },
        ],
        CaseKind::B => alloc::vec![ToolSpec {
            id: "resistor_present".to_string(),
            tool: Tool::BlobCount {
                roi: render::RESISTOR_SITE_ROI,
                threshold: ThresholdMode::Otsu,
                min_area: 800,
                min_contrast: 0.1,
            },
            criterion: Criterion::between(1.0, 1.0),
        }],
        CaseKind::C => alloc::vec![
            ToolSpec {
                id: "head_count".to_string(),
                tool: Tool::BlobCount {
                    roi: render::SCREW_ROI,
                    threshold: ThresholdMode::Otsu,
                    min_area: 1000,
                    min_contrast: 0.1,
                },
                criterion: Criterion::between(2.0, 2.0),
            },
            ToolSpec {
                id: "head_shape".to_string(),
                tool: Tool::MaxCircularity {
                    roi: render::SCREW_ROI,
                    threshold: ThresholdMode::Otsu,
                    min_area: 1000,
                    min_contrast: 0.1,
                },
                criterion: Criterion::at_most(0.95),
            },
        ],
    };
    InspectionRecipe { case_kind, tools }
}
