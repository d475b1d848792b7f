//! Synthetic frame renderer for the three case studies.
//!
//! Scene geometry is expressed in pixels relative to the object centre.
//! Surfaces carry a reflectance level; the rendered value is
//! `background + lux·(level − background)` plus Gaussian sensor noise.

use alloc::vec;
use alloc::vec::Vec;

use super::CameraConfig;
use crate::plant::{Illumination, ObjectInstance};
use crate::rng::SimRng;
use crate::scenarios::{Appearance, BarDefect, BarcodeLook, PcbLook, ScrewHead, ScrewLook};
use crate::vision::{Frame, Roi, FRAME_HEIGHT, FRAME_WIDTH};

/// Belt surface level.
pub const BACKGROUND: u8 = 30;
const CENTER_X: i32 = FRAME_WIDTH as i32 / 2;
const CENTER_Y: i32 = FRAME_HEIGHT as i32 / 2;
/// Half height of every object across the belt, px.
const BODY_HALF_HEIGHT: i32 = 150;

// Case A: container with a printed label and a 12-bar code.
const CONTAINER_LEVEL: u8 = 150;
const LABEL_LEVEL: u8 = 220;
const INK_LEVEL: u8 = 40;
const LABEL_HALF: (i32, i32) = (186, 100);
pub const BAR_WIDTHS: [i32; 12] = [5, 9, 5, 12, 5, 7, 10, 5, 9, 5, 7, 10];
pub const BAR_GAP: i32 = 7;
pub const BAR_HEIGHT: u16 = 120;
pub const BARCODE_ROI: Roi = Roi::new(189, 190, 262, 100);

// Case B: PCB with a resistor site in the middle.
const BOARD_LEVEL: u8 = 70;
const IC_LEVEL: u8 = 35;
const PAD_LEVEL: u8 = 170;
const RESISTOR_LEVEL: u8 = 205;
const PAD_HALF_HEIGHT: i32 = 10;
const PAD_INNER: i32 = 22;
const PAD_OUTER: i32 = 38;
pub const RESISTOR_SITE_ROI: Roi = Roi::new(230, 200, 180, 80);

// Case C: bracket with two screw heads.
const BRACKET_LEVEL: u8 = 90;
const HEAD_LEVEL: u8 = 210;
pub const HEAD_INRADIUS: f64 = 30.0;
pub const HEAD_OFFSET: f64 = 60.0;
pub const SCREW_ROI: Roi = Roi::new(175, 200, 290, 80);

/// Where the object sits in the frame and how much it smears.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RenderPose {
    /// Horizontal offset of the object centre from the frame centre, px.
    pub shift_px: i32,
    /// Horizontal motion-blur length, px (0 or 1 disables blur).
    pub blur_px: u32,
}

/// Reflectance map before lighting and noise.
struct Scene {
    levels: Vec<u8>,
    cx: i32,
}

impl Scene {
    fn new(shift_px: i32) -> Self {
        Self {
            levels: vec![BACKGROUND; (FRAME_WIDTH * FRAME_HEIGHT) as usize],
            cx: CENTER_X + shift_px,
        }
    }

    /// Fills `[x0, x1) × [y0, y1)` given relative to the object centre.
    fn rect(&mut self, x0: i32, y0: i32, x1: i32, y1: i32, level: u8) {
        let (w, h) = (FRAME_WIDTH as i32, FRAME_HEIGHT as i32);
        let ax0 = (self.cx + x0).clamp(0, w);
        let ax1 = (self.cx + x1).clamp(0, w);
        let ay0 = (CENTER_Y + y0).clamp(0, h);
        let ay1 = (CENTER_Y + y1).clamp(0, h);
        for y in ay0..ay1 {
            let row = (y * w) as usize;
            self.levels[row + ax0 as usize..row + ax1 as usize].fill(level);
        }
    }

    /// Paints every pixel whose centre satisfies `inside` within the box
    /// `[x0, x1) × [y0, y1)` (relative coordinates).
    fn shape(&mut self, x0: i32, y0: i32, x1: i32, y1: i32, level: u8, inside: impl Fn(f64, f64) -> bool) {
        let (w, h) = (FRAME_WIDTH as i32, FRAME_HEIGHT as i32);
        for y in (CENTER_Y + y0).max(0)..(CENTER_Y + y1).min(h) {
            for x in (self.cx + x0).max(0)..(self.cx + x1).min(w) {
                let rx = f64::from(x - self.cx) + 0.5;
                let ry = f64::from(y - CENTER_Y) + 0.5;
                if inside(rx, ry) {
                    self.levels[(y * w + x) as usize] = level;
                }
            }
        }
    }
}

fn body(scene: &mut Scene, obj: &ObjectInstance, px_per_cm: f64, level: u8) {
    let half = libm::round(obj.length * px_per_cm / 2.0) as i32;
    scene.rect(-half, -BODY_HALF_HEIGHT, half, BODY_HALF_HEIGHT, level);
}

fn bar_spans() -> Vec<(i32, i32)> {
    let total: i32 = BAR_WIDTHS.iter().sum::<i32>() + BAR_GAP * (BAR_WIDTHS.len() as i32 - 1);
    let mut x = -total / 2;
    BAR_WIDTHS
        .iter()
        .map(|&w| {
            let span = (x, x + w);
            x += w + BAR_GAP;
            span
        })
        .collect()
}

fn draw_barcode(scene: &mut Scene, look: &BarcodeLook) {
    scene.rect(-LABEL_HALF.0, -LABEL_HALF.1, LABEL_HALF.0, LABEL_HALF.1, LABEL_LEVEL);
    let ink = match look.defect {
        Some(BarDefect::Fade { fade }) => {
            let lost = fade.clamp(0.0, 1.0) * f64::from(LABEL_LEVEL - INK_LEVEL);
            libm::round(f64::from(INK_LEVEL) + lost) as u8
        }
        _ => INK_LEVEL,
    };
    let top = -i32::from(BAR_HEIGHT) / 2;
    let bottom = top + i32::from(BAR_HEIGHT);
    let spans = bar_spans();
    for &(x0, x1) in &spans {
        scene.rect(x0, top, x1, bottom, ink);
    }
    match look.defect {
        Some(BarDefect::Merge {
            gap,
            band_top,
            band_height,
        }) => {
            let g = usize::from(gap).min(spans.len() - 2);
            let y0 = top + i32::from(band_top);
            scene.rect(spans[g].1, y0, spans[g + 1].0, y0 + i32::from(band_height), ink);
        }
        Some(BarDefect::Void {
            bar,
            band_top,
            band_height,
        }) => {
            let b = usize::from(bar).min(spans.len() - 1);
            let y0 = top + i32::from(band_top);
            scene.rect(spans[b].0, y0, spans[b].1, y0 + i32::from(band_height), LABEL_LEVEL);
        }
        _ => {}
    }
}

fn draw_pcb(scene: &mut Scene, look: &PcbLook) {
    scene.rect(-150, -130, -40, -75, IC_LEVEL);
    // A second resistor outside the inspected site.
    scene.rect(34, 80, 110, 100, PAD_LEVEL);
    scene.rect(40, 79, 104, 101, RESISTOR_LEVEL);

    let (ph0, ph1) = (-PAD_HALF_HEIGHT, PAD_HALF_HEIGHT);
    scene.rect(-PAD_OUTER, ph0, -PAD_INNER, ph1, PAD_LEVEL);
    scene.rect(PAD_INNER, ph0, PAD_OUTER, ph1, PAD_LEVEL);
    if look.resistor_present {
        scene.rect(-32, -11, 32, 11, RESISTOR_LEVEL);
    } else if look.residue > 0.0 {
        let h = libm::round(look.residue.clamp(0.0, 1.0) * f64::from(2 * PAD_HALF_HEIGHT)) as i32;
        if h > 0 {
            let y0 = -h / 2;
            scene.rect(-PAD_INNER, y0, PAD_INNER, y0 + h, PAD_LEVEL);
        }
    }
}

/// Signed distance to a regular hexagon of inradius `r` centred at the
/// origin, flat sides facing ±y and vertices on the x axis.
fn hexagon_sdf(px: f64, py: f64, r: f64) -> f64 {
    const K: (f64, f64, f64) = (-0.866_025_403_784_438_6, 0.5, 0.577_350_269_189_625_8);
    let (mut x, mut y) = (libm::fabs(px), libm::fabs(py));
    let d = 2.0 * (K.0 * x + K.1 * y).min(0.0);
    x -= d * K.0;
    y -= d * K.1;
    x -= x.clamp(-K.2 * r, K.2 * r);
    y -= r;
    let len = libm::sqrt(x * x + y * y);
    if y < 0.0 {
        -len
    } else {
        len
    }
}

/// Whether a point lies in a screw head: a hexagon whose corners are
/// rounded by `roundness·inradius`, a disc at roundness 1.
pub fn inside_head(head: &ScrewHead, rx: f64, ry: f64) -> bool {
    let (s, c) = (libm::sin(head.angle), libm::cos(head.angle));
    let (x, y) = (c * rx + s * ry, -s * rx + c * ry);
    let rho = head.roundness.clamp(0.0, 1.0) * HEAD_INRADIUS;
    hexagon_sdf(x, y, HEAD_INRADIUS - rho) - rho <= 0.0
}

fn draw_screws(scene: &mut Scene, look: &ScrewLook) {
    let reach = (HEAD_INRADIUS * 1.2) as i32 + 2;
    for (i, head) in look.heads.iter().enumerate() {
        let ox = if i == 0 { -HEAD_OFFSET } else { HEAD_OFFSET };
        let oxi = ox as i32;
        scene.shape(oxi - reach, -reach, oxi + reach, reach, HEAD_LEVEL, |x, y| {
            inside_head(head, x - ox, y)
        });
    }
}

fn box_blur_rows(levels: &[u8], len: u32) -> Vec<f64> {
    let w = FRAME_WIDTH as usize;
    let len = len as usize;
    let mut out = vec![0.0; levels.len()];
    for (row_in, row_out) in levels.chunks(w).zip(out.chunks_mut(w)) {
        for x in 0..w {
            let lo = x.saturating_sub(len / 2);
            let hi = (lo + len).min(w);
            let sum: u32 = row_in[lo..hi].iter().map(|&v| u32::from(v)).sum();
            row_out[x] = f64::from(sum) / (hi - lo) as f64;
        }
    }
    out
}

/// Renders `obj` under `illum` at the given pose with seeded noise.
pub fn render_at(
    obj: &ObjectInstance,
    illum: &Illumination,
    pose: RenderPose,
    noise_seed: u64,
    cfg: &CameraConfig,
) -> Frame {
    let mut scene = Scene::new(pose.shift_px);
    match &obj.appearance {
        Appearance::Barcode(look) => {
            body(&mut scene, obj, cfg.px_per_cm, CONTAINER_LEVEL);
            draw_barcode(&mut scene, look);
        }
        Appearance::Pcb(look) => {
            body(&mut scene, obj, cfg.px_per_cm, BOARD_LEVEL);
            draw_pcb(&mut scene, look);
        }
        Appearance::Screws(look) => {
            body(&mut scene, obj, cfg.px_per_cm, BRACKET_LEVEL);
            draw_screws(&mut scene, look);
        }
    }

    let lux = illum.relative_lux;
    let bg = f64::from(BACKGROUND);
    let sigma = cfg.noise_sigma;
    let mut rng = SimRng::new(noise_seed);
    let mut light = |level: f64| {
        let noise = if sigma > 0.0 { sigma * rng.normal() } else { 0.0 };
        libm::round(bg + lux * (level - bg) + noise).clamp(0.0, 255.0) as u8
    };
    let pixels: Vec<u8> = if pose.blur_px > 1 {
        box_blur_rows(&scene.levels, pose.blur_px)
            .into_iter()
            .map(&mut light)
            .collect()
    } else {
        scene.levels.iter().map(|&v| light(f64::from(v))).collect()
    };
    Frame::from_pixels(FRAME_WIDTH, FRAME_HEIGHT, pixels).expect("frame-sized buffer")
}

/// Renders `obj` centred in the frame.
pub fn render(obj: &ObjectInstance, illum: &Illumination, noise_seed: u64, cfg: &CameraConfig) -> Frame {
    render_at(obj, illum, RenderPose::default(), noise_seed, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{CaseKind, Truth};
    use crate::vision::{bar_runs, histogram};

    fn object(appearance: Appearance) -> ObjectInstance {
        ObjectInstance {
            id: 0,
            case_kind: appearance.case_kind(),
            truth: Truth::Good,
            x: 0.0,
            length: 6.0,
            appearance,
        }
    }

    #[test]
    fn dark_scene_shows_only_background() {
        let cfg = CameraConfig::default();
        let f = render(&object(Appearance::good(CaseKind::A)), &Illumination::from_level(0), 5, &cfg);
        let mean = histogram(&f).mean().unwrap();
        assert!((mean - f64::from(BACKGROUND)).abs() < 0.1, "{mean}");
        assert!(f.pixels().iter().all(|&p| (p as i32 - 30).abs() < 30));
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = CameraConfig::default();
        let o = object(Appearance::good(CaseKind::C));
        let il = Illumination::default();
        assert_eq!(render(&o, &il, 11, &cfg), render(&o, &il, 11, &cfg));
        assert_ne!(render(&o, &il, 11, &cfg), render(&o, &il, 12, &cfg));
    }

    #[test]
    fn good_barcode_reads_twelve_bars() {
        let cfg = CameraConfig::default();
        let f = render(&object(Appearance::good(CaseKind::A)), &Illumination::default(), 3, &cfg);
        let scan = bar_runs(&f, &BARCODE_ROI, BARCODE_ROI.y + 50).unwrap();
        assert_eq!(scan.dark_runs, 12);
    }

    #[test]
    fn merged_pair_reads_eleven_bars() {
        let cfg = CameraConfig::default();
        let look = BarcodeLook {
            defect: Some(BarDefect::Merge {
                gap: 4,
                band_top: 0,
                band_height: BAR_HEIGHT,
            }),
        };
        let f = render(&object(Appearance::Barcode(look)), &Illumination::default(), 3, &cfg);
        let scan = bar_runs(&f, &BARCODE_ROI, BARCODE_ROI.y + 50).unwrap();
        assert_eq!(scan.dark_runs, 11);
    }

    #[test]
    fn hexagon_sdf_basics() {
        assert!(hexagon_sdf(0.0, 0.0, 10.0) < 0.0);
        assert!((hexagon_sdf(0.0, 10.0, 10.0)).abs() < 1e-9);
        assert!(hexagon_sdf(0.0, 11.0, 10.0) > 0.0);
        // Vertex at the circumradius on the x axis.
        let circ = 10.0 / (3f64.sqrt() / 2.0);
        assert!(hexagon_sdf(circ - 0.01, 0.0, 10.0) < 0.0);
        assert!(hexagon_sdf(circ + 0.01, 0.0, 10.0) > 0.0);
    }
}
