//! Connected-component labelling (8-connectivity) and blob measurements.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::BinaryImage;

/// Weights of the corrected chain-code length estimator (Kulpa) for axial
/// and diagonal boundary steps.
const AXIAL_STEP: f64 = 0.948;
const DIAGONAL_STEP: f64 = 1.343;

/// Measurements of one connected foreground region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    /// 1-based label, assigned in raster order of each blob's first pixel.
    pub label: u32,
    pub area: u32,
    /// Crack count: number of pixel edges shared with background
    /// (including the image border and holes).
    pub perimeter: u32,
    /// Estimated length of the outer contour in pixels: corrected chain-code
    /// length through the boundary pixel centres plus the half-pixel offset
    /// to the pixel edges (π for a closed convex contour).
    pub contour_length: f64,
    pub centroid: (f64, f64),
    /// Inclusive bounding box `(x0, y0, x1, y1)`.
    pub bbox: (u32, u32, u32, u32),
}

/// Label image plus per-blob measurements. Label 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabels {
    pub width: u32,
    pub height: u32,
    pub labels: Vec<u32>,
    pub blobs: Vec<Blob>,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let up = parent[parent[x as usize] as usize];
        parent[x as usize] = up;
        x = up;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Keep the smaller provisional label as root.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labelling with 8-connectivity.
pub fn label_components(img: &BinaryImage) -> ComponentLabels {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut provisional = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if img.bits()[y * w + x] == 0 {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut k = 0;
            if x > 0 {
                neighbours[k] = provisional[y * w + x - 1];
                k += 1;
            }
            if y > 0 {
                let up = (y - 1) * w;
                if x > 0 {
                    neighbours[k] = provisional[up + x - 1];
                    k += 1;
                }
                neighbours[k] = provisional[up + x];
                k += 1;
                if x + 1 < w {
                    neighbours[k] = provisional[up + x + 1];
                    k += 1;
                }
            }
            let mut label = 0;
            for &n in neighbours[..k].iter().filter(|&&n| n != 0) {
                if label == 0 {
                    label = n;
                } else {
                    union(&mut parent, label, n);
                }
            }
            if label == 0 {
                label = parent.len() as u32;
                parent.push(label);
            }
            provisional[y * w + x] = label;
        }
    }

    // Final labels in raster order of first appearance.
    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    let mut labels = vec![0u32; w * h];
    for i in 0..w * h {
        let p = provisional[i];
        if p == 0 {
            continue;
        }
        let root = find(&mut parent, p) as usize;
        if remap[root] == 0 {
            next += 1;
            remap[root] = next;
        }
        labels[i] = remap[root];
    }

    let mut blobs = measure(img, &labels, next as usize);
    for b in &mut blobs {
        b.contour_length = outer_contour_length(img, &labels, b);
    }
    ComponentLabels {
        width: img.width(),
        height: img.height(),
        labels,
        blobs,
    }
}

/// Blobs of a binary image, in raster order of their first pixel.
pub fn connected_components(img: &BinaryImage) -> Vec<Blob> {
    label_components(img).blobs
}

fn measure(img: &BinaryImage, labels: &[u32], count: usize) -> Vec<Blob> {
    struct Acc {
        area: u32,
        crack: u32,
        sx: u64,
        sy: u64,
        bbox: (u32, u32, u32, u32),
    }
    let mut acc: Vec<Acc> = (0..count)
        .map(|_| Acc {
            area: 0,
            crack: 0,
            sx: 0,
            sy: 0,
            bbox: (u32::MAX, u32::MAX, 0, 0),
        })
        .collect();
    let w = img.width();
    for y in 0..img.height() {
        for x in 0..w {
            let l = labels[(y * w + x) as usize];
            if l == 0 {
                continue;
            }
            let a = &mut acc[l as usize - 1];
            a.area += 1;
            a.sx += u64::from(x);
            a.sy += u64::from(y);
            a.bbox.0 = a.bbox.0.min(x);
            a.bbox.1 = a.bbox.1.min(y);
            a.bbox.2 = a.bbox.2.max(x);
            a.bbox.3 = a.bbox.3.max(y);
            let (xi, yi) = (i64::from(x), i64::from(y));
            a.crack += [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .filter(|(dx, dy)| !img.get_signed(xi + dx, yi + dy))
                .count() as u32;
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(i, a)| Blob {
            label: i as u32 + 1,
            area: a.area,
            perimeter: a.crack,
            contour_length: 0.0,
            centroid: (a.sx as f64 / f64::from(a.area), a.sy as f64 / f64::from(a.area)),
            bbox: a.bbox,
        })
        .collect()
}

/// Clockwise ring of neighbour offsets (y grows downwards), starting west.
const RING: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn ring_index(dx: i64, dy: i64) -> usize {
    RING.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is a neighbour")
}

/// Moore-neighbour trace of the blob's outer boundary, starting from its
/// first raster pixel, with Jacob's stopping criterion.
fn outer_contour_length(img: &BinaryImage, labels: &[u32], blob: &Blob) -> f64 {
    let w = i64::from(img.width());
    let h = i64::from(img.height());
    let is_mine = |x: i64, y: i64| {
        x >= 0 && y >= 0 && x < w && y < h && labels[(y * w + x) as usize] == blob.label
    };
    // First raster pixel of the blob lies on its top row.
    let y0 = i64::from(blob.bbox.1);
    let x0 = (i64::from(blob.bbox.0)..=i64::from(blob.bbox.2))
        .find(|&x| is_mine(x, y0))
        .expect("blob has a pixel on its top row");
    let start = (x0, y0);

    // The west neighbour of the first pixel is background.
    let next_from = |p: (i64, i64), back: usize| -> Option<((i64, i64), usize)> {
        for k in 1..=8 {
            let i = (back + k) % 8;
            let (dx, dy) = RING[i];
            if is_mine(p.0 + dx, p.1 + dy) {
                let c = (p.0 + dx, p.1 + dy);
                // The previously examined ring cell is background and adjacent to c.
                let (bx, by) = RING[(i + 7) % 8];
                let prev = (p.0 + bx, p.1 + by);
                return Some((c, ring_index(prev.0 - c.0, prev.1 - c.1)));
            }
        }
        None
    };

    let Some((first, first_back)) = next_from(start, 0) else {
        // Isolated pixel: only the pixel-edge offset remains.
        return PI;
    };
    let (mut axial, mut diagonal) = (0u64, 0u64);
    let mut count_step = |a: (i64, i64), b: (i64, i64)| {
        if a.0 != b.0 && a.1 != b.1 {
            diagonal += 1;
        } else {
            axial += 1;
        }
    };
    count_step(start, first);
    let (mut p, mut back) = (first, first_back);
    // Bounded by the number of pixel-direction pairs.
    let limit = 8 * u64::from(blob.area) + 8;
    for _ in 0..limit {
        let (c, b) = next_from(p, back).expect("traced pixel has a neighbour");
        if p == start && c == first {
            break;
        }
        count_step(p, c);
        p = c;
        back = b;
    }
    AXIAL_STEP * axial as f64 + DIAGONAL_STEP * diagonal as f64 + PI
}

/// Shape compactness `4π·area/perimeter²` using the blob's contour length,
/// capped at 1.
pub fn circularity(blob: &Blob) -> f64 {
    circularity_from(f64::from(blob.area), blob.contour_length)
}

/// `4π·area/perimeter²`, capped at 1.
pub fn circularity_from(area: f64, perimeter: f64) -> f64 {
    if perimeter <= 0.0 {
        return 1.0;
    }
    (4.0 * PI * area / (perimeter * perimeter)).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Recursive flood fill (explicit stack) producing a raster-ordered
    /// partition, independent of the union-find path.
    fn flood_oracle(img: &BinaryImage) -> Vec<u32> {
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut out = vec![0u32; (w * h) as usize];
        let mut next = 0;
        fn fill(img: &BinaryImage, out: &mut [u32], x: i64, y: i64, l: u32) {
            let w = img.width() as i64;
            if !img.get_signed(x, y) || out[(y * w + x) as usize] != 0 {
                return;
            }
            out[(y * w + x) as usize] = l;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if (dx, dy) != (0, 0) {
                        fill(img, out, x + dx, y + dy, l);
                    }
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                if img.get_signed(x, y) && out[(y * w + x) as usize] == 0 {
                    next += 1;
                    fill(img, &mut out, x, y, next);
                }
            }
        }
        out
    }

    fn disc(r: f64, size: u32) -> BinaryImage {
        let c = f64::from(size) / 2.0;
        let mut b = BinaryImage::empty(size, size);
        for y in 0..size {
            for x in 0..size {
                let (dx, dy) = (f64::from(x) + 0.5 - c, f64::from(y) + 0.5 - c);
                b.set(x, y, dx * dx + dy * dy <= r * r);
            }
        }
        b
    }

    #[test]
    fn empty_image_has_no_blobs() {
        assert!(connected_components(&BinaryImage::empty(10, 10)).is_empty());
    }

    #[test]
    fn diagonal_pixels_join() {
        let mut b = BinaryImage::empty(4, 4);
        b.set(1, 1, true);
        b.set(2, 2, true);
        let blobs = connected_components(&b);
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 2);
        assert_eq!(blobs[0].bbox, (1, 1, 2, 2));
        assert_eq!(blobs[0].centroid, (1.5, 1.5));
    }

    #[test]
    fn single_pixel_measurements() {
        let mut b = BinaryImage::empty(3, 3);
        b.set(1, 1, true);
        let blob = &connected_components(&b)[0];
        assert_eq!((blob.area, blob.perimeter), (1, 4));
        assert!(blob.perimeter >= 4);
    }

    #[test]
    fn raster_order_labels() {
        // Blob whose first pixel is later in raster order gets the higher label
        // even if it extends further up-left elsewhere.
        let mut b = BinaryImage::empty(6, 4);
        b.set(4, 0, true);
        b.set(0, 1, true);
        b.set(1, 2, true);
        let blobs = connected_components(&b);
        assert_eq!(blobs.len(), 2);
        assert_eq!(blobs[0].bbox, (4, 0, 4, 0));
        assert_eq!(blobs[1].area, 2);
    }

    #[test]
    fn u_shape_merges_late() {
        // Two arms meet only at the bottom row.
        let rows = ["x...x", "x...x", "xxxxx"];
        let bits: Vec<bool> = rows.iter().flat_map(|r| r.chars().map(|c| c == 'x')).collect();
        let blobs = connected_components(&BinaryImage::from_bools(5, 3, &bits));
        assert_eq!(blobs.len(), 1);
        assert_eq!(blobs[0].area, 9);
    }

    #[test]
    fn square_crack_perimeter() {
        let mut b = BinaryImage::empty(12, 12);
        for y in 2..10 {
            for x in 2..10 {
                b.set(x, y, true);
            }
        }
        let blob = &connected_components(&b)[0];
        assert_eq!(blob.perimeter, 32);
        // 28 axial chain steps through pixel centres plus the corner offset.
        assert!((blob.contour_length - (0.948 * 28.0 + PI)).abs() < 1e-9);
    }

    #[test]
    fn disc_is_nearly_circular() {
        let blob = &connected_components(&disc(40.0, 100))[0];
        let c = circularity(blob);
        assert!((c - 1.0).abs() <= 0.08, "{c}");
    }

    #[test]
    fn analytic_shapes() {
        let s = 10.0;
        let hex = circularity_from(1.5 * 3f64.sqrt() * s * s, 6.0 * s);
        assert!((hex - PI * 3f64.sqrt() / 6.0).abs() < 1e-12);
        assert!((hex - 0.9069).abs() < 1e-4);
        let sq = circularity_from(s * s, 4.0 * s);
        assert!((sq - PI / 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_flood_fill(w in 1u32..=32, h in 1u32..=32, density in 0.1f64..0.7, seed in any::<u64>()) {
            let mut rng = crate::rng::SimRng::new(seed);
            let bits: Vec<bool> = (0..w * h).map(|_| rng.bernoulli(density)).collect();
            let img = BinaryImage::from_bools(w, h, &bits);
            let got = label_components(&img);
            prop_assert_eq!(&got.labels, &flood_oracle(&img));
            let total: u32 = got.blobs.iter().map(|b| b.area).sum();
            prop_assert_eq!(total as usize, img.count());
            for b in &got.blobs {
                prop_assert!(b.perimeter >= 4);
                prop_assert!(b.contour_length > 0.0);
                let (x0, y0, x1, y1) = b.bbox;
                prop_assert!(b.centroid.0 >= f64::from(x0) && b.centroid.0 <= f64::from(x1));
                prop_assert!(b.centroid.1 >= f64::from(y0) && b.centroid.1 <= f64::from(y1));
            }
        }
    }
}
