//! 3×3 box morphology. Pixels outside the image count as background.

use super::BinaryImage;

fn neighborhood(src: &BinaryImage, want_all: bool) -> BinaryImage {
    let (w, h) = (i64::from(src.width()), i64::from(src.height()));
    let mut out = BinaryImage::empty(src.width(), src.height());
    for y in 0..h {
        for x in 0..w {
            let mut all = true;
            let mut any = false;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let on = src.get_signed(x + dx, y + dy);
                    all &= on;
                    any |= on;
                }
            }
            out.set(x as u32, y as u32, if want_all { all } else { any });
        }
    }
    out
}

/// Minimum over the 3×3 neighbourhood.
pub fn erode(src: &BinaryImage) -> BinaryImage {
    neighborhood(src, true)
}

/// Maximum over the 3×3 neighbourhood.
pub fn dilate(src: &BinaryImage) -> BinaryImage {
    neighborhood(src, false)
}

/// Erosion followed by dilation.
pub fn open(src: &BinaryImage) -> BinaryImage {
    dilate(&erode(src))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dilate_point_gives_block() {
        let mut b = BinaryImage::empty(7, 7);
        b.set(3, 3, true);
        let d = dilate(&b);
        assert_eq!(d.count(), 9);
        for y in 2..=4 {
            for x in 2..=4 {
                assert!(d.get(x, y));
            }
        }
    }

    #[test]
    fn dilate_corner_is_clipped() {
        let mut b = BinaryImage::empty(5, 5);
        b.set(0, 0, true);
        assert_eq!(dilate(&b).count(), 4);
    }

    #[test]
    fn erode_block_gives_point() {
        let mut b = BinaryImage::empty(7, 7);
        for y in 2..=4 {
            for x in 2..=4 {
                b.set(x, y, true);
            }
        }
        let e = erode(&b);
        assert_eq!(e.count(), 1);
        assert!(e.get(3, 3));
    }

    #[test]
    fn border_erodes_away() {
        let mut b = BinaryImage::empty(3, 3);
        for y in 0..3 {
            for x in 0..3 {
                b.set(x, y, true);
            }
        }
        assert_eq!(erode(&b).count(), 1);
    }

    fn isolated(b: &BinaryImage, x: u32, y: u32) -> bool {
        let (x, y) = (i64::from(x), i64::from(y));
        b.get_signed(x, y)
            && (-1..=1)
                .flat_map(|dy| (-1..=1).map(move |dx| (dx, dy)))
                .filter(|&d| d != (0, 0))
                .all(|(dx, dy)| !b.get_signed(x + dx, y + dy))
    }

    proptest! {
        #[test]
        fn opening_removes_isolated_pixels(bits in proptest::collection::vec(proptest::bool::weighted(0.08), 24 * 24)) {
            let b = BinaryImage::from_bools(24, 24, &bits);
            let o = open(&b);
            for y in 0..24 {
                for x in 0..24 {
                    if isolated(&b, x, y) {
                        prop_assert!(!o.get(x, y));
                    }
                }
            }
        }

        #[test]
        fn duality_away_from_border(bits in proptest::collection::vec(any::<bool>(), 16 * 16)) {
            let b = BinaryImage::from_bools(16, 16, &bits);
            let lhs = erode(&b.complement());
            let rhs = dilate(&b).complement();
            for y in 1..15 {
                for x in 1..15 {
                    prop_assert_eq!(lhs.get(x, y), rhs.get(x, y));
                }
            }
        }
    }
}
