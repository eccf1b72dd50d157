//! Binary morphology with a square structuring element of side `2 r + 1`.
//!
//! Pixels outside the frame count as `false` for both operators, so erosion
//! eats into masks that touch the border.

use super::BinaryMask;
use crate::error::{Error, Result};

pub fn dilate(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    check_radius(radius)?;
    Ok(dilate_with_border(mask, radius, false))
}

pub fn erode(mask: &BinaryMask, radius: usize) -> Result<BinaryMask> {
    check_radius(radius)?;
    Ok(sweep(mask, radius, false, Op::All))
}

/// Dilation with an explicit value for out-of-frame pixels.
fn dilate_with_border(mask: &BinaryMask, radius: usize, border: bool) -> BinaryMask {
    sweep(mask, radius, border, Op::Any)
}

fn check_radius(radius: usize) -> Result<()> {
    if radius < 1 {
        return Err(Error::invalid("radius", "must be at least 1"));
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Op {
    Any,
    All,
}

// The square element is separable: a row pass followed by a column pass.
fn sweep(mask: &BinaryMask, radius: usize, border: bool, op: Op) -> BinaryMask {
    let (h, w) = mask.dims();
    let src = mask.data();
    let r = radius as isize;
    let fold = |mut vals: std::ops::RangeInclusive<isize>, get: &dyn Fn(isize) -> bool| match op {
        Op::Any => vals.any(get),
        Op::All => vals.all(get),
    };

    let mut rows = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let get = |d: isize| {
                let xx = x as isize + d;
                if xx < 0 || xx >= w as isize {
                    border
                } else {
                    src[y * w + xx as usize]
                }
            };
            rows[y * w + x] = fold(-r..=r, &get);
        }
    }
    let mut out = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let get = |d: isize| {
                let yy = y as isize + d;
                if yy < 0 || yy >= h as isize {
                    border
                } else {
                    rows[yy as usize * w + x]
                }
            };
            out[y * w + x] = fold(-r..=r, &get);
        }
    }
    BinaryMask::from_vec(h, w, out).expect("dimensions preserved")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Per-pixel window scan, independent of the separable sweep.
    fn brute(mask: &BinaryMask, radius: usize, dilation: bool) -> BinaryMask {
        let (h, w) = mask.dims();
        let r = radius as isize;
        BinaryMask::from_fn(h, w, |y, x| {
            let mut any = false;
            let mut all = true;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (yy, xx) = (y as isize + dy, x as isize + dx);
                    let v = yy >= 0
                        && xx >= 0
                        && yy < h as isize
                        && xx < w as isize
                        && mask.get(yy as usize, xx as usize);
                    any |= v;
                    all &= v;
                }
            }
            if dilation {
                any
            } else {
                all
            }
        })
    }

    fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, margin: usize, p: f64) -> BinaryMask {
        BinaryMask::from_fn(h, w, |y, x| {
            let inside = y >= margin && x >= margin && y + margin < h && x + margin < w;
            inside && rng.random_bool(p)
        })
    }

    #[test]
    fn single_pixel_dilates_to_block() {
        let mut m = BinaryMask::new(11, 11, false);
        m.set(5, 5, true);
        let d = dilate(&m, 1).unwrap();
        let expect = BinaryMask::from_fn(11, 11, |y, x| (4..=6).contains(&y) && (4..=6).contains(&x));
        assert_eq!(d, expect);
    }

    #[test]
    fn full_mask_erodes_at_border() {
        let m = BinaryMask::new(10, 10, true);
        let e = erode(&m, 1).unwrap();
        let expect = BinaryMask::from_fn(10, 10, |y, x| (1..9).contains(&y) && (1..9).contains(&x));
        assert_eq!(e, expect);
    }

    #[test]
    fn zero_radius_rejected() {
        let m = BinaryMask::new(3, 3, true);
        assert!(dilate(&m, 0).is_err());
        assert!(erode(&m, 0).is_err());
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = random_mask(&mut rng, 13, 17, 0, 0.4);
            for radius in 1..=3 {
                assert_eq!(dilate(&m, radius).unwrap(), brute(&m, radius, true));
                assert_eq!(erode(&m, radius).unwrap(), brute(&m, radius, false));
            }
        }
    }

    #[test]
    fn opening_and_closing_bracket_the_mask() {
        // Masks keep a false margin of 2 r so the zero border does not cut
        // into the closing.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..50 {
            let radius = 1 + i % 2;
            let m = random_mask(&mut rng, 24, 24, 2 * radius, 0.5);
            let opening = brute(&brute(&m, radius, false), radius, true);
            let closing = brute(&brute(&m, radius, true), radius, false);
            let open = dilate(&erode(&m, radius).unwrap(), radius).unwrap();
            let close = erode(&dilate(&m, radius).unwrap(), radius).unwrap();
            assert_eq!(open, opening);
            assert_eq!(close, closing);
            assert!(open.is_subset_of(&m));
            assert!(m.is_subset_of(&close));
        }
    }

    #[test]
    fn duality_under_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let m = random_mask(&mut rng, 15, 12, 0, 0.6);
            for radius in 1..=2 {
                let lhs = erode(&m, radius).unwrap().complement();
                // Out-of-frame pixels are false for `m`, hence true for its complement.
                let rhs = dilate_with_border(&m.complement(), radius, true);
                assert_eq!(lhs, rhs);
            }
        }
    }
}
