//! Bilinear resampling with half-pixel-centered coordinates.

use crate::error::{Error, Result};
use crate::image::Image;

/// Resizes to exactly (out_w, out_h). Output pixel centers map to
/// source coordinates via (i + 0.5)·in/out − 0.5, clamped to the frame;
/// values are blended with the lerp form, so a same-size resize and a
/// uniform image reproduce their inputs exactly, and no output can
/// overshoot the input range.
pub fn resize_bilinear(img: &Image, out_w: usize, out_h: usize) -> Result<Image> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::usage("resize dimensions must be >= 1"));
    }
    let (in_w, in_h) = (img.width(), img.height());
    let scale_x = in_w as f64 / out_w as f64;
    let scale_y = in_h as f64 / out_h as f64;

    let mut pixels = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (in_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(in_h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (in_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(in_w - 1);
            let fx = sx - x0 as f64;

            let p00 = img.get(x0, y0);
            let p10 = img.get(x1, y0);
            let p01 = img.get(x0, y1);
            let p11 = img.get(x1, y1);
            let mut px = [0.0; 3];
            for c in 0..3 {
                let top = p00[c] + fx * (p10[c] - p00[c]);
                let bottom = p01[c] + fx * (p11[c] - p01[c]);
                px[c] = top + fy * (bottom - top);
            }
            pixels.push(px);
        }
    }
    Image::new(out_w, out_h, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn same_size_resize_is_identity() {
        let mut rng = SplitMix64::new(8);
        let pixels: Vec<[f64; 3]> = (0..12 * 7)
            .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
            .collect();
        let img = Image::new(12, 7, pixels).unwrap();
        let out = resize_bilinear(&img, 12, 7).unwrap();
        assert_eq!(img, out);
    }

    #[test]
    fn uniform_image_stays_uniform() {
        let img = Image::filled(9, 5, [0.3, 0.6, 0.9]);
        let out = resize_bilinear(&img, 17, 3).unwrap();
        for px in out.pixels() {
            assert_eq!(*px, [0.3, 0.6, 0.9]);
        }
    }

    #[test]
    fn upscale_of_gradient_is_monotone() {
        // 2x1 [0, 1] to 4x1: half-pixel mapping gives [0, 0.25, 0.75, 1]
        let img = Image::new(2, 1, vec![[0.0; 3], [1.0; 3]]).unwrap();
        let out = resize_bilinear(&img, 4, 1).unwrap();
        let values: Vec<f64> = out.pixels().iter().map(|p| p[0]).collect();
        assert_eq!(values, vec![0.0, 0.25, 0.75, 1.0]);
        for pair in values.windows(2) {
            assert!(pair[0] <= pair[1]);
        }
    }

    #[test]
    fn zero_output_dim_is_usage_error() {
        let img = Image::filled(2, 2, [0.0; 3]);
        assert!(resize_bilinear(&img, 0, 2).is_err());
    }

    #[test]
    fn values_stay_in_unit_range() {
        let mut rng = SplitMix64::new(21);
        let pixels: Vec<[f64; 3]> = (0..16 * 16)
            .map(|_| [rng.next_f64(), rng.next_f64(), rng.next_f64()])
            .collect();
        let img = Image::new(16, 16, pixels).unwrap();
        for (w, h) in [(5, 31), (33, 7), (16, 16), (1, 1)] {
            let out = resize_bilinear(&img, w, h).unwrap();
            for px in out.pixels() {
                for &c in px {
                    assert!((0.0..=1.0).contains(&c));
                }
            }
        }
    }
}
