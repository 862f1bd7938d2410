//! Synthetic 5-class shape dataset: filled circle, plus-cross, square
//! outline, horizontal stripes, filled triangle, with seeded jitter in
//! position, scale, and gray level.

use crate::dataset::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{derive_seed, SplitMix64};

/// Class names in lexicographic order; index = label.
pub const SHAPE_CLASS_NAMES: [&str; 5] = ["circle", "plus", "square", "stripes", "triangle"];

/// Generates `per_class` images of each of the five shape classes at
/// side × side pixels. Bitwise deterministic for a given seed.
pub fn synth_shapes(per_class: usize, side: usize, seed: u64) -> Result<Dataset> {
    if per_class == 0 {
        return Err(Error::usage("per_class must be >= 1"));
    }
    if side < 16 {
        return Err(Error::usage("side must be >= 16"));
    }
    let mut items = Vec::with_capacity(5 * per_class);
    for (label, class) in SHAPE_CLASS_NAMES.iter().enumerate() {
        for index in 0..per_class {
            let id = format!("{class}/{class}_{index:04}.ppm");
            let mut rng = SplitMix64::new(derive_seed(seed, &id));
            let image = draw_shape(class, side, &mut rng);
            items.push(LabeledImage { id, image, label });
        }
    }
    Dataset::new(items, SHAPE_CLASS_NAMES.iter().map(|s| s.to_string()).collect())
}

fn draw_shape(class: &str, side: usize, rng: &mut SplitMix64) -> Image {
    let s = side as f64;
    let bg = rng.uniform(0.05, 0.25);
    let fg = rng.uniform(0.65, 1.0);
    let cx = s / 2.0 + rng.uniform(-0.15, 0.15) * s;
    let cy = s / 2.0 + rng.uniform(-0.15, 0.15) * s;
    let radius = rng.uniform(0.22, 0.38) * s;

    let mut inside: Box<dyn Fn(f64, f64) -> bool> = match class {
        "circle" => Box::new(move |x, y| {
            let (dx, dy) = (x - cx, y - cy);
            dx * dx + dy * dy <= radius * radius
        }),
        "plus" => {
            let bar = radius * 0.33;
            Box::new(move |x, y| {
                let (dx, dy) = ((x - cx).abs(), (y - cy).abs());
                (dx <= bar && dy <= radius) || (dy <= bar && dx <= radius)
            })
        }
        "square" => {
            let band = (s / 16.0).max(1.5);
            Box::new(move |x, y| {
                let d = (x - cx).abs().max((y - cy).abs());
                d <= radius && d >= radius - band
            })
        }
        "triangle" => {
            let ax = cx;
            let ay = cy - radius;
            let bx = cx - radius;
            let by = cy + 0.8 * radius;
            let tx = cx + radius;
            let ty = cy + 0.8 * radius;
            Box::new(move |x, y| {
                let e0 = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
                let e1 = (tx - bx) * (y - by) - (ty - by) * (x - bx);
                let e2 = (ax - tx) * (y - ty) - (ay - ty) * (x - tx);
                (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0)
            })
        }
        "stripes" => Box::new(|_, _| false),
        other => unreachable!("unknown shape class {other}"),
    };

    if class == "stripes" {
        let period = rng.range_i64(2, (side as i64 / 6).max(3)) as f64;
        let phase = rng.uniform(0.0, period);
        inside = Box::new(move |_, y| ((y + phase) / period).floor() as i64 % 2 == 0);
    }

    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let px = x as f64 + 0.5;
            let py = y as f64 + 0.5;
            let base = if inside(px, py) { fg } else { bg };
            let v = (base + rng.uniform(-0.03, 0.03)).clamp(0.0, 1.0);
            pixels.push([v, v, v]);
        }
    }
    Image::new(side, side, pixels).expect("dimensions are consistent")
}
