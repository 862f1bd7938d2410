//! Deterministic image augmentation: rotate ±30°, seeded translation,
//! brightness, and horizontal flip. Expanding a dataset yields the
//! original plus five variants per image — a 6× expansion.

use crate::dataset::{Dataset, LabeledImage};
use crate::error::{Error, Result};
use crate::image::{Image, Rgb, BLACK};
use crate::rng::{derive_seed, SplitMix64};

/// Augmentation parameters. Defaults: ±30° rotation, translations up to
/// 10% of each dimension, brightness ×1.25, black fill.
#[derive(Debug, Clone)]
pub struct AugmentSpec {
    pub rotation_degrees: f64,
    pub translation_fraction: f64,
    pub lighting_factor: f64,
    pub fill: Rgb,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            rotation_degrees: 30.0,
            translation_fraction: 0.1,
            lighting_factor: 1.25,
            fill: BLACK,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.translation_fraction >= 0.0 && self.translation_fraction <= 0.5) {
            return Err(Error::usage("translation_fraction must be in [0, 0.5]"));
        }
        if !self.lighting_factor.is_finite() || self.lighting_factor <= 0.0 {
            return Err(Error::usage("lighting_factor must be > 0"));
        }
        Ok(())
    }
}

/// The fixed variant vocabulary, in generation order.
pub const VARIANT_NAMES: [&str; 6] = ["orig", "rot+30", "rot-30", "trans", "light", "flip"];

/// Rotates about the image center with bilinear sampling; samples that
/// fall outside the frame read as `fill`. Output dimensions equal input
/// dimensions. `degrees = 0` reproduces the input bitwise.
pub fn rotate(img: &Image, degrees: f64, fill: Rgb) -> Image {
    let (w, h) = (img.width(), img.height());
    let theta = degrees.to_radians();
    let (sin, cos) = (theta.sin(), theta.cos());
    let cx = (w - 1) as f64 / 2.0;
    let cy = (h - 1) as f64 / 2.0;

    let sample = |x: isize, y: isize| -> Rgb {
        if x >= 0 && (x as usize) < w && y >= 0 && (y as usize) < h {
            img.get(x as usize, y as usize)
        } else {
            fill
        }
    };

    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            // inverse mapping: rotate the output offset by −θ
            let sx = cx + dx * cos + dy * sin;
            let sy = cy - dx * sin + dy * cos;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let p00 = sample(x0 as isize, y0 as isize);
            let p10 = sample(x0 as isize + 1, y0 as isize);
            let p01 = sample(x0 as isize, y0 as isize + 1);
            let p11 = sample(x0 as isize + 1, y0 as isize + 1);
            let mut px = [0.0; 3];
            for c in 0..3 {
                let top = p00[c] + fx * (p10[c] - p00[c]);
                let bottom = p01[c] + fx * (p11[c] - p01[c]);
                px[c] = top + fy * (bottom - top);
            }
            pixels.push(px);
        }
    }
    Image::new(w, h, pixels).expect("dimensions preserved")
}

/// Shifts content by (dx, dy): output (x, y) reads source (x−dx, y−dy),
/// out-of-frame reads `fill`. Shifts as large as the image are rejected.
pub fn translate(img: &Image, dx: i64, dy: i64, fill: Rgb) -> Result<Image> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    if dx.abs() >= w || dy.abs() >= h {
        return Err(Error::usage(format!(
            "translation ({dx}, {dy}) exceeds image dimensions {w}x{h}"
        )));
    }
    let mut out = Image::filled(img.width(), img.height(), fill);
    for y in 0..h {
        for x in 0..w {
            let sx = x - dx;
            let sy = y - dy;
            if sx >= 0 && sx < w && sy >= 0 && sy < h {
                out.set(x as usize, y as usize, img.get(sx as usize, sy as usize));
            }
        }
    }
    Ok(out)
}

/// Multiplies every channel by `factor`, clamping at 1.
pub fn adjust_lighting(img: &Image, factor: f64) -> Result<Image> {
    if !factor.is_finite() || factor <= 0.0 {
        return Err(Error::usage("lighting factor must be > 0"));
    }
    let pixels = img
        .pixels()
        .iter()
        .map(|px| [
            (px[0] * factor).min(1.0),
            (px[1] * factor).min(1.0),
            (px[2] * factor).min(1.0),
        ])
        .collect();
    Ok(Image::new(img.width(), img.height(), pixels).expect("dimensions preserved"))
}

/// Mirrors left-right: column x swaps with column width−1−x.
pub fn flip_horizontal(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            pixels.push(img.get(w - 1 - x, y));
        }
    }
    Image::new(w, h, pixels).expect("dimensions preserved")
}

/// One output row of the augmentation manifest.
#[derive(Debug, Clone)]
pub struct AugmentRecord {
    pub output_id: String,
    pub source_id: String,
    pub variant: &'static str,
    pub label: usize,
}

/// Expands a dataset 6×: each image yields itself plus rotate(+deg),
/// rotate(−deg), a seeded translation, a brightness change, and a
/// horizontal flip. Labels are preserved; each output id is
/// `<class>/<source-stem>__<variant>.ppm`. The translation draw for an
/// image depends only on (seed, source id), never on other images.
pub fn augment_dataset(ds: &Dataset, spec: &AugmentSpec, seed: u64) -> Result<Dataset> {
    Ok(augment_dataset_with_records(ds, spec, seed)?.0)
}

pub fn augment_dataset_with_records(
    ds: &Dataset,
    spec: &AugmentSpec,
    seed: u64,
) -> Result<(Dataset, Vec<AugmentRecord>)> {
    spec.validate()?;
    if ds.is_empty() {
        return Err(Error::usage("cannot augment an empty dataset"));
    }
    let mut items = Vec::with_capacity(6 * ds.len());
    let mut records = Vec::with_capacity(6 * ds.len());
    for item in ds.items() {
        let mut rng = SplitMix64::new(derive_seed(seed, &item.id));
        let max_dx = (spec.translation_fraction * item.image.width() as f64).floor() as i64;
        let max_dy = (spec.translation_fraction * item.image.height() as f64).floor() as i64;
        let dx = rng.range_i64(-max_dx, max_dx);
        let dy = rng.range_i64(-max_dy, max_dy);

        let variants: [(usize, Image); 6] = [
            (0, item.image.clone()),
            (1, rotate(&item.image, spec.rotation_degrees, spec.fill)),
            (2, rotate(&item.image, -spec.rotation_degrees, spec.fill)),
            (3, translate(&item.image, dx, dy, spec.fill)?),
            (4, adjust_lighting(&item.image, spec.lighting_factor)?),
            (5, flip_horizontal(&item.image)),
        ];

        let (class_dir, stem) = split_id(&item.id);
        for (v, image) in variants {
            let variant = VARIANT_NAMES[v];
            let output_id = match class_dir {
                Some(dir) => format!("{dir}/{stem}__{variant}.ppm"),
                None => format!("{stem}__{variant}.ppm"),
            };
            records.push(AugmentRecord {
                output_id: output_id.clone(),
                source_id: item.id.clone(),
                variant,
                label: item.label,
            });
            items.push(LabeledImage {
                id: output_id,
                image,
                label: item.label,
            });
        }
    }
    records.sort_by(|a, b| a.output_id.cmp(&b.output_id));
    let dataset = Dataset::new(items, ds.class_names().to_vec())?;
    Ok((dataset, records))
}

/// Augmentation manifest CSV: `output_path,source_path,variant,label`.
pub fn augment_manifest_csv(records: &[AugmentRecord]) -> String {
    let mut out = String::from("output_path,source_path,variant,label\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.output_id, r.source_id, r.variant, r.label
        ));
    }
    out
}

/// Splits `class/stem.ext` into (Some(class), stem); ids without a
/// directory part give (None, stem).
fn split_id(id: &str) -> (Option<&str>, &str) {
    let (dir, file) = match id.rsplit_once('/') {
        Some((dir, file)) => (Some(dir), file),
        None => (None, id),
    };
    let stem = file.rsplit_once('.').map(|(s, _)| s).unwrap_or(file);
    (dir, stem)
}
