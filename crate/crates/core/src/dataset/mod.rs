//! Labeled image datasets: directory-per-class ingestion, stratified
//! splitting, manifests, and a synthetic stand-in generator.

mod ppm;
mod resize;
mod synth;

pub use ppm::{decode_ppm, encode_ppm};
pub use resize::resize_bilinear;
pub use synth::{synth_shapes, SHAPE_CLASS_NAMES};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::SplitMix64;
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

/// One labeled example. `id` is a unique relative path like
/// `class_name/file.ppm`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub image: Image,
    pub label: usize,
}

/// An immutable labeled dataset with a fixed class-name table.
/// Items are kept sorted by id so iteration order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    items: Vec<LabeledImage>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(mut items: Vec<LabeledImage>, class_names: Vec<String>) -> Result<Self> {
        let unique: BTreeSet<&String> = class_names.iter().collect();
        if unique.len() != class_names.len() {
            return Err(Error::data("class names must be unique"));
        }
        for item in &items {
            if item.label >= class_names.len() {
                return Err(Error::data(format!(
                    "item {} has label {} but there are only {} classes",
                    item.id,
                    item.label,
                    class_names.len()
                )));
            }
        }
        items.sort_by(|a, b| a.id.cmp(&b.id));
        if items.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::data("item ids must be unique"));
        }
        Ok(Dataset { items, class_names })
    }

    pub fn items(&self) -> &[LabeledImage] {
        &self.items
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    /// Resizes every image to out_w × out_h.
    pub fn resize_all(&self, out_w: usize, out_h: usize) -> Result<Dataset> {
        let items = self
            .items
            .iter()
            .map(|item| {
                Ok(LabeledImage {
                    id: item.id.clone(),
                    image: resize_bilinear(&item.image, out_w, out_h)?,
                    label: item.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(items, self.class_names.clone())
    }

    /// Restricts to the named classes and relabels 0..n in the given
    /// class-name order.
    pub fn select_classes(&self, names: &[&str]) -> Result<Dataset> {
        let mut indices = Vec::with_capacity(names.len());
        for name in names {
            let idx = self
                .class_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::usage(format!("unknown class {name}")))?;
            indices.push(idx);
        }
        let items = self
            .items
            .iter()
            .filter_map(|item| {
                indices.iter().position(|&i| i == item.label).map(|new| {
                    LabeledImage {
                        id: item.id.clone(),
                        image: item.image.clone(),
                        label: new,
                    }
                })
            })
            .collect();
        Dataset::new(items, names.iter().map(|s| s.to_string()).collect())
    }
}

/// A file skipped during ingestion, with the reason.
#[derive(Debug, Clone)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

/// Ingestion result: the dataset plus a report of skipped files.
#[derive(Debug)]
pub struct IngestReport {
    pub dataset: Dataset,
    pub skipped: Vec<SkippedFile>,
}

/// Reads a `root/<class_name>/<image>.ppm` tree. Immediate
/// subdirectories become classes in lexicographic order; undecodable
/// files are skipped and reported rather than failing the ingest.
pub fn ingest_directory(root: &Path) -> Result<IngestReport> {
    let mut class_dirs: Vec<String> = Vec::new();
    let entries = fs::read_dir(root)
        .map_err(|e| Error::usage(format!("cannot read {}: {e}", root.display())))?;
    for entry in entries {
        let entry = entry?;
        // fs::metadata follows symlinks, so linked class dirs count too;
        // entries that cannot be stat'ed (broken links) are ignored
        if fs::metadata(entry.path()).map(|m| m.is_dir()).unwrap_or(false) {
            class_dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    class_dirs.sort_unstable();
    if class_dirs.is_empty() {
        return Err(Error::usage(format!(
            "{} contains no class subdirectories",
            root.display()
        )));
    }

    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (label, class) in class_dirs.iter().enumerate() {
        let dir = root.join(class);
        let mut files: Vec<String> = Vec::new();
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            match fs::metadata(entry.path()) {
                Ok(meta) if meta.is_file() => {
                    files.push(entry.file_name().to_string_lossy().into_owned());
                }
                Ok(_) => {}
                Err(e) => skipped.push(SkippedFile {
                    path: entry.path().display().to_string(),
                    reason: e.to_string(),
                }),
            }
        }
        files.sort_unstable();
        for file in files {
            let path = dir.join(&file);
            let bytes = fs::read(&path)?;
            match decode_ppm(&bytes) {
                Ok(image) => items.push(LabeledImage {
                    id: format!("{class}/{file}"),
                    image,
                    label,
                }),
                Err(e) => skipped.push(SkippedFile {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                }),
            }
        }
    }
    if items.is_empty() {
        return Err(Error::usage(format!(
            "{} contains no decodable images",
            root.display()
        )));
    }
    let dataset = Dataset::new(items, class_dirs)?;
    Ok(IngestReport { dataset, skipped })
}

/// Parameters for a train/test split.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64) -> Self {
        SplitSpec {
            test_fraction,
            seed,
            stratified: true,
        }
    }
}

/// Splits per class with a seeded shuffle: `test_fraction` of each
/// class (rounded, at least 1, at most n−1) goes to the test side.
/// The two sides are disjoint and their union is the input.
pub fn stratified_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::usage("test_fraction must be in (0, 1)"));
    }
    let mut rng = SplitMix64::new(spec.seed);
    let mut train_items = Vec::new();
    let mut test_items = Vec::new();

    let groups: Vec<Vec<usize>> = if spec.stratified {
        let mut groups = vec![Vec::new(); ds.class_names().len()];
        for (i, item) in ds.items().iter().enumerate() {
            groups[item.label].push(i);
        }
        groups.retain(|g| !g.is_empty());
        groups
    } else {
        vec![(0..ds.len()).collect()]
    };

    for mut group in groups {
        if group.len() < 2 {
            return Err(Error::usage(
                "every class needs at least 2 items to split",
            ));
        }
        rng.shuffle(&mut group);
        let n = group.len();
        let n_test = ((spec.test_fraction * n as f64).round() as usize).clamp(1, n - 1);
        for (k, idx) in group.into_iter().enumerate() {
            let item = ds.items()[idx].clone();
            if k < n_test {
                test_items.push(item);
            } else {
                train_items.push(item);
            }
        }
    }

    Ok((
        Dataset::new(train_items, ds.class_names().to_vec())?,
        Dataset::new(test_items, ds.class_names().to_vec())?,
    ))
}

/// Manifest CSV: `path,class_name,label_index`, one row per item.
pub fn manifest_csv(ds: &Dataset) -> String {
    let mut out = String::from("path,class_name,label_index\n");
    for item in ds.items() {
        out.push_str(&format!(
            "{},{},{}\n",
            item.id,
            ds.class_names()[item.label],
            item.label
        ));
    }
    out
}

/// Writes `bytes` to `path` atomically: a temp file in the same
/// directory, then a rename over the target.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the image tree `root/<class>/<file>.ppm`, one file per item.
pub fn save_images(ds: &Dataset, root: &Path) -> Result<()> {
    for item in ds.items() {
        write_file_atomic(&root.join(&item.id), &encode_ppm(&item.image))?;
    }
    Ok(())
}

/// Writes the dataset as a `root/<class>/<file>.ppm` tree plus a
/// `manifest.csv` at the root.
pub fn save_dataset(ds: &Dataset, root: &Path) -> Result<()> {
    save_images(ds, root)?;
    write_file_atomic(&root.join("manifest.csv"), manifest_csv(ds).as_bytes())
}
