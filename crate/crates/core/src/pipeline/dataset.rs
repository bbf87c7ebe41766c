//! Grouped image-set ingestion.
//!
//! Every group becomes a `d × M` sample matrix whose columns are vectorized
//! images; pixel `(r, c)` of an `m × n` image lands at index `r·n + c`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::{read_gmat, read_idx_images, read_idx_labels, read_key_label_csv, read_matrix_csv, IdxImages};
use crate::error::{GlrrError, Result};

pub const LABELS_FILE: &str = "labels.csv";
pub const IDX_IMAGES_FILE: &str = "images.idx";
pub const GROUPS_FILE: &str = "groups.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct ImageSetGroup {
    pub id: String,
    pub label: usize,
    pub samples: DMatrix<f64>,
    /// File the group was read from, or `"synthetic"` / the IDX path.
    pub source: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// One `<group_id>.gmat` per group.
    GmatDir,
    /// `images.idx` (IDX3) plus `groups.csv` mapping `image_index,group_id`.
    IdxGrouped,
    /// One headerless `<group_id>.csv` matrix per group.
    CsvDir,
}

impl FromStr for DatasetFormat {
    type Err = GlrrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmat-dir" => Ok(DatasetFormat::GmatDir),
            "idx-grouped" => Ok(DatasetFormat::IdxGrouped),
            "csv-dir" => Ok(DatasetFormat::CsvDir),
            other => Err(GlrrError::Validation(format!("unknown dataset format `{other}`"))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::GmatDir => "gmat-dir",
            DatasetFormat::IdxGrouped => "idx-grouped",
            DatasetFormat::CsvDir => "csv-dir",
        })
    }
}

fn read_label_map(dir: &Path) -> Result<HashMap<String, usize>> {
    Ok(read_key_label_csv(&dir.join(LABELS_FILE))?.into_iter().collect())
}

/// Groups sorted by id; labels come from the `labels.csv` sidecar.
pub fn load_dataset(dir: &Path, format: DatasetFormat) -> Result<Vec<ImageSetGroup>> {
    let labels = read_label_map(dir)?;
    let groups = match format {
        DatasetFormat::GmatDir => load_matrix_dir(dir, "gmat", &labels, read_gmat)?,
        DatasetFormat::CsvDir => load_matrix_dir(dir, "csv", &labels, read_matrix_csv)?,
        DatasetFormat::IdxGrouped => load_idx_grouped(dir, &labels)?,
    };
    check_consistent(dir, &groups)?;
    Ok(groups)
}

fn check_consistent(dir: &Path, groups: &[ImageSetGroup]) -> Result<()> {
    let Some(first) = groups.first() else {
        return Err(GlrrError::format(dir, "dataset has no groups"));
    };
    let d = first.samples.nrows();
    for g in groups {
        if g.samples.nrows() != d {
            return Err(GlrrError::format(
                &g.source,
                format!("group `{}` has dimension {}, expected {d}", g.id, g.samples.nrows()),
            ));
        }
        if g.samples.ncols() == 0 {
            return Err(GlrrError::format(&g.source, format!("group `{}` has no samples", g.id)));
        }
    }
    Ok(())
}

fn load_matrix_dir(
    dir: &Path,
    ext: &str,
    labels: &HashMap<String, usize>,
    read: fn(&Path) -> Result<DMatrix<f64>>,
) -> Result<Vec<ImageSetGroup>> {
    let mut files: Vec<(String, PathBuf)> = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| GlrrError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| GlrrError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        // the label sidecar shares the csv extension
        if path.file_name().and_then(|n| n.to_str()) == Some(LABELS_FILE) {
            continue;
        }
        files.push((stem.to_string(), path));
    }
    files.sort();
    files
        .into_iter()
        .map(|(id, path)| {
            let label = *labels.get(&id).ok_or_else(|| GlrrError::MissingLabels(id.clone()))?;
            Ok(ImageSetGroup {
                samples: read(&path)?,
                source: path.display().to_string(),
                id,
                label,
            })
        })
        .collect()
}

/// Column vector of an image, `r·n + c` indexing, scaled to `[0, 1]`.
pub fn vectorize_image(pixels: &[u8]) -> impl Iterator<Item = f64> + '_ {
    pixels.iter().map(|&b| f64::from(b) / 255.0)
}

fn samples_from_images(images: &IdxImages, indices: &[usize]) -> DMatrix<f64> {
    let d = images.rows * images.cols;
    let mut m = DMatrix::zeros(d, indices.len());
    for (col, &i) in indices.iter().enumerate() {
        for (r, v) in vectorize_image(images.image(i)).enumerate() {
            m[(r, col)] = v;
        }
    }
    m
}

fn load_idx_grouped(dir: &Path, labels: &HashMap<String, usize>) -> Result<Vec<ImageSetGroup>> {
    let images_path = dir.join(IDX_IMAGES_FILE);
    let images = read_idx_images(&images_path)?;
    let groups_path = dir.join(GROUPS_FILE);
    let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let text = std::fs::read_to_string(&groups_path).map_err(|e| GlrrError::io(&groups_path, e))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(index), Some(group), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(GlrrError::format(&groups_path, format!("line {} must be image_index,group_id", lineno + 1)));
        };
        let index: usize = match index.parse() {
            Ok(i) => i,
            Err(_) if lineno == 0 => continue,
            Err(e) => return Err(GlrrError::format(&groups_path, format!("line {}: {e}", lineno + 1))),
        };
        if index >= images.count {
            return Err(GlrrError::format(
                &groups_path,
                format!("image index {index} out of range ({} images)", images.count),
            ));
        }
        members.entry(group.to_string()).or_default().push(index);
    }
    members
        .into_iter()
        .map(|(id, idx)| {
            let label = *labels.get(&id).ok_or_else(|| GlrrError::MissingLabels(id.clone()))?;
            Ok(ImageSetGroup {
                samples: samples_from_images(&images, &idx),
                source: images_path.display().to_string(),
                id,
                label,
            })
        })
        .collect()
}

/// Random subgroups of same-class images from raw MNIST IDX files: for each
/// class, shuffle its images with the seeded generator and cut the first
/// `groups_per_class · per_group` into consecutive groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistGrouping {
    pub images: PathBuf,
    pub labels: PathBuf,
    #[serde(default = "default_per_group")]
    pub per_group: usize,
    #[serde(default = "default_groups_per_class")]
    pub groups_per_class: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_per_group() -> usize {
    20
}

fn default_groups_per_class() -> usize {
    40
}

pub fn mnist_subgroups(spec: &MnistGrouping) -> Result<Vec<ImageSetGroup>> {
    let images = read_idx_images(&spec.images)?;
    let labels = read_idx_labels(&spec.labels)?;
    if labels.len() != images.count {
        return Err(GlrrError::format(
            &spec.labels,
            format!("{} labels for {} images", labels.len(), images.count),
        ));
    }
    let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let need = spec.per_group * spec.groups_per_class;
    let mut groups = Vec::new();
    for (class, mut idx) in by_class {
        if idx.len() < need {
            return Err(GlrrError::Validation(format!(
                "class {class} has {} images, need {need}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (g, chunk) in idx[..need].chunks(spec.per_group).enumerate() {
            groups.push(ImageSetGroup {
                id: format!("c{class}_g{g:03}"),
                label: class as usize,
                samples: samples_from_images(&images, chunk),
                source: spec.images.display().to_string(),
            });
        }
    }
    Ok(groups)
}
