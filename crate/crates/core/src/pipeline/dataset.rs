use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_err, PipelineError};
use crate::imaging::{generate_synthetic, load_image, GrayImage, SynthKind, SynthParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    /// One sub-directory per class holding PGM/PNG images.
    Directory { root: PathBuf },
    /// The built-in four-class corpus.
    Synthetic { per_class: usize, size: usize, seed: u64 },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic { per_class: 20, size: 64, seed: 7 }
    }
}

/// Labelled images held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub class_names: Vec<String>,
    pub images: Vec<GrayImage>,
    pub labels: Vec<usize>,
    /// File name or synthetic identifier of each image.
    pub names: Vec<String>,
}

impl Dataset {
    pub fn load(source: &DatasetSource) -> Result<Self, PipelineError> {
        match source {
            DatasetSource::Synthetic { per_class, size, seed } => synthetic_corpus(*per_class, *size, *seed),
            DatasetSource::Directory { root } => Self::from_directory(root),
        }
    }

    fn from_directory(root: &std::path::Path) -> Result<Self, PipelineError> {
        let mut classes: Vec<PathBuf> = std::fs::read_dir(root)
            .map_err(io_err(root))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        classes.sort();
        let mut files = Vec::new();
        let mut class_names = Vec::new();
        for dir in &classes {
            let mut imgs: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(io_err(dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.extension()
                        .and_then(|e| e.to_str())
                        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "png"))
                })
                .collect();
            if imgs.is_empty() {
                continue;
            }
            imgs.sort();
            let label = class_names.len();
            class_names.push(dir.file_name().unwrap_or_default().to_string_lossy().into_owned());
            files.extend(imgs.into_iter().map(|p| (p, label)));
        }
        if class_names.len() < 2 {
            return Err(PipelineError::Dataset(format!("{}: need at least two class directories with images", root.display())));
        }
        let images = files.par_iter().map(|(p, _)| load_image(p)).collect::<Result<Vec<_>, _>>()?;
        let names = files.iter().map(|(p, _)| p.strip_prefix(root).unwrap_or(p).display().to_string()).collect();
        Ok(Dataset { class_names, images, labels: files.iter().map(|f| f.1).collect(), names })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// Members of each class, in dataset order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.class_count()];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }

    pub fn check_train_size(&self, train_per_class: usize) -> Result<(), PipelineError> {
        for (c, m) in self.members().iter().enumerate() {
            if train_per_class >= m.len() {
                return Err(PipelineError::Config(format!(
                    "class `{}` has {} images; train size {train_per_class} leaves no test image",
                    self.class_names[c],
                    m.len()
                )));
            }
        }
        Ok(())
    }
}

pub const SYNTHETIC_CLASSES: [&str; 4] = ["stripes", "checkerboard", "blobs-fine", "blobs-coarse"];

/// Four texture classes with random orientation, phase and noise per image.
pub fn synthetic_corpus(per_class: usize, size: usize, seed: u64) -> Result<Dataset, PipelineError> {
    use rand::{Rng, SeedableRng};
    let mut out = Dataset { class_names: SYNTHETIC_CLASSES.map(String::from).to_vec(), images: vec![], labels: vec![], names: vec![] };
    for (label, class) in SYNTHETIC_CLASSES.iter().enumerate() {
        for i in 0..per_class {
            let image_seed = seed.wrapping_mul(1_000_003).wrapping_add((label * 10_000 + i) as u64);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(image_seed);
            let mut p = SynthParams {
                width: size,
                height: size,
                orientation_deg: rng.gen_range(0.0..180.0),
                noise: 10,
                random_phase: true,
                ..SynthParams::default()
            };
            let kind = match label {
                0 => {
                    p.period = rng.gen_range(7.0..9.0);
                    SynthKind::Stripes
                }
                1 => {
                    p.period = rng.gen_range(7.0..9.0);
                    SynthKind::Checkerboard
                }
                2 => {
                    p.period = rng.gen_range(4.0..6.0);
                    SynthKind::Blobs
                }
                _ => {
                    p.period = rng.gen_range(11.0..14.0);
                    SynthKind::Blobs
                }
            };
            out.images.push(generate_synthetic(kind, &p, rng.gen())?);
            out.labels.push(label);
            out.names.push(format!("{class}/{i:03}"));
        }
    }
    Ok(out)
}
