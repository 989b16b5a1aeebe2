//! Synthetic attribute-lookup QA corpus.
//!
//! Each sample's caption lists two object-attribute facts (one queried, one
//! distractor), the question asks for one attribute of one object, the
//! options enumerate candidate values, and the ground-truth rationale is a
//! templated two-sentence explanation. Feature vectors are deterministic
//! pseudo-embeddings of the caption facts; every tenth sample has no image
//! and gets an empty feature reference.

use crate::dataset::{write_dataset, write_feature_vec, Sample};
use crate::error::Result;
use crate::rng::{substream, text_seed};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

const OBJECTS: [&str; 12] = [
    "ball", "cube", "lamp", "chair", "book", "bottle", "coin", "kite", "plant", "mug", "drum",
    "shell",
];

const ATTRIBUTES: [(&str, &[&str]); 5] = [
    ("color", &["red", "blue", "green", "yellow", "purple", "orange"]),
    ("size", &["tiny", "small", "medium", "large", "huge"]),
    ("material", &["wood", "metal", "glass", "plastic", "stone"]),
    ("texture", &["smooth", "rough", "fuzzy", "glossy"]),
    ("shape", &["round", "square", "oval", "flat"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub train: usize,
    pub test: usize,
    pub feat_dim: usize,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            train: 500,
            test: 100,
            feat_dim: 16,
            seed: 0,
        }
    }
}

/// Generated samples plus their feature vectors, keyed by sample id.
#[derive(Debug, Clone)]
pub struct CorpusBundle {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub features: Vec<(String, Vec<f32>)>,
}

pub fn generate_corpus(cfg: &CorpusConfig) -> CorpusBundle {
    let mut seen = HashSet::new();
    let mut features = Vec::new();
    let train = generate_split(cfg, "train", cfg.train, &mut seen, &mut features);
    let test = generate_split(cfg, "test", cfg.test, &mut seen, &mut features);
    CorpusBundle {
        train,
        test,
        features,
    }
}

fn generate_split(
    cfg: &CorpusConfig,
    split: &str,
    count: usize,
    seen: &mut HashSet<String>,
    features: &mut Vec<(String, Vec<f32>)>,
) -> Vec<Sample> {
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let id = format!("{}-{:04}", split, i);
        let mut rng = substream(cfg.seed, &format!("corpus/{}/{}", split, i));
        let sample = loop {
            let candidate = draw_sample(&id, cfg, &mut rng, features);
            let signature = format!(
                "{}|{}|{}",
                candidate.question,
                candidate.caption,
                candidate.options.join(",")
            );
            if seen.insert(signature) {
                break candidate;
            }
            features.retain(|(fid, _)| fid != &id);
        };
        samples.push(sample);
    }
    samples
}

fn draw_sample(
    id: &str,
    cfg: &CorpusConfig,
    rng: &mut ChaCha8Rng,
    features: &mut Vec<(String, Vec<f32>)>,
) -> Sample {
    let obj1 = OBJECTS[rng.gen_range(0..OBJECTS.len())];
    let obj2 = loop {
        let candidate = OBJECTS[rng.gen_range(0..OBJECTS.len())];
        if candidate != obj1 {
            break candidate;
        }
    };
    let (attr1, values1) = ATTRIBUTES[rng.gen_range(0..ATTRIBUTES.len())];
    let (attr2, values2) = ATTRIBUTES[rng.gen_range(0..ATTRIBUTES.len())];
    let val1 = values1[rng.gen_range(0..values1.len())];
    let val2 = values2[rng.gen_range(0..values2.len())];

    let caption = format!(
        "The image shows a {} and a {}. The {} has {} {}. The {} has {} {}.",
        obj1, obj2, obj1, attr1, val1, obj2, attr2, val2
    );
    let question = format!("What is the {} of the {}?", attr1, obj1);
    let rationale_gt = format!(
        "The caption states that the {} has {} {}. Therefore the {} of the {} is {}.",
        obj1, attr1, val1, attr1, obj1, val1
    );

    let option_count = 4.min(values1.len());
    let mut distractors: Vec<&str> = values1.iter().copied().filter(|v| *v != val1).collect();
    distractors.shuffle(rng);
    let mut options: Vec<String> = distractors[..option_count - 1]
        .iter()
        .map(|v| v.to_string())
        .collect();
    options.push(val1.to_string());
    options.shuffle(rng);
    let answer_index = options.iter().position(|v| v == val1).expect("val present");

    // Every tenth sample has no image: empty reference, zero feature.
    let sample_index: usize = id
        .rsplit('-')
        .next()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let image_feature_ref = if sample_index % 10 == 9 {
        String::new()
    } else {
        let feature = fact_feature(&caption, cfg.feat_dim);
        features.push((id.to_string(), feature));
        format!("features/{}.bin", id)
    };

    Sample {
        id: id.to_string(),
        image_feature_ref,
        question,
        options,
        caption,
        answer_index,
        rationale_gt,
    }
}

/// Deterministic pseudo-embedding of the caption text.
fn fact_feature(caption: &str, dim: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(text_seed(caption));
    (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect()
}

/// Where a written corpus lives on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub feature_dir: PathBuf,
}

/// Write the bundle under `dir`: train.jsonl, test.jsonl, features/*.bin.
/// Feature references inside the samples are relative to `dir`.
pub fn write_corpus(bundle: &CorpusBundle, dir: &Path) -> Result<CorpusPaths> {
    let feature_dir = dir.join("features");
    std::fs::create_dir_all(&feature_dir)
        .map_err(|e| crate::error::MindError::io(&feature_dir, e))?;
    for (id, values) in &bundle.features {
        write_feature_vec(feature_dir.join(format!("{}.bin", id)), values)?;
    }
    let train = dir.join("train.jsonl");
    let test = dir.join("test.jsonl");
    write_dataset(&bundle.train, &train)?;
    write_dataset(&bundle.test, &test)?;
    Ok(CorpusPaths {
        train,
        test,
        feature_dir,
    })
}
