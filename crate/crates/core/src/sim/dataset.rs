//! Whole-dataset generation: per-sample scenes drawn from a grid, rendered
//! in parallel, written as WAV + label pairs with a CSV manifest.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::corpus::Corpora;
use super::sample::{make_sample, LabeledSample, RirCache};
use super::scene::SceneGrid;
use crate::io::{write_labels, write_manifest, write_wav, ManifestRecord, Split, WavFile};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl DatasetCounts {
    pub fn new(train: usize, valid: usize, test: usize) -> Self {
        Self { train, valid, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }

    /// Split and within-split index of global sample `i`.
    pub fn locate(&self, i: usize) -> (Split, usize) {
        if i < self.train {
            (Split::Train, i)
        } else if i < self.train + self.valid {
            (Split::Valid, i - self.train)
        } else {
            (Split::Test, i - self.train - self.valid)
        }
    }
}

/// SplitMix64 finaliser applied to `seed + index`; gives each sample an
/// independent stream.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws the scene for global sample `index` and renders it.
pub fn generate_sample(
    corpora: &Corpora,
    grid: &SceneGrid,
    seed: u64,
    index: usize,
    cache: &RirCache,
) -> Result<(LabeledSample, crate::sim::SceneSpec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, index as u64));
    let scene_seed = rng.gen::<u64>();
    let scene = grid.sample(&mut rng, scene_seed);
    Ok((make_sample(corpora, &scene, cache)?, scene))
}

/// Renders `counts` samples into `out_dir/{train,valid,test}/` and writes
/// `out_dir/manifest.csv`. Returns the manifest records.
pub fn generate_dataset(
    corpora: &Corpora,
    grid: &SceneGrid,
    counts: DatasetCounts,
    out_dir: impl AsRef<Path>,
    seed: u64,
) -> Result<Vec<ManifestRecord>> {
    let out_dir = out_dir.as_ref();
    grid.validate()?;
    corpora.check_nonempty()?;
    if counts.total() == 0 {
        return Err(Error::Simulation("dataset counts are all zero".into()));
    }
    for split in Split::ALL {
        let d = out_dir.join(split.name());
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let cache = RirCache::new();
    let records = (0..counts.total())
        .into_par_iter()
        .map(|i| {
            let (split, index) = counts.locate(i);
            let (sample, scene) = generate_sample(corpora, grid, seed, i, &cache)?;
            let stem = format!("{}/sample_{index:05}", split.name());
            let wav = format!("{stem}.wav");
            let labels = format!("{stem}.labels.txt");
            write_wav(
                out_dir.join(&wav),
                &WavFile::new(sample.sample_rate, sample.audio.clone()),
            )?;
            write_labels(out_dir.join(&labels), &sample.segments)?;
            let mut rec = ManifestRecord {
                split,
                index,
                wav,
                labels,
                sample_rate: sample.sample_rate,
                order: sample.order_code(),
                peak_scale: sample.peak_scale,
                seed: 0,
                room_x: 0.0,
                room_y: 0.0,
                room_z: 0.0,
                t60: 0.0,
                sound_speed: 0.0,
                expert_x: 0.0,
                expert_y: 0.0,
                expert_z: 0.0,
                assistant_x: 0.0,
                assistant_y: 0.0,
                assistant_z: 0.0,
                mic_x: 0.0,
                mic_y: 0.0,
                mic_z: 0.0,
                power_ratio_db: 0.0,
                snr_db: 0.0,
            };
            rec.set_scene(&scene);
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(out_dir.join(MANIFEST_FILE), &records)?;
    Ok(records)
}
