//! Dataset manifest: a CSV with one row per sample, paths relative to the
//! manifest's directory, and the full scene description.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_labels, read_wav};
use crate::sim::{LabeledSample, RoomSpec, SceneSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "unknown split {s:?} (expected train, valid or test)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub split: Split,
    pub index: usize,
    pub wav: String,
    pub labels: String,
    pub sample_rate: u32,
    /// Category codes in playback order, e.g. `10-00-11-01`.
    pub order: String,
    pub peak_scale: f64,
    pub seed: u64,
    pub room_x: f64,
    pub room_y: f64,
    pub room_z: f64,
    pub t60: f64,
    pub sound_speed: f64,
    pub expert_x: f64,
    pub expert_y: f64,
    pub expert_z: f64,
    pub assistant_x: f64,
    pub assistant_y: f64,
    pub assistant_z: f64,
    pub mic_x: f64,
    pub mic_y: f64,
    pub mic_z: f64,
    pub power_ratio_db: f64,
    pub snr_db: f64,
}

impl ManifestRecord {
    pub fn scene(&self) -> SceneSpec {
        SceneSpec {
            room: RoomSpec {
                dims: [self.room_x, self.room_y, self.room_z],
                t60: self.t60,
                sound_speed: self.sound_speed,
            },
            expert_pos: [self.expert_x, self.expert_y, self.expert_z],
            assistant_pos: [self.assistant_x, self.assistant_y, self.assistant_z],
            mic_pos: [self.mic_x, self.mic_y, self.mic_z],
            power_ratio_db: self.power_ratio_db,
            snr_db: self.snr_db,
            seed: self.seed,
        }
    }

    pub fn set_scene(&mut self, s: &SceneSpec) {
        [self.room_x, self.room_y, self.room_z] = s.room.dims;
        self.t60 = s.room.t60;
        self.sound_speed = s.room.sound_speed;
        [self.expert_x, self.expert_y, self.expert_z] = s.expert_pos;
        [self.assistant_x, self.assistant_y, self.assistant_z] = s.assistant_pos;
        [self.mic_x, self.mic_y, self.mic_z] = s.mic_pos;
        self.power_ratio_db = s.power_ratio_db;
        self.snr_db = s.snr_db;
        self.seed = s.seed;
    }
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let path = path.as_ref();
    let fmt = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fmt)?;
    for r in records {
        w.serialize(r).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>> {
    let path = path.as_ref();
    let fmt = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(fmt)?;
    r.deserialize().map(|rec| rec.map_err(fmt)).collect()
}

/// Loads every sample of `split` listed in `manifest`, resolving paths
/// against the manifest's directory. Labels must tile the audio.
pub fn load_split(manifest: impl AsRef<Path>, split: Split) -> Result<Vec<LabeledSample>> {
    let manifest = manifest.as_ref();
    let root = manifest.parent().unwrap_or(Path::new("."));
    read_manifest(manifest)?
        .into_iter()
        .filter(|r| r.split == split)
        .map(|r| {
            let wav_path = root.join(&r.wav);
            let wav = read_wav(&wav_path)?;
            let segments = read_labels(root.join(&r.labels))?;
            let tiled = segments.first().is_some_and(|s| s.start == 0)
                && segments.windows(2).all(|w| w[0].end == w[1].start)
                && segments.last().is_some_and(|s| s.end == wav.samples.len());
            if !tiled {
                return Err(Error::Format {
                    path: root.join(&r.labels),
                    reason: format!(
                        "segments do not tile the {} samples of {}",
                        wav.samples.len(),
                        r.wav
                    ),
                });
            }
            Ok(LabeledSample {
                audio: wav.samples,
                segments,
                sample_rate: wav.sample_rate,
                peak_scale: r.peak_scale,
            })
        })
        .collect()
}
