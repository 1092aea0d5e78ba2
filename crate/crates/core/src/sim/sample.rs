//! Rendering utterances and assembling labelled 12 s samples.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{Clip, Corpora};
use super::mix::{fft_convolve, set_power};
use super::room::{image_source_rir, Position, RoomSpec};
use super::scene::SceneSpec;
use crate::model::Category;
use crate::{Error, Result};

pub const UTTERANCE_SECONDS: f64 = 3.0;

/// Mean-square level of the reverberant expert (RMS 0.03).
pub const REFERENCE_POWER: f64 = 0.03 * 0.03;

/// Peak level applied when a mix would clip.
pub const PEAK_TARGET: f64 = 0.9;

/// A run of one category over samples `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub category: Category,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub audio: Vec<f32>,
    pub segments: Vec<Segment>,
    pub sample_rate: u32,
    /// Gain applied by peak normalisation (1 when none was needed).
    pub peak_scale: f64,
}

impl LabeledSample {
    pub fn duration(&self) -> f64 {
        self.audio.len() as f64 / self.sample_rate as f64
    }

    /// Category covering sample `index` (segments are half-open).
    pub fn category_at(&self, index: usize) -> Option<Category> {
        self.segments
            .iter()
            .find(|s| s.start <= index && index < s.end)
            .map(|s| s.category)
    }

    /// Playback order as `10-00-11-01`.
    pub fn order_code(&self) -> String {
        self.segments
            .iter()
            .map(|s| s.category.code())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Impulse responses for the two talkers of a scene.
#[derive(Clone, Debug)]
pub struct SceneRirs {
    pub expert: Arc<Vec<f64>>,
    pub assistant: Arc<Vec<f64>>,
}

/// Memoises impulse responses by geometry; grid scenes reuse a few dozen.
#[derive(Debug, Default)]
pub struct RirCache {
    map: Mutex<HashMap<Vec<u64>, Arc<Vec<f64>>>>,
}

impl RirCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        room: &RoomSpec,
        source: Position,
        mic: Position,
        sample_rate: u32,
    ) -> Result<Arc<Vec<f64>>> {
        let key: Vec<u64> = room
            .dims
            .iter()
            .chain([&room.t60, &room.sound_speed])
            .chain(&source)
            .chain(&mic)
            .map(|v| v.to_bits())
            .chain([sample_rate as u64])
            .collect();
        if let Some(r) = self.map.lock().expect("rir cache poisoned").get(&key) {
            return Ok(r.clone());
        }
        let rir = Arc::new(image_source_rir(room, source, mic, sample_rate)?);
        self.map
            .lock()
            .expect("rir cache poisoned")
            .insert(key, rir.clone());
        Ok(rir)
    }

    pub fn scene(&self, scene: &SceneSpec, sample_rate: u32) -> Result<SceneRirs> {
        Ok(SceneRirs {
            expert: self.get(&scene.room, scene.expert_pos, scene.mic_pos, sample_rate)?,
            assistant: self.get(&scene.room, scene.assistant_pos, scene.mic_pos, sample_rate)?,
        })
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("rir cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The scaled components of one utterance and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub mix: Vec<f64>,
    pub expert: Option<Vec<f64>>,
    pub assistant: Option<Vec<f64>>,
    pub noise: Vec<f64>,
}

/// Random `n`-sample excerpt of `clip`.
pub fn crop(clip: &Clip, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if clip.samples.len() < n {
        return Err(Error::Simulation(format!(
            "corpus clip {} has {} samples, at least {n} are needed",
            clip.name,
            clip.samples.len()
        )));
    }
    let off = rng.gen_range(0..=clip.samples.len() - n);
    Ok(clip.samples[off..off + n].to_vec())
}

/// Renders one 3 s utterance of `category`.
///
/// The reverberant expert is set to [`REFERENCE_POWER`]; the reverberant
/// assistant sits `power_ratio_db` above that; noise sits `snr_db` below it
/// whether or not the expert is actually talking.
#[allow(clippy::too_many_arguments)]
pub fn render_utterance<R: Rng>(
    category: Category,
    expert_dry: &Clip,
    assistant_dry: &Clip,
    noise: &Clip,
    scene: &SceneSpec,
    rirs: &SceneRirs,
    sample_rate: u32,
    rng: &mut R,
) -> Result<Rendered> {
    let n = (UTTERANCE_SECONDS * sample_rate as f64).round() as usize;
    let wet = |clip: &Clip, rir: &[f64], power: f64, rng: &mut R| -> Result<Vec<f64>> {
        let dry = crop(clip, n, rng)?;
        let mut w = fft_convolve(&dry, rir, n);
        set_power(&mut w, power)?;
        Ok(w)
    };
    let expert = category
        .expert()
        .then(|| wet(expert_dry, &rirs.expert, REFERENCE_POWER, rng))
        .transpose()?;
    let assistant_power = REFERENCE_POWER * 10f64.powf(scene.power_ratio_db / 10.0);
    let assistant = category
        .assistant()
        .then(|| wet(assistant_dry, &rirs.assistant, assistant_power, rng))
        .transpose()?;
    let mut noise = crop(noise, n, rng)?;
    set_power(
        &mut noise,
        REFERENCE_POWER * 10f64.powf(-scene.snr_db / 10.0),
    )?;
    let mut mix = noise.clone();
    for part in [&expert, &assistant].into_iter().flatten() {
        for (m, v) in mix.iter_mut().zip(part) {
            *m += v;
        }
    }
    Ok(Rendered {
        mix,
        expert,
        assistant,
        noise,
    })
}

/// Renders all four categories in a seed-determined order and concatenates
/// them into one labelled sample.
pub fn make_sample(
    corpora: &Corpora,
    scene: &SceneSpec,
    cache: &RirCache,
) -> Result<LabeledSample> {
    scene.validate()?;
    corpora.check_nonempty()?;
    let sr = corpora.sample_rate;
    let rirs = cache.scene(scene, sr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let mut order = Category::ALL;
    order.shuffle(&mut rng);
    let n = (UTTERANCE_SECONDS * sr as f64).round() as usize;
    let mut mix = Vec::with_capacity(4 * n);
    let mut segments = Vec::with_capacity(4);
    for (k, &cat) in order.iter().enumerate() {
        let e = &corpora.expert[rng.gen_range(0..corpora.expert.len())];
        let a = &corpora.assistant[rng.gen_range(0..corpora.assistant.len())];
        let z = &corpora.noise[rng.gen_range(0..corpora.noise.len())];
        let r = render_utterance(cat, e, a, z, scene, &rirs, sr, &mut rng)?;
        mix.extend_from_slice(&r.mix);
        segments.push(Segment {
            category: cat,
            start: k * n,
            end: (k + 1) * n,
        });
    }
    let peak = mix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let peak_scale = if peak > 1.0 { PEAK_TARGET / peak } else { 1.0 };
    Ok(LabeledSample {
        audio: mix.iter().map(|&v| (v * peak_scale) as f32).collect(),
        segments,
        sample_rate: sr,
        peak_scale,
    })
}
