//! Source material: directories of dry WAV clips, and a synthetic stand-in
//! for speech and classroom noise.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::{read_wav, write_wav, WavFile};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    /// Where the clip came from, used in error messages.
    pub name: String,
    pub samples: Vec<f64>,
}

impl Clip {
    pub fn new(name: impl Into<String>, samples: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            samples,
        }
    }
}

/// Expert, assistant and noise clips at one sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpora {
    pub sample_rate: u32,
    pub expert: Vec<Clip>,
    pub assistant: Vec<Clip>,
    pub noise: Vec<Clip>,
}

pub const CORPUS_DIRS: [&str; 3] = ["expert", "assistant", "noise"];

impl Corpora {
    /// Reads `dir/expert`, `dir/assistant` and `dir/noise`, each a directory
    /// of mono 16-bit WAVs, in sorted path order.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut kinds = Vec::with_capacity(3);
        let mut rate: Option<(u32, String)> = None;
        for kind in CORPUS_DIRS {
            let sub = dir.join(kind);
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&sub)
                .map_err(|e| Error::io(&sub, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Error::Simulation(format!(
                    "empty corpus directory {}",
                    sub.display()
                )));
            }
            let mut clips = Vec::with_capacity(paths.len());
            for p in paths {
                let wav = read_wav(&p)?;
                let name = p.display().to_string();
                match &rate {
                    None => rate = Some((wav.sample_rate, name.clone())),
                    Some((r, first)) if *r != wav.sample_rate => {
                        return Err(Error::Simulation(format!(
                            "{name} has sample rate {} Hz but {first} has {r} Hz",
                            wav.sample_rate
                        )));
                    }
                    _ => {}
                }
                clips.push(Clip::new(
                    name,
                    wav.samples.iter().map(|&s| s as f64).collect(),
                ));
            }
            kinds.push(clips);
        }
        let noise = kinds.pop().unwrap_or_default();
        let assistant = kinds.pop().unwrap_or_default();
        let expert = kinds.pop().unwrap_or_default();
        Ok(Self {
            sample_rate: rate.map_or(0, |r| r.0),
            expert,
            assistant,
            noise,
        })
    }

    /// Writes the corpus in the layout [`Corpora::load`] reads.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (kind, clips) in CORPUS_DIRS
            .iter()
            .zip([&self.expert, &self.assistant, &self.noise])
        {
            let sub = dir.join(kind);
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            for (i, c) in clips.iter().enumerate() {
                let wav = WavFile::new(
                    self.sample_rate,
                    c.samples.iter().map(|&s| s as f32).collect(),
                );
                write_wav(sub.join(format!("{kind}_{i:03}.wav")), &wav)?;
            }
        }
        Ok(())
    }

    pub fn check_nonempty(&self) -> Result<()> {
        for (kind, clips) in CORPUS_DIRS
            .iter()
            .zip([&self.expert, &self.assistant, &self.noise])
        {
            if clips.is_empty() {
                return Err(Error::Simulation(format!("empty corpus: no {kind} clips")));
            }
        }
        Ok(())
    }
}

/// Parameters of the synthetic corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub sample_rate: u32,
    pub clips_per_kind: usize,
    pub seconds: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpus {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            clips_per_kind: 4,
            seconds: 4.0,
            seed: 0,
        }
    }
}

/// (F1, F2) pairs in Hz for a handful of vowels.
const VOWELS: [(f64, f64); 5] = [
    (730.0, 1090.0),
    (270.0, 2290.0),
    (300.0, 870.0),
    (530.0, 1840.0),
    (570.0, 840.0),
];

/// Harmonic "speech": a glottal-like harmonic series with gliding pitch,
/// vowel formants that change per syllable, and a syllabic envelope.
fn voice(rng: &mut ChaCha8Rng, sr: f64, n: usize, f0: f64, formant_shift: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let glide = (rng.gen_range(0.3..0.9), rng.gen_range(0.0..2.0 * PI));
    let mut phase = 0.0f64;
    let mut t_next = 0.0;
    let mut syl_start = 0.0;
    let mut syl_len = 0.25;
    let mut vowel = VOWELS[0];
    let mut gains = vec![0.0; 0];
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        if t >= t_next {
            syl_start = t;
            syl_len = rng.gen_range(0.15..0.35);
            t_next = t + syl_len;
            vowel = VOWELS[rng.gen_range(0..VOWELS.len())];
            gains.clear();
        }
        let f = f0 * (1.0 + 0.06 * (2.0 * PI * glide.0 * t + glide.1).sin());
        let harmonics = ((4000.0 / f) as usize).max(1);
        if gains.len() != harmonics {
            gains = (1..=harmonics)
                .map(|k| {
                    let fk = k as f64 * f0;
                    let res =
                        |fc: f64, bw: f64| 1.0 / (1.0 + ((fk - fc * formant_shift) / bw).powi(2));
                    (0.15 + res(vowel.0, 90.0) + 0.7 * res(vowel.1, 120.0)) / k as f64
                })
                .collect();
        }
        phase += 2.0 * PI * f / sr;
        if phase > 2.0 * PI {
            phase -= 2.0 * PI;
        }
        let s: f64 = gains
            .iter()
            .enumerate()
            .map(|(k, g)| g * ((k + 1) as f64 * phase).sin())
            .sum();
        let x = (t - syl_start) / syl_len;
        let env = 0.3 + 0.7 * (PI * x).sin().max(0.0);
        *o = s * env;
    }
    normalize_peak(&mut out, 0.5);
    out
}

/// Low-passed noise with a slow loudness drift and a faint mains hum.
fn ambience(rng: &mut ChaCha8Rng, sr: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let cutoff = rng.gen_range(400.0..1500.0);
    let a = (-2.0 * PI * cutoff / sr).exp();
    let hum = rng.gen_range(0.02..0.06);
    let drift = rng.gen_range(0.1..0.4);
    let mut lp = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let w: f64 = rng.gen_range(-1.0..1.0);
        lp = a * lp + (1.0 - a) * w;
        let level = 1.0 + 0.3 * (2.0 * PI * drift * t).sin();
        *o = lp * level + hum * (2.0 * PI * 50.0 * t).sin() + 0.05 * w;
    }
    normalize_peak(&mut out, 0.5);
    out
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

impl SyntheticCorpus {
    /// Expert voices sit around 100–130 Hz, assistant voices around
    /// 200–250 Hz with shifted formants.
    pub fn generate(&self) -> Corpora {
        let sr = self.sample_rate as f64;
        let n = (self.seconds * sr).round() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut make = |kind: &str, f: &mut dyn FnMut(&mut ChaCha8Rng) -> Vec<f64>| {
            (0..self.clips_per_kind)
                .map(|i| Clip::new(format!("synthetic/{kind}_{i:03}"), f(&mut rng)))
                .collect::<Vec<_>>()
        };
        let expert = make("expert", &mut |r| {
            let f0 = r.gen_range(100.0..130.0);
            voice(r, sr, n, f0, 1.0)
        });
        let assistant = make("assistant", &mut |r| {
            let f0 = r.gen_range(200.0..250.0);
            voice(r, sr, n, f0, 1.2)
        });
        let noise = make("noise", &mut |r| ambience(r, sr, n));
        Corpora {
            sample_rate: self.sample_rate,
            expert,
            assistant,
            noise,
        }
    }
}
