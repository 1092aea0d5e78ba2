//! Classroom scene simulation: room impulse responses, level-controlled
//! mixing and labelled dataset generation.

mod corpus;
mod dataset;
mod mix;
mod room;
mod sample;
mod scene;

pub use corpus::{Clip, Corpora, SyntheticCorpus, CORPUS_DIRS};
pub use dataset::{generate_dataset, generate_sample, sample_seed, DatasetCounts, MANIFEST_FILE};
pub use mix::{db, fft_convolve, power, scale_to_snr, set_power, snr_gain, SILENCE_POWER};
pub use room::{
    distance, image_source_rir, image_source_rir_with, sabine_absorption, schroeder_t60,
    schroeder_t60_reverberant, Position, RirOptions, RoomSpec, HIGHPASS_HZ, MIN_SOURCE_DISTANCE,
    SINC_TAPS,
};
pub use sample::{
    crop, make_sample, render_utterance, LabeledSample, Rendered, RirCache, SceneRirs, Segment,
    PEAK_TARGET, REFERENCE_POWER, UTTERANCE_SECONDS,
};
pub use scene::{GridAxis, SceneGrid, SceneSpec, MIC_DROP};
