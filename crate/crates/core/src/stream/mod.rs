//! Sliding-window inference: one decision per hop slot, tagged to the
//! middle frame of its window.

mod session;
mod track;

pub use session::StreamingSession;
pub use track::{
    decisions_to_segments, read_segments, segments_to_slots, write_decisions, write_segments,
    Decision, DecisionTrack, TimedSegment,
};

use rayon::prelude::*;

use crate::model::{Category, Mstcn};
use crate::{Error, Result};

pub const DEFAULT_WINDOW_SECONDS: f64 = 3.0;
pub const DEFAULT_HOP_SECONDS: f64 = 0.1;

/// Window and hop converted to whole samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotGrid {
    pub window: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl SlotGrid {
    pub fn new(window_seconds: f64, hop_seconds: f64, sample_rate: u32) -> Result<Self> {
        let sr = sample_rate as f64;
        let window = (window_seconds * sr).round();
        let hop = (hop_seconds * sr).round();
        if !(window >= 1.0 && window.is_finite()) {
            return Err(Error::Invalid(format!(
                "window of {window_seconds} s is shorter than one sample"
            )));
        }
        if !(hop >= 1.0 && hop.is_finite()) {
            return Err(Error::Invalid(format!(
                "hop of {hop_seconds} s is shorter than one sample"
            )));
        }
        Ok(Self {
            window: window as usize,
            hop: hop as usize,
            sample_rate,
        })
    }

    pub fn hop_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate as f64
    }

    /// Slots covering `len` samples: `ceil(len / hop)`.
    pub fn slot_count(&self, len: usize) -> usize {
        len.div_ceil(self.hop)
    }

    pub fn timestamp(&self, slot: usize) -> f64 {
        (slot * self.hop) as f64 / self.sample_rate as f64
    }

    /// Start sample of the window centred on `slot`, if it fits in `len`.
    pub fn window_start(&self, slot: usize, len: usize) -> Option<usize> {
        let centre = slot * self.hop;
        let half = self.window / 2;
        let start = centre.checked_sub(half)?;
        (start + self.window <= len).then_some(start)
    }

    /// Slots whose centred window fits entirely inside `len` samples.
    pub fn interior(&self, len: usize) -> std::ops::Range<usize> {
        let first = (self.window / 2).div_ceil(self.hop);
        let mut end = first;
        while self.window_start(end, len).is_some() {
            end += 1;
        }
        first..end
    }
}

/// Offline inference over a whole recording. Slots whose centred window
/// would cross either end copy the nearest interior decision; when no slot
/// centre admits a full window, the leading window stands in for all.
pub fn infer_offline(
    model: &Mstcn<f32>,
    audio: &[f32],
    window_seconds: f64,
    hop_seconds: f64,
) -> Result<DecisionTrack> {
    let grid = SlotGrid::new(window_seconds, hop_seconds, model.config().sample_rate)?;
    if audio.len() < grid.window {
        return Err(Error::AudioTooShort {
            found: audio.len(),
            min: grid.window,
        });
    }
    let interior = grid.interior(audio.len());
    let computed: Vec<(Category, [f32; 2])> = if interior.is_empty() {
        vec![model.classify_window(&audio[..grid.window])?]
    } else {
        interior
            .clone()
            .into_par_iter()
            .map(|k| {
                let s = grid.window_start(k, audio.len()).expect("interior slot");
                model.classify_window(&audio[s..s + grid.window])
            })
            .collect::<Result<_>>()?
    };
    Ok(DecisionTrack::from_interior(
        grid,
        audio.len(),
        interior.start,
        &computed,
    ))
}
