use super::{Decision, DecisionTrack, SlotGrid};
use crate::model::{Category, Mstcn};
use crate::{Error, Result};

/// Incremental inference over a live feed. Keeps only the samples still
/// needed by upcoming windows and emits each slot's decision as soon as its
/// window is complete, so a decision lags its timestamp by half a window.
pub struct StreamingSession<'m> {
    model: &'m Mstcn<f32>,
    grid: SlotGrid,
    /// Absolute index of `buffer[0]`.
    offset: usize,
    buffer: Vec<f32>,
    received: usize,
    first_slot: usize,
    next_slot: usize,
    emitted: Vec<(Category, [f32; 2])>,
    closed: bool,
}

impl<'m> StreamingSession<'m> {
    pub fn new(model: &'m Mstcn<f32>, window_seconds: f64, hop_seconds: f64) -> Result<Self> {
        if !model.config().causal {
            return Err(Error::Config(
                "streaming inference needs a causal model".into(),
            ));
        }
        let grid = SlotGrid::new(window_seconds, hop_seconds, model.config().sample_rate)?;
        let first_slot = (grid.window / 2).div_ceil(grid.hop);
        Ok(Self {
            model,
            grid,
            offset: 0,
            buffer: Vec::new(),
            received: 0,
            first_slot,
            next_slot: first_slot,
            emitted: Vec::new(),
            closed: false,
        })
    }

    pub fn grid(&self) -> SlotGrid {
        self.grid
    }

    pub fn samples_received(&self) -> usize {
        self.received
    }

    /// Appends audio and returns the decisions it completed.
    pub fn push(&mut self, samples: &[f32]) -> Result<Vec<Decision>> {
        if self.closed {
            return Err(Error::StreamClosed);
        }
        self.buffer.extend_from_slice(samples);
        self.received += samples.len();
        let mut out = Vec::new();
        while let Some(start) = self.grid.window_start(self.next_slot, self.received) {
            let local = start - self.offset;
            let (category, probs) = self
                .model
                .classify_window(&self.buffer[local..local + self.grid.window])?;
            self.emitted.push((category, probs));
            out.push(Decision {
                timestamp: self.grid.timestamp(self.next_slot),
                category,
                probs,
            });
            self.next_slot += 1;
            self.trim();
        }
        Ok(out)
    }

    fn trim(&mut self) {
        let keep_from = (self.next_slot * self.grid.hop).saturating_sub(self.grid.window / 2);
        if keep_from > self.offset {
            let drop = (keep_from - self.offset).min(self.buffer.len());
            self.buffer.drain(..drop);
            self.offset += drop;
        }
    }

    /// Ends the feed and returns the full track, edge slots replicated as
    /// in offline inference.
    pub fn close(&mut self) -> Result<DecisionTrack> {
        if self.closed {
            return Err(Error::StreamClosed);
        }
        self.closed = true;
        if self.received < self.grid.window {
            return Err(Error::AudioTooShort {
                found: self.received,
                min: self.grid.window,
            });
        }
        if self.emitted.is_empty() {
            // No slot centre admits a full window; only happens before any
            // trimming, so the leading window is still buffered.
            self.emitted.push(
                self.model
                    .classify_window(&self.buffer[..self.grid.window])?,
            );
            return Ok(DecisionTrack::from_interior(
                self.grid,
                self.received,
                0,
                &self.emitted,
            ));
        }
        Ok(DecisionTrack::from_interior(
            self.grid,
            self.received,
            self.first_slot,
            &self.emitted,
        ))
    }
}
