use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SlotGrid;
use crate::model::Category;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    /// Middle-frame time of the slot in seconds.
    pub timestamp: f64,
    pub category: Category,
    /// `[assistant, expert]`.
    pub probs: [f32; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrack {
    pub hop_seconds: f64,
    pub duration_seconds: f64,
    pub decisions: Vec<Decision>,
}

impl DecisionTrack {
    /// Expands decisions for slots `first..first + computed.len()` to every
    /// slot covering `len` samples by edge replication.
    pub(crate) fn from_interior(
        grid: SlotGrid,
        len: usize,
        first: usize,
        computed: &[(Category, [f32; 2])],
    ) -> Self {
        let last = first + computed.len() - 1;
        let decisions = (0..grid.slot_count(len))
            .map(|k| {
                let (category, probs) = computed[k.clamp(first, last) - first];
                Decision {
                    timestamp: grid.timestamp(k),
                    category,
                    probs,
                }
            })
            .collect();
        Self {
            hop_seconds: grid.hop_seconds(),
            duration_seconds: len as f64 / grid.sample_rate as f64,
            decisions,
        }
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn categories(&self) -> Vec<Category> {
        self.decisions.iter().map(|d| d.category).collect()
    }

    /// `timestamp_s,category,prob_assistant,prob_expert` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for d in &self.decisions {
            let _ = writeln!(
                out,
                "{:.4},{},{:.6},{:.6}",
                d.timestamp,
                d.category.code(),
                d.probs[0],
                d.probs[1]
            );
        }
        out
    }
}

/// A run of identical decisions, `[start, end)` in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedSegment {
    pub start: f64,
    pub end: f64,
    pub category: Category,
}

/// Merges consecutive equal decisions; each slot spans from its timestamp to
/// the next one (the last to the end of the audio).
pub fn decisions_to_segments(track: &DecisionTrack) -> Vec<TimedSegment> {
    let mut out: Vec<TimedSegment> = Vec::new();
    for (k, d) in track.decisions.iter().enumerate() {
        let end = track
            .decisions
            .get(k + 1)
            .map_or(track.duration_seconds, |n| n.timestamp);
        match out.last_mut() {
            Some(seg) if seg.category == d.category => seg.end = end,
            _ => out.push(TimedSegment {
                start: d.timestamp,
                end,
                category: d.category,
            }),
        }
    }
    out
}

/// Category of the segment containing each timestamp.
pub fn segments_to_slots(segments: &[TimedSegment], timestamps: &[f64]) -> Result<Vec<Category>> {
    timestamps
        .iter()
        .map(|&t| {
            segments
                .iter()
                .find(|s| s.start <= t && t < s.end)
                .map(|s| s.category)
                .ok_or_else(|| Error::Invalid(format!("no segment covers {t} s")))
        })
        .collect()
}

pub fn write_decisions(path: impl AsRef<Path>, track: &DecisionTrack) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, track.to_text()).map_err(|e| Error::io(path, e))
}

/// `start_s,end_s,category` per line.
pub fn write_segments(path: impl AsRef<Path>, segments: &[TimedSegment]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for s in segments {
        let _ = writeln!(out, "{:.4},{:.4},{}", s.start, s.end, s.category.code());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_segments(path: impl AsRef<Path>) -> Result<Vec<TimedSegment>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, why: &str| Error::Format {
        path: path.to_path_buf(),
        reason: format!("line {line}: {why}"),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.trim().split(',').collect();
            if f.len() != 3 {
                return Err(bad(i + 1, "expected start_s,end_s,category"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "bad time"));
            Ok(TimedSegment {
                start: num(f[0])?,
                end: num(f[1])?,
                category: f[2].parse().map_err(|_| bad(i + 1, "bad category"))?,
            })
        })
        .collect()
}
