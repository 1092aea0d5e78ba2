//! Scene descriptions and the parameter grid they are drawn from.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::room::{Position, RoomSpec};
use crate::{Error, Result};

/// The microphone hangs this far below the assistant's mouth.
pub const MIC_DROP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: RoomSpec,
    pub expert_pos: Position,
    pub assistant_pos: Position,
    pub mic_pos: Position,
    /// Assistant over expert, dB.
    pub power_ratio_db: f64,
    /// Expert over noise, dB.
    pub snr_db: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Scene with the microphone placed [`MIC_DROP`] below the assistant.
    pub fn new(
        room: RoomSpec,
        expert_pos: Position,
        assistant_pos: Position,
        power_ratio_db: f64,
        snr_db: f64,
        seed: u64,
    ) -> Self {
        let [x, y, z] = assistant_pos;
        Self {
            room,
            expert_pos,
            assistant_pos,
            mic_pos: [x, y, z - MIC_DROP],
            power_ratio_db,
            snr_db,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        for (what, p) in [
            ("expert", self.expert_pos),
            ("assistant", self.assistant_pos),
            ("microphone", self.mic_pos),
        ] {
            if !self.room.contains(p) {
                return Err(Error::Simulation(format!(
                    "{what} position {p:?} is outside room {:?}",
                    self.room.dims
                )));
            }
        }
        if (self.assistant_pos[2] - MIC_DROP - self.mic_pos[2]).abs() > 1e-9 {
            return Err(Error::Simulation(format!(
                "microphone must sit {MIC_DROP} m below the assistant (z {} vs {})",
                self.mic_pos[2], self.assistant_pos[2]
            )));
        }
        if !(self.power_ratio_db.is_finite() && self.snr_db.is_finite()) {
            return Err(Error::Simulation("levels must be finite".into()));
        }
        Ok(())
    }
}

/// Evenly spaced values `start, start+step, …` (`count` of them).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(start: f64, step: f64, count: usize) -> Self {
        Self { start, step, count }
    }

    /// Axis from `min` to `max` inclusive.
    pub fn span(min: f64, max: f64, step: f64) -> Self {
        let count = if step > 0.0 {
            ((max - min) / step + 1e-9).floor() as usize + 1
        } else {
            1
        };
        Self::new(min, step, count)
    }

    pub fn fixed(value: f64) -> Self {
        Self::new(value, 0.0, 1)
    }

    /// Value `i`, rounded to micro-units so grid points print cleanly.
    pub fn value(&self, i: usize) -> f64 {
        ((self.start + self.step * i as f64) * 1e6).round() / 1e6
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.value(i)).collect()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        self.value(rng.gen_range(0..self.count))
    }
}

/// Axes that scene parameters are drawn from uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGrid {
    pub room_dims: [f64; 3],
    pub sound_speed: f64,
    pub t60: GridAxis,
    pub snr_db: GridAxis,
    pub power_ratio_db: GridAxis,
    pub assistant_x: GridAxis,
    pub assistant_y: f64,
    pub assistant_z: f64,
    pub expert_pos: Position,
}

impl SceneGrid {
    /// Classroom grid: T60 0.4–0.9 s, SNR 5–15 dB, ratio 3–12 dB, assistant
    /// x 0.5–4.5 m at y 1.0, z 1.6; expert fixed at (2.5, 0.5, 2.0).
    pub fn classroom() -> Self {
        Self {
            room_dims: [5.0, 6.0, 3.5],
            sound_speed: RoomSpec::DEFAULT_SOUND_SPEED,
            t60: GridAxis::span(0.4, 0.9, 0.1),
            snr_db: GridAxis::span(5.0, 15.0, 1.0),
            power_ratio_db: GridAxis::span(3.0, 12.0, 1.0),
            assistant_x: GridAxis::span(0.5, 4.5, 0.5),
            assistant_y: 1.0,
            assistant_z: 1.6,
            expert_pos: [2.5, 0.5, 2.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [
            ("t60", self.t60),
            ("snr_db", self.snr_db),
            ("power_ratio_db", self.power_ratio_db),
            ("assistant_x", self.assistant_x),
        ] {
            if axis.count == 0
                || !axis.start.is_finite()
                || !axis.step.is_finite()
                || axis.step < 0.0
            {
                return Err(Error::Simulation(format!(
                    "grid axis {name} is empty or malformed"
                )));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng, seed: u64) -> SceneSpec {
        let room = RoomSpec {
            dims: self.room_dims,
            t60: self.t60.sample(rng),
            sound_speed: self.sound_speed,
        };
        let assistant = [
            self.assistant_x.sample(rng),
            self.assistant_y,
            self.assistant_z,
        ];
        let snr = self.snr_db.sample(rng);
        let ratio = self.power_ratio_db.sample(rng);
        SceneSpec::new(room, self.expert_pos, assistant, ratio, snr, seed)
    }
}
