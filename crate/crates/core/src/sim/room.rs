//! Shoebox room acoustics: Sabine absorption, Allen–Berkley image-source
//! impulse responses and Schroeder decay analysis.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SINC_TAPS: usize = 81;

/// Closest a source may sit to the microphone, in metres.
pub const MIN_SOURCE_DISTANCE: f64 = 0.005;

pub type Position = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dims: [f64; 3],
    pub t60: f64,
    pub sound_speed: f64,
}

impl RoomSpec {
    pub const DEFAULT_SOUND_SPEED: f64 = 343.0;

    pub fn new(dims: [f64; 3], t60: f64) -> Self {
        Self {
            dims,
            t60,
            sound_speed: Self::DEFAULT_SOUND_SPEED,
        }
    }

    /// The 5.0 × 6.0 × 3.5 m classroom.
    pub fn classroom(t60: f64) -> Self {
        Self::new([5.0, 6.0, 3.5], t60)
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::Simulation(format!(
                "room dims must be positive, got {:?}",
                self.dims
            )));
        }
        if !(0.05..=3.0).contains(&self.t60) {
            return Err(Error::Simulation(format!(
                "t60 {} s outside 0.05–3.0 s",
                self.t60
            )));
        }
        if !(self.sound_speed.is_finite() && self.sound_speed > 0.0) {
            return Err(Error::Simulation(format!(
                "sound speed must be positive, got {}",
                self.sound_speed
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: Position) -> bool {
        p.iter().zip(&self.dims).all(|(&v, &d)| v > 0.0 && v < d)
    }

    fn check_inside(&self, what: &str, p: Position) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Simulation(format!(
                "{what} position {p:?} is outside room {:?}",
                self.dims
            )))
        }
    }
}

/// Uniform wall absorption from the Sabine relation `0.161·V / (S·T60)`.
pub fn sabine_absorption(room: &RoomSpec) -> Result<f64> {
    room.validate()?;
    let alpha = 0.161 * room.volume() / (room.surface() * room.t60);
    if alpha > 1.0 {
        return Err(Error::Simulation(format!(
            "t60 {} s is infeasible for room {:?}: absorption {alpha:.3} exceeds 1",
            room.t60, room.dims
        )));
    }
    Ok(alpha)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RirOptions {
    /// When false only the direct path is rendered.
    pub reflections: bool,
    /// Allen–Berkley 100 Hz high-pass. Without it the all-positive image sum
    /// accumulates a low-frequency component that stretches the decay.
    pub highpass: bool,
}

impl Default for RirOptions {
    fn default() -> Self {
        Self {
            reflections: true,
            highpass: true,
        }
    }
}

pub fn distance(a: Position, b: Position) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One virtual source: arrival in samples, `1/d`, and wall hits.
#[derive(Clone, Copy, Debug)]
struct Image {
    delay: f64,
    inv_dist: f64,
    reflections: u32,
}

/// Room impulse response from `source` to `mic`, `ceil(t60·fs)` samples long.
pub fn image_source_rir(
    room: &RoomSpec,
    source: Position,
    mic: Position,
    sample_rate: u32,
) -> Result<Vec<f64>> {
    image_source_rir_with(room, source, mic, sample_rate, RirOptions::default())
}

pub fn image_source_rir_with(
    room: &RoomSpec,
    source: Position,
    mic: Position,
    sample_rate: u32,
    options: RirOptions,
) -> Result<Vec<f64>> {
    let alpha = sabine_absorption(room)?;
    room.check_inside("source", source)?;
    room.check_inside("microphone", mic)?;
    let direct = distance(source, mic);
    if direct < MIN_SOURCE_DISTANCE {
        return Err(Error::Simulation(format!(
            "source is {direct:.4} m from the microphone, minimum is {MIN_SOURCE_DISTANCE} m"
        )));
    }
    let len = (room.t60 * sample_rate as f64).ceil() as usize;
    let images = collect_images(room, source, mic, sample_rate, options.reflections);
    let beta = (1.0 - alpha).sqrt();
    let window = hann_window();
    let mut rir = vec![0.0; len];
    let max_k = images.iter().map(|i| i.reflections).max().unwrap_or(0);
    let pow: Vec<f64> = (0..=max_k).map(|k| beta.powi(k as i32)).collect();
    for im in &images {
        render_tap(
            &mut rir,
            im.delay,
            pow[im.reflections as usize] * im.inv_dist,
            &window,
        );
    }
    if options.highpass {
        highpass(&mut rir, sample_rate as f64, HIGHPASS_HZ);
    }
    Ok(rir)
}

/// Allen–Berkley lattice of images whose path is at most `t60·c`. Along one
/// axis the image for lattice index `n` and mirror flag `q` sits at
/// `(1 − 2q)·s + 2nL` and has hit `|n − q| + |n|` walls.
fn collect_images(
    room: &RoomSpec,
    source: Position,
    mic: Position,
    sample_rate: u32,
    reflections: bool,
) -> Vec<Image> {
    let samples_per_metre = sample_rate as f64 / room.sound_speed;
    let image = |d: f64, k: i64| Image {
        delay: d * samples_per_metre,
        inv_dist: 1.0 / d,
        reflections: k as u32,
    };
    if !reflections {
        return vec![image(distance(source, mic), 0)];
    }
    let max_path = room.t60 * room.sound_speed;
    let axis_terms = |axis: usize| -> Vec<(f64, i64)> {
        let (s, m, l) = (source[axis], mic[axis], room.dims[axis]);
        let n_max = (max_path / (2.0 * l)).ceil() as i64 + 1;
        let mut v = Vec::with_capacity((4 * n_max + 2) as usize);
        for n in -n_max..=n_max {
            for q in 0..2i64 {
                let img = (1 - 2 * q) as f64 * s + 2.0 * n as f64 * l;
                v.push((img - m, (n - q).abs() + n.abs()));
            }
        }
        v
    };
    let (xs, ys, zs) = (axis_terms(0), axis_terms(1), axis_terms(2));
    let max_sq = max_path * max_path;
    let mut out = Vec::new();
    for &(dx, rx) in &xs {
        let dx2 = dx * dx;
        if dx2 > max_sq {
            continue;
        }
        for &(dy, ry) in &ys {
            let dxy2 = dx2 + dy * dy;
            if dxy2 > max_sq {
                continue;
            }
            for &(dz, rz) in &zs {
                let d2 = dxy2 + dz * dz;
                if d2 <= max_sq {
                    out.push(image(d2.sqrt(), rx + ry + rz));
                }
            }
        }
    }
    out
}

pub const HIGHPASS_HZ: f64 = 100.0;

/// The two-pole, two-zero DC blocker from Allen & Berkley's appendix.
fn highpass(x: &mut [f64], fs: f64, cutoff: f64) {
    let w = 2.0 * std::f64::consts::PI * cutoff / fs;
    let r1 = (-w).exp();
    let (b1, b2, a1) = (2.0 * r1 * w.cos(), -r1 * r1, -(1.0 + r1));
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for v in x.iter_mut() {
        let x0 = *v;
        let y0 = x0 + a1 * x1 + r1 * x2 + b1 * y1 + b2 * y2;
        (x2, x1, y2, y1) = (x1, x0, y1, y0);
        *v = y0;
    }
}

fn hann_window() -> [f64; SINC_TAPS] {
    let half = (SINC_TAPS / 2) as f64;
    std::array::from_fn(|i| {
        let x = (i as f64 - half) / (half + 1.0);
        0.5 * (1.0 + (std::f64::consts::PI * x).cos())
    })
}

/// Adds `gain·δ(t − delay)` band-limited by a Hann-windowed sinc centred on
/// the nearest sample.
fn render_tap(rir: &mut [f64], delay: f64, gain: f64, window: &[f64; SINC_TAPS]) {
    use std::f64::consts::PI;
    let centre = delay.round();
    let frac = delay - centre;
    let half = (SINC_TAPS / 2) as i64;
    let base = centre as i64 - half;
    if frac.abs() < 1e-9 {
        let i = centre as usize;
        if i < rir.len() {
            rir[i] += gain;
        }
        return;
    }
    // sin(π(j − f)) = −(−1)^j·sin(πf) for integer j.
    let s = (PI * frac).sin();
    for (k, &w) in window.iter().enumerate() {
        let idx = base + k as i64;
        if idx < 0 {
            continue;
        }
        let Some(slot) = rir.get_mut(idx as usize) else {
            break;
        };
        let j = k as i64 - half;
        let x = j as f64 - frac;
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        *slot += gain * w * sign * s / (PI * x);
    }
}

/// Reverberation time from Schroeder backward integration: a least-squares
/// line through the energy decay curve between −5 and −35 dB, extrapolated
/// to −60 dB. `None` when the curve never reaches −35 dB.
pub fn schroeder_t60(rir: &[f64], sample_rate: u32) -> Option<f64> {
    let energy: Vec<f64> = rir.iter().map(|h| h * h).collect();
    t30_from_energy(&energy, sample_rate)
}

/// [`schroeder_t60`] of the response after the direct sound: everything up
/// to half a sinc kernel past `direct_delay` samples is dropped. Near-field
/// responses are otherwise dominated by the direct path.
pub fn schroeder_t60_reverberant(rir: &[f64], sample_rate: u32, direct_delay: f64) -> Option<f64> {
    let skip = (direct_delay.round() as usize + SINC_TAPS / 2 + 1).min(rir.len());
    let energy: Vec<f64> = rir
        .iter()
        .enumerate()
        .map(|(i, h)| if i < skip { 0.0 } else { h * h })
        .collect();
    t30_from_energy(&energy, sample_rate)
}

fn t30_from_energy(energy: &[f64], sample_rate: u32) -> Option<f64> {
    let mut edc = vec![0.0; energy.len()];
    let mut acc = 0.0;
    for (e, &h) in edc.iter_mut().zip(energy).rev() {
        acc += h;
        *e = acc;
    }
    let total = *edc.first()?;
    if total <= 0.0 {
        return None;
    }
    let db: Vec<f64> = edc.iter().map(|&e| 10.0 * (e / total).log10()).collect();
    let start = db.iter().position(|&d| d <= -5.0)?;
    let end = db.iter().position(|&d| d <= -35.0)?;
    if end <= start + 1 {
        return None;
    }
    let fs = sample_rate as f64;
    let n = (end - start + 1) as f64;
    let (mut st, mut sd, mut stt, mut std_) = (0.0, 0.0, 0.0, 0.0);
    for (i, &d) in db.iter().enumerate().take(end + 1).skip(start) {
        let t = i as f64 / fs;
        st += t;
        sd += d;
        stt += t * t;
        std_ += t * d;
    }
    let slope = (n * std_ - st * sd) / (n * stt - st * st);
    (slope < 0.0).then(|| -60.0 / slope)
}
