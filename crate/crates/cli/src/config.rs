//! Flat run configuration: defaults, then a TOML file, then flags.

use std::path::Path;

use mstcn_core::model::{FeaturesMode, ModelConfig, NormMode, OutputActivation};
use mstcn_core::sim::{DatasetCounts, GridAxis, SceneGrid, SyntheticCorpus};
use mstcn_core::train::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    pub filter_len: usize,
    pub stride: usize,
    pub filters: usize,
    pub bottleneck_channels: usize,
    pub skip_channels: usize,
    pub hidden_channels: usize,
    pub kernel_size: usize,
    pub blocks_per_repeat: usize,
    pub repeats: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub classes: usize,
    pub threshold: f32,
    pub sample_rate: u32,
    pub norm_mode: NormMode,
    pub causal: bool,
    pub features_mode: FeaturesMode,
    pub output_activation: OutputActivation,

    pub epochs: usize,
    pub patience: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub batch_size: usize,
    pub window_seconds: f64,
    pub window_hop_seconds: f64,
    /// 0 disables jitter.
    pub jitter_step_seconds: f64,
    /// 0 disables the accuracy stop.
    pub target_accuracy: f64,

    pub room_dims: [f64; 3],
    pub sound_speed: f64,
    /// `[first, last, step]`.
    pub t60: [f64; 3],
    pub snr_db: [f64; 3],
    pub power_ratio_db: [f64; 3],
    pub assistant_x: [f64; 3],
    pub assistant_y: f64,
    pub assistant_z: f64,
    pub expert_pos: [f64; 3],
    /// Train, validation and test sample counts.
    pub counts: [usize; 3],
    /// Synthetic corpus used when `simulate` gets no `--corpus`.
    pub corpus_clips: usize,
    pub corpus_seconds: f64,

    pub hop_seconds: f64,
    pub streaming: bool,
    pub eval_split: String,
}

fn axis_span(a: GridAxis) -> [f64; 3] {
    let last = a.start + a.step * (a.count.saturating_sub(1)) as f64;
    [a.start, (last * 1e6).round() / 1e6, a.step]
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::full();
        let t = TrainConfig::default();
        let g = SceneGrid::classroom();
        let c = SyntheticCorpus::default();
        Self {
            seed: 0,
            filter_len: m.filter_len,
            stride: m.stride,
            filters: m.filters,
            bottleneck_channels: m.bottleneck_channels,
            skip_channels: m.skip_channels,
            hidden_channels: m.hidden_channels,
            kernel_size: m.kernel_size,
            blocks_per_repeat: m.blocks_per_repeat,
            repeats: m.repeats,
            hidden1: m.hidden1,
            hidden2: m.hidden2,
            classes: m.classes,
            threshold: m.threshold,
            sample_rate: m.sample_rate,
            norm_mode: m.norm_mode,
            causal: m.causal,
            features_mode: m.features_mode,
            output_activation: m.output_activation,
            epochs: t.epochs,
            patience: t.patience,
            lr_start: t.lr_start,
            lr_end: t.lr_end,
            batch_size: t.batch_size,
            window_seconds: t.window_seconds,
            window_hop_seconds: t.window_hop_seconds,
            jitter_step_seconds: 0.0,
            target_accuracy: 0.0,
            room_dims: g.room_dims,
            sound_speed: g.sound_speed,
            t60: axis_span(g.t60),
            snr_db: axis_span(g.snr_db),
            power_ratio_db: axis_span(g.power_ratio_db),
            assistant_x: axis_span(g.assistant_x),
            assistant_y: g.assistant_y,
            assistant_z: g.assistant_z,
            expert_pos: g.expert_pos,
            counts: [8, 2, 2],
            corpus_clips: c.clips_per_kind,
            corpus_seconds: c.seconds,
            hop_seconds: 0.1,
            streaming: false,
            eval_split: "test".into(),
        }
    }
}

/// Raised while resolving configuration; maps to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn defaults_table() -> Table {
    Table::try_from(RunConfig::default()).expect("defaults serialize")
}

/// Every configuration key, in declaration order.
pub fn keys() -> Vec<String> {
    let mut keys: Vec<String> = defaults_table().keys().cloned().collect();
    let order: Vec<&str> = KEY_ORDER.to_vec();
    keys.sort_by_key(|k| order.iter().position(|o| o == k).unwrap_or(usize::MAX));
    keys
}

const KEY_ORDER: &[&str] = &[
    "seed",
    "filter_len",
    "stride",
    "filters",
    "bottleneck_channels",
    "skip_channels",
    "hidden_channels",
    "kernel_size",
    "blocks_per_repeat",
    "repeats",
    "hidden1",
    "hidden2",
    "classes",
    "threshold",
    "sample_rate",
    "norm_mode",
    "causal",
    "features_mode",
    "output_activation",
    "epochs",
    "patience",
    "lr_start",
    "lr_end",
    "batch_size",
    "window_seconds",
    "window_hop_seconds",
    "jitter_step_seconds",
    "target_accuracy",
    "room_dims",
    "sound_speed",
    "t60",
    "snr_db",
    "power_ratio_db",
    "assistant_x",
    "assistant_y",
    "assistant_z",
    "expert_pos",
    "counts",
    "corpus_clips",
    "corpus_seconds",
    "hop_seconds",
    "streaming",
    "eval_split",
];

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// Parses a flag's text as the type of the key's default value.
fn flag_value(key: &str, text: &str, default: &Value) -> anyhow::Result<Value> {
    let literal = match default {
        Value::String(_) => return Ok(Value::String(text.to_string())),
        Value::Array(_) => format!("[{}]", text.trim_start_matches('[').trim_end_matches(']')),
        _ => text.to_string(),
    };
    let parsed: Table = format!("v = {literal}")
        .parse()
        .map_err(|_| usage(format!("--{}: cannot parse {text:?}", flag_name(key))))?;
    Ok(widen(default, parsed["v"].clone()))
}

/// Integers given for real-valued keys become floats.
fn widen(default: &Value, v: Value) -> Value {
    match (default, v) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Array(d), Value::Array(items)) if d.first().is_some_and(Value::is_float) => {
            Value::Array(
                items
                    .into_iter()
                    .map(|x| match x {
                        Value::Integer(i) => Value::Float(i as f64),
                        other => other,
                    })
                    .collect(),
            )
        }
        (_, v) => v,
    }
}

fn check_keys(table: &Table, source: &str) -> anyhow::Result<()> {
    let known = defaults_table();
    let unknown: Vec<&String> = table.keys().filter(|k| !known.contains_key(*k)).collect();
    if !unknown.is_empty() {
        let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
        return Err(usage(format!(
            "unknown configuration key(s) in {source}: {}",
            names.join(", ")
        )));
    }
    Ok(())
}

/// Merges defaults < `file` < `flags` (key, raw text) into a checked config.
pub fn resolve(file: Option<&Path>, flags: &[(String, String)]) -> anyhow::Result<RunConfig> {
    let mut table = defaults_table();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let overlay: Table = text
            .parse()
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        check_keys(&overlay, &path.display().to_string())?;
        for (k, v) in overlay {
            let widened = widen(&table[&k], v);
            table.insert(k, widened);
        }
    }
    for (key, text) in flags {
        let default = table
            .get(key)
            .cloned()
            .ok_or_else(|| usage(format!("unknown flag --{}", flag_name(key))))?;
        table.insert(key.clone(), flag_value(key, text, &default)?);
    }
    let config: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("invalid configuration: {}", e.message())))?;
    config.check()?;
    Ok(config)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        let table = Table::try_from(self).expect("config serializes");
        let mut out = String::new();
        for key in keys() {
            out.push_str(&format!("{key} = {}\n", table[&key]));
        }
        out
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            filter_len: self.filter_len,
            stride: self.stride,
            filters: self.filters,
            bottleneck_channels: self.bottleneck_channels,
            skip_channels: self.skip_channels,
            hidden_channels: self.hidden_channels,
            kernel_size: self.kernel_size,
            blocks_per_repeat: self.blocks_per_repeat,
            repeats: self.repeats,
            hidden1: self.hidden1,
            hidden2: self.hidden2,
            classes: self.classes,
            threshold: self.threshold,
            sample_rate: self.sample_rate,
            norm_mode: self.norm_mode,
            causal: self.causal,
            features_mode: self.features_mode,
            output_activation: self.output_activation,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            patience: self.patience,
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            batch_size: self.batch_size,
            window_seconds: self.window_seconds,
            window_hop_seconds: self.window_hop_seconds,
            jitter_step_seconds: (self.jitter_step_seconds > 0.0)
                .then_some(self.jitter_step_seconds),
            target_accuracy: (self.target_accuracy > 0.0).then_some(self.target_accuracy),
            seed: self.seed,
        }
    }

    pub fn grid(&self) -> SceneGrid {
        let axis = |a: [f64; 3]| GridAxis::span(a[0], a[1], a[2]);
        SceneGrid {
            room_dims: self.room_dims,
            sound_speed: self.sound_speed,
            t60: axis(self.t60),
            snr_db: axis(self.snr_db),
            power_ratio_db: axis(self.power_ratio_db),
            assistant_x: axis(self.assistant_x),
            assistant_y: self.assistant_y,
            assistant_z: self.assistant_z,
            expert_pos: self.expert_pos,
        }
    }

    pub fn dataset_counts(&self) -> DatasetCounts {
        DatasetCounts::new(self.counts[0], self.counts[1], self.counts[2])
    }

    pub fn corpus(&self) -> SyntheticCorpus {
        SyntheticCorpus {
            sample_rate: self.sample_rate,
            clips_per_kind: self.corpus_clips,
            seconds: self.corpus_seconds,
            seed: self.seed,
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn check(&self) -> anyhow::Result<()> {
        self.model().validate().map_err(|e| usage(e.to_string()))?;
        self.train().validate().map_err(|e| usage(e.to_string()))?;
        self.grid().validate().map_err(|e| usage(e.to_string()))?;
        for (name, a) in [
            ("t60", self.t60),
            ("snr_db", self.snr_db),
            ("power_ratio_db", self.power_ratio_db),
            ("assistant_x", self.assistant_x),
        ] {
            if !(a[1] >= a[0] && a[2] > 0.0 || a[1] == a[0]) {
                return Err(usage(format!(
                    "{name} must be [first, last, step] with last >= first and step > 0"
                )));
            }
        }
        if !(self.hop_seconds > 0.0) {
            return Err(usage("hop_seconds must be positive"));
        }
        self.eval_split
            .parse::<mstcn_core::io::Split>()
            .map_err(|e| usage(e.to_string()))?;
        Ok(())
    }
}
