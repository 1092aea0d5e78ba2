use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mstcn_core::io::{load_split, read_wav, Split};
use mstcn_core::model::{param_count, receptive_field};
use mstcn_core::sim::{generate_dataset, Corpora, MANIFEST_FILE};
use mstcn_core::stream::{
    decisions_to_segments, infer_offline, write_decisions, write_segments, StreamingSession,
};
use mstcn_core::train::{evaluate, train, write_history};
use mstcn_core::{Checkpoint, ModelConfig};

use crate::config::RunConfig;

pub const CONFIG_ECHO: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.mstcn";

/// An output directory written under a `.partial` name and renamed into
/// place once complete.
pub struct Staged {
    partial: PathBuf,
    target: PathBuf,
}

impl Staged {
    pub fn new(target: &Path, config: &RunConfig) -> Result<Self> {
        if target.exists() {
            bail!("output {} already exists", target.display());
        }
        let mut name = target
            .file_name()
            .context("output path has no file name")?
            .to_os_string();
        name.push(".partial");
        let partial = target.with_file_name(name);
        if partial.exists() {
            std::fs::remove_dir_all(&partial)
                .with_context(|| format!("removing stale {}", partial.display()))?;
        }
        std::fs::create_dir_all(&partial)
            .with_context(|| format!("creating {}", partial.display()))?;
        std::fs::write(partial.join(CONFIG_ECHO), config.to_toml())?;
        Ok(Self {
            partial,
            target: target.to_path_buf(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.partial.join(file)
    }

    pub fn dir(&self) -> &Path {
        &self.partial
    }

    pub fn finish(self) -> Result<()> {
        std::fs::rename(&self.partial, &self.target)
            .with_context(|| format!("moving {} into place", self.partial.display()))
    }
}

pub fn simulate(cfg: &RunConfig, out: &Path, corpus: Option<&Path>) -> Result<()> {
    let corpora = match corpus {
        Some(dir) => Corpora::load(dir)?,
        None => cfg.corpus().generate(),
    };
    if corpora.sample_rate != cfg.sample_rate {
        bail!(
            "corpus sample rate {} Hz differs from configured {} Hz",
            corpora.sample_rate,
            cfg.sample_rate
        );
    }
    let staged = Staged::new(out, cfg)?;
    let records = generate_dataset(
        &corpora,
        &cfg.grid(),
        cfg.dataset_counts(),
        staged.dir(),
        cfg.seed,
    )?;
    staged.finish()?;
    println!(
        "wrote {} samples and {} to {}",
        records.len(),
        MANIFEST_FILE,
        out.display()
    );
    Ok(())
}

pub fn make_corpus(cfg: &RunConfig, out: &Path) -> Result<()> {
    let staged = Staged::new(out, cfg)?;
    let corpora = cfg.corpus().generate();
    corpora.save(staged.dir())?;
    staged.finish()?;
    println!(
        "wrote {} clips per kind ({} s at {} Hz) to {}",
        cfg.corpus_clips,
        cfg.corpus_seconds,
        cfg.sample_rate,
        out.display()
    );
    Ok(())
}

pub fn train_cmd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let manifest = data.join(MANIFEST_FILE);
    let train_set = load_split(&manifest, Split::Train)?;
    let valid_set = load_split(&manifest, Split::Valid)?;
    let staged = Staged::new(out, cfg)?;
    let outcome = train(&cfg.model(), &cfg.train(), &train_set, &valid_set, |r| {
        eprintln!(
            "epoch {:>3}  train_loss {:.5}  valid_loss {:.5}  valid_acc {:.4}  lr {:.3e}",
            r.epoch, r.train_loss, r.valid_loss, r.valid_accuracy, r.lr
        )
    })?;
    outcome.checkpoint.save(staged.path(CHECKPOINT_FILE))?;
    write_history(staged.path("loss_history.csv"), &outcome.history)?;
    staged.finish()?;
    let meta = &outcome.checkpoint.metadata;
    println!(
        "{} epochs ({:?}); best epoch {} with valid_loss {:.5}; checkpoint at {}",
        meta.epochs_run,
        outcome.stop,
        meta.best_epoch.unwrap_or_default(),
        meta.best_valid_loss.unwrap_or(f64::NAN),
        out.join(CHECKPOINT_FILE).display()
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path, data: &Path, out: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let split: Split = cfg.eval_split.parse()?;
    let samples = load_split(data.join(MANIFEST_FILE), split)?;
    if samples.is_empty() {
        bail!("no {} samples in {}", split.name(), data.display());
    }
    let staged = Staged::new(out, cfg)?;
    let report = evaluate(&ckpt.model, &samples, cfg.window_seconds, cfg.hop_seconds)?;
    let table = report.to_table();
    std::fs::write(staged.path("report.txt"), &table)?;
    std::fs::write(staged.path("report.json"), report.to_json()?)?;
    staged.finish()?;
    print!("{table}");
    Ok(())
}

pub fn infer(cfg: &RunConfig, checkpoint: &Path, input: &Path, out: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let wav = read_wav(input)?;
    let expected = ckpt.config().sample_rate;
    if wav.sample_rate != expected {
        return Err(mstcn_core::Error::SampleRate {
            expected,
            found: wav.sample_rate,
        }
        .into());
    }
    let track = if cfg.streaming {
        let mut session = StreamingSession::new(&ckpt.model, cfg.window_seconds, cfg.hop_seconds)?;
        for chunk in wav.samples.chunks(session.grid().hop) {
            session.push(chunk)?;
        }
        session.close()?
    } else {
        infer_offline(
            &ckpt.model,
            &wav.samples,
            cfg.window_seconds,
            cfg.hop_seconds,
        )?
    };
    let segments = decisions_to_segments(&track);
    let staged = Staged::new(out, cfg)?;
    write_decisions(staged.path("decisions.txt"), &track)?;
    write_segments(staged.path("segments.txt"), &segments)?;
    staged.finish()?;
    for s in &segments {
        println!("{:.4},{:.4},{}", s.start, s.end, s.category.code());
    }
    Ok(())
}

fn describe(config: &ModelConfig) -> String {
    let rf = receptive_field(config);
    format!(
        "param_count = {}\nreceptive_field_frames = {}\nreceptive_field_seconds = {:.4}\nfeature_channels = {}\n",
        param_count(config),
        rf,
        ((rf - 1) * config.stride + config.filter_len) as f64 / config.sample_rate as f64,
        config.feature_channels()
    )
}

pub fn inspect(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<()> {
    match checkpoint {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            print!("{}", describe(ckpt.config()));
            let m = &ckpt.metadata;
            println!(
                "seed = {}\nepochs_run = {}\nbest_epoch = {}\nbest_valid_loss = {}\nnote = {:?}",
                m.seed,
                m.epochs_run,
                m.best_epoch.map_or("none".into(), |e| e.to_string()),
                m.best_valid_loss
                    .map_or("none".into(), |l| format!("{l:.6}")),
                m.note
            );
            println!("\n[model]\n{}", toml::to_string(ckpt.config())?);
        }
        None => {
            let model = cfg.model();
            print!("{}", describe(&model));
            println!("\n[model]\n{}", toml::to_string(&model)?);
        }
    }
    Ok(())
}
