mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Arg, ArgMatches, Command};

use config::{flag_name, keys, resolve, UsageError};

const SUBCOMMANDS: &[(&str, &str, &[&str])] = &[
    (
        "simulate",
        "Generate a labelled dataset and manifest",
        &["out"],
    ),
    (
        "make-corpus",
        "Write a synthetic dry-speech and noise corpus",
        &["out"],
    ),
    (
        "train",
        "Train a model on a simulated dataset",
        &["data", "out"],
    ),
    (
        "eval",
        "Score a checkpoint on one dataset split",
        &["checkpoint", "data", "out"],
    ),
    (
        "infer",
        "Label one WAV file with per-hop decisions",
        &["checkpoint", "input", "out"],
    ),
    ("inspect", "Print a model's size and receptive field", &[]),
];

fn path_arg(id: &'static str, help: &'static str) -> Arg {
    Arg::new(id)
        .long(id)
        .value_name("PATH")
        .value_parser(clap::value_parser!(PathBuf))
        .help(help)
}

fn cli() -> Command {
    let mut cmd = Command::new("mstcn")
        .about("Classroom voice detection with a multi-scale temporal convolution network")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(path_arg("config", "TOML file of configuration keys").global(true));
    for key in keys() {
        cmd = cmd.arg(
            Arg::new(key.clone())
                .long(flag_name(&key))
                .value_name("VALUE")
                .global(true)
                .help_heading("Configuration"),
        );
    }
    for &(name, about, _) in SUBCOMMANDS {
        let mut sub = Command::new(name)
            .about(about)
            .arg(path_arg("out", "Output directory"));
        sub = match name {
            "simulate" => sub.arg(path_arg(
                "corpus",
                "Corpus with expert/, assistant/ and noise/ WAV folders",
            )),
            "train" => sub.arg(path_arg("data", "Dataset directory written by simulate")),
            "eval" => sub
                .arg(path_arg("checkpoint", "Trained checkpoint"))
                .arg(path_arg("data", "Dataset directory written by simulate")),
            "infer" => sub
                .arg(path_arg("checkpoint", "Trained checkpoint"))
                .arg(path_arg("input", "Mono 16-bit WAV file")),
            "inspect" => sub.arg(path_arg(
                "checkpoint",
                "Checkpoint; defaults to the configured model",
            )),
            _ => sub,
        };
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn run(name: &str, m: &ArgMatches) -> anyhow::Result<()> {
    let required = SUBCOMMANDS
        .iter()
        .find(|s| s.0 == name)
        .map_or(&[][..], |s| s.2);
    let missing: Vec<String> = required
        .iter()
        .filter(|id| m.get_one::<PathBuf>(id).is_none())
        .map(|id| format!("--{id}"))
        .collect();
    if !missing.is_empty() {
        return Err(UsageError(format!("missing required flags: {}", missing.join(", "))).into());
    }
    let flags: Vec<(String, String)> = keys()
        .into_iter()
        .filter_map(|k| m.get_one::<String>(&k).map(|v| (k, v.clone())))
        .collect();
    let cfg = resolve(m.get_one::<PathBuf>("config").map(PathBuf::as_path), &flags)?;
    let path = |id: &str| m.get_one::<PathBuf>(id).map(PathBuf::as_path);
    let req = |id: &str| path(id).expect("checked above");
    match name {
        "simulate" => commands::simulate(&cfg, req("out"), path("corpus")),
        "make-corpus" => commands::make_corpus(&cfg, req("out")),
        "train" => commands::train_cmd(&cfg, req("data"), req("out")),
        "eval" => commands::eval(&cfg, req("checkpoint"), req("data"), req("out")),
        "infer" => commands::infer(&cfg, req("checkpoint"), req("input"), req("out")),
        "inspect" => commands::inspect(&cfg, path("checkpoint")),
        other => unreachable!("unknown subcommand {other}"),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match run(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
