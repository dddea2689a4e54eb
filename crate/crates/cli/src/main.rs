mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command, DecomposeCommand, ExactCommand, ReplayArgs};
use output::{to_json, CliError, CliResult, RunManifest, Sink, MANIFEST_NAME};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn parse(argv: &[String]) -> CliResult<Option<Cli>> {
    let full = std::iter::once(OsString::from("treesample")).chain(argv.iter().map(OsString::from));
    match Cli::try_parse_from(full) {
        Ok(cli) => Ok(Some(cli)),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            Ok(None)
        }
        Err(e) => {
            let text = e.render().to_string();
            Err(CliError::Usage(
                text.trim_start_matches("error: ").trim_end().to_string(),
            ))
        }
    }
}

fn run(argv: Vec<String>) -> CliResult<()> {
    let Some(cli) = parse(&argv)? else {
        return Ok(());
    };
    match &cli.command {
        Command::Replay(r) => replay(r),
        command => execute(command, &argv).map(|_| ()),
    }
}

/// Runs a data-producing subcommand; returns the manifest when outputs went
/// to a directory.
fn execute(command: &Command, argv: &[String]) -> CliResult<Option<RunManifest>> {
    let started_at = now();
    let (name, output) = match command {
        Command::Sample(a) => ("sample", &a.output),
        Command::Convert(a) => ("convert", &a.output),
        Command::Exact(ExactCommand::Pi(a)) => ("exact pi", &a.output),
        Command::Exact(ExactCommand::Gap(a)) => ("exact gap", &a.output),
        Command::Exact(ExactCommand::TvCurve(a)) => ("exact tv-curve", &a.exact.output),
        Command::Decompose(DecomposeCommand::Report(a)) => ("decompose report", &a.exact.output),
        Command::Replay(_) => unreachable!("handled by the caller"),
    };
    let dir = match command {
        Command::Sample(_) => Some(
            output
                .out
                .clone()
                .unwrap_or_else(|| commands::DEFAULT_SAMPLE_DIR.into()),
        ),
        _ => output.out.clone(),
    };
    let mut sink = Sink::new(dir)?;
    let outcome = match command {
        Command::Sample(a) => commands::sample(a, &mut sink),
        Command::Convert(a) => commands::convert(a, &mut sink),
        Command::Exact(ExactCommand::Pi(a)) => commands::exact_pi(a, &mut sink),
        Command::Exact(ExactCommand::Gap(a)) => commands::exact_gap(a, &mut sink),
        Command::Exact(ExactCommand::TvCurve(a)) => commands::exact_tv_curve(a, &mut sink),
        Command::Decompose(DecomposeCommand::Report(a)) => commands::decompose_report(a, &mut sink),
        Command::Replay(_) => unreachable!(),
    }?;
    let manifest = match sink.dir() {
        Some(dir) => {
            let manifest = RunManifest {
                tool: "treesample".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                subcommand: name.into(),
                args: argv.to_vec(),
                resolved: outcome.resolved,
                seed: output.seed,
                started_at,
                finished_at: now(),
                outputs: sink.files().to_vec(),
            };
            let path = dir.join(MANIFEST_NAME);
            fs::write(&path, to_json(&manifest)).map_err(|e| CliError::Io(path, e))?;
            Some(manifest)
        }
        None => None,
    };
    match outcome.check_failure {
        Some(msg) => Err(CliError::Check(msg)),
        None => Ok(manifest),
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Replaces any `--out` in `args` with `dir`.
fn with_out(args: &[String], dir: &Path) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len() + 2);
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        out.push(a.clone());
    }
    out.push("--out".into());
    out.push(dir.to_string_lossy().into_owned());
    out
}

fn replay(r: &ReplayArgs) -> CliResult<()> {
    let text = fs::read_to_string(&r.manifest).map_err(|e| CliError::Io(r.manifest.clone(), e))?;
    let original: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: not a run manifest: {e}", r.manifest.display())))?;
    let dir = r.out.clone().unwrap_or_else(|| commands::replay_dir(&r.manifest));
    let argv = with_out(&original.args, &dir);
    let Some(cli) = parse(&argv)? else {
        return Err(CliError::Validation(
            "manifest does not record a runnable command".into(),
        ));
    };
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Validation("manifest records a replay".into()));
    }
    let replayed = execute(&cli.command, &argv)?.expect("replay always writes to a directory");
    let mut mismatches = Vec::new();
    for file in &original.outputs {
        match replayed.outputs.iter().find(|f| f.name == file.name) {
            Some(f) if f.sha256 == file.sha256 => {}
            Some(_) => mismatches.push(format!("{} differs", file.name)),
            None => mismatches.push(format!("{} missing", file.name)),
        }
    }
    if mismatches.is_empty() {
        println!(
            "replayed {} file(s) into {}: identical",
            original.outputs.len(),
            dir.display()
        );
        Ok(())
    } else {
        Err(CliError::Check(format!("replay mismatch: {}", mismatches.join(", "))))
    }
}
