use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use treesample_core::decomposition::Level;

#[derive(Debug, Parser)]
#[command(
    name = "treesample",
    version,
    about = "Gibbs sampling of plane trees via 2-Motzkin paths"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Markov chain and write sampled states.
    Sample(SampleArgs),
    /// Translate between 2-Motzkin paths and parenthesized plane trees.
    Convert(ConvertArgs),
    /// Exact stationary law, spectral gap and TV decay for small m.
    #[command(subcommand)]
    Exact(ExactCommand),
    /// Block-decomposition checks.
    #[command(subcommand)]
    Decompose(DecomposeCommand),
    /// Re-run the command recorded in a manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long, allow_hyphen_values = true, conflicts_with = "params")]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "params")]
    pub beta: Option<f64>,
    /// Built-in parameter set name or path to a key=value file.
    #[arg(long)]
    pub params: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory; defaults to $TREESAMPLE_OUT.
    #[arg(long, env = "TREESAMPLE_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    /// Number of tree edges; the path length is n - 1.
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Total transitions; accepts scientific notation such as 1e6.
    #[arg(long, value_parser = parse_count, default_value = "0")]
    pub steps: u64,
    #[arg(long, value_parser = parse_count, default_value = "0")]
    pub burn_in: u64,
    #[arg(long, value_parser = parse_count, default_value = "1")]
    pub thin: u64,
    /// Independent chains run in parallel, one output file each.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Starting path; defaults to H^(n-1).
    #[arg(long)]
    pub start: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertTarget {
    Tree,
    Path,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    /// Input file with one item per line; reads stdin when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tree")]
    pub to: ConvertTarget,
    /// Append d0, d1 and r to each line.
    #[arg(long)]
    pub profile: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub m: usize,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Subcommand)]
pub enum ExactCommand {
    /// Stationary distribution (golden JSON or CSV).
    Pi(ExactArgs),
    /// Spectral gap (golden JSON).
    Gap(ExactArgs),
    /// TV distance from stationarity after t steps from a fixed start.
    TvCurve(TvCurveArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TvCurveArgs {
    #[command(flatten)]
    pub exact: ExactArgs,
    /// Starting path; defaults to H^m.
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    pub horizon: u64,
}

#[derive(Debug, Subcommand)]
pub enum DecomposeCommand {
    /// JSON report of every decomposition check.
    Report(DecomposeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub exact: ExactArgs,
    #[arg(long, value_parser = parse_level, default_value = "k")]
    pub level: Level,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Directory for the replayed outputs; defaults to a sibling of the
    /// manifest's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses a nonnegative integer count, allowing forms like `1e6` and `250_000`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let cleaned = s.replace('_', "");
    if let Ok(v) = cleaned.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = cleaned.parse().map_err(|_| format!("{s:?} is not a count"))?;
    if !(v >= 0.0 && v.fract() == 0.0 && v <= 9_007_199_254_740_992.0) {
        return Err(format!("{s:?} is not a nonnegative integer"));
    }
    Ok(v as u64)
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse().map_err(|e: treesample_core::Error| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("2.5e3"), Ok(2500));
        assert_eq!(parse_count("10_000"), Ok(10_000));
        assert_eq!(parse_count("0"), Ok(0));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("1e30").is_err());
        assert!(parse_count("ten").is_err());
    }
}
