use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use treesample_core::decomposition::decomposition_report;
use treesample_core::exact::{StateIndex, EXACT_CAP};
use treesample_core::spectral::{spectral_gap_with, SpectralOptions};
use treesample_core::stats::{batch_means_standard_error, mean};
use treesample_core::{
    build_transition_model, builtin_params, derive_params, gibbs_distribution, parse_param_file, path_degree_profile,
    tv_decay_curve, tv_distance, Chain, ChainConfig, EnergyParams, Error, PlaneTree, Sample, TwoMotzkinPath,
};

use crate::args::{
    ConvertArgs, ConvertTarget, DecomposeArgs, ExactArgs, Format, OutputArgs, ParamArgs, SampleArgs, TvCurveArgs,
};
use crate::output::{to_json, CliError, CliResult, Sink};

/// What a command reports back for its manifest.
pub struct Outcome {
    pub resolved: serde_json::Value,
    /// Set when the command ran but a self-check failed.
    pub check_failure: Option<String>,
}

impl Outcome {
    fn ok(resolved: serde_json::Value) -> Self {
        Outcome {
            resolved,
            check_failure: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedParams {
    pub source: String,
    #[serde(flatten)]
    pub energy: EnergyParams,
}

pub fn resolve_params(args: &ParamArgs) -> CliResult<ResolvedParams> {
    let resolved = match &args.params {
        Some(spec) => match builtin_params(spec) {
            Ok(nntm) => ResolvedParams {
                source: spec.to_ascii_lowercase(),
                energy: derive_params(&nntm),
            },
            Err(_) if Path::new(spec).is_file() => {
                let text = fs::read_to_string(spec).map_err(|e| CliError::Io(spec.into(), e))?;
                ResolvedParams {
                    source: format!("file:{spec}"),
                    energy: parse_param_file(&text)?.energy(),
                }
            }
            Err(e) => {
                return Err(CliError::Validation(format!(
                    "{e}; not a built-in set name or a readable file"
                )))
            }
        },
        None => ResolvedParams {
            source: "flags".into(),
            energy: EnergyParams::new(args.alpha.unwrap_or(0.0), args.beta.unwrap_or(0.0)),
        },
    };
    if !resolved.energy.is_finite() {
        return Err(CliError::Validation("energy parameters must be finite".into()));
    }
    Ok(resolved)
}

fn format_or(output: &OutputArgs, default: Format, allowed: &[Format], what: &str) -> CliResult<Format> {
    let f = output.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(CliError::Usage(format!(
            "{what} does not support --format {}",
            f.extension()
        )))
    }
}

#[derive(Serialize)]
struct Row<'a> {
    step: u64,
    path: &'a str,
    energy: f64,
    d0: usize,
    d1: usize,
    r: usize,
}

/// Writer that hashes what passes through it.
struct HashingWriter<W: Write> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

enum RowWriter<W: Write> {
    Csv(Box<csv::Writer<W>>),
    Jsonl(W),
}

impl<W: Write> RowWriter<W> {
    fn write(&mut self, row: &Row) -> io::Result<()> {
        match self {
            RowWriter::Csv(w) => w.serialize(row).map_err(io::Error::other),
            RowWriter::Jsonl(w) => {
                serde_json::to_writer(&mut *w, row)?;
                w.write_all(b"\n")
            }
        }
    }

    fn into_inner(self) -> io::Result<W> {
        match self {
            RowWriter::Csv(w) => w.into_inner().map_err(|e| io::Error::other(e.to_string())),
            RowWriter::Jsonl(w) => Ok(w),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
struct ExactComparison {
    tv: f64,
    mean_energy: f64,
    mean_d0: f64,
    mean_d1: f64,
    mean_r: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ChainSummary {
    chain: usize,
    stream: u64,
    file: String,
    samples: u64,
    mean_energy: f64,
    mean_d0: f64,
    mean_d1: f64,
    mean_r: f64,
    /// Batch-means standard error of `mean_d0` (20 batches).
    se_d0: Option<f64>,
    d0_histogram: BTreeMap<usize, u64>,
    d1_histogram: BTreeMap<usize, u64>,
    exact: Option<ExactComparison>,
}

/// Per-chain accumulators.
#[derive(Default)]
struct Tally {
    energy: Vec<f64>,
    d0: Vec<f64>,
    d1: Vec<f64>,
    r: Vec<f64>,
    d0_hist: BTreeMap<usize, u64>,
    d1_hist: BTreeMap<usize, u64>,
    states: HashMap<TwoMotzkinPath, u64>,
}

impl Tally {
    fn add(&mut self, s: &Sample, track_states: bool) {
        let p = s.profile.expect("profiles requested");
        self.energy.push(s.energy);
        self.d0.push(p.d0 as f64);
        self.d1.push(p.d1 as f64);
        self.r.push(p.r as f64);
        *self.d0_hist.entry(p.d0).or_default() += 1;
        *self.d1_hist.entry(p.d1).or_default() += 1;
        if track_states {
            *self.states.entry(s.path.clone()).or_default() += 1;
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.energy.extend(&other.energy);
        self.d0.extend(&other.d0);
        self.d1.extend(&other.d1);
        self.r.extend(&other.r);
        for (k, v) in &other.d0_hist {
            *self.d0_hist.entry(*k).or_default() += v;
        }
        for (k, v) in &other.d1_hist {
            *self.d1_hist.entry(*k).or_default() += v;
        }
        for (k, v) in &other.states {
            *self.states.entry(k.clone()).or_default() += v;
        }
    }

    fn summarize(&self, chain: usize, stream: u64, file: String, exact: Option<&ExactTarget>) -> ChainSummary {
        ChainSummary {
            chain,
            stream,
            file,
            samples: self.energy.len() as u64,
            mean_energy: mean(&self.energy),
            mean_d0: mean(&self.d0),
            mean_d1: mean(&self.d1),
            mean_r: mean(&self.r),
            se_d0: batch_means_standard_error(&self.d0, 20),
            d0_histogram: self.d0_hist.clone(),
            d1_histogram: self.d1_hist.clone(),
            exact: exact.map(|t| {
                let n = self.energy.len() as f64;
                let empirical: Vec<f64> = t
                    .index
                    .states()
                    .iter()
                    .map(|x| *self.states.get(x).unwrap_or(&0) as f64 / n)
                    .collect();
                ExactComparison {
                    tv: tv_distance(&empirical, &t.pi).expect("same support"),
                    ..t.means.clone()
                }
            }),
        }
    }
}

struct ExactTarget {
    index: StateIndex,
    pi: Vec<f64>,
    means: ExactComparison,
}

fn exact_target(m: usize, params: &EnergyParams) -> CliResult<ExactTarget> {
    let index = StateIndex::new(m)?;
    let (pi, _) = gibbs_distribution(m, params)?;
    let mut means = ExactComparison::default();
    for (x, p) in index.states().iter().zip(&pi) {
        let prof = path_degree_profile(x);
        means.mean_energy += p * treesample_core::path_energy(x, params);
        means.mean_d0 += p * prof.d0 as f64;
        means.mean_d1 += p * prof.d1 as f64;
        means.mean_r += p * prof.r as f64;
    }
    Ok(ExactTarget { index, pi, means })
}

pub const DEFAULT_SAMPLE_DIR: &str = "treesample-out";

pub fn sample(args: &SampleArgs, sink: &mut Sink) -> CliResult<Outcome> {
    if args.n < 2 {
        return Err(CliError::Validation(
            "--n must be at least 2 (paths of length n - 1 >= 1)".into(),
        ));
    }
    if args.chains == 0 {
        return Err(CliError::Validation("--chains must be at least 1".into()));
    }
    if args.thin == 0 {
        return Err(CliError::Validation("--thin must be at least 1".into()));
    }
    if args.burn_in > args.steps {
        return Err(CliError::Validation(format!(
            "--burn-in {} exceeds --steps {}",
            args.burn_in, args.steps
        )));
    }
    let format = format_or(&args.output, Format::Csv, &[Format::Csv, Format::Jsonl], "sample")?;
    let m = args.n - 1;
    let params = resolve_params(&args.params)?;
    let start = match &args.start {
        Some(s) => TwoMotzkinPath::parse(s)?,
        None => TwoMotzkinPath::all_h(m),
    };
    let dir = sink.dir().expect("sample always writes to a directory").to_path_buf();
    let seed = args.output.seed;
    let configs: Vec<ChainConfig> = (0..args.chains)
        .map(|c| {
            ChainConfig::new(m, params.energy, seed)
                .with_stream(c as u64)
                .with_initial_state(start.clone())
        })
        .collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    let exact = if m <= EXACT_CAP {
        Some(exact_target(m, &params.energy)?)
    } else {
        None
    };
    let track = exact.is_some();
    let results: Vec<CliResult<(String, String, Tally)>> = configs
        .par_iter()
        .enumerate()
        .map(|(c, cfg)| {
            let name = if args.chains == 1 {
                format!("samples.{}", format.extension())
            } else {
                format!("samples-chain{c}.{}", format.extension())
            };
            let (sha, tally) = run_chain(cfg, args, format, &dir.join(&name), track)?;
            Ok((name, sha, tally))
        })
        .collect();
    let mut chains = Vec::new();
    let mut pooled = Tally::default();
    for (c, result) in results.into_iter().enumerate() {
        let (name, sha, tally) = result?;
        sink.record_hash(&name, sha);
        chains.push(tally.summarize(c, c as u64, name, exact.as_ref()));
        if args.chains > 1 {
            pooled.merge(&tally);
        }
    }
    let pooled = (args.chains > 1).then(|| pooled.summarize(0, 0, "*".into(), exact.as_ref()));
    let summary = json!({
        "m": m,
        "n": args.n,
        "params": params,
        "steps": args.steps,
        "burn_in": args.burn_in,
        "thin": args.thin,
        "seed": seed,
        "chains": chains,
        "pooled": pooled,
    });
    sink.write("summary.json", &to_json(&summary))?;
    Ok(Outcome::ok(json!({
        "n": args.n,
        "m": m,
        "params": params,
        "steps": args.steps,
        "burn_in": args.burn_in,
        "thin": args.thin,
        "chains": args.chains,
        "start": start.to_string(),
        "format": format.extension(),
        "out": dir,
    })))
}

fn run_chain(
    cfg: &ChainConfig,
    args: &SampleArgs,
    format: Format,
    path: &Path,
    track: bool,
) -> CliResult<(String, Tally)> {
    let io_err = |e: io::Error| CliError::Io(path.to_path_buf(), e);
    let file = File::create(path).map_err(io_err)?;
    let sink = HashingWriter {
        inner: BufWriter::new(file),
        hasher: Sha256::new(),
    };
    let mut writer = match format {
        Format::Csv => RowWriter::Csv(Box::new(csv::Writer::from_writer(sink))),
        _ => RowWriter::Jsonl(sink),
    };
    let mut chain = Chain::new(cfg)?;
    let mut tally = Tally::default();
    let mut io_failure = None;
    let mut collect = |s: &Sample| -> treesample_core::Result<()> {
        let p = s.profile.expect("profiles requested");
        let word = s.path.to_string();
        let row = Row {
            step: s.step,
            path: &word,
            energy: s.energy,
            d0: p.d0,
            d1: p.d1,
            r: p.r,
        };
        if let Err(e) = writer.write(&row) {
            io_failure = Some(e);
            return Err(Error::ConfigInvalid("write failed".into()));
        }
        tally.add(s, track);
        Ok(())
    };
    let run = chain.run(args.steps, args.burn_in, args.thin, true, &mut collect);
    if let Some(e) = io_failure {
        return Err(io_err(e));
    }
    run?;
    let mut inner = writer.into_inner().map_err(io_err)?;
    inner.flush().map_err(io_err)?;
    Ok((hex::encode(inner.hasher.finalize()), tally))
}

pub fn convert(args: &ConvertArgs, sink: &mut Sink) -> CliResult<Outcome> {
    format_or(&args.output, Format::Csv, &[Format::Csv], "convert")?;
    let input: Box<dyn BufRead> = match &args.input {
        Some(p) => Box::new(io::BufReader::new(
            File::open(p).map_err(|e| CliError::Io(p.clone(), e))?,
        )),
        None => Box::new(io::stdin().lock()),
    };
    let mut out = String::new();
    let mut failures = 0usize;
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::Io(args.input.clone().unwrap_or_else(|| "<stdin>".into()), e))?;
        let item = line.trim();
        let converted = match args.to {
            ConvertTarget::Tree => TwoMotzkinPath::parse(item).map(|x| {
                let t = PlaneTree::decode(&x);
                (t.to_parens(), path_degree_profile(&x))
            }),
            ConvertTarget::Path => PlaneTree::from_parens(item).and_then(|t| {
                let x = t.encode()?;
                Ok((x.to_string(), t.degree_profile()?))
            }),
        };
        match converted {
            Ok((text, prof)) => {
                out.push_str(&text);
                if args.profile {
                    out.push_str(&format!(",{},{},{}", prof.d0, prof.d1, prof.r));
                }
                out.push('\n');
            }
            Err(e) => {
                failures += 1;
                eprintln!("line {}: {e}", lineno + 1);
            }
        }
    }
    sink.write("converted.txt", out.as_bytes())?;
    if failures > 0 {
        return Err(CliError::Validation(format!("{failures} line(s) failed to convert")));
    }
    Ok(Outcome::ok(json!({
        "input": args.input,
        "to": match args.to { ConvertTarget::Tree => "tree", ConvertTarget::Path => "path" },
        "profile": args.profile,
    })))
}

#[derive(Serialize)]
struct Golden<'a> {
    m: usize,
    params: &'a ResolvedParams,
    state_order_hash: String,
    states: Vec<String>,
    pi: &'a [f64],
    log_z: f64,
    gap: f64,
    lambda1: f64,
    relaxation_time: f64,
    residual: f64,
    method: treesample_core::SpectralMethod,
    iterations: usize,
}

fn check_m(m: usize) -> CliResult<()> {
    if m == 0 {
        return Err(CliError::Validation("--m must be at least 1".into()));
    }
    Ok(())
}

fn golden(args: &ExactArgs, sink: &mut Sink, name: &str, with_states: bool) -> CliResult<Outcome> {
    check_m(args.m)?;
    let params = resolve_params(&args.params)?;
    let model = build_transition_model(args.m, &params.energy)?;
    let opts = SpectralOptions {
        seed: args.output.seed,
        ..Default::default()
    };
    let gap = if model.len() > 1 {
        spectral_gap_with(&model, &opts)?
    } else {
        return Err(CliError::Validation(
            "the chain has a single state and no spectral gap".into(),
        ));
    };
    let golden = Golden {
        m: args.m,
        params: &params,
        state_order_hash: model.index.order_hash(),
        states: if with_states {
            model.index.states().iter().map(|x| x.to_string()).collect()
        } else {
            Vec::new()
        },
        pi: if with_states { &model.pi } else { &[] },
        log_z: model.log_z,
        gap: gap.gap,
        lambda1: gap.lambda1,
        relaxation_time: gap.relaxation_time,
        residual: gap.residual,
        method: gap.method,
        iterations: gap.iterations,
    };
    sink.write(name, &to_json(&golden))?;
    Ok(Outcome::ok(json!({ "m": args.m, "params": params })))
}

pub fn exact_pi(args: &ExactArgs, sink: &mut Sink) -> CliResult<Outcome> {
    let format = format_or(&args.output, Format::Json, &[Format::Json, Format::Csv], "exact pi")?;
    if format == Format::Json {
        return golden(args, sink, "pi.json", true);
    }
    check_m(args.m)?;
    let params = resolve_params(&args.params)?;
    let index = StateIndex::new(args.m)?;
    let (pi, _) = gibbs_distribution(args.m, &params.energy)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["state", "pi"])
        .map_err(|e| CliError::Io("<csv>".into(), e.into()))?;
    for (x, p) in index.states().iter().zip(&pi) {
        w.write_record([x.to_string(), p.to_string()])
            .map_err(|e| CliError::Io("<csv>".into(), e.into()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Io("<csv>".into(), e.into_error()))?;
    sink.write("pi.csv", &bytes)?;
    Ok(Outcome::ok(json!({ "m": args.m, "params": params })))
}

pub fn exact_gap(args: &ExactArgs, sink: &mut Sink) -> CliResult<Outcome> {
    format_or(&args.output, Format::Json, &[Format::Json], "exact gap")?;
    golden(args, sink, "gap.json", false)
}

pub fn exact_tv_curve(args: &TvCurveArgs, sink: &mut Sink) -> CliResult<Outcome> {
    let format = format_or(
        &args.exact.output,
        Format::Csv,
        &[Format::Csv, Format::Jsonl, Format::Json],
        "exact tv-curve",
    )?;
    let m = args.exact.m;
    check_m(m)?;
    let params = resolve_params(&args.exact.params)?;
    let from = match &args.from {
        Some(s) => TwoMotzkinPath::parse(s)?,
        None => TwoMotzkinPath::all_h(m),
    };
    let model = build_transition_model(m, &params.energy)?;
    let curve = tv_decay_curve(&model, &from, args.horizon as usize)?;
    let name = format!("tv-curve.{}", format.extension());
    let bytes = match format {
        Format::Csv => {
            let mut s = String::from("t,tv\n");
            for (t, tv) in &curve {
                s.push_str(&format!("{t},{tv}\n"));
            }
            s.into_bytes()
        }
        Format::Jsonl => {
            let mut s = String::new();
            for (t, tv) in &curve {
                s.push_str(&json!({ "t": t, "tv": tv }).to_string());
                s.push('\n');
            }
            s.into_bytes()
        }
        Format::Json => to_json(&json!({
            "m": m,
            "params": params,
            "from": from.to_string(),
            "state_order_hash": model.index.order_hash(),
            "t": curve.iter().map(|c| c.0).collect::<Vec<_>>(),
            "tv": curve.iter().map(|c| c.1).collect::<Vec<_>>(),
        })),
    };
    sink.write(&name, &bytes)?;
    Ok(Outcome::ok(json!({
        "m": m,
        "params": params,
        "from": from.to_string(),
        "horizon": args.horizon,
        "format": format.extension(),
    })))
}

pub fn decompose_report(args: &DecomposeArgs, sink: &mut Sink) -> CliResult<Outcome> {
    format_or(&args.exact.output, Format::Json, &[Format::Json], "decompose report")?;
    check_m(args.exact.m)?;
    let params = resolve_params(&args.exact.params)?;
    let report = decomposition_report(args.exact.m, &params.energy, args.level)?;
    sink.write("decompose.json", &to_json(&report))?;
    let mut outcome = Outcome::ok(json!({
        "m": args.exact.m,
        "params": params,
        "level": args.level,
    }));
    if !report.all_passed {
        outcome.check_failure = Some("decomposition checks failed; see the report".into());
    }
    Ok(outcome)
}

/// Default output directory of a replay: `<dir>-replay` next to the
/// manifest's directory.
pub fn replay_dir(manifest: &Path) -> PathBuf {
    let dir = manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let dir = dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf());
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    dir.with_file_name(format!("{name}-replay"))
}
