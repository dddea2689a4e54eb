//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use treesample_core::decomposition::{check_decomposition_bound, decomposition_report, Level};
use treesample_core::spectral::{spectral_gap_with, SpectralMethod, SpectralOptions};
use treesample_core::{
    build_transition_model, derive_params, enumerate_paths, Chain, ChainConfig, EnergyParams, NntmParams, PlaneTree,
    Sample, TransitionModel, TwoMotzkinPath, BUILTIN_PARAM_SETS,
};

const GRID: [f64; 3] = [-1.0, 0.0, 1.0];

fn grid() -> impl Iterator<Item = EnergyParams> {
    GRID.iter()
        .flat_map(|&a| GRID.iter().map(move |&b| EnergyParams::new(a, b)))
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// Independent integer oracles.

fn catalan_u128(n: usize) -> u128 {
    let mut c = vec![1u128; n + 1];
    for i in 1..=n {
        c[i] = (0..i).map(|j| c[j] * c[i - 1 - j]).sum();
    }
    c[n]
}

fn binom_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

/// `exp(-(alpha d0 + beta d1))` normalized, with d0 and d1 read off the
/// decoded tree rather than the path.
fn oracle_pi(states: &[TwoMotzkinPath], p: &EnergyParams) -> Vec<f64> {
    let log_w: Vec<f64> = states
        .iter()
        .map(|x| {
            let prof = PlaneTree::decode(x).degree_profile().unwrap();
            -(p.alpha * prof.d0 as f64 + p.beta * prof.d1 as f64)
        })
        .collect();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn criterion_1() -> Verdict {
    // (a, b, c, h, f, i, g) and published (alpha, beta, gamma).
    let table: [(&str, [f64; 7], [f64; 3]); 6] = [
        (
            "turner89-cg",
            [4.6, 0.4, 0.1, -10.9, 3.8, 3.0, -1.6],
            [-0.9, -1.8, -1.7],
        ),
        (
            "turner89-gc",
            [4.6, 0.4, 0.1, -16.5, 3.5, 3.0, -1.9],
            [-0.9, -1.2, -1.7],
        ),
        ("turner99-cg", [3.4, 0.0, 0.4, -12.9, 4.5, 2.3, -1.6], [2.3, 1.3, -0.4]),
        ("turner99-gc", [3.4, 0.0, 0.4, -16.9, 4.1, 2.3, -1.9], [2.2, 1.9, -0.4]),
        (
            "turner04-cg",
            [9.3, 0.0, -0.9, -12.9, 4.5, 2.3, -1.1],
            [-2.8, -3.0, 0.9],
        ),
        (
            "turner04-gc",
            [9.3, 0.0, -0.9, -16.9, 4.1, 2.3, -1.5],
            [-2.8, -2.2, 0.9],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (name, [a, b, c, h, f, i, g], expected) in table {
        let derived = derive_params(&NntmParams { a, b, c, h, f, i, g });
        for (got, want) in [derived.alpha, derived.beta, derived.gamma].iter().zip(expected) {
            worst = worst.max((got - want).abs());
        }
        let builtin = BUILTIN_PARAM_SETS
            .iter()
            .find(|s| s.name == name)
            .expect("built-in row");
        if builtin.nntm != (NntmParams { a, b, c, h, f, i, g }) {
            return verdict(false, format!("built-in {name} differs from the table"));
        }
    }
    verdict(
        worst <= 0.05,
        format!("max |derived - table| = {worst:.3e} over 6 rows (tol 0.05)"),
    )
}

fn criterion_2() -> Verdict {
    let mut checked = 0usize;
    for m in 0..=9 {
        for x in enumerate_paths(m).unwrap() {
            let t = PlaneTree::decode(&x);
            if t.encode().unwrap() != x {
                return verdict(false, format!("roundtrip failed at {x}"));
            }
            let prof = t.degree_profile().unwrap();
            let c = x.counts();
            if c.i != prof.d1 || c.u + c.h + 1 != prof.d0 || t.edge_count() != m + 1 {
                return verdict(false, format!("degree identity failed at {x}"));
            }
            checked += 1;
        }
    }
    verdict(true, format!("{checked} paths, m = 0..9"))
}

fn criterion_3() -> Verdict {
    for m in 0..=10 {
        let paths = enumerate_paths(m).unwrap();
        if paths.len() as u128 != catalan_u128(m + 1) {
            return verdict(
                false,
                format!(
                    "m={m}: {} paths, expected C_{} = {}",
                    paths.len(),
                    m + 1,
                    catalan_u128(m + 1)
                ),
            );
        }
        let mut by_k: BTreeMap<usize, (u128, u128)> = BTreeMap::new();
        for x in &paths {
            let c = x.counts();
            let e = by_k.entry(c.u).or_default();
            e.0 += 1;
            if c.i == 0 {
                e.1 += 1;
            }
        }
        for k in 0..=m / 2 {
            let (all, single_colour) = by_k.get(&k).copied().unwrap_or_default();
            let base = binom_u128(m, 2 * k) * catalan_u128(k);
            if single_colour != base || all != base << (m - 2 * k) {
                return verdict(
                    false,
                    format!("m={m} k={k}: {all} paths ({single_colour} without I), expected C(m,2k)C_k = {base}"),
                );
            }
        }
    }
    verdict(
        true,
        "m = 0..10: |paths| = C_{m+1}; per k, C(m,2k)C_k paths with no I step and C(m,2k)C_k 2^(m-2k) in all",
    )
}

fn strongly_connected(model: &TransitionModel) -> bool {
    let n = model.len();
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for (i, j, v) in model.matrix.entries() {
        if v > 0.0 && i != j {
            fwd[i].push(j);
            bwd[j].push(i);
        }
    }
    let reach_all = |adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach_all(&fwd) && reach_all(&bwd)
}

fn criterion_4() -> Verdict {
    let (mut flow, mut stat, mut rows): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for m in 1..=6 {
        for p in grid() {
            let model = build_transition_model(m, &p).unwrap();
            let pi = oracle_pi(model.index.states(), &p);
            let n = model.len();
            let mut dense = vec![vec![0.0; n]; n];
            for (i, j, v) in model.matrix.entries() {
                dense[i][j] = v;
            }
            let mut max_term: f64 = 0.0;
            let mut max_disc: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let (a, b) = (pi[i] * dense[i][j], pi[j] * dense[j][i]);
                    max_term = max_term.max(a);
                    max_disc = max_disc.max((a - b).abs());
                }
            }
            flow = flow.max(max_disc / max_term);
            for j in 0..n {
                let s: f64 = (0..n).map(|i| pi[i] * dense[i][j]).sum();
                stat = stat.max((s - pi[j]).abs());
            }
            for row in &dense {
                rows = rows.max((row.iter().sum::<f64>() - 1.0).abs());
            }
            if !strongly_connected(&model) {
                return verdict(false, format!("m={m} {p:?}: not strongly connected"));
            }
        }
    }
    verdict(
        flow <= 1e-12 && stat <= 1e-12 && rows <= 1e-12,
        format!(
            "m = 1..6 x grid: balance {flow:.1e} (rel), stationarity {stat:.1e}, row sums {rows:.1e}, all strongly connected"
        ),
    )
}

/// Empirical state law and the d0 series of a pinned sampler run.
fn sample_run(m: usize, p: EnergyParams, seed: u64) -> (HashMap<TwoMotzkinPath, u64>, Vec<f64>) {
    let mut chain = Chain::new(&ChainConfig::new(m, p, seed)).unwrap();
    let mut counts: HashMap<TwoMotzkinPath, u64> = HashMap::new();
    let mut d0 = Vec::new();
    let mut collect = |s: &Sample| -> treesample_core::Result<()> {
        *counts.entry(s.path.clone()).or_default() += 1;
        d0.push(s.profile.unwrap().d0 as f64);
        Ok(())
    };
    chain.run(1_000_000, 10_000, 10, true, &mut collect).unwrap();
    (counts, d0)
}

fn empirical(states: &[TwoMotzkinPath], counts: &HashMap<TwoMotzkinPath, u64>) -> Vec<f64> {
    let n: u64 = counts.values().sum();
    states
        .iter()
        .map(|x| *counts.get(x).unwrap_or(&0) as f64 / n as f64)
        .collect()
}

const SAMPLER_SEED: u64 = 1;

fn criterion_5() -> Verdict {
    let states = enumerate_paths(6).unwrap();
    let (counts, d0) = sample_run(6, EnergyParams::default(), SAMPLER_SEED);
    let uniform = vec![1.0 / states.len() as f64; states.len()];
    let d = tv(&empirical(&states, &counts), &uniform);
    verdict(
        d <= 0.02,
        format!(
            "TV = {d:.4} (tol 0.02), {} samples over {} states",
            d0.len(),
            states.len()
        ),
    )
}

fn batch_se(values: &[f64], batches: usize) -> f64 {
    let len = values.len() / batches;
    let means: Vec<f64> = values
        .chunks_exact(len)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / len as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

fn criterion_6() -> Verdict {
    let set = BUILTIN_PARAM_SETS.iter().find(|s| s.name == "turner04-cg").unwrap();
    let p = derive_params(&set.nntm);
    let states = enumerate_paths(6).unwrap();
    let pi = oracle_pi(&states, &p);
    let exact_d0: f64 = states
        .iter()
        .zip(&pi)
        .map(|(x, w)| w * PlaneTree::decode(x).degree_profile().unwrap().d0 as f64)
        .sum();
    let (counts, d0) = sample_run(6, p, SAMPLER_SEED);
    let d = tv(&empirical(&states, &counts), &pi);
    let mean_d0 = d0.iter().sum::<f64>() / d0.len() as f64;
    let se = batch_se(&d0, 50);
    let z = (mean_d0 - exact_d0) / se;
    verdict(
        d <= 0.03 && z.abs() <= 3.0,
        format!(
            "TV = {d:.4} (tol 0.03); mean d0 {mean_d0:.4} vs exact {exact_d0:.4}, z = {z:.2} (50 batch means, tol 3)"
        ),
    )
}

fn criterion_7() -> Verdict {
    let mut k_err: f64 = 0.0;
    let mut uniform_err: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for m in 1..=6 {
        for p in grid() {
            let report = decomposition_report(m, &p, Level::Kqs).unwrap();
            k_err = k_err.max(report.k_projection.max_abs_error);
            if !report.k_projection.log_concave {
                return verdict(false, format!("m={m} {p:?}: closed-form k law not log-concave"));
            }
            spread = spread.max(report.max_energy_spread_within_kq.unwrap());
            for s in report.skeleton_projections.as_ref().unwrap() {
                uniform_err = uniform_err.max(s.max_uniformity_error);
                if !s.sizes_match {
                    return verdict(false, format!("m={m} k={} q={}: block sizes differ", s.k, s.q));
                }
            }
        }
        // Independent block-size count.
        let mut sizes: HashMap<(usize, String, String), u128> = HashMap::new();
        for x in enumerate_paths(m).unwrap() {
            let c = x.counts();
            let word: String = x.to_string().chars().filter(|&ch| ch == 'H' || ch == 'I').collect();
            let skel: String = x.to_string().chars().filter(|&ch| ch == 'U' || ch == 'D').collect();
            *sizes.entry((c.u, word, skel)).or_default() += 1;
        }
        if let Some(((k, q, s), n)) = sizes.iter().find(|((k, _, _), n)| **n != binom_u128(m, 2 * k)) {
            return verdict(false, format!("m={m}: |U(k={k}, q={q}, s={s})| = {n}"));
        }
    }
    verdict(
        k_err <= 1e-12 && uniform_err <= 1e-12 && spread <= 1e-12,
        format!(
            "m = 1..6 x grid: k-law error {k_err:.1e}, log-concave, energy spread in T_kq {spread:.1e}, |U_kqs| = C(m,2k), skeleton law uniform to {uniform_err:.1e}"
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut min_ratio = f64::INFINITY;
    for m in 3..=6 {
        for p in grid() {
            let b = &check_decomposition_bound(m, &p, Level::K).unwrap()[0];
            min_ratio = min_ratio.min(b.gap / b.bound);
            if b.gap < b.bound {
                return verdict(false, format!("m={m} {p:?}: Gap {:.6e} < bound {:.6e}", b.gap, b.bound));
            }
        }
    }
    verdict(true, format!("m = 3..6 x grid: min Gap(P) / bound = {min_ratio:.3}"))
}

fn criterion_9() -> Verdict {
    let mut worst: f64 = 0.0;
    for m in 1..=6 {
        for p in grid() {
            let model = build_transition_model(m, &p).unwrap();
            let run = |method| {
                spectral_gap_with(
                    &model,
                    &SpectralOptions {
                        method,
                        ..Default::default()
                    },
                )
                .unwrap()
                .gap
            };
            worst = worst.max((run(SpectralMethod::Dense) - run(SpectralMethod::PowerIteration)).abs());
        }
    }
    verdict(
        worst <= 1e-8,
        format!("m = 1..6 x grid: max |dense - power| = {worst:.2e} (tol 1e-8)"),
    )
}

fn criterion_10() -> Verdict {
    let mut pts = Vec::new();
    for m in 3..=8 {
        let model = build_transition_model(m, &EnergyParams::default()).unwrap();
        let r = spectral_gap_with(
            &model,
            &SpectralOptions {
                method: SpectralMethod::PowerIteration,
                ..Default::default()
            },
        )
        .unwrap();
        pts.push(((m as f64).ln(), (1.0 / r.gap).ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    verdict(
        slope <= 7.0,
        format!("slope of log(1/gap) vs log m over m = 3..8: {slope:.3} (max 7)"),
    )
}

fn cli(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_treesample"))
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

/// Data files of an output directory, excluding the manifest.
fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| {
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn criterion_11() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("paths.txt");
    std::fs::write(&input, "UD\n\nHUIDH\nUUDD\n").unwrap();
    let input = input.to_string_lossy().into_owned();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "sample",
            vec![
                "sample",
                "--n",
                "6",
                "--params",
                "turner04-cg",
                "--steps",
                "2e5",
                "--thin",
                "7",
                "--seed",
                "9",
                "--chains",
                "3",
            ],
        ),
        (
            "sample-jsonl",
            vec![
                "sample", "--n", "8", "--alpha", "0.5", "--beta", "-0.3", "--steps", "5e4", "--seed", "3", "--format",
                "jsonl",
            ],
        ),
        ("convert", vec!["convert", "--input", &input, "--profile"]),
        (
            "exact-pi",
            vec!["exact", "pi", "--m", "5", "--alpha", "1", "--beta", "-1"],
        ),
        ("exact-gap", vec!["exact", "gap", "--m", "8", "--seed", "4"]),
        (
            "tv-curve",
            vec!["exact", "tv-curve", "--m", "4", "--from", "UHID", "--horizon", "200"],
        ),
        ("decompose", vec!["decompose", "report", "--m", "5", "--level", "kqs"]),
    ];
    let mut files = 0;
    for (name, args) in &runs {
        let a = tmp.path().join(format!("{name}-a"));
        let b = tmp.path().join(format!("{name}-b"));
        if !cli(args, &a) || !cli(args, &b) {
            return verdict(false, format!("{name}: command failed"));
        }
        let (fa, fb) = (data_files(&a), data_files(&b));
        if fa.is_empty() || fa != fb {
            return verdict(false, format!("{name}: outputs differ"));
        }
        files += fa.len();
    }
    verdict(
        true,
        format!("{} commands run twice, {files} data files byte-identical", runs.len()),
    )
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() {
    let criteria: [Criterion; 11] = [
        ("table 1 reproduction", criterion_1, Duration::from_secs(1)),
        ("bijection roundtrip", criterion_2, Duration::from_secs(10)),
        ("counting identities", criterion_3, Duration::from_secs(30)),
        (
            "detailed balance and stationarity",
            criterion_4,
            Duration::from_secs(120),
        ),
        ("sampler, uniform case", criterion_5, Duration::from_secs(60)),
        ("sampler, weighted case", criterion_6, Duration::from_secs(60)),
        ("decomposition structure", criterion_7, Duration::from_secs(120)),
        ("gap decomposition inequality", criterion_8, Duration::from_secs(120)),
        ("dense vs power iteration", criterion_9, Duration::from_secs(60)),
        ("gap scaling (soft)", criterion_10, Duration::from_secs(600)),
        ("determinism", criterion_11, Duration::from_secs(60)),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| verdict(false, "panicked"));
        let elapsed = start.elapsed();
        let in_time = elapsed <= *budget;
        let pass = v.pass && in_time;
        let timing = if in_time {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!("{:.2}s, over the {}s budget", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!(
            "criterion {:>2} {} {name}: {} [{timing}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
