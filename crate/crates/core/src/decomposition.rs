//! Three-level block decomposition of the path space and numerical checks of
//! the structure used to bound the chain's spectral gap.
//!
//! Paths split by their number of up steps `k` into `S_k`; each `S_k` splits
//! by its level word `q` (the `H`/`I` subsequence) into `T_{k,q}`; each
//! `T_{k,q}` splits by skeleton `s` into `U_{k,q,s}`. For a partition of a
//! reversible chain, the restriction to a block rejects moves that leave
//! it, and the projection moves between blocks with `pi`-averaged rates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::energy::{path_energy, EnergyParams};
use crate::error::{Error, Result};
use crate::exact::{balance_report, build_transition_model, log_sum_exp, BalanceReport, StateIndex, TransitionModel};
use crate::paths::{binomial, catalan, DyckPath, Symbol, TwoMotzkinPath};
use crate::sparse::CsrMatrix;
use crate::spectral::{reversible_gap, SpectralMethod, SpectralOptions, DENSE_CAP};

/// Largest `m` the lab accepts; every chain involved is solved densely.
pub const LAB_CAP: usize = 7;

/// Tolerance for the exact identities checked by the lab.
pub const LAB_TOLERANCE: f64 = 1e-12;

/// The `(k, q, s)` block a path belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PartitionLabel {
    pub k: usize,
    #[serde(serialize_with = "serialize_word")]
    pub q: Vec<Symbol>,
    pub s: DyckPath,
}

fn serialize_word<S: serde::Serializer>(q: &[Symbol], serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_str(&word(q))
}

fn word(q: &[Symbol]) -> String {
    q.iter().map(|s| s.as_ascii() as char).collect()
}

impl PartitionLabel {
    pub fn q_word(&self) -> String {
        word(&self.q)
    }
}

impl fmt::Display for PartitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, q={:?}, s={:?})", self.k, self.q_word(), self.s.to_string())
    }
}

pub fn classify(x: &TwoMotzkinPath) -> PartitionLabel {
    PartitionLabel {
        k: x.counts().u,
        q: x.level_word(),
        s: x.skeleton(),
    }
}

/// Granularity of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// `S_k` blocks of the whole chain.
    K,
    /// `T_{k,q}` blocks of each restriction to `S_k`.
    Kq,
    /// `U_{k,q,s}` blocks of each restriction to `T_{k,q}`.
    Kqs,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(Level::K),
            "kq" => Ok(Level::Kq),
            "kqs" => Ok(Level::Kqs),
            other => Err(Error::ConfigInvalid(format!(
                "unknown level {other:?}; expected k, kq or kqs"
            ))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::K => "k",
            Level::Kq => "kq",
            Level::Kqs => "kqs",
        })
    }
}

/// Groups state indices of `model` by `key`, in key order.
pub fn group_by<K: Ord>(model: &TransitionModel, key: impl Fn(&TwoMotzkinPath) -> K) -> Vec<(K, Vec<usize>)> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, x) in model.index.states().iter().enumerate() {
        groups.entry(key(x)).or_default().push(i);
    }
    groups.into_iter().collect()
}

/// The chain restricted to `block` (indices into `model`): moves leaving the
/// block are rejected and their mass stays on the diagonal.
pub fn restriction_chain(model: &TransitionModel, block: &[usize]) -> Result<TransitionModel> {
    if block.is_empty() {
        return Err(Error::EmptyBlock(0));
    }
    let mut members = block.to_vec();
    members.sort_unstable();
    members.dedup();
    if let Some(&bad) = members.iter().find(|&&i| i >= model.len()) {
        return Err(Error::NotAPartition(format!("state {bad} out of range")));
    }
    let mut local = vec![usize::MAX; model.len()];
    for (k, &i) in members.iter().enumerate() {
        local[i] = k;
    }
    let rows = members
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let (cols, vals) = model.matrix.row(i);
            let mut row: Vec<(usize, f64)> = cols
                .iter()
                .zip(vals)
                .filter(|&(&j, _)| j != i && local[j] != usize::MAX)
                .map(|(&j, &v)| (local[j], v))
                .collect();
            let leaving: f64 = row.iter().map(|(_, v)| v).sum();
            row.push((k, 1.0 - leaving));
            row
        })
        .collect();
    let mass: f64 = members.iter().map(|&i| model.pi[i]).sum();
    let pi = members.iter().map(|&i| model.pi[i] / mass).collect();
    Ok(TransitionModel {
        m: model.m,
        params: model.params,
        index: StateIndex::from_states(members.iter().map(|&i| model.index.path(i).clone()).collect()),
        matrix: CsrMatrix::from_rows(rows),
        pi,
        log_z: model.log_z + mass.ln(),
    })
}

/// The chain on block labels induced by a partition.
#[derive(Debug, Clone)]
pub struct ProjectionModel {
    pub blocks: Vec<Vec<usize>>,
    pub pi_bar: Vec<f64>,
    pub matrix: CsrMatrix,
}

impl ProjectionModel {
    pub fn balance_report(&self) -> BalanceReport {
        balance_report(&self.matrix, &self.pi_bar)
    }
}

fn block_assignment(n: usize, blocks: &[Vec<usize>]) -> Result<Vec<usize>> {
    let mut owner = vec![usize::MAX; n];
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::EmptyBlock(b));
        }
        for &i in block {
            if i >= n {
                return Err(Error::NotAPartition(format!("state {i} out of range")));
            }
            if owner[i] != usize::MAX {
                return Err(Error::NotAPartition(format!("state {i} appears in two blocks")));
            }
            owner[i] = b;
        }
    }
    if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::NotAPartition(format!("state {i} is in no block")));
    }
    Ok(owner)
}

/// `P̄(i, j) = (1 / pi(B_i)) sum_{x in B_i, y in B_j} pi(x) P(x, y)` and
/// `pī(i) = pi(B_i)`.
pub fn projection_chain(model: &TransitionModel, blocks: &[Vec<usize>]) -> Result<ProjectionModel> {
    let owner = block_assignment(model.len(), blocks)?;
    let pi_bar: Vec<f64> = blocks.iter().map(|b| b.iter().map(|&i| model.pi[i]).sum()).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); blocks.len()];
    for (i, j, p) in model.matrix.entries() {
        let (a, b) = (owner[i], owner[j]);
        rows[a].push((b, model.pi[i] * p));
    }
    for (a, row) in rows.iter_mut().enumerate() {
        row.iter_mut().for_each(|(_, v)| *v /= pi_bar[a]);
    }
    Ok(ProjectionModel {
        blocks: blocks.to_vec(),
        pi_bar,
        matrix: CsrMatrix::from_rows(rows),
    })
}

fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().expect("fits in f64").ln()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().expect("fits in f64").ln() + shift as f64 * std::f64::consts::LN_2
    }
}

/// Closed-form law of `k = |x|_U` under the Gibbs measure:
/// `pī(k) ∝ C(m, 2k) C_k e^{-alpha k} (e^{-alpha} + e^{-beta})^{m-2k}`.
///
/// Returned in log space, normalized.
pub fn projected_k_log_distribution(m: usize, params: &EnergyParams) -> Vec<f64> {
    let level = log_sum_exp(&[-params.alpha, -params.beta]);
    let log_w: Vec<f64> = (0..=m / 2)
        .map(|k| {
            ln_big(&binomial(m as u64, 2 * k as u64)) + ln_big(&catalan(k as u64)) - params.alpha * k as f64
                + (m - 2 * k) as f64 * level
        })
        .collect();
    let z = log_sum_exp(&log_w);
    log_w.iter().map(|w| w - z).collect()
}

pub fn projected_k_distribution(m: usize, params: &EnergyParams) -> Vec<f64> {
    projected_k_log_distribution(m, params)
        .iter()
        .map(|v| v.exp())
        .collect()
}

/// Log-concavity margins `2 ln pī(k) - ln pī(k-1) - ln pī(k+1)` for interior
/// `k`; all must be nonnegative.
pub fn log_concavity_margins(log_pi: &[f64]) -> Vec<f64> {
    log_pi.windows(3).map(|w| 2.0 * w[1] - w[0] - w[2]).collect()
}

/// Result of one decomposition inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct BoundInstance {
    /// Which chain was decomposed, e.g. `"M"`, `"M_k k=1"`.
    pub chain: String,
    pub states: usize,
    pub blocks: usize,
    pub gap: f64,
    pub projection_gap: f64,
    pub min_restriction_gap: f64,
    /// `(1/2) Gap(P̄) min_i Gap(P_i)`
    pub bound: f64,
    pub holds: bool,
}

/// Dense gap, with a one-state chain taken to have gap 1.
fn gap_or_one(matrix: &CsrMatrix, pi: &[f64]) -> Result<f64> {
    if matrix.dim() <= 1 {
        return Ok(1.0);
    }
    let opts = SpectralOptions {
        method: SpectralMethod::Dense,
        ..Default::default()
    };
    Ok(reversible_gap(matrix, pi, &opts)?.gap)
}

/// Checks `Gap(P) >= (1/2) Gap(P̄) min_i Gap(P_i)` for one partition.
pub fn decomposition_bound(model: &TransitionModel, blocks: &[Vec<usize>], name: &str) -> Result<BoundInstance> {
    if model.len() > DENSE_CAP {
        return Err(Error::CapExceeded {
            m: model.m,
            cap: LAB_CAP,
        });
    }
    let projection = projection_chain(model, blocks)?;
    let gap = gap_or_one(&model.matrix, &model.pi)?;
    let projection_gap = gap_or_one(&projection.matrix, &projection.pi_bar)?;
    let mut min_restriction_gap = f64::INFINITY;
    for block in blocks {
        let r = restriction_chain(model, block)?;
        min_restriction_gap = min_restriction_gap.min(gap_or_one(&r.matrix, &r.pi)?);
    }
    let bound = 0.5 * projection_gap * min_restriction_gap;
    Ok(BoundInstance {
        chain: name.to_string(),
        states: model.len(),
        blocks: blocks.len(),
        gap,
        projection_gap,
        min_restriction_gap,
        bound,
        // Slack covers eigensolver rounding when the bound is tight.
        holds: gap >= bound - 1e-12,
    })
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::ConfigInvalid("m must be at least 1".into()));
    }
    if m > LAB_CAP {
        return Err(Error::CapExceeded { m, cap: LAB_CAP });
    }
    Ok(())
}

/// Runs the inequality on every chain at the given level: the whole chain
/// (`k`), every `M_k` (`kq`), or every `M_{k,q}` (`kqs`).
pub fn check_decomposition_bound(m: usize, params: &EnergyParams, level: Level) -> Result<Vec<BoundInstance>> {
    check_m(m)?;
    let model = build_transition_model(m, params)?;
    bound_instances(&model, level)
}

fn bound_instances(model: &TransitionModel, level: Level) -> Result<Vec<BoundInstance>> {
    let by_k = group_by(model, |x| x.counts().u);
    match level {
        Level::K => {
            let blocks: Vec<Vec<usize>> = by_k.into_iter().map(|(_, b)| b).collect();
            Ok(vec![decomposition_bound(model, &blocks, "M")?])
        }
        Level::Kq => by_k
            .into_iter()
            .map(|(k, block)| {
                let sub = restriction_chain(model, &block)?;
                let blocks: Vec<Vec<usize>> = group_by(&sub, |x| x.level_word()).into_iter().map(|(_, b)| b).collect();
                decomposition_bound(&sub, &blocks, &format!("M_k k={k}"))
            })
            .collect(),
        Level::Kqs => {
            let mut out = Vec::new();
            for ((k, q), block) in group_by(model, |x| (x.counts().u, x.level_word())) {
                let sub = restriction_chain(model, &block)?;
                let blocks: Vec<Vec<usize>> = group_by(&sub, |x| x.skeleton()).into_iter().map(|(_, b)| b).collect();
                out.push(decomposition_bound(
                    &sub,
                    &blocks,
                    &format!("M_kq k={k} q={}", word(&q)),
                )?);
            }
            Ok(out)
        }
    }
}

/// Comparison of the closed-form `pī(k)` with block masses of the exact
/// Gibbs law.
#[derive(Debug, Clone, Serialize)]
pub struct KProjectionReport {
    pub closed_form: Vec<f64>,
    pub oracle: Vec<f64>,
    pub block_sizes: Vec<usize>,
    /// `C(m, 2k) C_k 2^{m-2k}`
    pub expected_block_sizes: Vec<usize>,
    pub max_abs_error: f64,
    pub log_concavity_margins: Vec<f64>,
    pub log_concave: bool,
    pub passes: bool,
}

pub fn check_k_projection(model: &TransitionModel) -> KProjectionReport {
    let m = model.m;
    let log_closed = projected_k_log_distribution(m, &model.params);
    let closed_form: Vec<f64> = log_closed.iter().map(|v| v.exp()).collect();
    let mut oracle = vec![0.0; m / 2 + 1];
    let mut block_sizes = vec![0usize; m / 2 + 1];
    for (x, p) in model.index.states().iter().zip(&model.pi) {
        let k = x.counts().u;
        oracle[k] += p;
        block_sizes[k] += 1;
    }
    let expected_block_sizes: Vec<usize> = (0..=m / 2)
        .map(|k| {
            ((binomial(m as u64, 2 * k as u64) * catalan(k as u64)) << (m - 2 * k))
                .to_usize()
                .expect("small")
        })
        .collect();
    let max_abs_error = closed_form
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let margins = log_concavity_margins(&log_closed);
    let log_concave = margins.iter().all(|&g| g >= -LAB_TOLERANCE);
    KProjectionReport {
        passes: max_abs_error <= LAB_TOLERANCE && log_concave && block_sizes == expected_block_sizes,
        closed_form,
        oracle,
        block_sizes,
        expected_block_sizes,
        max_abs_error,
        log_concavity_margins: margins,
        log_concave,
    }
}

/// Largest energy spread inside any `T_{k,q}` (zero when the premise holds).
pub fn max_energy_spread_within_kq(model: &TransitionModel) -> f64 {
    let mut spread: f64 = 0.0;
    for (_, block) in group_by(model, |x| (x.counts().u, x.level_word())) {
        let energies: Vec<f64> = block
            .iter()
            .map(|&i| path_energy(model.index.path(i), &model.params))
            .collect();
        let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
    }
    spread
}

/// One off-diagonal entry of the projection over skeletons.
#[derive(Debug, Clone, Serialize)]
pub struct SkeletonTransition {
    pub from: DyckPath,
    pub to: DyckPath,
    pub probability: f64,
}

/// Structure of the skeleton projection of the chain restricted to `T_{k,q}`.
#[derive(Debug, Clone, Serialize)]
pub struct SkeletonProjectionReport {
    pub k: usize,
    pub q: String,
    /// `|U_{k,q,s}|` per skeleton.
    pub block_sizes: Vec<(DyckPath, usize)>,
    /// `C(m, 2k)`
    pub expected_block_size: usize,
    pub sizes_match: bool,
    /// `max_s |pī(s) - 1/C_k|`
    pub max_uniformity_error: f64,
    pub uniform: bool,
    pub transitions: Vec<SkeletonTransition>,
    /// Reference value `1/(4 m^2)` for the off-diagonal entries.
    pub reference_probability: f64,
    pub max_transition_deviation: f64,
    pub transitions_match_reference: bool,
}

impl SkeletonProjectionReport {
    /// The structural checks; agreement with the reference transition value
    /// is reported separately.
    pub fn passes(&self) -> bool {
        self.sizes_match && self.uniform
    }
}

fn parse_level_word(q: &str) -> Result<Vec<Symbol>> {
    q.char_indices()
        .map(|(index, c)| match c {
            'H' => Ok(Symbol::H),
            'I' => Ok(Symbol::I),
            found => Err(Error::InvalidSymbol { index, found }),
        })
        .collect()
}

pub fn check_skeleton_projection(
    m: usize,
    k: usize,
    q: &str,
    params: &EnergyParams,
) -> Result<SkeletonProjectionReport> {
    check_m(m)?;
    let q_symbols = parse_level_word(q)?;
    if 2 * k > m || q_symbols.len() != m - 2 * k {
        return Err(Error::ConfigInvalid(format!(
            "level word {q:?} must have length m - 2k = {}",
            m as i64 - 2 * k as i64
        )));
    }
    let model = build_transition_model(m, params)?;
    let block: Vec<usize> = model
        .index
        .states()
        .iter()
        .enumerate()
        .filter(|(_, x)| x.counts().u == k && x.level_word() == q_symbols)
        .map(|(i, _)| i)
        .collect();
    let sub = restriction_chain(&model, &block)?;
    Ok(skeleton_report(&sub, k, q))
}

fn skeleton_report(sub: &TransitionModel, k: usize, q: &str) -> SkeletonProjectionReport {
    let m = sub.m;
    let groups = group_by(sub, |x| x.skeleton());
    let skeletons: Vec<DyckPath> = groups.iter().map(|(s, _)| s.clone()).collect();
    let blocks: Vec<Vec<usize>> = groups.iter().map(|(_, b)| b.clone()).collect();
    let expected_block_size = binomial(m as u64, 2 * k as u64).to_usize().expect("small");
    let block_sizes: Vec<(DyckPath, usize)> = groups.iter().map(|(s, b)| (s.clone(), b.len())).collect();
    let sizes_match = block_sizes.iter().all(|(_, n)| *n == expected_block_size)
        && BigUint::from(skeletons.len()) == catalan(k as u64);
    let projection = projection_chain(sub, &blocks).expect("groups partition the block");
    let uniform_mass = 1.0 / skeletons.len() as f64;
    let max_uniformity_error = projection
        .pi_bar
        .iter()
        .map(|p| (p - uniform_mass).abs())
        .fold(0.0, f64::max);
    let reference_probability = 1.0 / (4.0 * (m * m) as f64);
    let transitions: Vec<SkeletonTransition> = projection
        .matrix
        .entries()
        .filter(|&(i, j, _)| i != j)
        .map(|(i, j, p)| SkeletonTransition {
            from: skeletons[i].clone(),
            to: skeletons[j].clone(),
            probability: p,
        })
        .collect();
    let max_transition_deviation = transitions
        .iter()
        .map(|t| (t.probability - reference_probability).abs())
        .fold(0.0, f64::max);
    SkeletonProjectionReport {
        k,
        q: q.to_string(),
        block_sizes,
        expected_block_size,
        sizes_match,
        max_uniformity_error,
        uniform: max_uniformity_error <= LAB_TOLERANCE,
        transitions,
        reference_probability,
        max_transition_deviation,
        transitions_match_reference: max_transition_deviation <= LAB_TOLERANCE,
    }
}

/// Everything the lab checks for one `(m, alpha, beta)`, up to `level`.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub m: usize,
    pub params: EnergyParams,
    pub level: Level,
    pub states: usize,
    pub model_balance: BalanceReport,
    pub k_projection: KProjectionReport,
    pub k_projection_balance: BalanceReport,
    /// Present from level `kq` on.
    pub max_energy_spread_within_kq: Option<f64>,
    /// Present at level `kqs`.
    pub skeleton_projections: Option<Vec<SkeletonProjectionReport>>,
    pub bounds: Vec<BoundInstance>,
    pub all_passed: bool,
}

pub fn decomposition_report(m: usize, params: &EnergyParams, level: Level) -> Result<DecompositionReport> {
    check_m(m)?;
    let model = build_transition_model(m, params)?;
    let k_projection = check_k_projection(&model);
    let k_blocks: Vec<Vec<usize>> = group_by(&model, |x| x.counts().u).into_iter().map(|(_, b)| b).collect();
    let k_projection_balance = projection_chain(&model, &k_blocks)?.balance_report();
    let mut bounds = bound_instances(&model, Level::K)?;
    let mut spread = None;
    let mut skeletons = None;
    if matches!(level, Level::Kq | Level::Kqs) {
        spread = Some(max_energy_spread_within_kq(&model));
        bounds.extend(bound_instances(&model, Level::Kq)?);
    }
    if level == Level::Kqs {
        let mut reports = Vec::new();
        for ((k, q), block) in group_by(&model, |x| (x.counts().u, x.level_word())) {
            let sub = restriction_chain(&model, &block)?;
            reports.push(skeleton_report(&sub, k, &word(&q)));
        }
        skeletons = Some(reports);
        bounds.extend(bound_instances(&model, Level::Kqs)?);
    }
    let model_balance = model.balance_report();
    let all_passed = model_balance.passes(LAB_TOLERANCE)
        && k_projection.passes
        && k_projection_balance.passes(LAB_TOLERANCE)
        && spread.is_none_or(|s| s <= LAB_TOLERANCE)
        && skeletons
            .as_ref()
            .is_none_or(|r| r.iter().all(SkeletonProjectionReport::passes))
        && bounds.iter().all(|b| b.holds);
    Ok(DecompositionReport {
        m,
        params: *params,
        level,
        states: model.len(),
        model_balance,
        k_projection,
        k_projection_balance,
        max_energy_spread_within_kq: spread,
        skeleton_projections: skeletons,
        bounds,
        all_passed,
    })
}
