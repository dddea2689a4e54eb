//! Exhaustive ground truth for small `m`: the Gibbs distribution, the full
//! transition matrix, balance and stationarity checks, and total-variation
//! decay.

use std::collections::HashMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::chain::neighbors;
use crate::energy::{path_energy, EnergyParams};
use crate::error::{Error, Result};
use crate::paths::{enumerate_paths_with_cap, TwoMotzkinPath};
use crate::sparse::CsrMatrix;

/// Largest `m` for exhaustive enumeration (`C_11 = 58786` states).
pub const EXACT_CAP: usize = 10;

/// Relative tolerance for detailed balance and stationarity.
pub const BALANCE_TOLERANCE: f64 = 1e-12;

/// Dense state numbering in enumeration order.
#[derive(Debug, Clone)]
pub struct StateIndex {
    states: Vec<TwoMotzkinPath>,
    lookup: HashMap<TwoMotzkinPath, usize>,
}

impl StateIndex {
    pub fn new(m: usize) -> Result<Self> {
        Self::with_cap(m, EXACT_CAP)
    }

    pub fn with_cap(m: usize, cap: usize) -> Result<Self> {
        Ok(Self::from_states(enumerate_paths_with_cap(m, cap)?))
    }

    pub fn from_states(states: Vec<TwoMotzkinPath>) -> Self {
        let lookup = states.iter().cloned().enumerate().map(|(i, x)| (x, i)).collect();
        StateIndex { states, lookup }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, x: &TwoMotzkinPath) -> Option<usize> {
        self.lookup.get(x).copied()
    }

    pub fn path(&self, i: usize) -> &TwoMotzkinPath {
        &self.states[i]
    }

    pub fn states(&self) -> &[TwoMotzkinPath] {
        &self.states
    }

    /// SHA-256 over the newline-terminated state words, hex encoded.
    pub fn order_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for x in &self.states {
            hasher.update(x.to_string().as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// `log sum exp` of a slice; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalized Gibbs weights over `states` and the log partition function.
pub fn gibbs_over(states: &[TwoMotzkinPath], params: &EnergyParams) -> (Vec<f64>, f64) {
    let log_w: Vec<f64> = states.iter().map(|x| -path_energy(x, params)).collect();
    let log_z = log_sum_exp(&log_w);
    (log_w.iter().map(|w| (w - log_z).exp()).collect(), log_z)
}

/// Exact Gibbs distribution over all paths of length `m`, in enumeration
/// order, with `log Z`.
pub fn gibbs_distribution(m: usize, params: &EnergyParams) -> Result<(Vec<f64>, f64)> {
    let states = enumerate_paths_with_cap(m, EXACT_CAP)?;
    Ok(gibbs_over(&states, params))
}

/// A finite reversible chain with its stationary law.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub m: usize,
    pub params: EnergyParams,
    pub index: StateIndex,
    pub matrix: CsrMatrix,
    pub pi: Vec<f64>,
    pub log_z: f64,
}

/// Worst-case deviations of a model from the properties it must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceReport {
    /// `max |pi(x)P(x,y) - pi(y)P(y,x)|`
    pub max_flow_discrepancy: f64,
    /// `max pi(x)P(x,y)` over all stored entries.
    pub max_flow: f64,
    /// `max_y |(pi P)(y) - pi(y)|`
    pub stationarity_residual: f64,
    /// `max_x |sum_y P(x,y) - 1|`
    pub row_sum_error: f64,
    /// `|sum pi - 1|`
    pub mass_error: f64,
    /// Worst pair for the flow discrepancy.
    pub worst_pair: (usize, usize),
}

impl BalanceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_flow_discrepancy <= tol * self.max_flow
            && self.stationarity_residual <= tol
            && self.row_sum_error <= tol
            && self.mass_error <= tol
    }
}

/// Balance, stationarity and normalization residuals of `matrix` against `pi`.
pub fn balance_report(matrix: &CsrMatrix, pi: &[f64]) -> BalanceReport {
    let mut max_flow: f64 = 0.0;
    let mut max_flow_discrepancy: f64 = 0.0;
    let mut worst_pair = (0, 0);
    for (i, j, p) in matrix.entries() {
        let flow = pi[i] * p;
        max_flow = max_flow.max(flow);
        let back = pi[j] * matrix.get(j, i);
        let d = (flow - back).abs();
        if d > max_flow_discrepancy {
            max_flow_discrepancy = d;
            worst_pair = (i, j);
        }
    }
    let mut pushed = vec![0.0; pi.len()];
    matrix.vec_mul(pi, &mut pushed);
    let stationarity_residual = pushed.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let row_sum_error = matrix.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let mass_error = (pi.iter().sum::<f64>() - 1.0).abs();
    BalanceReport {
        max_flow_discrepancy,
        max_flow,
        stationarity_residual,
        row_sum_error,
        mass_error,
        worst_pair,
    }
}

/// Assembles the full transition matrix of the chain for length `m` and
/// verifies balance and stationarity before returning it.
pub fn build_transition_model(m: usize, params: &EnergyParams) -> Result<TransitionModel> {
    build_transition_model_with_cap(m, params, EXACT_CAP)
}

pub fn build_transition_model_with_cap(m: usize, params: &EnergyParams, cap: usize) -> Result<TransitionModel> {
    if m == 0 {
        return Err(Error::ConfigInvalid("the chain needs m >= 1".into()));
    }
    let index = StateIndex::with_cap(m, cap)?;
    let rows: Vec<Vec<(usize, f64)>> = index
        .states()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let out = neighbors(x, params);
            let leaving: f64 = out.iter().map(|(_, p)| p).sum();
            let mut row: Vec<(usize, f64)> = out
                .into_iter()
                .map(|(y, p)| (index.index_of(&y).expect("neighbor is a valid path"), p))
                .collect();
            row.push((i, 1.0 - leaving));
            row
        })
        .collect();
    let (pi, log_z) = gibbs_over(index.states(), params);
    let model = TransitionModel {
        m,
        params: *params,
        index,
        matrix: CsrMatrix::from_rows(rows),
        pi,
        log_z,
    };
    let report = model.balance_report();
    if !report.passes(BALANCE_TOLERANCE) {
        let (x, y) = report.worst_pair;
        return Err(Error::BalanceViolation {
            x,
            y,
            discrepancy: report.max_flow_discrepancy,
        });
    }
    Ok(model)
}

impl TransitionModel {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn balance_report(&self) -> BalanceReport {
        balance_report(&self.matrix, &self.pi)
    }

    /// Whether every state reaches every other through positive entries.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return true;
        }
        let reach = |forward: bool| {
            let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (i, j, p) in self.matrix.entries() {
                if p > 0.0 && i != j {
                    if forward {
                        adj[i].push(j);
                    } else {
                        adj[j].push(i);
                    }
                }
            }
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Minimum holding probability `min_x P(x, x)`.
    pub fn min_holding(&self) -> f64 {
        (0..self.len())
            .map(|i| self.matrix.get(i, i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Expectation of `f` under `pi`.
    pub fn expectation(&self, f: impl Fn(&TwoMotzkinPath) -> f64) -> f64 {
        self.index.states().iter().zip(&self.pi).map(|(x, p)| p * f(x)).sum()
    }
}

/// Total-variation distance `(1/2) sum |p - q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `TV(P^t(x0, .), pi)` for `t = 0..=horizon`.
pub fn tv_decay_curve(model: &TransitionModel, x0: &TwoMotzkinPath, horizon: usize) -> Result<Vec<(usize, f64)>> {
    let start = model.index.index_of(x0).ok_or_else(|| {
        if x0.len() != model.m {
            Error::LengthMismatch {
                left: x0.len(),
                right: model.m,
            }
        } else {
            Error::ConfigInvalid(format!("{x0} is not a state of this model"))
        }
    })?;
    let mut dist = vec![0.0; model.len()];
    dist[start] = 1.0;
    let mut next = vec![0.0; model.len()];
    let mut out = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        out.push((t, tv_distance(&dist, &model.pi)?));
        if t < horizon {
            model.matrix.vec_mul(&dist, &mut next);
            std::mem::swap(&mut dist, &mut next);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::transition_probability;

    fn p(s: &str) -> TwoMotzkinPath {
        TwoMotzkinPath::parse(s).unwrap()
    }

    #[test]
    fn gibbs_examples() {
        let (pi, log_z) = gibbs_distribution(2, &EnergyParams::default()).unwrap();
        assert_eq!(pi.len(), 5);
        assert!(pi.iter().all(|&v| (v - 0.2).abs() < 1e-15));
        assert!((log_z - 5f64.ln()).abs() < 1e-15);
        let (pi, _) = gibbs_distribution(1, &EnergyParams::new(0.0, 2f64.ln())).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-15);
        let (pi, _) = gibbs_distribution(7, &EnergyParams::new(-2.8, -3.0)).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            gibbs_distribution(11, &EnergyParams::default()),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn log_partition_survives_large_energies() {
        // e^{-E} underflows for every state here; log space keeps it finite.
        let (pi, log_z) = gibbs_distribution(8, &EnergyParams::new(120.0, 150.0)).unwrap();
        assert!(log_z.is_finite());
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_small_example() {
        let model = build_transition_model(2, &EnergyParams::default()).unwrap();
        let ud = model.index.index_of(&p("UD")).unwrap();
        let hh = model.index.index_of(&p("HH")).unwrap();
        assert_eq!(model.matrix.get(ud, hh), 1.0 / 16.0);
        assert_eq!(model.matrix.get(hh, ud), 1.0 / 16.0);
        assert!(model.is_strongly_connected());
        assert!(matches!(
            build_transition_model(0, &EnergyParams::default()),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn model_entries_agree_with_transition_probability() {
        let e = EnergyParams::new(0.8, -0.3);
        let model = build_transition_model(4, &e).unwrap();
        for (i, x) in model.index.states().iter().enumerate() {
            for (j, y) in model.index.states().iter().enumerate() {
                let direct = transition_probability(x, y, &e).unwrap();
                assert!((model.matrix.get(i, j) - direct).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn balance_detects_a_broken_kernel() {
        let mut model = build_transition_model(3, &EnergyParams::new(0.5, 0.5)).unwrap();
        // Inflate one off-diagonal entry and take the mass from the diagonal.
        let (i, j, _) = model.matrix.entries().find(|&(i, j, _)| i != j).unwrap();
        model.matrix = model.matrix.map_values(|r, c, v| {
            if (r, c) == (i, j) {
                v * 1.5
            } else if (r, c) == (i, i) {
                v - 0.5 * model.matrix.get(i, j)
            } else {
                v
            }
        });
        let report = model.balance_report();
        assert!(!report.passes(BALANCE_TOLERANCE));
        assert!(report.row_sum_error < 1e-15);
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tv_distance(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), 0.5);
        assert!(tv_distance(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn tv_curve_decays() {
        let model = build_transition_model(5, &EnergyParams::new(0.3, -0.2)).unwrap();
        let x0 = p("HHHHH");
        let curve = tv_decay_curve(&model, &x0, 3000).unwrap();
        let i0 = model.index.index_of(&x0).unwrap();
        assert!((curve[0].1 - (1.0 - model.pi[i0])).abs() < 1e-15);
        assert!(curve.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        assert!(curve.last().unwrap().1 < 1e-6);
        assert!(tv_decay_curve(&model, &p("HH"), 3).is_err());
    }
}
