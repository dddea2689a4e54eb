//! The heat-bath Markov chain on 2-Motzkin paths of length `m`.
//!
//! Each step draws a move class uniformly from four:
//!
//! 1. an adjacent pair `UD` ↔ `HH` (changes the energy by `±alpha`);
//! 2. a single level step `H` ↔ `I` (changes it by `±(alpha - beta)`);
//! 3. two arbitrary positions holding `U`/`D` are swapped, rejected if the
//!    result dips below the axis;
//! 4. an adjacent vertical/level pair is reversed.
//!
//! Every proposal carries an extra acceptance factor of 1/2, so the chain is
//! lazy and its spectrum is nonnegative. The stationary distribution is the
//! Gibbs measure `exp(-E(x)) / Z`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::energy::{energy_from_counts, EnergyParams};
use crate::error::{Error, Result};
use crate::paths::{Symbol, TwoMotzkinPath};
use crate::tree::{path_degree_profile, DegreeProfile};

/// Acceptance probabilities of the four parameter-dependent updates, with
/// the global factor 1/2 folded in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoveProbabilities {
    pub ud_to_hh: f64,
    pub hh_to_ud: f64,
    pub i_to_h: f64,
    pub h_to_i: f64,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MoveProbabilities {
    pub fn new(params: &EnergyParams) -> Self {
        let (a, b) = (params.alpha, params.beta);
        MoveProbabilities {
            // e^{-a} / (2 (1 + e^{-a}))
            ud_to_hh: 0.5 * logistic(-a),
            // 1 / (2 (1 + e^{-a}))
            hh_to_ud: 0.5 * logistic(a),
            // e^{-a} / (2 (e^{-a} + e^{-b}))
            i_to_h: 0.5 * logistic(b - a),
            // e^{-b} / (2 (e^{-a} + e^{-b}))
            h_to_i: 0.5 * logistic(a - b),
        }
    }
}

/// Everything needed to start a chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainConfig {
    pub m: usize,
    pub params: EnergyParams,
    pub seed: u64,
    /// Stream selector; chains with equal seeds and different streams draw
    /// independent random numbers.
    pub stream: u64,
    pub initial_state: TwoMotzkinPath,
}

impl ChainConfig {
    /// Starts from `H^m` on stream 0.
    pub fn new(m: usize, params: EnergyParams, seed: u64) -> Self {
        ChainConfig {
            m,
            params,
            seed,
            stream: 0,
            initial_state: TwoMotzkinPath::all_h(m),
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_initial_state(mut self, x: TwoMotzkinPath) -> Self {
        self.initial_state = x;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::ConfigInvalid(
                "the chain needs m >= 1 (trees with at least 2 edges)".into(),
            ));
        }
        if self.initial_state.len() != self.m {
            return Err(Error::LengthMismatch {
                left: self.initial_state.len(),
                right: self.m,
            });
        }
        if !self.params.alpha.is_finite() || !self.params.beta.is_finite() {
            return Err(Error::ConfigInvalid("alpha and beta must be finite".into()));
        }
        Ok(())
    }
}

/// A running chain: current path, step counter and generator state.
#[derive(Debug, Clone)]
pub struct Chain {
    symbols: Vec<Symbol>,
    // heights[p] is the height after symbol p.
    heights: Vec<u32>,
    probs: MoveProbabilities,
    params: EnergyParams,
    rng: ChaCha8Rng,
    steps: u64,
}

impl Chain {
    pub fn new(cfg: &ChainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(cfg.stream);
        Ok(Chain {
            heights: cfg.initial_state.heights(),
            symbols: cfg.initial_state.symbols().to_vec(),
            probs: MoveProbabilities::new(&cfg.params),
            params: cfg.params,
            rng,
            steps: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.symbols.len()
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn state(&self) -> TwoMotzkinPath {
        TwoMotzkinPath::from_symbols_unchecked(self.symbols.clone())
    }

    pub fn energy(&self) -> f64 {
        let c = crate::paths::symbol_counts(&self.symbols);
        energy_from_counts(c.u, c.h, c.i, &self.params)
    }

    /// Moves the chain to `x` without touching the generator or counter.
    pub fn reset_to(&mut self, x: &TwoMotzkinPath) -> Result<()> {
        if x.len() != self.m() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: self.m(),
            });
        }
        self.symbols.copy_from_slice(x.symbols());
        self.heights = x.heights();
        Ok(())
    }

    /// Performs one transition.
    pub fn step(&mut self) {
        self.steps += 1;
        let m = self.symbols.len();
        match self.rng.random_range(0..4u32) {
            0 => {
                if m < 2 {
                    return;
                }
                let i = self.rng.random_range(0..m as u32 - 1) as usize;
                match (self.symbols[i], self.symbols[i + 1]) {
                    (Symbol::U, Symbol::D) if self.rng.random_bool(self.probs.ud_to_hh) => {
                        self.symbols[i] = Symbol::H;
                        self.symbols[i + 1] = Symbol::H;
                        self.heights[i] -= 1;
                    }
                    (Symbol::H, Symbol::H) if self.rng.random_bool(self.probs.hh_to_ud) => {
                        self.symbols[i] = Symbol::U;
                        self.symbols[i + 1] = Symbol::D;
                        self.heights[i] += 1;
                    }
                    _ => {}
                }
            }
            1 => {
                let i = self.rng.random_range(0..m as u32) as usize;
                match self.symbols[i] {
                    Symbol::I if self.rng.random_bool(self.probs.i_to_h) => self.symbols[i] = Symbol::H,
                    Symbol::H if self.rng.random_bool(self.probs.h_to_i) => self.symbols[i] = Symbol::I,
                    _ => {}
                }
            }
            2 => {
                let i = self.rng.random_range(0..m as u32) as usize;
                let j = self.rng.random_range(0..m as u32) as usize;
                if self.symbols[i].is_vertical() && self.symbols[j].is_vertical() && self.rng.random_bool(0.5) {
                    self.try_swap_vertical(i.min(j), i.max(j));
                }
            }
            _ => {
                if m < 2 {
                    return;
                }
                let i = self.rng.random_range(0..m as u32 - 1) as usize;
                let (a, b) = (self.symbols[i], self.symbols[i + 1]);
                if a.is_vertical() != b.is_vertical() && self.rng.random_bool(0.5) {
                    self.symbols[i] = b;
                    self.symbols[i + 1] = a;
                    let before = if i == 0 { 0 } else { self.heights[i - 1] };
                    self.heights[i] = (before as i32 + b.delta()) as u32;
                }
            }
        }
    }

    /// Swaps positions `a < b`, both vertical, unless that would make the
    /// path dip below the axis.
    fn try_swap_vertical(&mut self, a: usize, b: usize) {
        match (self.symbols[a], self.symbols[b]) {
            (Symbol::U, Symbol::D) => {
                // Heights on [a, b) drop by 2.
                if self.heights[a..b].iter().all(|&h| h >= 2) {
                    self.heights[a..b].iter_mut().for_each(|h| *h -= 2);
                    self.symbols.swap(a, b);
                }
            }
            (Symbol::D, Symbol::U) => {
                self.heights[a..b].iter_mut().for_each(|h| *h += 2);
                self.symbols.swap(a, b);
            }
            _ => {}
        }
    }

    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Runs `total_steps` transitions, handing the state at every step `t`
    /// with `t >= burn_in` and `(t - burn_in) % thin == 0` to the collector.
    /// Step `t = 0` is the starting state. Step numbers are relative to the
    /// start of this call.
    pub fn run<C: Collector + ?Sized>(
        &mut self,
        total_steps: u64,
        burn_in: u64,
        thin: u64,
        with_profile: bool,
        collector: &mut C,
    ) -> Result<u64> {
        if thin == 0 {
            return Err(Error::ConfigInvalid("thin must be at least 1".into()));
        }
        if burn_in > total_steps {
            return Err(Error::ConfigInvalid(format!(
                "burn-in {burn_in} exceeds total steps {total_steps}"
            )));
        }
        self.advance(burn_in);
        let mut emitted = 0;
        let mut t = burn_in;
        loop {
            let path = self.state();
            let profile = with_profile.then(|| path_degree_profile(&path));
            collector.collect(&Sample {
                step: t,
                energy: self.energy(),
                path,
                profile,
            })?;
            emitted += 1;
            if total_steps - t < thin {
                break;
            }
            self.advance(thin);
            t += thin;
        }
        // Remaining steps after the last emitted sample.
        self.advance(total_steps - t);
        Ok(emitted)
    }
}

/// One emitted state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub step: u64,
    pub path: TwoMotzkinPath,
    pub energy: f64,
    pub profile: Option<DegreeProfile>,
}

/// Receives samples from [`Chain::run`].
pub trait Collector {
    fn collect(&mut self, sample: &Sample) -> Result<()>;
}

impl<F: FnMut(&Sample) -> Result<()>> Collector for F {
    fn collect(&mut self, sample: &Sample) -> Result<()> {
        self(sample)
    }
}

impl Collector for Vec<Sample> {
    fn collect(&mut self, sample: &Sample) -> Result<()> {
        self.push(sample.clone());
        Ok(())
    }
}

/// Enumerates every state reachable in one step from `x` together with its
/// probability, excluding `x` itself. Sorted by target path.
pub fn neighbors(x: &TwoMotzkinPath, params: &EnergyParams) -> Vec<(TwoMotzkinPath, f64)> {
    let m = x.len();
    let probs = MoveProbabilities::new(params);
    let mut out: Vec<(Vec<Symbol>, f64)> = Vec::new();
    if m == 0 {
        return Vec::new();
    }
    let sym = x.symbols();
    let quarter = 0.25;
    if m >= 2 {
        let per_pair = quarter / (m - 1) as f64;
        for i in 0..m - 1 {
            let (replacement, p) = match (sym[i], sym[i + 1]) {
                (Symbol::U, Symbol::D) => ([Symbol::H, Symbol::H], probs.ud_to_hh),
                (Symbol::H, Symbol::H) => ([Symbol::U, Symbol::D], probs.hh_to_ud),
                _ => continue,
            };
            let mut y = sym.to_vec();
            y[i..i + 2].copy_from_slice(&replacement);
            out.push((y, per_pair * p));
        }
        for i in 0..m - 1 {
            if sym[i].is_vertical() != sym[i + 1].is_vertical() {
                let mut y = sym.to_vec();
                y.swap(i, i + 1);
                out.push((y, per_pair * 0.5));
            }
        }
    }
    let per_site = quarter / m as f64;
    for i in 0..m {
        let (c, p) = match sym[i] {
            Symbol::I => (Symbol::H, probs.i_to_h),
            Symbol::H => (Symbol::I, probs.h_to_i),
            _ => continue,
        };
        let mut y = sym.to_vec();
        y[i] = c;
        out.push((y, per_site * p));
    }
    // Ordered draws (i, j) and (j, i) give the same swap.
    let per_ordered_pair = quarter / (m * m) as f64 * 0.5;
    for i in 0..m {
        for j in 0..m {
            if i == j || !sym[i].is_vertical() || !sym[j].is_vertical() || sym[i] == sym[j] {
                continue;
            }
            let mut y = sym.to_vec();
            y.swap(i, j);
            if is_valid(&y) {
                out.push((y, per_ordered_pair));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(TwoMotzkinPath, f64)> = Vec::with_capacity(out.len());
    for (y, p) in out {
        match merged.last_mut() {
            Some((last, q)) if last.symbols() == y.as_slice() => *q += p,
            _ => merged.push((TwoMotzkinPath::from_symbols_unchecked(y), p)),
        }
    }
    merged
}

fn is_valid(symbols: &[Symbol]) -> bool {
    let mut h = 0i32;
    for s in symbols {
        h += s.delta();
        if h < 0 {
            return false;
        }
    }
    h == 0
}

/// Exact one-step probability `P(x, y)`.
pub fn transition_probability(x: &TwoMotzkinPath, y: &TwoMotzkinPath, params: &EnergyParams) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let out = neighbors(x, params);
    if x == y {
        let leaving: f64 = out.iter().map(|(_, p)| p).sum();
        return Ok(1.0 - leaving);
    }
    Ok(out.binary_search_by(|(z, _)| z.cmp(y)).map(|k| out[k].1).unwrap_or(0.0))
}
