//! 2-Motzkin paths, Dyck paths and the integer sequences that count them.
//!
//! A 2-Motzkin path of length `m` is a word over `{U, H, I, D}` in which no
//! prefix holds more `D`s than `U`s and the whole word is balanced. `H` and
//! `I` are the two colours of level step. Words are stored one byte per
//! symbol and render as plain ASCII.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `m` accepted by [`enumerate_paths`] unless a cap is given.
pub const DEFAULT_ENUMERATION_CAP: usize = 12;

/// One step of a 2-Motzkin path.
///
/// The discriminants fix the enumeration order `U < H < I < D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Symbol {
    U = 0,
    H = 1,
    I = 2,
    D = 3,
}

impl Symbol {
    pub const ALL: [Symbol; 4] = [Symbol::U, Symbol::H, Symbol::I, Symbol::D];

    pub fn from_ascii(c: u8) -> Option<Symbol> {
        match c {
            b'U' => Some(Symbol::U),
            b'H' => Some(Symbol::H),
            b'I' => Some(Symbol::I),
            b'D' => Some(Symbol::D),
            _ => None,
        }
    }

    pub fn as_ascii(self) -> u8 {
        match self {
            Symbol::U => b'U',
            Symbol::H => b'H',
            Symbol::I => b'I',
            Symbol::D => b'D',
        }
    }

    /// `U` or `D`.
    #[inline]
    pub fn is_vertical(self) -> bool {
        matches!(self, Symbol::U | Symbol::D)
    }

    /// `H` or `I`.
    #[inline]
    pub fn is_level(self) -> bool {
        matches!(self, Symbol::H | Symbol::I)
    }

    /// Height change contributed by this step.
    #[inline]
    pub fn delta(self) -> i32 {
        match self {
            Symbol::U => 1,
            Symbol::D => -1,
            Symbol::H | Symbol::I => 0,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_ascii() as char)
    }
}

/// Number of occurrences of each symbol in a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SymbolCounts {
    pub u: usize,
    pub h: usize,
    pub i: usize,
    pub d: usize,
}

impl SymbolCounts {
    pub fn len(&self) -> usize {
        self.u + self.h + self.i + self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated 2-Motzkin path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TwoMotzkinPath {
    symbols: Vec<Symbol>,
}

impl TwoMotzkinPath {
    /// Parses and validates an ASCII word.
    pub fn parse(word: &str) -> Result<Self> {
        let mut symbols = Vec::with_capacity(word.len());
        for (index, c) in word.char_indices() {
            let sym = u8::try_from(c)
                .ok()
                .and_then(Symbol::from_ascii)
                .ok_or(Error::InvalidSymbol { index, found: c })?;
            symbols.push(sym);
        }
        Self::from_symbols(symbols)
    }

    /// Validates a symbol sequence.
    pub fn from_symbols(symbols: Vec<Symbol>) -> Result<Self> {
        check_prefix_balance(&symbols)?;
        Ok(TwoMotzkinPath { symbols })
    }

    /// Skips validation. Callers must guarantee the path invariants.
    pub(crate) fn from_symbols_unchecked(symbols: Vec<Symbol>) -> Self {
        debug_assert!(check_prefix_balance(&symbols).is_ok());
        TwoMotzkinPath { symbols }
    }

    /// The path `H^m`, valid for every `m`.
    pub fn all_h(m: usize) -> Self {
        TwoMotzkinPath {
            symbols: vec![Symbol::H; m],
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.symbols
    }

    pub fn counts(&self) -> SymbolCounts {
        symbol_counts(&self.symbols)
    }

    pub fn skeleton(&self) -> DyckPath {
        DyckPath {
            symbols: self.symbols.iter().copied().filter(|s| s.is_vertical()).collect(),
        }
    }

    /// The subsequence of level steps (`H`/`I`), in order.
    pub fn level_word(&self) -> Vec<Symbol> {
        self.symbols.iter().copied().filter(|s| s.is_level()).collect()
    }

    /// Height after each step (`heights()[p]` is the height after symbol `p`).
    pub fn heights(&self) -> Vec<u32> {
        let mut h = 0i32;
        self.symbols
            .iter()
            .map(|s| {
                h += s.delta();
                h as u32
            })
            .collect()
    }
}

impl fmt::Display for TwoMotzkinPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_symbols(f, &self.symbols)
    }
}

impl FromStr for TwoMotzkinPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TwoMotzkinPath::parse(s)
    }
}

impl Serialize for TwoMotzkinPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TwoMotzkinPath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        TwoMotzkinPath::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A Dyck path: a 2-Motzkin path without level steps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DyckPath {
    symbols: Vec<Symbol>,
}

impl DyckPath {
    pub fn parse(word: &str) -> Result<Self> {
        let path = TwoMotzkinPath::parse(word)?;
        if let Some(index) = path.symbols.iter().position(|s| s.is_level()) {
            return Err(Error::InvalidSymbol {
                index,
                found: path.symbols[index].as_ascii() as char,
            });
        }
        Ok(DyckPath { symbols: path.symbols })
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// Number of `U` steps (half the length).
    pub fn semilength(&self) -> usize {
        self.symbols.len() / 2
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl fmt::Display for DyckPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_symbols(f, &self.symbols)
    }
}

impl Serialize for DyckPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

fn write_symbols(f: &mut fmt::Formatter<'_>, symbols: &[Symbol]) -> fmt::Result {
    // Symbols are ASCII by construction.
    let bytes: Vec<u8> = symbols.iter().map(|s| s.as_ascii()).collect();
    f.write_str(std::str::from_utf8(&bytes).expect("ascii"))
}

fn check_prefix_balance(symbols: &[Symbol]) -> Result<()> {
    // Positions of currently unmatched `U`s.
    let mut open = Vec::new();
    for (index, &s) in symbols.iter().enumerate() {
        match s {
            Symbol::U => open.push(index),
            Symbol::D => {
                if open.pop().is_none() {
                    return Err(Error::NegativePrefix { index });
                }
            }
            Symbol::H | Symbol::I => {}
        }
    }
    match open.first() {
        Some(&index) => Err(Error::Unbalanced { index }),
        None => Ok(()),
    }
}

/// Validates a raw ASCII word.
pub fn validate(word: &str) -> Result<TwoMotzkinPath> {
    TwoMotzkinPath::parse(word)
}

pub fn symbol_counts(symbols: &[Symbol]) -> SymbolCounts {
    let mut c = SymbolCounts::default();
    for s in symbols {
        match s {
            Symbol::U => c.u += 1,
            Symbol::H => c.h += 1,
            Symbol::I => c.i += 1,
            Symbol::D => c.d += 1,
        }
    }
    c
}

pub fn skeleton(x: &TwoMotzkinPath) -> DyckPath {
    x.skeleton()
}

/// All 2-Motzkin paths of length `m` in lexicographic order (`U < H < I < D`).
pub fn enumerate_paths(m: usize) -> Result<Vec<TwoMotzkinPath>> {
    enumerate_paths_with_cap(m, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_paths_with_cap(m: usize, cap: usize) -> Result<Vec<TwoMotzkinPath>> {
    if m > cap {
        return Err(Error::CapExceeded { m, cap });
    }
    let mut out = Vec::new();
    let mut word = Vec::with_capacity(m);
    extend_paths(m, 0, &mut word, &mut out);
    Ok(out)
}

fn extend_paths(m: usize, height: usize, word: &mut Vec<Symbol>, out: &mut Vec<TwoMotzkinPath>) {
    let remaining = m - word.len();
    if remaining == 0 {
        out.push(TwoMotzkinPath::from_symbols_unchecked(word.clone()));
        return;
    }
    for s in Symbol::ALL {
        let next = match s {
            // Must still be able to return to the axis.
            Symbol::U if height < remaining - 1 => height + 1,
            Symbol::H | Symbol::I if height < remaining => height,
            Symbol::D if height > 0 => height - 1,
            _ => continue,
        };
        word.push(s);
        extend_paths(m, next, word, out);
        word.pop();
    }
}

/// All Dyck paths of semilength `k`, lexicographic with `U < D`.
pub fn enumerate_dyck_paths(k: usize) -> Vec<DyckPath> {
    fn go(k: usize, ups: usize, downs: usize, word: &mut Vec<Symbol>, out: &mut Vec<DyckPath>) {
        if ups == k && downs == k {
            out.push(DyckPath { symbols: word.clone() });
            return;
        }
        if ups < k {
            word.push(Symbol::U);
            go(k, ups + 1, downs, word, out);
            word.pop();
        }
        if downs < ups {
            word.push(Symbol::D);
            go(k, ups, downs + 1, word, out);
            word.pop();
        }
    }
    let mut out = Vec::new();
    go(k, 0, 0, &mut Vec::with_capacity(2 * k), &mut out);
    out
}

/// Binomial coefficient `C(n, k)`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for j in 0..k {
        acc *= n - j;
        acc /= j + 1;
    }
    acc
}

/// Catalan number `C_n = binom(2n, n) / (n + 1)`.
pub fn catalan(n: u64) -> BigUint {
    binomial(2 * n, n) / (n + 1)
}

/// Motzkin number `M_n = sum_k binom(n, 2k) C_k`.
pub fn motzkin(n: u64) -> BigUint {
    (0..=n / 2).map(|k| binomial(n, 2 * k) * catalan(k)).sum()
}
