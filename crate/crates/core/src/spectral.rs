//! Spectral gap of a reversible chain.
//!
//! A chain reversible with respect to `pi` is similar to the symmetric
//! matrix `S = D^{1/2} P D^{-1/2}`, `D = diag(pi)`, whose top eigenvector is
//! `sqrt(pi)` with eigenvalue 1. The gap is `1 - lambda_1`, where
//! `lambda_1` is the largest eigenvalue modulus on the orthogonal complement
//! of `sqrt(pi)`. Small chains use a dense symmetric eigensolver; larger
//! ones use power iteration restricted to that complement.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::TransitionModel;
use crate::sparse::CsrMatrix;

/// Largest state count handled densely by [`SpectralMethod::Auto`]
/// (`C_8 = 1430`, i.e. `m = 7`).
pub const DENSE_CAP: usize = 1430;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    Auto,
    Dense,
    PowerIteration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralOptions {
    pub method: SpectralMethod,
    /// Residual `||S v - lambda v||` at which power iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seed for the power-iteration start vector.
    pub seed: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            method: SpectralMethod::Auto,
            tolerance: 1e-10,
            max_iterations: 2_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    /// Second-largest eigenvalue modulus.
    pub lambda1: f64,
    pub gap: f64,
    pub relaxation_time: f64,
    pub method: SpectralMethod,
    pub residual: f64,
    pub iterations: usize,
}

impl SpectralReport {
    fn new(n: usize, lambda1: f64, method: SpectralMethod, residual: f64, iterations: usize) -> Self {
        let gap = 1.0 - lambda1;
        SpectralReport {
            n,
            lambda1,
            gap,
            relaxation_time: 1.0 / gap,
            method,
            residual,
            iterations,
        }
    }
}

pub fn spectral_gap(model: &TransitionModel) -> Result<SpectralReport> {
    reversible_gap(&model.matrix, &model.pi, &SpectralOptions::default())
}

pub fn spectral_gap_with(model: &TransitionModel, opts: &SpectralOptions) -> Result<SpectralReport> {
    reversible_gap(&model.matrix, &model.pi, opts)
}

/// Gap of the chain `matrix`, reversible with respect to `pi`.
pub fn reversible_gap(matrix: &CsrMatrix, pi: &[f64], opts: &SpectralOptions) -> Result<SpectralReport> {
    let n = matrix.dim();
    if n <= 1 {
        return Err(Error::DegenerateStateSpace);
    }
    let method = match opts.method {
        SpectralMethod::Auto if n <= DENSE_CAP => SpectralMethod::Dense,
        SpectralMethod::Auto => SpectralMethod::PowerIteration,
        m => m,
    };
    let s = symmetrize(matrix, pi);
    let sqrt_pi: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    match method {
        SpectralMethod::Dense => dense_gap(&s, &sqrt_pi),
        _ => power_gap(&s, &sqrt_pi, opts),
    }
}

/// `(S + S^T) / 2` with `S = D^{1/2} P D^{-1/2}`.
fn symmetrize(matrix: &CsrMatrix, pi: &[f64]) -> CsrMatrix {
    let s = matrix.map_values(|i, j, v| v * (pi[i] / pi[j]).sqrt());
    s.map_values(|i, j, v| 0.5 * (v + s.get(j, i)))
}

fn to_dense(s: &CsrMatrix) -> DMatrix<f64> {
    let n = s.dim();
    let mut dense = DMatrix::zeros(n, n);
    for (i, j, v) in s.entries() {
        dense[(i, j)] = v;
    }
    dense
}

/// All eigenvalues of the symmetrized chain, in decreasing order.
pub fn dense_spectrum(matrix: &CsrMatrix, pi: &[f64]) -> Vec<f64> {
    let eig = SymmetricEigen::new(to_dense(&symmetrize(matrix, pi)));
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

fn dense_gap(s: &CsrMatrix, sqrt_pi: &[f64]) -> Result<SpectralReport> {
    let n = s.dim();
    let dense = to_dense(s);
    let eig = SymmetricEigen::new(dense.clone());
    // Drop the eigenvector closest to sqrt(pi); the remaining eigenvalue of
    // largest modulus is lambda_1.
    let top = (0..n)
        .max_by(|&a, &b| {
            let overlap = |k: usize| {
                eig.eigenvectors
                    .column(k)
                    .iter()
                    .zip(sqrt_pi)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    .abs()
            };
            overlap(a).total_cmp(&overlap(b))
        })
        .expect("n > 1");
    let k = (0..n)
        .filter(|&k| k != top)
        .max_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()))
        .expect("n > 1");
    let lambda = eig.eigenvalues[k];
    let v = eig.eigenvectors.column(k);
    let residual = (&dense * v - v * lambda).norm();
    Ok(SpectralReport::new(n, lambda.abs(), SpectralMethod::Dense, residual, 0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn deflate(v: &mut [f64], unit: &[f64]) {
    let c = dot(v, unit);
    v.iter_mut().zip(unit).for_each(|(x, u)| *x -= c * u);
}

fn power_gap(s: &CsrMatrix, sqrt_pi: &[f64], opts: &SpectralOptions) -> Result<SpectralReport> {
    let n = s.dim();
    let unit: Vec<f64> = {
        let z = norm(sqrt_pi);
        sqrt_pi.iter().map(|x| x / z).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    deflate(&mut v, &unit);
    let z = norm(&v);
    v.iter_mut().for_each(|x| *x /= z);
    let mut w = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        s.mul_vec(&v, &mut w);
        deflate(&mut w, &unit);
        let lambda = dot(&v, &w);
        residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        let wn = norm(&w);
        if residual <= opts.tolerance || wn == 0.0 {
            return Ok(SpectralReport::new(
                n,
                lambda.abs(),
                SpectralMethod::PowerIteration,
                residual,
                it,
            ));
        }
        w.iter_mut().for_each(|x| *x /= wn);
        std::mem::swap(&mut v, &mut w);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}
