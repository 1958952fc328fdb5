//! Exact and sampled `L_p` norms of functions of i.i.d. Rademacher signs.
//!
//! Three routes are available:
//!
//! * [`enumerate_lp`] walks all `2^n` sign vectors (`n <= 26`);
//! * [`collapse_lp`] handles functions of `S = sum z_i` with binomial
//!   weights, for any `n`;
//! * [`mc_lp`] draws seeded replicates and reports batch spreads.
//!
//! Every reduction uses a fixed chunk layout and a pairwise merge in index
//! order, so results are bit-identical whatever the size of the thread pool.

mod collapse;
mod enumerate;
mod functionals;
mod montecarlo;
mod reduce;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub use collapse::{collapse_lp, collapse_tail, BinomialWeights};
pub use enumerate::{
    enumerate_lp, enumerate_max_abs, enumerate_mean, enumerate_tail, fold_cube, for_each_in_cube,
    ENUMERATION_CAP,
};
pub use functionals::{hitczenko_functional, latala_allones_estimate};
pub use montecarlo::{
    draw_signs, empirical_tail, mc_lp, replicate_rng, McEstimate, TailEstimate, GENERATOR_ID,
    MC_BATCHES,
};
pub use reduce::{abs_pow, pairwise_sum};

/// A point of `{-1, +1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("z", "sign vector must be non-empty"));
        }
        if let Some(bad) = bits.iter().find(|&&b| b != 1 && b != -1) {
            return Err(invalid(
                "z",
                format!("entries must be +1 or -1, found {bad}"),
            ));
        }
        Ok(SignVector(bits))
    }

    /// Decodes outcome `index` of the cube: bit `j` set means `z_j = +1`.
    pub fn from_index(n: usize, index: u64) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(invalid("n", format!("must lie in 1..=64, got {n}")));
        }
        Ok(SignVector(
            (0..n)
                .map(|j| if index >> j & 1 == 1 { 1 } else { -1 })
                .collect(),
        ))
    }

    pub fn ones(n: usize) -> Self {
        SignVector(vec![1; n.max(1)])
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&b| i64::from(b)).sum()
    }
}

impl std::ops::Deref for SignVector {
    type Target = [i8];

    fn deref(&self) -> &[i8] {
        &self.0
    }
}

/// A deterministic real function on `{-1, +1}^n`.
pub trait SignFunction: Sync {
    fn arity(&self) -> usize;

    fn eval(&self, z: &[i8]) -> f64;
}

/// Wraps a closure as a [`SignFunction`].
#[derive(Clone, Copy)]
pub struct FnSignFunction<F> {
    arity: usize,
    f: F,
}

pub fn sign_fn<F>(arity: usize, f: F) -> FnSignFunction<F>
where
    F: Fn(&[i8]) -> f64 + Sync,
{
    FnSignFunction { arity, f }
}

impl<F> SignFunction for FnSignFunction<F>
where
    F: Fn(&[i8]) -> f64 + Sync,
{
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, z: &[i8]) -> f64 {
        (self.f)(z)
    }
}

/// A family `g_1, ..., g_n` of functions on `{-1, +1}^n`.
pub trait SignFamily: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `g_i(z)` for a zero-based index `i`.
    fn eval(&self, i: usize, z: &[i8]) -> f64;

    /// Writes `g_i(z)` for every `i` into `out`.
    fn eval_all(&self, z: &[i8], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.eval(i, z);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    MonteCarlo,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::MonteCarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    Enumerate,
    Collapse,
    MonteCarlo,
}

/// How to compute a moment. `reps` and `seed` only matter for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSpec {
    pub p: f64,
    pub method: MomentMethod,
    pub reps: usize,
    pub seed: u64,
}

impl MomentSpec {
    pub fn monte_carlo(p: f64, reps: usize, seed: u64) -> Self {
        MomentSpec {
            p,
            method: MomentMethod::MonteCarlo,
            reps,
            seed,
        }
    }
}

pub(crate) fn check_arity(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "arity must be >= 1"));
    }
    if n > ENUMERATION_CAP {
        return Err(Error::ArityCap {
            arity: n,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}
