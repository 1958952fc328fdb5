use rayon::prelude::*;

use super::reduce::{abs_pow, pairwise_merge};
use super::{check_arity, SignFunction};
use crate::error::{check_moment_order, check_non_negative, Result};

/// Largest arity accepted by exhaustive enumeration (`2^26` outcomes).
pub const ENUMERATION_CAP: usize = 26;

const CHUNK_BITS: usize = 12;

/// Visits every outcome of a chunk in index order, reusing one buffer.
fn walk_chunk(n: usize, start: u64, len: u64, mut visit: impl FnMut(&[i8])) {
    let mut z: Vec<i8> = (0..n)
        .map(|j| if start >> j & 1 == 1 { 1 } else { -1 })
        .collect();
    for step in 0..len {
        visit(&z);
        if step + 1 == len {
            break;
        }
        // Binary increment: bit j = 1 <=> z_j = +1.
        for b in z.iter_mut() {
            if *b == 1 {
                *b = -1;
            } else {
                *b = 1;
                break;
            }
        }
    }
}

/// Folds `fold` over all `2^n` sign vectors.
///
/// Outcomes are split into fixed chunks of `2^12` (fewer when `n < 12`);
/// each chunk is folded serially from `identity()` and the chunk results are
/// merged pairwise in index order. The result therefore does not depend on
/// the number of worker threads.
pub fn fold_cube<T, I, F, C>(n: usize, identity: I, fold: F, combine: C) -> Result<T>
where
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, &[i8]) + Sync,
    C: Fn(T, T) -> T + Sync,
{
    check_arity(n)?;
    let chunk_bits = CHUNK_BITS.min(n);
    let chunk_len = 1u64 << chunk_bits;
    let chunks = 1u64 << (n - chunk_bits);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = identity();
            walk_chunk(n, c * chunk_len, chunk_len, |z| fold(&mut acc, z));
            acc
        })
        .collect();
    Ok(pairwise_merge(parts, &combine).expect("at least one chunk"))
}

/// Serial visit of all outcomes in index order.
pub fn for_each_in_cube(n: usize, visit: impl FnMut(&[i8])) -> Result<()> {
    check_arity(n)?;
    walk_chunk(n, 0, 1u64 << n, visit);
    Ok(())
}

/// `E f(Z)` by full enumeration.
pub fn enumerate_mean(f: &impl SignFunction) -> Result<f64> {
    let n = f.arity();
    let total = fold_cube(n, || 0.0, |acc, z| *acc += f.eval(z), |a, b| a + b)?;
    Ok(total / (1u64 << n) as f64)
}

pub fn enumerate_max_abs(f: &impl SignFunction) -> Result<f64> {
    fold_cube(
        f.arity(),
        || 0.0f64,
        |acc, z| *acc = acc.max(f.eval(z).abs()),
        f64::max,
    )
}

/// `sum |v|^p` held as `scale^p * sum`, with `scale` the largest `|v|`.
#[derive(Clone, Copy)]
struct ScaledPowerSum {
    scale: f64,
    sum: f64,
}

impl ScaledPowerSum {
    const EMPTY: ScaledPowerSum = ScaledPowerSum {
        scale: 0.0,
        sum: 0.0,
    };

    /// Exact two-pass reduction of a buffered chunk.
    fn of(values: &[f64], p: f64) -> ScaledPowerSum {
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return Self::EMPTY;
        }
        let sum = values.iter().map(|v| abs_pow(v / scale, p)).sum();
        ScaledPowerSum { scale, sum }
    }

    fn merge(self, other: ScaledPowerSum, p: f64) -> ScaledPowerSum {
        let (big, small) = if self.scale >= other.scale {
            (self, other)
        } else {
            (other, self)
        };
        if small.scale == 0.0 {
            return big;
        }
        ScaledPowerSum {
            scale: big.scale,
            sum: big.sum + small.sum * abs_pow(small.scale / big.scale, p),
        }
    }
}

/// Values of one chunk awaiting reduction, plus everything already reduced.
struct LpAcc {
    pending: Vec<f64>,
    done: ScaledPowerSum,
}

impl LpAcc {
    fn settle(self, p: f64) -> ScaledPowerSum {
        self.done.merge(ScaledPowerSum::of(&self.pending, p), p)
    }
}

/// `(2^-n sum_z |f(z)|^p)^(1/p)`, exact up to rounding.
///
/// Each chunk of outcomes is scaled by its own `max |f|` before raising to
/// the power `p`, so large `p` neither overflows nor underflows the leading
/// terms; chunk results are rescaled to the common maximum when merged.
pub fn enumerate_lp(f: &impl SignFunction, p: f64) -> Result<f64> {
    check_moment_order("p", p, 1.0)?;
    let n = f.arity();
    let acc = fold_cube(
        n,
        || LpAcc {
            pending: Vec::with_capacity(1 << CHUNK_BITS.min(n)),
            done: ScaledPowerSum::EMPTY,
        },
        |acc, z| acc.pending.push(f.eval(z)),
        |a, b| LpAcc {
            pending: Vec::new(),
            done: a.settle(p).merge(b.settle(p), p),
        },
    )?
    .settle(p);
    if acc.scale == 0.0 {
        return Ok(0.0);
    }
    Ok(acc.scale * (acc.sum / (1u64 << n) as f64).powf(1.0 / p))
}

/// `P(|f(Z)| >= t)` by full enumeration.
pub fn enumerate_tail(f: &impl SignFunction, t: f64) -> Result<f64> {
    check_non_negative("t", t)?;
    let n = f.arity();
    let hits = fold_cube(
        n,
        || 0u64,
        |acc, z| {
            if f.eval(z).abs() >= t {
                *acc += 1;
            }
        },
        |a, b| a + b,
    )?;
    Ok(hits as f64 / (1u64 << n) as f64)
}
