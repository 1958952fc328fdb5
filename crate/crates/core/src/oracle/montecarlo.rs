use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::enumerate::{enumerate_tail, ENUMERATION_CAP};
use super::reduce::{abs_pow, pairwise_sum};
use super::{MomentMethod, MomentSpec, Provenance, SignFunction};
use crate::error::{check_moment_order, check_non_negative, invalid, Result};

/// Identifier embedded in reports produced from seeded draws.
pub const GENERATOR_ID: &str = "chacha8-seed-stream/v1";

/// Batches used for the Monte Carlo spread estimate.
pub const MC_BATCHES: usize = 20;

const MIN_REPS: usize = 100;

/// Generator for replicate `r`: ChaCha8 keyed by `seed`, stream `r`.
///
/// Each replicate owns its stream, so the draws do not depend on which
/// thread evaluates it or in which order.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Fills `out` with independent uniform signs.
pub fn draw_signs(rng: &mut impl RngCore, out: &mut [i8]) {
    for chunk in out.chunks_mut(64) {
        let bits = rng.next_u64();
        for (j, b) in chunk.iter_mut().enumerate() {
            *b = if bits >> j & 1 == 1 { 1 } else { -1 };
        }
    }
}

fn sample_abs_values(f: &impl SignFunction, reps: usize, seed: u64) -> Vec<f64> {
    let n = f.arity();
    (0..reps)
        .into_par_iter()
        .map_init(
            || vec![0i8; n],
            |z, r| {
                let mut rng = replicate_rng(seed, r as u64);
                draw_signs(&mut rng, z);
                f.eval(z).abs()
            },
        )
        .collect()
}

/// Plug-in `L_p` estimate with the spread of [`MC_BATCHES`] batch estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub batch_min: f64,
    pub batch_median: f64,
    pub batch_max: f64,
    /// Standard deviation of the batch estimates over `sqrt(batches)`.
    pub spread: f64,
    pub reps: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` spreads of the median batch estimate.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.batch_median - value).abs() <= k * self.spread
    }
}

pub fn mc_lp(f: &impl SignFunction, spec: &MomentSpec) -> Result<McEstimate> {
    if spec.method != MomentMethod::MonteCarlo {
        return Err(invalid("method", "mc_lp requires the montecarlo method"));
    }
    check_moment_order("p", spec.p, 1.0)?;
    if spec.reps < MIN_REPS {
        return Err(invalid(
            "reps",
            format!("must be >= {MIN_REPS}, got {}", spec.reps),
        ));
    }
    if f.arity() == 0 {
        return Err(invalid("n", "arity must be >= 1"));
    }
    let p = spec.p;
    let values = sample_abs_values(f, spec.reps, spec.seed);
    let top = values.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(McEstimate {
            estimate: 0.0,
            batch_min: 0.0,
            batch_median: 0.0,
            batch_max: 0.0,
            spread: 0.0,
            reps: spec.reps,
        });
    }
    let scaled: Vec<f64> = values.iter().map(|&v| abs_pow(v / top, p)).collect();
    let estimate = top * (pairwise_sum(&scaled) / spec.reps as f64).powf(1.0 / p);

    let mut batches: Vec<f64> = (0..MC_BATCHES)
        .map(|b| {
            let lo = b * spec.reps / MC_BATCHES;
            let hi = (b + 1) * spec.reps / MC_BATCHES;
            let part = &scaled[lo..hi];
            top * (pairwise_sum(part) / part.len() as f64).powf(1.0 / p)
        })
        .collect();
    let mean = batches.iter().sum::<f64>() / MC_BATCHES as f64;
    let var = batches.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (MC_BATCHES - 1) as f64;
    batches.sort_by(f64::total_cmp);
    let median = 0.5 * (batches[MC_BATCHES / 2 - 1] + batches[MC_BATCHES / 2]);
    Ok(McEstimate {
        estimate,
        batch_min: batches[0],
        batch_median: median,
        batch_max: batches[MC_BATCHES - 1],
        spread: (var / MC_BATCHES as f64).sqrt(),
        reps: spec.reps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub probability: f64,
    pub provenance: Provenance,
    /// Draws used; zero for exact enumeration.
    pub reps: usize,
}

/// `P(|f(Z)| >= t)`: exact when `f.arity() <= 26`, otherwise the fraction
/// of `reps` seeded draws.
pub fn empirical_tail(
    f: &impl SignFunction,
    t: f64,
    reps: usize,
    seed: u64,
) -> Result<TailEstimate> {
    check_non_negative("t", t)?;
    if reps < MIN_REPS {
        return Err(invalid(
            "reps",
            format!("must be >= {MIN_REPS}, got {reps}"),
        ));
    }
    if f.arity() <= ENUMERATION_CAP {
        return Ok(TailEstimate {
            probability: enumerate_tail(f, t)?,
            provenance: Provenance::Exact,
            reps: 0,
        });
    }
    let hits = sample_abs_values(f, reps, seed)
        .into_iter()
        .filter(|&v| v >= t)
        .count();
    Ok(TailEstimate {
        probability: hits as f64 / reps as f64,
        provenance: Provenance::MonteCarlo,
        reps,
    })
}
