use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::gap::{g_values, gap, gap_loo, DEFAULT_COST_CAP};
use super::{Dataset, Example, FiniteDistribution, LearnerSpec};
use crate::bounds::{generalization_bound, stability_tail_bound, BoundInputs, BoundKind};
use crate::error::{check_probability_open, invalid, Error, Result};
use crate::oracle::{pairwise_sum, replicate_rng};

/// Largest `|support|^n * n * |support|^2` handled by exhaustive
/// enumeration in [`estimate_gamma`].
pub const EXHAUSTIVE_CAP: u128 = 20_000_000;

/// Smallest replicate count accepted by the Monte Carlo reports.
pub const MIN_REPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Analytic,
    /// Exact maximum over every sample, index, replacement and test point.
    Exhaustive,
    /// Maximum over sampled cases; a lower estimate of the true constant.
    Sampled,
}

impl GammaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GammaMode::Analytic => "analytic",
            GammaMode::Exhaustive => "exhaustive",
            GammaMode::Sampled => "sampled_lower_estimate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub mode: GammaMode,
    /// Number of (sample, index, replacement) cases examined.
    pub cases: u64,
}

/// Visits every sample in `support^n` in lexicographic order with its probability.
pub fn for_each_dataset(
    dist: &FiniteDistribution,
    n: usize,
    mut visit: impl FnMut(&[Example], f64),
) -> Result<()> {
    let s = dist.support().len();
    let count = (s as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if n == 0 || count > EXHAUSTIVE_CAP {
        return Err(Error::CostCap {
            required: count,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let mut digits = vec![0usize; n];
    let mut items: Vec<Example> = vec![dist.support()[0].0; n];
    loop {
        let prob: f64 = digits.iter().map(|&d| dist.support()[d].1).product();
        for (slot, &d) in items.iter_mut().zip(&digits) {
            *slot = dist.support()[d].0;
        }
        visit(&items, prob);
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < s {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// `max_z |loss(A_S(x), y) - loss(A_{S^i}(x), y)|` over the support.
fn replace_one_change(
    learner: &LearnerSpec,
    items: &mut [Example],
    i: usize,
    z: Example,
    dist: &FiniteDistribution,
) -> f64 {
    let h = learner.fit(items);
    let original = items[i];
    items[i] = z;
    let h_i = learner.fit(items);
    items[i] = original;
    dist.support()
        .iter()
        .map(|&(t, _)| (learner.loss_at(&h, t) - learner.loss_at(&h_i, t)).abs())
        .fold(0.0, f64::max)
}

fn exhaustive_cost(dist: &FiniteDistribution, n: usize) -> u128 {
    let s = dist.support().len() as u128;
    s.checked_pow(n as u32)
        .and_then(|c| c.checked_mul(n as u128 * s * s))
        .unwrap_or(u128::MAX)
}

/// Empirical uniform-stability constant at sample size `n`.
///
/// Small settings are enumerated exhaustively and the result is exact.
/// Otherwise `trials` seeded cases are drawn and the result is a lower
/// estimate, flagged as [`GammaMode::Sampled`].
pub fn estimate_gamma(
    learner: &LearnerSpec,
    dist: &FiniteDistribution,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<GammaEstimate> {
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    if exhaustive_cost(dist, n) <= EXHAUSTIVE_CAP {
        let mut gamma = 0.0f64;
        let mut cases = 0u64;
        for_each_dataset(dist, n, |items, _| {
            let mut items = items.to_vec();
            for i in 0..n {
                for &(z, _) in dist.support() {
                    if z == items[i] {
                        continue;
                    }
                    gamma = gamma.max(replace_one_change(learner, &mut items, i, z, dist));
                    cases += 1;
                }
            }
        })?;
        return Ok(GammaEstimate {
            gamma,
            mode: GammaMode::Exhaustive,
            cases,
        });
    }
    if trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    let gamma = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = replicate_rng(seed, t);
            let mut items: Vec<Example> = (0..n).map(|_| dist.sample(&mut rng)).collect();
            let i = rng.random_range(0..n);
            let z = dist.sample(&mut rng);
            replace_one_change(learner, &mut items, i, z, dist)
        })
        .reduce(|| 0.0, f64::max);
    Ok(GammaEstimate {
        gamma,
        mode: GammaMode::Sampled,
        cases: trials as u64,
    })
}

/// The analytic constant when the learner has one, else [`estimate_gamma`].
pub fn resolve_gamma(
    learner: &LearnerSpec,
    dist: &FiniteDistribution,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<GammaEstimate> {
    match learner.gamma_known(n) {
        Some(gamma) => Ok(GammaEstimate {
            gamma,
            mode: GammaMode::Analytic,
            cases: 0,
        }),
        None => estimate_gamma(learner, dist, n, trials, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSample {
    pub replicate: u64,
    pub gap: f64,
    pub gap_loo: f64,
    pub g_values: Vec<f64>,
}

fn replicate_dataset(dist: &FiniteDistribution, n: usize, seed: u64, r: u64) -> Result<Dataset> {
    dist.sample_dataset(n, &mut replicate_rng(seed, r))
}

/// Draws `reps` seeded samples (replicate `r` uses stream `r`) and computes
/// the gap, the leave-one-out gap and every `g_i` for each.
pub fn simulate(
    learner: &LearnerSpec,
    dist: &FiniteDistribution,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<GapSample>> {
    if n < 2 {
        return Err(invalid("n", "must be >= 2"));
    }
    (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let data = replicate_dataset(dist, n, seed, r)?;
            Ok(GapSample {
                replicate: r,
                gap: gap(learner, &data, dist),
                gap_loo: gap_loo(learner, &data, dist)?,
                g_values: g_values(learner, &data, dist, DEFAULT_COST_CAP)?,
            })
        })
        .collect()
}

/// Mean and standard error of a sample.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = pairwise_sum(values) / m;
    let centered: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&centered) / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub learner: String,
    pub n: usize,
    pub reps: usize,
    pub gamma: f64,
    pub gamma_mode: GammaMode,
    /// Mean over samples of `sum_{i != j} g_i g_j / (n (n - 1))`.
    pub pair_mean: f64,
    pub pair_se: f64,
    /// `4 gamma^2`.
    pub pair_bound: f64,
    pub pair_holds: bool,
    pub gap_variance: f64,
    pub variance_se: f64,
    /// `n^2 gamma^2 + n L^2`.
    pub variance_bound: f64,
    pub variance_holds: bool,
}

/// Monte Carlo check of `|E g_i g_j| <= 4 gamma^2` for `i != j`, pooled over
/// all pairs of each sample, and of `Var(gap) <= n^2 gamma^2 + n L^2`.
/// Both pass within three standard errors.
pub fn correlation_check(
    learner: &LearnerSpec,
    dist: &FiniteDistribution,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<CorrelationReport> {
    if reps < MIN_REPS {
        return Err(invalid("reps", format!("must be >= {MIN_REPS}")));
    }
    let gamma = resolve_gamma(learner, dist, n, reps, seed)?;
    let samples = simulate(learner, dist, n, reps, seed)?;
    Ok(CorrelationReport::from_samples(learner, n, gamma, &samples))
}

impl CorrelationReport {
    pub fn passed(&self) -> bool {
        self.pair_holds && self.variance_holds
    }

    /// Builds the report from samples produced by [`simulate`] at size `n`.
    pub fn from_samples(
        learner: &LearnerSpec,
        n: usize,
        gamma: GammaEstimate,
        samples: &[GapSample],
    ) -> Self {
        let nf = n as f64;
        let pairs: Vec<f64> = samples
            .iter()
            .map(|s| {
                let total: f64 = s.g_values.iter().sum();
                let squares: f64 = s.g_values.iter().map(|g| g * g).sum();
                (total * total - squares) / (nf * (nf - 1.0))
            })
            .collect();
        let (pair_mean, pair_se) = mean_se(&pairs);
        let pair_bound = 4.0 * gamma.gamma * gamma.gamma;

        let gaps: Vec<f64> = samples.iter().map(|s| s.gap).collect();
        let (gap_mean, _) = mean_se(&gaps);
        let second: Vec<f64> = gaps.iter().map(|g| (g - gap_mean).powi(2)).collect();
        let (gap_variance, variance_se) = mean_se(&second);
        let variance_bound = nf * nf * gamma.gamma * gamma.gamma + nf * learner.l * learner.l;
        CorrelationReport {
            learner: learner.to_string(),
            n,
            reps: samples.len(),
            gamma: gamma.gamma,
            gamma_mode: gamma.mode,
            pair_mean,
            pair_se,
            pair_bound,
            pair_holds: pair_mean.abs() <= pair_bound + 3.0 * pair_se,
            gap_variance,
            variance_se,
            variance_bound,
            variance_holds: gap_variance <= variance_bound + 3.0 * variance_se,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileRow {
    pub delta: f64,
    /// Empirical `(1 - delta)` quantile of `|gap|`.
    pub quantile: f64,
    pub bousquet02: f64,
    pub fv2018: f64,
    pub fv2019: f64,
    pub bkz: f64,
    pub stability_tail: f64,
    /// `bkz - quantile`.
    pub margin: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileTable {
    pub learner: String,
    pub n: usize,
    pub reps: usize,
    pub gamma: f64,
    pub gamma_mode: GammaMode,
    pub l: f64,
    pub rows: Vec<QuantileRow>,
}

/// Smallest sample value `x` with empirical CDF `F(x) >= level`; `sorted`
/// must be ascending and non-empty.
pub fn empirical_quantile(sorted: &[f64], level: f64) -> f64 {
    let m = sorted.len();
    let k = ((level * m as f64) - 1e-9).ceil().clamp(1.0, m as f64) as usize;
    sorted[k - 1]
}

/// `|gap|` for `reps` seeded samples, sorted ascending.
pub fn sorted_abs_gaps(
    learner: &LearnerSpec,
    dist: &FiniteDistribution,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut gaps = (0..reps as u64)
        .into_par_iter()
        .map(|r| Ok(gap(learner, &replicate_dataset(dist, n, seed, r)?, dist).abs()))
        .collect::<Result<Vec<f64>>>()?;
    gaps.sort_by(f64::total_cmp);
    Ok(gaps)
}

/// Empirical `(1 - delta)` quantiles of `|gap|` beside the four
/// generalization bounds and the stability tail bound.
pub fn gap_quantiles(
    learner: &LearnerSpec,
    dist: &FiniteDistribution,
    n: usize,
    reps: usize,
    deltas: &[f64],
    seed: u64,
) -> Result<QuantileTable> {
    if reps < MIN_REPS {
        return Err(invalid("reps", format!("must be >= {MIN_REPS}")));
    }
    for &d in deltas {
        check_probability_open("delta", d)?;
    }
    let gamma = resolve_gamma(learner, dist, n, reps, seed)?;
    let gaps = sorted_abs_gaps(learner, dist, n, reps, seed)?;
    let rows = deltas
        .iter()
        .map(|&delta| {
            let input = BoundInputs::new(n, delta)
                .with_gamma(gamma.gamma)
                .with_loss_bound(learner.l);
            let value = |kind| generalization_bound(kind, &input).map(|b| b.value);
            let quantile = empirical_quantile(&gaps, 1.0 - delta);
            let bkz = value(BoundKind::Bkz)?;
            Ok(QuantileRow {
                delta,
                quantile,
                bousquet02: value(BoundKind::Bousquet02)?,
                fv2018: value(BoundKind::Fv2018)?,
                fv2019: value(BoundKind::Fv2019)?,
                bkz,
                stability_tail: stability_tail_bound(n, gamma.gamma, learner.l, delta)?,
                margin: bkz - quantile,
                dominated: quantile <= bkz,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileTable {
        learner: learner.to_string(),
        n,
        reps,
        gamma: gamma.gamma,
        gamma_mode: gamma.mode,
        l: learner.l,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability_lab::{g_i_exact, Loss};
    use approx::assert_relative_eq;

    #[test]
    fn dataset_enumeration() {
        let dist = FiniteDistribution::bernoulli(0.3).unwrap();
        let mut count = 0;
        let mut total = 0.0;
        for_each_dataset(&dist, 4, |_, p| {
            count += 1;
            total += p;
        })
        .unwrap();
        assert_eq!(count, 16);
        assert_relative_eq!(total, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn g_is_centered_over_datasets() {
        let dist = FiniteDistribution::bernoulli(0.3).unwrap();
        for learner in [
            LearnerSpec::clipped_mean(),
            LearnerSpec::regularized_mean(0.5),
            LearnerSpec::constant(0.5, Loss::ZeroOne),
        ] {
            for n in 1..=6 {
                let mut means = vec![0.0; n];
                for_each_dataset(&dist, n, |items, p| {
                    let data = Dataset::new(items.to_vec()).unwrap();
                    for (i, m) in means.iter_mut().enumerate() {
                        let g = g_i_exact(&learner, &data, &dist, i, DEFAULT_COST_CAP).unwrap();
                        assert!(g.abs() <= learner.l);
                        *m += p * g;
                    }
                })
                .unwrap();
                for m in means {
                    assert!(m.abs() <= 1e-14, "{learner} n={n}: {m}");
                }
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let dist = FiniteDistribution::bernoulli(0.5).unwrap();
        let c =
            estimate_gamma(&LearnerSpec::constant(0.5, Loss::ZeroOne), &dist, 8, 10, 1).unwrap();
        assert_eq!((c.gamma, c.mode), (0.0, GammaMode::Exhaustive));

        let cm = estimate_gamma(&LearnerSpec::clipped_mean(), &dist, 10, 10, 1).unwrap();
        assert_eq!(cm.mode, GammaMode::Exhaustive);
        assert_relative_eq!(cm.gamma, 0.1, max_relative = 1e-12);

        let mem_dist = FiniteDistribution::uniform_instances(3, 0.3).unwrap();
        let m = estimate_gamma(&LearnerSpec::memorizer(), &mem_dist, 4, 10, 1).unwrap();
        assert_eq!((m.gamma, m.mode), (1.0, GammaMode::Exhaustive));

        let big = estimate_gamma(&LearnerSpec::regularized_mean(1.0), &dist, 100, 200, 7).unwrap();
        assert_eq!(big.mode, GammaMode::Sampled);
        assert_relative_eq!(big.gamma, 1.0 / 200.0, max_relative = 1e-12);
    }

    #[test]
    fn quantile_rule() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(empirical_quantile(&xs, 0.9), 9.0);
        assert_eq!(empirical_quantile(&xs, 0.91), 10.0);
        assert_eq!(empirical_quantile(&xs, 0.0), 1.0);
    }

    #[test]
    fn zero_loss_learner_has_zero_gaps() {
        let dist = FiniteDistribution::bernoulli(1.0).unwrap();
        let learner = LearnerSpec::constant(1.0, Loss::ZeroOne);
        let t = gap_quantiles(&learner, &dist, 20, 1000, &[0.1], 3).unwrap();
        assert_eq!(t.rows[0].quantile, 0.0);
        assert!(gap_quantiles(&learner, &dist, 20, 999, &[0.1], 3).is_err());
    }

    #[test]
    fn simulate_is_reproducible() {
        let dist = FiniteDistribution::bernoulli(0.3).unwrap();
        let a = simulate(&LearnerSpec::clipped_mean(), &dist, 10, 50, 9).unwrap();
        let b = simulate(&LearnerSpec::clipped_mean(), &dist, 10, 50, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            a,
            simulate(&LearnerSpec::clipped_mean(), &dist, 10, 50, 10).unwrap()
        );
    }
}
