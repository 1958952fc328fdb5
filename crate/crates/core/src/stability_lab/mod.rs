//! Uniformly stable learners on finite-support distributions.
//!
//! Every risk and every `g_i` is an exact finite sum over the support, so
//! the sandwich `| |gap| - |sum g_i| | <= 2 gamma n` and the weak-correlation
//! bound can be checked per dataset without estimation error. Only the
//! outer average over datasets is Monte Carlo.

mod experiments;
mod gap;

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub use experiments::{
    correlation_check, empirical_quantile, estimate_gamma, for_each_dataset, gap_quantiles,
    resolve_gamma, simulate, sorted_abs_gaps, CorrelationReport, GammaEstimate, GammaMode,
    GapSample, QuantileRow, QuantileTable, EXHAUSTIVE_CAP, MIN_REPS,
};
pub use gap::{
    empirical_risk, g_i_exact, g_values, gap, gap_loo, risk, sandwich_check, SandwichReport,
    DEFAULT_COST_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Example {
    pub x: u32,
    pub y: f64,
}

impl Example {
    pub fn new(x: u32, y: f64) -> Self {
        Example { x, y }
    }
}

/// An ordered sample; position `i` is the coordinate replaced in `S^i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    items: Vec<Example>,
}

impl Dataset {
    pub fn new(items: Vec<Example>) -> Result<Self> {
        if items.is_empty() {
            return Err(invalid("dataset", "must contain at least one example"));
        }
        Ok(Dataset { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Example] {
        &self.items
    }

    /// `S^i`: the sample with example `i` replaced by `z`.
    pub fn replaced(&self, i: usize, z: Example) -> Result<Dataset> {
        self.check_index(i)?;
        let mut items = self.items.clone();
        items[i] = z;
        Ok(Dataset { items })
    }

    /// `S \ i`, empty when `n = 1`.
    pub fn without(&self, i: usize) -> Result<Vec<Example>> {
        self.check_index(i)?;
        let mut items = self.items.clone();
        items.remove(i);
        Ok(items)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.items.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.items.len(),
            });
        }
        Ok(())
    }
}

/// Probabilities must sum to one within this tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FiniteDistribution {
    support: Vec<(Example, f64)>,
    sampler: WeightedIndex<f64>,
}

impl FiniteDistribution {
    pub fn new(support: Vec<(Example, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(invalid("distribution", "support is empty"));
        }
        if support.iter().any(|&(_, q)| !(q.is_finite() && q >= 0.0)) {
            return Err(invalid(
                "distribution",
                "probabilities must be finite and >= 0",
            ));
        }
        let total: f64 = support.iter().map(|&(_, q)| q).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(invalid(
                "distribution",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        let sampler = WeightedIndex::new(support.iter().map(|&(_, q)| q))
            .map_err(|e| invalid("distribution", e.to_string()))?;
        Ok(FiniteDistribution { support, sampler })
    }

    /// A single instance with labels `1` (probability `q`) and `0`.
    pub fn bernoulli(q: f64) -> Result<Self> {
        crate::error::check_probability_closed("q", q)?;
        Self::new(vec![
            (Example::new(0, 0.0), 1.0 - q),
            (Example::new(0, 1.0), q),
        ])
    }

    /// `k` equally likely instances, each with an independent Bernoulli(`q`) label.
    pub fn uniform_instances(k: u32, q: f64) -> Result<Self> {
        crate::error::check_probability_closed("q", q)?;
        if k == 0 {
            return Err(invalid("k", "must be >= 1"));
        }
        let w = 1.0 / f64::from(k);
        let support = (0..k)
            .flat_map(|x| {
                [
                    (Example::new(x, 0.0), w * (1.0 - q)),
                    (Example::new(x, 1.0), w * q),
                ]
            })
            .collect();
        Self::new(support)
    }

    pub fn support(&self) -> &[(Example, f64)] {
        &self.support
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Example {
        self.support[self.sampler.sample(rng)].0
    }

    pub fn sample_dataset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        Dataset::new((0..n).map(|_| self.sample(rng)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `1` when prediction and label fall on different sides of `1/2`.
    ZeroOne,
    Absolute,
}

impl Loss {
    pub fn eval(self, prediction: f64, y: f64) -> f64 {
        match self {
            Loss::ZeroOne => f64::from(u8::from((prediction >= 0.5) != (y >= 0.5))),
            Loss::Absolute => (prediction - y).abs(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Loss::ZeroOne => "zero_one",
            Loss::Absolute => "absolute",
        }
    }
}

/// The output of a learner: a constant or a lookup table with a default.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Constant(f64),
    Table {
        entries: Vec<(u32, f64)>,
        default: f64,
    },
}

impl Predictor {
    pub fn predict(&self, x: u32) -> f64 {
        match self {
            Predictor::Constant(c) => *c,
            Predictor::Table { entries, default } => entries
                .iter()
                .find(|&&(key, _)| key == x)
                .map_or(*default, |&(_, v)| v),
        }
    }
}

/// Deterministic learning rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    /// Ignores the data.
    Constant { value: f64 },
    /// Mean label clipped to `[lo, hi]`.
    ClippedMean { lo: f64, hi: f64 },
    /// Majority training label at `x`; `default` for unseen points and ties.
    Memorizer { default: f64 },
    /// `argmin_w (1/n) sum (y_i - w)^2 + lambda w^2 = mean / (1 + lambda)`.
    RegularizedMean { lambda: f64 },
}

impl Rule {
    pub fn fit(&self, items: &[Example]) -> Predictor {
        match *self {
            Rule::Constant { value } => Predictor::Constant(value),
            Rule::ClippedMean { lo, hi } => Predictor::Constant(mean_label(items).clamp(lo, hi)),
            Rule::RegularizedMean { lambda } => {
                Predictor::Constant(mean_label(items) / (1.0 + lambda))
            }
            Rule::Memorizer { default } => Predictor::Table {
                entries: memorize(items, default),
                default,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Rule::Constant { .. } => "constant",
            Rule::ClippedMean { .. } => "clipped_mean",
            Rule::Memorizer { .. } => "memorizer",
            Rule::RegularizedMean { .. } => "regularized_mean",
        }
    }
}

fn mean_label(items: &[Example]) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    items.iter().map(|e| e.y).sum::<f64>() / items.len() as f64
}

fn memorize(items: &[Example], default: f64) -> Vec<(u32, f64)> {
    // (x, label, count), linear in the number of distinct pairs.
    let mut counts: Vec<(u32, f64, usize)> = Vec::new();
    for e in items {
        match counts.iter_mut().find(|c| c.0 == e.x && c.1 == e.y) {
            Some(c) => c.2 += 1,
            None => counts.push((e.x, e.y, 1)),
        }
    }
    let mut entries: Vec<(u32, f64)> = Vec::new();
    let mut xs: Vec<u32> = counts.iter().map(|c| c.0).collect();
    xs.sort_unstable();
    xs.dedup();
    for x in xs {
        let mut best: Option<(f64, usize)> = None;
        let mut tied = false;
        for &(cx, y, c) in &counts {
            if cx != x {
                continue;
            }
            match best {
                Some((_, bc)) if c < bc => {}
                Some((_, bc)) if c == bc => tied = true,
                _ => {
                    best = Some((y, c));
                    tied = false;
                }
            }
        }
        let label = if tied {
            default
        } else {
            best.map_or(default, |b| b.0)
        };
        entries.push((x, label));
    }
    entries
}

/// A learning rule with its loss and loss bound `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LearnerSpec {
    pub rule: Rule,
    pub loss: Loss,
    pub l: f64,
}

impl LearnerSpec {
    pub fn new(rule: Rule, loss: Loss) -> Self {
        LearnerSpec { rule, loss, l: 1.0 }
    }

    pub fn constant(value: f64, loss: Loss) -> Self {
        Self::new(Rule::Constant { value }, loss)
    }

    pub fn clipped_mean() -> Self {
        Self::new(Rule::ClippedMean { lo: 0.0, hi: 1.0 }, Loss::Absolute)
    }

    pub fn memorizer() -> Self {
        Self::new(Rule::Memorizer { default: 0.0 }, Loss::ZeroOne)
    }

    pub fn regularized_mean(lambda: f64) -> Self {
        Self::new(Rule::RegularizedMean { lambda }, Loss::Absolute)
    }

    pub fn name(&self) -> &'static str {
        self.rule.name()
    }

    pub fn fit(&self, items: &[Example]) -> Predictor {
        self.rule.fit(items)
    }

    pub fn loss_at(&self, predictor: &Predictor, e: Example) -> f64 {
        self.loss.eval(predictor.predict(e.x), e.y)
    }

    /// Analytic uniform-stability constant at sample size `n`, when known.
    ///
    /// Constant rules are `0`-stable. The clipped mean with absolute loss is
    /// `(hi - lo) / n`-stable on labels in `[lo, hi]`. The memorizer gets the
    /// trivial `L`.
    pub fn gamma_known(&self, n: usize) -> Option<f64> {
        match (self.rule, self.loss) {
            (Rule::Constant { .. }, _) => Some(0.0),
            (Rule::ClippedMean { lo, hi }, Loss::Absolute) => Some((hi - lo) / n as f64),
            (Rule::Memorizer { .. }, _) => Some(self.l),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::check_non_negative("L", self.l)?;
        match self.rule {
            Rule::Constant { value } if !(0.0..=1.0).contains(&value) => {
                Err(invalid("value", "constant prediction must lie in [0, 1]"))
            }
            Rule::ClippedMean { lo, hi } if !(0.0 <= lo && lo <= hi && hi <= 1.0) => {
                Err(invalid("lo, hi", "need 0 <= lo <= hi <= 1"))
            }
            Rule::Memorizer { default } if !(0.0..=1.0).contains(&default) => {
                Err(invalid("default", "must lie in [0, 1]"))
            }
            Rule::RegularizedMean { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(invalid("lambda", "must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name(), self.loss.as_str())
    }
}

/// The four shipped learners.
pub fn shipped_learners() -> [LearnerSpec; 4] {
    [
        LearnerSpec::constant(0.5, Loss::ZeroOne),
        LearnerSpec::clipped_mean(),
        LearnerSpec::memorizer(),
        LearnerSpec::regularized_mean(1.0),
    ]
}

/// Default data distribution for each shipped learner: Bernoulli(1/2)
/// labels for the constant rule, Bernoulli(0.3) labels for the mean rules and
/// three instances with Bernoulli(0.3) labels for the memorizer.
pub fn default_distribution(learner: &LearnerSpec) -> FiniteDistribution {
    match learner.rule {
        Rule::Constant { .. } => FiniteDistribution::bernoulli(0.5),
        Rule::Memorizer { .. } => FiniteDistribution::uniform_instances(3, 0.3),
        _ => FiniteDistribution::bernoulli(0.3),
    }
    .expect("valid built-in distribution")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_validation() {
        assert!(FiniteDistribution::new(vec![(Example::new(0, 0.0), 0.5)]).is_err());
        assert!(FiniteDistribution::new(vec![]).is_err());
        assert!(FiniteDistribution::new(vec![
            (Example::new(0, 0.0), 0.5 + 5e-13),
            (Example::new(0, 1.0), 0.5),
        ])
        .is_ok());
        let d = FiniteDistribution::uniform_instances(3, 0.3).unwrap();
        assert_eq!(d.support().len(), 6);
    }

    #[test]
    fn memorizer_majority_and_ties() {
        let items = [
            Example::new(0, 1.0),
            Example::new(0, 1.0),
            Example::new(0, 0.0),
            Example::new(1, 1.0),
            Example::new(1, 0.0),
            Example::new(2, 1.0),
        ];
        let p = LearnerSpec::memorizer().fit(&items);
        assert_eq!(p.predict(0), 1.0);
        assert_eq!(p.predict(1), 0.0);
        assert_eq!(p.predict(2), 1.0);
        assert_eq!(p.predict(7), 0.0);
    }

    #[test]
    fn mean_rules() {
        let items = [
            Example::new(0, 1.0),
            Example::new(0, 0.0),
            Example::new(0, 1.0),
        ];
        let clipped = LearnerSpec::new(Rule::ClippedMean { lo: 0.0, hi: 0.5 }, Loss::Absolute);
        assert_eq!(clipped.fit(&items), Predictor::Constant(0.5));
        assert_eq!(
            LearnerSpec::regularized_mean(1.0).fit(&items),
            Predictor::Constant(1.0 / 3.0)
        );
        assert!(LearnerSpec::regularized_mean(-1.0).validate().is_err());
        assert_eq!(LearnerSpec::clipped_mean().gamma_known(10), Some(0.1));
        assert_eq!(LearnerSpec::regularized_mean(1.0).gamma_known(10), None);
    }
}
