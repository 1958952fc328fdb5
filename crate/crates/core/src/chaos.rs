//! The degree-two Rademacher chaos family
//! `g_i(z) = M z_i + (beta / 2) z_i sum_{j != i} z_j`.
//!
//! Its members satisfy the moment-bound hypotheses with parameters `M` and
//! `beta`, and `sum_i g_i = M S + (beta/2) S^2 - (beta/2) n` depends on the
//! signs only through `S = sum_i z_i`. That makes every `L_p` norm of the sum
//! exactly computable at any `n` through the binomial law of `S`.

use serde::Serialize;

use crate::bounds::theorem1_moment_bound;
use crate::error::{check_moment_order, check_non_negative, invalid, Error, Result};
use crate::oracle::{
    enumerate_tail, fold_cube, sign_fn, BinomialWeights, SignFamily, ENUMERATION_CAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosParams {
    pub n: usize,
    pub m: f64,
    pub beta: f64,
}

impl ChaosParams {
    pub fn new(n: usize, m: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be >= 1"));
        }
        check_non_negative("M", m)?;
        check_non_negative("beta", beta)?;
        Ok(ChaosParams { n, m, beta })
    }

    /// `sum_i g_i` as a function of `S`.
    pub fn sum_of(&self, s: i64) -> f64 {
        let s = s as f64;
        self.m * s + 0.5 * self.beta * s * s - 0.5 * self.beta * self.n as f64
    }

    /// `max_z |g_i(z)| = M + beta (n - 1) / 2`.
    pub fn uniform_bound(&self) -> f64 {
        self.m + 0.5 * self.beta * (self.n as f64 - 1.0)
    }

    /// `||sum g_i||_2^2 = M^2 n + (beta^2 / 2) n (n - 1)`.
    pub fn second_moment(&self) -> f64 {
        let n = self.n as f64;
        self.m * self.m * n + 0.5 * self.beta * self.beta * n * (n - 1.0)
    }

    fn check_len(&self, z: &[i8]) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: z.len(),
            });
        }
        Ok(())
    }
}

impl SignFamily for ChaosParams {
    fn len(&self) -> usize {
        self.n
    }

    fn eval(&self, i: usize, z: &[i8]) -> f64 {
        let zi = f64::from(z[i]);
        let others: i64 = z
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &b)| i64::from(b))
            .sum();
        self.m * zi + 0.5 * self.beta * zi * others as f64
    }

    fn eval_all(&self, z: &[i8], out: &mut [f64]) {
        let total: i64 = z.iter().map(|&b| i64::from(b)).sum();
        for ((slot, &b), _) in out.iter_mut().zip(z).zip(0..self.n) {
            let zi = f64::from(b);
            *slot = self.m * zi + 0.5 * self.beta * zi * (total - i64::from(b)) as f64;
        }
    }
}

/// `g_i(z)` for a zero-based index `i`.
pub fn chaos_g(i: usize, z: &[i8], params: &ChaosParams) -> Result<f64> {
    params.check_len(z)?;
    if i >= params.n {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: params.n,
        });
    }
    Ok(params.eval(i, z))
}

/// `sum_i g_i(z)` through the closed form in `S`.
pub fn chaos_sum(z: &[i8], params: &ChaosParams) -> Result<f64> {
    params.check_len(z)?;
    let s: i64 = z.iter().map(|&b| i64::from(b)).sum();
    Ok(params.sum_of(s))
}

/// `sum_i g_i(z)` by adding the members one by one.
pub fn chaos_sum_direct(z: &[i8], params: &ChaosParams) -> Result<f64> {
    params.check_len(z)?;
    Ok((0..params.n).map(|i| params.eval(i, z)).sum())
}

/// Worst violations of the moment-bound hypotheses, measured exhaustively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `max |E[g_i | z_{-i}]|` over all `i` and realizations.
    pub centered_violation: f64,
    /// `max | |E[g_i | z_i]| - M |`.
    pub conditional_mean_violation: f64,
    /// Largest change of `g_i` when one coordinate `j != i` flips.
    pub max_difference: f64,
    /// `max(0, max_difference - beta)`.
    pub bounded_difference_violation: f64,
    pub max_abs_g: f64,
    /// `| max |g_i| - (M + beta (n - 1) / 2) |`.
    pub uniform_bound_violation: f64,
    pub worst_violation: f64,
    pub passed: bool,
}

#[derive(Clone)]
struct ConditionAcc {
    plus: Vec<f64>,
    minus: Vec<f64>,
    centered: f64,
    max_diff: f64,
    max_abs: f64,
}

impl ConditionAcc {
    fn merge(mut self, other: ConditionAcc) -> ConditionAcc {
        for (a, b) in self.plus.iter_mut().zip(&other.plus) {
            *a += b;
        }
        for (a, b) in self.minus.iter_mut().zip(&other.minus) {
            *a += b;
        }
        self.centered = self.centered.max(other.centered);
        self.max_diff = self.max_diff.max(other.max_diff);
        self.max_abs = self.max_abs.max(other.max_abs);
        self
    }
}

/// Checks, over every sign vector, that each `g_i` is centered given the
/// other coordinates, that `|E[g_i | z_i]| = m`, and that flipping any
/// `z_j`, `j != i`, moves `g_i` by at most `beta`.
///
/// The returned `max_abs_g` is the observed uniform bound; the
/// `uniform_bound_violation` field is left at zero for generic families.
pub fn verify_family_conditions(
    family: &impl SignFamily,
    m: f64,
    beta: f64,
) -> Result<ConditionReport> {
    let n = family.len();
    if n > ENUMERATION_CAP {
        return Err(Error::ArityCap {
            arity: n,
            cap: ENUMERATION_CAP,
        });
    }
    let acc = fold_cube(
        n,
        || ConditionAcc {
            plus: vec![0.0; n],
            minus: vec![0.0; n],
            centered: 0.0,
            max_diff: 0.0,
            max_abs: 0.0,
        },
        |acc, z| {
            let mut row = vec![0.0; n];
            let mut flipped_row = vec![0.0; n];
            let mut flipped = z.to_vec();
            family.eval_all(z, &mut row);
            for (i, &g) in row.iter().enumerate() {
                if z[i] == 1 {
                    acc.plus[i] += g;
                } else {
                    acc.minus[i] += g;
                }
                acc.max_abs = acc.max_abs.max(g.abs());
            }
            for j in 0..n {
                flipped[j] = -flipped[j];
                family.eval_all(&flipped, &mut flipped_row);
                for i in 0..n {
                    if i == j {
                        acc.centered = acc.centered.max(0.5 * (row[i] + flipped_row[i]).abs());
                    } else {
                        acc.max_diff = acc.max_diff.max((row[i] - flipped_row[i]).abs());
                    }
                }
                flipped[j] = -flipped[j];
            }
        },
        ConditionAcc::merge,
    )?;
    let half = (1u64 << (n - 1)) as f64;
    let conditional_mean_violation = acc
        .plus
        .iter()
        .chain(&acc.minus)
        .map(|s| ((s / half).abs() - m).abs())
        .fold(0.0, f64::max);
    let bounded_difference_violation = (acc.max_diff - beta).max(0.0);
    let worst = acc
        .centered
        .max(conditional_mean_violation)
        .max(bounded_difference_violation);
    let tol = condition_tolerance(acc.max_abs);
    Ok(ConditionReport {
        centered_violation: acc.centered,
        conditional_mean_violation,
        max_difference: acc.max_diff,
        bounded_difference_violation,
        max_abs_g: acc.max_abs,
        uniform_bound_violation: 0.0,
        worst_violation: worst,
        passed: worst <= tol,
    })
}

/// Floating-point allowance for "exact" checks on values of size `scale`.
fn condition_tolerance(scale: f64) -> f64 {
    1e-12 * scale.max(1.0)
}

/// [`verify_family_conditions`] for the chaos family, plus the uniform bound
/// `max |g_i| = M + beta (n - 1) / 2`.
pub fn verify_chaos_conditions(params: &ChaosParams) -> Result<ConditionReport> {
    let mut report = verify_family_conditions(params, params.m, params.beta)?;
    report.uniform_bound_violation = (report.max_abs_g - params.uniform_bound()).abs();
    report.worst_violation = report.worst_violation.max(report.uniform_bound_violation);
    report.passed = report.worst_violation <= condition_tolerance(report.max_abs_g);
    Ok(report)
}

/// Largest `|sum_i g_i(z) - chaos_sum(z)|` over all sign vectors.
pub fn sum_identity_gap(params: &ChaosParams) -> Result<f64> {
    fold_cube(
        params.n,
        || 0.0f64,
        |acc, z| {
            let direct: f64 = (0..params.n).map(|i| params.eval(i, z)).sum();
            let s: i64 = z.iter().map(|&b| i64::from(b)).sum();
            *acc = acc.max((direct - params.sum_of(s)).abs());
        },
        f64::max,
    )
}

/// Exact `||sum_i g_i||_p` through the binomial law of `S`.
pub fn chaos_lp(params: &ChaosParams, p: f64) -> Result<f64> {
    BinomialWeights::new(params.n)?.lp(|s| params.sum_of(s), p)
}

/// [`chaos_lp`] reusing precomputed weights for `params.n`.
pub fn chaos_lp_with(weights: &BinomialWeights, params: &ChaosParams, p: f64) -> Result<f64> {
    if weights.n() != params.n {
        return Err(invalid("weights", "binomial row does not match n"));
    }
    weights.lp(|s| params.sum_of(s), p)
}

fn lower_denominator(params: &ChaosParams, p: f64) -> Result<f64> {
    check_moment_order("p", p, 2.0)?;
    if p > params.n as f64 {
        return Err(invalid("p", format!("must not exceed n = {}", params.n)));
    }
    if params.m == 0.0 && params.beta == 0.0 {
        return Err(invalid("M, beta", "M = beta = 0 is a degenerate family"));
    }
    let n = params.n as f64;
    Ok(p * n * params.beta + params.m * (p * n).sqrt())
}

/// `||sum g_i||_p / (p n beta + M sqrt(p n))` for `2 <= p <= n`.
pub fn lower_ratio(params: &ChaosParams, p: f64) -> Result<f64> {
    let denom = lower_denominator(params, p)?;
    Ok(chaos_lp(params, p)? / denom)
}

pub fn lower_ratio_with(weights: &BinomialWeights, params: &ChaosParams, p: f64) -> Result<f64> {
    let denom = lower_denominator(params, p)?;
    Ok(chaos_lp_with(weights, params, p)? / denom)
}

/// `P(|f| >= ||f||_p / 2) >= (||f||_p^2 / (2 ||f||_{2p}^2))^p` for `f = sum g_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCertificate {
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub norm_p: f64,
    pub norm_2p: f64,
}

impl TailCertificate {
    pub fn is_valid(&self) -> bool {
        self.lhs >= self.rhs
    }
}

fn certificate_norms(
    weights: &BinomialWeights,
    params: &ChaosParams,
    p: f64,
) -> Result<(f64, f64, f64)> {
    check_moment_order("p", p, 2.0)?;
    if params.m == 0.0 && params.beta == 0.0 {
        return Err(invalid("M, beta", "M = beta = 0 is a degenerate family"));
    }
    let norm_p = chaos_lp_with(weights, params, p)?;
    let norm_2p = chaos_lp_with(weights, params, 2.0 * p)?;
    // An identically zero sum (n = 1, M = 0) has nothing to certify.
    let rhs = if norm_2p == 0.0 {
        0.0
    } else {
        (norm_p * norm_p / (2.0 * norm_2p * norm_2p)).powf(p)
    };
    Ok((norm_p, norm_2p, rhs))
}

/// Certificate with the tail probability obtained by enumerating all
/// `2^n` sign vectors (`n <= 26`); norms come from the binomial law.
pub fn paley_zygmund_certificate(params: &ChaosParams, p: f64) -> Result<TailCertificate> {
    if params.n > ENUMERATION_CAP {
        return Err(Error::ArityCap {
            arity: params.n,
            cap: ENUMERATION_CAP,
        });
    }
    let weights = BinomialWeights::new(params.n)?;
    let (norm_p, norm_2p, rhs) = certificate_norms(&weights, params, p)?;
    let f = sign_fn(params.n, |z| {
        let s: i64 = z.iter().map(|&b| i64::from(b)).sum();
        params.sum_of(s)
    });
    let lhs = enumerate_tail(&f, 0.5 * norm_p)?;
    Ok(TailCertificate {
        p,
        lhs,
        rhs,
        norm_p,
        norm_2p,
    })
}

/// Certificate for any `n`, with the tail probability read off the
/// binomial law of `S`.
pub fn paley_zygmund_certificate_collapsed(
    params: &ChaosParams,
    p: f64,
) -> Result<TailCertificate> {
    let weights = BinomialWeights::new(params.n)?;
    let (norm_p, norm_2p, rhs) = certificate_norms(&weights, params, p)?;
    let lhs = weights.tail(|s| params.sum_of(s), 0.5 * norm_p)?;
    Ok(TailCertificate {
        p,
        lhs,
        rhs,
        norm_p,
        norm_2p,
    })
}

/// Exact norm of the chaos sum next to the explicit moment bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceCheck {
    pub exact: f64,
    pub bound: f64,
}

impl DominanceCheck {
    pub fn holds(&self) -> bool {
        self.exact <= self.bound
    }
}

pub fn dominance_with(
    weights: &BinomialWeights,
    params: &ChaosParams,
    p: f64,
) -> Result<DominanceCheck> {
    Ok(DominanceCheck {
        exact: chaos_lp_with(weights, params, p)?,
        bound: theorem1_moment_bound(p, params.n, params.beta, params.m)?.value,
    })
}
