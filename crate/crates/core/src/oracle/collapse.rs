use super::reduce::abs_pow;
use crate::error::{check_moment_order, check_non_negative, invalid, Result};

/// Integer binomial rows fit in `u128` up to this `n`.
const EXACT_ROW_MAX: usize = 127;

/// The law of `S = Z_1 + ... + Z_n`: `P(S = 2k - n) = C(n, k) 2^-n`.
///
/// Weights are exact binomial coefficients (one rounding to `f64`) scaled by
/// `2^-n` for `n <= 127`. Larger rows are built outward from the mode with
/// the ratio recurrence and normalized. Sums over the law always run in
/// decreasing weight order, ties broken by `k`.
#[derive(Debug, Clone)]
pub struct BinomialWeights {
    n: usize,
    weights: Vec<f64>,
    order: Vec<usize>,
}

impl BinomialWeights {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "must be >= 1"));
        }
        let weights = if n <= EXACT_ROW_MAX {
            exact_row(n)
        } else {
            recurrence_row(n)
        };
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        Ok(BinomialWeights { n, weights, order })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `P(S = 2k - n)`.
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    /// Value of `S` at index `k`.
    pub fn sum_at(&self, k: usize) -> i64 {
        2 * k as i64 - self.n as i64
    }

    fn weighted_sum(&self, mut term: impl FnMut(usize) -> f64) -> f64 {
        self.order
            .iter()
            .map(|&k| self.weights[k] * term(k))
            .fold(0.0, |acc, x| acc + x)
    }

    pub fn expectation(&self, g: impl Fn(i64) -> f64) -> f64 {
        self.weighted_sum(|k| g(self.sum_at(k)))
    }

    /// `(E |g(S)|^p)^(1/p)`, scaled by `max |g|` over the support.
    pub fn lp(&self, g: impl Fn(i64) -> f64, p: f64) -> Result<f64> {
        check_moment_order("p", p, 1.0)?;
        let values: Vec<f64> = (0..=self.n).map(|k| g(self.sum_at(k)).abs()).collect();
        let top = values
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .fold(0.0f64, |acc, (&v, _)| acc.max(v));
        if top == 0.0 {
            return Ok(0.0);
        }
        let mean = self.weighted_sum(|k| abs_pow(values[k] / top, p));
        Ok(top * mean.powf(1.0 / p))
    }

    /// `P(|g(S)| >= t)`.
    pub fn tail(&self, g: impl Fn(i64) -> f64, t: f64) -> Result<f64> {
        check_non_negative("t", t)?;
        Ok(self.weighted_sum(|k| {
            if g(self.sum_at(k)).abs() >= t {
                1.0
            } else {
                0.0
            }
        }))
    }
}

fn exact_row(n: usize) -> Vec<f64> {
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for m in 1..=n {
        for k in (1..=m).rev() {
            row[k] += row[k - 1];
        }
    }
    let scale = 2f64.powi(-(n as i32));
    row.into_iter().map(|c| c as f64 * scale).collect()
}

fn recurrence_row(n: usize) -> Vec<f64> {
    let mode = n / 2;
    let mut w = vec![0.0; n + 1];
    w[mode] = 1.0;
    for k in mode..n {
        w[k + 1] = w[k] * (n - k) as f64 / (k + 1) as f64;
    }
    for k in (1..=mode).rev() {
        w[k - 1] = w[k] * k as f64 / (n - k + 1) as f64;
    }
    let mut sorted = w.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().fold(0.0, |acc, x| acc + x);
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// `(E |g(S)|^p)^(1/p)` with `S` a sum of `n` Rademacher signs.
pub fn collapse_lp(g: impl Fn(i64) -> f64, n: usize, p: f64) -> Result<f64> {
    check_moment_order("p", p, 1.0)?;
    BinomialWeights::new(n)?.lp(g, p)
}

/// `P(|g(S)| >= t)` with `S` a sum of `n` Rademacher signs.
pub fn collapse_tail(g: impl Fn(i64) -> f64, n: usize, t: f64) -> Result<f64> {
    BinomialWeights::new(n)?.tail(g, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_one() {
        for n in [1, 2, 7, 60, 127, 128, 500, 1024, 16384] {
            let w = BinomialWeights::new(n).unwrap();
            let total = w.expectation(|_| 1.0);
            assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn exact_small_rows() {
        let w = BinomialWeights::new(4).unwrap();
        let expected = [1.0, 4.0, 6.0, 4.0, 1.0].map(|c| c / 16.0);
        for (k, e) in expected.iter().enumerate() {
            assert_eq!(w.weight(k), *e);
        }
        assert_eq!(w.sum_at(0), -4);
        assert_eq!(w.sum_at(4), 4);
    }

    #[test]
    fn recurrence_agrees_with_exact_row_at_boundary() {
        let exact = exact_row(120);
        let rec = recurrence_row(120);
        for (a, b) in exact.iter().zip(&rec) {
            if *a > 1e-300 {
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn examples() {
        assert_relative_eq!(
            collapse_lp(|s| s as f64, 100, 2.0).unwrap(),
            10.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            collapse_lp(|s| (s * s - 2) as f64, 2, 3.0).unwrap(),
            2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            collapse_lp(|s| (s * s - 4) as f64, 4, 2.0).unwrap(),
            24f64.sqrt(),
            max_relative = 1e-15
        );
        assert!(collapse_lp(|s| s as f64, 4, 0.9).is_err());
        assert!(collapse_lp(|s| s as f64, 0, 2.0).is_err());
    }

    #[test]
    fn second_moment_of_large_sums() {
        for n in [1000usize, 4096, 16384] {
            let v = collapse_lp(|s| s as f64, n, 2.0).unwrap();
            assert_relative_eq!(v, (n as f64).sqrt(), max_relative = 1e-11);
        }
    }

    #[test]
    fn tail_of_sum() {
        assert_eq!(collapse_tail(|s| s as f64, 2, 1.0).unwrap(), 0.5);
        assert_eq!(collapse_tail(|s| s as f64, 5, 0.0).unwrap(), 1.0);
    }
}
