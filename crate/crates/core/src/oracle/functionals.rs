use crate::error::{check_moment_order, check_non_negative, invalid, Result};

/// `sum_{i <= p} a*_i + sqrt(p) (sum_{i > p} a*_i^2)^(1/2)` where `a*` is the
/// non-increasing rearrangement of the weights and the head has `floor(p)`
/// terms. Equivalent, up to constants, to `||sum a_i eps_i||_p`.
pub fn hitczenko_functional(weights: &[f64], p: f64) -> Result<f64> {
    check_moment_order("p", p, 1.0)?;
    for &a in weights {
        check_non_negative("weights", a)?;
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let head_len = (p.floor() as usize).min(sorted.len());
    let (head, tail) = sorted.split_at(head_len);
    let head_sum: f64 = head.iter().sum();
    let tail_sq: f64 = tail.iter().map(|a| a * a).sum();
    Ok(head_sum + p.sqrt() * tail_sq.sqrt())
}

/// `p n + p sqrt(n) + sqrt(p) n`, the shape of `||sum_{i != j} Z_i Z_j||_p`
/// obtained for the all-ones off-diagonal matrix.
pub fn latala_allones_estimate(n: usize, p: f64) -> Result<f64> {
    check_moment_order("p", p, 1.0)?;
    if n < 2 {
        return Err(invalid("n", format!("must be >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(p * nf + p * nf.sqrt() + p.sqrt() * nf)
}
