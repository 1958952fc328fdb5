/// `x^p` for `x >= 0`, using repeated multiplication for small integral `p`.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    let x = x.abs();
    if p.fract() == 0.0 && p <= 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len if len <= 8 => values.iter().sum(),
        len => {
            let (left, right) = values.split_at(len / 2);
            pairwise_sum(left) + pairwise_sum(right)
        }
    }
}

/// Merges per-chunk partial results in a tree whose shape depends only on
/// the number of chunks.
pub(crate) fn pairwise_merge<T>(mut parts: Vec<T>, combine: &impl Fn(T, T) -> T) -> Option<T> {
    match parts.len() {
        0 => None,
        1 => parts.pop(),
        len => {
            let right = parts.split_off(len / 2);
            let l = pairwise_merge(parts, combine)?;
            let r = pairwise_merge(right, combine)?;
            Some(combine(l, r))
        }
    }
}
