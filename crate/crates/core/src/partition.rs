//! Nested dyadic partitions of the index set and the telescoping
//! decomposition `g_i - E[g_i | Z_i] = sum_{l<k} (g_i^l - g_i^{l+1})`, where
//! `g_i^l` conditions on `Z_i` and on every coordinate outside `B^l(i)`.
//!
//! Indices are zero-based. The index set is padded to `2^k` with
//! identically-zero functions, so coordinates `>= n` never contribute.

use std::ops::Range;

use serde::Serialize;

use crate::bounds::{ceil_log2, theorem1_moment_bound};
use crate::chaos::ChaosParams;
use crate::error::{check_moment_order, Error, Result};
use crate::oracle::{abs_pow, fold_cube, for_each_in_cube, SignFamily, ENUMERATION_CAP};

/// Largest arity accepted by the generic conditional-expectation path.
pub const GENERIC_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionTree {
    pub n_original: usize,
    pub n_padded: usize,
    /// Number of refinement levels, `n_padded = 2^k`.
    pub k: u32,
    /// `levels[l]` holds the `2^(k-l)` contiguous blocks of size `2^l`.
    pub levels: Vec<Vec<Range<usize>>>,
}

pub fn build_partition(n: usize) -> Result<PartitionTree> {
    if n == 0 {
        return Err(crate::error::invalid("n", "must be >= 1"));
    }
    let n_padded = n.next_power_of_two();
    let k = n_padded.trailing_zeros();
    let levels = (0..=k)
        .map(|l| {
            let size = 1usize << l;
            (0..n_padded / size)
                .map(|b| b * size..(b + 1) * size)
                .collect()
        })
        .collect();
    Ok(PartitionTree {
        n_original: n,
        n_padded,
        k,
        levels,
    })
}

impl PartitionTree {
    /// `B^l(i)`, the level-`l` block containing `i`.
    pub fn block_of(&self, i: usize, l: u32) -> Result<Range<usize>> {
        if i >= self.n_padded {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.n_padded,
            });
        }
        if l > self.k {
            return Err(Error::IndexOutOfRange {
                index: l as usize,
                len: self.k as usize + 1,
            });
        }
        let start = (i >> l) << l;
        Ok(start..start + (1 << l))
    }

    /// `B^{l+1}(i) \ B^l(i)`: the sibling of `B^l(i)`, always contiguous.
    pub fn sibling_of(&self, i: usize, l: u32) -> Result<Range<usize>> {
        self.check_level(l)?;
        let own = self.block_of(i, l)?;
        let size = 1usize << l;
        let start = ((i >> l) ^ 1) << l;
        debug_assert_eq!(own.len(), size);
        Ok(start..start + size)
    }

    fn check_level(&self, l: u32) -> Result<()> {
        if l >= self.k {
            return Err(crate::error::invalid(
                "l",
                format!("telescoping level must be < k = {}", self.k),
            ));
        }
        Ok(())
    }

    /// Checks the structural invariants: singleton bottom level, a single
    /// top block, each block the disjoint union of two children, and
    /// `n_padded < 2 n_original`.
    pub fn is_well_formed(&self) -> bool {
        if !self.n_padded.is_power_of_two()
            || self.n_padded != 1 << self.k
            || self.n_padded >= 2 * self.n_original
            || self.n_padded < self.n_original
            || self.levels.len() != self.k as usize + 1
        {
            return false;
        }
        if self.levels[0]
            .iter()
            .enumerate()
            .any(|(i, b)| *b != (i..i + 1))
        {
            return false;
        }
        let top = &self.levels[self.k as usize];
        if top.len() != 1 || top[0] != (0..self.n_padded) {
            return false;
        }
        for l in 1..=self.k as usize {
            let (lower, upper) = (&self.levels[l - 1], &self.levels[l]);
            if upper.len() != self.n_padded >> l || lower.len() != 2 * upper.len() {
                return false;
            }
            for (b, block) in upper.iter().enumerate() {
                let (left, right) = (&lower[2 * b], &lower[2 * b + 1]);
                if block.len() != 1 << l
                    || left.start != block.start
                    || left.end != right.start
                    || right.end != block.end
                {
                    return false;
                }
            }
        }
        true
    }
}

fn sign_sum(z: &[i8], range: Range<usize>) -> i64 {
    let end = range.end.min(z.len());
    let start = range.start.min(end);
    z[start..end].iter().map(|&b| i64::from(b)).sum()
}

/// `g_i^l - g_i^{l+1} = (beta/2) z_i sum_{j in B^{l+1}(i) \ B^l(i)} z_j` for the
/// chaos family. Padded indices give zero.
pub fn telescope_term_chaos(
    tree: &PartitionTree,
    i: usize,
    l: u32,
    z: &[i8],
    params: &ChaosParams,
) -> Result<f64> {
    check_tree(tree, params, z)?;
    let sibling = tree.sibling_of(i, l)?;
    if i >= params.n {
        return Ok(0.0);
    }
    Ok(0.5 * params.beta * f64::from(z[i]) * sign_sum(z, sibling) as f64)
}

fn check_tree(tree: &PartitionTree, params: &ChaosParams, z: &[i8]) -> Result<()> {
    if tree.n_original != params.n {
        return Err(Error::LengthMismatch {
            expected: params.n,
            got: tree.n_original,
        });
    }
    if z.len() != params.n {
        return Err(Error::LengthMismatch {
            expected: params.n,
            got: z.len(),
        });
    }
    Ok(())
}

/// `g_i^l(z)` for an arbitrary family, by averaging `g_i` over the
/// coordinates of `B^l(i)` other than `i`. Exponential in the block size;
/// restricted to `n <= 12`.
pub fn conditional_expectation_generic(
    family: &impl SignFamily,
    tree: &PartitionTree,
    i: usize,
    l: u32,
    z: &[i8],
) -> Result<f64> {
    let n = family.len();
    if n > GENERIC_CAP {
        return Err(Error::ArityCap {
            arity: n,
            cap: GENERIC_CAP,
        });
    }
    if tree.n_original != n || z.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: z.len(),
        });
    }
    let block = tree.block_of(i, l)?;
    if i >= n {
        return Ok(0.0);
    }
    let free: Vec<usize> = block.filter(|&j| j != i && j < n).collect();
    let mut w = z.to_vec();
    let count = 1u64 << free.len();
    let mut total = 0.0;
    for bits in 0..count {
        for (b, &j) in free.iter().enumerate() {
            w[j] = if bits >> b & 1 == 1 { 1 } else { -1 };
        }
        total += family.eval(i, &w);
    }
    Ok(total / count as f64)
}

/// `g_i^l - g_i^{l+1}` through [`conditional_expectation_generic`].
pub fn telescope_term_generic(
    family: &impl SignFamily,
    tree: &PartitionTree,
    i: usize,
    l: u32,
    z: &[i8],
) -> Result<f64> {
    tree.check_level(l)?;
    Ok(conditional_expectation_generic(family, tree, i, l, z)?
        - conditional_expectation_generic(family, tree, i, l + 1, z)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TelescopingReport {
    pub n: usize,
    pub k: u32,
    /// `max |sum_l (g_i^l - g_i^{l+1}) - (g_i - M z_i)|` over all `z` and `i`.
    pub max_deviation: f64,
    pub passed: bool,
}

pub const TELESCOPING_TOLERANCE: f64 = 1e-12;

/// Checks the telescoping identity on every sign vector and every index.
pub fn verify_telescoping(params: &ChaosParams) -> Result<TelescopingReport> {
    let tree = build_partition(params.n)?;
    let n = params.n;
    let max_deviation = fold_cube(
        n,
        || (0.0f64, vec![0.0; n]),
        |(acc, row), z| {
            params.eval_all(z, row);
            for (i, &g) in row.iter().enumerate() {
                let telescoped: f64 = (0..tree.k)
                    .map(|l| {
                        let sib = tree.sibling_of(i, l).expect("valid level");
                        0.5 * params.beta * f64::from(z[i]) * sign_sum(z, sib) as f64
                    })
                    .sum();
                let target = g - params.m * f64::from(z[i]);
                *acc = acc.max((telescoped - target).abs());
            }
        },
        |a, b| (a.0.max(b.0), a.1),
    )?
    .0;
    Ok(TelescopingReport {
        n,
        k: tree.k,
        max_deviation,
        passed: max_deviation <= TELESCOPING_TOLERANCE,
    })
}

/// Exact norm at one layer of the proof against its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerCheck {
    pub level: u32,
    /// Largest exact norm among the members of the layer.
    pub max_exact: f64,
    pub bound: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelBoundsReport {
    pub n: usize,
    pub p: f64,
    pub k: u32,
    /// `||g_i^l - g_i^{l+1}||_p <= 2 sqrt(p 2^l) beta`, one entry per level.
    pub terms: Vec<LayerCheck>,
    /// `||sum_{i in B} (g_i^l - g_i^{l+1})||_p <= 6 sqrt(2) p 2^l beta` over `B` in level `l`.
    pub blocks: Vec<LayerCheck>,
    /// `||sum_i (g_i^l - g_i^{l+1})||_p <= 6 sqrt(2) p 2^k beta`.
    pub levels: Vec<LayerCheck>,
    /// `||sum_i M z_i||_p`.
    pub hoeffding_exact: f64,
    /// `4 M sqrt(p n)`.
    pub hoeffding_bound: f64,
    /// `||sum_i g_i||_p`.
    pub total_exact: f64,
    /// Sum of the level bounds plus the Hoeffding bound.
    pub assembled: f64,
    pub theorem1: f64,
    pub violations: usize,
}

impl LevelBoundsReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Layout of the `|x|^p` accumulators for one moment order.
struct Slots {
    n: usize,
    k: usize,
    /// Offset of level `l` in the block section.
    block_offsets: Vec<usize>,
    blocks: usize,
}

impl Slots {
    fn new(n: usize, tree: &PartitionTree) -> Self {
        let k = tree.k as usize;
        let mut block_offsets = Vec::with_capacity(k);
        let mut blocks = 0;
        for l in 0..k {
            block_offsets.push(blocks);
            blocks += tree.n_padded >> l;
        }
        Slots {
            n,
            k,
            block_offsets,
            blocks,
        }
    }

    fn term(&self, i: usize, l: usize) -> usize {
        l * self.n + i
    }

    fn block(&self, l: usize, b: usize) -> usize {
        self.n * self.k + self.block_offsets[l] + b
    }

    fn level(&self, l: usize) -> usize {
        self.n * self.k + self.blocks + l
    }

    fn hoeffding(&self) -> usize {
        self.n * self.k + self.blocks + self.k
    }

    fn total(&self) -> usize {
        self.hoeffding() + 1
    }

    fn len(&self) -> usize {
        self.total() + 1
    }
}

/// [`verify_level_bounds`] for several moment orders from one enumeration.
pub fn verify_level_bounds_multi(
    params: &ChaosParams,
    ps: &[f64],
) -> Result<Vec<LevelBoundsReport>> {
    let n = params.n;
    if n > ENUMERATION_CAP {
        return Err(Error::ArityCap {
            arity: n,
            cap: ENUMERATION_CAP,
        });
    }
    for &p in ps {
        check_moment_order("p", p, 2.0)?;
    }
    let tree = build_partition(n)?;
    let slots = Slots::new(n, &tree);
    let width = slots.len();
    let half_beta = 0.5 * params.beta;

    let sums = fold_cube(
        n,
        || (vec![0.0f64; width * ps.len()], vec![0.0f64; width]),
        |(acc, values), z| {
            values.iter_mut().for_each(|v| *v = 0.0);
            let s: i64 = z.iter().map(|&b| i64::from(b)).sum();
            for l in 0..slots.k {
                for i in 0..n {
                    let sib = tree.sibling_of(i, l as u32).expect("valid level");
                    let term = half_beta * f64::from(z[i]) * sign_sum(z, sib) as f64;
                    values[slots.term(i, l)] = term;
                    values[slots.block(l, i >> l)] += term;
                    values[slots.level(l)] += term;
                }
            }
            values[slots.hoeffding()] = params.m * s as f64;
            values[slots.total()] = params.sum_of(s);
            for (q, &p) in ps.iter().enumerate() {
                let row = &mut acc[q * width..(q + 1) * width];
                for (a, &v) in row.iter_mut().zip(values.iter()) {
                    *a += abs_pow(v, p);
                }
            }
        },
        |(mut a, scratch), (b, _)| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x += y;
            }
            (a, scratch)
        },
    )?
    .0;

    let outcomes = (1u64 << n) as f64;
    let nf = n as f64;
    let mut reports = Vec::with_capacity(ps.len());
    for (q, &p) in ps.iter().enumerate() {
        let norm = |slot: usize| (sums[q * width + slot] / outcomes).powf(1.0 / p);
        let mut violations = 0;
        let mut layer = |level: u32, members: &mut dyn Iterator<Item = f64>, bound: f64| {
            let mut check = LayerCheck {
                level,
                max_exact: 0.0,
                bound,
                violations: 0,
            };
            for exact in members {
                check.max_exact = check.max_exact.max(exact);
                if exact > bound {
                    check.violations += 1;
                }
            }
            violations += check.violations;
            check
        };
        let mut terms = Vec::with_capacity(slots.k);
        let mut blocks = Vec::with_capacity(slots.k);
        let mut levels = Vec::with_capacity(slots.k);
        let level_bound = 6.0 * 2f64.sqrt() * p * tree.n_padded as f64 * params.beta;
        for l in 0..slots.k {
            let size = (1u64 << l) as f64;
            terms.push(layer(
                l as u32,
                &mut (0..n).map(|i| norm(slots.term(i, l))),
                2.0 * (p * size).sqrt() * params.beta,
            ));
            blocks.push(layer(
                l as u32,
                &mut (0..tree.n_padded >> l).map(|b| norm(slots.block(l, b))),
                6.0 * 2f64.sqrt() * p * size * params.beta,
            ));
            levels.push(layer(
                l as u32,
                &mut std::iter::once(norm(slots.level(l))),
                level_bound,
            ));
        }
        let hoeffding_exact = norm(slots.hoeffding());
        let hoeffding_bound = 4.0 * params.m * (p * nf).sqrt();
        let total_exact = norm(slots.total());
        let assembled = level_bound * slots.k as f64 + hoeffding_bound;
        let theorem1 = theorem1_moment_bound(p, n, params.beta, params.m)?.value;
        violations += usize::from(hoeffding_exact > hoeffding_bound)
            + usize::from(total_exact > assembled)
            + usize::from(assembled > theorem1);
        debug_assert!(n < 2 || slots.k == ceil_log2(n) as usize);
        reports.push(LevelBoundsReport {
            n,
            p,
            k: tree.k,
            terms,
            blocks,
            levels,
            hoeffding_exact,
            hoeffding_bound,
            total_exact,
            assembled,
            theorem1,
            violations,
        });
    }
    Ok(reports)
}

/// Exact per-term, per-block and per-level norms against the bounds used in
/// the moment-bound argument, plus the assembled bound.
pub fn verify_level_bounds(params: &ChaosParams, p: f64) -> Result<LevelBoundsReport> {
    Ok(verify_level_bounds_multi(params, &[p])?.remove(0))
}

/// Largest deviation between the closed-form telescoping terms and the
/// generic conditional-expectation path, over every `z`, `i` and `l`.
pub fn generic_term_gap(params: &ChaosParams) -> Result<f64> {
    let tree = build_partition(params.n)?;
    let mut gap = 0.0f64;
    let mut failure = None;
    for_each_in_cube(params.n, |z| {
        for i in 0..params.n {
            for l in 0..tree.k {
                let generic = telescope_term_generic(params, &tree, i, l, z);
                let closed = telescope_term_chaos(&tree, i, l, z, params);
                match (generic, closed) {
                    (Ok(a), Ok(b)) => gap = gap.max((a - b).abs()),
                    (Err(e), _) | (_, Err(e)) => failure = Some(e),
                }
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(gap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::chaos_g;
    use crate::oracle::SignVector;
    use approx::assert_relative_eq;

    fn params(n: usize, m: f64, beta: f64) -> ChaosParams {
        ChaosParams::new(n, m, beta).unwrap()
    }

    #[test]
    fn partition_examples() {
        let t = build_partition(4).unwrap();
        assert_eq!(t.levels[0], vec![0..1, 1..2, 2..3, 3..4]);
        assert_eq!(t.levels[1], vec![0..2, 2..4]);
        assert_eq!(t.levels[2], vec![0..4]);
        let t = build_partition(3).unwrap();
        assert_eq!((t.n_padded, t.k), (4, 2));
        let t = build_partition(1).unwrap();
        assert_eq!((t.n_padded, t.k, t.levels.len()), (1, 0, 1));
        assert!(build_partition(0).is_err());
    }

    #[test]
    fn well_formed_up_to_16384() {
        for n in 1..=1 << 14 {
            assert!(build_partition(n).unwrap().is_well_formed(), "n = {n}");
        }
        let mut t = build_partition(8).unwrap();
        t.levels[1].swap(0, 1);
        assert!(!t.is_well_formed());
    }

    #[test]
    fn block_examples() {
        let t = build_partition(4).unwrap();
        assert_eq!(t.block_of(2, 1).unwrap(), 2..4);
        assert_eq!(t.block_of(3, 0).unwrap(), 3..4);
        assert_eq!(t.block_of(1, 2).unwrap(), 0..4);
        assert!(t.block_of(4, 0).is_err());
        assert!(t.block_of(0, 3).is_err());
        assert_eq!(t.sibling_of(2, 1).unwrap(), 0..2);
        assert!(t.sibling_of(0, 2).is_err());
    }

    #[test]
    fn term_examples() {
        let t = build_partition(2).unwrap();
        let z = SignVector::new(vec![1, -1]).unwrap();
        assert_eq!(
            telescope_term_chaos(&t, 0, 0, &z, &params(2, 0.0, 2.0)).unwrap(),
            -1.0
        );
        assert!(telescope_term_chaos(&t, 0, 1, &z, &params(2, 0.0, 2.0)).is_err());

        let t = build_partition(6).unwrap();
        let p = params(6, 1.3, 0.0);
        for bits in 0..64 {
            let z = SignVector::from_index(6, bits).unwrap();
            for l in 0..t.k {
                assert_eq!(telescope_term_chaos(&t, 1, l, &z, &p).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn terms_telescope_to_g() {
        let t = build_partition(5).unwrap();
        let p = params(5, 0.7, 1.9);
        for bits in 0..32 {
            let z = SignVector::from_index(5, bits).unwrap();
            for i in 0..5 {
                let sum: f64 = (0..t.k)
                    .map(|l| telescope_term_chaos(&t, i, l, &z, &p).unwrap())
                    .sum();
                let g = chaos_g(i, &z, &p).unwrap();
                assert_relative_eq!(sum + 0.7 * f64::from(z[i]), g, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn telescoping_reports() {
        for (n, m, beta) in [
            (4, 1.0, 1.0),
            (2, 0.0, 1.0),
            (8, 0.0, 3.0),
            (7, 2.0, 0.5),
            (1, 1.0, 1.0),
        ] {
            let r = verify_telescoping(&params(n, m, beta)).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(verify_telescoping(&params(27, 1.0, 1.0)).is_err());
    }

    #[test]
    fn generic_path_agrees() {
        for (n, m, beta) in [(2, 0.5, 2.0), (3, 1.0, 1.0), (6, 0.2, 0.7)] {
            assert!(generic_term_gap(&params(n, m, beta)).unwrap() <= 1e-14);
        }
        assert!(conditional_expectation_generic(
            &params(13, 1.0, 1.0),
            &build_partition(13).unwrap(),
            0,
            0,
            &[1; 13]
        )
        .is_err());
    }

    #[test]
    fn level_bounds_examples() {
        let r = verify_level_bounds(&params(2, 0.0, 3.0), 5.0).unwrap();
        assert_relative_eq!(r.terms[0].max_exact, 1.5, max_relative = 1e-14);
        assert!(r.passed());

        let r = verify_level_bounds(&params(6, 0.0, 0.0), 2.0).unwrap();
        assert!(r.passed());
        assert!(r
            .terms
            .iter()
            .chain(&r.blocks)
            .chain(&r.levels)
            .all(|c| c.max_exact == 0.0));

        let r = verify_level_bounds(&params(8, 0.0, 1.0), 4.0).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!((r.terms.len(), r.blocks.len(), r.levels.len()), (3, 3, 3));
        assert!(r.total_exact <= r.assembled && r.assembled <= r.theorem1);
    }

    #[test]
    fn level_bounds_multi_matches_single() {
        let p = params(5, 0.4, 1.1);
        let multi = verify_level_bounds_multi(&p, &[2.0, 3.0]).unwrap();
        assert_eq!(multi[1], verify_level_bounds(&p, 3.0).unwrap());
        let direct = crate::chaos::chaos_lp(&p, 3.0).unwrap();
        assert_relative_eq!(multi[1].total_exact, direct, max_relative = 1e-12);
        assert_relative_eq!(
            multi[0].hoeffding_exact,
            0.4 * 5f64.sqrt(),
            max_relative = 1e-12
        );
    }
}
