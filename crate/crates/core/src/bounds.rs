//! Closed-form moment and deviation bounds.
//!
//! Bounds stated only up to a universal constant are evaluated with that
//! constant set to one and tagged [`ConstantConvention::Shape`]. Bounds with
//! explicit constants are tagged [`ConstantConvention::Explicit`]. A shape
//! value is an order-of-magnitude reference, never a certified numeric bound.
//!
//! Logarithms are natural and floored at one (`log x` means `max(ln x, 1)`),
//! except for the `ceil(log2 n)` factor of the moment bound, which is floored
//! at one as well so that `n = 1` stays meaningful.

use std::f64::consts::{E, SQRT_2};

use serde::Serialize;

use crate::error::{
    check_moment_order, check_non_negative, check_probability_open, invalid, Result,
};

/// Natural log floored at one.
pub fn log1(x: f64) -> f64 {
    x.ln().max(1.0)
}

/// `ceil(log2 n)`, floored at one.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 2 {
        1
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantConvention {
    /// Constants are the ones proven; the value is a rigorous bound.
    Explicit,
    /// Hidden universal constant taken as one.
    Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `(n sqrt(n) gamma + L sqrt(n)) sqrt(log 1/delta)`.
    Bousquet02,
    /// `(n sqrt(gamma L) + L sqrt(n)) sqrt(log 1/delta)`.
    Fv2018,
    /// `n gamma log^2 n + n gamma log n log(1/delta) + L sqrt(n log 1/delta)`.
    Fv2019,
    /// `n gamma log n log(1/delta) + L sqrt(n log 1/delta)`.
    Bkz,
    Theorem1Moment,
    CappedMoment,
    RelaxedSubGaussian,
    Variance,
}

impl BoundKind {
    pub const GENERALIZATION: [BoundKind; 4] = [
        BoundKind::Bousquet02,
        BoundKind::Fv2018,
        BoundKind::Fv2019,
        BoundKind::Bkz,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Bousquet02 => "bousquet02",
            BoundKind::Fv2018 => "fv2018",
            BoundKind::Fv2019 => "fv2019",
            BoundKind::Bkz => "bkz",
            BoundKind::Theorem1Moment => "theorem1_moment",
            BoundKind::CappedMoment => "capped_moment",
            BoundKind::RelaxedSubGaussian => "relaxed_sub_gaussian",
            BoundKind::Variance => "variance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub kind: BoundKind,
    pub value: f64,
    pub constant_convention: ConstantConvention,
}

impl BoundValue {
    fn shape(kind: BoundKind, value: f64) -> Self {
        BoundValue {
            kind,
            value,
            constant_convention: ConstantConvention::Shape,
        }
    }

    fn explicit(kind: BoundKind, value: f64) -> Self {
        BoundValue {
            kind,
            value,
            constant_convention: ConstantConvention::Explicit,
        }
    }
}

/// Parameter bundle shared by the bound evaluators.
///
/// `m` is the bound on `|E[g_i | Z_i]|`, `beta` the bounded-difference
/// parameter, `gamma` the uniform stability and `l` the uniform loss bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub gamma: f64,
    pub l: f64,
    pub m: f64,
    pub beta: f64,
    pub delta: f64,
    pub p: f64,
}

impl BoundInputs {
    /// All magnitudes zero, `p = 2`.
    pub fn new(n: usize, delta: f64) -> Self {
        BoundInputs {
            n,
            gamma: 0.0,
            l: 0.0,
            m: 0.0,
            beta: 0.0,
            delta,
            p: 2.0,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_loss_bound(mut self, l: f64) -> Self {
        self.l = l;
        self
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be >= 1"));
        }
        check_non_negative("gamma", self.gamma)?;
        check_non_negative("L", self.l)?;
        check_non_negative("M", self.m)?;
        check_non_negative("beta", self.beta)?;
        check_probability_open("delta", self.delta)?;
        check_moment_order("p", self.p, 1.0)?;
        Ok(())
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    Ok(())
}

/// One of the four high-probability bounds on `n (R - R_emp)`.
pub fn generalization_bound(kind: BoundKind, input: &BoundInputs) -> Result<BoundValue> {
    input.validate()?;
    let n = input.n as f64;
    let (gamma, l) = (input.gamma, input.l);
    let log_n = log1(n);
    let log_d = log1(1.0 / input.delta);
    let value = match kind {
        BoundKind::Bousquet02 => (n * n.sqrt() * gamma + l * n.sqrt()) * log_d.sqrt(),
        BoundKind::Fv2018 => (n * (gamma * l).sqrt() + l * n.sqrt()) * log_d.sqrt(),
        BoundKind::Fv2019 => {
            n * gamma * log_n * log_n + n * gamma * log_n * log_d + l * n.sqrt() * log_d.sqrt()
        }
        BoundKind::Bkz => n * gamma * log_n * log_d + l * (n * log_d).sqrt(),
        other => {
            return Err(invalid(
                "kind",
                format!("{} is not a generalization bound", other.as_str()),
            ))
        }
    };
    Ok(BoundValue::shape(kind, value))
}

/// `12 sqrt(2) p n beta ceil(log2 n) + 4 M sqrt(p n)`, valid for `p >= 2`.
pub fn theorem1_moment_bound(p: f64, n: usize, beta: f64, m: f64) -> Result<BoundValue> {
    check_moment_order("p", p, 2.0)?;
    check_n(n)?;
    check_non_negative("beta", beta)?;
    check_non_negative("M", m)?;
    let nf = n as f64;
    let value = 12.0 * SQRT_2 * p * nf * beta * f64::from(ceil_log2(n)) + 4.0 * m * (p * nf).sqrt();
    Ok(BoundValue::explicit(BoundKind::Theorem1Moment, value))
}

/// The moment bound capped by the trivial `n L`, with the relaxed
/// sub-Gaussian form alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CappedMomentBound {
    pub capped: BoundValue,
    /// `n sqrt(p beta L log n) + L sqrt(p n)`, shape constant.
    pub relaxed: BoundValue,
    pub cap_active: bool,
}

pub fn capped_moment_bound(
    p: f64,
    n: usize,
    beta: f64,
    m: f64,
    l: f64,
) -> Result<CappedMomentBound> {
    check_non_negative("L", l)?;
    let uncapped = theorem1_moment_bound(p, n, beta, m)?;
    if m > l {
        return Err(invalid("M", format!("must not exceed L ({m} > {l})")));
    }
    let nf = n as f64;
    let cap = nf * l;
    let relaxed = nf * (p * beta * l * log1(nf)).sqrt() + l * (p * nf).sqrt();
    Ok(CappedMomentBound {
        capped: BoundValue::explicit(BoundKind::CappedMoment, uncapped.value.min(cap)),
        relaxed: BoundValue::shape(BoundKind::RelaxedSubGaussian, relaxed),
        cap_active: cap < uncapped.value,
    })
}

/// Moment bound `3 sqrt(p) a + 9 p b` implied by a mixed tail
/// `|Y| <= a sqrt(log(e/delta)) + b log(e/delta)`.
pub fn moments_from_tail(a: f64, b: f64, p: f64) -> Result<f64> {
    check_non_negative("a", a)?;
    check_non_negative("b", b)?;
    check_moment_order("p", p, 1.0)?;
    Ok(3.0 * p.sqrt() * a + 9.0 * p * b)
}

/// Deviation bound `e (a sqrt(log(e/delta)) + b log(e/delta))` implied by
/// `||Y||_p <= sqrt(p) a + p b` for all `p >= 1`.
pub fn tail_from_moments(a: f64, b: f64, delta: f64) -> Result<f64> {
    check_non_negative("a", a)?;
    check_non_negative("b", b)?;
    check_probability_open("delta", delta)?;
    let log_ed = (E / delta).ln();
    Ok(E * (a * log_ed.sqrt() + b * log_ed))
}

/// Classical moment inequalities with explicit constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassicalBound<'a> {
    /// `2 sqrt(n p) beta` for a function with bounded differences `beta`.
    McDiarmid { n: usize, beta: f64 },
    /// `4 sqrt(n p) M` for a sum of centered variables bounded by `M`.
    Hoeffding { n: usize, m: f64 },
    /// `3 sqrt(2 n p) (n^-1 sum ||X_i||_p^p)^(1/p)` over the given norms.
    MarcinkiewiczZygmund { norms: &'a [f64] },
}

pub fn classical_moment_bound(kind: ClassicalBound<'_>, p: f64) -> Result<f64> {
    check_moment_order("p", p, 2.0)?;
    match kind {
        ClassicalBound::McDiarmid { n, beta } => {
            check_n(n)?;
            check_non_negative("beta", beta)?;
            Ok(2.0 * (n as f64 * p).sqrt() * beta)
        }
        ClassicalBound::Hoeffding { n, m } => {
            check_n(n)?;
            check_non_negative("M", m)?;
            Ok(4.0 * (n as f64 * p).sqrt() * m)
        }
        ClassicalBound::MarcinkiewiczZygmund { norms } => {
            if norms.is_empty() {
                return Err(invalid("norms", "must not be empty"));
            }
            for &x in norms {
                check_non_negative("norms", x)?;
            }
            let n = norms.len() as f64;
            // Scale by the largest norm so that large p cannot overflow.
            let top = norms.iter().copied().fold(0.0, f64::max);
            if top == 0.0 {
                return Ok(0.0);
            }
            let mean = norms.iter().map(|x| (x / top).powf(p)).sum::<f64>() / n;
            Ok(3.0 * (2.0 * n * p).sqrt() * top * mean.powf(1.0 / p))
        }
    }
}

/// `(1 + 2 sqrt 2) n beta + sqrt(n) M`, a bound on `||sum g_i||_2`.
pub fn second_moment_bound(n: usize, beta: f64, m: f64) -> Result<f64> {
    check_n(n)?;
    check_non_negative("beta", beta)?;
    check_non_negative("M", m)?;
    let nf = n as f64;
    Ok((1.0 + 2.0 * SQRT_2) * nf * beta + nf.sqrt() * m)
}

/// `n^2 gamma^2 + n L^2` (shape constant), a bound on the gap variance.
pub fn variance_bound(n: usize, gamma: f64, l: f64) -> Result<BoundValue> {
    check_n(n)?;
    check_non_negative("gamma", gamma)?;
    check_non_negative("L", l)?;
    let nf = n as f64;
    Ok(BoundValue::shape(
        BoundKind::Variance,
        nf * nf * gamma * gamma + nf * l * l,
    ))
}

/// Deviation bound for `|n (R - R_emp)|` assembled from explicit pieces: the
/// replace-one sandwich (`2 gamma n`), the moment bound with `M = L` and
/// `beta = 2 gamma`, converted to a tail, then capped at `n L`.
pub fn stability_tail_bound(n: usize, gamma: f64, l: f64, delta: f64) -> Result<f64> {
    check_n(n)?;
    check_non_negative("gamma", gamma)?;
    check_non_negative("L", l)?;
    let nf = n as f64;
    let a = 4.0 * l * nf.sqrt();
    let b = 12.0 * SQRT_2 * nf * 2.0 * gamma * f64::from(ceil_log2(n));
    let tail = tail_from_moments(a, b, delta)?;
    Ok((2.0 * gamma * nf + tail).min(nf * l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inputs() -> BoundInputs {
        BoundInputs::new(100, 0.01)
            .with_gamma(0.1)
            .with_loss_bound(1.0)
    }

    #[test]
    fn generalization_examples() {
        let bkz = generalization_bound(BoundKind::Bkz, &inputs()).unwrap();
        assert_relative_eq!(bkz.value, 233.535_584_682_029_45, max_relative = 1e-12);
        assert_eq!(bkz.constant_convention, ConstantConvention::Shape);
        let bq = generalization_bound(BoundKind::Bousquet02, &inputs()).unwrap();
        assert_relative_eq!(bq.value, 236.056_262_891_828_2, max_relative = 1e-12);
        let fv18 = generalization_bound(BoundKind::Fv2018, &inputs()).unwrap();
        assert_relative_eq!(fv18.value, 89.321_064_507_044_6, max_relative = 1e-12);
        let fv19 = generalization_bound(BoundKind::Fv2019, &inputs()).unwrap();
        assert_relative_eq!(fv19.value, 445.611_509_101_165_4, max_relative = 1e-12);
    }

    #[test]
    fn zero_magnitudes_give_zero() {
        let zero = BoundInputs::new(50, 0.1);
        for kind in BoundKind::GENERALIZATION {
            assert_eq!(generalization_bound(kind, &zero).unwrap().value, 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        for delta in [0.0, 1.0, -0.5, f64::NAN] {
            let bad = BoundInputs::new(10, delta);
            assert!(generalization_bound(BoundKind::Bkz, &bad).is_err());
        }
        let neg = inputs().with_gamma(-1.0);
        assert!(generalization_bound(BoundKind::Fv2019, &neg).is_err());
        assert!(generalization_bound(BoundKind::Theorem1Moment, &inputs()).is_err());
        assert!(generalization_bound(BoundKind::Bkz, &BoundInputs::new(0, 0.5)).is_err());
    }

    #[test]
    fn ceil_log2_floors_at_one() {
        assert_eq!(ceil_log2(1), 1);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
    }

    #[test]
    fn theorem1_examples() {
        let v = theorem1_moment_bound(2.0, 4, 1.0, 0.0).unwrap();
        assert_relative_eq!(v.value, 271.529_003_975_634_3, max_relative = 1e-12);
        assert_eq!(v.constant_convention, ConstantConvention::Explicit);
        let v = theorem1_moment_bound(2.0, 1, 0.0, 1.0).unwrap();
        assert_relative_eq!(v.value, 4.0 * SQRT_2, max_relative = 1e-15);
        // The Hoeffding constant is recovered exactly.
        assert_eq!(v.value / (2.0f64).sqrt(), 4.0);
        let v = theorem1_moment_bound(2.0, 2, 1.0, 0.0).unwrap();
        assert_relative_eq!(v.value, 67.882_250_993_908_57, max_relative = 1e-12);
        assert!(theorem1_moment_bound(1.9, 2, 1.0, 0.0).is_err());
    }

    #[test]
    fn capped_examples() {
        let c = capped_moment_bound(4.0, 4, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(c.capped.value, 4.0);
        assert!(c.cap_active);

        let c = capped_moment_bound(4.0, 4, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(c.capped.value, (4.0f64 * 4.0 * 4.0f64.sqrt()).min(4.0));

        let c = capped_moment_bound(2.0, 16, 0.25, 0.0, 1.0).unwrap();
        assert_relative_eq!(
            c.relaxed.value,
            24.495_414_609_739_974,
            max_relative = 1e-12
        );
        assert_eq!(c.relaxed.constant_convention, ConstantConvention::Shape);

        assert!(capped_moment_bound(2.0, 4, 0.1, 2.0, 1.0).is_err());
    }

    #[test]
    fn tail_moment_conversions() {
        assert_eq!(moments_from_tail(1.0, 0.0, 4.0).unwrap(), 6.0);
        assert_eq!(moments_from_tail(0.0, 1.0, 1.0).unwrap(), 9.0);
        assert_eq!(moments_from_tail(0.0, 0.0, 3.0).unwrap(), 0.0);
        assert!(moments_from_tail(1.0, 0.0, 0.5).is_err());

        let d = (-1.0f64).exp();
        assert_relative_eq!(
            tail_from_moments(1.0, 0.0, d).unwrap(),
            E * SQRT_2,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            tail_from_moments(0.0, 1.0, d).unwrap(),
            2.0 * E,
            max_relative = 1e-14
        );
        assert_eq!(tail_from_moments(0.0, 0.0, 0.3).unwrap(), 0.0);
        assert!(tail_from_moments(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn classical_examples() {
        let mcd =
            classical_moment_bound(ClassicalBound::McDiarmid { n: 4, beta: 0.5 }, 4.0).unwrap();
        assert_eq!(mcd, 4.0);
        let hoeff =
            classical_moment_bound(ClassicalBound::Hoeffding { n: 9, m: 1.0 }, 4.0).unwrap();
        assert_eq!(hoeff, 24.0);
        let mz = classical_moment_bound(
            ClassicalBound::MarcinkiewiczZygmund { norms: &[1.0, 1.0] },
            2.0,
        )
        .unwrap();
        assert_relative_eq!(mz, 8.485_281_374_238_571, max_relative = 1e-14);
        assert!(
            classical_moment_bound(ClassicalBound::MarcinkiewiczZygmund { norms: &[] }, 2.0)
                .is_err()
        );
        assert!(classical_moment_bound(ClassicalBound::Hoeffding { n: 9, m: 1.0 }, 1.5).is_err());
    }

    #[test]
    fn second_moment_and_variance() {
        assert_relative_eq!(
            second_moment_bound(4, 1.0, 1.0).unwrap(),
            17.313_708_498_984_76,
            max_relative = 1e-14
        );
        assert_eq!(second_moment_bound(4, 0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            variance_bound(100, 0.1, 1.0).unwrap().value,
            200.0,
            max_relative = 1e-14
        );
        assert_eq!(variance_bound(7, 0.0, 2.0).unwrap().value, 28.0);
        assert_eq!(variance_bound(7, 0.0, 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn stability_tail_is_capped() {
        // gamma = 0: pure sub-Gaussian term, far above the trivial cap at small n.
        assert_eq!(stability_tail_bound(10, 0.0, 1.0, 0.01).unwrap(), 10.0);
        let t = stability_tail_bound(10_000, 0.0, 1.0, 0.1).unwrap();
        let expected = E * 4.0 * 100.0 * (E / 0.1f64).ln().sqrt();
        assert_relative_eq!(t, expected, max_relative = 1e-14);
    }
}
