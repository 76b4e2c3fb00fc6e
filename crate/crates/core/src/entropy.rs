//! Binary and two-symbol joint distributions and their entropies (in bits).
//!
//! Only the two- and four-outcome cases that the bounds need are covered.
//! The convention `0 * log2(0) = 0` is applied everywhere; no smoothing is
//! done here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability of emitting the symbol "1".
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BernoulliParam<T>(pub(crate) T);

impl<T: Scalar> BernoulliParam<T> {
    pub fn new(p: T) -> Result<Self> {
        check_probability(p)?;
        Ok(Self(p))
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn entropy(self) -> T {
        h2(self.0)
    }
}

/// Joint law of the pair `(x1, x2)`, stored in the order
/// `(0,0), (0,1), (1,0), (1,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSymbolDist<T> {
    phi: [T; 4],
}

impl<T: Scalar> JointSymbolDist<T> {
    pub fn new(phi: [T; 4]) -> Result<Self> {
        let mut sum = T::zero();
        for &v in &phi {
            check_probability(v)?;
            sum = sum + v;
        }
        if (sum - T::one()).abs() > T::normalization_tol() {
            return Err(Error::NotNormalized {
                sum: sum.to_f64_lossy(),
            });
        }
        Ok(Self { phi })
    }

    /// All mass on a single outcome.
    pub fn point(x1: u8, x2: u8) -> Self {
        let mut phi = [T::zero(); 4];
        phi[index(x1, x2)] = T::one();
        Self { phi }
    }

    pub fn get(&self, x1: u8, x2: u8) -> T {
        self.phi[index(x1, x2)]
    }

    pub fn probs(&self) -> [T; 4] {
        self.phi
    }

    /// Probability that node 1 sends "1" and node 2 sends "0".
    pub fn one_zero(&self) -> T {
        self.phi[2]
    }

    /// Probability that node 1 sends "0" and node 2 sends "1".
    pub fn zero_one(&self) -> T {
        self.phi[1]
    }
}

fn index(x1: u8, x2: u8) -> usize {
    assert!(x1 <= 1 && x2 <= 1, "binary symbols only");
    (2 * x1 + x2) as usize
}

fn check_probability<T: Scalar>(p: T) -> Result<()> {
    if p.is_nan() || p < T::zero() || p > T::one() {
        return Err(Error::ProbabilityOutOfRange {
            value: p.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `-p log2 p` with the `0 log 0 = 0` convention.
pub(crate) fn neg_plogp<T: Scalar>(p: T) -> T {
    if p <= T::zero() {
        T::zero()
    } else {
        -p * p.log2()
    }
}

/// Binary entropy without range checking. Callers guarantee `p` in `[0, 1]`.
pub(crate) fn h2<T: Scalar>(p: T) -> T {
    neg_plogp(p) + neg_plogp(T::one() - p)
}

/// Entropy of a Bernoulli(`p`) variable in bits.
pub fn binary_entropy<T: Scalar>(p: T) -> Result<T> {
    check_probability(p)?;
    Ok(h2(p))
}

/// Shannon entropy of the four-outcome joint distribution, in bits.
pub fn joint_entropy<T: Scalar>(d: &JointSymbolDist<T>) -> T {
    d.phi.iter().fold(T::zero(), |acc, &v| acc + neg_plogp(v))
}

/// A conditional Bernoulli law. Conditioning on a zero-probability symbol
/// leaves it undefined; every use weights it by that zero probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conditional<T> {
    /// Probability of "1" given the conditioning symbol.
    Defined(T),
    Undefined,
}

impl<T: Scalar> Conditional<T> {
    pub fn is_defined(&self) -> bool {
        matches!(self, Conditional::Defined(_))
    }

    pub fn prob_one(&self) -> Option<T> {
        match *self {
            Conditional::Defined(p) => Some(p),
            Conditional::Undefined => None,
        }
    }

    fn entropy(&self) -> T {
        match *self {
            Conditional::Defined(p) => h2(p),
            Conditional::Undefined => T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalsAndConditionals<T> {
    /// `[P(x1 = 0), P(x1 = 1)]`.
    pub x1: [T; 2],
    /// `[P(x2 = 0), P(x2 = 1)]`.
    pub x2: [T; 2],
    /// Law of `x1` given `x2 = 0` and `x2 = 1`.
    pub x1_given_x2: [Conditional<T>; 2],
    /// Law of `x2` given `x1 = 0` and `x1 = 1`.
    pub x2_given_x1: [Conditional<T>; 2],
}

impl<T: Scalar> MarginalsAndConditionals<T> {
    /// `H(X1 | X2) = sum_x2 P(x2) H(X1 | x2)`, skipping undefined conditionals.
    pub fn entropy_x1_given_x2(&self) -> T {
        weighted_conditional_entropy(&self.x2, &self.x1_given_x2)
    }

    /// `H(X2 | X1)`.
    pub fn entropy_x2_given_x1(&self) -> T {
        weighted_conditional_entropy(&self.x1, &self.x2_given_x1)
    }
}

fn weighted_conditional_entropy<T: Scalar>(weights: &[T; 2], conds: &[Conditional<T>; 2]) -> T {
    weights
        .iter()
        .zip(conds)
        .filter(|(_, c)| c.is_defined())
        .fold(T::zero(), |acc, (&w, c)| acc + w * c.entropy())
}

fn conditional<T: Scalar>(joint_one: T, marginal: T) -> Conditional<T> {
    if marginal <= T::zero() {
        Conditional::Undefined
    } else {
        Conditional::Defined((joint_one / marginal).min(T::one()).max(T::zero()))
    }
}

pub fn marginals_and_conditionals<T: Scalar>(
    d: &JointSymbolDist<T>,
) -> MarginalsAndConditionals<T> {
    let [p00, p01, p10, p11] = d.phi;
    let x1 = [p00 + p01, p10 + p11];
    let x2 = [p00 + p10, p01 + p11];
    MarginalsAndConditionals {
        x1,
        x2,
        x1_given_x2: [conditional(p10, x2[0]), conditional(p11, x2[1])],
        x2_given_x1: [conditional(p01, x1[0]), conditional(p11, x1[1])],
    }
}

/// Product law of two independently drawn symbols.
pub fn joint_from_marginals<T: Scalar>(
    p1: BernoulliParam<T>,
    p2: BernoulliParam<T>,
) -> JointSymbolDist<T> {
    let (a, b) = (p1.0, p2.0);
    let (na, nb) = (T::one() - a, T::one() - b);
    JointSymbolDist {
        phi: [na * nb, na * b, a * nb, a * b],
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn bern(p: f64) -> BernoulliParam<f64> {
        BernoulliParam::new(p).unwrap()
    }

    fn dist(phi: [f64; 4]) -> JointSymbolDist<f64> {
        JointSymbolDist::new(phi).unwrap()
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        // 30-digit evaluation of the two-term formula.
        assert_abs_diff_eq!(
            binary_entropy(0.11).unwrap(),
            0.499_915_958_164_528,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(binary_entropy(0.11).unwrap(), 0.49993, epsilon = 1e-4);
    }

    #[test]
    fn binary_entropy_rejects_out_of_range() {
        assert!(matches!(
            binary_entropy(-0.1),
            Err(Error::ProbabilityOutOfRange { .. })
        ));
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn binary_entropy_in_f32() {
        assert!((binary_entropy(0.5f32).unwrap() - 1.0).abs() < 1e-6);
        assert!((binary_entropy(0.11f32).unwrap() - 0.499_916).abs() < 1e-5);
    }

    #[test]
    fn joint_entropy_values() {
        assert_abs_diff_eq!(joint_entropy(&dist([0.25; 4])), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            joint_entropy(&dist([0.5, 0.0, 0.5, 0.0])),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            joint_entropy(&dist([0.5, 0.25, 0.125, 0.125])),
            1.75,
            epsilon = 1e-15
        );
    }

    #[test]
    fn joint_rejects_bad_input() {
        assert!(matches!(
            JointSymbolDist::new([0.5, 0.5, 0.5, 0.0]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(JointSymbolDist::new([1.2, -0.2, 0.0, 0.0]).is_err());
        assert!(JointSymbolDist::new([0.25, 0.25, 0.25, 0.25 + 1e-9]).is_err());
    }

    #[test]
    fn conditionals_of_product_equal_marginals() {
        let mc = marginals_and_conditionals(&joint_from_marginals(bern(0.5), bern(0.5)));
        assert_eq!(mc.x1, [0.5, 0.5]);
        assert_eq!(mc.x2, [0.5, 0.5]);
        for c in mc.x1_given_x2.iter().chain(mc.x2_given_x1.iter()) {
            assert_eq!(c.prob_one(), Some(0.5));
        }
    }

    #[test]
    fn correlated_conditionals() {
        let mc = marginals_and_conditionals(&dist([0.5, 0.0, 0.0, 0.5]));
        assert_eq!(mc.x1[1], 0.5);
        assert_eq!(mc.x1_given_x2[1], Conditional::Defined(1.0));
        assert_eq!(mc.x1_given_x2[0], Conditional::Defined(0.0));
        assert_eq!(mc.entropy_x1_given_x2(), 0.0);
    }

    #[test]
    fn degenerate_conditionals_are_undefined() {
        let mc = marginals_and_conditionals(&JointSymbolDist::<f64>::point(0, 0));
        assert_eq!(mc.x1_given_x2[1], Conditional::Undefined);
        assert_eq!(mc.x2_given_x1[1], Conditional::Undefined);
        assert_eq!(mc.x1_given_x2[0], Conditional::Defined(0.0));
        assert_eq!(mc.entropy_x1_given_x2(), 0.0);
        assert_eq!(mc.entropy_x2_given_x1(), 0.0);
    }

    #[test]
    fn product_distribution_values() {
        assert_eq!(
            joint_from_marginals(bern(0.5), bern(0.5)).probs(),
            [0.25; 4]
        );
        assert_eq!(
            joint_from_marginals(bern(1.0), bern(0.0)).probs(),
            [0.0, 0.0, 1.0, 0.0]
        );
        let d = joint_from_marginals(bern(0.6), bern(0.3)).probs();
        for (got, want) in d.iter().zip([0.28, 0.12, 0.42, 0.18]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    proptest! {
        #[test]
        fn binary_entropy_is_symmetric(p in 0.0f64..=1.0) {
            let a = binary_entropy(p).unwrap();
            let b = binary_entropy(1.0 - p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn independence_is_additive(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let d = joint_from_marginals(bern(p1), bern(p2));
            let sum = binary_entropy(p1).unwrap() + binary_entropy(p2).unwrap();
            prop_assert!((joint_entropy(&d) - sum).abs() < 1e-12);
            let mc = marginals_and_conditionals(&d);
            prop_assert!((mc.x1[1] - p1).abs() < 1e-12);
            prop_assert!((mc.x2[1] - p2).abs() < 1e-12);
        }

        #[test]
        fn chain_rule_holds(w in proptest::array::uniform4(0.0f64..1.0)) {
            let s: f64 = w.iter().sum();
            prop_assume!(s > 1e-6);
            let d = dist(w.map(|v| v / s));
            let mc = marginals_and_conditionals(&d);
            let h1 = binary_entropy(mc.x1[1].min(1.0)).unwrap();
            prop_assert!((joint_entropy(&d) - (h1 + mc.entropy_x2_given_x1())).abs() < 1e-9);
        }
    }
}
