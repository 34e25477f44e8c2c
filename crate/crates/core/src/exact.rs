//! Exact coefficient arithmetic for class-level computations.
//!
//! Intersection numbers of the built-in models are rational, while class
//! formulas carry powers of `2π` and of a small parameter `ε`. [`Exact`]
//! represents an element of `Q[π, ε]` as a sparse map from `(ε-degree,
//! π-degree)` to a rational coefficient, so expansions can be compared with
//! zero tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Ratio;
use num_traits::{One, Zero};

pub type Rational = Ratio<i128>;

/// Coefficient ring used by [`crate::classes::ClassPoly`].
pub trait Coefficient: Clone + fmt::Debug + PartialEq + Zero + One + Neg<Output = Self> {
    fn from_rational(r: Rational) -> Self;
}

impl Coefficient for f64 {
    fn from_rational(r: Rational) -> Self {
        rational_to_f64(&r)
    }
}

impl Coefficient for Rational {
    fn from_rational(r: Rational) -> Self {
        r
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Best rational approximation of a float; exact for integers and dyadics
/// of moderate size.
pub fn rational_from_f64(x: f64) -> Option<Rational> {
    Ratio::<i128>::approximate_float(x)
}

/// Element of `Q[π, ε]`.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Exact {
    terms: BTreeMap<(u32, u32), Rational>,
}

impl Exact {
    pub fn rational(r: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !Zero::is_zero(&r) {
            terms.insert((0, 0), r);
        }
        Self { terms }
    }

    pub fn integer(k: i128) -> Self {
        Self::rational(Rational::from_integer(k))
    }

    /// `c · ε^eps · π^pi`.
    pub fn monomial(c: Rational, eps: u32, pi: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !Zero::is_zero(&c) {
            terms.insert((eps, pi), c);
        }
        Self { terms }
    }

    pub fn pi() -> Self {
        Self::monomial(Rational::one(), 0, 1)
    }

    pub fn eps() -> Self {
        Self::monomial(Rational::one(), 1, 0)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::integer(1);
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }

    /// Coefficient of `ε^k`, an element of `Q[π]`.
    pub fn eps_coefficient(&self, k: u32) -> Exact {
        let terms = self
            .terms
            .iter()
            .filter(|((e, _), _)| *e == k)
            .map(|((_, p), c)| ((0, *p), *c))
            .collect();
        Exact { terms }
    }

    /// Lowest power of `ε` with a nonzero coefficient.
    pub fn eps_valuation(&self) -> Option<u32> {
        self.terms.keys().map(|(e, _)| *e).min()
    }

    pub fn eps_degree(&self) -> Option<u32> {
        self.terms.keys().map(|(e, _)| *e).max()
    }

    pub fn to_f64_at(&self, eps: f64) -> f64 {
        self.terms
            .iter()
            .map(|((e, p), c)| {
                rational_to_f64(c) * eps.powi(*e as i32) * std::f64::consts::PI.powi(*p as i32)
            })
            .sum()
    }

    /// Value at `ε = 0`.
    pub fn to_f64(&self) -> f64 {
        self.to_f64_at(0.0)
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((e, p), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            if *p > 0 {
                write!(f, "·π^{p}")?;
            }
            if *e > 0 {
                write!(f, "·ε^{e}")?;
            }
        }
        Ok(())
    }
}

impl Add for Exact {
    type Output = Exact;
    fn add(mut self, rhs: Exact) -> Exact {
        for (k, c) in rhs.terms {
            let entry = self.terms.entry(k).or_insert_with(Rational::zero);
            *entry += c;
            if Zero::is_zero(entry) {
                self.terms.remove(&k);
            }
        }
        self
    }
}

impl Neg for Exact {
    type Output = Exact;
    fn neg(mut self) -> Exact {
        for c in self.terms.values_mut() {
            *c = -*c;
        }
        self
    }
}

impl Sub for Exact {
    type Output = Exact;
    fn sub(self, rhs: Exact) -> Exact {
        self + (-rhs)
    }
}

impl Mul for Exact {
    type Output = Exact;
    fn mul(self, rhs: Exact) -> Exact {
        let mut out = Exact::default();
        for ((e1, p1), c1) in &self.terms {
            for ((e2, p2), c2) in &rhs.terms {
                out = out + Exact::monomial(c1 * c2, e1 + e2, p1 + p2);
            }
        }
        out
    }
}

impl Zero for Exact {
    fn zero() -> Self {
        Exact::default()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for Exact {
    fn one() -> Self {
        Exact::integer(1)
    }
}

impl Coefficient for Exact {
    fn from_rational(r: Rational) -> Self {
        Exact::rational(r)
    }
}

/// Binomial coefficient as a rational.
pub fn binomial(n: u32, k: u32) -> Rational {
    if k > n {
        return Rational::zero();
    }
    let mut acc = Rational::one();
    for i in 0..k {
        acc =
            acc * Rational::from_integer((n - i) as i128) / Rational::from_integer((i + 1) as i128);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_identities() {
        let a = Exact::integer(2) * Exact::pi() + Exact::eps();
        let b = Exact::integer(3) - Exact::eps() * Exact::pi();
        let lhs = (a.clone() + b.clone()) * (a.clone() + b.clone());
        let rhs = a.clone() * a.clone()
            + Exact::integer(2) * a.clone() * b.clone()
            + b.clone() * b.clone();
        assert_eq!(lhs, rhs);
        assert!((a.clone() - a).is_zero());
    }

    #[test]
    fn eps_coefficients_and_evaluation() {
        // (2π + 6ε)^2 = 4π² + 24πε + 36ε²
        let x = (Exact::integer(2) * Exact::pi() + Exact::integer(6) * Exact::eps()).pow(2);
        assert_eq!(x.eps_valuation(), Some(0));
        assert_eq!(x.eps_degree(), Some(2));
        assert_eq!(x.eps_coefficient(1), Exact::integer(24) * Exact::pi());
        let pi = std::f64::consts::PI;
        let v = x.to_f64_at(0.1);
        assert!((v - (2.0 * pi + 0.6).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), Rational::from_integer(10));
        assert_eq!(binomial(2, 3), Rational::zero());
        assert_eq!(binomial(0, 0), Rational::one());
    }
}
