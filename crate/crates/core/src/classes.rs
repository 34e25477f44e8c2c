//! Model manifolds and their cohomology arithmetic.
//!
//! Every model is a product of primitive factors, each contributing one
//! generator to the `(1,1)` basis. A factor of complex dimension `d` with
//! generator `x` satisfies `x^(d+1) = 0` and `∫ x^d = deg`, so the cohomology
//! ring spanned by the generators is a truncated polynomial ring and top
//! intersections are read off a single monomial.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{KahlerError, Result};
use crate::exact::{binomial, rational_from_f64, Coefficient, Exact, Rational};

/// Primitive factor of a model manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Factor {
    /// Projective space `CP^n` with hyperplane class `H`, `H^n = 1`.
    Projective { n: usize },
    /// Elliptic curve `C / (Lx Z + i Ly Z)` with point class `e`.
    Elliptic { periods: [f64; 2] },
    /// Class data of a smooth curve of the given genus, point class `p`.
    Curve { genus: u32 },
    /// Class data of a K3 surface polarized by `h` with `h^2 = 2`.
    K3,
}

impl Factor {
    pub fn dimension(&self) -> usize {
        match self {
            Factor::Projective { n } => *n,
            Factor::Elliptic { .. } | Factor::Curve { .. } => 1,
            Factor::K3 => 2,
        }
    }

    /// `∫ x^d` for the factor generator `x`.
    fn top_degree(&self) -> i128 {
        match self {
            Factor::K3 => 2,
            _ => 1,
        }
    }

    /// Coefficient of `x` in `c_1` of the factor.
    fn c1(&self) -> i128 {
        match self {
            Factor::Projective { n } => *n as i128 + 1,
            Factor::Elliptic { .. } | Factor::K3 => 0,
            Factor::Curve { genus } => 2 - 2 * *genus as i128,
        }
    }

    /// Coefficient of `x^2` in `c_2` of the factor.
    fn c2(&self) -> i128 {
        match self {
            Factor::Projective { n } if *n >= 2 => {
                let m = *n as i128 + 1;
                m * (m - 1) / 2
            }
            Factor::K3 => 12,
            _ => 0,
        }
    }

    fn name(&self) -> String {
        match self {
            Factor::Projective { n } => format!("H(CP{n})"),
            Factor::Elliptic { .. } => "e(elliptic)".to_string(),
            Factor::Curve { genus } => format!("p(genus {genus})"),
            Factor::K3 => "h(K3)".to_string(),
        }
    }

    /// True when the factor carries a computable built-in metric.
    pub fn has_metric(&self) -> bool {
        matches!(self, Factor::Projective { .. } | Factor::Elliptic { .. })
    }
}

/// Declarative model manifold: an ordered product of primitive factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldSpec {
    factors: Vec<Factor>,
}

/// Cohomology class in the generator basis of a [`ManifoldSpec`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KahlerClassVector {
    pub coeffs: Vec<f64>,
}

impl KahlerClassVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(len: usize) -> Self {
        Self {
            coeffs: vec![0.0; len],
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.coeffs.iter().map(|a| c * a).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
    }
}

impl ManifoldSpec {
    pub fn from_factors(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(KahlerError::invalid("a model needs at least one factor"));
        }
        for f in &factors {
            match f {
                Factor::Projective { n } if *n == 0 => {
                    return Err(KahlerError::invalid(
                        "projective dimension must be at least 1",
                    ))
                }
                Factor::Elliptic { periods } if periods.iter().any(|p| !(*p > 0.0)) => {
                    return Err(KahlerError::invalid("torus periods must be positive"))
                }
                _ => {}
            }
        }
        Ok(Self { factors })
    }

    pub fn projective(n: usize) -> Self {
        Self {
            factors: vec![Factor::Projective { n }],
        }
    }

    /// Torus of complex dimension `n` as a product of rectangular elliptic
    /// curves with the given periods per complex direction.
    pub fn torus(periods: &[[f64; 2]]) -> Self {
        Self {
            factors: periods
                .iter()
                .map(|p| Factor::Elliptic { periods: *p })
                .collect(),
        }
    }

    pub fn torus_square(n: usize, side: f64) -> Self {
        Self::torus(&vec![[side, side]; n])
    }

    pub fn curve(genus: u32) -> Self {
        Self {
            factors: vec![Factor::Curve { genus }],
        }
    }

    pub fn k3() -> Self {
        Self {
            factors: vec![Factor::K3],
        }
    }

    pub fn product(parts: &[ManifoldSpec]) -> Self {
        Self {
            factors: parts
                .iter()
                .flat_map(|p| p.factors.iter().cloned())
                .collect(),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dimension(&self) -> usize {
        self.factors.iter().map(Factor::dimension).sum()
    }

    pub fn basis_len(&self) -> usize {
        self.factors.len()
    }

    pub fn basis_names(&self) -> Vec<String> {
        self.factors.iter().map(Factor::name).collect()
    }

    pub fn is_torus(&self) -> bool {
        self.factors
            .iter()
            .all(|f| matches!(f, Factor::Elliptic { .. }))
    }

    pub fn has_metric(&self) -> bool {
        self.factors.iter().all(Factor::has_metric)
    }

    pub fn has_rational_curve(&self) -> bool {
        self.factors
            .iter()
            .any(|f| matches!(f, Factor::Projective { .. } | Factor::Curve { genus: 0 }))
    }

    /// First Chern class of `X`.
    pub fn c1(&self) -> KahlerClassVector {
        KahlerClassVector::new(self.factors.iter().map(|f| f.c1() as f64).collect())
    }

    /// First Chern class of the canonical bundle, `-c_1(X)`.
    pub fn c1_canonical(&self) -> KahlerClassVector {
        self.c1().scale(-1.0)
    }

    fn check_len(&self, c: &KahlerClassVector) -> Result<()> {
        if c.coeffs.len() != self.basis_len() {
            return Err(KahlerError::DimensionMismatch {
                expected: self.basis_len(),
                found: c.coeffs.len(),
            });
        }
        Ok(())
    }

    pub fn is_kahler(&self, c: &KahlerClassVector) -> bool {
        c.coeffs.len() == self.basis_len() && c.coeffs.iter().all(|a| *a > 0.0)
    }

    pub fn is_nef(&self, c: &KahlerClassVector) -> bool {
        c.coeffs.len() == self.basis_len() && c.coeffs.iter().all(|a| *a >= 0.0)
    }

    /// Sum of all generators, a reference Kähler class.
    pub fn unit_class(&self) -> KahlerClassVector {
        KahlerClassVector::new(vec![1.0; self.basis_len()])
    }

    /// Ring element of a class with arbitrary coefficients.
    pub fn poly<T: Coefficient>(&self, coeffs: Vec<T>) -> ClassPoly<T> {
        ClassPoly::linear(self, coeffs)
    }

    pub fn poly_f64(&self, c: &KahlerClassVector) -> ClassPoly<f64> {
        ClassPoly::linear(self, c.coeffs.clone())
    }

    /// Exact ring element of a class whose coefficients are rational.
    pub fn poly_exact(&self, c: &KahlerClassVector) -> Result<ClassPoly<Exact>> {
        let coeffs = c
            .coeffs
            .iter()
            .map(|a| {
                rational_from_f64(*a).map(Exact::rational).ok_or_else(|| {
                    KahlerError::invalid(format!("coefficient {a} has no rational form"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ClassPoly::linear(self, coeffs))
    }

    /// Total Chern classes `(c_1, c_2)` as exact ring elements.
    pub fn chern_classes<T: Coefficient>(&self) -> (ClassPoly<T>, ClassPoly<T>) {
        let mut total = ClassPoly::constant(self, T::one());
        for (idx, f) in self.factors.iter().enumerate() {
            let mut part = ClassPoly::constant(self, T::one());
            let mut e = vec![0; self.basis_len()];
            e[idx] = 1;
            part.add_term(e.clone(), T::from_rational(Rational::from_integer(f.c1())));
            e[idx] = 2;
            part.add_term(e, T::from_rational(Rational::from_integer(f.c2())));
            total = total.mul(&part);
        }
        (total.homogeneous(1), total.homogeneous(2))
    }

    /// Top intersection number of `n` classes.
    pub fn pairing(&self, classes: &[&KahlerClassVector]) -> Result<f64> {
        if classes.len() != self.dimension() {
            return Err(KahlerError::DimensionMismatch {
                expected: self.dimension(),
                found: classes.len(),
            });
        }
        let mut acc = ClassPoly::constant(self, 1.0);
        for c in classes {
            self.check_len(c)?;
            acc = acc.mul(&self.poly_f64(c));
        }
        Ok(acc.integrate())
    }

    /// `α^n`, the volume `∫ω^n` of a Kähler form in class `α`.
    pub fn volume(&self, alpha: &KahlerClassVector) -> Result<f64> {
        let refs = vec![alpha; self.dimension()];
        self.pairing(&refs)
    }

    /// Intersection number of basis generators with the given indices.
    pub fn intersection(&self, indices: &[usize]) -> Result<f64> {
        let m = self.basis_len();
        let basis: Vec<KahlerClassVector> = (0..m)
            .map(|i| {
                let mut v = vec![0.0; m];
                v[i] = 1.0;
                KahlerClassVector::new(v)
            })
            .collect();
        if let Some(bad) = indices.iter().find(|i| **i >= m) {
            return Err(KahlerError::invalid(format!(
                "basis index {bad} out of range"
            )));
        }
        let refs: Vec<&KahlerClassVector> = indices.iter().map(|i| &basis[*i]).collect();
        self.pairing(&refs)
    }

    /// `sup{t > 0 : α + 2πt c_1(K_X) Kähler}`.
    pub fn nef_threshold(&self, alpha: &KahlerClassVector) -> Result<f64> {
        self.require_kahler(alpha)?;
        let c1 = self.c1();
        let lambda = alpha
            .coeffs
            .iter()
            .zip(&c1.coeffs)
            .filter(|(_, c)| **c > 0.0)
            .map(|(a, c)| a / (2.0 * PI * c))
            .fold(f64::INFINITY, f64::min);
        Ok(lambda)
    }

    /// `α + 2πt c_1(K_X)`.
    pub fn flow_class(&self, alpha: &KahlerClassVector, t: f64) -> KahlerClassVector {
        alpha.add(&self.c1_canonical().scale(2.0 * PI * t))
    }

    /// `-2π(1 - e^{-t}) c_1(X) + e^{-t} α`.
    pub fn normalized_flow_class(&self, alpha: &KahlerClassVector, t: f64) -> KahlerClassVector {
        let d = (-t).exp();
        alpha.scale(d).add(&self.c1().scale(-2.0 * PI * (1.0 - d)))
    }

    /// Largest `k` with `c_1(K_X)^k` pairing nontrivially against a Kähler class.
    pub fn numerical_kodaira_dimension(&self) -> Result<usize> {
        let (c1, _) = self.chern_classes::<Rational>();
        if !self.is_nef(&self.c1_canonical()) {
            return Err(KahlerError::CanonicalNotNef);
        }
        let k = c1.scale(&Rational::from_integer(-1));
        let a: ClassPoly<Rational> =
            ClassPoly::linear(self, vec![Rational::from_integer(1); self.basis_len()]);
        let n = self.dimension() as u32;
        let nu = (0..=n)
            .rev()
            .find(|j| {
                let v = k.pow(*j).mul(&a.pow(n - j)).integrate();
                !v.is_zero()
            })
            .unwrap_or(0);
        Ok(nu as usize)
    }

    pub fn require_kahler(&self, alpha: &KahlerClassVector) -> Result<()> {
        self.check_len(alpha)?;
        if !self.is_kahler(alpha) {
            return Err(KahlerError::NotKahler {
                coeffs: alpha.coeffs.clone(),
            });
        }
        Ok(())
    }

    /// Checks a class sequence against the limit behaviour `μ_i α_i → 0`.
    pub fn property_a_limit_check(
        &self,
        sequence: &[(KahlerClassVector, f64)],
        tol: f64,
    ) -> Result<PropertyAReport> {
        if sequence.is_empty() {
            return Err(KahlerError::invalid("empty class sequence"));
        }
        let n = self.dimension() as f64;
        let k = self.c1_canonical();
        let k_nef = self.is_nef(&k);
        let mut terms = Vec::with_capacity(sequence.len());
        for (alpha, mu) in sequence {
            self.require_kahler(alpha)?;
            if !(*mu >= 0.0) {
                return Err(KahlerError::invalid(format!(
                    "μ must be nonnegative, got {mu}"
                )));
            }
            let product = alpha.scale(*mu);
            let shifted = alpha.scale(n * mu / PI).add(&k);
            let cone_ok = if *mu > 0.0 {
                self.is_kahler(&shifted)
            } else {
                k_nef
            };
            terms.push(PropertyATerm {
                mu: *mu,
                product_norm: product.max_abs(),
                shifted,
                cone_ok,
            });
        }
        let last_norm = terms.last().map(|t| t.product_norm).unwrap_or(0.0);
        let converges = last_norm <= tol;
        let cone_ok = terms.iter().all(|t| t.cone_ok);
        Ok(PropertyAReport {
            converges,
            cone_ok,
            pass: converges && cone_ok,
            last_product_norm: last_norm,
            tolerance: tol,
            limit_class: k,
            terms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyATerm {
    pub mu: f64,
    /// `max_j |μ α_j|`.
    pub product_norm: f64,
    /// `(nμ/π) α + c_1(K_X)`.
    pub shifted: KahlerClassVector,
    pub cone_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyAReport {
    pub converges: bool,
    pub cone_ok: bool,
    pub pass: bool,
    pub last_product_norm: f64,
    pub tolerance: f64,
    pub limit_class: KahlerClassVector,
    pub terms: Vec<PropertyATerm>,
}

/// Element of the truncated cohomology ring of a model, generic over the
/// coefficient ring.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPoly<T> {
    dims: Vec<u32>,
    top: Vec<i128>,
    terms: BTreeMap<Vec<u32>, T>,
}

impl<T: Coefficient> ClassPoly<T> {
    pub fn constant(spec: &ManifoldSpec, c: T) -> Self {
        let mut p = Self {
            dims: spec.factors.iter().map(|f| f.dimension() as u32).collect(),
            top: spec.factors.iter().map(Factor::top_degree).collect(),
            terms: BTreeMap::new(),
        };
        p.add_term(vec![0; spec.basis_len()], c);
        p
    }

    pub fn linear(spec: &ManifoldSpec, coeffs: Vec<T>) -> Self {
        let mut p = Self::constant(spec, T::zero());
        for (i, c) in coeffs.into_iter().enumerate() {
            let mut e = vec![0; spec.basis_len()];
            e[i] = 1;
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, exps: Vec<u32>, c: T) {
        if c.is_zero() || exps.iter().zip(&self.dims).any(|(e, d)| e > d) {
            return;
        }
        let sum = match self.terms.remove(&exps) {
            Some(old) => old + c,
            None => c,
        };
        if !sum.is_zero() {
            self.terms.insert(exps, sum);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = Self {
            dims: self.dims.clone(),
            top: self.top.clone(),
            terms: BTreeMap::new(),
        };
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v.clone() * c.clone());
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self {
            dims: self.dims.clone(),
            top: self.top.clone(),
            terms: BTreeMap::new(),
        };
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1.clone() * c2.clone());
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self {
            dims: self.dims.clone(),
            top: self.top.clone(),
            terms: BTreeMap::new(),
        };
        acc.add_term(vec![0; self.dims.len()], T::one());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Part of cohomological degree `k`.
    pub fn homogeneous(&self, k: u32) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e.iter().sum::<u32>() == k)
            .map(|(e, c)| (e.clone(), c.clone()))
            .collect();
        Self {
            dims: self.dims.clone(),
            top: self.top.clone(),
            terms,
        }
    }

    /// Integral of the top-degree part.
    pub fn integrate(&self) -> T {
        let deg: i128 = self.top.iter().product();
        match self.terms.get(&self.dims) {
            Some(c) => c.clone() * T::from_rational(Rational::from_integer(deg)),
            None => T::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Sum over `k` of `C(m, k) a^k b^(m-k)`, a convenience for closed-form
/// expansion comparisons.
pub fn binomial_power<T: Coefficient>(a: &ClassPoly<T>, b: &ClassPoly<T>, m: u32) -> ClassPoly<T> {
    let mut acc = a.scale(&T::zero());
    for k in 0..=m {
        let term = a
            .pow(k)
            .mul(&b.pow(m - k))
            .scale(&T::from_rational(binomial(m, k)));
        acc = acc.add(&term);
    }
    acc
}
