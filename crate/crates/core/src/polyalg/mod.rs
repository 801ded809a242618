//! Exact multivariate polynomials over the rationals, and polynomial vector
//! fields acting on them as derivations.
//!
//! Everything in this module is exact: coefficients are arbitrary-precision
//! rationals and no operation rounds. Floating point only appears in
//! [`Poly::eval`], which is a convenience for numerical callers.

mod contact;
mod rational;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub use contact::{kth_contact, taylor_coeffs, ContactReport, ContactWitness, TaylorCoeffs};
pub use rational::{factorial, rational_from_f64, rational_to_f64, Rational};

/// Exponent vector of a monomial.
///
/// Ordered graded-lexicographically: total degree first, then the first
/// differing entry (larger exponent on an earlier variable is larger).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// `e_i`, zero-based.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = vec![0; dim];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|r|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `r!` = product of entry factorials.
    pub fn factorial(&self) -> BigInt {
        self.0
            .iter()
            .fold(BigInt::one(), |acc, &e| acc * factorial(e))
    }

    /// Componentwise `self <= other`.
    pub fn divides(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Every `r` with `r <= self` componentwise and `|r| <= max_order`.
    pub fn sub_indices(&self, max_order: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; self.0.len()];
        fn rec(
            bound: &[u32],
            pos: usize,
            budget: u32,
            cur: &mut Vec<u32>,
            out: &mut Vec<MultiIndex>,
        ) {
            if pos == bound.len() {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            for e in 0..=bound[pos].min(budget) {
                cur[pos] = e;
                rec(bound, pos + 1, budget - e, cur, out);
            }
            cur[pos] = 0;
        }
        rec(&self.0, 0, max_order, &mut cur, &mut out);
        out
    }

    /// All multi-indices of length `dim` with order at most `max_order`.
    pub fn all_up_to(dim: usize, max_order: u32) -> Vec<MultiIndex> {
        let mut all = MultiIndex(vec![max_order; dim]).sub_indices(max_order);
        all.sort();
        all
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Polynomial in `dim` variables with rational coefficients.
///
/// Canonical: zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    dim: usize,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Rational) -> Self {
        Poly::monomial(c, MultiIndex::zero(dim))
    }

    pub fn one(dim: usize) -> Self {
        Poly::constant(dim, Rational::one())
    }

    /// The coordinate function `x^{i+1}` (zero-based `i`).
    pub fn var(dim: usize, i: usize) -> Self {
        assert!(i < dim, "variable index {i} out of range for dim {dim}");
        Poly::monomial(Rational::one(), MultiIndex::unit(dim, i))
    }

    pub fn monomial(coeff: Rational, index: MultiIndex) -> Self {
        let dim = index.len();
        let mut terms = BTreeMap::new();
        if !coeff.is_zero() {
            terms.insert(index, coeff);
        }
        Poly { dim, terms }
    }

    /// Builds a polynomial from `(coefficient, exponents)` pairs, summing repeats.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Rational, MultiIndex)>) -> Result<Self> {
        let mut p = Poly::zero(dim);
        for (c, r) in terms {
            if r.len() != dim {
                return Err(Error::dim("Poly::from_terms", dim, r.len()));
            }
            p.add_term(r, c);
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, r: &MultiIndex) -> Rational {
        self.terms.get(r).cloned().unwrap_or_else(Rational::zero)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(MultiIndex::order)
    }

    /// Lowest total degree of any stored term; `None` for zero.
    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().next().map(MultiIndex::order)
    }

    /// Constant term when the polynomial has no other terms.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.degree() {
            None => Some(Rational::zero()),
            Some(0) => Some(self.coeff(&MultiIndex::zero(self.dim))),
            _ => None,
        }
    }

    pub(crate) fn add_term(&mut self, r: MultiIndex, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(r) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.dim);
        }
        Poly {
            dim: self.dim,
            terms: self.terms.iter().map(|(r, a)| (r.clone(), a * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(self.dim);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    fn check_point<T>(&self, x: &[T], context: &str) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dim(context, self.dim, x.len()));
        }
        Ok(())
    }

    /// Floating-point evaluation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x, "Poly::eval")?;
        Ok(self
            .terms
            .iter()
            .map(|(r, c)| {
                let mono: f64 = r
                    .entries()
                    .iter()
                    .zip(x)
                    .map(|(&e, &xi)| xi.powi(e as i32))
                    .product();
                rational_to_f64(c) * mono
            })
            .sum())
    }

    /// Exact evaluation at a rational point.
    pub fn eval_exact(&self, x: &[Rational]) -> Result<Rational> {
        self.check_point(x, "Poly::eval_exact")?;
        let mut acc = Rational::zero();
        for (r, c) in &self.terms {
            let mut mono = c.clone();
            for (&e, xi) in r.entries().iter().zip(x) {
                if e > 0 {
                    mono *= num_traits::pow(xi.clone(), e as usize);
                }
            }
            acc += mono;
        }
        Ok(acc)
    }

    /// `D^r p`, exact.
    pub fn dpow(&self, r: &MultiIndex) -> Result<Poly> {
        if r.len() != self.dim {
            return Err(Error::dim("Poly::dpow", self.dim, r.len()));
        }
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            if !r.divides(e) {
                continue;
            }
            let mut coeff = c.clone();
            let mut reduced = Vec::with_capacity(self.dim);
            for (&ej, &rj) in e.entries().iter().zip(r.entries()) {
                // falling factorial ej (ej-1) ... (ej-rj+1)
                let mut ff = BigInt::one();
                for k in 0..rj {
                    ff *= BigInt::from(ej - k);
                }
                coeff *= Rational::from_integer(ff);
                reduced.push(ej - rj);
            }
            out.add_term(MultiIndex(reduced), coeff);
        }
        Ok(out)
    }

    /// `∂p/∂x^{j+1}` (zero-based `j`).
    pub fn partial(&self, j: usize) -> Poly {
        assert!(j < self.dim);
        self.dpow(&MultiIndex::unit(self.dim, j))
            .expect("unit index has matching dimension")
    }

    /// Substitutes `x -> x + shift`.
    pub fn translate(&self, shift: &[Rational]) -> Result<Poly> {
        self.check_point(shift, "Poly::translate")?;
        let linear: Vec<Poly> = (0..self.dim)
            .map(|i| &Poly::var(self.dim, i) + &Poly::constant(self.dim, shift[i].clone()))
            .collect();
        let mut out = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            let mut term = Poly::constant(self.dim, c.clone());
            for (i, &ei) in e.entries().iter().enumerate() {
                if ei > 0 {
                    term = &term * &linear[i].pow(ei);
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    fn assert_same_dim(&self, other: &Poly) {
        assert_eq!(
            self.dim, other.dim,
            "polynomial dimension mismatch ({} vs {})",
            self.dim, other.dim
        );
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.assert_same_dim(rhs);
        let mut out = self.clone();
        for (r, c) in &rhs.terms {
            out.add_term(r.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.assert_same_dim(rhs);
        let mut out = self.clone();
        for (r, c) in &rhs.terms {
            out.add_term(r.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        self.assert_same_dim(rhs);
        let mut out = Poly::zero(self.dim);
        for (r1, c1) in &self.terms {
            for (r2, c2) in &rhs.terms {
                out.add_term(r1.add(r2), c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&-Rational::one())
    }
}

impl fmt::Display for Poly {
    /// Canonical text: descending graded-lex, `a/b` coefficients, `x1..xn`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.render(f, "x")
    }
}

/// [`Poly`] rendered with a different variable prefix (e.g. `s1..sp`).
pub struct PolyDisplay<'a> {
    poly: &'a Poly,
    var: &'a str,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.poly.render(f, self.var)
    }
}

impl Poly {
    pub fn display_with<'a>(&'a self, var: &'a str) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, var }
    }

    fn render(&self, f: &mut fmt::Formatter<'_>, var: &str) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (r, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            let mag = c.abs();
            if idx == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else if negative {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let vars: Vec<String> = r
                .entries()
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    if e == 1 {
                        format!("{var}{}", i + 1)
                    } else {
                        format!("{var}{}^{}", i + 1, e)
                    }
                })
                .collect();
            if vars.is_empty() {
                write!(f, "{mag}")?;
            } else {
                if !mag.is_one() {
                    write!(f, "{mag}*")?;
                }
                write!(f, "{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Polynomial vector field on `R^dim`; component `i` is `V^{i+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolyVectorField {
    dim: usize,
    components: Vec<Poly>,
}

impl PolyVectorField {
    pub fn new(components: Vec<Poly>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::input("vector field needs at least one component"));
        }
        for (i, c) in components.iter().enumerate() {
            if c.dim() != dim {
                return Err(Error::dim(format!("component {} of vector field", i + 1), dim, c.dim()));
            }
        }
        Ok(PolyVectorField { dim, components })
    }

    /// Builds a field without the square-shape check (used by validators that
    /// report problems rather than reject them).
    pub(crate) fn new_unchecked(dim: usize, components: Vec<Poly>) -> Self {
        PolyVectorField { dim, components }
    }

    pub fn zero(dim: usize) -> Self {
        PolyVectorField {
            dim,
            components: vec![Poly::zero(dim); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Poly {
        &self.components[i]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly::is_zero)
    }

    pub fn degree(&self) -> Option<u32> {
        self.components.iter().filter_map(Poly::degree).max()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        PolyVectorField {
            dim: self.dim,
            components: self.components.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn add(&self, other: &PolyVectorField) -> Result<Self> {
        self.check_dim(other.dim, "PolyVectorField::add")?;
        Ok(PolyVectorField {
            dim: self.dim,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &PolyVectorField) -> Result<Self> {
        self.check_dim(other.dim, "PolyVectorField::sub")?;
        Ok(PolyVectorField {
            dim: self.dim,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    fn check_dim(&self, other: usize, context: &str) -> Result<()> {
        if self.dim != other {
            return Err(Error::dim(context, self.dim, other));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|p| p.eval(x)).collect()
    }

    /// `L_V f = Σ_j V^j ∂f/∂x^j`.
    pub fn lie_derivative(&self, f: &Poly) -> Result<Poly> {
        self.check_dim(f.dim(), "lie_derivative")?;
        let mut out = Poly::zero(self.dim);
        for (j, vj) in self.components.iter().enumerate() {
            if vj.is_zero() {
                continue;
            }
            let df = f.partial(j);
            if df.is_zero() {
                continue;
            }
            out = &out + &(vj * &df);
        }
        Ok(out)
    }

    /// `[V, W]^i = L_V W^i - L_W V^i`.
    pub fn lie_bracket(&self, other: &PolyVectorField) -> Result<PolyVectorField> {
        self.check_dim(other.dim, "lie_bracket")?;
        let components = (0..self.dim)
            .map(|i| {
                let a = self.lie_derivative(&other.components[i])?;
                let b = other.lie_derivative(&self.components[i])?;
                Ok(&a - &b)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyVectorField {
            dim: self.dim,
            components,
        })
    }

    /// Substitutes `x -> x + shift` in every component.
    pub fn translate(&self, shift: &[Rational]) -> Result<PolyVectorField> {
        Ok(PolyVectorField {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|p| p.translate(shift))
                .collect::<Result<_>>()?,
        })
    }
}

impl fmt::Display for PolyVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Converts a coordinate to f64; used when handing exact data to numerics.
pub fn to_f64_vec(x: &[Rational]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn x(dim: usize, i: usize) -> Poly {
        Poly::var(dim, i)
    }

    fn brockett() -> (PolyVectorField, PolyVectorField) {
        let x1 = x(3, 0);
        let x2 = x(3, 1);
        let one = Poly::one(3);
        let zero = Poly::zero(3);
        let f1 = PolyVectorField::new(vec![one.clone(), zero.clone(), -&x2]).unwrap();
        let f2 = PolyVectorField::new(vec![zero, one, x1]).unwrap();
        (f1, f2)
    }

    #[test]
    fn eval_examples() {
        let p = &(&x(2, 0) * &x(2, 0)) * &x(2, 1);
        assert_eq!(p.eval(&[2.0, 3.0]).unwrap(), 12.0);
        assert_eq!(Poly::zero(2).eval(&[5.0, -1.0]).unwrap(), 0.0);
        let s = &x(2, 0) + &x(2, 1);
        assert_eq!(s.eval(&[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(
            p.eval_exact(&[q(1, 2), q(3, 1)]).unwrap(),
            q(3, 4)
        );
        assert!(matches!(p.eval(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn dpow_examples() {
        let p = &(&x(2, 0) * &x(2, 0)) * &x(2, 1);
        assert_eq!(p.dpow(&MultiIndex::zero(2)).unwrap(), p);
        assert_eq!(
            p.dpow(&MultiIndex::new(vec![2, 0])).unwrap(),
            x(2, 1).scale(&q(2, 1))
        );
        assert!(p.dpow(&MultiIndex::new(vec![0, 3])).unwrap().is_zero());
        assert!(p.dpow(&MultiIndex::new(vec![0, 0, 1])).is_err());
    }

    #[test]
    fn lie_derivative_examples() {
        let (f1, f2) = brockett();
        assert_eq!(f2.lie_derivative(&x(3, 2)).unwrap(), x(3, 0));
        assert_eq!(f1.lie_derivative(&x(3, 2)).unwrap(), -&x(3, 1));
        assert!(f1.lie_derivative(&Poly::constant(3, q(7, 3))).unwrap().is_zero());
        assert!(f1.lie_derivative(&Poly::one(2)).is_err());
    }

    #[test]
    fn brockett_bracket_is_constant_vertical() {
        let (f1, f2) = brockett();
        let b = f1.lie_bracket(&f2).unwrap();
        assert!(b.component(0).is_zero());
        assert!(b.component(1).is_zero());
        assert_eq!(b.component(2), &Poly::constant(3, q(2, 1)));
        assert!(f1.lie_bracket(&f1).unwrap().is_zero());
    }

    #[test]
    fn ordering_is_graded_lex() {
        let a = MultiIndex::new(vec![0, 0, 1]);
        let b = MultiIndex::new(vec![2, 1, 0]);
        let c = MultiIndex::new(vec![1, 2, 0]);
        assert!(a < b);
        assert!(c < b);
    }

    #[test]
    fn canonical_rendering() {
        let p = &(&(&x(3, 0) * &x(3, 0)) * &x(3, 1)).scale(&q(3, 2)) - &x(3, 2);
        assert_eq!(p.to_string(), "3/2*x1^2*x2 - x3");
        assert_eq!(Poly::zero(2).to_string(), "0");
        let c = &Poly::constant(2, q(-1, 3)) - &x(2, 1);
        assert_eq!(c.to_string(), "-x2 - 1/3");
    }

    #[test]
    fn translate_matches_shifted_evaluation() {
        let p = &(&x(2, 0) * &x(2, 0)) * &x(2, 1);
        let shift = [q(1, 2), q(-2, 1)];
        let t = p.translate(&shift).unwrap();
        let pt = [q(3, 1), q(5, 7)];
        let moved = [&pt[0] + &shift[0], &pt[1] + &shift[1]];
        assert_eq!(t.eval_exact(&pt).unwrap(), p.eval_exact(&moved).unwrap());
    }

    #[test]
    fn sub_indices_respect_budget() {
        let r = MultiIndex::new(vec![2, 1]);
        let subs = r.sub_indices(2);
        assert_eq!(subs.len(), 5);
        assert_eq!(MultiIndex::all_up_to(2, 2).len(), 6);
    }
}
