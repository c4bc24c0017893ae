//! Sparse multivariate polynomials, truncated moment functionals and the
//! norms used to compare them.
//!
//! Monomials are ordered graded-lexicographically everywhere in the crate:
//! first by total degree, then lexicographically with `x1 > x2 > ... > xn`.
//! Dense vectors indexed by monomials (pseudo-moments, matrix bases) all use
//! this order, see [`grlex_rank`].

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Exponent vector of the variable `x_i` (zero-based).
    pub fn unit(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        MultiIndex(e)
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Total degree `|α|`.
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `α! = α₁!⋯αₙ!`, exact in integers before conversion.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| factorial_u128(e as usize))
            .product::<u128>() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.n(), other.n());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x^α` evaluated at `point`.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

pub(crate) fn factorial_u128(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// Exact binomial coefficient `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i as u128 + 1);
    }
    acc
}

/// Multinomial `binom(d, α) = d! / ((d-|α|)! α₁! ⋯ αₙ!)`.
pub fn multinomial(d: usize, alpha: &MultiIndex) -> Result<f64> {
    if alpha.degree() > d {
        return domain(format!("|α| = {} exceeds d = {d}", alpha.degree()));
    }
    let mut rest = d;
    let mut acc: u128 = 1;
    for &e in alpha.exponents() {
        acc *= binomial(rest, e as usize);
        rest -= e as usize;
    }
    Ok(acc as f64)
}

/// Number of monomials of degree at most `k` in `n` variables, `C(n+k, n)`.
pub fn num_monomials(n: usize, k: usize) -> usize {
    binomial(n + k, n) as usize
}

/// Number of monomials of degree exactly `k` in `n` variables.
fn num_monomials_exact(n: usize, k: usize) -> usize {
    if n == 0 {
        return usize::from(k == 0);
    }
    binomial(k + n - 1, n - 1) as usize
}

/// Position of `alpha` in the graded-lex enumeration of [`monomials_upto`].
pub fn grlex_rank(alpha: &MultiIndex) -> usize {
    let n = alpha.n();
    let deg = alpha.degree();
    let mut idx = if deg == 0 { 0 } else { num_monomials(n, deg - 1) };
    let mut remaining = deg;
    let e = alpha.exponents();
    for i in 0..n.saturating_sub(1) {
        // Monomials with a larger exponent in position i come first.
        for larger in (e[i] as usize + 1)..=remaining {
            idx += num_monomials_exact(n - i - 1, remaining - larger);
        }
        remaining -= e[i] as usize;
    }
    idx
}

/// All multi-indices with `|α| ≤ k`, graded-lex ordered.
pub fn monomials_upto(n: usize, k: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(num_monomials(n, k));
    for deg in 0..=k {
        let mut cur = vec![0u32; n];
        push_degree(&mut out, &mut cur, 0, deg);
    }
    out
}

fn push_degree(out: &mut Vec<MultiIndex>, cur: &mut [u32], pos: usize, remaining: usize) {
    let n = cur.len();
    if n == 0 {
        if remaining == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return;
    }
    if pos == n - 1 {
        cur[pos] = remaining as u32;
        out.push(MultiIndex(cur.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e as u32;
        push_degree(out, cur, pos + 1, remaining - e);
    }
    cur[pos] = 0;
}

/// Sparse polynomial in `n` variables with real coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolynomialJson", try_from = "PolynomialJson")]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Polynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::monomial(MultiIndex::zero(n), c)
    }

    pub fn monomial(alpha: MultiIndex, c: f64) -> Self {
        let n = alpha.n();
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(alpha, c);
        }
        Polynomial { n, terms }
    }

    /// The variable `x_i` (zero-based).
    pub fn var(n: usize, i: usize) -> Self {
        Self::monomial(MultiIndex::unit(n, i), 1.0)
    }

    /// Sums repeated monomials and drops zero coefficients.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (MultiIndex, f64)>) -> Result<Self> {
        let mut p = Polynomial::zero(n);
        for (alpha, c) in terms {
            if alpha.n() != n {
                return domain(format!(
                    "monomial has {} exponents, polynomial has {n} variables",
                    alpha.n()
                ));
            }
            if !c.is_finite() {
                return domain("non-finite coefficient");
            }
            p.add_term(alpha, c);
        }
        Ok(p)
    }

    /// Coefficients given densely over `monomials_upto(n, k)`.
    pub fn from_dense(n: usize, coeffs: &[f64]) -> Self {
        let mut p = Polynomial::zero(n);
        let mut k = 0;
        while num_monomials(n, k) < coeffs.len() {
            k += 1;
        }
        for (alpha, &c) in monomials_upto(n, k).into_iter().zip(coeffs) {
            p.add_term(alpha, c);
        }
        p
    }

    /// Dense coefficient vector over `monomials_upto(n, k)`; terms above `k` are an error.
    pub fn to_dense(&self, k: usize) -> Result<Vec<f64>> {
        if self.degree() > k {
            return domain(format!("degree {} exceeds {k}", self.degree()));
        }
        let mut out = vec![0.0; num_monomials(self.n, k)];
        for (alpha, c) in &self.terms {
            out[grlex_rank(alpha)] = *c;
        }
        Ok(out)
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        debug_assert_eq!(alpha.n(), self.n);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(alpha) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coef(&self, alpha: &MultiIndex) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum `|α|` over stored terms; zero for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// `Some(d)` if every term has total degree `d`.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut degs = self.terms.keys().map(MultiIndex::degree);
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|(a, c)| c * a.eval(point)).sum()
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.n);
        }
        Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(a, c)| (a.clone(), c * s)).collect(),
        }
    }

    /// Multiply by `x^β`.
    pub fn shift(&self, beta: &MultiIndex) -> Polynomial {
        Polynomial {
            n: self.n,
            terms: self.terms.iter().map(|(a, c)| (a.add(beta), *c)).collect(),
        }
    }

    /// Coefficient-wise ℓ¹ norm `Σ |p_α|` (no factorial weights).
    pub fn coef_l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn coef_l2_norm(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn pow(&self, k: usize) -> Polynomial {
        let mut acc = Polynomial::constant(self.n, 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (alpha, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, &e) in alpha.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{e}", i + 1)?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.n, rhs.n, "variable count mismatch");
        let mut out = self.clone();
        for (a, c) in &rhs.terms {
            out.add_term(a.clone(), *c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.n, rhs.n, "variable count mismatch");
        let mut out = self.clone();
        for (a, c) in &rhs.terms {
            out.add_term(a.clone(), -*c);
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.n, rhs.n, "variable count mismatch");
        let mut out = Polynomial::zero(self.n);
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                out.add_term(a.add(b), ca * cb);
            }
        }
        out
    }
}

/// Wire form: `{ "n": int, "terms": [ { "alpha": [ints], "coef": float } ] }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub n: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub alpha: Vec<u32>,
    pub coef: f64,
}

impl From<Polynomial> for PolynomialJson {
    fn from(p: Polynomial) -> Self {
        PolynomialJson {
            n: p.n,
            terms: p
                .terms
                .into_iter()
                .map(|(a, coef)| TermJson { alpha: a.0, coef })
                .collect(),
        }
    }
}

impl TryFrom<PolynomialJson> for Polynomial {
    type Error = Error;
    fn try_from(j: PolynomialJson) -> Result<Self> {
        Polynomial::from_terms(
            j.n,
            j.terms.into_iter().map(|t| (MultiIndex(t.alpha), t.coef)),
        )
    }
}

/// Truncated linear functional `λ` on polynomials of degree `≤ order`,
/// stored densely in graded-lex order.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoMoments {
    n: usize,
    order: usize,
    values: Vec<f64>,
}

impl PseudoMoments {
    pub fn new(n: usize, order: usize, values: Vec<f64>) -> Result<Self> {
        let expected = num_monomials(n, order);
        if values.len() != expected {
            return domain(format!(
                "expected {expected} moments for n = {n}, order = {order}, got {}",
                values.len()
            ));
        }
        Ok(PseudoMoments { n, order, values })
    }

    pub fn zeros(n: usize, order: usize) -> Self {
        PseudoMoments {
            n,
            order,
            values: vec![0.0; num_monomials(n, order)],
        }
    }

    pub fn from_fn(n: usize, order: usize, mut f: impl FnMut(&MultiIndex) -> f64) -> Self {
        let values = monomials_upto(n, order).iter().map(&mut f).collect();
        PseudoMoments { n, order, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `⟨λ, 1⟩`.
    pub fn mass(&self) -> f64 {
        self.values[0]
    }

    /// `λ(x^α)`, or `None` when `|α|` exceeds the order.
    pub fn get(&self, alpha: &MultiIndex) -> Option<f64> {
        (alpha.n() == self.n && alpha.degree() <= self.order)
            .then(|| self.values[grlex_rank(alpha)])
    }

    /// `λ(x^α)`; panics when `|α|` exceeds the order.
    pub fn at(&self, alpha: &MultiIndex) -> f64 {
        assert!(alpha.degree() <= self.order, "moment degree out of range");
        self.values[grlex_rank(alpha)]
    }

    /// `⟨λ, p⟩`.
    pub fn pair(&self, p: &Polynomial) -> Result<f64> {
        if p.n() != self.n {
            return domain("variable count mismatch in pairing");
        }
        if p.degree() > self.order {
            return domain(format!(
                "polynomial degree {} exceeds moment order {}",
                p.degree(),
                self.order
            ));
        }
        Ok(p.terms().map(|(a, c)| c * self.values[grlex_rank(a)]).sum())
    }

    /// Restriction to `|α| ≤ k`.
    pub fn truncate(&self, k: usize) -> PseudoMoments {
        let k = k.min(self.order);
        PseudoMoments {
            n: self.n,
            order: k,
            values: self.values[..num_monomials(self.n, k)].to_vec(),
        }
    }

    /// Moments of the Dirac measure `weight · δ_point`.
    pub fn dirac(point: &[f64], weight: f64, order: usize) -> Self {
        Self::from_fn(point.len(), order, |a| weight * a.eval(point))
    }
}

/// Apolar product `⟨f, g⟩_d = Σ_{|α|≤d} binom(d,α)⁻¹ f_α g_α`.
pub fn apolar_product(f: &Polynomial, g: &Polynomial, d: usize) -> Result<f64> {
    if f.n() != g.n() {
        return domain("variable count mismatch in apolar product");
    }
    if f.degree() > d || g.degree() > d {
        return domain(format!(
            "apolar product in degree {d} of polynomials with degrees {} and {}",
            f.degree(),
            g.degree()
        ));
    }
    let mut acc = 0.0;
    for (alpha, fa) in f.terms() {
        let ga = g.coef(alpha);
        if ga != 0.0 {
            acc += fa * ga / multinomial(d, alpha)?;
        }
    }
    Ok(acc)
}

pub fn apolar_norm(f: &Polynomial, d: usize) -> Result<f64> {
    Ok(apolar_product(f, f, d)?.max(0.0).sqrt())
}

/// `(1 + ⟨ξ, x⟩)^d` expanded in the monomial basis.
pub fn power_of_affine(xi: &[f64], d: usize) -> Polynomial {
    let n = xi.len();
    let mut terms = BTreeMap::new();
    for alpha in monomials_upto(n, d) {
        // multinomial(d, α) ξ^α; the unwrap is safe since |α| ≤ d.
        let c = multinomial(d, &alpha).unwrap() * alpha.eval(xi);
        if c != 0.0 {
            terms.insert(alpha, c);
        }
    }
    Polynomial { n, terms }
}

/// `‖f‖_A = Σ α! |f_α|`.
pub fn a_norm(f: &Polynomial) -> f64 {
    f.terms().map(|(a, c)| a.factorial() * c.abs()).sum()
}

/// `max_{|α| ≤ ℓ} |λ(x^α)| / α!`, the truncated weighted sup norm.
pub fn weighted_functional_norm(lambda: &PseudoMoments) -> f64 {
    monomials_upto(lambda.n(), lambda.order())
        .iter()
        .zip(lambda.values())
        .map(|(a, v)| v.abs() / a.factorial())
        .fold(0.0, f64::max)
}

/// Sets `x₀ = 1` in a homogeneous polynomial of `n+1` variables, then
/// substitutes `x_i ← x_i / scale`. A decomposition point `ξ` of the input
/// becomes `ξ / scale`; see [`rescale_point`] for the inverse.
pub fn dehomogenize_rescale(f_hom: &Polynomial, scale: f64) -> Result<Polynomial> {
    if !(scale > 0.0 && scale.is_finite()) {
        return domain(format!("scale must be positive, got {scale}"));
    }
    if f_hom.n() == 0 {
        return domain("homogeneous polynomial needs at least one variable");
    }
    if !f_hom.is_zero() && f_hom.homogeneous_degree().is_none() {
        return domain("input polynomial is not homogeneous");
    }
    let n = f_hom.n() - 1;
    let mut out = Polynomial::zero(n);
    for (alpha, c) in f_hom.terms() {
        let rest = MultiIndex(alpha.exponents()[1..].to_vec());
        let factor = scale.powi(-(rest.degree() as i32));
        out.add_term(rest, c * factor);
    }
    Ok(out)
}

/// Inverse of the coordinate change in [`dehomogenize_rescale`].
pub fn rescale_point(point: &[f64], scale: f64) -> Vec<f64> {
    point.iter().map(|x| x * scale).collect()
}

/// Homogenizes a polynomial of degree `≤ d` with a leading variable `x₀`.
pub fn homogenize(f: &Polynomial, d: usize) -> Result<Polynomial> {
    if f.degree() > d {
        return domain(format!("degree {} exceeds {d}", f.degree()));
    }
    let mut out = Polynomial::zero(f.n() + 1);
    for (alpha, c) in f.terms() {
        let mut e = Vec::with_capacity(f.n() + 1);
        e.push((d - alpha.degree()) as u32);
        e.extend_from_slice(alpha.exponents());
        out.add_term(MultiIndex(e), c);
    }
    Ok(out)
}
