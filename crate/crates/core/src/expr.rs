//! Vector and scalar expressions over Gram basis points and function values.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use decpep_sdp::Matrix;
use serde::{Deserialize, Serialize};

use crate::coef::Coef;

/// A basis vector of the Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Point(pub(crate) usize);

impl Point {
    pub fn id(self) -> usize {
        self.0
    }
}

/// A scalar function value variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FValue(pub(crate) usize);

impl FValue {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Linear combination of basis points. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorExpr<T> {
    coeffs: BTreeMap<Point, T>,
}

impl<T: Coef> Default for VectorExpr<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Coef> From<Point> for VectorExpr<T> {
    fn from(p: Point) -> Self {
        Self::term(p, T::one())
    }
}

impl<T: Coef> VectorExpr<T> {
    pub fn zero() -> Self {
        Self {
            coeffs: BTreeMap::new(),
        }
    }

    pub fn term(p: Point, c: T) -> Self {
        let mut e = Self::zero();
        e.add_term(p, c);
        e
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Point, T)>) -> Self {
        let mut e = Self::zero();
        for (p, c) in terms {
            e.add_term(p, c);
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, p: Point) -> T {
        self.coeffs.get(&p).cloned().unwrap_or_else(T::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (Point, &T)> + '_ {
        self.coeffs.iter().map(|(&p, c)| (p, c))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_term(&mut self, p: Point, c: T) {
        if c.is_zero() {
            return;
        }
        let slot = self.coeffs.entry(p).or_insert_with(T::zero);
        *slot = slot.clone() + c;
        if slot.is_zero() {
            self.coeffs.remove(&p);
        }
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: &T, other: &Self) {
        for (&p, a) in &other.coeffs {
            self.add_term(p, c.clone() * a.clone());
        }
    }

    pub fn scaled(&self, c: &T) -> Self {
        let mut e = Self::zero();
        e.add_scaled(c, self);
        e
    }

    /// Drops coefficients that are negligible relative to the largest one.
    pub fn pruned(self) -> Self {
        let scale = self.max_abs_coeff();
        self.pruned_against(&scale)
    }

    /// Drops coefficients that are negligible next to `scale`.
    pub fn pruned_against(mut self, scale: &T) -> Self {
        self.coeffs.retain(|_, c| !c.negligible(scale));
        self
    }

    /// Largest absolute coefficient, zero for the zero expression.
    pub fn max_abs_coeff(&self) -> T {
        self.coeffs
            .values()
            .map(|c| c.abs())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Replaces every point by an expression.
    pub fn substitute(&self, map: impl Fn(Point) -> Option<VectorExpr<T>>) -> Self {
        let mut out = Self::zero();
        for (&p, c) in &self.coeffs {
            match map(p) {
                Some(e) => out.add_scaled(c, &e),
                None => out.add_term(p, c.clone()),
            }
        }
        out
    }

    pub fn max_point(&self) -> Option<Point> {
        self.coeffs.keys().next_back().copied()
    }

    /// Concrete vector given the coordinates of each point.
    pub fn eval(&self, coords: impl Fn(Point) -> Vec<f64>, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        for (&p, c) in &self.coeffs {
            let x = coords(p);
            let c = c.to_f64_lossy();
            for (vi, xi) in v.iter_mut().zip(&x) {
                *vi += c * xi;
            }
        }
        v
    }

    /// Sum with the given coefficients.
    pub fn combination<'a>(parts: impl IntoIterator<Item = (T, &'a VectorExpr<T>)>) -> Self {
        let mut e = Self::zero();
        for (c, v) in parts {
            e.add_scaled(&c, v);
        }
        e
    }
}

impl<T: Coef> AddAssign<&VectorExpr<T>> for VectorExpr<T> {
    fn add_assign(&mut self, rhs: &VectorExpr<T>) {
        self.add_scaled(&T::one(), rhs);
    }
}

impl<T: Coef> SubAssign<&VectorExpr<T>> for VectorExpr<T> {
    fn sub_assign(&mut self, rhs: &VectorExpr<T>) {
        self.add_scaled(&-T::one(), rhs);
    }
}

impl<T: Coef> Add<&VectorExpr<T>> for &VectorExpr<T> {
    type Output = VectorExpr<T>;
    fn add(self, rhs: &VectorExpr<T>) -> VectorExpr<T> {
        let mut e = self.clone();
        e += rhs;
        e
    }
}

impl<T: Coef> Sub<&VectorExpr<T>> for &VectorExpr<T> {
    type Output = VectorExpr<T>;
    fn sub(self, rhs: &VectorExpr<T>) -> VectorExpr<T> {
        let mut e = self.clone();
        e -= rhs;
        e
    }
}

impl<T: Coef> Add for VectorExpr<T> {
    type Output = VectorExpr<T>;
    fn add(mut self, rhs: VectorExpr<T>) -> VectorExpr<T> {
        self += &rhs;
        self
    }
}

impl<T: Coef> Sub for VectorExpr<T> {
    type Output = VectorExpr<T>;
    fn sub(mut self, rhs: VectorExpr<T>) -> VectorExpr<T> {
        self -= &rhs;
        self
    }
}

impl<T: Coef> Neg for &VectorExpr<T> {
    type Output = VectorExpr<T>;
    fn neg(self) -> VectorExpr<T> {
        self.scaled(&-T::one())
    }
}

impl<T: Coef> Neg for VectorExpr<T> {
    type Output = VectorExpr<T>;
    fn neg(self) -> VectorExpr<T> {
        -&self
    }
}

impl<T: Coef> Mul<T> for &VectorExpr<T> {
    type Output = VectorExpr<T>;
    fn mul(self, c: T) -> VectorExpr<T> {
        self.scaled(&c)
    }
}

impl<T: Coef> Mul<T> for VectorExpr<T> {
    type Output = VectorExpr<T>;
    fn mul(self, c: T) -> VectorExpr<T> {
        self.scaled(&c)
    }
}

/// Affine functional in Gram entries and function values.
///
/// A Gram coefficient `c` on the pair `(p, q)` with `p ≤ q` contributes
/// `c · G_pq` once.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr<T> {
    gram: BTreeMap<(Point, Point), T>,
    f: BTreeMap<FValue, T>,
    constant: T,
}

impl<T: Coef> Default for ScalarExpr<T> {
    fn default() -> Self {
        Self::zero()
    }
}

fn pair(p: Point, q: Point) -> (Point, Point) {
    if p <= q {
        (p, q)
    } else {
        (q, p)
    }
}

impl<T: Coef> ScalarExpr<T> {
    pub fn zero() -> Self {
        Self {
            gram: BTreeMap::new(),
            f: BTreeMap::new(),
            constant: T::zero(),
        }
    }

    pub fn constant(c: T) -> Self {
        Self {
            constant: c,
            ..Self::zero()
        }
    }

    pub fn fvalue(fv: FValue) -> Self {
        let mut e = Self::zero();
        e.add_f(fv, T::one());
        e
    }

    pub fn gram_term(p: Point, q: Point, c: T) -> Self {
        let mut e = Self::zero();
        e.add_gram(p, q, c);
        e
    }

    pub fn add_gram(&mut self, p: Point, q: Point, c: T) {
        if c.is_zero() {
            return;
        }
        let key = pair(p, q);
        let slot = self.gram.entry(key).or_insert_with(T::zero);
        *slot = slot.clone() + c;
        if slot.is_zero() {
            self.gram.remove(&key);
        }
    }

    pub fn add_f(&mut self, fv: FValue, c: T) {
        if c.is_zero() {
            return;
        }
        let slot = self.f.entry(fv).or_insert_with(T::zero);
        *slot = slot.clone() + c;
        if slot.is_zero() {
            self.f.remove(&fv);
        }
    }

    pub fn add_constant(&mut self, c: T) {
        self.constant = self.constant.clone() + c;
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, c: &T, other: &Self) {
        for (&(p, q), a) in &other.gram {
            self.add_gram(p, q, c.clone() * a.clone());
        }
        for (&fv, a) in &other.f {
            self.add_f(fv, c.clone() * a.clone());
        }
        self.add_constant(c.clone() * other.constant.clone());
    }

    pub fn scaled(&self, c: &T) -> Self {
        let mut e = Self::zero();
        e.add_scaled(c, self);
        e
    }

    pub fn gram_terms(&self) -> impl Iterator<Item = (Point, Point, &T)> + '_ {
        self.gram.iter().map(|(&(p, q), c)| (p, q, c))
    }

    pub fn f_terms(&self) -> impl Iterator<Item = (FValue, &T)> + '_ {
        self.f.iter().map(|(&fv, c)| (fv, c))
    }

    pub fn gram_coeff(&self, p: Point, q: Point) -> T {
        self.gram.get(&pair(p, q)).cloned().unwrap_or_else(T::zero)
    }

    pub fn f_coeff(&self, fv: FValue) -> T {
        self.f.get(&fv).cloned().unwrap_or_else(T::zero)
    }

    pub fn constant_term(&self) -> &T {
        &self.constant
    }

    /// True when the functional (including its constant) is identically zero.
    pub fn is_zero(&self) -> bool {
        self.is_constant() && self.constant.is_zero()
    }

    /// True when the functional has no variable part.
    pub fn is_constant(&self) -> bool {
        self.gram.is_empty() && self.f.is_empty()
    }

    pub fn without_constant(&self) -> Self {
        Self {
            gram: self.gram.clone(),
            f: self.f.clone(),
            constant: T::zero(),
        }
    }

    /// Evaluates with caller-supplied Gram entries and function values.
    pub fn eval_with(&self, gram: impl Fn(Point, Point) -> T, f: impl Fn(FValue) -> T) -> T {
        let mut v = self.constant.clone();
        for (&(p, q), c) in &self.gram {
            v = v + c.clone() * gram(p, q);
        }
        for (&fv, c) in &self.f {
            v = v + c.clone() * f(fv);
        }
        v
    }

    /// Evaluates on a concrete Gram matrix (indexed by point id) and f-vector.
    pub fn eval(&self, gram: &Matrix<f64>, f: &[f64]) -> f64 {
        let mut v = self.constant.to_f64_lossy();
        for (&(p, q), c) in &self.gram {
            v += c.to_f64_lossy() * gram[(p.0, q.0)];
        }
        for (&fv, c) in &self.f {
            v += c.to_f64_lossy() * f[fv.0];
        }
        v
    }

    pub fn max_point(&self) -> Option<Point> {
        self.gram.keys().map(|&(_, q)| q).max()
    }

    pub fn max_fvalue(&self) -> Option<FValue> {
        self.f.keys().next_back().copied()
    }

    /// Rewrites every Gram entry `⟨p, q⟩` as `⟨σ(p), σ(q)⟩`, points without an
    /// image being kept as they are.
    pub fn substitute(&self, map: impl Fn(Point) -> Option<VectorExpr<T>>) -> Self {
        let mut out = Self {
            gram: BTreeMap::new(),
            f: self.f.clone(),
            constant: self.constant.clone(),
        };
        for (&(p, q), c) in &self.gram {
            let sp = map(p);
            let sq = map(q);
            if sp.is_none() && sq.is_none() {
                out.add_gram(p, q, c.clone());
                continue;
            }
            let ep = sp.unwrap_or_else(|| VectorExpr::from(p));
            let eq = sq.unwrap_or_else(|| VectorExpr::from(q));
            out.add_scaled(c, &inner(&ep, &eq));
        }
        out
    }
}

/// Bilinear expansion of `⟨u, v⟩`.
pub fn inner<T: Coef>(u: &VectorExpr<T>, v: &VectorExpr<T>) -> ScalarExpr<T> {
    let mut e = ScalarExpr::zero();
    for (&p, a) in &u.coeffs {
        for (&q, b) in &v.coeffs {
            e.add_gram(p, q, a.clone() * b.clone());
        }
    }
    e
}

/// `‖u‖²`.
pub fn norm_sq<T: Coef>(u: &VectorExpr<T>) -> ScalarExpr<T> {
    inner(u, u)
}

impl<T: Coef> AddAssign<&ScalarExpr<T>> for ScalarExpr<T> {
    fn add_assign(&mut self, rhs: &ScalarExpr<T>) {
        self.add_scaled(&T::one(), rhs);
    }
}

impl<T: Coef> SubAssign<&ScalarExpr<T>> for ScalarExpr<T> {
    fn sub_assign(&mut self, rhs: &ScalarExpr<T>) {
        self.add_scaled(&-T::one(), rhs);
    }
}

impl<T: Coef> Add<&ScalarExpr<T>> for &ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn add(self, rhs: &ScalarExpr<T>) -> ScalarExpr<T> {
        let mut e = self.clone();
        e += rhs;
        e
    }
}

impl<T: Coef> Sub<&ScalarExpr<T>> for &ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn sub(self, rhs: &ScalarExpr<T>) -> ScalarExpr<T> {
        let mut e = self.clone();
        e -= rhs;
        e
    }
}

impl<T: Coef> Add for ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn add(mut self, rhs: ScalarExpr<T>) -> ScalarExpr<T> {
        self += &rhs;
        self
    }
}

impl<T: Coef> Sub for ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn sub(mut self, rhs: ScalarExpr<T>) -> ScalarExpr<T> {
        self -= &rhs;
        self
    }
}

impl<T: Coef> Neg for ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn neg(self) -> ScalarExpr<T> {
        self.scaled(&-T::one())
    }
}

impl<T: Coef> Mul<T> for ScalarExpr<T> {
    type Output = ScalarExpr<T>;
    fn mul(self, c: T) -> ScalarExpr<T> {
        self.scaled(&c)
    }
}
