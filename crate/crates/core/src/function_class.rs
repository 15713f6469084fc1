//! Interpolation conditions for local functions: convex, and convex with
//! subgradients bounded in norm.

use serde::{Deserialize, Serialize};

use crate::coef::Coef;
use crate::error::{Error, Result};
use crate::expr::{inner, FValue, Point, ScalarExpr, VectorExpr};
use crate::pep::PepProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionClass<T> {
    Convex,
    /// Convex with every subgradient of norm at most `bound`.
    ConvexBoundedSubgradient {
        bound: T,
    },
}

impl<T: Coef> FunctionClass<T> {
    pub fn bounded(bound: T) -> Result<Self> {
        if bound <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "subgradient bound must be positive, got {bound:?}"
            )));
        }
        Ok(Self::ConvexBoundedSubgradient { bound })
    }

    pub fn bound(&self) -> Option<&T> {
        match self {
            Self::Convex => None,
            Self::ConvexBoundedSubgradient { bound } => Some(bound),
        }
    }
}

/// One sampled point of a function: location, subgradient and value.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet<T> {
    pub x: VectorExpr<T>,
    pub g: Point,
    pub f: FValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFunction<T> {
    pub class: FunctionClass<T>,
    pub label: String,
    triplets: Vec<Triplet<T>>,
}

impl<T: Coef> LocalFunction<T> {
    pub fn new(class: FunctionClass<T>, label: impl Into<String>) -> Self {
        Self {
            class,
            label: label.into(),
            triplets: Vec::new(),
        }
    }

    pub fn triplets(&self) -> &[Triplet<T>] {
        &self.triplets
    }

    /// Subgradient and value at `x`. The first call for a given `x` registers a
    /// fresh subgradient point and function value; later calls return them.
    pub fn eval(&mut self, pep: &mut PepProblem<T>, x: &VectorExpr<T>) -> (Point, FValue) {
        let name = format!("#{}", self.triplets.len());
        self.eval_named(pep, x, &name)
    }

    /// As [`eval`](Self::eval), with `name` used in the labels of new variables.
    pub fn eval_named(
        &mut self,
        pep: &mut PepProblem<T>,
        x: &VectorExpr<T>,
        name: &str,
    ) -> (Point, FValue) {
        if let Some(t) = self.triplets.iter().find(|t| &t.x == x) {
            return (t.g, t.f);
        }
        let g = pep.new_point(format!("g_{}({name})", self.label));
        let f = pep.new_fvalue(format!("f_{}({name})", self.label));
        self.triplets.push(Triplet { x: x.clone(), g, f });
        (g, f)
    }

    /// `f^l − f^k + ⟨g^l, x^k − x^l⟩ ≤ 0` for every ordered pair `k ≠ l`, then
    /// `‖g^k‖² − B² ≤ 0` for every triplet when the class bounds subgradients.
    pub fn interpolation_constraints(&self) -> Vec<ScalarExpr<T>> {
        let m = self.triplets.len();
        let mut out = Vec::with_capacity(m * m);
        for (k, tk) in self.triplets.iter().enumerate() {
            for (l, tl) in self.triplets.iter().enumerate() {
                if k == l {
                    continue;
                }
                let mut e = ScalarExpr::fvalue(tl.f);
                e.add_f(tk.f, -T::one());
                e += &inner(&VectorExpr::from(tl.g), &(&tk.x - &tl.x));
                out.push(e);
            }
        }
        if let Some(b) = self.class.bound() {
            for t in &self.triplets {
                let mut e = ScalarExpr::gram_term(t.g, t.g, T::one());
                e.add_constant(-(b.clone() * b.clone()));
                out.push(e);
            }
        }
        out
    }

    pub fn add_interpolation_constraints(&self, pep: &mut PepProblem<T>) {
        for e in self.interpolation_constraints() {
            pep.add_le(e);
        }
    }
}
