//! Cubic Hermite bridges joining two lines across a gap.

use serde::{Deserialize, Serialize};

use crate::exact::ExactScalar;
use crate::poly::Poly;

/// `a·x + b` in the global coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Line {
    pub a: ExactScalar,
    pub b: ExactScalar,
}

impl Line {
    pub fn new(a: ExactScalar, b: ExactScalar) -> Self {
        Self { a, b }
    }

    /// The line with slope `a` through `(x, y)`.
    pub fn through(a: ExactScalar, x: &ExactScalar, y: &ExactScalar) -> Self {
        let b = y - &(&a * x);
        Self { a, b }
    }

    pub fn eval(&self, x: &ExactScalar) -> ExactScalar {
        &self.a * x + &self.b
    }

    /// Root `−b/a`, or `None` for a horizontal line.
    pub fn root(&self) -> Option<ExactScalar> {
        (-&self.b).checked_div(&self.a)
    }

    pub fn to_poly(&self) -> Poly {
        Poly::linear(self.a.clone(), self.b.clone())
    }
}

/// Coefficients of `c0 + c1·u + c2·u² + c3·u³` with `u = x − lo`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HermiteCubic {
    pub c0: ExactScalar,
    pub c1: ExactScalar,
    pub c2: ExactScalar,
    pub c3: ExactScalar,
}

impl HermiteCubic {
    /// Interpolates value and slope of `left` at `lo` and of `right` at `hi`.
    pub fn bridge(lo: &ExactScalar, hi: &ExactScalar, left: &Line, right: &Line) -> Self {
        let h = hi - lo;
        let p0 = left.eval(lo);
        let p1 = right.eval(hi);
        let m0 = left.a.clone();
        let m1 = right.a.clone();
        let secant = (&p1 - &p0) / &h;
        let two = ExactScalar::from_integer(2);
        let three = ExactScalar::from_integer(3);
        let c2 = (&three * &secant - &two * &m0 - &m1) / &h;
        let c3 = (&m0 + &m1 - &two * &secant) / (&h * &h);
        Self { c0: p0, c1: m0, c2, c3 }
    }

    pub fn eval_local(&self, u: &ExactScalar) -> ExactScalar {
        ((&self.c3 * u + &self.c2) * u + &self.c1) * u + &self.c0
    }

    pub fn derivative_local(&self, u: &ExactScalar) -> ExactScalar {
        let two = ExactScalar::from_integer(2);
        let three = ExactScalar::from_integer(3);
        (three * &self.c3 * u + two * &self.c2) * u + &self.c1
    }

    /// Exact minimum and maximum of the derivative over `u ∈ [0, h]`.
    pub fn derivative_range(&self, h: &ExactScalar) -> (ExactScalar, ExactScalar) {
        let d0 = self.derivative_local(&ExactScalar::zero());
        let d1 = self.derivative_local(h);
        let mut lo = d0.clone().min(d1.clone());
        let mut hi = d0.max(d1);
        if !self.c3.is_zero() {
            // derivative is a parabola with vertex at −c2/(3c3)
            let vertex = -(&self.c2) / (ExactScalar::from_integer(3) * &self.c3);
            if vertex.is_positive() && &vertex < h {
                let dv = self.derivative_local(&vertex);
                lo = lo.min(dv.clone());
                hi = hi.max(dv);
            }
        }
        (lo, hi)
    }

    pub fn to_poly(&self, lo: &ExactScalar) -> Poly {
        Poly::from_local(
            &[self.c0.clone(), self.c1.clone(), self.c2.clone(), self.c3.clone()],
            lo,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    #[test]
    fn bridge_matches_both_lines_to_first_order() {
        let left = Line::new(q(1, 1), q(0, 1));
        let right = Line::new(q(3, 1), q(-1, 1));
        let (lo, hi) = (q(0, 1), q(1, 1));
        let c = HermiteCubic::bridge(&lo, &hi, &left, &right);
        let h = &hi - &lo;
        assert_eq!(c.eval_local(&q(0, 1)), left.eval(&lo));
        assert_eq!(c.eval_local(&h), right.eval(&hi));
        assert_eq!(c.derivative_local(&q(0, 1)), left.a);
        assert_eq!(c.derivative_local(&h), right.a);
    }

    #[test]
    fn equal_lines_give_the_line() {
        let l = Line::new(q(2, 1), q(-1, 3));
        let c = HermiteCubic::bridge(&q(1, 2), &q(3, 4), &l, &l);
        assert!(c.c2.is_zero() && c.c3.is_zero());
        assert_eq!(c.derivative_range(&q(1, 4)), (q(2, 1), q(2, 1)));
    }
}
