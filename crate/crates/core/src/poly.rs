//! Dense rational polynomials and certified supremum bounds on intervals.
//!
//! Everything in the crate that is "piecewise something" (affine pieces,
//! Hermite bridges, polynomial input functions) lowers to [`PiecewisePoly`]
//! so that the d₁ bound has a single implementation.

use serde::{Deserialize, Serialize};

use crate::exact::ExactScalar;

/// Coefficients in ascending powers of the global variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    coeffs: Vec<ExactScalar>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<ExactScalar>) -> Self {
        while coeffs.last().is_some_and(ExactScalar::is_zero) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: ExactScalar) -> Self {
        Self::new(vec![c])
    }

    /// `slope·x + intercept`.
    pub fn linear(slope: ExactScalar, intercept: ExactScalar) -> Self {
        Self::new(vec![intercept, slope])
    }

    pub fn coeffs(&self) -> &[ExactScalar] {
        &self.coeffs
    }

    /// Degree, with the zero polynomial reported as 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, x: &ExactScalar) -> ExactScalar {
        let mut acc = ExactScalar::zero();
        for c in self.coeffs.iter().rev() {
            acc = &acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * ExactScalar::from_integer(k as i64))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = ExactScalar::zero();
        Poly::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).unwrap_or(&zero) - other.coeffs.get(k).unwrap_or(&zero)
                })
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = ExactScalar::zero();
        Poly::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).unwrap_or(&zero) + other.coeffs.get(k).unwrap_or(&zero)
                })
                .collect(),
        )
    }

    pub fn scale(&self, s: &ExactScalar) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Coefficients of `p(x + shift)` in powers of `x` (Taylor expansion at `shift`).
    pub fn shifted(&self, shift: &ExactScalar) -> Poly {
        // Repeated synthetic division.
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let t = &c[j + 1] * shift;
                c[j] += &t;
            }
        }
        Poly::new(c)
    }

    /// Builds a polynomial in the global variable from one written in `u = x - origin`.
    pub fn from_local(local: &[ExactScalar], origin: &ExactScalar) -> Poly {
        Poly::new(local.to_vec()).shifted(&(-origin))
    }

    /// Upper bound on `sup |p|` over `[lo, hi]`.
    ///
    /// Exact for degree ≤ 2. For higher degree the result exceeds the true
    /// supremum by at most `tol` (or by the residual of the last bisection level).
    pub fn sup_abs_bound(&self, lo: &ExactScalar, hi: &ExactScalar, tol: &ExactScalar) -> ExactScalar {
        debug_assert!(lo <= hi);
        let ends = self.eval(lo).abs().max(self.eval(hi).abs());
        match self.degree() {
            0 | 1 => ends,
            2 => {
                // vertex of c0 + c1 x + c2 x²
                let c = &self.coeffs;
                let vertex = -(&c[1]) / (ExactScalar::from_integer(2) * &c[2]);
                if &vertex > lo && &vertex < hi {
                    ends.max(self.eval(&vertex).abs())
                } else {
                    ends
                }
            }
            _ => self.branch_and_bound(lo, hi, tol, ends),
        }
    }

    /// Exact `(min, max)` over `[lo, hi]` for degree ≤ 2, `None` otherwise.
    pub fn exact_range(&self, lo: &ExactScalar, hi: &ExactScalar) -> Option<(ExactScalar, ExactScalar)> {
        let a = self.eval(lo);
        let b = self.eval(hi);
        let (mut mn, mut mx) = if a <= b { (a, b) } else { (b, a) };
        match self.degree() {
            0 | 1 => {}
            2 => {
                let c = &self.coeffs;
                let vertex = -(&c[1]) / (ExactScalar::from_integer(2) * &c[2]);
                if &vertex > lo && &vertex < hi {
                    let v = self.eval(&vertex);
                    mn = mn.min(v.clone());
                    mx = mx.max(v);
                }
            }
            _ => return None,
        }
        Some((mn, mx))
    }

    fn taylor_bound(&self, lo: &ExactScalar, hi: &ExactScalar) -> (ExactScalar, ExactScalar) {
        let mid = lo.midpoint(hi);
        let half = (hi - lo) / ExactScalar::from_integer(2);
        let local = self.shifted(&mid);
        let mut bound = ExactScalar::zero();
        let mut hp = ExactScalar::one();
        for c in local.coeffs() {
            bound += &(c.abs() * &hp);
            hp *= &half;
        }
        let at_mid = local.coeffs().first().map(ExactScalar::abs).unwrap_or_default();
        (bound, at_mid)
    }

    fn branch_and_bound(
        &self,
        lo: &ExactScalar,
        hi: &ExactScalar,
        tol: &ExactScalar,
        ends: ExactScalar,
    ) -> ExactScalar {
        const MAX_DEPTH: u32 = 64;
        let mut best_lower = ends;
        let mut result = ExactScalar::zero();
        let (up, at_mid) = self.taylor_bound(lo, hi);
        best_lower = best_lower.max(at_mid);
        let mut stack = vec![(lo.clone(), hi.clone(), up, 0u32)];
        while let Some((a, b, up, depth)) = stack.pop() {
            if up <= &best_lower + tol || depth >= MAX_DEPTH {
                result = result.max(up);
                continue;
            }
            let m = a.midpoint(&b);
            best_lower = best_lower.max(self.eval(&m).abs());
            for (u, v) in [(a, m.clone()), (m, b)] {
                let (up_child, mid_child) = self.taylor_bound(&u, &v);
                best_lower = best_lower.max(mid_child);
                stack.push((u, v, up_child, depth + 1));
            }
        }
        result.max(best_lower)
    }
}

/// A function given by one polynomial per cell of an ordered breakpoint list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewisePoly {
    breaks: Vec<ExactScalar>,
    polys: Vec<Poly>,
}

/// The two halves of a d₁ bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct D1Parts {
    pub value: ExactScalar,
    pub derivative: ExactScalar,
}

impl D1Parts {
    pub fn total(&self) -> ExactScalar {
        &self.value + &self.derivative
    }
}

/// Absolute slack allowed when bounding non-quadratic differences.
pub fn default_sup_tolerance() -> ExactScalar {
    ExactScalar::pow2_recip(40)
}

impl PiecewisePoly {
    /// `breaks` must be strictly increasing with `breaks.len() == polys.len() + 1`.
    pub fn new(breaks: Vec<ExactScalar>, polys: Vec<Poly>) -> Self {
        assert_eq!(breaks.len(), polys.len() + 1, "breakpoint/cell count mismatch");
        debug_assert!(breaks.windows(2).all(|w| w[0] < w[1]));
        Self { breaks, polys }
    }

    pub fn breaks(&self) -> &[ExactScalar] {
        &self.breaks
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn lo(&self) -> &ExactScalar {
        &self.breaks[0]
    }

    pub fn hi(&self) -> &ExactScalar {
        self.breaks.last().expect("nonempty breaks")
    }

    /// Restriction to `[lo, hi]`, which must overlap the domain.
    pub fn restrict(&self, lo: &ExactScalar, hi: &ExactScalar) -> PiecewisePoly {
        let mut breaks = Vec::new();
        let mut polys = Vec::new();
        let first = self.breaks[1..].partition_point(|b| b <= lo);
        let end = self.breaks[..self.polys.len()].partition_point(|b| b < hi);
        for (i, p) in self.polys.iter().enumerate().take(end).skip(first) {
            let a = self.breaks[i].clone().max(lo.clone());
            let b = self.breaks[i + 1].clone().min(hi.clone());
            if a < b {
                if breaks.is_empty() {
                    breaks.push(a);
                }
                breaks.push(b);
                polys.push(p.clone());
            }
        }
        PiecewisePoly::new(breaks, polys)
    }

    /// Certified upper bounds on `sup|self − other|` and `sup|self′ − other′|`
    /// over the common domain.
    pub fn d1_parts(&self, other: &PiecewisePoly, tol: &ExactScalar) -> D1Parts {
        let mut value = ExactScalar::zero();
        let mut derivative = ExactScalar::zero();
        let (mut i, mut j) = (0usize, 0usize);
        let mut cursor = self.lo().clone().max(other.lo().clone());
        while i < self.polys.len() && j < other.polys.len() {
            let end_a = &self.breaks[i + 1];
            let end_b = &other.breaks[j + 1];
            if end_a <= &cursor {
                i += 1;
                continue;
            }
            if end_b <= &cursor {
                j += 1;
                continue;
            }
            let end = end_a.min(end_b).clone();
            let diff = self.polys[i].sub(&other.polys[j]);
            value = value.max(diff.sup_abs_bound(&cursor, &end, tol));
            derivative = derivative.max(diff.derivative().sup_abs_bound(&cursor, &end, tol));
            cursor = end;
        }
        D1Parts { value, derivative }
    }
}
