//! Piecewise-polynomial C¹ input functions with closed-form continuity moduli.

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::exact::{q, ExactScalar};
use crate::poly::{default_sup_tolerance, PiecewisePoly, Poly};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSegment {
    pub lo: ExactScalar,
    pub hi: ExactScalar,
    /// Ascending powers of the global variable.
    pub coeffs: Vec<ExactScalar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    #[serde(rename = "M")]
    pub half_width: ExactScalar,
    pub segments: Vec<InputSegment>,
}

/// Bounds `L0 ≥ sup|f′|` and `L1 ≥ sup|f″|`, so `|f(x) − f(y)| ≤ L0|x − y|`
/// and `|f′(x) − f′(y)| ≤ L1|x − y|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinuityModulus {
    pub value_lipschitz: ExactScalar,
    pub derivative_lipschitz: ExactScalar,
}

impl ContinuityModulus {
    /// Largest `r` with `|x − y| < 2r` forcing both oscillations below `bound`:
    /// `r = bound / (2·max(L0, L1))`.
    pub fn separation_for(&self, bound: &ExactScalar) -> Option<ExactScalar> {
        let l = self.value_lipschitz.clone().max(self.derivative_lipschitz.clone());
        if l.is_zero() {
            None
        } else {
            Some(bound / (q(2, 1) * l))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputFunction {
    half_width: ExactScalar,
    repr: PiecewisePoly,
    modulus: ContinuityModulus,
}

impl InputFunction {
    pub fn new(half_width: ExactScalar, segments: Vec<InputSegment>) -> Result<Self, SynthesisError> {
        if !half_width.is_positive() {
            return Err(SynthesisError::Input(format!("M must be positive, got {half_width}")));
        }
        if segments.is_empty() {
            return Err(SynthesisError::Input("no segments".into()));
        }
        let mut breaks = vec![segments[0].lo.clone()];
        if breaks[0] != -&half_width {
            return Err(SynthesisError::Input("first segment must start at -M".into()));
        }
        let mut polys: Vec<Poly> = Vec::new();
        for s in &segments {
            if s.lo != *breaks.last().expect("nonempty") || s.lo >= s.hi {
                return Err(SynthesisError::Input(format!("segment [{}, {}] breaks the tiling", s.lo, s.hi)));
            }
            let p = Poly::new(s.coeffs.clone());
            if let Some(prev) = polys.last() {
                let d = prev.sub(&p);
                if !d.eval(&s.lo).is_zero() || !d.derivative().eval(&s.lo).is_zero() {
                    return Err(SynthesisError::Input(format!("function is not C1 at {}", s.lo)));
                }
            }
            breaks.push(s.hi.clone());
            polys.push(p);
        }
        if *breaks.last().expect("nonempty") != half_width {
            return Err(SynthesisError::Input("last segment must end at M".into()));
        }
        let repr = PiecewisePoly::new(breaks, polys);
        let tol = default_sup_tolerance();
        let mut l0 = ExactScalar::zero();
        let mut l1 = ExactScalar::zero();
        for (i, p) in repr.polys().iter().enumerate() {
            let (a, b) = (&repr.breaks()[i], &repr.breaks()[i + 1]);
            let d = p.derivative();
            // certified bounds: the tolerance only ever adds slack
            l0 = l0.max(d.sup_abs_bound(a, b, &tol) + &tol);
            l1 = l1.max(d.derivative().sup_abs_bound(a, b, &tol) + &tol);
        }
        Ok(Self { half_width, repr, modulus: ContinuityModulus { value_lipschitz: l0, derivative_lipschitz: l1 } })
    }

    /// A single polynomial on the whole domain.
    pub fn polynomial(half_width: ExactScalar, coeffs: Vec<ExactScalar>) -> Result<Self, SynthesisError> {
        let seg = InputSegment { lo: -&half_width, hi: half_width.clone(), coeffs };
        Self::new(half_width, vec![seg])
    }

    pub fn from_json(text: &str) -> Result<Self, SynthesisError> {
        let file: InputFile = serde_json::from_str(text).map_err(|e| SynthesisError::Input(e.to_string()))?;
        Self::new(file.half_width, file.segments)
    }

    pub fn to_file(&self) -> InputFile {
        InputFile {
            half_width: self.half_width.clone(),
            segments: self
                .repr
                .polys()
                .iter()
                .enumerate()
                .map(|(i, p)| InputSegment {
                    lo: self.repr.breaks()[i].clone(),
                    hi: self.repr.breaks()[i + 1].clone(),
                    coeffs: p.coeffs().to_vec(),
                })
                .collect(),
        }
    }

    pub fn half_width(&self) -> &ExactScalar {
        &self.half_width
    }

    pub fn modulus(&self) -> &ContinuityModulus {
        &self.modulus
    }

    pub fn as_piecewise_poly(&self) -> &PiecewisePoly {
        &self.repr
    }

    fn segment_at(&self, x: &ExactScalar) -> &Poly {
        let idx = self.repr.breaks()[1..].partition_point(|b| b < x);
        &self.repr.polys()[idx.min(self.repr.polys().len() - 1)]
    }

    pub fn eval(&self, x: &ExactScalar) -> ExactScalar {
        self.segment_at(x).eval(x)
    }

    pub fn eval_derivative(&self, x: &ExactScalar) -> ExactScalar {
        self.segment_at(x).derivative().eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_of_parabola() {
        // x² − 1 on [−2, 2]: |f′| ≤ 4, |f″| = 2
        let f = InputFunction::polynomial(q(2, 1), vec![q(-1, 1), q(0, 1), q(1, 1)]).unwrap();
        let m = f.modulus();
        assert!(m.value_lipschitz >= q(4, 1) && m.value_lipschitz < q(4, 1) + q(1, 1000));
        assert!(m.derivative_lipschitz >= q(2, 1));
        assert_eq!(f.eval(&q(1, 2)), q(-3, 4));
        assert_eq!(f.eval_derivative(&q(1, 2)), q(1, 1));
    }

    #[test]
    fn rejects_kinks() {
        let segs = vec![
            InputSegment { lo: q(-1, 1), hi: q(0, 1), coeffs: vec![q(0, 1), q(1, 1)] },
            InputSegment { lo: q(0, 1), hi: q(1, 1), coeffs: vec![q(0, 1), q(2, 1)] },
        ];
        assert!(matches!(InputFunction::new(q(1, 1), segs), Err(SynthesisError::Input(_))));
    }

    #[test]
    fn json_round_trip() {
        let f = InputFunction::polynomial(q(2, 1), vec![q(-1, 1), q(0, 1), q(1, 1)]).unwrap();
        let text = serde_json::to_string(&f.to_file()).unwrap();
        assert_eq!(InputFunction::from_json(&text).unwrap(), f);
        assert!(InputFunction::from_json("{]").is_err());
    }
}
