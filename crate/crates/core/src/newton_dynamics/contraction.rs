//! Certified convergence radius around an interior root, and a sample-level
//! check that perturbed models halve the distance to their root in one step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{q, ExactScalar};
use crate::pw_model::{AffinePiece, PiecewiseModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractionError {
    #[error("epsilon must satisfy 0 < epsilon < 1/5, got {0}")]
    EpsilonOutOfRange(ExactScalar),
    #[error("no piece with id {0}")]
    UnknownPiece(usize),
    #[error("root {root} of piece [{lo}, {hi}] is not interior")]
    RootNotInterior { root: ExactScalar, lo: ExactScalar, hi: ExactScalar },
    #[error("[w - epsilon, w + epsilon] is not inside the piece")]
    BallNotInPiece,
    #[error("perturbed model is not strictly monotone on the piece near {at}")]
    NotMonotone { at: ExactScalar },
    #[error("perturbed model has no sign change on the piece")]
    RootNotBracketed,
    #[error("sample {0} lies outside the certified piece")]
    SampleOutsidePiece(ExactScalar),
    #[error("perturbed model has a bridge of degree above 3 on the piece")]
    UnsupportedDegree,
    #[error("halving check at {0} undecided after refining the root bracket")]
    Undecided(ExactScalar),
}

impl ContractionError {
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            ContractionError::EpsilonOutOfRange(_)
                | ContractionError::UnknownPiece(_)
                | ContractionError::RootNotInterior { .. }
                | ContractionError::BallNotInPiece
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionCertificate {
    pub piece_id: usize,
    pub piece: AffinePiece,
    pub root_w: ExactScalar,
    pub epsilon: ExactScalar,
    pub eta: ExactScalar,
    pub delta: ExactScalar,
    /// `|a|` after reflecting negative-slope pieces.
    pub slope_abs: ExactScalar,
}

/// `max(U, 1)` where `U` is the farthest distance from `w` to the piece ends.
fn reach(piece: &AffinePiece, w: &ExactScalar) -> ExactScalar {
    let u = (w - &piece.lo).max(&piece.hi - w);
    u.max(ExactScalar::one())
}

/// With `g = f + e`, `f = a(x − w)`: `N(g,x) − w = ((x − w)e′ − e)/(a + e′)`,
/// so `sup|e| + sup|e′| < η` gives `|N(g,x) − w| < max(U,1)·η/(|a| − η)`.
fn certifies(eta: &ExactScalar, slope_abs: &ExactScalar, reach: &ExactScalar, epsilon: &ExactScalar) -> bool {
    if eta >= &(slope_abs / q(2, 1)) {
        return false;
    }
    reach * eta <= epsilon * &(slope_abs - eta)
}

/// Largest η the interval bound accepts: `ε|a| / (max(U,1) + ε)`.
pub fn eta_closed_form(piece: &AffinePiece, epsilon: &ExactScalar) -> ExactScalar {
    let w = piece.newton_image();
    let a = piece.slope_a.abs();
    epsilon * &a / (reach(piece, &w) + epsilon)
}

const ETA_BISECTION_STEPS: u32 = 48;

pub fn contraction_certificate(
    model: &PiecewiseModel,
    piece_id: usize,
    epsilon: &ExactScalar,
) -> Result<ContractionCertificate, ContractionError> {
    if !epsilon.is_positive() || epsilon >= &q(1, 5) {
        return Err(ContractionError::EpsilonOutOfRange(epsilon.clone()));
    }
    let piece = model.piece(piece_id).ok_or(ContractionError::UnknownPiece(piece_id))?.clone();
    let w = piece.newton_image();
    if !piece.contains_interior(&w) {
        return Err(ContractionError::RootNotInterior { root: w, lo: piece.lo.clone(), hi: piece.hi.clone() });
    }
    if &w - epsilon < piece.lo || &w + epsilon > piece.hi {
        return Err(ContractionError::BallNotInPiece);
    }
    let slope_abs = piece.slope_a.abs();
    let reach = reach(&piece, &w);
    // bisection over (0, |a|/2): `lo` always certifies, `hi` never does
    let mut lo = ExactScalar::zero();
    let mut hi = &slope_abs / q(2, 1);
    for _ in 0..ETA_BISECTION_STEPS {
        let mid = lo.midpoint(&hi);
        if certifies(&mid, &slope_abs, &reach, epsilon) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = lo;
    let delta = eta.clone().min(&slope_abs * epsilon);
    Ok(ContractionCertificate { piece_id, piece, root_w: w, epsilon: epsilon.clone(), eta, delta, slope_abs })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum HalvingOutcome {
    Pass { checked: usize },
    /// `root_lo ≤ w′ ≤ root_hi` brackets the perturbed root.
    Counterexample { x: ExactScalar, image: ExactScalar, root_lo: ExactScalar, root_hi: ExactScalar },
}

/// Root of `g` on the piece, kept as a shrinking bracket.
struct RootBracket<'a> {
    g: &'a PiecewiseModel,
    lo: ExactScalar,
    hi: ExactScalar,
    sign_lo: i32,
}

impl RootBracket<'_> {
    fn exact(&self) -> bool {
        self.lo == self.hi
    }

    fn refine(&mut self) {
        let mid = self.lo.midpoint(&self.hi);
        let s = self.g.eval(&mid).expect("bracket stays in domain").signum();
        if s == 0 {
            self.lo = mid.clone();
            self.hi = mid;
        } else if s == self.sign_lo {
            self.lo = mid;
        } else {
            self.hi = mid;
        }
    }
}

fn dist_to_interval(x: &ExactScalar, lo: &ExactScalar, hi: &ExactScalar) -> ExactScalar {
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        ExactScalar::zero()
    }
}

fn far_to_interval(x: &ExactScalar, lo: &ExactScalar, hi: &ExactScalar) -> ExactScalar {
    (x - lo).abs().max((x - hi).abs())
}

const MAX_REFINEMENTS: usize = 256;

/// Checks `|w′ − N(g,x)| ≤ |w′ − x|/2` at every sample, where `w′` is the
/// unique root of `g` on the certified piece.
///
/// The d₁ precondition against the certificate's base model is the caller's
/// responsibility.
pub fn verify_halving(
    g: &PiecewiseModel,
    cert: &ContractionCertificate,
    sample_xs: &[ExactScalar],
) -> Result<HalvingOutcome, ContractionError> {
    let (plo, phi) = (&cert.piece.lo, &cert.piece.hi);
    let cells = g.to_piecewise_poly().restrict(plo, phi);
    let orientation = cert.piece.slope_a.signum();
    for (i, p) in cells.polys().iter().enumerate() {
        let d = p.derivative();
        let (a, b) = (&cells.breaks()[i], &cells.breaks()[i + 1]);
        let (mn, mx) = d.exact_range(a, b).ok_or(ContractionError::UnsupportedDegree)?;
        let ok = if orientation > 0 { mn.is_positive() } else { mx.is_negative() };
        if !ok {
            return Err(ContractionError::NotMonotone { at: a.clone() });
        }
    }
    let s_lo = g.eval(plo).expect("piece in domain").signum();
    let s_hi = g.eval(phi).expect("piece in domain").signum();
    if s_lo == s_hi && s_lo != 0 {
        return Err(ContractionError::RootNotBracketed);
    }
    // locate the cell with the sign change
    let mut bracket = None;
    for (i, p) in cells.polys().iter().enumerate() {
        let (a, b) = (&cells.breaks()[i], &cells.breaks()[i + 1]);
        let (va, vb) = (p.eval(a), p.eval(b));
        if va.is_zero() {
            bracket = Some((a.clone(), a.clone(), 0));
            break;
        }
        if vb.is_zero() {
            bracket = Some((b.clone(), b.clone(), 0));
            break;
        }
        if va.signum() != vb.signum() {
            if p.degree() <= 1 {
                let r = -(&p.coeffs()[0]) / &p.coeffs()[1];
                bracket = Some((r.clone(), r, 0));
            } else {
                bracket = Some((a.clone(), b.clone(), va.signum()));
            }
            break;
        }
    }
    let (lo, hi, sign_lo) = bracket.ok_or(ContractionError::RootNotBracketed)?;
    let mut root = RootBracket { g, lo, hi, sign_lo };
    let two = q(2, 1);
    for x in sample_xs {
        if x < plo || x > phi {
            return Err(ContractionError::SampleOutsidePiece(x.clone()));
        }
        let gx = g.eval(x).expect("sample in domain");
        if gx.is_zero() {
            continue;
        }
        let image = x - &(gx / g.eval_derivative(x).expect("sample in domain"));
        let mut refinements = 0;
        loop {
            let (p, r) = (&root.lo, &root.hi);
            if far_to_interval(&image, p, r) * &two <= dist_to_interval(x, p, r) {
                break;
            }
            if dist_to_interval(&image, p, r) * &two > far_to_interval(x, p, r) {
                return Ok(HalvingOutcome::Counterexample {
                    x: x.clone(),
                    image,
                    root_lo: root.lo.clone(),
                    root_hi: root.hi.clone(),
                });
            }
            if root.exact() || refinements >= MAX_REFINEMENTS {
                return Err(ContractionError::Undecided(x.clone()));
            }
            root.refine();
            refinements += 1;
        }
    }
    Ok(HalvingOutcome::Pass { checked: sample_xs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::single_root_model;
    use crate::pw_model::Line;

    #[test]
    fn eta_matches_closed_form_oracle() {
        for a in [1, 2, -3] {
            let m = single_root_model(a);
            let cert = contraction_certificate(&m, 0, &q(1, 10)).unwrap();
            let oracle = eta_closed_form(&m.pieces()[0], &q(1, 10));
            assert!(cert.eta <= oracle);
            assert!(&oracle - &cert.eta < q(1, 1 << 40));
            assert_eq!(cert.delta, cert.eta.clone().min(q(a.abs(), 10)));
        }
        // a = 1 on [−1, 1]: η* = (1/10)/(1 + 1/10) = 1/11
        assert_eq!(eta_closed_form(&single_root_model(1).pieces()[0], &q(1, 10)), q(1, 11));
        assert_eq!(eta_closed_form(&single_root_model(2).pieces()[0], &q(1, 10)), q(2, 11));
    }

    #[test]
    fn delta_examples() {
        let c1 = contraction_certificate(&single_root_model(1), 0, &q(1, 10)).unwrap();
        assert!(c1.delta <= q(1, 10));
        let c2 = contraction_certificate(&single_root_model(2), 0, &q(1, 10)).unwrap();
        assert_eq!(c2.delta, c2.eta.clone().min(q(1, 5)));
    }

    #[test]
    fn epsilon_precondition() {
        let m = single_root_model(1);
        assert_eq!(
            contraction_certificate(&m, 0, &q(1, 4)).unwrap_err(),
            ContractionError::EpsilonOutOfRange(q(1, 4))
        );
        assert!(contraction_certificate(&m, 0, &q(1, 5)).is_err());
    }

    #[test]
    fn unperturbed_and_shifted_models_halve() {
        let f = single_root_model(1);
        let cert = contraction_certificate(&f, 0, &q(1, 10)).unwrap();
        let xs: Vec<ExactScalar> = (0..=20).map(|i| q(i - 10, 10)).collect();
        assert_eq!(verify_halving(&f, &cert, &xs).unwrap(), HalvingOutcome::Pass { checked: 21 });
        let c = &cert.delta / q(3, 1);
        let g = PiecewiseModel::affine(q(1, 1), &Line::new(q(1, 1), c)).unwrap();
        assert!(matches!(verify_halving(&g, &cert, &xs).unwrap(), HalvingOutcome::Pass { .. }));
    }

    #[test]
    fn flat_far_piece_gives_counterexample() {
        use crate::pw_model::{AffinePiece, Cell, GapSpec};
        let f = single_root_model(1);
        let cert = contraction_certificate(&f, 0, &q(1, 10)).unwrap();
        let flat = Line::new(q(1, 10), q(-7, 20));
        let id = Line::new(q(1, 1), q(0, 1));
        let g = PiecewiseModel::from_cells(
            q(1, 1),
            vec![
                Cell::Piece(AffinePiece::on_line(q(-1, 1), q(-1, 2), &flat)),
                Cell::Gap(GapSpec { lo: q(-1, 2), hi: q(-1, 4), left: flat.clone(), right: id.clone() }),
                Cell::Piece(AffinePiece::on_line(q(-1, 4), q(1, 1), &id)),
            ],
        )
        .unwrap();
        let out = verify_halving(&g, &cert, &[q(1, 2), q(-1, 1)]).unwrap();
        assert_eq!(
            out,
            HalvingOutcome::Counterexample { x: q(-1, 1), image: q(7, 2), root_lo: q(0, 1), root_hi: q(0, 1) }
        );
    }
}
