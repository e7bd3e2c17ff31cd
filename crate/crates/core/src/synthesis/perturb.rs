//! Seeded C¹ perturbations supported inside one affine piece.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SynthesisError;
use crate::exact::{q, ExactScalar};
use crate::pw_model::{d1_upper_bound_on, AffinePiece, Cell, GapSpec, Line, PiecewiseModel};

const BUMP_SEGMENTS: i64 = 6;
const DRAW_BITS: u32 = 16;
const LAMBDA_BITS: u32 = 40;

#[derive(Debug, Clone)]
pub struct Perturbation {
    pub model: PiecewiseModel,
    pub d1_bound: ExactScalar,
}

fn draw(rng: &mut ChaCha8Rng) -> ExactScalar {
    let span = 1i64 << DRAW_BITS;
    ExactScalar::from_integer(rng.gen_range(1 - span..span)) * ExactScalar::pow2_recip(DRAW_BITS)
}

/// Adds a smoothed piecewise-linear bump to the piece's line. The bump
/// vanishes on the outer eighths of the piece, so the neighbouring cells are
/// untouched, and it is scaled so the certified d₁ change stays below `scale`.
pub fn perturb_piece(
    model: &PiecewiseModel,
    piece_id: usize,
    scale: &ExactScalar,
    seed: u64,
) -> Result<Perturbation, SynthesisError> {
    let piece = model
        .piece(piece_id)
        .ok_or_else(|| SynthesisError::Precondition(format!("no piece with id {piece_id}")))?
        .clone();
    if !scale.is_positive() {
        return Err(SynthesisError::Precondition("perturbation scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = piece.length();
    let margin = &len / q(8, 1);
    let step = (&len - q(2, 1) * &margin) / ExactScalar::from_integer(BUMP_SEGMENTS);
    let mut nodes = vec![piece.lo.clone()];
    for i in 0..=BUMP_SEGMENTS {
        nodes.push(&piece.lo + &margin + ExactScalar::from_integer(i) * &step);
    }
    nodes.push(piece.hi.clone());
    let mut bump = vec![ExactScalar::zero(); nodes.len()];
    for e in bump.iter_mut().take(nodes.len() - 2).skip(2) {
        *e = draw(&mut rng);
    }
    let slopes: Vec<ExactScalar> = (0..nodes.len() - 1)
        .map(|i| (&bump[i + 1] - &bump[i]) / (&nodes[i + 1] - &nodes[i]))
        .collect();
    let max_value = bump.iter().map(ExactScalar::abs).max().unwrap_or_default();
    let max_slope = slopes.iter().map(ExactScalar::abs).max().unwrap_or_default();
    // a centred bridge stays within slope·radius of the corner value, and
    // radius ≤ 1, so value + 2·slope bounds d₁ of the smoothed bump
    let raw = max_value + q(2, 1) * max_slope;
    if raw.is_zero() {
        return Ok(Perturbation { model: model.clone(), d1_bound: ExactScalar::zero() });
    }
    let fraction = q(3, 4) + draw(&mut rng).abs() / q(4, 1);
    // rounded down to a dyadic so all coefficients stay dyadic
    let unit = ExactScalar::pow2_recip(LAMBDA_BITS);
    let lambda = ExactScalar::from_bigints((scale * &fraction / &raw / &unit).floor(), 1.into()).expect("unit denominator") * &unit;
    if !lambda.is_positive() {
        return Err(SynthesisError::Precondition(format!("perturbation scale {scale} is below 2^-{LAMBDA_BITS}")));
    }

    let line = piece.line();
    let lines: Vec<Line> = (0..nodes.len() - 1)
        .map(|i| {
            let (x0, x1) = (&nodes[i], &nodes[i + 1]);
            let y0 = line.eval(x0) + &lambda * &bump[i];
            let y1 = line.eval(x1) + &lambda * &bump[i + 1];
            Line::through((&y1 - &y0) / (x1 - x0), x0, &y0)
        })
        .collect();
    let min_gap = (&margin).min(&step).clone();
    let (_, radius) = (&min_gap / q(4, 1)).pow2_floor().expect("positive spacing");
    let radius = radius.min(q(1, 1));

    let mut replacement = Vec::new();
    let mut cursor = piece.lo.clone();
    for (i, l) in lines.iter().enumerate() {
        let end = if i + 1 == lines.len() { piece.hi.clone() } else { &nodes[i + 1] - &radius };
        replacement.push(Cell::Piece(AffinePiece::on_line(cursor.clone(), end.clone(), l)));
        if i + 1 < lines.len() {
            let hi = &nodes[i + 1] + &radius;
            replacement.push(Cell::Gap(GapSpec { lo: end, hi: hi.clone(), left: l.clone(), right: lines[i + 1].clone() }));
            cursor = hi;
        }
    }
    let mut cells = Vec::new();
    let mut seen = 0usize;
    for c in model.cells() {
        match c {
            Cell::Piece(_) if seen == piece_id => {
                cells.append(&mut replacement);
                seen += 1;
            }
            Cell::Piece(_) => {
                cells.push(c);
                seen += 1;
            }
            Cell::Gap(_) => cells.push(c),
        }
    }
    let out = PiecewiseModel::from_cells(model.half_width().clone(), cells)?;
    let d1_bound = d1_upper_bound_on(model, &out, &piece.lo, &piece.hi)?;
    Ok(Perturbation { model: out, d1_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::single_root_model;

    #[test]
    fn stays_within_scale_and_is_deterministic() {
        let m = single_root_model(1);
        let a = perturb_piece(&m, 0, &q(1, 11), 4).unwrap();
        let b = perturb_piece(&m, 0, &q(1, 11), 4).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.d1_bound < q(1, 11));
        assert!(a.d1_bound.is_positive());
        assert_eq!(a.model.eval(&q(-1, 1)).unwrap(), q(-1, 1));
        assert_ne!(perturb_piece(&m, 0, &q(1, 11), 5).unwrap().model, a.model);
    }
}
