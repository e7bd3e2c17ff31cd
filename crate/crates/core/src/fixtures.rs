//! Small hand-built models shared by tests, examples and the harness.

use crate::exact::q;
use crate::pw_model::{AffinePiece, Cell, GapSpec, Line, PiecewiseModel};

/// On `[−3, 3]`: `J0 = [0, 1]` on `x − 5/2` and `J1 = [2, 3]` on `x − 1/2`,
/// so `J0 → 5/2 ∈ Int J1` and `J1 → 1/2 ∈ Int J0`. The left piece
/// `[−3, −1/2]` shares the line of `J0`.
pub fn two_cycle_model() -> PiecewiseModel {
    let l0 = Line::new(q(1, 1), q(-5, 2));
    let l1 = Line::new(q(1, 1), q(-1, 2));
    PiecewiseModel::from_cells(
        q(3, 1),
        vec![
            Cell::Piece(AffinePiece::on_line(q(-3, 1), q(-1, 2), &l0)),
            Cell::Gap(GapSpec { lo: q(-1, 2), hi: q(0, 1), left: l0.clone(), right: l0.clone() }),
            Cell::Piece(AffinePiece::on_line(q(0, 1), q(1, 1), &l0)),
            Cell::Gap(GapSpec { lo: q(1, 1), hi: q(2, 1), left: l0, right: l1.clone() }),
            Cell::Piece(AffinePiece::on_line(q(2, 1), q(3, 1), &l1)),
        ],
    )
    .expect("fixture is valid")
}

/// Piece ids of the 2-cycle in [`two_cycle_model`].
pub const TWO_CYCLE_MEMBERS: [usize; 2] = [1, 2];

/// `[−1, 1]` on the line `a·x` with root 0.
pub fn single_root_model(a: i64) -> PiecewiseModel {
    PiecewiseModel::affine(q(1, 1), &Line::new(q(a, 1), q(0, 1))).expect("fixture is valid")
}
