//! Local surgery inside an affine piece that moves the Newton image of a
//! neighbourhood of `x` to a prescribed nearby point `y`.
//!
//! Inside `[x − 2γ, x + 2γ]` the line `a·t + b` is replaced by three affine
//! parts: a central line through `(x, g(x))` with slope `g(x)/(x − y)` and two
//! connectors of slope `2a − s` that rejoin the original line at `x ± 2γ`. The
//! four corners get centred Hermite bridges of half-width `γ/4`.

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::exact::{q, ExactScalar};
use crate::poly::{default_sup_tolerance, D1Parts, PiecewisePoly};
use crate::pw_model::{AffinePiece, Cell, GapSpec, Line, PiecewiseModel};

/// Largest `r` with `|a|·r/(D − r) ≤ ε/2`, i.e. `εD/(2|a| + ε)`, where `D` is
/// the distance from the piece's Newton image to the piece. Targets must lie
/// strictly closer than this.
pub fn admissible_radius(piece: &AffinePiece, epsilon: &ExactScalar) -> Result<ExactScalar, SynthesisError> {
    let z = piece.newton_image();
    if piece.contains(&z) {
        return Err(SynthesisError::Precondition(format!("Newton image {z} lies in its own piece")));
    }
    let dist = if z < piece.lo { &piece.lo - &z } else { &z - &piece.hi };
    Ok(epsilon * &dist / (q(2, 1) * piece.slope_a.abs() + epsilon))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub piece_id: usize,
    pub x: ExactScalar,
    pub y: ExactScalar,
    /// The model changes only inside `(x − δ, x + δ)`.
    pub half_width: ExactScalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub window: Window,
    pub central_id: usize,
    pub central_lo: ExactScalar,
    pub central_hi: ExactScalar,
}

#[derive(Debug, Clone)]
pub struct RetargetResult {
    pub model: PiecewiseModel,
    /// New id of every untouched piece; `None` for pieces that were split.
    pub old_to_new: Vec<Option<usize>>,
    /// For every split piece, the ids of the parts still on its original line.
    pub outer_parts: Vec<(usize, Vec<usize>)>,
    /// In the order the windows were given.
    pub windows: Vec<WindowOutcome>,
    pub d1_bound: ExactScalar,
}

struct Plan {
    gamma: ExactScalar,
    rho: ExactScalar,
    central: Line,
    left: Line,
    right: Line,
}

fn plan(piece: &AffinePiece, w: &Window, epsilon: &ExactScalar) -> Result<Plan, SynthesisError> {
    let r = admissible_radius(piece, epsilon)?;
    let z = piece.newton_image();
    if !piece.contains_interior(&w.x) {
        return Err(SynthesisError::Precondition(format!("x = {} is not interior to its piece", w.x)));
    }
    if !w.half_width.is_positive() || &w.x - &w.half_width <= piece.lo || &w.x + &w.half_width >= piece.hi {
        return Err(SynthesisError::Precondition(format!(
            "window of half-width {} around {} leaves the piece interior",
            w.half_width, w.x
        )));
    }
    let distance = (&w.y - &z).abs();
    if distance >= r {
        return Err(SynthesisError::Radius { requested: w.y.clone(), distance, max_radius: r });
    }
    let line = piece.line();
    let gx = line.eval(&w.x);
    let s = &gx / &(&w.x - &w.y);
    let connector = q(2, 1) * &piece.slope_a - &s;
    if connector.is_zero() {
        return Err(SynthesisError::Precondition("connector slope would vanish".into()));
    }
    let gamma = (&w.half_width / q(3, 1)).min(q(1, 2));
    let rho = &gamma / q(4, 1);
    let two_gamma = q(2, 1) * &gamma;
    let left = Line::through(connector.clone(), &(&w.x - &two_gamma), &line.eval(&(&w.x - &two_gamma)));
    let right = Line::through(connector, &(&w.x + &two_gamma), &line.eval(&(&w.x + &two_gamma)));
    Ok(Plan { gamma, rho, central: Line::through(s, &w.x, &gx), left, right })
}

fn piece_cell(lo: ExactScalar, hi: ExactScalar, line: &Line) -> Cell {
    Cell::Piece(AffinePiece::on_line(lo, hi, line))
}

fn gap_cell(lo: ExactScalar, hi: ExactScalar, left: &Line, right: &Line) -> Cell {
    Cell::Gap(GapSpec { lo, hi, left: left.clone(), right: right.clone() })
}

/// Applies every window at once. Windows on the same piece must be disjoint.
pub fn apply_windows(g: &PiecewiseModel, windows: &[Window], epsilon: &ExactScalar) -> Result<RetargetResult, SynthesisError> {
    let mut by_piece: Vec<Vec<usize>> = vec![Vec::new(); g.pieces().len()];
    for (k, w) in windows.iter().enumerate() {
        if w.piece_id >= g.pieces().len() {
            return Err(SynthesisError::Precondition(format!("no piece with id {}", w.piece_id)));
        }
        by_piece[w.piece_id].push(k);
    }
    let mut plans: Vec<Option<Plan>> = Vec::with_capacity(windows.len());
    for w in windows {
        plans.push(Some(plan(&g.pieces()[w.piece_id], w, epsilon)?));
    }
    for list in by_piece.iter_mut() {
        list.sort_by(|&a, &b| windows[a].x.cmp(&windows[b].x));
        for pair in list.windows(2) {
            let (a, b) = (&windows[pair[0]], &windows[pair[1]]);
            if &a.x + &a.half_width >= &b.x - &b.half_width {
                return Err(SynthesisError::Precondition(format!("windows around {} and {} overlap", a.x, b.x)));
            }
        }
    }

    let mut cells = Vec::new();
    let mut old_to_new = vec![None; g.pieces().len()];
    let mut outer_parts = Vec::new();
    let mut central = vec![(0usize, ExactScalar::zero(), ExactScalar::zero()); windows.len()];
    let mut window_cells: Vec<Vec<Cell>> = vec![Vec::new(); windows.len()];
    let mut next_id = 0usize;
    let mut old_id = 0usize;
    let mut push_piece = |cells: &mut Vec<Cell>, c: Cell| -> usize {
        cells.push(c);
        next_id += 1;
        next_id - 1
    };
    for cell in g.cells() {
        let piece = match cell {
            Cell::Gap(_) => {
                cells.push(cell);
                continue;
            }
            Cell::Piece(p) => p,
        };
        let list = &by_piece[old_id];
        if list.is_empty() {
            old_to_new[old_id] = Some(push_piece(&mut cells, Cell::Piece(piece)));
            old_id += 1;
            continue;
        }
        let line = piece.line();
        let mut outer = Vec::new();
        let mut cursor = piece.lo.clone();
        for &k in list {
            let p = plans[k].take().expect("each window planned once");
            let x = &windows[k].x;
            let (g1, g2) = (p.gamma.clone(), q(2, 1) * &p.gamma);
            let rho = &p.rho;
            outer.push(push_piece(&mut cells, piece_cell(cursor.clone(), x - &g2 - rho, &line)));
            let inner_start = cells.len();
            cells.push(gap_cell(x - &g2 - rho, x - &g2 + rho, &line, &p.left));
            push_piece(&mut cells, piece_cell(x - &g2 + rho, x - &g1 - rho, &p.left));
            cells.push(gap_cell(x - &g1 - rho, x - &g1 + rho, &p.left, &p.central));
            let (clo, chi) = (x - &g1 + rho, x + &g1 - rho);
            let cid = push_piece(&mut cells, piece_cell(clo.clone(), chi.clone(), &p.central));
            central[k] = (cid, clo, chi);
            cells.push(gap_cell(x + &g1 - rho, x + &g1 + rho, &p.central, &p.right));
            push_piece(&mut cells, piece_cell(x + &g1 + rho, x + &g2 - rho, &p.right));
            cells.push(gap_cell(x + &g2 - rho, x + &g2 + rho, &p.right, &line));
            cursor = x + &g2 + rho;
            window_cells[k] = cells[inner_start..].to_vec();
        }
        outer.push(push_piece(&mut cells, piece_cell(cursor, piece.hi.clone(), &line)));
        outer_parts.push((old_id, outer));
        old_id += 1;
    }
    let model = PiecewiseModel::from_cells(g.half_width().clone(), cells)?;

    // the models agree outside the windows, so each part's sup is the max
    // over windows of the local comparison against the original line
    let tol = default_sup_tolerance();
    let mut parts = D1Parts { value: ExactScalar::zero(), derivative: ExactScalar::zero() };
    for (w, inner) in windows.iter().zip(&window_cells) {
        let line = g.pieces()[w.piece_id].line().to_poly();
        let (lo, hi) = (&w.x - &w.half_width, &w.x + &w.half_width);
        let mut breaks = vec![lo.clone()];
        let mut polys = vec![line.clone()];
        for c in inner {
            breaks.push(c.lo().clone());
            polys.push(c.to_poly());
        }
        breaks.push(inner.last().expect("window has cells").hi().clone());
        breaks.push(hi.clone());
        polys.push(line.clone());
        let local = PiecewisePoly::new(breaks, polys);
        let p = PiecewisePoly::new(vec![lo, hi], vec![line]).d1_parts(&local, &tol);
        parts.value = parts.value.max(p.value);
        parts.derivative = parts.derivative.max(p.derivative);
    }
    let d1_bound = parts.total();
    if &d1_bound >= epsilon {
        return Err(SynthesisError::Validation {
            condition: "retarget d1".into(),
            detail: format!("certified d1 change {d1_bound} is not below {epsilon}"),
        });
    }
    let windows = windows
        .iter()
        .zip(central)
        .map(|(w, (central_id, central_lo, central_hi))| WindowOutcome {
            window: w.clone(),
            central_id,
            central_lo,
            central_hi,
        })
        .collect();
    Ok(RetargetResult { model, old_to_new, outer_parts, windows, d1_bound })
}

/// Single-window form: afterwards `N(g, x) = y` on a neighbourhood of `x`.
pub fn retarget(
    g: &PiecewiseModel,
    piece_id: usize,
    x: &ExactScalar,
    y: &ExactScalar,
    delta_radius: &ExactScalar,
    epsilon: &ExactScalar,
) -> Result<RetargetResult, SynthesisError> {
    let w = Window { piece_id, x: x.clone(), y: y.clone(), half_width: delta_radius.clone() };
    apply_windows(g, &[w], epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_cycle_model;
    use crate::newton_dynamics::{newton_step, StepResult};
    use crate::pw_model::model_to_json;

    #[test]
    fn radius_example() {
        // a = 1, dist(z, J) = 1, ε = 1/2: r/(1 − r) < 1/4 ⇔ r < 1/5
        let p = AffinePiece::new(q(0, 1), q(1, 1), q(1, 1), q(-2, 1));
        assert_eq!(admissible_radius(&p, &q(1, 2)).unwrap(), q(1, 5));
        let own = AffinePiece::new(q(0, 1), q(1, 1), q(1, 1), q(-1, 2));
        assert!(admissible_radius(&own, &q(1, 2)).is_err());
    }

    #[test]
    fn retarget_to_current_image_keeps_the_line() {
        let g = two_cycle_model();
        let res = retarget(&g, 1, &q(1, 2), &q(5, 2), &q(1, 8), &q(1, 2)).unwrap();
        let c = &res.model.pieces()[res.windows[0].central_id];
        assert_eq!(c.line(), g.pieces()[1].line());
        assert_eq!(res.d1_bound, q(0, 1));
    }

    #[test]
    fn retarget_moves_image_and_only_touches_window() {
        let g = two_cycle_model();
        // J0 = [0,1], z = 5/2, dist = 3/2, a = 1, ε = 1/2 → r* = (3/4)/(5/2) = 3/10
        let r = admissible_radius(&g.pieces()[1], &q(1, 2)).unwrap();
        assert_eq!(r, q(3, 10));
        let y = q(5, 2) + &r / q(2, 1);
        let x = q(1, 2);
        let delta = q(1, 8);
        let res = retarget(&g, 1, &x, &y, &delta, &q(1, 2)).unwrap();
        assert_eq!(newton_step(&res.model, &x).unwrap(), StepResult::Next(y.clone()));
        assert!(res.d1_bound < q(1, 2));
        let outside = |m: &PiecewiseModel| -> Vec<Cell> {
            m.cells().into_iter().filter(|c| c.hi() <= &(&x - &delta) || c.lo() >= &(&x + &delta)).collect()
        };
        let (before, after) = (outside(&g), outside(&res.model));
        // the split piece is trimmed; compare everything not adjacent to it
        assert_eq!(before.iter().filter(|c| c.lo() >= &q(1, 1)).collect::<Vec<_>>(), after.iter().filter(|c| c.lo() >= &q(1, 1)).collect::<Vec<_>>());
        assert_eq!(before[..2], after[..2]);
        for gap in res.model.gaps().iter().filter(|g| g.lo > &x - &delta && g.hi < &x + &delta) {
            assert!(gap.derivative_within_hull());
        }
        assert_ne!(model_to_json(&g), model_to_json(&res.model));
    }

    #[test]
    fn radius_error_reports_bound() {
        let g = two_cycle_model();
        let err = retarget(&g, 1, &q(1, 2), &q(3, 1), &q(1, 8), &q(1, 2)).unwrap_err();
        assert_eq!(err, SynthesisError::Radius { requested: q(3, 1), distance: q(1, 2), max_radius: q(3, 10) });
    }
}
