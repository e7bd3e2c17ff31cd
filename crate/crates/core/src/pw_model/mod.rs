//! C¹ functions on `[−M, M]` that are affine on finitely many closed pieces and
//! bridged by cubic Hermite blends on the gaps between them.

mod bridge;
mod io;
mod nice;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bridge::{HermiteCubic, Line};
pub use io::{model_from_json, model_to_json, ModelFile};
pub use nice::{certify_nice, measure_union, FamilyMember, Fate, NiceError, NiceFamily, NotNiceReason};

use crate::exact::ExactScalar;
use crate::poly::{default_sup_tolerance, D1Parts, PiecewisePoly, Poly};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffinePiece {
    pub lo: ExactScalar,
    pub hi: ExactScalar,
    #[serde(rename = "a")]
    pub slope_a: ExactScalar,
    #[serde(rename = "b")]
    pub intercept_b: ExactScalar,
}

impl AffinePiece {
    pub fn new(lo: ExactScalar, hi: ExactScalar, slope_a: ExactScalar, intercept_b: ExactScalar) -> Self {
        Self { lo, hi, slope_a, intercept_b }
    }

    pub fn on_line(lo: ExactScalar, hi: ExactScalar, line: &Line) -> Self {
        Self::new(lo, hi, line.a.clone(), line.b.clone())
    }

    pub fn line(&self) -> Line {
        Line::new(self.slope_a.clone(), self.intercept_b.clone())
    }

    /// Root of the piece's line; the Newton image of every point of the piece.
    pub fn newton_image(&self) -> ExactScalar {
        -(&self.intercept_b) / &self.slope_a
    }

    pub fn contains(&self, x: &ExactScalar) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interior(&self, x: &ExactScalar) -> bool {
        &self.lo < x && x < &self.hi
    }

    pub fn length(&self) -> ExactScalar {
        &self.hi - &self.lo
    }
}

/// Free `newton_image_of_piece` form.
pub fn newton_image_of_piece(piece: &AffinePiece) -> ExactScalar {
    piece.newton_image()
}

/// Gap boundary data as stored in files; the bridge is always re-derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapSpec {
    pub lo: ExactScalar,
    pub hi: ExactScalar,
    pub left: Line,
    pub right: Line,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapBlend {
    pub lo: ExactScalar,
    pub hi: ExactScalar,
    pub left_line: Line,
    pub right_line: Line,
    pub bridge: HermiteCubic,
    pub derivative_range: (ExactScalar, ExactScalar),
}

impl GapBlend {
    pub fn new(spec: GapSpec) -> Self {
        let bridge = HermiteCubic::bridge(&spec.lo, &spec.hi, &spec.left, &spec.right);
        let derivative_range = bridge.derivative_range(&(&spec.hi - &spec.lo));
        Self { lo: spec.lo, hi: spec.hi, left_line: spec.left, right_line: spec.right, bridge, derivative_range }
    }

    pub fn spec(&self) -> GapSpec {
        GapSpec {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            left: self.left_line.clone(),
            right: self.right_line.clone(),
        }
    }

    pub fn eval(&self, x: &ExactScalar) -> ExactScalar {
        self.bridge.eval_local(&(x - &self.lo))
    }

    pub fn eval_derivative(&self, x: &ExactScalar) -> ExactScalar {
        self.bridge.derivative_local(&(x - &self.lo))
    }

    /// Whether the bridge slope stays between the two junction slopes.
    pub fn derivative_within_hull(&self) -> bool {
        let lo = self.left_line.a.clone().min(self.right_line.a.clone());
        let hi = self.left_line.a.clone().max(self.right_line.a.clone());
        self.derivative_range.0 >= lo && self.derivative_range.1 <= hi
    }
}

/// One cell of a model in left-to-right order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cell {
    Piece(AffinePiece),
    Gap(GapSpec),
}

impl Cell {
    pub fn lo(&self) -> &ExactScalar {
        match self {
            Cell::Piece(p) => &p.lo,
            Cell::Gap(g) => &g.lo,
        }
    }

    pub fn hi(&self) -> &ExactScalar {
        match self {
            Cell::Piece(p) => &p.hi,
            Cell::Gap(g) => &g.hi,
        }
    }

    /// The cell's polynomial in the global variable.
    pub fn to_poly(&self) -> Poly {
        match self {
            Cell::Piece(p) => p.line().to_poly(),
            Cell::Gap(g) => HermiteCubic::bridge(&g.lo, &g.hi, &g.left, &g.right).to_poly(&g.lo),
        }
    }

    fn left_line(&self) -> Line {
        match self {
            Cell::Piece(p) => p.line(),
            Cell::Gap(g) => g.left.clone(),
        }
    }

    fn right_line(&self) -> Line {
        match self {
            Cell::Piece(p) => p.line(),
            Cell::Gap(g) => g.right.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum SegmentRef {
    Piece(usize),
    Gap(usize),
}

/// Where a point sits inside a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// In the closed piece (pieces win ties at junctions).
    Piece(usize),
    GapInterior(usize),
    /// On an endpoint of a gap that is not also in a piece.
    GapBoundary(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("half-width M must be positive, got {0}")]
    NonPositiveHalfWidth(ExactScalar),
    #[error("degenerate cell [{lo}, {hi}]")]
    DegenerateCell { lo: ExactScalar, hi: ExactScalar },
    #[error("piece [{lo}, {hi}] has zero slope")]
    ZeroSlope { lo: ExactScalar, hi: ExactScalar },
    #[error("cells do not tile [-M, M]: expected a cell starting at {expected}, found {found}")]
    Coverage { expected: ExactScalar, found: ExactScalar },
    #[error("function is not C1 at junction {at}")]
    Junction { at: ExactScalar },
    #[error("point {x} outside [-{m}, {m}]")]
    OutOfDomain { x: ExactScalar, m: ExactScalar },
    #[error("models have different half-widths {left} and {right}")]
    DomainMismatch { left: ExactScalar, right: ExactScalar },
    #[error("model has no cells")]
    Empty,
    #[error("malformed model document: {0}")]
    Parse(String),
}

impl ModelError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::NonPositiveHalfWidth(_) => "E_HALF_WIDTH",
            ModelError::DegenerateCell { .. } => "E_DEGENERATE_PIECE",
            ModelError::ZeroSlope { .. } => "E_ZERO_SLOPE",
            ModelError::Coverage { .. } => "E_COVERAGE",
            ModelError::Junction { .. } => "E_JUNCTION",
            ModelError::OutOfDomain { .. } => "E_OUT_OF_DOMAIN",
            ModelError::DomainMismatch { .. } => "E_DOMAIN_MISMATCH",
            ModelError::Empty => "E_EMPTY",
            ModelError::Parse(_) => "E_PARSE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseModel {
    half_width_m: ExactScalar,
    pieces: Vec<AffinePiece>,
    gaps: Vec<GapBlend>,
    segments: Vec<SegmentRef>,
}

impl PiecewiseModel {
    /// Builds and validates a model from cells listed left to right.
    pub fn from_cells(half_width_m: ExactScalar, cells: Vec<Cell>) -> Result<Self, ModelError> {
        if !half_width_m.is_positive() {
            return Err(ModelError::NonPositiveHalfWidth(half_width_m));
        }
        if cells.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut expected = -&half_width_m;
        let mut prev: Option<&Cell> = None;
        for cell in &cells {
            if cell.lo() != &expected {
                return Err(ModelError::Coverage { expected, found: cell.lo().clone() });
            }
            if cell.lo() >= cell.hi() {
                return Err(ModelError::DegenerateCell { lo: cell.lo().clone(), hi: cell.hi().clone() });
            }
            if let Cell::Piece(p) = cell {
                if p.slope_a.is_zero() {
                    return Err(ModelError::ZeroSlope { lo: p.lo.clone(), hi: p.hi.clone() });
                }
            }
            if let Some(prev) = prev {
                // equal value and slope at a point means identical lines
                if prev.right_line() != cell.left_line() {
                    return Err(ModelError::Junction { at: cell.lo().clone() });
                }
            }
            expected = cell.hi().clone();
            prev = Some(cell);
        }
        if expected != half_width_m {
            return Err(ModelError::Coverage { expected, found: half_width_m });
        }
        let mut pieces = Vec::new();
        let mut gaps = Vec::new();
        let mut segments = Vec::with_capacity(cells.len());
        for cell in cells {
            match cell {
                Cell::Piece(p) => {
                    segments.push(SegmentRef::Piece(pieces.len()));
                    pieces.push(p);
                }
                Cell::Gap(g) => {
                    segments.push(SegmentRef::Gap(gaps.len()));
                    gaps.push(GapBlend::new(g));
                }
            }
        }
        Ok(Self { half_width_m, pieces, gaps, segments })
    }

    /// Builds a model from separate piece and gap lists (each sorted by `lo`).
    pub fn new(half_width_m: ExactScalar, pieces: Vec<AffinePiece>, gaps: Vec<GapSpec>) -> Result<Self, ModelError> {
        let mut cells: Vec<Cell> = pieces.into_iter().map(Cell::Piece).chain(gaps.into_iter().map(Cell::Gap)).collect();
        cells.sort_by(|a, b| a.lo().cmp(b.lo()));
        Self::from_cells(half_width_m, cells)
    }

    /// Single affine piece spanning the whole domain.
    pub fn affine(half_width_m: ExactScalar, line: &Line) -> Result<Self, ModelError> {
        let piece = AffinePiece::on_line(-&half_width_m, half_width_m.clone(), line);
        Self::from_cells(half_width_m, vec![Cell::Piece(piece)])
    }

    pub fn half_width(&self) -> &ExactScalar {
        &self.half_width_m
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn piece(&self, id: usize) -> Option<&AffinePiece> {
        self.pieces.get(id)
    }

    pub fn gaps(&self) -> &[GapBlend] {
        &self.gaps
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.segments
            .iter()
            .map(|s| match *s {
                SegmentRef::Piece(i) => Cell::Piece(self.pieces[i].clone()),
                SegmentRef::Gap(i) => Cell::Gap(self.gaps[i].spec()),
            })
            .collect()
    }

    fn segment_bounds(&self, s: SegmentRef) -> (&ExactScalar, &ExactScalar) {
        match s {
            SegmentRef::Piece(i) => (&self.pieces[i].lo, &self.pieces[i].hi),
            SegmentRef::Gap(i) => (&self.gaps[i].lo, &self.gaps[i].hi),
        }
    }

    pub fn in_domain(&self, x: &ExactScalar) -> bool {
        x >= &-&self.half_width_m && x <= &self.half_width_m
    }

    fn check_domain(&self, x: &ExactScalar) -> Result<(), ModelError> {
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(ModelError::OutOfDomain { x: x.clone(), m: self.half_width_m.clone() })
        }
    }

    pub fn locate(&self, x: &ExactScalar) -> Result<Location, ModelError> {
        self.check_domain(x)?;
        // first segment whose hi ≥ x
        let idx = self.segments.partition_point(|s| self.segment_bounds(*s).1 < x);
        let seg = self.segments[idx];
        let (lo, hi) = self.segment_bounds(seg);
        match seg {
            SegmentRef::Piece(i) => Ok(Location::Piece(i)),
            SegmentRef::Gap(i) => {
                if x > lo && x < hi {
                    return Ok(Location::GapInterior(i));
                }
                // x == hi: the next segment may be a piece
                if x == hi {
                    if let Some(SegmentRef::Piece(j)) = self.segments.get(idx + 1) {
                        return Ok(Location::Piece(*j));
                    }
                }
                Ok(Location::GapBoundary(i))
            }
        }
    }

    /// Piece containing `x` (closed), if any.
    pub fn piece_containing(&self, x: &ExactScalar) -> Option<usize> {
        match self.locate(x) {
            Ok(Location::Piece(i)) => Some(i),
            _ => None,
        }
    }

    pub fn eval(&self, x: &ExactScalar) -> Result<ExactScalar, ModelError> {
        Ok(match self.locate(x)? {
            Location::Piece(i) => self.pieces[i].line().eval(x),
            Location::GapInterior(i) | Location::GapBoundary(i) => self.gaps[i].eval(x),
        })
    }

    pub fn eval_derivative(&self, x: &ExactScalar) -> Result<ExactScalar, ModelError> {
        Ok(match self.locate(x)? {
            Location::Piece(i) => self.pieces[i].slope_a.clone(),
            Location::GapInterior(i) | Location::GapBoundary(i) => self.gaps[i].eval_derivative(x),
        })
    }

    pub fn to_piecewise_poly(&self) -> PiecewisePoly {
        let mut breaks = vec![-&self.half_width_m];
        let mut polys = Vec::with_capacity(self.segments.len());
        for s in &self.segments {
            let (_, hi) = self.segment_bounds(*s);
            breaks.push(hi.clone());
            polys.push(match *s {
                SegmentRef::Piece(i) => self.pieces[i].line().to_poly(),
                SegmentRef::Gap(i) => self.gaps[i].bridge.to_poly(&self.gaps[i].lo),
            });
        }
        PiecewisePoly::new(breaks, polys)
    }

    /// Total length of the gaps.
    pub fn gap_measure(&self) -> ExactScalar {
        self.gaps.iter().map(|g| &g.hi - &g.lo).sum()
    }
}

/// Certified upper bounds on the two halves of d₁ between piecewise polynomials.
pub fn d1_parts(a: &PiecewisePoly, b: &PiecewisePoly) -> D1Parts {
    a.d1_parts(b, &default_sup_tolerance())
}

/// Certified upper bound on `sup|m1 − m2| + sup|m1′ − m2′|` over `[−M, M]`.
pub fn d1_upper_bound(m1: &PiecewiseModel, m2: &PiecewiseModel) -> Result<ExactScalar, ModelError> {
    if m1.half_width() != m2.half_width() {
        return Err(ModelError::DomainMismatch { left: m1.half_width().clone(), right: m2.half_width().clone() });
    }
    Ok(d1_parts(&m1.to_piecewise_poly(), &m2.to_piecewise_poly()).total())
}

/// d₁ bound restricted to `[lo, hi]`.
pub fn d1_upper_bound_on(
    m1: &PiecewiseModel,
    m2: &PiecewiseModel,
    lo: &ExactScalar,
    hi: &ExactScalar,
) -> Result<ExactScalar, ModelError> {
    if m1.half_width() != m2.half_width() {
        return Err(ModelError::DomainMismatch { left: m1.half_width().clone(), right: m2.half_width().clone() });
    }
    let a = m1.to_piecewise_poly().restrict(lo, hi);
    let b = m2.to_piecewise_poly().restrict(lo, hi);
    Ok(d1_parts(&a, &b).total())
}
