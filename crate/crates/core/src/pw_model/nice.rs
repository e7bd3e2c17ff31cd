//! Certification of nice families: every member's Newton image either leaves
//! the domain or lands strictly inside some member.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PiecewiseModel;
use crate::exact::{cmp_abs, ExactScalar};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fate {
    Escapes { image: ExactScalar },
    LandsIn { target: usize, point: ExactScalar },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NotNiceReason {
    OnBoundary,
    InGap,
    InNoMember,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NiceError {
    #[error("piece {piece_id} has Newton image {image} ({reason:?})")]
    NotNice { piece_id: usize, image: ExactScalar, reason: NotNiceReason },
    #[error("no piece with id {0}")]
    UnknownPiece(usize),
    #[error("members {first} and {second} intersect")]
    Overlap { first: usize, second: usize },
    #[error("stored fate of piece {piece_id} disagrees with recomputation")]
    FateMismatch { piece_id: usize },
}

impl NiceError {
    pub fn code(&self) -> &'static str {
        match self {
            NiceError::NotNice { .. } => "E_NOT_NICE",
            NiceError::UnknownPiece(_) => "E_UNKNOWN_PIECE",
            NiceError::Overlap { .. } => "E_OVERLAP",
            NiceError::FateMismatch { .. } => "E_FATE_MISMATCH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub piece_id: usize,
    pub lo: ExactScalar,
    pub hi: ExactScalar,
    pub fate: Fate,
}

impl FamilyMember {
    pub fn contains(&self, x: &ExactScalar) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interior(&self, x: &ExactScalar) -> bool {
        &self.lo < x && x < &self.hi
    }
}

/// Members sorted by left endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceFamily {
    pub members: Vec<FamilyMember>,
}

impl NiceFamily {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn piece_ids(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.piece_id).collect()
    }

    /// Member (closed) containing `x`.
    pub fn member_containing(&self, x: &ExactScalar) -> Option<&FamilyMember> {
        let idx = self.members.partition_point(|m| &m.hi < x);
        self.members.get(idx).filter(|m| m.contains(x))
    }

    pub fn member_by_piece(&self, piece_id: usize) -> Option<&FamilyMember> {
        // piece ids increase left to right, so members are sorted by id too
        let i = self.members.partition_point(|m| m.piece_id < piece_id);
        self.members.get(i).filter(|m| m.piece_id == piece_id)
    }

    pub fn contains(&self, x: &ExactScalar) -> bool {
        self.member_containing(x).is_some()
    }

    pub fn contains_interior(&self, x: &ExactScalar) -> bool {
        self.member_containing(x).is_some_and(|m| m.contains_interior(x))
    }

    /// Re-certifies the member list against `model` and checks the stored
    /// fates agree.
    pub fn recheck(&self, model: &PiecewiseModel) -> Result<(), NiceError> {
        let fresh = certify_nice(model, &self.piece_ids())?;
        for m in &self.members {
            let f = fresh.member_by_piece(m.piece_id).ok_or(NiceError::UnknownPiece(m.piece_id))?;
            if f != m {
                return Err(NiceError::FateMismatch { piece_id: m.piece_id });
            }
        }
        Ok(())
    }
}

/// Computes the fate of every listed piece and fails on the first image that
/// is neither escaping nor strictly inside a member.
pub fn certify_nice(model: &PiecewiseModel, member_ids: &[usize]) -> Result<NiceFamily, NiceError> {
    let mut ids = member_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut members = Vec::with_capacity(ids.len());
    for &id in &ids {
        let p = model.piece(id).ok_or(NiceError::UnknownPiece(id))?;
        members.push((id, p));
    }
    members.sort_by(|a, b| a.1.lo.cmp(&b.1.lo));
    for w in members.windows(2) {
        if w[0].1.hi >= w[1].1.lo {
            return Err(NiceError::Overlap { first: w[0].0, second: w[1].0 });
        }
    }
    let mut out = Vec::with_capacity(members.len());
    for &(id, p) in &members {
        let image = p.newton_image();
        let fate = if cmp_abs(&image, model.half_width()).is_gt() {
            Fate::Escapes { image }
        } else if let Some(&(target, _)) = members
            .get(members.partition_point(|(_, t)| t.hi <= image))
            .filter(|(_, t)| t.contains_interior(&image))
        {
            Fate::LandsIn { target, point: image }
        } else {
            let on_boundary = model.pieces().iter().any(|q| q.lo == image || q.hi == image);
            let in_gap = model.gaps().iter().any(|g| g.lo < image && image < g.hi);
            let reason = if on_boundary {
                NotNiceReason::OnBoundary
            } else if in_gap {
                NotNiceReason::InGap
            } else {
                NotNiceReason::InNoMember
            };
            return Err(NiceError::NotNice { piece_id: id, image, reason });
        };
        out.push(FamilyMember { piece_id: id, lo: p.lo.clone(), hi: p.hi.clone(), fate });
    }
    Ok(NiceFamily { members: out })
}

/// Exact total length of the members.
pub fn measure_union(family: &NiceFamily) -> Result<ExactScalar, NiceError> {
    let mut sorted: Vec<&FamilyMember> = family.members.iter().collect();
    sorted.sort_by(|a, b| a.lo.cmp(&b.lo));
    for w in sorted.windows(2) {
        if w[0].hi > w[1].lo {
            return Err(NiceError::Overlap { first: w[0].piece_id, second: w[1].piece_id });
        }
    }
    Ok(sorted.iter().map(|m| &m.hi - &m.lo).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;
    use crate::fixtures::two_cycle_model;
    use crate::pw_model::{AffinePiece, Cell, GapSpec, Line};

    fn member(lo: ExactScalar, hi: ExactScalar) -> FamilyMember {
        FamilyMember { piece_id: 0, lo, hi, fate: Fate::Escapes { image: q(0, 1) } }
    }

    #[test]
    fn two_cycle_is_nice() {
        let m = two_cycle_model();
        let fam = certify_nice(&m, &[1, 2]).unwrap();
        assert_eq!(fam.members[0].fate, Fate::LandsIn { target: 2, point: q(5, 2) });
        assert_eq!(fam.members[1].fate, Fate::LandsIn { target: 1, point: q(1, 2) });
    }

    #[test]
    fn escaping_piece() {
        let l = Line::new(q(1, 1), q(-4, 1));
        let m = PiecewiseModel::from_cells(
            q(2, 1),
            vec![
                Cell::Gap(GapSpec { lo: q(-2, 1), hi: q(0, 1), left: l.clone(), right: l.clone() }),
                Cell::Piece(AffinePiece::on_line(q(0, 1), q(1, 1), &l)),
                Cell::Gap(GapSpec { lo: q(1, 1), hi: q(2, 1), left: l.clone(), right: l }),
            ],
        )
        .unwrap();
        let fam = certify_nice(&m, &[0]).unwrap();
        assert_eq!(fam.members[0].fate, Fate::Escapes { image: q(4, 1) });
    }

    #[test]
    fn image_on_own_boundary_is_not_nice() {
        let l = Line::new(q(1, 1), q(-1, 1));
        let m = PiecewiseModel::from_cells(
            q(2, 1),
            vec![
                Cell::Gap(GapSpec { lo: q(-2, 1), hi: q(0, 1), left: l.clone(), right: l.clone() }),
                Cell::Piece(AffinePiece::on_line(q(0, 1), q(1, 1), &l)),
                Cell::Gap(GapSpec { lo: q(1, 1), hi: q(2, 1), left: l.clone(), right: l }),
            ],
        )
        .unwrap();
        let err = certify_nice(&m, &[0]).unwrap_err();
        assert_eq!(err, NiceError::NotNice { piece_id: 0, image: q(1, 1), reason: NotNiceReason::OnBoundary });
    }

    #[test]
    fn image_in_gap_and_in_no_member() {
        let m = two_cycle_model();
        // piece 0 ([-3,-1/2]) has image 5/2, inside piece 2 which is not a member
        let err = certify_nice(&m, &[0, 1]).unwrap_err();
        assert!(matches!(err, NiceError::NotNice { reason: NotNiceReason::InNoMember, .. }));
        let l = Line::new(q(1, 1), q(-3, 2));
        let m = PiecewiseModel::from_cells(
            q(2, 1),
            vec![
                Cell::Piece(AffinePiece::on_line(q(-2, 1), q(1, 1), &l)),
                Cell::Gap(GapSpec { lo: q(1, 1), hi: q(2, 1), left: l.clone(), right: l }),
            ],
        )
        .unwrap();
        let err = certify_nice(&m, &[0]).unwrap_err();
        assert!(matches!(err, NiceError::NotNice { reason: NotNiceReason::InGap, .. }));
    }

    #[test]
    fn measures() {
        let fam = NiceFamily { members: vec![member(q(0, 1), q(1, 1)), member(q(2, 1), q(7, 2))] };
        assert_eq!(measure_union(&fam).unwrap(), q(5, 2));
        assert_eq!(measure_union(&NiceFamily { members: vec![] }).unwrap(), q(0, 1));
        let fam = NiceFamily { members: vec![member(q(-1, 1), q(-1, 3)), member(q(0, 1), q(2, 3))] };
        assert_eq!(measure_union(&fam).unwrap(), q(4, 3));
        let bad = NiceFamily { members: vec![member(q(0, 1), q(1, 1)), member(q(1, 2), q(2, 1))] };
        assert!(measure_union(&bad).is_err());
    }
}
