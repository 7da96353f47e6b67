//! Output relations: how the output substring `z` is parsed out of `w`, and
//! which values of `f` make it correct.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::RegisterLayout;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    /// `K` triples `(x_{2i-1}, x_{2i}, y_i)`; correct iff all `2K` positions are
    /// distinct and `f(x_{2i-1}) = f(x_{2i}) = y_i ≠ ⊥`.
    Collision,
    /// `K` distinct positions; correct iff `f(x_i) = 1` for all `i`.
    KSearch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRelation {
    pub kind: RelationKind,
    pub k: usize,
    /// Index of the first workspace slot holding `z`.
    #[serde(default)]
    pub first_slot: usize,
}

impl OutputRelation {
    pub fn collision(k: usize) -> Self {
        Self {
            kind: RelationKind::Collision,
            k,
            first_slot: 0,
        }
    }

    pub fn ksearch(k: usize) -> Self {
        Self {
            kind: RelationKind::KSearch,
            k,
            first_slot: 0,
        }
    }

    /// Number of workspace slots making up `z`.
    pub fn width(&self) -> usize {
        match self.kind {
            RelationKind::Collision => 3 * self.k,
            RelationKind::KSearch => self.k,
        }
    }

    /// Checks that the layout has slots of the right alphabets where `z` lives.
    pub fn validate(&self, layout: &RegisterLayout) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("relation needs K >= 1".into()));
        }
        let slots = layout.slots();
        if self.first_slot + self.width() > slots.len() {
            return Err(Error::InvalidParameter(format!(
                "relation needs {} slots from index {}, layout has {}",
                self.width(),
                self.first_slot,
                slots.len()
            )));
        }
        let m = layout.m() as u32;
        let n = layout.n() as u32;
        for i in 0..self.width() {
            let expected = match self.kind {
                RelationKind::Collision if i % 3 == 2 => n + 1,
                _ => m,
            };
            let slot = &slots[self.first_slot + i];
            if slot.radix != expected {
                return Err(Error::InvalidParameter(format!(
                    "slot {} has radix {}, relation expects {expected}",
                    slot.name, slot.radix
                )));
            }
        }
        if self.kind == RelationKind::KSearch && layout.n() != 2 {
            return Err(Error::InvalidParameter(
                "K-search relation needs range {0,1}".into(),
            ));
        }
        Ok(())
    }

    /// Parses `z` from a key and returns the `(position, required value)` list,
    /// or `None` when `z` is malformed (repeated positions, `y = ⊥`). Such
    /// outputs are never correct.
    pub fn requirements(&self, layout: &RegisterLayout, key: u64) -> Option<Vec<(usize, u32)>> {
        let mut reqs = Vec::with_capacity(2 * self.k);
        match self.kind {
            RelationKind::Collision => {
                for i in 0..self.k {
                    let base = self.first_slot + 3 * i;
                    let x1 = layout.slot_value(key, base) as usize;
                    let x2 = layout.slot_value(key, base + 1) as usize;
                    let y = layout.slot_value(key, base + 2);
                    if y == layout.bot() {
                        return None;
                    }
                    reqs.push((x1, y));
                    reqs.push((x2, y));
                }
            }
            RelationKind::KSearch => {
                for i in 0..self.k {
                    reqs.push((layout.slot_value(key, self.first_slot + i) as usize, 1));
                }
            }
        }
        let mut positions: Vec<usize> = reqs.iter().map(|r| r.0).collect();
        positions.sort_unstable();
        if positions.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some(reqs)
    }

    /// `R(f, z)` for a full input `f` (no `⊥` entries).
    pub fn holds(&self, layout: &RegisterLayout, key: u64) -> bool {
        self.requirements(layout, key)
            .map(|reqs| reqs.iter().all(|&(x, y)| layout.f_value(key, x) == y))
            .unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::BasisComponent;

    #[test]
    fn collision_requirements() {
        let l = RegisterLayout::collision(4, 3, 1, &[]).unwrap();
        let r = OutputRelation::collision(1);
        r.validate(&l).unwrap();
        let mk = |w: Vec<u32>, f: Vec<u32>| l.encode(&BasisComponent { x: 0, p: 0, w, f }).unwrap();
        assert!(r.holds(&l, mk(vec![0, 2, 1], vec![1, 0, 1, 2])));
        assert!(!r.holds(&l, mk(vec![0, 2, 0], vec![1, 0, 1, 2])));
        // same position twice
        assert!(r
            .requirements(&l, mk(vec![1, 1, 1], vec![1, 1, 1, 1]))
            .is_none());
        // y = ⊥
        assert!(r
            .requirements(&l, mk(vec![0, 1, 3], vec![1, 1, 1, 1]))
            .is_none());
    }

    #[test]
    fn ksearch_requirements() {
        let l = RegisterLayout::ksearch(4, 2, &[]).unwrap();
        let r = OutputRelation::ksearch(2);
        r.validate(&l).unwrap();
        let mk = |w: Vec<u32>, f: Vec<u32>| l.encode(&BasisComponent { x: 0, p: 0, w, f }).unwrap();
        assert!(r.holds(&l, mk(vec![3, 1], vec![0, 1, 0, 1])));
        assert!(!r.holds(&l, mk(vec![3, 2], vec![0, 1, 0, 1])));
        assert!(!r.holds(&l, mk(vec![1, 1], vec![0, 1, 0, 1])));
    }

    #[test]
    fn validate_rejects_wrong_slots() {
        let l = RegisterLayout::ksearch(4, 1, &[]).unwrap();
        assert!(OutputRelation::collision(1).validate(&l).is_err());
        assert!(OutputRelation::ksearch(2).validate(&l).is_err());
    }
}
