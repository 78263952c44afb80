//! Dynamic set of active bonds with O(1) insert, swap-remove and uniform pick.

/// Sparse set over `0..capacity`: a dense member array plus a position
/// index. `b` is a member iff `position[b] < len && members[position[b]] == b`,
/// so removal never has to clear the stale index entry.
#[derive(Debug, Clone)]
pub struct ActiveBonds {
    members: Vec<u32>,
    position: Vec<u32>,
    len: usize,
}

impl PartialEq for ActiveBonds {
    fn eq(&self, other: &Self) -> bool {
        self.position.len() == other.position.len() && self.sorted() == other.sorted()
    }
}

impl Eq for ActiveBonds {}

impl ActiveBonds {
    /// Empty set able to hold bonds `0..capacity`.
    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity < u32::MAX as usize, "bond index space exceeds u32");
        let capacity = capacity.max(1);
        Self { members: vec![0; capacity], position: vec![0; capacity], len: 0 }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn contains(&self, bond: usize) -> bool {
        match self.position.get(bond) {
            Some(&p) => (p as usize) < self.len && self.members[p as usize] as usize == bond,
            None => false,
        }
    }

    pub fn insert(&mut self, bond: usize) -> bool {
        assert!(bond < self.position.len(), "bond {bond} out of range");
        if self.contains(bond) {
            return false;
        }
        // SAFETY: in range and currently absent
        unsafe { self.set_unchecked(bond, true) };
        true
    }

    pub fn remove(&mut self, bond: usize) -> bool {
        if !self.contains(bond) {
            return false;
        }
        // SAFETY: present implies in range
        unsafe { self.set_unchecked(bond, false) };
        true
    }

    pub fn toggle(&mut self, bond: usize) {
        if !self.remove(bond) {
            self.insert(bond);
        }
    }

    /// Make `bond` a member (`active`) or not. The caller guarantees the
    /// current membership is the opposite. Branch-free: insertion writes
    /// `bond` into slot `len`, removal moves the last member into the hole.
    ///
    /// # Safety
    /// `bond < capacity` and its membership differs from `active`.
    #[inline]
    pub(crate) unsafe fn set_unchecked(&mut self, bond: usize, active: bool) {
        debug_assert!(bond < self.position.len());
        debug_assert_ne!(self.contains(bond), active);
        let len = self.len;
        let members = self.members.as_mut_slice();
        let position = self.position.as_mut_slice();
        // SAFETY: len <= capacity, and when `active` is false the set is
        // nonempty so len - 1 is a valid slot; positions of members are < len.
        unsafe {
            let last = *members.get_unchecked(len.saturating_sub(1));
            let held = *position.get_unchecked(bond);
            // bit-select rather than `if`: the branch would be a coin flip
            let mask = (active as u32).wrapping_neg();
            let slot = (len as u32 & mask) | (held & !mask);
            let value = (bond as u32 & mask) | (last & !mask);
            *members.get_unchecked_mut(slot as usize) = value;
            *position.get_unchecked_mut(value as usize) = slot;
        }
        self.len = if active { len + 1 } else { len - 1 };
    }

    /// Member stored at `slot`; `slot < len()`. Uniform slot gives a uniform bond.
    #[inline]
    pub fn at(&self, slot: usize) -> usize {
        assert!(slot < self.len);
        // SAFETY: checked above, len <= members.len()
        unsafe { *self.members.get_unchecked(slot) as usize }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members[..self.len].iter().map(|&b| b as usize)
    }

    /// Members in increasing order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.iter().collect();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn swap_remove_keeps_index_consistent() {
        let mut s = ActiveBonds::with_capacity(8);
        for b in [1, 3, 5, 7] {
            assert!(s.insert(b));
        }
        assert!(!s.insert(3));
        assert!(s.remove(1));
        assert!(!s.remove(1));
        assert_eq!(s.sorted(), vec![3, 5, 7]);
        for slot in 0..s.len() {
            assert!(s.contains(s.at(slot)));
        }
        s.toggle(3);
        s.toggle(2);
        assert_eq!(s.sorted(), vec![2, 5, 7]);
    }

    proptest! {
        #[test]
        fn matches_btreeset(ops in prop::collection::vec((0usize..32, any::<bool>()), 0..400)) {
            let mut s = ActiveBonds::with_capacity(32);
            let mut reference = BTreeSet::new();
            for (b, ins) in ops {
                if ins {
                    prop_assert_eq!(s.insert(b), reference.insert(b));
                } else {
                    prop_assert_eq!(s.remove(b), reference.remove(&b));
                }
                prop_assert_eq!(s.len(), reference.len());
            }
            prop_assert_eq!(s.sorted(), reference.into_iter().collect::<Vec<_>>());
        }
    }
}
