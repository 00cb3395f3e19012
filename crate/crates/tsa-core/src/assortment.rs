use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// A set of option ids drawn from a universe of at most 64 options.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Assortment(u64);

pub const MAX_UNIVERSE: usize = 64;

impl Assortment {
    pub const EMPTY: Assortment = Assortment(0);

    pub fn from_bits(bits: u64) -> Self {
        Assortment(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn full(n: usize) -> Self {
        if n >= 64 {
            Assortment(u64::MAX)
        } else {
            Assortment((1u64 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        Assortment(1u64 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        it.into_iter().fold(Self::EMPTY, |a, i| a.with(i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        Assortment(self.0 | 1u64 << i)
    }

    pub fn without(self, i: usize) -> Self {
        Assortment(self.0 & !(1u64 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, o: Self) -> Self {
        Assortment(self.0 | o.0)
    }

    pub fn intersect(self, o: Self) -> Self {
        Assortment(self.0 & o.0)
    }

    pub fn minus(self, o: Self) -> Self {
        Assortment(self.0 & !o.0)
    }

    pub fn is_subset(self, o: Self) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn iter(self) -> Members {
        Members(self.0)
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Every subset of `self`, including empty and `self`, in increasing bit order.
    pub fn subsets(self) -> Subsets {
        Subsets {
            set: self.0,
            next: Some(0),
        }
    }

    /// Lexicographic comparison on the sorted member lists.
    pub fn lex_cmp(self, o: Self) -> std::cmp::Ordering {
        self.iter().cmp(o.iter())
    }
}

pub struct Members(u64);

impl Iterator for Members {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

pub struct Subsets {
    set: u64,
    next: Option<u64>,
}

impl Iterator for Subsets {
    type Item = Assortment;
    fn next(&mut self) -> Option<Assortment> {
        let cur = self.next?;
        self.next = if cur == self.set {
            None
        } else {
            Some((cur.wrapping_sub(self.set)) & self.set)
        };
        Some(Assortment(cur))
    }
}

impl fmt::Debug for Assortment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for Assortment {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for Assortment {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        if let Some(&bad) = v.iter().find(|&&i| i >= MAX_UNIVERSE) {
            return Err(serde::de::Error::custom(format!(
                "option id {bad} exceeds 63"
            )));
        }
        Ok(Assortment::from_indices(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_cover_powerset() {
        let s = Assortment::from_indices([1, 3, 4]);
        let all: Vec<_> = s.subsets().collect();
        assert_eq!(all.len(), 8);
        assert!(all.iter().all(|x| x.is_subset(s)));
        assert_eq!(all[0], Assortment::EMPTY);
        assert_eq!(*all.last().unwrap(), s);
    }

    #[test]
    fn members_ascending() {
        let s = Assortment::from_indices([5, 0, 2]);
        assert_eq!(s.to_vec(), vec![0, 2, 5]);
        assert_eq!(s.len(), 3);
        assert!(s.contains(2) && !s.contains(1));
    }

    #[test]
    fn lex_order() {
        let a = Assortment::from_indices([0, 3]);
        let b = Assortment::from_indices([1]);
        assert_eq!(a.lex_cmp(b), std::cmp::Ordering::Less);
    }
}
