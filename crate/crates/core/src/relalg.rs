//! Finite sets and binary relations over the events of one execution.
//!
//! Both types are bitsets: an [`EventSet`] is a single `u64` mask and a
//! [`Relation`] is an adjacency matrix with one `u64` row per event. Every
//! value carries the size of its universe, and binary operations refuse to
//! mix universes. Complements are always taken relative to the universe of
//! the operand (`E` for sets, `E x E` for relations).

use std::fmt;

use thiserror::Error;

/// Largest supported number of events in a single execution.
pub const MAX_EVENTS: usize = 64;

/// Dense event identifier, an index into the owning execution's event table.
pub type EventId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelError {
    #[error("universe mismatch: {left} events vs {right} events")]
    UniverseMismatch { left: usize, right: usize },
    #[error("execution has {0} events, at most {MAX_EVENTS} are supported")]
    TooManyEvents(usize),
    #[error("event {event} is outside a universe of {universe} events")]
    OutOfRange { event: EventId, universe: usize },
}

pub type Result<T> = std::result::Result<T, RelError>;

fn check_universe(n: usize) -> Result<()> {
    if n > MAX_EVENTS {
        Err(RelError::TooManyEvents(n))
    } else {
        Ok(())
    }
}

fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn same(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(RelError::UniverseMismatch { left, right })
    }
}

/// Iterator over the set bits of a mask, lowest first.
#[derive(Clone)]
pub struct Bits(u64);

impl Iterator for Bits {
    type Item = EventId;

    fn next(&mut self) -> Option<EventId> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventSet {
    universe: usize,
    bits: u64,
}

impl EventSet {
    pub fn empty(universe: usize) -> Result<Self> {
        check_universe(universe)?;
        Ok(EventSet { universe, bits: 0 })
    }

    pub fn full(universe: usize) -> Result<Self> {
        check_universe(universe)?;
        Ok(EventSet {
            universe,
            bits: full_mask(universe),
        })
    }

    pub fn from_events<I: IntoIterator<Item = EventId>>(universe: usize, events: I) -> Result<Self> {
        let mut s = EventSet::empty(universe)?;
        for e in events {
            s.insert(e)?;
        }
        Ok(s)
    }

    /// Build a set from a raw mask. Bits beyond the universe are dropped.
    pub fn from_mask(universe: usize, mask: u64) -> Result<Self> {
        check_universe(universe)?;
        Ok(EventSet {
            universe,
            bits: mask & full_mask(universe),
        })
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn mask(&self) -> u64 {
        self.bits
    }

    pub fn insert(&mut self, e: EventId) -> Result<()> {
        if e >= self.universe {
            return Err(RelError::OutOfRange {
                event: e,
                universe: self.universe,
            });
        }
        self.bits |= 1 << e;
        Ok(())
    }

    pub fn contains(&self, e: EventId) -> bool {
        e < self.universe && self.bits & (1 << e) != 0
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn iter(&self) -> Bits {
        Bits(self.bits)
    }

    pub fn union(&self, other: &EventSet) -> Result<EventSet> {
        same(self.universe, other.universe)?;
        Ok(EventSet {
            universe: self.universe,
            bits: self.bits | other.bits,
        })
    }

    pub fn intersection(&self, other: &EventSet) -> Result<EventSet> {
        same(self.universe, other.universe)?;
        Ok(EventSet {
            universe: self.universe,
            bits: self.bits & other.bits,
        })
    }

    pub fn difference(&self, other: &EventSet) -> Result<EventSet> {
        same(self.universe, other.universe)?;
        Ok(EventSet {
            universe: self.universe,
            bits: self.bits & !other.bits,
        })
    }

    pub fn complement(&self) -> EventSet {
        EventSet {
            universe: self.universe,
            bits: !self.bits & full_mask(self.universe),
        }
    }

    pub fn is_subset(&self, other: &EventSet) -> bool {
        self.bits & !other.bits == 0
    }

    /// `[s]`: the identity relation restricted to this set.
    pub fn identity(&self) -> Relation {
        let mut r = Relation::empty_unchecked(self.universe);
        for e in self.iter() {
            r.rows[e] |= 1 << e;
        }
        r
    }

    /// `s1 * s2`: the cartesian product.
    pub fn product(&self, other: &EventSet) -> Result<Relation> {
        same(self.universe, other.universe)?;
        let mut r = Relation::empty_unchecked(self.universe);
        for e in self.iter() {
            r.rows[e] = other.bits;
        }
        Ok(r)
    }
}

impl fmt::Debug for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A binary relation over `0..universe`, stored as an adjacency matrix.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    rows: Vec<u64>,
}

impl Relation {
    fn empty_unchecked(universe: usize) -> Self {
        Relation {
            rows: vec![0; universe],
        }
    }

    pub fn empty(universe: usize) -> Result<Self> {
        check_universe(universe)?;
        Ok(Self::empty_unchecked(universe))
    }

    /// `E x E`.
    pub fn full(universe: usize) -> Result<Self> {
        check_universe(universe)?;
        Ok(Relation {
            rows: vec![full_mask(universe); universe],
        })
    }

    /// `id` over the whole universe.
    pub fn identity(universe: usize) -> Result<Self> {
        Ok(EventSet::full(universe)?.identity())
    }

    pub fn from_pairs<I: IntoIterator<Item = (EventId, EventId)>>(universe: usize, pairs: I) -> Result<Self> {
        let mut r = Relation::empty(universe)?;
        for (a, b) in pairs {
            r.insert(a, b)?;
        }
        Ok(r)
    }

    /// Strict total order following the sequence `order[0] < order[1] < ...`.
    pub fn total_order(universe: usize, order: &[EventId]) -> Result<Self> {
        let mut r = Relation::empty(universe)?;
        let mut before = 0u64;
        for &e in order {
            if e >= universe {
                return Err(RelError::OutOfRange { event: e, universe });
            }
            for a in Bits(before) {
                r.rows[a] |= 1 << e;
            }
            before |= 1 << e;
        }
        Ok(r)
    }

    pub fn universe(&self) -> usize {
        self.rows.len()
    }

    pub fn insert(&mut self, a: EventId, b: EventId) -> Result<()> {
        let n = self.universe();
        for e in [a, b] {
            if e >= n {
                return Err(RelError::OutOfRange { event: e, universe: n });
            }
        }
        self.rows[a] |= 1 << b;
        Ok(())
    }

    pub fn remove(&mut self, a: EventId, b: EventId) {
        if a < self.universe() && b < self.universe() {
            self.rows[a] &= !(1 << b);
        }
    }

    pub fn contains(&self, a: EventId, b: EventId) -> bool {
        a < self.universe() && b < self.universe() && self.rows[a] & (1 << b) != 0
    }

    /// Successors of `a` as a raw mask.
    pub fn row(&self, a: EventId) -> u64 {
        self.rows[a]
    }

    pub fn successors(&self, a: EventId) -> Bits {
        Bits(self.rows[a])
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(|&r| r == 0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (EventId, EventId)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(a, &row)| Bits(row).map(move |b| (a, b)))
    }

    pub fn domain(&self) -> EventSet {
        let mut bits = 0;
        for (a, &row) in self.rows.iter().enumerate() {
            if row != 0 {
                bits |= 1 << a;
            }
        }
        EventSet {
            universe: self.universe(),
            bits,
        }
    }

    pub fn range(&self) -> EventSet {
        EventSet {
            universe: self.universe(),
            bits: self.rows.iter().fold(0, |acc, r| acc | r),
        }
    }

    fn zip_with(&self, other: &Relation, f: impl Fn(u64, u64) -> u64) -> Result<Relation> {
        same(self.universe(), other.universe())?;
        Ok(Relation {
            rows: self.rows.iter().zip(&other.rows).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn union(&self, other: &Relation) -> Result<Relation> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Relation) -> Result<Relation> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Relation) -> Result<Relation> {
        self.zip_with(other, |a, b| a & !b)
    }

    /// `~r`, relative to `E x E`.
    pub fn complement(&self) -> Relation {
        let mask = full_mask(self.universe());
        Relation {
            rows: self.rows.iter().map(|&r| !r & mask).collect(),
        }
    }

    /// `r1 ; r2`.
    pub fn compose(&self, other: &Relation) -> Result<Relation> {
        same(self.universe(), other.universe())?;
        Ok(Relation {
            rows: self
                .rows
                .iter()
                .map(|&row| Bits(row).fold(0, |acc, y| acc | other.rows[y]))
                .collect(),
        })
    }

    /// `r^-1`.
    pub fn inverse(&self) -> Relation {
        let mut r = Self::empty_unchecked(self.universe());
        for (a, b) in self.pairs() {
            r.rows[b] |= 1 << a;
        }
        r
    }

    /// `r?`: `r | id`.
    pub fn reflexive_closure(&self) -> Relation {
        let mut r = self.clone();
        for (i, row) in r.rows.iter_mut().enumerate() {
            *row |= 1 << i;
        }
        r
    }

    /// `r+`, by Warshall's algorithm on the bit matrix.
    pub fn transitive_closure(&self) -> Relation {
        let mut rows = self.rows.clone();
        for k in 0..rows.len() {
            let row_k = rows[k];
            let bit = 1u64 << k;
            for row in rows.iter_mut() {
                if *row & bit != 0 {
                    *row |= row_k;
                }
            }
        }
        Relation { rows }
    }

    /// Restrict both endpoints to `s`: `[s] ; r ; [s]`.
    pub fn restrict(&self, s: &EventSet) -> Result<Relation> {
        same(self.universe(), s.universe())?;
        Ok(Relation {
            rows: self
                .rows
                .iter()
                .enumerate()
                .map(|(a, &row)| if s.contains(a) { row & s.bits } else { 0 })
                .collect(),
        })
    }

    pub fn is_irreflexive(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, &row)| row & (1 << i) == 0)
    }

    pub fn is_acyclic(&self) -> bool {
        // Kahn-style peeling: repeatedly drop events with no remaining predecessor.
        let n = self.universe();
        let mut remaining = full_mask(n);
        loop {
            let mut has_pred = 0u64;
            for a in Bits(remaining) {
                has_pred |= self.rows[a] & remaining;
            }
            let sources = remaining & !has_pred;
            if sources == 0 {
                return remaining == 0;
            }
            remaining &= !sources;
        }
    }

    pub fn is_transitive(&self) -> bool {
        self.compose(self)
            .map(|c| c.is_subset(self))
            .unwrap_or(false)
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.universe() == other.universe() && self.rows.iter().zip(&other.rows).all(|(&a, &b)| a & !b == 0)
    }

    /// Strict total order on exactly the events of `s`.
    pub fn is_strict_total_order_on(&self, s: &EventSet) -> bool {
        let Ok(sym) = self.union(&self.inverse()) else {
            return false;
        };
        let expected = s.product(s).and_then(|p| p.difference(&Relation::identity(s.universe)?));
        matches!(expected, Ok(e) if e == sym) && self.is_acyclic()
    }
}

/// A denotation in the model language: either a set or a relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Set(EventSet),
    Rel(Relation),
}

impl Value {
    pub fn as_set(&self) -> Option<&EventSet> {
        match self {
            Value::Set(s) => Some(s),
            Value::Rel(_) => None,
        }
    }

    pub fn as_rel(&self) -> Option<&Relation> {
        match self {
            Value::Rel(r) => Some(r),
            Value::Set(_) => None,
        }
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(n: usize, pairs: &[(usize, usize)]) -> Relation {
        Relation::from_pairs(n, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn compose_unfolds_definition() {
        assert_eq!(rel(4, &[(1, 2)]).compose(&rel(4, &[(2, 3)])).unwrap(), rel(4, &[(1, 3)]));
        assert!(rel(4, &[(1, 2)]).compose(&rel(4, &[])).unwrap().is_empty());
    }

    #[test]
    fn path_reading_of_lifted_sets() {
        // [s1];r1;[s2];r2;[s3] keeps only s1 -> s2 -> s3 paths.
        let r1 = rel(6, &[(0, 1), (0, 2), (3, 2)]);
        let r2 = rel(6, &[(1, 4), (2, 5)]);
        let s1 = EventSet::from_events(6, [0]).unwrap().identity();
        let s2 = EventSet::from_events(6, [2]).unwrap().identity();
        let s3 = EventSet::from_events(6, [4, 5]).unwrap().identity();
        let path = [&r1, &s2, &r2, &s3].iter().fold(s1, |acc, r| acc.compose(r).unwrap());
        assert_eq!(path, rel(6, &[(0, 5)]));
    }

    #[test]
    fn closures_and_inverse() {
        let r = rel(4, &[(1, 2), (2, 3)]);
        assert_eq!(r.transitive_closure(), rel(4, &[(1, 2), (2, 3), (1, 3)]));
        assert_eq!(rel(3, &[(1, 2)]).inverse(), rel(3, &[(2, 1)]));
        let s = EventSet::from_events(3, [1, 2]).unwrap();
        assert_eq!(s.identity(), rel(3, &[(1, 1), (2, 2)]));
        assert_eq!(rel(2, &[(0, 1)]).reflexive_closure(), rel(2, &[(0, 0), (0, 1), (1, 1)]));
    }

    #[test]
    fn predicates() {
        assert!(!rel(3, &[(1, 2), (2, 1)]).is_acyclic());
        assert!(!rel(3, &[(1, 1)]).is_irreflexive());
        assert!(rel(3, &[]).is_acyclic());
        assert!(rel(3, &[]).is_empty());
        assert!(rel(3, &[(0, 1), (1, 2), (0, 2)]).is_acyclic());
        // a cycle's closure is still a relation
        let c = rel(3, &[(0, 1), (1, 0)]).transitive_closure();
        assert_eq!(c, rel(3, &[(0, 1), (1, 0), (0, 0), (1, 1)]));
    }

    #[test]
    fn complement_is_relative_to_universe() {
        let r = rel(2, &[(0, 1)]);
        assert_eq!(r.complement(), rel(2, &[(0, 0), (1, 0), (1, 1)]));
        let s = EventSet::from_events(3, [0]).unwrap();
        assert_eq!(s.complement(), EventSet::from_events(3, [1, 2]).unwrap());
        assert_eq!(Relation::full(0).unwrap().complement(), Relation::empty(0).unwrap());
    }

    #[test]
    fn universe_mismatch_is_an_error() {
        let err = rel(2, &[]).compose(&rel(3, &[])).unwrap_err();
        assert_eq!(err, RelError::UniverseMismatch { left: 2, right: 3 });
        assert!(rel(2, &[]).union(&rel(3, &[])).is_err());
        let s = EventSet::empty(2).unwrap();
        assert!(s.product(&EventSet::empty(4).unwrap()).is_err());
        assert!(Relation::empty(65).is_err());
        assert!(rel(2, &[]).clone().insert(2, 0).is_err());
    }

    #[test]
    fn full_universe_of_64() {
        let r = Relation::full(64).unwrap();
        assert_eq!(r.len(), 64 * 64);
        assert!(r.complement().is_empty());
        let order: Vec<_> = (0..64).collect();
        let t = Relation::total_order(64, &order).unwrap();
        assert!(t.is_acyclic());
        assert!(t.is_strict_total_order_on(&EventSet::full(64).unwrap()));
    }

    #[test]
    fn total_order_recognition() {
        let s = EventSet::from_events(4, [0, 2, 3]).unwrap();
        let t = Relation::total_order(4, &[2, 0, 3]).unwrap();
        assert!(t.is_strict_total_order_on(&s));
        let mut missing = t.clone();
        missing.remove(2, 3);
        assert!(!missing.is_strict_total_order_on(&s));
    }
}
