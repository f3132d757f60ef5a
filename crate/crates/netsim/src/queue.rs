//! Deterministic event queue.
//!
//! Events are ordered by `(time, class, seq)`: the class makes same-instant
//! processing order explicit (packages before beacons before issuance) and
//! the monotone sequence number breaks all remaining ties, so identical
//! inputs always produce identical traces.
//!
//! Entries whose key exceeds the last FIFO entry go to a FIFO lane instead of
//! the heap. Under a constant delay almost every package lands there, which
//! makes the common case O(1).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Key {
    pub time: f64,
    pub class: u8,
    pub seq: u64,
}

impl Key {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.class.cmp(&other.class))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug)]
struct Entry<E> {
    key: Key,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.key.cmp_key(&other.key) == Ordering::Equal
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp_key(&self.key)
    }
}

#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    fifo: VecDeque<Entry<E>>,
    seq: u64,
    now: f64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self { heap: BinaryHeap::new(), fifo: VecDeque::new(), seq: 0, now: 0.0 }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Time of the last popped event.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len() + self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Schedules `event`; times earlier than `now` are clamped to `now`.
    pub fn push(&mut self, time: f64, class: u8, event: E) {
        let key = Key { time: time.max(self.now), class, seq: self.seq };
        self.seq += 1;
        let entry = Entry { key, event };
        match self.fifo.back() {
            Some(last) if last.key.cmp_key(&key) == Ordering::Greater => self.heap.push(entry),
            _ => self.fifo.push_back(entry),
        }
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.peek_key().map(|k| k.time)
    }

    fn peek_key(&self) -> Option<Key> {
        match (self.heap.peek(), self.fifo.front()) {
            (None, None) => None,
            (Some(h), None) => Some(h.key),
            (None, Some(f)) => Some(f.key),
            (Some(h), Some(f)) => Some(if h.key.cmp_key(&f.key) == Ordering::Less { h.key } else { f.key }),
        }
    }

    pub fn pop(&mut self) -> Option<(Key, E)> {
        let from_heap = match (self.heap.peek(), self.fifo.front()) {
            (None, None) => return None,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(h), Some(f)) => h.key.cmp_key(&f.key) == Ordering::Less,
        };
        let e = if from_heap { self.heap.pop() } else { self.fifo.pop_front() }.expect("non-empty");
        self.now = e.key.time;
        Some((e.key, e.event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn orders_by_time_class_then_insertion() {
        let mut q = EventQueue::new();
        q.push(2.0, 0, "c");
        q.push(1.0, 3, "b");
        q.push(1.0, 0, "a");
        q.push(1.0, 3, "b2");
        q.push(0.5, 9, "first");
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, e)| e)).collect();
        assert_eq!(order, ["first", "a", "b", "b2", "c"]);
    }

    proptest! {
        #[test]
        fn pops_are_sorted(items in proptest::collection::vec((0u32..50, 0u8..4), 1..200)) {
            let mut q = EventQueue::new();
            for (i, (t, c)) in items.iter().enumerate() {
                q.push(*t as f64 / 10.0, *c, i);
            }
            let mut last: Option<Key> = None;
            let mut n = 0;
            while let Some((k, _)) = q.pop() {
                if let Some(l) = last {
                    prop_assert!(l.cmp_key(&k) == Ordering::Less);
                }
                last = Some(k);
                n += 1;
            }
            prop_assert_eq!(n, items.len());
        }
    }
}
