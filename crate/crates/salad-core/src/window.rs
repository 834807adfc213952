//! A bounded, index-addressed window over a contiguous run of the stream.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

/// Holds the values for indices `[next_index - len, next_index)`, keeping at
/// most `cap` of them. Appends must be contiguous.
#[derive(Debug, Clone)]
pub(crate) struct IndexedWindow {
    values: VecDeque<f64>,
    next_index: usize,
    cap: usize,
}

impl IndexedWindow {
    pub fn new(cap: usize) -> Self {
        debug_assert!(cap >= 1);
        Self {
            values: VecDeque::with_capacity(cap + 1),
            next_index: 0,
            cap,
        }
    }

    pub fn push(&mut self, index: usize, value: f64) {
        debug_assert!(
            self.values.is_empty() || index == self.next_index,
            "window append must be contiguous"
        );
        if self.values.is_empty() {
            self.next_index = index;
        }
        self.values.push_back(value);
        self.next_index += 1;
        if self.values.len() > self.cap {
            self.values.pop_front();
        }
    }

    fn start(&self) -> usize {
        self.next_index - self.values.len()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        if index < self.start() || index >= self.next_index {
            return None;
        }
        self.values.get(index - self.start()).copied()
    }

    /// Overwrite an index already in the window.
    pub fn replace(&mut self, index: usize, value: f64) -> bool {
        if index < self.start() || index >= self.next_index {
            return false;
        }
        let offset = index - self.start();
        self.values[offset] = value;
        true
    }

    pub fn contains_range(&self, from: usize, len: usize) -> bool {
        len <= self.values.len() && from >= self.start() && from + len <= self.next_index
    }

    /// Copy `[from, from + len)` into `out`.
    pub fn extract(&self, from: usize, len: usize, out: &mut Vec<f64>) {
        debug_assert!(self.contains_range(from, len));
        out.clear();
        let offset = from - self.start();
        out.extend(self.values.iter().skip(offset).take(len).copied());
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn eviction_keeps_the_most_recent_values() {
        let mut w = IndexedWindow::new(3);
        for i in 0..5 {
            w.push(i, i as f64);
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.get(1), None);
        assert_eq!(w.get(2), Some(2.0));
        assert_eq!(w.get(4), Some(4.0));
        assert!(w.contains_range(2, 3));
        assert!(!w.contains_range(1, 3));
    }

    #[test]
    fn replace_only_touches_live_indices() {
        let mut w = IndexedWindow::new(2);
        w.push(10, 1.0);
        w.push(11, 2.0);
        assert!(w.replace(11, 9.0));
        assert!(!w.replace(9, 5.0));
        assert_eq!(w.get(11), Some(9.0));
    }

    #[test]
    fn extract_copies_a_contiguous_slice() {
        let mut w = IndexedWindow::new(4);
        for i in 3..7 {
            w.push(i, (i * i) as f64);
        }
        let mut out = Vec::new();
        w.extract(4, 2, &mut out);
        assert_eq!(out, [16.0, 25.0]);
    }
}
