//! Order-independent floating-point accumulation.
//!
//! Keeps a list of non-overlapping partial sums (Shewchuk's expansion) so the
//! represented value is the exact real sum of every addend. [`ExactSum::value`]
//! rounds that exact sum once, so any grouping or ordering of the same addends
//! yields a bitwise-identical result.

#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

/// Two sums are equal when their rounded values are bitwise equal; the
/// internal expansions may differ with the order of addition.
impl PartialEq for ExactSum {
    fn eq(&self, other: &Self) -> bool {
        self.value().to_bits() == other.value().to_bits()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a finite value. Non-finite input corrupts the expansion, so
    /// callers must reject it beforehand.
    #[inline]
    pub fn add(&mut self, mut x: f64) {
        debug_assert!(x.is_finite());
        let mut kept = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.partials.truncate(kept);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded value of the exact sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // round-half-even correction when the remaining tail pushes past a tie
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancels_catastrophically_cancelling_input() {
        let s: ExactSum = [1e100, 1.0, -1e100, 1e-100].into_iter().collect();
        assert_eq!(s.value(), 1.0 + 1e-100);
        let t: ExactSum = [0.1; 10].into_iter().collect();
        assert_eq!(t.value(), 1.0);
        assert_eq!(ExactSum::new().value(), 0.0);
    }

    proptest! {
        #[test]
        fn split_and_merge_is_bitwise_identical(
            xs in prop::collection::vec(-1e6f64..1e6, 1..200),
            cut in 0usize..200,
        ) {
            let cut = cut.min(xs.len());
            let whole: ExactSum = xs.iter().copied().collect();
            let mut left: ExactSum = xs[..cut].iter().copied().collect();
            let right: ExactSum = xs[cut..].iter().copied().collect();
            left.merge(&right);
            prop_assert_eq!(whole.value().to_bits(), left.value().to_bits());

            let reversed: ExactSum = xs.iter().rev().copied().collect();
            prop_assert_eq!(whole.value().to_bits(), reversed.value().to_bits());
        }

        #[test]
        fn integer_sums_are_exact(xs in prop::collection::vec(-1_000_000i64..1_000_000, 0..100)) {
            let s: ExactSum = xs.iter().map(|&x| x as f64 * 0.5).collect();
            let exact: i64 = xs.iter().sum();
            prop_assert_eq!(s.value(), exact as f64 * 0.5);
        }
    }
}
