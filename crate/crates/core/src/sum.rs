//! Compensated summation for long-running accumulators.

use std::ops::{Add, AddAssign};

/// Kahan–Babuška–Neumaier running sum.
///
/// Event-driven runs push up to ~10^10 holding intervals through a single
/// clock; a naive `f64` sum drifts by several digits over that many terms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn push(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl From<f64> for NeumaierSum {
    fn from(value: f64) -> Self {
        Self { sum: value, comp: 0.0 }
    }
}

impl AddAssign<f64> for NeumaierSum {
    #[inline]
    fn add_assign(&mut self, rhs: f64) {
        self.push(rhs);
    }
}

impl Add for NeumaierSum {
    type Output = NeumaierSum;

    fn add(mut self, rhs: Self) -> Self {
        self.push(rhs.sum);
        self.push(rhs.comp);
        self
    }
}

impl std::iter::Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.push(v);
        }
        acc
    }
}

/// Compensated sum of a slice.
pub fn compensated_sum(values: &[f64]) -> f64 {
    values.iter().copied().sum::<NeumaierSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_small_terms_lost_by_naive_sum() {
        let mut acc = NeumaierSum::new();
        let mut naive = 0.0_f64;
        acc += 1.0;
        naive += 1.0;
        for _ in 0..1_000_000 {
            acc += 1e-16;
            naive += 1e-16;
        }
        assert_eq!(naive, 1.0);
        assert!((acc.value() - (1.0 + 1e-10)).abs() < 1e-22);
    }

    #[test]
    fn cancellation_is_exact_for_signed_times() {
        // integral of an indicator written as a sum of signed switch times
        let mut acc = NeumaierSum::new();
        let mut exact = 0.0;
        let big = 1.0e8;
        for k in 0..1000 {
            let t0 = big + k as f64 * 0.1 + 1e-7;
            let t1 = t0 + 0.05;
            acc += -t0;
            acc += t1;
            // Sterbenz: t1 - t0 is exact
            exact += t1 - t0;
        }
        assert!((acc.value() - exact).abs() < 1e-12);
    }

    #[test]
    fn merging_sums_is_order_independent_here() {
        let a: NeumaierSum = [1e16, 1.0, -1e16].into_iter().sum();
        let b: NeumaierSum = [3.0, 1e-20].into_iter().sum();
        assert_eq!((a + b).value(), (b + a).value());
        assert_eq!((a + b).value(), 4.0);
    }
}
