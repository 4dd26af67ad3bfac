//! Combinatorial index algebra for the symmetry-reduced state space.
//!
//! A density-matrix element ρ_xy of a q-qubit register is classified by its
//! bit pair counts (n00, n01, n10, n11): n_ab counts the positions where the
//! bit of x is `a` and the bit of y is `b`. The counts sum to q, so the
//! reduced state space has C(q+3, 3) = (q+1)(q+2)(q+3)/6 equivalence classes.
//! This module provides the counts, the associated Hamming distances, a dense
//! ranking of the classes, and exact binomial coefficients.

use crate::error::{Error, Result};
use once_cell::sync::Lazy;

/// Largest supported register size. Keeps every binomial coefficient that
/// enters the reduced equation exactly representable and bounds memory.
pub const MAX_QUBITS: usize = 36;

/// Largest `n` for which [`binomial`] is tabulated.
pub const MAX_BINOMIAL_N: usize = 2 * MAX_QUBITS;

/// Bit pair counts of one density-matrix equivalence class.
///
/// Invariant: `n00 + n01 + n10 + n11 = q`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PairCounts {
    pub n00: usize,
    pub n01: usize,
    pub n10: usize,
    pub n11: usize,
}

/// Hamming distances (x to 0, y to 0, x to y) of a class.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DistanceTriple {
    pub d_x0: usize,
    pub d_y0: usize,
    pub d_xy: usize,
}

impl PairCounts {
    pub fn new(n00: usize, n01: usize, n10: usize, n11: usize) -> Self {
        Self { n00, n01, n10, n11 }
    }

    /// Count the (0,0), (0,1), (1,0) and (1,1) bit pairs of `x` and `y`
    /// over positions `0..q`.
    pub fn from_bits(x: u64, y: u64, q: usize) -> Result<Self> {
        if q == 0 || q > MAX_QUBITS {
            return Err(Error::QubitCountOutOfRange {
                q,
                min: 1,
                max: MAX_QUBITS,
            });
        }
        let mask = if q == 64 { u64::MAX } else { (1u64 << q) - 1 };
        let (x, y) = (x & mask, y & mask);
        let n11 = (x & y).count_ones() as usize;
        let n10 = (x & !y & mask).count_ones() as usize;
        let n01 = (!x & y & mask).count_ones() as usize;
        let n00 = q - n11 - n10 - n01;
        Ok(Self { n00, n01, n10, n11 })
    }

    /// Total number of qubits represented by these counts.
    pub fn qubits(&self) -> usize {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    /// Hamming distances d_x0 = n10 + n11, d_y0 = n01 + n11, d_xy = n01 + n10.
    pub fn distances(&self) -> DistanceTriple {
        DistanceTriple {
            d_x0: self.n10 + self.n11,
            d_y0: self.n01 + self.n11,
            d_xy: self.n01 + self.n10,
        }
    }

    /// Counts of the transposed element: swapping x and y swaps n01 and n10.
    pub fn swap_xy(&self) -> Self {
        Self {
            n00: self.n00,
            n01: self.n10,
            n10: self.n01,
            n11: self.n11,
        }
    }

    /// Diagonal classes (x = y) have no mixed pairs.
    pub fn is_diagonal(&self) -> bool {
        self.n01 == 0 && self.n10 == 0
    }
}

/// Number of distinct pair-count classes for q qubits: C(q+3, 3).
pub fn state_space_size(q: usize) -> usize {
    (q + 1) * (q + 2) * (q + 3) / 6
}

/// Tetrahedral partial sum: number of classes with n00 > a for fixed q is
/// `tetrahedral(q - a - 1)`.
fn tetrahedral(k: usize) -> usize {
    (k + 1) * (k + 2) * (k + 3) / 6
}

/// Dense rank of a class, in [0, `state_space_size(q)`).
///
/// Classes are ordered lexicographically descending on (n00, n01, n10) with
/// n11 implied, so `(q, 0, 0, 0)` always ranks 0.
pub fn rank(p: &PairCounts) -> usize {
    let q = p.qubits();
    let r = q - p.n00;
    let base = if p.n00 == q {
        0
    } else {
        tetrahedral(q - p.n00 - 1)
    };
    let rb = r - p.n01;
    base + rb * (rb + 1) / 2 + (rb - p.n10)
}

/// Inverse of [`rank`] for fixed q.
pub fn unrank(flat: usize, q: usize) -> Result<PairCounts> {
    let size = state_space_size(q);
    if flat >= size {
        return Err(Error::IndexOutOfRange {
            index: flat,
            q,
            size,
        });
    }
    let mut rem = flat;
    for n00 in (0..=q).rev() {
        let r = q - n00;
        let block = (r + 1) * (r + 2) / 2;
        if rem >= block {
            rem -= block;
            continue;
        }
        for n01 in (0..=r).rev() {
            let count = r - n01 + 1;
            if rem >= count {
                rem -= count;
                continue;
            }
            let n10 = r - n01 - rem;
            let n11 = r - n01 - n10;
            return Ok(PairCounts { n00, n01, n10, n11 });
        }
    }
    unreachable!("flat index verified in range");
}

/// All classes for q qubits in rank order.
pub fn classes(q: usize) -> impl Iterator<Item = PairCounts> {
    (0..state_space_size(q)).map(move |i| unrank(i, q).expect("index in range"))
}

struct BinomialTable {
    rows: Vec<Vec<u128>>,
}

impl BinomialTable {
    fn build(max_n: usize) -> Self {
        let mut rows: Vec<Vec<u128>> = Vec::with_capacity(max_n + 1);
        for n in 0..=max_n {
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = rows[n - 1][k - 1] + rows[n - 1][k];
            }
            rows.push(row);
        }
        Self { rows }
    }
}

static BINOMIALS: Lazy<BinomialTable> = Lazy::new(|| BinomialTable::build(MAX_BINOMIAL_N));

/// Exact binomial coefficient C(n, k), tabulated by Pascal recursion.
pub fn binomial(n: usize, k: usize) -> Result<u128> {
    if n > MAX_BINOMIAL_N || k > n {
        return Err(Error::BinomialOutOfRange { n, k });
    }
    Ok(BINOMIALS.rows[n][k])
}

/// C(n, k) as f64, for use in floating-point weighted sums. Panics on
/// arguments outside the table; callers stay within `n <= 2 * MAX_QUBITS`.
pub fn binomial_f64(n: usize, k: usize) -> f64 {
    BINOMIALS.rows[n][k] as f64
}

/// Exact binomial as u64; only valid where the value fits (n <= 36 does).
pub(crate) fn binomial_u64(n: usize, k: usize) -> u64 {
    let v = BINOMIALS.rows[n][k];
    debug_assert!(v <= u64::MAX as u128);
    v as u64
}

/// Number of index pairs (x, y) in a class: the multinomial
/// q! / (n00! n01! n10! n11!), as f64 (it exceeds u64 near q = 36).
pub fn multiplicity(p: &PairCounts) -> f64 {
    let q = p.qubits();
    binomial_f64(q, p.n00)
        * binomial_f64(q - p.n00, p.n01)
        * binomial_f64(q - p.n00 - p.n01, p.n10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_counts_direct_enumeration() {
        let p = PairCounts::from_bits(0b101, 0b011, 3).unwrap();
        assert_eq!(p, PairCounts::new(0, 1, 1, 1));
        assert_eq!(PairCounts::from_bits(0, 0, 4).unwrap(), PairCounts::new(4, 0, 0, 0));
        assert_eq!(
            PairCounts::from_bits(0b111, 0, 3).unwrap(),
            PairCounts::new(0, 0, 3, 0)
        );
    }

    #[test]
    fn pair_counts_rejects_bad_q() {
        assert!(PairCounts::from_bits(0, 0, 0).is_err());
        assert!(PairCounts::from_bits(0, 0, 37).is_err());
    }

    #[test]
    fn distances_match_definitions() {
        let d = PairCounts::new(0, 1, 1, 1).distances();
        assert_eq!((d.d_x0, d.d_y0, d.d_xy), (2, 2, 2));
        let q = 9;
        let d = PairCounts::new(q, 0, 0, 0).distances();
        assert_eq!((d.d_x0, d.d_y0, d.d_xy), (0, 0, 0));
        let d = PairCounts::new(0, 0, 0, q).distances();
        assert_eq!((d.d_x0, d.d_y0, d.d_xy), (q, q, 0));
    }

    #[test]
    fn distances_agree_with_popcount() {
        for q in 1..=8usize {
            for x in 0..(1u64 << q) {
                for y in 0..(1u64 << q) {
                    let d = PairCounts::from_bits(x, y, q).unwrap().distances();
                    assert_eq!(d.d_x0, x.count_ones() as usize);
                    assert_eq!(d.d_y0, y.count_ones() as usize);
                    assert_eq!(d.d_xy, (x ^ y).count_ones() as usize);
                    // triangle inequality
                    assert!(d.d_x0.abs_diff(d.d_y0) <= d.d_xy);
                    assert!(d.d_xy <= d.d_x0 + d.d_y0);
                }
            }
        }
    }

    #[test]
    fn state_space_size_formula() {
        assert_eq!(state_space_size(36), 9139);
        assert_eq!(state_space_size(1), 4);
        assert_eq!(state_space_size(6), 84);
    }

    #[test]
    fn enumeration_count_matches_size() {
        // brute-force count of nonnegative 4-tuples summing to q
        for q in 0..=12usize {
            let mut count = 0usize;
            for n00 in 0..=q {
                for n01 in 0..=q - n00 {
                    for _n10 in 0..=q - n00 - n01 {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, state_space_size(q), "q = {q}");
            assert_eq!(classes(q).count(), state_space_size(q));
        }
    }

    #[test]
    fn rank_anchor_and_round_trip() {
        for q in [1, 2, 5, 36] {
            assert_eq!(rank(&PairCounts::new(q, 0, 0, 0)), 0, "q = {q}");
        }
        // full round trip at q = 5 (56 tuples)
        assert_eq!(state_space_size(5), 56);
        for i in 0..56 {
            let p = unrank(i, 5).unwrap();
            assert_eq!(p.qubits(), 5);
            assert_eq!(rank(&p), i);
        }
    }

    #[test]
    fn rank_covers_q36_exactly() {
        let mut seen = vec![false; 9139];
        for p in classes(36) {
            let i = rank(&p);
            assert!(!seen[i], "duplicate rank {i}");
            seen[i] = true;
        }
        assert!(seen.iter().all(|&s| s));
        assert!(unrank(9139, 36).is_err());
    }

    #[test]
    fn rank_is_lexicographic_descending() {
        for q in [3usize, 7] {
            let all: Vec<PairCounts> = classes(q).collect();
            for w in all.windows(2) {
                let a = (w[0].n00, w[0].n01, w[0].n10);
                let b = (w[1].n00, w[1].n01, w[1].n10);
                assert!(a > b, "rank order must descend lexicographically: {a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn binomial_against_multiplicative_oracle() {
        // independent multiplicative evaluation
        fn oracle(n: usize, k: usize) -> u128 {
            let mut v: u128 = 1;
            for i in 0..k.min(n - k) {
                v = v * (n - i) as u128 / (i + 1) as u128;
            }
            v
        }
        assert_eq!(binomial(36, 18).unwrap(), 9_075_135_300);
        assert_eq!(oracle(36, 18), 9_075_135_300);
        assert_eq!(binomial(7, 3).unwrap(), 35);
        for q in [1usize, 12, 36] {
            assert_eq!(binomial(q, 0).unwrap(), 1);
        }
        for n in 0..=72usize {
            for k in 0..=n {
                assert_eq!(binomial(n, k).unwrap(), oracle(n, k), "C({n},{k})");
            }
        }
        assert!(binomial(5, 6).is_err());
        assert!(binomial(73, 0).is_err());
    }

    #[test]
    fn pair_counts_invariant_under_simultaneous_permutation() {
        use rand::RngExt;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC0FF_EE);
        for q in 2..=10usize {
            for _ in 0..40 {
                let x: u64 = rng.random::<u64>() & ((1 << q) - 1);
                let y: u64 = rng.random::<u64>() & ((1 << q) - 1);
                // random permutation of bit positions (Fisher-Yates)
                let mut perm: Vec<usize> = (0..q).collect();
                for i in (1..q).rev() {
                    let j = rng.random_range(0..=i);
                    perm.swap(i, j);
                }
                let apply = |v: u64| -> u64 {
                    let mut out = 0u64;
                    for (i, &pi) in perm.iter().enumerate() {
                        out |= ((v >> i) & 1) << pi;
                    }
                    out
                };
                let a = PairCounts::from_bits(x, y, q).unwrap();
                let b = PairCounts::from_bits(apply(x), apply(y), q).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn multiplicities_sum_to_pair_count() {
        // sum over classes of multiplicity = 4^q
        for q in [1usize, 4, 9] {
            let total: f64 = classes(q).map(|p| multiplicity(&p)).sum();
            assert_eq!(total, 4f64.powi(q as i32));
        }
    }
}
