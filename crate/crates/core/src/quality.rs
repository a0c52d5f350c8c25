//! Ordering quality: the fraction of ordered triples (a, b, c) for which both
//! matrices agree that `b` is strictly less similar to `a` than `c` is.
//! All n^3 triples count in the denominator, self-pairs included.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn check(s: &DMatrix<f64>, s_hat: &DMatrix<f64>) -> Result<usize> {
    if !s.is_square() || s.shape() != s_hat.shape() {
        return Err(Error::Shape(format!(
            "ordering quality needs matching square matrices, got {:?} and {:?}",
            s.shape(),
            s_hat.shape()
        )));
    }
    if s.nrows() < 2 {
        return Err(Error::Shape("ordering quality needs n >= 2".into()));
    }
    if s.iter().chain(s_hat.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Config("ordering quality needs finite entries".into()));
    }
    Ok(s.nrows())
}

/// Fenwick tree over ranks, counting inserted items below a given rank.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0; n + 1])
    }

    fn insert(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks strictly below `rank`.
    fn count_below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut acc = 0;
        while i > 0 {
            acc += self.0[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Ordered pairs (b, c) with `x[b] < x[c]` and `y[b] < y[c]`, in O(n log n).
fn concordant_pairs(x: &[f64], y: &[f64]) -> u64 {
    let n = x.len();
    // dense ranks of y so that equal values share a rank
    let mut by_y: Vec<usize> = (0..n).collect();
    by_y.sort_by(|&i, &j| y[i].total_cmp(&y[j]));
    let mut y_rank = vec![0usize; n];
    let mut r = 0;
    for k in 0..n {
        if k > 0 && y[by_y[k]] != y[by_y[k - 1]] {
            r += 1;
        }
        y_rank[by_y[k]] = r;
    }

    let mut by_x: Vec<usize> = (0..n).collect();
    by_x.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut tree = Fenwick::new(r + 1);
    let mut total = 0;
    let mut k = 0;
    while k < n {
        // items with equal x are queried before any of them is inserted
        let mut end = k + 1;
        while end < n && x[by_x[end]] == x[by_x[k]] {
            end += 1;
        }
        for &c in &by_x[k..end] {
            total += tree.count_below(y_rank[c]);
        }
        for &c in &by_x[k..end] {
            tree.insert(y_rank[c]);
        }
        k = end;
    }
    total
}

pub fn ordering_quality(s: &DMatrix<f64>, s_hat: &DMatrix<f64>) -> Result<f64> {
    let n = check(s, s_hat)?;
    let mut total = 0u64;
    for a in 0..n {
        let x: Vec<f64> = s.row(a).iter().copied().collect();
        let y: Vec<f64> = s_hat.row(a).iter().copied().collect();
        total += concordant_pairs(&x, &y);
    }
    Ok(total as f64 / (n as f64).powi(3))
}

/// Direct triple enumeration, O(n^3). Kept as the reference for
/// [`ordering_quality`].
pub fn ordering_quality_brute_force(s: &DMatrix<f64>, s_hat: &DMatrix<f64>) -> Result<f64> {
    let n = check(s, s_hat)?;
    let mut total = 0u64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if s[(a, b)] < s[(a, c)] && s_hat[(a, b)] < s_hat[(a, c)] {
                    total += 1;
                }
            }
        }
    }
    Ok(total as f64 / (n as f64).powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    fn collinear() -> DMatrix<f64> {
        // points 0, 1, 3 on a line; self-similarity is the row maximum
        DMatrix::from_row_slice(3, 3, &[0.0, -1.0, -3.0, -1.0, 0.0, -2.0, -3.0, -2.0, 0.0])
    }

    #[test]
    fn collinear_fixture_is_one_third() {
        let s = collinear();
        assert!((ordering_quality(&s, &s).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((ordering_quality_brute_force(&s, &s).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reversed_ordering_scores_zero() {
        let s = collinear();
        assert_eq!(ordering_quality(&s, &(-&s)).unwrap(), 0.0);
    }

    #[test]
    fn shape_errors() {
        let a = DMatrix::<f64>::zeros(3, 3);
        let b = DMatrix::<f64>::zeros(2, 2);
        assert!(ordering_quality(&a, &b).is_err());
        assert!(ordering_quality(&DMatrix::zeros(1, 1), &DMatrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn self_agreement_is_maximal() {
        let mut rng = rng_for(5, &[]);
        for _ in 0..100 {
            let s = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>());
            let h = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>());
            assert!(ordering_quality(&s, &s).unwrap() >= ordering_quality(&s, &h).unwrap());
        }
    }

    fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        // few distinct values so ties are common
        proptest::collection::vec(-3i32..3, n * n)
            .prop_map(move |v| DMatrix::from_iterator(n, n, v.into_iter().map(f64::from)))
    }

    proptest! {
        #[test]
        fn matches_brute_force_with_ties(s in matrix(6), h in matrix(6)) {
            prop_assert_eq!(
                ordering_quality(&s, &h).unwrap(),
                ordering_quality_brute_force(&s, &h).unwrap()
            );
        }

        #[test]
        fn invariant_under_increasing_maps(s in matrix(5), h in matrix(5)) {
            let q = ordering_quality(&s, &h).unwrap();
            prop_assert!((0.0..=1.0).contains(&q));
            let f = |m: &DMatrix<f64>| m.map(|v| v.exp() * 3.0 - 1.0);
            prop_assert_eq!(q, ordering_quality(&f(&s), &f(&h)).unwrap());
            prop_assert_eq!(q, ordering_quality(&s, &f(&h)).unwrap());
        }
    }
}
