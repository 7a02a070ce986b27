//! Training-prefix statistics shared by every branch and baseline.

use std::borrow::Cow;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Min-max normalization to `[0, 1]`; a constant vector maps to all zeros.
pub fn min_max_normalize<T: Scalar>(values: &[T]) -> Vec<T> {
    let Some((lo, hi)) = min_max(values) else {
        return Vec::new();
    };
    let range = hi - lo;
    if range <= T::zero() {
        return vec![T::zero(); values.len()];
    }
    values.iter().map(|&v| (v - lo) / range).collect()
}

pub(crate) fn min_max<T: Scalar>(values: &[T]) -> Option<(T, T)> {
    let first = *values.first()?;
    Some(values.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
}

/// Occupation-to-occupation transition statistics over dense item indices.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionModel<T> {
    counts: Array2<u32>,
    probs: Array2<T>,
    sims: Array2<T>,
    occurrences: Vec<u64>,
    popularity: Vec<T>,
    fallback: Vec<bool>,
}

impl<T: Scalar> TransitionModel<T> {
    /// Counts adjacent pairs (self-transitions included) and occurrences over
    /// the given training prefixes.
    pub fn build<S: AsRef<[usize]>>(n_items: usize, prefixes: &[S]) -> Result<Self> {
        if n_items == 0 {
            return Err(Error::Degenerate("transition model over an empty item universe".into()));
        }
        let mut counts = Array2::<u32>::zeros((n_items, n_items));
        let mut occurrences = vec![0u64; n_items];
        for prefix in prefixes {
            let prefix = prefix.as_ref();
            for &i in prefix {
                if i >= n_items {
                    return Err(Error::Dimension(format!("item index {i} outside universe of {n_items}")));
                }
                occurrences[i] += 1;
            }
            for w in prefix.windows(2) {
                counts[(w[0], w[1])] += 1;
            }
        }
        if occurrences.iter().all(|&c| c == 0) {
            return Err(Error::Degenerate("empty training corpus".into()));
        }

        let uniform = T::one() / T::from_count(n_items);
        let mut probs = Array2::<T>::zeros((n_items, n_items));
        let mut fallback = vec![false; n_items];
        for j in 0..n_items {
            let row = counts.row(j);
            let total: u64 = row.iter().map(|&c| u64::from(c)).sum();
            if total == 0 {
                fallback[j] = true;
                probs.row_mut(j).fill(uniform);
            } else {
                let total = T::from_u64(total).expect("count fits");
                for (p, &c) in probs.row_mut(j).iter_mut().zip(row.iter()) {
                    *p = T::from_u32(c).expect("count fits") / total;
                }
            }
        }

        let norms_sq: Vec<u64> = (0..n_items)
            .map(|j| counts.row(j).iter().map(|&c| u64::from(c) * u64::from(c)).sum())
            .collect();
        let mut sims = Array2::<T>::zeros((n_items, n_items));
        for j in 0..n_items {
            if norms_sq[j] == 0 {
                continue;
            }
            for i in j..n_items {
                if norms_sq[i] == 0 {
                    continue;
                }
                let dot: u64 = counts
                    .row(j)
                    .iter()
                    .zip(counts.row(i).iter())
                    .map(|(&a, &b)| u64::from(a) * u64::from(b))
                    .sum();
                // sqrt of the exact product keeps identical rows at exactly 1
                let denom = ((norms_sq[j] as f64) * (norms_sq[i] as f64)).sqrt();
                let s = T::lit((dot as f64 / denom).min(1.0));
                sims[(j, i)] = s;
                sims[(i, j)] = s;
            }
        }

        let occ: Vec<T> = occurrences
            .iter()
            .map(|&c| T::from_u64(c).expect("count fits"))
            .collect();
        let popularity = min_max_normalize(&occ);

        Ok(TransitionModel {
            counts,
            probs,
            sims,
            occurrences,
            popularity,
            fallback,
        })
    }

    pub fn n_items(&self) -> usize {
        self.popularity.len()
    }

    pub fn counts(&self) -> &Array2<u32> {
        &self.counts
    }

    pub fn probs(&self) -> &Array2<T> {
        &self.probs
    }

    pub fn sims(&self) -> &Array2<T> {
        &self.sims
    }

    /// Min-max normalized occurrence counts.
    pub fn popularity(&self) -> &[T] {
        &self.popularity
    }

    pub fn occurrences(&self) -> &[u64] {
        &self.occurrences
    }

    /// True when item `j` never occurs as a source and its probability row is
    /// the uniform fallback.
    pub fn is_fallback(&self, j: usize) -> bool {
        self.fallback[j]
    }

    pub fn distinct_successors(&self, j: usize) -> usize {
        self.counts.row(j).iter().filter(|&&c| c > 0).count()
    }

    pub fn check_item(&self, j: usize) -> Result<()> {
        if j < self.n_items() {
            Ok(())
        } else {
            Err(Error::UnknownOccupation(format!("item index {j}")))
        }
    }

    /// Next-occupation evidence for a last item: its probability row, or the
    /// popularity prior when the row is the uniform fallback.
    pub fn last_item_row(&self, j: usize) -> Cow<'_, [T]> {
        if self.fallback[j] {
            Cow::Borrowed(&self.popularity)
        } else {
            Cow::Owned(self.probs.row(j).to_vec())
        }
    }

    pub fn probs_row(&self, j: usize) -> ArrayView1<'_, T> {
        self.probs.row(j)
    }

    pub fn sims_row(&self, j: usize) -> ArrayView1<'_, T> {
        self.sims.row(j)
    }

    /// Tab-separated dump of all statistics, one block per matrix.
    pub fn dump_tsv(&self, ids: &[&str]) -> String {
        let mut out = String::new();
        let header = |name: &str| format!("# {name}\nsource\t{}\n", ids.join("\t"));
        let mut block = |name: &str, cell: &dyn Fn(usize, usize) -> String| {
            out.push_str(&header(name));
            for (j, id) in ids.iter().enumerate() {
                out.push_str(id);
                for i in 0..ids.len() {
                    out.push('\t');
                    out.push_str(&cell(j, i));
                }
                out.push('\n');
            }
        };
        block("counts", &|j, i| self.counts[(j, i)].to_string());
        block("probs", &|j, i| self.probs[(j, i)].to_string());
        block("sims", &|j, i| self.sims[(j, i)].to_string());
        out.push_str("# popularity\noccupation\toccurrences\tpopularity\n");
        for (k, id) in ids.iter().enumerate() {
            out.push_str(&format!("{id}\t{}\t{}\n", self.occurrences[k], self.popularity[k]));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;

    #[test]
    fn counts_and_probabilities() {
        let m = TransitionModel::<f64>::build(3, &[vec![A, B], vec![A, B], vec![A, C]]).unwrap();
        assert_eq!(m.counts()[(A, B)], 2);
        assert_relative_eq!(m.probs()[(A, B)], 2.0 / 3.0);
        assert_relative_eq!(m.probs()[(A, C)], 1.0 / 3.0);
        assert!(!m.is_fallback(A));
    }

    #[test]
    fn identical_rows_have_unit_similarity() {
        // rows of A and B are both [0, 0, 1]
        let m = TransitionModel::<f64>::build(3, &[vec![A, C], vec![B, C]]).unwrap();
        assert_eq!(m.sims()[(A, B)], 1.0);
        assert_eq!(m.sims()[(A, A)], 1.0);
    }

    #[test]
    fn zero_rows_fall_back() {
        let m = TransitionModel::<f64>::build(3, &[vec![A, B]]).unwrap();
        assert!(m.is_fallback(C));
        for i in 0..3 {
            assert_relative_eq!(m.probs()[(C, i)], 1.0 / 3.0);
            assert_eq!(m.sims()[(C, i)], 0.0);
        }
        assert_eq!(&*m.last_item_row(C), m.popularity());
    }

    #[test]
    fn self_transitions_are_counted() {
        let m = TransitionModel::<f64>::build(2, &[vec![A, A, B]]).unwrap();
        assert_eq!(m.counts()[(A, A)], 1);
        assert_eq!(m.distinct_successors(A), 2);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let none: Vec<Vec<usize>> = vec![];
        assert!(TransitionModel::<f64>::build(3, &none).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(min_max_normalize(&[1.0, 3.0, 5.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(min_max_normalize(&[2.0, 2.0, 2.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(min_max_normalize(&[1.0f32, 3.0, 5.0]), vec![0.0f32, 0.5, 1.0]);
    }

    #[test]
    fn popularity_is_normalized_occurrence() {
        let m = TransitionModel::<f64>::build(3, &[vec![A, B, A], vec![A]]).unwrap();
        assert_eq!(m.occurrences(), &[3, 1, 0]);
        assert_eq!(m.popularity(), &[1.0, 1.0 / 3.0, 0.0]);
    }

    proptest! {
        #[test]
        fn normalize_hits_both_ends(v in prop::collection::vec(-1e3f64..1e3, 47)) {
            let n = min_max_normalize(&v);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(hi > lo);
            for (x, y) in v.iter().zip(&n) {
                prop_assert!((y - (x - lo) / (hi - lo)).abs() < 1e-15);
            }
            prop_assert_eq!(n.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
            prop_assert_eq!(n.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        }

        #[test]
        fn rows_are_stochastic_and_sims_bounded(
            seqs in prop::collection::vec(prop::collection::vec(0usize..6, 1..8), 1..20)
        ) {
            let m = TransitionModel::<f64>::build(6, &seqs).unwrap();
            for j in 0..6 {
                let s: f64 = m.probs().row(j).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                for i in 0..6 {
                    let v = m.sims()[(j, i)];
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert_eq!(v, m.sims()[(i, j)]);
                }
            }
            let again = TransitionModel::<f64>::build(6, &seqs).unwrap();
            prop_assert_eq!(m, again);
        }
    }
}
