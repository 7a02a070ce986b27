//! Classical comparison scorers sharing the branch score-vector contract:
//! every scorer returns one value in `[0, 1]` per item of the universe.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transitions::{min_max_normalize, TransitionModel};

/// User-independent popularity prior.
pub fn score_popularity<T: Scalar>(model: &TransitionModel<T>) -> Vec<T> {
    model.popularity().to_vec()
}

/// Last item first; every other item at half its popularity, so the tail is
/// popularity-ordered and strictly below the repeated item.
pub fn score_repeat_last<T: Scalar>(prefix: &[usize], model: &TransitionModel<T>) -> Result<Vec<T>> {
    let last = *prefix
        .last()
        .ok_or_else(|| Error::Precondition("repeat-last needs a non-empty prefix".into()))?;
    model.check_item(last)?;
    let half = T::lit(0.5);
    let mut s: Vec<T> = model.popularity().iter().map(|&p| half * p).collect();
    s[last] = T::one();
    Ok(s)
}

/// Normalized outgoing transition row of the last item, popularity for a cold item.
pub fn score_markov<T: Scalar>(prefix: &[usize], model: &TransitionModel<T>) -> Result<Vec<T>> {
    let last = *prefix
        .last()
        .ok_or_else(|| Error::Precondition("item Markov needs a non-empty prefix".into()))?;
    model.check_item(last)?;
    Ok(min_max_normalize(&model.last_item_row(last)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    Nmf,
    Svd,
}

/// Fitting budgets for the factor baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FactorConfig {
    pub nmf_iterations: usize,
    pub svd_iterations: usize,
    pub seed: u64,
}

impl Default for FactorConfig {
    fn default() -> Self {
        FactorConfig {
            nmf_iterations: 200,
            svd_iterations: 50,
            seed: 0,
        }
    }
}

/// Low-rank model of the user-by-item training count matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<T> {
    /// `|U| x d`
    pub user_factors: Array2<T>,
    /// `d x |I|`
    pub item_factors: Array2<T>,
    pub latent_dim: usize,
    pub kind: FactorKind,
}

impl<T: Scalar> FactorModel<T> {
    pub fn reconstruct(&self) -> Array2<T> {
        self.user_factors.dot(&self.item_factors)
    }

    pub fn reconstruct_row(&self, user: usize) -> Array1<T> {
        self.user_factors.row(user).dot(&self.item_factors)
    }

    /// Latent vector for an unseen count row with the item factors held
    /// fixed: orthogonal projection for SVD, multiplicative updates from
    /// `start` (or a flat vector) for NMF.
    pub fn fold_in(&self, counts: &[T], start: Option<&[T]>, iterations: usize) -> Result<Array1<T>> {
        let n = self.item_factors.ncols();
        if counts.len() != n {
            return Err(Error::Dimension(format!("count row has {} entries, model {n}", counts.len())));
        }
        let x = Array1::from(counts.to_vec());
        match self.kind {
            FactorKind::Svd => Ok(self.item_factors.dot(&x)),
            FactorKind::Nmf => {
                let h = &self.item_factors;
                let mut w = match start {
                    Some(s) => Array1::from(s.to_vec()),
                    None => Array1::from_elem(self.latent_dim, T::one()),
                };
                let num = h.dot(&x);
                let hht = h.dot(&h.t());
                for _ in 0..iterations {
                    let den = hht.dot(&w);
                    for ((v, &a), &b) in w.iter_mut().zip(num.iter()).zip(den.iter()) {
                        if b > T::zero() {
                            *v = *v * a / b;
                        }
                    }
                }
                Ok(w)
            }
        }
    }

    /// Min-max normalized reconstruction from a latent vector.
    pub fn score_latent(&self, latent: &Array1<T>) -> Vec<T> {
        min_max_normalize(&latent.dot(&self.item_factors).to_vec())
    }

    /// Reconstructed user row, min-max normalized.
    pub fn score_user(&self, user: usize) -> Result<Vec<T>> {
        if user >= self.user_factors.nrows() {
            return Err(Error::Dimension(format!("user row {user} outside factor model")));
        }
        Ok(min_max_normalize(&self.reconstruct_row(user).to_vec()))
    }
}

fn check_dim<T>(matrix: &Array2<T>, d: usize) -> Result<()> {
    let limit = matrix.nrows().min(matrix.ncols());
    if d == 0 || d > limit {
        return Err(Error::Precondition(format!(
            "latent dimension {d} must lie in 1..={limit} for a {}x{} matrix",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    Ok(())
}

pub fn fit_factor_model<T: Scalar>(
    matrix: &Array2<T>,
    d: usize,
    kind: FactorKind,
    config: &FactorConfig,
) -> Result<FactorModel<T>> {
    match kind {
        FactorKind::Nmf => fit_nmf(matrix, d, config.nmf_iterations, config.seed).map(|(m, _)| m),
        FactorKind::Svd => fit_svd(matrix, d, config.svd_iterations, config.seed),
    }
}

pub fn frobenius_sq<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Multiplicative-update NMF minimizing `||V - WH||_F^2` from a seeded,
/// strictly positive initialization. Returns the model and the objective
/// after each iteration.
pub fn fit_nmf<T: Scalar>(
    matrix: &Array2<T>,
    d: usize,
    iterations: usize,
    seed: u64,
) -> Result<(FactorModel<T>, Vec<T>)> {
    check_dim(matrix, d)?;
    if matrix.iter().any(|&v| v < T::zero() || !v.is_finite()) {
        return Err(Error::Precondition("NMF input must be finite and non-negative".into()));
    }
    let (m, n) = matrix.dim();
    let mean = matrix.iter().copied().sum::<T>() / T::from_count(m * n);
    let scale = (mean.max(T::lit(1e-12)) / T::from_count(d)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |_| T::lit(rng.gen_range(0.05..1.0)) * scale;
    let mut w = Array2::from_shape_fn((m, d), &mut draw);
    let mut h = Array2::from_shape_fn((d, n), &mut draw);

    let update = |x: &mut Array2<T>, num: &Array2<T>, den: &Array2<T>| {
        for ((v, &a), &b) in x.iter_mut().zip(num.iter()).zip(den.iter()) {
            if b > T::zero() {
                *v = *v * a / b;
            }
        }
    };
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let wt = w.t();
        let num = wt.dot(matrix);
        let den = wt.dot(&w).dot(&h);
        update(&mut h, &num, &den);

        let ht = h.t();
        let num = matrix.dot(&ht);
        let den = w.dot(&h.dot(&ht));
        update(&mut w, &num, &den);

        trace.push(frobenius_sq(matrix, &w.dot(&h)));
    }
    Ok((
        FactorModel {
            user_factors: w,
            item_factors: h,
            latent_dim: d,
            kind: FactorKind::Nmf,
        },
        trace,
    ))
}

/// Modified Gram-Schmidt on the columns of `q`. Columns that collapse are
/// replaced by the first standard basis vector that survives orthogonalization.
fn orthonormalize<T: Scalar>(q: &mut Array2<T>) {
    let (rows, cols) = q.dim();
    let tol = T::lit(1e-10);
    let mut next_basis = 0;
    for k in 0..cols {
        let mut attempt = 0;
        loop {
            for p in 0..k {
                let proj: T = q.column(p).dot(&q.column(k));
                let col_p = q.column(p).to_owned();
                q.column_mut(k).scaled_add(-proj, &col_p);
            }
            let norm = q.column(k).dot(&q.column(k)).sqrt();
            if norm > tol || attempt > rows {
                if norm > T::zero() {
                    q.column_mut(k).mapv_inplace(|v| v / norm);
                }
                break;
            }
            let mut col = q.column_mut(k);
            col.fill(T::zero());
            col[next_basis % rows] = T::one();
            next_basis += 1;
            attempt += 1;
        }
    }
}

/// Truncated SVD by orthogonal power iteration on the item Gram matrix. The
/// item factors are the top-`d` right singular vectors, so the reconstruction
/// is the projection of each user row onto that subspace.
pub fn fit_svd<T: Scalar>(matrix: &Array2<T>, d: usize, iterations: usize, seed: u64) -> Result<FactorModel<T>> {
    check_dim(matrix, d)?;
    let gram = matrix.t().dot(matrix);
    let k = gram.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis = Array2::from_shape_fn((k, d), |_| T::lit(rng.gen_range(-1.0..1.0)));
    orthonormalize(&mut basis);
    for _ in 0..iterations {
        basis = gram.dot(&basis);
        orthonormalize(&mut basis);
    }
    // order the basis by captured energy
    let energy: Vec<T> = basis
        .axis_iter(Axis(1))
        .map(|c| c.dot(&gram.dot(&c)))
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| energy[b].partial_cmp(&energy[a]).unwrap_or(std::cmp::Ordering::Equal));
    let basis = basis.select(Axis(1), &order);
    Ok(FactorModel {
        user_factors: matrix.dot(&basis),
        item_factors: basis.t().to_owned(),
        latent_dim: d,
        kind: FactorKind::Svd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::argsort_desc;
    use ndarray::array;

    fn relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (frobenius_sq(a, b) / a.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    fn model() -> TransitionModel<f64> {
        // item 0 most frequent, then 1, 2, 3
        TransitionModel::build(4, &[vec![0, 1, 0, 2], vec![0, 1, 3], vec![0, 1, 2, 0, 2]]).unwrap()
    }

    #[test]
    fn popularity_ranking() {
        let m = model();
        let s = score_popularity(&m);
        assert_eq!(s.iter().cloned().fold(0.0, f64::max), 1.0);
        assert_eq!(s.iter().cloned().fold(1.0, f64::min), 0.0);
        assert_eq!(argsort_desc(&s), vec![0, 1, 2, 3]);
    }

    #[test]
    fn repeat_last_ranks_last_item_first() {
        let m = model();
        let s = score_repeat_last(&[1, 3], &m).unwrap();
        assert_eq!(argsort_desc(&s), vec![3, 0, 1, 2]);
        assert!(s.iter().enumerate().all(|(i, &v)| i == 3 || v < 1.0));
    }

    #[test]
    fn markov_cold_item_uses_popularity() {
        // item 3 never appears as a source
        let m = model();
        assert!(m.is_fallback(3));
        let s = score_markov(&[3], &m).unwrap();
        assert_eq!(argsort_desc(&s), argsort_desc(&score_popularity(&m)));
    }

    #[test]
    fn markov_hand_three_state_chain() {
        // 0 -> 1 twice, 0 -> 2 once, 0 -> 0 once
        let m = TransitionModel::<f64>::build(3, &[vec![0, 1], vec![0, 1], vec![0, 2], vec![0, 0]]).unwrap();
        let s = score_markov(&[2, 0], &m).unwrap();
        // row [1/4, 2/4, 1/4] -> [0, 1, 0]
        assert_eq!(s, vec![0.0, 1.0, 0.0]);
        let det = TransitionModel::<f64>::build(2, &[vec![0, 1]]).unwrap();
        assert_eq!(argsort_desc(&score_markov(&[0], &det).unwrap())[0], 1);
    }

    #[test]
    fn nmf_rank_one_is_exact() {
        let u = array![1.0, 2.0, 0.5, 3.0, 1.5];
        let v = array![0.2, 1.0, 4.0, 0.7];
        let x = Array2::from_shape_fn((5, 4), |(i, j)| u[i] * v[j]);
        let (m, _) = fit_nmf(&x, 1, 200, 7).unwrap();
        assert!(relative_error(&x, &m.reconstruct()) < 1e-6);
        assert!(m.user_factors.iter().chain(m.item_factors.iter()).all(|&v| v >= 0.0));
    }

    #[test]
    fn nmf_objective_never_increases() {
        let x = Array2::from_shape_fn((12, 9), |(i, j)| ((i * 7 + j * 3) % 5) as f64);
        let (_, trace) = fit_nmf(&x, 3, 200, 1).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn svd_full_rank_reconstructs() {
        let x = Array2::from_shape_fn((7, 5), |(i, j)| ((i * 5 + j * 3) % 4) as f64 + if i == j { 2.0 } else { 0.0 });
        let m = fit_svd(&x, 5, 50, 3).unwrap();
        assert!(relative_error(&x, &m.reconstruct()) < 1e-8);
        let wide = x.t().to_owned();
        let m = fit_svd(&wide, 5, 50, 3).unwrap();
        assert!(relative_error(&wide, &m.reconstruct()) < 1e-8);
    }

    #[test]
    fn svd_truncation_keeps_dominant_component() {
        let u = array![1.0, 2.0, 3.0, 4.0];
        let v = array![1.0, 0.0, 2.0];
        let x = Array2::from_shape_fn((4, 3), |(i, j)| u[i] * v[j]);
        let m = fit_svd(&x, 1, 50, 9).unwrap();
        assert!(relative_error(&x, &m.reconstruct()) < 1e-10);
    }

    #[test]
    fn oversized_dimension_is_an_error() {
        let x = Array2::<f64>::ones((3, 4));
        assert!(fit_svd(&x, 4, 10, 0).is_err());
        assert!(fit_nmf(&x, 0, 10, 0).is_err());
    }

    #[test]
    fn factor_scores_are_normalized_and_deterministic() {
        let x = Array2::from_shape_fn((10, 6), |(i, j)| ((i + 2 * j) % 3) as f64);
        for kind in [FactorKind::Nmf, FactorKind::Svd] {
            let cfg = FactorConfig::default();
            let a = fit_factor_model(&x, 2, kind, &cfg).unwrap();
            let b = fit_factor_model(&x, 2, kind, &cfg).unwrap();
            assert_eq!(a, b);
            let s = a.score_user(4).unwrap();
            assert!(s.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn svd_fold_in_of_a_training_row_matches_the_fit() {
        let x = Array2::from_shape_fn((9, 5), |(i, j)| ((i * 3 + j * 7) % 4) as f64);
        let m = fit_svd(&x, 3, 50, 2).unwrap();
        let row: Vec<f64> = x.row(4).to_vec();
        let z = m.fold_in(&row, None, 0).unwrap();
        for (a, b) in z.iter().zip(m.user_factors.row(4)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nmf_fold_in_stays_non_negative() {
        let x = Array2::from_shape_fn((9, 5), |(i, j)| ((i * 3 + j * 7) % 4) as f64);
        let (m, _) = fit_nmf(&x, 2, 200, 2).unwrap();
        let z = m.fold_in(&[1.0, 0.0, 2.0, 0.0, 1.0], None, 200).unwrap();
        assert!(z.iter().all(|&v| v >= 0.0));
        assert!(m.fold_in(&[1.0], None, 1).is_err());
    }
}
