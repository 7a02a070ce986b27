//! Transition-aware collaborative branch.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transitions::{min_max_normalize, TransitionModel};

/// Normalized exponential recency weights; the most recent position weighs most.
#[derive(Clone, Debug, PartialEq)]
pub struct RecencyWeights<T> {
    decay: T,
    weights: Vec<T>,
}

impl<T: Scalar> RecencyWeights<T> {
    /// Position `t` (1-based, `t = len` most recent) gets `decay^(len - t)`
    /// before normalization.
    pub fn new(len: usize, decay: T) -> Result<Self> {
        if len == 0 {
            return Err(Error::Precondition("recency weights need at least one position".into()));
        }
        if !(decay > T::zero() && decay <= T::one()) {
            return Err(Error::Config(format!("decay must lie in (0, 1], got {decay}")));
        }
        let raw: Vec<T> = (0..len).map(|t| decay.powi((len - 1 - t) as i32)).collect();
        let total: T = raw.iter().copied().sum();
        Ok(RecencyWeights {
            decay,
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn decay(&self) -> T {
        self.decay
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfConfig<T> {
    /// Weight of the last-item transition vector.
    pub beta: T,
    /// Share of transition (vs similarity) evidence in the history component.
    pub gamma: T,
    pub decay: T,
}

impl<T: Scalar> Default for CfConfig<T> {
    fn default() -> Self {
        CfConfig {
            beta: T::lit(0.85),
            gamma: T::lit(0.7),
            decay: T::lit(0.8),
        }
    }
}

impl<T: Scalar> CfConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if !unit(self.beta) || !unit(self.gamma) {
            return Err(Error::Config("cf beta and gamma must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Collaborative score over all items for a chronological prefix:
///
/// `beta * p~(last) + (1 - beta) * [gamma * sum_t rho_t p~(h_t) + (1 - gamma) * sum_t rho_t sigma~(h_t)]`
///
/// where `~` is per-row min-max normalization, followed by a final min-max
/// pass. A cold last item contributes the popularity prior instead of its
/// uniform fallback row, so `beta = 1` ranks exactly like item Markov.
pub fn score_cf<T: Scalar>(prefix: &[usize], model: &TransitionModel<T>, config: &CfConfig<T>) -> Result<Vec<T>> {
    let last = *prefix
        .last()
        .ok_or_else(|| Error::Precondition("collaborative scoring needs a non-empty prefix".into()))?;
    for &h in prefix {
        model.check_item(h)?;
    }
    let n = model.n_items();
    let rho = RecencyWeights::new(prefix.len(), config.decay)?;

    let mut trans_hist = vec![T::zero(); n];
    let mut sim_hist = vec![T::zero(); n];
    for (&h, &w) in prefix.iter().zip(rho.weights()) {
        let p = min_max_normalize(&model.probs_row(h).to_vec());
        let s = min_max_normalize(&model.sims_row(h).to_vec());
        for i in 0..n {
            trans_hist[i] = trans_hist[i] + w * p[i];
            sim_hist[i] = sim_hist[i] + w * s[i];
        }
    }
    let last_row = min_max_normalize(&model.last_item_row(last));

    let beta = config.beta;
    let gamma = config.gamma;
    let raw: Vec<T> = (0..n)
        .map(|i| {
            beta * last_row[i]
                + (T::one() - beta) * (gamma * trans_hist[i] + (T::one() - gamma) * sim_hist[i])
        })
        .collect();
    Ok(min_max_normalize(&raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::score_markov;
    use crate::metrics::argsort_desc;
    use approx::assert_relative_eq;

    #[test]
    fn recency_examples() {
        assert_eq!(RecencyWeights::new(1, 0.8f64).unwrap().weights(), &[1.0]);
        let w = RecencyWeights::new(3, 0.5f64).unwrap();
        assert_relative_eq!(w.weights()[0], 1.0 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(w.weights()[1], 2.0 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(w.weights()[2], 4.0 / 7.0, epsilon = 1e-15);
        for t in 1..10 {
            let w = RecencyWeights::new(t, 1.0f64).unwrap();
            for &x in w.weights() {
                assert_relative_eq!(x, 1.0 / t as f64, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn recency_is_monotone_and_sums_to_one() {
        let w = RecencyWeights::new(7, 0.8f64).unwrap();
        let s: f64 = w.weights().iter().sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-15);
        assert!(w.weights().windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn one_hot_successor_wins() {
        // A -> B only
        let m = TransitionModel::<f64>::build(3, &[vec![0, 1], vec![0, 1]]).unwrap();
        let s = score_cf(&[0], &m, &CfConfig::default()).unwrap();
        assert_eq!(argsort_desc(&s)[0], 1);
    }

    #[test]
    fn matches_hand_evaluation_on_three_items() {
        // corpus: A->B, A->C, B->C, C->A, B->B
        let m = TransitionModel::<f64>::build(3, &[vec![0, 1, 2, 0], vec![0, 2], vec![1, 1]]).unwrap();
        let cfg = CfConfig {
            beta: 0.85,
            gamma: 0.7,
            decay: 0.5,
        };
        let got = score_cf(&[0, 1], &m, &cfg).unwrap();

        // counts: A=[0,1,1], B=[0,1,1], C=[1,0,0]
        // probs:  A=[0,.5,.5], B=[0,.5,.5]; normalized rows: [0,1,1]
        // sims: A·B = 2/(√2√2) = 1, A·C = 0, B·C = 0; rows A=[1,1,0], B=[1,1,0]
        // rho = [1/3, 2/3]
        let p_a = [0.0, 1.0, 1.0];
        let p_b = [0.0, 1.0, 1.0];
        let s_a = [1.0, 1.0, 0.0];
        let s_b = [1.0, 1.0, 0.0];
        let rho = [1.0 / 3.0, 2.0 / 3.0];
        let raw: Vec<f64> = (0..3)
            .map(|i| {
                0.85 * p_b[i]
                    + 0.15
                        * (0.7 * (rho[0] * p_a[i] + rho[1] * p_b[i])
                            + 0.3 * (rho[0] * s_a[i] + rho[1] * s_b[i]))
            })
            .collect();
        let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..3 {
            assert_relative_eq!(got[i], (raw[i] - lo) / (hi - lo), epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_one_is_item_markov() {
        let m = TransitionModel::<f64>::build(4, &[vec![0, 1, 2, 1, 3], vec![2, 2, 0]]).unwrap();
        let cfg = CfConfig {
            beta: 1.0,
            ..CfConfig::default()
        };
        for prefix in [vec![0usize], vec![1, 2], vec![3], vec![2, 0, 1]] {
            let cf = score_cf(&prefix, &m, &cfg).unwrap();
            let markov = score_markov(&prefix, &m).unwrap();
            assert_eq!(cf, markov);
        }
    }

    #[test]
    fn output_is_unit_range() {
        let m = TransitionModel::<f32>::build(4, &[vec![0, 1, 2, 1, 3], vec![2, 2, 0]]).unwrap();
        let s = score_cf(&[2, 1], &m, &CfConfig::default()).unwrap();
        assert!(s.iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert!(s.contains(&1.0) && s.contains(&0.0));
    }

    #[test]
    fn empty_prefix_and_unknown_item_are_errors() {
        let m = TransitionModel::<f64>::build(2, &[vec![0, 1]]).unwrap();
        assert!(score_cf(&[], &m, &CfConfig::default()).is_err());
        assert!(matches!(
            score_cf(&[5], &m, &CfConfig::default()),
            Err(Error::UnknownOccupation(_))
        ));
    }

    #[test]
    fn permuting_items_permutes_scores() {
        let seqs = vec![vec![0usize, 1, 2, 3, 1], vec![3, 3, 2, 0], vec![1, 0, 2]];
        let perm = [2usize, 0, 3, 1];
        let permuted: Vec<Vec<usize>> = seqs.iter().map(|s| s.iter().map(|&i| perm[i]).collect()).collect();
        let m = TransitionModel::<f64>::build(4, &seqs).unwrap();
        let mp = TransitionModel::<f64>::build(4, &permuted).unwrap();
        let prefix = [3usize, 1];
        let s = score_cf(&prefix, &m, &CfConfig::default()).unwrap();
        let sp = score_cf(&[perm[3], perm[1]], &mp, &CfConfig::default()).unwrap();
        for i in 0..4 {
            assert_relative_eq!(s[i], sp[perm[i]], epsilon = 1e-12);
        }
    }
}
