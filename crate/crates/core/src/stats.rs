//! Exact paired statistics over per-split metric differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sample for which the signed-rank null distribution is enumerated.
pub const MAX_EXACT_N: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Two-sided exact probability.
    pub p_value: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Non-zero differences.
    pub n: usize,
    pub dropped_zeros: usize,
    /// Every difference was zero; `p_value` is 1 by convention.
    pub all_zero: bool,
}

/// Mid-ranks of absolute values, doubled so they are integers.
fn doubled_midranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // positions i..=j share rank ((i+1) + (j+1)) / 2
        let doubled = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

fn nonzero(differences: &[f64]) -> Result<Vec<f64>> {
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(Error::Precondition("differences must be finite".into()));
    }
    Ok(differences.iter().copied().filter(|&d| d != 0.0).collect())
}

/// Signed-rank sums `(W+, W-)` over the non-zero differences.
pub fn signed_rank_sums(differences: &[f64]) -> Result<(f64, f64)> {
    let d = nonzero(differences)?;
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = doubled_midranks(&abs);
    let (mut plus, mut minus) = (0u64, 0u64);
    for (v, r) in d.iter().zip(ranks) {
        if *v > 0.0 {
            plus += r;
        } else {
            minus += r;
        }
    }
    Ok((plus as f64 / 2.0, minus as f64 / 2.0))
}

/// Two-sided exact Wilcoxon signed-rank test. Zeros are dropped, ties get
/// mid-ranks, and the p-value is the share of the `2^n` sign assignments whose
/// `min(W+, W-)` is at most the observed one.
pub fn wilcoxon_exact(differences: &[f64]) -> Result<WilcoxonResult> {
    let d = nonzero(differences)?;
    let dropped_zeros = differences.len() - d.len();
    let n = d.len();
    if n > MAX_EXACT_N {
        return Err(Error::Precondition(format!(
            "exact enumeration supports at most {MAX_EXACT_N} non-zero differences, got {n}"
        )));
    }
    if n == 0 {
        return Ok(WilcoxonResult {
            p_value: 1.0,
            w_plus: 0.0,
            w_minus: 0.0,
            n,
            dropped_zeros,
            all_zero: true,
        });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = doubled_midranks(&abs);
    let total: u64 = ranks.iter().sum();
    let plus: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let observed = plus.min(total - plus);

    // subset-sum counts of doubled positive-rank totals
    let mut ways = vec![0u64; total as usize + 1];
    ways[0] = 1;
    for &r in &ranks {
        let r = r as usize;
        for s in (r..ways.len()).rev() {
            ways[s] += ways[s - r];
        }
    }
    let extreme: u64 = ways
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as u64).min(total - s as u64) <= observed)
        .map(|(_, &c)| c)
        .sum();
    Ok(WilcoxonResult {
        p_value: extreme as f64 / (1u64 << n) as f64,
        w_plus: plus as f64 / 2.0,
        w_minus: (total - plus) as f64 / 2.0,
        n,
        dropped_zeros,
        all_zero: false,
    })
}

/// `(W+ - W-) / (W+ + W-)` over the non-zero differences.
pub fn rank_biserial(differences: &[f64]) -> Result<f64> {
    let (plus, minus) = signed_rank_sums(differences)?;
    if plus + minus == 0.0 {
        return Err(Error::Undefined("rank-biserial needs a non-zero difference".into()));
    }
    Ok((plus - minus) / (plus + minus))
}

/// Mean and population standard deviation.
pub fn mean_and_population_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Paired Cohen's d_z: mean difference over the population standard deviation.
pub fn cohens_dz(differences: &[f64]) -> Result<f64> {
    if differences.len() < 2 {
        return Err(Error::Undefined("d_z needs at least two differences".into()));
    }
    let (mean, sd) = mean_and_population_sd(differences);
    if sd == 0.0 {
        return Err(Error::Undefined("d_z is undefined for zero spread".into()));
    }
    Ok(mean / sd)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub p_value: f64,
    /// 0 when every difference is zero; see `zero_mass`.
    pub r_rb: f64,
    pub d_z: Option<f64>,
    /// Number of paired splits.
    pub n: usize,
    pub dropped_zeros: usize,
    pub zero_mass: bool,
    pub mean_difference: f64,
}

pub fn paired_test(differences: &[f64]) -> Result<PairedTestResult> {
    let w = wilcoxon_exact(differences)?;
    let r_rb = if w.all_zero { 0.0 } else { rank_biserial(differences)? };
    Ok(PairedTestResult {
        p_value: w.p_value,
        r_rb,
        d_z: cohens_dz(differences).ok(),
        n: differences.len(),
        dropped_zeros: w.dropped_zeros,
        zero_mass: w.all_zero,
        mean_difference: mean_and_population_sd(differences).0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerates every sign assignment directly.
    fn brute_force_p(differences: &[f64]) -> f64 {
        let d: Vec<f64> = differences.iter().copied().filter(|&v| v != 0.0).collect();
        let n = d.len();
        let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
        let mut ranks = vec![0.0; n];
        for i in 0..n {
            let less = abs.iter().filter(|&&a| a < abs[i]).count() as f64;
            let equal = abs.iter().filter(|&&a| a == abs[i]).count() as f64;
            ranks[i] = less + (equal + 1.0) / 2.0;
        }
        let total: f64 = ranks.iter().sum();
        let obs: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
        let obs_min = obs.min(total - obs);
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
            if w.min(total - w) <= obs_min + 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn all_positive_ten() {
        let d: Vec<f64> = (1..=10).map(|k| k as f64 * 0.01).collect();
        let w = wilcoxon_exact(&d).unwrap();
        assert_eq!(w.p_value, 0.001953125);
        assert_eq!(rank_biserial(&d).unwrap(), 1.0);
    }

    #[test]
    fn one_smallest_negative() {
        let mut d: Vec<f64> = (2..=10).map(|k| k as f64 * 0.01).collect();
        d.push(-0.01);
        assert_eq!(wilcoxon_exact(&d).unwrap().p_value, 0.00390625);
    }

    #[test]
    fn single_difference_and_all_zero() {
        assert_eq!(wilcoxon_exact(&[0.3]).unwrap().p_value, 1.0);
        let z = wilcoxon_exact(&[0.0; 4]).unwrap();
        assert!(z.all_zero);
        assert_eq!(z.p_value, 1.0);
        assert_eq!(z.dropped_zeros, 4);
        let t = paired_test(&[0.0; 10]).unwrap();
        assert!(t.zero_mass);
        assert_eq!((t.p_value, t.r_rb), (1.0, 0.0));
        assert!(t.d_z.is_none());
    }

    #[test]
    fn effect_sizes() {
        assert_eq!(rank_biserial(&[1.0, -1.0, 2.0, -2.0]).unwrap(), 0.0);
        assert!(cohens_dz(&[1.0, 1.0, 1.0, 1.0]).is_err());
        // mean 2, population sd 1
        assert_eq!(cohens_dz(&[1.0, 3.0]).unwrap(), 2.0);
        assert!(rank_biserial(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn too_many_for_enumeration() {
        assert!(wilcoxon_exact(&vec![1.0; 26]).is_err());
        assert!(wilcoxon_exact(&[1.0; 25]).is_ok());
    }

    #[test]
    fn population_sd() {
        let (m, s) = mean_and_population_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!((m, s), (5.0, 2.0));
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(d in prop::collection::vec(-4i32..=4, 1..=12)) {
            let d: Vec<f64> = d.into_iter().map(|v| v as f64 * 0.25).collect();
            let exact = wilcoxon_exact(&d).unwrap();
            if exact.all_zero {
                prop_assert_eq!(exact.p_value, 1.0);
            } else {
                let oracle = brute_force_p(&d);
                prop_assert!((exact.p_value - oracle).abs() < 1e-15, "{} vs {}", exact.p_value, oracle);
                prop_assert!(exact.p_value > 0.0 && exact.p_value <= 1.0);
            }
        }
    }
}
