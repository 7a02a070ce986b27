//! Late fusion of branch scores and validation-driven weight selection.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Convex weights of the collaborative, bandit and TOPSIS branches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionWeights<T> {
    pub cf: T,
    pub rl: T,
    pub topsis: T,
}

impl<T: Scalar> FusionWeights<T> {
    pub fn new(cf: T, rl: T, topsis: T) -> Result<Self> {
        let w = FusionWeights { cf, rl, topsis };
        if cf < T::zero() || rl < T::zero() || topsis < T::zero() {
            return Err(Error::Config(format!("fusion weights must be non-negative, got {w:?}")));
        }
        if (cf + rl + topsis - T::one()).abs() > T::lit(1e-12) {
            return Err(Error::Config(format!("fusion weights must sum to 1, got {w:?}")));
        }
        Ok(w)
    }

    /// `cf` and `rl` given, TOPSIS takes the remaining mass.
    pub fn with_remainder(cf: T, rl: T) -> Result<Self> {
        Self::new(cf, rl, (T::one() - cf - rl).max(T::zero()))
    }

    pub fn cf_only() -> Self {
        FusionWeights {
            cf: T::one(),
            rl: T::zero(),
            topsis: T::zero(),
        }
    }
}

/// Elementwise `cf * s_cf + rl * s_rl + topsis * s_t`.
pub fn fuse<T: Scalar>(s_cf: &[T], s_rl: &[T], s_t: &[T], w: &FusionWeights<T>) -> Result<Vec<T>> {
    if s_cf.len() != s_rl.len() || s_cf.len() != s_t.len() {
        return Err(Error::Dimension(format!(
            "branch lengths differ: {}, {}, {}",
            s_cf.len(),
            s_rl.len(),
            s_t.len()
        )));
    }
    Ok(fuse_unchecked(s_cf, s_rl, s_t, w))
}

pub(crate) fn fuse_unchecked<T: Scalar>(s_cf: &[T], s_rl: &[T], s_t: &[T], w: &FusionWeights<T>) -> Vec<T> {
    s_cf.iter()
        .zip(s_rl)
        .zip(s_t)
        .map(|((&c, &r), &t)| w.cf * c + w.rl * r + w.topsis * t)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMode {
    /// CF and RL both searched.
    Full,
    /// RL pinned to 0.
    CfTopsis,
    /// CF pinned to 0.
    RlTopsis,
}

/// Default collaborative grid `0.0, 0.1, ..., 0.7`.
pub fn default_cf_grid() -> Vec<f64> {
    (0..=7).map(|k| k as f64 / 10.0).collect()
}

/// Default bandit grid `0.0, 0.1, ..., 0.5`.
pub fn default_rl_grid() -> Vec<f64> {
    (0..=5).map(|k| k as f64 / 10.0).collect()
}

/// Default TOPSIS mixing grid.
pub fn default_alpha_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

/// Enumerates `(cf, rl, 1 - cf - rl)` over the grids, keeping pairs whose
/// sum does not exceed 1.
pub fn enumerate_lambda_grid<T: Scalar>(mode: GridMode, cf_grid: &[f64], rl_grid: &[f64]) -> Vec<FusionWeights<T>> {
    let zero = [0.0];
    let (cfs, rls): (&[f64], &[f64]) = match mode {
        GridMode::Full => (cf_grid, rl_grid),
        GridMode::CfTopsis => (cf_grid, &zero),
        GridMode::RlTopsis => (&zero, rl_grid),
    };
    let mut out = Vec::new();
    for &cf in cfs {
        for &rl in rls {
            if cf + rl <= 1.0 + 1e-9 {
                let t = (1.0 - cf - rl).max(0.0);
                out.push(FusionWeights {
                    cf: T::lit(cf),
                    rl: T::lit(rl),
                    topsis: T::lit(t),
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint<T> {
    pub weights: FusionWeights<T>,
    pub alpha: T,
    pub metric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult<T> {
    pub chosen: FusionWeights<T>,
    pub chosen_alpha: T,
    /// Mean validation objective of the chosen point.
    pub validation_metric: f64,
    /// Metric of the chosen alpha in the TOPSIS-only stage.
    pub alpha_metric: f64,
    /// Alpha stage first (weights are TOPSIS-only), then the lambda stage.
    pub alpha_trace: Vec<GridPoint<T>>,
    pub lambda_trace: Vec<GridPoint<T>>,
}

/// Better alpha: higher metric, then smaller alpha.
fn alpha_order<T: Scalar>(a: &GridPoint<T>, b: &GridPoint<T>) -> Ordering {
    a.metric
        .total_cmp(&b.metric)
        .then_with(|| b.alpha.partial_cmp(&a.alpha).unwrap_or(Ordering::Equal))
}

/// Better weights: higher metric, then larger CF, then larger TOPSIS weight.
fn lambda_order<T: Scalar>(a: &GridPoint<T>, b: &GridPoint<T>) -> Ordering {
    a.metric
        .total_cmp(&b.metric)
        .then_with(|| a.weights.cf.partial_cmp(&b.weights.cf).unwrap_or(Ordering::Equal))
        .then_with(|| a.weights.topsis.partial_cmp(&b.weights.topsis).unwrap_or(Ordering::Equal))
}

fn best_by<T: Scalar>(points: &[GridPoint<T>], order: fn(&GridPoint<T>, &GridPoint<T>) -> Ordering) -> GridPoint<T> {
    let mut best = points[0];
    for p in &points[1..] {
        if order(p, &best) == Ordering::Greater {
            best = *p;
        }
    }
    best
}

/// Chooses alpha by the TOPSIS-only validation metric, then the fusion
/// weights with alpha held fixed. `alpha_metric(alpha)` and
/// `lambda_metric(alpha, weights)` return mean validation objectives; grid
/// points are evaluated in parallel and reduced in grid order.
pub fn select<T, A, L>(
    alpha_grid: &[T],
    lambda_grid: &[FusionWeights<T>],
    alpha_metric: A,
    lambda_metric: L,
) -> Result<SelectionResult<T>>
where
    T: Scalar,
    A: Fn(T) -> Result<f64> + Sync,
    L: Fn(T, &FusionWeights<T>) -> Result<f64> + Sync,
{
    if alpha_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::Config("selection grids must be non-empty".into()));
    }
    let topsis_only = FusionWeights {
        cf: T::zero(),
        rl: T::zero(),
        topsis: T::one(),
    };
    let alpha_trace = alpha_grid
        .par_iter()
        .map(|&alpha| {
            Ok(GridPoint {
                weights: topsis_only,
                alpha,
                metric: alpha_metric(alpha)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_alpha = best_by(&alpha_trace, alpha_order);

    let lambda_trace = lambda_grid
        .par_iter()
        .map(|w| {
            Ok(GridPoint {
                weights: *w,
                alpha: best_alpha.alpha,
                metric: lambda_metric(best_alpha.alpha, w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = best_by(&lambda_trace, lambda_order);

    Ok(SelectionResult {
        chosen: best.weights,
        chosen_alpha: best_alpha.alpha,
        validation_metric: best.metric,
        alpha_metric: best_alpha.metric,
        alpha_trace,
        lambda_trace,
    })
}
