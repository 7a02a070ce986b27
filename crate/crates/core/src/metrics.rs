//! Full-universe ranking and top-k metrics for a single held-out target.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CUTOFF: usize = 5;

/// 1-based rank of `target`: one plus the number of items scoring strictly
/// higher plus the number of equal-score items with a smaller index.
pub fn rank_target<T: PartialOrd + Copy>(scores: &[T], target: usize) -> Result<usize> {
    let t = *scores
        .get(target)
        .ok_or_else(|| Error::Dimension(format!("target {target} outside a universe of {}", scores.len())))?;
    if t.partial_cmp(&t).is_none() {
        return Err(Error::Precondition("target score is NaN".into()));
    }
    let mut rank = 1;
    for (i, &s) in scores.iter().enumerate() {
        match s.partial_cmp(&t) {
            Some(Ordering::Greater) => rank += 1,
            Some(Ordering::Equal) if i < target => rank += 1,
            Some(_) => {}
            None => return Err(Error::Precondition(format!("score of item {i} is NaN"))),
        }
    }
    Ok(rank)
}

/// Indices by descending score, ascending index among equal scores.
pub fn argsort_desc<T: PartialOrd>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingOutcome {
    pub user_id: String,
    pub target_id: String,
    pub rank: usize,
}

/// Top-k metrics of one relevant item.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub hr: f64,
    pub ndcg: f64,
    pub mrr: f64,
    pub precision: f64,
}

impl TopK {
    pub fn at(rank: usize, k: usize) -> Self {
        if rank == 0 || rank > k {
            return TopK::default();
        }
        TopK {
            hr: 1.0,
            ndcg: 1.0 / ((rank + 1) as f64).log2(),
            mrr: 1.0 / rank as f64,
            precision: 1.0 / k as f64,
        }
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Hr => self.hr,
            Metric::Ndcg => self.ndcg,
            Metric::Mrr => self.mrr,
        }
    }

    /// Mean over a slice of per-user outcomes; zeros for an empty slice.
    pub fn mean(values: &[TopK]) -> TopK {
        if values.is_empty() {
            return TopK::default();
        }
        let n = values.len() as f64;
        let mut acc = TopK::default();
        for v in values {
            acc.hr += v.hr;
            acc.ndcg += v.ndcg;
            acc.mrr += v.mrr;
            acc.precision += v.precision;
        }
        TopK {
            hr: acc.hr / n,
            ndcg: acc.ndcg / n,
            mrr: acc.mrr / n,
            precision: acc.precision / n,
        }
    }
}

pub fn metrics_at_5(rank: usize) -> TopK {
    TopK::at(rank, CUTOFF)
}

/// Headline metrics; precision is tracked but never an objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    Hr,
    #[default]
    Ndcg,
    Mrr,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Hr, Metric::Ndcg, Metric::Mrr];

    pub fn key(self) -> &'static str {
        match self {
            Metric::Hr => "hr@5",
            Metric::Ndcg => "ndcg@5",
            Metric::Mrr => "mrr@5",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_end_matches("@5") {
            "hr" => Ok(Metric::Hr),
            "ndcg" => Ok(Metric::Ndcg),
            "mrr" => Ok(Metric::Mrr),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}
