//! Entropy-weighted TOPSIS branch over six occupation-side proxies.

use std::collections::BTreeSet;
use std::fmt;

use ndarray::Array2;

use crate::benchmark::OccupationRecord;
use crate::cf::RecencyWeights;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text::{contains_phrase, raw_tokens, tokenize};
use crate::transitions::{min_max_normalize, TransitionModel};

pub const N_CRITERIA: usize = 6;

/// Shift applied before the entropy logarithms.
pub const ENTROPY_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Criterion {
    MarketPrevalence,
    SkillBreadth,
    DigitalSkillDensity,
    InnovationIntensity,
    RoleLevel,
    TransitionMobility,
}

impl Criterion {
    pub const ALL: [Criterion; N_CRITERIA] = [
        Criterion::MarketPrevalence,
        Criterion::SkillBreadth,
        Criterion::DigitalSkillDensity,
        Criterion::InnovationIntensity,
        Criterion::RoleLevel,
        Criterion::TransitionMobility,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::MarketPrevalence => "Market prevalence",
            Criterion::SkillBreadth => "Skill breadth",
            Criterion::DigitalSkillDensity => "Digital skill density",
            Criterion::InnovationIntensity => "Innovation intensity",
            Criterion::RoleLevel => "Role level",
            Criterion::TransitionMobility => "Transition mobility",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Criterion::MarketPrevalence => "market_prevalence",
            Criterion::SkillBreadth => "skill_breadth",
            Criterion::DigitalSkillDensity => "digital_skill_density",
            Criterion::InnovationIntensity => "innovation_intensity",
            Criterion::RoleLevel => "role_level",
            Criterion::TransitionMobility => "transition_mobility",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Item-by-criterion matrix with an activity mask for leave-one-out runs.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionMatrix<T> {
    values: Array2<T>,
    active: [bool; N_CRITERIA],
}

impl<T: Scalar> CriterionMatrix<T> {
    pub fn new(values: Array2<T>) -> Result<Self> {
        if values.ncols() != N_CRITERIA {
            return Err(Error::Dimension(format!(
                "criterion matrix needs {N_CRITERIA} columns, got {}",
                values.ncols()
            )));
        }
        if values.iter().any(|&v| !v.is_finite() || v < T::zero()) {
            return Err(Error::Precondition("criterion values must be finite and non-negative".into()));
        }
        Ok(CriterionMatrix {
            values,
            active: [true; N_CRITERIA],
        })
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn n_items(&self) -> usize {
        self.values.nrows()
    }

    pub fn active(&self) -> &[bool; N_CRITERIA] {
        &self.active
    }

    pub fn is_active(&self, c: Criterion) -> bool {
        self.active[c.index()]
    }

    fn active_columns(&self) -> impl Iterator<Item = usize> + '_ {
        (0..N_CRITERIA).filter(|&j| self.active[j])
    }

    pub fn with_active(&self, c: Criterion, on: bool) -> Result<Self> {
        let mut next = self.clone();
        next.active[c.index()] = on;
        if !next.active.iter().any(|&a| a) {
            return Err(Error::Precondition("cannot deactivate the last active criterion".into()));
        }
        Ok(next)
    }

    pub fn dump_tsv(&self, ids: &[&str]) -> String {
        let mut out = String::from("occupation");
        for c in Criterion::ALL {
            out.push('\t');
            out.push_str(c.name());
        }
        out.push('\n');
        for (k, id) in ids.iter().enumerate() {
            out.push_str(id);
            for j in 0..N_CRITERIA {
                out.push_str(&format!("\t{}", self.values[(k, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Flips one criterion off; the remaining computations use active columns only.
pub fn deactivate_proxy<T: Scalar>(x: &CriterionMatrix<T>, c: Criterion) -> Result<CriterionMatrix<T>> {
    x.with_active(c, false)
}

/// Term lists behind the text-derived proxies.
#[derive(Clone, Debug, PartialEq)]
pub struct LexiconConfig {
    pub digital_terms: BTreeSet<String>,
    pub innovation_terms: BTreeSet<String>,
    /// Title cue and its level score; the highest matching cue wins.
    pub role_cues: Vec<(String, f64)>,
}

const DEFAULT_DIGITAL_TERMS: &[&str] = &[
    "software", "programming", "code", "coding", "cloud", "database", "databases", "sql", "network",
    "networks", "web", "internet", "digital", "computer", "computing", "ict", "data", "analytics",
    "cybersecurity", "security", "linux", "javascript", "python", "java", "api", "devops",
    "automation", "algorithms", "ai", "iot", "blockchain", "html", "css", "git", "server", "servers",
    "virtualization", "online",
];

const DEFAULT_INNOVATION_TERMS: &[&str] = &["ai", "cloud", "security", "automation", "iot", "blockchain"];

const DEFAULT_ROLE_CUES: &[(&str, f64)] = &[
    ("technician", 1.0),
    ("analyst", 2.0),
    ("engineer", 3.0),
    ("developer", 3.0),
    ("architect", 4.0),
    ("manager", 5.0),
];

impl Default for LexiconConfig {
    fn default() -> Self {
        LexiconConfig {
            digital_terms: DEFAULT_DIGITAL_TERMS.iter().map(|s| s.to_string()).collect(),
            innovation_terms: DEFAULT_INNOVATION_TERMS.iter().map(|s| s.to_string()).collect(),
            role_cues: DEFAULT_ROLE_CUES.iter().map(|(c, s)| (c.to_string(), *s)).collect(),
        }
    }
}

impl LexiconConfig {
    /// One term per line, `#` comments allowed.
    pub fn parse_terms(text: &str) -> BTreeSet<String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect()
    }

    /// `cue<TAB>score` lines.
    pub fn parse_role_cues(text: &str) -> Result<Vec<(String, f64)>> {
        let mut cues = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Parse {
                source_name: "role cues".into(),
                line: k + 1,
                message: "expected cue<TAB>positive score".into(),
            };
            let (cue, score) = line.split_once('\t').ok_or_else(bad)?;
            let score: f64 = score.trim().parse().map_err(|_| bad())?;
            if !(score > 0.0) {
                return Err(bad());
            }
            cues.push((cue.trim().to_lowercase(), score));
        }
        Ok(cues)
    }

    /// Highest cue score found in the title, 0 when nothing matches.
    pub fn role_score(&self, title: &str) -> f64 {
        let tokens = raw_tokens(title);
        self.role_cues
            .iter()
            .filter(|(cue, _)| {
                let phrase: Vec<&str> = cue.split_whitespace().collect();
                contains_phrase(&tokens, &phrase)
            })
            .map(|(_, s)| *s)
            .fold(0.0, f64::max)
    }
}

/// Raw (pre-normalization) text proxies of one occupation:
/// `(skill breadth, digital density, distinct innovation terms, role score)`.
pub fn text_proxies(item: &OccupationRecord, lexicon: &LexiconConfig) -> (usize, f64, usize, f64) {
    let skills: BTreeSet<&str> = item.skill_terms.iter().map(String::as_str).collect();
    let informative: BTreeSet<String> = tokenize(&item.description)
        .into_iter()
        .filter(|t| t.chars().count() >= 4 && !skills.contains(t.as_str()))
        .collect();
    let breadth = item.skill_terms.len() + informative.len();

    let terms: Vec<String> = tokenize(&item.description)
        .into_iter()
        .chain(item.skill_terms.iter().cloned())
        .collect();
    let digital = if terms.is_empty() {
        0.0
    } else {
        terms.iter().filter(|t| lexicon.digital_terms.contains(*t)).count() as f64 / terms.len() as f64
    };

    let mut vocabulary: BTreeSet<String> = raw_tokens(&item.description).into_iter().collect();
    for s in &item.skill_terms {
        vocabulary.insert(s.clone());
        vocabulary.extend(raw_tokens(s));
    }
    let innovation = lexicon
        .innovation_terms
        .iter()
        .filter(|t| vocabulary.contains(*t))
        .count();

    (breadth, digital, innovation, lexicon.role_score(&item.title))
}

/// Builds the six proxy columns. Prevalence and mobility come from a model fit
/// on training prefixes only.
pub fn build_criterion_matrix<T: Scalar>(
    items: &[OccupationRecord],
    model: &TransitionModel<T>,
    lexicon: &LexiconConfig,
) -> Result<CriterionMatrix<T>> {
    let n = items.len();
    if model.n_items() != n {
        return Err(Error::Dimension(format!(
            "{} items but transition model over {}",
            n,
            model.n_items()
        )));
    }
    let proxies: Vec<_> = items.iter().map(|i| text_proxies(i, lexicon)).collect();
    let breadth = min_max_normalize(&proxies.iter().map(|p| T::from_count(p.0)).collect::<Vec<_>>());
    let digital: Vec<T> = proxies.iter().map(|p| T::lit(p.1)).collect();
    let innovation = min_max_normalize(&proxies.iter().map(|p| T::from_count(p.2)).collect::<Vec<_>>());
    let role = min_max_normalize(&proxies.iter().map(|p| T::lit(p.3)).collect::<Vec<_>>());
    let mobility = min_max_normalize(
        &(0..n)
            .map(|j| T::from_count(model.distinct_successors(j)))
            .collect::<Vec<_>>(),
    );
    let columns = [model.popularity().to_vec(), breadth, digital, innovation, role, mobility];
    let values = Array2::from_shape_fn((n, N_CRITERIA), |(i, j)| columns[j][i]);
    CriterionMatrix::new(values)
}

/// Global entropy weights over the active criteria; inactive entries are 0.
pub fn entropy_weights<T: Scalar>(x: &CriterionMatrix<T>) -> Vec<T> {
    let m = x.n_items();
    let eps = T::lit(ENTROPY_EPSILON);
    let mut divergence = [T::zero(); N_CRITERIA];
    if m > 1 {
        let log_m = T::from_count(m).ln();
        for j in x.active_columns() {
            let col = x.values.column(j);
            let (lo, hi) = col
                .iter()
                .fold((col[0], col[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if hi == lo {
                // a constant column carries no information
                continue;
            }
            let total: T = col.iter().map(|&v| v + eps).sum();
            let entropy: T = col
                .iter()
                .map(|&v| {
                    let p = (v + eps) / total;
                    p * p.ln()
                })
                .sum();
            let e = -entropy / log_m;
            divergence[j] = (T::one() - e).max(T::zero());
        }
    }
    let sum: T = divergence.iter().copied().sum();
    let mut w = vec![T::zero(); N_CRITERIA];
    if sum > T::zero() {
        for j in x.active_columns() {
            w[j] = divergence[j] / sum;
        }
    } else {
        let k = T::from_count(x.active_columns().count());
        for j in x.active_columns() {
            w[j] = T::one() / k;
        }
    }
    w
}

/// Recency-weighted criterion profile of a prefix, normalized to the simplex
/// over active criteria; falls back to `global` when the profile is all zero.
pub fn user_weights<T: Scalar>(prefix: &[usize], x: &CriterionMatrix<T>, decay: T, global: &[T]) -> Result<Vec<T>> {
    let rho = RecencyWeights::new(prefix.len(), decay)?;
    let mut profile = vec![T::zero(); N_CRITERIA];
    for (&h, &w) in prefix.iter().zip(rho.weights()) {
        if h >= x.n_items() {
            return Err(Error::UnknownOccupation(format!("item index {h}")));
        }
        for j in x.active_columns() {
            profile[j] = profile[j] + w * x.values[(h, j)];
        }
    }
    let total: T = profile.iter().copied().sum();
    if total <= T::zero() {
        return Ok(global.to_vec());
    }
    Ok(profile.into_iter().map(|p| p / total).collect())
}

/// `alpha * user + (1 - alpha) * global`.
pub fn mix_weights<T: Scalar>(user: &[T], global: &[T], alpha: T) -> Vec<T> {
    user.iter()
        .zip(global)
        .map(|(&u, &g)| alpha * u + (T::one() - alpha) * g)
        .collect()
}

/// Global, user-conditioned and mixed weight vectors of one query.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionWeights<T> {
    pub global: Vec<T>,
    pub user: Vec<T>,
    pub alpha: T,
    pub mixed: Vec<T>,
}

impl<T: Scalar> CriterionWeights<T> {
    pub fn compute(prefix: &[usize], x: &CriterionMatrix<T>, decay: T, global: &[T], alpha: T) -> Result<Self> {
        let user = user_weights(prefix, x, decay, global)?;
        let mixed = mix_weights(&user, global, alpha);
        Ok(CriterionWeights {
            global: global.to_vec(),
            user,
            alpha,
            mixed,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TopsisNormalization {
    /// Root-sum-square column normalization.
    #[default]
    Vector,
    MinMax,
}

impl std::str::FromStr for TopsisNormalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "vector" => Ok(TopsisNormalization::Vector),
            "minmax" | "min-max" | "min_max" => Ok(TopsisNormalization::MinMax),
            other => Err(Error::Config(format!("unknown TOPSIS normalization {other:?}"))),
        }
    }
}

/// Column-normalized criteria, reusable across weight vectors.
#[derive(Clone, Debug)]
pub struct TopsisModel<T> {
    normalized: Array2<T>,
    col_max: [T; N_CRITERIA],
    col_min: [T; N_CRITERIA],
    active: [bool; N_CRITERIA],
}

impl<T: Scalar> TopsisModel<T> {
    pub fn new(x: &CriterionMatrix<T>, normalization: TopsisNormalization) -> Self {
        let mut normalized = Array2::<T>::zeros(x.values.dim());
        let mut col_max = [T::zero(); N_CRITERIA];
        let mut col_min = [T::zero(); N_CRITERIA];
        for j in x.active_columns() {
            let col = x.values.column(j);
            let scaled: Vec<T> = match normalization {
                TopsisNormalization::Vector => {
                    let norm = col.iter().map(|&v| v * v).sum::<T>().sqrt();
                    if norm > T::zero() {
                        col.iter().map(|&v| v / norm).collect()
                    } else {
                        vec![T::zero(); col.len()]
                    }
                }
                TopsisNormalization::MinMax => min_max_normalize(&col.to_vec()),
            };
            for (dst, v) in normalized.column_mut(j).iter_mut().zip(&scaled) {
                *dst = *v;
            }
            let (lo, hi) = crate::transitions::min_max(&scaled).unwrap_or((T::zero(), T::zero()));
            col_min[j] = lo;
            col_max[j] = hi;
        }
        TopsisModel {
            normalized,
            col_max,
            col_min,
            active: x.active,
        }
    }

    /// Relative closeness `D- / (D+ + D-)` under benefit criteria, 0.5 when
    /// both distances vanish.
    pub fn closeness(&self, weights: &[T]) -> Vec<T> {
        let half = T::lit(0.5);
        self.normalized
            .rows()
            .into_iter()
            .map(|row| {
                let mut d_plus = T::zero();
                let mut d_minus = T::zero();
                for j in 0..N_CRITERIA {
                    if !self.active[j] {
                        continue;
                    }
                    let w = weights[j];
                    let to_ideal = w * (row[j] - self.col_max[j]);
                    let to_anti = w * (row[j] - self.col_min[j]);
                    d_plus = d_plus + to_ideal * to_ideal;
                    d_minus = d_minus + to_anti * to_anti;
                }
                let (d_plus, d_minus) = (d_plus.sqrt(), d_minus.sqrt());
                let denom = d_plus + d_minus;
                if denom > T::zero() {
                    d_minus / denom
                } else {
                    half
                }
            })
            .collect()
    }

    /// Closeness min-max normalized for fusion.
    pub fn scores(&self, weights: &[T]) -> Vec<T> {
        min_max_normalize(&self.closeness(weights))
    }
}

pub fn closeness<T: Scalar>(x: &CriterionMatrix<T>, weights: &[T], normalization: TopsisNormalization) -> Vec<T> {
    TopsisModel::new(x, normalization).closeness(weights)
}

pub fn topsis_scores<T: Scalar>(x: &CriterionMatrix<T>, weights: &[T], normalization: TopsisNormalization) -> Vec<T> {
    TopsisModel::new(x, normalization).scores(weights)
}
