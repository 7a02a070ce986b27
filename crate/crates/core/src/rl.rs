//! Occupation-family bandit branch.
//!
//! A 6x6 family-to-family value table is trained with the one-step rule
//! `Q <- Q + eta (r - Q)` (no bootstrapped future term): observed transitions
//! are rewarded, sampled alternative families are mildly penalized. Scores
//! mix the table row of the user's last family with a recency-weighted family
//! profile and a popularity prior.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchmark::OccupationRecord;
use crate::cf::RecencyWeights;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::text::{contains_phrase, raw_tokens};
use crate::transitions::min_max_normalize;

pub const N_FAMILIES: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    SoftwareEngineering,
    InfrastructureSecurity,
    DataAi,
    DigitalExperience,
    HardwareAutomation,
    TechnologyManagement,
}

impl Family {
    pub const ALL: [Family; N_FAMILIES] = [
        Family::SoftwareEngineering,
        Family::InfrastructureSecurity,
        Family::DataAi,
        Family::DigitalExperience,
        Family::HardwareAutomation,
        Family::TechnologyManagement,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(k: usize) -> Option<Family> {
        Self::ALL.get(k).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::SoftwareEngineering => "software engineering",
            Family::InfrastructureSecurity => "infrastructure and security",
            Family::DataAi => "data and AI",
            Family::DigitalExperience => "digital experience",
            Family::HardwareAutomation => "hardware and automation",
            Family::TechnologyManagement => "technology management",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_lowercase().replace(['_', '-'], " ");
        Family::ALL
            .into_iter()
            .find(|f| f.name().to_lowercase() == key)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Title keyword rules, checked in order; the first family with a matching
/// cue wins and unmatched titles fall back to software engineering.
const KEYWORD_RULES: [(Family, &[&str]); 6] = [
    (
        Family::TechnologyManagement,
        &["manager", "management", "director", "chief", "head of", "enterprise architect", "officer"],
    ),
    (
        Family::DigitalExperience,
        &["user interface", "user experience", "ui", "ux", "web", "designer", "interface", "frontend", "front end"],
    ),
    (
        Family::DataAi,
        &["data", "machine learning", "ai", "artificial intelligence", "statistical", "analytics", "business intelligence"],
    ),
    (
        Family::InfrastructureSecurity,
        &["network", "security", "administrator", "cloud", "infrastructure", "help desk", "support", "devops", "cyber"],
    ),
    (
        Family::HardwareAutomation,
        &["hardware", "embedded", "automation", "technician", "electronics", "robotics", "iot"],
    ),
    (
        Family::SoftwareEngineering,
        &["developer", "engineer", "programmer", "software", "application", "tester"],
    ),
];

/// Family assignment over dense item indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyTaxonomy {
    family_of: Vec<Family>,
}

impl FamilyTaxonomy {
    pub fn new(family_of: Vec<Family>) -> Self {
        FamilyTaxonomy { family_of }
    }

    /// Default, non-canonical assignment from title keywords.
    pub fn from_titles(items: &[OccupationRecord]) -> Self {
        FamilyTaxonomy {
            family_of: items.iter().map(|i| family_from_title(&i.title)).collect(),
        }
    }

    /// Parses `occupation_id<TAB>family_name` lines; every item must be listed.
    pub fn parse(text: &str, items: &[OccupationRecord]) -> Result<Self> {
        let index: HashMap<&str, usize> = items
            .iter()
            .enumerate()
            .map(|(k, i)| (i.occupation_id.as_str(), k))
            .collect();
        let mut family_of: Vec<Option<Family>> = vec![None; items.len()];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, fam) = line.split_once('\t').ok_or_else(|| Error::Parse {
                source_name: "taxonomy".into(),
                line: lineno + 1,
                message: "expected occupation_id<TAB>family_name".into(),
            })?;
            let k = *index
                .get(id.trim())
                .ok_or_else(|| Error::UnknownOccupation(id.trim().to_string()))?;
            family_of[k] = Some(fam.parse()?);
        }
        let family_of = family_of
            .into_iter()
            .enumerate()
            .map(|(k, f)| f.ok_or_else(|| Error::Config(format!("taxonomy misses {:?}", items[k].occupation_id))))
            .collect::<Result<Vec<_>>>()?;
        Ok(FamilyTaxonomy { family_of })
    }

    pub fn family(&self, item: usize) -> Result<Family> {
        self.family_of
            .get(item)
            .copied()
            .ok_or_else(|| Error::UnknownOccupation(format!("item index {item}")))
    }

    pub fn families(&self) -> &[Family] {
        &self.family_of
    }

    pub fn len(&self) -> usize {
        self.family_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.family_of.is_empty()
    }

    pub fn to_tsv(&self, items: &[OccupationRecord]) -> String {
        items
            .iter()
            .zip(&self.family_of)
            .map(|(i, f)| format!("{}\t{}\n", i.occupation_id, f.name()))
            .collect()
    }
}

pub fn family_from_title(title: &str) -> Family {
    let tokens = raw_tokens(title);
    for (family, cues) in KEYWORD_RULES {
        for cue in cues {
            let phrase: Vec<&str> = cue.split(' ').collect();
            if contains_phrase(&tokens, &phrase) {
                return family;
            }
        }
    }
    Family::SoftwareEngineering
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RlConfig<T> {
    pub eta: T,
    pub reward_pos: T,
    pub reward_neg: T,
    pub negatives_per_positive: usize,
    pub passes: usize,
    /// Weight of the table row against the family-bias profile.
    pub omega: T,
    pub mix_family: T,
    pub mix_pop: T,
    pub decay: T,
    pub seed: u64,
}

impl<T: Scalar> Default for RlConfig<T> {
    fn default() -> Self {
        RlConfig {
            eta: T::lit(0.2),
            reward_pos: T::one(),
            reward_neg: T::lit(-0.2),
            negatives_per_positive: 2,
            passes: 30,
            omega: T::lit(0.7),
            mix_family: T::lit(0.75),
            mix_pop: T::lit(0.25),
            decay: T::lit(0.8),
            seed: 0,
        }
    }
}

impl<T: Scalar> RlConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero() && self.eta <= T::one()) {
            return Err(Error::Config(format!("rl eta must lie in (0, 1], got {}", self.eta)));
        }
        if (self.mix_family + self.mix_pop - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::Config("rl mix_family + mix_pop must equal 1".into()));
        }
        if self.negatives_per_positive > N_FAMILIES - 1 {
            return Err(Error::Config("at most 5 negative families per positive".into()));
        }
        Ok(())
    }
}

/// One bandit step toward `reward`.
#[inline]
pub fn bandit_update<T: Scalar>(q: T, reward: T, eta: T) -> T {
    q + eta * (reward - q)
}

/// Trained family table: raw values and the row-wise min-max normalized form
/// used for scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyValueTable<T> {
    raw: [[T; N_FAMILIES]; N_FAMILIES],
    normalized: [[T; N_FAMILIES]; N_FAMILIES],
}

impl<T: Scalar> FamilyValueTable<T> {
    pub fn from_raw(raw: [[T; N_FAMILIES]; N_FAMILIES]) -> Self {
        let mut normalized = [[T::zero(); N_FAMILIES]; N_FAMILIES];
        for (dst, src) in normalized.iter_mut().zip(&raw) {
            dst.copy_from_slice(&min_max_normalize(src));
        }
        FamilyValueTable { raw, normalized }
    }

    pub fn raw(&self) -> &[[T; N_FAMILIES]; N_FAMILIES] {
        &self.raw
    }

    pub fn row(&self, family: Family) -> &[T; N_FAMILIES] {
        &self.normalized[family.index()]
    }
}

/// Trains the family table over every adjacent pair of the training prefixes,
/// in corpus order, for `passes` epochs.
pub fn train_bandit<T: Scalar, S: AsRef<[usize]>>(
    prefixes: &[S],
    taxonomy: &FamilyTaxonomy,
    config: &RlConfig<T>,
) -> Result<FamilyValueTable<T>> {
    config.validate()?;
    let mut pairs = Vec::new();
    for p in prefixes {
        for w in p.as_ref().windows(2) {
            pairs.push((taxonomy.family(w[0])?.index(), taxonomy.family(w[1])?.index()));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Degenerate("bandit training corpus has no transitions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut q = [[T::zero(); N_FAMILIES]; N_FAMILIES];
    for _ in 0..config.passes {
        for &(s, a) in &pairs {
            q[s][a] = bandit_update(q[s][a], config.reward_pos, config.eta);
            for _ in 0..config.negatives_per_positive {
                // uniform over the five families other than the observed one
                let mut alt = rng.gen_range(0..N_FAMILIES - 1);
                if alt >= a {
                    alt += 1;
                }
                q[s][alt] = bandit_update(q[s][alt], config.reward_neg, config.eta);
            }
        }
    }
    Ok(FamilyValueTable::from_raw(q))
}

/// Recency-weighted family composition of a prefix, min-max normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyBias<T>(pub [T; N_FAMILIES]);

pub fn family_bias<T: Scalar>(prefix: &[usize], taxonomy: &FamilyTaxonomy, decay: T) -> Result<FamilyBias<T>> {
    let rho = RecencyWeights::new(prefix.len(), decay)?;
    let mut b = [T::zero(); N_FAMILIES];
    for (&h, &w) in prefix.iter().zip(rho.weights()) {
        let f = taxonomy.family(h)?.index();
        b[f] = b[f] + w;
    }
    let mut out = [T::zero(); N_FAMILIES];
    out.copy_from_slice(&min_max_normalize(&b));
    Ok(FamilyBias(out))
}

/// `g = omega Q[f(last)] + (1 - omega) b`, then `s_i = mix_family g[f(i)] + mix_pop pi_i`,
/// min-max normalized.
pub fn score_rl<T: Scalar>(
    prefix: &[usize],
    table: &FamilyValueTable<T>,
    bias: &FamilyBias<T>,
    popularity: &[T],
    taxonomy: &FamilyTaxonomy,
    config: &RlConfig<T>,
) -> Result<Vec<T>> {
    let raw = raw_rl_scores(prefix, table, bias, popularity, taxonomy, config)?;
    Ok(min_max_normalize(&raw))
}

pub(crate) fn raw_rl_scores<T: Scalar>(
    prefix: &[usize],
    table: &FamilyValueTable<T>,
    bias: &FamilyBias<T>,
    popularity: &[T],
    taxonomy: &FamilyTaxonomy,
    config: &RlConfig<T>,
) -> Result<Vec<T>> {
    let last = *prefix
        .last()
        .ok_or_else(|| Error::Precondition("bandit scoring needs a non-empty prefix".into()))?;
    if popularity.len() != taxonomy.len() {
        return Err(Error::Dimension(format!(
            "popularity has {} entries, taxonomy {}",
            popularity.len(),
            taxonomy.len()
        )));
    }
    let q_row = table.row(taxonomy.family(last)?);
    let mut g = [T::zero(); N_FAMILIES];
    for f in 0..N_FAMILIES {
        g[f] = config.omega * q_row[f] + (T::one() - config.omega) * bias.0[f];
    }
    taxonomy
        .families()
        .iter()
        .zip(popularity)
        .map(|(f, &pi)| Ok(config.mix_family * g[f.index()] + config.mix_pop * pi))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn taxonomy(fams: &[usize]) -> FamilyTaxonomy {
        FamilyTaxonomy::new(fams.iter().map(|&k| Family::from_index(k).unwrap()).collect())
    }

    #[test]
    fn single_update_arithmetic() {
        assert_relative_eq!(bandit_update(0.0f64, 1.0, 0.2), 0.2);
        assert_relative_eq!(bandit_update(0.0f32, 1.0, 0.2), 0.2);
    }

    #[test]
    fn positive_only_corpus_matches_geometric_closed_form() {
        // A (family 0) -> B (family 1), repeated 3 times in the corpus
        let tax = taxonomy(&[0, 1]);
        let n_pairs = 3;
        let corpus: Vec<Vec<usize>> = (0..n_pairs).map(|_| vec![0, 1]).collect();
        let cfg = RlConfig::<f64> {
            negatives_per_positive: 0,
            ..RlConfig::default()
        };
        let t = train_bandit(&corpus, &tax, &cfg).unwrap();
        let expected = 1.0 - 0.8f64.powi(30 * n_pairs);
        assert_relative_eq!(t.raw()[0][1], expected, epsilon = 1e-12);
        assert_eq!(t.row(Family::SoftwareEngineering)[1], 1.0);
    }

    #[test]
    fn deterministic_pair_dominates_row_under_any_seed() {
        let tax = taxonomy(&[0, 1]);
        let corpus = vec![vec![0usize, 1], vec![0, 1, 1]];
        for seed in 0..100 {
            let cfg = RlConfig::<f64> {
                seed,
                ..RlConfig::default()
            };
            let t = train_bandit(&corpus, &tax, &cfg).unwrap();
            let row = t.row(Family::SoftwareEngineering);
            let best = (0..N_FAMILIES).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
            assert_eq!(best, 1, "seed {seed}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let tax = taxonomy(&[0, 1, 2, 3]);
        let corpus = vec![vec![0usize, 1, 2, 3], vec![3, 2, 0]];
        let cfg = RlConfig::<f64>::default();
        assert_eq!(train_bandit(&corpus, &tax, &cfg).unwrap(), train_bandit(&corpus, &tax, &cfg).unwrap());
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let tax = taxonomy(&[0]);
        assert!(train_bandit::<f64, _>(&[vec![0usize]], &tax, &RlConfig::default()).is_err());
    }

    #[test]
    fn bias_examples() {
        let tax = taxonomy(&[2, 2, 0, 1]);
        let b = family_bias(&[0, 1], &tax, 0.8f64).unwrap();
        assert_eq!(b.0, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let b = family_bias(&[2, 3], &tax, 0.5f64).unwrap();
        assert_relative_eq!(b.0[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(b.0[1], 1.0, epsilon = 1e-15);
        assert_eq!(&b.0[2..], &[0.0; 4]);
        let b = family_bias(&[3], &tax, 0.8f64).unwrap();
        assert_eq!(b.0, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn raw_score_arithmetic() {
        // g[f(i)] = 1 via omega = 1 and a one-hot row; pi_i = 0.5
        let tax = taxonomy(&[0, 1]);
        let mut raw = [[0.0f64; N_FAMILIES]; N_FAMILIES];
        raw[0][1] = 1.0;
        let table = FamilyValueTable::from_raw(raw);
        let cfg = RlConfig::<f64> {
            omega: 1.0,
            ..RlConfig::default()
        };
        let bias = FamilyBias([0.0; N_FAMILIES]);
        let s = raw_rl_scores(&[0], &table, &bias, &[0.5, 0.5], &tax, &cfg).unwrap();
        assert_relative_eq!(s[1], 0.875);
        assert_relative_eq!(s[0], 0.125);
    }

    #[test]
    fn preferred_family_outranks_others_under_constant_popularity() {
        let tax = taxonomy(&[0, 1, 1, 2, 3, 1]);
        let mut raw = [[0.0f64; N_FAMILIES]; N_FAMILIES];
        raw[0][1] = 1.0;
        let table = FamilyValueTable::from_raw(raw);
        let cfg = RlConfig::<f64> {
            omega: 1.0,
            ..RlConfig::default()
        };
        let bias = family_bias(&[0], &tax, 0.8).unwrap();
        let s = score_rl(&[0], &table, &bias, &[0.3; 6], &tax, &cfg).unwrap();
        let preferred = [1usize, 2, 5];
        for &p in &preferred {
            for o in [0usize, 3, 4] {
                assert!(s[p] > s[o]);
            }
        }
    }

    #[test]
    fn equal_family_and_popularity_means_equal_score() {
        let tax = taxonomy(&[0, 1, 1, 2]);
        let corpus = vec![vec![0usize, 1, 3, 2], vec![2, 0, 1]];
        let cfg = RlConfig::<f64>::default();
        let table = train_bandit(&corpus, &tax, &cfg).unwrap();
        let bias = family_bias(&[0, 1], &tax, 0.8).unwrap();
        let s = score_rl(&[0, 1], &table, &bias, &[0.2, 0.7, 0.7, 0.1], &tax, &cfg).unwrap();
        assert_eq!(s[1], s[2]);
    }

    #[test]
    fn keyword_rules() {
        assert_eq!(family_from_title("Web developer"), Family::DigitalExperience);
        assert_eq!(family_from_title("User interface developer"), Family::DigitalExperience);
        assert_eq!(family_from_title("ICT help desk agent"), Family::InfrastructureSecurity);
        assert_eq!(family_from_title("Data scientist"), Family::DataAi);
        assert_eq!(family_from_title("ICT project manager"), Family::TechnologyManagement);
        assert_eq!(family_from_title("Embedded systems engineer"), Family::HardwareAutomation);
        assert_eq!(family_from_title("ICT application developer"), Family::SoftwareEngineering);
        assert_eq!(family_from_title("Chef"), Family::SoftwareEngineering);
    }

    #[test]
    fn taxonomy_file_round_trip_and_rejection() {
        let items = vec![
            OccupationRecord::new("a", "Web developer", "", Vec::<String>::new()),
            OccupationRecord::new("b", "Data analyst", "", Vec::<String>::new()),
        ];
        let t = FamilyTaxonomy::from_titles(&items);
        assert_eq!(FamilyTaxonomy::parse(&t.to_tsv(&items), &items).unwrap(), t);
        assert!(matches!(
            FamilyTaxonomy::parse("a\tcooking\nb\tdata and AI\n", &items),
            Err(Error::UnknownFamily(_))
        ));
    }
}
