//! Benchmark construction: ingestion, filtering, chronological splits and
//! frozen, digest-verified packages.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Seed of the single development split.
pub const CANONICAL_SEED: u64 = 20_260_331;

/// Seeds of the repeated chronological splits, 100 through 109.
pub fn repeated_seeds() -> Vec<u64> {
    (100..=109).collect()
}

pub const HISTORIES_FILE: &str = "histories.tsv";
pub const ITEMS_FILE: &str = "items.tsv";
pub const SPLITS_FILE: &str = "splits.json";
pub const META_FILE: &str = "meta.json";

const PACKAGE_FORMAT: &str = "occufuse-package/1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupationRecord {
    pub occupation_id: String,
    pub title: String,
    pub description: String,
    /// Lowercase, deduplicated, non-empty.
    pub skill_terms: Vec<String>,
}

impl OccupationRecord {
    pub fn new<S: AsRef<str>>(
        occupation_id: impl Into<String>,
        title: impl Into<String>,
        description: impl Into<String>,
        skills: impl IntoIterator<Item = S>,
    ) -> Self {
        let mut seen = HashSet::new();
        let skill_terms = skills
            .into_iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .filter(|s| !s.is_empty() && seen.insert(s.clone()))
            .collect();
        OccupationRecord {
            occupation_id: occupation_id.into(),
            title: title.into(),
            description: description.into(),
            skill_terms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserHistory {
    pub user_id: String,
    /// Chronological, earliest first.
    pub sequence: Vec<String>,
}

impl UserHistory {
    pub fn new<S: Into<String>>(user_id: impl Into<String>, sequence: impl IntoIterator<Item = S>) -> Self {
        UserHistory {
            user_id: user_id.into(),
            sequence: sequence.into_iter().map(Into::into).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Ingestion

fn parse_err(source_name: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Parses `user_id<TAB>occ_1,occ_2,...` lines.
pub fn parse_histories(text: &str, source_name: &str) -> Result<Vec<UserHistory>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in significant_lines(text) {
        let (user, seq) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(source_name, lineno, "expected user_id<TAB>occupation list"))?;
        let user = user.trim();
        if user.is_empty() {
            return Err(parse_err(source_name, lineno, "empty user id"));
        }
        if seq.contains('\t') {
            return Err(parse_err(source_name, lineno, "too many tab-separated fields"));
        }
        let sequence: Vec<String> = seq.split(',').map(|s| s.trim().to_string()).collect();
        if sequence.iter().any(String::is_empty) {
            return Err(parse_err(source_name, lineno, "empty occupation id in sequence"));
        }
        if !seen.insert(user.to_string()) {
            return Err(Error::DuplicateUser(user.to_string()));
        }
        out.push(UserHistory {
            user_id: user.to_string(),
            sequence,
        });
    }
    Ok(out)
}

/// Parses `occupation_id<TAB>title<TAB>description<TAB>skill1|skill2|...` lines.
pub fn parse_items(text: &str, source_name: &str) -> Result<Vec<OccupationRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in significant_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                source_name,
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(parse_err(source_name, lineno, "empty occupation id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateOccupation(id.to_string()));
        }
        out.push(OccupationRecord::new(
            id,
            fields[1].trim(),
            fields[2].trim(),
            fields[3].split('|'),
        ));
    }
    Ok(out)
}

fn check_references(histories: &[UserHistory], items: &[OccupationRecord]) -> Result<()> {
    let known: HashSet<&str> = items.iter().map(|r| r.occupation_id.as_str()).collect();
    for h in histories {
        if let Some(bad) = h.sequence.iter().find(|o| !known.contains(o.as_str())) {
            return Err(Error::UnknownOccupation(bad.clone()));
        }
    }
    Ok(())
}

/// Reads a histories file and an items file, enforcing referential integrity.
pub fn ingest(
    histories_path: impl AsRef<Path>,
    items_path: impl AsRef<Path>,
) -> Result<(Vec<UserHistory>, Vec<OccupationRecord>)> {
    let hp = histories_path.as_ref();
    let ip = items_path.as_ref();
    let htext = fs::read_to_string(hp).map_err(|e| Error::io(hp, e))?;
    let itext = fs::read_to_string(ip).map_err(|e| Error::io(ip, e))?;
    let histories = parse_histories(&htext, &hp.display().to_string())?;
    let items = parse_items(&itext, &ip.display().to_string())?;
    check_references(&histories, &items)?;
    Ok((histories, items))
}

// ---------------------------------------------------------------------------
// Filtering

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AllowList {
    All,
    Ids(BTreeSet<String>),
    /// Case-insensitive substrings of the occupation title.
    TitlePatterns(Vec<String>),
}

impl AllowList {
    /// A short, non-canonical list of ICT titles shipped with the crate.
    pub fn illustrative_default() -> Self {
        Self::patterns_from_text(include_str!("../data/ict_allow_list.txt"))
    }

    pub fn patterns_from_text(text: &str) -> Self {
        AllowList::TitlePatterns(
            list_entries(text).map(|l| l.to_lowercase()).collect(),
        )
    }

    pub fn ids_from_text(text: &str) -> Self {
        AllowList::Ids(list_entries(text).map(str::to_string).collect())
    }

    pub fn allows(&self, record: &OccupationRecord) -> bool {
        match self {
            AllowList::All => true,
            AllowList::Ids(ids) => ids.contains(&record.occupation_id),
            AllowList::TitlePatterns(patterns) => {
                let title = record.title.to_lowercase();
                patterns.iter().any(|p| title.contains(p.as_str()))
            }
        }
    }

    /// Stable description recorded in package metadata.
    pub fn describe(&self) -> String {
        let fingerprint = |entries: Vec<&str>| {
            let mut h = Sha256::new();
            for e in &entries {
                h.update(e.as_bytes());
                h.update(b"\n");
            }
            format!("{}:{}", entries.len(), &hex::encode(h.finalize())[..16])
        };
        match self {
            AllowList::All => "all".to_string(),
            AllowList::Ids(ids) => format!("ids:{}", fingerprint(ids.iter().map(String::as_str).collect())),
            AllowList::TitlePatterns(p) => {
                format!("titles:{}", fingerprint(p.iter().map(String::as_str).collect()))
            }
        }
    }
}

fn list_entries(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterConfig {
    pub allow_list: AllowList,
    pub min_sequence_length: usize,
    pub min_item_user_support: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            allow_list: AllowList::illustrative_default(),
            min_sequence_length: 3,
            min_item_user_support: 25,
        }
    }
}

impl FilterConfig {
    pub fn allow_all() -> Self {
        FilterConfig {
            allow_list: AllowList::All,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_sequence_length < 3 {
            return Err(Error::Config(format!(
                "min_sequence_length must be at least 3, got {}",
                self.min_sequence_length
            )));
        }
        if self.min_item_user_support < 1 {
            return Err(Error::Config("min_item_user_support must be at least 1".into()));
        }
        Ok(())
    }

    pub fn summary(&self) -> FilterSummary {
        FilterSummary {
            allow_list: self.allow_list.describe(),
            min_sequence_length: self.min_sequence_length,
            min_item_user_support: self.min_item_user_support,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    NotAllowListed,
    MinItemUserSupport { support: usize },
    MinSequenceLength { length: usize },
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::NotAllowListed => f.write_str("allow_list"),
            DropReason::MinItemUserSupport { support } => write!(f, "min_item_user_support ({support})"),
            DropReason::MinSequenceLength { length } => write!(f, "min_sequence_length ({length})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DroppedKind {
    Occupation,
    User,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditEntry {
    pub kind: DroppedKind,
    pub id: String,
    pub reason: DropReason,
    /// 0 for the allow-list pass, then 1, 2, ... for fixpoint rounds.
    pub round: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    pub rounds: usize,
}

impl AuditReport {
    pub fn dropped_occupations(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| e.kind == DroppedKind::Occupation)
    }

    pub fn dropped_users(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| e.kind == DroppedKind::User)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("kind\tid\treason\tround\n");
        for e in &self.entries {
            let kind = match e.kind {
                DroppedKind::Occupation => "occupation",
                DroppedKind::User => "user",
            };
            out.push_str(&format!("{kind}\t{}\t{}\t{}\n", e.id, e.reason, e.round));
        }
        out
    }
}

/// Allow-list pass, then support and length filters iterated to a fixpoint.
pub fn apply_filters(
    histories: &[UserHistory],
    items: &[OccupationRecord],
    config: &FilterConfig,
) -> Result<(Vec<UserHistory>, Vec<OccupationRecord>, AuditReport)> {
    config.validate()?;
    check_references(histories, items)?;
    let mut audit = AuditReport::default();

    let mut retained: BTreeSet<&str> = BTreeSet::new();
    for item in items {
        if config.allow_list.allows(item) {
            retained.insert(&item.occupation_id);
        } else {
            audit.entries.push(AuditEntry {
                kind: DroppedKind::Occupation,
                id: item.occupation_id.clone(),
                reason: DropReason::NotAllowListed,
                round: 0,
            });
        }
    }

    let mut users: Vec<UserHistory> = histories
        .iter()
        .map(|h| UserHistory {
            user_id: h.user_id.clone(),
            sequence: h
                .sequence
                .iter()
                .filter(|o| retained.contains(o.as_str()))
                .cloned()
                .collect(),
        })
        .collect();

    let mut round = 0;
    loop {
        round += 1;
        let mut changed = false;

        let mut support: HashMap<&str, usize> = HashMap::new();
        for u in &users {
            let distinct: HashSet<&str> = u.sequence.iter().map(String::as_str).collect();
            for o in distinct {
                *support.entry(o).or_default() += 1;
            }
        }
        let dropped: Vec<&str> = retained
            .iter()
            .copied()
            .filter(|o| support.get(o).copied().unwrap_or(0) < config.min_item_user_support)
            .collect();
        for o in &dropped {
            retained.remove(o);
            audit.entries.push(AuditEntry {
                kind: DroppedKind::Occupation,
                id: o.to_string(),
                reason: DropReason::MinItemUserSupport {
                    support: support.get(o).copied().unwrap_or(0),
                },
                round,
            });
            changed = true;
        }
        if !dropped.is_empty() {
            for u in &mut users {
                u.sequence.retain(|o| retained.contains(o.as_str()));
            }
        }

        let before = users.len();
        users.retain(|u| {
            let keep = u.sequence.len() >= config.min_sequence_length;
            if !keep {
                audit.entries.push(AuditEntry {
                    kind: DroppedKind::User,
                    id: u.user_id.clone(),
                    reason: DropReason::MinSequenceLength {
                        length: u.sequence.len(),
                    },
                    round,
                });
            }
            keep
        });
        changed |= users.len() != before;

        if !changed {
            break;
        }
    }
    audit.rounds = round;

    if users.is_empty() || retained.is_empty() {
        return Err(Error::Degenerate(
            "no users or occupations survive filtering".into(),
        ));
    }
    let kept_items = items
        .iter()
        .filter(|i| retained.contains(i.occupation_id.as_str()))
        .cloned()
        .collect();
    Ok((users, kept_items, audit))
}

// ---------------------------------------------------------------------------
// Splits

/// One user's chronological split. Positions `[0, train_end)` are training
/// history, `validation_index = train_end` is the validation target and
/// `test_index = validation_index + 1` the test target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub user_id: String,
    pub train_end: usize,
    pub validation_index: usize,
    pub test_index: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn from_test_index(user_id: impl Into<String>, test_index: usize, seed: u64) -> Result<Self> {
        if test_index < 2 {
            return Err(Error::Precondition(format!(
                "test_index must be at least 2, got {test_index}"
            )));
        }
        Ok(SplitSpec {
            user_id: user_id.into(),
            train_end: test_index - 1,
            validation_index: test_index - 1,
            test_index,
            seed,
        })
    }

    pub fn train_prefix<'a, T>(&self, sequence: &'a [T]) -> &'a [T] {
        &sequence[..self.train_end]
    }

    /// History visible when predicting the test target: training prefix plus
    /// the validation occupation.
    pub fn test_history<'a, T>(&self, sequence: &'a [T]) -> &'a [T] {
        &sequence[..self.test_index]
    }

    pub fn check_against(&self, len: usize) -> Result<()> {
        let ok = self.test_index >= 2
            && self.test_index < len
            && self.validation_index + 1 == self.test_index
            && self.train_end == self.validation_index;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "split for user {:?} (test_index {}) is illegal for a sequence of length {len}",
                self.user_id, self.test_index
            )))
        }
    }
}

/// 64-bit key of `(seed, user_id)`: the first eight bytes of
/// SHA-256(seed little-endian || user_id).
pub fn split_key(seed: u64, user_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(user_id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Draws the test position uniformly from `{2, ..., L-1}`.
pub fn generate_split(history: &UserHistory, seed: u64) -> Result<SplitSpec> {
    let len = history.sequence.len();
    if len < 3 {
        return Err(Error::Precondition(format!(
            "user {:?} has {len} occupations; splits need at least 3",
            history.user_id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(split_key(seed, &history.user_id));
    let test_index = rng.gen_range(2..len);
    SplitSpec::from_test_index(history.user_id.clone(), test_index, seed)
}

// ---------------------------------------------------------------------------
// Packages

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub allow_list: String,
    pub min_sequence_length: usize,
    pub min_item_user_support: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageCounts {
    pub users: usize,
    pub occupations: usize,
    pub interactions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageMeta {
    pub format: String,
    pub source: String,
    pub filters: FilterSummary,
    pub canonical_seed: u64,
    pub seeds: Vec<u64>,
    pub counts: PackageCounts,
    /// Wall-clock creation time. Not covered by the digest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchmarkPackage {
    pub histories: Vec<UserHistory>,
    /// Sorted by occupation id; the position is the dense item index.
    pub items: Vec<OccupationRecord>,
    /// Keyed by seed; every split list follows `histories` order.
    pub splits: BTreeMap<u64, Vec<SplitSpec>>,
    pub meta: PackageMeta,
}

impl BenchmarkPackage {
    /// Assembles a package from already filtered data, drawing splits for the
    /// canonical seed and every repeated seed.
    pub fn assemble(
        histories: Vec<UserHistory>,
        mut items: Vec<OccupationRecord>,
        filters: FilterSummary,
        source: impl Into<String>,
        canonical_seed: u64,
        seeds: Vec<u64>,
    ) -> Result<Self> {
        items.sort_by(|a, b| a.occupation_id.cmp(&b.occupation_id));
        let mut splits = BTreeMap::new();
        for &seed in std::iter::once(&canonical_seed).chain(seeds.iter()) {
            let list = histories
                .iter()
                .map(|h| generate_split(h, seed))
                .collect::<Result<Vec<_>>>()?;
            splits.insert(seed, list);
        }
        let counts = PackageCounts {
            users: histories.len(),
            occupations: items.len(),
            interactions: histories.iter().map(|h| h.sequence.len()).sum(),
        };
        let pkg = BenchmarkPackage {
            histories,
            items,
            splits,
            meta: PackageMeta {
                format: PACKAGE_FORMAT.to_string(),
                source: source.into(),
                filters,
                canonical_seed,
                seeds,
                counts,
                created_at: None,
                digest: None,
            },
        };
        pkg.validate()?;
        Ok(pkg)
    }

    pub fn validate(&self) -> Result<()> {
        check_references(&self.histories, &self.items)?;
        let mut ids = HashSet::new();
        for i in &self.items {
            if !ids.insert(i.occupation_id.as_str()) {
                return Err(Error::DuplicateOccupation(i.occupation_id.clone()));
            }
        }
        if self.items.windows(2).any(|w| w[0].occupation_id > w[1].occupation_id) {
            return Err(Error::Precondition("items must be sorted by occupation id".into()));
        }
        let mut users = HashSet::new();
        for h in &self.histories {
            if !users.insert(h.user_id.as_str()) {
                return Err(Error::DuplicateUser(h.user_id.clone()));
            }
            if h.sequence.len() < 3 {
                return Err(Error::Precondition(format!(
                    "user {:?} has fewer than 3 occupations",
                    h.user_id
                )));
            }
        }
        let counts = &self.meta.counts;
        if counts.users != self.histories.len()
            || counts.occupations != self.items.len()
            || counts.interactions != self.histories.iter().map(|h| h.sequence.len()).sum::<usize>()
        {
            return Err(Error::Precondition("metadata counts disagree with package contents".into()));
        }
        for &seed in self.all_seeds().iter() {
            let list = self.splits.get(&seed).ok_or(Error::MissingSeed(seed))?;
            if list.len() != self.histories.len() {
                return Err(Error::Precondition(format!(
                    "seed {seed} has {} splits for {} users",
                    list.len(),
                    self.histories.len()
                )));
            }
            for (s, h) in list.iter().zip(&self.histories) {
                if s.user_id != h.user_id || s.seed != seed {
                    return Err(Error::Precondition(format!(
                        "split order for seed {seed} does not follow history order"
                    )));
                }
                s.check_against(h.sequence.len())?;
            }
        }
        Ok(())
    }

    /// Canonical seed first, then the repeated seeds.
    pub fn all_seeds(&self) -> Vec<u64> {
        let mut v = vec![self.meta.canonical_seed];
        v.extend(self.meta.seeds.iter().copied().filter(|&s| s != self.meta.canonical_seed));
        v
    }

    pub fn split(&self, seed: u64) -> Result<&[SplitSpec]> {
        self.splits
            .get(&seed)
            .map(Vec::as_slice)
            .ok_or(Error::MissingSeed(seed))
    }

    pub fn item_ids(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.occupation_id.as_str()).collect()
    }

    /// Histories as dense item indices.
    pub fn encoded_histories(&self) -> Vec<Vec<usize>> {
        let index: HashMap<&str, usize> = self
            .items
            .iter()
            .enumerate()
            .map(|(k, i)| (i.occupation_id.as_str(), k))
            .collect();
        self.histories
            .iter()
            .map(|h| h.sequence.iter().map(|o| index[o.as_str()]).collect())
            .collect()
    }

    pub fn user_position(&self, user_id: &str) -> Result<usize> {
        self.histories
            .iter()
            .position(|h| h.user_id == user_id)
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))
    }

    fn histories_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for h in &self.histories {
            out.push_str(&h.user_id);
            out.push('\t');
            out.push_str(&h.sequence.join(","));
            out.push('\n');
        }
        out.into_bytes()
    }

    fn items_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for i in &self.items {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                i.occupation_id,
                i.title,
                i.description,
                i.skill_terms.join("|")
            ));
        }
        out.into_bytes()
    }

    fn splits_bytes(&self) -> Result<Vec<u8>> {
        let map: BTreeMap<String, Vec<SplitEntry>> = self
            .splits
            .iter()
            .map(|(seed, list)| {
                (
                    seed.to_string(),
                    list.iter()
                        .map(|s| SplitEntry {
                            user_id: s.user_id.clone(),
                            test_index: s.test_index,
                        })
                        .collect(),
                )
            })
            .collect();
        let mut bytes = serde_json::to_vec_pretty(&map)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    fn meta_bytes(meta: &PackageMeta) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(meta)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    /// Hex SHA-256 over histories, items, splits and metadata (the latter
    /// without its `digest` and `created_at` fields), in that order.
    pub fn compute_digest(&self) -> Result<String> {
        let mut view = self.meta.clone();
        view.digest = None;
        view.created_at = None;
        let mut h = Sha256::new();
        h.update(self.histories_bytes());
        h.update(self.items_bytes());
        h.update(self.splits_bytes()?);
        h.update(Self::meta_bytes(&view)?);
        Ok(hex::encode(h.finalize()))
    }
}

#[derive(Serialize, Deserialize)]
struct SplitEntry {
    user_id: String,
    test_index: usize,
}

/// Writes the four package files and returns the content digest.
pub fn freeze(package: &BenchmarkPackage, directory: impl AsRef<Path>) -> Result<String> {
    package.validate()?;
    let dir = directory.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let digest = package.compute_digest()?;
    let mut meta = package.meta.clone();
    meta.digest = Some(digest.clone());
    let files: [(&str, Vec<u8>); 4] = [
        (HISTORIES_FILE, package.histories_bytes()),
        (ITEMS_FILE, package.items_bytes()),
        (SPLITS_FILE, package.splits_bytes()?),
        (META_FILE, BenchmarkPackage::meta_bytes(&meta)?),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(path, e))?;
    }
    let reread = load(dir)?;
    debug_assert_eq!(reread.meta.digest.as_deref(), Some(digest.as_str()));
    Ok(digest)
}

/// Reads a frozen package and verifies its digest.
pub fn load(directory: impl AsRef<Path>) -> Result<BenchmarkPackage> {
    let dir = directory.as_ref();
    let read = |name: &str| {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|e| Error::io(path, e))
    };
    let histories = parse_histories(&read(HISTORIES_FILE)?, HISTORIES_FILE)?;
    let items = parse_items(&read(ITEMS_FILE)?, ITEMS_FILE)?;
    let raw_splits: BTreeMap<String, Vec<SplitEntry>> = serde_json::from_str(&read(SPLITS_FILE)?)?;
    let meta: PackageMeta = serde_json::from_str(&read(META_FILE)?)?;

    let mut splits = BTreeMap::new();
    for (key, entries) in raw_splits {
        let seed: u64 = key
            .parse()
            .map_err(|_| parse_err(SPLITS_FILE, 0, format!("seed key {key:?} is not an integer")))?;
        let list = entries
            .into_iter()
            .map(|e| SplitSpec::from_test_index(e.user_id, e.test_index, seed))
            .collect::<Result<Vec<_>>>()?;
        splits.insert(seed, list);
    }
    let recorded = meta
        .digest
        .clone()
        .ok_or_else(|| parse_err(META_FILE, 0, "missing digest"))?;
    let pkg = BenchmarkPackage {
        histories,
        items,
        splits,
        meta,
    };
    let computed = pkg.compute_digest()?;
    if computed != recorded {
        return Err(Error::DigestMismatch { recorded, computed });
    }
    pkg.validate()?;
    Ok(pkg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str) -> OccupationRecord {
        OccupationRecord::new(id, format!("{id} developer"), "", ["rust"])
    }

    #[test]
    fn parses_small_files() {
        let h = parse_histories("u1\tA,B,A\nu2\tB,A,B\n\nu3\tA,A,B\n", "h").unwrap();
        let i = parse_items("A\tWeb developer\tBuilds sites\thtml|CSS|html\nB\tData analyst\t\t\n", "i").unwrap();
        assert_eq!(h.len(), 3);
        assert_eq!(i.len(), 2);
        assert_eq!(i[0].skill_terms, vec!["html", "css"]);
        assert!(i[1].skill_terms.is_empty());
        check_references(&h, &i).unwrap();
    }

    #[test]
    fn dangling_reference_names_the_id() {
        let h = parse_histories("u1\tA,X99,A\n", "h").unwrap();
        let i = parse_items("A\tt\td\ts\n", "i").unwrap();
        match check_references(&h, &i) {
            Err(Error::UnknownOccupation(id)) => assert_eq!(id, "X99"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_history_file_is_fine() {
        assert!(parse_histories("", "h").unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_items("A\tt\td\ts\nB\tonly two\n", "items.tsv").unwrap_err();
        match err {
            Error::Parse { line, source_name, .. } => {
                assert_eq!(line, 2);
                assert_eq!(source_name, "items.tsv");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_user_is_dropped() {
        let items = vec![item("A"), item("B"), item("C")];
        let histories = vec![
            UserHistory::new("keep", ["A", "B", "C"]),
            UserHistory::new("short", ["A", "C", "Z"]),
        ];
        let cfg = FilterConfig {
            allow_list: AllowList::Ids(["A", "B", "C"].iter().map(|s| s.to_string()).collect()),
            min_sequence_length: 3,
            min_item_user_support: 1,
        };
        let items_with_z = {
            let mut v = items.clone();
            v.push(item("Z"));
            v
        };
        let (users, kept, audit) = apply_filters(&histories, &items_with_z, &cfg).unwrap();
        assert_eq!(users.len(), 1);
        assert_eq!(kept.len(), 3);
        let dropped: Vec<_> = audit.dropped_users().collect();
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].id, "short");
        assert_eq!(dropped[0].reason, DropReason::MinSequenceLength { length: 2 });
        assert!(audit
            .dropped_occupations()
            .any(|e| e.id == "Z" && e.reason == DropReason::NotAllowListed));
    }

    #[test]
    fn length_three_split_is_forced() {
        let h = UserHistory::new("u", ["A", "B", "C"]);
        for seed in [1, 100, CANONICAL_SEED] {
            let s = generate_split(&h, seed).unwrap();
            assert_eq!((s.test_index, s.validation_index, s.train_end), (2, 1, 1));
            assert_eq!(s.train_prefix(&h.sequence), &["A".to_string()]);
        }
    }

    #[test]
    fn split_rejects_short_sequences() {
        let h = UserHistory::new("u", ["A", "B"]);
        assert!(matches!(generate_split(&h, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn split_is_deterministic() {
        let h = UserHistory::new("user-42", (0..11).map(|k| k.to_string()));
        assert_eq!(generate_split(&h, 105).unwrap(), generate_split(&h, 105).unwrap());
    }

    #[test]
    fn illustrative_allow_list_matches_titles() {
        let list = AllowList::illustrative_default();
        let web = OccupationRecord::new("x", "Senior Web Developer", "", Vec::<String>::new());
        let chef = OccupationRecord::new("y", "Chef", "", Vec::<String>::new());
        assert!(list.allows(&web));
        assert!(!list.allows(&chef));
    }
}
