//! Deterministic synthetic benchmarks with controllable persistence, family
//! structure and within-family popularity skew.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchmark::{
    apply_filters, repeated_seeds, split_key, BenchmarkPackage, FilterConfig, OccupationRecord, UserHistory,
    CANONICAL_SEED,
};
use crate::error::{Error, Result};
use crate::rl::N_FAMILIES;

pub const PRESETS: [&str; 3] = ["regime-jobhop", "regime-karrierewege", "prevalence"];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub name: String,
    pub n_users: usize,
    pub n_items: usize,
    pub n_families: usize,
    /// Probability that the next occupation repeats the current one.
    pub p_stay: f64,
    /// Row-stochastic family hop matrix, used when the user moves.
    pub family_kernel: Vec<Vec<f64>>,
    /// Inclusive bounds on sequence length.
    pub sequence_length_range: (usize, usize),
    /// Scales description and skill token counts; 0 gives empty text.
    pub text_richness: f64,
    /// Zipf exponent of item choice within a family; 0 is uniform.
    pub item_skew: f64,
    pub seed: u64,
}

/// `diag` on the diagonal, the rest spread evenly.
pub fn uniform_kernel(n: usize, diag: f64) -> Vec<Vec<f64>> {
    let off = if n > 1 { (1.0 - diag) / (n - 1) as f64 } else { 0.0 };
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { if n > 1 { diag } else { 1.0 } } else { off }).collect())
        .collect()
}

/// Family `f` always moves to `f + 1`.
pub fn cyclic_kernel(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if j == (i + 1) % n { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Self-loop `diag`, `preferred` split between the next two families, the
/// remainder spread over the others.
pub fn structured_kernel(n: usize, diag: f64, preferred: f64) -> Vec<Vec<f64>> {
    assert!(n >= 4, "structured kernel needs at least four families");
    let rest = (1.0 - diag - preferred) / (n - 3) as f64;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        diag
                    } else if j == (i + 1) % n || j == (i + 2) % n {
                        preferred / 2.0
                    } else {
                        rest
                    }
                })
                .collect()
        })
        .collect()
}

impl SynthConfig {
    pub fn preset(name: &str) -> Result<SynthConfig> {
        let c = match name {
            "regime-jobhop" => SynthConfig {
                name: name.into(),
                n_users: 2778,
                n_items: 47,
                n_families: N_FAMILIES,
                p_stay: 0.2,
                family_kernel: structured_kernel(N_FAMILIES, 0.4, 0.45),
                sequence_length_range: (3, 5),
                text_richness: 1.0,
                item_skew: 0.7,
                seed: 7,
            },
            "regime-karrierewege" => SynthConfig {
                name: name.into(),
                n_users: 2617,
                n_items: 35,
                n_families: N_FAMILIES,
                p_stay: 0.65,
                family_kernel: uniform_kernel(N_FAMILIES, 0.1),
                sequence_length_range: (4, 12),
                text_richness: 0.3,
                item_skew: 0.0,
                seed: 11,
            },
            "prevalence" => SynthConfig {
                name: name.into(),
                n_users: 2000,
                n_items: 30,
                n_families: N_FAMILIES,
                p_stay: 0.1,
                family_kernel: uniform_kernel(N_FAMILIES, 1.0 / N_FAMILIES as f64),
                sequence_length_range: (3, 5),
                text_richness: 0.0,
                item_skew: 1.5,
                seed: 5,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown synthetic preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_families == 0 || self.n_families > N_FAMILIES {
            return bad(format!("n_families must lie in 1..={N_FAMILIES}"));
        }
        if self.n_items < self.n_families {
            return bad("every family needs at least one item".into());
        }
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p_stay) || !(0.0..=1.0).contains(&self.text_richness) {
            return bad("p_stay and text_richness must lie in [0, 1]".into());
        }
        if !(self.item_skew >= 0.0 && self.item_skew.is_finite()) {
            return bad("item_skew must be finite and non-negative".into());
        }
        let (lo, hi) = self.sequence_length_range;
        if lo < 3 || hi < lo {
            return bad(format!("sequence length range ({lo}, {hi}) needs 3 <= min <= max"));
        }
        if self.family_kernel.len() != self.n_families
            || self.family_kernel.iter().any(|r| r.len() != self.n_families)
        {
            return bad("family kernel must be n_families x n_families".into());
        }
        for (i, row) in self.family_kernel.iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("family kernel row {i} is not a probability vector"));
            }
        }
        Ok(())
    }

    fn family_of(&self, item: usize) -> usize {
        item % self.n_families
    }

    fn members(&self, family: usize) -> Vec<usize> {
        (family..self.n_items).step_by(self.n_families).collect()
    }

    /// Zipf weight of an item from its position within its family.
    fn item_weight(&self, item: usize) -> f64 {
        let r = (item / self.n_families) as f64;
        (r + 1.0).powf(-self.item_skew)
    }
}

const TITLES: [&[&str]; N_FAMILIES] = [
    &[
        "Software developer",
        "Software engineer",
        "ICT application developer",
        "Mobile app developer",
        "Application programmer",
        "ICT system developer",
        "Database developer",
        "Software tester",
    ],
    &[
        "Network administrator",
        "ICT network engineer",
        "System administrator",
        "Cloud engineer",
        "Cyber security analyst",
        "Security engineer",
        "DevOps engineer",
        "ICT help desk agent",
    ],
    &[
        "Data scientist",
        "Data analyst",
        "Data engineer",
        "Machine learning engineer",
        "AI engineer",
        "Business intelligence analyst",
        "Statistical programmer",
    ],
    &[
        "Web developer",
        "User interface developer",
        "User experience designer",
        "UX designer",
        "UI designer",
        "Web designer",
        "Digital media designer",
    ],
    &[
        "Computer hardware engineer",
        "Computer hardware technician",
        "Automation engineer",
        "Robotics engineer",
        "Electronics engineer",
        "ICT technician",
    ],
    &[
        "ICT project manager",
        "ICT operations manager",
        "Chief technology officer",
        "ICT product manager",
        "Enterprise architect",
        "Chief ICT officer",
        "ICT help desk manager",
    ],
];

const VOCABULARY: [&[&str]; N_FAMILIES] = [
    &["software", "programming", "code", "java", "python", "api", "testing", "git", "design", "requirements"],
    &["network", "security", "cloud", "server", "linux", "firewall", "virtualization", "monitoring", "incident"],
    &["data", "analytics", "statistics", "python", "sql", "models", "ai", "forecasting", "reporting"],
    &["web", "html", "css", "javascript", "interface", "usability", "prototypes", "online", "visual"],
    &["hardware", "circuits", "automation", "iot", "sensors", "maintenance", "repair", "robots", "devices"],
    &["planning", "budget", "stakeholders", "strategy", "digital", "governance", "blockchain", "teams", "vendors"],
];

const SHARED_VOCABULARY: &[&str] = &[
    "computer", "systems", "documentation", "clients", "quality", "projects", "standards", "training",
];

fn synth_items(cfg: &SynthConfig) -> Vec<OccupationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_key(cfg.seed, "synth/items"));
    (0..cfg.n_items)
        .map(|k| {
            let f = cfg.family_of(k);
            let r = k / cfg.n_families;
            let names = TITLES[f];
            let grade = r / names.len();
            let title = if grade == 0 {
                names[r % names.len()].to_string()
            } else {
                format!("{} (grade {})", names[r % names.len()], grade + 1)
            };
            let pool: Vec<&str> = VOCABULARY[f].iter().chain(SHARED_VOCABULARY).copied().collect();
            let draw = |rng: &mut ChaCha8Rng, max: f64| {
                let n = (cfg.text_richness * max * rng.gen_range(0.5..1.0)).round() as usize;
                (0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect::<Vec<_>>()
            };
            let description = draw(&mut rng, 16.0).join(" ");
            let skills = draw(&mut rng, 8.0);
            OccupationRecord::new(format!("occ{k:03}"), title, description, skills)
        })
        .collect()
}

fn sample_within(cfg: &SynthConfig, family: usize, exclude: Option<usize>, rng: &mut ChaCha8Rng) -> usize {
    let mut members = cfg.members(family);
    if let Some(x) = exclude {
        if members.len() > 1 {
            members.retain(|&m| m != x);
        }
    }
    let weights: Vec<f64> = members.iter().map(|&m| cfg.item_weight(m)).collect();
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    members[dist.sample(rng)]
}

/// One user's walk over dense item indices.
pub fn synth_walk(cfg: &SynthConfig, user_id: &str) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_key(cfg.seed, &format!("synth/{user_id}")));
    let (lo, hi) = cfg.sequence_length_range;
    let len = rng.gen_range(lo..=hi);
    let kernels: Vec<WeightedIndex<f64>> = cfg
        .family_kernel
        .iter()
        .map(|row| WeightedIndex::new(row).expect("validated kernel"))
        .collect();
    let start_family = rng.gen_range(0..cfg.n_families);
    let mut current = sample_within(cfg, start_family, None, &mut rng);
    let mut walk = vec![current];
    while walk.len() < len {
        if !rng.gen_bool(cfg.p_stay) {
            let f = kernels[cfg.family_of(current)].sample(&mut rng);
            current = sample_within(cfg, f, Some(current), &mut rng);
        }
        walk.push(current);
    }
    walk
}

/// Items and histories before filtering.
pub fn synth_corpus(cfg: &SynthConfig) -> Result<(Vec<UserHistory>, Vec<OccupationRecord>)> {
    cfg.validate()?;
    let items = synth_items(cfg);
    let histories = (0..cfg.n_users)
        .map(|u| {
            let id = format!("u{u:05}");
            let walk = synth_walk(cfg, &id);
            UserHistory::new(id, walk.into_iter().map(|k| items[k].occupation_id.clone()))
        })
        .collect();
    Ok((histories, items))
}

/// Generates a package that passes the default filters unchanged, or reports
/// the configuration as infeasible.
pub fn generate(cfg: &SynthConfig) -> Result<BenchmarkPackage> {
    let (histories, items) = synth_corpus(cfg)?;
    let filters = FilterConfig::default();
    let (users, kept, audit) =
        apply_filters(&histories, &items, &filters).map_err(|e| Error::Infeasible(e.to_string()))?;
    if !audit.entries.is_empty() {
        let occ = audit.dropped_occupations().count();
        let usr = audit.dropped_users().count();
        return Err(Error::Infeasible(format!(
            "default filters would drop {occ} occupations and {usr} users; raise n_users or lower item_skew"
        )));
    }
    BenchmarkPackage::assemble(
        users,
        kept,
        filters.summary(),
        format!("synthetic:{}", cfg.name),
        CANONICAL_SEED,
        repeated_seeds(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::{family_from_title, Family};

    #[test]
    fn titles_recover_their_family() {
        for (f, names) in TITLES.iter().enumerate() {
            for t in names.iter() {
                assert_eq!(family_from_title(t), Family::from_index(f).unwrap(), "{t}");
                assert!(FilterConfig::default().allow_list.allows(&OccupationRecord::new("x", *t, "", Vec::<String>::new())), "{t}");
            }
        }
    }

    #[test]
    fn kernels_are_stochastic() {
        for k in [uniform_kernel(6, 0.0), cyclic_kernel(6), structured_kernel(6, 0.4, 0.45), uniform_kernel(1, 0.0)] {
            for row in &k {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            SynthConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(SynthConfig::preset("nope").is_err());
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = SynthConfig::preset("prevalence").unwrap();
        c.sequence_length_range = (2, 4);
        assert!(c.validate().is_err());
        let mut c = SynthConfig::preset("prevalence").unwrap();
        c.family_kernel[0][0] += 0.1;
        assert!(c.validate().is_err());
    }
}
