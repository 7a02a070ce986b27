//! Run configuration: every tunable constant as a named key in a flat
//! `key = value` file, with defaults equal to the standard settings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::benchmark::{repeated_seeds, CANONICAL_SEED};
use crate::baselines::FactorConfig;
use crate::cf::CfConfig;
use crate::error::{Error, Result};
use crate::experiment::ModelKind;
use crate::fusion::{default_alpha_grid, default_cf_grid, default_rl_grid, FusionWeights};
use crate::metrics::Metric;
use crate::rl::{FamilyTaxonomy, RlConfig};
use crate::benchmark::OccupationRecord;
use crate::topsis::{LexiconConfig, TopsisNormalization};

/// Environment variable naming a default configuration file.
pub const CONFIG_ENV: &str = "OCCUFUSE_CONFIG";

/// Comparisons reported by default: the full hybrid against each reference.
pub fn planned_comparisons() -> Vec<(ModelKind, ModelKind)> {
    use ModelKind::*;
    vec![(Full, RepeatLast), (Full, Markov), (Full, TransitionCf), (Full, CfTopsis)]
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub benchmark: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub canonical_seed: u64,
    pub models: Vec<ModelKind>,
    pub comparisons: Vec<(ModelKind, ModelKind)>,
    /// Permits comparisons outside the planned set.
    pub allow_posthoc: bool,

    pub digital_terms: Option<PathBuf>,
    pub innovation_terms: Option<PathBuf>,
    pub role_cues: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub allow_list: Option<PathBuf>,

    pub beta: f64,
    pub gamma: f64,
    pub decay: f64,

    pub eta: f64,
    pub reward_pos: f64,
    pub reward_neg: f64,
    pub negatives_per_positive: usize,
    pub passes: usize,
    pub omega: f64,
    pub mix_family: f64,
    pub mix_pop: f64,
    /// Base seed of negative sampling; combined with the split seed.
    pub rl_seed: u64,

    pub alpha_grid: Vec<f64>,
    pub cf_grid: Vec<f64>,
    pub rl_grid: Vec<f64>,
    pub objective: Metric,
    pub topsis_normalization: TopsisNormalization,
    /// Skips the lambda search of the full hybrid when set.
    pub fusion_weights: Option<(f64, f64, f64)>,

    pub latent_dims: Vec<usize>,
    pub nmf_iterations: usize,
    pub svd_iterations: usize,
    pub factor_seed: u64,

    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cf = CfConfig::<f64>::default();
        let rl = RlConfig::<f64>::default();
        let factors = FactorConfig::default();
        RunConfig {
            benchmark: None,
            output: None,
            seeds: repeated_seeds(),
            canonical_seed: CANONICAL_SEED,
            models: ModelKind::ALL.to_vec(),
            comparisons: planned_comparisons(),
            allow_posthoc: false,
            digital_terms: None,
            innovation_terms: None,
            role_cues: None,
            taxonomy: None,
            allow_list: None,
            beta: cf.beta,
            gamma: cf.gamma,
            decay: cf.decay,
            eta: rl.eta,
            reward_pos: rl.reward_pos,
            reward_neg: rl.reward_neg,
            negatives_per_positive: rl.negatives_per_positive,
            passes: rl.passes,
            omega: rl.omega,
            mix_family: rl.mix_family,
            mix_pop: rl.mix_pop,
            rl_seed: rl.seed,
            alpha_grid: default_alpha_grid(),
            cf_grid: default_cf_grid(),
            rl_grid: default_rl_grid(),
            objective: Metric::Ndcg,
            topsis_normalization: TopsisNormalization::Vector,
            fusion_weights: None,
            latent_dims: vec![6, 10, 14],
            nmf_iterations: factors.nmf_iterations,
            svd_iterations: factors.svd_iterations,
            factor_seed: factors.seed,
            jobs: 0,
        }
    }
}

fn parse_num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<V: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<V>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// `100..109` (inclusive) or a comma list.
fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = parse_num("seeds", a)?;
        let b: u64 = parse_num("seeds", b)?;
        if b < a {
            return Err(Error::Config(format!("empty seed range {value:?}")));
        }
        return Ok((a..=b).collect());
    }
    parse_list("seeds", value)
}

pub fn parse_models(value: &str) -> Result<Vec<ModelKind>> {
    let v = value.trim();
    if v == "all" {
        return Ok(ModelKind::ALL.to_vec());
    }
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
}

fn parse_comparisons(value: &str) -> Result<Vec<(ModelKind, ModelKind)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("comparison {pair:?} must be model:model")))?;
            Ok((a.trim().parse()?, b.trim().parse()?))
        })
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected a boolean, got {other:?}"))),
    }
}

fn path_opt(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

fn join<V: std::fmt::Display>(values: &[V]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "benchmark" => self.benchmark = path_opt(value),
            "output" => self.output = path_opt(value),
            "seeds" => self.seeds = parse_seeds(value)?,
            "canonical_seed" => self.canonical_seed = parse_num(key, value)?,
            "models" => self.models = parse_models(value)?,
            "comparisons" => self.comparisons = parse_comparisons(value)?,
            "allow_posthoc" => self.allow_posthoc = parse_bool(key, value)?,
            "digital_terms" => self.digital_terms = path_opt(value),
            "innovation_terms" => self.innovation_terms = path_opt(value),
            "role_cues" => self.role_cues = path_opt(value),
            "taxonomy" => self.taxonomy = path_opt(value),
            "allow_list" => self.allow_list = path_opt(value),
            "beta" => self.beta = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "decay" => self.decay = parse_num(key, value)?,
            "eta" => self.eta = parse_num(key, value)?,
            "reward_pos" => self.reward_pos = parse_num(key, value)?,
            "reward_neg" => self.reward_neg = parse_num(key, value)?,
            "negatives_per_positive" => self.negatives_per_positive = parse_num(key, value)?,
            "passes" => self.passes = parse_num(key, value)?,
            "omega" => self.omega = parse_num(key, value)?,
            "mix_family" => self.mix_family = parse_num(key, value)?,
            "mix_pop" => self.mix_pop = parse_num(key, value)?,
            "rl_seed" => self.rl_seed = parse_num(key, value)?,
            "alpha_grid" => self.alpha_grid = parse_list(key, value)?,
            "cf_grid" => self.cf_grid = parse_list(key, value)?,
            "rl_grid" => self.rl_grid = parse_list(key, value)?,
            "objective" => self.objective = value.parse()?,
            "topsis_normalization" => self.topsis_normalization = value.parse()?,
            "fusion_weights" => {
                self.fusion_weights = match value.trim() {
                    "" | "none" | "select" => None,
                    v => {
                        let w: Vec<f64> = parse_list(key, v)?;
                        if w.len() != 3 {
                            return Err(Error::Config("fusion_weights needs cf,rl,topsis".into()));
                        }
                        Some((w[0], w[1], w[2]))
                    }
                }
            }
            "latent_dims" => self.latent_dims = parse_list(key, value)?,
            "nmf_iterations" => self.nmf_iterations = parse_num(key, value)?,
            "svd_iterations" => self.svd_iterations = parse_num(key, value)?,
            "factor_seed" => self.factor_seed = parse_num(key, value)?,
            "jobs" => self.jobs = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str, source_name: &str) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                source_name: source_name.to_string(),
                line: k + 1,
                message: "expected key = value".into(),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                source_name: source_name.to_string(),
                line: k + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text, "config")?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = RunConfig::default();
        c.apply_text(&text, &path.display().to_string())?;
        c.validate()?;
        Ok(c)
    }

    /// Applies `key=value` overrides, as given on the command line.
    pub fn with_overrides<S: AsRef<str>>(mut self, overrides: &[S]) -> Result<Self> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {:?} must be key=value", o.as_ref())))?;
            self.set(k, v)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.cf_config().validate()?;
        self.rl_config(0).validate()?;
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        let unit = |v: &f64| (0.0..=1.0).contains(v);
        if self.alpha_grid.is_empty() || !self.alpha_grid.iter().all(unit) {
            return Err(Error::Config("alpha_grid must be a non-empty list in [0, 1]".into()));
        }
        if self.cf_grid.is_empty() || self.rl_grid.is_empty() || !self.cf_grid.iter().chain(&self.rl_grid).all(unit) {
            return Err(Error::Config("cf_grid and rl_grid must be non-empty lists in [0, 1]".into()));
        }
        if let Some((c, r, t)) = self.fusion_weights {
            FusionWeights::new(c, r, t)?;
        }
        if self.latent_dims.is_empty() || self.latent_dims.contains(&0) {
            return Err(Error::Config("latent_dims must be positive".into()));
        }
        if !self.allow_posthoc {
            let planned = planned_comparisons();
            if let Some((a, b)) = self.comparisons.iter().find(|c| !planned.contains(c)) {
                return Err(Error::Config(format!(
                    "comparison {a}:{b} is not in the planned set; set allow_posthoc = true"
                )));
            }
        }
        Ok(())
    }

    pub fn cf_config(&self) -> CfConfig<f64> {
        CfConfig {
            beta: self.beta,
            gamma: self.gamma,
            decay: self.decay,
        }
    }

    /// Bandit configuration for one split seed.
    pub fn rl_config(&self, split_seed: u64) -> RlConfig<f64> {
        RlConfig {
            eta: self.eta,
            reward_pos: self.reward_pos,
            reward_neg: self.reward_neg,
            negatives_per_positive: self.negatives_per_positive,
            passes: self.passes,
            omega: self.omega,
            mix_family: self.mix_family,
            mix_pop: self.mix_pop,
            decay: self.decay,
            seed: self.rl_seed ^ split_seed,
        }
    }

    pub fn factor_config(&self, split_seed: u64) -> FactorConfig {
        FactorConfig {
            nmf_iterations: self.nmf_iterations,
            svd_iterations: self.svd_iterations,
            seed: self.factor_seed ^ split_seed,
        }
    }

    pub fn forced_weights(&self) -> Option<FusionWeights<f64>> {
        self.fusion_weights
            .map(|(c, r, t)| FusionWeights::new(c, r, t).expect("validated"))
    }

    /// Default lexicons with any configured files substituted.
    pub fn lexicon(&self) -> Result<LexiconConfig> {
        let mut lex = LexiconConfig::default();
        let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        if let Some(p) = &self.digital_terms {
            lex.digital_terms = LexiconConfig::parse_terms(&read(p)?);
        }
        if let Some(p) = &self.innovation_terms {
            lex.innovation_terms = LexiconConfig::parse_terms(&read(p)?);
        }
        if let Some(p) = &self.role_cues {
            lex.role_cues = LexiconConfig::parse_role_cues(&read(p)?)?;
        }
        Ok(lex)
    }

    /// Taxonomy file if configured, title keyword rules otherwise.
    pub fn taxonomy(&self, items: &[OccupationRecord]) -> Result<FamilyTaxonomy> {
        match &self.taxonomy {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                FamilyTaxonomy::parse(&text, items)
            }
            None => Ok(FamilyTaxonomy::from_titles(items)),
        }
    }

    /// Serializes every key; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("benchmark", show_path(&self.benchmark));
        kv("output", show_path(&self.output));
        kv("seeds", join(&self.seeds));
        kv("canonical_seed", self.canonical_seed.to_string());
        kv("models", join(&self.models));
        kv(
            "comparisons",
            self.comparisons
                .iter()
                .map(|(a, b)| format!("{a}:{b}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("allow_posthoc", self.allow_posthoc.to_string());
        kv("digital_terms", show_path(&self.digital_terms));
        kv("innovation_terms", show_path(&self.innovation_terms));
        kv("role_cues", show_path(&self.role_cues));
        kv("taxonomy", show_path(&self.taxonomy));
        kv("allow_list", show_path(&self.allow_list));
        kv("beta", self.beta.to_string());
        kv("gamma", self.gamma.to_string());
        kv("decay", self.decay.to_string());
        kv("eta", self.eta.to_string());
        kv("reward_pos", self.reward_pos.to_string());
        kv("reward_neg", self.reward_neg.to_string());
        kv("negatives_per_positive", self.negatives_per_positive.to_string());
        kv("passes", self.passes.to_string());
        kv("omega", self.omega.to_string());
        kv("mix_family", self.mix_family.to_string());
        kv("mix_pop", self.mix_pop.to_string());
        kv("rl_seed", self.rl_seed.to_string());
        kv("alpha_grid", join(&self.alpha_grid));
        kv("cf_grid", join(&self.cf_grid));
        kv("rl_grid", join(&self.rl_grid));
        kv("objective", self.objective.to_string());
        kv(
            "topsis_normalization",
            match self.topsis_normalization {
                TopsisNormalization::Vector => "vector",
                TopsisNormalization::MinMax => "minmax",
            }
            .into(),
        );
        kv(
            "fusion_weights",
            self.fusion_weights
                .map_or_else(|| "select".into(), |(c, r, t)| format!("{c},{r},{t}")),
        );
        kv("latent_dims", join(&self.latent_dims));
        kv("nmf_iterations", self.nmf_iterations.to_string());
        kv("svd_iterations", self.svd_iterations.to_string());
        kv("factor_seed", self.factor_seed.to_string());
        kv("jobs", self.jobs.to_string());
        s
    }
}
