//! Repeated chronological evaluation: per split seed, fit every statistic on
//! training prefixes, select fusion parameters on validation targets, then
//! rank test targets over the full occupation universe.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, FactorKind, FactorModel};
use crate::benchmark::{BenchmarkPackage, SplitSpec};
use crate::cf::{score_cf, CfConfig};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fusion::{enumerate_lambda_grid, fuse, select, FusionWeights, GridMode, SelectionResult};
use crate::metrics::{argsort_desc, metrics_at_5, rank_target, Metric, TopK};
use crate::rl::{family_bias, score_rl, train_bandit, FamilyTaxonomy, FamilyValueTable, RlConfig};
use crate::stats::{mean_and_population_sd, paired_test, PairedTestResult};
use crate::topsis::{
    build_criterion_matrix, entropy_weights, mix_weights, user_weights, Criterion, CriterionMatrix,
    LexiconConfig, TopsisModel,
};
use crate::transitions::{min_max_normalize, TransitionModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Popularity,
    RepeatLast,
    Markov,
    TransitionCf,
    Nmf,
    Svd,
    Topsis,
    Rl,
    CfTopsis,
    RlTopsis,
    Full,
}

impl ModelKind {
    pub const ALL: [ModelKind; 11] = [
        ModelKind::Popularity,
        ModelKind::RepeatLast,
        ModelKind::Markov,
        ModelKind::TransitionCf,
        ModelKind::Nmf,
        ModelKind::Svd,
        ModelKind::Topsis,
        ModelKind::Rl,
        ModelKind::CfTopsis,
        ModelKind::RlTopsis,
        ModelKind::Full,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ModelKind::Popularity => "popularity",
            ModelKind::RepeatLast => "repeat_last",
            ModelKind::Markov => "markov",
            ModelKind::TransitionCf => "transition_cf",
            ModelKind::Nmf => "nmf",
            ModelKind::Svd => "svd",
            ModelKind::Topsis => "topsis",
            ModelKind::Rl => "rl",
            ModelKind::CfTopsis => "cf_topsis",
            ModelKind::RlTopsis => "rl_topsis",
            ModelKind::Full => "full",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Popularity => "Popularity",
            ModelKind::RepeatLast => "Repeat-last",
            ModelKind::Markov => "Item Markov",
            ModelKind::TransitionCf => "Transition-CF",
            ModelKind::Nmf => "NMF",
            ModelKind::Svd => "SVD",
            ModelKind::Topsis => "TOPSIS-only",
            ModelKind::Rl => "RL-only",
            ModelKind::CfTopsis => "CF+TOPSIS",
            ModelKind::RlTopsis => "RL+TOPSIS",
            ModelKind::Full => "CF+RL+TOPSIS",
        }
    }

    /// Models whose parameters are chosen on validation targets.
    fn fusion_mode(self) -> Option<Option<GridMode>> {
        match self {
            ModelKind::Topsis => Some(None),
            ModelKind::CfTopsis => Some(Some(GridMode::CfTopsis)),
            ModelKind::RlTopsis => Some(Some(GridMode::RlTopsis)),
            ModelKind::Full => Some(Some(GridMode::Full)),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match k.as_str() {
            "item_markov" => "markov",
            "transitioncf" | "cf" => "transition_cf",
            "topsis_only" => "topsis",
            "rl_only" => "rl",
            "hybrid" | "cf_rl_topsis" => "full",
            other => other,
        };
        ModelKind::ALL
            .into_iter()
            .find(|m| m.key() == alias)
            .ok_or_else(|| Error::UnknownModel(s.trim().to_string()))
    }
}

/// A history to score and the item it should rank highly.
#[derive(Clone, Copy, Debug)]
pub struct Query<'a> {
    pub user: usize,
    pub history: &'a [usize],
    pub target: usize,
}

/// Package-level state shared by every split seed.
pub struct Experiment<'p> {
    pub package: &'p BenchmarkPackage,
    pub config: RunConfig,
    pub taxonomy: FamilyTaxonomy,
    pub lexicon: LexiconConfig,
    encoded: Vec<Vec<usize>>,
}

/// Statistics fit on one split's training prefixes.
pub struct SeedContext<'e> {
    pub seed: u64,
    pub splits: &'e [SplitSpec],
    pub model: TransitionModel<f64>,
    pub table: FamilyValueTable<f64>,
    pub criteria: CriterionMatrix<f64>,
    pub global_weights: Vec<f64>,
    pub cf_config: CfConfig<f64>,
    pub rl_config: RlConfig<f64>,
    topsis: TopsisModel<f64>,
    experiment: &'e Experiment<'e>,
}

/// Validation branch scores, TOPSIS scores per alpha in grid order.
struct BranchCache {
    targets: Vec<usize>,
    cf: Vec<Vec<f64>>,
    rl: Vec<Vec<f64>>,
    topsis: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSeedResult {
    pub model: ModelKind,
    pub metrics: TopK,
    /// Test rank per user, in split order.
    pub ranks: Vec<usize>,
    pub selection: Option<SelectionResult<f64>>,
    pub latent_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedEvaluation {
    pub seed: u64,
    pub results: Vec<ModelSeedResult>,
}

impl SeedEvaluation {
    pub fn result(&self, model: ModelKind) -> Option<&ModelSeedResult> {
        self.results.iter().find(|r| r.model == model)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub mean: TopK,
    /// Population standard deviation across seeds.
    pub sd: TopK,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub a: ModelKind,
    pub b: ModelKind,
    pub metric: Metric,
    /// `a - b` per seed.
    pub differences: Vec<f64>,
    pub result: PairedTestResult,
}

/// Wall-clock seconds per phase, summed over seeds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timings {
    pub fit: Duration,
    pub select: Duration,
    pub score: Duration,
    pub total: Duration,
}

impl Timings {
    fn add(&mut self, other: &Timings) {
        self.fit += other.fit;
        self.select += other.select;
        self.score += other.score;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub models: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedEvaluation>,
    pub summaries: Vec<ModelSummary>,
    pub comparisons: Vec<Comparison>,
    pub timings: Timings,
}

impl EvaluationReport {
    /// Per-seed values of one metric for one model.
    pub fn series(&self, model: ModelKind, metric: Metric) -> Vec<f64> {
        self.per_seed
            .iter()
            .filter_map(|s| s.result(model).map(|r| r.metrics.get(metric)))
            .collect()
    }

    pub fn summary(&self, model: ModelKind) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.model == model)
    }
}

pub fn summarize(model: ModelKind, per_seed: &[TopK]) -> ModelSummary {
    let col = |f: fn(&TopK) -> f64| mean_and_population_sd(&per_seed.iter().map(f).collect::<Vec<_>>());
    let (hr, hr_sd) = col(|m| m.hr);
    let (ndcg, ndcg_sd) = col(|m| m.ndcg);
    let (mrr, mrr_sd) = col(|m| m.mrr);
    let (p, p_sd) = col(|m| m.precision);
    ModelSummary {
        model,
        mean: TopK { hr, ndcg, mrr, precision: p },
        sd: TopK {
            hr: hr_sd,
            ndcg: ndcg_sd,
            mrr: mrr_sd,
            precision: p_sd,
        },
    }
}

/// Paired test on per-seed differences `a - b`.
pub fn compare(a: ModelKind, b: ModelKind, metric: Metric, series_a: &[f64], series_b: &[f64]) -> Result<Comparison> {
    if series_a.len() != series_b.len() {
        return Err(Error::Dimension(format!(
            "{a} has {} seeds, {b} has {}",
            series_a.len(),
            series_b.len()
        )));
    }
    let differences: Vec<f64> = series_a.iter().zip(series_b).map(|(x, y)| x - y).collect();
    let result = paired_test(&differences)?;
    Ok(Comparison {
        a,
        b,
        metric,
        differences,
        result,
    })
}

fn fused_rank(cf: &[f64], rl: &[f64], t: &[f64], w: &FusionWeights<f64>, target: usize) -> usize {
    let score = |i: usize| w.cf * cf[i] + w.rl * rl[i] + w.topsis * t[i];
    let st = score(target);
    let mut rank = 1;
    for i in 0..cf.len() {
        let s = score(i);
        if s > st || (s == st && i < target) {
            rank += 1;
        }
    }
    rank
}

fn mean_metric(ranks: impl Iterator<Item = usize>, metric: Metric) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in ranks {
        sum += metrics_at_5(r).get(metric);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn ranks_to_metrics(ranks: &[usize]) -> TopK {
    TopK::mean(&ranks.iter().map(|&r| metrics_at_5(r)).collect::<Vec<_>>())
}

impl<'p> Experiment<'p> {
    pub fn new(package: &'p BenchmarkPackage, config: RunConfig) -> Result<Self> {
        config.validate()?;
        let taxonomy = config.taxonomy(&package.items)?;
        let lexicon = config.lexicon()?;
        Ok(Experiment {
            package,
            encoded: package.encoded_histories(),
            config,
            taxonomy,
            lexicon,
        })
    }

    pub fn encoded(&self) -> &[Vec<usize>] {
        &self.encoded
    }

    pub fn n_items(&self) -> usize {
        self.package.items.len()
    }

    /// Fits all training-prefix statistics for one split seed, optionally
    /// with one TOPSIS criterion switched off.
    pub fn fit_seed(&self, seed: u64, inactive: Option<Criterion>) -> Result<SeedContext<'_>> {
        let splits = self.package.split(seed)?;
        let prefixes: Vec<&[usize]> = splits
            .iter()
            .zip(&self.encoded)
            .map(|(s, seq)| s.train_prefix(seq))
            .collect();
        let model = TransitionModel::build(self.n_items(), &prefixes)?;
        let rl_config = self.config.rl_config(seed);
        let table = train_bandit(&prefixes, &self.taxonomy, &rl_config)?;
        let mut criteria = build_criterion_matrix(&self.package.items, &model, &self.lexicon)?;
        if let Some(c) = inactive {
            criteria = criteria.with_active(c, false)?;
        }
        let global_weights = entropy_weights(&criteria);
        let topsis = TopsisModel::new(&criteria, self.config.topsis_normalization);
        Ok(SeedContext {
            seed,
            splits,
            model,
            table,
            criteria,
            global_weights,
            cf_config: self.config.cf_config(),
            rl_config,
            topsis,
            experiment: self,
        })
    }

    /// Evaluates `models` on one split seed.
    pub fn evaluate_seed(&self, seed: u64, models: &[ModelKind], inactive: Option<Criterion>) -> Result<(SeedEvaluation, Timings)> {
        let mut timings = Timings::default();
        let start = Instant::now();
        let ctx = self.fit_seed(seed, inactive)?;
        timings.fit = start.elapsed();
        let results = models
            .iter()
            .map(|&m| ctx.evaluate_model(m, &mut timings))
            .collect::<Result<Vec<_>>>()?;
        Ok((SeedEvaluation { seed, results }, timings))
    }

    /// Runs every configured seed and model, aggregates, and performs the
    /// configured paired comparisons on per-seed NDCG@5.
    pub fn run_repeated_evaluation(&self) -> Result<EvaluationReport> {
        self.run_models(&self.config.models, None)
    }

    pub fn run_models(&self, models: &[ModelKind], inactive: Option<Criterion>) -> Result<EvaluationReport> {
        let start = Instant::now();
        let seeds = self.config.seeds.clone();
        for &s in &seeds {
            self.package.split(s)?;
        }
        let runs = seeds
            .par_iter()
            .map(|&s| self.evaluate_seed(s, models, inactive))
            .collect::<Result<Vec<_>>>()?;
        let mut timings = Timings::default();
        let mut per_seed = Vec::with_capacity(runs.len());
        for (e, t) in runs {
            timings.add(&t);
            per_seed.push(e);
        }
        let summaries = models
            .iter()
            .map(|&m| {
                let v: Vec<TopK> = per_seed
                    .iter()
                    .map(|s| s.result(m).expect("every model evaluated").metrics)
                    .collect();
                summarize(m, &v)
            })
            .collect();
        let mut report = EvaluationReport {
            models: models.to_vec(),
            seeds,
            per_seed,
            summaries,
            comparisons: Vec::new(),
            timings,
        };
        for &(a, b) in &self.config.comparisons {
            if models.contains(&a) && models.contains(&b) {
                let c = compare(
                    a,
                    b,
                    Metric::Ndcg,
                    &report.series(a, Metric::Ndcg),
                    &report.series(b, Metric::Ndcg),
                )?;
                report.comparisons.push(c);
            }
        }
        report.timings.total = start.elapsed();
        Ok(report)
    }

    /// Leave-one-proxy-out sweep of the full hybrid.
    pub fn proxy_sensitivity(&self) -> Result<SensitivityTable> {
        let models = [ModelKind::Full];
        let base = self.run_models(&models, None)?;
        let baseline = base.summary(ModelKind::Full).expect("full evaluated").mean.ndcg;
        let rows = Criterion::ALL
            .iter()
            .map(|&c| {
                let run = self.run_models(&models, Some(c))?;
                let ndcg = run.summary(ModelKind::Full).expect("full evaluated").mean.ndcg;
                Ok(SensitivityRow {
                    removed: c,
                    ndcg,
                    delta: ndcg - baseline,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SensitivityTable { baseline, rows })
    }

    /// Per-user breakdown of the full hybrid on one split seed.
    pub fn explain(&self, seed: u64, user_id: &str) -> Result<ExplainReport> {
        let user = self.package.user_position(user_id)?;
        let ctx = self.fit_seed(seed, None)?;
        ctx.explain(user)
    }
}

impl<'e> SeedContext<'e> {
    pub fn train_prefix(&self, user: usize) -> &'e [usize] {
        self.splits[user].train_prefix(&self.experiment.encoded[user])
    }

    pub fn validation_queries(&self) -> Vec<Query<'e>> {
        let enc: &'e [Vec<usize>] = &self.experiment.encoded;
        self.splits
            .iter()
            .zip(enc)
            .enumerate()
            .map(|(u, (s, seq))| Query {
                user: u,
                history: s.train_prefix(seq),
                target: seq[s.validation_index],
            })
            .collect()
    }

    /// Test queries see the training prefix plus the validation occupation.
    pub fn test_queries(&self) -> Vec<Query<'e>> {
        let enc: &'e [Vec<usize>] = &self.experiment.encoded;
        self.splits
            .iter()
            .zip(enc)
            .enumerate()
            .map(|(u, (s, seq))| Query {
                user: u,
                history: s.test_history(seq),
                target: seq[s.test_index],
            })
            .collect()
    }

    pub fn cf(&self, history: &[usize]) -> Result<Vec<f64>> {
        score_cf(history, &self.model, &self.cf_config)
    }

    pub fn rl(&self, history: &[usize]) -> Result<Vec<f64>> {
        let bias = family_bias(history, &self.experiment.taxonomy, self.rl_config.decay)?;
        score_rl(
            history,
            &self.table,
            &bias,
            self.model.popularity(),
            &self.experiment.taxonomy,
            &self.rl_config,
        )
    }

    pub fn user_criterion_weights(&self, history: &[usize]) -> Result<Vec<f64>> {
        user_weights(history, &self.criteria, self.cf_config.decay, &self.global_weights)
    }

    pub fn mixed_weights(&self, history: &[usize], alpha: f64) -> Result<Vec<f64>> {
        Ok(mix_weights(&self.user_criterion_weights(history)?, &self.global_weights, alpha))
    }

    pub fn topsis(&self, history: &[usize], alpha: f64) -> Result<Vec<f64>> {
        Ok(self.topsis.scores(&self.mixed_weights(history, alpha)?))
    }

    fn topsis_for_alphas(&self, history: &[usize], alphas: &[f64]) -> Result<Vec<Vec<f64>>> {
        let user = self.user_criterion_weights(history)?;
        Ok(alphas
            .iter()
            .map(|&a| self.topsis.scores(&mix_weights(&user, &self.global_weights, a)))
            .collect())
    }

    fn validation_cache(&self) -> Result<BranchCache> {
        let alphas = &self.experiment.config.alpha_grid;
        let queries = self.validation_queries();
        let rows = queries
            .par_iter()
            .map(|q| Ok((self.cf(q.history)?, self.rl(q.history)?, self.topsis_for_alphas(q.history, alphas)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut cache = BranchCache {
            targets: queries.iter().map(|q| q.target).collect(),
            cf: Vec::with_capacity(rows.len()),
            rl: Vec::with_capacity(rows.len()),
            topsis: vec![Vec::with_capacity(rows.len()); alphas.len()],
        };
        for (c, r, t) in rows {
            cache.cf.push(c);
            cache.rl.push(r);
            for (k, v) in t.into_iter().enumerate() {
                cache.topsis[k].push(v);
            }
        }
        Ok(cache)
    }

    fn lambda_grid(&self, mode: Option<GridMode>) -> Vec<FusionWeights<f64>> {
        let cfg = &self.experiment.config;
        match mode {
            None => vec![FusionWeights::new(0.0, 0.0, 1.0).expect("simplex")],
            Some(GridMode::Full) if cfg.fusion_weights.is_some() => vec![cfg.forced_weights().expect("set")],
            Some(m) => enumerate_lambda_grid(m, &cfg.cf_grid, &cfg.rl_grid),
        }
    }

    fn select_with(&self, cache: &BranchCache, mode: Option<GridMode>) -> Result<SelectionResult<f64>> {
        if cache.targets.is_empty() {
            return Err(Error::Degenerate("no validation users".into()));
        }
        let alphas = &self.experiment.config.alpha_grid;
        let objective = self.experiment.config.objective;
        let alpha_index = |a: f64| alphas.iter().position(|&x| x == a).expect("alpha from grid");
        let targets = &cache.targets;
        select(
            alphas,
            &self.lambda_grid(mode),
            |a| {
                let t = &cache.topsis[alpha_index(a)];
                let ranks = targets.iter().enumerate().map(|(u, &tg)| {
                    rank_target(&t[u], tg).expect("finite scores")
                });
                Ok(mean_metric(ranks, objective))
            },
            |a, w| {
                let t = &cache.topsis[alpha_index(a)];
                let ranks = targets
                    .iter()
                    .enumerate()
                    .map(|(u, &tg)| fused_rank(&cache.cf[u], &cache.rl[u], &t[u], w, tg));
                Ok(mean_metric(ranks, objective))
            },
        )
    }

    /// Chooses alpha and fusion weights for a fused model on validation.
    pub fn select_fusion(&self, model: ModelKind) -> Result<SelectionResult<f64>> {
        let mode = model
            .fusion_mode()
            .ok_or_else(|| Error::Precondition(format!("{model} has no fusion parameters")))?;
        self.select_with(&self.validation_cache()?, mode)
    }

    fn user_item_counts(&self, histories: &[&[usize]]) -> Array2<f64> {
        let mut m = Array2::zeros((histories.len(), self.model.n_items()));
        for (u, h) in histories.iter().enumerate() {
            for &i in h.iter() {
                m[[u, i]] += 1.0;
            }
        }
        m
    }

    fn count_row(&self, history: &[usize]) -> Vec<f64> {
        let mut row = vec![0.0; self.model.n_items()];
        for &i in history {
            row[i] += 1.0;
        }
        row
    }

    fn evaluate_factor(&self, kind: FactorKind) -> Result<ModelSeedResult> {
        let cfg = &self.experiment.config;
        let fcfg = cfg.factor_config(self.seed);
        let prefixes: Vec<&[usize]> = (0..self.splits.len()).map(|u| self.train_prefix(u)).collect();
        let counts = self.user_item_counts(&prefixes);
        let limit = counts.nrows().min(counts.ncols());
        let dims: Vec<usize> = cfg.latent_dims.iter().copied().filter(|&d| d <= limit).collect();
        if dims.is_empty() {
            return Err(Error::Precondition(format!(
                "no latent dimension in {:?} fits a {}x{} matrix",
                cfg.latent_dims,
                counts.nrows(),
                counts.ncols()
            )));
        }
        let validation = self.validation_queries();
        let mut best: Option<(f64, FactorModel<f64>)> = None;
        for d in dims {
            let fm = baselines::fit_factor_model(&counts, d, kind, &fcfg)?;
            let ranks = validation
                .par_iter()
                .map(|q| rank_target(&fm.score_user(q.user)?, q.target))
                .collect::<Result<Vec<_>>>()?;
            let metric = mean_metric(ranks.into_iter(), cfg.objective);
            // ties keep the smaller dimension
            if best.as_ref().is_none_or(|(m, _)| metric > *m) {
                best = Some((metric, fm));
            }
        }
        let (_, fm) = best.expect("at least one dimension");
        let ranks = self
            .test_queries()
            .par_iter()
            .map(|q| {
                let start = fm.user_factors.row(q.user).to_vec();
                let z = fm.fold_in(&self.count_row(q.history), Some(&start), cfg.nmf_iterations)?;
                rank_target(&fm.score_latent(&z), q.target)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelSeedResult {
            model: if kind == FactorKind::Nmf { ModelKind::Nmf } else { ModelKind::Svd },
            metrics: ranks_to_metrics(&ranks),
            ranks,
            selection: None,
            latent_dim: Some(fm.latent_dim),
        })
    }

    fn rank_all<F>(&self, model: ModelKind, score: F) -> Result<ModelSeedResult>
    where
        F: Fn(&Query) -> Result<Vec<f64>> + Sync,
    {
        let ranks = self
            .test_queries()
            .par_iter()
            .map(|q| rank_target(&score(q)?, q.target))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelSeedResult {
            model,
            metrics: ranks_to_metrics(&ranks),
            ranks,
            selection: None,
            latent_dim: None,
        })
    }

    /// Scores the test query of every user with fixed fusion parameters.
    pub fn fused_scores(&self, q: &Query, w: &FusionWeights<f64>, alpha: f64) -> Result<Vec<f64>> {
        fuse(&self.cf(q.history)?, &self.rl(q.history)?, &self.topsis(q.history, alpha)?, w)
    }

    pub fn evaluate_model(&self, model: ModelKind, timings: &mut Timings) -> Result<ModelSeedResult> {
        let m = &self.model;
        if let Some(mode) = model.fusion_mode() {
            let start = Instant::now();
            let sel = self.select_with(&self.validation_cache()?, mode)?;
            timings.select += start.elapsed();
            let start = Instant::now();
            let (w, alpha) = (sel.chosen, sel.chosen_alpha);
            let mut r = self.rank_all(model, |q| self.fused_scores(q, &w, alpha))?;
            timings.score += start.elapsed();
            r.selection = Some(sel);
            return Ok(r);
        }
        let start = Instant::now();
        let r = match model {
            ModelKind::Popularity => self.rank_all(model, |_| Ok(baselines::score_popularity(m))),
            ModelKind::RepeatLast => self.rank_all(model, |q| baselines::score_repeat_last(q.history, m)),
            ModelKind::Markov => self.rank_all(model, |q| baselines::score_markov(q.history, m)),
            ModelKind::TransitionCf => self.rank_all(model, |q| self.cf(q.history)),
            ModelKind::Rl => self.rank_all(model, |q| self.rl(q.history)),
            ModelKind::Nmf => self.evaluate_factor(FactorKind::Nmf),
            ModelKind::Svd => self.evaluate_factor(FactorKind::Svd),
            _ => unreachable!("fused models handled above"),
        };
        timings.score += start.elapsed();
        r
    }

    pub fn explain(&self, user: usize) -> Result<ExplainReport> {
        let exp = self.experiment;
        let cache = self.validation_cache()?;
        let full = self.select_with(&cache, Some(GridMode::Full))?;
        let cf_t = self.select_with(&cache, Some(GridMode::CfTopsis))?;
        let rl_t = self.select_with(&cache, Some(GridMode::RlTopsis))?;
        let q = *self
            .test_queries()
            .get(user)
            .ok_or_else(|| Error::UnknownUser(format!("user index {user}")))?;
        let alpha = full.chosen_alpha;
        let cf = self.cf(q.history)?;
        let rl = self.rl(q.history)?;
        let user_w = self.user_criterion_weights(q.history)?;
        let mixed = mix_weights(&user_w, &self.global_weights, alpha);
        let t = self.topsis.scores(&mixed);
        let fused = fuse(&cf, &rl, &t, &full.chosen)?;
        let fused_display = min_max_normalize(&fused);

        let order = argsort_desc(&fused);
        let mut shown: Vec<usize> = order.iter().copied().take(5).collect();
        if !shown.contains(&q.target) {
            shown.push(q.target);
        }
        let items = &exp.package.items;
        let rows = shown
            .into_iter()
            .map(|i| ExplainRow {
                item: i,
                occupation_id: items[i].occupation_id.clone(),
                title: items[i].title.clone(),
                rank: order.iter().position(|&k| k == i).expect("permutation") + 1,
                cf: cf[i],
                rl: rl[i],
                topsis: t[i],
                full: fused_display[i],
                is_target: i == q.target,
            })
            .collect();

        let rank_of = |s: &[f64]| rank_target(s, q.target);
        let t_cf = self.topsis(q.history, cf_t.chosen_alpha)?;
        let t_rl = self.topsis(q.history, rl_t.chosen_alpha)?;
        let target_ranks = vec![
            (ModelKind::TransitionCf, rank_of(&cf)?),
            (ModelKind::Rl, rank_of(&rl)?),
            (ModelKind::Topsis, rank_of(&t)?),
            (ModelKind::CfTopsis, rank_of(&fuse(&cf, &rl, &t_cf, &cf_t.chosen)?)?),
            (ModelKind::RlTopsis, rank_of(&fuse(&cf, &rl, &t_rl, &rl_t.chosen)?)?),
            (ModelKind::Full, rank_of(&fused)?),
        ];
        Ok(ExplainReport {
            seed: self.seed,
            user_id: exp.package.histories[user].user_id.clone(),
            history: q.history.iter().map(|&i| items[i].title.clone()).collect(),
            target_id: items[q.target].occupation_id.clone(),
            target_title: items[q.target].title.clone(),
            weights: full.chosen,
            alpha,
            global_weights: self.global_weights.clone(),
            user_weights: user_w,
            mixed_weights: mixed,
            active: *self.criteria.active(),
            rows,
            target_ranks,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityRow {
    pub removed: Criterion,
    pub ndcg: f64,
    /// `ndcg - baseline`.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityTable {
    pub baseline: f64,
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityTable {
    /// Row with the most negative delta; earlier criteria win ties.
    pub fn largest_drop(&self) -> Option<&SensitivityRow> {
        self.rows
            .iter()
            .fold(None, |best: Option<&SensitivityRow>, r| match best {
                Some(b) if b.delta <= r.delta => Some(b),
                _ => Some(r),
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplainRow {
    pub item: usize,
    pub occupation_id: String,
    pub title: String,
    /// Position under the full hybrid.
    pub rank: usize,
    pub cf: f64,
    pub rl: f64,
    pub topsis: f64,
    pub full: f64,
    pub is_target: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplainReport {
    pub seed: u64,
    pub user_id: String,
    pub history: Vec<String>,
    pub target_id: String,
    pub target_title: String,
    pub weights: FusionWeights<f64>,
    pub alpha: f64,
    pub global_weights: Vec<f64>,
    pub user_weights: Vec<f64>,
    pub mixed_weights: Vec<f64>,
    pub active: [bool; 6],
    pub rows: Vec<ExplainRow>,
    pub target_ranks: Vec<(ModelKind, usize)>,
}

impl ExplainReport {
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "user\t{}\nseed\t{}", self.user_id, self.seed);
        let _ = writeln!(s, "history\t{}", self.history.join(" -> "));
        let _ = writeln!(s, "target\t{} ({})", self.target_title, self.target_id);
        let _ = writeln!(
            s,
            "lambda\tcf={:.2}\trl={:.2}\ttopsis={:.2}\nalpha\t{:.2}",
            self.weights.cf, self.weights.rl, self.weights.topsis, self.alpha
        );
        let _ = writeln!(s, "\ncriterion\tglobal\tuser\tmixed");
        for c in Criterion::ALL {
            let j = c.index();
            if self.active[j] {
                let _ = writeln!(
                    s,
                    "{}\t{:.3}\t{:.3}\t{:.3}",
                    c.name(),
                    self.global_weights[j],
                    self.user_weights[j],
                    self.mixed_weights[j]
                );
            }
        }
        let _ = writeln!(s, "\nrank\tcandidate\tCF\tRL\tTOPSIS\tFull");
        for r in &self.rows {
            let mark = if r.is_target { "*" } else { "" };
            let _ = writeln!(
                s,
                "{}\t{}{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
                r.rank, r.title, mark, r.cf, r.rl, r.topsis, r.full
            );
        }
        let _ = writeln!(s, "\nmodel\ttarget rank");
        for (m, rank) in &self.target_ranks {
            let _ = writeln!(s, "{}\t{}", m.label(), rank);
        }
        let _ = writeln!(s, "\n* held-out target occupation");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for m in ModelKind::ALL {
            assert_eq!(m.key().parse::<ModelKind>().unwrap(), m);
        }
        assert_eq!("item-markov".parse::<ModelKind>().unwrap(), ModelKind::Markov);
        assert!(matches!("gru4rec".parse::<ModelKind>(), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn fused_rank_matches_materialized_fusion() {
        let cf = [0.2, 0.9, 0.5, 0.5];
        let rl = [1.0, 0.0, 0.3, 0.3];
        let t = [0.0, 0.5, 1.0, 1.0];
        let w = FusionWeights::new(0.5, 0.4, 0.1).unwrap();
        let fused = fuse(&cf, &rl, &t, &w).unwrap();
        for target in 0..4 {
            assert_eq!(fused_rank(&cf, &rl, &t, &w, target), rank_target(&fused, target).unwrap());
        }
    }

    #[test]
    fn summary_uses_population_sd() {
        let s = summarize(
            ModelKind::Full,
            &[
                TopK { hr: 1.0, ndcg: 0.2, mrr: 0.1, precision: 0.2 },
                TopK { hr: 0.0, ndcg: 0.4, mrr: 0.1, precision: 0.0 },
            ],
        );
        assert_eq!(s.mean.hr, 0.5);
        assert_eq!(s.sd.hr, 0.5);
        assert!((s.sd.ndcg - 0.1).abs() < 1e-15);
        assert_eq!(s.sd.mrr, 0.0);
    }
}
