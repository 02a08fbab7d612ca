//! The evaluation protocol: participant-grouped outer folds, an
//! early-stopping holdout and inner folds carved from each training block,
//! random hyperparameter search, final models and their test accuracy,
//! replication averaging and the majority-class baseline.
//!
//! Participants are atomic everywhere. Every model trained here leaves a
//! [`StageRecord`] describing which participants it was fit on and which it
//! was evaluated on, so leakage can be audited after the fact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explain::{aggregate_top5, summarize_importance, ExplainError, FeatureImportance, ImportanceReport, Occurrence};
use crate::features::{select_group, FeatureGroup, FeatureVector};
use crate::gbdt::{
    self, accuracy, logloss, Ensemble, GbdtError, HyperParams, LabeledData, Matrix, Objective, TreeRange,
};
use crate::ingest::{DatasetId, Label};
use crate::seed::derive_seed;

pub const OUTER_FOLDS: usize = 5;
pub const INNER_FOLDS: usize = 5;
/// The early-stopping holdout is one of this many trial-balanced groups of
/// the training block, i.e. 10% of the data when the block is 80%.
pub const HOLDOUT_GROUPS: usize = 8;
pub const DEFAULT_SEARCH_N: usize = 100;
const MAX_PLAN_ATTEMPTS: u64 = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{have} participants, at least {need} needed")]
    TooFewParticipants { have: usize, need: usize },
    #[error("dataset has no rows for this task")]
    EmptyDataset,
    #[error("no fold assignment with every class in every training split after {0} attempts")]
    ClassCoverage(u64),
    #[error("search needs at least one sample")]
    NoSearchSamples,
    #[error(transparent)]
    Training(#[from] GbdtError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Revealing vs Concealing; Faking trials are dropped.
    #[default]
    Binary,
    /// Revealing vs Concealing vs Faking.
    ThreeClass,
}

impl Task {
    pub fn classes(self) -> &'static [Label] {
        match self {
            Task::Binary => &[Label::Revealing, Label::Concealing],
            Task::ThreeClass => &Label::ALL,
        }
    }

    pub fn n_classes(self) -> usize {
        self.classes().len()
    }

    pub fn label_index(self, label: Label) -> Option<usize> {
        self.classes().iter().position(|&l| l == label)
    }

    pub fn objective(self) -> Objective {
        Objective::for_classes(self.n_classes())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::ThreeClass => "three_class",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" | "reveal_vs_conceal" => Ok(Task::Binary),
            "three_class" | "3class" | "reveal_vs_conceal_vs_fake" => Ok(Task::ThreeClass),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub group: FeatureGroup,
    pub dataset: DatasetId,
    pub seed: u64,
}

/// Rows of one task and feature group, with integer labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub task: Task,
    pub names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<usize>,
    pub participants: Vec<String>,
}

impl Dataset {
    pub fn from_features(vectors: &[FeatureVector], task: Task, group: FeatureGroup) -> Result<Self, HarnessError> {
        let kept: Vec<FeatureVector> = vectors
            .iter()
            .filter(|v| task.label_index(v.label).is_some())
            .cloned()
            .collect();
        if kept.is_empty() {
            return Err(HarnessError::EmptyDataset);
        }
        let m = select_group(&kept, group);
        let n_cols = m.n_cols();
        Ok(Dataset {
            task,
            x: Matrix::new(m.data, kept.len(), n_cols),
            y: m.labels.iter().map(|&l| task.label_index(l).expect("filtered")).collect(),
            participants: m.participants,
            names: m.names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    /// Trial count per participant, ordered by participant id.
    pub fn participant_counts(&self) -> Vec<(String, usize)> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &self.participants {
            *counts.entry(p).or_default() += 1;
        }
        counts.into_iter().map(|(p, c)| (p.to_string(), c)).collect()
    }

    /// Row indices of the given participants, ascending.
    pub fn rows_of<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Vec<usize> {
        let set: BTreeSet<&str> = ids.into_iter().map(String::as_str).collect();
        (0..self.n_rows()).filter(|&i| set.contains(self.participants[i].as_str())).collect()
    }

    fn has_all_classes(&self, rows: &[usize]) -> bool {
        let mut seen = vec![false; self.task.n_classes()];
        for &r in rows {
            seen[self.y[r]] = true;
        }
        seen.into_iter().all(|s| s)
    }

    fn subset(&self, rows: &[usize]) -> (Matrix, Vec<usize>) {
        (self.x.select_rows(rows), rows.iter().map(|&r| self.y[r]).collect())
    }

    fn participant_set(&self, rows: &[usize]) -> BTreeSet<&str> {
        rows.iter().map(|&r| self.participants[r].as_str()).collect()
    }
}

/// Majority-class share among the labels the task keeps.
pub fn dummy_baseline(labels: &[Label], task: Task) -> Result<f64, HarnessError> {
    let mut counts = vec![0usize; task.n_classes()];
    for &l in labels {
        if let Some(i) = task.label_index(l) {
            counts[i] += 1;
        }
    }
    baseline_from_counts(&counts)
}

pub fn baseline_from_counts(counts: &[usize]) -> Result<f64, HarnessError> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(HarnessError::EmptyDataset);
    }
    Ok(*counts.iter().max().expect("nonempty") as f64 / total as f64)
}

/// Partitions participants into `k` groups. Participants are shuffled with
/// `seed` and each is placed in the group with the fewest trials so far
/// (ties: fewest participants, then lowest index). Ids inside a group are
/// sorted.
pub fn split_grouped(participants: &[(String, usize)], k: usize, seed: u64) -> Result<Vec<Vec<String>>, HarnessError> {
    if participants.len() < k || k == 0 {
        return Err(HarnessError::TooFewParticipants {
            have: participants.len(),
            need: k.max(1),
        });
    }
    let mut order: Vec<&(String, usize)> = participants.iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut groups: Vec<(Vec<String>, usize)> = vec![(Vec::new(), 0); k];
    for (id, trials) in order {
        let target = (0..k)
            .min_by_key(|&g| (groups[g].1, groups[g].0.len(), g))
            .expect("k > 0");
        groups[target].0.push(id.clone());
        groups[target].1 += trials;
    }
    Ok(groups
        .into_iter()
        .map(|(mut ids, _)| {
            ids.sort();
            ids
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    pub fold: usize,
    pub test: Vec<String>,
    pub early_stop: Vec<String>,
    /// Validation participants of each inner fold; their union is the
    /// search block.
    pub inner: Vec<Vec<String>>,
}

impl ReplicationPlan {
    pub fn search_block(&self) -> impl Iterator<Item = &String> {
        self.inner.iter().flatten()
    }

    /// Everything except the test fold.
    pub fn train_block(&self) -> impl Iterator<Item = &String> {
        self.early_stop.iter().chain(self.search_block())
    }

    pub fn inner_train(&self, fold: usize) -> impl Iterator<Item = &String> {
        self.inner
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != fold)
            .flat_map(|(_, ids)| ids)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    /// Number of earlier assignments rejected for missing a class.
    pub attempt: u64,
    pub outer: Vec<Vec<String>>,
    pub replications: Vec<ReplicationPlan>,
}

impl SplitPlan {
    /// Builds the full split hierarchy from per-participant trial counts.
    pub fn build(participants: &[(String, usize)], seed: u64) -> Result<SplitPlan, HarnessError> {
        Self::build_attempt(participants, seed, 0)
    }

    fn build_attempt(participants: &[(String, usize)], seed: u64, attempt: u64) -> Result<SplitPlan, HarnessError> {
        let s = derive_seed(seed, &[attempt]);
        let outer = split_grouped(participants, OUTER_FOLDS, derive_seed(s, &[0]))?;
        let mut replications = Vec::with_capacity(OUTER_FOLDS);
        for (fold, test) in outer.iter().enumerate() {
            let block: Vec<(String, usize)> = participants
                .iter()
                .filter(|(id, _)| !test.contains(id))
                .cloned()
                .collect();
            let n_groups = HOLDOUT_GROUPS.min(block.len());
            let too_few = HarnessError::TooFewParticipants {
                have: participants.len(),
                need: participants.len() + 1,
            };
            if block.len() < INNER_FOLDS + 1 {
                return Err(too_few);
            }
            let groups = split_grouped(&block, n_groups, derive_seed(s, &[fold as u64 + 1, 1]))?;
            let early_stop = groups[0].clone();
            let rest: Vec<(String, usize)> = block
                .into_iter()
                .filter(|(id, _)| !early_stop.contains(id))
                .collect();
            if rest.len() < INNER_FOLDS {
                return Err(too_few);
            }
            let inner = split_grouped(&rest, INNER_FOLDS, derive_seed(s, &[fold as u64 + 1, 2]))?;
            replications.push(ReplicationPlan {
                fold,
                test: test.clone(),
                early_stop,
                inner,
            });
        }
        Ok(SplitPlan {
            seed,
            attempt,
            outer,
            replications,
        })
    }

    /// Builds a plan in which every training split holds every class,
    /// redrawing the assignment when one does not.
    pub fn for_dataset(data: &Dataset, seed: u64) -> Result<SplitPlan, HarnessError> {
        let counts = data.participant_counts();
        for attempt in 0..MAX_PLAN_ATTEMPTS {
            let plan = Self::build_attempt(&counts, seed, attempt)?;
            if plan.covers_classes(data) {
                if attempt > 0 {
                    log::warn!("fold assignment redrawn {attempt} time(s) to keep every class in every training split");
                }
                return Ok(plan);
            }
        }
        Err(HarnessError::ClassCoverage(MAX_PLAN_ATTEMPTS))
    }

    pub fn covers_classes(&self, data: &Dataset) -> bool {
        self.replications.iter().all(|r| {
            data.has_all_classes(&data.rows_of(r.train_block()))
                && data.has_all_classes(&data.rows_of(r.search_block()))
                && (0..r.inner.len()).all(|f| data.has_all_classes(&data.rows_of(r.inner_train(f))))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Inner-fold model of the hyperparameter search.
    Search,
    /// Model that fixes the tree count on the early-stopping holdout.
    EarlyStop,
    /// Final model, evaluated on the test fold.
    Final,
}

/// Participants on each side of one trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub replication: usize,
    pub sample: Option<usize>,
    pub inner_fold: Option<usize>,
    pub train_rows: usize,
    pub eval_rows: usize,
    pub train_participants: usize,
    pub eval_participants: usize,
    /// Participants present on both sides; zero unless something leaks.
    pub overlap: usize,
}

fn stage_record(
    data: &Dataset,
    stage: Stage,
    replication: usize,
    sample: Option<usize>,
    inner_fold: Option<usize>,
    train: &[usize],
    eval: &[usize],
) -> StageRecord {
    let a = data.participant_set(train);
    let b = data.participant_set(eval);
    StageRecord {
        stage,
        replication,
        sample,
        inner_fold,
        train_rows: train.len(),
        eval_rows: eval.len(),
        train_participants: a.len(),
        eval_participants: b.len(),
        overlap: a.intersection(&b).count(),
    }
}

/// Distributions the search draws from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub subsample: (f64, f64),
    pub colsample_bytree: (f64, f64),
    pub min_child_weight: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        let reg = vec![0.0, 0.01, 1.0, 2.0, 5.0, 7.0, 10.0, 50.0, 100.0];
        SearchSpace {
            learning_rate: (0.001, 0.191),
            subsample: (0.5, 1.0),
            colsample_bytree: (0.5, 1.0),
            min_child_weight: vec![1.0, 3.0, 5.0, 7.0],
            max_depth: std::iter::once(0).chain(3..=15).collect(),
            alpha: reg.clone(),
            lambda: reg,
        }
    }
}

impl SearchSpace {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> HyperParams {
        let mut uniform = |(lo, hi): (f64, f64)| rng.random_range(lo..hi);
        let learning_rate = uniform(self.learning_rate);
        let subsample = uniform(self.subsample);
        let colsample_bytree = uniform(self.colsample_bytree);
        let mut pick = |n: usize| rng.random_range(0..n);
        let min_child_weight = self.min_child_weight[pick(self.min_child_weight.len())];
        let max_depth = self.max_depth[pick(self.max_depth.len())];
        let alpha = self.alpha[pick(self.alpha.len())];
        let lambda = self.lambda[pick(self.lambda.len())];
        HyperParams {
            learning_rate,
            subsample,
            colsample_bytree,
            min_child_weight,
            max_depth,
            alpha,
            lambda,
            ..HyperParams::default()
        }
    }

    pub fn draw(&self, n: usize, seed: u64) -> Vec<HyperParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchScore {
    pub params: HyperParams,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub mean_logloss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub scores: Vec<SearchScore>,
    pub best: usize,
}

impl SearchOutcome {
    pub fn best_score(&self) -> &SearchScore {
        &self.scores[self.best]
    }
}

/// Index of the best score: highest mean accuracy, then lowest mean
/// logloss, then earliest.
pub fn select_best(scores: &[SearchScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &scores[b];
                s.mean_accuracy > cur.mean_accuracy
                    || (s.mean_accuracy == cur.mean_accuracy && s.mean_logloss < cur.mean_logloss)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

struct Fit {
    model: Ensemble,
    record: StageRecord,
}

fn fit(
    data: &Dataset,
    train_rows: &[usize],
    eval_rows: Option<&[usize]>,
    params: &HyperParams,
    seed: u64,
    record: StageRecord,
) -> Result<Fit, HarnessError> {
    let (x, y) = data.subset(train_rows);
    let eval = eval_rows.map(|rows| data.subset(rows));
    let model = gbdt::train(
        LabeledData::new(&x, &y),
        data.task.objective(),
        params,
        eval.as_ref().map(|(ex, ey)| LabeledData::new(ex, ey)),
        seed,
    )?;
    Ok(Fit { model, record })
}

fn evaluate(model: &Ensemble, data: &Dataset, rows: &[usize], range: TreeRange) -> Result<(f64, f64), HarnessError> {
    let mut proba = Vec::with_capacity(rows.len());
    let mut pred = Vec::with_capacity(rows.len());
    let mut truth = Vec::with_capacity(rows.len());
    for &r in rows {
        let p = model.predict_proba(data.x.row(r), range)?;
        pred.push(gbdt::argmax(&p));
        proba.push(p);
        truth.push(data.y[r]);
    }
    let acc = accuracy(&pred, &truth).expect("equal lengths");
    let loss = logloss(&proba, &truth).expect("labels in range");
    Ok((acc, loss))
}

/// Scores `n` sampled parameter sets on the inner folds of one replication.
/// Each fold model early-stops on its own validation split and is scored
/// there at its best iteration.
pub fn random_search(
    data: &Dataset,
    rep: &ReplicationPlan,
    space: &SearchSpace,
    n: usize,
    seed: u64,
) -> Result<(SearchOutcome, Vec<StageRecord>), HarnessError> {
    if n == 0 {
        return Err(HarnessError::NoSearchSamples);
    }
    let samples = space.draw(n, derive_seed(seed, &[0]));
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..rep.inner.len())
        .map(|f| (data.rows_of(rep.inner_train(f)), data.rows_of(&rep.inner[f])))
        .collect();
    let items: Vec<(usize, usize)> = (0..n).flat_map(|s| (0..folds.len()).map(move |f| (s, f))).collect();
    let results: Vec<Result<(f64, f64, StageRecord), HarnessError>> = items
        .par_iter()
        .map(|&(s, f)| {
            let (train, val) = &folds[f];
            let record = stage_record(data, Stage::Search, rep.fold, Some(s), Some(f), train, val);
            let seed = derive_seed(seed, &[1, s as u64, f as u64]);
            let fitted = fit(data, train, Some(val), &samples[s], seed, record)?;
            let (acc, loss) = evaluate(&fitted.model, data, val, TreeRange::BestIteration)?;
            Ok((acc, loss, fitted.record))
        })
        .collect();
    let mut records = Vec::with_capacity(items.len());
    let mut per_sample: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n];
    for (&(s, _), r) in items.iter().zip(results) {
        let (acc, loss, record) = r?;
        per_sample[s].0.push(acc);
        per_sample[s].1.push(loss);
        records.push(record);
    }
    let scores: Vec<SearchScore> = samples
        .into_iter()
        .zip(per_sample)
        .map(|(params, (accs, losses))| SearchScore {
            params,
            mean_accuracy: mean(&accs),
            mean_logloss: mean(&losses),
            fold_accuracy: accs,
        })
        .collect();
    let best = select_best(&scores).expect("n > 0");
    Ok((SearchOutcome { scores, best }, records))
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub fold: usize,
    pub test_participants: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub accuracy: f64,
    pub best_params: HyperParams,
    pub search_accuracy: f64,
    pub search_logloss: f64,
    pub best_tree_count: usize,
    pub importance: Vec<FeatureImportance>,
    pub top5: Vec<String>,
    #[serde(skip)]
    pub audit: Vec<StageRecord>,
}

/// One replication: search, fix the tree count on the holdout, refit on
/// the whole training block with that count, test, explain.
pub fn run_replication(
    data: &Dataset,
    rep: &ReplicationPlan,
    space: &SearchSpace,
    search_n: usize,
    seed: u64,
) -> Result<ReplicationReport, HarnessError> {
    let (search, mut audit) = random_search(data, rep, space, search_n, derive_seed(seed, &[0]))?;
    let best = search.best_score().clone();

    let search_rows = data.rows_of(rep.search_block());
    let holdout = data.rows_of(&rep.early_stop);
    let record = stage_record(data, Stage::EarlyStop, rep.fold, None, None, &search_rows, &holdout);
    let stopped = fit(data, &search_rows, Some(&holdout), &best.params, derive_seed(seed, &[1]), record)?;
    let best_tree_count = stopped.model.best_iteration.map_or(stopped.model.n_rounds(), |b| b + 1);
    audit.push(stopped.record);

    let train_rows = data.rows_of(rep.train_block());
    let test_rows = data.rows_of(&rep.test);
    let final_params = HyperParams {
        n_estimators_max: best_tree_count,
        early_stopping_rounds: 0,
        ..best.params
    };
    let record = stage_record(data, Stage::Final, rep.fold, None, None, &train_rows, &test_rows);
    let last = fit(data, &train_rows, None, &final_params, derive_seed(seed, &[2]), record)?;
    audit.push(last.record);
    let (accuracy, _) = evaluate(&last.model, data, &test_rows, TreeRange::All)?;

    let (test_x, _) = data.subset(&test_rows);
    let importance = summarize_importance(&last.model, &test_x, &data.names)?;
    Ok(ReplicationReport {
        fold: rep.fold,
        test_participants: rep.test.clone(),
        train_rows: train_rows.len(),
        test_rows: test_rows.len(),
        accuracy,
        best_params: best.params,
        search_accuracy: best.mean_accuracy,
        search_logloss: best.mean_logloss,
        best_tree_count,
        top5: crate::explain::top5(&importance),
        importance,
        audit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ReplicationOutcome {
    Ok(ReplicationReport),
    Failed { fold: usize, error: String },
}

impl ReplicationOutcome {
    pub fn report(&self) -> Option<&ReplicationReport> {
        match self {
            ReplicationOutcome::Ok(r) => Some(r),
            ReplicationOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub models_trained: usize,
    pub search_models: usize,
    pub early_stop_models: usize,
    pub final_models: usize,
    pub violations: usize,
}

impl AuditSummary {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a StageRecord>) -> Self {
        let mut s = AuditSummary {
            models_trained: 0,
            search_models: 0,
            early_stop_models: 0,
            final_models: 0,
            violations: 0,
        };
        for r in records {
            s.models_trained += 1;
            match r.stage {
                Stage::Search => s.search_models += 1,
                Stage::EarlyStop => s.early_stop_models += 1,
                Stage::Final => s.final_models += 1,
            }
            if r.overlap > 0 {
                s.violations += 1;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub task: Task,
    pub feature_group: FeatureGroup,
    pub dataset: String,
    pub seed: u64,
    pub search_n: usize,
    pub n_rows: usize,
    pub n_participants: usize,
    pub n_features: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub baseline: f64,
    pub plan_attempt: u64,
    pub replications: Vec<ReplicationOutcome>,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub final_models: usize,
    pub top_features: Vec<Occurrence>,
    pub audit: AuditSummary,
}

impl ConditionReport {
    pub fn failed(&self) -> usize {
        self.replications.iter().filter(|r| r.report().is_none()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone)]
pub struct ConditionRun {
    pub report: ConditionReport,
    pub importance: ImportanceReport,
    pub plan: SplitPlan,
    pub audit: Vec<StageRecord>,
}

/// Runs all replications of one condition. A replication that fails is
/// recorded as such and the others still run.
pub fn run_condition(
    vectors: &[FeatureVector],
    spec: &TaskSpec,
    space: &SearchSpace,
    search_n: usize,
) -> Result<ConditionRun, HarnessError> {
    let data = Dataset::from_features(vectors, spec.task, spec.group)?;
    let plan = SplitPlan::for_dataset(&data, spec.seed)?;
    let mut replications = Vec::with_capacity(plan.replications.len());
    let mut audit = Vec::new();
    for rep in &plan.replications {
        let seed = derive_seed(spec.seed, &[0x5EED, rep.fold as u64]);
        match run_replication(&data, rep, space, search_n, seed) {
            Ok(r) => {
                log::info!("replication {} accuracy {:.4}", rep.fold, r.accuracy);
                audit.extend(r.audit.iter().cloned());
                replications.push(ReplicationOutcome::Ok(r));
            }
            Err(e) => {
                log::error!("replication {} failed: {e}", rep.fold);
                replications.push(ReplicationOutcome::Failed {
                    fold: rep.fold,
                    error: e.to_string(),
                });
            }
        }
    }
    let reports: Vec<&ReplicationReport> = replications.iter().filter_map(ReplicationOutcome::report).collect();
    let accuracies: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let importance = aggregate_top5(reports.iter().map(|r| r.importance.clone()).collect(), &data.names);

    let mut class_counts = BTreeMap::new();
    let mut counts = vec![0usize; spec.task.n_classes()];
    for &y in &data.y {
        counts[y] += 1;
    }
    for (label, &c) in spec.task.classes().iter().zip(&counts) {
        class_counts.insert(label.as_str().to_string(), c);
    }
    let report = ConditionReport {
        task: spec.task,
        feature_group: spec.group,
        dataset: spec.dataset.as_str().to_string(),
        seed: spec.seed,
        search_n,
        n_rows: data.n_rows(),
        n_participants: data.participant_counts().len(),
        n_features: data.names.len(),
        class_counts,
        baseline: baseline_from_counts(&counts)?,
        plan_attempt: plan.attempt,
        mean_accuracy: if accuracies.is_empty() { f64::NAN } else { mean(&accuracies) },
        std_accuracy: if accuracies.is_empty() { f64::NAN } else { population_std(&accuracies) },
        final_models: reports.len(),
        accuracies,
        top_features: importance.table.clone(),
        audit: AuditSummary::from_records(&audit),
        replications,
    };
    Ok(ConditionRun {
        report,
        importance,
        plan,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize, trials: usize) -> Vec<(String, usize)> {
        (0..n).map(|i| (format!("p{i:03}"), trials)).collect()
    }

    #[test]
    fn reported_baselines() {
        let round3 = |x: f64| (x * 1000.0).round() / 1000.0;
        assert_eq!(round3(baseline_from_counts(&[1996, 1996]).unwrap()), 0.500);
        assert_eq!(round3(baseline_from_counts(&[160, 181]).unwrap()), 0.531);
        assert_eq!(round3(baseline_from_counts(&[1996, 1996, 2065]).unwrap()), 0.341);
        assert_eq!(round3(baseline_from_counts(&[160, 181, 161]).unwrap()), 0.361);
        assert!(matches!(baseline_from_counts(&[0, 0]), Err(HarnessError::EmptyDataset)));
    }

    #[test]
    fn baseline_drops_faking_for_binary() {
        let labels = [Label::Revealing, Label::Faking, Label::Faking, Label::Concealing, Label::Concealing];
        assert_eq!(dummy_baseline(&labels, Task::Binary).unwrap(), 2.0 / 3.0);
        assert_eq!(dummy_baseline(&labels, Task::ThreeClass).unwrap(), 0.4);
    }

    #[test]
    fn hundred_participants_split_sizes() {
        let plan = SplitPlan::build(&ids(100, 30), 11).unwrap();
        assert!(plan.outer.iter().all(|f| f.len() == 20));
        for r in &plan.replications {
            assert_eq!(r.early_stop.len(), 10);
            assert!(r.inner.iter().all(|f| f.len() == 14));
        }
    }

    #[test]
    fn five_participants_one_each() {
        let folds = split_grouped(&ids(5, 3), 5, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
        assert!(matches!(
            split_grouped(&ids(4, 3), 5, 1),
            Err(HarnessError::TooFewParticipants { have: 4, .. })
        ));
    }

    #[test]
    fn greedy_balances_trials() {
        let mut p = ids(10, 5);
        p[0].1 = 25;
        let folds = split_grouped(&p, 5, 3).unwrap();
        let heavy = folds.iter().find(|f| f.contains(&"p000".to_string())).unwrap();
        assert_eq!(heavy.len(), 1);
    }

    #[test]
    fn plan_is_deterministic_and_disjoint() {
        let p = ids(30, 6);
        let a = SplitPlan::build(&p, 5).unwrap();
        assert_eq!(a, SplitPlan::build(&p, 5).unwrap());
        assert_ne!(a.outer, SplitPlan::build(&p, 6).unwrap().outer);
        for r in &a.replications {
            let mut all: Vec<&String> = r.test.iter().chain(r.train_block()).collect();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), 30);
            assert_eq!(r.test.len() + r.early_stop.len() + r.search_block().count(), 30);
        }
    }

    #[test]
    fn condition_statistics() {
        let a = [0.7, 0.7, 0.7, 0.8, 0.8];
        assert!((mean(&a) - 0.74).abs() < 1e-12);
        assert_eq!(population_std(&[0.6; 5]), 0.0);
        assert!((population_std(&a) - 0.0024f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn best_selection_ties() {
        let s = |acc: f64, loss: f64| SearchScore {
            params: HyperParams::default(),
            fold_accuracy: vec![],
            mean_accuracy: acc,
            mean_logloss: loss,
        };
        assert_eq!(select_best(&[s(0.6, 0.5)]), Some(0));
        assert_eq!(select_best(&[s(0.6, 0.5), s(0.7, 0.9)]), Some(1));
        assert_eq!(select_best(&[s(0.7, 0.5), s(0.7, 0.4)]), Some(1));
        assert_eq!(select_best(&[s(0.7, 0.4), s(0.7, 0.4)]), Some(0));
    }

    #[test]
    fn search_space_draws_are_in_range() {
        let space = SearchSpace::default();
        let draws = space.draw(500, 9);
        assert_eq!(draws, space.draw(500, 9));
        for p in &draws {
            assert!((0.001..0.191).contains(&p.learning_rate));
            assert!((0.5..1.0).contains(&p.subsample));
            assert!((0.5..1.0).contains(&p.colsample_bytree));
            assert!([1.0, 3.0, 5.0, 7.0].contains(&p.min_child_weight));
            assert!(p.max_depth == 0 || (3..=15).contains(&p.max_depth));
            assert_eq!(p.n_estimators_max, 10_000);
            assert_eq!(p.early_stopping_rounds, 35);
        }
        assert!(draws.iter().any(|p| p.max_depth == 0));
    }
}
