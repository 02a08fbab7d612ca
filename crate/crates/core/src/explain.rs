//! Shapley-value attributions for boosted-tree ensembles.
//!
//! [`shap_tree`] computes path-dependent tree Shapley values in polynomial
//! time, using the hessian covers recorded during training as branch
//! probabilities. [`shap_exact`] computes the same quantities by brute-force
//! subset enumeration and exists as a reference for testing.
//!
//! Importance ranking takes the mean absolute attribution of each feature
//! over a test set (summed over classes for softmax models), and
//! [`aggregate_top5`] counts how often each feature lands in a model's top
//! five across replications.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbdt::{Ensemble, GbdtError, Matrix, Node, Tree};

/// Largest number of distinct split features [`shap_exact`] accepts.
pub const EXACT_MAX_FEATURES: usize = 12;
pub const TOP_K: usize = 5;
/// Occurrence count needed for a feature to appear in the summary table.
pub const REPORT_MIN_COUNT: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("tree {tree} has nodes without cover statistics")]
    MissingCoverStats { tree: usize },
    #[error("model splits on {0} distinct features; exact enumeration supports at most {EXACT_MAX_FEATURES}")]
    TooManyFeatures(usize),
    #[error("empty test set")]
    EmptyTestSet,
    #[error("{names} feature names for a model with {features} features")]
    NameMismatch { names: usize, features: usize },
    #[error(transparent)]
    Model(#[from] GbdtError),
}

/// Attributions for one row: `values[output][feature]` and one base value
/// per output, so that `base[c] + sum(values[c])` is the margin of output
/// `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub base: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl AttributionRow {
    pub fn margin(&self, output: usize) -> f64 {
        self.base[output] + self.values[output].iter().sum::<f64>()
    }
}

fn require_covers(model: &Ensemble) -> Result<(), ExplainError> {
    match model.trees.iter().position(|t| !t.has_covers()) {
        Some(tree) => Err(ExplainError::MissingCoverStats { tree }),
        None => Ok(()),
    }
}

fn check_row(model: &Ensemble, row: &[f64]) -> Result<(), ExplainError> {
    if row.len() != model.n_features {
        return Err(GbdtError::SchemaMismatch {
            expected: model.n_features,
            got: row.len(),
        }
        .into());
    }
    Ok(())
}

fn cover(node: &Node) -> f64 {
    node.cover().expect("covers checked")
}

/// Fraction of a node's cover that flows into `child`.
fn flow(tree: &Tree, parent: usize, child: usize) -> f64 {
    let p = cover(&tree.nodes[parent]);
    if p > 0.0 {
        cover(&tree.nodes[child]) / p
    } else {
        0.5
    }
}

/// Cover-weighted mean leaf value of a tree.
pub fn expected_value(tree: &Tree) -> Result<f64, ExplainError> {
    if !tree.has_covers() {
        return Err(ExplainError::MissingCoverStats { tree: 0 });
    }
    fn walk(t: &Tree, i: usize) -> f64 {
        match &t.nodes[i] {
            Node::Leaf { weight, .. } => *weight,
            Node::Split { left, right, .. } => {
                flow(t, i, *left) * walk(t, *left) + flow(t, i, *right) * walk(t, *right)
            }
        }
    }
    Ok(walk(tree, 0))
}

fn base_values(model: &Ensemble) -> Vec<f64> {
    let mut base = model.base_score.clone();
    for (i, t) in model.trees.iter().enumerate() {
        base[model.tree_output(i)] += expected_value(t).expect("covers checked");
    }
    base
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: usize,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend_path(path: &mut Vec<PathElem>, depth: usize, zero: f64, one: f64, feature: usize) {
    path.truncate(depth);
    path.push(PathElem {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d = depth as f64;
    for i in (0..depth).rev() {
        let fi = i as f64;
        path[i + 1].pweight += one * path[i].pweight * (fi + 1.0) / (d + 1.0);
        path[i].pweight = zero * path[i].pweight * (d - fi) / (d + 1.0);
    }
}

fn unwind_path(path: &mut Vec<PathElem>, depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d = depth as f64;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * (d + 1.0) / ((fi + 1.0) * one);
            next_one = tmp - path[i].pweight * zero * (d - fi) / (d + 1.0);
        } else {
            path[i].pweight = path[i].pweight * (d + 1.0) / (zero * (d - fi));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.truncate(depth);
}

fn unwound_sum(path: &[PathElem], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d = depth as f64;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = next_one * (d + 1.0) / ((fi + 1.0) * one);
            total += tmp;
            next_one = path[i].pweight - tmp * zero * (d - fi) / (d + 1.0);
        } else if zero != 0.0 {
            total += path[i].pweight / zero / ((d - fi) / (d + 1.0));
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn tree_shap_recurse(
    tree: &Tree,
    row: &[f64],
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElem>,
    mut depth: usize,
    zero: f64,
    one: f64,
    feature: usize,
) {
    extend_path(&mut path, depth, zero, one, feature);
    match &tree.nodes[node] {
        Node::Leaf { weight, .. } => {
            for i in 1..=depth {
                let w = unwound_sum(&path, depth, i);
                let e = path[i];
                phi[e.feature] += w * (e.one_fraction - e.zero_fraction) * weight;
            }
        }
        Node::Split {
            feature: f,
            threshold,
            default_left,
            left,
            right,
            ..
        } => {
            let (hot, cold) = if Tree::go_left(row[*f], *threshold, *default_left) {
                (*left, *right)
            } else {
                (*right, *left)
            };
            let (mut in_zero, mut in_one) = (1.0, 1.0);
            if let Some(k) = (1..=depth).find(|&k| path[k].feature == *f) {
                in_zero = path[k].zero_fraction;
                in_one = path[k].one_fraction;
                unwind_path(&mut path, depth, k);
                depth -= 1;
            }
            let hot_zero = flow(tree, node, hot);
            let cold_zero = flow(tree, node, cold);
            tree_shap_recurse(tree, row, phi, hot, path.clone(), depth + 1, hot_zero * in_zero, in_one, *f);
            tree_shap_recurse(tree, row, phi, cold, path, depth + 1, cold_zero * in_zero, 0.0, *f);
        }
    }
}

/// Adds the path-dependent Shapley values of one tree to `phi`.
pub fn tree_shap_into(tree: &Tree, row: &[f64], phi: &mut [f64]) {
    tree_shap_recurse(tree, row, phi, 0, Vec::new(), 0, 1.0, 1.0, NO_FEATURE);
}

/// Path-dependent tree Shapley values for one row, summed over trees.
pub fn shap_tree(model: &Ensemble, row: &[f64]) -> Result<AttributionRow, ExplainError> {
    require_covers(model)?;
    check_row(model, row)?;
    Ok(shap_tree_unchecked(model, &base_values(model), row))
}

fn shap_tree_unchecked(model: &Ensemble, base: &[f64], row: &[f64]) -> AttributionRow {
    let mut values = vec![vec![0.0; model.n_features]; model.n_outputs()];
    for (i, t) in model.trees.iter().enumerate() {
        tree_shap_into(t, row, &mut values[model.tree_output(i)]);
    }
    AttributionRow {
        base: base.to_vec(),
        values,
    }
}

/// Expected tree output when only the features in `known` are fixed to the
/// row's values; unknown splits average their children by cover.
fn conditional_value(tree: &Tree, row: &[f64], known: &dyn Fn(usize) -> bool, node: usize) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { weight, .. } => *weight,
        Node::Split {
            feature,
            threshold,
            default_left,
            left,
            right,
            ..
        } => {
            if known(*feature) {
                let next = if Tree::go_left(row[*feature], *threshold, *default_left) {
                    *left
                } else {
                    *right
                };
                conditional_value(tree, row, known, next)
            } else {
                flow(tree, node, *left) * conditional_value(tree, row, known, *left)
                    + flow(tree, node, *right) * conditional_value(tree, row, known, *right)
            }
        }
    }
}

/// Exact Shapley values by enumerating every subset of the features the
/// model splits on. Cost grows as `2^m` in the number `m` of such features.
pub fn shap_exact(model: &Ensemble, row: &[f64]) -> Result<AttributionRow, ExplainError> {
    require_covers(model)?;
    check_row(model, row)?;
    let mut used: Vec<usize> = model.trees.iter().flat_map(Tree::split_features).collect();
    used.sort_unstable();
    used.dedup();
    let m = used.len();
    if m > EXACT_MAX_FEATURES {
        return Err(ExplainError::TooManyFeatures(m));
    }
    let k = model.n_outputs();
    let mut slot = vec![usize::MAX; model.n_features];
    for (s, &f) in used.iter().enumerate() {
        slot[f] = s;
    }

    // v[c][mask]: expected margin of output c with the features in `mask` known.
    let n_masks = 1usize << m;
    let mut v = vec![model.base_score.clone(); n_masks];
    for mask in 0..n_masks {
        let known = |f: usize| slot[f] != usize::MAX && mask & (1 << slot[f]) != 0;
        for (i, t) in model.trees.iter().enumerate() {
            v[mask][model.tree_output(i)] += conditional_value(t, row, &known, 0);
        }
    }

    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut values = vec![vec![0.0; model.n_features]; k];
    for (s, &f) in used.iter().enumerate() {
        let bit = 1usize << s;
        for mask in (0..n_masks).filter(|mask| mask & bit == 0) {
            let size = mask.count_ones() as usize;
            let weight = fact[size] * fact[m - size - 1] / fact[m];
            for c in 0..k {
                values[c][f] += weight * (v[mask | bit][c] - v[mask][c]);
            }
        }
    }
    Ok(AttributionRow {
        base: v[0].clone(),
        values,
    })
}

/// Attributions for every row of `x`, in row order.
pub fn shap_matrix(model: &Ensemble, x: &Matrix) -> Result<Vec<AttributionRow>, ExplainError> {
    require_covers(model)?;
    if x.n_cols() != model.n_features {
        return Err(GbdtError::SchemaMismatch {
            expected: model.n_features,
            got: x.n_cols(),
        }
        .into());
    }
    let base = base_values(model);
    Ok((0..x.n_rows())
        .into_par_iter()
        .map(|i| shap_tree_unchecked(model, &base, x.row(i)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_shap: f64,
}

/// Features ranked by mean absolute attribution over the rows of `x`,
/// summed over outputs. Ties keep the column order of `names`.
pub fn summarize_importance(
    model: &Ensemble,
    x: &Matrix,
    names: &[String],
) -> Result<Vec<FeatureImportance>, ExplainError> {
    if names.len() != model.n_features {
        return Err(ExplainError::NameMismatch {
            names: names.len(),
            features: model.n_features,
        });
    }
    if x.n_rows() == 0 {
        return Err(ExplainError::EmptyTestSet);
    }
    let rows = shap_matrix(model, x)?;
    let mut totals = vec![0.0; model.n_features];
    for r in &rows {
        for per_output in &r.values {
            for (t, v) in totals.iter_mut().zip(per_output) {
                *t += v.abs();
            }
        }
    }
    let n = rows.len() as f64;
    let mut ranked: Vec<(usize, f64)> = totals.into_iter().map(|t| t / n).enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked
        .into_iter()
        .map(|(i, v)| FeatureImportance {
            feature: names[i].clone(),
            mean_abs_shap: v,
        })
        .collect())
}

/// The first `TOP_K` entries of a ranking with strictly positive mass.
pub fn top5(ranking: &[FeatureImportance]) -> Vec<String> {
    ranking
        .iter()
        .filter(|f| f.mean_abs_shap > 0.0)
        .take(TOP_K)
        .map(|f| f.feature.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub feature: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationImportance {
    pub ranking: Vec<FeatureImportance>,
    pub top5: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub replications: Vec<ReplicationImportance>,
    /// Every feature that entered at least one top five.
    pub occurrences: Vec<Occurrence>,
    /// Features with at least `REPORT_MIN_COUNT` occurrences.
    pub table: Vec<Occurrence>,
}

impl ImportanceReport {
    pub fn count(&self, feature: &str) -> usize {
        self.occurrences
            .iter()
            .find(|o| o.feature == feature)
            .map_or(0, |o| o.count)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Counts top-five memberships across replications. Occurrences are sorted
/// by count, then by `canonical` order (features missing from it last, by
/// name).
pub fn aggregate_top5(rankings: Vec<Vec<FeatureImportance>>, canonical: &[String]) -> ImportanceReport {
    let replications: Vec<ReplicationImportance> = rankings
        .into_iter()
        .map(|ranking| ReplicationImportance {
            top5: top5(&ranking),
            ranking,
        })
        .collect();
    let mut occurrences: Vec<Occurrence> = Vec::new();
    for r in &replications {
        for f in &r.top5 {
            match occurrences.iter_mut().find(|o| &o.feature == f) {
                Some(o) => o.count += 1,
                None => occurrences.push(Occurrence {
                    feature: f.clone(),
                    count: 1,
                }),
            }
        }
    }
    let order = |name: &str| canonical.iter().position(|c| c == name).unwrap_or(usize::MAX);
    occurrences.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then(order(&a.feature).cmp(&order(&b.feature)))
            .then(a.feature.cmp(&b.feature))
    });
    let table = occurrences
        .iter()
        .filter(|o| o.count >= REPORT_MIN_COUNT)
        .cloned()
        .collect();
    ImportanceReport {
        replications,
        occurrences,
        table,
    }
}
