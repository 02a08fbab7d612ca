//! Gradient-boosted decision trees with second-order split finding.
//!
//! Binary logistic and multiclass softmax objectives, L1/L2 leaf
//! regularisation, per-tree row and column subsampling, learned default
//! directions for missing values (`NaN`) and early stopping on a holdout.
//! Splits are found by exact greedy search over presorted columns.

mod metrics;
mod model;
mod split;
mod tree;

pub use metrics::{accuracy, argmax, logloss, sigmoid, softmax, MetricError, PROB_EPS};
pub use model::{margins_to_proba, Ensemble, TreeRange, MODEL_FORMAT_VERSION};
pub use split::{
    best_split, leaf_weight, midpoint, node_score, soft_threshold, split_gain, SplitCandidate,
    SplitParams,
};
pub use tree::{Node, Tree};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const HESSIAN_FLOOR: f64 = 1e-16;
const PRIOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GbdtError {
    #[error("training matrix is empty")]
    EmptyMatrix,
    #[error("training labels contain a single class")]
    SingleClassTrain,
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("row has {got} features, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("model format: {0}")]
    Format(String),
}

/// Dense row-major matrix; `NaN` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "matrix data length");
        Matrix { data, n_rows, n_cols }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Matrix::new(data, rows.len(), n_cols)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows)
    }

    /// New matrix with the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(data, idx.len(), self.n_cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Objective {
    BinaryLogistic,
    Softmax { n_classes: usize },
}

impl Objective {
    pub fn for_classes(n_classes: usize) -> Objective {
        if n_classes == 2 {
            Objective::BinaryLogistic
        } else {
            Objective::Softmax { n_classes }
        }
    }

    pub fn n_classes(self) -> usize {
        match self {
            Objective::BinaryLogistic => 2,
            Objective::Softmax { n_classes } => n_classes,
        }
    }

    /// Trees per boosting round.
    pub fn n_outputs(self) -> usize {
        match self {
            Objective::BinaryLogistic => 1,
            Objective::Softmax { n_classes } => n_classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub learning_rate: f64,
    /// Row fraction per tree.
    pub subsample: f64,
    /// Column fraction per tree.
    pub colsample_bytree: f64,
    /// Minimum hessian sum in each child of a split.
    pub min_child_weight: f64,
    /// 0 means unlimited.
    pub max_depth: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub n_estimators_max: usize,
    pub early_stopping_rounds: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            learning_rate: 0.1,
            subsample: 1.0,
            colsample_bytree: 1.0,
            min_child_weight: 1.0,
            max_depth: 6,
            alpha: 0.0,
            lambda: 1.0,
            n_estimators_max: 10_000,
            early_stopping_rounds: 35,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let err = |m: &str| Err(GbdtError::InvalidParams(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err("learning_rate must be positive and finite");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return err("subsample must lie in (0, 1]");
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return err("colsample_bytree must lie in (0, 1]");
        }
        if !(self.min_child_weight >= 0.0) {
            return err("min_child_weight must be non-negative");
        }
        if !(self.alpha >= 0.0 && self.lambda >= 0.0) {
            return err("alpha and lambda must be non-negative");
        }
        if self.n_estimators_max == 0 {
            return err("n_estimators_max must be at least 1");
        }
        Ok(())
    }

    pub fn split_params(&self) -> SplitParams {
        SplitParams {
            lambda: self.lambda,
            alpha: self.alpha,
            min_child_weight: self.min_child_weight,
        }
    }
}

/// Features and integer class labels.
#[derive(Debug, Clone, Copy)]
pub struct LabeledData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
}

impl<'a> LabeledData<'a> {
    pub fn new(x: &'a Matrix, y: &'a [usize]) -> Self {
        LabeledData { x, y }
    }
}

fn check_labels(data: &LabeledData<'_>, n_classes: usize) -> Result<(), GbdtError> {
    if data.y.len() != data.x.n_rows() {
        return Err(GbdtError::ShapeMismatch(format!(
            "{} labels for {} rows",
            data.y.len(),
            data.x.n_rows()
        )));
    }
    if let Some(&label) = data.y.iter().find(|&&l| l >= n_classes) {
        return Err(GbdtError::LabelOutOfRange { label, n_classes });
    }
    Ok(())
}

fn base_scores(y: &[usize], objective: Objective) -> Vec<f64> {
    let k = objective.n_classes();
    let mut counts = vec![0usize; k];
    for &l in y {
        counts[l] += 1;
    }
    let n = y.len() as f64;
    match objective {
        Objective::BinaryLogistic => {
            let p = (counts[1] as f64 / n).clamp(PRIOR_FLOOR, 1.0 - PRIOR_FLOOR);
            vec![(p / (1.0 - p)).ln()]
        }
        Objective::Softmax { .. } => counts
            .iter()
            .map(|&c| (c as f64 / n).max(PRIOR_FLOOR).ln())
            .collect(),
    }
}

/// Gradients and hessians of logloss at the current margins, laid out
/// output-major: `g[c * n + i]`.
fn gradients(margins: &[f64], y: &[usize], objective: Objective, g: &mut [f64], h: &mut [f64]) {
    let n = y.len();
    match objective {
        Objective::BinaryLogistic => {
            for i in 0..n {
                let p = sigmoid(margins[i]);
                g[i] = p - y[i] as f64;
                h[i] = (p * (1.0 - p)).max(HESSIAN_FLOOR);
            }
        }
        Objective::Softmax { n_classes } => {
            for i in 0..n {
                let p = softmax(&margins[i * n_classes..(i + 1) * n_classes]);
                for (c, &pc) in p.iter().enumerate() {
                    let target = if y[i] == c { 1.0 } else { 0.0 };
                    g[c * n + i] = pc - target;
                    h[c * n + i] = (pc * (1.0 - pc)).max(HESSIAN_FLOOR);
                }
            }
        }
    }
}

fn margins_logloss(margins: &[f64], y: &[usize], objective: Objective) -> f64 {
    let k = objective.n_outputs();
    let mut total = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let p = margins_to_proba(objective, &margins[i * k..(i + 1) * k]);
        total -= p[label].clamp(PROB_EPS, 1.0 - PROB_EPS).ln();
    }
    total / y.len().max(1) as f64
}

/// Row order of each column by value, missing values excluded.
fn presort(x: &Matrix) -> Vec<Vec<(u32, f64)>> {
    (0..x.n_cols())
        .map(|f| {
            let mut rows: Vec<(u32, f64)> = (0..x.n_rows() as u32)
                .map(|r| (r, x.get(r as usize, f)))
                .filter(|(_, v)| !v.is_nan())
                .collect();
            rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            rows
        })
        .collect()
}

struct PendingNode {
    index: usize,
    depth: usize,
    rows: Vec<u32>,
    /// Per sampled feature, the node's slice `start..end` of that feature's
    /// arena, which holds present-value rows in ascending value order.
    ranges: Vec<(usize, usize)>,
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    g: &'a [f64],
    h: &'a [f64],
    params: &'a HyperParams,
    split: SplitParams,
    features: Vec<usize>,
    go_left: Vec<bool>,
    arenas: Vec<Vec<(u32, f64)>>,
    scratch: Vec<(u32, f64)>,
}

/// Stable in-place partition of `items` into rows going left followed by
/// rows going right; returns the number going left.
fn partition_stable<T: Copy>(items: &mut [T], scratch: &mut Vec<T>, left: impl Fn(&T) -> bool) -> usize {
    scratch.clear();
    scratch.extend_from_slice(items);
    let (mut nl, mut nr) = (0, 0);
    for i in 0..items.len() {
        let it = items[i];
        let go = left(&it);
        items[nl] = it;
        scratch[nr] = it;
        nl += usize::from(go);
        nr += usize::from(!go);
    }
    scratch.truncate(nr);
    items[nl..].copy_from_slice(scratch);
    nl
}

impl TreeBuilder<'_> {
    fn sums(&self, rows: &[u32]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.g[r as usize], h + self.h[r as usize])
        })
    }

    fn leaf(&self, g: f64, h: f64) -> Node {
        Node::Leaf {
            weight: leaf_weight(g, h, &self.split) * self.params.learning_rate,
            cover: Some(h),
        }
    }

    fn build(mut self, rows: Vec<u32>, presorted: &[Vec<(u32, f64)>], in_sample: &[bool]) -> Tree {
        self.arenas = self
            .features
            .iter()
            .map(|&f| presorted[f].iter().copied().filter(|&(r, _)| in_sample[r as usize]).collect())
            .collect();
        let ranges = self.arenas.iter().map(|a| (0, a.len())).collect();
        let placeholder = || Node::Leaf {
            weight: 0.0,
            cover: None,
        };
        let mut nodes = vec![placeholder()];
        let mut stack = vec![PendingNode {
            index: 0,
            depth: 0,
            rows,
            ranges,
        }];
        while let Some(mut node) = stack.pop() {
            let (g, h) = self.sums(&node.rows);
            let depth_ok = self.params.max_depth == 0 || node.depth < self.params.max_depth;
            let candidate = if depth_ok && node.rows.len() >= 2 && h >= 2.0 * self.split.min_child_weight {
                self.find_split(&node, g, h)
            } else {
                None
            };
            let Some(c) = candidate else {
                nodes[node.index] = self.leaf(g, h);
                continue;
            };
            for &r in &node.rows {
                self.go_left[r as usize] = Tree::go_left(self.x.get(r as usize, c.feature), c.threshold, c.default_left);
            }
            let go_left = &self.go_left;
            let mut scratch_rows = Vec::new();
            let nl = partition_stable(&mut node.rows, &mut scratch_rows, |&r| go_left[r as usize]);
            let right_rows = node.rows.split_off(nl);
            let left_rows = node.rows;
            let mut left_ranges = Vec::with_capacity(node.ranges.len());
            let mut right_ranges = Vec::with_capacity(node.ranges.len());
            for (slot, &(start, end)) in node.ranges.iter().enumerate() {
                let n = partition_stable(&mut self.arenas[slot][start..end], &mut self.scratch, |&(r, _)| {
                    go_left[r as usize]
                });
                left_ranges.push((start, start + n));
                right_ranges.push((start + n, end));
            }
            let left = nodes.len();
            let right = left + 1;
            nodes.push(placeholder());
            nodes.push(placeholder());
            nodes[node.index] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                default_left: c.default_left,
                left,
                right,
                gain: c.gain,
                cover: Some(h),
            };
            stack.push(PendingNode {
                index: right,
                depth: node.depth + 1,
                rows: right_rows,
                ranges: right_ranges,
            });
            stack.push(PendingNode {
                index: left,
                depth: node.depth + 1,
                rows: left_rows,
                ranges: left_ranges,
            });
        }
        Tree { nodes }
    }

    fn find_split(&self, node: &PendingNode, g: f64, h: f64) -> Option<SplitCandidate> {
        let mut best: Option<SplitCandidate> = None;
        for (slot, &f) in self.features.iter().enumerate() {
            let floor = best.map_or(0.0, |b| b.gain);
            let (start, end) = node.ranges[slot];
            if let Some(c) = split::scan_feature(
                f,
                &self.arenas[slot][start..end],
                node.rows.len(),
                self.g,
                self.h,
                g,
                h,
                &self.split,
                floor,
            ) {
                best = Some(c);
            }
        }
        best
    }
}

fn sample_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n)
}

/// Trains a boosted ensemble.
///
/// With an eval set, boosting stops once eval logloss has not improved for
/// `early_stopping_rounds` rounds; all built trees are kept and the best
/// round is recorded. Randomness (row and column sampling) comes only from
/// `seed`.
pub fn train(
    data: LabeledData<'_>,
    objective: Objective,
    params: &HyperParams,
    eval: Option<LabeledData<'_>>,
    seed: u64,
) -> Result<Ensemble, GbdtError> {
    params.validate()?;
    let x = data.x;
    let (n, p) = (x.n_rows(), x.n_cols());
    if n == 0 || p == 0 {
        return Err(GbdtError::EmptyMatrix);
    }
    let n_classes = objective.n_classes();
    if n_classes < 2 {
        return Err(GbdtError::InvalidParams("objective needs at least 2 classes".into()));
    }
    check_labels(&data, n_classes)?;
    let mut seen = vec![false; n_classes];
    for &l in data.y {
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(GbdtError::SingleClassTrain);
    }
    if let Some(e) = &eval {
        check_labels(e, n_classes)?;
        if e.x.n_cols() != p {
            return Err(GbdtError::SchemaMismatch {
                expected: p,
                got: e.x.n_cols(),
            });
        }
    }

    let k = objective.n_outputs();
    let base_score = base_scores(data.y, objective);
    let presorted = presort(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut margins: Vec<f64> = (0..n).flat_map(|_| base_score.iter().copied()).collect();
    let n_eval = eval.map_or(0, |e| e.x.n_rows());
    let mut eval_margins: Vec<f64> = (0..n_eval).flat_map(|_| base_score.iter().copied()).collect();
    let mut g = vec![0.0; n * k];
    let mut h = vec![0.0; n * k];
    let mut in_sample = vec![true; n];

    let mut trees = Vec::new();
    let mut train_history = Vec::new();
    let mut eval_history = Vec::new();
    let mut best: Option<(usize, f64)> = None;

    for round in 0..params.n_estimators_max {
        gradients(&margins, data.y, objective, &mut g, &mut h);
        for c in 0..k {
            let rows: Vec<u32> = if params.subsample < 1.0 {
                let mut picked = index::sample(&mut rng, n, sample_count(n, params.subsample)).into_vec();
                picked.sort_unstable();
                in_sample.iter_mut().for_each(|s| *s = false);
                for &r in &picked {
                    in_sample[r] = true;
                }
                picked.into_iter().map(|r| r as u32).collect()
            } else {
                in_sample.iter_mut().for_each(|s| *s = true);
                (0..n as u32).collect()
            };
            let features: Vec<usize> = if params.colsample_bytree < 1.0 {
                let mut f = index::sample(&mut rng, p, sample_count(p, params.colsample_bytree)).into_vec();
                f.sort_unstable();
                f
            } else {
                (0..p).collect()
            };
            let builder = TreeBuilder {
                x,
                g: &g[c * n..(c + 1) * n],
                h: &h[c * n..(c + 1) * n],
                params,
                split: params.split_params(),
                features,
                go_left: vec![false; n],
                arenas: Vec::new(),
                scratch: Vec::new(),
            };
            let tree = builder.build(rows, &presorted, &in_sample);
            for i in 0..n {
                margins[i * k + c] += tree.predict(x.row(i));
            }
            if let Some(e) = &eval {
                for i in 0..n_eval {
                    eval_margins[i * k + c] += tree.predict(e.x.row(i));
                }
            }
            trees.push(tree);
        }
        train_history.push(margins_logloss(&margins, data.y, objective));
        if let Some(e) = &eval {
            let loss = margins_logloss(&eval_margins, e.y, objective);
            eval_history.push(loss);
            match best {
                Some((_, b)) if loss >= b => {}
                _ => best = Some((round, loss)),
            }
            let (best_round, _) = best.expect("set above");
            if params.early_stopping_rounds > 0 && round - best_round >= params.early_stopping_rounds {
                break;
            }
        }
    }

    Ok(Ensemble {
        format_version: MODEL_FORMAT_VERSION,
        objective,
        n_features: p,
        base_score,
        trees,
        params: *params,
        train_history,
        eval_history,
        best_iteration: best.map(|(r, _)| r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump_params(lambda: f64) -> HyperParams {
        HyperParams {
            learning_rate: 0.1,
            max_depth: 1,
            min_child_weight: 0.0,
            lambda,
            n_estimators_max: 1,
            ..HyperParams::default()
        }
    }

    #[test]
    fn four_point_first_tree() {
        let x = Matrix::new(vec![1.0, 2.0, 3.0, 4.0], 4, 1);
        let y = [0, 0, 1, 1];
        let m = train(LabeledData::new(&x, &y), Objective::BinaryLogistic, &stump_params(1.0), None, 0)
            .unwrap();
        assert_eq!(m.base_score, vec![0.0]);
        let t = &m.trees[0];
        match &t.nodes[0] {
            Node::Split { threshold, gain, .. } => {
                assert_eq!(*threshold, 2.5);
                assert!((gain - 2.0 / 3.0).abs() < 1e-12);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert!((t.predict(&[1.0]) + 0.1 * 2.0 / 3.0).abs() < 1e-12);
        assert!((t.predict(&[4.0]) - 0.1 * 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::new(vec![1.0, 2.0], 2, 1);
        let err = train(LabeledData::new(&x, &[1, 1]), Objective::BinaryLogistic, &HyperParams::default(), None, 0)
            .unwrap_err();
        assert_eq!(err, GbdtError::SingleClassTrain);
    }

    #[test]
    fn empty_matrix_is_rejected() {
        let x = Matrix::new(vec![], 0, 3);
        let err = train(LabeledData::new(&x, &[]), Objective::BinaryLogistic, &HyperParams::default(), None, 0)
            .unwrap_err();
        assert_eq!(err, GbdtError::EmptyMatrix);
    }

    #[test]
    fn lambda_shrinks_leaf_weights() {
        // One candidate split, so the structure cannot change with lambda.
        let x = Matrix::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0], 7, 1);
        let y = [0, 0, 1, 1, 1, 1, 0];
        let mut previous: Option<Vec<f64>> = None;
        for lambda in [0.0, 0.01, 1.0, 2.0, 5.0, 7.0, 10.0, 50.0, 100.0] {
            let m = train(LabeledData::new(&x, &y), Objective::BinaryLogistic, &stump_params(lambda), None, 0)
                .unwrap();
            let w: Vec<f64> = m.trees[0].leaves().map(|(_, n)| match n {
                Node::Leaf { weight, .. } => weight.abs(),
                _ => unreachable!(),
            }).collect();
            if let Some(prev) = &previous {
                assert_eq!(prev.len(), w.len());
                for (a, b) in prev.iter().zip(&w) {
                    assert!(b <= a, "lambda {lambda}: {b} > {a}");
                }
            }
            previous = Some(w);
        }
    }

    #[test]
    fn missing_rows_follow_default() {
        let x = Matrix::new(vec![1.0, 2.0, 3.0, 4.0, f64::NAN, f64::NAN], 6, 1);
        let y = [0, 0, 1, 1, 1, 1];
        let m = train(LabeledData::new(&x, &y), Objective::BinaryLogistic, &stump_params(1.0), None, 0)
            .unwrap();
        let Node::Split { default_left, right, left, .. } = m.trees[0].nodes[0] else {
            panic!("expected split");
        };
        assert!(!default_left);
        assert_eq!(m.trees[0].leaf_index(&[f64::NAN]), right);
        assert_ne!(m.trees[0].leaf_index(&[f64::NAN]), left);
    }

    #[test]
    fn softmax_trains_three_trees_per_round() {
        let x = Matrix::new((0..30).map(f64::from).collect(), 30, 1);
        let y: Vec<usize> = (0..30).map(|i| i / 10).collect();
        let params = HyperParams {
            n_estimators_max: 5,
            ..HyperParams::default()
        };
        let m = train(LabeledData::new(&x, &y), Objective::Softmax { n_classes: 3 }, &params, None, 1)
            .unwrap();
        assert_eq!(m.trees.len(), 15);
        assert_eq!(m.n_rounds(), 5);
        let p = m.predict_proba(&[25.0], TreeRange::All).unwrap();
        assert_eq!(argmax(&p), 2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn early_stopping_records_best_round() {
        // Labels drawn independently of x: eval loss stops improving quickly.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Matrix::new((0..60).map(f64::from).collect(), 60, 1);
        let y: Vec<usize> = (0..60).map(|_| rng.random_range(0..2)).collect();
        let ex = Matrix::new((0..40).map(|i| f64::from(i) * 1.5).collect(), 40, 1);
        let ey: Vec<usize> = (0..40).map(|_| rng.random_range(0..2)).collect();
        let params = HyperParams {
            learning_rate: 0.19,
            max_depth: 0,
            n_estimators_max: 10_000,
            early_stopping_rounds: 35,
            ..HyperParams::default()
        };
        let m = train(LabeledData::new(&x, &y), Objective::BinaryLogistic, &params, Some(LabeledData::new(&ex, &ey)), 3)
            .unwrap();
        let best = m.best_iteration.unwrap();
        assert_eq!(m.n_rounds(), best + 36);
        let min = m.eval_history.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(m.eval_history[best], min);
    }

    #[test]
    fn seeded_subsampling_is_reproducible() {
        let x = Matrix::new((0..200).map(|i| f64::from((i * 13) % 97)).collect(), 100, 2);
        let y: Vec<usize> = (0..100).map(|i| usize::from(i % 3 == 0)).collect();
        let params = HyperParams {
            subsample: 0.6,
            colsample_bytree: 0.5,
            n_estimators_max: 20,
            ..HyperParams::default()
        };
        let a = train(LabeledData::new(&x, &y), Objective::BinaryLogistic, &params, None, 42).unwrap();
        let b = train(LabeledData::new(&x, &y), Objective::BinaryLogistic, &params, None, 42).unwrap();
        assert_eq!(a, b);
        let c = train(LabeledData::new(&x, &y), Objective::BinaryLogistic, &params, None, 43).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn json_round_trip() {
        let x = Matrix::new((0..200).map(|i| f64::from((i * 13) % 97) / 7.0).collect(), 100, 2);
        let y: Vec<usize> = (0..100).map(|i| usize::from(i % 3 == 0)).collect();
        let params = HyperParams {
            n_estimators_max: 10,
            ..HyperParams::default()
        };
        let m = train(LabeledData::new(&x, &y), Objective::BinaryLogistic, &params, None, 42).unwrap();
        let back = Ensemble::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
