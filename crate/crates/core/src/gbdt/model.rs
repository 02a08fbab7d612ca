use serde::{Deserialize, Serialize};

use crate::gbdt::metrics::{sigmoid, softmax};
use crate::gbdt::tree::Tree;
use crate::gbdt::{GbdtError, HyperParams, Objective};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Which trees take part in a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TreeRange {
    #[default]
    All,
    /// Rounds `0..=best_iteration` when early stopping recorded one.
    BestIteration,
    /// The first `n` boosting rounds.
    Rounds(usize),
}

/// A trained boosted-tree model.
///
/// Trees are stored round-major: tree `i` belongs to round `i / k` and
/// output `i % k`, where `k` is 1 for binary and the class count for
/// softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub format_version: u32,
    pub objective: Objective,
    pub n_features: usize,
    /// Per output: log-odds (binary) or class log-priors (softmax).
    pub base_score: Vec<f64>,
    pub trees: Vec<Tree>,
    pub params: HyperParams,
    /// Train logloss after each round.
    #[serde(default)]
    pub train_history: Vec<f64>,
    /// Eval logloss after each round, when an eval set was given.
    #[serde(default)]
    pub eval_history: Vec<f64>,
    #[serde(default)]
    pub best_iteration: Option<usize>,
}

impl Ensemble {
    pub fn n_outputs(&self) -> usize {
        self.objective.n_outputs()
    }

    pub fn n_classes(&self) -> usize {
        self.objective.n_classes()
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.len() / self.n_outputs()
    }

    /// Output that tree `i` contributes to.
    pub fn tree_output(&self, i: usize) -> usize {
        i % self.n_outputs()
    }

    fn rounds_for(&self, range: TreeRange) -> usize {
        let all = self.n_rounds();
        match range {
            TreeRange::All => all,
            TreeRange::BestIteration => self.best_iteration.map_or(all, |b| (b + 1).min(all)),
            TreeRange::Rounds(n) => n.min(all),
        }
    }

    fn check_row(&self, row: &[f64]) -> Result<(), GbdtError> {
        if row.len() != self.n_features {
            return Err(GbdtError::SchemaMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Raw margins per output.
    pub fn margins(&self, row: &[f64], range: TreeRange) -> Result<Vec<f64>, GbdtError> {
        self.check_row(row)?;
        let k = self.n_outputs();
        let mut m = self.base_score.clone();
        let n_trees = self.rounds_for(range) * k;
        for (i, tree) in self.trees[..n_trees].iter().enumerate() {
            m[i % k] += tree.predict(row);
        }
        Ok(m)
    }

    /// Class probabilities; binary models return `[1 - p, p]`.
    pub fn predict_proba(&self, row: &[f64], range: TreeRange) -> Result<Vec<f64>, GbdtError> {
        let m = self.margins(row, range)?;
        Ok(margins_to_proba(self.objective, &m))
    }

    pub fn predict_class(&self, row: &[f64], range: TreeRange) -> Result<usize, GbdtError> {
        Ok(crate::gbdt::metrics::argmax(&self.predict_proba(row, range)?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GbdtError> {
        let model: Ensemble =
            serde_json::from_str(text).map_err(|e| GbdtError::Format(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: String| Err(GbdtError::Format(m));
        if self.format_version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported format version {}", self.format_version));
        }
        if self.base_score.len() != self.n_outputs() {
            return bad(format!(
                "{} base scores for {} outputs",
                self.base_score.len(),
                self.n_outputs()
            ));
        }
        if self.trees.len() % self.n_outputs() != 0 {
            return bad("tree count is not a multiple of the output count".into());
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.validate(self.n_features).or_else(|e| bad(format!("tree {i}: {e}")))?;
        }
        Ok(())
    }
}

pub fn margins_to_proba(objective: Objective, margins: &[f64]) -> Vec<f64> {
    match objective {
        Objective::BinaryLogistic => {
            let p = sigmoid(margins[0]);
            vec![1.0 - p, p]
        }
        Objective::Softmax { .. } => softmax(margins),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::tree::Node;

    fn empty(objective: Objective, base_score: Vec<f64>) -> Ensemble {
        Ensemble {
            format_version: MODEL_FORMAT_VERSION,
            objective,
            n_features: 2,
            base_score,
            trees: vec![],
            params: HyperParams::default(),
            train_history: vec![],
            eval_history: vec![],
            best_iteration: None,
        }
    }

    #[test]
    fn empty_binary_returns_prior() {
        let p: f64 = 0.3;
        let m = empty(Objective::BinaryLogistic, vec![(p / (1.0 - p)).ln()]);
        let proba = m.predict_proba(&[0.0, 0.0], TreeRange::All).unwrap();
        assert!((proba[1] - p).abs() < 1e-15);
    }

    #[test]
    fn empty_softmax_equal_margins() {
        let m = empty(Objective::Softmax { n_classes: 3 }, vec![0.4; 3]);
        let proba = m.predict_proba(&[1.0, 2.0], TreeRange::All).unwrap();
        assert!(proba.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!((proba.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schema_mismatch() {
        let m = empty(Objective::BinaryLogistic, vec![0.0]);
        assert!(matches!(
            m.predict_proba(&[1.0], TreeRange::All),
            Err(GbdtError::SchemaMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn best_iteration_truncates() {
        let mut m = empty(Objective::BinaryLogistic, vec![0.0]);
        m.trees = vec![Tree::leaf(1.0, Some(1.0)), Tree::leaf(2.0, Some(1.0)), Tree::leaf(4.0, Some(1.0))];
        m.best_iteration = Some(1);
        assert_eq!(m.margins(&[0.0, 0.0], TreeRange::All).unwrap(), vec![7.0]);
        assert_eq!(m.margins(&[0.0, 0.0], TreeRange::BestIteration).unwrap(), vec![3.0]);
        assert_eq!(m.margins(&[0.0, 0.0], TreeRange::Rounds(1)).unwrap(), vec![1.0]);
    }

    #[test]
    fn json_rejects_bad_child() {
        let mut m = empty(Objective::BinaryLogistic, vec![0.0]);
        m.trees = vec![Tree {
            nodes: vec![Node::Split {
                feature: 0,
                threshold: 0.5,
                default_left: true,
                left: 1,
                right: 7,
                gain: 1.0,
                cover: None,
            }],
        }];
        assert!(matches!(Ensemble::from_json(&m.to_json()), Err(GbdtError::Format(_))));
    }
}
