//! Built-in oracle checks.
//!
//! Each check pits a production routine against a slow, obviously-correct
//! reimplementation on seeded random inputs. The CLI `verify` command runs
//! [`run_all`]; the same checks are usable from tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::events::{filter_events, EventThresholds};
use crate::explain::{shap_exact, shap_tree};
use crate::gbdt::{best_split, sigmoid, train, Ensemble, HyperParams, LabeledData, Matrix, Node, Objective, SplitParams, TreeRange};
use crate::harness::baseline_from_counts;
use crate::ingest::{EventKind, OcularEvent};
use crate::seed::derive_seed;

/// Stored binary model together with the rows it was trained on.
pub const GOLDEN_MODEL: &str = include_str!("../data/golden_model.json");

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, cases: usize, failures: Vec<String>) -> Self {
        let passed = failures.is_empty();
        let detail = if passed {
            format!("{cases} cases")
        } else {
            format!("{} of {cases} cases failed; first: {}", failures.len(), failures[0])
        };
        CheckResult {
            name,
            passed,
            cases,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Runs every check with default sizes.
pub fn run_all(seed: u64, golden: &str) -> Vec<CheckResult> {
    vec![
        check_split_finder(500, derive_seed(seed, &[1])),
        check_shapley(100, derive_seed(seed, &[2])),
        check_filter(1000, derive_seed(seed, &[3])),
        check_baselines(),
        check_golden_model(golden),
    ]
}

// ---------------------------------------------------------------------------
// Split finder

/// Split found by exhaustive enumeration, described by its partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedSplit {
    pub feature: usize,
    /// Largest present value sent left.
    pub left_max: f64,
    /// Smallest present value sent right.
    pub right_min: f64,
    pub missing_left: bool,
    pub gain: f64,
}

fn shrink(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

fn score(g: f64, h: f64, p: &SplitParams) -> f64 {
    if h + p.lambda <= 0.0 {
        return 0.0;
    }
    shrink(g, p.alpha).powi(2) / (h + p.lambda)
}

/// Gain of sending `left` rows left, summed directly from the rows.
pub fn enumerated_gain(left: &[bool], g: &[f64], h: &[f64], p: &SplitParams) -> Option<f64> {
    let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..left.len() {
        if left[i] {
            gl += g[i];
            hl += h[i];
        } else {
            gr += g[i];
            hr += h[i];
        }
    }
    if hl < p.min_child_weight || hr < p.min_child_weight {
        return None;
    }
    Some(0.5 * (score(gl, hl, p) + score(gr, hr, p) - score(gl + gr, hl + hr, p)))
}

/// Every admissible split of all rows of `x`, in no particular order.
pub fn enumerate_splits(x: &Matrix, g: &[f64], h: &[f64], p: &SplitParams) -> Vec<EnumeratedSplit> {
    let mut out = Vec::new();
    for f in 0..x.n_cols() {
        let col: Vec<f64> = (0..x.n_rows()).map(|r| x.get(r, f)).collect();
        let mut values: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let any_missing = col.iter().any(|v| v.is_nan());
        for w in values.windows(2) {
            let directions: &[bool] = if any_missing { &[false, true] } else { &[false] };
            for &missing_left in directions {
                let left: Vec<bool> = col
                    .iter()
                    .map(|&v| if v.is_nan() { missing_left } else { v <= w[0] })
                    .collect();
                if let Some(gain) = enumerated_gain(&left, g, h, p) {
                    out.push(EnumeratedSplit {
                        feature: f,
                        left_max: w[0],
                        right_min: w[1],
                        missing_left,
                        gain,
                    });
                }
            }
        }
    }
    out
}

/// Random split problem: small matrix with ties and missing cells.
pub struct SplitCase {
    pub x: Matrix,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub params: SplitParams,
}

pub fn random_split_case(rng: &mut ChaCha8Rng) -> SplitCase {
    let n = rng.random_range(2..=64);
    let p = rng.random_range(1..=4);
    let discrete = rng.random_bool(0.5);
    let missing_rate = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.3) };
    let mut data = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        let v = if rng.random_bool(missing_rate) {
            f64::NAN
        } else if discrete {
            rng.random_range(0..5) as f64
        } else {
            rng.random_range(-10.0..10.0)
        };
        data.push(v);
    }
    let g = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let params = SplitParams {
        lambda: [0.0, 0.5, 1.0, 5.0][rng.random_range(0..4)],
        alpha: [0.0, 0.0, 0.1, 0.5][rng.random_range(0..4)],
        min_child_weight: [0.0, 0.5, 1.0, 3.0][rng.random_range(0..4)],
    };
    SplitCase {
        x: Matrix::new(data, n, p),
        g,
        h,
        params,
    }
}

/// Compares `best_split` on all rows and features with enumeration.
pub fn compare_split(case: &SplitCase, tol: f64) -> Result<(), String> {
    let SplitCase { x, g, h, params } = case;
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    let features: Vec<usize> = (0..x.n_cols()).collect();
    let found = best_split(x, &rows, g, h, &features, params);
    let all = enumerate_splits(x, g, h, params);
    let best = all.iter().map(|s| s.gain).fold(f64::NEG_INFINITY, f64::max);
    let has_positive = all.iter().any(|s| s.gain > tol);
    let Some(c) = found else {
        return if has_positive {
            Err(format!("no split returned, enumeration found gain {best}"))
        } else {
            Ok(())
        };
    };
    if !all.iter().any(|s| s.gain > 0.0) {
        return Err(format!("split returned with gain {} but none is positive", c.gain));
    }
    if (c.gain - best).abs() > tol {
        return Err(format!("gain {} vs enumerated {best}", c.gain));
    }
    // The returned split must itself realise the optimum.
    let col: Vec<f64> = (0..x.n_rows()).map(|r| x.get(r, c.feature)).collect();
    let left: Vec<bool> = col
        .iter()
        .map(|&v| if v.is_nan() { c.default_left } else { v < c.threshold })
        .collect();
    match enumerated_gain(&left, g, h, params) {
        Some(gain) if (gain - best).abs() <= tol => {}
        other => return Err(format!("returned split recomputes to {other:?}, optimum {best}")),
    }
    // When the optimum is unique the split must be the enumerated one.
    let optimal: Vec<&EnumeratedSplit> = all.iter().filter(|s| s.gain >= best - tol).collect();
    if optimal.len() == 1 {
        let s = optimal[0];
        let missing_present = col.iter().any(|v| v.is_nan());
        let same = s.feature == c.feature
            && s.left_max < c.threshold
            && c.threshold <= s.right_min
            && (!missing_present || s.missing_left == c.default_left);
        if !same {
            return Err(format!("unique optimum {s:?} but got {c:?}"));
        }
    }
    Ok(())
}

pub fn check_split_finder(n_cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for i in 0..n_cases {
        let case = random_split_case(&mut rng);
        if let Err(e) = compare_split(&case, 1e-9) {
            failures.push(format!("case {i}: {e}"));
        }
    }
    CheckResult::new("split finder vs enumeration", n_cases, failures)
}

// ---------------------------------------------------------------------------
// Shapley values

/// Small random model: at most 4 features and depth 3.
pub fn random_small_model(rng: &mut ChaCha8Rng) -> (Ensemble, Matrix) {
    let n_features = rng.random_range(1..=4);
    let n_classes = if rng.random_bool(0.7) { 2 } else { 3 };
    let n = 60;
    let mut data = Vec::with_capacity(n * n_features);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = 0.0;
        for _ in 0..n_features {
            let v = if rng.random_bool(0.1) { f64::NAN } else { rng.random_range(-2.0..2.0) };
            if !v.is_nan() {
                s += v;
            }
            data.push(v);
        }
        let noisy = s + rng.random_range(-1.5..1.5);
        // Cycle through classes first so each one is present.
        let label = if i < n_classes { i } else if noisy > 0.7 { 0 } else if noisy < -0.7 || n_classes == 2 { 1 } else { 2 };
        y.push(label);
    }
    let x = Matrix::new(data, n, n_features);
    let params = HyperParams {
        learning_rate: rng.random_range(0.1..0.5),
        max_depth: rng.random_range(1..=3),
        n_estimators_max: rng.random_range(1..=5),
        min_child_weight: rng.random_range(0.0..2.0),
        alpha: rng.random_range(0.0..0.3),
        lambda: rng.random_range(0.0..2.0),
        early_stopping_rounds: 0,
        ..HyperParams::default()
    };
    let model = train(
        LabeledData::new(&x, &y),
        Objective::for_classes(n_classes),
        &params,
        None,
        rng.random(),
    )
    .expect("random model trains");
    (model, x)
}

fn random_row(rng: &mut ChaCha8Rng, n_features: usize) -> Vec<f64> {
    (0..n_features)
        .map(|_| if rng.random_bool(0.15) { f64::NAN } else { rng.random_range(-2.5..2.5) })
        .collect()
}

pub fn check_shapley(n_pairs: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for i in 0..n_pairs {
        let (model, _) = random_small_model(&mut rng);
        let row = random_row(&mut rng, model.n_features);
        let fast = shap_tree(&model, &row);
        let slow = shap_exact(&model, &row);
        match (fast, slow) {
            (Ok(a), Ok(b)) => {
                let diff = a
                    .values
                    .iter()
                    .flatten()
                    .zip(b.values.iter().flatten())
                    .chain(a.base.iter().zip(&b.base))
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max);
                if diff > 1e-9 {
                    failures.push(format!("pair {i}: max difference {diff:e}"));
                }
            }
            (a, b) => failures.push(format!("pair {i}: {:?} / {:?}", a.err(), b.err())),
        }
    }
    CheckResult::new("tree SHAP vs subset enumeration", n_pairs, failures)
}

// ---------------------------------------------------------------------------
// Event filter

pub fn random_events(rng: &mut ChaCha8Rng) -> Vec<OcularEvent> {
    let n = rng.random_range(0..40);
    let mut t = 0.0;
    (0..n)
        .map(|_| {
            let kind = [EventKind::Fixation, EventKind::Saccade, EventKind::Blink][rng.random_range(0..3)];
            // Durations cluster around the band edges to exercise them.
            let d = match rng.random_range(0..4) {
                0 => [15.0, 60.0, 400.0, 700.0, 5000.0][rng.random_range(0..5)],
                1 => [14.0, 59.0, 401.0, 701.0, 5001.0][rng.random_range(0..5)],
                _ => rng.random_range(0.0..6000.0),
            };
            let e = OcularEvent::new(kind, t, t + d);
            t += d;
            e
        })
        .collect()
}

fn brute_keep(e: &OcularEvent) -> bool {
    let d = e.end_ms - e.start_ms;
    match e.kind {
        EventKind::Fixation => (60.0..=5000.0).contains(&d),
        EventKind::Blink => (60.0..=700.0).contains(&d),
        EventKind::Saccade => (15.0..=400.0).contains(&d),
    }
}

pub fn check_filter(n_sets: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let th = EventThresholds::default();
    let mut failures = Vec::new();
    for i in 0..n_sets {
        let events = random_events(&mut rng);
        let kept = filter_events(&events, &th);
        let expected: Vec<OcularEvent> = events.iter().filter(|e| brute_keep(e)).cloned().collect();
        if kept != expected {
            failures.push(format!("set {i}: kept {} events, expected {}", kept.len(), expected.len()));
        } else if filter_events(&kept, &th) != kept {
            failures.push(format!("set {i}: filter is not idempotent"));
        }
    }
    CheckResult::new("event filter vs predicate", n_sets, failures)
}

// ---------------------------------------------------------------------------
// Baselines

/// Class counts of the two recorded datasets with their reported baselines.
pub const REPORTED_BASELINES: [(&str, &[usize], f64); 4] = [
    ("eyelink binary", &[1996, 1996], 0.500),
    ("neon binary", &[160, 181], 0.531),
    ("eyelink three-class", &[1996, 1996, 2065], 0.341),
    ("neon three-class", &[160, 181, 161], 0.361),
];

pub fn check_baselines() -> CheckResult {
    let mut failures = Vec::new();
    for (name, counts, reported) in REPORTED_BASELINES {
        let majority = *counts.iter().max().unwrap() as f64;
        let total: usize = counts.iter().sum();
        let expected = majority / total as f64;
        match baseline_from_counts(counts) {
            Ok(b) if (b - expected).abs() < 1e-15 && ((b * 1000.0).round() / 1000.0 - reported).abs() < 1e-12 => {}
            other => failures.push(format!("{name}: {other:?}, reported {reported:.3}")),
        }
    }
    CheckResult::new("majority baselines", REPORTED_BASELINES.len(), failures)
}

// ---------------------------------------------------------------------------
// Golden model

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldenFixture {
    pub x: Vec<Vec<Option<f64>>>,
    pub y: Vec<usize>,
    pub model: Ensemble,
}

impl GoldenFixture {
    pub fn matrix(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self
            .x
            .iter()
            .map(|r| r.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
            .collect();
        Matrix::from_rows(&rows)
    }
}

/// Recomputes every leaf weight and cover of a stored binary model from its
/// training rows and stored hyperparameters.
pub fn golden_mismatches(fixture: &GoldenFixture) -> Result<Vec<String>, String> {
    let model = &fixture.model;
    if model.objective != Objective::BinaryLogistic {
        return Err("golden model must be binary".into());
    }
    let x = fixture.matrix();
    let p = &model.params;
    let mut margins = vec![model.base_score[0]; x.n_rows()];
    let mut out = Vec::new();
    for (t, tree) in model.trees.iter().enumerate() {
        let mut sums = vec![(0.0, 0.0); tree.nodes.len()];
        for (r, &label) in fixture.y.iter().enumerate() {
            let prob = sigmoid(margins[r]);
            let g = prob - label as f64;
            let h = (prob * (1.0 - prob)).max(1e-16);
            let leaf = tree.leaf_index(x.row(r));
            sums[leaf].0 += g;
            sums[leaf].1 += h;
        }
        for (i, node) in tree.nodes.iter().enumerate() {
            let Node::Leaf { weight, cover } = node else { continue };
            let (g, h) = sums[i];
            let expected = -shrink(g, p.alpha) / (h + p.lambda) * p.learning_rate;
            if (expected - weight).abs() > 1e-9 {
                out.push(format!("tree {t} leaf {i}: weight {weight} vs recomputed {expected}"));
            }
            if let Some(c) = cover {
                if (c - h).abs() > 1e-9 {
                    out.push(format!("tree {t} leaf {i}: cover {c} vs recomputed {h}"));
                }
            }
        }
        for (r, m) in margins.iter_mut().enumerate() {
            *m += tree.predict(x.row(r));
        }
    }
    for r in 0..x.n_rows() {
        let stored = model.margins(x.row(r), TreeRange::All).map_err(|e| e.to_string())?[0];
        if (stored - margins[r]).abs() > 1e-9 {
            out.push(format!("row {r}: margin {stored} vs recomputed {}", margins[r]));
        }
    }
    Ok(out)
}

pub fn check_golden_model(text: &str) -> CheckResult {
    let name = "golden model leaf weights";
    let fixture: GoldenFixture = match serde_json::from_str(text) {
        Ok(f) => f,
        Err(e) => return CheckResult::new(name, 0, vec![format!("unreadable fixture: {e}")]),
    };
    let n_leaves = fixture.model.trees.iter().map(|t| t.leaves().count()).sum();
    match golden_mismatches(&fixture) {
        Ok(m) => CheckResult::new(name, n_leaves, m),
        Err(e) => CheckResult::new(name, n_leaves, vec![e]),
    }
}

/// Trains the model stored as the golden fixture.
pub fn build_golden_fixture() -> GoldenFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..32 {
        let a: f64 = rng.random_range(0.0..4.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        let c = if i % 7 == 3 { None } else { Some((rng.random_range(0.0..10.0_f64)).round()) };
        let label = usize::from(a + b + rng.random_range(-1.0..1.0) > 2.0);
        x.push(vec![Some((a * 100.0).round() / 100.0), Some((b * 100.0).round() / 100.0), c]);
        y.push(label);
    }
    let params = HyperParams {
        learning_rate: 0.3,
        max_depth: 2,
        n_estimators_max: 5,
        min_child_weight: 0.5,
        alpha: 0.1,
        lambda: 1.5,
        early_stopping_rounds: 0,
        ..HyperParams::default()
    };
    let rows: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect();
    let m = Matrix::from_rows(&rows);
    let model = train(LabeledData::new(&m, &y), Objective::BinaryLogistic, &params, None, 7).expect("golden model trains");
    GoldenFixture { x, y, model }
}
