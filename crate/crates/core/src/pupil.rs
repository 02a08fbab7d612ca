//! Pupil preprocessing chain.
//!
//! Per trial: on-card selection over `(0, 2500]` ms after onset, cubic
//! interpolation across blink gaps, baseline correction against the 50 ms
//! before onset, and averaging into 50 bins of 50 ms. Outlier removal runs
//! afterwards over all trials of a participant.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{DatasetId, EventKind, OcularEvent, TrialRecord, BASELINE_MS};

pub const WINDOW_MS: f64 = 2500.0;
pub const BIN_MS: f64 = 50.0;
pub const N_BINS: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum PupilError {
    #[error("no valid pupil sample in the baseline window")]
    EmptyBaseline,
}

/// Label of bin `k` (1-based): its first millisecond, `(k - 1) * 50 + 1`.
pub fn bin_label(k: usize) -> usize {
    (k - 1) * BIN_MS as usize + 1
}

/// Pupil trace with times relative to card onset. `None` marks a missing
/// value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PupilTrace {
    pub t_ms: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl PupilTrace {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, Option<f64>)>) -> Self {
        let (t_ms, values) = pairs.into_iter().unzip();
        PupilTrace { t_ms, values }
    }

    pub fn len(&self) -> usize {
        self.t_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineWindow {
    pub start_ms: f64,
    pub end_ms: f64,
    pub mean_pupil: f64,
}

impl BaselineWindow {
    /// Mean valid pupil over `[onset - 50, onset)`.
    pub fn from_trial(trial: &TrialRecord) -> Result<Self, PupilError> {
        let start_ms = trial.card_onset_ms - BASELINE_MS;
        let end_ms = trial.card_onset_ms;
        let (sum, n) = trial
            .samples
            .iter()
            .filter(|s| s.t_ms >= start_ms && s.t_ms < end_ms)
            .filter_map(|s| s.valid_pupil())
            .fold((0.0, 0usize), |(sum, n), p| (sum + p, n + 1));
        if n == 0 {
            return Err(PupilError::EmptyBaseline);
        }
        Ok(BaselineWindow {
            start_ms,
            end_ms,
            mean_pupil: sum / n as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    #[default]
    Subtractive,
    Divisive,
}

impl FromStr for BaselineMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subtractive" => Ok(BaselineMode::Subtractive),
            "divisive" => Ok(BaselineMode::Divisive),
            other => Err(format!("unknown baseline mode `{other}`")),
        }
    }
}

/// When to run blink-gap interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolationMode {
    /// On for desktop (Eyelink-like) recordings, off otherwise.
    #[default]
    Auto,
    On,
    Off,
}

impl InterpolationMode {
    pub fn enabled_for(self, dataset: DatasetId) -> bool {
        match self {
            InterpolationMode::Auto => dataset == DatasetId::EyelinkLike,
            InterpolationMode::On => true,
            InterpolationMode::Off => false,
        }
    }
}

impl FromStr for InterpolationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(InterpolationMode::Auto),
            "on" | "true" | "1" => Ok(InterpolationMode::On),
            "off" | "false" | "0" => Ok(InterpolationMode::Off),
            other => Err(format!("unknown interpolation mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PupilConfig {
    pub interpolate: InterpolationMode,
    pub baseline_mode: BaselineMode,
    pub z_threshold: f64,
}

impl Default for PupilConfig {
    fn default() -> Self {
        PupilConfig {
            interpolate: InterpolationMode::Auto,
            baseline_mode: BaselineMode::Subtractive,
            z_threshold: 3.0,
        }
    }
}

/// Samples with gaze on the card during `(onset, onset + 2500]`. Invalid
/// samples stay in the trace as missing values.
pub fn select_on_card(trial: &TrialRecord) -> PupilTrace {
    let onset = trial.card_onset_ms;
    PupilTrace::from_pairs(
        trial
            .samples
            .iter()
            .filter(|s| s.on_card)
            .map(|s| (s.t_ms - onset, s.valid_pupil()))
            .filter(|&(t, _)| t > 0.0 && t <= WINDOW_MS),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InterpolationReport {
    pub filled_gaps: usize,
    /// Gaps left missing for lack of two support points on each side.
    pub unsupported_gaps: usize,
}

/// Cubic through four points, evaluated at `t` (Lagrange form).
fn cubic_through(points: &[(f64, f64); 4], t: f64) -> f64 {
    let mut acc = 0.0;
    for (i, &(ti, vi)) in points.iter().enumerate() {
        let mut basis = 1.0;
        for (j, &(tj, _)) in points.iter().enumerate() {
            if i != j {
                basis *= (t - tj) / (ti - tj);
            }
        }
        acc += vi * basis;
    }
    acc
}

/// Replaces values inside blink spans (relative times, inclusive) by a
/// cubic through the two nearest valid values on each side. A gap grows
/// outward over adjacent missing entries. Gaps without enough support on
/// either side are set missing.
pub fn interpolate_blink_gaps(trace: &mut PupilTrace, blinks: &[(f64, f64)]) -> InterpolationReport {
    let mut report = InterpolationReport::default();
    let n = trace.len();
    for &(start, end) in blinks {
        let Some(first) = trace.t_ms.iter().position(|&t| t >= start && t <= end) else {
            continue;
        };
        let mut lo = first;
        let mut hi = first;
        while hi + 1 < n && trace.t_ms[hi + 1] <= end {
            hi += 1;
        }
        while lo > 0 && trace.values[lo - 1].is_none() {
            lo -= 1;
        }
        while hi + 1 < n && trace.values[hi + 1].is_none() {
            hi += 1;
        }
        let left: Vec<(f64, f64)> = (0..lo)
            .rev()
            .filter_map(|i| trace.values[i].map(|v| (trace.t_ms[i], v)))
            .take(2)
            .collect();
        let right: Vec<(f64, f64)> = (hi + 1..n)
            .filter_map(|i| trace.values[i].map(|v| (trace.t_ms[i], v)))
            .take(2)
            .collect();
        if left.len() < 2 || right.len() < 2 {
            for v in &mut trace.values[lo..=hi] {
                *v = None;
            }
            report.unsupported_gaps += 1;
            continue;
        }
        let support = [left[1], left[0], right[0], right[1]];
        // Centre times for conditioning.
        let t0 = support[1].0;
        let centred = support.map(|(t, v)| (t - t0, v));
        for i in lo..=hi {
            trace.values[i] = Some(cubic_through(&centred, trace.t_ms[i] - t0));
        }
        report.filled_gaps += 1;
    }
    report
}

pub fn baseline_correct(trace: &mut PupilTrace, baseline: &BaselineWindow, mode: BaselineMode) {
    let b = baseline.mean_pupil;
    for v in trace.values.iter_mut().flatten() {
        *v = match mode {
            BaselineMode::Subtractive => *v - b,
            BaselineMode::Divisive => *v / b,
        };
    }
}

/// Fifty 50 ms bins over `(0, 2500]`; bin `k` covers `((k-1)*50, k*50]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PupilBins(pub Vec<Option<f64>>);

impl Default for PupilBins {
    fn default() -> Self {
        PupilBins::missing()
    }
}

impl PupilBins {
    pub fn missing() -> Self {
        PupilBins(vec![None; N_BINS])
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.0
    }

    pub fn n_missing(&self) -> usize {
        self.0.iter().filter(|v| v.is_none()).count()
    }

    pub fn present(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().copied()
    }
}

/// Zero-based bin slot of a relative time, if inside `(0, 2500]`.
pub fn bin_index(t_ms: f64) -> Option<usize> {
    if t_ms <= 0.0 || t_ms > WINDOW_MS {
        return None;
    }
    let k = (t_ms / BIN_MS).ceil() as usize;
    Some(k.clamp(1, N_BINS) - 1)
}

pub fn bin_50ms(trace: &PupilTrace) -> PupilBins {
    let mut sums = [0.0; N_BINS];
    let mut counts = [0usize; N_BINS];
    for (&t, v) in trace.t_ms.iter().zip(&trace.values) {
        if let (Some(k), Some(v)) = (bin_index(t), v) {
            sums[k] += v;
            counts[k] += 1;
        }
    }
    PupilBins(
        sums.iter()
            .zip(counts)
            .map(|(&s, c)| (c > 0).then(|| s / c as f64))
            .collect(),
    )
}

/// Binned pupil signal of one trial, keyed for the per-participant outlier
/// pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPupil {
    pub participant_id: String,
    pub bins: PupilBins,
    pub baseline: Option<f64>,
    pub interpolation: InterpolationReport,
}

/// Runs selection, interpolation, baseline correction and binning.
pub fn preprocess_trial(trial: &TrialRecord, cfg: &PupilConfig) -> TrialPupil {
    preprocess_pupil(trial, &trial.events, cfg)
}

/// As [`preprocess_trial`], taking blink spans from `events` instead of
/// the trial's own event list.
pub fn preprocess_pupil(trial: &TrialRecord, events: &[OcularEvent], cfg: &PupilConfig) -> TrialPupil {
    let mut trace = select_on_card(trial);
    let mut interpolation = InterpolationReport::default();
    if cfg.interpolate.enabled_for(trial.dataset_id) {
        let onset = trial.card_onset_ms;
        let blinks: Vec<(f64, f64)> = events
            .iter()
            .filter(|e| e.kind == EventKind::Blink)
            .map(|e| (e.start_ms - onset, e.end_ms - onset))
            .collect();
        interpolation = interpolate_blink_gaps(&mut trace, &blinks);
    }
    let (bins, baseline) = match BaselineWindow::from_trial(trial) {
        Ok(b) => {
            baseline_correct(&mut trace, &b, cfg.baseline_mode);
            (bin_50ms(&trace), Some(b.mean_pupil))
        }
        Err(PupilError::EmptyBaseline) => (PupilBins::missing(), None),
    };
    TrialPupil {
        participant_id: trial.participant_id.clone(),
        bins,
        baseline,
        interpolation,
    }
}

/// Sets to missing every bin whose z-score within its participant and bin
/// position exceeds `threshold` in absolute value. Uses the sample
/// standard deviation; populations with fewer than two values or zero
/// spread are left alone. Returns the number of removed entries.
pub fn remove_outliers_z(trials: &mut [TrialPupil], threshold: f64) -> usize {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in trials.iter().enumerate() {
        groups.entry(t.participant_id.as_str()).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut removed = 0;
    for members in groups {
        for k in 0..N_BINS {
            let vals: Vec<f64> = members.iter().filter_map(|&i| trials[i].bins.0[k]).collect();
            let Some((mean, sd)) = mean_sd(&vals) else { continue };
            if sd == 0.0 {
                continue;
            }
            for &i in &members {
                if let Some(v) = trials[i].bins.0[k] {
                    if ((v - mean) / sd).abs() > threshold {
                        trials[i].bins.0[k] = None;
                        removed += 1;
                    }
                }
            }
        }
    }
    removed
}

fn mean_sd(vals: &[f64]) -> Option<(f64, f64)> {
    if vals.len() < 2 {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let ss = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    Some((mean, (ss / (n - 1.0)).sqrt()))
}
