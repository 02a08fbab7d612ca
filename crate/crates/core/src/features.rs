//! The 60-column feature schema: seven eye-movement summaries and 53 pupil
//! summaries per trial, plus projection onto the three feature groups.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{filter_events, EventThresholds};
use crate::ingest::{EventKind, Label, TrialRecord};
use crate::pupil::{bin_label, preprocess_pupil, remove_outliers_z, PupilBins, PupilConfig, N_BINS};

pub const N_FEATURES: usize = 60;
pub const N_EYE_FEATURES: usize = 7;
pub const N_PUPIL_FEATURES: usize = 53;

const EYE_NAMES: [&str; N_EYE_FEATURES] = [
    "fixation_number",
    "fixation_duration",
    "saccade_number",
    "saccade_duration",
    "saccade_amplitude",
    "blink_number",
    "blink_duration",
];

/// Canonical column order.
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names: Vec<String> = EYE_NAMES.iter().map(|s| s.to_string()).collect();
        names.extend(["pupil_mean", "pupil_max", "pupil_min"].map(String::from));
        names.extend((1..=N_BINS).map(|k| format!("pupil_window_{}", bin_label(k))));
        names
    })
}

pub fn feature_index(name: &str) -> Option<usize> {
    feature_names().iter().position(|n| n == name)
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("features.csv:{line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("features.csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("features.csv: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    #[default]
    All,
    EyeMovement,
    Pupil,
}

impl FeatureGroup {
    pub const ALL_GROUPS: [FeatureGroup; 3] =
        [FeatureGroup::All, FeatureGroup::EyeMovement, FeatureGroup::Pupil];

    /// Indices into the canonical order.
    pub fn columns(self) -> std::ops::Range<usize> {
        match self {
            FeatureGroup::All => 0..N_FEATURES,
            FeatureGroup::EyeMovement => 0..N_EYE_FEATURES,
            FeatureGroup::Pupil => N_EYE_FEATURES..N_FEATURES,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::All => "all",
            FeatureGroup::EyeMovement => "eye",
            FeatureGroup::Pupil => "pupil",
        }
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureGroup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(FeatureGroup::All),
            "eye" | "eye_movement" | "eyemovement" => Ok(FeatureGroup::EyeMovement),
            "pupil" => Ok(FeatureGroup::Pupil),
            other => Err(format!("unknown feature group `{other}`")),
        }
    }
}

/// How per-trial event durations are summarised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationMode {
    #[default]
    Mean,
    Sum,
}

impl FromStr for DurationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(DurationMode::Mean),
            "sum" => Ok(DurationMode::Sum),
            other => Err(format!("unknown duration mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub participant_id: String,
    pub trial_id: i64,
    pub label: Label,
    /// Canonical order; `None` is a missing value.
    pub values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).and_then(|i| self.values[i])
    }
}

fn summarize(durations: &[f64], mode: DurationMode) -> f64 {
    if durations.is_empty() {
        return 0.0;
    }
    let sum: f64 = durations.iter().sum();
    match mode {
        DurationMode::Mean => sum / durations.len() as f64,
        DurationMode::Sum => sum,
    }
}

/// Collapses a trial with filtered events and binned pupil into the
/// 60-column vector. Only events starting at or after card onset count.
pub fn extract_features(trial: &TrialRecord, bins: &PupilBins, mode: DurationMode) -> FeatureVector {
    let mut by_kind: [Vec<&crate::ingest::OcularEvent>; 3] = Default::default();
    for e in trial.events.iter().filter(|e| e.start_ms >= trial.card_onset_ms) {
        let slot = match e.kind {
            EventKind::Fixation => 0,
            EventKind::Saccade => 1,
            EventKind::Blink => 2,
        };
        by_kind[slot].push(e);
    }
    // Sorting makes float summation independent of the input order.
    let sorted = |evs: &[&crate::ingest::OcularEvent], f: fn(&crate::ingest::OcularEvent) -> f64| {
        let mut v: Vec<f64> = evs.iter().map(|e| f(e)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let durations = |i: usize| sorted(&by_kind[i], |e| e.duration_ms());
    let amplitudes = sorted(&by_kind[1], |e| e.amplitude_deg.unwrap_or(0.0));

    let mut values = Vec::with_capacity(N_FEATURES);
    values.push(Some(by_kind[0].len() as f64));
    values.push(Some(summarize(&durations(0), mode)));
    values.push(Some(by_kind[1].len() as f64));
    values.push(Some(summarize(&durations(1), mode)));
    values.push(Some(summarize(&amplitudes, DurationMode::Mean)));
    values.push(Some(by_kind[2].len() as f64));
    values.push(Some(summarize(&durations(2), mode)));

    let present: Vec<f64> = bins.present().collect();
    if present.is_empty() {
        values.extend([None, None, None]);
    } else {
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        let max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = present.iter().copied().fold(f64::INFINITY, f64::min);
        values.extend([Some(mean), Some(max), Some(min)]);
    }
    values.extend(bins.values().iter().copied());
    debug_assert_eq!(values.len(), N_FEATURES);

    FeatureVector {
        participant_id: trial.participant_id.clone(),
        trial_id: trial.trial_id,
        label: trial.label,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeaturizeConfig {
    pub thresholds: EventThresholds,
    pub pupil: PupilConfig,
    pub duration_mode: DurationMode,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeaturizeStats {
    pub trials: usize,
    pub events_dropped: usize,
    pub empty_baselines: usize,
    pub filled_gaps: usize,
    pub unsupported_gaps: usize,
    pub outliers_removed: usize,
}

/// Full chain: event filtering, pupil preprocessing, per-participant
/// outlier removal, feature extraction. Output order follows input order.
pub fn featurize(trials: &[TrialRecord], cfg: &FeaturizeConfig) -> (Vec<FeatureVector>, FeaturizeStats) {
    let mut stats = FeaturizeStats {
        trials: trials.len(),
        ..Default::default()
    };
    let filtered: Vec<TrialRecord> = trials
        .iter()
        .map(|t| {
            let events = filter_events(&t.events, &cfg.thresholds);
            stats.events_dropped += t.events.len() - events.len();
            t.header_with_events(events)
        })
        .collect();
    let mut pupils: Vec<_> = trials
        .iter()
        .zip(&filtered)
        .map(|(t, f)| preprocess_pupil(t, &f.events, &cfg.pupil))
        .collect();
    for p in &pupils {
        stats.empty_baselines += usize::from(p.baseline.is_none());
        stats.filled_gaps += p.interpolation.filled_gaps;
        stats.unsupported_gaps += p.interpolation.unsupported_gaps;
    }
    stats.outliers_removed = remove_outliers_z(&mut pupils, cfg.pupil.z_threshold);
    let vectors = filtered
        .iter()
        .zip(&pupils)
        .map(|(t, p)| extract_features(t, &p.bins, cfg.duration_mode))
        .collect();
    (vectors, stats)
}

/// Dense projection of feature vectors. Missing values are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    /// Row-major, `rows * names.len()`.
    pub data: Vec<f64>,
    pub labels: Vec<Label>,
    pub participants: Vec<String>,
    pub trial_ids: Vec<i64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }
}

pub fn select_group(vectors: &[FeatureVector], group: FeatureGroup) -> FeatureMatrix {
    let cols = group.columns();
    let names = feature_names()[cols.clone()].to_vec();
    let mut data = Vec::with_capacity(vectors.len() * names.len());
    for v in vectors {
        data.extend(v.values[cols.clone()].iter().map(|x| x.unwrap_or(f64::NAN)));
    }
    FeatureMatrix {
        names,
        data,
        labels: vectors.iter().map(|v| v.label).collect(),
        participants: vectors.iter().map(|v| v.participant_id.clone()).collect(),
        trial_ids: vectors.iter().map(|v| v.trial_id).collect(),
    }
}

pub fn write_features_csv<W: Write>(w: W, vectors: &[FeatureVector]) -> Result<(), FeatureError> {
    let mut w = std::io::BufWriter::new(w);
    write!(w, "participant_id,trial_id,label")?;
    for n in feature_names() {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for v in vectors {
        write!(w, "{},{},{}", v.participant_id, v.trial_id, v.label)?;
        for x in &v.values {
            match x {
                Some(x) => write!(w, ",{x}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(r: R) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rdr.headers()?.clone();
    let expected: Vec<&str> = ["participant_id", "trial_id", "label"]
        .into_iter()
        .chain(feature_names().iter().map(String::as_str))
        .collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(FeatureError::Invalid {
            line: 1,
            message: "header does not match the 60-feature schema".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let invalid = |message: String| FeatureError::Invalid { line, message };
        let rec = rec?;
        let trial_id = rec[1]
            .parse::<i64>()
            .map_err(|_| invalid(format!("bad trial_id `{}`", &rec[1])))?;
        let label = rec[2]
            .parse::<Label>()
            .map_err(|l| invalid(format!("unknown label `{l}`")))?;
        let mut values = Vec::with_capacity(N_FEATURES);
        for (j, cell) in rec.iter().skip(3).enumerate() {
            if cell.is_empty() {
                values.push(None);
            } else {
                let v = cell
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad value `{cell}` in {}", feature_names()[j])))?;
                values.push(Some(v));
            }
        }
        out.push(FeatureVector {
            participant_id: rec[0].to_string(),
            trial_id,
            label,
            values,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{DatasetId, OcularEvent};

    fn trial(events: Vec<OcularEvent>) -> TrialRecord {
        TrialRecord {
            dataset_id: DatasetId::NeonLike,
            participant_id: "p1".into(),
            trial_id: 3,
            label: Label::Revealing,
            card_onset_ms: 100.0,
            card_offset_ms: 5100.0,
            sample_rate_hz: 200,
            samples: vec![],
            events,
        }
    }

    #[test]
    fn schema_shape() {
        let names = feature_names();
        assert_eq!(names.len(), 60);
        assert_eq!(names[7], "pupil_mean");
        assert_eq!(names[10], "pupil_window_1");
        assert_eq!(names[26], "pupil_window_801");
        assert_eq!(names[59], "pupil_window_2451");
    }

    #[test]
    fn group_widths() {
        assert_eq!(FeatureGroup::All.columns().len(), 60);
        assert_eq!(FeatureGroup::EyeMovement.columns().len(), 7);
        assert_eq!(FeatureGroup::Pupil.columns().len(), 53);
    }

    #[test]
    fn zero_blinks() {
        let v = extract_features(&trial(vec![]), &PupilBins::missing(), DurationMode::Mean);
        assert_eq!(v.get("blink_number"), Some(0.0));
        assert_eq!(v.get("blink_duration"), Some(0.0));
        assert_eq!(v.get("pupil_mean"), None);
    }

    #[test]
    fn event_summaries() {
        let t = trial(vec![
            OcularEvent::new(EventKind::Fixation, 100.0, 300.0),
            OcularEvent::saccade(300.0, 330.0, 5.0),
            OcularEvent::new(EventKind::Fixation, 330.0, 730.0),
        ]);
        let v = extract_features(&t, &PupilBins::missing(), DurationMode::Mean);
        assert_eq!(v.get("fixation_number"), Some(2.0));
        assert_eq!(v.get("fixation_duration"), Some(300.0));
        assert_eq!(v.get("saccade_number"), Some(1.0));
        assert_eq!(v.get("saccade_duration"), Some(30.0));
        assert_eq!(v.get("saccade_amplitude"), Some(5.0));
        let s = extract_features(&t, &PupilBins::missing(), DurationMode::Sum);
        assert_eq!(s.get("fixation_duration"), Some(600.0));
    }

    #[test]
    fn pre_onset_events_do_not_count() {
        let t = trial(vec![OcularEvent::new(EventKind::Fixation, 60.0, 200.0)]);
        let v = extract_features(&t, &PupilBins::missing(), DurationMode::Mean);
        assert_eq!(v.get("fixation_number"), Some(0.0));
    }

    #[test]
    fn constant_zero_pupil() {
        let bins = PupilBins(vec![Some(0.0); N_BINS]);
        let v = extract_features(&trial(vec![]), &bins, DurationMode::Mean);
        assert_eq!(v.get("pupil_mean"), Some(0.0));
        assert_eq!(v.get("pupil_max"), Some(0.0));
        assert_eq!(v.get("pupil_min"), Some(0.0));
        assert!(v.values[10..].iter().all(|x| *x == Some(0.0)));
    }

    #[test]
    fn event_order_does_not_matter() {
        let mut events = vec![
            OcularEvent::new(EventKind::Fixation, 100.0, 317.3),
            OcularEvent::saccade(317.3, 341.9, 2.1),
            OcularEvent::new(EventKind::Fixation, 341.9, 801.7),
            OcularEvent::saccade(801.7, 830.0, 7.3),
            OcularEvent::new(EventKind::Blink, 900.0, 1011.1),
        ];
        let a = extract_features(&trial(events.clone()), &PupilBins::missing(), DurationMode::Mean);
        events.reverse();
        let b = extract_features(&trial(events), &PupilBins::missing(), DurationMode::Mean);
        assert_eq!(a, b);
    }

    #[test]
    fn group_projection_partitions_columns() {
        let mut values: Vec<Option<f64>> = (0..60).map(|i| Some(i as f64)).collect();
        values[20] = None;
        let v = FeatureVector {
            participant_id: "p".into(),
            trial_id: 1,
            label: Label::Faking,
            values,
        };
        let all = select_group(std::slice::from_ref(&v), FeatureGroup::All);
        let eye = select_group(std::slice::from_ref(&v), FeatureGroup::EyeMovement);
        let pupil = select_group(std::slice::from_ref(&v), FeatureGroup::Pupil);
        assert_eq!(all.n_cols(), 60);
        let mut joined = eye.names.clone();
        joined.extend(pupil.names.clone());
        assert_eq!(joined, all.names);
        assert_eq!(&all.row(0)[..7], eye.row(0));
        assert!(all.row(0)[20].is_nan());
        assert_eq!(pupil.labels, vec![Label::Faking]);
    }

    #[test]
    fn csv_round_trip_with_missing_cells() {
        let mut values: Vec<Option<f64>> = (0..60).map(|i| Some(i as f64 * 0.1 - 2.0)).collect();
        values[45] = None;
        let v = FeatureVector {
            participant_id: "p9".into(),
            trial_id: 12,
            label: Label::Concealing,
            values,
        };
        let mut buf = Vec::new();
        write_features_csv(&mut buf, std::slice::from_ref(&v)).unwrap();
        let back = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![v]);
    }

    #[test]
    fn csv_rejects_unknown_label() {
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &[]).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("p,1,Lying");
        text.push_str(&",0".repeat(60));
        text.push('\n');
        let err = read_features_csv(text.as_bytes()).unwrap_err();
        assert!(matches!(err, FeatureError::Invalid { line: 2, .. }));
    }
}
