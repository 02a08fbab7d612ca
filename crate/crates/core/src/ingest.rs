//! Loading of gaze samples, ocular events and trial metadata from the
//! neutral CSV formats, and assembly into per-trial records.
//!
//! Three files make up a recording set:
//!
//! * `samples.csv`: `participant_id,trial_id,t_ms,x_deg,y_deg,pupil,on_card,valid`
//! * `events.csv`: `participant_id,trial_id,kind,start_ms,end_ms,amplitude_deg`
//! * `trials.csv`: `participant_id,trial_id,dataset_id,label,card_onset_ms,card_offset_ms,sample_rate_hz`
//!
//! Samples and events are assigned to trials by time, per participant: a
//! trial owns everything inside `[card_onset_ms - 50, card_offset_ms]`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Length of the pre-onset baseline window that each trial carries.
pub const BASELINE_MS: f64 = 50.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: missing column `{column}` in header")]
    MissingColumn { file: String, column: String },
    #[error("{file}:{line}: timestamp {t_ms} does not increase within trial {participant_id}/{trial_id}")]
    NonMonotonicTime {
        file: String,
        line: usize,
        participant_id: String,
        trial_id: i64,
        t_ms: f64,
    },
    #[error("trials overlap for participant {participant_id}: {first} and {second}")]
    OverlappingTrials {
        participant_id: String,
        first: i64,
        second: i64,
    },
    #[error("{file}:{line}: unknown label `{label}`")]
    UnknownLabel {
        file: String,
        line: usize,
        label: String,
    },
    #[error("{file}:{line}: {message}")]
    InvalidRow {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

/// Experimental condition of a target trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Revealing,
    Concealing,
    Faking,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Revealing, Label::Concealing, Label::Faking];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Revealing => "Revealing",
            Label::Concealing => "Concealing",
            Label::Faking => "Faking",
        }
    }

    /// Parses a raw label cell. `Ok(None)` marks a non-target trial, which
    /// callers drop.
    pub fn parse_cell(raw: &str) -> Result<Option<Label>, String> {
        let s = raw.trim().to_ascii_lowercase();
        match s.as_str() {
            "revealing" => Ok(Some(Label::Revealing)),
            "concealing" => Ok(Some(Label::Concealing)),
            "faking" => Ok(Some(Label::Faking)),
            "" | "none" | "na" | "baseline" | "nontarget" | "non_target" | "-" => Ok(None),
            _ => Err(raw.to_string()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Label::parse_cell(s)? {
            Some(l) => Ok(l),
            None => Err(s.to_string()),
        }
    }
}

/// Which recording setup a trial comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    /// 1000 Hz desktop tracker with chin rest.
    EyelinkLike,
    /// 200 Hz head-mounted tracker.
    NeonLike,
}

impl DatasetId {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::EyelinkLike => "eyelink",
            DatasetId::NeonLike => "neon",
        }
    }

    pub fn default_sample_rate_hz(self) -> u32 {
        match self {
            DatasetId::EyelinkLike => 1000,
            DatasetId::NeonLike => 200,
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eyelink" | "eyelinklike" | "eyelink_like" => Ok(DatasetId::EyelinkLike),
            "neon" | "neonlike" | "neon_like" => Ok(DatasetId::NeonLike),
            other => Err(format!("unknown dataset id `{other}`")),
        }
    }
}

/// One gaze sample. Position and pupil are `None` during signal loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSample {
    pub t_ms: f64,
    pub x_deg: Option<f64>,
    pub y_deg: Option<f64>,
    pub pupil: Option<f64>,
    pub on_card: bool,
    pub valid: bool,
}

impl GazeSample {
    /// Pupil value when the sample is usable.
    pub fn valid_pupil(&self) -> Option<f64> {
        if self.valid {
            self.pupil
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Fixation,
    Saccade,
    Blink,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Fixation => "Fixation",
            EventKind::Saccade => "Saccade",
            EventKind::Blink => "Blink",
        }
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fixation" => Ok(EventKind::Fixation),
            "saccade" => Ok(EventKind::Saccade),
            "blink" => Ok(EventKind::Blink),
            other => Err(format!("unknown event kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcularEvent {
    pub kind: EventKind,
    pub start_ms: f64,
    pub end_ms: f64,
    /// Saccades only.
    pub amplitude_deg: Option<f64>,
}

impl OcularEvent {
    pub fn new(kind: EventKind, start_ms: f64, end_ms: f64) -> Self {
        OcularEvent {
            kind,
            start_ms,
            end_ms,
            amplitude_deg: None,
        }
    }

    pub fn saccade(start_ms: f64, end_ms: f64, amplitude_deg: f64) -> Self {
        OcularEvent {
            kind: EventKind::Saccade,
            start_ms,
            end_ms,
            amplitude_deg: Some(amplitude_deg),
        }
    }

    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }

    fn check(&self) -> Result<(), String> {
        if !(self.end_ms > self.start_ms) {
            return Err(format!(
                "event end {} not after start {}",
                self.end_ms, self.start_ms
            ));
        }
        match (self.kind, self.amplitude_deg) {
            (EventKind::Saccade, Some(a)) if a >= 0.0 && a.is_finite() => Ok(()),
            (EventKind::Saccade, Some(a)) => Err(format!("invalid saccade amplitude {a}")),
            (EventKind::Saccade, None) => Err("saccade without amplitude".into()),
            (_, Some(_)) => Err(format!("amplitude given for {}", self.kind.as_str())),
            (_, None) => Ok(()),
        }
    }
}

/// One card presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub dataset_id: DatasetId,
    pub participant_id: String,
    pub trial_id: i64,
    pub label: Label,
    pub card_onset_ms: f64,
    pub card_offset_ms: f64,
    pub sample_rate_hz: u32,
    pub samples: Vec<GazeSample>,
    pub events: Vec<OcularEvent>,
}

impl TrialRecord {
    /// Start of the owned span (baseline window start).
    pub fn window_start_ms(&self) -> f64 {
        self.card_onset_ms - BASELINE_MS
    }

    /// Copy of the trial metadata with the given events and no samples.
    pub fn header_with_events(&self, events: Vec<OcularEvent>) -> TrialRecord {
        TrialRecord {
            dataset_id: self.dataset_id,
            participant_id: self.participant_id.clone(),
            trial_id: self.trial_id,
            label: self.label,
            card_onset_ms: self.card_onset_ms,
            card_offset_ms: self.card_offset_ms,
            sample_rate_hz: self.sample_rate_hz,
            samples: Vec::new(),
            events,
        }
    }
}

/// Column names for `samples.csv`; defaults are the canonical header.
#[derive(Debug, Clone)]
pub struct SampleSchema {
    pub participant_id: String,
    pub trial_id: String,
    pub t_ms: String,
    pub x_deg: String,
    pub y_deg: String,
    pub pupil: String,
    pub on_card: String,
    pub valid: String,
}

impl Default for SampleSchema {
    fn default() -> Self {
        SampleSchema {
            participant_id: "participant_id".into(),
            trial_id: "trial_id".into(),
            t_ms: "t_ms".into(),
            x_deg: "x_deg".into(),
            y_deg: "y_deg".into(),
            pupil: "pupil".into(),
            on_card: "on_card".into(),
            valid: "valid".into(),
        }
    }
}

/// A sample row tagged with its recording keys.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub participant_id: String,
    pub trial_id: i64,
    pub sample: GazeSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRow {
    pub participant_id: String,
    pub trial_id: i64,
    pub event: OcularEvent,
}

/// A row of `trials.csv`. The label stays raw until assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialIndexRow {
    pub line: usize,
    pub participant_id: String,
    pub trial_id: i64,
    pub dataset_id: DatasetId,
    pub label: String,
    pub card_onset_ms: f64,
    pub card_offset_ms: f64,
    pub sample_rate_hz: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedSamples {
    pub rows: Vec<SampleRow>,
    /// Lines that could not be turned into a sample at all.
    pub discarded: usize,
}

fn file_name(path: &Path) -> String {
    path.display().to_string()
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| IngestError::Io {
        file: file_name(path),
        source,
    })
}

fn column_index(headers: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| IngestError::MissingColumn {
            file: file.to_string(),
            column: name.to_string(),
        })
}

fn parse_opt_f64(cell: &str) -> Option<f64> {
    let c = cell.trim();
    if c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") {
        return None;
    }
    c.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_bool(cell: &str) -> Option<bool> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

/// Loads `samples.csv` with the given column map.
///
/// Rows whose timestamp, keys or flags cannot be parsed are discarded and
/// counted. Rows with an unusable position or pupil (non-numeric, `NA`,
/// non-positive pupil) are kept with `valid = false`.
pub fn load_samples(path: &Path, schema: &SampleSchema) -> Result<LoadedSamples> {
    let file = file_name(path);
    read_samples(open(path)?, schema, &file)
}

pub fn read_samples<R: Read>(reader: R, schema: &SampleSchema, file: &str) -> Result<LoadedSamples> {
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| IngestError::Csv {
            file: file.to_string(),
            source,
        })?
        .clone();
    let idx = |name: &str| column_index(&headers, name, file);
    let (ip, it, itm, ix, iy, ipu, ion, iva) = (
        idx(&schema.participant_id)?,
        idx(&schema.trial_id)?,
        idx(&schema.t_ms)?,
        idx(&schema.x_deg)?,
        idx(&schema.y_deg)?,
        idx(&schema.pupil)?,
        idx(&schema.on_card)?,
        idx(&schema.valid)?,
    );
    let width = headers.len();

    let mut out = LoadedSamples::default();
    let mut last_t: HashMap<(String, i64), f64> = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = match record {
            Ok(r) => r,
            Err(_) => {
                out.discarded += 1;
                continue;
            }
        };
        if record.len() != width {
            out.discarded += 1;
            continue;
        }
        let participant_id = record[ip].to_string();
        let trial_id = record[it].parse::<i64>().ok();
        let t_ms = record[itm].parse::<f64>().ok().filter(|t| t.is_finite() && *t >= 0.0);
        let on_card = parse_bool(&record[ion]);
        let valid_flag = parse_bool(&record[iva]);
        let (Some(trial_id), Some(t_ms), Some(on_card), Some(valid_flag)) =
            (trial_id, t_ms, on_card, valid_flag)
        else {
            out.discarded += 1;
            continue;
        };
        if participant_id.is_empty() {
            out.discarded += 1;
            continue;
        }
        let x_deg = parse_opt_f64(&record[ix]);
        let y_deg = parse_opt_f64(&record[iy]);
        let pupil = parse_opt_f64(&record[ipu]);
        let valid = valid_flag
            && x_deg.is_some()
            && y_deg.is_some()
            && matches!(pupil, Some(p) if p > 0.0);

        let key = (participant_id.clone(), trial_id);
        if let Some(prev) = last_t.get(&key) {
            if t_ms <= *prev {
                return Err(IngestError::NonMonotonicTime {
                    file: file.to_string(),
                    line,
                    participant_id,
                    trial_id,
                    t_ms,
                });
            }
        }
        last_t.insert(key, t_ms);
        out.rows.push(SampleRow {
            participant_id,
            trial_id,
            sample: GazeSample {
                t_ms,
                x_deg,
                y_deg,
                pupil,
                on_card,
                valid,
            },
        });
    }
    Ok(out)
}

pub fn load_events(path: &Path) -> Result<Vec<EventRow>> {
    let file = file_name(path);
    read_events(open(path)?, &file)
}

pub fn read_events<R: Read>(reader: R, file: &str) -> Result<Vec<EventRow>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| IngestError::Csv {
            file: file.to_string(),
            source,
        })?
        .clone();
    let idx = |name: &str| column_index(&headers, name, file);
    let (ip, it, ik, is, ie, ia) = (
        idx("participant_id")?,
        idx("trial_id")?,
        idx("kind")?,
        idx("start_ms")?,
        idx("end_ms")?,
        idx("amplitude_deg")?,
    );
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let invalid = |message: String| IngestError::InvalidRow {
            file: file.to_string(),
            line,
            message,
        };
        let record = record.map_err(|e| invalid(e.to_string()))?;
        let get = |j: usize| record.get(j).unwrap_or("");
        let trial_id = get(it)
            .parse::<i64>()
            .map_err(|_| invalid(format!("bad trial_id `{}`", get(it))))?;
        let kind = get(ik).parse::<EventKind>().map_err(invalid)?;
        let start_ms = get(is)
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad start_ms `{}`", get(is))))?;
        let end_ms = get(ie)
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad end_ms `{}`", get(ie))))?;
        let amp_cell = get(ia);
        let amplitude_deg = if amp_cell.is_empty() {
            None
        } else {
            Some(
                amp_cell
                    .parse::<f64>()
                    .map_err(|_| invalid(format!("bad amplitude_deg `{amp_cell}`")))?,
            )
        };
        let event = OcularEvent {
            kind,
            start_ms,
            end_ms,
            amplitude_deg,
        };
        event.check().map_err(invalid)?;
        out.push(EventRow {
            participant_id: get(ip).to_string(),
            trial_id,
            event,
        });
    }
    Ok(out)
}

pub fn load_trial_index(path: &Path) -> Result<Vec<TrialIndexRow>> {
    let file = file_name(path);
    read_trial_index(open(path)?, &file)
}

pub fn read_trial_index<R: Read>(reader: R, file: &str) -> Result<Vec<TrialIndexRow>> {
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|source| IngestError::Csv {
            file: file.to_string(),
            source,
        })?
        .clone();
    let idx = |name: &str| column_index(&headers, name, file);
    let (ip, it, id, il, ion, ioff, ir) = (
        idx("participant_id")?,
        idx("trial_id")?,
        idx("dataset_id")?,
        idx("label")?,
        idx("card_onset_ms")?,
        idx("card_offset_ms")?,
        idx("sample_rate_hz")?,
    );
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let invalid = |message: String| IngestError::InvalidRow {
            file: file.to_string(),
            line,
            message,
        };
        let record = record.map_err(|e| invalid(e.to_string()))?;
        let get = |j: usize| record.get(j).unwrap_or("");
        let trial_id = get(it)
            .parse::<i64>()
            .map_err(|_| invalid(format!("bad trial_id `{}`", get(it))))?;
        let dataset_id = get(id).parse::<DatasetId>().map_err(invalid)?;
        let card_onset_ms = get(ion)
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad card_onset_ms `{}`", get(ion))))?;
        let card_offset_ms = get(ioff)
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad card_offset_ms `{}`", get(ioff))))?;
        let sample_rate_hz = get(ir)
            .parse::<u32>()
            .map_err(|_| invalid(format!("bad sample_rate_hz `{}`", get(ir))))?;
        if card_onset_ms < BASELINE_MS {
            return Err(invalid(format!(
                "card_onset_ms {card_onset_ms} leaves no room for the {BASELINE_MS} ms baseline"
            )));
        }
        if card_offset_ms <= card_onset_ms {
            return Err(invalid("card_offset_ms must follow card_onset_ms".into()));
        }
        if sample_rate_hz == 0 {
            return Err(invalid("sample_rate_hz must be positive".into()));
        }
        out.push(TrialIndexRow {
            line,
            participant_id: get(ip).to_string(),
            trial_id,
            dataset_id,
            label: get(il).to_string(),
            card_onset_ms,
            card_offset_ms,
            sample_rate_hz,
        });
    }
    Ok(out)
}

/// Groups samples and events into trials by time window.
///
/// Non-target rows (empty or `none`/`baseline` labels) are dropped. Every
/// sample and event inside `[onset - 50, offset]` of a retained trial is
/// assigned to it; events must lie wholly inside the window.
pub fn assemble_trials(
    samples: &[SampleRow],
    events: &[EventRow],
    trial_index: &[TrialIndexRow],
) -> Result<Vec<TrialRecord>> {
    let mut trials = Vec::new();
    for row in trial_index {
        let label = Label::parse_cell(&row.label).map_err(|label| IngestError::UnknownLabel {
            file: "trials.csv".into(),
            line: row.line,
            label,
        })?;
        let Some(label) = label else { continue };
        trials.push(TrialRecord {
            dataset_id: row.dataset_id,
            participant_id: row.participant_id.clone(),
            trial_id: row.trial_id,
            label,
            card_onset_ms: row.card_onset_ms,
            card_offset_ms: row.card_offset_ms,
            sample_rate_hz: row.sample_rate_hz,
            samples: Vec::new(),
            events: Vec::new(),
        });
    }

    // Per participant: trial indices sorted by window start.
    let mut by_participant: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in trials.iter().enumerate() {
        by_participant.entry(&t.participant_id).or_default().push(i);
    }
    for idxs in by_participant.values_mut() {
        idxs.sort_by(|&a, &b| {
            trials[a]
                .window_start_ms()
                .total_cmp(&trials[b].window_start_ms())
                .then(trials[a].trial_id.cmp(&trials[b].trial_id))
        });
        for pair in idxs.windows(2) {
            let (a, b) = (&trials[pair[0]], &trials[pair[1]]);
            if b.window_start_ms() <= a.card_offset_ms {
                return Err(IngestError::OverlappingTrials {
                    participant_id: a.participant_id.clone(),
                    first: a.trial_id,
                    second: b.trial_id,
                });
            }
        }
    }
    let windows: HashMap<&str, Vec<(f64, f64, usize)>> = by_participant
        .iter()
        .map(|(p, idxs)| {
            let w = idxs
                .iter()
                .map(|&i| (trials[i].window_start_ms(), trials[i].card_offset_ms, i))
                .collect();
            (*p, w)
        })
        .collect();

    let locate = |participant: &str, t: f64| -> Option<usize> {
        let w = windows.get(participant)?;
        // First window whose end is >= t.
        let pos = w.partition_point(|&(_, end, _)| end < t);
        w.get(pos).filter(|&&(start, _, _)| start <= t).map(|&(_, _, i)| i)
    };

    let mut sample_slots: Vec<Vec<GazeSample>> = vec![Vec::new(); trials.len()];
    for row in samples {
        if let Some(i) = locate(&row.participant_id, row.sample.t_ms) {
            sample_slots[i].push(row.sample.clone());
        }
    }
    let mut event_slots: Vec<Vec<OcularEvent>> = vec![Vec::new(); trials.len()];
    for row in events {
        if let Some(i) = locate(&row.participant_id, row.event.start_ms) {
            if row.event.end_ms <= trials[i].card_offset_ms {
                event_slots[i].push(row.event.clone());
            }
        }
    }
    for ((trial, mut s), e) in trials.iter_mut().zip(sample_slots).zip(event_slots) {
        s.sort_by(|a, b| a.t_ms.total_cmp(&b.t_ms));
        trial.samples = s;
        trial.events = e;
    }
    Ok(trials)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn bool_cell(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn io_err(file: &str) -> impl Fn(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        file: file.to_string(),
        source,
    }
}

pub fn write_samples<W: Write>(mut w: W, trials: &[TrialRecord]) -> Result<()> {
    let e = io_err("samples.csv");
    writeln!(w, "participant_id,trial_id,t_ms,x_deg,y_deg,pupil,on_card,valid").map_err(&e)?;
    for t in trials {
        for s in &t.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                t.participant_id,
                t.trial_id,
                s.t_ms,
                fmt_opt(s.x_deg),
                fmt_opt(s.y_deg),
                fmt_opt(s.pupil),
                bool_cell(s.on_card),
                bool_cell(s.valid)
            )
            .map_err(&e)?;
        }
    }
    Ok(())
}

pub fn write_events<W: Write>(mut w: W, trials: &[TrialRecord]) -> Result<()> {
    let e = io_err("events.csv");
    writeln!(w, "participant_id,trial_id,kind,start_ms,end_ms,amplitude_deg").map_err(&e)?;
    for t in trials {
        for ev in &t.events {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                t.participant_id,
                t.trial_id,
                ev.kind.as_str(),
                ev.start_ms,
                ev.end_ms,
                fmt_opt(ev.amplitude_deg)
            )
            .map_err(&e)?;
        }
    }
    Ok(())
}

pub fn write_trial_index<W: Write>(mut w: W, trials: &[TrialRecord]) -> Result<()> {
    let e = io_err("trials.csv");
    writeln!(
        w,
        "participant_id,trial_id,dataset_id,label,card_onset_ms,card_offset_ms,sample_rate_hz"
    )
    .map_err(&e)?;
    for t in trials {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            t.participant_id,
            t.trial_id,
            t.dataset_id,
            t.label,
            t.card_onset_ms,
            t.card_offset_ms,
            t.sample_rate_hz
        )
        .map_err(&e)?;
    }
    Ok(())
}

/// Paths of the three CSVs inside a directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingFiles {
    pub samples: std::path::PathBuf,
    pub events: std::path::PathBuf,
    pub trials: std::path::PathBuf,
}

impl RecordingFiles {
    pub fn in_dir(dir: &Path) -> Self {
        RecordingFiles {
            samples: dir.join("samples.csv"),
            events: dir.join("events.csv"),
            trials: dir.join("trials.csv"),
        }
    }
}

pub fn write_recording(files: &RecordingFiles, trials: &[TrialRecord]) -> Result<()> {
    let create = |p: &Path| {
        std::fs::File::create(p)
            .map(std::io::BufWriter::new)
            .map_err(|source| IngestError::Io {
                file: file_name(p),
                source,
            })
    };
    write_samples(create(&files.samples)?, trials)?;
    write_events(create(&files.events)?, trials)?;
    write_trial_index(create(&files.trials)?, trials)?;
    Ok(())
}

/// Loaded recording plus the number of discarded sample lines.
#[derive(Debug, Clone)]
pub struct Recording {
    pub trials: Vec<TrialRecord>,
    pub discarded_samples: usize,
}

pub fn load_recording(files: &RecordingFiles) -> Result<Recording> {
    let samples = load_samples(&files.samples, &SampleSchema::default())?;
    let events = load_events(&files.events)?;
    let index = load_trial_index(&files.trials)?;
    let trials = assemble_trials(&samples.rows, &events, &index)?;
    Ok(Recording {
        trials,
        discarded_samples: samples.discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "participant_id,trial_id,t_ms,x_deg,y_deg,pupil,on_card,valid\n";

    fn samples_from(body: &str) -> Result<LoadedSamples> {
        read_samples(
            format!("{HEADER}{body}").as_bytes(),
            &SampleSchema::default(),
            "samples.csv",
        )
    }

    #[test]
    fn empty_file_with_header() {
        let s = samples_from("").unwrap();
        assert!(s.rows.is_empty());
        assert_eq!(s.discarded, 0);
    }

    #[test]
    fn rows_kept_in_order() {
        let s = samples_from("p1,1,0,0,0,1000,1,1\np1,1,1,0,0,1001,1,1\np1,1,2,0,0,1002,1,1\n")
            .unwrap();
        let t: Vec<f64> = s.rows.iter().map(|r| r.sample.t_ms).collect();
        assert_eq!(t, vec![0.0, 1.0, 2.0]);
        assert!(s.rows.iter().all(|r| r.sample.valid));
    }

    #[test]
    fn na_pupil_is_kept_as_invalid() {
        let s = samples_from("p1,1,0,0,0,1000,1,1\np1,1,1,0,0,NA,1,1\np1,1,2,0,0,-4,1,1\n")
            .unwrap();
        assert_eq!(s.rows.len(), 3);
        assert_eq!(s.discarded, 0);
        assert!(s.rows[0].sample.valid);
        assert!(!s.rows[1].sample.valid);
        assert_eq!(s.rows[1].sample.pupil, None);
        assert!(!s.rows[2].sample.valid);
    }

    #[test]
    fn malformed_lines_are_counted() {
        let s = samples_from("p1,1,abc,0,0,1000,1,1\np1,1,1,0,0,1000,1\np1,1,2,0,0,1000,1,1\n")
            .unwrap();
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.discarded, 2);
    }

    #[test]
    fn missing_column() {
        let err = read_samples(
            "participant_id,trial_id,t_ms\n".as_bytes(),
            &SampleSchema::default(),
            "samples.csv",
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn { ref column, .. } if column == "x_deg"));
    }

    #[test]
    fn custom_schema() {
        let schema = SampleSchema {
            t_ms: "time".into(),
            ..SampleSchema::default()
        };
        let s = read_samples(
            "participant_id,trial_id,time,x_deg,y_deg,pupil,on_card,valid\np,1,5,0,0,1,1,1\n"
                .as_bytes(),
            &schema,
            "samples.csv",
        )
        .unwrap();
        assert_eq!(s.rows[0].sample.t_ms, 5.0);
    }

    #[test]
    fn decreasing_time_is_rejected() {
        let err = samples_from("p1,1,5,0,0,1000,1,1\np1,1,4,0,0,1000,1,1\n").unwrap_err();
        assert!(matches!(err, IngestError::NonMonotonicTime { line: 3, .. }));
        // Different trials are independent streams.
        samples_from("p1,1,5,0,0,1000,1,1\np1,2,4,0,0,1000,1,1\n").unwrap();
    }

    fn index_row(pid: &str, trial: i64, label: &str, onset: f64, offset: f64) -> TrialIndexRow {
        TrialIndexRow {
            line: 2,
            participant_id: pid.into(),
            trial_id: trial,
            dataset_id: DatasetId::EyelinkLike,
            label: label.into(),
            card_onset_ms: onset,
            card_offset_ms: offset,
            sample_rate_hz: 1000,
        }
    }

    fn sample_rows(pid: &str, ts: impl Iterator<Item = f64>) -> Vec<SampleRow> {
        ts.map(|t| SampleRow {
            participant_id: pid.into(),
            trial_id: 1,
            sample: GazeSample {
                t_ms: t,
                x_deg: Some(0.0),
                y_deg: Some(0.0),
                pupil: Some(1000.0),
                on_card: true,
                valid: true,
            },
        })
        .collect()
    }

    #[test]
    fn one_trial_covers_everything() {
        let samples = sample_rows("p", (50..=200).map(f64::from));
        let trials = assemble_trials(&samples, &[], &[index_row("p", 1, "Concealing", 100.0, 200.0)])
            .unwrap();
        assert_eq!(trials.len(), 1);
        assert_eq!(trials[0].samples.len(), samples.len());
    }

    #[test]
    fn unknown_label() {
        let err = assemble_trials(&[], &[], &[index_row("p", 1, "Lying", 100.0, 200.0)])
            .unwrap_err();
        assert!(matches!(err, IngestError::UnknownLabel { ref label, .. } if label == "Lying"));
    }

    #[test]
    fn non_target_trials_are_dropped() {
        let trials = assemble_trials(
            &[],
            &[],
            &[
                index_row("p", 1, "", 100.0, 200.0),
                index_row("p", 2, "faking", 400.0, 500.0),
            ],
        )
        .unwrap();
        assert_eq!(trials.len(), 1);
        assert_eq!(trials[0].label, Label::Faking);
    }

    #[test]
    fn overlapping_trials() {
        // Second window starts at 230 - 50 = 180, inside the first trial.
        let err = assemble_trials(
            &[],
            &[],
            &[
                index_row("p", 1, "Revealing", 100.0, 200.0),
                index_row("p", 2, "Revealing", 230.0, 400.0),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::OverlappingTrials { first: 1, second: 2, .. }));
        // Same windows for different participants are fine.
        assemble_trials(
            &[],
            &[],
            &[
                index_row("p", 1, "Revealing", 100.0, 200.0),
                index_row("q", 2, "Revealing", 100.0, 200.0),
            ],
        )
        .unwrap();
    }

    #[test]
    fn samples_partitioned_by_window() {
        let samples = sample_rows("p", (0..=1000).step_by(10).map(f64::from));
        let trials = assemble_trials(
            &samples,
            &[],
            &[
                index_row("p", 1, "Revealing", 100.0, 300.0),
                index_row("p", 2, "Concealing", 500.0, 700.0),
            ],
        )
        .unwrap();
        let first: Vec<f64> = trials[0].samples.iter().map(|s| s.t_ms).collect();
        assert_eq!(first.first(), Some(&50.0));
        assert_eq!(first.last(), Some(&300.0));
        assert_eq!(trials[1].samples.first().unwrap().t_ms, 450.0);
        assert_eq!(trials[1].samples.last().unwrap().t_ms, 700.0);
    }

    #[test]
    fn event_rows_validate_amplitude() {
        let hdr = "participant_id,trial_id,kind,start_ms,end_ms,amplitude_deg\n";
        let ok = read_events(
            format!("{hdr}p,1,Saccade,10,40,2.5\np,1,Fixation,40,300,\n").as_bytes(),
            "events.csv",
        )
        .unwrap();
        assert_eq!(ok[0].event.amplitude_deg, Some(2.5));
        let err = read_events(format!("{hdr}p,1,Fixation,40,300,1.0\n").as_bytes(), "events.csv")
            .unwrap_err();
        assert!(matches!(err, IngestError::InvalidRow { line: 2, .. }));
        let err = read_events(format!("{hdr}p,1,Blink,40,40,\n").as_bytes(), "events.csv")
            .unwrap_err();
        assert!(matches!(err, IngestError::InvalidRow { .. }));
    }
}
