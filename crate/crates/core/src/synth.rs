//! Seeded generator of synthetic card-test recordings.
//!
//! Each trial is a 5 s onset-locked sequence of fixations separated by
//! saccades and blinks, sampled at the dataset's rate, with a pupil trace
//! made of a participant baseline, a dilation bump after card onset and
//! white noise. Condition effects act on the event and signal level, so the
//! whole preprocessing chain runs on the output exactly as on recorded data.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::EventThresholds;
use crate::ingest::{
    write_recording, DatasetId, EventKind, GazeSample, IngestError, Label, OcularEvent, RecordingFiles, TrialRecord,
    BASELINE_MS,
};
use crate::seed::derive_seed;

pub const TRIAL_MS: f64 = 5000.0;
/// Pause between the end of one card and the baseline window of the next.
const INTER_TRIAL_MS: f64 = 950.0;
const FIRST_ONSET_MS: f64 = 1000.0;
const MIN_PARTICIPANTS: usize = 5;
/// Half-width of the square area gaze stays in, in degrees.
const GAZE_FIELD_DEG: f64 = 8.0;
const MIN_PUPIL: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Event and pupil parameters of one condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionEffect {
    pub blink_rate_hz: f64,
    pub blink_duration_mean_ms: f64,
    pub blink_duration_sd_ms: f64,
    pub fixation_duration_mean_ms: f64,
    pub fixation_duration_sd_ms: f64,
    pub saccade_rate_hz: f64,
    pub saccade_duration_mean_ms: f64,
    pub saccade_duration_sd_ms: f64,
    pub saccade_amplitude_mean_deg: f64,
    pub saccade_amplitude_sd_deg: f64,
    /// Peak of the baseline-corrected dilation, in pupil units.
    pub pupil_peak: f64,
    pub pupil_peak_sd: f64,
    /// Time of the dilation peak after card onset.
    pub pupil_latency_ms: f64,
}

impl Default for ConditionEffect {
    fn default() -> Self {
        ConditionEffect {
            blink_rate_hz: 0.3,
            blink_duration_mean_ms: 150.0,
            blink_duration_sd_ms: 30.0,
            fixation_duration_mean_ms: 220.0,
            fixation_duration_sd_ms: 60.0,
            saccade_rate_hz: 2.5,
            saccade_duration_mean_ms: 40.0,
            saccade_duration_sd_ms: 10.0,
            saccade_amplitude_mean_deg: 4.0,
            saccade_amplitude_sd_deg: 1.5,
            pupil_peak: 40.0,
            pupil_peak_sd: 15.0,
            pupil_latency_ms: 1000.0,
        }
    }
}

impl ConditionEffect {
    fn validate(&self, name: &str) -> Result<(), SynthError> {
        let fields = [
            ("blink_rate_hz", self.blink_rate_hz),
            ("blink_duration_mean_ms", self.blink_duration_mean_ms),
            ("blink_duration_sd_ms", self.blink_duration_sd_ms),
            ("fixation_duration_mean_ms", self.fixation_duration_mean_ms),
            ("fixation_duration_sd_ms", self.fixation_duration_sd_ms),
            ("saccade_rate_hz", self.saccade_rate_hz),
            ("saccade_duration_mean_ms", self.saccade_duration_mean_ms),
            ("saccade_duration_sd_ms", self.saccade_duration_sd_ms),
            ("saccade_amplitude_mean_deg", self.saccade_amplitude_mean_deg),
            ("saccade_amplitude_sd_deg", self.saccade_amplitude_sd_deg),
            ("pupil_peak_sd", self.pupil_peak_sd),
        ];
        for (field, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::InvalidSpec(format!("{name}.{field} = {v} must be finite and >= 0")));
            }
        }
        if !self.pupil_peak.is_finite() {
            return Err(SynthError::InvalidSpec(format!("{name}.pupil_peak must be finite")));
        }
        if !(self.pupil_latency_ms > 0.0 && self.pupil_latency_ms.is_finite()) {
            return Err(SynthError::InvalidSpec(format!("{name}.pupil_latency_ms must be positive")));
        }
        Ok(())
    }
}

/// Standard deviations of per-participant random offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipantSpread {
    pub fixation_duration_ms: f64,
    pub saccade_rate_hz: f64,
    pub blink_rate_hz: f64,
    pub pupil_base: f64,
    pub pupil_peak: f64,
}

impl Default for ParticipantSpread {
    fn default() -> Self {
        ParticipantSpread {
            fixation_duration_ms: 30.0,
            saccade_rate_hz: 0.4,
            blink_rate_hz: 0.1,
            pupil_base: 150.0,
            pupil_peak: 10.0,
        }
    }
}

impl ParticipantSpread {
    pub fn none() -> Self {
        ParticipantSpread {
            fixation_duration_ms: 0.0,
            saccade_rate_hz: 0.0,
            blink_rate_hz: 0.0,
            pupil_base: 0.0,
            pupil_peak: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSpec {
    pub revealing: ConditionEffect,
    pub concealing: ConditionEffect,
    pub faking: ConditionEffect,
    pub participant: ParticipantSpread,
    pub pupil_base: f64,
    /// Per-sample pupil noise (sd).
    pub pupil_noise: f64,
    /// Per-sample gaze jitter during fixations (sd, degrees).
    pub gaze_noise_deg: f64,
    /// Clamp event durations into the filter band so filtering keeps every
    /// generated event.
    pub respect_thresholds: bool,
}

impl EffectSpec {
    /// Identical conditions.
    pub fn null() -> Self {
        EffectSpec {
            revealing: ConditionEffect::default(),
            concealing: ConditionEffect::default(),
            faking: ConditionEffect::default(),
            participant: ParticipantSpread::default(),
            pupil_base: 1000.0,
            pupil_noise: 5.0,
            gaze_noise_deg: 0.05,
            respect_thresholds: true,
        }
    }

    /// Identical conditions and no randomness beyond event timing.
    pub fn noiseless() -> Self {
        let quiet = ConditionEffect {
            pupil_peak_sd: 0.0,
            ..ConditionEffect::default()
        };
        EffectSpec {
            revealing: quiet,
            concealing: quiet,
            faking: quiet,
            participant: ParticipantSpread::none(),
            pupil_noise: 0.0,
            gaze_noise_deg: 0.0,
            ..EffectSpec::null()
        }
    }

    /// Concealing trials carry more saccades and a larger dilation peak.
    pub fn planted() -> Self {
        let mut spec = EffectSpec::null();
        spec.concealing.saccade_rate_hz += 1.2;
        spec.concealing.pupil_peak += 25.0;
        spec
    }

    /// Effect directions reported in the deception literature: concealing
    /// brings fewer blinks, fewer but longer fixations and greater dilation;
    /// faking sits in between.
    pub fn literature() -> Self {
        let mut spec = EffectSpec::null();
        let c = &mut spec.concealing;
        c.blink_rate_hz *= 0.6;
        c.fixation_duration_mean_ms += 40.0;
        c.saccade_rate_hz -= 0.4;
        c.pupil_peak += 15.0;
        let f = &mut spec.faking;
        f.blink_rate_hz *= 0.8;
        f.fixation_duration_mean_ms += 20.0;
        f.pupil_peak += 8.0;
        spec
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "null" => Some(Self::null()),
            "noiseless" => Some(Self::noiseless()),
            "planted" => Some(Self::planted()),
            "literature" => Some(Self::literature()),
            _ => None,
        }
    }

    pub fn effect(&self, label: Label) -> &ConditionEffect {
        match label {
            Label::Revealing => &self.revealing,
            Label::Concealing => &self.concealing,
            Label::Faking => &self.faking,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.revealing.validate("revealing")?;
        self.concealing.validate("concealing")?;
        self.faking.validate("faking")?;
        let p = &self.participant;
        for (field, v) in [
            ("participant.fixation_duration_ms", p.fixation_duration_ms),
            ("participant.saccade_rate_hz", p.saccade_rate_hz),
            ("participant.blink_rate_hz", p.blink_rate_hz),
            ("participant.pupil_base", p.pupil_base),
            ("participant.pupil_peak", p.pupil_peak),
            ("pupil_noise", self.pupil_noise),
            ("gaze_noise_deg", self.gaze_noise_deg),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::InvalidSpec(format!("{field} = {v} must be finite and >= 0")));
            }
        }
        if !(self.pupil_base > 0.0 && self.pupil_base.is_finite()) {
            return Err(SynthError::InvalidSpec("pupil_base must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub spec: EffectSpec,
    pub n_participants: usize,
    pub trials_per_condition: usize,
    pub dataset: DatasetId,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(spec: EffectSpec, n_participants: usize, trials_per_condition: usize, dataset: DatasetId, seed: u64) -> Self {
        SynthConfig {
            spec,
            n_participants,
            trials_per_condition,
            dataset,
            seed,
        }
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.dataset.default_sample_rate_hz()
    }
}

pub fn participant_id(index: usize) -> String {
    format!("P{:03}", index + 1)
}

fn normal<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(mean, sd).expect("sd checked").sample(rng)
    } else {
        mean
    }
}

fn poisson<R: Rng>(rng: &mut R, mean: f64) -> usize {
    if mean > 0.0 {
        Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    }
}

/// Duration rounded to the sample grid and kept inside `[lo, hi]` on that
/// grid.
fn grid_duration(ms: f64, dt: f64, lo: f64, hi: f64) -> f64 {
    let lo = (lo / dt).ceil() * dt;
    let hi = (hi / dt).floor() * dt;
    ((ms / dt).round() * dt).clamp(lo.max(dt), hi.max(lo.max(dt)))
}

struct Offsets {
    fixation_ms: f64,
    saccade_hz: f64,
    blink_hz: f64,
    pupil_base: f64,
    pupil_peak: f64,
}

#[derive(Clone, Copy)]
enum Transient {
    Saccade,
    Blink,
}

/// Pupil dilation after onset: a gamma-shaped bump peaking at `latency`.
pub fn dilation(tau_ms: f64, peak: f64, latency_ms: f64) -> f64 {
    if tau_ms <= 0.0 {
        return 0.0;
    }
    let r = tau_ms / latency_ms;
    peak * r * (1.0 - r).exp()
}

fn generate_trial<R: Rng>(
    cfg: &SynthConfig,
    rng: &mut R,
    pid: &str,
    trial_id: i64,
    label: Label,
    onset: f64,
    offsets: &Offsets,
) -> TrialRecord {
    let spec = &cfg.spec;
    let effect = spec.effect(label);
    let rate = cfg.sample_rate_hz();
    let dt = 1000.0 / f64::from(rate);
    let band = if spec.respect_thresholds {
        EventThresholds::default()
    } else {
        EventThresholds {
            fixation_min_ms: dt,
            fixation_max_ms: TRIAL_MS,
            blink_min_ms: dt,
            blink_max_ms: TRIAL_MS,
            saccade_min_ms: dt,
            saccade_max_ms: TRIAL_MS,
        }
    };

    let secs = TRIAL_MS / 1000.0;
    let n_saccades = poisson(rng, (effect.saccade_rate_hz + offsets.saccade_hz).max(0.0) * secs);
    let n_blinks = poisson(rng, (effect.blink_rate_hz + offsets.blink_hz).max(0.0) * secs);
    let mut transients: Vec<Transient> = std::iter::repeat_n(Transient::Saccade, n_saccades)
        .chain(std::iter::repeat_n(Transient::Blink, n_blinks))
        .collect();
    transients.shuffle(rng);

    let offset = onset + TRIAL_MS;
    let fix_mean = effect.fixation_duration_mean_ms + offsets.fixation_ms;
    let mut events: Vec<OcularEvent> = Vec::new();
    // Gaze position per event: fixations hold one point, saccades move
    // between two, blinks have none.
    let mut positions: Vec<((f64, f64), (f64, f64))> = Vec::new();
    let mut pos = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let mut t = onset;
    let mut queue = transients.into_iter();
    loop {
        let fix = grid_duration(normal(rng, fix_mean, effect.fixation_duration_sd_ms), dt, band.fixation_min_ms, band.fixation_max_ms);
        let next = queue.next();
        let end = match next {
            None => offset,
            Some(_) => (t + fix).min(offset),
        };
        if end - t >= band.fixation_min_ms {
            events.push(OcularEvent::new(EventKind::Fixation, t, end));
            positions.push((pos, pos));
        }
        t = end;
        let Some(kind) = next else { break };
        let (event, to) = match kind {
            Transient::Saccade => {
                let d = grid_duration(
                    normal(rng, effect.saccade_duration_mean_ms, effect.saccade_duration_sd_ms),
                    dt,
                    band.saccade_min_ms,
                    band.saccade_max_ms,
                );
                let amp = normal(rng, effect.saccade_amplitude_mean_deg, effect.saccade_amplitude_sd_deg).max(0.1);
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let mut to = (pos.0 + amp * theta.cos(), pos.1 + amp * theta.sin());
                if to.0.abs() > GAZE_FIELD_DEG || to.1.abs() > GAZE_FIELD_DEG {
                    to = (pos.0 - amp * theta.cos(), pos.1 - amp * theta.sin());
                }
                (OcularEvent::saccade(t, t + d, amp), to)
            }
            Transient::Blink => {
                let d = grid_duration(
                    normal(rng, effect.blink_duration_mean_ms, effect.blink_duration_sd_ms),
                    dt,
                    band.blink_min_ms,
                    band.blink_max_ms,
                );
                (OcularEvent::new(EventKind::Blink, t, t + d), pos)
            }
        };
        // Leave room for a closing fixation.
        if event.end_ms + band.fixation_min_ms > offset {
            // Extend the previous fixation to the end instead.
            match events.last_mut() {
                Some(last) if last.kind == EventKind::Fixation && last.end_ms == t => last.end_ms = offset,
                _ => {
                    events.push(OcularEvent::new(EventKind::Fixation, t, offset));
                    positions.push((pos, pos));
                }
            }
            break;
        }
        t = event.end_ms;
        positions.push((pos, to));
        events.push(event);
        pos = to;
    }
    // Fixations longer than the band (a long tail before offset) are
    // clipped by ending them early and leaving the rest unlabelled.
    for e in &mut events {
        if e.kind == EventKind::Fixation && e.duration_ms() > band.fixation_max_ms {
            e.end_ms = e.start_ms + band.fixation_max_ms;
        }
    }

    let peak = normal(rng, effect.pupil_peak + offsets.pupil_peak, effect.pupil_peak_sd);
    let base = spec.pupil_base + offsets.pupil_base;
    let n_samples = ((TRIAL_MS + BASELINE_MS) / dt).round() as usize + 1;
    let mut samples = Vec::with_capacity(n_samples);
    let mut k = 0;
    let mut gaze_at = positions.first().map_or(pos, |p| p.0);
    for i in 0..n_samples {
        let t = onset - BASELINE_MS + i as f64 * dt;
        while k + 1 < events.len() && t >= events[k].end_ms {
            k += 1;
        }
        let current = events.get(k).filter(|e| t >= e.start_ms && t < e.end_ms);
        let in_blink = current.is_some_and(|e| e.kind == EventKind::Blink);
        if let Some(e) = current {
            let (from, to) = positions[k];
            gaze_at = match e.kind {
                EventKind::Saccade => {
                    let f = (t - e.start_ms) / e.duration_ms();
                    (from.0 + f * (to.0 - from.0), from.1 + f * (to.1 - from.1))
                }
                _ => from,
            };
        }
        let gaze = gaze_at;
        if in_blink {
            samples.push(GazeSample {
                t_ms: t,
                x_deg: None,
                y_deg: None,
                pupil: None,
                on_card: true,
                valid: false,
            });
            continue;
        }
        let jitter = |rng: &mut R| normal(rng, 0.0, spec.gaze_noise_deg);
        let x = gaze.0 + jitter(rng);
        let y = gaze.1 + jitter(rng);
        let pupil = (base + dilation(t - onset, peak, effect.pupil_latency_ms) + normal(rng, 0.0, spec.pupil_noise)).max(MIN_PUPIL);
        samples.push(GazeSample {
            t_ms: t,
            x_deg: Some(round6(x)),
            y_deg: Some(round6(y)),
            pupil: Some(round6(pupil)),
            on_card: true,
            valid: true,
        });
    }

    TrialRecord {
        dataset_id: cfg.dataset,
        participant_id: pid.to_string(),
        trial_id,
        label,
        card_onset_ms: onset,
        card_offset_ms: offset,
        sample_rate_hz: rate,
        samples,
        events,
    }
}

/// Six decimals keep files compact and survive a text round trip exactly.
fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn generate_participant(cfg: &SynthConfig, index: usize) -> Vec<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[index as u64]));
    let spread = &cfg.spec.participant;
    let offsets = Offsets {
        fixation_ms: normal(&mut rng, 0.0, spread.fixation_duration_ms),
        saccade_hz: normal(&mut rng, 0.0, spread.saccade_rate_hz),
        blink_hz: normal(&mut rng, 0.0, spread.blink_rate_hz),
        pupil_base: normal(&mut rng, 0.0, spread.pupil_base),
        pupil_peak: normal(&mut rng, 0.0, spread.pupil_peak),
    };
    let mut labels: Vec<Label> = Label::ALL
        .iter()
        .flat_map(|&l| std::iter::repeat_n(l, cfg.trials_per_condition))
        .collect();
    labels.shuffle(&mut rng);
    let pid = participant_id(index);
    labels
        .into_iter()
        .enumerate()
        .map(|(j, label)| {
            let onset = FIRST_ONSET_MS + j as f64 * (TRIAL_MS + BASELINE_MS + INTER_TRIAL_MS);
            generate_trial(cfg, &mut rng, &pid, j as i64 + 1, label, onset, &offsets)
        })
        .collect()
}

/// All trials, participant by participant in id order.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<TrialRecord>, SynthError> {
    cfg.spec.validate()?;
    if cfg.n_participants < MIN_PARTICIPANTS {
        return Err(SynthError::InvalidSpec(format!(
            "{} participants, at least {MIN_PARTICIPANTS} needed",
            cfg.n_participants
        )));
    }
    if cfg.trials_per_condition == 0 {
        return Err(SynthError::InvalidSpec("trials_per_condition must be at least 1".into()));
    }
    let per: Vec<Vec<TrialRecord>> = (0..cfg.n_participants)
        .into_par_iter()
        .map(|i| generate_participant(cfg, i))
        .collect();
    Ok(per.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub config: SynthConfig,
    pub sample_rate_hz: u32,
    pub trials: usize,
    pub samples: usize,
    pub events: usize,
    pub files: Vec<String>,
}

/// Generates a recording into `dir` (samples.csv, events.csv, trials.csv)
/// and writes manifest.json next to it.
pub fn write_synth(dir: &Path, cfg: &SynthConfig) -> Result<Manifest, SynthError> {
    let trials = generate(cfg)?;
    std::fs::create_dir_all(dir).map_err(|source| SynthError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write_recording(&RecordingFiles::in_dir(dir), &trials)?;
    let manifest = Manifest {
        generator: format!("gazecit-synth {}", env!("CARGO_PKG_VERSION")),
        config: cfg.clone(),
        sample_rate_hz: cfg.sample_rate_hz(),
        trials: trials.len(),
        samples: trials.iter().map(|t| t.samples.len()).sum(),
        events: trials.iter().map(|t| t.events.len()).sum(),
        files: ["samples.csv", "events.csv", "trials.csv"].map(String::from).to_vec(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::filter_events;

    fn small(spec: EffectSpec, dataset: DatasetId) -> SynthConfig {
        SynthConfig::new(spec, 5, 2, dataset, 17)
    }

    #[test]
    fn counts_and_layout() {
        let trials = generate(&small(EffectSpec::null(), DatasetId::NeonLike)).unwrap();
        assert_eq!(trials.len(), 30);
        for t in &trials {
            assert_eq!(t.samples.len(), 1011);
            assert_eq!(t.samples[0].t_ms, t.card_onset_ms - 50.0);
            assert_eq!(t.samples.last().unwrap().t_ms, t.card_offset_ms);
            assert!(t.samples.windows(2).all(|w| w[0].t_ms < w[1].t_ms));
            assert!(t.samples.iter().all(|s| !s.valid || s.pupil.unwrap() > 0.0));
        }
        for l in Label::ALL {
            assert_eq!(trials.iter().filter(|t| t.label == l).count(), 10);
        }
    }

    #[test]
    fn events_tile_the_trial_and_pass_the_filter() {
        for dataset in [DatasetId::EyelinkLike, DatasetId::NeonLike] {
            for t in generate(&small(EffectSpec::planted(), dataset)).unwrap() {
                let e = &t.events;
                assert_eq!(e[0].start_ms, t.card_onset_ms);
                assert!(e.windows(2).all(|w| w[0].end_ms <= w[1].start_ms));
                assert!(e.last().unwrap().end_ms <= t.card_offset_ms);
                assert_eq!(filter_events(e, &EventThresholds::default()).len(), e.len());
            }
        }
    }

    #[test]
    fn blinks_are_invalid_samples() {
        let trials = generate(&small(EffectSpec::null(), DatasetId::EyelinkLike)).unwrap();
        let t = trials.iter().find(|t| t.events.iter().any(|e| e.kind == EventKind::Blink)).unwrap();
        let blinks: Vec<&OcularEvent> = t.events.iter().filter(|e| e.kind == EventKind::Blink).collect();
        for s in &t.samples {
            let inside = blinks.iter().any(|b| s.t_ms >= b.start_ms && s.t_ms < b.end_ms);
            assert_eq!(!s.valid, inside, "t = {}", s.t_ms);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = small(EffectSpec::null(), DatasetId::NeonLike);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 18, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let mut spec = EffectSpec::null();
        spec.faking.blink_rate_hz = -1.0;
        assert!(matches!(generate(&small(spec, DatasetId::NeonLike)), Err(SynthError::InvalidSpec(_))));
        let few = SynthConfig::new(EffectSpec::null(), 4, 2, DatasetId::NeonLike, 1);
        assert!(matches!(generate(&few), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn dilation_peaks_at_latency() {
        assert_eq!(dilation(1000.0, 40.0, 1000.0), 40.0);
        assert!(dilation(500.0, 40.0, 1000.0) < 40.0);
        assert!(dilation(1500.0, 40.0, 1000.0) < 40.0);
        assert_eq!(dilation(0.0, 40.0, 1000.0), 0.0);
    }
}
