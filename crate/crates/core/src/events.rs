//! Artifact rejection for ocular events and a velocity-threshold detector
//! for recordings that come without an event stream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{EventKind, GazeSample, OcularEvent};

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("need at least 2 valid samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
}

/// Duration bands (milliseconds) outside of which events are treated as
/// artifacts. Boundary values are kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventThresholds {
    pub fixation_min_ms: f64,
    pub fixation_max_ms: f64,
    pub blink_min_ms: f64,
    pub blink_max_ms: f64,
    pub saccade_min_ms: f64,
    pub saccade_max_ms: f64,
}

impl Default for EventThresholds {
    fn default() -> Self {
        EventThresholds {
            fixation_min_ms: 60.0,
            fixation_max_ms: 5000.0,
            blink_min_ms: 60.0,
            blink_max_ms: 700.0,
            saccade_min_ms: 15.0,
            saccade_max_ms: 400.0,
        }
    }
}

impl EventThresholds {
    pub fn validate(&self) -> Result<(), EventError> {
        for (name, lo, hi) in [
            ("fixation", self.fixation_min_ms, self.fixation_max_ms),
            ("blink", self.blink_min_ms, self.blink_max_ms),
            ("saccade", self.saccade_min_ms, self.saccade_max_ms),
        ] {
            if !(lo > 0.0 && hi > 0.0) {
                return Err(EventError::InvalidThresholds(format!(
                    "{name} bounds must be positive"
                )));
            }
            if lo >= hi {
                return Err(EventError::InvalidThresholds(format!(
                    "{name} minimum {lo} must be below maximum {hi}"
                )));
            }
        }
        Ok(())
    }

    pub fn band(&self, kind: EventKind) -> (f64, f64) {
        match kind {
            EventKind::Fixation => (self.fixation_min_ms, self.fixation_max_ms),
            EventKind::Blink => (self.blink_min_ms, self.blink_max_ms),
            EventKind::Saccade => (self.saccade_min_ms, self.saccade_max_ms),
        }
    }

    pub fn accepts(&self, event: &OcularEvent) -> bool {
        let (lo, hi) = self.band(event.kind);
        let d = event.duration_ms();
        d >= lo && d <= hi
    }
}

/// Keeps the events whose duration lies within the band for their kind.
pub fn filter_events(events: &[OcularEvent], th: &EventThresholds) -> Vec<OcularEvent> {
    events.iter().filter(|e| th.accepts(e)).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvtParams {
    pub velocity_threshold_deg_s: f64,
    pub blink_gap_ms: f64,
}

impl Default for IvtParams {
    fn default() -> Self {
        IvtParams {
            velocity_threshold_deg_s: 30.0,
            blink_gap_ms: 75.0,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Motion {
    Still,
    Moving,
}

struct Run {
    motion: Motion,
    start: usize,
    end: usize,
}

/// Velocity-threshold (I-VT) segmentation of a sorted sample sequence.
///
/// Velocity is measured between consecutive valid samples. Runs of fast
/// intervals become saccades, runs of slow intervals fixations. Adjacent
/// events share their boundary sample. Runs of invalid samples lasting at
/// least `blink_gap_ms` become blinks and split the surrounding runs;
/// shorter dropouts are bridged.
pub fn detect_events_ivt(
    samples: &[GazeSample],
    sample_rate_hz: u32,
    params: &IvtParams,
) -> Result<Vec<OcularEvent>, EventError> {
    let usable = |s: &GazeSample| s.valid && s.x_deg.is_some() && s.y_deg.is_some();
    let n_valid = samples.iter().filter(|s| usable(s)).count();
    if n_valid < 2 {
        return Err(EventError::TooFewSamples(n_valid));
    }
    let dt = 1000.0 / f64::from(sample_rate_hz.max(1));

    let mut events = Vec::new();
    let mut runs: Vec<Run> = Vec::new();
    let mut prev_valid: Option<usize> = None;
    let mut i = 0;
    let flush = |runs: &mut Vec<Run>, events: &mut Vec<OcularEvent>| {
        for r in runs.drain(..) {
            let (a, b) = (&samples[r.start], &samples[r.end]);
            match r.motion {
                Motion::Still => {
                    events.push(OcularEvent::new(EventKind::Fixation, a.t_ms, b.t_ms));
                }
                Motion::Moving => {
                    let dx = b.x_deg.unwrap_or(0.0) - a.x_deg.unwrap_or(0.0);
                    let dy = b.y_deg.unwrap_or(0.0) - a.y_deg.unwrap_or(0.0);
                    events.push(OcularEvent::saccade(a.t_ms, b.t_ms, dx.hypot(dy)));
                }
            }
        }
    };

    while i < samples.len() {
        if !usable(&samples[i]) {
            let gap_start = i;
            while i < samples.len() && !usable(&samples[i]) {
                i += 1;
            }
            let start_t = samples[gap_start].t_ms;
            let end_t = if i < samples.len() {
                samples[i].t_ms
            } else {
                samples[i - 1].t_ms + dt
            };
            if end_t - start_t >= params.blink_gap_ms {
                flush(&mut runs, &mut events);
                events.push(OcularEvent::new(EventKind::Blink, start_t, end_t));
                prev_valid = None;
            }
            continue;
        }
        if let Some(p) = prev_valid {
            let (a, b) = (&samples[p], &samples[i]);
            let dist = (b.x_deg.unwrap() - a.x_deg.unwrap()).hypot(b.y_deg.unwrap() - a.y_deg.unwrap());
            let span = b.t_ms - a.t_ms;
            let velocity = if span > 0.0 { dist / span * 1000.0 } else { 0.0 };
            let motion = if velocity > params.velocity_threshold_deg_s {
                Motion::Moving
            } else {
                Motion::Still
            };
            match runs.last_mut() {
                Some(r) if r.motion == motion && r.end == p => r.end = i,
                _ => runs.push(Run {
                    motion,
                    start: p,
                    end: i,
                }),
            }
        }
        prev_valid = Some(i);
        i += 1;
    }
    flush(&mut runs, &mut events);
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(kind: EventKind, d: f64) -> OcularEvent {
        match kind {
            EventKind::Saccade => OcularEvent::saccade(0.0, d, 1.0),
            _ => OcularEvent::new(kind, 0.0, d),
        }
    }

    #[test]
    fn fixation_boundaries() {
        let th = EventThresholds::default();
        assert!(!th.accepts(&ev(EventKind::Fixation, 59.0)));
        assert!(th.accepts(&ev(EventKind::Fixation, 60.0)));
        assert!(th.accepts(&ev(EventKind::Fixation, 5000.0)));
        assert!(!th.accepts(&ev(EventKind::Fixation, 5200.0)));
    }

    #[test]
    fn saccade_boundaries() {
        let th = EventThresholds::default();
        assert!(th.accepts(&ev(EventKind::Saccade, 400.0)));
        assert!(!th.accepts(&ev(EventKind::Saccade, 401.0)));
        assert!(th.accepts(&ev(EventKind::Saccade, 15.0)));
        assert!(!th.accepts(&ev(EventKind::Saccade, 14.0)));
    }

    #[test]
    fn blink_boundaries() {
        let th = EventThresholds::default();
        assert!(!th.accepts(&ev(EventKind::Blink, 59.9)));
        assert!(th.accepts(&ev(EventKind::Blink, 700.0)));
        assert!(!th.accepts(&ev(EventKind::Blink, 700.5)));
    }

    #[test]
    fn filter_keeps_order() {
        let events = vec![
            ev(EventKind::Fixation, 200.0),
            ev(EventKind::Fixation, 10.0),
            ev(EventKind::Saccade, 30.0),
            ev(EventKind::Blink, 100.0),
        ];
        let kept = filter_events(&events, &EventThresholds::default());
        assert_eq!(kept, vec![events[0].clone(), events[2].clone(), events[3].clone()]);
    }

    #[test]
    fn threshold_validation() {
        assert!(EventThresholds::default().validate().is_ok());
        let bad = EventThresholds {
            blink_min_ms: 800.0,
            ..EventThresholds::default()
        };
        assert!(bad.validate().is_err());
    }

    fn sample(t: f64, x: f64) -> GazeSample {
        GazeSample {
            t_ms: t,
            x_deg: Some(x),
            y_deg: Some(0.0),
            pupil: Some(1000.0),
            on_card: true,
            valid: true,
        }
    }

    fn invalid(t: f64) -> GazeSample {
        GazeSample {
            t_ms: t,
            x_deg: None,
            y_deg: None,
            pupil: None,
            on_card: true,
            valid: false,
        }
    }

    #[test]
    fn still_gaze_is_one_fixation() {
        let samples: Vec<_> = (0..=500).map(|t| sample(f64::from(t), 1.0)).collect();
        let events = detect_events_ivt(&samples, 1000, &IvtParams::default()).unwrap();
        assert_eq!(events, vec![OcularEvent::new(EventKind::Fixation, 0.0, 500.0)]);
    }

    #[test]
    fn jump_between_still_segments() {
        // 5 degrees in 20 ms: 250 deg/s during the jump.
        let samples: Vec<_> = (0..=300)
            .map(|t| {
                let x = match t {
                    0..=100 => 0.0,
                    101..=119 => 5.0 * f64::from(t - 100) / 20.0,
                    _ => 5.0,
                };
                sample(f64::from(t), x)
            })
            .collect();
        let events = detect_events_ivt(&samples, 1000, &IvtParams::default()).unwrap();
        assert_eq!(events.len(), 3);
        assert_eq!(events[0], OcularEvent::new(EventKind::Fixation, 0.0, 100.0));
        assert_eq!(events[1].kind, EventKind::Saccade);
        assert_eq!((events[1].start_ms, events[1].end_ms), (100.0, 120.0));
        assert!((events[1].amplitude_deg.unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(events[2], OcularEvent::new(EventKind::Fixation, 120.0, 300.0));
    }

    #[test]
    fn invalid_block_is_a_blink() {
        let samples: Vec<_> = (0..400)
            .map(|t| {
                if (100..200).contains(&t) {
                    invalid(f64::from(t))
                } else {
                    sample(f64::from(t), 0.0)
                }
            })
            .collect();
        let events = detect_events_ivt(&samples, 1000, &IvtParams::default()).unwrap();
        let blinks: Vec<_> = events.iter().filter(|e| e.kind == EventKind::Blink).collect();
        assert_eq!(blinks.len(), 1);
        assert_eq!(blinks[0].duration_ms(), 100.0);
        assert_eq!(events.len(), 3);
    }

    #[test]
    fn short_dropout_is_bridged() {
        let samples: Vec<_> = (0..400)
            .map(|t| {
                if (100..120).contains(&t) {
                    invalid(f64::from(t))
                } else {
                    sample(f64::from(t), 0.0)
                }
            })
            .collect();
        let events = detect_events_ivt(&samples, 1000, &IvtParams::default()).unwrap();
        assert_eq!(events, vec![OcularEvent::new(EventKind::Fixation, 0.0, 399.0)]);
    }

    #[test]
    fn too_few_samples() {
        let err = detect_events_ivt(&[sample(0.0, 0.0), invalid(1.0)], 1000, &IvtParams::default())
            .unwrap_err();
        assert_eq!(err, EventError::TooFewSamples(1));
    }

    fn arb_event() -> impl Strategy<Value = OcularEvent> {
        (0..3u8, 0.5f64..6000.0).prop_map(|(k, d)| match k {
            0 => OcularEvent::new(EventKind::Fixation, 10.0, 10.0 + d),
            1 => OcularEvent::new(EventKind::Blink, 10.0, 10.0 + d),
            _ => OcularEvent::saccade(10.0, 10.0 + d, 2.0),
        })
    }

    proptest! {
        #[test]
        fn filter_is_idempotent_subset(events in prop::collection::vec(arb_event(), 0..40)) {
            let th = EventThresholds::default();
            let once = filter_events(&events, &th);
            let twice = filter_events(&once, &th);
            prop_assert_eq!(&once, &twice);
            for kind in [EventKind::Fixation, EventKind::Saccade, EventKind::Blink] {
                let before = events.iter().filter(|e| e.kind == kind).count();
                let after = once.iter().filter(|e| e.kind == kind).count();
                prop_assert!(after <= before);
            }
            prop_assert!(once.iter().all(|e| events.contains(e)));
        }
    }
}
