//! Run configuration: a `key = value` text file with `#` comments.
//!
//! ```text
//! task = binary
//! feature_group = pupil
//! dataset = neon
//! seed = 7
//! search_n = 10
//! synth.preset = planted
//! synth.participants = 36
//! out = runs/planted
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! Command-line flags are applied afterwards through [`RunConfig::set`].

use std::path::{Path, PathBuf};

use crate::features::{FeatureGroup, FeaturizeConfig};
use crate::harness::{Task, TaskSpec, DEFAULT_SEARCH_N};
use crate::ingest::{DatasetId, RecordingFiles};
use crate::synth::{EffectSpec, SynthConfig};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SYNTH_PARTICIPANTS: usize = 36;
pub const DEFAULT_SYNTH_TRIALS: usize = 18;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}:{line}: {message}")]
    Line { origin: String, line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Where the trials of a run come from.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    Recording(RecordingFiles),
    Features(PathBuf),
    Synth(SynthConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub feature_group: FeatureGroup,
    pub dataset: DatasetId,
    pub seed: u64,
    pub search_n: usize,
    pub featurize: FeaturizeConfig,
    pub out: Option<PathBuf>,
    pub golden_model: Option<PathBuf>,
    input_dir: Option<PathBuf>,
    samples: Option<PathBuf>,
    events: Option<PathBuf>,
    trials: Option<PathBuf>,
    features: Option<PathBuf>,
    synth_preset: Option<String>,
    synth_participants: usize,
    synth_trials: usize,
    base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Binary,
            feature_group: FeatureGroup::All,
            dataset: DatasetId::NeonLike,
            seed: DEFAULT_SEED,
            search_n: DEFAULT_SEARCH_N,
            featurize: FeaturizeConfig::default(),
            out: None,
            golden_model: None,
            input_dir: None,
            samples: None,
            events: None,
            trials: None,
            features: None,
            synth_preset: None,
            synth_participants: DEFAULT_SYNTH_PARTICIPANTS,
            synth_trials: DEFAULT_SYNTH_TRIALS,
            base_dir: PathBuf::new(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| format!("invalid value `{value}` for `{key}`: {e}"))
}

impl RunConfig {
    /// Parses config text. `origin` names the source in error messages and
    /// `base_dir` anchors relative paths.
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig {
            base_dir: base_dir.to_path_buf(),
            ..RunConfig::default()
        };
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| ConfigError::Line {
                origin: origin.to_string(),
                line: i + 1,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            seen.push(key.to_string());
            cfg.set(key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    fn path(&self, value: &str) -> PathBuf {
        let p = PathBuf::from(value);
        if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        }
    }

    /// Sets one key. Used for file lines and command-line overrides alike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let th = &mut self.featurize.thresholds;
        let pupil = &mut self.featurize.pupil;
        match key {
            "task" => self.task = parse_value(key, value)?,
            "feature_group" => self.feature_group = parse_value(key, value)?,
            "dataset" => self.dataset = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "search_n" => {
                self.search_n = parse_value(key, value)?;
                if self.search_n == 0 {
                    return Err("`search_n` must be at least 1".into());
                }
            }
            "out" => self.out = Some(self.path(value)),
            "golden_model" => self.golden_model = Some(self.path(value)),
            "input.dir" => self.input_dir = Some(self.path(value)),
            "input.samples" => self.samples = Some(self.path(value)),
            "input.events" => self.events = Some(self.path(value)),
            "input.trials" => self.trials = Some(self.path(value)),
            "input.features" => self.features = Some(self.path(value)),
            "synth.preset" => {
                if EffectSpec::preset(value).is_none() {
                    return Err(format!("unknown synth preset `{value}`"));
                }
                self.synth_preset = Some(value.to_string());
            }
            "synth.participants" => self.synth_participants = parse_value(key, value)?,
            "synth.trials_per_condition" => self.synth_trials = parse_value(key, value)?,
            "thresholds.fixation_min_ms" => th.fixation_min_ms = parse_value(key, value)?,
            "thresholds.fixation_max_ms" => th.fixation_max_ms = parse_value(key, value)?,
            "thresholds.blink_min_ms" => th.blink_min_ms = parse_value(key, value)?,
            "thresholds.blink_max_ms" => th.blink_max_ms = parse_value(key, value)?,
            "thresholds.saccade_min_ms" => th.saccade_min_ms = parse_value(key, value)?,
            "thresholds.saccade_max_ms" => th.saccade_max_ms = parse_value(key, value)?,
            "pupil.interpolate" => pupil.interpolate = parse_value(key, value)?,
            "pupil.baseline_mode" => pupil.baseline_mode = parse_value(key, value)?,
            "pupil.z_threshold" => {
                pupil.z_threshold = parse_value(key, value)?;
                if !(pupil.z_threshold > 0.0) {
                    return Err("`pupil.z_threshold` must be positive".into());
                }
            }
            "features.duration_mode" => self.featurize.duration_mode = parse_value(key, value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn task_spec(&self) -> TaskSpec {
        TaskSpec {
            task: self.task,
            group: self.feature_group,
            dataset: self.dataset,
            seed: self.seed,
        }
    }

    pub fn synth_config(&self) -> Result<SynthConfig, ConfigError> {
        let name = self.synth_preset.as_deref().unwrap_or("null");
        let spec = EffectSpec::preset(name).ok_or_else(|| ConfigError::Invalid(format!("unknown synth preset `{name}`")))?;
        Ok(SynthConfig::new(spec, self.synth_participants, self.synth_trials, self.dataset, self.seed))
    }

    /// The single configured input source.
    pub fn input(&self) -> Result<InputSource, ConfigError> {
        let explicit = self.samples.is_some() || self.events.is_some() || self.trials.is_some();
        let sources = [
            self.input_dir.is_some(),
            explicit,
            self.features.is_some(),
            self.synth_preset.is_some(),
        ];
        match sources.iter().filter(|&&s| s).count() {
            0 => return Err(ConfigError::Invalid(
                "no input: set one of `input.dir`, `input.samples`/`input.events`/`input.trials`, `input.features` or `synth.preset`".into(),
            )),
            1 => {}
            _ => return Err(ConfigError::Invalid("more than one input source configured".into())),
        }
        if let Some(dir) = &self.input_dir {
            return Ok(InputSource::Recording(RecordingFiles::in_dir(dir)));
        }
        if explicit {
            let need = |p: &Option<PathBuf>, key: &str| {
                p.clone()
                    .ok_or_else(|| ConfigError::Invalid(format!("`{key}` is required with explicit input files")))
            };
            return Ok(InputSource::Recording(RecordingFiles {
                samples: need(&self.samples, "input.samples")?,
                events: need(&self.events, "input.events")?,
                trials: need(&self.trials, "input.trials")?,
            }));
        }
        if let Some(f) = &self.features {
            return Ok(InputSource::Features(f.clone()));
        }
        Ok(InputSource::Synth(self.synth_config()?))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.featurize
            .thresholds
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(s) = &self.synth_preset {
            let cfg = self.synth_config()?;
            cfg.spec.validate().map_err(|e| ConfigError::Invalid(format!("synth preset `{s}`: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pupil::BaselineMode;

    #[test]
    fn parses_keys_and_comments() {
        let text = "# run\ntask = three_class\nfeature_group = pupil # trailing\n\nseed=9\nsearch_n = 10\npupil.baseline_mode = divisive\nthresholds.blink_max_ms = 500\nsynth.preset = planted\nout = res\n";
        let cfg = RunConfig::parse(text, "run.cfg", Path::new("/base")).unwrap();
        assert_eq!(cfg.task, Task::ThreeClass);
        assert_eq!(cfg.feature_group, FeatureGroup::Pupil);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.search_n, 10);
        assert_eq!(cfg.featurize.pupil.baseline_mode, BaselineMode::Divisive);
        assert_eq!(cfg.featurize.thresholds.blink_max_ms, 500.0);
        assert_eq!(cfg.out, Some(PathBuf::from("/base/res")));
        assert!(matches!(cfg.input().unwrap(), InputSource::Synth(_)));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("task = binary\n\ngroup = eye\n", "a.cfg", Path::new("")).unwrap_err();
        assert_eq!(err.to_string(), "a.cfg:3: unknown key `group`");
        let err = RunConfig::parse("seed = x", "a.cfg", Path::new("")).unwrap_err();
        assert!(err.to_string().starts_with("a.cfg:1: invalid value `x` for `seed`"));
        let err = RunConfig::parse("seed = 1\nseed = 2", "a.cfg", Path::new("")).unwrap_err();
        assert!(err.to_string().contains(":2: duplicate key"));
        assert!(RunConfig::parse("just words", "a.cfg", Path::new("")).is_err());
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut cfg = RunConfig::parse("seed = 1\ntask = binary", "a", Path::new("")).unwrap();
        cfg.set("seed", "5").unwrap();
        cfg.set("task", "three_class").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.task, Task::ThreeClass);
    }

    #[test]
    fn exactly_one_input_source() {
        let none = RunConfig::default();
        assert!(none.input().is_err());
        let two = RunConfig::parse("synth.preset = null\ninput.features = f.csv", "a", Path::new("")).unwrap();
        assert!(two.input().is_err());
        let partial = RunConfig::parse("input.samples = s.csv", "a", Path::new("")).unwrap();
        assert!(partial.input().is_err());
        let dir = RunConfig::parse("input.dir = data", "a", Path::new("/x")).unwrap();
        match dir.input().unwrap() {
            InputSource::Recording(f) => assert_eq!(f.trials, PathBuf::from("/x/data/trials.csv")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inverted_thresholds_fail_validation() {
        let cfg = RunConfig::parse("thresholds.saccade_min_ms = 500", "a", Path::new("")).unwrap();
        assert!(cfg.validate().is_err());
    }
}
