//! `gazecit` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 training
//! failure (reports are still written), 4 failed verification.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gazecit::config::{InputSource, RunConfig};
use gazecit::features::{featurize, read_features_csv, write_features_csv, FeatureVector, FeaturizeStats};
use gazecit::harness::{run_condition, ConditionReport, Dataset, HarnessError, SearchSpace, SplitPlan};
use gazecit::ingest::load_recording;
use gazecit::synth::{generate, write_synth};
use gazecit::verify;

const EXIT_INVALID: u8 = 2;
const EXIT_TRAINING: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(name = "gazecit", version, about = "Eye-tracking CIT classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording (samples, events, trials CSVs).
    Synth(Common),
    /// Detect features for every trial and write features.csv.
    Featurize(Common),
    /// Run the nested cross-validation for one condition.
    Run {
        #[command(flatten)]
        common: Common,
        /// Print the participant split and exit without training.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run the built-in oracle checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Golden model fixture to check instead of the built-in one.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Summarise one or more report.json files.
    Report {
        #[command(flatten)]
        common: Common,
        /// Report files; defaults to report.json in the output directory.
        reports: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// binary or three_class.
    #[arg(long)]
    task: Option<String>,
    /// all, eye or pupil.
    #[arg(long)]
    group: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, e.g. `--set search_n=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(Failure::invalid)?,
            None => RunConfig::default(),
        };
        let mut flags: Vec<(String, String)> = Vec::new();
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Failure::invalid(format!("--set expects KEY=VALUE, got `{o}`")))?;
            flags.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(s) = self.seed {
            flags.push(("seed".into(), s.to_string()));
        }
        if let Some(t) = &self.task {
            flags.push(("task".into(), t.clone()));
        }
        if let Some(g) = &self.group {
            flags.push(("feature_group".into(), g.clone()));
        }
        for (k, v) in flags {
            cfg.set(&k, &v).map_err(|e| Failure::invalid(format!("command line: {e}")))?;
        }
        // Paths given on the command line are taken as they are.
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate().map_err(Failure::invalid)?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg
        .out
        .clone()
        .ok_or_else(|| Failure::invalid("no output directory: pass --out or set `out`"))?;
    fs::create_dir_all(&dir).map_err(|e| Failure::invalid(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
}

/// Feature vectors from whichever input the config names.
fn load_vectors(cfg: &RunConfig) -> Result<(Vec<FeatureVector>, Option<FeaturizeStats>), Failure> {
    let trials = match cfg.input().map_err(Failure::invalid)? {
        InputSource::Features(path) => {
            let f = fs::File::open(&path).map_err(|e| Failure::invalid(format!("cannot open {}: {e}", path.display())))?;
            let vectors = read_features_csv(f).map_err(Failure::invalid)?;
            return Ok((vectors, None));
        }
        InputSource::Recording(files) => {
            let rec = load_recording(&files).map_err(Failure::invalid)?;
            if rec.discarded_samples > 0 {
                log::warn!("{} samples discarded during ingest", rec.discarded_samples);
            }
            rec.trials
        }
        InputSource::Synth(synth) => generate(&synth).map_err(Failure::invalid)?,
    };
    let (vectors, stats) = featurize(&trials, &cfg.featurize);
    Ok((vectors, Some(stats)))
}

fn cmd_synth(common: &Common) -> CmdResult {
    let cfg = common.resolve()?;
    let synth = cfg.synth_config().map_err(Failure::invalid)?;
    let dir = out_dir(&cfg)?;
    let manifest = write_synth(&dir, &synth).map_err(Failure::invalid)?;
    println!(
        "wrote {} trials for {} participants to {}",
        manifest.trials,
        synth.n_participants,
        dir.display()
    );
    Ok(())
}

fn print_feature_summary(vectors: &[FeatureVector], stats: Option<&FeaturizeStats>) {
    let mut participants: Vec<&str> = vectors.iter().map(|v| v.participant_id.as_str()).collect();
    participants.sort_unstable();
    participants.dedup();
    println!("rows: {}", vectors.len());
    println!("participants: {}", participants.len());
    let names = gazecit::features::feature_names();
    let mut missing = vec![0usize; names.len()];
    for v in vectors {
        for (m, x) in missing.iter_mut().zip(&v.values) {
            *m += usize::from(x.is_none());
        }
    }
    let total: usize = missing.iter().sum();
    let cells = vectors.len() * names.len();
    println!(
        "missing cells: {total} of {cells} ({:.2}%)",
        if cells == 0 { 0.0 } else { 100.0 * total as f64 / cells as f64 }
    );
    for (name, m) in names.iter().zip(&missing) {
        if *m > 0 {
            println!("  {name}: {m}");
        }
    }
    if let Some(s) = stats {
        println!(
            "events dropped: {}; gaps filled: {}; outlier bins removed: {}; empty baselines: {}",
            s.events_dropped, s.filled_gaps, s.outliers_removed, s.empty_baselines
        );
    }
}

fn cmd_featurize(common: &Common) -> CmdResult {
    let cfg = common.resolve()?;
    let (vectors, stats) = load_vectors(&cfg)?;
    let dir = out_dir(&cfg)?;
    let mut buf = Vec::new();
    write_features_csv(&mut buf, &vectors).map_err(Failure::invalid)?;
    let path = dir.join("features.csv");
    fs::write(&path, buf).map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))?;
    print_feature_summary(&vectors, stats.as_ref());
    println!("wrote {}", path.display());
    Ok(())
}

fn print_plan(plan: &SplitPlan) {
    println!("split plan (seed {}, attempt {})", plan.seed, plan.attempt);
    for rep in &plan.replications {
        println!("replication {}", rep.fold);
        println!("  test: {}", rep.test.join(" "));
        println!("  early_stop: {}", rep.early_stop.join(" "));
        for (i, fold) in rep.inner.iter().enumerate() {
            println!("  inner {i}: {}", fold.join(" "));
        }
    }
}

fn harness_failure(e: HarnessError) -> Failure {
    let code = match e {
        HarnessError::Training(_) | HarnessError::Explain(_) => EXIT_TRAINING,
        _ => EXIT_INVALID,
    };
    Failure {
        code,
        message: e.to_string(),
    }
}

fn cmd_run(common: &Common, dry_run: bool) -> CmdResult {
    let cfg = common.resolve()?;
    let spec = cfg.task_spec();
    let (vectors, _) = load_vectors(&cfg)?;
    if dry_run {
        let data = Dataset::from_features(&vectors, spec.task, spec.group).map_err(harness_failure)?;
        let plan = SplitPlan::for_dataset(&data, spec.seed).map_err(harness_failure)?;
        print_plan(&plan);
        return Ok(());
    }
    let dir = out_dir(&cfg)?;
    let run = run_condition(&vectors, &spec, &SearchSpace::default(), cfg.search_n).map_err(harness_failure)?;
    write_file(&dir.join("report.json"), &run.report.to_json())?;
    write_file(&dir.join("importance.json"), &run.importance.to_json())?;
    print_report(&run.report);
    let failed = run.report.failed();
    if failed > 0 {
        return Err(Failure {
            code: EXIT_TRAINING,
            message: format!("{failed} of {} replications failed", run.report.replications.len()),
        });
    }
    Ok(())
}

fn cmd_verify(common: &Common, golden: Option<&Path>) -> CmdResult {
    let cfg = common.resolve()?;
    let text = match golden.map(Path::to_path_buf).or(cfg.golden_model.clone()) {
        Some(p) => fs::read_to_string(&p).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", p.display())))?,
        None => verify::GOLDEN_MODEL.to_string(),
    };
    let results = verify::run_all(cfg.seed, &text);
    for r in &results {
        println!("{}", r.line());
    }
    let failing: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: format!("failing checks: {}", failing.join(", ")),
        })
    }
}

fn fmt3(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3}")
    } else {
        "n/a".into()
    }
}

fn print_report(r: &ConditionReport) {
    let top: Vec<String> = r.top_features.iter().map(|o| format!("{} ({})", o.feature, o.count)).collect();
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{} / {} / {}: baseline {}, accuracy {} ({}), {} final models, {} participants, {} features",
        r.dataset,
        r.task.as_str(),
        r.feature_group.as_str(),
        fmt3(r.baseline),
        fmt3(r.mean_accuracy),
        fmt3(r.std_accuracy),
        r.final_models,
        r.n_participants,
        r.n_features
    );
    let _ = writeln!(out, "  top features: {}", if top.is_empty() { "none".into() } else { top.join(", ") });
    if r.audit.violations > 0 {
        let _ = writeln!(out, "  participant overlap violations: {}", r.audit.violations);
    }
}

fn cmd_report(common: &Common, reports: &[PathBuf]) -> CmdResult {
    let paths = if reports.is_empty() {
        let cfg = common.resolve()?;
        let dir = cfg
            .out
            .ok_or_else(|| Failure::invalid("no report given: pass report files or --out"))?;
        vec![dir.join("report.json")]
    } else {
        reports.to_vec()
    };
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", p.display())))?;
        let report: ConditionReport =
            serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", p.display())))?;
        print_report(&report);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(c) => cmd_synth(c),
        Command::Featurize(c) => cmd_featurize(c),
        Command::Run { common, dry_run } => cmd_run(common, *dry_run),
        Command::Verify { common, golden } => cmd_verify(common, golden.as_deref()),
        Command::Report { common, reports } => cmd_report(common, reports),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gazecit::gbdt::GbdtError;

    #[test]
    fn training_errors_map_to_exit_3() {
        assert_eq!(harness_failure(HarnessError::Training(GbdtError::SingleClassTrain)).code, EXIT_TRAINING);
        assert_eq!(harness_failure(HarnessError::ClassCoverage(100)).code, EXIT_INVALID);
        assert_eq!(harness_failure(HarnessError::TooFewParticipants { have: 3, need: 5 }).code, EXIT_INVALID);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
