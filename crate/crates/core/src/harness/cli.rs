//! Command line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use super::{
    build_environment, derive_seed, generate_training_data, run_sweep, split_seed, train_classifier,
    training_seed, write_summary_csv, HarnessError, ScenarioConfig, SweepSpec,
};
use crate::feedback::{read_examples_csv, write_examples_csv};
use crate::learn::{ClassifierModel, Dataset};
use crate::metrics::write_trial_csv;
use crate::protocol::{run_trial_traced, SchemeConfig, TrialError};

#[derive(Debug, Parser)]
#[command(name = "ncml", version, about = "Broadcast retransmission simulator with learned feedback")]
pub struct Cli {
    /// Scenario file (key = value lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the config's base_seed.
    #[arg(long, global = true, env = "NCML_SEED")]
    pub seed: Option<u64>,
    /// Output file; most commands fall back to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a labeled feedback training set as CSV.
    GenData {
        /// Number of clean examples (default: train_size).
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train every configured family, keep the best and save it.
    Train {
        /// Training CSV; generated from the scenario when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the configured sweep and write the summary CSV.
    Sweep {
        /// Use this model for ML schemes at every point instead of retraining.
        #[arg(long)]
        global_model: Option<PathBuf>,
        /// Also write one row per trial.
        #[arg(long)]
        trials_out: Option<PathBuf>,
    },
    /// Run one traced trial per configured scheme.
    Trial {
        /// Model for ML schemes; trained from the scenario when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> HarnessError {
    let context = context.into();
    move |source| HarnessError::Io { context, source }
}

fn create(path: &Path) -> Result<File, HarnessError> {
    File::create(path).map_err(io_err(format!("cannot create {}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, HarnessError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(io_err(format!("cannot open {}", path.display())))
}

fn load_model(path: &Path) -> Result<Arc<ClassifierModel>, HarnessError> {
    Ok(Arc::new(ClassifierModel::load(open(path)?)?))
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::from_path(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    Ok(cfg)
}

/// Writes `bytes` to `--out` when given, else to stdout.
fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), HarnessError> {
    match out {
        Some(path) => create(path)?
            .write_all(bytes)
            .map_err(io_err(format!("cannot write {}", path.display()))),
        None => stdout.write_all(bytes).map_err(io_err("stdout")),
    }
}

fn gen_data(cli: &Cli, cfg: &ScenarioConfig, size: Option<usize>, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let size = size.unwrap_or(cfg.train_size);
    let data = generate_training_data(cfg, size, cfg.base_seed)?;
    let mut buf = Vec::new();
    write_examples_csv(&mut buf, &data.dataset.examples)?;
    emit(&cli.out, stdout, &buf)?;
    if let Some(path) = &cli.out {
        writeln!(
            stdout,
            "wrote {} examples from {} feedback signals to {}",
            data.dataset.len(),
            data.raw_observations,
            path.display()
        )
        .map_err(io_err("stdout"))?;
    }
    Ok(())
}

fn train(cli: &Cli, cfg: &ScenarioConfig, data: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| HarnessError::Usage("train needs --out <model file>".into()))?;
    let dataset = match data {
        Some(path) => Dataset::new(read_examples_csv(open(path)?)?),
        None => generate_training_data(cfg, cfg.train_size, training_seed(cfg.base_seed, 0))?.dataset,
    };
    let selection = train_classifier(cfg, &dataset, split_seed(cfg.base_seed, 0))?;
    let mut text = String::new();
    for m in &selection.candidates {
        let names: Vec<&str> = m
            .selected_features
            .iter()
            .map(|&f| crate::feedback::FEATURE_NAMES[f])
            .collect();
        text.push_str(&format!(
            "family={} features={} validation_accuracy={:.4}\n",
            m.family,
            names.join(","),
            m.validation_accuracy
        ));
    }
    for (family, e) in &selection.failures {
        text.push_str(&format!("family={family} failed: {e}\n"));
    }
    text.push_str(&format!(
        "selected={} validation_accuracy={:.4}\n",
        selection.best.family, selection.best.validation_accuracy
    ));
    stdout.write_all(text.as_bytes()).map_err(io_err("stdout"))?;
    selection.best.save(create(out)?)?;
    Ok(())
}

fn sweep(
    cli: &Cli,
    cfg: &ScenarioConfig,
    global_model: &Option<PathBuf>,
    trials_out: &Option<PathBuf>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), HarnessError> {
    let spec = SweepSpec::from_config(cfg)?;
    let model = global_model.as_deref().map(load_model).transpose()?;
    let outcome = run_sweep(cfg, &spec, model)?;
    for row in outcome.rows.iter().filter(|r| r.flagged) {
        // Diagnostics only; a failed stderr write is not worth failing the run.
        let _ = writeln!(
            stderr,
            "warning: {} at {}={} aborted {} trials",
            row.scheme, row.axis, row.value, row.aborted_count
        );
    }
    let mut buf = Vec::new();
    write_summary_csv(&mut buf, &outcome.rows)?;
    emit(&cli.out, stdout, &buf)?;
    if let Some(path) = trials_out {
        write_trial_csv(create(path)?, &outcome.records)?;
    }
    Ok(())
}

fn trial(cli: &Cli, cfg: &ScenarioConfig, model: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let spec = SweepSpec::from_config(cfg)?;
    let env = build_environment(cfg)?;
    let classifier = if spec.schemes.iter().any(|s| s.uses_classifier()) {
        Some(match model {
            Some(path) => load_model(path)?,
            None => {
                let data = generate_training_data(cfg, cfg.train_size, training_seed(cfg.base_seed, 0))?;
                Arc::new(train_classifier(cfg, &data.dataset, split_seed(cfg.base_seed, 0))?.best)
            }
        })
    } else {
        None
    };
    let seed = derive_seed(cfg.base_seed, 0);
    let mut text = String::new();
    for &scheme in &spec.schemes {
        let scheme_cfg = SchemeConfig {
            scheme,
            classifier: classifier.clone().filter(|_| scheme.uses_classifier()),
            policy: cfg.ml_policy,
            receivers: cfg.receivers,
            packets: cfg.packets,
            payload_bytes: cfg.payload_bytes,
            max_transmissions: cfg.max_transmissions,
        };
        text.push_str(&format!("# scheme={scheme} seed={seed}\n"));
        match run_trial_traced(&scheme_cfg, &env, seed) {
            Ok((record, events)) => {
                for e in &events {
                    text.push_str(&format!("{e}\n"));
                }
                let eta = record.transmissions as f64 / (cfg.packets * cfg.receivers) as f64;
                text.push_str(&format!("scheme={scheme} n={} eta={eta}\n", record.transmissions));
            }
            Err(TrialError::CapExceeded(cap)) => {
                text.push_str(&format!("scheme={scheme} aborted after {cap} transmissions\n"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    emit(&cli.out, stdout, text.as_bytes())
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                2
            } else {
                let _ = stdout.write_all(text.as_bytes());
                0
            };
        }
    };
    let result = load_config(&cli).and_then(|cfg| match &cli.command {
        Command::GenData { size } => gen_data(&cli, &cfg, *size, stdout),
        Command::Train { data } => train(&cli, &cfg, data, stdout),
        Command::Sweep {
            global_model,
            trials_out,
        } => sweep(&cli, &cfg, global_model, trials_out, stdout, stderr),
        Command::Trial { model } => trial(&cli, &cfg, model, stdout),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if matches!(e, HarnessError::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}
