//! Run-directory setup shared by every command.

use std::fs;
use std::path::{Path, PathBuf};

use slad_core::checkpoint::CheckpointMeta;
use slad_core::config::RunConfig;
use slad_core::data::Dataset;
use slad_core::error::{Error, Result};
use slad_core::report::CsvFile;
use slad_core::schedule::NoiseSchedule;
use slad_core::{checkpoint, rng};

pub struct RunContext {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

/// Loads and validates the config, applies the seed override, creates the
/// run directory, and writes the resolved config snapshot.
pub fn prepare(config_path: &Path, out: &Path, seed_override: Option<u64>) -> Result<RunContext> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), cfg.resolved_json() + "\n")?;
    Ok(RunContext { cfg, out: out.to_path_buf() })
}

impl RunContext {
    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::from_config(&self.cfg.schedule)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::new(&self.cfg.dataset)
    }

    pub fn seed(&self) -> u64 {
        self.cfg.seed
    }

    pub fn meta(&self, step: usize, lineage: &[(&str, u64)]) -> CheckpointMeta {
        CheckpointMeta {
            format_version: checkpoint::FORMAT_VERSION,
            config_hash: self.cfg.hash(),
            seed: self.cfg.seed,
            seed_lineage: lineage.iter().map(|(n, s)| (n.to_string(), *s)).collect(),
            schedule: self.cfg.schedule.clone(),
            net: self.cfg.net_config(),
            dataset: self.cfg.dataset.clone(),
            gamma_convention: slad_core::net::GAMMA_CONVENTION.to_string(),
            step,
        }
    }

    /// Checks that a checkpoint is structurally usable with this config.
    pub fn check_compatible(&self, meta: &CheckpointMeta, what: &str) -> Result<()> {
        let net = self.cfg.net_config();
        if meta.net != net {
            return Err(Error::Config(format!(
                "{what}: checkpoint architecture {:?} does not match config {:?}",
                meta.net, net
            )));
        }
        if meta.schedule != self.cfg.schedule {
            return Err(Error::Config(format!(
                "{what}: checkpoint schedule {:?} does not match config {:?}",
                meta.schedule, self.cfg.schedule
            )));
        }
        if meta.gamma_convention != slad_core::net::GAMMA_CONVENTION {
            return Err(Error::Checkpoint(format!(
                "{what}: unsupported gamma convention {:?}",
                meta.gamma_convention
            )));
        }
        Ok(())
    }
}

/// Seed lineage rows for checkpoint metadata.
pub fn lineage(seed: u64) -> Vec<(&'static str, u64)> {
    vec![
        ("data", rng::derive(seed, rng::tags::DATA)),
        ("teacher_step", rng::derive(seed, rng::tags::TEACHER_STEP)),
        ("distill_step", rng::derive(seed, rng::tags::DISTILL_STEP)),
        ("sample", rng::derive(seed, rng::tags::SAMPLE)),
        ("eval", rng::derive(seed, rng::tags::EVAL)),
    ]
}

/// CSV sink usable from FnMut observers: IO errors are captured and
/// surfaced by `finish`.
pub struct LogSink {
    csv: Option<CsvFile>,
    err: Option<Error>,
}

impl LogSink {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        Ok(LogSink { csv: Some(CsvFile::create(path, header)?), err: None })
    }

    pub fn row(&mut self, fields: &[String]) {
        if self.err.is_some() {
            return;
        }
        if let Some(csv) = self.csv.as_mut() {
            if let Err(e) = csv.row(fields) {
                self.err = Some(e);
            }
        }
    }

    pub fn capture(&mut self, result: Result<()>) {
        if self.err.is_none() {
            if let Err(e) = result {
                self.err = Some(e);
            }
        }
    }

    pub fn finish(mut self) -> Result<()> {
        if let Some(e) = self.err.take() {
            return Err(e);
        }
        match self.csv.take() {
            Some(csv) => csv.finish(),
            None => Ok(()),
        }
    }
}

/// Float formatting shared by all CSV emitters (shortest round-trip).
pub fn fmt(v: f64) -> String {
    format!("{v}")
}
