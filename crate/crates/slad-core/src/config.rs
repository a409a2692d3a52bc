//! Run configuration: one JSON document drives the whole pipeline.
//!
//! Unknown keys are rejected, every field has a documented default, and the
//! resolved (fully defaulted) document is what gets snapshotted and hashed
//! into checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DatasetConfig;
use crate::distill::DistillConfig;
use crate::error::{Error, Result};
use crate::metrics::DeltaNoise;
use crate::net::NetConfig;
use crate::schedule::ScheduleConfig;
use crate::teacher::TeacherConfig;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub width: usize,
    pub class_embed_dim: usize,
    pub t_frequencies: usize,
    pub gamma_frequencies: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { width: 128, class_embed_dim: 8, t_frequencies: 16, gamma_frequencies: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Sample count for energy distance / coverage.
    pub n_samples: usize,
    /// Step counts to evaluate sampling at.
    pub sample_steps: Vec<usize>,
    /// A mode counts as covered at this assignment fraction.
    pub coverage_threshold: f64,
    /// Mapping-error probe: spacing, sample count, smallest timestep.
    pub delta_k: usize,
    pub delta_samples: usize,
    pub delta_t_min: usize,
    pub delta_noise: DeltaNoise,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_samples: 2000,
            sample_steps: vec![1, 2, 4],
            coverage_threshold: 0.02,
            delta_k: 20,
            delta_samples: 1000,
            delta_t_min: 100,
            delta_noise: DeltaNoise::Shared,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AblateConfig {
    /// Skipping step sizes for the step-size sweep.
    pub step_sizes: Vec<usize>,
    /// Guidance scales for the guidance sweep.
    pub guidance_scales: Vec<f64>,
    /// Gamma grid resolution for the deviation-gap surface.
    pub gamma_grid: usize,
    /// Sub-path lengths for the deviation-gap surface.
    pub error_surface_ks: Vec<usize>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig {
            step_sizes: vec![20, 50, 100, 200],
            guidance_scales: vec![3.0, 5.0, 8.0, 12.0],
            gamma_grid: 101,
            error_surface_ks: vec![20, 100],
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    pub teacher: TeacherConfig,
    pub distill: DistillConfig,
    pub eval: EvalConfig,
    pub ablate: AblateConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("at {}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.schedule.t_max < 2 {
            return Err(Error::Config("schedule.t_max must be >= 2".into()));
        }
        if !(self.schedule.beta_start > 0.0
            && self.schedule.beta_start <= self.schedule.beta_end
            && self.schedule.beta_end < 1.0)
        {
            return Err(Error::Config(
                "schedule: need 0 < beta_start <= beta_end < 1".into(),
            ));
        }
        if self.model.width == 0 || self.model.t_frequencies == 0 || self.model.gamma_frequencies == 0
        {
            return Err(Error::Config("model: width and frequency banks must be >= 1".into()));
        }
        self.teacher.validate()?;
        self.distill.validate(self.schedule.t_max)?;
        for &s in &self.eval.sample_steps {
            if ![1, 2, 4, 8].contains(&s) {
                return Err(Error::Config(format!(
                    "eval.sample_steps entries must be one of 1, 2, 4, 8; got {s}"
                )));
            }
        }
        if self.eval.delta_t_min >= self.schedule.t_max {
            return Err(Error::Config("eval.delta_t_min must be below t_max".into()));
        }
        if self.eval.delta_k == 0 || self.eval.n_samples == 0 || self.eval.delta_samples == 0 {
            return Err(Error::Config("eval: counts must be >= 1".into()));
        }
        if self.ablate.gamma_grid < 2 {
            return Err(Error::Config("ablate.gamma_grid must be >= 2".into()));
        }
        Ok(())
    }

    /// Network layout implied by this config.
    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            data_dim: self.dataset.dim,
            width: self.model.width,
            n_classes: self.dataset.n_modes,
            class_embed_dim: self.model.class_embed_dim,
            t_frequencies: self.model.t_frequencies,
            gamma_frequencies: self.model.gamma_frequencies,
        }
    }

    /// The fully resolved document (defaults applied).
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the resolved document.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.resolved_json().as_bytes());
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrip_and_stable_hash() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let parsed = RunConfig::from_json(&cfg.resolved_json()).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        let err = RunConfig::from_json(r#"{"distill": {"bogus_knob": 3}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("distill"), "{msg}");
        assert!(msg.contains("bogus_knob"), "{msg}");
    }

    #[test]
    fn misaligned_strides_fail_at_parse_time() {
        let err = RunConfig::from_json(r#"{"distill": {"k": 100, "k_phi": 30}}"#).unwrap_err();
        assert!(err.to_string().contains("multiple"), "{err}");
    }

    #[test]
    fn empty_document_is_the_default_config() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.distill.k, 100);
        assert_eq!(cfg.distill.k_phi, 20);
        assert_eq!(cfg.teacher.null_label_dropout, 0.1);
    }

    #[test]
    fn hash_changes_with_any_knob() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.distill.guidance_scale = 8.0;
        assert_ne!(a.hash(), b.hash());
    }
}
