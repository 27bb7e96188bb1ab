use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use clinsim_core::cohort::GenerateOptions;
use clinsim_core::eval::Averaging;
use clinsim_core::remote::{Endpoint, ENV_EMBEDDER, ENV_JUDGE, ENV_WORLD_MODEL};
use clinsim_core::reward::{RemoteJudgeConfig, RewardConfig};
use clinsim_core::trainer::{ColdStartConfig, TrainerConfig};
use clinsim_core::worldmodel::{RemoteWorldModelConfig, DEFAULT_AR_COEFFICIENT};

pub const RUN_CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub workers: usize,
    /// Synonym table file; the built-in table when absent.
    pub synonyms: Option<PathBuf>,
    pub cohort: CohortSection,
    pub episode: EpisodeSection,
    pub reward: RewardConfig,
    pub cold_start: ColdStartConfig,
    pub trainer: TrainerConfig,
    pub eval: EvalSection,
    pub metrics: MetricsSection,
    pub endpoints: EndpointsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: RUN_CONFIG_SCHEMA_VERSION,
            seed: 0,
            workers: 1,
            synonyms: None,
            cohort: CohortSection::default(),
            episode: EpisodeSection::default(),
            reward: RewardConfig::default(),
            cold_start: ColdStartConfig::default(),
            trainer: TrainerConfig::default(),
            eval: EvalSection::default(),
            metrics: MetricsSection::default(),
            endpoints: EndpointsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortSection {
    pub eval_fraction: f64,
    pub routine_exams: usize,
}

impl Default for CohortSection {
    fn default() -> Self {
        Self {
            eval_fraction: 200.0 / 2200.0,
            routine_exams: GenerateOptions::default().routine_exams,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSection {
    pub max_turns: usize,
    pub backend: BackendKind,
    pub ar_coefficient: f64,
}

impl Default for EpisodeSection {
    fn default() -> Self {
        Self {
            max_turns: 12,
            backend: BackendKind::Synthetic,
            ar_coefficient: DEFAULT_AR_COEFFICIENT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    #[default]
    Table,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub averaging: Averaging,
    pub judge: JudgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    #[default]
    Hashed,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub min_count: usize,
    pub embedder: EmbedderKind,
    pub embed_dim: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            min_count: 50,
            embedder: EmbedderKind::Hashed,
            embed_dim: clinsim_core::distmetrics::DEFAULT_EMBED_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointsSection {
    pub world_model: Option<RemoteWorldModelConfig>,
    pub judge: Option<RemoteJudgeConfig>,
    pub embedder: Option<Endpoint>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if cfg.schema_version != RUN_CONFIG_SCHEMA_VERSION {
            bail!("unsupported config schema_version {}", cfg.schema_version);
        }
        Ok(cfg)
    }

    /// Applies command-line overrides and propagates the global seed and
    /// turn limit into the sections that carry their own copies.
    pub fn resolve(&mut self, seed: Option<u64>, workers: Option<usize>) -> anyhow::Result<()> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(w) = workers {
            self.workers = w;
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.episode.max_turns == 0 {
            bail!("episode.max_turns must be at least 1");
        }
        if !(0.0..1.0).contains(&self.episode.ar_coefficient) {
            bail!("episode.ar_coefficient must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.cohort.eval_fraction) {
            bail!("cohort.eval_fraction must lie in [0, 1)");
        }
        self.cold_start.seed = self.seed;
        self.cold_start.max_turns = self.episode.max_turns;
        self.trainer.seed = self.seed;
        self.trainer.max_turns = self.episode.max_turns;
        self.reward.validate()?;
        Ok(())
    }

    /// World-model endpoint from the config file, else from
    /// `CLINSIM_WORLD_MODEL_URL` plus `CLINSIM_WORLD_MODEL_TEMPERATURE`.
    pub fn world_model_endpoint(&self) -> anyhow::Result<RemoteWorldModelConfig> {
        if let Some(c) = &self.endpoints.world_model {
            return Ok(c.clone());
        }
        let endpoint = Endpoint::from_env(ENV_WORLD_MODEL)?;
        let var = format!("{ENV_WORLD_MODEL}_TEMPERATURE");
        let temperature = std::env::var(&var)
            .ok()
            .and_then(|v| v.parse().ok())
            .with_context(|| format!("the remote world model needs a sampling temperature: set {var} or endpoints.world_model.temperature"))?;
        Ok(RemoteWorldModelConfig {
            endpoint,
            temperature,
            max_tokens: 512,
        })
    }

    pub fn judge_endpoint(&self) -> anyhow::Result<RemoteJudgeConfig> {
        if let Some(c) = &self.endpoints.judge {
            return Ok(c.clone());
        }
        Ok(RemoteJudgeConfig {
            endpoint: Endpoint::from_env(ENV_JUDGE)?,
            temperature: 0.0,
            max_tokens: 16,
        })
    }

    pub fn embedder_endpoint(&self) -> anyhow::Result<Endpoint> {
        match &self.endpoints.embedder {
            Some(e) => Ok(e.clone()),
            None => Ok(Endpoint::from_env(ENV_EMBEDDER)?),
        }
    }
}
