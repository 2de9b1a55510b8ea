//! Run configuration: one declarative TOML file, validated before any side
//! effect. Secrets never live in the file; only the name of the environment
//! variable holding the API key does.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rcourt_core::gateway::{CacheMode, EndpointStyle};
use rcourt_core::model::Dataset;
use rcourt_core::prompts::PromptSet;
use rcourt_core::strategies::{StrategyName, StrategyParams};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunSection,
    pub model: ModelSection,
    #[serde(default)]
    pub endpoint: EndpointSection,
    #[serde(default)]
    pub cache: CacheSection,
    #[serde(default)]
    pub prompts: PromptsSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub corpus: CorpusSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    pub dataset: String,
    pub dataset_path: PathBuf,
    pub strategy: String,
    pub n_questions: usize,
    /// Optional prefix slice of the sampled set (budget-limited protocols).
    #[serde(default)]
    pub first_n: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Multi-run mode: one sub-run per seed, each in its own subdirectory.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub output_dir: PathBuf,
}

fn default_seed() -> u64 {
    42
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSection {
    pub model_id: String,
    /// "remote" or "scripted".
    pub backend: String,
    #[serde(default)]
    pub script_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointSection {
    pub base_url: String,
    pub path: String,
    /// "chat" or "completion".
    pub style: String,
    pub api_key_env: String,
    pub auth_header: String,
    pub auth_prefix: String,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
}

impl Default for EndpointSection {
    fn default() -> Self {
        EndpointSection {
            base_url: "https://api.openai.com".to_string(),
            path: "/v1/chat/completions".to_string(),
            style: "chat".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            auth_header: "Authorization".to_string(),
            auth_prefix: "Bearer ".to_string(),
            requests_per_minute: Some(60),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CacheSection {
    /// Completion cache directory; absent disables persistent caching.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// "replay" (hits are free) or "accounting" (hits count as calls).
    #[serde(default)]
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptsSection {
    /// "default" or "fever-enhanced".
    pub react_set: String,
    /// "concise" or "no-conciseness".
    pub standard_set: String,
}

impl Default for PromptsSection {
    fn default() -> Self {
        PromptsSection {
            react_set: "default".to_string(),
            standard_set: "concise".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsSection {
    pub sc_samples: u32,
    pub sc_temperature: f64,
    pub debate_rounds: u32,
    pub refine_rounds: u32,
    pub k: u32,
    pub k_temperature: f64,
    #[serde(default)]
    pub swap_judge_order: bool,
}

impl Default for ParamsSection {
    fn default() -> Self {
        let d = StrategyParams::default();
        ParamsSection {
            sc_samples: d.sc_samples,
            sc_temperature: d.sc_temperature,
            debate_rounds: d.debate_rounds,
            refine_rounds: d.refine_rounds,
            k: d.k,
            k_temperature: d.k_temperature,
            swap_judge_order: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSection {
    /// "local" or "wikipedia".
    pub kind: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub api_url: Option<String>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            kind: "wikipedia".to_string(),
            path: None,
            api_url: None,
            cache_dir: None,
        }
    }
}

/// Everything in the config resolved to typed values.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub raw: RunConfig,
    pub dataset: Dataset,
    pub strategy: StrategyName,
    pub react_set: PromptSet,
    pub standard_set: PromptSet,
    pub cache_mode: CacheMode,
    pub endpoint_style: EndpointStyle,
    pub params: StrategyParams,
    pub seeds: Vec<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("reading config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("parsing config {}: {e}", path.display())))
    }

    /// Validates every cross-field rule before any network or filesystem side
    /// effect, and resolves strings into typed values.
    pub fn resolve(self) -> Result<ResolvedConfig, CliError> {
        let dataset: Dataset = self
            .run
            .dataset
            .parse()
            .map_err(|e| CliError::Validation(format!("{e}")))?;
        let strategy: StrategyName = self
            .run
            .strategy
            .parse()
            .map_err(|e| CliError::Validation(format!("{e}")))?;

        if self.run.n_questions == 0 {
            return Err(CliError::Validation("n_questions must be positive".into()));
        }
        if self.run.parallelism == 0 {
            return Err(CliError::Validation("parallelism must be positive".into()));
        }
        if let Some(first_n) = self.run.first_n {
            if first_n == 0 || first_n > self.run.n_questions {
                return Err(CliError::Validation(format!(
                    "first_n must be in 1..=n_questions ({})",
                    self.run.n_questions
                )));
            }
        }
        if !self.run.dataset_path.exists() {
            return Err(CliError::Validation(format!(
                "dataset_path {} does not exist",
                self.run.dataset_path.display()
            )));
        }

        let react_set = match self.prompts.react_set.as_str() {
            "default" => PromptSet::ReActDefault,
            "fever-enhanced" => PromptSet::FeverReasoningEnhanced,
            other => {
                return Err(CliError::Validation(format!(
                    "unknown react_set {other:?} (expected \"default\" or \"fever-enhanced\")"
                )))
            }
        };
        if react_set == PromptSet::FeverReasoningEnhanced && dataset != Dataset::Fever {
            return Err(CliError::Validation(
                "react_set \"fever-enhanced\" is only valid for the fever dataset".into(),
            ));
        }
        let standard_set = match self.prompts.standard_set.as_str() {
            "concise" => PromptSet::Standard,
            "no-conciseness" => PromptSet::StandardNoConciseness,
            other => {
                return Err(CliError::Validation(format!(
                    "unknown standard_set {other:?} (expected \"concise\" or \"no-conciseness\")"
                )))
            }
        };

        match self.model.backend.as_str() {
            "scripted" => {
                let script = self.model.script_path.as_ref().ok_or_else(|| {
                    CliError::Validation("scripted backend requires model.script_path".into())
                })?;
                if !script.exists() {
                    return Err(CliError::Validation(format!(
                        "script_path {} does not exist",
                        script.display()
                    )));
                }
            }
            "remote" => {}
            other => {
                return Err(CliError::Validation(format!(
                    "unknown backend {other:?} (expected \"remote\" or \"scripted\")"
                )))
            }
        }

        let endpoint_style = match self.endpoint.style.as_str() {
            "chat" => EndpointStyle::Chat,
            "completion" => EndpointStyle::Completion,
            other => {
                return Err(CliError::Validation(format!(
                    "unknown endpoint style {other:?} (expected \"chat\" or \"completion\")"
                )))
            }
        };

        let cache_mode = match self.cache.mode.as_deref() {
            None | Some("replay") => CacheMode::Replay,
            Some("accounting") => CacheMode::Accounting,
            Some(other) => {
                return Err(CliError::Validation(format!(
                    "unknown cache mode {other:?} (expected \"replay\" or \"accounting\")"
                )))
            }
        };

        match (dataset, self.corpus.kind.as_str()) {
            // MuSiQue needs no corpus: retrieval runs over per-question context.
            (Dataset::MuSiQue, _) => {}
            (_, "local") => {
                let path = self.corpus.path.as_ref().ok_or_else(|| {
                    CliError::Validation("corpus.kind \"local\" requires corpus.path".into())
                })?;
                if !path.exists() {
                    return Err(CliError::Validation(format!(
                        "corpus path {} does not exist",
                        path.display()
                    )));
                }
            }
            (_, "wikipedia") => {}
            (_, other) => {
                return Err(CliError::Validation(format!(
                    "unknown corpus kind {other:?} (expected \"local\" or \"wikipedia\")"
                )))
            }
        }

        // Resolve "rc-k" to a concrete agent count up front.
        let strategy = match strategy {
            StrategyName::RcK(0) => StrategyName::RcK(self.params.k),
            other => other,
        };
        if let StrategyName::RcK(k) = strategy {
            if k < 2 {
                return Err(CliError::Validation(format!(
                    "rc-k requires k >= 2, got {k}"
                )));
            }
        }

        let params = StrategyParams {
            sc_samples: self.params.sc_samples,
            sc_temperature: self.params.sc_temperature,
            debate_rounds: self.params.debate_rounds,
            refine_rounds: self.params.refine_rounds,
            k: self.params.k,
            k_temperature: self.params.k_temperature,
        };
        if params.sc_samples == 0 {
            return Err(CliError::Validation("sc_samples must be positive".into()));
        }

        let seeds = match &self.run.seeds {
            Some(seeds) if seeds.is_empty() => {
                return Err(CliError::Validation(
                    "seeds must not be empty when set".into(),
                ))
            }
            Some(seeds) => seeds.clone(),
            None => vec![self.run.seed],
        };

        Ok(ResolvedConfig {
            raw: self,
            dataset,
            strategy,
            react_set,
            standard_set,
            cache_mode,
            endpoint_style,
            params,
            seeds,
        })
    }
}

/// Digest of the canonical config serialization; pins a run directory to the
/// exact configuration that produced it.
pub fn config_digest(config: &RunConfig) -> String {
    use sha2::{Digest, Sha256};
    let canonical = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&canonical);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
