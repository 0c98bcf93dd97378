//! Run configuration: one JSON file carries the full parameterization of
//! a run, so a config plus a dataset plus a seed reproduces it exactly.
//! Environment variables carry secrets only (the API key named by
//! `gateway.api_key_env`).
//!
//! Relative paths inside the file are resolved against the config file's
//! directory, and every configured path must exist at load time.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use hisum_core::dataset::{self, LoadOutcome, SourceFormat, UnanswerableRule};
use hisum_core::eval::EloParams;
use hisum_core::gateway::{Gateway, HttpBackend, HttpSettings, MockBackend};
use hisum_core::highlight::ExtractiveEndpoint;
use hisum_core::pipeline::{PipelineSpec, Runtime};
use hisum_core::security::{AttackConfiguration, ToolSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of all run randomness: battle ordering, presentation coins,
    /// and Elo permutations derive from it.
    #[serde(default)]
    pub seed: u64,
    pub gateway: GatewayConfig,
    #[serde(default)]
    pub pipelines: Vec<PipelineSpec>,
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub extractive: Option<ExtractiveEndpoint>,
    /// Explicit Elo parameters; when absent, defaults seeded from `seed`.
    #[serde(default)]
    pub elo: Option<EloParams>,
    #[serde(default)]
    pub security: Option<SecurityConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GatewayConfig {
    /// Deterministic offline backend driven by a rules file.
    Mock {
        /// Path to a JSON array of rule objects
        /// `{"pattern","is_regex","priority","response"}`.
        #[serde(default)]
        rules: Option<PathBuf>,
        #[serde(default = "default_mock_response")]
        default_response: String,
    },
    /// Live chat-completions endpoint.
    Http(HttpSettings),
}

fn default_mock_response() -> String {
    "OK".to_owned()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub format: SourceFormat,
    #[serde(default)]
    pub unanswerable: UnanswerableRule,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityConfig {
    #[serde(default)]
    pub tool: ToolSpec,
    pub configurations: Vec<AttackConfiguration>,
    /// Attack corpus path; the bundled 25-case corpus when absent.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("config {} is not valid", path.display()))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty());
        config.resolve_paths(base.unwrap_or_else(|| Path::new(".")))?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        if let GatewayConfig::Mock {
            rules: Some(rules), ..
        } = &mut self.gateway
        {
            *rules = resolve_existing(base, rules)?;
        }
        if let Some(ds) = &mut self.dataset {
            ds.path = resolve_existing(base, &ds.path)?;
        }
        if let Some(sec) = &mut self.security {
            if let Some(corpus) = &mut sec.corpus {
                *corpus = resolve_existing(base, corpus)?;
            }
        }
        Ok(())
    }

    /// Build the execution environment the config describes.
    pub fn runtime(&self) -> Result<Runtime> {
        let gateway = match &self.gateway {
            GatewayConfig::Mock {
                rules,
                default_response,
            } => {
                let backend = match rules {
                    Some(path) => {
                        let json = std::fs::read_to_string(path)
                            .with_context(|| format!("cannot read rules {}", path.display()))?;
                        MockBackend::from_rules_json(&json, default_response.clone())
                            .with_context(|| format!("rules {} are not valid", path.display()))?
                    }
                    None => MockBackend::new(Vec::new(), default_response.clone())
                        .expect("no rules to compile"),
                };
                Gateway::new(Arc::new(backend))
            }
            GatewayConfig::Http(settings) => {
                let backend = HttpBackend::new(settings).context("cannot set up the gateway")?;
                Gateway::new(Arc::new(backend))
            }
        };
        let mut rt = Runtime::new(gateway);
        if let Some(ep) = &self.extractive {
            rt = rt.with_extractive(ep.clone());
        }
        Ok(rt)
    }

    /// Look up a configured pipeline by name, listing the alternatives on
    /// a miss.
    pub fn pipeline(&self, name: &str) -> Result<&PipelineSpec> {
        self.pipelines.iter().find(|p| p.name == name).ok_or_else(|| {
            let names: Vec<&str> = self.pipelines.iter().map(|p| p.name.as_str()).collect();
            anyhow::anyhow!(
                "pipeline {name:?} is not configured; available: {}",
                if names.is_empty() {
                    "none".to_owned()
                } else {
                    names.join(", ")
                }
            )
        })
    }

    /// Load the configured dataset; `path_override`/`format_override`
    /// come from command-line flags.
    pub fn load_dataset(
        &self,
        path_override: Option<&Path>,
        format_override: Option<SourceFormat>,
    ) -> Result<LoadOutcome> {
        let (path, format, rule) = match (&self.dataset, path_override) {
            (_, Some(path)) => {
                let format = format_override
                    .or(self.dataset.as_ref().map(|d| d.format))
                    .unwrap_or(SourceFormat::Normalized);
                let rule = self
                    .dataset
                    .as_ref()
                    .map(|d| d.unanswerable.clone())
                    .unwrap_or_default();
                (path.to_path_buf(), format, rule)
            }
            (Some(ds), None) => (
                ds.path.clone(),
                format_override.unwrap_or(ds.format),
                ds.unanswerable.clone(),
            ),
            (None, None) => bail!(
                "no dataset configured; add a dataset section to the config or pass --dataset"
            ),
        };
        let outcome = dataset::load_dataset(&path, format, &rule)
            .with_context(|| format!("cannot load dataset {}", path.display()))?;
        for q in &outcome.quarantined {
            eprintln!(
                "notice: quarantined record at line {} ({}): {}",
                q.line,
                q.id.as_deref().unwrap_or("no id"),
                q.reason
            );
        }
        Ok(outcome)
    }

    pub fn elo_params(&self) -> EloParams {
        self.elo.clone().unwrap_or(EloParams {
            seed: self.seed,
            ..EloParams::default()
        })
    }
}

fn resolve_existing(base: &Path, path: &Path) -> Result<PathBuf> {
    let full = if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    };
    if !full.exists() {
        bail!("configured path {} does not exist", full.display());
    }
    Ok(full)
}
