//! Run configuration: flags, environment, and an optional TOML file,
//! resolved in that order of precedence.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::assembly::{AssemblyPolicy, FailMode, ScoreOptions};
use crate::backend::{
    noisy_underupdater, tabular_oracle, uniform_model, Binding, CacheStore, Cached, ModelBackend,
    RemoteBackend, TabularWorld, WorldFile, ENV_API_KEY,
};
use crate::dataset::Dataset;

/// Values from `--config <file>`; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub backend: Option<String>,
    pub temperature: Option<f64>,
    pub assembly_policy: Option<String>,
    pub concurrency: Option<usize>,
    pub cache: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub fail_mode: Option<FailMode>,
    pub shuffle_seed: Option<u64>,
    pub remote_temperature: Option<bool>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved configuration for `score` and `sweep-temp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub backend: String,
    pub temperature: f64,
    pub assembly_policy: String,
    pub concurrency: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub output_dir: PathBuf,
    pub fail_mode: FailMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
    pub remote_temperature: bool,
}

pub const DEFAULT_CONCURRENCY: usize = 8;

/// Command-line layer; clap has already merged in environment variables.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub backend: Option<String>,
    pub temperature: Option<f64>,
    pub assembly_policy: Option<String>,
    pub concurrency: Option<usize>,
    pub cache: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub fail_mode: Option<FailMode>,
    pub shuffle_seed: Option<u64>,
    pub remote_temperature: bool,
}

impl RunConfig {
    pub fn resolve(flags: Overrides, file: ConfigFile) -> Result<Self, CliError> {
        let dataset = flags.dataset.or(file.dataset).ok_or_else(|| {
            CliError::Config("no dataset given (--dataset or `dataset` in the config file)".into())
        })?;
        let backend = flags.backend.or(file.backend).ok_or_else(|| {
            CliError::Config("no backend given (--backend or `backend` in the config file)".into())
        })?;
        let cfg = Self {
            dataset,
            backend,
            temperature: flags.temperature.or(file.temperature).unwrap_or(1.0),
            assembly_policy: flags
                .assembly_policy
                .or(file.assembly_policy)
                .unwrap_or_else(|| "standard".into()),
            concurrency: flags
                .concurrency
                .or(file.concurrency)
                .unwrap_or(DEFAULT_CONCURRENCY),
            cache: flags.cache.or(file.cache),
            endpoint: flags.endpoint.or(file.endpoint),
            output_dir: flags
                .output_dir
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            fail_mode: flags.fail_mode.or(file.fail_mode).unwrap_or_default(),
            shuffle_seed: flags.shuffle_seed.or(file.shuffle_seed),
            remote_temperature: flags.remote_temperature
                || file.remote_temperature.unwrap_or(false),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(CliError::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.concurrency == 0 {
            return Err(CliError::Config("concurrency must be at least 1".into()));
        }
        BackendSpec::parse(&self.backend)?;
        AssemblyPolicy::parse(&self.assembly_policy)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn score_options(&self) -> Result<ScoreOptions, CliError> {
        Ok(ScoreOptions {
            temperature: self.temperature,
            policy: AssemblyPolicy::parse(&self.assembly_policy)
                .map_err(|e| CliError::Config(e.to_string()))?,
            concurrency: self.concurrency,
            fail_mode: self.fail_mode,
            shuffle_seed: self.shuffle_seed,
        })
    }
}

/// Parsed `--backend` value.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    /// `uniform:<vocab_size>`
    Uniform(u64),
    /// `oracle:<world.json>`
    Oracle(PathBuf),
    /// `noisy:<world.json>,<gradient>,<noise_sd>,<seed>`
    Noisy {
        world: PathBuf,
        gradient: f64,
        noise_sd: f64,
        seed: u64,
    },
    /// `remote:<url>,<model-id>` or `remote:<model-id>` with the endpoint
    /// from `--endpoint` / `BAYESCOH_ENDPOINT`
    Remote { url: Option<String>, id: String },
}

impl BackendSpec {
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let bad = |m: &str| CliError::Config(format!("backend {spec:?}: {m}"));
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| bad("expected <kind>:<arguments>"))?;
        match kind {
            "uniform" => rest
                .trim()
                .parse()
                .map(BackendSpec::Uniform)
                .map_err(|_| bad("expected uniform:<vocab_size>")),
            "oracle" if !rest.is_empty() => Ok(BackendSpec::Oracle(PathBuf::from(rest))),
            "noisy" => {
                let mut parts = rest.rsplitn(4, ',');
                let (Some(seed), Some(sd), Some(g), Some(world)) =
                    (parts.next(), parts.next(), parts.next(), parts.next())
                else {
                    return Err(bad(
                        "expected noisy:<world.json>,<gradient>,<noise_sd>,<seed>",
                    ));
                };
                Ok(BackendSpec::Noisy {
                    world: PathBuf::from(world),
                    gradient: g
                        .trim()
                        .parse()
                        .map_err(|_| bad("gradient is not a number"))?,
                    noise_sd: sd
                        .trim()
                        .parse()
                        .map_err(|_| bad("noise_sd is not a number"))?,
                    seed: seed
                        .trim()
                        .parse()
                        .map_err(|_| bad("seed is not an integer"))?,
                })
            }
            "remote" if !rest.is_empty() => Ok(match rest.rsplit_once(',') {
                Some((url, id)) => BackendSpec::Remote {
                    url: Some(url.to_string()),
                    id: id.to_string(),
                },
                None => BackendSpec::Remote {
                    url: None,
                    id: rest.to_string(),
                },
            }),
            _ => Err(bad("kind must be uniform, oracle, noisy, or remote")),
        }
    }
}

fn load_world(path: &Path, dataset: &Dataset) -> Result<(TabularWorld, Binding), CliError> {
    let file = WorldFile::read(path).map_err(|e| CliError::Config(e.to_string()))?;
    let world = TabularWorld::from_file(&file).map_err(|e| CliError::Config(e.to_string()))?;
    let binding = Binding::for_dataset(&file, &world, dataset)
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok((world, binding))
}

/// Construct the configured backend, wrapped in the persistent cache when
/// one is configured.
pub fn build_backend(
    cfg: &RunConfig,
    dataset: &Dataset,
) -> Result<Arc<dyn ModelBackend>, CliError> {
    let config = |e: crate::backend::BackendError| CliError::Config(e.to_string());
    let inner: Arc<dyn ModelBackend> = match BackendSpec::parse(&cfg.backend)? {
        BackendSpec::Uniform(v) => Arc::new(uniform_model(v).map_err(config)?),
        BackendSpec::Oracle(path) => {
            let (world, binding) = load_world(&path, dataset)?;
            Arc::new(tabular_oracle(world, binding).map_err(config)?)
        }
        BackendSpec::Noisy {
            world,
            gradient,
            noise_sd,
            seed,
        } => {
            let (world, binding) = load_world(&world, dataset)?;
            Arc::new(noisy_underupdater(world, binding, gradient, noise_sd, seed).map_err(config)?)
        }
        BackendSpec::Remote { url, id } => {
            let url = url.or_else(|| cfg.endpoint.clone()).ok_or_else(|| {
                CliError::Config("remote backend needs a URL (remote:<url>,<id>, --endpoint, or BAYESCOH_ENDPOINT)".into())
            })?;
            let key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
            Arc::new(
                RemoteBackend::new(&url, &id, key).with_temperature_support(cfg.remote_temperature),
            )
        }
    };
    match &cfg.cache {
        Some(path) => {
            let store = CacheStore::open(path).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Arc::new(Cached::new(inner, Arc::new(store))))
        }
        None => Ok(inner),
    }
}
