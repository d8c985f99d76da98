use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use nlo_core::gateway::HttpConfig;
use nlo_core::LanguageProfile;

pub const DEFAULT_API_KEY_ENV: &str = "NLO_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Replay,
    Http,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub kind: Option<BackendKind>,
    pub store: Option<PathBuf>,
    pub provider: Option<String>,
    pub model: Option<String>,
    #[serde(default)]
    pub record: bool,
    pub http: Option<HttpConfig>,
}

/// Contents of an `nlo.toml` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub backend: BackendSection,
    /// A built-in set name or a directory of example pairs.
    pub few_shots: Option<String>,
    pub profile: Option<String>,
    #[serde(default)]
    pub profiles: Vec<LanguageProfile>,
    /// File extension to profile name.
    #[serde(default)]
    pub extensions: BTreeMap<String, String>,
    pub temperature: Option<f64>,
    pub max_output: Option<usize>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    /// Resolves a path from the config file against the file's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn profile_named(&self, name: &str) -> Option<LanguageProfile> {
        self.profiles
            .iter()
            .find(|p| p.name() == name)
            .cloned()
            .or_else(|| LanguageProfile::builtin(name))
    }

    pub fn profile_for(&self, path: &Path, forced: Option<&str>) -> Result<LanguageProfile> {
        if let Some(name) = forced.or(self.profile.as_deref()) {
            return match self.profile_named(name) {
                Some(p) => Ok(p),
                None => bail!("unknown profile {name:?}"),
            };
        }
        self.detect_profile(path)
            .with_context(|| format!("{}: cannot tell the language; pass --profile", path.display()))
    }

    pub fn detect_profile(&self, path: &Path) -> Option<LanguageProfile> {
        let ext = path.extension()?.to_str()?;
        match self.extensions.get(ext) {
            Some(name) => self.profile_named(name),
            None => LanguageProfile::for_extension(ext),
        }
    }
}
