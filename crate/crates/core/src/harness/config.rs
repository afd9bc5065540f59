use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::AbstractSchema;
use crate::baselines::FlatConfig;
use crate::env::Env;
use crate::gridworld::{bundled, load_world};
use crate::options::{Backend, OptionConfig};
use crate::planner::RMaxConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("world: {0}")]
    World(#[from] crate::gridworld::WorldError),
    #[error("schema: {0}")]
    Schema(#[from] crate::abstraction::AbstractionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    DaqnTabular,
    DaqnNetwork,
    Flat,
    FlatBonus,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::DaqnTabular => "daqn-tabular",
            AgentKind::DaqnNetwork => "daqn-network",
            AgentKind::Flat => "flat",
            AgentKind::FlatBonus => "flat-bonus",
        }
    }
}

/// File references are paths relative to the config file, or
/// `bundled:<name>` for the maps shipped with the crate (`four_rooms`,
/// `toy_mr`, `barrier`, `barrier_split`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub map: String,
    #[serde(default)]
    pub sectors: Option<String>,
    #[serde(default)]
    pub schema: Option<String>,
    #[serde(default)]
    pub lives: Option<u8>,
    #[serde(default)]
    pub step_limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub agent: AgentKind,
    /// Training ground steps.
    pub budget: u64,
    pub eval_period: u64,
    pub eval_steps: u64,
    pub seed: u64,
    /// Write per-option launch records to `trace.jsonl`.
    pub trace: bool,
    pub checkpoint: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            agent: AgentKind::DaqnTabular,
            budget: 5_000_000,
            eval_period: 100_000,
            eval_steps: 10_000,
            seed: 0,
            trace: false,
            checkpoint: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub planner: RMaxConfig,
    #[serde(default)]
    pub options: OptionConfig,
    #[serde(default)]
    pub flat: FlatConfig,
    /// Directory that relative world paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// A config for a bundled world with everything else at its defaults.
    pub fn bundled(world: &str, agent: AgentKind) -> RunConfig {
        let mut cfg = RunConfig {
            world: WorldConfig {
                map: format!("bundled:{world}"),
                sectors: Some(format!("bundled:{world}")),
                schema: Some(format!("bundled:{world}")),
                lives: None,
                step_limit: None,
            },
            run: RunSection::default(),
            planner: RMaxConfig::default(),
            options: OptionConfig::default(),
            flat: FlatConfig::default(),
            base_dir: PathBuf::from("."),
        };
        cfg.run.agent = agent;
        cfg.sync_backend();
        cfg
    }

    /// Serialised form, as stored in run directories.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    /// Same config with file references made absolute, so the snapshot in a
    /// run directory resolves from anywhere.
    pub fn with_absolute_paths(&self) -> RunConfig {
        let mut c = self.clone();
        let fix = |r: &mut String| {
            if !r.starts_with("bundled:") {
                let p = self.base_dir.join(&*r);
                *r = std::fs::canonicalize(&p).unwrap_or(p).display().to_string();
            }
        };
        fix(&mut c.world.map);
        if let Some(s) = c.world.sectors.as_mut() {
            fix(s);
        }
        if let Some(s) = c.world.schema.as_mut() {
            fix(s);
        }
        c
    }

    /// Reads the config snapshot of a run directory and builds its world.
    /// Failures here mean a broken run directory, so they are reported as
    /// plain errors rather than config errors.
    pub fn from_run_dir(dir: &Path) -> anyhow::Result<(RunConfig, Env)> {
        let bad = |e: ConfigError| anyhow::anyhow!("{} is not a usable run directory: {e}", dir.display());
        let cfg = RunConfig::load(&dir.join("config.toml")).map_err(bad)?;
        let env = cfg.build_env().map_err(bad)?;
        Ok((cfg, env))
    }

    fn sync_backend(&mut self) {
        self.options.backend = match self.run.agent {
            AgentKind::DaqnNetwork => Backend::Network,
            _ => Backend::Tabular,
        };
    }

    pub fn validate(&mut self) -> Result<(), ConfigError> {
        let r = &self.run;
        if r.budget > 0 && r.eval_period == 0 {
            return Err(ConfigError::Invalid("eval_period must be positive".into()));
        }
        if r.eval_steps == 0 || r.eval_period <= r.eval_steps && r.budget > 0 {
            return Err(ConfigError::Invalid(format!(
                "need eval_period > eval_steps > 0, got {} and {}",
                r.eval_period, r.eval_steps
            )));
        }
        self.planner.validate().map_err(ConfigError::Invalid)?;
        self.options.validate().map_err(ConfigError::Invalid)?;
        self.flat.validate().map_err(ConfigError::Invalid)?;
        if self.options.step_cap != self.planner.option_step_cap {
            self.options.step_cap = self.planner.option_step_cap;
        }
        self.sync_backend();
        Ok(())
    }

    fn resolve(&self, reference: &str, ext: &str) -> Result<String, ConfigError> {
        if let Some(name) = reference.strip_prefix("bundled:") {
            let text = match (name, ext) {
                ("four_rooms", "map") => bundled::FOUR_ROOMS_MAP,
                ("four_rooms", "sectors") => bundled::FOUR_ROOMS_SECTORS,
                ("four_rooms", "schema") => bundled::FOUR_ROOMS_SCHEMA,
                ("toy_mr", "map") => bundled::TOY_MR_MAP,
                ("toy_mr", "sectors") => bundled::TOY_MR_SECTORS,
                ("toy_mr", "schema") => bundled::TOY_MR_SCHEMA,
                ("barrier", "map") | ("barrier_split", "map") => bundled::BARRIER_MAP,
                ("barrier", "sectors") => bundled::BARRIER_SECTORS,
                ("barrier_split", "sectors") => bundled::BARRIER_SPLIT_SECTORS,
                ("barrier", "schema") | ("barrier_split", "schema") => bundled::FOUR_ROOMS_SCHEMA,
                _ => return Err(ConfigError::Invalid(format!("no bundled {ext} named `{name}`"))),
            };
            return Ok(text.to_string());
        }
        let path = self.base_dir.join(reference);
        std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn build_env(&self) -> Result<Env, ConfigError> {
        let map = self.resolve(&self.world.map, "map")?;
        let sectors = match &self.world.sectors {
            Some(s) => self.resolve(s, "sectors")?,
            None => String::new(),
        };
        let mut world = load_world(&map, &sectors)?;
        if let Some(l) = self.world.lives {
            if l == 0 {
                return Err(ConfigError::Invalid("lives must be at least 1".into()));
            }
            world.lives = l;
        }
        if let Some(s) = self.world.step_limit {
            world.step_limit = Some(s);
        }
        let schema_text = match &self.world.schema {
            Some(s) => self.resolve(s, "schema")?,
            None => "attribute location sectors\n".to_string(),
        };
        let schema = AbstractSchema::load(&schema_text, &world)?;
        Ok(Env::new(world, schema))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::parse("[world]\nmap = \"bundled:four_rooms\"\nsectors = \"bundled:four_rooms\"\n", Path::new(".")).unwrap();
        assert_eq!(cfg.run.agent, AgentKind::DaqnTabular);
        assert_eq!(cfg.planner.known_threshold, 100);
        let env = cfg.build_env().unwrap();
        assert_eq!(env.world.rooms.len(), 4);
    }

    #[test]
    fn sections_override_defaults() {
        let text = "[world]\nmap = \"bundled:toy_mr\"\nlives = 5\n\n[run]\nagent = \"flat-bonus\"\nbudget = 1000\neval_period = 500\neval_steps = 100\n\n[flat]\nbonus = 0.5\n";
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.run.agent, AgentKind::FlatBonus);
        assert_eq!(cfg.flat.bonus, 0.5);
        assert_eq!(cfg.build_env().unwrap().world.lives, 5);
    }

    #[test]
    fn eval_period_must_exceed_eval_steps() {
        let text = "[world]\nmap = \"bundled:toy_mr\"\n[run]\neval_period = 10\neval_steps = 10\n";
        assert!(matches!(RunConfig::parse(text, Path::new(".")), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn unknown_key_rejected() {
        let text = "[world]\nmap = \"bundled:toy_mr\"\n[planner]\nknown = 3\n";
        assert!(matches!(RunConfig::parse(text, Path::new(".")), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::bundled("toy_mr", AgentKind::DaqnNetwork);
        let again = RunConfig::parse(&cfg.to_toml(), Path::new(".")).unwrap();
        assert_eq!(again.options.backend, Backend::Network);
        assert_eq!(again.world, cfg.world);
    }
}
