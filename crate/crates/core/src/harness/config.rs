use std::path::Path;

use serde::{Deserialize, Serialize};

use super::baseline::BaselineMode;
use crate::agents::{AgentConfig, AgentKind};
use crate::error::{config_err, Result};

/// One declarative experiment: an environment, seeds, agents and the shared
/// agent settings. Loaded from TOML or JSON; CLI flags override fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: String,
    pub seed: u64,
    /// Extra environments for sweeps; empty means just `env`.
    pub envs: Vec<String>,
    /// Seeds for sweeps; empty means just `seed`.
    pub seeds: Vec<u64>,
    /// Agents for sweeps; empty means just `agent.agent`.
    pub agents: Vec<AgentKind>,
    pub baseline: BaselineMode,
    pub agent: AgentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: "chain:p=0.3".into(),
            seed: 0,
            envs: Vec::new(),
            seeds: Vec::new(),
            agents: Vec::new(),
            baseline: BaselineMode::Exact,
            agent: AgentConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads `.toml` or `.json` by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            Some("json") => Self::from_json(&text),
            _ => Err(config_err(format!(
                "config `{}` must end in .toml or .json",
                path.display()
            ))),
        }
    }

    pub fn sweep_envs(&self) -> Vec<String> {
        if self.envs.is_empty() {
            vec![self.env.clone()]
        } else {
            self.envs.clone()
        }
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    pub fn sweep_agents(&self) -> Vec<AgentKind> {
        if self.agents.is_empty() {
            vec![self.agent.agent]
        } else {
            self.agents.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let t = ExperimentConfig::from_toml(
            r#"
            env = "deepsea:N=4"
            seed = 7
            [agent]
            agent = "politex-lspe"
            steps = 5000
            visit_mode = "first_visit"
            [agent.schedule]
            rollout_len = 8
            "#,
        )
        .unwrap();
        assert_eq!(t.agent.agent, AgentKind::PolitexLspe);
        assert_eq!(t.agent.schedule.rollout_len, Some(8));
        let j = ExperimentConfig::from_json(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(t, j);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("colour = 3").is_err());
        assert!(ExperimentConfig::from_toml("[agent]\nagent = \"nope\"").is_err());
    }
}
