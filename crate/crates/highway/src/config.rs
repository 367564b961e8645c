//! Run configuration: sectioned key=value text with documented defaults.
//! Unknown keys are rejected; the resolved config is echoed into the run
//! directory so every run re-parses to itself.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, Algorithm, EpsilonSchedule};
use crate::driver::{ControlGains, DriverParams, FormulaMode, IdmParams, MobilParams};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::neural::DuelingAgg;
use crate::sim::{RoadConfig, ScenarioConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub policy_hz: u32,
    pub sim_hz: u32,
    pub horizon_s: f64,
    pub speed_step: f64,
    pub neighbors_k: usize,
    pub obs_signed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub destination_m: Option<f64>,
    pub lane_count: u32,
    pub lane_width: f64,
    pub vehicles_per_lane: u32,
    pub ego_speed_min: f64,
    pub ego_speed_max: f64,
    pub surrounding_speed_min: f64,
    pub surrounding_speed_max: f64,
    pub spacing_min: f64,
    pub spacing_max: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        let e = EnvConfig::default();
        EnvSection {
            policy_hz: e.policy_hz,
            sim_hz: e.sim_hz,
            horizon_s: e.horizon_s,
            speed_step: e.speed_step,
            neighbors_k: e.neighbors_k,
            obs_signed: e.obs_signed,
            destination_m: None,
            lane_count: e.road.lane_count,
            lane_width: e.road.lane_width,
            vehicles_per_lane: e.scenario.vehicles_per_lane,
            ego_speed_min: e.scenario.ego_speed_range.0,
            ego_speed_max: e.scenario.ego_speed_range.1,
            surrounding_speed_min: e.scenario.surrounding_speed_range.0,
            surrounding_speed_max: e.scenario.surrounding_speed_range.1,
            spacing_min: e.scenario.spacing_range.0,
            spacing_max: e.scenario.spacing_range.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmSection {
    pub a_max: f64,
    pub delta: f64,
    pub time_gap: f64,
    pub b_comfort: f64,
    pub d0: f64,
    pub formula_mode: FormulaMode,
}

impl Default for IdmSection {
    fn default() -> Self {
        let p = IdmParams::default();
        IdmSection {
            a_max: p.a_max,
            delta: p.delta,
            time_gap: p.time_gap,
            b_comfort: p.b_comfort,
            d0: p.d0,
            formula_mode: p.formula_mode,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilSection {
    pub politeness: f64,
    pub b_safe: f64,
    pub a_th: f64,
}

impl Default for MobilSection {
    fn default() -> Self {
        let p = MobilParams::default();
        MobilSection {
            politeness: p.politeness,
            b_safe: p.b_safe,
            a_th: p.a_th,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsSection {
    pub k_p: f64,
    pub k_p_lat: f64,
    pub k_p_heading: f64,
}

impl Default for GainsSection {
    fn default() -> Self {
        let g = ControlGains::default();
        GainsSection {
            k_p: g.k_p,
            k_p_lat: g.k_p_lat,
            k_p_heading: g.k_p_heading,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub tabular_alpha: f64,
    pub nn_lr: f64,
    pub batch: usize,
    pub target_sync_steps: u64,
    pub buffer_capacity: usize,
    pub hidden_width: usize,
    pub dueling_agg: DuelingAgg,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
}

impl Default for AgentSection {
    fn default() -> Self {
        let a = AgentConfig::default();
        AgentSection {
            algorithm: a.algorithm,
            gamma: a.gamma,
            tabular_alpha: a.tabular_alpha,
            nn_lr: a.nn_lr,
            batch: a.batch,
            target_sync_steps: a.target_sync_steps,
            buffer_capacity: a.buffer_capacity,
            hidden_width: a.hidden_width,
            dueling_agg: a.dueling_agg,
            epsilon_start: a.epsilon.start,
            epsilon_end: a.epsilon.end,
            epsilon_decay_steps: a.epsilon.decay_steps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub episodes: u32,
    pub checkpoint_every: u32,
    pub eval_episodes: u32,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            episodes: 2000,
            checkpoint_every: 100,
            eval_episodes: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub write_checkpoints: bool,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            write_checkpoints: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvSection,
    pub idm: IdmSection,
    pub mobil: MobilSection,
    pub gains: GainsSection,
    pub agent: AgentSection,
    pub train: TrainSection,
    pub io: IoSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.env_config(self.train.seed)?.validate()?;
        self.agent_config()?.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn env_config(&self, seed: u64) -> Result<EnvConfig> {
        let e = &self.env;
        Ok(EnvConfig {
            policy_hz: e.policy_hz,
            sim_hz: e.sim_hz,
            horizon_s: e.horizon_s,
            speed_step: e.speed_step,
            neighbors_k: e.neighbors_k,
            obs_signed: e.obs_signed,
            destination_m: e.destination_m,
            scenario: ScenarioConfig {
                vehicles_per_lane: e.vehicles_per_lane,
                ego_speed_range: (e.ego_speed_min, e.ego_speed_max),
                surrounding_speed_range: (e.surrounding_speed_min, e.surrounding_speed_max),
                spacing_range: (e.spacing_min, e.spacing_max),
                seed,
            },
            road: RoadConfig {
                lane_count: e.lane_count,
                lane_width: e.lane_width,
            },
            reward: Default::default(),
        })
    }

    pub fn driver_params(&self) -> DriverParams {
        DriverParams {
            idm: IdmParams {
                a_max: self.idm.a_max,
                delta: self.idm.delta,
                time_gap: self.idm.time_gap,
                b_comfort: self.idm.b_comfort,
                d0: self.idm.d0,
                v_tar: 25.0,
                formula_mode: self.idm.formula_mode,
            },
            mobil: MobilParams {
                politeness: self.mobil.politeness,
                b_safe: self.mobil.b_safe,
                a_th: self.mobil.a_th,
            },
            gains: ControlGains {
                k_p: self.gains.k_p,
                k_p_lat: self.gains.k_p_lat,
                k_p_heading: self.gains.k_p_heading,
            },
        }
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        let a = &self.agent;
        Ok(AgentConfig {
            algorithm: a.algorithm,
            gamma: a.gamma,
            tabular_alpha: a.tabular_alpha,
            nn_lr: a.nn_lr,
            batch: a.batch,
            target_sync_steps: a.target_sync_steps,
            buffer_capacity: a.buffer_capacity,
            episodes: self.train.episodes,
            hidden_width: a.hidden_width,
            dueling_agg: a.dueling_agg,
            epsilon: EpsilonSchedule {
                start: a.epsilon_start,
                end: a.epsilon_end,
                decay_steps: a.epsilon_decay_steps,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_echo() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let echoed = cfg.to_toml();
        let back = RunConfig::parse(&echoed).unwrap();
        assert_eq!(echoed, back.to_toml());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::parse("[idm]\nnot_a_key = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::parse(
            "[env]\nvehicles_per_lane = 3\n\n[agent]\nalgorithm = \"dqn\"\nnn_lr = 1e-3\n",
        )
        .unwrap();
        assert_eq!(cfg.env.vehicles_per_lane, 3);
        assert_eq!(cfg.agent.algorithm, Algorithm::Dqn);
        assert_eq!(cfg.agent.nn_lr, 1e-3);
        // untouched sections keep their defaults
        assert_eq!(cfg.idm.a_max, 6.0);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(RunConfig::parse("[agent]\ngamma = 1.5\n").is_err());
        assert!(RunConfig::parse("[env]\npolicy_hz = 3\n").is_err());
        assert!(RunConfig::parse("[env]\nsim_hz = 0\n").is_err());
    }
}
