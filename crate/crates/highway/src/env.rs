//! Discrete-action MDP facade over the simulator: meta-actions at 1 Hz over
//! 20 Hz simulation ticks, observation construction, and the reward.

use serde::{Deserialize, Serialize};

use crate::driver::{self, DriverParams};
use crate::error::{Error, Result};
use crate::sim::{
    self, RoadConfig, Role, ScenarioConfig, StepEvents, TerminationCause, WorldState, V_MAX,
};
use crate::trace::TraceRecord;

/// The five discrete decisions, indexed 1..5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetaAction {
    LaneLeft = 1,
    Idle = 2,
    LaneRight = 3,
    Faster = 4,
    Slower = 5,
}

pub const ACTIONS: [MetaAction; 5] = [
    MetaAction::LaneLeft,
    MetaAction::Idle,
    MetaAction::LaneRight,
    MetaAction::Faster,
    MetaAction::Slower,
];

pub fn action_count() -> usize {
    ACTIONS.len()
}

impl MetaAction {
    /// 1-based index used in traces and action-sequence output.
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: u8) -> Result<MetaAction> {
        match index {
            1 => Ok(MetaAction::LaneLeft),
            2 => Ok(MetaAction::Idle),
            3 => Ok(MetaAction::LaneRight),
            4 => Ok(MetaAction::Faster),
            5 => Ok(MetaAction::Slower),
            _ => Err(Error::InvalidInput(format!("action index {index} out of 1..=5"))),
        }
    }

    /// 0-based index used for network outputs and replay storage.
    pub fn ordinal(self) -> usize {
        self as usize - 1
    }

    pub fn from_ordinal(ordinal: usize) -> Result<MetaAction> {
        MetaAction::from_index(ordinal as u8 + 1)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardParams {
    pub w_collision: f64,
    pub w_speed: f64,
    pub w_lane: f64,
    pub v_max: f64,
    pub preferred_lane: u32,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            w_collision: 1.0,
            w_speed: 0.1,
            w_lane: 0.4,
            v_max: V_MAX,
            preferred_lane: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    pub policy_hz: u32,
    pub sim_hz: u32,
    pub horizon_s: f64,
    /// Target-speed increment of the faster/slower actions (m/s).
    pub speed_step: f64,
    /// Number of tracked neighbors in the observation.
    pub neighbors_k: usize,
    /// Signed relative features; false reproduces the absolute-value form.
    pub obs_signed: bool,
    /// Optional distance-based destination (m); off by default.
    pub destination_m: Option<f64>,
    pub scenario: ScenarioConfig,
    pub road: RoadConfig,
    pub reward: RewardParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            policy_hz: 1,
            sim_hz: 20,
            horizon_s: 100.0,
            speed_step: 5.0,
            neighbors_k: 5,
            obs_signed: true,
            destination_m: None,
            scenario: ScenarioConfig::default(),
            road: RoadConfig::default(),
            reward: RewardParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        self.scenario.validate()?;
        if self.policy_hz == 0 || self.sim_hz == 0 || !self.sim_hz.is_multiple_of(self.policy_hz) {
            return Err(Error::Config(
                "sim_hz must be a positive multiple of policy_hz".into(),
            ));
        }
        let steps = self.horizon_s * self.policy_hz as f64;
        if !(steps.is_finite() && steps > 0.0 && steps.fract() == 0.0) {
            return Err(Error::Config(
                "horizon_s * policy_hz must be a positive integer".into(),
            ));
        }
        Ok(())
    }

    pub fn ticks_per_policy_step(&self) -> u32 {
        self.sim_hz / self.policy_hz
    }

    pub fn max_policy_steps(&self) -> u32 {
        (self.horizon_s * self.policy_hz as f64) as u32
    }

    pub fn observation_len(&self) -> usize {
        3 + 4 * self.neighbors_k
    }
}

/// Flat observation: ego block [v1/40, (lane-1)/2, lateral offset/lane_width]
/// then per neighbor, nearest first: [present, dd/100, dv/40, dlane/2].
pub fn observe(world: &WorldState, cfg: &EnvConfig) -> Vec<f64> {
    let ego = world.ego();
    let mut obs = Vec::with_capacity(cfg.observation_len());
    obs.push(ego.v1 / V_MAX);
    obs.push((ego.lane as f64 - 1.0) / 2.0);
    obs.push((ego.y - world.road.lane_center(ego.lane)) / world.road.lane_width);

    let mut neighbors: Vec<&sim::VehicleState> = world
        .vehicles
        .iter()
        .filter(|v| v.role == Role::Surrounding)
        .collect();
    neighbors.sort_by(|a, b| {
        let da = (a.x - ego.x).abs();
        let db = (b.x - ego.x).abs();
        da.partial_cmp(&db).unwrap().then(a.id.cmp(&b.id))
    });
    for i in 0..cfg.neighbors_k {
        match neighbors.get(i) {
            Some(n) => {
                let dd = (n.x - ego.x) / 100.0;
                let dv = (n.v1 - ego.v1) / V_MAX;
                let dlane = (n.lane as f64 - ego.lane as f64) / 2.0;
                obs.push(1.0);
                if cfg.obs_signed {
                    obs.push(dd);
                    obs.push(dv);
                } else {
                    obs.push(dd.abs());
                    obs.push(dv.abs());
                }
                obs.push(dlane);
            }
            None => obs.extend_from_slice(&[0.0; 4]),
        }
    }
    obs
}

/// Instantaneous reward: collision, squared speed shortfall, squared lane
/// offset from the preferred lane. Always <= 0.
pub fn reward(world: &WorldState, collided: bool, p: &RewardParams) -> f64 {
    let ego = world.ego();
    let speed_term = (ego.v1 - p.v_max).powi(2);
    let lane_term = (ego.lane as f64 - p.preferred_lane as f64).powi(2);
    -p.w_collision * (collided as u8 as f64) - p.w_speed * speed_term - p.w_lane * lane_term
}

/// Discounted forward return of a reward sequence.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(0.0, |acc, r| r + gamma * acc)
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub cause: Option<TerminationCause>,
    pub ego_speed: f64,
    pub distance: f64,
    pub collided: bool,
}

pub struct HighwayEnv {
    cfg: EnvConfig,
    params: DriverParams,
    world: WorldState,
    ego_target_speed: f64,
    ego_target_lane: u32,
    policy_step: u32,
    done: bool,
    /// Per-tick trace rows, collected only when enabled.
    trace: Option<Vec<TraceRecord>>,
}

impl HighwayEnv {
    pub fn new(cfg: EnvConfig, params: DriverParams, seed: u64) -> Result<(Self, Vec<f64>)> {
        cfg.validate()?;
        let mut scenario = cfg.scenario.clone();
        scenario.seed = seed;
        let world = sim::spawn_scenario(
            &cfg.road,
            &scenario,
            cfg.sim_hz,
            cfg.ticks_per_policy_step(),
        )?;
        let ego = world.ego();
        let env = HighwayEnv {
            ego_target_speed: ego.v1,
            ego_target_lane: ego.lane,
            policy_step: 0,
            done: false,
            trace: None,
            cfg,
            params,
            world,
        };
        let obs = observe(&env.world, &env.cfg);
        Ok((env, obs))
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<TraceRecord> {
        self.trace.take().unwrap_or_default()
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn params(&self) -> &DriverParams {
        &self.params
    }

    pub fn ego_target_speed(&self) -> f64 {
        self.ego_target_speed
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn observation(&self) -> Vec<f64> {
        observe(&self.world, &self.cfg)
    }

    /// Apply one meta-action: retarget, run one policy step of sub-ticks with
    /// the lower-level controllers, then score the post-step state.
    pub fn step(&mut self, action: MetaAction) -> Result<(Vec<f64>, f64, bool, StepInfo)> {
        if self.done {
            return Err(Error::State("episode is finished".into()));
        }
        match action {
            MetaAction::Faster => {
                self.ego_target_speed = (self.ego_target_speed + self.cfg.speed_step).min(V_MAX)
            }
            MetaAction::Slower => {
                self.ego_target_speed = (self.ego_target_speed - self.cfg.speed_step).max(0.0)
            }
            MetaAction::LaneLeft => self.ego_target_lane = self.ego_target_lane.max(2) - 1,
            MetaAction::LaneRight => {
                self.ego_target_lane = (self.ego_target_lane + 1).min(self.cfg.road.lane_count)
            }
            MetaAction::Idle => {}
        }
        self.world.ego_mut().target_lane = self.ego_target_lane;
        self.world.ego_mut().target_speed = self.ego_target_speed;

        let dt = 1.0 / self.cfg.sim_hz as f64;
        let mut events = StepEvents::default();
        let row_start = self.trace.as_ref().map(|t| t.len());
        for _ in 0..self.cfg.ticks_per_policy_step() {
            let ego = self.world.ego();
            let a1 = driver::longitudinal_control(self.ego_target_speed, ego.v1, &self.params.gains);
            let yaw = driver::lateral_control(
                ego.y,
                self.cfg.road.lane_center(self.ego_target_lane),
                ego.heading,
                ego.v1,
                &self.params.gains,
            );
            let ev = sim::advance_world(&mut self.world, (a1, yaw), dt, &self.params)?;
            let collided = ev.ego_collision;
            events.ego_collision |= ev.ego_collision;
            events.collision_pairs.extend(ev.collision_pairs);
            if let Some(rows) = self.trace.as_mut() {
                for v in &self.world.vehicles {
                    rows.push(TraceRecord {
                        tick: self.world.tick,
                        time: self.world.time(),
                        vehicle_id: v.id,
                        role: v.role,
                        x: v.x,
                        y: v.y,
                        v1: v.v1,
                        lane: v.lane,
                        heading: v.heading,
                        action: (v.role == Role::Ego).then_some(action.index()),
                        reward: 0.0,
                        done: false,
                    });
                }
            }
            if collided {
                break;
            }
        }

        self.policy_step += 1;
        let r = reward(&self.world, events.ego_collision, &self.cfg.reward);

        let horizon_hit = self.policy_step >= self.cfg.max_policy_steps();
        let destination_hit = self
            .cfg
            .destination_m
            .map(|d| self.world.ego().x >= d)
            .unwrap_or(false);
        let mut cause = None;
        if events.ego_collision {
            cause = Some(TerminationCause::Collision);
        } else if horizon_hit || destination_hit {
            cause = Some(TerminationCause::Horizon);
            self.world.terminated = Some(TerminationCause::Horizon);
        }
        self.done = cause.is_some();

        if let (Some(rows), Some(start)) = (self.trace.as_mut(), row_start) {
            for row in &mut rows[start..] {
                row.reward = r;
            }
            if self.done {
                if let Some(last) = rows.last_mut() {
                    last.done = true;
                }
            }
        }

        let ego = self.world.ego();
        let info = StepInfo {
            cause,
            ego_speed: ego.v1,
            distance: ego.x,
            collided: events.ego_collision,
        };
        Ok((observe(&self.world, &self.cfg), r, self.done, info))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_with(m: u32, seed: u64) -> (HighwayEnv, Vec<f64>) {
        let cfg = EnvConfig {
            scenario: ScenarioConfig {
                vehicles_per_lane: m,
                ..Default::default()
            },
            ..Default::default()
        };
        HighwayEnv::new(cfg, DriverParams::default(), seed).unwrap()
    }

    #[test]
    fn reset_determinism_and_length() {
        let (_, o1) = env_with(10, 5);
        let (_, o2) = env_with(10, 5);
        assert_eq!(o1, o2);
        assert_eq!(o1.len(), 23);
    }

    #[test]
    fn empty_road_neighbor_rows_zero() {
        let (_, obs) = env_with(0, 5);
        assert!(obs[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn observe_normalization() {
        let (mut env, _) = env_with(0, 5);
        {
            let road = env.cfg.road;
            let ego = env.world.ego_mut();
            ego.v1 = 40.0;
            ego.y = road.lane_center(1);
            ego.lane = 1;
        }
        let obs = env.observation();
        assert_eq!(&obs[..3], &[1.0, 0.0, 0.0]);

        // one neighbor at +50 m, 5 m/s slower, same lane
        let road = env.cfg.road;
        let mut n = sim::VehicleState::new(1, Role::Surrounding, 50.0, 1, 35.0, &road);
        n.lane = 1;
        env.world.vehicles.push(n);
        let obs = env.observation();
        assert_eq!(&obs[3..7], &[1.0, 0.5, -0.125, 0.0]);

        env.cfg.obs_signed = false;
        let obs_abs = env.observation();
        assert_eq!(&obs_abs[3..7], &[1.0, 0.5, 0.125, 0.0]);
    }

    #[test]
    fn reward_structure() {
        let (mut env, _) = env_with(0, 5);
        let road = env.cfg.road;
        {
            let ego = env.world.ego_mut();
            ego.v1 = 40.0;
            ego.y = road.lane_center(1);
            ego.lane = 1;
        }
        let p = RewardParams::default();
        assert_eq!(reward(&env.world, false, &p), 0.0);
        assert_eq!(reward(&env.world, true, &p), -1.0);
        {
            let ego = env.world.ego_mut();
            ego.v1 = 38.0;
            ego.y = road.lane_center(3);
            ego.lane = 3;
        }
        let r = reward(&env.world, false, &p);
        assert!((r - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn edge_lane_clamp() {
        let (mut env, _) = env_with(0, 5);
        env.ego_target_lane = 1;
        env.world.ego_mut().target_lane = 1;
        env.step(MetaAction::LaneLeft).unwrap();
        assert_eq!(env.ego_target_lane, 1);
    }

    #[test]
    fn horizon_termination() {
        let (mut env, _) = env_with(0, 5);
        let mut done = false;
        let mut steps = 0;
        while !done {
            let (_, _, d, info) = env.step(MetaAction::Idle).unwrap();
            done = d;
            steps += 1;
            if done {
                assert_eq!(info.cause, Some(TerminationCause::Horizon));
            }
        }
        assert_eq!(steps, 100);
        assert!(env.step(MetaAction::Idle).is_err());
    }

    #[test]
    fn idle_equilibrium() {
        let (mut env, _) = env_with(0, 5);
        let v0 = env.ego_target_speed;
        env.world.ego_mut().v1 = v0;
        env.step(MetaAction::Idle).unwrap();
        env.step(MetaAction::Idle).unwrap();
        assert!((env.world.ego().v1 - v0).abs() < 1e-6);
    }

    #[test]
    fn action_indexing() {
        assert_eq!(action_count(), 5);
        for i in 1..=5u8 {
            assert_eq!(MetaAction::from_index(i).unwrap().index(), i);
        }
        assert!(MetaAction::from_index(0).is_err());
        assert!(MetaAction::from_index(6).is_err());
    }

    #[test]
    fn discounted_return_values() {
        assert_eq!(discounted_return(&[1.0], 0.5), 1.0);
        assert!((discounted_return(&[1.0, 1.0], 0.8) - 1.8).abs() < 1e-12);
        assert_eq!(discounted_return(&[3.0, 7.0], 0.0), 3.0);
    }
}
