//! Learning algorithms and training loops: tabular Q-learning, DQN and
//! dueling-DQN with replay and a target network, plus the evaluation
//! protocol shared by all policies.

use std::collections::HashMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{self, DriverParams, IdmParams};
use crate::env::{EnvConfig, HighwayEnv, MetaAction};
use crate::error::{Error, Result};
use crate::gridworld::{Gridworld, GRID_ACTIONS};
use crate::neural::{argmax_action, td_target, DuelingAgg, QGrads, QNetwork};
use crate::sim::V_MAX;

#[derive(Debug, Clone)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// Ring buffer with FIFO eviction; sampling is uniform with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        ReplayBuffer {
            capacity,
            storage: Vec::with_capacity(capacity.min(4096)),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample(&self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<&Transition>> {
        if self.storage.len() < batch {
            return Err(Error::State(format!(
                "replay buffer holds {} transitions, need {batch}",
                self.storage.len()
            )));
        }
        Ok((0..batch)
            .map(|_| &self.storage[rng.gen_range(0..self.storage.len())])
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            decay_steps: 6000,
        }
    }
}

/// Linear interpolation start -> end over decay_steps, constant afterward.
pub fn epsilon(step: u64, sched: &EpsilonSchedule) -> f64 {
    if sched.decay_steps == 0 || step >= sched.decay_steps {
        return sched.end;
    }
    let frac = step as f64 / sched.decay_steps as f64;
    sched.start + (sched.end - sched.start) * frac
}

/// Epsilon-greedy selection. Both rng draws happen on every call so the
/// stream position is independent of which branch is taken.
pub fn select_action(q_values: &[f64], eps: f64, rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let random_pick = rng.gen_range(0..q_values.len());
    if u < eps {
        random_pick
    } else {
        argmax_action(q_values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Tabular,
    Dqn,
    Ddqn,
    Reference,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Tabular => "tabular",
            Algorithm::Dqn => "dqn",
            Algorithm::Ddqn => "ddqn",
            Algorithm::Reference => "reference",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    /// Learning rate of the tabular update.
    pub tabular_alpha: f64,
    /// Network learning rate; the tabular-scale 0.2 diverges on weights,
    /// so the network default is separate.
    pub nn_lr: f64,
    pub batch: usize,
    pub target_sync_steps: u64,
    pub buffer_capacity: usize,
    pub episodes: u32,
    pub hidden_width: usize,
    pub dueling_agg: DuelingAgg,
    pub epsilon: EpsilonSchedule,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            algorithm: Algorithm::Ddqn,
            gamma: 0.8,
            tabular_alpha: 0.2,
            nn_lr: 5e-4,
            batch: 32,
            target_sync_steps: 500,
            buffer_capacity: 10_000,
            episodes: 2000,
            hidden_width: 128,
            dueling_agg: DuelingAgg::Max,
            epsilon: EpsilonSchedule::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must be in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.tabular_alpha) {
            return Err(Error::Config("tabular_alpha must be in [0, 1]".into()));
        }
        if self.batch == 0 || self.batch > self.buffer_capacity {
            return Err(Error::Config("batch must be in 1..=buffer_capacity".into()));
        }
        if self.epsilon.start < self.epsilon.end || self.epsilon.end < 0.0 {
            return Err(Error::Config("epsilon schedule must satisfy start >= end >= 0".into()));
        }
        Ok(())
    }
}

/// Action-value map with a zero default, used by the tabular baseline.
#[derive(Debug, Clone, Default)]
pub struct QTable {
    values: HashMap<usize, Vec<f64>>,
    pub n_actions: usize,
}

impl QTable {
    pub fn new(n_actions: usize) -> QTable {
        QTable {
            values: HashMap::new(),
            n_actions,
        }
    }

    pub fn q(&self, s: usize) -> Vec<f64> {
        self.values
            .get(&s)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.n_actions])
    }

    pub fn greedy(&self, s: usize) -> usize {
        argmax_action(&self.q(s))
    }
}

/// One Q-learning backup. A terminal next state contributes no bootstrap.
pub fn tabular_q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: Option<usize>,
    alpha: f64,
    gamma: f64,
) {
    let bootstrap = match s_next {
        Some(sn) => {
            let row = q.q(sn);
            row[argmax_action(&row)]
        }
        None => 0.0,
    };
    let n = q.n_actions;
    let row = q.values.entry(s).or_insert_with(|| vec![0.0; n]);
    row[a] += alpha * (r + gamma * bootstrap - row[a]);
}

/// Epsilon-greedy tabular Q-learning on the gridworld, with uniformly random
/// start states so every state is visited.
pub fn train_tabular_gridworld(
    grid: &Gridworld,
    episodes: u32,
    alpha: f64,
    gamma: f64,
    eps: f64,
    seed: u64,
) -> QTable {
    let mut q = QTable::new(GRID_ACTIONS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_steps = 4 * grid.n_states();
    for _ in 0..episodes {
        let mut s = rng.gen_range(0..grid.n_states());
        if s == grid.goal {
            continue;
        }
        for _ in 0..max_steps {
            let a = select_action(&q.q(s), eps, &mut rng);
            let (sn, r, done) = grid.step(s, a);
            tabular_q_update(&mut q, s, a, r, (!done).then_some(sn), alpha, gamma);
            if done {
                break;
            }
            s = sn;
        }
    }
    q
}

/// Online/target parameter pair plus the optimization hyperparameters.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: QNetwork,
    pub target: QNetwork,
    pub gamma: f64,
    pub lr: f64,
}

impl DqnAgent {
    pub fn new(online: QNetwork, gamma: f64, lr: f64) -> DqnAgent {
        let target = online.clone();
        DqnAgent {
            online,
            target,
            gamma,
            lr,
        }
    }
}

/// One gradient step on a replay batch. Targets come from the target
/// network; only the online parameters move. Returns (pre-update batch
/// loss, mean absolute TD error).
pub fn train_step(agent: &mut DqnAgent, batch: &[&Transition]) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let n = batch.len() as f64;
    let mut grads: Option<QGrads> = None;
    let mut loss = 0.0;
    let mut abs_td = 0.0;
    for t in batch {
        let (q, cache) = agent.online.forward(&t.s)?;
        let pred = q[t.a];
        let y = if t.done {
            t.r
        } else {
            td_target(t.r, &agent.target.q_values(&t.s_next)?, agent.gamma, false)
        };
        let err = pred - y;
        loss += err * err / n;
        abs_td += err.abs() / n;
        let mut upstream = vec![0.0; q.len()];
        upstream[t.a] = 2.0 * err / n;
        let g = agent.online.backward(&cache, &upstream)?;
        match grads.as_mut() {
            Some(total) => total.add(&g),
            None => grads = Some(g),
        }
    }
    agent.online.sgd_step(&grads.expect("non-empty batch"), agent.lr)?;
    Ok((loss, abs_td))
}

/// Copy the online parameters into the target network, bit-exact.
pub fn sync_target(agent: &mut DqnAgent) {
    agent.target = agent.online.clone();
}

/// A runnable decision policy: the rule-based benchmark or a greedy network.
#[derive(Debug, Clone)]
pub enum Policy {
    Reference,
    Greedy(QNetwork),
}

impl Policy {
    pub fn act(&self, env: &HighwayEnv, obs: &[f64]) -> Result<MetaAction> {
        match self {
            Policy::Reference => Ok(reference_action(env)),
            Policy::Greedy(net) => MetaAction::from_ordinal(argmax_action(&net.q_values(obs)?)),
        }
    }
}

/// Map the IDM + MOBIL stack onto the discrete action set: lane decisions
/// pass through, and the IDM acceleration demand (toward the road speed
/// limit) selects faster / slower / idle.
pub fn reference_action(env: &HighwayEnv) -> MetaAction {
    let world = env.world();
    let params = env.params();
    let ego = world.ego();
    let decision = driver::mobil_decision(world, ego.id, &params.idm, &params.mobil);
    match decision.choice {
        driver::LaneChoice::Left => return MetaAction::LaneLeft,
        driver::LaneChoice::Right => return MetaAction::LaneRight,
        driver::LaneChoice::Keep => {}
    }
    let p = IdmParams {
        v_tar: V_MAX,
        ..params.idm
    };
    let leader = world.leader_in_lane(ego.id, ego.target_lane);
    let demand = match leader {
        None => driver::idm_acceleration(ego.v1, 0.0, None, &p),
        Some(l) => {
            let gap = l.x - ego.x - (l.length + ego.length) / 2.0;
            if gap <= 0.0 {
                Ok(-p.a_max)
            } else {
                driver::idm_acceleration(ego.v1, ego.v1 - l.v1, Some(gap), &p)
            }
        }
    }
    .unwrap_or(0.0);
    let th = params.mobil.a_th;
    if demand > th && env.ego_target_speed() < V_MAX {
        MetaAction::Faster
    } else if demand < -th {
        MetaAction::Slower
    } else {
        MetaAction::Idle
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: u32,
    pub ret: f64,
    pub ret_norm: f64,
    pub steps: u32,
    pub collision: bool,
    pub mean_speed: f64,
    pub distance: f64,
    pub epsilon: f64,
    pub mean_td_error: f64,
}

/// Min-max normalization of episode returns over one run.
pub fn normalize_returns(metrics: &mut [EpisodeMetrics]) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in metrics.iter() {
        lo = lo.min(m.ret);
        hi = hi.max(m.ret);
    }
    for m in metrics.iter_mut() {
        m.ret_norm = if hi > lo { (m.ret - lo) / (hi - lo) } else { 0.0 };
    }
}

pub struct CheckpointSink {
    pub dir: PathBuf,
    pub every: u32,
    pub algorithm: Algorithm,
}

pub struct TrainResult {
    pub policy: Policy,
    pub metrics: Vec<EpisodeMetrics>,
}

/// Full training run: seeded episode loop, epsilon-greedy interaction,
/// replay, one gradient step per policy step after warm-up, periodic target
/// sync. Bitwise reproducible for a given master seed.
pub fn run_training(
    cfg: &AgentConfig,
    env_cfg: &EnvConfig,
    params: &DriverParams,
    master_seed: u64,
    checkpoints: Option<&CheckpointSink>,
) -> Result<TrainResult> {
    cfg.validate()?;
    env_cfg.validate()?;
    let mut seed_rng = ChaCha8Rng::seed_from_u64(master_seed);
    let net_seed: u64 = seed_rng.gen();
    let mut action_rng = ChaCha8Rng::seed_from_u64(seed_rng.gen());

    let obs_len = env_cfg.observation_len();
    let actions = crate::env::action_count();
    let mut agent = match cfg.algorithm {
        Algorithm::Dqn => Some(DqnAgent::new(
            QNetwork::new_dqn(obs_len, cfg.hidden_width, actions, net_seed),
            cfg.gamma,
            cfg.nn_lr,
        )),
        Algorithm::Ddqn => Some(DqnAgent::new(
            QNetwork::new_dueling(obs_len, cfg.hidden_width, actions, cfg.dueling_agg, net_seed),
            cfg.gamma,
            cfg.nn_lr,
        )),
        Algorithm::Reference => None,
        Algorithm::Tabular => {
            return Err(Error::Config(
                "the tabular algorithm targets the gridworld oracle, not the highway".into(),
            ))
        }
    };

    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut metrics = Vec::with_capacity(cfg.episodes as usize);
    let mut global_step: u64 = 0;
    let mut grad_steps: u64 = 0;

    for episode in 0..cfg.episodes {
        let env_seed: u64 = seed_rng.gen();
        let (mut env, mut obs) = HighwayEnv::new(env_cfg.clone(), params.clone(), env_seed)?;
        let mut ret = 0.0;
        let mut steps = 0u32;
        let mut collision = false;
        let mut speed_sum = 0.0;
        let mut distance;
        let ep_eps = epsilon(global_step, &cfg.epsilon);
        let mut td_sum = 0.0;
        let mut td_count = 0u32;

        loop {
            let action = match agent.as_ref() {
                None => reference_action(&env),
                Some(a) => {
                    let q = a.online.q_values(&obs)?;
                    let eps = epsilon(global_step, &cfg.epsilon);
                    MetaAction::from_ordinal(select_action(&q, eps, &mut action_rng))?
                }
            };
            let (obs_next, r, done, info) = env.step(action)?;
            if let Some(a) = agent.as_mut() {
                buffer.push(Transition {
                    s: obs.clone(),
                    a: action.ordinal(),
                    r,
                    s_next: obs_next.clone(),
                    done,
                });
                if buffer.len() >= cfg.batch {
                    let batch = buffer.sample(cfg.batch, &mut action_rng)?;
                    let (_, td) = train_step(a, &batch)?;
                    td_sum += td;
                    td_count += 1;
                    grad_steps += 1;
                    if cfg.target_sync_steps > 0 && grad_steps.is_multiple_of(cfg.target_sync_steps) {
                        sync_target(a);
                    }
                }
            }
            global_step += 1;
            ret += r;
            steps += 1;
            speed_sum += info.ego_speed;
            distance = info.distance;
            collision |= info.collided;
            obs = obs_next;
            if done {
                break;
            }
        }

        metrics.push(EpisodeMetrics {
            episode,
            ret,
            ret_norm: 0.0,
            steps,
            collision,
            mean_speed: if steps > 0 { speed_sum / steps as f64 } else { 0.0 },
            distance,
            epsilon: ep_eps,
            mean_td_error: if td_count > 0 { td_sum / td_count as f64 } else { 0.0 },
        });

        if let (Some(sink), Some(a)) = (checkpoints, agent.as_ref()) {
            if sink.every > 0 && (episode + 1) % sink.every == 0 {
                let path = sink.dir.join(format!("ep-{:04}.w", episode + 1));
                crate::weights::save_weights(&path, sink.algorithm, &a.online)?;
            }
        }
    }
    normalize_returns(&mut metrics);

    let policy = match agent {
        Some(a) => Policy::Greedy(a.online),
        None => Policy::Reference,
    };
    Ok(TrainResult { policy, metrics })
}

/// Greedy evaluation over fresh seeded episodes; no learning side effects.
pub fn evaluate(
    policy: &Policy,
    env_cfg: &EnvConfig,
    params: &DriverParams,
    n_episodes: u32,
    master_seed: u64,
) -> Result<Vec<EpisodeMetrics>> {
    env_cfg.validate()?;
    let mut seed_rng = ChaCha8Rng::seed_from_u64(master_seed);
    let mut metrics = Vec::with_capacity(n_episodes as usize);
    for episode in 0..n_episodes {
        let env_seed: u64 = seed_rng.gen();
        let (mut env, mut obs) = HighwayEnv::new(env_cfg.clone(), params.clone(), env_seed)?;
        let mut ret = 0.0;
        let mut steps = 0u32;
        let mut collision = false;
        let mut speed_sum = 0.0;
        let mut distance;
        loop {
            let action = policy.act(&env, &obs)?;
            let (obs_next, r, done, info) = env.step(action)?;
            ret += r;
            steps += 1;
            speed_sum += info.ego_speed;
            distance = info.distance;
            collision |= info.collided;
            obs = obs_next;
            if done {
                break;
            }
        }
        metrics.push(EpisodeMetrics {
            episode,
            ret,
            ret_norm: 0.0,
            steps,
            collision,
            mean_speed: if steps > 0 { speed_sum / steps as f64 } else { 0.0 },
            distance,
            epsilon: 0.0,
            mean_td_error: 0.0,
        });
    }
    normalize_returns(&mut metrics);
    Ok(metrics)
}
