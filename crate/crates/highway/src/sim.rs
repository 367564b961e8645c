//! Deterministic world model: kinematics, scenario generation, collision
//! detection, and tick-level world advancement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{self, DriverParams};
use crate::error::{Error, Result};

/// Hard longitudinal speed bound for every vehicle (m/s).
pub const V_MAX: f64 = 40.0;
/// Heading bound (rad).
pub const HEADING_MAX: f64 = std::f64::consts::FRAC_PI_4;
pub const VEHICLE_LENGTH: f64 = 5.0;
pub const VEHICLE_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ego,
    Surrounding,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    pub role: Role,
    /// Longitudinal position (m).
    pub x: f64,
    /// Lateral position (m); 0 is the center of lane 1.
    pub y: f64,
    /// Longitudinal speed (m/s), clamped to [0, V_MAX].
    pub v1: f64,
    /// Lateral speed (m/s), slaved to the heading (v2 = v1 sin heading).
    pub v2: f64,
    /// Heading angle (rad), |heading| <= pi/4.
    pub heading: f64,
    /// Lane index 1..lane_count, nearest to y.
    pub lane: u32,
    pub length: f64,
    pub width: f64,
    /// Lane the vehicle is currently steering toward.
    pub target_lane: u32,
    /// Speed the lower-level controller tracks (m/s).
    pub target_speed: f64,
}

impl VehicleState {
    pub fn new(id: u32, role: Role, x: f64, lane: u32, v1: f64, road: &RoadConfig) -> Self {
        VehicleState {
            id,
            role,
            x,
            y: road.lane_center(lane),
            v1,
            v2: 0.0,
            heading: 0.0,
            lane,
            length: VEHICLE_LENGTH,
            width: VEHICLE_WIDTH,
            target_lane: lane,
            target_speed: v1,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RoadConfig {
    pub lane_count: u32,
    pub lane_width: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        RoadConfig {
            lane_count: 3,
            lane_width: 4.0,
        }
    }
}

impl RoadConfig {
    /// Center of lane `lane` (1-based); lane 1 is at y = 0.
    pub fn lane_center(&self, lane: u32) -> f64 {
        (lane as f64 - 1.0) * self.lane_width
    }

    /// Nearest lane index to the lateral position `y`.
    pub fn lane_of(&self, y: f64) -> u32 {
        let idx = (y / self.lane_width).round() as i64 + 1;
        idx.clamp(1, self.lane_count as i64) as u32
    }

    pub fn validate(&self) -> Result<()> {
        if self.lane_count < 2 {
            return Err(Error::Config("lane_count must be >= 2".into()));
        }
        if self.lane_width <= VEHICLE_WIDTH {
            return Err(Error::Config(
                "lane_width must exceed the vehicle width".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// M vehicles per lane, 3M surrounding vehicles in total.
    pub vehicles_per_lane: u32,
    pub ego_speed_range: (f64, f64),
    pub surrounding_speed_range: (f64, f64),
    /// Consecutive longitudinal gaps are sampled from this range (m).
    pub spacing_range: (f64, f64),
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            vehicles_per_lane: 10,
            ego_speed_range: (23.0, 25.0),
            surrounding_speed_range: (20.0, 23.0),
            spacing_range: (25.0, 60.0),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            self.ego_speed_range,
            self.surrounding_speed_range,
            self.spacing_range,
        ];
        for (lo, hi) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config("malformed range in scenario config".into()));
            }
        }
        for (lo, hi) in [self.ego_speed_range, self.surrounding_speed_range] {
            if lo < 0.0 || hi > V_MAX {
                return Err(Error::Config("speed range outside [0, 40] m/s".into()));
            }
        }
        if self.vehicles_per_lane > 0 && self.spacing_range.0 <= VEHICLE_LENGTH {
            return Err(Error::Config(
                "minimum spacing must exceed the vehicle length".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationCause {
    Collision,
    Horizon,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub tick: u64,
    pub sim_hz: u32,
    /// Ticks between lane-decision (MOBIL) evaluations for surrounding cars.
    pub decision_period: u32,
    pub road: RoadConfig,
    pub vehicles: Vec<VehicleState>,
    pub seed: u64,
    pub terminated: Option<TerminationCause>,
    pub rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Default)]
pub struct StepEvents {
    pub ego_collision: bool,
    pub collision_pairs: Vec<(u32, u32)>,
}

impl StepEvents {
    fn merge(&mut self, other: StepEvents) {
        self.ego_collision |= other.ego_collision;
        self.collision_pairs.extend(other.collision_pairs);
    }
}

impl WorldState {
    pub fn time(&self) -> f64 {
        self.tick as f64 / self.sim_hz as f64
    }

    pub fn ego(&self) -> &VehicleState {
        self.vehicles
            .iter()
            .find(|v| v.role == Role::Ego)
            .expect("world has an ego vehicle")
    }

    pub fn ego_mut(&mut self) -> &mut VehicleState {
        self.vehicles
            .iter_mut()
            .find(|v| v.role == Role::Ego)
            .expect("world has an ego vehicle")
    }

    pub fn vehicle(&self, id: u32) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    /// Nearest vehicle ahead of `id` whose target lane matches `lane`.
    pub fn leader_in_lane(&self, id: u32, lane: u32) -> Option<&VehicleState> {
        let me = self.vehicle(id)?;
        self.vehicles
            .iter()
            .filter(|v| v.id != id && v.target_lane == lane && v.x > me.x)
            .min_by(|a, b| a.x.partial_cmp(&b.x).unwrap())
    }

    /// Nearest vehicle behind `id` whose target lane matches `lane`.
    pub fn follower_in_lane(&self, id: u32, lane: u32) -> Option<&VehicleState> {
        let me = self.vehicle(id)?;
        self.vehicles
            .iter()
            .filter(|v| v.id != id && v.target_lane == lane && v.x < me.x)
            .max_by(|a, b| a.x.partial_cmp(&b.x).unwrap())
    }

    /// Stable JSON snapshot used by the trace output and determinism tests.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "tick": self.tick,
            "time": self.time(),
            "seed": self.seed,
            "terminated": self.terminated,
            "vehicles": self.vehicles,
        })
    }
}

/// Advance one vehicle by one sub-tick.
///
/// `a1` is the longitudinal acceleration (m/s^2); `a2` is the yaw-rate
/// command (rad/s) produced by the lateral controller. The longitudinal
/// channel integrates constant acceleration exactly, splitting the tick at
/// the instant a speed bound is reached so that displacement stays
/// consistent under sub-tick refinement.
pub fn step_kinematics(state: &VehicleState, a1: f64, a2: f64, dt: f64) -> Result<VehicleState> {
    if !(a1.is_finite() && a2.is_finite()) {
        return Err(Error::InvalidInput("non-finite acceleration command".into()));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    let mut next = state.clone();

    let v_end_raw = state.v1 + a1 * dt;
    let v_end = v_end_raw.clamp(0.0, V_MAX);
    let dx = if a1 == 0.0 || (v_end_raw - v_end).abs() < 1e-15 {
        state.v1 * dt + 0.5 * a1 * dt * dt
    } else {
        // Bound hit mid-tick: integrate to the crossing, then constant speed.
        let t_hit = ((v_end - state.v1) / a1).clamp(0.0, dt);
        state.v1 * t_hit + 0.5 * a1 * t_hit * t_hit + v_end * (dt - t_hit)
    };
    next.v1 = v_end;
    next.x = state.x + dx;

    next.heading = (state.heading + a2 * dt).clamp(-HEADING_MAX, HEADING_MAX);
    let v2_new = next.v1 * next.heading.sin();
    next.y = state.y + 0.5 * (state.v2 + v2_new) * dt;
    next.v2 = v2_new;
    Ok(next)
}

/// Oriented-rectangle overlap via the separating-axis test.
pub fn detect_collision(a: &VehicleState, b: &VehicleState) -> bool {
    let corners = |v: &VehicleState| -> [(f64, f64); 4] {
        let (s, c) = v.heading.sin_cos();
        let hl = v.length / 2.0;
        let hw = v.width / 2.0;
        let mut out = [(0.0, 0.0); 4];
        for (i, (dx, dy)) in [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)]
            .into_iter()
            .enumerate()
        {
            out[i] = (v.x + dx * c - dy * s, v.y + dx * s + dy * c);
        }
        out
    };
    let ca = corners(a);
    let cb = corners(b);
    // Two edge normals per rectangle suffice.
    let axes = |v: &VehicleState| {
        let (s, c) = v.heading.sin_cos();
        [(c, s), (-s, c)]
    };
    for (ax, ay) in axes(a).into_iter().chain(axes(b)) {
        let project = |pts: &[(f64, f64); 4]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &(px, py) in pts {
                let p = px * ax + py * ay;
                lo = lo.min(p);
                hi = hi.max(p);
            }
            (lo, hi)
        };
        let (alo, ahi) = project(&ca);
        let (blo, bhi) = project(&cb);
        if ahi < blo || bhi < alo {
            return false;
        }
    }
    true
}

/// Build the initial world: ego at x = 0 in the middle lane, M surrounding
/// vehicles per lane all ahead of the ego, gaps drawn from the spacing range.
pub fn spawn_scenario(road: &RoadConfig, cfg: &ScenarioConfig, sim_hz: u32, decision_period: u32) -> Result<WorldState> {
    road.validate()?;
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let ego_lane = road.lane_count.div_ceil(2);
    let (elo, ehi) = cfg.ego_speed_range;
    let ego_v = if elo == ehi { elo } else { rng.gen_range(elo..ehi) };
    let mut vehicles = vec![VehicleState::new(0, Role::Ego, 0.0, ego_lane, ego_v, road)];

    let (slo, shi) = cfg.surrounding_speed_range;
    let (glo, ghi) = cfg.spacing_range;
    let mut id = 1;
    for lane in 1..=road.lane_count {
        let mut x = 0.0;
        for _ in 0..cfg.vehicles_per_lane {
            let gap = if glo == ghi { glo } else { rng.gen_range(glo..ghi) };
            x += gap;
            let v = if slo == shi { slo } else { rng.gen_range(slo..shi) };
            vehicles.push(VehicleState::new(id, Role::Surrounding, x, lane, v, road));
            id += 1;
        }
    }

    let world = WorldState {
        tick: 0,
        sim_hz,
        decision_period,
        road: *road,
        vehicles,
        seed: cfg.seed,
        terminated: None,
        rng,
    };
    for i in 0..world.vehicles.len() {
        for j in (i + 1)..world.vehicles.len() {
            if detect_collision(&world.vehicles[i], &world.vehicles[j]) {
                return Err(Error::Config(format!(
                    "spacing configuration places vehicles {} and {} in overlap",
                    world.vehicles[i].id, world.vehicles[j].id
                )));
            }
        }
    }
    Ok(world)
}

/// Advance the whole world by one sub-tick of `dt` seconds.
///
/// The ego follows the supplied `(a1, yaw_rate)` controls; every surrounding
/// vehicle runs the IDM + MOBIL reference stack. Lane decisions for the
/// surrounding vehicles are re-evaluated every `decision_period` ticks.
pub fn advance_world(
    world: &mut WorldState,
    ego_controls: (f64, f64),
    dt: f64,
    params: &DriverParams,
) -> Result<StepEvents> {
    if world.terminated.is_some() {
        return Err(Error::State("cannot advance a terminated world".into()));
    }

    if world.tick.is_multiple_of(world.decision_period as u64) {
        let ids: Vec<u32> = world
            .vehicles
            .iter()
            .filter(|v| v.role == Role::Surrounding)
            .map(|v| v.id)
            .collect();
        for id in ids {
            let decision = driver::mobil_decision(world, id, &params.idm, &params.mobil);
            let v = world.vehicles.iter_mut().find(|v| v.id == id).unwrap();
            match decision.choice {
                driver::LaneChoice::Keep => {}
                driver::LaneChoice::Left => v.target_lane -= 1,
                driver::LaneChoice::Right => v.target_lane += 1,
            }
        }
    }

    let controls: Vec<(f64, f64)> = world
        .vehicles
        .iter()
        .map(|v| {
            if v.role == Role::Ego {
                ego_controls
            } else {
                driver::reference_controls(world, v.id, params)
            }
        })
        .collect();

    for (i, (a1, a2)) in controls.into_iter().enumerate() {
        let next = step_kinematics(&world.vehicles[i], a1, a2, dt)?;
        world.vehicles[i] = next;
        world.vehicles[i].lane = world.road.lane_of(world.vehicles[i].y);
    }
    world.tick += 1;

    let mut events = StepEvents::default();
    for i in 0..world.vehicles.len() {
        for j in (i + 1)..world.vehicles.len() {
            if detect_collision(&world.vehicles[i], &world.vehicles[j]) {
                let (a, b) = (world.vehicles[i].id, world.vehicles[j].id);
                let ego_hit =
                    world.vehicles[i].role == Role::Ego || world.vehicles[j].role == Role::Ego;
                events.merge(StepEvents {
                    ego_collision: ego_hit,
                    collision_pairs: vec![(a, b)],
                });
            }
        }
    }
    if events.ego_collision {
        world.terminated = Some(TerminationCause::Collision);
    }
    Ok(events)
}
