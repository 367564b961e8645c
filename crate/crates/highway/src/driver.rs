//! Rule-based driver stack: IDM car-following, MOBIL lane changing, and the
//! lower-level proportional speed / lane-keeping controllers.
//!
//! Surrounding vehicles always run this stack; the "reference" benchmark ego
//! runs it too.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{VehicleState, WorldState, HEADING_MAX};

/// Longitudinal action bound (m/s^2) applied to controller output.
pub const A1_BOUND: f64 = 5.0;
/// Speed floor used in the arcsin argument of the lateral controller.
pub const V_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulaMode {
    /// Speed-dependent desired gap d0 + max(0, v*T + v*dv / (2 sqrt(a b))).
    Standard,
    /// Alternate desired gap d0 + T*dv + v*dv / (2 sqrt(a b)).
    Paper,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdmParams {
    /// Maximum acceleration (m/s^2).
    pub a_max: f64,
    /// Acceleration exponent.
    pub delta: f64,
    /// Desired time gap (s).
    pub time_gap: f64,
    /// Comfortable deceleration magnitude (m/s^2).
    pub b_comfort: f64,
    /// Minimum gap at standstill (m).
    pub d0: f64,
    /// Target speed (m/s); per-vehicle, overwritten by callers.
    pub v_tar: f64,
    pub formula_mode: FormulaMode,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            a_max: 6.0,
            delta: 4.0,
            time_gap: 1.5,
            b_comfort: 5.0,
            d0: 10.0,
            v_tar: 25.0,
            formula_mode: FormulaMode::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MobilParams {
    /// Politeness coefficient weighting follower terms in the incentive.
    pub politeness: f64,
    /// Safe braking limit (m/s^2, positive magnitude).
    pub b_safe: f64,
    /// Acceleration gain threshold (m/s^2).
    pub a_th: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        MobilParams {
            politeness: 0.001,
            b_safe: 2.0,
            a_th: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControlGains {
    /// Longitudinal proportional gain (1/s).
    pub k_p: f64,
    /// Lateral position gain (1/s).
    pub k_p_lat: f64,
    /// Heading gain (1/s).
    pub k_p_heading: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            k_p: 5.0 / 3.0,
            k_p_lat: 1.0,
            k_p_heading: 2.0,
        }
    }
}

/// Everything the surrounding-vehicle stack needs, bundled for the simulator.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DriverParams {
    pub idm: IdmParams,
    pub mobil: MobilParams,
    pub gains: ControlGains,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChoice {
    Keep,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy)]
pub struct LaneChangeDecision {
    pub choice: LaneChoice,
    pub incentive_gain: f64,
}

impl LaneChangeDecision {
    pub fn keep() -> Self {
        LaneChangeDecision {
            choice: LaneChoice::Keep,
            incentive_gain: 0.0,
        }
    }
}

/// Desired gap to the leader at speed `v` and approach rate `dv`.
pub fn desired_gap(v: f64, dv: f64, p: &IdmParams) -> f64 {
    let interaction = v * dv / (2.0 * (p.a_max * p.b_comfort).sqrt());
    match p.formula_mode {
        FormulaMode::Standard => p.d0 + (v * p.time_gap + interaction).max(0.0),
        FormulaMode::Paper => p.d0 + p.time_gap * dv + interaction,
    }
}

/// IDM acceleration; `gap` is the bumper-to-bumper distance to the leader,
/// `None` on a free road. Output clamped to [-a_max, a_max].
pub fn idm_acceleration(v: f64, dv: f64, gap: Option<f64>, p: &IdmParams) -> Result<f64> {
    let free = 1.0 - (v / p.v_tar).powf(p.delta);
    let interaction = match gap {
        None => 0.0,
        Some(g) if g > 0.0 => {
            let d_tar = desired_gap(v, dv, p);
            (d_tar / g).powi(2)
        }
        Some(_) => {
            return Err(Error::InvalidInput(
                "idm_acceleration requires a positive gap to the leader".into(),
            ))
        }
    };
    Ok((p.a_max * (free - interaction)).clamp(-p.a_max, p.a_max))
}

/// Safety criterion: the new follower must not brake harder than b_safe.
pub fn mobil_safety(a_new_follower: f64, p: &MobilParams) -> bool {
    a_new_follower >= -p.b_safe
}

/// Incentive criterion: politeness-weighted acceleration gain vs threshold.
/// Returns (gain > a_th, gain).
pub fn mobil_incentive(
    ego_new: f64,
    ego_old: f64,
    i_new: f64,
    i_old: f64,
    j_new: f64,
    j_old: f64,
    p: &MobilParams,
) -> (bool, f64) {
    let gain = (ego_new - ego_old) + p.politeness * ((i_new - i_old) + (j_new - j_old));
    (gain > p.a_th, gain)
}

fn bumper_gap(follower: &VehicleState, leader: &VehicleState) -> f64 {
    leader.x - follower.x - (leader.length + follower.length) / 2.0
}

/// IDM acceleration of `follower` behind `leader` (if any), at the
/// follower's own target speed.
fn accel_between(
    follower: &VehicleState,
    leader: Option<&VehicleState>,
    idm: &IdmParams,
) -> Result<f64> {
    let p = IdmParams {
        v_tar: follower.target_speed.max(1e-6),
        ..*idm
    };
    match leader {
        None => idm_acceleration(follower.v1, 0.0, None, &p),
        Some(l) => idm_acceleration(
            follower.v1,
            follower.v1 - l.v1,
            Some(bumper_gap(follower, l)),
            &p,
        ),
    }
}

/// Evaluate MOBIL for one vehicle. Returns the feasible direction with the
/// larger incentive gain (ties prefer left, i.e. toward lane 1), or keep.
pub fn mobil_decision(
    world: &WorldState,
    vehicle_id: u32,
    idm: &IdmParams,
    mobil: &MobilParams,
) -> LaneChangeDecision {
    let me = match world.vehicle(vehicle_id) {
        Some(v) => v,
        None => return LaneChangeDecision::keep(),
    };
    // Mid-lane-change vehicles settle before deciding again.
    let settle = 0.1 * world.road.lane_width;
    if me.lane != me.target_lane
        || (me.y - world.road.lane_center(me.target_lane)).abs() > settle
    {
        return LaneChangeDecision::keep();
    }

    let old_leader = world.leader_in_lane(vehicle_id, me.lane);
    let ego_old = match accel_between(me, old_leader, idm) {
        Ok(a) => a,
        Err(_) => return LaneChangeDecision::keep(),
    };

    let mut best: Option<(LaneChoice, f64)> = None;
    let candidates = [
        (LaneChoice::Left, me.lane.checked_sub(1).filter(|&l| l >= 1)),
        (
            LaneChoice::Right,
            Some(me.lane + 1).filter(|&l| l <= world.road.lane_count),
        ),
    ];
    for (choice, lane) in candidates {
        let lane = match lane {
            Some(l) => l,
            None => continue,
        };
        if let Some(gain) = evaluate_candidate(world, me, lane, ego_old, idm, mobil) {
            let better = match best {
                None => true,
                // Strict: a left candidate evaluated first wins ties.
                Some((_, g)) => gain > g,
            };
            if better {
                best = Some((choice, gain));
            }
        }
    }
    match best {
        Some((choice, gain)) => LaneChangeDecision {
            choice,
            incentive_gain: gain,
        },
        None => LaneChangeDecision::keep(),
    }
}

fn evaluate_candidate(
    world: &WorldState,
    me: &VehicleState,
    lane: u32,
    ego_old: f64,
    idm: &IdmParams,
    mobil: &MobilParams,
) -> Option<f64> {
    let new_leader = world.leader_in_lane(me.id, lane);
    if let Some(l) = new_leader {
        if bumper_gap(me, l) <= 0.0 {
            return None;
        }
    }
    let p = IdmParams {
        v_tar: me.target_speed.max(1e-6),
        ..*idm
    };
    let ego_new = match new_leader {
        None => idm_acceleration(me.v1, 0.0, None, &p).ok()?,
        Some(l) => {
            idm_acceleration(me.v1, me.v1 - l.v1, Some(bumper_gap(me, l)), &p).ok()?
        }
    };

    // Current-lane follower: loses me as leader, gains my old leader.
    let old_leader = world.leader_in_lane(me.id, me.lane);
    let (i_old, i_new) = match world.follower_in_lane(me.id, me.lane) {
        None => (0.0, 0.0),
        Some(f) => (
            accel_between(f, Some(me), idm).ok()?,
            accel_between(f, old_leader, idm).ok()?,
        ),
    };
    // Target-lane follower: gains me as leader.
    let (j_old, j_new) = match world.follower_in_lane(me.id, lane) {
        None => (0.0, 0.0),
        Some(f) => {
            if bumper_gap(f, me) <= 0.0 {
                return None;
            }
            (
                accel_between(f, new_leader, idm).ok()?,
                accel_between(f, Some(me), idm).ok()?,
            )
        }
    };

    if !mobil_safety(j_new, mobil) {
        return None;
    }
    let (go, gain) = mobil_incentive(ego_new, ego_old, i_new, i_old, j_new, j_old, mobil);
    go.then_some(gain)
}

/// Proportional speed controller, saturated to the longitudinal action bound.
pub fn longitudinal_control(v_tar: f64, v: f64, g: &ControlGains) -> f64 {
    (g.k_p * (v_tar - v)).clamp(-A1_BOUND, A1_BOUND)
}

/// Lane-keeping controller: lateral offset -> commanded lateral speed ->
/// target heading -> yaw rate, saturated to the heading-channel bound.
pub fn lateral_control(
    y: f64,
    target_lane_center: f64,
    heading: f64,
    v: f64,
    g: &ControlGains,
) -> f64 {
    let v_lat = -g.k_p_lat * (y - target_lane_center);
    let phi_tar = (v_lat / v.max(V_FLOOR)).clamp(-1.0, 1.0).asin();
    (g.k_p_heading * (phi_tar - heading)).clamp(-HEADING_MAX, HEADING_MAX)
}

/// Full reference stack for one vehicle: IDM acceleration against the
/// current-lane leader plus lane keeping toward the vehicle's target lane.
pub fn reference_controls(world: &WorldState, vehicle_id: u32, params: &DriverParams) -> (f64, f64) {
    let me = match world.vehicle(vehicle_id) {
        Some(v) => v,
        None => return (0.0, 0.0),
    };
    let leader = world.leader_in_lane(vehicle_id, me.target_lane);
    let a1 = accel_between(me, leader, &params.idm).unwrap_or(-params.idm.a_max);
    let yaw = lateral_control(
        me.y,
        world.road.lane_center(me.target_lane),
        me.heading,
        me.v1,
        &params.gains,
    );
    (a1, yaw)
}
