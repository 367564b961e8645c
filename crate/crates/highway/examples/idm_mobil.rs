//! Car-following and lane-change decisions in isolation: IDM acceleration
//! as the gap to a leader shrinks, then a MOBIL overtake triggered by a
//! slow vehicle ahead.

use highway::driver::{self, DriverParams, IdmParams, LaneChoice};
use highway::sim::{spawn_scenario, RoadConfig, ScenarioConfig, VehicleState, Role};

fn main() {
    let idm = IdmParams::default();
    println!("IDM response at v = 25 m/s closing on a 20 m/s leader:");
    println!("{:>8}  {:>10}", "gap [m]", "a [m/s^2]");
    for gap in [200.0, 100.0, 60.0, 40.0, 25.0, 15.0, 10.0] {
        let a = driver::idm_acceleration(25.0, 5.0, Some(gap), &idm).unwrap();
        println!("{gap:>8.0}  {a:>10.3}");
    }

    let road = RoadConfig::default();
    let params = DriverParams::default();
    let mut world = spawn_scenario(
        &road,
        &ScenarioConfig {
            vehicles_per_lane: 0,
            seed: 7,
            ..Default::default()
        },
        20,
        20,
    )
    .unwrap();
    // a slow leader 30 m ahead in the ego lane, empty lane to the left
    let ego_id = world.ego().id;
    let (x, lane) = {
        let e = world.ego();
        (e.x, e.lane)
    };
    let mut blocker = VehicleState::new(99, Role::Surrounding, x + 30.0, lane, 15.0, &road);
    blocker.target_speed = 15.0;
    world.vehicles.push(blocker);

    let d = driver::mobil_decision(&world, ego_id, &params.idm, &params.mobil);
    let label = match d.choice {
        LaneChoice::Left => "change left",
        LaneChoice::Right => "change right",
        LaneChoice::Keep => "keep lane",
    };
    println!("\nblocked by a 15 m/s leader 30 m ahead: MOBIL says {label} (gain {:.3})", d.incentive_gain);
}
