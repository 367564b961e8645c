//! Miniature end-to-end comparison: train DQN and dueling DQN on the same
//! seeded scenario stream and evaluate both against the rule-based model.
//! The full-size variant is the `compare` CLI subcommand.

use highway::agent::{evaluate, run_training, AgentConfig, Algorithm, Policy};
use highway::driver::DriverParams;
use highway::env::EnvConfig;
use highway::metrics::aggregate;
use highway::sim::ScenarioConfig;

fn main() {
    let seed = 17;
    let env_cfg = EnvConfig {
        horizon_s: 30.0,
        scenario: ScenarioConfig {
            vehicles_per_lane: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let params = DriverParams::default();

    println!(
        "{:<10} {:>12} {:>10} {:>10} {:>10}",
        "policy", "eval return", "crash rate", "speed", "distance"
    );
    for algorithm in [Algorithm::Reference, Algorithm::Dqn, Algorithm::Ddqn] {
        let policy = if algorithm == Algorithm::Reference {
            Policy::Reference
        } else {
            let cfg = AgentConfig {
                algorithm,
                episodes: 30,
                ..Default::default()
            };
            run_training(&cfg, &env_cfg, &params, seed, None).unwrap().policy
        };
        let rows = evaluate(&policy, &env_cfg, &params, 5, seed).unwrap();
        let agg = aggregate(&rows);
        println!(
            "{:<10} {:>12.2} {:>10.2} {:>10.2} {:>10.0}",
            algorithm.as_str(),
            agg.mean_return,
            agg.collision_rate,
            agg.mean_speed,
            agg.mean_distance
        );
    }
}
