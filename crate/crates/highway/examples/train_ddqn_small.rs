//! A short dueling-DQN training run on a thinned-out road, printing the
//! per-episode learning curve. Scale episodes and vehicles_per_lane up for
//! a full run.

use highway::agent::{run_training, AgentConfig, Algorithm};
use highway::driver::DriverParams;
use highway::env::EnvConfig;
use highway::sim::ScenarioConfig;

fn main() {
    let agent_cfg = AgentConfig {
        algorithm: Algorithm::Ddqn,
        episodes: 40,
        ..Default::default()
    };
    let env_cfg = EnvConfig {
        horizon_s: 30.0,
        scenario: ScenarioConfig {
            vehicles_per_lane: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let result = run_training(&agent_cfg, &env_cfg, &DriverParams::default(), 11, None).unwrap();
    println!(
        "{:>4} {:>10} {:>6} {:>9} {:>9} {:>8}",
        "ep", "return", "crash", "speed", "dist", "eps"
    );
    for m in &result.metrics {
        println!(
            "{:>4} {:>10.2} {:>6} {:>9.2} {:>9.0} {:>8.3}",
            m.episode,
            m.ret,
            if m.collision { "yes" } else { "" },
            m.mean_speed,
            m.distance,
            m.epsilon
        );
    }
    let tail: Vec<_> = result.metrics.iter().rev().take(10).collect();
    let mean = tail.iter().map(|m| m.ret).sum::<f64>() / tail.len() as f64;
    let crashes = tail.iter().filter(|m| m.collision).count();
    println!("\nlast 10 episodes: mean return {mean:.2}, {crashes} collisions");
}
