//! One seeded episode under the rule-based reference policy, with the
//! meta-action sequence and a trace written next to the binary's cwd.

use highway::agent::Policy;
use highway::driver::DriverParams;
use highway::env::{EnvConfig, HighwayEnv};
use highway::trace::write_trace;

fn main() {
    let cfg = EnvConfig::default();
    let (mut env, mut obs) = HighwayEnv::new(cfg, DriverParams::default(), 42).unwrap();
    env.enable_trace();
    let policy = Policy::Reference;
    let mut actions = Vec::new();
    let mut ret = 0.0;
    loop {
        let a = policy.act(&env, &obs).unwrap();
        actions.push(a.index());
        let (next, r, done, info) = env.step(a).unwrap();
        ret += r;
        obs = next;
        if done {
            println!(
                "episode over after {} steps: cause {:?}, distance {:.0} m, final speed {:.1} m/s",
                actions.len(),
                info.cause,
                info.distance,
                info.ego_speed
            );
            break;
        }
    }
    println!("return: {ret:.2}");
    println!("action sequence (1=left 2=idle 3=right 4=faster 5=slower):");
    for chunk in actions.chunks(25) {
        println!("  {}", chunk.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "));
    }
    let records = env.take_trace();
    write_trace(std::path::Path::new("reference_rollout.jsonl"), &records).unwrap();
    println!("{} trace rows -> reference_rollout.jsonl", records.len());
}
