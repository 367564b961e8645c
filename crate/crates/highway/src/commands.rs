//! Experiment orchestration behind the CLI subcommands: train, eval,
//! rollout traces, and the three-way algorithm comparison.

use std::io::Write;
use std::path::Path;

use crate::agent::{self, Algorithm, CheckpointSink, Policy};
use crate::config::RunConfig;
use crate::env::HighwayEnv;
use crate::error::{Error, Result};
use crate::metrics::{self, aggregate};
use crate::trace;
use crate::weights;

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(contents.as_bytes()))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Train one agent and persist metrics, checkpoints, final weights, and the
/// resolved configuration under `out`.
pub fn cmd_train(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let master_seed = cfg.train.seed;
    ensure_dir(out)?;
    write_file(&out.join("config.echo"), &cfg.to_toml())?;

    let agent_cfg = cfg.agent_config()?;
    let env_cfg = cfg.env_config(master_seed)?;
    let params = cfg.driver_params();

    let sink = (cfg.io.write_checkpoints
        && cfg.train.checkpoint_every > 0
        && agent_cfg.algorithm != Algorithm::Reference)
        .then(|| CheckpointSink {
            dir: out.join("checkpoints"),
            every: cfg.train.checkpoint_every,
            algorithm: agent_cfg.algorithm,
        });
    if let Some(s) = sink.as_ref() {
        ensure_dir(&s.dir)?;
    }

    let result = agent::run_training(&agent_cfg, &env_cfg, &params, master_seed, sink.as_ref())?;
    metrics::write_metrics(&out.join("metrics.csv"), &result.metrics)?;
    if let Policy::Greedy(net) = &result.policy {
        weights::save_weights(&out.join("final.w"), agent_cfg.algorithm, net)?;
    }

    let agg = aggregate(&result.metrics);
    println!(
        "trained {} for {} episodes (seed {}): mean return {:.3}, collision rate {:.3}",
        agent_cfg.algorithm.as_str(),
        result.metrics.len(),
        master_seed,
        agg.mean_return,
        agg.collision_rate
    );
    Ok(())
}

fn load_policy(cfg: &RunConfig, weights_path: Option<&Path>) -> Result<Policy> {
    if cfg.agent.algorithm == Algorithm::Reference {
        return Ok(Policy::Reference);
    }
    let path = weights_path.ok_or_else(|| {
        Error::Config("a weights file is required unless algorithm = \"reference\"".into())
    })?;
    let (algo, net) = weights::load_weights(path)?;
    if algo != cfg.agent.algorithm {
        return Err(Error::Format(format!(
            "weights file holds a {} network but the config says {}",
            algo.as_str(),
            cfg.agent.algorithm.as_str()
        )));
    }
    let expect = cfg.env_config(0)?.observation_len();
    if net.input_dim() != expect {
        return Err(Error::Format(format!(
            "weights input dim {} does not match the observation length {expect}",
            net.input_dim()
        )));
    }
    Ok(Policy::Greedy(net))
}

/// Greedy evaluation of a stored (or rule-based) policy.
pub fn cmd_eval(
    config_path: &Path,
    weights_path: Option<&Path>,
    episodes: Option<u32>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let master_seed = seed.unwrap_or(cfg.train.seed);
    let n = episodes.unwrap_or(cfg.train.eval_episodes);
    let policy = load_policy(&cfg, weights_path)?;
    let env_cfg = cfg.env_config(master_seed)?;
    let params = cfg.driver_params();
    let rows = agent::evaluate(&policy, &env_cfg, &params, n, master_seed)?;
    let agg = aggregate(&rows);
    println!(
        "eval {} over {n} episodes (seed {master_seed}): mean return {:.3}, normalized {:.3}, \
         collision rate {:.3}, mean speed {:.3}, mean distance {:.1}",
        cfg.agent.algorithm.as_str(),
        agg.mean_return,
        agg.mean_return_normalized,
        agg.collision_rate,
        agg.mean_speed,
        agg.mean_distance
    );
    if let Some(dir) = out {
        ensure_dir(dir)?;
        metrics::write_metrics(&dir.join("eval_metrics.csv"), &rows)?;
        let summary = format!(
            "mean_return,mean_return_normalized,collision_rate,mean_speed,mean_distance\n{},{},{},{},{}\n",
            agg.mean_return,
            agg.mean_return_normalized,
            agg.collision_rate,
            agg.mean_speed,
            agg.mean_distance
        );
        write_file(&dir.join("eval_summary.csv"), &summary)?;
    }
    Ok(())
}

/// Run one traced episode and write the per-tick records plus the
/// per-policy-step action-index sequence.
pub fn cmd_rollout(
    config_path: &Path,
    policy_spec: &str,
    seed: Option<u64>,
    trace_path: &Path,
) -> Result<()> {
    let mut cfg = RunConfig::load(config_path)?;
    let policy = if policy_spec == "reference" {
        cfg.agent.algorithm = Algorithm::Reference;
        Policy::Reference
    } else {
        load_policy(&cfg, Some(Path::new(policy_spec)))?
    };
    let master_seed = seed.unwrap_or(cfg.train.seed);
    let env_cfg = cfg.env_config(master_seed)?;
    let params = cfg.driver_params();

    let (mut env, mut obs) = HighwayEnv::new(env_cfg, params, master_seed)?;
    env.enable_trace();
    let mut actions = Vec::new();
    let mut ret = 0.0;
    loop {
        let action = policy.act(&env, &obs)?;
        actions.push(action.index());
        let (next, r, done, _) = env.step(action)?;
        ret += r;
        obs = next;
        if done {
            break;
        }
    }
    let records = env.take_trace();
    trace::write_trace(trace_path, &records)?;
    let actions_path = trace_path.with_extension("actions.csv");
    let mut body = String::from("step,action\n");
    for (i, a) in actions.iter().enumerate() {
        body.push_str(&format!("{i},{a}\n"));
    }
    write_file(&actions_path, &body)?;
    println!(
        "rollout ({policy_spec}, seed {master_seed}): {} policy steps, {} trace rows, return {ret:.3}",
        actions.len(),
        records.len()
    );
    Ok(())
}

pub const COMPARISON_HEADER: &str = "seed,algorithm,return,collision,mean_speed,distance";

/// Train DQN and DDQN per seed with identical environment seed streams,
/// evaluate both plus the reference model, and emit one comparison CSV.
pub fn cmd_compare(config_path: &Path, seeds: &[u64], out: &Path) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    ensure_dir(out)?;
    write_file(&out.join("config.echo"), &cfg.to_toml())?;

    let params = cfg.driver_params();
    let mut body = String::from(COMPARISON_HEADER);
    body.push('\n');
    for &seed in seeds {
        let env_cfg = cfg.env_config(seed)?;
        for algorithm in [Algorithm::Reference, Algorithm::Dqn, Algorithm::Ddqn] {
            let mut agent_cfg = cfg.agent_config()?;
            agent_cfg.algorithm = algorithm;
            let (policy, train_return) = if algorithm == Algorithm::Reference {
                (Policy::Reference, None)
            } else {
                let result = agent::run_training(&agent_cfg, &env_cfg, &params, seed, None)?;
                let window = (result.metrics.len() / 10).max(1);
                let tail = &result.metrics[result.metrics.len() - window..];
                let mean = tail.iter().map(|m| m.ret).sum::<f64>() / window as f64;
                (result.policy, Some(mean))
            };
            let rows = agent::evaluate(&policy, &env_cfg, &params, cfg.train.eval_episodes, seed)?;
            let agg = aggregate(&rows);
            let ret = train_return.unwrap_or(agg.mean_return);
            body.push_str(&format!(
                "{seed},{},{ret},{},{},{}\n",
                algorithm.as_str(),
                agg.collision_rate,
                agg.mean_speed,
                agg.mean_distance
            ));
            println!(
                "seed {seed} {}: return {ret:.3}, collision rate {:.3}",
                algorithm.as_str(),
                agg.collision_rate
            );
        }
    }
    write_file(&out.join("comparison.csv"), &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    const SMALL: &str = "\
[env]
horizon_s = 8.0
vehicles_per_lane = 1

[agent]
algorithm = \"ddqn\"
hidden_width = 8
batch = 8

[train]
episodes = 3
checkpoint_every = 2
eval_episodes = 2
seed = 5
";

    #[test]
    fn train_writes_run_directory() {
        let dir = tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, SMALL).unwrap();
        let out = dir.path().join("out");
        cmd_train(&cfg, None, &out).unwrap();
        assert!(out.join("config.echo").exists());
        assert!(out.join("metrics.csv").exists());
        assert!(out.join("final.w").exists());
        assert!(out.join("checkpoints").join("ep-0002.w").exists());
        let echoed = RunConfig::load(&out.join("config.echo")).unwrap();
        assert_eq!(echoed.to_toml(), RunConfig::parse(SMALL).unwrap().to_toml());
        // eval consumes what train wrote
        cmd_eval(&cfg, Some(&out.join("final.w")), Some(2), Some(1), None).unwrap();
    }

    #[test]
    fn train_zero_episodes_header_only() {
        let dir = tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "[train]\nepisodes = 0\n").unwrap();
        let out = dir.path().join("out");
        cmd_train(&cfg, None, &out).unwrap();
        let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
        assert_eq!(text, format!("{}\n", metrics::METRICS_HEADER));
    }

    #[test]
    fn eval_requires_weights_unless_reference() {
        let dir = tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "[agent]\nalgorithm = \"dqn\"\n").unwrap();
        assert!(cmd_eval(&cfg, None, Some(1), Some(0), None).is_err());
        std::fs::write(&cfg, "[agent]\nalgorithm = \"reference\"\n[env]\nhorizon_s = 5.0\nvehicles_per_lane = 0\n").unwrap();
        cmd_eval(&cfg, None, Some(1), Some(0), None).unwrap();
    }

    #[test]
    fn rollout_reference_trace() {
        let dir = tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "[env]\nhorizon_s = 5.0\nvehicles_per_lane = 0\n").unwrap();
        let trace_path = dir.path().join("ep.jsonl");
        cmd_rollout(&cfg, "reference", Some(9), &trace_path).unwrap();
        let rows = trace::read_trace(&trace_path).unwrap();
        assert_eq!(rows.len(), 100); // 5 s * 20 Hz, one vehicle
        let actions = std::fs::read_to_string(dir.path().join("ep.actions.csv")).unwrap();
        for line in actions.lines().skip(1) {
            let a: u8 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!((1..=5).contains(&a));
        }
    }

    #[test]
    fn compare_emits_three_rows_per_seed() {
        let dir = tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(
            &cfg,
            "[env]\nhorizon_s = 5.0\nvehicles_per_lane = 1\n\n[agent]\nhidden_width = 8\nbatch = 8\n\n[train]\nepisodes = 2\neval_episodes = 1\n",
        )
        .unwrap();
        let out = dir.path().join("cmp");
        cmd_compare(&cfg, &[3, 4], &out).unwrap();
        let text = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COMPARISON_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 6);
        for algo in ["reference", "dqn", "ddqn"] {
            let n = rows
                .iter()
                .filter(|r| r.split(',').nth(1) == Some(algo))
                .count();
            assert_eq!(n, 2, "{algo}");
        }
    }
}
