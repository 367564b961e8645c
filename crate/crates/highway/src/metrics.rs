//! Per-episode metrics CSV with a stable column order.

use std::io::Write;
use std::path::Path;

use crate::agent::EpisodeMetrics;
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "episode,return,return_normalized,steps,collision,mean_speed,distance,epsilon,mean_td_error";

pub fn metrics_to_csv(metrics: &[EpisodeMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            m.episode,
            m.ret,
            m.ret_norm,
            m.steps,
            m.collision as u8,
            m.mean_speed,
            m.distance,
            m.epsilon,
            m.mean_td_error
        ));
    }
    out
}

pub fn write_metrics(path: &Path, metrics: &[EpisodeMetrics]) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(metrics_to_csv(metrics).as_bytes()))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        _ => return Err(Error::Format("bad metrics header".into())),
    }
    let mut out = Vec::new();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(Error::Format(format!("bad metrics row: {line}")));
        }
        let f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("bad number {s}")))
        };
        out.push(EpisodeMetrics {
            episode: cols[0]
                .parse()
                .map_err(|_| Error::Format("bad episode index".into()))?,
            ret: f(cols[1])?,
            ret_norm: f(cols[2])?,
            steps: cols[3]
                .parse()
                .map_err(|_| Error::Format("bad step count".into()))?,
            collision: cols[4] == "1",
            mean_speed: f(cols[5])?,
            distance: f(cols[6])?,
            epsilon: f(cols[7])?,
            mean_td_error: f(cols[8])?,
        });
    }
    Ok(out)
}

/// Aggregates reported by evaluation and comparison commands.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub mean_return: f64,
    pub mean_return_normalized: f64,
    pub collision_rate: f64,
    pub mean_speed: f64,
    pub mean_distance: f64,
}

pub fn aggregate(metrics: &[EpisodeMetrics]) -> Aggregate {
    let n = metrics.len().max(1) as f64;
    Aggregate {
        mean_return: metrics.iter().map(|m| m.ret).sum::<f64>() / n,
        mean_return_normalized: metrics.iter().map(|m| m.ret_norm).sum::<f64>() / n,
        collision_rate: metrics.iter().filter(|m| m.collision).count() as f64 / n,
        mean_speed: metrics.iter().map(|m| m.mean_speed).sum::<f64>() / n,
        mean_distance: metrics.iter().map(|m| m.distance).sum::<f64>() / n,
    }
}
