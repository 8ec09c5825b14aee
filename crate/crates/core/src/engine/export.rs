use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::Result;

use super::episode::EpisodeLog;
use super::evaluate::Metrics;
use super::reinforce::CurvePoint;

/// TDR and CDIE series, each padded with its last value to `width` columns.
pub fn dynamics(logs: &[EpisodeLog], width: usize) -> (Vec<Vec<usize>>, Vec<Vec<f64>>) {
    fn pad<T: Copy>(xs: &[T], width: usize) -> Vec<T> {
        let mut out: Vec<T> = xs.iter().copied().take(width).collect();
        if let Some(&last) = out.last() {
            out.resize(width, last);
        }
        out
    }
    logs.iter()
        .map(|l| (pad(&l.tdr, width), pad(&l.cdie, width)))
        .unzip()
}

pub fn write_episodes(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let mut out = String::new();
    for log in logs {
        out.push_str(&serde_json::to_string(log)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_episodes(path: &Path) -> Result<Vec<EpisodeLog>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut logs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            logs.push(serde_json::from_str(&line)?);
        }
    }
    Ok(logs)
}

pub fn write_metrics(path: &Path, metrics: &Metrics) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(metrics)? + "\n")?;
    Ok(())
}

/// One row per episode: `tdr_0..tdr_w` then `cdie_0..cdie_w`.
pub fn write_dynamics(path: &Path, logs: &[EpisodeLog], max_turns: usize) -> Result<()> {
    let width = max_turns + 1;
    let (tdr, cdie) = dynamics(logs, width);
    let mut out = String::from("episode");
    for t in 0..width {
        write!(out, ",tdr_{t}").unwrap();
    }
    for t in 0..width {
        write!(out, ",cdie_{t}").unwrap();
    }
    out.push('\n');
    for (i, (r, h)) in tdr.iter().zip(&cdie).enumerate() {
        write!(out, "{i}").unwrap();
        for v in r {
            write!(out, ",{v}").unwrap();
        }
        for v in h {
            write!(out, ",{v:.6}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_reward_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut out = String::from("episode,mean_return,success\n");
    for c in curve {
        writeln!(out, "{},{:.6},{:.6}", c.episode, c.mean_return, c.success).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_repeats_last() {
        let mut log: EpisodeLog = serde_json::from_str(
            r#"{"seed":0,"candidates":[],"target":"","masked":[],"turns":[],"guess":"","rank":1,
                "asks":1,"final_reward":2.0,"return":1.9,"tdr":[4,1],"cdie":[2.0,0.0]}"#,
        )
        .unwrap();
        log.contradictions = 0;
        let (tdr, cdie) = dynamics(&[log], 4);
        assert_eq!(tdr[0], vec![4, 1, 1, 1]);
        assert_eq!(cdie[0], vec![2.0, 0.0, 0.0, 0.0]);
    }
}
