use std::cell::RefCell;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::rc::Rc;

use md3::cli::{dispatch, load_agent, play, Manifest, RunConfig, MANIFEST_FILE};
use md3::corpus::{Answer, KBRecord};
use md3::engine::{read_episodes, write_episodes, NluMode};
use md3::policy::PolicyMode;
use serde_json::json;
use tempfile::TempDir;

/// Small enough that the whole pipeline runs in seconds.
fn tiny_config(dir: &Path) -> PathBuf {
    let config = json!({
        "seed": 3,
        "paths": { "data_dir": dir.join("data") },
        "corpus": { "n": 120, "dialogues": 40, "dialogue_m": 8 },
        "encoder": { "hidden": 2, "embed_dim": 4, "sentence_rnn": false, "epochs": 1, "lr": 0.01 },
        "nlu": { "epochs": 1, "lr": 0.01 },
        "rl": { "episodes": 20, "m": 8 },
        "eval": { "episodes": 20, "m": 8 }
    });
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn md3(args: &[&str]) -> i32 {
    dispatch(std::iter::once("md3").chain(args.iter().copied()))
}

fn stage(name: &str, config: &Path, extra: &[&str]) {
    let mut args = vec![name, "--config", config.to_str().unwrap()];
    args.extend_from_slice(extra);
    assert_eq!(md3(&args), 0, "{name} {extra:?} failed");
}

fn pipeline(config: &Path) {
    stage("gen-corpus", config, &[]);
    stage("pretrain", config, &[]);
    stage("train-nlu", config, &[]);
    stage("train-rl", config, &[]);
}

fn read_manifest(dir: &Path) -> Manifest {
    serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(md3(&["frobnicate"]), 2);
    assert_eq!(md3(&["eval", "--m", "many"]), 2);
    assert_eq!(md3(&["eval", "--mode", "clever"]), 2);
    let bin = Command::new(env!("CARGO_BIN_EXE_md3"))
        .arg("--nope")
        .output()
        .unwrap();
    assert_eq!(bin.status.code(), Some(2));
}

#[test]
fn failing_stage_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("empty");
    assert_eq!(md3(&["stats", "--data-dir", data.to_str().unwrap()]), 1);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"seed": 1, "polcy": {}}"#).unwrap();
    assert_eq!(md3(&["stats", "--config", bad.to_str().unwrap()]), 1);
}

#[test]
fn gen_corpus_is_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = dir.path().join("corpus");
        let args = [
            "gen-corpus",
            "--n",
            "80",
            "--seed",
            "5",
            "--data-dir",
            "shared",
            "--out",
            out.to_str().unwrap(),
        ];
        assert_eq!(md3(&args), 0);
    }
    let sa = snapshot(&a.path().join("corpus"));
    let sb = snapshot(&b.path().join("corpus"));
    assert!(sa.len() >= 5);
    for ((na, ba), (nb, bb)) in sa.iter().zip(&sb) {
        // The manifest records its own output path.
        if na != MANIFEST_FILE {
            assert_eq!(na, nb);
            assert_eq!(ba, bb, "{na} differs");
        }
    }
    let ma = read_manifest(&a.path().join("corpus"));
    let mb = read_manifest(&b.path().join("corpus"));
    assert_eq!(ma.outputs, mb.outputs);
}

#[test]
fn every_stage_reruns_from_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let config = tiny_config(tmp.path());
    pipeline(&config);
    stage("eval", &config, &[]);
    stage("stats", &config, &[]);
    let data = tmp.path().join("data");
    let runs: Vec<PathBuf> = fs::read_dir(data.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    let mut dirs = vec![
        data.join("corpus"),
        data.join("encoder"),
        data.join("nlu"),
        data.join("policy-dapo"),
    ];
    dirs.extend(runs);
    for dir in dirs {
        let before = snapshot(&dir);
        let manifest = read_manifest(&dir);
        let replay = dir.join(MANIFEST_FILE);
        let name = manifest.stage.name();
        stage(name, &replay, &[]);
        assert_eq!(
            before,
            snapshot(&dir),
            "{name} in {} changed on re-run",
            dir.display()
        );
    }
}

#[test]
fn eval_writes_metrics_and_replays() {
    let tmp = TempDir::new().unwrap();
    let config = tiny_config(tmp.path());
    pipeline(&config);
    let out = tmp.path().join("eval");
    stage("eval", &config, &["--out", out.to_str().unwrap()]);
    let metrics: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("metrics.json")).unwrap()).unwrap();
    for key in ["S1", "S3", "MRR", "T", "R", "n_episodes"] {
        assert!(metrics.get(key).is_some(), "missing {key}");
    }
    assert_eq!(metrics["n_episodes"], 20);
    let dynamics = fs::read_to_string(out.join("dynamics.csv")).unwrap();
    assert!(dynamics.starts_with("episode,tdr_0,"));
    assert_eq!(dynamics.lines().count(), 21);

    let episodes = out.join("episodes.jsonl");
    let replay_out = tmp.path().join("replay");
    stage(
        "eval",
        &config,
        &[
            "--replay",
            episodes.to_str().unwrap(),
            "--out",
            replay_out.to_str().unwrap(),
        ],
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(replay_out.join("replay.json")).unwrap()).unwrap();
    assert_eq!(report["episodes"], 20);
    assert_eq!(report["mismatched"], json!([]));

    // A doctored belief must be caught.
    let mut logs = read_episodes(&episodes).unwrap();
    let turn = logs[0]
        .turns
        .iter_mut()
        .find(|t| t.answer.is_some())
        .expect("an asked question");
    turn.state.p[0] += 0.25;
    let doctored = tmp.path().join("doctored.jsonl");
    write_episodes(&doctored, &logs).unwrap();
    let args = [
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--replay",
        doctored.to_str().unwrap(),
    ];
    assert_eq!(md3(&args), 1);
}

#[test]
fn reward_curve_is_written() {
    let tmp = TempDir::new().unwrap();
    let config = tiny_config(tmp.path());
    pipeline(&config);
    let curve = fs::read_to_string(tmp.path().join("data/policy-dapo/reward_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("episode,mean_return,success"));
    assert_eq!(lines.last().unwrap().split(',').next(), Some("20"));
}

/// Terminal user that answers every question truthfully about `target`.
struct Player {
    screen: Rc<RefCell<Vec<u8>>>,
    target: KBRecord,
    attributes: Vec<String>,
    position: usize,
    pending: Vec<u8>,
}

impl Read for Player {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        if self.pending.is_empty() {
            let screen = String::from_utf8(self.screen.borrow().clone()).unwrap();
            let last = screen.lines().last().unwrap_or_default();
            let line = if last.starts_with("which number") {
                format!("{}\n", self.position + 1)
            } else {
                let attr = last.trim_start_matches("you [").trim_end_matches("]: ");
                let j = self
                    .attributes
                    .iter()
                    .position(|a| a == attr)
                    .expect("attribute prompt");
                match Answer::from_record(&self.target, j) {
                    Answer::Unknown => "unknown\n".to_string(),
                    Answer::Values(v) => format!("{}\n", v.join(", ")),
                }
            };
            self.pending = line.into_bytes();
        }
        let n = buf.len().min(self.pending.len());
        buf[..n].copy_from_slice(&self.pending[..n]);
        self.pending.drain(..n);
        Ok(n)
    }
}

struct Screen(Rc<RefCell<Vec<u8>>>);

impl Write for Screen {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.borrow_mut().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn oracle_config(tmp: &TempDir) -> RunConfig {
    let config = tiny_config(tmp.path());
    stage("gen-corpus", &config, &[]);
    let mut c = RunConfig::load(&config).unwrap();
    c.nlu_mode = NluMode::Oracle;
    c.policy.mode = PolicyMode::Oracle;
    c
}

#[test]
fn terminal_play_finds_a_truthful_users_movie() {
    let tmp = TempDir::new().unwrap();
    let agent = load_agent(&oracle_config(&tmp)).unwrap();
    let attributes = agent.corpus.schema.attributes.clone();
    let mut found = 0;
    for seed in 0..10u64 {
        let pick = (seed as usize * 3) % 8;
        let screen = Rc::new(RefCell::new(Vec::new()));
        let pool = agent.corpus.split_indices(md3::corpus::Split::Dialogue);
        let candidates = md3::engine::Episode::sample(&pool, 8, seed)
            .unwrap()
            .candidates;
        let player = Player {
            screen: screen.clone(),
            target: agent.corpus.records[candidates[pick]].clone(),
            attributes: attributes.clone(),
            position: pick,
            pending: Vec::new(),
        };
        let log = play(
            &agent,
            8,
            seed,
            BufReader::new(player),
            Screen(screen.clone()),
        )
        .unwrap()
        .expect("finished game");
        assert_eq!(log.target, agent.corpus.records[candidates[pick]].object_id);
        assert!(log.asks <= 5);
        if log.rank == 1 {
            assert_eq!(log.guess, log.target);
            found += 1;
        }
    }
    assert!(found >= 9, "found {found} of 10");
}

#[test]
fn terminal_play_edge_cases() {
    let tmp = TempDir::new().unwrap();
    let agent = load_agent(&oracle_config(&tmp)).unwrap();

    let input = "unknown\n".repeat(5) + "2\n";
    let mut out = Vec::new();
    let log = play(&agent, 8, 1, input.as_bytes(), &mut out)
        .unwrap()
        .unwrap();
    assert_eq!(log.asks, 5);
    assert!(log
        .turns
        .iter()
        .all(|t| t.state.p.iter().all(|p| (p - 0.125).abs() < 1e-12)));
    assert_eq!(log.target, log.candidates[1]);
    assert_eq!(log.guess, log.candidates[0]);

    let mut out = Vec::new();
    assert!(play(&agent, 8, 1, "unknown\n".as_bytes(), &mut out)
        .unwrap()
        .is_none());
    assert!(String::from_utf8(out).unwrap().contains("game abandoned"));

    let input = "unknown\n".repeat(5) + "0\nnine\n3\n";
    let mut out = Vec::new();
    let log = play(&agent, 8, 1, input.as_bytes(), &mut out)
        .unwrap()
        .unwrap();
    assert_eq!(log.target, log.candidates[2]);
    assert_eq!(
        String::from_utf8(out)
            .unwrap()
            .matches("enter a number")
            .count(),
        2
    );
}
