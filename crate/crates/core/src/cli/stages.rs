use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::corpus::{
    corpus_stats, generate_dialogues, load_dialogues, save_dialogues, AttributeSchema, Corpus,
    Split, DIALOGUES_FILE, DOCUMENTS_FILE, RECORDS_FILE, SCHEMA_FILE,
};
use crate::encoder::{pretrain, retrieval_accuracy, DocReps};
use crate::engine::{
    evaluate, read_episodes, replay, train_reinforce, write_dynamics, write_episodes,
    write_metrics, write_reward_curve, Agent, NluMode, Templates,
};
use crate::error::{Md3Error, Result};
use crate::nlu::{build_examples, train_nlu};
use crate::policy::PolicyParams;
use crate::text::Vocab;

use super::config::RunConfig;

pub const VERSION: &str = concat!("md3 ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const REPS_FILE: &str = "reps.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    GenCorpus,
    Pretrain,
    TrainNlu,
    TrainRl,
    Eval,
    Stats,
    Play,
    Serve,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::GenCorpus => "gen-corpus",
            Stage::Pretrain => "pretrain",
            Stage::TrainNlu => "train-nlu",
            Stage::TrainRl => "train-rl",
            Stage::Eval => "eval",
            Stage::Stats => "stats",
            Stage::Play => "play",
            Stage::Serve => "serve",
        }
    }
}

/// Written next to every stage's outputs. Holds no timestamps, so equal
/// runs give equal bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: Stage,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    /// SHA-256 of each input and output file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn file_hash(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

struct Run {
    stage: Stage,
    config: RunConfig,
    out: PathBuf,
    inputs: BTreeMap<String, String>,
}

impl Run {
    fn new(stage: Stage, config: &RunConfig, default_out: PathBuf) -> Result<Self> {
        config.validate()?;
        let out = config.paths.out.clone().unwrap_or(default_out);
        fs::create_dir_all(&out)?;
        info!("{}: writing to {}", stage.name(), out.display());
        Ok(Run {
            stage,
            config: config.clone(),
            out,
            inputs: BTreeMap::new(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Md3Error::NotFound(format!("input {}", path.display())));
        }
        self.inputs
            .insert(path.display().to_string(), file_hash(path)?);
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(self, outputs: &[&str]) -> Result<PathBuf> {
        let mut hashes = BTreeMap::new();
        for name in outputs {
            hashes.insert(name.to_string(), file_hash(&self.out.join(name))?);
        }
        let manifest = Manifest {
            stage: self.stage,
            version: VERSION.into(),
            config_hash: self.config.hash()?,
            seed: self.config.seed,
            config: self.config,
            inputs: self.inputs,
            outputs: hashes,
        };
        fs::write(
            self.out.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest)? + "\n",
        )?;
        Ok(self.out)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn load_corpus(run: &mut Run) -> Result<Corpus> {
    let dir = run.config.corpus_dir();
    run.input(&dir.join(RECORDS_FILE))?;
    run.input(&dir.join(DOCUMENTS_FILE))?;
    Corpus::load(&dir)
}

fn load_checkpoint(run: &mut Run, default: PathBuf) -> Result<Checkpoint> {
    let path = run.config.paths.checkpoint.clone().unwrap_or(default);
    run.input(&path)?;
    Checkpoint::load(&path)
}

/// Document representations for `ck` over `corpus`, cached beside the
/// encoder checkpoint.
pub fn reps_for(config: &RunConfig, ck: &Checkpoint, corpus: &Corpus) -> Result<DocReps> {
    let key = hex::encode(Sha256::digest(serde_json::to_vec(&ck.encoder)?));
    let cache = config.data_dir().join("encoder").join(REPS_FILE);
    if let Some(reps) = DocReps::load_cached(&cache, &key, &corpus.hash())? {
        return Ok(reps);
    }
    info!("encoding {} documents", corpus.len());
    let reps = DocReps::build(&ck.encoder, corpus)?;
    if let Some(dir) = cache.parent() {
        fs::create_dir_all(dir)?;
        reps.save(&cache, &key, &corpus.hash())?;
    }
    Ok(reps)
}

pub fn gen_corpus(config: &RunConfig) -> Result<PathBuf> {
    let mut run = Run::new(Stage::GenCorpus, config, config.corpus_dir())?;
    let corpus = Corpus::generate(AttributeSchema::movie(), config.corpus.n, config.seed)?;
    corpus.save(&run.out)?;
    let train = corpus.subset(&corpus.split_indices(Split::Pretrain));
    let dialogues = generate_dialogues(
        &train.schema,
        &train.records,
        &train.documents,
        config.corpus.dialogue_m.min(train.len()),
        config.corpus.dialogues,
        config.seed ^ 0xd1a1,
    )?;
    save_dialogues(&run.path(DIALOGUES_FILE), &dialogues)?;
    run.inputs.clear();
    run.finish(&[SCHEMA_FILE, RECORDS_FILE, DOCUMENTS_FILE, DIALOGUES_FILE])
}

#[derive(Serialize)]
struct PretrainSummary<'a> {
    losses: &'a [f64],
    skipped_attributes: &'a [String],
    held_out_accuracy: f64,
}

pub fn pretrain_stage(config: &RunConfig) -> Result<PathBuf> {
    let mut run = Run::new(Stage::Pretrain, config, config.data_dir().join("encoder"))?;
    let corpus = load_corpus(&mut run)?;
    let templates = Templates::for_attributes(&corpus.schema.attributes);
    let template_tokens = templates.tokens();
    let vocab = Vocab::build(
        corpus
            .documents
            .iter()
            .flat_map(|d| d.sentences.iter().flatten())
            .chain(template_tokens.iter())
            .map(String::as_str),
    );
    let members = corpus.split_indices(Split::Pretrain);
    let (params, report) = pretrain(&corpus, &members, vocab, &config.encoder, config.seed)?;
    let held = corpus.split_indices(Split::Dialogue);
    let accuracy = retrieval_accuracy(
        &params,
        &corpus,
        &held,
        200,
        config.encoder.negatives,
        config.seed ^ 0xacc,
    )?;
    info!("held-out retrieval accuracy {accuracy:.3}");
    let ck = Checkpoint::new(&corpus.schema, params);
    ck.save(&run.path(CHECKPOINT_FILE))?;
    write_json(
        &run.path("report.json"),
        &PretrainSummary {
            losses: &report.losses,
            skipped_attributes: &report.skipped_attributes,
            held_out_accuracy: accuracy,
        },
    )?;
    reps_for(config, &ck, &corpus)?;
    run.finish(&[CHECKPOINT_FILE, "report.json"])
}

pub fn train_nlu_stage(config: &RunConfig) -> Result<PathBuf> {
    let mut run = Run::new(Stage::TrainNlu, config, config.data_dir().join("nlu"))?;
    let corpus = load_corpus(&mut run)?;
    let dialogues_path = config.corpus_dir().join(DIALOGUES_FILE);
    run.input(&dialogues_path)?;
    let dialogues = load_dialogues(&dialogues_path)?;
    let mut ck = load_checkpoint(
        &mut run,
        config.data_dir().join("encoder").join(CHECKPOINT_FILE),
    )?;
    ck.check_schema(&corpus.schema)?;
    let reps = reps_for(config, &ck, &corpus)?;
    let templates = Templates::for_attributes(&corpus.schema.attributes);
    let examples = build_examples(
        &dialogues,
        &corpus,
        &reps,
        &templates,
        config.nlu.unknown_rate,
        config.seed,
    )?;
    info!("{} labelled turns", examples.len());
    let (nlu, report) = train_nlu(&examples, &ck.encoder, &reps, &config.nlu, config.seed)?;
    ck.nlu = Some(nlu);
    ck.policy = None;
    ck.save(&run.path(CHECKPOINT_FILE))?;
    write_json(&run.path("report.json"), &report)?;
    run.finish(&[CHECKPOINT_FILE, "report.json"])
}

/// Where `eval`, `play` and `serve` look for a checkpoint by default.
fn default_checkpoint(config: &RunConfig) -> Option<PathBuf> {
    let dir = config.data_dir();
    if config.policy.mode.uses_projection() {
        Some(
            dir.join(format!("policy-{}", config.policy.mode.name()))
                .join(CHECKPOINT_FILE),
        )
    } else if config.nlu_mode == NluMode::Neural {
        Some(dir.join("nlu").join(CHECKPOINT_FILE))
    } else {
        None
    }
}

fn build_agent(run: &mut Run, corpus: Corpus) -> Result<Agent> {
    let config = run.config.clone();
    let corpus = Arc::new(corpus);
    let path = config
        .paths
        .checkpoint
        .clone()
        .or_else(|| default_checkpoint(&config));
    match path {
        None => Agent::oracle(corpus, config.policy.clone()),
        Some(path) => {
            let ck = load_checkpoint(run, path)?;
            let reps = reps_for(&config, &ck, &corpus)?;
            Agent::with_model(
                corpus,
                Arc::new(ck),
                Arc::new(reps),
                config.policy.clone(),
                config.nlu_mode,
            )
        }
    }
}

/// Agent for interactive use: corpus and checkpoints as configured.
pub fn load_agent(config: &RunConfig) -> Result<Agent> {
    let mut run = Run {
        stage: Stage::Play,
        config: config.clone(),
        out: PathBuf::new(),
        inputs: BTreeMap::new(),
    };
    let corpus = load_corpus(&mut run)?;
    build_agent(&mut run, corpus)
}

pub fn train_rl_stage(config: &RunConfig) -> Result<PathBuf> {
    let mode = config.policy.mode;
    if !mode.uses_projection() {
        return Err(Md3Error::InvalidConfig(format!(
            "policy `{mode}` has nothing to train"
        )));
    }
    let dir = config.data_dir();
    let mut run = Run::new(
        Stage::TrainRl,
        config,
        dir.join(format!("policy-{}", mode.name())),
    )?;
    let corpus = Arc::new(load_corpus(&mut run)?);
    let mut ck = load_checkpoint(&mut run, dir.join("nlu").join(CHECKPOINT_FILE))?;
    let reps = reps_for(config, &ck, &corpus)?;
    if ck.policy.is_none() {
        ck.policy = Some(PolicyParams::new(ck.encoder.config.rep_dim(), config.seed));
    }
    let mut policy = config.policy.clone();
    policy.sample = true;
    let mut agent = Agent::with_model(
        corpus.clone(),
        Arc::new(ck.clone()),
        Arc::new(reps),
        policy,
        config.nlu_mode,
    )?;
    let pool = corpus.split_indices(Split::Dialogue);
    let report = train_reinforce(&mut agent, &pool, &config.rl, config.seed)?;
    let (first, last) = report.improvement(0.1);
    info!("mean return: first 10% {first:.3}, last 10% {last:.3}");
    ck.policy = agent.policy_params.clone();
    ck.save(&run.path(CHECKPOINT_FILE))?;
    write_reward_curve(&run.path("reward_curve.csv"), &report.curve)?;
    write_json(&run.path("report.json"), &report)?;
    run.finish(&[CHECKPOINT_FILE, "reward_curve.csv", "report.json"])
}

pub fn eval_stage(config: &RunConfig, replay_file: Option<&Path>) -> Result<PathBuf> {
    let p = &config.policy;
    let name = match replay_file {
        Some(f) => format!("replay-{}", &file_hash(f)?[..12]),
        None => format!(
            "eval-{}-{}-m{}-k{}-t{}-s{}",
            p.mode.name(),
            config.nlu_mode.name(),
            config.eval.m,
            p.k,
            p.max_turns,
            config.seed
        ),
    };
    let mut run = Run::new(
        Stage::Eval,
        config,
        config.data_dir().join("runs").join(name),
    )?;
    let corpus = load_corpus(&mut run)?;
    let agent = build_agent(&mut run, corpus)?;
    if let Some(file) = replay_file {
        run.input(file)?;
        let logs = read_episodes(file)?;
        let mut mismatched = Vec::new();
        for (i, log) in logs.iter().enumerate() {
            if !replay(&agent, log)?.mismatches.is_empty() {
                mismatched.push(i);
            }
        }
        write_json(
            &run.path("replay.json"),
            &serde_json::json!({ "episodes": logs.len(), "mismatched": mismatched }),
        )?;
        let out = run.finish(&["replay.json"])?;
        if !mismatched.is_empty() {
            return Err(Md3Error::Contract(format!(
                "{} of {} transcripts did not replay",
                mismatched.len(),
                logs.len()
            )));
        }
        return Ok(out);
    }
    let pool = agent.corpus.split_indices(Split::Dialogue);
    let result = evaluate(&agent, &pool, &config.eval, config.seed)?;
    let m = &result.metrics;
    info!(
        "S1 {:.3} S3 {:.3} MRR {:.3} T {:.2} R {:.3}",
        m.s1, m.s3, m.mrr, m.t, m.r
    );
    write_metrics(&run.path("metrics.json"), m)?;
    write_episodes(&run.path("episodes.jsonl"), &result.episodes)?;
    write_dynamics(
        &run.path("dynamics.csv"),
        &result.episodes,
        config.policy.max_turns,
    )?;
    run.finish(&["metrics.json", "episodes.jsonl", "dynamics.csv"])
}

pub fn stats_stage(config: &RunConfig) -> Result<(PathBuf, String)> {
    let mut run = Run::new(
        Stage::Stats,
        config,
        config.data_dir().join("runs").join("stats"),
    )?;
    let corpus = load_corpus(&mut run)?;
    let stats = corpus_stats(&corpus.schema, &corpus.records, &corpus.documents)?;
    let text = serde_json::to_string_pretty(&stats)? + "\n";
    fs::write(run.path("stats.json"), &text)?;
    Ok((run.finish(&["stats.json"])?, text))
}
